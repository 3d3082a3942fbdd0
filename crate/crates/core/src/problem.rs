//! QUBO problem model: the mean-variance portfolio objective, its fitness
//! evaluation, construction from price histories, synthetic instances and the
//! normalized coupling matrix used for pair selection.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance for accepting a coupling matrix as symmetric on load.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// A binary assignment `x ∈ {0,1}^n`. Ordering is lexicographic with bit 0
/// most significant, which is the tie-break order used by every solver.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bitstring(Vec<u8>);

impl Bitstring {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::usage(format!("bit value {b} is not 0 or 1")));
        }
        Ok(Bitstring(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Bitstring(vec![0; n])
    }

    /// Builds a bitstring from booleans.
    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        Bitstring(bits.into_iter().map(u8::from).collect())
    }

    pub(crate) fn from_raw(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Bitstring(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] ^= 1;
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Indices of the bits set to one, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| (b == 1).then_some(i))
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::usage(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Bitstring)
    }
}

impl Serialize for Bitstring {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bitstring {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Maximization objective `μᵀx − q·xᵀΣx` over binary `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    n: usize,
    mu: Vec<f64>,
    /// Row-major, exactly symmetric.
    sigma: Vec<f64>,
    q: f64,
    names: Option<Vec<String>>,
    meta: Option<serde_json::Value>,
}

impl QuboProblem {
    /// Validates and builds a problem. `sigma` must be square, finite and
    /// symmetric within [`SYMMETRY_TOLERANCE`]; it is then symmetrized exactly.
    pub fn new(mu: Vec<f64>, sigma: Vec<Vec<f64>>, q: f64) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::usage("problem must have at least one variable"));
        }
        if sigma.len() != n {
            return Err(Error::usage(format!(
                "sigma has {} rows, expected {n}",
                sigma.len()
            )));
        }
        if !q.is_finite() || q < 0.0 {
            return Err(Error::usage(format!("risk aversion q must be finite and >= 0, got {q}")));
        }
        if let Some(i) = mu.iter().position(|v| !v.is_finite()) {
            return Err(Error::usage(format!("mu[{i}] is not finite")));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in sigma.iter().enumerate() {
            if row.len() != n {
                return Err(Error::usage(format!(
                    "sigma row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::usage(format!("sigma[{i}][{j}] is not finite")));
            }
            flat.extend_from_slice(row);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (flat[i * n + j], flat[j * n + i]);
                if (a - b).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::usage(format!(
                        "sigma is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                flat[i * n + j] = avg;
                flat[j * n + i] = avg;
            }
        }
        Ok(QuboProblem {
            n,
            mu,
            sigma: flat,
            q,
            names: None,
            meta: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n {
            return Err(Error::usage(format!(
                "{} names given for {} variables",
                names.len(),
                self.n
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    #[inline]
    pub fn sigma(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.n + j]
    }

    pub fn sigma_row(&self, i: usize) -> &[f64] {
        &self.sigma[i * self.n..(i + 1) * self.n]
    }

    pub fn sigma_rows(&self) -> Vec<Vec<f64>> {
        self.sigma.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn meta(&self) -> Option<&serde_json::Value> {
        self.meta.as_ref()
    }

    /// `μ·x − q·xᵀΣx`; rejects bitstrings of the wrong length.
    pub fn evaluate_fitness(&self, x: &Bitstring) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::usage(format!(
                "bitstring has length {}, problem has {} variables",
                x.len(),
                self.n
            )));
        }
        Ok(self.fitness(x))
    }

    /// Unchecked fitness for solver inner loops.
    pub(crate) fn fitness(&self, x: &Bitstring) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let ones: Vec<usize> = x.ones().collect();
        let mut linear = 0.0;
        let mut quad = 0.0;
        for &i in &ones {
            linear += self.mu[i];
            let row = self.sigma_row(i);
            let mut acc = 0.0;
            for &j in &ones {
                acc += row[j];
            }
            quad += acc;
        }
        linear - self.q * quad
    }

    /// Reads the JSON problem file format.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ProblemFile =
            serde_json::from_str(s).map_err(|e| Error::data(format!("invalid problem JSON: {e}")))?;
        file.into_problem()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let file = ProblemFile {
            n: self.n,
            q: self.q,
            mu: self.mu.clone(),
            sigma: self.sigma_rows(),
            names: self.names.clone(),
            meta: self.meta.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("problem serializes");
        s.push('\n');
        s
    }

    /// Reorders variables: variable `i` of the result is variable `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::usage("not a permutation of the problem's variables"));
        }
        let mu = perm.iter().map(|&p| self.mu[p]).collect();
        let sigma = perm
            .iter()
            .map(|&a| perm.iter().map(|&b| self.sigma(a, b)).collect())
            .collect();
        QuboProblem::new(mu, sigma, self.q)
    }
}

#[derive(Serialize, Deserialize)]
struct ProblemFile {
    n: usize,
    q: f64,
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

impl ProblemFile {
    fn into_problem(self) -> Result<QuboProblem> {
        if self.mu.len() != self.n {
            return Err(Error::data(format!(
                "n = {} but mu has {} entries",
                self.n,
                self.mu.len()
            )));
        }
        let mut p = QuboProblem::new(self.mu, self.sigma, self.q).map_err(into_data)?;
        if let Some(names) = self.names {
            p = p.with_names(names).map_err(into_data)?;
        }
        if let Some(meta) = self.meta {
            p = p.with_meta(meta);
        }
        Ok(p)
    }
}

fn into_data(e: Error) -> Error {
    match e {
        Error::Usage(m) => Error::Data(m),
        other => other,
    }
}

/// Coupling matrix scaled by its largest absolute entry, so every entry lies in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCoupling {
    n: usize,
    values: Vec<f64>,
}

impl NormalizedCoupling {
    /// Builds directly from a square matrix; used to craft couplings in tests.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::usage("coupling matrix must be square"));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::usage("normalized coupling entries must lie in [-1, 1]"));
        }
        Ok(NormalizedCoupling { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Divides Σ by `max |Σ_ij|`. An all-zero Σ yields an all-zero result.
pub fn normalize_coupling(problem: &QuboProblem) -> NormalizedCoupling {
    let max = problem.sigma.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let values = if max == 0.0 {
        vec![0.0; problem.sigma.len()]
    } else {
        problem.sigma.iter().map(|v| v / max).collect()
    };
    NormalizedCoupling {
        n: problem.n,
        values,
    }
}

/// Price history: `T+1` observations of `n` assets.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDateTime>,
    prices: Vec<Vec<f64>>,
    tickers: Vec<String>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDateTime>, prices: Vec<Vec<f64>>, tickers: Vec<String>) -> Result<Self> {
        if tickers.is_empty() {
            return Err(Error::data("price series has no assets"));
        }
        if dates.len() < 2 {
            return Err(Error::data("price series needs at least two observations"));
        }
        if prices.len() != dates.len() {
            return Err(Error::data(format!(
                "{} dates but {} price rows",
                dates.len(),
                prices.len()
            )));
        }
        if let Some(w) = dates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::data(format!(
                "dates not strictly increasing at row {}",
                w + 1
            )));
        }
        for (t, row) in prices.iter().enumerate() {
            if row.len() != tickers.len() {
                return Err(Error::data(format!(
                    "row {t} has {} prices, expected {}",
                    row.len(),
                    tickers.len()
                )));
            }
            if let Some(i) = row.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
                return Err(Error::data(format!(
                    "nonpositive or non-finite price {} for {} at row {t}",
                    row[i], tickers[i]
                )));
            }
        }
        Ok(PriceSeries {
            dates,
            prices,
            tickers,
        })
    }

    /// Parses the price CSV: header `date,<ticker>...`, one row per date.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::data(format!("cannot read CSV header: {e}")))?
            .clone();
        if headers.get(0).map(|h| h.eq_ignore_ascii_case("date")) != Some(true) {
            return Err(Error::data("first CSV column must be named `date`"));
        }
        let tickers: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        let mut dates = Vec::new();
        let mut prices = Vec::new();
        for (row_idx, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::data(format!("CSV row {}: {e}", row_idx + 1)))?;
            let date = parse_timestamp(record.get(0).unwrap_or_default())?;
            let row = record
                .iter()
                .skip(1)
                .enumerate()
                .map(|(i, cell)| {
                    cell.parse::<f64>().map_err(|_| {
                        Error::data(format!(
                            "row {}: cannot parse price {cell:?} for {}",
                            row_idx + 1,
                            tickers.get(i).map(String::as_str).unwrap_or("?")
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            dates.push(date);
            prices.push(row);
        }
        PriceSeries::new(dates, prices, tickers)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDateTime] {
        &self.dates
    }

    /// Number of return periods `T`.
    pub fn periods(&self) -> usize {
        self.prices.len() - 1
    }

    /// Simple returns `R_it = P_it / P_i,t-1 − 1`, one row per period.
    pub fn returns(&self) -> Vec<Vec<f64>> {
        self.prices
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(p, prev)| p / prev - 1.0).collect())
            .collect()
    }
}

fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight is valid"));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|t| t.naive_utc())
        .map_err(|_| Error::data(format!("unrecognized date {s:?}")))
}

/// Sample mean returns and `1/(T−1)` covariance from a price history.
/// With a single return period the covariance is all zeros.
pub fn build_portfolio(prices: &PriceSeries, q: f64) -> Result<QuboProblem> {
    let returns = prices.returns();
    let n = prices.tickers.len();
    let periods = returns.len();
    let t = periods as f64;
    let mu: Vec<f64> = (0..n)
        .map(|i| returns.iter().map(|r| r[i]).sum::<f64>() / t)
        .collect();
    let mut sigma = vec![vec![0.0; n]; n];
    if periods >= 2 {
        for i in 0..n {
            for j in i..n {
                let s: f64 = returns
                    .iter()
                    .map(|r| (r[i] - mu[i]) * (r[j] - mu[j]))
                    .sum::<f64>()
                    / (t - 1.0);
                sigma[i][j] = s;
                sigma[j][i] = s;
            }
        }
    }
    let first = prices.dates.first().map(|d| d.to_string());
    let last = prices.dates.last().map(|d| d.to_string());
    Ok(QuboProblem::new(mu, sigma, q)?
        .with_names(prices.tickers.clone())?
        .with_meta(serde_json::json!({
            "source": "prices",
            "periods": periods,
            "first_date": first,
            "last_date": last,
        })))
}

/// Parameters of the synthetic instance generator.
///
/// Returns are drawn uniformly from `[mu_min, mu_max]`. The covariance is
/// `Σ = A·Aᵀ` for a one-factor loading matrix: row `i` of `A` is
/// `vol_i · [√ρ, √(1−ρ)·z_i1/√k, …, √(1−ρ)·z_ik/√k]` with `z` standard normal,
/// `ρ = correlation`, `k = factors` (0 means one per asset) and
/// `vol_i = vol_median · exp(vol_dispersion · g_i)`, `g_i` standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub mu_min: f64,
    pub mu_max: f64,
    /// Median per-period volatility.
    pub vol_median: f64,
    /// Log-normal spread of volatilities across assets.
    pub vol_dispersion: f64,
    /// Typical pairwise correlation through the shared factor, in `[0, 1]`.
    pub correlation: f64,
    pub factors: usize,
    pub q: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            mu_min: -0.0005,
            mu_max: 0.0025,
            vol_median: 0.015,
            vol_dispersion: 0.4,
            correlation: 0.3,
            factors: 0,
            q: 0.5,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let finite = [self.mu_min, self.mu_max, self.vol_median, self.vol_dispersion, self.correlation, self.q]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::usage("synth parameters must be finite"));
        }
        if self.mu_min > self.mu_max {
            return Err(Error::usage("synth mu_min exceeds mu_max"));
        }
        if self.vol_median <= 0.0 || self.vol_dispersion < 0.0 {
            return Err(Error::usage("synth needs vol_median > 0 and vol_dispersion >= 0"));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return Err(Error::usage("synth correlation must lie in [0, 1]"));
        }
        if self.q < 0.0 {
            return Err(Error::usage("synth q must be >= 0"));
        }
        Ok(())
    }
}

/// Deterministic synthetic portfolio instance with a positive semidefinite Σ.
pub fn synth_problem(n: usize, seed: u64, spec: &SynthSpec) -> Result<QuboProblem> {
    if n == 0 {
        return Err(Error::usage("synth needs n >= 1"));
    }
    spec.validate()?;
    let mut rng = crate::rng_from_seed(seed);
    let mu: Vec<f64> = (0..n)
        .map(|_| {
            if spec.mu_min == spec.mu_max {
                spec.mu_min
            } else {
                rng.random_range(spec.mu_min..spec.mu_max)
            }
        })
        .collect();
    let k = if spec.factors == 0 { n } else { spec.factors };
    let common = spec.correlation.sqrt();
    let specific = ((1.0 - spec.correlation) / k as f64).sqrt();
    let loadings: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let vol = spec.vol_median * (spec.vol_dispersion * rng.sample::<f64, _>(StandardNormal)).exp();
            let mut row = Vec::with_capacity(k + 1);
            row.push(vol * common);
            row.extend((0..k).map(|_| vol * specific * rng.sample::<f64, _>(StandardNormal)));
            row
        })
        .collect();
    let mut sigma = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = loadings[i].iter().zip(&loadings[j]).map(|(a, b)| a * b).sum();
            sigma[i][j] = v;
            sigma[j][i] = v;
        }
    }
    let names = (0..n).map(|i| format!("A{i:03}")).collect();
    Ok(QuboProblem::new(mu, sigma, spec.q)?
        .with_names(names)?
        .with_meta(serde_json::json!({
            "source": "synth",
            "n": n,
            "seed": seed,
            "spec": spec,
        })))
}
