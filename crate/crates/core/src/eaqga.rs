//! The entanglement-aware quantum-enhanced genetic algorithm.
//!
//! Each generation keeps the two best bitstrings seen so far. Bit pairs that
//! are correlated the same way in both of them (equal in both, or different
//! in both) become candidates for entanglement. Candidates are kept at random
//! with a probability driven by the normalized coupling `Σn` and a decay
//! schedule, pruned to a spanning forest, and turned into parity chains. Every
//! free qubit and chain control is biased toward the best bitstring with
//! probability `p_a`. Each of the `N` circuits is sampled once.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{normalize_coupling, Bitstring, NormalizedCoupling, QuboProblem};
use crate::record::{rank_order, Algorithm, Incumbent, RunRecord};
use crate::sampler::{sample, Chain, Parity, SamplingPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EaqgaConfig {
    pub population: usize,
    pub max_iterations: usize,
    /// Probability that a sampled bit reproduces the best solution's bit.
    pub p_a: f64,
    /// Base pair-selection probability.
    pub p_s: f64,
    pub seed: u64,
}

impl Default for EaqgaConfig {
    fn default() -> Self {
        EaqgaConfig {
            population: 10,
            max_iterations: 20,
            p_a: 0.95,
            p_s: 0.6,
            seed: 0,
        }
    }
}

impl EaqgaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::usage("EAQGA population must be at least 2"));
        }
        if self.max_iterations < 1 {
            return Err(Error::usage("EAQGA needs at least one iteration"));
        }
        for (name, p) in [("p_a", self.p_a), ("p_s", self.p_s)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::usage(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// The two best distinct bitstrings found so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ElitismPool {
    pub best1: Incumbent,
    /// Equals `best1` until a second distinct bitstring has been seen.
    pub best2: Incumbent,
}

/// Merges an evaluated population into the pool (or creates it).
pub fn update_pool(pool: Option<&ElitismPool>, population: &[(Bitstring, f64)]) -> Result<ElitismPool> {
    if population.is_empty() {
        return Err(Error::usage("cannot update the elitism pool from an empty population"));
    }
    let mut all: Vec<(Bitstring, f64)> = Vec::with_capacity(population.len() + 2);
    if let Some(p) = pool {
        all.push((p.best1.x.clone(), p.best1.fitness));
        all.push((p.best2.x.clone(), p.best2.fitness));
    }
    all.extend_from_slice(population);
    all.sort_by(rank_order);
    all.dedup_by(|a, b| a.0 == b.0);
    let best1 = Incumbent::new(all[0].0.clone(), all[0].1);
    let best2 = all
        .get(1)
        .map(|(x, f)| Incumbent::new(x.clone(), *f))
        .unwrap_or_else(|| best1.clone());
    Ok(ElitismPool { best1, best2 })
}

/// Bit pairs `(i, j)`, `i < j`, that show the same Bell-like pattern in both parents.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CandidatePairs {
    /// Ascending lexicographic `(i, j)`; the parity is the pair's kind.
    pairs: Vec<(usize, usize, Parity)>,
}

impl CandidatePairs {
    pub fn all(&self) -> &[(usize, usize, Parity)] {
        &self.pairs
    }

    pub fn positive(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.of_kind(Parity::Positive)
    }

    pub fn negative(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.of_kind(Parity::Negative)
    }

    fn of_kind(&self, kind: Parity) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs
            .iter()
            .filter(move |p| p.2 == kind)
            .map(|&(i, j, _)| (i, j))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Exhaustive scan: positive when the pair matches in both parents,
/// negative when it differs in both.
pub fn detect_candidate_pairs(x_b1: &Bitstring, x_b2: &Bitstring) -> Result<CandidatePairs> {
    if x_b1.len() != x_b2.len() {
        return Err(Error::usage(format!(
            "parents have different lengths ({} and {})",
            x_b1.len(),
            x_b2.len()
        )));
    }
    let (a, b) = (x_b1.bits(), x_b2.bits());
    let n = a.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let pa = Parity::between(a[i], a[j]);
            if pa == Parity::between(b[i], b[j]) {
                pairs.push((i, j, pa));
            }
        }
    }
    Ok(CandidatePairs { pairs })
}

/// `df(t) = 0.5 + t / (2·T_max)`.
pub fn decay_factor(t: usize, t_max: usize) -> f64 {
    0.5 + t as f64 / (2.0 * t_max as f64)
}

/// Selection probability of a candidate pair at generation `t`.
///
/// Positive pairs with positive coupling and negative pairs with non-negative
/// coupling are damped by the decay factor; the other two cases are not.
pub fn pair_probability(
    pair: (usize, usize),
    kind: Parity,
    sigma_n: &NormalizedCoupling,
    p_s: f64,
    t: usize,
    t_max: usize,
) -> f64 {
    let s = sigma_n.get(pair.0, pair.1);
    let damped = match kind {
        Parity::Positive => s > 0.0,
        Parity::Negative => s >= 0.0,
    };
    if damped {
        p_s * decay_factor(t, t_max) * s.abs()
    } else {
        p_s * s.abs()
    }
}

/// Independently keeps each candidate with its [`pair_probability`], drawing
/// one uniform per candidate in ascending `(i, j)` order.
pub fn select_pairs<R: Rng + ?Sized>(
    candidates: &CandidatePairs,
    sigma_n: &NormalizedCoupling,
    p_s: f64,
    t: usize,
    t_max: usize,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    candidates
        .pairs
        .iter()
        .filter_map(|&(i, j, kind)| {
            let p = pair_probability((i, j), kind, sigma_n, p_s, t, t_max);
            (rng.random::<f64>() < p).then_some((i, j))
        })
        .collect()
}

/// A chain before its control bias is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSkeleton {
    pub control: usize,
    /// Ascending by index.
    pub targets: Vec<(usize, Parity)>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Groups selected pairs into chains.
///
/// Edges are taken in ascending order and any edge closing a cycle is dropped,
/// so at most `n − 1` pairs survive. Each tree's control is its highest-degree
/// vertex (lowest index on ties); target parity follows `x_b1`.
pub fn assemble_chains(selected: &[(usize, usize)], x_b1: &Bitstring) -> Result<Vec<ChainSkeleton>> {
    let n = x_b1.len();
    let mut edges: Vec<(usize, usize)> = selected
        .iter()
        .map(|&(i, j)| (i.min(j), i.max(j)))
        .collect();
    if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| i == j || j >= n) {
        return Err(Error::usage(format!("invalid pair ({i}, {j}) for {n} qubits")));
    }
    edges.sort_unstable();
    edges.dedup();

    let mut forest = DisjointSet::new(n);
    let mut degree = vec![0usize; n];
    for &(i, j) in &edges {
        if forest.union(i, j) {
            degree[i] += 1;
            degree[j] += 1;
        }
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, &d) in degree.iter().enumerate() {
        if d > 0 {
            let root = forest.find(v);
            members[root].push(v);
        }
    }
    let mut chains: Vec<ChainSkeleton> = members
        .into_iter()
        .filter(|m| m.len() > 1)
        .map(|m| {
            // max_by_key keeps the last maximum; reverse so the lowest index wins ties
            let control = *m.iter().rev().max_by_key(|&&v| degree[v]).expect("nonempty");
            let targets = m
                .iter()
                .filter(|&&v| v != control)
                .map(|&v| (v, Parity::between(x_b1.get(control), x_b1.get(v))))
                .collect();
            ChainSkeleton { control, targets }
        })
        .collect();
    chains.sort_by_key(|c| c.control);
    Ok(chains)
}

/// Probability of measuring 1 for a qubit biased toward `bit`.
#[inline]
fn biased_p1(bit: u8, p_a: f64) -> f64 {
    if bit == 1 {
        p_a
    } else {
        1.0 - p_a
    }
}

/// Attaches the `p_a` bias toward `x_b1` to every chain control and free qubit.
pub fn build_plan(x_b1: &Bitstring, chains: &[ChainSkeleton], p_a: f64) -> Result<SamplingPlan> {
    let n = x_b1.len();
    let mut in_chain = vec![false; n];
    for c in chains {
        for v in std::iter::once(c.control).chain(c.targets.iter().map(|t| t.0)) {
            match in_chain.get_mut(v) {
                Some(slot) if !*slot => *slot = true,
                _ => {
                    return Err(Error::Internal(format!(
                        "qubit {v} is out of range or shared between chains"
                    )))
                }
            }
        }
    }
    let independents = (0..n)
        .filter(|&i| !in_chain[i])
        .map(|i| (i, biased_p1(x_b1.get(i), p_a)))
        .collect();
    let chains = chains
        .iter()
        .map(|c| Chain {
            control: c.control,
            control_p1: biased_p1(x_b1.get(c.control), p_a),
            targets: c.targets.clone(),
        })
        .collect();
    SamplingPlan::new(n, independents, chains).map_err(|e| Error::Internal(e.to_string()))
}

/// Runs EAQGA. See [`run_eaqga_observed`] for plan inspection.
pub fn run_eaqga(problem: &QuboProblem, cfg: &EaqgaConfig) -> Result<RunRecord> {
    run_eaqga_observed(problem, cfg, |_, _, _| {})
}

/// Runs EAQGA, handing every generated plan to `observe` along with its
/// 1-based generation index and the pool it was built from (`None` for the
/// initial uniform generation).
pub fn run_eaqga_observed<F>(problem: &QuboProblem, cfg: &EaqgaConfig, mut observe: F) -> Result<RunRecord>
where
    F: FnMut(usize, &SamplingPlan, Option<&ElitismPool>),
{
    cfg.validate()?;
    let n = problem.n();
    let sigma_n = normalize_coupling(problem);
    let mut rng = crate::rng_from_seed(cfg.seed);
    let mut series = Vec::with_capacity(cfg.max_iterations);

    let initial = SamplingPlan::uniform(n);
    let population: Vec<(Bitstring, f64)> = (0..cfg.population)
        .map(|_| {
            observe(1, &initial, None);
            let x = sample(&initial, &mut rng);
            let f = problem.fitness(&x);
            (x, f)
        })
        .collect();
    let mut pool = update_pool(None, &population)?;
    series.push(pool.best1.fitness);

    for t in 2..=cfg.max_iterations {
        let candidates = detect_candidate_pairs(&pool.best1.x, &pool.best2.x)?;
        let mut population = Vec::with_capacity(cfg.population);
        for _ in 0..cfg.population {
            let selected = select_pairs(&candidates, &sigma_n, cfg.p_s, t, cfg.max_iterations, &mut rng);
            let chains = assemble_chains(&selected, &pool.best1.x)?;
            let plan = build_plan(&pool.best1.x, &chains, cfg.p_a)?;
            observe(t, &plan, Some(&pool));
            let x = sample(&plan, &mut rng);
            let f = problem.fitness(&x);
            population.push((x, f));
        }
        pool = update_pool(Some(&pool), &population)?;
        series.push(pool.best1.fitness);
    }

    Ok(RunRecord::new(
        Algorithm::Eaqga,
        cfg.seed,
        cfg.population,
        pool.best1,
        series,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Bitstring {
        s.parse().unwrap()
    }

    #[test]
    fn worked_example_pairs() {
        let c = detect_candidate_pairs(&bits("00110"), &bits("01011")).unwrap();
        assert_eq!(c.positive().collect::<Vec<_>>(), vec![(1, 4)]);
        assert_eq!(c.negative().collect::<Vec<_>>(), vec![(0, 3), (1, 2), (2, 4)]);
    }

    #[test]
    fn identical_two_bit_parents() {
        let c = detect_candidate_pairs(&bits("01"), &bits("01")).unwrap();
        assert_eq!(c.positive().count(), 0);
        assert_eq!(c.negative().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn detect_rejects_length_mismatch() {
        assert!(detect_candidate_pairs(&bits("01"), &bits("011")).is_err());
    }

    fn coupling(v: f64) -> NormalizedCoupling {
        NormalizedCoupling::from_rows(vec![vec![1.0, v], vec![v, 1.0]]).unwrap()
    }

    #[test]
    fn pair_probability_cases() {
        for kind in [Parity::Positive, Parity::Negative] {
            for t in [1, 10, 20] {
                assert_eq!(pair_probability((0, 1), kind, &coupling(0.0), 0.6, t, 20), 0.0);
            }
        }
        let p = pair_probability((0, 1), Parity::Positive, &coupling(1.0), 0.6, 20, 20);
        assert!((p - 0.6).abs() < 1e-15);
        let p = pair_probability((0, 1), Parity::Negative, &coupling(0.5), 0.6, 10, 20);
        assert!((p - 0.225).abs() < 1e-15);
        // undamped cases
        let p = pair_probability((0, 1), Parity::Positive, &coupling(-0.5), 0.6, 1, 20);
        assert!((p - 0.3).abs() < 1e-15);
        let p = pair_probability((0, 1), Parity::Negative, &coupling(-0.5), 0.6, 1, 20);
        assert!((p - 0.3).abs() < 1e-15);
    }

    #[test]
    fn decay_endpoints() {
        assert_eq!(decay_factor(20, 20), 1.0);
        assert!((decay_factor(1, 20) - 0.525).abs() < 1e-15);
        assert_eq!(decay_factor(10, 20), 0.75);
    }

    #[test]
    fn select_degenerate_probabilities() {
        let c = detect_candidate_pairs(&bits("00110"), &bits("01011")).unwrap();
        let ones = NormalizedCoupling::from_rows(vec![vec![-1.0; 5]; 5]).unwrap();
        let mut rng = crate::rng_from_seed(9);
        for _ in 0..100 {
            assert!(select_pairs(&c, &ones, 0.0, 3, 20, &mut rng).is_empty());
            assert_eq!(select_pairs(&c, &ones, 1.0, 3, 20, &mut rng).len(), c.len());
        }
    }

    #[test]
    fn figure_chain() {
        let chains = assemble_chains(&[(1, 2), (1, 4)], &bits("00110")).unwrap();
        assert_eq!(
            chains,
            vec![ChainSkeleton {
                control: 1,
                targets: vec![(2, Parity::Negative), (4, Parity::Positive)],
            }]
        );
    }

    #[test]
    fn cycle_edges_are_dropped() {
        let chains = assemble_chains(&[(1, 2), (1, 4), (2, 4)], &bits("00110")).unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].targets.len(), 2);
        let mut members: Vec<usize> = chains[0].targets.iter().map(|t| t.0).collect();
        members.push(chains[0].control);
        members.sort();
        assert_eq!(members, vec![1, 2, 4]);
        assert!(assemble_chains(&[], &bits("00110")).unwrap().is_empty());
    }

    #[test]
    fn control_tie_goes_to_lowest_index() {
        // path 3-5-7: 5 has degree 2
        let chains = assemble_chains(&[(3, 5), (5, 7)], &bits("00000000")).unwrap();
        assert_eq!(chains[0].control, 5);
        // single edge: both degree 1
        let chains = assemble_chains(&[(6, 2)], &bits("00000000")).unwrap();
        assert_eq!(chains[0].control, 2);
    }

    #[test]
    fn assemble_rejects_bad_pairs() {
        assert!(assemble_chains(&[(1, 1)], &bits("000")).is_err());
        assert!(assemble_chains(&[(1, 3)], &bits("000")).is_err());
    }

    #[test]
    fn plan_examples() {
        let plan = build_plan(&bits("10"), &[], 0.95).unwrap();
        assert_eq!(plan.independents()[&0], 0.95);
        assert!((plan.independents()[&1] - 0.05).abs() < 1e-15);

        let plan = build_plan(&bits("01101"), &[], 0.5).unwrap();
        assert_eq!(plan, SamplingPlan::uniform(5));

        let x = bits("00110");
        let chains = assemble_chains(&[(1, 2), (1, 4)], &x).unwrap();
        let plan = build_plan(&x, &chains, 0.95).unwrap();
        assert!((plan.chains()[0].control_p1 - 0.05).abs() < 1e-15);
        assert!((plan.independents()[&0] - 0.05).abs() < 1e-15);
        assert_eq!(plan.independents()[&3], 0.95);
        assert_eq!(plan.independents().len(), 2);
    }

    #[test]
    fn plan_matches_rotation_angles() {
        use crate::sampler::{bias_angle, p1_from_angle};
        let x = bits("0110");
        let plan = build_plan(&x, &[], 0.95).unwrap();
        for (i, &p1) in plan.independents() {
            let theta = bias_angle(0.95, x.get(*i)).unwrap();
            assert!((p1_from_angle(theta) - p1).abs() < 1e-12);
        }
    }

    #[test]
    fn overlapping_chains_are_internal_errors() {
        let chains = vec![
            ChainSkeleton {
                control: 0,
                targets: vec![(1, Parity::Positive)],
            },
            ChainSkeleton {
                control: 1,
                targets: vec![(2, Parity::Positive)],
            },
        ];
        assert!(matches!(build_plan(&bits("000"), &chains, 0.9), Err(Error::Internal(_))));
    }

    #[test]
    fn pool_updates() {
        let pool = ElitismPool {
            best1: Incumbent::new(bits("11"), 5.0),
            best2: Incumbent::new(bits("10"), 4.0),
        };
        let worse = vec![(bits("00"), 1.0), (bits("01"), 3.9)];
        assert_eq!(update_pool(Some(&pool), &worse).unwrap(), pool);

        let pop = vec![(bits("00"), 1.0), (bits("10"), 2.0), (bits("01"), 2.0)];
        let fresh = update_pool(None, &pop).unwrap();
        assert_eq!(fresh.best1.x, bits("01"));
        assert_eq!(fresh.best2.x, bits("10"));

        let dup = vec![(bits("11"), 5.0), (bits("11"), 5.0)];
        assert_eq!(update_pool(Some(&pool), &dup).unwrap().best2, pool.best2);

        let single = update_pool(None, &[(bits("01"), 1.0), (bits("01"), 1.0)]).unwrap();
        assert_eq!(single.best1, single.best2);

        assert!(update_pool(None, &[]).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = [
            EaqgaConfig { population: 1, ..Default::default() },
            EaqgaConfig { max_iterations: 0, ..Default::default() },
            EaqgaConfig { p_a: 1.1, ..Default::default() },
            EaqgaConfig { p_s: -0.1, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }
}
