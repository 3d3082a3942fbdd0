//! Exhaustive maximization by Gray-code enumeration.
//!
//! Consecutive Gray codes differ in one bit, so the fitness can be updated in
//! `O(n)` per step through the field `h = Σx`. Anything within a small
//! tolerance of the running best is re-evaluated exactly before it is
//! compared, so the reported optimum and its tie-break are identical to a
//! naive full enumeration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Bitstring, QuboProblem};
use crate::record::Incumbent;

pub const DEFAULT_N_LIMIT: usize = 26;
/// Hard ceiling regardless of the requested limit.
pub const MAX_N: usize = 40;
/// Steps between exact re-anchoring of the incremental state.
const REANCHOR_INTERVAL: u64 = 1 << 16;
/// Problems at least this large are split into parallel prefix blocks.
const PARALLEL_MIN_N: usize = 18;
const PREFIX_BITS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_x: Bitstring,
    #[serde(rename = "fitness")]
    pub best_fitness: f64,
    #[serde(rename = "count")]
    pub evaluated_count: u64,
}

/// Returns the maximum-fitness bitstring (lexicographically smallest on ties).
/// Refuses problems with more than `n_limit` variables.
pub fn brute_force(problem: &QuboProblem, n_limit: usize) -> Result<OracleResult> {
    let n = problem.n();
    if n > n_limit {
        return Err(Error::usage(format!(
            "oracle refuses n = {n} above the limit of {n_limit}; raise the limit explicitly"
        )));
    }
    if n > MAX_N {
        return Err(Error::usage(format!("oracle cannot enumerate more than {MAX_N} variables")));
    }
    let prefix_bits = if n >= PARALLEL_MIN_N { PREFIX_BITS.min(n) } else { 0 };
    let scan = GrayScan::new(problem, prefix_bits);
    let blocks: Vec<Incumbent> = (0..1u64 << prefix_bits)
        .into_par_iter()
        .map(|prefix| scan.block(prefix))
        .collect();
    let mut best = blocks[0].clone();
    for b in &blocks[1..] {
        best.offer(&b.x, b.fitness);
    }
    Ok(OracleResult {
        best_x: best.x,
        best_fitness: best.fitness,
        evaluated_count: 1u64 << n,
    })
}

struct GrayScan<'a> {
    problem: &'a QuboProblem,
    prefix_bits: usize,
    tolerance: f64,
}

impl<'a> GrayScan<'a> {
    fn new(problem: &'a QuboProblem, prefix_bits: usize) -> Self {
        let n = problem.n();
        let magnitude: f64 = problem.mu().iter().map(|m| m.abs()).sum::<f64>()
            + problem.q() * (0..n).map(|i| problem.sigma_row(i).iter().map(|v| v.abs()).sum::<f64>()).sum::<f64>();
        GrayScan {
            problem,
            prefix_bits,
            tolerance: 1e-9 * magnitude.max(f64::MIN_POSITIVE),
        }
    }

    fn to_bitstring(&self, mask: u64) -> Bitstring {
        Bitstring::from_raw((0..self.problem.n()).map(|i| ((mask >> i) & 1) as u8).collect())
    }

    /// Exact fitness and local field `h_i = Σ_j Σ_ij x_j` for a mask.
    fn anchor(&self, mask: u64) -> (f64, Vec<f64>) {
        let p = self.problem;
        let n = p.n();
        let mut h = vec![0.0; n];
        for j in (0..n).filter(|&j| (mask >> j) & 1 == 1) {
            for (i, hi) in h.iter_mut().enumerate() {
                *hi += p.sigma(i, j);
            }
        }
        (p.fitness(&self.to_bitstring(mask)), h)
    }

    /// Enumerates every completion of the fixed low `prefix_bits` variables.
    fn block(&self, prefix: u64) -> Incumbent {
        let p = self.problem;
        let free = p.n() - self.prefix_bits;
        let mut walk = Walk::anchored(self, prefix);
        let mut best = Incumbent::new(self.to_bitstring(walk.mask), walk.value);

        for step in 1..(1u64 << free) {
            walk.flip(p, self.prefix_bits + step.trailing_zeros() as usize);
            if step % REANCHOR_INTERVAL == 0 {
                walk = Walk::anchored(self, walk.mask);
            }
            if walk.value >= best.fitness - self.tolerance {
                let x = self.to_bitstring(walk.mask);
                let exact = p.fitness(&x);
                best.offer(&x, exact);
            }
        }
        best
    }
}

/// Current assignment, its running fitness, and the field `h = Σx`.
struct Walk {
    mask: u64,
    value: f64,
    h: Vec<f64>,
}

impl Walk {
    fn anchored(scan: &GrayScan<'_>, mask: u64) -> Self {
        let (value, h) = scan.anchor(mask);
        Walk { mask, value, h }
    }

    /// Flips variable `v`; the fitness changes by
    /// `±(μ_v − q·(Σ_vv + 2·Σ_{j≠v} Σ_vj·x_j))`.
    fn flip(&mut self, p: &QuboProblem, v: usize) {
        let was_set = (self.mask >> v) & 1 == 1;
        let s_vv = p.sigma(v, v);
        let others = self.h[v] - if was_set { s_vv } else { 0.0 };
        let gain = p.mu()[v] - p.q() * (s_vv + 2.0 * others);
        let sign = if was_set { -1.0 } else { 1.0 };
        self.mask ^= 1 << v;
        self.value += sign * gain;
        for (hi, s) in self.h.iter_mut().zip(p.sigma_row(v)) {
            *hi += sign * s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{synth_problem, SynthSpec};

    fn naive(problem: &QuboProblem) -> Incumbent {
        let n = problem.n();
        let mut best: Option<Incumbent> = None;
        for k in 0..1u64 << n {
            let x = Bitstring::from_raw((0..n).map(|i| ((k >> i) & 1) as u8).collect());
            let f = problem.evaluate_fitness(&x).unwrap();
            match best.as_mut() {
                Some(b) => {
                    b.offer(&x, f);
                }
                None => best = Some(Incumbent::new(x, f)),
            }
        }
        best.unwrap()
    }

    #[test]
    fn toy_optimum() {
        let p = QuboProblem::new(vec![0.1, 0.2], vec![vec![0.04, 0.01], vec![0.01, 0.09]], 0.5).unwrap();
        let r = brute_force(&p, DEFAULT_N_LIMIT).unwrap();
        assert_eq!(r.best_x.to_string(), "11");
        assert!((r.best_fitness - 0.225).abs() < 1e-15);
        assert_eq!(r.evaluated_count, 4);
    }

    #[test]
    fn nonpositive_returns_pick_empty_portfolio() {
        let spec = SynthSpec {
            mu_min: -0.01,
            mu_max: 0.0,
            ..SynthSpec::default()
        };
        let p = synth_problem(8, 11, &spec).unwrap();
        let r = brute_force(&p, DEFAULT_N_LIMIT).unwrap();
        assert_eq!(r.best_x, Bitstring::zeros(8));
        assert_eq!(r.best_fitness, 0.0);
    }

    #[test]
    fn matches_naive_enumeration() {
        for seed in 0..5 {
            let p = synth_problem(12, seed, &SynthSpec::default()).unwrap();
            let r = brute_force(&p, DEFAULT_N_LIMIT).unwrap();
            let b = naive(&p);
            assert_eq!((r.best_x, r.best_fitness), (b.x, b.fitness));
        }
    }

    #[test]
    fn parallel_blocks_match_naive() {
        let p = synth_problem(PARALLEL_MIN_N, 3, &SynthSpec::default()).unwrap();
        let r = brute_force(&p, DEFAULT_N_LIMIT).unwrap();
        let b = naive(&p);
        assert_eq!((r.best_x, r.best_fitness), (b.x, b.fitness));
    }

    #[test]
    fn all_ties_resolve_to_zeros() {
        let p = QuboProblem::new(vec![0.0; 5], vec![vec![0.0; 5]; 5], 0.5).unwrap();
        let r = brute_force(&p, DEFAULT_N_LIMIT).unwrap();
        assert_eq!(r.best_x, Bitstring::zeros(5));
    }

    #[test]
    fn refuses_oversized_problems() {
        let p = synth_problem(10, 1, &SynthSpec::default()).unwrap();
        assert!(matches!(brute_force(&p, 9), Err(Error::Usage(_))));
    }

    #[test]
    fn incremental_updates_track_direct_evaluation() {
        for n in [10, 16] {
            let p = synth_problem(n, n as u64, &SynthSpec::default()).unwrap();
            let scan = GrayScan::new(&p, 0);
            let mut walk = Walk::anchored(&scan, 0);
            for step in 1..1u64 << n {
                walk.flip(&p, step.trailing_zeros() as usize);
                let direct = p.fitness(&scan.to_bitstring(walk.mask));
                assert!((walk.value - direct).abs() < 1e-9);
            }
        }
    }
}
