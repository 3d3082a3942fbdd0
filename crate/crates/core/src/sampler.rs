//! Exact single-shot sampling of the circuits EAQGA builds.
//!
//! Those circuits only ever contain an RY rotation per control or free qubit,
//! optional X gates, and CNOT fan-outs from a control to its targets. Their
//! computational-basis statistics therefore factor into independent biased
//! qubits plus parity chains, which is what [`SamplingPlan`] stores. Only
//! probabilities are kept (`p1 = β²`); there are no phases to track.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Bitstring;

/// Largest register [`plan_distribution`] will enumerate.
pub const MAX_DISTRIBUTION_QUBITS: usize = 20;

/// Correlation between a chain target and its control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Parity {
    /// Target equals the control, `α|00⟩ + β|11⟩`.
    #[serde(rename = "POS")]
    Positive,
    /// Target is the control's complement, `α|01⟩ + β|10⟩`.
    #[serde(rename = "NEG")]
    Negative,
}

impl Parity {
    /// Target bit implied by a control bit.
    #[inline]
    pub fn apply(self, control_bit: u8) -> u8 {
        match self {
            Parity::Positive => control_bit,
            Parity::Negative => control_bit ^ 1,
        }
    }

    /// Parity relating two observed bits.
    pub fn between(a: u8, b: u8) -> Self {
        if a == b {
            Parity::Positive
        } else {
            Parity::Negative
        }
    }
}

/// One rotated control qubit fanned out through CNOTs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub control: usize,
    #[serde(rename = "p1")]
    pub control_p1: f64,
    pub targets: Vec<(usize, Parity)>,
}

/// Measurement statistics of one circuit: every qubit is either an
/// independent biased coin or belongs to exactly one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlan")]
pub struct SamplingPlan {
    n: usize,
    independents: BTreeMap<usize, f64>,
    /// Sorted by control index.
    chains: Vec<Chain>,
}

#[derive(Deserialize)]
struct RawPlan {
    n: usize,
    independents: BTreeMap<usize, f64>,
    chains: Vec<Chain>,
}

impl TryFrom<RawPlan> for SamplingPlan {
    type Error = Error;

    fn try_from(raw: RawPlan) -> Result<Self> {
        SamplingPlan::new(raw.n, raw.independents, raw.chains)
    }
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::usage(format!("{what} probability {p} outside [0, 1]")))
    }
}

impl SamplingPlan {
    pub fn new(n: usize, independents: BTreeMap<usize, f64>, mut chains: Vec<Chain>) -> Result<Self> {
        let mut owner = vec![false; n];
        let mut claim = |i: usize| -> Result<()> {
            match owner.get_mut(i) {
                None => Err(Error::usage(format!("qubit {i} out of range for n = {n}"))),
                Some(true) => Err(Error::usage(format!("qubit {i} appears more than once"))),
                Some(slot) => {
                    *slot = true;
                    Ok(())
                }
            }
        };
        for (&i, &p1) in &independents {
            check_probability(p1, "independent")?;
            claim(i)?;
        }
        for chain in &chains {
            check_probability(chain.control_p1, "control")?;
            if chain.targets.is_empty() {
                return Err(Error::usage(format!("chain on control {} has no targets", chain.control)));
            }
            claim(chain.control)?;
            for &(t, _) in &chain.targets {
                claim(t)?;
            }
        }
        if let Some(i) = owner.iter().position(|&o| !o) {
            return Err(Error::usage(format!("qubit {i} is not covered by the plan")));
        }
        chains.sort_by_key(|c| c.control);
        Ok(SamplingPlan {
            n,
            independents,
            chains,
        })
    }

    /// Hadamard layer: every qubit an unbiased independent coin.
    pub fn uniform(n: usize) -> Self {
        SamplingPlan {
            n,
            independents: (0..n).map(|i| (i, 0.5)).collect(),
            chains: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn independents(&self) -> &BTreeMap<usize, f64> {
        &self.independents
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    /// Number of CNOT-entangled pairs encoded by the plan.
    pub fn entangled_pairs(&self) -> usize {
        self.chains.iter().map(|c| c.targets.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }
}

/// RY angle that makes `desired_bit` come out with probability `p_a`.
pub fn bias_angle(p_a: f64, desired_bit: u8) -> Result<f64> {
    check_probability(p_a, "amplitude bias")?;
    match desired_bit {
        0 => Ok(2.0 * p_a.sqrt().acos()),
        1 => Ok(2.0 * (1.0 - p_a).sqrt().acos()),
        b => Err(Error::usage(format!("desired bit {b} is not 0 or 1"))),
    }
}

/// Probability of measuring 1 after `RY(theta)|0⟩`.
pub fn p1_from_angle(theta: f64) -> f64 {
    (theta / 2.0).sin().powi(2)
}

/// Draws one shot from the plan.
///
/// Consumes exactly one uniform per independent qubit (ascending index) and
/// then one per chain (ascending control index).
pub fn sample<R: Rng + ?Sized>(plan: &SamplingPlan, rng: &mut R) -> Bitstring {
    let mut bits = vec![0u8; plan.n];
    for (&i, &p1) in &plan.independents {
        bits[i] = u8::from(rng.random::<f64>() < p1);
    }
    for chain in &plan.chains {
        let c = u8::from(rng.random::<f64>() < chain.control_p1);
        bits[chain.control] = c;
        for &(t, parity) in &chain.targets {
            bits[t] = parity.apply(c);
        }
    }
    Bitstring::from_raw(bits)
}

/// Exact joint distribution of a plan over all `2^n` outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    n: usize,
    /// Indexed so that ascending index is lexicographic bitstring order.
    probs: Vec<f64>,
}

impl Distribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn index_of(&self, x: &Bitstring) -> usize {
        x.bits().iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn bitstring_at(&self, index: usize) -> Bitstring {
        Bitstring::from_raw((0..self.n).map(|i| ((index >> (self.n - 1 - i)) & 1) as u8).collect())
    }

    pub fn prob(&self, x: &Bitstring) -> f64 {
        self.probs[self.index_of(x)]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (Bitstring, f64)> + '_ {
        self.probs.iter().enumerate().map(|(k, &p)| (self.bitstring_at(k), p))
    }
}

/// Enumerates the plan's exact outcome distribution (n ≤ 20).
pub fn plan_distribution(plan: &SamplingPlan) -> Result<Distribution> {
    let n = plan.n;
    if n > MAX_DISTRIBUTION_QUBITS {
        return Err(Error::usage(format!(
            "plan_distribution supports at most {MAX_DISTRIBUTION_QUBITS} qubits, plan has {n}"
        )));
    }
    let bit = |k: usize, i: usize| ((k >> (n - 1 - i)) & 1) as u8;
    let probs = (0..1usize << n)
        .map(|k| {
            let mut p = 1.0;
            for (&i, &p1) in &plan.independents {
                p *= if bit(k, i) == 1 { p1 } else { 1.0 - p1 };
            }
            for chain in &plan.chains {
                let c = bit(k, chain.control);
                if chain.targets.iter().any(|&(t, par)| bit(k, t) != par.apply(c)) {
                    return 0.0;
                }
                p *= if c == 1 { chain.control_p1 } else { 1.0 - chain.control_p1 };
            }
            p
        })
        .collect();
    Ok(Distribution { n, probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn chain_plan(p1: f64, parity: Parity) -> SamplingPlan {
        SamplingPlan::new(
            2,
            BTreeMap::new(),
            vec![Chain {
                control: 0,
                control_p1: p1,
                targets: vec![(1, parity)],
            }],
        )
        .unwrap()
    }

    #[test]
    fn bias_angle_examples() {
        assert!((bias_angle(0.5, 0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((p1_from_angle(bias_angle(0.5, 0).unwrap()) - 0.5).abs() < 1e-15);
        assert!((bias_angle(1.0, 1).unwrap() - PI).abs() < 1e-15);
        assert!((p1_from_angle(PI) - 1.0).abs() < 1e-15);
        let theta = bias_angle(0.95, 0).unwrap();
        assert!((theta - 0.451_026_811_796_262_3).abs() < 1e-12);
        assert!(((theta / 2.0).cos().powi(2) - 0.95).abs() < 1e-12);
        assert!((p1_from_angle(theta) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn bias_angle_rejects_bad_input() {
        assert!(bias_angle(1.5, 0).is_err());
        assert!(bias_angle(-0.1, 1).is_err());
        assert!(bias_angle(0.5, 2).is_err());
    }

    #[test]
    fn plan_validation() {
        let dup = SamplingPlan::new(
            2,
            [(0, 0.5)].into_iter().collect(),
            vec![Chain {
                control: 1,
                control_p1: 0.5,
                targets: vec![(0, Parity::Positive)],
            }],
        );
        assert!(dup.is_err());
        let uncovered = SamplingPlan::new(2, [(0, 0.5)].into_iter().collect(), vec![]);
        assert!(uncovered.is_err());
        let empty_chain = SamplingPlan::new(
            1,
            BTreeMap::new(),
            vec![Chain {
                control: 0,
                control_p1: 0.5,
                targets: vec![],
            }],
        );
        assert!(empty_chain.is_err());
    }

    #[test]
    fn certain_qubit_always_one() {
        let plan = SamplingPlan::new(1, [(0, 1.0)].into_iter().collect(), vec![]).unwrap();
        let mut rng = crate::rng_from_seed(1);
        for _ in 0..1000 {
            assert_eq!(sample(&plan, &mut rng).bits(), &[1]);
        }
    }

    #[test]
    fn negative_chain_parity_holds() {
        let plan = chain_plan(0.37, Parity::Negative);
        let mut rng = crate::rng_from_seed(2);
        for _ in 0..10_000 {
            let x = sample(&plan, &mut rng);
            assert_eq!(x.get(1), 1 - x.get(0));
        }
    }

    #[test]
    fn biased_control_frequency() {
        let plan = chain_plan(0.05, Parity::Positive);
        let mut rng = crate::rng_from_seed(3);
        let ones = (0..100_000).filter(|_| sample(&plan, &mut rng).get(0) == 1).count();
        let freq = ones as f64 / 1e5;
        assert!((freq - 0.05).abs() < 0.004, "freq {freq}");
    }

    #[test]
    fn distribution_examples() {
        let d = plan_distribution(&SamplingPlan::uniform(3)).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 0.125).abs() < 1e-15));

        let d = plan_distribution(&chain_plan(0.3, Parity::Positive)).unwrap();
        let p = |s: &str| d.prob(&s.parse().unwrap());
        assert!((p("00") - 0.7).abs() < 1e-15);
        assert!((p("11") - 0.3).abs() < 1e-15);
        assert_eq!(p("01"), 0.0);
        assert_eq!(p("10"), 0.0);

        let d = plan_distribution(&chain_plan(0.3, Parity::Negative)).unwrap();
        let p = |s: &str| d.prob(&s.parse().unwrap());
        assert!((p("01") - 0.7).abs() < 1e-15);
        assert!((p("10") - 0.3).abs() < 1e-15);
        assert_eq!(p("00") + p("11"), 0.0);
    }

    #[test]
    fn distribution_refuses_large_plans() {
        assert!(plan_distribution(&SamplingPlan::uniform(21)).is_err());
    }

    #[test]
    fn json_dump_shape() {
        let plan = SamplingPlan::new(
            3,
            [(2, 0.95)].into_iter().collect(),
            vec![Chain {
                control: 0,
                control_p1: 0.05,
                targets: vec![(1, Parity::Negative)],
            }],
        )
        .unwrap();
        assert_eq!(
            plan.to_json(),
            r#"{"n":3,"independents":{"2":0.95},"chains":[{"control":0,"p1":0.05,"targets":[[1,"NEG"]]}]}"#
        );
        let back: SamplingPlan = serde_json::from_str(&plan.to_json()).unwrap();
        assert_eq!(back, plan);
    }
}
