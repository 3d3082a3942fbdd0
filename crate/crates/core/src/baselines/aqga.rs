//! Self-adaptive quantum-inspired GA.
//!
//! Chromosomes are vectors of amplitude pairs `(α, β)` with `α² + β² = 1`;
//! measuring gene `j` yields 1 with probability `β_j²`. Each generation the
//! genes are rotated toward the best solution found so far, by an angle that
//! shrinks linearly from `theta_max` to `theta_min`, in the direction given by
//! the sign of `det [[α_b, α], [β_b, β]]`.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Bitstring, QuboProblem};
use crate::record::{Algorithm, Incumbent, RunRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AqgaConfig {
    pub population: usize,
    pub max_iterations: usize,
    pub theta_max: f64,
    pub theta_min: f64,
    pub mutation_ratio: f64,
    /// Generations without improvement before the disaster reset fires.
    pub disaster_stale_iters: usize,
    /// Fraction of the worst chromosomes reset by a disaster.
    pub disaster_fraction: f64,
    pub seed: u64,
}

impl Default for AqgaConfig {
    fn default() -> Self {
        AqgaConfig {
            population: 10,
            max_iterations: 20,
            theta_max: 0.25,
            theta_min: 0.15,
            mutation_ratio: 0.05,
            disaster_stale_iters: 6,
            disaster_fraction: 0.2,
            seed: 0,
        }
    }
}

impl AqgaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::usage("AQGA population must be at least 2"));
        }
        if self.max_iterations < 1 {
            return Err(Error::usage("AQGA needs at least one iteration"));
        }
        if !(self.theta_max >= self.theta_min && self.theta_min >= 0.0) {
            return Err(Error::usage("AQGA needs theta_max >= theta_min >= 0"));
        }
        for (name, p) in [
            ("mutation_ratio", self.mutation_ratio),
            ("disaster_fraction", self.disaster_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::usage(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeChromosome {
    pub genes: Vec<(f64, f64)>,
}

impl AmplitudeChromosome {
    /// Every gene in equal superposition.
    pub fn uniform(n: usize) -> Self {
        AmplitudeChromosome {
            genes: vec![(FRAC_1_SQRT_2, FRAC_1_SQRT_2); n],
        }
    }

    /// Largest `|α² + β² − 1|` over the genes.
    pub fn normalization_error(&self) -> f64 {
        self.genes
            .iter()
            .map(|(a, b)| (a * a + b * b - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn reset(&mut self) {
        self.genes.fill((FRAC_1_SQRT_2, FRAC_1_SQRT_2));
    }
}

/// Samples each gene independently: 1 with probability `β²`.
pub fn aqga_measure<R: Rng + ?Sized>(chromosome: &AmplitudeChromosome, rng: &mut R) -> Bitstring {
    Bitstring::from_bools(chromosome.genes.iter().map(|&(_, b)| rng.random::<f64>() < b * b))
}

/// `θ_max − (θ_max − θ_min)·iter / T_max`.
pub fn rotation_magnitude(iter: usize, cfg: &AqgaConfig) -> f64 {
    cfg.theta_max - (cfg.theta_max - cfg.theta_min) * iter as f64 / cfg.max_iterations as f64
}

/// `−sgn(D)` with `D = α_b·β − β_b·α`, or a fair ±1 when `D = 0`.
pub fn rotation_direction<R: Rng + ?Sized>(best_bit: u8, gene: (f64, f64), rng: &mut R) -> f64 {
    let (alpha_b, beta_b) = if best_bit == 1 { (0.0, 1.0) } else { (1.0, 0.0) };
    let (alpha, beta) = gene;
    let det = alpha_b * beta - beta_b * alpha;
    if det == 0.0 {
        if rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    } else {
        -det.signum()
    }
}

/// Rotates every gene toward the corresponding bit of `x_best`.
pub fn aqga_rotation<R: Rng + ?Sized>(
    chromosome: &mut AmplitudeChromosome,
    x_best: &Bitstring,
    iter: usize,
    cfg: &AqgaConfig,
    rng: &mut R,
) {
    let theta = rotation_magnitude(iter, cfg);
    for (j, gene) in chromosome.genes.iter_mut().enumerate() {
        let delta = rotation_direction(x_best.get(j), *gene, rng) * theta;
        let (s, c) = delta.sin_cos();
        let (a, b) = *gene;
        *gene = (c * a - s * b, s * a + c * b);
    }
}

/// With probability `rate`, swaps `(α, β)` of one uniformly chosen gene.
pub fn aqga_mutate<R: Rng + ?Sized>(chromosome: &mut AmplitudeChromosome, rate: f64, rng: &mut R) {
    if chromosome.genes.is_empty() {
        return;
    }
    if rng.random::<f64>() < rate {
        let j = rng.random_range(0..chromosome.genes.len());
        let (a, b) = chromosome.genes[j];
        chromosome.genes[j] = (b, a);
    }
}

/// Advances the stagnation counter and, once it reaches
/// `disaster_stale_iters`, resets the `⌊fraction·N⌋` lowest-fitness
/// chromosomes to equal superposition.
///
/// Returns the new counter and the indices that were reset.
pub fn aqga_disaster(
    chromosomes: &mut [AmplitudeChromosome],
    fitnesses: &[f64],
    stale_counter: usize,
    improved: bool,
    cfg: &AqgaConfig,
) -> (usize, Vec<usize>) {
    let counter = if improved { 0 } else { stale_counter + 1 };
    if counter < cfg.disaster_stale_iters {
        return (counter, Vec::new());
    }
    let count = ((cfg.disaster_fraction * chromosomes.len() as f64) + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..chromosomes.len()).collect();
    order.sort_by(|&a, &b| fitnesses[a].total_cmp(&fitnesses[b]).then(a.cmp(&b)));
    order.truncate(count);
    for &i in &order {
        chromosomes[i].reset();
    }
    (0, order)
}

pub fn run_aqga(problem: &QuboProblem, cfg: &AqgaConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let n = problem.n();
    let mut rng = crate::rng_from_seed(cfg.seed);
    let mut chromosomes = vec![AmplitudeChromosome::uniform(n); cfg.population];
    let mut best: Option<Incumbent> = None;
    let mut stale = 0usize;
    let mut series = Vec::with_capacity(cfg.max_iterations);

    for iter in 0..cfg.max_iterations {
        let measured: Vec<Bitstring> = chromosomes.iter().map(|c| aqga_measure(c, &mut rng)).collect();
        let fitnesses: Vec<f64> = measured.iter().map(|x| problem.fitness(x)).collect();
        let previous = best.as_ref().map(|b| b.fitness);
        for (x, &f) in measured.iter().zip(&fitnesses) {
            match best.as_mut() {
                Some(b) => {
                    b.offer(x, f);
                }
                None => best = Some(Incumbent::new(x.clone(), f)),
            }
        }
        let incumbent = best.as_ref().expect("population is nonempty");
        series.push(incumbent.fitness);
        if iter + 1 == cfg.max_iterations {
            break;
        }
        let improved = previous.is_none_or(|p| incumbent.fitness != p);
        let target = incumbent.x.clone();
        for c in chromosomes.iter_mut() {
            aqga_rotation(c, &target, iter, cfg, &mut rng);
            aqga_mutate(c, cfg.mutation_ratio, &mut rng);
        }
        stale = aqga_disaster(&mut chromosomes, &fitnesses, stale, improved, cfg).0;
    }

    Ok(RunRecord::new(
        Algorithm::Aqga,
        cfg.seed,
        cfg.population,
        best.expect("at least one iteration"),
        series,
    ))
}
