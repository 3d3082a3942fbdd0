//! Classical GA: elitism, roulette-wheel parent selection on shifted fitness,
//! single-point crossover and single-bit flip mutation.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Bitstring, QuboProblem};
use crate::record::{rank_order, Algorithm, Incumbent, RunRecord};

/// How `mutation_rate` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MutationMode {
    /// With probability `mutation_rate`, flip one uniformly chosen bit of the offspring.
    #[default]
    PerChromosome,
    /// Flip every bit independently with probability `mutation_rate`.
    PerBit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub max_iterations: usize,
    pub crossover_prob: f64,
    pub mutation_rate: f64,
    pub mutation_mode: MutationMode,
    pub elite_count: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 10,
            max_iterations: 20,
            crossover_prob: 0.85,
            mutation_rate: 0.03,
            mutation_mode: MutationMode::PerChromosome,
            elite_count: 2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::usage("GA population must be at least 2"));
        }
        if self.max_iterations < 1 {
            return Err(Error::usage("GA needs at least one iteration"));
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::usage(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Swaps the tails of two parents at `cut`: offspring take `a[..cut] + b[cut..]`
/// and `b[..cut] + a[cut..]`.
pub fn single_point_crossover(a: &Bitstring, b: &Bitstring, cut: usize) -> (Bitstring, Bitstring) {
    let (a, b) = (a.bits(), b.bits());
    let mut c1 = a[..cut].to_vec();
    c1.extend_from_slice(&b[cut..]);
    let mut c2 = b[..cut].to_vec();
    c2.extend_from_slice(&a[cut..]);
    (Bitstring::from_raw(c1), Bitstring::from_raw(c2))
}

/// Roulette weights `f − min(f) + ε`, `ε = 1e-12·max(1, span)`.
pub(crate) fn roulette_weights(fitnesses: &[f64]) -> Vec<f64> {
    let min = fitnesses.iter().copied().fold(f64::INFINITY, f64::min);
    let max = fitnesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eps = 1e-12 * (max - min).max(1.0);
    fitnesses.iter().map(|f| f - min + eps).collect()
}

fn mutate<R: Rng + ?Sized>(x: &mut Bitstring, cfg: &GaConfig, rng: &mut R) {
    match cfg.mutation_mode {
        MutationMode::PerChromosome => {
            if rng.random::<f64>() < cfg.mutation_rate {
                let i = rng.random_range(0..x.len());
                x.flip(i);
            }
        }
        MutationMode::PerBit => {
            for i in 0..x.len() {
                if rng.random::<f64>() < cfg.mutation_rate {
                    x.flip(i);
                }
            }
        }
    }
}

/// Produces the next generation.
pub fn ga_step<R: Rng + ?Sized>(
    population: &[Bitstring],
    fitnesses: &[f64],
    cfg: &GaConfig,
    rng: &mut R,
) -> Result<Vec<Bitstring>> {
    if population.is_empty() || population.len() != fitnesses.len() {
        return Err(Error::usage("population and fitnesses must be nonempty and equally long"));
    }
    let n = population[0].len();
    if population.iter().any(|x| x.len() != n) {
        return Err(Error::usage("chromosomes must share one length"));
    }
    let size = population.len();

    let mut ranked: Vec<(Bitstring, f64)> = population.iter().cloned().zip(fitnesses.iter().copied()).collect();
    ranked.sort_by(rank_order);
    let mut next: Vec<Bitstring> = ranked
        .into_iter()
        .take(cfg.elite_count.min(size))
        .map(|(x, _)| x)
        .collect();

    let wheel = WeightedIndex::new(roulette_weights(fitnesses))
        .map_err(|e| Error::usage(format!("roulette weights: {e}")))?;
    while next.len() < size {
        let a = &population[wheel.sample(rng)];
        let b = &population[wheel.sample(rng)];
        let (mut c1, mut c2) = if n >= 2 && rng.random::<f64>() < cfg.crossover_prob {
            let cut = rng.random_range(1..n);
            single_point_crossover(a, b, cut)
        } else {
            (a.clone(), b.clone())
        };
        mutate(&mut c1, cfg, rng);
        mutate(&mut c2, cfg, rng);
        next.push(c1);
        if next.len() < size {
            next.push(c2);
        }
    }
    Ok(next)
}

pub fn run_ga(problem: &QuboProblem, cfg: &GaConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let n = problem.n();
    let mut rng = crate::rng_from_seed(cfg.seed);
    let mut population: Vec<Bitstring> = (0..cfg.population)
        .map(|_| Bitstring::from_bools((0..n).map(|_| rng.random::<f64>() < 0.5)))
        .collect();
    let mut best: Option<Incumbent> = None;
    let mut series = Vec::with_capacity(cfg.max_iterations);
    for t in 1..=cfg.max_iterations {
        let fitnesses: Vec<f64> = population.iter().map(|x| problem.fitness(x)).collect();
        for (x, &f) in population.iter().zip(&fitnesses) {
            match best.as_mut() {
                Some(b) => {
                    b.offer(x, f);
                }
                None => best = Some(Incumbent::new(x.clone(), f)),
            }
        }
        series.push(best.as_ref().expect("population is nonempty").fitness);
        if t < cfg.max_iterations {
            population = ga_step(&population, &fitnesses, cfg, &mut rng)?;
        }
    }
    Ok(RunRecord::new(
        Algorithm::Ga,
        cfg.seed,
        cfg.population,
        best.expect("at least one iteration"),
        series,
    ))
}
