//! Per-run traces shared by all three solvers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Bitstring;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "EAQGA")]
    Eaqga,
    #[serde(rename = "GA")]
    Ga,
    #[serde(rename = "AQGA")]
    Aqga,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Ga, Algorithm::Aqga, Algorithm::Eaqga];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Eaqga => "EAQGA",
            Algorithm::Ga => "GA",
            Algorithm::Aqga => "AQGA",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eaqga" => Ok(Algorithm::Eaqga),
            "ga" => Ok(Algorithm::Ga),
            "aqga" => Ok(Algorithm::Aqga),
            _ => Err(Error::usage(format!("unknown algorithm {s:?} (expected eaqga, ga or aqga)"))),
        }
    }
}

/// Seeded trace of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub problem_id: String,
    pub population: usize,
    pub iterations: usize,
    /// Best-so-far fitness after each iteration, length `iterations`.
    pub best_per_iteration: Vec<f64>,
    pub final_x: Bitstring,
    pub final_fitness: f64,
    /// Seconds; `None` when timing is suppressed for byte-reproducible output.
    pub wall_time: Option<f64>,
}

impl RunRecord {
    pub(crate) fn new(
        algorithm: Algorithm,
        seed: u64,
        population: usize,
        best: Incumbent,
        best_per_iteration: Vec<f64>,
    ) -> Self {
        RunRecord {
            algorithm,
            seed,
            problem_id: String::new(),
            population,
            iterations: best_per_iteration.len(),
            best_per_iteration,
            final_x: best.x,
            final_fitness: best.fitness,
            wall_time: None,
        }
    }

    pub fn with_problem_id(mut self, id: impl Into<String>) -> Self {
        self.problem_id = id.into();
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("run record serializes")
    }
}

/// Best solution seen so far. Higher fitness wins; equal fitness goes to the
/// lexicographically smaller bitstring.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub x: Bitstring,
    pub fitness: f64,
}

impl Incumbent {
    pub fn new(x: Bitstring, fitness: f64) -> Self {
        Incumbent { x, fitness }
    }

    /// True when `(fitness, x)` ranks strictly before `self`.
    pub fn is_beaten_by(&self, x: &Bitstring, fitness: f64) -> bool {
        fitness > self.fitness || (fitness == self.fitness && *x < self.x)
    }

    pub fn offer(&mut self, x: &Bitstring, fitness: f64) -> bool {
        if self.is_beaten_by(x, fitness) {
            self.x = x.clone();
            self.fitness = fitness;
            true
        } else {
            false
        }
    }

    /// Best of a nonempty evaluated population.
    pub fn best_of(population: &[(Bitstring, f64)]) -> Option<Self> {
        let (first, rest) = population.split_first()?;
        let mut inc = Incumbent::new(first.0.clone(), first.1);
        for (x, f) in rest {
            inc.offer(x, *f);
        }
        Some(inc)
    }
}

/// Fitness-descending, then lexicographic bitstring order.
pub(crate) fn rank_order(a: &(Bitstring, f64), b: &(Bitstring, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}
