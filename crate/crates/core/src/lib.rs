//! Entanglement-aware quantum-enhanced genetic algorithm (EAQGA) for QUBO
//! problems, with an exact classical sampler for its parity-chain circuits,
//! classical GA and adaptive quantum-inspired GA baselines, an exhaustive
//! Gray-code oracle, and a reproducible benchmark harness.
//!
//! Every stochastic routine takes an explicit seeded stream ([`SolverRng`]),
//! so runs are bit-reproducible from their seed.

pub mod baselines;
pub mod bench;
pub mod eaqga;
pub mod error;
pub mod oracle;
pub mod problem;
pub mod record;
pub mod sampler;

pub use error::{Error, Result};
pub use problem::{Bitstring, NormalizedCoupling, PriceSeries, QuboProblem, SynthSpec};
pub use record::{Algorithm, RunRecord};

/// Random stream used by every solver in this crate.
pub type SolverRng = rand_chacha::ChaCha8Rng;

/// Creates the solver stream for a seed.
pub fn rng_from_seed(seed: u64) -> SolverRng {
    use rand::SeedableRng;
    SolverRng::seed_from_u64(seed)
}
