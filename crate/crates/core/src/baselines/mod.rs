//! Comparison algorithms: a classical genetic algorithm and the adaptive
//! quantum-inspired genetic algorithm (AQGA), both with fixed default
//! hyperparameters.

pub mod aqga;
pub mod ga;

pub use aqga::{
    aqga_disaster, aqga_measure, aqga_mutate, aqga_rotation, rotation_direction, rotation_magnitude, run_aqga,
    AmplitudeChromosome, AqgaConfig,
};
pub use ga::{ga_step, run_ga, single_point_crossover, GaConfig, MutationMode};
