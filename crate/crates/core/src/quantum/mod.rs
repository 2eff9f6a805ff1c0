//! Channel-level emulation of the quantum EM algorithm.
//!
//! Quantum subroutines are replaced by their output statistics: amplitude
//! estimation by its exact outcome distribution, mode evaluation by majority
//! voting, state tomography by bounded direction and norm errors, and weight
//! estimation by label sampling.

pub mod ae;
pub mod qem;
pub mod tomography;

pub use ae::{ae_sample, mode_evaluate, outcome_distribution, AeChannel, AeSampler, ModeEvalSpec, AE_SUCCESS};
pub use qem::{
    grid_for, inner_product_probability, noisy_distance_row, run_qem_emulation, run_qem_emulation_observed,
    NoisyOracle, NoisyRow, QemConfig, QemIteration,
};
pub use tomography::{estimate_weights, hoeffding_samples, norm_split_bound, tomography_apply, TomographyChannel};
