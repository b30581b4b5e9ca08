//! Monte Carlo experiments and their tabular output.
//!
//! Every trial draws from random streams derived from `(seed, trial)`, and
//! per-trial results are reduced in trial order, so tables are identical
//! for any number of worker threads.

mod experiments;
pub mod table;

pub use experiments::{
    admissible_inputs, bias_check, escape_fraction_experiment, gre_robustness_run, noise_variance_check,
    noise_variance_factor, rmse_vs_n_experiment, robustness_sweep, strong_robustness_check, BiasResult,
    NoiseVarianceResult, RobustnessRun, SWEEP_BITS,
};
pub use table::{fmt_real, Cell, ExperimentTable};
