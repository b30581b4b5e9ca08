//! Golden ratio encoder (GRE) and baseline algorithmic A/D encoders.
//!
//! * [`framework`]: the encoder abstraction, bitstreams and trajectories.
//! * [`quantizers`]: sharp and flaky one-bit quantizers.
//! * [`golden`]: the GRE recursion, its invariant rectangles and the
//!   admissible quantizer parameters.
//! * [`decoders`]: partial sums, bias correction and integer requantization.
//! * [`baselines`]: PCM, beta, first- and k-th order ΣΔ encoders.
//! * [`polynacci`]: the L-term generalisation.
//! * [`workbench`]: seeded Monte Carlo experiments.

pub mod baselines;
pub mod decoders;
pub mod error;
pub mod framework;
pub mod golden;
pub mod polynacci;
pub mod quantizers;
pub mod rng;
pub mod workbench;

pub use error::{Error, Result};
pub use framework::{run_encoder, BitStream, EncoderRun, ParamVector, Scheme, Trajectory};
pub use golden::{gre_encode, InvariantRect, NoiseModel, ParamRegion, PHI};
pub use quantizers::{Bit, QuantizerSpec, Resolver};
