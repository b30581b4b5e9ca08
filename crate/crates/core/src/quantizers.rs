//! One-bit quantizers: the sharp threshold `q_τ`, its flaky version
//! `q^{ν1,ν2}` and the two-input linear-threshold family `Q_α^{ν1,ν2}`.
//!
//! Inside the flaky band `[ν1, ν2)` the output is chosen by a [`Resolver`].
//! Resolvers are stateless: the decision at cycle `n` depends only on the
//! resolver itself and `n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type Bit = u8;

/// Sharp one-bit quantizer: 0 if `u < τ`, 1 otherwise.
#[inline]
pub fn q_tau(u: f64, tau: f64) -> Bit {
    Bit::from(u >= tau)
}

/// Policy deciding the output when the quantizer input lies in `[ν1, ν2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolver {
    AlwaysZero,
    AlwaysOne,
    /// Threshold `τ_n ~ Uniform[ν1, ν2)` drawn from `(seed, n)`.
    RandomUniformThreshold {
        seed: u64,
    },
    /// Explicit thresholds `τ_n`, one per cycle.
    PerCycleSequence(Vec<f64>),
}

impl Resolver {
    pub fn name(&self) -> &'static str {
        match self {
            Resolver::AlwaysZero => "zero",
            Resolver::AlwaysOne => "one",
            Resolver::RandomUniformThreshold { .. } => "random",
            Resolver::PerCycleSequence(_) => "sequence",
        }
    }
}

/// `Q_α^{ν1,ν2}`: gain `alpha`, flaky band `[nu1, nu2)`, and the band resolver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub alpha: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub resolver: Resolver,
}

impl QuantizerSpec {
    pub fn new(alpha: f64, nu1: f64, nu2: f64, resolver: Resolver) -> Result<Self> {
        let spec = QuantizerSpec {
            alpha,
            nu1,
            nu2,
            resolver,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Sharp `Q_α = q_1(u + αv)`.
    pub fn exact(alpha: f64) -> Self {
        QuantizerSpec {
            alpha,
            nu1: 1.0,
            nu2: 1.0,
            resolver: Resolver::AlwaysZero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.nu1.is_finite() && self.nu2.is_finite()) {
            return Err(Error::InvalidSpec("non-finite quantizer parameter".into()));
        }
        if self.nu1 > self.nu2 {
            return Err(Error::InvalidSpec(format!(
                "nu1 = {} exceeds nu2 = {}",
                self.nu1, self.nu2
            )));
        }
        if let Resolver::PerCycleSequence(taus) = &self.resolver {
            if let Some((n, t)) = taus
                .iter()
                .enumerate()
                .find(|(_, &t)| !(self.nu1..=self.nu2).contains(&t))
            {
                return Err(Error::InvalidSpec(format!(
                    "threshold tau_{n} = {t} outside [{}, {}]",
                    self.nu1, self.nu2
                )));
            }
        }
        Ok(())
    }

    pub fn is_sharp(&self) -> bool {
        self.nu1 == self.nu2
    }

    /// `q^{ν1,ν2}(w)` at `cycle`.
    #[inline]
    pub fn flaky(&self, w: f64, cycle: usize) -> Result<Bit> {
        if w < self.nu1 {
            return Ok(0);
        }
        if w >= self.nu2 {
            return Ok(1);
        }
        match &self.resolver {
            Resolver::AlwaysZero => Ok(0),
            Resolver::AlwaysOne => Ok(1),
            Resolver::RandomUniformThreshold { seed } => {
                let tau =
                    self.nu1 + (self.nu2 - self.nu1) * rng::uniform_at(*seed, rng::THRESHOLD_STREAM, cycle as u64);
                Ok(q_tau(w, tau))
            }
            Resolver::PerCycleSequence(taus) => taus
                .get(cycle)
                .map(|&tau| q_tau(w, tau))
                .ok_or(Error::SequenceExhausted { cycle, len: taus.len() }),
        }
    }

    /// `Q_α^{ν1,ν2}(u, v)` with the spec's own gain.
    #[inline]
    pub fn q_alpha(&self, u: f64, v: f64, cycle: usize) -> Result<Bit> {
        self.flaky(u + self.alpha * v, cycle)
    }

    /// Same as [`q_alpha`](Self::q_alpha) with the gain replaced for this cycle.
    #[inline]
    pub fn q_alpha_with_gain(&self, alpha: f64, u: f64, v: f64, cycle: usize) -> Result<Bit> {
        self.flaky(u + alpha * v, cycle)
    }

    /// Bits the quantizer may legally output for input `w` under some resolver.
    pub fn admissible_bits(&self, w: f64) -> &'static [Bit] {
        if w < self.nu1 {
            &[0]
        } else if w >= self.nu2 {
            &[1]
        } else {
            &[0, 1]
        }
    }
}

/// Free-function form of [`QuantizerSpec::flaky`].
pub fn flaky_q(u: f64, spec: &QuantizerSpec, cycle: usize) -> Result<Bit> {
    spec.flaky(u, cycle)
}

/// Free-function form of [`QuantizerSpec::q_alpha`].
pub fn q_alpha(u: f64, v: f64, spec: &QuantizerSpec, cycle: usize) -> Result<Bit> {
    spec.q_alpha(u, v, cycle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn band(nu1: f64, nu2: f64, resolver: Resolver) -> QuantizerSpec {
        QuantizerSpec::new(1.0, nu1, nu2, resolver).unwrap()
    }

    #[test]
    fn sharp_threshold() {
        assert_eq!(q_tau(0.999, 1.0), 0);
        assert_eq!(q_tau(1.0, 1.0), 1);
        assert_eq!(q_tau(-5.0, 1.0), 0);
    }

    #[test]
    fn flaky_outside_band_ignores_resolver() {
        for r in [
            Resolver::AlwaysZero,
            Resolver::AlwaysOne,
            Resolver::RandomUniformThreshold { seed: 9 },
        ] {
            let s = band(1.0, 1.2, r);
            assert_eq!(flaky_q(0.9, &s, 0).unwrap(), 0);
            assert_eq!(flaky_q(1.3, &s, 0).unwrap(), 1);
            assert_eq!(flaky_q(1.2, &s, 0).unwrap(), 1);
        }
    }

    #[test]
    fn flaky_band_uses_resolver() {
        assert_eq!(flaky_q(1.1, &band(1.0, 1.2, Resolver::AlwaysOne), 0).unwrap(), 1);
        assert_eq!(flaky_q(1.1, &band(1.0, 1.2, Resolver::AlwaysZero), 0).unwrap(), 0);
        // lower edge belongs to the band
        assert_eq!(flaky_q(1.0, &band(1.0, 1.2, Resolver::AlwaysZero), 0).unwrap(), 0);
    }

    #[test]
    fn per_cycle_sequence() {
        let s = band(1.0, 1.2, Resolver::PerCycleSequence(vec![1.05, 1.15]));
        assert_eq!(s.flaky(1.1, 0).unwrap(), 1);
        assert_eq!(s.flaky(1.1, 1).unwrap(), 0);
        assert_eq!(s.flaky(1.1, 2), Err(Error::SequenceExhausted { cycle: 2, len: 2 }));
        // outside the band the sequence is not consulted
        assert_eq!(s.flaky(0.5, 7).unwrap(), 0);
    }

    #[test]
    fn q_alpha_examples() {
        assert_eq!(q_alpha(0.5, 0.5, &QuantizerSpec::exact(1.0), 0).unwrap(), 1);
        assert_eq!(q_alpha(0.3, 0.4, &QuantizerSpec::exact(1.5), 0).unwrap(), 0);
        let s = QuantizerSpec::new(1.5, 1.2, 1.3, Resolver::AlwaysZero).unwrap();
        assert_eq!(q_alpha(0.5, 0.5, &s, 0).unwrap(), 0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(QuantizerSpec::new(1.0, 1.2, 1.0, Resolver::AlwaysZero).is_err());
        assert!(QuantizerSpec::new(1.0, 1.0, 1.2, Resolver::PerCycleSequence(vec![1.3])).is_err());
        assert!(QuantizerSpec::new(f64::NAN, 1.0, 1.2, Resolver::AlwaysZero).is_err());
    }

    #[test]
    fn random_threshold_is_uniform_in_band() {
        let s = band(1.0, 1.2, Resolver::RandomUniformThreshold { seed: 5 });
        // P(q=1 at w) = (w - ν1)/(ν2 - ν1)
        let n = 20_000;
        let ones = (0..n).filter(|&c| s.flaky(1.05, c).unwrap() == 1).count();
        let p = ones as f64 / n as f64;
        assert!((p - 0.25).abs() < 0.015, "{p}");
    }

    fn any_resolver() -> impl Strategy<Value = Resolver> {
        prop_oneof![
            Just(Resolver::AlwaysZero),
            Just(Resolver::AlwaysOne),
            any::<u64>().prop_map(|seed| Resolver::RandomUniformThreshold { seed }),
        ]
    }

    proptest! {
        #[test]
        fn degenerate_band_is_sharp(u in -3.0..3.0f64, tau in -2.0..2.0f64, r in any_resolver(), c in 0usize..1000) {
            let s = QuantizerSpec::new(1.0, tau, tau, r).unwrap();
            prop_assert_eq!(s.flaky(u, c).unwrap(), q_tau(u, tau));
        }

        #[test]
        fn monotone_in_input(w1 in 0.0..2.0f64, w2 in 0.0..2.0f64, seed in any::<u64>(), c in 0usize..1000) {
            let s = QuantizerSpec::new(1.3, 0.9, 1.1, Resolver::RandomUniformThreshold { seed }).unwrap();
            let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
            prop_assert!(s.flaky(lo, c).unwrap() <= s.flaky(hi, c).unwrap());
        }

        #[test]
        fn random_resolver_reproducible(w in 0.9..1.1f64, seed in any::<u64>(), c in 0usize..10_000) {
            let s = QuantizerSpec::new(1.0, 0.9, 1.1, Resolver::RandomUniformThreshold { seed }).unwrap();
            prop_assert_eq!(s.flaky(w, c).unwrap(), s.flaky(w, c).unwrap());
        }
    }
}
