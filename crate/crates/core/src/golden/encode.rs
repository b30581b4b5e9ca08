use serde::{Deserialize, Serialize};

use super::PHI;
use crate::error::{Error, Result};
use crate::framework::{
    drive, AlgorithmicEncoder, BitStream, EscapePolicy, InputRange, ParamVector, Scheme, Trajectory,
};
use crate::quantizers::{Bit, QuantizerSpec, Resolver};
use crate::rng;

/// `(u_n, u_{n+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreState {
    pub u: f64,
    pub v: f64,
}

impl GreState {
    pub fn new(u: f64, v: f64) -> Self {
        GreState { u, v }
    }

    /// `u + φv`, the quantity that scales the approximation error.
    pub fn error_weight(&self) -> f64 {
        self.u + PHI * self.v
    }
}

/// Additive arithmetic error `ε_n` entering the recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    None,
    /// `ε_n ~ Uniform[−amplitude, amplitude)`, drawn from `(seed, n)`.
    UniformAdditive {
        amplitude: f64,
        seed: u64,
    },
    PerCycleSequence(Vec<f64>),
}

impl NoiseModel {
    pub fn uniform(amplitude: f64, seed: u64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidSpec(format!("noise amplitude {amplitude} must be >= 0")));
        }
        Ok(NoiseModel::UniformAdditive { amplitude, seed })
    }

    #[inline]
    pub fn at(&self, cycle: usize) -> Result<f64> {
        match self {
            NoiseModel::None => Ok(0.0),
            NoiseModel::UniformAdditive { amplitude, seed } => {
                if *amplitude == 0.0 {
                    return Ok(0.0);
                }
                let w = rng::uniform_at(*seed, rng::NOISE_STREAM, cycle as u64);
                Ok(amplitude * (2.0 * w - 1.0))
            }
            NoiseModel::PerCycleSequence(eps) => eps
                .get(cycle)
                .copied()
                .ok_or(Error::SequenceExhausted { cycle, len: eps.len() }),
        }
    }

    /// Bound on `|ε_n|`.
    pub fn bound(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::UniformAdditive { amplitude, .. } => *amplitude,
            NoiseModel::PerCycleSequence(eps) => eps.iter().fold(0.0, |m, e| m.max(e.abs())),
        }
    }

    pub fn is_silent(&self) -> bool {
        self.bound() == 0.0
    }
}

/// One cycle: `b = Q_α^{ν1,ν2}(u, v)`, new state `(v, u + v − b + ε)`.
#[inline]
pub fn gre_step(state: GreState, spec: &QuantizerSpec, noise: f64, cycle: usize) -> Result<(Bit, GreState)> {
    let b = spec.q_alpha(state.u, state.v, cycle)?;
    Ok((b, advance(state, b, noise)))
}

#[inline]
fn advance(s: GreState, b: Bit, noise: f64) -> GreState {
    GreState {
        u: s.v,
        v: s.u + s.v - f64::from(b) + noise,
    }
}

/// GRE with quantizer `Q_α^{ν1,ν2}`, additive noise, and optionally a
/// per-cycle gain `α_n` replacing `spec.alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreEncoder {
    pub spec: QuantizerSpec,
    pub noise: NoiseModel,
    alpha_schedule: Option<Vec<f64>>,
}

impl GreEncoder {
    pub fn new(spec: QuantizerSpec, noise: NoiseModel) -> Self {
        GreEncoder {
            spec,
            noise,
            alpha_schedule: None,
        }
    }

    pub fn with_alpha_schedule(mut self, alphas: Vec<f64>) -> Self {
        self.alpha_schedule = Some(alphas);
        self
    }

    pub fn alpha_at(&self, cycle: usize) -> Result<f64> {
        match &self.alpha_schedule {
            None => Ok(self.spec.alpha),
            Some(a) => a
                .get(cycle)
                .copied()
                .ok_or(Error::SequenceExhausted { cycle, len: a.len() }),
        }
    }

    pub fn encode(&self, x: f64, n_bits: usize, escape: EscapePolicy) -> Result<(BitStream, Trajectory)> {
        drive(self, x, n_bits, None, escape)
    }
}

impl AlgorithmicEncoder for GreEncoder {
    fn scheme(&self) -> Scheme {
        Scheme::Gre
    }

    fn input_range(&self) -> InputRange {
        InputRange::half_open(0.0, 1.0 + PHI)
    }

    #[inline]
    fn quantize(&self, _x: f64, state: &[f64], cycle: usize) -> Result<Bit> {
        let alpha = self.alpha_at(cycle)?;
        self.spec.q_alpha_with_gain(alpha, state[0], state[1], cycle)
    }

    #[inline]
    fn update(&self, _x: f64, state: &[f64], bit: Bit, cycle: usize, next: &mut [f64]) -> Result<()> {
        let s = advance(GreState::new(state[0], state[1]), bit, self.noise.at(cycle)?);
        next[0] = s.u;
        next[1] = s.v;
        Ok(())
    }

    fn params(&self) -> ParamVector {
        let mut p = ParamVector::new()
            .with("alpha", self.spec.alpha)
            .with("nu1", self.spec.nu1)
            .with("nu2", self.spec.nu2);
        if self.noise.bound() > 0.0 {
            p = p.with("noise_amp", self.noise.bound());
        }
        if let Some(a) = &self.alpha_schedule {
            p = p.with_per_cycle("alpha", a.clone());
        }
        p
    }

    fn resolver(&self) -> Option<&Resolver> {
        (!self.spec.is_sharp()).then_some(&self.spec.resolver)
    }

    fn notes(&self, x: f64) -> Vec<String> {
        if x > 1.0 {
            vec![format!(
                "x = {x} lies outside [0, 1]: only eventual entry into [0,1]^2 under exact Q_1 is claimed"
            )]
        } else {
            Vec::new()
        }
    }
}

/// Encodes `x` with `u_0 = x`, `u_1 = 0` for `n_bits` cycles.
pub fn gre_encode(x: f64, n_bits: usize, spec: &QuantizerSpec, noise: &NoiseModel) -> Result<(BitStream, Trajectory)> {
    spec.validate()?;
    GreEncoder::new(spec.clone(), noise.clone()).encode(x, n_bits, EscapePolicy::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{decode_partial_sum, error_formula};
    use proptest::prelude::*;

    #[test]
    fn step_examples() {
        let exact = QuantizerSpec::exact(1.0);
        assert_eq!(
            gre_step(GreState::new(1.0, 0.0), &exact, 0.0, 0).unwrap(),
            (1, GreState::new(0.0, 0.0))
        );
        assert_eq!(
            gre_step(GreState::new(0.5, 0.5), &exact, 0.0, 0).unwrap(),
            (1, GreState::new(0.5, 0.0))
        );
        let flaky = QuantizerSpec::new(1.5, 1.2, 1.3, Resolver::AlwaysZero).unwrap();
        let (b, s) = gre_step(GreState::new(0.5, 0.5), &flaky, 0.01, 0).unwrap();
        assert_eq!(b, 0);
        assert_eq!(s.u, 0.5);
        assert!((s.v - 1.01).abs() < 1e-15);
    }

    #[test]
    fn zero_input_stays_zero() {
        for spec in [
            QuantizerSpec::exact(1.0),
            QuantizerSpec::new(1.5, 1.2, 1.3, Resolver::AlwaysOne).unwrap(),
        ] {
            let (bits, traj) = gre_encode(0.0, 30, &spec, &NoiseModel::None).unwrap();
            assert!(bits.bits.iter().all(|&b| b == 0));
            assert!(traj.states().all(|s| s == [0.0, 0.0]));
        }
    }

    #[test]
    fn half_repeats_001() {
        let (bits, _) = gre_encode(0.5, 30, &QuantizerSpec::exact(1.0), &NoiseModel::None).unwrap();
        for (n, &b) in bits.bits.iter().enumerate() {
            assert_eq!(b, u8::from(n % 3 == 2));
        }
    }

    #[test]
    fn extended_inputs_enter_unit_square() {
        let exact = QuantizerSpec::exact(1.0);
        for x in [1.2, 2.0, 2.2, 2.5, 2.6] {
            let (_, traj) = gre_encode(x, 60, &exact, &NoiseModel::None).unwrap();
            let seq = traj.scalar_sequence();
            let first_out = seq.iter().rposition(|u| !(0.0..=1.0).contains(u));
            let n_x = first_out.map_or(0, |i| i + 1);
            assert!(n_x < 20, "x = {x}: N_x = {n_x}");
            assert!(!traj.escaped());
        }
    }

    #[test]
    fn noise_sequence_exhaustion() {
        let noise = NoiseModel::PerCycleSequence(vec![0.0; 3]);
        assert!(gre_encode(0.3, 4, &QuantizerSpec::exact(1.0), &noise).is_err());
        assert!(gre_encode(0.3, 3, &QuantizerSpec::exact(1.0), &noise).is_ok());
    }

    #[test]
    fn noise_bounds() {
        let noise = NoiseModel::uniform(0.01, 3).unwrap();
        for n in 0..1000 {
            assert!(noise.at(n).unwrap().abs() <= 0.01);
        }
        assert!(NoiseModel::uniform(-1.0, 3).is_err());
        assert_eq!(NoiseModel::PerCycleSequence(vec![0.1, -0.3]).bound(), 0.3);
    }

    #[test]
    fn alpha_schedule_is_used() {
        // at n = 1 the state is (0, x), so only the gain decides
        let x = 0.5;
        let spec = QuantizerSpec::exact(1.5);
        let enc = GreEncoder::new(spec.clone(), NoiseModel::None).with_alpha_schedule(vec![1.5, 2.5, 1.5]);
        let (bits, _) = enc.encode(x, 3, EscapePolicy::default()).unwrap();
        let (plain, _) = gre_encode(x, 3, &spec, &NoiseModel::None).unwrap();
        assert_eq!(plain.bits[1], 0); // 1.5 * 0.5 < 1
        assert_eq!(bits.bits[1], 1); // 2.5 * 0.5 >= 1
        assert!(bits.params.per_cycle.contains_key("alpha"));
    }

    proptest! {
        #[test]
        fn telescoping_identity(x in 0.0..1.0f64, n in 1usize..64) {
            let (bits, traj) = gre_encode(x, n, &QuantizerSpec::exact(1.0), &NoiseModel::None).unwrap();
            let s = traj.state(n);
            let e = x - decode_partial_sum(&bits, PHI).unwrap();
            prop_assert!((e - error_formula(s[0], s[1], n as i32)).abs() <= 1e-12);
        }

        #[test]
        fn exact_q1_stays_in_unit_square(x in 0.0..=1.0f64) {
            let (_, traj) = gre_encode(x, 64, &QuantizerSpec::exact(1.0), &NoiseModel::None).unwrap();
            for s in traj.states() {
                prop_assert!((0.0..=1.0).contains(&s[0]) && (0.0..=1.0).contains(&s[1]));
            }
        }

        #[test]
        fn deterministic(x in 0.0..1.0f64, seed in any::<u64>()) {
            let spec = QuantizerSpec::new(1.5, 1.2, 1.3, Resolver::RandomUniformThreshold { seed }).unwrap();
            let noise = NoiseModel::uniform(0.01, seed ^ 1).unwrap();
            let a = gre_encode(x, 48, &spec, &noise).unwrap();
            let b = gre_encode(x, 48, &spec, &noise).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
