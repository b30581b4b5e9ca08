//! Comparison encoders: PCM (successive approximation), the beta encoder,
//! first-order ΣΔ and the k-th order ΣΔ state machine with an injected rule.

use std::fmt;

use crate::error::{Error, Result};
use crate::framework::{drive, AlgorithmicEncoder, BitStream, EscapePolicy, InputRange, ParamVector, Scheme, SdkRule};
use crate::quantizers::{q_tau, Bit, QuantizerSpec, Resolver};

fn schedule_at(schedule: &Option<Vec<f64>>, fixed: f64, cycle: usize) -> Result<f64> {
    match schedule {
        None => Ok(fixed),
        Some(s) => s
            .get(cycle)
            .copied()
            .ok_or(Error::SequenceExhausted { cycle, len: s.len() }),
    }
}

/// Successive approximation: `b_n = q_τ(u_n)`, `u_{n+1} = 2(u_n − b_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmEncoder {
    pub tau: f64,
    schedule: Option<Vec<f64>>,
}

impl PcmEncoder {
    pub fn new(tau: f64) -> Self {
        PcmEncoder { tau, schedule: None }
    }

    /// Per-cycle thresholds `τ_n` overriding `tau`.
    pub fn with_schedule(mut self, taus: Option<Vec<f64>>) -> Self {
        self.schedule = taus;
        self
    }
}

impl AlgorithmicEncoder for PcmEncoder {
    fn scheme(&self) -> Scheme {
        Scheme::Pcm
    }

    fn input_range(&self) -> InputRange {
        InputRange::closed(0.0, 2.0)
    }

    fn quantize(&self, _x: f64, state: &[f64], cycle: usize) -> Result<Bit> {
        Ok(q_tau(state[0], schedule_at(&self.schedule, self.tau, cycle)?))
    }

    fn update(&self, _x: f64, state: &[f64], bit: Bit, _cycle: usize, next: &mut [f64]) -> Result<()> {
        next[0] = 2.0 * (state[0] - f64::from(bit));
        Ok(())
    }

    fn params(&self) -> ParamVector {
        let p = ParamVector::new().with("tau", self.tau);
        match &self.schedule {
            Some(s) => p.with_per_cycle("tau", s.clone()),
            None => p,
        }
    }
}

pub fn pcm_encode(x: f64, n_bits: usize, tau: f64) -> Result<BitStream> {
    Ok(drive(&PcmEncoder::new(tau), x, n_bits, None, EscapePolicy::default())?.0)
}

/// Beta encoder parameters: base `β ∈ (1, 2]` and a threshold band
/// `[ν1, ν2] ⊆ [1, 1/(β − 1)]` with its flaky resolver.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSpec {
    pub beta: f64,
    pub band: QuantizerSpec,
}

impl BetaSpec {
    pub fn new(beta: f64, nu1: f64, nu2: f64, resolver: Resolver) -> Result<Self> {
        if !(beta > 1.0 && beta <= 2.0) {
            return Err(Error::out_of_range("beta", beta, "(1, 2]"));
        }
        let band = QuantizerSpec::new(1.0, nu1, nu2, resolver)?;
        let lazy = 1.0 / (beta - 1.0);
        if nu1 < 1.0 - 1e-12 || nu2 > lazy + 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "threshold band [{nu1}, {nu2}] leaves the admissible interval [1, {lazy}]"
            )));
        }
        Ok(BetaSpec { beta, band })
    }

    /// Fixed threshold `τ`; `τ = 1` is the greedy expansion.
    pub fn with_threshold(beta: f64, tau: f64) -> Result<Self> {
        Self::new(beta, tau, tau, Resolver::AlwaysZero)
    }

    /// `β/(β − 1)`, the bound on the states and on `β^N |e_N|`.
    pub fn error_constant(&self) -> f64 {
        self.beta / (self.beta - 1.0)
    }
}

/// `b_n = q^{ν1,ν2}(u_n)`, `u_{n+1} = β(u_n − b_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaEncoder {
    pub spec: BetaSpec,
    schedule: Option<Vec<f64>>,
}

impl BetaEncoder {
    pub fn new(spec: BetaSpec) -> Self {
        BetaEncoder { spec, schedule: None }
    }

    /// Per-cycle gains `β_n` (an imprecise multiplier) overriding `spec.beta`.
    pub fn with_schedule(mut self, betas: Option<Vec<f64>>) -> Self {
        self.schedule = betas;
        self
    }
}

impl AlgorithmicEncoder for BetaEncoder {
    fn scheme(&self) -> Scheme {
        Scheme::Beta
    }

    fn input_range(&self) -> InputRange {
        InputRange::closed(0.0, self.spec.error_constant())
    }

    fn quantize(&self, _x: f64, state: &[f64], cycle: usize) -> Result<Bit> {
        self.spec.band.flaky(state[0], cycle)
    }

    fn update(&self, _x: f64, state: &[f64], bit: Bit, cycle: usize, next: &mut [f64]) -> Result<()> {
        let beta = schedule_at(&self.schedule, self.spec.beta, cycle)?;
        next[0] = beta * (state[0] - f64::from(bit));
        Ok(())
    }

    fn params(&self) -> ParamVector {
        let p = ParamVector::new()
            .with("beta", self.spec.beta)
            .with("nu1", self.spec.band.nu1)
            .with("nu2", self.spec.band.nu2);
        match &self.schedule {
            Some(s) => p.with_per_cycle("beta", s.clone()),
            None => p,
        }
    }

    fn resolver(&self) -> Option<&Resolver> {
        (!self.spec.band.is_sharp()).then_some(&self.spec.band.resolver)
    }
}

pub fn beta_encode(x: f64, n_bits: usize, spec: &BetaSpec) -> Result<BitStream> {
    Ok(drive(
        &BetaEncoder::new(spec.clone()),
        x,
        n_bits,
        None,
        EscapePolicy::default(),
    )?
    .0)
}

/// First-order ΣΔ: `b_n = q_τ(u_n + x)`, `u_{n+1} = u_n + x − b_n`.
/// The state starts at the supplied `u_0`, not at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sd1Encoder {
    pub tau: f64,
}

impl Sd1Encoder {
    pub fn new(tau: f64) -> Self {
        Sd1Encoder { tau }
    }
}

impl AlgorithmicEncoder for Sd1Encoder {
    fn scheme(&self) -> Scheme {
        Scheme::SigmaDelta1
    }

    fn input_range(&self) -> InputRange {
        InputRange::closed(0.0, 1.0)
    }

    fn loads_input(&self) -> bool {
        false
    }

    fn quantize(&self, x: f64, state: &[f64], _cycle: usize) -> Result<Bit> {
        Ok(q_tau(state[0] + x, self.tau))
    }

    fn update(&self, x: f64, state: &[f64], bit: Bit, _cycle: usize, next: &mut [f64]) -> Result<()> {
        next[0] = state[0] + x - f64::from(bit);
        Ok(())
    }

    fn params(&self) -> ParamVector {
        ParamVector::new().with("tau", self.tau)
    }
}

pub fn sd1_encode(x: f64, n_bits: usize, u0: f64) -> Result<BitStream> {
    InputRange::closed(0.0, 1.0).check("u0", u0)?;
    Ok(drive(&Sd1Encoder::new(1.0), x, n_bits, Some(&[u0]), EscapePolicy::default())?.0)
}

/// Running mean of the bits.
pub fn sd1_decode(bits: &BitStream) -> Result<f64> {
    if bits.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let ones = bits.bits.iter().filter(|&&b| b == 1).count();
    Ok(ones as f64 / bits.len() as f64)
}

/// `a_j = (−1)^{k−1−j} C(k, j)` for `j < k`: the last row of the companion
/// matrix of `Δ^k u_n = x − b_n`.
pub fn sdk_coefficients(k: usize) -> Vec<f64> {
    let mut binom = 1.0f64;
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let sign = if (k - 1 - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        out.push(sign * binom);
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    out
}

/// k-th order ΣΔ with a caller-supplied bit rule; no stability is implied.
#[derive(Clone)]
pub struct SigmaDeltaKSpec {
    pub k: usize,
    pub rule: SdkRule,
    coefficients: Vec<f64>,
}

impl fmt::Debug for SigmaDeltaKSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigmaDeltaKSpec")
            .field("k", &self.k)
            .field("coefficients", &self.coefficients)
            .finish_non_exhaustive()
    }
}

impl SigmaDeltaKSpec {
    pub fn new(k: usize, rule: SdkRule) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidSpec("sigma-delta order must be at least 1".into()));
        }
        Ok(SigmaDeltaKSpec {
            k,
            rule,
            coefficients: sdk_coefficients(k),
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

/// One companion-form step: `b = rule(x, u)`, shift the window and append
/// `Σ a_j u_{n+j} + x − b`.
pub fn sdk_step(state: &[f64], x: f64, spec: &SigmaDeltaKSpec) -> Result<(Bit, Vec<f64>)> {
    let mut next = vec![0.0; spec.k];
    let b = SdkEncoder::new(spec.clone()).step(x, state, &mut next)?;
    Ok((b, next))
}

#[derive(Debug, Clone)]
pub struct SdkEncoder {
    pub spec: SigmaDeltaKSpec,
}

impl SdkEncoder {
    pub fn new(spec: SigmaDeltaKSpec) -> Self {
        SdkEncoder { spec }
    }

    fn step(&self, x: f64, state: &[f64], next: &mut [f64]) -> Result<Bit> {
        if state.len() != self.spec.k {
            return Err(Error::DimensionMismatch {
                scheme: self.scheme().to_string(),
                expected: self.spec.k,
                got: state.len(),
            });
        }
        let b = self.quantize(x, state, 0)?;
        self.update(x, state, b, 0, next)?;
        Ok(b)
    }
}

impl AlgorithmicEncoder for SdkEncoder {
    fn scheme(&self) -> Scheme {
        Scheme::SigmaDeltaK { k: self.spec.k }
    }

    fn input_range(&self) -> InputRange {
        InputRange::closed(0.0, 1.0)
    }

    fn loads_input(&self) -> bool {
        false
    }

    fn quantize(&self, x: f64, state: &[f64], _cycle: usize) -> Result<Bit> {
        let b = (self.spec.rule)(x, state);
        if b > 1 {
            return Err(Error::InvalidSpec(format!("sigma-delta rule returned {b}")));
        }
        Ok(b)
    }

    fn update(&self, x: f64, state: &[f64], bit: Bit, _cycle: usize, next: &mut [f64]) -> Result<()> {
        let k = self.spec.k;
        next[..k - 1].copy_from_slice(&state[1..]);
        let lin: f64 = self.spec.coefficients.iter().zip(state).map(|(a, u)| a * u).sum();
        next[k - 1] = lin + x - f64::from(bit);
        Ok(())
    }

    fn params(&self) -> ParamVector {
        ParamVector::new().with("k", self.spec.k as f64)
    }
}
