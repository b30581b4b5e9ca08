//! L-term generalisation `u_{n+L} = u_{n+L−1} + ⋯ + u_n − b_n` of the golden
//! ratio encoder, whose expansions are in base `β_L`, the dominant root of
//! `s^L = s^{L−1} + ⋯ + 1`.
//!
//! No quantization rule is known to be stable for `L ≥ 3`; every encode
//! returns a [`StabilityReport`] alongside the bits.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::framework::{
    drive, AlgorithmicEncoder, BitStream, EscapePolicy, InputRange, ParamVector, Scheme, Trajectory,
};
use crate::quantizers::{Bit, QuantizerSpec, Resolver};

/// `β_L` together with the largest modulus among the other roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicRoot {
    pub l: usize,
    pub beta: f64,
    /// `|β^L − Σ_{j<L} β^j|`.
    pub residual: f64,
    pub other_max_modulus: f64,
}

impl CharacteristicRoot {
    /// All other roots strictly inside the unit circle.
    pub fn is_pisot(&self) -> bool {
        self.other_max_modulus < 1.0
    }
}

fn characteristic(l: usize, s: f64) -> f64 {
    // Horner on s^L − s^{L−1} − ⋯ − 1
    (0..l).fold(1.0, |acc, _| acc * s - 1.0)
}

/// Largest root of `s^L − (s^{L−1} + ⋯ + 1)` by bisection on `(1, 2)`,
/// stopping once the bracket is narrower than `tol`.
pub fn beta_l(l: usize, tol: f64) -> Result<CharacteristicRoot> {
    if l < 2 {
        return Err(Error::InvalidSpec(format!("L = {l}, need L >= 2")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidSpec(format!("tolerance {tol} must be positive")));
    }
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if characteristic(l, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);

    let companion = DMatrix::from_fn(l, l, |i, j| if i + 1 == l || j == i + 1 { 1.0 } else { 0.0 });
    let other_max_modulus = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .filter(|&m| (m - beta).abs() > 1e-6)
        .fold(0.0, f64::max);

    Ok(CharacteristicRoot {
        l,
        beta,
        residual: characteristic(l, beta).abs(),
        other_max_modulus,
    })
}

/// `c_0 = 1`, `c_i = c_{i−1}/β + 1`, so that
/// `x − Σ_{n<N} b_n β^{-n} = β^{-N} Σ_i c_i u_{N+i}` (and `c_{L−1} = β`).
pub fn telescoping_weights(l: usize, beta: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(l);
    let mut prev = 1.0;
    c.push(prev);
    for _ in 1..l {
        prev = prev / beta + 1.0;
        c.push(prev);
    }
    c
}

/// Custom decision `(state, cycle) ↦ bit`.
pub type StateRule = Arc<dyn Fn(&[f64], usize) -> Bit + Send + Sync>;

#[derive(Clone)]
pub enum PolynacciRule {
    /// `q^{ν1,ν2}(Σ w_i u_{n+i})` with the band's resolver.
    LinearThreshold {
        weights: Vec<f64>,
        band: QuantizerSpec,
    },
    Custom(StateRule),
}

impl fmt::Debug for PolynacciRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolynacciRule::LinearThreshold { weights, band } => f
                .debug_struct("LinearThreshold")
                .field("weights", weights)
                .field("band", band)
                .finish(),
            PolynacciRule::Custom(_) => f.write_str("Custom(<rule>)"),
        }
    }
}

impl PolynacciRule {
    pub fn linear_threshold(weights: Vec<f64>, band: QuantizerSpec) -> Result<Self> {
        band.validate()?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidSpec("non-finite rule weight".into()));
        }
        Ok(PolynacciRule::LinearThreshold { weights, band })
    }

    /// Heuristic default: threshold 1 on `Σ c_i u_{n+i}` with the telescoping
    /// weights, i.e. a greedy decision on `β^n e_n`. For `L = 2` this is
    /// `Q_φ` of the golden ratio encoder.
    pub fn default_for(l: usize) -> Result<Self> {
        let root = beta_l(l, 1e-15)?;
        Self::linear_threshold(telescoping_weights(l, root.beta), QuantizerSpec::exact(1.0))
    }

    fn decide(&self, state: &[f64], cycle: usize) -> Result<Bit> {
        match self {
            PolynacciRule::LinearThreshold { weights, band } => {
                let w = weights.iter().zip(state).fold(0.0, |acc, (a, u)| acc + a * u);
                band.flaky(w, cycle)
            }
            PolynacciRule::Custom(rule) => Ok(rule(state, cycle)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolynacciConfig {
    pub l: usize,
    pub rule: PolynacciRule,
    pub escape: EscapePolicy,
}

impl PolynacciConfig {
    pub fn new(l: usize, rule: PolynacciRule) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidSpec(format!("L = {l}, need L >= 2")));
        }
        if let PolynacciRule::LinearThreshold { weights, .. } = &rule {
            if weights.len() != l {
                return Err(Error::DimensionMismatch {
                    scheme: Scheme::Polynacci { l }.to_string(),
                    expected: l,
                    got: weights.len(),
                });
            }
        }
        Ok(PolynacciConfig {
            l,
            rule,
            escape: EscapePolicy::default(),
        })
    }

    pub fn with_default_rule(l: usize) -> Result<Self> {
        Self::new(l, PolynacciRule::default_for(l)?)
    }
}

#[derive(Debug, Clone)]
pub struct PolynacciEncoder {
    pub config: PolynacciConfig,
    pub root: CharacteristicRoot,
}

impl PolynacciEncoder {
    pub fn new(config: PolynacciConfig) -> Result<Self> {
        let root = beta_l(config.l, 1e-15)?;
        Ok(PolynacciEncoder { config, root })
    }
}

impl AlgorithmicEncoder for PolynacciEncoder {
    fn scheme(&self) -> Scheme {
        Scheme::Polynacci { l: self.config.l }
    }

    fn input_range(&self) -> InputRange {
        InputRange::unbounded_above(0.0)
    }

    fn quantize(&self, _x: f64, state: &[f64], cycle: usize) -> Result<Bit> {
        self.config.rule.decide(state, cycle)
    }

    fn update(&self, _x: f64, state: &[f64], bit: Bit, _cycle: usize, next: &mut [f64]) -> Result<()> {
        let l = self.config.l;
        next[..l - 1].copy_from_slice(&state[1..]);
        next[l - 1] = state.iter().fold(0.0, |acc, u| acc + u) - f64::from(bit);
        Ok(())
    }

    fn params(&self) -> ParamVector {
        let mut p = ParamVector::new().with("beta", self.root.beta);
        if let PolynacciRule::LinearThreshold { weights, band } = &self.config.rule {
            for (i, w) in weights.iter().enumerate() {
                p = p.with(&format!("w{i}"), *w);
            }
            p = p.with("nu1", band.nu1).with("nu2", band.nu2);
        }
        p
    }

    fn resolver(&self) -> Option<&Resolver> {
        match &self.config.rule {
            PolynacciRule::LinearThreshold { band, .. } if !band.is_sharp() => Some(&band.resolver),
            _ => None,
        }
    }

    fn notes(&self, _x: f64) -> Vec<String> {
        if self.config.l > 2 {
            vec!["heuristic quantization rule: stability is monitored, not guaranteed".into()]
        } else {
            Vec::new()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub beta: f64,
    pub max_abs: f64,
    pub escaped: bool,
    pub escape_index: Option<usize>,
    /// `β^{-N} Σ c_i u_{N+i}`, the exact remainder `x − Σ b_n β^{-n}` when
    /// the recursion is computed without rounding.
    pub telescoped_error: f64,
    /// `max |u|` times `Σ c_i`: bounds `β^N |e_N|` while the orbit stays bounded.
    pub error_constant: f64,
}

#[derive(Debug, Clone)]
pub struct PolynacciOutput {
    pub bits: BitStream,
    pub trajectory: Trajectory,
    pub report: StabilityReport,
}

/// Encodes with `u_0 = x`, `u_1 = ⋯ = u_{L−1} = 0`.
pub fn polynacci_encode(x: f64, n_bits: usize, config: &PolynacciConfig) -> Result<PolynacciOutput> {
    let encoder = PolynacciEncoder::new(config.clone())?;
    let (bits, trajectory) = drive(&encoder, x, n_bits, None, config.escape)?;
    let beta = encoder.root.beta;
    let weights = telescoping_weights(config.l, beta);
    let last = trajectory.last();
    let telescoped_error = if trajectory.truncated_at().is_some() {
        f64::NAN
    } else {
        beta.powi(-(n_bits as i32)) * weights.iter().zip(last).map(|(c, u)| c * u).sum::<f64>()
    };
    let max_abs = trajectory.max_abs();
    let report = StabilityReport {
        beta,
        max_abs,
        escaped: trajectory.escaped(),
        escape_index: trajectory.escape_index(),
        telescoped_error,
        error_constant: max_abs * weights.iter().sum::<f64>(),
    };
    Ok(PolynacciOutput {
        bits,
        trajectory,
        report,
    })
}
