//! The algorithmic-encoder abstraction `AE(Q, F)`: one bit per cycle from
//! `b_n = Q(x, u_n)` followed by the state update `u_{n+1} = F(x, u_n)`.
//!
//! Every concrete scheme implements [`AlgorithmicEncoder`]; [`drive`] runs the
//! iteration and records the [`Trajectory`]. [`EncoderRun`] is the
//! scheme-agnostic run description used by the CLI and by
//! [`empirical_distortion`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::baselines::{BetaEncoder, BetaSpec, PcmEncoder, Sd1Encoder, SdkEncoder, SigmaDeltaKSpec};
use crate::error::{Error, Result};
use crate::golden::{GreEncoder, NoiseModel};
use crate::polynacci::{PolynacciConfig, PolynacciEncoder, PolynacciRule};
use crate::quantizers::{Bit, QuantizerSpec, Resolver};
use crate::workbench::table::fmt_real;

/// Encoding scheme identifier. Serialized as `pcm`, `beta`, `sd1`, `sdk{k}`,
/// `gre` or `polynacci{L}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    Pcm,
    Beta,
    SigmaDelta1,
    SigmaDeltaK { k: usize },
    Gre,
    Polynacci { l: usize },
}

impl Scheme {
    /// Dimension of the state vector.
    pub fn order(&self) -> usize {
        match *self {
            Scheme::Pcm | Scheme::Beta | Scheme::SigmaDelta1 => 1,
            Scheme::SigmaDeltaK { k } => k,
            Scheme::Gre => 2,
            Scheme::Polynacci { l } => l,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Pcm => f.write_str("pcm"),
            Scheme::Beta => f.write_str("beta"),
            Scheme::SigmaDelta1 => f.write_str("sd1"),
            Scheme::SigmaDeltaK { k } => write!(f, "sdk{{{k}}}"),
            Scheme::Gre => f.write_str("gre"),
            Scheme::Polynacci { l } => write!(f, "polynacci{{{l}}}"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let braced = |prefix: &str| -> Option<usize> {
            s.strip_prefix(prefix)?
                .strip_prefix('{')?
                .strip_suffix('}')?
                .parse()
                .ok()
        };
        match s {
            "pcm" => Ok(Scheme::Pcm),
            "beta" => Ok(Scheme::Beta),
            "sd1" => Ok(Scheme::SigmaDelta1),
            "gre" => Ok(Scheme::Gre),
            _ => {
                if let Some(k) = braced("sdk") {
                    Ok(Scheme::SigmaDeltaK { k })
                } else if let Some(l) = braced("polynacci") {
                    Ok(Scheme::Polynacci { l })
                } else {
                    Err(Error::InvalidSpec(format!("unknown scheme '{s}'")))
                }
            }
        }
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.to_string()
    }
}

/// Aggregate parameter vector `λ`, optionally with per-cycle overrides `{λ^n}`.
///
/// A per-cycle column replaces the aggregate value of the same name at each
/// cycle; its length must equal the number of bits of the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_cycle: BTreeMap<String, Vec<f64>>,
}

impl ParamVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.values.insert(name.to_owned(), value);
        self
    }

    pub fn with_per_cycle(mut self, name: &str, values: Vec<f64>) -> Self {
        self.per_cycle.insert(name.to_owned(), values);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn get_or(&self, name: &str, default: f64) -> f64 {
        self.get(name).unwrap_or(default)
    }

    /// Value in effect at `cycle`.
    pub fn at(&self, name: &str, cycle: usize) -> Option<f64> {
        match self.per_cycle.get(name) {
            Some(seq) => seq.get(cycle).copied(),
            None => self.get(name),
        }
    }

    pub fn schedule(&self, name: &str) -> Option<&[f64]> {
        self.per_cycle.get(name).map(Vec::as_slice)
    }

    pub fn validate(&self, n_bits: usize) -> Result<()> {
        for (name, seq) in &self.per_cycle {
            if seq.len() != n_bits {
                return Err(Error::InvalidConfig(format!(
                    "per-cycle parameter '{name}' has {} entries, expected {n_bits}",
                    seq.len()
                )));
            }
        }
        Ok(())
    }
}

/// First `N` bits of an encoder output together with the producing configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitStream {
    pub scheme: Scheme,
    pub params: ParamVector,
    pub n_bits: usize,
    #[serde(with = "bit_string")]
    pub bits: Vec<Bit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolver: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BitStream {
    pub fn new(scheme: Scheme, params: ParamVector, bits: Vec<Bit>) -> Self {
        BitStream {
            scheme,
            params,
            n_bits: bits.len(),
            bits,
            resolver: None,
            notes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bitstream serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let stream: BitStream =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(format!("bitstream JSON: {e}")))?;
        if stream.bits.len() != stream.n_bits {
            return Err(Error::InvalidConfig(format!(
                "n_bits = {} but {} bits present",
                stream.n_bits,
                stream.bits.len()
            )));
        }
        Ok(stream)
    }

    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }
}

mod bit_string {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::quantizers::Bit;

    pub fn serialize<S: Serializer>(bits: &[Bit], s: S) -> Result<S::Ok, S::Error> {
        let text: String = bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
        s.serialize_str(&text)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Bit>, D::Error> {
        let text = String::deserialize(d)?;
        text.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(D::Error::custom(format!("invalid bit character {other:?}"))),
            })
            .collect()
    }
}

/// When a trajectory counts as escaped, and whether to stop recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapePolicy {
    pub bound: f64,
    /// Stop recording states at the first escape. Bits are still produced for
    /// all `N` cycles.
    pub early_stop: bool,
}

impl Default for EscapePolicy {
    fn default() -> Self {
        EscapePolicy {
            bound: 100.0,
            early_stop: false,
        }
    }
}

/// State sequence `u_0, …, u_N` of a run, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    data: Vec<f64>,
    escaped: bool,
    escape_index: Option<usize>,
    truncated_at: Option<usize>,
}

impl Trajectory {
    fn with_capacity(dim: usize, states: usize) -> Self {
        Trajectory {
            dim,
            data: Vec::with_capacity(dim * states),
            escaped: false,
            escape_index: None,
            truncated_at: None,
        }
    }

    fn push(&mut self, state: &[f64]) {
        self.data.extend_from_slice(state);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of recorded states.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn escaped(&self) -> bool {
        self.escaped
    }

    /// First state index whose sup-norm exceeded the escape bound.
    pub fn escape_index(&self) -> Option<usize> {
        self.escape_index
    }

    /// Set when early stopping cut the recording short.
    pub fn truncated_at(&self) -> Option<usize> {
        self.truncated_at
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &u| m.max(u.abs()))
    }

    /// The scalar sequence `u_0, u_1, …`: first component of every state
    /// followed by the tail of the last state.
    pub fn scalar_sequence(&self) -> Vec<f64> {
        if self.is_empty() {
            return Vec::new();
        }
        let mut seq: Vec<f64> = self.states().map(|s| s[0]).collect();
        seq.extend_from_slice(&self.last()[1..]);
        seq
    }

    /// CSV with header `n,u_n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,u_n\n");
        for (n, u) in self.scalar_sequence().into_iter().enumerate() {
            out.push_str(&format!("{n},{}\n", fmt_real(u)));
        }
        out
    }
}

/// The interval of admissible inputs of a scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputRange {
    pub lo: f64,
    pub hi: f64,
    pub hi_inclusive: bool,
}

impl InputRange {
    pub fn closed(lo: f64, hi: f64) -> Self {
        InputRange {
            lo,
            hi,
            hi_inclusive: true,
        }
    }

    pub fn half_open(lo: f64, hi: f64) -> Self {
        InputRange {
            lo,
            hi,
            hi_inclusive: false,
        }
    }

    pub fn unbounded_above(lo: f64) -> Self {
        Self::closed(lo, f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && (x < self.hi || (self.hi_inclusive && x == self.hi))
    }

    pub fn check(&self, what: &'static str, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::out_of_range(what, x, self.to_string()))
        }
    }
}

impl fmt::Display for InputRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let close = if self.hi_inclusive { ']' } else { ')' };
        write!(f, "[{}, {}{close}", self.lo, self.hi)
    }
}

/// An algorithmic encoder `AE(Q, F)`.
pub trait AlgorithmicEncoder {
    fn scheme(&self) -> Scheme;

    /// State dimension.
    fn order(&self) -> usize {
        self.scheme().order()
    }

    fn input_range(&self) -> InputRange;

    /// Whether the input is loaded into state component 0 (`u_0 = x`).
    /// Schemes that return false see `x` only through `Q` and `F`.
    fn loads_input(&self) -> bool {
        true
    }

    /// `Q(x, u_n)`.
    fn quantize(&self, x: f64, state: &[f64], cycle: usize) -> Result<Bit>;

    /// `F(x, u_n)` given the bit already chosen at this cycle.
    fn update(&self, x: f64, state: &[f64], bit: Bit, cycle: usize, next: &mut [f64]) -> Result<()>;

    fn params(&self) -> ParamVector;

    fn resolver(&self) -> Option<&Resolver> {
        None
    }

    /// Metadata notes for input `x` (e.g. outside the guaranteed range).
    fn notes(&self, _x: f64) -> Vec<String> {
        Vec::new()
    }
}

/// Runs `n_bits` cycles of `encoder` on input `x`.
///
/// `initial_state` defaults to zeros; for encoders that load the input,
/// component 0 is replaced by `x`.
pub fn drive<E: AlgorithmicEncoder + ?Sized>(
    encoder: &E,
    x: f64,
    n_bits: usize,
    initial_state: Option<&[f64]>,
    escape: EscapePolicy,
) -> Result<(BitStream, Trajectory)> {
    if n_bits == 0 {
        return Err(Error::InvalidConfig("n_bits must be at least 1".into()));
    }
    if !x.is_finite() {
        return Err(Error::out_of_range("x", x, "finite reals"));
    }
    encoder.input_range().check("x", x)?;
    let dim = encoder.order();
    let mut state = match initial_state {
        Some(s) if s.len() != dim => {
            return Err(Error::DimensionMismatch {
                scheme: encoder.scheme().to_string(),
                expected: dim,
                got: s.len(),
            })
        }
        Some(s) => s.to_vec(),
        None => vec![0.0; dim],
    };
    if encoder.loads_input() {
        state[0] = x;
    }

    let exceeds = |s: &[f64]| s.iter().any(|u| u.is_nan() || u.abs() > escape.bound);
    let mut traj = Trajectory::with_capacity(dim, n_bits + 1);
    traj.push(&state);
    if exceeds(&state) {
        traj.escaped = true;
        traj.escape_index = Some(0);
    }
    let mut recording = !(traj.escaped && escape.early_stop);
    if !recording {
        traj.truncated_at = Some(0);
    }

    let mut bits = Vec::with_capacity(n_bits);
    let mut next = vec![0.0; dim];
    for n in 0..n_bits {
        let b = encoder.quantize(x, &state, n)?;
        encoder.update(x, &state, b, n, &mut next)?;
        std::mem::swap(&mut state, &mut next);
        bits.push(b);
        if recording {
            traj.push(&state);
        }
        if !traj.escaped && exceeds(&state) {
            traj.escaped = true;
            traj.escape_index = Some(n + 1);
            if escape.early_stop {
                recording = false;
                traj.truncated_at = Some(n + 1);
            }
        }
    }

    let mut stream = BitStream::new(encoder.scheme(), encoder.params(), bits);
    stream.resolver = encoder.resolver().map(|r| r.name().to_owned());
    stream.notes = encoder.notes(x);
    Ok((stream, traj))
}

/// Bit decision rule for k-th order ΣΔ: `(x, [u_n, …, u_{n+k-1}]) ↦ b_n`.
pub type SdkRule = Arc<dyn Fn(f64, &[f64]) -> Bit + Send + Sync>;

/// Scheme-agnostic run description.
///
/// Parameter names by scheme: `pcm`: `tau`; `beta`: `beta`, `tau` or
/// `nu1`/`nu2`; `sd1`: none; `sdk{k}`: none (rule injected); `gre`: `alpha`,
/// `nu1`, `nu2`; `polynacci{L}`: `nu1`, `nu2`, weights `w0…w{L-1}`
/// (defaulting to the telescoping weights).
/// Per-cycle columns are accepted for `gre`/`alpha`, `pcm`/`tau` and
/// `beta`/`beta`.
#[derive(Clone)]
pub struct EncoderRun {
    pub scheme: Scheme,
    pub params: ParamVector,
    pub initial_state: Vec<f64>,
    pub n_bits: usize,
    pub resolver: Resolver,
    pub noise: NoiseModel,
    pub escape: EscapePolicy,
    pub sdk_rule: Option<SdkRule>,
}

impl fmt::Debug for EncoderRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EncoderRun")
            .field("scheme", &self.scheme)
            .field("params", &self.params)
            .field("initial_state", &self.initial_state)
            .field("n_bits", &self.n_bits)
            .field("resolver", &self.resolver)
            .field("noise", &self.noise)
            .field("escape", &self.escape)
            .field("sdk_rule", &self.sdk_rule.as_ref().map(|_| "<rule>"))
            .finish()
    }
}

impl EncoderRun {
    pub fn new(scheme: Scheme, params: ParamVector, n_bits: usize) -> Self {
        EncoderRun {
            scheme,
            params,
            initial_state: vec![0.0; scheme.order()],
            n_bits,
            resolver: Resolver::AlwaysZero,
            noise: NoiseModel::None,
            escape: EscapePolicy::default(),
            sdk_rule: None,
        }
    }

    pub fn with_resolver(mut self, resolver: Resolver) -> Self {
        self.resolver = resolver;
        self
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_initial_state(mut self, state: Vec<f64>) -> Self {
        self.initial_state = state;
        self
    }

    pub fn with_sdk_rule(mut self, rule: SdkRule) -> Self {
        self.sdk_rule = Some(rule);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bits == 0 {
            return Err(Error::InvalidConfig("n_bits must be at least 1".into()));
        }
        if self.initial_state.len() != self.scheme.order() {
            return Err(Error::DimensionMismatch {
                scheme: self.scheme.to_string(),
                expected: self.scheme.order(),
                got: self.initial_state.len(),
            });
        }
        self.params.validate(self.n_bits)?;
        let allowed: &[&str] = match self.scheme {
            Scheme::Gre => &["alpha"],
            Scheme::Pcm => &["tau"],
            Scheme::Beta => &["beta"],
            _ => &[],
        };
        if let Some(name) = self.params.per_cycle.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidConfig(format!(
                "per-cycle parameter '{name}' is not supported by {}",
                self.scheme
            )));
        }
        Ok(())
    }

    fn band(&self, alpha: f64, default_nu: f64) -> Result<QuantizerSpec> {
        let p = &self.params;
        let tau = p.get("tau");
        let nu1 = p.get("nu1").or(tau).unwrap_or(default_nu);
        let nu2 = p.get("nu2").or(tau).unwrap_or(nu1);
        QuantizerSpec::new(alpha, nu1, nu2, self.resolver.clone())
    }

    /// Builds the concrete encoder described by this run.
    pub fn build(&self) -> Result<Box<dyn AlgorithmicEncoder + Send + Sync>> {
        self.validate()?;
        let p = &self.params;
        Ok(match self.scheme {
            Scheme::Pcm => {
                Box::new(PcmEncoder::new(p.get_or("tau", 1.0)).with_schedule(p.schedule("tau").map(<[f64]>::to_vec)))
            }
            Scheme::Beta => {
                let beta = p
                    .get("beta")
                    .ok_or_else(|| Error::InvalidConfig("beta scheme needs 'beta'".into()))?;
                let band = self.band(1.0, 1.0)?;
                let spec = BetaSpec::new(beta, band.nu1, band.nu2, band.resolver)?;
                Box::new(BetaEncoder::new(spec).with_schedule(p.schedule("beta").map(<[f64]>::to_vec)))
            }
            Scheme::SigmaDelta1 => Box::new(Sd1Encoder::new(p.get_or("tau", 1.0))),
            Scheme::SigmaDeltaK { k } => {
                let rule = self
                    .sdk_rule
                    .clone()
                    .ok_or_else(|| Error::InvalidConfig("sdk scheme needs an injected rule".into()))?;
                Box::new(SdkEncoder::new(SigmaDeltaKSpec::new(k, rule)?))
            }
            Scheme::Gre => {
                let spec = self.band(p.get_or("alpha", 1.0), 1.0)?;
                let mut enc = GreEncoder::new(spec, self.noise.clone());
                if let Some(s) = p.schedule("alpha") {
                    enc = enc.with_alpha_schedule(s.to_vec());
                }
                Box::new(enc)
            }
            Scheme::Polynacci { l } => {
                let beta = crate::polynacci::beta_l(l, 1e-15)?.beta;
                let defaults = crate::polynacci::telescoping_weights(l, beta);
                let weights = (0..l).map(|i| p.get_or(&format!("w{i}"), defaults[i])).collect();
                let band = self.band(1.0, 1.0)?;
                let rule = PolynacciRule::linear_threshold(weights, band)?;
                Box::new(PolynacciEncoder::new(PolynacciConfig::new(l, rule)?)?)
            }
        })
    }
}

/// Runs the encoder described by `run` on input `x`.
pub fn run_encoder(run: &EncoderRun, x: f64) -> Result<(BitStream, Trajectory)> {
    let encoder = run.build()?;
    drive(encoder.as_ref(), x, run.n_bits, Some(&run.initial_state), run.escape)
}

/// `max_x |x − D_N(E_N(x))|` over `samples`.
pub fn empirical_distortion<D>(run: &EncoderRun, decoder: D, samples: &[f64]) -> Result<f64>
where
    D: Fn(&BitStream) -> f64,
{
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let encoder = run.build()?;
    samples.iter().try_fold(0.0f64, |worst, &x| {
        let (bits, _) = drive(encoder.as_ref(), x, run.n_bits, Some(&run.initial_state), run.escape)?;
        Ok(worst.max((x - decoder(&bits)).abs()))
    })
}

/// `count` equally spaced points covering `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}
