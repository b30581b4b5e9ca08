//! Decoders: partial sums in base β, the bias-corrected golden ratio decoder
//! and an exact-integer requantizer to base 2.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::framework::{BitStream, Scheme};
use crate::golden::PHI;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

/// `Σ_n b_n β^{-n}`, summed in order of increasing `n`.
pub fn decode_partial_sum(bits: &BitStream, beta: f64) -> Result<f64> {
    partial_sum(&bits.bits, beta)
}

/// [`decode_partial_sum`] on a raw bit slice.
pub fn partial_sum(bits: &[u8], beta: f64) -> Result<f64> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::out_of_range("beta", beta, "(1, inf)"));
    }
    let sum: CompensatedSum = bits
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == 1)
        .map(|(n, _)| beta.powi(-(n as i32)))
        .collect();
    Ok(sum.value())
}

/// `ξ_N = ½ φ^{2−N}`, the mean of `e_N(x)` over `x ∈ [0, 1]` for exact `Q_1`.
pub fn bias_term(n_bits: usize) -> f64 {
    0.5 * PHI.powi(2 - n_bits as i32)
}

/// `e_N = φ^{-N}(u_N + φ u_{N+1})`.
pub fn error_formula(u_n: f64, u_n1: f64, n: i32) -> f64 {
    PHI.powi(-n) * (u_n + PHI * u_n1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeResult {
    pub value: f64,
    pub scheme: Scheme,
    pub n_bits: usize,
    pub bias_corrected: bool,
    /// Set when the stream does not come from the exact `α = 1`, `ν1 = ν2 = 1`
    /// encoder, for which the correction is only a heuristic.
    pub heuristic: bool,
}

fn is_exact_q1(bits: &BitStream) -> bool {
    let p = &bits.params;
    let one = |name: &str| p.get(name).is_none_or(|v| v == 1.0);
    bits.scheme == Scheme::Gre
        && one("alpha")
        && one("nu1")
        && one("nu2")
        && p.get("noise_amp").is_none_or(|a| a == 0.0)
        && p.per_cycle.is_empty()
}

/// Golden ratio partial sum plus `ξ_N`.
pub fn decode_bias_corrected(bits: &BitStream) -> Result<DecodeResult> {
    if !matches!(bits.scheme, Scheme::Gre | Scheme::Polynacci { l: 2 }) {
        return Err(Error::InvalidSpec(format!(
            "bias correction is defined for golden ratio streams, got {}",
            bits.scheme
        )));
    }
    Ok(DecodeResult {
        value: decode_partial_sum(bits, PHI)? + bias_term(bits.len()),
        scheme: bits.scheme,
        n_bits: bits.len(),
        bias_corrected: true,
        heuristic: !is_exact_q1(bits),
    })
}

/// `mantissa · 2^{-frac_bits}` with an arbitrary-precision mantissa.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FixedPointValue {
    pub frac_bits: u32,
    pub mantissa: BigInt,
}

impl FixedPointValue {
    pub fn new(frac_bits: u32, mantissa: BigInt) -> Self {
        FixedPointValue { frac_bits, mantissa }
    }

    /// The value as a double (exact when the mantissa fits in 53 bits).
    pub fn to_f64(&self) -> f64 {
        let m = &self.mantissa;
        let excess = m.bits().saturating_sub(62);
        let head: i64 = (m >> excess).try_into().expect("mantissa head fits in i64");
        head as f64 * 2f64.powi(excess as i32 - self.frac_bits as i32)
    }

    /// Base-2 digits: integer part, point, exactly `frac_bits` fraction bits.
    pub fn to_binary_string(&self) -> String {
        let magnitude = self.mantissa.magnitude();
        let int_part = magnitude >> self.frac_bits;
        let frac = magnitude - (&int_part << self.frac_bits);
        let mut digits = frac.to_str_radix(2);
        if frac.is_zero() {
            digits.clear();
        }
        let pad = self.frac_bits as usize - digits.len();
        let sign = if self.mantissa.is_negative() { "-" } else { "" };
        format!("{sign}{}.{}{digits}", int_part.to_str_radix(2), "0".repeat(pad))
    }
}

impl fmt::Display for FixedPointValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_binary_string())
    }
}

/// `ceil(N log2 φ) + 8`, the smallest accepted output width for `N` bits.
pub fn min_frac_bits(n_bits: usize) -> u32 {
    (n_bits as f64 * PHI.log2()).ceil() as u32 + 8
}

/// Guard bits used by [`requantize`] for an `N`-bit stream: enough to absorb
/// the Fibonacci growth of the `φ_1` truncation error along the recursion.
pub fn default_guard_bits(n_bits: usize) -> u32 {
    min_frac_bits(n_bits)
}

/// `⌊2^w / φ⌋ = ⌊(⌊√(5·4^w)⌋ − 2^w)/2⌋`, computed in integers only.
pub fn phi_inverse_fixed(w: u32) -> BigUint {
    let one = BigUint::from(1u8) << w;
    let root = (BigUint::from(5u8) << (2 * w)).sqrt();
    (root - &one) >> 1
}

/// Registers `φ_0 = 2^w`, `φ_1 = ⌊2^w/φ⌋`, `φ_n = φ_{n−2} − φ_{n−1}`.
pub fn phi_registers(count: usize, w: u32) -> Vec<BigInt> {
    let mut regs: Vec<BigInt> = Vec::with_capacity(count);
    for n in 0..count {
        let next = match n {
            0 => BigInt::from(1u8) << w,
            1 => BigInt::from_biguint(Sign::Plus, phi_inverse_fixed(w)),
            _ => &regs[n - 2] - &regs[n - 1],
        };
        regs.push(next);
    }
    regs
}

/// Converts a golden ratio bitstream to `B` fractional bits of base 2 using
/// integer arithmetic only; see [`requantize_with`].
pub fn requantize(bits: &BitStream, frac_bits: u32) -> Result<FixedPointValue> {
    requantize_with(bits, frac_bits, default_guard_bits(bits.len()))
}

/// Accumulates `x_N = Σ q_n φ_n` in registers of `B + guard` fractional bits
/// and truncates the result to `B` bits. `guard = 0` is the bare circuit,
/// whose error grows like `F_N 2^{-B}`.
pub fn requantize_with(bits: &BitStream, frac_bits: u32, guard: u32) -> Result<FixedPointValue> {
    if !matches!(bits.scheme, Scheme::Gre | Scheme::Polynacci { l: 2 }) {
        return Err(Error::InvalidSpec(format!(
            "requantization needs a golden ratio stream, got {}",
            bits.scheme
        )));
    }
    let required = min_frac_bits(bits.len());
    if frac_bits < required {
        return Err(Error::InsufficientPrecision {
            bits: frac_bits,
            required,
        });
    }
    let regs = phi_registers(bits.len(), frac_bits + guard);
    let mut acc = BigInt::zero();
    for (b, phi_n) in bits.bits.iter().zip(&regs) {
        if *b == 1 {
            acc += phi_n;
        }
    }
    Ok(FixedPointValue::new(frac_bits, acc >> guard))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::ParamVector;
    use proptest::prelude::*;

    fn gre_stream(bits: Vec<u8>) -> BitStream {
        BitStream::new(Scheme::Gre, ParamVector::new().with("alpha", 1.0), bits)
    }

    #[test]
    fn partial_sum_examples() {
        assert_eq!(partial_sum(&[1, 0, 0, 0], PHI).unwrap(), 1.0);
        assert_eq!(partial_sum(&[0, 1, 1], 2.0).unwrap(), 0.75);
        let bits: Vec<u8> = (0..30).map(|n| u8::from(n % 3 == 2)).collect();
        // ten terms of Σ φ^{-(3k+2)}, whose infinite sum is 1/2
        let finite = PHI.powi(-2) * (1.0 - PHI.powi(-30)) / (1.0 - PHI.powi(-3));
        assert!((partial_sum(&bits, PHI).unwrap() - finite).abs() < 1e-12);
        assert!((finite - 0.5).abs() < 1e-6);
        assert!(partial_sum(&bits, 1.0).is_err());
        assert!(partial_sum(&bits, f64::NAN).is_err());
    }

    #[test]
    fn bias_examples() {
        let zero = gre_stream(vec![0; 10]);
        let r = decode_bias_corrected(&zero).unwrap();
        assert!((r.value - 0.010_643_1).abs() < 5e-8, "{}", r.value);
        assert!(!r.heuristic && r.bias_corrected);
        assert!((bias_term(1) - PHI / 2.0).abs() < 1e-15);

        let mut flaky = gre_stream(vec![0; 4]);
        flaky.params = ParamVector::new().with("alpha", 1.5).with("nu1", 1.2).with("nu2", 1.3);
        assert!(decode_bias_corrected(&flaky).unwrap().heuristic);
        let pcm = BitStream::new(Scheme::Pcm, ParamVector::new(), vec![1]);
        assert!(decode_bias_corrected(&pcm).is_err());
    }

    #[test]
    fn error_formula_examples() {
        assert_eq!(error_formula(0.0, 0.0, 7), 0.0);
        assert!((error_formula(1.0, 1.0, 0) - (1.0 + PHI)).abs() < 1e-15);
    }

    #[test]
    fn requantize_unit() {
        for b in [16u32, 40, 64] {
            let mut bits = vec![0u8; 8];
            bits[0] = 1;
            let v = requantize(&gre_stream(bits), b).unwrap();
            assert_eq!(v.mantissa, BigInt::from(1u8) << b);
            assert_eq!(v.to_f64(), 1.0);
            assert_eq!(v.to_binary_string(), format!("1.{}", "0".repeat(b as usize)));
        }
    }

    #[test]
    fn requantize_period_three() {
        let bits: Vec<u8> = (0..48).map(|n| u8::from(n % 3 == 2)).collect();
        let v = requantize(&gre_stream(bits), 64).unwrap();
        // the 48-term partial sum differs from 1/2 by φ^{-48}(u+φv) ≈ 1e-10
        assert!((v.to_f64() - 0.5).abs() < 2f64.powi(-30));
        assert!(v.to_binary_string().starts_with("0.0111111111"));
    }

    #[test]
    fn requantize_precondition() {
        let s = gre_stream(vec![1; 40]);
        assert_eq!(min_frac_bits(40), 36);
        assert!(matches!(
            requantize(&s, 35),
            Err(Error::InsufficientPrecision { bits: 35, required: 36 })
        ));
        assert!(requantize(&s, 36).is_ok());
    }

    #[test]
    fn phi_inverse_is_floor() {
        for w in [1u32, 8, 30, 64, 200] {
            let p = phi_inverse_fixed(w);
            // p ≤ 2^w/φ < p + 1  ⇔  p·φ ≤ 2^w < (p+1)·φ, with φ = (1+√5)/2:
            // p√5 ≤ 2^{w+1} − p  ⇔  5p² ≤ (2^{w+1} − p)²
            let two_w1 = BigUint::from(1u8) << (w + 1);
            let lhs = |q: &BigUint| BigUint::from(5u8) * q * q;
            assert!(lhs(&p) <= (&two_w1 - &p).pow(2));
            let q = &p + 1u8;
            assert!(lhs(&q) > (&two_w1 - &q).pow(2));
        }
    }

    #[test]
    fn bare_circuit_drifts() {
        let bits: Vec<u8> = (0..40).map(|n| u8::from(n % 2 == 0)).collect();
        let s = gre_stream(bits);
        let exact = partial_sum(&s.bits, PHI).unwrap();
        let bare = requantize_with(&s, 40, 0).unwrap().to_f64();
        let guarded = requantize(&s, 40).unwrap().to_f64();
        assert!((guarded - exact).abs() < 2f64.powi(-39));
        assert!((bare - exact).abs() > (guarded - exact).abs());
    }

    #[test]
    fn negative_binary_string() {
        let v = FixedPointValue::new(4, BigInt::from(-37));
        assert_eq!(v.to_binary_string(), "-10.0101");
        assert_eq!(v.to_f64(), -2.3125);
    }

    proptest! {
        #[test]
        fn register_recursion_exact(w in 8u32..256, count in 3usize..120) {
            let r = phi_registers(count, w);
            for n in 2..count {
                prop_assert_eq!(&r[n] + &r[n - 1], r[n - 2].clone());
            }
        }

        #[test]
        fn flipping_a_bit_adds_its_weight(bits in prop::collection::vec(0u8..2, 1..64), idx in any::<prop::sample::Index>()) {
            let k = idx.index(bits.len());
            let mut lo = bits.clone();
            lo[k] = 0;
            let mut hi = bits;
            hi[k] = 1;
            let diff = partial_sum(&hi, PHI).unwrap() - partial_sum(&lo, PHI).unwrap();
            prop_assert!((diff - PHI.powi(-(k as i32))).abs() < 1e-14);
        }
    }
}
