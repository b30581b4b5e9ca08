//! Float encoders checked against an exact rational shadow evaluator.

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;

use gre::baselines::{beta_encode, pcm_encode, BetaSpec};
use gre::{gre_encode, NoiseModel, QuantizerSpec};

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

/// Exact run of the golden-ratio recursion with `α = 1` and a sharp threshold
/// `τ`. Returns the bits, the states `u_0..=u_N`, and the first cycle whose
/// quantizer input landed exactly on `τ`.
fn gre_exact(x: &BigRational, tau: &BigRational, n: usize) -> (Vec<u8>, Vec<BigRational>, Option<usize>) {
    let mut u = vec![x.clone(), BigRational::zero()];
    let mut bits = Vec::with_capacity(n);
    let mut tie = None;
    for k in 0..n {
        let w = &u[k] + &u[k + 1];
        if tie.is_none() && &w == tau {
            tie = Some(k);
        }
        let b = u8::from(&w >= tau);
        bits.push(b);
        u.push(w - BigRational::from_integer(b.into()));
    }
    u.truncate(n + 1);
    (bits, u, tie)
}

/// Exact `u_{n+1} = β (u_n − b_n)` with `b_n = [u_n ≥ τ]`.
fn radix_exact(x: &BigRational, beta: &BigRational, tau: &BigRational, n: usize) -> Vec<u8> {
    let mut u = x.clone();
    (0..n)
        .map(|_| {
            let b = u8::from(&u >= tau);
            u = beta * (&u - BigRational::from_integer(b.into()));
            b
        })
        .collect()
}

#[test]
fn half_is_period_three() {
    let (bits, states, tie) = gre_exact(&rat(1, 2), &BigRational::one(), 30);
    assert_eq!(tie, Some(2), "the third cycle sits exactly on the threshold");
    for (k, b) in bits.iter().enumerate() {
        assert_eq!(*b, u8::from(k % 3 == 2));
    }
    assert_eq!(states[3], states[0]);
    let (float_bits, _) = gre_encode(0.5, 30, &QuantizerSpec::exact(1.0), &NoiseModel::None).unwrap();
    assert_eq!(float_bits.bits, bits);
}

#[test]
fn pcm_three_quarters() {
    let exact = radix_exact(&rat(3, 4), &rat(2, 1), &BigRational::one(), 8);
    assert_eq!(exact, vec![0, 1, 1, 0, 0, 0, 0, 0]);
    assert_eq!(pcm_encode(0.75, 8, 1.0).unwrap().bits, exact);
}

#[test]
fn small_denominators_match_float_encoder() {
    let spec = QuantizerSpec::exact(1.0);
    let mut compared = 0;
    for q in 2..=40i64 {
        for p in 0..=q {
            let (bits, states, tie) = gre_exact(&rat(p, q), &BigRational::one(), 40);
            let (stream, traj) = gre_encode(p as f64 / q as f64, 40, &spec, &NoiseModel::None).unwrap();
            // at an exact tie the rounded float input may fall on either side
            let upto = tie.unwrap_or(40);
            compared += upto;
            assert_eq!(stream.bits[..upto], bits[..upto], "x = {p}/{q}");
            for (k, s) in states.iter().enumerate().take(upto + 1) {
                let drift = (traj.state(k)[0] - s.to_f64().unwrap()).abs();
                assert!(
                    drift <= 1e-15 * 1.7f64.powi(k as i32 + 1),
                    "x = {p}/{q}, k = {k}: {drift}"
                );
            }
        }
    }
    assert!(compared > 5000, "only {compared} cycles compared");
}

proptest! {
    #[test]
    fn dyadic_inputs_are_exact(k in 0u32..=(1 << 20), j in 0i64..=8) {
        // a dyadic state never lands on a non-dyadic τ, so rounding τ cannot flip a bit
        let tau = rat(8 + j, 12);
        let (bits, states, _) = gre_exact(&rat(k.into(), 1 << 20), &tau, 40);
        let t = tau.to_f64().unwrap();
        let spec = QuantizerSpec::new(1.0, t, t, gre::Resolver::AlwaysZero).unwrap();
        let (stream, traj) = gre_encode(f64::from(k) / f64::from(1u32 << 20), 40, &spec, &NoiseModel::None).unwrap();
        prop_assert_eq!(&stream.bits, &bits);
        for (i, s) in states.iter().enumerate() {
            prop_assert_eq!(traj.state(i)[0], s.to_f64().unwrap());
        }
    }

    #[test]
    fn unit_square_is_invariant(p in 0i64..=1000, q in 1i64..=1000) {
        prop_assume!(p <= q);
        let (_, states, _) = gre_exact(&rat(p, q), &BigRational::one(), 60);
        for s in &states {
            prop_assert!(!s.is_negative() && s <= &BigRational::one());
        }
    }

    #[test]
    fn beta_three_halves_matches(k in 0u32..1024) {
        let x = rat(k.into(), 1024);
        let exact = radix_exact(&x, &rat(3, 2), &BigRational::one(), 20);
        let spec = BetaSpec::with_threshold(1.5, 1.0).unwrap();
        prop_assert_eq!(beta_encode(k as f64 / 1024.0, 20, &spec).unwrap().bits, exact);
    }
}
