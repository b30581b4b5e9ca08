use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::table::{Cell, ExperimentTable};
use crate::decoders::{bias_term, CompensatedSum};
use crate::error::{Error, Result};
use crate::framework::{EscapePolicy, Trajectory};
use crate::golden::{robustness_margin_with, GreEncoder, InvariantRect, NoiseModel, ParamRegion, PHI};
use crate::quantizers::{Bit, QuantizerSpec, Resolver};
use crate::rng;

/// Cycles used by [`robustness_sweep`] for its decode-error column.
pub const SWEEP_BITS: usize = 48;

/// Inputs `x ∈ [0, 1]` whose initial state `(x, 0)` lies in `R(μ)`.
pub fn admissible_inputs(mu: f64) -> Result<(f64, f64)> {
    Ok(InvariantRect::new(mu)?.admissible_unit_inputs())
}

/// `(1 − φ^{-2N})/(1 − φ^{-2})`: `Var(Σ_{n<N} ε_n φ^{-n})` in units of `Var(ε)`.
pub fn noise_variance_factor(n: usize) -> f64 {
    (1.0 - PHI.powi(-2 * n as i32)) / (1.0 - PHI.powi(-2))
}

fn run_trials<T, F>(trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

fn draw_input(seed: u64, trial: u64, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng::trial_rng(seed, trial).random::<f64>()
}

fn reseed(resolver: &Resolver, trial_seed: u64) -> Resolver {
    match resolver {
        Resolver::RandomUniformThreshold { .. } => Resolver::RandomUniformThreshold { seed: trial_seed },
        other => other.clone(),
    }
}

fn uniform_noise(amplitude: f64, seed: u64) -> Result<NoiseModel> {
    if amplitude == 0.0 {
        Ok(NoiseModel::None)
    } else {
        NoiseModel::uniform(amplitude, seed)
    }
}

/// Errors `x − Σ_{n<N} b_n φ^{-n}` for `N = 1..=bits.len()`.
fn running_errors(x: f64, bits: &[Bit]) -> Vec<f64> {
    let mut sum = CompensatedSum::default();
    bits.iter()
        .enumerate()
        .map(|(n, &b)| {
            if b == 1 {
                sum.add(PHI.powi(-(n as i32)));
            }
            x - sum.value()
        })
        .collect()
}

fn weighted_noise(noise: &NoiseModel, n: usize) -> Result<f64> {
    let mut s = CompensatedSum::default();
    for k in 0..n {
        s.add(noise.at(k)? * PHI.powi(-(k as i32)));
    }
    Ok(s.value())
}

fn check_trials(trials: usize, min: usize) -> Result<()> {
    if trials < min {
        return Err(Error::InvalidConfig(format!("trials = {trials}, need at least {min}")));
    }
    Ok(())
}

/// Fraction of inputs with `|u_N| > 1` under `Q_1` with per-cycle random
/// thresholds in `(1 − δ, 1 + δ)`, for `N = 1..=n_max`.
pub fn escape_fraction_experiment(delta: f64, n_max: usize, trials: usize, seed: u64) -> Result<ExperimentTable> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::out_of_range("delta", delta, "[0, 1)"));
    }
    check_trials(trials, 100)?;
    if n_max == 0 {
        return Err(Error::InvalidConfig("n_max must be at least 1".into()));
    }
    let per_trial = run_trials(trials, |t| {
        let ts = rng::trial_seed(seed, t);
        let x = draw_input(seed, t, (0.0, 1.0));
        let spec = QuantizerSpec::new(
            1.0,
            1.0 - delta,
            1.0 + delta,
            Resolver::RandomUniformThreshold { seed: ts },
        )?;
        let (_, traj) = GreEncoder::new(spec, NoiseModel::None).encode(x, n_max, EscapePolicy::default())?;
        Ok(traj.scalar_sequence())
    })?;
    let mut table = ExperimentTable::new(
        "escape",
        &["N", "delta", "escape_fraction", "escapes", "trials", "seed"],
    )
    .with_meta("resolver", "random")
    .with_meta("input", "uniform [0, 1]");
    for n in 1..=n_max {
        let escapes = per_trial.iter().filter(|seq| seq[n].abs() > 1.0).count();
        table.push(vec![
            n.into(),
            delta.into(),
            (escapes as f64 / trials as f64).into(),
            escapes.into(),
            trials.into(),
            seed.into(),
        ]);
    }
    Ok(table)
}

/// Root-mean-square decode error per `N` with i.i.d. uniform noise in
/// `(−noise_amp, noise_amp)`. The spec must be admissible for `μ = noise_amp`.
pub fn rmse_vs_n_experiment(
    spec: &QuantizerSpec,
    noise_amp: f64,
    n_max: usize,
    trials: usize,
    seed: u64,
) -> Result<ExperimentTable> {
    check_trials(trials, 1)?;
    let region = ParamRegion::new(noise_amp)?;
    if !region.contains(spec.alpha, spec.nu1, spec.nu2) {
        return Err(Error::InvalidConfig(format!(
            "(alpha, nu1, nu2) = ({}, {}, {}) is outside the admissible region for mu = {noise_amp}",
            spec.alpha, spec.nu1, spec.nu2
        )));
    }
    let inputs = admissible_inputs(noise_amp)?;
    let per_trial = run_trials(trials, |t| {
        let ts = rng::trial_seed(seed, t);
        let x = draw_input(seed, t, inputs);
        let trial_spec = QuantizerSpec {
            resolver: reseed(&spec.resolver, ts),
            ..spec.clone()
        };
        let enc = GreEncoder::new(trial_spec, uniform_noise(noise_amp, ts)?);
        let (bits, _) = enc.encode(x, n_max, EscapePolicy::default())?;
        Ok(running_errors(x, &bits.bits))
    })?;
    let sigma2 = noise_amp * noise_amp / 3.0;
    let mut table = ExperimentTable::new("rmse", &["N", "rmse", "log2_rmse", "noise_floor", "trials", "seed"])
        .with_meta("alpha", spec.alpha)
        .with_meta("nu1", spec.nu1)
        .with_meta("nu2", spec.nu2)
        .with_meta("noise_amp", noise_amp)
        .with_meta("resolver", spec.resolver.name())
        .with_meta("input", format!("uniform [{}, {}]", inputs.0, inputs.1));
    for n in 1..=n_max {
        let ms = per_trial.iter().map(|e| e[n - 1] * e[n - 1]).sum::<f64>() / trials as f64;
        let rmse = ms.sqrt();
        table.push(vec![
            n.into(),
            rmse.into(),
            rmse.log2().into(),
            (sigma2 * noise_variance_factor(n)).sqrt().into(),
            trials.into(),
            seed.into(),
        ]);
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseVarianceResult {
    pub n: usize,
    pub sigma: f64,
    /// `(1 − φ^{-2N})/(1 − φ^{-2}) σ²`.
    pub predicted: f64,
    /// Sample variance of `Σ_{n<N} ε_n φ^{-n}`.
    pub empirical_noise: f64,
    /// Mean of `(x − Σ b_n φ^{-n})²`.
    pub empirical_error: f64,
    pub trials: usize,
    pub seed: u64,
}

impl NoiseVarianceResult {
    pub fn noise_ratio(&self) -> f64 {
        self.empirical_noise / self.predicted
    }

    pub fn error_ratio(&self) -> f64 {
        self.empirical_error / self.predicted
    }

    pub fn to_table(&self) -> ExperimentTable {
        let mut t = ExperimentTable::new(
            "variance",
            &[
                "N",
                "sigma",
                "predicted",
                "empirical_noise",
                "empirical_error",
                "noise_ratio",
                "error_ratio",
                "trials",
                "seed",
            ],
        );
        t.push(vec![
            self.n.into(),
            self.sigma.into(),
            self.predicted.into(),
            self.empirical_noise.into(),
            self.empirical_error.into(),
            self.noise_ratio().into(),
            self.error_ratio().into(),
            self.trials.into(),
            self.seed.into(),
        ]);
        t
    }
}

/// Compares the accumulated-noise variance with its prediction, using the
/// quantizer `(α, ν1, ν2) = (1.5, 1.2, 1.3)` and uniform noise of standard
/// deviation `sigma`.
pub fn noise_variance_check(sigma: f64, n: usize, trials: usize, seed: u64) -> Result<NoiseVarianceResult> {
    check_trials(trials, 2)?;
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::out_of_range("sigma", sigma, "(0, inf)"));
    }
    let amp = 3f64.sqrt() * sigma;
    let spec = QuantizerSpec::new(1.5, 1.2, 1.3, Resolver::AlwaysZero)?;
    let region = ParamRegion::new(amp)?;
    if !region.contains(spec.alpha, spec.nu1, spec.nu2) {
        return Err(Error::InvalidConfig(format!(
            "sigma = {sigma} is too large for (1.5, 1.2, 1.3) to stay admissible"
        )));
    }
    let inputs = admissible_inputs(amp)?;
    let samples = run_trials(trials, |t| {
        let ts = rng::trial_seed(seed, t);
        let x = draw_input(seed, t, inputs);
        let noise = NoiseModel::uniform(amp, ts)?;
        let trial_spec = QuantizerSpec {
            resolver: Resolver::RandomUniformThreshold { seed: ts },
            ..spec.clone()
        };
        let (bits, _) = GreEncoder::new(trial_spec, noise.clone()).encode(x, n, EscapePolicy::default())?;
        let err = *running_errors(x, &bits.bits).last().expect("n >= 1");
        Ok((weighted_noise(&noise, n)?, err))
    })?;
    let count = trials as f64;
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / count;
    let empirical_noise = samples.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let empirical_error = samples.iter().map(|s| s.1 * s.1).sum::<f64>() / count;
    Ok(NoiseVarianceResult {
        n,
        sigma,
        predicted: noise_variance_factor(n) * sigma * sigma,
        empirical_noise,
        empirical_error,
        trials,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasResult {
    pub n: usize,
    pub mean_error: f64,
    pub standard_error: f64,
    /// `½ φ^{2−N}`.
    pub xi: f64,
    pub min_error: f64,
    pub trials: usize,
    pub seed: u64,
}

impl BiasResult {
    pub fn all_positive(&self) -> bool {
        self.min_error > 0.0
    }

    /// `|mean − ξ_N|` in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mean_error - self.xi).abs() / self.standard_error
    }

    pub fn to_table(&self) -> ExperimentTable {
        let mut t = ExperimentTable::new(
            "bias",
            &[
                "N",
                "mean_error",
                "standard_error",
                "xi",
                "z_score",
                "min_error",
                "all_positive",
                "trials",
                "seed",
            ],
        );
        t.push(vec![
            self.n.into(),
            self.mean_error.into(),
            self.standard_error.into(),
            self.xi.into(),
            self.z_score().into(),
            self.min_error.into(),
            self.all_positive().into(),
            self.trials.into(),
            self.seed.into(),
        ]);
        t
    }
}

/// Sample mean of `e_N(x)` over uniform `x ∈ [0, 1]` for the exact `Q_1`
/// encoder, against `ξ_N`.
pub fn bias_check(n: usize, trials: usize, seed: u64) -> Result<BiasResult> {
    check_trials(trials, 2)?;
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    let enc = GreEncoder::new(QuantizerSpec::exact(1.0), NoiseModel::None);
    let errors = run_trials(trials, |t| {
        let x = draw_input(seed, t, (0.0, 1.0));
        let (bits, _) = enc.encode(x, n, EscapePolicy::default())?;
        Ok(*running_errors(x, &bits.bits).last().expect("n >= 1"))
    })?;
    let count = trials as f64;
    let mean = errors.iter().sum::<f64>() / count;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (count - 1.0);
    Ok(BiasResult {
        n,
        mean_error: mean,
        standard_error: (var / count).sqrt(),
        xi: bias_term(n),
        min_error: errors.iter().copied().fold(f64::INFINITY, f64::min),
        trials,
        seed,
    })
}

/// Outcome of encoding under per-cycle gain jitter, flaky thresholds and noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRun {
    pub alpha: f64,
    pub alpha_jitter: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub mu: f64,
    pub noise_amp: f64,
    pub n_bits: usize,
    pub escapes: usize,
    /// Runs with some state farther than μ from `R(μ)`.
    pub exits: usize,
    pub max_abs_u: f64,
    /// `max |x − Σ b_n φ^{-n} + Σ ε_n φ^{-n}|`.
    pub max_compensated_error: f64,
    /// `max |x − Σ b_n φ^{-n}|`.
    pub max_raw_error: f64,
    /// `C(μ) φ^{-N}`.
    pub bound: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Encodes `trials` inputs from the admissible interval with gains
/// `α_n ∈ (α − jitter, α + jitter)`, the spec's band with a random resolver
/// and uniform noise `|ε_n| ≤ noise_amp`; states are checked against `R(μ)`.
pub fn gre_robustness_run(
    spec: &QuantizerSpec,
    alpha_jitter: f64,
    mu: f64,
    noise_amp: f64,
    n_bits: usize,
    trials: usize,
    seed: u64,
) -> Result<RobustnessRun> {
    check_trials(trials, 1)?;
    let rect = InvariantRect::new(mu)?;
    let inputs = rect.admissible_unit_inputs();
    let outcomes = run_trials(trials, |t| {
        let ts = rng::trial_seed(seed, t);
        let x = draw_input(seed, t, inputs);
        let alphas: Vec<f64> = (0..n_bits)
            .map(|n| {
                spec.alpha
                    + alpha_jitter * (1.0 - 1e-9) * (2.0 * rng::uniform_at(ts, rng::JITTER_STREAM, n as u64) - 1.0)
            })
            .collect();
        let trial_spec = QuantizerSpec {
            resolver: Resolver::RandomUniformThreshold { seed: ts },
            ..spec.clone()
        };
        let noise = uniform_noise(noise_amp, ts)?;
        let enc = GreEncoder::new(trial_spec, noise.clone()).with_alpha_schedule(alphas);
        let (bits, traj) = enc.encode(x, n_bits, EscapePolicy::default())?;
        let raw = *running_errors(x, &bits.bits).last().expect("n_bits >= 1");
        let compensated = raw + weighted_noise(&noise, n_bits)?;
        Ok((
            traj.escaped(),
            exits(&rect, &traj),
            traj.max_abs(),
            compensated.abs(),
            raw.abs(),
        ))
    })?;
    Ok(RobustnessRun {
        alpha: spec.alpha,
        alpha_jitter,
        nu1: spec.nu1,
        nu2: spec.nu2,
        mu,
        noise_amp,
        n_bits,
        escapes: outcomes.iter().filter(|o| o.0).count(),
        exits: outcomes.iter().filter(|o| o.1).count(),
        max_abs_u: outcomes.iter().map(|o| o.2).fold(0.0, f64::max),
        max_compensated_error: outcomes.iter().map(|o| o.3).fold(0.0, f64::max),
        max_raw_error: outcomes.iter().map(|o| o.4).fold(0.0, f64::max),
        bound: rect.error_constant() * PHI.powi(-(n_bits as i32)),
        trials,
        seed,
    })
}

fn exits(rect: &InvariantRect, traj: &Trajectory) -> bool {
    traj.states().any(|s| rect.distance(s[0], s[1]) > rect.mu + 1e-9)
}

/// [`gre_robustness_run`] with the gain tolerance and band returned by
/// [`robustness_margin_with`] at `α`.
pub fn strong_robustness_check(
    alpha: f64,
    mu: f64,
    noise: bool,
    n_bits: usize,
    trials: usize,
    seed: u64,
) -> Result<RobustnessRun> {
    let m = robustness_margin_with(alpha, mu, 0.5, 0.5)?;
    let spec = QuantizerSpec::new(alpha, m.nu1, m.nu2, Resolver::AlwaysZero)?;
    gre_robustness_run(&spec, m.eta, mu, if noise { mu } else { 0.0 }, n_bits, trials, seed)
}

/// Classifies every `(α, ν1 ≤ ν2)` of the grids against the admissible
/// region and encodes `trials` inputs per resolver (zero, one, random) with
/// uniform noise `|ε_n| ≤ μ`.
pub fn robustness_sweep(
    mu: f64,
    alpha_grid: &[f64],
    nu_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ExperimentTable> {
    check_trials(trials, 1)?;
    let region = ParamRegion::new(mu)?;
    let rect = InvariantRect::new(mu)?;
    let inputs = rect.admissible_unit_inputs();
    let mut cells = Vec::new();
    for &alpha in alpha_grid {
        for (i, &nu1) in nu_grid.iter().enumerate() {
            for &nu2 in &nu_grid[i..] {
                if nu1 <= nu2 {
                    cells.push((alpha, nu1, nu2));
                }
            }
        }
    }
    let escape = EscapePolicy {
        early_stop: true,
        ..EscapePolicy::default()
    };
    let mut table = ExperimentTable::new(
        "sweep",
        &[
            "alpha",
            "nu1",
            "nu2",
            "mu",
            "inside",
            "escapes",
            "exits",
            "max_abs_u",
            "max_error",
            "trials",
            "seed",
        ],
    )
    .with_meta("resolvers", "zero,one,random")
    .with_meta("n_bits", SWEEP_BITS)
    .with_meta("input", format!("uniform [{}, {}]", inputs.0, inputs.1));
    let rows = cells
        .par_iter()
        .map(|&(alpha, nu1, nu2)| -> Result<Vec<Cell>> {
            let (mut escapes, mut exit_count, mut max_abs, mut max_err) = (0usize, 0usize, 0.0f64, 0.0f64);
            for t in 0..trials as u64 {
                let ts = rng::trial_seed(seed, t);
                let x = draw_input(seed, t, inputs);
                for resolver in [
                    Resolver::AlwaysZero,
                    Resolver::AlwaysOne,
                    Resolver::RandomUniformThreshold { seed: ts },
                ] {
                    let spec = QuantizerSpec::new(alpha, nu1, nu2, resolver)?;
                    let (bits, traj) = GreEncoder::new(spec, uniform_noise(mu, ts)?).encode(x, SWEEP_BITS, escape)?;
                    escapes += usize::from(traj.escaped());
                    exit_count += usize::from(exits(&rect, &traj));
                    max_abs = max_abs.max(traj.max_abs());
                    let err = *running_errors(x, &bits.bits).last().expect("SWEEP_BITS >= 1");
                    max_err = max_err.max(err.abs());
                }
            }
            Ok(vec![
                alpha.into(),
                nu1.into(),
                nu2.into(),
                mu.into(),
                region.contains(alpha, nu1, nu2).into(),
                escapes.into(),
                exit_count.into(),
                max_abs.into(),
                max_err.into(),
                trials.into(),
                seed.into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    for row in rows {
        table.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_factor_limits() {
        assert_eq!(noise_variance_factor(1), 1.0);
        assert!((noise_variance_factor(200) - PHI).abs() < 1e-12);
    }

    #[test]
    fn exact_quantizer_never_escapes() {
        let t = escape_fraction_experiment(0.0, 30, 200, 5).unwrap();
        assert!(t.column("escapes").unwrap().iter().all(|&e| e == 0.0));
        assert!(escape_fraction_experiment(0.1, 30, 50, 5).is_err());
    }

    #[test]
    fn rmse_rejects_inadmissible_spec() {
        let spec = QuantizerSpec::new(1.0, 0.9, 1.1, Resolver::AlwaysZero).unwrap();
        assert!(rmse_vs_n_experiment(&spec, 0.0, 10, 10, 1).is_err());
    }

    #[test]
    fn small_bias_run() {
        let r = bias_check(8, 2000, 3).unwrap();
        assert!(r.all_positive());
        assert!(r.z_score() < 4.0, "{r:?}");
    }

    #[test]
    fn tables_reproducible_across_pools() {
        let spec = QuantizerSpec::new(1.5, 1.2, 1.3, Resolver::RandomUniformThreshold { seed: 0 }).unwrap();
        let a = rmse_vs_n_experiment(&spec, 2f64.powi(-6), 20, 300, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| rmse_vs_n_experiment(&spec, 2f64.powi(-6), 20, 300, 9).unwrap());
        assert_eq!(a.to_csv(), b.to_csv());
        let c = rmse_vs_n_experiment(&spec, 2f64.powi(-6), 20, 300, 10).unwrap();
        assert_ne!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn sweep_classification() {
        let t = robustness_sweep(0.0, &[1.0], &[0.9, 1.0, 1.1], 20, 4).unwrap();
        // pairs: (0.9,0.9) (0.9,1) (0.9,1.1) (1,1) (1,1.1) (1.1,1.1)
        assert_eq!(t.len(), 6);
        let inside = t.column("inside").unwrap();
        let escapes = t.column("escapes").unwrap();
        let nu1 = t.column("nu1").unwrap();
        let nu2 = t.column("nu2").unwrap();
        for i in 0..t.len() {
            let exact = nu1[i] == 1.0 && nu2[i] == 1.0;
            assert_eq!(inside[i] == 1.0, exact);
            if exact {
                assert_eq!(escapes[i], 0.0);
                assert!(t.column("max_error").unwrap()[i] <= PHI.powi(2 - SWEEP_BITS as i32));
            }
        }
        let wide = (0..t.len()).find(|&i| nu1[i] == 0.9 && nu2[i] == 1.1).unwrap();
        assert!(escapes[wide] > 0.0);
    }
}
