use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gre::baselines::sd1_decode;
use gre::decoders::{decode_bias_corrected, decode_partial_sum, requantize};
use gre::golden::{robustness_margin, verify_invariance, InvariantRect, UnitSquare};
use gre::workbench::{
    bias_check, escape_fraction_experiment, noise_variance_check, rmse_vs_n_experiment, robustness_sweep,
    ExperimentTable,
};
use gre::{
    run_encoder, BitStream, EncoderRun, NoiseModel, ParamRegion, ParamVector, QuantizerSpec, Resolver, Scheme, PHI,
};

/// Golden ratio encoder workbench.
#[derive(Parser)]
#[command(name = "gre", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode one input and print the bitstream as JSON.
    Encode(EncodeArgs),
    /// Decode a bitstream JSON read from stdin.
    Decode {
        /// Decoding base; defaults to the base implied by the stream's scheme.
        #[arg(long)]
        beta: Option<f64>,
        /// Add the mean-error correction for golden-ratio streams.
        #[arg(long)]
        bias_correct: bool,
    },
    /// Convert a golden-ratio bitstream on stdin into a base-2 fixed-point string.
    Requantize {
        /// Fractional output bits.
        #[arg(long = "B", value_name = "BITS")]
        b: u32,
    },
    /// Print the admissible parameter region for noise level mu.
    Region {
        #[arg(long)]
        mu: f64,
        /// Report a single alpha instead of a table over the alpha interval.
        #[arg(long)]
        alpha: Option<f64>,
        /// Table size when --alpha is omitted.
        #[arg(long, default_value_t = 21)]
        count: usize,
    },
    /// Check invariance of a state region on a grid; exits 1 on violations.
    InvarianceCheck {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        nu1: f64,
        #[arg(long)]
        nu2: f64,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = RegionKind::Rect)]
        region: RegionKind,
    },
    /// Run a Monte Carlo experiment and write its table.
    Experiment {
        #[command(subcommand)]
        kind: Experiment,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Gre,
    Pcm,
    Beta,
    Sd1,
    Poly,
}

#[derive(Clone, Copy, ValueEnum)]
enum ResolverArg {
    Zero,
    One,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionKind {
    /// The invariant rectangle R(mu).
    Rect,
    /// The unit square, invariant for the exact alpha = 1 quantizer.
    Square,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long)]
    x: f64,
    #[arg(long)]
    bits: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    nu1: Option<f64>,
    #[arg(long)]
    nu2: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Polynacci order.
    #[arg(long = "L", default_value_t = 3)]
    l: usize,
    #[arg(long, value_enum, default_value_t = ResolverArg::Zero)]
    resolver: ResolverArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform additive noise amplitude (golden ratio scheme only).
    #[arg(long)]
    noise_amp: Option<f64>,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file ending in .csv or .json; CSV goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Experiment {
    /// Fraction of trajectories outside [-1, 1] per N under threshold jitter.
    Escape {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 60)]
        n_max: usize,
    },
    /// Root-mean-square decode error per N with uniform additive noise.
    Rmse {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1.2)]
        nu1: f64,
        #[arg(long, default_value_t = 1.3)]
        nu2: f64,
        #[arg(long, default_value_t = 0.015625)]
        noise_amp: f64,
        #[arg(long, default_value_t = 60)]
        n_max: usize,
    },
    /// Empirical against predicted variance of the accumulated noise term.
    Variance {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.015625 / 1.732_050_807_568_877_2)]
        sigma: f64,
        #[arg(long, default_value_t = 40)]
        n: usize,
    },
    /// Mean decode error of the exact quantizer against its closed form.
    Bias {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        n: usize,
    },
    /// Escape and error statistics over an (alpha, nu1, nu2) grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        /// Comma-separated alpha values.
        #[arg(long, value_delimiter = ',', default_value = "1,1.25,1.5,1.75,2")]
        alpha_grid: Vec<f64>,
        /// Comma-separated threshold values; every ordered pair is a band.
        #[arg(long, value_delimiter = ',', default_value = "0.9,1,1.1,1.2,1.3")]
        nu_grid: Vec<f64>,
    },
}

enum Failure {
    Usage(String),
    Violation(String),
}

impl From<gre::Error> for Failure {
    fn from(e: gre::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn read_stream() -> Result<BitStream, Failure> {
    let mut input = String::new();
    std::io::stdin()
        .read_to_string(&mut input)
        .map_err(|e| Failure::Usage(format!("reading stdin: {e}")))?;
    Ok(BitStream::from_json(&input)?)
}

fn encode(a: &EncodeArgs) -> Result<(), Failure> {
    let scheme = match a.scheme {
        SchemeArg::Gre => Scheme::Gre,
        SchemeArg::Pcm => Scheme::Pcm,
        SchemeArg::Beta => Scheme::Beta,
        SchemeArg::Sd1 => Scheme::SigmaDelta1,
        SchemeArg::Poly => Scheme::Polynacci { l: a.l },
    };
    let mut params = ParamVector::new();
    for (name, value) in [
        ("alpha", a.alpha),
        ("nu1", a.nu1),
        ("nu2", a.nu2),
        ("beta", a.beta),
        ("tau", a.tau),
    ] {
        if let Some(v) = value {
            params = params.with(name, v);
        }
    }
    let resolver = match a.resolver {
        ResolverArg::Zero => Resolver::AlwaysZero,
        ResolverArg::One => Resolver::AlwaysOne,
        ResolverArg::Random => Resolver::RandomUniformThreshold { seed: a.seed },
    };
    let mut run = EncoderRun::new(scheme, params, a.bits).with_resolver(resolver);
    if let Some(amp) = a.noise_amp {
        if scheme != Scheme::Gre {
            return Err(Failure::Usage("--noise-amp applies to the gre scheme only".into()));
        }
        run = run.with_noise(NoiseModel::uniform(amp, a.seed)?);
    }
    let (stream, _) = run_encoder(&run, a.x)?;
    println!("{}", stream.to_json());
    Ok(())
}

fn decode(beta: Option<f64>, bias_correct: bool) -> Result<(), Failure> {
    let stream = read_stream()?;
    let value = if bias_correct {
        if beta.is_some_and(|b| (b - PHI).abs() > 1e-12) {
            return Err(Failure::Usage("--bias-correct decodes in base phi".into()));
        }
        let result = decode_bias_corrected(&stream)?;
        if result.heuristic {
            eprintln!("note: correction term is exact only for the sharp alpha = 1 quantizer");
        }
        result.value
    } else {
        match (beta, stream.scheme) {
            (Some(b), _) => decode_partial_sum(&stream, b)?,
            (None, Scheme::Pcm) => decode_partial_sum(&stream, 2.0)?,
            (None, Scheme::Gre) => decode_partial_sum(&stream, PHI)?,
            (None, Scheme::SigmaDelta1) => sd1_decode(&stream)?,
            (None, Scheme::Beta | Scheme::Polynacci { .. }) => {
                let b = stream
                    .params
                    .get("beta")
                    .ok_or_else(|| Failure::Usage("stream carries no 'beta'; pass --beta".into()))?;
                decode_partial_sum(&stream, b)?
            }
            (None, other) => return Err(Failure::Usage(format!("no default decoder for {other}; pass --beta"))),
        }
    };
    println!("{value}");
    Ok(())
}

fn region(mu: f64, alpha: Option<f64>, count: usize) -> Result<(), Failure> {
    let r = ParamRegion::new(mu)?;
    let mut out = serde_json::json!({
        "mu": mu,
        "alpha_min": r.alpha_min,
        "alpha_max": r.alpha_max,
        "alpha_closure": r.alpha_closure,
        "empty": r.is_empty(),
    });
    match alpha {
        Some(a) => {
            out["sample"] = serde_json::to_value(r.sample(a)).expect("plain struct");
            out["inside"] = r.contains_alpha(a).into();
            if let Ok(m) = robustness_margin(a, mu) {
                out["margin"] = serde_json::to_value(m).expect("plain struct");
            }
        }
        None => out["table"] = serde_json::to_value(r.table(count)).expect("plain structs"),
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("json value"));
    Ok(())
}

fn invariance(mu: f64, alpha: f64, nu1: f64, nu2: f64, grid: usize, kind: RegionKind) -> Result<(), Failure> {
    if grid < 2 {
        return Err(Failure::Usage("--grid must be at least 2".into()));
    }
    let spec = QuantizerSpec::new(alpha, nu1, nu2, Resolver::AlwaysZero)?;
    let report = match kind {
        RegionKind::Rect => verify_invariance(&InvariantRect::new(mu)?, &spec, mu, grid),
        RegionKind::Square => verify_invariance(&UnitSquare, &spec, mu, grid),
    };
    println!("{}", report.to_json());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Violation(format!(
            "{} invariance violations",
            report.violation_count
        )))
    }
}

fn emit(table: &ExperimentTable, common: &Common) -> Result<(), Failure> {
    match &common.out {
        Some(path) => Ok(table.write(path)?),
        None => {
            print!("{}", table.to_csv());
            Ok(())
        }
    }
}

fn experiment(kind: &Experiment) -> Result<(), Failure> {
    match kind {
        Experiment::Escape { common, delta, n_max } => emit(
            &escape_fraction_experiment(*delta, *n_max, common.trials, common.seed)?,
            common,
        ),
        Experiment::Rmse {
            common,
            alpha,
            nu1,
            nu2,
            noise_amp,
            n_max,
        } => {
            let spec = QuantizerSpec::new(
                *alpha,
                *nu1,
                *nu2,
                Resolver::RandomUniformThreshold { seed: common.seed },
            )?;
            emit(
                &rmse_vs_n_experiment(&spec, *noise_amp, *n_max, common.trials, common.seed)?,
                common,
            )
        }
        Experiment::Variance { common, sigma, n } => emit(
            &noise_variance_check(*sigma, *n, common.trials, common.seed)?.to_table(),
            common,
        ),
        Experiment::Bias { common, n } => emit(&bias_check(*n, common.trials, common.seed)?.to_table(), common),
        Experiment::Sweep {
            common,
            mu,
            alpha_grid,
            nu_grid,
        } => emit(
            &robustness_sweep(*mu, alpha_grid, nu_grid, common.trials, common.seed)?,
            common,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Encode(args) => encode(args),
        Command::Decode { beta, bias_correct } => decode(*beta, *bias_correct),
        Command::Requantize { b } => read_stream()
            .and_then(|s| Ok(requantize(&s, *b)?))
            .map(|v| println!("{}", v.to_binary_string())),
        Command::Region { mu, alpha, count } => region(*mu, *alpha, *count),
        Command::InvarianceCheck {
            mu,
            alpha,
            nu1,
            nu2,
            grid,
            region,
        } => invariance(*mu, *alpha, *nu1, *nu2, *grid, *region),
        Command::Experiment { kind } => experiment(kind),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("gre: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("gre: {msg}");
            ExitCode::from(2)
        }
    }
}
