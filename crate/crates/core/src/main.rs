use std::f64::consts::PI;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ctspectral::asymptotics::{rate_exponents_exact, TheoryError, TheoryEvaluator};
use ctspectral::estimators::{
    optimal_rates_regular, optimal_window_given_rate_scaled, optimal_window_poisson,
    poisson_smoothed_estimator, regular_smoothed_periodogram, EstimatorConfig, EstimatorError,
    PoissonConfig,
};
use ctspectral::experiment::{
    figures::run_figure, figure_config, Figure, HarnessError, KeyValues, LambdaGrid, Scale,
};
use ctspectral::kernels::Kernel;
use ctspectral::process_models::CarModel;
use ctspectral::sampling::{read_path_csv, PathSimulator, SamplePath, Scheme, SchemeKind, SimError, SimSeed};

#[derive(Parser)]
#[command(name = "ctspectral", version, about = "Spectral estimation for sampled CAR processes")]
struct Cli {
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one sample path and write it as t,x CSV.
    Simulate(SimulateArgs),
    /// Estimate the spectral density of a simulated or stored path.
    Estimate(EstimateArgs),
    /// Tabulate the asymptotic bias and variance.
    Asymptotics(TheoryArgs),
    /// Tabulate regular against Poisson theory and the variance ratio.
    Compare(TheoryArgs),
    /// Run a reference Monte Carlo experiment and write CSV and SVG output.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Clone, Default)]
struct SamplingArgs {
    #[arg(long)]
    scheme: Option<SchemeKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    bn: Option<f64>,
    /// Use the MSE-optimal rate and window rules.
    #[arg(long)]
    auto_rates: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rep: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct RateArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "P")]
    rate_p: Option<f64>,
    #[arg(long = "Q")]
    rate_q: Option<f64>,
    #[arg(long = "R")]
    rate_r: Option<f64>,
    #[arg(long)]
    kernel: Option<Kernel>,
}

#[derive(Args, Clone, Default)]
struct GridArgs {
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    lambda_steps: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    rates: RateArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Path CSV with t,x columns; simulated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    rates: RateArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long)]
    figure: Figure,
    #[arg(long, default_value = "desk")]
    scale: Scale,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<EstimatorError> for Failure {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::InvalidParameter { .. }
            | EstimatorError::SchemeMismatch { .. }
            | EstimatorError::TooFewSamples { .. }
            | EstimatorError::UnboundedKernel => Failure::config(e.to_string()),
            _ => Failure::numeric(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NotPsd { .. } | SimError::Model(_) => Failure::numeric(e.to_string()),
            SimError::Io { .. } => Failure {
                code: 1,
                message: e.to_string(),
            },
            _ => Failure::config(e.to_string()),
        }
    }
}

impl From<TheoryError> for Failure {
    fn from(e: TheoryError) -> Self {
        match e {
            TheoryError::InvalidParameter { .. } | TheoryError::NonConformingKernel { .. } => {
                Failure::config(e.to_string())
            }
            _ => Failure::numeric(e.to_string()),
        }
    }
}

/// Fully resolved settings shared by the single-path subcommands.
struct Resolved {
    model: CarModel,
    scheme: SchemeKind,
    n: usize,
    rho: f64,
    b_n: f64,
    seed: u64,
    rep: u64,
    p: f64,
    q: f64,
    rate_p: f64,
    rate_q: f64,
    rate_r: f64,
    kernel: Kernel,
    lambdas: Vec<f64>,
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn resolve(
    kv: &KeyValues,
    s: &SamplingArgs,
    r: &RateArgs,
    g: &GridArgs,
    n_default: Option<usize>,
) -> Result<Resolved, Failure> {
    let model = kv.model(&CarModel::reference())?;
    let scheme = pick(s.scheme, kv.get("scheme")?, SchemeKind::Regular);
    let n = pick(s.n, kv.get("n")?, n_default.unwrap_or(1000));
    if n < 2 {
        return Err(Failure::config(format!("n = {n} is below 2")));
    }
    let p = pick(r.p, kv.get("p")?, 8.0);
    let q = pick(r.q, kv.get("q")?, 2.0);
    let rate_p = pick(r.rate_p, kv.get("P")?, 1.0);
    let rate_q = pick(r.rate_q, kv.get("Q")?, 0.25);
    let rate_r = pick(r.rate_r, kv.get("R")?, 0.25);
    let kernel = pick(r.kernel, kv.get("kernel")?, Kernel::Hanning);
    let auto = s.auto_rates || kv.get::<bool>("auto_rates")?.unwrap_or(false);
    let rho_given = s.rho.or(kv.get("rho")?);
    let bn_given = s.bn.or(kv.get("bn")?);
    let (rho, b_n) = match scheme {
        SchemeKind::Regular if auto => optimal_rates_regular(n, p, q, rate_p, rate_q)?,
        SchemeKind::Regular => {
            let rho = rho_given.unwrap_or(1.0);
            (rho, bn_given.unwrap_or_else(|| optimal_window_given_rate_scaled(n, rho, q, rate_q)))
        }
        SchemeKind::Poisson => {
            let rho = rho_given.unwrap_or(1.0);
            let b = if auto {
                optimal_window_poisson(n, q, rate_r)
            } else {
                bn_given.unwrap_or_else(|| optimal_window_poisson(n, q, rate_r))
            };
            (rho, b)
        }
    };
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Failure::config(format!("rho = {rho} must be positive")));
    }
    let lmin = pick(g.lambda_min, kv.get("lambda_min")?, 0.0);
    let lmax = pick(g.lambda_max, kv.get("lambda_max")?, PI / 2.0);
    let steps = pick(g.lambda_steps, kv.get("lambda_steps")?, 65);
    if !(lmin.is_finite() && lmax.is_finite()) || lmin > lmax || steps == 0 {
        return Err(Failure::config(format!("bad lambda grid [{lmin}, {lmax}] with {steps} points")));
    }
    let lambdas = LambdaGrid::Uniform {
        min: lmin,
        max: lmax,
        steps,
    }
    .points();
    Ok(Resolved {
        model,
        scheme,
        n,
        rho,
        b_n,
        seed: pick(s.seed, kv.get("seed")?, 0),
        rep: pick(s.rep, kv.get("rep")?, 0),
        p,
        q,
        rate_p,
        rate_q,
        rate_r,
        kernel,
        lambdas,
    })
}

fn scheme_of(kind: SchemeKind, rho: f64) -> Scheme {
    match kind {
        SchemeKind::Regular => Scheme::Regular { rho },
        SchemeKind::Poisson => Scheme::Poisson { rho },
    }
}

fn simulate(r: &Resolved) -> Result<SamplePath, Failure> {
    let sim = PathSimulator::new(r.model.clone())?;
    let seed = SimSeed::new(r.seed, r.rep);
    Ok(match r.scheme {
        SchemeKind::Regular => sim.regular(r.n, r.rho, seed)?,
        SchemeKind::Poisson => sim.poisson(r.n, r.rho, seed)?,
    })
}

fn output(out: Option<&Path>, body: &[u8]) -> Result<(), Failure> {
    let io_fail = |path: &Path, e: io::Error| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    };
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
            }
            fs::write(path, body).map_err(|e| io_fail(path, e))
        }
        None => io::stdout()
            .write_all(body)
            .map_err(|e| io_fail(Path::new("<stdout>"), e)),
    }
}

fn cmd_simulate(kv: &KeyValues, a: &SimulateArgs) -> Result<(), Failure> {
    let r = resolve(kv, &a.sampling, &RateArgs::default(), &GridArgs::default(), None)?;
    let out = a.out.clone().or(kv.raw("out").map(PathBuf::from));
    kv.finish()?;
    let path = simulate(&r)?;
    let mut buf = Vec::new();
    path.write_csv(&mut buf).map_err(|e| Failure::numeric(e.to_string()))?;
    output(out.as_deref(), &buf)
}

fn cmd_estimate(kv: &KeyValues, a: &EstimateArgs) -> Result<(), Failure> {
    let input = a.input.clone().or(kv.raw("input").map(PathBuf::from));
    let out = a.out.clone().or(kv.raw("out").map(PathBuf::from));
    let stored = match &input {
        Some(p) => Some(read_path_csv(p)?),
        None => None,
    };
    let n_default = stored.as_ref().map(|(t, _)| t.len());
    let mut sampling = a.sampling.clone();
    if let Some(n) = n_default {
        sampling.n = Some(n);
    }
    let r = resolve(kv, &sampling, &a.rates, &a.grid, n_default)?;
    kv.finish()?;
    let path = match stored {
        Some((times, values)) => SamplePath {
            times,
            values,
            scheme: scheme_of(r.scheme, r.rho),
            seed: SimSeed::new(r.seed, r.rep),
        },
        None => simulate(&r)?,
    };
    let est = match r.scheme {
        SchemeKind::Regular => {
            let cfg = EstimatorConfig {
                n: path.len(),
                rho_n: r.rho,
                b_n: r.b_n,
                kernel: r.kernel,
                q: r.q,
                p: r.p,
                rate_p: r.rate_p,
                rate_q: r.rate_q,
                rate_r: r.rate_r,
                demean: false,
            };
            for w in cfg.validate()? {
                log::warn!("{w}");
            }
            regular_smoothed_periodogram(&path, &cfg, &r.lambdas)?
        }
        SchemeKind::Poisson => {
            let cfg = PoissonConfig {
                rho: r.rho,
                b_n: r.b_n,
                kernel: r.kernel,
                demean: false,
            };
            poisson_smoothed_estimator(&path, &cfg, &r.lambdas)?
        }
    };
    let mut body = format!(
        "# scheme={} n={} rho={:.16e} b_n={:.16e} kernel={}\nlambda,estimate,true_phi\n",
        r.scheme,
        path.len(),
        r.rho,
        r.b_n,
        r.kernel
    );
    for (l, v) in est.lambdas.iter().zip(&est.values) {
        body.push_str(&format!("{l:.16e},{v:.16e},{:.16e}\n", r.model.spectral_density(*l)));
    }
    output(out.as_deref(), body.as_bytes())
}

fn exponent_comment(p: f64, q: f64) -> String {
    if p.fract() == 0.0 && q.fract() == 0.0 {
        if let Ok(e) = rate_exponents_exact(p as i64, q as i64) {
            return format!(
                "# rate exponents: rho_n {} b_n -{} mse_regular -{} poisson b_n -{} mse_poisson -{}\n",
                e.rho, e.b_regular, e.mse_regular, e.b_poisson, e.mse_poisson
            );
        }
    }
    String::new()
}

fn cmd_asymptotics(kv: &KeyValues, a: &TheoryArgs) -> Result<(), Failure> {
    let r = resolve(kv, &a.sampling, &a.rates, &a.grid, None)?;
    let out = a.out.clone().or(kv.raw("out").map(PathBuf::from));
    kv.finish()?;
    let theory = TheoryEvaluator::new(r.model.clone());
    let mut body = format!(
        "# scheme={} n={} rho={:.16e} b_n={:.16e} kernel={}\n{}",
        r.scheme,
        r.n,
        r.rho,
        r.b_n,
        r.kernel,
        exponent_comment(r.p, r.q)
    );
    match r.scheme {
        SchemeKind::Regular => {
            let c = theory.regular_curve(&r.lambdas, r.n, r.rho, r.b_n, r.q, r.p, r.kernel)?;
            body.push_str("lambda,true_phi,bias_smoothing,bias_truncation,bias_aliasing,bias_theory,var_theory,mse_theory,near_origin\n");
            for i in 0..c.lambdas.len() {
                let b = c.breakdown[i];
                body.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                    c.lambdas[i],
                    r.model.spectral_density(c.lambdas[i]),
                    b.smoothing_term,
                    b.truncation_term,
                    b.aliasing_term,
                    b.total,
                    c.var_theory[i],
                    c.mse_theory[i],
                    c.near_origin[i]
                ));
            }
        }
        SchemeKind::Poisson => {
            let c = theory.poisson_curve(&r.lambdas, r.n, r.rho, r.b_n, r.q, r.kernel)?;
            body.push_str("lambda,true_phi,bias_theory,var_theory,mse_theory,near_origin\n");
            for i in 0..c.lambdas.len() {
                body.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                    c.lambdas[i],
                    r.model.spectral_density(c.lambdas[i]),
                    c.bias_theory[i],
                    c.var_theory[i],
                    c.mse_theory[i],
                    c.near_origin[i]
                ));
            }
        }
    }
    output(out.as_deref(), body.as_bytes())
}

fn cmd_compare(kv: &KeyValues, a: &TheoryArgs) -> Result<(), Failure> {
    let mut sampling = a.sampling.clone();
    sampling.scheme = Some(SchemeKind::Poisson);
    let r = resolve(kv, &sampling, &a.rates, &a.grid, None)?;
    let out = a.out.clone().or(kv.raw("out").map(PathBuf::from));
    kv.finish()?;
    let (rho_n, b_reg) = optimal_rates_regular(r.n, r.p, r.q, r.rate_p, r.rate_q)?;
    let theory = TheoryEvaluator::new(r.model.clone());
    let reg = theory.regular_curve(&r.lambdas, r.n, rho_n, b_reg, r.q, r.p, r.kernel)?;
    let poi = theory.poisson_curve(&r.lambdas, r.n, r.rho, r.b_n, r.q, r.kernel)?;
    let mut body = format!(
        "# n={} regular rho_n={:.16e} b_n={:.16e}; poisson rho={:.16e} b_n={:.16e}\n{}",
        r.n,
        rho_n,
        b_reg,
        r.rho,
        r.b_n,
        exponent_comment(r.p, r.q)
    );
    body.push_str("lambda,bias_regular,bias_poisson,var_regular,var_poisson,mse_regular,mse_poisson,variance_ratio,min_variance_ratio\n");
    for i in 0..r.lambdas.len() {
        let l = r.lambdas[i];
        let ratio = theory.variance_ratio(l, r.rho, r.rate_q, r.rate_r)?;
        let min_ratio = theory.min_variance_ratio(l, r.rate_q, r.rate_r);
        body.push_str(&format!(
            "{l:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{ratio:.16e},{min_ratio:.16e}\n",
            reg.bias_theory[i],
            poi.bias_theory[i],
            reg.var_theory[i],
            poi.var_theory[i],
            reg.mse_theory[i],
            poi.mse_theory[i],
        ));
    }
    output(out.as_deref(), body.as_bytes())
}

fn cmd_reproduce(kv: &KeyValues, a: &ReproduceArgs) -> Result<(), Failure> {
    let seed = a.seed.or(kv.get("seed")?).unwrap_or(0);
    let out = a
        .out
        .clone()
        .or(kv.raw("output_dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut config = figure_config(a.figure, a.scale, seed, &out);
    kv.apply_experiment(&mut config)?;
    config.seed = seed;
    config.output_dir = out;
    kv.finish()?;
    let result = run_figure(a.figure, &config)?;
    println!("{}", result.csv.display());
    for svg in &result.svgs {
        println!("{}", svg.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let kv = match &cli.config {
        Some(path) => KeyValues::load(path).map_err(|e| Failure {
            code: 2,
            message: e.to_string(),
        })?,
        None => KeyValues::default(),
    };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(&kv, a),
        Command::Estimate(a) => cmd_estimate(&kv, a),
        Command::Asymptotics(a) => cmd_asymptotics(&kv, a),
        Command::Compare(a) => cmd_compare(&kv, a),
        Command::Reproduce(a) => cmd_reproduce(&kv, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
