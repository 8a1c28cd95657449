//! Command-line front end. [`run`] parses arguments, executes one command
//! and returns the process exit code: 0 on success, 1 on usage errors, 2 on
//! data errors and 3 on numerical failures.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use miseal::analysis::{
    deletion_experiment, freedman_diaconis_histogram, patch_counts, poisson_regression_identity, simulation_study,
    AnalysisError, GreedyMatchScorer, PatchGrid, StudySettings,
};
use miseal::field::{synthetic, FieldError, FieldModel, FieldOptions, GridGeometry, RegionOfInterest, ScalarGrid};
use miseal::inference::{
    label_dependence_report, run_miseal, ContingencyTable, DependenceReport, HatMean, InferenceError, Priors,
    ProposalSettings, Schedule,
};
use miseal::io::{self, Config, FieldGrid, IoError, PointsFile};
use miseal::point_process::{
    pcf_estimate, pcf_pool, sample_poisson, sample_strauss_hardcore, InteractionRadii, PcfIntensity,
    PointProcessError, StraussParams, Trend,
};
use miseal::rng::rng_from_seed;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PointProcessError> for CliError {
    fn from(e: PointProcessError) -> Self {
        match e {
            PointProcessError::InvalidRadii { .. } | PointProcessError::InvalidParameter(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::InvalidSettings(_) => CliError::Usage(e.to_string()),
            InferenceError::AuxSamplerFailure(_) | InferenceError::DegenerateMarginal => {
                CliError::Numerical(e.to_string())
            }
            InferenceError::PointProcess(p) => p.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::NonConvergence | AnalysisError::Separation | AnalysisError::ScorerFailure(_) => {
                CliError::Numerical(e.to_string())
            }
            AnalysisError::InvalidSettings(_) => CliError::Usage(e.to_string()),
            AnalysisError::Field(f) => f.into(),
            AnalysisError::PointProcess(p) => p.into(),
            AnalysisError::Inference(i) => i.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "miseal", version, about = "Separate necessary from random fingerprint minutiae")]
struct Cli {
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log informational messages to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit built-in orientation and ridge-frequency fields.
    Synth(SynthArgs),
    /// Compute the necessary minutiae intensity μ from field files.
    Fields(FieldsArgs),
    /// Simulate a point pattern.
    Simulate(SimulateArgs),
    /// Run the sampler on an observed pattern.
    Infer(InferArgs),
    /// Estimate (and pool) pair correlation functions.
    Pcf(PcfArgs),
    /// Identity-link Poisson regression of patch counts on m(A).
    Regress(RegressArgs),
    /// Simulation study with parameters drawn from the priors.
    Study(StudyArgs),
    /// Dependence between the labels of two points.
    Dependence(DependenceArgs),
    /// Compare deleting posterior-random minutiae with random deletion.
    DeleteExperiment(DeleteArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthKind {
    Constant,
    Radial,
    Tangential,
    Loop,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    /// Raster width (and height unless --height is given).
    #[arg(long)]
    size: usize,
    #[arg(long)]
    height: Option<usize>,
    /// Orientation of the constant field, radians.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Inter-ridge distance, pixels.
    #[arg(long, default_value_t = 9.0)]
    period: f64,
    /// Orientation and frequency output files.
    #[arg(long, num_args = 2, value_names = ["OF", "RF"])]
    out: Vec<PathBuf>,
    /// Also write the mask (elliptical for `loop`, full otherwise).
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FieldsArgs {
    #[arg(long)]
    of: PathBuf,
    #[arg(long)]
    rf: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Gaussian pre-smoothing, pixels.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum SimKind {
    Poisson,
    Strauss,
    Superposition,
}

#[derive(Args, Debug, Default, Clone)]
struct RadiiArgs {
    /// Hard-core distance.
    #[arg(long)]
    h: Option<f64>,
    /// Interaction distance.
    #[arg(long = "R")]
    r: Option<f64>,
}

#[derive(Args, Debug)]
struct DomainArgs {
    /// μ map (scalar grid).
    #[arg(long)]
    mu: Option<PathBuf>,
    /// Mask grid; without it the region is where μ is defined.
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(value_enum)]
    kind: SimKind,
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    radii: RadiiArgs,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Birth–death–move steps (default scales with the expected count).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
struct ChainArgs {
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    refit: Option<usize>,
    /// Average burn-in refits in the original or log scale.
    #[arg(long)]
    hat_mean: Option<String>,
    #[arg(long)]
    aux_steps: Option<usize>,
    #[arg(long)]
    p_w: Option<f64>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    pattern: PathBuf,
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    radii: RadiiArgs,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for trace.txt, labels.txt, samples.txt and summary.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PcfArgs {
    /// One or more pattern files; several are pooled.
    #[arg(long, required = true, num_args = 1..)]
    pattern: Vec<PathBuf>,
    #[command(flatten)]
    domain: DomainArgs,
    /// Normalise by the μ map instead of a constant intensity.
    #[arg(long)]
    inhomogeneous: bool,
    #[arg(long, default_value_t = 1.0)]
    r_step: f64,
    #[arg(long, default_value_t = 60.0)]
    r_max: f64,
    /// Kernel half-width; default 0.15/√(n/|𝔛|).
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RegressArgs {
    /// Two-column `m count` file.
    #[arg(long, conflicts_with_all = ["pattern", "of", "rf"])]
    data: Option<PathBuf>,
    #[arg(long, requires_all = ["of", "rf"])]
    pattern: Option<PathBuf>,
    #[arg(long)]
    of: Option<PathBuf>,
    #[arg(long)]
    rf: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 100)]
    patches: usize,
    /// Also write the per-patch `m count` data.
    #[arg(long)]
    data_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// μ maps; replicates cycle through them.
    #[arg(long, required = true, num_args = 1..)]
    mu: Vec<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[command(flatten)]
    radii: RadiiArgs,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DependenceArgs {
    /// SAMPLES v1 file of joint labels.
    #[arg(long, conflicts_with = "table", requires_all = ["i", "j"])]
    samples: Option<PathBuf>,
    #[arg(long)]
    i: Option<usize>,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long, default_value_t = 20)]
    batches: usize,
    /// Counts n00 n01 n10 n11 (first index: label of i).
    #[arg(long, num_args = 4, value_names = ["N00", "N01", "N10", "N11"])]
    table: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DeleteArgs {
    #[arg(long)]
    pattern1: PathBuf,
    #[arg(long)]
    samples1: PathBuf,
    #[arg(long)]
    pattern2: PathBuf,
    #[arg(long)]
    samples2: PathBuf,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    /// Matching radius of the built-in scorer.
    #[arg(long, default_value_t = 15.0)]
    radius: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Histogram of relative score differences.
    #[arg(long)]
    hist_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flag value, else config value, else `default`.
fn pick<T: FromStr>(flag: Option<T>, cfg: &Config, key: &str, default: T) -> CliResult<T> {
    Ok(flag.or(lookup(cfg, key)?).unwrap_or(default))
}

fn lookup<T: FromStr>(cfg: &Config, key: &str) -> CliResult<Option<T>> {
    cfg.parsed(key).map_err(|e| CliError::Usage(e.to_string()))
}

fn require_seed(flag: Option<u64>, cfg: &Config) -> CliResult<u64> {
    flag.or(lookup(cfg, "seed")?)
        .ok_or_else(|| CliError::Usage("--seed is required for stochastic commands".into()))
}

fn radii(args: &RadiiArgs, cfg: &Config) -> CliResult<InteractionRadii> {
    let h = pick(args.h, cfg, "h", 8.0)?;
    let r = pick(args.r, cfg, "R", 24.0)?;
    Ok(InteractionRadii::new(h, r)?)
}

fn priors(cfg: &Config, p_w: Option<f64>) -> CliResult<Priors> {
    let d = Priors::default();
    let lambda0 = pick(None, cfg, "lambda0", d.lambda0)?;
    let p = Priors {
        a0: pick(None, cfg, "a0", d.a0)?,
        b0: pick(None, cfg, "b0", d.a0 / lambda0)?,
        a1: pick(None, cfg, "a1", d.a1)?,
        b1: pick(None, cfg, "b1", d.b1)?,
        p1: pick(None, cfg, "p1", d.p1)?,
        q1: pick(None, cfg, "q1", d.q1)?,
        p_w: p_w.or(lookup(cfg, "p_w")?),
        lambda0,
    };
    p.validate()?;
    Ok(p)
}

fn proposal(args: &ChainArgs, cfg: &Config) -> CliResult<ProposalSettings> {
    let d = ProposalSettings::default();
    let p = ProposalSettings {
        sigma1: pick(None, cfg, "sigma1", d.sigma1)?,
        sigma2: pick(None, cfg, "sigma2", d.sigma2)?,
        rho12: pick(None, cfg, "rho12", d.rho12)?,
        p_theta: pick(None, cfg, "p_theta", d.p_theta)?,
        p_lambda: pick(None, cfg, "p_lambda", d.p_lambda)?,
        aux_chain_steps: pick(args.aux_steps, cfg, "aux_steps", d.aux_chain_steps)?,
    };
    p.validate()?;
    Ok(p)
}

fn schedule(args: &ChainArgs, cfg: &Config) -> CliResult<Schedule> {
    let d = Schedule::default();
    let hat_mean = match pick(args.hat_mean.clone(), cfg, "hat_mean", "original".to_string())?.as_str() {
        "original" => HatMean::Original,
        "log" => HatMean::Log,
        other => return Err(CliError::Usage(format!("hat_mean must be `original` or `log`, got {other:?}"))),
    };
    Ok(Schedule {
        burn_in: pick(args.burnin, cfg, "burnin", d.burn_in)?,
        iterations: pick(args.iters, cfg, "iters", d.iterations)?,
        thinning: pick(args.thin, cfg, "thin", d.thinning)?,
        refit_interval: pick(args.refit, cfg, "refit", d.refit_interval)?,
        hat_mean,
    })
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_grid(path: &Path) -> CliResult<FieldGrid> {
    io::read_grid(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_scalar(path: &Path) -> CliResult<ScalarGrid> {
    read_grid(path)?
        .into_scalar()
        .ok_or_else(|| CliError::Data(format!("{} is not a scalar grid", path.display())))
}

fn read_mask(path: &Path) -> CliResult<RegionOfInterest> {
    read_grid(path)?
        .into_mask()
        .ok_or_else(|| CliError::Data(format!("{} is not a mask grid", path.display())))
}

fn read_pattern(path: &Path) -> CliResult<PointsFile> {
    io::read_points(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_samples(path: &Path) -> CliResult<Vec<Vec<bool>>> {
    io::read_samples(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_grid(path: &Path, grid: &FieldGrid) -> CliResult<()> {
    let mut w = create(path)?;
    io::write_grid_auto(grid, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes `text` to `path`, or standard output when absent.
fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn points_text(file: &PointsFile) -> CliResult<String> {
    let mut buf = Vec::new();
    io::write_points(file, &mut buf)?;
    Ok(String::from_utf8(buf).expect("writer emits UTF-8"))
}

/// Region from the mask file, else the pixels where μ is defined.
fn region(mu: Option<&ScalarGrid>, mask: Option<&Path>) -> CliResult<RegionOfInterest> {
    match (mask, mu) {
        (Some(m), _) => {
            let roi = read_mask(m)?;
            if let Some(mu) = mu {
                if !mu.geometry().same_shape(roi.geometry()) {
                    return Err(CliError::Data("mask and μ map differ in shape".into()));
                }
            }
            Ok(roi)
        }
        (None, Some(mu)) => {
            let mask = (0..mu.geometry().len()).map(|i| !mu.is_excluded(i)).collect();
            Ok(RegionOfInterest::new(*mu.geometry(), mask)?)
        }
        (None, None) => Err(CliError::Usage("need --mu or --mask".into())),
    }
}

fn trend(domain: &DomainArgs) -> CliResult<Trend> {
    let path = domain
        .mu
        .as_deref()
        .ok_or_else(|| CliError::Usage("--mu is required".into()))?;
    let mu = read_scalar(path)?;
    let roi = region(Some(&mu), domain.mask.as_deref())?;
    Ok(Trend::new(mu, roi)?)
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    if a.out.len() != 2 {
        return Err(CliError::Usage("--out takes the orientation and frequency files".into()));
    }
    if a.size < 3 || a.height.is_some_and(|h| h < 3) {
        return Err(CliError::Usage("rasters need at least 3×3 pixels".into()));
    }
    if !(a.period > 0.0) {
        return Err(CliError::Usage("--period must be positive".into()));
    }
    let geom = GridGeometry::new(a.size, a.height.unwrap_or(a.size));
    let center = geom
        .center(0, 0)
        .add(&geom.center(geom.width - 1, geom.height - 1))
        .scale(0.5);
    let full = || RegionOfInterest::full(geom);
    let (of, rf, roi) = match a.kind {
        SynthKind::Constant => (
            synthetic::constant_orientation(geom, a.theta)?,
            synthetic::constant_frequency(geom, 1.0 / a.period)?,
            full()?,
        ),
        SynthKind::Radial => (
            synthetic::radial_orientation(geom, center)?,
            synthetic::constant_frequency(geom, 1.0 / a.period)?,
            full()?,
        ),
        SynthKind::Tangential => (
            synthetic::tangential_orientation(geom, center)?,
            synthetic::constant_frequency(geom, 1.0 / a.period)?,
            full()?,
        ),
        SynthKind::Loop => synthetic::loop_print(geom)?,
    };
    write_grid(&a.out[0], &FieldGrid::Orientation(of))?;
    write_grid(&a.out[1], &FieldGrid::Scalar(rf))?;
    if let Some(m) = &a.mask {
        write_grid(m, &FieldGrid::Mask(roi))?;
    }
    Ok(())
}

fn cmd_fields(a: &FieldsArgs, cfg: &Config) -> CliResult<()> {
    let of = read_grid(&a.of)?
        .into_orientation()
        .ok_or_else(|| CliError::Data(format!("{} is not an orientation grid", a.of.display())))?;
    let rf = read_scalar(&a.rf)?;
    let roi = match &a.mask {
        Some(m) => read_mask(m)?,
        None => RegionOfInterest::full(*of.geometry())?,
    };
    let sigma = pick(a.sigma, cfg, "sigma", FieldOptions::default().smoothing_sigma)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(CliError::Usage(format!("--sigma must be non-negative, got {sigma}")));
    }
    let model = FieldModel::new(&of, &rf, &roi, FieldOptions::default().with_sigma(sigma))?;
    let mu = model.necessary_intensity();
    log::info!("∫μ over the mask = {}", mu.integral(&roi));
    write_grid(&a.out, &FieldGrid::Scalar(mu))
}

fn cmd_simulate(a: &SimulateArgs, cfg: &Config) -> CliResult<()> {
    let seed = require_seed(a.seed, cfg)?;
    let mut rng = rng_from_seed(seed);
    let file = match a.kind {
        SimKind::Poisson => {
            let lambda = a
                .lambda
                .or(lookup(cfg, "lambda")?)
                .ok_or_else(|| CliError::Usage("--lambda is required".into()))?;
            let mu = a.domain.mu.as_deref().map(read_scalar).transpose()?;
            let roi = region(mu.as_ref(), a.domain.mask.as_deref())?;
            PointsFile {
                points: sample_poisson(&roi, lambda, &mut rng)?.into_points(),
                labels: None,
            }
        }
        SimKind::Strauss | SimKind::Superposition => {
            let trend = trend(&a.domain)?;
            let beta = pick(a.beta, cfg, "beta", 1.9)?;
            let gamma = pick(a.gamma, cfg, "gamma", 0.37)?;
            let params = StraussParams::new(beta, gamma, radii(&a.radii, cfg)?)?;
            let steps = a.steps.or(lookup(cfg, "steps")?);
            let eta = sample_strauss_hardcore(&trend, params, steps, &mut rng)?.into_points();
            if a.kind == SimKind::Strauss {
                PointsFile {
                    points: eta,
                    labels: None,
                }
            } else {
                let lambda = a
                    .lambda
                    .or(lookup(cfg, "lambda")?)
                    .ok_or_else(|| CliError::Usage("--lambda is required".into()))?;
                let xi = sample_poisson(trend.roi(), lambda, &mut rng)?.into_points();
                let labels = xi.iter().map(|_| Some(false)).chain(eta.iter().map(|_| Some(true))).collect();
                PointsFile {
                    points: xi.into_iter().chain(eta).collect(),
                    labels: Some(labels),
                }
            }
        }
    };
    emit(a.out.as_deref(), &points_text(&file)?)
}

fn cmd_infer(a: &InferArgs, cfg: &Config) -> CliResult<()> {
    let seed = require_seed(a.seed, cfg)?;
    let radii = radii(&a.radii, cfg)?;
    let priors = priors(cfg, a.chain.p_w)?;
    let proposal = proposal(&a.chain, cfg)?;
    let schedule = schedule(&a.chain, cfg)?;
    let trend = trend(&a.domain)?;
    let zeta = read_pattern(&a.pattern)?.points;
    let trace = run_miseal(&zeta, &trend, &radii, &priors, &proposal, &schedule, seed)?;
    std::fs::create_dir_all(&a.out)?;
    let mut tw = create(&a.out.join("trace.txt"))?;
    let mut lw = create(&a.out.join("labels.txt"))?;
    let mut sw = create(&a.out.join("samples.txt"))?;
    io::write_posterior(&trace, &zeta, &mut tw, &mut lw, &mut sw)?;
    tw.flush()?;
    lw.flush()?;
    sw.flush()?;
    let mut summary = Config::default();
    summary.set("points", zeta.len().to_string());
    summary.set("p_w", io::fmt_f64(trace.p_w));
    summary.set("beta_hat", io::fmt_f64(trace.theta_hat.0));
    summary.set("gamma_hat", io::fmt_f64(trace.theta_hat.1));
    summary.set("accept_lambda", io::fmt_f64(trace.acceptance.lambda.rate()));
    summary.set("accept_beta_gamma", io::fmt_f64(trace.acceptance.beta_gamma.rate()));
    summary.set("accept_flip", io::fmt_f64(trace.acceptance.flip.rate()));
    summary.set("forced_random", trace.forced_random.len().to_string());
    if let Some(m) = trace.posterior_mean() {
        summary.set("mean_lambda", io::fmt_f64(m.lambda));
        summary.set("mean_beta", io::fmt_f64(m.beta));
        summary.set("mean_gamma", io::fmt_f64(m.gamma));
    }
    let mut w = create(&a.out.join("summary.txt"))?;
    summary.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_pcf(a: &PcfArgs) -> CliResult<()> {
    if !(a.r_step > 0.0 && a.r_max >= a.r_step) {
        return Err(CliError::Usage("need 0 < --r-step ≤ --r-max".into()));
    }
    let mu = a.domain.mu.as_deref().map(read_scalar).transpose()?;
    if a.inhomogeneous && mu.is_none() {
        return Err(CliError::Usage("--inhomogeneous needs --mu".into()));
    }
    let roi = region(mu.as_ref(), a.domain.mask.as_deref())?;
    let steps = (a.r_max / a.r_step + 1e-9).floor() as usize;
    let r: Vec<f64> = (1..=steps).map(|k| k as f64 * a.r_step).collect();
    let mut curves = Vec::new();
    for p in &a.pattern {
        let pts = read_pattern(p)?.points;
        let intensity = match (&mu, a.inhomogeneous) {
            (Some(m), true) => PcfIntensity::Trend(m),
            _ => PcfIntensity::Homogeneous,
        };
        curves.push(pcf_estimate(&pts, &roi, intensity, &r, a.bandwidth)?);
    }
    let text = if curves.len() == 1 {
        io::format_pcf(&curves[0])
    } else {
        io::format_pooled_pcf(&pcf_pool(&curves, None)?)
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_regress(a: &RegressArgs, cfg: &Config) -> CliResult<()> {
    let data = match (&a.data, &a.pattern) {
        (Some(d), _) => io::read_regression_data(open(d)?)?,
        (None, Some(p)) => {
            let of = read_grid(a.of.as_deref().expect("clap enforces --of"))?
                .into_orientation()
                .ok_or_else(|| CliError::Data("--of is not an orientation grid".into()))?;
            let rf = read_scalar(a.rf.as_deref().expect("clap enforces --rf"))?;
            let roi = match &a.mask {
                Some(m) => read_mask(m)?,
                None => RegionOfInterest::full(*of.geometry())?,
            };
            let sigma = pick(a.sigma, cfg, "sigma", FieldOptions::default().smoothing_sigma)?;
            let model = FieldModel::new(&of, &rf, &roi, FieldOptions::default().with_sigma(sigma))?;
            let grid = PatchGrid::new(&roi, a.patches)?;
            let pts = read_pattern(p)?.points;
            let counts = patch_counts(&pts, &model, &grid);
            log::info!("{} patches retained, {} discarded", counts.records.len(), counts.excluded.len());
            counts.regression_data()
        }
        (None, None) => return Err(CliError::Usage("need --data or --pattern with --of and --rf".into())),
    };
    if let Some(path) = &a.data_out {
        let mut w = create(path)?;
        io::write_regression_data(&data, &mut w)?;
        w.flush()?;
    }
    let result = poisson_regression_identity(&data).map_err(|e| match e {
        AnalysisError::TooFewObservations | AnalysisError::ConstantCovariate => CliError::Data(e.to_string()),
        other => other.into(),
    })?;
    emit(a.out.as_deref(), &io::format_regression(&result))
}

fn cmd_study(a: &StudyArgs, cfg: &Config) -> CliResult<()> {
    let seed = require_seed(a.seed, cfg)?;
    let mask = a.mask.as_deref();
    let trends = a
        .mu
        .iter()
        .map(|p| {
            let mu = read_scalar(p)?;
            let roi = region(Some(&mu), mask)?;
            Ok(Trend::new(mu, roi)?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let settings = StudySettings {
        radii: radii(&a.radii, cfg)?,
        proposal: proposal(&a.chain, cfg)?,
        schedule: schedule(&a.chain, cfg)?,
        replicates: pick(a.replicates, cfg, "replicates", 20)?,
        credible_level: pick(a.level, cfg, "level", 0.9)?,
        simulation_steps: lookup(cfg, "steps")?,
    };
    let report = simulation_study(&trends, &priors(cfg, a.chain.p_w)?, &settings, seed)?;
    emit(a.out.as_deref(), &io::format_study(&report))
}

fn cmd_dependence(a: &DependenceArgs) -> CliResult<()> {
    let report: DependenceReport = match (&a.samples, &a.table) {
        (Some(path), _) => {
            let samples = read_samples(path)?;
            let (i, j) = (a.i.expect("clap enforces --i"), a.j.expect("clap enforces --j"));
            label_dependence_report(&samples, i, j, a.batches).map_err(|e| match e {
                InferenceError::IndexOutOfRange(_) => CliError::Usage(e.to_string()),
                other => other.into(),
            })?
        }
        (None, Some(t)) => DependenceReport::from_table(ContingencyTable {
            counts: [[t[0], t[1]], [t[2], t[3]]],
        })?,
        (None, None) => return Err(CliError::Usage("need --samples with --i/--j, or --table".into())),
    };
    emit(a.out.as_deref(), &io::format_dependence(&report))
}

fn cmd_delete(a: &DeleteArgs, cfg: &Config) -> CliResult<()> {
    let seed = require_seed(a.seed, cfg)?;
    if !(a.radius > 0.0) {
        return Err(CliError::Usage("--radius must be positive".into()));
    }
    let z1 = read_pattern(&a.pattern1)?.points;
    let z2 = read_pattern(&a.pattern2)?.points;
    let s1 = read_samples(&a.samples1)?;
    let s2 = read_samples(&a.samples2)?;
    let scorer = GreedyMatchScorer { radius: a.radius };
    let report = deletion_experiment(&z1, &z2, &s1, &s2, &scorer, a.replicates, seed).map_err(|e| match e {
        AnalysisError::InvalidSettings(m) => CliError::Data(m),
        other => other.into(),
    })?;
    if let Some(h) = &a.hist_out {
        let rel: Vec<f64> = report.records.iter().map(|r| r.relative_difference).collect();
        emit(Some(h), &io::format_histogram(&freedman_diaconis_histogram(&rel)))?;
    }
    emit(a.out.as_deref(), &io::format_deletion(&report))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(p) => Config::parse(open(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Fields(a) => cmd_fields(a, &cfg),
        Command::Simulate(a) => cmd_simulate(a, &cfg),
        Command::Infer(a) => cmd_infer(a, &cfg),
        Command::Pcf(a) => cmd_pcf(a),
        Command::Regress(a) => cmd_regress(a, &cfg),
        Command::Study(a) => cmd_study(a, &cfg),
        Command::Dependence(a) => cmd_dependence(a),
        Command::DeleteExperiment(a) => cmd_delete(a, &cfg),
    }
}

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
