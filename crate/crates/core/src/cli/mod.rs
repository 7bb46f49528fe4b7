//! Command-line surface: distribution queries, single-point SOP evaluators,
//! Monte-Carlo runs, grid sweeps with replayable manifests, and figure
//! reproduction.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.

pub mod output;
pub mod sweep;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::ftr::{FtrDistribution, FtrParams, LinkBudget, Truncation};
use crate::monte_carlo::{mc_secrecy_counts, McConfig};
use crate::secrecy::{
    asop, conventional_sop, diversity_order, modified_sop, SecrecyConfig, SecrecyScenario,
    SopMethod,
};
pub use sweep::{fig1, fig2, LinkShape, Method, RunManifest, SweepRow, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable bounding the worker-thread count.
pub const THREADS_ENV: &str = "FTR_SECRECY_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid value for --{flag}: {reason}")]
    Flag { flag: String, reason: String },
    #[error(transparent)]
    Numerical(Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => CliError::Flag {
                flag: name.to_string(),
                reason,
            },
            Error::Domain(msg) => CliError::Usage(msg),
            other => CliError::Numerical(other),
        }
    }
}

/// Renames a flag-level error so it points at the eavesdropper's flag.
fn eve_flag(e: CliError) -> CliError {
    match e {
        CliError::Flag { flag, reason }
            if matches!(flag.as_str(), "m" | "k" | "delta" | "sigma2") =>
        {
            CliError::Flag {
                flag: format!("{flag}-e"),
                reason,
            }
        }
        other => other,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ftr-secrecy",
    version,
    about = "Secrecy outage probability over FTR fading channels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// PDF, CDF and CCDF of the instantaneous SNR.
    Dist(DistArgs),
    /// Modified secrecy outage probability (closed form).
    Sop(PointArgs),
    /// High-SNR asymptote of the modified SOP.
    Asop(PointArgs),
    /// Conventional SOP, Pr{γ_d <= λ-1+λγ_e}.
    Conventional(PointArgs),
    /// Monte-Carlo estimates of the modified and conventional SOP.
    Mc(McArgs),
    /// Evaluate methods over a grid of legitimate-link average SNRs.
    Sweep(SweepArgs),
    /// Secrecy diversity order from the SOP slope.
    Diversity(DiversityArgs),
    /// Regenerate one of the two reference figure data sets.
    Reproduce(ReproduceArgs),
    /// Re-run a manifest written by `sweep` or `reproduce`.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ShapeArgs {
    /// Nakagami shape of the specular fluctuation.
    #[arg(long, default_value_t = 3.5)]
    pub m: f64,
    /// Specular-to-diffuse power ratio K (linear).
    #[arg(long, default_value_t = 15.0)]
    pub k: f64,
    /// Specular-wave dissimilarity Δ in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
}

impl ShapeArgs {
    fn shape(&self) -> LinkShape {
        LinkShape {
            m: self.m,
            k: self.k,
            delta: self.delta,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    /// Physical diffuse power σ² of the legitimate link.
    #[arg(long, conflicts_with = "avg_snr_db")]
    pub sigma2: Option<f64>,
    /// Average SNR of the legitimate link in dB [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    pub avg_snr_db: Option<f64>,
    /// Transmit-power-to-noise ratio in dB; scales a physical σ².
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub pt_over_n0_db: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EveArgs {
    /// Eavesdropper's m [default: --m].
    #[arg(long)]
    pub m_e: Option<f64>,
    /// Eavesdropper's K [default: --k].
    #[arg(long)]
    pub k_e: Option<f64>,
    /// Eavesdropper's Δ [default: --delta].
    #[arg(long)]
    pub delta_e: Option<f64>,
    /// Average SNR of the eavesdropper link in dB.
    #[arg(
        long,
        default_value_t = 5.0,
        allow_negative_numbers = true,
        conflicts_with = "sigma2_e"
    )]
    pub gamma_e_db: f64,
    /// Physical diffuse power σ² of the eavesdropper link.
    #[arg(long)]
    pub sigma2_e: Option<f64>,
}

impl EveArgs {
    fn shape(&self, d: &ShapeArgs) -> LinkShape {
        LinkShape {
            m: self.m_e.unwrap_or(d.m),
            k: self.k_e.unwrap_or(d.k),
            delta: self.delta_e.unwrap_or(d.delta),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    /// Target secrecy rate R_s in bits per channel use.
    #[arg(long, default_value_t = 1.0)]
    pub rs: f64,
    /// Reliability threshold μ on the legitimate SNR (linear).
    #[arg(long, default_value_t = 2.0)]
    pub mu: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TruncArgs {
    /// Relative size of the last series terms at which summation stops.
    #[arg(long, default_value_t = Truncation::default().rel_tol)]
    pub rel_tol: f64,
    /// Hard cap on the number of series terms.
    #[arg(long, default_value_t = Truncation::default().max_terms)]
    pub max_terms: usize,
}

impl TruncArgs {
    fn truncation(&self) -> Result<Truncation, CliError> {
        Ok(Truncation::new(
            self.max_terms,
            self.rel_tol,
            Truncation::default().tail_run,
        )?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct McFlags {
    /// Monte-Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    /// Seed of the ChaCha stream family.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl McFlags {
    fn config(&self) -> Result<McConfig, CliError> {
        Ok(McConfig::with_samples(self.samples, self.seed)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DistArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[command(flatten)]
    pub power: PowerArgs,
    #[command(flatten)]
    pub trunc: TruncArgs,
    /// SNR values (linear), comma-separated or repeated.
    #[arg(long, required = true, value_delimiter = ',')]
    pub x: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[command(flatten)]
    pub power: PowerArgs,
    #[command(flatten)]
    pub eve: EveArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub trunc: TruncArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub point: PointArgs,
    #[command(flatten)]
    pub mc: McFlags,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[command(flatten)]
    pub eve: EveArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub trunc: TruncArgs,
    #[command(flatten)]
    pub mc: McFlags,
    /// Transmit-power-to-noise ratio in dB (used by the MC draws).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub pt_over_n0_db: f64,
    /// Explicit grid of legitimate-link average SNRs in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["from_db", "to_db", "step_db"])]
    pub grid_db: Option<Vec<f64>>,
    /// Grid start in dB.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub from_db: f64,
    /// Grid end in dB (inclusive).
    #[arg(long, default_value_t = 45.0, allow_negative_numbers = true)]
    pub to_db: f64,
    /// Grid step in dB.
    #[arg(long, default_value_t = 5.0)]
    pub step_db: f64,
    /// Methods to evaluate at every grid point.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "exact")]
    pub methods: Vec<Method>,
    /// CSV destination [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest destination [default: <out>.manifest.json when --out is set].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiversityArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[command(flatten)]
    pub eve: EveArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub trunc: TruncArgs,
    /// Lower legitimate-link average SNR in dB.
    #[arg(long, default_value_t = 35.0, allow_negative_numbers = true)]
    pub from_db: f64,
    /// Upper legitimate-link average SNR in dB.
    #[arg(long, default_value_t = 45.0, allow_negative_numbers = true)]
    pub to_db: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig1,
    Fig2,
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    #[command(flatten)]
    pub mc: McFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Linear grid `from, from+step, …` up to `to` inclusive (with a half-step
/// guard against rounding).
pub fn linear_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(from.is_finite() && to.is_finite() && step.is_finite() && step > 0.0) {
        return Err(CliError::Usage(format!(
            "bad grid from={from} to={to} step={step}"
        )));
    }
    if to < from {
        return Err(CliError::Usage(format!(
            "empty grid: --to-db {to} < --from-db {from}"
        )));
    }
    let n = ((to - from) / step + 0.5).floor() as usize;
    Ok((0..=n).map(|i| from + step * i as f64).collect())
}

fn link_from_power(shape: LinkShape, power: &PowerArgs) -> Result<FtrParams, CliError> {
    let budget = LinkBudget::from_db(power.pt_over_n0_db)?;
    match power.sigma2 {
        Some(sigma2) => {
            Ok(FtrParams::new(shape.m, shape.k, shape.delta, sigma2)?.in_snr_units(budget))
        }
        None => Ok(shape.at_avg_snr(power.avg_snr_db.unwrap_or(0.0))?),
    }
}

fn eve_link(shape: LinkShape, eve: &EveArgs, pt_over_n0_db: f64) -> Result<FtrParams, CliError> {
    let power = PowerArgs {
        sigma2: eve.sigma2_e,
        avg_snr_db: Some(eve.gamma_e_db),
        pt_over_n0_db,
    };
    link_from_power(shape, &power).map_err(eve_flag)
}

fn avg_snr_db(p: &FtrParams) -> f64 {
    10.0 * ((1.0 + p.k_ratio) * p.scale()).log10()
}

fn point_scenario(a: &PointArgs) -> Result<SecrecyScenario, CliError> {
    let d = link_from_power(a.shape.shape(), &a.power)?;
    let e = eve_link(a.eve.shape(&a.shape), &a.eve, a.power.pt_over_n0_db)?;
    Ok(SecrecyScenario::new(
        d,
        e,
        SecrecyConfig::new(a.target.rs, a.target.mu)?,
        a.trunc.truncation()?,
    )?)
}

const POINT_COLUMNS: [&str; 4] = ["gamma_bar_d_db", "gamma_bar_e_db", "rs", "mu"];

fn point_fields(s: &SecrecyScenario) -> Vec<String> {
    vec![
        output::real(avg_snr_db(&s.d_link)),
        output::real(avg_snr_db(&s.e_link)),
        output::real(s.cfg.rs),
        output::real(s.cfg.mu),
    ]
}

fn open_out<'a>(
    path: Option<&Path>,
    stdout: &'a mut (dyn Write + Send),
) -> Result<Box<dyn Write + 'a>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(stdout)),
    }
}

fn write_manifest(m: &RunManifest, path: &Path) -> Result<(), CliError> {
    let f = File::create(path)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, m).map_err(io::Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn manifest_path(out: Option<&PathBuf>, explicit: Option<&PathBuf>) -> Option<PathBuf> {
    explicit.cloned().or_else(|| {
        out.map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

fn run_manifest(
    m: &RunManifest,
    out: Option<&PathBuf>,
    manifest: Option<&PathBuf>,
    stdout: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    m.validate()?;
    if let Some(path) = manifest_path(out, manifest) {
        write_manifest(m, &path)?;
    }
    let mut w = open_out(out.map(PathBuf::as_path), stdout)?;
    m.execute(&mut w)
}

fn cmd_dist(a: &DistArgs, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let p = link_from_power(a.shape.shape(), &a.power)?;
    let dist = FtrDistribution::new(p, a.trunc.truncation()?)?;
    if let Some(x) = a.x.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(CliError::Flag {
            flag: "x".into(),
            reason: format!("must be finite and >= 0, got {x}"),
        });
    }
    let mut w = open_out(a.out.as_deref(), stdout)?;
    output::header(&mut w, &["x", "pdf", "cdf", "ccdf"])?;
    for &x in &a.x {
        let row = (|| -> crate::Result<_> { Ok([x, dist.pdf(x)?, dist.cdf(x)?, dist.ccdf(x)?]) })();
        match row {
            Ok(v) => output::record(&mut w, &v.map(output::real))?,
            Err(e) => {
                w.flush()?;
                return Err(e.into());
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_point(
    a: &PointArgs,
    name: &str,
    eval: fn(&SecrecyScenario) -> crate::Result<f64>,
    stdout: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let s = point_scenario(a)?;
    let v = eval(&s)?;
    let mut w = open_out(a.out.as_deref(), stdout)?;
    let mut cols = POINT_COLUMNS.to_vec();
    cols.push(name);
    output::header(&mut w, &cols)?;
    let mut fields = point_fields(&s);
    fields.push(output::real(v));
    output::record(&mut w, &fields)?;
    w.flush()?;
    Ok(())
}

fn cmd_mc(a: &McArgs, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let s = point_scenario(&a.point)?;
    let cfg = a.mc.config()?;
    let budget = LinkBudget::from_db(a.point.power.pt_over_n0_db)?;
    let counts = mc_secrecy_counts(&s, budget, budget, &cfg)?;
    let conventional = counts.conventional();
    let modified = counts.modified()?;
    let mut w = open_out(a.point.out.as_deref(), stdout)?;
    let mut cols = POINT_COLUMNS.to_vec();
    cols.extend([
        "sop_mc",
        "mc_std_error",
        "effective_samples",
        "conventional_mc",
        "conventional_std_error",
        "samples",
        "seed",
    ]);
    output::header(&mut w, &cols)?;
    let mut fields = point_fields(&s);
    fields.extend([
        output::real(modified.value),
        output::real(modified.std_error),
        modified.effective_samples.to_string(),
        output::real(conventional.value),
        output::real(conventional.std_error),
        cfg.samples.to_string(),
        cfg.seed.to_string(),
    ]);
    output::record(&mut w, &fields)?;
    w.flush()?;
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let grid = match &a.grid_db {
        Some(g) => g.clone(),
        None => linear_grid(a.from_db, a.to_db, a.step_db)?,
    };
    let gamma_bar_e_db = match a.eve.sigma2_e {
        Some(_) => avg_snr_db(&eve_link(a.eve.shape(&a.shape), &a.eve, a.pt_over_n0_db)?),
        None => a.eve.gamma_e_db,
    };
    let mut methods = a.methods.clone();
    methods.sort();
    methods.dedup();
    let mc = if methods.contains(&Method::Mc) {
        Some(a.mc.config()?)
    } else {
        None
    };
    let spec = SweepSpec {
        d_link: a.shape.shape(),
        e_link: a.eve.shape(&a.shape),
        gamma_bar_d_db: grid,
        gamma_bar_e_db,
        rs: a.target.rs,
        mu: a.target.mu,
        pt_over_n0_db: a.pt_over_n0_db,
        methods,
        mc,
        trunc: a.trunc.truncation()?,
    };
    spec.validate().map_err(|e| match e {
        CliError::Flag { flag, reason } if spec.e_link != spec.d_link => {
            eve_flag(CliError::Flag { flag, reason })
        }
        other => other,
    })?;
    let m = RunManifest::new("sweep", false, vec![spec]);
    run_manifest(&m, a.out.as_ref(), a.manifest.as_ref(), stdout)
}

fn cmd_diversity(a: &DiversityArgs, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    if a.to_db.partial_cmp(&a.from_db) != Some(std::cmp::Ordering::Greater) {
        return Err(CliError::Usage(format!(
            "--to-db ({}) must exceed --from-db ({})",
            a.to_db, a.from_db
        )));
    }
    let d = a.shape.shape().at_avg_snr(a.from_db)?;
    let e = eve_link(a.eve.shape(&a.shape), &a.eve, 0.0)?;
    let s = SecrecyScenario::new(
        d,
        e,
        SecrecyConfig::new(a.target.rs, a.target.mu)?,
        a.trunc.truncation()?,
    )?;
    let slope = diversity_order(&s, a.from_db, a.to_db, SopMethod::ClosedForm)?;
    let exact = diversity_order(&s, a.from_db, a.to_db, SopMethod::Asymptotic)?;
    let mut w = open_out(a.out.as_deref(), stdout)?;
    output::header(&mut w, &["method", "from_db", "to_db", "diversity_order"])?;
    for (name, v) in [("closed_form_slope", slope), ("asymptotic", exact)] {
        output::record(
            &mut w,
            &[
                name.to_string(),
                output::real(a.from_db),
                output::real(a.to_db),
                output::real(v),
            ],
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_reproduce(a: &ReproduceArgs, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let m = match a.figure {
        Figure::Fig1 => fig1(a.mc.config()?),
        Figure::Fig2 => fig2(),
    };
    run_manifest(&m, a.out.as_ref(), a.manifest.as_ref(), stdout)
}

fn cmd_replay(a: &ReplayArgs, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.manifest)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.manifest.display())))?;
    let m: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed manifest: {e}")))?;
    m.validate()?;
    let mut w = open_out(a.out.as_deref(), stdout)?;
    m.execute(&mut w)
}

pub fn dispatch(cli: &Cli, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match &cli.command {
        Command::Dist(a) => cmd_dist(a, stdout),
        Command::Sop(a) => cmd_point(a, "sop_exact", modified_sop, stdout),
        Command::Asop(a) => cmd_point(a, "sop_asymptotic", asop, stdout),
        Command::Conventional(a) => cmd_point(a, "sop_conventional", conventional_sop, stdout),
        Command::Mc(a) => cmd_mc(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Diversity(a) => cmd_diversity(a, stdout),
        Command::Reproduce(a) => cmd_reproduce(a, stdout),
        Command::Replay(a) => cmd_replay(a, stdout),
    }
}

fn thread_limit() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to `stderr`.
pub fn run_with_io<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = thread_limit().and_then(|limit| match limit {
        None => dispatch(&cli, stdout),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| dispatch(&cli, stdout)),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_io(args, &mut io::stdout(), &mut io::stderr())
}
