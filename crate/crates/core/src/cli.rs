//! Command-line front end: configuration, grid export and self-checks.
//!
//! Configuration files are TOML. Times are given in units of `1/γ` and the
//! probe coupling in units of `γ`, so the physics depends on `gamma` only
//! through those scalings.
//!
//! Exit codes: 0 on success, 1 when a computation or a check fails, 2 when
//! the command line or the configuration is unusable. Failures print a JSON
//! record on stderr and leave no output files behind.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    damp, damp_diagonal, drive_and_decay, integrate_master, DecayParams, DriveParams,
};
use crate::error::Error;
use crate::fockspace::{displacement_margin, PhotonDistribution};
use crate::numeric::CompensatedSum;
use crate::probe::{InversionTrace, ProbeConfig, ProbeKernel};
use crate::quasiprob::{
    direct_grid, series_weight, GridAxes, GridMeta, PointFailure, QuasiprobGrid,
};
use crate::recon::{
    drive_for_target, snapshot_series, InitialState, Path, ReconPlan, Reconstructor, MAX_PREP_LOSS,
};

/// Largest truncation the validation suites run at.
const VALIDATE_DIM: usize = 32;

/// Closed range `lo..=hi` sampled every `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x: AxisSpec,
    pub y: AxisSpec,
}

impl GridSpec {
    pub fn axes(&self) -> crate::Result<GridAxes> {
        let axis = |a: &AxisSpec| GridAxes::uniform_axis(a.lo, a.hi, a.step);
        GridAxes::new(axis(&self.x)?, axis(&self.y)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn one() -> f64 {
    1.0
}

fn default_t_d() -> f64 {
    0.01
}

fn default_probe() -> ProbeConfig {
    ProbeConfig::new(1000.0, 256)
}

/// Run configuration as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub state: InitialState,
    /// Cavity decay rate.
    #[serde(default = "one")]
    pub gamma: f64,
    /// Drive duration in units of `1/γ`.
    #[serde(default = "default_t_d")]
    pub t_d: f64,
    /// Decay between drive and measurement in units of `1/γ`.
    #[serde(default)]
    pub t_meas: f64,
    #[serde(default)]
    pub s: f64,
    #[serde(default)]
    pub path: Path,
    pub dim: usize,
    pub grid: GridSpec,
    /// Probe settings; `lambda` in units of `γ`.
    #[serde(default = "default_probe")]
    pub probe: ProbeConfig,
    /// Overrides `probe.seed` when present.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub format: Format,
    /// Output directory, overridden by `--out`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Snapshot delays in units of `1/γ`.
    #[serde(default)]
    pub delays: Vec<f64>,
    /// Also write the probe traces of every grid point.
    #[serde(default)]
    pub save_traces: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Default configuration: the even cat of amplitude 2 reconstructed on
    /// `[−3.5, 3.5]²` after `γ t_meas = 0.1`.
    pub fn example() -> Self {
        let axis = AxisSpec {
            lo: -3.5,
            hi: 3.5,
            step: 0.25,
        };
        Self {
            state: InitialState::Cat {
                alpha: [2.0, 0.0],
                phi: 0.0,
            },
            gamma: 1.0,
            t_d: 0.01,
            t_meas: 0.1,
            s: 0.0,
            path: Path::Analytic,
            dim: 64,
            grid: GridSpec { x: axis, y: axis },
            probe: default_probe(),
            seed: None,
            format: Format::Csv,
            output: None,
            delays: vec![0.0, 0.1],
            save_traces: false,
        }
    }

    /// Plan in physical units, validated.
    pub fn plan(&self) -> crate::Result<ReconPlan> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(crate::error::invalid(
                "gamma",
                format!("must be positive and finite, got {}", self.gamma),
            ));
        }
        let mut probe = self.probe.clone();
        probe.lambda *= self.gamma;
        if let Some(seed) = self.seed {
            probe.seed = seed;
        }
        let plan = ReconPlan {
            state: self.state.clone(),
            gamma: self.gamma,
            t_d: self.t_d / self.gamma,
            t_meas: self.t_meas / self.gamma,
            axes: self.grid.axes()?,
            s: self.s,
            path: self.path,
            probe,
            dim: self.dim,
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cavity-wigner",
    version,
    about = "Reconstruct the initial Wigner function of a decaying cavity field"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Probe noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reconstruct one grid.
    Reconstruct(Common),
    /// Reconstruct one grid per drive delay.
    Snapshot {
        #[command(flatten)]
        common: Common,
        /// Comma-separated delays in units of 1/γ, replacing the config list.
        #[arg(long, value_delimiter = ',')]
        delays: Option<Vec<f64>>,
    },
    /// Run the invariant checks and report each with its measured value.
    Validate(Common),
}

/// Failure of a command, mapped to an exit code and a JSON record.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Compute(Error),
    Points(Vec<PointFailure>),
    Io(String),
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    fn record(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            CliError::Config(m) => json!({ "kind": "config", "message": m }),
            CliError::Compute(e) => json!({ "kind": "compute", "message": e.to_string() }),
            CliError::Io(m) => json!({ "kind": "io", "message": m }),
            CliError::ChecksFailed(n) => json!({ "kind": "validation", "failed_checks": n }),
            CliError::Points(f) => json!({
                "kind": "points",
                "failures": f.iter().map(|p| json!({
                    "index": p.index, "x": p.beta.re, "y": p.beta.im, "message": p.error.to_string(),
                })).collect::<Vec<_>>(),
            }),
        }
    }
}

/// Parameter errors are configuration errors; everything else surfaced
/// while computing is a compute error.
fn config_err(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text).map_err(CliError::Config)?
        }
        None => RunConfig::example(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.output
        .clone()
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set `output`".into()))
}

/// Grid as CSV: a `# key=value` header, a column line, then `x,y,value`
/// rows in row-major order with 17 significant digits.
pub fn grid_to_csv(grid: &QuasiprobGrid) -> String {
    let m = &grid.meta;
    let seed = m.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    let mut out = format!(
        "# s={} gamma={} t_d={} t_meas={} dim={} seed={}\nx,y,value\n",
        grid.s, m.gamma, m.t_d, m.t_meas, m.dim, seed
    );
    for (k, v) in grid.values.iter().enumerate() {
        let beta = grid.axes.point(k);
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", beta.re, beta.im, v);
    }
    out
}

/// Reads a grid written by [`grid_to_csv`].
pub fn grid_from_csv(text: &str) -> Result<QuasiprobGrid, String> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or("missing header line")?;
    let mut s = None;
    let mut meta = GridMeta {
        gamma: 0.0,
        t_d: 0.0,
        t_meas: 0.0,
        dim: 0,
        probe: false,
        seed: None,
    };
    for field in header.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("bad header field `{field}`"))?;
        let num = || value.parse::<f64>().map_err(|e| format!("{key}: {e}"));
        match key {
            "s" => s = Some(num()?),
            "gamma" => meta.gamma = num()?,
            "t_d" => meta.t_d = num()?,
            "t_meas" => meta.t_meas = num()?,
            "dim" => meta.dim = value.parse().map_err(|e| format!("dim: {e}"))?,
            "seed" if value == "none" => meta.seed = None,
            "seed" => {
                meta.seed = Some(value.parse().map_err(|e| format!("seed: {e}"))?);
                meta.probe = true;
            }
            _ => return Err(format!("unknown header key `{key}`")),
        }
    }
    let mut rows = Vec::new();
    for line in lines.filter(|l| *l != "x,y,value" && !l.is_empty()) {
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|e| format!("`{line}`: {e}")))
            .collect::<Result<_, _>>()?;
        if cols.len() != 3 {
            return Err(format!("expected 3 columns in `{line}`"));
        }
        rows.push((cols[0], cols[1], cols[2]));
    }
    let first_y = rows.first().ok_or("no data rows")?.1;
    let x: Vec<f64> = rows
        .iter()
        .take_while(|r| r.1 == first_y)
        .map(|r| r.0)
        .collect();
    let y: Vec<f64> = rows.iter().step_by(x.len()).map(|r| r.1).collect();
    let axes = GridAxes::new(x, y).map_err(|e| e.to_string())?;
    if axes.len() != rows.len() {
        return Err("rows do not form a rectangular grid".into());
    }
    let values = rows.iter().map(|r| r.2).collect();
    Ok(QuasiprobGrid {
        axes,
        values,
        s: s.ok_or("header lacks s")?,
        meta,
        failures: Vec::new(),
    })
}

#[derive(Serialize)]
struct GridRecord<'a> {
    s: f64,
    meta: &'a GridMeta,
    x: &'a [f64],
    y: &'a [f64],
    values: &'a [f64],
}

fn grid_to_json(grid: &QuasiprobGrid) -> String {
    let record = GridRecord {
        s: grid.s,
        meta: &grid.meta,
        x: &grid.axes.x,
        y: &grid.axes.y,
        values: &grid.values,
    };
    serde_json::to_string_pretty(&record).expect("grid serializes")
}

fn render_grid(grid: &QuasiprobGrid, format: Format) -> (String, &'static str) {
    match format {
        Format::Csv => (grid_to_csv(grid), "csv"),
        Format::Json => (grid_to_json(grid), "json"),
    }
}

fn traces_to_csv(traces: &[(usize, C64, InversionTrace)]) -> String {
    let mut out = String::from("index,x,y,tau,inversion\n");
    for (k, beta, t) in traces {
        for (tau, v) in t.taus.iter().zip(&t.values) {
            let _ = writeln!(
                out,
                "{k},{:.16e},{:.16e},{:.16e},{:.16e}",
                beta.re, beta.im, tau, v
            );
        }
    }
    out
}

/// Writes every file only after all of them have been produced.
fn write_files(dir: &FsPath, files: &[(String, String)]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn check_points(grid: &QuasiprobGrid) -> Result<(), CliError> {
    if grid.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Points(grid.failures.clone()))
    }
}

fn metadata(cfg: &RunConfig, plan: &ReconPlan, extra: serde_json::Value) -> String {
    let record = serde_json::json!({
        "config": cfg,
        "physical": {
            "gamma": plan.gamma,
            "t_d": plan.t_d,
            "t_meas": plan.t_meas,
            "lambda": plan.probe.lambda,
            "seed": plan.probe.seed,
        },
        "outputs": extra,
    });
    serde_json::to_string_pretty(&record).expect("metadata serializes")
}

fn cmd_reconstruct(common: &Common) -> Result<String, CliError> {
    let cfg = load_config(common)?;
    let plan = cfg.plan().map_err(config_err)?;
    let dir = output_dir(&cfg)?;
    let recon = Reconstructor::new(&plan).map_err(CliError::Compute)?;
    let grid = recon.grid(0);
    check_points(&grid)?;
    let (body, ext) = render_grid(&grid, cfg.format);
    let grid_name = format!("grid.{ext}");
    let mut files = vec![(grid_name.clone(), body)];
    let mut outputs = serde_json::json!({ "grid": grid_name });
    if cfg.save_traces && plan.path == Path::Probe {
        let traces = (0..plan.axes.len())
            .map(|k| {
                let beta = plan.axes.point(k);
                recon.point_trace(k as u64, beta).map(|t| (k, beta, t))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::Compute)?;
        files.push(("traces.csv".into(), traces_to_csv(&traces)));
        outputs["traces"] = "traces.csv".into();
    }
    files.push(("meta.json".into(), metadata(&cfg, &plan, outputs)));
    write_files(&dir, &files)?;
    Ok(format!(
        "wrote {} points to {} (min {:.6}, max {:.6})",
        grid.values.len(),
        dir.join(&grid_name).display(),
        grid.min(),
        grid.max()
    ))
}

fn cmd_snapshot(common: &Common, delays: Option<Vec<f64>>) -> Result<String, CliError> {
    let mut cfg = load_config(common)?;
    if let Some(d) = delays {
        cfg.delays = d;
    }
    if cfg.delays.is_empty() {
        return Err(CliError::Config("no snapshot delays given".into()));
    }
    let plan = cfg.plan().map_err(config_err)?;
    let dir = output_dir(&cfg)?;
    let physical: Vec<f64> = cfg.delays.iter().map(|d| d / cfg.gamma).collect();
    let shots = snapshot_series(&plan, &physical).map_err(|e| match e {
        Error::InvalidParameter { .. } => config_err(e),
        other => CliError::Compute(other),
    })?;
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for (j, (shot, delay)) in shots.iter().zip(&cfg.delays).enumerate() {
        check_points(&shot.grid)?;
        let (body, ext) = render_grid(&shot.grid, cfg.format);
        let name = format!("snapshot_{j:03}.{ext}");
        entries.push(serde_json::json!({ "delay": delay, "file": name, "min": shot.grid.min(), "max": shot.grid.max() }));
        files.push((name, body));
    }
    files.push((
        "manifest.json".into(),
        metadata(&cfg, &plan, serde_json::json!({ "snapshots": entries })),
    ));
    write_files(&dir, &files)?;
    Ok(format!(
        "wrote {} snapshots to {}",
        shots.len(),
        dir.display()
    ))
}

/// Outcome of one validation check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub note: Option<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.note.is_none() && self.measured <= self.tolerance
    }

    fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        match &self.note {
            Some(n) => format!("check {:<28} [{verdict}] {n}", self.name),
            None => format!(
                "check {:<28} [{verdict}] measured {:.3e} tolerance {:.1e}",
                self.name, self.measured, self.tolerance
            ),
        }
    }
}

fn check(name: &'static str, tolerance: f64, result: crate::Result<f64>) -> Check {
    match result {
        Ok(measured) => Check {
            name,
            measured,
            tolerance,
            note: None,
        },
        Err(e) => Check {
            name,
            measured: f64::NAN,
            tolerance,
            note: Some(e.to_string()),
        },
    }
}

/// Invariant suites at truncation `min(dim, 32)` for the configured state.
pub fn validation_checks(plan: &ReconPlan) -> Vec<Check> {
    let dim = plan.dim.min(VALIDATE_DIM);
    let gamma_t = plan.gamma_t();
    let mut checks = Vec::new();

    checks.push(check("telescoping identity", 1e-10, telescoping(dim, 0.25)));

    let rho0 = plan.state.density(dim);
    let prepared = match &rho0 {
        Ok(rho) => check(
            "state truncation",
            MAX_PREP_LOSS,
            Ok((1.0 - rho.trace()).max(0.0)),
        ),
        Err(e) => Check {
            name: "state truncation",
            measured: f64::NAN,
            tolerance: MAX_PREP_LOSS,
            note: Some(format!("truncation unsafe: {e}")),
        },
    };
    checks.push(prepared);

    let probe_cfg = ProbeConfig::new(plan.probe.lambda, 2048);
    checks.push(check(
        "probe orthogonality",
        1e-8,
        orthogonality(&probe_cfg),
    ));

    if let Ok(rho0) = rho0 {
        let mut small = plan.clone();
        small.dim = dim;
        small.axes = GridAxes::square(-1.0, 1.0, 1.0).expect("fixed axes");
        small.path = Path::Analytic;
        checks.push(check("time invariance", 1e-9, time_invariance(&small)));
        checks.push(check(
            "reconstruction vs direct",
            1e-9,
            versus_direct(&small, &rho0),
        ));
        checks.push(check(
            "damping vs integrator",
            1e-6,
            damping_oracle(&rho0, gamma_t.max(0.05)),
        ));
        checks.push(check(
            "drive vs integrator",
            1e-6,
            drive_oracle(&rho0, plan.gamma),
        ));
    }
    checks
}

fn telescoping(max_dim: usize, max_gt: f64) -> crate::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let d = rng.gen_range(1..=max_dim);
        let gt = rng.gen_range(0.0..=max_gt);
        let raw: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let p0 = PhotonDistribution::new(raw.iter().map(|x| x / total).collect())?;
        let pt = damp_diagonal(&p0, DecayParams::from_gamma_t(gt)?);
        let chi = series_weight(0.0, gt)?.value;
        let mut power = 1.0;
        let mut lhs = CompensatedSum::new();
        for p in pt.probs() {
            lhs.add(power * p);
            power *= chi;
        }
        let rhs: CompensatedSum = p0
            .probs()
            .iter()
            .enumerate()
            .map(|(n, p)| if n % 2 == 0 { *p } else { -p })
            .collect();
        worst = worst.max((lhs.value() - rhs.value()).abs());
    }
    Ok(worst)
}

fn orthogonality(cfg: &ProbeConfig) -> crate::Result<f64> {
    let kernel = ProbeKernel::new(cfg, 33)?;
    let taus = cfg.taus();
    let mut worst = 0.0_f64;
    for n in 0..=32 {
        let values = taus
            .iter()
            .map(|t| ((2 * n + 3) as f64 * cfg.lambda * t).cos())
            .collect();
        let trace = InversionTrace {
            taus: taus.clone(),
            values,
        };
        let p = kernel.invert(&trace, 32, f64::INFINITY)?;
        for (m, v) in p.probs().iter().enumerate() {
            worst = worst.max((v - if m == n { 1.0 } else { 0.0 }).abs());
        }
    }
    Ok(worst)
}

fn time_invariance(plan: &ReconPlan) -> crate::Result<f64> {
    let mut grids = Vec::new();
    for t in [0.05, 0.1, 0.2] {
        let mut p = plan.clone();
        p.t_meas = t / plan.gamma;
        let g = Reconstructor::new(&p)?.grid(0);
        if let Some(f) = g.failures.first() {
            return Err(f.error.clone());
        }
        grids.push(g);
    }
    Ok(grids[0]
        .max_abs_diff(&grids[1])
        .max(grids[0].max_abs_diff(&grids[2])))
}

fn versus_direct(plan: &ReconPlan, rho0: &crate::fockspace::DensityMatrix) -> crate::Result<f64> {
    let g = Reconstructor::new(plan)?.grid(0);
    if let Some(f) = g.failures.first() {
        return Err(f.error.clone());
    }
    Ok(g.max_abs_diff(&direct_grid(rho0, &plan.axes, plan.s)))
}

fn damping_oracle(rho0: &crate::fockspace::DensityMatrix, gamma_t: f64) -> crate::Result<f64> {
    let closed = damp(rho0, DecayParams::from_gamma_t(gamma_t)?);
    let steps = (gamma_t / 0.001).ceil().max(1.0) as usize;
    let oracle = integrate_master(rho0, C64::new(0.0, 0.0), 1.0, gamma_t, steps)?;
    closed.frobenius_distance(&oracle.state)
}

fn drive_oracle(rho0: &crate::fockspace::DensityMatrix, gamma: f64) -> crate::Result<f64> {
    let t_d = 0.05 / gamma;
    let target = C64::new(0.0, 0.5);
    let alpha = drive_for_target(target, gamma, t_d)?;
    let closed = drive_and_decay(rho0, DriveParams { alpha, t_d }, gamma)?;
    let dim = rho0.dim();
    let oracle = integrate_master(
        &rho0.embed(dim + displacement_margin(target))?,
        alpha,
        gamma,
        t_d,
        5000,
    )?;
    closed.frobenius_distance(&oracle.state.restrict(dim)?)
}

fn cmd_validate(common: &Common) -> Result<String, CliError> {
    let cfg = load_config(common)?;
    let plan = cfg.plan().map_err(config_err)?;
    let checks = validation_checks(&plan);
    let mut report = String::new();
    for c in &checks {
        let _ = writeln!(report, "{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    print!("{report}");
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(format!("all {} checks passed", checks.len()))
}

fn run_command(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Reconstruct(c) => cmd_reconstruct(c),
        Command::Snapshot { common, delays } => cmd_snapshot(common, delays.clone()),
        Command::Validate(c) => cmd_validate(c),
    }
}

fn threads(command: &Command) -> Option<usize> {
    match command {
        Command::Reconstruct(c) | Command::Validate(c) => c.threads,
        Command::Snapshot { common, .. } => common.threads,
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match threads(&cli.command) {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run_command(&cli.command)),
            Err(e) => Err(CliError::Io(e.to_string())),
        },
        None => run_command(&cli.command),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            let record = serde_json::json!({ "error": e.record(), "exit_code": e.exit_code() });
            eprintln!("{record}");
            e.exit_code()
        }
    }
}
