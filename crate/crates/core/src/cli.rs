//! Command-line front end. Exit codes: 0 pass, 1 usage or configuration error, 2 experiment failure.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use fracheat::error::{Error, Result};
use fracheat::fbm::{write_cache, write_csv, FbmGenerator, HurstIndex, SamplerKind, TimeGrid};
use fracheat::kernel::{lp_time_norm, norm_chain_report, StepFunction};
use fracheat::malliavin::Battery;
use fracheat::solver::{solve, ProblemSpec};
use fracheat::spectral::{sobolev_norm, write_field};
use fracheat::verify::{self, builtin, ExperimentId, ExperimentReport, VerifyConfig};

/// Environment variable supplying a default seed.
pub const SEED_ENV: &str = "FRACHEAT_SEED";

#[derive(Debug, Parser)]
#[command(name = "fracheat", version, about = "Fractional-noise calculus and the stochastic heat equation")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample fBm paths and write them as FBM1 and CSV.
    Generate(GenerateArgs),
    /// Norm chain of a step function read from CSV.
    Norms(NormsArgs),
    /// Skorohod integrals of a battery: pathwise exactness and zero mean.
    Skorohod(SkorohodArgs),
    /// Solve a problem file and write the fields per node.
    Solve(SolveArgs),
    /// Run verification experiments.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cholesky,
    Circulant,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long = "H", allow_negative_numbers = true)]
    pub hurst: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long = "m", default_value_t = 64)]
    pub cells: usize,
    /// Number of independent paths.
    #[arg(long = "K", default_value_t = 1)]
    pub paths: usize,
    #[arg(long, value_enum, default_value_t = Method::Circulant)]
    pub method: Method,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct NormsArgs {
    /// One coefficient per time cell: lines `value` or `cell,value`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "H", allow_negative_numbers = true)]
    pub hurst: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SkorohodArgs {
    /// Battery file; the shipped battery when omitted.
    #[arg(long)]
    pub battery: Option<PathBuf>,
    #[arg(long = "H", allow_negative_numbers = true)]
    pub hurst: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long = "m")]
    pub cells: Option<usize>,
    #[arg(long = "n-mc")]
    pub n_mc: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub pathwise: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long = "H", allow_negative_numbers = true)]
    pub hurst: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long = "m")]
    pub cells: Option<usize>,
    #[arg(long = "L")]
    pub half_width: Option<f64>,
    #[arg(long = "M")]
    pub points: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Exponent of the reported spatial norms.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Order of the reported Sobolev norm.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub n: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Experiment name or `all`.
    #[arg(long, default_value = "all")]
    pub experiment: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
    /// Also write every report series as `(x, y)` CSV next to the report.
    #[arg(long)]
    pub emit_plot_data: bool,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

/// Run metadata; the only output allowed to differ between identical runs.
#[derive(Debug, Serialize)]
struct Manifest {
    command: &'static str,
    version: &'static str,
    git: String,
    config: Value,
    seed: Option<u64>,
    started_unix: f64,
    wall_seconds: f64,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    extra: serde_json::Map<String, Value>,
}

struct Run {
    dir: PathBuf,
    manifest: Manifest,
    clock: Instant,
}

impl Run {
    fn start(command: &'static str, dir: &Path, config: Value, seed: Option<u64>) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            git: git_describe(),
            config,
            seed,
            started_unix,
            wall_seconds: 0.0,
            outputs: Vec::new(),
            extra: serde_json::Map::new(),
        };
        Ok(Self { dir: dir.to_path_buf(), manifest, clock: Instant::now() })
    }

    /// Creates `rel` under the run directory and records it.
    fn create(&mut self, rel: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.manifest.outputs.push(rel.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<()> {
        let mut w = self.create(rel)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.wall_seconds = self.clock.elapsed().as_secs_f64();
        let mut w = BufWriter::new(File::create(self.dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, &self.manifest)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

/// Seed from the flag, else from the environment.
fn default_seed(flag: Option<u64>) -> Result<Option<u64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Domain(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn to_value(v: &impl Serialize) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })
}

pub fn run(cli: Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Domain("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Norms(a) => norms(a),
        Command::Skorohod(a) => skorohod(a),
        Command::Solve(a) => solve_command(a),
        Command::Verify(a) => verify_command(a),
    }
}

fn generate(a: GenerateArgs) -> Result<Outcome> {
    let hurst = HurstIndex::new(a.hurst)?;
    let grid = TimeGrid::new(a.horizon, a.cells)?;
    let seed = default_seed(a.seed)?.unwrap_or(0);
    let kind = match a.method {
        Method::Cholesky => SamplerKind::Cholesky,
        Method::Circulant => SamplerKind::Circulant,
    };
    let gen = FbmGenerator::new(kind, grid, hurst)?;
    let ensemble = gen.ensemble(seed, 0, a.paths);
    let mut run = Run::start("generate", &a.out, to_value(&a)?, Some(seed))?;
    write_cache(run.create("paths.fbm")?, &ensemble)?;
    write_csv(run.create("paths.csv")?, &ensemble)?;
    if let Some(f) = gen.fallback() {
        run.manifest.extra.insert("fallback".into(), json!(f));
    }
    run.finish()?;
    Ok(Outcome::Pass)
}

/// Coefficients from lines `value` or `index,value`; a non-numeric first line is a header.
fn read_coefficients(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
    let bad = |line: usize, reason: String| Error::Format { what: "coefficient CSV", reason: format!("line {line}: {reason}") };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or(line).trim();
        match last.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(bad(i + 1, format!("{last:?}: {e}"))),
        }
    }
    if out.is_empty() {
        return Err(bad(0, "no coefficients".into()));
    }
    Ok(out)
}

fn norms(a: NormsArgs) -> Result<Outcome> {
    let hurst = HurstIndex::new(a.hurst)?;
    if !(a.p >= 1.0 && a.p.is_finite()) {
        return Err(Error::Domain(format!("--p must be finite and at least 1, got {}", a.p)));
    }
    let coefficients = read_coefficients(&a.input)?;
    let grid = TimeGrid::new(a.horizon, coefficients.len())?;
    let phi = StepFunction::new(grid, coefficients)?;
    let mut report = norm_chain_report(&phi, hurst)?;
    report.insert("L_p", lp_time_norm(&phi, a.p)?)?;
    let mut run = Run::start("norms", &a.out, to_value(&a)?, None)?;
    run.write_json("norms.json", &report)?;
    run.finish()?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(if report.all_checks_pass() { Outcome::Pass } else { Outcome::Fail })
}

fn skorohod(a: SkorohodArgs) -> Result<Outcome> {
    let mut battery = match &a.battery {
        Some(p) => Battery::load(p)?,
        None => Battery::from_toml_str(builtin::MALLIAVIN)?,
    };
    if let Some(h) = a.hurst {
        battery.hurst = h;
    }
    if let Some(t) = a.horizon {
        battery.horizon = t;
    }
    if let Some(m) = a.cells {
        battery.cells = m;
    }
    battery.hurst_index()?;
    battery.grid()?;
    let n_mc = a.n_mc.unwrap_or(battery.n_mc);
    let seed = default_seed(a.seed)?.unwrap_or(battery.seed);
    let report = verify::skorohod_report(&battery, n_mc, seed, a.pathwise)?;
    let mut run = Run::start("skorohod", &a.out, json!({ "args": to_value(&a)?, "battery": battery }), Some(seed))?;
    run.write_json("skorohod.json", &report)?;
    let mut w = run.create("skorohod.csv")?;
    writeln!(w, "label,lhs,rhs,ratio,se,pass")?;
    for r in &report.rows {
        writeln!(w, "{},{:?},{:?},{:?},{:?},{}", r.label, r.lhs, r.rhs, r.ratio, r.se, r.pass)?;
    }
    w.flush()?;
    drop(w);
    run.finish()?;
    eprintln!("{}", report.summary_line());
    Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
}

fn solve_command(a: SolveArgs) -> Result<Outcome> {
    let text = read_text(&a.spec)?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    let mut spec = ProblemSpec::from_toml_str(&text)?;
    if let Some(h) = a.hurst {
        HurstIndex::new(h)?;
        spec.time.hurst = h;
    }
    if let Some(t) = a.horizon {
        spec.time.horizon = t;
    }
    if let Some(m) = a.cells {
        spec = spec.with_cells(m);
    }
    if let Some(l) = a.half_width {
        spec.space.half_width = l;
    }
    if let Some(m) = a.points {
        spec.space.points = m;
    }
    if let Some(r) = a.replicates {
        spec.run.replicates = r;
    }
    if let Some(s) = default_seed(a.seed)? {
        spec.run.seed = s;
    }
    if !(a.p >= 1.0 && a.p.is_finite()) {
        return Err(Error::Domain(format!("--p must be finite and at least 1, got {}", a.p)));
    }
    let problem = spec.build()?;
    let gen = problem.generator()?;
    let mut run = Run::start("solve", &a.out, json!({ "args": to_value(&a)?, "problem": spec }), Some(problem.seed))?;
    run.manifest.extra.insert("spec_sha256".into(), json!(hash));
    run.manifest.extra.insert("fallback".into(), json!(gen.fallback()));

    let mut events = Vec::new();
    let mut rows = Vec::new();
    for r in 0..problem.replicates as u64 {
        let sol = solve(&problem, &problem.paths(&gen, r), r)?;
        for (j, u) in sol.u.iter().enumerate() {
            write_field(run.create(&format!("fields/r{r:04}/u{j:04}.fld"))?, u)?;
            rows.push((r, problem.time.node(j), u.lp_norm(a.p)?, sobolev_norm(u, a.n, a.p)?));
        }
        events.push(sol.events);
    }
    let mut w = run.create("norms.csv")?;
    writeln!(w, "replicate,t,lp,hpn")?;
    for (r, t, lp, hp) in rows {
        writeln!(w, "{r},{t:?},{lp:?},{hp:?}")?;
    }
    w.flush()?;
    drop(w);
    run.write_json("events.json", &events)?;
    run.finish()?;
    Ok(Outcome::Pass)
}

fn verify_command(a: VerifyArgs) -> Result<Outcome> {
    let ids: Vec<ExperimentId> = if a.experiment == "all" {
        ExperimentId::ALL.to_vec()
    } else {
        a.experiment.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?
    };
    let mut config = match &a.config {
        Some(p) => VerifyConfig::load(p)?,
        None => VerifyConfig::default(),
    };
    if let Some(s) = a.seed {
        config.seed = Some(s);
    } else if config.seed.is_none() {
        config.seed = default_seed(None)?;
    }
    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
    let name = a.out.file_name().and_then(|s| s.to_str()).unwrap_or("report.json").to_string();
    let stem = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("report").to_string();
    let mut run = Run::start("verify", &dir, to_value(&config)?, config.seed)?;

    let mut reports: Vec<ExperimentReport> = Vec::with_capacity(ids.len());
    let mut timing = serde_json::Map::new();
    for id in ids {
        let report = verify::run(id, &config)?;
        eprintln!("{}", report.summary_line());
        timing.insert(report.id.clone(), json!(report.wall_time));
        reports.push(report);
    }
    if reports.len() == 1 {
        run.write_json(&name, &reports[0])?;
    } else {
        run.write_json(&name, &reports)?;
    }
    if a.emit_plot_data {
        for report in &reports {
            for s in &report.series {
                let mut w = run.create(&format!("{stem}_{}_{}.csv", report.id, s.name))?;
                s.write_csv(&mut w)?;
            }
        }
    }
    run.manifest.extra.insert("experiment_seconds".into(), Value::Object(timing));
    run.finish()?;
    Ok(if reports.iter().all(|r| r.pass) { Outcome::Pass } else { Outcome::Fail })
}
