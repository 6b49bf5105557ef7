//! Batch front-end: `densities`, `mc`, `oracle` and `sweep`.
//!
//! Settings resolve as flags > config file (`key = value` lines) > defaults.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::dynamics::{density_scan, DensityTrace, Method, PropagatorConfig};
use crate::error::{Error, Result};
use crate::operators::{CascadeModel, Frame, SystemParams};
use crate::oracle::{pair_probabilities, pair_probabilities_closed_form, JointDensityGrid, OracleConfig, PairProbabilities};
use crate::par::{self, Execution};
use crate::stats::{summarize, EnsembleSummary, HistogramSpec};
use crate::trajectory::{run_ensemble_with, Ensemble, EnsembleConfig, JumpSampling};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Completeness deficit above which the oracle warns.
const DEFICIT_WARNING: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "homsim", version, about = "Two-photon interference in bidirectionally coupled atom-cavity systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Equal-time joint detection densities P2(t), P11(t)
    Densities(RunArgs),
    /// Monte Carlo ensemble of photodetection records
    Mc(RunArgs),
    /// Deterministic pair probabilities and joint click densities
    Oracle(RunArgs),
    /// Monte Carlo and oracle over a list of couplings
    Sweep(RunArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::Densities(a) => ("densities", a),
            Command::Mc(a) => ("mc", a),
            Command::Oracle(a) => ("oracle", a),
            Command::Sweep(a) => ("sweep", a),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Rotating,
    Lab,
}

fn parse_value_enum<T: ValueEnum>(s: &str) -> Result<T> {
    T::from_str(s, true).map_err(Error::InvalidParams)
}

#[derive(clap::Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Coupling |g|/κ (both atoms)
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,
    /// Detuning Δ/κ
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Reporting interval δT for densities (κ⁻¹)
    #[arg(long, allow_negative_numbers = true)]
    pub delta_t: Option<f64>,
    /// Integration step (κ⁻¹)
    #[arg(long)]
    pub dt: Option<f64>,
    /// Time cutoff (κ⁻¹); adaptive when omitted
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub n_traj: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Histogram bin width (κ⁻¹)
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Hermitian cascade correction in the no-jump generator
    #[arg(long)]
    pub cascade: Option<OnOff>,
    #[arg(long)]
    pub frame: Option<FrameKind>,
    /// Cavity frequency ω_c/κ in the lab frame
    #[arg(long)]
    pub omega_c: Option<f64>,
    /// Jump sampling: first-order | norm-threshold
    #[arg(long)]
    pub sampling: Option<JumpSampling>,
    /// No-jump integrator: expm | rk4
    #[arg(long)]
    pub method: Option<Method>,
    /// Oracle quadrature step (κ⁻¹)
    #[arg(long)]
    pub oracle_step: Option<f64>,
    /// Joint density grid spacing (κ⁻¹)
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Joint density grid extent (κ⁻¹)
    #[arg(long)]
    pub grid_t_max: Option<f64>,
    /// Couplings for `sweep`, comma separated
    #[arg(long, value_delimiter = ',')]
    pub g_list: Option<Vec<f64>>,
    /// Worker threads; 0 uses all cores
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write densities.svg
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Flat `key = value` file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved settings, echoed into every output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub g_over_kappa: f64,
    pub delta_over_kappa: f64,
    pub delta_t: f64,
    pub dt: f64,
    pub t_max: Option<f64>,
    pub n_traj: usize,
    pub seed: u64,
    pub bin_width: f64,
    pub cascade_term: OnOff,
    pub frame: FrameKind,
    pub omega_c: f64,
    pub jump_sampling: JumpSampling,
    pub method: Method,
    pub oracle_step: Option<f64>,
    pub grid_step: f64,
    pub grid_t_max: f64,
    pub g_list: Vec<f64>,
    pub svg: bool,
    // Execution details; they never change results.
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            subcommand: "mc".into(),
            g_over_kappa: 0.25,
            delta_over_kappa: 0.5,
            delta_t: 0.1,
            dt: 0.1,
            t_max: None,
            n_traj: 10_000,
            seed: EnsembleConfig::default().seed,
            bin_width: 0.5,
            cascade_term: OnOff::On,
            frame: FrameKind::Rotating,
            omega_c: 1000.0,
            jump_sampling: JumpSampling::FirstOrder,
            method: Method::Expm,
            oracle_step: None,
            grid_step: 0.1,
            grid_t_max: 20.0,
            g_list: vec![0.1, 0.25, 2.0, 5.0],
            svg: false,
            threads: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment. Keys may use `-` or
/// `_`.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidParams(format!("config line {}: expected key = value, got '{raw}'", n + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

struct Layer {
    file: BTreeMap<String, String>,
}

impl Layer {
    fn take<T>(&mut self, key: &str, flag: Option<T>, default: T, parse: impl Fn(&str) -> Result<T>) -> Result<T> {
        let from_file = self.file.remove(key);
        if let Some(v) = flag {
            return Ok(v);
        }
        match from_file {
            Some(s) => parse(&s).map_err(|e| Error::InvalidParams(format!("config key '{key}': {e}"))),
            None => Ok(default),
        }
    }

    fn take_parsed<T: FromStr>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key, flag, default, |s| s.parse::<T>().map_err(|e| Error::InvalidParams(e.to_string())))
    }
}

fn parse_opt_f64(s: &str) -> Result<Option<f64>> {
    match s {
        "" | "auto" | "none" => Ok(None),
        _ => s.parse().map(Some).map_err(|e| Error::InvalidParams(format!("{e}"))),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|e| Error::InvalidParams(format!("'{x}': {e}"))))
        .collect()
}

impl RunConfig {
    pub fn resolve(subcommand: &str, args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::InvalidParams(format!("cannot read config {}: {e}", path.display())))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let mut l = Layer { file };
        let d = RunConfig::default();
        let cfg = RunConfig {
            subcommand: subcommand.to_string(),
            g_over_kappa: l.take_parsed("g", args.g, d.g_over_kappa)?,
            delta_over_kappa: l.take_parsed("delta", args.delta, d.delta_over_kappa)?,
            delta_t: l.take_parsed("delta_t", args.delta_t, d.delta_t)?,
            dt: l.take_parsed("dt", args.dt, d.dt)?,
            t_max: l.take("t_max", args.t_max.map(Some), d.t_max, parse_opt_f64)?,
            n_traj: l.take_parsed("n_traj", args.n_traj, d.n_traj)?,
            seed: l.take_parsed("seed", args.seed, d.seed)?,
            bin_width: l.take_parsed("bin_width", args.bin_width, d.bin_width)?,
            cascade_term: l.take("cascade", args.cascade, d.cascade_term, parse_value_enum)?,
            frame: l.take("frame", args.frame, d.frame, parse_value_enum)?,
            omega_c: l.take_parsed("omega_c", args.omega_c, d.omega_c)?,
            jump_sampling: l.take_parsed("sampling", args.sampling, d.jump_sampling)?,
            method: l.take_parsed("method", args.method, d.method)?,
            oracle_step: l.take("oracle_step", args.oracle_step.map(Some), d.oracle_step, parse_opt_f64)?,
            grid_step: l.take_parsed("grid_step", args.grid_step, d.grid_step)?,
            grid_t_max: l.take_parsed("grid_t_max", args.grid_t_max, d.grid_t_max)?,
            g_list: l.take("g_list", args.g_list.clone(), d.g_list, parse_list)?,
            svg: l.take("svg", args.svg.then_some(true), d.svg, |s| {
                s.parse::<bool>().map_err(|e| Error::InvalidParams(e.to_string()))
            })?,
            threads: l.take_parsed("threads", args.threads, d.threads)?,
            out_dir: l.take("out_dir", args.out_dir.clone(), d.out_dir, |s| Ok(PathBuf::from(s)))?,
        };
        if let Some(k) = l.file.keys().next() {
            return Err(Error::InvalidParams(format!("unknown config key '{k}'")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")))
            }
        };
        if !(self.g_over_kappa.is_finite() && self.g_over_kappa >= 0.0) {
            return Err(Error::InvalidParams(format!("g must be >= 0, got {}", self.g_over_kappa)));
        }
        if !self.delta_over_kappa.is_finite() {
            return Err(Error::InvalidParams("delta must be finite".into()));
        }
        positive("delta_t", self.delta_t)?;
        positive("dt", self.dt)?;
        positive("bin_width", self.bin_width)?;
        positive("grid_step", self.grid_step)?;
        positive("grid_t_max", self.grid_t_max)?;
        if let Some(t) = self.t_max {
            positive("t_max", t)?;
        }
        if let Some(h) = self.oracle_step {
            positive("oracle_step", h)?;
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParams("n_traj must be >= 1".into()));
        }
        if self.subcommand == "sweep" {
            if self.g_list.is_empty() {
                return Err(Error::InvalidParams("sweep needs a nonempty g_list".into()));
            }
            if let Some(g) = self.g_list.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
                return Err(Error::InvalidParams(format!("g_list entries must be >= 0, got {g}")));
            }
        }
        self.params().validate()
    }

    pub fn params(&self) -> SystemParams {
        let frame = match self.frame {
            FrameKind::Rotating => Frame::Rotating,
            FrameKind::Lab => Frame::Lab { omega_c: self.omega_c },
        };
        SystemParams::symmetric(self.g_over_kappa, self.delta_over_kappa)
            .with_cascade(self.cascade_term == OnOff::On)
            .with_frame(frame)
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            n_traj: self.n_traj,
            dt: self.dt,
            t_max: self.t_max,
            seed: self.seed,
            jump_sampling: self.jump_sampling,
            method: self.method,
        }
    }

    fn with_point(&self, g: f64, out_dir: PathBuf) -> RunConfig {
        RunConfig {
            g_over_kappa: g,
            out_dir,
            ..self.clone()
        }
    }

    /// Label distinguishing the two no-jump generators in every output.
    pub fn model_label(&self) -> &'static str {
        match self.cascade_term {
            OnOff::On => "cascaded",
            OnOff::Off => "uncascaded",
        }
    }

    /// `#` comment lines for CSV headers.
    pub fn header_comments(&self) -> Vec<String> {
        vec![
            format!("homsim {VERSION}"),
            format!("model {}", self.model_label()),
            format!("config {}", serde_json::to_string(self).expect("config serializes")),
        ]
    }

    fn echo(&self) -> serde_json::Value {
        json!({
            "version": VERSION,
            "model": self.model_label(),
            "config": self,
        })
    }
}

/// Serializable view of [`SystemParams`].
#[derive(Clone, Debug, Serialize)]
pub struct ParamsRecord {
    pub g_l: [f64; 2],
    pub g_r: [f64; 2],
    pub kappa: f64,
    pub delta: f64,
    pub frame: Frame,
    pub cascade: bool,
}

impl From<&SystemParams> for ParamsRecord {
    fn from(p: &SystemParams) -> Self {
        ParamsRecord {
            g_l: [p.g_l.re, p.g_l.im],
            g_r: [p.g_r.re, p.g_r.im],
            kappa: p.kappa,
            delta: p.delta,
            frame: p.frame,
            cascade: p.cascade,
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    Ok((path.clone(), BufWriter::new(File::create(&path)?)))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}

fn count_local_maxima(y: &[f64]) -> usize {
    y.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
}

pub fn cmd_densities(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out_dir)?;
    let pcfg = PropagatorConfig::default().with_dt(cfg.dt).with_method(cfg.method);
    let t_max = cfg.t_max.unwrap_or(cfg.grid_t_max);
    let trace = density_scan(&cfg.params(), &pcfg, t_max, cfg.delta_t)?;
    let mut written = Vec::new();

    let (path, mut w) = create(&cfg.out_dir, "densities.csv")?;
    let mut comments = cfg.header_comments();
    comments.push(format!("p2 and p11 are densities multiplied by delta_T = {}", cfg.delta_t));
    trace.write_csv(&mut w, true, &comments)?;
    w.flush()?;
    written.push(path);

    let (i2, i11) = trace.integrals();
    let mut meta = cfg.echo();
    meta["t_max"] = json!(t_max);
    meta["integral_p2"] = json!(i2);
    meta["integral_p11"] = json!(i11);
    meta["local_maxima_p2"] = json!(count_local_maxima(&trace.p2));
    meta["local_maxima_p11"] = json!(count_local_maxima(&trace.p11));
    written.push(write_json(&cfg.out_dir, "densities.json", &meta)?);

    if cfg.svg {
        let (path, mut w) = create(&cfg.out_dir, "densities.svg")?;
        write_density_svg(&mut w, &trace, cfg)?;
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Runs the ensemble and returns it with its summary.
pub fn run_mc(cfg: &RunConfig) -> Result<(Ensemble, EnsembleSummary)> {
    let ens = par::with_threads(cfg.threads, || run_ensemble_with(&cfg.params(), &cfg.ensemble_config(), Execution::Parallel))?;
    let spec = HistogramSpec {
        bin_width: cfg.bin_width,
        ..HistogramSpec::default()
    };
    let summary = summarize(&ens.results, &spec)?;
    Ok((ens, summary))
}

pub fn cmd_mc(cfg: &RunConfig) -> Result<(Vec<PathBuf>, EnsembleSummary)> {
    fs::create_dir_all(&cfg.out_dir)?;
    let (ens, summary) = run_mc(cfg)?;
    let comments = cfg.header_comments();
    let mut written = Vec::new();

    let (path, mut w) = create(&cfg.out_dir, "clicks.csv")?;
    ens.write_clicks_csv(&mut w, &comments)?;
    w.flush()?;
    written.push(path);

    let (path, mut w) = create(&cfg.out_dir, "histograms.csv")?;
    let mut hc = comments.clone();
    hc.push("T1 and T2 share one binning; dT classes pool aa+bb (same) and ab+ba (diff)".into());
    summary.write_histograms_csv(&mut w, &hc)?;
    w.flush()?;
    written.push(path);

    let mut s = cfg.echo();
    s["t_max_used"] = json!(ens.t_max);
    s["censored_count"] = json!(ens.censored_count());
    s["summary"] = serde_json::to_value(&summary)?;
    written.push(write_json(&cfg.out_dir, "summary.json", &s)?);

    let meta = json!({
        "version": VERSION,
        "model": cfg.model_label(),
        "params": ParamsRecord::from(&ens.params),
        "seed": ens.config.seed,
        "n_traj": ens.config.n_traj,
        "dt": ens.config.dt,
        "t_max": ens.t_max,
        "jump_sampling": ens.config.jump_sampling,
        "censored_count": ens.censored_count(),
    });
    written.push(write_json(&cfg.out_dir, "metadata.json", &meta)?);
    Ok((written, summary))
}

fn pair_json(p: &PairProbabilities) -> serde_json::Value {
    let mut v = serde_json::to_value(p).expect("pair probabilities serialize");
    v["p_same"] = json!(p.p_same());
    v["p_diff"] = json!(p.p_diff());
    v["same_fraction"] = json!(p.same_fraction());
    v["deficit"] = json!(p.deficit());
    v["completeness"] = json!(p.completeness());
    v
}

pub fn cmd_oracle(cfg: &RunConfig) -> Result<(Vec<PathBuf>, PairProbabilities)> {
    fs::create_dir_all(&cfg.out_dir)?;
    let model = CascadeModel::new(cfg.params())?;
    let ocfg = OracleConfig {
        t_max: cfg.t_max,
        step: cfg.oracle_step,
    };
    let (pairs, closed, grid) = par::with_threads(cfg.threads, || -> Result<_> {
        let pairs = pair_probabilities(&model, &ocfg)?;
        let closed = pair_probabilities_closed_form(&model)?;
        let n = (cfg.grid_t_max / cfg.grid_step).round().max(1.0) as usize;
        let grid = JointDensityGrid::compute(&model, cfg.grid_step, n, Execution::Parallel)?;
        Ok((pairs, closed, grid))
    })?;
    if pairs.deficit() > DEFICIT_WARNING {
        eprintln!(
            "{}",
            json!({
                "warning": "oracle domain truncated",
                "deficit": pairs.deficit(),
                "t_max": pairs.t_max,
                "s_max": pairs.s_max,
            })
        );
    }
    let mut written = Vec::new();
    let mut out = cfg.echo();
    out["quadrature"] = pair_json(&pairs);
    out["closed_form"] = pair_json(&closed);
    out["closed_form"]["t_max"] = json!("infinity");
    out["closed_form"]["s_max"] = json!("infinity");
    written.push(write_json(&cfg.out_dir, "pair_probabilities.json", &out)?);

    let (path, mut w) = create(&cfg.out_dir, "joint_density.csv")?;
    let mut comments = cfg.header_comments();
    comments.push("joint click densities in units of kappa^2; rows with t2 >= t1".into());
    grid.write_csv(&mut w, &comments)?;
    w.flush()?;
    written.push(path);
    Ok((written, pairs))
}

fn point_dir(root: &Path, g: f64) -> PathBuf {
    root.join(format!("g_{g}"))
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.g_list.is_empty() {
        return Err(Error::InvalidParams("sweep needs a nonempty g_list".into()));
    }
    fs::create_dir_all(&cfg.out_dir)?;
    let mut written = Vec::new();
    let mut rows = Vec::new();
    for &g in &cfg.g_list {
        let point = cfg.with_point(g, point_dir(&cfg.out_dir, g));
        let (files, summary) = cmd_mc(&point)?;
        written.extend(files);
        let (files, pairs) = cmd_oracle(&point)?;
        written.extend(files);
        rows.push((g, summary.f_same, pairs.same_fraction(), summary.binomial_stderr));
    }
    let (path, mut w) = create(&cfg.out_dir, "sweep.csv")?;
    for c in cfg.header_comments() {
        writeln!(w, "# {c}")?;
    }
    let mut csv_w = csv::Writer::from_writer(&mut w);
    csv_w.write_record(["g_over_kappa", "f_same_mc", "f_same_oracle", "stderr"])?;
    for (g, mc, or, se) in rows {
        csv_w.write_record(&[format!("{g}"), format!("{mc}"), format!("{or}"), format!("{se}")])?;
    }
    csv_w.flush()?;
    drop(csv_w);
    w.flush()?;
    written.push(path);
    Ok(written)
}

/// Line plot of the two density traces.
fn write_density_svg<W: Write>(w: &mut W, trace: &DensityTrace, cfg: &RunConfig) -> Result<()> {
    let (width, height, pad) = (640.0, 400.0, 50.0);
    let p2 = trace.p2_scaled();
    let p11 = trace.p11_scaled();
    let t_end = trace.times.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let y_top = p2.iter().chain(&p11).copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let x = |t: f64| pad + (width - 2.0 * pad) * t / t_end;
    let y = |v: f64| height - pad - (height - 2.0 * pad) * v / y_top;
    let polyline = |vals: &[f64]| {
        trace
            .times
            .iter()
            .zip(vals)
            .map(|(&t, &v)| format!("{:.2},{:.2}", x(t), y(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">"#)?;
    writeln!(w, "<!-- homsim {VERSION} config {} -->", serde_json::to_string(cfg)?)?;
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        w,
        r#"<path d="M{pad},{pad} V{} H{}" stroke="black" fill="none"/>"#,
        height - pad,
        width - pad
    )?;
    writeln!(w, r#"<polyline points="{}" stroke="crimson" fill="none"/>"#, polyline(&p2))?;
    writeln!(w, r#"<polyline points="{}" stroke="steelblue" fill="none"/>"#, polyline(&p11))?;
    writeln!(
        w,
        r#"<text x="{}" y="{}" font-size="12">P2 (red), P11 (blue), g/kappa = {}, t up to {t_end}</text>"#,
        pad,
        pad - 15.0,
        cfg.g_over_kappa
    )?;
    writeln!(w, "</svg>")?;
    Ok(())
}

/// Executes a parsed command line, returning the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let (name, args) = cli.command.parts();
    let cfg = RunConfig::resolve(name, args)?;
    match &cli.command {
        Command::Densities(_) => cmd_densities(&cfg),
        Command::Mc(_) => cmd_mc(&cfg).map(|(f, _)| f),
        Command::Oracle(_) => cmd_oracle(&cfg).map(|(f, _)| f),
        Command::Sweep(_) => cmd_sweep(&cfg),
    }
}

/// 0 success, 2 invalid configuration, 3 numerical failure, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_config_error() {
        2
    } else if err.is_numerical() {
        3
    } else {
        1
    }
}

pub fn error_json(kind: &str, message: &str, code: i32) -> String {
    json!({ "error": kind, "message": message, "exit_code": code }).to_string()
}
