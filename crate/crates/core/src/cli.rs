//! Command-line configuration and artifact writing.
//!
//! A run is configured by an optional flat `key = value` file followed by
//! command-line flags of the same names, which take precedence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::energy::{
    convergence_sweep, correlation_energy, CorrelationConfig, EnergyReport, Methods, Potential, Sweep, SCHEMA,
};
use crate::error::{Error, Result};
use crate::focksandbox::{ops::MODE_BUDGET, run_suite};
use crate::lattice::{fattened_shell, FermiGeometry, Momentum, DEFAULT_MODE_BUDGET};
use crate::paircount::{pair_table, PairTable, ShellIndex};
use crate::patches::{default_d_tilde, index_threshold, lift_to_shell, patch_count, Partition};

pub const DEFAULT_POTENTIAL: &str = "radial:0=0.5,1=0.5";
pub const DEFAULT_TARGETS: &str = "10000,30000,100000,300000";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Partition,
    Count,
    Energy,
    Sweep,
    Sandbox,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Partition => "partition",
            Command::Count => "count",
            Command::Energy => "energy",
            Command::Sweep => "sweep",
            Command::Sandbox => "sandbox",
        }
    }
}

/// Raw command-line arguments.
#[derive(Debug, Parser)]
#[command(name = "fermi-rpa", version, about = "Bosonized correlation energy of the mean-field Fermi gas")]
pub struct Args {
    pub command: Command,
    /// Flat key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "n")]
    pub kf: Option<f64>,
    /// Target particle number; the nearest filled ball is used.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long = "d-tilde")]
    pub d_tilde: Option<f64>,
    /// Potential spec or a file containing one.
    #[arg(long)]
    pub potential: Option<String>,
    #[arg(long)]
    pub mass: Option<f64>,
    /// trace, integral, symplectic, all, or a comma list.
    #[arg(long)]
    pub method: Option<String>,
    /// Override the number of patches M.
    #[arg(long)]
    pub patches: Option<usize>,
    /// Comma-separated target particle numbers for `sweep`.
    #[arg(long)]
    pub targets: Option<String>,
    /// Pairs per mirror patch in `sandbox`.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Shell mode budget.
    #[arg(long)]
    pub budget: Option<usize>,
}

/// Fully resolved configuration, echoed into every artifact.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub kf: Option<f64>,
    pub n: Option<u64>,
    pub epsilon: f64,
    pub delta: f64,
    pub d_tilde: f64,
    pub potential: String,
    pub mass: f64,
    pub method: String,
    pub patches: Option<usize>,
    pub targets: Vec<u64>,
    pub pairs: usize,
    pub out: PathBuf,
    pub threads: usize,
    pub seed: u64,
    pub budget: usize,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        RunConfig {
            command,
            kf: None,
            n: None,
            epsilon: 1.0 / 27.0,
            delta: 2.0 / 27.0,
            d_tilde: default_d_tilde(),
            potential: DEFAULT_POTENTIAL.into(),
            mass: 1.0,
            method: "all".into(),
            patches: None,
            targets: parse_targets(DEFAULT_TARGETS).expect("valid default"),
            pairs: 3,
            out: PathBuf::from("out"),
            threads: 1,
            seed: 0,
            budget: DEFAULT_MODE_BUDGET,
        }
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(args: &Args) -> Result<Self> {
        let mut cfg = RunConfig::defaults(args.command);
        if let Some(path) = &args.config {
            let text = fs::read_to_string(path)?;
            for (key, value) in parse_config_file(&text)? {
                cfg.set(&key, &value)?;
            }
        }
        if args.kf.is_some() {
            cfg.n = None;
        }
        if args.n.is_some() {
            cfg.kf = None;
        }
        macro_rules! flag {
            ($f:ident) => {
                if let Some(v) = &args.$f {
                    cfg.$f = v.clone().into();
                }
            };
        }
        flag!(kf);
        flag!(n);
        flag!(epsilon);
        flag!(delta);
        flag!(d_tilde);
        flag!(potential);
        flag!(mass);
        flag!(method);
        flag!(patches);
        flag!(pairs);
        flag!(out);
        flag!(threads);
        flag!(seed);
        flag!(budget);
        if let Some(t) = &args.targets {
            cfg.targets = parse_targets(t)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("invalid value for {key}: {v:?}")))
        }
        match key {
            "kf" => {
                self.kf = Some(num(key, value)?);
                self.n = None;
            }
            "n" => {
                self.n = Some(num(key, value)?);
                self.kf = None;
            }
            "epsilon" => self.epsilon = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "d_tilde" | "d-tilde" => self.d_tilde = num(key, value)?,
            "potential" => self.potential = value.to_string(),
            "mass" => self.mass = num(key, value)?,
            "method" => self.method = value.to_string(),
            "patches" => self.patches = Some(num(key, value)?),
            "targets" => self.targets = parse_targets(value)?,
            "pairs" => self.pairs = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "threads" => self.threads = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "budget" => self.budget = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0 / 3.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1/3), got {}", self.epsilon)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if self.delta >= 1.0 / 6.0 - self.epsilon / 2.0 {
            log::warn!("delta = {} is outside (0, 1/6 - epsilon/2)", self.delta);
        }
        if !(self.d_tilde > 0.0) {
            return Err(Error::Config(format!("d_tilde must be positive, got {}", self.d_tilde)));
        }
        if !(self.mass > 0.0) {
            return Err(Error::Config(format!("mass must be positive, got {}", self.mass)));
        }
        if let Some(kf) = self.kf {
            if !(kf > 0.0 && kf.is_finite()) {
                return Err(Error::Config(format!("kf must be positive, got {kf}")));
            }
        }
        if self.n == Some(0) {
            return Err(Error::Config("n must be positive".into()));
        }
        if matches!(self.patches, Some(m) if m < 2 || m % 2 == 1) {
            return Err(Error::Config(format!("patches must be even and at least 2, got {}", self.patches.unwrap_or(0))));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.pairs == 0 || 4 * self.pairs > MODE_BUDGET {
            return Err(Error::Config(format!("pairs must lie in 1..={}, got {}", MODE_BUDGET / 4, self.pairs)));
        }
        Methods::parse(&self.method)?;
        self.potential()?;
        if matches!(self.command, Command::Partition | Command::Count | Command::Energy) && self.kf.is_none() && self.n.is_none() {
            return Err(Error::Config("one of kf or n is required".into()));
        }
        Ok(())
    }

    /// Inline spec, or the contents of the file it names.
    pub fn potential(&self) -> Result<Potential> {
        let path = Path::new(&self.potential);
        let spec = if path.is_file() { fs::read_to_string(path)?.trim().to_string() } else { self.potential.clone() };
        Potential::parse(&spec, self.mass)
    }

    pub fn geometry(&self) -> Result<FermiGeometry> {
        match (self.kf, self.n) {
            (Some(kf), _) => FermiGeometry::from_kf(kf),
            (None, Some(n)) => FermiGeometry::for_target_n(n),
            _ => Err(Error::Config("one of kf or n is required".into())),
        }
    }

    pub fn correlation(&self) -> Result<CorrelationConfig> {
        Ok(CorrelationConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            d_tilde: self.d_tilde,
            patches: self.patches,
            methods: Methods::parse(&self.method)?,
            mode_budget: self.budget,
        })
    }
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_targets(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<u64>()
                .ok()
                .or_else(|| t.parse::<f64>().ok().filter(|x| *x >= 1.0 && x.fract() == 0.0).map(|x| x as u64))
                .ok_or_else(|| Error::Config(format!("invalid particle number {t:?}")))
        })
        .collect()
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Artifact envelope: schema, resolved config, timestamp and payload.
fn envelope(cfg: &RunConfig, payload: Value) -> Value {
    json!({
        "schema": SCHEMA,
        "config": cfg,
        "timestamp": timestamp(),
        "result": payload,
    })
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.17e}")).unwrap_or_default()
}

pub const PAIRS_HEADER: &str = "k1,k2,k3,alpha,plus,n_sq,u,v,v_sq_leading,rel_err";

pub fn pairs_csv(tables: &[PairTable]) -> String {
    let mut s = String::from(PAIRS_HEADER);
    s.push('\n');
    for t in tables {
        for e in &t.entries {
            let [a, b, c] = e.k.0;
            let _ = writeln!(
                s,
                "{a},{b},{c},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
                e.alpha, e.plus as u8, e.n_sq, e.u, e.v, e.v_sq_leading, e.rel_err
            );
        }
    }
    s
}

pub const SWEEP_HEADER: &str = "N,k_f,M,hf_kinetic,hf_direct,hf_exchange,hf_total,e_corr_trace,e_corr_integral,e_corr_symplectic,e_corr_per_hbar_trace,e_corr_per_hbar_integral,e_corr_per_hbar_symplectic,gmb_per_hbar,abs_error,rel_error,wall_seconds";

pub fn sweep_csv(sweep: &Sweep) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for row in &sweep.rows {
        let r = &row.report;
        let _ = writeln!(
            s,
            "{},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{},{},{},{:.17e},{:.17e},{:.17e},{:.3}",
            r.n,
            r.k_f,
            r.m,
            r.hf.kinetic,
            r.hf.direct,
            r.hf.exchange,
            r.hf.total,
            opt(r.e_corr.trace),
            opt(r.e_corr.integral),
            opt(r.e_corr.symplectic),
            opt(r.e_corr_per_hbar.trace),
            opt(r.e_corr_per_hbar.integral),
            opt(r.e_corr_per_hbar.symplectic),
            r.gmb_per_hbar,
            r.abs_error,
            r.rel_error,
            row.wall_seconds
        );
    }
    let _ = writeln!(s, "fitted_exponent,{}", opt(sweep.fitted_exponent));
    s
}

fn energy_summary(r: &EnergyReport) -> Value {
    json!({
        "N": r.n,
        "k_f": r.k_f,
        "M": r.m,
        "hf_total": r.hf.total,
        "e_corr": r.e_corr,
        "e_corr_per_hbar": r.e_corr_per_hbar,
        "gmb_per_hbar": r.gmb_per_hbar,
        "rel_error": r.rel_error,
    })
}

/// Execute a resolved configuration. Returns the stdout summary.
pub fn run(cfg: &RunConfig) -> Result<Value> {
    cfg.validate()?;
    let out = &cfg.out;
    let summary = match cfg.command {
        Command::Partition => {
            let geom = cfg.geometry()?;
            let potential = cfg.potential()?;
            let m = cfg.patches.unwrap_or_else(|| patch_count(geom.n, cfg.epsilon));
            let part = Partition::build(m, geom.n, potential.shell_radius(), cfg.d_tilde)?;
            let corridor = part.min_corridor_angle(8) * geom.kf();
            let file = out.join("partition.txt");
            write_atomic(&file, part.table().as_bytes())?;
            let payload = json!({
                "N": geom.n,
                "k_f": geom.kf(),
                "M": part.m,
                "R": part.r,
                "collars": part.collars.len(),
                "shave": part.shave,
                "max_diameter": part.max_diameter(),
                "min_area": part.patches.iter().map(|p| p.area).fold(f64::INFINITY, f64::min),
                "max_area": part.patches.iter().map(|p| p.area).fold(0.0, f64::max),
                "corridor_width": corridor,
            });
            write_json(&out.join("partition.json"), &envelope(cfg, payload.clone()))?;
            payload
        }
        Command::Count => {
            let geom = cfg.geometry()?;
            let potential = cfg.potential()?;
            let r = potential.shell_radius();
            let m = cfg.patches.unwrap_or_else(|| patch_count(geom.n, cfg.epsilon));
            let part = Partition::build(m, geom.n, r, cfg.d_tilde)?;
            let shell = fattened_shell(&geom.radius, r, cfg.budget)?;
            let lift = lift_to_shell(&part, &shell, &geom.radius);
            let index = ShellIndex::new(&lift);
            let threshold = index_threshold(geom.n, cfg.delta);
            let ks: Vec<Momentum> = potential.normal_support().into_iter().map(|(k, _)| k).collect();
            let tables = ks
                .iter()
                .map(|k| pair_table(&part, &lift, &index, k, geom.kf(), threshold).map_err(|e| Error::Numerical(format!("k = {k}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            write_atomic(&out.join("pairs.csv"), pairs_csv(&tables).as_bytes())?;
            let per_k: BTreeMap<String, Value> = tables
                .iter()
                .map(|t| {
                    let worst = t.entries.iter().map(|e| e.rel_err.abs()).fold(0.0, f64::max);
                    (t.k.to_string(), json!({ "I": t.entries.len() / 2, "max_rel_err": worst, "dropped": t.dropped }))
                })
                .collect();
            let payload = json!({ "N": geom.n, "k_f": geom.kf(), "M": m, "per_k": per_k });
            write_json(&out.join("count.json"), &envelope(cfg, payload.clone()))?;
            payload
        }
        Command::Energy => {
            let geom = cfg.geometry()?;
            let potential = cfg.potential()?;
            let report = correlation_energy(&geom, &potential, &cfg.correlation()?)?;
            write_json(&out.join("energy.json"), &envelope(cfg, serde_json::to_value(&report)?))?;
            energy_summary(&report)
        }
        Command::Sweep => {
            let potential = cfg.potential()?;
            let sweep = convergence_sweep(&cfg.targets, &potential, &cfg.correlation()?)?;
            write_atomic(&out.join("sweep.csv"), sweep_csv(&sweep).as_bytes())?;
            let rows: Vec<&EnergyReport> = sweep.rows.iter().map(|r| &r.report).collect();
            write_json(
                &out.join("sweep.json"),
                &envelope(cfg, json!({ "reports": rows, "fitted_exponent": sweep.fitted_exponent })),
            )?;
            json!({
                "rows": sweep.rows.iter().map(|r| energy_summary(&r.report)).collect::<Vec<_>>(),
                "fitted_exponent": sweep.fitted_exponent,
            })
        }
        Command::Sandbox => {
            let suite = run_suite(cfg.pairs, cfg.seed)?;
            write_json(&out.join("sandbox.json"), &envelope(cfg, serde_json::to_value(&suite)?))?;
            let failed: Vec<&str> = suite.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(Error::Numerical(format!("sandbox checks failed: {}", failed.join(", "))));
            }
            json!({ "passed": suite.passed, "checks": suite.checks.len() })
        }
    };
    Ok(json!({ "schema": SCHEMA, "command": cfg.command.name(), "out": out, "summary": summary }))
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Resource(_) => 3,
        _ => 1,
    }
}

/// Structured diagnostic printed on failure.
pub fn diagnostic(e: &Error) -> Value {
    let kind = match e {
        Error::Resource(_) => "resource",
        Error::Domain(_) => "domain",
        Error::Config(_) => "config",
        Error::Numerical(_) => "numerical",
        Error::Quadrature { .. } => "quadrature",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    };
    json!({ "schema": SCHEMA, "error": kind, "message": e.to_string() })
}
