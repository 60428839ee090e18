//! `qhoc`: solve, converge, coarsen and ghost from the command line.
//!
//! Every flag has a key of the same name (with `-` or `_`) in the TOML file
//! given by `--config`; flags override the file.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, anyhow, bail};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use qhoc::atomistic::solve_atomistic;
use qhoc::harness::{
    ExperimentConfig, Model, PotentialChoice, WidthRule, run_coarsening_study, run_convergence_study, run_ghost_sweep,
    solve_model, strain_at, strain_error, write_records,
};
use qhoc::lattice::LoadKind;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "qhoc", version, about = "Blended atomistic-to-continuum coupling in one dimension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one model at one resolution and write its strain profile.
    Solve(Options),
    /// Error against the atomistic solution over a ladder of N.
    Converge(Options),
    /// Error against the fine interpolant over a ladder of element sizes.
    Coarsen(Options),
    /// Ghost force at u = 0 over a ladder of blend widths.
    Ghost(Options),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum PotentialArg {
    Harmonic,
    Lj,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LoadArg {
    Singular,
    Smooth,
}

/// A list given as `"a,b,c"`, a TOML array or a single TOML value.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
enum List {
    Int(i64),
    Ints(Vec<i64>),
    Text(String),
    Texts(Vec<String>),
}

impl List {
    fn items(&self) -> Vec<String> {
        match self {
            List::Int(v) => vec![v.to_string()],
            List::Ints(v) => v.iter().map(i64::to_string).collect(),
            List::Text(s) => s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect(),
            List::Texts(v) => v.clone(),
        }
    }

    fn parse<T: std::str::FromStr>(&self, what: &str) -> anyhow::Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let items = self.items();
        if items.is_empty() {
            bail!(qhoc::Error::Config(format!("{what} is empty")));
        }
        items
            .iter()
            .map(|s| {
                s.parse::<T>().map_err(|e| {
                    let e = e.to_string();
                    let e = e.trim_start_matches("invalid configuration: ");
                    anyhow!(qhoc::Error::Config(format!("{what}: '{s}': {e}")))
                })
            })
            .collect()
    }
}

fn list(s: &str) -> Result<List, String> {
    Ok(List::Text(s.to_string()))
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Options {
    /// TOML file with any of the options below.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Model(s): bqce, bqcf, bqhoce, bqhocf, cb, hoc; comma separated.
    #[arg(long, value_parser = list)]
    method: Option<List>,
    /// Half-count(s) N, comma separated; the chain has 2N sites.
    #[arg(long, value_parser = list)]
    n: Option<List>,
    #[arg(long, value_enum)]
    potential: Option<PotentialArg>,
    /// Interaction offsets, e.g. "1,2".
    #[arg(long, value_parser = list)]
    range: Option<List>,
    /// Load amplitude.
    #[arg(long)]
    fscale: Option<f64>,
    #[arg(long, value_enum)]
    load: Option<LoadArg>,
    /// Half-width of the atomistic region.
    #[arg(long)]
    la: Option<i64>,
    /// Width of each blending region.
    #[arg(long)]
    lb: Option<i64>,
    /// Continuum element sizes for `coarsen`.
    #[arg(long, value_parser = list)]
    #[serde(alias = "h-list")]
    h_list: Option<List>,
    /// Blend widths for `ghost`.
    #[arg(long, value_parser = list)]
    #[serde(alias = "lb-list")]
    lb_list: Option<List>,
    /// Newton tolerance, scaled by max(1, max |f|).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    #[serde(alias = "max-iter")]
    max_iter: Option<usize>,
    /// Output CSV file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Options {
    fn over(self, file: Options) -> Options {
        Options {
            config: self.config,
            method: self.method.or(file.method),
            n: self.n.or(file.n),
            potential: self.potential.or(file.potential),
            range: self.range.or(file.range),
            fscale: self.fscale.or(file.fscale),
            load: self.load.or(file.load),
            la: self.la.or(file.la),
            lb: self.lb.or(file.lb),
            h_list: self.h_list.or(file.h_list),
            lb_list: self.lb_list.or(file.lb_list),
            tol: self.tol.or(file.tol),
            max_iter: self.max_iter.or(file.max_iter),
            out: self.out.or(file.out),
        }
    }

    fn resolve(self) -> anyhow::Result<Options> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let file: Options = toml::from_str(&text)
            .map_err(|e| anyhow!(qhoc::Error::Config(format!("{}: {}", path.display(), e.message()))))?;
        Ok(self.over(file))
    }

    fn apply(&self, mut cfg: ExperimentConfig) -> anyhow::Result<ExperimentConfig> {
        if let Some(m) = &self.method {
            cfg.models = m.parse::<Model>("method")?;
        }
        if let Some(n) = &self.n {
            cfg.half_counts = n.parse("n")?;
        }
        if let Some(p) = self.potential {
            cfg.potential = match p {
                PotentialArg::Harmonic => PotentialChoice::Harmonic,
                PotentialArg::Lj => PotentialChoice::LennardJones,
            };
        }
        if let Some(r) = &self.range {
            cfg.range = r.parse("range")?;
        }
        if let Some(f) = self.fscale {
            cfg.f_scale = f;
        }
        if let Some(l) = self.load {
            cfg.load = match l {
                LoadArg::Singular => LoadKind::Singular,
                LoadArg::Smooth => LoadKind::Smooth,
            };
        }
        if self.la.is_some() || self.lb.is_some() {
            let n = *cfg.half_counts.first().ok_or_else(|| anyhow!(qhoc::Error::Config("n is empty".into())))?;
            let (la, lb) = cfg.widths.widths(n);
            cfg.widths = WidthRule::Fixed { la: self.la.unwrap_or(la), lb: self.lb.unwrap_or(lb) };
        }
        if let Some(h) = &self.h_list {
            cfg.h_list = h.parse("h-list")?;
        }
        if let Some(l) = &self.lb_list {
            cfg.lb_list = l.parse("lb-list")?;
        }
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct ProfileRow {
    x: f64,
    region: &'static str,
    strain_atomistic: f64,
    strain: f64,
    error: f64,
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn solve(cfg: &ExperimentConfig, out: Box<dyn Write>) -> anyhow::Result<()> {
    let [model] = cfg.models[..] else {
        bail!(qhoc::Error::Config(format!("solve takes one method, got {}", cfg.models.len())));
    };
    let [n] = cfg.half_counts[..] else {
        bail!(qhoc::Error::Config(format!("solve takes one n, got {}", cfg.half_counts.len())));
    };
    cfg.validate()?;
    let sys = cfg.system(n)?;
    let d = cfg.decomposition(&sys)?;
    let load = cfg.external_load();
    let newton = cfg.newton(&sys, &load)?;
    let (ua, _) = solve_atomistic(&sys, &load, &newton)?;
    let (um, rep) = solve_model(model, &sys, &d, &load, &cfg.coupling, &newton)?;
    let e = strain_error(&sys, &d, &ua, &um, cfg.region)?;
    info!("{model}: {} iterations, relative strain error {:.3e}", rep.iterations, e.relative);
    let rows: Vec<ProfileRow> = (-(n as i64)..n as i64)
        .map(|xi| {
            let x = xi as f64 + 0.5;
            let sa = ua.diff(xi, 1);
            let s = strain_at(&um, x);
            let region = match d.region(x) {
                qhoc::coupling::Region::Atomistic => "atomistic",
                qhoc::coupling::Region::Blend => "blend",
                qhoc::coupling::Region::Continuum => "continuum",
            };
            ProfileRow { x, region, strain_atomistic: sa, strain: s, error: (s - sa).abs() }
        })
        .collect();
    write_records(out, &rows)?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Task {
    Solve,
    Converge,
    Coarsen,
    Ghost,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (task, opts, base) = match cli.command {
        Command::Solve(o) => {
            (Task::Solve, o, ExperimentConfig { models: vec![], half_counts: vec![100], ..Default::default() })
        }
        Command::Converge(o) => (Task::Converge, o, ExperimentConfig::default()),
        Command::Coarsen(o) => (Task::Coarsen, o, ExperimentConfig::coarsening()),
        Command::Ghost(o) => (Task::Ghost, o, ExperimentConfig::ghost()),
    };
    let opts = opts.resolve()?;
    let cfg = opts.apply(base)?;
    if task == Task::Solve && cfg.models.is_empty() {
        bail!(qhoc::Error::Config("solve needs --method".into()));
    }
    let out = output(opts.out.as_deref())?;
    match task {
        Task::Solve => solve(&cfg, out)?,
        Task::Ghost => {
            let (records, fits) = run_ghost_sweep(&cfg)?;
            for (m, f) in fits {
                info!("{m}: dual-norm slope in lb {:.3}", f.slope);
            }
            write_records(out, &records)?;
        }
        Task::Converge | Task::Coarsen => {
            let res = if task == Task::Coarsen { run_coarsening_study(&cfg)? } else { run_convergence_study(&cfg)? };
            for (m, f) in &res.fits {
                info!("{m}: slope {:.3}", f.slope);
            }
            write_records(out, &res.records)?;
            if let Some((m, why)) = res.partial.first() {
                bail!(qhoc::Error::Numerical(format!("{m} stopped early: {why}")));
            }
        }
    }
    Ok(())
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(q) = cause.downcast_ref::<qhoc::Error>() {
            return match q {
                qhoc::Error::Config(_) | qhoc::Error::RangeViolation { .. } => "config",
                qhoc::Error::Io(_) => "io",
                qhoc::Error::NoConvergence { .. } | qhoc::Error::LineSearch { .. } => "convergence",
                _ => "numerical",
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return "io";
        }
    }
    "internal"
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: kind=usage message={first:?}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = error_kind(&e);
            eprintln!("error: kind={kind} message={:?}", format!("{e:#}"));
            ExitCode::from(if kind == "config" { 2 } else { 1 })
        }
    }
}
