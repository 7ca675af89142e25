//! The `maxconc` command line.
//!
//! Every command is first turned into an [`ExperimentConfig`], so a run from
//! flags, from a TOML file or from a saved manifest goes through the same
//! path and writes the same files.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::config::{load_config, save_manifest, Command, ExperimentConfig, Manifest, SCHEMA_VERSION};
use crate::covariance::{materialize, Acf, CovarianceModel, ModelKind, ModelSpec, Permutation};
use crate::error::{Error, Result};
use crate::montecarlo::{self, ConcentrationConfig, DeltaSchedule, NormKind, PhaseConfig, ThresholdRule};
use crate::normal::{constants_for, up_gap};
use crate::packing::packing_report_model;
use crate::rates::{capstone_auto, g_beta, optimize_tau_logdecay, transform_rate, TransformKind, TransformSpec};
use crate::report::{heatmap, line_chart, write_json, Table, Value};

pub const OUT_DIR_ENV: &str = "MAXCONC_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "maxconc-out";

#[derive(Parser, Debug)]
#[command(name = "maxconc", version, about = "Concentration rates for maxima of Gaussian arrays")]
struct Cli {
    /// Run from a TOML config or a previous manifest.json instead of a subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for Monte Carlo (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: $MAXCONC_OUT_DIR, else ./maxconc-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// iid, powerlaw, logdecay or explicit.
    #[arg(long, default_value = "iid")]
    model: String,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    /// Covariance scale (at most 1).
    #[arg(long)]
    c: Option<f64>,
    /// identity, shuffle:SEED, or a comma-separated 0-based index list.
    #[arg(long)]
    permutation: Option<String>,
    /// Header-free CSV correlation matrix for --model explicit.
    #[arg(long)]
    matrix: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    reps: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Normalizing constants u_p, u_p*, sqrt(2 log p) and delta_opt.
    Constants {
        /// Comma-separated p values; `2^k` and `1e6` forms are accepted.
        #[arg(long)]
        p: String,
    },
    /// Packing numbers, alpha(p) and a greedy packing.
    Packing {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        p: String,
        #[arg(long)]
        tau: f64,
    },
    /// The capstone rate bound with the model's optimal tau, and d* for transforms.
    RateBound {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        p: String,
        /// Transforms tabulated as d_star columns, e.g. `exp,square,abs_power:0.5`.
        #[arg(long)]
        transforms: Option<String>,
        /// Guard constant for the log-decay optimum.
        #[arg(long)]
        c_tilde: Option<f64>,
    },
    /// Monte Carlo estimate of P(|max/norm - 1| > delta_p).
    Concentration {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        p: String,
        /// identity, exp, square, or KIND:LAMBDA for the power families.
        #[arg(long, default_value = "identity")]
        transform: String,
        /// c_over_logp:C, loglog_over_log:C or capstone_auto[:C].
        #[arg(long)]
        schedule: Option<String>,
        /// u_p, sqrt2logp, u_star or f_of_up.
        #[arg(long)]
        norm: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Exact support recovery frequencies over a (beta, r) grid.
    PhaseDiagram {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        p: String,
        #[arg(long)]
        beta: String,
        #[arg(long)]
        r: String,
        /// Read --r as multiples of g(beta).
        #[arg(long)]
        r_relative: bool,
        /// power:Q or bonferroni:FWER.
        #[arg(long)]
        threshold: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// KS distance of normalized iid maxima to the Gumbel law.
    GumbelCheck {
        #[arg(long)]
        p: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// P(|M_p/u_p - 1| > c/log p) over grids of p and c.
    ConjectureProbe {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        p: String,
        /// Constants c in delta_p = c / log p.
        #[arg(long, default_value = "0.5,1,2")]
        c_grid: String,
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Runtime options that do not affect results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub svg: bool,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let opts = RunOptions { threads: cli.threads, out: cli.out.clone(), svg: cli.svg };
    let cfg = match (cli.config, cli.command) {
        (Some(_), Some(_)) => Err(Error::Config("give either --config or a subcommand, not both".into())),
        (Some(path), None) => load_config(&path),
        (None, Some(sub)) => config_from(sub),
        (None, None) => Err(Error::Config("no subcommand given; see --help".into())),
    };
    match cfg.and_then(|c| execute(&c, &opts)) {
        Ok(out) => {
            print!("{}", out.table.to_csv());
            eprintln!("wrote {}", out.dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ModelInvalid { .. } => 3,
        Error::Config(_) | Error::Domain(_) | Error::Inadmissible(_) => 2,
        Error::Io(_) => 1,
    }
}

fn named<T: DeserializeOwned>(s: &str, what: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
        .map_err(|_| Error::Config(format!("unknown {what} `{s}`")))
}

fn number(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Config(format!("{what}: cannot parse `{s}` as a number")))
}

/// `1024`, `2^10`, `1e6`.
pub fn parse_grid(s: &str) -> Result<Vec<u64>> {
    let bad = |t: &str| Error::Config(format!("p grid: cannot parse `{t}` as an integer"));
    let v = s
        .split(',')
        .map(|t| {
            let t = t.trim();
            if let Some((b, e)) = t.split_once('^') {
                let b: u64 = b.trim().parse().map_err(|_| bad(t))?;
                let e: u32 = e.trim().parse().map_err(|_| bad(t))?;
                return b.checked_pow(e).ok_or_else(|| bad(t));
            }
            if let Ok(v) = t.parse::<u64>() {
                return Ok(v);
            }
            let f: f64 = t.parse().map_err(|_| bad(t))?;
            if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 {
                Ok(f as u64)
            } else {
                Err(bad(t))
            }
        })
        .collect::<Result<Vec<u64>>>()?;
    if v.is_empty() {
        return Err(Error::Config("p grid is empty".into()));
    }
    Ok(v)
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| number(t, what)).collect()
}

fn parse_transform(s: &str) -> Result<TransformSpec> {
    let t = match s.split_once(':') {
        Some((k, l)) => TransformSpec { kind: named::<TransformKind>(k, "transform")?, lambda: Some(number(l, "lambda")?) },
        None => TransformSpec { kind: named(s, "transform")?, lambda: None },
    };
    t.validate()?;
    Ok(t)
}

fn parse_schedule(s: &str) -> Result<DeltaSchedule> {
    let (k, c) = match s.split_once(':') {
        Some((k, c)) => (k.trim(), Some(number(c, "schedule constant")?)),
        None => (s.trim(), None),
    };
    let need = || c.ok_or_else(|| Error::Config(format!("schedule `{k}` needs a constant, e.g. `{k}:1`")));
    Ok(match k {
        "c_over_logp" => DeltaSchedule::COverLogp { c: need()? },
        "loglog_over_log" => DeltaSchedule::LoglogOverLog { c: need()? },
        "capstone_auto" => DeltaSchedule::CapstoneAuto { c: c.unwrap_or(1.0) },
        _ => return Err(Error::Config(format!("unknown delta schedule `{s}`"))),
    })
}

fn parse_threshold(s: &str) -> Result<ThresholdRule> {
    let (k, v) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("threshold `{s}` should be power:Q or bonferroni:FWER")))?;
    let v = number(v, "threshold parameter")?;
    Ok(match k.trim() {
        "power" => ThresholdRule::Power { q: v },
        "bonferroni" => ThresholdRule::Bonferroni { fwer: v },
        _ => return Err(Error::Config(format!("unknown threshold rule `{k}`"))),
    })
}

fn parse_permutation(s: &str) -> Result<Permutation> {
    let s = s.trim();
    if s == "identity" {
        return Ok(Permutation::Identity);
    }
    if let Some(seed) = s.strip_prefix("shuffle:") {
        let seed = seed.trim().parse().map_err(|_| Error::Config(format!("bad shuffle seed `{seed}`")))?;
        return Ok(Permutation::Shuffle { seed });
    }
    let idx = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad permutation index `{t}`"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Permutation::Indices(idx.into()))
}

fn model_spec(m: &ModelArgs) -> Result<ModelSpec> {
    Ok(ModelSpec {
        kind: named::<ModelKind>(&m.model, "model")?,
        gamma: m.gamma,
        nu: m.nu,
        c: m.c,
        permutation: m.permutation.as_deref().map(parse_permutation).transpose()?.unwrap_or(Permutation::Identity),
        matrix: m.matrix.clone(),
    })
}

fn config_from(sub: Sub) -> Result<ExperimentConfig> {
    let cfg = match sub {
        Sub::Constants { p } => ExperimentConfig::new(Command::Constants, parse_grid(&p)?),
        Sub::Packing { model, p, tau } => {
            let mut c = ExperimentConfig::new(Command::Packing, parse_grid(&p)?);
            c.model = model_spec(&model)?;
            c.tau = Some(tau);
            c
        }
        Sub::RateBound { model, p, transforms, c_tilde } => {
            let mut c = ExperimentConfig::new(Command::RateBound, parse_grid(&p)?);
            c.model = model_spec(&model)?;
            c.c_tilde = c_tilde;
            if let Some(t) = transforms {
                c.transforms = t.split(',').map(parse_transform).collect::<Result<_>>()?;
            }
            c
        }
        Sub::Concentration { model, p, transform, schedule, norm, run } => {
            let mut c = ExperimentConfig::new(Command::Concentration, parse_grid(&p)?);
            c.model = model_spec(&model)?;
            c.transform = parse_transform(&transform)?;
            c.delta_schedule = schedule.as_deref().map(parse_schedule).transpose()?;
            c.norm_kind = norm.as_deref().map(|n| named(n, "norm kind")).transpose()?;
            c.seed = run.seed;
            c.reps = run.reps;
            c
        }
        Sub::PhaseDiagram { model, p, beta, r, r_relative, threshold, run } => {
            let mut c = ExperimentConfig::new(Command::PhaseDiagram, parse_grid(&p)?);
            c.model = model_spec(&model)?;
            c.beta_grid = Some(parse_list(&beta, "beta grid")?);
            c.r_grid = Some(parse_list(&r, "r grid")?);
            c.r_relative = r_relative;
            c.threshold = threshold.as_deref().map(parse_threshold).transpose()?;
            c.seed = run.seed;
            c.reps = run.reps;
            c
        }
        Sub::GumbelCheck { p, run } => {
            let mut c = ExperimentConfig::new(Command::GumbelCheck, parse_grid(&p)?);
            c.seed = run.seed;
            c.reps = run.reps;
            c
        }
        Sub::ConjectureProbe { model, p, c_grid: cg, run } => {
            let mut c = ExperimentConfig::new(Command::ConjectureProbe, parse_grid(&p)?);
            c.model = model_spec(&model)?;
            c.c_grid = Some(parse_list(&cg, "c grid")?);
            c.seed = run.seed;
            c.reps = run.reps;
            c
        }
    };
    Ok(cfg)
}

/// Fills every default a command uses, so the manifest records the values
/// actually run.
pub fn resolve_defaults(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    let reps = match c.command {
        Command::Concentration | Command::ConjectureProbe => Some(1000),
        Command::PhaseDiagram => Some(100),
        Command::GumbelCheck => Some(5000),
        _ => None,
    };
    if c.reps.is_none() {
        c.reps = reps;
    }
    match c.command {
        Command::Concentration => {
            c.delta_schedule.get_or_insert(DeltaSchedule::CapstoneAuto { c: 1.0 });
            let norm = if c.transform.is_identity() { NormKind::Up } else { NormKind::FOfUp };
            c.norm_kind.get_or_insert(norm);
        }
        Command::PhaseDiagram => {
            c.threshold.get_or_insert(ThresholdRule::default());
        }
        Command::ConjectureProbe => {
            c.c_grid.get_or_insert_with(|| vec![0.5, 1.0, 2.0]);
        }
        _ => {}
    }
    c
}

/// Where a run writes its files.
pub fn output_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub table: Table,
    pub manifest: Manifest,
}

struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<()> {
        write_json(v, &self.dir.join(name))?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn table(&mut self, stem: &str, t: &Table) -> Result<()> {
        self.text(&format!("{stem}.csv"), &t.to_csv())?;
        self.json(&format!("{stem}.json"), &t.to_json())
    }
}

/// Runs a configuration and writes its CSV, JSON, optional SVG and manifest.
pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    let cfg = resolve_defaults(cfg);
    let dir = output_dir(&cfg, opts);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    let started = Instant::now();
    let model = cfg.model.build()?;
    let mut notes = design_notes(&cfg, &model);
    if let CovarianceModel::Explicit(m) = &model {
        let checked = materialize(&model, m.dim())?;
        if checked.repaired {
            let msg = format!("explicit matrix repaired to PSD (max entry change {:e})", checked.max_repair_change);
            eprintln!("warning: {msg}");
            notes.push(msg);
        }
    }
    let (table, extras) = pool.install(|| compute(&cfg, &model, &mut notes))?;
    let wall = started.elapsed().as_secs_f64();

    std::fs::create_dir_all(&dir)?;
    let stem = cfg.command.name().replace('-', "_");
    let mut arts = Artifacts { dir: dir.clone(), names: Vec::new() };
    arts.table(&stem, &table)?;
    for (name, extra) in &extras {
        match extra {
            Extra::Table(t) => arts.table(name, t)?,
            Extra::Json(v) => arts.json(&format!("{name}.json"), v)?,
        }
    }
    if opts.svg {
        for (name, svg) in render_svg(&cfg, &table) {
            arts.text(&name, &svg)?;
        }
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: "maxconc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.command,
        config: cfg.clone(),
        threads: pool.current_num_threads(),
        wall_time_seconds: wall,
        artifacts: arts.names.clone(),
        notes,
    };
    save_manifest(&manifest, &dir.join("manifest.json"))?;
    Ok(RunOutput { dir, table, manifest })
}

enum Extra {
    Table(Table),
    Json(serde_json::Value),
}

fn design_notes(cfg: &ExperimentConfig, model: &CovarianceModel) -> Vec<String> {
    let mut n = vec![
        "rng: ChaCha8 keyed by (seed, cell, domain); replication r uses stream r; cell = grid position".to_string(),
        format!("model: {}", model.tag()),
    ];
    if matches!(cfg.command, Command::Concentration | Command::PhaseDiagram | Command::ConjectureProbe) {
        let s = if model.is_iid() {
            "iid_fast"
        } else if model.acf().is_some() {
            "circulant_fft (falls back to cholesky_general if the embedding is not PSD)"
        } else {
            "cholesky_general"
        };
        n.push(format!("sampler: {s}"));
    }
    if cfg.command == Command::PhaseDiagram {
        n.push("support: uniformly random subset per replication (partial Fisher-Yates), not leading indices".into());
        n.push("common random numbers: all r values in a beta row share noise and supports".into());
    }
    n
}

fn need<T: Clone>(cfg: &ExperimentConfig, v: &Option<T>, name: &str) -> Result<T> {
    cfg.require(v, name)
}

fn compute(cfg: &ExperimentConfig, model: &CovarianceModel, notes: &mut Vec<String>) -> Result<(Table, Vec<(String, Extra)>)> {
    let mut extras = Vec::new();
    let table = match cfg.command {
        Command::Constants => {
            let mut t = Table::new(["p", "u_p", "u_star", "sqrt_2_log_p", "delta_opt", "up_gap"]);
            for &p in &cfg.p_grid {
                let k = constants_for(p)?;
                t.push(vec![
                    p.into(),
                    k.u_p.into(),
                    k.u_star.into(),
                    k.sqrt_2_log_p.into(),
                    k.delta_opt.into(),
                    up_gap(p).ok().into(),
                ]);
            }
            t
        }
        Command::Packing => {
            let tau = need(cfg, &cfg.tau, "tau")?;
            let mut t = Table::new(["p", "tau", "n_tau", "alpha", "gamma_size", "gamma_lower_bound", "r_q"]);
            let mut sets = Vec::new();
            for &p in &cfg.p_grid {
                let pu = usize::try_from(p).map_err(|_| Error::domain("p too large"))?;
                let r = packing_report_model(model, pu, tau)?;
                t.push(vec![
                    p.into(),
                    tau.into(),
                    r.n_tau.into(),
                    r.alpha.into(),
                    r.gamma_set.len().into(),
                    r.gamma_lower_bound.into(),
                    r.r_q.into(),
                ]);
                sets.push(serde_json::json!({ "p": p, "gamma_set": r.gamma_set }));
            }
            extras.push(("packing_sets".into(), Extra::Json(sets.into())));
            t
        }
        Command::RateBound => rate_bound_table(cfg, model, notes)?,
        Command::Concentration => {
            let ccfg = ConcentrationConfig {
                p_grid: cfg.p_grid.clone(),
                schedule: need(cfg, &cfg.delta_schedule, "delta_schedule")?,
                norm_kind: need(cfg, &cfg.norm_kind, "norm_kind")?,
                reps: need(cfg, &cfg.reps, "reps")?,
                seed: cfg.seed,
            };
            let est = montecarlo::estimate_concentration(model, &cfg.transform, &ccfg)?;
            let mut t = Table::new([
                "p",
                "transform",
                "delta_p",
                "norm_kind",
                "norm",
                "prob",
                "prob_above",
                "prob_below",
                "count_above",
                "count_below",
                "reps",
                "half_width",
                "mean_abs_dev",
                "method",
            ]);
            for e in &est {
                t.push(vec![
                    e.p.into(),
                    cfg.transform.label().into(),
                    e.delta_p.into(),
                    e.norm_kind.name().into(),
                    e.norm.into(),
                    e.prob.into(),
                    e.prob_above().into(),
                    e.prob_below().into(),
                    e.count_above.into(),
                    e.count_below.into(),
                    e.reps.into(),
                    e.half_width.into(),
                    e.mean_abs_dev.into(),
                    e.method.clone().into(),
                ]);
            }
            if let Ok(fit) = montecarlo::empirical_rate_fit(&est) {
                let v = serde_json::to_value(&fit).expect("rate fit serializes");
                extras.push(("rate_fit".into(), Extra::Json(v)));
            }
            t
        }
        Command::PhaseDiagram => {
            let beta_grid = need(cfg, &cfg.beta_grid, "beta_grid")?;
            let rule = need(cfg, &cfg.threshold, "threshold")?;
            let mut t = Table::new([
                "p",
                "beta",
                "g_beta",
                "r",
                "r_over_g",
                "support_size",
                "threshold",
                "successes",
                "reps",
                "recovery_freq",
            ]);
            let mut b = Table::new(["beta", "g_beta"]);
            for &beta in &beta_grid {
                b.push(vec![beta.into(), g_beta(beta)?.into()]);
            }
            for &p in &cfg.p_grid {
                let pc = PhaseConfig {
                    p,
                    beta_grid: beta_grid.clone(),
                    r_grid: need(cfg, &cfg.r_grid, "r_grid")?,
                    r_relative: cfg.r_relative,
                    reps: need(cfg, &cfg.reps, "reps")?,
                    seed: cfg.seed,
                    rule,
                };
                let d = montecarlo::phase_diagram(model, &pc)?;
                for c in &d.cells {
                    t.push(vec![
                        c.p.into(),
                        c.beta.into(),
                        g_beta(c.beta)?.into(),
                        c.r.into(),
                        c.r_over_g.into(),
                        c.support_size.into(),
                        d.threshold.into(),
                        c.successes.into(),
                        c.reps.into(),
                        c.recovery_freq.into(),
                    ]);
                }
            }
            extras.push(("boundary".into(), Extra::Table(b)));
            t
        }
        Command::GumbelCheck => {
            let reps = need(cfg, &cfg.reps, "reps")?;
            let mut t = Table::new(["p", "reps", "b_p", "ks", "critical_1pct", "rejected_1pct"]);
            for (cell, &p) in cfg.p_grid.iter().enumerate() {
                let g = montecarlo::gumbel_check_cell(p, reps, cfg.seed, cell as u64)?;
                t.push(vec![
                    p.into(),
                    reps.into(),
                    g.b_p.into(),
                    g.ks.into(),
                    g.critical_1pct.into(),
                    (g.ks > g.critical_1pct).into(),
                ]);
            }
            let st = montecarlo::gumbel_self_test(reps, cfg.seed, 0.01)?;
            let v = serde_json::to_value(&st).expect("self test serializes");
            extras.push(("ks_self_test".into(), Extra::Json(v)));
            t
        }
        Command::ConjectureProbe => {
            let c_grid = need(cfg, &cfg.c_grid, "c_grid")?;
            let rows = montecarlo::conjecture_probe(model, &cfg.p_grid, &c_grid, need(cfg, &cfg.reps, "reps")?, cfg.seed)?;
            let mut t = Table::new(["p", "c", "delta_p", "prob", "reps", "half_width"]);
            for r in rows {
                t.push(vec![r.p.into(), r.c.into(), r.delta_p.into(), r.prob.into(), r.reps.into(), r.half_width.into()]);
            }
            t
        }
    };
    Ok((table, extras))
}

fn rate_bound_table(cfg: &ExperimentConfig, model: &CovarianceModel, notes: &mut Vec<String>) -> Result<Table> {
    let mut cols: Vec<String> = ["p", "tau_p", "alpha_p", "term_alpha", "term_tau", "term_log", "total", "n_tau", "guard_ok"]
        .map(String::from)
        .to_vec();
    cols.extend(cfg.transforms.iter().map(|t| format!("d_star_{}", t.label())));
    let mut t = Table::new(cols);
    for &p in &cfg.p_grid {
        let pf = p as f64;
        let b = match (model.acf(), cfg.c_tilde) {
            (Some(Acf::LogDecay { nu, c }), Some(ct)) => {
                let mut b = optimize_tau_logdecay(pf, nu, c, ct)?;
                b.model_tag = model.tag();
                b
            }
            _ => capstone_auto(model, pf)?,
        };
        if b.guard_ok == Some(false) {
            let msg = format!("p = {p}: log-decay validity guard fails; bound reported but not certified");
            eprintln!("warning: {msg}");
            notes.push(msg);
        }
        let mut row: Vec<Value> = vec![
            p.into(),
            b.tau_p.into(),
            b.alpha_p.into(),
            b.term_alpha.into(),
            b.term_tau.into(),
            b.term_log.into(),
            b.total.into(),
            b.n_tau.into(),
            b.guard_ok.into(),
        ];
        for tr in &cfg.transforms {
            let d = if b.total < 1.0 { transform_rate(tr, pf, b.total).ok() } else { None };
            row.push(d.into());
        }
        t.push(row);
    }
    Ok(t)
}

fn series(t: &Table, x: &str, y: &str) -> Vec<(f64, f64)> {
    t.numbers(x).into_iter().zip(t.numbers(y)).filter_map(|(a, b)| Some((a?, b?))).collect()
}

/// SVG renderings of an already computed table.
fn render_svg(cfg: &ExperimentConfig, t: &Table) -> Vec<(String, String)> {
    match cfg.command {
        Command::Concentration => {
            let s = vec![
                ("prob".to_string(), series(t, "p", "prob")),
                ("mean_abs_dev".to_string(), series(t, "p", "mean_abs_dev")),
                ("delta_p".to_string(), series(t, "p", "delta_p")),
            ];
            vec![("concentration.svg".into(), line_chart("Concentration of maxima", "p", "value", &s, true))]
        }
        Command::ConjectureProbe => {
            let mut cs: Vec<f64> = t.numbers("c").into_iter().flatten().collect();
            cs.sort_by(f64::total_cmp);
            cs.dedup();
            let (ps, cc, pr) = (t.numbers("p"), t.numbers("c"), t.numbers("prob"));
            let s: Vec<(String, Vec<(f64, f64)>)> = cs
                .iter()
                .map(|&c| {
                    let pts = (0..t.rows.len())
                        .filter(|&i| cc[i] == Some(c))
                        .filter_map(|i| Some((ps[i]?, pr[i]?)))
                        .collect();
                    (format!("c = {c}"), pts)
                })
                .collect();
            vec![("conjecture_probe.svg".into(), line_chart("P(|M/u_p - 1| > c/log p)", "p", "probability", &s, true))]
        }
        Command::RateBound => {
            let s = vec![("total".to_string(), series(t, "p", "total")), ("tau_p".to_string(), series(t, "p", "tau_p"))];
            vec![("rate_bound.svg".into(), line_chart("Capstone rate bound", "p", "value", &s, true))]
        }
        Command::GumbelCheck => {
            let s = vec![("ks".to_string(), series(t, "p", "ks")), ("critical 1%".to_string(), series(t, "p", "critical_1pct"))];
            vec![("gumbel_check.svg".into(), line_chart("KS distance to the Gumbel law", "p", "KS", &s, true))]
        }
        Command::PhaseDiagram => phase_svgs(cfg, t),
        Command::Constants | Command::Packing => Vec::new(),
    }
}

fn phase_svgs(cfg: &ExperimentConfig, t: &Table) -> Vec<(String, String)> {
    let (ps, bs, gs, rs, rg, fr) =
        (t.numbers("p"), t.numbers("beta"), t.numbers("g_beta"), t.numbers("r"), t.numbers("r_over_g"), t.numbers("recovery_freq"));
    let mut out = Vec::new();
    for &p in &cfg.p_grid {
        let idx: Vec<usize> = (0..t.rows.len()).filter(|&i| ps[i] == Some(p as f64)).collect();
        let y = |i: usize| if cfg.r_relative { rg[i] } else { rs[i] };
        let cells: Vec<(f64, f64, f64)> = idx.iter().filter_map(|&i| Some((bs[i]?, y(i)?, fr[i]?))).collect();
        let mut curve: Vec<(f64, f64)> = idx
            .iter()
            .filter_map(|&i| Some((bs[i]?, if cfg.r_relative { 1.0 } else { gs[i]? })))
            .collect();
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        curve.dedup();
        let y_label = if cfg.r_relative { "r / g(beta)" } else { "r" };
        let title = format!("Exact recovery frequency, p = {p}");
        out.push((format!("phase_diagram_p{p}.svg"), heatmap(&title, "beta", y_label, &cells, &curve)));
    }
    out
}

/// Convenience for tests and scripts: run a configuration into `dir`.
pub fn execute_into(cfg: &ExperimentConfig, dir: &Path, threads: Option<usize>) -> Result<RunOutput> {
    execute(cfg, &RunOptions { threads, out: Some(dir.to_path_buf()), svg: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("100, 2^10,1e6").unwrap(), vec![100, 1024, 1_000_000]);
        assert!(parse_grid("1.5").is_err());
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn descriptors() {
        assert_eq!(parse_schedule("c_over_logp:2").unwrap(), DeltaSchedule::COverLogp { c: 2.0 });
        assert_eq!(parse_schedule("capstone_auto").unwrap(), DeltaSchedule::CapstoneAuto { c: 1.0 });
        assert!(parse_schedule("c_over_logp").is_err());
        assert_eq!(parse_threshold("bonferroni:0.01").unwrap(), ThresholdRule::Bonferroni { fwer: 0.01 });
        let t = parse_transform("abs_power:0.5").unwrap();
        assert_eq!((t.kind, t.lambda), (TransformKind::AbsPower, Some(0.5)));
        assert!(parse_transform("abs_power").is_err());
        assert!(parse_transform("cube").is_err());
        assert_eq!(parse_permutation("shuffle:7").unwrap(), Permutation::Shuffle { seed: 7 });
        assert_eq!(parse_permutation("1,0").unwrap(), Permutation::Indices(vec![1, 0].into()));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["maxconc", "--bogus"]), 2);
        assert_eq!(run(["maxconc", "constants"]), 2);
        assert_eq!(run(["maxconc", "--help"]), 0);
    }
}
