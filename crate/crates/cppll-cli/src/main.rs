//! `cppll` — command-line front end for the charge-pump PLL toolkit.
//!
//! Every subcommand reads a JSON run configuration (or a previous output
//! envelope, whose echoed config block is extracted) and writes a JSON
//! envelope `{"schema": 1, "command", "config", "result"}`; `--format csv`
//! and `--format table` select flat renderings of the same result.
//!
//! Exit codes: `0` — the command ran and produced its result (this includes
//! "negative" findings such as an overloaded trajectory or an unstable
//! parameter classification); `2` — the configuration or arguments are
//! invalid; `3` — the analysis itself cannot produce its artifact (no
//! expanding direction, certification failure, empty pull-in bracket).
//! Exit-3 runs still write an envelope, with an `error` block in place of
//! `result`.

mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use cppll::{
    basin_map, classification_record, classify_cycle, contraction_certificate, empirical_pull_in,
    find_cycles, grid_csv, grid_svg, hold_in, instability_witness, iterate_with, param_map,
    pull_in_bound, simulate_with, AxisSpec64, BasinOptions64, ContinuousState64, Cycle64,
    DiscreteState64, Grid, GridCell, IterateOptions64, NormalizedParameters64,
    PhysicalParameters64, PullInOptions64, RangeEstimate64, SimOptions64, StateBox64, Termination,
    Trajectory64,
};

use config::{ConfigError, Options, RunConfig};
use render::{emit, scalar_csv, scalar_table, short, Envelope, Format};

#[derive(Parser)]
#[command(
    name = "cppll",
    version,
    about = "Simulation and analysis toolkit for charge-pump phase-locked loops"
)]
struct Cli {
    /// Worker threads for grid sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration, or a previous output envelope.
    config: PathBuf,
    /// Output rendering.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write output to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate the exact discrete map from the configured initial state.
    Simulate(Common),
    /// Run the event-driven continuous-time simulation.
    Oracle(Common),
    /// Closed-form hold-in range estimate (physical parameters required).
    Holdin(Common),
    /// Closed-form upper bound on the pull-in range.
    PullinBound(Common),
    /// Bisected empirical pull-in estimate over a reference-period range.
    PullinEmpirical(Common),
    /// Search for periodic orbits and classify their stability.
    Cycles {
        #[command(flatten)]
        common: Common,
        /// Cycle period to search for (overrides options.period).
        #[arg(long)]
        period: Option<usize>,
    },
    /// Classify the operating point by the closed-form thresholds.
    Classify(Common),
    /// Construct a finite-step contraction certificate for the lock.
    Certificate {
        #[command(flatten)]
        common: Common,
        /// Contraction factor in (0, 1) (overrides options.eta).
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Compute an expanding-direction witness of lock instability.
    Witness(Common),
    /// Raster the basin of attraction over a state-plane region.
    Basin {
        #[command(flatten)]
        common: Common,
        /// Also write an SVG raster to this path.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Raster the closed-form classes over the parameter plane.
    ParamMap {
        #[command(flatten)]
        common: Common,
        /// Also write an SVG raster to this path.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Audit a configuration for pump-overload conditions.
    OverloadCheck(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Oracle(_) => "oracle",
            Command::Holdin(_) => "holdin",
            Command::PullinBound(_) => "pullin-bound",
            Command::PullinEmpirical(_) => "pullin-empirical",
            Command::Cycles { .. } => "cycles",
            Command::Classify(_) => "classify",
            Command::Certificate { .. } => "certificate",
            Command::Witness(_) => "witness",
            Command::Basin { .. } => "basin",
            Command::ParamMap { .. } => "param-map",
            Command::OverloadCheck(_) => "overload-check",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Oracle(c)
            | Command::Holdin(c)
            | Command::PullinBound(c)
            | Command::PullinEmpirical(c)
            | Command::Classify(c)
            | Command::Witness(c)
            | Command::OverloadCheck(c) => c,
            Command::Cycles { common, .. }
            | Command::Certificate { common, .. }
            | Command::Basin { common, .. }
            | Command::ParamMap { common, .. } => common,
        }
    }
}

/// A command's rendered result in all three output forms.
struct Output {
    result: Value,
    csv: String,
    table: String,
}

enum Failure {
    /// Bad configuration or arguments (exit 2).
    Validation(String),
    /// The analysis ran but cannot produce its artifact (exit 3).
    Analysis { kind: &'static str, message: String },
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(e.0)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool already configured: {e}");
        }
    }

    let common = cli.command.common();
    let cfg = match RunConfig::load(&common.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let outcome = dispatch(&cli.command, &cfg);
    let name = cli.command.name();
    match outcome {
        Ok(out) => {
            let text = match common.format {
                Format::Json => Envelope::ok(name, &cfg, out.result).to_json(),
                Format::Csv => out.csv,
                Format::Table => out.table,
            };
            if let Err(e) = emit(common.output.as_deref(), &text) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Analysis { kind, message }) => {
            let text = Envelope::failed(name, &cfg, kind, message.clone()).to_json();
            let _ = emit(common.output.as_deref(), &text);
            eprintln!("error ({kind}): {message}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Output, Failure> {
    match cmd {
        Command::Simulate(_) => cmd_simulate(cfg),
        Command::Oracle(_) => cmd_oracle(cfg),
        Command::Holdin(_) => cmd_range(cfg, hold_in),
        Command::PullinBound(_) => cmd_range(cfg, pull_in_bound),
        Command::PullinEmpirical(_) => cmd_pullin_empirical(cfg),
        Command::Cycles { period, .. } => cmd_cycles(cfg, *period),
        Command::Classify(_) => cmd_classify(cfg),
        Command::Certificate { eta, .. } => cmd_certificate(cfg, *eta),
        Command::Witness(_) => cmd_witness(cfg),
        Command::Basin { svg, .. } => cmd_basin(cfg, svg.as_deref()),
        Command::ParamMap { svg, .. } => cmd_param_map(cfg, svg.as_deref()),
        Command::OverloadCheck(_) => cmd_overload_check(cfg),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("library types serialize")
}

fn iterate_options(opt: &Options) -> IterateOptions64 {
    let mut o = IterateOptions64::default();
    if let Some(t) = opt.lock_tolerance {
        o.lock_tolerance = t;
    }
    if let Some(w) = opt.lock_window {
        o.lock_window = w;
    }
    if let Some(d) = opt.divergence_bound {
        o.divergence_bound = d;
    }
    o
}

fn basin_options(opt: &Options) -> BasinOptions64 {
    let mut o = BasinOptions64::default();
    if let Some(n) = opt.max_steps {
        o.max_steps = n;
    }
    if let Some(t) = opt.lock_tolerance {
        o.lock_tolerance = t;
    }
    if let Some(w) = opt.lock_window {
        o.lock_window = w;
    }
    if let Some(d) = opt.divergence_bound {
        o.divergence_bound = d;
    }
    if let Some(s) = opt.cycle_scan {
        o.cycle_scan = s;
    }
    if let Some(t) = opt.cycle_tolerance {
        o.cycle_tolerance = t;
    }
    o
}

fn state_box(opt: &Options) -> StateBox64 {
    match opt.state_box {
        Some(b) => StateBox64::new(b.p_min, b.p_max, b.u_min, b.u_max),
        None => StateBox64::default(),
    }
}

fn run_map(
    cfg: &RunConfig,
    np: &NormalizedParameters64,
    s0: DiscreteState64,
) -> Result<Trajectory64, Failure> {
    let steps = cfg.options.steps.unwrap_or(1000).max(1);
    iterate_with(s0, np, steps, iterate_options(&cfg.options))
        .map_err(|e| Failure::Validation(e.to_string()))
}

fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Locked => "locked".into(),
        Termination::Overloaded(k) => format!("overloaded ({})", to_value(k).as_str().unwrap_or("?")),
        Termination::MaxSteps => "max-steps".into(),
        Termination::Diverged => "diverged".into(),
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Output, Failure> {
    let np = cfg.normalized()?;
    let s0 = cfg.required_initial()?;
    let traj = run_map(cfg, &np, s0)?;

    let mut csv = String::from("step,p,u,branch\n");
    for (k, s) in traj.states.iter().enumerate() {
        let branch = if k == 0 {
            ""
        } else {
            traj.branches[k - 1].name()
        };
        csv.push_str(&format!("{k},{:.17e},{:.17e},{branch}\n", s.p, s.u));
    }

    let fin = *traj.states.last().expect("trajectory holds the start");
    let table = scalar_table(&[
        ("alpha", short(np.alpha)),
        ("beta", short(np.beta)),
        ("initial p", short(s0.p)),
        ("initial u", short(s0.u)),
        ("steps taken", (traj.states.len() - 1).to_string()),
        ("termination", termination_label(&traj.termination)),
        ("final p", format!("{:e}", fin.p)),
        ("final u", format!("{:e}", fin.u)),
    ]);

    let result = json!({
        "alpha": np.alpha,
        "beta": np.beta,
        "initial": to_value(&s0),
        "trajectory": to_value(&traj),
    });
    Ok(Output { result, csv, table })
}

fn cmd_oracle(cfg: &RunConfig) -> Result<Output, Failure> {
    let phys = cfg.any_physical()?;
    let np = phys.normalize();
    let s0 = cfg.required_initial()?;
    let cs0 = ContinuousState64::from_discrete(s0, &phys)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let horizon = cfg.options.horizon_events.unwrap_or(1000).max(1);
    let mut opts = SimOptions64 {
        lock_tolerance: cfg.options.lock_tolerance,
        ..SimOptions64::default()
    };
    if let Some(w) = cfg.options.lock_window {
        opts.lock_window = w;
    }
    let log = simulate_with(cs0, &phys, horizon, opts);

    let csv = log.to_csv();
    let table = scalar_table(&[
        ("alpha", short(np.alpha)),
        ("beta", short(np.beta)),
        ("events", log.events.len().to_string()),
        ("segments", log.segments.len().to_string()),
        ("pulses extracted", log.extracted.len().to_string()),
        ("stopped", format!("{:?}", log.stopped).to_lowercase()),
        ("end time s", format!("{:e}", log.final_state.t_seconds)),
        ("final v_c V", format!("{:e}", log.final_state.v_c_volts)),
    ]);

    let result = json!({
        "alpha": np.alpha,
        "beta": np.beta,
        "physical": to_value(&phys),
        "log": to_value(&log),
    });
    Ok(Output { result, csv, table })
}

fn cmd_range(
    cfg: &RunConfig,
    estimator: fn(&PhysicalParameters64) -> RangeEstimate64,
) -> Result<Output, Failure> {
    let phys = cfg.physical()?;
    let est = estimator(&phys);
    let pairs = [
        ("t_ref_seconds", format!("{:e}", est.t_ref_seconds)),
        ("binding", est.binding.name().to_string()),
        ("beta_term_seconds", format!("{:e}", est.beta_term_seconds)),
        ("alpha_term_seconds", format!("{:e}", est.alpha_term_seconds)),
    ];
    let result = json!({
        "t_ref_seconds": est.t_ref_seconds,
        "binding": est.binding.name(),
        "beta_term_seconds": est.beta_term_seconds,
        "alpha_term_seconds": est.alpha_term_seconds,
    });
    Ok(Output {
        result,
        csv: scalar_csv(&pairs),
        table: scalar_table(&pairs),
    })
}

fn cmd_pullin_empirical(cfg: &RunConfig) -> Result<Output, Failure> {
    let phys = cfg.physical()?;
    let opt = &cfg.options;
    let t_lo = opt.t_lo_seconds.ok_or_else(|| {
        Failure::Validation("pullin-empirical needs options.t_lo_seconds".into())
    })?;
    let t_hi = opt.t_hi_seconds.ok_or_else(|| {
        Failure::Validation("pullin-empirical needs options.t_hi_seconds".into())
    })?;
    if !(t_lo > 0.0 && t_lo < t_hi) {
        return Err(Failure::Validation(format!(
            "period range must satisfy 0 < t_lo < t_hi (got {t_lo} .. {t_hi})"
        )));
    }
    let mut popts = PullInOptions64::default();
    if let Some(n) = opt.samples {
        popts.samples = n;
    }
    if let Some(n) = opt.max_steps {
        popts.max_steps = n;
    }
    if let Some(t) = opt.lock_tolerance {
        popts.lock_tolerance = t;
    }
    if let Some(w) = opt.lock_window {
        popts.lock_window = w;
    }
    if let Some(d) = opt.divergence_bound {
        popts.divergence_bound = d;
    }
    if let Some(t) = opt.rel_tolerance {
        popts.rel_tolerance = t;
    }
    if let Some(n) = opt.max_bisections {
        popts.max_bisections = n;
    }

    let r = empirical_pull_in(&phys, t_lo, t_hi, &popts).map_err(|e| Failure::Analysis {
        kind: "pull-in",
        message: e.to_string(),
    })?;

    let pairs = [
        ("t_ref_seconds", format!("{:e}", r.t_ref_seconds)),
        ("bracket_lo_seconds", format!("{:e}", r.bracket.0)),
        ("bracket_hi_seconds", format!("{:e}", r.bracket.1)),
        ("at_upper_bound", r.at_upper_bound.to_string()),
        ("samples", r.samples.to_string()),
        ("evaluations", r.evaluations.len().to_string()),
        (
            "monotonicity_findings",
            r.monotonicity_findings.len().to_string(),
        ),
    ];
    let result = json!({
        "physical": to_value(&phys),
        "estimate": to_value(&r),
    });
    Ok(Output {
        result,
        csv: scalar_csv(&pairs),
        table: scalar_table(&pairs),
    })
}

fn cycle_rows(cycles: &[Cycle64]) -> String {
    let mut csv = String::from("period,point_index,p,u,branch,stability\n");
    for c in cycles {
        let stab = c.stability.map_or("unclassified", |s| s.name());
        for (i, pt) in c.points.iter().enumerate() {
            csv.push_str(&format!(
                "{},{i},{:.17e},{:.17e},{},{stab}\n",
                c.period,
                pt.p,
                pt.u,
                c.itinerary[i].name(),
            ));
        }
    }
    csv
}

fn cmd_cycles(cfg: &RunConfig, period_flag: Option<usize>) -> Result<Output, Failure> {
    let np = cfg.normalized()?;
    let period = period_flag.or(cfg.options.period).unwrap_or(3);
    if !(1..=32).contains(&period) {
        return Err(Failure::Validation(format!(
            "period must be in 1..=32 (got {period})"
        )));
    }
    let grid = cfg.options.grid.unwrap_or(200).max(2);
    let search_box = state_box(&cfg.options);
    let mut search = find_cycles(&np, period, search_box, grid);
    search.cycles = search
        .cycles
        .iter()
        .map(|c| classify_cycle(c, &np))
        .collect();

    let csv = cycle_rows(&search.cycles);
    let mut table = scalar_table(&[
        ("alpha", short(np.alpha)),
        ("beta", short(np.beta)),
        ("period searched", period.to_string()),
        ("seeds tried", search.seeds_tried.to_string()),
        ("cycles found", search.cycles.len().to_string()),
    ]);
    for c in &search.cycles {
        table.push_str(&format!(
            "\nperiod {} ({}):\n",
            c.period,
            c.stability.map_or("unclassified", |s| s.name())
        ));
        for pt in &c.points {
            table.push_str(&format!("  p = {:+.12}   u = {:+.12}\n", pt.p, pt.u));
        }
    }

    let result = json!({
        "alpha": np.alpha,
        "beta": np.beta,
        "period": period,
        "grid": grid,
        "search": to_value(&search),
    });
    Ok(Output { result, csv, table })
}

fn cmd_classify(cfg: &RunConfig) -> Result<Output, Failure> {
    let np = cfg.normalized()?;
    let record = classification_record(&np);
    let pairs = [
        ("alpha", format!("{:e}", record.alpha)),
        ("beta", format!("{:e}", record.beta)),
        ("class", record.class.name().to_string()),
        (
            "witness_lambda1",
            record
                .witness_lambda1
                .map_or("-".into(), |l| format!("{l:e}")),
        ),
    ];
    let result = json!({
        "class": record.class.name(),
        "record": to_value(&record),
    });
    Ok(Output {
        result,
        csv: scalar_csv(&pairs),
        table: scalar_table(&pairs),
    })
}

fn cmd_certificate(cfg: &RunConfig, eta_flag: Option<f64>) -> Result<Output, Failure> {
    let np = cfg.normalized()?;
    let eta = eta_flag.or(cfg.options.eta).unwrap_or(0.5);
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Failure::Validation(format!(
            "eta must lie strictly between 0 and 1 (got {eta})"
        )));
    }
    let cert = contraction_certificate(&np, eta).map_err(|e| Failure::Analysis {
        kind: "certification",
        message: e.to_string(),
    })?;
    let pairs = [
        ("alpha", short(np.alpha)),
        ("beta", short(np.beta)),
        ("eta", format!("{eta:e}")),
        ("m", cert.m.to_string()),
        ("net_size", cert.net_size.to_string()),
        ("max_norm_at_m", format!("{:e}", cert.max_norm_at_m)),
    ];
    let result = json!({
        "alpha": np.alpha,
        "beta": np.beta,
        "certificate": to_value(&cert),
    });
    Ok(Output {
        result,
        csv: scalar_csv(&pairs),
        table: scalar_table(&pairs),
    })
}

fn cmd_witness(cfg: &RunConfig) -> Result<Output, Failure> {
    let np = cfg.normalized()?;
    let w = instability_witness(&np).map_err(|e| Failure::Analysis {
        kind: "witness",
        message: e.to_string(),
    })?;

    let mut csv = String::from("step,p,u\n");
    for (k, s) in w.orbit.iter().enumerate() {
        csv.push_str(&format!("{k},{:.17e},{:.17e}\n", s.p, s.u));
    }
    let table = scalar_table(&[
        ("alpha", short(np.alpha)),
        ("beta", short(np.beta)),
        ("lambda1", format!("{:e}", w.lambda1)),
        ("lambda2", format!("{:e}", w.lambda2)),
        (
            "direction",
            format!("({:+.12}, {:+.12})", w.direction.x, w.direction.y),
        ),
        ("orbit states", w.orbit.len().to_string()),
        (
            "escape step",
            w.escape_step.map_or("-".into(), |s| s.to_string()),
        ),
    ]);
    let result = json!({
        "alpha": np.alpha,
        "beta": np.beta,
        "witness": to_value(&w),
    });
    Ok(Output { result, csv, table })
}

fn cell_counts<F, C: GridCell>(grid: &Grid<F, C>) -> (Value, Vec<(String, usize)>) {
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    for c in &grid.cells {
        *counts.entry(c.label()).or_insert(0) += 1;
    }
    let ordered: Vec<(String, usize)> = counts.iter().map(|(k, v)| (k.clone(), *v)).collect();
    (to_value(&counts), ordered)
}

fn grid_table(header: &[(&str, String)], counts: &[(String, usize)], total: usize) -> String {
    let mut table = scalar_table(header);
    table.push('\n');
    let width = counts.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    for (label, n) in counts {
        table.push_str(&format!(
            "{label:<width$} {n:>8}  ({:.1}%)\n",
            100.0 * *n as f64 / total.max(1) as f64
        ));
    }
    table
}

fn write_svg<F: cppll::scalar::Scalar, C: GridCell>(
    svg: Option<&std::path::Path>,
    grid: &Grid<F, C>,
) -> Result<(), Failure> {
    if let Some(path) = svg {
        std::fs::write(path, grid_svg(grid)).map_err(|e| {
            Failure::Validation(format!("cannot write {}: {e}", path.display()))
        })?;
    }
    Ok(())
}

fn cmd_basin(cfg: &RunConfig, svg: Option<&std::path::Path>) -> Result<Output, Failure> {
    let np = cfg.normalized()?;
    let region = state_box(&cfg.options);
    let resolution = cfg
        .options
        .resolution
        .map_or((200, 160), |r| (r.x.max(1), r.y.max(1)));
    let opts = basin_options(&cfg.options);
    let grid = basin_map(&np, region, resolution, &opts);
    write_svg(svg, &grid)?;

    let (counts_value, counts) = cell_counts(&grid);
    let csv = grid_csv(&grid);
    let table = grid_table(
        &[
            ("alpha", short(np.alpha)),
            ("beta", short(np.beta)),
            ("resolution", format!("{} x {}", resolution.0, resolution.1)),
            (
                "region",
                format!(
                    "p in [{}, {}], u in [{}, {}]",
                    short(region.p_min),
                    short(region.p_max),
                    short(region.u_min),
                    short(region.u_max)
                ),
            ),
        ],
        &counts,
        grid.cells.len(),
    );
    let result = json!({
        "alpha": np.alpha,
        "beta": np.beta,
        "counts": counts_value,
        "grid": to_value(&grid),
    });
    Ok(Output { result, csv, table })
}

fn cmd_param_map(cfg: &RunConfig, svg: Option<&std::path::Path>) -> Result<Output, Failure> {
    let opt = &cfg.options;
    let alpha_axis = opt
        .alpha_axis
        .map_or(AxisSpec64::new(0.0, 1.2, 60), |a| {
            AxisSpec64::new(a.min, a.max, a.count.max(1))
        });
    let beta_axis = opt
        .beta_axis
        .map_or(AxisSpec64::new(0.0, 2.4, 60), |a| {
            AxisSpec64::new(a.min, a.max, a.count.max(1))
        });
    let initial = cfg.initial_discrete()?;
    let starts: Option<Vec<DiscreteState64>> = initial.map(|s| vec![s]);
    let opts = basin_options(opt);
    let pm = param_map(alpha_axis, beta_axis, starts.as_deref(), &opts);
    write_svg(svg, &pm.grid)?;

    let (counts_value, counts) = cell_counts(&pm.grid);
    let csv = grid_csv(&pm.grid);
    let mut table = grid_table(
        &[
            (
                "alpha axis",
                format!(
                    "[{}, {}] x {}",
                    short(alpha_axis.min),
                    short(alpha_axis.max),
                    alpha_axis.count
                ),
            ),
            (
                "beta axis",
                format!(
                    "[{}, {}] x {}",
                    short(beta_axis.min),
                    short(beta_axis.max),
                    beta_axis.count
                ),
            ),
        ],
        &counts,
        pm.grid.cells.len(),
    );
    table.push_str(&format!("\ncontradiction findings: {}\n", pm.findings.len()));
    let result = json!({
        "counts": counts_value,
        "findings": to_value(&pm.findings),
        "grid": to_value(&pm.grid),
    });
    Ok(Output { result, csv, table })
}

fn cmd_overload_check(cfg: &RunConfig) -> Result<Output, Failure> {
    let np = cfg.normalized()?;
    let (alpha, beta) = (np.alpha, np.beta);
    let at_lock_margin = 1.0 - alpha;
    let startup_margin = 1.0 - 2.0 * beta - alpha;

    let thresholds = cfg.parameters.physical.as_ref().map(|_| {
        let phys = cfg.physical().expect("physical block present");
        json!({
            "ref_period_seconds": phys.ref_period_seconds,
            "at_lock_max_t_ref_seconds": phys.local_overload_threshold(),
            "startup_max_t_ref_seconds": phys.startup_overload_threshold(),
        })
    });

    let mut pairs = vec![
        ("alpha", format!("{alpha:e}")),
        ("beta", format!("{beta:e}")),
        ("at_lock_overloaded", (at_lock_margin <= 0.0).to_string()),
        ("at_lock_margin", format!("{at_lock_margin:e}")),
        ("startup_overloaded", (startup_margin <= 0.0).to_string()),
        ("startup_margin", format!("{startup_margin:e}")),
    ];

    let trajectory = match cfg.initial_discrete()? {
        None => Value::Null,
        Some(s0) => {
            let map_part = match run_map(cfg, &np, s0) {
                Ok(traj) => {
                    let fin = *traj.states.last().expect("trajectory holds the start");
                    pairs.push(("map_termination", termination_label(&traj.termination)));
                    json!({
                        "termination": to_value(&traj.termination),
                        "steps_taken": traj.states.len() - 1,
                        "final": to_value(&fin),
                    })
                }
                Err(Failure::Validation(msg)) | Err(Failure::Analysis { message: msg, .. }) => {
                    pairs.push(("map_termination", "unrealizable".into()));
                    json!({ "unrealizable": msg })
                }
            };
            let phys = cfg.any_physical()?;
            let oracle_part = match ContinuousState64::from_discrete(s0, &phys) {
                Ok(cs0) => {
                    let horizon = cfg.options.horizon_events.unwrap_or(1000).max(1);
                    let log = simulate_with(cs0, &phys, horizon, SimOptions64::default());
                    pairs.push((
                        "oracle_stopped",
                        format!("{:?}", log.stopped).to_lowercase(),
                    ));
                    json!({
                        "stopped": to_value(&log.stopped),
                        "events": log.events.len(),
                        "end_seconds": log.final_state.t_seconds,
                    })
                }
                Err(e) => {
                    pairs.push(("oracle_stopped", "unrealizable".into()));
                    json!({ "unrealizable": e.to_string() })
                }
            };
            json!({ "initial": to_value(&s0), "map": map_part, "oracle": oracle_part })
        }
    };

    let result = json!({
        "alpha": alpha,
        "beta": beta,
        "at_lock": { "overloaded": at_lock_margin <= 0.0, "margin": at_lock_margin },
        "startup": { "overloaded": startup_margin <= 0.0, "margin": startup_margin },
        "thresholds": thresholds.unwrap_or(Value::Null),
        "trajectory": trajectory,
    });
    Ok(Output {
        result,
        csv: scalar_csv(&pairs),
        table: scalar_table(&pairs),
    })
}
