use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lasso_replica::acceptance::{self, SUITE_SEED};
use lasso_replica::experiments::{
    contour_map, density_table, histogram_table, phase_table, phase_transition_scan, run_sweep, staircase_ensemble,
    summary_table, weight_distribution_grid, Observable, PenaltyPair, PointStatus, SimulationBlock, SweepSpec,
};
use lasso_replica::io::config::{RunConfig, SimSettings};
use lasso_replica::io::{Manifest, Plot, Series, Table};
use lasso_replica::replica::{solve_no_short, solve_saddle, RegularizedProblem, VolatilityProfile};
use lasso_replica::sim::{feasibility_frequency, measure_ensemble, vanishing_variance_probability, QpOptions};
use lasso_replica::{Error, Result};

#[derive(Parser)]
#[command(name = "lasso-replica", version, about = "Replica theory and simulation of l1-regularized portfolios")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "LASSO_REPLICA_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,
    #[arg(long, global = true)]
    no_csv: bool,
    #[arg(long, global = true)]
    no_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct PenaltyArgs {
    /// Symmetric slope, sets both eta1 and eta2.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta1: Option<f64>,
    /// Use `inf` to forbid short positions.
    #[arg(long)]
    eta2: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct ProfileArgs {
    /// Uniform volatility.
    #[arg(long, conflicts_with = "sigmas")]
    sigma: Option<f64>,
    /// Equal-mass volatility atoms, comma separated.
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
}

impl ProfileArgs {
    fn apply(&self, profile: &mut VolatilityProfile) -> Result<()> {
        if let Some(s) = self.sigma {
            *profile = VolatilityProfile::uniform(s)?;
        }
        if let Some(s) = &self.sigmas {
            *profile = VolatilityProfile::from_sigmas(s)?;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the saddle point at one (r, eta) and print it as JSON.
    Solve {
        #[arg(long)]
        r: Option<f64>,
        #[command(flatten)]
        penalty: PenaltyArgs,
        #[command(flatten)]
        profile: ProfileArgs,
    },
    /// Closed-form no-short solution for unit volatility.
    NoShort {
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.0)]
        eta1: f64,
    },
    /// Observables along r for several regularizers.
    Sweep {
        /// Symmetric slopes replacing the configured penalties.
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
        /// Sample size for the simulation overlay.
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// q0 over the (eta, r) plane with iso-lines.
    Contour {
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
    },
    /// Weight distributions, analytic and simulated.
    Wdist {
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        profile: ProfileArgs,
    },
    /// Ensemble q0_hat, n0 and in-sample cost against the replica values.
    Simulate {
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
        #[command(flatten)]
        penalty: PenaltyArgs,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Single-sample elimination staircases along an eta path.
    Staircase {
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Vanishing-variance probability, exact and Monte Carlo.
    Feasibility {
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// Scan these T values over the configured N/T multipliers.
        #[arg(long, value_delimiter = ',')]
        scan_t: Option<Vec<usize>>,
    },
    /// Run the acceptance suite.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::NoShort { .. } => "no-short",
            Command::Sweep { .. } => "sweep",
            Command::Contour { .. } => "contour",
            Command::Wdist { .. } => "wdist",
            Command::Simulate { .. } => "simulate",
            Command::Staircase { .. } => "staircase",
            Command::Feasibility { .. } => "feasibility",
            Command::Selftest => "selftest",
        }
    }
}

/// Collects output files and records them in the manifest.
struct Outputs {
    dir: PathBuf,
    cfg: RunConfig,
    manifest: Manifest,
}

impl Outputs {
    fn new(command: &str, cfg: RunConfig) -> Result<Self> {
        let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("lasso-replica-out"));
        std::fs::create_dir_all(&dir)?;
        // The output location is not part of the run's identity.
        let cfg = RunConfig { output_dir: None, ..cfg };
        let manifest = Manifest::new(command, cfg.seed, &cfg.to_toml()?);
        Ok(Self { dir, cfg, manifest })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.manifest.record(name, bytes);
        Ok(())
    }

    fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        if self.cfg.emit.csv {
            self.write(name, table.to_csv()?.as_bytes())?;
        }
        Ok(())
    }

    fn svg(&mut self, name: &str, plot: &Plot) -> Result<()> {
        if self.cfg.emit.svg {
            self.write(name, plot.render().as_bytes())?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.cfg.emit.json {
            let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
            text.push('\n');
            self.write(name, text.as_bytes())?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<PathBuf> {
        let canonical = self.cfg.to_toml()?;
        let name = format!("{}.config.toml", self.manifest.command);
        self.write(&name, canonical.as_bytes())?;
        self.manifest.write(&self.dir)?;
        Ok(self.dir)
    }
}

fn penalty_from(args: &PenaltyArgs, eta1: &mut f64, eta2: &mut Option<f64>) {
    if let Some(e) = args.eta {
        *eta1 = e;
        *eta2 = None;
    }
    if let Some(e) = args.eta1 {
        *eta1 = e;
    }
    if let Some(e) = args.eta2 {
        *eta2 = Some(e);
    }
}

fn label(p: &PenaltyPair) -> String {
    match p.eta2 {
        Some(e) if e.is_infinite() => format!("eta1={} no short", p.eta1),
        Some(e) if e != p.eta1 => format!("eta1={} eta2={e}", p.eta1),
        _ => format!("eta={}", p.eta1),
    }
}

fn sim_block(s: Option<SimSettings>, seed: u64) -> Option<SimulationBlock> {
    s.map(|s| SimulationBlock { n: s.n, samples: s.samples, base_seed: seed })
}

fn override_sim(sim: &mut Option<SimSettings>, n: Option<usize>, samples: Option<usize>) {
    if n.is_some() || samples.is_some() {
        let cur = sim.unwrap_or(SimSettings { n: 50, samples: 20 });
        *sim = Some(SimSettings { n: n.unwrap_or(cur.n), samples: samples.unwrap_or(cur.samples) });
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.output_dir = Some(out);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.emit.svg |= cli.svg;
    cfg.emit.csv &= !cli.no_csv;
    cfg.emit.json &= !cli.no_json;
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size worker pool: {e}")))?;
    }
    let name = cli.command.name();
    let seed = cfg.seed;

    match cli.command {
        Command::Solve { r, penalty, profile } => {
            if let Some(r) = r {
                cfg.solve.r = r;
            }
            penalty_from(&penalty, &mut cfg.solve.eta1, &mut cfg.solve.eta2);
            profile.apply(&mut cfg.solve.profile)?;
            let b = cfg.solve.clone();
            let p = RegularizedProblem::new(b.r, b.eta1, b.eta2.unwrap_or(b.eta1), b.profile)?;
            let sol = solve_saddle(&p, None)?;
            println!("{}", serde_json::to_string_pretty(&sol).map_err(std::io::Error::other)?);
            let mut out = Outputs::new(name, cfg)?;
            out.json("solution.json", &sol)?;
            out.finish()?;
        }
        Command::NoShort { r, eta1 } => {
            cfg.solve.r = r;
            cfg.solve.eta1 = eta1;
            cfg.solve.eta2 = Some(f64::INFINITY);
            let sol = solve_no_short(r, eta1)?;
            println!("{}", serde_json::to_string_pretty(&sol).map_err(std::io::Error::other)?);
            let mut out = Outputs::new(name, cfg)?;
            out.json("solution.json", &sol)?;
            out.finish()?;
        }
        Command::Sweep { etas, r, n, samples } => {
            if let Some(e) = etas {
                cfg.sweep.penalties = e.into_iter().map(PenaltyPair::symmetric).collect();
            }
            if let Some(r) = r {
                cfg.sweep.r = lasso_replica::experiments::Grid::List(r);
            }
            override_sim(&mut cfg.sweep.simulation, n, samples);
            let b = cfg.sweep.clone();
            let spec = SweepSpec {
                rs: b.r.values()?,
                penalties: b.penalties.clone(),
                profile: b.profile,
                observables: b.observables.clone(),
                simulation: sim_block(b.simulation, seed),
            };
            if spec.rs.iter().any(|&r| !(r > 0.0 && r < 2.0)) {
                return Err(Error::Config("sweep r values must lie in (0, 2)".into()));
            }
            let res = run_sweep(&spec)?;
            let mut out = Outputs::new(name, cfg)?;
            out.csv("sweep.csv", &res.table)?;
            for &o in &b.observables {
                let mut plot = Plot::new(format!("{} vs r", o.name()), "r", o.name());
                if matches!(o, Observable::Q0 | Observable::Q0Tilde | Observable::Lambda | Observable::Delta) {
                    plot = plot.log_y();
                }
                for (k, pen) in b.penalties.iter().enumerate() {
                    let cells = &res.cells[k * spec.rs.len()..(k + 1) * spec.rs.len()];
                    let pts = cells.iter().filter_map(|c| c.analytic.values.map(|v| (c.r, v.get(o)))).collect();
                    plot = plot.with(Series::line(label(pen), pts));
                }
                out.svg(&format!("sweep_{}.svg", o.name()), &plot)?;
            }
            let failed: Vec<(f64, f64, String)> = res
                .cells
                .iter()
                .filter_map(|c| match &c.analytic.status {
                    PointStatus::Failed(m) => Some((c.r, c.penalty.eta1, m.clone())),
                    _ => None,
                })
                .collect();
            out.json("sweep_summary.json", &serde_json::json!({ "rows": res.table.len(), "failed": failed }))?;
            out.finish()?;
        }
        Command::Contour { levels } => {
            if let Some(l) = levels {
                cfg.contour.levels = l;
            }
            let b = cfg.contour.clone();
            let grid = contour_map(&b.r.values()?, &b.eta.values()?, &b.levels, &VolatilityProfile::uniform(1.0)?)?;
            let mut out = Outputs::new(name, cfg)?;
            out.csv("contour_q0.csv", &grid.table())?;
            out.csv("contour_lines.csv", &grid.lines_table())?;
            let mut plot = Plot::new("q0 iso-lines", "eta", "r");
            for line in &grid.lines {
                plot = plot.with_segments(format!("q0={:.4}", line.level), line.segments.clone());
            }
            out.svg("contour.svg", &plot)?;
            out.json("contour.json", &grid)?;
            out.finish()?;
        }
        Command::Wdist { r, etas, n, samples, profile } => {
            if let Some(r) = r {
                cfg.wdist.r = lasso_replica::experiments::Grid::List(r);
            }
            if let Some(e) = etas {
                cfg.wdist.penalties = e.into_iter().map(PenaltyPair::symmetric).collect();
            }
            profile.apply(&mut cfg.wdist.profile)?;
            override_sim(&mut cfg.wdist.simulation, n, samples);
            let b = cfg.wdist.clone();
            let cells = weight_distribution_grid(&b.r.values()?, &b.penalties, &b.profile, sim_block(b.simulation, seed))?;
            let mut out = Outputs::new(name, cfg)?;
            out.csv("wdist_summary.csv", &summary_table(&cells))?;
            out.csv("wdist_density.csv", &density_table(&cells))?;
            if b.simulation.is_some() {
                out.csv("wdist_histogram.csv", &histogram_table(&cells))?;
            }
            for (k, c) in cells.iter().enumerate() {
                let mut plot = Plot::new(format!("weights at r={} {}", c.r, label(&c.penalty)), "w", "p(w)")
                    .with(Series::line("analytic", c.density.clone()));
                if let Some(s) = &c.simulation {
                    let h = &s.measurement.histogram;
                    let mut pts = Vec::new();
                    for (i, &m) in h.masses.iter().enumerate() {
                        let d = m / (h.edges[i + 1] - h.edges[i]);
                        pts.push((h.edges[i], d));
                        pts.push((h.edges[i + 1], d));
                    }
                    plot = plot.with(Series::line("simulation", pts));
                }
                out.svg(&format!("wdist_{k}.svg"), &plot)?;
            }
            out.finish()?;
        }
        Command::Simulate { r, penalty, n, samples } => {
            if let Some(r) = r {
                cfg.simulate.r = lasso_replica::experiments::Grid::List(r);
            }
            penalty_from(&penalty, &mut cfg.simulate.eta1, &mut cfg.simulate.eta2);
            if let Some(n) = n {
                cfg.simulate.n = n;
            }
            if let Some(s) = samples {
                cfg.simulate.samples = s;
            }
            let b = cfg.simulate.clone();
            let mut table = Table::new([
                "r", "t", "realized_r", "q0", "n0", "f", "q0_hat", "sim_n0", "sim_f", "n_failed", "q0_hat_se", "sim_n0_se",
                "sim_f_se",
            ]);
            let mut analytic = Vec::new();
            let mut simulated = Vec::new();
            for r in b.r.values()? {
                let pr = RegularizedProblem::new(r, b.eta1, b.eta2.unwrap_or(b.eta1), b.profile.clone())?;
                let m = measure_ensemble(&pr, b.n, b.samples, seed)?;
                let sol = solve_saddle(&pr.with_r(m.realized_r), None).ok();
                let (q0, n0, f) =
                    sol.map(|s| (s.params.q0, s.mixture.n0, s.f_in_sample)).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
                analytic.push((m.realized_r, q0));
                simulated.push((m.realized_r, m.q0_hat.mean));
                table.push(vec![
                    r.into(),
                    m.t.into(),
                    m.realized_r.into(),
                    q0.into(),
                    n0.into(),
                    f.into(),
                    m.q0_hat.mean.into(),
                    m.n0.mean.into(),
                    m.f_in_sample.mean.into(),
                    m.n_failed.into(),
                    m.q0_hat.se.into(),
                    m.n0.se.into(),
                    m.f_in_sample.se.into(),
                ]);
            }
            let mut out = Outputs::new(name, cfg)?;
            out.csv("simulate.csv", &table)?;
            let plot = Plot::new("q0: replica and simulation", "r", "q0")
                .with(Series::line("replica", analytic))
                .with(Series::markers("simulation", simulated));
            out.svg("simulate.svg", &plot)?;
            out.finish()?;
        }
        Command::Staircase { n, t, samples } => {
            if let Some(n) = n {
                cfg.staircase.n = n;
            }
            if let Some(t) = t {
                cfg.staircase.t = t;
            }
            if let Some(s) = samples {
                cfg.staircase.samples = s;
            }
            let b = cfg.staircase.clone();
            let etas = b.eta.values()?;
            let e = staircase_ensemble(b.n, b.t, &b.profile, &etas, b.samples, seed, &QpOptions::default())?;
            let mut out = Outputs::new(name, cfg)?;
            out.csv("staircase.csv", &e.table())?;
            let mut plot = Plot::new("zero-weight fraction along eta", "eta", "n0")
                .log_x()
                .with(Series::line("analytic", etas.iter().cloned().zip(e.analytic_n0.iter().cloned()).collect()))
                .with(Series::markers("mean", etas.iter().cloned().zip(e.mean_n0.iter().map(|s| s.mean)).collect()));
            for s in e.staircases.iter().take(2) {
                plot = plot.with(Series::steps(format!("seed {}", s.seed), etas.iter().cloned().zip(s.n0.iter().cloned()).collect()));
            }
            out.svg("staircase.svg", &plot)?;
            out.json("staircase.json", &e)?;
            out.finish()?;
        }
        Command::Feasibility { n, t, samples, scan_t } => {
            if let Some(n) = n {
                cfg.feasibility.n = n;
            }
            if let Some(t) = t {
                cfg.feasibility.t = t;
            }
            if let Some(s) = samples {
                cfg.feasibility.samples = s;
            }
            if let Some(s) = scan_t {
                cfg.feasibility.scan_t = s;
            }
            let b = cfg.feasibility.clone();
            if b.scan_t.is_empty() {
                let tally = feasibility_frequency(b.n, b.t, b.samples, seed)?;
                let decided = tally.feasible + tally.infeasible;
                let (lo, hi) = lasso_replica::experiments::wilson_interval(tally.feasible, decided, 1.959963984540054);
                let exact = vanishing_variance_probability(b.n as u64, b.t as u64);
                let report = serde_json::json!({
                    "n": b.n,
                    "t": b.t,
                    "exact": tally.exact,
                    "exact_fraction": exact.to_string(),
                    "frequency": tally.frequency,
                    "standard_error": tally.standard_error,
                    "ci95": [lo, hi],
                    "feasible": tally.feasible,
                    "infeasible": tally.infeasible,
                    "indeterminate": tally.indeterminate,
                });
                println!("{}", serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?);
                let mut out = Outputs::new(name, cfg)?;
                out.json("feasibility.json", &report)?;
                out.finish()?;
            } else {
                let rows = phase_transition_scan(&b.scan_t, &b.multipliers, b.samples, seed)?;
                let mut out = Outputs::new(name, cfg)?;
                out.csv("phase.csv", &phase_table(&rows))?;
                let mut plot = Plot::new("vanishing-variance probability", "N/T", "p");
                for &t in &b.scan_t {
                    let sel: Vec<_> = rows.iter().filter(|r| r.tally.t == t).collect();
                    let ratio = |r: &&lasso_replica::experiments::PhaseRow| r.tally.n as f64 / t as f64;
                    plot = plot
                        .with(Series::line(format!("exact T={t}"), sel.iter().map(|r| (ratio(r), r.tally.exact)).collect()))
                        .with(Series::markers(format!("MC T={t}"), sel.iter().map(|r| (ratio(r), r.tally.frequency)).collect()));
                }
                out.svg("phase.svg", &plot)?;
                out.json("phase.json", &rows)?;
                out.finish()?;
            }
        }
        Command::Selftest => {
            let reports = acceptance::run_all();
            for r in &reports {
                println!("{r}");
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            println!("{} of {} criteria passed", reports.len() - failed, reports.len());
            let mut out = Outputs::new(name, cfg)?;
            out.csv("selftest_simulation.csv", &acceptance::simulation_table(SUITE_SEED)?)?;
            let summary: Vec<_> = reports
                .iter()
                .map(|r| serde_json::json!({ "criterion": r.id, "title": r.title, "passed": r.passed, "detail": r.detail }))
                .collect();
            out.json("selftest.json", &summary)?;
            out.finish()?;
            if failed > 0 {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::FlatLandscape { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
