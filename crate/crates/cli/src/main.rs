//! `imts`: simulate faults, assess machine-by-machine stability, search the
//! critical clearing time and build potential-energy surfaces.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use imts_core::assessment::{analyze, SwingMode};
use imts_core::case::{load_case, solve_postfault_sep, StabilityCase};
use imts_core::cct::{find_cct, scan_cct, summarize_scan, CctOptions};
use imts_core::dynamics::{simulate, SimulationConfig};
use imts_core::energy::compute_energy;
use imts_core::export::{self, RunManifest, VerdictDocument};
use imts_core::surface::{surface_from_trajectories, surface_grid, SurfaceSpec, Window};
use serde_json::json;

use config::{required, FamilyMember, FileConfig, Sweep};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "IMTS_THREADS";

const EXIT_UNSTABLE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "imts", version, about = "Individual-machine transient stability toolkit")]
struct Cli {
    /// JSON settings file; explicit flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one fault scenario and write the trajectory table.
    Simulate(SimulateArgs),
    /// Assess every machine and the system; exit 0 if stable, 2 if unstable.
    Assess(AssessArgs),
    /// Find the critical clearing time by bisection.
    Cct(CctArgs),
    /// Build an individual-machine potential-energy surface.
    Surface(SurfaceArgs),
}

#[derive(Args)]
struct TimeArgs {
    /// Fault clearing time, s.
    #[arg(long)]
    t_clear: Option<f64>,
    /// Simulation horizon, s.
    #[arg(long)]
    t_end: Option<f64>,
    /// Integration step, s.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    case: PathBuf,
    #[command(flatten)]
    time: TimeArgs,
    /// Trajectory CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AssessArgs {
    case: PathBuf,
    #[command(flatten)]
    time: TimeArgs,
    /// Directory for events, margins and verdict files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Judge each machine on its first swing only.
    #[arg(long)]
    first_swing: bool,
}

#[derive(Args)]
struct CctArgs {
    case: PathBuf,
    /// Clearing time expected to be stable, s.
    #[arg(long)]
    t_lo: Option<f64>,
    /// Clearing time expected to be unstable, s.
    #[arg(long)]
    t_hi: Option<f64>,
    /// Bisection resolution, s.
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Post-clearing window per probe, s.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    first_swing: bool,
    /// Also evaluate every grid point and check the verdicts are monotone.
    #[arg(long)]
    scan: bool,
    /// Result document; the margin curve goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SurfaceMode {
    Grid,
    Trajectories,
}

#[derive(Args)]
struct SurfaceArgs {
    case: PathBuf,
    /// Machine whose potential energy is plotted.
    #[arg(long)]
    focus: Option<usize>,
    /// Two machines spanning the angle plane, e.g. `1,2`.
    #[arg(long, value_delimiter = ',')]
    axes: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    mode: Option<SurfaceMode>,
    /// Grid points per axis.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Grid half-width around the post-fault equilibrium, rad.
    #[arg(long)]
    half_width: Option<f64>,
    /// Clearing-time sweep `FROM:TO:STEP` for trajectory mode, s.
    #[arg(long)]
    sweep: Option<String>,
    /// Post-clearing window per trajectory, s.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Completed command: status code plus files written.
struct Outcome {
    code: u8,
    outputs: Vec<PathBuf>,
    config: serde_json::Value,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            let diverged = matches!(
                err.downcast_ref::<imts_core::Error>(),
                Some(imts_core::Error::Diverged { .. })
            );
            ExitCode::from(if diverged { EXIT_DIVERGED } else { 1 })
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        bail!("{THREADS_ENV} must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure the thread pool")
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads()?;
    let file = FileConfig::load(cli.config.as_deref())?;
    let started = Instant::now();
    let (name, case_path, manifest_path, outcome) = match &cli.command {
        Command::Simulate(a) => {
            let out = required(a.out.clone(), file.out.clone(), "out")?;
            ("simulate", &a.case, sibling(&out, "manifest.json"), cmd_simulate(a, &file, &out)?)
        }
        Command::Assess(a) => {
            let dir = required(a.out_dir.clone(), file.out_dir.clone(), "out-dir")?;
            ("assess", &a.case, dir.join("manifest.json"), cmd_assess(a, &file, &dir)?)
        }
        Command::Cct(a) => {
            let out = required(a.out.clone(), file.out.clone(), "out")?;
            ("cct", &a.case, sibling(&out, "manifest.json"), cmd_cct(a, &file, &out)?)
        }
        Command::Surface(a) => {
            let out = required(a.out.clone(), file.out.clone(), "out")?;
            ("surface", &a.case, sibling(&out, "manifest.json"), cmd_surface(a, &file, &out)?)
        }
    };
    let manifest = RunManifest {
        command: name.into(),
        case_path: case_path.display().to_string(),
        config: outcome.config,
        outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    write_file(&manifest_path, |w| export::write_json(w, &manifest))?;
    Ok(outcome.code)
}

/// `path` with its extension replaced by `suffix`, e.g. `run.csv` → `run.manifest.json`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).with_context(|| format!("cannot write {}", path.display()))
}

fn load(path: &Path) -> Result<StabilityCase> {
    load_case(path).map_err(anyhow::Error::from)
}

fn sim_config(t: &TimeArgs, file: &FileConfig) -> Result<SimulationConfig> {
    let t_clear = required(t.t_clear, file.t_clear, "t-clear")?;
    let t_end = required(t.t_end, file.t_end, "t-end")?;
    let dt = t.dt.or(file.dt).unwrap_or(1e-3);
    let cfg = SimulationConfig::new(t_clear, t_end).with_dt(dt);
    cfg.steps()?;
    Ok(cfg)
}

fn cmd_simulate(a: &SimulateArgs, file: &FileConfig, out: &Path) -> Result<Outcome> {
    let case = load(&a.case)?;
    let cfg = sim_config(&a.time, file)?;
    let traj = simulate(&case, &cfg)?;
    let energy = compute_energy(&case, &traj, &solve_postfault_sep(&case));
    write_file(out, |w| export::write_trajectory(w, &traj, &energy))?;
    println!("wrote {} samples to {}", traj.len(), out.display());
    let code = match traj.diverged_at {
        Some(t) => {
            eprintln!("error: simulation diverged at {t} s; trajectory truncated");
            EXIT_DIVERGED
        }
        None => 0,
    };
    Ok(Outcome {
        code,
        outputs: vec![out.to_path_buf()],
        config: json!({ "t_clear": cfg.t_clear, "t_end": cfg.t_end, "dt": cfg.dt }),
    })
}

fn cmd_assess(a: &AssessArgs, file: &FileConfig, dir: &Path) -> Result<Outcome> {
    let case = load(&a.case)?;
    let cfg = sim_config(&a.time, file)?;
    let first_swing = a.first_swing || file.first_swing.unwrap_or(false);
    let mode = if first_swing { SwingMode::FirstSwing } else { SwingMode::All };
    let sep = solve_postfault_sep(&case);
    let analysis = analyze(&case, &sep, &cfg, mode)?;

    let events = dir.join("events.jsonl");
    let margins = dir.join("margins.csv");
    let verdict = dir.join("verdict.json");
    write_file(&events, |w| export::write_events(w, &analysis.system.timeline))?;
    write_file(&margins, |w| export::write_margins(w, &analysis.machines))?;
    let doc = VerdictDocument::new(&case.label, cfg.t_clear, cfg.t_end, &analysis.system, &analysis.machines);
    write_file(&verdict, |w| export::write_json(w, &doc))?;
    print!("{}", export::render_verdict(&analysis.system, &analysis.machines));

    Ok(Outcome {
        code: if analysis.system.stable { 0 } else { EXIT_UNSTABLE },
        outputs: vec![events, margins, verdict],
        config: json!({ "t_clear": cfg.t_clear, "t_end": cfg.t_end, "dt": cfg.dt, "first_swing": first_swing }),
    })
}

fn cmd_cct(a: &CctArgs, file: &FileConfig, out: &Path) -> Result<Outcome> {
    let case = load(&a.case)?;
    let t_lo = required(a.t_lo, file.t_lo, "t-lo")?;
    let t_hi = required(a.t_hi, file.t_hi, "t-hi")?;
    let resolution = a.resolution.or(file.resolution).unwrap_or(1e-3);
    let first_swing = a.first_swing || file.first_swing.unwrap_or(false);
    let opts = CctOptions {
        dt: a.dt.or(file.dt).unwrap_or(1e-3),
        horizon: a.horizon.or(file.horizon).unwrap_or(3.0),
        mode: if first_swing { SwingMode::FirstSwing } else { SwingMode::All },
    };
    let result = find_cct(&case, &opts, t_lo, t_hi, resolution)?;
    if a.scan || file.scan.unwrap_or(false) {
        let summary = summarize_scan(&scan_cct(&case, &opts, t_lo, t_hi, resolution)?)?;
        if let Err(e) = summary.require_monotone() {
            eprintln!("warning: {e}");
        }
        if (summary.cct - result.cct).abs() > 1e-12 {
            bail!(
                "exhaustive scan gives CCT {} s but bisection gives {} s",
                summary.cct,
                result.cct
            );
        }
        println!("exhaustive scan agrees");
    }

    let curve = sibling(out, "margin.txt");
    write_file(out, |w| export::write_cct(w, &result))?;
    write_file(&curve, |w| export::write_margin_curve(w, &result.margin_curve))?;
    println!("CCT = {:.3} s (unstable at {:.3} s)", result.cct, result.cct_unstable);
    println!(
        "MDM = machine {}{}",
        result.mdm,
        if result.mdm_consistent { "" } else { " (stable-side margin check disagrees)" }
    );
    println!("critical energy = {:.6} p.u.", result.critical_energy);
    println!("evaluations = {}", result.evaluations);

    Ok(Outcome {
        code: 0,
        outputs: vec![out.to_path_buf(), curve],
        config: json!({
            "t_lo": t_lo, "t_hi": t_hi, "resolution": resolution,
            "dt": opts.dt, "horizon": opts.horizon, "first_swing": first_swing,
        }),
    })
}

fn cmd_surface(a: &SurfaceArgs, file: &FileConfig, out: &Path) -> Result<Outcome> {
    let case = load(&a.case)?;
    let focus = required(a.focus, file.focus, "focus")?;
    let axes = match (&a.axes, file.axes) {
        (Some(v), _) => match v.as_slice() {
            [x, y] => (*x, *y),
            _ => bail!("--axes takes exactly two machine indices, e.g. 1,2"),
        },
        (None, Some([x, y])) => (x, y),
        (None, None) => bail!("missing required setting --axes (flag or config file)"),
    };
    let mode = match (a.mode, file.mode.as_deref()) {
        (Some(m), _) => m,
        (None, Some("grid")) | (None, None) => SurfaceMode::Grid,
        (None, Some("trajectories")) => SurfaceMode::Trajectories,
        (None, Some(other)) => bail!("unknown surface mode `{other}` in config"),
    };
    let grid_n = a.grid_n.or(file.grid_n).unwrap_or(81);
    let half_width = a.half_width.or(file.half_width).unwrap_or(2.0);

    let mut spec = SurfaceSpec {
        focus,
        axes,
        window: None,
        grid_n,
        family: Vec::new(),
    };
    let config;
    match mode {
        SurfaceMode::Grid => {
            let sep = solve_postfault_sep(&case);
            if case.n_machines() == 3 && sep.converged {
                spec.window = Some(Window::centered(&sep, axes, half_width));
            }
            let grid = surface_grid(&case, &spec)?;
            write_file(out, |w| export::write_surface_grid(w, &grid))?;
            report_range(grid.pe.iter().copied(), grid.xs.len() * grid.ys.len());
            config = json!({ "mode": "grid", "focus": focus, "axes": [axes.0, axes.1],
                             "grid_n": grid_n, "half_width": half_width });
        }
        SurfaceMode::Trajectories => {
            let opts = CctOptions {
                dt: a.dt.or(file.dt).unwrap_or(1e-3),
                horizon: a.horizon.or(file.horizon).unwrap_or(3.0),
                mode: SwingMode::All,
            };
            let members: Vec<FamilyMember> = match (&a.sweep, file.sweep, &file.family) {
                (Some(text), _, _) => sweep_members(Sweep::parse(text)?, &opts)?,
                (None, Some(s), _) => sweep_members(s, &opts)?,
                (None, None, Some(list)) => list.clone(),
                (None, None, None) => Vec::new(),
            };
            spec.family = members
                .iter()
                .map(|m| SimulationConfig::new(m.t_clear, m.t_end).with_dt(opts.dt))
                .collect();
            let samples = surface_from_trajectories(&case, &spec)?;
            write_file(out, |w| export::write_surface_ribbons(w, &samples))?;
            report_range(samples.iter().map(|s| s.pe), samples.len());
            config = json!({ "mode": "trajectories", "focus": focus, "axes": [axes.0, axes.1],
                             "dt": opts.dt, "family": members });
        }
    }
    Ok(Outcome {
        code: 0,
        outputs: vec![out.to_path_buf()],
        config,
    })
}

fn sweep_members(sweep: Sweep, opts: &CctOptions) -> Result<Vec<FamilyMember>> {
    sweep
        .values()?
        .into_iter()
        .map(|t| {
            let cfg = opts.config_for(t)?;
            Ok(FamilyMember {
                t_clear: cfg.t_clear,
                t_end: cfg.t_end,
            })
        })
        .collect()
}

fn report_range(values: impl Iterator<Item = f64>, count: usize) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    println!("{count} samples, pe in [{lo:.6}, {hi:.6}] p.u.");
}
