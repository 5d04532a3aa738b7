//! Command-line driver: IVP simulation, orbit continuation, reduction grids,
//! energy sweeps, geometric audits, and the selftest battery.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};
use serde_json::json;

use hypermag::curvature::parse_selector;
use hypermag::flow::{self, FlowState, IntegratorConfig, Method};
use hypermag::hyperboloid::HPoint;
use hypermag::minkowski::MVec3;
use hypermag::reduction::{find_reduced_zero, write_h_grid_csv, CenterChart};
use hypermag::selftest;
use hypermag::solver::{
    seed_from_reduced_zero, solve_orbit, sweep_energy, OrbitRecord, PerturbationSpec,
    ShootingSection,
};
use hypermag::store::{
    append_record, read_records, RecordKind, RunConfig, StoreRecord, STORE_ENV,
};
use hypermag::{audit, Curvature};

#[derive(Parser)]
#[command(name = "hypermag", version, about = "Magnetic geodesics on the hyperbolic plane")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate an initial-value problem and write the trajectory CSV
    Simulate {
        /// Constant part of the curvature
        #[arg(long)]
        k0: f64,
        /// Perturbation selector (e.g. linear-e3, quad-e3, const:2.0)
        #[arg(long)]
        k1: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Integration time span
        #[arg(long = "T", default_value_t = 20.0)]
        t_span: f64,
        /// Adaptive RK45 tolerance (default when --step is absent)
        #[arg(long)]
        tol: Option<f64>,
        /// Fixed RK4 step; overrides --tol
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 1024)]
        samples: usize,
        /// Output CSV path (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for a closed orbit of k₀ + ε k₁ seeded by the reduced zero
    Orbit {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        k1: String,
        #[arg(long)]
        eps: f64,
        /// Newton starting guess for the reduced zero
        #[arg(long, default_value_t = 0.01)]
        x0: f64,
        #[arg(long, default_value_t = 0.01)]
        y0: f64,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Reduced-field grid CSV plus a JSON zeros report
    Reduce {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        k1: String,
        #[arg(long, default_value_t = 8)]
        grid_n: usize,
        #[arg(long, default_value_t = 0.2)]
        grid_half_width: f64,
        #[arg(long, default_value_t = 0.01)]
        x0: f64,
        #[arg(long, default_value_t = 0.01)]
        y0: f64,
        /// Grid CSV path (stdout when absent; the zeros report always goes
        /// to stdout as JSON)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Solve the same seed across a halving ε-ladder
    Continue {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        k1: String,
        /// Largest ε of the ladder
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 0.01)]
        x0: f64,
        #[arg(long, default_value_t = 0.01)]
        y0: f64,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Energy trichotomy for constant curvature
    Sweep {
        #[arg(long, default_value_t = 1.0)]
        k0: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        c_values: Vec<f64>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Audit every stored orbit record
    Audit {
        #[arg(long)]
        store: Option<PathBuf>,
        /// Summary CSV path (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full invariant battery
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum AppError {
    Usage(String),
    Numeric(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Numeric(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Numeric(m) => m,
        }
    }
}

macro_rules! numeric_from {
    ($($t:ty),*) => {$(
        impl From<$t> for AppError {
            fn from(e: $t) -> Self {
                AppError::Numeric(e.to_string())
            }
        }
    )*};
}
numeric_from!(
    hypermag::solver::SolverError,
    hypermag::flow::FlowError,
    hypermag::reduction::ReductionError,
    hypermag::audit::AuditError,
    hypermag::curvature::CurvatureError
);

impl From<hypermag::store::StoreError> for AppError {
    fn from(e: hypermag::store::StoreError) -> Self {
        AppError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Usage(e.to_string())
    }
}

/// Print a line to stdout, ignoring a closed pipe (e.g. `... | head`).
fn emit(line: std::fmt::Arguments) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn store_path(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(STORE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("hypermag.jsonl"))
}

fn effective_curvature(k0: f64, k1: &Option<String>, eps: f64) -> Result<Curvature, AppError> {
    let base = Curvature::Constant(k0);
    Ok(match k1 {
        Some(sel) => Curvature::sum(base, Curvature::scale(eps, parse_selector(sel)?)),
        None => base,
    })
}

fn write_out<F>(out: &Option<PathBuf>, f: F) -> Result<(), AppError>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    match out {
        Some(path) => std::fs::write(path, buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

/// Solve one orbit from the reduced zero at the given guess; returns the
/// record together with the section needed to regenerate its trace.
fn solve_one(
    r: f64,
    k1_sel: &str,
    eps: f64,
    guess: (f64, f64),
) -> Result<(OrbitRecord, ShootingSection), AppError> {
    let chart = CenterChart::at_point(HPoint::origin());
    let k1 = parse_selector(k1_sel)?;
    let zero = find_reduced_zero(&chart, r, &k1, guess)?;
    let (section, seed) = seed_from_reduced_zero(&chart, r, &zero)?;
    let spec = PerturbationSpec::new((1.0 + r * r).sqrt() / r, k1, eps);
    let rec = solve_orbit(&spec, &section, &seed, Some(&zero))?;
    Ok((rec, section))
}

fn orbit_payload(rec: &OrbitRecord, section: &ShootingSection) -> serde_json::Value {
    json!({
        "record": rec,
        "section": section,
    })
}

fn append_orbit(
    store: &Path,
    cfg: &RunConfig,
    rec: &OrbitRecord,
    section: &ShootingSection,
) -> Result<(), AppError> {
    let record = StoreRecord::new(RecordKind::Orbit, orbit_payload(rec, section), cfg);
    append_record(store, &record)?;
    Ok(())
}

/// Regenerate the trace of a stored orbit from its section and unknowns with
/// the solver's fixed-step integrator.
fn rebuild_curve(
    rec: &mut OrbitRecord,
    section: &ShootingSection,
) -> Result<(), AppError> {
    let state = section.state(&rec.unknowns)?;
    let k = Curvature::sum(
        Curvature::Constant(rec.k0),
        Curvature::scale(rec.epsilon, rec.k1.clone()),
    );
    let cfg = IntegratorConfig {
        method: Method::Rk4 { step: 1.0 / 4096.0 },
        renormalize: true,
        samples: 256,
    };
    let traj = flow::integrate(&state, &k, 1.0, &cfg)?;
    rec.curve = Some(traj.curve);
    Ok(())
}

fn run(cmd: Cmd) -> Result<(), AppError> {
    match cmd {
        Cmd::Simulate { k0, k1, eps, t_span, tol, step, samples, out } => {
            if t_span <= 0.0 {
                return Err(AppError::Usage("T must be positive".into()));
            }
            let k = effective_curvature(k0, &k1, eps)?;
            let method = match (step, tol) {
                (Some(h), _) => Method::Rk4 { step: h },
                (None, t) => Method::Rk45 { tol: t.unwrap_or(1e-10) },
            };
            let cfg = IntegratorConfig { method, renormalize: true, samples };
            let s0 = FlowState::new(HPoint::origin(), MVec3::E1);
            let traj = flow::integrate(&s0, &k, t_span, &cfg)?;
            write_out(&out, |w| flow::write_trajectory_csv(w, &traj, &k))?;
        }
        Cmd::Orbit { r, k1, eps, x0, y0, store } => {
            let cfg = RunConfig {
                command: "orbit".into(),
                r: Some(r),
                eps: Some(eps),
                k1: Some(k1.clone()),
                ..Default::default()
            };
            cfg.validate()?;
            let (mut rec, section) = solve_one(r, &k1, eps, (x0, y0))?;
            rec.config_hash = format!("{:016x}", cfg.hash());
            append_orbit(&store_path(store), &cfg, &rec, &section)?;
            emit(format_args!(
                "orbit r={r} eps={eps} closure={:.3e} speed={:.12} mult={}",
                rec.closure_residual, rec.speed, rec.geometric_mult_one
            ));
        }
        Cmd::Reduce { r, k1, grid_n, grid_half_width, x0, y0, out, store } => {
            let cfg = RunConfig {
                command: "reduce".into(),
                r: Some(r),
                k1: Some(k1.clone()),
                grid_n: Some(grid_n),
                grid_half_width: Some(grid_half_width),
                ..Default::default()
            };
            let chart = CenterChart::at_point(HPoint::origin());
            let sel = parse_selector(&k1)?;
            write_out(&out, |w| {
                write_h_grid_csv(w, &chart, r, &sel, grid_n, grid_half_width)
                    .map_err(|e| std::io::Error::other(e.to_string()))
            })?;
            let zero = find_reduced_zero(&chart, r, &sel, (x0, y0))?;
            let payload = serde_json::to_value(&zero).expect("zero serializes");
            emit(format_args!("{}", serde_json::to_string_pretty(&payload).expect("renders")));
            append_record(
                &store_path(store),
                &StoreRecord::new(RecordKind::Reduction, payload, &cfg),
            )?;
        }
        Cmd::Continue { r, k1, eps, levels, x0, y0, store } => {
            if levels == 0 {
                return Err(AppError::Usage("levels must be at least 1".into()));
            }
            let store = store_path(store);
            for j in 0..levels {
                let e = eps / (1u64 << j) as f64;
                let cfg = RunConfig {
                    command: "continue".into(),
                    r: Some(r),
                    eps: Some(e),
                    k1: Some(k1.clone()),
                    ..Default::default()
                };
                let (mut rec, section) = solve_one(r, &k1, e, (x0, y0))?;
                rec.config_hash = format!("{:016x}", cfg.hash());
                append_orbit(&store, &cfg, &rec, &section)?;
                emit(format_args!(
                    "continue r={r} eps={e:.6e} closure={:.3e} speed={:.12} mult={}",
                    rec.closure_residual, rec.speed, rec.geometric_mult_one
                ));
            }
        }
        Cmd::Sweep { k0, c_values, store } => {
            let cfg = RunConfig {
                command: "sweep".into(),
                k0: Some(k0),
                c_values: Some(c_values.clone()),
                ..Default::default()
            };
            let entries = sweep_energy(&Curvature::Constant(k0), &c_values)?;
            for e in &entries {
                emit(format_args!("{}", serde_json::to_string(e).expect("entry serializes")));
            }
            append_record(
                &store_path(store),
                &StoreRecord::new(
                    RecordKind::Sweep,
                    serde_json::to_value(&entries).expect("entries serialize"),
                    &cfg,
                ),
            )?;
            if entries.iter().any(|e| !e.pass) {
                return Err(AppError::Numeric("sweep entry failed its check".into()));
            }
        }
        Cmd::Audit { store, out } => {
            let store = store_path(store);
            let cfg = RunConfig { command: "audit".into(), ..Default::default() };
            let orbits = read_records(&store, Some(RecordKind::Orbit), None)?;
            let mut lines = vec![
                "config_hash,eps,length,area,curvature_integral,gauss_bonnet_residual,winding,pass"
                    .to_string(),
            ];
            for stored in &orbits {
                let mut rec: OrbitRecord =
                    serde_json::from_value(stored.payload["record"].clone())
                        .map_err(|e| AppError::Usage(e.to_string()))?;
                let section: ShootingSection =
                    serde_json::from_value(stored.payload["section"].clone())
                        .map_err(|e| AppError::Usage(e.to_string()))?;
                rebuild_curve(&mut rec, &section)?;
                let report = audit::audit_record(&rec)?;
                lines.push(format!(
                    "{},{:e},{:.12e},{:.12e},{:.12e},{:.3e},{},{}",
                    stored.config_hash,
                    rec.epsilon,
                    report.length,
                    report.area,
                    report.curvature_integral,
                    report.gauss_bonnet_residual,
                    report.winding_number,
                    report.pass
                ));
                append_record(
                    &store,
                    &StoreRecord::new(
                        RecordKind::Audit,
                        serde_json::to_value(&report).expect("report serializes"),
                        &cfg,
                    ),
                )?;
            }
            write_out(&out, |w| {
                for line in &lines {
                    writeln!(w, "{line}")?;
                }
                Ok(())
            })?;
        }
        Cmd::Selftest { seed } => {
            let report = selftest::run_all(seed.unwrap_or(hypermag::DEFAULT_SEED));
            emit(format_args!("{}", report.render().trim_end()));
            if !report.pass {
                return Err(AppError::Numeric("selftest battery failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hypermag: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
