//! The `run` and `gibbs-curve` commands: trajectories, equilibrium curve and
//! the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context as _, Result};
use serde::Serialize;
use serde_json::{json, Value};

use toric_seaqt_core::lattice::hamiltonian;
use toric_seaqt_core::measures::{beta_star, equilibrium_curve, gibbs_state};

use crate::config::{Resolved, ScenarioConfig};
use crate::output::{gibbs_csv, gibbs_file_name, trajectory_document, trajectory_file_name, write_atomic};
use crate::runner::{run_sweep, worker_count, Context, Mode, PairRun, TrajectoryRun};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Per-step tolerances applied to every run and recorded in the manifest.
pub const ENERGY_DRIFT_RELATIVE: f64 = 1e-8;
pub const ENTROPY_STEP_FLOOR: f64 = -1e-10;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub all_checks_passed: bool,
}

fn effective_config(config: &ScenarioConfig, options: &RunOptions) -> ScenarioConfig {
    let mut config = config.clone();
    if let Some(seed) = options.seed {
        config.perturbation.seed = seed;
    }
    if let Some(dir) = &options.out_dir {
        config.output.dir = dir.clone();
    }
    config
}

/// Writes the canonical `(β, e, s)` curve and returns its path.
pub fn write_gibbs_curve(resolved: &Resolved, out_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let h = hamiltonian(&resolved.lattice);
    let points = equilibrium_curve(&h, &resolved.beta_grid)?;
    let path = out_dir.join(gibbs_file_name(&resolved.lattice_tag()));
    write_atomic(&path, gibbs_csv(&points).as_bytes())?;
    Ok(path)
}

pub fn gibbs_curve_command(config: &ScenarioConfig, options: &RunOptions) -> Result<PathBuf> {
    let config = effective_config(config, options);
    let resolved = config.resolve()?;
    write_gibbs_curve(&resolved, &config.output.dir)
}

/// Summary statistics of one trajectory against the per-step tolerances.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryCheck {
    pub file: String,
    pub mode: &'static str,
    pub p_x: f64,
    pub energy_drift: f64,
    pub energy_drift_ok: Option<bool>,
    pub min_entropy_increment: f64,
    pub entropy_monotone: Option<bool>,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
    pub final_beta: Option<f64>,
    pub final_beta_gap: Option<f64>,
    pub final_distance_to_equilibrium: Option<f64>,
    pub final_magnetization: f64,
    pub seconds: f64,
}

impl TrajectoryCheck {
    pub fn passed(&self) -> bool {
        self.energy_drift_ok.unwrap_or(true) && self.entropy_monotone.unwrap_or(true)
    }
}

pub fn trajectory_check(ctx: &Context, run: &TrajectoryRun, p_x: f64, file: String) -> Result<TrajectoryCheck> {
    let fine = &run.trajectory.fine;
    let e0 = fine.energy[0];
    let energy_drift = fine.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    let min_entropy_increment = fine.entropy.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let last = run.trajectory.final_moments();
    let isolated = run.mode == Mode::Isolated;
    let final_distance_to_equilibrium = if isolated {
        let beta = if last.is_energy_degenerate() { 0.0 } else { beta_star(ctx.hamiltonian.op(), e0)? };
        let gibbs = gibbs_state(ctx.hamiltonian.op(), beta)?;
        Some(toric_seaqt_core::hermitian::trace_distance(&run.final_state, &gibbs)?)
    } else {
        None
    };
    Ok(TrajectoryCheck {
        file,
        mode: run.mode.name(),
        p_x,
        energy_drift,
        energy_drift_ok: isolated.then(|| energy_drift <= ENERGY_DRIFT_RELATIVE * (1.0 + e0.abs())),
        min_entropy_increment,
        entropy_monotone: isolated.then_some(min_entropy_increment >= ENTROPY_STEP_FLOOR),
        max_trace_error: fine.trace_error.iter().copied().fold(0.0, f64::max),
        min_eigenvalue: fine.min_eigenvalue.iter().copied().fold(f64::INFINITY, f64::min),
        final_beta: last.beta,
        final_beta_gap: match (run.mode, last.beta) {
            (Mode::Reservoir, Some(b)) => Some((b - ctx.resolved.beta_r).abs()),
            _ => None,
        },
        final_distance_to_equilibrium,
        final_magnetization: run.rows.last().map_or(f64::NAN, |r| r.record.magnetization),
        seconds: run.seconds,
    })
}

fn manifest_base(config: &ScenarioConfig, resolved: Option<&Resolved>, threads: usize) -> Value {
    json!({
        "code_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "resolved": resolved.map(|r| json!({
            "lattice": [r.lattice.rows(), r.lattice.cols()],
            "n_qubits": r.lattice.n_qubits(),
            "site": r.specs.first().map(|s| s.site),
            "region_a": r.region_a,
            "negativity_subsystem": r.negativity_subsystem,
            "n_steps": r.params.n_steps(),
        })),
        "threads": threads,
    })
}

fn write_manifest(path: &Path, manifest: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Runs every trajectory of the configuration and writes the trajectory
/// files, the equilibrium curve and the manifest. On failure a manifest
/// with `"status": "failed"` and the error chain is still written.
pub fn run_command(config: &ScenarioConfig, options: &RunOptions) -> Result<RunSummary> {
    let start = Instant::now();
    let config = effective_config(config, options);
    let out_dir = config.output.dir.clone();
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let threads = worker_count(options.threads);

    let resolved = match config.resolve() {
        Ok(r) => r,
        Err(err) => {
            let mut manifest = manifest_base(&config, None, threads);
            manifest["status"] = json!("failed");
            manifest["error"] = json!(format!("{err:#}"));
            write_manifest(&manifest_path, &manifest)?;
            return Err(err);
        }
    };

    let outcome = (|| -> Result<(Vec<PathBuf>, Value, bool)> {
        let curve_start = Instant::now();
        let curve = write_gibbs_curve(&resolved, &out_dir)?;
        let curve_seconds = curve_start.elapsed().as_secs_f64();
        let ctx = Context::new(resolved.clone())?;
        let sweep_start = Instant::now();
        let pairs = run_sweep(&ctx, threads)?;
        let sweep_seconds = sweep_start.elapsed().as_secs_f64();
        let (files, checks) = write_pairs(&ctx, &pairs, &out_dir)?;
        let all_passed = checks.iter().all(TrajectoryCheck::passed);
        let mut files_out = files;
        files_out.push(curve);
        let details = json!({
            "initial_states": pairs.iter().map(|p| json!({"p_x": p.p_x, "sha256": p.initial_hash})).collect::<Vec<_>>(),
            "timings": {
                "gibbs_curve_seconds": curve_seconds,
                "trajectories_wall_seconds": sweep_seconds,
                "trajectories": checks.iter().map(|c| json!({"file": c.file, "seconds": c.seconds})).collect::<Vec<_>>(),
            },
            "validation": {
                "energy_drift_relative_tolerance": ENERGY_DRIFT_RELATIVE,
                "entropy_step_floor": ENTROPY_STEP_FLOOR,
                "all_passed": all_passed,
                "trajectories": checks,
            },
        });
        Ok((files_out, details, all_passed))
    })();

    let mut manifest = manifest_base(&config, Some(&resolved), threads);
    match outcome {
        Ok((files, details, all_passed)) => {
            manifest["status"] = json!("completed");
            manifest["files"] = json!(files
                .iter()
                .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect::<Vec<_>>());
            for (k, v) in details.as_object().expect("object literal") {
                manifest[k] = v.clone();
            }
            manifest["timings"]["total_seconds"] = json!(start.elapsed().as_secs_f64());
            write_manifest(&manifest_path, &manifest)?;
            Ok(RunSummary { out_dir, files, manifest: manifest_path, all_checks_passed: all_passed })
        }
        Err(err) => {
            manifest["status"] = json!("failed");
            manifest["error"] = json!(format!("{err:#}"));
            manifest["timings"] = json!({"total_seconds": start.elapsed().as_secs_f64()});
            write_manifest(&manifest_path, &manifest)?;
            Err(err)
        }
    }
}

fn write_pairs(ctx: &Context, pairs: &[PairRun], out_dir: &Path) -> Result<(Vec<PathBuf>, Vec<TrajectoryCheck>)> {
    let tag = ctx.resolved.lattice_tag();
    let format = ctx.resolved.config.output.format;
    let mut files = Vec::new();
    let mut checks = Vec::new();
    for pair in pairs {
        for mode in [Mode::Isolated, Mode::Reservoir] {
            let run = pair.member(mode);
            let name = trajectory_file_name(&tag, pair.p_x, mode, format);
            let path = out_dir.join(&name);
            write_atomic(&path, trajectory_document(&run.rows, format).as_bytes())?;
            checks.push(trajectory_check(ctx, run, pair.p_x, name)?);
            files.push(path);
        }
    }
    Ok((files, checks))
}
