//! `strata` command-line driver.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 a check failed,
//! 4 the simulation failed.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use strata::calibration::{calibrate, CalibrationError, CalibrationSpec, StationProfileSet};
use strata::engine::{run_prepared, EngineError, PreparedRun};
use strata::grid::load_bathymetry;
use strata::scenario::{directional_checks, run_pair, ScenarioError, ScenarioFile};
use strata::synth::{fixture, Preset, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "strata", version, about = "Reservoir temperature and dissolved-oxygen simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a bathymetry file and report its storage.
    GridCheck {
        bathymetry: PathBuf,
        /// Fail when full-pool volume is more than 1% off this, m3.
        #[arg(long)]
        expected_capacity: Option<f64>,
        /// Where to write the area-volume curve.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a configuration and write stations, snapshots and balance.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit parameters to observed profiles.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        observations: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Concurrent engine runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a baseline and a flood run and compare them.
    Scenario {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Exit 3 unless every directional check in the spec holds.
        #[arg(long)]
        assert_directional: bool,
    },
    /// Write a synthetic reservoir (rajae, minab or twin).
    Synth {
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn input(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 4,
        error: error.into(),
    }
}

fn engine_failure(e: EngineError) -> Failure {
    match e {
        EngineError::Config(_) => input(e),
        other => runtime(other),
    }
}

fn scenario_failure(e: ScenarioError) -> Failure {
    match e {
        ScenarioError::Engine(e) => engine_failure(e),
        other => input(other),
    }
}

fn calibration_failure(e: CalibrationError) -> Failure {
    match e {
        CalibrationError::Engine(e) => engine_failure(e),
        other => input(other),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GridCheck {
            bathymetry,
            expected_capacity,
            out,
        } => grid_check(&bathymetry, expected_capacity, &out),
        Command::Run { config, out } => run(&config, out.as_deref()),
        Command::Calibrate {
            config,
            spec,
            observations,
            out,
            jobs,
        } => calibrate_cmd(&config, &spec, &observations, &out, jobs),
        Command::Scenario {
            config,
            spec,
            out,
            assert_directional,
        } => scenario(&config, &spec, &out, assert_directional),
        Command::Synth { preset, out, seed } => synth(preset, &out, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn grid_check(path: &Path, expected: Option<f64>, out: &Path) -> Result<(), Failure> {
    let grid = load_bathymetry(path).map_err(|e| input(anyhow::anyhow!("{}: {e}", path.display())))?;
    let top = grid.top_elevation_m();
    let volume = grid.total_volume(top).map_err(input)?;
    let area = grid.surface_area(top).map_err(input)?;
    println!("segments {}", grid.segment_count());
    println!("layers {}", grid.layer_count());
    println!("full-pool elevation {top} m");
    println!("full-pool volume {volume:.1} m3");
    println!("full-pool surface area {area:.1} m2");
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(input)?;
    let curve = out.join("area_volume.csv");
    File::create(&curve)
        .and_then(|f| grid.area_volume_curve().write_csv(f))
        .with_context(|| format!("writing {}", curve.display()))
        .map_err(input)?;
    println!("area-volume curve {}", curve.display());
    if let Some(cap) = expected {
        let rel = (volume - cap) / cap;
        let ok = rel.abs() <= 0.01;
        println!("capacity {} relative error {rel:+.5} against {cap}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            return Err(Failure {
                code: 3,
                error: anyhow::anyhow!("capacity off by {:.2}%", 100.0 * rel),
            });
        }
    }
    Ok(())
}

fn run(config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let prepared = PreparedRun::from_path(config).map_err(input)?;
    let output = run_prepared(&prepared).map_err(engine_failure)?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => prepared.config.resolve(&prepared.config.run.output_dir),
    };
    output.write_all(&dir).map_err(engine_failure)?;
    let a = &output.audit;
    println!(
        "audit volume {:.3e} heat {:.3e} oxygen {:.3e}",
        a.volume_error(),
        a.heat_error(),
        a.oxygen_error()
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn calibrate_cmd(config: &Path, spec: &Path, obs: &Path, out: &Path, jobs: usize) -> Result<(), Failure> {
    let prepared = PreparedRun::from_path(config).map_err(input)?;
    let spec = CalibrationSpec::load(spec).map_err(input)?;
    let obs = StationProfileSet::load(obs).map_err(input)?;
    if obs.is_empty() {
        return Err(input(anyhow::anyhow!("no observations")));
    }
    let result = calibrate(&spec, &prepared, &obs, jobs).map_err(calibration_failure)?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(input)?;
    let report = out.join("calibration_report.csv");
    File::create(&report)
        .and_then(|f| result.write_report(f))
        .with_context(|| format!("writing {}", report.display()))
        .map_err(input)?;
    let best = out.join("best_params.toml");
    std::fs::write(&best, result.best_toml())
        .with_context(|| format!("writing {}", best.display()))
        .map_err(input)?;
    let b = result.best();
    let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    println!("evaluations {}", result.evaluations());
    for (name, v) in result.best_params() {
        println!("{name} = {v}");
    }
    println!(
        "ame temp {} do {}  rmse temp {} do {}  objective {:.4}",
        show(b.metrics.temp.ame),
        show(b.metrics.oxygen.ame),
        show(b.metrics.temp.rmse),
        show(b.metrics.oxygen.rmse),
        b.objective
    );
    println!("wrote {} and {}", report.display(), best.display());
    Ok(())
}

fn scenario(config: &Path, spec: &Path, out: &Path, assert: bool) -> Result<(), Failure> {
    let prepared = PreparedRun::from_path(config).map_err(input)?;
    let file = ScenarioFile::load(spec).map_err(input)?;
    if assert && file.directional.is_none() {
        return Err(input(anyhow::anyhow!(
            "{} has no [directional] section to assert",
            spec.display()
        )));
    }
    let cmp = run_pair(&prepared, &file.flood, file.diagnostics).map_err(scenario_failure)?;
    cmp.write_all(out).map_err(scenario_failure)?;
    println!("wrote {}", out.display());
    if let Some(d) = &file.directional {
        let checks = directional_checks(&cmp, d);
        for c in &checks {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        if assert && checks.iter().any(|c| !c.passed) {
            return Err(Failure {
                code: 3,
                error: anyhow::anyhow!("directional checks failed"),
            });
        }
    }
    Ok(())
}

fn synth(preset: Preset, out: &Path, seed: u64) -> Result<(), Failure> {
    let f = fixture(preset, seed).map_err(runtime)?;
    f.write(out)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(runtime)?;
    println!("wrote {} fixture to {}", preset.name(), out.display());
    Ok(())
}
