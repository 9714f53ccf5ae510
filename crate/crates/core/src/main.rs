//! Command-line driver. Every subcommand takes `--config <path>` (a config
//! file or a manifest.json from a previous run), writes CSV plus a manifest
//! into the output directory, and exits nonzero with a JSON error record on
//! stderr when anything fails.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wgm_rotor_core::cli::config::{load_config, load_validate_settings, ExperimentKind, ValidateSettings};
use wgm_rotor_core::cli::manifest::{looks_like_manifest, RunManifest, MANIFEST_FILE};
use wgm_rotor_core::cli::table::{Cell, Table};
use wgm_rotor_core::cli::validate::run_suite;
use wgm_rotor_core::cli::{run, CliError};

#[derive(Parser)]
#[command(
    name = "wgm-rotor",
    version,
    about = "Chiral rotation instability of a scatterer in a ring resonator: \
             torque curves, bifurcation diagrams, time evolution, and probe spectra"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Config file, or a manifest.json from a previous run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's [output] out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render an SVG plot next to the CSV.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Optional config or manifest carrying [validate] settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for validate.csv and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of randomized draws across the whole suite.
    #[arg(long)]
    draws: Option<u32>,
    /// Seed for the draw generator.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Averaged recoil torque and damping line versus rotation speed.
    TorqueCurve(RunArgs),
    /// Saturated rotation speed versus pump power.
    Bifurcation(RunArgs),
    /// Integrate the reduced or full equations from a velocity seed.
    TimeEvolution(RunArgs),
    /// Saturated Doppler shift over the (detuning, power) plane.
    PhaseDiagram(RunArgs),
    /// Direction-resolved probe spectra at a fixed rotation speed.
    Spectra(RunArgs),
    /// Peak backscattering asymmetry versus pump power.
    Asymmetry(RunArgs),
    /// Threshold photon number versus detuning.
    Threshold(RunArgs),
    /// Brute-force torque average checked against the closed form.
    OracleCheck(RunArgs),
    /// Randomized self-checks of the library's exact and asymptotic laws.
    Validate(ValidateArgs),
}

fn main() -> ExitCode {
    let result = match Cli::parse().cmd {
        Cmd::TorqueCurve(a) => run_experiment(ExperimentKind::TorqueCurve, a),
        Cmd::Bifurcation(a) => run_experiment(ExperimentKind::Bifurcation, a),
        Cmd::TimeEvolution(a) => run_experiment(ExperimentKind::TimeEvolution, a),
        Cmd::PhaseDiagram(a) => run_experiment(ExperimentKind::PhaseDiagram, a),
        Cmd::Spectra(a) => run_experiment(ExperimentKind::Spectra, a),
        Cmd::Asymmetry(a) => run_experiment(ExperimentKind::Asymmetry, a),
        Cmd::Threshold(a) => run_experiment(ExperimentKind::Threshold, a),
        Cmd::OracleCheck(a) => run_experiment(ExperimentKind::OracleCheck, a),
        Cmd::Validate(a) => run_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.json_record());
            ExitCode::FAILURE
        }
    }
}

fn read_config(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))
}

/// Unwraps manifest input to its embedded config text, checking that the
/// manifest was produced by the same subcommand.
fn config_text(text: String, expected: &str) -> Result<String, CliError> {
    if !looks_like_manifest(&text) {
        return Ok(text);
    }
    let man = RunManifest::from_json(&text)?;
    if man.experiment != expected {
        return Err(CliError::Config {
            line: None,
            message: format!(
                "manifest records experiment {} but the subcommand runs {expected}",
                man.experiment
            ),
        });
    }
    Ok(man.resolved_config)
}

fn run_experiment(kind: ExperimentKind, args: RunArgs) -> Result<(), CliError> {
    let text = config_text(read_config(&args.config)?, kind.config_name())?;
    let mut cfg = load_config(&text, kind)?;
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    if args.svg {
        cfg.emit_svg = true;
    }
    let man = run(&cfg)?;
    for o in &man.outputs {
        println!("wrote {}", cfg.out_dir.join(&o.file).display());
    }
    println!("wrote {}", cfg.out_dir.join(MANIFEST_FILE).display());
    Ok(())
}

fn run_validate(args: ValidateArgs) -> Result<(), CliError> {
    let mut settings = match &args.config {
        None => ValidateSettings::default(),
        Some(path) => {
            let text = config_text(read_config(path)?, "Validate")?;
            load_validate_settings(&text)?
        }
    };
    if let Some(out) = args.out {
        settings.out_dir = out;
    }
    if let Some(draws) = args.draws {
        if draws == 0 {
            return Err(CliError::Config {
                line: None,
                message: "--draws must be at least 1".to_string(),
            });
        }
        settings.draws = draws;
    }
    if let Some(seed) = args.seed {
        settings.seed = seed;
    }

    let report = run_suite(settings.draws, settings.seed, &settings.out_dir.join("self-check"));
    let mut table = Table::new(&[
        "module[.]",
        "property[.]",
        "draws[1]",
        "metric[1]",
        "tolerance[1]",
        "pass[0/1]",
    ]);
    table.comment(format!("draws={} seed={}", report.draws, report.seed));
    let mut failed_names = Vec::new();
    for o in &report.outcomes {
        println!(
            "{} {}/{} draws={} metric={:.3e} tol={:.1e}",
            if o.pass { "ok  " } else { "FAIL" },
            o.module,
            o.name,
            o.draws,
            o.metric,
            o.tol
        );
        table.row(vec![
            Cell::S(o.module.to_string()),
            Cell::S(o.name.to_string()),
            Cell::U(o.draws as usize),
            Cell::F(o.metric),
            Cell::F(o.tol),
            Cell::B(o.pass),
        ]);
        if !o.pass {
            failed_names.push(format!("{}/{}", o.module, o.name));
        }
    }

    fs::create_dir_all(&settings.out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", settings.out_dir.display())))?;
    let mut man = RunManifest::new("Validate", settings.render_resolved());
    let csv = table.render().into_bytes();
    let csv_path = settings.out_dir.join("validate.csv");
    fs::write(&csv_path, &csv)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", csv_path.display())))?;
    man.record("validate.csv", &csv);
    let man_path = settings.out_dir.join(MANIFEST_FILE);
    fs::write(&man_path, man.to_json())
        .map_err(|e| CliError::Io(format!("writing {}: {e}", man_path.display())))?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", man_path.display());

    if failed_names.is_empty() {
        Ok(())
    } else {
        Err(CliError::ValidationFailed {
            failed: failed_names.len(),
            total: report.outcomes.len(),
            names: failed_names.join(", "),
        })
    }
}
