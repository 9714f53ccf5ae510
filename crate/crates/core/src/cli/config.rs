//! Config file loading: a flat `key = value` format with fixed sections,
//! strict key checking, and every default materialized into the resolved
//! config that the run manifest embeds.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::cli::CliError;
use crate::dynamics::{IntegratorConfig, Scheme};
use crate::model::{
    DriveParams, MechParams, OpticalParams, PumpMode, SystemParams,
};

/// Sections an experiment config may contain, in canonical emission order.
const SECTIONS: [&str; 6] = ["optical", "drive", "mech", "experiment", "integrator", "output"];

fn err(line: Option<usize>, message: String) -> CliError {
    let message = match line {
        Some(n) => format!("line {n}: {message}"),
        None => message,
    };
    CliError::Config { line, message }
}

/// Raw parsed file: section -> key -> (value, line).
#[derive(Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

impl RawConfig {
    pub fn parse(text: &str, allow_validate_section: bool) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        let mut current: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(Some(line_no), format!("unterminated section header `{line}`")))?
                    .trim();
                let known = SECTIONS.contains(&name) || (allow_validate_section && name == "validate");
                if !known {
                    return Err(err(Some(line_no), format!("unknown section [{name}]")));
                }
                raw.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(Some(line_no), format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(err(Some(line_no), "empty key".to_string()));
            }
            let section = current
                .as_ref()
                .ok_or_else(|| err(Some(line_no), format!("key `{key}` appears before any [section]")))?;
            let entries = raw.sections.get_mut(section).expect("section registered");
            if entries.insert(key.to_string(), (value.to_string(), line_no)).is_some() {
                return Err(err(Some(line_no), format!("duplicate key `{key}` in [{section}]")));
            }
        }
        Ok(raw)
    }

    fn section(&mut self, name: &str) -> Section {
        Section {
            name: name.to_string(),
            entries: self.sections.remove(name).unwrap_or_default(),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some((name, entries)) = self.sections.into_iter().next() {
            let line = entries.values().map(|(_, l)| *l).min();
            return Err(err(line, format!("section [{name}] is not valid here")));
        }
        Ok(())
    }
}

/// One section's keys, consumed by `take`; leftovers are unknown-key errors.
struct Section {
    name: String,
    entries: BTreeMap<String, (String, usize)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => {
                let x: f64 = v
                    .parse()
                    .map_err(|_| err(Some(line), format!("key `{key}`: `{v}` is not a number")))?;
                if !x.is_finite() {
                    return Err(err(Some(line), format!("key `{key}`: value must be finite")));
                }
                Ok(Some(x))
            }
        }
    }

    fn f64_required(&mut self, key: &str) -> Result<f64, CliError> {
        self.f64(key)?
            .ok_or_else(|| err(None, format!("missing required key `{key}` in [{}]", self.name)))
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| err(Some(line), format!("key `{key}`: `{v}` is not a non-negative integer"))),
        }
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| err(Some(line), format!("key `{key}`: `{v}` is not a non-negative integer"))),
        }
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => match v.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                _ => Err(err(Some(line), format!("key `{key}`: expected true or false, got `{v}`"))),
            },
        }
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    let part = part.trim();
                    let x: f64 = part.parse().map_err(|_| {
                        err(Some(line), format!("key `{key}`: `{part}` is not a number"))
                    })?;
                    if !x.is_finite() {
                        return Err(err(Some(line), format!("key `{key}`: values must be finite")));
                    }
                    out.push(x);
                }
                if out.is_empty() {
                    return Err(err(Some(line), format!("key `{key}`: empty list")));
                }
                Ok(Some(out))
            }
        }
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some((key, (_, line))) = self.entries.into_iter().next() {
            return Err(err(Some(line), format!("unknown key `{key}` in [{}]", self.name)));
        }
        Ok(())
    }
}

/// The drive strength exactly as the config specified it; the pump amplitude
/// is derived from it so re-resolving a manifest reproduces the same doubles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveStrength {
    SMag(f64),
    N0(f64),
    N0OverNth(f64),
}

/// Which experiment a config drives; doubles as the subcommand identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    TorqueCurve,
    Bifurcation,
    TimeEvolution,
    PhaseDiagram,
    Spectra,
    Asymmetry,
    Threshold,
    OracleCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::TorqueCurve,
        ExperimentKind::Bifurcation,
        ExperimentKind::TimeEvolution,
        ExperimentKind::PhaseDiagram,
        ExperimentKind::Spectra,
        ExperimentKind::Asymmetry,
        ExperimentKind::Threshold,
        ExperimentKind::OracleCheck,
    ];

    /// Spelling used for the `experiment` config key and the manifest.
    pub fn config_name(self) -> &'static str {
        match self {
            ExperimentKind::TorqueCurve => "TorqueCurve",
            ExperimentKind::Bifurcation => "Bifurcation",
            ExperimentKind::TimeEvolution => "TimeEvolution",
            ExperimentKind::PhaseDiagram => "PhaseDiagram",
            ExperimentKind::Spectra => "Spectra",
            ExperimentKind::Asymmetry => "Asymmetry",
            ExperimentKind::Threshold => "Threshold",
            ExperimentKind::OracleCheck => "OracleCheck",
        }
    }

    /// Output file stem, matching the subcommand spelling.
    pub fn file_stem(self) -> &'static str {
        match self {
            ExperimentKind::TorqueCurve => "torque-curve",
            ExperimentKind::Bifurcation => "bifurcation",
            ExperimentKind::TimeEvolution => "time-evolution",
            ExperimentKind::PhaseDiagram => "phase-diagram",
            ExperimentKind::Spectra => "spectra",
            ExperimentKind::Asymmetry => "asymmetry",
            ExperimentKind::Threshold => "threshold",
            ExperimentKind::OracleCheck => "oracle-check",
        }
    }

    fn from_config_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.config_name() == name)
    }
}

/// Which set of equations a time-evolution run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolutionModel {
    Reduced,
    Full,
}

impl EvolutionModel {
    fn name(self) -> &'static str {
        match self {
            EvolutionModel::Reduced => "reduced",
            EvolutionModel::Full => "full",
        }
    }
}

/// How the spectra experiment obtains the rotation speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectraRotation {
    /// Use this angular velocity directly.
    OmegaStar(f64),
    /// Root-find the saturated rotation at this pump power over threshold.
    Mu(f64),
    /// Root-find at the configured drive strength.
    FromDrive,
}

/// Fully resolved experiment selection with every grid materialized.
#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    TorqueCurve {
        mu_values: Vec<f64>,
        omega_points: usize,
    },
    Bifurcation {
        mu_min: f64,
        mu_max: f64,
        mu_points: usize,
    },
    TimeEvolution {
        model: EvolutionModel,
        t_end: f64,
        seed_omega: f64,
        both_signs: bool,
        phi0: f64,
    },
    PhaseDiagram {
        delta_min: f64,
        delta_max: f64,
        delta_points: usize,
        mu_min: f64,
        mu_max: f64,
        mu_points: usize,
    },
    Spectra {
        rotation: SpectraRotation,
        probe_points: usize,
        probe_span: f64,
        use_weak_approx: bool,
    },
    Asymmetry {
        mu_min: f64,
        mu_max: f64,
        mu_points: usize,
        probe_points: usize,
        probe_span: f64,
        use_weak_approx: bool,
    },
    Threshold {
        delta_min: f64,
        delta_max: f64,
        delta_points: usize,
    },
    OracleCheck {
        j_values: Vec<f64>,
        doppler_min: f64,
        doppler_max: f64,
        omega_points: usize,
    },
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Experiment::TorqueCurve { .. } => ExperimentKind::TorqueCurve,
            Experiment::Bifurcation { .. } => ExperimentKind::Bifurcation,
            Experiment::TimeEvolution { .. } => ExperimentKind::TimeEvolution,
            Experiment::PhaseDiagram { .. } => ExperimentKind::PhaseDiagram,
            Experiment::Spectra { .. } => ExperimentKind::Spectra,
            Experiment::Asymmetry { .. } => ExperimentKind::Asymmetry,
            Experiment::Threshold { .. } => ExperimentKind::Threshold,
            Experiment::OracleCheck { .. } => ExperimentKind::OracleCheck,
        }
    }
}

/// A validated run: parameters, experiment, integrator, output destination.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    /// The strength key as specified, for faithful re-rendering.
    pub strength: DriveStrength,
    pub experiment: Experiment,
    pub integrator: IntegratorConfig,
    pub out_dir: PathBuf,
    pub emit_svg: bool,
}

fn require_positive(value: f64, what: &str) -> Result<f64, CliError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(err(None, format!("{what} must be > 0 (got {value})")))
    }
}

fn require_points(points: usize, what: &str) -> Result<usize, CliError> {
    if points >= 2 {
        Ok(points)
    } else {
        Err(err(None, format!("{what} must be at least 2 (got {points})")))
    }
}

fn require_range(lo: f64, hi: f64, what: &str) -> Result<(), CliError> {
    if lo < hi {
        Ok(())
    } else {
        Err(err(None, format!("{what}: minimum {lo} must be below maximum {hi}")))
    }
}

impl RunConfig {
    /// Validates the raw file against the schema for `expected` and derives
    /// every default.
    pub fn resolve(mut raw: RawConfig, expected: ExperimentKind) -> Result<Self, CliError> {
        // [optical]
        let mut s = raw.section("optical");
        let m_entry = s
            .take("m")
            .ok_or_else(|| err(None, "missing required key `m` in [optical]".to_string()))?;
        let m: u32 = m_entry.0.parse().map_err(|_| {
            err(Some(m_entry.1), format!("key `m`: `{}` is not a non-negative integer", m_entry.0))
        })?;
        let gamma = s.f64("gamma")?.unwrap_or(1.0);
        let kappa_ex = s.f64("kappa_ex")?.unwrap_or(1.0);
        let j = s.f64_required("J")?;
        s.finish()?;
        let optical = OpticalParams::new(m, gamma, kappa_ex, j)
            .map_err(|e| err(None, e.to_string()))?;

        // [mech]
        let mut s = raw.section("mech");
        let inertia = s.f64("I")?.unwrap_or(1e4);
        let gamma_phi = s.f64_required("Gamma_phi")?;
        s.finish()?;
        let mech = MechParams::new(inertia, gamma_phi).map_err(|e| err(None, e.to_string()))?;

        // [drive]
        let mut s = raw.section("drive");
        let delta = s.f64_required("Delta")?;
        let s_mag = s.f64("S_mag")?;
        let n0 = s.f64("n0")?;
        let n0_over_nth = s.f64("n0_over_nth")?;
        let given = s_mag.iter().count() + n0.iter().count() + n0_over_nth.iter().count();
        if given != 1 {
            return Err(err(
                None,
                format!("exactly one of S_mag, n0, n0_over_nth must be set in [drive] (got {given})"),
            ));
        }
        let strength = if let Some(v) = s_mag {
            DriveStrength::SMag(v)
        } else if let Some(v) = n0 {
            DriveStrength::N0(v)
        } else {
            DriveStrength::N0OverNth(n0_over_nth.unwrap())
        };
        let pump_mode_name = s.take("pump_mode");
        let delta_pump = s.f64("delta_pump")?;
        let chi = s.f64("chi")?;
        s.finish()?;

        let mode_name = pump_mode_name
            .as_ref()
            .map(|(v, _)| v.as_str())
            .unwrap_or("PhaseAveraged");
        // delta_pump needs mech/optical scales for its default; build the
        // system with a placeholder mode first.
        let provisional = SystemParams::new(
            optical,
            DriveParams::new(delta, 0.0, PumpMode::PhaseAveraged)
                .map_err(|e| err(None, e.to_string()))?,
            mech,
        )
        .map_err(|e| err(None, e.to_string()))?;
        let pump_mode = match mode_name {
            "PhaseAveraged" => PumpMode::PhaseAveraged,
            "SinglePumpSuperposition" => PumpMode::SinglePumpSuperposition,
            "FrequencyOffset" => PumpMode::FrequencyOffset {
                delta_pump: delta_pump.unwrap_or_else(|| provisional.default_delta_pump()),
            },
            "FixedPhase" => PumpMode::FixedPhase { chi: chi.unwrap_or(0.0) },
            other => {
                let line = pump_mode_name.as_ref().map(|(_, l)| *l);
                return Err(err(
                    line,
                    format!(
                        "key `pump_mode`: unknown mode `{other}` (expected PhaseAveraged, \
                         SinglePumpSuperposition, FrequencyOffset, FixedPhase)"
                    ),
                ));
            }
        };
        if delta_pump.is_some() && !matches!(pump_mode, PumpMode::FrequencyOffset { .. }) {
            return Err(err(None, "key `delta_pump` requires pump_mode = FrequencyOffset".to_string()));
        }
        if chi.is_some() && !matches!(pump_mode, PumpMode::FixedPhase { .. }) {
            return Err(err(None, "key `chi` requires pump_mode = FixedPhase".to_string()));
        }

        let drive = DriveParams::new(delta, 0.0, pump_mode).map_err(|e| err(None, e.to_string()))?;
        let base = SystemParams::new(optical, drive, mech).map_err(|e| err(None, e.to_string()))?;
        let params = match strength {
            DriveStrength::SMag(v) => {
                if v < 0.0 {
                    return Err(err(None, format!("S_mag must be >= 0 (got {v})")));
                }
                let mut q = base;
                q.drive.s_mag = v;
                q
            }
            DriveStrength::N0(v) => {
                if v < 0.0 {
                    return Err(err(None, format!("n0 must be >= 0 (got {v})")));
                }
                base.with_n0(v)
            }
            DriveStrength::N0OverNth(v) => {
                if v < 0.0 {
                    return Err(err(None, format!("n0_over_nth must be >= 0 (got {v})")));
                }
                base.with_mu(v).map_err(|e| {
                    err(None, format!("n0_over_nth needs a finite threshold: {e}"))
                })?
            }
        };

        // [experiment]
        let mut s = raw.section("experiment");
        if let Some((name, line)) = s.take("experiment") {
            let kind = ExperimentKind::from_config_name(&name)
                .ok_or_else(|| err(Some(line), format!("unknown experiment `{name}`")))?;
            if kind != expected {
                return Err(err(
                    Some(line),
                    format!(
                        "config selects experiment {} but the subcommand runs {}",
                        kind.config_name(),
                        expected.config_name()
                    ),
                ));
            }
        }
        let experiment = Self::resolve_experiment(&mut s, expected, &params)?;
        s.finish()?;

        // [integrator]
        let mut s = raw.section("integrator");
        let mut integrator = IntegratorConfig::defaults_for(gamma);
        if let Some(v) = s.f64("rel_tol")? {
            integrator.rel_tol = require_positive(v, "rel_tol")?;
        }
        if let Some(v) = s.f64("abs_tol")? {
            integrator.abs_tol = require_positive(v, "abs_tol")?;
        }
        if let Some(v) = s.f64("max_step")? {
            integrator.max_step = require_positive(v, "max_step")?;
        }
        if let Some(v) = s.f64("sample_dt")? {
            integrator.sample_dt = Some(require_positive(v, "sample_dt")?);
        }
        if let Some((v, line)) = s.take("scheme") {
            if v != "DormandPrince45" {
                return Err(err(Some(line), format!("key `scheme`: unknown scheme `{v}`")));
            }
            integrator.scheme = Scheme::DormandPrince45;
        }
        s.finish()?;
        // Time evolution always samples on a grid so trajectory files stay
        // bounded; every other experiment ignores sample_dt.
        if let Experiment::TimeEvolution { t_end, .. } = experiment {
            if integrator.sample_dt.is_none() {
                integrator.sample_dt = Some(t_end / 2000.0);
            }
        }

        // [output]
        let mut s = raw.section("output");
        let out_dir = s.take("out_dir").map(|(v, _)| v).unwrap_or_else(|| "out".to_string());
        let emit_svg = s.bool("emit_svg")?.unwrap_or(false);
        s.finish()?;

        raw.finish()?;

        Ok(RunConfig {
            params,
            strength,
            experiment,
            integrator,
            out_dir: PathBuf::from(out_dir),
            emit_svg,
        })
    }

    fn resolve_experiment(
        s: &mut Section,
        kind: ExperimentKind,
        params: &SystemParams,
    ) -> Result<Experiment, CliError> {
        let gamma = params.gamma();
        Ok(match kind {
            ExperimentKind::TorqueCurve => {
                let mu_values = s.f64_list("mu_values")?.unwrap_or_else(|| vec![0.5, 1.5]);
                for &mu in &mu_values {
                    require_positive(mu, "mu_values entries")?;
                }
                let omega_points = require_points(s.usize("omega_points")?.unwrap_or(1001), "omega_points")?;
                Experiment::TorqueCurve { mu_values, omega_points }
            }
            ExperimentKind::Bifurcation => {
                let mu_min = require_positive(s.f64("mu_min")?.unwrap_or(0.5), "mu_min")?;
                let mu_max = s.f64("mu_max")?.unwrap_or(2.0);
                let mu_points = require_points(s.usize("mu_points")?.unwrap_or(301), "mu_points")?;
                require_range(mu_min, mu_max, "mu grid")?;
                Experiment::Bifurcation { mu_min, mu_max, mu_points }
            }
            ExperimentKind::TimeEvolution => {
                let model = match s.take("model") {
                    None => EvolutionModel::Reduced,
                    Some((v, line)) => match v.as_str() {
                        "reduced" => EvolutionModel::Reduced,
                        "full" => EvolutionModel::Full,
                        _ => {
                            return Err(err(
                                Some(line),
                                format!("key `model`: expected reduced or full, got `{v}`"),
                            ))
                        }
                    },
                };
                let t_end = require_positive(s.f64_required("t_end")?, "t_end")?;
                let seed_omega = s
                    .f64("seed_omega")?
                    .unwrap_or(1e-3 * gamma / (2.0 * params.m_f()));
                let both_signs = s.bool("both_signs")?.unwrap_or(model == EvolutionModel::Reduced);
                let phi0 = s.f64("phi0")?.unwrap_or(0.0);
                Experiment::TimeEvolution { model, t_end, seed_omega, both_signs, phi0 }
            }
            ExperimentKind::PhaseDiagram => {
                let delta_min = require_positive(s.f64("delta_min")?.unwrap_or(0.05 * gamma), "delta_min")?;
                let delta_max = s.f64("delta_max")?.unwrap_or(2.0 * gamma);
                let delta_points = require_points(s.usize("delta_points")?.unwrap_or(41), "delta_points")?;
                let mu_min = require_positive(s.f64("mu_min")?.unwrap_or(0.1), "mu_min")?;
                let mu_max = s.f64("mu_max")?.unwrap_or(2.0);
                let mu_points = require_points(s.usize("mu_points")?.unwrap_or(41), "mu_points")?;
                require_range(delta_min, delta_max, "delta grid")?;
                require_range(mu_min, mu_max, "mu grid")?;
                Experiment::PhaseDiagram { delta_min, delta_max, delta_points, mu_min, mu_max, mu_points }
            }
            ExperimentKind::Spectra => {
                let omega_star = s.f64("omega_star")?;
                let mu = s.f64("mu")?;
                let rotation = match (omega_star, mu) {
                    (Some(_), Some(_)) => {
                        return Err(err(None, "set at most one of omega_star, mu in [experiment]".to_string()))
                    }
                    (Some(w), None) => SpectraRotation::OmegaStar(w),
                    (None, Some(mu)) => SpectraRotation::Mu(require_positive(mu, "mu")?),
                    (None, None) => SpectraRotation::FromDrive,
                };
                let probe_points = require_points(s.usize("probe_points")?.unwrap_or(4001), "probe_points")?;
                let probe_span = require_positive(s.f64("probe_span")?.unwrap_or(3.0), "probe_span")?;
                let use_weak_approx = s.bool("use_weak_approx")?.unwrap_or(false);
                Experiment::Spectra { rotation, probe_points, probe_span, use_weak_approx }
            }
            ExperimentKind::Asymmetry => {
                let mu_min = require_positive(s.f64("mu_min")?.unwrap_or(0.5), "mu_min")?;
                let mu_max = s.f64("mu_max")?.unwrap_or(2.0);
                let mu_points = require_points(s.usize("mu_points")?.unwrap_or(151), "mu_points")?;
                require_range(mu_min, mu_max, "mu grid")?;
                let probe_points = require_points(s.usize("probe_points")?.unwrap_or(4001), "probe_points")?;
                let probe_span = require_positive(s.f64("probe_span")?.unwrap_or(3.0), "probe_span")?;
                let use_weak_approx = s.bool("use_weak_approx")?.unwrap_or(false);
                Experiment::Asymmetry { mu_min, mu_max, mu_points, probe_points, probe_span, use_weak_approx }
            }
            ExperimentKind::Threshold => {
                let delta_min = require_positive(s.f64("delta_min")?.unwrap_or(0.001 * gamma), "delta_min")?;
                let delta_max = s.f64("delta_max")?.unwrap_or(3.0 * gamma);
                let delta_points = require_points(s.usize("delta_points")?.unwrap_or(10001), "delta_points")?;
                require_range(delta_min, delta_max, "delta grid")?;
                Experiment::Threshold { delta_min, delta_max, delta_points }
            }
            ExperimentKind::OracleCheck => {
                let j_values = s
                    .f64_list("J_values")?
                    .unwrap_or_else(|| vec![0.01 * gamma, 0.02 * gamma, 0.05 * gamma]);
                for &jv in &j_values {
                    require_positive(jv, "J_values entries")?;
                }
                let doppler_min = require_positive(s.f64("doppler_min")?.unwrap_or(0.05), "doppler_min")?;
                let doppler_max = s.f64("doppler_max")?.unwrap_or(3.0);
                require_range(doppler_min, doppler_max, "doppler grid")?;
                let omega_points = require_points(s.usize("omega_points")?.unwrap_or(20), "omega_points")?;
                Experiment::OracleCheck { j_values, doppler_min, doppler_max, omega_points }
            }
        })
    }

    /// Canonical config text with every default materialized; embedding this
    /// in the manifest makes a run re-executable bit for bit.
    pub fn render_resolved(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        out.push_str("[optical]\n");
        out.push_str(&format!("m = {}\n", p.optical.m));
        out.push_str(&format!("gamma = {:?}\n", p.optical.gamma));
        out.push_str(&format!("kappa_ex = {:?}\n", p.optical.kappa_ex));
        out.push_str(&format!("J = {:?}\n", p.optical.j));

        out.push_str("\n[drive]\n");
        out.push_str(&format!("Delta = {:?}\n", p.drive.delta));
        match self.strength {
            DriveStrength::SMag(v) => out.push_str(&format!("S_mag = {v:?}\n")),
            DriveStrength::N0(v) => out.push_str(&format!("n0 = {v:?}\n")),
            DriveStrength::N0OverNth(v) => out.push_str(&format!("n0_over_nth = {v:?}\n")),
        }
        match p.drive.pump_mode {
            PumpMode::PhaseAveraged => out.push_str("pump_mode = PhaseAveraged\n"),
            PumpMode::SinglePumpSuperposition => {
                out.push_str("pump_mode = SinglePumpSuperposition\n")
            }
            PumpMode::FrequencyOffset { delta_pump } => {
                out.push_str("pump_mode = FrequencyOffset\n");
                out.push_str(&format!("delta_pump = {delta_pump:?}\n"));
            }
            PumpMode::FixedPhase { chi } => {
                out.push_str("pump_mode = FixedPhase\n");
                out.push_str(&format!("chi = {chi:?}\n"));
            }
        }

        out.push_str("\n[mech]\n");
        out.push_str(&format!("I = {:?}\n", p.mech.inertia));
        out.push_str(&format!("Gamma_phi = {:?}\n", p.mech.gamma_phi));

        out.push_str("\n[experiment]\n");
        out.push_str(&format!("experiment = {}\n", self.experiment.kind().config_name()));
        match &self.experiment {
            Experiment::TorqueCurve { mu_values, omega_points } => {
                let list: Vec<String> = mu_values.iter().map(|v| format!("{v:?}")).collect();
                out.push_str(&format!("mu_values = {}\n", list.join(",")));
                out.push_str(&format!("omega_points = {omega_points}\n"));
            }
            Experiment::Bifurcation { mu_min, mu_max, mu_points } => {
                out.push_str(&format!("mu_min = {mu_min:?}\n"));
                out.push_str(&format!("mu_max = {mu_max:?}\n"));
                out.push_str(&format!("mu_points = {mu_points}\n"));
            }
            Experiment::TimeEvolution { model, t_end, seed_omega, both_signs, phi0 } => {
                out.push_str(&format!("model = {}\n", model.name()));
                out.push_str(&format!("t_end = {t_end:?}\n"));
                out.push_str(&format!("seed_omega = {seed_omega:?}\n"));
                out.push_str(&format!("both_signs = {both_signs}\n"));
                out.push_str(&format!("phi0 = {phi0:?}\n"));
            }
            Experiment::PhaseDiagram { delta_min, delta_max, delta_points, mu_min, mu_max, mu_points } => {
                out.push_str(&format!("delta_min = {delta_min:?}\n"));
                out.push_str(&format!("delta_max = {delta_max:?}\n"));
                out.push_str(&format!("delta_points = {delta_points}\n"));
                out.push_str(&format!("mu_min = {mu_min:?}\n"));
                out.push_str(&format!("mu_max = {mu_max:?}\n"));
                out.push_str(&format!("mu_points = {mu_points}\n"));
            }
            Experiment::Spectra { rotation, probe_points, probe_span, use_weak_approx } => {
                match rotation {
                    SpectraRotation::OmegaStar(w) => out.push_str(&format!("omega_star = {w:?}\n")),
                    SpectraRotation::Mu(mu) => out.push_str(&format!("mu = {mu:?}\n")),
                    SpectraRotation::FromDrive => {}
                }
                out.push_str(&format!("probe_points = {probe_points}\n"));
                out.push_str(&format!("probe_span = {probe_span:?}\n"));
                out.push_str(&format!("use_weak_approx = {use_weak_approx}\n"));
            }
            Experiment::Asymmetry { mu_min, mu_max, mu_points, probe_points, probe_span, use_weak_approx } => {
                out.push_str(&format!("mu_min = {mu_min:?}\n"));
                out.push_str(&format!("mu_max = {mu_max:?}\n"));
                out.push_str(&format!("mu_points = {mu_points}\n"));
                out.push_str(&format!("probe_points = {probe_points}\n"));
                out.push_str(&format!("probe_span = {probe_span:?}\n"));
                out.push_str(&format!("use_weak_approx = {use_weak_approx}\n"));
            }
            Experiment::Threshold { delta_min, delta_max, delta_points } => {
                out.push_str(&format!("delta_min = {delta_min:?}\n"));
                out.push_str(&format!("delta_max = {delta_max:?}\n"));
                out.push_str(&format!("delta_points = {delta_points}\n"));
            }
            Experiment::OracleCheck { j_values, doppler_min, doppler_max, omega_points } => {
                let list: Vec<String> = j_values.iter().map(|v| format!("{v:?}")).collect();
                out.push_str(&format!("J_values = {}\n", list.join(",")));
                out.push_str(&format!("doppler_min = {doppler_min:?}\n"));
                out.push_str(&format!("doppler_max = {doppler_max:?}\n"));
                out.push_str(&format!("omega_points = {omega_points}\n"));
            }
        }

        out.push_str("\n[integrator]\n");
        out.push_str(&format!("rel_tol = {:?}\n", self.integrator.rel_tol));
        out.push_str(&format!("abs_tol = {:?}\n", self.integrator.abs_tol));
        out.push_str(&format!("max_step = {:?}\n", self.integrator.max_step));
        if let Some(dt) = self.integrator.sample_dt {
            out.push_str(&format!("sample_dt = {dt:?}\n"));
        }
        out.push_str("scheme = DormandPrince45\n");

        out.push_str("\n[output]\n");
        out.push_str(&format!("out_dir = {}\n", self.out_dir.display()));
        out.push_str(&format!("emit_svg = {}\n", self.emit_svg));
        out
    }
}

/// Loads and resolves an experiment config from raw file text (INI form).
pub fn load_config(text: &str, expected: ExperimentKind) -> Result<RunConfig, CliError> {
    RunConfig::resolve(RawConfig::parse(text, false)?, expected)
}

pub const DEFAULT_VALIDATE_DRAWS: u32 = 1000;
pub const DEFAULT_VALIDATE_SEED: u64 = 20260819;

/// Settings for the `validate` subcommand: optional `[validate]` and
/// `[output]` sections, everything else rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidateSettings {
    pub draws: u32,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub emit_svg: bool,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        Self {
            draws: DEFAULT_VALIDATE_DRAWS,
            seed: DEFAULT_VALIDATE_SEED,
            out_dir: PathBuf::from("out"),
            emit_svg: false,
        }
    }
}

impl ValidateSettings {
    pub fn render_resolved(&self) -> String {
        format!(
            "[validate]\ndraws = {}\nseed = {}\n\n[output]\nout_dir = {}\nemit_svg = {}\n",
            self.draws,
            self.seed,
            self.out_dir.display(),
            self.emit_svg
        )
    }
}

/// Loads validate-suite settings from raw file text.
pub fn load_validate_settings(text: &str) -> Result<ValidateSettings, CliError> {
    let mut raw = RawConfig::parse(text, true)?;
    let mut v = raw.section("validate");
    let draws = match v.u64("draws")? {
        None => DEFAULT_VALIDATE_DRAWS,
        Some(0) => return Err(err(None, "key `draws`: must be at least 1".to_string())),
        Some(n) => u32::try_from(n)
            .map_err(|_| err(None, format!("key `draws`: {n} is out of range")))?,
    };
    let seed = v.u64("seed")?.unwrap_or(DEFAULT_VALIDATE_SEED);
    v.finish()?;
    let mut o = raw.section("output");
    let out_dir = o
        .take("out_dir")
        .map(|(v, _)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("out"));
    let emit_svg = o.bool("emit_svg")?.unwrap_or(false);
    o.finish()?;
    raw.finish()?;
    Ok(ValidateSettings { draws, seed, out_dir, emit_svg })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[optical]
m = 10
J = 0.1

[drive]
Delta = 0.57735
n0_over_nth = 1.5

[mech]
Gamma_phi = 1

[experiment]
experiment = Bifurcation
";

    #[test]
    fn minimal_config_materializes_defaults() {
        let cfg = load_config(MINIMAL, ExperimentKind::Bifurcation).unwrap();
        assert_eq!(cfg.params.optical.m, 10);
        assert_eq!(cfg.params.optical.gamma, 1.0);
        assert_eq!(cfg.params.optical.kappa_ex, 1.0);
        assert_eq!(cfg.params.optical.j, 0.1);
        assert_eq!(cfg.params.mech.inertia, 1e4);
        assert_eq!(cfg.params.mech.gamma_phi, 1.0);
        assert_eq!(cfg.params.drive.pump_mode, PumpMode::PhaseAveraged);
        assert_eq!(cfg.integrator.rel_tol, 1e-9);
        assert_eq!(cfg.integrator.abs_tol, 1e-12);
        assert_eq!(cfg.integrator.max_step, 0.01);
        assert_eq!(cfg.strength, DriveStrength::N0OverNth(1.5));
        assert!(matches!(
            cfg.experiment,
            Experiment::Bifurcation { mu_min, mu_max, mu_points }
                if mu_min == 0.5 && mu_max == 2.0 && mu_points == 301
        ));
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
        assert!(!cfg.emit_svg);
        // The pump ratio round-trips through the amplitude.
        let nf = crate::model::NormalFormCoeffs::from_params(&cfg.params);
        assert!((nf.mu.unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn both_strength_keys_rejected() {
        let text = MINIMAL.replace("n0_over_nth = 1.5", "n0_over_nth = 1.5\nS_mag = 1.0");
        let e = load_config(&text, ExperimentKind::Bifurcation).unwrap_err();
        assert!(e.to_string().contains("exactly one of S_mag, n0, n0_over_nth"), "{e}");
    }

    #[test]
    fn zero_m_rejected() {
        let text = MINIMAL.replace("m = 10", "m = 0");
        let e = load_config(&text, ExperimentKind::Bifurcation).unwrap_err();
        assert!(e.to_string().contains('m'), "{e}");
    }

    #[test]
    fn unknown_key_names_line_and_section() {
        let text = MINIMAL.replace("J = 0.1", "J = 0.1\nfoo = 1");
        let e = load_config(&text, ExperimentKind::Bifurcation).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("unknown key `foo` in [optical]"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn parse_error_reports_line() {
        let text = MINIMAL.replace("J = 0.1", "J == what");
        let e = load_config(&text, ExperimentKind::Bifurcation).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("not a number"), "{msg}");
    }

    #[test]
    fn experiment_subcommand_mismatch_rejected() {
        let e = load_config(MINIMAL, ExperimentKind::Spectra).unwrap_err();
        assert!(e.to_string().contains("subcommand runs Spectra"), "{e}");
    }

    #[test]
    fn experiment_key_optional_when_subcommand_decides() {
        let text = MINIMAL.replace("experiment = Bifurcation\n", "");
        let cfg = load_config(&text, ExperimentKind::Threshold).unwrap();
        assert!(matches!(cfg.experiment, Experiment::Threshold { .. }));
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = MINIMAL.replace("J = 0.1", "J = 0.1\nJ = 0.2");
        let e = load_config(&text, ExperimentKind::Bifurcation).unwrap_err();
        assert!(e.to_string().contains("duplicate key `J`"), "{e}");
    }

    #[test]
    fn pump_offset_keys_are_mode_gated() {
        let text = MINIMAL.replace("Delta = 0.57735", "Delta = 0.57735\ndelta_pump = 0.01");
        let e = load_config(&text, ExperimentKind::Bifurcation).unwrap_err();
        assert!(e.to_string().contains("requires pump_mode = FrequencyOffset"), "{e}");

        let text = MINIMAL.replace(
            "Delta = 0.57735",
            "Delta = 0.57735\npump_mode = FrequencyOffset",
        );
        let cfg = load_config(&text, ExperimentKind::Bifurcation).unwrap();
        match cfg.params.drive.pump_mode {
            PumpMode::FrequencyOffset { delta_pump } => {
                let expect = cfg.params.default_delta_pump();
                assert_eq!(delta_pump, expect);
            }
            other => panic!("unexpected mode {other:?}"),
        }
    }

    #[test]
    fn resolved_config_round_trips_exactly() {
        let cfg = load_config(MINIMAL, ExperimentKind::Bifurcation).unwrap();
        let rendered = cfg.render_resolved();
        let again = load_config(&rendered, ExperimentKind::Bifurcation).unwrap();
        assert_eq!(cfg, again);
        // Second render is a fixed point.
        assert_eq!(rendered, again.render_resolved());
    }

    #[test]
    fn validate_section_rejected_in_experiment_configs() {
        let text = format!("{MINIMAL}\n[validate]\ndraws = 10\n");
        let e = load_config(&text, ExperimentKind::Bifurcation).unwrap_err();
        assert!(e.to_string().contains("unknown section [validate]"), "{e}");
    }
}
