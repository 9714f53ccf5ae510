//! Python bindings: a `Params` handle plus the main analysis entry points.
//! Sequences come back as plain lists inside dicts keyed like the CSV columns,
//! so `numpy.array(result["omega"])` is all the glue a notebook needs.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wgm_rotor_core as core;
use wgm_rotor_core::{
    DriveParams, FieldState, IntegratorConfig, MechParams, OpticalParams, ProbeConfig, PumpMode,
    SystemParams,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Full parameter set of the driven doublet plus the rotor.
#[pyclass(frozen)]
#[derive(Clone)]
struct Params {
    inner: SystemParams,
}

#[pymethods]
impl Params {
    /// Exactly one of `s_mag`, `n0`, `n0_over_nth` fixes the pump strength
    /// (`s_mag = 1.0` when none is given). `pump_mode` is one of
    /// "PhaseAveraged", "SinglePumpSuperposition", "FrequencyOffset",
    /// "FixedPhase"; `delta_pump` and `chi` feed the last two.
    #[new]
    #[pyo3(signature = (m, j, delta, *, gamma=1.0, kappa_ex=None, s_mag=None, n0=None,
                        n0_over_nth=None, pump_mode="PhaseAveraged", delta_pump=None, chi=None,
                        inertia=1e4, gamma_phi=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        m: u32,
        j: f64,
        delta: f64,
        gamma: f64,
        kappa_ex: Option<f64>,
        s_mag: Option<f64>,
        n0: Option<f64>,
        n0_over_nth: Option<f64>,
        pump_mode: &str,
        delta_pump: Option<f64>,
        chi: Option<f64>,
        inertia: f64,
        gamma_phi: f64,
    ) -> PyResult<Self> {
        let optical =
            OpticalParams::new(m, gamma, kappa_ex.unwrap_or(gamma), j).map_err(value_err)?;
        let strengths = [s_mag.is_some(), n0.is_some(), n0_over_nth.is_some()];
        if strengths.iter().filter(|&&b| b).count() > 1 {
            return Err(PyValueError::new_err(
                "set at most one of s_mag, n0, n0_over_nth",
            ));
        }
        let build = |mode: PumpMode| -> PyResult<SystemParams> {
            let drive = DriveParams::new(delta, s_mag.unwrap_or(1.0), mode).map_err(value_err)?;
            let mech = MechParams::new(inertia, gamma_phi).map_err(value_err)?;
            SystemParams::new(optical, drive, mech).map_err(value_err)
        };
        let mode = match pump_mode {
            "PhaseAveraged" => PumpMode::PhaseAveraged,
            "SinglePumpSuperposition" => PumpMode::SinglePumpSuperposition,
            "FrequencyOffset" => PumpMode::FrequencyOffset {
                delta_pump: match delta_pump {
                    Some(dp) => dp,
                    None => build(PumpMode::PhaseAveraged)?.default_delta_pump(),
                },
            },
            "FixedPhase" => PumpMode::FixedPhase { chi: chi.unwrap_or(0.0) },
            other => {
                return Err(PyValueError::new_err(format!("unknown pump_mode {other:?}")));
            }
        };
        let mut p = build(mode)?;
        if let Some(n) = n0 {
            p = p.with_n0(n);
        }
        if let Some(mu) = n0_over_nth {
            p = p.with_mu(mu).map_err(value_err)?;
        }
        Ok(Self { inner: p })
    }

    #[getter]
    fn m(&self) -> u32 {
        self.inner.optical.m
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }
    #[getter]
    fn kappa_ex(&self) -> f64 {
        self.inner.optical.kappa_ex
    }
    #[getter]
    fn j(&self) -> f64 {
        self.inner.j()
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }
    #[getter]
    fn s_mag(&self) -> f64 {
        self.inner.drive.s_mag
    }
    #[getter]
    fn inertia(&self) -> f64 {
        self.inner.mech.inertia
    }
    #[getter]
    fn gamma_phi(&self) -> f64 {
        self.inner.mech.gamma_phi
    }
    #[getter]
    fn pump_mode(&self) -> String {
        format!("{:?}", self.inner.drive.pump_mode)
    }

    /// Rest-state photon number of the pumped doublet.
    fn n0(&self) -> f64 {
        core::photon_number_n0(&self.inner)
    }

    /// Threshold photon number, or None when no finite threshold exists.
    fn n_threshold(&self) -> Option<f64> {
        core::n_threshold(&self.inner).photons()
    }

    /// Velocity-linear anti-damping rate of the rest state.
    fn gamma_opt(&self) -> f64 {
        core::gamma_opt(&self.inner)
    }

    /// Detuning minimizing the threshold, gamma/sqrt(3).
    fn optimal_detuning(&self) -> f64 {
        core::optimal_detuning(&self.inner)
    }

    /// Time-averaged recoil torque on a uniformly rotating scatterer.
    fn tau_rec(&self, omega: f64) -> f64 {
        core::tau_rec(omega, &self.inner)
    }

    /// Square-root branch of the rotation bifurcation near threshold.
    fn omega_star_normal_form(&self, mu: f64) -> PyResult<f64> {
        core::omega_star_normal_form(mu, &self.inner).map_err(value_err)
    }

    /// Same point rescaled to pump power `mu` in units of the threshold.
    fn with_mu(&self, mu: f64) -> PyResult<Params> {
        Ok(Params { inner: self.inner.with_mu(mu).map_err(value_err)? })
    }

    /// Same point rescaled to rest photon number `n0`.
    fn with_n0(&self, n0: f64) -> Params {
        Params { inner: self.inner.with_n0(n0) }
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "Params(m={}, j={}, delta={}, gamma={}, kappa_ex={}, s_mag={}, pump_mode={:?}, inertia={}, gamma_phi={})",
            p.optical.m, p.j(), p.delta(), p.gamma(), p.optical.kappa_ex, p.drive.s_mag,
            p.drive.pump_mode, p.mech.inertia, p.mech.gamma_phi,
        )
    }
}

fn integrator(
    gamma: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_step: Option<f64>,
    sample_dt: Option<f64>,
) -> IntegratorConfig {
    let mut cfg = IntegratorConfig::defaults_for(gamma).with_rel_tol(rel_tol).with_abs_tol(abs_tol);
    if let Some(h) = max_step {
        cfg.max_step = h;
    }
    cfg.sample_dt = sample_dt;
    cfg
}

/// All torque-balance roots with their stability: a list of
/// `(omega, stable, marginal)` tuples, rest state included.
#[pyfunction]
fn steady_rotations(p: &Params) -> Vec<(f64, bool, bool)> {
    core::find_steady_rotations(&p.inner)
        .roots
        .iter()
        .map(|r| (r.omega, r.stable, r.marginal))
        .collect()
}

/// Bifurcation diagram over pump powers: dict with "mu", "omega_star", and
/// the normal-form comparison "omega_nf".
#[pyfunction]
fn branch<'py>(py: Python<'py>, mu_values: Vec<f64>, p: &Params) -> PyResult<Bound<'py, PyDict>> {
    let b = core::branch(&mu_values, &p.inner).map_err(value_err)?;
    let nf: Vec<f64> = b
        .mu_grid
        .iter()
        .map(|&mu| core::omega_star_normal_form(mu.max(1.0), &p.inner).unwrap_or(0.0))
        .collect();
    let out = PyDict::new(py);
    out.set_item("mu", b.mu_grid)?;
    out.set_item("omega_star", b.omega_star)?;
    out.set_item("omega_nf", nf)?;
    Ok(out)
}

fn trajectory_dict<'py>(
    py: Python<'py>,
    traj: &core::Trajectory,
) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("t", traj.times.clone())?;
    out.set_item("omega", traj.states.iter().map(|s| s.omega).collect::<Vec<_>>())?;
    out.set_item("phi", traj.states.iter().map(|s| s.phi).collect::<Vec<_>>())?;
    out.set_item("n_plus", traj.observables.iter().map(|o| o.n_plus).collect::<Vec<_>>())?;
    out.set_item("n_minus", traj.observables.iter().map(|o| o.n_minus).collect::<Vec<_>>())?;
    out.set_item("tau_inst", traj.observables.iter().map(|o| o.tau_inst).collect::<Vec<_>>())?;
    out.set_item(
        "l_total",
        traj.observables.iter().map(|o| o.l_opt + o.l_phi).collect::<Vec<_>>(),
    )?;
    Ok(out)
}

/// Reduced rotor equation from a velocity seed; returns a trajectory dict.
#[pyfunction]
#[pyo3(signature = (omega0, t_end, p, *, rel_tol=1e-9, abs_tol=1e-12, max_step=None, sample_dt=None))]
#[allow(clippy::too_many_arguments)]
fn integrate_reduced<'py>(
    py: Python<'py>,
    omega0: f64,
    t_end: f64,
    p: &Params,
    rel_tol: f64,
    abs_tol: f64,
    max_step: Option<f64>,
    sample_dt: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = integrator(p.inner.gamma(), rel_tol, abs_tol, max_step, sample_dt);
    let traj = core::integrate_reduced(omega0, t_end, &p.inner, &cfg).map_err(value_err)?;
    trajectory_dict(py, &traj)
}

/// Full mean-field equations from explicit initial amplitudes; returns a
/// trajectory dict.
#[pyfunction]
#[pyo3(signature = (t_end, p, *, alpha_plus=None, alpha_minus=None, phi=0.0, omega=0.0,
                    rel_tol=1e-9, abs_tol=1e-12, max_step=None, sample_dt=None))]
#[allow(clippy::too_many_arguments)]
fn integrate_full<'py>(
    py: Python<'py>,
    t_end: f64,
    p: &Params,
    alpha_plus: Option<Complex64>,
    alpha_minus: Option<Complex64>,
    phi: f64,
    omega: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_step: Option<f64>,
    sample_dt: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let s0 = FieldState {
        alpha_plus: alpha_plus.unwrap_or(Complex64::new(0.0, 0.0)),
        alpha_minus: alpha_minus.unwrap_or(Complex64::new(0.0, 0.0)),
        phi,
        omega,
    };
    let cfg = integrator(p.inner.gamma(), rel_tol, abs_tol, max_step, sample_dt);
    let traj = core::integrate_full(&s0, t_end, &p.inner, &cfg).map_err(value_err)?;
    trajectory_dict(py, &traj)
}

/// Direction-resolved probe spectra at rotation `omega_star`: dict with
/// "delta_p", "r_plus", "r_minus", "t_plus", "t_minus", "a_r".
#[pyfunction]
#[pyo3(signature = (omega_star, p, *, span=3.0, points=2001, weak=false))]
fn spectra<'py>(
    py: Python<'py>,
    omega_star: f64,
    p: &Params,
    span: f64,
    points: usize,
    weak: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg =
        ProbeConfig::symmetric(p.inner.gamma(), span, points, omega_star, weak).map_err(value_err)?;
    let s = core::spectra(&cfg, &p.inner);
    let out = PyDict::new(py);
    out.set_item("delta_p", s.detunings)?;
    out.set_item("r_plus", s.r_plus)?;
    out.set_item("r_minus", s.r_minus)?;
    out.set_item("t_plus", s.t_plus)?;
    out.set_item("t_minus", s.t_minus)?;
    out.set_item("a_r", s.a_r)?;
    Ok(out)
}

/// Brute-force check of the averaged torque law at one rotation speed:
/// returns `(tau_avg, tau_analytic, rel_err)`.
#[pyfunction]
#[pyo3(signature = (omega, p, *, rel_tol=1e-9))]
fn torque_oracle(omega: f64, p: &Params, rel_tol: f64) -> PyResult<(f64, f64, f64)> {
    let cfg = IntegratorConfig::defaults_for(p.inner.gamma()).with_rel_tol(rel_tol);
    let r = core::time_averaged_torque_oracle(omega, &p.inner, &cfg).map_err(value_err)?;
    Ok((r.tau_avg, r.tau_analytic, r.rel_err))
}

#[pymodule]
fn wgm_rotor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_function(wrap_pyfunction!(steady_rotations, m)?)?;
    m.add_function(wrap_pyfunction!(branch, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_reduced, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_full, m)?)?;
    m.add_function(wrap_pyfunction!(spectra, m)?)?;
    m.add_function(wrap_pyfunction!(torque_oracle, m)?)?;
    m.add("HBAR", core::HBAR)?;
    Ok(())
}
