//! Time integration of the full mean-field equations and the reduced rotor
//! equation, plus the brute-force time-averaged-torque oracle against which
//! the closed-form torque law is validated.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{
    instantaneous_torque, tau_rec, torque_prefactor, DerivedObservables, FieldState, PumpMode,
    SystemParams, HBAR,
};

/// Transient discard for the torque oracle, in optical lifetimes `1/gamma`.
/// Doubled adaptively until the windowed average stops moving.
pub const ORACLE_TRANSIENT_LIFETIMES: f64 = 10.0;

/// Minimum number of Doppler periods in the oracle averaging window.
pub const ORACLE_MIN_PERIODS: f64 = 20.0;

/// Minimum oracle averaging window in optical lifetimes, used when the
/// Doppler period is short or the rotation is at rest.
pub const ORACLE_MIN_WINDOW_LIFETIMES: f64 = 100.0;

/// Initial size of the uniform relative-phase grid for `PhaseAveraged`
/// ensemble averages; doubled until the average converges.
pub const CHI_GRID_BASE: usize = 16;

/// Relative change below which a doubled phase grid, transient, or window is
/// accepted as converged.
pub const DOUBLING_REL_TOL: f64 = 1e-8;

/// Total simulated time allowed per oracle evaluation (in `1/gamma`) before
/// the adaptive transient/window extension gives up.
pub const ORACLE_TIME_BUDGET_LIFETIMES: f64 = 2.0e6;

/// Integration scheme. A single adaptive embedded pair is provided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Dormand-Prince 5(4) embedded pair with FSAL and PI step control.
    #[default]
    DormandPrince45,
}

/// Adaptive integrator controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Relative tolerance on each state component.
    pub rel_tol: f64,
    /// Absolute tolerance on each state component.
    pub abs_tol: f64,
    /// Hard cap on the step size (time).
    pub max_step: f64,
    /// Minimum spacing of recorded trajectory samples; every accepted step is
    /// recorded when `None`. The final state is always recorded.
    pub sample_dt: Option<f64>,
    /// Embedded pair selection.
    pub scheme: Scheme,
}

impl IntegratorConfig {
    /// Defaults for a given optical half-linewidth: `rel_tol = 1e-9`,
    /// `abs_tol = 1e-12`, `max_step = 0.01/gamma`.
    pub fn defaults_for(gamma: f64) -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 0.01 / gamma,
            sample_dt: None,
            scheme: Scheme::DormandPrince45,
        }
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn with_sample_dt(mut self, sample_dt: f64) -> Self {
        self.sample_dt = Some(sample_dt);
        self
    }

    // Negated comparisons so NaN tolerances fail validation too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) || !(self.max_step > 0.0) {
            return Err(IntegrateError::BadConfig {
                rel_tol: self.rel_tol,
                abs_tol: self.abs_tol,
                max_step: self.max_step,
            });
        }
        Ok(())
    }
}

/// Failure while advancing an initial-value problem.
#[derive(Debug, Clone, Error)]
pub enum IntegrateError {
    #[error("tolerances and max_step must be positive (rel_tol = {rel_tol}, abs_tol = {abs_tol}, max_step = {max_step})")]
    BadConfig { rel_tol: f64, abs_tol: f64, max_step: f64 },
    #[error("t_end must be > t_start (got t_end = {0})")]
    NonPositiveHorizon(f64),
    #[error("step size underflow at t = {t}; last valid state retained")]
    StepSizeUnderflow {
        t: f64,
        /// Last accepted state vector of the underlying IVP.
        state: Vec<f64>,
    },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
}

/// Time series of states and derived observables.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Strictly increasing sample times.
    pub times: Vec<f64>,
    /// Mean-field state per sample.
    pub states: Vec<FieldState>,
    /// Derived observables per sample.
    pub observables: Vec<DerivedObservables>,
}

impl Trajectory {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            observables: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: f64, s: FieldState, o: DerivedObservables) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.states.push(s);
        self.observables.push(o);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &FieldState {
        self.states.last().expect("trajectory holds at least the initial sample")
    }
}

/// One brute-force torque average compared against the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueOracleResult {
    /// Imposed uniform angular velocity.
    pub omega: f64,
    /// Windowed average of the instantaneous torque from the integrated fields.
    pub tau_avg: f64,
    /// Closed-form prediction `tau_rec(omega)`.
    pub tau_analytic: f64,
    /// `|tau_avg - tau_analytic| / max(|tau_analytic|, floor)` with
    /// `floor = A_m 1e-9 / gamma^2`.
    pub rel_err: f64,
}

/// Failure of the torque oracle.
#[derive(Debug, Clone, Error)]
pub enum OracleError {
    #[error("transient/window extension exceeded the time budget ({spent:.3e} of {budget:.3e} lifetimes) without converging")]
    TimeBudgetExceeded { spent: f64, budget: f64 },
    #[error(transparent)]
    Integration(#[from] IntegrateError),
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights are the last row of A (FSAL); E is b5 - b4.
const E: [f64; 7] = [
    71.0 / 57_600.0,
    0.0,
    -71.0 / 16_695.0,
    71.0 / 1_920.0,
    -17_253.0 / 339_200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const SHRINK_LIMIT: f64 = 0.2;
const GROW_LIMIT: f64 = 5.0;

/// Integrates `dy/dt = rhs(t, y)` from `t0` to `t_end` with the embedded
/// Dormand-Prince pair. `on_step` observes every accepted step, including the
/// final one at `t_end`, but not the initial state. Returns the final state.
pub(crate) fn integrate_adaptive<F, O>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    mut on_step: O,
) -> Result<Vec<f64>, IntegrateError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    cfg.validate()?;
    // Negated so a NaN horizon is rejected as well.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(t_end > t0) {
        return Err(IntegrateError::NonPositiveHorizon(t_end));
    }
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut y_next = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; dim]).collect();
    let mut t = t0;

    rhs(t, &y, &mut k[0]);

    // Initial step: conservative ratio of state and derivative norms.
    let mut h = {
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for i in 0..dim {
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs();
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (k[0][i] / sc) * (k[0][i] / sc);
        }
        let guess = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * (d0 / d1).sqrt() };
        guess.min(cfg.max_step).min(t_end - t0)
    };

    let mut rejected = false;
    loop {
        let remaining = t_end - t;
        // Within roundoff of the horizon counts as arrived; otherwise a step
        // this small means the error controller has collapsed.
        if remaining <= 1e-14 * t.abs().max(1.0) {
            break;
        }
        h = h.min(cfg.max_step).min(remaining);
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(IntegrateError::StepSizeUnderflow { t, state: y });
        }

        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                stage[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            rhs(t + C[s] * h, &stage, &mut tail[0]);
        }
        // Stage 7 argument is the fifth-order solution (FSAL).
        y_next.copy_from_slice(&stage);

        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += E[j] * kj[i];
                }
            }
            e *= h;
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_next[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / dim as f64).sqrt();

        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut y_next);
            if !y.iter().all(|v| v.is_finite()) {
                return Err(IntegrateError::NonFiniteState { t });
            }
            k.swap(0, 6);
            on_step(t, &y);

            let grow = if rejected { 1.0 } else { GROW_LIMIT };
            let factor = if err == 0.0 {
                grow
            } else {
                (SAFETY * err.powf(-0.2)).clamp(SHRINK_LIMIT, grow)
            };
            h *= factor;
            rejected = false;
        } else {
            h *= (SAFETY * err.powf(-0.2)).clamp(SHRINK_LIMIT, 1.0);
            rejected = true;
        }
    }
    Ok(y)
}

/// Drive amplitudes `(S_plus, S_minus)(t)` for a single realized trajectory.
///
/// `PhaseAveraged` realizes the `chi = 0` ensemble member and
/// `SinglePumpSuperposition` the co-rotating-pump-only member; their ensemble
/// semantics belong to [`time_averaged_torque_oracle`].
pub fn drive_amplitudes(t: f64, p: &SystemParams) -> (Complex64, Complex64) {
    let s = Complex64::new(p.drive.s_mag, 0.0);
    let s_minus = match p.drive.pump_mode {
        PumpMode::PhaseAveraged => s,
        PumpMode::SinglePumpSuperposition => Complex64::new(0.0, 0.0),
        PumpMode::FrequencyOffset { delta_pump } => s * Complex64::from_polar(1.0, -delta_pump * t),
        PumpMode::FixedPhase { chi } => s * Complex64::from_polar(1.0, chi),
    };
    (s, s_minus)
}

/// Right-hand side of the full mean-field equations, returned in the shape of
/// a [`FieldState`] holding `(dalpha+/dt, dalpha-/dt, dphi/dt, dOmega/dt)`.
/// The static pinning potential is taken as flat.
pub fn rhs_full(s: &FieldState, t: f64, p: &SystemParams) -> FieldState {
    let m = p.m_f();
    let g = p.gamma();
    let decay = Complex64::new(-g, p.delta());
    let lattice = Complex64::from_polar(1.0, -2.0 * m * s.phi);
    let (s_plus, s_minus) = drive_amplitudes(t, p);
    let coupling = Complex64::new(0.0, p.j());
    let d_plus = decay * s.alpha_plus - coupling * lattice * s.alpha_minus + s_plus;
    let d_minus = decay * s.alpha_minus - coupling * lattice.conj() * s.alpha_plus + s_minus;
    let torque = instantaneous_torque(s, p);
    FieldState {
        alpha_plus: d_plus,
        alpha_minus: d_minus,
        phi: s.omega,
        omega: (torque - p.mech.gamma_phi * s.omega) / p.mech.inertia,
    }
}

const FULL_DIM: usize = 6;

fn pack(s: &FieldState) -> [f64; FULL_DIM] {
    [s.alpha_plus.re, s.alpha_plus.im, s.alpha_minus.re, s.alpha_minus.im, s.phi, s.omega]
}

fn unpack(y: &[f64]) -> FieldState {
    FieldState {
        alpha_plus: Complex64::new(y[0], y[1]),
        alpha_minus: Complex64::new(y[2], y[3]),
        phi: y[4],
        omega: y[5],
    }
}

struct SampleFilter {
    sample_dt: Option<f64>,
    last_kept: f64,
}

impl SampleFilter {
    fn new(t0: f64, sample_dt: Option<f64>) -> Self {
        Self { sample_dt, last_kept: t0 }
    }

    fn keep(&mut self, t: f64, t_end: f64) -> bool {
        let due = match self.sample_dt {
            None => true,
            Some(dt) => t - self.last_kept >= dt,
        };
        let at_end = t >= t_end - 1e-14 * t_end.abs().max(1.0);
        if due || at_end {
            self.last_kept = t;
            true
        } else {
            false
        }
    }
}

/// Integrates the full mean-field equations from `s0` over `[0, t_end]`.
/// Samples are recorded at accepted integrator steps, thinned to
/// `cfg.sample_dt` spacing when set; the initial and final states are always
/// included.
pub fn integrate_full(
    s0: &FieldState,
    t_end: f64,
    p: &SystemParams,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    let p = *p;
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let d = rhs_full(&unpack(y), t, &p);
        dy.copy_from_slice(&pack(&d));
    };
    let mut traj = Trajectory::with_capacity(1024);
    traj.push(0.0, *s0, DerivedObservables::from_state(s0, &p));
    let mut filter = SampleFilter::new(0.0, cfg.sample_dt);
    integrate_adaptive(rhs, 0.0, &pack(s0), t_end, cfg, |t, y| {
        if filter.keep(t, t_end) {
            let s = unpack(y);
            traj.push(t, s, DerivedObservables::from_state(&s, &p));
        }
    })?;
    Ok(traj)
}

/// Integrates the reduced rotor equation
/// `I dOmega/dt = tau_rec(Omega) - Gamma_phi Omega`, with the angle
/// accumulated as the integral of `Omega`. Optical amplitudes in the returned
/// trajectory are zero; see [`DerivedObservables::from_reduced`].
pub fn integrate_reduced(
    omega0: f64,
    t_end: f64,
    p: &SystemParams,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    let p = *p;
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = (tau_rec(y[1], &p) - p.mech.gamma_phi * y[1]) / p.mech.inertia;
    };
    let mut traj = Trajectory::with_capacity(1024);
    let s0 = FieldState::dark(0.0, omega0);
    traj.push(0.0, s0, DerivedObservables::from_reduced(omega0, &p));
    let mut filter = SampleFilter::new(0.0, cfg.sample_dt);
    integrate_adaptive(rhs, 0.0, &[0.0, omega0], t_end, cfg, |t, y| {
        if filter.keep(t, t_end) {
            let s = FieldState::dark(y[0], y[1]);
            traj.push(t, s, DerivedObservables::from_reduced(y[1], &p));
        }
    })?;
    Ok(traj)
}

/// Average of the instantaneous torque over `[t0, t0 + window]` with the
/// scatterer clamped to uniform rotation `phi(t) = omega t`, for one concrete
/// pair of drive amplitudes. The optical fields start dark at `t = 0` so the
/// result is a genuine brute-force average, independent of any closed form.
fn clamped_torque_average(
    omega: f64,
    s_minus_phase: Option<f64>,
    mute_plus: bool,
    t0: f64,
    window: f64,
    p: &SystemParams,
    cfg: &IntegratorConfig,
) -> Result<f64, IntegrateError> {
    let p = *p;
    let m = p.m_f();
    let g = p.gamma();
    let decay = Complex64::new(-g, p.delta());
    let coupling = Complex64::new(0.0, p.j());
    let s_plus = if mute_plus { Complex64::new(0.0, 0.0) } else { Complex64::new(p.drive.s_mag, 0.0) };
    let four_m_j = 4.0 * m * HBAR * p.j();

    // State: [Re a+, Im a+, Re a-, Im a-, W] with W the torque quadrature,
    // active only past t0.
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let a_plus = Complex64::new(y[0], y[1]);
        let a_minus = Complex64::new(y[2], y[3]);
        let phi = omega * t;
        let lattice = Complex64::from_polar(1.0, -2.0 * m * phi);
        let s_minus = match s_minus_phase {
            Some(chi) => Complex64::from_polar(p.drive.s_mag, chi),
            None => match p.drive.pump_mode {
                PumpMode::FrequencyOffset { delta_pump } => {
                    Complex64::from_polar(p.drive.s_mag, -delta_pump * t)
                }
                _ => Complex64::new(0.0, 0.0),
            },
        };
        let d_plus = decay * a_plus - coupling * lattice * a_minus + s_plus;
        let d_minus = decay * a_minus - coupling * lattice.conj() * a_plus + s_minus;
        dy[0] = d_plus.re;
        dy[1] = d_plus.im;
        dy[2] = d_minus.re;
        dy[3] = d_minus.im;
        dy[4] = if t >= t0 {
            four_m_j * (lattice.conj() * a_minus.conj() * a_plus).im
        } else {
            0.0
        };
    };

    // Split at t0 so the quadrature switch-on is a segment boundary, not a
    // discontinuity inside a step.
    let mut rhs = rhs;
    let y0 = [0.0; 5];
    let mid = integrate_adaptive(&mut rhs, 0.0, &y0, t0, cfg, |_, _| {})?;
    let fin = integrate_adaptive(&mut rhs, t0, &mid, t0 + window, cfg, |_, _| {})?;
    Ok(fin[4] / window)
}

/// Averaging window for one realization: at least [`ORACLE_MIN_PERIODS`]
/// periods of the dominant torque oscillation and at least
/// [`ORACLE_MIN_WINDOW_LIFETIMES`] lifetimes, rounded up to an integer number
/// of periods so periodic terms cancel exactly.
fn oracle_window(oscillation: f64, gamma: f64) -> f64 {
    let floor_time = ORACLE_MIN_WINDOW_LIFETIMES / gamma;
    if oscillation == 0.0 {
        return floor_time;
    }
    let period = 2.0 * std::f64::consts::PI / oscillation.abs();
    let base = (ORACLE_MIN_PERIODS * period).max(floor_time);
    (base / period).ceil() * period
}

/// Brute-force check of the time-averaged torque law: clamps the scatterer to
/// uniform rotation, integrates the driven fields past transients, averages
/// the instantaneous torque over an integer number of oscillation periods,
/// and compares with `tau_rec`. Ensemble pump modes are realized per their
/// definition: `PhaseAveraged` averages over a uniform relative-phase grid
/// (doubled from 16 points until converged) and `SinglePumpSuperposition`
/// sums the two single-pump averages. The transient discard starts at
/// 10 lifetimes and doubles until the average is stable.
pub fn time_averaged_torque_oracle(
    omega: f64,
    p: &SystemParams,
    cfg: &IntegratorConfig,
) -> Result<TorqueOracleResult, OracleError> {
    let g = p.gamma();
    let budget = ORACLE_TIME_BUDGET_LIFETIMES / g;
    let mut spent = 0.0;

    let doppler = 2.0 * p.m_f() * omega;
    let floor = torque_prefactor(p) * 1e-9 / (g * g);
    // Doubling is judged against the natural torque scale so near-zero
    // averages (balanced pumps at rest) still terminate.
    let conv_scale = torque_prefactor(p) / (g * g);

    // One full ensemble evaluation at a given transient discard.
    let evaluate = |t0: f64, spent: &mut f64| -> Result<f64, OracleError> {
        let mut run = |chi: Option<f64>, mute_plus: bool, window: f64| -> Result<f64, OracleError> {
            *spent += t0 + window;
            if *spent > budget {
                return Err(OracleError::TimeBudgetExceeded { spent: *spent * g, budget: budget * g });
            }
            Ok(clamped_torque_average(omega, chi, mute_plus, t0, window, p, cfg)?)
        };
        match p.drive.pump_mode {
            PumpMode::FixedPhase { chi } => {
                let window = oracle_window(doppler, g);
                run(Some(chi), false, window)
            }
            PumpMode::SinglePumpSuperposition => {
                let window = oracle_window(doppler, g);
                let plus_only = run(None, false, window)?;
                let minus_only = run(Some(0.0), true, window)?;
                Ok(plus_only + minus_only)
            }
            PumpMode::PhaseAveraged => {
                let window = oracle_window(doppler, g);
                let grid_avg = |n: usize, spent: &mut f64| -> Result<f64, OracleError> {
                    let mut acc = 0.0;
                    for i in 0..n {
                        let chi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                        *spent += t0 + window;
                        if *spent > budget {
                            return Err(OracleError::TimeBudgetExceeded {
                                spent: *spent * g,
                                budget: budget * g,
                            });
                        }
                        acc += clamped_torque_average(omega, Some(chi), false, t0, window, p, cfg)?;
                    }
                    Ok(acc / n as f64)
                };
                let mut n = CHI_GRID_BASE;
                let mut avg = grid_avg(n, spent)?;
                loop {
                    n *= 2;
                    let refined = grid_avg(n, spent)?;
                    if (refined - avg).abs() <= DOUBLING_REL_TOL * refined.abs().max(conv_scale) {
                        return Ok(refined);
                    }
                    avg = refined;
                }
            }
            PumpMode::FrequencyOffset { delta_pump } => {
                // The large pump-cross term oscillates at doppler + delta_pump;
                // window on integer periods of that line and require stability
                // against window doubling to bound the incommensurate leftovers.
                let beat = doppler + delta_pump;
                let base = oracle_window(beat, g).max(oracle_window(delta_pump, g));
                let period = 2.0 * std::f64::consts::PI / beat.abs();
                let mut window = (base / period).ceil() * period;
                let mut avg = run(None, false, window)?;
                loop {
                    window *= 2.0;
                    let refined = run(None, false, window)?;
                    if (refined - avg).abs() <= DOUBLING_REL_TOL * refined.abs().max(conv_scale) {
                        return Ok(refined);
                    }
                    avg = refined;
                }
            }
        }
    };

    let mut t0 = ORACLE_TRANSIENT_LIFETIMES / g;
    let mut tau_avg = evaluate(t0, &mut spent)?;
    loop {
        t0 *= 2.0;
        let refined = evaluate(t0, &mut spent)?;
        let converged =
            (refined - tau_avg).abs() <= DOUBLING_REL_TOL * refined.abs().max(conv_scale);
        tau_avg = refined;
        if converged {
            break;
        }
    }

    let tau_analytic = tau_rec(omega, p);
    let rel_err = (tau_avg - tau_analytic).abs() / tau_analytic.abs().max(floor);
    Ok(TorqueOracleResult { omega, tau_avg, tau_analytic, rel_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DriveParams, MechParams, OpticalParams};

    fn params(
        m: u32,
        gamma: f64,
        j: f64,
        delta: f64,
        pump: PumpMode,
        inertia: f64,
        gamma_phi: f64,
    ) -> SystemParams {
        SystemParams::new(
            OpticalParams::new(m, gamma, gamma, j).unwrap(),
            DriveParams::new(delta, 1.0, pump).unwrap(),
            MechParams::new(inertia, gamma_phi).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn stepper_matches_exponential_decay() {
        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.5);
        let y = integrate_adaptive(
            |_t, y, dy| dy[0] = -0.7 * y[0],
            0.0,
            &[2.0],
            3.0,
            &cfg,
            |_, _| {},
        )
        .unwrap();
        let exact = 2.0 * (-0.7_f64 * 3.0).exp();
        assert!((y[0] - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn stepper_matches_oscillator() {
        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.5);
        let y = integrate_adaptive(
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -4.0 * y[0];
            },
            0.0,
            &[1.0, 0.0],
            5.0,
            &cfg,
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] - (2.0_f64 * 5.0).cos()).abs() < 1e-8);
        assert!((y[1] + 2.0 * (2.0_f64 * 5.0).sin()).abs() < 1e-8);
    }

    #[test]
    fn free_damped_rotor_decays() {
        // S = 0, J = 0: dOmega/dt = -(Gamma_phi / I) Omega.
        let p = {
            let mut p = params(10, 1.0, 0.0, 0.3, PumpMode::PhaseAveraged, 50.0, 2.0);
            p.drive.s_mag = 0.0;
            p
        };
        let s0 = FieldState::dark(0.0, 0.4);
        let d = rhs_full(&s0, 0.0, &p);
        assert!((d.omega + 2.0 / 50.0 * 0.4).abs() < 1e-15);
        assert_eq!(d.phi, 0.4);

        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.25);
        let traj = integrate_full(&s0, 20.0, &p, &cfg).unwrap();
        let exact = 0.4 * (-2.0 / 50.0 * 20.0_f64).exp();
        assert!((traj.final_state().omega - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn decoupled_mode_relaxes_to_drive_fixed_point() {
        // J = 0, Omega = 0: steady alpha+ = S / (gamma - i Delta).
        let p = params(10, 1.0, 0.0, 0.3, PumpMode::PhaseAveraged, 1e4, 1.0);
        let fixed = Complex64::new(1.0, 0.0) / Complex64::new(1.0, -0.3);
        let d_at_fixed = rhs_full(
            &FieldState { alpha_plus: fixed, alpha_minus: fixed, phi: 0.2, omega: 0.0 },
            0.0,
            &p,
        );
        assert!(d_at_fixed.alpha_plus.norm() < 1e-15);

        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.5);
        let traj = integrate_full(&FieldState::dark(0.2, 0.0), 40.0, &p, &cfg).unwrap();
        assert!((traj.final_state().alpha_plus - fixed).norm() < 1e-9);
    }

    #[test]
    fn reduced_rest_state_is_fixed() {
        let p = params(10, 1.0, 0.1, 1.0 / 3.0_f64.sqrt(), PumpMode::PhaseAveraged, 1.0, 1.0)
            .with_n0(1.0);
        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.5);
        let traj = integrate_reduced(0.0, 50.0, &p, &cfg).unwrap();
        for s in &traj.states {
            assert_eq!(s.omega, 0.0);
            assert_eq!(s.phi, 0.0);
        }
    }

    #[test]
    fn sample_thinning_keeps_endpoints_and_spacing() {
        let p = params(10, 1.0, 0.0, 0.3, PumpMode::PhaseAveraged, 1e4, 1.0);
        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.05).with_sample_dt(1.0);
        let traj = integrate_full(&FieldState::dark(0.0, 0.0), 10.0, &p, &cfg).unwrap();
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(*traj.times.last().unwrap(), 10.0);
        assert!(traj.len() < 20, "thinning failed: {} samples", traj.len());
        for w in traj.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn trajectory_lengths_agree() {
        let p = params(2, 1.0, 0.05, 0.4, PumpMode::PhaseAveraged, 1e3, 1.0);
        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.2);
        let traj = integrate_full(&FieldState::dark(0.1, 1e-3), 5.0, &p, &cfg).unwrap();
        assert_eq!(traj.times.len(), traj.states.len());
        assert_eq!(traj.times.len(), traj.observables.len());
    }

    /// Frozen-rotation single-pump steady state, solved in closed form
    /// independently of tau_rec: with only the co-rotating pump on at
    /// detuning `delta`,
    /// A [gamma - i delta + J^2 / (gamma - i (delta - 2 m Omega))] = S and
    /// tau+ = 4 m gamma J^2 |A|^2 / (gamma^2 + (delta - 2 m Omega)^2).
    fn single_pump_exact_torque(omega: f64, delta: f64, p: &SystemParams) -> f64 {
        let m = p.m_f();
        let g = p.gamma();
        let shifted = Complex64::new(g, -(delta - 2.0 * m * omega));
        let denom = Complex64::new(g, -delta) + p.j() * p.j() / shifted;
        let a = Complex64::new(p.drive.s_mag, 0.0) / denom;
        4.0 * m * g * p.j() * p.j() * a.norm_sqr() / shifted.norm_sqr()
    }

    #[test]
    fn oracle_matches_exact_single_pump_average() {
        let p = params(10, 1.0, 0.05, 1.0 / 3.0_f64.sqrt(), PumpMode::SinglePumpSuperposition, 1e4, 1.0)
            .with_n0(1.0);
        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.2);
        let omega = 0.021;
        let d = p.delta();
        let got = time_averaged_torque_oracle(omega, &p, &cfg).unwrap();
        let exact =
            single_pump_exact_torque(omega, d, &p) - single_pump_exact_torque(-omega, d, &p);
        assert!(
            (got.tau_avg - exact).abs() <= 1e-6 * exact.abs(),
            "oracle {} vs exact sum {exact}",
            got.tau_avg
        );
    }

    #[test]
    fn oracle_rest_state_torque_vanishes_for_balanced_pumps() {
        let base = params(10, 1.0, 0.1, 1.0 / 3.0_f64.sqrt(), PumpMode::PhaseAveraged, 1e4, 1.0)
            .with_n0(1.0);
        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.2).with_rel_tol(1e-11);
        let scale = torque_prefactor(&base) / base.gamma().powi(2);
        for pump in [PumpMode::PhaseAveraged, PumpMode::SinglePumpSuperposition] {
            let mut p = base;
            p.drive.pump_mode = pump;
            let r = time_averaged_torque_oracle(0.0, &p, &cfg).unwrap();
            assert_eq!(r.tau_analytic, 0.0);
            assert!(
                r.tau_avg.abs() <= 1e-10 * scale,
                "pump {pump:?}: residual {} vs scale {scale}",
                r.tau_avg
            );
        }
    }

    #[test]
    fn offset_pump_rest_torque_matches_shifted_chain() {
        // The offset pump is not balanced at rest: its scattering chain runs
        // at detuning Delta + delta_pump, so the rest-state average is the
        // exact chain difference rather than zero.
        let delta_pump = 0.05;
        let mut p = params(10, 1.0, 0.1, 1.0 / 3.0_f64.sqrt(), PumpMode::PhaseAveraged, 1e4, 1.0)
            .with_n0(1.0);
        p.drive.pump_mode = PumpMode::FrequencyOffset { delta_pump };
        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.2).with_rel_tol(1e-11);
        let d = p.delta();
        let exact =
            single_pump_exact_torque(0.0, d, &p) - single_pump_exact_torque(0.0, d + delta_pump, &p);
        let r = time_averaged_torque_oracle(0.0, &p, &cfg).unwrap();
        assert!(
            (r.tau_avg - exact).abs() <= 1e-6 * exact.abs(),
            "oracle {} vs shifted-chain value {exact}",
            r.tau_avg
        );
    }

    #[test]
    fn oracle_agrees_with_closed_form_at_weak_coupling() {
        let p = params(10, 1.0, 0.01, 1.0 / 3.0_f64.sqrt(), PumpMode::SinglePumpSuperposition, 1e4, 1.0)
            .with_n0(1.0);
        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.2);
        let r = time_averaged_torque_oracle(0.02, &p, &cfg).unwrap();
        assert!(r.rel_err <= 1e-3, "rel_err = {}", r.rel_err);
    }

    #[test]
    fn phase_averaged_and_single_pump_agree() {
        let single = params(5, 1.0, 0.06, 0.4, PumpMode::SinglePumpSuperposition, 1e4, 1.0)
            .with_n0(0.8);
        let averaged = {
            let mut p = single;
            p.drive.pump_mode = PumpMode::PhaseAveraged;
            p
        };
        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.2);
        let omega = 0.05;
        let a = time_averaged_torque_oracle(omega, &single, &cfg).unwrap().tau_avg;
        let b = time_averaged_torque_oracle(omega, &averaged, &cfg).unwrap().tau_avg;
        assert!((a - b).abs() <= 1e-6 * a.abs().max(b.abs()), "single {a} vs averaged {b}");
    }

    #[test]
    fn conservative_limit_preserves_total_angular_momentum() {
        // S = 0, gamma -> 0, Gamma_phi -> 0: I Omega + m (n+ - n-) is conserved.
        // Constructors require positive rates, so build the conservative RHS
        // directly through rhs_full with zeroed fields.
        let mut p = params(10, 1.0, 0.1, 0.5, PumpMode::PhaseAveraged, 10.0, 1.0);
        p.drive.s_mag = 0.0;
        p.optical.gamma = 0.0;
        p.mech.gamma_phi = 0.0;
        let s0 = FieldState {
            alpha_plus: Complex64::new(1.0, 0.0),
            alpha_minus: Complex64::new(0.0, 0.3),
            phi: 0.2,
            omega: 0.1,
        };
        let l = |s: &FieldState| {
            p.mech.inertia * s.omega + p.m_f() * (s.alpha_plus.norm_sqr() - s.alpha_minus.norm_sqr())
        };
        let cfg = IntegratorConfig {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            max_step: 0.1,
            sample_dt: Some(10.0),
            scheme: Scheme::DormandPrince45,
        };
        let traj = integrate_full(&s0, 500.0, &p, &cfg).unwrap();
        let l0 = l(&traj.states[0]);
        let worst = traj
            .states
            .iter()
            .map(|s| (l(s) - l0).abs())
            .fold(0.0_f64, f64::max);
        assert!(worst <= 1e-8 * l0.abs(), "drift {worst} on L = {l0}");
    }

    #[test]
    fn z2_relabeling_maps_trajectories() {
        let p = params(3, 1.0, 0.08, 0.45, PumpMode::FixedPhase { chi: 0.0 }, 200.0, 0.5)
            .with_n0(0.6);
        let cfg = IntegratorConfig::defaults_for(1.0).with_max_step(0.2);
        let s0 = FieldState {
            alpha_plus: Complex64::new(0.1, -0.2),
            alpha_minus: Complex64::new(-0.05, 0.15),
            phi: 0.3,
            omega: 0.02,
        };
        let mirrored = FieldState {
            alpha_plus: s0.alpha_minus,
            alpha_minus: s0.alpha_plus,
            phi: -s0.phi,
            omega: -s0.omega,
        };
        let t_end = 30.0;
        let a = integrate_full(&s0, t_end, &p, &cfg).unwrap();
        let b = integrate_full(&mirrored, t_end, &p, &cfg).unwrap();
        // Compare at the shared final time.
        let fa = a.final_state();
        let fb = b.final_state();
        assert!((fa.alpha_plus - fb.alpha_minus).norm() < 1e-7);
        assert!((fa.alpha_minus - fb.alpha_plus).norm() < 1e-7);
        assert!((fa.phi + fb.phi).abs() < 1e-7);
        assert!((fa.omega + fb.omega).abs() < 1e-7);
    }
}
