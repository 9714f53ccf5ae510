//! Domain types and the closed-form weak-scattering theory for a movable
//! scatterer coupled to a whispering-gallery doublet: time-averaged torque,
//! optical anti-damping, instability threshold, cubic normal form, branch,
//! and optimal detuning.
//!
//! Unit convention: `hbar = 1`, all rates in units of a reference rate
//! (by default the optical half-linewidth `gamma = 1`), angular momenta in
//! units of `hbar`.

use num_complex::Complex64;
use thiserror::Error;

/// Reduced Planck constant in the unit convention used throughout.
pub const HBAR: f64 = 1.0;

/// Finite-difference step for first-derivative consistency checks, as a
/// fraction of the Doppler velocity scale `gamma/(2m)`. Balances truncation
/// and round-off at double precision.
pub const FD_SLOPE_STEP: f64 = 1e-6;

/// Finite-difference step for third-derivative consistency checks, as a
/// fraction of `gamma/(2m)`.
pub const FD_CUBIC_STEP: f64 = 1e-3;

/// Violation of a parameter invariant, reported at construction time.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("mode index m must be >= 1 (got {0}); torque and Doppler shift vanish at m = 0")]
    ModeIndexZero(u32),
    #[error("gamma must be > 0 (got {0})")]
    NonPositiveGamma(f64),
    #[error("J must be >= 0 (got {0})")]
    NegativeCoupling(f64),
    #[error("kappa_ex must satisfy 0 < kappa_ex <= 2*gamma (got kappa_ex = {kappa_ex}, gamma = {gamma})")]
    ExternalCouplingRange { kappa_ex: f64, gamma: f64 },
    #[error("S_mag must be >= 0 (got {0})")]
    NegativeDrive(f64),
    #[error("delta_pump must satisfy 0 < delta_pump < gamma (got delta_pump = {delta_pump}, gamma = {gamma})")]
    PumpOffsetRange { delta_pump: f64, gamma: f64 },
    #[error("I must be > 0 (got {0})")]
    NonPositiveInertia(f64),
    #[error("Gamma_phi must be > 0 (got {0})")]
    NonPositiveDamping(f64),
    #[error("{name} must be finite (got {value})")]
    NonFinite { name: &'static str, value: f64 },
}

fn check_finite(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::NonFinite { name, value })
    }
}

/// How the two circulation directions are pumped.
///
/// The first two variants are ensemble prescriptions for reciprocal driving
/// (equal fluxes, no stationary relative phase); the ensemble semantics live
/// in the time-averaged torque oracle. A single trajectory realizes
/// `PhaseAveraged` as the `chi = 0` member and `SinglePumpSuperposition` as
/// the co-rotating-pump-only member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PumpMode {
    /// Equal pumps with a uniformly distributed static relative phase.
    PhaseAveraged,
    /// Incoherent sum of the two single-direction pump responses.
    SinglePumpSuperposition,
    /// Equal pumps with a small relative frequency offset; the interference
    /// lattice rotates slowly and averages out on mechanical timescales.
    FrequencyOffset {
        /// Relative pump frequency offset (rate), `0 < delta_pump < gamma`.
        delta_pump: f64,
    },
    /// Equal pumps locked at a fixed relative phase; pins a static lattice
    /// and is not a reciprocal drive.
    FixedPhase {
        /// Static relative pump phase (rad).
        chi: f64,
    },
}

/// Optical doublet parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalParams {
    /// Azimuthal mode index (winding number); each photon carries +-m hbar.
    pub m: u32,
    /// Optical half-linewidth gamma = kappa/2 (amplitude decay rate).
    pub gamma: f64,
    /// External coupling rate, 0 < kappa_ex <= 2 gamma.
    pub kappa_ex: f64,
    /// Coherent CW-CCW backscattering rate induced by the scatterer.
    pub j: f64,
}

impl OpticalParams {
    pub fn new(m: u32, gamma: f64, kappa_ex: f64, j: f64) -> Result<Self, ParamError> {
        check_finite("gamma", gamma)?;
        check_finite("kappa_ex", kappa_ex)?;
        check_finite("J", j)?;
        if m < 1 {
            return Err(ParamError::ModeIndexZero(m));
        }
        if gamma <= 0.0 {
            return Err(ParamError::NonPositiveGamma(gamma));
        }
        if j < 0.0 {
            return Err(ParamError::NegativeCoupling(j));
        }
        if kappa_ex <= 0.0 || kappa_ex > 2.0 * gamma {
            return Err(ParamError::ExternalCouplingRange { kappa_ex, gamma });
        }
        Ok(Self { m, gamma, kappa_ex, j })
    }

    /// Mode index as a float, for use in the closed forms.
    pub fn m_f(&self) -> f64 {
        f64::from(self.m)
    }
}

/// Pump parameters in the frame rotating at the pump frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    /// Pump detuning Delta = omega_L - omega_c (signed rate).
    pub delta: f64,
    /// Pump amplitude |S| per circulation direction (photons^1/2 * rate).
    pub s_mag: f64,
    /// Realization of the bidirectional drive.
    pub pump_mode: PumpMode,
}

impl DriveParams {
    pub fn new(delta: f64, s_mag: f64, pump_mode: PumpMode) -> Result<Self, ParamError> {
        check_finite("Delta", delta)?;
        check_finite("S_mag", s_mag)?;
        if s_mag < 0.0 {
            return Err(ParamError::NegativeDrive(s_mag));
        }
        if let PumpMode::FrequencyOffset { delta_pump } = pump_mode {
            check_finite("delta_pump", delta_pump)?;
            if delta_pump <= 0.0 {
                // The upper bound needs gamma and is enforced in SystemParams::new.
                return Err(ParamError::PumpOffsetRange { delta_pump, gamma: f64::NAN });
            }
        }
        if let PumpMode::FixedPhase { chi } = pump_mode {
            check_finite("chi", chi)?;
        }
        Ok(Self { delta, s_mag, pump_mode })
    }
}

/// Rotor (scatterer) parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechParams {
    /// Moment of inertia (action / rate).
    pub inertia: f64,
    /// Angular damping coefficient Gamma_phi (torque per unit angular velocity).
    pub gamma_phi: f64,
}

impl MechParams {
    pub fn new(inertia: f64, gamma_phi: f64) -> Result<Self, ParamError> {
        check_finite("I", inertia)?;
        check_finite("Gamma_phi", gamma_phi)?;
        if inertia <= 0.0 {
            return Err(ParamError::NonPositiveInertia(inertia));
        }
        if gamma_phi <= 0.0 {
            return Err(ParamError::NonPositiveDamping(gamma_phi));
        }
        Ok(Self { inertia, gamma_phi })
    }
}

/// Complete model constants: doublet, drive, and rotor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub optical: OpticalParams,
    pub drive: DriveParams,
    pub mech: MechParams,
}

impl SystemParams {
    pub fn new(
        optical: OpticalParams,
        drive: DriveParams,
        mech: MechParams,
    ) -> Result<Self, ParamError> {
        if let PumpMode::FrequencyOffset { delta_pump } = drive.pump_mode {
            if delta_pump <= 0.0 || delta_pump >= optical.gamma {
                return Err(ParamError::PumpOffsetRange { delta_pump, gamma: optical.gamma });
            }
        }
        Ok(Self { optical, drive, mech })
    }

    pub fn m_f(&self) -> f64 {
        self.optical.m_f()
    }

    pub fn gamma(&self) -> f64 {
        self.optical.gamma
    }

    pub fn j(&self) -> f64 {
        self.optical.j
    }

    pub fn delta(&self) -> f64 {
        self.drive.delta
    }

    /// Replaces the pump amplitude so that the unperturbed per-pump photon
    /// number equals `n0`.
    pub fn with_n0(mut self, n0: f64) -> Self {
        let g = self.gamma();
        let d = self.delta();
        self.drive.s_mag = (n0 * (g * g + d * d)).sqrt();
        self
    }

    /// Replaces the pump amplitude so that `n0 = mu * n_th`. Fails when no
    /// finite threshold exists at this detuning/coupling.
    pub fn with_mu(self, mu: f64) -> Result<Self, DomainError> {
        match n_threshold(&self) {
            Threshold::Photons(n_th) => Ok(self.with_n0(mu * n_th)),
            Threshold::NoThreshold => Err(DomainError::NoThreshold {
                delta: self.delta(),
                j: self.j(),
            }),
        }
    }

    /// Default relative pump frequency offset: the geometric mean of the
    /// mechanical relaxation rate and the optical half-linewidth, clamped to
    /// `[10 Gamma_phi / I, gamma / 10]` so the lattice averages out over the
    /// mechanical locking time while staying slow versus the optics.
    pub fn default_delta_pump(&self) -> f64 {
        let mech_rate = self.mech.gamma_phi / self.mech.inertia;
        let g = self.gamma();
        // Upper bound wins if the two clamps cross (fast mechanics).
        (g * mech_rate).sqrt().max(10.0 * mech_rate).min(g / 10.0)
    }
}

/// Instantaneous mean-field configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldState {
    /// Co-rotating (+m) mode amplitude (photons^1/2).
    pub alpha_plus: Complex64,
    /// Counter-rotating (-m) mode amplitude (photons^1/2).
    pub alpha_minus: Complex64,
    /// Scatterer angle (rad).
    pub phi: f64,
    /// Scatterer angular velocity dphi/dt (rate).
    pub omega: f64,
}

impl FieldState {
    /// Dark cavity with the scatterer at `phi` moving at `omega`.
    pub fn dark(phi: f64, omega: f64) -> Self {
        Self {
            alpha_plus: Complex64::new(0.0, 0.0),
            alpha_minus: Complex64::new(0.0, 0.0),
            phi,
            omega,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha_plus.re.is_finite()
            && self.alpha_plus.im.is_finite()
            && self.alpha_minus.re.is_finite()
            && self.alpha_minus.im.is_finite()
            && self.phi.is_finite()
            && self.omega.is_finite()
    }
}

/// Observables derived from a [`FieldState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedObservables {
    /// Photon number in the co-rotating mode.
    pub n_plus: f64,
    /// Photon number in the counter-rotating mode.
    pub n_minus: f64,
    /// Total photon number.
    pub n_total: f64,
    /// Optical angular momentum m (n_plus - n_minus), in hbar.
    pub l_opt: f64,
    /// Instantaneous optical torque on the scatterer (hbar * rate).
    pub tau_inst: f64,
    /// Mechanical angular momentum I * Omega, in hbar.
    pub l_phi: f64,
}

impl DerivedObservables {
    pub fn from_state(s: &FieldState, p: &SystemParams) -> Self {
        let n_plus = s.alpha_plus.norm_sqr();
        let n_minus = s.alpha_minus.norm_sqr();
        Self {
            n_plus,
            n_minus,
            n_total: n_plus + n_minus,
            l_opt: p.m_f() * (n_plus - n_minus) * HBAR,
            tau_inst: instantaneous_torque(s, p),
            l_phi: p.mech.inertia * s.omega,
        }
    }

    /// Observables for a sample of the reduced rotor equation, where the
    /// optical fields are eliminated: photon numbers are reported as zero and
    /// the torque is the time-averaged law `tau_rec(Omega)`.
    pub fn from_reduced(omega: f64, p: &SystemParams) -> Self {
        Self {
            n_plus: 0.0,
            n_minus: 0.0,
            n_total: 0.0,
            l_opt: 0.0,
            tau_inst: tau_rec(omega, p),
            l_phi: p.mech.inertia * omega,
        }
    }
}

/// Instability threshold of the rest state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Threshold photon number at which anti-damping equals damping.
    Photons(f64),
    /// No finite threshold: the rest state is linearly stable at any power
    /// (Delta <= 0 or J = 0).
    NoThreshold,
}

impl Threshold {
    pub fn photons(self) -> Option<f64> {
        match self {
            Threshold::Photons(n) => Some(n),
            Threshold::NoThreshold => None,
        }
    }
}

/// Coefficients of the local cubic normal form `I dOmega/dt = r Omega - u_opt Omega^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormCoeffs {
    /// Optical anti-damping slope of the averaged torque at Omega = 0 (action).
    pub gamma_opt: f64,
    /// Cubic coefficient (action * time^2); positive iff 0 < |Delta| < gamma.
    pub u_opt: f64,
    /// Net linear coefficient gamma_opt - Gamma_phi (action).
    pub r: f64,
    /// Threshold photon number, when one exists.
    pub n_th: Threshold,
    /// Pump ratio n0 / n_th, when a finite threshold exists.
    pub mu: Option<f64>,
}

impl NormalFormCoeffs {
    pub fn from_params(p: &SystemParams) -> Self {
        let n_th = n_threshold(p);
        let g_opt = gamma_opt(p);
        Self {
            gamma_opt: g_opt,
            u_opt: cubic_coeff(p),
            r: g_opt - p.mech.gamma_phi,
            n_th,
            mu: n_th.photons().map(|n| photon_number_n0(p) / n),
        }
    }
}

/// Domain violation for operations defined only on part of parameter space.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("the square-root branch requires 0 < Delta < gamma (Delta = {delta}, gamma = {gamma})")]
    OutsideSupercriticalWindow { delta: f64, gamma: f64 },
    #[error("mu must be >= 1 on the branch (got {0})")]
    BelowThreshold(f64),
    #[error("no finite threshold to normalize by (Delta = {delta} must be > 0 and J = {j} must be > 0)")]
    NoThreshold { delta: f64, j: f64 },
    #[error("bad sweep grid: {what}")]
    InvalidGrid { what: &'static str },
}

/// Unperturbed photon number per pump, `|S|^2 / (gamma^2 + Delta^2)`.
pub fn photon_number_n0(p: &SystemParams) -> f64 {
    let g = p.gamma();
    let d = p.delta();
    p.drive.s_mag * p.drive.s_mag / (g * g + d * d)
}

/// Instantaneous optical torque `4 m hbar J Im[e^{2 i m phi} alpha_-^* alpha_+]`,
/// equal to minus the angle gradient of the mean-field interaction energy.
pub fn instantaneous_torque(s: &FieldState, p: &SystemParams) -> f64 {
    let m = p.m_f();
    let phase = Complex64::from_polar(1.0, 2.0 * m * s.phi);
    4.0 * m * HBAR * p.j() * (phase * s.alpha_minus.conj() * s.alpha_plus).im
}

/// Mean-field interaction energy `hbar J (e^{2 i m phi} alpha_-^* alpha_+ + c.c.)`.
/// Exposed so the torque/gradient identity can be checked by finite differences.
pub fn interaction_energy(s: &FieldState, p: &SystemParams) -> f64 {
    let m = p.m_f();
    let phase = Complex64::from_polar(1.0, 2.0 * m * s.phi);
    2.0 * HBAR * p.j() * (phase * s.alpha_minus.conj() * s.alpha_plus).re
}

/// Prefactor `A_m = 4 m hbar gamma J^2 n0` of the time-averaged torque; also
/// sets the torque saturation scale `A_m / gamma^2`.
pub fn torque_prefactor(p: &SystemParams) -> f64 {
    let g = p.gamma();
    4.0 * p.m_f() * HBAR * g * p.j() * p.j() * photon_number_n0(p)
}

/// Time-averaged optical torque on a uniformly rotating scatterer, to leading
/// order in `J / gamma`: the difference of the two Doppler-shifted scattering
/// fluxes. Odd in `Omega` and odd in `Delta`.
pub fn tau_rec(omega: f64, p: &SystemParams) -> f64 {
    let g = p.gamma();
    let d = p.delta();
    let doppler = 2.0 * p.m_f() * omega;
    let lo = d - doppler;
    let hi = d + doppler;
    torque_prefactor(p) * (1.0 / (g * g + lo * lo) - 1.0 / (g * g + hi * hi))
}

/// Optical anti-damping: the slope of [`tau_rec`] at `Omega = 0`,
/// `32 m^2 hbar gamma J^2 n0 Delta / (gamma^2 + Delta^2)^2`.
pub fn gamma_opt(p: &SystemParams) -> f64 {
    let m = p.m_f();
    let g = p.gamma();
    let d = p.delta();
    let denom = g * g + d * d;
    32.0 * m * m * HBAR * g * p.j() * p.j() * photon_number_n0(p) * d / (denom * denom)
}

/// Threshold photon number `Gamma_phi (gamma^2 + Delta^2)^2 / (32 m^2 hbar gamma J^2 Delta)`
/// for `Delta > 0`; the rest state is unconditionally stable at linear order
/// otherwise.
pub fn n_threshold(p: &SystemParams) -> Threshold {
    let d = p.delta();
    let j = p.j();
    if d <= 0.0 || j == 0.0 {
        return Threshold::NoThreshold;
    }
    let m = p.m_f();
    let g = p.gamma();
    let denom = g * g + d * d;
    Threshold::Photons(p.mech.gamma_phi * denom * denom / (32.0 * m * m * HBAR * g * j * j * d))
}

/// Cubic coefficient `u_opt = 8 gamma_opt m^2 (gamma^2 - Delta^2) / (gamma^2 + Delta^2)^2`
/// of the rotor normal form; equals `-(1/6) d^3 tau_rec / dOmega^3` at rest.
pub fn cubic_coeff(p: &SystemParams) -> f64 {
    let m = p.m_f();
    let g = p.gamma();
    let d = p.delta();
    let denom = g * g + d * d;
    8.0 * gamma_opt(p) * m * m * (g * g - d * d) / (denom * denom)
}

/// Supercritical branch of the cubic normal form,
/// `Omega* = (gamma^2 + Delta^2) / (2 m sqrt(2 (gamma^2 - Delta^2))) * sqrt(mu - 1)`.
/// Defined for `0 < Delta < gamma` and `mu >= 1`.
pub fn omega_star_normal_form(mu: f64, p: &SystemParams) -> Result<f64, DomainError> {
    let g = p.gamma();
    let d = p.delta();
    if d <= 0.0 || d >= g {
        return Err(DomainError::OutsideSupercriticalWindow { delta: d, gamma: g });
    }
    if mu < 1.0 {
        return Err(DomainError::BelowThreshold(mu));
    }
    let m = p.m_f();
    Ok((g * g + d * d) / (2.0 * m * (2.0 * (g * g - d * d)).sqrt()) * (mu - 1.0).sqrt())
}

/// Detuning minimizing the threshold photon number: `gamma / sqrt(3)`.
pub fn optimal_detuning(p: &SystemParams) -> f64 {
    p.gamma() / 3.0_f64.sqrt()
}
