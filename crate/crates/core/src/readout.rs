//! Weak-probe linear response of the rotating scatterer state: backscattered
//! spectra for the two probe directions, their normalized asymmetry, and the
//! same-frequency through transmission.

use num_complex::Complex64;

use crate::model::{DomainError, SystemParams};
use crate::steadystate;

/// Backscattered power sum below which the asymmetry ratio is flagged
/// undefined instead of evaluated.
pub const ASYMMETRY_FLOOR: f64 = 1e-30;

/// Default probe grid half-width in units of gamma.
pub const DEFAULT_PROBE_SPAN: f64 = 3.0;

/// Default probe grid size (odd, so 0 detuning is a grid point).
pub const DEFAULT_PROBE_POINTS: usize = 4001;

/// Probe launch direction: co-rotating (+) or counter-rotating (-) with the
/// mode the pump labels positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeDirection {
    Plus,
    Minus,
}

impl ProbeDirection {
    fn sign(self) -> f64 {
        match self {
            ProbeDirection::Plus => 1.0,
            ProbeDirection::Minus => -1.0,
        }
    }
}

/// Probe sweep specification.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    /// Strictly ascending probe detunings relative to the cavity resonance.
    pub detuning_grid: Vec<f64>,
    /// Mechanical angular velocity entering the response.
    pub omega_star: f64,
    /// Use the factorized weak-scattering form instead of the full response.
    pub use_weak_approx: bool,
}

impl ProbeConfig {
    pub fn new(
        detuning_grid: Vec<f64>,
        omega_star: f64,
        use_weak_approx: bool,
    ) -> Result<Self, DomainError> {
        if detuning_grid.is_empty()
            || detuning_grid.iter().any(|d| !d.is_finite())
            || detuning_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(DomainError::InvalidGrid {
                what: "detuning_grid must be nonempty, finite, strictly ascending",
            });
        }
        if !omega_star.is_finite() {
            return Err(DomainError::InvalidGrid { what: "omega_star must be finite" });
        }
        Ok(Self { detuning_grid, omega_star, use_weak_approx })
    }

    /// Uniform grid of `points` detunings over `[-span*gamma, span*gamma]`,
    /// symmetric about zero. Defaults: 4001 points, span 3.
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN span/gamma must be rejected
    pub fn symmetric(
        gamma: f64,
        span: f64,
        points: usize,
        omega_star: f64,
        use_weak_approx: bool,
    ) -> Result<Self, DomainError> {
        if points < 2 || !(span > 0.0) || !(gamma > 0.0) {
            return Err(DomainError::InvalidGrid {
                what: "symmetric probe grid needs points >= 2 and span > 0",
            });
        }
        let half = span * gamma;
        let n = points as f64 - 1.0;
        let grid = (0..points).map(|i| -half + 2.0 * half * i as f64 / n).collect();
        Self::new(grid, omega_star, use_weak_approx)
    }
}

/// Direction-resolved probe response over a detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub detunings: Vec<f64>,
    /// Backscattered power ratio for the + probe.
    pub r_plus: Vec<f64>,
    /// Backscattered power ratio for the - probe.
    pub r_minus: Vec<f64>,
    /// Through transmission for the + probe.
    pub t_plus: Vec<f64>,
    /// Through transmission for the - probe.
    pub t_minus: Vec<f64>,
    /// Normalized asymmetry (R+ - R-)/(R+ + R-); 0 where flagged undefined.
    pub a_r: Vec<f64>,
    /// False where the asymmetry denominator fell below [`ASYMMETRY_FLOOR`].
    pub a_r_defined: Vec<bool>,
}

/// Amplitude scattered into the opposite circulation channel for a probe at
/// detuning `delta_p`: `-i kex J / [(g - i dp)(g - i(dp -/+ 2 m W)) + J^2]`,
/// with the Doppler sign tied to the probe direction.
pub fn backscatter_amplitude(
    direction: ProbeDirection,
    delta_p: f64,
    omega_star: f64,
    p: &SystemParams,
) -> Complex64 {
    let g = p.gamma();
    let j = p.j();
    let shifted = delta_p - direction.sign() * 2.0 * p.m_f() * omega_star;
    let den = Complex64::new(g, -delta_p) * Complex64::new(g, -shifted) + j * j;
    Complex64::new(0.0, -p.optical.kappa_ex * j) / den
}

/// Weak-scattering backscattered power: product of the two unit Lorentzians
/// at the probe and Doppler-shifted channel centers.
pub fn backscatter_power_weak(
    direction: ProbeDirection,
    delta_p: f64,
    omega_star: f64,
    p: &SystemParams,
) -> f64 {
    let g = p.gamma();
    let j = p.j();
    let kex = p.optical.kappa_ex;
    let shifted = delta_p - direction.sign() * 2.0 * p.m_f() * omega_star;
    kex * kex * j * j / ((g * g + delta_p * delta_p) * (g * g + shifted * shifted))
}

/// Same-frequency through amplitude
/// `1 - kex / [g - i dp + J^2/(g - i(dp -/+ 2 m W))]`.
pub fn through_amplitude(
    direction: ProbeDirection,
    delta_p: f64,
    omega_star: f64,
    p: &SystemParams,
) -> Complex64 {
    let g = p.gamma();
    let j = p.j();
    let shifted = delta_p - direction.sign() * 2.0 * p.m_f() * omega_star;
    let effective = Complex64::new(g, -delta_p) + j * j / Complex64::new(g, -shifted);
    1.0 - p.optical.kappa_ex / effective
}

/// Evaluates backscattered powers, transmissions, and asymmetry over the
/// probe grid.
pub fn spectra(cfg: &ProbeConfig, p: &SystemParams) -> Spectrum {
    let n = cfg.detuning_grid.len();
    let mut out = Spectrum {
        detunings: cfg.detuning_grid.clone(),
        r_plus: Vec::with_capacity(n),
        r_minus: Vec::with_capacity(n),
        t_plus: Vec::with_capacity(n),
        t_minus: Vec::with_capacity(n),
        a_r: Vec::with_capacity(n),
        a_r_defined: Vec::with_capacity(n),
    };
    for &dp in &cfg.detuning_grid {
        let (rp, rm) = if cfg.use_weak_approx {
            (
                backscatter_power_weak(ProbeDirection::Plus, dp, cfg.omega_star, p),
                backscatter_power_weak(ProbeDirection::Minus, dp, cfg.omega_star, p),
            )
        } else {
            (
                backscatter_amplitude(ProbeDirection::Plus, dp, cfg.omega_star, p).norm_sqr(),
                backscatter_amplitude(ProbeDirection::Minus, dp, cfg.omega_star, p).norm_sqr(),
            )
        };
        let tp = through_amplitude(ProbeDirection::Plus, dp, cfg.omega_star, p).norm_sqr();
        let tm = through_amplitude(ProbeDirection::Minus, dp, cfg.omega_star, p).norm_sqr();
        let sum = rp + rm;
        let defined = sum >= ASYMMETRY_FLOOR;
        out.r_plus.push(rp);
        out.r_minus.push(rm);
        out.t_plus.push(tp);
        out.t_minus.push(tm);
        out.a_r.push(if defined { (rp - rm) / sum } else { 0.0 });
        out.a_r_defined.push(defined);
    }
    out
}

/// Grid argmax refined by a three-point parabola. Returns the refined
/// abscissa, the parabola's peak value, and the grid spacing at the peak as
/// the uncertainty.
pub fn refine_peak(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    debug_assert_eq!(xs.len(), ys.len());
    debug_assert!(!xs.is_empty());
    let mut k = 0;
    for (i, &y) in ys.iter().enumerate() {
        if y > ys[k] {
            k = i;
        }
    }
    if k == 0 || k + 1 == ys.len() {
        let spacing = if xs.len() > 1 {
            (xs[1] - xs[0]).abs()
        } else {
            0.0
        };
        return (xs[k], ys[k], spacing);
    }
    let (x0, x1, x2) = (xs[k - 1], xs[k], xs[k + 1]);
    let (y0, y1, y2) = (ys[k - 1], ys[k], ys[k + 1]);
    let h = 0.5 * (x2 - x0);
    let denom = y0 - 2.0 * y1 + y2;
    if denom >= 0.0 {
        return (x1, y1, h);
    }
    let offset = 0.5 * (y0 - y2) / denom;
    let x = x1 + offset * h;
    let y = y1 - 0.25 * (y0 - y2) * offset;
    (x, y, h)
}

/// Maximum backscattering asymmetry versus pump power.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymmetryCurve {
    /// Ascending pump powers in units of the threshold.
    pub mu_grid: Vec<f64>,
    /// Largest stable rotation per grid point.
    pub omega_star: Vec<f64>,
    /// max over the probe grid of |A_R|, 0 below threshold.
    pub max_abs_a_r: Vec<f64>,
    /// Probe detuning attaining the maximum (parabola-refined); 0 where the
    /// asymmetry vanishes identically.
    pub argmax_delta_p: Vec<f64>,
}

/// Sweeps pump power, feeds each saturated rotation into the probe response,
/// and records the peak |A_R| over the probe grid.
pub fn max_asymmetry_vs_power(
    mu_grid: &[f64],
    probe: &ProbeConfig,
    p: &SystemParams,
) -> Result<AsymmetryCurve, DomainError> {
    let b = steadystate::branch(mu_grid, p)?;
    let mut max_abs = Vec::with_capacity(mu_grid.len());
    let mut argmax = Vec::with_capacity(mu_grid.len());
    for &omega in &b.omega_star {
        if omega == 0.0 {
            max_abs.push(0.0);
            argmax.push(0.0);
            continue;
        }
        let cfg = ProbeConfig {
            detuning_grid: probe.detuning_grid.clone(),
            omega_star: omega,
            use_weak_approx: probe.use_weak_approx,
        };
        let s = spectra(&cfg, p);
        let abs: Vec<f64> = s
            .a_r
            .iter()
            .zip(&s.a_r_defined)
            .map(|(&a, &def)| if def { a.abs() } else { 0.0 })
            .collect();
        let (x, y, _) = refine_peak(&s.detunings, &abs);
        max_abs.push(y.min(1.0));
        argmax.push(x);
    }
    Ok(AsymmetryCurve {
        mu_grid: mu_grid.to_vec(),
        omega_star: b.omega_star,
        max_abs_a_r: max_abs,
        argmax_delta_p: argmax,
    })
}
