//! Steady rotations from torque balance: root finding on the net torque,
//! stability classification, the bifurcation branch versus pump power, and
//! the detuning/power phase diagram.

use crate::model::{
    n_threshold, omega_star_normal_form, tau_rec, DomainError, NormalFormCoeffs, SystemParams,
    Threshold,
};

/// Scan intervals for bracketing roots of the net torque (2049 grid points).
pub const SCAN_INTERVALS: usize = 2048;

/// Bisection termination: bracket width relative to its upper edge.
pub const BISECT_REL_TOL: f64 = 1e-12;

/// Finite-difference step for stability slopes, as a fraction of the scan
/// range.
pub const STABILITY_FD_FRACTION: f64 = 1e-6;

/// Slope magnitude below which a root is marginal, relative to the
/// mechanical damping. The finite-difference slope at an exactly critical
/// rest state is not zero but O(u h^2) from the cubic term bleeding through
/// the prescribed step, about 1e-10 of the damping at reference parameters;
/// 1e-9 sits above that floor and far below any off-critical slope.
pub const MARGINAL_SLOPE_REL: f64 = 1e-9;

/// One steady rotation with its linear stability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyRoot {
    /// Angular velocity solving the torque balance.
    pub omega: f64,
    /// Negative net-torque slope (restoring). Marginal roots are reported
    /// as stable.
    pub stable: bool,
    /// Slope indistinguishable from zero (critical point).
    pub marginal: bool,
}

/// All steady rotations of the reduced rotor equation, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyRotationSet {
    /// Roots in ascending order; the rest state is always present and
    /// nonzero roots come in +/- pairs with identical labels.
    pub roots: Vec<SteadyRoot>,
    /// Pump power over threshold, when a threshold exists.
    pub mu: Option<f64>,
    /// Parameter snapshot the set was computed for.
    pub params: SystemParams,
}

impl SteadyRotationSet {
    /// Largest stable angular velocity (0 when only the rest state is
    /// stable).
    pub fn largest_stable(&self) -> f64 {
        self.roots
            .iter()
            .filter(|r| r.stable)
            .map(|r| r.omega)
            .fold(0.0, f64::max)
    }
}

/// Bifurcation branch: largest stable rotation versus pump power.
#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationBranch {
    /// Ascending pump powers in units of the threshold.
    pub mu_grid: Vec<f64>,
    /// Largest stable angular velocity per grid point (0 below threshold).
    pub omega_star: Vec<f64>,
    /// Square-root normal-form prediction per grid point: 0 below threshold,
    /// NaN where the normal form does not apply (detuning outside (0, gamma)).
    pub normal_form: Vec<f64>,
}

/// Saturated Doppler shift over a (detuning, power) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagramGrid {
    /// Ascending positive detunings.
    pub delta_grid: Vec<f64>,
    /// Ascending pump powers in units of the local threshold.
    pub mu_grid: Vec<f64>,
    /// `doppler[d][m]` = |2 m_mode Omega*| / gamma at `(delta_grid[d],
    /// mu_grid[m])`, with Omega* the largest stable rotation.
    pub doppler: Vec<Vec<f64>>,
    /// Threshold photon number per detuning column.
    pub threshold_line: Vec<f64>,
}

/// Net torque on the rotor at clamped angular velocity: recoil minus
/// mechanical damping.
pub fn net_torque(omega: f64, p: &SystemParams) -> f64 {
    tau_rec(omega, p) - p.mech.gamma_phi * omega
}

fn bisect<F: Fn(f64) -> f64>(g: &F, mut lo: f64, mut hi: f64, mut g_lo: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= BISECT_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return mid;
        }
        if g_lo * g_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            g_lo = g_mid;
        }
    }
    0.5 * (lo + hi)
}

/// Finds every steady rotation by scanning the net torque over
/// `[0, (|Delta|+5 gamma)/(2m)]` on 2049 points, bisecting each sign change
/// to relative 1e-12, and mirroring to negative velocities (the net torque
/// is odd). Stability comes from the sign of the central finite-difference
/// slope at each root; a slope within [`MARGINAL_SLOPE_REL`] of zero marks
/// the root marginal and keeps it flagged stable.
pub fn find_steady_rotations(p: &SystemParams) -> SteadyRotationSet {
    let scan_max = (p.delta().abs() + 5.0 * p.gamma()) / (2.0 * p.m_f());
    let g = |w: f64| net_torque(w, p);

    // The rest state is an exact root; bracket the rest of the axis starting
    // just above it so a sign change hiding below the first grid point is
    // still caught.
    let mut positive = Vec::new();
    let mut prev_w = scan_max * 1e-9;
    let mut prev_g = g(prev_w);
    for i in 1..=SCAN_INTERVALS {
        let w = scan_max * i as f64 / SCAN_INTERVALS as f64;
        let g_w = g(w);
        if prev_g == 0.0 {
            positive.push(prev_w);
        } else if g_w != 0.0 && prev_g.signum() != g_w.signum() {
            positive.push(bisect(&g, prev_w, w, prev_g));
        }
        prev_w = w;
        prev_g = g_w;
    }
    if prev_g == 0.0 {
        positive.push(prev_w);
    }
    positive.sort_by(|a, b| a.partial_cmp(b).unwrap());
    positive.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * scan_max);

    let fd_step = STABILITY_FD_FRACTION * scan_max;
    let classify = |omega: f64| {
        let slope = (g(omega + fd_step) - g(omega - fd_step)) / (2.0 * fd_step);
        let marginal = slope.abs() <= MARGINAL_SLOPE_REL * p.mech.gamma_phi;
        SteadyRoot { omega, stable: slope < 0.0 || marginal, marginal }
    };

    let upper: Vec<SteadyRoot> = positive.into_iter().map(classify).collect();
    let mut roots = Vec::with_capacity(2 * upper.len() + 1);
    for r in upper.iter().rev() {
        roots.push(SteadyRoot { omega: -r.omega, ..*r });
    }
    roots.push(classify(0.0));
    roots.extend(upper);

    SteadyRotationSet { roots, mu: NormalFormCoeffs::from_params(p).mu, params: *p }
}

fn check_grid(grid: &[f64], what: &'static str, positive: bool) -> Result<(), DomainError> {
    if grid.is_empty() {
        return Err(DomainError::InvalidGrid { what });
    }
    for (i, &v) in grid.iter().enumerate() {
        let floor_ok = if positive { v > 0.0 } else { v >= 0.0 };
        if !v.is_finite() || !floor_ok || (i > 0 && v <= grid[i - 1]) {
            return Err(DomainError::InvalidGrid { what });
        }
    }
    Ok(())
}

/// Tracks the largest stable rotation as the pump power sweeps through
/// threshold, with the square-root normal-form overlay for comparison.
/// The drive magnitude in `p` is ignored; each grid point pins the photon
/// number to `mu * n_th`.
pub fn branch(mu_grid: &[f64], p: &SystemParams) -> Result<BifurcationBranch, DomainError> {
    if p.delta() <= 0.0 {
        return Err(DomainError::NoThreshold { delta: p.delta(), j: p.j() });
    }
    check_grid(mu_grid, "mu_grid must be ascending and non-negative", false)?;
    let mut omega_star = Vec::with_capacity(mu_grid.len());
    let mut normal_form = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        let pm = p.with_mu(mu)?;
        omega_star.push(find_steady_rotations(&pm).largest_stable());
        normal_form.push(if mu < 1.0 {
            0.0
        } else {
            omega_star_normal_form(mu, p).unwrap_or(f64::NAN)
        });
    }
    Ok(BifurcationBranch { mu_grid: mu_grid.to_vec(), omega_star, normal_form })
}

/// Computes the saturated Doppler shift `|2 m Omega*|/gamma` over a
/// (detuning, power) grid, with the threshold photon number per detuning as
/// the phase boundary.
pub fn phase_diagram(
    delta_grid: &[f64],
    mu_grid: &[f64],
    p: &SystemParams,
) -> Result<PhaseDiagramGrid, DomainError> {
    check_grid(delta_grid, "delta_grid must be ascending and positive", true)?;
    check_grid(mu_grid, "mu_grid must be ascending and non-negative", false)?;
    let two_m = 2.0 * p.m_f();
    let mut doppler = Vec::with_capacity(delta_grid.len());
    let mut threshold_line = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let mut q = *p;
        q.drive.delta = delta;
        threshold_line.push(match n_threshold(&q) {
            Threshold::Photons(n) => n,
            Threshold::NoThreshold => {
                return Err(DomainError::NoThreshold { delta, j: q.j() })
            }
        });
        let mut row = Vec::with_capacity(mu_grid.len());
        for &mu in mu_grid {
            let qm = q.with_mu(mu)?;
            row.push(two_m * find_steady_rotations(&qm).largest_stable() / q.gamma());
        }
        doppler.push(row);
    }
    Ok(PhaseDiagramGrid {
        delta_grid: delta_grid.to_vec(),
        mu_grid: mu_grid.to_vec(),
        doppler,
        threshold_line,
    })
}
