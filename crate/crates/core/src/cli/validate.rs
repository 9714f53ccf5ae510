//! Randomized self-checks behind the `validate` subcommand.
//!
//! Each property is a falsifiable statement about the library, checked over
//! seeded random parameter draws. A property reports a worst-case metric and
//! passes when `metric <= tol`; identities that hold exactly in floating
//! point use `tol = 0`. Draw counts scale with the requested total.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cli::config::{load_config, ExperimentKind};
use crate::cli::manifest::{RunManifest, MANIFEST_FILE};
use crate::cli::table;
use crate::cli::CliError;
use crate::dynamics::{
    integrate_full, integrate_reduced, time_averaged_torque_oracle, IntegratorConfig,
};
use crate::model::{
    cubic_coeff, gamma_opt, instantaneous_torque, interaction_energy, n_threshold,
    omega_star_normal_form, tau_rec, torque_prefactor, DriveParams, FieldState, MechParams,
    OpticalParams, PumpMode, SystemParams, FD_CUBIC_STEP, FD_SLOPE_STEP, HBAR,
};
use crate::readout::{
    backscatter_amplitude, backscatter_power_weak, refine_peak, spectra, through_amplitude,
    ProbeConfig, ProbeDirection,
};
use crate::steadystate::{branch, find_steady_rotations};

/// One checked property.
#[derive(Debug, Clone)]
pub struct PropertyOutcome {
    pub module: &'static str,
    pub name: &'static str,
    pub draws: u32,
    /// Worst-case violation measure over all draws.
    pub metric: f64,
    /// Pass condition is `metric <= tol`.
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug)]
pub struct ValidateReport {
    pub outcomes: Vec<PropertyOutcome>,
    pub draws: u32,
    pub seed: u64,
}

impl ValidateReport {
    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.pass).count()
    }
}

fn outcome(module: &'static str, name: &'static str, draws: u32, metric: f64, tol: f64) -> PropertyOutcome {
    PropertyOutcome { module, name, draws, metric, tol, pass: metric <= tol }
}

/// Scales a per-1000 baseline draw count to the requested total.
fn scaled(base: u32, total: u32) -> u32 {
    ((base as u64 * total as u64) / 1000).max(1) as u32
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn sign(r: &mut ChaCha8Rng) -> f64 {
    if r.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

const M_CHOICES: [u32; 9] = [1, 2, 3, 5, 8, 10, 16, 25, 40];

fn draw_m(r: &mut ChaCha8Rng) -> u32 {
    M_CHOICES[r.gen_range(0..M_CHOICES.len())]
}

#[allow(clippy::too_many_arguments)]
fn make(
    m: u32,
    gamma: f64,
    kappa_ex: f64,
    j: f64,
    delta: f64,
    n0: f64,
    inertia: f64,
    gamma_phi: f64,
    mode: PumpMode,
) -> SystemParams {
    SystemParams::new(
        OpticalParams::new(m, gamma, kappa_ex, j).expect("draw within validated range"),
        DriveParams::new(delta, 1.0, mode).expect("draw within validated range"),
        MechParams::new(inertia, gamma_phi).expect("draw within validated range"),
    )
    .expect("draw within validated range")
    .with_n0(n0)
}

/// Random parameter set; `|Delta| / gamma` drawn from `delta_range`, with a
/// random sign when `signed_delta` is set.
fn draw_params(r: &mut ChaCha8Rng, delta_range: (f64, f64), signed_delta: bool) -> SystemParams {
    let gamma = r.gen_range(0.3..3.0);
    let mut delta = gamma * r.gen_range(delta_range.0..delta_range.1);
    if signed_delta {
        delta *= sign(r);
    }
    make(
        draw_m(r),
        gamma,
        gamma * r.gen_range(0.1..2.0),
        gamma * r.gen_range(0.001..0.2),
        delta,
        r.gen_range(0.05..5.0),
        r.gen_range(10.0..1.0e4),
        r.gen_range(0.1..5.0),
        PumpMode::PhaseAveraged,
    )
}

// ---------------------------------------------------------------- model --

/// tau_rec(-Omega) = -tau_rec(Omega), exactly: negating Omega swaps the two
/// Doppler lobes bitwise.
fn tau_odd_in_omega(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let p = draw_params(r, (0.05, 2.0), true);
        for _ in 0..10 {
            let w = sign(r) * r.gen_range(0.0..3.0) * p.gamma() / (2.0 * p.m_f());
            worst = worst.max((tau_rec(w, &p) + tau_rec(-w, &p)).abs());
        }
    }
    worst
}

/// tau_rec is odd in Delta at fixed pump amplitude, exactly.
fn tau_odd_in_delta(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let p = draw_params(r, (0.05, 2.0), true);
        let mut q = p;
        q.drive.delta = -p.delta();
        for _ in 0..10 {
            let w = sign(r) * r.gen_range(0.0..3.0) * p.gamma() / (2.0 * p.m_f());
            worst = worst.max((tau_rec(w, &q) + tau_rec(w, &p)).abs());
        }
    }
    worst
}

/// The closed-form anti-damping slope matches a central difference of
/// tau_rec at rest.
fn slope_matches_fd(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let p = draw_params(r, (0.1, 2.0), true);
        let h = FD_SLOPE_STEP * p.gamma() / (2.0 * p.m_f());
        let fd = (tau_rec(h, &p) - tau_rec(-h, &p)) / (2.0 * h);
        worst = worst.max(rel(fd, gamma_opt(&p)));
    }
    worst
}

/// The closed-form cubic coefficient matches -1/6 of a third-difference of
/// tau_rec at rest.
fn cubic_matches_fd(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let p = draw_params(r, (0.15, 0.85), true);
        let h = FD_CUBIC_STEP * p.gamma() / (2.0 * p.m_f());
        let fd3 = (tau_rec(2.0 * h, &p) - 2.0 * tau_rec(h, &p) + 2.0 * tau_rec(-h, &p)
            - tau_rec(-2.0 * h, &p))
            / (2.0 * h * h * h);
        worst = worst.max(rel(-fd3 / 6.0, cubic_coeff(&p)));
    }
    worst
}

/// Driving exactly at the threshold photon number makes the anti-damping
/// equal the mechanical damping.
fn threshold_consistency(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let p = draw_params(r, (0.05, 2.5), false);
        let n_th = n_threshold(&p).photons().expect("Delta > 0 and J > 0");
        let q = p.with_n0(n_th);
        worst = worst.max(rel(gamma_opt(&q), p.mech.gamma_phi));
    }
    worst
}

/// At fixed (gamma, J, Delta, n0) the threshold scales as 1/m^2 and the
/// anti-damping as m^2.
fn m_squared_scaling(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let gamma = r.gen_range(0.3..3.0);
        let kappa = gamma * r.gen_range(0.1..2.0);
        let j = gamma * r.gen_range(0.001..0.2);
        let delta = gamma * r.gen_range(0.05..2.5);
        let n0 = r.gen_range(0.05..5.0);
        let at = |m: u32| make(m, gamma, kappa, j, delta, n0, 100.0, 1.0, PumpMode::PhaseAveraged);
        let base = at(1);
        let nth_1 = n_threshold(&base).photons().expect("Delta > 0 and J > 0");
        let g_1 = gamma_opt(&base);
        for m in [2u32, 5, 10, 50] {
            let p = at(m);
            let mf = p.m_f();
            let nth = n_threshold(&p).photons().expect("Delta > 0 and J > 0");
            worst = worst.max(rel(nth * mf * mf, nth_1));
            worst = worst.max(rel(gamma_opt(&p) / (mf * mf), g_1));
        }
    }
    worst
}

/// The instantaneous torque is minus the angle gradient of the interaction
/// energy, checked by central difference.
fn torque_is_energy_gradient(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let p = draw_params(r, (0.0, 2.5), true);
        let s = FieldState {
            alpha_plus: Complex64::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)),
            alpha_minus: Complex64::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)),
            phi: r.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            omega: 0.0,
        };
        let h = 1e-6 / p.m_f();
        let mut hi = s;
        hi.phi = s.phi + h;
        let mut lo = s;
        lo.phi = s.phi - h;
        let grad = (interaction_energy(&hi, &p) - interaction_energy(&lo, &p)) / (2.0 * h);
        let scale = 4.0 * p.m_f() * HBAR * p.j() * s.alpha_plus.norm() * s.alpha_minus.norm();
        worst = worst.max((instantaneous_torque(&s, &p) + grad).abs() / scale.max(1e-300));
    }
    worst
}

/// |tau_rec| never exceeds the saturation scale A_m / gamma^2.
fn torque_saturation(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..draws {
        let p = draw_params(r, (0.05, 2.5), true);
        let bound = torque_prefactor(&p) / (p.gamma() * p.gamma());
        for _ in 0..20 {
            let w = sign(r) * r.gen_range(0.0..5.0) * p.gamma() / (2.0 * p.m_f());
            worst = worst.max(tau_rec(w, &p).abs() / bound - 1.0);
        }
    }
    worst
}

// ---------------------------------------------------------- steadystate --

/// Steady-rotation sets are ascending, contain the rest state, and mirror
/// exactly under Omega -> -Omega with matching stability labels.
fn steady_set_mirrors(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut violations = 0u32;
    for _ in 0..draws {
        let p = draw_params(r, (0.05, 1.5), true);
        let set = find_steady_rotations(&p);
        let roots = &set.roots;
        if !roots.iter().any(|root| root.omega == 0.0) {
            violations += 1;
        }
        if !roots.windows(2).all(|w| w[1].omega > w[0].omega) {
            violations += 1;
        }
        let n = roots.len();
        for i in 0..n {
            let j = n - 1 - i;
            if roots[i].omega != -roots[j].omega
                || roots[i].stable != roots[j].stable
                || roots[i].marginal != roots[j].marginal
            {
                violations += 1;
            }
        }
    }
    f64::from(violations)
}

/// Negating the detuning flips the sign of the averaged torque and removes
/// every rotating steady state, however hard the system is pumped.
fn red_detuning_is_rigid(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let p = draw_params(r, (0.1, 1.2), false)
            .with_mu(r.gen_range(1.2..2.5))
            .expect("Delta > 0 has a threshold");
        let mut q = p;
        q.drive.delta = -p.delta();
        for _ in 0..10 {
            let w = sign(r) * r.gen_range(0.0..3.0) * p.gamma() / (2.0 * p.m_f());
            worst = worst.max((tau_rec(w, &q) + tau_rec(w, &p)).abs());
        }
        let set = find_steady_rotations(&q);
        let rigid = set.roots.len() == 1 && set.roots[0].omega == 0.0 && set.roots[0].stable;
        if !rigid {
            worst = worst.max(1.0);
        }
    }
    worst
}

/// In the supercritical window the rest state loses stability at mu = 1 and
/// a stable +/- rotation pair appears.
fn pitchfork_structure(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut violations = 0u32;
    for _ in 0..draws {
        let p = draw_params(r, (0.1, 0.9), false);
        let below = find_steady_rotations(&p.with_mu(0.9).expect("threshold exists"));
        if below.roots.len() != 1 || !below.roots[0].stable {
            violations += 1;
        }
        let above = find_steady_rotations(&p.with_mu(1.5).expect("threshold exists"));
        let stable: Vec<_> = above.roots.iter().filter(|r| r.stable).collect();
        let rest_unstable = above.roots.iter().any(|r| r.omega == 0.0 && !r.stable);
        let paired = stable.len() == 2
            && stable[0].omega == -stable[1].omega
            && stable[1].omega > 0.0;
        if !(rest_unstable && paired) {
            violations += 1;
        }
        let lo = find_steady_rotations(&p.with_mu(1.0 - 1e-4).expect("threshold exists"));
        let hi = find_steady_rotations(&p.with_mu(1.0 + 1e-4).expect("threshold exists"));
        let lo_rest = lo.roots.iter().find(|r| r.omega == 0.0).map(|r| r.stable);
        let hi_rest = hi.roots.iter().find(|r| r.omega == 0.0).map(|r| r.stable);
        if lo_rest != Some(true) || hi_rest != Some(false) {
            violations += 1;
        }
    }
    f64::from(violations)
}

/// Just above threshold at the optimal detuning, the saturated rotation
/// follows the square-root normal form to 1%.
fn near_threshold_sqrt_law(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let mut p = draw_params(r, (0.3, 0.7), false);
        p.drive.delta = p.gamma() / 3.0_f64.sqrt();
        let mu = 1.0 + 10.0f64.powf(r.gen_range(-4.0..-2.0));
        let q = p.with_mu(mu).expect("threshold exists");
        let w = find_steady_rotations(&q).largest_stable();
        let nf = omega_star_normal_form(mu, &q).expect("inside supercritical window");
        worst = worst.max(rel(w, nf));
    }
    worst
}

/// Below threshold a small velocity seed relaxes exponentially at the net
/// rate (Gamma_phi - Gamma_opt) / I.
fn below_threshold_relaxation(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let gamma = r.gen_range(0.5..2.0);
        let p = make(
            [5u32, 8, 10, 16, 20][r.gen_range(0..5)],
            gamma,
            gamma,
            gamma * r.gen_range(0.02..0.1),
            gamma * r.gen_range(0.3..0.8),
            1.0,
            r.gen_range(20.0..100.0),
            r.gen_range(1.0..2.0),
            PumpMode::PhaseAveraged,
        )
        .with_mu(r.gen_range(0.3..0.7))
        .expect("threshold exists");
        let rate = (p.mech.gamma_phi - gamma_opt(&p)) / p.mech.inertia;
        let w0 = 1e-3 * gamma / (2.0 * p.m_f());
        let (t1, t2) = (0.5 / rate, 1.5 / rate);
        let cfg = IntegratorConfig::defaults_for(gamma);
        let run = |t_end: f64| -> Result<f64, CliError> {
            Ok(integrate_reduced(w0, t_end, &p, &cfg)?.final_state().omega)
        };
        match (run(t1), run(t2)) {
            (Ok(w1), Ok(w2)) => {
                let observed = (w1 / w2).ln() / (t2 - t1);
                worst = worst.max(rel(observed, rate));
            }
            _ => worst = f64::INFINITY,
        }
    }
    worst
}

/// The bifurcation branch is zero below threshold and nondecreasing in mu.
fn branch_monotone(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut violations = 0u32;
    for _ in 0..draws {
        let p = draw_params(r, (0.05, 0.95), false);
        let grid: Vec<f64> = (0..25).map(|i| 0.5 + 2.0 * i as f64 / 24.0).collect();
        match branch(&grid, &p) {
            Err(_) => violations += 1,
            Ok(b) => {
                let wmax = b.omega_star.iter().cloned().fold(0.0, f64::max);
                for i in 0..grid.len() {
                    if b.mu_grid[i] < 1.0 && (b.omega_star[i] != 0.0 || b.normal_form[i] != 0.0) {
                        violations += 1;
                    }
                    if i > 0 && b.omega_star[i] < b.omega_star[i - 1] - 1e-12 * wmax {
                        violations += 1;
                    }
                    if !b.normal_form[i].is_finite() {
                        violations += 1;
                    }
                }
            }
        }
    }
    f64::from(violations)
}

// -------------------------------------------------------------- readout --

fn draw_probe_params(r: &mut ChaCha8Rng, j_lo: f64) -> (SystemParams, f64) {
    let p = {
        let gamma = r.gen_range(0.3..3.0);
        make(
            draw_m(r),
            gamma,
            gamma * r.gen_range(0.1..2.0),
            gamma * r.gen_range(j_lo..0.2),
            gamma * r.gen_range(0.1..1.0) * sign(r),
            r.gen_range(0.05..5.0),
            100.0,
            1.0,
            PumpMode::PhaseAveraged,
        )
    };
    let w = sign(r) * r.gen_range(0.0..2.5) * p.gamma() / (2.0 * p.m_f());
    (p, w)
}

/// R_+(dp) = R_-(-dp) and T_+(dp) = T_-(-dp), exactly: reversing both probe
/// direction and probe detuning conjugates every denominator.
fn probe_mirror_identity(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let (p, w) = draw_probe_params(r, 0.005);
        for _ in 0..10 {
            let dp = sign(r) * r.gen_range(0.0..3.0) * p.gamma();
            let r_p = backscatter_amplitude(ProbeDirection::Plus, dp, w, &p).norm_sqr();
            let r_m = backscatter_amplitude(ProbeDirection::Minus, -dp, w, &p).norm_sqr();
            let t_p = through_amplitude(ProbeDirection::Plus, dp, w, &p).norm_sqr();
            let t_m = through_amplitude(ProbeDirection::Minus, -dp, w, &p).norm_sqr();
            worst = worst.max((r_p - r_m).abs()).max((t_p - t_m).abs());
            let wk_p = backscatter_power_weak(ProbeDirection::Plus, dp, w, &p);
            let wk_m = backscatter_power_weak(ProbeDirection::Minus, -dp, w, &p);
            worst = worst.max((wk_p - wk_m).abs());
        }
    }
    worst
}

/// A_R is exactly odd in probe detuning.
fn asymmetry_is_odd(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    let a_r = |dp: f64, w: f64, p: &SystemParams| -> f64 {
        let rp = backscatter_amplitude(ProbeDirection::Plus, dp, w, p).norm_sqr();
        let rm = backscatter_amplitude(ProbeDirection::Minus, dp, w, p).norm_sqr();
        if rp + rm < 1e-30 {
            0.0
        } else {
            (rp - rm) / (rp + rm)
        }
    };
    for _ in 0..draws {
        let (p, w) = draw_probe_params(r, 0.005);
        for _ in 0..10 {
            let dp = sign(r) * r.gen_range(0.0..3.0) * p.gamma();
            worst = worst.max((a_r(dp, w, &p) + a_r(-dp, w, &p)).abs());
        }
    }
    worst
}

/// At rest the probe response is reciprocal: both directions backscatter
/// identically and the asymmetry vanishes exactly.
fn reciprocal_at_rest(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let (p, _) = draw_probe_params(r, 0.005);
        let probe = ProbeConfig::symmetric(p.gamma(), 3.0, 101, 0.0, false)
            .expect("valid probe grid");
        let s = spectra(&probe, &p);
        for i in 0..s.detunings.len() {
            worst = worst.max((s.r_plus[i] - s.r_minus[i]).abs()).max(s.a_r[i].abs());
        }
    }
    worst
}

/// A rotating scatterer breaks reciprocity: the two probe directions differ
/// somewhere on the scan.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // a NaN split counts as stuck
fn rotation_breaks_reciprocity(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut stuck = 0u32;
    for _ in 0..draws {
        let (p, _) = draw_probe_params(r, 0.01);
        let w = sign(r) * r.gen_range(0.05..2.0) * p.gamma() / (2.0 * p.m_f());
        let probe = ProbeConfig::symmetric(p.gamma(), 3.0, 101, w, false)
            .expect("valid probe grid");
        let s = spectra(&probe, &p);
        let split = (0..s.detunings.len())
            .map(|i| (s.r_plus[i] - s.r_minus[i]).abs())
            .fold(0.0, f64::max);
        if !(split > 0.0) {
            stuck += 1;
        }
    }
    f64::from(stuck)
}

/// In the weak-scattering form each backscatter lobe is a product of two
/// equal-width Lorentzians split by the Doppler shift; while they overlap
/// (2 m |Omega| < 2 gamma) the lobe peaks exactly at the midpoint, so the
/// two probe directions peak 2 m Omega* apart. Refined peak positions must
/// land within half a grid step of +/- m Omega*.
fn peak_splitting(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let gamma = r.gen_range(0.5..2.0);
        let p = make(
            draw_m(r),
            gamma,
            gamma * r.gen_range(0.2..1.5),
            gamma * r.gen_range(0.01..0.1),
            gamma * 0.5,
            1.0,
            100.0,
            1.0,
            PumpMode::PhaseAveraged,
        );
        // Keep 2 m |Omega| well below the 2 gamma bimodality point.
        let w = sign(r) * r.gen_range(0.15..0.75) * gamma / p.m_f();
        let span = 2.0 * w.abs() * p.m_f() / gamma + 2.0;
        let probe = ProbeConfig::symmetric(gamma, span, 2001, w, true).expect("valid probe grid");
        let s = spectra(&probe, &p);
        let spacing = s.detunings[1] - s.detunings[0];
        let (x_plus, _, _) = refine_peak(&s.detunings, &s.r_plus);
        let (x_minus, _, _) = refine_peak(&s.detunings, &s.r_minus);
        worst = worst.max((x_plus - p.m_f() * w).abs() / spacing);
        worst = worst.max((x_minus + p.m_f() * w).abs() / spacing);
        let split = (x_plus - x_minus).abs();
        worst = worst.max(((split - 2.0 * p.m_f() * w.abs()).abs()) / spacing);
    }
    worst
}

/// Scans stay physical: transmission at most unity, backscatter nonnegative
/// and (in weak form) below the kappa^2 J^2 / gamma^4 ceiling, |A_R| <= 1.
fn probe_passivity(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..draws {
        let (p, w) = draw_probe_params(r, 0.005);
        for weak in [false, true] {
            let probe = ProbeConfig::symmetric(p.gamma(), 3.0, 101, w, weak)
                .expect("valid probe grid");
            let s = spectra(&probe, &p);
            let g2 = p.gamma() * p.gamma();
            let ceiling = p.optical.kappa_ex * p.optical.kappa_ex * p.j() * p.j() / (g2 * g2);
            for i in 0..s.detunings.len() {
                worst = worst.max(s.t_plus[i] - 1.0).max(s.t_minus[i] - 1.0);
                worst = worst.max(-s.t_plus[i]).max(-s.t_minus[i]);
                worst = worst.max(-s.r_plus[i]).max(-s.r_minus[i]);
                worst = worst.max(s.a_r[i].abs() - 1.0);
                if weak {
                    worst = worst.max(s.r_plus[i] / ceiling - 1.0).max(s.r_minus[i] / ceiling - 1.0);
                }
            }
        }
    }
    worst
}

// ------------------------------------------------------------- dynamics --

/// With a reciprocal drive the phase-averaged torque equals the single-pump
/// superposition: the cross term carries no net average.
fn pump_average_is_single_pump(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let gamma = r.gen_range(0.5..2.0);
        let mut p = make(
            [5u32, 8, 10][r.gen_range(0..3)],
            gamma,
            gamma,
            gamma * r.gen_range(0.01..0.05),
            gamma * r.gen_range(0.3..1.0) * sign(r),
            r.gen_range(0.3..2.0),
            100.0,
            1.0,
            PumpMode::PhaseAveraged,
        );
        let w = sign(r) * r.gen_range(0.3..1.5) * gamma / (2.0 * p.m_f());
        let cfg = IntegratorConfig::defaults_for(gamma);
        let averaged = time_averaged_torque_oracle(w, &p, &cfg);
        p.drive.pump_mode = PumpMode::SinglePumpSuperposition;
        let single = time_averaged_torque_oracle(w, &p, &cfg);
        match (averaged, single) {
            (Ok(a), Ok(s)) => {
                let floor = torque_prefactor(&p) * 1e-9 / (gamma * gamma);
                let scale = s.tau_analytic.abs().max(a.tau_avg.abs()).max(floor);
                worst = worst.max((a.tau_avg - s.tau_avg).abs() / scale);
            }
            _ => worst = f64::INFINITY,
        }
    }
    worst
}

/// Halving J contracts the oracle's relative error by about 4: the closed
/// form is exact through J^2 and the residual is O(J^2 / gamma^2).
fn oracle_error_is_quadratic(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let gamma = r.gen_range(0.5..2.0);
        let mut p = make(
            [8u32, 10][r.gen_range(0..2)],
            gamma,
            gamma,
            0.02 * gamma,
            gamma * r.gen_range(0.4..0.8),
            1.0,
            100.0,
            1.0,
            PumpMode::SinglePumpSuperposition,
        );
        let w = r.gen_range(0.4..1.5) * gamma / (2.0 * p.m_f());
        let cfg = IntegratorConfig::defaults_for(gamma);
        let coarse = time_averaged_torque_oracle(w, &p, &cfg);
        p.optical.j = 0.01 * gamma;
        let fine = time_averaged_torque_oracle(w, &p, &cfg);
        match (coarse, fine) {
            (Ok(c), Ok(f)) => {
                let ratio = c.rel_err / f.rel_err.max(1e-300);
                worst = worst.max((3.0 - ratio).max(ratio - 5.0).max(0.0));
            }
            _ => worst = f64::INFINITY,
        }
    }
    worst
}

/// With no drive, no optical loss, and no friction, the total angular
/// momentum I Omega + m hbar (n_+ - n_-) is conserved.
fn conservative_limit_conserves_momentum(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let mut p = make(
            [3u32, 5, 8, 12][r.gen_range(0..4)],
            1.0,
            1.0,
            r.gen_range(0.05..0.3),
            r.gen_range(-1.0..1.0),
            1.0,
            r.gen_range(5.0..50.0),
            1.0,
            PumpMode::PhaseAveraged,
        );
        p.optical.gamma = 0.0;
        p.drive.s_mag = 0.0;
        p.mech.gamma_phi = 0.0;
        let s0 = FieldState {
            alpha_plus: Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)),
            alpha_minus: Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)),
            phi: r.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            omega: sign(r) * r.gen_range(0.01..0.1),
        };
        let momentum = |s: &FieldState| {
            p.mech.inertia * s.omega
                + p.m_f() * HBAR * (s.alpha_plus.norm_sqr() - s.alpha_minus.norm_sqr())
        };
        let cfg = IntegratorConfig::defaults_for(1.0)
            .with_rel_tol(1e-12)
            .with_abs_tol(1e-14)
            .with_max_step(0.02)
            .with_sample_dt(10.0);
        match integrate_full(&s0, 200.0, &p, &cfg) {
            Ok(traj) => {
                let scale = p.mech.inertia * s0.omega.abs()
                    + p.m_f() * (s0.alpha_plus.norm_sqr() + s0.alpha_minus.norm_sqr());
                let drift = (momentum(traj.final_state()) - momentum(&s0)).abs();
                worst = worst.max(drift / scale.max(1e-300));
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    worst
}

/// Relabeling the circulation directions (swap modes, negate angle and
/// velocity, conjugate the pump phase) commutes with time evolution.
fn direction_relabel_equivariance(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let gamma = r.gen_range(0.5..2.0);
        let chi = r.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let m = [3u32, 5, 8, 12][r.gen_range(0..4)];
        let mut build = |chi: f64| {
            make(
                m,
                gamma,
                gamma,
                gamma * r.gen_range(0.02..0.1),
                gamma * r.gen_range(0.2..1.0) * sign(r),
                r.gen_range(0.2..1.5),
                r.gen_range(50.0..500.0),
                r.gen_range(0.2..2.0),
                PumpMode::FixedPhase { chi },
            )
        };
        let p_a = build(chi);
        // Same optics and mechanics for the partner, only the phase flips.
        let mut p_b = p_a;
        p_b.drive.pump_mode = PumpMode::FixedPhase { chi: -chi };
        let a_plus = Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let a_minus = Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let phi0 = r.gen_range(-1.0..1.0);
        let w0 = sign(r) * gamma * r.gen_range(1e-3..0.05) / (2.0 * p_a.m_f());
        let rot = Complex64::from_polar(1.0, -chi);
        let s_a = FieldState { alpha_plus: a_plus, alpha_minus: a_minus, phi: phi0, omega: w0 };
        let s_b = FieldState {
            alpha_plus: a_minus * rot,
            alpha_minus: a_plus * rot,
            phi: -phi0,
            omega: -w0,
        };
        let cfg = IntegratorConfig::defaults_for(gamma)
            .with_rel_tol(1e-10)
            .with_abs_tol(1e-12)
            .with_sample_dt(20.0 / gamma);
        let t_end = 20.0 / gamma;
        match (integrate_full(&s_a, t_end, &p_a, &cfg), integrate_full(&s_b, t_end, &p_b, &cfg)) {
            (Ok(ta), Ok(tb)) => {
                let fa = ta.final_state();
                let fb = tb.final_state();
                let scale = 1.0
                    + fa.alpha_plus.norm().max(fa.alpha_minus.norm()).max(fa.phi.abs())
                    + fa.omega.abs();
                let d = [
                    (fb.alpha_plus - fa.alpha_minus * rot).norm(),
                    (fb.alpha_minus - fa.alpha_plus * rot).norm(),
                    (fb.phi + fa.phi).abs(),
                    (fb.omega + fa.omega).abs(),
                ];
                worst = worst.max(d.into_iter().fold(0.0, f64::max) / scale);
            }
            _ => worst = f64::INFINITY,
        }
    }
    worst
}

/// Driven through the instability with an offset pump, the full mean-field
/// rotor saturates at the reduced model's stable rotation speed.
fn full_matches_reduced_fixed_point(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let mu = r.gen_range(1.3..1.7);
        let mut p = make(
            10,
            1.0,
            1.0,
            0.05,
            1.0 / 3.0_f64.sqrt(),
            1.0,
            1000.0,
            1.0,
            PumpMode::PhaseAveraged,
        )
        .with_mu(mu)
        .expect("threshold exists");
        p.drive.pump_mode = PumpMode::FrequencyOffset { delta_pump: p.default_delta_pump() };
        let target = find_steady_rotations(&p).largest_stable();
        let t_end = 40.0 * p.mech.inertia;
        let cfg = IntegratorConfig::defaults_for(1.0).with_sample_dt(t_end / 2000.0);
        match integrate_full(&FieldState::dark(0.0, 0.0), t_end, &p, &cfg) {
            Ok(traj) => {
                let cut = 0.9 * t_end;
                let (mut sum, mut count) = (0.0, 0u32);
                for i in 0..traj.len() {
                    if traj.times[i] >= cut {
                        sum += traj.states[i].omega.abs();
                        count += 1;
                    }
                }
                worst = worst.max(rel(sum / f64::from(count.max(1)), target));
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    worst
}

/// Trajectories are well-formed: aligned arrays, strictly increasing times
/// from 0 to t_end, observables consistent with the states.
fn trajectory_structure(r: &mut ChaCha8Rng, draws: u32) -> f64 {
    let mut violations = 0u32;
    for _ in 0..draws {
        let p = draw_params(r, (0.1, 1.0), true);
        let gamma = p.gamma();
        let s0 = FieldState {
            alpha_plus: Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)),
            alpha_minus: Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)),
            phi: r.gen_range(-1.0..1.0),
            omega: sign(r) * gamma * r.gen_range(0.0..0.05) / (2.0 * p.m_f()),
        };
        let t_end = 5.0 / gamma;
        let cfg = IntegratorConfig::defaults_for(gamma);
        match integrate_full(&s0, t_end, &p, &cfg) {
            Err(_) => violations += 1,
            Ok(traj) => {
                if traj.times.len() != traj.states.len()
                    || traj.times.len() != traj.observables.len()
                    || traj.times[0] != 0.0
                    || (traj.times[traj.len() - 1] - t_end).abs() > 1e-9 * t_end
                    || !traj.times.windows(2).all(|w| w[1] > w[0])
                {
                    violations += 1;
                }
                for i in 0..traj.len() {
                    let (s, o) = (&traj.states[i], &traj.observables[i]);
                    let n_p = s.alpha_plus.norm_sqr();
                    let n_m = s.alpha_minus.norm_sqr();
                    if o.n_plus != n_p
                        || o.n_minus != n_m
                        || o.n_total != n_p + n_m
                        || o.l_opt != p.m_f() * HBAR * (n_p - n_m)
                        || o.l_phi != p.mech.inertia * s.omega
                        || o.tau_inst != instantaneous_torque(s, &p)
                    {
                        violations += 1;
                        break;
                    }
                }
            }
        }
    }
    f64::from(violations)
}

// ------------------------------------------------------------------ cli --

const DET_CONFIG: &str = "\
[optical]
m = 10
J = 0.1

[drive]
Delta = 0.577
n0_over_nth = 1.4

[mech]
Gamma_phi = 1.0

[experiment]
experiment = Bifurcation
mu_min = 0.8
mu_max = 1.6
mu_points = 9
";

const TC_CONFIG: &str = "\
[optical]
m = 10
J = 0.1

[drive]
Delta = 0.57735
n0_over_nth = 1.5

[mech]
Gamma_phi = 1.0

[experiment]
experiment = TorqueCurve
mu_values = 0.5,1.5
omega_points = 51
";

fn run_into(text: &str, kind: ExperimentKind, dir: PathBuf) -> Result<RunManifest, CliError> {
    let mut cfg = load_config(text, kind)?;
    cfg.out_dir = dir;
    crate::cli::run(&cfg)
}

fn manifests_differ(a: &RunManifest, b: &RunManifest) -> u32 {
    if a.outputs.len() != b.outputs.len() {
        return 1;
    }
    let mut bad = 0;
    for (x, y) in a.outputs.iter().zip(&b.outputs) {
        if x.file != y.file || x.sha256 != y.sha256 || x.bytes != y.bytes {
            bad += 1;
        }
    }
    bad
}

/// The same config produces byte-identical outputs on repeat runs.
fn cli_determinism(scratch: &Path) -> f64 {
    let go = || -> Result<u32, CliError> {
        let a = run_into(DET_CONFIG, ExperimentKind::Bifurcation, scratch.join("det-a"))?;
        let b = run_into(DET_CONFIG, ExperimentKind::Bifurcation, scratch.join("det-b"))?;
        Ok(manifests_differ(&a, &b))
    };
    go().map(f64::from).unwrap_or(f64::INFINITY)
}

/// A manifest alone re-executes the run: resolving its embedded config
/// reproduces every output checksum.
fn cli_manifest_sufficiency(scratch: &Path) -> f64 {
    let go = || -> Result<u32, CliError> {
        let first = run_into(TC_CONFIG, ExperimentKind::TorqueCurve, scratch.join("man-a"))?;
        let text = fs::read_to_string(scratch.join("man-a").join(MANIFEST_FILE))
            .map_err(|e| CliError::Io(e.to_string()))?;
        let man = RunManifest::from_json(&text)?;
        if man.experiment != "TorqueCurve" {
            return Ok(1);
        }
        let again = run_into(&man.resolved_config, ExperimentKind::TorqueCurve, scratch.join("man-b"))?;
        Ok(manifests_differ(&first, &again))
    };
    go().map(f64::from).unwrap_or(f64::INFINITY)
}

/// Normalized CSV columns equal the stated transforms of the raw columns,
/// bitwise, when recomputed from the resolved parameters.
fn cli_normalization_fidelity(scratch: &Path) -> f64 {
    let go = || -> Result<f64, CliError> {
        let dir = scratch.join("norm");
        run_into(TC_CONFIG, ExperimentKind::TorqueCurve, dir.clone())?;
        let csv = fs::read_to_string(dir.join("torque-curve.csv"))
            .map_err(|e| CliError::Io(e.to_string()))?;
        let cfg = load_config(TC_CONFIG, ExperimentKind::TorqueCurve)?;
        let p = cfg.params;
        let unit = p.mech.gamma_phi * p.gamma() / (2.0 * p.m_f());
        let (_, header, rows) = table::parse_csv(&csv);
        if header.len() != 7 || rows.is_empty() {
            return Ok(f64::INFINITY);
        }
        let mut worst = 0.0f64;
        for row in &rows {
            let (mu, omega) = (row[0], row[1]);
            let q = p.with_mu(mu)?;
            let tau = tau_rec(omega, &q);
            let damping = q.mech.gamma_phi * omega;
            worst = worst.max((row[2] - 2.0 * p.m_f() * omega / p.gamma()).abs());
            worst = worst.max((row[3] - tau).abs());
            worst = worst.max((row[4] - tau / unit).abs());
            worst = worst.max((row[5] - damping).abs());
            worst = worst.max((row[6] - damping / unit).abs());
        }
        Ok(worst)
    };
    go().unwrap_or(f64::INFINITY)
}

/// Runs the whole suite. `scratch` hosts the round-trip runs of the cli
/// properties; it is created on demand.
pub fn run_suite(total_draws: u32, seed: u64, scratch: &Path) -> ValidateReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let mut out = Vec::new();
    let mut check =
        |module: &'static str, name: &'static str, base: u32, tol: f64, f: &mut dyn FnMut(&mut ChaCha8Rng, u32) -> f64, r: &mut ChaCha8Rng| {
            let n = scaled(base, total_draws);
            out.push(outcome(module, name, n, f(r, n), tol));
        };

    check("model", "torque-odd-in-omega", 100, 0.0, &mut tau_odd_in_omega, r);
    check("model", "torque-odd-in-delta", 100, 0.0, &mut tau_odd_in_delta, r);
    check("model", "antidamping-matches-fd", 100, 1e-6, &mut slope_matches_fd, r);
    check("model", "cubic-matches-fd", 50, 1e-4, &mut cubic_matches_fd, r);
    check("model", "threshold-balances-damping", 100, 1e-12, &mut threshold_consistency, r);
    check("model", "m-squared-scaling", 50, 1e-12, &mut m_squared_scaling, r);
    check("model", "torque-is-energy-gradient", 100, 1e-6, &mut torque_is_energy_gradient, r);
    check("model", "torque-saturation", 100, 1e-12, &mut torque_saturation, r);

    check("steadystate", "set-mirrors-exactly", 60, 0.0, &mut steady_set_mirrors, r);
    check("steadystate", "red-detuning-is-rigid", 30, 0.0, &mut red_detuning_is_rigid, r);
    check("steadystate", "pitchfork-structure", 20, 0.0, &mut pitchfork_structure, r);
    check("steadystate", "near-threshold-sqrt-law", 20, 0.01, &mut near_threshold_sqrt_law, r);
    check("steadystate", "below-threshold-relaxation", 3, 0.01, &mut below_threshold_relaxation, r);
    check("steadystate", "branch-monotone", 20, 0.0, &mut branch_monotone, r);

    check("readout", "mirror-identity", 60, 0.0, &mut probe_mirror_identity, r);
    check("readout", "asymmetry-odd", 40, 0.0, &mut asymmetry_is_odd, r);
    check("readout", "reciprocal-at-rest", 40, 0.0, &mut reciprocal_at_rest, r);
    check("readout", "rotation-breaks-reciprocity", 40, 0.0, &mut rotation_breaks_reciprocity, r);
    check("readout", "peak-splitting", 20, 0.5, &mut peak_splitting, r);
    check("readout", "probe-passivity", 40, 1e-12, &mut probe_passivity, r);

    check("dynamics", "pump-average-is-single-pump", 4, 1e-6, &mut pump_average_is_single_pump, r);
    check("dynamics", "oracle-error-quadratic-in-j", 2, 0.0, &mut oracle_error_is_quadratic, r);
    check("dynamics", "conservative-momentum", 4, 1e-8, &mut conservative_limit_conserves_momentum, r);
    check("dynamics", "direction-relabel-equivariance", 4, 1e-6, &mut direction_relabel_equivariance, r);
    check("dynamics", "full-matches-reduced", 1, 0.05, &mut full_matches_reduced_fixed_point, r);
    check("dynamics", "trajectory-structure", 5, 0.0, &mut trajectory_structure, r);

    out.push(outcome("cli", "determinism", 1, cli_determinism(scratch), 0.0));
    out.push(outcome("cli", "manifest-sufficiency", 1, cli_manifest_sufficiency(scratch), 0.0));
    out.push(outcome("cli", "normalization-fidelity", 1, cli_normalization_fidelity(scratch), 0.0));

    ValidateReport { outcomes: out, draws: total_draws, seed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn cheap_properties_pass_on_small_draw_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(tau_odd_in_omega(&mut rng, 5), 0.0);
        assert_eq!(tau_odd_in_delta(&mut rng, 5), 0.0);
        assert!(slope_matches_fd(&mut rng, 5) <= 1e-6);
        assert!(cubic_matches_fd(&mut rng, 5) <= 1e-4);
        assert!(threshold_consistency(&mut rng, 5) <= 1e-12);
        assert!(m_squared_scaling(&mut rng, 5) <= 1e-12);
        assert!(torque_is_energy_gradient(&mut rng, 5) <= 1e-6);
        assert!(torque_saturation(&mut rng, 5) <= 1e-12);
        assert_eq!(steady_set_mirrors(&mut rng, 3), 0.0);
        assert_eq!(probe_mirror_identity(&mut rng, 5), 0.0);
        assert_eq!(asymmetry_is_odd(&mut rng, 5), 0.0);
        assert_eq!(reciprocal_at_rest(&mut rng, 3), 0.0);
        assert!(peak_splitting(&mut rng, 2) <= 0.5);
        assert!(probe_passivity(&mut rng, 3) <= 1e-12);
    }

    #[test]
    fn cli_round_trip_properties_pass() {
        let dir = tempdir().unwrap();
        assert_eq!(cli_determinism(dir.path()), 0.0);
        assert_eq!(cli_manifest_sufficiency(dir.path()), 0.0);
        assert_eq!(cli_normalization_fidelity(dir.path()), 0.0);
    }

    #[test]
    fn draw_scaling_keeps_at_least_one() {
        assert_eq!(scaled(100, 1000), 100);
        assert_eq!(scaled(1, 10), 1);
        assert_eq!(scaled(3, 2000), 6);
    }
}
