//! Acceptance gate: one test per release criterion, each asserting the stated
//! tolerance and runtime budget and printing a single summary line (visible
//! with `--nocapture`; the harness result line carries the pass/fail either
//! way). Reference numbers come from independent closed forms or bisections
//! written out inline here, never from captured implementation output.

use std::process::Command;
use std::time::Instant;

use wgm_rotor_core::{
    backscatter_amplitude, branch, find_steady_rotations, integrate_full, integrate_reduced,
    max_asymmetry_vs_power, n_threshold, refine_peak, time_averaged_torque_oracle, DriveParams,
    FieldState, IntegratorConfig, MechParams, OpticalParams, ProbeConfig, ProbeDirection,
    PumpMode, SystemParams,
};

/// Operating point used throughout: gamma = 1, kappa_ex = 1, Delta = 1/sqrt(3)
/// (threshold-optimal), Gamma_phi = 1, unit pump. m, J, and the inertia vary
/// per criterion.
fn working_point(m: u32, j: f64, inertia: f64) -> SystemParams {
    SystemParams::new(
        OpticalParams::new(m, 1.0, 1.0, j).unwrap(),
        DriveParams::new(1.0 / 3.0_f64.sqrt(), 1.0, PumpMode::PhaseAveraged).unwrap(),
        MechParams::new(inertia, 1.0).unwrap(),
    )
    .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Locates the instability onset dynamically: bisects the pump photon number
/// on the grow/decay classification of a small velocity seed under the
/// reduced rotor equation. Knows nothing of the threshold formula beyond the
/// initial bracket, which is classified before it is trusted.
fn dynamic_onset(p: &SystemParams, lo0: f64, hi0: f64, iters: u32) -> f64 {
    let cfg = IntegratorConfig::defaults_for(p.gamma());
    let w0 = 1e-6 * p.gamma() / (2.0 * p.m_f());
    let t_end = 4000.0 / p.gamma();
    let grows = |n0: f64| {
        let traj = integrate_reduced(w0, t_end, &p.with_n0(n0), &cfg).expect("reduced run");
        traj.states.last().unwrap().omega.abs() > w0
    };
    let (mut lo, mut hi) = (lo0, hi0);
    assert!(!grows(lo), "seed must decay at the bracket floor n0 = {lo}");
    assert!(grows(hi), "seed must grow at the bracket ceiling n0 = {hi}");
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if grows(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_01_threshold_formula_consistency() {
    let t = Instant::now();
    // Fast mechanics (I = 1) so growth and decay show within a short horizon.
    let p = working_point(10, 0.1, 1.0);
    let onset = dynamic_onset(&p, 0.05, 0.15, 12);
    let err = rel(onset, 0.096225);
    assert!(err < 1e-3, "dynamic onset {onset} vs closed form 0.096225, rel err {err:.3e}");
    let dt = t.elapsed().as_secs_f64();
    assert!(dt < 10.0, "budget 10 s exceeded: {dt:.1} s");
    println!("PASS criterion 1: dynamic onset n0 = {onset:.6} vs 0.096225 closed form (rel err {err:.1e}, {dt:.2} s)");
}

#[test]
fn criterion_02_optimal_detuning() {
    let t = Instant::now();
    // Scan the threshold over detuning and refine the minimum; the threshold
    // formula is evaluated fresh per point, the refiner is a parabola fit.
    let deltas = linspace(0.3, 0.9, 601);
    let heights: Vec<f64> = deltas
        .iter()
        .map(|&d| {
            let p = SystemParams::new(
                OpticalParams::new(10, 1.0, 1.0, 0.1).unwrap(),
                DriveParams::new(d, 1.0, PumpMode::PhaseAveraged).unwrap(),
                MechParams::new(1.0, 1.0).unwrap(),
            )
            .unwrap();
            // Negated: the refiner hunts a maximum.
            -n_threshold(&p).photons().unwrap()
        })
        .collect();
    let (argmin, _, _) = refine_peak(&deltas, &heights);
    let expect = 1.0 / 3.0_f64.sqrt();
    let err = (argmin - expect).abs();
    assert!(err < 1e-4, "argmin {argmin} vs gamma/sqrt(3) = {expect}, off by {err:.3e}");
    let dt = t.elapsed().as_secs_f64();
    assert!(dt < 1.0, "budget 1 s exceeded: {dt:.2} s");
    println!("PASS criterion 2: threshold argmin Delta = {argmin:.6} vs {expect:.6} (abs err {err:.1e}, {dt:.2} s)");
}

#[test]
fn criterion_03_m_squared_scaling() {
    let t = Instant::now();
    // Closed form: n_th m^2 must not move across two decades of m.
    let base = n_threshold(&working_point(1, 0.1, 1.0)).photons().unwrap();
    let mut worst = 0.0_f64;
    for m in [2u32, 5, 10, 50] {
        let n = n_threshold(&working_point(m, 0.1, 1.0)).photons().unwrap();
        worst = worst.max(rel(n * (m * m) as f64, base));
    }
    assert!(worst < 1e-12, "n_th m^2 drifts by {worst:.3e} across m");

    // Dynamics: bisected onsets at m = 5 and m = 10 in the same 4x ratio.
    let on5 = dynamic_onset(&working_point(5, 0.1, 1.0), 0.5 * 4.0 * 0.096225, 1.5 * 4.0 * 0.096225, 8);
    let on10 = dynamic_onset(&working_point(10, 0.1, 1.0), 0.5 * 0.096225, 1.5 * 0.096225, 8);
    let ratio = on5 / on10;
    let err = (ratio / 4.0 - 1.0).abs();
    assert!(err < 0.02, "onset(m=5)/onset(m=10) = {ratio} vs 4, rel err {err:.3e}");
    let dt = t.elapsed().as_secs_f64();
    assert!(dt < 30.0, "budget 30 s exceeded: {dt:.1} s");
    println!("PASS criterion 3: n_th m^2 constant to {worst:.1e}; dynamic onsets ratio {ratio:.4} vs 4 (rel err {err:.1e}, {dt:.2} s)");
}

/// Torque-balance root at the working point, found by bisecting the balance
/// equation transcribed directly from the averaged torque law. Independent of
/// the library root finder.
fn balance_root_oracle(mu: f64) -> f64 {
    let (m, g, j, gphi) = (10.0_f64, 1.0_f64, 0.1_f64, 1.0_f64);
    let d = 1.0 / 3.0_f64.sqrt();
    let nth = gphi * (g * g + d * d).powi(2) / (32.0 * m * m * g * j * j * d);
    let am = 4.0 * m * g * j * j * (mu * nth);
    let f = |w: f64| {
        let s = 2.0 * m * w;
        am * (1.0 / (g * g + (d - s) * (d - s)) - 1.0 / (g * g + (d + s) * (d + s))) - gphi * w
    };
    let (mut lo, mut hi) = (1e-9, (d + 5.0 * g) / (2.0 * m));
    assert!(f(lo) > 0.0 && f(hi) < 0.0, "oracle bracket broken at mu = {mu}");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_04_bifurcation_branch() {
    let t = Instant::now();
    let p = working_point(10, 0.1, 1e4);
    let b = branch(&[1.0001, 1.001, 1.01, 1.25], &p).unwrap();

    // Near threshold the branch follows the square-root normal form.
    let (g, d, m) = (1.0_f64, 1.0 / 3.0_f64.sqrt(), 10.0_f64);
    let prefactor = (g * g + d * d) / (2.0 * m * (2.0 * (g * g - d * d)).sqrt());
    let mut worst_nf = 0.0_f64;
    for (i, mu) in [1.0001_f64, 1.001, 1.01].iter().enumerate() {
        let nf = prefactor * (mu - 1.0).sqrt();
        worst_nf = worst_nf.max(rel(b.omega_star[i], nf));
    }
    assert!(worst_nf < 0.01, "branch departs from sqrt law by {worst_nf:.3e}");

    // Farther out the square-root law bends away (its mu = 1.25 extrapolation
    // 0.028868/sqrt(1.25) = 0.02582 already sits 1.8% low); the reference is
    // the exact balance root from the inline bisection oracle.
    let exact = balance_root_oracle(1.25);
    let err = rel(b.omega_star[3], exact);
    assert!(err < 5e-3, "omega* {} vs balance root {exact}, rel err {err:.3e}", b.omega_star[3]);
    let dt = t.elapsed().as_secs_f64();
    assert!(dt < 5.0, "budget 5 s exceeded: {dt:.2} s");
    println!("PASS criterion 4: sqrt-law agreement {worst_nf:.1e} over mu-1 in [1e-4, 1e-2]; omega*(1.25) = {:.8} vs exact {exact:.8} (rel err {err:.1e}, {dt:.2} s)", b.omega_star[3]);
}

#[test]
fn criterion_05_torque_oracle() {
    let t = Instant::now();
    // Reciprocal pumping realized as the incoherent single-pump sum; the
    // averaged fields are integrated blind to the closed form they test.
    let mut p = working_point(10, 0.01, 1e4);
    p.drive.pump_mode = PumpMode::SinglePumpSuperposition;
    let mut half = p;
    half.optical.j = 0.005;
    let cfg = IntegratorConfig::defaults_for(p.gamma());

    let mut worst = 0.0_f64;
    let (mut rat_lo, mut rat_hi) = (f64::INFINITY, 0.0_f64);
    for dop in linspace(0.05, 3.0, 20) {
        let omega = dop / (2.0 * p.m_f());
        let full = time_averaged_torque_oracle(omega, &p, &cfg).unwrap();
        let fine = time_averaged_torque_oracle(omega, &half, &cfg).unwrap();
        worst = worst.max(full.rel_err);
        let contraction = full.rel_err / fine.rel_err;
        rat_lo = rat_lo.min(contraction);
        rat_hi = rat_hi.max(contraction);
        assert!(
            (3.0..=5.0).contains(&contraction),
            "halving J at 2m omega/gamma = {dop}: error contracts x{contraction:.2}, expected ~x4"
        );
    }
    assert!(worst < 1e-3, "oracle disagrees with the torque law by {worst:.3e} at J = 0.01");
    let dt = t.elapsed().as_secs_f64();
    assert!(dt < 120.0, "budget 2 min exceeded: {dt:.1} s");
    println!("PASS criterion 5: oracle rel err <= {worst:.1e} at J/gamma = 0.01 over 20 speeds; halving J contracts x{rat_lo:.2}..x{rat_hi:.2} ({dt:.1} s)");
}

#[test]
fn criterion_06_symmetry_breaking() {
    let t = Instant::now();
    let cfg = IntegratorConfig::defaults_for(1.0);
    let above = working_point(10, 0.1, 100.0).with_mu(1.5).unwrap();
    let target = find_steady_rotations(&above).largest_stable();
    assert!(target > 0.0);
    let w0 = 1e-3 * above.gamma() / (2.0 * above.m_f());
    let mut errs = [0.0_f64; 2];
    for (k, sign) in [1.0_f64, -1.0].iter().enumerate() {
        let traj = integrate_reduced(sign * w0, 4000.0, &above, &cfg).unwrap();
        let end = traj.states.last().unwrap().omega;
        errs[k] = rel(end, sign * target);
        assert!(
            errs[k] < 1e-3,
            "seed sign {sign}: settled at {end} vs {}, rel err {:.3e}",
            sign * target,
            errs[k]
        );
    }

    let below = working_point(10, 0.1, 100.0).with_mu(0.5).unwrap();
    let traj = integrate_reduced(w0, 4000.0, &below, &cfg).unwrap();
    let residual = traj.states.last().unwrap().omega.abs();
    let bound = 1e-6 * below.gamma() / (2.0 * below.m_f());
    assert!(residual < bound, "below threshold the seed must die: |omega| = {residual:.3e}");
    let dt = t.elapsed().as_secs_f64();
    assert!(dt < 10.0, "budget 10 s exceeded: {dt:.1} s");
    println!("PASS criterion 6: seeds +-eps settle on +-{target:.6} (rel errs {:.1e}, {:.1e}); subthreshold residual {residual:.1e} ({dt:.2} s)", errs[0], errs[1]);
}

#[test]
fn criterion_07_full_model_consistency() {
    let t = Instant::now();
    // Slow rotor (I = 1e4) driven reciprocally through a slow pump beat; the
    // full six-dimensional flow must climb out of the dark state and park on
    // the reduced model's fixed point.
    let mut p = working_point(10, 0.05, 1e4).with_mu(1.5).unwrap();
    p.drive.pump_mode = PumpMode::FrequencyOffset { delta_pump: p.default_delta_pump() };
    let target = find_steady_rotations(&p).largest_stable();
    assert!(target > 0.0);

    let t_end = 4.0e5;
    let mut cfg = IntegratorConfig::defaults_for(p.gamma());
    cfg.sample_dt = Some(100.0);
    let traj = integrate_full(&FieldState::dark(0.0, 0.0), t_end, &p, &cfg).unwrap();
    let tail: Vec<f64> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(&ti, _)| ti >= 0.9 * t_end)
        .map(|(_, s)| s.omega.abs())
        .collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let err = rel(mean, target);
    assert!(err < 0.05, "saturated |omega| = {mean} vs reduced fixed point {target}, rel err {err:.3e}");
    let dt = t.elapsed().as_secs_f64();
    assert!(dt < 300.0, "budget 5 min exceeded: {dt:.1} s");
    println!("PASS criterion 7: full model saturates at |omega| = {mean:.6} vs reduced {target:.6} (rel err {err:.1e}, {dt:.1} s)");
}

#[test]
fn criterion_08_conservation() {
    let t = Instant::now();
    // Undriven lossless limit: kill the pump, the optical loss, and the
    // mechanical drag, then watch the total angular momentum.
    let mut p = working_point(10, 0.1, 10.0);
    p.drive.delta = 0.5;
    p.drive.s_mag = 0.0;
    p.optical.gamma = 0.0;
    p.mech.gamma_phi = 0.0;
    let s0 = FieldState {
        alpha_plus: num_complex::Complex64::new(1.0, 0.0),
        alpha_minus: num_complex::Complex64::new(0.0, 0.3),
        phi: 0.2,
        omega: 0.1,
    };
    let cfg = IntegratorConfig {
        rel_tol: 1e-11,
        abs_tol: 1e-13,
        max_step: 0.02,
        sample_dt: Some(50.0),
        scheme: Default::default(),
    };
    let periods = 1e3 * 2.0 * std::f64::consts::PI / p.drive.delta.abs();
    let traj = integrate_full(&s0, periods, &p, &cfg).unwrap();
    let total = |i: usize| traj.observables[i].l_phi + traj.observables[i].l_opt;
    let l0 = total(0);
    let mut drift = 0.0_f64;
    for i in 1..traj.times.len() {
        drift = drift.max((total(i) - l0).abs() / l0.abs());
    }
    assert!(drift < 1e-8, "angular momentum drifts by {drift:.3e} relative over 1e3 periods");
    let dt = t.elapsed().as_secs_f64();
    assert!(dt < 30.0, "budget 30 s exceeded: {dt:.1} s");
    println!("PASS criterion 8: I omega + m(n+ - n-) conserved to {drift:.1e} relative over 1e3 optical periods ({dt:.2} s)");
}

#[test]
fn criterion_09_readout_nonreciprocity() {
    let t = Instant::now();
    let p = working_point(10, 0.1, 1e4);
    // Rotation placing the Doppler splitting at 0.84 linewidths.
    let omega_star = 0.84 / (2.0 * p.m_f());

    let mut worst_mirror = 0.0_f64;
    let mut worst_odd = 0.0_f64;
    for dp in linspace(0.0, 6.0, 241) {
        let rp = |x: f64| backscatter_amplitude(ProbeDirection::Plus, x, omega_star, &p).norm_sqr();
        let rm = |x: f64| backscatter_amplitude(ProbeDirection::Minus, x, omega_star, &p).norm_sqr();
        worst_mirror = worst_mirror.max(rel(rp(dp), rm(-dp)));
        let a = |x: f64| (rp(x) - rm(x)) / (rp(x) + rm(x));
        worst_odd = worst_odd.max((a(dp) + a(-dp)).abs());
    }
    assert!(worst_mirror < 1e-12, "mirror identity broken at {worst_mirror:.3e}");
    assert!(worst_odd < 1e-12, "asymmetry fails to be odd at {worst_odd:.3e}");

    // The asymmetry must switch on exactly where rotation does.
    let probe = ProbeConfig::symmetric(p.gamma(), 3.0, 1001, 0.0, false).unwrap();
    let mu_grid = [0.9, 0.99, 0.999, 1.0, 1.001, 1.01, 1.1];
    let curve = max_asymmetry_vs_power(&mu_grid, &probe, &p).unwrap();
    for (i, &mu) in mu_grid.iter().enumerate() {
        if mu <= 1.0 {
            assert_eq!(curve.max_abs_a_r[i], 0.0, "asymmetry must vanish at mu = {mu}");
        } else {
            assert!(curve.max_abs_a_r[i] > 0.0, "asymmetry must be positive at mu = {mu}");
        }
    }
    let dt = t.elapsed().as_secs_f64();
    assert!(dt < 10.0, "budget 10 s exceeded: {dt:.1} s");
    println!("PASS criterion 9: mirror {worst_mirror:.1e}, oddness {worst_odd:.1e} at 2m omega*/gamma = 0.84; onset boxed in (1, 1.001] ({dt:.2} s)");
}

#[test]
fn criterion_10_property_suite() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wgm-rotor"))
        .args(["validate", "--draws", "1000", "--out"])
        .arg(dir.path())
        .output()
        .expect("spawn validate");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "validate failed:\n{stdout}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let passed = stdout.lines().filter(|l| l.starts_with("ok ")).count();
    assert!(!stdout.contains("FAIL"), "validate reported failures:\n{stdout}");
    assert!(passed >= 25, "expected the full property roster, saw {passed} lines");
    let dt = t.elapsed().as_secs_f64();
    assert!(dt < 120.0, "budget 2 min exceeded: {dt:.1} s");
    println!("PASS criterion 10: validate ran {passed} properties at 1000 draws, all green ({dt:.1} s)");
}
