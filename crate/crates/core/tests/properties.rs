//! Randomized library properties with shrinking. The `validate` subcommand
//! carries the physics invariants at scale; this file keeps a fast
//! shrink-capable net over the algebraic identities and the config plumbing.

use proptest::prelude::*;

use wgm_rotor_core::cli::experiments::linspace;
use wgm_rotor_core::cli::{load_config, ExperimentKind};
use wgm_rotor_core::{
    backscatter_power_weak, find_steady_rotations, gamma_opt, integrate_reduced, refine_peak,
    tau_rec, DriveParams, IntegratorConfig, MechParams, OpticalParams, ProbeDirection, PumpMode,
    SystemParams,
};

#[allow(clippy::too_many_arguments)]
fn params(
    m: u32,
    gamma: f64,
    kex_frac: f64,
    j_frac: f64,
    delta: f64,
    s_mag: f64,
    inertia: f64,
    gamma_phi: f64,
) -> SystemParams {
    SystemParams::new(
        OpticalParams::new(m, gamma, kex_frac * 2.0 * gamma, j_frac * gamma).unwrap(),
        DriveParams::new(delta, s_mag, PumpMode::PhaseAveraged).unwrap(),
        MechParams::new(inertia, gamma_phi).unwrap(),
    )
    .unwrap()
}

prop_compose! {
    fn arb_params()(
        m in 1u32..=60,
        gamma in 0.1f64..10.0,
        kex_frac in 0.05f64..=1.0,
        j_frac in 1e-4f64..0.5,
        delta_frac in -3.0f64..3.0,
        s_mag in 0.01f64..10.0,
        inertia in 0.01f64..1e6,
        gamma_phi in 1e-3f64..10.0,
    ) -> SystemParams {
        params(m, gamma, kex_frac, j_frac, delta_frac * gamma, s_mag, inertia, gamma_phi)
    }
}

proptest! {
    #[test]
    fn averaged_torque_is_odd_in_omega_and_detuning(p in arb_params(), w_frac in -4.0f64..4.0) {
        let omega = w_frac * p.gamma() / (2.0 * p.m_f());
        prop_assert_eq!(tau_rec(-omega, &p), -tau_rec(omega, &p));
        let mut flipped = p;
        flipped.drive.delta = -p.drive.delta;
        prop_assert_eq!(tau_rec(omega, &flipped), -tau_rec(omega, &p));
    }

    #[test]
    fn steady_rotations_form_symmetric_pairs(p in arb_params()) {
        let set = find_steady_rotations(&p);
        let rest: Vec<_> = set.roots.iter().filter(|r| r.omega == 0.0).collect();
        prop_assert_eq!(rest.len(), 1, "exactly one rest root");
        let moving: Vec<_> = set.roots.iter().filter(|r| r.omega != 0.0).collect();
        for r in &moving {
            let twin = moving.iter().find(|q| q.omega == -r.omega);
            prop_assert!(twin.is_some(), "root {} lacks its mirror", r.omega);
            let twin = twin.unwrap();
            prop_assert_eq!(twin.stable, r.stable);
            prop_assert_eq!(twin.marginal, r.marginal);
        }
    }

    #[test]
    fn anti_damping_hits_the_requested_overdrive(p in arb_params(), mu in 0.01f64..20.0) {
        prop_assume!(p.delta() > 0.0 && p.j() > 0.0);
        let q = p.with_mu(mu).unwrap();
        let achieved = gamma_opt(&q) / q.mech.gamma_phi;
        prop_assert!((achieved / mu - 1.0).abs() < 1e-12, "asked mu={mu}, got {achieved}");
    }

    #[test]
    fn weak_backscatter_mirrors_between_directions(
        p in arb_params(),
        dp_frac in -5.0f64..5.0,
        w_frac in -3.0f64..3.0,
    ) {
        let dp = dp_frac * p.gamma();
        let w = w_frac * p.gamma() / (2.0 * p.m_f());
        let lhs = backscatter_power_weak(ProbeDirection::Plus, dp, w, &p);
        let rhs = backscatter_power_weak(ProbeDirection::Minus, -dp, w, &p);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn parabola_vertex_is_recovered_from_any_uniform_grid(
        center in -2.0f64..2.0,
        curv in 0.1f64..50.0,
        height in -5.0f64..5.0,
        n in 7usize..200,
    ) {
        let xs = linspace(-3.0, 3.0, n);
        let ys: Vec<f64> = xs.iter().map(|&x| height - curv * (x - center) * (x - center)).collect();
        let (x, y, _) = refine_peak(&xs, &ys);
        let spacing = xs[1] - xs[0];
        prop_assert!((x - center).abs() < 1e-7 * spacing.max(1.0), "vertex {x} vs {center}");
        prop_assert!((y - height).abs() < 1e-7 * curv.max(1.0));
    }

    #[test]
    fn linspace_pins_endpoints_and_ascends(lo in -1e3f64..1e3, width in 1e-6f64..1e3, n in 2usize..500) {
        let hi = lo + width;
        let xs = linspace(lo, hi, n);
        prop_assert_eq!(xs.len(), n);
        prop_assert_eq!(xs[0], lo);
        prop_assert_eq!(*xs.last().unwrap(), hi);
        prop_assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn resolved_config_text_is_a_fixed_point(
        m in 1u32..=40,
        j in 0.01f64..0.3,
        delta in 0.1f64..1.5,
        n0 in 0.01f64..5.0,
        gamma_phi in 0.1f64..3.0,
        mu_points in 3usize..30,
    ) {
        let text = format!(
            "[optical]\nm = {m}\nJ = {j:?}\n\n[drive]\nDelta = {delta:?}\nn0 = {n0:?}\n\n\
             [mech]\nGamma_phi = {gamma_phi:?}\n\n[experiment]\nexperiment = Bifurcation\nmu_points = {mu_points}\n",
        );
        let cfg = load_config(&text, ExperimentKind::Bifurcation).unwrap();
        let rendered = cfg.render_resolved();
        let again = load_config(&rendered, ExperimentKind::Bifurcation).unwrap();
        prop_assert_eq!(&again.render_resolved(), &rendered, "resolution must be idempotent");
        prop_assert_eq!(again, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reduced_trajectories_are_well_formed(
        p in arb_params(),
        w_frac in -2.0f64..2.0,
        t_frac in 0.5f64..20.0,
    ) {
        let w0 = w_frac * p.gamma() / (2.0 * p.m_f());
        let t_end = t_frac / p.gamma();
        let cfg = IntegratorConfig::defaults_for(p.gamma());
        let traj = integrate_reduced(w0, t_end, &p, &cfg).unwrap();
        prop_assert_eq!(traj.times[0], 0.0);
        prop_assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        let last = *traj.times.last().unwrap();
        prop_assert!((last - t_end).abs() <= 1e-12 * t_end.max(1.0));
        prop_assert!(traj.states.iter().all(|s| s.is_finite()));
        prop_assert_eq!(traj.states[0].omega, w0);
    }
}
