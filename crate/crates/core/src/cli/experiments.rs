//! Maps each experiment to library calls and renders the results as CSV
//! (and optionally SVG). All quantities appear both raw and in the plotted
//! normalizations: torque in units of `Gamma_phi*gamma/(2m)`, velocity as
//! the Doppler shift `2m*Omega/gamma`, power as `n0/n_th`.

use crate::cli::config::{
    EvolutionModel, Experiment, RunConfig, SpectraRotation,
};
use crate::cli::svg::{self, Series};
use crate::cli::table::{Cell, Table};
use crate::cli::CliError;
use crate::dynamics::{integrate_full, integrate_reduced, time_averaged_torque_oracle};
use crate::model::{
    n_threshold, optimal_detuning, tau_rec, DomainError, FieldState, SystemParams,
};
use crate::readout::{self, ProbeConfig};
use crate::steadystate::{self, find_steady_rotations};

/// One file a run produces, still in memory.
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(n >= 2);
    let step = (hi - lo) / (n as f64 - 1.0);
    // The last point is pinned so the grid ends exactly on the stated bound
    // (the stepped form can land an ulp off it).
    (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
}

fn doppler(omega: f64, p: &SystemParams) -> f64 {
    2.0 * p.m_f() * omega / p.gamma()
}

/// Torque unit of the normalized plots.
fn torque_unit(p: &SystemParams) -> f64 {
    p.mech.gamma_phi * p.gamma() / (2.0 * p.m_f())
}

/// Runs the configured experiment and renders its outputs.
pub fn execute(cfg: &RunConfig) -> Result<Vec<OutputFile>, CliError> {
    let stem = cfg.experiment.kind().file_stem();
    let (table, plot) = match &cfg.experiment {
        Experiment::TorqueCurve { mu_values, omega_points } => {
            torque_curve(&cfg.params, mu_values, *omega_points)?
        }
        Experiment::Bifurcation { mu_min, mu_max, mu_points } => {
            bifurcation(&cfg.params, *mu_min, *mu_max, *mu_points)?
        }
        Experiment::TimeEvolution { model, t_end, seed_omega, both_signs, phi0 } => {
            time_evolution(cfg, *model, *t_end, *seed_omega, *both_signs, *phi0)?
        }
        Experiment::PhaseDiagram { delta_min, delta_max, delta_points, mu_min, mu_max, mu_points } => {
            phase_diagram(
                &cfg.params,
                linspace(*delta_min, *delta_max, *delta_points),
                linspace(*mu_min, *mu_max, *mu_points),
            )?
        }
        Experiment::Spectra { rotation, probe_points, probe_span, use_weak_approx } => {
            spectra(&cfg.params, *rotation, *probe_points, *probe_span, *use_weak_approx)?
        }
        Experiment::Asymmetry { mu_min, mu_max, mu_points, probe_points, probe_span, use_weak_approx } => {
            asymmetry(
                &cfg.params,
                linspace(*mu_min, *mu_max, *mu_points),
                *probe_points,
                *probe_span,
                *use_weak_approx,
            )?
        }
        Experiment::Threshold { delta_min, delta_max, delta_points } => {
            threshold(&cfg.params, linspace(*delta_min, *delta_max, *delta_points))?
        }
        Experiment::OracleCheck { j_values, doppler_min, doppler_max, omega_points } => {
            oracle_check(cfg, j_values, *doppler_min, *doppler_max, *omega_points)?
        }
    };
    let mut files = vec![OutputFile {
        name: format!("{stem}.csv"),
        bytes: table.render().into_bytes(),
    }];
    if cfg.emit_svg {
        files.push(OutputFile { name: format!("{stem}.svg"), bytes: plot.into_bytes() });
    }
    Ok(files)
}

fn torque_curve(
    p: &SystemParams,
    mu_values: &[f64],
    omega_points: usize,
) -> Result<(Table, String), CliError> {
    let unit = torque_unit(p);
    let scan_max = (p.delta().abs() + 5.0 * p.gamma()) / (2.0 * p.m_f());
    let omegas = linspace(-scan_max, scan_max, omega_points);
    let mut table = Table::new(&[
        "mu[n0/n_th]",
        "omega[rate]",
        "doppler[2mOmega/gamma]",
        "tau[hbar*rate^2]",
        "tau_norm[Gamma_phi*gamma/(2m)]",
        "damping[hbar*rate^2]",
        "damping_norm[Gamma_phi*gamma/(2m)]",
    ]);
    let mut series = Vec::new();
    for &mu in mu_values {
        let q = p.with_mu(mu)?;
        let set = find_steady_rotations(&q);
        for root in &set.roots {
            table.comment(format!(
                "intersection mu={mu:?} omega={:?} stable={} marginal={}",
                root.omega, root.stable, root.marginal
            ));
        }
        let mut pts = Vec::with_capacity(omegas.len());
        for &omega in &omegas {
            let tau = tau_rec(omega, &q);
            let damping = q.mech.gamma_phi * omega;
            table.row(vec![
                Cell::F(mu),
                Cell::F(omega),
                Cell::F(doppler(omega, p)),
                Cell::F(tau),
                Cell::F(tau / unit),
                Cell::F(damping),
                Cell::F(damping / unit),
            ]);
            pts.push((doppler(omega, p), tau / unit));
        }
        series.push(Series { label: format!("tau_rec, mu={mu:?}"), points: pts });
    }
    series.push(Series {
        label: "Gamma_phi*Omega".to_string(),
        points: omegas
            .iter()
            .map(|&w| (doppler(w, p), p.mech.gamma_phi * w / unit))
            .collect(),
    });
    let plot = svg::line_plot(
        "Averaged recoil torque vs damping",
        "2m*Omega/gamma",
        "torque [Gamma_phi*gamma/(2m)]",
        &series,
    );
    Ok((table, plot))
}

fn bifurcation(
    p: &SystemParams,
    mu_min: f64,
    mu_max: f64,
    mu_points: usize,
) -> Result<(Table, String), CliError> {
    let grid = linspace(mu_min, mu_max, mu_points);
    let b = steadystate::branch(&grid, p)?;
    let n_th = n_threshold(p)
        .photons()
        .expect("branch succeeded, so a finite threshold exists");
    let mut table = Table::new(&[
        "mu[n0/n_th]",
        "n0[photons]",
        "omega_star[rate]",
        "doppler[2mOmega/gamma]",
        "omega_nf[rate]",
        "doppler_nf[2mOmega/gamma]",
    ]);
    table.comment(format!("n_th={n_th:?}"));
    let mut exact = Vec::with_capacity(grid.len());
    let mut overlay = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let (mu, w, nf) = (b.mu_grid[i], b.omega_star[i], b.normal_form[i]);
        table.row(vec![
            Cell::F(mu),
            Cell::F(mu * n_th),
            Cell::F(w),
            Cell::F(doppler(w, p)),
            Cell::F(nf),
            Cell::F(doppler(nf, p)),
        ]);
        exact.push((mu, doppler(w, p)));
        overlay.push((mu, doppler(nf, p)));
    }
    let plot = svg::line_plot(
        "Saturated rotation vs pump power",
        "n0/n_th",
        "2m*Omega*/gamma",
        &[
            Series { label: "torque balance".to_string(), points: exact },
            Series { label: "square-root normal form".to_string(), points: overlay },
        ],
    );
    Ok((table, plot))
}

fn time_evolution(
    cfg: &RunConfig,
    model: EvolutionModel,
    t_end: f64,
    seed_omega: f64,
    both_signs: bool,
    phi0: f64,
) -> Result<(Table, String), CliError> {
    let p = &cfg.params;
    let set = find_steady_rotations(p);
    let mut columns = vec![
        "seed_sign[1]",
        "t[1/rate]",
        "omega[rate]",
        "doppler[2mOmega/gamma]",
        "phi[rad]",
    ];
    if model == EvolutionModel::Full {
        columns.extend_from_slice(&[
            "n_plus[photons]",
            "n_minus[photons]",
            "tau[hbar*rate^2]",
            "l_total[hbar]",
        ]);
    }
    let mut table = Table::new(&columns);
    table.comment(format!(
        "model={}",
        match model {
            EvolutionModel::Reduced => "reduced",
            EvolutionModel::Full => "full",
        }
    ));
    table.comment(format!("seed_omega={seed_omega:?}"));
    table.comment(format!("omega_star={:?}", set.largest_stable()));
    let signs: &[f64] = if both_signs { &[1.0, -1.0] } else { &[1.0] };
    let mut series = Vec::new();
    for &sign in signs {
        let seed = sign * seed_omega;
        let traj = match model {
            EvolutionModel::Reduced => integrate_reduced(seed, t_end, p, &cfg.integrator)?,
            EvolutionModel::Full => {
                integrate_full(&FieldState::dark(phi0, seed), t_end, p, &cfg.integrator)?
            }
        };
        let mut pts = Vec::with_capacity(traj.len());
        for i in 0..traj.len() {
            let (t, s, o) = (traj.times[i], &traj.states[i], &traj.observables[i]);
            let mut row = vec![
                Cell::F(sign),
                Cell::F(t),
                Cell::F(s.omega),
                Cell::F(doppler(s.omega, p)),
                Cell::F(s.phi),
            ];
            if model == EvolutionModel::Full {
                row.push(Cell::F(o.n_plus));
                row.push(Cell::F(o.n_minus));
                row.push(Cell::F(o.tau_inst));
                row.push(Cell::F(o.l_opt + o.l_phi));
            }
            table.row(row);
            pts.push((t, doppler(s.omega, p)));
        }
        series.push(Series { label: format!("seed {seed:?}"), points: pts });
    }
    let plot = svg::line_plot(
        "Relaxation of velocity seeds",
        "t [1/rate]",
        "2m*Omega/gamma",
        &series,
    );
    Ok((table, plot))
}

fn phase_diagram(
    p: &SystemParams,
    delta_grid: Vec<f64>,
    mu_grid: Vec<f64>,
) -> Result<(Table, String), CliError> {
    let grid = steadystate::phase_diagram(&delta_grid, &mu_grid, p)?;
    let mut table = Table::new(&[
        "delta[rate]",
        "mu[n0/n_th]",
        "n0[photons]",
        "doppler[|2mOmega*|/gamma]",
        "n_th[photons]",
    ]);
    for (d, &delta) in grid.delta_grid.iter().enumerate() {
        let n_th = grid.threshold_line[d];
        for (m, &mu) in grid.mu_grid.iter().enumerate() {
            table.row(vec![
                Cell::F(delta),
                Cell::F(mu),
                Cell::F(mu * n_th),
                Cell::F(grid.doppler[d][m]),
                Cell::F(n_th),
            ]);
        }
    }
    let plot = svg::heat_map(
        "Saturated Doppler shift over drive plane",
        "Delta [rate]",
        "n0/n_th",
        &grid.delta_grid,
        &grid.mu_grid,
        &grid.doppler,
        Some(1.0),
    );
    Ok((table, plot))
}

fn spectra(
    p: &SystemParams,
    rotation: SpectraRotation,
    probe_points: usize,
    probe_span: f64,
    use_weak_approx: bool,
) -> Result<(Table, String), CliError> {
    let (omega_star, mu) = match rotation {
        SpectraRotation::OmegaStar(w) => (w, None),
        SpectraRotation::Mu(mu) => {
            let q = p.with_mu(mu)?;
            (find_steady_rotations(&q).largest_stable(), Some(mu))
        }
        SpectraRotation::FromDrive => {
            let set = find_steady_rotations(p);
            (set.largest_stable(), set.mu)
        }
    };
    let probe = ProbeConfig::symmetric(p.gamma(), probe_span, probe_points, omega_star, use_weak_approx)?;
    let s = readout::spectra(&probe, p);
    let mut table = Table::new(&[
        "delta_p[rate]",
        "r_plus[1]",
        "r_minus[1]",
        "t_plus[1]",
        "t_minus[1]",
        "a_r[1]",
        "a_r_defined[0/1]",
    ]);
    table.comment(format!("omega_star={omega_star:?}"));
    table.comment(format!("doppler={:?}", doppler(omega_star, p)));
    if let Some(mu) = mu {
        table.comment(format!("mu={mu:?}"));
    }
    let mut r_plus = Vec::with_capacity(s.detunings.len());
    let mut r_minus = Vec::with_capacity(s.detunings.len());
    let mut a_r = Vec::with_capacity(s.detunings.len());
    for i in 0..s.detunings.len() {
        table.row(vec![
            Cell::F(s.detunings[i]),
            Cell::F(s.r_plus[i]),
            Cell::F(s.r_minus[i]),
            Cell::F(s.t_plus[i]),
            Cell::F(s.t_minus[i]),
            Cell::F(s.a_r[i]),
            Cell::B(s.a_r_defined[i]),
        ]);
        r_plus.push((s.detunings[i], s.r_plus[i]));
        r_minus.push((s.detunings[i], s.r_minus[i]));
        a_r.push((s.detunings[i], s.a_r[i]));
    }
    let plot = svg::line_plot(
        "Direction-resolved backscattering",
        "Delta_p [rate]",
        "R (and A_R)",
        &[
            Series { label: "R_plus".to_string(), points: r_plus },
            Series { label: "R_minus".to_string(), points: r_minus },
            Series { label: "A_R".to_string(), points: a_r },
        ],
    );
    Ok((table, plot))
}

fn asymmetry(
    p: &SystemParams,
    mu_grid: Vec<f64>,
    probe_points: usize,
    probe_span: f64,
    use_weak_approx: bool,
) -> Result<(Table, String), CliError> {
    let probe = ProbeConfig::symmetric(p.gamma(), probe_span, probe_points, 0.0, use_weak_approx)?;
    let c = readout::max_asymmetry_vs_power(&mu_grid, &probe, p)?;
    let mut table = Table::new(&[
        "mu[n0/n_th]",
        "omega_star[rate]",
        "doppler[2mOmega/gamma]",
        "max_abs_a_r[1]",
        "argmax_delta_p[rate]",
    ]);
    let mut pts = Vec::with_capacity(mu_grid.len());
    for i in 0..c.mu_grid.len() {
        table.row(vec![
            Cell::F(c.mu_grid[i]),
            Cell::F(c.omega_star[i]),
            Cell::F(doppler(c.omega_star[i], p)),
            Cell::F(c.max_abs_a_r[i]),
            Cell::F(c.argmax_delta_p[i]),
        ]);
        pts.push((c.mu_grid[i], c.max_abs_a_r[i]));
    }
    let plot = svg::line_plot(
        "Peak asymmetry vs pump power",
        "n0/n_th",
        "max |A_R|",
        &[Series { label: "max |A_R|".to_string(), points: pts }],
    );
    Ok((table, plot))
}

fn threshold(p: &SystemParams, delta_grid: Vec<f64>) -> Result<(Table, String), CliError> {
    if p.j() == 0.0 {
        return Err(CliError::Domain(DomainError::NoThreshold { delta: p.delta(), j: 0.0 }));
    }
    let n_at = |delta: f64| -> f64 {
        let mut q = *p;
        q.drive.delta = delta;
        n_threshold(&q)
            .photons()
            .expect("positive detuning and coupling give a finite threshold")
    };
    let delta_opt = optimal_detuning(p);
    let n_opt = n_at(delta_opt);
    let mut table = Table::new(&["delta[rate]", "n_th[photons]", "is_optimum[0/1]"]);
    table.comment(format!("delta_opt={delta_opt:?}"));
    table.comment(format!("n_th_min={n_opt:?}"));
    let split = delta_grid.partition_point(|&d| d < delta_opt);
    let mut pts = Vec::with_capacity(delta_grid.len() + 1);
    let push = |table: &mut Table, delta: f64, n: f64, opt: bool| {
        table.row(vec![Cell::F(delta), Cell::F(n), Cell::B(opt)]);
    };
    for &d in &delta_grid[..split] {
        let n = n_at(d);
        push(&mut table, d, n, false);
        pts.push((d, n));
    }
    push(&mut table, delta_opt, n_opt, true);
    pts.push((delta_opt, n_opt));
    for &d in &delta_grid[split..] {
        let n = n_at(d);
        push(&mut table, d, n, false);
        pts.push((d, n));
    }
    let plot = svg::line_plot(
        "Instability threshold vs detuning",
        "Delta [rate]",
        "n_th [photons]",
        &[Series { label: "n_th".to_string(), points: pts }],
    );
    Ok((table, plot))
}

fn oracle_check(
    cfg: &RunConfig,
    j_values: &[f64],
    doppler_min: f64,
    doppler_max: f64,
    omega_points: usize,
) -> Result<(Table, String), CliError> {
    let p = &cfg.params;
    let dopplers = linspace(doppler_min, doppler_max, omega_points);
    let mut table = Table::new(&[
        "j[rate]",
        "omega[rate]",
        "doppler[2mOmega/gamma]",
        "tau_avg[hbar*rate^2]",
        "tau_analytic[hbar*rate^2]",
        "rel_err[1]",
    ]);
    let mut series = Vec::new();
    for &j in j_values {
        let mut q = *p;
        q.optical.j = j;
        let mut pts = Vec::with_capacity(dopplers.len());
        for &d in &dopplers {
            let omega = d * p.gamma() / (2.0 * p.m_f());
            let r = time_averaged_torque_oracle(omega, &q, &cfg.integrator)?;
            table.row(vec![
                Cell::F(j),
                Cell::F(omega),
                Cell::F(d),
                Cell::F(r.tau_avg),
                Cell::F(r.tau_analytic),
                Cell::F(r.rel_err),
            ]);
            pts.push((d, r.rel_err.max(1e-300).log10()));
        }
        series.push(Series { label: format!("J={j:?}"), points: pts });
    }
    let plot = svg::line_plot(
        "Torque oracle error vs closed form",
        "2m*Omega/gamma",
        "log10(rel_err)",
        &series,
    );
    Ok((table, plot))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_hits_endpoints() {
        let g = linspace(-1.0, 2.0, 7);
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], -1.0);
        assert!((g[6] - 2.0).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
