//! Coupled-mode model of a ring resonator whose frequency-degenerate
//! clockwise/counterclockwise mode pair is split by a movable Rayleigh
//! backscatterer. Recoil from coherent backscattering exerts a torque on the
//! scatterer; above a drive threshold the rest state gives way to steady
//! rotation with a spontaneously chosen sense, which shows up optically as a
//! nonreciprocal response to weak probes.
//!
//! The crate provides the closed-form observables (time-averaged recoil
//! torque, anti-damping rate, threshold photon number, rotation branch),
//! adaptive time integration of the full and reduced equations of motion, a
//! brute-force oracle for the torque law, steady-state and bifurcation
//! analysis, probe-spectrum readout, and a command-line driver for batch
//! experiments. Units: `hbar = 1`, angular frequencies throughout.

pub mod cli;
pub mod dynamics;
pub mod model;
pub mod readout;
pub mod steadystate;

pub use dynamics::{
    drive_amplitudes, integrate_full, integrate_reduced, rhs_full, time_averaged_torque_oracle,
    IntegrateError, IntegratorConfig, OracleError, Scheme, TorqueOracleResult, Trajectory,
};
pub use readout::{
    backscatter_amplitude, backscatter_power_weak, max_asymmetry_vs_power, refine_peak, spectra,
    through_amplitude, AsymmetryCurve, ProbeConfig, ProbeDirection, Spectrum,
};
pub use steadystate::{
    branch, find_steady_rotations, net_torque, phase_diagram, BifurcationBranch,
    PhaseDiagramGrid, SteadyRoot, SteadyRotationSet,
};
pub use model::{
    cubic_coeff, gamma_opt, instantaneous_torque, interaction_energy, n_threshold,
    omega_star_normal_form, optimal_detuning, photon_number_n0, tau_rec, torque_prefactor,
    DerivedObservables, DomainError, DriveParams, FieldState, MechParams, NormalFormCoeffs,
    OpticalParams, ParamError, PumpMode, SystemParams, Threshold, HBAR,
};
