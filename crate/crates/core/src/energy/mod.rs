//! Individual-machine transient energy, swing events and margins.
//!
//! Kinetic energy is ½Mω² in the COI-SYS frame. Potential energy is the work
//! of the post-fault force along the simulated path, offset by a
//! straight-line integral from the post-fault equilibrium to the initial
//! angles, so that it vanishes at the equilibrium.

mod events;
mod margin;
pub mod potential;

use nalgebra::DMatrix;

use crate::case::{EquilibriumPoint, StabilityCase};
use crate::dynamics::Trajectory;

pub use events::{detect_events, Direction, EventKind, SwingEvent, OMEGA_TOL};
pub use margin::{
    assess_machines, machine_margin, residual_ke, Classification, MachineAssessment, CRITICAL_KE_FRACTION,
    EAC_TOL,
};
pub use potential::{polyline_pe, straight_line_pe, PATH_SEGMENTS};

/// Per-machine energy channels, n × T.
#[derive(Debug, Clone)]
pub struct EnergyChannels {
    /// ½ M_i ω_i-SYS², p.u.
    pub ke: DMatrix<f64>,
    /// Individual-machine potential energy, p.u.
    pub pe: DMatrix<f64>,
    /// ke + pe, p.u.
    pub total: DMatrix<f64>,
    /// False when the equilibrium did not converge and `pe` starts at zero at t = 0.
    pub baseline_from_sep: bool,
}

impl EnergyChannels {
    /// Time derivative of `pe` at sample `k`: −f^(PF) ω.
    pub fn pe_rate(traj: &Trajectory, i: usize, k: usize) -> f64 {
        -traj.f_coi_pf[(i, k)] * traj.omega_coi[(i, k)]
    }

    /// Largest deviation of total energy from its clearing value over the post-fault stage.
    pub fn postfault_drift(&self, clear_index: usize, machine: usize) -> f64 {
        let start = self.total[(machine, clear_index)];
        (clear_index..self.total.ncols())
            .map(|k| (self.total[(machine, k)] - start).abs())
            .fold(0.0, f64::max)
    }
}

/// Kinetic, potential and total energy of every machine along `traj`.
///
/// The potential energy is accumulated with an end-corrected trapezoid rule
/// over time, separately on the fault-on and post-fault stages because the
/// integrand has a kink at clearing.
pub fn compute_energy(case: &StabilityCase, traj: &Trajectory, sep: &EquilibriumPoint) -> EnergyChannels {
    let n = traj.n_machines();
    let len = traj.len();
    let mut ke = DMatrix::zeros(n, len);
    let mut pe = DMatrix::zeros(n, len);

    let baseline = if sep.converged && len > 0 {
        let start: Vec<f64> = (0..n).map(|i| traj.delta_coi[(i, 0)]).collect();
        potential::straight_line_pe(
            &case.net_postfault,
            &case.machines,
            &sep.delta_s,
            &start,
            PATH_SEGMENTS,
        )
    } else {
        if !sep.converged {
            log::warn!(
                "post-fault equilibrium did not converge (residual {:.3e}); potential energy measured from t = 0",
                sep.residual
            );
        }
        vec![0.0; n]
    };

    let c = traj.clear_index.min(len.saturating_sub(1));
    let mut g = vec![0.0; len];
    for i in 0..n {
        for k in 0..len {
            ke[(i, k)] = 0.5 * traj.inertia[i] * traj.omega_coi[(i, k)].powi(2);
            g[k] = EnergyChannels::pe_rate(traj, i, k);
        }
        if len == 0 {
            continue;
        }
        pe[(i, 0)] = baseline[i];
        let mut acc = baseline[i];
        for (a, b) in [(0, c), (c, len - 1)] {
            let d = piece_derivative(&g[a..=b], traj.dt);
            for k in a..b {
                let j = k - a;
                acc += traj.dt / 2.0 * (g[k] + g[k + 1]) - traj.dt * traj.dt / 12.0 * (d[j + 1] - d[j]);
                pe[(i, k + 1)] = acc;
            }
        }
    }
    let total = &ke + &pe;
    EnergyChannels {
        ke,
        pe,
        total,
        baseline_from_sep: sep.converged,
    }
}

/// Second-order finite-difference derivative of uniformly sampled values.
fn piece_derivative(g: &[f64], h: f64) -> Vec<f64> {
    let m = g.len();
    if m < 3 {
        return vec![0.0; m];
    }
    let mut d = vec![0.0; m];
    d[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h);
    d[m - 1] = (3.0 * g[m - 1] - 4.0 * g[m - 2] + g[m - 3]) / (2.0 * h);
    for k in 1..m - 1 {
        d[k] = (g[k + 1] - g[k - 1]) / (2.0 * h);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{solve_postfault_sep, MachineParams, ReducedNetwork};
    use crate::dynamics::{simulate, SimulationConfig};
    use approx::assert_abs_diff_eq;

    pub(crate) fn smib(fault_pmax: f64, post_pmax: f64) -> StabilityCase {
        let net = |p: f64| ReducedNetwork::lossless(DMatrix::from_row_slice(2, 2, &[-p, p, p, -p]));
        StabilityCase::new(
            "smib",
            vec![
                MachineParams::new(0, MachineParams::inertia_from_h(5.0, 60.0), 1.0, 1.0),
                MachineParams::new(1, 1e6, -1.0, 1.0),
            ],
            net(1.8),
            net(fault_pmax),
            net(post_pmax),
            vec![(1.0f64 / 1.8).asin(), 0.0],
        )
        .unwrap()
    }

    #[test]
    fn derivative_is_exact_on_quadratics() {
        let g: Vec<f64> = (0..6).map(|k| (k as f64 * 0.1).powi(2)).collect();
        let d = piece_derivative(&g, 0.1);
        for (k, v) in d.iter().enumerate() {
            assert_abs_diff_eq!(*v, 2.0 * k as f64 * 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn rest_at_equilibrium_has_no_energy() {
        let case = smib(1.8, 1.8);
        let sep = solve_postfault_sep(&case);
        let traj = simulate(&case, &SimulationConfig::new(0.1, 1.0)).unwrap();
        let e = compute_energy(&case, &traj, &sep);
        assert!(e.ke.amax() < 1e-20);
        assert!(e.pe.amax() < 1e-9);
    }

    #[test]
    fn smib_pe_matches_closed_form_potential() {
        let case = smib(0.0, 1.8);
        let sep = solve_postfault_sep(&case);
        let traj = simulate(&case, &SimulationConfig::new(0.15, 1.5)).unwrap();
        let e = compute_energy(&case, &traj, &sep);
        let ds = (1.0f64 / 1.8).asin();
        for k in (0..traj.len()).step_by(7) {
            let d = traj.delta[(0, k)] - traj.delta[(1, k)];
            let closed = -(d - ds) - 1.8 * (d.cos() - ds.cos());
            assert_abs_diff_eq!(e.pe[(0, k)], closed, epsilon = 1e-6);
        }
    }

    #[test]
    fn smib_total_energy_is_conserved_after_clearing() {
        let case = smib(0.0, 1.8);
        let sep = solve_postfault_sep(&case);
        let traj = simulate(&case, &SimulationConfig::new(0.15, 3.0)).unwrap();
        let e = compute_energy(&case, &traj, &sep);
        assert!(e.postfault_drift(traj.clear_index, 0) < 1e-8);
        assert!(e.ke.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn unconverged_equilibrium_starts_pe_at_zero() {
        let case = smib(0.0, 0.8);
        let sep = solve_postfault_sep(&case);
        assert!(!sep.converged);
        let traj = simulate(&case, &SimulationConfig::new(0.05, 0.5)).unwrap();
        let e = compute_energy(&case, &traj, &sep);
        assert!(!e.baseline_from_sep);
        assert_eq!(e.pe[(0, 0)], 0.0);
    }
}
