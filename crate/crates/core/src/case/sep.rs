use nalgebra::{DMatrix, DVector};

use super::{coi_force, power_jacobian, StabilityCase};

const MAX_ITERATIONS: usize = 50;
/// Residual at which the equilibrium counts as converged, p.u.
pub const SEP_TOL: f64 = 1e-8;
/// Newton keeps polishing down to this residual when it can.
const POLISH_TOL: f64 = 1e-13;

/// Post-fault stable equilibrium, the zero of the individual-machine potential energy.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPoint {
    /// Equilibrium angles in the COI-SYS frame, rad.
    pub delta_s: Vec<f64>,
    pub converged: bool,
    /// max_i |f_i-SYS| at `delta_s`, p.u.
    pub residual: f64,
    pub iterations: usize,
}

/// Newton iteration on the post-fault COI forces starting from the pre-fault angles.
///
/// The largest-inertia machine is held fixed; the remaining n − 1 angles are
/// the unknowns, which is enough because the COI forces always sum to zero.
pub fn solve_postfault_sep(case: &StabilityCase) -> EquilibriumPoint {
    let machines = &case.machines;
    let net = &case.net_postfault;
    let n = machines.len();
    let reference = (0..n)
        .max_by(|&a, &b| machines[a].inertia.total_cmp(&machines[b].inertia))
        .unwrap_or(0);
    let free: Vec<usize> = (0..n).filter(|&k| k != reference).collect();
    let m_sys = case.total_inertia();

    let residual_of = |delta: &[f64]| {
        coi_force(net, machines, delta)
            .iter()
            .fold(0.0f64, |acc, f| acc.max(f.abs()))
    };

    let mut delta = case.delta0.clone();
    let mut residual = residual_of(&delta);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS && residual > POLISH_TOL {
        iterations += 1;
        let f = coi_force(net, machines, &delta);
        let dpe = power_jacobian(net, machines, &delta);
        // ∂f_i/∂δ_j = −∂P_ei/∂δ_j + (M_i/M_SYS) Σ_k ∂P_ek/∂δ_j
        let col_sums: Vec<f64> = (0..n).map(|j| dpe.column(j).sum()).collect();
        let jac = DMatrix::from_fn(free.len(), free.len(), |a, b| {
            let (i, j) = (free[a], free[b]);
            -dpe[(i, j)] + machines[i].inertia / m_sys * col_sums[j]
        });
        let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -f[i]));
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let mut trial = delta.clone();
            for (a, &i) in free.iter().enumerate() {
                trial[i] += scale * step[a];
            }
            let r = residual_of(&trial);
            if r < residual {
                delta = trial;
                residual = r;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let delta_sys = machines
        .iter()
        .zip(&delta)
        .map(|(m, d)| m.inertia * d)
        .sum::<f64>()
        / m_sys;
    EquilibriumPoint {
        delta_s: delta.iter().map(|d| d - delta_sys).collect(),
        converged: residual < SEP_TOL,
        residual,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{MachineParams, ReducedNetwork};
    use approx::assert_abs_diff_eq;

    fn smib_case(pm: f64, pmax: f64, post_pmax: f64) -> StabilityCase {
        let net = |p: f64| {
            ReducedNetwork::lossless(DMatrix::from_row_slice(2, 2, &[-p, p, p, -p]))
        };
        StabilityCase::new(
            "smib",
            vec![
                MachineParams::new(0, 0.0265, pm, 1.0),
                MachineParams::new(1, 1e6, -pm, 1.0),
            ],
            net(pmax),
            net(0.0),
            net(post_pmax),
            vec![(pm / pmax).asin(), 0.0],
        )
        .unwrap()
    }

    #[test]
    fn unchanged_network_returns_initial_point() {
        let case = smib_case(1.0, 1.8, 1.8);
        let sep = solve_postfault_sep(&case);
        assert!(sep.converged);
        assert!(sep.residual < 1e-10);
        let rel = sep.delta_s[0] - sep.delta_s[1];
        assert_abs_diff_eq!(rel, case.delta0[0] - case.delta0[1], epsilon = 1e-12);
    }

    #[test]
    fn smib_closed_form_after_line_loss() {
        let case = smib_case(1.0, 1.8, 1.3);
        let sep = solve_postfault_sep(&case);
        assert!(sep.converged);
        assert!(sep.residual < SEP_TOL);
        let rel = sep.delta_s[0] - sep.delta_s[1];
        assert_abs_diff_eq!(rel, (1.0f64 / 1.3).asin(), epsilon = 1e-9);
        // COI frame: inertia-weighted sum vanishes
        let s: f64 = case.machines.iter().zip(&sep.delta_s).map(|(m, d)| m.inertia * d).sum();
        assert!(s.abs() < 1e-9 * case.total_inertia());
    }

    #[test]
    fn no_equilibrium_is_flagged_unconverged() {
        // post-fault transfer limit below the mechanical power
        let case = smib_case(1.0, 1.8, 0.8);
        let sep = solve_postfault_sep(&case);
        assert!(!sep.converged);
        assert!(sep.residual > SEP_TOL);
    }
}
