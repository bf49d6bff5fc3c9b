//! Classical-model electrical power and the COI-relative accelerating force.

use nalgebra::DMatrix;

use super::{MachineParams, ReducedNetwork};

/// P_ei(δ) = E_i² G_ii + Σ_{j≠i} E_i E_j (G_ij cos δ_ij + B_ij sin δ_ij).
pub fn electrical_power(net: &ReducedNetwork, machines: &[MachineParams], delta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; machines.len()];
    electrical_power_into(net, machines, delta, &mut out);
    out
}

/// Allocation-free form of [`electrical_power`].
pub fn electrical_power_into(
    net: &ReducedNetwork,
    machines: &[MachineParams],
    delta: &[f64],
    out: &mut [f64],
) {
    let n = machines.len();
    debug_assert_eq!(delta.len(), n);
    debug_assert_eq!(out.len(), n);
    for i in 0..n {
        let ei = machines[i].emf;
        let (si, ci) = delta[i].sin_cos();
        let mut p = ei * ei * net.g[(i, i)];
        for j in 0..n {
            if j == i {
                continue;
            }
            let (sj, cj) = delta[j].sin_cos();
            // δ_ij = δ_i − δ_j via angle-difference identities
            let sin_ij = si * cj - ci * sj;
            let cos_ij = ci * cj + si * sj;
            p += ei * machines[j].emf * (net.g[(i, j)] * cos_ij + net.b[(i, j)] * sin_ij);
        }
        out[i] = p;
    }
}

/// f_i-SYS at rest: P_mi − P_ei − (M_i/M_SYS)·Σ_k (P_mk − P_ek). Damping excluded.
pub fn coi_force(net: &ReducedNetwork, machines: &[MachineParams], delta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; machines.len()];
    coi_force_into(net, machines, delta, &mut out);
    out
}

pub fn coi_force_into(
    net: &ReducedNetwork,
    machines: &[MachineParams],
    delta: &[f64],
    out: &mut [f64],
) {
    electrical_power_into(net, machines, delta, out);
    let mut p_sys = 0.0;
    let mut m_sys = 0.0;
    for (m, p) in machines.iter().zip(out.iter_mut()) {
        *p = m.mech_power - *p;
        p_sys += *p;
        m_sys += m.inertia;
    }
    for (m, p) in machines.iter().zip(out.iter_mut()) {
        *p -= m.inertia / m_sys * p_sys;
    }
}

/// ∂P_ei/∂δ_j.
pub fn power_jacobian(net: &ReducedNetwork, machines: &[MachineParams], delta: &[f64]) -> DMatrix<f64> {
    let n = machines.len();
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        let ei = machines[i].emf;
        let mut diag = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let (s, c) = (delta[i] - delta[j]).sin_cos();
            let k = ei * machines[j].emf;
            let d = k * (-net.g[(i, j)] * s + net.b[(i, j)] * c);
            jac[(i, j)] = -d;
            diag += d;
        }
        jac[(i, i)] = diag;
    }
    jac
}
