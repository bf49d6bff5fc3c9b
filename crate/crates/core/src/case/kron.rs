use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ReducedNetwork;
use crate::error::{Error, Result};

/// Relative pivot size below which the eliminated block is treated as singular.
const PIVOT_TOL: f64 = 1e-12;

/// Eliminates every node not in `generator_nodes`.
///
/// `load_admittances` holds one constant shunt per node of `full_y` (zero for
/// nodes without load); they are added to the diagonal before elimination.
/// Returns `Y_gg − Y_gl · Y_ll⁻¹ · Y_lg` with rows ordered as `generator_nodes`.
pub fn kron_reduce(
    full_y: &DMatrix<Complex64>,
    generator_nodes: &[usize],
    load_admittances: &[Complex64],
) -> Result<ReducedNetwork> {
    let n_all = full_y.nrows();
    if full_y.ncols() != n_all {
        return Err(Error::validation("full_y", "admittance matrix must be square"));
    }
    if load_admittances.len() != n_all {
        return Err(Error::validation(
            "load_admittances",
            format!("expected {n_all} entries, got {}", load_admittances.len()),
        ));
    }
    let mut is_kept = vec![false; n_all];
    for &g in generator_nodes {
        if g >= n_all || is_kept[g] {
            return Err(Error::validation(
                "generator_nodes",
                format!("node {g} is out of range or repeated"),
            ));
        }
        is_kept[g] = true;
    }
    let eliminated: Vec<usize> = (0..n_all).filter(|&k| !is_kept[k]).collect();

    let mut y = full_y.clone();
    for (k, yl) in load_admittances.iter().enumerate() {
        y[(k, k)] += yl;
    }

    let ng = generator_nodes.len();
    let nl = eliminated.len();
    let y_gg = DMatrix::from_fn(ng, ng, |i, j| y[(generator_nodes[i], generator_nodes[j])]);

    let reduced = if nl == 0 {
        y_gg
    } else {
        let y_gl = DMatrix::from_fn(ng, nl, |i, j| y[(generator_nodes[i], eliminated[j])]);
        let y_lg = DMatrix::from_fn(nl, ng, |i, j| y[(eliminated[i], generator_nodes[j])]);
        let y_ll = DMatrix::from_fn(nl, nl, |i, j| y[(eliminated[i], eliminated[j])]);

        let lu = y_ll.clone().lu();
        let u = lu.u();
        let pivots: Vec<f64> = (0..nl).map(|k| u[(k, k)].norm()).collect();
        let scale = y_ll.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let min_pivot = pivots.iter().copied().fold(f64::INFINITY, f64::min);
        if scale == 0.0 || min_pivot <= PIVOT_TOL * scale {
            return Err(Error::SingularNetwork {
                buses: islanded_nodes(&y, &is_kept, &eliminated),
            });
        }
        let x = lu.solve(&y_lg).ok_or_else(|| Error::SingularNetwork {
            buses: islanded_nodes(&y, &is_kept, &eliminated),
        })?;
        y_gg - y_gl * x
    };

    Ok(ReducedNetwork::new(
        reduced.map(|v| v.re),
        reduced.map(|v| v.im),
    ))
}

/// Connected groups of eliminated nodes with no path to a kept node and no
/// shunt to ground. Falls back to every eliminated node when no such group
/// explains the singularity.
fn islanded_nodes(y: &DMatrix<Complex64>, is_kept: &[bool], eliminated: &[usize]) -> Vec<usize> {
    let n_all = y.nrows();
    let coupled = |a: usize, b: usize| y[(a, b)].norm() > 0.0;
    let mut seen = vec![false; n_all];
    let mut islanded = Vec::new();
    for &start in eliminated {
        if seen[start] {
            continue;
        }
        let mut component = vec![start];
        let mut stack = vec![start];
        seen[start] = true;
        let mut anchored = false;
        while let Some(k) = stack.pop() {
            // a non-zero row sum means a shunt path to ground
            let row_sum: Complex64 = (0..n_all).map(|j| y[(k, j)]).sum();
            if row_sum.norm() > PIVOT_TOL * y[(k, k)].norm().max(1.0) {
                anchored = true;
            }
            for j in 0..n_all {
                if j == k || !coupled(k, j) {
                    continue;
                }
                if is_kept[j] {
                    anchored = true;
                } else if !seen[j] {
                    seen[j] = true;
                    component.push(j);
                    stack.push(j);
                }
            }
        }
        if !anchored {
            islanded.extend(component);
        }
    }
    if islanded.is_empty() {
        islanded = eliminated.to_vec();
    }
    islanded.sort_unstable();
    islanded
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn no_load_buses_returns_generator_block() {
        let y = DMatrix::from_row_slice(2, 2, &[c(1.0, -5.0), c(-1.0, 5.0), c(-1.0, 5.0), c(1.0, -5.0)]);
        let red = kron_reduce(&y, &[0, 1], &[c(0.0, 0.0); 2]).unwrap();
        assert_eq!(red.g, y.map(|v| v.re));
        assert_eq!(red.b, y.map(|v| v.im));
    }

    #[test]
    fn series_chain_collapses_to_one_branch() {
        // gen0 -- (j0.2) -- bus2 -- (j0.3) -- gen1 reduces to a single j0.5 branch
        let y1 = c(0.0, -1.0 / 0.2);
        let y2 = c(0.0, -1.0 / 0.3);
        let zero = c(0.0, 0.0);
        let y = DMatrix::from_row_slice(
            3,
            3,
            &[y1, zero, -y1, zero, y2, -y2, -y1, -y2, y1 + y2],
        );
        let red = kron_reduce(&y, &[0, 1], &[zero; 3]).unwrap();
        assert_abs_diff_eq!(red.b[(0, 1)], 1.0 / 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(red.b[(0, 0)], -1.0 / 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(red.g[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn islanded_load_bus_is_reported() {
        let zero = c(0.0, 0.0);
        let y1 = c(0.0, -4.0);
        // bus 2 connects only to bus 3, neither reaches a generator or ground
        let y23 = c(0.0, -2.0);
        let y = DMatrix::from_row_slice(
            4,
            4,
            &[
                y1, -y1, zero, zero, //
                -y1, y1, zero, zero, //
                zero, zero, y23, -y23, //
                zero, zero, -y23, y23,
            ],
        );
        match kron_reduce(&y, &[0, 1], &[zero; 4]) {
            Err(Error::SingularNetwork { buses }) => assert_eq!(buses, vec![2, 3]),
            other => panic!("expected singular network, got {other:?}"),
        }
    }

    #[test]
    fn shunted_isolated_bus_is_not_singular() {
        let zero = c(0.0, 0.0);
        let y1 = c(0.0, -4.0);
        let y = DMatrix::from_row_slice(3, 3, &[y1, -y1, zero, -y1, y1, zero, zero, zero, zero]);
        let red = kron_reduce(&y, &[0, 1], &[zero, zero, c(1.0, -0.5)]).unwrap();
        assert_abs_diff_eq!(red.b[(0, 1)], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_generator_nodes() {
        let y = DMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(kron_reduce(&y, &[0, 0], &[c(0.0, 0.0); 2]).is_err());
        assert!(kron_reduce(&y, &[5], &[c(0.0, 0.0); 2]).is_err());
    }

    fn random_network(ng: usize, nl: usize, seeds: &[(f64, f64)]) -> (DMatrix<Complex64>, Vec<Complex64>) {
        let n = ng + nl;
        let mut y = DMatrix::from_element(n, n, c(0.0, 0.0));
        let mut add = |a: usize, b: usize, ys: Complex64| {
            y[(a, a)] += ys;
            y[(b, b)] += ys;
            y[(a, b)] -= ys;
            y[(b, a)] -= ys;
        };
        // a chain keeps every node connected, extra chords add meshing
        for k in 1..n {
            let (g, b) = seeds[k % seeds.len()];
            add(k - 1, k, c(g, -b));
        }
        for (k, &(g, b)) in seeds.iter().enumerate() {
            let (a, z) = (k % n, (3 * k + 2) % n);
            if a != z {
                add(a, z, c(0.5 * g, -0.5 * b));
            }
        }
        let loads = (0..n)
            .map(|k| if k >= ng { c(seeds[k % seeds.len()].0, -0.1) } else { c(0.0, 0.0) })
            .collect();
        (y, loads)
    }

    proptest! {
        #[test]
        fn reduced_network_reproduces_generator_currents(
            ng in 2usize..5,
            nl in 1usize..6,
            seeds in prop::collection::vec((0.1f64..2.0, 1.0f64..20.0), 6),
            emf in prop::collection::vec((0.9f64..1.1, -1.0f64..1.0), 5),
        ) {
            let (y, loads) = random_network(ng, nl, &seeds);
            let gens: Vec<usize> = (0..ng).collect();
            let red = kron_reduce(&y, &gens, &loads).unwrap();

            let mut yl = y.clone();
            for (k, l) in loads.iter().enumerate() {
                yl[(k, k)] += l;
            }
            let e = DVector::from_fn(ng, |i, _| Complex64::from_polar(emf[i].0, emf[i].1));
            // load-bus voltages from zero net injection
            let y_ll = yl.view((ng, ng), (nl, nl)).into_owned();
            let y_lg = yl.view((ng, 0), (nl, ng)).into_owned();
            let v_l = y_ll.lu().solve(&(-(y_lg * &e))).unwrap();
            let mut v = DVector::from_element(ng + nl, c(0.0, 0.0));
            v.rows_mut(0, ng).copy_from(&e);
            v.rows_mut(ng, nl).copy_from(&v_l);
            let injected = &yl * v;

            let y_red = DMatrix::from_fn(ng, ng, |i, j| c(red.g[(i, j)], red.b[(i, j)]));
            let i_red = y_red * &e;
            for k in 0..ng {
                prop_assert!((injected[k] - i_red[k]).norm() < 1e-9);
            }
            for k in ng..ng + nl {
                prop_assert!(injected[k].norm() < 1e-9);
            }
        }
    }
}
