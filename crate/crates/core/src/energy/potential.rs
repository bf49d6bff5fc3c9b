//! Path quadrature of the individual-machine potential energy.

use crate::case::{coi_force_into, MachineParams, ReducedNetwork};

/// Segment count for straight-line path quadrature.
pub const PATH_SEGMENTS: usize = 200;

/// Potential-energy increment of every machine along the straight line
/// `from → to` in angle space: `−(to_i − from_i) ∫₀¹ f_i(from + s(to − from)) ds`,
/// with `f` the COI force on `net`. Composite Simpson rule, `segments` even.
pub fn straight_line_pe(
    net: &ReducedNetwork,
    machines: &[MachineParams],
    from: &[f64],
    to: &[f64],
    segments: usize,
) -> Vec<f64> {
    let n = machines.len();
    let segments = segments.max(2) + segments % 2;
    let h = 1.0 / segments as f64;
    let mut point = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for k in 0..=segments {
        let s = k as f64 * h;
        for i in 0..n {
            point[i] = from[i] + s * (to[i] - from[i]);
        }
        coi_force_into(net, machines, &point, &mut f);
        let w = if k == 0 || k == segments {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        for i in 0..n {
            acc[i] += w * f[i];
        }
    }
    (0..n)
        .map(|i| -(to[i] - from[i]) * acc[i] * h / 3.0)
        .collect()
}

/// Potential-energy increment along a polyline through `points`, one straight
/// leg at a time.
pub fn polyline_pe(
    net: &ReducedNetwork,
    machines: &[MachineParams],
    points: &[Vec<f64>],
    segments: usize,
) -> Vec<f64> {
    let mut total = vec![0.0; machines.len()];
    for leg in points.windows(2) {
        for (t, d) in total
            .iter_mut()
            .zip(straight_line_pe(net, machines, &leg[0], &leg[1], segments))
        {
            *t += d;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    #[test]
    fn smib_matches_closed_form() {
        let pmax = 1.8;
        let net = ReducedNetwork::lossless(DMatrix::from_row_slice(2, 2, &[-pmax, pmax, pmax, -pmax]));
        let machines = vec![
            MachineParams::new(0, 0.0265, 1.0, 1.0),
            MachineParams::new(1, 1e6, -1.0, 1.0),
        ];
        let ds = (1.0f64 / pmax).asin();
        let d = 2.2;
        let pe = straight_line_pe(&net, &machines, &[ds, 0.0], &[d, 0.0], PATH_SEGMENTS);
        let expected = -(d - ds) - pmax * (d.cos() - ds.cos());
        // the infinite bus drags the COI by a relative 2.65e-8
        assert_abs_diff_eq!(pe[0], expected, epsilon = 1e-6);
    }

    #[test]
    fn zero_length_path_has_no_energy() {
        let net = ReducedNetwork::lossless(DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
        let machines = vec![MachineParams::new(0, 1.0, 0.5, 1.0), MachineParams::new(1, 1.0, -0.5, 1.0)];
        let pe = straight_line_pe(&net, &machines, &[0.3, -0.3], &[0.3, -0.3], 10);
        assert_eq!(pe, vec![0.0, 0.0]);
    }

    #[test]
    fn polyline_of_collinear_legs_equals_straight_line() {
        let net = ReducedNetwork::new(
            DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.1, 0.3]),
            DMatrix::from_row_slice(2, 2, &[-1.5, 1.5, 1.5, -1.5]),
        );
        let machines = vec![MachineParams::new(0, 0.1, 0.8, 1.1), MachineParams::new(1, 0.2, -0.3, 1.0)];
        let a = vec![0.1, -0.05];
        let b = vec![0.9, -0.45];
        let mid = vec![0.5, -0.25];
        let direct = straight_line_pe(&net, &machines, &a, &b, 400);
        let legs = polyline_pe(&net, &machines, &[a, mid, b], 200);
        for (x, y) in direct.iter().zip(&legs) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }
}
