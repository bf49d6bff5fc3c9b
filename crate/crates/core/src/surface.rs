//! Individual-machine potential-energy surfaces over a two-angle plane.
//!
//! Two sources are supported: ribbons sampled along simulated trajectories
//! (any machine count) and a regular grid of straight-line path integrals
//! from the post-fault equilibrium (three machines only, where fixing two
//! COI angles determines the third).

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::case::{solve_postfault_sep, EquilibriumPoint, StabilityCase};
use crate::dynamics::{simulate, SimulationConfig};
use crate::energy::{compute_energy, polyline_pe, straight_line_pe, PATH_SEGMENTS};
use crate::error::{Error, Result};

/// Rectangular window in the plotting plane, rad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Window {
    /// Square window of half-width `half` around the equilibrium projection.
    pub fn centered(sep: &EquilibriumPoint, axes: (usize, usize), half: f64) -> Self {
        let (xs, ys) = (sep.delta_s[axes.0], sep.delta_s[axes.1]);
        Self {
            x: (xs - half, xs + half),
            y: (ys - half, ys + half),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x.0 && x <= self.x.1 && y >= self.y.0 && y <= self.y.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    /// Machine whose potential energy is the surface height.
    pub focus: usize,
    /// Machines whose COI angles span the plane.
    pub axes: (usize, usize),
    /// Grid extent; in trajectory mode, samples outside are dropped.
    pub window: Option<Window>,
    pub grid_n: usize,
    pub family: Vec<SimulationConfig>,
}

impl SurfaceSpec {
    fn validate(&self, n: usize) -> Result<()> {
        let (a, b) = self.axes;
        if a == b {
            return Err(Error::Surface(format!("axis machines must differ, got {a} twice")));
        }
        for (what, m) in [("focus", self.focus), ("axis", a), ("axis", b)] {
            if m >= n {
                return Err(Error::Surface(format!("{what} machine {m} out of range for {n} machines")));
            }
        }
        if let Some(w) = &self.window {
            if !(w.x.0 < w.x.1 && w.y.0 < w.y.1) {
                return Err(Error::Surface("window ranges must be increasing".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSource {
    Grid,
    Trajectory { id: usize, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    /// COI angle of the first axis machine, rad.
    pub x: f64,
    /// COI angle of the second axis machine, rad.
    pub y: f64,
    /// Potential energy of the focus machine, p.u.
    pub pe: f64,
    pub source: SampleSource,
}

/// Regular grid of surface heights; `pe[(ix, iy)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub pe: DMatrix<f64>,
}

impl SurfaceGrid {
    pub fn samples(&self) -> Vec<SurfaceSample> {
        let mut out = Vec::with_capacity(self.xs.len() * self.ys.len());
        for (ix, &x) in self.xs.iter().enumerate() {
            for (iy, &y) in self.ys.iter().enumerate() {
                out.push(SurfaceSample {
                    x,
                    y,
                    pe: self.pe[(ix, iy)],
                    source: SampleSource::Grid,
                });
            }
        }
        out
    }
}

/// Potential-energy ribbons of the focus machine along every family member.
///
/// Diverged members are skipped with a warning.
pub fn surface_from_trajectories(case: &StabilityCase, spec: &SurfaceSpec) -> Result<Vec<SurfaceSample>> {
    spec.validate(case.n_machines())?;
    if spec.family.is_empty() {
        return Err(Error::Surface("trajectory family is empty".into()));
    }
    let sep = solve_postfault_sep(case);
    let (a, b) = spec.axes;
    let ribbons: Vec<Option<Vec<SurfaceSample>>> = spec
        .family
        .par_iter()
        .enumerate()
        .map(|(id, cfg)| -> Result<Option<Vec<SurfaceSample>>> {
            let traj = simulate(case, cfg)?;
            if let Some(t) = traj.diverged_at {
                log::warn!("family member {id} (t_clear = {} s) diverged at {t} s; skipped", cfg.t_clear);
                return Ok(None);
            }
            let energy = compute_energy(case, &traj, &sep);
            let ribbon = (0..traj.len())
                .map(|k| SurfaceSample {
                    x: traj.delta_coi[(a, k)],
                    y: traj.delta_coi[(b, k)],
                    pe: energy.pe[(spec.focus, k)],
                    source: SampleSource::Trajectory { id, t: traj.times[k] },
                })
                .filter(|s| spec.window.is_none_or(|w| w.contains(s.x, s.y)))
                .collect();
            Ok(Some(ribbon))
        })
        .collect::<Result<_>>()?;
    Ok(ribbons.into_iter().flatten().flatten().collect())
}

/// Full COI angle vector of a three-machine case with the axis angles fixed.
pub fn plane_point(case: &StabilityCase, axes: (usize, usize), x: f64, y: f64) -> Vec<f64> {
    let (a, b) = axes;
    let c = 3 - a - b;
    let m = &case.machines;
    let mut d = vec![0.0; 3];
    d[a] = x;
    d[b] = y;
    d[c] = -(m[a].inertia * x + m[b].inertia * y) / m[c].inertia;
    d
}

/// Focus-machine potential energy at `(x, y)` by a straight path from the equilibrium.
pub fn impe_at(case: &StabilityCase, sep: &EquilibriumPoint, axes: (usize, usize), focus: usize, x: f64, y: f64) -> f64 {
    let to = plane_point(case, axes, x, y);
    straight_line_pe(&case.net_postfault, &case.machines, &sep.delta_s, &to, PATH_SEGMENTS)[focus]
}

/// Same quantity along the two-leg path: first along x, then along y.
pub fn impe_two_leg(
    case: &StabilityCase,
    sep: &EquilibriumPoint,
    axes: (usize, usize),
    focus: usize,
    x: f64,
    y: f64,
) -> f64 {
    let corner = plane_point(case, axes, x, sep.delta_s[axes.1]);
    let to = plane_point(case, axes, x, y);
    polyline_pe(
        &case.net_postfault,
        &case.machines,
        &[sep.delta_s.clone(), corner, to],
        PATH_SEGMENTS,
    )[focus]
}

fn check_grid_case(case: &StabilityCase, spec: &SurfaceSpec) -> Result<EquilibriumPoint> {
    if case.n_machines() != 3 {
        return Err(Error::Surface(format!(
            "grid surfaces need exactly 3 machines, this case has {}; use trajectory mode",
            case.n_machines()
        )));
    }
    spec.validate(3)?;
    if spec.grid_n < 2 {
        return Err(Error::Surface(format!("grid_n must be at least 2, got {}", spec.grid_n)));
    }
    let sep = solve_postfault_sep(case);
    if !sep.converged {
        return Err(Error::Surface(format!(
            "post-fault equilibrium did not converge (residual {:.3e})",
            sep.residual
        )));
    }
    Ok(sep)
}

/// Grid of focus-machine potential energy over the window.
///
/// Without an explicit window the grid spans ±2 rad around the equilibrium.
pub fn surface_grid(case: &StabilityCase, spec: &SurfaceSpec) -> Result<SurfaceGrid> {
    let sep = check_grid_case(case, spec)?;
    let w = spec.window.unwrap_or_else(|| Window::centered(&sep, spec.axes, 2.0));
    let n = spec.grid_n;
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    };
    let (xs, ys) = (axis(w.x), axis(w.y));
    let columns: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| ys.iter().map(|&y| impe_at(case, &sep, spec.axes, spec.focus, x, y)).collect())
        .collect();
    let pe = DMatrix::from_fn(n, n, |ix, iy| columns[ix][iy]);
    Ok(SurfaceGrid { xs, ys, pe })
}
