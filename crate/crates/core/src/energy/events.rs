//! Swing events: stationary points (ω_i-SYS = 0) and liberation points
//! (post-fault force turning from restoring to anti-restoring).

use serde::Serialize;

use super::EnergyChannels;
use crate::dynamics::Trajectory;

/// Minimum |ω_i-SYS| for a force sign change to count as a liberation point, rad/s.
pub const OMEGA_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EventKind {
    /// Dynamic stationary point: the swing turns around.
    Dsp,
    /// Dynamic liberation point: the machine separates.
    Dlp,
}

/// Sign of ω_i-SYS just before the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwingEvent {
    pub machine: usize,
    pub kind: EventKind,
    /// 1-based swing count.
    pub swing_index: usize,
    /// Interpolated event time, s.
    pub time: f64,
    /// δ_i-SYS at the event, rad.
    pub delta_coi: f64,
    /// Kinetic energy left at the event, p.u.
    pub residual_ke: f64,
    /// Potential energy at the event, p.u.
    pub pe: f64,
    pub direction: Direction,
    /// ω and the post-fault force changed sign within the same step.
    pub near_critical: bool,
    /// Sample index at the start of the bracketing step.
    pub sample: usize,
}

fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
}

/// Cubic interpolant of one machine channel over step `[k, k + 1]`.
struct Step<'a> {
    traj: &'a Trajectory,
    energy: &'a EnergyChannels,
    i: usize,
    k: usize,
}

impl Step<'_> {
    fn omega(&self, s: f64) -> f64 {
        let t = self.traj;
        let (i, k, h) = (self.i, self.k, t.dt);
        let m = t.inertia[i];
        hermite(
            t.omega_coi[(i, k)],
            t.omega_coi[(i, k + 1)],
            h * t.f_coi[(i, k)] / m,
            h * t.f_coi[(i, k + 1)] / m,
            s,
        )
    }

    fn delta(&self, s: f64) -> f64 {
        let t = self.traj;
        let (i, k, h) = (self.i, self.k, t.dt);
        hermite(
            t.delta_coi[(i, k)],
            t.delta_coi[(i, k + 1)],
            h * t.omega_coi[(i, k)],
            h * t.omega_coi[(i, k + 1)],
            s,
        )
    }

    fn pe(&self, s: f64) -> f64 {
        let (i, k, h) = (self.i, self.k, self.traj.dt);
        hermite(
            self.energy.pe[(i, k)],
            self.energy.pe[(i, k + 1)],
            h * EnergyChannels::pe_rate(self.traj, i, k),
            h * EnergyChannels::pe_rate(self.traj, i, k + 1),
            s,
        )
    }

    /// Root of the interpolated speed inside the step, by bisection.
    fn omega_root(&self) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let w_lo = self.omega(lo);
        if self.omega(hi) == 0.0 {
            return 1.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if (self.omega(mid) > 0.0) == (w_lo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn event(&self, kind: EventKind, s: f64, swing_index: usize, near_critical: bool) -> SwingEvent {
        let t = self.traj;
        let w = if kind == EventKind::Dsp { 0.0 } else { self.omega(s) };
        let w_before = t.omega_coi[(self.i, self.k)];
        SwingEvent {
            machine: self.i,
            kind,
            swing_index,
            time: t.times[self.k] + s * t.dt,
            delta_coi: self.delta(s),
            residual_ke: 0.5 * t.inertia[self.i] * w * w,
            pe: self.pe(s),
            direction: if w_before >= 0.0 {
                Direction::Forward
            } else {
                Direction::Backward
            },
            near_critical,
            sample: self.k,
        }
    }
}

fn crosses_zero(a: f64, b: f64) -> bool {
    a != 0.0 && (b == 0.0 || (a > 0.0) != (b > 0.0))
}

/// Post-fault events of every machine, scanning from the clearing sample on.
///
/// Each stationary point closes a swing and scanning continues; the first
/// liberation point is terminal for that machine. A machine without events
/// gets an empty list.
pub fn detect_events(traj: &Trajectory, energy: &EnergyChannels) -> Vec<Vec<SwingEvent>> {
    (0..traj.n_machines())
        .map(|i| machine_events(traj, energy, i))
        .collect()
}

fn machine_events(traj: &Trajectory, energy: &EnergyChannels, i: usize) -> Vec<SwingEvent> {
    let mut out = Vec::new();
    let mut swing = 1;
    let last = traj.len().saturating_sub(1);
    for k in traj.clear_index..last {
        let (w0, w1) = (traj.omega_coi[(i, k)], traj.omega_coi[(i, k + 1)]);
        let (f0, f1) = (traj.f_coi_pf[(i, k)], traj.f_coi_pf[(i, k + 1)]);
        let step = Step { traj, energy, i, k };
        if crosses_zero(w0, w1) {
            let s = step.omega_root();
            out.push(step.event(EventKind::Dsp, s, swing, crosses_zero(f0, f1)));
            swing += 1;
            continue;
        }
        let restoring_before = f0 * w0.signum() < 0.0;
        let repelling_after = f1 * w1.signum() >= 0.0;
        if restoring_before && repelling_after && w0.abs() > OMEGA_TOL && w1.abs() > OMEGA_TOL {
            let s = if f1 == 0.0 { 1.0 } else { f0 / (f0 - f1) };
            out.push(step.event(EventKind::Dlp, s, swing, false));
            break;
        }
    }
    out
}
