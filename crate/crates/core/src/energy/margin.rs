//! Per-machine equal-area bookkeeping and classification.

use serde::Serialize;

use super::{EnergyChannels, EventKind, SwingEvent};
use crate::dynamics::Trajectory;

/// Tolerance of the energy identity A_acc − A_dec = residual KE, p.u.
pub const EAC_TOL: f64 = 1e-5;

/// Machines whose clearing KE exceeds this fraction of the largest are flagged critical.
pub const CRITICAL_KE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "swing", rename_all = "snake_case")]
pub enum Classification {
    Stable,
    /// Separates during the given 1-based swing.
    UnstableAtSwing(usize),
    /// No event inside the horizon.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MachineAssessment {
    pub machine: usize,
    pub events: Vec<SwingEvent>,
    pub classification: Classification,
    /// η = (A_dec − A_acc) / A_acc, when an IMPP exists and A_acc > 0.
    pub margin: Option<f64>,
    /// KE at clearing, p.u.
    pub a_acc: f64,
    /// PE gained from clearing to the IMPP, p.u.
    pub a_dec: Option<f64>,
    /// Index into `events` of the point used for the margin.
    pub impp: Option<usize>,
    /// Largest |(A_acc − ΔPE) − KE| over all events, p.u.
    pub eac_residual: f64,
    pub critical: bool,
}

impl MachineAssessment {
    pub fn first_dlp(&self) -> Option<&SwingEvent> {
        self.events.iter().find(|e| e.kind == EventKind::Dlp)
    }

    pub fn is_unstable(&self) -> bool {
        matches!(self.classification, Classification::UnstableAtSwing(_))
    }

    pub fn is_determined(&self) -> bool {
        self.classification != Classification::Undetermined
    }

    pub fn impp_event(&self) -> Option<&SwingEvent> {
        self.impp.map(|k| &self.events[k])
    }
}

/// KE left at the IMPP: clearing KE minus the potential energy absorbed.
pub fn residual_ke(v_ke_clear: f64, delta_v_pe: f64) -> f64 {
    v_ke_clear - delta_v_pe
}

/// Margin and classification of one machine from its events.
///
/// The IMPP is the liberation point when there is one and the first
/// stationary point otherwise. At a stationary point the decelerating area
/// equals the accelerating area up to quadrature error; differences within
/// [`EAC_TOL`] are reported as a zero margin.
pub fn machine_margin(
    traj: &Trajectory,
    energy: &EnergyChannels,
    events: &[SwingEvent],
    machine: usize,
) -> MachineAssessment {
    let c = traj.clear_index;
    let a_acc = energy.ke[(machine, c)];
    let pe_clear = energy.pe[(machine, c)];

    let eac_residual = events
        .iter()
        .map(|e| (residual_ke(a_acc, e.pe - pe_clear) - e.residual_ke).abs())
        .fold(0.0, f64::max);
    if eac_residual > EAC_TOL {
        log::warn!("machine {machine}: energy identity off by {eac_residual:.3e} p.u.");
    }

    let dlp = events.iter().position(|e| e.kind == EventKind::Dlp);
    let impp = dlp.or(if events.is_empty() { None } else { Some(0) });
    let classification = match (dlp, events.is_empty()) {
        (Some(k), _) => Classification::UnstableAtSwing(events[k].swing_index),
        (None, false) => Classification::Stable,
        (None, true) => Classification::Undetermined,
    };
    let a_dec = impp.map(|k| events[k].pe - pe_clear);
    let margin = match (impp, a_dec) {
        (Some(k), Some(a_dec)) if a_acc > 0.0 => {
            if events[k].kind == EventKind::Dsp && (a_dec - a_acc).abs() <= EAC_TOL {
                Some(0.0)
            } else {
                Some((a_dec - a_acc) / a_acc)
            }
        }
        _ => None,
    };

    MachineAssessment {
        machine,
        events: events.to_vec(),
        classification,
        margin,
        a_acc,
        a_dec,
        impp,
        eac_residual,
        critical: false,
    }
}

/// Assessments of all machines, with critical machines flagged by clearing KE.
pub fn assess_machines(
    traj: &Trajectory,
    energy: &EnergyChannels,
    events: &[Vec<SwingEvent>],
) -> Vec<MachineAssessment> {
    let mut out: Vec<MachineAssessment> = events
        .iter()
        .enumerate()
        .map(|(i, ev)| machine_margin(traj, energy, ev, i))
        .collect();
    let peak = out.iter().map(|a| a.a_acc).fold(0.0, f64::max);
    for a in &mut out {
        a.critical = peak > 0.0 && a.a_acc > CRITICAL_KE_FRACTION * peak;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Direction;
    use nalgebra::DMatrix;

    #[test]
    fn residual_matches_reported_values() {
        assert!((residual_ke(2.0079, 2.0073) - 0.0006).abs() < 1e-12);
        assert_eq!(residual_ke(1.9672, 1.9672), 0.0);
        assert_eq!(residual_ke(-3.25, -3.25), 0.0);
    }

    fn event(kind: EventKind, pe: f64, residual_ke: f64) -> SwingEvent {
        SwingEvent {
            machine: 0,
            kind,
            swing_index: 1,
            time: 0.5,
            delta_coi: 1.0,
            residual_ke,
            pe,
            direction: Direction::Forward,
            near_critical: false,
            sample: 1,
        }
    }

    /// Trajectory stub whose only relevant data is KE and PE at clearing.
    fn at_clearing(ke: f64, pe: f64) -> (Trajectory, EnergyChannels) {
        let z = DMatrix::zeros(1, 2);
        let traj = Trajectory {
            times: vec![0.0, 1e-3],
            delta: z.clone(),
            omega: z.clone(),
            delta_coi: z.clone(),
            omega_coi: z.clone(),
            f_coi: z.clone(),
            f_coi_pf: z.clone(),
            p_sys: vec![0.0; 2],
            inertia: vec![1.0],
            clear_index: 0,
            dt: 1e-3,
            diverged_at: None,
        };
        let ke = DMatrix::from_element(1, 2, ke);
        let pe = DMatrix::from_element(1, 2, pe);
        let energy = EnergyChannels {
            total: &ke + &pe,
            ke,
            pe,
            baseline_from_sep: true,
        };
        (traj, energy)
    }

    #[test]
    fn margin_arithmetic() {
        let (traj, energy) = at_clearing(2.0, 0.0);
        let stable = machine_margin(&traj, &energy, &[event(EventKind::Dsp, 3.0, 0.0)], 0);
        assert_eq!(stable.margin, Some(0.5));
        assert_eq!(stable.classification, Classification::Stable);
        let unstable = machine_margin(&traj, &energy, &[event(EventKind::Dlp, 1.0, 1.0)], 0);
        assert_eq!(unstable.margin, Some(-0.5));
        assert_eq!(unstable.classification, Classification::UnstableAtSwing(1));
        assert!(unstable.eac_residual < 1e-15);
    }

    #[test]
    fn stationary_point_within_tolerance_is_zero_margin() {
        let (traj, energy) = at_clearing(2.0, 0.1);
        let a = machine_margin(&traj, &energy, &[event(EventKind::Dsp, 2.1 - 3e-6, 0.0)], 0);
        assert_eq!(a.margin, Some(0.0));
    }

    #[test]
    fn liberation_point_outranks_earlier_stationary_point() {
        let (traj, energy) = at_clearing(1.0, 0.0);
        let mut late = event(EventKind::Dlp, 0.8, 0.2);
        late.swing_index = 2;
        let a = machine_margin(&traj, &energy, &[event(EventKind::Dsp, 1.0, 0.0), late], 0);
        assert_eq!(a.impp, Some(1));
        assert_eq!(a.classification, Classification::UnstableAtSwing(2));
        assert!(a.margin.unwrap() < 0.0);
    }

    #[test]
    fn no_events_is_undetermined() {
        let (traj, energy) = at_clearing(1.0, 0.0);
        let a = machine_margin(&traj, &energy, &[], 0);
        assert_eq!(a.classification, Classification::Undetermined);
        assert_eq!(a.margin, None);
        assert_eq!(a.a_dec, None);
    }
}
