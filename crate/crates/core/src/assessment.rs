//! Machine-by-machine system verdict.
//!
//! The system is unstable as soon as any machine separates; the leading
//! loss-of-synchronism point is the earliest liberation point and the
//! severity is the set of all separating machines.

use serde::Serialize;

use crate::case::{EquilibriumPoint, StabilityCase};
use crate::dynamics::{simulate, SimulationConfig, Trajectory};
use crate::energy::{assess_machines, compute_energy, detect_events, EnergyChannels, MachineAssessment, SwingEvent};
use crate::error::{Error, Result};

/// First liberation point of one machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Separation {
    pub machine: usize,
    pub time: f64,
    pub swing_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MachineMargin {
    pub machine: usize,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemAssessment {
    pub stable: bool,
    /// Margin of every machine, ordered by machine index.
    pub eta_sys: Vec<MachineMargin>,
    pub leading_losp: Option<Separation>,
    /// Separating machines ordered by separation time.
    pub severity: Vec<Separation>,
    pub severity_final_time: Option<f64>,
    /// All events ordered by time, then machine.
    pub timeline: Vec<SwingEvent>,
    /// Machines without any event inside the horizon.
    pub undetermined: Vec<usize>,
    pub critical_machines: Vec<usize>,
}

impl SystemAssessment {
    pub fn eta(&self, machine: usize) -> Option<f64> {
        self.eta_sys
            .iter()
            .find(|m| m.machine == machine)
            .and_then(|m| m.eta)
    }
}

/// Aggregates per-machine assessments into the system verdict.
///
/// Fails with [`Error::HorizonTooShort`] when no machine has any event.
pub fn assess_system(assessments: &[MachineAssessment]) -> Result<SystemAssessment> {
    if !assessments.iter().any(|a| a.is_determined()) {
        return Err(Error::HorizonTooShort);
    }
    let mut sorted: Vec<&MachineAssessment> = assessments.iter().collect();
    sorted.sort_by_key(|a| a.machine);

    let eta_sys = sorted
        .iter()
        .map(|a| MachineMargin {
            machine: a.machine,
            eta: a.margin,
        })
        .collect();

    let mut severity: Vec<Separation> = sorted
        .iter()
        .filter_map(|a| {
            a.first_dlp().map(|e| Separation {
                machine: a.machine,
                time: e.time,
                swing_index: e.swing_index,
            })
        })
        .collect();
    severity.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.machine.cmp(&b.machine)));

    let mut timeline: Vec<SwingEvent> = sorted.iter().flat_map(|a| a.events.iter().cloned()).collect();
    timeline.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.machine.cmp(&b.machine))
            .then(a.swing_index.cmp(&b.swing_index))
    });

    let undetermined: Vec<usize> = sorted
        .iter()
        .filter(|a| !a.is_determined())
        .map(|a| a.machine)
        .collect();
    let stable = severity.is_empty();
    if stable && !undetermined.is_empty() {
        log::warn!(
            "stable within horizon, {} machine(s) undetermined: {:?}",
            undetermined.len(),
            undetermined
        );
    }

    Ok(SystemAssessment {
        stable,
        eta_sys,
        leading_losp: severity.first().copied(),
        severity_final_time: severity.last().map(|s| s.time),
        severity,
        timeline,
        undetermined,
        critical_machines: sorted.iter().filter(|a| a.critical).map(|a| a.machine).collect(),
    })
}

/// How many swings are examined per machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwingMode {
    /// Every swing inside the horizon.
    #[default]
    All,
    /// Only each machine's first event.
    FirstSwing,
}

/// Everything derived from one clearing scenario.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub trajectory: Trajectory,
    pub energy: EnergyChannels,
    pub machines: Vec<MachineAssessment>,
    pub system: SystemAssessment,
}

/// Simulate, compute energies, detect events and assess every machine.
///
/// A diverged run is reported as [`Error::Diverged`].
pub fn analyze(
    case: &StabilityCase,
    sep: &EquilibriumPoint,
    cfg: &SimulationConfig,
    mode: SwingMode,
) -> Result<Analysis> {
    let trajectory = simulate(case, cfg)?;
    if let Some(time) = trajectory.diverged_at {
        return Err(Error::Diverged {
            t_clear: cfg.t_clear,
            time,
        });
    }
    let energy = compute_energy(case, &trajectory, sep);
    let mut events = detect_events(&trajectory, &energy);
    if mode == SwingMode::FirstSwing {
        for ev in &mut events {
            ev.truncate(1);
        }
    }
    let machines = assess_machines(&trajectory, &energy, &events);
    let system = assess_system(&machines)?;
    Ok(Analysis {
        trajectory,
        energy,
        machines,
        system,
    })
}
