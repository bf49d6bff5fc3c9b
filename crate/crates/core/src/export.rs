//! Plain-text outputs: CSV tables, JSON documents, JSON Lines event streams
//! and gnuplot-style surface files. Angles are written in degrees where the
//! column name says so, radians elsewhere.

use std::io::{self, Write};

use serde::Serialize;

use crate::assessment::{Separation, SystemAssessment};
use crate::cct::{CctResult, MarginPoint};
use crate::dynamics::Trajectory;
use crate::energy::{Classification, Direction, EnergyChannels, EventKind, MachineAssessment, SwingEvent};
use crate::surface::{SampleSource, SurfaceGrid, SurfaceSample};

/// Trajectory table, one row per sample.
///
/// Columns: `t_s`, then per machine `delta_i_deg`, `omega_i_rad_s`,
/// `delta_coi_i_deg`, `omega_coi_i_rad_s`, `f_coi_i_pu`, `ke_i_pu`, `pe_i_pu`,
/// each group covering all machines before the next begins.
pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory, energy: &EnergyChannels) -> io::Result<()> {
    let n = traj.n_machines();
    let groups: [(&str, &str); 7] = [
        ("delta", "deg"),
        ("omega", "rad_s"),
        ("delta_coi", "deg"),
        ("omega_coi", "rad_s"),
        ("f_coi", "pu"),
        ("ke", "pu"),
        ("pe", "pu"),
    ];
    let mut header = vec!["t_s".to_string()];
    for (name, unit) in groups {
        header.extend((0..n).map(|i| format!("{name}_{i}_{unit}")));
    }
    writeln!(w, "{}", header.join(","))?;
    let mut row = String::new();
    for k in 0..traj.len() {
        row.clear();
        row.push_str(&traj.times[k].to_string());
        let channels = [
            (&traj.delta, true),
            (&traj.omega, false),
            (&traj.delta_coi, true),
            (&traj.omega_coi, false),
            (&traj.f_coi, false),
            (&energy.ke, false),
            (&energy.pe, false),
        ];
        for (ch, degrees) in channels {
            for i in 0..n {
                let v = ch[(i, k)];
                row.push(',');
                row.push_str(&if degrees { v.to_degrees() } else { v }.to_string());
            }
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// One swing event as exported.
#[derive(Debug, Clone, Serialize)]
pub struct EventRecord {
    pub machine: usize,
    pub kind: EventKind,
    pub swing_index: usize,
    pub time_s: f64,
    pub delta_coi_deg: f64,
    pub residual_ke_pu: f64,
    pub direction: Direction,
    pub near_critical: bool,
}

impl From<&SwingEvent> for EventRecord {
    fn from(e: &SwingEvent) -> Self {
        Self {
            machine: e.machine,
            kind: e.kind,
            swing_index: e.swing_index,
            time_s: e.time,
            delta_coi_deg: e.delta_coi.to_degrees(),
            residual_ke_pu: e.residual_ke,
            direction: e.direction,
            near_critical: e.near_critical,
        }
    }
}

/// One JSON object per line, in the given order.
pub fn write_events<W: Write>(mut w: W, events: &[SwingEvent]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, &EventRecord::from(e))?;
        writeln!(w)?;
    }
    Ok(())
}

fn classification_label(c: Classification) -> String {
    match c {
        Classification::Stable => "stable".into(),
        Classification::UnstableAtSwing(k) => format!("unstable-at-swing-{k}"),
        Classification::Undetermined => "undetermined".into(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-machine margins as a CSV table.
pub fn write_margins<W: Write>(mut w: W, machines: &[MachineAssessment]) -> io::Result<()> {
    writeln!(w, "machine,classification,eta,a_acc_pu,a_dec_pu,eac_residual_pu,critical")?;
    for a in machines {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            a.machine,
            classification_label(a.classification),
            opt(a.margin),
            a.a_acc,
            opt(a.a_dec),
            a.eac_residual,
            a.critical
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct MachineVerdict {
    machine: usize,
    classification: String,
    eta: Option<f64>,
    critical: bool,
}

/// Verdict document of one clearing scenario.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictDocument {
    pub case: String,
    pub t_clear_s: f64,
    pub t_end_s: f64,
    pub stable: bool,
    pub leading_losp: Option<Separation>,
    pub severity: Vec<Separation>,
    pub severity_final_time_s: Option<f64>,
    pub undetermined: Vec<usize>,
    pub critical_machines: Vec<usize>,
    machines: Vec<MachineVerdict>,
    pub timeline: Vec<EventRecord>,
}

impl VerdictDocument {
    pub fn new(
        case: &str,
        t_clear: f64,
        t_end: f64,
        system: &SystemAssessment,
        machines: &[MachineAssessment],
    ) -> Self {
        Self {
            case: case.to_string(),
            t_clear_s: t_clear,
            t_end_s: t_end,
            stable: system.stable,
            leading_losp: system.leading_losp,
            severity: system.severity.clone(),
            severity_final_time_s: system.severity_final_time,
            undetermined: system.undetermined.clone(),
            critical_machines: system.critical_machines.clone(),
            machines: machines
                .iter()
                .map(|a| MachineVerdict {
                    machine: a.machine,
                    classification: classification_label(a.classification),
                    eta: a.margin,
                    critical: a.critical,
                })
                .collect(),
            timeline: system.timeline.iter().map(EventRecord::from).collect(),
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
}

/// Human-readable verdict summary.
pub fn render_verdict(system: &SystemAssessment, machines: &[MachineAssessment]) -> String {
    let mut s = String::new();
    let head = if system.stable {
        if system.undetermined.is_empty() {
            "STABLE".to_string()
        } else {
            format!("STABLE within horizon, {} machine(s) undetermined", system.undetermined.len())
        }
    } else {
        let l = system.leading_losp.expect("unstable verdict has a leading separation");
        format!("UNSTABLE: leading separation machine {} at {:.3} s", l.machine, l.time)
    };
    s.push_str(&head);
    s.push('\n');
    s.push_str(&format!("{:>7}  {:<22} {:>12} {:>10}  {}\n", "machine", "classification", "eta", "A_acc", "events"));
    for a in machines {
        let events: Vec<String> = a
            .events
            .iter()
            .map(|e| {
                let kind = match e.kind {
                    EventKind::Dsp => "DSP",
                    EventKind::Dlp => "DLP",
                };
                format!("{kind}{}@{:.3}", e.swing_index, e.time)
            })
            .collect();
        s.push_str(&format!(
            "{:>7}{} {:<22} {:>12} {:>10.4}  {}\n",
            a.machine,
            if a.critical { '*' } else { ' ' },
            classification_label(a.classification),
            a.margin.map(|m| format!("{m:.4}")).unwrap_or_else(|| "-".into()),
            a.a_acc,
            events.join(" ")
        ));
    }
    if let Some(t) = system.severity_final_time {
        let list: Vec<String> = system.severity.iter().map(|x| format!("{}@{:.3}", x.machine, x.time)).collect();
        s.push_str(&format!("severity: [{}], last separation at {t:.3} s\n", list.join(", ")));
    }
    s
}

pub fn write_cct<W: Write>(w: W, result: &CctResult) -> io::Result<()> {
    write_json(w, result)
}

/// Two-column margin curve of the MDM.
pub fn write_margin_curve<W: Write>(mut w: W, curve: &[MarginPoint]) -> io::Result<()> {
    writeln!(w, "t_clear_s eta_mdm")?;
    for p in curve {
        writeln!(w, "{} {}", p.t_clear, p.eta_mdm)?;
    }
    Ok(())
}

/// Grid surface: `x y pe` rows, one blank line after each scanline of constant x.
pub fn write_surface_grid<W: Write>(mut w: W, grid: &SurfaceGrid) -> io::Result<()> {
    writeln!(w, "# x_rad y_rad pe_pu")?;
    for (ix, x) in grid.xs.iter().enumerate() {
        for (iy, y) in grid.ys.iter().enumerate() {
            // + 0.0 folds negative zero
            writeln!(w, "{x} {y} {}", grid.pe[(ix, iy)] + 0.0)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Trajectory ribbons: `traj_id t x y pe` rows.
pub fn write_surface_ribbons<W: Write>(mut w: W, samples: &[SurfaceSample]) -> io::Result<()> {
    writeln!(w, "# traj_id t_s x_rad y_rad pe_pu")?;
    for s in samples {
        if let SampleSource::Trajectory { id, t } = s.source {
            writeln!(w, "{id} {t} {} {} {}", s.x, s.y, s.pe)?;
        }
    }
    Ok(())
}

/// Record of one command invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub case_path: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub wall_time_s: f64,
}
