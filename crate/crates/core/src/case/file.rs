//! JSON case files.
//!
//! Two layouts are accepted. Both carry `base_frequency_hz` and a
//! `machines` list.
//!
//! * Reduced: `networks.reduced.{prefault,faulton,postfault}` each give
//!   `G` and `B` matrices, machines give `H` or `M`, `Pm`, `E` and
//!   optionally `D`, and `initial_angles_deg` gives the pre-fault angles.
//! * Raw: `buses`, `branches`, `loads` and `fault` describe the full network
//!   together with a solved pre-fault power flow (bus voltage magnitude and
//!   angle, generator `P` and `Q`). Machines give `H` or `M`, `bus`,
//!   `xd_prime` and optionally `D`; `E`, `delta0` and `Pm` are derived.
//!
//! All angles in the file are degrees; all other quantities are per unit on
//! the system base.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{Branch, Grid, GridMachine};
use super::{electrical_power, MachineParams, ReducedNetwork, StabilityCase};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDocument {
    #[serde(default)]
    pub label: String,
    pub base_frequency_hz: f64,
    pub machines: Vec<MachineEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_angles_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub networks: Option<NetworkSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buses: Option<Vec<BusEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<BranchEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loads: Option<Vec<LoadEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultEntry>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineEntry {
    pub id: usize,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(rename = "Pm", default, skip_serializing_if = "Option::is_none")]
    pub pm: Option<f64>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(rename = "D", default)]
    pub d: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bus: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xd_prime: Option<f64>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSet {
    pub reduced: ReducedNetworks,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedNetworks {
    pub prefault: MatrixPair,
    pub faulton: MatrixPair,
    pub postfault: MatrixPair,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixPair {
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusEntry {
    pub id: usize,
    /// Solved pre-fault voltage magnitude, p.u.
    pub v: f64,
    /// Solved pre-fault voltage angle, degrees.
    pub angle_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchEntry {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadEntry {
    pub bus: usize,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEntry {
    /// Bus with a bolted three-phase fault during the fault-on stage.
    pub bus: usize,
    /// Bus pair of the branch opened to clear the fault.
    pub cleared_branch: [usize; 2],
}

/// Reads, parses and validates a case file.
pub fn load_case(path: impl AsRef<Path>) -> Result<StabilityCase> {
    CaseDocument::from_path(path)?.build()
}

impl CaseDocument {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Parse {
            path: "<inline>".into(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case documents always serialize")
    }

    fn is_raw(&self) -> bool {
        self.buses.is_some() || self.branches.is_some() || self.loads.is_some() || self.fault.is_some()
    }

    /// Converts the document into a validated [`StabilityCase`].
    pub fn build(&self) -> Result<StabilityCase> {
        if !(self.base_frequency_hz > 0.0) {
            return Err(Error::validation("base_frequency_hz", "must be positive"));
        }
        if self.machines.is_empty() {
            return Err(Error::validation("machines", "no machines given"));
        }
        match (self.is_raw(), &self.networks) {
            (true, Some(_)) => Err(Error::validation(
                "networks",
                "give either networks.reduced or buses/branches/loads/fault, not both",
            )),
            (false, None) => Err(Error::validation(
                "networks",
                "missing: give networks.reduced or buses/branches/loads/fault",
            )),
            (false, Some(nets)) => self.build_reduced(&nets.reduced),
            (true, None) => self.build_raw(),
        }
    }

    fn inertia(&self, k: usize, m: &MachineEntry) -> Result<f64> {
        match (m.h, m.m) {
            (Some(h), None) => Ok(MachineParams::inertia_from_h(h, self.base_frequency_hz)),
            (None, Some(m)) => Ok(m),
            (Some(_), Some(_)) => Err(Error::validation(
                format!("machines[{k}]"),
                "give either H or M, not both",
            )),
            (None, None) => Err(Error::validation(format!("machines[{k}].H"), "missing H or M")),
        }
    }

    fn build_reduced(&self, nets: &ReducedNetworks) -> Result<StabilityCase> {
        let mut machines = Vec::with_capacity(self.machines.len());
        for (k, m) in self.machines.iter().enumerate() {
            for (present, name) in [
                (m.bus.is_some(), "bus"),
                (m.xd_prime.is_some(), "xd_prime"),
                (m.p.is_some(), "P"),
                (m.q.is_some(), "Q"),
            ] {
                if present {
                    return Err(Error::validation(
                        format!("machines[{k}].{name}"),
                        "only allowed with a raw bus/branch network",
                    ));
                }
            }
            let pm = m
                .pm
                .ok_or_else(|| Error::validation(format!("machines[{k}].Pm"), "missing"))?;
            let e = m
                .e
                .ok_or_else(|| Error::validation(format!("machines[{k}].E"), "missing"))?;
            machines.push(MachineParams {
                id: m.id,
                inertia: self.inertia(k, m)?,
                mech_power: pm,
                emf: e,
                damping: m.d,
            });
        }
        let delta0 = self
            .initial_angles_deg
            .as_ref()
            .ok_or_else(|| Error::validation("initial_angles_deg", "missing"))?
            .iter()
            .map(|d| d.to_radians())
            .collect();
        StabilityCase::new(
            self.label.clone(),
            machines,
            matrix_pair(&nets.prefault, "net_prefault")?,
            matrix_pair(&nets.faulton, "net_faulton")?,
            matrix_pair(&nets.postfault, "net_postfault")?,
            delta0,
        )
    }

    /// Builds the bus/branch grid and the derived classical machine data.
    pub fn grid(&self) -> Result<(Grid, Vec<Complex64>)> {
        let buses = self
            .buses
            .as_ref()
            .ok_or_else(|| Error::validation("buses", "missing"))?;
        let branches = self
            .branches
            .as_ref()
            .ok_or_else(|| Error::validation("branches", "missing"))?;
        let loads = self.loads.as_deref().unwrap_or_default();

        let bus_ids: Vec<usize> = buses.iter().map(|b| b.id).collect();
        for (k, id) in bus_ids.iter().enumerate() {
            if bus_ids[..k].contains(id) {
                return Err(Error::validation(format!("buses[{k}].id"), format!("duplicate bus {id}")));
            }
            if !(buses[k].v > 0.0) {
                return Err(Error::validation(format!("buses[{k}].v"), "must be positive"));
            }
        }
        let voltage = |k: usize| Complex64::from_polar(buses[k].v, buses[k].angle_deg.to_radians());
        let index_of = |id: usize, field: String| {
            bus_ids
                .iter()
                .position(|&b| b == id)
                .ok_or_else(|| Error::validation(field, format!("unknown bus {id}")))
        };

        let mut shunts = vec![Complex64::new(0.0, 0.0); bus_ids.len()];
        for (k, load) in loads.iter().enumerate() {
            let b = index_of(load.bus, format!("loads[{k}].bus"))?;
            let v2 = buses[b].v * buses[b].v;
            shunts[b] += Complex64::new(load.p, -load.q) / v2;
        }

        let mut grid_machines = Vec::with_capacity(self.machines.len());
        let mut emf = Vec::with_capacity(self.machines.len());
        for (k, m) in self.machines.iter().enumerate() {
            if m.pm.is_some() || m.e.is_some() {
                return Err(Error::validation(
                    format!("machines[{k}]"),
                    "Pm and E are derived from the power flow in a raw network case",
                ));
            }
            let field = |name: &str| format!("machines[{k}].{name}");
            let bus = m.bus.ok_or_else(|| Error::validation(field("bus"), "missing"))?;
            let xd = m
                .xd_prime
                .ok_or_else(|| Error::validation(field("xd_prime"), "missing"))?;
            let p = m.p.ok_or_else(|| Error::validation(field("P"), "missing"))?;
            let q = m.q.ok_or_else(|| Error::validation(field("Q"), "missing"))?;
            let b = index_of(bus, field("bus"))?;
            let v = voltage(b);
            let current = (Complex64::new(p, q) / v).conj();
            emf.push(v + Complex64::new(0.0, xd) * current);
            grid_machines.push(GridMachine { bus, xd_prime: xd });
        }

        let grid = Grid {
            bus_ids,
            branches: branches
                .iter()
                .map(|b| Branch {
                    from: b.from,
                    to: b.to,
                    r: b.r,
                    x: b.x,
                    b: b.b,
                })
                .collect(),
            shunts,
            machines: grid_machines,
        };
        Ok((grid, emf))
    }

    fn build_raw(&self) -> Result<StabilityCase> {
        if self.initial_angles_deg.is_some() {
            return Err(Error::validation(
                "initial_angles_deg",
                "derived from the power flow in a raw network case",
            ));
        }
        let fault = self
            .fault
            .as_ref()
            .ok_or_else(|| Error::validation("fault", "missing"))?;
        let (grid, emf) = self.grid()?;
        let cleared = grid.find_branch(fault.cleared_branch[0], fault.cleared_branch[1])?;

        let net_prefault = grid.reduce(None, None)?;
        let net_faulton = grid.reduce(None, Some(fault.bus))?;
        let net_postfault = grid.reduce(Some(cleared), None)?;

        let delta0: Vec<f64> = emf.iter().map(|e| e.arg()).collect();
        let mut machines = Vec::with_capacity(self.machines.len());
        for (k, (m, e)) in self.machines.iter().zip(&emf).enumerate() {
            machines.push(MachineParams {
                id: m.id,
                inertia: self.inertia(k, m)?,
                mech_power: 0.0,
                emf: e.norm(),
                damping: m.d,
            });
        }
        // mechanical power balances the reduced pre-fault network exactly
        let pe = electrical_power(&net_prefault, &machines, &delta0);
        for (m, pe) in machines.iter_mut().zip(pe) {
            m.mech_power = pe;
        }
        StabilityCase::new(self.label.clone(), machines, net_prefault, net_faulton, net_postfault, delta0)
    }
}

fn matrix_pair(pair: &MatrixPair, field: &str) -> Result<ReducedNetwork> {
    Ok(ReducedNetwork::new(
        matrix(&pair.g, &format!("{field}.G"))?,
        matrix(&pair.b, &format!("{field}.B"))?,
    ))
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if let Some(k) = rows.iter().position(|r| r.len() != nc) {
        return Err(Error::validation(field, format!("row {k} has {} entries, expected {nc}", rows[k].len())));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}
