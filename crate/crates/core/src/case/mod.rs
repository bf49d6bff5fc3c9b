//! Problem description for a classical multi-machine stability study.
//!
//! A [`StabilityCase`] bundles the machine parameters, the three
//! Kron-reduced internal-node networks (pre-fault, fault-on, post-fault)
//! and the pre-fault operating point. It is immutable once validated and
//! is shared read-only by every simulation.

mod file;
mod grid;
mod kron;
mod network;
mod sep;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use file::{
    load_case, BranchEntry, BusEntry, CaseDocument, FaultEntry, LoadEntry, MachineEntry,
    MatrixPair, NetworkSet, ReducedNetworks,
};
pub use grid::{Branch, Grid, GridMachine};
pub use kron::kron_reduce;
pub use network::{coi_force, coi_force_into, electrical_power, electrical_power_into, power_jacobian};
pub use sep::{solve_postfault_sep, EquilibriumPoint};

/// Largest pre-fault accelerating power accepted at the initial point, p.u.
pub const PREFAULT_EQUILIBRIUM_TOL: f64 = 1e-6;

/// Symmetry tolerance for the reduced G and B matrices.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Classical machine: constant EMF behind transient reactance.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineParams {
    /// 0-based machine index.
    pub id: usize,
    /// Inertia constant M = 2H/ω_syn, p.u.·s²/rad.
    pub inertia: f64,
    /// Mechanical input power, p.u.
    pub mech_power: f64,
    /// EMF magnitude behind x'd, p.u.
    pub emf: f64,
    /// Damping coefficient, p.u.·s/rad.
    pub damping: f64,
}

impl MachineParams {
    pub fn new(id: usize, inertia: f64, mech_power: f64, emf: f64) -> Self {
        Self {
            id,
            inertia,
            mech_power,
            emf,
            damping: 0.0,
        }
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    /// Inertia from the stored-energy constant `h` (s) at `base_frequency_hz`.
    pub fn inertia_from_h(h: f64, base_frequency_hz: f64) -> f64 {
        2.0 * h / (2.0 * std::f64::consts::PI * base_frequency_hz)
    }

    fn validate(&self, field: &str) -> Result<()> {
        if !(self.inertia > 0.0) || !self.inertia.is_finite() {
            return Err(Error::validation(
                format!("{field}.M"),
                format!("inertia must be positive, got {}", self.inertia),
            ));
        }
        if !(self.emf > 0.0) || !self.emf.is_finite() {
            return Err(Error::validation(
                format!("{field}.E"),
                format!("EMF must be positive, got {}", self.emf),
            ));
        }
        if !(self.damping >= 0.0) || !self.damping.is_finite() {
            return Err(Error::validation(
                format!("{field}.D"),
                format!("damping must be non-negative, got {}", self.damping),
            ));
        }
        if !self.mech_power.is_finite() {
            return Err(Error::validation(format!("{field}.Pm"), "must be finite"));
        }
        Ok(())
    }
}

/// Internal-node network left after eliminating every non-generator bus.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedNetwork {
    /// Conductance matrix, p.u.
    pub g: DMatrix<f64>,
    /// Susceptance matrix, p.u.
    pub b: DMatrix<f64>,
}

impl ReducedNetwork {
    pub fn new(g: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        Self { g, b }
    }

    /// Lossless network with the given susceptance matrix.
    pub fn lossless(b: DMatrix<f64>) -> Self {
        let n = b.nrows();
        Self {
            g: DMatrix::zeros(n, n),
            b,
        }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// Same network with all conductances removed.
    pub fn without_losses(&self) -> Self {
        Self::lossless(self.b.clone())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            g: &self.g * factor,
            b: &self.b * factor,
        }
    }

    pub fn validate(&self, field: &str, n: usize) -> Result<()> {
        for (name, m) in [("G", &self.g), ("B", &self.b)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::validation(
                    format!("{field}.{name}"),
                    format!(
                        "expected {n}x{n} to match the machine count, got {}x{}",
                        m.nrows(),
                        m.ncols()
                    ),
                ));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(
                    format!("{field}.{name}"),
                    "contains non-finite entries",
                ));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                        return Err(Error::validation(
                            format!("{field}.{name}"),
                            format!("not symmetric at ({i}, {j})"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Which network is active during a simulation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Prefault,
    FaultOn,
    PostFault,
}

/// Immutable stability study: machines, staged networks and initial state.
#[derive(Debug, Clone)]
pub struct StabilityCase {
    pub label: String,
    pub machines: Vec<MachineParams>,
    pub net_prefault: ReducedNetwork,
    pub net_faulton: ReducedNetwork,
    pub net_postfault: ReducedNetwork,
    /// Initial rotor angles in the synchronous frame, rad.
    pub delta0: Vec<f64>,
    /// Initial speed deviations, rad/s.
    pub omega0: Vec<f64>,
}

impl StabilityCase {
    /// Builds and validates a case.
    pub fn new(
        label: impl Into<String>,
        machines: Vec<MachineParams>,
        net_prefault: ReducedNetwork,
        net_faulton: ReducedNetwork,
        net_postfault: ReducedNetwork,
        delta0: Vec<f64>,
    ) -> Result<Self> {
        let n = machines.len();
        let case = Self {
            label: label.into(),
            machines,
            net_prefault,
            net_faulton,
            net_postfault,
            delta0,
            omega0: vec![0.0; n],
        };
        case.validate()?;
        Ok(case)
    }

    pub fn n_machines(&self) -> usize {
        self.machines.len()
    }

    pub fn network(&self, stage: Stage) -> &ReducedNetwork {
        match stage {
            Stage::Prefault => &self.net_prefault,
            Stage::FaultOn => &self.net_faulton,
            Stage::PostFault => &self.net_postfault,
        }
    }

    pub fn total_inertia(&self) -> f64 {
        self.machines.iter().map(|m| m.inertia).sum()
    }

    pub fn inertias(&self) -> Vec<f64> {
        self.machines.iter().map(|m| m.inertia).collect()
    }

    /// Pre-fault accelerating power P_m − P_e at the initial angles.
    pub fn prefault_mismatch(&self) -> Vec<f64> {
        let pe = electrical_power(&self.net_prefault, &self.machines, &self.delta0);
        self.machines
            .iter()
            .zip(pe)
            .map(|(m, pe)| m.mech_power - pe)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.machines.len();
        if n < 2 {
            return Err(Error::validation(
                "machines",
                format!("at least two machines are required, got {n}"),
            ));
        }
        for (k, m) in self.machines.iter().enumerate() {
            if m.id != k {
                return Err(Error::validation(
                    format!("machines[{k}].id"),
                    format!("expected id {k}, got {}", m.id),
                ));
            }
            m.validate(&format!("machines[{k}]"))?;
        }
        self.net_prefault.validate("net_prefault", n)?;
        self.net_faulton.validate("net_faulton", n)?;
        self.net_postfault.validate("net_postfault", n)?;
        if self.delta0.len() != n {
            return Err(Error::validation(
                "delta0",
                format!("expected {n} angles, got {}", self.delta0.len()),
            ));
        }
        if self.omega0.len() != n {
            return Err(Error::validation(
                "omega0",
                format!("expected {n} speeds, got {}", self.omega0.len()),
            ));
        }
        if self.delta0.iter().chain(&self.omega0).any(|v| !v.is_finite()) {
            return Err(Error::validation("delta0", "non-finite initial state"));
        }
        let mismatch = self.prefault_mismatch();
        if let Some((k, worst)) = mismatch
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        {
            if worst.abs() >= PREFAULT_EQUILIBRIUM_TOL {
                return Err(Error::validation(
                    "delta0",
                    format!(
                        "initial point is not a pre-fault equilibrium: machine {k} has Pm - Pe = {worst:.3e} p.u."
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Copy with every conductance dropped and mechanical power rebalanced to
    /// keep the initial point an equilibrium.
    pub fn lossless_variant(&self) -> Result<Self> {
        let mut out = self.clone();
        out.label = format!("{} (lossless)", self.label);
        out.net_prefault = self.net_prefault.without_losses();
        out.net_faulton = self.net_faulton.without_losses();
        out.net_postfault = self.net_postfault.without_losses();
        let pe = electrical_power(&out.net_prefault, &out.machines, &out.delta0);
        for (m, pe) in out.machines.iter_mut().zip(pe) {
            m.mech_power = pe;
        }
        out.validate()?;
        Ok(out)
    }

    /// Copy whose fault-on network equals the pre-fault network: no disturbance.
    pub fn undisturbed(&self) -> Self {
        let mut out = self.clone();
        out.net_faulton = self.net_prefault.clone();
        out.net_postfault = self.net_prefault.clone();
        out
    }

    /// Copy with inertia, mechanical power and all networks multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut out = self.clone();
        for m in &mut out.machines {
            m.inertia *= factor;
            m.mech_power *= factor;
            m.damping *= factor;
        }
        out.net_prefault = self.net_prefault.scaled(factor);
        out.net_faulton = self.net_faulton.scaled(factor);
        out.net_postfault = self.net_postfault.scaled(factor);
        out.validate()?;
        Ok(out)
    }
}
