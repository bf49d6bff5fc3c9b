//! Bus/branch network assembly for classical-model studies.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{kron_reduce, ReducedNetwork};
use crate::error::{Error, Result};

/// π-model line or transformer between two buses (external bus ids).
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, split half to each end.
    pub b: f64,
}

/// Generator attached to a bus through its transient reactance.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMachine {
    pub bus: usize,
    pub xd_prime: f64,
}

/// Full network: buses, branches, constant-admittance loads and generators.
#[derive(Debug, Clone)]
pub struct Grid {
    pub bus_ids: Vec<usize>,
    pub branches: Vec<Branch>,
    /// Shunt admittance per bus, same order as `bus_ids`.
    pub shunts: Vec<Complex64>,
    pub machines: Vec<GridMachine>,
}

impl Grid {
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == id)
    }

    fn require_bus(&self, id: usize, field: &str) -> Result<usize> {
        self.bus_index(id)
            .ok_or_else(|| Error::validation(field, format!("unknown bus {id}")))
    }

    /// Index of the single branch joining buses `a` and `b` (either orientation).
    pub fn find_branch(&self, a: usize, b: usize) -> Result<usize> {
        let hits: Vec<usize> = self
            .branches
            .iter()
            .enumerate()
            .filter(|(_, br)| (br.from == a && br.to == b) || (br.from == b && br.to == a))
            .map(|(k, _)| k)
            .collect();
        match hits.as_slice() {
            [k] => Ok(*k),
            [] => Err(Error::validation(
                "fault.cleared_branch",
                format!("no branch joins buses {a} and {b}"),
            )),
            _ => Err(Error::validation(
                "fault.cleared_branch",
                format!("{} parallel branches join buses {a} and {b}", hits.len()),
            )),
        }
    }

    /// Bus admittance matrix augmented with one internal node per machine.
    ///
    /// Nodes `0..nb` are buses, `nb..nb+n` machine internal nodes. Loads are
    /// returned separately as per-node shunts.
    pub fn augmented_admittance(
        &self,
        open_branch: Option<usize>,
    ) -> Result<(DMatrix<Complex64>, Vec<usize>, Vec<Complex64>)> {
        let nb = self.bus_ids.len();
        let n = self.machines.len();
        let mut y = DMatrix::from_element(nb + n, nb + n, Complex64::new(0.0, 0.0));
        for (k, br) in self.branches.iter().enumerate() {
            if Some(k) == open_branch {
                continue;
            }
            let field = format!("branches[{k}]");
            let f = self.require_bus(br.from, &field)?;
            let t = self.require_bus(br.to, &field)?;
            let z = Complex64::new(br.r, br.x);
            if z.norm() == 0.0 {
                return Err(Error::validation(field, "zero series impedance"));
            }
            let ys = z.inv();
            let ysh = Complex64::new(0.0, br.b / 2.0);
            y[(f, f)] += ys + ysh;
            y[(t, t)] += ys + ysh;
            y[(f, t)] -= ys;
            y[(t, f)] -= ys;
        }
        let mut gen_nodes = Vec::with_capacity(n);
        for (i, m) in self.machines.iter().enumerate() {
            let field = format!("machines[{i}]");
            let bus = self.require_bus(m.bus, &format!("{field}.bus"))?;
            if !(m.xd_prime > 0.0) {
                return Err(Error::validation(format!("{field}.xd_prime"), "must be positive"));
            }
            let yg = Complex64::new(0.0, m.xd_prime).inv();
            let node = nb + i;
            y[(node, node)] += yg;
            y[(bus, bus)] += yg;
            y[(node, bus)] -= yg;
            y[(bus, node)] -= yg;
            gen_nodes.push(node);
        }
        let mut shunts = self.shunts.clone();
        shunts.resize(nb + n, Complex64::new(0.0, 0.0));
        Ok((y, gen_nodes, shunts))
    }

    /// Reduced internal-node network with an optional opened branch and an
    /// optional bolted three-phase fault (bus voltage forced to zero).
    pub fn reduce(&self, open_branch: Option<usize>, faulted_bus: Option<usize>) -> Result<ReducedNetwork> {
        let (y, gen_nodes, shunts) = self.augmented_admittance(open_branch)?;
        match faulted_bus {
            None => kron_reduce(&y, &gen_nodes, &shunts),
            Some(id) => {
                let fb = self.require_bus(id, "fault.bus")?;
                let keep: Vec<usize> = (0..y.nrows()).filter(|&k| k != fb).collect();
                let y_f = DMatrix::from_fn(keep.len(), keep.len(), |i, j| y[(keep[i], keep[j])]);
                let shunts_f: Vec<Complex64> = keep.iter().map(|&k| shunts[k]).collect();
                let gens_f: Vec<usize> = gen_nodes
                    .iter()
                    .map(|g| keep.iter().position(|k| k == g).expect("internal nodes are never faulted"))
                    .collect();
                kron_reduce(&y_f, &gens_f, &shunts_f)
            }
        }
    }
}
