//! Fault-on / post-fault integration of the classical swing equations.
//!
//! Every recorded sample carries the synchronous-frame state together with
//! its centre-of-inertia (COI-SYS) decomposition, the relative accelerating
//! force on each machine under the active network, and the same force
//! evaluated with the post-fault network. The last channel is the
//! integrand of the individual-machine potential energy and is recorded on
//! both stages so energy analysis never has to touch the network again.

use nalgebra::DMatrix;

use crate::case::{coi_force_into, electrical_power_into, MachineParams, ReducedNetwork, Stage, StabilityCase};
use crate::error::{Error, Result};

/// Speed beyond which a run is treated as numerically blown up, rad/s.
pub const DIVERGENCE_SPEED: f64 = 1e4;

/// Tolerance for clearing time and horizon landing on the step grid, s.
const GRID_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    #[default]
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Fault clearing time, s.
    pub t_clear: f64,
    /// Simulation horizon, s.
    pub t_end: f64,
    /// Integration and recording step, s.
    pub dt: f64,
    pub method: Integrator,
}

impl SimulationConfig {
    pub fn new(t_clear: f64, t_end: f64) -> Self {
        Self {
            t_clear,
            t_end,
            dt: 1e-3,
            method: Integrator::Rk4,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Number of steps to clearing and to the horizon.
    pub fn steps(&self) -> Result<(usize, usize)> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_clear > 0.0) {
            return Err(Error::Config(format!("t_clear must be positive, got {}", self.t_clear)));
        }
        if !(self.t_clear < self.t_end) || !self.t_end.is_finite() {
            return Err(Error::Config(format!(
                "t_clear must be less than t_end (t_clear = {}, t_end = {})",
                self.t_clear, self.t_end
            )));
        }
        let on_grid = |t: f64, name: &str| -> Result<usize> {
            let k = (t / self.dt).round();
            if (k * self.dt - t).abs() > GRID_TOL {
                return Err(Error::Config(format!(
                    "{name} = {t} is not an integer multiple of dt = {}",
                    self.dt
                )));
            }
            Ok(k as usize)
        };
        Ok((on_grid(self.t_clear, "t_clear")?, on_grid(self.t_end, "t_end")?))
    }
}

/// Uniformly sampled run; every channel is n × T (machine by sample).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Rotor angles, synchronous frame, rad.
    pub delta: DMatrix<f64>,
    /// Speed deviations, rad/s.
    pub omega: DMatrix<f64>,
    /// δ_i-SYS, rad.
    pub delta_coi: DMatrix<f64>,
    /// ω_i-SYS, rad/s.
    pub omega_coi: DMatrix<f64>,
    /// f_i-SYS under the active network (including damping), p.u.
    pub f_coi: DMatrix<f64>,
    /// f_i-SYS under the post-fault network at the same angles, p.u.
    pub f_coi_pf: DMatrix<f64>,
    /// Σ_i accelerating power under the active network, p.u.
    pub p_sys: Vec<f64>,
    pub inertia: Vec<f64>,
    /// First sample recorded on the post-fault network.
    pub clear_index: usize,
    pub dt: f64,
    /// Time of the step that exceeded the divergence guard, if any.
    pub diverged_at: Option<f64>,
}

/// Machine-SYS aggregate state at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SysState {
    pub delta_sys: f64,
    pub omega_sys: f64,
    pub p_sys: f64,
}

impl Trajectory {
    pub fn n_machines(&self) -> usize {
        self.delta.nrows()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_clear(&self) -> f64 {
        self.times[self.clear_index]
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Largest |Σ M_i ω_i-SYS| / Σ M_i and largest |Σ f_i-SYS| over all samples.
    pub fn coi_identity_residuals(&self) -> (f64, f64) {
        let m_sys: f64 = self.inertia.iter().sum();
        let mut momentum = 0.0f64;
        let mut force = 0.0f64;
        for k in 0..self.len() {
            let mut p = 0.0;
            let mut f = 0.0;
            let mut f_pf = 0.0;
            for i in 0..self.n_machines() {
                p += self.inertia[i] * self.omega_coi[(i, k)];
                f += self.f_coi[(i, k)];
                f_pf += self.f_coi_pf[(i, k)];
            }
            momentum = momentum.max(p.abs() / m_sys);
            force = force.max(f.abs()).max(f_pf.abs());
        }
        (momentum, force)
    }
}

/// Machine-SYS angle, speed and accelerating power at sample `k`.
pub fn machine_sys_state(traj: &Trajectory, k: usize) -> SysState {
    let m_sys: f64 = traj.inertia.iter().sum();
    let weighted = |ch: &DMatrix<f64>| {
        traj.inertia
            .iter()
            .enumerate()
            .map(|(i, m)| m * ch[(i, k)])
            .sum::<f64>()
            / m_sys
    };
    SysState {
        delta_sys: weighted(&traj.delta),
        omega_sys: weighted(&traj.omega),
        p_sys: traj.p_sys[k],
    }
}

/// Swing equations of one network stage: dδ/dt = ω, M dω/dt = P_m − P_e − Dω.
pub struct SwingSystem<'a> {
    machines: &'a [MachineParams],
    net: &'a ReducedNetwork,
    scratch: Vec<f64>,
    stages: [Vec<f64>; 5],
}

impl<'a> SwingSystem<'a> {
    pub fn new(machines: &'a [MachineParams], net: &'a ReducedNetwork) -> Self {
        let n = machines.len();
        Self {
            machines,
            net,
            scratch: vec![0.0; n],
            stages: std::array::from_fn(|_| vec![0.0; 2 * n]),
        }
    }

    /// Accelerating power P_m − P_e − Dω per machine.
    pub fn accelerating_power(&mut self, delta: &[f64], omega: &[f64], out: &mut [f64]) {
        electrical_power_into(self.net, self.machines, delta, out);
        for ((p, m), w) in out.iter_mut().zip(self.machines).zip(omega) {
            *p = m.mech_power - *p - m.damping * w;
        }
    }

    fn derivative(&mut self, state: &[f64], out: &mut [f64]) {
        let n = self.machines.len();
        let (delta, omega) = state.split_at(n);
        let mut pacc = std::mem::take(&mut self.scratch);
        self.accelerating_power(delta, omega, &mut pacc);
        let (d_delta, d_omega) = out.split_at_mut(n);
        d_delta.copy_from_slice(omega);
        for ((dw, p), m) in d_omega.iter_mut().zip(&pacc).zip(self.machines) {
            *dw = p / m.inertia;
        }
        self.scratch = pacc;
    }

    /// Advances `state = [δ; ω]` by one RK4 step of size `dt` (negative steps integrate backward).
    pub fn step_rk4(&mut self, state: &mut [f64], dt: f64) {
        let mut st = std::mem::take(&mut self.stages);
        let [k1, k2, k3, k4, tmp] = &mut st;
        self.derivative(state, k1);
        for (t, (x, k)) in tmp.iter_mut().zip(state.iter().zip(k1.iter())) {
            *t = x + 0.5 * dt * k;
        }
        self.derivative(tmp, k2);
        for (t, (x, k)) in tmp.iter_mut().zip(state.iter().zip(k2.iter())) {
            *t = x + 0.5 * dt * k;
        }
        self.derivative(tmp, k3);
        for (t, (x, k)) in tmp.iter_mut().zip(state.iter().zip(k3.iter())) {
            *t = x + dt * k;
        }
        self.derivative(tmp, k4);
        for (i, x) in state.iter_mut().enumerate() {
            *x += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        self.stages = st;
    }
}

struct Recorder<'a> {
    machines: &'a [MachineParams],
    postfault: &'a ReducedNetwork,
    m_sys: f64,
    pacc: Vec<f64>,
    f_pf: Vec<f64>,
    traj: Trajectory,
}

impl Recorder<'_> {
    fn record(&mut self, k: usize, state: &[f64], sys: &mut SwingSystem) {
        let n = self.machines.len();
        let (delta, omega) = state.split_at(n);
        sys.accelerating_power(delta, omega, &mut self.pacc);
        coi_force_into(self.postfault, self.machines, delta, &mut self.f_pf);

        let mut delta_sys = 0.0;
        let mut omega_sys = 0.0;
        let mut p_sys = 0.0;
        for i in 0..n {
            let m = self.machines[i].inertia;
            delta_sys += m * delta[i];
            omega_sys += m * omega[i];
            p_sys += self.pacc[i];
        }
        delta_sys /= self.m_sys;
        omega_sys /= self.m_sys;

        let t = &mut self.traj;
        t.times[k] = k as f64 * t.dt;
        t.p_sys[k] = p_sys;
        for i in 0..n {
            t.delta[(i, k)] = delta[i];
            t.omega[(i, k)] = omega[i];
            t.delta_coi[(i, k)] = delta[i] - delta_sys;
            t.omega_coi[(i, k)] = omega[i] - omega_sys;
            t.f_coi[(i, k)] = self.pacc[i] - self.machines[i].inertia / self.m_sys * p_sys;
            t.f_coi_pf[(i, k)] = self.f_pf[i];
        }
    }

    fn finish(mut self, recorded: usize) -> Trajectory {
        let t = &mut self.traj;
        if recorded < t.times.len() {
            t.times.truncate(recorded);
            t.p_sys.truncate(recorded);
            for ch in [
                &mut t.delta,
                &mut t.omega,
                &mut t.delta_coi,
                &mut t.omega_coi,
                &mut t.f_coi,
                &mut t.f_coi_pf,
            ] {
                *ch = ch.columns(0, recorded).into_owned();
            }
        }
        self.traj
    }
}

/// Integrates the fault-on stage on `[0, t_clear]` and the post-fault stage on
/// `[t_clear, t_end]`, switching networks exactly on a grid point.
///
/// Numerical blow-up is not an error: the trajectory is truncated at the last
/// finite sample and `diverged_at` is set.
pub fn simulate(case: &StabilityCase, cfg: &SimulationConfig) -> Result<Trajectory> {
    case.validate()?;
    let (clear_steps, total_steps) = cfg.steps()?;
    let n = case.n_machines();
    let samples = total_steps + 1;
    let zeros = || DMatrix::zeros(n, samples);
    let mut rec = Recorder {
        machines: &case.machines,
        postfault: &case.net_postfault,
        m_sys: case.total_inertia(),
        pacc: vec![0.0; n],
        f_pf: vec![0.0; n],
        traj: Trajectory {
            times: vec![0.0; samples],
            delta: zeros(),
            omega: zeros(),
            delta_coi: zeros(),
            omega_coi: zeros(),
            f_coi: zeros(),
            f_coi_pf: zeros(),
            p_sys: vec![0.0; samples],
            inertia: case.inertias(),
            clear_index: clear_steps,
            dt: cfg.dt,
            diverged_at: None,
        },
    };

    let mut state: Vec<f64> = case.delta0.iter().chain(&case.omega0).copied().collect();
    let mut faulted = SwingSystem::new(&case.machines, case.network(Stage::FaultOn));
    let mut cleared = SwingSystem::new(&case.machines, case.network(Stage::PostFault));
    rec.record(0, &state, &mut faulted);

    for k in 1..samples {
        let sys = if k <= clear_steps { &mut faulted } else { &mut cleared };
        match cfg.method {
            Integrator::Rk4 => sys.step_rk4(&mut state, cfg.dt),
        }
        let blown = state[n..]
            .iter()
            .chain(&state[..n])
            .any(|v| !v.is_finite())
            || state[n..].iter().any(|w| w.abs() > DIVERGENCE_SPEED);
        if blown {
            rec.traj.diverged_at = Some(k as f64 * cfg.dt);
            return Ok(rec.finish(k));
        }
        // the clearing sample belongs to the post-fault stage
        let sys = if k < clear_steps { &mut faulted } else { &mut cleared };
        rec.record(k, &state, sys);
    }
    Ok(rec.finish(samples))
}
