//! Critical clearing time by bisection over full simulations.
//!
//! Probe clearing times live on the grid `t_lo + k·resolution`, which must
//! itself sit on the integration grid. The most-severely disturbed machine
//! (MDM) is the first machine to separate just above the CCT; its total
//! energy at clearing just below the CCT is the critical transient energy.

use rayon::prelude::*;
use serde::Serialize;

use crate::assessment::{analyze, SwingMode, SystemAssessment};
use crate::case::{solve_postfault_sep, EquilibriumPoint, StabilityCase};
use crate::dynamics::SimulationConfig;
use crate::energy::MachineAssessment;
use crate::error::{Error, Result};

const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CctOptions {
    /// Integration step, s.
    pub dt: f64,
    /// Post-clearing simulation window per probe, s.
    pub horizon: f64,
    pub mode: SwingMode,
}

impl Default for CctOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 3.0,
            mode: SwingMode::All,
        }
    }
}

impl CctOptions {
    fn steps(&self, t: f64, what: &str) -> Result<usize> {
        let k = (t / self.dt).round();
        if !(t > 0.0) || (k * self.dt - t).abs() > GRID_TOL * self.dt.max(t) {
            return Err(Error::Config(format!(
                "{what} = {t} s must be a positive multiple of dt = {} s",
                self.dt
            )));
        }
        Ok(k as usize)
    }

    /// Simulation settings for one clearing time, snapped to the step grid.
    pub fn config_for(&self, t_clear: f64) -> Result<SimulationConfig> {
        let kc = self.steps(t_clear, "t_clear")?;
        let kh = self.steps(self.horizon, "horizon")?;
        Ok(SimulationConfig::new(kc as f64 * self.dt, (kc + kh) as f64 * self.dt).with_dt(self.dt))
    }
}

/// Verdict and per-machine data of one clearing time.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub t_clear: f64,
    pub stable: bool,
    pub system: SystemAssessment,
    pub machines: Vec<MachineAssessment>,
    /// Total energy of each machine at the clearing sample, p.u.
    pub total_at_clear: Vec<f64>,
}

impl Evaluation {
    fn verdict(&self) -> &'static str {
        if self.stable {
            "stable"
        } else {
            "unstable"
        }
    }
}

/// Runs one probe: simulate, assess every machine, aggregate.
pub fn evaluate_clearing(
    case: &StabilityCase,
    sep: &EquilibriumPoint,
    t_clear: f64,
    opts: &CctOptions,
) -> Result<Evaluation> {
    let cfg = opts.config_for(t_clear)?;
    let a = analyze(case, sep, &cfg, opts.mode)?;
    let c = a.trajectory.clear_index;
    Ok(Evaluation {
        t_clear: cfg.t_clear,
        stable: a.system.stable,
        total_at_clear: (0..case.n_machines()).map(|i| a.energy.total[(i, c)]).collect(),
        system: a.system,
        machines: a.machines,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginPoint {
    pub t_clear: f64,
    pub eta_mdm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeVerdict {
    pub t_clear: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CctResult {
    /// Largest stable clearing time found, s.
    pub cct: f64,
    /// Smallest unstable clearing time found, s.
    pub cct_unstable: f64,
    pub resolution: f64,
    pub mdm: usize,
    /// The MDM also has the smallest margin on the stable side.
    pub mdm_consistent: bool,
    /// MDM total energy at clearing for `t_clear = cct`, p.u.
    pub critical_energy: f64,
    /// MDM kinetic energy left at its IMPP at `cct`, p.u.
    pub residual_ke_stable: Option<f64>,
    /// MDM kinetic energy left at its IMPP at `cct_unstable`, p.u.
    pub residual_ke_unstable: Option<f64>,
    pub margin_curve: Vec<MarginPoint>,
    pub probes: Vec<ProbeVerdict>,
    pub evaluations: usize,
}

/// MDM choice and whether both sides of the bracket agree on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MdmIdentification {
    pub machine: usize,
    pub consistent: bool,
}

/// The first machine to separate on the unstable side; cross-checked against
/// the smallest margin on the stable side.
pub fn identify_mdm(stable_side: &[MachineAssessment], unstable_side: &[MachineAssessment]) -> MdmIdentification {
    let min_stable = stable_side
        .iter()
        .filter_map(|a| a.margin.map(|m| (a.machine, m)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let first_dlp = unstable_side
        .iter()
        .filter_map(|a| a.first_dlp().map(|e| (a.machine, e.time)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let Some((machine, _)) = first_dlp.or(min_stable) else {
        return MdmIdentification {
            machine: 0,
            consistent: false,
        };
    };
    let eta = stable_side
        .iter()
        .find(|a| a.machine == machine)
        .and_then(|a| a.margin);
    let consistent = match (eta, min_stable) {
        (Some(e), Some((_, min))) => e <= min + 1e-12,
        _ => false,
    };
    if !consistent {
        log::warn!(
            "MDM {machine} from the unstable side does not have the smallest stable-side margin (min at {:?})",
            min_stable.map(|m| m.0)
        );
    }
    MdmIdentification { machine, consistent }
}

struct Grid {
    k_lo: usize,
    stride: usize,
    intervals: usize,
    dt: f64,
}

impl Grid {
    fn new(t_lo: f64, t_hi: f64, resolution: f64, opts: &CctOptions) -> Result<Self> {
        let k_lo = opts.steps(t_lo, "t_lo")?;
        let k_hi = opts.steps(t_hi, "t_hi")?;
        let stride = opts.steps(resolution, "resolution")?;
        if k_hi <= k_lo {
            return Err(Error::Config(format!("t_lo = {t_lo} s must be below t_hi = {t_hi} s")));
        }
        if (k_hi - k_lo) % stride != 0 {
            return Err(Error::Config(format!(
                "bracket width {} s is not a multiple of resolution {resolution} s",
                t_hi - t_lo
            )));
        }
        Ok(Self {
            k_lo,
            stride,
            intervals: (k_hi - k_lo) / stride,
            dt: opts.dt,
        })
    }

    fn time(&self, k: usize) -> f64 {
        (self.k_lo + k * self.stride) as f64 * self.dt
    }

    fn times(&self) -> Vec<f64> {
        (0..=self.intervals).map(|k| self.time(k)).collect()
    }
}

fn solve_sep(case: &StabilityCase) -> EquilibriumPoint {
    let sep = solve_postfault_sep(case);
    if !sep.converged {
        log::warn!("post-fault equilibrium not found; energies are measured from t = 0");
    }
    sep
}

/// Bisection for the critical clearing time inside `[t_lo, t_hi]`.
///
/// Needs a stable verdict at `t_lo` and an unstable one at `t_hi`; runs at
/// most `2 + ceil(log2((t_hi − t_lo) / resolution))` simulations.
pub fn find_cct(
    case: &StabilityCase,
    opts: &CctOptions,
    t_lo: f64,
    t_hi: f64,
    resolution: f64,
) -> Result<CctResult> {
    let grid = Grid::new(t_lo, t_hi, resolution, opts)?;
    let sep = solve_sep(case);
    let probe = |k: usize| evaluate_clearing(case, &sep, grid.time(k), opts);

    let (lo, hi) = rayon::join(|| probe(0), || probe(grid.intervals));
    let (mut lo, mut hi) = (lo?, hi?);
    let mut evaluations = 2;
    if !lo.stable || hi.stable {
        return Err(Error::InvalidBracket {
            t_lo: lo.t_clear,
            lo_verdict: lo.verdict().into(),
            t_hi: hi.t_clear,
            hi_verdict: hi.verdict().into(),
        });
    }
    let mut probes = vec![
        ProbeVerdict { t_clear: lo.t_clear, stable: true },
        ProbeVerdict { t_clear: hi.t_clear, stable: false },
    ];
    let mut curve_src: Vec<(f64, Vec<MachineAssessment>)> = Vec::new();
    let (mut k_lo, mut k_hi) = (0usize, grid.intervals);
    while k_hi - k_lo > 1 {
        let mid = k_lo + (k_hi - k_lo) / 2;
        let e = probe(mid)?;
        evaluations += 1;
        probes.push(ProbeVerdict { t_clear: e.t_clear, stable: e.stable });
        if e.stable {
            k_lo = mid;
            curve_src.push((lo.t_clear, std::mem::take(&mut lo.machines)));
            lo = e;
        } else {
            k_hi = mid;
            curve_src.push((hi.t_clear, std::mem::take(&mut hi.machines)));
            hi = e;
        }
    }

    let mdm = identify_mdm(&lo.machines, &hi.machines);
    let m = mdm.machine;
    let residual_stable = lo.machines[m].impp_event().map(|e| e.residual_ke);
    let residual_unstable = hi.machines[m].impp_event().map(|e| e.residual_ke);

    curve_src.push((lo.t_clear, lo.machines));
    curve_src.push((hi.t_clear, hi.machines));
    let mut margin_curve: Vec<MarginPoint> = curve_src
        .iter()
        .filter_map(|(t, ms)| {
            ms.get(m)
                .and_then(|a| a.margin)
                .map(|eta_mdm| MarginPoint { t_clear: *t, eta_mdm })
        })
        .collect();
    margin_curve.sort_by(|a, b| a.t_clear.total_cmp(&b.t_clear));
    probes.sort_by(|a, b| a.t_clear.total_cmp(&b.t_clear));

    Ok(CctResult {
        cct: lo.t_clear,
        cct_unstable: hi.t_clear,
        resolution: grid.stride as f64 * grid.dt,
        mdm: m,
        mdm_consistent: mdm.consistent,
        critical_energy: lo.total_at_clear[m],
        residual_ke_stable: residual_stable,
        residual_ke_unstable: residual_unstable,
        margin_curve,
        probes,
        evaluations,
    })
}

/// Evaluates every clearing time on the bisection grid concurrently.
pub fn scan_cct(
    case: &StabilityCase,
    opts: &CctOptions,
    t_lo: f64,
    t_hi: f64,
    resolution: f64,
) -> Result<Vec<Evaluation>> {
    let grid = Grid::new(t_lo, t_hi, resolution, opts)?;
    let sep = solve_sep(case);
    grid.times()
        .par_iter()
        .map(|&t| evaluate_clearing(case, &sep, t, opts))
        .collect()
}

/// Outcome of an exhaustive clearing-time scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    /// Largest stable clearing time on the grid, s.
    pub cct: f64,
    /// Next grid point above `cct`, s.
    pub cct_unstable: f64,
    /// Stable clearing times that lie above some unstable one.
    pub stable_above_unstable: Vec<f64>,
    /// Unstable clearing times that lie below some stable one.
    pub unstable_below_stable: Vec<f64>,
}

impl ScanSummary {
    pub fn is_monotone(&self) -> bool {
        self.unstable_below_stable.is_empty()
    }

    /// Fails with [`Error::NonMonotone`] when stable and unstable verdicts interleave.
    pub fn require_monotone(&self) -> Result<()> {
        if self.is_monotone() {
            Ok(())
        } else {
            Err(Error::NonMonotone {
                stable_at: self.stable_above_unstable.clone(),
                unstable_at: self.unstable_below_stable.clone(),
            })
        }
    }
}

/// Largest stable clearing time of a scan, plus any interleaving of verdicts.
///
/// Needs a stable first probe and an unstable last probe.
pub fn summarize_scan(scan: &[Evaluation]) -> Result<ScanSummary> {
    let mut sorted: Vec<(f64, bool)> = scan.iter().map(|e| (e.t_clear, e.stable)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (Some(first), Some(last)) = (sorted.first(), sorted.last()) else {
        return Err(Error::Config("empty clearing-time scan".into()));
    };
    if !first.1 || last.1 {
        let word = |s: bool| if s { "stable" } else { "unstable" };
        return Err(Error::InvalidBracket {
            t_lo: first.0,
            lo_verdict: word(first.1).into(),
            t_hi: last.0,
            hi_verdict: word(last.1).into(),
        });
    }
    let top = sorted.iter().rposition(|p| p.1).expect("first probe is stable");
    let first_unstable = sorted.iter().find(|p| !p.1).expect("last probe is unstable").0;
    Ok(ScanSummary {
        cct: sorted[top].0,
        cct_unstable: sorted[top + 1].0,
        stable_above_unstable: sorted.iter().filter(|p| p.1 && p.0 > first_unstable).map(|p| p.0).collect(),
        unstable_below_stable: sorted.iter().filter(|p| !p.1 && p.0 < sorted[top].0).map(|p| p.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{MachineParams, ReducedNetwork};
    use crate::energy::{Classification, Direction, EventKind, SwingEvent};
    use nalgebra::DMatrix;

    fn smib() -> StabilityCase {
        let net = |p: f64| ReducedNetwork::lossless(DMatrix::from_row_slice(2, 2, &[-p, p, p, -p]));
        StabilityCase::new(
            "smib",
            vec![
                MachineParams::new(0, MachineParams::inertia_from_h(5.0, 60.0), 1.0, 1.0),
                MachineParams::new(1, 1e6, -1.0, 1.0),
            ],
            net(1.8),
            net(0.0),
            net(1.8),
            vec![(1.0f64 / 1.8).asin(), 0.0],
        )
        .unwrap()
    }

    fn assessment(machine: usize, margin: Option<f64>, dlp_at: Option<f64>) -> MachineAssessment {
        let events: Vec<SwingEvent> = dlp_at
            .into_iter()
            .map(|time| SwingEvent {
                machine,
                kind: EventKind::Dlp,
                swing_index: 1,
                time,
                delta_coi: 0.0,
                residual_ke: 0.1,
                pe: 0.0,
                direction: Direction::Forward,
                near_critical: false,
                sample: 0,
            })
            .collect();
        MachineAssessment {
            machine,
            classification: if events.is_empty() {
                Classification::Stable
            } else {
                Classification::UnstableAtSwing(1)
            },
            impp: (!events.is_empty()).then_some(0),
            events,
            margin,
            a_acc: 1.0,
            a_dec: None,
            eac_residual: 0.0,
            critical: false,
        }
    }

    #[test]
    fn mdm_consistent_when_sides_agree() {
        let stable = [assessment(0, Some(0.4), None), assessment(1, Some(0.01), None)];
        let unstable = [assessment(0, Some(0.1), None), assessment(1, Some(-0.2), Some(0.5))];
        assert_eq!(
            identify_mdm(&stable, &unstable),
            MdmIdentification { machine: 1, consistent: true }
        );
    }

    #[test]
    fn mdm_prefers_unstable_side_on_mismatch() {
        let stable = [assessment(0, Some(0.01), None), assessment(1, Some(0.4), None)];
        let unstable = [assessment(0, Some(0.1), None), assessment(1, Some(-0.2), Some(0.5))];
        assert_eq!(
            identify_mdm(&stable, &unstable),
            MdmIdentification { machine: 1, consistent: false }
        );
    }

    #[test]
    fn mdm_of_smib_is_the_machine() {
        let stable = [assessment(0, Some(0.0), None), assessment(1, Some(0.0), None)];
        let unstable = [assessment(0, Some(-0.3), Some(0.4)), assessment(1, None, None)];
        assert_eq!(identify_mdm(&stable, &unstable).machine, 0);
    }

    #[test]
    fn grid_validation() {
        let opts = CctOptions::default();
        assert!(Grid::new(0.1, 0.3, 0.001, &opts).is_ok());
        assert!(Grid::new(0.1, 0.3, 0.0005, &opts).is_err());
        assert!(Grid::new(0.1, 0.3, 0.003, &opts).is_err());
        assert!(Grid::new(0.3, 0.1, 0.001, &opts).is_err());
        assert_eq!(Grid::new(0.1, 0.3, 0.002, &opts).unwrap().intervals, 100);
    }

    #[test]
    fn adjacent_bracket_needs_two_evaluations() {
        let r = find_cct(&smib(), &CctOptions::default(), 0.195, 0.196, 0.001).unwrap();
        assert_eq!(r.evaluations, 2);
        assert!((r.cct - 0.195).abs() < 1e-12);
        assert_eq!(r.mdm, 0);
    }

    #[test]
    fn inverted_bracket_reports_both_verdicts() {
        match find_cct(&smib(), &CctOptions::default(), 0.25, 0.3, 0.001) {
            Err(Error::InvalidBracket { lo_verdict, hi_verdict, .. }) => {
                assert_eq!(lo_verdict, "unstable");
                assert_eq!(hi_verdict, "unstable");
            }
            other => panic!("expected invalid bracket, got {other:?}"),
        }
    }

    #[test]
    fn smib_cct_near_closed_form() {
        let r = find_cct(&smib(), &CctOptions::default(), 0.1, 0.3, 0.001).unwrap();
        assert!((r.cct - 0.195_358_810_389_969).abs() < 2e-3, "cct = {}", r.cct);
        assert!((r.cct_unstable - r.cct - 0.001).abs() < 1e-12);
        assert!(r.evaluations <= 2 + 8);
        assert!(r.residual_ke_unstable.unwrap() > 0.0);
        assert!(r.residual_ke_stable.unwrap() < 1e-4);
    }

    #[test]
    fn non_monotone_scan_is_reported() {
        let stub = |t: f64, stable: bool| Evaluation {
            t_clear: t,
            stable,
            system: SystemAssessment {
                stable,
                eta_sys: vec![],
                leading_losp: None,
                severity: vec![],
                severity_final_time: None,
                timeline: vec![],
                undetermined: vec![],
                critical_machines: vec![],
            },
            machines: vec![],
            total_at_clear: vec![],
        };
        let ok = summarize_scan(&[stub(0.1, true), stub(0.2, true), stub(0.3, false)]).unwrap();
        assert_eq!((ok.cct, ok.cct_unstable), (0.2, 0.3));
        assert!(ok.require_monotone().is_ok());
        let bad = summarize_scan(&[stub(0.1, true), stub(0.2, false), stub(0.3, true), stub(0.4, false)]).unwrap();
        assert_eq!((bad.cct, bad.cct_unstable), (0.3, 0.4));
        match bad.require_monotone() {
            Err(Error::NonMonotone { stable_at, unstable_at }) => {
                assert_eq!(stable_at, vec![0.3]);
                assert_eq!(unstable_at, vec![0.2]);
            }
            other => panic!("expected non-monotone, got {other:?}"),
        }
        assert!(summarize_scan(&[stub(0.1, false), stub(0.2, false)]).is_err());
    }
}
