//! Optimal finite-time protocols between arbitrary endpoints.
//!
//! A plan is a chain of cold and hot isotherms at one conserved rate `K`.
//! Switching between baths happens only at the jump points `p_ad1 <= p_ad2`:
//! cold arcs hand over to the hot bath at `p_ad1`, hot arcs to the cold bath
//! at `p_ad2`. Boundary quenches at fixed population connect the given
//! endpoint gaps to the isotherms. Inner cycles (hot `p_ad1 -> p_ad2`, cold
//! back) can be inserted at the first switching point.

mod deadline;
mod export;

pub use deadline::DeadlineOptions;
pub use export::{segment_csv, write_segment_rows, CSV_HEADER, CSV_UNITS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lindblad::Bath;
use crate::qubit::{
    find_jump_points, solve_engine, Branch, EngineSolution, IsothermSegment, JumpPoints, QubitError, QubitParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Qubit(#[from] QubitError),
    #[error("no inner cycle exists at K = {k} below K* = {k_star}")]
    NoCycleExists { k: f64, k_star: f64 },
    #[error("endpoints unreachable at K = {k}: {reason}")]
    Unreachable { k: f64, reason: String },
    #[error("deadline {tau_target} is infeasible; the shortest admissible plan takes about {min_tau}")]
    InfeasibleDeadline { tau_target: f64, min_tau: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Boundary conditions: population and gap at the start and at the end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub p_in: f64,
    pub u_in: f64,
    pub p_out: f64,
    pub u_out: f64,
}

impl Endpoints {
    pub fn new(p_in: f64, u_in: f64, p_out: f64, u_out: f64) -> Result<Self, PlanError> {
        for p in [p_in, p_out] {
            if !(p > 0.0 && p < 1.0) {
                return Err(PlanError::InvalidInput(format!("population {p} must lie in (0, 1)")));
            }
        }
        for u in [u_in, u_out] {
            if !(u.is_finite() && u >= 0.0) {
                return Err(PlanError::InvalidInput(format!("gap {u} must be finite and non-negative")));
            }
        }
        Ok(Endpoints { p_in, u_in, p_out, u_out })
    }
}

/// Starting branch and number of switching jumps of the base path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    pub start: Bath,
    pub switches: usize,
}

impl Topology {
    pub const ALL: [Topology; 6] = [
        Topology { start: Bath::Cold, switches: 0 },
        Topology { start: Bath::Hot, switches: 0 },
        Topology { start: Bath::Cold, switches: 1 },
        Topology { start: Bath::Hot, switches: 1 },
        Topology { start: Bath::Cold, switches: 2 },
        Topology { start: Bath::Hot, switches: 2 },
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpKind {
    /// Quench at an endpoint onto or off the isotherm chain.
    Boundary,
    /// Bath switch at a jump point with continuous state and costate.
    Switching,
}

/// Instantaneous change of the gap at fixed population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticJump {
    pub kind: JumpKind,
    pub p: f64,
    pub u_from: f64,
    pub u_to: f64,
    pub from_branch: Option<Bath>,
    pub to_branch: Option<Bath>,
    pub q_from: Option<f64>,
    pub q_to: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanSegment {
    pub segment: IsothermSegment,
    /// Part of an inserted inner cycle.
    pub in_cycle: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlanStep {
    Isotherm(PlanSegment),
    Jump(AdiabaticJump),
}

/// Split of the totals into base arcs and `n_cycles` identical inner cycles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Decomposition {
    pub tau_c: f64,
    pub tau_h: f64,
    pub q_c: f64,
    pub q_h: f64,
    pub tau_cycle: f64,
    pub q_cycle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPlan {
    pub k: f64,
    pub n_cycles: usize,
    pub topology: Option<Topology>,
    pub endpoints: Endpoints,
    pub jump_points: Option<JumpPoints>,
    pub steps: Vec<PlanStep>,
    pub total_time: f64,
    pub total_heat: f64,
    pub total_work: f64,
    pub decomposition: Decomposition,
}

impl TrajectoryPlan {
    pub fn segments(&self) -> impl Iterator<Item = &PlanSegment> {
        self.steps.iter().filter_map(|s| match s {
            PlanStep::Isotherm(seg) => Some(seg),
            PlanStep::Jump(_) => None,
        })
    }

    pub fn jumps(&self) -> impl Iterator<Item = &AdiabaticJump> {
        self.steps.iter().filter_map(|s| match s {
            PlanStep::Jump(j) => Some(j),
            PlanStep::Isotherm(_) => None,
        })
    }

    pub fn switching_jumps(&self) -> impl Iterator<Item = &AdiabaticJump> {
        self.jumps().filter(|j| j.kind == JumpKind::Switching)
    }

    /// Total gap change spent on the two boundary quenches.
    pub fn boundary_quench(&self) -> f64 {
        self.jumps().filter(|j| j.kind == JumpKind::Boundary).map(|j| (j.u_to - j.u_from).abs()).sum()
    }

    /// `(|tau - (tau_c + tau_h + N tau_cycle)|, |Q - (Q_c + Q_h + N Q_cycle)|)`.
    pub fn decomposition_residual(&self) -> (f64, f64) {
        let d = &self.decomposition;
        let n = self.n_cycles as f64;
        (
            (self.total_time - (d.tau_c + d.tau_h + n * d.tau_cycle)).abs(),
            (self.total_heat - (d.q_c + d.q_h + n * d.q_cycle)).abs(),
        )
    }

    /// Rate of the inserted inner cycle, `Q_cycle / tau_cycle`.
    pub fn cycle_rate(&self) -> Option<f64> {
        let d = &self.decomposition;
        (self.n_cycles > 0 && d.tau_cycle > 0.0).then(|| d.q_cycle / d.tau_cycle)
    }
}

/// The inner cycle at rate `k`: hot `p_ad1 -> p_ad2`, then cold back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleDecomposition {
    pub k: f64,
    pub jump_points: JumpPoints,
    pub hot: IsothermSegment,
    pub cold: IsothermSegment,
    pub tau_h_seg: f64,
    pub tau_c_seg: f64,
    pub tau_cycle: f64,
    /// Net heat released per cycle; negative for a working engine.
    pub q_cycle: f64,
    /// `Q_cycle / tau_cycle`; equals `K*` in the degenerate limit.
    pub rate: f64,
}

/// Sensitivities of one segment with fixed endpoint populations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityRow {
    pub k: f64,
    pub duration: f64,
    pub heat: f64,
    pub dtau_dk_analytic: f64,
    pub dtau_dk_numeric: f64,
    pub dq_dk_analytic: f64,
    pub dq_dk_numeric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub kind: Bath,
    pub p0: f64,
    pub p1: f64,
}

#[derive(Debug, Clone, Copy)]
struct ArcSpec {
    kind: Bath,
    p0: f64,
    p1: f64,
    in_cycle: bool,
}

const QUENCH_TOL: f64 = 1e-12;
const DIRECTION_SLACK: f64 = 1e-15;

fn direction_ok(kind: Bath, p0: f64, p1: f64) -> bool {
    match kind {
        Bath::Cold => p1 <= p0 + DIRECTION_SLACK,
        Bath::Hot => p1 >= p0 - DIRECTION_SLACK,
    }
}

fn level(jp: &JumpPoints, kind: Bath) -> f64 {
    match kind {
        Bath::Cold => jp.p_ad1,
        Bath::Hot => jp.p_ad2,
    }
}

/// Population sequence of the arcs for a topology with `n` inserted cycles.
fn arc_specs(topo: Topology, n: usize, ends: &Endpoints, jp: Option<&JumpPoints>) -> Result<Vec<ArcSpec>, String> {
    let b0 = topo.start;
    let arc = |kind, p0, p1, in_cycle| ArcSpec { kind, p0, p1, in_cycle };
    if topo.switches == 0 && n == 0 {
        if !direction_ok(b0, ends.p_in, ends.p_out) {
            return Err(format!("a single {b0} arc cannot move from p = {} to p = {}", ends.p_in, ends.p_out));
        }
        return Ok(vec![arc(b0, ends.p_in, ends.p_out, false)]);
    }
    let jp = jp.ok_or_else(|| "jump points do not exist at this rate".to_string())?;
    let push_cycles = |arcs: &mut Vec<ArcSpec>| {
        let other = b0.other();
        for _ in 0..n {
            arcs.push(arc(other, level(jp, b0), level(jp, other), true));
            arcs.push(arc(b0, level(jp, other), level(jp, b0), true));
        }
    };
    let l0 = level(jp, b0);
    if !direction_ok(b0, ends.p_in, l0) {
        return Err(format!("a {b0} arc from p = {} cannot reach the jump point {l0}", ends.p_in));
    }
    let mut arcs = vec![arc(b0, ends.p_in, l0, false)];
    push_cycles(&mut arcs);
    if topo.switches == 0 {
        if !direction_ok(b0, l0, ends.p_out) {
            return Err(format!("a {b0} arc through {l0} cannot end at p = {}", ends.p_out));
        }
        arcs.push(arc(b0, l0, ends.p_out, false));
        return Ok(arcs);
    }
    let mut prev = b0;
    let mut cur = b0.other();
    for _ in 1..topo.switches {
        arcs.push(arc(cur, level(jp, prev), level(jp, cur), false));
        prev = cur;
        cur = cur.other();
    }
    let from = level(jp, prev);
    if !direction_ok(cur, from, ends.p_out) {
        return Err(format!("a {cur} arc from the jump point {from} cannot end at p = {}", ends.p_out));
    }
    arcs.push(arc(cur, from, ends.p_out, false));
    Ok(arcs)
}

/// Plans at a fixed pair of bath temperatures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Planner {
    params: QubitParams,
    engine: EngineSolution,
}

impl Planner {
    pub fn new(params: QubitParams) -> Result<Self, PlanError> {
        let engine = solve_engine(&params)?;
        Ok(Planner { params, engine })
    }

    pub fn params(&self) -> &QubitParams {
        &self.params
    }

    pub fn engine(&self) -> &EngineSolution {
        &self.engine
    }

    pub fn k_star(&self) -> f64 {
        self.engine.k_star
    }

    pub fn jump_points(&self, k: f64) -> Result<JumpPoints, PlanError> {
        Ok(find_jump_points(&self.params, &self.engine, k)?)
    }

    fn jump_points_opt(&self, k: f64) -> Option<JumpPoints> {
        find_jump_points(&self.params, &self.engine, k).ok()
    }

    pub fn cycle_decomposition(&self, k: f64) -> Result<CycleDecomposition, PlanError> {
        if k > 0.0 {
            return Err(QubitError::PositiveRate(k).into());
        }
        let jp = match find_jump_points(&self.params, &self.engine, k) {
            Ok(jp) => jp,
            Err(QubitError::NoJumpPoints { k, k_star }) => return Err(PlanError::NoCycleExists { k, k_star }),
            Err(e) => return Err(e.into()),
        };
        let hot = IsothermSegment::from_populations(&self.params, Branch::HOT, k, jp.p_ad1, jp.p_ad2)?;
        let cold = IsothermSegment::from_populations(&self.params, Branch::COLD, k, jp.p_ad2, jp.p_ad1)?;
        let tau_cycle = hot.duration + cold.duration;
        let q_cycle = hot.heat + cold.heat;
        let rate = if tau_cycle > 0.0 { q_cycle / tau_cycle } else { self.engine.k_star };
        Ok(CycleDecomposition {
            k,
            jump_points: jp,
            hot,
            cold,
            tau_h_seg: hot.duration,
            tau_c_seg: cold.duration,
            tau_cycle,
            q_cycle,
            rate,
        })
    }

    fn segments_for(&self, arcs: &[ArcSpec], k: f64) -> Result<Vec<PlanSegment>, String> {
        arcs.iter()
            .map(|a| {
                IsothermSegment::from_populations(&self.params, Branch::of(a.kind), k, a.p0, a.p1)
                    .map(|segment| PlanSegment { segment, in_cycle: a.in_cycle })
                    .map_err(|e| format!("{} arc {} -> {}: {e}", a.kind, a.p0, a.p1))
            })
            .collect()
    }

    fn assemble(
        &self,
        topo: Topology,
        k: f64,
        n: usize,
        ends: &Endpoints,
        jp: Option<JumpPoints>,
    ) -> Result<TrajectoryPlan, String> {
        let arcs = arc_specs(topo, n, ends, jp.as_ref())?;
        let segs = self.segments_for(&arcs, k)?;
        let mut steps = Vec::with_capacity(2 * segs.len() + 2);
        let first = &segs[0].segment;
        if (ends.u_in - first.u0()).abs() > QUENCH_TOL {
            steps.push(PlanStep::Jump(AdiabaticJump {
                kind: JumpKind::Boundary,
                p: ends.p_in,
                u_from: ends.u_in,
                u_to: first.u0(),
                from_branch: None,
                to_branch: Some(first.branch.kind),
                q_from: None,
                q_to: Some(first.q_at(first.x0)),
            }));
        }
        for (i, s) in segs.iter().enumerate() {
            if i > 0 {
                let prev = &segs[i - 1].segment;
                let cur = &s.segment;
                if prev.branch.kind != cur.branch.kind {
                    steps.push(PlanStep::Jump(AdiabaticJump {
                        kind: JumpKind::Switching,
                        p: arcs[i].p0,
                        u_from: prev.u1(),
                        u_to: cur.u0(),
                        from_branch: Some(prev.branch.kind),
                        to_branch: Some(cur.branch.kind),
                        q_from: Some(prev.q_at(prev.x1)),
                        q_to: Some(cur.q_at(cur.x0)),
                    }));
                }
            }
            steps.push(PlanStep::Isotherm(*s));
        }
        let last = &segs[segs.len() - 1].segment;
        if (ends.u_out - last.u1()).abs() > QUENCH_TOL {
            steps.push(PlanStep::Jump(AdiabaticJump {
                kind: JumpKind::Boundary,
                p: ends.p_out,
                u_from: last.u1(),
                u_to: ends.u_out,
                from_branch: Some(last.branch.kind),
                to_branch: None,
                q_from: Some(last.q_at(last.x1)),
                q_to: None,
            }));
        }

        let mut d = Decomposition::default();
        for s in segs.iter().filter(|s| !s.in_cycle) {
            match s.segment.branch.kind {
                Bath::Cold => {
                    d.tau_c += s.segment.duration;
                    d.q_c += s.segment.heat;
                }
                Bath::Hot => {
                    d.tau_h += s.segment.duration;
                    d.q_h += s.segment.heat;
                }
            }
        }
        if let Ok(c) = self.cycle_decomposition(k) {
            d.tau_cycle = c.tau_cycle;
            d.q_cycle = c.q_cycle;
        }
        let total_time: f64 = segs.iter().map(|s| s.segment.duration).sum();
        let total_heat: f64 = segs.iter().map(|s| s.segment.heat).sum();
        Ok(TrajectoryPlan {
            k,
            n_cycles: n,
            topology: Some(topo),
            endpoints: *ends,
            jump_points: jp,
            steps,
            total_time,
            total_heat,
            total_work: ends.p_in * ends.u_in - ends.p_out * ends.u_out - total_heat,
            decomposition: d,
        })
    }

    fn pure_quench(&self, k: f64, ends: &Endpoints) -> TrajectoryPlan {
        let mut steps = Vec::new();
        if (ends.u_in - ends.u_out).abs() > QUENCH_TOL {
            steps.push(PlanStep::Jump(AdiabaticJump {
                kind: JumpKind::Boundary,
                p: ends.p_in,
                u_from: ends.u_in,
                u_to: ends.u_out,
                from_branch: None,
                to_branch: None,
                q_from: None,
                q_to: None,
            }));
        }
        TrajectoryPlan {
            k,
            n_cycles: 0,
            topology: None,
            endpoints: *ends,
            jump_points: self.jump_points_opt(k),
            steps,
            total_time: 0.0,
            total_heat: 0.0,
            total_work: ends.p_in * (ends.u_in - ends.u_out),
            decomposition: Decomposition::default(),
        }
    }

    /// Plan with a prescribed topology.
    pub fn build_with_topology(
        &self,
        ends: &Endpoints,
        k: f64,
        n_cycles: usize,
        topo: Topology,
    ) -> Result<TrajectoryPlan, PlanError> {
        if k > 0.0 {
            return Err(QubitError::PositiveRate(k).into());
        }
        self.assemble(topo, k, n_cycles, ends, self.jump_points_opt(k))
            .map_err(|reason| PlanError::Unreachable { k, reason })
    }

    /// Admissible plan with the smallest boundary quench, then the shortest duration.
    ///
    /// Equal start and end populations with no cycles give a bare quench
    /// (or an empty plan when the gaps match too).
    pub fn build_trajectory(&self, ends: &Endpoints, k: f64, n_cycles: usize) -> Result<TrajectoryPlan, PlanError> {
        if k > 0.0 {
            return Err(QubitError::PositiveRate(k).into());
        }
        if n_cycles > 0 && k < self.engine.k_star && self.jump_points_opt(k).is_none() {
            return Err(PlanError::NoCycleExists { k, k_star: self.engine.k_star });
        }
        if ends.p_in == ends.p_out && n_cycles == 0 {
            return Ok(self.pure_quench(k, ends));
        }
        let jp = self.jump_points_opt(k);
        let mut best: Option<TrajectoryPlan> = None;
        let mut reasons = Vec::new();
        for topo in Topology::ALL {
            match self.assemble(topo, k, n_cycles, ends, jp) {
                Ok(plan) => {
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            let (qa, qb) = (plan.boundary_quench(), b.boundary_quench());
                            qa < qb - 1e-12 || ((qa - qb).abs() <= 1e-12 && plan.total_time < b.total_time)
                        }
                    };
                    if better {
                        best = Some(plan);
                    }
                }
                Err(r) => reasons.push(format!("{} start, {} switches: {r}", topo.start, topo.switches)),
            }
        }
        best.ok_or_else(|| PlanError::Unreachable { k, reason: reasons.join("; ") })
    }

    /// Analytic and finite-difference `K`-derivatives of a segment's duration and heat.
    pub fn monotonicity_profile(&self, spec: &SegmentSpec, k_grid: &[f64]) -> Result<Vec<MonotonicityRow>, PlanError> {
        let branch = Branch::of(spec.kind);
        let seg = |k: f64| IsothermSegment::from_populations(&self.params, branch, k, spec.p0, spec.p1);
        k_grid
            .iter()
            .map(|&k| {
                let s = seg(k)?;
                let dtau = (s.x1.atan() - s.x0.atan()) / (s.gamma * k * s.mu);
                let h = 1e-5 * k.abs();
                let (sp, sm) = (seg(k + h)?, seg(k - h)?);
                Ok(MonotonicityRow {
                    k,
                    duration: s.duration,
                    heat: s.heat,
                    dtau_dk_analytic: dtau,
                    dtau_dk_numeric: (sp.duration - sm.duration) / (2.0 * h),
                    dq_dk_analytic: k * dtau,
                    dq_dk_numeric: (sp.heat - sm.heat) / (2.0 * h),
                })
            })
            .collect()
    }
}
