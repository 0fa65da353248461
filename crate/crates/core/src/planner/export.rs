use std::fmt::Write as _;

use serde_json::{json, Value};

use super::{AdiabaticJump, JumpKind, PlanStep, TrajectoryPlan};
use crate::format::fmt15;
use crate::lindblad::{diag, Bath, ControlVector, DensityMatrix, Protocol, ProtocolPiece};
use crate::pmp::{Costate, TrajectoryNode};
use crate::qubit::IsothermSegment;

pub const CSV_UNITS: &str = "# t in the time unit of 1/gamma; u, q and Qcum in the energy unit of 1/beta_c";
pub const CSV_HEADER: &str = "t,u,p,q,branch,Qcum";

fn bath_label(b: Option<Bath>) -> Value {
    b.map_or(Value::Null, |b| json!(b.label()))
}

fn jump_json(j: &AdiabaticJump, t: f64) -> Value {
    json!({
        "type": "jump",
        "kind": match j.kind { JumpKind::Boundary => "boundary", JumpKind::Switching => "switching" },
        "t": t,
        "p": j.p,
        "u_from": j.u_from,
        "u_to": j.u_to,
        "from_branch": bath_label(j.from_branch),
        "to_branch": bath_label(j.to_branch),
        "q_from": j.q_from,
        "q_to": j.q_to,
    })
}

fn segment_json(s: &IsothermSegment, in_cycle: bool, t: f64) -> Value {
    json!({
        "type": "isotherm",
        "branch": s.branch.kind.label(),
        "in_cycle": in_cycle,
        "t_start": t,
        "x0": s.x0,
        "x1": s.x1,
        "u0": s.u0(),
        "u1": s.u1(),
        "p0": s.p0(),
        "p1": s.p1(),
        "duration": s.duration,
        "heat": s.heat,
    })
}

/// Appends `n` time-uniform rows of one isotherm, offset by `t0` and `q0`.
pub fn write_segment_rows(out: &mut String, seg: &IsothermSegment, t0: f64, q0: f64, n: usize) {
    let label = seg.branch.kind.label();
    for pt in seg.sample_uniform_time(n) {
        // heat released so far on this arc: -beta^-1 (Xi(x) - Xi(x0)) evaluated in closed form
        let qcum = q0 + heat_to(seg, pt.x);
        let _ = writeln!(
            out,
            "{},{},{},{},{label},{}",
            fmt15(t0 + pt.t),
            fmt15(pt.u),
            fmt15(pt.p),
            fmt15(pt.q),
            fmt15(qcum)
        );
    }
}

fn heat_to(seg: &IsothermSegment, x: f64) -> f64 {
    if x == seg.x0 {
        return 0.0;
    }
    crate::qubit::isotherm_heat(seg.x0, x, seg.mu, seg.beta).unwrap_or(f64::NAN)
}

/// CSV of a single isotherm.
pub fn segment_csv(seg: &IsothermSegment, points: usize) -> String {
    let mut out = format!("{CSV_UNITS}\n{CSV_HEADER}\n");
    write_segment_rows(&mut out, seg, 0.0, 0.0, points);
    out
}

impl TrajectoryPlan {
    pub fn to_json(&self) -> Value {
        let mut t = 0.0;
        let mut steps = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            match step {
                PlanStep::Isotherm(s) => {
                    steps.push(segment_json(&s.segment, s.in_cycle, t));
                    t += s.segment.duration;
                }
                PlanStep::Jump(j) => steps.push(jump_json(j, t)),
            }
        }
        let d = &self.decomposition;
        json!({
            "K": self.k,
            "n_cycles": self.n_cycles,
            "topology": self.topology.map(|tp| json!({"start": tp.start.label(), "switches": tp.switches})),
            "endpoints": {
                "p_in": self.endpoints.p_in,
                "u_in": self.endpoints.u_in,
                "p_out": self.endpoints.p_out,
                "u_out": self.endpoints.u_out,
            },
            "jump_points": self.jump_points.map(|jp| json!({"p_ad1": jp.p_ad1, "p_ad2": jp.p_ad2})),
            "total_time": self.total_time,
            "total_heat": self.total_heat,
            "total_work": self.total_work,
            "decomposition": {
                "tau_c": d.tau_c,
                "tau_h": d.tau_h,
                "Q_c": d.q_c,
                "Q_h": d.q_h,
                "tau_cycle": d.tau_cycle,
                "Q_cycle": d.q_cycle,
            },
            "segments": steps,
        })
    }

    /// Time series with `points` rows per isotherm; quenches appear as rows
    /// tagged `quench` at the boundary populations.
    pub fn to_csv(&self, points: usize) -> String {
        let mut out = format!("{CSV_UNITS}\n{CSV_HEADER}\n");
        let mut t = 0.0;
        let mut qcum = 0.0;
        for step in &self.steps {
            match step {
                PlanStep::Isotherm(s) => {
                    write_segment_rows(&mut out, &s.segment, t, qcum, points);
                    t += s.segment.duration;
                    qcum += s.segment.heat;
                }
                PlanStep::Jump(j) if j.kind == JumpKind::Boundary => {
                    let (u, q) = if j.from_branch.is_none() { (j.u_from, j.q_to) } else { (j.u_to, j.q_from) };
                    let _ = writeln!(
                        out,
                        "{},{},{},{},quench,{}",
                        fmt15(t),
                        fmt15(u),
                        fmt15(j.p),
                        fmt15(q.unwrap_or(f64::NAN)),
                        fmt15(qcum)
                    );
                }
                PlanStep::Jump(_) => {}
            }
        }
        out
    }

    /// Piecewise protocol for the simulator; boundary quenches become
    /// zero-length constant pieces.
    pub fn to_protocol(&self) -> Protocol {
        let gamma = self.segments().next().map_or(1.0, |s| s.segment.gamma);
        let mut pieces = Vec::new();
        for step in &self.steps {
            match step {
                PlanStep::Isotherm(s) => pieces.push(s.segment.protocol_piece()),
                PlanStep::Jump(j) if j.kind == JumpKind::Boundary => {
                    let u = if j.from_branch.is_none() { j.u_from } else { j.u_to };
                    pieces.push(ProtocolPiece::constant(0.0, vec![u], gamma, 0.0));
                }
                PlanStep::Jump(_) => {}
            }
        }
        Protocol::from_pieces(pieces)
    }

    pub fn initial_state(&self) -> DensityMatrix {
        DensityMatrix::two_level(self.endpoints.p_in).expect("endpoint populations are validated")
    }

    /// State, costate and control at `per_segment` points along every isotherm.
    pub fn pmp_nodes(&self, per_segment: usize) -> Vec<TrajectoryNode> {
        let mut nodes = Vec::new();
        for s in self.segments() {
            let seg = &s.segment;
            for pt in seg.sample_uniform_time(per_segment) {
                let qd = seg.dq_dt(pt.x);
                nodes.push(TrajectoryNode {
                    rho: DensityMatrix::two_level(pt.p.clamp(1e-300, 1.0 - 1e-16))
                        .expect("isotherm populations lie in [0, 1]")
                        .into_matrix(),
                    pi: Costate::two_level(pt.q),
                    control: ControlVector::on_bath(vec![pt.u], seg.branch.kind, seg.gamma),
                    pi_dot: Some(diag(&[qd, -qd])),
                });
            }
        }
        nodes
    }
}
