//! Minimal-heat plan for a fixed total duration.
//!
//! At fixed topology and cycle count the duration is monotone in `K` along
//! each admissible stretch, so every `(topology, N)` pair is bracketed on a
//! logarithmic grid in `s = sqrt(-K/gamma)` and refined with Brent. The
//! grid totals are additive in `N`, which keeps the enumeration cheap.

use rayon::prelude::*;

use super::{arc_specs, Endpoints, PlanError, Planner, Topology, TrajectoryPlan};
use crate::numerics::{brent_root, logspace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadlineOptions {
    pub max_cycles: usize,
    /// Grid points per decade-range in `s`.
    pub grid_points: usize,
    /// Candidate brackets refined exactly.
    pub shortlist: usize,
}

impl Default for DeadlineOptions {
    fn default() -> Self {
        DeadlineOptions { max_cycles: 512, grid_points: 160, shortlist: 8 }
    }
}

#[derive(Debug, Clone, Copy)]
struct GridEval {
    tau_base: f64,
    q_base: f64,
    tau_cycle: f64,
    q_cycle: f64,
    cycles_ok: bool,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    topo: Topology,
    n: usize,
    s_lo: f64,
    s_hi: f64,
    q_est: f64,
}

impl Planner {
    fn k_of_s(&self, s: f64) -> f64 {
        -self.params().gamma * s * s
    }

    fn grid_eval(&self, ends: &Endpoints, topo: Topology, s: f64) -> Option<GridEval> {
        let k = self.k_of_s(s);
        let jp = self.jump_points_opt(k);
        let arcs = arc_specs(topo, 0, ends, jp.as_ref()).ok()?;
        let segs = self.segments_for(&arcs, k).ok()?;
        let tau_base = segs.iter().map(|s| s.segment.duration).sum();
        let q_base = segs.iter().map(|s| s.segment.heat).sum();
        let cycles_ok = arc_specs(topo, 1, ends, jp.as_ref()).is_ok();
        let (tau_cycle, q_cycle) = match (cycles_ok, self.cycle_decomposition(k)) {
            (true, Ok(c)) => (c.tau_cycle, c.q_cycle),
            _ => (0.0, 0.0),
        };
        Some(GridEval { tau_base, q_base, tau_cycle, q_cycle, cycles_ok: cycles_ok && tau_cycle.is_finite() })
    }

    /// Minimal-heat plan whose total duration equals `tau_target`.
    pub fn plan_for_deadline(
        &self,
        ends: &Endpoints,
        tau_target: f64,
        opts: &DeadlineOptions,
    ) -> Result<TrajectoryPlan, PlanError> {
        if !(tau_target.is_finite() && tau_target >= 0.0) {
            return Err(PlanError::InvalidInput(format!("deadline {tau_target} must be finite and non-negative")));
        }
        let s_star = (-self.k_star() / self.params().gamma).sqrt();
        let below = logspace(1e-4 * s_star, s_star, opts.grid_points);
        let above = logspace(s_star * (1.0 + 1e-4), 1e3 * s_star, opts.grid_points);

        let per_topo: Vec<(Topology, Vec<(f64, GridEval)>)> = Topology::ALL
            .par_iter()
            .map(|&topo| {
                let grid: Vec<f64> = if topo.switches == 0 {
                    below.iter().chain(above.iter()).rev().copied().collect()
                } else {
                    below.iter().rev().copied().collect()
                };
                let evals = grid.iter().filter_map(|&s| self.grid_eval(ends, topo, s).map(|e| (s, e))).collect();
                (topo, evals)
            })
            .collect();

        let mut min_tau = f64::INFINITY;
        let mut cands = Vec::new();
        for (topo, evals) in &per_topo {
            for (_, e) in evals {
                min_tau = min_tau.min(e.tau_base);
            }
            for n in 0..=opts.max_cycles {
                let nf = n as f64;
                let usable = |e: &GridEval| n == 0 || e.cycles_ok;
                for w in evals.windows(2) {
                    let ((s0, e0), (s1, e1)) = (w[0], w[1]);
                    if !usable(&e0) || !usable(&e1) {
                        continue;
                    }
                    let f0 = e0.tau_base + nf * e0.tau_cycle - tau_target;
                    let f1 = e1.tau_base + nf * e1.tau_cycle - tau_target;
                    if f0 == 0.0 || f0.signum() != f1.signum() {
                        let t = if f0 == f1 { 0.0 } else { f0 / (f0 - f1) };
                        let q0 = e0.q_base + nf * e0.q_cycle;
                        let q1 = e1.q_base + nf * e1.q_cycle;
                        cands.push(Candidate {
                            topo: *topo,
                            n,
                            s_lo: s0.min(s1),
                            s_hi: s0.max(s1),
                            q_est: q0 + t * (q1 - q0),
                        });
                    }
                }
            }
        }
        if cands.is_empty() {
            return Err(PlanError::InfeasibleDeadline { tau_target, min_tau });
        }
        cands.sort_by(|a, b| a.q_est.total_cmp(&b.q_est).then(b.n.cmp(&a.n)));
        cands.truncate(opts.shortlist.max(1));

        let refined: Vec<TrajectoryPlan> = cands
            .par_iter()
            .filter_map(|c| {
                let f = |s: f64| {
                    self.grid_eval(ends, c.topo, s)
                        .filter(|e| c.n == 0 || e.cycles_ok)
                        .map_or(f64::NAN, |e| e.tau_base + c.n as f64 * e.tau_cycle - tau_target)
                };
                let s = brent_root(f, c.s_lo, c.s_hi, 1e-15 * c.s_hi, 200).ok()?;
                self.assemble(c.topo, self.k_of_s(s), c.n, ends, self.jump_points_opt(self.k_of_s(s))).ok()
            })
            .collect();

        refined
            .into_iter()
            .reduce(|best, p| {
                let tie = (p.total_heat - best.total_heat).abs() <= 1e-12 * best.total_heat.abs().max(1e-300);
                if (tie && p.n_cycles > best.n_cycles) || (!tie && p.total_heat < best.total_heat) {
                    p
                } else {
                    best
                }
            })
            .ok_or(PlanError::InfeasibleDeadline { tau_target, min_tau })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::QubitParams;
    use approx::assert_relative_eq;

    fn planner() -> Planner {
        Planner::new(QubitParams::from_ratio(0.3).unwrap()).unwrap()
    }

    #[test]
    fn hits_the_deadline() {
        let p = planner();
        let ends = Endpoints::new(0.07, 1.0, 0.26, 6.0).unwrap();
        let plan = p.plan_for_deadline(&ends, 40.0, &DeadlineOptions::default()).unwrap();
        assert_relative_eq!(plan.total_time, 40.0, max_relative = 1e-9);
    }

    #[test]
    fn too_short_reports_minimum() {
        let p = planner();
        let ends = Endpoints::new(0.07, 1.0, 0.26, 6.0).unwrap();
        match p.plan_for_deadline(&ends, 1e-6, &DeadlineOptions::default()) {
            Err(PlanError::InfeasibleDeadline { min_tau, .. }) => assert!(min_tau > 1e-6 && min_tau.is_finite()),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }
}
