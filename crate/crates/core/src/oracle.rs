//! Exhaustive search over piecewise-constant qubit protocols.
//!
//! Every interval has the same length and couples the qubit at full rate to
//! one bath with a gap taken from a finite list. Over one interval the
//! population relaxes exactly, `p' = n + (p - n) e^{-gamma dt}`, so the
//! search never integrates an ODE. A sequence of intervals maps `p` affinely
//! and its heat is affine in the starting population, which allows a
//! meet-in-the-middle enumeration: all first halves are propagated from
//! `p_in`, all second halves are reduced to affine maps and sorted by their
//! offset, and each first half only scans the second halves that land within
//! the target tolerance. The result is the exact minimum over the full grid.
//!
//! A minimum found this way is evidence for optimality at the chosen grid
//! size, not a proof.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lindblad::{
    gibbs_excited_population, integrate, Bath, DensityMatrix, IntegrateOptions, Protocol, ProtocolPiece, SimError,
};
use crate::qubit::QubitParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(
        "no protocol ends within {tolerance} of p_out = {p_out}; closest end point {closest_p} (distance {distance})"
    )]
    Infeasible { p_out: f64, tolerance: f64, closest_p: f64, distance: f64, closest: GridProtocol },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Which baths each interval may couple to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BathChoice {
    Both,
    Only(Bath),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolGrid {
    pub n_intervals: usize,
    pub u_levels: Vec<f64>,
    pub baths: BathChoice,
    pub tau: f64,
    /// Restrict to protocols that hold one option for the whole horizon.
    pub constant_control: bool,
}

pub const MAX_INTERVALS: usize = 8;
pub const MAX_LEVELS: usize = 12;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

impl ProtocolGrid {
    pub fn new(n_intervals: usize, u_levels: Vec<f64>, baths: BathChoice, tau: f64) -> Result<Self, OracleError> {
        let g = ProtocolGrid { n_intervals, u_levels, baths, tau, constant_control: false };
        g.validate()?;
        Ok(g)
    }

    pub fn constant(mut self) -> Self {
        self.constant_control = true;
        self
    }

    fn validate(&self) -> Result<(), OracleError> {
        if self.n_intervals == 0 || self.n_intervals > MAX_INTERVALS {
            return Err(OracleError::InvalidGrid(format!("n_intervals must be in 1..={MAX_INTERVALS}")));
        }
        if self.u_levels.is_empty() || self.u_levels.len() > MAX_LEVELS {
            return Err(OracleError::InvalidGrid(format!("between 1 and {MAX_LEVELS} gap levels are required")));
        }
        if self.u_levels.iter().any(|u| !u.is_finite()) {
            return Err(OracleError::InvalidGrid("gap levels must be finite".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(OracleError::InvalidGrid(format!("horizon {} must be positive", self.tau)));
        }
        Ok(())
    }

    fn bath_list(&self) -> Vec<Bath> {
        match self.baths {
            BathChoice::Both => vec![Bath::Cold, Bath::Hot],
            BathChoice::Only(b) => vec![b],
        }
    }

    /// Interval options in lexicographic order: gap level major, bath minor.
    fn options(&self) -> Vec<(f64, Bath)> {
        let baths = self.bath_list();
        self.u_levels.iter().flat_map(|&u| baths.iter().map(move |&b| (u, b))).collect()
    }

    pub fn n_protocols(&self) -> u64 {
        let m = (self.u_levels.len() * self.bath_list().len()) as u64;
        if self.constant_control {
            m
        } else {
            m.pow(self.n_intervals as u32)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub bath: Bath,
    pub u: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProtocol {
    pub intervals: Vec<Interval>,
}

impl GridProtocol {
    pub fn duration(&self) -> f64 {
        self.intervals.iter().map(|i| i.duration).sum()
    }

    pub fn to_protocol(&self, gamma: f64) -> Protocol {
        Protocol::from_pieces(
            self.intervals
                .iter()
                .map(|i| match i.bath {
                    Bath::Cold => ProtocolPiece::constant(i.duration, vec![i.u], gamma, 0.0),
                    Bath::Hot => ProtocolPiece::constant(i.duration, vec![i.u], 0.0, gamma),
                })
                .collect(),
        )
    }
}

/// Exact end population and released heat of a piecewise-constant protocol.
pub fn propagate(params: &QubitParams, p_in: f64, protocol: &GridProtocol) -> (f64, f64) {
    let mut p = p_in;
    let mut q = 0.0;
    for i in &protocol.intervals {
        let n = gibbs_excited_population(params.beta(i.bath), i.u);
        let next = n + (p - n) * (-params.gamma * i.duration).exp();
        q -= i.u * (next - p);
        p = next;
    }
    (p, q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub protocol: GridProtocol,
    pub q: f64,
    pub p_end: f64,
    pub n_protocols_evaluated: u64,
    /// Heat slack admitted by the end-point tolerance, `max|u| * tolerance`.
    pub discretization_bound: f64,
}

#[derive(Debug, Clone, Copy)]
struct Affine {
    // p_end = alpha p + b, heat = c p + d
    b: f64,
    c: f64,
    d: f64,
}

struct Step {
    u: f64,
    n: f64,
}

fn enumerate_forward(steps: &[Step], decay: f64, len: usize, p_in: f64) -> Vec<(f64, f64)> {
    let mut out = vec![(p_in, 0.0)];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * steps.len());
        for &(p, q) in &out {
            for s in steps {
                let p1 = s.n + (p - s.n) * decay;
                next.push((p1, q - s.u * (p1 - p)));
            }
        }
        out = next;
    }
    out
}

fn enumerate_affine(steps: &[Step], decay: f64, len: usize) -> (f64, Vec<Affine>) {
    let mut alpha = 1.0;
    let mut out = vec![Affine { b: 0.0, c: 0.0, d: 0.0 }];
    let w = 1.0 - decay;
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * steps.len());
        for a in &out {
            for s in steps {
                next.push(Affine {
                    b: decay * a.b + s.n * w,
                    c: a.c + s.u * w * alpha,
                    d: a.d + s.u * w * a.b - s.u * s.n * w,
                });
            }
        }
        alpha *= decay;
        out = next;
    }
    (alpha, out)
}

fn decode(index: u64, len: usize, m: usize) -> Vec<usize> {
    let mut digits = vec![0; len];
    let mut rest = index;
    for d in digits.iter_mut().rev() {
        *d = (rest % m as u64) as usize;
        rest /= m as u64;
    }
    digits
}

/// Minimal-heat protocol on the grid that ends within `tolerance` of `p_out`.
pub fn grid_search(
    params: &QubitParams,
    p_in: f64,
    p_out: f64,
    tolerance: f64,
    grid: &ProtocolGrid,
) -> Result<SearchResult, OracleError> {
    grid.validate()?;
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || !(tolerance >= 0.0) {
        return Err(OracleError::InvalidGrid(
            "populations must lie in [0, 1] and the tolerance be non-negative".into(),
        ));
    }
    let options = grid.options();
    let m = options.len();
    let n = grid.n_intervals;
    let dt = grid.tau / n as f64;
    let decay = (-params.gamma * dt).exp();
    let steps: Vec<Step> =
        options.iter().map(|&(u, b)| Step { u, n: gibbs_excited_population(params.beta(b), u) }).collect();
    let build = |digits: &[usize]| GridProtocol {
        intervals: digits.iter().map(|&o| Interval { bath: options[o].1, u: options[o].0, duration: dt }).collect(),
    };
    let u_max = grid.u_levels.iter().fold(0.0f64, |a, u| a.max(u.abs()));
    let discretization_bound = u_max * tolerance;

    if grid.constant_control {
        let mut best: Option<(f64, usize, f64)> = None;
        let mut closest = (f64::INFINITY, 0usize, 0.0);
        for o in 0..m {
            let digits = vec![o; n];
            let (p, q) = propagate(params, p_in, &build(&digits));
            let dist = (p - p_out).abs();
            if dist < closest.0 {
                closest = (dist, o, p);
            }
            if dist <= tolerance && best.is_none_or(|(bq, _, _)| q < bq) {
                best = Some((q, o, p));
            }
        }
        return match best {
            Some((q, o, p)) => Ok(SearchResult {
                protocol: build(&vec![o; n]),
                q,
                p_end: p,
                n_protocols_evaluated: grid.n_protocols(),
                discretization_bound,
            }),
            None => Err(OracleError::Infeasible {
                p_out,
                tolerance,
                closest_p: closest.2,
                distance: closest.0,
                closest: build(&vec![closest.1; n]),
            }),
        };
    }

    let h1 = n / 2;
    let h2 = n - h1;
    let first = enumerate_forward(&steps, decay, h1, p_in);
    let (alpha, second) = enumerate_affine(&steps, decay, h2);
    let mut order: Vec<u32> = (0..second.len() as u32).collect();
    order.sort_by(|&a, &b| second[a as usize].b.total_cmp(&second[b as usize].b).then(a.cmp(&b)));
    let sorted_b: Vec<f64> = order.iter().map(|&i| second[i as usize].b).collect();

    // (q, first index, second index) minimised lexicographically
    let best = first
        .par_iter()
        .enumerate()
        .filter_map(|(i1, &(pm, q1))| {
            let lo = p_out - tolerance - alpha * pm;
            let hi = p_out + tolerance - alpha * pm;
            let start = sorted_b.partition_point(|&b| b < lo);
            let end = sorted_b.partition_point(|&b| b <= hi);
            let mut local: Option<(f64, usize, u32)> = None;
            for &i2 in &order[start..end] {
                let a = &second[i2 as usize];
                if (alpha * pm + a.b - p_out).abs() > tolerance {
                    continue;
                }
                let q = q1 + a.c * pm + a.d;
                let better = match local {
                    None => true,
                    Some((bq, _, bi2)) => q < bq || (q == bq && i2 < bi2),
                };
                if better {
                    local = Some((q, i1, i2));
                }
            }
            local
        })
        .reduce_with(|a, b| if (a.0, a.1, a.2) <= (b.0, b.1, b.2) || b.0.is_nan() { a } else { b });

    let m_pow_h2 = (m as u64).pow(h2 as u32);
    match best {
        Some((_, i1, i2)) => {
            let index = i1 as u64 * m_pow_h2 + i2 as u64;
            let protocol = build(&decode(index, n, m));
            let (p_end, q) = propagate(params, p_in, &protocol);
            Ok(SearchResult { protocol, q, p_end, n_protocols_evaluated: grid.n_protocols(), discretization_bound })
        }
        None => {
            let (dist, i1, i2) = first
                .par_iter()
                .enumerate()
                .map(|(i1, &(pm, _))| {
                    let target = p_out - alpha * pm;
                    let k = sorted_b.partition_point(|&b| b < target);
                    let mut best = (f64::INFINITY, i1, 0u32);
                    for j in [k.saturating_sub(1), k.min(sorted_b.len() - 1)] {
                        let d = (sorted_b[j] - target).abs();
                        if d < best.0 {
                            best = (d, i1, order[j]);
                        }
                    }
                    best
                })
                .reduce_with(|a, b| if (a.0, a.1, a.2) <= (b.0, b.1, b.2) { a } else { b })
                .expect("at least one protocol");
            let closest = build(&decode(i1 as u64 * m_pow_h2 + i2 as u64, n, m));
            let (p_end, _) = propagate(params, p_in, &closest);
            Err(OracleError::Infeasible { p_out, tolerance, closest_p: p_end, distance: dist, closest })
        }
    }
}

/// Re-runs a protocol through the adaptive integrator; returns `(p_end, Q)`.
pub fn simulate(params: &QubitParams, p_in: f64, protocol: &GridProtocol) -> Result<(f64, f64), OracleError> {
    let model = params.model();
    let rho0 = DensityMatrix::two_level(p_in)?;
    let sim = integrate(
        &model,
        &rho0,
        &protocol.to_protocol(params.gamma),
        &IntegrateOptions { record: false, ..Default::default() },
    )?;
    Ok((sim.final_state.excited_population(), sim.ledger.heat_released))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineSchedule {
    pub u_step: f64,
    pub dt_step: f64,
    pub max_iterations: usize,
    /// Steps are multiplied by this factor when a sweep finds no improvement.
    pub shrink: f64,
    pub min_step: f64,
}

impl Default for RefineSchedule {
    fn default() -> Self {
        RefineSchedule { u_step: 0.25, dt_step: 0.05, max_iterations: 200, shrink: 0.5, min_step: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub protocol: GridProtocol,
    pub q: f64,
    pub p_end: f64,
    /// Heat after the end-point projection, then after every improving sweep.
    pub history: Vec<f64>,
}

/// Chooses the last gap so that the protocol ends exactly at `target`.
fn project_last(params: &QubitParams, p_in: f64, proto: &mut GridProtocol, target: f64) -> bool {
    let (last, head) = proto.intervals.split_last_mut().expect("non-empty protocol");
    let mut p = p_in;
    for i in head.iter() {
        let n = gibbs_excited_population(params.beta(i.bath), i.u);
        p = n + (p - n) * (-params.gamma * i.duration).exp();
    }
    let decay = (-params.gamma * last.duration).exp();
    if decay >= 1.0 {
        return (p - target).abs() <= 1e-15;
    }
    let n = (target - p * decay) / (1.0 - decay);
    if !(n > 0.0 && n < 1.0) {
        return false;
    }
    let u = (1.0 / n - 1.0).ln() / params.beta(last.bath);
    if !u.is_finite() {
        return false;
    }
    last.u = u;
    true
}

/// Coordinate descent on gaps and interval lengths at fixed bath sequence
/// and total duration. The end point is pinned to `p_out` by re-solving the
/// last gap after every move.
pub fn local_refine(
    params: &QubitParams,
    p_in: f64,
    p_out: f64,
    seed: &GridProtocol,
    schedule: &RefineSchedule,
) -> Result<RefineResult, OracleError> {
    if seed.intervals.is_empty() {
        return Err(OracleError::InvalidGrid("empty seed protocol".into()));
    }
    let mut cur = seed.clone();
    if !project_last(params, p_in, &mut cur, p_out) {
        // keep the seed end point if the exact target is out of reach
        let (p_end, q) = propagate(params, p_in, &cur);
        return Ok(RefineResult { protocol: cur, q, p_end, history: vec![q] });
    }
    let mut q_cur = propagate(params, p_in, &cur).1;
    let mut history = vec![q_cur];
    let (mut du, mut ddt) = (schedule.u_step, schedule.dt_step);
    let n = cur.intervals.len();

    let try_move = |cand: &mut GridProtocol| -> Option<f64> {
        if !project_last(params, p_in, cand, p_out) {
            return None;
        }
        let q = propagate(params, p_in, cand).1;
        q.is_finite().then_some(q)
    };

    for _ in 0..schedule.max_iterations {
        let start = q_cur;
        loop {
            let mut improved = false;
            for i in 0..n.saturating_sub(1) {
                for sign in [1.0, -1.0] {
                    let mut cand = cur.clone();
                    cand.intervals[i].u += sign * du;
                    if let Some(q) = try_move(&mut cand) {
                        if q < q_cur {
                            cur = cand;
                            q_cur = q;
                            improved = true;
                        }
                    }
                }
            }
            for i in 0..n.saturating_sub(1) {
                for (from, to) in [(i, i + 1), (i + 1, i)] {
                    let shift = ddt.min(cur.intervals[from].duration);
                    if shift <= 0.0 {
                        continue;
                    }
                    let mut cand = cur.clone();
                    cand.intervals[from].duration -= shift;
                    cand.intervals[to].duration += shift;
                    if let Some(q) = try_move(&mut cand) {
                        if q < q_cur {
                            cur = cand;
                            q_cur = q;
                            improved = true;
                        }
                    }
                }
            }
            if improved || (du < schedule.min_step && ddt < schedule.min_step) {
                break;
            }
            du *= schedule.shrink;
            ddt *= schedule.shrink;
            if du == 0.0 && ddt == 0.0 {
                break;
            }
        }
        if q_cur < start {
            history.push(q_cur);
        } else {
            break;
        }
    }
    let (p_end, q) = propagate(params, p_in, &cur);
    Ok(RefineResult { protocol: cur, q, p_end, history })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub q_pmp: f64,
    pub q_brute: f64,
    pub gap: f64,
    pub n_protocols_evaluated: u64,
    pub wall_time: f64,
    pub discretization_bound: f64,
    /// Heat of the best grid protocol re-run through the integrator.
    pub q_brute_simulated: f64,
}

impl ComparisonReport {
    /// No grid protocol beats the plan by more than the admitted slack.
    pub fn never_beaten(&self, integration_tol: f64) -> bool {
        self.q_brute >= self.q_pmp - 10.0 * (integration_tol + self.discretization_bound)
    }
}

/// Runs [`grid_search`] against a reference minimal heat `q_pmp`.
pub fn compare(
    params: &QubitParams,
    p_in: f64,
    p_out: f64,
    tolerance: f64,
    grid: &ProtocolGrid,
    q_pmp: f64,
) -> Result<(ComparisonReport, SearchResult), OracleError> {
    let started = Instant::now();
    let res = grid_search(params, p_in, p_out, tolerance, grid)?;
    let (_, q_sim) = simulate(params, p_in, &res.protocol)?;
    let report = ComparisonReport {
        q_pmp,
        q_brute: res.q,
        gap: res.q - q_pmp,
        n_protocols_evaluated: res.n_protocols_evaluated,
        wall_time: started.elapsed().as_secs_f64(),
        discretization_bound: res.discretization_bound,
        q_brute_simulated: q_sim,
    };
    Ok((report, res))
}
