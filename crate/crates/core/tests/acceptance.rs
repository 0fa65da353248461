//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};

use pmp_thermo::lindblad::{integrate, Bath, DensityMatrix, IntegrateOptions, Protocol};
use pmp_thermo::numerics::{binary_entropy, linspace};
use pmp_thermo::oracle::{compare, BathChoice, ProtocolGrid};
use pmp_thermo::planner::{Endpoints, Planner, SegmentSpec, TrajectoryPlan};
use pmp_thermo::pmp::{conserved_k_residual, Costate, TrajectoryNode};
use pmp_thermo::qubit::{
    adiabatic_f, admissible_population_range, asymptotic_limit, find_jump_points, lambert_w0, solve_engine,
    tangency_residual, Branch, IsothermSegment, QubitParams,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn z03() -> QubitParams {
    QubitParams::from_ratio(0.3).unwrap()
}

fn worked() -> Endpoints {
    Endpoints::new(0.07, 1.0, 0.26, 6.0).unwrap()
}

fn c01_lambert() -> Outcome {
    let start = Instant::now();
    let th = asymptotic_limit().theta;
    let elapsed = start.elapsed().as_secs_f64();
    let e_inv = (-1.0f64).exp();
    let identity = (4.0 * th * (4.0 * th).exp() - e_inv).abs();
    let printed = (th - 0.06961).abs();
    // second route: theta from W's own defining equation by bisection
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.exp() < e_inv {
            lo = mid
        } else {
            hi = mid
        }
    }
    let routes = (lambert_w0(e_inv).unwrap() - lo).abs();
    outcome(
        identity < 1e-14 && printed < 5e-5 && routes < 1e-15 && elapsed < 1e-3,
        format!(
            "theta = {th:.15}, identity {identity:.1e}, |theta - 0.06961| = {printed:.1e}, {:.0} us",
            elapsed * 1e6
        ),
    )
}

fn c02_power_limit() -> Outcome {
    let start = Instant::now();
    let sol = solve_engine(&QubitParams::from_ratio(0.01).unwrap()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let th = asymptotic_limit().theta;
    let rel = (0.01 * sol.g - th).abs() / th;
    outcome(
        rel < 0.02 && elapsed < 1.0,
        format!(
            "z g(0.01) = {:.6}, theta = {th:.6}, relative gap {:.2}% (limit 2%), {:.1} ms",
            0.01 * sol.g,
            rel * 100.0,
            elapsed * 1e3
        ),
    )
}

fn c03_working_point() -> Outcome {
    let sol = solve_engine(&QubitParams::from_ratio(0.01).unwrap()).unwrap();
    let target = asymptotic_limit().p_star_limit;
    let rel = (sol.p_star - target).abs() / target;
    outcome(
        rel < 0.02,
        format!(
            "p*(0.01) = {:.6}, 2 theta/(1 + 4 theta) = {target:.6} (printed value 0.10848), relative gap {:.2}% (limit 2%)",
            sol.p_star,
            rel * 100.0
        ),
    )
}

fn sweep() -> Vec<(f64, pmp_thermo::qubit::EngineSolution)> {
    linspace(0.02, 0.98, 50)
        .into_iter()
        .map(|z| (z, solve_engine(&QubitParams::from_ratio(z).unwrap()).unwrap()))
        .collect()
}

fn c04_linear_response() -> Outcome {
    let g99 = solve_engine(&QubitParams::from_ratio(0.99).unwrap()).unwrap().g;
    let rows = sweep();
    let decreasing = rows.windows(2).all(|w| w[1].1.g < w[0].1.g);
    outcome(g99 < 1e-3 && decreasing, format!("g(0.99) = {g99:.3e}, strictly decreasing on 50 points: {decreasing}"))
}

fn c05_efficiency() -> Outcome {
    let rows = sweep();
    let below_carnot = rows.iter().all(|(z, s)| s.eta_star <= 1.0 - z);
    let worst_ca = rows
        .iter()
        .filter(|(z, _)| *z >= 0.9)
        .map(|(_, s)| (s.eta_star - s.eta_curzon_ahlborn).abs())
        .fold(0.0f64, f64::max);
    outcome(
        below_carnot && worst_ca < 0.01,
        format!("eta* <= eta_C everywhere: {below_carnot}; max |eta* - eta_CA| for z >= 0.9: {worst_ca:.2e}"),
    )
}

/// Random isotherms over random ratios and rates, with room on both ends.
fn random_segments(n: usize, seed: u64) -> Vec<(QubitParams, IsothermSegment)> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let params = QubitParams::from_ratio(rng.gen_range(0.1..0.9)).unwrap();
        let kind = if rng.gen_bool(0.5) { Bath::Cold } else { Bath::Hot };
        let k = -rng.gen_range(0.005..0.3);
        let (_, hi) = admissible_population_range(&params, kind, k).unwrap();
        if hi < 0.05 {
            continue;
        }
        let a = rng.gen_range(0.02..0.95 * hi);
        let b = rng.gen_range(0.02..0.95 * hi);
        if (a - b).abs() < 0.02 {
            continue;
        }
        let (p0, p1) = match kind {
            Bath::Cold => (a.max(b), a.min(b)),
            Bath::Hot => (a.min(b), a.max(b)),
        };
        if let Ok(seg) = IsothermSegment::from_populations(&params, Branch::of(kind), k, p0, p1) {
            out.push((params, seg));
        }
    }
    out
}

fn c06_closed_form_vs_ode() -> Outcome {
    let start = Instant::now();
    let opts = IntegrateOptions { rtol: 1e-11, atol: 1e-14, record: false, ..Default::default() };
    let mut worst_q = 0.0f64;
    let mut worst_p = 0.0f64;
    for (params, seg) in random_segments(50, 6) {
        let rho0 = DensityMatrix::two_level(seg.p0()).unwrap();
        let sim = integrate(&params.model(), &rho0, &Protocol::from_pieces(vec![seg.protocol_piece()]), &opts).unwrap();
        worst_q = worst_q.max(((sim.ledger.heat_released - seg.heat) / seg.heat).abs());
        worst_p = worst_p.max(((sim.final_state.excited_population() - seg.p1()) / seg.p1()).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst_q < 1e-6 && worst_p < 1e-6 && elapsed < 30.0,
        format!(
            "50 segments: max rel heat error {worst_q:.2e}, max rel end-population error {worst_p:.2e}, {elapsed:.2} s"
        ),
    )
}

fn segment_nodes(seg: &IsothermSegment, n: usize) -> Vec<TrajectoryNode> {
    seg.sample_uniform_time(n)
        .into_iter()
        .map(|pt| TrajectoryNode {
            rho: DensityMatrix::two_level(pt.p).unwrap().into_matrix(),
            pi: Costate::two_level(pt.q),
            control: pmp_thermo::lindblad::ControlVector::on_bath(vec![pt.u], seg.branch.kind, seg.gamma),
            pi_dot: None,
        })
        .collect()
}

fn plans() -> Vec<TrajectoryPlan> {
    let planner = Planner::new(z03()).unwrap();
    (0..3).map(|n| planner.build_trajectory(&worked(), -0.05, n).unwrap()).collect()
}

fn c07_conservation() -> Outcome {
    let mut segs: Vec<(QubitParams, IsothermSegment)> = random_segments(50, 6);
    for plan in plans() {
        segs.extend(plan.segments().map(|s| (z03(), s.segment)));
    }
    let mut worst = 0.0f64;
    for (params, seg) in &segs {
        let r = conserved_k_residual(&params.model(), &segment_nodes(seg, 200), seg.k).unwrap();
        worst = worst.max(r.max_conservation);
    }
    outcome(worst < 1e-9, format!("{} segments x 200 samples: max |H - K| = {worst:.2e}", segs.len()))
}

fn c08_quasi_static() -> Outcome {
    let params = z03();
    let seg = IsothermSegment::from_populations(&params, Branch::COLD, -1e-8, 0.5, 0.1).unwrap();
    let qs = (binary_entropy(0.5) - binary_entropy(0.1)) / params.beta_c;
    let rel = ((seg.heat - qs) / qs).abs();
    outcome(rel < 1e-3, format!("Q = {:.9}, entropy difference {qs:.9}, relative {rel:.2e}", seg.heat))
}

fn c09_bifurcation() -> Outcome {
    let params = z03();
    let sol = solve_engine(&params).unwrap();
    let ks = sol.k_star;
    let two = linspace(0.02, 0.98, 25).iter().all(|&s| {
        find_jump_points(&params, &sol, s * ks).is_ok_and(|jp| jp.p_ad1 < sol.p_star && jp.p_ad2 > sol.p_star)
    });
    let none = [1.001, 1.1, 2.0, 5.0].iter().all(|&s| find_jump_points(&params, &sol, s * ks).is_err());
    let at = find_jump_points(&params, &sol, ks).unwrap();
    // independent tangency check: f(., K*) touches zero at p* without changing sign
    let grid = linspace(1e-4, 0.45, 4000);
    let vals: Vec<f64> = grid.iter().filter_map(|&p| adiabatic_f(&params, p, ks).ok()).collect();
    let crossings = vals.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    let f_star = adiabatic_f(&params, sol.p_star, ks).unwrap().abs();
    let tan = tangency_residual(&params, sol.p_star, ks).unwrap().abs();
    outcome(
        two && none && (at.p_ad2 - at.p_ad1).abs() < 1e-8 && crossings == 0 && f_star < 1e-10 && tan < 1e-10,
        format!(
            "two roots above K*: {two}; none below: {none}; |p_ad2 - p_ad1| at K* = {:.1e}; sign changes of f(., K*) on a 4000-point grid: {crossings}",
            (at.p_ad2 - at.p_ad1).abs()
        ),
    )
}

fn c10_monotonicity() -> Outcome {
    let planner = Planner::new(z03()).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let mut signs = true;
    let mut count = 0;
    while count < 20 {
        let kind = if count % 2 == 0 { Bath::Cold } else { Bath::Hot };
        let k = -rng.gen_range(0.01..0.3);
        let hi = admissible_population_range(planner.params(), kind, k * 1.01).unwrap().1;
        let (a, b) = (rng.gen_range(0.02..0.9 * hi), rng.gen_range(0.02..0.9 * hi));
        if (a - b).abs() < 0.01 {
            continue;
        }
        let (p0, p1) = if kind == Bath::Cold { (a.max(b), a.min(b)) } else { (a.min(b), a.max(b)) };
        let Ok(rows) = planner.monotonicity_profile(&SegmentSpec { kind, p0, p1 }, &[k]) else {
            continue;
        };
        let r = rows[0];
        worst = worst.max(((r.dtau_dk_analytic - r.dtau_dk_numeric) / r.dtau_dk_analytic).abs());
        worst = worst.max(((r.dq_dk_analytic - r.dq_dk_numeric) / r.dq_dk_analytic).abs());
        signs &= r.dtau_dk_analytic > 0.0 && r.dq_dk_analytic < 0.0 && r.dtau_dk_numeric > 0.0 && r.dq_dk_numeric < 0.0;
        count += 1;
    }
    outcome(signs && worst < 1e-6, format!("20 segments: max relative mismatch {worst:.2e}, signs hold: {signs}"))
}

fn c11_cycle_rate() -> Outcome {
    let planner = Planner::new(z03()).unwrap();
    let ks = planner.k_star();
    let eps = [1e-3, 1e-4, 1e-5];
    let rates: Vec<f64> = eps.iter().map(|e| planner.cycle_decomposition(ks + e).unwrap().rate).collect();
    let gaps: Vec<f64> = rates.iter().map(|r| r - ks).collect();
    let same_side = gaps.iter().all(|g| *g > 0.0);
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let linear = gaps.windows(2).zip(eps.windows(2)).all(|(g, e)| g[1] / g[0] <= e[1] / e[0]);
    outcome(
        same_side && monotone && linear,
        format!("rate - K* = {:.3e}, {:.3e}, {:.3e} for eps = 1e-3, 1e-4, 1e-5", gaps[0], gaps[1], gaps[2]),
    )
}

fn c12_isochores() -> Outcome {
    let planner = Planner::new(z03()).unwrap();
    let c = planner.cycle_decomposition(planner.k_star() + 1e-6).unwrap();
    let rel = (c.tau_h_seg - c.tau_c_seg).abs() / c.tau_c_seg;
    outcome(
        rel < 1e-4,
        format!("tau_hot = {:.6e}, tau_cold = {:.6e}, relative difference {rel:.2e}", c.tau_h_seg, c.tau_c_seg),
    )
}

fn c13_oracle() -> Outcome {
    let start = Instant::now();
    let params = z03();
    let plan = Planner::new(params).unwrap().build_trajectory(&worked(), -0.05, 0).unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    let mut gaps = Vec::new();
    for n in [4, 8] {
        let grid = ProtocolGrid::new(n, linspace(0.5, 6.0, 12), BathChoice::Both, plan.total_time).unwrap();
        let (rep, _) = compare(&params, 0.07, 0.26, 1e-3, &grid, plan.total_heat).unwrap();
        ok &= rep.q_brute >= plan.total_heat - rep.discretization_bound;
        ok &= (rep.q_brute_simulated - rep.q_brute).abs() < 1e-8;
        gaps.push(rep.gap);
        lines.push(format!(
            "n = {n}: gap {:.3e} (bound {:.1e}, {} protocols)",
            rep.gap, rep.discretization_bound, rep.n_protocols_evaluated
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= gaps[1] < gaps[0] && elapsed < 300.0;
    outcome(ok, format!("Q_plan = {:.6}; {}; {elapsed:.1} s", plan.total_heat, lines.join("; ")))
}

fn figure_csvs() -> Vec<String> {
    let params = z03();
    let cold = IsothermSegment::from_gaps(&params, Branch::COLD, -0.05, 1.0, 6.0).unwrap();
    let hot = IsothermSegment::from_gaps(&params, Branch::HOT, -0.05, 8.0, 2.0).unwrap();
    let plan = Planner::new(params).unwrap().build_trajectory(&worked(), -0.05, 1).unwrap();
    vec![pmp_thermo::planner::segment_csv(&cold, 1000), pmp_thermo::planner::segment_csv(&hot, 1000), plan.to_csv(1000)]
}

fn column(csv: &str, idx: usize) -> Vec<f64> {
    csv.lines().skip(2).map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn c14_figures() -> Outcome {
    let a = figure_csvs();
    let b = std::thread::spawn(figure_csvs).join().unwrap();
    let stable = a == b;
    let p_cold = column(&a[0], 2);
    let q_cold = column(&a[0], 5);
    let p_hot = column(&a[1], 2);
    let q_hot = column(&a[1], 5);
    let cold_ok = p_cold.windows(2).all(|w| w[1] < w[0]) && q_cold.windows(2).all(|w| w[1] > w[0]);
    let hot_ok = p_hot.windows(2).all(|w| w[1] > w[0]) && q_hot.windows(2).all(|w| w[1] < w[0]);
    let cold_area = *q_cold.last().unwrap();
    let planner = Planner::new(z03()).unwrap();
    let q_cycle = planner.cycle_decomposition(-0.05).unwrap().q_cycle;
    let plan_q = *column(&a[2], 5).last().unwrap();
    let plan = planner.build_trajectory(&worked(), -0.05, 1).unwrap();
    outcome(
        stable && cold_ok && hot_ok && cold_area > 0.0 && q_cycle < 0.0 && (plan_q - plan.total_heat).abs() < 1e-12,
        format!("byte-stable: {stable}; cold area {cold_area:.6} > 0; Q_cycle {q_cycle:.6} < 0; direction checks {cold_ok}/{hot_ok}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("Lambert-W constant", c01_lambert),
        ("ultimate power limit z g(0.01)", c02_power_limit),
        ("asymptotic working point p*(0.01)", c03_working_point),
        ("linear-response vanishing of g", c04_linear_response),
        ("efficiency bounds", c05_efficiency),
        ("closed form vs ODE", c06_closed_form_vs_ode),
        ("conservation of H", c07_conservation),
        ("quasi-static limit", c08_quasi_static),
        ("jump-point bifurcation", c09_bifurcation),
        ("K-monotonicity derivatives", c10_monotonicity),
        ("infinitesimal-cycle rate", c11_cycle_rate),
        ("isochore symmetry", c12_isochores),
        ("never-beat oracle", c13_oracle),
        ("figure data regression", c14_figures),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 14 criteria pass");
    } else {
        println!("acceptance: {} of 14 criteria fail: {failed:?}", failed.len());
        std::process::exit(1);
    }
}
