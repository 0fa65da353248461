//! Self-contained invariant suite behind `pmp-thermo verify`.

use serde_json::json;

use pmp_thermo::lindblad::{integrate, Bath, IntegrateOptions};
use pmp_thermo::numerics::linspace;
use pmp_thermo::oracle::{grid_search, BathChoice, ProtocolGrid};
use pmp_thermo::planner::{Endpoints, Planner, SegmentSpec};
use pmp_thermo::pmp::{bang_bang_violations, conserved_k_residual};
use pmp_thermo::qubit::{
    asymptotic_limit, find_jump_points, quasi_static_heat, solve_engine, Branch, IsothermSegment, QubitParams,
};

use crate::output::{json_text, write_atomic};
use crate::{Failure, VerifyArgs};

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String), String>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

const Z: f64 = 0.3;
const K: f64 = -0.05;

fn worked() -> Endpoints {
    Endpoints::new(0.07, 1.0, 0.26, 6.0).expect("valid end points")
}

fn suite() -> Vec<Check> {
    let s = |e: &dyn std::fmt::Display| e.to_string();
    let params = QubitParams::from_ratio(Z).expect("valid ratio");
    vec![
        check("lambert_identity", || {
            let th = asymptotic_limit().theta;
            let r = (4.0 * th * (4.0 * th).exp() - (-1.0f64).exp()).abs();
            Ok((r < 1e-14, format!("residual {r:.2e}")))
        }),
        check("engine_residuals_and_second_law", || {
            let mut worst = 0.0f64;
            let mut prev_g = f64::INFINITY;
            let mut ok = true;
            for z in linspace(0.02, 0.98, 50) {
                let sol = solve_engine(&QubitParams::from_ratio(z).map_err(|e| s(&e))?).map_err(|e| s(&e))?;
                worst = worst.max(sol.f_residual.abs()).max(sol.tangency_residual.abs());
                ok &= sol.g < prev_g && sol.eta_star <= sol.eta_carnot;
                prev_g = sol.g;
            }
            Ok((ok && worst < 1e-10, format!("max residual {worst:.2e}")))
        }),
        check("closed_form_matches_integration", || {
            let model = params.model();
            let mut worst = 0.0f64;
            for (kind, p0, p1) in [(Bath::Cold, 0.3, 0.1), (Bath::Hot, 0.05, 0.3), (Bath::Cold, 0.45, 0.2)] {
                let seg = IsothermSegment::from_populations(&params, Branch::of(kind), K, p0, p1).map_err(|e| s(&e))?;
                let rho0 = pmp_thermo::lindblad::DensityMatrix::two_level(p0).map_err(|e| s(&e))?;
                let proto = pmp_thermo::lindblad::Protocol::from_pieces(vec![seg.protocol_piece()]);
                let opts = IntegrateOptions { rtol: 1e-11, atol: 1e-13, record: false, ..Default::default() };
                let sim = integrate(&model, &rho0, &proto, &opts).map_err(|e| s(&e))?;
                worst = worst.max(((sim.ledger.heat_released - seg.heat) / seg.heat).abs());
                worst = worst.max((sim.final_state.excited_population() - p1).abs() / p1);
            }
            Ok((worst < 1e-6, format!("max relative deviation {worst:.2e}")))
        }),
        check("pmp_conservation_and_bang_bang", || {
            let planner = Planner::new(params).map_err(|e| s(&e))?;
            let plan = planner.build_trajectory(&worked(), K, 1).map_err(|e| s(&e))?;
            let model = params.model();
            let nodes = plan.pmp_nodes(200);
            let r = conserved_k_residual(&model, &nodes, K).map_err(|e| s(&e))?;
            let bad = bang_bang_violations(&model, &nodes, 1e-9).map_err(|e| s(&e))?;
            Ok((r.max() < 1e-9 && bad == 0, format!("max residual {:.2e}, {bad} bath violations", r.max())))
        }),
        check("quasi_static_limit", || {
            let seg = IsothermSegment::from_populations(&params, Branch::COLD, -1e-8, 0.5, 0.1).map_err(|e| s(&e))?;
            let qs = quasi_static_heat(0.5, 0.1, params.beta_c);
            let rel = ((seg.heat - qs) / qs).abs();
            Ok((rel < 1e-3, format!("relative deviation {rel:.2e}")))
        }),
        check("jump_point_bifurcation", || {
            let sol = solve_engine(&params).map_err(|e| s(&e))?;
            let above = find_jump_points(&params, &sol, 0.5 * sol.k_star).map_err(|e| s(&e))?;
            let below = find_jump_points(&params, &sol, 1.5 * sol.k_star).is_err();
            let at = find_jump_points(&params, &sol, sol.k_star).map_err(|e| s(&e))?;
            let ok =
                above.p_ad1 < sol.p_star && sol.p_star < above.p_ad2 && below && (at.p_ad2 - at.p_ad1).abs() < 1e-8;
            Ok((ok, format!("p_ad = {:.6}, {:.6} at K*/2", above.p_ad1, above.p_ad2)))
        }),
        check("monotonicity_derivatives", || {
            let planner = Planner::new(params).map_err(|e| s(&e))?;
            let ks = linspace(-0.3, -0.01, 10);
            let mut worst = 0.0f64;
            let mut signs = true;
            for spec in
                [SegmentSpec { kind: Bath::Cold, p0: 0.3, p1: 0.1 }, SegmentSpec { kind: Bath::Hot, p0: 0.05, p1: 0.3 }]
            {
                for r in planner.monotonicity_profile(&spec, &ks).map_err(|e| s(&e))? {
                    worst = worst.max(((r.dtau_dk_analytic - r.dtau_dk_numeric) / r.dtau_dk_analytic).abs());
                    worst = worst.max(((r.dq_dk_analytic - r.dq_dk_numeric) / r.dq_dk_analytic).abs());
                    signs &= r.dtau_dk_analytic > 0.0 && r.dq_dk_analytic < 0.0;
                }
            }
            Ok((signs && worst < 1e-6, format!("max relative mismatch {worst:.2e}")))
        }),
        check("cycle_rate_approaches_k_star", || {
            let planner = Planner::new(params).map_err(|e| s(&e))?;
            let ks = planner.k_star();
            let gaps: Vec<f64> = [1e-3, 1e-4, 1e-5]
                .iter()
                .map(|eps| planner.cycle_decomposition(ks + eps).map(|c| (c.rate - ks).abs()))
                .collect::<Result<_, _>>()
                .map_err(|e| s(&e))?;
            let ok = gaps[1] < gaps[0] && gaps[2] < gaps[1] && gaps[1] <= 0.1 * gaps[0] * 1.0001;
            Ok((ok, format!("rate gaps {:.2e}, {:.2e}, {:.2e}", gaps[0], gaps[1], gaps[2])))
        }),
        check("plan_decomposition_identity", || {
            let planner = Planner::new(params).map_err(|e| s(&e))?;
            let mut worst = 0.0f64;
            for n in 0..4 {
                let plan = planner.build_trajectory(&worked(), K, n).map_err(|e| s(&e))?;
                let (dt, dq) = plan.decomposition_residual();
                worst = worst.max(dt).max(dq);
            }
            Ok((worst < 1e-10, format!("max residual {worst:.2e}")))
        }),
        check("forward_simulation_of_plan", || {
            let planner = Planner::new(params).map_err(|e| s(&e))?;
            let plan = planner.build_trajectory(&worked(), K, 1).map_err(|e| s(&e))?;
            let sim = integrate(
                &params.model(),
                &plan.initial_state(),
                &plan.to_protocol(),
                &IntegrateOptions { record: false, ..Default::default() },
            )
            .map_err(|e| s(&e))?;
            let dq = (sim.ledger.heat_released - plan.total_heat).abs();
            let dp = (sim.final_state.excited_population() - 0.26).abs();
            let fl = sim.ledger.first_law_residual().abs();
            Ok((dq < 1e-6 && dp < 1e-7 && fl < 1e-9, format!("heat {dq:.2e}, population {dp:.2e}, first law {fl:.2e}")))
        }),
        check("oracle_never_beats_plan", || {
            let planner = Planner::new(params).map_err(|e| s(&e))?;
            let plan = planner.build_trajectory(&worked(), K, 0).map_err(|e| s(&e))?;
            let grid =
                ProtocolGrid::new(6, linspace(0.5, 6.0, 12), BathChoice::Both, plan.total_time).map_err(|e| s(&e))?;
            let res = grid_search(&params, 0.07, 0.26, 1e-3, &grid).map_err(|e| s(&e))?;
            let slack = 10.0 * (1e-8 + res.discretization_bound);
            Ok((res.q >= plan.total_heat - slack, format!("Q_grid - Q_plan = {:.3e}", res.q - plan.total_heat)))
        }),
        check("deterministic_exports", || {
            let planner = Planner::new(params).map_err(|e| s(&e))?;
            let a = planner.build_trajectory(&worked(), K, 1).map_err(|e| s(&e))?.to_csv(200);
            let b = planner.build_trajectory(&worked(), K, 1).map_err(|e| s(&e))?.to_csv(200);
            Ok((a == b, format!("{} bytes", a.len())))
        }),
    ]
}

pub fn run(args: &VerifyArgs) -> Result<(), Failure> {
    let checks = suite();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(path) = &args.out {
        let v = json!(checks
            .iter()
            .map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail}))
            .collect::<Vec<_>>());
        write_atomic(path, &json_text(v))?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Solver(format!("{failed} of {} checks failed", checks.len())))
    }
}
