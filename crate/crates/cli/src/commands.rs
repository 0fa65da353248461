use std::fmt::Write as _;

use rayon::prelude::*;
use serde_json::{json, Value};

use pmp_thermo::format::fmt15;
use pmp_thermo::lindblad::Bath;
use pmp_thermo::numerics::linspace;
use pmp_thermo::oracle::{compare, BathChoice, OracleError, ProtocolGrid};
use pmp_thermo::planner::{segment_csv, DeadlineOptions, Endpoints, PlanError, Planner};
use pmp_thermo::qubit::{solve_engine, Branch, EngineSolution, IsothermSegment, QubitError, QubitParams};

use crate::output::{emit, json_text, write_atomic};
use crate::{Cli, Command, EngineArgs, Failure, IsothermArgs, OracleArgs, SweepArgs, TrajectoryArgs};

fn qubit_failure(e: QubitError) -> Failure {
    match e {
        QubitError::NoConvergence { .. } => Failure::Solver(e.to_string()),
        QubitError::NoJumpPoints { .. } => Failure::Infeasible(e.to_string()),
        _ => Failure::Usage(e.to_string()),
    }
}

fn plan_failure(e: PlanError) -> Failure {
    match e {
        PlanError::Qubit(q) => qubit_failure(q),
        PlanError::InvalidInput(_) => Failure::Usage(e.to_string()),
        PlanError::NoCycleExists { .. } | PlanError::Unreachable { .. } | PlanError::InfeasibleDeadline { .. } => {
            Failure::Infeasible(e.to_string())
        }
    }
}

fn oracle_failure(e: OracleError) -> Failure {
    match e {
        OracleError::InvalidGrid(_) => Failure::Usage(e.to_string()),
        OracleError::Infeasible { .. } => Failure::Infeasible(e.to_string()),
        OracleError::Sim(_) => Failure::Solver(e.to_string()),
    }
}

impl Cli {
    fn params(&self, z: f64) -> Result<QubitParams, Failure> {
        QubitParams::with_units(z, self.beta_c, self.gamma).map_err(qubit_failure)
    }

    fn unit_line(&self) -> String {
        format!("# beta_c = {}, gamma = {}", fmt15(self.beta_c), fmt15(self.gamma))
    }

    fn units(&self) -> Value {
        json!({"beta_c": self.beta_c, "gamma": self.gamma})
    }
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Engine(a) => engine(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::Isotherm(a) => isotherm(cli, a),
        Command::Trajectory(a) => trajectory(cli, a),
        Command::Verify(a) => crate::verify::run(a),
        Command::Oracle(a) => oracle(cli, a),
    }
}

fn with_units(v: Value, units: Value) -> Value {
    let mut v = v;
    if let Value::Object(m) = &mut v {
        m.insert("units".into(), units);
    }
    v
}

/// Square wave between the two working gaps, cold stroke first.
fn schedule_csv(cli: &Cli, sol: &EngineSolution, periods: usize, dtau: f64) -> String {
    let mut out =
        format!("{}\n# t in the time unit of 1/gamma; u in the energy unit of 1/beta_c\nt,u,branch\n", cli.unit_line());
    for i in 0..periods {
        let t0 = 2.0 * dtau * i as f64;
        for (k, (u, bath)) in [(sol.u_c_star, Bath::Cold), (sol.u_h_star, Bath::Hot)].into_iter().enumerate() {
            let start = t0 + dtau * k as f64;
            for t in [start, start + dtau] {
                let _ = writeln!(out, "{},{},{}", fmt15(t), fmt15(u), bath.label());
            }
        }
    }
    out
}

fn engine(cli: &Cli, a: &EngineArgs) -> Result<(), Failure> {
    let params = cli.params(a.z)?;
    if a.schedule.is_some() && !(a.dtau.is_finite() && a.dtau > 0.0) {
        return Err(Failure::Usage(format!("--dtau {} must be positive", a.dtau)));
    }
    let sol = solve_engine(&params).map_err(qubit_failure)?;
    if let Some(path) = &a.schedule {
        write_atomic(path, &schedule_csv(cli, &sol, a.periods, a.dtau))?;
    }
    let v = serde_json::to_value(sol).expect("engine solution serializes");
    emit(a.out.as_deref(), &json_text(with_units(v, cli.units())))
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<(), Failure> {
    if !(a.z_min > 0.0 && a.z_min < a.z_max && a.z_max < 1.0) {
        return Err(Failure::Usage(format!("need 0 < z_min < z_max < 1, got {} and {}", a.z_min, a.z_max)));
    }
    if a.steps < 2 {
        return Err(Failure::Usage("--steps must be at least 2".into()));
    }
    let zs = linspace(a.z_min, a.z_max, a.steps);
    let rows: Vec<(f64, Result<EngineSolution, String>)> = zs
        .par_iter()
        .map(|&z| {
            let r =
                cli.params(z).map_err(|f| format!("{f:?}")).and_then(|p| solve_engine(&p).map_err(|e| e.to_string()));
            (z, r)
        })
        .collect();
    let mut out = format!(
        "{}\n# g = -K* beta_c/gamma; efficiencies dimensionless\nz,g,eta_star,eta_ca,eta_carnot\n",
        cli.unit_line()
    );
    let mut failed = Vec::new();
    for (z, r) in &rows {
        match r {
            Ok(s) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt15(*z),
                    fmt15(s.g),
                    fmt15(s.eta_star),
                    fmt15(s.eta_curzon_ahlborn),
                    fmt15(s.eta_carnot)
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{},nan,nan,nan,nan", fmt15(*z));
                failed.push(format!("z = {z}: {e}"));
            }
        }
    }
    emit(a.out.as_deref(), &out)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Solver(format!("{} grid points failed: {}", failed.len(), failed.join("; "))))
    }
}

fn isotherm(cli: &Cli, a: &IsothermArgs) -> Result<(), Failure> {
    let params = cli.params(a.z)?;
    if a.points < 2 {
        return Err(Failure::Usage("--points must be at least 2".into()));
    }
    let seg =
        IsothermSegment::from_gaps(&params, Branch::of(a.branch.into()), a.k, a.u0, a.u1).map_err(qubit_failure)?;
    let csv = format!("{}\n{}", cli.unit_line(), segment_csv(&seg, a.points));
    emit(a.out.as_deref(), &csv)
}

fn endpoints(e: &crate::Endpoints) -> Result<Endpoints, Failure> {
    Endpoints::new(e.p_in, e.u_in, e.p_out, e.u_out).map_err(plan_failure)
}

fn trajectory(cli: &Cli, a: &TrajectoryArgs) -> Result<(), Failure> {
    let params = cli.params(a.z)?;
    let ends = endpoints(&a.ends)?;
    let planner = Planner::new(params).map_err(plan_failure)?;
    let plan = match (a.deadline, a.k) {
        (Some(tau), _) => planner
            .plan_for_deadline(&ends, tau, &DeadlineOptions { max_cycles: a.max_cycles, ..Default::default() })
            .map_err(plan_failure)?,
        (None, Some(k)) => planner.build_trajectory(&ends, k, a.cycles).map_err(plan_failure)?,
        (None, None) => return Err(Failure::Usage("either --K or --deadline is required".into())),
    };
    if let Some(path) = &a.csv {
        write_atomic(path, &format!("{}\n{}", cli.unit_line(), plan.to_csv(a.points.max(2))))?;
    }
    emit(a.json.as_deref(), &json_text(with_units(plan.to_json(), cli.units())))
}

fn oracle(cli: &Cli, a: &OracleArgs) -> Result<(), Failure> {
    let params = cli.params(a.z)?;
    let ends = endpoints(&a.ends)?;
    let planner = Planner::new(params).map_err(plan_failure)?;
    let plan = planner.build_trajectory(&ends, a.k, a.cycles).map_err(plan_failure)?;
    let grid = ProtocolGrid::new(a.intervals, linspace(a.u_min, a.u_max, a.levels), BathChoice::Both, plan.total_time)
        .map_err(oracle_failure)?;
    let (report, _) =
        compare(&params, ends.p_in, ends.p_out, a.tolerance, &grid, plan.total_heat).map_err(oracle_failure)?;
    let mut v = serde_json::to_value(report).expect("report serializes");
    if let Value::Object(m) = &mut v {
        m.insert("tau".into(), json!(plan.total_time));
        m.insert("never_beaten".into(), json!(report.never_beaten(1e-8)));
    }
    emit(a.out.as_deref(), &json_text(with_units(v, cli.units())))
}
