//! Pontryagin conditions for heat minimization: pseudo-Hamiltonian, costate
//! dynamics, gauge multiplier, bath switching, and residual checks on
//! sampled trajectories.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lindblad::{
    generator, generator_adjoint, generator_derivative, hermiticity_error, trace_product, Bath, CMatrix, ControlVector,
    DensityMatrix, DissipatorModel, SimError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmpError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("costate must be Hermitian (error {0:e})")]
    NotHermitian(f64),
    #[error("costate must be traceless (trace {0:e})")]
    NotTraceless(f64),
    #[error("state is not a fixed point of the generator (residual {0:e})")]
    NotFixedPoint(f64),
}

const GAUGE_TOL: f64 = 1e-10;
const FIXED_POINT_TOL: f64 = 1e-8;

/// Hermitian, traceless costate.
#[derive(Debug, Clone, PartialEq)]
pub struct Costate(CMatrix);

impl Costate {
    pub fn new(m: CMatrix) -> Result<Self, PmpError> {
        let herm = hermiticity_error(&m);
        if herm > 1e-12 {
            return Err(PmpError::NotHermitian(herm));
        }
        let tr = m.trace().re;
        if tr.abs() > GAUGE_TOL {
            return Err(PmpError::NotTraceless(tr));
        }
        Ok(Costate(m))
    }

    /// Removes the trace, which the dynamics never sees.
    pub fn gauge_fixed(m: CMatrix) -> Result<Self, PmpError> {
        let d = m.nrows();
        let shift = m.trace() / Complex64::new(d as f64, 0.0);
        Costate::new(m - CMatrix::identity(d, d) * shift)
    }

    /// `diag(q, -q)` for the qubit.
    pub fn two_level(q: f64) -> Self {
        Costate(crate::lindblad::diag(&[q, -q]))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `q` of a qubit costate `diag(q, -q)`.
    pub fn scalar_q(&self) -> f64 {
        self.0[(0, 0)].re
    }
}

fn check_shapes<M: DissipatorModel + ?Sized>(model: &M, d: usize, u: &ControlVector) -> Result<(), PmpError> {
    if d != model.dim() {
        return Err(SimError::DimensionMismatch { expected: model.dim(), found: d }.into());
    }
    u.validate(model.n_controls())?;
    Ok(())
}

/// `<(pi - H) L[rho]> + lambda (<rho> - 1)`.
pub fn pseudo_hamiltonian<M: DissipatorModel + ?Sized>(
    model: &M,
    rho: &CMatrix,
    pi: &Costate,
    u: &ControlVector,
    lambda: f64,
) -> Result<f64, PmpError> {
    check_shapes(model, rho.nrows(), u)?;
    check_shapes(model, pi.dim(), u)?;
    let shifted = pi.matrix() - model.hamiltonian(&u.hamiltonian_params);
    Ok(trace_product(&shifted, &generator(model, rho, u)) + lambda * (rho.trace().re - 1.0))
}

/// Multiplier that keeps the costate traceless, `-tr(L^dag[pi - H]) / d`.
pub fn gauge_lambda<M: DissipatorModel + ?Sized>(model: &M, pi: &Costate, u: &ControlVector) -> Result<f64, PmpError> {
    check_shapes(model, pi.dim(), u)?;
    let shifted = pi.matrix() - model.hamiltonian(&u.hamiltonian_params);
    Ok(-generator_adjoint(model, &shifted, u).trace().re / pi.dim() as f64)
}

/// `d pi/dt = -(L^dag[pi - H] + lambda 1)`.
pub fn costate_rhs<M: DissipatorModel + ?Sized>(
    model: &M,
    pi: &Costate,
    u: &ControlVector,
    lambda: f64,
) -> Result<CMatrix, PmpError> {
    check_shapes(model, pi.dim(), u)?;
    let d = pi.dim();
    let shifted = pi.matrix() - model.hamiltonian(&u.hamiltonian_params);
    let mut out = generator_adjoint(model, &shifted, u);
    for i in 0..d {
        out[(i, i)] += Complex64::new(lambda, 0.0);
    }
    Ok(-out)
}

/// `-<rho_eq d pi/dt>` for a fixed point `rho_eq` of the generator at `u`.
pub fn lambda_from_gauge<M: DissipatorModel + ?Sized>(
    model: &M,
    u: &ControlVector,
    pi_dot: &CMatrix,
    rho_eq: &DensityMatrix,
) -> Result<f64, PmpError> {
    check_shapes(model, rho_eq.dim(), u)?;
    let residual = generator(model, rho_eq.matrix(), u).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if residual > FIXED_POINT_TOL {
        return Err(PmpError::NotFixedPoint(residual));
    }
    Ok(-trace_product(rho_eq.matrix(), pi_dot))
}

/// Minimal heat from boundary terms and the integrated multiplier,
/// `<pi(0) rho(0)> - <pi(T) rho(T)> - int lambda dt`.
pub fn q_min_formula(pi0: &Costate, rho0: &CMatrix, pi_tau: &Costate, rho_tau: &CMatrix, lambda_integral: f64) -> f64 {
    trace_product(pi0.matrix(), rho0) - trace_product(pi_tau.matrix(), rho_tau) - lambda_integral
}

/// `A = <(pi - H)(D^h - D^c)[rho]>`; positive favours the cold bath.
pub fn switching_functional<M: DissipatorModel + ?Sized>(
    model: &M,
    rho: &CMatrix,
    pi: &Costate,
    u: &[f64],
) -> Result<f64, PmpError> {
    let cv = ControlVector::new(u.to_vec(), 0.0, 0.0);
    check_shapes(model, rho.nrows(), &cv)?;
    let shifted = pi.matrix() - model.hamiltonian(u);
    let diff = model.bath_dissipator(Bath::Hot, u, rho) - model.bath_dissipator(Bath::Cold, u, rho);
    Ok(trace_product(&shifted, &diff))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TiePolicy {
    KeepCurrent(Bath),
    Prefer(Bath),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathChoice {
    pub bath: Bath,
    pub gamma_c: f64,
    pub gamma_h: f64,
}

/// Bang-bang bath choice under `gamma_c + gamma_h = gamma`.
pub fn select_bath(a: f64, tie_tol: f64, tie_policy: TiePolicy, gamma: f64) -> BathChoice {
    let bath = if a > tie_tol {
        Bath::Cold
    } else if a < -tie_tol {
        Bath::Hot
    } else {
        match tie_policy {
            TiePolicy::KeepCurrent(b) | TiePolicy::Prefer(b) => b,
        }
    };
    let cv = ControlVector::on_bath(Vec::new(), bath, gamma);
    BathChoice { bath, gamma_c: cv.gamma_c, gamma_h: cv.gamma_h }
}

/// `d H_pmp / du_k`, zero at an interior optimum of the Hamiltonian controls.
pub fn stationarity<M: DissipatorModel + ?Sized>(
    model: &M,
    rho: &CMatrix,
    pi: &Costate,
    u: &ControlVector,
    k: usize,
) -> Result<f64, PmpError> {
    check_shapes(model, rho.nrows(), u)?;
    let p = &u.hamiltonian_params;
    let shifted = pi.matrix() - model.hamiltonian(p);
    let dl = generator_derivative(model, rho, u, k);
    let l = generator(model, rho, u);
    Ok(trace_product(&shifted, &dl) - trace_product(&model.hamiltonian_derivative(p, k), &l))
}

/// One sample of a candidate optimal trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryNode {
    pub rho: CMatrix,
    pub pi: Costate,
    pub control: ControlVector,
    /// Observed costate derivative, when available.
    pub pi_dot: Option<CMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmpResiduals {
    pub max_conservation: f64,
    pub max_stationarity: f64,
    pub max_costate_ode: f64,
    pub nodes: usize,
}

impl PmpResiduals {
    pub fn max(&self) -> f64 {
        self.max_conservation.max(self.max_stationarity).max(self.max_costate_ode)
    }
}

/// Residuals of the optimality conditions at every node, against the stored rate `k`.
pub fn conserved_k_residual<M: DissipatorModel + ?Sized>(
    model: &M,
    nodes: &[TrajectoryNode],
    k: f64,
) -> Result<PmpResiduals, PmpError> {
    let per_node: Result<Vec<(f64, f64, f64)>, PmpError> = nodes
        .par_iter()
        .map(|n| {
            let cons = (pseudo_hamiltonian(model, &n.rho, &n.pi, &n.control, 0.0)? - k).abs();
            let mut stat: f64 = 0.0;
            for idx in 0..model.n_controls() {
                stat = stat.max(stationarity(model, &n.rho, &n.pi, &n.control, idx)?.abs());
            }
            let ode = match &n.pi_dot {
                Some(obs) => {
                    let lambda = gauge_lambda(model, &n.pi, &n.control)?;
                    let expected = costate_rhs(model, &n.pi, &n.control, lambda)?;
                    (obs - expected).iter().fold(0.0f64, |a, z| a.max(z.norm()))
                }
                None => 0.0,
            };
            Ok((cons, stat, ode))
        })
        .collect();
    let per_node = per_node?;
    let fold = |f: fn(&(f64, f64, f64)) -> f64| per_node.iter().map(f).fold(0.0f64, f64::max);
    Ok(PmpResiduals {
        max_conservation: fold(|r| r.0),
        max_stationarity: fold(|r| r.1),
        max_costate_ode: fold(|r| r.2),
        nodes: nodes.len(),
    })
}

/// Nodes whose active bath disagrees with the sign of the switching functional.
pub fn bang_bang_violations<M: DissipatorModel + ?Sized>(
    model: &M,
    nodes: &[TrajectoryNode],
    tie_tol: f64,
) -> Result<usize, PmpError> {
    let mut bad = 0;
    for n in nodes {
        let a = switching_functional(model, &n.rho, &n.pi, &n.control.hamiltonian_params)?;
        let on_cold = n.control.gamma_c > n.control.gamma_h;
        if (on_cold && a < -tie_tol) || (!on_cold && a > tie_tol) {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Scalar forms for the qubit reset model with `pi = diag(q, -q)` and `H = u|1><1|`.
pub mod qubit {
    use crate::lindblad::gibbs_excited_population;

    /// `-(2q + u) gamma (n - p)`.
    pub fn pseudo_hamiltonian(p: f64, q: f64, u: f64, beta: f64, gamma: f64) -> f64 {
        -(2.0 * q + u) * gamma * (gibbs_excited_population(beta, u) - p)
    }

    /// `dq/dt = (gamma / 2)(2q + u)`.
    pub fn costate_rate(q: f64, u: f64, gamma: f64) -> f64 {
        0.5 * gamma * (2.0 * q + u)
    }

    /// Gauge multiplier `-(1 - 2n)(gamma / 2)(2q + u)`.
    pub fn gauge_lambda(q: f64, u: f64, beta: f64, gamma: f64) -> f64 {
        let n = gibbs_excited_population(beta, u);
        -(1.0 - 2.0 * n) * 0.5 * gamma * (2.0 * q + u)
    }

    /// `(2q + u)(e^{beta_h u} - e^{beta_c u}) / ((e^{beta_c u} + 1)(e^{beta_h u} + 1))`.
    pub fn switching_functional(q: f64, u: f64, beta_c: f64, beta_h: f64) -> f64 {
        (2.0 * q + u) * (gibbs_excited_population(beta_c, u) - gibbs_excited_population(beta_h, u))
    }
}
