//! Open-system dynamics with two thermal reset baths.
//!
//! A model supplies a controlled Hamiltonian and one reset dissipator per bath;
//! the generator is `L[rho] = -i[H, rho] + gamma_c D^c[rho] + gamma_h D^h[rho]`.

mod integrate;
mod models;

pub use integrate::{
    integrate, ConstantControl, ControlLaw, IntegrateOptions, LinearRamp, Protocol, ProtocolPiece, Sample, Simulation,
};
pub use models::{DiagonalReset, TwoLevelReset};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("negative damping rate: {0}")]
    NegativeRate(f64),
    #[error("non-finite control value")]
    NonFiniteControl,
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid bath configuration: {0}")]
    InvalidBaths(String),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("trace drifted by {drift:e} at t = {t}")]
    TraceDrift { t: f64, drift: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("invalid integrator option: {0}")]
    InvalidOption(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bath {
    Cold,
    Hot,
}

impl Bath {
    pub fn other(self) -> Bath {
        match self {
            Bath::Cold => Bath::Hot,
            Bath::Hot => Bath::Cold,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bath::Cold => "cold",
            Bath::Hot => "hot",
        }
    }
}

impl std::fmt::Display for Bath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub beta: f64,
    pub label: Bath,
}

/// The pair of inverse temperatures, `beta_c >= beta_h > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBaths {
    pub beta_c: f64,
    pub beta_h: f64,
}

impl TwoBaths {
    pub fn new(beta_c: f64, beta_h: f64) -> Result<Self, SimError> {
        if !(beta_h > 0.0 && beta_c.is_finite() && beta_c >= beta_h) {
            return Err(SimError::InvalidBaths(format!(
                "need beta_c >= beta_h > 0, got beta_c = {beta_c}, beta_h = {beta_h}"
            )));
        }
        Ok(TwoBaths { beta_c, beta_h })
    }

    pub fn beta(&self, bath: Bath) -> f64 {
        match bath {
            Bath::Cold => self.beta_c,
            Bath::Hot => self.beta_h,
        }
    }

    pub fn spec(&self, bath: Bath) -> BathSpec {
        BathSpec { beta: self.beta(bath), label: bath }
    }
}

/// Hamiltonian parameters and the two bath couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    pub hamiltonian_params: Vec<f64>,
    pub gamma_c: f64,
    pub gamma_h: f64,
}

impl ControlVector {
    pub fn new(hamiltonian_params: Vec<f64>, gamma_c: f64, gamma_h: f64) -> Self {
        ControlVector { hamiltonian_params, gamma_c, gamma_h }
    }

    /// Full coupling `gamma` to one bath, none to the other.
    pub fn on_bath(hamiltonian_params: Vec<f64>, bath: Bath, gamma: f64) -> Self {
        match bath {
            Bath::Cold => ControlVector::new(hamiltonian_params, gamma, 0.0),
            Bath::Hot => ControlVector::new(hamiltonian_params, 0.0, gamma),
        }
    }

    pub fn gamma(&self, bath: Bath) -> f64 {
        match bath {
            Bath::Cold => self.gamma_c,
            Bath::Hot => self.gamma_h,
        }
    }

    pub fn validate(&self, n_controls: usize) -> Result<(), SimError> {
        if self.hamiltonian_params.len() != n_controls {
            return Err(SimError::DimensionMismatch { expected: n_controls, found: self.hamiltonian_params.len() });
        }
        if self.hamiltonian_params.iter().any(|u| !u.is_finite())
            || !self.gamma_c.is_finite()
            || !self.gamma_h.is_finite()
        {
            return Err(SimError::NonFiniteControl);
        }
        for g in [self.gamma_c, self.gamma_h] {
            if g < 0.0 {
                return Err(SimError::NegativeRate(g));
            }
        }
        Ok(())
    }
}

/// Heat released into the baths, work done on the system, and energies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThermoLedger {
    pub heat_released: f64,
    pub work_done: f64,
    pub energy: f64,
    pub initial_energy: f64,
}

impl ThermoLedger {
    /// `E(T) - E(0) + W + Q`, zero when the first law holds.
    pub fn first_law_residual(&self) -> f64 {
        self.energy - self.initial_energy + self.work_done + self.heat_released
    }
}

/// A validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self, SimError> {
        check_density(&m)?;
        Ok(DensityMatrix(m))
    }

    pub fn from_populations(pops: &[f64]) -> Result<Self, SimError> {
        let d = pops.len();
        let m =
            CMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(pops[i], 0.0) } else { Complex64::new(0.0, 0.0) });
        DensityMatrix::new(m)
    }

    /// Two-level state with excited population `p`.
    pub fn two_level(p: f64) -> Result<Self, SimError> {
        DensityMatrix::from_populations(&[1.0 - p, p])
    }

    /// Thermal state for level energies `energies` at inverse temperature `beta`.
    pub fn gibbs(energies: &[f64], beta: f64) -> Self {
        DensityMatrix(diag(&gibbs_weights(energies, beta)))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    /// Population of the highest level (the excited state of a qubit).
    pub fn excited_population(&self) -> f64 {
        let d = self.dim();
        self.0[(d - 1, d - 1)].re
    }

    pub(crate) fn from_unchecked(m: CMatrix) -> Self {
        DensityMatrix(m)
    }
}

fn check_density(m: &CMatrix) -> Result<(), SimError> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(SimError::InvalidState(format!("shape {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SimError::InvalidState("non-finite entry".into()));
    }
    let herm = hermiticity_error(m);
    if herm > HERMITIAN_TOL {
        return Err(SimError::InvalidState(format!("not Hermitian (error {herm:e})")));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(SimError::InvalidState(format!("trace {tr}")));
    }
    let h = hermitian_part(m);
    let min_eig = h.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig < -POSITIVITY_TOL {
        return Err(SimError::InvalidState(format!("negative eigenvalue {min_eig:e}")));
    }
    Ok(())
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let mut err: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn diag(values: &[f64]) -> CMatrix {
    let d = values.len();
    CMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(values[i], 0.0) } else { Complex64::new(0.0, 0.0) })
}

/// `Re tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc.re
}

pub fn gibbs_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Excited-state population of a qubit with gap `u` in equilibrium at `beta`.
pub fn gibbs_excited_population(beta: f64, u: f64) -> f64 {
    let a = beta * u;
    if a > 0.0 {
        let e = (-a).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + a.exp())
    }
}

/// Reset dissipator `eta tr(rho) - rho`.
pub fn reset_dissipator(eta: &CMatrix, rho: &CMatrix) -> CMatrix {
    eta * rho.trace() - rho
}

/// Heisenberg-picture adjoint of the reset dissipator, `tr(eta X) 1 - X`.
pub fn reset_dissipator_adjoint(eta: &CMatrix, x: &CMatrix) -> CMatrix {
    let d = x.nrows();
    let t = (eta * x).trace();
    CMatrix::identity(d, d) * t - x
}

/// Qubit reset dissipator toward the Gibbs state of gap `u` at `bath.beta`.
pub fn thermal_dissipator(rho: &DensityMatrix, bath: BathSpec, u: f64) -> Result<CMatrix, SimError> {
    if rho.dim() != 2 {
        return Err(SimError::DimensionMismatch { expected: 2, found: rho.dim() });
    }
    if !u.is_finite() {
        return Err(SimError::NonFiniteControl);
    }
    let n = gibbs_excited_population(bath.beta, u);
    Ok(reset_dissipator(&diag(&[1.0 - n, n]), rho.matrix()))
}

/// A controlled system coupled to a cold and a hot reset bath.
pub trait DissipatorModel: Send + Sync {
    fn dim(&self) -> usize;
    fn n_controls(&self) -> usize;
    fn baths(&self) -> TwoBaths;
    fn hamiltonian(&self, u: &[f64]) -> CMatrix;
    /// `dH/du_k`.
    fn hamiltonian_derivative(&self, u: &[f64], k: usize) -> CMatrix;
    /// Stationary state of the bath at control `u`.
    fn bath_state(&self, bath: Bath, u: &[f64]) -> CMatrix;
    /// `d eta_b / du_k`.
    fn bath_state_derivative(&self, bath: Bath, u: &[f64], k: usize) -> CMatrix;

    fn bath_dissipator(&self, bath: Bath, u: &[f64], rho: &CMatrix) -> CMatrix {
        reset_dissipator(&self.bath_state(bath, u), rho)
    }

    fn bath_dissipator_adjoint(&self, bath: Bath, u: &[f64], x: &CMatrix) -> CMatrix {
        reset_dissipator_adjoint(&self.bath_state(bath, u), x)
    }

    /// `d D^b_u[rho] / du_k`.
    fn bath_dissipator_derivative(&self, bath: Bath, u: &[f64], k: usize, rho: &CMatrix) -> CMatrix {
        self.bath_state_derivative(bath, u, k) * rho.trace()
    }
}

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Generator applied to an arbitrary matrix, no validation.
pub fn generator<M: DissipatorModel + ?Sized>(model: &M, rho: &CMatrix, u: &ControlVector) -> CMatrix {
    let p = &u.hamiltonian_params;
    let h = model.hamiltonian(p);
    let mut out = commutator(&h, rho) * (-I);
    if u.gamma_c != 0.0 {
        out += model.bath_dissipator(Bath::Cold, p, rho) * Complex64::new(u.gamma_c, 0.0);
    }
    if u.gamma_h != 0.0 {
        out += model.bath_dissipator(Bath::Hot, p, rho) * Complex64::new(u.gamma_h, 0.0);
    }
    out
}

/// Heisenberg-picture generator `L^dag[X] = i[H, X] + sum_b gamma_b D^b^dag[X]`.
pub fn generator_adjoint<M: DissipatorModel + ?Sized>(model: &M, x: &CMatrix, u: &ControlVector) -> CMatrix {
    let p = &u.hamiltonian_params;
    let h = model.hamiltonian(p);
    let mut out = commutator(&h, x) * I;
    if u.gamma_c != 0.0 {
        out += model.bath_dissipator_adjoint(Bath::Cold, p, x) * Complex64::new(u.gamma_c, 0.0);
    }
    if u.gamma_h != 0.0 {
        out += model.bath_dissipator_adjoint(Bath::Hot, p, x) * Complex64::new(u.gamma_h, 0.0);
    }
    out
}

/// `d L_u[rho] / du_k`.
pub fn generator_derivative<M: DissipatorModel + ?Sized>(
    model: &M,
    rho: &CMatrix,
    u: &ControlVector,
    k: usize,
) -> CMatrix {
    let p = &u.hamiltonian_params;
    let dh = model.hamiltonian_derivative(p, k);
    let mut out = commutator(&dh, rho) * (-I);
    for bath in [Bath::Cold, Bath::Hot] {
        let g = u.gamma(bath);
        if g != 0.0 {
            out += model.bath_dissipator_derivative(bath, p, k, rho) * Complex64::new(g, 0.0);
        }
    }
    out
}

fn check_model_inputs<M: DissipatorModel + ?Sized>(model: &M, d: usize, u: &ControlVector) -> Result<(), SimError> {
    if d != model.dim() {
        return Err(SimError::DimensionMismatch { expected: model.dim(), found: d });
    }
    u.validate(model.n_controls())
}

/// `d rho/dt` for a validated state.
pub fn lindblad_rhs<M: DissipatorModel + ?Sized>(
    model: &M,
    rho: &DensityMatrix,
    u: &ControlVector,
) -> Result<CMatrix, SimError> {
    check_model_inputs(model, rho.dim(), u)?;
    Ok(generator(model, rho.matrix(), u))
}

/// Matrix of the generator acting on column-stacked `d x d` matrices.
pub fn superoperator<M: DissipatorModel + ?Sized>(model: &M, u: &ControlVector) -> CMatrix {
    let d = model.dim();
    let mut s = CMatrix::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            let mut e = CMatrix::zeros(d, d);
            e[(i, j)] = Complex64::new(1.0, 0.0);
            let col = generator(model, &e, u);
            let c = j * d + i;
            for jj in 0..d {
                for ii in 0..d {
                    s[(jj * d + ii, c)] = col[(ii, jj)];
                }
            }
        }
    }
    s
}

/// Stationary state of the generator at fixed control.
pub fn steady_state<M: DissipatorModel + ?Sized>(model: &M, u: &ControlVector) -> Result<DensityMatrix, SimError> {
    check_model_inputs(model, model.dim(), u)?;
    let d = model.dim();
    let s = superoperator(model, u);
    let svd = s.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (imin, _) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &sv)| if sv < acc.1 { (i, sv) } else { acc });
    let row = v_t.row(imin);
    let mut rho = CMatrix::from_fn(d, d, |i, j| row[j * d + i].conj());
    let tr = rho.trace();
    if tr.norm() < 1e-300 {
        return Err(SimError::InvalidState("null vector has zero trace".into()));
    }
    rho /= tr;
    DensityMatrix::new(hermitian_part(&rho))
}
