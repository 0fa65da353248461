use super::DissipatorModel;
use super::{diag, gibbs_excited_population, gibbs_weights, Bath, CMatrix, SimError, TwoBaths};

/// Qubit with `H = u |1><1|` and a reset dissipator per bath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelReset {
    pub baths: TwoBaths,
}

impl TwoLevelReset {
    pub fn new(baths: TwoBaths) -> Self {
        TwoLevelReset { baths }
    }
}

impl DissipatorModel for TwoLevelReset {
    fn dim(&self) -> usize {
        2
    }

    fn n_controls(&self) -> usize {
        1
    }

    fn baths(&self) -> TwoBaths {
        self.baths
    }

    fn hamiltonian(&self, u: &[f64]) -> CMatrix {
        diag(&[0.0, u[0]])
    }

    fn hamiltonian_derivative(&self, _u: &[f64], _k: usize) -> CMatrix {
        diag(&[0.0, 1.0])
    }

    fn bath_state(&self, bath: Bath, u: &[f64]) -> CMatrix {
        let n = gibbs_excited_population(self.baths.beta(bath), u[0]);
        diag(&[1.0 - n, n])
    }

    fn bath_state_derivative(&self, bath: Bath, u: &[f64], _k: usize) -> CMatrix {
        let beta = self.baths.beta(bath);
        let n = gibbs_excited_population(beta, u[0]);
        let dn = -beta * n * (1.0 - n);
        diag(&[-dn, dn])
    }
}

/// `d`-level system with diagonal Hamiltonian `diag(0, E_1, ..., E_{d-1})`.
/// The controls are the level energies `E_1..E_{d-1}`; the ground energy is pinned at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalReset {
    pub baths: TwoBaths,
    levels: usize,
}

impl DiagonalReset {
    pub fn new(baths: TwoBaths, levels: usize) -> Result<Self, SimError> {
        if levels < 2 {
            return Err(SimError::DimensionMismatch { expected: 2, found: levels });
        }
        Ok(DiagonalReset { baths, levels })
    }

    fn energies(&self, u: &[f64]) -> Vec<f64> {
        std::iter::once(0.0).chain(u.iter().copied()).collect()
    }
}

impl DissipatorModel for DiagonalReset {
    fn dim(&self) -> usize {
        self.levels
    }

    fn n_controls(&self) -> usize {
        self.levels - 1
    }

    fn baths(&self) -> TwoBaths {
        self.baths
    }

    fn hamiltonian(&self, u: &[f64]) -> CMatrix {
        diag(&self.energies(u))
    }

    fn hamiltonian_derivative(&self, _u: &[f64], k: usize) -> CMatrix {
        let mut e = vec![0.0; self.levels];
        e[k + 1] = 1.0;
        diag(&e)
    }

    fn bath_state(&self, bath: Bath, u: &[f64]) -> CMatrix {
        diag(&gibbs_weights(&self.energies(u), self.baths.beta(bath)))
    }

    fn bath_state_derivative(&self, bath: Bath, u: &[f64], k: usize) -> CMatrix {
        let beta = self.baths.beta(bath);
        let w = gibbs_weights(&self.energies(u), beta);
        let level = k + 1;
        let dw: Vec<f64> = (0..self.levels)
            .map(|j| {
                let delta = if j == level { 1.0 } else { 0.0 };
                -beta * w[j] * (delta - w[level])
            })
            .collect();
        diag(&dw)
    }
}
