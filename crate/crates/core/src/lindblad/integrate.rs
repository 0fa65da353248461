//! Adaptive Dormand-Prince 5(4) integration of piecewise control protocols,
//! carrying the cumulative heat and work alongside the state.

use std::sync::Arc;

use num_complex::Complex64;

use super::{generator, trace_product, CMatrix, ControlVector, DensityMatrix, DissipatorModel, SimError, ThermoLedger};
use crate::format::fmt15;

/// Hamiltonian parameters as a function of time within one protocol piece.
pub trait ControlLaw: Send + Sync {
    /// Parameters at local time `t` (measured from the start of the piece).
    fn params(&self, t: f64) -> Vec<f64>;
    /// Time derivative of the parameters at local time `t`.
    fn params_rate(&self, t: f64) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantControl(pub Vec<f64>);

impl ControlLaw for ConstantControl {
    fn params(&self, _t: f64) -> Vec<f64> {
        self.0.clone()
    }

    fn params_rate(&self, _t: f64) -> Vec<f64> {
        vec![0.0; self.0.len()]
    }
}

/// Linear interpolation from `from` to `to` over `duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRamp {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub duration: f64,
}

impl ControlLaw for LinearRamp {
    fn params(&self, t: f64) -> Vec<f64> {
        let s = if self.duration > 0.0 { (t / self.duration).clamp(0.0, 1.0) } else { 1.0 };
        self.from.iter().zip(&self.to).map(|(a, b)| a + (b - a) * s).collect()
    }

    fn params_rate(&self, _t: f64) -> Vec<f64> {
        if self.duration > 0.0 {
            self.from.iter().zip(&self.to).map(|(a, b)| (b - a) / self.duration).collect()
        } else {
            vec![0.0; self.from.len()]
        }
    }
}

#[derive(Clone)]
pub struct ProtocolPiece {
    pub duration: f64,
    pub law: Arc<dyn ControlLaw>,
    pub gamma_c: f64,
    pub gamma_h: f64,
}

impl ProtocolPiece {
    pub fn new(duration: f64, law: Arc<dyn ControlLaw>, gamma_c: f64, gamma_h: f64) -> Self {
        ProtocolPiece { duration, law, gamma_c, gamma_h }
    }

    pub fn constant(duration: f64, params: Vec<f64>, gamma_c: f64, gamma_h: f64) -> Self {
        ProtocolPiece::new(duration, Arc::new(ConstantControl(params)), gamma_c, gamma_h)
    }

    fn control_at(&self, t: f64) -> ControlVector {
        ControlVector::new(self.law.params(t), self.gamma_c, self.gamma_h)
    }
}

impl std::fmt::Debug for ProtocolPiece {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProtocolPiece")
            .field("duration", &self.duration)
            .field("start", &self.law.params(0.0))
            .field("end", &self.law.params(self.duration))
            .field("gamma_c", &self.gamma_c)
            .field("gamma_h", &self.gamma_h)
            .finish()
    }
}

/// A sequence of pieces. Control discontinuities between pieces are sudden quenches.
#[derive(Debug, Clone, Default)]
pub struct Protocol {
    pieces: Vec<ProtocolPiece>,
}

impl Protocol {
    pub fn new() -> Self {
        Protocol::default()
    }

    pub fn from_pieces(pieces: Vec<ProtocolPiece>) -> Self {
        Protocol { pieces }
    }

    pub fn push(&mut self, piece: ProtocolPiece) {
        self.pieces.push(piece);
    }

    pub fn pieces(&self) -> &[ProtocolPiece] {
        &self.pieces
    }

    pub fn duration(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step, useful for dense output.
    pub max_step: Option<f64>,
    pub max_steps: usize,
    pub trace_tol: f64,
    pub record: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: None,
            max_steps: 5_000_000,
            trace_tol: 1e-8,
            record: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub params: Vec<f64>,
    pub gamma_c: f64,
    pub gamma_h: f64,
    pub rho: CMatrix,
    pub heat: f64,
    pub work: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub samples: Vec<Sample>,
    pub final_state: DensityMatrix,
    pub ledger: ThermoLedger,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Simulation {
    /// Time series with one row per recorded sample.
    pub fn to_csv(&self) -> String {
        let (n_ctrl, d) = match self.samples.first() {
            Some(s) => (s.params.len(), s.rho.nrows()),
            None => (0, self.final_state.dim()),
        };
        let mut cols = vec!["t".to_string()];
        if n_ctrl == 1 {
            cols.push("u".into());
        } else {
            cols.extend((0..n_ctrl).map(|k| format!("u{k}")));
        }
        cols.push("gamma_c".into());
        cols.push("gamma_h".into());
        cols.extend((0..d).map(|k| format!("p{k}")));
        cols.push("Qcum".into());
        cols.push("Wcum".into());
        let mut out = String::from("# units: t [1/gamma], u [1/beta_c], p [1], Qcum and Wcum [1/beta_c]\n");
        out.push_str(&cols.join(","));
        out.push('\n');
        for s in &self.samples {
            let mut row = vec![fmt15(s.t)];
            row.extend(s.params.iter().map(|&v| fmt15(v)));
            row.push(fmt15(s.gamma_c));
            row.push(fmt15(s.gamma_h));
            row.extend((0..d).map(|k| fmt15(s.rho[(k, k)].re)));
            row.push(fmt15(s.heat));
            row.push(fmt15(s.work));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn pack(rho: &CMatrix, heat: f64, work: f64) -> Vec<f64> {
    let mut y = Vec::with_capacity(2 * rho.len() + 2);
    for z in rho.iter() {
        y.push(z.re);
        y.push(z.im);
    }
    y.push(heat);
    y.push(work);
    y
}

fn unpack(y: &[f64], d: usize) -> CMatrix {
    CMatrix::from_iterator(d, d, (0..d * d).map(|k| Complex64::new(y[2 * k], y[2 * k + 1])))
}

fn rhs<M: DissipatorModel + ?Sized>(model: &M, piece: &ProtocolPiece, t: f64, y: &[f64], d: usize) -> Vec<f64> {
    let rho = unpack(y, d);
    let u = piece.control_at(t);
    let l = generator(model, &rho, &u);
    let h = model.hamiltonian(&u.hamiltonian_params);
    let mut dh = CMatrix::zeros(d, d);
    for (k, r) in piece.law.params_rate(t).iter().enumerate() {
        if *r != 0.0 {
            dh += model.hamiltonian_derivative(&u.hamiltonian_params, k) * Complex64::new(*r, 0.0);
        }
    }
    let dq = -trace_product(&h, &l);
    let dw = -trace_product(&rho, &dh);
    pack(&l, dq, dw)
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Integrates `rho0` through `protocol`. Piece boundaries are always step boundaries;
/// a control discontinuity there adds `-tr(rho (H_new - H_old))` to the work.
pub fn integrate<M: DissipatorModel + ?Sized>(
    model: &M,
    rho0: &DensityMatrix,
    protocol: &Protocol,
    opts: &IntegrateOptions,
) -> Result<Simulation, SimError> {
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(SimError::InvalidOption("tolerances must be positive".into()));
    }
    let d = model.dim();
    if rho0.dim() != d {
        return Err(SimError::DimensionMismatch { expected: d, found: rho0.dim() });
    }
    for piece in protocol.pieces() {
        if !(piece.duration >= 0.0 && piece.duration.is_finite()) {
            return Err(SimError::InvalidOption(format!("piece duration {}", piece.duration)));
        }
        piece.control_at(0.0).validate(model.n_controls())?;
        piece.control_at(piece.duration).validate(model.n_controls())?;
    }

    let mut y = pack(rho0.matrix(), 0.0, 0.0);
    let n = y.len();
    let mut t_global = 0.0;
    let mut samples = Vec::new();
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut h_prev: Option<f64> = None;
    let mut prev_h_matrix: Option<CMatrix> = None;
    let initial_energy = match protocol.pieces().first() {
        Some(p) => trace_product(rho0.matrix(), &model.hamiltonian(&p.law.params(0.0))),
        None => 0.0,
    };

    let record = |samples: &mut Vec<Sample>, t: f64, piece: &ProtocolPiece, local: f64, y: &[f64]| {
        samples.push(Sample {
            t,
            params: piece.law.params(local),
            gamma_c: piece.gamma_c,
            gamma_h: piece.gamma_h,
            rho: unpack(y, d),
            heat: y[n - 2],
            work: y[n - 1],
        });
    };

    for piece in protocol.pieces() {
        let h_start = model.hamiltonian(&piece.law.params(0.0));
        if let Some(h_old) = &prev_h_matrix {
            let rho = unpack(&y, d);
            y[n - 1] -= trace_product(&rho, &(&h_start - h_old));
        }
        if opts.record {
            record(&mut samples, t_global, piece, 0.0, &y);
        }

        let dur = piece.duration;
        let mut t = 0.0;
        let mut h = h_prev.unwrap_or(1e-3 * dur.max(1e-300)).min(dur);
        if let Some(hm) = opts.max_step {
            h = h.min(hm);
        }
        let mut k1 = if dur > 0.0 { rhs(model, piece, 0.0, &y, d) } else { Vec::new() };
        while t < dur {
            if accepted + rejected >= opts.max_steps {
                return Err(SimError::TooManySteps { t: t_global + t });
            }
            let remaining = dur - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let step = if last { remaining } else { h };
            if step < 1e-14 * (t_global + t).abs().max(1.0) && !last {
                return Err(SimError::StepUnderflow { t: t_global + t });
            }
            let mut ks: Vec<Vec<f64>> = Vec::with_capacity(7);
            ks.push(k1.clone());
            let mut ytmp = vec![0.0; n];
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in ks.iter().enumerate() {
                        acc += A[s][j] * kj[i];
                    }
                    ytmp[i] = y[i] + step * acc;
                }
                ks.push(rhs(model, piece, t + C[s] * step, &ytmp, d));
            }
            // ytmp holds the 5th-order solution (row 7 of A equals the weights)
            let mut err: f64 = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (j, kj) in ks.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                let sc = opts.atol + opts.rtol * y[i].abs().max(ytmp[i].abs());
                let r = (step * e / sc).abs();
                // f64::max would swallow a NaN here
                if !r.is_finite() || !ytmp[i].is_finite() {
                    err = f64::NAN;
                    break;
                }
                err = err.max(r);
            }
            if !err.is_finite() {
                rejected += 1;
                h = step * 0.1;
                if h < 1e-14 * (t_global + t).abs().max(1.0) {
                    return Err(SimError::StepUnderflow { t: t_global + t });
                }
                continue;
            }
            if err <= 1.0 {
                accepted += 1;
                t = if last { dur } else { t + step };
                y = ytmp;
                k1 = ks.pop().expect("seven stages");
                let drift = (0..d).map(|k| y[2 * (k * d + k)]).sum::<f64>() - 1.0;
                if drift.abs() > opts.trace_tol {
                    return Err(SimError::TraceDrift { t: t_global + t, drift });
                }
                if opts.record {
                    record(&mut samples, t_global + t, piece, t, &y);
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = step * fac;
                    h_prev = Some(h);
                } else {
                    h_prev = Some((step * fac).max(h));
                }
            } else {
                rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < 1e-14 * (t_global + t).abs().max(1.0) {
                    return Err(SimError::StepUnderflow { t: t_global + t });
                }
            }
            if let Some(hm) = opts.max_step {
                h = h.min(hm);
            }
        }
        t_global += dur;
        prev_h_matrix = Some(model.hamiltonian(&piece.law.params(dur)));
    }

    let rho = super::hermitian_part(&unpack(&y, d));
    let energy = match &prev_h_matrix {
        Some(hm) => trace_product(&rho, hm),
        None => initial_energy,
    };
    Ok(Simulation {
        samples,
        final_state: DensityMatrix::from_unchecked(rho),
        ledger: ThermoLedger { heat_released: y[n - 2], work_done: y[n - 1], energy, initial_energy },
        steps_accepted: accepted,
        steps_rejected: rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{gibbs_excited_population, TwoBaths, TwoLevelReset};
    use approx::assert_abs_diff_eq;

    fn qubit() -> TwoLevelReset {
        TwoLevelReset::new(TwoBaths::new(1.0, 0.3).unwrap())
    }

    #[test]
    fn relaxes_exponentially_to_gibbs() {
        let model = qubit();
        let u = 1.5;
        let n = gibbs_excited_population(1.0, u);
        let p0 = 0.45;
        let proto = Protocol::from_pieces(vec![ProtocolPiece::constant(2.0, vec![u], 1.0, 0.0)]);
        let sim =
            integrate(&model, &DensityMatrix::two_level(p0).unwrap(), &proto, &IntegrateOptions::default()).unwrap();
        for s in &sim.samples {
            let exact = n + (p0 - n) * (-s.t).exp();
            assert_abs_diff_eq!(s.rho[(1, 1)].re, exact, epsilon = 1e-9);
        }
        // constant gap: all energy change is heat
        assert_abs_diff_eq!(
            sim.ledger.heat_released,
            -u * (sim.final_state.excited_population() - p0),
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(sim.ledger.work_done, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sudden_quench_without_bath_is_pure_work() {
        let model = qubit();
        let (a, b, p) = (0.5, 2.5, 0.3);
        let proto = Protocol::from_pieces(vec![
            ProtocolPiece::constant(1.0, vec![a], 0.0, 0.0),
            ProtocolPiece::constant(1.0, vec![b], 0.0, 0.0),
        ]);
        let sim =
            integrate(&model, &DensityMatrix::two_level(p).unwrap(), &proto, &IntegrateOptions::default()).unwrap();
        assert_abs_diff_eq!(sim.ledger.heat_released, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sim.ledger.work_done, -p * (b - a), epsilon = 1e-15);
    }

    #[test]
    fn first_law_holds_for_ramp_with_both_baths() {
        let model = qubit();
        let proto = Protocol::from_pieces(vec![
            ProtocolPiece::new(0.7, Arc::new(LinearRamp { from: vec![0.5], to: vec![3.0], duration: 0.7 }), 0.6, 0.4),
            ProtocolPiece::new(0.4, Arc::new(LinearRamp { from: vec![2.0], to: vec![0.1], duration: 0.4 }), 0.0, 1.0),
        ]);
        let sim =
            integrate(&model, &DensityMatrix::two_level(0.2).unwrap(), &proto, &IntegrateOptions::default()).unwrap();
        assert!(sim.ledger.first_law_residual().abs() < 1e-9);
    }

    #[test]
    fn nan_control_underflows_with_time() {
        struct Broken;
        impl ControlLaw for Broken {
            fn params(&self, t: f64) -> Vec<f64> {
                vec![if t > 0.5 && t < 0.9 { f64::NAN } else { 1.0 }]
            }
            fn params_rate(&self, _t: f64) -> Vec<f64> {
                vec![0.0]
            }
        }
        let model = qubit();
        let proto = Protocol::from_pieces(vec![ProtocolPiece::new(1.0, Arc::new(Broken), 1.0, 0.0)]);
        let opts = IntegrateOptions { max_step: Some(0.3), ..Default::default() };
        match integrate(&model, &DensityMatrix::two_level(0.2).unwrap(), &proto, &opts) {
            Err(SimError::StepUnderflow { t }) => assert_abs_diff_eq!(t, 0.5, epsilon = 1e-6),
            other => panic!("expected underflow, got {other:?}"),
        }
    }

    #[test]
    fn csv_has_expected_header() {
        let model = qubit();
        let proto = Protocol::from_pieces(vec![ProtocolPiece::constant(0.1, vec![1.0], 0.0, 1.0)]);
        let sim =
            integrate(&model, &DensityMatrix::two_level(0.2).unwrap(), &proto, &IntegrateOptions::default()).unwrap();
        let csv = sim.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with('#'));
        assert_eq!(lines.next().unwrap(), "t,u,gamma_c,gamma_h,p0,p1,Qcum,Wcum");
    }
}
