//! LQR baseline on the limiter-free linearized plant.
//!
//! The gain comes from the discrete algebraic Riccati equation solved by
//! fixed-point iteration from `P₀ = Q` — no eigensolver is needed at
//! these dimensions, and the sampled form matches how the closed loop is
//! evaluated. The resulting gain is applied to the *full nonlinear*
//! plant (limiters active) during comparisons.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::plant::{discretize, CandidateMode, HydraulicDrive, HydraulicParams};

/// Discrete-time single-input state-space model `x⁺ = A·x + B·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiStateSpace {
    pub a: Mat,
    pub b: Vec<f64>,
    pub dt: f64,
}

impl LtiStateSpace {
    pub fn order(&self) -> usize {
        self.a.rows()
    }

    pub fn step(&self, x: &[f64], u: f64) -> Vec<f64> {
        let mut next = self.a.matvec(x);
        for (n, bi) in next.iter_mut().zip(&self.b) {
            *n += bi * u;
        }
        next
    }
}

/// Riccati solution: cost-to-go `P`, gain row `K`, and the fixed-point
/// residual at termination.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrSolution {
    pub p: Mat,
    pub k: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl LqrSolution {
    /// `u = −K·(x − x_ref)`.
    pub fn control(&self, x: &[f64], x_ref: &[f64]) -> f64 {
        -self
            .k
            .iter()
            .zip(x.iter().zip(x_ref))
            .map(|(k, (xi, ri))| k * (xi - ri))
            .sum::<f64>()
    }

    /// One CSV row of gain entries.
    pub fn gain_csv(&self) -> String {
        let mut s = String::new();
        for (i, k) in self.k.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{k}");
        }
        s.push('\n');
        s
    }
}

/// JSON export of a solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LqrRecord {
    pub gain: Vec<f64>,
    pub cost_to_go: Vec<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
    pub q_diagonal: Vec<f64>,
    pub r: f64,
}

impl LqrRecord {
    pub fn new(sol: &LqrSolution, q: &Mat, r: f64) -> Self {
        LqrRecord {
            gain: sol.k.clone(),
            cost_to_go: (0..sol.p.rows()).map(|i| sol.p.row(i).to_vec()).collect(),
            residual: sol.residual,
            iterations: sol.iterations,
            q_diagonal: (0..q.rows()).map(|i| q.at(i, i)).collect(),
            r,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("lqr record: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("lqr record: {e}")))
    }
}

/// The 4-state hydraulic model with both limiters removed, discretized
/// by zero-order hold at the configured sample period.
pub fn linearize_hydraulic(params: &HydraulicParams) -> Result<LtiStateSpace> {
    let drive = HydraulicDrive::new(params.clone())?;
    let (a_c, b_c) = drive.continuous();
    let (a_d, b_d) = discretize(&a_c, &b_c, params.dt, CandidateMode::Zoh);
    Ok(LtiStateSpace {
        a: a_d,
        b: b_d,
        dt: params.dt,
    })
}

fn riccati_rhs(sys: &LtiStateSpace, q: &Mat, r: f64, p: &Mat) -> Result<Mat> {
    let at = sys.a.transpose();
    let pa = p.mul(&sys.a);
    let atpa = at.mul(&pa);
    // v = AᵀPb, s = r + bᵀPb; the correction is the rank-one v·vᵀ/s.
    let pb = p.matvec(&sys.b);
    let v = {
        let mut v = vec![0.0; sys.order()];
        for i in 0..sys.order() {
            let mut acc = 0.0;
            for j in 0..sys.order() {
                acc += sys.a.at(j, i) * pb[j];
            }
            v[i] = acc;
        }
        v
    };
    let s = r + sys.b.iter().zip(&pb).map(|(b, pb)| b * pb).sum::<f64>();
    if !(s > 0.0) {
        return Err(Error::Numerical(format!("R + BᵀPB = {s} is not positive")));
    }
    let n = sys.order();
    let mut next = q.add(&atpa);
    for i in 0..n {
        for j in 0..n {
            next.set(i, j, next.at(i, j) - v[i] * v[j] / s);
        }
    }
    Ok(next)
}

fn symmetrize(m: &mut Mat) {
    let n = m.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m.at(i, j) + m.at(j, i));
            m.set(i, j, avg);
            m.set(j, i, avg);
        }
    }
}

/// Iterates `P ← Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA` from `P₀ = Q` until
/// `‖ΔP‖∞ < tol`, then `K = (R + BᵀPB)⁻¹BᵀPA`.
pub fn solve_lqr(sys: &LtiStateSpace, q: &Mat, r: f64, tol: f64, max_iter: usize) -> Result<LqrSolution> {
    let n = sys.order();
    if q.rows() != n || q.cols() != n {
        return Err(Error::Dimension(format!("Q must be {n}×{n}")));
    }
    if sys.b.len() != n {
        return Err(Error::Dimension(format!("B must have {n} entries")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParam(format!("R must be a positive scalar, got {r}")));
    }
    for i in 0..n {
        for j in 0..n {
            if (q.at(i, j) - q.at(j, i)).abs() > 1e-12 {
                return Err(Error::InvalidParam("Q must be symmetric".into()));
            }
        }
    }

    let mut p = q.clone();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut next = riccati_rhs(sys, q, r, &p)?;
        symmetrize(&mut next);
        let delta = next.sub(&p).max_abs();
        p = next;
        if delta < tol {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::Numerical(format!(
                "Riccati iteration did not converge within {max_iter} steps (ΔP = {delta:e})"
            )));
        }
    }

    let residual = riccati_rhs(sys, q, r, &p)?.sub(&p).max_abs();
    let pb = p.matvec(&sys.b);
    let s = r + sys.b.iter().zip(&pb).map(|(b, pb)| b * pb).sum::<f64>();
    let pa = p.mul(&sys.a);
    let mut k = vec![0.0; n];
    for j in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            acc += sys.b[i] * pa.at(i, j);
        }
        k[j] = acc / s;
    }
    Ok(LqrSolution {
        p,
        k,
        residual,
        iterations,
    })
}
