//! Discretization of continuous dynamics `ẋ = A·x + B·u` under a held input.

use serde::{Deserialize, Serialize};

use crate::linalg::Mat;

/// How a link turns its continuous dynamics into a one-sample candidate.
///
/// `Zoh` is the exact sampled solution with the input held over the
/// period; `Euler` is the forward difference. Both yield a linear
/// candidate `x⁺ = A_d·x + B_d·u`, which is what makes the limiter
/// semantics expressible with a single ReLU layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    Zoh,
    Euler,
}

/// Returns `(A_d, B_d)` with `x[k+1] = A_d·x[k] + B_d·u[k]`.
pub fn discretize(a: &Mat, b: &[f64], dt: f64, mode: CandidateMode) -> (Mat, Vec<f64>) {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.len(), n);
    match mode {
        CandidateMode::Euler => {
            let a_d = Mat::identity(n).add(&a.scale(dt));
            let b_d = b.iter().map(|v| v * dt).collect();
            (a_d, b_d)
        }
        CandidateMode::Zoh => {
            // exp([[A, B], [0, 0]]·dt) = [[A_d, B_d], [0, 1]]
            let mut aug = Mat::zeros(n + 1, n + 1);
            for i in 0..n {
                for j in 0..n {
                    aug.set(i, j, a.at(i, j) * dt);
                }
                aug.set(i, n, b[i] * dt);
            }
            let e = aug.expm();
            let mut a_d = Mat::zeros(n, n);
            let mut b_d = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    a_d.set(i, j, e.at(i, j));
                }
                b_d[i] = e.at(i, n);
            }
            (a_d, b_d)
        }
    }
}

/// Stacks `[A_d | B_d]` into the n×(n+1) candidate map applied to `[x; u]`.
pub fn candidate_matrix(a_d: &Mat, b_d: &[f64]) -> Mat {
    let n = a_d.rows();
    let mut cand = Mat::zeros(n, n + 1);
    for i in 0..n {
        for j in 0..n {
            cand.set(i, j, a_d.at(i, j));
        }
        cand.set(i, n, b_d[i]);
    }
    cand
}
