//! SMO for the C-SVM dual
//!
//! ```text
//! min  ½ αᵀQα − eᵀα   s.t.  yᵀα = 0,  0 ≤ α_i ≤ C,   Q_ij = y_i y_j K_ij
//! ```
//!
//! Working pairs are chosen by maximal violation for `i` and second-order
//! gain for `j`; iteration stops once the maximal KKT violation gap drops
//! below `tol`.

use std::borrow::Cow;

use super::kernel::KernelMatrix;

const TAU: f64 = 1e-12;

pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    /// `−ρ`: the decision function is `Σ α_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_violation: f64,
    pub dual_objective: f64,
    pub objective_trace: Vec<f64>,
}

pub(crate) fn solve(
    kernel: &KernelMatrix<'_>,
    y: &[f64],
    c: f64,
    tol: f64,
    max_iter: usize,
    trace: bool,
) -> Solution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // Gradient of the minimized objective: Qα − e.
    let mut grad = vec![-1.0; n];
    let diag: Vec<f64> = (0..n).map(|i| kernel.diag(i)).collect();
    let mut objective_trace = Vec::new();
    if trace {
        objective_trace.push(dual_objective(&alpha, &grad));
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut row_i: Cow<'_, [f64]>;
    while iterations < max_iter {
        // Select i: maximal −y_t G_t over I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if in_up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        row_i = kernel.row(i);

        // Select j: among I_low violators, the largest second-order decrease.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best_gain = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let quad = (diag[i] + diag[t] - 2.0 * row_i[t]).max(TAU);
                let gain = -(grad_diff * grad_diff) / quad;
                if gain <= best_gain {
                    best_gain = gain;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let row_j = kernel.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = (diag[i] + diag[j] - 2.0 * row_i[j]).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        // Q_ik = y_i y_k K_ik.
        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        for (k, g) in grad.iter_mut().enumerate() {
            *g += y[k] * (row_i[k] * di + row_j[k] * dj);
        }
        if trace {
            objective_trace.push(dual_objective(&alpha, &grad));
        }
    }

    let bias = -rho(&alpha, &grad, y, c);
    let kkt_violation = kkt_residual(&alpha, &grad, y, c, bias);
    Solution {
        dual_objective: dual_objective(&alpha, &grad),
        alpha,
        bias,
        iterations,
        converged,
        kkt_violation,
        objective_trace,
    }
}

/// `Σα − ½αᵀQα`, using `Qα = G + e`.
fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>()
}

fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free = 0usize;
    let mut sum_free = 0.0;
    for ((&a, &g), &yi) in alpha.iter().zip(grad).zip(y) {
        let yg = yi * g;
        if a >= c {
            if yi < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if a <= 0.0 {
            if yi > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Largest violation of the KKT conditions on the margins `y_i f(x_i)`.
fn kkt_residual(alpha: &[f64], grad: &[f64], y: &[f64], c: f64, bias: f64) -> f64 {
    alpha
        .iter()
        .zip(grad)
        .zip(y)
        .map(|((&a, &g), &yi)| {
            // y_i f(x_i) = (Qα)_i + y_i b.
            let margin = g + 1.0 + yi * bias;
            if a <= 0.0 {
                (1.0 - margin).max(0.0)
            } else if a >= c {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}
