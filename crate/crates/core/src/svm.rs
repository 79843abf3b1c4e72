//! C-SVM on precomputed kernels.
//!
//! Binary training solves the dual
//!
//! ```text
//! max  Σ α_i − ½ Σ α_i α_j y_i y_j K_ij   s.t.  0 ≤ α_i ≤ C,  Σ α_i y_i = 0
//! ```
//!
//! by SMO with second-order working-set selection. Multiclass problems use
//! one binary model per class against the rest.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{Executor, KernelMatrix, KernelMeta};
use crate::linalg;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 100_000;
/// Gram matrices with a smaller eigenvalue than `-PSD_TOL` are rejected.
pub const PSD_TOL: f64 = 1e-8;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// ±1 training labels.
    pub labels: Vec<i8>,
    pub support_idx: Vec<usize>,
    pub c: f64,
    pub iterations: usize,
    pub kernel_meta: KernelMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrModel {
    pub class_ids: Vec<u32>,
    pub binary_models: Vec<SvmModel>,
}

/// `Σ α_i − ½ αᵀQα` with `Q_ij = y_i y_j K_ij`.
pub fn dual_objective(k: &KernelMatrix, y: &[i8], alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * f64::from(y[i] * y[j]) * k.get(i, j);
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

fn validate_gram(k: &KernelMatrix) -> Result<()> {
    if !k.is_square() {
        return Err(invalid(format!(
            "training kernel must be square, got {}x{}",
            k.rows(),
            k.cols()
        )));
    }
    let asym = k.asymmetry();
    if asym > 1e-10 {
        return Err(Error::NotSymmetric(asym));
    }
    let min_eig = linalg::min_eigenvalue(&k.to_dmatrix());
    if min_eig < -PSD_TOL {
        return Err(Error::NotPositiveSemiDefinite(min_eig));
    }
    Ok(())
}

pub fn train_binary(k: &KernelMatrix, y: &[i8], c: f64, tol: f64) -> Result<SvmModel> {
    validate_gram(k)?;
    if y.len() != k.rows() {
        return Err(Error::DimensionMismatch {
            expected: k.rows(),
            found: y.len(),
        });
    }
    if y.iter().any(|&l| l != 1 && l != -1) {
        return Err(invalid("binary labels must be +1 or -1"));
    }
    if !y.contains(&1) || !y.contains(&-1) {
        return Err(Error::SingleClass);
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(invalid(format!("penalty C must be positive, got {c}")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    solve(k, y, c, tol)
}

fn solve(k: &KernelMatrix, y: &[i8], c: f64, tol: f64) -> Result<SvmModel> {
    let n = y.len();
    let yf: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
    let q = |i: usize, j: usize| yf[i] * yf[j] * k.get(i, j);
    let qd: Vec<f64> = (0..n).map(|i| k.get(i, i)).collect();
    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα − Σα
    let mut grad = vec![-1.0; n];

    let mut iterations = 0;
    loop {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] == 1 { alpha[t] < c } else { alpha[t] > 0.0 };
            if in_up && -yf[t] * grad[t] >= gmax {
                gmax = -yf[t] * grad[t];
                i_sel = Some(t);
            }
        }
        // j: second-order choice in I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let in_low = if y[t] == 1 { alpha[t] > 0.0 } else { alpha[t] < c };
                if !in_low {
                    continue;
                }
                let v = yf[t] * grad[t];
                gmax2 = gmax2.max(v);
                let grad_diff = gmax + v;
                if grad_diff > 0.0 {
                    let mut quad = qd[i] + qd[t] - 2.0 * yf[i] * yf[t] * k.get(i, t);
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gmax + gmax2 >= tol => (i, j),
            _ => break,
        };
        if iterations == MAX_ITERATIONS {
            return Err(Error::NoConvergence(MAX_ITERATIONS));
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = qd[i] + qd[j] + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
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
            let mut quad = qd[i] + qd[j] - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
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
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    let bias = -rho(&alpha, &grad, &yf, c);
    let support_idx = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SvmModel {
        alphas: alpha,
        bias,
        labels: y.to_vec(),
        support_idx,
        c,
        iterations,
        kernel_meta: k.meta.clone(),
    })
}

/// Average of `y_i G_i` over free vectors, or the midpoint of the feasible
/// interval when every α sits on a bound.
fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
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

/// `f_j = Σ_i α_i y_i K_ij + b` for every column of a train×query kernel.
pub fn decision_values(model: &SvmModel, k_cross: &KernelMatrix) -> Result<Vec<f64>> {
    if k_cross.rows() != model.alphas.len() {
        return Err(Error::DimensionMismatch {
            expected: model.alphas.len(),
            found: k_cross.rows(),
        });
    }
    let mut out = vec![model.bias; k_cross.cols()];
    for &i in &model.support_idx {
        let w = model.alphas[i] * f64::from(model.labels[i]);
        for (o, kv) in out.iter_mut().zip(k_cross.row(i)) {
            *o += w * kv;
        }
    }
    Ok(out)
}

/// Sign of the decision values with 0 mapped to +1.
pub fn predict_binary(model: &SvmModel, k_cross: &KernelMatrix) -> Result<Vec<i8>> {
    Ok(decision_values(model, k_cross)?
        .into_iter()
        .map(|v| if v >= 0.0 { 1 } else { -1 })
        .collect())
}

/// KKT violation of every training point under the model's bias.
pub fn kkt_residuals(model: &SvmModel, k_train: &KernelMatrix) -> Result<Vec<f64>> {
    let f = decision_values(model, k_train)?;
    Ok(f.iter()
        .zip(&model.alphas)
        .zip(&model.labels)
        .map(|((&fv, &a), &l)| {
            let margin = f64::from(l) * fv;
            if a <= 0.0 {
                (1.0 - margin).max(0.0)
            } else if a >= model.c {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            }
        })
        .collect())
}

pub fn train_ovr<E: Executor>(k: &KernelMatrix, y: &[u32], c: f64, tol: f64, exec: &E) -> Result<OvrModel> {
    let mut class_ids = y.to_vec();
    class_ids.sort_unstable();
    class_ids.dedup();
    if class_ids.len() < 2 {
        return Err(Error::SingleClass);
    }
    validate_gram(k)?;
    let models: Result<Vec<SvmModel>> = exec
        .map(class_ids.len(), |ci| {
            let target = class_ids[ci];
            let yb: Vec<i8> = y.iter().map(|&l| if l == target { 1 } else { -1 }).collect();
            if yb.len() != k.rows() {
                return Err(Error::DimensionMismatch {
                    expected: k.rows(),
                    found: yb.len(),
                });
            }
            solve(k, &yb, c, tol)
        })
        .into_iter()
        .collect();
    Ok(OvrModel {
        class_ids,
        binary_models: models?,
    })
}

/// Per-class decision values, `[class][query]`.
pub fn ovr_decision_values(model: &OvrModel, k_cross: &KernelMatrix) -> Result<Vec<Vec<f64>>> {
    model
        .binary_models
        .iter()
        .map(|m| decision_values(m, k_cross))
        .collect()
}

/// Argmax over per-class decision values, ties to the lowest class id.
pub fn argmax_classes(class_ids: &[u32], scores: &[Vec<f64>]) -> Vec<u32> {
    let n = scores.first().map_or(0, Vec::len);
    (0..n)
        .map(|j| {
            let mut best = 0;
            for ci in 1..scores.len() {
                if scores[ci][j] > scores[best][j] {
                    best = ci;
                }
            }
            class_ids[best]
        })
        .collect()
}

pub fn predict_ovr(model: &OvrModel, k_cross: &KernelMatrix) -> Result<Vec<u32>> {
    Ok(argmax_classes(&model.class_ids, &ovr_decision_values(model, k_cross)?))
}

/// Binary SVM for two classes, one-vs-rest otherwise, over `u32` class ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    /// The larger class id is the +1 side.
    Binary {
        negative: u32,
        positive: u32,
        model: SvmModel,
    },
    OneVsRest(OvrModel),
}

impl Classifier {
    pub fn fit<E: Executor>(k: &KernelMatrix, y: &[u32], c: f64, tol: f64, exec: &E) -> Result<Self> {
        let mut classes = y.to_vec();
        classes.sort_unstable();
        classes.dedup();
        match classes.len() {
            0 | 1 => Err(Error::SingleClass),
            2 => {
                let (negative, positive) = (classes[0], classes[1]);
                let yb: Vec<i8> = y.iter().map(|&l| if l == positive { 1 } else { -1 }).collect();
                Ok(Classifier::Binary {
                    negative,
                    positive,
                    model: train_binary(k, &yb, c, tol)?,
                })
            }
            _ => Ok(Classifier::OneVsRest(train_ovr(k, y, c, tol, exec)?)),
        }
    }

    pub fn predict(&self, k_cross: &KernelMatrix) -> Result<Vec<u32>> {
        match self {
            Classifier::Binary {
                negative,
                positive,
                model,
            } => Ok(predict_binary(model, k_cross)?
                .into_iter()
                .map(|s| if s > 0 { *positive } else { *negative })
                .collect()),
            Classifier::OneVsRest(m) => predict_ovr(m, k_cross),
        }
    }
}
