//! Kernel diagnostics, scaling fits, classification metrics and the exact
//! Wilcoxon signed-rank test.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::KernelMatrix;
use crate::linalg;

/// Off-diagonal concentration statistics of a Gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelStats {
    pub mean_offdiag: f64,
    /// Population standard deviation of the off-diagonal entries.
    pub std_offdiag: f64,
    pub n_qubits: usize,
    pub bandwidth: f64,
    pub sample_count: usize,
}

/// Mean and population std over the strict upper triangle.
pub fn kernel_stats(k: &KernelMatrix) -> Result<KernelStats> {
    let n = k.rows();
    if !k.is_square() || n < 2 {
        return Err(invalid("kernel statistics need a square matrix with N >= 2"));
    }
    let entries: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| k.get(i, j))
        .collect();
    let count = entries.len() as f64;
    let mean = entries.iter().sum::<f64>() / count;
    let var = entries.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    Ok(KernelStats {
        mean_offdiag: mean,
        std_offdiag: libm::sqrt(var),
        n_qubits: k.meta.feature_count,
        bandwidth: k.bandwidth_or_gamma(),
        sample_count: n,
    })
}

/// Off-diagonal upper-triangle entries of a square matrix.
pub fn offdiag_entries(k: &KernelMatrix) -> Vec<f64> {
    let n = k.rows().min(k.cols());
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| k.get(i, j))
        .collect()
}

/// CDF of the fidelity between two Haar-random states in dimension `2^n`:
/// `1 − (1 − F)^(2^n − 1)`.
pub fn haar_fidelity_cdf(f: f64, n_qubits: u32) -> f64 {
    let f = f.clamp(0.0, 1.0);
    if f >= 1.0 {
        return 1.0;
    }
    let exponent = libm::ldexp(1.0, n_qubits as i32) - 1.0;
    -libm::expm1(exponent * libm::log1p(-f))
}

/// Probability floor for Haar bins whose mass underflows; keeps the
/// divergence finite when many qubits push all Haar mass into the first bin.
pub const HAAR_MASS_FLOOR: f64 = 1e-300;
pub const DEFAULT_EXPRESSIBILITY_BINS: usize = 75;

/// KL divergence between the histogram of `samples` and the Haar fidelity
/// distribution over `bins` equal-width bins of [0, 1].
pub fn expressibility(samples: &[f64], n_qubits: u32, bins: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("expressibility needs at least one fidelity sample"));
    }
    if bins < 2 {
        return Err(invalid("expressibility needs at least two bins"));
    }
    let mut counts = vec![0usize; bins];
    for &s in samples {
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid(format!("fidelity sample {s} outside [0, 1]")));
        }
        let b = ((s * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let total = samples.len() as f64;
    let mut kl = 0.0;
    for (b, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        let q = (haar_fidelity_cdf(hi, n_qubits) - haar_fidelity_cdf(lo, n_qubits)).max(HAAR_MASS_FLOOR);
        let p = count as f64 / total;
        kl += p * libm::log(p / q);
    }
    Ok(kl.max(0.0))
}

/// Default `λ = 1e-6 · trace(K_C) / N`.
pub fn default_regularizer(k_c: &KernelMatrix) -> f64 {
    let n = k_c.rows();
    if n == 0 {
        return 0.0;
    }
    1e-6 * (0..n).map(|i| k_c.get(i, i)).sum::<f64>() / n as f64
}

/// `g = sqrt(‖√K_Q (K_C + λI)^(−1) √K_Q‖₂)`.
pub fn geometric_difference(k_c: &KernelMatrix, k_q: &KernelMatrix, lambda: f64) -> Result<f64> {
    if !k_c.is_square() || k_c.rows() != k_q.rows() || k_c.cols() != k_q.cols() {
        return Err(invalid("geometric difference needs equal square shapes"));
    }
    if lambda < 0.0 {
        return Err(invalid("regularizer must be non-negative"));
    }
    let n = k_c.rows();
    for k in [k_c, k_q] {
        let m = linalg::min_eigenvalue(&k.to_dmatrix());
        if m < -1e-8 {
            return Err(Error::NotPositiveSemiDefinite(m));
        }
    }
    let regularized = linalg::symmetrize(&k_c.to_dmatrix()) + DMatrix::identity(n, n) * lambda;
    let chol = regularized.cholesky().ok_or(Error::Singular)?;
    let sqrt_q = linalg::psd_sqrt(&k_q.to_dmatrix());
    let solved = chol.solve(&sqrt_q);
    let m = &sqrt_q * solved;
    let top = linalg::eigenvalues_desc(&m).first().copied().unwrap_or(0.0);
    if !top.is_finite() {
        return Err(Error::Singular);
    }
    Ok(libm::sqrt(top.max(0.0)))
}

/// Cosine of the Frobenius angle between two matrices.
pub fn alignment(k_c: &KernelMatrix, k_q: &KernelMatrix) -> Result<f64> {
    if k_c.rows() != k_q.rows() || k_c.cols() != k_q.cols() {
        return Err(invalid("alignment needs equal shapes"));
    }
    let dot: f64 = k_c.values().iter().zip(k_q.values()).map(|(a, b)| a * b).sum();
    let na = libm::sqrt(k_c.values().iter().map(|a| a * a).sum::<f64>());
    let nb = libm::sqrt(k_q.values().iter().map(|b| b * b).sum::<f64>());
    if na == 0.0 || nb == 0.0 {
        return Err(invalid("alignment of a zero matrix is undefined"));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn spectrum(k: &KernelMatrix) -> Result<Vec<f64>> {
    let asym = k.asymmetry();
    if asym > 1e-10 {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(linalg::eigenvalues_desc(&k.to_dmatrix()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    /// `log c* = a·log n + b`
    PowerLaw,
    /// `log c* = a·n + b`
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub kind: FitKind,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope·x + intercept` with `R² = 1 − SS_res/SS_tot`
/// (0 when `SS_tot = 0`).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("linear fit needs at least two paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("linear fit needs at least two distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r2 = if ss_tot == 0.0 {
        0.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r2))
}

pub fn fit_scaling(ns: &[f64], c_stars: &[f64], kind: FitKind) -> Result<ScalingFit> {
    if ns.len() != c_stars.len() || ns.len() < 3 {
        return Err(invalid("scaling fit needs at least three (n, c*) points"));
    }
    if let Some(c) = c_stars.iter().find(|&&c| !(c > 0.0)) {
        return Err(invalid(format!("c* must be positive, got {c}")));
    }
    let ys: Vec<f64> = c_stars.iter().map(|&c| libm::log(c)).collect();
    let xs: Vec<f64> = match kind {
        FitKind::PowerLaw => ns.iter().map(|&n| libm::log(n)).collect(),
        FitKind::Exponential => ns.to_vec(),
    };
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys)?;
    Ok(ScalingFit {
        kind,
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassMetrics {
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub cohen_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Metrics with `positive_class` as the positive label, when requested.
    pub binary: Option<BinaryMetrics>,
    pub multiclass: MulticlassMetrics,
    /// Metrics that were undefined (zero denominators) and reported as 0.
    pub undefined: Vec<String>,
}

fn ratio(num: f64, den: f64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0.0 {
        undefined.push(name.into());
        0.0
    } else {
        num / den
    }
}

pub fn classification_report(
    y_true: &[u32],
    y_pred: &[u32],
    positive_class: Option<u32>,
) -> Result<ClassificationReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(invalid("classification report needs at least one sample"));
    }
    let n = y_true.len() as f64;
    let mut undefined = Vec::new();
    let correct = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count() as f64;
    let accuracy = correct / n;

    let binary = positive_class.map(|pos| {
        let (mut tp, mut fp, mut tn, mut fneg) = (0.0, 0.0, 0.0, 0.0);
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == pos, p == pos) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (false, false) => tn += 1.0,
                (true, false) => fneg += 1.0,
            }
        }
        let precision = ratio(tp, tp + fp, "precision", &mut undefined);
        let recall = ratio(tp, tp + fneg, "recall", &mut undefined);
        let specificity = ratio(tn, tn + fp, "specificity", &mut undefined);
        let f1 = ratio(2.0 * precision * recall, precision + recall, "f1", &mut undefined);
        BinaryMetrics {
            accuracy,
            precision,
            recall,
            specificity,
            f1,
        }
    });

    let classes: BTreeSet<u32> = y_true.iter().chain(y_pred).copied().collect();
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    let mut p_e = 0.0;
    for &c in &classes {
        let support = y_true.iter().filter(|&&t| t == c).count() as f64;
        let predicted = y_pred.iter().filter(|&&p| p == c).count() as f64;
        let tp = y_true.iter().zip(y_pred).filter(|(&t, &p)| t == c && p == c).count() as f64;
        p_e += (support / n) * (predicted / n);
        if support == 0.0 {
            continue;
        }
        let prec = ratio(tp, predicted, &format!("precision[{c}]"), &mut undefined);
        let rec = tp / support;
        let f1 = ratio(2.0 * prec * rec, prec + rec, &format!("f1[{c}]"), &mut undefined);
        let w = support / n;
        wp += w * prec;
        wr += w * rec;
        wf += w * f1;
    }
    let cohen_kappa = if p_e >= 1.0 {
        undefined.push("cohen_kappa".into());
        0.0
    } else {
        (accuracy - p_e) / (1.0 - p_e)
    };
    Ok(ClassificationReport {
        binary,
        multiclass: MulticlassMetrics {
            accuracy,
            weighted_precision: wp,
            weighted_recall: wr,
            weighted_f1: wf,
            cohen_kappa,
        },
        undefined,
    })
}

/// Largest number of non-zero differences handled by exact enumeration.
pub const WILCOXON_EXACT_MAX: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    /// Number of non-zero differences.
    pub m: usize,
    pub p_value: f64,
}

/// Average ranks of `|d|`, 1-based, with ties sharing their mean rank.
pub fn signed_ranks(abs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0.0; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Number of sign assignments reaching each value of `2·W+`, given doubled
/// (hence integral) ranks.
pub fn signed_rank_counts(doubled_ranks: &[u64]) -> Vec<u64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Exact two-sided Wilcoxon signed-rank test: twice the smaller tail of the
/// null distribution of `W+`, capped at 1.
pub fn wilcoxon_signed_rank_exact(diffs: &[f64]) -> Result<WilcoxonResult> {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let m = nonzero.len();
    if m == 0 {
        return Err(invalid("all differences are zero"));
    }
    if m > WILCOXON_EXACT_MAX {
        return Err(invalid(format!(
            "{m} non-zero differences exceed the exact regime of {WILCOXON_EXACT_MAX}"
        )));
    }
    if nonzero.iter().any(|d| !d.is_finite()) {
        return Err(invalid("differences must be finite"));
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = signed_ranks(&abs);
    let doubled: Vec<u64> = ranks.iter().map(|r| libm::round(r * 2.0) as u64).collect();
    let w2: u64 = nonzero
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let counts = signed_rank_counts(&doubled);
    let total = libm::ldexp(1.0, m as i32);
    let w = w2 as usize;
    let lower: u64 = counts[..=w].iter().sum();
    let upper: u64 = counts[w..].iter().sum();
    let tail = lower.min(upper) as f64 / total;
    Ok(WilcoxonResult {
        w_plus: w2 as f64 / 2.0,
        m,
        p_value: (2.0 * tail).min(1.0_f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelKind;

    fn sq(n: usize, v: Vec<f64>) -> KernelMatrix {
        KernelMatrix::from_raw(n, n, v, KernelKind::Rbf).unwrap()
    }

    fn eye(n: usize, s: f64) -> KernelMatrix {
        sq(n, (0..n * n).map(|k| if k % (n + 1) == 0 { s } else { 0.0 }).collect())
    }

    #[test]
    fn stats_examples() {
        let ones = kernel_stats(&sq(3, vec![1.0; 9])).unwrap();
        assert_eq!((ones.mean_offdiag, ones.std_offdiag), (1.0, 0.0));
        let id = kernel_stats(&eye(3, 1.0)).unwrap();
        assert_eq!((id.mean_offdiag, id.std_offdiag), (0.0, 0.0));
        let k = sq(3, vec![1.0, 0.2, 0.4, 0.2, 1.0, 0.6, 0.4, 0.6, 1.0]);
        let s = kernel_stats(&k).unwrap();
        assert!((s.mean_offdiag - 0.4).abs() < 1e-15);
        assert!((s.std_offdiag - (0.08f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(kernel_stats(&sq(1, vec![1.0])).is_err());
    }

    #[test]
    fn haar_cdf_examples() {
        for f in [0.0, 0.1, 0.5, 0.93] {
            assert!((haar_fidelity_cdf(f, 1) - f).abs() < 1e-15);
        }
        assert_eq!(haar_fidelity_cdf(1.0, 7), 1.0);
        assert!((haar_fidelity_cdf(0.5, 2) - 0.875).abs() < 1e-15);
    }

    #[test]
    fn expressibility_point_mass() {
        let e = expressibility(&[1.0; 10], 1, 2).unwrap();
        assert!((e - core::f64::consts::LN_2).abs() < 1e-15);
        assert!(expressibility(&[], 1, 2).is_err());
    }

    #[test]
    fn geometric_difference_diagonal_cases() {
        assert!((geometric_difference(&eye(3, 1.0), &eye(3, 1.0), 0.0).unwrap() - 1.0).abs() < 1e-12);
        let half = core::f64::consts::FRAC_1_SQRT_2;
        assert!((geometric_difference(&eye(3, 2.0), &eye(3, 1.0), 0.0).unwrap() - half).abs() < 1e-12);
        assert!((geometric_difference(&eye(3, 1.0), &eye(3, 1.0), 1.0).unwrap() - half).abs() < 1e-12);
        assert!(geometric_difference(&sq(2, vec![0.0; 4]), &eye(2, 1.0), 0.0).is_err());
    }

    #[test]
    fn alignment_examples() {
        let k = sq(2, vec![1.0, 0.3, 0.3, 1.0]);
        let k2 = sq(2, vec![2.0, 0.6, 0.6, 2.0]);
        assert!((alignment(&k, &k).unwrap() - 1.0).abs() < 1e-15);
        assert!((alignment(&k, &k2).unwrap() - 1.0).abs() < 1e-15);
        let a = alignment(&eye(2, 1.0), &sq(2, vec![1.0; 4])).unwrap();
        assert!((a - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(alignment(&sq(2, vec![0.0; 4]), &k).is_err());
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum(&sq(4, vec![1.0; 16])).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-12 && s[1..].iter().all(|v| v.abs() < 1e-12));
        assert_eq!(spectrum(&eye(3, 1.0)).unwrap(), vec![1.0, 1.0, 1.0]);
        let d = sq(3, vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(spectrum(&d).unwrap(), vec![3.0, 2.0, 1.0]);
        assert!(spectrum(&sq(2, vec![1.0, 0.5, 0.1, 1.0])).is_err());
    }

    #[test]
    fn scaling_fit_examples() {
        let ns = [2.0, 5.0, 10.0, 50.0];
        let power: Vec<f64> = ns.iter().map(|n| 2.0 / n).collect();
        let f = fit_scaling(&ns, &power, FitKind::PowerLaw).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.intercept - core::f64::consts::LN_2).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);

        let expo: Vec<f64> = ns.iter().map(|n| (-0.1 * n).exp()).collect();
        let f = fit_scaling(&ns, &expo, FitKind::Exponential).unwrap();
        assert!((f.slope + 0.1).abs() < 1e-12 && f.intercept.abs() < 1e-12);

        let flat = fit_scaling(&ns, &[0.3; 4], FitKind::PowerLaw).unwrap();
        assert_eq!((flat.slope, flat.r_squared), (0.0, 0.0));
        assert!(fit_scaling(&ns, &[0.3, 0.0, 1.0, 1.0], FitKind::PowerLaw).is_err());
        assert!(fit_scaling(&ns[..2], &[0.3, 0.2], FitKind::PowerLaw).is_err());
    }

    #[test]
    fn report_examples() {
        let r = classification_report(&[1, 1, 0, 0], &[1, 0, 0, 0], Some(1)).unwrap();
        let b = r.binary.unwrap();
        assert_eq!(
            (b.accuracy, b.precision, b.recall, b.specificity),
            (0.75, 1.0, 0.5, 1.0)
        );
        assert!((b.f1 - 2.0 / 3.0).abs() < 1e-15);

        let perfect = classification_report(&[0, 1, 2, 1], &[0, 1, 2, 1], None).unwrap();
        assert_eq!(perfect.multiclass.cohen_kappa, 1.0);
        assert_eq!(perfect.multiclass.weighted_f1, 1.0);

        let constant = classification_report(&[0, 1, 0, 1], &[1, 1, 1, 1], Some(1)).unwrap();
        assert_eq!(constant.multiclass.cohen_kappa, 0.0);

        let none_pos = classification_report(&[0, 1], &[0, 0], Some(1)).unwrap();
        assert_eq!(none_pos.binary.unwrap().precision, 0.0);
        assert!(none_pos.undefined.iter().any(|u| u == "precision"));
        assert!(classification_report(&[0], &[0, 1], None).is_err());
    }

    #[test]
    fn wilcoxon_examples() {
        assert_eq!(
            wilcoxon_signed_rank_exact(&[1.0, 2.0, 3.0, 4.0]).unwrap().p_value,
            0.125
        );
        assert_eq!(
            wilcoxon_signed_rank_exact(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap().p_value,
            0.0625
        );
        assert_eq!(wilcoxon_signed_rank_exact(&[1.0, -1.0]).unwrap().p_value, 1.0);
        assert!(wilcoxon_signed_rank_exact(&[0.0, 0.0]).is_err());
        let with_zero = wilcoxon_signed_rank_exact(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((with_zero.m, with_zero.p_value), (4, 0.125));
    }
}
