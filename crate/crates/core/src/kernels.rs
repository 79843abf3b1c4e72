//! Kernel matrices for the fidelity quantum kernel and the Gaussian RBF.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mps::{embed_mps, fidelity, MatrixProductState};
use crate::statevector::{kernel_entry_sv_capped, DEFAULT_MAX_QUBITS};

/// Runs independent jobs and returns their results in index order.
///
/// Implementations may schedule however they like; results must not depend
/// on scheduling.
pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs jobs in order on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    FidelityQuantum,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Matrix-product-state overlaps.
    Tn,
    /// Dense statevector Loschmidt echo.
    Sv,
}

/// Which kernel to evaluate and with which scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    FidelityQuantum {
        bandwidth: f64,
        backend: Backend,
        #[serde(default = "default_cap")]
        sv_max_qubits: usize,
    },
    Rbf {
        gamma: f64,
    },
}

fn default_cap() -> usize {
    DEFAULT_MAX_QUBITS
}

impl KernelSpec {
    pub fn quantum(bandwidth: f64, backend: Backend) -> Self {
        KernelSpec::FidelityQuantum {
            bandwidth,
            backend,
            sv_max_qubits: DEFAULT_MAX_QUBITS,
        }
    }

    pub fn rbf(gamma: f64) -> Self {
        KernelSpec::Rbf { gamma }
    }

    /// Same effective bandwidth `c` for either kernel family; the RBF uses
    /// `gamma = c²`.
    pub fn with_bandwidth(kind: KernelKind, c: f64, backend: Backend) -> Self {
        match kind {
            KernelKind::FidelityQuantum => Self::quantum(c, backend),
            KernelKind::Rbf => Self::rbf(gamma_from_bandwidth(c)),
        }
    }

    pub fn kind(&self) -> KernelKind {
        match self {
            KernelSpec::FidelityQuantum { .. } => KernelKind::FidelityQuantum,
            KernelSpec::Rbf { .. } => KernelKind::Rbf,
        }
    }

    /// Bandwidth `c` for the quantum kernel, `gamma` for the RBF.
    pub fn scale(&self) -> f64 {
        match *self {
            KernelSpec::FidelityQuantum { bandwidth, .. } => bandwidth,
            KernelSpec::Rbf { gamma } => gamma,
        }
    }

    pub fn backend(&self) -> Option<Backend> {
        match *self {
            KernelSpec::FidelityQuantum { backend, .. } => Some(backend),
            KernelSpec::Rbf { .. } => None,
        }
    }
}

pub fn gamma_from_bandwidth(c: f64) -> f64 {
    c * c
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelMeta {
    pub backend: Option<Backend>,
    pub feature_count: usize,
    pub dataset_hash: String,
}

/// Row-major Gram (symmetric) or cross kernel matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    kind: KernelKind,
    /// `c` for the quantum kernel, `gamma` for the RBF.
    bandwidth_or_gamma: f64,
    symmetric: bool,
    pub meta: KernelMeta,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl KernelMatrix {
    /// Validates entry range, and symmetry plus unit diagonal when `symmetric`.
    pub fn new(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        kind: KernelKind,
        bandwidth_or_gamma: f64,
        symmetric: bool,
        meta: KernelMeta,
    ) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Numerical(format!("kernel entry {v} outside [0, 1]")));
        }
        let m = Self {
            rows,
            cols,
            values,
            kind,
            bandwidth_or_gamma,
            symmetric,
            meta,
        };
        if symmetric {
            if rows != cols {
                return Err(invalid("symmetric kernel matrix must be square"));
            }
            let dev = m.asymmetry();
            if dev > SYMMETRY_TOL {
                return Err(Error::NotSymmetric(dev));
            }
            if (0..rows).any(|i| (m.get(i, i) - 1.0).abs() > SYMMETRY_TOL) {
                return Err(Error::Numerical("Gram diagonal is not 1".into()));
            }
        }
        Ok(m)
    }

    /// Unvalidated matrix for diagnostics on arbitrary inputs.
    pub fn from_raw(rows: usize, cols: usize, values: Vec<f64>, kind: KernelKind) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            values,
            kind,
            bandwidth_or_gamma: 0.0,
            symmetric: false,
            meta: KernelMeta::default(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric_gram(&self) -> bool {
        self.symmetric
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn bandwidth_or_gamma(&self) -> f64 {
        self.bandwidth_or_gamma
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest `|K_ij − K_ji|`; infinite for non-square matrices.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                dev = dev.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        dev
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    /// Rows and columns restricted to `idx` (square matrices only).
    pub fn principal_submatrix(&self, idx: &[usize]) -> Result<Self> {
        if !self.is_square() {
            return Err(invalid("principal submatrix of a non-square matrix"));
        }
        let values = idx
            .iter()
            .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Ok(Self {
            rows: idx.len(),
            cols: idx.len(),
            values,
            ..self.clone()
        })
    }
}

/// `exp(−gamma·‖x − y‖²)`.
pub fn rbf_entry(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::exp(-gamma * d2))
}

fn check_dims(rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Result<usize> {
    let d = rows.first().or(cols.first()).map_or(0, Vec::len);
    if d == 0 {
        return Err(invalid("kernel inputs need at least one feature"));
    }
    for s in rows.iter().chain(cols) {
        if s.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.len(),
            });
        }
    }
    Ok(d)
}

fn mps_cache<E: Executor>(samples: &[Vec<f64>], c: f64, exec: &E) -> Result<Vec<MatrixProductState>> {
    exec.map(samples.len(), |i| embed_mps(&samples[i], c))
        .into_iter()
        .collect()
}

/// Kernel matrix between two sample lists.
///
/// Identical lists produce a symmetric Gram matrix: only the upper triangle
/// is evaluated and the diagonal is checked against 1. Quantum states are
/// embedded once per sample and reused for every pair.
pub fn kernel_matrix<E: Executor>(
    rows: &[Vec<f64>],
    cols: &[Vec<f64>],
    spec: &KernelSpec,
    exec: &E,
) -> Result<KernelMatrix> {
    let d = check_dims(rows, cols)?;
    let symmetric = rows == cols;
    let (nr, nc) = (rows.len(), cols.len());

    let row_values: Vec<Result<Vec<f64>>> = match *spec {
        KernelSpec::FidelityQuantum {
            bandwidth,
            backend: Backend::Tn,
            ..
        } => {
            let left = mps_cache(rows, bandwidth, exec)?;
            let right_owned;
            let right = if symmetric {
                &left
            } else {
                right_owned = mps_cache(cols, bandwidth, exec)?;
                &right_owned
            };
            exec.map(nr, |i| {
                let start = if symmetric { i } else { 0 };
                (start..nc).map(|j| fidelity(&right[j], &left[i])).collect()
            })
        }
        KernelSpec::FidelityQuantum {
            bandwidth,
            backend: Backend::Sv,
            sv_max_qubits,
        } => {
            if d > sv_max_qubits {
                return Err(Error::QubitCapExceeded {
                    requested: d,
                    cap: sv_max_qubits,
                });
            }
            exec.map(nr, |i| {
                let start = if symmetric { i } else { 0 };
                (start..nc)
                    .map(|j| kernel_entry_sv_capped(&rows[i], &cols[j], bandwidth, sv_max_qubits))
                    .collect()
            })
        }
        KernelSpec::Rbf { gamma } => {
            rbf_entry(&rows[0], &cols[0], gamma)?;
            exec.map(nr, |i| {
                let start = if symmetric { i } else { 0 };
                (start..nc).map(|j| rbf_entry(&rows[i], &cols[j], gamma)).collect()
            })
        }
    };

    let mut values = vec![0.0; nr * nc];
    for (i, row) in row_values.into_iter().enumerate() {
        let row = row?;
        if symmetric {
            if (row[0] - 1.0).abs() > 1e-10 {
                return Err(Error::Numerical(format!("self-similarity of sample {i} is {}", row[0])));
            }
            values[i * nc + i] = 1.0;
            for (off, v) in row.into_iter().enumerate().skip(1) {
                let j = i + off;
                values[i * nc + j] = v;
                values[j * nc + i] = v;
            }
        } else {
            values[i * nc..(i + 1) * nc].copy_from_slice(&row);
        }
    }
    let meta = KernelMeta {
        backend: spec.backend(),
        feature_count: d,
        dataset_hash: String::new(),
    };
    KernelMatrix::new(nr, nc, values, spec.kind(), spec.scale(), symmetric, meta)
}

pub fn rbf_matrix<E: Executor>(rows: &[Vec<f64>], cols: &[Vec<f64>], gamma: f64, exec: &E) -> Result<KernelMatrix> {
    kernel_matrix(rows, cols, &KernelSpec::rbf(gamma), exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_closed_forms() {
        assert_eq!(rbf_entry(&[0.3, 0.4], &[0.3, 0.4], 2.0).unwrap(), 1.0);
        assert_eq!(rbf_entry(&[0.0, 0.0], &[1.0, 1.0], 1e-300).unwrap(), 1.0);
        let v = rbf_entry(&[0.0, 0.0], &[1.0, 1.0], 0.5).unwrap();
        assert!((v - 0.367_879_441_171_442_3).abs() < 1e-12);
        assert!(rbf_entry(&[0.0], &[1.0], 0.0).is_err());
        assert!(rbf_entry(&[0.0], &[1.0], -1.0).is_err());
    }

    #[test]
    fn rbf_small_matrices() {
        let one = rbf_matrix(&[vec![0.2, 0.1]], &[vec![0.2, 0.1]], 3.0, &Sequential).unwrap();
        assert_eq!(one.values(), &[1.0]);
        let two = vec![vec![0.0], vec![1.0]];
        let k = rbf_matrix(&two, &two, 1.0, &Sequential).unwrap();
        assert!((k.get(0, 1) - libm::exp(-1.0)).abs() < 1e-15);
        assert!(k.is_symmetric_gram());
    }

    #[test]
    fn quantum_gram_is_symmetric_with_unit_diagonal() {
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..4).map(|j| ((i * 7 + j * 3) % 10) as f64 / 10.0).collect())
            .collect();
        let k = kernel_matrix(&xs, &xs, &KernelSpec::quantum(1.0, Backend::Tn), &Sequential).unwrap();
        assert!(k.asymmetry() <= 1e-12);
        assert!((0..5).all(|i| k.get(i, i) == 1.0));
        let sv = kernel_matrix(&xs, &xs, &KernelSpec::quantum(1.0, Backend::Sv), &Sequential).unwrap();
        for (a, b) in k.values().iter().zip(sv.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn sv_backend_respects_cap() {
        let xs = vec![vec![0.1; 6]];
        let spec = KernelSpec::FidelityQuantum {
            bandwidth: 1.0,
            backend: Backend::Sv,
            sv_max_qubits: 4,
        };
        assert!(matches!(
            kernel_matrix(&xs, &xs, &spec, &Sequential),
            Err(Error::QubitCapExceeded { .. })
        ));
    }

    #[test]
    fn mismatched_dims_rejected() {
        let a = vec![vec![0.1, 0.2]];
        let b = vec![vec![0.1]];
        assert!(kernel_matrix(&a, &b, &KernelSpec::rbf(1.0), &Sequential).is_err());
    }

    #[test]
    fn bandwidth_parity() {
        assert_eq!(
            KernelSpec::with_bandwidth(KernelKind::Rbf, 0.3, Backend::Tn).scale(),
            0.09
        );
    }
}
