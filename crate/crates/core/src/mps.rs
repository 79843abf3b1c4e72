//! Matrix-product-state simulation of the embedding circuit.
//!
//! The embedding is a product layer, one ascending CNOT staircase and a
//! final diagonal layer, so every cut carries Schmidt rank at most 2 and
//! the MPS is exact without truncation. Two-site gates are split by SVD and
//! only numerically zero singular values (relative size below
//! [`RANK_CUTOFF`]) are dropped.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::circuit::{build_embedding, Gate, GateSequence};
use crate::error::{Error, Result};
use crate::statevector::clamp_probability;

/// Singular values below `RANK_CUTOFF · s_max` are treated as exact zeros.
pub const RANK_CUTOFF: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Rank-3 tensor with index order (left bond, physical, right bond).
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensor {
    left: usize,
    right: usize,
    data: Vec<Complex64>,
}

impl SiteTensor {
    fn zeros(left: usize, right: usize) -> Self {
        Self {
            left,
            right,
            data: vec![ZERO; left * 2 * right],
        }
    }

    #[inline]
    fn idx(&self, l: usize, p: usize, r: usize) -> usize {
        (l * 2 + p) * self.right + r
    }

    #[inline]
    pub fn get(&self, l: usize, p: usize, r: usize) -> Complex64 {
        self.data[self.idx(l, p, r)]
    }

    #[inline]
    fn set(&mut self, l: usize, p: usize, r: usize, v: Complex64) {
        let i = self.idx(l, p, r);
        self.data[i] = v;
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.left, 2, self.right)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProductState {
    tensors: Vec<SiteTensor>,
}

impl MatrixProductState {
    pub fn zero_state(n_qubits: usize) -> Self {
        let tensors = (0..n_qubits)
            .map(|_| {
                let mut t = SiteTensor::zeros(1, 1);
                t.set(0, 0, 0, ONE);
                t
            })
            .collect();
        Self { tensors }
    }

    pub fn n_qubits(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[SiteTensor] {
        &self.tensors
    }

    /// Bond dimensions including both boundary bonds (`n + 1` entries).
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.tensors.iter().map(|t| t.left).collect();
        dims.push(self.tensors.last().map_or(1, |t| t.right));
        dims
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let t = &mut self.tensors[q];
        for l in 0..t.left {
            for r in 0..t.right {
                let (a, b) = (t.get(l, 0, r), t.get(l, 1, r));
                t.set(l, 0, r, m[0][0] * a + m[0][1] * b);
                t.set(l, 1, r, m[1][0] * a + m[1][1] * b);
            }
        }
    }

    fn apply_cnot(&mut self, q: usize) {
        let (a, b) = (&self.tensors[q], &self.tensors[q + 1]);
        let (left, mid, right) = (a.left, a.right, b.right);
        // theta as a (left·2) × (2·right) matrix with the target flipped on p1 = 1
        let theta: DMatrix<Complex64> = DMatrix::from_fn(left * 2, 2 * right, |row, col| {
            let (l, p1) = (row / 2, row % 2);
            let (p2, r) = (col / right, col % right);
            let p2_src = p2 ^ p1;
            (0..mid).map(|m| a.get(l, p1, m) * b.get(m, p2_src, r)).sum()
        });
        let svd = theta.svd(true, true);
        let u = svd.u.expect("svd requested u");
        let v_t = svd.v_t.expect("svd requested v_t");
        let s: DVector<f64> = svd.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        let s_max = s[order[0]];
        let rank = order.iter().take_while(|&&i| s[i] > RANK_CUTOFF * s_max).count().max(1);

        let mut new_a = SiteTensor::zeros(left, rank);
        let mut new_b = SiteTensor::zeros(rank, right);
        for (k, &i) in order.iter().take(rank).enumerate() {
            for row in 0..left * 2 {
                new_a.set(row / 2, row % 2, k, u[(row, i)]);
            }
            for col in 0..2 * right {
                new_b.set(k, col / right, col % right, v_t[(i, col)] * s[i]);
            }
        }
        self.tensors[q] = new_a;
        self.tensors[q + 1] = new_b;
    }

    pub fn apply_gate(&mut self, gate: Gate) {
        match gate {
            Gate::H(q) => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                self.apply_1q(q, [[h, h], [h, -h]]);
            }
            Gate::Rz(q, t) => {
                let (s, c) = (libm::sin(t / 2.0), libm::cos(t / 2.0));
                let lo = Complex64::new(c, -s);
                let hi = Complex64::new(c, s);
                self.apply_1q(q, [[lo, ZERO], [ZERO, hi]]);
            }
            Gate::Ry(q, t) => {
                let s = Complex64::new(libm::sin(t / 2.0), 0.0);
                let c = Complex64::new(libm::cos(t / 2.0), 0.0);
                self.apply_1q(q, [[c, -s], [s, c]]);
            }
            Gate::Cnot(q) => self.apply_cnot(q),
        }
    }

    pub fn apply_sequence(&mut self, gs: &GateSequence) -> Result<()> {
        if gs.n_qubits() != self.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits(),
                found: gs.n_qubits(),
            });
        }
        gs.gates().iter().for_each(|&g| self.apply_gate(g));
        Ok(())
    }

    /// QR sweep leaving every site but the last an isometry.
    pub fn left_canonicalize(&mut self) {
        for i in 0..self.tensors.len().saturating_sub(1) {
            let t = &self.tensors[i];
            let (left, right) = (t.left, t.right);
            let m = DMatrix::from_fn(left * 2, right, |row, r| t.get(row / 2, row % 2, r));
            let qr = m.qr();
            let (q, r) = (qr.q(), qr.r());
            let k = q.ncols();
            let mut new_t = SiteTensor::zeros(left, k);
            for row in 0..left * 2 {
                for j in 0..k {
                    new_t.set(row / 2, row % 2, j, q[(row, j)]);
                }
            }
            let next = &self.tensors[i + 1];
            let mut new_next = SiteTensor::zeros(k, next.right);
            for j in 0..k {
                for p in 0..2 {
                    for rr in 0..next.right {
                        let v = (0..right).map(|m| r[(j, m)] * next.get(m, p, rr)).sum();
                        new_next.set(j, p, rr, v);
                    }
                }
            }
            self.tensors[i] = new_t;
            self.tensors[i + 1] = new_next;
        }
    }

    /// Dense amplitudes, qubit 0 as the least significant index bit.
    pub fn to_amplitudes(&self) -> Vec<Complex64> {
        // partial[(prefix, bond)]
        let mut partial = vec![ONE];
        let mut bond = 1;
        for (site, t) in self.tensors.iter().enumerate() {
            let prefixes = 1usize << site;
            let mut next = vec![ZERO; prefixes * 2 * t.right];
            for prefix in 0..prefixes {
                for l in 0..bond {
                    let w = partial[prefix * bond + l];
                    if w == ZERO {
                        continue;
                    }
                    for p in 0..2 {
                        let idx = prefix | (p << site);
                        for r in 0..t.right {
                            next[idx * t.right + r] += w * t.get(l, p, r);
                        }
                    }
                }
            }
            partial = next;
            bond = t.right;
        }
        partial
    }
}

/// Exact MPS of `U(c·x)|0…0⟩`, left-canonical.
pub fn embed_mps(x: &[f64], c: f64) -> Result<MatrixProductState> {
    let gs = build_embedding(x, c)?;
    let mut mps = MatrixProductState::zero_state(gs.n_qubits());
    mps.apply_sequence(&gs)?;
    mps.left_canonicalize();
    Ok(mps)
}

/// `⟨a|b⟩` by left-to-right transfer-matrix contraction.
pub fn mps_overlap(a: &MatrixProductState, b: &MatrixProductState) -> Result<Complex64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: a.n_qubits(),
            found: b.n_qubits(),
        });
    }
    // env[la * lb_dim + lb]
    let mut env = vec![ONE];
    let (mut la_dim, mut lb_dim) = (1, 1);
    let mut scratch = Vec::new();
    for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
        // scratch[(la, p, rb)] = Σ_lb env[la, lb] · B[lb, p, rb]
        scratch.clear();
        scratch.resize(la_dim * 2 * tb.right, ZERO);
        for la in 0..la_dim {
            for lb in 0..lb_dim {
                let e = env[la * lb_dim + lb];
                for p in 0..2 {
                    for rb in 0..tb.right {
                        scratch[(la * 2 + p) * tb.right + rb] += e * tb.get(lb, p, rb);
                    }
                }
            }
        }
        let mut next = vec![ZERO; ta.right * tb.right];
        for la in 0..la_dim {
            for p in 0..2 {
                for ra in 0..ta.right {
                    let ca = ta.get(la, p, ra).conj();
                    for rb in 0..tb.right {
                        next[ra * tb.right + rb] += ca * scratch[(la * 2 + p) * tb.right + rb];
                    }
                }
            }
        }
        env = next;
        la_dim = ta.right;
        lb_dim = tb.right;
    }
    Ok(env[0])
}

/// `|⟨φ(y)|φ(x)⟩|²` from two embedded MPS.
pub fn fidelity(a: &MatrixProductState, b: &MatrixProductState) -> Result<f64> {
    clamp_probability(mps_overlap(a, b)?.norm_sqr())
}

pub fn kernel_entry_tn(x: &[f64], y: &[f64], c: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    fidelity(&embed_mps(x, c)?, &embed_mps(y, c)?)
}
