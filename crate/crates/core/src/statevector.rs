//! Dense statevector simulation, used as the exponential-cost oracle.
//!
//! Qubit `q` is bit `q` of the amplitude index (qubit 0 least significant).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};

use crate::circuit::{build_embedding, build_loschmidt, Gate, GateSequence};
use crate::error::{invalid, Error, Result};
use crate::rng::{self, Purpose};

/// Default register cap: 2^20 amplitudes (16 MiB).
pub const DEFAULT_MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits`, refusing registers above `cap`.
    pub fn zero(n_qubits: usize, cap: usize) -> Result<Self> {
        if n_qubits > cap {
            return Err(Error::QubitCapExceeded {
                requested: n_qubits,
                cap,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
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
                let bit = 1usize << q;
                for (i, a) in self.amps.iter_mut().enumerate() {
                    *a *= if i & bit == 0 { lo } else { hi };
                }
            }
            Gate::Ry(q, t) => {
                let (s, c) = (libm::sin(t / 2.0), libm::cos(t / 2.0));
                let (s, c) = (Complex64::new(s, 0.0), Complex64::new(c, 0.0));
                self.apply_1q(q, [[c, -s], [s, c]]);
            }
            Gate::Cnot(q) => {
                let (control, target) = (1usize << q, 1usize << (q + 1));
                for i in 0..self.amps.len() {
                    if i & control != 0 && i & target == 0 {
                        self.amps.swap(i, i | target);
                    }
                }
            }
        }
    }

    pub fn apply_sequence(&mut self, gs: &GateSequence) -> Result<()> {
        if gs.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: gs.n_qubits(),
            });
        }
        gs.gates().iter().for_each(|&g| self.apply_gate(g));
        Ok(())
    }
}

pub fn apply(gs: &GateSequence, mut s: StateVector) -> Result<StateVector> {
    s.apply_sequence(gs)?;
    Ok(s)
}

/// `|φ(x)⟩ = U(c·x)|0…0⟩`.
pub fn embed_state(x: &[f64], c: f64, cap: usize) -> Result<StateVector> {
    let gs = build_embedding(x, c)?;
    apply(&gs, StateVector::zero(gs.n_qubits(), cap)?)
}

/// Clamps a probability that drifted past [0, 1] by rounding; larger
/// excursions are reported as an inconsistency.
pub fn clamp_probability(p: f64) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=1.0 + SLACK).contains(&p) {
        return Err(Error::Numerical(alloc::format!("kernel value {p} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Fidelity kernel via the Loschmidt echo: probability of reading `|0…0⟩`
/// after `U(c·x)` then `U†(c·y)`.
pub fn kernel_entry_sv(x: &[f64], y: &[f64], c: f64) -> Result<f64> {
    kernel_entry_sv_capped(x, y, c, DEFAULT_MAX_QUBITS)
}

pub fn kernel_entry_sv_capped(x: &[f64], y: &[f64], c: f64, cap: usize) -> Result<f64> {
    let gs = build_loschmidt(x, y, c)?;
    let s = apply(&gs, StateVector::zero(gs.n_qubits(), cap)?)?;
    clamp_probability(s.amps[0].norm_sqr())
}

/// Binomial estimate `k/S` of a return probability measured with `shots` runs.
pub fn shot_estimate(p: f64, shots: u64, seed: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(alloc::format!("probability {p} outside [0, 1]")));
    }
    if shots == 0 {
        return Err(invalid("at least one shot is required"));
    }
    let dist = Binomial::new(shots, p).map_err(|e| invalid(alloc::format!("{e}")))?;
    let k = dist.sample(&mut rng::stream(seed, Purpose::Shots, 0));
    Ok(k as f64 / shots as f64)
}
