//! Gate sequences for the angle-encoding embedding and its Loschmidt echo.
//!
//! Conventions: `RZ(θ) = exp(−iθZ/2)`, `RY(θ) = exp(−iθY/2)`, qubits are
//! 0-based and `CNOT` always acts on a nearest-neighbour pair with control
//! `q` and target `q + 1`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    Rz(usize, f64),
    Ry(usize, f64),
    /// Control `q`, target `q + 1`.
    Cnot(usize),
}

impl Gate {
    pub fn inverse(self) -> Self {
        match self {
            Gate::Rz(q, t) => Gate::Rz(q, -t),
            Gate::Ry(q, t) => Gate::Ry(q, -t),
            g => g,
        }
    }

    /// Highest qubit index the gate touches.
    pub fn max_site(self) -> usize {
        match self {
            Gate::H(q) | Gate::Rz(q, _) | Gate::Ry(q, _) => q,
            Gate::Cnot(q) => q + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSequence {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl GateSequence {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            if g.max_site() >= n_qubits {
                return Err(invalid(format!("{g:?} outside a {n_qubits}-qubit register")));
            }
            if let Gate::Rz(_, t) | Gate::Ry(_, t) = g {
                if !t.is_finite() {
                    return Err(invalid(format!("non-finite rotation angle in {g:?}")));
                }
            }
        }
        Ok(Self { n_qubits, gates })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// One gate per line: kind, sites, angle with 17 significant digits.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let _ = match *g {
                Gate::H(q) => writeln!(out, "H {q}"),
                Gate::Rz(q, t) => writeln!(out, "RZ {q} {t:.16e}"),
                Gate::Ry(q, t) => writeln!(out, "RY {q} {t:.16e}"),
                Gate::Cnot(q) => writeln!(out, "CNOT {q} {}", q + 1),
            };
        }
        out
    }
}

/// `U(c·x)`: per qubit `H, RZ, RY`; then the ascending CNOT staircase; then
/// a final `RZ` layer. Angles are `c·x_q`.
pub fn build_embedding(x: &[f64], c: f64) -> Result<GateSequence> {
    let d = x.len();
    if d == 0 {
        return Err(invalid("embedding needs at least one feature"));
    }
    if !c.is_finite() {
        return Err(invalid("bandwidth must be finite"));
    }
    let mut gates = Vec::with_capacity(5 * d - 1);
    for (q, &v) in x.iter().enumerate() {
        let angle = c * v;
        gates.push(Gate::H(q));
        gates.push(Gate::Rz(q, angle));
        gates.push(Gate::Ry(q, angle));
    }
    gates.extend((0..d - 1).map(Gate::Cnot));
    gates.extend(x.iter().enumerate().map(|(q, &v)| Gate::Rz(q, c * v)));
    GateSequence::new(d, gates)
}

pub fn adjoint(gs: &GateSequence) -> GateSequence {
    GateSequence {
        n_qubits: gs.n_qubits,
        gates: gs.gates.iter().rev().map(|g| g.inverse()).collect(),
    }
}

/// `U†(c·y) U(c·x)` as one sequence, applied left to right.
pub fn build_loschmidt(x: &[f64], y: &[f64], c: f64) -> Result<GateSequence> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let mut seq = build_embedding(x, c)?;
    seq.gates.extend(adjoint(&build_embedding(y, c)?).gates);
    Ok(seq)
}
