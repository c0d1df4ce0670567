//! Hardware-efficient circuits used by the two workloads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{Circuit, Gate};

/// Two-qubit pattern of the entangling layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Entangler {
    /// CNOT(i, i+1) for i = 0..n-2.
    #[default]
    Chain,
    /// Chain plus the closing CNOT(n-1, 0).
    Ring,
}

impl Entangler {
    fn push(self, n_qubits: usize, gates: &mut Vec<Gate>) {
        for q in 0..n_qubits - 1 {
            gates.push(Gate::cnot(q, q + 1));
        }
        if self == Entangler::Ring && n_qubits > 2 {
            gates.push(Gate::cnot(n_qubits - 1, 0));
        }
    }
}

/// Single-qubit layer of the VQE circuit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum VqeRotation {
    /// RZ·RY·RZ per qubit, 3 parameters each.
    #[default]
    Euler,
    /// One RY per qubit.
    SingleRy,
}

/// Pushes RZ(θ₀) RY(θ₁) RZ(θ₂) on `qubit`, consuming three slots from `next`.
fn push_rot(qubit: usize, next: &mut usize, gates: &mut Vec<Gate>) {
    gates.push(Gate::rz(qubit, *next));
    gates.push(Gate::ry(qubit, *next + 1));
    gates.push(Gate::rz(qubit, *next + 2));
    *next += 3;
}

/// `n_blocks` repetitions of a per-qubit Euler rotation layer followed by an
/// entangling layer. d_Q = 3 · n_qubits · n_blocks.
pub fn build_qnn_ansatz(n_qubits: usize, n_blocks: usize) -> Result<Circuit> {
    build_qnn_ansatz_with(n_qubits, n_blocks, Entangler::Chain)
}

pub fn build_qnn_ansatz_with(
    n_qubits: usize,
    n_blocks: usize,
    entangler: Entangler,
) -> Result<Circuit> {
    if n_qubits < 2 || n_blocks < 1 {
        return Err(Error::Config(format!(
            "qnn ansatz needs >= 2 qubits and >= 1 block, got {n_qubits} and {n_blocks}"
        )));
    }
    let mut gates = Vec::new();
    let mut next = 0;
    for _ in 0..n_blocks {
        for q in 0..n_qubits {
            push_rot(q, &mut next, &mut gates);
        }
        entangler.push(n_qubits, &mut gates);
    }
    Circuit::new(n_qubits, gates)
}

/// The fixed 4-qubit H₂ circuit: one rotation layer then CNOT(0,1), CNOT(1,2), CNOT(2,3).
pub fn build_vqe_ansatz() -> Result<Circuit> {
    build_vqe_ansatz_with(VqeRotation::Euler)
}

pub fn build_vqe_ansatz_with(rotation: VqeRotation) -> Result<Circuit> {
    const N: usize = 4;
    let mut gates = Vec::new();
    let mut next = 0;
    for q in 0..N {
        match rotation {
            VqeRotation::Euler => push_rot(q, &mut next, &mut gates),
            VqeRotation::SingleRy => {
                gates.push(Gate::ry(q, next));
                next += 1;
            }
        }
    }
    Entangler::Chain.push(N, &mut gates);
    Circuit::new(N, gates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qnn_ansatz_counts() {
        let c = build_qnn_ansatz(6, 4).unwrap();
        assert_eq!(c.n_qubits(), 6);
        assert_eq!(c.n_params(), 72);
        assert_eq!(c.cnot_count(), 20);

        let c = build_qnn_ansatz(2, 1).unwrap();
        assert_eq!(c.n_params(), 6);
        assert_eq!(c.cnot_count(), 1);

        assert!(build_qnn_ansatz(1, 4).is_err());
        assert!(build_qnn_ansatz(6, 0).is_err());
    }

    #[test]
    fn qnn_ansatz_depth() {
        // Block 1 is three rotation layers plus a 5-deep CNOT staircase.
        // Rotations of the next block overlap the tail of the staircase, so
        // every further block adds 5 layers (traced by hand).
        let c = build_qnn_ansatz(2, 1).unwrap();
        assert_eq!(c.depth(), 4);
        let c = build_qnn_ansatz(6, 1).unwrap();
        assert_eq!(c.depth(), 8);
        let c = build_qnn_ansatz(6, 4).unwrap();
        assert_eq!(c.depth(), 23);
    }

    #[test]
    fn ring_adds_closing_cnot() {
        let c = build_qnn_ansatz_with(6, 4, Entangler::Ring).unwrap();
        assert_eq!(c.cnot_count(), 24);
        assert_eq!(c.n_params(), 72);
    }

    #[test]
    fn vqe_ansatz_layout() {
        let c = build_vqe_ansatz().unwrap();
        assert_eq!(c.n_qubits(), 4);
        assert_eq!(c.n_params(), 12);
        assert_eq!(c.cnot_count(), 3);
        assert_eq!(c.depth(), 6);

        let c = build_vqe_ansatz_with(VqeRotation::SingleRy).unwrap();
        assert_eq!(c.n_params(), 4);
        assert_eq!(c.cnot_count(), 3);
    }
}
