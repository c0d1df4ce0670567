//! Dense-matrix cross-checks against nalgebra.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qudio::ansatz::{build_qnn_ansatz, build_vqe_ansatz};
use qudio::gradient::{qnn_expectation, vqe_energy_exact, QnnLossSpec, VqeSpec};
use qudio::linalg::exact_ground_energy;
use qudio::pauli::{expectation_pauli_sum, Hamiltonian, Pauli};
use qudio::rng;
use qudio::statevector::{Angle, Circuit, GateKind, StateVector};
use rand::Rng;

type C = Complex64;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn kron_all(ops: &[DMatrix<C>]) -> DMatrix<C> {
    ops.iter().skip(1).fold(ops[0].clone(), |acc, m| acc.kronecker(m))
}

fn single(n: usize, q: usize, op: &DMatrix<C>) -> DMatrix<C> {
    let ops: Vec<DMatrix<C>> = (0..n).map(|i| if i == q { op.clone() } else { DMatrix::identity(2, 2) }).collect();
    kron_all(&ops)
}

fn rz(phi: f64) -> DMatrix<C> {
    DMatrix::from_row_slice(2, 2, &[C::from_polar(1.0, -phi / 2.0), c(0.0, 0.0), c(0.0, 0.0), C::from_polar(1.0, phi / 2.0)])
}

fn ry(phi: f64) -> DMatrix<C> {
    let (s, co) = (phi / 2.0).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

/// Permutation matrix of CNOT with qubit 0 as the most significant bit.
fn cnot(n: usize, control: usize, target: usize) -> DMatrix<C> {
    let dim = 1 << n;
    let (cm, tm) = (1 << (n - 1 - control), 1 << (n - 1 - target));
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let j = if i & cm != 0 { i ^ tm } else { i };
        m[(j, i)] = c(1.0, 0.0);
    }
    m
}

fn pauli(p: Pauli) -> DMatrix<C> {
    let z = c(0.0, 0.0);
    match p {
        Pauli::I => DMatrix::identity(2, 2),
        Pauli::X => DMatrix::from_row_slice(2, 2, &[z, c(1.0, 0.0), c(1.0, 0.0), z]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), z, z, c(-1.0, 0.0)]),
    }
}

fn dense_hamiltonian(h: &Hamiltonian) -> DMatrix<C> {
    let dim = 1 << h.n_qubits();
    h.terms().iter().fold(DMatrix::zeros(dim, dim), |acc, t| {
        let ops: Vec<DMatrix<C>> = t.pauli.ops().iter().map(|&p| pauli(p)).collect();
        acc + kron_all(&ops) * c(t.coeff, 0.0)
    })
}

fn dense_unitary(circuit: &Circuit, params: &[f64]) -> DMatrix<C> {
    let n = circuit.n_qubits();
    circuit.gates().iter().fold(DMatrix::identity(1 << n, 1 << n), |u, g| {
        let angle = match g.angle {
            Some(Angle::Param(slot)) => params[slot],
            Some(Angle::Fixed(v)) => v,
            None => 0.0,
        };
        let m = match g.kind {
            GateKind::Rz => single(n, g.target, &rz(angle)),
            GateKind::Ry => single(n, g.target, &ry(angle)),
            GateKind::Cnot => cnot(n, g.control.unwrap(), g.target),
        };
        m * u
    })
}

fn to_dvector(s: &StateVector) -> DVector<C> {
    DVector::from_column_slice(s.amplitudes())
}

fn random_params(seed: u64, d: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, &[77]);
    (0..d).map(|_| r.random_range(-7.0..7.0)).collect()
}

fn random_state(seed: u64, n: usize) -> StateVector {
    let mut r = rng::stream(seed, &[78]);
    let amps: Vec<C> = (0..1 << n).map(|_| c(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn hamiltonian_files() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/hamiltonians");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

#[test]
fn circuit_evolution_matches_dense_product() {
    for (seed, circuit) in [(1, build_qnn_ansatz(6, 4).unwrap()), (2, build_qnn_ansatz(3, 2).unwrap()), (3, build_vqe_ansatz().unwrap())] {
        let params = random_params(seed, circuit.n_params());
        let input = random_state(seed, circuit.n_qubits());
        let ours = to_dvector(&input.evolve(&circuit, &params).unwrap());
        let dense = dense_unitary(&circuit, &params) * to_dvector(&input);
        assert!((ours - dense).norm() < 1e-12);
    }
}

#[test]
fn ground_energies_match_nalgebra_eigensolver() {
    let files = hamiltonian_files();
    assert_eq!(files.len(), 19);
    for path in files {
        let h = Hamiltonian::from_file(&path).unwrap();
        assert_eq!(h.n_qubits(), 4);
        assert_eq!(h.len(), 15);
        let dense = dense_hamiltonian(&h);
        assert!((dense.adjoint() - &dense).norm() < 1e-14);
        let lowest = dense.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let ours = exact_ground_energy(&h).unwrap();
        assert!((ours - lowest).abs() < 1e-10, "{}: {ours} vs {lowest}", path.display());
    }
}

#[test]
fn energy_expectations_match_dense_quadratic_form() {
    for path in hamiltonian_files().iter().step_by(4) {
        let h = Hamiltonian::from_file(path).unwrap();
        let spec = VqeSpec::new(build_vqe_ansatz().unwrap(), h.clone(), StateVector::from_bitstring("1100").unwrap()).unwrap();
        let dense = dense_hamiltonian(&h);
        for seed in 0..5 {
            let params = random_params(seed, 12);
            let psi = to_dvector(&spec.reference.evolve(&spec.circuit, &params).unwrap());
            let expected = (psi.adjoint() * &dense * &psi)[(0, 0)];
            assert!(expected.im.abs() < 1e-12);
            let ours = vqe_energy_exact(&params, &spec, &h.all_indices()).unwrap();
            assert!((ours - expected.re).abs() < 1e-12);
            let state = StateVector::from_amplitudes(psi.iter().copied().collect()).unwrap();
            assert!((expectation_pauli_sum(&state, &h, &h.all_indices()).unwrap() - expected.re).abs() < 1e-12);
        }
    }
}

#[test]
fn qnn_prediction_matches_dense_projector() {
    let circuit = build_qnn_ansatz(6, 4).unwrap();
    let spec = QnnLossSpec::new(circuit.clone(), 0.0).unwrap();
    let projector = single(6, 5, &DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
    for seed in 0..5 {
        let state = random_state(100 + seed, 6);
        let features: Vec<f64> = state.amplitudes().iter().map(|a| a.re).collect();
        let example = qudio::data::encode(&features, 1).unwrap();
        let params = random_params(seed, 72);
        let psi = dense_unitary(&circuit, &params) * to_dvector(&example.state);
        let expected = (psi.adjoint() * &projector * &psi)[(0, 0)].re;
        assert!((qnn_expectation(&params, &example, &spec).unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn ground_state_lies_in_the_two_determinant_sector() {
    // The H₂ ground state is a|1100⟩ + b|0011⟩ in this qubit ordering.
    let h = Hamiltonian::from_file(hamiltonian_files()[4].clone()).unwrap();
    let eig = dense_hamiltonian(&h).symmetric_eigen();
    let (k, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let v = eig.eigenvectors.column(k);
    let weight = v[0b1100].norm_sqr() + v[0b0011].norm_sqr();
    assert!((weight - 1.0).abs() < 1e-10, "{weight}");
}
