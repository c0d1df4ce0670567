//! Dense matrices for small registers and the exact ground-energy oracle.
//!
//! Eigenvalues come from Householder tridiagonalization followed by
//! Sturm-sequence bisection. A complex Hermitian matrix A + iB is handled
//! through its real symmetric embedding [[A, -B], [B, A]], whose spectrum is
//! that of the original with every eigenvalue doubled.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{Hamiltonian, Pauli, PauliString};
use crate::statevector::StateVector;

/// Largest register accepted by [`exact_ground_energy`].
pub const MAX_DENSE_QUBITS: usize = 12;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.dim + col] = v;
    }

    fn add_at(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.dim + col] += v;
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.add_at(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    /// ⟨ψ|M|ψ⟩.
    pub fn expectation(&self, state: &StateVector) -> Complex64 {
        let a = state.amplitudes();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim {
            let row: Complex64 = (0..self.dim).map(|j| self.get(i, j) * a[j]).sum();
            acc += a[i].conj() * row;
        }
        acc
    }

    fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im.abs() <= 1e-15 * (1.0 + z.re.abs()))
    }
}

/// Dense matrix of a Pauli string (qubit 0 is the leftmost Kronecker factor).
pub fn pauli_matrix(ps: &PauliString) -> CMatrix {
    let n = ps.n_qubits();
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim);
    for col in 0..dim {
        let mut row = col;
        let mut phase = Complex64::new(1.0, 0.0);
        for (q, p) in ps.ops().iter().enumerate() {
            let shift = n - 1 - q;
            let bit = (col >> shift) & 1;
            match p {
                Pauli::I => {}
                Pauli::X => row ^= 1 << shift,
                Pauli::Y => {
                    row ^= 1 << shift;
                    // Y|0> = i|1>, Y|1> = -i|0>
                    phase *= if bit == 0 { Complex64::new(0.0, 1.0) } else { Complex64::new(0.0, -1.0) };
                }
                Pauli::Z => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
            }
        }
        m.set(row, col, phase);
    }
    m
}

pub fn hamiltonian_matrix(h: &Hamiltonian) -> CMatrix {
    let dim = 1usize << h.n_qubits();
    let mut m = CMatrix::zeros(dim);
    for t in h.terms() {
        let p = pauli_matrix(&t.pauli);
        for (acc, v) in m.data.iter_mut().zip(&p.data) {
            *acc += t.coeff * v;
        }
    }
    m
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let n = m.dim;
    if m.is_real() {
        let mut a: Vec<f64> = m.data.iter().map(|z| z.re).collect();
        return symmetric_eigenvalues(&mut a, n);
    }
    let big = 2 * n;
    let mut a = vec![0.0; big * big];
    for i in 0..n {
        for j in 0..n {
            let z = m.get(i, j);
            a[i * big + j] = z.re;
            a[(i + n) * big + j + n] = z.re;
            a[i * big + j + n] = -z.im;
            a[(i + n) * big + j] = z.im;
        }
    }
    let all = symmetric_eigenvalues(&mut a, big);
    all.into_iter().step_by(2).collect()
}

/// Smallest eigenvalue of the dense Hamiltonian matrix.
pub fn exact_ground_energy(h: &Hamiltonian) -> Result<f64> {
    if h.n_qubits() > MAX_DENSE_QUBITS {
        return Err(Error::TooLarge(h.n_qubits()));
    }
    let m = hamiltonian_matrix(h);
    Ok(hermitian_eigenvalues(&m)[0])
}

/// Eigenvalues (ascending) of the real symmetric row-major `a` (destroyed).
pub fn symmetric_eigenvalues(a: &mut [f64], n: usize) -> Vec<f64> {
    let (diag, off) = tridiagonalize(a, n);
    (0..n).map(|k| kth_tridiagonal_eigenvalue(&diag, &off, k)).collect()
}

/// Householder reduction to tridiagonal form. Returns (diagonal, sub-diagonal).
fn tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let at = |i: usize, j: usize| i * n + j;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let norm = (lo..n).map(|i| a[at(i, k)].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[at(lo, k)];
        let alpha = if x0 > 0.0 { -norm } else { norm };
        for i in lo..n {
            v[i] = a[at(i, k)];
        }
        v[lo] -= alpha;
        let vnorm = (lo..n).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for x in &mut v[lo..n] {
            *x /= vnorm;
        }
        // q = A v - (vᵀ A v) v on the trailing block; A ← A - 2 v qᵀ - 2 q vᵀ
        for i in lo..n {
            p[i] = (lo..n).map(|j| a[at(i, j)] * v[j]).sum();
        }
        let kappa: f64 = (lo..n).map(|i| v[i] * p[i]).sum();
        for i in lo..n {
            p[i] -= kappa * v[i];
        }
        for i in lo..n {
            for j in lo..n {
                a[at(i, j)] -= 2.0 * (v[i] * p[j] + p[i] * v[j]);
            }
        }
        a[at(lo, k)] = alpha;
        a[at(k, lo)] = alpha;
        for i in lo + 1..n {
            a[at(i, k)] = 0.0;
            a[at(k, i)] = 0.0;
        }
    }
    let diag = (0..n).map(|i| a[at(i, i)]).collect();
    let off = (0..n.saturating_sub(1)).map(|i| a[at(i + 1, i)]).collect();
    (diag, off)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (1.0 + x.abs());
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn kth_tridiagonal_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let n = diag.len();
    let radius = |i: usize| {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    lo -= pad;
    hi += pad;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
