//! Weighted Pauli-sum Hamiltonians: parsing, term partitioning, eigenbasis
//! rotations and (sampled) expectation values.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::statevector::{Circuit, Gate, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis, qubit 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Self {
        Self(ops)
    }

    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    /// Bit mask (big-endian) of the qubits carrying X, Y or Z.
    fn support_mask(&self) -> usize {
        let n = self.0.len();
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .fold(0, |m, (q, _)| m | 1 << (n - 1 - q))
    }
}

/// Accumulates `coeff · P|ψ⟩` into `out`.
pub(crate) fn add_pauli_image(out: &mut [Complex64], state: &StateVector, ps: &PauliString, coeff: f64) {
    let n = ps.n_qubits();
    let (mut flip, mut sign, mut n_y) = (0usize, 0usize, 0u32);
    for (q, p) in ps.ops().iter().enumerate() {
        let bit = 1 << (n - 1 - q);
        match p {
            Pauli::I => {}
            Pauli::X => flip |= bit,
            Pauli::Y => {
                flip |= bit;
                sign |= bit;
                n_y += 1;
            }
            Pauli::Z => sign |= bit,
        }
    }
    let y_phase = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ][(n_y % 4) as usize]
        * coeff;
    for (i, a) in state.amplitudes().iter().enumerate() {
        let v = y_phase * a;
        if (i & sign).count_ones() % 2 == 0 {
            out[i ^ flip] += v;
        } else {
            out[i ^ flip] -= v;
        }
    }
}

/// Σ_{j∈subset} αⱼ Hⱼ|ψ⟩ (not normalized).
pub(crate) fn apply_pauli_sum(state: &StateVector, h: &Hamiltonian, subset: &[usize]) -> Result<StateVector> {
    if h.n_qubits() != state.n_qubits() {
        return Err(Error::InvalidDimension(format!(
            "hamiltonian on {} qubits, state on {}",
            h.n_qubits(),
            state.n_qubits()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); state.dim()];
    for &j in subset {
        let term = h
            .terms()
            .get(j)
            .ok_or_else(|| Error::InvalidPartition(format!("term index {j} out of range")))?;
        add_pauli_image(&mut out, state, &term.pauli, term.coeff);
    }
    Ok(StateVector::from_raw(state.n_qubits(), out))
}

impl FromStr for PauliString {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| format!("'{c}' is not one of I, X, Y, Z")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .and_then(|ops| {
                if ops.is_empty() {
                    Err("empty pauli word".to_string())
                } else {
                    Ok(PauliString(ops))
                }
            })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|p| write!(f, "{}", p.as_char()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub pauli: PauliString,
}

/// H = Σ αᵢ Hᵢ over Pauli strings of a common length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    n_qubits: usize,
    terms: Vec<Term>,
}

impl Hamiltonian {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let first = terms.first().ok_or(Error::Empty("hamiltonian has no terms"))?;
        let n_qubits = first.pauli.n_qubits();
        for (i, t) in terms.iter().enumerate() {
            if t.pauli.n_qubits() != n_qubits {
                return Err(Error::InvalidHamiltonian(format!(
                    "term {i} acts on {} qubits, expected {n_qubits}",
                    t.pauli.n_qubits()
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidHamiltonian(format!("term {i} has a non-finite coefficient")));
            }
        }
        Ok(Self { n_qubits, terms })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.terms.len()).collect()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        parse_hamiltonian(&std::fs::read_to_string(path)?)
    }
}

impl fmt::Display for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{:.15} {}", t.coeff, t.pauli)?;
        }
        Ok(())
    }
}

/// Parses `<coefficient> <pauli-word>` lines; blank lines and `#` comments
/// are skipped.
pub fn parse_hamiltonian(text: &str) -> Result<Hamiltonian> {
    let mut terms = Vec::new();
    let mut width = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [coeff, word] = fields[..] else {
            return Err(Error::Parse { line, msg: format!("expected 2 fields, found {}", fields.len()) });
        };
        let coeff: f64 = coeff
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("'{coeff}' is not a number") })?;
        if !coeff.is_finite() {
            return Err(Error::Parse { line, msg: "coefficient is not finite".into() });
        }
        let pauli: PauliString = word.parse().map_err(|msg| Error::Parse { line, msg })?;
        match width {
            None => width = Some(pauli.n_qubits()),
            Some(w) if w != pauli.n_qubits() => {
                return Err(Error::Parse {
                    line,
                    msg: format!("pauli word has length {}, earlier words have {w}", pauli.n_qubits()),
                })
            }
            Some(_) => {}
        }
        terms.push(Term { coeff, pauli });
    }
    if terms.is_empty() {
        return Err(Error::Empty("hamiltonian source has no terms"));
    }
    Hamiltonian::new(terms)
}

/// Q disjoint index sets covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    sets: Vec<Vec<usize>>,
}

impl Partition {
    /// Contiguous near-equal split: the first `n mod q` sets get one extra item.
    pub fn contiguous(n: usize, q: usize) -> Result<Self> {
        Self::split((0..n).collect(), q)
    }

    /// Seeded shuffle followed by a contiguous split.
    pub fn shuffled(n: usize, q: usize, seed: u64) -> Result<Self> {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(seed, &[rng::purpose::PARTITION, n as u64, q as u64]));
        Self::split(order, q)
    }

    /// Splits an ordered item list into `q` contiguous chunks of near-equal size.
    pub fn split(items: Vec<usize>, q: usize) -> Result<Self> {
        let n = items.len();
        if q == 0 || q > n {
            return Err(Error::InvalidPartition(format!("cannot split {n} items into {q} groups")));
        }
        let (base, extra) = (n / q, n % q);
        let mut sets = Vec::with_capacity(q);
        let mut rest = items.as_slice();
        for i in 0..q {
            let (head, tail) = rest.split_at(base + usize::from(i < extra));
            sets.push(head.to_vec());
            rest = tail;
        }
        Ok(Self { sets })
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    /// True when the sets are pairwise disjoint and their union is `0..n`.
    pub fn covers_exactly(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in self.sets.iter().flatten() {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

/// Splits the Hamiltonian's terms across `q` nodes. File order by default;
/// `Some(seed)` shuffles first.
pub fn partition_terms(h: &Hamiltonian, q: usize, shuffle_seed: Option<u64>) -> Result<Partition> {
    match shuffle_seed {
        None => Partition::contiguous(h.len(), q),
        Some(seed) => Partition::shuffled(h.len(), q, seed),
    }
}

/// Basis change R taking a Pauli string's eigenbasis to the computational
/// basis, with the matching ±1 eigenvalue list.
#[derive(Debug, Clone, PartialEq)]
pub struct EigStructure {
    pub rotation: Circuit,
    pub eigenvalues: Vec<f64>,
}

/// X → RY(−π/2); Y → RZ(−π/2) then RY(−π/2); I and Z need nothing.
pub fn eig_structure(ps: &PauliString) -> EigStructure {
    let n = ps.n_qubits();
    let mut gates = Vec::new();
    for (q, p) in ps.ops().iter().enumerate() {
        match p {
            Pauli::X => gates.push(Gate::ry_fixed(q, -FRAC_PI_2)),
            Pauli::Y => {
                gates.push(Gate::rz_fixed(q, -FRAC_PI_2));
                gates.push(Gate::ry_fixed(q, -FRAC_PI_2));
            }
            Pauli::I | Pauli::Z => {}
        }
    }
    let rotation = Circuit::new(n, gates).expect("basis rotations are valid by construction");
    EigStructure { rotation, eigenvalues: eigenvalues(ps) }
}

fn eigenvalues(ps: &PauliString) -> Vec<f64> {
    let mask = ps.support_mask();
    (0..1usize << ps.n_qubits())
        .map(|i| if (i & mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 })
        .collect()
}

fn rotated_probabilities(state: &StateVector, ps: &PauliString) -> Result<(Vec<f64>, Vec<f64>)> {
    if ps.n_qubits() != state.n_qubits() {
        return Err(Error::InvalidDimension(format!(
            "pauli string on {} qubits, state on {}",
            ps.n_qubits(),
            state.n_qubits()
        )));
    }
    let eig = eig_structure(ps);
    let probs = if eig.rotation.gates().is_empty() {
        state.probabilities()
    } else {
        state.evolve(&eig.rotation, &[])?.probabilities()
    };
    Ok((probs, eig.eigenvalues))
}

/// ⟨ψ|P|ψ⟩ for one Pauli string.
pub fn expectation_pauli(state: &StateVector, ps: &PauliString) -> Result<f64> {
    if ps.is_identity() {
        return Ok(1.0);
    }
    let (probs, h) = rotated_probabilities(state, ps)?;
    Ok(probs.iter().zip(&h).map(|(p, e)| p * e).sum())
}

/// Σ_{j∈subset} αⱼ ⟨ψ|Hⱼ|ψ⟩.
pub fn expectation_pauli_sum(state: &StateVector, h: &Hamiltonian, subset: &[usize]) -> Result<f64> {
    if h.n_qubits() != state.n_qubits() {
        return Err(Error::InvalidDimension(format!(
            "hamiltonian on {} qubits, state on {}",
            h.n_qubits(),
            state.n_qubits()
        )));
    }
    subset.iter().try_fold(0.0, |acc, &j| {
        let term = h
            .terms()
            .get(j)
            .ok_or_else(|| Error::InvalidPartition(format!("term index {j} out of range")))?;
        Ok(acc + term.coeff * expectation_pauli(state, &term.pauli)?)
    })
}

/// α · (1/K) Σ h[V_k] with V_k drawn from the rotated state's Born
/// distribution.
pub fn sample_pauli_expectation<R: Rng + ?Sized>(
    state: &StateVector,
    term: &Term,
    shots: u32,
    rng: &mut R,
) -> Result<f64> {
    sample_pauli_expectation_noisy(state, term, shots, 0.0, rng)
}

/// As [`sample_pauli_expectation`], measuring the globally depolarized state
/// (1 − p̃)ρ + p̃ I/2^N: outcome probabilities are mixed with the uniform law.
pub fn sample_pauli_expectation_noisy<R: Rng + ?Sized>(
    state: &StateVector,
    term: &Term,
    shots: u32,
    p_tilde: f64,
    rng: &mut R,
) -> Result<f64> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    if term.pauli.is_identity() {
        return Ok(term.coeff);
    }
    let (mut probs, h) = rotated_probabilities(state, &term.pauli)?;
    if p_tilde > 0.0 {
        let uniform = 1.0 / probs.len() as f64;
        for p in &mut probs {
            *p = (1.0 - p_tilde) * *p + p_tilde * uniform;
        }
    }
    let cdf: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p.max(0.0);
            Some(*acc)
        })
        .collect();
    let total = *cdf.last().expect("non-empty distribution");
    let last = cdf.len() - 1;
    let mut sum = 0.0;
    for _ in 0..shots {
        let u = rng.random::<f64>() * total;
        let k = cdf.partition_point(|&c| c <= u).min(last);
        sum += h[k];
    }
    Ok(term.coeff * sum / f64::from(shots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_matrix, CMatrix};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn parse_single_term() {
        let h = parse_hamiltonian("1.0 ZZ").unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.n_qubits(), 2);
    }

    #[test]
    fn parse_skips_comments_and_blank_lines() {
        let h = parse_hamiltonian("# header\n\n -0.5 XI  # trailing\n0.25 ZY\n").unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.terms()[0].coeff, -0.5);
        assert_eq!(h.terms()[1].pauli, ps("ZY"));
    }

    #[test]
    fn parse_errors_report_lines() {
        assert!(matches!(parse_hamiltonian("x 1.0 Z"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_hamiltonian("1.0 Z\n2.0 ZZ"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_hamiltonian("1.0 ZQ"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_hamiltonian("# only\n"), Err(Error::Empty(_))));
        assert!(matches!(parse_hamiltonian(""), Err(Error::Empty(_))));
    }

    #[test]
    fn display_round_trips() {
        let h = parse_hamiltonian("0.125 XYZI\n-1.5 IIII\n").unwrap();
        assert_eq!(parse_hamiltonian(&h.to_string()).unwrap(), h);
    }

    #[test]
    fn contiguous_partitions() {
        let p = Partition::contiguous(15, 1).unwrap();
        assert_eq!(p.sets(), &[(0..15).collect::<Vec<_>>()]);

        let p = Partition::contiguous(15, 15).unwrap();
        assert!(p.sets().iter().enumerate().all(|(i, s)| s == &vec![i]));

        let p = Partition::contiguous(15, 4).unwrap();
        assert_eq!(p.sizes(), vec![4, 4, 4, 3]);
        assert!(p.covers_exactly(15));

        assert!(Partition::contiguous(15, 16).is_err());
        assert!(Partition::contiguous(15, 0).is_err());
    }

    #[test]
    fn shuffled_partition_is_seeded() {
        let a = Partition::shuffled(15, 4, 9).unwrap();
        assert_eq!(a, Partition::shuffled(15, 4, 9).unwrap());
        assert!(a.covers_exactly(15));
        assert_eq!(a.sizes(), vec![4, 4, 4, 3]);
    }

    #[test]
    fn eig_structure_examples() {
        let e = eig_structure(&ps("Z"));
        assert!(e.rotation.gates().is_empty());
        assert_eq!(e.eigenvalues, vec![1.0, -1.0]);

        let e = eig_structure(&ps("II"));
        assert!(e.rotation.gates().is_empty());
        assert_eq!(e.eigenvalues, vec![1.0; 4]);

        let e = eig_structure(&ps("XZ"));
        assert!(e.rotation.gates().iter().all(|g| g.target == 0 && g.control.is_none()));
        assert_eq!(e.eigenvalues, vec![1.0, -1.0, -1.0, 1.0]);
    }

    /// Dense matrix of a single-qubit-only circuit.
    fn circuit_matrix(c: &Circuit) -> CMatrix {
        let dim = 1 << c.n_qubits();
        let mut m = CMatrix::zeros(dim);
        for col in 0..dim {
            let bits: Vec<u8> =
                (0..c.n_qubits()).map(|q| ((col >> (c.n_qubits() - 1 - q)) & 1) as u8).collect();
            let out = StateVector::basis(&bits).unwrap().evolve(c, &[]).unwrap();
            for (row, a) in out.amplitudes().iter().enumerate() {
                m.set(row, col, *a);
            }
        }
        m
    }

    #[test]
    fn rotation_diagonalizes_every_short_pauli_string() {
        let letters = ['I', 'X', 'Y', 'Z'];
        for n in 1..=3usize {
            for code in 0..4usize.pow(n as u32) {
                let word: String =
                    (0..n).map(|q| letters[(code / 4usize.pow(q as u32)) % 4]).collect();
                let p = ps(&word);
                let e = eig_structure(&p);
                assert!(e.rotation.gates().iter().all(|g| g.control.is_none()));
                let r = circuit_matrix(&e.rotation);
                let d = r.mul(&pauli_matrix(&p)).mul(&r.adjoint());
                for i in 0..d.dim() {
                    for j in 0..d.dim() {
                        let expected = if i == j { Complex64::new(e.eigenvalues[i], 0.0) } else { Complex64::new(0.0, 0.0) };
                        assert!((d.get(i, j) - expected).norm() < 1e-12, "{word} at ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn expectation_examples() {
        let zero = StateVector::zero(1).unwrap();
        let z = parse_hamiltonian("1.0 Z").unwrap();
        let x = parse_hamiltonian("1.0 X").unwrap();
        assert_abs_diff_eq!(expectation_pauli_sum(&zero, &z, &[0]).unwrap(), 1.0);
        assert_abs_diff_eq!(expectation_pauli_sum(&zero, &x, &[0]).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(expectation_pauli_sum(&zero, &z, &[]).unwrap(), 0.0);
        let two = StateVector::zero(2).unwrap();
        assert!(expectation_pauli_sum(&two, &z, &[0]).is_err());
    }

    #[test]
    fn degenerate_sampling_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = StateVector::zero(1).unwrap();
        let z = Term { coeff: 1.0, pauli: ps("Z") };
        for k in [1, 7, 100] {
            assert_eq!(sample_pauli_expectation(&zero, &z, k, &mut rng).unwrap(), 1.0);
        }
        let id = Term { coeff: -0.3, pauli: ps("III") };
        let s = StateVector::zero(3).unwrap();
        assert_eq!(sample_pauli_expectation(&s, &id, 5, &mut rng).unwrap(), -0.3);

        let plus = zero.apply(&Gate::ry_fixed(0, FRAC_PI_2), &[]).unwrap();
        let x = Term { coeff: 1.0, pauli: ps("X") };
        let m = sample_pauli_expectation(&plus, &x, 1_000_000, &mut rng).unwrap();
        assert!((m - 1.0).abs() <= 4e-3);

        assert!(matches!(sample_pauli_expectation(&plus, &x, 0, &mut rng), Err(Error::ZeroShots)));
    }

    #[test]
    fn fully_depolarized_sampling_averages_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = StateVector::zero(2).unwrap();
        let zz = Term { coeff: 1.0, pauli: ps("ZZ") };
        let m = sample_pauli_expectation_noisy(&s, &zz, 400_000, 1.0, &mut rng).unwrap();
        // ±1 outcomes with mean 0: standard error 1/sqrt(K)
        assert!(m.abs() <= 4.0 / 400_000f64.sqrt());
    }
}
