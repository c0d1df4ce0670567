//! Dense pure-state simulation over the gate set {RZ, RY, CNOT}.
//!
//! Qubit 0 is the most significant bit of a basis-state index, so the
//! bitstring `1100` addresses amplitude 12.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitude vector of an `n_qubits` pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩ on `n_qubits`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidDimension("a register needs at least one qubit".into()));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Computational basis state from a bit list, qubit 0 first.
    pub fn basis(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidDimension("empty bitstring".into()));
        }
        let mut index = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::InvalidDimension(format!("bit value {b} is not 0 or 1")));
            }
            index = (index << 1) | b as usize;
        }
        let mut state = Self::zero(bits.len())?;
        state.amplitudes[0] = Complex64::new(0.0, 0.0);
        state.amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    /// Parses strings such as `"1100"`.
    pub fn from_bitstring(bits: &str) -> Result<Self> {
        let parsed: Vec<u8> = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidDimension(format!("'{other}' is not a bit"))),
            })
            .collect::<Result<_>>()?;
        Self::basis(&parsed)
    }

    /// Wraps an amplitude vector; length must be a power of two and the
    /// vector must be normalized to within 1e-10.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidDimension(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDimension(format!("state norm^2 is {norm}, expected 1")));
        }
        Ok(Self { n_qubits: len.trailing_zeros() as usize, amplitudes })
    }

    /// Wraps an arbitrary vector of length 2^n_qubits without the norm check
    /// (used for H|ψ⟩-style intermediates).
    pub(crate) fn from_raw(n_qubits: usize, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_qubits);
        Self { n_qubits, amplitudes }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Born-rule distribution over basis states.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Returns the state after one gate.
    pub fn apply(&self, gate: &Gate, params: &[f64]) -> Result<Self> {
        gate.validate(self.n_qubits)?;
        let angle = gate.resolve_angle(params)?;
        let mut out = self.clone();
        out.apply_unchecked(gate, angle);
        Ok(out)
    }

    /// Returns U(θ)|ψ⟩.
    pub fn evolve(&self, circuit: &Circuit, params: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.evolve_in_place(circuit, params)?;
        Ok(out)
    }

    pub(crate) fn evolve_in_place(&mut self, circuit: &Circuit, params: &[f64]) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::InvalidDimension(format!(
                "circuit acts on {} qubits, state has {}",
                circuit.n_qubits, self.n_qubits
            )));
        }
        circuit.check_params(params)?;
        for gate in &circuit.gates {
            let angle = gate.angle.map(|a| a.value(params)).unwrap_or(0.0);
            self.apply_unchecked(gate, angle);
        }
        Ok(())
    }

    /// Evolves through `circuit` with the angle of gate `index` offset by
    /// `shift`. Dimensions and parameter length must already be checked.
    pub(crate) fn evolve_shifted_unchecked(&mut self, circuit: &Circuit, params: &[f64], index: usize, shift: f64) {
        for (k, gate) in circuit.gates.iter().enumerate() {
            let mut angle = gate.angle.map(|a| a.value(params)).unwrap_or(0.0);
            if k == index {
                angle += shift;
            }
            self.apply_unchecked(gate, angle);
        }
    }

    /// Applies `gate` with an already-resolved rotation angle. Indices must
    /// have been validated against this register.
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate, angle: f64) {
        match gate.kind {
            GateKind::Rz => {
                let half = 0.5 * angle;
                let phase0 = Complex64::from_polar(1.0, -half);
                let phase1 = Complex64::from_polar(1.0, half);
                let mask = self.mask(gate.target);
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    *a *= if i & mask == 0 { phase0 } else { phase1 };
                }
            }
            GateKind::Ry => {
                let (s, c) = (0.5 * angle).sin_cos();
                let mask = self.mask(gate.target);
                for i in 0..self.amplitudes.len() {
                    if i & mask == 0 {
                        let a0 = self.amplitudes[i];
                        let a1 = self.amplitudes[i | mask];
                        self.amplitudes[i] = a0 * c - a1 * s;
                        self.amplitudes[i | mask] = a0 * s + a1 * c;
                    }
                }
            }
            GateKind::Cnot => {
                let control = self.mask(gate.control.expect("validated cnot has a control"));
                let target = self.mask(gate.target);
                for i in 0..self.amplitudes.len() {
                    if i & control != 0 && i & target == 0 {
                        self.amplitudes.swap(i, i | target);
                    }
                }
            }
        }
    }

    /// Applies the generator of a rotation gate, i.e. multiplies by the
    /// Pauli (Z for RZ, Y for RY) on the gate's target. Used by adjoint
    /// differentiation.
    pub(crate) fn apply_generator(&mut self, gate: &Gate) {
        let mask = self.mask(gate.target);
        match gate.kind {
            GateKind::Rz => {
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *a = -*a;
                    }
                }
            }
            GateKind::Ry => {
                let i_unit = Complex64::new(0.0, 1.0);
                for i in 0..self.amplitudes.len() {
                    if i & mask == 0 {
                        let a0 = self.amplitudes[i];
                        let a1 = self.amplitudes[i | mask];
                        self.amplitudes[i] = -i_unit * a1;
                        self.amplitudes[i | mask] = i_unit * a0;
                    }
                }
            }
            GateKind::Cnot => {}
        }
    }

    /// ⟨ψ|(I ⊗ … ⊗ |0⟩⟨0| ⊗ … ⊗ I)|ψ⟩ for the projector on `qubit`, clamped to [0, 1].
    pub fn expectation_projector(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange { index: qubit, n_qubits: self.n_qubits });
        }
        Ok(self.projector_unchecked(qubit))
    }

    pub(crate) fn projector_unchecked(&self, qubit: usize) -> f64 {
        let mask = self.mask(qubit);
        let p: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        p.clamp(0.0, 1.0)
    }

    pub(crate) fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    Rz,
    Ry,
    Cnot,
}

/// Where a rotation gate takes its angle from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    /// Trainable slot in the parameter vector.
    Param(usize),
    /// Constant angle (basis-change rotations).
    Fixed(f64),
}

impl Angle {
    pub(crate) fn value(self, params: &[f64]) -> f64 {
        match self {
            Angle::Param(slot) => params[slot],
            Angle::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Option<Angle>,
}

impl Gate {
    pub fn rz(target: usize, slot: usize) -> Self {
        Self { kind: GateKind::Rz, target, control: None, angle: Some(Angle::Param(slot)) }
    }

    pub fn ry(target: usize, slot: usize) -> Self {
        Self { kind: GateKind::Ry, target, control: None, angle: Some(Angle::Param(slot)) }
    }

    pub fn rz_fixed(target: usize, angle: f64) -> Self {
        Self { kind: GateKind::Rz, target, control: None, angle: Some(Angle::Fixed(angle)) }
    }

    pub fn ry_fixed(target: usize, angle: f64) -> Self {
        Self { kind: GateKind::Ry, target, control: None, angle: Some(Angle::Fixed(angle)) }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::Cnot, target, control: Some(control), angle: None }
    }

    /// Inverse under `params`: a fixed-angle rotation by the negated angle.
    /// CNOT is its own inverse.
    pub fn inverse(&self, params: &[f64]) -> Result<Self> {
        if self.kind == GateKind::Cnot {
            return Ok(*self);
        }
        let angle = self.resolve_angle(params)?;
        Ok(Self { angle: Some(Angle::Fixed(-angle)), ..*self })
    }

    pub fn param_slot(&self) -> Option<usize> {
        match self.angle {
            Some(Angle::Param(slot)) => Some(slot),
            _ => None,
        }
    }

    /// Qubits the gate touches.
    pub fn support(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.target).chain(self.control)
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for q in self.support() {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits });
            }
        }
        match (self.kind, self.control, self.angle) {
            (GateKind::Cnot, Some(c), None) if c != self.target => Ok(()),
            (GateKind::Cnot, Some(_), None) => {
                Err(Error::InvalidGate("cnot control equals target".into()))
            }
            (GateKind::Cnot, _, _) => {
                Err(Error::InvalidGate("cnot needs a control and no angle".into()))
            }
            (_, None, Some(_)) => Ok(()),
            _ => Err(Error::InvalidGate("rotation needs an angle and no control".into())),
        }
    }

    fn resolve_angle(&self, params: &[f64]) -> Result<f64> {
        match self.angle {
            Some(Angle::Param(slot)) if slot >= params.len() => {
                Err(Error::ParamLength { expected: slot + 1, got: params.len() })
            }
            Some(a) => Ok(a.value(params)),
            None => Ok(0.0),
        }
    }
}

/// Ordered gate program with trainable slots `0..n_params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
    depth: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidDimension("a circuit needs at least one qubit".into()));
        }
        for g in &gates {
            g.validate(n_qubits)?;
        }
        let slots: Vec<usize> = gates.iter().filter_map(Gate::param_slot).collect();
        let n_params = slots.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_params];
        for s in slots {
            seen[s] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidCircuit(format!("parameter slot {missing} is never used")));
        }
        let depth = greedy_depth(n_qubits, &gates);
        Ok(Self { n_qubits, gates, n_params, depth })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Number of trainable parameters d_Q.
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Layer count L_Q under as-soon-as-possible layering.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Replaces the computed depth, for experiments that count layers differently.
    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind == GateKind::Cnot).count()
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::ParamLength { expected: self.n_params, got: params.len() });
        }
        Ok(())
    }
}

fn greedy_depth(n_qubits: usize, gates: &[Gate]) -> usize {
    let mut frontier = vec![0usize; n_qubits];
    for g in gates {
        let layer = g.support().map(|q| frontier[q]).max().unwrap_or(0) + 1;
        for q in g.support() {
            frontier[q] = layer;
        }
    }
    frontier.into_iter().max().unwrap_or(0)
}

/// Global depolarization rate per layer plus the shot budget. `shots: None`
/// means expectations are taken analytically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p: f64,
    pub shots: Option<u32>,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self { p: 0.0, shots: None }
    }

    pub fn new(p: f64, shots: Option<u32>) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("depolarization rate {p} outside [0, 1]")));
        }
        if shots == Some(0) {
            return Err(Error::ZeroShots);
        }
        Ok(Self { p, shots })
    }

    pub fn is_ideal(&self) -> bool {
        self.p == 0.0 && self.shots.is_none()
    }

    /// p̃ for a circuit of the given depth.
    pub fn effective_rate(&self, depth: usize) -> f64 {
        effective_depolarization(self.p, depth)
    }
}

/// p̃ = 1 − (1 − p)^L.
pub fn effective_depolarization(p: f64, depth: usize) -> f64 {
    if depth == 0 || p == 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    // −expm1(L·ln(1 − p)) avoids cancellation for small p.
    (-(depth as f64 * (-p).ln_1p()).exp_m1()).clamp(0.0, 1.0)
}

/// Expectation of an observable after the global depolarizing channel:
/// (1 − p̃)·ideal + p̃·Tr(O)/2^N.
pub fn noisy_expectation(ideal: f64, trace_o: f64, n_qubits: usize, p_tilde: f64) -> f64 {
    let dim = (n_qubits as f64).exp2();
    (1.0 - p_tilde) * ideal + p_tilde * trace_o / dim
}

/// Mean of `shots` Bernoulli(prob) outcomes. The count is drawn as one
/// binomial variate, which has the same law as summing the draws.
pub fn sample_two_outcome<R: Rng + ?Sized>(prob: f64, shots: u32, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let p = if prob.is_nan() { 0.0 } else { prob.clamp(0.0, 1.0) };
    let binomial = Binomial::new(u64::from(shots), p)
        .map_err(|e| Error::Invariant(format!("binomial({shots}, {p}): {e}")))?;
    Ok(binomial.sample(rng) as f64 / f64::from(shots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn basis_states_use_big_endian_indexing() {
        let s = StateVector::from_bitstring("0000").unwrap();
        assert_eq!(s.dim(), 16);
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));

        let s = StateVector::from_bitstring("1100").unwrap();
        assert_eq!(s.amplitudes()[12], Complex64::new(1.0, 0.0));
        assert_abs_diff_eq!(s.norm_sqr(), 1.0);

        let s = StateVector::basis(&[1]).unwrap();
        assert_eq!(s.amplitudes(), &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn empty_bitstring_is_rejected() {
        assert!(matches!(StateVector::basis(&[]), Err(Error::InvalidDimension(_))));
        assert!(StateVector::from_bitstring("").is_err());
        assert!(StateVector::from_bitstring("12").is_err());
    }

    #[test]
    fn ry_pi_flips_zero_to_one() {
        let s = StateVector::zero(1).unwrap();
        let out = s.apply(&Gate::ry_fixed(0, PI), &[]).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[1].norm_sqr(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitudes()[0].norm_sqr(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rz_leaves_populations_alone() {
        let s = StateVector::zero(1).unwrap();
        for phi in [0.0, 0.3, 1.7, PI, 5.9] {
            let out = s.apply(&Gate::rz_fixed(0, phi), &[]).unwrap();
            assert_abs_diff_eq!(out.expectation_projector(0).unwrap(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        let s = StateVector::from_bitstring("10").unwrap();
        let out = s.apply(&Gate::cnot(0, 1), &[]).unwrap();
        assert_eq!(out, StateVector::from_bitstring("11").unwrap());
        let s = StateVector::from_bitstring("01").unwrap();
        assert_eq!(s.apply(&Gate::cnot(0, 1), &[]).unwrap(), s);
    }

    #[test]
    fn gate_validation() {
        let s = StateVector::zero(2).unwrap();
        assert!(matches!(
            s.apply(&Gate::ry(2, 0), &[0.1]),
            Err(Error::QubitOutOfRange { index: 2, n_qubits: 2 })
        ));
        assert!(s.apply(&Gate::cnot(1, 1), &[]).is_err());
        assert!(matches!(s.apply(&Gate::ry(0, 3), &[0.1]), Err(Error::ParamLength { .. })));
    }

    #[test]
    fn circuit_rejects_unused_slots() {
        let err = Circuit::new(1, vec![Gate::ry(0, 1)]).unwrap_err();
        assert!(matches!(err, Error::InvalidCircuit(_)));
        let c = Circuit::new(2, vec![Gate::ry(0, 0), Gate::ry(1, 0)]).unwrap();
        assert_eq!(c.n_params(), 1);
    }

    #[test]
    fn greedy_layering() {
        // Disjoint single-qubit gates share a layer; a CNOT joins its qubits.
        let c = Circuit::new(
            3,
            vec![Gate::ry(0, 0), Gate::ry(1, 1), Gate::ry(2, 2), Gate::cnot(0, 1), Gate::ry(2, 3)],
        )
        .unwrap();
        assert_eq!(c.depth(), 2);
        assert_eq!(c.clone().with_depth(7).depth(), 7);
        assert_eq!(Circuit::new(2, vec![]).unwrap().depth(), 0);
    }

    #[test]
    fn projector_expectation() {
        let s = StateVector::zero(6).unwrap();
        assert_abs_diff_eq!(s.expectation_projector(5).unwrap(), 1.0);

        let half = StateVector::zero(1).unwrap().apply(&Gate::ry_fixed(0, PI / 2.0), &[]).unwrap();
        assert_abs_diff_eq!(half.expectation_projector(0).unwrap(), 0.5, epsilon = 1e-15);

        // cos^2(1/2) = 0.770151152934069...
        let s = StateVector::zero(1).unwrap().apply(&Gate::ry_fixed(0, 1.0), &[]).unwrap();
        assert_abs_diff_eq!(s.expectation_projector(0).unwrap(), 0.770_151_152_934_069_9, epsilon = 1e-14);

        assert!(s.expectation_projector(1).is_err());
    }

    #[test]
    fn effective_depolarization_values() {
        assert_eq!(effective_depolarization(0.0, 40), 0.0);
        assert_eq!(effective_depolarization(1.0, 1), 1.0);
        assert_eq!(effective_depolarization(0.3, 0), 0.0);
        // 1 - 0.9999^10 by binomial expansion; the dropped terms are < 1e-21
        let expected = 10.0 * 1e-4 - 45.0 * 1e-8 + 120.0 * 1e-12 - 210.0 * 1e-16 + 252.0 * 1e-20;
        assert_abs_diff_eq!(effective_depolarization(1e-4, 10), expected, epsilon = 1e-18);
    }

    #[test]
    fn noisy_expectation_limits() {
        let trace_o = 32.0;
        assert_abs_diff_eq!(noisy_expectation(0.8, trace_o, 6, 0.0), 0.8);
        assert_abs_diff_eq!(noisy_expectation(0.8, trace_o, 6, 1.0), 0.5);
        assert_abs_diff_eq!(noisy_expectation(1.0, 0.0, 3, 0.5), 0.5);
    }

    #[test]
    fn two_outcome_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(sample_two_outcome(1.0, 17, &mut rng).unwrap(), 1.0);
        assert_eq!(sample_two_outcome(0.0, 17, &mut rng).unwrap(), 0.0);
        assert_eq!(sample_two_outcome(1.0 + 1e-16, 3, &mut rng).unwrap(), 1.0);
        assert_eq!(sample_two_outcome(-1e-17, 3, &mut rng).unwrap(), 0.0);
        let m = sample_two_outcome(0.5, 1_000_000, &mut rng).unwrap();
        assert!((m - 0.5).abs() <= 4.0 * 0.5 / 1e3, "mean {m}");
        assert!(matches!(sample_two_outcome(0.5, 0, &mut rng), Err(Error::ZeroShots)));
    }

    #[test]
    fn two_outcome_is_deterministic_per_stream() {
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..10).map(|_| sample_two_outcome(0.3, 50, &mut rng).unwrap()).collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..10).map(|_| sample_two_outcome(0.3, 50, &mut rng).unwrap()).collect()
        };
        assert_eq!(a, b);
    }
}
