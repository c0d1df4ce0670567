//! Losses and gradients for the two workloads.
//!
//! Parameter-shift evaluations shift one gate at a time, so the rule stays
//! exact even if a slot were shared by several gates. The adjoint routine
//! gives the same ideal-mode derivatives from three statevector sweeps and is
//! what the training loop uses when no noise is configured.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::EncodedExample;
use crate::error::{Error, Result};
use crate::pauli::{apply_pauli_sum, expectation_pauli_sum, sample_pauli_expectation_noisy, Hamiltonian};
use crate::statevector::{noisy_expectation, sample_two_outcome, Circuit, GateKind, NoiseModel, StateVector};

/// Circuit, measured qubit and ℓ₂ coefficient of the QNN loss. The
/// observable is the projector |0⟩⟨0| on `observable_qubit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnnLossSpec {
    pub circuit: Circuit,
    pub observable_qubit: usize,
    pub lambda: f64,
}

impl QnnLossSpec {
    /// Measures the last qubit.
    pub fn new(circuit: Circuit, lambda: f64) -> Result<Self> {
        let q = circuit.n_qubits() - 1;
        Self::with_observable(circuit, q, lambda)
    }

    pub fn with_observable(circuit: Circuit, observable_qubit: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be a finite value >= 0, got {lambda}")));
        }
        if observable_qubit >= circuit.n_qubits() {
            return Err(Error::QubitOutOfRange { index: observable_qubit, n_qubits: circuit.n_qubits() });
        }
        Ok(Self { circuit, observable_qubit, lambda })
    }

    pub fn n_params(&self) -> usize {
        self.circuit.n_params()
    }

    /// Tr O for the single-qubit projector: 2^(N−1).
    pub fn trace_o(&self) -> f64 {
        ((self.circuit.n_qubits() - 1) as f64).exp2()
    }

    pub fn p_tilde(&self, noise: &NoiseModel) -> f64 {
        noise.effective_rate(self.circuit.depth())
    }

    fn check(&self, params: &[f64], state: &StateVector) -> Result<()> {
        self.circuit.check_params(params)?;
        if state.n_qubits() != self.circuit.n_qubits() {
            return Err(Error::InvalidDimension(format!(
                "example has {} qubits, circuit {}",
                state.n_qubits(),
                self.circuit.n_qubits()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradMode {
    AnalyticIdeal,
    ShotNoisy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradEstimate {
    pub values: Vec<f64>,
    pub mode: GradMode,
    /// Total measurement shots spent; 0 for analytic gradients.
    pub shots_used: u64,
}

impl GradEstimate {
    fn analytic(values: Vec<f64>) -> Self {
        Self { values, mode: GradMode::AnalyticIdeal, shots_used: 0 }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum()
    }
}

fn norm_sqr(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Indices of the gates that read a trainable slot, with the slot.
fn param_gates(circuit: &Circuit) -> impl Iterator<Item = (usize, usize)> + '_ {
    circuit.gates().iter().enumerate().filter_map(|(k, g)| g.param_slot().map(|s| (k, s)))
}

fn shifted_state(input: &StateVector, circuit: &Circuit, params: &[f64], gate: usize, shift: f64) -> StateVector {
    let mut s = input.clone();
    s.evolve_shifted_unchecked(circuit, params, gate, shift);
    s
}

/// Returns ⟨ψ|U†AU|ψ⟩ and its gradient, where `observe` applies the
/// Hermitian A to a state.
fn adjoint<F>(input: &StateVector, circuit: &Circuit, params: &[f64], observe: F) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&StateVector) -> Result<StateVector>,
{
    let mut phi = input.evolve(circuit, params)?;
    let mut lam = observe(&phi)?;
    let value = phi.inner(&lam).re;
    let mut grad = vec![0.0; circuit.n_params()];
    for gate in circuit.gates().iter().rev() {
        let angle = gate.angle.map(|a| a.value(params)).unwrap_or(0.0);
        if let Some(slot) = gate.param_slot() {
            let mut gen = phi.clone();
            gen.apply_generator(gate);
            grad[slot] += lam.inner(&gen).im;
        }
        if gate.kind == GateKind::Cnot {
            phi.apply_unchecked(gate, 0.0);
            lam.apply_unchecked(gate, 0.0);
        } else {
            phi.apply_unchecked(gate, -angle);
            lam.apply_unchecked(gate, -angle);
        }
    }
    Ok((value, grad))
}

fn project(state: &StateVector, qubit: usize) -> StateVector {
    let n = state.n_qubits();
    let mask = 1 << (n - 1 - qubit);
    let mut out = state.clone();
    for (i, a) in out.amplitudes_mut().iter_mut().enumerate() {
        if i & mask != 0 {
            *a = Default::default();
        }
    }
    out
}

/// Noise-free h(θ, O, ρ) = Tr(O U ρ U†).
pub fn qnn_expectation(params: &[f64], example: &EncodedExample, spec: &QnnLossSpec) -> Result<f64> {
    spec.check(params, &example.state)?;
    Ok(example.state.evolve(&spec.circuit, params)?.projector_unchecked(spec.observable_qubit))
}

/// Turns an ideal expectation into the value reported under `noise`: the
/// depolarized expectation, or a K-shot sample mean of it.
fn observe_qnn<R: Rng + ?Sized>(ideal: f64, spec: &QnnLossSpec, p_tilde: f64, shots: Option<u32>, rng: &mut R) -> Result<f64> {
    let prob = noisy_expectation(ideal, spec.trace_o(), spec.circuit.n_qubits(), p_tilde);
    match shots {
        None => Ok(prob),
        Some(k) => sample_two_outcome(prob, k, rng),
    }
}

/// Model output ŷ (ideal) or ȳ (depolarized and/or sampled).
pub fn qnn_forward<R: Rng + ?Sized>(
    params: &[f64],
    example: &EncodedExample,
    spec: &QnnLossSpec,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<f64> {
    let ideal = qnn_expectation(params, example, spec)?;
    if noise.is_ideal() {
        return Ok(ideal);
    }
    observe_qnn(ideal, spec, spec.p_tilde(noise), noise.shots, rng)
}

/// 1/(2n) Σ (h − y)² + λ‖θ‖² over `examples`, computed analytically.
pub fn qnn_loss(params: &[f64], examples: &[EncodedExample], spec: &QnnLossSpec) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty("loss needs at least one example"));
    }
    let mut sq = 0.0;
    for ex in examples {
        let r = qnn_expectation(params, ex, spec)? - ex.target();
        sq += r * r;
    }
    Ok(sq / (2.0 * examples.len() as f64) + spec.lambda * norm_sqr(params))
}

/// Ideal h at θ and at θ ± (π/2) on every parameterized gate.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftExpectations {
    pub center: f64,
    /// `(slot, h₊, h₋)` per parameterized gate, in gate order.
    pub shifts: Vec<(usize, f64, f64)>,
}

pub fn qnn_shift_expectations(params: &[f64], example: &EncodedExample, spec: &QnnLossSpec) -> Result<ShiftExpectations> {
    let center = qnn_expectation(params, example, spec)?;
    let q = spec.observable_qubit;
    let shifts = param_gates(&spec.circuit)
        .map(|(k, slot)| {
            let plus = shifted_state(&example.state, &spec.circuit, params, k, FRAC_PI_2).projector_unchecked(q);
            let minus = shifted_state(&example.state, &spec.circuit, params, k, -FRAC_PI_2).projector_unchecked(q);
            (slot, plus, minus)
        })
        .collect();
    Ok(ShiftExpectations { center, shifts })
}

/// Per-example gradient from parameter shift:
/// (ŷ − y)(ŷ₊ⱼ − ŷ₋ⱼ)/2 + λθⱼ.
pub fn qnn_grad_analytic(params: &[f64], example: &EncodedExample, spec: &QnnLossSpec) -> Result<GradEstimate> {
    let e = qnn_shift_expectations(params, example, spec)?;
    let residual = e.center - example.target();
    let mut g: Vec<f64> = params.iter().map(|t| spec.lambda * t).collect();
    for (slot, plus, minus) in e.shifts {
        g[slot] += residual * (plus - minus) / 2.0;
    }
    Ok(GradEstimate::analytic(g))
}

/// Same quantity as [`qnn_grad_analytic`] by adjoint differentiation.
/// Returns (ŷ, gradient).
pub fn qnn_grad_adjoint(params: &[f64], example: &EncodedExample, spec: &QnnLossSpec) -> Result<(f64, Vec<f64>)> {
    spec.check(params, &example.state)?;
    let q = spec.observable_qubit;
    let (y_hat, dh) = adjoint(&example.state, &spec.circuit, params, |s| Ok(project(s, q)))?;
    let residual = y_hat - example.target();
    let g = dh.iter().zip(params).map(|(d, t)| residual * d + spec.lambda * t).collect();
    Ok((y_hat, g))
}

/// Draws one estimated gradient from precomputed ideal expectations. Every
/// one of the 2d + 1 values gets its own fresh K-shot sample.
pub fn estimate_qnn_gradient<R: Rng + ?Sized>(
    e: &ShiftExpectations,
    target: f64,
    params: &[f64],
    spec: &QnnLossSpec,
    p_tilde: f64,
    shots: Option<u32>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let center = observe_qnn(e.center, spec, p_tilde, shots, rng)?;
    let residual = center - target;
    let mut g: Vec<f64> = params.iter().map(|t| spec.lambda * t).collect();
    for &(slot, plus, minus) in &e.shifts {
        let plus = observe_qnn(plus, spec, p_tilde, shots, rng)?;
        let minus = observe_qnn(minus, spec, p_tilde, shots, rng)?;
        g[slot] += residual * (plus - minus) / 2.0;
    }
    Ok(g)
}

/// Estimated gradient (ȳ − y)(ȳ₊ⱼ − ȳ₋ⱼ)/2 + λθⱼ under depolarization and
/// finite shots. With `noise.shots == None` the depolarized expectations
/// are used exactly.
pub fn qnn_grad_estimated<R: Rng + ?Sized>(
    params: &[f64],
    example: &EncodedExample,
    spec: &QnnLossSpec,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<GradEstimate> {
    let e = qnn_shift_expectations(params, example, spec)?;
    let values = estimate_qnn_gradient(&e, example.target(), params, spec, spec.p_tilde(noise), noise.shots, rng)?;
    let evaluations = 1 + 2 * e.shifts.len() as u64;
    let shots_used = noise.shots.map_or(0, |k| evaluations * u64::from(k));
    Ok(GradEstimate { values, mode: GradMode::ShotNoisy, shots_used })
}

/// Gradient of [`qnn_loss`] over the whole set: the mean per-example data
/// term plus λθ.
pub fn qnn_full_gradient(params: &[f64], examples: &[EncodedExample], spec: &QnnLossSpec) -> Result<(f64, Vec<f64>)> {
    if examples.is_empty() {
        return Err(Error::Empty("gradient needs at least one example"));
    }
    let n = examples.len() as f64;
    let mut data = vec![0.0; params.len()];
    let mut sq = 0.0;
    for ex in examples {
        let (y_hat, g) = qnn_grad_adjoint(params, ex, spec)?;
        sq += (y_hat - ex.target()).powi(2);
        for ((acc, gj), t) in data.iter_mut().zip(g).zip(params) {
            *acc += gj - spec.lambda * t;
        }
    }
    let grad = data.iter().zip(params).map(|(d, t)| d / n + spec.lambda * t).collect();
    let loss = sq / (2.0 * n) + spec.lambda * norm_sqr(params);
    Ok((loss, grad))
}

/// Circuit, Hamiltonian and reference input state of a VQE problem.
#[derive(Debug, Clone, PartialEq)]
pub struct VqeSpec {
    pub circuit: Circuit,
    pub hamiltonian: Hamiltonian,
    pub reference: StateVector,
}

impl VqeSpec {
    pub fn new(circuit: Circuit, hamiltonian: Hamiltonian, reference: StateVector) -> Result<Self> {
        let n = circuit.n_qubits();
        if hamiltonian.n_qubits() != n || reference.n_qubits() != n {
            return Err(Error::InvalidDimension(format!(
                "circuit {n} qubits, hamiltonian {}, reference {}",
                hamiltonian.n_qubits(),
                reference.n_qubits()
            )));
        }
        Ok(Self { circuit, hamiltonian, reference })
    }

    pub fn n_params(&self) -> usize {
        self.circuit.n_params()
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        match subset.iter().find(|&&j| j >= self.hamiltonian.len()) {
            Some(j) => Err(Error::InvalidPartition(format!("term index {j} out of range"))),
            None => Ok(()),
        }
    }
}

fn energy_of_state<R: Rng + ?Sized>(
    state: &StateVector,
    spec: &VqeSpec,
    subset: &[usize],
    p_tilde: f64,
    shots: Option<u32>,
    rng: &mut R,
) -> Result<f64> {
    match shots {
        None => {
            let ideal = expectation_pauli_sum(state, &spec.hamiltonian, subset)?;
            // Traceless terms decay by (1 − p̃); identity terms are unaffected.
            let identity: f64 = subset
                .iter()
                .map(|&j| &spec.hamiltonian.terms()[j])
                .filter(|t| t.pauli.is_identity())
                .map(|t| t.coeff)
                .sum();
            Ok((1.0 - p_tilde) * (ideal - identity) + identity)
        }
        Some(k) => subset.iter().try_fold(0.0, |acc, &j| {
            Ok(acc + sample_pauli_expectation_noisy(state, &spec.hamiltonian.terms()[j], k, p_tilde, rng)?)
        }),
    }
}

/// Σ_{j∈subset} αⱼ Tr(Hⱼ U ρ₀ U†), analytic or with K shots per term.
pub fn vqe_energy<R: Rng + ?Sized>(
    params: &[f64],
    spec: &VqeSpec,
    subset: &[usize],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<f64> {
    spec.check_subset(subset)?;
    let state = spec.reference.evolve(&spec.circuit, params)?;
    energy_of_state(&state, spec, subset, noise.effective_rate(spec.circuit.depth()), noise.shots, rng)
}

/// Noise-free energy over `subset`.
pub fn vqe_energy_exact(params: &[f64], spec: &VqeSpec, subset: &[usize]) -> Result<f64> {
    spec.check_subset(subset)?;
    let state = spec.reference.evolve(&spec.circuit, params)?;
    expectation_pauli_sum(&state, &spec.hamiltonian, subset)
}

/// Parameter-shift gradient (E₊ⱼ − E₋ⱼ)/2 over `subset`. In shot mode every
/// shifted energy is estimated independently with K shots per term.
pub fn vqe_grad<R: Rng + ?Sized>(
    params: &[f64],
    spec: &VqeSpec,
    subset: &[usize],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<GradEstimate> {
    spec.check_subset(subset)?;
    spec.circuit.check_params(params)?;
    let p_tilde = noise.effective_rate(spec.circuit.depth());
    let mut g = vec![0.0; params.len()];
    let mut evaluations = 0u64;
    for (k, slot) in param_gates(&spec.circuit) {
        let plus = shifted_state(&spec.reference, &spec.circuit, params, k, FRAC_PI_2);
        let minus = shifted_state(&spec.reference, &spec.circuit, params, k, -FRAC_PI_2);
        let e_plus = energy_of_state(&plus, spec, subset, p_tilde, noise.shots, rng)?;
        let e_minus = energy_of_state(&minus, spec, subset, p_tilde, noise.shots, rng)?;
        g[slot] += (e_plus - e_minus) / 2.0;
        evaluations += 2;
    }
    Ok(match noise.shots {
        None if p_tilde == 0.0 => GradEstimate::analytic(g),
        shots => GradEstimate {
            values: g,
            mode: GradMode::ShotNoisy,
            shots_used: evaluations * subset.len() as u64 * u64::from(shots.unwrap_or(0)),
        },
    })
}

/// Noise-free (energy, gradient) over `subset` by adjoint differentiation.
pub fn vqe_grad_adjoint(params: &[f64], spec: &VqeSpec, subset: &[usize]) -> Result<(f64, Vec<f64>)> {
    spec.check_subset(subset)?;
    adjoint(&spec.reference, &spec.circuit, params, |s| apply_pauli_sum(s, &spec.hamiltonian, subset))
}

/// Central differences (f(θ + εeⱼ) − f(θ − εeⱼ)) / 2ε.
pub fn finite_difference<F>(mut f: F, params: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut x = params.to_vec();
    (0..params.len())
        .map(|j| {
            x[j] = params[j] + eps;
            let up = f(&x);
            x[j] = params[j] - eps;
            let down = f(&x);
            x[j] = params[j];
            (up - down) / (2.0 * eps)
        })
        .collect()
}
