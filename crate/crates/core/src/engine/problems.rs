use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{EncodedExample, ShardPlan};
use crate::error::{Error, Result};
use crate::gradient::{
    qnn_forward, qnn_full_gradient, qnn_grad_adjoint, qnn_grad_estimated, vqe_grad, vqe_grad_adjoint, QnnLossSpec,
    VqeSpec,
};
use crate::pauli::Partition;
use crate::rng::StreamRng;
use crate::statevector::NoiseModel;

/// Identifies one local step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepContext {
    pub node: usize,
    pub round: usize,
    pub step: usize,
}

/// Values recorded after each synchronization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// Full training loss, evaluated without noise.
    pub train_loss: f64,
    /// ‖∇L(θ)‖² of the full loss, evaluated without noise.
    pub grad_norm_sq: f64,
    /// Test accuracy (QNN) or energy (VQE).
    pub metric: f64,
}

/// A problem the protocol can train: per-node gradients plus a global
/// evaluation.
pub trait Workload: Sync {
    fn n_params(&self) -> usize;

    /// Number of shards, which must equal the number of nodes.
    fn n_shards(&self) -> usize;

    fn local_gradient(&self, ctx: StepContext, theta: &[f64], noise: &NoiseModel, rng: &mut StreamRng)
        -> Result<Vec<f64>>;

    fn evaluate(&self, theta: &[f64], noise: &NoiseModel, rng: &mut StreamRng) -> Result<RoundMetrics>;

    /// JSON summary written next to the trace.
    fn describe(&self) -> Value;
}

/// 0 when ŷ ≤ 0.5, else 1.
pub fn predict_label(y_hat: f64) -> u8 {
    u8::from(y_hat > 0.5)
}

/// Fraction of `examples` classified correctly. Under noise the sampled
/// output ȳ is thresholded.
pub fn evaluate_accuracy<R: Rng + ?Sized>(
    theta: &[f64],
    examples: &[EncodedExample],
    spec: &QnnLossSpec,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty("accuracy needs at least one example"));
    }
    let mut correct = 0usize;
    for ex in examples {
        if predict_label(qnn_forward(theta, ex, spec, noise, rng)?) == ex.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

/// Binary classifier trained on sharded examples, scored on a test set.
#[derive(Debug, Clone)]
pub struct QnnProblem {
    pub spec: QnnLossSpec,
    pub train: Vec<EncodedExample>,
    pub test: Vec<EncodedExample>,
    pub shards: ShardPlan,
}

impl QnnProblem {
    pub fn new(spec: QnnLossSpec, train: Vec<EncodedExample>, test: Vec<EncodedExample>, shards: ShardPlan) -> Result<Self> {
        if train.is_empty() || test.is_empty() {
            return Err(Error::Empty("qnn problem needs train and test examples"));
        }
        if !shards.covers_exactly(train.len()) || shards.sets().iter().any(Vec::is_empty) {
            return Err(Error::InvalidPartition(format!(
                "shards {:?} do not split {} training examples",
                shards.sizes(),
                train.len()
            )));
        }
        Ok(Self { spec, train, test, shards })
    }
}

impl Workload for QnnProblem {
    fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    fn n_shards(&self) -> usize {
        self.shards.len()
    }

    /// One example drawn uniformly from the node's shard (batch size 1).
    fn local_gradient(&self, ctx: StepContext, theta: &[f64], noise: &NoiseModel, rng: &mut StreamRng) -> Result<Vec<f64>> {
        let shard = &self.shards.sets()[ctx.node];
        let example = &self.train[shard[rng.random_range(0..shard.len())]];
        if noise.is_ideal() {
            Ok(qnn_grad_adjoint(theta, example, &self.spec)?.1)
        } else {
            Ok(qnn_grad_estimated(theta, example, &self.spec, noise, rng)?.values)
        }
    }

    fn evaluate(&self, theta: &[f64], noise: &NoiseModel, rng: &mut StreamRng) -> Result<RoundMetrics> {
        let (train_loss, grad) = qnn_full_gradient(theta, &self.train, &self.spec)?;
        let metric = evaluate_accuracy(theta, &self.test, &self.spec, noise, rng)?;
        Ok(RoundMetrics { train_loss, grad_norm_sq: grad.iter().map(|g| g * g).sum(), metric })
    }

    fn describe(&self) -> Value {
        json!({
            "workload": "qnn",
            "n_qubits": self.spec.circuit.n_qubits(),
            "n_params": self.spec.n_params(),
            "depth": self.spec.circuit.depth(),
            "cnot_count": self.spec.circuit.cnot_count(),
            "observable_qubit": self.spec.observable_qubit,
            "lambda": self.spec.lambda,
            "train_size": self.train.len(),
            "test_size": self.test.len(),
            "shard_sizes": self.shards.sizes(),
            "metric": "test_accuracy",
        })
    }
}

/// Ground-state search with the Hamiltonian terms split across nodes.
#[derive(Debug, Clone)]
pub struct VqeProblem {
    pub spec: VqeSpec,
    pub partition: Partition,
    all_terms: Vec<usize>,
}

impl VqeProblem {
    pub fn new(spec: VqeSpec, partition: Partition) -> Result<Self> {
        if !partition.covers_exactly(spec.hamiltonian.len()) || partition.sets().iter().any(Vec::is_empty) {
            return Err(Error::InvalidPartition(format!(
                "groups {:?} do not split {} terms",
                partition.sizes(),
                spec.hamiltonian.len()
            )));
        }
        let all_terms = spec.hamiltonian.all_indices();
        Ok(Self { spec, partition, all_terms })
    }

    /// Noise-free energy of the full Hamiltonian.
    pub fn energy(&self, theta: &[f64]) -> Result<f64> {
        crate::gradient::vqe_energy_exact(theta, &self.spec, &self.all_terms)
    }
}

impl Workload for VqeProblem {
    fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    fn n_shards(&self) -> usize {
        self.partition.len()
    }

    fn local_gradient(&self, ctx: StepContext, theta: &[f64], noise: &NoiseModel, rng: &mut StreamRng) -> Result<Vec<f64>> {
        let subset = &self.partition.sets()[ctx.node];
        if noise.is_ideal() {
            Ok(vqe_grad_adjoint(theta, &self.spec, subset)?.1)
        } else {
            Ok(vqe_grad(theta, &self.spec, subset, noise, rng)?.values)
        }
    }

    fn evaluate(&self, theta: &[f64], _noise: &NoiseModel, _rng: &mut StreamRng) -> Result<RoundMetrics> {
        let (energy, grad) = vqe_grad_adjoint(theta, &self.spec, &self.all_terms)?;
        Ok(RoundMetrics { train_loss: energy, grad_norm_sq: grad.iter().map(|g| g * g).sum(), metric: energy })
    }

    fn describe(&self) -> Value {
        json!({
            "workload": "vqe",
            "n_qubits": self.spec.circuit.n_qubits(),
            "n_params": self.spec.n_params(),
            "depth": self.spec.circuit.depth(),
            "n_terms": self.spec.hamiltonian.len(),
            "partition": self.partition.sets(),
            "metric": "energy",
        })
    }
}
