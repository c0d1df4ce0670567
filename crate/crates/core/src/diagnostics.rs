//! Checks of the convergence theory against simulation: the utility R₁,
//! smoothness constants, the noisy-gradient bias relation, the convergence
//! bound overlay and speedup metrics.

use serde::{Deserialize, Serialize};

use crate::data::EncodedExample;
use crate::engine::{QnnProblem, StepContext, TrainingTrace, Workload};
use crate::error::{Error, Result};
use crate::gradient::{estimate_qnn_gradient, qnn_grad_analytic, qnn_shift_expectations, QnnLossSpec};
use crate::rng::{self, purpose};
use crate::statevector::{effective_depolarization, NoiseModel};

/// R₁ = (1/T) Σ_{t=1..T} ‖∇L(θ^(t))‖² from a trace (round 0 excluded).
pub fn utility_r1(trace: &TrainingTrace) -> Result<f64> {
    let norms: Vec<f64> = trace.records.iter().skip(1).map(|r| r.grad_norm_sq).collect();
    utility_r1_from(&norms)
}

pub fn utility_r1_from(grad_norm_sq: &[f64]) -> Result<f64> {
    if grad_norm_sq.is_empty() {
        return Err(Error::Empty("utility needs at least one round"));
    }
    Ok(grad_norm_sq.iter().sum::<f64>() / grad_norm_sq.len() as f64)
}

/// Smoothness S = (3/2 + λ)d² and Lipschitz constant G₁ = d(1 + 3πλ).
pub fn bound_constants(d: usize, lambda: f64) -> (f64, f64) {
    let d = d as f64;
    ((1.5 + lambda) * d * d, d * (1.0 + 3.0 * std::f64::consts::PI * lambda))
}

/// The five bias/variance constants, transcribed from the published table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Constants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

/// Inputs of the constants for one gradient component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentInputs {
    pub y_hat: f64,
    pub y_plus: f64,
    pub y_minus: f64,
    pub label: f64,
    pub theta_j: f64,
    pub p_tilde: f64,
    pub lambda: f64,
}

pub fn lemma3_constants(x: &ComponentInputs, shots: f64) -> Lemma3Constants {
    let ComponentInputs { y_hat, y_plus, y_minus, label, theta_j, p_tilde: p, lambda } = *x;
    let q = 1.0 - p;
    let delta = y_plus - y_minus;
    Lemma3Constants {
        c1: q * p * (0.5 - label) * delta - (2.0 * p - p * p) * lambda * theta_j,
        c2: q * delta,
        c3: q * y_hat + p / 2.0 - label,
        c4: (-q * y_hat * y_hat + q * q * y_hat + p / 2.0 - p * p / 4.0) / shots,
        c5: (-q * (y_plus * y_plus + y_minus * y_minus) + q * q * (y_plus + y_minus) + p - p * p / 2.0) / shots,
    }
}

/// E[g_j] − (1 − p̃)²∇_jL for the estimator with independent sample means,
/// derived directly from E[ȳ] = (1 − p̃)ŷ + p̃/2:
/// (1 − p̃)p̃(½ − y)(ŷ₊ − ŷ₋)/2 + (2p̃ − p̃²)λθⱼ.
pub fn exact_mean_offset(x: &ComponentInputs) -> f64 {
    let p = x.p_tilde;
    (1.0 - p) * p * (0.5 - x.label) * (x.y_plus - x.y_minus) / 2.0 + (2.0 * p - p * p) * x.lambda * x.theta_j
}

/// One gradient component of a bias check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentCheck {
    pub index: usize,
    pub analytic: f64,
    /// (1 − p̃)²∇ⱼL + C₁ with C₁ from the published table.
    pub predicted: f64,
    /// (1 − p̃)²∇ⱼL plus [`exact_mean_offset`].
    pub predicted_exact: f64,
    pub empirical_mean: f64,
    pub std_error: f64,
    pub pass: bool,
    pub pass_exact: bool,
    pub constants: Lemma3Constants,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCheckReport {
    pub p: f64,
    pub depth: usize,
    pub p_tilde: f64,
    pub shots: Option<u32>,
    pub trials: usize,
    pub lambda: f64,
    pub label: u8,
    pub theta: Vec<f64>,
    pub components: Vec<ComponentCheck>,
    pub pass_rate: f64,
    pub pass_rate_exact: f64,
}

/// Gate on |empirical − predicted|: 4 standard errors, plus a 1e-12 floor
/// for estimators with zero variance.
pub const STDERR_GATE: f64 = 4.0;
const ABS_FLOOR: f64 = 1e-12;

/// Draws `trials` estimated gradients at fixed θ and example and compares
/// each component's mean with the predicted biased mean.
pub fn bias_check(
    theta: &[f64],
    example: &EncodedExample,
    spec: &QnnLossSpec,
    noise: &NoiseModel,
    trials: usize,
    seed: u64,
) -> Result<BiasCheckReport> {
    if trials < 2 {
        return Err(Error::Config(format!("bias check needs at least 2 trials, got {trials}")));
    }
    let depth = spec.circuit.depth();
    let p_tilde = effective_depolarization(noise.p, depth);
    let e = qnn_shift_expectations(theta, example, spec)?;
    let analytic = qnn_grad_analytic(theta, example, spec)?.values;
    let d = theta.len();

    let mut rng = rng::stream(seed, &[purpose::BIAS_CHECK]);
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for n in 1..=trials {
        let g = estimate_qnn_gradient(&e, example.target(), theta, spec, p_tilde, noise.shots, &mut rng)?;
        for j in 0..d {
            let delta = g[j] - mean[j];
            mean[j] += delta / n as f64;
            m2[j] += delta * (g[j] - mean[j]);
        }
    }

    let shots = noise.shots.map_or(f64::INFINITY, f64::from);
    let keep = (1.0 - p_tilde).powi(2);
    let mut components = Vec::with_capacity(d);
    for &(slot, y_plus, y_minus) in &e.shifts {
        let inputs = ComponentInputs {
            y_hat: e.center,
            y_plus,
            y_minus,
            label: example.target(),
            theta_j: theta[slot],
            p_tilde,
            lambda: spec.lambda,
        };
        let constants = lemma3_constants(&inputs, shots);
        let predicted = keep * analytic[slot] + constants.c1;
        let predicted_exact = keep * analytic[slot] + exact_mean_offset(&inputs);
        let std_error = (m2[slot] / (trials - 1) as f64 / trials as f64).sqrt();
        let gate = STDERR_GATE * std_error + ABS_FLOOR;
        components.push(ComponentCheck {
            index: slot,
            analytic: analytic[slot],
            predicted,
            predicted_exact,
            empirical_mean: mean[slot],
            std_error,
            pass: (mean[slot] - predicted).abs() <= gate,
            pass_exact: (mean[slot] - predicted_exact).abs() <= gate,
            constants,
        });
    }
    let rate = |f: fn(&ComponentCheck) -> bool| components.iter().filter(|c| f(c)).count() as f64 / d as f64;
    let pass_rate = rate(|c| c.pass);
    let pass_rate_exact = rate(|c| c.pass_exact);
    Ok(BiasCheckReport {
        p: noise.p,
        depth,
        p_tilde,
        shots: noise.shots,
        trials,
        lambda: spec.lambda,
        label: example.label,
        theta: theta.to_vec(),
        components,
        pass_rate,
        pass_rate_exact,
    })
}

/// Empirical σ: the largest, over nodes, mean squared deviation of a node's
/// sampled gradient from that node's mean gradient at `theta`.
pub fn estimate_sigma(problem: &QnnProblem, theta: &[f64], noise: &NoiseModel, samples: usize, seed: u64) -> Result<f64> {
    if samples < 2 {
        return Err(Error::Config("sigma estimate needs at least 2 samples per node".into()));
    }
    let d = theta.len();
    let mut worst: f64 = 0.0;
    for node in 0..problem.n_shards() {
        let mut r = rng::stream(seed, &[purpose::BIAS_CHECK, 1, node as u64]);
        let draws = (0..samples)
            .map(|step| problem.local_gradient(StepContext { node, round: 0, step }, theta, noise, &mut r))
            .collect::<Result<Vec<_>>>()?;
        let mut mean = vec![0.0; d];
        for g in &draws {
            for (m, x) in mean.iter_mut().zip(g) {
                *m += x / samples as f64;
            }
        }
        let msd = draws
            .iter()
            .map(|g| g.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>())
            .sum::<f64>()
            / (samples - 1) as f64;
        worst = worst.max(msd);
    }
    Ok(worst)
}

/// Quantities entering the convergence bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub s: f64,
    pub g1: f64,
    /// Stand-in for the undefined G₂ (set to G₁ by [`BoundConstants::new`]).
    pub g2: f64,
    /// Bound on the mean squared gradient deviation.
    pub sigma: f64,
    pub p_tilde: f64,
    pub shots: Option<u32>,
    pub local_steps: usize,
    pub nodes: usize,
    pub rounds: usize,
    pub lambda: f64,
    pub d: usize,
}

impl BoundConstants {
    #[allow(clippy::too_many_arguments)]
    pub fn new(d: usize, lambda: f64, sigma: f64, p_tilde: f64, shots: Option<u32>, local_steps: usize, nodes: usize, rounds: usize) -> Self {
        let (s, g1) = bound_constants(d, lambda);
        Self { s, g1, g2: g1, sigma, p_tilde, shots, local_steps, nodes, rounds, lambda, d }
    }
}

/// Both forms of the bound with the hidden constant set to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Bound {
    /// λd√(S/T) + √(S/T)(4W²σ² + 2W²G₂²) + C₁, C₁ = W²(p̃d + p̃d/K).
    pub headline: f64,
    /// The residual C₁ of the headline form.
    pub c1: f64,
    /// The explicit right-hand side from the proof.
    pub explicit: f64,
}

pub fn theorem1_bound(c: &BoundConstants) -> Theorem1Bound {
    let root = (c.s / c.rounds.max(1) as f64).sqrt();
    let d = c.d as f64;
    let w2 = (c.local_steps * c.local_steps) as f64;
    let inv_k = c.shots.map_or(0.0, |k| 1.0 / f64::from(k));
    let p = c.p_tilde;
    let drift = root * (4.0 * w2 * c.sigma * c.sigma + 2.0 * w2 * c.g2 * c.g2);
    let c1 = w2 * (p * d + p * d * inv_k);
    let headline = c.lambda * d * root + drift + c1;
    let noise = (p - 2.0).powi(2) * p * p * c.g1 * c.g1
        + (1.0 - p).powi(2) * p * p * d / 4.0
        + (2.0 - p).powi(2) * p * p * c.g1 * d
        + (7.0 * (1.0 - p / 2.0).powi(2) + 0.125) * inv_k * d;
    let explicit = (2.0 + 80.0 * c.lambda * d) * root + drift + (4.0 * w2 * root + 2.0 * w2) * noise;
    Theorem1Bound { headline, c1, explicit }
}

/// What counts as reaching the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Target {
    /// Metric ≥ value (accuracy).
    AtLeast(f64),
    /// Metric ≤ value (energy).
    AtMost(f64),
}

impl Target {
    fn reached(self, metric: f64) -> bool {
        match self {
            Target::AtLeast(v) => metric >= v,
            Target::AtMost(v) => metric <= v,
        }
    }
}

/// Wall-clock at the first round t ≥ 1 whose metric meets the target.
pub fn time_to_target(trace: &TrainingTrace, target: Target) -> Option<f64> {
    trace.records.iter().skip(1).find(|r| target.reached(r.metric)).map(|r| r.wall_clock_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub nodes: usize,
    pub rounds: usize,
    pub total_wall_clock_s: f64,
    /// Baseline time for the same T divided by this run's time.
    pub fixed_rounds_speedup: Option<f64>,
    pub time_to_target_s: Option<f64>,
    /// Baseline time-to-target over this run's; `None` if either never got there.
    pub speedup_to_target: Option<f64>,
}

fn ratio(base: f64, this: f64) -> Option<f64> {
    if this > 0.0 {
        Some(base / this)
    } else if base == this {
        Some(1.0)
    } else {
        None
    }
}

/// Ratios against the single-node run (or the first entry when there is no
/// Q = 1 run).
pub fn speedup_metrics(traces: &[(usize, &TrainingTrace)], target: Target) -> Result<Vec<SpeedupRow>> {
    let (_, base) = traces
        .iter()
        .find(|(q, _)| *q == 1)
        .or_else(|| traces.first())
        .ok_or(Error::Empty("speedup needs at least one trace"))?;
    let base_total = base.final_record().wall_clock_s;
    let base_hit = time_to_target(base, target);
    Ok(traces
        .iter()
        .map(|&(nodes, trace)| {
            let total = trace.final_record().wall_clock_s;
            let hit = time_to_target(trace, target);
            SpeedupRow {
                nodes,
                rounds: trace.rounds(),
                total_wall_clock_s: total,
                fixed_rounds_speedup: ratio(base_total, total),
                time_to_target_s: hit,
                speedup_to_target: base_hit.zip(hit).and_then(|(b, h)| ratio(b, h)),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{GlobalConfig, RoundRecord};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_inputs<R: Rng + ?Sized>(rng: &mut R) -> ComponentInputs {
        ComponentInputs {
            y_hat: rng.random(),
            y_plus: rng.random(),
            y_minus: rng.random(),
            label: f64::from(rng.random_range(0..=1u8)),
            theta_j: rng.random::<f64>() * std::f64::consts::TAU,
            p_tilde: rng.random(),
            lambda: rng.random::<f64>() * 0.1,
        }
    }

    fn trace(norms: &[f64], clocks: &[f64], metrics: &[f64]) -> TrainingTrace {
        let records = (0..norms.len())
            .map(|i| RoundRecord {
                round: i,
                wall_clock_s: clocks[i],
                train_loss: 0.0,
                grad_norm_sq: norms[i],
                metric: metrics[i],
            })
            .collect();
        TrainingTrace {
            config: GlobalConfig::default(),
            workload: serde_json::Value::Null,
            records,
            params: vec![vec![]; norms.len()],
        }
    }

    #[test]
    fn r1_examples() {
        assert_eq!(utility_r1(&trace(&[9.0, 0.0, 0.0], &[0.0; 3], &[0.0; 3])).unwrap(), 0.0);
        assert_eq!(utility_r1(&trace(&[9.0, 4.0], &[0.0; 2], &[0.0; 2])).unwrap(), 4.0);
        assert!(utility_r1(&trace(&[9.0], &[0.0], &[0.0])).is_err());
    }

    #[test]
    fn smoothness_examples() {
        assert_eq!(bound_constants(72, 0.0).0, 7776.0);
        assert_eq!(bound_constants(1, 0.0).1, 1.0);
        assert_abs_diff_eq!(bound_constants(2, 1.0).1, 20.849_555_921_538_76, epsilon = 1e-12);
    }

    #[test]
    fn lemma3_special_cases() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let mut x = random_inputs(&mut r);
        x.p_tilde = 0.0;
        let c = lemma3_constants(&x, 10.0);
        assert_eq!(c.c1, 0.0);
        assert_eq!(c.c2, x.y_plus - x.y_minus);
        assert_abs_diff_eq!(c.c4, x.y_hat * (1.0 - x.y_hat) / 10.0, epsilon = 1e-15);
        assert_eq!(exact_mean_offset(&x), 0.0);

        let mut x = random_inputs(&mut r);
        x.lambda = 0.0;
        x.label = 0.5;
        assert_eq!(lemma3_constants(&x, 5.0).c1, 0.0);
        assert_eq!(exact_mean_offset(&x), 0.0);
    }

    #[test]
    fn bound_limits() {
        let c = BoundConstants::new(72, 0.0, 1.0, 0.1, Some(100), 2, 4, 1_000_000_000_000_000_000);
        let b = theorem1_bound(&c);
        assert!((b.headline - b.c1).abs() < 1e-3 * b.c1);
        let ideal = BoundConstants { p_tilde: 0.0, shots: None, ..c };
        assert_eq!(theorem1_bound(&ideal).c1, 0.0);
        let t1 = theorem1_bound(&BoundConstants { rounds: 100, ..ideal }).headline;
        let t4 = theorem1_bound(&BoundConstants { rounds: 400, ..ideal }).headline;
        assert_abs_diff_eq!(t1 / t4, 2.0, epsilon = 1e-12);
        let w1 = theorem1_bound(&BoundConstants { rounds: 100, local_steps: 1, lambda: 0.0, ..ideal }).headline;
        let w2 = theorem1_bound(&BoundConstants { rounds: 100, local_steps: 2, lambda: 0.0, ..ideal }).headline;
        assert_abs_diff_eq!(w2 / w1, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn speedup_examples() {
        let a = trace(&[0.0; 3], &[0.0, 50.0, 100.0], &[0.5, 0.9, 0.96]);
        let same = speedup_metrics(&[(1, &a), (2, &a)], Target::AtLeast(0.95)).unwrap();
        for row in &same {
            assert_eq!(row.fixed_rounds_speedup, Some(1.0));
            assert_eq!(row.speedup_to_target, Some(1.0));
        }
        let b = trace(&[0.0; 3], &[0.0, 20.0, 40.0], &[0.5, 0.97, 0.99]);
        let rows = speedup_metrics(&[(1, &a), (4, &b)], Target::AtLeast(0.95)).unwrap();
        assert_eq!(rows[1].speedup_to_target, Some(5.0));
        assert_eq!(rows[1].fixed_rounds_speedup, Some(2.5));
        let never = speedup_metrics(&[(1, &a)], Target::AtLeast(0.999)).unwrap();
        assert_eq!(never[0].time_to_target_s, None);
        assert_eq!(never[0].speedup_to_target, None);
        let energy = speedup_metrics(&[(1, &a)], Target::AtMost(0.6)).unwrap();
        assert_eq!(energy[0].time_to_target_s, None);
    }
}
