use std::f64::consts::TAU;

use rand::Rng;

use super::config::{GlobalConfig, MomentumPolicy};
use super::optim::{lr_schedule, sgd_step, synchronize};
use super::problems::{StepContext, Workload};
use super::trace::{RoundRecord, TrainingTrace};
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

/// θ⁰ drawn uniformly from [0, 2π)^d under the master seed.
pub fn initial_params(seed: u64, d: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, &[purpose::INIT_PARAMS]);
    (0..d).map(|_| r.random::<f64>() * TAU).collect()
}

#[cfg(not(target_arch = "wasm32"))]
struct Stopwatch(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Stopwatch {
    fn start() -> Self {
        Self(std::time::Instant::now())
    }

    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(target_arch = "wasm32")]
struct Stopwatch;

#[cfg(target_arch = "wasm32")]
impl Stopwatch {
    fn start() -> Self {
        Self
    }

    fn seconds(&self) -> f64 {
        0.0
    }
}

/// W local steps of node `node` in round `round`, starting from the
/// broadcast parameters. Returns the node's parameters and momentum buffer.
pub fn local_update_loop<W: Workload + ?Sized>(
    workload: &W,
    config: &GlobalConfig,
    node: usize,
    round: usize,
    theta: &[f64],
    mut velocity: Vec<f64>,
    lr: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = rng::node_stream(config.seed, node, round);
    let mut local = theta.to_vec();
    for step in 0..config.local_steps {
        let ctx = StepContext { node, round, step };
        let g = workload.local_gradient(ctx, &local, &config.noise, &mut rng)?;
        sgd_step(&mut local, &g, lr, &mut velocity, config.momentum);
    }
    Ok((local, velocity))
}

fn run_nodes<W: Workload + ?Sized>(
    workload: &W,
    config: &GlobalConfig,
    round: usize,
    theta: &[f64],
    velocities: Vec<Vec<f64>>,
    lr: f64,
) -> Vec<Result<(Vec<f64>, Vec<f64>)>> {
    let job = |(node, v): (usize, Vec<f64>)| local_update_loop(workload, config, node, round, theta, v, lr);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        velocities.into_par_iter().enumerate().map(job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        velocities.into_iter().enumerate().map(job).collect()
    }
}

/// Runs T rounds of broadcast, parallel local updates, barrier and averaging.
pub fn run_qudio<W: Workload + ?Sized>(config: &GlobalConfig, workload: &W) -> Result<TrainingTrace> {
    config.validate()?;
    if workload.n_shards() != config.nodes {
        return Err(Error::Config(format!(
            "workload is split into {} shards but {} nodes are configured",
            workload.n_shards(),
            config.nodes
        )));
    }
    let d = workload.n_params();
    let q = config.nodes;
    let mut theta = initial_params(config.seed, d);
    let mut velocities = vec![vec![0.0; d]; q];

    let evaluate = |theta: &[f64], round: usize| {
        let mut r = rng::stream(config.seed, &[purpose::EVALUATION, round as u64]);
        workload.evaluate(theta, &config.noise, &mut r)
    };
    let m0 = evaluate(&theta, 0)?;
    let mut records = vec![RoundRecord {
        round: 0,
        wall_clock_s: 0.0,
        train_loss: m0.train_loss,
        grad_norm_sq: m0.grad_norm_sq,
        metric: m0.metric,
    }];
    let mut params = vec![theta.clone()];
    let mut elapsed = 0.0;

    for t in 0..config.global_steps {
        let lr = lr_schedule(config.lr, config.decay_factor, config.decay_period, t);
        let incoming = match config.momentum_policy {
            MomentumPolicy::ResetEachRound => vec![vec![0.0; d]; q],
            MomentumPolicy::Carry => std::mem::take(&mut velocities),
        };
        let clock = Stopwatch::start();
        let results = run_nodes(workload, config, t, &theta, incoming, lr);
        elapsed += clock.seconds();

        if results.len() != q {
            return Err(Error::Invariant(format!("barrier collected {} of {q} node results", results.len())));
        }
        let mut node_params = Vec::with_capacity(q);
        velocities = Vec::with_capacity(q);
        for (node, r) in results.into_iter().enumerate() {
            let (p, v) = r.map_err(|e| Error::NodeFailed { node, round: t, source: Box::new(e) })?;
            node_params.push(p);
            velocities.push(v);
        }
        theta = synchronize(&node_params)?;
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invariant(format!("non-finite parameters after round {t}")));
        }

        let m = evaluate(&theta, t + 1)?;
        records.push(RoundRecord {
            round: t + 1,
            wall_clock_s: elapsed,
            train_loss: m.train_loss,
            grad_norm_sq: m.grad_norm_sq,
            metric: m.metric,
        });
        params.push(theta.clone());
    }

    Ok(TrainingTrace { config: config.clone(), workload: workload.describe(), records, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::problems::RoundMetrics;
    use crate::rng::StreamRng;
    use crate::statevector::NoiseModel;
    use serde_json::Value;

    /// Quadratic bowl ½‖θ − c_node‖² per node; optionally fails.
    struct Bowl {
        centers: Vec<Vec<f64>>,
        fail_at: Option<(usize, usize)>,
    }

    impl Workload for Bowl {
        fn n_params(&self) -> usize {
            self.centers[0].len()
        }

        fn n_shards(&self) -> usize {
            self.centers.len()
        }

        fn local_gradient(&self, ctx: StepContext, theta: &[f64], _: &NoiseModel, _: &mut StreamRng) -> Result<Vec<f64>> {
            if self.fail_at == Some((ctx.node, ctx.round)) {
                return Err(Error::Invariant("boom".into()));
            }
            Ok(theta.iter().zip(&self.centers[ctx.node]).map(|(t, c)| t - c).collect())
        }

        fn evaluate(&self, theta: &[f64], _: &NoiseModel, _: &mut StreamRng) -> Result<RoundMetrics> {
            let g2 = theta.iter().map(|t| t * t).sum();
            Ok(RoundMetrics { train_loss: 0.5 * g2, grad_norm_sq: g2, metric: 0.0 })
        }

        fn describe(&self) -> Value {
            Value::Null
        }
    }

    fn config(q: usize) -> GlobalConfig {
        GlobalConfig { nodes: q, local_steps: 3, global_steps: 20, lr: 0.1, momentum: 0.5, seed: 9, ..Default::default() }
    }

    #[test]
    fn symmetric_bowls_converge_to_mean_center() {
        let w = Bowl { centers: vec![vec![1.0, -1.0], vec![-1.0, 1.0]], fail_at: None };
        let cfg = GlobalConfig { global_steps: 200, decay_factor: 1.0, ..config(2) };
        let trace = run_qudio(&cfg, &w).unwrap();
        assert_eq!(trace.records.len(), 201);
        assert_eq!(trace.params.len(), 201);
        assert!(trace.final_params().iter().all(|x| x.abs() < 1e-9));
        assert!(trace.records.windows(2).all(|p| p[1].wall_clock_s >= p[0].wall_clock_s));
    }

    #[test]
    fn node_failure_aborts() {
        let w = Bowl { centers: vec![vec![0.0]; 3], fail_at: Some((2, 4)) };
        match run_qudio(&config(3), &w) {
            Err(Error::NodeFailed { node: 2, round: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shard_count_must_match() {
        let w = Bowl { centers: vec![vec![0.0]; 2], fail_at: None };
        assert!(matches!(run_qudio(&config(3), &w), Err(Error::Config(_))));
    }

    #[test]
    fn initial_params_in_range_and_seeded() {
        let a = initial_params(5, 1000);
        assert!(a.iter().all(|x| (0.0..TAU).contains(x)));
        assert_eq!(a, initial_params(5, 1000));
        assert_ne!(a, initial_params(6, 1000));
    }

    #[test]
    fn momentum_carry_differs_from_reset() {
        let w = Bowl { centers: vec![vec![3.0]], fail_at: None };
        let reset = run_qudio(&config(1), &w).unwrap();
        let carry = run_qudio(&GlobalConfig { momentum_policy: MomentumPolicy::Carry, ..config(1) }, &w).unwrap();
        assert_eq!(reset.params[1], carry.params[1]);
        assert_ne!(reset.params[2], carry.params[2]);
    }
}
