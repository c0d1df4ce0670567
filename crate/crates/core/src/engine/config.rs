use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::NoiseModel;

/// What happens to each node's momentum buffer at a synchronization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentumPolicy {
    /// Zero the buffer when new global parameters arrive.
    #[default]
    ResetEachRound,
    /// Keep the node's buffer across rounds.
    Carry,
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalConfig {
    /// Q, the number of local nodes.
    pub nodes: usize,
    /// W, local steps between synchronizations.
    pub local_steps: usize,
    /// T, global rounds.
    pub global_steps: usize,
    /// η₀.
    pub lr: f64,
    /// β of classical momentum.
    pub momentum: f64,
    pub decay_factor: f64,
    /// Rounds between learning-rate decays.
    pub decay_period: usize,
    pub momentum_policy: MomentumPolicy,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            nodes: 1,
            local_steps: 1,
            global_steps: 100,
            lr: 0.01,
            momentum: 0.9,
            decay_factor: 0.1,
            decay_period: 40,
            momentum_policy: MomentumPolicy::default(),
            noise: NoiseModel::ideal(),
            seed: 0,
        }
    }
}

impl GlobalConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.nodes == 0 || self.local_steps == 0 || self.global_steps == 0 {
            return fail(format!(
                "nodes, local steps and global steps must be >= 1 (got Q={}, W={}, T={})",
                self.nodes, self.local_steps, self.global_steps
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return fail(format!("decay factor must lie in (0, 1], got {}", self.decay_factor));
        }
        if self.decay_period == 0 {
            return fail("decay period must be >= 1".into());
        }
        NoiseModel::new(self.noise.p, self.noise.shots)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        GlobalConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let base = GlobalConfig::default();
        for bad in [
            GlobalConfig { nodes: 0, ..base.clone() },
            GlobalConfig { local_steps: 0, ..base.clone() },
            GlobalConfig { global_steps: 0, ..base.clone() },
            GlobalConfig { lr: 0.0, ..base.clone() },
            GlobalConfig { momentum: 1.0, ..base.clone() },
            GlobalConfig { decay_factor: 0.0, ..base.clone() },
            GlobalConfig { decay_period: 0, ..base.clone() },
            GlobalConfig { noise: NoiseModel { p: 2.0, shots: None }, ..base.clone() },
            GlobalConfig { noise: NoiseModel { p: 0.0, shots: Some(0) }, ..base },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_) | Error::ZeroShots)), "{bad:?}");
        }
    }
}
