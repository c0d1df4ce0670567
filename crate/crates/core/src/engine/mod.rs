//! The bulk-synchronous training protocol: Q local nodes each take W
//! momentum-SGD steps from the broadcast parameters, then the coordinator
//! replaces the global parameters by the plain mean of the node results.

mod config;
mod optim;
mod problems;
mod run;
mod trace;

pub use config::{GlobalConfig, MomentumPolicy};
pub use optim::{lr_schedule, sgd_step, synchronize};
pub use problems::{evaluate_accuracy, predict_label, QnnProblem, RoundMetrics, StepContext, VqeProblem, Workload};
pub use run::{initial_params, local_update_loop, run_qudio};
pub use trace::{RoundRecord, TraceSidecar, TrainingTrace, CSV_HEADER};
