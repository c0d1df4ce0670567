use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qudio::ansatz::{build_qnn_ansatz, build_vqe_ansatz_with};
use qudio::data::{self, fetch, DistillConfig, EncodedExample, MnistFiles};
use qudio::diagnostics::{bias_check, speedup_metrics, utility_r1, SpeedupRow, Target};
use qudio::engine::{initial_params, run_qudio, GlobalConfig, QnnProblem, TrainingTrace, VqeProblem};
use qudio::gradient::{QnnLossSpec, VqeSpec};
use qudio::linalg::exact_ground_energy;
use qudio::pauli::{partition_terms, Hamiltonian};
use qudio::rng;
use qudio::statevector::StateVector;
use qudio::{Error, Result};
use rand::Rng;
use serde_json::{json, Value};

use crate::args::*;
use crate::manifest::{digest_file, InputDigest, RunManifest};

pub const VQE_REFERENCE: &str = "1100";
const QNN_QUBITS: usize = 6;

/// Collects output paths and writes the manifest last.
struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    fn create(manifest: RunManifest, out: Option<&Path>) -> Result<Self> {
        let dir = out.map(Path::to_path_buf).unwrap_or_else(|| manifest.default_out_dir());
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, manifest })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.manifest.outputs.push(path.clone());
        path
    }

    fn trace(&mut self, stem: &str, trace: &TrainingTrace, no_wall_clock: bool) -> Result<()> {
        let trace = if no_wall_clock { trace.without_wall_clock() } else { trace.clone() };
        trace.write_csv(self.path(&format!("{stem}.csv")))?;
        trace.write_json(self.path(&format!("{stem}.json")))
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        fs::write(self.path(name), serde_json::to_string_pretty(value)? + "\n")?;
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        fs::write(self.path(name), text)?;
        Ok(())
    }

    fn finish(mut self) -> Result<(PathBuf, String)> {
        let path = self.dir.join(crate::manifest::FILE_NAME);
        self.manifest.outputs.push(path);
        self.manifest.write(&self.dir)?;
        Ok((self.dir, self.manifest.run_id))
    }
}

fn digests(paths: &[&Path]) -> Result<Vec<InputDigest>> {
    paths.iter().map(|p| digest_file(p).map_err(Error::from)).collect()
}

fn locate_mnist(data: &DatasetArgs) -> Result<MnistFiles> {
    match MnistFiles::locate(&data.dataset_dir) {
        Ok(files) => Ok(files),
        Err(e) if data.no_fetch => Err(e),
        Err(_) => {
            eprintln!("MNIST not found in {}, downloading", data.dataset_dir.display());
            fetch::ensure_mnist(&data.dataset_dir, None)
        }
    }
}

fn load_qnn_data(data: &DatasetArgs, cfg: &DistillConfig) -> Result<(Vec<EncodedExample>, Vec<EncodedExample>, Vec<InputDigest>)> {
    let files = locate_mnist(data)?;
    let inputs = digests(&files.paths())?;
    let (train_raw, test_raw) = files.load()?;
    let (train, test) = data::distill(&train_raw, &test_raw, cfg)?;
    Ok((train, test, inputs))
}

/// `h2_<distance>A.txt`, with at least one decimal place.
pub fn hamiltonian_file_name(distance: f64) -> String {
    let mut d = format!("{distance}");
    if !d.contains('.') {
        d.push_str(".0");
    }
    format!("h2_{d}A.txt")
}

fn available_distances(dir: &Path) -> Result<Vec<f64>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Dataset(format!("cannot list {}: {e}", dir.display())))?;
    let mut out: Vec<f64> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("h2_")?.strip_suffix("A.txt")?.parse().ok()
        })
        .collect();
    if out.is_empty() {
        return Err(Error::Dataset(format!("no h2_<distance>A.txt files in {}", dir.display())));
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn load_hamiltonian(dir: &Path, distance: f64) -> Result<(Hamiltonian, InputDigest)> {
    let path = dir.join(hamiltonian_file_name(distance));
    if !path.is_file() {
        return Err(Error::Dataset(format!("missing hamiltonian file {}", path.display())));
    }
    Ok((Hamiltonian::from_file(&path)?, digest_file(&path)?))
}

fn vqe_problem(h: Hamiltonian, nodes: usize, rotation: RotationArg, partition_seed: Option<u64>) -> Result<VqeProblem> {
    let partition = partition_terms(&h, nodes, partition_seed)?;
    let spec = VqeSpec::new(build_vqe_ansatz_with(rotation.into())?, h, StateVector::from_bitstring(VQE_REFERENCE)?)?;
    VqeProblem::new(spec, partition)
}

fn print_json(value: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn qnn_train(args: &QnnTrainArgs, argv: Vec<String>) -> Result<()> {
    let config = args.train.config()?;
    let distill = DistillConfig {
        train_count: args.train_count,
        test_count: args.test_count,
        balanced: !args.no_balance,
        seed: config.seed,
    };
    let (train, test, inputs) = load_qnn_data(&args.data, &distill)?;
    let spec = QnnLossSpec::new(build_qnn_ansatz(QNN_QUBITS, args.blocks)?, args.lambda)?;
    let shards = data::shard(train.len(), config.nodes, config.seed)?;
    let problem = QnnProblem::new(spec, train, test, shards)?;
    let settings = json!({ "lambda": args.lambda, "blocks": args.blocks, "distill": distill });
    let mut out = Outputs::create(RunManifest::new("qnn-train", argv, Some(config.clone()), settings, inputs), args.train.out.as_deref())?;

    let trace = run_qudio(&config, &problem)?;
    out.trace("trace", &trace, args.train.no_wall_clock)?;
    let last = trace.final_record();
    let summary = json!({
        "final_test_accuracy": last.metric,
        "final_train_loss": last.train_loss,
        "final_grad_norm_sq": last.grad_norm_sq,
        "utility_r1": utility_r1(&trace)?,
        "rounds": trace.rounds(),
        "wall_clock_s": if args.train.no_wall_clock { 0.0 } else { last.wall_clock_s },
    });
    out.json("summary.json", &summary)?;
    let (dir, run_id) = out.finish()?;
    print_json(&json!({ "run_id": run_id, "out": dir, "summary": summary }))
}

pub fn vqe(args: &VqeArgs, argv: Vec<String>) -> Result<()> {
    let config = args.train.config()?;
    let h_args = &args.hamiltonians;
    let distances = if h_args.bond_distances.is_empty() {
        available_distances(&h_args.hamiltonian_dir)?
    } else {
        h_args.bond_distances.clone()
    };
    let mut loaded = Vec::with_capacity(distances.len());
    for &d in &distances {
        loaded.push((d, load_hamiltonian(&h_args.hamiltonian_dir, d)?));
    }
    let inputs = loaded.iter().map(|(_, (_, digest))| digest.clone()).collect();
    let settings = json!({
        "bond_distances": distances,
        "rotation": format!("{:?}", h_args.rotation),
        "partition_seed": h_args.partition_seed,
        "reference": VQE_REFERENCE,
    });
    let mut out = Outputs::create(RunManifest::new("vqe", argv, Some(config.clone()), settings, inputs), args.train.out.as_deref())?;

    let mut table = String::from("bond_distance_a,energy,exact,error\n");
    let mut rows = Vec::new();
    for (d, (h, _)) in loaded {
        let exact = exact_ground_energy(&h)?;
        let problem = vqe_problem(h, config.nodes, h_args.rotation, h_args.partition_seed)?;
        let trace = run_qudio(&config, &problem)?;
        let energy = trace.final_metric();
        let error = (energy - exact).abs();
        writeln!(table, "{d},{energy},{exact},{error}").expect("write to String");
        rows.push(json!({ "bond_distance_a": d, "energy": energy, "exact": exact, "error": error }));
        out.trace(&format!("trace_{d}A"), &trace, args.train.no_wall_clock)?;
    }
    out.text("energies.csv", &table)?;
    let (dir, run_id) = out.finish()?;
    print_json(&json!({ "run_id": run_id, "out": dir, "energies": rows }))
}

fn synthetic_example(seed: u64) -> Result<EncodedExample> {
    let mut r = rng::stream(seed, &[rng::purpose::BIAS_CHECK, u64::MAX]);
    let features: Vec<f64> = (0..data::FEATURES).map(|_| r.random::<f64>()).collect();
    data::encode(&features, r.random_range(0..2))
}

pub fn bias_check_cmd(args: &BiasCheckArgs) -> Result<()> {
    let noise = args.noise.model()?;
    let example = if args.synthetic {
        synthetic_example(args.seed)?
    } else {
        let cfg = DistillConfig { seed: args.seed, ..Default::default() };
        let (train, _, _) = load_qnn_data(&args.data, &cfg)?;
        train
            .into_iter()
            .nth(args.example)
            .ok_or_else(|| Error::Config(format!("example index {} outside the training set", args.example)))?
    };
    let spec = QnnLossSpec::new(build_qnn_ansatz(QNN_QUBITS, 4)?, args.lambda)?;
    let theta = initial_params(args.seed, spec.n_params());
    let report = bias_check(&theta, &example, &spec, &noise, args.trials as usize, args.seed)?;
    let value = serde_json::to_value(&report)?;
    match &args.out {
        Some(path) => {
            fs::write(path, serde_json::to_string_pretty(&value)? + "\n")?;
            eprintln!(
                "pass rate {:.3} (published constants), {:.3} (exact offset)",
                report.pass_rate, report.pass_rate_exact
            );
            Ok(())
        }
        None => print_json(&value),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "not reached".to_string(), |v| format!("{v:.6}"))
}

pub fn speedup_table(rows: &[SpeedupRow]) -> String {
    let mut s = String::from("nodes,rounds,total_wall_clock_s,fixed_rounds_speedup,time_to_target_s,speedup_to_target\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{:.6},{},{},{}",
            r.nodes,
            r.rounds,
            r.total_wall_clock_s,
            fmt_opt(r.fixed_rounds_speedup),
            fmt_opt(r.time_to_target_s),
            fmt_opt(r.speedup_to_target)
        )
        .expect("write to String");
    }
    s
}

pub fn bench(args: &BenchArgs, argv: Vec<String>) -> Result<()> {
    if args.sweep.is_empty() || args.sweep.contains(&0) {
        return Err(Error::Config("sweep needs node counts >= 1".into()));
    }
    let base = GlobalConfig {
        local_steps: args.local_steps,
        global_steps: args.global_steps,
        lr: args.lr,
        momentum: args.momentum,
        decay_factor: 1.0,
        noise: args.noise.model()?,
        seed: args.seed,
        ..Default::default()
    };
    let configs: Vec<GlobalConfig> = args.sweep.iter().map(|&q| GlobalConfig { nodes: q, ..base.clone() }).collect();
    for c in &configs {
        c.validate()?;
    }

    let mut traces = Vec::with_capacity(configs.len());
    let (target, inputs) = match args.workload {
        WorkloadArg::Vqe => {
            let (h, digest) = load_hamiltonian(&args.hamiltonian_dir, args.bond_distance)?;
            let exact = exact_ground_energy(&h)?;
            for c in &configs {
                traces.push(run_qudio(c, &vqe_problem(h.clone(), c.nodes, RotationArg::Euler, None)?)?);
            }
            (Target::AtMost(args.target.unwrap_or(exact + 0.1)), vec![digest])
        }
        WorkloadArg::Qnn => {
            let cfg = DistillConfig { seed: args.seed, ..Default::default() };
            let (train, test, inputs) = load_qnn_data(&args.data, &cfg)?;
            let spec = QnnLossSpec::new(build_qnn_ansatz(QNN_QUBITS, 4)?, 0.0)?;
            for c in &configs {
                let shards = data::shard(train.len(), c.nodes, c.seed)?;
                let problem = QnnProblem::new(spec.clone(), train.clone(), test.clone(), shards)?;
                traces.push(run_qudio(c, &problem)?);
            }
            (Target::AtLeast(args.target.unwrap_or(0.95)), inputs)
        }
    };
    let settings = json!({
        "workload": format!("{:?}", args.workload).to_lowercase(),
        "sweep": args.sweep,
        "target": target,
        "bond_distance": args.bond_distance,
    });
    let mut out = Outputs::create(RunManifest::new("bench", argv, Some(base), settings, inputs), args.out.as_deref())?;
    let pairs: Vec<(usize, &TrainingTrace)> = args.sweep.iter().copied().zip(traces.iter()).collect();
    let rows = speedup_metrics(&pairs, target)?;
    let table = speedup_table(&rows);
    out.text("speedup.csv", &table)?;
    out.json(
        "bench.json",
        &json!({
            "target": target,
            "rows": rows,
            "available_parallelism": std::thread::available_parallelism().map_or(1, |n| n.get()),
            "note": "absolute wall-clock ratios depend on the host machine",
        }),
    )?;
    let (dir, _) = out.finish()?;
    print!("{table}");
    eprintln!("wrote {}", dir.display());
    Ok(())
}

pub fn fetch_mnist(args: &FetchArgs) -> Result<()> {
    let files = fetch::ensure_mnist(&args.dataset_dir, args.url.as_deref())?;
    for p in files.paths() {
        println!("{}", p.display());
    }
    Ok(())
}
