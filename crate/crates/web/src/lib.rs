//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string so the page needs no glue beyond
//! `JSON.parse`.

use std::f64::consts::{FRAC_PI_2, TAU};

use qudio::ansatz::{build_qnn_ansatz, build_vqe_ansatz};
use qudio::data::{self, EncodedExample};
use qudio::engine::{initial_params, run_qudio, GlobalConfig, VqeProblem};
use qudio::gradient::{qnn_expectation, QnnLossSpec, VqeSpec};
use qudio::linalg::exact_ground_energy;
use qudio::pauli::{parse_hamiltonian, partition_terms, Hamiltonian};
use qudio::rng;
use qudio::statevector::{effective_depolarization, noisy_expectation, sample_two_outcome, NoiseModel, StateVector};
use rand::Rng;
use serde_json::json;
use wasm_bindgen::prelude::*;

macro_rules! hamiltonians {
    ($($d:literal),*) => {
        &[$(($d, include_str!(concat!("../../../data/hamiltonians/h2_", $d, "A.txt")))),*]
    };
}

const HAMILTONIANS: &[(&str, &str)] = hamiltonians!(
    "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9", "1.0", "1.1", "1.2", "1.3", "1.4", "1.5", "1.6", "1.7", "1.8",
    "1.9", "2.0", "2.1"
);

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn hamiltonian(distance: f64) -> Result<Hamiltonian, String> {
    let key = format!("{distance:.1}");
    let (_, text) = HAMILTONIANS
        .iter()
        .find(|(d, _)| *d == key)
        .ok_or_else(|| format!("no Hamiltonian for {distance} A; available 0.3 to 2.1 in steps of 0.1"))?;
    parse_hamiltonian(text).map_err(err)
}

fn noise(p: f64, shots: u32) -> Result<NoiseModel, String> {
    if p == 0.0 && shots == 0 {
        Ok(NoiseModel::ideal())
    } else {
        NoiseModel::new(p, Some(if shots == 0 { 100 } else { shots })).map_err(err)
    }
}

fn qnn_spec() -> Result<QnnLossSpec, String> {
    QnnLossSpec::new(build_qnn_ansatz(6, 4).map_err(err)?, 0.0).map_err(err)
}

fn synthetic_example(seed: u64) -> Result<EncodedExample, String> {
    let mut r = rng::stream(seed, &[0x0057_4542]);
    let features: Vec<f64> = (0..data::FEATURES).map(|_| r.random::<f64>()).collect();
    data::encode(&features, 1).map_err(err)
}

/// Bond distances with a bundled Hamiltonian.
#[wasm_bindgen]
pub fn bond_distances() -> String {
    json!(HAMILTONIANS.iter().map(|(d, _)| d.parse::<f64>().unwrap()).collect::<Vec<_>>()).to_string()
}

/// Trains the H₂ ansatz and returns the energy after every round together
/// with the exact ground energy. `shots = 0` with `p = 0` is ideal mode.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn vqe_trace(
    distance: f64,
    nodes: usize,
    local_steps: usize,
    rounds: usize,
    lr: f64,
    p: f64,
    shots: u32,
    seed: u64,
) -> Result<String, String> {
    let h = hamiltonian(distance)?;
    let exact = exact_ground_energy(&h).map_err(err)?;
    let partition = partition_terms(&h, nodes, None).map_err(err)?;
    let reference = StateVector::from_bitstring("1100").map_err(err)?;
    let spec = VqeSpec::new(build_vqe_ansatz().map_err(err)?, h, reference).map_err(err)?;
    let problem = VqeProblem::new(spec, partition).map_err(err)?;
    let config = GlobalConfig {
        nodes,
        local_steps,
        global_steps: rounds,
        lr,
        decay_factor: 1.0,
        noise: noise(p, shots)?,
        seed,
        ..Default::default()
    };
    let trace = run_qudio(&config, &problem).map_err(err)?;
    let energies: Vec<f64> = trace.records.iter().map(|r| r.metric).collect();
    Ok(json!({
        "distance": distance,
        "exact": exact,
        "energies": energies,
        "final_error": (trace.final_metric() - exact).abs(),
    })
    .to_string())
}

/// Shows how depolarization pulls the classifier output toward 1/2 and how
/// K-shot sampling scatters it.
#[wasm_bindgen]
pub fn attenuation(p: f64, shots: u32, samples: usize, seed: u64) -> Result<String, String> {
    let spec = qnn_spec()?;
    let theta = initial_params(seed, spec.n_params());
    let example = synthetic_example(seed)?;
    let ideal = qnn_expectation(&theta, &example, &spec).map_err(err)?;
    let depth = spec.circuit.depth();
    let p_tilde = effective_depolarization(p, depth);
    let attenuated = noisy_expectation(ideal, spec.trace_o(), spec.circuit.n_qubits(), p_tilde);
    let mut r = rng::stream(seed, &[0x0057_4543]);
    let draws = (0..samples)
        .map(|_| sample_two_outcome(attenuated, shots, &mut r))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(err)?;
    let n = draws.len().max(1) as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    Ok(json!({
        "depth": depth,
        "p_tilde": p_tilde,
        "ideal": ideal,
        "attenuated": attenuated,
        "samples": draws,
        "sample_mean": mean,
        "sample_sd": sd,
        "predicted_sd": (attenuated * (1.0 - attenuated) / f64::from(shots.max(1))).sqrt(),
    })
    .to_string())
}

/// Sweeps one classifier parameter over a full period and compares the
/// parameter-shift derivative with a central finite difference.
#[wasm_bindgen]
pub fn shift_rule(slot: usize, points: usize, seed: u64) -> Result<String, String> {
    let spec = qnn_spec()?;
    if slot >= spec.n_params() {
        return Err(format!("parameter index {slot} out of range 0..{}", spec.n_params()));
    }
    let theta = initial_params(seed, spec.n_params());
    let example = synthetic_example(seed)?;
    let at = |v: f64| {
        let mut t = theta.clone();
        t[slot] = v;
        qnn_expectation(&t, &example, &spec).map_err(err)
    };
    let points = points.max(2);
    let mut angles = Vec::with_capacity(points);
    let mut values = Vec::with_capacity(points);
    for i in 0..points {
        let a = TAU * i as f64 / (points - 1) as f64;
        angles.push(a);
        values.push(at(a)?);
    }
    let x = theta[slot];
    let (plus, minus) = (at(x + FRAC_PI_2)?, at(x - FRAC_PI_2)?);
    let eps = 1e-5;
    let fd = (at(x + eps)? - at(x - eps)?) / (2.0 * eps);
    Ok(json!({
        "slot": slot,
        "theta": x,
        "value": at(x)?,
        "angles": angles,
        "values": values,
        "plus": plus,
        "minus": minus,
        "shift_derivative": (plus - minus) / 2.0,
        "finite_difference": fd,
    })
    .to_string())
}
