#![allow(dead_code)]

pub mod oracles;

use indexmap::IndexMap;
use msgamlss::families::Family;
use msgamlss::inference::{InitialDistribution, ModelSpec, Problem, Term};
use msgamlss::io::frame::TimeSeriesFrame;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Response with state-like clusters and two uniform covariates.
pub fn random_frame(t_len: usize, rng: &mut ChaCha8Rng) -> TimeSeriesFrame {
    let x: Vec<f64> = (0..t_len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let z: Vec<f64> = (0..t_len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..t_len)
        .map(|_| {
            let shift = if rng.random_bool(0.5) { 1.5 } else { -1.0 };
            shift + rng.random_range(-1.5..1.5)
        })
        .collect();
    let mut cols = IndexMap::new();
    cols.insert("y".to_string(), y);
    cols.insert("x".to_string(), x);
    cols.insert("z".to_string(), z);
    TimeSeriesFrame::new("y", cols).unwrap()
}

pub fn smooth_spec(n_states: usize, family: Family, initial: InitialDistribution) -> ModelSpec {
    let k = family.num_params();
    let mut spec = ModelSpec::new(n_states, family, "y")
        .with_parameter("mu", vec!["smooth(x, k=6)".parse().unwrap()])
        .unwrap()
        .with_parameter("sigma", vec![Term::linear("x")])
        .unwrap()
        .with_transitions(vec!["smooth(z, k=5)".parse().unwrap()])
        .with_initial(initial);
    if k > 2 {
        spec = spec.with_parameter("nu", vec![Term::linear("z")]).unwrap();
    }
    spec
}

/// θ with moderate values so that every state has visible density.
pub fn random_theta(problem: &Problem, rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    (0..problem.dim())
        .map(|_| scale * rng.random_range(-1.0..1.0))
        .collect()
}

pub fn random_instance(
    seed: u64,
    t_len: usize,
    n_states: usize,
    family: Family,
    initial: InitialDistribution,
) -> (ModelSpec, TimeSeriesFrame, Problem, Vec<f64>) {
    let mut r = rng(seed);
    let frame = random_frame(t_len, &mut r);
    let spec = smooth_spec(n_states, family, initial);
    let problem = Problem::fit_structure(&spec, &frame).unwrap();
    let theta = random_theta(&problem, &mut r, 0.8);
    (spec, frame, problem, theta)
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
