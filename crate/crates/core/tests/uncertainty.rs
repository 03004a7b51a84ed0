use std::sync::OnceLock;

use msgamlss::families::Family;
use msgamlss::inference::layout::{PredictorRole, TermSlot};
use msgamlss::inference::{FittedModel, ModelSpec, Term};
use msgamlss::sim::{builtin_dgp, simulate};
use msgamlss::smoothing::{select_smoothness, OptimizerConfig};
use msgamlss::uncertainty::*;

fn builtin_spec() -> ModelSpec {
    ModelSpec::new(2, Family::normal(), "y")
        .with_parameter("mu", vec!["smooth(x, k=8)".parse().unwrap()])
        .unwrap()
        .with_parameter("sigma", vec![Term::linear("x")])
        .unwrap()
        .with_transitions(vec!["smooth(z, k=6)".parse().unwrap()])
}

fn fit(t_len: usize, seed: u64) -> FittedModel {
    let sim = simulate(&builtin_dgp().with_length(t_len).with_seed(seed)).unwrap();
    select_smoothness(&builtin_spec(), &sim.frame, &OptimizerConfig::default()).unwrap()
}

fn fitted() -> &'static (FittedModel, PosteriorSampleSet) {
    static F: OnceLock<(FittedModel, PosteriorSampleSet)> = OnceLock::new();
    F.get_or_init(|| {
        let model = fit(1500, 4);
        let samples = sample_posterior(&model, 1000, 11).unwrap();
        (model, samples)
    })
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|g| lo + (hi - lo) * g as f64 / (n - 1) as f64).collect()
}

fn covers(band: &Band) -> f64 {
    let inside = (0..band.grid.len())
        .filter(|&g| band.lower[g] <= band.estimate[g] && band.estimate[g] <= band.upper[g])
        .count();
    inside as f64 / band.grid.len() as f64
}

/// Indices of every non-intercept coefficient in predictors matching `role`.
fn slope_indices(model: &FittedModel, keep: impl Fn(&PredictorRole) -> bool) -> Vec<usize> {
    let mut out = Vec::new();
    for pred in model.structure.layout.predictors.iter().filter(|p| keep(&p.role)) {
        for term in &pred.terms {
            match term {
                TermSlot::Intercept { .. } => {}
                TermSlot::Linear { index, .. } => out.push(*index),
                TermSlot::Smooth { range, .. } => out.extend(range.clone()),
            }
        }
    }
    out
}

#[test]
fn sample_mean_is_near_the_estimate() {
    let (model, samples) = fitted();
    let cov = model.hessian.clone().try_inverse().unwrap();
    let r = samples.len() as f64;
    for k in 0..model.theta.len() {
        let mean = (0..samples.len()).map(|i| samples.draws[(i, k)]).sum::<f64>() / r;
        let se = (cov[(k, k)] / r).sqrt();
        assert!((mean - model.theta[k]).abs() <= 4.0 * se, "coefficient {k}");
    }
}

#[test]
fn effect_bands_contain_estimate_and_nest() {
    let (model, samples) = fitted();
    let g = grid(-0.9, 0.9, 41);
    for state in 0..2 {
        for param in ["mu", "sigma"] {
            let wide = effect_band(model, samples, param, state, "x", &g, 0.95).unwrap();
            let narrow = effect_band(model, samples, param, state, "x", &g, 0.90).unwrap();
            assert!(covers(&wide) >= 0.99, "{param} state {state}");
            for i in 0..g.len() {
                assert!(wide.lower[i] <= narrow.lower[i] && narrow.upper[i] <= wide.upper[i]);
            }
            if param == "sigma" {
                assert!(wide.lower.iter().all(|v| *v > 0.0));
            }
        }
    }
}

#[test]
fn transition_and_stationary_bands_are_probabilities() {
    let (model, samples) = fitted();
    let g = grid(-0.9, 0.9, 25);
    for target in [
        TransitionTarget::Pair { from: 0, to: 0 },
        TransitionTarget::Pair { from: 1, to: 0 },
        TransitionTarget::Stationary { state: 0 },
        TransitionTarget::Stationary { state: 1 },
    ] {
        let band = transition_band(model, samples, target, "z", &g, 0.95).unwrap();
        assert!(covers(&band) >= 0.99, "{target:?}");
        for i in 0..g.len() {
            for v in [band.lower[i], band.estimate[i], band.upper[i]] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
        let narrow = transition_band(model, samples, target, "z", &g, 0.9).unwrap();
        for i in 0..g.len() {
            assert!(band.lower[i] <= narrow.lower[i] && narrow.upper[i] <= band.upper[i]);
        }
    }
}

#[test]
fn constant_transition_draws_give_flat_bands() {
    let (model, samples) = fitted();
    let slopes = slope_indices(model, |r| matches!(r, PredictorRole::Transition { .. }));
    assert!(!slopes.is_empty());
    let mut draws = samples.draws.clone();
    let mut flat = model.clone();
    for &k in &slopes {
        draws.column_mut(k).fill(0.0);
        flat.theta[k] = 0.0;
    }
    let set = PosteriorSampleSet::from_draws(draws, 0);
    let g = grid(-0.9, 0.9, 15);
    for target in [TransitionTarget::Pair { from: 0, to: 1 }, TransitionTarget::Stationary { state: 1 }] {
        let band = transition_band(&flat, &set, target, "z", &g, 0.95).unwrap();
        for i in 1..g.len() {
            assert_eq!(band.lower[i], band.lower[0]);
            assert_eq!(band.upper[i], band.upper[0]);
            assert_eq!(band.estimate[i], band.estimate[0]);
        }
        assert!(band.upper[0] > band.lower[0]);
    }
}

#[test]
fn zero_variance_block_gives_zero_width() {
    let (model, samples) = fitted();
    let mu_state0 = {
        let layout = &model.structure.layout;
        layout.predictors[layout.state_predictor(0, 0)].range.clone()
    };
    let mut draws = samples.draws.clone();
    for k in mu_state0 {
        draws.column_mut(k).fill(model.theta[k]);
    }
    let set = PosteriorSampleSet::from_draws(draws, 0);
    let g = grid(-0.9, 0.9, 9);
    let band = effect_band(model, &set, "mu", 0, "x", &g, 0.95).unwrap();
    for i in 0..g.len() {
        assert!((band.upper[i] - band.lower[i]).abs() <= 1e-12 * (1.0 + band.estimate[i].abs()));
    }
    let other = effect_band(model, &set, "mu", 1, "x", &g, 0.95).unwrap();
    assert!(other.upper[0] > other.lower[0]);
}

#[test]
fn full_level_band_spans_the_draws() {
    let (model, samples) = fitted();
    let g = [0.0];
    let band = effect_band(model, samples, "mu", 1, "x", &g, 1.0).unwrap();
    let mut values: Vec<f64> = (0..samples.len())
        .map(|r| {
            let mut m = model.clone();
            m.theta = samples.draw(r);
            m.predict_parameters("x", &g).unwrap().values[1][0][0]
        })
        .collect();
    values.sort_by(|a, b| a.total_cmp(b));
    assert_eq!(band.lower[0], values[0]);
    assert_eq!(band.upper[0], *values.last().unwrap());
}

#[test]
fn band_width_shrinks_with_sample_size() {
    let g = grid(-0.9, 0.9, 31);
    let width = |t_len: usize| {
        let model = fit(t_len, 21);
        let samples = sample_posterior(&model, 400, 5).unwrap();
        let mut total = 0.0;
        for state in 0..2 {
            for param in ["mu", "sigma"] {
                let b = effect_band(&model, &samples, param, state, "x", &g, 0.95).unwrap();
                total += (0..g.len()).map(|i| b.upper[i] - b.lower[i]).sum::<f64>();
            }
        }
        total
    };
    let w: Vec<f64> = [1000, 2000, 4000].into_iter().map(width).collect();
    assert!(w[0] > w[1] && w[1] > w[2], "{w:?}");
}

#[test]
fn draws_are_reproducible() {
    let (model, _) = fitted();
    let a = sample_posterior(model, 3, 99).unwrap();
    let b = sample_posterior(model, 3, 99).unwrap();
    assert_eq!(a.draws, b.draws);
    let c = sample_posterior(model, 3, 100).unwrap();
    assert_ne!(a.draws, c.draws);
}
