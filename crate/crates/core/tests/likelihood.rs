mod common;

use common::oracles::*;
use common::*;
use msgamlss::families::Family;
use msgamlss::inference::decode::{path_log_probability, viterbi_path};
use msgamlss::inference::{self, InitialDistribution, Problem};
use msgamlss::io::frame::TimeSeriesFrame;
use msgamlss::Error;
use rand::Rng;

#[test]
fn forward_matches_exhaustive_path_sum() {
    for case in 0..12 {
        let n = 2 + case % 2;
        let t_len = if n == 2 { 6 } else { 5 };
        let family = if case % 4 == 3 { Family::skew_normal() } else { Family::normal() };
        let (_, frame, problem, theta) = random_instance(100 + case as u64, t_len, n, family, initial_for(case, n));
        let ll = problem.log_likelihood(&theta).unwrap();
        let oracle = path_sum(&direct(&problem, &frame, &theta));
        assert!(((ll - oracle) / oracle).abs() <= 1e-10, "case {case}: {ll} vs {oracle}");
    }
}

#[test]
fn scaled_forward_matches_naive_product() {
    let (_, frame, problem, theta) = random_instance(7, 200, 2, Family::normal(), InitialDistribution::Stationary);
    let d = direct(&problem, &frame, &theta);
    let n = 2;
    let mut alpha: Vec<f64> = (0..n).map(|i| d.delta[i] * d.log_dens[0][i].exp()).collect();
    for t in 1..200 {
        alpha = (0..n)
            .map(|j| (0..n).map(|i| alpha[i] * d.gammas[t - 1].get(i, j)).sum::<f64>() * d.log_dens[t][j].exp())
            .collect();
    }
    let naive = alpha.iter().sum::<f64>().ln();
    assert!(naive.is_finite());
    let ll = problem.log_likelihood(&theta).unwrap();
    assert!((ll - naive).abs() <= 1e-8, "{ll} vs {naive}");
}

#[test]
fn normalized_forward_variables_sum_to_one() {
    let (_, _, problem, theta) = random_instance(8, 300, 3, Family::normal(), InitialDistribution::Uniform);
    let comps = problem.components(&theta).unwrap();
    let fwd = problem.forward(&comps).unwrap();
    for row in fwd.phi.chunks(3) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn single_state_is_independent_sum() {
    let (_, frame, problem, theta) = random_instance(9, 40, 1, Family::skew_normal(), InitialDistribution::Uniform);
    let d = direct(&problem, &frame, &theta);
    let sum: f64 = d.log_dens.iter().map(|r| r[0]).sum();
    let ll = problem.log_likelihood(&theta).unwrap();
    assert!((ll - sum).abs() < 1e-10 * sum.abs());
}

#[test]
fn relabeling_states_leaves_likelihood_unchanged() {
    for (seed, n, perm) in [(10, 2, vec![1, 0]), (11, 3, vec![2, 0, 1]), (12, 3, vec![1, 0, 2])] {
        for initial in [InitialDistribution::Uniform, InitialDistribution::Stationary] {
            let (_, _, problem, theta) = random_instance(seed, 80, n, Family::normal(), initial);
            let (map, _) = problem.structure.layout.state_permutation(&perm).unwrap();
            let permuted: Vec<f64> = map.iter().map(|&k| theta[k]).collect();
            let a = problem.log_likelihood(&theta).unwrap();
            let b = problem.log_likelihood(&permuted).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn relabeling_with_fixed_delta_permutes_delta() {
    let d = vec![0.2, 0.8];
    let (spec, frame, problem, theta) = random_instance(13, 60, 2, Family::normal(), InitialDistribution::Fixed(d));
    let (map, _) = problem.structure.layout.state_permutation(&[1, 0]).unwrap();
    let permuted: Vec<f64> = map.iter().map(|&k| theta[k]).collect();
    let spec2 = spec.with_initial(InitialDistribution::Fixed(vec![0.8, 0.2]));
    let p2 = Problem::fit_structure(&spec2, &frame).unwrap();
    let a = problem.log_likelihood(&theta).unwrap();
    let b = p2.log_likelihood(&permuted).unwrap();
    assert!((a - b).abs() <= 1e-10 * a.abs());
}

#[test]
fn gradient_matches_finite_differences() {
    for case in 0..8 {
        let n = 2 + case % 2;
        let family = if case % 3 == 2 { Family::skew_normal() } else { Family::normal() };
        let (_, _, problem, theta) = random_instance(200 + case as u64, 50, n, family, initial_for(case, n));
        let mut r = rng(case as u64);
        let lambda: Vec<f64> = (0..problem.structure.layout.num_penalties())
            .map(|_| 10f64.powf(r.random_range(-2.0..2.0)))
            .collect();
        let g = inference::gradient(&problem.structure.spec, &theta, &lambda, &{
            // Rebuild through the public wrapper to exercise it too.
            let mut rr = rng(200 + case as u64);
            random_frame(50, &mut rr)
        })
        .unwrap();
        let fd = fd_gradient(&problem, &theta, &lambda);
        let err: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        assert!(inf_norm(&err) <= 1e-5 * inf_norm(&fd).max(1.0), "case {case}: {}", inf_norm(&err));
    }
}

#[test]
fn single_state_gradient_is_least_squares_score() {
    let y = [0.3, -1.2, 2.5, 0.7, 1.1];
    let mut cols = indexmap::IndexMap::new();
    cols.insert("y".to_string(), y.to_vec());
    let frame = TimeSeriesFrame::new("y", cols).unwrap();
    let spec = inference::ModelSpec::new(1, Family::normal(), "y");
    let (mu, log_sigma) = (0.4, 0.2_f64);
    let sigma = log_sigma.exp();
    let g = inference::gradient(&spec, &[mu, log_sigma], &[], &frame).unwrap();
    let d_mu = -y.iter().map(|v| v - mu).sum::<f64>() / (sigma * sigma);
    let d_ls = y.len() as f64 - y.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (sigma * sigma);
    assert!((g[0] - d_mu).abs() < 1e-12);
    assert!((g[1] - d_ls).abs() < 1e-12);
}

#[test]
fn penalty_gradient_is_lambda_s_b() {
    let (_, _, problem, theta) = random_instance(15, 30, 2, Family::normal(), InitialDistribution::Uniform);
    let np = problem.structure.layout.num_penalties();
    let zero = vec![0.0; np];
    let mut lambda = zero.clone();
    lambda[1] = 3.5;
    let (_, g0) = problem.penalized_nll_grad(&theta, &zero).unwrap();
    let (_, g1) = problem.penalized_nll_grad(&theta, &lambda).unwrap();
    let block = &problem.structure.layout.penalties[1];
    let s = problem.structure.penalty_matrix(1);
    let b = nalgebra::DVector::from_column_slice(&theta[block.range.clone()]);
    let sb = s * b * 3.5;
    for (k, idx) in block.range.clone().enumerate() {
        assert!((g1[idx] - g0[idx] - sb[k]).abs() < 1e-12);
    }
    for idx in (0..theta.len()).filter(|i| !block.range.contains(i)) {
        assert_eq!(g1[idx], g0[idx]);
    }
}

#[test]
fn penalized_objective_properties() {
    let (_, _, problem, theta) = random_instance(16, 40, 2, Family::normal(), InitialDistribution::Uniform);
    let np = problem.structure.layout.num_penalties();
    let ll = problem.log_likelihood(&theta).unwrap();
    assert_eq!(problem.penalized_nll(&theta, &vec![0.0; np]).unwrap(), -ll);
    let mut prev = f64::NEG_INFINITY;
    for l in [0.0, 0.1, 1.0, 10.0, 1e4] {
        let mut lambda = vec![1.0; np];
        lambda[0] = l;
        let v = problem.penalized_nll(&theta, &lambda).unwrap();
        assert!(v >= prev);
        prev = v;
    }
    let mut bad = vec![1.0; np];
    bad[0] = -1.0;
    assert!(matches!(problem.penalized_nll(&theta, &bad), Err(Error::Config(_))));
}

#[test]
fn penalty_vanishes_on_null_space() {
    let (_, _, problem, mut theta) = random_instance(17, 40, 2, Family::normal(), InitialDistribution::Uniform);
    for (p, block) in problem.structure.layout.penalties.iter().enumerate() {
        let s = problem.structure.penalty_matrix(p).clone();
        let eig = nalgebra::SymmetricEigen::new(s);
        let (idx, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        let v = eig.eigenvectors.column(idx);
        for (k, i) in block.range.clone().enumerate() {
            theta[i] = 3.0 * v[k];
        }
    }
    let np = problem.structure.layout.num_penalties();
    assert!(problem.penalty(&theta, &vec![1e8; np]) < 1e-4);
}

fn all_paths(n: usize, t_len: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n.pow(t_len as u32)).map(move |mut c| {
        (0..t_len)
            .map(|_| {
                let s = c % n;
                c /= n;
                s
            })
            .collect()
    })
}

#[test]
fn viterbi_matches_exhaustive_search() {
    for case in 0..6 {
        let (_, _, problem, theta) = random_instance(300 + case, 8, 2, Family::normal(), initial_for(case as usize, 2));
        let comps = problem.components(&theta).unwrap();
        let best = all_paths(2, 8)
            .map(|p| (path_log_probability(&comps, &p), p))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        let path = viterbi_path(&problem, &theta).unwrap();
        assert_eq!(path, best.1, "case {case}");
    }
}

#[test]
fn viterbi_single_observation() {
    let (_, _, problem, theta) = random_instance(18, 1, 3, Family::normal(), initial_for(1, 3));
    let comps = problem.components(&theta).unwrap();
    let expected = (0..3)
        .max_by(|&a, &b| {
            let fa = comps.delta[a].ln() + comps.log_dens[a];
            let fb = comps.delta[b].ln() + comps.log_dens[b];
            fa.total_cmp(&fb)
        })
        .unwrap();
    assert_eq!(viterbi_path(&problem, &theta).unwrap(), vec![expected]);
}

#[test]
fn viterbi_beats_random_paths() {
    let (_, _, problem, theta) = random_instance(19, 60, 3, Family::normal(), InitialDistribution::Uniform);
    let comps = problem.components(&theta).unwrap();
    let path = viterbi_path(&problem, &theta).unwrap();
    let best = path_log_probability(&comps, &path);
    let mut r = rng(5);
    for _ in 0..1000 {
        let alt: Vec<usize> = (0..60).map(|_| r.random_range(0..3)).collect();
        assert!(best >= path_log_probability(&comps, &alt));
    }
}

#[test]
fn single_state_residuals_are_standardized_values() {
    let (_, frame, problem, theta) = random_instance(20, 50, 1, Family::normal(), InitialDistribution::Uniform);
    let res = inference::residuals::pseudo_residuals(&problem, &theta).unwrap();
    let comps = problem.components(&theta).unwrap();
    for t in 0..50 {
        let p = comps.params_at(t, 0);
        let z = (frame.response()[t] - p[0]) / p[1];
        assert!((res.residuals[t] - z).abs() < 1e-9 * (1.0 + z.abs()), "{} vs {z}", res.residuals[t]);
    }
    assert_eq!(res.clamped, 0);
}

#[test]
fn extreme_scale_stays_finite() {
    let (_, _, problem, mut theta) = random_instance(21, 20, 2, Family::normal(), InitialDistribution::Uniform);
    // Tiny σ in both states puts every observation far in the tails, where
    // densities underflow unless handled in log space.
    for i in 0..2 {
        let p = problem.structure.layout.state_predictor(i, 1);
        let range = problem.structure.layout.predictors[p].range.clone();
        theta[range.start] = -20.0 - i as f64;
        theta[range.start + 1] = 0.0;
    }
    let ll = problem.log_likelihood(&theta).unwrap();
    assert!(ll.is_finite() && ll < -1e10);
    let (_, g) = problem.log_likelihood_grad(&theta).unwrap();
    assert!(g.iter().all(|v| v.is_finite()));
}
