use msgamlss::inference::{InitialDistribution, PredictorRole, Problem};
use msgamlss::io::frame::TimeSeriesFrame;
use msgamlss::markov::{stationary, tpm_from_eta, Tpm};
use nalgebra::DMatrix;

/// Per-time state log-densities, transition matrices and δ, computed row by
/// row from design rows rather than through the vectorized engine.
pub struct Direct {
    pub log_dens: Vec<Vec<f64>>,
    pub gammas: Vec<Tpm>,
    pub delta: Vec<f64>,
}

pub fn direct(problem: &Problem, frame: &TimeSeriesFrame, theta: &[f64]) -> Direct {
    let s = &problem.structure;
    let n = s.n_states();
    let family = &s.spec.family;
    let k = family.num_params();
    let eval = |p: usize, t: usize| -> f64 {
        let row = s.predictor_row(p, &frame.covariate_row(t)).unwrap();
        let range = s.layout.predictors[p].range.clone();
        row.iter().zip(&theta[range]).map(|(a, b)| a * b).sum()
    };
    let eta_at = |t: usize| {
        let mut eta = DMatrix::zeros(n, n);
        for (p, pred) in s.layout.predictors.iter().enumerate() {
            if let PredictorRole::Transition { from, to } = pred.role {
                eta[(from, to)] = eval(p, t);
            }
        }
        eta
    };
    let log_dens = (0..frame.len())
        .map(|t| {
            (0..n)
                .map(|i| {
                    let params: Vec<f64> = (0..k)
                        .map(|kk| family.links[kk].inverse(eval(s.layout.state_predictor(i, kk), t)))
                        .collect();
                    family.log_density(frame.response()[t], &params).unwrap()
                })
                .collect()
        })
        .collect();
    let gammas = (1..frame.len()).map(|t| tpm_from_eta(&eta_at(t - 1))).collect();
    let delta = match &s.spec.initial {
        InitialDistribution::Uniform => vec![1.0 / n as f64; n],
        InitialDistribution::Fixed(d) => d.clone(),
        InitialDistribution::Stationary => stationary(&tpm_from_eta(&eta_at(0))).unwrap().iter().copied().collect(),
    };
    Direct { log_dens, gammas, delta }
}

pub fn path_sum(d: &Direct) -> f64 {
    let n = d.delta.len();
    let t_len = d.log_dens.len();
    let total_paths = n.pow(t_len as u32);
    let mut total = 0.0;
    let mut path = vec![0usize; t_len];
    for code in 0..total_paths {
        let mut c = code;
        for s in path.iter_mut() {
            *s = c % n;
            c /= n;
        }
        let mut p = d.delta[path[0]] * d.log_dens[0][path[0]].exp();
        for t in 1..t_len {
            p *= d.gammas[t - 1].get(path[t - 1], path[t]) * d.log_dens[t][path[t]].exp();
        }
        total += p;
    }
    total.ln()
}

pub fn initial_for(case: usize, n: usize) -> InitialDistribution {
    match case % 3 {
        0 => InitialDistribution::Uniform,
        1 => {
            let mut d: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            let s: f64 = d.iter().sum();
            d.iter_mut().for_each(|v| *v /= s);
            InitialDistribution::Fixed(d)
        }
        _ => InitialDistribution::Stationary,
    }
}

pub fn fd_gradient(problem: &Problem, theta: &[f64], lambda: &[f64]) -> Vec<f64> {
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let h = 1e-5 * (1.0 + theta[i].abs());
            work[i] = theta[i] + h;
            let fp = problem.penalized_nll(&work, lambda).unwrap();
            work[i] = theta[i] - h;
            let fm = problem.penalized_nll(&work, lambda).unwrap();
            work[i] = theta[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}
