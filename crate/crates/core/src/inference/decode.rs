use super::forward::{Components, Problem};
use crate::error::{Error, Result};

/// Most probable state path (0-based labels) under the given parameters.
pub fn viterbi_path(problem: &Problem, theta: &[f64]) -> Result<Vec<usize>> {
    let comps = problem.components(theta)?;
    viterbi_components(&comps)
}

pub(crate) fn viterbi_components(comps: &Components) -> Result<Vec<usize>> {
    let n = comps.n_states;
    let t_len = comps.len();
    if t_len == 0 {
        return Ok(Vec::new());
    }
    let mut score: Vec<f64> = (0..n)
        .map(|i| comps.delta[i].ln() + comps.log_dens[i])
        .collect();
    let mut back = vec![0usize; t_len * n];
    let mut next = vec![0.0; n];
    for t in 1..t_len {
        for j in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (i, s) in score.iter().enumerate() {
                let v = s + comps.gamma(t, i, j).ln();
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + comps.log_dens[t * n + j];
            back[t * n + j] = arg;
        }
        std::mem::swap(&mut score, &mut next);
    }
    let (mut state, best) = score
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if best == f64::NEG_INFINITY {
        return Err(Error::Likelihood { t: t_len });
    }
    let mut path = vec![0; t_len];
    path[t_len - 1] = state;
    for t in (1..t_len).rev() {
        state = back[t * n + state];
        path[t - 1] = state;
    }
    Ok(path)
}

/// Joint log-probability of observations and a given state path.
pub fn path_log_probability(comps: &Components, path: &[usize]) -> f64 {
    let n = comps.n_states;
    let mut lp = comps.delta[path[0]].ln() + comps.log_dens[path[0]];
    for t in 1..path.len() {
        lp += comps.gamma(t, path[t - 1], path[t]).ln() + comps.log_dens[t * n + path[t]];
    }
    lp
}
