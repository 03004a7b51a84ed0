use super::forward::Problem;
use crate::error::Result;
use crate::families::special::{std_normal_cdf, std_normal_quantile};

const CDF_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoResiduals {
    pub residuals: Vec<f64>,
    /// Number of one-step CDF values clamped into `[1e−12, 1 − 1e−12]`.
    pub clamped: usize,
}

/// One-step-ahead pseudo-residuals `Φ⁻¹(Σ_i w_t(i) F_i(y_t))`, with
/// `w_t ∝ φ_{t−1} Γ^{(t)}` and `w_1 = δ`.
pub fn pseudo_residuals(problem: &Problem, theta: &[f64]) -> Result<PseudoResiduals> {
    let comps = problem.components(theta)?;
    let fwd = problem.forward(&comps)?;
    let family = &problem.structure.spec.family;
    let n = comps.n_states;
    let y = problem.response();
    let mut w = vec![0.0; n];
    let mut residuals = Vec::with_capacity(y.len());
    let mut clamped = 0;
    for t in 0..y.len() {
        if t == 0 {
            w.copy_from_slice(&comps.delta);
        } else {
            for (j, wj) in w.iter_mut().enumerate() {
                *wj = (0..n).map(|i| fwd.phi[(t - 1) * n + i] * comps.gamma(t, i, j)).sum();
            }
        }
        let total: f64 = w.iter().sum();
        let mut u = 0.0;
        for (i, wi) in w.iter().enumerate() {
            u += wi / total * family.cdf_unchecked(y[t], comps.params_at(t, i));
        }
        if !(CDF_CLAMP..=1.0 - CDF_CLAMP).contains(&u) {
            clamped += 1;
            u = u.clamp(CDF_CLAMP, 1.0 - CDF_CLAMP);
        }
        residuals.push(std_normal_quantile(u));
    }
    Ok(PseudoResiduals { residuals, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against the standard normal.
pub fn ks_test_normal(sample: &[f64]) -> KsResult {
    let mut x = sample.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = std_normal_cdf(*v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let p_value = kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
    KsResult {
        statistic: d,
        p_value,
    }
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Theta-function form, accurate for small x.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let s: f64 = (0..20)
            .map(|k| (-((2 * k + 1) as f64).powi(2) * c).exp())
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * x).powi(2)).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic critical value of the KS statistic for sample size `n`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let sqrt_n = (n as f64).sqrt();
    c / (sqrt_n + 0.12 + 0.11 / sqrt_n)
}
