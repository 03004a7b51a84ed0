//! State-dependent response distributions and their link functions.

pub mod special;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use special::{
    inverse_mills, owens_t, std_normal_cdf, std_normal_log_cdf, std_normal_quantile, LN_SQRT_2PI,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFn {
    Identity,
    Log,
    Logit,
}

impl LinkFn {
    pub fn link(self, value: f64) -> f64 {
        match self {
            LinkFn::Identity => value,
            LinkFn::Log => value.ln(),
            LinkFn::Logit => (value / (1.0 - value)).ln(),
        }
    }

    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            LinkFn::Identity => eta,
            LinkFn::Log => eta.exp(),
            LinkFn::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// d g⁻¹(η) / dη
    pub fn inverse_derivative(self, eta: f64) -> f64 {
        match self {
            LinkFn::Identity => 1.0,
            LinkFn::Log => eta.exp(),
            LinkFn::Logit => {
                let p = self.inverse(eta);
                p * (1.0 - p)
            }
        }
    }
}

/// Distribution parameter slots; the kurtosis slot is reserved for
/// four-parameter families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamSlot {
    Mu,
    Sigma,
    Nu,
    Tau,
}

impl ParamSlot {
    pub fn name(self) -> &'static str {
        match self {
            ParamSlot::Mu => "mu",
            ParamSlot::Sigma => "sigma",
            ParamSlot::Nu => "nu",
            ParamSlot::Tau => "tau",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Normal,
    SkewNormal,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Normal => "normal",
            FamilyKind::SkewNormal => "skew-normal",
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "normal" | "gaussian" | "n" => Ok(FamilyKind::Normal),
            "skew-normal" | "skewnormal" | "sn" => Ok(FamilyKind::SkewNormal),
            other => Err(Error::Config(format!("unknown family `{other}`"))),
        }
    }
}

/// A response family together with one link per distribution parameter.
///
/// The skew-normal uses the direct parametrization: location `μ`, scale `σ`
/// and shape `ν`, with density `2/σ · φ(z) · Φ(ν z)`, `z = (y − μ)/σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub kind: FamilyKind,
    pub links: Vec<LinkFn>,
}

impl Family {
    pub fn new(kind: FamilyKind) -> Self {
        let links = match kind {
            FamilyKind::Normal => vec![LinkFn::Identity, LinkFn::Log],
            FamilyKind::SkewNormal => vec![LinkFn::Identity, LinkFn::Log, LinkFn::Identity],
        };
        Self { kind, links }
    }

    pub fn normal() -> Self {
        Self::new(FamilyKind::Normal)
    }

    pub fn skew_normal() -> Self {
        Self::new(FamilyKind::SkewNormal)
    }

    pub fn slots(&self) -> &'static [ParamSlot] {
        match self.kind {
            FamilyKind::Normal => &[ParamSlot::Mu, ParamSlot::Sigma],
            FamilyKind::SkewNormal => &[ParamSlot::Mu, ParamSlot::Sigma, ParamSlot::Nu],
        }
    }

    pub fn num_params(&self) -> usize {
        self.slots().len()
    }

    pub fn parameter_names(&self) -> Vec<&'static str> {
        self.slots().iter().map(|s| s.name()).collect()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.slots().iter().position(|s| s.name() == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.len() != self.num_params() {
            return Err(Error::Config(format!(
                "{:?} has {} parameters but {} links were given",
                self.kind,
                self.num_params(),
                self.links.len()
            )));
        }
        Ok(())
    }

    fn check(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Parameter(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        if !(params[1] > 0.0) || !params[1].is_finite() {
            return Err(Error::Parameter(format!("sigma must be positive, got {}", params[1])));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Parameter(format!("non-finite parameter in {params:?}")));
        }
        Ok(())
    }

    pub fn log_density(&self, y: f64, params: &[f64]) -> Result<f64> {
        self.check(params)?;
        Ok(self.log_density_unchecked(y, params))
    }

    pub(crate) fn log_density_unchecked(&self, y: f64, params: &[f64]) -> f64 {
        let (mu, sigma) = (params[0], params[1]);
        let z = (y - mu) / sigma;
        let base = -sigma.ln() - LN_SQRT_2PI - 0.5 * z * z;
        match self.kind {
            FamilyKind::Normal => base,
            FamilyKind::SkewNormal => base + std::f64::consts::LN_2 + std_normal_log_cdf(params[2] * z),
        }
    }

    /// Log density and its derivatives with respect to each natural-scale parameter.
    pub fn log_density_with_score(&self, y: f64, params: &[f64], score: &mut [f64]) -> f64 {
        let (mu, sigma) = (params[0], params[1]);
        let z = (y - mu) / sigma;
        match self.kind {
            FamilyKind::Normal => {
                score[0] = z / sigma;
                score[1] = (z * z - 1.0) / sigma;
            }
            FamilyKind::SkewNormal => {
                let alpha = params[2];
                let r = inverse_mills(alpha * z);
                score[0] = (z - alpha * r) / sigma;
                score[1] = (z * z - 1.0 - alpha * z * r) / sigma;
                score[2] = z * r;
            }
        }
        self.log_density_unchecked(y, params)
    }

    pub fn cdf(&self, y: f64, params: &[f64]) -> Result<f64> {
        self.check(params)?;
        Ok(self.cdf_unchecked(y, params))
    }

    pub(crate) fn cdf_unchecked(&self, y: f64, params: &[f64]) -> f64 {
        let z = (y - params[0]) / params[1];
        match self.kind {
            FamilyKind::Normal => std_normal_cdf(z),
            FamilyKind::SkewNormal => {
                (std_normal_cdf(z) - 2.0 * owens_t(z, params[2])).clamp(0.0, 1.0)
            }
        }
    }

    pub fn quantile(&self, p: f64, params: &[f64]) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "probability {p} outside the open unit interval"
            )));
        }
        self.check(params)?;
        let (mu, sigma) = (params[0], params[1]);
        match self.kind {
            FamilyKind::Normal => Ok(mu + sigma * std_normal_quantile(p)),
            FamilyKind::SkewNormal => Ok(mu + sigma * skew_normal_std_quantile(p, params[2])),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, params: &[f64], rng: &mut R) -> Result<f64> {
        self.check(params)?;
        let (mu, sigma) = (params[0], params[1]);
        let z = match self.kind {
            FamilyKind::Normal => rng.sample::<f64, _>(StandardNormal),
            FamilyKind::SkewNormal => {
                let alpha = params[2];
                let delta = alpha / (1.0 + alpha * alpha).sqrt();
                let u0: f64 = rng.sample(StandardNormal);
                let v: f64 = rng.sample(StandardNormal);
                let u1 = delta * u0 + (1.0 - delta * delta).sqrt() * v;
                if u0 >= 0.0 {
                    u1
                } else {
                    -u1
                }
            }
        };
        Ok(mu + sigma * z)
    }
}

/// Quantile of the standard skew-normal SN(0, 1, α): bracketed Newton on the CDF.
fn skew_normal_std_quantile(p: f64, alpha: f64) -> f64 {
    let family = Family::skew_normal();
    let params = [0.0, 1.0, alpha];
    let f = |z: f64| family.cdf_unchecked(z, &params) - p;

    // Normal-approximation starting point from the first two moments.
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    let mean = delta * (2.0 / std::f64::consts::PI).sqrt();
    let sd = (1.0 - mean * mean).sqrt();
    let mut x = mean + sd * std_normal_quantile(p);

    let mut lo = x - 1.0;
    let mut hi = x + 1.0;
    while f(lo) > 0.0 {
        lo -= 2.0 * (hi - lo);
    }
    while f(hi) < 0.0 {
        hi += 2.0 * (hi - lo);
    }
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = family.log_density_unchecked(x, &params).exp();
        let mut next = x - fx / dens;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || hi - lo <= 1e-15 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}
