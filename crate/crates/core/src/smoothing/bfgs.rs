//! Dense BFGS with a backtracking line search.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Largest ∞-norm of a trial step.
    pub max_step: f64,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when no finite descent step exists along steepest descent; holds
    /// the coordinate with the largest attempted step.
    pub stalled_at: Option<usize>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns the value and gradient or an error for
/// points outside the domain. Errors during the line search shrink the step.
pub fn minimize<F>(f: F, x0: &[f64], opts: &BfgsOptions, inverse_hessian: Option<DMatrix<f64>>) -> Result<BfgsOutcome>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut fx, g0) = f(x0)?;
    let mut g = DVector::from_vec(g0);
    let warm = inverse_hessian.is_some();
    let mut h = inverse_hessian.unwrap_or_else(|| DMatrix::identity(n, n));
    let mut scaled = warm;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        let gnorm = inf_norm(g.as_slice());
        if gnorm <= opts.gradient_tolerance {
            return Ok(outcome(x, fx, g, iterations, true, None));
        }
        iterations += 1;

        let mut reset = false;
        let accepted = loop {
            let mut d = -(&h * &g);
            let mut slope = g.dot(&d);
            if !(slope < 0.0) {
                h = DMatrix::identity(n, n);
                reset = true;
                d = -g.clone();
                slope = g.dot(&d);
            }
            let dmax = inf_norm(d.as_slice());
            if dmax > opts.max_step {
                d *= opts.max_step / dmax;
                slope = g.dot(&d);
            }
            let noise = 1e-11 * (1.0 + fx.abs());
            let mut alpha = 1.0;
            let mut found = None;
            for _ in 0..60 {
                let trial = &x + alpha * &d;
                if let Ok((ft, gt)) = f(trial.as_slice()) {
                    if ft.is_finite() && gt.iter().all(|v| v.is_finite()) {
                        let armijo = ft <= fx + 1e-4 * alpha * slope;
                        let flat = ft <= fx + noise && inf_norm(&gt) < gnorm;
                        if armijo || flat {
                            found = Some((trial, ft, DVector::from_vec(gt)));
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            match found {
                Some(step) => break step,
                None if !reset => {
                    h = DMatrix::identity(n, n);
                    reset = true;
                }
                None => {
                    let worst = d.iamax();
                    return Ok(outcome(x, fx, g, iterations, false, Some(worst)));
                }
            }
        };
        let (x_new, f_new, g_new) = accepted;
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if !scaled || reset {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← H − ρ(s yᵀH + H y sᵀ) + (ρ² yᵀHy + ρ) s sᵀ
            h -= rho * (&s * hy.transpose() + &hy * s.transpose());
            h += (rho * rho * yhy + rho) * (&s * s.transpose());
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    let converged = inf_norm(g.as_slice()) <= opts.gradient_tolerance;
    Ok(outcome(x, fx, g, iterations, converged, None))
}

fn outcome(
    x: DVector<f64>,
    value: f64,
    g: DVector<f64>,
    iterations: usize,
    converged: bool,
    stalled_at: Option<usize>,
) -> BfgsOutcome {
    BfgsOutcome {
        x: x.as_slice().to_vec(),
        value,
        gradient: g.as_slice().to_vec(),
        iterations,
        converged,
        stalled_at,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> BfgsOptions {
        BfgsOptions {
            gradient_tolerance: 1e-8,
            max_iterations: 500,
            max_step: 10.0,
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((v, g))
        };
        let out = minimize(f, &[-1.2, 1.0], &opts(), None).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_with_domain_errors() {
        // Minimum at x = 2 on the domain x > 0; trial steps outside fail.
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            if x[0] <= 0.0 {
                return Err(crate::Error::Numeric("outside".into()));
            }
            Ok((x[0] - 2.0 * x[0].ln(), vec![1.0 - 2.0 / x[0]]))
        };
        let out = minimize(f, &[0.1], &opts(), None).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn starting_at_optimum_takes_no_iterations() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((x[0] * x[0], vec![2.0 * x[0]])) };
        let out = minimize(f, &[0.0], &opts(), None).unwrap();
        assert_eq!(out.iterations, 0);
    }
}
