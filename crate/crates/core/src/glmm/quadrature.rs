//! Adaptive Gauss–Hermite integration of the marginal likelihood for a
//! single random-intercept factor. Levels are independent given the fixed
//! effects, so the integral factorizes into one-dimensional pieces.

use super::design::DesignMatrix;
use super::laplace::{bernoulli_loglik, sigmoid};
use super::GlmmError;

pub const MIN_NODES: usize = 64;
pub const MAX_LEVELS: usize = 10;

/// Nodes and weights for `integral f(x) exp(-x^2) dx`, nodes descending.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact (to quadrature precision) marginal log-likelihood with one factor.
pub fn loglik_quadrature_oracle(
    d: &DesignMatrix,
    beta: &[f64],
    sigma: f64,
    n_nodes: usize,
) -> Result<f64, GlmmError> {
    if d.factors().len() != 1 {
        return Err(GlmmError::MoreThanOneFactor(d.factors().len()));
    }
    let fac = &d.factors()[0];
    if fac.n_levels() > MAX_LEVELS {
        return Err(GlmmError::TooManyLevels(fac.n_levels()));
    }
    if beta.len() != d.n_cols() {
        return Err(GlmmError::Shape(format!("{} coefficients for {} columns", beta.len(), d.n_cols())));
    }
    let (nodes, weights) = gauss_hermite(n_nodes.max(MIN_NODES));
    let mut per_level: Vec<Vec<(f64, f64)>> = vec![Vec::new(); fac.n_levels()];
    for i in 0..d.n_rows() {
        let eta: f64 = d.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
        per_level[fac.index[i]].push((d.response()[i], eta));
    }
    let mut total = 0.0;
    for obs in &per_level {
        let g = |u: f64| -> f64 {
            obs.iter().map(|&(y, e)| bernoulli_loglik(y, e + sigma * u)).sum::<f64>() - 0.5 * u * u
        };
        // mode of g by Newton; g is strictly concave
        let mut u = 0.0;
        let mut curv = -1.0;
        for _ in 0..200 {
            let mut d1 = -u;
            let mut d2 = -1.0;
            for &(y, e) in obs {
                let mu = sigmoid(e + sigma * u);
                d1 += sigma * (y - mu);
                d2 -= sigma * sigma * mu * (1.0 - mu);
            }
            curv = d2;
            let step = d1 / d2;
            u -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        let s = 1.0 / (-curv).sqrt();
        let terms: Vec<f64> = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w.ln() + g(u + s * x) + x * x)
            .collect();
        total += s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + log_sum_exp(&terms);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glmm::design::{GroupFactor, INTERCEPT};

    #[test]
    fn hermite_rule_integrates_moments() {
        let (x, w) = gauss_hermite(64);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m0 - sqrt_pi).abs() < 1e-12);
        assert!((m2 - sqrt_pi / 2.0).abs() < 1e-12);
        assert!((m4 - 3.0 * sqrt_pi / 4.0).abs() < 1e-11);
    }

    #[test]
    fn single_observation_at_zero() {
        let d = DesignMatrix::new(
            vec![INTERCEPT.into()],
            vec![vec![1.0]],
            vec![1.0],
            vec![GroupFactor::from_labels("g", &["a"])],
        )
        .unwrap();
        let v = loglik_quadrature_oracle(&d, &[0.0], 0.0, 64).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn rejects_two_factors() {
        let d = DesignMatrix::new(
            vec![INTERCEPT.into()],
            vec![vec![1.0]],
            vec![1.0],
            vec![
                GroupFactor::from_labels("g", &["a"]),
                GroupFactor::from_labels("h", &["b"]),
            ],
        )
        .unwrap();
        assert!(matches!(
            loglik_quadrature_oracle(&d, &[0.0], 1.0, 64),
            Err(GlmmError::MoreThanOneFactor(2))
        ));
    }
}
