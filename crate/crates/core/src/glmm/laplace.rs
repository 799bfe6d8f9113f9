//! Laplace-approximate marginal likelihood for a logistic model with
//! independent random intercepts.
//!
//! Random effects are kept in standardized form: `b_f = sigma_f * u_f` with
//! `u ~ N(0, I)`, so a zero variance is an ordinary point of the parameter
//! space. For fixed variances the penalized log-likelihood
//!
//! ```text
//! PL(beta, u) = sum_i [y_i eta_i - log(1 + exp(eta_i))] - |u|^2 / 2 - ridge/2 |beta_R|^2
//! ```
//!
//! is concave, and its mode is found by damped Newton iterations. The
//! Newton system is block-structured: the levels of one factor never share an
//! observation, so the block of the factor with the most levels is diagonal
//! and is eliminated by a Schur complement. The remaining dense system holds
//! the fixed effects and the other factors' levels.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::{DesignMatrix, INTERCEPT};
use super::optim::{nelder_mead_bounded, NmOptions};
use super::GlmmError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Gradient-norm tolerance of the inner Newton iterations.
    pub inner_tol: f64,
    /// Relative tolerance on the outer objective.
    pub outer_tol: f64,
    pub max_iter: usize,
    /// Ridge penalty on non-intercept fixed effects.
    pub ridge: f64,
    /// Per-factor `(lower, upper)` bounds on the random-intercept standard
    /// deviations; empty means `(0, 10)` for every factor. Equal bounds pin a value.
    pub sigma_bounds: Vec<(f64, f64)>,
    pub sigma_start: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            inner_tol: 1e-10,
            outer_tol: 1e-6,
            max_iter: 200,
            ridge: 1e-4,
            sigma_bounds: Vec::new(),
            sigma_start: 1.0,
        }
    }
}

impl FitConfig {
    fn bounds(&self, n_factors: usize) -> Result<Vec<(f64, f64)>, GlmmError> {
        if self.sigma_bounds.is_empty() {
            return Ok(vec![(0.0, 10.0); n_factors]);
        }
        if self.sigma_bounds.len() != n_factors {
            return Err(GlmmError::Config(format!(
                "{} sigma bounds for {n_factors} factors",
                self.sigma_bounds.len()
            )));
        }
        for &(lo, hi) in &self.sigma_bounds {
            if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
                return Err(GlmmError::Config(format!("invalid sigma bounds ({lo}, {hi})")));
            }
        }
        Ok(self.sigma_bounds.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedGlmm {
    pub column_names: Vec<String>,
    /// Fixed effects on the log-odds scale.
    pub beta: Vec<f64>,
    pub factor_names: Vec<String>,
    /// Random-intercept standard deviations, one per factor.
    pub sigma: Vec<f64>,
    /// Laplace-approximate marginal log-likelihood (ridge excluded).
    pub loglik: f64,
    pub converged: bool,
    pub n_obs: usize,
    pub outer_iterations: usize,
    pub inner_grad_norm: f64,
    pub warnings: Vec<String>,
}

impl FittedGlmm {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .map(|i| self.beta[i])
    }
}

/// Random-effect vector laid out factor by factor.
fn u_offsets(d: &DesignMatrix) -> (Vec<usize>, usize) {
    let mut off = Vec::with_capacity(d.factors().len());
    let mut total = 0;
    for f in d.factors() {
        off.push(total);
        total += f.n_levels();
    }
    (off, total)
}

pub fn n_random_effects(d: &DesignMatrix) -> usize {
    u_offsets(d).1
}

fn check_dims(d: &DesignMatrix, beta: &[f64], sigma: &[f64], u: &[f64]) -> Result<(), GlmmError> {
    if beta.len() != d.n_cols() {
        return Err(GlmmError::Shape(format!(
            "{} coefficients for {} columns",
            beta.len(),
            d.n_cols()
        )));
    }
    if sigma.len() != d.factors().len() {
        return Err(GlmmError::Shape(format!(
            "{} sigmas for {} factors",
            sigma.len(),
            d.factors().len()
        )));
    }
    if u.len() != n_random_effects(d) {
        return Err(GlmmError::Shape(format!(
            "{} random effects, expected {}",
            u.len(),
            n_random_effects(d)
        )));
    }
    Ok(())
}

fn linear_predictor(d: &DesignMatrix, beta: &[f64], sigma: &[f64], u: &[f64]) -> Vec<f64> {
    let (off, _) = u_offsets(d);
    (0..d.n_rows())
        .map(|i| {
            let fixed: f64 = d.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
            let random: f64 = d
                .factors()
                .iter()
                .enumerate()
                .map(|(f, fac)| sigma[f] * u[off[f] + fac.index[i]])
                .sum();
            fixed + random
        })
        .collect()
}

/// `log(1 + exp(x))` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli log-likelihood of one observation under the logit link.
pub(crate) fn bernoulli_loglik(y: f64, eta: f64) -> f64 {
    y * eta - softplus(eta)
}

fn ridge_mask(d: &DesignMatrix) -> Vec<bool> {
    d.column_names().iter().map(|c| c != INTERCEPT).collect()
}

fn ridge_penalty(d: &DesignMatrix, beta: &[f64], ridge: f64) -> f64 {
    0.5 * ridge
        * ridge_mask(d)
            .iter()
            .zip(beta)
            .filter(|(m, _)| **m)
            .map(|(_, b)| b * b)
            .sum::<f64>()
}

/// Conditional log-likelihood `sum_i log p(y_i | beta, u)`.
pub fn conditional_loglik(
    d: &DesignMatrix,
    beta: &[f64],
    sigma: &[f64],
    u: &[f64],
) -> Result<f64, GlmmError> {
    check_dims(d, beta, sigma, u)?;
    Ok(linear_predictor(d, beta, sigma, u)
        .iter()
        .zip(d.response())
        .map(|(e, y)| bernoulli_loglik(*y, *e))
        .sum())
}

/// The penalized inner objective `PL(beta, u)`.
pub fn penalized_objective(
    d: &DesignMatrix,
    beta: &[f64],
    sigma: &[f64],
    u: &[f64],
    ridge: f64,
) -> Result<f64, GlmmError> {
    let ll = conditional_loglik(d, beta, sigma, u)?;
    Ok(ll - 0.5 * u.iter().map(|v| v * v).sum::<f64>() - ridge_penalty(d, beta, ridge))
}

/// Analytic gradient of [`penalized_objective`] with respect to `(beta, u)`.
pub fn penalized_gradient(
    d: &DesignMatrix,
    beta: &[f64],
    sigma: &[f64],
    u: &[f64],
    ridge: f64,
) -> Result<(Vec<f64>, Vec<f64>), GlmmError> {
    check_dims(d, beta, sigma, u)?;
    let (off, _) = u_offsets(d);
    let eta = linear_predictor(d, beta, sigma, u);
    let mask = ridge_mask(d);
    let mut gb: Vec<f64> = beta
        .iter()
        .zip(&mask)
        .map(|(b, m)| if *m { -ridge * b } else { 0.0 })
        .collect();
    let mut gu: Vec<f64> = u.iter().map(|v| -v).collect();
    for i in 0..d.n_rows() {
        let r = d.response()[i] - sigmoid(eta[i]);
        for (g, x) in gb.iter_mut().zip(d.row(i)) {
            *g += x * r;
        }
        for (f, fac) in d.factors().iter().enumerate() {
            gu[off[f] + fac.index[i]] += sigma[f] * r;
        }
    }
    Ok((gb, gu))
}

/// Result of maximizing `PL` over `u` (and optionally `beta`).
#[derive(Debug, Clone)]
pub(crate) struct Mode {
    pub beta: Vec<f64>,
    pub u: Vec<f64>,
    pub conditional_loglik: f64,
    /// `log det(I + Lambda Z' W Z Lambda)` at the mode.
    pub logdet_uu: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

impl Mode {
    /// Laplace approximation of the marginal log-likelihood at this mode.
    pub fn laplace(&self) -> f64 {
        self.conditional_loglik - 0.5 * self.u.iter().map(|v| v * v).sum::<f64>() - 0.5 * self.logdet_uu
    }
}

struct NewtonPass {
    objective: f64,
    conditional_loglik: f64,
    grad_norm: f64,
    /// Newton decrement `g' H^{-1} g`.
    decrement: f64,
    delta_beta: Vec<f64>,
    delta_u: Vec<f64>,
    logdet_uu: f64,
}

fn cholesky_logdet_solve(
    m: DMatrix<f64>,
    rhs: &DVector<f64>,
) -> Result<(DVector<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>), GlmmError> {
    let n = m.nrows();
    let chol = match m.clone().cholesky() {
        Some(c) => c,
        None => {
            let scale = (0..n).map(|i| m[(i, i)].abs()).fold(1.0, f64::max);
            let mut jittered = m;
            for i in 0..n {
                jittered[(i, i)] += 1e-10 * scale;
            }
            jittered.cholesky().ok_or(GlmmError::Singular)?
        }
    };
    Ok((chol.solve(rhs), chol))
}

fn chol_logdet(c: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let l = c.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// One pass over the data: objective, gradient, and the Newton direction at `(beta, u)`.
fn newton_pass(
    d: &DesignMatrix,
    sigma: &[f64],
    beta: &[f64],
    u: &[f64],
    ridge: f64,
    include_beta: bool,
) -> Result<NewtonPass, GlmmError> {
    let p = d.n_cols();
    let (off, _) = u_offsets(d);
    let factors = d.factors();
    let big = (0..factors.len()).max_by_key(|&f| (factors[f].n_levels(), usize::MAX - f));
    let n_big = big.map_or(0, |b| factors[b].n_levels());
    let beta_dim = if include_beta { p } else { 0 };
    let mut rest_off = vec![usize::MAX; factors.len()];
    let mut rest_dim = beta_dim;
    for (f, fac) in factors.iter().enumerate() {
        if Some(f) != big {
            rest_off[f] = rest_dim;
            rest_dim += fac.n_levels();
        }
    }
    let mask = ridge_mask(d);

    let mut diag = vec![1.0f64; n_big];
    let mut cross = DMatrix::<f64>::zeros(n_big, rest_dim);
    let mut dense = DMatrix::<f64>::zeros(rest_dim, rest_dim);
    let mut g_big = vec![0.0f64; n_big];
    let mut g_rest = DVector::<f64>::zeros(rest_dim);
    for j in 0..beta_dim {
        if mask[j] {
            dense[(j, j)] += ridge;
            g_rest[j] -= ridge * beta[j];
        }
    }
    for (f, fac) in factors.iter().enumerate() {
        if Some(f) == big {
            for l in 0..fac.n_levels() {
                g_big[l] -= u[off[f] + l];
            }
        } else {
            for l in 0..fac.n_levels() {
                dense[(rest_off[f] + l, rest_off[f] + l)] += 1.0;
                g_rest[rest_off[f] + l] -= u[off[f] + l];
            }
        }
    }

    let eta = linear_predictor(d, beta, sigma, u);
    let mut cond = 0.0;
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(p + factors.len());
    for i in 0..d.n_rows() {
        let y = d.response()[i];
        cond += bernoulli_loglik(y, eta[i]);
        let mu = sigmoid(eta[i]);
        let w = mu * (1.0 - mu);
        let r = y - mu;
        entries.clear();
        if include_beta {
            entries.extend(
                d.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| **x != 0.0)
                    .map(|(j, x)| (j, *x)),
            );
        }
        for (f, fac) in factors.iter().enumerate() {
            if Some(f) != big {
                entries.push((rest_off[f] + fac.index[i], sigma[f]));
            }
        }
        for &(a, va) in &entries {
            g_rest[a] += va * r;
            for &(b, vb) in &entries {
                dense[(a, b)] += w * va * vb;
            }
        }
        if let Some(bf) = big {
            let l = factors[bf].index[i];
            let sb = sigma[bf];
            diag[l] += sb * sb * w;
            g_big[l] += sb * r;
            for &(a, va) in &entries {
                cross[(l, a)] += sb * w * va;
            }
        }
    }

    let grad_norm = (g_big.iter().map(|g| g * g).sum::<f64>() + g_rest.norm_squared()).sqrt();
    let objective =
        cond - 0.5 * u.iter().map(|v| v * v).sum::<f64>() - ridge_penalty(d, beta, ridge);

    // Schur complement of the diagonal block.
    let mut schur = dense;
    let mut rhs = g_rest.clone();
    for l in 0..n_big {
        let inv = 1.0 / diag[l];
        let row = cross.row(l);
        for a in 0..rest_dim {
            let ca = row[a];
            if ca == 0.0 {
                continue;
            }
            rhs[a] -= ca * inv * g_big[l];
            for b in 0..rest_dim {
                schur[(a, b)] -= ca * inv * row[b];
            }
        }
    }
    let u_block = schur.view((beta_dim, beta_dim), (rest_dim - beta_dim, rest_dim - beta_dim)).into_owned();
    let (delta_rest, _) = cholesky_logdet_solve(schur, &rhs)?;
    let logdet_rest = if rest_dim > beta_dim {
        let c = u_block.cholesky().ok_or(GlmmError::Singular)?;
        chol_logdet(&c)
    } else {
        0.0
    };
    let logdet_uu = diag.iter().map(|v| v.ln()).sum::<f64>() + logdet_rest;

    let mut delta_u = vec![0.0; u.len()];
    if let Some(bf) = big {
        for l in 0..n_big {
            let cdot: f64 = (0..rest_dim).map(|a| cross[(l, a)] * delta_rest[a]).sum();
            delta_u[off[bf] + l] = (g_big[l] - cdot) / diag[l];
        }
    }
    for (f, fac) in factors.iter().enumerate() {
        if Some(f) != big {
            for l in 0..fac.n_levels() {
                delta_u[off[f] + l] = delta_rest[rest_off[f] + l];
            }
        }
    }
    let delta_beta = (0..beta_dim).map(|j| delta_rest[j]).collect();
    let mut decrement = g_rest.dot(&delta_rest);
    if let Some(bf) = big {
        decrement += (0..n_big).map(|l| g_big[l] * delta_u[off[bf] + l]).sum::<f64>();
    }
    Ok(NewtonPass {
        objective,
        conditional_loglik: cond,
        grad_norm,
        decrement,
        delta_beta,
        delta_u,
        logdet_uu,
    })
}

/// Maximizes `PL` by damped Newton, over `u` only or jointly over `(beta, u)`.
pub(crate) fn find_mode(
    d: &DesignMatrix,
    sigma: &[f64],
    beta0: &[f64],
    u0: &[f64],
    ridge: f64,
    include_beta: bool,
    tol: f64,
    max_iter: usize,
) -> Result<Mode, GlmmError> {
    check_dims(d, beta0, sigma, u0)?;
    let mut beta = beta0.to_vec();
    let mut u = u0.to_vec();
    let mut iterations = 0;
    loop {
        let pass = newton_pass(d, sigma, &beta, &u, ridge, include_beta)?;
        let done = |converged: bool, beta: Vec<f64>, u: Vec<f64>| Mode {
            beta,
            u,
            conditional_loglik: pass.conditional_loglik,
            logdet_uu: pass.logdet_uu,
            grad_norm: pass.grad_norm,
            converged,
        };
        if !pass.grad_norm.is_finite() {
            return Err(GlmmError::NonFinite);
        }
        if pass.grad_norm <= tol {
            return Ok(done(true, beta, u));
        }
        if iterations >= max_iter {
            return Ok(done(false, beta, u));
        }
        iterations += 1;
        // Below rounding level the objective cannot rank trial points; the
        // full Newton step is taken on trust.
        let unrankable = pass.decrement <= 1e-13 * pass.objective.abs().max(1.0);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let nb: Vec<f64> = if include_beta {
                beta.iter().zip(&pass.delta_beta).map(|(b, db)| b + step * db).collect()
            } else {
                beta.clone()
            };
            let nu: Vec<f64> = u.iter().zip(&pass.delta_u).map(|(v, dv)| v + step * dv).collect();
            let obj = penalized_objective(d, &nb, sigma, &nu, ridge)?;
            if obj > pass.objective || unrankable || (obj == pass.objective && step == 1.0) {
                beta = nb;
                u = nu;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No ascent left at machine precision.
            let converged = pass.grad_norm <= tol.sqrt();
            return Ok(done(converged, beta, u));
        }
    }
}

/// Laplace-approximate marginal log-likelihood at fixed `(beta, sigma)`.
pub fn laplace_loglik(
    d: &DesignMatrix,
    beta: &[f64],
    sigma: &[f64],
    cfg: &FitConfig,
) -> Result<f64, GlmmError> {
    let u0 = vec![0.0; n_random_effects(d)];
    let mode = find_mode(d, sigma, beta, &u0, 0.0, false, cfg.inner_tol, 100)?;
    if !mode.converged {
        return Err(GlmmError::NotConverged(format!(
            "inner Newton stopped with gradient norm {:.3e}",
            mode.grad_norm
        )));
    }
    Ok(mode.laplace())
}

/// Fits fixed effects and random-intercept standard deviations.
///
/// For each candidate `sigma` the fixed effects and random-effect modes are
/// found jointly by penalized Newton; the outer search over `sigma` is a
/// bounded Nelder–Mead on the Laplace approximation at that mode.
pub fn fit_glmm(d: &DesignMatrix, cfg: &FitConfig) -> Result<FittedGlmm, GlmmError> {
    let nf = d.factors().len();
    let bounds = cfg.bounds(nf)?;
    let free: Vec<usize> = (0..nf).filter(|&f| bounds[f].1 > bounds[f].0).collect();
    let mut warnings = Vec::new();
    for f in d.factors() {
        if f.n_levels() < 3 {
            warnings.push(format!(
                "factor {} has only {} level(s); its variance is weakly identified",
                f.name,
                f.n_levels()
            ));
        }
    }

    let nu = n_random_effects(d);
    let inner_max = 100;
    let full_sigma = |free_x: &[f64]| {
        let mut s: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        for (k, &f) in free.iter().enumerate() {
            s[f] = free_x[k];
        }
        s
    };
    let mut warm_beta = vec![0.0; d.n_cols()];
    let mut warm_u = vec![0.0; nu];
    let mut failure: Option<GlmmError> = None;
    let mut objective = |x: &[f64]| -> f64 {
        let s = full_sigma(x);
        match find_mode(d, &s, &warm_beta, &warm_u, cfg.ridge, true, cfg.inner_tol, inner_max) {
            Ok(m) => {
                let v = -m.laplace();
                warm_beta = m.beta;
                warm_u = m.u;
                v
            }
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let x0: Vec<f64> = free
        .iter()
        .map(|&f| cfg.sigma_start.clamp(bounds[f].0, bounds[f].1))
        .collect();
    let lo: Vec<f64> = free.iter().map(|&f| bounds[f].0).collect();
    let hi: Vec<f64> = free.iter().map(|&f| bounds[f].1).collect();
    let nm = nelder_mead_bounded(
        &mut objective,
        &x0,
        &lo,
        &hi,
        NmOptions {
            ftol: cfg.outer_tol,
            xtol: cfg.outer_tol.sqrt().min(1e-3),
            max_iter: cfg.max_iter,
            initial_step: 0.5,
        },
    );
    if !nm.f.is_finite() {
        return Err(failure.unwrap_or(GlmmError::NonFinite));
    }
    let sigma = full_sigma(&nm.x);
    let zero_beta = vec![0.0; d.n_cols()];
    let zero_u = vec![0.0; nu];
    let mode = find_mode(d, &sigma, &zero_beta, &zero_u, cfg.ridge, true, cfg.inner_tol, inner_max)?;
    let loglik = laplace_loglik(d, &mode.beta, &sigma, cfg).unwrap_or_else(|_| mode.laplace());

    if !nm.converged {
        warnings.push(format!(
            "variance search did not converge in {} iterations",
            cfg.max_iter
        ));
    }
    if !mode.converged {
        warnings.push(format!(
            "inner Newton stopped with gradient norm {:.3e}",
            mode.grad_norm
        ));
    }
    let max_eta = linear_predictor(d, &mode.beta, &sigma, &mode.u)
        .iter()
        .fold(0.0f64, |a, e| a.max(e.abs()));
    if max_eta > 15.0 || mode.beta.iter().any(|b| b.abs() > 10.0) {
        warnings.push(format!(
            "possible complete separation (max |eta| = {max_eta:.1}); estimates rely on ridge {}",
            cfg.ridge
        ));
    }
    for (j, name) in d.column_names().iter().enumerate() {
        if d.rows().all(|r| r[j] == 0.0) {
            warnings.push(format!("column {name} is identically zero; its coefficient is set by the ridge"));
        }
    }
    Ok(FittedGlmm {
        column_names: d.column_names().to_vec(),
        beta: mode.beta,
        factor_names: d.factors().iter().map(|f| f.name.clone()).collect(),
        sigma,
        loglik,
        converged: nm.converged && mode.converged,
        n_obs: d.n_rows(),
        outer_iterations: nm.iterations,
        inner_grad_norm: mode.grad_norm,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glmm::design::GroupFactor;

    fn tiny() -> DesignMatrix {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![1.0, (i % 3) as f64 - 1.0]).collect();
        let y = vec![1., 0., 1., 1., 0., 0., 1., 1., 1., 0., 1., 0.];
        let g: Vec<String> = (0..12).map(|i| format!("g{}", i % 4)).collect();
        let h: Vec<String> = (0..12).map(|i| format!("h{}", i % 2)).collect();
        DesignMatrix::new(
            vec![INTERCEPT.into(), "x".into()],
            rows,
            y,
            vec![GroupFactor::from_labels("g", &g), GroupFactor::from_labels("h", &h)],
        )
        .unwrap()
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((bernoulli_loglik(1.0, 0.0) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn laplace_with_zero_sigma_is_plain_loglik() {
        let d = tiny();
        let beta = [0.2, -0.4];
        let l = laplace_loglik(&d, &beta, &[0.0, 0.0], &FitConfig::default()).unwrap();
        let direct = conditional_loglik(&d, &beta, &[0.0, 0.0], &[0.0; 6]).unwrap();
        assert!((l - direct).abs() < 1e-12);
    }

    #[test]
    fn newton_solves_mode() {
        let d = tiny();
        let m = find_mode(&d, &[0.8, 0.5], &[0.0, 0.0], &[0.0; 6], 1e-4, true, 1e-10, 100).unwrap();
        assert!(m.converged);
        let (gb, gu) = penalized_gradient(&d, &m.beta, &[0.8, 0.5], &m.u, 1e-4).unwrap();
        let n: f64 = gb.iter().chain(&gu).map(|g| g * g).sum::<f64>().sqrt();
        assert!(n < 1e-9);
    }

    #[test]
    fn single_factor_matches_scalar_laplace() {
        let d = tiny().with_factors(&["g"]).unwrap();
        let beta = [0.3, -0.7];
        let sigma = 1.3;
        let fac = &d.factors()[0];
        let mut expected = 0.0;
        for l in 0..fac.n_levels() {
            let obs: Vec<(f64, f64)> = (0..d.n_rows())
                .filter(|&i| fac.index[i] == l)
                .map(|i| (d.response()[i], d.row(i)[0] * beta[0] + d.row(i)[1] * beta[1]))
                .collect();
            let mut u = 0.0;
            let mut h = 1.0;
            for _ in 0..100 {
                let mut g = -u;
                h = 1.0;
                for &(y, e) in &obs {
                    let m = sigmoid(e + sigma * u);
                    g += sigma * (y - m);
                    h += sigma * sigma * m * (1.0 - m);
                }
                u += g / h;
            }
            let val: f64 = obs.iter().map(|&(y, e)| bernoulli_loglik(y, e + sigma * u)).sum();
            expected += val - 0.5 * u * u - 0.5 * h.ln();
        }
        let got = laplace_loglik(&d, &beta, &[sigma], &FitConfig::default()).unwrap();
        assert!((got - expected).abs() < 1e-10, "{got} {expected}");
    }

    #[test]
    fn bad_dimensions() {
        let d = tiny();
        assert!(matches!(
            conditional_loglik(&d, &[0.0], &[0.0, 0.0], &[0.0; 6]),
            Err(GlmmError::Shape(_))
        ));
        let cfg = FitConfig {
            sigma_bounds: vec![(0.0, 1.0)],
            ..Default::default()
        };
        assert!(matches!(fit_glmm(&d, &cfg), Err(GlmmError::Config(_))));
    }
}
