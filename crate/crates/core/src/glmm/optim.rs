//! Box-constrained Nelder–Mead for the handful of variance parameters.

#[derive(Debug, Clone, PartialEq)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    /// Stop when the simplex value spread is below `ftol * max(1, |f_best|)` ...
    pub ftol: f64,
    /// ... and every vertex is within `xtol` (max-norm) of the best one.
    pub xtol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
}

fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Minimizes `f` over the box `[lower, upper]`; trial points are projected onto the box.
///
/// Projection can flatten the simplex onto a face of the box, so the search
/// restarts from the best point until a restart no longer improves it.
pub fn nelder_mead_bounded(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: NmOptions,
) -> NmResult {
    let mut best = nm_run(&mut f, x0, lower, upper, opts);
    for _ in 0..5 {
        if x0.is_empty() || best.iterations >= opts.max_iter {
            break;
        }
        let again = nm_run(&mut f, &best.x, lower, upper, opts);
        let gain = best.f - again.f;
        let done = gain <= opts.ftol * best.f.abs().max(1.0);
        let iterations = best.iterations + again.iterations;
        let evaluations = best.evaluations + again.evaluations;
        if again.f <= best.f {
            best = again;
        }
        best.iterations = iterations;
        best.evaluations = evaluations;
        if done {
            break;
        }
    }
    best.converged = best.converged && best.iterations < opts.max_iter;
    best
}

fn nm_run(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: NmOptions,
) -> NmResult {
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut start = x0.to_vec();
    clamp(&mut start, lower, upper);
    if n == 0 {
        let v = eval(&start, &mut evaluations);
        return NmResult {
            x: start,
            f: v,
            iterations: 0,
            evaluations,
            converged: true,
        };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&start, &mut evaluations);
    simplex.push((start.clone(), v0));
    for i in 0..n {
        let mut x = start.clone();
        let step = opts.initial_step * (1.0 + start[i].abs());
        x[i] = if start[i] + step <= upper[i] {
            start[i] + step
        } else {
            start[i] - step
        };
        clamp(&mut x, lower, upper);
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.ftol * best.abs().max(1.0) && x_spread <= opts.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clamp(&mut p, lower, upper);
            p
        };

        let xr = along(1.0);
        let fr = eval(&xr, &mut evaluations);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evaluations);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best_x = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut x: Vec<f64> = best_x
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            clamp(&mut x, lower, upper);
            let v = eval(&x, &mut evaluations);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    NmResult {
        x,
        f,
        iterations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPTS: NmOptions = NmOptions {
        ftol: 1e-12,
        xtol: 1e-7,
        max_iter: 2000,
        initial_step: 0.5,
    };

    #[test]
    fn quadratic_interior_minimum() {
        let r = nelder_mead_bounded(
            |x| (x[0] - 0.3).powi(2) + 2.0 * (x[1] - 1.7).powi(2),
            &[1.0, 1.0],
            &[0.0, 0.0],
            &[5.0, 5.0],
            OPTS,
        );
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 0.3).abs() < 1e-5 && (r.x[1] - 1.7).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn minimum_on_boundary() {
        let r = nelder_mead_bounded(
            |x| (x[0] + 1.0).powi(2) + (x[1] - 2.0).powi(2),
            &[1.0, 1.0],
            &[0.0, 0.0],
            &[5.0, 5.0],
            OPTS,
        );
        assert!(r.x[0].abs() < 1e-6, "{:?}", r.x);
        assert!((r.x[1] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn zero_dimensional() {
        let r = nelder_mead_bounded(|_| 4.0, &[], &[], &[], OPTS);
        assert!(r.converged);
        assert_eq!(r.f, 4.0);
    }
}
