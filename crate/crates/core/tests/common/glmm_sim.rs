use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rationale_utility::glmm::{DesignMatrix, GroupFactor, INTERCEPT};

pub struct SimSpec {
    pub n: usize,
    /// Binary covariates after the intercept.
    pub n_x: usize,
    pub levels: Vec<usize>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub seed: u64,
}

pub fn simulate(spec: &SimSpec) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let effects: Vec<Vec<f64>> = spec
        .levels
        .iter()
        .map(|&k| (0..k).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); spec.levels.len()];
    for i in 0..spec.n {
        let mut row = vec![1.0];
        for _ in 0..spec.n_x {
            row.push(rng.gen_range(0..2) as f64);
        }
        let mut eta: f64 = row.iter().zip(&spec.beta).map(|(x, b)| x * b).sum();
        for (f, &k) in spec.levels.iter().enumerate() {
            // every level gets at least one observation
            let l = if i < k { i } else { rng.gen_range(0..k) };
            eta += spec.sigma[f] * effects[f][l];
            labels[f].push(format!("L{l:03}"));
        }
        let p = 1.0 / (1.0 + (-eta).exp());
        y.push(if rng.gen::<f64>() < p { 1.0 } else { 0.0 });
        rows.push(row);
    }
    let mut names = vec![INTERCEPT.to_string()];
    names.extend((1..=spec.n_x).map(|j| format!("x{j}")));
    let factors = labels
        .iter()
        .enumerate()
        .map(|(f, l)| GroupFactor::from_labels(&format!("f{f}"), l))
        .collect();
    DesignMatrix::new(names, rows, y, factors).unwrap()
}

/// Every row twice; the copy's group levels are renamed so they share no level with the original.
pub fn duplicate_with_fresh_levels(d: &DesignMatrix) -> DesignMatrix {
    let mut rows: Vec<Vec<f64>> = d.rows().map(|r| r.to_vec()).collect();
    rows.extend(d.rows().map(|r| r.to_vec()));
    let mut y = d.response().to_vec();
    y.extend_from_slice(d.response());
    let factors = d
        .factors()
        .iter()
        .map(|f| {
            let mut labels: Vec<String> = f.index.iter().map(|&l| f.levels[l].clone()).collect();
            labels.extend(f.index.iter().map(|&l| format!("copy-{}", f.levels[l])));
            GroupFactor::from_labels(&f.name, &labels)
        })
        .collect();
    DesignMatrix::new(d.column_names().to_vec(), rows, y, factors).unwrap()
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= m * a[c][k];
            }
            b[r] -= m * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Plain logistic regression by Fisher scoring, ignoring group factors.
pub fn logistic_mle(d: &DesignMatrix) -> Vec<f64> {
    let p = d.n_cols();
    let mut beta = vec![0.0; p];
    for _ in 0..100 {
        let mut info = vec![vec![0.0; p]; p];
        let mut score = vec![0.0; p];
        for (row, y) in d.rows().zip(d.response()) {
            let eta: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            for j in 0..p {
                score[j] += row[j] * (y - mu);
                for k in 0..p {
                    info[j][k] += mu * (1.0 - mu) * row[j] * row[k];
                }
            }
        }
        let step = solve(info, score);
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-13 {
            break;
        }
    }
    beta
}
