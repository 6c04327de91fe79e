//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the library's statistics code.
#![allow(dead_code)]

use iwl_core::nn::{DenseNetwork, LayerSpec, Matrix, Mode};
use iwl_core::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal, Normal, Pareto, Poisson, Uniform};

// ---------------------------------------------------------------- weights

fn avg(x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for v in x {
        acc += v;
    }
    acc / x.len() as f64
}

fn pop_var(x: &[f64]) -> f64 {
    let m = avg(x);
    let mut acc = 0.0;
    for v in x {
        acc += (v - m).powi(2);
    }
    acc / x.len() as f64
}

fn middle(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 0 {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    } else {
        s[n / 2]
    }
}

/// Skewness as third central moment over the 1.5 power of the second.
pub fn skew_oracle(x: &[f64]) -> f64 {
    let m = avg(x);
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    for v in x {
        let d = v - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    let n = x.len() as f64;
    (m3 / n) / (m2 / n).powf(1.5)
}

fn power_transform(s: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        s.ln()
    } else {
        (s.powf(lambda) - 1.0) / lambda
    }
}

/// `-(n/2) ln var + (lambda - 1) sum ln s`, or -inf if var is not positive.
pub fn profile_ll_oracle(s: &[f64], lambda: f64) -> f64 {
    let t: Vec<f64> = s.iter().map(|&v| power_transform(v, lambda)).collect();
    let var = pop_var(&t);
    if !(var > 0.0) || !var.is_finite() {
        return f64::NEG_INFINITY;
    }
    let log_sum: f64 = s.iter().map(|v| v.ln()).sum();
    -(s.len() as f64) / 2.0 * var.ln() + (lambda - 1.0) * log_sum
}

pub fn grid_oracle() -> Vec<f64> {
    (0..=100).map(|i| -5.0 + 0.1 * i as f64).collect()
}

/// Grid scan over [-5, 5] in steps of 0.1, then golden-section search on
/// the two grid cells around the best grid point until the bracket is
/// under 1e-4. Falls back to the grid point if refinement is worse.
pub fn lambda_oracle(s: &[f64]) -> f64 {
    let grid = grid_oracle();
    let lls: Vec<f64> = grid.iter().map(|&l| profile_ll_oracle(s, l)).collect();
    let mut k = 0;
    for i in 1..lls.len() {
        if lls[i] > lls[k] {
            k = i;
        }
    }
    let mut a = grid[if k == 0 { 0 } else { k - 1 }];
    let mut b = grid[if k + 1 < grid.len() { k + 1 } else { k }];
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = profile_ll_oracle(s, x1);
    let mut f2 = profile_ll_oracle(s, x2);
    while b - a >= 1e-4 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = profile_ll_oracle(s, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = profile_ll_oracle(s, x2);
        }
    }
    let mid = (a + b) / 2.0;
    if profile_ll_oracle(s, mid) >= lls[k] {
        mid
    } else {
        grid[k]
    }
}

/// `(mu, sigma2)` of the values at or below the modified z-score cut.
pub fn robust_fit_oracle(x: &[f64], eps: f64) -> (f64, f64) {
    let med = middle(x);
    let abs_dev: Vec<f64> = x.iter().map(|v| (v - med).abs()).collect();
    let cut = med + 3.5 * middle(&abs_dev) / 0.6745;
    let kept: Vec<f64> = x.iter().cloned().filter(|&v| v <= cut).collect();
    if kept.len() >= 2 && pop_var(&kept) > 0.0 {
        return (avg(&kept), pop_var(&kept));
    }
    let v = pop_var(x);
    (avg(x), if v > 0.0 { v } else { eps * eps })
}

pub fn normal_density(x: f64, mu: f64, sigma2: f64) -> f64 {
    let d = (-(x - mu) * (x - mu) / (2.0 * sigma2)).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt();
    d.max(f64::MIN_POSITIVE)
}

/// Line-by-line reference for one batch: returns the weights and the cap.
pub fn weights_oracle(scores: &[f64], eps: f64, alpha: f64, t0: f64) -> (Vec<f64>, f64) {
    let n = scores.len();
    if scores.iter().all(|&v| v == scores[0]) {
        return (vec![1.0; n], t0);
    }
    // line 6
    let t = skew_oracle(scores).abs().max(eps);
    // line 7
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let s: Vec<f64> = scores.iter().map(|v| v - lo + eps).collect();
    // line 8
    let lambda = lambda_oracle(&s);
    let b: Vec<f64> = s.iter().map(|&v| power_transform(v, lambda)).collect();
    // lines 9-10
    let (mu_s, var_s) = robust_fit_oracle(&s, eps);
    let (mu_b, var_b) = robust_fit_oracle(&b, eps);
    // lines 11-13
    let cap = (alpha * t).min(t0);
    let w = (0..n)
        .map(|i| {
            let ps = normal_density(s[i], mu_s, var_s);
            let pb = normal_density(b[i], mu_b, var_b);
            (pb / ps).max(0.0).min(cap)
        })
        .collect();
    (w, cap)
}

/// Draws one batch from a family picked by `kind` (0..9).
pub fn mixed_batch(kind: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match kind % 9 {
        0 => LogNormal::new(0.0, 1.0).unwrap().sample_iter(rng).take(n).collect(),
        1 => Exp::new(1.0).unwrap().sample_iter(rng).take(n).collect(),
        2 => Normal::new(0.0, 1.0).unwrap().sample_iter(rng).take(n).collect(),
        3 => Uniform::new(0.0, 5.0).unwrap().sample_iter(rng).take(n).collect(),
        4 => Pareto::new(1.0, 2.0).unwrap().sample_iter(rng).take(n).collect(),
        5 => Gamma::new(0.5, 2.0).unwrap().sample_iter(rng).take(n).collect(),
        6 => Poisson::new(3.0).unwrap().sample_iter(rng).take(n).collect(),
        7 => {
            let major = Normal::new(1.0, 0.2).unwrap();
            let minor = Normal::new(6.0, 0.5).unwrap();
            (0..n)
                .map(|_| if rng.random::<f64>() < 0.03 { minor.sample(rng) } else { major.sample(rng) })
                .collect()
        }
        _ => {
            let chi: Vec<f64> = Normal::new(0.0, 0.5).unwrap().sample_iter(&mut *rng).take(8 * n).collect();
            chi.chunks(8).map(|c| c.iter().map(|v| v * v).sum()).collect()
        }
    }
}

// ---------------------------------------------------------------- metrics

/// Fraction of (anomaly, normal) pairs ranked correctly, ties counting half.
pub fn auroc_pairwise(scores: &[f64], labels: &[Label]) -> f64 {
    let mut hits = 0.0;
    let mut pairs = 0.0;
    for (i, &a) in scores.iter().enumerate() {
        if labels[i] != Label::Anomaly {
            continue;
        }
        for (j, &b) in scores.iter().enumerate() {
            if labels[j] != Label::Normal {
                continue;
            }
            pairs += 1.0;
            if a > b {
                hits += 1.0;
            } else if a == b {
                hits += 0.5;
            }
        }
    }
    hits / pairs
}

/// Average precision from a sweep over every distinct score used as a
/// `>= t` threshold, highest first.
pub fn aupr_sweep(scores: &[f64], labels: &[Label]) -> f64 {
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let positives = labels.iter().filter(|&&l| l == Label::Anomaly).count() as f64;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let mut tp = 0.0;
        let mut predicted = 0.0;
        for (s, l) in scores.iter().zip(labels) {
            if *s >= t {
                predicted += 1.0;
                if *l == Label::Anomaly {
                    tp += 1.0;
                }
            }
        }
        let recall = tp / positives;
        ap += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    ap
}

/// A random scored instance with both classes present and some ties.
pub fn metric_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<Label>) {
    let n = rng.random_range(2..=200);
    let coarse = rng.random_bool(0.5);
    let mut labels: Vec<Label> = (0..n)
        .map(|_| if rng.random_bool(0.3) { Label::Anomaly } else { Label::Normal })
        .collect();
    labels[0] = Label::Anomaly;
    labels[1] = Label::Normal;
    let scores = labels
        .iter()
        .map(|l| {
            let shift = if *l == Label::Anomaly { 0.7 } else { 0.0 };
            let v: f64 = rng.random::<f64>() + shift;
            if coarse {
                (v * 8.0).round() / 8.0
            } else {
                v
            }
        })
        .collect();
    (scores, labels)
}

// ---------------------------------------------------------------- gradients

pub fn three_layer_specs(input: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { input, output: 6, bias: true },
        LayerSpec::BatchNorm { dim: 6, affine: true },
        LayerSpec::LeakyRelu { slope: 0.01 },
        LayerSpec::Dense { input: 6, output: 5, bias: true },
        LayerSpec::BatchNorm { dim: 5, affine: true },
        LayerSpec::LeakyRelu { slope: 0.01 },
        LayerSpec::Dense { input: 5, output: 3, bias: true },
    ]
}

/// `(1/N) sum_i w_i ||f(x_i) - t_i||^2` in train mode.
pub fn weighted_sq_loss(net: &DenseNetwork, x: &Matrix, target: &Matrix, w: &[f64]) -> f64 {
    let mut probe = net.clone();
    let (y, _) = probe.forward(x, Mode::Train).unwrap();
    let mut total = 0.0;
    for r in 0..y.rows() {
        let mut sq = 0.0;
        for c in 0..y.cols() {
            sq += (y.get(r, c) - target.get(r, c)).powi(2);
        }
        total += w[r] * sq;
    }
    total / y.rows() as f64
}

/// Analytic gradient of [`weighted_sq_loss`] via the network's backward pass.
pub fn analytic_grads(net: &DenseNetwork, x: &Matrix, target: &Matrix, w: &[f64]) -> Vec<Vec<f64>> {
    let mut work = net.clone();
    let (y, tape) = work.forward(x, Mode::Train).unwrap();
    let n = y.rows() as f64;
    let mut dy = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        for c in 0..y.cols() {
            dy.row_mut(r)[c] = 2.0 * w[r] / n * (y.get(r, c) - target.get(r, c));
        }
    }
    work.backward(&tape, &dy).unwrap().0 .0
}

/// Finite-difference resolution of a central difference of `loss` at step
/// `h`: differences below this are rounding noise in the loss itself.
pub fn fd_resolution(loss: f64, h: f64) -> f64 {
    64.0 * f64::EPSILON * loss.abs().max(1.0) / h
}

/// Largest relative error between backward and central differences over
/// every parameter. Where both values are below the finite-difference
/// resolution they must agree to within it (reported as 0 error, or
/// infinity if they do not).
pub fn max_gradient_error(net: &DenseNetwork, x: &Matrix, target: &Matrix, w: &[f64], h: f64) -> f64 {
    let grads = analytic_grads(net, x, target, w);
    let resolution = fd_resolution(weighted_sq_loss(net, x, target, w), h);
    let mut worst = 0.0f64;
    let blocks = net.parameters().len();
    for b in 0..blocks {
        let len = net.parameters()[b].len();
        for i in 0..len {
            let mut plus = net.clone();
            plus.parameters_mut()[b][i] += h;
            let mut minus = net.clone();
            minus.parameters_mut()[b][i] -= h;
            let fd = (weighted_sq_loss(&plus, x, target, w) - weighted_sq_loss(&minus, x, target, w)) / (2.0 * h);
            let an = grads[b][i];
            let scale = an.abs().max(fd.abs());
            let err = if scale > resolution {
                (an - fd).abs() / scale
            } else if (an - fd).abs() <= resolution {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(err);
        }
    }
    worst
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- chi-square

/// Sample mean, variance (n-1) and skewness of per-row sums of squares of an
/// `n x m` matrix of N(0, sigma^2) entries.
pub fn chi_square_stats(m: usize, n: usize, sigma: f64, seed: u64) -> (f64, f64, f64) {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let sums: Vec<f64> = (0..n)
        .map(|_| (0..m).map(|_| normal.sample(&mut r).powi(2)).sum())
        .collect();
    let mean = avg(&sums);
    let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, var, skew_oracle(&sums))
}
