//! Test-only oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use ndarray::Array2;
use poolcv::dataset::Class;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random SVM training instance with `n <= 20`, `d <= 3` and both classes.
///
/// Separable instances are labelled by a random hyperplane after removing
/// points inside a margin band; the others get random labels.
pub fn random_instance(rng: &mut ChaCha8Rng, separable: bool) -> (Array2<f64>, Vec<Class>) {
    loop {
        let n = rng.random_range(2..=20);
        let d = rng.random_range(1..=3);
        let scale = [0.5, 1.0, 3.0][rng.random_range(0..3)];
        let mut normal: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        normal.iter_mut().for_each(|v| *v /= norm);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        while labels.len() < n {
            let p: Vec<f64> = (0..d)
                .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect();
            let label = if separable {
                let s: f64 = p.iter().zip(&normal).map(|(a, b)| a * b).sum();
                if s.abs() < 0.3 * scale {
                    continue;
                }
                if s > 0.0 {
                    Class::Right
                } else {
                    Class::Left
                }
            } else if rng.random_bool(0.5) {
                Class::Right
            } else {
                Class::Left
            };
            rows.extend(p);
            labels.push(label);
        }
        if labels.contains(&Class::Right) && labels.contains(&Class::Left) {
            return (Array2::from_shape_vec((n, d), rows).unwrap(), labels);
        }
    }
}

/// Euclidean projection onto `{0 <= a <= c, sum a_i y_i = 0}` by bisection
/// on the multiplier of the equality constraint.
fn project(z: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        z.iter()
            .zip(y)
            .map(|(zi, yi)| (zi - lambda * yi).clamp(0.0, c))
            .collect()
    };
    let balance = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    // balance(at(lambda)) is non-increasing in lambda
    let span = z.iter().map(|v| v.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Maximises the SVM dual by accelerated projected gradient ascent with
/// adaptive restart. Stops when the projected-gradient residual vanishes.
pub fn projected_gradient_dual(x: &Array2<f64>, labels: &[Class], c: f64) -> Vec<f64> {
    let n = labels.len();
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let gram = x.dot(&x.t());
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * gram[[i, j]]).collect())
        .collect();
    let mul = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| q[i][j] * v[j]).sum::<f64>())
            .collect()
    };
    // largest eigenvalue of Q by power iteration, padded; never above the trace
    let trace = (0..n).map(|i| q[i][i]).sum::<f64>().max(1e-12);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / n as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let w = mul(&v);
        let norm = w.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm / v.iter().map(|t| t * t).sum::<f64>().sqrt();
        v = w.into_iter().map(|t| t / norm).collect();
    }
    let step = 1.0 / (1.05 * lambda).clamp(1e-12, trace);
    let objective = |a: &[f64]| {
        let qa = mul(a);
        a.iter().sum::<f64>() - 0.5 * a.iter().zip(&qa).map(|(p, r)| p * r).sum::<f64>()
    };
    let ascent = |a: &[f64]| -> Vec<f64> {
        let qa = mul(a);
        let z: Vec<f64> = a
            .iter()
            .zip(&qa)
            .map(|(p, r)| p + step * (1.0 - r))
            .collect();
        project(&z, &y, c)
    };

    let mut a = vec![0.0; n];
    let mut momentum = a.clone();
    let mut t: f64 = 1.0;
    let mut prev_obj = objective(&a);
    for _ in 0..1_000_000 {
        let next = ascent(&momentum);
        let obj = objective(&next);
        if obj < prev_obj && t > 1.0 {
            // restart momentum; a plain step is never worse beyond rounding
            t = 1.0;
            momentum = a.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        momentum = next
            .iter()
            .zip(&a)
            .map(|(p, q)| p + (t - 1.0) / t_next * (p - q))
            .collect();
        t = t_next;
        a = next;
        prev_obj = obj;
        let residual = ascent(&a)
            .iter()
            .zip(&a)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        if residual < 1e-12 {
            break;
        }
    }
    a
}

/// Exact null distribution of the Mann-Whitney U statistic for sample sizes
/// `n` and `m` without ties: `counts[u]` is the number of the `C(n+m, n)`
/// equally likely rank assignments giving statistic `u`.
pub fn exact_u_distribution(n: usize, m: usize) -> Vec<u64> {
    let total = n + m;
    let mut counts = vec![0u64; n * m + 1];
    // Enumerate which ranks (0-based) belong to the first sample.
    let mut chosen: Vec<usize> = (0..n).collect();
    loop {
        // U = sum over first-sample ranks of how many second-sample ranks lie below
        let u: usize = chosen.iter().enumerate().map(|(k, &r)| r - k).sum();
        counts[u] += 1;
        // next combination in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return counts;
            }
            i -= 1;
            if chosen[i] < total - n + i {
                chosen[i] += 1;
                for j in i + 1..n {
                    chosen[j] = chosen[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Exact two-sided p-value: twice the smaller tail, capped at 1.
pub fn exact_two_sided_p(counts: &[u64], u: usize) -> f64 {
    let total: u64 = counts.iter().sum();
    let lower: u64 = counts[..=u].iter().sum();
    let upper: u64 = counts[u..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

/// U by direct pair counting.
pub fn u_by_pairs(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .map(|x| {
            b.iter()
                .map(|y| match x.partial_cmp(y).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                })
                .sum::<f64>()
        })
        .sum()
}

/// Standard normal CDF by Simpson quadrature of the density on `[0, |z|]`.
pub fn normal_cdf(z: f64) -> f64 {
    let steps = 2000;
    let h = z.abs() / steps as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(0.0) + pdf(z.abs());
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(i as f64 * h);
    }
    let half = s * h / 3.0;
    if z >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}
