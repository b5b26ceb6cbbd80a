//! Soft-margin linear SVM trained in the dual with pairwise (SMO-style)
//! coordinate ascent, plus prediction and the zero-one loss.
//!
//! The dual problem is
//!
//! ```text
//! maximise   sum_i a_i - 1/2 |sum_i a_i y_i x_i|^2
//! subject to 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! With a linear kernel the weight vector `w = sum_i a_i y_i x_i` is kept
//! explicitly, so each step costs `O(n d)`.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::Class;
use crate::error::{Error, Result};

/// Curvature used when the two selected points coincide.
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Upper bound `C` on every dual coefficient.
    pub box_constraint: f64,
    /// Largest tolerated KKT violation at termination.
    pub kkt_tolerance: f64,
    /// Maximum number of pair updates before giving up.
    pub max_sweeps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            box_constraint: 1.0,
            kkt_tolerance: 1e-3,
            max_sweeps: 100_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.box_constraint.is_finite() && self.box_constraint > 0.0) {
            return Err(Error::data("box constraint must be positive"));
        }
        if !(self.kkt_tolerance.is_finite() && self.kkt_tolerance > 0.0) {
            return Err(Error::data("KKT tolerance must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::data("max_sweeps must be at least 1"));
        }
        Ok(())
    }
}

/// A trained linear classifier `sign(<w, x> + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Dual coefficients, one per training sample.
    pub alphas: Vec<f64>,
    pub box_constraint: f64,
    /// False when `max_sweeps` ran out with violations above tolerance.
    pub converged: bool,
    pub iterations: usize,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn decision_value(&self, x: ArrayView1<'_, f64>) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn dot(w: &[f64], x: ArrayView1<'_, f64>) -> f64 {
    w.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
}

fn validate_training_input(x: ArrayView2<'_, f64>, y: &[Class]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::data(format!(
            "{} training rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite training feature"));
    }
    if !(y.contains(&Class::Right) && y.contains(&Class::Left)) {
        return Err(Error::Training("training data holds a single class".into()));
    }
    Ok(())
}

/// Trains a linear soft-margin SVM.
///
/// Each step picks the maximal violating pair (the index in the "up" set
/// with the largest `y_t - <w, x_t>` and the index in the "low" set with the
/// smallest, lowest index winning ties) and solves the two-variable
/// subproblem exactly, clipped to the box. Training stops once the violation
/// gap is at most `kkt_tolerance`, which keeps every KKT condition within
/// that tolerance for the bias chosen below.
///
/// The bias is the mean of `y_t - <w, x_t>` over unbound support vectors,
/// or the midpoint of the feasible interval when there are none.
pub fn train_svm(x: ArrayView2<'_, f64>, y: &[Class], cfg: &TrainConfig) -> Result<SvmModel> {
    cfg.validate()?;
    validate_training_input(x, y)?;
    let n = y.len();
    let d = x.ncols();
    let c = cfg.box_constraint;
    let ys: Vec<f64> = y.iter().map(|c| c.sign()).collect();

    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    // v_t = y_t - <w, x_t>
    let mut v: Vec<f64> = ys.clone();

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    let (mut up_max, mut low_min);
    loop {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        up_max = f64::NEG_INFINITY;
        low_min = f64::INFINITY;
        for t in 0..n {
            if in_up(alpha[t], ys[t]) && v[t] > up_max {
                up_max = v[t];
                i = t;
            }
            if in_low(alpha[t], ys[t]) && v[t] < low_min {
                low_min = v[t];
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || up_max - low_min <= cfg.kkt_tolerance {
            converged = true;
            break;
        }
        if iterations >= cfg.max_sweeps {
            break;
        }
        iterations += 1;

        // Move a_i += y_i t, a_j -= y_j t; the objective slope along this
        // direction is v_i - v_j > 0 and the curvature is |x_i - x_j|^2.
        let xi = x.row(i);
        let xj = x.row(j);
        let eta: f64 = xi.iter().zip(xj.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        let mut step = (v[i] - v[j]) / eta.max(MIN_CURVATURE);
        let cap_i = if ys[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let cap_j = if ys[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        step = step.min(cap_i).min(cap_j);

        alpha[i] = (alpha[i] + ys[i] * step).clamp(0.0, c);
        alpha[j] = (alpha[j] - ys[j] * step).clamp(0.0, c);
        // snap to the bound the clip aimed for
        if step == cap_i {
            alpha[i] = if ys[i] > 0.0 { c } else { 0.0 };
        }
        if step == cap_j {
            alpha[j] = if ys[j] > 0.0 { 0.0 } else { c };
        }

        for (k, wk) in w.iter_mut().enumerate() {
            *wk += step * (xi[k] - xj[k]);
        }
        for (t, row) in x.rows().into_iter().enumerate() {
            v[t] = ys[t] - dot(&w, row);
        }
    }

    // Recompute w from the final alphas so it matches sum a_i y_i x_i exactly
    // up to rounding, free of accumulated drift.
    let mut w = vec![0.0; d];
    for (t, row) in x.rows().into_iter().enumerate() {
        let coef = alpha[t] * ys[t];
        if coef != 0.0 {
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += coef * row[k];
            }
        }
    }
    let v: Vec<f64> = x
        .rows()
        .into_iter()
        .zip(&ys)
        .map(|(row, yt)| yt - dot(&w, row))
        .collect();

    let free: Vec<f64> = (0..n)
        .filter(|&t| alpha[t] > 0.0 && alpha[t] < c)
        .map(|t| v[t])
        .collect();
    let bias = if !free.is_empty() {
        free.iter().sum::<f64>() / free.len() as f64
    } else {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..n {
            if in_up(alpha[t], ys[t]) {
                lo = lo.max(v[t]);
            }
            if in_low(alpha[t], ys[t]) {
                hi = hi.min(v[t]);
            }
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo + hi) / 2.0,
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    };

    Ok(SvmModel {
        weights: w,
        bias,
        alphas: alpha,
        box_constraint: c,
        converged,
        iterations,
    })
}

/// Dual objective `sum a - 1/2 |sum a_i y_i x_i|^2` at `alphas`.
pub fn dual_objective(x: ArrayView2<'_, f64>, y: &[Class], alphas: &[f64]) -> f64 {
    let mut w = vec![0.0; x.ncols()];
    for ((row, yt), a) in x.rows().into_iter().zip(y).zip(alphas) {
        for (k, wk) in w.iter_mut().enumerate() {
            *wk += a * yt.sign() * row[k];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Largest KKT violation of `model` on its training data.
///
/// Returns the maximum over samples of how far `y_i f(x_i)` sits on the
/// wrong side of 1 given the state of `a_i` (at 0, at `C`, or in between),
/// together with the box and equality-constraint residuals.
pub fn kkt_violation(model: &SvmModel, x: ArrayView2<'_, f64>, y: &[Class]) -> f64 {
    let c = model.box_constraint;
    let mut worst: f64 = 0.0;
    let mut balance = 0.0;
    for ((row, yt), &a) in x.rows().into_iter().zip(y).zip(&model.alphas) {
        let margin = yt.sign() * model.decision_value(row);
        balance += a * yt.sign();
        worst = worst.max((-a).max(a - c).max(0.0));
        let v = if a <= 0.0 {
            1.0 - margin
        } else if a >= c {
            margin - 1.0
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst.max(balance.abs())
}

/// Labels for each row: `sign(<w, x> + b)`, with 0 mapped to `Right`.
pub fn predict(model: &SvmModel, x: ArrayView2<'_, f64>) -> Result<Vec<Class>> {
    if x.ncols() != model.dim() {
        return Err(Error::data(format!(
            "model expects {} features, got {}",
            model.dim(),
            x.ncols()
        )));
    }
    Ok(x.rows()
        .into_iter()
        .map(|row| {
            if model.decision_value(row) >= 0.0 {
                Class::Right
            } else {
                Class::Left
            }
        })
        .collect())
}

/// Number of positions where `predicted` and `truth` disagree.
pub fn count_errors(predicted: &[Class], truth: &[Class]) -> Result<usize> {
    if predicted.len() != truth.len() {
        return Err(Error::data(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    Ok(predicted.iter().zip(truth).filter(|(p, t)| p != t).count())
}

/// Fraction of mismatches.
pub fn zero_one_loss(predicted: &[Class], truth: &[Class]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::data("zero-one loss of an empty sample"));
    }
    Ok(count_errors(predicted, truth)? as f64 / truth.len() as f64)
}

/// Convenience for building a training matrix from row slices.
pub fn matrix(rows: &[&[f64]]) -> Array2<f64> {
    let d = rows.first().map_or(0, |r| r.len());
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Array2::from_shape_vec((rows.len(), d), flat).expect("rows of equal length")
}
