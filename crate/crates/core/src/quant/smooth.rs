//! Activation-to-weight difficulty migration for W8A8.
//!
//! Dividing activation channel `j` by `s_j` and multiplying weight row `j` by the
//! same factor leaves `X W` unchanged while flattening activation outliers.

use nalgebra::DMatrix;

use crate::error::QuantError;

use super::rtn::{check_finite, quantize_rtn};
use super::spec::{QuantSpec, QuantizedLinear};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const SCALE_MIN: f64 = 1e-5;
pub const SCALE_MAX: f64 = 1e5;

/// Per-input-channel max |x| over the rows of `x`.
pub fn activation_absmax(x: &DMatrix<f64>) -> Vec<f64> {
    x.column_iter()
        .map(|c| c.iter().fold(0f64, |m, v| m.max(v.abs())))
        .collect()
}

/// `s_j = a_j^alpha / max_k |W_jk|^(1 - alpha)`, clamped to `[1e-5, 1e5]`.
/// Zero activation maxima are pinned to the smallest positive one observed.
pub fn smooth_scales(act_absmax: &[f64], w: &DMatrix<f64>, alpha: f64) -> Result<Vec<f64>, QuantError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(QuantError::InvalidSpec(format!("alpha {alpha} outside [0, 1]")));
    }
    if act_absmax.len() != w.nrows() {
        return Err(QuantError::ShapeMismatch(format!(
            "{} activation channels for a weight with {} input channels",
            act_absmax.len(),
            w.nrows()
        )));
    }
    if act_absmax.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(QuantError::NonFinite);
    }
    check_finite(w)?;
    let floor = act_absmax
        .iter()
        .copied()
        .filter(|&a| a > 0.0)
        .fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1.0 };
    Ok(act_absmax
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let a = if a > 0.0 { a } else { floor };
            let wmax = w.row(j).iter().fold(0f64, |m, v| m.max(v.abs()));
            let s = a.powf(alpha) / wmax.powf(1.0 - alpha);
            if s.is_nan() {
                1.0
            } else {
                s.clamp(SCALE_MIN, SCALE_MAX)
            }
        })
        .collect())
}

/// Returns `(X diag(s)^-1, diag(s) W)`.
pub fn apply_smoothing(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    s: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>), QuantError> {
    if s.len() != x.ncols() || s.len() != w.nrows() {
        return Err(QuantError::ShapeMismatch(format!(
            "{} scales for X with {} columns and W with {} rows",
            s.len(),
            x.ncols(),
            w.nrows()
        )));
    }
    if let Some(j) = s.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(QuantError::NonPositiveScale(j));
    }
    let mut xs = x.clone();
    for (j, mut col) in xs.column_iter_mut().enumerate() {
        col /= s[j];
    }
    let mut ws = w.clone();
    for (j, mut row) in ws.row_iter_mut().enumerate() {
        row *= s[j];
    }
    Ok((xs, ws))
}

/// Smooths `w` with scales from `act_absmax` and quantizes the result.
pub fn smoothquant_weights(
    w: &DMatrix<f64>,
    act_absmax: &[f64],
    alpha: f64,
    spec: &QuantSpec,
) -> Result<QuantizedLinear, QuantError> {
    let s = smooth_scales(act_absmax, w, alpha)?;
    let mut ws = w.clone();
    for (j, mut row) in ws.row_iter_mut().enumerate() {
        row *= s[j];
    }
    let mut q = quantize_rtn(&ws, spec)?;
    q.smoothing = Some(s);
    Ok(q)
}

/// Simulated W8A8 layer: optional smoothing, per-tensor symmetric 8-bit
/// quantization of both operands, an exact integer matmul, then rescaling.
pub fn simulate_w8a8(x: &DMatrix<f64>, w: &DMatrix<f64>, alpha: Option<f64>) -> Result<DMatrix<f64>, QuantError> {
    if x.ncols() != w.nrows() {
        return Err(QuantError::ShapeMismatch(format!(
            "X is {}x{}, W is {}x{}",
            x.nrows(),
            x.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    let (xs, ws) = match alpha {
        Some(alpha) => {
            let s = smooth_scales(&activation_absmax(x), w, alpha)?;
            apply_smoothing(x, w, &s)?
        }
        None => (x.clone(), w.clone()),
    };
    let spec = QuantSpec::w8a8();
    let qw = quantize_rtn(&ws, &spec)?;
    let qx = quantize_rtn(&xs, &spec)?;
    let (n, k, m) = (x.nrows(), x.ncols(), w.ncols());
    let rescale = qx.scales[0] * qw.scales[0];
    let mut out = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let acc: i64 = (0..k).map(|t| qx.code(i, t) as i64 * qw.code(t, j) as i64).sum();
            out[(i, j)] = acc as f64 * rescale;
        }
    }
    Ok(out)
}
