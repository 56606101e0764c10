//! Post-training quantization at desk scale: round-to-nearest, GPTQ-style
//! weight-only quantization and SmoothQuant-style W8A8.

mod gptq;
mod rtn;
mod smooth;
mod spec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use gptq::{gptq_quantize, DAMPENING};
pub use rtn::quantize_rtn;
pub use smooth::{
    activation_absmax, apply_smoothing, simulate_w8a8, smooth_scales, smoothquant_weights, DEFAULT_ALPHA,
};
pub use spec::{Granularity, QuantScope, QuantSpec, QuantizedLinear};

use crate::dump::MatrixBlob;
use crate::error::QuantError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantErrorReport {
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Mean squared entry of `X (W - W_hat)`.
    pub output_mse: f64,
}

pub fn quant_eval(w: &DMatrix<f64>, w_hat: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<QuantErrorReport, QuantError> {
    if w.shape() != w_hat.shape() || x.ncols() != w.nrows() {
        return Err(QuantError::ShapeMismatch(format!(
            "W {:?}, W_hat {:?}, X {:?}",
            w.shape(),
            w_hat.shape(),
            x.shape()
        )));
    }
    let diff = w - w_hat;
    let count = diff.len().max(1) as f64;
    let out = x * &diff;
    Ok(QuantErrorReport {
        max_abs: diff.iter().fold(0f64, |m, v| m.max(v.abs())),
        mean_abs: diff.iter().map(|v| v.abs()).sum::<f64>() / count,
        output_mse: out.iter().map(|v| v * v).sum::<f64>() / out.len().max(1) as f64,
    })
}

pub fn matrix_from_blob(blob: &MatrixBlob) -> DMatrix<f64> {
    DMatrix::from_fn(blob.rows, blob.cols, |r, c| blob.values[r * blob.cols + c] as f64)
}

pub fn blob_from_matrix(m: &DMatrix<f64>) -> MatrixBlob {
    let (rows, cols) = m.shape();
    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            values.push(m[(r, c)] as f32);
        }
    }
    MatrixBlob { rows, cols, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_exact_and_offset() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let x = DMatrix::identity(2, 2);
        let r = quant_eval(&w, &w, &x).unwrap();
        assert_eq!((r.max_abs, r.mean_abs, r.output_mse), (0.0, 0.0, 0.0));

        let half_step = 0.5 / 127.0;
        let shifted = w.map(|v| v + half_step);
        let r = quant_eval(&w, &shifted, &x).unwrap();
        assert!((r.max_abs - half_step).abs() < 1e-15);
        assert!(quant_eval(&w, &shifted, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn blob_conversion() {
        let blob = MatrixBlob {
            rows: 2,
            cols: 3,
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        let m = matrix_from_blob(&blob);
        assert_eq!(m[(1, 0)], 4.0);
        assert_eq!(blob_from_matrix(&m), blob);
    }
}
