//! Hessian-aware sequential weight quantization.
//!
//! Input channels are quantized one at a time. The rounding error of each is
//! pushed onto the channels not yet quantized through the upper Cholesky
//! factor of the inverse Hessian `H = 2 X^T X + lambda I`, which keeps the layer
//! output `X W` close to the original on the calibration data.

use nalgebra::DMatrix;

use crate::error::QuantError;

use super::rtn::{check_finite, scale_table};
use super::spec::{dequantize_value, Granularity, QuantScope, QuantSpec, QuantizedLinear};

/// Fraction of the mean Hessian diagonal added as dampening.
pub const DAMPENING: f64 = 0.01;

/// Upper Cholesky factor of the inverse of `2 X^T X + lambda I`, retrying once
/// with ten times the dampening.
fn inverse_hessian_factor(x: &DMatrix<f64>) -> Result<DMatrix<f64>, QuantError> {
    let h = x.transpose() * x * 2.0;
    let n = h.nrows();
    let mean_diag = h.diagonal().mean();
    for factor in [DAMPENING, DAMPENING * 10.0] {
        let damp = factor * mean_diag;
        if damp <= 0.0 {
            break;
        }
        let damped = &h + DMatrix::identity(n, n) * damp;
        let Some(chol) = damped.cholesky() else {
            continue;
        };
        if let Some(inv_chol) = chol.inverse().cholesky() {
            return Ok(inv_chol.l().transpose());
        }
    }
    Err(QuantError::SingularHessian)
}

pub fn gptq_quantize(w: &DMatrix<f64>, x_calib: &DMatrix<f64>, spec: &QuantSpec) -> Result<QuantizedLinear, QuantError> {
    check_finite(w)?;
    check_finite(x_calib)?;
    let (rows, cols) = w.shape();
    spec.validate_for(rows)?;
    if spec.scope != QuantScope::WeightOnly {
        return Err(QuantError::InvalidSpec("GPTQ quantizes weights only".into()));
    }
    if x_calib.nrows() == 0 || x_calib.ncols() != rows {
        return Err(QuantError::ShapeMismatch(format!(
            "calibration is {}x{}, weight has {rows} input channels",
            x_calib.nrows(),
            x_calib.ncols()
        )));
    }
    let u = inverse_hessian_factor(x_calib)?;

    let (mut scales, mut zeros) = scale_table(w, spec);
    let mut work = w.clone();
    let mut q = vec![0i32; rows * cols];
    for r in 0..rows {
        if let Granularity::Group(g) = spec.granularity {
            if r % g == 0 {
                // group scales follow the error-compensated weights
                for c in 0..cols {
                    let (s, z) = spec.params((r..r + g).map(|rr| work[(rr, c)]));
                    let i = spec.scale_index(r, c, cols);
                    scales[i] = s;
                    zeros[i] = z;
                }
            }
        }
        let pivot = u[(r, r)];
        for c in 0..cols {
            let i = spec.scale_index(r, c, cols);
            let value = work[(r, c)];
            let code = spec.quantize_value(value, scales[i], zeros[i]);
            q[r * cols + c] = code;
            let err = (value - dequantize_value(code, scales[i], zeros[i])) / pivot;
            for later in r + 1..rows {
                work[(later, c)] -= err * u[(r, later)];
            }
        }
    }
    Ok(QuantizedLinear {
        rows,
        cols,
        q,
        scales,
        zero_points: (!spec.symmetric).then_some(zeros),
        spec: *spec,
        smoothing: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::quantize_rtn;

    #[test]
    fn scalar_weight_matches_rtn() {
        let w = DMatrix::from_element(1, 1, 0.37);
        let x = DMatrix::from_row_slice(3, 1, &[1.0, -2.0, 0.5]);
        let g = gptq_quantize(&w, &x, &QuantSpec::w4a16()).unwrap();
        let r = quantize_rtn(&w, &QuantSpec::w4a16()).unwrap();
        assert_eq!(g, r);
    }

    #[test]
    fn identity_calibration_matches_rtn() {
        let w = DMatrix::from_fn(6, 4, |r, c| ((r * 7 + c * 3) % 11) as f64 / 5.0 - 1.0);
        let x = DMatrix::identity(6, 6);
        for granularity in [Granularity::PerChannel, Granularity::PerTensor, Granularity::Group(3)] {
            let spec = QuantSpec {
                granularity,
                ..QuantSpec::w4a16()
            };
            assert_eq!(gptq_quantize(&w, &x, &spec).unwrap().q, quantize_rtn(&w, &spec).unwrap().q);
        }
    }

    #[test]
    fn shape_and_scope_errors() {
        let w = DMatrix::zeros(3, 2);
        let x = DMatrix::zeros(4, 2);
        assert!(matches!(
            gptq_quantize(&w, &x, &QuantSpec::w4a16()),
            Err(QuantError::ShapeMismatch(_))
        ));
        let x = DMatrix::identity(3, 3);
        let spec = QuantSpec {
            scope: QuantScope::WeightActivation,
            ..QuantSpec::w4a16()
        };
        assert!(matches!(gptq_quantize(&w, &x, &spec), Err(QuantError::InvalidSpec(_))));
    }

    #[test]
    fn zero_calibration_is_singular() {
        let w = DMatrix::from_element(2, 2, 1.0);
        let x = DMatrix::zeros(5, 2);
        assert_eq!(
            gptq_quantize(&w, &x, &QuantSpec::w4a16()).unwrap_err(),
            QuantError::SingularHessian
        );
    }

    #[test]
    fn rank_deficient_calibration_survives_dampening() {
        // two identical input channels make X^T X singular
        let x = DMatrix::from_fn(8, 3, |r, c| if c == 2 { r as f64 } else { (r * (c + 1)) as f64 % 3.0 });
        let x = DMatrix::from_fn(8, 3, |r, c| if c == 1 { x[(r, 0)] } else { x[(r, c)] });
        let w = DMatrix::from_fn(3, 2, |r, c| (r + c) as f64 * 0.3 - 0.4);
        assert!(gptq_quantize(&w, &x, &QuantSpec::w4a16()).is_ok());
    }
}
