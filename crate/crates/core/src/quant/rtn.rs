use nalgebra::DMatrix;

use crate::error::QuantError;

use super::spec::{QuantSpec, QuantizedLinear};

pub(crate) fn check_finite(m: &DMatrix<f64>) -> Result<(), QuantError> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(QuantError::NonFinite)
    }
}

/// Scale/zero table computed from the whole of `w`.
pub(crate) fn scale_table(w: &DMatrix<f64>, spec: &QuantSpec) -> (Vec<f64>, Vec<i32>) {
    let (rows, cols) = w.shape();
    let count = spec.scale_count(rows, cols);
    let mut scales = Vec::with_capacity(count);
    let mut zeros = Vec::with_capacity(count);
    match spec.granularity {
        super::Granularity::PerTensor => {
            let (s, z) = spec.params(w.iter().copied());
            scales.push(s);
            zeros.push(z);
        }
        super::Granularity::PerChannel => {
            for c in 0..cols {
                let (s, z) = spec.params(w.column(c).iter().copied());
                scales.push(s);
                zeros.push(z);
            }
        }
        super::Granularity::Group(g) => {
            for group in 0..rows / g {
                for c in 0..cols {
                    let (s, z) = spec.params((group * g..(group + 1) * g).map(|r| w[(r, c)]));
                    scales.push(s);
                    zeros.push(z);
                }
            }
        }
    }
    (scales, zeros)
}

/// Round-to-nearest quantization.
pub fn quantize_rtn(w: &DMatrix<f64>, spec: &QuantSpec) -> Result<QuantizedLinear, QuantError> {
    check_finite(w)?;
    let (rows, cols) = w.shape();
    spec.validate_for(rows)?;
    let (scales, zeros) = scale_table(w, spec);
    let mut q = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let i = spec.scale_index(r, c, cols);
            q.push(spec.quantize_value(w[(r, c)], scales[i], zeros[i]));
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
    use crate::quant::Granularity;

    #[test]
    fn zero_matrix() {
        let w = DMatrix::zeros(3, 2);
        let q = quantize_rtn(&w, &QuantSpec::w4a16()).unwrap();
        assert!(q.q.iter().all(|&v| v == 0));
        assert!(q.scales.iter().all(|&s| s == 1.0));
        assert_eq!(q.dequantize(), w);
    }

    #[test]
    fn single_value() {
        let w = DMatrix::from_element(1, 1, 1.0);
        let q = quantize_rtn(&w, &QuantSpec::w8a8()).unwrap();
        assert!((q.scales[0] - 1.0 / 127.0).abs() < 1e-15);
        assert_eq!(q.q, vec![127]);
        assert!((q.dequantize()[(0, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scale_homogeneity() {
        let w = DMatrix::from_row_slice(2, 3, &[0.3, -1.2, 0.7, 2.0, -0.1, 0.05]);
        let a = quantize_rtn(&w, &QuantSpec::w8a8()).unwrap();
        let b = quantize_rtn(&(&w * 2.0), &QuantSpec::w8a8()).unwrap();
        assert_eq!(a.q, b.q);
        assert!((b.scales[0] - 2.0 * a.scales[0]).abs() < 1e-15);
    }

    #[test]
    fn granularity_shapes() {
        let w = DMatrix::from_fn(4, 3, |r, c| (r as f64 - 1.5) * (c as f64 + 1.0));
        let mut spec = QuantSpec::w4a16();
        assert_eq!(quantize_rtn(&w, &spec).unwrap().scales.len(), 3);
        spec.granularity = Granularity::Group(2);
        assert_eq!(quantize_rtn(&w, &spec).unwrap().scales.len(), 6);
        spec.granularity = Granularity::PerTensor;
        assert_eq!(quantize_rtn(&w, &spec).unwrap().scales.len(), 1);
        spec.granularity = Granularity::Group(3);
        assert!(quantize_rtn(&w, &spec).is_err());
    }

    #[test]
    fn asymmetric_round_trip() {
        let w = DMatrix::from_row_slice(2, 2, &[-0.3, 1.0, 0.2, 0.9]);
        let spec = QuantSpec {
            symmetric: false,
            granularity: Granularity::PerTensor,
            ..QuantSpec::w4a16()
        };
        let q = quantize_rtn(&w, &spec).unwrap();
        let dq = q.dequantize();
        for (a, b) in w.iter().zip(dq.iter()) {
            assert!((a - b).abs() <= q.scales[0] / 2.0 + 1e-12);
        }
        assert!(q.zero_points.is_some());
    }

    #[test]
    fn rejects_nan() {
        let w = DMatrix::from_element(1, 1, f64::NAN);
        assert_eq!(quantize_rtn(&w, &QuantSpec::w8a8()).unwrap_err(), QuantError::NonFinite);
    }
}
