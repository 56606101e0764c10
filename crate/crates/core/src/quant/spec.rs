use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::QuantError;

/// Where scales are shared. Weights are laid out `in_features x out_features`
/// (so a layer computes `X * W`), and "channel" means output channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    PerTensor,
    PerChannel,
    /// Per output channel, one scale for every `g` consecutive input channels.
    Group(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantScope {
    WeightOnly,
    WeightActivation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantSpec {
    pub bits: u8,
    pub granularity: Granularity,
    pub symmetric: bool,
    pub scope: QuantScope,
}

impl QuantSpec {
    /// 4-bit weights, per-channel symmetric (W4A16).
    pub fn w4a16() -> Self {
        Self {
            bits: 4,
            granularity: Granularity::PerChannel,
            symmetric: true,
            scope: QuantScope::WeightOnly,
        }
    }

    /// 8-bit weights and activations, per-tensor symmetric (W8A8).
    pub fn w8a8() -> Self {
        Self {
            bits: 8,
            granularity: Granularity::PerTensor,
            symmetric: true,
            scope: QuantScope::WeightActivation,
        }
    }

    pub fn validate(&self) -> Result<(), QuantError> {
        if self.bits != 4 && self.bits != 8 {
            return Err(QuantError::InvalidSpec(format!("bits must be 4 or 8, got {}", self.bits)));
        }
        if self.granularity == Granularity::Group(0) {
            return Err(QuantError::InvalidSpec("group size must be positive".into()));
        }
        Ok(())
    }

    pub fn validate_for(&self, rows: usize) -> Result<(), QuantError> {
        self.validate()?;
        if let Granularity::Group(g) = self.granularity {
            if !rows.is_multiple_of(g) {
                return Err(QuantError::InvalidSpec(format!(
                    "group size {g} does not divide {rows} input channels"
                )));
            }
        }
        Ok(())
    }

    /// Largest representable integer.
    pub fn qmax(&self) -> i32 {
        if self.symmetric {
            (1 << (self.bits - 1)) - 1
        } else {
            (1 << self.bits) - 1
        }
    }

    pub fn qmin(&self) -> i32 {
        if self.symmetric {
            -self.qmax()
        } else {
            0
        }
    }

    /// Number of scale groups along the input dimension.
    pub(crate) fn row_groups(&self, rows: usize) -> usize {
        match self.granularity {
            Granularity::PerTensor | Granularity::PerChannel => 1,
            Granularity::Group(g) => rows / g,
        }
    }

    /// Index into the scale table for element `(r, c)` of a `rows x cols` weight.
    pub(crate) fn scale_index(&self, r: usize, c: usize, cols: usize) -> usize {
        match self.granularity {
            Granularity::PerTensor => 0,
            Granularity::PerChannel => c,
            Granularity::Group(g) => (r / g) * cols + c,
        }
    }

    pub(crate) fn scale_count(&self, rows: usize, cols: usize) -> usize {
        match self.granularity {
            Granularity::PerTensor => 1,
            _ => self.row_groups(rows) * cols,
        }
    }

    /// Scale and zero point covering `values`. An all-zero block gets scale 1.
    pub(crate) fn params<I: IntoIterator<Item = f64>>(&self, values: I) -> (f64, i32) {
        if self.symmetric {
            let amax = values.into_iter().fold(0f64, |m, v| m.max(v.abs()));
            if amax == 0.0 {
                (1.0, 0)
            } else {
                (amax / self.qmax() as f64, 0)
            }
        } else {
            let (lo, hi) = values
                .into_iter()
                .fold((0f64, 0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if hi == lo {
                (1.0, 0)
            } else {
                let scale = (hi - lo) / self.qmax() as f64;
                let zero = ((-lo / scale).round() as i32).clamp(0, self.qmax());
                (scale, zero)
            }
        }
    }

    pub(crate) fn quantize_value(&self, v: f64, scale: f64, zero: i32) -> i32 {
        let q = (v / scale).round() + zero as f64;
        q.clamp(self.qmin() as f64, self.qmax() as f64) as i32
    }
}

pub(crate) fn dequantize_value(q: i32, scale: f64, zero: i32) -> f64 {
    (q - zero) as f64 * scale
}

/// Integer weights plus the scales needed to reconstruct them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedLinear {
    pub rows: usize,
    pub cols: usize,
    /// Row-major integer codes.
    pub q: Vec<i32>,
    pub scales: Vec<f64>,
    /// Absent for symmetric quantization.
    pub zero_points: Option<Vec<i32>>,
    pub spec: QuantSpec,
    /// Per-input-channel smoothing factors folded into the weight, if any.
    pub smoothing: Option<Vec<f64>>,
}

impl QuantizedLinear {
    pub fn code(&self, r: usize, c: usize) -> i32 {
        self.q[r * self.cols + c]
    }

    pub fn scale(&self, r: usize, c: usize) -> f64 {
        self.scales[self.spec.scale_index(r, c, self.cols)]
    }

    pub fn zero_point(&self, r: usize, c: usize) -> i32 {
        self.zero_points
            .as_ref()
            .map_or(0, |z| z[self.spec.scale_index(r, c, self.cols)])
    }

    /// Reconstructed weight (including any smoothing folded into it).
    pub fn dequantize(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| {
            dequantize_value(self.code(r, c), self.scale(r, c), self.zero_point(r, c))
        })
    }

    /// Reconstructed weight in the original, unsmoothed space.
    pub fn dequantize_unsmoothed(&self) -> DMatrix<f64> {
        let mut w = self.dequantize();
        if let Some(s) = &self.smoothing {
            for (r, &sr) in s.iter().enumerate() {
                w.row_mut(r).iter_mut().for_each(|v| *v /= sr);
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(QuantSpec::w8a8().qmax(), 127);
        assert_eq!(QuantSpec::w4a16().qmax(), 7);
        assert_eq!(QuantSpec::w4a16().qmin(), -7);
        let asym = QuantSpec {
            symmetric: false,
            ..QuantSpec::w4a16()
        };
        assert_eq!((asym.qmin(), asym.qmax()), (0, 15));
    }

    #[test]
    fn spec_validation() {
        let mut s = QuantSpec::w4a16();
        s.bits = 3;
        assert!(s.validate().is_err());
        s.bits = 4;
        s.granularity = Granularity::Group(4);
        assert!(s.validate_for(8).is_ok());
        assert!(s.validate_for(6).is_err());
        s.granularity = Granularity::Group(0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn asymmetric_params_cover_zero() {
        let s = QuantSpec {
            symmetric: false,
            ..QuantSpec::w8a8()
        };
        let (scale, zero) = s.params([0.5, 2.0]);
        assert!((scale - 2.0 / 255.0).abs() < 1e-15);
        assert_eq!(zero, 0);
        let (scale, zero) = s.params([-1.0, 1.0]);
        assert!((scale - 2.0 / 255.0).abs() < 1e-15);
        assert_eq!(zero, 128);
    }
}
