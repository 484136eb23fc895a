//! Metric size → qualitative bins.
//!
//! All intervals are half-open and lower-inclusive: a value equal to a
//! threshold falls into the upper bin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Dims;
use crate::kb::{ArBin, AreaBin, DepthBin, ObservedBins};

#[derive(Debug, Error, PartialEq)]
pub enum QuantizeError {
    #[error("negative {what}: {value}")]
    NegativeInput { what: &'static str, value: f64 },
    #[error("non-positive {what}: {value}")]
    NonPositiveInput { what: &'static str, value: f64 },
    #[error("invalid quantizer config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// Area cut-offs in m², strictly increasing.
    pub area_thresholds: [f64; 4],
    /// Depth cut-offs in m, strictly increasing; the first one is the flat / non-flat split.
    pub depth_thresholds: [f64; 3],
    /// Minimum long-side / short-side ratio for a non-EQ aspect ratio.
    pub ar_threshold: f64,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            area_thresholds: [0.007, 0.05, 0.35, 0.79],
            depth_thresholds: [0.1, 0.2, 0.4],
            ar_threshold: 1.4,
        }
    }
}

impl QuantizerConfig {
    pub fn validate(&self) -> Result<(), QuantizeError> {
        fn increasing(xs: &[f64]) -> bool {
            xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[0] < w[1])
        }
        if !increasing(&self.area_thresholds) {
            return Err(QuantizeError::BadConfig("area_thresholds must be strictly increasing".into()));
        }
        if !increasing(&self.depth_thresholds) {
            return Err(QuantizeError::BadConfig("depth_thresholds must be strictly increasing".into()));
        }
        if !(self.ar_threshold >= 1.0 && self.ar_threshold.is_finite()) {
            return Err(QuantizeError::BadConfig("ar_threshold must be >= 1".into()));
        }
        Ok(())
    }

    /// The flat / non-flat threshold.
    pub fn flat_threshold(&self) -> f64 {
        self.depth_thresholds[0]
    }
}

/// Number of thresholds `<= value`, i.e. the bin index under lower-inclusive intervals.
fn bin_index(value: f64, thresholds: &[f64]) -> usize {
    thresholds.iter().take_while(|&&t| value >= t).count()
}

fn non_negative(what: &'static str, value: f64) -> Result<f64, QuantizeError> {
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(QuantizeError::NegativeInput { what, value })
    }
}

pub fn quantize_area(area_m2: f64, cfg: &QuantizerConfig) -> Result<AreaBin, QuantizeError> {
    let a = non_negative("area", area_m2)?;
    Ok(AreaBin::ALL[bin_index(a, &cfg.area_thresholds)])
}

pub fn quantize_depth(depth_m: f64, cfg: &QuantizerConfig) -> Result<DepthBin, QuantizeError> {
    let d = non_negative("depth", depth_m)?;
    Ok(DepthBin::ALL[bin_index(d, &cfg.depth_thresholds)])
}

/// Aspect-ratio bin of a 2D box of `w_px` × `h_px`.
pub fn quantize_ar(w_px: f64, h_px: f64, cfg: &QuantizerConfig) -> Result<ArBin, QuantizeError> {
    for (what, v) in [("width", w_px), ("height", h_px)] {
        if !(v > 0.0) {
            return Err(QuantizeError::NonPositiveInput { what, value: v });
        }
    }
    let bin = if h_px >= w_px && h_px / w_px >= cfg.ar_threshold {
        ArBin::Ttw
    } else if h_px < w_px && w_px / h_px >= cfg.ar_threshold {
        ArBin::Wtt
    } else {
        ArBin::Eq
    };
    Ok(bin)
}

/// Estimated qualitative size of one object region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeObservation {
    pub area_m2: f64,
    pub depth_m: f64,
    pub other_dims_m: [f64; 2],
    pub bbox2d_w_px: f64,
    pub bbox2d_h_px: f64,
    pub area_bin: AreaBin,
    pub depth_bin: DepthBin,
    pub ar_bin: ArBin,
}

impl SizeObservation {
    pub fn is_flat(&self) -> bool {
        self.depth_bin.is_flat()
    }
}

impl ObservedBins for SizeObservation {
    fn area_bin(&self) -> AreaBin {
        self.area_bin
    }
    fn depth_bin(&self) -> DepthBin {
        self.depth_bin
    }
    fn ar_bin(&self) -> ArBin {
        self.ar_bin
    }
}

pub fn quantize_observation(
    dims: &Dims,
    bbox2d: (f64, f64),
    cfg: &QuantizerConfig,
) -> Result<SizeObservation, QuantizeError> {
    let [a, b] = dims.other_m;
    non_negative("dimension", a)?;
    non_negative("dimension", b)?;
    let area_m2 = a * b;
    Ok(SizeObservation {
        area_m2,
        depth_m: dims.depth_m,
        other_dims_m: dims.other_m,
        bbox2d_w_px: bbox2d.0,
        bbox2d_h_px: bbox2d.1,
        area_bin: quantize_area(area_m2, cfg)?,
        depth_bin: quantize_depth(dims.depth_m, cfg)?,
        ar_bin: quantize_ar(bbox2d.0, bbox2d.1, cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> QuantizerConfig {
        QuantizerConfig::default()
    }

    #[test]
    fn area_examples() {
        assert_eq!(quantize_area(0.006, &cfg()), Ok(AreaBin::XS));
        assert_eq!(quantize_area(0.06, &cfg()), Ok(AreaBin::M));
        assert_eq!(quantize_area(0.79, &cfg()), Ok(AreaBin::XL));
        assert_eq!(quantize_area(0.007, &cfg()), Ok(AreaBin::S));
        assert_eq!(quantize_area(0.0, &cfg()), Ok(AreaBin::XS));
        assert!(matches!(quantize_area(-1e-9, &cfg()), Err(QuantizeError::NegativeInput { .. })));
    }

    #[test]
    fn depth_examples() {
        assert_eq!(quantize_depth(0.05, &cfg()), Ok(DepthBin::Flat));
        assert_eq!(quantize_depth(0.25, &cfg()), Ok(DepthBin::Thick));
        let boundary = quantize_depth(0.1, &cfg()).unwrap();
        assert_eq!(boundary, DepthBin::Thin);
        assert!(!boundary.is_flat());
        assert_eq!(quantize_depth(0.4, &cfg()), Ok(DepthBin::Bulky));
        assert!(quantize_depth(f64::NAN, &cfg()).is_err());
    }

    #[test]
    fn ar_examples() {
        assert_eq!(quantize_ar(100.0, 140.0, &cfg()), Ok(ArBin::Ttw));
        assert_eq!(quantize_ar(100.0, 100.0, &cfg()), Ok(ArBin::Eq));
        assert_eq!(quantize_ar(130.0, 100.0, &cfg()), Ok(ArBin::Eq));
        assert_eq!(quantize_ar(140.0, 100.0, &cfg()), Ok(ArBin::Wtt));
        assert!(matches!(quantize_ar(0.0, 1.0, &cfg()), Err(QuantizeError::NonPositiveInput { .. })));
    }

    #[test]
    fn observation_examples() {
        let obs = quantize_observation(&Dims::new(0.02, [0.2, 0.3]), (100.0, 140.0), &cfg()).unwrap();
        assert!((obs.area_m2 - 0.06).abs() < 1e-12);
        assert_eq!((obs.area_bin, obs.depth_bin, obs.ar_bin), (AreaBin::M, DepthBin::Flat, ArBin::Ttw));

        let zero = quantize_observation(&Dims::new(0.0, [0.0, 0.3]), (10.0, 10.0), &cfg()).unwrap();
        assert_eq!(zero.area_bin, AreaBin::XS);

        let big = quantize_observation(&Dims::new(0.45, [0.9, 1.0]), (200.0, 100.0), &cfg()).unwrap();
        assert_eq!((big.area_bin, big.depth_bin, big.ar_bin), (AreaBin::XL, DepthBin::Bulky, ArBin::Wtt));
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = cfg();
        c.area_thresholds = [0.1, 0.05, 0.35, 0.79];
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.depth_thresholds = [0.1, 0.1, 0.4];
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.ar_threshold = 0.9;
        assert!(c.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    proptest! {
        #[test]
        fn area_bins_are_monotone(a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantize_area(lo, &cfg()).unwrap() <= quantize_area(hi, &cfg()).unwrap());
            prop_assert!(quantize_depth(lo, &cfg()).unwrap() <= quantize_depth(hi, &cfg()).unwrap());
        }

        #[test]
        fn ar_is_swap_dual(w in 0.01f64..1e4, h in 0.01f64..1e4) {
            let fwd = quantize_ar(w, h, &cfg()).unwrap();
            let back = quantize_ar(h, w, &cfg()).unwrap();
            prop_assert_eq!(fwd.swapped(), back);
        }

        #[test]
        fn ar_is_scale_invariant(w in 1u32..2000, h in 1u32..2000, k in 1u32..50) {
            // integer pixel sizes keep the ratios exact under scaling
            let (w, h, k) = (w as f64, h as f64, k as f64);
            prop_assert_eq!(quantize_ar(w, h, &cfg()).unwrap(), quantize_ar(k * w, k * h, &cfg()).unwrap());
        }

        #[test]
        fn area_symmetric_in_other_dims(d in 0.0f64..1.0, a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let x = quantize_observation(&Dims::new(d, [a, b]), (1.0, 1.0), &cfg()).unwrap();
            let y = quantize_observation(&Dims::new(d, [b, a]), (1.0, 1.0), &cfg()).unwrap();
            prop_assert_eq!(x.area_m2, y.area_m2);
            prop_assert_eq!(x.area_bin, y.area_bin);
        }
    }
}
