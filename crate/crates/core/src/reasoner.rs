//! Prediction selection and size-based ranking validation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{estimate_dims, CameraIntrinsics, DepthCrop, GeometryConfig, GeometryError};
use crate::kb::{ArBin, AreaBin, Catalogue, DepthBin};
use crate::quantize::{quantize_observation, QuantizeError, QuantizerConfig, SizeObservation};

pub use crate::kb::ValidationMode;

#[derive(Debug, Error, PartialEq)]
pub enum ReasonerError {
    #[error("region `{0}` has an empty ranking")]
    EmptyRanking(String),
    #[error("region `{0}` has no ground truth, required by the oracle regime")]
    MissingGroundTruth(String),
    #[error("invalid gate config: {0}")]
    BadConfig(String),
}

/// One ranked class hypothesis; lower score means more confident.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(rename = "class")]
    pub class_name: String,
    pub score: f64,
}

impl Prediction {
    pub fn new(class_name: impl Into<String>, score: f64) -> Self {
        Self {
            class_name: class_name.into(),
            score,
        }
    }
}

/// A detected object region with its ML ranking (ascending scores).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub region_id: String,
    /// Full-frame `[x, y, w, h]` in pixels.
    pub bbox2d: [f64; 4],
    pub depth_crop: Option<String>,
    pub ranking: Vec<Prediction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

impl RegionRecord {
    pub fn top1(&self) -> Option<&str> {
        self.ranking.first().map(|p| p.class_name.as_str())
    }

    pub fn bbox_size(&self) -> (f64, f64) {
        (self.bbox2d[2], self.bbox2d[3])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    /// Top-1 distance must be strictly below this to trust the ML answer.
    pub epsilon: f64,
    /// Minimum repetitions of the top-1 class within the first `top_k` entries.
    pub min_count_i: usize,
    pub top_k: usize,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.04,
            min_count_i: 3,
            top_k: 5,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), ReasonerError> {
        if self.min_count_i == 0 || self.top_k == 0 {
            return Err(ReasonerError::BadConfig("min_count_i and top_k must be >= 1".into()));
        }
        if self.min_count_i > self.top_k {
            return Err(ReasonerError::BadConfig("min_count_i must not exceed top_k".into()));
        }
        if self.epsilon.is_nan() {
            return Err(ReasonerError::BadConfig("epsilon is NaN".into()));
        }
        Ok(())
    }
}

/// Which regions are handed to the size reasoner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRegime {
    /// Only regions whose top-1 disagrees with the ground truth.
    OracleWrongOnly,
    /// Every region.
    All,
    /// Regions the confidence gate does not trust.
    AutoGate,
}

impl SelectionRegime {
    pub const ALL: [SelectionRegime; 3] =
        [SelectionRegime::OracleWrongOnly, SelectionRegime::All, SelectionRegime::AutoGate];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionRegime::OracleWrongOnly => "oracle",
            SelectionRegime::All => "all",
            SelectionRegime::AutoGate => "auto",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SelectionRegime::OracleWrongOnly => "correcting wrong predictions only",
            SelectionRegime::All => "correcting all predictions",
            SelectionRegime::AutoGate => "correcting gate-selected predictions",
        }
    }
}

impl fmt::Display for SelectionRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionRegime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "oracle" | "oracle_wrong_only" => Ok(SelectionRegime::OracleWrongOnly),
            "all" => Ok(SelectionRegime::All),
            "auto" | "auto_gate" => Ok(SelectionRegime::AutoGate),
            _ => Err(format!("unknown selection regime `{s}`")),
        }
    }
}

/// True when the ML answer is trusted and the reasoner is skipped.
///
/// Rankings shorter than `top_k` are counted as they are.
pub fn gate_decision(ranking: &[Prediction], cfg: &GateConfig) -> Result<bool, ReasonerError> {
    let top = ranking
        .first()
        .ok_or_else(|| ReasonerError::EmptyRanking(String::new()))?;
    if !(top.score < cfg.epsilon) {
        return Ok(false);
    }
    let repeats = ranking
        .iter()
        .take(cfg.top_k)
        .filter(|p| p.class_name == top.class_name)
        .count();
    Ok(repeats >= cfg.min_count_i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub ranking: Vec<Prediction>,
    /// No class survived; the original ranking was kept.
    pub fallback: bool,
}

/// Keeps the size-plausible subsequence of `ranking`, scores untouched.
pub fn validate_ranking(
    ranking: &[Prediction],
    obs: &SizeObservation,
    cat: &Catalogue,
    mode: ValidationMode,
) -> Validated {
    let plausible = cat.plausible_classes(obs, mode);
    let kept: Vec<Prediction> = ranking
        .iter()
        .filter(|p| plausible.contains(&p.class_name.as_str()))
        .cloned()
        .collect();
    if kept.is_empty() {
        Validated {
            ranking: ranking.to_vec(),
            fallback: true,
        }
    } else {
        Validated {
            ranking: kept,
            fallback: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceBins {
    pub area: AreaBin,
    pub depth: DepthBin,
    pub ar: ArBin,
}

/// Audit line for one processed region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonerTrace {
    pub region_id: String,
    /// Gate outcome (true = ML trusted), evaluated whatever the regime.
    pub gated: bool,
    /// `[depth, other, other]` in meters when size was estimated.
    pub dims_m: Option<[f64; 3]>,
    pub bins: Option<TraceBins>,
    pub plausible: Vec<String>,
    pub fallback: bool,
    /// Whether the ranking went through validation.
    pub validated: bool,
    /// Why a selected region passed through unvalidated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// Why size evidence is unavailable for a region.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NoEvidence {
    #[error("missing_depth_crop")]
    MissingCrop,
    #[error("geometry:{0}")]
    Geometry(&'static str),
    #[error("quantize")]
    Quantize,
    #[error("crop_unreadable")]
    Unreadable,
}

impl From<GeometryError> for NoEvidence {
    fn from(e: GeometryError) -> Self {
        NoEvidence::Geometry(e.kind())
    }
}

impl From<QuantizeError> for NoEvidence {
    fn from(_: QuantizeError) -> Self {
        NoEvidence::Quantize
    }
}

/// The configured size reasoner over one catalogue.
#[derive(Debug, Clone)]
pub struct Reasoner<'a> {
    pub catalogue: &'a Catalogue,
    pub intrinsics: CameraIntrinsics,
    pub geometry: GeometryConfig,
    pub quantizer: QuantizerConfig,
    pub gate: GateConfig,
}

impl<'a> Reasoner<'a> {
    pub fn new(catalogue: &'a Catalogue) -> Self {
        Self {
            catalogue,
            intrinsics: CameraIntrinsics::default(),
            geometry: GeometryConfig::default(),
            quantizer: QuantizerConfig::default(),
            gate: GateConfig::default(),
        }
    }

    /// Size observation of a region from its depth crop.
    pub fn observe(&self, rec: &RegionRecord, crop: &DepthCrop) -> Result<SizeObservation, NoEvidence> {
        let dims = estimate_dims(crop, &self.intrinsics, &self.geometry)?;
        Ok(quantize_observation(&dims, rec.bbox_size(), &self.quantizer)?)
    }

    /// Whether `regime` routes this region to the reasoner.
    pub fn selects(&self, rec: &RegionRecord, regime: SelectionRegime) -> Result<bool, ReasonerError> {
        let top = rec
            .top1()
            .ok_or_else(|| ReasonerError::EmptyRanking(rec.region_id.clone()))?;
        match regime {
            SelectionRegime::All => Ok(true),
            SelectionRegime::OracleWrongOnly => {
                let truth = rec
                    .ground_truth
                    .as_deref()
                    .ok_or_else(|| ReasonerError::MissingGroundTruth(rec.region_id.clone()))?;
                Ok(top != truth)
            }
            SelectionRegime::AutoGate => Ok(!self.gated(rec)?),
        }
    }

    fn gated(&self, rec: &RegionRecord) -> Result<bool, ReasonerError> {
        gate_decision(&rec.ranking, &self.gate)
            .map_err(|_| ReasonerError::EmptyRanking(rec.region_id.clone()))
    }

    /// Corrects one region given already computed size evidence.
    pub fn apply(
        &self,
        rec: &RegionRecord,
        evidence: Result<&SizeObservation, &NoEvidence>,
        mode: ValidationMode,
        regime: SelectionRegime,
    ) -> Result<(RegionRecord, ReasonerTrace), ReasonerError> {
        let gated = self.gated(rec)?;
        let mut trace = ReasonerTrace {
            region_id: rec.region_id.clone(),
            gated,
            dims_m: None,
            bins: None,
            plausible: Vec::new(),
            fallback: false,
            validated: false,
            skipped: None,
        };
        if !self.selects(rec, regime)? {
            return Ok((rec.clone(), trace));
        }
        let obs = match evidence {
            Ok(obs) => obs,
            Err(why) => {
                trace.skipped = Some(why.to_string());
                return Ok((rec.clone(), trace));
            }
        };
        let validated = validate_ranking(&rec.ranking, obs, self.catalogue, mode);
        trace.dims_m = Some([obs.depth_m, obs.other_dims_m[0], obs.other_dims_m[1]]);
        trace.bins = Some(TraceBins {
            area: obs.area_bin,
            depth: obs.depth_bin,
            ar: obs.ar_bin,
        });
        trace.plausible = self
            .catalogue
            .plausible_classes(obs, mode)
            .into_iter()
            .map(str::to_owned)
            .collect();
        trace.fallback = validated.fallback;
        trace.validated = true;
        let mut out = rec.clone();
        out.ranking = validated.ranking;
        Ok((out, trace))
    }

    /// Full per-region step: select, estimate size if needed, validate.
    pub fn process_region(
        &self,
        rec: &RegionRecord,
        crop: Option<&DepthCrop>,
        mode: ValidationMode,
        regime: SelectionRegime,
    ) -> Result<(RegionRecord, ReasonerTrace), ReasonerError> {
        if !self.selects(rec, regime)? {
            return self.apply(rec, Err(&NoEvidence::MissingCrop), mode, regime);
        }
        let evidence = match crop {
            Some(c) => self.observe(rec, c),
            None => Err(NoEvidence::MissingCrop),
        };
        self.apply(rec, evidence.as_ref(), mode, regime)
    }
}
