use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, EvalReport};
use super::EvalError;
use crate::ingest::CropSource;
use crate::quantize::SizeObservation;
use crate::reasoner::{NoEvidence, Reasoner, RegionRecord, SelectionRegime, ValidationMode};

/// Cut-off of P@k, nDCG@k and hit ratio in every table.
const MEASURE_K: usize = 5;

pub const BASELINE_METHOD: &str = "ML baseline";

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub method: String,
    /// `None` for the raw ML ranking.
    pub mode: Option<ValidationMode>,
    pub regime: Option<SelectionRegime>,
    pub report: EvalReport,
    pub regions: usize,
    /// Regions routed to the reasoner by the regime.
    pub selected: usize,
    /// Selected regions whose ranking was filtered.
    pub validated: usize,
    /// Validated regions where no candidate survived.
    pub fallbacks: usize,
    /// Selected regions left unvalidated, by reason.
    pub skipped: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub cells: Vec<AblationCell>,
    /// Ground-truth classes missing from the catalogue, with counts.
    pub unknown_truth_classes: BTreeMap<String, usize>,
}

impl AblationTable {
    pub fn baseline(&self) -> &AblationCell {
        &self.cells[0]
    }

    pub fn cell(&self, mode: ValidationMode, regime: SelectionRegime) -> Option<&AblationCell> {
        self.cells
            .iter()
            .find(|c| c.mode == Some(mode) && c.regime == Some(regime))
    }

    /// Aligned plain-text table, one row per cell.
    pub fn to_text(&self) -> String {
        let header = [
            "Method", "Regime", "Top-1 Acc", "P", "R", "F1", "wP", "wR", "wF1", "P@5", "nDCG@5", "Hit ratio",
        ];
        let rows: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|c| {
                let mut row = vec![
                    c.method.clone(),
                    c.regime.map_or("-".to_owned(), |r| r.as_str().to_owned()),
                ];
                row.extend(c.report.values().iter().map(|v| format!("{v:.4}")));
                row
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let line = |cells: &[&str], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i < 2 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            // group separators: names | top-1 | unweighted | weighted | @5
            let _ = writeln!(
                out,
                "{}  {} | {} | {} | {} | {}",
                parts[0],
                parts[1],
                parts[2],
                parts[3..6].join(" "),
                parts[6..9].join(" "),
                parts[9..].join(" ")
            );
        };
        line(&header, &mut out);
        for row in &rows {
            let cells: Vec<&str> = row.iter().map(String::as_str).collect();
            line(&cells, &mut out);
        }
        for c in &self.cells {
            if !c.skipped.is_empty() {
                let reasons: Vec<String> = c.skipped.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let _ = writeln!(
                    out,
                    "note: {} / {}: {} selected regions unvalidated ({})",
                    c.method,
                    c.regime.map_or("-", |r| r.as_str()),
                    c.skipped.values().sum::<usize>(),
                    reasons.join(", ")
                );
            }
        }
        if !self.unknown_truth_classes.is_empty() {
            let names: Vec<String> = self
                .unknown_truth_classes
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            let _ = writeln!(out, "note: ground-truth classes not in the catalogue: {}", names.join(", "));
        }
        out
    }
}

fn report_for(records: &[RegionRecord], classes: &[String]) -> Result<EvalReport, EvalError> {
    let rankings: Vec<Vec<&str>> = records
        .iter()
        .map(|r| r.ranking.iter().map(|p| p.class_name.as_str()).collect())
        .collect();
    let truth: Vec<&str> = records
        .iter()
        .map(|r| r.ground_truth.as_deref().ok_or_else(|| EvalError::MissingTruth(r.region_id.clone())))
        .collect::<Result<_, _>>()?;
    evaluate(&rankings, &truth, classes, MEASURE_K)
}

/// Scores the raw ML rankings and every requested (mode, regime) pair.
///
/// Size evidence is computed once per region, in parallel, and only for
/// regions some requested regime selects. Cells come out in a fixed order:
/// the baseline, then regimes in the given order, modes within each regime.
pub fn run_ablation(
    records: &[RegionRecord],
    crops: &dyn CropSource,
    reasoner: &Reasoner<'_>,
    modes: &[ValidationMode],
    regimes: &[SelectionRegime],
) -> Result<AblationTable, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let classes = reasoner.catalogue.class_list();
    let mut unknown_truth_classes = BTreeMap::new();
    for rec in records {
        let truth = rec
            .ground_truth
            .as_deref()
            .ok_or_else(|| EvalError::MissingTruth(rec.region_id.clone()))?;
        if !reasoner.catalogue.contains(truth) {
            *unknown_truth_classes.entry(truth.to_owned()).or_insert(0) += 1;
        }
    }

    let baseline = AblationCell {
        method: BASELINE_METHOD.to_owned(),
        mode: None,
        regime: None,
        report: report_for(records, classes)?,
        regions: records.len(),
        selected: 0,
        validated: 0,
        fallbacks: 0,
        skipped: BTreeMap::new(),
    };
    let mut cells = vec![baseline];
    if modes.is_empty() || regimes.is_empty() {
        return Ok(AblationTable {
            cells,
            unknown_truth_classes,
        });
    }

    let mut needed = vec![false; records.len()];
    for (i, rec) in records.iter().enumerate() {
        for &regime in regimes {
            needed[i] |= reasoner.selects(rec, regime)?;
        }
    }
    let evidence: Vec<Option<Result<SizeObservation, NoEvidence>>> = records
        .par_iter()
        .zip(needed.par_iter())
        .map(|(rec, &need)| {
            need.then(|| match crops.crop_for(rec) {
                Ok(Some(crop)) => reasoner.observe(rec, &crop),
                Ok(None) => Err(NoEvidence::MissingCrop),
                Err(e) => {
                    log::warn!("region `{}`: {e}", rec.region_id);
                    Err(NoEvidence::Unreadable)
                }
            })
        })
        .collect();

    for &regime in regimes {
        for &mode in modes {
            let mut corrected = Vec::with_capacity(records.len());
            let (mut selected, mut validated, mut fallbacks) = (0, 0, 0);
            let mut skipped = BTreeMap::new();
            for (rec, ev) in records.iter().zip(&evidence) {
                let ev = match ev {
                    Some(Ok(obs)) => Ok(obs),
                    Some(Err(why)) => Err(why),
                    None => Err(&NoEvidence::MissingCrop),
                };
                let (out, trace) = reasoner.apply(rec, ev, mode, regime)?;
                if trace.validated || trace.skipped.is_some() {
                    selected += 1;
                }
                validated += usize::from(trace.validated);
                fallbacks += usize::from(trace.fallback);
                if let Some(why) = trace.skipped {
                    *skipped.entry(why).or_insert(0) += 1;
                }
                corrected.push(out);
            }
            let cell = AblationCell {
                method: mode.label().to_owned(),
                mode: Some(mode),
                regime: Some(regime),
                report: report_for(&corrected, classes)?,
                regions: records.len(),
                selected,
                validated,
                fallbacks,
                skipped,
            };
            cells.push(cell);
        }
    }
    Ok(AblationTable {
        cells,
        unknown_truth_classes,
    })
}
