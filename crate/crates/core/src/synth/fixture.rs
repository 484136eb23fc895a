//! End-to-end fixture datasets with planted size classes and corrupted rankings.
//!
//! Every class is a box prototype whose area, depth and aspect-ratio values
//! sit at the geometric centre of one bin each, so moderate estimation error
//! never changes the bin. Rankings are built from four region kinds whose
//! gate outcome and correctness are known up front, which lets the expected
//! report of every (mode, regime) cell be enumerated without running the
//! reasoner.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::render::render_box_crop;
use super::SynthError;
use crate::config::PipelineConfig;
use crate::eval::{evaluate, AblationCell, AblationTable, EvalReport};
use crate::geometry::{CameraIntrinsics, DepthCrop};
use crate::ingest::{write_depth_crop, write_ground_truth, write_rankings};
use crate::kb::{ArBin, AreaBin, Catalogue, DepthBin, SizeProfile};
use crate::reasoner::{Prediction, RegionRecord, SelectionRegime, ValidationMode};

/// Front areas (m²) at the geometric centre of each area bin; the open top
/// bin uses twice its threshold.
const AREA_VALUES: [(AreaBin, f64); 5] = [
    (AreaBin::XS, 0.0035),
    (AreaBin::S, 0.0187),
    (AreaBin::M, 0.132),
    (AreaBin::L, 0.526),
    (AreaBin::XL, 1.58),
];

const DEPTH_VALUES: [(DepthBin, f64); 4] = [
    (DepthBin::Flat, 0.03),
    (DepthBin::Thin, 0.141),
    (DepthBin::Thick, 0.283),
    (DepthBin::Bulky, 0.566),
];

/// Height over width of the front face for each aspect-ratio class.
const AR_VALUES: [(ArBin, f64); 3] = [(ArBin::Eq, 1.0), (ArBin::Ttw, 2.5), (ArBin::Wtt, 1.0 / 2.5)];

/// Depth must stay well below both front dimensions to remain the minimum.
const MAX_DEPTH_RATIO: f64 = 0.65;
/// Non-flat boxes need a side face wide enough, relative to the front, to
/// survive outlier trimming in a single view.
const MIN_SIDE_RATIO: f64 = 0.3;

/// Yaw shows the side face of deep boxes; flat boxes stay nearly frontal so
/// their silhouette keeps the front aspect ratio.
const YAW_DEG: (f64, f64) = (40.0, 50.0);
const FLAT_YAW_DEG: (f64, f64) = (10.0, 20.0);
const PITCH_DEG: (f64, f64) = (3.0, 8.0);
const SILHOUETTE_PX: (f64, f64) = (180.0, 260.0);
const DISTANCE_M: (f64, f64) = (0.8, 7.5);
const RANKING_LEN: usize = 6;

/// Knowledge base shipped with a fixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKb {
    /// Each class admits exactly its own prototype's bins.
    Separating,
    /// Every class admits every bin, so validation is the identity.
    Permissive,
}

/// How a region's ML ranking was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionKind {
    /// Correct top-1 the gate trusts.
    ConfidentCorrect,
    /// Correct top-1 the gate does not trust.
    UnsureCorrect,
    /// Wrong top-1 the gate trusts anyway.
    ConfidentWrong,
    /// Wrong top-1 the gate routes to the reasoner.
    UnsureWrong,
}

impl RegionKind {
    pub fn is_wrong(self) -> bool {
        matches!(self, RegionKind::ConfidentWrong | RegionKind::UnsureWrong)
    }

    pub fn is_gated(self) -> bool {
        matches!(self, RegionKind::ConfidentCorrect | RegionKind::ConfidentWrong)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub n_regions: usize,
    pub n_classes: usize,
    /// Fraction of regions whose top-1 is wrong.
    pub corruption_rate: f64,
    pub seed: u64,
    pub kb: FixtureKb,
    /// Share of wrong regions that the gate trusts.
    pub confident_wrong_fraction: f64,
    pub intrinsics: CameraIntrinsics,
    pub frame: (u32, u32),
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            n_regions: 200,
            n_classes: 12,
            corruption_rate: 0.4,
            seed: 7,
            kb: FixtureKb::Separating,
            confident_wrong_fraction: 0.25,
            intrinsics: CameraIntrinsics::default(),
            frame: (640, 480),
        }
    }
}

/// A planted object class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPrototype {
    pub name: String,
    pub area: AreaBin,
    pub depth: DepthBin,
    pub ar: ArBin,
    /// Front width, front height and depth in meters.
    pub dims: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureRegion {
    /// Ranking and ground truth; `depth_crop` points into `crops/`.
    pub record: RegionRecord,
    pub kind: RegionKind,
    pub crop: DepthCrop,
    /// Index into the dataset's prototypes.
    pub truth_class: usize,
}

#[derive(Debug, Clone)]
pub struct FixtureDataset {
    pub spec: FixtureSpec,
    pub prototypes: Vec<ClassPrototype>,
    pub catalogue: Catalogue,
    pub regions: Vec<FixtureRegion>,
    /// Enumerated results for the baseline and all 15 (mode, regime) cells.
    pub expected: AblationTable,
}

/// Fixture with the default knobs and a separating knowledge base.
pub fn generate_fixture_dataset(
    n_regions: usize,
    n_classes: usize,
    corruption_rate: f64,
    seed: u64,
) -> Result<FixtureDataset, SynthError> {
    FixtureSpec {
        n_regions,
        n_classes,
        corruption_rate,
        seed,
        ..Default::default()
    }
    .generate()
}

/// Every prototype that keeps depth the smallest dimension, grouped by area bin.
pub fn prototype_pool() -> Vec<Vec<ClassPrototype>> {
    AREA_VALUES
        .iter()
        .map(|&(area, a)| {
            let mut group = Vec::new();
            for &(depth, d) in &DEPTH_VALUES {
                for &(ar, hw) in &AR_VALUES {
                    let w = (a / hw).sqrt();
                    let h = w * hw;
                    let side_visible = depth == DepthBin::Flat || d >= MIN_SIDE_RATIO * w;
                    if d <= MAX_DEPTH_RATIO * w.min(h) && side_visible {
                        group.push(ClassPrototype {
                            name: format!("{}_{}_{}", area.as_str().to_lowercase(), depth.as_str(), ar.as_str()),
                            area,
                            depth,
                            ar,
                            dims: [w, h, d],
                        });
                    }
                }
            }
            group
        })
        .collect()
}

/// Picks prototypes round-robin over area bins, so neighbouring classes
/// always differ in area. Within a bin, depth bins alternate, starting at a
/// different one per area bin, so even small fixtures mix flat and deep boxes.
fn pick_prototypes(n: usize) -> Result<Vec<ClassPrototype>, SynthError> {
    let mut pool = prototype_pool();
    let available: usize = pool.iter().map(Vec::len).sum();
    if n > available {
        return Err(SynthError::BadSpec(format!("at most {available} distinct size classes exist, asked for {n}")));
    }
    for (g, group) in pool.iter_mut().enumerate() {
        let mut seen = [0usize; 4];
        let mut keyed: Vec<((usize, usize), ClassPrototype)> = group
            .drain(..)
            .map(|p| {
                let d = p.depth.index();
                seen[d] += 1;
                ((seen[d], (d + 4 - g % 4) % 4), p)
            })
            .collect();
        keyed.sort_by_key(|(k, _)| *k);
        // popped from the back
        group.extend(keyed.into_iter().rev().map(|(_, p)| p));
    }
    let mut out = Vec::with_capacity(n);
    let groups = pool.len();
    let mut bin = 0;
    while out.len() < n {
        if let Some(p) = pool[bin % groups].pop() {
            out.push(p);
        }
        bin += 1;
    }
    for (i, p) in out.iter_mut().enumerate() {
        p.name = format!("c{i:02}_{}", p.name);
    }
    Ok(out)
}

impl FixtureSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.n_regions == 0 {
            return Err(SynthError::BadSpec("n_regions must be positive".into()));
        }
        if self.n_classes < 2 {
            return Err(SynthError::BadSpec("need at least 2 classes".into()));
        }
        if !(0.0..=1.0).contains(&self.corruption_rate) {
            return Err(SynthError::BadSpec("corruption_rate must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.confident_wrong_fraction) {
            return Err(SynthError::BadSpec("confident_wrong_fraction must be in [0, 1]".into()));
        }
        self.intrinsics
            .validate()
            .map_err(|e| SynthError::BadSpec(e.to_string()))
    }

    pub fn generate(&self) -> Result<FixtureDataset, SynthError> {
        self.validate()?;
        let prototypes = pick_prototypes(self.n_classes)?;
        let catalogue = Catalogue::from_profiles(prototypes.iter().map(|p| match self.kb {
            FixtureKb::Separating => SizeProfile::new(p.name.clone(), [p.area], [p.depth], [p.ar]),
            FixtureKb::Permissive => SizeProfile::permissive(p.name.clone()),
        }))
        .map_err(|e| SynthError::BadSpec(e.to_string()))?;

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n_wrong = (self.corruption_rate * self.n_regions as f64).round() as usize;
        let n_confident_wrong = (self.confident_wrong_fraction * n_wrong as f64).round() as usize;
        let mut kinds: Vec<RegionKind> = (0..self.n_regions)
            .map(|i| {
                if i < n_confident_wrong {
                    RegionKind::ConfidentWrong
                } else if i < n_wrong {
                    RegionKind::UnsureWrong
                } else {
                    RegionKind::ConfidentCorrect
                }
            })
            .collect();
        kinds.shuffle(&mut rng);

        let mut drafts = Vec::with_capacity(self.n_regions);
        for (i, kind) in kinds.into_iter().enumerate() {
            let kind = match kind {
                RegionKind::ConfidentCorrect if rng.random_bool(0.5) => RegionKind::UnsureCorrect,
                k => k,
            };
            let truth = rng.random_range(0..prototypes.len());
            let ranking = build_ranking(&mut rng, kind, truth, &prototypes);
            drafts.push((format!("r{i:04}"), kind, truth, ranking, rng.random::<u64>()));
        }

        let rendered: Vec<Result<(DepthCrop, [f64; 4]), SynthError>> = drafts
            .par_iter()
            .map(|(_, _, truth, _, render_seed)| self.render(&prototypes[*truth], *render_seed))
            .collect();

        let mut regions = Vec::with_capacity(self.n_regions);
        for ((id, kind, truth, ranking, _), r) in drafts.into_iter().zip(rendered) {
            let (crop, bbox2d) = r?;
            regions.push(FixtureRegion {
                record: RegionRecord {
                    depth_crop: Some(format!("crops/{id}.png")),
                    region_id: id,
                    bbox2d,
                    ranking,
                    ground_truth: Some(prototypes[truth].name.clone()),
                },
                kind,
                crop,
                truth_class: truth,
            });
        }

        let expected = enumerate_expected(&regions, &prototypes, &catalogue, self.kb)?;
        Ok(FixtureDataset {
            spec: self.clone(),
            prototypes,
            catalogue,
            regions,
            expected,
        })
    }

    /// Renders one view of `proto` with a pose drawn from `seed`.
    pub fn render(&self, proto: &ClassPrototype, seed: u64) -> Result<(DepthCrop, [f64; 4]), SynthError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signed = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            let a = rng.random_range(lo..hi).to_radians();
            if rng.random_bool(0.5) {
                a
            } else {
                -a
            }
        };
        let yaw = signed(&mut rng, if proto.depth == DepthBin::Flat { FLAT_YAW_DEG } else { YAW_DEG });
        let pitch = signed(&mut rng, PITCH_DEG);
        let rotation = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), pitch)
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), yaw);
        let k = &self.intrinsics;
        let [w, h, d] = proto.dims;
        let px = rng.random_range(SILHOUETTE_PX.0..SILHOUETTE_PX.1);
        let z = (k.fx * w.max(h) / px).clamp(DISTANCE_M.0, DISTANCE_M.1);
        let du = rng.random_range(-60.0..60.0);
        let dv = rng.random_range(-40.0..40.0);
        let centre = Vector3::new(
            (f64::from(self.frame.0) / 2.0 + du - k.cx) * z / k.fx,
            (f64::from(self.frame.1) / 2.0 + dv - k.cy) * z / k.fy,
            z,
        );
        let r = render_box_crop([w, h, d], &rotation, &centre, k, self.frame)?;
        let [x, y, bw, bh] = r.bbox2d;
        if x <= 0.0 || y <= 0.0 || x + bw >= f64::from(self.frame.0) || y + bh >= f64::from(self.frame.1) {
            return Err(SynthError::BadSpec(format!("`{}` does not fit in the frame", proto.name)));
        }
        Ok((r.crop, r.bbox2d))
    }
}

fn step(rng: &mut ChaCha8Rng, s: f64) -> f64 {
    round6(s + rng.random_range(0.001..0.01))
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Ascending scores starting below (confident) or well above the default ε.
fn scores(rng: &mut ChaCha8Rng, confident: bool) -> Vec<f64> {
    let mut s = round6(if confident {
        rng.random_range(0.005..0.012)
    } else {
        rng.random_range(0.05..0.2)
    });
    let mut out = Vec::with_capacity(RANKING_LEN);
    for _ in 0..RANKING_LEN {
        out.push(s);
        s = step(rng, s);
    }
    out
}

fn build_ranking(rng: &mut ChaCha8Rng, kind: RegionKind, truth: usize, protos: &[ClassPrototype]) -> Vec<Prediction> {
    let others: Vec<usize> = (0..protos.len()).filter(|&c| c != truth).collect();
    // wrong answers never share the true area bin, so every mode rejects them
    let far: Vec<usize> = others
        .iter()
        .copied()
        .filter(|&c| protos[c].area != protos[truth].area)
        .collect();
    let any = |rng: &mut ChaCha8Rng| others[rng.random_range(0..others.len())];
    let wrong = |rng: &mut ChaCha8Rng| far[rng.random_range(0..far.len())];

    let (classes, confident): (Vec<usize>, bool) = match kind {
        // truth three times in the top five, first score under ε
        RegionKind::ConfidentCorrect => (vec![truth, truth, any(rng), truth, any(rng), any(rng)], true),
        RegionKind::UnsureCorrect => {
            if rng.random_bool(0.5) {
                (vec![truth, any(rng), any(rng), truth, any(rng), any(rng)], false)
            } else {
                // confident score but only two repeats
                (vec![truth, any(rng), truth, any(rng), any(rng), any(rng)], true)
            }
        }
        RegionKind::ConfidentWrong => {
            let w = wrong(rng);
            (vec![w, w, truth, w, any(rng), any(rng)], true)
        }
        RegionKind::UnsureWrong => {
            if rng.random_bool(0.5) {
                (vec![wrong(rng), truth, any(rng), any(rng), any(rng), any(rng)], false)
            } else {
                (vec![wrong(rng), wrong(rng), truth, any(rng), any(rng), any(rng)], false)
            }
        }
    };
    classes
        .into_iter()
        .zip(scores(rng, confident))
        .map(|(c, s)| Prediction::new(protos[c].name.clone(), s))
        .collect()
}

/// Whether `candidate` survives validation against the planted bins of `truth`.
fn plausible(candidate: &ClassPrototype, truth: &ClassPrototype, mode: ValidationMode, kb: FixtureKb) -> bool {
    if kb == FixtureKb::Permissive {
        return true;
    }
    let flat_ok = !mode.uses_flat() || (candidate.depth == DepthBin::Flat) == (truth.depth == DepthBin::Flat);
    let thin_ok = !mode.uses_thin() || candidate.depth == truth.depth;
    let ar_ok = !mode.uses_ar() || candidate.ar == truth.ar;
    candidate.area == truth.area && flat_ok && thin_ok && ar_ok
}

fn enumerate_expected(
    regions: &[FixtureRegion],
    protos: &[ClassPrototype],
    catalogue: &Catalogue,
    kb: FixtureKb,
) -> Result<AblationTable, SynthError> {
    let by_name: HashMap<&str, &ClassPrototype> = protos.iter().map(|p| (p.name.as_str(), p)).collect();
    let truth: Vec<&str> = regions.iter().map(|r| protos[r.truth_class].name.as_str()).collect();
    let score = |rankings: &[Vec<&str>]| -> Result<EvalReport, SynthError> {
        evaluate(rankings, &truth, catalogue.class_list(), 5).map_err(|e| SynthError::BadSpec(e.to_string()))
    };
    let raw: Vec<Vec<&str>> = regions
        .iter()
        .map(|r| r.record.ranking.iter().map(|p| p.class_name.as_str()).collect())
        .collect();

    let mut cells = vec![AblationCell {
        method: crate::eval::BASELINE_METHOD.to_owned(),
        mode: None,
        regime: None,
        report: score(&raw)?,
        regions: regions.len(),
        selected: 0,
        validated: 0,
        fallbacks: 0,
        skipped: BTreeMap::new(),
    }];
    for regime in SelectionRegime::ALL {
        for mode in ValidationMode::ALL {
            let (mut selected, mut fallbacks) = (0, 0);
            let mut rankings = Vec::with_capacity(regions.len());
            for (r, ranked) in regions.iter().zip(&raw) {
                let chosen = match regime {
                    SelectionRegime::OracleWrongOnly => r.kind.is_wrong(),
                    SelectionRegime::All => true,
                    SelectionRegime::AutoGate => !r.kind.is_gated(),
                };
                if !chosen {
                    rankings.push(ranked.clone());
                    continue;
                }
                selected += 1;
                let t = &protos[r.truth_class];
                let kept: Vec<&str> = ranked
                    .iter()
                    .copied()
                    .filter(|c| plausible(by_name[c], t, mode, kb))
                    .collect();
                if kept.is_empty() {
                    fallbacks += 1;
                    rankings.push(ranked.clone());
                } else {
                    rankings.push(kept);
                }
            }
            cells.push(AblationCell {
                method: mode.label().to_owned(),
                mode: Some(mode),
                regime: Some(regime),
                report: score(&rankings)?,
                regions: regions.len(),
                selected,
                validated: selected,
                fallbacks,
                skipped: BTreeMap::new(),
            });
        }
    }
    Ok(AblationTable {
        cells,
        unknown_truth_classes: BTreeMap::new(),
    })
}

impl FixtureDataset {
    /// Records with ground truth attached.
    pub fn records(&self) -> Vec<RegionRecord> {
        self.regions.iter().map(|r| r.record.clone()).collect()
    }

    /// Crops keyed by region id, placed at their full-frame origin.
    pub fn crops(&self) -> HashMap<String, DepthCrop> {
        self.regions
            .iter()
            .map(|r| (r.record.region_id.clone(), r.crop.clone()))
            .collect()
    }

    pub fn truth(&self) -> BTreeMap<String, String> {
        self.regions
            .iter()
            .map(|r| (r.record.region_id.clone(), self.prototypes[r.truth_class].name.clone()))
            .collect()
    }

    /// Writes `kb.json`, `rankings.jsonl`, `truth.csv`, `crops/*.png`,
    /// `expected_report.json` and a `config.toml` pointing at them.
    pub fn write_to(&self, dir: &Path) -> Result<(), SynthError> {
        let io = |e: &dyn std::fmt::Display| SynthError::Write(e.to_string());
        std::fs::create_dir_all(dir.join("crops")).map_err(|e| io(&e))?;
        std::fs::write(dir.join("kb.json"), self.catalogue.to_json_string()).map_err(|e| io(&e))?;
        let unlabeled: Vec<RegionRecord> = self
            .regions
            .iter()
            .map(|r| RegionRecord {
                ground_truth: None,
                ..r.record.clone()
            })
            .collect();
        write_rankings(&unlabeled, dir.join("rankings.jsonl")).map_err(|e| io(&e))?;
        write_ground_truth(&self.truth(), dir.join("truth.csv")).map_err(|e| io(&e))?;
        for r in &self.regions {
            let rel = r.record.depth_crop.as_deref().expect("fixture regions have crops");
            write_depth_crop(&r.crop, dir.join(rel)).map_err(|e| io(&e))?;
        }
        let expected = serde_json::to_string_pretty(&self.expected).map_err(|e| io(&e))?;
        std::fs::write(dir.join("expected_report.json"), expected + "\n").map_err(|e| io(&e))?;
        let config = PipelineConfig {
            fx: self.spec.intrinsics.fx,
            fy: self.spec.intrinsics.fy,
            cx: self.spec.intrinsics.cx,
            cy: self.spec.intrinsics.cy,
            depth_scale: self.spec.intrinsics.depth_scale,
            kb: Some("kb.json".into()),
            rankings: Some("rankings.jsonl".into()),
            crops_dir: Some(".".into()),
            truth: Some("truth.csv".into()),
            output: Some("out".into()),
            ..Default::default()
        };
        std::fs::write(dir.join("config.toml"), config.to_toml_string()).map_err(|e| io(&e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_has_depth_as_smallest_dimension() {
        let pool = prototype_pool();
        assert_eq!(pool.len(), 5);
        for p in pool.iter().flatten() {
            assert!(p.dims[2] < p.dims[0].min(p.dims[1]), "{p:?}");
        }
        assert_eq!(pool.iter().map(Vec::len).sum::<usize>(), 20);
        assert!(pool.iter().all(|g| !g.is_empty()));
    }

    #[test]
    fn neighbouring_classes_differ_in_area() {
        let protos = pick_prototypes(12).unwrap();
        for w in protos.windows(2) {
            assert_ne!(w[0].area, w[1].area);
        }
        assert!(pick_prototypes(1000).is_err());
    }

    #[test]
    fn rankings_follow_their_kind() {
        let protos = pick_prototypes(10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gate = crate::reasoner::GateConfig::default();
        for kind in [
            RegionKind::ConfidentCorrect,
            RegionKind::UnsureCorrect,
            RegionKind::ConfidentWrong,
            RegionKind::UnsureWrong,
        ] {
            for truth in 0..protos.len() {
                let r = build_ranking(&mut rng, kind, truth, &protos);
                assert_eq!(r.len(), RANKING_LEN);
                assert!(r.windows(2).all(|w| w[0].score < w[1].score));
                assert_eq!(r[0].class_name != protos[truth].name, kind.is_wrong());
                assert_eq!(crate::reasoner::gate_decision(&r, &gate).unwrap(), kind.is_gated());
                assert!(r.iter().take(5).any(|p| p.class_name == protos[truth].name));
            }
        }
    }

    #[test]
    fn spec_bounds() {
        assert!(generate_fixture_dataset(10, 5, 1.5, 0).is_err());
        assert!(generate_fixture_dataset(0, 5, 0.5, 0).is_err());
        assert!(generate_fixture_dataset(10, 1, 0.5, 0).is_err());
    }
}
