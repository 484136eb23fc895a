//! Dataset artifacts on disk: ranking JSONL, 16-bit depth PNGs, ground-truth
//! and timestamp CSVs, and RGB to depth frame matching.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::DepthCrop;
use crate::kb::normalize_class_name;
use crate::reasoner::RegionRecord;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {msg}")]
    MalformedRecord { line: usize, msg: String },
    #[error("line {line}: malformed row: {msg}")]
    MalformedRow { line: usize, msg: String },
    #[error("duplicate region `{0}`")]
    DuplicateRegion(String),
    #[error("{path}: {msg}")]
    BadFormat { path: PathBuf, msg: String },
    #[error("{0} timestamps are not sorted ascending")]
    UnsortedInput(&'static str),
    #[error("invalid match config: {0}")]
    BadConfig(String),
}

impl IngestError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStamp {
    pub frame_id: String,
    /// Seconds.
    pub timestamp: f64,
}

impl FrameStamp {
    pub fn new(frame_id: impl Into<String>, timestamp: f64) -> Self {
        Self {
            frame_id: frame_id.into(),
            timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Half-width of the matching window, seconds.
    pub mu: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { mu: 0.2 }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.mu > 0.0 && self.mu.is_finite() {
            Ok(())
        } else {
            Err(IngestError::BadConfig(format!("mu must be positive, got {}", self.mu)))
        }
    }
}

fn check_sorted(stamps: &[FrameStamp], which: &'static str) -> Result<(), IngestError> {
    if stamps.iter().any(|s| !s.timestamp.is_finite()) || stamps.windows(2).any(|w| w[0].timestamp > w[1].timestamp) {
        return Err(IngestError::UnsortedInput(which));
    }
    Ok(())
}

/// Pairs every RGB frame with the nearest depth frame within `±mu`
/// (inclusive). Equidistant candidates resolve to the earlier depth frame.
pub fn match_rgb_depth(
    rgb: &[FrameStamp],
    depth: &[FrameStamp],
    cfg: &MatchConfig,
) -> Result<Vec<(String, Option<String>)>, IngestError> {
    cfg.validate()?;
    check_sorted(rgb, "rgb")?;
    check_sorted(depth, "depth")?;
    let mut out = Vec::with_capacity(rgb.len());
    // rgb is sorted, so the first depth frame at or after t only moves forward
    let mut next = 0;
    for frame in rgb {
        let t = frame.timestamp;
        while next < depth.len() && depth[next].timestamp < t {
            next += 1;
        }
        let before = next.checked_sub(1).map(|i| (i, t - depth[i].timestamp));
        let after = (next < depth.len()).then(|| (next, depth[next].timestamp - t));
        let best = match (before, after) {
            (Some(b), Some(a)) => Some(if b.1 <= a.1 { b } else { a }),
            (b, a) => b.or(a),
        };
        let matched = best
            .filter(|&(_, dt)| dt <= cfg.mu)
            .map(|(i, _)| depth[i].frame_id.clone());
        out.push((frame.frame_id.clone(), matched));
    }
    Ok(out)
}

/// Reads a `frame_id,timestamp` CSV.
pub fn read_stamps(path: impl AsRef<Path>) -> Result<Vec<FrameStamp>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_csv(file, &["frame_id", "timestamp"])
}

/// Reads a `region_id,class` CSV into a map; duplicate ids are rejected.
pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_ground_truth(file)
}

#[derive(Deserialize)]
struct TruthRow {
    region_id: String,
    class: String,
}

pub fn parse_ground_truth(reader: impl Read) -> Result<BTreeMap<String, String>, IngestError> {
    let rows: Vec<TruthRow> = parse_csv(reader, &["region_id", "class"])?;
    let mut out = BTreeMap::new();
    for row in rows {
        if out.contains_key(&row.region_id) {
            return Err(IngestError::DuplicateRegion(row.region_id));
        }
        out.insert(row.region_id, normalize_class_name(&row.class));
    }
    Ok(out)
}

fn parse_csv<T: serde::de::DeserializeOwned>(reader: impl Read, header: &[&str]) -> Result<Vec<T>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found = rdr
        .headers()
        .map_err(|e| IngestError::MalformedRow { line: 1, msg: e.to_string() })?;
    if found.iter().collect::<Vec<_>>() != header {
        return Err(IngestError::MalformedRow {
            line: 1,
            msg: format!("expected header `{}`", header.join(",")),
        });
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| IngestError::MalformedRow {
                line: e.position().map_or(i + 2, |p| p.line() as usize),
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn write_ground_truth(truth: &BTreeMap<String, String>, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let mut text = String::from("region_id,class\n");
    for (id, class) in truth {
        text.push_str(&format!("{id},{class}\n"));
    }
    write_text(path.as_ref(), &text)
}

pub fn write_stamps(stamps: &[FrameStamp], path: impl AsRef<Path>) -> Result<(), IngestError> {
    let mut text = String::from("frame_id,timestamp\n");
    for s in stamps {
        text.push_str(&format!("{},{}\n", s.frame_id, s.timestamp));
    }
    write_text(path.as_ref(), &text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), IngestError> {
    std::fs::write(path, text).map_err(|e| IngestError::io(path, e))
}

/// Reads a ranking JSONL file. Class names are normalized, rankings that are
/// not ascending are re-sorted with a warning.
pub fn read_rankings(path: impl AsRef<Path>) -> Result<Vec<RegionRecord>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_rankings(BufReader::new(file))
}

pub fn parse_rankings(reader: impl BufRead) -> Result<Vec<RegionRecord>, IngestError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| IngestError::MalformedRecord { line: lineno, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| IngestError::MalformedRecord { line: lineno, msg };
        let mut rec: RegionRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if rec.ranking.is_empty() {
            return Err(bad("empty ranking".into()));
        }
        if let Some(p) = rec.ranking.iter().find(|p| !(p.score >= 0.0)) {
            return Err(bad(format!("score {} for `{}` is not a non-negative number", p.score, p.class_name)));
        }
        if rec.bbox2d.iter().any(|v| !(*v >= 0.0)) {
            return Err(bad("bbox2d values must be non-negative".into()));
        }
        if !seen.insert(rec.region_id.clone()) {
            return Err(bad(format!("duplicate region_id `{}`", rec.region_id)));
        }
        for p in &mut rec.ranking {
            p.class_name = normalize_class_name(&p.class_name);
        }
        if let Some(gt) = &mut rec.ground_truth {
            *gt = normalize_class_name(gt);
        }
        if rec.ranking.windows(2).any(|w| w[0].score > w[1].score) {
            log::warn!("line {lineno}: ranking of `{}` not ascending, re-sorted", rec.region_id);
            rec.ranking.sort_by(|a, b| a.score.total_cmp(&b.score));
        }
        out.push(rec);
    }
    Ok(out)
}

/// One JSON object per line, fields in declaration order.
pub fn rankings_to_string(records: &[RegionRecord]) -> String {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_rankings(records: &[RegionRecord], path: impl AsRef<Path>) -> Result<(), IngestError> {
    write_text(path.as_ref(), &rankings_to_string(records))
}

/// Copies `truth` into the records' `ground_truth` field.
pub fn attach_ground_truth(records: &mut [RegionRecord], truth: &BTreeMap<String, String>) {
    for rec in records {
        if let Some(class) = truth.get(&rec.region_id) {
            rec.ground_truth = Some(class.clone());
        }
    }
}

/// Reads a single-channel 16-bit PNG; values are kept as stored.
pub fn read_depth_crop(path: impl AsRef<Path>) -> Result<DepthCrop, IngestError> {
    let path = path.as_ref();
    let bad = |msg: String| IngestError::BadFormat { path: path.to_owned(), msg };
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(bad(format!(
            "expected 16-bit grayscale, found {:?} {:?}",
            info.bit_depth, info.color_type
        )));
    }
    let (w, h) = (info.width, info.height);
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| bad("image too large".into()))?];
    let frame = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    let values = buf[..frame.buffer_size()]
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    DepthCrop::new(w, h, values).map_err(|e| bad(e.to_string()))
}

pub fn write_depth_crop(crop: &DepthCrop, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    let bad = |msg: String| IngestError::BadFormat { path: path.to_owned(), msg };
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), crop.width(), crop.height());
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    let mut writer = enc.write_header().map_err(|e| bad(e.to_string()))?;
    let bytes: Vec<u8> = crop.values().iter().flat_map(|v| v.to_be_bytes()).collect();
    writer.write_image_data(&bytes).map_err(|e| bad(e.to_string()))?;
    writer.finish().map_err(|e| bad(e.to_string()))
}

/// Supplies the depth crop of a region, placed at its full-frame origin.
pub trait CropSource: Sync {
    /// `Ok(None)` when the record references no crop.
    fn crop_for(&self, rec: &RegionRecord) -> Result<Option<DepthCrop>, IngestError>;
}

/// Crops stored as PNG files, referenced relative to a base directory.
#[derive(Debug, Clone)]
pub struct CropDir {
    pub base: PathBuf,
}

impl CropDir {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Self { base: base.into() }
    }
}

impl CropSource for CropDir {
    fn crop_for(&self, rec: &RegionRecord) -> Result<Option<DepthCrop>, IngestError> {
        let Some(rel) = &rec.depth_crop else {
            return Ok(None);
        };
        let crop = read_depth_crop(self.base.join(rel))?;
        let [x, y, ..] = rec.bbox2d;
        Ok(Some(crop.with_origin(x.round() as u32, y.round() as u32)))
    }
}

/// In-memory crops keyed by region id; origins are taken as stored.
impl CropSource for HashMap<String, DepthCrop> {
    fn crop_for(&self, rec: &RegionRecord) -> Result<Option<DepthCrop>, IngestError> {
        Ok(self.get(&rec.region_id).cloned())
    }
}

/// Flushes a line-oriented writer of JSON values.
pub fn write_jsonl<T: Serialize>(items: &[T], out: &mut impl Write) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
