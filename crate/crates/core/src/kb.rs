//! Qualitative size catalogue.
//!
//! Every object class is described by the *sets* of bins it may occupy along
//! three qualitative dimensions: front surface area, depth and aspect ratio.
//! Membership is non-exclusive, so highly variable classes (boxes, cables)
//! simply list several bins.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("malformed knowledge base: {0}")]
    Malformed(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("i/o error reading knowledge base {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Front-surface area bin, ordered XS < S < M < L < XL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AreaBin {
    XS,
    S,
    M,
    L,
    XL,
}

/// Depth bin, ordered Flat < Thin < Thick < Bulky.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthBin {
    Flat,
    Thin,
    Thick,
    Bulky,
}

/// Aspect-ratio bin: taller than wide, wider than tall, or roughly equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArBin {
    Ttw,
    Wtt,
    Eq,
}

impl AreaBin {
    pub const ALL: [AreaBin; 5] = [AreaBin::XS, AreaBin::S, AreaBin::M, AreaBin::L, AreaBin::XL];

    pub fn as_str(self) -> &'static str {
        match self {
            AreaBin::XS => "XS",
            AreaBin::S => "S",
            AreaBin::M => "M",
            AreaBin::L => "L",
            AreaBin::XL => "XL",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl DepthBin {
    pub const ALL: [DepthBin; 4] = [DepthBin::Flat, DepthBin::Thin, DepthBin::Thick, DepthBin::Bulky];

    pub fn as_str(self) -> &'static str {
        match self {
            DepthBin::Flat => "flat",
            DepthBin::Thin => "thin",
            DepthBin::Thick => "thick",
            DepthBin::Bulky => "bulky",
        }
    }

    /// Binary flat / non-flat projection of the four-level scale.
    pub fn is_flat(self) -> bool {
        self == DepthBin::Flat
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl ArBin {
    pub const ALL: [ArBin; 3] = [ArBin::Ttw, ArBin::Wtt, ArBin::Eq];

    pub fn as_str(self) -> &'static str {
        match self {
            ArBin::Ttw => "ttw",
            ArBin::Wtt => "wtt",
            ArBin::Eq => "eq",
        }
    }

    /// The bin obtained by swapping width and height.
    pub fn swapped(self) -> ArBin {
        match self {
            ArBin::Ttw => ArBin::Wtt,
            ArBin::Wtt => ArBin::Ttw,
            ArBin::Eq => ArBin::Eq,
        }
    }
}

macro_rules! bin_text {
    ($ty:ty, $what:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = KbError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                <$ty>::ALL
                    .into_iter()
                    .find(|b| b.as_str().eq_ignore_ascii_case(s.trim()))
                    .ok_or_else(|| KbError::Malformed(format!("unknown {} token `{}`", $what, s)))
            }
        }
    };
}

bin_text!(AreaBin, "area");
bin_text!(DepthBin, "depth");
bin_text!(ArBin, "aspect-ratio");

/// Which size features take part in ranking validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    Area,
    AreaFlat,
    AreaThin,
    AreaFlatAr,
    AreaThinAr,
}

impl ValidationMode {
    pub const ALL: [ValidationMode; 5] = [
        ValidationMode::Area,
        ValidationMode::AreaFlat,
        ValidationMode::AreaThin,
        ValidationMode::AreaFlatAr,
        ValidationMode::AreaThinAr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValidationMode::Area => "area",
            ValidationMode::AreaFlat => "area_flat",
            ValidationMode::AreaThin => "area_thin",
            ValidationMode::AreaFlatAr => "area_flat_ar",
            ValidationMode::AreaThinAr => "area_thin_ar",
        }
    }

    /// Display label used in report tables, e.g. `Hybrid (area+thin+AR)`.
    pub fn label(self) -> &'static str {
        match self {
            ValidationMode::Area => "Hybrid (area)",
            ValidationMode::AreaFlat => "Hybrid (area+flat)",
            ValidationMode::AreaThin => "Hybrid (area+thin)",
            ValidationMode::AreaFlatAr => "Hybrid (area+flat+AR)",
            ValidationMode::AreaThinAr => "Hybrid (area+thin+AR)",
        }
    }

    pub fn uses_flat(self) -> bool {
        matches!(self, ValidationMode::AreaFlat | ValidationMode::AreaFlatAr)
    }

    pub fn uses_thin(self) -> bool {
        matches!(self, ValidationMode::AreaThin | ValidationMode::AreaThinAr)
    }

    pub fn uses_ar(self) -> bool {
        matches!(self, ValidationMode::AreaFlatAr | ValidationMode::AreaThinAr)
    }
}

impl fmt::Display for ValidationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValidationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['+', '-'], "_");
        ValidationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| format!("unknown validation mode `{s}`"))
    }
}

/// The bins a single observation falls into.
///
/// Implemented by `SizeObservation`; kept as a trait so the catalogue does
/// not depend on how the bins were obtained.
pub trait ObservedBins {
    fn area_bin(&self) -> AreaBin;
    fn depth_bin(&self) -> DepthBin;
    fn ar_bin(&self) -> ArBin;
}

/// One catalogue row: the bins a class is allowed to occupy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeProfile {
    pub class_name: String,
    pub area_bins: BTreeSet<AreaBin>,
    pub depth_bins: BTreeSet<DepthBin>,
    pub ar_bins: BTreeSet<ArBin>,
}

impl SizeProfile {
    pub fn new(
        class_name: impl Into<String>,
        area_bins: impl IntoIterator<Item = AreaBin>,
        depth_bins: impl IntoIterator<Item = DepthBin>,
        ar_bins: impl IntoIterator<Item = ArBin>,
    ) -> Self {
        Self {
            class_name: class_name.into(),
            area_bins: area_bins.into_iter().collect(),
            depth_bins: depth_bins.into_iter().collect(),
            ar_bins: ar_bins.into_iter().collect(),
        }
    }

    /// A profile that admits every bin of every feature.
    pub fn permissive(class_name: impl Into<String>) -> Self {
        Self::new(class_name, AreaBin::ALL, DepthBin::ALL, ArBin::ALL)
    }

    /// Whether `flat` (true) or non-flat (false) is among the permitted depths.
    pub fn admits_flatness(&self, flat: bool) -> bool {
        self.depth_bins.iter().any(|d| d.is_flat() == flat)
    }

    pub fn admits(&self, obs: &impl ObservedBins, mode: ValidationMode) -> bool {
        if !self.area_bins.contains(&obs.area_bin()) {
            return false;
        }
        if mode.uses_flat() && !self.admits_flatness(obs.depth_bin().is_flat()) {
            return false;
        }
        if mode.uses_thin() && !self.depth_bins.contains(&obs.depth_bin()) {
            return false;
        }
        if mode.uses_ar() && !self.ar_bins.contains(&obs.ar_bin()) {
            return false;
        }
        true
    }

    fn validate(&self) -> Result<(), KbError> {
        if self.class_name.is_empty() {
            return Err(KbError::Malformed("empty class name".into()));
        }
        let empty = if self.area_bins.is_empty() {
            Some("area")
        } else if self.depth_bins.is_empty() {
            Some("depth")
        } else if self.ar_bins.is_empty() {
            Some("ar")
        } else {
            None
        };
        match empty {
            Some(feature) => Err(KbError::Malformed(format!(
                "class `{}` has an empty {feature} bin set",
                self.class_name
            ))),
            None => Ok(()),
        }
    }
}

/// On-disk row layout.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KbRow {
    class: String,
    area: Vec<String>,
    depth: Vec<String>,
    ar: Vec<String>,
}

impl KbRow {
    fn into_profile(self) -> Result<SizeProfile, KbError> {
        fn parse<T: FromStr<Err = KbError> + Ord>(tokens: &[String]) -> Result<BTreeSet<T>, KbError> {
            tokens.iter().map(|t| t.parse()).collect()
        }
        let profile = SizeProfile {
            class_name: normalize_class_name(&self.class),
            area_bins: parse(&self.area)?,
            depth_bins: parse(&self.depth)?,
            ar_bins: parse(&self.ar)?,
        };
        profile.validate()?;
        Ok(profile)
    }

    fn from_profile(p: &SizeProfile) -> Self {
        Self {
            class: p.class_name.clone(),
            area: p.area_bins.iter().map(|b| b.as_str().to_owned()).collect(),
            depth: p.depth_bins.iter().map(|b| b.as_str().to_owned()).collect(),
            ar: p.ar_bins.iter().map(|b| b.as_str().to_owned()).collect(),
        }
    }
}

/// Lower-snake-case form used to join class names across files.
pub fn normalize_class_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut pending_sep = false;
    for ch in name.trim().chars() {
        if ch.is_whitespace() || ch == '-' || ch == '_' {
            pending_sep = !out.is_empty();
            continue;
        }
        if pending_sep {
            out.push('_');
            pending_sep = false;
        }
        out.extend(ch.to_lowercase());
    }
    out
}

/// Immutable class → size-profile catalogue.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalogue {
    class_list: Vec<String>,
    profiles: HashMap<String, SizeProfile>,
}

impl Catalogue {
    pub fn from_profiles(profiles: impl IntoIterator<Item = SizeProfile>) -> Result<Self, KbError> {
        let mut class_list = Vec::new();
        let mut map = HashMap::new();
        for p in profiles {
            p.validate()?;
            if map.contains_key(&p.class_name) {
                return Err(KbError::Malformed(format!("duplicate class `{}`", p.class_name)));
            }
            class_list.push(p.class_name.clone());
            map.insert(p.class_name.clone(), p);
        }
        if class_list.is_empty() {
            return Err(KbError::Malformed("catalogue has no classes".into()));
        }
        Ok(Self { class_list, profiles: map })
    }

    pub fn from_json_str(text: &str) -> Result<Self, KbError> {
        let rows: Vec<KbRow> =
            serde_json::from_str(text).map_err(|e| KbError::Malformed(e.to_string()))?;
        let profiles = rows.into_iter().map(KbRow::into_profile).collect::<Result<Vec<_>, _>>()?;
        Self::from_profiles(profiles)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KbError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Serializes to the catalogue JSON layout, one row per class in list order.
    pub fn to_json_string(&self) -> String {
        let rows: Vec<KbRow> = self.profiles().map(KbRow::from_profile).collect();
        let mut out = String::from("[\n");
        for (i, row) in rows.iter().enumerate() {
            out.push_str("  ");
            out.push_str(&serde_json::to_string(row).expect("kb row serializes"));
            out.push_str(if i + 1 < rows.len() { ",\n" } else { "\n" });
        }
        out.push_str("]\n");
        out
    }

    /// Illustrative catalogue of office / health-and-safety objects.
    ///
    /// The bin assignments are hand-made examples, not measured ground truth.
    pub fn illustrative() -> Self {
        Self::from_json_str(include_str!("../data/illustrative_kb.json"))
            .expect("bundled catalogue is valid")
    }

    pub fn class_list(&self) -> &[String] {
        &self.class_list
    }

    pub fn len(&self) -> usize {
        self.class_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_list.is_empty()
    }

    pub fn contains(&self, class_name: &str) -> bool {
        self.profiles.contains_key(class_name)
    }

    /// Profiles in catalogue order.
    pub fn profiles(&self) -> impl Iterator<Item = &SizeProfile> {
        self.class_list.iter().map(|c| &self.profiles[c])
    }

    /// Exact, case-sensitive lookup.
    pub fn profile_of(&self, class_name: &str) -> Result<&SizeProfile, KbError> {
        self.profiles
            .get(class_name)
            .ok_or_else(|| KbError::UnknownClass(class_name.to_owned()))
    }

    /// Classes whose profile admits the observation under `mode`, in catalogue order.
    pub fn plausible_classes(&self, obs: &impl ObservedBins, mode: ValidationMode) -> Vec<&str> {
        self.profiles()
            .filter(|p| p.admits(obs, mode))
            .map(|p| p.class_name.as_str())
            .collect()
    }
}
