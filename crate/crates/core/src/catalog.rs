//! Instrument, tray and checklist data model.
//!
//! Every dimension the packer consumes lives here. Files are JSON:
//!
//! ```text
//! catalog:   {"instruments":[{"id":..,"group":..,"length_mm":..,"width_mm":..,"height_mm":..,"magnetic":..}]}
//! checklist: {"procedure":..,"items":[{"id":..,"qty":..}]}
//! tray:      {"length_mm":..,"width_mm":..,"depth_mm":..,"divider_thickness_mm":..}
//! padding:   {"px_mm":..,"py_mm":..,"pz_mm":..}
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("invalid record `{id}`: {reason}")]
    Validation { id: String, reason: String },
}

impl CatalogError {
    fn invalid(id: impl Into<String>, reason: impl Into<String>) -> Self {
        CatalogError::Validation {
            id: id.into(),
            reason: reason.into(),
        }
    }
}

/// Instrument family. Only merge-set membership and the ring flag affect packing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InstrumentGroup {
    Ring,
    RingThick,
    Needle,
    Thumb,
    Gun,
    Other(String),
}

impl InstrumentGroup {
    /// Ring-handled instruments go one per layer and need a holder.
    pub fn is_ring(&self) -> bool {
        matches!(self, InstrumentGroup::Ring | InstrumentGroup::RingThick)
    }
}

impl fmt::Display for InstrumentGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstrumentGroup::Ring => f.write_str("ring"),
            InstrumentGroup::RingThick => f.write_str("ring_thick"),
            InstrumentGroup::Needle => f.write_str("needle"),
            InstrumentGroup::Thumb => f.write_str("thumb"),
            InstrumentGroup::Gun => f.write_str("gun"),
            InstrumentGroup::Other(name) => write!(f, "other:{name}"),
        }
    }
}

impl FromStr for InstrumentGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ring" => Ok(InstrumentGroup::Ring),
            "ring_thick" => Ok(InstrumentGroup::RingThick),
            "needle" => Ok(InstrumentGroup::Needle),
            "thumb" => Ok(InstrumentGroup::Thumb),
            "gun" => Ok(InstrumentGroup::Gun),
            other => match other.strip_prefix("other:") {
                Some(name) if !name.is_empty() => Ok(InstrumentGroup::Other(name.to_string())),
                Some(_) => Err("`other:` group needs a nonempty name".to_string()),
                None => Err(format!("unknown instrument group `{other}`")),
            },
        }
    }
}

impl TryFrom<String> for InstrumentGroup {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<InstrumentGroup> for String {
    fn from(g: InstrumentGroup) -> Self {
        g.to_string()
    }
}

/// One instrument class as listed on a manufacturer datasheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSpec {
    pub id: String,
    pub group: InstrumentGroup,
    /// Longest planar extent; lies along the tray width.
    pub length_mm: f64,
    pub width_mm: f64,
    /// Stacking thickness.
    pub height_mm: f64,
    /// Carried for gripper logic; the packer ignores it.
    pub magnetic: bool,
}

impl InstrumentSpec {
    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.id.is_empty() {
            return Err(CatalogError::invalid("", "empty id"));
        }
        for (name, v) in [
            ("length_mm", self.length_mm),
            ("width_mm", self.width_mm),
            ("height_mm", self.height_mm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CatalogError::invalid(
                    &self.id,
                    format!("{name} must be positive, got {v}"),
                ));
            }
        }
        if self.length_mm < self.width_mm {
            return Err(CatalogError::invalid(
                &self.id,
                format!(
                    "length_mm ({}) must not be smaller than width_mm ({})",
                    self.length_mm, self.width_mm
                ),
            ));
        }
        Ok(())
    }

    /// `[ln(1 + length), ln(1 + width)]`, the dimensional side-input of the classifier.
    pub fn meta_features(&self) -> [f64; 2] {
        meta_features(self.length_mm, self.width_mm)
    }
}

pub fn meta_features(length_mm: f64, width_mm: f64) -> [f64; 2] {
    [length_mm.ln_1p(), width_mm.ln_1p()]
}

/// A validated set of instrument specs with id lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    instruments: Vec<InstrumentSpec>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    instruments: Vec<InstrumentSpec>,
}

impl Catalog {
    pub fn new(instruments: Vec<InstrumentSpec>) -> Result<Self, CatalogError> {
        let mut index = HashMap::with_capacity(instruments.len());
        for (i, spec) in instruments.iter().enumerate() {
            spec.validate()?;
            if index.insert(spec.id.clone(), i).is_some() {
                return Err(CatalogError::invalid(&spec.id, "duplicate id"));
            }
        }
        Ok(Catalog { instruments, index })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let file: CatalogFile = read_json(path.as_ref())?;
        Catalog::new(file.instruments)
    }

    pub fn from_json_str(s: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile = parse_json(s, "catalog")?;
        Catalog::new(file.instruments)
    }

    pub fn to_json_string(&self) -> String {
        let file = CatalogFile {
            instruments: self.instruments.clone(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }

    pub fn get(&self, id: &str) -> Option<&InstrumentSpec> {
        self.index.get(id).map(|&i| &self.instruments[i])
    }

    pub fn instruments(&self) -> &[InstrumentSpec] {
        &self.instruments
    }

    pub fn len(&self) -> usize {
        self.instruments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instruments.is_empty()
    }
}

/// Reads and validates a catalog file.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<InstrumentSpec>, CatalogError> {
    Catalog::load(path).map(|c| c.instruments)
}

/// Tray interior. `length_mm` is the axis along which columns accumulate,
/// `width_mm` the axis instruments lie along.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraySpec {
    #[serde(serialize_with = "crate::json::ser_f64")]
    pub length_mm: f64,
    #[serde(serialize_with = "crate::json::ser_f64")]
    pub width_mm: f64,
    #[serde(serialize_with = "crate::json::ser_f64")]
    pub depth_mm: f64,
    #[serde(
        default = "default_divider_thickness",
        serialize_with = "crate::json::ser_f64"
    )]
    pub divider_thickness_mm: f64,
}

pub const DEFAULT_DIVIDER_THICKNESS_MM: f64 = 20.0;

fn default_divider_thickness() -> f64 {
    DEFAULT_DIVIDER_THICKNESS_MM
}

impl TraySpec {
    pub fn new(length_mm: f64, width_mm: f64, depth_mm: f64) -> Self {
        TraySpec {
            length_mm,
            width_mm,
            depth_mm,
            divider_thickness_mm: DEFAULT_DIVIDER_THICKNESS_MM,
        }
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        for (name, v) in [
            ("length_mm", self.length_mm),
            ("width_mm", self.width_mm),
            ("depth_mm", self.depth_mm),
            ("divider_thickness_mm", self.divider_thickness_mm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CatalogError::invalid(
                    "tray",
                    format!("{name} must be positive, got {v}"),
                ));
            }
        }
        if self.divider_thickness_mm >= self.length_mm {
            return Err(CatalogError::invalid(
                "tray",
                "divider thickness must be smaller than tray length",
            ));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let tray: TraySpec = read_json(path.as_ref())?;
        tray.validate()?;
        Ok(tray)
    }
}

/// Placement margins per axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Padding {
    #[serde(serialize_with = "crate::json::ser_f64")]
    pub px_mm: f64,
    #[serde(serialize_with = "crate::json::ser_f64")]
    pub py_mm: f64,
    #[serde(serialize_with = "crate::json::ser_f64")]
    pub pz_mm: f64,
}

impl Padding {
    pub fn uniform(p: f64) -> Self {
        Padding {
            px_mm: p,
            py_mm: p,
            pz_mm: p,
        }
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        for (name, v) in [
            ("px_mm", self.px_mm),
            ("py_mm", self.py_mm),
            ("pz_mm", self.pz_mm),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CatalogError::invalid(
                    "padding",
                    format!("{name} must be nonnegative, got {v}"),
                ));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let p: Padding = read_json(path.as_ref())?;
        p.validate()?;
        Ok(p)
    }
}

/// A set of groups packed together as one column group.
pub type GroupSet = BTreeSet<InstrumentGroup>;

/// Escalating merge levels. Level 0 never merges anything.
#[derive(Debug, Clone, PartialEq)]
pub struct MergePolicy {
    pub levels: Vec<Vec<GroupSet>>,
}

impl Default for MergePolicy {
    /// `{Ring, RingThick}`, then `+ {Needle, Thumb}`, then `+ {Needle, Thumb, Gun}`.
    fn default() -> Self {
        use InstrumentGroup::*;
        let rings: GroupSet = [Ring, RingThick].into_iter().collect();
        let bags: GroupSet = [Needle, Thumb].into_iter().collect();
        let bags_gun: GroupSet = [Needle, Thumb, Gun].into_iter().collect();
        MergePolicy {
            levels: vec![
                vec![],
                vec![rings.clone()],
                vec![rings.clone(), bags],
                vec![rings, bags_gun],
            ],
        }
    }
}

impl MergePolicy {
    /// Only level 0.
    pub fn no_merging() -> Self {
        MergePolicy {
            levels: vec![vec![]],
        }
    }

    /// Checks that level 0 is empty, group-sets within a level are disjoint,
    /// and every group-set of level k sits inside some group-set of level k+1.
    pub fn validate(&self) -> Result<(), CatalogError> {
        match self.levels.first() {
            None => return Err(CatalogError::invalid("merge_policy", "no levels")),
            Some(l0) if !l0.is_empty() => {
                return Err(CatalogError::invalid(
                    "merge_policy",
                    "level 0 must not merge groups",
                ))
            }
            _ => {}
        }
        for (k, level) in self.levels.iter().enumerate() {
            let mut seen = GroupSet::new();
            for set in level {
                if set.len() < 2 {
                    return Err(CatalogError::invalid(
                        "merge_policy",
                        format!("level {k} has a merge set with fewer than two groups"),
                    ));
                }
                for g in set {
                    if !seen.insert(g.clone()) {
                        return Err(CatalogError::invalid(
                            "merge_policy",
                            format!("level {k} lists group {g} twice"),
                        ));
                    }
                }
            }
        }
        for (k, pair) in self.levels.windows(2).enumerate() {
            if !level_contained(&pair[0], &pair[1]) {
                return Err(CatalogError::invalid(
                    "merge_policy",
                    format!("level {k} is not contained in level {}", k + 1),
                ));
            }
        }
        Ok(())
    }

    /// Index of the merged group `g` belongs to at `level`, if any.
    pub fn merge_set_of(&self, level: usize, g: &InstrumentGroup) -> Option<usize> {
        self.levels
            .get(level)?
            .iter()
            .position(|set| set.contains(g))
    }
}

/// True when every set of `lower` is a subset of some set of `upper`.
pub fn level_contained(lower: &[GroupSet], upper: &[GroupSet]) -> bool {
    lower
        .iter()
        .all(|set| upper.iter().any(|u| set.is_subset(u)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistItem {
    pub id: String,
    pub qty: u32,
}

/// Instruments required for one procedure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checklist {
    #[serde(rename = "procedure")]
    pub procedure_name: String,
    pub items: Vec<ChecklistItem>,
}

impl Checklist {
    pub fn new(procedure_name: impl Into<String>, items: Vec<(&str, u32)>) -> Self {
        Checklist {
            procedure_name: procedure_name.into(),
            items: items
                .into_iter()
                .map(|(id, qty)| ChecklistItem {
                    id: id.to_string(),
                    qty,
                })
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let c: Checklist = read_json(path.as_ref())?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        for item in &self.items {
            if item.qty == 0 {
                return Err(CatalogError::invalid(&item.id, "quantity must be at least 1"));
            }
        }
        Ok(())
    }

    /// Quantity check plus id resolution.
    pub fn validate_against(&self, catalog: &Catalog) -> Result<(), CatalogError> {
        self.validate()?;
        for item in &self.items {
            if catalog.get(&item.id).is_none() {
                return Err(CatalogError::invalid(&item.id, "not in catalog"));
            }
        }
        Ok(())
    }

    /// One `(id, k)` per physical instrument, `k` counting from 0 per id.
    /// Repeated checklist lines for the same id continue the count.
    pub fn expand(&self) -> Vec<(String, u32)> {
        let mut next: HashMap<&str, u32> = HashMap::new();
        let mut out = Vec::new();
        for item in &self.items {
            let k = next.entry(item.id.as_str()).or_insert(0);
            for _ in 0..item.qty {
                out.push((item.id.clone(), *k));
                *k += 1;
            }
        }
        out
    }

    pub fn total_instances(&self) -> usize {
        self.items.iter().map(|i| i.qty as usize).sum()
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CatalogError> {
    let text = fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

fn parse_json<T: DeserializeOwned>(text: &str, context: &str) -> Result<T, CatalogError> {
    serde_json::from_str(text).map_err(|e| CatalogError::Parse {
        context: context.to_string(),
        message: e.to_string(),
    })
}
