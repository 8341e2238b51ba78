//! Column/layer tray packing.
//!
//! Instruments are grouped (optionally merging compatible groups), each group is
//! sorted longest-first and stacked into layers of at most
//! `floor(C_w / (L_max + 2 px))` instruments lying along the tray width. Ring
//! groups stack one instrument per layer and get a holder. When the next layer
//! would exceed the tray depth the column is committed, a divider is added and
//! stacking restarts at the floor of a fresh column further along the tray
//! length. If the columns do not fit the tray length, packing restarts at the
//! next merge level.
//!
//! Coordinates are in the tray frame: `x` across the width, `y` along the
//! length, `z` up from the floor. Placement `x` is the footprint centre, `y` the
//! start of the column, `z` the top of the instrument.

mod order;
mod validate;

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, Checklist, InstrumentGroup, InstrumentSpec, MergePolicy, Padding, TraySpec};
use crate::json::ser_f64;

pub use order::{placement_order, OrderEntry};
pub use validate::{check_conservation, check_group_integrity, validate_layout, Violation};

/// Base depth along `y` reserved for a ring holder.
pub const DEFAULT_HOLDER_BASE_MM: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PackError {
    #[error("tray width overflow: `{id}` ({length_mm} mm + padding) does not fit a {tray_width_mm} mm tray width")]
    WidthOverflow {
        id: String,
        length_mm: f64,
        tray_width_mm: f64,
    },
    #[error("tray length overflow: columns need {required_mm} mm of {available_mm} mm after trying {levels_tried} merge level(s)")]
    LengthOverflow {
        required_mm: f64,
        available_mm: f64,
        levels_tried: usize,
    },
    #[error("tray depth overflow: a layer holding `{id}` is {layer_mm} mm, tray depth is {tray_depth_mm} mm")]
    DepthOverflow {
        id: String,
        layer_mm: f64,
        tray_depth_mm: f64,
    },
    #[error("unknown instrument `{0}`")]
    UnknownInstrument(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl PackError {
    pub fn name(&self) -> &'static str {
        match self {
            PackError::WidthOverflow { .. } => "WidthOverflow",
            PackError::LengthOverflow { .. } => "LengthOverflow",
            PackError::DepthOverflow { .. } => "DepthOverflow",
            PackError::UnknownInstrument(_) => "UnknownInstrument",
            PackError::InvalidInput(_) => "InvalidInput",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    #[serde(rename = "id")]
    pub instrument_id: String,
    pub instance: u32,
    #[serde(serialize_with = "ser_f64")]
    pub x_mm: f64,
    #[serde(serialize_with = "ser_f64")]
    pub y_mm: f64,
    #[serde(serialize_with = "ser_f64")]
    pub z_mm: f64,
    pub column: usize,
    pub layer: usize,
    #[serde(serialize_with = "ser_f64")]
    pub length_mm: f64,
    #[serde(serialize_with = "ser_f64")]
    pub width_mm: f64,
    #[serde(serialize_with = "ser_f64")]
    pub height_mm: f64,
    pub group: InstrumentGroup,
}

impl Placement {
    pub fn x_min(&self) -> f64 {
        self.x_mm - 0.5 * self.length_mm
    }

    pub fn x_max(&self) -> f64 {
        self.x_mm + 0.5 * self.length_mm
    }

    pub fn z_bottom(&self) -> f64 {
        self.z_mm - self.height_mm
    }
}

/// Divider centre; it spans the full tray width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DividerPlacement {
    #[serde(serialize_with = "ser_f64")]
    pub x_mm: f64,
    #[serde(serialize_with = "ser_f64")]
    pub y_mm: f64,
    #[serde(serialize_with = "ser_f64")]
    pub width_mm: f64,
    #[serde(serialize_with = "ser_f64")]
    pub thickness_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderPlacement {
    pub column: usize,
    /// Centre of the column the holder serves.
    #[serde(serialize_with = "ser_f64")]
    pub y_mm: f64,
    pub capacity: u32,
    pub group: InstrumentGroup,
}

/// The strip of tray length a column occupies, excluding its divider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpan {
    pub index: usize,
    #[serde(serialize_with = "ser_f64")]
    pub y_start_mm: f64,
    #[serde(serialize_with = "ser_f64")]
    pub width_mm: f64,
    pub ring: bool,
    pub groups: Vec<InstrumentGroup>,
}

impl ColumnSpan {
    pub fn y_end_mm(&self) -> f64 {
        self.y_start_mm + self.width_mm
    }

    pub fn y_center_mm(&self) -> f64 {
        self.y_start_mm + 0.5 * self.width_mm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrayLayout {
    #[serde(rename = "merge_level")]
    pub merge_level_used: usize,
    pub placements: Vec<Placement>,
    pub dividers: Vec<DividerPlacement>,
    pub holders: Vec<HolderPlacement>,
    pub columns: Vec<ColumnSpan>,
    pub tray: TraySpec,
    pub padding: Padding,
}

impl TrayLayout {
    pub fn empty(tray: TraySpec, padding: Padding) -> Self {
        TrayLayout {
            merge_level_used: 0,
            placements: Vec::new(),
            dividers: Vec::new(),
            holders: Vec::new(),
            columns: Vec::new(),
            tray,
            padding,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Placement footprint centre along `y` (the column centre).
    pub fn footprint_y(&self, p: &Placement) -> f64 {
        self.columns
            .get(p.column)
            .map_or(p.y_mm, ColumnSpan::y_center_mm)
    }

    /// Rebuilds the checklist the layout was packed from.
    pub fn checklist(&self, procedure_name: &str) -> Checklist {
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for p in &self.placements {
            *counts.entry(p.instrument_id.as_str()).or_default() += 1;
        }
        Checklist::new(procedure_name, counts.into_iter().collect())
    }

    /// Rebuilds the catalog entries for the instruments present in the layout.
    pub fn catalog(&self) -> Catalog {
        let mut seen: BTreeMap<&str, InstrumentSpec> = BTreeMap::new();
        for p in &self.placements {
            seen.entry(p.instrument_id.as_str())
                .or_insert_with(|| InstrumentSpec {
                    id: p.instrument_id.clone(),
                    group: p.group.clone(),
                    length_mm: p.length_mm,
                    width_mm: p.width_mm,
                    height_mm: p.height_mm,
                    magnetic: false,
                });
        }
        Catalog::new(seen.into_values().collect()).expect("layout instruments are valid specs")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PackOptions {
    pub holder_base_mm: f64,
}

impl Default for PackOptions {
    fn default() -> Self {
        PackOptions {
            holder_base_mm: DEFAULT_HOLDER_BASE_MM,
        }
    }
}

/// Counts elementary packing steps: comparisons, instance pops, layer and
/// column operations. Used to check that packing cost grows linearly.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpMeter {
    pub ops: u64,
}

impl OpMeter {
    fn tick(&mut self) {
        self.ops += 1;
    }
}

/// How instances are arranged inside each (merged) group before stacking.
pub enum InstanceOrder<'a> {
    /// Longest first, ties by width desc, id asc, instance asc.
    DescendingLength,
    /// Random permutation within each group; used to build unsorted baselines.
    Shuffled(&'a mut dyn RngCore),
}

/// Packs `checklist` into `tray` with default options.
pub fn pack(
    checklist: &Checklist,
    catalog: &Catalog,
    tray: &TraySpec,
    padding: &Padding,
    policy: &MergePolicy,
) -> Result<TrayLayout, PackError> {
    Packer::new(catalog, *tray, *padding, policy).pack(checklist)
}

pub struct Packer<'a> {
    catalog: &'a Catalog,
    tray: TraySpec,
    padding: Padding,
    policy: &'a MergePolicy,
    options: PackOptions,
}

#[derive(Clone, Copy)]
struct Instance<'a> {
    spec: &'a InstrumentSpec,
    instance: u32,
}

struct Item<'a> {
    spec: &'a InstrumentSpec,
    qty: u32,
}

impl<'a> Packer<'a> {
    pub fn new(catalog: &'a Catalog, tray: TraySpec, padding: Padding, policy: &'a MergePolicy) -> Self {
        Packer {
            catalog,
            tray,
            padding,
            policy,
            options: PackOptions::default(),
        }
    }

    pub fn with_options(mut self, options: PackOptions) -> Self {
        self.options = options;
        self
    }

    pub fn pack(&self, checklist: &Checklist) -> Result<TrayLayout, PackError> {
        self.pack_metered(checklist, &mut OpMeter::default())
    }

    pub fn pack_metered(&self, checklist: &Checklist, meter: &mut OpMeter) -> Result<TrayLayout, PackError> {
        self.pack_ordered(checklist, InstanceOrder::DescendingLength, 0, meter)
    }

    /// Packs with an explicit instance order, starting escalation at `first_level`.
    pub fn pack_ordered(
        &self,
        checklist: &Checklist,
        mut order: InstanceOrder<'_>,
        first_level: usize,
        meter: &mut OpMeter,
    ) -> Result<TrayLayout, PackError> {
        self.tray
            .validate()
            .map_err(|e| PackError::InvalidInput(e.to_string()))?;
        self.padding
            .validate()
            .map_err(|e| PackError::InvalidInput(e.to_string()))?;
        self.policy
            .validate()
            .map_err(|e| PackError::InvalidInput(e.to_string()))?;
        if self.options.holder_base_mm.is_nan() || self.options.holder_base_mm < 0.0 {
            return Err(PackError::InvalidInput("holder base must be nonnegative".into()));
        }
        let items = self.resolve(checklist, meter)?;
        if items.is_empty() {
            return Ok(TrayLayout::empty(self.tray, self.padding));
        }

        let mut last_overflow = None;
        for level in first_level..self.policy.levels.len() {
            let groups = self.group_items(&items, level, &mut order, meter);
            match self.pack_level(&groups, level, meter) {
                Ok(layout) => return Ok(layout),
                Err(PackError::LengthOverflow { required_mm, .. }) => {
                    last_overflow = Some(required_mm);
                }
                Err(e) => return Err(e),
            }
        }
        Err(PackError::LengthOverflow {
            required_mm: last_overflow.unwrap_or(f64::INFINITY),
            available_mm: self.tray.length_mm,
            levels_tried: self.policy.levels.len().saturating_sub(first_level),
        })
    }

    /// Aggregates checklist lines per id, in order of first appearance.
    fn resolve(&self, checklist: &Checklist, meter: &mut OpMeter) -> Result<Vec<Item<'a>>, PackError> {
        let mut items: Vec<Item<'a>> = Vec::new();
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for line in &checklist.items {
            meter.tick();
            if line.qty == 0 {
                return Err(PackError::InvalidInput(format!("quantity of `{}` is zero", line.id)));
            }
            let spec = self
                .catalog
                .get(&line.id)
                .ok_or_else(|| PackError::UnknownInstrument(line.id.clone()))?;
            match pos.get(line.id.as_str()) {
                Some(&i) => items[i].qty += line.qty,
                None => {
                    pos.insert(spec.id.as_str(), items.len());
                    items.push(Item { spec, qty: line.qty });
                }
            }
        }
        Ok(items)
    }

    /// Splits items into merged groups for `level`, ordered by their smallest
    /// member group, and arranges the instances of each group.
    fn group_items(
        &self,
        items: &[Item<'a>],
        level: usize,
        order: &mut InstanceOrder<'_>,
        meter: &mut OpMeter,
    ) -> Vec<Vec<Instance<'a>>> {
        let mut by_key: BTreeMap<InstrumentGroup, Vec<&Item<'a>>> = BTreeMap::new();
        for item in items {
            meter.tick();
            let key = match self.policy.merge_set_of(level, &item.spec.group) {
                Some(set) => self.policy.levels[level][set]
                    .iter()
                    .next()
                    .cloned()
                    .expect("merge sets are nonempty"),
                None => item.spec.group.clone(),
            };
            by_key.entry(key).or_default().push(item);
        }

        by_key
            .into_values()
            .map(|mut group_items| match order {
                InstanceOrder::DescendingLength => {
                    // Sorting distinct classes, then expanding, keeps the cost
                    // linear in the instance count.
                    group_items.sort_by(|a, b| {
                        meter.tick();
                        b.spec
                            .length_mm
                            .total_cmp(&a.spec.length_mm)
                            .then(b.spec.width_mm.total_cmp(&a.spec.width_mm))
                            .then(a.spec.id.cmp(&b.spec.id))
                    });
                    expand(&group_items, meter)
                }
                InstanceOrder::Shuffled(ref mut rng) => {
                    let mut inst = expand(&group_items, meter);
                    inst.shuffle(rng);
                    inst
                }
            })
            .collect()
    }

    fn pack_level(&self, groups: &[Vec<Instance<'a>>], level: usize, meter: &mut OpMeter) -> Result<TrayLayout, PackError> {
        let mut state = LevelState {
            tray: self.tray,
            padding: self.padding,
            holder_base_mm: self.options.holder_base_mm,
            y_off: 0.0,
            layout: TrayLayout::empty(self.tray, self.padding),
        };
        state.layout.merge_level_used = level;
        for group in groups {
            state.pack_group(group, meter)?;
        }
        // The divider after the final column separates nothing.
        state.layout.dividers.pop();
        Ok(state.layout)
    }
}

fn expand<'a>(items: &[&Item<'a>], meter: &mut OpMeter) -> Vec<Instance<'a>> {
    let mut out = Vec::with_capacity(items.iter().map(|i| i.qty as usize).sum());
    for item in items {
        for k in 0..item.qty {
            meter.tick();
            out.push(Instance {
                spec: item.spec,
                instance: k,
            });
        }
    }
    out
}

struct LevelState {
    tray: TraySpec,
    padding: Padding,
    holder_base_mm: f64,
    y_off: f64,
    layout: TrayLayout,
}

/// Placement not yet tied to a `y` position.
struct Draft<'a> {
    inst: Instance<'a>,
    x: f64,
    z_top: f64,
    layer: usize,
}

impl LevelState {
    fn pack_group<'a>(&mut self, group: &[Instance<'a>], meter: &mut OpMeter) -> Result<(), PackError> {
        let Some(longest) = group
            .iter()
            .max_by(|a, b| a.spec.length_mm.total_cmp(&b.spec.length_mm))
        else {
            return Ok(());
        };
        let px = self.padding.px_mm;
        let n_max = (self.tray.width_mm / (longest.spec.length_mm + 2.0 * px)).floor() as usize;
        if n_max == 0 {
            return Err(PackError::WidthOverflow {
                id: longest.spec.id.clone(),
                length_mm: longest.spec.length_mm,
                tray_width_mm: self.tray.width_mm,
            });
        }
        let ring_group = group.iter().any(|i| i.spec.group.is_ring());

        let mut z = 0.0;
        let mut staged: Vec<Draft<'a>> = Vec::new();
        let mut layer = 0;
        let mut next = 0;
        while next < group.len() {
            meter.tick();
            let n = if ring_group { 1 } else { n_max.min(group.len() - next) };
            let members = &group[next..next + n];
            let tallest = members.iter().map(|i| i.spec.height_mm).fold(0.0, f64::max);
            let z_new = z + tallest + self.padding.pz_mm;
            if z_new > self.tray.depth_mm {
                if staged.is_empty() {
                    return Err(PackError::DepthOverflow {
                        id: members[0].spec.id.clone(),
                        layer_mm: tallest + self.padding.pz_mm,
                        tray_depth_mm: self.tray.depth_mm,
                    });
                }
                self.commit_column(&mut staged, ring_group, meter)?;
                z = 0.0;
                layer = 0;
                continue;
            }
            let layer_len = members.iter().map(|i| i.spec.length_mm).fold(0.0, f64::max);
            let slot = layer_len + 2.0 * px;
            for (i, inst) in members.iter().enumerate() {
                meter.tick();
                staged.push(Draft {
                    inst: *inst,
                    x: (i as f64 + 0.5) * slot,
                    z_top: z + inst.spec.height_mm,
                    layer,
                });
            }
            next += n;
            z = z_new;
            layer += 1;
        }
        self.commit_column(&mut staged, ring_group, meter)
    }

    fn commit_column(&mut self, staged: &mut Vec<Draft<'_>>, ring_group: bool, meter: &mut OpMeter) -> Result<(), PackError> {
        meter.tick();
        let widest = staged.iter().map(|d| d.inst.spec.width_mm).fold(0.0, f64::max);
        let mut w_c = widest + 2.0 * self.padding.py_mm;
        if ring_group {
            w_c = w_c.max(self.holder_base_mm);
        }
        if self.y_off + w_c > self.tray.length_mm {
            return Err(PackError::LengthOverflow {
                required_mm: self.y_off + w_c,
                available_mm: self.tray.length_mm,
                levels_tried: 0,
            });
        }

        let column = self.layout.columns.len();
        let mut groups: Vec<InstrumentGroup> = Vec::new();
        let mut ring_count = 0;
        let mut holder_group = None;
        for d in staged.drain(..) {
            meter.tick();
            let spec = d.inst.spec;
            if !groups.contains(&spec.group) {
                groups.push(spec.group.clone());
            }
            if spec.group.is_ring() {
                ring_count += 1;
                holder_group.get_or_insert_with(|| spec.group.clone());
            }
            self.layout.placements.push(Placement {
                instrument_id: spec.id.clone(),
                instance: d.inst.instance,
                x_mm: d.x,
                y_mm: self.y_off,
                z_mm: d.z_top,
                column,
                layer: d.layer,
                length_mm: spec.length_mm,
                width_mm: spec.width_mm,
                height_mm: spec.height_mm,
                group: spec.group.clone(),
            });
        }
        groups.sort();
        let span = ColumnSpan {
            index: column,
            y_start_mm: self.y_off,
            width_mm: w_c,
            ring: ring_group,
            groups,
        };
        if let Some(group) = holder_group {
            self.layout.holders.push(HolderPlacement {
                column,
                y_mm: span.y_center_mm(),
                capacity: ring_count,
                group,
            });
        }
        let t = self.tray.divider_thickness_mm;
        self.layout.dividers.push(DividerPlacement {
            x_mm: 0.5 * self.tray.width_mm,
            y_mm: self.y_off + w_c + 0.5 * t,
            width_mm: self.tray.width_mm,
            thickness_mm: t,
        });
        self.layout.columns.push(span);
        self.y_off += w_c + t;
        Ok(())
    }
}

/// Packs with instances shuffled inside each group, at the merge level the
/// sorted packing would use (escalating further if the shuffle needs more room).
pub fn pack_shuffled(
    packer: &Packer<'_>,
    checklist: &Checklist,
    first_level: usize,
    rng: &mut dyn RngCore,
) -> Result<TrayLayout, PackError> {
    packer.pack_ordered(checklist, InstanceOrder::Shuffled(rng), first_level, &mut OpMeter::default())
}
