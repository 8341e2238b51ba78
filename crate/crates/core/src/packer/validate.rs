//! Independent layout checker.
//!
//! Works only from the emitted layout (plus the checklist or policy for the
//! checks that need them), never from packer internals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::catalog::{Checklist, InstrumentGroup, MergePolicy};

use super::TrayLayout;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    OutOfBounds { id: String, instance: u32, axis: char },
    Overlap { column: usize, layer: usize, a: (String, u32), b: (String, u32) },
    DepthViolation { id: String, instance: u32, z_mm: f64 },
    LengthOrder { column: usize, lower_layer: usize, upper_layer: usize },
    RingLayer { column: usize, layer: usize, count: usize },
    HolderMismatch { column: usize, detail: String },
    DividerSeparation { detail: String },
    DividerOutOfTray { index: usize, y_mm: f64 },
    UnknownColumn { id: String, instance: u32, column: usize },
    GroupMix { column: usize, groups: Vec<InstrumentGroup> },
    Conservation { id: String, expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Returns every intrinsic invariant the layout breaks; empty means valid.
pub fn validate_layout(layout: &TrayLayout) -> Vec<Violation> {
    let mut out = Vec::new();
    let tray = &layout.tray;
    let pad = &layout.padding;

    for (i, c) in layout.columns.iter().enumerate() {
        if c.index != i || c.y_start_mm < -TOL || c.y_end_mm() > tray.length_mm + TOL {
            out.push(Violation::DividerSeparation {
                detail: format!("column {i} span [{}, {}] misplaced", c.y_start_mm, c.y_end_mm()),
            });
        }
    }

    // In-bounds and depth.
    let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (k, p) in layout.placements.iter().enumerate() {
        let Some(col) = layout.columns.get(p.column) else {
            out.push(Violation::UnknownColumn {
                id: p.instrument_id.clone(),
                instance: p.instance,
                column: p.column,
            });
            continue;
        };
        if p.x_min() - pad.px_mm < -TOL || p.x_max() + pad.px_mm > tray.width_mm + TOL {
            out.push(Violation::OutOfBounds { id: p.instrument_id.clone(), instance: p.instance, axis: 'x' });
        }
        if (p.y_mm - col.y_start_mm).abs() > TOL || p.width_mm + 2.0 * pad.py_mm > col.width_mm + TOL {
            out.push(Violation::OutOfBounds { id: p.instrument_id.clone(), instance: p.instance, axis: 'y' });
        }
        if p.z_bottom() < -TOL {
            out.push(Violation::OutOfBounds { id: p.instrument_id.clone(), instance: p.instance, axis: 'z' });
        }
        if p.z_mm > tray.depth_mm + TOL {
            out.push(Violation::DepthViolation { id: p.instrument_id.clone(), instance: p.instance, z_mm: p.z_mm });
        }
        cells.entry((p.column, p.layer)).or_default().push(k);
    }

    // Same-layer footprints are disjoint along x (they share the column's y span).
    for (&(column, layer), members) in &cells {
        let mut sorted = members.clone();
        sorted.sort_by(|&a, &b| layout.placements[a].x_min().total_cmp(&layout.placements[b].x_min()));
        for pair in sorted.windows(2) {
            let (a, b) = (&layout.placements[pair[0]], &layout.placements[pair[1]]);
            if b.x_min() < a.x_max() - TOL {
                out.push(Violation::Overlap {
                    column,
                    layer,
                    a: (a.instrument_id.clone(), a.instance),
                    b: (b.instrument_id.clone(), b.instance),
                });
            }
        }
    }

    // Descending length between consecutive layers (transitive across all pairs).
    let mut by_col: BTreeMap<usize, BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
    for p in &layout.placements {
        let e = by_col
            .entry(p.column)
            .or_default()
            .entry(p.layer)
            .or_insert((f64::INFINITY, f64::NEG_INFINITY));
        e.0 = e.0.min(p.length_mm);
        e.1 = e.1.max(p.length_mm);
    }
    for (&column, layers) in &by_col {
        let v: Vec<_> = layers.iter().collect();
        for (i, (&la, &(min_a, _))) in v.iter().enumerate() {
            for (&lb, &(_, max_b)) in &v[i + 1..] {
                if min_a + TOL < max_b {
                    out.push(Violation::LengthOrder { column, lower_layer: la, upper_layer: lb });
                }
            }
        }
    }

    // Ring columns: singleton layers and exactly one matching holder.
    for col in &layout.columns {
        let members: Vec<_> = layout.placements.iter().filter(|p| p.column == col.index).collect();
        let has_ring = members.iter().any(|p| p.group.is_ring());
        let holders: Vec<_> = layout.holders.iter().filter(|h| h.column == col.index).collect();
        if has_ring || col.ring {
            for (&(c, layer), m) in &cells {
                if c == col.index && m.len() != 1 {
                    out.push(Violation::RingLayer { column: c, layer, count: m.len() });
                }
            }
            let rings = members.iter().filter(|p| p.group.is_ring()).count();
            match holders.as_slice() {
                [h] if h.capacity as usize == rings && rings == members.len() && h.group.is_ring() => {}
                _ => out.push(Violation::HolderMismatch {
                    column: col.index,
                    detail: format!("{} holder(s) for {} ring instrument(s) in {} placement(s)", holders.len(), rings, members.len()),
                }),
            }
        } else if !holders.is_empty() {
            out.push(Violation::HolderMismatch {
                column: col.index,
                detail: "holder in a column without ring instruments".into(),
            });
        }
    }
    for h in &layout.holders {
        if h.column >= layout.columns.len() {
            out.push(Violation::HolderMismatch { column: h.column, detail: "holder for missing column".into() });
        }
    }

    // Exactly one divider between consecutive columns, none trailing.
    let expected = layout.columns.len().saturating_sub(1);
    if layout.dividers.len() != expected {
        out.push(Violation::DividerSeparation {
            detail: format!("{} divider(s) for {} column(s)", layout.dividers.len(), layout.columns.len()),
        });
    }
    for (i, d) in layout.dividers.iter().enumerate() {
        if d.y_mm > tray.length_mm + TOL || d.y_mm < -TOL {
            out.push(Violation::DividerOutOfTray { index: i, y_mm: d.y_mm });
        }
        if (d.x_mm - 0.5 * tray.width_mm).abs() > TOL {
            out.push(Violation::DividerSeparation { detail: format!("divider {i} not centred across the width") });
        }
        if let (Some(a), Some(b)) = (layout.columns.get(i), layout.columns.get(i + 1)) {
            let lo = d.y_mm - 0.5 * d.thickness_mm;
            let hi = d.y_mm + 0.5 * d.thickness_mm;
            if (lo - a.y_end_mm()).abs() > TOL || (hi - b.y_start_mm).abs() > TOL {
                out.push(Violation::DividerSeparation {
                    detail: format!("divider {i} [{lo}, {hi}] does not sit between columns {i} and {}", i + 1),
                });
            }
        }
    }
    out
}

/// Placed instrument multiset equals the checklist expansion.
pub fn check_conservation(layout: &TrayLayout, checklist: &Checklist) -> Vec<Violation> {
    let mut expected: BTreeMap<&str, usize> = BTreeMap::new();
    for item in &checklist.items {
        *expected.entry(item.id.as_str()).or_default() += item.qty as usize;
    }
    let mut found: BTreeMap<&str, usize> = BTreeMap::new();
    let mut instances: BTreeSet<(&str, u32)> = BTreeSet::new();
    for p in &layout.placements {
        *found.entry(p.instrument_id.as_str()).or_default() += 1;
        instances.insert((p.instrument_id.as_str(), p.instance));
    }
    let ids: BTreeSet<&str> = expected.keys().chain(found.keys()).copied().collect();
    let mut out: Vec<Violation> = ids
        .into_iter()
        .filter_map(|id| {
            let e = expected.get(id).copied().unwrap_or(0);
            let f = found.get(id).copied().unwrap_or(0);
            (e != f).then(|| Violation::Conservation { id: id.to_string(), expected: e, found: f })
        })
        .collect();
    if instances.len() != layout.placements.len() {
        out.push(Violation::Conservation {
            id: "<duplicate instance>".into(),
            expected: layout.placements.len(),
            found: instances.len(),
        });
    }
    out
}

/// Columns mix only groups that share a merge set at the layout's merge level.
pub fn check_group_integrity(layout: &TrayLayout, policy: &MergePolicy) -> Vec<Violation> {
    let mut by_col: BTreeMap<usize, BTreeSet<&InstrumentGroup>> = BTreeMap::new();
    for p in &layout.placements {
        by_col.entry(p.column).or_default().insert(&p.group);
    }
    by_col
        .into_iter()
        .filter(|(_, groups)| {
            if groups.len() <= 1 {
                return false;
            }
            let sets: BTreeSet<_> = groups
                .iter()
                .map(|g| policy.merge_set_of(layout.merge_level_used, g))
                .collect();
            sets.len() != 1 || sets.contains(&None)
        })
        .map(|(column, groups)| Violation::GroupMix {
            column,
            groups: groups.into_iter().cloned().collect(),
        })
        .collect()
}
