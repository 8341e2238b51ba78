use serde::{Deserialize, Serialize};

use super::TrayLayout;

/// One robot step when assembling a packed tray.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrderEntry {
    Holder { column: usize },
    Instrument { id: String, instance: u32 },
    Divider { index: usize },
}

/// Column by column along `y`: the holder (if any), then instruments bottom
/// layer first and left to right, then the divider closing the column.
pub fn placement_order(layout: &TrayLayout) -> Vec<OrderEntry> {
    let mut idx: Vec<usize> = (0..layout.placements.len()).collect();
    idx.sort_by(|&a, &b| {
        let (pa, pb) = (&layout.placements[a], &layout.placements[b]);
        pa.column
            .cmp(&pb.column)
            .then(pa.layer.cmp(&pb.layer))
            .then(pa.x_mm.total_cmp(&pb.x_mm))
    });

    let columns = layout.columns.len().max(
        layout.placements.iter().map(|p| p.column + 1).max().unwrap_or(0),
    );
    let mut out = Vec::with_capacity(idx.len() + 2 * columns);
    let mut it = idx.into_iter().peekable();
    for column in 0..columns {
        if layout.holders.iter().any(|h| h.column == column) {
            out.push(OrderEntry::Holder { column });
        }
        while let Some(&k) = it.peek() {
            let p = &layout.placements[k];
            if p.column != column {
                break;
            }
            out.push(OrderEntry::Instrument { id: p.instrument_id.clone(), instance: p.instance });
            it.next();
        }
        if column < layout.dividers.len() {
            out.push(OrderEntry::Divider { index: column });
        }
    }
    out
}
