//! Top view of a layout at 1 px per millimetre.

use std::fmt::Write;

use trayforge::json::round6;
use trayforge::{InstrumentGroup, TrayLayout};

const DIVIDER_FILL: &str = "#444444";
const HOLDER_STROKE: &str = "#222222";

fn fill(group: &InstrumentGroup) -> &'static str {
    match group {
        InstrumentGroup::Ring => "#1f77b4",
        InstrumentGroup::RingThick => "#9467bd",
        InstrumentGroup::Needle => "#ff7f0e",
        InstrumentGroup::Thumb => "#2ca02c",
        InstrumentGroup::Gun => "#d62728",
        InstrumentGroup::Other(_) => "#7f7f7f",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn n(v: f64) -> f64 {
    round6(v)
}

pub fn render(layout: &TrayLayout) -> String {
    let tray = &layout.tray;
    let (w, h) = (n(tray.width_mm), n(tray.length_mm));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r##"  <rect class="tray" x="0" y="0" width="{w}" height="{h}" fill="#ffffff" stroke="#000000" stroke-width="1"/>"##);

    let mut order: Vec<usize> = (0..layout.placements.len()).collect();
    order.sort_by_key(|&i| (layout.placements[i].layer, i));
    for i in order {
        let p = &layout.placements[i];
        let cy = layout.footprint_y(p);
        let _ = writeln!(
            s,
            r##"  <rect class="instrument" data-id="{}" data-instance="{}" data-layer="{}" x="{}" y="{}" width="{}" height="{}" fill="{}" fill-opacity="0.7" stroke="#000000" stroke-width="0.5"/>"##,
            escape(&p.instrument_id),
            p.instance,
            p.layer,
            n(p.x_min()),
            n(cy - 0.5 * p.width_mm),
            n(p.length_mm),
            n(p.width_mm),
            fill(&p.group),
        );
    }
    for d in &layout.dividers {
        let _ = writeln!(
            s,
            r#"  <rect class="divider" x="{}" y="{}" width="{}" height="{}" fill="{DIVIDER_FILL}"/>"#,
            n(d.x_mm - 0.5 * d.width_mm),
            n(d.y_mm - 0.5 * d.thickness_mm),
            n(d.width_mm),
            n(d.thickness_mm),
        );
    }
    for holder in &layout.holders {
        let (y0, height) = layout
            .columns
            .get(holder.column)
            .map_or((holder.y_mm, 0.0), |c| (c.y_start_mm, c.width_mm));
        let _ = writeln!(
            s,
            r#"  <rect class="holder" data-capacity="{}" x="0" y="{}" width="6" height="{}" fill="none" stroke="{HOLDER_STROKE}" stroke-width="1"/>"#,
            holder.capacity,
            n(y0),
            n(height),
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use trayforge::{pack, Catalog, Checklist, InstrumentSpec, MergePolicy, Padding, TraySpec};

    #[test]
    fn empty_layout_is_just_the_tray() {
        let layout = TrayLayout::empty(TraySpec::new(400.0, 300.0, 80.0), Padding::uniform(5.0));
        let svg = render(&layout);
        assert!(svg.contains(r#"width="300" height="400""#));
        assert_eq!(svg.matches("<rect").count(), 1);
    }

    #[test]
    fn footprint_geometry() {
        let cat = Catalog::new(vec![InstrumentSpec {
            id: "a<b".into(),
            group: InstrumentGroup::Thumb,
            length_mm: 100.0,
            width_mm: 10.0,
            height_mm: 5.0,
            magnetic: true,
        }])
        .unwrap();
        let layout = pack(&Checklist::new("x", vec![("a<b", 1)]), &cat, &TraySpec::new(400.0, 300.0, 80.0), &Padding::uniform(5.0), &MergePolicy::default()).unwrap();
        let svg = render(&layout);
        assert!(svg.contains(r#"data-id="a&lt;b""#));
        assert!(svg.contains(r##"x="5" y="5" width="100" height="10" fill="#2ca02c""##), "{svg}");
    }
}
