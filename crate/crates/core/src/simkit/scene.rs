//! Simulation scenes built from packed layouts or generated baselines.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::{Catalog, Checklist, InstrumentGroup, InstrumentSpec, MergePolicy, Padding, TraySpec};
use crate::packer::{pack_shuffled, validate_layout, Packer, TrayLayout, Violation};

use super::geometry::{Aabb, Obb};
use super::{scene_rng, PhysicsParams, SimError};

const TOL: f64 = 1e-9;

/// How a tray was assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SceneKind {
    /// Robot layout: sorted columns, dividers, holders.
    Packed,
    /// Technician tray: loose instruments, rings on a stringer, bags.
    HumanLoose,
    /// Dividers and holders but instruments in random order within groups.
    NoAlgorithm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    HumanLoose,
    NoAlgorithm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallKind {
    TrayWall,
    Divider,
    HolderGate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub kind: WallKind,
    pub extent: Aabb,
    /// Body retained by a holder gate.
    pub body: Option<usize>,
}

/// Free travel from the rest pose before hitting an obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Slack {
    pub x_neg: f64,
    pub x_pos: f64,
    pub y_neg: f64,
    pub y_pos: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub id: String,
    pub instance: u32,
    pub group: InstrumentGroup,
    pub column: Option<usize>,
    pub layer: usize,
    pub rest: Obb,
    /// `[bottom, top]`.
    pub z_range: [f64; 2],
    pub slack: Slack,
    /// Hard walls the footprint never leaves.
    pub cell: Aabb,
    /// Fraction of its slack a body actually travels, in `(0, 1]`.
    pub mobility: f64,
    pub rot_slack_rad: f64,
    /// Bodies sharing a cluster (stringer, bag) move together.
    pub cluster: Option<usize>,
    /// Held by a holder gate.
    pub retained: bool,
    /// Fully supported from below; neighbours box it in.
    pub seated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScene {
    pub kind: SceneKind,
    pub tray: TraySpec,
    pub bodies: Vec<Body>,
    pub walls: Vec<Wall>,
    pub control_index: usize,
    /// Vertical clearance between a body and the one it rests on.
    pub stack_gap_mm: f64,
}

impl SimScene {
    /// Pairs of bodies whose footprints and height ranges overlap in the rest pose.
    pub fn rest_overlaps(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.bodies.len() {
            for j in i + 1..self.bodies.len() {
                let (a, b) = (&self.bodies[i], &self.bodies[j]);
                let z = a.z_range[0] < b.z_range[1] - TOL && b.z_range[0] < a.z_range[1] - TOL;
                if z && a.rest.inflated(-1e-6).intersects(&b.rest.inflated(-1e-6)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn with_control(mut self, control: usize) -> Result<Self, SimError> {
        if control >= self.bodies.len() {
            return Err(SimError::InvalidControl(control));
        }
        self.control_index = control;
        Ok(self)
    }
}

fn tray_walls(tray: &TraySpec) -> Vec<Wall> {
    let (w, l) = (tray.width_mm, tray.length_mm);
    [
        Aabb::new([0.0, 0.0], [w, 0.0]),
        Aabb::new([0.0, l], [w, l]),
        Aabb::new([0.0, 0.0], [0.0, l]),
        Aabb::new([w, 0.0], [w, l]),
    ]
    .into_iter()
    .map(|extent| Wall { kind: WallKind::TrayWall, extent, body: None })
    .collect()
}

/// Scene for a packed layout; the layout must pass [`validate_layout`].
pub fn scene_from_layout(layout: &TrayLayout, control: usize, params: &PhysicsParams) -> Result<SimScene, SimError> {
    let violations = validate_layout(layout);
    if !violations.is_empty() {
        return Err(SimError::InvalidLayout(violations));
    }
    build_layout_scene(layout, control, SceneKind::Packed, params)
}

/// Like [`scene_from_layout`] but tolerates unsorted layers.
fn scene_from_unsorted_layout(layout: &TrayLayout, control: usize, params: &PhysicsParams) -> Result<SimScene, SimError> {
    let violations: Vec<_> = validate_layout(layout)
        .into_iter()
        .filter(|v| !matches!(v, Violation::LengthOrder { .. }))
        .collect();
    if !violations.is_empty() {
        return Err(SimError::InvalidLayout(violations));
    }
    build_layout_scene(layout, control, SceneKind::NoAlgorithm, params)
}

fn build_layout_scene(layout: &TrayLayout, control: usize, kind: SceneKind, params: &PhysicsParams) -> Result<SimScene, SimError> {
    let tray = layout.tray;
    if control >= layout.placements.len().max(1) {
        return Err(SimError::InvalidControl(control));
    }
    let mut walls = tray_walls(&tray);
    for d in &layout.dividers {
        walls.push(Wall {
            kind: WallKind::Divider,
            extent: Aabb::new(
                [d.x_mm - 0.5 * d.width_mm, d.y_mm - 0.5 * d.thickness_mm],
                [d.x_mm + 0.5 * d.width_mm, d.y_mm + 0.5 * d.thickness_mm],
            ),
            body: None,
        });
    }

    let last_column = layout.columns.len().saturating_sub(1);
    let mut bodies: Vec<Body> = layout
        .placements
        .iter()
        .map(|p| {
            let col = &layout.columns[p.column];
            // the trailing divider is removed, so the last column runs to the tray wall
            let y_hi = if p.column == last_column { tray.length_mm } else { col.y_end_mm() };
            Body {
                id: p.instrument_id.clone(),
                instance: p.instance,
                group: p.group.clone(),
                column: Some(p.column),
                layer: p.layer,
                rest: Obb::axis_aligned([p.x_mm, col.y_center_mm()], [0.5 * p.length_mm, 0.5 * p.width_mm]),
                z_range: [p.z_bottom(), p.z_mm],
                slack: Slack::default(),
                cell: Aabb::new([0.0, col.y_start_mm], [tray.width_mm, y_hi]),
                mobility: params.seated_mobility,
                rot_slack_rad: 0.0,
                cluster: None,
                retained: col.ring && p.group.is_ring(),
                seated: true,
            }
        })
        .collect();

    settle(&mut bodies, params);
    compute_slack(&mut bodies, params);

    for (i, b) in bodies.iter_mut().enumerate() {
        if b.retained {
            let g = params.gate_slack_mm;
            b.slack = Slack {
                x_neg: b.slack.x_neg.min(g),
                x_pos: b.slack.x_pos.min(g),
                y_neg: b.slack.y_neg.min(g),
                y_pos: b.slack.y_pos.min(g),
            };
            b.rot_slack_rad = 0.0;
            let bb = b.rest.aabb();
            walls.push(Wall {
                kind: WallKind::HolderGate,
                extent: Aabb::new([bb.min[0] - g, bb.min[1] - g], [bb.max[0] + g, bb.max[1] + g]),
                body: Some(i),
            });
        }
    }

    Ok(SimScene {
        kind,
        tray,
        bodies,
        walls,
        control_index: control,
        stack_gap_mm: layout.padding.pz_mm,
    })
}

fn x_overlap(a: &Obb, b: &Obb) -> bool {
    let (ha, hb) = (a.aabb_half()[0], b.aabb_half()[0]);
    (a.center[0] - b.center[0]).abs() < ha + hb - TOL
}

/// Finds what each body rests on in its column and derives how far it
/// overhangs its longest support.
fn settle(bodies: &mut [Body], params: &PhysicsParams) {
    for i in 0..bodies.len() {
        if bodies[i].layer == 0 {
            continue;
        }
        let mut top = f64::NEG_INFINITY;
        let mut support = 0.0_f64;
        for (j, b) in bodies.iter().enumerate() {
            let a = &bodies[i];
            if i == j || a.column != b.column || b.layer >= a.layer || !x_overlap(&a.rest, &b.rest) {
                continue;
            }
            let len = 2.0 * b.rest.half[0];
            if b.z_range[1] > top + TOL {
                top = b.z_range[1];
                support = len;
            } else if (b.z_range[1] - top).abs() <= TOL {
                support = support.max(len);
            }
        }
        let length = 2.0 * bodies[i].rest.half[0];
        let overhang = ((length - support) / length).clamp(0.0, 1.0);
        if overhang > TOL {
            let b = &mut bodies[i];
            b.seated = false;
            b.mobility = (params.seated_mobility + params.instability_gain * overhang).min(1.0);
            b.rot_slack_rad = overhang * params.max_rock_deg.to_radians();
        }
    }
}

fn z_overlap(a: &Body, b: &Body) -> bool {
    a.z_range[0] < b.z_range[1] - TOL && b.z_range[0] < a.z_range[1] - TOL
}

/// Travel to the nearest obstacle. Seated bodies are boxed in by their
/// neighbours at the same height; unseated and loose bodies ride over
/// neighbours and only walls stop them.
fn compute_slack(bodies: &mut [Body], _params: &PhysicsParams) {
    let n = bodies.len();
    for i in 0..n {
        let a = &bodies[i];
        let ab = a.rest.aabb();
        let mut s = Slack {
            x_neg: ab.min[0] - a.cell.min[0],
            x_pos: a.cell.max[0] - ab.max[0],
            y_neg: ab.min[1] - a.cell.min[1],
            y_pos: a.cell.max[1] - ab.max[1],
        };
        if a.seated {
            for (j, b) in bodies.iter().enumerate() {
                if i == j || a.column != b.column || a.cluster.is_some() && a.cluster == b.cluster || !z_overlap(a, b) {
                    continue;
                }
                let bb = b.rest.aabb();
                let y_shared = ab.min[1] < bb.max[1] - TOL && bb.min[1] < ab.max[1] - TOL;
                let x_shared = ab.min[0] < bb.max[0] - TOL && bb.min[0] < ab.max[0] - TOL;
                if y_shared {
                    if bb.max[0] <= ab.min[0] + TOL {
                        s.x_neg = s.x_neg.min(ab.min[0] - bb.max[0]);
                    } else if bb.min[0] >= ab.max[0] - TOL {
                        s.x_pos = s.x_pos.min(bb.min[0] - ab.max[0]);
                    }
                }
                if x_shared {
                    if bb.max[1] <= ab.min[1] + TOL {
                        s.y_neg = s.y_neg.min(ab.min[1] - bb.max[1]);
                    } else if bb.min[1] >= ab.max[1] - TOL {
                        s.y_pos = s.y_pos.min(bb.min[1] - ab.max[1]);
                    }
                }
            }
        }
        bodies[i].slack = Slack {
            x_neg: s.x_neg.max(0.0),
            x_pos: s.x_pos.max(0.0),
            y_neg: s.y_neg.max(0.0),
            y_pos: s.y_pos.max(0.0),
        };
    }
}

/// Everything a baseline needs besides the kind and seed.
#[derive(Debug, Clone)]
pub struct BaselineInputs<'a> {
    pub checklist: &'a Checklist,
    pub catalog: &'a Catalog,
    pub tray: TraySpec,
    pub padding: Padding,
    pub policy: &'a MergePolicy,
}

/// Generates a baseline tray and picks a random control instrument.
pub fn baseline_scene(inputs: &BaselineInputs<'_>, kind: BaselineKind, seed: u64, params: &PhysicsParams) -> Result<SimScene, SimError> {
    let mut rng = scene_rng(seed);
    let mut scene = match kind {
        BaselineKind::NoAlgorithm => no_algorithm_scene(inputs, &mut rng, params)?,
        BaselineKind::HumanLoose => human_loose_scene(inputs, &mut rng, params)?,
    };
    if !scene.bodies.is_empty() {
        scene.control_index = rng.gen_range(0..scene.bodies.len());
    }
    Ok(scene)
}

fn no_algorithm_scene(inputs: &BaselineInputs<'_>, rng: &mut ChaCha8Rng, params: &PhysicsParams) -> Result<SimScene, SimError> {
    let packer = Packer::new(inputs.catalog, inputs.tray, inputs.padding, inputs.policy);
    let sorted = packer.pack(inputs.checklist)?;
    let layout = pack_shuffled(&packer, inputs.checklist, sorted.merge_level_used, rng)?;
    if layout.placements.is_empty() {
        return Ok(empty_scene(SceneKind::NoAlgorithm, inputs.tray, &layout));
    }
    scene_from_unsorted_layout(&layout, 0, params)
}

fn empty_scene(kind: SceneKind, tray: TraySpec, _layout: &TrayLayout) -> SimScene {
    SimScene {
        kind,
        tray,
        bodies: Vec::new(),
        walls: tray_walls(&tray),
        control_index: 0,
        stack_gap_mm: 0.0,
    }
}

/// A rigid unit placed by the technician: a loose instrument, a stringer of
/// ring instruments, or a bag.
struct Unit<'a> {
    members: Vec<(&'a InstrumentSpec, u32)>,
    style: UnitStyle,
}

#[derive(Clone, Copy, PartialEq)]
enum UnitStyle {
    Loose,
    /// Threaded through the rings; fanned along y and piled up.
    Stringer,
    /// Side by side inside a sterilizer bag.
    Bag,
}

impl Unit<'_> {
    /// Member offsets from the unit centre (unrotated) and the unit half extents.
    fn local_layout(&self, params: &PhysicsParams) -> (Vec<([f64; 2], f64)>, [f64; 2]) {
        let len = self.members.iter().map(|(s, _)| s.length_mm).fold(0.0, f64::max);
        match self.style {
            UnitStyle::Loose => {
                let s = self.members[0].0;
                (vec![([0.0, 0.0], 0.0)], [0.5 * s.length_mm, 0.5 * s.width_mm])
            }
            UnitStyle::Bag => {
                let total: f64 = self.members.iter().map(|(s, _)| s.width_mm).sum();
                let mut y = -0.5 * total;
                let offs = self
                    .members
                    .iter()
                    .map(|(s, _)| {
                        let c = y + 0.5 * s.width_mm;
                        y += s.width_mm;
                        ([0.0, c], 0.0)
                    })
                    .collect();
                (offs, [0.5 * len, 0.5 * total])
            }
            UnitStyle::Stringer => {
                let pitch = params.stringer_pitch_mm;
                let widest = self.members.iter().map(|(s, _)| s.width_mm).fold(0.0, f64::max);
                let span = widest + pitch * (self.members.len() as f64 - 1.0);
                let mut z = 0.0;
                let offs = self
                    .members
                    .iter()
                    .enumerate()
                    .map(|(k, (s, _))| {
                        let c = -0.5 * span + 0.5 * s.width_mm + pitch * k as f64;
                        let bottom = z;
                        z += s.height_mm;
                        ([0.0, c], bottom)
                    })
                    .collect();
                (offs, [0.5 * len, 0.5 * span])
            }
        }
    }
}

fn human_loose_scene(inputs: &BaselineInputs<'_>, rng: &mut ChaCha8Rng, params: &PhysicsParams) -> Result<SimScene, SimError> {
    inputs.checklist.validate_against(inputs.catalog).map_err(|e| SimError::Input(e.to_string()))?;
    let tray = inputs.tray;

    let mut by_style: BTreeMap<u8, Vec<(&InstrumentSpec, u32)>> = BTreeMap::new();
    let mut loose: Vec<(&InstrumentSpec, u32)> = Vec::new();
    for (id, k) in inputs.checklist.expand() {
        let spec = inputs.catalog.get(&id).expect("validated");
        let bucket = match spec.group {
            InstrumentGroup::Ring | InstrumentGroup::RingThick => Some(0),
            InstrumentGroup::Needle => Some(1),
            InstrumentGroup::Thumb => Some(2),
            _ => None,
        };
        match bucket {
            Some(b) => by_style.entry(b).or_default().push((spec, k)),
            None => loose.push((spec, k)),
        }
    }
    let mut units: Vec<Unit<'_>> = Vec::new();
    for (bucket, mut members) in by_style {
        if members.len() == 1 {
            loose.append(&mut members);
            continue;
        }
        members.shuffle(rng);
        let style = if bucket == 0 { UnitStyle::Stringer } else { UnitStyle::Bag };
        units.push(Unit { members, style });
    }
    units.extend(loose.into_iter().map(|m| Unit { members: vec![m], style: UnitStyle::Loose }));
    // largest first so rejection sampling has room
    let areas: Vec<f64> = units.iter().map(|u| {
        let (_, h) = u.local_layout(params);
        h[0] * h[1]
    }).collect();
    let mut idx: Vec<usize> = (0..units.len()).collect();
    idx.sort_by(|&a, &b| areas[b].total_cmp(&areas[a]).then(a.cmp(&b)));

    let tray_box = Aabb::new([0.0, 0.0], [tray.width_mm, tray.length_mm]);
    let mut placed: Vec<Obb> = Vec::new();
    let mut bodies: Vec<Body> = Vec::new();
    let mut attempts = 0usize;
    for (cluster_id, &u) in idx.iter().enumerate() {
        let unit = &units[u];
        let (offsets, half) = unit.local_layout(params);
        let obb = loop {
            attempts += 1;
            if attempts > params.placement_attempts {
                return Err(SimError::PlacementSamplingExhausted { attempts: params.placement_attempts });
            }
            let angle = rng.gen_range(-params.loose_angle_deg..=params.loose_angle_deg).to_radians();
            let probe = Obb { center: [0.0, 0.0], half, angle };
            let h = probe.aabb_half();
            if 2.0 * h[0] > tray.width_mm || 2.0 * h[1] > tray.length_mm {
                continue;
            }
            let center = [
                rng.gen_range(h[0]..=tray.width_mm - h[0]),
                rng.gen_range(h[1]..=tray.length_mm - h[1]),
            ];
            let cand = Obb { center, ..probe };
            let gap = params.loose_min_gap_mm;
            if placed.iter().all(|p| !p.inflated(gap).intersects(&cand)) {
                break cand;
            }
        };
        placed.push(obb);
        let (s, c) = obb.angle.sin_cos();
        let cluster = (unit.members.len() > 1).then_some(cluster_id);
        for ((spec, k), (off, bottom)) in unit.members.iter().zip(offsets) {
            let center = [obb.center[0] + c * off[0] - s * off[1], obb.center[1] + s * off[0] + c * off[1]];
            bodies.push(Body {
                id: spec.id.clone(),
                instance: *k,
                group: spec.group.clone(),
                column: None,
                layer: 0,
                rest: Obb { center, half: [0.5 * spec.length_mm, 0.5 * spec.width_mm], angle: obb.angle },
                z_range: [bottom, bottom + spec.height_mm],
                slack: Slack::default(),
                cell: tray_box,
                mobility: params.loose_mobility,
                rot_slack_rad: params.loose_angle_deg.to_radians(),
                cluster,
                retained: false,
                seated: false,
            });
        }
    }

    // Clusters travel as one: every member gets the unit's wall clearance.
    for (k, b) in bodies.iter_mut().enumerate() {
        let unit = match b.cluster {
            Some(c) => placed[c].aabb(),
            None => placed[cluster_index_of(k, &idx, &units)].aabb(),
        };
        b.slack = Slack {
            x_neg: (unit.min[0] - tray_box.min[0]).max(0.0),
            x_pos: (tray_box.max[0] - unit.max[0]).max(0.0),
            y_neg: (unit.min[1] - tray_box.min[1]).max(0.0),
            y_pos: (tray_box.max[1] - unit.max[1]).max(0.0),
        };
    }

    Ok(SimScene {
        kind: SceneKind::HumanLoose,
        tray,
        bodies,
        walls: tray_walls(&tray),
        control_index: 0,
        stack_gap_mm: 0.0,
    })
}

/// Index into `placed` of the unit that produced body `k`.
fn cluster_index_of(k: usize, idx: &[usize], units: &[Unit<'_>]) -> usize {
    let mut seen = 0;
    for (pos, &u) in idx.iter().enumerate() {
        seen += units[u].members.len();
        if k < seen {
            return pos;
        }
    }
    unreachable!("body index beyond placed units")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packer::pack;

    fn spec(id: &str, group: InstrumentGroup, l: f64, w: f64, h: f64) -> InstrumentSpec {
        InstrumentSpec { id: id.into(), group, length_mm: l, width_mm: w, height_mm: h, magnetic: true }
    }

    fn params() -> PhysicsParams {
        PhysicsParams::default()
    }

    #[test]
    fn single_body_slack_to_walls() {
        let cat = Catalog::new(vec![spec("probe", InstrumentGroup::Other("p".into()), 100.0, 10.0, 5.0)]).unwrap();
        let layout = pack(&Checklist::new("x", vec![("probe", 1)]), &cat, &TraySpec::new(400.0, 300.0, 80.0), &Padding::uniform(5.0), &MergePolicy::default()).unwrap();
        let scene = scene_from_layout(&layout, 0, &params()).unwrap();
        assert_eq!(scene.bodies.len(), 1);
        let s = scene.bodies[0].slack;
        // footprint x in [5, 105] of 300; y centred in the 20 mm column at 10, tray length 400
        assert_eq!((s.x_neg, s.x_pos), (5.0, 195.0));
        assert_eq!((s.y_neg, s.y_pos), (5.0, 385.0));
        assert!(scene.bodies[0].seated);
    }

    #[test]
    fn columns_are_walled_apart() {
        let cat = Catalog::new(vec![
            spec("a", InstrumentGroup::Other("a".into()), 100.0, 10.0, 5.0),
            spec("b", InstrumentGroup::Other("b".into()), 100.0, 10.0, 5.0),
        ])
        .unwrap();
        let layout = pack(&Checklist::new("x", vec![("a", 1), ("b", 1)]), &cat, &TraySpec::new(400.0, 300.0, 80.0), &Padding::uniform(5.0), &MergePolicy::default()).unwrap();
        let scene = scene_from_layout(&layout, 0, &params()).unwrap();
        let (a, b) = (&scene.bodies[0], &scene.bodies[1]);
        assert!(a.cell.max[1] <= b.cell.min[1] - layout.tray.divider_thickness_mm + 1e-9);
        assert_eq!(scene.walls.iter().filter(|w| w.kind == WallKind::Divider).count(), 1);
    }

    #[test]
    fn ring_column_gets_gates() {
        let cat = Catalog::new(vec![spec("kelly", InstrumentGroup::Ring, 140.0, 50.0, 8.0)]).unwrap();
        let layout = pack(&Checklist::new("x", vec![("kelly", 3)]), &cat, &TraySpec::new(400.0, 300.0, 80.0), &Padding::uniform(5.0), &MergePolicy::default()).unwrap();
        let scene = scene_from_layout(&layout, 1, &params()).unwrap();
        assert_eq!(scene.bodies.len(), 3);
        let gates: Vec<_> = scene.walls.iter().filter(|w| w.kind == WallKind::HolderGate).collect();
        assert_eq!(gates.len(), 3);
        for (i, b) in scene.bodies.iter().enumerate() {
            assert!(b.retained);
            let g = params().gate_slack_mm;
            assert!(b.slack.x_neg <= g && b.slack.x_pos <= g && b.slack.y_neg <= g && b.slack.y_pos <= g);
            assert!(gates.iter().any(|w| w.body == Some(i)));
        }
        // one ring per layer, separated by the vertical padding
        assert_eq!(scene.bodies[1].z_range[0], scene.bodies[0].z_range[1] + 5.0);
        assert!(scene.rest_overlaps().is_empty());
    }

    #[test]
    fn invalid_layout_rejected() {
        let cat = Catalog::new(vec![spec("a", InstrumentGroup::Gun, 100.0, 10.0, 5.0)]).unwrap();
        let mut layout = pack(&Checklist::new("x", vec![("a", 1)]), &cat, &TraySpec::new(400.0, 300.0, 80.0), &Padding::uniform(5.0), &MergePolicy::default()).unwrap();
        layout.placements[0].z_mm = 500.0;
        assert!(matches!(scene_from_layout(&layout, 0, &params()), Err(SimError::InvalidLayout(_))));
        layout.placements[0].z_mm = 5.0;
        assert!(matches!(scene_from_layout(&layout, 3, &params()), Err(SimError::InvalidControl(3))));
    }

    #[test]
    fn unsorted_stack_is_unseated() {
        // long over short: overhang (150 - 100) / 150
        let cat = Catalog::new(vec![
            spec("short", InstrumentGroup::Thumb, 100.0, 10.0, 5.0),
            spec("long", InstrumentGroup::Thumb, 150.0, 10.0, 5.0),
        ])
        .unwrap();
        let mut layout = pack(&Checklist::new("x", vec![("short", 1), ("long", 1)]), &cat, &TraySpec::new(400.0, 200.0, 80.0), &Padding::uniform(5.0), &MergePolicy::default()).unwrap();
        assert_eq!(layout.placements[0].instrument_id, "long");
        let sorted = scene_from_layout(&layout, 0, &params()).unwrap();
        assert!(sorted.bodies.iter().all(|b| b.seated));

        layout.placements.swap(0, 1);
        let (p0, p1) = layout.placements.split_at_mut(1);
        std::mem::swap(&mut p0[0].layer, &mut p1[0].layer);
        std::mem::swap(&mut p0[0].z_mm, &mut p1[0].z_mm);
        for p in &mut layout.placements {
            p.x_mm = 0.5 * p.length_mm + 5.0;
        }
        let scene = scene_from_unsorted_layout(&layout, 0, &params()).unwrap();
        let long = scene.bodies.iter().find(|b| b.id == "long").unwrap();
        assert!(!long.seated);
        let expect = params().seated_mobility + params().instability_gain * (50.0 / 150.0);
        assert!((long.mobility - expect.min(1.0)).abs() < 1e-12);
        assert_eq!(long.slack.x_neg, 5.0);
    }

    fn twenty() -> (Catalog, Checklist) {
        let mut specs = vec![
            spec("kelly", InstrumentGroup::Ring, 140.0, 55.0, 8.0),
            spec("mayo", InstrumentGroup::Ring, 170.0, 60.0, 8.0),
            spec("adson", InstrumentGroup::Thumb, 120.0, 10.0, 8.0),
            spec("frazier", InstrumentGroup::Needle, 170.0, 10.0, 10.0),
        ];
        for i in 0..4 {
            specs.push(spec(&format!("loose{i}"), InstrumentGroup::Other(format!("o{i}")), 150.0 + 10.0 * i as f64, 20.0, 8.0));
        }
        let cat = Catalog::new(specs).unwrap();
        let list = Checklist::new(
            "t",
            vec![("kelly", 5), ("mayo", 3), ("adson", 4), ("frazier", 4), ("loose0", 1), ("loose1", 1), ("loose2", 1), ("loose3", 1)],
        );
        (cat, list)
    }

    #[test]
    fn human_loose_has_no_dividers_and_is_deterministic() {
        let (cat, list) = twenty();
        let policy = MergePolicy::default();
        let inputs = BaselineInputs { checklist: &list, catalog: &cat, tray: TraySpec::new(400.0, 480.0, 100.0), padding: Padding::uniform(5.0), policy: &policy };
        let a = baseline_scene(&inputs, BaselineKind::HumanLoose, 7, &params()).unwrap();
        assert_eq!(a.bodies.len(), 20);
        assert!(a.walls.iter().all(|w| w.kind == WallKind::TrayWall));
        assert!(a.rest_overlaps().is_empty(), "{:?}", a.rest_overlaps());
        let again = baseline_scene(&inputs, BaselineKind::HumanLoose, 7, &params()).unwrap();
        assert_eq!(a, again);
        // rings share one stringer cluster
        let ring_clusters: std::collections::BTreeSet<_> = a.bodies.iter().filter(|b| b.group.is_ring()).map(|b| b.cluster).collect();
        assert_eq!(ring_clusters.len(), 1);
        assert!(ring_clusters.iter().next().unwrap().is_some());
        for b in &a.bodies {
            assert!(a.bodies.iter().all(|o| o.cell == b.cell));
            let bb = b.rest.aabb();
            assert!(Aabb::new([0.0, 0.0], [480.0, 400.0]).contains(&bb, 1e-9));
        }
    }

    #[test]
    fn sampling_exhaustion() {
        let (cat, list) = twenty();
        let policy = MergePolicy::default();
        let inputs = BaselineInputs { checklist: &list, catalog: &cat, tray: TraySpec::new(180.0, 200.0, 100.0), padding: Padding::uniform(5.0), policy: &policy };
        assert!(matches!(
            baseline_scene(&inputs, BaselineKind::HumanLoose, 1, &params()),
            Err(SimError::PlacementSamplingExhausted { .. })
        ));
    }

    #[test]
    fn no_algorithm_single_instrument_groups_match_packed() {
        let cat = Catalog::new(vec![
            spec("a", InstrumentGroup::Other("a".into()), 100.0, 10.0, 5.0),
            spec("b", InstrumentGroup::Gun, 120.0, 20.0, 15.0),
        ])
        .unwrap();
        let list = Checklist::new("x", vec![("a", 1), ("b", 1)]);
        let policy = MergePolicy::default();
        let tray = TraySpec::new(400.0, 300.0, 80.0);
        let inputs = BaselineInputs { checklist: &list, catalog: &cat, tray, padding: Padding::uniform(5.0), policy: &policy };
        let b = baseline_scene(&inputs, BaselineKind::NoAlgorithm, 3, &params()).unwrap();
        let layout = pack(&list, &cat, &tray, &Padding::uniform(5.0), &policy).unwrap();
        let c = scene_from_layout(&layout, b.control_index, &params()).unwrap();
        assert_eq!(b.bodies, c.bodies);
        assert_eq!(b.walls, c.walls);
        let again = baseline_scene(&inputs, BaselineKind::NoAlgorithm, 3, &params()).unwrap();
        assert_eq!(b, again);
    }
}
