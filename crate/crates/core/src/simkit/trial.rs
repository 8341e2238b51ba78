use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{Aabb, Obb};
use super::scene::{Body, SceneKind, SimScene};
use super::{trial_rng, PhysicsParams, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Displacement,
    Tilt,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Displacement => "displacement",
            Mode::Tilt => "tilt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationProfile {
    pub mode: Mode,
    pub duration_s: f64,
    /// Shake frequency is drawn uniformly from this range per trial.
    pub frequency_hz: (f64, f64),
    pub amplitude_mm: f64,
    pub tilt_deg: f64,
    pub tilt_ramp_s: f64,
}

impl ExcitationProfile {
    /// Manual shaking: 15 s at 1.5 to 1.8 Hz with 100 mm travel.
    pub fn displacement() -> Self {
        ExcitationProfile {
            mode: Mode::Displacement,
            duration_s: 15.0,
            frequency_hz: (1.5, 1.8),
            amplitude_mm: 100.0,
            tilt_deg: 0.0,
            tilt_ramp_s: 0.0,
        }
    }

    /// Tilting to 30 degrees over 3 s about each axis in turn.
    pub fn tilt() -> Self {
        ExcitationProfile {
            mode: Mode::Tilt,
            duration_s: 9.0,
            frequency_hz: (0.0, 0.0),
            amplitude_mm: 0.0,
            tilt_deg: 30.0,
            tilt_ramp_s: 3.0,
        }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Displacement => Self::displacement(),
            Mode::Tilt => Self::tilt(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |what: &str| Err(SimError::InvalidProfile(what.to_string()));
        match self.mode {
            Mode::Displacement => {
                let (lo, hi) = self.frequency_hz;
                if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
                    return bad("duration must be positive");
                }
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return bad("frequency range must be positive and ordered");
                }
                if !(self.amplitude_mm > 0.0 && self.amplitude_mm.is_finite()) {
                    return bad("amplitude must be positive");
                }
            }
            Mode::Tilt => {
                if !(self.tilt_deg > 0.0 && self.tilt_deg < 90.0) {
                    return bad("tilt must be between 0 and 90 degrees");
                }
                if !(self.tilt_ramp_s > 0.0 && self.tilt_ramp_s.is_finite()) {
                    return bad("tilt ramp must be positive");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialReport {
    pub seed: u64,
    pub control_index: usize,
    /// Bodies that touched the control.
    pub contacts: BTreeSet<usize>,
    pub count: usize,
    /// Contacts with a body in another column (always zero when dividers hold).
    pub cross_column_contacts: usize,
}

/// Runs one trial and records which bodies touch the control.
pub fn run_trial(scene: &SimScene, profile: &ExcitationProfile, seed: u64, params: &PhysicsParams) -> Result<TrialReport, SimError> {
    let frames = trace_trial(scene, profile, seed, params)?;
    let control = scene.control_index;
    let mut contacts = BTreeSet::new();
    if scene.bodies.len() > 1 {
        let eps = params.contact_inflation_mm;
        let c = &scene.bodies[control];
        for (j, other) in scene.bodies.iter().enumerate() {
            if j == control {
                continue;
            }
            let gap = (other.z_range[0] - c.z_range[1]).max(c.z_range[0] - other.z_range[1]);
            let touched = if gap < eps {
                frames.iter().any(|f| f[control].inflated(eps).intersects(&f[j]))
            } else if gap <= scene.stack_gap_mm + eps {
                // resting on each other: powder transfers only when they slide
                frames.iter().any(|f| {
                    f[control].inflated(eps).intersects(&f[j]) && sliding(c, other, &f[control], &f[j]) >= params.rub_threshold_mm
                })
            } else {
                false
            };
            if touched {
                contacts.insert(j);
            }
        }
        if scene.kind == SceneKind::HumanLoose && profile.mode == Mode::Displacement {
            restack_contacts(scene, &frames, seed, params, &mut contacts);
        }
    }
    let c = scene.bodies.get(control);
    let cross_column_contacts = contacts
        .iter()
        .filter(|&&j| match (c.and_then(|b| b.column), scene.bodies[j].column) {
            (Some(a), Some(b)) => a != b,
            _ => false,
        })
        .count();
    Ok(TrialReport {
        seed,
        control_index: control,
        count: contacts.len(),
        contacts,
        cross_column_contacts,
    })
}

/// Displacement of `b` relative to `a` since rest, rotation measured at the longer tip.
fn sliding(a: &Body, b: &Body, pa: &Obb, pb: &Obb) -> f64 {
    let dx = (pb.center[0] - b.rest.center[0]) - (pa.center[0] - a.rest.center[0]);
    let dy = (pb.center[1] - b.rest.center[1]) - (pa.center[1] - a.rest.center[1]);
    let da = (pb.angle - b.rest.angle) - (pa.angle - a.rest.angle);
    dx.hypot(dy) + da.abs() * a.rest.half[0].max(b.rest.half[0])
}

/// Vertical shaking lets loose instruments climb onto each other; each step a
/// body within reach of the control may land on it.
fn restack_contacts(scene: &SimScene, frames: &[Vec<Obb>], seed: u64, params: &PhysicsParams, contacts: &mut BTreeSet<usize>) {
    let mut rng = trial_rng(seed);
    rng.set_stream(2);
    let control = scene.control_index;
    for poses in &frames[1..] {
        let reach = poses[control].inflated(params.swap_reach_mm);
        for (j, pose) in poses.iter().enumerate() {
            if j == control {
                continue;
            }
            let hit = rng.gen_bool(params.swap_probability);
            if hit && reach.intersects(pose) {
                contacts.insert(j);
            }
        }
    }
}

/// Poses of every body at rest and after each step.
pub fn trace_trial(scene: &SimScene, profile: &ExcitationProfile, seed: u64, params: &PhysicsParams) -> Result<Vec<Vec<Obb>>, SimError> {
    profile.validate()?;
    if !scene.bodies.is_empty() && scene.control_index >= scene.bodies.len() {
        return Err(SimError::InvalidControl(scene.control_index));
    }
    let mut rng = trial_rng(seed);
    let rest: Vec<Obb> = scene.bodies.iter().map(|b| b.rest).collect();
    let mut frames = vec![rest.clone()];
    let units = motion_units(&scene.bodies);
    match profile.mode {
        Mode::Displacement => {
            let (lo, hi) = profile.frequency_hz;
            let f = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            let steps = (2.0 * profile.duration_s * f).round().max(1.0) as usize;
            let span = scene.tray.width_mm.min(scene.tray.length_mm);
            let kappa = (2.0 * profile.amplitude_mm / span).min(1.0);
            for _ in 0..steps {
                let draws: Vec<[f64; 3]> = (0..units.count).map(|_| [rng.gen(), rng.gen(), rng.gen_range(-1.0..=1.0)]).collect();
                let poses = scene
                    .bodies
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let [u, v, r] = draws[units.of[i]];
                        let s = b.slack;
                        let dx = kappa * b.mobility * (-s.x_neg + u * (s.x_neg + s.x_pos));
                        let dy = kappa * b.mobility * (-s.y_neg + v * (s.y_neg + s.y_pos));
                        let da = b.mobility * b.rot_slack_rad * r;
                        moved(b, dx, dy, da)
                    })
                    .collect();
                frames.push(poses);
            }
        }
        Mode::Tilt => {
            let steps = (profile.tilt_ramp_s * params.tilt_rate_hz).round().max(1.0) as usize;
            let full = profile.tilt_deg.to_radians().tan();
            for axis in 0..3 {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let jitter: Vec<f64> = (0..units.count).map(|_| 1.0 + params.tilt_jitter * rng.gen_range(-1.0..=1.0)).collect();
                for k in 1..=steps {
                    let theta = profile.tilt_deg.to_radians() * k as f64 / steps as f64;
                    let drive = tilt_drive(theta.tan(), full, params.friction);
                    let poses = scene
                        .bodies
                        .iter()
                        .enumerate()
                        .map(|(i, b)| {
                            let g = drive * b.mobility * jitter[units.of[i]];
                            let s = b.slack;
                            let low = |neg: f64, pos: f64| if sign > 0.0 { pos } else { -neg };
                            match axis {
                                0 => moved(b, 0.0, g * low(s.y_neg, s.y_pos), 0.0),
                                1 => moved(b, g * low(s.x_neg, s.x_pos), 0.0, 0.0),
                                _ => moved(b, 0.0, 0.0, sign * g * b.rot_slack_rad),
                            }
                        })
                        .collect();
                    frames.push(poses);
                }
            }
        }
    }
    Ok(frames)
}

/// Share of the slide reached at slope `t`: nothing until friction is
/// overcome, everything at full tilt.
fn tilt_drive(t: f64, full: f64, mu: f64) -> f64 {
    if full <= mu {
        return 0.0;
    }
    ((t - mu) / (full - mu)).clamp(0.0, 1.0)
}

struct Units {
    of: Vec<usize>,
    count: usize,
}

/// Bodies in one cluster draw the same random numbers.
fn motion_units(bodies: &[Body]) -> Units {
    let mut seen: Vec<(usize, usize)> = Vec::new();
    let mut count = 0;
    let of = bodies
        .iter()
        .map(|b| match b.cluster {
            Some(c) => match seen.iter().find(|(k, _)| *k == c) {
                Some(&(_, u)) => u,
                None => {
                    seen.push((c, count));
                    count += 1;
                    count - 1
                }
            },
            None => {
                count += 1;
                count - 1
            }
        })
        .collect();
    Units { of, count }
}

fn moved(b: &Body, dx: f64, dy: f64, da: f64) -> Obb {
    let pose = Obb {
        center: [b.rest.center[0] + dx, b.rest.center[1] + dy],
        half: b.rest.half,
        angle: b.rest.angle + da,
    };
    clamp_into(pose, &b.cell)
}

/// Keeps the footprint inside `cell`, giving up rotation before position.
pub(crate) fn clamp_into(mut pose: Obb, cell: &Aabb) -> Obb {
    let fits = |p: &Obb| {
        let h = p.aabb_half();
        2.0 * h[0] <= cell.width() + 1e-9 && 2.0 * h[1] <= cell.height() + 1e-9
    };
    if !fits(&pose) {
        let a0 = pose.angle;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if fits(&Obb { angle: a0 * mid, ..pose }) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        pose.angle = a0 * lo;
    }
    let h = pose.aabb_half();
    for (k, half) in h.iter().enumerate() {
        let (lo, hi) = (cell.min[k] + half, cell.max[k] - half);
        pose.center[k] = if lo > hi { 0.5 * (cell.min[k] + cell.max[k]) } else { pose.center[k].clamp(lo, hi) };
    }
    pose
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Catalog, Checklist, InstrumentGroup, InstrumentSpec, MergePolicy, Padding, TraySpec};
    use crate::packer::pack;
    use crate::simkit::scene::{scene_from_layout, Slack};

    fn spec(id: &str, group: InstrumentGroup, l: f64, w: f64, h: f64) -> InstrumentSpec {
        InstrumentSpec { id: id.into(), group, length_mm: l, width_mm: w, height_mm: h, magnetic: true }
    }

    fn p() -> PhysicsParams {
        PhysicsParams::default()
    }

    #[test]
    fn single_body_never_contacts() {
        let cat = Catalog::new(vec![spec("a", InstrumentGroup::Gun, 100.0, 10.0, 5.0)]).unwrap();
        let layout = pack(&Checklist::new("x", vec![("a", 1)]), &cat, &TraySpec::new(400.0, 300.0, 80.0), &Padding::uniform(5.0), &MergePolicy::default()).unwrap();
        let scene = scene_from_layout(&layout, 0, &p()).unwrap();
        for seed in 0..20 {
            for mode in [Mode::Displacement, Mode::Tilt] {
                assert_eq!(run_trial(&scene, &ExcitationProfile::for_mode(mode), seed, &p()).unwrap().count, 0);
            }
        }
    }

    #[test]
    fn divider_isolates_columns() {
        let cat = Catalog::new(vec![
            spec("a", InstrumentGroup::Other("a".into()), 100.0, 10.0, 5.0),
            spec("b", InstrumentGroup::Other("b".into()), 100.0, 10.0, 5.0),
        ])
        .unwrap();
        let layout = pack(&Checklist::new("x", vec![("a", 1), ("b", 1)]), &cat, &TraySpec::new(400.0, 300.0, 80.0), &Padding::uniform(5.0), &MergePolicy::default()).unwrap();
        // crank mobility so bodies slam into their walls every step
        let params = PhysicsParams { seated_mobility: 1.0, ..p() };
        let scene = scene_from_layout(&layout, 0, &params).unwrap();
        for seed in 0..200 {
            for mode in [Mode::Displacement, Mode::Tilt] {
                let r = run_trial(&scene, &ExcitationProfile::for_mode(mode), seed, &params).unwrap();
                assert_eq!(r.count, 0);
                assert_eq!(r.cross_column_contacts, 0);
            }
        }
    }

    fn loose_pair() -> SimScene {
        let cell = Aabb::new([0.0, 0.0], [300.0, 40.0]);
        let body = |x: f64| Body {
            id: format!("b{x}"),
            instance: 0,
            group: InstrumentGroup::Other("o".into()),
            column: None,
            layer: 0,
            rest: Obb::axis_aligned([x, 20.0], [40.0, 5.0]),
            z_range: [0.0, 8.0],
            slack: Slack::default(),
            cell,
            mobility: 0.6,
            rot_slack_rad: 0.0,
            cluster: None,
            retained: false,
            seated: false,
        };
        let mut a = body(60.0);
        let mut b = body(200.0);
        // slack runs to the walls; the other body does not stop it
        a.slack = Slack { x_neg: 20.0, x_pos: 200.0, y_neg: 15.0, y_pos: 15.0 };
        b.slack = Slack { x_neg: 160.0, x_pos: 60.0, y_neg: 15.0, y_pos: 15.0 };
        SimScene {
            kind: SceneKind::NoAlgorithm,
            tray: TraySpec::new(40.0, 300.0, 50.0),
            bodies: vec![a, b],
            walls: Vec::new(),
            control_index: 0,
            stack_gap_mm: 0.0,
        }
    }

    #[test]
    fn shared_cell_contacts_often() {
        let scene = loose_pair();
        let profile = ExcitationProfile::displacement();
        let eps = p().contact_inflation_mm;
        let mut hits = 0;
        for seed in 0..100 {
            let report = run_trial(&scene, &profile, seed, &p()).unwrap();
            // straight-line oracle: two axis-aligned bars at equal height touch
            // when both centre distances come within the summed half extents plus eps
            let frames = trace_trial(&scene, &profile, seed, &p()).unwrap();
            let oracle = frames.iter().any(|f| {
                let dx = (f[1].center[0] - f[0].center[0]).abs();
                let dy = (f[1].center[1] - f[0].center[1]).abs();
                dx < f[0].half[0] + f[1].half[0] + eps && dy < f[0].half[1] + f[1].half[1] + eps
            });
            assert_eq!(report.count == 1, oracle, "seed {seed}");
            hits += report.count;
        }
        assert!(hits > 50, "{hits}");
    }

    #[test]
    fn deterministic_and_control_excluded() {
        let scene = loose_pair();
        for mode in [Mode::Displacement, Mode::Tilt] {
            let profile = ExcitationProfile::for_mode(mode);
            let a = run_trial(&scene, &profile, 9, &p()).unwrap();
            assert_eq!(a, run_trial(&scene, &profile, 9, &p()).unwrap());
            assert!(!a.contacts.contains(&scene.control_index));
        }
    }

    #[test]
    fn clamp_keeps_footprint_in_cell() {
        let cell = Aabb::new([0.0, 0.0], [100.0, 20.0]);
        let pose = clamp_into(Obb { center: [99.0, 1.0], half: [30.0, 5.0], angle: 0.5 }, &cell);
        assert!(cell.contains(&pose.aabb(), 1e-9));
        assert!(pose.angle > 0.0 && pose.angle < 0.5);
    }

    #[test]
    fn tilt_drive_profile() {
        let full = 30f64.to_radians().tan();
        assert_eq!(tilt_drive(0.1, full, 0.25), 0.0);
        assert_eq!(tilt_drive(full, full, 0.25), 1.0);
        assert_eq!(tilt_drive(0.5, 0.2, 0.25), 0.0);
    }

    #[test]
    fn profile_validation() {
        assert!(ExcitationProfile::displacement().validate().is_ok());
        assert!(ExcitationProfile::tilt().validate().is_ok());
        let bad = ExcitationProfile { frequency_hz: (1.8, 1.5), ..ExcitationProfile::displacement() };
        assert!(matches!(bad.validate(), Err(SimError::InvalidProfile(_))));
    }
}
