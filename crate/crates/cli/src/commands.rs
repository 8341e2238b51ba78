use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use trayforge::json::ser_f64;
use trayforge::packer::validate_layout;
use trayforge::pose::{estimate_pose, mask_from_contour, parse_contour_csv, Mask, PlanarCalibration, PoseError};
use trayforge::sequencer::{plan_from_layout, Action, SequencerState};
use trayforge::simkit::{
    run_study, BaselineInputs, BaselineKind, Condition, ConditionSource, ExcitationProfile, Mode, PhysicsParams, SimError, StudyReport,
};
use trayforge::{Catalog, Checklist, MergePolicy, PackError, Padding, TrayLayout, TraySpec};

use crate::{
    svg, BaselineArg, Failure, ModeArg, PackArgs, PoseArgs, ReplayArgs, SimulateArgs, EXIT_CALIBRATION, EXIT_INCOMPLETE, EXIT_IO,
    EXIT_LAYOUT, EXIT_LENGTH, EXIT_MASK, EXIT_WIDTH,
};

type Result<T> = std::result::Result<T, Failure>;

fn io_failure(e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_IO, e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn load_layout(path: &Path) -> Result<TrayLayout> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
    TrayLayout::from_json_str(&text).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn pack_failure(e: PackError) -> Failure {
    let code = match e {
        PackError::WidthOverflow { .. } | PackError::DepthOverflow { .. } => EXIT_WIDTH,
        PackError::LengthOverflow { .. } => EXIT_LENGTH,
        PackError::UnknownInstrument(_) | PackError::InvalidInput(_) => EXIT_IO,
    };
    Failure::new(code, format!("{}: {e}", e.name()))
}

pub fn pack(args: &PackArgs) -> Result<()> {
    let catalog = Catalog::load(&args.catalog).map_err(io_failure)?;
    let checklist = Checklist::load(&args.checklist).map_err(io_failure)?;
    let tray = TraySpec::load(&args.tray).map_err(io_failure)?;
    let padding = Padding::load(&args.padding).map_err(io_failure)?;
    let layout = trayforge::pack(&checklist, &catalog, &tray, &padding, &MergePolicy::default()).map_err(pack_failure)?;
    let mut json = layout.to_json_string();
    json.push('\n');
    write(&args.out, json.as_bytes())?;
    if let Some(path) = &args.svg {
        write(path, svg::render(&layout).as_bytes())?;
    }
    Ok(())
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::InvalidLayout(_) | SimError::InvalidControl(_) | SimError::PlacementSamplingExhausted { .. } => {
            Failure::new(EXIT_LAYOUT, e.to_string())
        }
        SimError::Pack(p) => pack_failure(p),
        other => Failure::new(EXIT_IO, other.to_string()),
    }
}

fn row_label(c: Condition) -> &'static str {
    match c {
        Condition::A => "baseline (A)",
        Condition::B => "No Algorithm (B)",
        Condition::C => "proposed (C)",
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let layout = load_layout(&args.layout)?;
    let violations = validate_layout(&layout);
    if !violations.is_empty() {
        return Err(Failure::new(EXIT_LAYOUT, format!("invalid layout: {violations:?}")));
    }
    let catalog = layout.catalog();
    let checklist = layout.checklist("layout");
    let policy = MergePolicy::default();
    let inputs = BaselineInputs {
        checklist: &checklist,
        catalog: &catalog,
        tray: layout.tray,
        padding: layout.padding,
        policy: &policy,
    };
    let sources = match args.baseline {
        None => vec![
            ConditionSource::Baseline(inputs.clone(), BaselineKind::HumanLoose),
            ConditionSource::Baseline(inputs, BaselineKind::NoAlgorithm),
            ConditionSource::Packed(&layout),
        ],
        Some(BaselineArg::A) => vec![ConditionSource::Baseline(inputs, BaselineKind::HumanLoose)],
        Some(BaselineArg::B) => vec![ConditionSource::Baseline(inputs, BaselineKind::NoAlgorithm)],
    };
    let mode = match args.mode {
        ModeArg::Displacement => Mode::Displacement,
        ModeArg::Tilt => Mode::Tilt,
    };
    let profile = ExcitationProfile::for_mode(mode);
    let params = PhysicsParams::default();
    let n = args.trials as usize;

    let study = || run_study(&sources, &profile, n, args.seed, &params);
    let reports = match args.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(io_failure)?
            .install(study),
        None => study(),
    }
    .map_err(sim_failure)?;

    let list: Vec<&StudyReport> = reports.values().collect();
    let mut json = serde_json::to_string_pretty(&list).map_err(io_failure)?;
    json.push('\n');
    write(&args.out, json.as_bytes())?;

    let mut out = std::io::stdout().lock();
    let heading = match mode {
        Mode::Displacement => "Displacement",
        Mode::Tilt => "Tilt",
    };
    let _ = writeln!(out, "{:<18}{}", "Tray", heading);
    for r in &list {
        let _ = writeln!(out, "{:<18}{:.3} ({:.3})", row_label(r.condition), r.mean, r.std);
    }
    if n == 1 {
        eprintln!("warning: a single trial has no spread; Cohen's d is not reported");
    } else {
        for r in list.iter().filter(|r| r.condition != Condition::A) {
            match r.cohens_d_vs_a {
                Some(d) => {
                    let _ = writeln!(out, "Cohen's d (A vs {}): {d:.3}", r.condition.as_str());
                }
                None if reports.contains_key(&Condition::A) => {
                    eprintln!("warning: Cohen's d (A vs {}) undefined, both spreads are zero", r.condition.as_str());
                }
                None => {}
            }
        }
    }
    Ok(())
}

fn pose_failure(e: PoseError) -> Failure {
    let code = match e {
        PoseError::EmptyMask | PoseError::DegeneratePolygon(_) => EXIT_MASK,
        PoseError::SingularCalibration(_) => EXIT_CALIBRATION,
        PoseError::Format(_) => EXIT_IO,
    };
    Failure::new(code, e.to_string())
}

pub fn pose(args: &PoseArgs) -> Result<()> {
    let bytes = read(&args.mask)?;
    let is_csv = args.mask.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mask = if is_csv {
        let text = String::from_utf8(bytes).map_err(io_failure)?;
        let points = parse_contour_csv(&text).map_err(pose_failure)?;
        mask_from_contour(&points, args.scale).map_err(pose_failure)?
    } else {
        Mask::from_pgm(&bytes).map_err(pose_failure)?
    };
    let calib = PlanarCalibration::load(&args.calib).map_err(pose_failure)?;
    if calib.reprojection_warning() {
        eprintln!(
            "warning: calibration reprojection error {} px is high",
            calib.reprojection_error_px
        );
    }
    let estimate = estimate_pose(&mask, &calib).map_err(pose_failure)?;
    println!("{}", serde_json::to_string_pretty(&estimate).map_err(io_failure)?);
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Event {
    event: String,
    id: String,
}

#[derive(Debug, Serialize)]
#[serde(tag = "action", rename_all = "lowercase")]
enum ActionLine<'a> {
    Place {
        plan_index: usize,
        id: &'a str,
        instance: u32,
        column: usize,
        layer: usize,
        #[serde(serialize_with = "ser_f64")]
        x_mm: f64,
        #[serde(serialize_with = "ser_f64")]
        y_mm: f64,
        #[serde(serialize_with = "ser_f64")]
        z_mm: f64,
    },
    Hold {
        id: &'a str,
    },
    Discard {
        id: &'a str,
    },
    Done,
}

pub fn replay(args: &ReplayArgs) -> Result<()> {
    let layout = load_layout(&args.layout)?;
    let text = String::from_utf8(read(&args.events)?).map_err(io_failure)?;
    let mut events = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev: Event = serde_json::from_str(line)
            .map_err(|e| Failure::new(EXIT_IO, format!("{}:{}: {e}", args.events.display(), k + 1)))?;
        if ev.event != "detected" {
            return Err(Failure::new(
                EXIT_IO,
                format!("{}:{}: unknown event `{}`", args.events.display(), k + 1, ev.event),
            ));
        }
        events.push(ev.id);
    }

    let by_instance: HashMap<(&str, u32), &trayforge::packer::Placement> =
        layout.placements.iter().map(|p| ((p.instrument_id.as_str(), p.instance), p)).collect();
    let mut state = SequencerState::new(plan_from_layout(&layout));
    let mut out = String::new();
    for id in &events {
        let actions = state.on_detected(id).map_err(io_failure)?;
        for action in &actions {
            let line = match action {
                Action::Place { plan_index, id, instance } => {
                    let p = by_instance[&(id.as_str(), *instance)];
                    ActionLine::Place {
                        plan_index: *plan_index,
                        id,
                        instance: *instance,
                        column: p.column,
                        layer: p.layer,
                        x_mm: p.x_mm,
                        y_mm: layout.footprint_y(p),
                        z_mm: p.z_mm,
                    }
                }
                Action::Hold { id } => ActionLine::Hold { id },
                Action::Discard { id } => ActionLine::Discard { id },
                Action::Done => ActionLine::Done,
            };
            out.push_str(&serde_json::to_string(&line).map_err(io_failure)?);
            out.push('\n');
        }
    }
    write(&args.out, out.as_bytes())?;
    if !state.is_complete() {
        let missing: Vec<String> = state.missing().iter().map(|m| format!("{}#{}", m.id, m.instance)).collect();
        return Err(Failure::new(EXIT_INCOMPLETE, format!("incomplete, missing: {}", missing.join(", "))));
    }
    Ok(())
}
