mod common;

use common::*;
use serde_json::Value;
use trayforge::pose::Mask;

fn pack_with(s: &Scratch, catalog: &str, checklist: &str, tray: &str) -> std::process::Output {
    let c = s.write("catalog.json", catalog);
    let l = s.write("checklist.json", checklist);
    let t = s.write("tray.json", tray);
    let p = s.write("padding.json", r#"{"px_mm":5,"py_mm":5,"pz_mm":5}"#);
    run(bin()
        .arg("pack")
        .arg("--catalog")
        .arg(c)
        .arg("--checklist")
        .arg(l)
        .arg("--tray")
        .arg(t)
        .arg("--padding")
        .arg(p)
        .arg("--out")
        .arg(s.path("layout.json")))
}

const ONE_PROBE: &str = r#"{"instruments":[{"id":"probe","group":"other:probe","length_mm":295,"width_mm":5,"height_mm":4,"magnetic":true}]}"#;

#[test]
fn pack_empty_checklist() {
    let s = Scratch::new("pack_empty");
    let o = pack_with(&s, ONE_PROBE, r#"{"procedure":"none","items":[]}"#, r#"{"length_mm":400,"width_mm":480,"depth_mm":80}"#);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&s.read("layout.json")).unwrap();
    for key in ["placements", "dividers", "holders", "columns"] {
        assert_eq!(v[key], Value::Array(vec![]), "{key}");
    }
}

#[test]
fn pack_width_overflow_names_the_instrument() {
    let s = Scratch::new("pack_width");
    let o = pack_with(&s, ONE_PROBE, r#"{"procedure":"x","items":[{"id":"probe","qty":1}]}"#, r#"{"length_mm":400,"width_mm":300,"depth_mm":80}"#);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("WidthOverflow") && err.contains("probe"), "{err}");
    assert!(!s.path("layout.json").exists());
}

#[test]
fn pack_length_overflow_exit_3() {
    let s = Scratch::new("pack_length");
    let o = pack_with(
        &s,
        r#"{"instruments":[{"id":"wide","group":"gun","length_mm":150,"width_mm":150,"height_mm":10,"magnetic":true}]}"#,
        r#"{"procedure":"x","items":[{"id":"wide","qty":8}]}"#,
        r#"{"length_mm":300,"width_mm":200,"depth_mm":15}"#,
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("LengthOverflow"));
}

#[test]
fn pack_missing_file_is_io() {
    let s = Scratch::new("pack_io");
    let o = run(bin()
        .args(["pack", "--catalog", "/nonexistent/catalog.json", "--checklist", "x", "--tray", "y", "--padding", "z", "--out"])
        .arg(s.path("o.json")));
    assert_eq!(code(&o), 1);
}

#[test]
fn pack_fixture_matches_schema_and_svg_parses() {
    let s = Scratch::new("pack_schema");
    let layout = pack_fixture(&s);
    let instance: Value = serde_json::from_str(&std::fs::read_to_string(layout).unwrap()).unwrap();
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(cli_fixture("layout.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert_eq!(instance["placements"].as_array().unwrap().len(), 20);

    // the schema is strict enough to reject a mangled layout
    let mut broken = instance.clone();
    broken["placements"][0]["group"] = Value::from("spoon");
    assert!(!validator.is_valid(&broken));

    let svg = s.read("layout.svg");
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(root.attribute("width"), Some("480"));
    assert_eq!(root.attribute("height"), Some("400"));
    let class = |c: &str| doc.descendants().filter(|n| n.attribute("class") == Some(c)).count();
    assert_eq!(class("instrument"), 20);
    assert_eq!(class("divider"), instance["dividers"].as_array().unwrap().len());
    assert_eq!(class("holder"), instance["holders"].as_array().unwrap().len());
}

fn simulate(s: &Scratch, layout: &std::path::Path, extra: &[&str], out: &str) -> std::process::Output {
    run(bin().arg("simulate").arg("--layout").arg(layout).args(extra).arg("--out").arg(s.path(out)))
}

#[test]
fn simulate_table_and_determinism() {
    let s = Scratch::new("simulate_table");
    let layout = pack_fixture(&s);
    let o = simulate(&s, &layout, &["--trials", "5", "--mode", "tilt", "--seed", "17"], "a.json");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = stdout(&o);
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].contains("Tilt"));
    assert!(lines[1].starts_with("baseline (A)"));
    assert!(lines[2].starts_with("No Algorithm (B)"));
    assert!(lines[3].starts_with("proposed (C)"));

    let o2 = simulate(&s, &layout, &["--trials", "5", "--mode", "tilt", "--seed", "17"], "b.json");
    assert_eq!(code(&o2), 0);
    assert_eq!(s.read("a.json"), s.read("b.json"));

    let reports: Value = serde_json::from_str(&s.read("a.json")).unwrap();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    let text = s.read("a.json");
    let first = &text[..text.find("\"trials\"").unwrap() + 8];
    let at: Vec<usize> = ["condition", "mode", "n", "mean", "std", "cohens_d_vs_A", "trials"]
        .iter()
        .map(|k| first.find(&format!("\"{k}\"")).unwrap())
        .collect();
    assert!(at.windows(2).all(|w| w[0] < w[1]), "{at:?}");
    let seeds: Vec<u64> = reports[2]["trials"].as_array().unwrap().iter().map(|t| t["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, [17, 18, 19, 20, 21]);
}

#[test]
fn simulate_seed_from_environment() {
    let s = Scratch::new("simulate_env");
    let layout = pack_fixture(&s);
    let o = bin()
        .arg("simulate")
        .arg("--layout")
        .arg(&layout)
        .args(["--trials", "2", "--baseline", "a", "--out"])
        .arg(s.path("env.json"))
        .env("TRAYFORGE_SEED", "900")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&s.read("env.json")).unwrap();
    assert_eq!(v[0]["condition"], "A");
    assert_eq!(v[0]["trials"][0]["seed"], 900);
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[test]
fn simulate_single_trial_suppresses_effect_size() {
    let s = Scratch::new("simulate_one");
    let layout = pack_fixture(&s);
    let o = simulate(&s, &layout, &["--trials", "1"], "one.json");
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"));
    let v: Value = serde_json::from_str(&s.read("one.json")).unwrap();
    for r in v.as_array().unwrap() {
        assert_eq!(r["std"], 0.0);
        assert_eq!(r["cohens_d_vs_A"], Value::Null);
    }
}

#[test]
fn simulate_rejects_invalid_layout() {
    let s = Scratch::new("simulate_invalid");
    let layout = pack_fixture(&s);
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&layout).unwrap()).unwrap();
    v["placements"][0]["x_mm"] = Value::from(10_000.0);
    let bad = s.write("bad.json", v.to_string());
    let o = simulate(&s, &bad, &["--trials", "2"], "x.json");
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let o = simulate(&s, &s.path("missing.json"), &["--trials", "2"], "x.json");
    assert_eq!(code(&o), 1);
    let o = simulate(&s, &layout, &["--trials", "0"], "x.json");
    assert_eq!(code(&o), 64);
}

const IDENTITY: &str = r#"{"homography":[[1,0,0],[0,1,0],[0,0,1]],"reprojection_error_px":0.1}"#;

fn pose(s: &Scratch, mask: &Mask, calib: &str) -> std::process::Output {
    let m = s.write("mask.pgm", mask.to_pgm());
    let c = s.write("calib.json", calib);
    run(bin().arg("pose").arg("--mask").arg(m).arg("--calib").arg(c))
}

#[test]
fn pose_rectangle_and_disk() {
    let s = Scratch::new("pose_basic");
    let rect = Mask::from_fn(200, 60, |c, r| (20..180).contains(&c) && (20..36).contains(&r));
    let o = pose(&s, &rect, IDENTITY);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rz_deg"], 0.0);
    assert_eq!(v["degenerate"], false);
    assert_eq!((v["x_mm"].as_f64().unwrap(), v["y_mm"].as_f64().unwrap()), (100.0, 28.0));

    let disk = Mask::from_fn(101, 101, |c, r| {
        let (x, y) = (c as f64 - 50.0, r as f64 - 50.0);
        x * x + y * y <= 40.0 * 40.0
    });
    let v: Value = serde_json::from_str(&stdout(&pose(&s, &disk, IDENTITY))).unwrap();
    assert_eq!(v["degenerate"], true);
}

#[test]
fn pose_rotated_rectangle_within_a_degree() {
    let s = Scratch::new("pose_rotated");
    for theta in [20.0_f64, 65.0, 110.0, 155.0] {
        let (sn, cs) = theta.to_radians().sin_cos();
        let mask = Mask::from_fn(240, 240, |c, r| {
            let (x, y) = (c as f64 + 0.5 - 120.0, r as f64 + 0.5 - 120.0);
            let (u, v) = (x * cs + y * sn, -x * sn + y * cs);
            u.abs() <= 90.0 && v.abs() <= 9.0
        });
        let v: Value = serde_json::from_str(&stdout(&pose(&s, &mask, IDENTITY))).unwrap();
        let rz = v["rz_deg"].as_f64().unwrap();
        assert!((rz - theta).abs() < 1.0, "{theta} -> {rz}");
    }
}

#[test]
fn pose_contour_csv() {
    let s = Scratch::new("pose_csv");
    let csv = s.write("bar.csv", "x,y\n0,0\n50,0\n50,5\n0,5\n");
    let c = s.write("calib.json", IDENTITY);
    let o = run(bin().arg("pose").arg("--mask").arg(csv).arg("--calib").arg(c).args(["--scale", "2"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["x_mm"], 50.0);
    assert_eq!(v["rz_deg"], 0.0);
}

#[test]
fn pose_error_codes() {
    let s = Scratch::new("pose_errors");
    let o = pose(&s, &Mask::new(10, 10), IDENTITY);
    assert_eq!(code(&o), 5);
    let rect = Mask::from_fn(20, 20, |c, r| c < 15 && r < 3);
    let o = pose(&s, &rect, r#"{"homography":[[1,2,0],[2,4,0],[0,0,1]],"reprojection_error_px":0.1}"#);
    assert_eq!(code(&o), 6);
    let o = pose(&s, &rect, r#"{"homography":[[1,0,0],[0,1,0],[0,0,1]],"reprojection_error_px":0.5}"#);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"));
}

fn replay(s: &Scratch, layout: &std::path::Path, events: &[&str]) -> (std::process::Output, Vec<Value>) {
    let lines: String = events.iter().map(|id| format!("{{\"event\":\"detected\",\"id\":\"{id}\"}}\n")).collect();
    let e = s.write("events.jsonl", lines);
    let o = run(bin().arg("replay").arg("--layout").arg(layout).arg("--events").arg(e).arg("--out").arg(s.path("actions.jsonl")));
    let actions = s.read("actions.jsonl").lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    (o, actions)
}

fn plan_ids(layout: &std::path::Path) -> Vec<String> {
    let l = trayforge::TrayLayout::from_json_str(&std::fs::read_to_string(layout).unwrap()).unwrap();
    trayforge::sequencer::plan_from_layout(&l).into_iter().map(|p| p.id).collect()
}

#[test]
fn replay_in_order() {
    let s = Scratch::new("replay_order");
    let layout = pack_fixture(&s);
    let ids = plan_ids(&layout);
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let (o, actions) = replay(&s, &layout, &refs);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(actions.len(), 21);
    assert!(actions[..20].iter().all(|a| a["action"] == "place"));
    assert_eq!(actions[20]["action"], "done");
    assert!(actions[0]["x_mm"].is_number() && actions[0]["z_mm"].is_number());
}

#[test]
fn replay_missing_item_exits_7() {
    let s = Scratch::new("replay_missing");
    let layout = pack_fixture(&s);
    let ids = plan_ids(&layout);
    let mut refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let dropped = refs.remove(7);
    let (o, _) = replay(&s, &layout, &refs);
    assert_eq!(code(&o), 7);
    assert!(stderr(&o).contains(dropped), "{}", stderr(&o));
}

#[test]
fn replay_unknowns_are_discarded() {
    let s = Scratch::new("replay_unknown");
    let layout = pack_fixture(&s);
    let ids = plan_ids(&layout);
    let mut refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    refs.insert(0, "bone-saw");
    refs.insert(10, "towel");
    let (o, actions) = replay(&s, &layout, &refs);
    assert_eq!(code(&o), 0);
    let discards: Vec<&Value> = actions.iter().filter(|a| a["action"] == "discard").collect();
    assert_eq!(discards.len(), 2);
    assert_eq!(discards[0]["id"], "bone-saw");
}

#[test]
fn replay_malformed_event() {
    let s = Scratch::new("replay_malformed");
    let layout = pack_fixture(&s);
    let e = s.write("events.jsonl", "{\"event\":\"detected\",\"id\":\"kelly\"}\nnot json\n");
    let o = run(bin().arg("replay").arg("--layout").arg(&layout).arg("--events").arg(e).arg("--out").arg(s.path("a.jsonl")));
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains(":2:"));
}

#[test]
fn usage_errors_and_help() {
    let o = run(bin().args(["pack", "--frobnicate"]));
    assert_eq!(code(&o), 64);
    let o = run(&mut bin());
    assert_eq!(code(&o), 64);
    let o = run(bin().args(["simulate", "--help"]));
    assert_eq!(code(&o), 0);
    let help = stdout(&o);
    for flag in ["--layout", "--baseline", "--trials", "--mode", "--seed", "--out", "--threads"] {
        assert!(help.contains(flag), "{flag}");
    }
    let o = run(bin().args(["pack", "--help"]));
    for flag in ["--catalog", "--checklist", "--tray", "--padding", "--out", "--svg"] {
        assert!(stdout(&o).contains(flag), "{flag}");
    }
    assert_eq!(code(&run(bin().arg("--version"))), 0);
}
