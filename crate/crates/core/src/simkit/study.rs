use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::json::{ser_f64, ser_opt_f64};
use crate::packer::TrayLayout;

use super::scene::{baseline_scene, scene_from_layout, BaselineInputs, BaselineKind};
use super::stats::{cohens_d, mean, population_std};
use super::trial::{run_trial, ExcitationProfile, Mode, TrialReport};
use super::{scene_rng, PhysicsParams, SimError};

/// Tray conditions of the collision experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    /// Assembled by a technician.
    A,
    /// Dividers and holders, no sorting.
    B,
    /// Robot layout.
    C,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::A => "A",
            Condition::B => "B",
            Condition::C => "C",
        }
    }
}

/// Where the scene of each trial comes from.
#[derive(Debug, Clone)]
pub enum ConditionSource<'a> {
    /// A fixed layout; only the control instrument changes between trials.
    Packed(&'a TrayLayout),
    /// A fresh baseline placement every trial.
    Baseline(BaselineInputs<'a>, BaselineKind),
}

impl ConditionSource<'_> {
    pub fn condition(&self) -> Condition {
        match self {
            ConditionSource::Packed(_) => Condition::C,
            ConditionSource::Baseline(_, BaselineKind::HumanLoose) => Condition::A,
            ConditionSource::Baseline(_, BaselineKind::NoAlgorithm) => Condition::B,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub seed: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub condition: Condition,
    pub mode: Mode,
    pub n: usize,
    #[serde(serialize_with = "ser_f64")]
    pub mean: f64,
    #[serde(serialize_with = "ser_f64")]
    pub std: f64,
    /// Effect size of condition A against this one; absent for a single trial,
    /// when both spreads are zero, or when A was not run.
    #[serde(rename = "cohens_d_vs_A", serialize_with = "ser_opt_f64")]
    pub cohens_d_vs_a: Option<f64>,
    pub trials: Vec<TrialSummary>,
    #[serde(skip)]
    pub reports: Vec<TrialReport>,
}

impl StudyReport {
    pub fn cross_column_contacts(&self) -> usize {
        self.reports.iter().map(|r| r.cross_column_contacts).sum()
    }
}

fn trial(source: &ConditionSource<'_>, profile: &ExcitationProfile, seed: u64, params: &PhysicsParams) -> Result<TrialReport, SimError> {
    let scene = match source {
        ConditionSource::Packed(layout) => {
            let n = layout.placements.len();
            if n == 0 {
                return Ok(TrialReport { seed, control_index: 0, contacts: Default::default(), count: 0, cross_column_contacts: 0 });
            }
            scene_from_layout(layout, scene_rng(seed).gen_range(0..n), params)?
        }
        ConditionSource::Baseline(inputs, kind) => baseline_scene(inputs, *kind, seed, params)?,
    };
    if scene.bodies.is_empty() {
        return Ok(TrialReport { seed, control_index: 0, contacts: Default::default(), count: 0, cross_column_contacts: 0 });
    }
    run_trial(&scene, profile, seed, params)
}

/// Runs `n_trials` trials per condition with seeds `base_seed + i`. Trials
/// run in parallel; results are gathered by trial index.
pub fn run_study(
    sources: &[ConditionSource<'_>],
    profile: &ExcitationProfile,
    n_trials: usize,
    base_seed: u64,
    params: &PhysicsParams,
) -> Result<BTreeMap<Condition, StudyReport>, SimError> {
    if n_trials == 0 {
        return Err(SimError::NoTrials);
    }
    profile.validate()?;
    let mut out = BTreeMap::new();
    for source in sources {
        let reports = (0..n_trials as u64)
            .into_par_iter()
            .map(|i| trial(source, profile, base_seed.wrapping_add(i), params))
            .collect::<Result<Vec<_>, _>>()?;
        let counts: Vec<f64> = reports.iter().map(|r| r.count as f64).collect();
        let condition = source.condition();
        out.insert(
            condition,
            StudyReport {
                condition,
                mode: profile.mode,
                n: n_trials,
                mean: mean(&counts).expect("nonempty"),
                std: population_std(&counts).expect("nonempty"),
                cohens_d_vs_a: None,
                trials: reports.iter().map(|r| TrialSummary { seed: r.seed, count: r.count }).collect(),
                reports,
            },
        );
    }
    if let Some(a) = out.get(&Condition::A).map(|r| (r.mean, r.std)) {
        for report in out.values_mut() {
            if report.n > 1 {
                report.cohens_d_vs_a = cohens_d(a.0, a.1, report.mean, report.std).ok();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Catalog, Checklist, InstrumentGroup, InstrumentSpec, MergePolicy, Padding, TraySpec};
    use crate::packer::pack;

    fn setup() -> (Catalog, Checklist, TraySpec) {
        let mut specs = Vec::new();
        for (id, g, l, w) in [
            ("kelly", InstrumentGroup::Ring, 140.0, 55.0),
            ("adson", InstrumentGroup::Thumb, 120.0, 10.0),
            ("debakey", InstrumentGroup::Thumb, 150.0, 12.0),
            ("frazier", InstrumentGroup::Needle, 170.0, 10.0),
            ("handle", InstrumentGroup::Other("handle".into()), 130.0, 12.0),
        ] {
            specs.push(InstrumentSpec { id: id.into(), group: g, length_mm: l, width_mm: w, height_mm: 8.0, magnetic: true });
        }
        let list = Checklist::new("s", vec![("kelly", 3), ("adson", 3), ("debakey", 2), ("frazier", 2), ("handle", 2)]);
        (Catalog::new(specs).unwrap(), list, TraySpec::new(400.0, 480.0, 100.0))
    }

    #[test]
    fn study_shape_and_determinism() {
        let (cat, list, tray) = setup();
        let policy = MergePolicy::default();
        let pad = Padding::uniform(5.0);
        let layout = pack(&list, &cat, &tray, &pad, &policy).unwrap();
        let inputs = BaselineInputs { checklist: &list, catalog: &cat, tray, padding: pad, policy: &policy };
        let sources = [
            ConditionSource::Baseline(inputs.clone(), BaselineKind::HumanLoose),
            ConditionSource::Baseline(inputs, BaselineKind::NoAlgorithm),
            ConditionSource::Packed(&layout),
        ];
        let p = PhysicsParams::default();
        let profile = ExcitationProfile::tilt();
        let r = run_study(&sources, &profile, 5, 40, &p).unwrap();
        assert_eq!(r.len(), 3);
        let c = &r[&Condition::C];
        assert_eq!(c.trials.iter().map(|t| t.seed).collect::<Vec<_>>(), vec![40, 41, 42, 43, 44]);
        assert!(c.std >= 0.0);
        assert_eq!(c.cross_column_contacts(), 0);
        assert_eq!(r, run_study(&sources, &profile, 5, 40, &p).unwrap());

        let one = run_study(&sources, &profile, 1, 40, &p).unwrap();
        assert!(one.values().all(|r| r.std == 0.0 && r.cohens_d_vs_a.is_none()));
        assert!(matches!(run_study(&sources, &profile, 0, 40, &p), Err(SimError::NoTrials)));
    }

    #[test]
    fn json_field_order() {
        let report = StudyReport {
            condition: Condition::B,
            mode: Mode::Displacement,
            n: 2,
            mean: 1.5,
            std: 0.5,
            cohens_d_vs_a: Some(2.0 / 3.0),
            trials: vec![TrialSummary { seed: 1, count: 1 }, TrialSummary { seed: 2, count: 2 }],
            reports: Vec::new(),
        };
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            r#"{"condition":"B","mode":"displacement","n":2,"mean":1.5,"std":0.5,"cohens_d_vs_A":0.666667,"trials":[{"seed":1,"count":1},{"seed":2,"count":2}]}"#
        );
    }
}
