//! Human-in-the-loop assembly protocol.
//!
//! The technician puts inspected instruments on the stage one at a time. The
//! robot places an instrument as soon as it is the next one the plan needs;
//! instruments that are needed later wait on the stage and are placed as soon
//! as their turn comes; instruments the plan does not need (or no longer needs)
//! are discarded.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::packer::{placement_order, OrderEntry, TrayLayout};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SequencerError {
    #[error("plan already complete, `{0}` arrived after the last placement")]
    AlreadyComplete(String),
    #[error("stage full ({capacity}), cannot hold `{id}`")]
    StageFull { id: String, capacity: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanItem {
    pub id: String,
    pub instance: u32,
}

/// Instrument steps of [`placement_order`], in order.
pub fn plan_from_layout(layout: &TrayLayout) -> Vec<PlanItem> {
    placement_order(layout)
        .into_iter()
        .filter_map(|e| match e {
            OrderEntry::Instrument { id, instance } => Some(PlanItem { id, instance }),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Place { plan_index: usize, id: String, instance: u32 },
    Hold { id: String },
    Discard { id: String },
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencerState {
    plan: Vec<PlanItem>,
    next_index: usize,
    staged: HashMap<String, usize>,
    staged_total: usize,
    peak_staged: usize,
    discarded: Vec<String>,
    /// Occurrences of each id in `plan[next_index..]`.
    remaining: HashMap<String, usize>,
    stage_capacity: Option<usize>,
}

impl SequencerState {
    pub fn new(plan: Vec<PlanItem>) -> Self {
        let mut remaining = HashMap::new();
        for item in &plan {
            *remaining.entry(item.id.clone()).or_insert(0) += 1;
        }
        SequencerState {
            plan,
            next_index: 0,
            staged: HashMap::new(),
            staged_total: 0,
            peak_staged: 0,
            discarded: Vec::new(),
            remaining,
            stage_capacity: None,
        }
    }

    pub fn with_stage_capacity(mut self, capacity: usize) -> Self {
        self.stage_capacity = Some(capacity);
        self
    }

    pub fn plan(&self) -> &[PlanItem] {
        &self.plan
    }

    pub fn next_index(&self) -> usize {
        self.next_index
    }

    pub fn is_complete(&self) -> bool {
        self.next_index == self.plan.len()
    }

    pub fn staged_count(&self) -> usize {
        self.staged_total
    }

    pub fn staged(&self, id: &str) -> usize {
        self.staged.get(id).copied().unwrap_or(0)
    }

    /// Largest number of instruments waiting on the stage at any time.
    pub fn peak_staged(&self) -> usize {
        self.peak_staged
    }

    pub fn discarded(&self) -> &[String] {
        &self.discarded
    }

    /// Plan entries not yet placed.
    pub fn missing(&self) -> &[PlanItem] {
        &self.plan[self.next_index..]
    }

    pub fn on_detected(&mut self, id: &str) -> Result<Vec<Action>, SequencerError> {
        if self.is_complete() {
            return Err(SequencerError::AlreadyComplete(id.to_string()));
        }
        let mut actions = Vec::new();
        if self.plan[self.next_index].id == id {
            self.place(&mut actions);
            while !self.is_complete() {
                let want = &self.plan[self.next_index].id;
                match self.staged.get_mut(want) {
                    Some(n) if *n > 0 => {
                        *n -= 1;
                        self.staged_total -= 1;
                        self.place(&mut actions);
                    }
                    _ => break,
                }
            }
            if self.is_complete() {
                actions.push(Action::Done);
            }
        } else if self.remaining.get(id).copied().unwrap_or(0) > self.staged(id) {
            if let Some(capacity) = self.stage_capacity {
                if self.staged_total >= capacity {
                    return Err(SequencerError::StageFull { id: id.to_string(), capacity });
                }
            }
            *self.staged.entry(id.to_string()).or_insert(0) += 1;
            self.staged_total += 1;
            self.peak_staged = self.peak_staged.max(self.staged_total);
            actions.push(Action::Hold { id: id.to_string() });
        } else {
            self.discarded.push(id.to_string());
            actions.push(Action::Discard { id: id.to_string() });
        }
        Ok(actions)
    }

    fn place(&mut self, actions: &mut Vec<Action>) {
        let item = &self.plan[self.next_index];
        if let Some(n) = self.remaining.get_mut(&item.id) {
            *n -= 1;
        }
        actions.push(Action::Place {
            plan_index: self.next_index,
            id: item.id.clone(),
            instance: item.instance,
        });
        self.next_index += 1;
    }
}

/// Folds a detection stream through a fresh state.
pub fn replay<S: AsRef<str>>(
    plan: Vec<PlanItem>,
    detections: &[S],
) -> Result<(SequencerState, Vec<Action>), SequencerError> {
    let mut state = SequencerState::new(plan);
    let mut actions = Vec::new();
    for d in detections {
        actions.extend(state.on_detected(d.as_ref())?);
    }
    Ok((state, actions))
}
