//! Planning and verification toolkit for sterile instrument trays.
//!
//! The crate is split along the assembly pipeline:
//!
//! - [`catalog`]: instrument, tray, padding, merge-policy and checklist models plus JSON ingestion.
//! - [`packer`]: the column/layer tray packing heuristic with dividers, holders and merge-set escalation.
//! - [`pose`]: planar pose of an instrument from a binary mask (principal axes + homography).
//! - [`sequencer`]: the human-in-the-loop placement state machine.
//! - [`simkit`]: a seeded, quasi-static transport-collision simulator and effect-size statistics.
//!
//! All lengths are millimetres and all reals are `f64`.

pub mod catalog;
pub mod json;
pub mod packer;
pub mod pose;
pub mod sequencer;
pub mod simkit;

pub use catalog::{
    Catalog, CatalogError, Checklist, ChecklistItem, InstrumentGroup, InstrumentSpec, MergePolicy,
    Padding, TraySpec,
};
pub use packer::{pack, PackError, TrayLayout};
