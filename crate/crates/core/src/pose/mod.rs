//! Planar instrument pose from a segmentation mask.
//!
//! The in-plane rotation `r_z` is the angle from world X to the major principal
//! axis of the filled mask, mapped through the calibrated pixel-to-world
//! homography. PCA cannot tell head from tail, so `r_z` is reported folded into
//! `[0, 180)` degrees.

mod calib;
mod mask;

use serde::Serialize;
use thiserror::Error;

use crate::json::ser_f64;

pub use calib::{PlanarCalibration, REPROJECTION_WARN_PX};
pub use mask::{mask_from_contour, parse_contour_csv, Mask};

/// Eigenvalue ratio below which the major axis is considered unreliable.
pub const DEFAULT_DEGENERATE_RATIO: f64 = 1.05;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("calibration homography is singular (|det| = {0:e})")]
    SingularCalibration(f64),
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("format error: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalAxes {
    /// Mean pixel-centre position `(x, y)`.
    pub centroid_px: [f64; 2],
    /// Unit major axis with `x >= 0` (or `y > 0` when `x == 0`).
    pub major_axis: [f64; 2],
    /// Population covariance eigenvalues, largest first.
    pub eigenvalues: [f64; 2],
}

impl PrincipalAxes {
    pub fn eigen_ratio(&self) -> f64 {
        self.eigenvalues[0] / self.eigenvalues[1]
    }
}

/// Filled-region PCA over the foreground pixels.
///
/// Moments are accumulated in integers on doubled pixel-centre coordinates, so
/// any translation or point reflection of the mask yields bit-identical
/// central moments.
pub fn principal_axes(mask: &Mask) -> Result<PrincipalAxes, PoseError> {
    let (mut n, mut su, mut sv, mut suu, mut suv, mut svv) = (0i128, 0i128, 0i128, 0i128, 0i128, 0i128);
    for (c, r) in mask.foreground() {
        let u = 2 * c as i128 + 1;
        let v = 2 * r as i128 + 1;
        n += 1;
        su += u;
        sv += v;
        suu += u * u;
        suv += u * v;
        svv += v * v;
    }
    if n == 0 {
        return Err(PoseError::EmptyMask);
    }
    let nf = n as f64;
    // doubled coordinates: divide by 2 for means, 4 for second moments
    let centroid_px = [su as f64 / nf / 2.0, sv as f64 / nf / 2.0];
    let denom = 4.0 * nf * nf;
    let a = (n * suu - su * su) as f64 / denom;
    let b = (n * suv - su * sv) as f64 / denom;
    let d = (n * svv - sv * sv) as f64 / denom;

    let (eigenvalues, major_axis) = sym2_eigen(a, b, d);
    Ok(PrincipalAxes {
        centroid_px,
        major_axis,
        eigenvalues,
    })
}

/// Closed-form eigendecomposition of `[[a, b], [b, d]]`.
fn sym2_eigen(a: f64, b: f64, d: f64) -> ([f64; 2], [f64; 2]) {
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = half.hypot(b);
    let l1 = mean + r;
    let l2 = (mean - r).max(0.0);
    let phi = if b == 0.0 && half == 0.0 { 0.0 } else { 0.5 * b.atan2(half) };
    let mut axis = [phi.cos(), phi.sin()];
    if axis[0] < 0.0 || (axis[0] == 0.0 && axis[1] < 0.0) {
        axis = [-axis[0], -axis[1]];
    }
    ([l1, l2], axis)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoseEstimate {
    #[serde(serialize_with = "ser_f64")]
    pub x_mm: f64,
    #[serde(serialize_with = "ser_f64")]
    pub y_mm: f64,
    /// `[0, 180)`; 0 by convention when `degenerate`.
    #[serde(serialize_with = "ser_f64")]
    pub rz_deg: f64,
    /// `sqrt(lambda_major / lambda_minor)`; infinite for one-pixel-wide masks.
    #[serde(serialize_with = "ser_f64")]
    pub elongation: f64,
    pub degenerate: bool,
}

pub fn estimate_pose(mask: &Mask, calib: &PlanarCalibration) -> Result<PoseEstimate, PoseError> {
    estimate_pose_with(mask, calib, DEFAULT_DEGENERATE_RATIO)
}

pub fn estimate_pose_with(mask: &Mask, calib: &PlanarCalibration, degenerate_ratio: f64) -> Result<PoseEstimate, PoseError> {
    calib.validate()?;
    let axes = principal_axes(mask)?;
    let [x_mm, y_mm] = calib.pixel_to_world(axes.centroid_px);

    let [l1, l2] = axes.eigenvalues;
    let ratio = if l2 > 0.0 {
        l1 / l2
    } else if l1 > 0.0 {
        f64::INFINITY
    } else {
        // single pixel
        1.0
    };
    let degenerate = ratio < degenerate_ratio;
    let elongation = ratio.sqrt();

    let rz_deg = if degenerate {
        0.0
    } else {
        let dir = calib.map_direction(axes.centroid_px, axes.major_axis);
        fold_degrees(dir[1].atan2(dir[0]).to_degrees())
    };
    Ok(PoseEstimate {
        x_mm,
        y_mm,
        rz_deg,
        elongation,
        degenerate,
    })
}

/// Folds an angle in degrees into `[0, 180)`.
pub fn fold_degrees(deg: f64) -> f64 {
    let r = deg.rem_euclid(180.0);
    if r >= 180.0 {
        0.0
    } else {
        r
    }
}
