use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PoseError;

/// Reprojection error above which a calibration is reported as suspect.
pub const REPROJECTION_WARN_PX: f64 = 0.3;

const MIN_ABS_DET: f64 = 1e-9;

/// Pixel-to-world-plane homography (world in millimetres), composed offline
/// from camera intrinsics and the table extrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarCalibration {
    pub homography: [[f64; 3]; 3],
    pub reprojection_error_px: f64,
}

impl PlanarCalibration {
    pub fn new(homography: [[f64; 3]; 3], reprojection_error_px: f64) -> Self {
        PlanarCalibration {
            homography,
            reprojection_error_px,
        }
    }

    pub fn identity() -> Self {
        PlanarCalibration::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 0.0)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PoseError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PoseError::Format(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PoseError::Format(format!("{}: {e}", path.display())))
    }

    pub fn determinant(&self) -> f64 {
        det3(&self.homography)
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        let det = self.determinant();
        if det.is_nan() || det.abs() <= MIN_ABS_DET || self.homography.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PoseError::SingularCalibration(det.abs()));
        }
        Ok(())
    }

    /// True when the recorded reprojection error exceeds [`REPROJECTION_WARN_PX`].
    pub fn reprojection_warning(&self) -> bool {
        self.reprojection_error_px >= REPROJECTION_WARN_PX
    }

    pub fn pixel_to_world(&self, p: [f64; 2]) -> [f64; 2] {
        apply(&self.homography, p)
    }

    pub fn world_to_pixel(&self, w: [f64; 2]) -> Result<[f64; 2], PoseError> {
        self.validate()?;
        Ok(apply(&inverse3(&self.homography), w))
    }

    /// Pushes a pixel-frame direction at `p` through the homography's Jacobian.
    pub fn map_direction(&self, p: [f64; 2], dir: [f64; 2]) -> [f64; 2] {
        let h = &self.homography;
        let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
        let [x, y] = apply(h, p);
        let j = [
            [(h[0][0] - x * h[2][0]) / w, (h[0][1] - x * h[2][1]) / w],
            [(h[1][0] - y * h[2][0]) / w, (h[1][1] - y * h[2][1]) / w],
        ];
        [
            j[0][0] * dir[0] + j[0][1] * dir[1],
            j[1][0] * dir[0] + j[1][1] * dir[1],
        ]
    }
}

fn apply(h: &[[f64; 3]; 3], p: [f64; 2]) -> [f64; 2] {
    let x = h[0][0] * p[0] + h[0][1] * p[1] + h[0][2];
    let y = h[1][0] * p[0] + h[1][1] * p[1] + h[1][2];
    let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
    [x / w, y / w]
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Adjugate over determinant.
fn inverse3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = det3(m);
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            // cofactor of m[j][i]
            let (r0, r1) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            *v = sign * minor / det;
        }
    }
    inv
}
