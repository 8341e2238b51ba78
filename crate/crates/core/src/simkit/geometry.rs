//! Oriented rectangles in the tray plane.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Aabb {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Aabb { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn contains(&self, other: &Aabb, tol: f64) -> bool {
        other.min[0] >= self.min[0] - tol
            && other.min[1] >= self.min[1] - tol
            && other.max[0] <= self.max[0] + tol
            && other.max[1] <= self.max[1] + tol
    }
}

/// Rectangle with centre, half extents along its own axes and rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: [f64; 2],
    pub half: [f64; 2],
    pub angle: f64,
}

impl Obb {
    pub fn axis_aligned(center: [f64; 2], half: [f64; 2]) -> Self {
        Obb { center, half, angle: 0.0 }
    }

    pub fn axes(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        [[c, s], [-s, c]]
    }

    /// Half extents of the enclosing axis-aligned box.
    pub fn aabb_half(&self) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        let (s, c) = (s.abs(), c.abs());
        [c * self.half[0] + s * self.half[1], s * self.half[0] + c * self.half[1]]
    }

    pub fn aabb(&self) -> Aabb {
        let h = self.aabb_half();
        Aabb::new(
            [self.center[0] - h[0], self.center[1] - h[1]],
            [self.center[0] + h[0], self.center[1] + h[1]],
        )
    }

    pub fn inflated(&self, by: f64) -> Obb {
        Obb {
            half: [self.half[0] + by, self.half[1] + by],
            ..*self
        }
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let [u, v] = self.axes();
        let [hx, hy] = self.half;
        let c = self.center;
        let p = |a: f64, b: f64| [c[0] + a * u[0] + b * v[0], c[1] + a * u[1] + b * v[1]];
        [p(-hx, -hy), p(hx, -hy), p(hx, hy), p(-hx, hy)]
    }

    fn radius_on(&self, axis: [f64; 2]) -> f64 {
        let [u, v] = self.axes();
        self.half[0] * dot(u, axis).abs() + self.half[1] * dot(v, axis).abs()
    }

    /// Separating-axis test; touching boundaries do not count as intersecting.
    pub fn intersects(&self, other: &Obb) -> bool {
        let d = [other.center[0] - self.center[0], other.center[1] - self.center[1]];
        let [a0, a1] = self.axes();
        let [b0, b1] = other.axes();
        [a0, a1, b0, b1]
            .into_iter()
            .all(|axis| dot(d, axis).abs() < self.radius_on(axis) + other.radius_on(axis))
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
