//! Planar geometry primitives shared by the world model, renderer and metrics.
//!
//! Convention: the world lives in a plane where a positive heading increment
//! turns the vehicle towards its own right-hand side. Forward for heading
//! `h` is `(cos h, sin h)` and the right-hand normal is `(-sin h, cos h)`.
//! Height (`z`) is only used by the ray caster and points up.

use serde::{Deserialize, Serialize};

pub const TAU: f64 = std::f64::consts::TAU;

/// Wrap an angle to the half-open interval `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r <= -std::f64::consts::PI {
        r += TAU;
    } else if r > std::f64::consts::PI {
        r -= TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_heading(h: f64) -> Self {
        Self::new(h.cos(), h.sin())
    }

    /// Right-hand normal under the world chirality (positive turn = right).
    pub fn right_normal(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the planar cross product. Positive means `o` lies to
    /// the right of `self`.
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self.scale(1.0 / n)
        }
    }

    pub fn heading(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

/// Oriented bounding box in the plane.
#[derive(Debug, Clone, Copy)]
pub struct Obb {
    pub center: Vec2,
    pub heading: f64,
    /// (half length along heading, half width across)
    pub half_extents: (f64, f64),
}

impl Obb {
    pub fn corners(&self) -> [Vec2; 4] {
        let f = Vec2::from_heading(self.heading);
        let r = f.right_normal();
        let (hl, hw) = self.half_extents;
        [
            self.center + f.scale(hl) + r.scale(hw),
            self.center + f.scale(hl) + r.scale(-hw),
            self.center + f.scale(-hl) + r.scale(-hw),
            self.center + f.scale(-hl) + r.scale(hw),
        ]
    }

    /// Separating-axis overlap test against another box.
    pub fn overlaps(&self, other: &Obb) -> bool {
        let a = self.corners();
        let b = other.corners();
        let axes = [
            Vec2::from_heading(self.heading),
            Vec2::from_heading(self.heading).right_normal(),
            Vec2::from_heading(other.heading),
            Vec2::from_heading(other.heading).right_normal(),
        ];
        for axis in axes {
            let (amin, amax) = project(&a, axis);
            let (bmin, bmax) = project(&b, axis);
            if amax < bmin || bmax < amin {
                return false;
            }
        }
        true
    }
}

fn project(pts: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in pts {
        let d = p.dot(axis);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// Distance from `p` to the segment `a..b` together with the projection
/// parameter in `[0, 1]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (p.dist(a), 0.0);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    let proj = a + ab.scale(t);
    (p.dist(proj), t)
}

/// Distance from `p` to a polyline, with the index of the closest segment and
/// the arc length of the closest point measured from the polyline start.
pub fn point_polyline_distance(p: Vec2, pts: &[Vec2]) -> (f64, usize, f64) {
    debug_assert!(pts.len() >= 2);
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    let mut arc = 0.0;
    for i in 0..pts.len() - 1 {
        let (d, t) = point_segment_distance(p, pts[i], pts[i + 1]);
        let seg_len = pts[i].dist(pts[i + 1]);
        if d < best.0 {
            best = (d, i, arc + t * seg_len);
        }
        arc += seg_len;
    }
    best
}

pub fn polyline_length(pts: &[Vec2]) -> f64 {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Point at a given arc length along a polyline (clamped to the ends).
pub fn point_at_arc_length(pts: &[Vec2], s: f64) -> Vec2 {
    if s <= 0.0 {
        return pts[0];
    }
    let mut remaining = s;
    for w in pts.windows(2) {
        let seg = w[0].dist(w[1]);
        if remaining <= seg {
            let t = if seg == 0.0 { 0.0 } else { remaining / seg };
            return w[0] + (w[1] - w[0]).scale(t);
        }
        remaining -= seg;
    }
    *pts.last().unwrap()
}

/// Point and tangent heading at a given arc length along a polyline.
pub fn pose_at_arc_length(pts: &[Vec2], s: f64) -> (Vec2, f64) {
    let p = point_at_arc_length(pts, s);
    let mut remaining = s.max(0.0);
    for w in pts.windows(2) {
        let seg = w[0].dist(w[1]);
        if remaining <= seg || w[1] == *pts.last().unwrap() {
            return (p, (w[1] - w[0]).heading());
        }
        remaining -= seg;
    }
    (p, 0.0)
}

/// Ray / upright-box intersection. The box is an extruded `Obb` spanning
/// `z` in `[0, height]`. Returns the entry distance along the ray direction
/// (which must be normalized) if the ray hits.
pub fn ray_box_intersection(origin: Vec3, dir: Vec3, obb: &Obb, height: f64) -> Option<f64> {
    // Transform into the box frame: x along heading, y across, z up.
    let f = Vec2::from_heading(obb.heading);
    let r = f.right_normal();
    let rel = Vec2::new(origin.x - obb.center.x, origin.y - obb.center.y);
    let o = Vec3::new(rel.dot(f), rel.dot(r), origin.z);
    let d = Vec3::new(
        dir.x * f.x + dir.y * f.y,
        dir.x * r.x + dir.y * r.y,
        dir.z,
    );
    let (hl, hw) = obb.half_extents;
    let mut t_min = 0.0f64;
    let mut t_max = f64::INFINITY;
    for (oc, dc, lo, hi) in [
        (o.x, d.x, -hl, hl),
        (o.y, d.y, -hw, hw),
        (o.z, d.z, 0.0, height),
    ] {
        if dc.abs() < 1e-12 {
            if oc < lo || oc > hi {
                return None;
            }
        } else {
            let mut t0 = (lo - oc) / dc;
            let mut t1 = (hi - oc) / dc;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_min = t_min.max(t0);
            t_max = t_max.min(t1);
            if t_min > t_max {
                return None;
            }
        }
    }
    if t_min > 0.0 {
        Some(t_min)
    } else {
        None
    }
}

/// SplitMix64 step; the basis for stateless per-pixel noise.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform f64 in [0, 1) from a hash state.
pub fn hash_unit(state: u64) -> f64 {
    (splitmix64(state) >> 11) as f64 / (1u64 << 53) as f64
}
