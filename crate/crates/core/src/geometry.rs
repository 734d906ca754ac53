//! Planar shapes and their signed distance functions.
//!
//! All distances are negative inside the body, positive outside and zero on
//! the boundary. For the tray the "body" is the wall material, so the free
//! interior has positive distance.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

pub type Vec2 = [f64; 2];

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}
#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}
#[inline]
pub fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}
#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}
#[inline]
pub fn perp(a: Vec2) -> Vec2 {
    [-a[1], a[0]]
}
#[inline]
pub fn rotate(a: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    [c * a[0] - s * a[1], s * a[0] + c * a[1]]
}

/// Planar pose of a body frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Vec2 {
        [self.x, self.y]
    }

    pub fn to_local(&self, p: Vec2) -> Vec2 {
        rotate(sub(p, self.position()), -self.heading)
    }

    pub fn to_world(&self, p: Vec2) -> Vec2 {
        add(rotate(p, self.heading), self.position())
    }
}

/// Result of a closest-feature query in the body frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdfSample {
    pub distance: f64,
    /// Unit gradient of the distance field at the query point.
    pub normal: Vec2,
    /// Closest point on the boundary.
    pub closest: Vec2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Simple polygon, counter-clockwise, body-frame vertices.
    Polygon { vertices: Vec<Vec2> },
    Disc { radius: f64 },
    /// Rectangular tray walls enclosing `|x| <= hx, |y| <= hy`.
    TrayInterior { half_extents: Vec2 },
}

/// The T-block: a bar `width x thickness` on top of a stem of the same
/// thickness, total height `height`, with the body frame at the area centroid.
pub fn t_block(height: f64, width: f64, thickness: f64) -> Geometry {
    let (h, w, t) = (height, width, thickness);
    let raw = [
        [-t / 2.0, 0.0],
        [t / 2.0, 0.0],
        [t / 2.0, h - t],
        [w / 2.0, h - t],
        [w / 2.0, h],
        [-w / 2.0, h],
        [-w / 2.0, h - t],
        [-t / 2.0, h - t],
    ];
    let c = polygon_centroid(&raw);
    Geometry::Polygon {
        vertices: raw.iter().map(|v| sub(*v, c)).collect(),
    }
}

pub fn polygon_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| cross(vertices[i], vertices[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

pub fn polygon_centroid(vertices: &[Vec2]) -> Vec2 {
    let n = vertices.len();
    let a = polygon_area(vertices);
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let (p, q) = (vertices[i], vertices[(i + 1) % n]);
        let c = cross(p, q);
        cx += (p[0] + q[0]) * c;
        cy += (p[1] + q[1]) * c;
    }
    [cx / (6.0 * a), cy / (6.0 * a)]
}

/// Polar moment of area about the body origin divided by the area
/// (squared radius of gyration).
pub fn polygon_gyration_sq(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    let mut j = 0.0;
    for i in 0..n {
        let (p, q) = (vertices[i], vertices[(i + 1) % n]);
        let c = cross(p, q);
        j += c * (dot(p, p) + dot(p, q) + dot(q, q));
    }
    j / 12.0 / polygon_area(vertices)
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        match self {
            Geometry::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(config_err("polygon needs at least three vertices"));
                }
                if vertices.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(config_err("polygon has non-finite vertices"));
                }
                let a = polygon_area(vertices);
                if a.abs() < 1e-12 {
                    return Err(config_err("degenerate polygon with zero area"));
                }
                if a < 0.0 {
                    return Err(config_err("polygon vertices must be counter-clockwise"));
                }
                Ok(())
            }
            Geometry::Disc { radius } => {
                if radius.is_finite() && *radius > 0.0 {
                    Ok(())
                } else {
                    Err(config_err("disc radius must be positive"))
                }
            }
            Geometry::TrayInterior { half_extents } => {
                if half_extents.iter().all(|h| h.is_finite() && *h > 0.0) {
                    Ok(())
                } else {
                    Err(config_err("tray half extents must be positive"))
                }
            }
        }
    }

    /// Distance field in the body frame. Assumes validated geometry.
    pub fn sdf_local(&self, p: Vec2) -> SdfSample {
        match self {
            Geometry::Polygon { vertices } => polygon_sdf(vertices, p),
            Geometry::Disc { radius } => {
                let r = norm(p);
                let normal = if r > 1e-300 {
                    scale(p, 1.0 / r)
                } else {
                    [1.0, 0.0]
                };
                SdfSample {
                    distance: r - radius,
                    normal,
                    closest: scale(normal, *radius),
                }
            }
            Geometry::TrayInterior { half_extents } => tray_sdf(*half_extents, p),
        }
    }
}

pub fn polygon_sdf(vertices: &[Vec2], p: Vec2) -> SdfSample {
    let n = vertices.len();
    let mut best_d2 = f64::INFINITY;
    let mut closest = vertices[0];
    let mut inside = false;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let ab = sub(b, a);
        let ap = sub(p, a);
        let len2 = dot(ab, ab);
        let t = (dot(ap, ab) / len2).clamp(0.0, 1.0);
        let q = add(a, scale(ab, t));
        let d = sub(p, q);
        let d2 = dot(d, d);
        if d2 < best_d2 {
            best_d2 = d2;
            closest = q;
        }
        // crossing-number inside test
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
    }
    let dist = best_d2.sqrt();
    let offset = sub(p, closest);
    let mut normal = if dist > 1e-300 {
        scale(offset, 1.0 / dist)
    } else {
        [1.0, 0.0]
    };
    if inside {
        normal = scale(normal, -1.0);
    }
    SdfSample {
        distance: if inside { -dist } else { dist },
        normal,
        closest,
    }
}

fn tray_sdf(h: Vec2, p: Vec2) -> SdfSample {
    let qx = p[0].abs() - h[0];
    let qy = p[1].abs() - h[1];
    let sx = if p[0] >= 0.0 { 1.0 } else { -1.0 };
    let sy = if p[1] >= 0.0 { 1.0 } else { -1.0 };
    if qx <= 0.0 && qy <= 0.0 {
        // free interior: nearest wall
        if qx >= qy {
            SdfSample {
                distance: -qx,
                normal: [-sx, 0.0],
                closest: [sx * h[0], p[1]],
            }
        } else {
            SdfSample {
                distance: -qy,
                normal: [0.0, -sy],
                closest: [p[0], sy * h[1]],
            }
        }
    } else {
        // inside wall material
        let ox = qx.max(0.0);
        let oy = qy.max(0.0);
        let d = ox.hypot(oy);
        let closest = [
            sx * p[0].abs().min(h[0]),
            sy * p[1].abs().min(h[1]),
        ];
        let off = sub(p, closest);
        let normal = if d > 1e-300 {
            scale(off, -1.0 / d)
        } else {
            [-sx, 0.0]
        };
        SdfSample {
            distance: -d,
            normal,
            closest,
        }
    }
}

/// Signed distance from `query` (world frame) to `geometry` placed at `pose`.
pub fn signed_distance(geometry: &Geometry, pose: &Pose, query: Vec2) -> Result<f64> {
    geometry.validate()?;
    Ok(geometry.sdf_local(pose.to_local(query)).distance)
}
