//! Small polygon and box helpers shared by the scene model, the background
//! rasterizer and the TSDF builder.

#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;
use crate::{Mat3, Vec3};

/// Polygon normal by Newell's method (unnormalized; length is twice the area).
pub fn newell_normal(vertices: &[Vec3]) -> Vec3 {
    let mut n = Vec3::zeros();
    for (i, a) in vertices.iter().enumerate() {
        let b = vertices[(i + 1) % vertices.len()];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    n
}

/// Point-in-polygon for a point already lying in the polygon's plane.
/// Projects onto the axis plane that best preserves area.
pub fn point_in_planar_polygon(point: &Vec3, vertices: &[Vec3], normal: &Vec3) -> bool {
    let (a, b) = dominant_projection(normal);
    let px = point[a];
    let py = point[b];
    let mut inside = false;
    let n = vertices.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (vertices[i][a], vertices[i][b]);
        let (xj, yj) = (vertices[j][a], vertices[j][b]);
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn dominant_projection(normal: &Vec3) -> (usize, usize) {
    let ax = normal.x.abs();
    let ay = normal.y.abs();
    let az = normal.z.abs();
    if az >= ax && az >= ay {
        (0, 1)
    } else if ay >= ax {
        (2, 0)
    } else {
        (1, 2)
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Unsigned distance from `p` to a planar polygon (interior included).
pub fn point_polygon_distance(p: &Vec3, vertices: &[Vec3], unit_normal: &Vec3) -> f64 {
    let offset = (p - vertices[0]).dot(unit_normal);
    let foot = p - unit_normal * offset;
    if point_in_planar_polygon(&foot, vertices, unit_normal) {
        return offset.abs();
    }
    let n = vertices.len();
    (0..n)
        .map(|i| point_segment_distance(p, &vertices[i], &vertices[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Ray/polygon hit distance along `dir` (not normalized), if any, with
/// `t > t_min`.
pub fn ray_polygon(origin: &Vec3, dir: &Vec3, vertices: &[Vec3], unit_normal: &Vec3, t_min: f64) -> Option<f64> {
    let denom = dir.dot(unit_normal);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (vertices[0] - origin).dot(unit_normal) / denom;
    if !(t > t_min) {
        return None;
    }
    let hit = origin + dir * t;
    point_in_planar_polygon(&hit, vertices, unit_normal).then_some(t)
}

/// Signed distance to an oriented box given its rotation, center and full
/// edge lengths. Negative inside.
pub fn box_signed_distance(p: &Vec3, rotation: &Mat3, center: &Vec3, size: &Vec3) -> f64 {
    let local = rotation.transpose() * (p - center);
    let q = Vec3::new(
        local.x.abs() - 0.5 * size.x,
        local.y.abs() - 0.5 * size.y,
        local.z.abs() - 0.5 * size.z,
    );
    let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

/// Slab-method ray/oriented-box intersection. Returns entry distance and the
/// world-space normal of the entered face.
pub fn ray_box(origin: &Vec3, dir: &Vec3, rotation: &Mat3, center: &Vec3, size: &Vec3, t_min: f64) -> Option<(f64, Vec3)> {
    let o = rotation.transpose() * (origin - center);
    let d = rotation.transpose() * dir;
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut axis = 0usize;
    let mut sign = 1.0;
    for k in 0..3 {
        let half = 0.5 * size[k];
        if d[k].abs() < 1e-300 {
            if o[k].abs() > half {
                return None;
            }
            continue;
        }
        let t1 = (-half - o[k]) / d[k];
        let t2 = (half - o[k]) / d[k];
        let (lo, hi, s) = if t1 < t2 { (t1, t2, -1.0) } else { (t2, t1, 1.0) };
        if lo > t_near {
            t_near = lo;
            axis = k;
            sign = s;
        }
        t_far = t_far.min(hi);
    }
    if t_near > t_far || !(t_near > t_min) {
        return None;
    }
    let mut local_n = Vec3::zeros();
    local_n[axis] = sign;
    Some((t_near, rotation * local_n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> [Vec3; 4] {
        [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ]
    }

    #[test]
    fn newell_matches_area() {
        let n = newell_normal(&square());
        assert_eq!(n, Vec3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn polygon_distance_inside_and_outside() {
        let v = square();
        let n = Vec3::z();
        assert!((point_polygon_distance(&Vec3::new(0.5, 0.5, 0.3), &v, &n) - 0.3).abs() < 1e-12);
        assert!((point_polygon_distance(&Vec3::new(2.0, 0.5, 0.0), &v, &n) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn box_sdf_center_and_above() {
        let r = Mat3::identity();
        let c = Vec3::new(0.0, 0.0, 0.0);
        let s = Vec3::new(2.0, 2.0, 1.0);
        assert!((box_signed_distance(&c, &r, &c, &s) + 0.5).abs() < 1e-12);
        assert!((box_signed_distance(&Vec3::new(0.0, 0.0, 0.6), &r, &c, &s) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn ray_hits_box_front_face() {
        let r = Mat3::identity();
        let hit = ray_box(&Vec3::new(0.0, 0.0, -5.0), &Vec3::z(), &r, &Vec3::zeros(), &Vec3::new(1.0, 1.0, 1.0), 0.0);
        let (t, n) = hit.unwrap();
        assert!((t - 4.5).abs() < 1e-12);
        assert_eq!(n, Vec3::new(0.0, 0.0, -1.0));
    }
}
