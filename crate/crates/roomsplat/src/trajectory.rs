//! Camera paths for presentation strips.
//!
//! `circle:<n>[:<radius>[:<height>]]` places `n` cameras on a horizontal
//! circle around the room's center, looking inward; the radius defaults to
//! 35% of the smaller horizontal extent and the height to 45% of the room.
//! `line:<n>:<x>,<y>,<z>:<x>,<y>,<z>` places them evenly on a segment,
//! looking along it.

use roomsplat_core::render::Camera;
use roomsplat_core::scene::SemanticLayout;
use roomsplat_core::Vec3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lens {
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
}

fn bad(spec: &str, why: &str) -> Error {
    Error::invalid(format!("trajectory `{spec}`: {why}"))
}

fn point(spec: &str, s: &str) -> Result<Vec3> {
    let v: Vec<f64> = s.split(',').map(|c| c.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad(spec, "bad coordinate"))?;
    match v[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(bad(spec, "points need three coordinates")),
    }
}

pub fn trajectory(spec: &str, layout: &SemanticLayout, lens: Lens) -> Result<Vec<Camera>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let n: usize = parts.get(1).and_then(|s| s.parse().ok()).filter(|&n| n > 0).ok_or_else(|| bad(spec, "camera count must be a positive integer"))?;
    let num = |i: usize| parts.get(i).map(|s| s.parse::<f64>().map_err(|_| bad(spec, "not a number"))).transpose();
    let cam = |p: Vec3, target: Vec3| Camera::looking_at(p, target, lens.fov_y, lens.width, lens.height).map_err(|e| bad(spec, &e.to_string()));
    match parts[0] {
        "circle" if parts.len() <= 4 => {
            let (lo, hi) = layout.room().bounds();
            let ext = hi - lo;
            let radius = num(2)?.unwrap_or(0.35 * ext.x.min(ext.y));
            let height = num(3)?.unwrap_or(lo.z + 0.45 * ext.z);
            let c = Vec3::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y), height);
            (0..n)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / n as f64;
                    cam(c + Vec3::new(radius * a.cos(), radius * a.sin(), 0.0), c)
                })
                .collect()
        }
        "line" if parts.len() == 4 => {
            let (a, b) = (point(spec, parts[2])?, point(spec, parts[3])?);
            let dir = b - a;
            if dir.norm() == 0.0 {
                return Err(bad(spec, "endpoints coincide"));
            }
            (0..n)
                .map(|i| {
                    let f = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                    let p = a + dir * f;
                    cam(p, p + dir)
                })
                .collect()
        }
        _ => Err(bad(spec, "expected circle:<n>[:<radius>[:<height>]] or line:<n>:<x,y,z>:<x,y,z>")),
    }
}
