use alloc::vec::Vec;

use super::{BackgroundField, Camera, RenderBundle};
use crate::geom;
use crate::scene::{RoomShell, SemanticLayout, SemanticPalette};
use crate::{Mat3, Vec3};

// Hits closer than this along the (z = 1) camera ray are ignored.
const T_MIN: f64 = 1e-9;

pub(crate) struct ShellCache<'a> {
    polys: Vec<(&'a [Vec3], Vec3, Vec3)>,
}

pub(crate) struct BgHit {
    pub depth: f64,
    pub point: Vec3,
    pub normal: Vec3,
    pub semantic: Vec3,
}

impl<'a> ShellCache<'a> {
    pub fn new(shell: &'a RoomShell, palette: &SemanticPalette) -> Self {
        let polys = shell
            .polygons()
            .iter()
            .map(|p| (p.loop_vertices(), *p.normal(), palette.color_unit(p.label())))
            .collect();
        Self { polys }
    }

    /// Nearest polygon along camera ray `d`; `cw` maps camera to world.
    pub fn trace(&self, cam: &Camera, cw: &Mat3, d: &Vec3) -> Option<BgHit> {
        let dir = cw * d;
        let mut best: Option<(f64, usize)> = None;
        for (i, (v, n, _)) in self.polys.iter().enumerate() {
            if let Some(t) = geom::ray_polygon(&cam.position, &dir, v, n, T_MIN) {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, i));
                }
            }
        }
        let (t, i) = best?;
        let (_, n, sem) = &self.polys[i];
        Some(BgHit { depth: t, point: cam.position + dir * t, normal: facing(cw.transpose() * n, d), semantic: *sem })
    }
}

fn facing(n: Vec3, d: &Vec3) -> Vec3 {
    if n.dot(d) > 0.0 {
        -n
    } else {
        n
    }
}

fn rows(cam: &Camera) -> Vec<usize> {
    (0..cam.height as usize).collect()
}

/// Background-only maps: z-buffered shell polygons, camera-facing plane
/// normals, palette semantics and field color at the hit point. Alpha is 1
/// wherever a polygon was hit.
pub fn render_background(shell: &RoomShell, field: &BackgroundField, palette: &SemanticPalette, cam: &Camera) -> RenderBundle {
    let cache = ShellCache::new(shell, palette);
    let cw = cam.world_to_camera().transpose();
    let w = cam.width as usize;
    let lines = crate::par::map_ordered(&rows(cam), |&r| {
        (0..w).map(|c| cache.trace(cam, &cw, &cam.pixel_ray(r, c)).map(|h| (field.eval(&h.point), h))).collect::<Vec<_>>()
    });
    let mut out = RenderBundle::empty(w, cam.height as usize);
    for (i, px) in lines.into_iter().flatten().enumerate() {
        if let Some((rgb, h)) = px {
            out.color[i] = rgb;
            out.alpha[i] = 1.0;
            out.semantic[i] = h.semantic;
            out.normal[i] = h.normal;
            out.depth[i] = h.depth;
        }
    }
    out
}

/// Reference render of the layout with every box as a solid volume.
///
/// Color and semantics are the palette colors of whatever is hit first,
/// boxes or shell; alpha marks pixels where a box is the first hit.
pub fn render_layout_solid(layout: &SemanticLayout, palette: &SemanticPalette, cam: &Camera) -> RenderBundle {
    let cache = ShellCache::new(layout.room(), palette);
    let box_colors: Vec<Vec3> = layout.boxes().iter().map(|b| palette.color_unit(b.label())).collect();
    let wc = cam.world_to_camera();
    let cw = wc.transpose();
    let w = cam.width as usize;
    let lines = crate::par::map_ordered(&rows(cam), |&r| {
        (0..w)
            .map(|c| {
                let d = cam.pixel_ray(r, c);
                let dir = cw * d;
                let mut best = cache.trace(cam, &cw, &d).map(|h| (h.depth, h.normal, h.semantic, 0.0));
                for (b, col) in layout.boxes().iter().zip(&box_colors) {
                    if let Some((t, n)) = geom::ray_box(&cam.position, &dir, b.rotation(), b.translation(), b.size(), T_MIN) {
                        if best.is_none_or(|bb| t < bb.0) {
                            best = Some((t, facing(wc * n, &d), *col, 1.0));
                        }
                    }
                }
                best
            })
            .collect::<Vec<_>>()
    });
    let mut out = RenderBundle::empty(w, cam.height as usize);
    for (i, px) in lines.into_iter().flatten().enumerate() {
        if let Some((t, n, s, a)) = px {
            out.color[i] = s;
            out.semantic[i] = s;
            out.normal[i] = n;
            out.depth[i] = t;
            out.alpha[i] = a;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::FieldConfig;

    fn room() -> RoomShell {
        RoomShell::rectangular(Vec3::zeros(), Vec3::repeat(4.0)).unwrap()
    }

    #[test]
    fn center_pixel_sees_wall_two_meters_away() {
        let shell = room();
        let field = BackgroundField::new(FieldConfig::default(), Vec3::zeros(), Vec3::repeat(4.0), 0);
        let cam = Camera::new(Vec3::repeat(2.0), 0.0, 0.0, 1.0, 9, 9).unwrap();
        let b = render_background(&shell, &field, &SemanticPalette::indoor(), &cam);
        let c = 4 * 9 + 4;
        assert!((b.depth[c] - 2.0).abs() < 1e-12);
        assert!((b.normal[c] - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!(b.alpha.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn floor_pixels_carry_floor_semantics() {
        let shell = room();
        let field = BackgroundField::new(FieldConfig::default(), Vec3::zeros(), Vec3::repeat(4.0), 0);
        let palette = SemanticPalette::indoor();
        let cam = Camera::new(Vec3::repeat(2.0), -1.2, 0.0, 0.5, 5, 5).unwrap();
        let b = render_background(&shell, &field, &palette, &cam);
        assert_eq!(b.semantic[12], palette.color_unit("floor"));
    }

    #[test]
    fn solid_render_marks_boxes() {
        let layout = crate::fixtures::two_box();
        let palette = SemanticPalette::indoor();
        let sofa = layout.boxes()[0].translation();
        let cam = Camera::looking_at(Vec3::new(2.8, 2.8, 1.5), *sofa, 0.6, 15, 15).unwrap();
        let b = render_layout_solid(&layout, &palette, &cam);
        assert_eq!(b.alpha[7 * 15 + 7], 1.0);
        assert_eq!(b.semantic[7 * 15 + 7], palette.color_unit("sofa"));
        assert!(b.depth.iter().all(|d| d.is_finite()));
    }
}
