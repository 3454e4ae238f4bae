// Surfel splatting: binning, per-pixel compositing and its adjoint.
//
// All per-primitive math runs in camera space with the eye at the origin.
// A pixel ray is `d` with `d.z = 1`, so the ray parameter at a plane hit is
// the camera depth of the hit: `z = (n.p) / (n.d)`. Tangent coordinates of
// the hit are `u = t_u.(z d - p) / s_u`, likewise `v`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;

use super::background::ShellCache;
use super::composite::normalize_or_zero;
use super::{Camera, ParamGradients, RenderBundle, RenderSettings, SceneView, SurfelGrad, TILE};
use crate::scene::ObjectGaussians;
use crate::Vec3;

pub(crate) struct Prim {
    obj: u32,
    idx: u32,
    p: Vec3,
    tu: Vec3,
    tv: Vec3,
    n: Vec3,
    su: f64,
    sv: f64,
    np: f64,
    hu: Vec3,
    hv: Vec3,
    // +1 or -1 so that sign * n faces the camera.
    sign: f64,
    opacity: f64,
    color: Vec3,
    semantic: Vec3,
    depth: f64,
}

struct Grid {
    w: usize,
    h: usize,
    tx: usize,
    ty: usize,
}

impl Grid {
    fn new(cam: &Camera) -> Self {
        let (w, h) = (cam.width as usize, cam.height as usize);
        Self { w, h, tx: w.div_ceil(TILE), ty: h.div_ceil(TILE) }
    }

    fn count(&self) -> usize {
        self.tx * self.ty
    }

    // (col0, col1, row0, row1), exclusive ends.
    fn span(&self, t: usize) -> (usize, usize, usize, usize) {
        let (x, y) = ((t % self.tx) * TILE, (t / self.tx) * TILE);
        (x, (x + TILE).min(self.w), y, (y + TILE).min(self.h))
    }
}

struct Binned {
    prims: Vec<Prim>,
    tiles: Vec<Vec<u32>>,
    grid: Grid,
}

fn prepare(objects: &[ObjectGaussians], cam: &Camera, settings: &RenderSettings) -> Binned {
    let wc = cam.world_to_camera();
    let grid = Grid::new(cam);
    let mut prims = Vec::new();
    for (oi, o) in objects.iter().enumerate() {
        for (si, s) in o.surfels.iter().enumerate() {
            let p = wc * (s.position - cam.position);
            if p.z <= settings.near {
                continue;
            }
            let frame = wc * s.orientation;
            let (tu, tv, n) = (frame.column(0).into_owned(), frame.column(1).into_owned(), frame.column(2).into_owned());
            let np = n.dot(&p);
            if np.abs() < 1e-12 {
                continue;
            }
            let (su, sv) = (s.scale.x, s.scale.y);
            prims.push(Prim {
                obj: oi as u32,
                idx: si as u32,
                p,
                tu,
                tv,
                n,
                su,
                sv,
                np,
                hu: (tu * np - n * p.dot(&tu)) / su,
                hv: (tv * np - n * p.dot(&tv)) / sv,
                sign: if np > 0.0 { -1.0 } else { 1.0 },
                opacity: s.opacity,
                color: s.color,
                semantic: s.semantic,
                depth: p.z,
            });
        }
    }
    prims.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.obj.cmp(&b.obj)).then(a.idx.cmp(&b.idx)));

    let mut tiles = vec![Vec::new(); grid.count()];
    let f = cam.focal();
    let (cx, cy) = (0.5 * grid.w as f64, 0.5 * grid.h as f64);
    for (k, pr) in prims.iter().enumerate() {
        let (eu, ev) = (pr.tu * (settings.cutoff_sigma * pr.su), pr.tv * (settings.cutoff_sigma * pr.sv));
        let corners = [pr.p + eu + ev, pr.p + eu - ev, pr.p - eu + ev, pr.p - eu - ev];
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut whole = false;
        for c in &corners {
            if c.z <= settings.near {
                whole = true;
                break;
            }
            let (x, y) = (f * c.x / c.z + cx, f * c.y / c.z + cy);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let (c0, c1, r0, r1) = if whole {
            (0, grid.w - 1, 0, grid.h - 1)
        } else {
            if x1 < 0.0 || y1 < 0.0 || x0 >= grid.w as f64 || y0 >= grid.h as f64 {
                continue;
            }
            let clampi = |v: f64, hi: usize| (v.floor().max(0.0) as usize).min(hi - 1);
            (clampi(x0, grid.w), clampi(x1, grid.w), clampi(y0, grid.h), clampi(y1, grid.h))
        };
        for ty in r0 / TILE..=r1 / TILE {
            for tx in c0 / TILE..=c1 / TILE {
                tiles[ty * grid.tx + tx].push(k as u32);
            }
        }
    }
    Binned { prims, tiles, grid }
}

#[derive(Clone, Copy)]
struct Hit {
    slot: u32,
    a: f64,
    g: f64,
    u: f64,
    v: f64,
    z: f64,
    nd: f64,
    trans: f64,
    clamped: bool,
}

#[derive(Clone, Copy, Default)]
struct Acc {
    color: Vec3,
    semantic: Vec3,
    depth: f64,
    normal: Vec3,
    trans: f64,
}

fn shade(prims: &[Prim], list: &[u32], d: &Vec3, s: &RenderSettings, mut hits: Option<&mut Vec<Hit>>) -> Acc {
    let cut2 = s.cutoff_sigma * s.cutoff_sigma;
    let mut acc = Acc { trans: 1.0, ..Default::default() };
    for (slot, &k) in list.iter().enumerate() {
        let pr = &prims[k as usize];
        let nd = pr.n.dot(d);
        if nd.abs() < 1e-12 {
            continue;
        }
        let z = pr.np / nd;
        if z <= s.near {
            continue;
        }
        let u = pr.hu.dot(d) / nd;
        let v = pr.hv.dot(d) / nd;
        let r2 = u * u + v * v;
        if r2 > cut2 {
            continue;
        }
        let g = (-0.5 * r2).exp();
        let raw = pr.opacity * g;
        let clamped = raw >= s.alpha_max;
        let a = if clamped { s.alpha_max } else { raw };
        let w = acc.trans * a;
        acc.color += pr.color * w;
        acc.semantic += pr.semantic * w;
        acc.depth += z * w;
        acc.normal += pr.n * (pr.sign * w);
        if let Some(h) = hits.as_deref_mut() {
            h.push(Hit { slot: slot as u32, a, g, u, v, z, nd, trans: acc.trans, clamped });
        }
        acc.trans *= 1.0 - a;
        if acc.trans < s.min_transmittance {
            break;
        }
    }
    acc
}

pub(crate) fn render(objects: &[ObjectGaussians], cam: &Camera, s: &RenderSettings) -> RenderBundle {
    let b = prepare(objects, cam, s);
    let ids: Vec<usize> = (0..b.grid.count()).collect();
    let tiles = crate::par::map_ordered(&ids, |&t| {
        let (c0, c1, r0, r1) = b.grid.span(t);
        let mut out = Vec::with_capacity((c1 - c0) * (r1 - r0));
        for r in r0..r1 {
            for c in c0..c1 {
                out.push(shade(&b.prims, &b.tiles[t], &cam.pixel_ray(r, c), s, None));
            }
        }
        out
    });
    let mut out = RenderBundle::empty(b.grid.w, b.grid.h);
    for (t, accs) in tiles.into_iter().enumerate() {
        let (c0, c1, r0, _) = b.grid.span(t);
        for (j, acc) in accs.into_iter().enumerate() {
            let i = (r0 + j / (c1 - c0)) * b.grid.w + c0 + j % (c1 - c0);
            let a = 1.0 - acc.trans;
            if a > 0.0 {
                out.alpha[i] = a;
                out.color[i] = acc.color / a;
                out.semantic[i] = acc.semantic / a;
                out.depth[i] = acc.depth / a;
                out.normal[i] = normalize_or_zero(acc.normal);
            }
        }
    }
    out
}

// Gradients of the loss with respect to one pixel's accumulators.
struct AccGrad {
    color: Vec3,
    semantic: Vec3,
    depth: f64,
    normal: Vec3,
    alpha: f64,
}

struct TileGrad {
    surfels: Vec<SurfelGrad>,
    tables: BTreeMap<usize, f64>,
    weight: Vec<f64>,
    bias: Vec3,
}

pub(crate) fn backward(view: &SceneView<'_>, cam: &Camera, s: &RenderSettings, up: &RenderBundle) -> ParamGradients {
    let b = prepare(view.objects, cam, s);
    let wc = cam.world_to_camera();
    let cw = wc.transpose();
    let cache = view.background.map(|bg| ShellCache::new(bg.shell, bg.palette));
    let ids: Vec<usize> = (0..b.grid.count()).collect();
    let tiles = crate::par::map_ordered(&ids, |&t| {
        let list = &b.tiles[t];
        let mut tg = TileGrad {
            surfels: vec![SurfelGrad::default(); list.len()],
            tables: BTreeMap::new(),
            weight: view.background.map(|bg| vec![0.0; bg.field.weight().len()]).unwrap_or_default(),
            bias: Vec3::zeros(),
        };
        let mut hits = Vec::new();
        let (c0, c1, r0, r1) = b.grid.span(t);
        for r in r0..r1 {
            for c in c0..c1 {
                let i = r * b.grid.w + c;
                let d = cam.pixel_ray(r, c);
                hits.clear();
                let acc = shade(&b.prims, list, &d, s, Some(&mut hits));
                let bg = match (&cache, view.background) {
                    (Some(cache), Some(bgv)) => {
                        cache.trace(cam, &cw, &d).map(|h| {
                            let enc = bgv.field.encode(&h.point);
                            let rgb = bgv.field.decode_raw(&enc.features).map(|v| v.clamp(0.0, 1.0));
                            (h, enc, rgb)
                        })
                    }
                    _ => None,
                };
                let a = 1.0 - acc.trans;
                let d_obj = if a > 0.0 { acc.depth / a } else { f64::INFINITY };
                let d_bg = bg.as_ref().map_or(f64::INFINITY, |x| x.0.depth);
                let g_bg_color;
                if a > 0.0 && d_obj <= d_bg {
                    let (n_bg, i_bg, s_bg) = bg.as_ref().map_or((Vec3::zeros(), Vec3::zeros(), Vec3::zeros()), |x| (x.0.normal, x.2, x.0.semantic));
                    let mut g = AccGrad { color: up.color[i], semantic: up.semantic[i], depth: 0.0, normal: Vec3::zeros(), alpha: 0.0 };
                    g.alpha -= up.color[i].dot(&i_bg) + up.semantic[i].dot(&s_bg);
                    if bg.is_some() {
                        g.depth = up.depth[i];
                        g.alpha -= up.depth[i] * d_bg;
                    } else {
                        g.depth = up.depth[i] / a;
                        g.alpha -= up.depth[i] * acc.depth / (a * a);
                        g.alpha += up.alpha[i];
                    }
                    let nacc_len = acc.normal.norm();
                    if nacc_len > 0.0 {
                        let n_o = acc.normal / nacc_len;
                        let m = n_o * a + n_bg * (1.0 - a);
                        let m_len = m.norm();
                        if m_len > 0.0 {
                            let nn = m / m_len;
                            let gm = (up.normal[i] - nn * nn.dot(&up.normal[i])) / m_len;
                            g.alpha += gm.dot(&(n_o - n_bg));
                            let gno = gm * a;
                            g.normal = (gno - n_o * n_o.dot(&gno)) / nacc_len;
                        }
                    }
                    backprop_pixel(&b.prims, list, &hits, &d, &g, &mut tg.surfels);
                    g_bg_color = up.color[i] * (1.0 - a);
                } else {
                    g_bg_color = up.color[i];
                }
                if let (Some((_, enc, _)), Some(bgv)) = (&bg, view.background) {
                    let tables = &mut tg.tables;
                    bgv.field.backprop(enc, &g_bg_color, &mut |k, v| *tables.entry(k).or_insert(0.0) += v, &mut tg.weight, &mut tg.bias);
                }
            }
        }
        tg
    });

    let mut out = ParamGradients::zeros(view);
    for (t, tg) in tiles.into_iter().enumerate() {
        for (slot, g) in tg.surfels.into_iter().enumerate() {
            let pr = &b.prims[b.tiles[t][slot] as usize];
            let dst = &mut out.objects[pr.obj as usize][pr.idx as usize];
            *dst += SurfelGrad { position: cw * g.position, rotation: cw * g.rotation, ..g };
        }
        if let Some(f) = out.field.as_mut() {
            for (k, v) in tg.tables {
                f.tables[k] += v;
            }
            for (dst, v) in f.weight.iter_mut().zip(tg.weight) {
                *dst += v;
            }
            f.bias += tg.bias;
        }
    }
    out
}

// Camera-space gradients for every primitive hit by one pixel ray. Position
// and rotation are rotated back to world space when tiles are merged.
fn backprop_pixel(prims: &[Prim], list: &[u32], hits: &[Hit], d: &Vec3, g: &AccGrad, out: &mut [SurfelGrad]) {
    let mut suffix = 0.0;
    for h in hits.iter().rev() {
        let pr = &prims[list[h.slot as usize] as usize];
        let w = h.trans * h.a;
        let nf = pr.n * pr.sign;
        let q = g.color.dot(&pr.color) + g.semantic.dot(&pr.semantic) + g.depth * h.z + g.normal.dot(&nf) + g.alpha;
        let da = h.trans * q - suffix / (1.0 - h.a);
        suffix += w * q;

        let o = &mut out[h.slot as usize];
        o.color += g.color * w;
        let (mut gu, mut gv) = (0.0, 0.0);
        if !h.clamped {
            o.opacity += da * h.g;
            let gg = da * pr.opacity;
            gu = -gg * h.u * h.g;
            gv = -gg * h.v * h.g;
        }
        let gz = g.depth * w;
        o.scale.x -= gu * h.u / pr.su;
        o.scale.y -= gv * h.v / pr.sv;

        let du_dp = (pr.n * (pr.tu.dot(d) / h.nd) - pr.tu) / pr.su;
        let dv_dp = (pr.n * (pr.tv.dot(d) / h.nd) - pr.tv) / pr.sv;
        let dz_dp = pr.n / h.nd;
        o.position += du_dp * gu + dv_dp * gv + dz_dp * gz;

        let r = d * h.z - pr.p;
        let m = -pr.n.cross(&r) / h.nd;
        let du_dr = (m * pr.tu.dot(d) + pr.tu.cross(&r)) / pr.su;
        let dv_dr = (m * pr.tv.dot(d) + pr.tv.cross(&r)) / pr.sv;
        o.rotation += du_dr * gu + dv_dr * gv + m * gz + pr.n.cross(&g.normal) * (pr.sign * w);
    }
}
