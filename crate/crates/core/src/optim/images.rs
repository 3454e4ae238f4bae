//! Conversions between render bundles and diffusion-side images.

use alloc::vec::Vec;

use crate::diffusion::{Codec, CodecError, ConditionSet, ProviderError, Tensor};
use crate::render::RenderBundle;
use crate::Vec3;

fn vec3_image(v: &[Vec3], h: usize, w: usize, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_fn(3, h, w, |c, y, x| f(v[y * w + x][c]))
}

pub fn color_image(b: &RenderBundle) -> Tensor {
    vec3_image(&b.color, b.height, b.width, |v| v)
}

pub fn semantic_image(b: &RenderBundle) -> Tensor {
    vec3_image(&b.semantic, b.height, b.width, |v| v)
}

/// Camera-space normals remapped from [-1, 1] to [0, 1]; no-hit pixels are 0.5.
pub fn normal_image(b: &RenderBundle) -> Tensor {
    vec3_image(&b.normal, b.height, b.width, |v| 0.5 * (v + 1.0))
}

/// Inverse depth, 0 where nothing was hit.
pub fn inverse_depth_image(b: &RenderBundle) -> Tensor {
    Tensor::from_vec(1, b.height, b.width, b.inverse_depth()).expect("bundle is consistent")
}

/// Remapped normal followed by inverse depth replicated over three channels.
pub fn geometry_image(b: &RenderBundle) -> Tensor {
    let n = normal_image(b);
    let d = inverse_depth_image(b);
    Tensor::concat(&[&n, &d, &d, &d]).expect("same resolution")
}

/// Semantic-only conditions, as used for geometry refinement.
pub fn geometry_conditions(b: &RenderBundle) -> ConditionSet {
    ConditionSet::new(semantic_image(b), None, None, true).expect("bundle is consistent")
}

/// Semantic, normal and depth conditions, as used for appearance generation.
pub fn appearance_conditions(b: &RenderBundle) -> ConditionSet {
    ConditionSet::new(semantic_image(b), Some(normal_image(b)), Some(inverse_depth_image(b)), true)
        .expect("bundle is consistent")
}

pub fn encode_geometry(codec: Codec, b: &RenderBundle) -> Result<Tensor, ProviderError> {
    Ok(codec.encode(&geometry_image(b))?)
}

pub fn encode_color(codec: Codec, b: &RenderBundle) -> Result<Tensor, ProviderError> {
    Ok(codec.encode(&color_image(b))?)
}

/// Upstream render gradient for a gradient on the geometry image.
pub fn geometry_image_adjoint(b: &RenderBundle, g: &Tensor) -> RenderBundle {
    let (h, w) = (b.height, b.width);
    let mut up = RenderBundle::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            up.normal[i] = Vec3::new(g.at(0, y, x), g.at(1, y, x), g.at(2, y, x)) * 0.5;
            let d = b.depth[i];
            if d.is_finite() && d > 0.0 {
                up.depth[i] = -(g.at(3, y, x) + g.at(4, y, x) + g.at(5, y, x)) / (d * d);
            }
        }
    }
    up
}

/// Upstream render gradient for a gradient on the color image.
pub fn color_image_adjoint(b: &RenderBundle, g: &Tensor) -> RenderBundle {
    let (h, w) = (b.height, b.width);
    let mut up = RenderBundle::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            up.color[y * w + x] = Vec3::new(g.at(0, y, x), g.at(1, y, x), g.at(2, y, x));
        }
    }
    up
}

/// Latent gradient pulled back to image space.
pub fn latent_to_image_grad(codec: Codec, g: &Tensor) -> Tensor {
    codec.encode_adjoint(g)
}

/// Rows of a 3-channel image as per-pixel vectors.
pub fn image_pixels(t: &Tensor) -> Vec<Vec3> {
    let (_, h, w) = t.shape();
    (0..h * w).map(|i| Vec3::new(t.at(0, i / w, i % w), t.at(1, i / w, i % w), t.at(2, i / w, i % w))).collect()
}

pub(crate) fn check_codec(codec: Codec, b: &RenderBundle) -> Result<(), ProviderError> {
    codec.latent_size(b.height, b.width).map(|_| ()).map_err(|e: CodecError| e.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_adjoint_matches_finite_differences() {
        let mut b = RenderBundle::empty(3, 2);
        for i in 0..6 {
            b.normal[i] = Vec3::new(0.1 * i as f64, -0.3, 0.9).normalize();
            b.depth[i] = if i == 4 { f64::INFINITY } else { 1.0 + 0.4 * i as f64 };
        }
        let g = Tensor::from_fn(6, 2, 3, |c, y, x| (c as f64 - 2.5) * 0.3 + (y * 3 + x) as f64 * 0.1);
        let up = geometry_image_adjoint(&b, &g);
        let h = 1e-6;
        for i in [0usize, 2, 5] {
            let mut p = b.clone();
            p.depth[i] += h;
            let mut m = b.clone();
            m.depth[i] -= h;
            let fd = (geometry_image(&p).dot(&g) - geometry_image(&m).dot(&g)) / (2.0 * h);
            assert!((fd - up.depth[i]).abs() < 1e-6);
        }
        assert_eq!(up.depth[4], 0.0);
        let mut p = b.clone();
        p.normal[1].y += h;
        let mut m = b.clone();
        m.normal[1].y -= h;
        let fd = (geometry_image(&p).dot(&g) - geometry_image(&m).dot(&g)) / (2.0 * h);
        assert!((fd - up.normal[1].y).abs() < 1e-8);
    }

    #[test]
    fn no_hit_pixels_encode_to_neutral_values() {
        let b = RenderBundle::empty(2, 2);
        let g = geometry_image(&b);
        assert!((0..4).all(|i| g.at(0, i / 2, i % 2) == 0.5 && g.at(3, i / 2, i % 2) == 0.0));
    }
}
