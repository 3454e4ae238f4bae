#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;

use super::RenderBundle;
use crate::Vec3;

/// Unit vector, or zero for a zero input. Written out so the result does not
/// depend on how a linear-algebra backend orders the sum.
pub fn normalize_or_zero(v: Vec3) -> Vec3 {
    let n = (v.x * v.x + v.y * v.y + v.z * v.z).sqrt();
    if n > 0.0 {
        Vec3::new(v.x / n, v.y / n, v.z / n)
    } else {
        Vec3::zeros()
    }
}

fn mix(a: f64, o: Vec3, b: Vec3) -> Vec3 {
    let k = 1.0 - a;
    Vec3::new(a * o.x + k * b.x, a * o.y + k * b.y, a * o.z + k * b.z)
}

/// Depth-aware fusion of an objects-only bundle with a background bundle.
///
/// Where objects are visible and not behind the background
/// (`A > 0` and `D_o <= D_b`) every map is `A R_o + (1 - A) R_b`, with the
/// normal renormalized and depth falling back to `D_o` where no wall was hit.
/// Elsewhere the background wins. The output opacity is 1 wherever the room
/// shell was hit.
///
/// # Panics
/// If the bundles differ in size.
pub fn composite(obj: &RenderBundle, bg: &RenderBundle) -> RenderBundle {
    assert_eq!((obj.width, obj.height), (bg.width, bg.height), "bundle sizes differ");
    let mut out = RenderBundle::empty(obj.width, obj.height);
    for i in 0..obj.len() {
        let hit = bg.depth[i].is_finite();
        let a = obj.alpha[i];
        if a > 0.0 && obj.depth[i] <= bg.depth[i] {
            out.color[i] = mix(a, obj.color[i], bg.color[i]);
            out.semantic[i] = mix(a, obj.semantic[i], bg.semantic[i]);
            out.normal[i] = normalize_or_zero(mix(a, obj.normal[i], bg.normal[i]));
            out.depth[i] = if hit { a * obj.depth[i] + (1.0 - a) * bg.depth[i] } else { obj.depth[i] };
            out.alpha[i] = if hit { 1.0 } else { a };
        } else {
            out.color[i] = bg.color[i];
            out.semantic[i] = bg.semantic[i];
            out.normal[i] = bg.normal[i];
            out.depth[i] = bg.depth[i];
            out.alpha[i] = if hit { 1.0 } else { 0.0 };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(alpha: f64, depth: f64, c: f64) -> RenderBundle {
        let mut b = RenderBundle::empty(1, 1);
        b.alpha[0] = alpha;
        b.depth[0] = depth;
        b.color[0] = Vec3::repeat(c);
        b.semantic[0] = Vec3::repeat(c);
        b.normal[0] = Vec3::new(0.0, 0.0, -1.0);
        b
    }

    #[test]
    fn opaque_front_object_wins() {
        let out = composite(&one(1.0, 1.0, 0.2), &one(1.0, 3.0, 0.9));
        assert_eq!(out.color[0], Vec3::repeat(0.2));
        assert_eq!(out.depth[0], 1.0);
        assert_eq!(out.alpha[0], 1.0);
    }

    #[test]
    fn transparent_or_hidden_object_gives_background() {
        let bg = one(1.0, 3.0, 0.9);
        for obj in [one(0.0, 1.0, 0.2), one(0.7, 4.0, 0.2)] {
            let out = composite(&obj, &bg);
            assert_eq!(out.color[0], bg.color[0]);
            assert_eq!(out.depth[0], 3.0);
        }
    }

    #[test]
    fn escaped_background_keeps_object_alpha_and_depth() {
        let out = composite(&one(0.4, 2.0, 1.0), &RenderBundle::empty(1, 1));
        assert_eq!(out.alpha[0], 0.4);
        assert_eq!(out.depth[0], 2.0);
        assert_eq!(out.color[0], Vec3::repeat(0.4));
    }
}
