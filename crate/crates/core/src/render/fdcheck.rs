//! Central finite-difference check of [`backward`](super::backward).
//!
//! The loss is `sum(upstream * render(view))` over all maps (infinite depths
//! skipped). Each parameter is nudged by `±step` and the numeric slope is
//! compared with the analytic gradient.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Rotation3;
#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;

use super::{backward, render, Background, BackgroundField, Camera, RenderBundle, RenderSettings, SceneView};
use crate::scene::{ObjectGaussians, RoomShell, SemanticPalette};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradMismatch {
    pub param: String,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheck {
    pub checked: usize,
    pub worst_relative: f64,
    pub failures: Vec<GradMismatch>,
}

/// `|a - n| < rel * max(|a|, |n|)`, or an absolute `abs_tol` when both are
/// below `small`.
pub fn grad_close(analytic: f64, numeric: f64, rel: f64, small: f64, abs_tol: f64) -> bool {
    let mag = analytic.abs().max(numeric.abs());
    let diff = (analytic - numeric).abs();
    if mag < small {
        diff < abs_tol
    } else {
        diff < rel * mag
    }
}

/// `sum(upstream * bundle)`, skipping non-finite depths.
pub fn weighted_sum(bundle: &RenderBundle, up: &RenderBundle) -> f64 {
    let mut s = 0.0;
    for i in 0..bundle.len() {
        s += bundle.color[i].dot(&up.color[i]) + bundle.semantic[i].dot(&up.semantic[i]) + bundle.normal[i].dot(&up.normal[i]);
        s += bundle.alpha[i] * up.alpha[i];
        if bundle.depth[i].is_finite() {
            s += bundle.depth[i] * up.depth[i];
        }
    }
    s
}

pub struct Scene<'a> {
    pub objects: Vec<ObjectGaussians>,
    pub background: Option<(&'a RoomShell, BackgroundField, &'a SemanticPalette)>,
}

impl Scene<'_> {
    fn loss(&self, cam: &Camera, s: &RenderSettings, up: &RenderBundle) -> f64 {
        let bg = self.background.as_ref().map(|(shell, field, palette)| Background { shell, field, palette });
        weighted_sum(&render(&SceneView { objects: &self.objects, background: bg }, cam, s), up)
    }
}

/// Checks every surfel parameter and up to `field_samples` table entries
/// (those with nonzero analytic gradient, in index order) plus every
/// decoder weight and bias entry. Tolerances follow [`grad_close`] with
/// `rel = 1e-2`, `small = 1e-4`, `abs_tol = 1e-6`.
pub fn check_gradients(scene: &Scene<'_>, cam: &Camera, s: &RenderSettings, up: &RenderBundle, step: f64, field_samples: usize) -> GradCheck {
    let bg = scene.background.as_ref().map(|(shell, field, palette)| Background { shell, field, palette });
    let view = SceneView { objects: &scene.objects, background: bg };
    let grads = backward(&view, cam, s, up).expect("upstream shape matches");
    let mut report = GradCheck::default();
    let mut compare = |name: String, analytic: f64, plus: f64, minus: f64| {
        let numeric = (plus - minus) / (2.0 * step);
        report.checked += 1;
        let mag = analytic.abs().max(numeric.abs());
        if mag >= 1e-4 {
            report.worst_relative = report.worst_relative.max((analytic - numeric).abs() / mag);
        }
        if !grad_close(analytic, numeric, 1e-2, 1e-4, 1e-6) {
            report.failures.push(GradMismatch { param: name, analytic, numeric });
        }
    };
    let eval = |edit: &dyn Fn(&mut Scene<'_>)| {
        let mut copy = Scene { objects: scene.objects.clone(), background: scene.background.clone() };
        edit(&mut copy);
        copy.loss(cam, s, up)
    };
    for (o, obj) in scene.objects.iter().enumerate() {
        for i in 0..obj.len() {
            let g = grads.objects[o][i];
            for k in 0..3 {
                let at = |h: f64| eval(&|sc: &mut Scene<'_>| sc.objects[o].surfels[i].position[k] += h);
                compare(format!("obj{o}/surfel{i}/position[{k}]"), g.position[k], at(step), at(-step));
                let at = |h: f64| {
                    eval(&|sc: &mut Scene<'_>| {
                        let mut axis = Vec3::zeros();
                        axis[k] = h;
                        let r = &mut sc.objects[o].surfels[i].orientation;
                        *r = Rotation3::new(axis).matrix() * *r;
                    })
                };
                compare(format!("obj{o}/surfel{i}/rotation[{k}]"), g.rotation[k], at(step), at(-step));
                let at = |h: f64| eval(&|sc: &mut Scene<'_>| sc.objects[o].surfels[i].color[k] += h);
                compare(format!("obj{o}/surfel{i}/color[{k}]"), g.color[k], at(step), at(-step));
            }
            for k in 0..2 {
                let at = |h: f64| eval(&|sc: &mut Scene<'_>| sc.objects[o].surfels[i].scale[k] += h);
                compare(format!("obj{o}/surfel{i}/scale[{k}]"), g.scale[k], at(step), at(-step));
            }
            let at = |h: f64| eval(&|sc: &mut Scene<'_>| sc.objects[o].surfels[i].opacity += h);
            compare(format!("obj{o}/surfel{i}/opacity"), g.opacity, at(step), at(-step));
        }
    }
    if let (Some(fg), Some((_, field, _))) = (&grads.field, &scene.background) {
        let picked: Vec<usize> = (0..fg.tables.len()).filter(|&k| fg.tables[k] != 0.0).take(field_samples).collect();
        for k in picked {
            let at = |h: f64| eval(&|sc: &mut Scene<'_>| sc.background.as_mut().unwrap().1.params_mut().0[k] += h);
            compare(format!("field/table[{k}]"), fg.tables[k], at(step), at(-step));
        }
        for k in 0..field.weight().len() {
            let at = |h: f64| eval(&|sc: &mut Scene<'_>| sc.background.as_mut().unwrap().1.params_mut().1[k] += h);
            compare(format!("field/weight[{k}]"), fg.weight[k], at(step), at(-step));
        }
        for k in 0..3 {
            let at = |h: f64| eval(&|sc: &mut Scene<'_>| sc.background.as_mut().unwrap().1.params_mut().2[k] += h);
            compare(format!("field/bias[{k}]"), fg.bias[k], at(step), at(-step));
        }
    }
    report
}
