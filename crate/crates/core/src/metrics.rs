//! Layout-adherence metrics.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::render::{render, render_layout_solid, render_objects, Camera, RenderSettings, SceneView};
use crate::sampler::{coverage_report, TsdfGrid};
use crate::scene::{SemanticLayout, SemanticPalette};

/// Intersection over union for one label, accumulated over all views.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelIou {
    pub label: String,
    pub intersection: usize,
    pub union: usize,
}

impl LabelIou {
    /// 0 when the label never appears in either map.
    pub fn iou(&self) -> f64 {
        if self.union == 0 {
            0.0
        } else {
            self.intersection as f64 / self.union as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// One entry per distinct box label, sorted by label.
    pub iou: Vec<LabelIou>,
    pub free_voxel_coverage: f64,
    /// Mean object-only alpha over pixels where a layout box is the first hit.
    pub opacity_inside: f64,
    /// Mean object-only alpha over all other pixels.
    pub opacity_outside: f64,
}

impl MetricsReport {
    /// Mean IoU over box labels that appear in at least one map.
    pub fn mean_iou(&self) -> f64 {
        let seen: Vec<f64> = self.iou.iter().filter(|l| l.union > 0).map(LabelIou::iou).collect();
        if seen.is_empty() {
            0.0
        } else {
            seen.iter().sum::<f64>() / seen.len() as f64
        }
    }
}

/// Labels a semantic map may contain: every box label and every shell label.
fn candidate_labels(layout: &SemanticLayout) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let labels = layout.boxes().iter().map(|b| b.label()).chain(layout.room().polygons().iter().map(|p| p.label()));
    for l in labels {
        if !out.iter().any(|o| o == l) {
            out.push(l.to_string());
        }
    }
    out
}

/// Per-label IoU between the scene's semantic render, quantized to the
/// nearest palette color, and the layout rendered as solid boxes.
pub fn semantic_iou(
    view: &SceneView<'_>,
    layout: &SemanticLayout,
    palette: &SemanticPalette,
    cams: &[Camera],
    settings: &RenderSettings,
) -> Vec<LabelIou> {
    let candidates = candidate_labels(layout);
    let colors: Vec<_> = candidates.iter().map(|l| palette.color_unit(l)).collect();
    let mut counts: BTreeMap<String, (usize, usize)> =
        layout.boxes().iter().map(|b| (b.label().to_string(), (0, 0))).collect();
    for cam in cams {
        let pred = render(view, cam, settings);
        let truth = render_layout_solid(layout, palette, cam);
        let quantize = |s: &crate::Vec3, d: f64| {
            d.is_finite().then(|| {
                let best = (0..colors.len()).min_by(|&a, &b| (colors[a] - s).norm_squared().total_cmp(&(colors[b] - s).norm_squared()));
                candidates[best.expect("layout has labels")].as_str()
            })
        };
        for i in 0..pred.len() {
            let p = quantize(&pred.semantic[i], pred.depth[i]);
            let t = quantize(&truth.semantic[i], truth.depth[i]);
            for (label, (inter, uni)) in counts.iter_mut() {
                let a = p == Some(label.as_str());
                let b = t == Some(label.as_str());
                *inter += (a && b) as usize;
                *uni += (a || b) as usize;
            }
        }
    }
    counts.into_iter().map(|(label, (intersection, union))| LabelIou { label, intersection, union }).collect()
}

/// Full report over a camera set.
pub fn evaluate(
    view: &SceneView<'_>,
    layout: &SemanticLayout,
    palette: &SemanticPalette,
    cams: &[Camera],
    grid: &TsdfGrid,
    settings: &RenderSettings,
) -> MetricsReport {
    let iou = semantic_iou(view, layout, palette, cams, settings);
    let coverage = coverage_report(cams, layout, grid);
    let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
    for cam in cams {
        let obj = render_objects(view.objects, cam, settings);
        let truth = render_layout_solid(layout, palette, cam);
        for (a, inside) in obj.alpha.iter().zip(&truth.alpha) {
            if *inside > 0.0 {
                si += a;
                ni += 1;
            } else {
                so += a;
                no += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    MetricsReport {
        iou,
        free_voxel_coverage: coverage.free_voxel_coverage,
        opacity_inside: mean(si, ni),
        opacity_outside: mean(so, no),
    }
}
