use roomsplat_core::fixtures::{bedroom, initialized_state, small_field_config, two_box};
use roomsplat_core::metrics::{evaluate, semantic_iou};
use roomsplat_core::render::{Background, RenderSettings, SceneView};
use roomsplat_core::sampler::{build_tsdf, sample_cameras, SamplerConfig};
use roomsplat_core::scene::SemanticLayout;

fn cams(layout: &SemanticLayout, n: usize) -> Vec<roomsplat_core::render::Camera> {
    let config = SamplerConfig { width: 48, height: 48, ..SamplerConfig::default() };
    sample_cameras(layout, n, &config, 11).unwrap()
}

#[test]
fn empty_scene_scores_zero_for_every_object_label() {
    let layout = bedroom();
    let s = initialized_state(&layout, 1, small_field_config(), 0);
    let field = &s.appearance().field;
    let view = SceneView {
        objects: &[],
        background: Some(Background { shell: layout.room(), field, palette: s.palette() }),
    };
    let iou = semantic_iou(&view, &layout, s.palette(), &cams(&layout, 12), &RenderSettings::default());
    let labels: Vec<&str> = iou.iter().map(|l| l.label.as_str()).collect();
    assert_eq!(labels, ["bed", "nightstand", "wardrobe"]);
    for l in &iou {
        assert_eq!(l.intersection, 0, "{}", l.label);
        assert_eq!(l.iou(), 0.0);
    }
}

#[test]
fn densely_filled_boxes_overlap_their_projection() {
    for layout in [two_box(), bedroom()] {
        let s = initialized_state(&layout, 1000, small_field_config(), 2);
        let w = s.world();
        let cams = cams(&layout, 12);
        let grid = build_tsdf(&layout, 0.1, 1.0).unwrap();
        let report = evaluate(&w.view(), &layout, s.palette(), &cams, &grid, &RenderSettings::default());
        for l in &report.iou {
            assert!(l.union > 0 && l.iou() >= 0.5, "{}: {}", l.label, l.iou());
        }
        assert!(report.mean_iou() >= 0.5);
        assert!(report.opacity_inside > report.opacity_outside);
        assert!((0.0..=1.0).contains(&report.free_voxel_coverage));
    }
}
