use rand::Rng as _;
use roomsplat_core::fixtures::random_splat_scene;
use roomsplat_core::nalgebra::Vector2;
use roomsplat_core::render::fdcheck::{check_gradients, Scene};
use roomsplat_core::render::{
    backward, composite, render, render_background, render_objects, Background, BackgroundField, Camera, FieldConfig,
    RenderBundle, RenderSettings, SceneView,
};
use roomsplat_core::scene::{ObjectGaussians, SemanticPalette, Surfel};
use roomsplat_core::{seeded_rng, Mat3, Vec3};

fn random_upstream(seed: u64, w: usize, h: usize) -> RenderBundle {
    let mut rng = seeded_rng(seed, 77);
    let mut v = || Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let mut up = RenderBundle::zeros(w, h);
    for i in 0..w * h {
        up.color[i] = v();
        up.semantic[i] = v();
        up.normal[i] = v();
        let s = v();
        up.alpha[i] = s.x;
        up.depth[i] = 0.2 * s.y;
    }
    up
}

fn smooth() -> RenderSettings {
    // A wide cutoff keeps the loss smooth under finite-difference nudges.
    RenderSettings { cutoff_sigma: 8.0, ..Default::default() }
}

fn disk(position: Vec3, scale: f64, opacity: f64, color: Vec3) -> Surfel {
    // Facing a camera that looks along +x.
    Surfel {
        position,
        orientation: Mat3::from_columns(&[Vec3::y(), Vec3::z(), -Vec3::x()]),
        scale: Vector2::new(scale, scale),
        opacity,
        color,
        semantic: Vec3::new(0.1, 0.2, 0.3),
    }
}

fn obj(surfels: Vec<Surfel>) -> Vec<ObjectGaussians> {
    vec![ObjectGaussians { label: "bed".into(), surfels }]
}

fn axis_cam(w: u32) -> Camera {
    Camera::new(Vec3::zeros(), 0.0, 0.0, 1.0, w, w).unwrap()
}

#[test]
fn empty_scene_is_transparent() {
    let b = render_objects(&[], &axis_cam(8), &RenderSettings::default());
    assert!(b.alpha.iter().all(|&a| a == 0.0));
    assert!(b.depth.iter().all(|d| *d == f64::INFINITY));
}

#[test]
fn facing_disk_on_axis_covers_center() {
    let color = Vec3::new(0.9, 0.2, 0.4);
    let b = render_objects(&obj(vec![disk(Vec3::new(2.0, 0.0, 0.0), 5.0, 1.0, color)]), &axis_cam(9), &RenderSettings::default());
    let c = 4 * 9 + 4;
    assert!(b.alpha[c] >= 0.99);
    assert!((b.color[c] - color).norm() < 1e-12);
    assert!((b.normal[c] - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    assert!((b.depth[c] - 2.0).abs() < 1e-12);
}

#[test]
fn nearer_opaque_disk_hides_farther_one() {
    let near = disk(Vec3::new(1.0, 0.0, 0.0), 5.0, 1.0, Vec3::new(1.0, 0.0, 0.0));
    let far = disk(Vec3::new(2.0, 0.0, 0.0), 5.0, 1.0, Vec3::new(0.0, 1.0, 0.0));
    let b = render_objects(&obj(vec![far, near]), &axis_cam(9), &RenderSettings::default());
    let c = 4 * 9 + 4;
    assert!((b.color[c] - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-2);
    assert!((b.depth[c] - 1.0).abs() < 1e-2);
}

#[test]
fn adding_a_primitive_never_lowers_alpha() {
    for seed in 0..10 {
        let (objects, _, cam) = random_splat_scene(seed, 16, 16);
        let before = render_objects(&objects, &cam, &RenderSettings::default());
        let mut more = objects.clone();
        more[0].surfels.push(disk(Vec3::new(1.7, 0.05, -0.1), 0.2, 0.6, Vec3::repeat(0.3)));
        let after = render_objects(&more, &cam, &RenderSettings::default());
        for i in 0..before.len() {
            assert!((0.0..=1.0).contains(&after.alpha[i]));
            assert!(after.alpha[i] >= before.alpha[i], "seed {seed} pixel {i}");
        }
    }
}

#[test]
fn bundle_invariants_hold() {
    for seed in 0..10 {
        let (objects, shell, cam) = random_splat_scene(seed, 24, 20);
        let field = BackgroundField::new(FieldConfig::default(), shell.bounds().0, shell.bounds().1, 3);
        let palette = SemanticPalette::indoor();
        let view = SceneView { objects: &objects, background: Some(Background { shell: &shell, field: &field, palette: &palette }) };
        let b = render(&view, &cam, &RenderSettings::default());
        for i in 0..b.len() {
            assert!((0.0..=1.0).contains(&b.alpha[i]));
            if b.alpha[i] > 1e-3 {
                assert!((b.normal[i].norm() - 1.0).abs() < 1e-3);
            }
            assert!(b.depth[i] > 0.0);
        }
    }
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let (objects, shell, cam) = random_splat_scene(4, 16, 16);
    let field = BackgroundField::new(FieldConfig::default(), shell.bounds().0, shell.bounds().1, 3);
    let palette = SemanticPalette::indoor();
    let view = SceneView { objects: &objects, background: Some(Background { shell: &shell, field: &field, palette: &palette }) };
    let g = backward(&view, &cam, &RenderSettings::default(), &RenderBundle::zeros(16, 16)).unwrap();
    assert!(g.is_zero());
    assert!(backward(&view, &cam, &RenderSettings::default(), &RenderBundle::zeros(8, 16)).is_err());
}

#[test]
fn color_gradient_is_the_blend_weight() {
    let d = disk(Vec3::new(2.0, 0.05, -0.02), 0.3, 0.7, Vec3::repeat(0.5));
    let objects = obj(vec![d]);
    let cam = axis_cam(9);
    let mut up = RenderBundle::zeros(9, 9);
    let c = 4 * 9 + 4;
    up.color[c] = Vec3::new(1.0, 0.0, 0.0);
    let g = backward(&SceneView { objects: &objects, background: None }, &cam, &RenderSettings::default(), &up).unwrap();
    let a = render_objects(&objects, &cam, &RenderSettings::default()).alpha[c];
    assert!((g.objects[0][0].color.x - a).abs() < 1e-12);
    assert_eq!(g.objects[0][0].color.y, 0.0);
}

#[test]
fn opacity_gradient_is_positive_for_bright_disk_over_dark_wall() {
    let (_, shell, cam) = random_splat_scene(0, 9, 9);
    let mut field = BackgroundField::new(FieldConfig::default(), shell.bounds().0, shell.bounds().1, 0);
    field.params_mut().0.iter_mut().for_each(|v| *v = 0.0);
    *field.params_mut().2 = Vec3::repeat(0.1);
    let palette = SemanticPalette::indoor();
    let objects = obj(vec![disk(Vec3::new(2.0, 0.0, 0.0), 0.4, 0.5, Vec3::repeat(0.9))]);
    let view = SceneView { objects: &objects, background: Some(Background { shell: &shell, field: &field, palette: &palette }) };
    let mut up = RenderBundle::zeros(9, 9);
    up.color[4 * 9 + 4] = Vec3::repeat(1.0);
    let g = backward(&view, &cam, &RenderSettings::default(), &up).unwrap();
    assert!(g.objects[0][0].opacity > 0.0);
}

#[test]
fn gradients_match_finite_differences_objects_only() {
    for seed in 0..6 {
        let (objects, _, cam) = random_splat_scene(seed, 16, 16);
        let mut up = random_upstream(seed, 16, 16);
        // Without a background the normalized depth and normal appear out of
        // nothing at the support boundary; only score pixels with coverage.
        let base = render_objects(&objects, &cam, &smooth());
        for i in 0..up.len() {
            if base.alpha[i] < 1e-6 {
                up.depth[i] = 0.0;
                up.normal[i] = Vec3::zeros();
            }
        }
        let scene = Scene { objects, background: None };
        let r = check_gradients(&scene, &cam, &smooth(), &up, 1e-4, 0);
        assert!(r.failures.is_empty(), "seed {seed}: {:?}", r.failures);
    }
}

#[test]
fn gradients_match_finite_differences_with_background() {
    let palette = SemanticPalette::indoor();
    for seed in 10..14 {
        let (objects, shell, cam) = random_splat_scene(seed, 16, 16);
        let cfg = FieldConfig { levels: 3, log2_table_size: 8, init_range: 0.1, ..Default::default() };
        let field = BackgroundField::new(cfg, shell.bounds().0, shell.bounds().1, seed);
        let up = random_upstream(seed, 16, 16);
        let scene = Scene { objects, background: Some((&shell, field, &palette)) };
        let r = check_gradients(&scene, &cam, &smooth(), &up, 1e-4, 40);
        assert!(r.checked > 40);
        assert!(r.failures.is_empty(), "seed {seed}: {:?}", r.failures);
    }
}

#[test]
fn composite_matches_split_render() {
    let (objects, shell, cam) = random_splat_scene(2, 20, 20);
    let field = BackgroundField::new(FieldConfig::default(), shell.bounds().0, shell.bounds().1, 3);
    let palette = SemanticPalette::indoor();
    let s = RenderSettings::default();
    let view = SceneView { objects: &objects, background: Some(Background { shell: &shell, field: &field, palette: &palette }) };
    let whole = render(&view, &cam, &s);
    let split = composite(&render_objects(&objects, &cam, &s), &render_background(&shell, &field, &palette, &cam));
    assert_eq!(whole, split);
}

#[test]
fn rendering_is_bitwise_repeatable() {
    let (objects, shell, cam) = random_splat_scene(9, 40, 33);
    let field = BackgroundField::new(FieldConfig::default(), shell.bounds().0, shell.bounds().1, 3);
    let palette = SemanticPalette::indoor();
    let view = SceneView { objects: &objects, background: Some(Background { shell: &shell, field: &field, palette: &palette }) };
    let s = RenderSettings::default();
    assert_eq!(render(&view, &cam, &s), render(&view, &cam, &s));
    let up = random_upstream(1, 40, 33);
    assert_eq!(backward(&view, &cam, &s, &up).unwrap(), backward(&view, &cam, &s, &up).unwrap());
}

#[test]
fn background_color_is_view_independent() {
    let (_, shell, _) = random_splat_scene(0, 8, 8);
    let field = BackgroundField::new(FieldConfig { init_range: 0.3, ..Default::default() }, shell.bounds().0, shell.bounds().1, 5);
    let palette = SemanticPalette::indoor();
    // Both cameras look at the same wall point (8, 0.3, 0.2).
    let target = Vec3::new(8.0, 0.3, 0.2);
    let a = Camera::looking_at(Vec3::new(1.0, 0.0, 0.0), target, 0.5, 9, 9).unwrap();
    let b = Camera::looking_at(Vec3::new(3.0, -2.0, 1.0), target, 0.5, 9, 9).unwrap();
    let ra = render_background(&shell, &field, &palette, &a);
    let rb = render_background(&shell, &field, &palette, &b);
    assert!((ra.color[40] - rb.color[40]).norm() < 1e-9);
    assert!((ra.color[40] - field.eval(&target)).norm() < 1e-9);
}
