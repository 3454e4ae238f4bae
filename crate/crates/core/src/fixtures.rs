//! Small built-in layouts used by tests, benchmarks and the CLI demos.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Rotation3, Vector2, Vector3};
#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;
use rand::Rng as _;

use crate::diffusion::{AnalyticProvider, Codec, CondRole, NoiseSchedule, ProviderError, Stage, Tensor};
use crate::init::{init_scene, InitConfig};
use crate::optim::SceneState;
use crate::render::{BackgroundField, Camera, FieldConfig};
use crate::scene::{euler_zyx_deg, ObjectGaussians, RoomShell, SemanticBox, SemanticLayout, SemanticPalette, Surfel};
use crate::{seeded_rng, Mat3, Vec3};

/// 4 m x 5 m x 2.8 m bedroom: bed, two nightstands and a wardrobe.
pub fn bedroom() -> SemanticLayout {
    let room = RoomShell::rectangular(Vec3::zeros(), Vec3::new(4.0, 5.0, 2.8)).expect("valid room");
    let boxes = vec![
        SemanticBox::new(Mat3::identity(), Vec3::new(2.0, 3.6, 0.3), Vec3::new(1.6, 2.0, 0.6), "bed", Some("a double bed with white sheets".to_string())),
        SemanticBox::new(Mat3::identity(), Vec3::new(0.9, 4.5, 0.25), Vec3::new(0.5, 0.4, 0.5), "nightstand", None),
        SemanticBox::new(Mat3::identity(), Vec3::new(3.1, 4.5, 0.25), Vec3::new(0.5, 0.4, 0.5), "nightstand", None),
        SemanticBox::new(euler_zyx_deg(90.0, 0.0, 0.0), Vec3::new(0.35, 1.2, 1.0), Vec3::new(1.2, 0.6, 2.0), "wardrobe", None),
    ]
    .into_iter()
    .collect::<Result<_, _>>()
    .expect("valid boxes");
    SemanticLayout::new(boxes, room, "a bedroom", Some("modern".to_string())).expect("valid layout")
}

/// 3 m x 3 m x 2.5 m room with a sofa and a table.
pub fn two_box() -> SemanticLayout {
    let room = RoomShell::rectangular(Vec3::zeros(), Vec3::new(3.0, 3.0, 2.5)).expect("valid room");
    let boxes = vec![
        SemanticBox::new(Mat3::identity(), Vec3::new(1.0, 1.0, 0.4), Vec3::new(1.2, 0.8, 0.8), "sofa", None),
        SemanticBox::new(euler_zyx_deg(30.0, 0.0, 0.0), Vec3::new(2.0, 2.1, 0.35), Vec3::new(0.8, 0.8, 0.7), "table", None),
    ]
    .into_iter()
    .collect::<Result<_, _>>()
    .expect("valid boxes");
    SemanticLayout::new(boxes, room, "a living room", None).expect("valid layout")
}

/// A small random surfel scene in front of a camera at the origin looking
/// along +x, for gradient and determinism checks.
///
/// One to five surfels at well-separated depths (so perturbations never
/// reorder them), facing the camera within 50 degrees, opacity in
/// `[0.2, 0.8]`, split over at most two objects. The returned room shell
/// encloses everything with walls at least 5.5 m away from every surfel.
pub fn random_splat_scene(seed: u64, width: u32, height: u32) -> (Vec<ObjectGaussians>, RoomShell, Camera) {
    let mut rng = seeded_rng(seed, 0x5CE2E);
    let cam = Camera::new(Vec3::zeros(), 0.0, 0.0, 1.0, width, height).expect("valid camera");
    let n = rng.random_range(1..=5usize);
    let half = (0.5 * cam.fov_y).tan();
    let mut objects = vec![
        ObjectGaussians { label: "bed".to_string(), surfels: Vec::new() },
        ObjectGaussians { label: "sofa".to_string(), surfels: Vec::new() },
    ];
    for k in 0..n {
        let depth = 1.0 + 0.35 * k as f64 + rng.random_range(0.0..0.1);
        let lateral = 0.5 * depth * half;
        // Camera looks along +x; image right is -y, image down is -z.
        let position = Vec3::new(depth, rng.random_range(-lateral..lateral), rng.random_range(-lateral..lateral));
        let tilt = rng.random_range(0.0..50f64).to_radians();
        let spin = rng.random_range(0.0..core::f64::consts::TAU);
        let roll = rng.random_range(0.0..core::f64::consts::TAU);
        let axis = Vec3::new(0.0, spin.cos(), spin.sin());
        let face = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), tilt);
        // Base frame: normal along -x, tangents in the y-z plane.
        let base = Mat3::from_columns(&[Vec3::y(), Vec3::z(), -Vec3::x()]);
        let orientation = face.matrix() * base * Rotation3::from_axis_angle(&Vector3::z_axis(), roll).matrix();
        let surfel = Surfel {
            position,
            orientation,
            scale: Vector2::new(rng.random_range(0.08..0.3), rng.random_range(0.08..0.3)),
            opacity: rng.random_range(0.2..0.8),
            color: Vec3::from_fn(|_, _| rng.random_range(0.0..1.0)),
            semantic: Vec3::zeros(),
        };
        objects[rng.random_range(0..2usize)].surfels.push(surfel);
    }
    let palette = SemanticPalette::indoor();
    for o in &mut objects {
        let s = palette.color_unit(&o.label);
        o.surfels.iter_mut().for_each(|x| x.semantic = s);
    }
    let room = RoomShell::rectangular(Vec3::new(-1.0, -8.0, -8.0), Vec3::new(8.0, 8.0, 8.0)).expect("valid room");
    (objects, room, cam)
}

/// Background field small enough for fast tests.
pub fn small_field_config() -> FieldConfig {
    FieldConfig { levels: 4, features: 2, log2_table_size: 10, base_resolution: 4, max_resolution: 32, init_range: 1e-4 }
}

/// Box-fill initialized state with `count` surfels per box and a field over
/// the room bounds.
pub fn initialized_state(layout: &SemanticLayout, count: usize, field: FieldConfig, seed: u64) -> SceneState {
    let palette = SemanticPalette::indoor();
    let config = InitConfig { default_count: count, seed, ..InitConfig::default() };
    let objects = init_scene(layout, &palette, &config).expect("valid init");
    let (lo, hi) = layout.room().bounds();
    let field = BackgroundField::new(field, lo, hi, seed);
    SceneState::new(layout.clone(), palette, objects, field).expect("consistent state")
}

/// Appearance provider whose mean paints every pixel `1 - S`, with `S` the
/// semantic condition, for `width x height` images. Prompted and unprompted
/// means coincide.
pub fn flat_color_provider(
    schedule: NoiseSchedule,
    codec: Codec,
    width: usize,
    height: usize,
) -> Result<AnalyticProvider, ProviderError> {
    let (h, w) = codec.latent_size(height, width)?;
    let ones = Tensor::filled(3, h, w, 1.0);
    let minus_identity = vec![-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0];
    AnalyticProvider::new(Stage::Appearance, schedule, codec, ones.clone(), ones)?
        .with_mix(CondRole::Semantic, minus_identity)
}
