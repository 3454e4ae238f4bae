use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Rotation3, Vector2};
#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;
use sha2::{Digest, Sha256};

use super::OptimError;
use crate::render::{Background, BackgroundField, ParamGradients, SceneView};
use crate::scene::{to_world, ObjectGaussians, SemanticBox, SemanticLayout, SemanticPalette, Surfel};
use crate::{Mat3, Vec3};

/// How far through the pipeline a state has been taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StageMarker {
    Initialized,
    GeometryRefined,
    AppearanceGenerated,
}

impl StageMarker {
    pub fn code(self) -> u8 {
        match self {
            StageMarker::Initialized => 0,
            StageMarker::GeometryRefined => 1,
            StageMarker::AppearanceGenerated => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(StageMarker::Initialized),
            1 => Some(StageMarker::GeometryRefined),
            2 => Some(StageMarker::AppearanceGenerated),
            _ => None,
        }
    }
}

/// Geometry of one canonical surfel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfelGeometry {
    pub position: Vec3,
    pub orientation: Mat3,
    pub scale: Vector2<f64>,
    pub opacity: f64,
}

/// Everything the geometry stage may change.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    pub objects: Vec<Vec<SurfelGeometry>>,
}

/// Everything the appearance stage may change.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceParams {
    pub colors: Vec<Vec<Vec3>>,
    pub field: BackgroundField,
}

/// One object's frozen attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSlot {
    /// Index into the layout's boxes.
    pub box_index: usize,
    pub label: String,
    pub semantic: Vec3,
}

/// Optimizable scene: canonical surfels per layout box plus the background
/// field. Layout, palette and per-object semantics are frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneState {
    layout: SemanticLayout,
    palette: SemanticPalette,
    slots: Vec<ObjectSlot>,
    geometry: GeometryParams,
    appearance: AppearanceParams,
    stage: StageMarker,
}

/// Objects in world space, ready to be viewed.
#[derive(Debug, Clone)]
pub struct WorldScene<'a> {
    pub objects: Vec<ObjectGaussians>,
    state: &'a SceneState,
}

impl WorldScene<'_> {
    pub fn view(&self) -> SceneView<'_> {
        SceneView {
            objects: &self.objects,
            background: Some(Background {
                shell: self.state.layout.room(),
                field: &self.state.appearance.field,
                palette: &self.state.palette,
            }),
        }
    }
}

/// Gradient of one canonical surfel in the parameterization the optimizer
/// steps: canonical position, left rotation vector, log scale, opacity, color.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CanonicalGrad {
    pub position: Vec3,
    pub rotation: Vec3,
    pub log_scale: Vector2<f64>,
    pub opacity: f64,
    pub color: Vec3,
}

impl SceneState {
    /// Splits initialized objects into the two parameter groups.
    pub fn new(
        layout: SemanticLayout,
        palette: SemanticPalette,
        objects: Vec<(usize, ObjectGaussians)>,
        field: BackgroundField,
    ) -> Result<Self, OptimError> {
        let mut slots = Vec::with_capacity(objects.len());
        let mut geo = Vec::with_capacity(objects.len());
        let mut colors = Vec::with_capacity(objects.len());
        for (box_index, obj) in objects {
            let b = layout.boxes().get(box_index).ok_or(OptimError::Layout("object refers to a missing box"))?;
            if b.label() != obj.label {
                return Err(OptimError::Layout("object label differs from its box"));
            }
            obj.check_canonical().map_err(OptimError::Layout)?;
            let semantic = obj.surfels.first().map(|s| s.semantic).unwrap_or_else(|| palette.color_unit(&obj.label));
            slots.push(ObjectSlot { box_index, label: obj.label.clone(), semantic });
            geo.push(
                obj.surfels
                    .iter()
                    .map(|s| SurfelGeometry { position: s.position, orientation: s.orientation, scale: s.scale, opacity: s.opacity })
                    .collect(),
            );
            colors.push(obj.surfels.iter().map(|s| s.color).collect());
        }
        Ok(Self {
            layout,
            palette,
            slots,
            geometry: GeometryParams { objects: geo },
            appearance: AppearanceParams { colors, field },
            stage: StageMarker::Initialized,
        })
    }

    /// Reassembles a state from stored parts; used by checkpoint loading.
    pub fn from_parts(
        layout: SemanticLayout,
        palette: SemanticPalette,
        slots: Vec<ObjectSlot>,
        geometry: GeometryParams,
        appearance: AppearanceParams,
        stage: StageMarker,
    ) -> Result<Self, OptimError> {
        if slots.len() != geometry.objects.len() || slots.len() != appearance.colors.len() {
            return Err(OptimError::Layout("parameter groups disagree on object count"));
        }
        for ((s, g), c) in slots.iter().zip(&geometry.objects).zip(&appearance.colors) {
            let b = layout.boxes().get(s.box_index).ok_or(OptimError::Layout("object refers to a missing box"))?;
            if b.label() != s.label {
                return Err(OptimError::Layout("object label differs from its box"));
            }
            if g.len() != c.len() {
                return Err(OptimError::Layout("parameter groups disagree on surfel count"));
            }
        }
        Ok(Self { layout, palette, slots, geometry, appearance, stage })
    }

    pub fn layout(&self) -> &SemanticLayout {
        &self.layout
    }

    pub fn palette(&self) -> &SemanticPalette {
        &self.palette
    }

    pub fn slots(&self) -> &[ObjectSlot] {
        &self.slots
    }

    pub fn geometry(&self) -> &GeometryParams {
        &self.geometry
    }

    pub fn appearance(&self) -> &AppearanceParams {
        &self.appearance
    }

    /// The only mutable path into geometry.
    pub(crate) fn geometry_mut(&mut self) -> &mut GeometryParams {
        &mut self.geometry
    }

    /// The only mutable path into appearance.
    pub(crate) fn appearance_mut(&mut self) -> &mut AppearanceParams {
        &mut self.appearance
    }

    pub fn stage(&self) -> StageMarker {
        self.stage
    }

    pub(crate) fn set_stage(&mut self, stage: StageMarker) {
        self.stage = stage;
    }

    pub fn surfel_count(&self) -> usize {
        self.geometry.objects.iter().map(Vec::len).sum()
    }

    fn box_of(&self, i: usize) -> &SemanticBox {
        &self.layout.boxes()[self.slots[i].box_index]
    }

    /// Canonical objects with all attributes filled in.
    pub fn canonical_objects(&self) -> Vec<ObjectGaussians> {
        self.slots
            .iter()
            .zip(&self.geometry.objects)
            .zip(&self.appearance.colors)
            .map(|((slot, geo), col)| ObjectGaussians {
                label: slot.label.clone(),
                surfels: geo
                    .iter()
                    .zip(col)
                    .map(|(g, c)| Surfel {
                        position: g.position,
                        orientation: g.orientation,
                        scale: g.scale,
                        opacity: g.opacity,
                        color: *c,
                        semantic: slot.semantic,
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn world(&self) -> WorldScene<'_> {
        let objects = self.canonical_objects().iter().enumerate().map(|(i, o)| to_world(o, self.box_of(i))).collect();
        WorldScene { objects, state: self }
    }

    /// Maps world-space renderer gradients to the canonical parameterization.
    pub fn canonical_grads(&self, g: &ParamGradients) -> Vec<Vec<CanonicalGrad>> {
        g.objects
            .iter()
            .enumerate()
            .map(|(i, og)| {
                let b = self.box_of(i);
                let (r, size) = (b.rotation(), b.size());
                og.iter()
                    .zip(&self.geometry.objects[i])
                    .map(|(w, s)| {
                        let (k, dk) = stretch_and_grad(&s.orientation, size);
                        let g_scale = w.scale * k;
                        let rotation = r.transpose() * w.rotation + dk * w.scale.dot(&s.scale);
                        CanonicalGrad {
                            position: size.component_mul(&(r.transpose() * w.position)),
                            rotation,
                            log_scale: g_scale.component_mul(&s.scale),
                            opacity: w.opacity,
                            color: w.color,
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// SHA-256 over the geometry group in a fixed order.
    pub fn geometry_digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for obj in &self.geometry.objects {
            h.update((obj.len() as u64).to_le_bytes());
            for s in obj {
                feed(&mut h, s.position.iter());
                feed(&mut h, s.orientation.iter());
                feed(&mut h, s.scale.iter());
                feed(&mut h, core::iter::once(&s.opacity));
            }
        }
        h.finalize().into()
    }

    /// SHA-256 over the appearance group in a fixed order.
    pub fn appearance_digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for obj in &self.appearance.colors {
            h.update((obj.len() as u64).to_le_bytes());
            for c in obj {
                feed(&mut h, c.iter());
            }
        }
        let f = &self.appearance.field;
        feed(&mut h, f.tables().iter());
        feed(&mut h, f.weight().iter());
        feed(&mut h, f.bias().iter());
        h.finalize().into()
    }
}

fn feed<'a>(h: &mut Sha256, vals: impl Iterator<Item = &'a f64>) {
    for v in vals {
        h.update(v.to_bits().to_le_bytes());
    }
}

/// Radius stretch of a canonical disk through a box and its gradient with
/// respect to a left rotation vector on the canonical frame.
fn stretch_and_grad(o: &Mat3, size: &Vec3) -> (f64, Vec3) {
    let u = o.column(0).into_owned();
    let v = o.column(1).into_owned();
    let su = size.component_mul(&u);
    let sv = size.component_mul(&v);
    let (a, b) = (su.norm(), sv.norm());
    let k = (a * b).sqrt();
    // Under u -> u + δ x u, da = δ · (u x size⊙size⊙u / a).
    let ga = u.cross(&size.component_mul(&su)) / a;
    let gb = v.cross(&size.component_mul(&sv)) / b;
    (k, (ga / a + gb / b) * (0.5 * k))
}

/// Left-multiplies a frame by `exp([δ]x)` and restores orthonormality.
pub(crate) fn rotate_frame(o: &Mat3, delta: &Vec3) -> Mat3 {
    let m = Rotation3::new(*delta).matrix() * o;
    let u = m.column(0).normalize();
    let v = (m.column(1) - u * u.dot(&m.column(1))).normalize();
    let n = u.cross(&v);
    Mat3::from_columns(&[u, v, n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::euler_zyx_deg;

    #[test]
    fn stretch_gradient_matches_finite_differences() {
        let o = euler_zyx_deg(20.0, -35.0, 50.0);
        let size = Vec3::new(2.0, 0.6, 1.3);
        let (k, g) = stretch_and_grad(&o, &size);
        assert!((k - crate::scene::disk_stretch(&o, &size)).abs() < 1e-15);
        let h = 1e-6;
        for i in 0..3 {
            let mut d = Vec3::zeros();
            d[i] = h;
            let plus = crate::scene::disk_stretch(&(Rotation3::new(d).matrix() * o), &size);
            let minus = crate::scene::disk_stretch(&(Rotation3::new(-d).matrix() * o), &size);
            assert!(((plus - minus) / (2.0 * h) - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn rotate_frame_stays_orthonormal() {
        let mut o = Mat3::identity();
        for i in 0..1000 {
            o = rotate_frame(&o, &Vec3::new(0.01, -0.02 * (i % 3) as f64, 0.005));
        }
        let g = o.transpose() * o - Mat3::identity();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
        assert!((o.determinant() - 1.0).abs() < 1e-12);
    }
}
