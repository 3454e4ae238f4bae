#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;
use alloc::string::String;
use alloc::vec::Vec;


use super::SceneError;
use crate::geom;
use crate::{Mat3, Vec3};

/// Labels reserved for room-shell polygons.
pub const BACKGROUND_LABELS: [&str; 3] = ["wall", "floor", "ceiling"];

const ROTATION_TOL: f64 = 1e-6;
const COPLANAR_TOL: f64 = 1e-5;
const WELD_TOL: f64 = 1e-6;

/// Rotation from intrinsic Z-Y-X Euler angles in degrees: `Rz(z) * Ry(y) * Rx(x)`.
pub fn euler_zyx_deg(z: f64, y: f64, x: f64) -> Mat3 {
    let (sz, cz) = z.to_radians().sin_cos();
    let (sy, cy) = y.to_radians().sin_cos();
    let (sx, cx) = x.to_radians().sin_cos();
    let rz = Mat3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
    let ry = Mat3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rx = Mat3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
    rz * ry * rx
}

/// An oriented, labelled object box. `size` holds full edge lengths, so the
/// canonical object space is the centered unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticBox {
    rotation: Mat3,
    translation: Vec3,
    size: Vec3,
    label: String,
    prompt: Option<String>,
}

impl SemanticBox {
    pub fn new(
        rotation: Mat3,
        translation: Vec3,
        size: Vec3,
        label: impl Into<String>,
        prompt: Option<String>,
    ) -> Result<Self, SceneError> {
        let label = label.into();
        let bad = |reason| SceneError::BadRotation { index: 0, label: label.clone(), reason };
        if !rotation.iter().chain(translation.iter()).chain(size.iter()).all(|v| v.is_finite()) {
            return Err(SceneError::NonFinite("box"));
        }
        let gram = rotation.transpose() * rotation - Mat3::identity();
        if gram.iter().any(|v| v.abs() > ROTATION_TOL) {
            return Err(bad("not orthonormal"));
        }
        if (rotation.determinant() - 1.0).abs() > ROTATION_TOL {
            return Err(bad("determinant is not +1"));
        }
        if size.iter().any(|&s| s <= 0.0) {
            return Err(SceneError::BadSize { index: 0, label });
        }
        Ok(Self { rotation, translation, size, label, prompt })
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn size(&self) -> &Vec3 {
        &self.size
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn prompt(&self) -> Option<&str> {
        self.prompt.as_deref()
    }

    /// Canonical unit-cube point to world.
    pub fn canonical_to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation * self.size.component_mul(p) + self.translation
    }

    /// Signed distance to the box surface, negative inside.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        geom::box_signed_distance(p, &self.rotation, &self.translation, &self.size)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.signed_distance(p) <= 0.0
    }
}

/// A planar background polygon with an explicit closed edge loop.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundPolygon {
    vertices: Vec<Vec3>,
    edges: Vec<[usize; 2]>,
    label: String,
    normal: Vec3,
    ordered: Vec<Vec3>,
}

impl BackgroundPolygon {
    /// Polygon whose edges follow vertex order.
    pub fn new(vertices: Vec<Vec3>, label: impl Into<String>) -> Result<Self, SceneError> {
        let n = vertices.len();
        let edges = (0..n).map(|i| [i, (i + 1) % n]).collect();
        Self::with_edges(vertices, edges, label)
    }

    pub fn with_edges(vertices: Vec<Vec3>, edges: Vec<[usize; 2]>, label: impl Into<String>) -> Result<Self, SceneError> {
        let label = label.into();
        let bad = |reason| SceneError::BadPolygon { index: 0, label: label.clone(), reason };
        if !BACKGROUND_LABELS.contains(&label.as_str()) {
            return Err(bad("label must be wall, floor or ceiling"));
        }
        if vertices.len() < 3 {
            return Err(bad("needs at least three vertices"));
        }
        if !vertices.iter().flat_map(|v| v.iter()).all(|c| c.is_finite()) {
            return Err(SceneError::NonFinite("polygon"));
        }
        let order = loop_order(vertices.len(), &edges).ok_or_else(|| bad("edges do not form a single closed loop"))?;
        let ordered: Vec<Vec3> = order.iter().map(|&i| vertices[i]).collect();
        let raw = geom::newell_normal(&ordered);
        let len = raw.norm();
        if len < 1e-12 {
            return Err(bad("degenerate (zero area)"));
        }
        let normal = raw / len;
        if ordered.iter().any(|v| (v - ordered[0]).dot(&normal).abs() > COPLANAR_TOL) {
            return Err(bad("vertices are not coplanar"));
        }
        Ok(Self { vertices, edges, label, normal, ordered })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Unit plane normal (orientation follows the edge loop).
    pub fn normal(&self) -> &Vec3 {
        &self.normal
    }

    /// Vertices in edge-loop order.
    pub fn loop_vertices(&self) -> &[Vec3] {
        &self.ordered
    }
}

// Walks the edge list; returns the vertex visiting order if it is one cycle
// through every vertex.
fn loop_order(n: usize, edges: &[[usize; 2]]) -> Option<Vec<usize>> {
    if edges.len() != n {
        return None;
    }
    let mut adj = alloc::vec![Vec::with_capacity(2); n];
    for &[a, b] in edges {
        if a >= n || b >= n || a == b {
            return None;
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    if adj.iter().any(|a| a.len() != 2) {
        return None;
    }
    let mut order = Vec::with_capacity(n);
    let (mut prev, mut cur) = (usize::MAX, 0usize);
    for _ in 0..n {
        order.push(cur);
        let next = if adj[cur][0] != prev { adj[cur][0] } else { adj[cur][1] };
        prev = cur;
        cur = next;
    }
    (cur == 0 && {
        let mut seen = order.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len() == n
    })
    .then_some(order)
}

/// Closed polygonal room shell.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomShell {
    polygons: Vec<BackgroundPolygon>,
}

impl RoomShell {
    pub fn new(polygons: Vec<BackgroundPolygon>) -> Result<Self, SceneError> {
        let mut segs: Vec<(usize, usize, Vec3, Vec3)> = Vec::new();
        for (pi, poly) in polygons.iter().enumerate() {
            for (ei, &[a, b]) in poly.edges.iter().enumerate() {
                segs.push((pi, ei, poly.vertices[a], poly.vertices[b]));
            }
        }
        for (i, &(pi, ei, a, b)) in segs.iter().enumerate() {
            let count = segs
                .iter()
                .enumerate()
                .filter(|&(j, s)| {
                    j == i
                        || ((s.2 - a).norm() <= WELD_TOL && (s.3 - b).norm() <= WELD_TOL)
                        || ((s.2 - b).norm() <= WELD_TOL && (s.3 - a).norm() <= WELD_TOL)
                })
                .count();
            if count != 2 {
                return Err(SceneError::OpenShell { polygon: pi, edge: ei, count });
            }
        }
        Ok(Self { polygons })
    }

    /// Axis-aligned box room: floor, ceiling and four walls.
    pub fn rectangular(min: Vec3, max: Vec3) -> Result<Self, SceneError> {
        let c = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        let (x0, y0, z0, x1, y1, z1) = (min.x, min.y, min.z, max.x, max.y, max.z);
        let quads = [
            ([c(x0, y0, z0), c(x1, y0, z0), c(x1, y1, z0), c(x0, y1, z0)], "floor"),
            ([c(x0, y0, z1), c(x0, y1, z1), c(x1, y1, z1), c(x1, y0, z1)], "ceiling"),
            ([c(x0, y0, z0), c(x0, y0, z1), c(x1, y0, z1), c(x1, y0, z0)], "wall"),
            ([c(x0, y1, z0), c(x1, y1, z0), c(x1, y1, z1), c(x0, y1, z1)], "wall"),
            ([c(x0, y0, z0), c(x0, y1, z0), c(x0, y1, z1), c(x0, y0, z1)], "wall"),
            ([c(x1, y0, z0), c(x1, y0, z1), c(x1, y1, z1), c(x1, y1, z0)], "wall"),
        ];
        let polys = quads
            .into_iter()
            .enumerate()
            .map(|(i, (v, l))| BackgroundPolygon::new(v.to_vec(), l).map_err(|e| e.at(i)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(polys)
    }

    pub fn polygons(&self) -> &[BackgroundPolygon] {
        &self.polygons
    }

    /// Axis-aligned bounds of all vertices.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in self.polygons.iter().flat_map(|p| p.vertices.iter()) {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Parity test along a fixed skew direction.
    pub fn contains(&self, p: &Vec3) -> bool {
        let dir = Vec3::new(0.5773, 0.5831, 0.5716);
        let hits = self
            .polygons
            .iter()
            .filter(|poly| geom::ray_polygon(p, &dir, &poly.ordered, &poly.normal, 0.0).is_some())
            .count();
        hits % 2 == 1
    }

    /// Unsigned distance to the nearest shell polygon.
    pub fn distance(&self, p: &Vec3) -> f64 {
        self.polygons
            .iter()
            .map(|poly| geom::point_polygon_distance(p, &poly.ordered, &poly.normal))
            .fold(f64::INFINITY, f64::min)
    }

    /// Signed distance, positive inside the room.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let d = self.distance(p);
        if self.contains(p) {
            d
        } else {
            -d
        }
    }
}

/// Boxes, room shell and prompts.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticLayout {
    boxes: Vec<SemanticBox>,
    room: RoomShell,
    scene_prompt: String,
    style_prompt: Option<String>,
}

impl SemanticLayout {
    pub fn new(
        boxes: Vec<SemanticBox>,
        room: RoomShell,
        scene_prompt: impl Into<String>,
        style_prompt: Option<String>,
    ) -> Result<Self, SceneError> {
        if boxes.is_empty() {
            return Err(SceneError::NoBoxes);
        }
        for (index, b) in boxes.iter().enumerate() {
            if !room.contains(b.translation()) {
                return Err(SceneError::BoxOutsideRoom { index, label: b.label.clone() });
            }
        }
        Ok(Self { boxes, room, scene_prompt: scene_prompt.into(), style_prompt })
    }

    pub fn boxes(&self) -> &[SemanticBox] {
        &self.boxes
    }

    pub fn room(&self) -> &RoomShell {
        &self.room
    }

    pub fn scene_prompt(&self) -> &str {
        &self.scene_prompt
    }

    pub fn style_prompt(&self) -> Option<&str> {
        self.style_prompt.as_deref()
    }

    /// Signed distance of free space: positive inside the room and outside
    /// every box.
    pub fn free_space_distance(&self, p: &Vec3) -> f64 {
        self.boxes
            .iter()
            .map(|b| b.signed_distance(p))
            .fold(self.room.signed_distance(p), f64::min)
    }
}

impl SceneError {
    /// Attaches the position of the offending box or polygon.
    pub fn at(self, i: usize) -> Self {
        match self {
            SceneError::BadRotation { label, reason, .. } => SceneError::BadRotation { index: i, label, reason },
            SceneError::BadSize { label, .. } => SceneError::BadSize { index: i, label },
            SceneError::BadPolygon { label, reason, .. } => SceneError::BadPolygon { index: i, label, reason },
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> RoomShell {
        RoomShell::rectangular(Vec3::zeros(), Vec3::new(4.0, 5.0, 2.8)).unwrap()
    }

    #[test]
    fn rectangular_room_is_closed_and_contains_center() {
        let r = room();
        assert_eq!(r.polygons().len(), 6);
        assert!(r.contains(&Vec3::new(2.0, 2.5, 1.4)));
        assert!(!r.contains(&Vec3::new(-1.0, 2.5, 1.4)));
        assert!((r.signed_distance(&Vec3::new(2.0, 2.5, 0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn reflection_is_rejected() {
        let refl = Mat3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        let err = SemanticBox::new(refl, Vec3::zeros(), Vec3::repeat(1.0), "bed", None).unwrap_err();
        assert!(matches!(err, SceneError::BadRotation { .. }));
    }

    #[test]
    fn nonpositive_size_is_rejected() {
        let err = SemanticBox::new(Mat3::identity(), Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0), "bed", None).unwrap_err();
        assert!(matches!(err, SceneError::BadSize { .. }));
    }

    #[test]
    fn open_shell_is_rejected() {
        let mut polys = room().polygons().to_vec();
        polys.pop();
        assert!(matches!(RoomShell::new(polys), Err(SceneError::OpenShell { .. })));
    }

    #[test]
    fn non_coplanar_polygon_is_rejected() {
        let v = alloc::vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.01),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        assert!(BackgroundPolygon::new(v, "floor").is_err());
    }

    #[test]
    fn broken_edge_loop_is_rejected() {
        let v = alloc::vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let edges = alloc::vec![[0, 1], [1, 0], [2, 3], [3, 2]];
        assert!(BackgroundPolygon::with_edges(v, edges, "floor").is_err());
    }

    #[test]
    fn box_outside_room_names_the_box() {
        let b = SemanticBox::new(Mat3::identity(), Vec3::new(9.0, 1.0, 1.0), Vec3::repeat(0.5), "lamp", None).unwrap();
        let err = SemanticLayout::new(alloc::vec![b], room(), "a room", None).unwrap_err();
        assert_eq!(err, SceneError::BoxOutsideRoom { index: 0, label: "lamp".into() });
    }

    #[test]
    fn euler_yaw_quarter_turn() {
        let r = euler_zyx_deg(90.0, 0.0, 0.0);
        let x = r * Vec3::x();
        assert!((x - Vec3::y()).norm() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }
}
