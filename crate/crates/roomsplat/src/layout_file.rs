//! JSON layout documents.
//!
//! ```json
//! {
//!   "scene_prompt": "a bedroom",
//!   "style_prompt": "modern",
//!   "room": [{ "label": "floor", "vertices": [[0, 0, 0], [4, 0, 0], [4, 5, 0], [0, 5, 0]] }],
//!   "boxes": [{ "label": "bed", "translation": [2, 3.6, 0.3], "size": [1.6, 2, 0.6],
//!               "euler_zyx_deg": [0, 0, 0], "prompt": "a double bed" }]
//! }
//! ```
//!
//! A box gives its rotation either as a row-major 9-array `rotation` or as
//! `euler_zyx_deg`; saving always writes `rotation`.

use std::path::Path;

use roomsplat_core::scene::{euler_zyx_deg, BackgroundPolygon, RoomShell, SemanticBox, SemanticLayout};
use roomsplat_core::{Mat3, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{read_text, write, Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutDoc {
    scene_prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    style_prompt: Option<String>,
    room: Vec<PolygonDoc>,
    boxes: Vec<BoxDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolygonDoc {
    label: String,
    vertices: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxDoc {
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prompt: Option<String>,
    translation: [f64; 3],
    size: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<[f64; 9]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    euler_zyx_deg: Option<[f64; 3]>,
}

pub fn parse_layout(text: &str) -> Result<SemanticLayout> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: LayoutDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::invalid(format!("layout field `{}`: {}", e.path(), e.inner())))?;
    let polygons = doc
        .room
        .into_iter()
        .enumerate()
        .map(|(i, p)| BackgroundPolygon::new(p.vertices.iter().map(|v| Vec3::from(*v)).collect(), p.label).map_err(|e| e.at(i)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::invalid(format!("layout room: {e}")))?;
    let room = RoomShell::new(polygons).map_err(|e| Error::invalid(format!("layout room: {e}")))?;
    let mut boxes = Vec::with_capacity(doc.boxes.len());
    for (i, b) in doc.boxes.into_iter().enumerate() {
        let rotation = match (b.rotation, b.euler_zyx_deg) {
            (Some(r), None) => Mat3::from_row_slice(&r),
            (None, Some([z, y, x])) => euler_zyx_deg(z, y, x),
            _ => {
                return Err(Error::invalid(format!(
                    "layout boxes: box {i} ({}): give exactly one of `rotation` or `euler_zyx_deg`",
                    b.label
                )))
            }
        };
        let sb = SemanticBox::new(rotation, Vec3::from(b.translation), Vec3::from(b.size), b.label, b.prompt)
            .map_err(|e| Error::invalid(format!("layout boxes: {}", e.at(i))))?;
        boxes.push(sb);
    }
    SemanticLayout::new(boxes, room, doc.scene_prompt, doc.style_prompt).map_err(|e| Error::invalid(format!("layout: {e}")))
}

pub fn layout_to_json(layout: &SemanticLayout) -> String {
    let doc = LayoutDoc {
        scene_prompt: layout.scene_prompt().to_string(),
        style_prompt: layout.style_prompt().map(str::to_string),
        room: layout
            .room()
            .polygons()
            .iter()
            .map(|p| PolygonDoc { label: p.label().to_string(), vertices: p.loop_vertices().iter().map(|v| (*v).into()).collect() })
            .collect(),
        boxes: layout
            .boxes()
            .iter()
            .map(|b| {
                let r = b.rotation();
                let mut rows = [0.0; 9];
                for (k, v) in rows.iter_mut().enumerate() {
                    *v = r[(k / 3, k % 3)];
                }
                BoxDoc {
                    label: b.label().to_string(),
                    prompt: b.prompt().map(str::to_string),
                    translation: (*b.translation()).into(),
                    size: (*b.size()).into(),
                    rotation: Some(rows),
                    euler_zyx_deg: None,
                }
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("layout serializes");
    s.push('\n');
    s
}

pub fn load_layout(path: &Path) -> Result<SemanticLayout> {
    parse_layout(&read_text(path)?).map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub fn save_layout(path: &Path, layout: &SemanticLayout) -> Result<()> {
    write(path, layout_to_json(layout).as_bytes())
}
