use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Neutral interchange record: an ordered list of sketch and extrude steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalRecord {
    #[serde(default)]
    pub id: Option<String>,
    pub sequence: Vec<ExternalStep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExternalStep {
    Sketch(ExternalSketch),
    Extrude(ExternalExtrude),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalPlane {
    pub origin: [f64; 3],
    pub x_axis: [f64; 3],
    pub y_axis: [f64; 3],
    #[serde(default)]
    pub z_axis: Option<[f64; 3]>,
}

fn one() -> f64 {
    1.0
}

/// A sketch: its plane, placement and loops (outer loop first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalSketch {
    pub plane: ExternalPlane,
    #[serde(default)]
    pub position: [f64; 2],
    #[serde(default = "one")]
    pub size: f64,
    pub loops: Vec<Vec<ExternalEntity>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExternalEntity {
    Line { start: [f64; 2], end: [f64; 2] },
    Arc { center: [f64; 2], radius: f64, start_angle: f64, end_angle: f64, ccw: bool },
    Circle { center: [f64; 2], radius: f64 },
    #[serde(other)]
    Unsupported,
}

/// Extrusion of the `sketch`-th sketch step of the record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalExtrude {
    pub sketch: usize,
    pub operation: String,
    pub extent_type: String,
    pub extent_one: f64,
    #[serde(default)]
    pub extent_two: f64,
}

const DEEPCAD_TAGS: &[(&str, &str)] = &[
    ("NewBodyFeatureOperation", "new_body"),
    ("JoinFeatureOperation", "join"),
    ("CutFeatureOperation", "cut"),
    ("IntersectFeatureOperation", "intersect"),
    ("OneSideFeatureExtentType", "one_sided"),
    ("SymmetricFeatureExtentType", "symmetric"),
    ("TwoSidesFeatureExtentType", "two_sided"),
    ("Line3D", "line"),
    ("Arc3D", "arc"),
    ("Circle3D", "circle"),
    ("Sketch", "sketch"),
    ("ExtrudeFeature", "extrude"),
];

const DEEPCAD_KEYS: &[(&str, &str)] = &[
    ("start_point", "start"),
    ("end_point", "end"),
    ("center_point", "center"),
    ("transform", "plane"),
    ("profiles", "loops"),
    ("is_ccw", "ccw"),
];

fn lookup(table: &[(&str, &str)], s: String) -> String {
    table.iter().find(|(from, _)| *from == s).map_or(s, |(_, to)| to.to_string())
}

fn rename(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut out = Map::new();
            for (k, v) in m {
                let k = lookup(DEEPCAD_KEYS, k);
                let v = match v {
                    Value::String(s) if matches!(k.as_str(), "type" | "operation" | "extent_type") => Value::String(lookup(DEEPCAD_TAGS, s)),
                    other => rename(other),
                };
                out.insert(k, v);
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(rename).collect()),
        other => other,
    }
}

/// Maps DeepCAD-style tags and field names onto the neutral schema.
/// Records already in neutral form pass through unchanged.
pub fn adapt_deepcad(v: Value) -> Value {
    rename(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deepcad_tags_map_to_neutral() {
        let v = serde_json::json!({
            "sequence": [
                {"type": "Sketch", "transform": {"origin": [0,0,0], "x_axis": [1,0,0], "y_axis": [0,1,0]},
                 "profiles": [[{"type": "Circle3D", "center_point": [0, 0], "radius": 1}]]},
                {"type": "ExtrudeFeature", "sketch": 0, "operation": "CutFeatureOperation",
                 "extent_type": "TwoSidesFeatureExtentType", "extent_one": 1, "extent_two": 2}
            ]
        });
        let r: ExternalRecord = serde_json::from_value(adapt_deepcad(v)).unwrap();
        let ExternalStep::Extrude(e) = &r.sequence[1] else { panic!() };
        assert_eq!((e.operation.as_str(), e.extent_type.as_str()), ("cut", "two_sided"));
        let ExternalStep::Sketch(s) = &r.sequence[0] else { panic!() };
        assert_eq!(s.loops[0][0], ExternalEntity::Circle { center: [0.0, 0.0], radius: 1.0 });
    }

    #[test]
    fn unknown_entity_is_kept_as_unsupported() {
        let e: ExternalEntity = serde_json::from_str(r#"{"type": "spline", "knots": [0, 1]}"#).unwrap();
        assert_eq!(e, ExternalEntity::Unsupported);
    }
}
