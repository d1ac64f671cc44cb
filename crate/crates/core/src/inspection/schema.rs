//! Output schemas of subnodes and validation of raw model output against them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::graph::{LabelSchema, NodeRole, PropertyMap, PropertySpec, PropertyValue, ValueType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    SingleTyped,
    ArrayTyped,
}

/// Declared output of one subnode.
///
/// JSON form: `{"array_typed": {"fields": {"summary": "text"}, "required": ["summary"]}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawOutputSchema", into = "RawOutputSchema")]
pub struct OutputSchema {
    pub kind: OutputKind,
    pub fields: BTreeMap<String, ValueType>,
    pub required: BTreeSet<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaBody {
    fields: BTreeMap<String, ValueType>,
    #[serde(default)]
    required: BTreeSet<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawOutputSchema {
    SingleTyped(SchemaBody),
    ArrayTyped(SchemaBody),
}

impl TryFrom<RawOutputSchema> for OutputSchema {
    type Error = String;

    fn try_from(raw: RawOutputSchema) -> Result<Self, Self::Error> {
        let (kind, body) = match raw {
            RawOutputSchema::SingleTyped(b) => (OutputKind::SingleTyped, b),
            RawOutputSchema::ArrayTyped(b) => (OutputKind::ArrayTyped, b),
        };
        OutputSchema::new(kind, body.fields, body.required)
    }
}

impl From<OutputSchema> for RawOutputSchema {
    fn from(s: OutputSchema) -> Self {
        let body = SchemaBody {
            fields: s.fields,
            required: s.required,
        };
        match s.kind {
            OutputKind::SingleTyped => RawOutputSchema::SingleTyped(body),
            OutputKind::ArrayTyped => RawOutputSchema::ArrayTyped(body),
        }
    }
}

/// Validated output of one subnode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TypedOutput {
    Single(PropertyMap),
    Array(Vec<PropertyMap>),
}

impl TypedOutput {
    pub fn items(&self) -> &[PropertyMap] {
        match self {
            TypedOutput::Single(m) => std::slice::from_ref(m),
            TypedOutput::Array(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("expected a JSON {expected}, got {got}")]
    Shape { expected: &'static str, got: String },
    #[error("missing required field {0:?}")]
    MissingRequired(String),
    #[error("field {field:?} expected {expected}, got {got}")]
    TypeMismatch {
        field: String,
        expected: ValueType,
        got: String,
    },
}

fn json_kind(v: &Value) -> String {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
    .to_string()
}

impl OutputSchema {
    pub fn new(
        kind: OutputKind,
        fields: BTreeMap<String, ValueType>,
        required: BTreeSet<String>,
    ) -> Result<Self, String> {
        if fields.is_empty() {
            return Err("output schema declares no fields".into());
        }
        if let Some(extra) = required.iter().find(|r| !fields.contains_key(*r)) {
            return Err(format!("required field {extra:?} is not declared"));
        }
        Ok(OutputSchema {
            kind,
            fields,
            required,
        })
    }

    /// Convenience constructor: every listed field is required.
    pub fn of(kind: OutputKind, fields: &[(&str, ValueType)]) -> Self {
        let required = fields.iter().map(|(n, _)| n.to_string()).collect();
        let fields = fields.iter().map(|(n, t)| (n.to_string(), *t)).collect();
        OutputSchema::new(kind, fields, required).expect("non-empty field list")
    }

    pub fn is_array(&self) -> bool {
        self.kind == OutputKind::ArrayTyped
    }

    /// The field carrying the item's main text: the first required text
    /// field, else the first text field, else the first field.
    pub fn primary_field(&self) -> &str {
        let text = |name: &&String| self.fields[*name] == ValueType::Text;
        self.required
            .iter()
            .find(text)
            .or_else(|| self.fields.keys().find(text))
            .or_else(|| self.fields.keys().next())
            .map(String::as_str)
            .unwrap_or_default()
    }

    pub fn label_schema(&self, role: NodeRole) -> LabelSchema {
        self.fields.iter().fold(LabelSchema::new(role), |ls, (name, ty)| {
            let spec = if self.required.contains(name) {
                PropertySpec::required(*ty)
            } else {
                PropertySpec::optional(*ty)
            };
            ls.with(name, spec)
        })
    }

    /// One-line description used in prompts.
    pub fn describe(&self) -> String {
        let fields: Vec<String> = self
            .fields
            .iter()
            .map(|(n, t)| {
                let req = if self.required.contains(n) { ", required" } else { "" };
                format!("\"{n}\" ({t}{req})")
            })
            .collect();
        let shape = match self.kind {
            OutputKind::SingleTyped => "a single JSON object",
            OutputKind::ArrayTyped => "a JSON array of objects",
        };
        format!("{shape} with fields {}", fields.join(", "))
    }
}

fn coerce(field: &str, value: &Value, ty: ValueType) -> Result<PropertyValue, ValidationError> {
    let mismatch = || ValidationError::TypeMismatch {
        field: field.to_string(),
        expected: ty,
        got: json_kind(value),
    };
    let v = match (ty, value) {
        (ValueType::Text, Value::String(s)) => PropertyValue::Text(s.clone()),
        (ValueType::Boolean, Value::Bool(b)) => PropertyValue::Boolean(*b),
        (ValueType::Integer, Value::Number(n)) => PropertyValue::Integer(n.as_i64().ok_or_else(mismatch)?),
        (ValueType::Integer, Value::String(s)) => {
            PropertyValue::Integer(s.trim().parse().map_err(|_| mismatch())?)
        }
        (ValueType::Real, Value::Number(n)) => PropertyValue::Real(n.as_f64().ok_or_else(mismatch)?),
        (ValueType::Real, Value::String(s)) => {
            let r: f64 = s.trim().parse().map_err(|_| mismatch())?;
            if !r.is_finite() {
                return Err(mismatch());
            }
            PropertyValue::Real(r)
        }
        (ValueType::TextList, Value::Array(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    Value::String(s) if !s.is_empty() => out.push(s.clone()),
                    _ => return Err(mismatch()),
                }
            }
            PropertyValue::TextList(out)
        }
        _ => return Err(mismatch()),
    };
    Ok(v)
}

fn validate_object(raw: &Value, schema: &OutputSchema) -> Result<PropertyMap, ValidationError> {
    let Value::Object(obj) = raw else {
        return Err(ValidationError::Shape {
            expected: "object",
            got: json_kind(raw),
        });
    };
    let mut out = PropertyMap::new();
    for (name, ty) in &schema.fields {
        match obj.get(name) {
            None | Some(Value::Null) => {
                if schema.required.contains(name) {
                    return Err(ValidationError::MissingRequired(name.clone()));
                }
            }
            Some(v) => {
                out.insert(name.clone(), coerce(name, v, *ty)?);
            }
        }
    }
    Ok(out)
}

/// Checks `raw` against `schema`, dropping undeclared keys and coercing
/// numeric strings for integer and real fields.
///
/// For array outputs, an object wrapping a single array (`{"items": [...]}`)
/// is unwrapped first.
pub fn validate_output(raw: &Value, schema: &OutputSchema) -> Result<TypedOutput, ValidationError> {
    match schema.kind {
        OutputKind::SingleTyped => validate_object(raw, schema).map(TypedOutput::Single),
        OutputKind::ArrayTyped => {
            let items = match raw {
                Value::Array(items) => items,
                Value::Object(obj) if obj.len() == 1 && obj.values().all(Value::is_array) => {
                    obj.values().next().and_then(Value::as_array).expect("checked")
                }
                other => {
                    return Err(ValidationError::Shape {
                        expected: "array",
                        got: json_kind(other),
                    })
                }
            };
            items
                .iter()
                .map(|item| validate_object(item, schema))
                .collect::<Result<Vec<_>, _>>()
                .map(TypedOutput::Array)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn summary_array() -> OutputSchema {
        OutputSchema::of(OutputKind::ArrayTyped, &[("summary", ValueType::Text)])
    }

    #[test]
    fn parses_config_form() {
        let s: OutputSchema = serde_json::from_value(json!({
            "array_typed": {"fields": {"summary": "text", "score": "real"}, "required": ["summary"]}
        }))
        .unwrap();
        assert_eq!(s.kind, OutputKind::ArrayTyped);
        assert_eq!(s.fields.len(), 2);
        assert_eq!(s.primary_field(), "summary");
        let back = serde_json::to_value(&s).unwrap();
        assert_eq!(serde_json::from_value::<OutputSchema>(back).unwrap(), s);
    }

    #[test]
    fn rejects_bad_schemas() {
        for bad in [
            json!({"single_typed": {"fields": {}}}),
            json!({"single_typed": {"fields": {"a": "text"}, "required": ["b"]}}),
            json!({"single_typed": {"fields": {"a": "date"}}}),
            json!({"both": {"fields": {"a": "text"}}}),
        ] {
            assert!(serde_json::from_value::<OutputSchema>(bad.clone()).is_err(), "{bad}");
        }
    }

    #[test]
    fn array_of_two_objects() {
        let out = validate_output(
            &json!([{"summary": "a", "extra": 1}, {"summary": "b"}]),
            &summary_array(),
        )
        .unwrap();
        let TypedOutput::Array(items) = out else { panic!() };
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].len(), 1, "extra keys dropped");
        assert_eq!(items[1]["summary"], PropertyValue::from("b"));
    }

    #[test]
    fn number_for_text_is_mismatch() {
        let schema = OutputSchema::of(OutputKind::SingleTyped, &[("summary", ValueType::Text)]);
        assert!(matches!(
            validate_output(&json!({"summary": 42}), &schema),
            Err(ValidationError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn numeric_strings_coerce() {
        let schema = OutputSchema::new(
            OutputKind::SingleTyped,
            [("year".to_string(), ValueType::Integer), ("score".to_string(), ValueType::Real)].into(),
            BTreeSet::new(),
        )
        .unwrap();
        let TypedOutput::Single(m) = validate_output(&json!({"year": "2023", "score": " 0.5"}), &schema).unwrap()
        else {
            panic!()
        };
        assert_eq!(m["year"], PropertyValue::Integer(2023));
        assert_eq!(m["score"], PropertyValue::Real(0.5));
        // the coerced value serializes back to the plain number
        assert_eq!(serde_json::to_value(&m["year"]).unwrap(), json!(2023));
        for bad in [json!({"year": "20x3"}), json!({"year": true}), json!({"year": 1.5}), json!({"score": "nan"})] {
            assert!(validate_output(&bad, &schema).is_err(), "{bad}");
        }
        // booleans are never coerced from strings
        let b = OutputSchema::of(OutputKind::SingleTyped, &[("ok", ValueType::Boolean)]);
        assert!(validate_output(&json!({"ok": "true"}), &b).is_err());
    }

    #[test]
    fn missing_required_and_optional() {
        let schema = OutputSchema::new(
            OutputKind::SingleTyped,
            [("a".to_string(), ValueType::Text), ("b".to_string(), ValueType::Text)].into(),
            ["a".to_string()].into(),
        )
        .unwrap();
        assert_eq!(
            validate_output(&json!({"b": "x"}), &schema),
            Err(ValidationError::MissingRequired("a".into()))
        );
        assert_eq!(
            validate_output(&json!({"a": null}), &schema),
            Err(ValidationError::MissingRequired("a".into()))
        );
        let TypedOutput::Single(m) = validate_output(&json!({"a": "x", "b": null}), &schema).unwrap() else {
            panic!()
        };
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn array_shapes() {
        let s = summary_array();
        assert!(validate_output(&json!({"challenges": [{"summary": "x"}]}), &s).is_ok());
        assert!(validate_output(&json!([]), &s).is_ok());
        assert!(validate_output(&json!({"summary": "x"}), &s).is_err());
        assert!(validate_output(&json!(["x"]), &s).is_err());
    }

    #[test]
    fn label_schema_carries_required_flags() {
        let s: OutputSchema = serde_json::from_value(json!({
            "single_typed": {"fields": {"a": "text", "n": "integer"}, "required": ["a"]}
        }))
        .unwrap();
        let ls = s.label_schema(NodeRole::Fact);
        assert!(ls.properties["a"].required);
        assert!(!ls.properties["n"].required);
        assert_eq!(ls.properties["n"].value_type, ValueType::Integer);
    }
}
