//! The Schema.org-derived metadata model: four classes, their property
//! schemas, and the validator that gates every metadata write.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::clock::Timestamp;
use crate::pid::Pid;

pub const SCHEMA_ORG_CONTEXT: &str = "https://schema.org/";

/// Property map of a metadata record. Keys are kept sorted, which makes
/// every serialization of a record deterministic.
pub type Properties = serde_json::Map<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetadataClass {
    CreativeWork,
    Service,
    Person,
    Organization,
}

impl MetadataClass {
    pub const ALL: [MetadataClass; 4] = [
        MetadataClass::CreativeWork,
        MetadataClass::Service,
        MetadataClass::Person,
        MetadataClass::Organization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetadataClass::CreativeWork => "CreativeWork",
            MetadataClass::Service => "Service",
            MetadataClass::Person => "Person",
            MetadataClass::Organization => "Organization",
        }
    }
}

impl fmt::Display for MetadataClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metadata class {0:?}")]
pub struct UnknownClass(pub String);

impl FromStr for MetadataClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetadataClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownClass(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Active,
    Tombstoned,
}

/// Shape a property value must take on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueShape {
    Text,
    EntityRef,
    EntityRefList,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertySchema {
    pub name: &'static str,
    pub shape: ValueShape,
    pub required: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub allowed_classes: Vec<MetadataClass>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub allowed_values: Vec<&'static str>,
    #[serde(skip_serializing_if = "is_zero")]
    pub min_items: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassSchema {
    #[serde(rename = "@context")]
    pub context: &'static str,
    pub class: MetadataClass,
    pub properties: Vec<PropertySchema>,
}

impl ClassSchema {
    pub fn property(&self, name: &str) -> Option<&PropertySchema> {
        self.properties.iter().find(|p| p.name == name)
    }
}

fn text(name: &'static str, required: bool) -> PropertySchema {
    PropertySchema {
        name,
        shape: ValueShape::Text,
        required,
        allowed_classes: Vec::new(),
        allowed_values: Vec::new(),
        min_items: 0,
    }
}

fn entity(name: &'static str, required: bool, allowed: &[MetadataClass]) -> PropertySchema {
    PropertySchema {
        shape: ValueShape::EntityRef,
        allowed_classes: allowed.to_vec(),
        ..text(name, required)
    }
}

fn entity_list(
    name: &'static str,
    required: bool,
    min_items: usize,
    allowed: &[MetadataClass],
) -> PropertySchema {
    PropertySchema {
        shape: ValueShape::EntityRefList,
        allowed_classes: allowed.to_vec(),
        min_items,
        ..text(name, required)
    }
}

const AGENTS: &[MetadataClass] = &[MetadataClass::Person, MetadataClass::Organization];

/// Allowed values of `CreativeWork.additionalType`.
pub const CREATIVE_WORK_TYPES: [&str; 3] = ["Dataset", "SoftwareSourceCode", "ScholarlyArticle"];

static SCHEMAS: LazyLock<[ClassSchema; 4]> = LazyLock::new(|| {
    let schema = |class, properties| ClassSchema {
        context: SCHEMA_ORG_CONTEXT,
        class,
        properties,
    };
    [
        schema(
            MetadataClass::CreativeWork,
            vec![
                text("name", true),
                PropertySchema {
                    allowed_values: CREATIVE_WORK_TYPES.to_vec(),
                    ..text("additionalType", true)
                },
                text("description", false),
                entity_list("creator", true, 1, AGENTS),
                entity_list("citation", false, 0, &[MetadataClass::CreativeWork]),
                text("dateCreated", false),
                text("license", false),
            ],
        ),
        schema(
            MetadataClass::Service,
            vec![
                text("name", true),
                entity("provider", true, AGENTS),
                text("description", false),
                text("url", false),
            ],
        ),
        schema(
            MetadataClass::Person,
            vec![
                text("name", true),
                text("identifier", false),
                text("email", false),
                entity("affiliation", false, &[MetadataClass::Organization]),
            ],
        ),
        schema(
            MetadataClass::Organization,
            vec![text("name", true), text("url", false), text("identifier", false)],
        ),
    ]
});

/// The machine-readable schema for one class.
pub fn class_schema(class: MetadataClass) -> &'static ClassSchema {
    let idx = MetadataClass::ALL
        .iter()
        .position(|c| *c == class)
        .expect("class is in ALL");
    &SCHEMAS[idx]
}

/// Looks up a schema by class name.
pub fn class_schema_by_name(name: &str) -> Result<&'static ClassSchema, UnknownClass> {
    name.parse().map(class_schema)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    UnknownClass,
    RequiredMissing,
    UnknownProperty,
    WrongShape,
    ValueNotAllowed,
    EmptyList,
    InvalidPid,
    DanglingRef,
    TombstonedRef,
    ClassNotAllowed,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::UnknownClass => "UNKNOWN_CLASS",
            ViolationCode::RequiredMissing => "REQUIRED_MISSING",
            ViolationCode::UnknownProperty => "UNKNOWN_PROPERTY",
            ViolationCode::WrongShape => "WRONG_SHAPE",
            ViolationCode::ValueNotAllowed => "VALUE_NOT_ALLOWED",
            ViolationCode::EmptyList => "EMPTY_LIST",
            ViolationCode::InvalidPid => "INVALID_PID",
            ViolationCode::DanglingRef => "DANGLING_REF",
            ViolationCode::TombstonedRef => "TOMBSTONED_REF",
            ViolationCode::ClassNotAllowed => "CLASS_NOT_ALLOWED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub code: ViolationCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort_by(|a, b| {
            a.path
                .cmp(&b.path)
                .then_with(|| a.code.as_str().cmp(b.code.as_str()))
        });
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

/// Answers "what class and status does this metadata PID have", or `None`
/// for PIDs the Metadata Registry has never stored.
pub trait Resolver {
    fn resolve(&self, pid: &Pid) -> Option<(MetadataClass, RecordStatus)>;
}

impl<F> Resolver for F
where
    F: Fn(&Pid) -> Option<(MetadataClass, RecordStatus)>,
{
    fn resolve(&self, pid: &Pid) -> Option<(MetadataClass, RecordStatus)> {
        self(pid)
    }
}

/// Validates a property map for a class given by name. Every violation is
/// collected; the result is sorted by path, then code.
pub fn validate(class_name: &str, properties: &Properties, resolver: &dyn Resolver) -> ValidationReport {
    match class_name.parse::<MetadataClass>() {
        Ok(class) => validate_class(class, properties, resolver),
        Err(_) => ValidationReport::from_violations(vec![Violation {
            path: "@type".into(),
            code: ViolationCode::UnknownClass,
            message: format!("{class_name:?} is not one of CreativeWork, Service, Person, Organization"),
        }]),
    }
}

pub fn validate_class(
    class: MetadataClass,
    properties: &Properties,
    resolver: &dyn Resolver,
) -> ValidationReport {
    let schema = class_schema(class);
    let mut out = Vec::new();

    for key in properties.keys() {
        if schema.property(key).is_none() {
            out.push(Violation {
                path: key.clone(),
                code: ViolationCode::UnknownProperty,
                message: format!("{class} has no property {key:?}"),
            });
        }
    }

    for prop in &schema.properties {
        let Some(value) = properties.get(prop.name) else {
            if prop.required {
                out.push(Violation {
                    path: prop.name.into(),
                    code: ViolationCode::RequiredMissing,
                    message: format!("{class}.{} is required", prop.name),
                });
            }
            continue;
        };
        check_value(prop, value, resolver, &mut out);
    }

    ValidationReport::from_violations(out)
}

fn wrong_shape(path: String, expected: &str) -> Violation {
    Violation {
        message: format!("{path} must be {expected}"),
        path,
        code: ViolationCode::WrongShape,
    }
}

fn check_value(prop: &PropertySchema, value: &Value, resolver: &dyn Resolver, out: &mut Vec<Violation>) {
    match prop.shape {
        ValueShape::Text => match value.as_str() {
            None => out.push(wrong_shape(prop.name.into(), "a string")),
            Some(s) if !prop.allowed_values.is_empty() && !prop.allowed_values.contains(&s) => {
                out.push(Violation {
                    path: prop.name.into(),
                    code: ViolationCode::ValueNotAllowed,
                    message: format!("{s:?} is not one of {:?}", prop.allowed_values),
                })
            }
            Some(_) => {}
        },
        ValueShape::EntityRef => check_ref(prop, prop.name.to_owned(), value, resolver, out),
        ValueShape::EntityRefList => {
            let Some(items) = value.as_array() else {
                out.push(wrong_shape(prop.name.into(), "a list of PIDs"));
                return;
            };
            if items.len() < prop.min_items {
                out.push(Violation {
                    path: prop.name.into(),
                    code: ViolationCode::EmptyList,
                    message: format!("{} needs at least {} entry", prop.name, prop.min_items),
                });
            }
            for (i, item) in items.iter().enumerate() {
                check_ref(prop, format!("{}[{i}]", prop.name), item, resolver, out);
            }
        }
    }
}

fn check_ref(
    prop: &PropertySchema,
    path: String,
    value: &Value,
    resolver: &dyn Resolver,
    out: &mut Vec<Violation>,
) {
    let Some(text) = value.as_str() else {
        out.push(wrong_shape(path, "a PID string"));
        return;
    };
    let pid = match Pid::parse(text) {
        Ok(pid) => pid,
        Err(e) => {
            out.push(Violation {
                path,
                code: ViolationCode::InvalidPid,
                message: e.to_string(),
            });
            return;
        }
    };
    let Some((class, status)) = resolver.resolve(&pid) else {
        out.push(Violation {
            path,
            code: ViolationCode::DanglingRef,
            message: format!("{pid} does not resolve to a metadata record"),
        });
        return;
    };
    if status == RecordStatus::Tombstoned {
        out.push(Violation {
            path: path.clone(),
            code: ViolationCode::TombstonedRef,
            message: format!("{pid} has been deleted"),
        });
    }
    if !prop.allowed_classes.contains(&class) {
        out.push(Violation {
            path,
            code: ViolationCode::ClassNotAllowed,
            message: format!("{pid} is a {class}; {} accepts {:?}", prop.name, prop.allowed_classes),
        });
    }
}

/// One entity reference found in a property map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub property: &'static str,
    pub ordinal: usize,
    pub target: Pid,
}

/// Extracts every well-formed entity reference from a property map, in
/// schema order. Single-valued references get ordinal 0.
pub fn references(class: MetadataClass, properties: &Properties) -> Vec<Reference> {
    let mut refs = Vec::new();
    for prop in &class_schema(class).properties {
        let Some(value) = properties.get(prop.name) else {
            continue;
        };
        let targets: Vec<&Value> = match prop.shape {
            ValueShape::Text => continue,
            ValueShape::EntityRef => vec![value],
            ValueShape::EntityRefList => value.as_array().map(|a| a.iter().collect()).unwrap_or_default(),
        };
        for (ordinal, target) in targets.into_iter().enumerate() {
            if let Some(pid) = target.as_str().and_then(|s| Pid::parse(s).ok()) {
                refs.push(Reference {
                    property: prop.name,
                    ordinal,
                    target: pid,
                });
            }
        }
    }
    refs
}

/// Marker serialized as the JSON-LD `@context`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SchemaOrgContext;

impl Serialize for SchemaOrgContext {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(SCHEMA_ORG_CONTEXT)
    }
}

impl<'de> Deserialize<'de> for SchemaOrgContext {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        if text == SCHEMA_ORG_CONTEXT {
            Ok(SchemaOrgContext)
        } else {
            Err(serde::de::Error::custom(format!("unsupported @context {text:?}")))
        }
    }
}

/// A standalone, PID-addressed metadata record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    #[serde(rename = "@context", default)]
    pub context: SchemaOrgContext,
    pub pid: Pid,
    #[serde(rename = "@type")]
    pub class: MetadataClass,
    pub properties: Properties,
    pub version: u64,
    pub created: Timestamp,
    pub modified: Timestamp,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deleted_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deletion_reason: Option<String>,
}

impl MetadataRecord {
    pub fn is_active(&self) -> bool {
        self.status == RecordStatus::Active
    }

    pub fn references(&self) -> Vec<Reference> {
        references(self.class, &self.properties)
    }
}
