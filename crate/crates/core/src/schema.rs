//! Attention parameter addressing for encoder-only and encoder-decoder
//! checkpoints.
//!
//! An [`AttnParamRef`] names a Query/Key/Value weight or bias by architecture
//! position. A [`NamingProfile`] turns that into a tensor name, and
//! [`resolve`] finds it in a [`TensorStore`], tolerating an extra top-level
//! prefix such as `roberta.`.

use crate::matrix::DenseMatrix;
use crate::tensor_io::{TensorIoError, TensorStore};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Encoder,
    Decoder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttnComponent {
    Query,
    Key,
    Value,
}

impl AttnComponent {
    pub const ALL: [AttnComponent; 3] = [
        AttnComponent::Query,
        AttnComponent::Key,
        AttnComponent::Value,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Weight,
    Bias,
}

impl ParamKind {
    pub const ALL: [ParamKind; 2] = [ParamKind::Weight, ParamKind::Bias];
}

macro_rules! lowercase_display {
    ($($t:ty => { $($v:ident => $s:literal),* }),*) => {$(
        impl $t {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$v => $s),* }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl std::str::FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s { $($s => Ok(Self::$v),)* _ => Err(format!("unknown {}: {s:?}", stringify!($t))) }
            }
        }
    )*};
}

lowercase_display! {
    Unit => { Encoder => "encoder", Decoder => "decoder" },
    AttnComponent => { Query => "query", Key => "key", Value => "value" },
    ParamKind => { Weight => "weight", Bias => "bias" }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArchLayout {
    EncoderOnly {
        layers: usize,
    },
    EncoderDecoder {
        encoder_layers: usize,
        decoder_layers: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchKind {
    pub layout: ArchLayout,
    pub hidden_dim: usize,
}

pub const DEFAULT_HIDDEN_DIM: usize = 768;

impl ArchKind {
    pub fn encoder_only(layers: usize) -> Self {
        Self {
            layout: ArchLayout::EncoderOnly { layers },
            hidden_dim: DEFAULT_HIDDEN_DIM,
        }
    }

    pub fn encoder_decoder(encoder_layers: usize, decoder_layers: usize) -> Self {
        Self {
            layout: ArchLayout::EncoderDecoder {
                encoder_layers,
                decoder_layers,
            },
            hidden_dim: DEFAULT_HIDDEN_DIM,
        }
    }

    pub fn with_hidden_dim(mut self, hidden_dim: usize) -> Self {
        self.hidden_dim = hidden_dim;
        self
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let ok = self.hidden_dim >= 1
            && match self.layout {
                ArchLayout::EncoderOnly { layers } => layers >= 1,
                ArchLayout::EncoderDecoder {
                    encoder_layers,
                    decoder_layers,
                } => encoder_layers >= 1 && decoder_layers >= 1,
            };
        if ok {
            Ok(())
        } else {
            Err(SchemaError::InvalidArch(format!("{self:?}")))
        }
    }

    pub fn units(&self) -> &'static [Unit] {
        match self.layout {
            ArchLayout::EncoderOnly { .. } => &[Unit::Encoder],
            ArchLayout::EncoderDecoder { .. } => &[Unit::Encoder, Unit::Decoder],
        }
    }

    /// Layer count of `unit`, or `None` if the architecture has no such unit.
    pub fn layer_count(&self, unit: Unit) -> Option<usize> {
        match (self.layout, unit) {
            (ArchLayout::EncoderOnly { layers }, Unit::Encoder) => Some(layers),
            (ArchLayout::EncoderOnly { .. }, Unit::Decoder) => None,
            (ArchLayout::EncoderDecoder { encoder_layers, .. }, Unit::Encoder) => {
                Some(encoder_layers)
            }
            (ArchLayout::EncoderDecoder { decoder_layers, .. }, Unit::Decoder) => {
                Some(decoder_layers)
            }
        }
    }

    pub fn expected_shape(&self, kind: ParamKind) -> (usize, usize) {
        match kind {
            ParamKind::Weight => (self.hidden_dim, self.hidden_dim),
            ParamKind::Bias => (1, self.hidden_dim),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttnParamRef {
    pub unit: Unit,
    pub layer: usize,
    pub component: AttnComponent,
    pub kind: ParamKind,
}

impl AttnParamRef {
    pub fn new(unit: Unit, layer: usize, component: AttnComponent, kind: ParamKind) -> Self {
        Self {
            unit,
            layer,
            component,
            kind,
        }
    }

    pub fn check(&self, arch: &ArchKind) -> Result<(), SchemaError> {
        match arch.layer_count(self.unit) {
            Some(n) if self.layer < n => Ok(()),
            Some(n) => Err(SchemaError::InvalidRef {
                param: *self,
                reason: format!(
                    "layer {} out of range for {} with {n} layers",
                    self.layer, self.unit
                ),
            }),
            None => Err(SchemaError::InvalidRef {
                param: *self,
                reason: "architecture has no decoder".into(),
            }),
        }
    }
}

/// Renders as `encoder.11.key.weight`.
impl fmt::Display for AttnParamRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{}.{}.{}",
            self.unit, self.layer, self.component, self.kind
        )
    }
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("unknown naming profile {0:?}")]
    UnknownProfile(String),
    #[error("invalid profile file: {0}")]
    BadProfile(String),
    #[error("invalid architecture {0}")]
    InvalidArch(String),
    #[error("invalid parameter {param}: {reason}")]
    InvalidRef { param: AttnParamRef, reason: String },
    #[error(
        "profile '{profile}' has no {param} component (no bias parameters in this architecture)"
    )]
    AbsentComponent {
        profile: String,
        param: AttnParamRef,
    },
    #[error("profile '{profile}' has no template for {key}")]
    NoTemplate { profile: String, key: String },
    #[error("missing tensor for {param}: no '{name}' in store (also tried prefixed names)")]
    MissingTensor { param: AttnParamRef, name: String },
    #[error("ambiguous tensor for {param}: candidates {candidates:?}")]
    AmbiguousMatch {
        param: AttnParamRef,
        candidates: Vec<String>,
    },
    #[error("shape mismatch for {param} ('{name}'): expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        param: AttnParamRef,
        name: String,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error(transparent)]
    TensorIo(#[from] TensorIoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemplateKey {
    pub unit: Unit,
    pub component: AttnComponent,
    pub kind: ParamKind,
}

impl TemplateKey {
    fn parse(s: &str) -> Option<Self> {
        let mut it = s.split('.');
        let key = TemplateKey {
            unit: it.next()?.parse().ok()?,
            component: it.next()?.parse().ok()?,
            kind: it.next()?.parse().ok()?,
        };
        it.next().is_none().then_some(key)
    }
}

impl fmt::Display for TemplateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.unit, self.component, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamingProfile {
    pub profile_id: String,
    pub templates: BTreeMap<TemplateKey, String>,
    pub bias_present: bool,
}

impl NamingProfile {
    pub fn template(&self, param: &AttnParamRef) -> Result<&str, SchemaError> {
        if param.kind == ParamKind::Bias && !self.bias_present {
            return Err(SchemaError::AbsentComponent {
                profile: self.profile_id.clone(),
                param: *param,
            });
        }
        let key = TemplateKey {
            unit: param.unit,
            component: param.component,
            kind: param.kind,
        };
        self.templates
            .get(&key)
            .map(String::as_str)
            .ok_or_else(|| SchemaError::NoTemplate {
                profile: self.profile_id.clone(),
                key: key.to_string(),
            })
    }

    /// The tensor name the profile assigns to `param`, before prefix search.
    pub fn tensor_name(&self, param: &AttnParamRef) -> Result<String, SchemaError> {
        Ok(self
            .template(param)?
            .replace("{layer}", &param.layer.to_string()))
    }

    pub fn permits(&self, kind: ParamKind) -> bool {
        kind == ParamKind::Weight || self.bias_present
    }
}

pub const BUILTIN_PROFILES: [&str; 2] = ["bert-style", "t5-style"];

pub fn builtin_profile(id: &str) -> Result<NamingProfile, SchemaError> {
    let mut templates = BTreeMap::new();
    let bias_present = match id {
        "bert-style" => {
            for c in AttnComponent::ALL {
                for k in ParamKind::ALL {
                    templates.insert(
                        TemplateKey {
                            unit: Unit::Encoder,
                            component: c,
                            kind: k,
                        },
                        format!("encoder.layer.{{layer}}.attention.self.{c}.{k}"),
                    );
                }
            }
            true
        }
        "t5-style" => {
            for c in AttnComponent::ALL {
                let short = &c.as_str()[..1];
                templates.insert(
                    TemplateKey {
                        unit: Unit::Encoder,
                        component: c,
                        kind: ParamKind::Weight,
                    },
                    format!("encoder.block.{{layer}}.layer.0.SelfAttention.{short}.weight"),
                );
                templates.insert(
                    TemplateKey {
                        unit: Unit::Decoder,
                        component: c,
                        kind: ParamKind::Weight,
                    },
                    format!("decoder.block.{{layer}}.layer.0.SelfAttention.{short}.weight"),
                );
            }
            false
        }
        other => return Err(SchemaError::UnknownProfile(other.to_owned())),
    };
    Ok(NamingProfile {
        profile_id: id.to_owned(),
        templates,
        bias_present,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    profile_id: String,
    #[serde(default)]
    base: Option<String>,
    #[serde(default)]
    bias_present: Option<bool>,
    #[serde(default)]
    templates: BTreeMap<String, String>,
}

/// Parses a profile file. Templates in the file take precedence over those of
/// the optional `base` built-in profile.
pub fn parse_profile(text: &str) -> Result<NamingProfile, SchemaError> {
    let file: ProfileFile =
        serde_json::from_str(text).map_err(|e| SchemaError::BadProfile(e.to_string()))?;
    let mut profile = match &file.base {
        Some(base) => builtin_profile(base)?,
        None => NamingProfile {
            profile_id: String::new(),
            templates: BTreeMap::new(),
            bias_present: file.bias_present.unwrap_or(false),
        },
    };
    profile.profile_id = file.profile_id;
    if let Some(b) = file.bias_present {
        profile.bias_present = b;
    }
    for (key, template) in file.templates {
        let parsed = TemplateKey::parse(&key)
            .ok_or_else(|| SchemaError::BadProfile(format!("bad template key {key:?}")))?;
        if !template.contains("{layer}") {
            return Err(SchemaError::BadProfile(format!(
                "template for {key} has no {{layer}} placeholder"
            )));
        }
        profile.templates.insert(parsed, template);
    }
    Ok(profile)
}

pub fn load_profile(path: impl AsRef<Path>) -> Result<NamingProfile, SchemaError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| SchemaError::BadProfile(format!("{}: {e}", path.display())))?;
    parse_profile(&text)
}

/// A built-in profile id, or else a path to a profile file.
pub fn profile_from_arg(arg: &str) -> Result<NamingProfile, SchemaError> {
    if BUILTIN_PROFILES.contains(&arg) {
        builtin_profile(arg)
    } else if Path::new(arg).exists() {
        load_profile(arg)
    } else {
        Err(SchemaError::UnknownProfile(arg.to_owned()))
    }
}

fn resolve_one(
    store: &TensorStore,
    profile: &NamingProfile,
    param: &AttnParamRef,
) -> Result<String, SchemaError> {
    let name = profile.tensor_name(param)?;
    if store.contains(&name) {
        return Ok(name);
    }
    let suffix = format!(".{name}");
    let candidates: Vec<String> = store
        .names()
        .filter(|n| n.ends_with(&suffix))
        .map(str::to_owned)
        .collect();
    match candidates.len() {
        0 => Err(SchemaError::MissingTensor {
            param: *param,
            name,
        }),
        1 => Ok(candidates.into_iter().next().unwrap()),
        _ => Err(SchemaError::AmbiguousMatch {
            param: *param,
            candidates,
        }),
    }
}

/// Maps every ref to exactly one tensor name in `store`. Fails on the first
/// ref, in the given order, that cannot be resolved.
pub fn resolve(
    store: &TensorStore,
    arch: &ArchKind,
    profile: &NamingProfile,
    refs: &[AttnParamRef],
) -> Result<BTreeMap<AttnParamRef, String>, SchemaError> {
    arch.validate()?;
    let mut out = BTreeMap::new();
    for param in refs {
        param.check(arch)?;
        out.insert(*param, resolve_one(store, profile, param)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerSelection {
    All,
    Last,
    Explicit(Vec<usize>),
}

impl std::str::FromStr for LayerSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(LayerSelection::All),
            "last" => Ok(LayerSelection::Last),
            list => list
                .split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map(LayerSelection::Explicit)
                .map_err(|_| format!("layers must be 'all', 'last' or a comma list, got {s:?}")),
        }
    }
}

impl LayerSelection {
    fn layers(&self, count: usize) -> Vec<usize> {
        match self {
            LayerSelection::All => (0..count).collect(),
            LayerSelection::Last => vec![count - 1],
            LayerSelection::Explicit(v) => v.clone(),
        }
    }
}

/// Enumerates refs for the selected layers of every unit, in unit, layer,
/// component, kind order.
pub fn enumerate_refs(
    arch: &ArchKind,
    selection: &LayerSelection,
    kinds: &[ParamKind],
) -> Result<Vec<AttnParamRef>, SchemaError> {
    arch.validate()?;
    let mut refs = Vec::new();
    for &unit in arch.units() {
        let count = arch.layer_count(unit).expect("unit listed by arch");
        for layer in selection.layers(count) {
            for component in AttnComponent::ALL {
                for &kind in kinds {
                    let r = AttnParamRef::new(unit, layer, component, kind);
                    r.check(arch)?;
                    refs.push(r);
                }
            }
        }
    }
    Ok(refs)
}

#[derive(Debug, Clone)]
pub struct AttnParamSet {
    pub arch: ArchKind,
    pub params: BTreeMap<AttnParamRef, DenseMatrix>,
    pub names: BTreeMap<AttnParamRef, String>,
    pub nonfinite: BTreeMap<AttnParamRef, usize>,
}

impl AttnParamSet {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, r: &AttnParamRef) -> Option<&DenseMatrix> {
        self.params.get(r)
    }
}

/// Resolves, reads and shape-checks the given refs.
pub fn extract_refs(
    store: &TensorStore,
    arch: &ArchKind,
    profile: &NamingProfile,
    refs: &[AttnParamRef],
) -> Result<AttnParamSet, SchemaError> {
    let names = resolve(store, arch, profile, refs)?;
    let mut params = BTreeMap::new();
    let mut nonfinite = BTreeMap::new();
    for (param, name) in &names {
        let m = store.read_tensor(name)?;
        let expected = arch.expected_shape(param.kind);
        if m.shape() != expected {
            return Err(SchemaError::ShapeMismatch {
                param: *param,
                name: name.clone(),
                expected,
                actual: m.shape(),
            });
        }
        nonfinite.insert(*param, m.nonfinite_count());
        params.insert(*param, m);
    }
    Ok(AttnParamSet {
        arch: *arch,
        params,
        names,
        nonfinite,
    })
}

/// Extracts every Q/K/V weight, plus biases when the profile has them, for
/// the selected layers.
pub fn extract_set(
    store: &TensorStore,
    arch: &ArchKind,
    profile: &NamingProfile,
    selection: &LayerSelection,
) -> Result<AttnParamSet, SchemaError> {
    let kinds: Vec<ParamKind> = ParamKind::ALL
        .into_iter()
        .filter(|k| profile.permits(*k))
        .collect();
    let refs = enumerate_refs(arch, selection, &kinds)?;
    extract_refs(store, arch, profile, &refs)
}
