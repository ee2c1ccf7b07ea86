//! JSON model specifications: parsing, printing and construction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use distkit::bijector::{AutoregressiveFn, LinearAutoregressive, BIJECTOR_NAMES};
use distkit::families::{Bernoulli, Categorical, Normal, FAMILY_NAMES};
use distkit::meta::{kde, Autoregressive, Independent, MakeDistribution, Mixture, MixtureSameFamily, TransformedDistribution};
use distkit::{construct_bijector, construct_family, Bijector, Chain, DType, Distribution, Flags, Invert, NdValue, ParamMap, Shape};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};
use crate::records::read_points;

/// Placeholder accepted in a KDE kernel template for the stacked points.
pub const POINTS_PLACEHOLDER: &str = "$points";

/// A parameter value: a number, a (possibly nested) array, or the KDE points placeholder.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Number(f64),
    Array(Vec<ParamValue>),
    Points,
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq)]
pub enum BijectorSpec {
    Named {
        name: String,
        params: Params,
        validate_args: Option<bool>,
    },
    Invert(Box<BijectorSpec>),
    Chain(Vec<BijectorSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Components {
    /// One spec whose rightmost batch axis indexes the components.
    Same(Box<ModelSpec>),
    List(Vec<ModelSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Leaf {
        family: String,
        params: Params,
        validate_args: Option<bool>,
        allow_nan_stats: Option<bool>,
    },
    Transformed {
        base: Box<ModelSpec>,
        bijectors: Vec<BijectorSpec>,
        batch_shape: Option<Vec<usize>>,
        event_shape: Option<Vec<usize>>,
    },
    Independent {
        base: Box<ModelSpec>,
        rank: Option<usize>,
    },
    Mixture {
        probs: Vec<f64>,
        components: Components,
    },
    /// Linear autoregressive conditionals; `family` is `Normal` or `Bernoulli`.
    Autoregressive {
        family: String,
        params: Params,
        steps: Option<usize>,
    },
    Kde {
        points_file: String,
        kernel: Box<ModelSpec>,
    },
}

// ---------------------------------------------------------------- parsing

fn object<'a>(v: &'a Value, path: &str, allowed: &[&str]) -> CliResult<&'a Map<String, Value>> {
    let m = v
        .as_object()
        .ok_or_else(|| CliError::parse(path, "expected an object"))?;
    if let Some(k) = m.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(CliError::parse(
            format!("{path}.{k}"),
            format!("unknown key; expected one of {allowed:?}"),
        ));
    }
    Ok(m)
}

fn required<'a>(m: &'a Map<String, Value>, key: &str, path: &str) -> CliResult<&'a Value> {
    m.get(key)
        .ok_or_else(|| CliError::parse(format!("{path}.{key}"), "missing required key"))
}

fn opt_bool(m: &Map<String, Value>, key: &str, path: &str) -> CliResult<Option<bool>> {
    m.get(key)
        .map(|v| {
            v.as_bool()
                .ok_or_else(|| CliError::parse(format!("{path}.{key}"), "expected true or false"))
        })
        .transpose()
}

fn as_usize(v: &Value, path: &str) -> CliResult<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| CliError::parse(path, "expected a non-negative integer"))
}

fn opt_usize(m: &Map<String, Value>, key: &str, path: &str) -> CliResult<Option<usize>> {
    m.get(key).map(|v| as_usize(v, &format!("{path}.{key}"))).transpose()
}

fn opt_dims(m: &Map<String, Value>, key: &str, path: &str) -> CliResult<Option<Vec<usize>>> {
    let path = format!("{path}.{key}");
    m.get(key)
        .map(|v| {
            v.as_array()
                .ok_or_else(|| CliError::parse(&path, "expected an array of dimensions"))?
                .iter()
                .enumerate()
                .map(|(i, d)| as_usize(d, &format!("{path}[{i}]")))
                .collect()
        })
        .transpose()
}

fn parse_number(v: &Value, path: &str) -> CliResult<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| CliError::parse(path, "number out of range")),
        Value::String(s) => match s.as_str() {
            "Infinity" | "inf" => Ok(f64::INFINITY),
            "-Infinity" | "-inf" => Ok(f64::NEG_INFINITY),
            "NaN" | "nan" => Ok(f64::NAN),
            _ => Err(CliError::parse(path, format!("expected a number, got string {s:?}"))),
        },
        _ => Err(CliError::parse(path, "expected a number")),
    }
}

fn parse_param(v: &Value, path: &str) -> CliResult<ParamValue> {
    match v {
        Value::Array(items) => Ok(ParamValue::Array(
            items
                .iter()
                .enumerate()
                .map(|(i, x)| parse_param(x, &format!("{path}[{i}]")))
                .collect::<CliResult<_>>()?,
        )),
        Value::String(s) if s == POINTS_PLACEHOLDER => Ok(ParamValue::Points),
        other => parse_number(other, path).map(ParamValue::Number),
    }
}

fn parse_params(m: &Map<String, Value>, path: &str) -> CliResult<Params> {
    let path = format!("{path}.params");
    match m.get("params") {
        None => Ok(Params::new()),
        Some(v) => v
            .as_object()
            .ok_or_else(|| CliError::parse(&path, "expected an object of named parameters"))?
            .iter()
            .map(|(k, v)| Ok((k.clone(), parse_param(v, &format!("{path}.{k}"))?)))
            .collect(),
    }
}

fn parse_name(v: &Value, path: &str, catalog: &[&str], what: &str) -> CliResult<String> {
    let name = v
        .as_str()
        .ok_or_else(|| CliError::parse(path, format!("expected a {what} name")))?;
    if !catalog.contains(&name) {
        return Err(CliError::parse(path, format!("unknown {what} `{name}`")));
    }
    Ok(name.to_string())
}

/// Parses a model spec from JSON text. `path` prefixes error locations.
pub fn parse_model_str(text: &str, path: &str) -> CliResult<ModelSpec> {
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::parse(path, format!("invalid JSON: {e}")))?;
    parse_model(&v, path)
}

pub fn parse_model(v: &Value, path: &str) -> CliResult<ModelSpec> {
    let m = v
        .as_object()
        .ok_or_else(|| CliError::parse(path, "expected a model object"))?;
    if m.contains_key("family") {
        let m = object(v, path, &["family", "params", "validate_args", "allow_nan_stats"])?;
        return Ok(ModelSpec::Leaf {
            family: parse_name(&m["family"], &format!("{path}.family"), FAMILY_NAMES, "family")?,
            params: parse_params(m, path)?,
            validate_args: opt_bool(m, "validate_args", path)?,
            allow_nan_stats: opt_bool(m, "allow_nan_stats", path)?,
        });
    }
    let kinds = ["transformed", "independent", "mixture", "autoregressive", "kde"];
    if m.len() != 1 || !kinds.contains(&m.keys().next().map(String::as_str).unwrap_or("")) {
        let found: Vec<&String> = m.keys().collect();
        return Err(CliError::parse(
            path,
            format!("expected `family` or exactly one of {kinds:?}, found keys {found:?}"),
        ));
    }
    let (kind, body) = m.iter().next().expect("one key");
    let path = format!("{path}.{kind}");
    let path = path.as_str();
    Ok(match kind.as_str() {
        "transformed" => {
            let b = object(body, path, &["base", "bijectors", "batch_shape", "event_shape"])?;
            let bijectors = required(b, "bijectors", path)?
                .as_array()
                .ok_or_else(|| CliError::parse(format!("{path}.bijectors"), "expected an array"))?
                .iter()
                .enumerate()
                .map(|(i, x)| parse_bijector(x, &format!("{path}.bijectors[{i}]")))
                .collect::<CliResult<_>>()?;
            ModelSpec::Transformed {
                base: Box::new(parse_model(required(b, "base", path)?, &format!("{path}.base"))?),
                bijectors,
                batch_shape: opt_dims(b, "batch_shape", path)?,
                event_shape: opt_dims(b, "event_shape", path)?,
            }
        }
        "independent" => {
            let b = object(body, path, &["base", "rank"])?;
            ModelSpec::Independent {
                base: Box::new(parse_model(required(b, "base", path)?, &format!("{path}.base"))?),
                rank: opt_usize(b, "rank", path)?,
            }
        }
        "mixture" => {
            let b = object(body, path, &["probs", "components"])?;
            let probs_path = format!("{path}.probs");
            let probs = required(b, "probs", path)?
                .as_array()
                .ok_or_else(|| CliError::parse(&probs_path, "expected an array of numbers"))?
                .iter()
                .enumerate()
                .map(|(i, x)| parse_number(x, &format!("{probs_path}[{i}]")))
                .collect::<CliResult<_>>()?;
            let cpath = format!("{path}.components");
            let components = match required(b, "components", path)? {
                Value::Array(items) => Components::List(
                    items
                        .iter()
                        .enumerate()
                        .map(|(i, x)| parse_model(x, &format!("{cpath}[{i}]")))
                        .collect::<CliResult<_>>()?,
                ),
                other => Components::Same(Box::new(parse_model(other, &cpath)?)),
            };
            ModelSpec::Mixture { probs, components }
        }
        "autoregressive" => {
            let b = object(body, path, &["family", "params", "steps"])?;
            ModelSpec::Autoregressive {
                family: parse_name(
                    required(b, "family", path)?,
                    &format!("{path}.family"),
                    &["Normal", "Bernoulli"],
                    "autoregressive family",
                )?,
                params: parse_params(b, path)?,
                steps: opt_usize(b, "steps", path)?,
            }
        }
        "kde" => {
            let b = object(body, path, &["points_file", "kernel"])?;
            ModelSpec::Kde {
                points_file: required(b, "points_file", path)?
                    .as_str()
                    .ok_or_else(|| CliError::parse(format!("{path}.points_file"), "expected a path string"))?
                    .to_string(),
                kernel: Box::new(parse_model(required(b, "kernel", path)?, &format!("{path}.kernel"))?),
            }
        }
        _ => unreachable!(),
    })
}

pub fn parse_bijector(v: &Value, path: &str) -> CliResult<BijectorSpec> {
    let m = v
        .as_object()
        .ok_or_else(|| CliError::parse(path, "expected a bijector object"))?;
    if m.contains_key("bijector") {
        let m = object(v, path, &["bijector", "params", "validate_args"])?;
        return Ok(BijectorSpec::Named {
            name: parse_name(&m["bijector"], &format!("{path}.bijector"), BIJECTOR_NAMES, "bijector")?,
            params: parse_params(m, path)?,
            validate_args: opt_bool(m, "validate_args", path)?,
        });
    }
    if let Some(inner) = m.get("invert") {
        object(v, path, &["invert"])?;
        return Ok(BijectorSpec::Invert(Box::new(parse_bijector(inner, &format!("{path}.invert"))?)));
    }
    if let Some(parts) = m.get("chain") {
        object(v, path, &["chain"])?;
        let cpath = format!("{path}.chain");
        let parts = parts
            .as_array()
            .ok_or_else(|| CliError::parse(&cpath, "expected an array of bijectors"))?
            .iter()
            .enumerate()
            .map(|(i, x)| parse_bijector(x, &format!("{cpath}[{i}]")))
            .collect::<CliResult<_>>()?;
        return Ok(BijectorSpec::Chain(parts));
    }
    Err(CliError::parse(path, "expected one of `bijector`, `invert`, `chain`"))
}

// --------------------------------------------------------------- printing

fn number_json(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| {
        Value::String(
            if x.is_nan() {
                "NaN"
            } else if x > 0.0 {
                "Infinity"
            } else {
                "-Infinity"
            }
            .into(),
        )
    })
}

fn param_json(p: &ParamValue) -> Value {
    match p {
        ParamValue::Number(x) => number_json(*x),
        ParamValue::Array(items) => Value::Array(items.iter().map(param_json).collect()),
        ParamValue::Points => Value::String(POINTS_PLACEHOLDER.into()),
    }
}

fn params_json(p: &Params) -> Value {
    Value::Object(p.iter().map(|(k, v)| (k.clone(), param_json(v))).collect())
}

fn dims_json(d: &[usize]) -> Value {
    Value::Array(d.iter().map(|&x| Value::from(x)).collect())
}

fn single(key: &str, body: Value) -> Value {
    let mut m = Map::new();
    m.insert(key.into(), body);
    Value::Object(m)
}

impl ModelSpec {
    pub fn to_json(&self) -> Value {
        match self {
            ModelSpec::Leaf {
                family,
                params,
                validate_args,
                allow_nan_stats,
            } => {
                let mut m = Map::new();
                m.insert("family".into(), Value::from(family.as_str()));
                m.insert("params".into(), params_json(params));
                if let Some(b) = validate_args {
                    m.insert("validate_args".into(), Value::Bool(*b));
                }
                if let Some(b) = allow_nan_stats {
                    m.insert("allow_nan_stats".into(), Value::Bool(*b));
                }
                Value::Object(m)
            }
            ModelSpec::Transformed {
                base,
                bijectors,
                batch_shape,
                event_shape,
            } => {
                let mut m = Map::new();
                m.insert("base".into(), base.to_json());
                m.insert("bijectors".into(), Value::Array(bijectors.iter().map(BijectorSpec::to_json).collect()));
                if let Some(s) = batch_shape {
                    m.insert("batch_shape".into(), dims_json(s));
                }
                if let Some(s) = event_shape {
                    m.insert("event_shape".into(), dims_json(s));
                }
                single("transformed", Value::Object(m))
            }
            ModelSpec::Independent { base, rank } => {
                let mut m = Map::new();
                m.insert("base".into(), base.to_json());
                if let Some(r) = rank {
                    m.insert("rank".into(), Value::from(*r));
                }
                single("independent", Value::Object(m))
            }
            ModelSpec::Mixture { probs, components } => {
                let mut m = Map::new();
                m.insert("probs".into(), Value::Array(probs.iter().map(|&p| number_json(p)).collect()));
                let c = match components {
                    Components::Same(s) => s.to_json(),
                    Components::List(l) => Value::Array(l.iter().map(ModelSpec::to_json).collect()),
                };
                m.insert("components".into(), c);
                single("mixture", Value::Object(m))
            }
            ModelSpec::Autoregressive { family, params, steps } => {
                let mut m = Map::new();
                m.insert("family".into(), Value::from(family.as_str()));
                m.insert("params".into(), params_json(params));
                if let Some(s) = steps {
                    m.insert("steps".into(), Value::from(*s));
                }
                single("autoregressive", Value::Object(m))
            }
            ModelSpec::Kde { points_file, kernel } => {
                let mut m = Map::new();
                m.insert("points_file".into(), Value::from(points_file.as_str()));
                m.insert("kernel".into(), kernel.to_json());
                single("kde", Value::Object(m))
            }
        }
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

impl BijectorSpec {
    pub fn to_json(&self) -> Value {
        match self {
            BijectorSpec::Named {
                name,
                params,
                validate_args,
            } => {
                let mut m = Map::new();
                m.insert("bijector".into(), Value::from(name.as_str()));
                m.insert("params".into(), params_json(params));
                if let Some(b) = validate_args {
                    m.insert("validate_args".into(), Value::Bool(*b));
                }
                Value::Object(m)
            }
            BijectorSpec::Invert(inner) => single("invert", inner.to_json()),
            BijectorSpec::Chain(parts) => single("chain", Value::Array(parts.iter().map(BijectorSpec::to_json).collect())),
        }
    }
}

// ----------------------------------------------------------- construction

/// Settings shared by every node while building a model.
#[derive(Debug, Clone)]
pub struct BuildContext {
    pub dtype: DType,
    /// Directory against which relative `points_file` paths are resolved.
    pub base_dir: PathBuf,
    points: Option<NdValue>,
}

impl BuildContext {
    pub fn new(dtype: DType, base_dir: impl Into<PathBuf>) -> Self {
        BuildContext {
            dtype,
            base_dir: base_dir.into(),
            points: None,
        }
    }

    pub fn with_points(&self, points: NdValue) -> Self {
        BuildContext {
            points: Some(points),
            ..self.clone()
        }
    }
}

fn nominal_shape(p: &ParamValue) -> Vec<usize> {
    match p {
        ParamValue::Array(items) => {
            let mut dims = vec![items.len()];
            if let Some(first) = items.first() {
                dims.extend(nominal_shape(first));
            }
            dims
        }
        _ => Vec::new(),
    }
}

fn flatten(p: &ParamValue, expected: &[usize], path: &str, out: &mut Vec<f64>) -> CliResult<()> {
    match (p, expected) {
        (ParamValue::Number(x), []) => {
            out.push(*x);
            Ok(())
        }
        (ParamValue::Array(items), [n, rest @ ..]) if items.len() == *n => items
            .iter()
            .enumerate()
            .try_for_each(|(i, item)| flatten(item, rest, &format!("{path}[{i}]"), out)),
        (ParamValue::Points, _) => Err(CliError::parse(path, "`$points` cannot be nested inside an array")),
        _ => Err(CliError::parse(path, "ragged array")),
    }
}

/// Converts a parameter to an array of the build dtype.
pub fn param_value(p: &ParamValue, ctx: &BuildContext, path: &str) -> CliResult<NdValue> {
    let v = match p {
        ParamValue::Points => ctx
            .points
            .clone()
            .ok_or_else(|| CliError::parse(path, "`$points` is only valid inside a kde kernel"))?,
        other => {
            let shape = nominal_shape(other);
            let mut data = Vec::new();
            flatten(other, &shape, path, &mut data)?;
            NdValue::new(shape, DType::F64, data).map_err(|e| CliError::library(path, e))?
        }
    };
    v.cast(ctx.dtype).map_err(|e| CliError::library(path, e))
}

fn param_map(params: &Params, ctx: &BuildContext, path: &str) -> CliResult<ParamMap> {
    params
        .iter()
        .map(|(k, v)| Ok((k.clone(), param_value(v, ctx, &format!("{path}.params.{k}"))?)))
        .collect()
}

pub fn build_bijector(spec: &BijectorSpec, ctx: &BuildContext, path: &str) -> CliResult<Arc<dyn Bijector>> {
    match spec {
        BijectorSpec::Named {
            name,
            params,
            validate_args,
        } => {
            let p = param_map(params, ctx, path)?;
            construct_bijector(name, &p, validate_args.unwrap_or(false)).map_err(|e| CliError::library(&format!("{path}.params"), e))
        }
        BijectorSpec::Invert(inner) => {
            let b = build_bijector(inner, ctx, &format!("{path}.invert"))?;
            Ok(Arc::new(Invert::new(b).map_err(|e| CliError::library(path, e))?))
        }
        BijectorSpec::Chain(parts) => {
            let parts = parts
                .iter()
                .enumerate()
                .map(|(i, b)| build_bijector(b, ctx, &format!("{path}.chain[{i}]")))
                .collect::<CliResult<Vec<_>>>()?;
            Ok(Arc::new(Chain::new(parts).map_err(|e| CliError::library(path, e))?))
        }
    }
}

/// Builds the distribution described by `spec`; `path` names the root in
/// error messages.
pub fn build_model(spec: &ModelSpec, ctx: &BuildContext, path: &str) -> CliResult<Arc<dyn Distribution>> {
    let lib = |p: &str| {
        let p = p.to_string();
        move |e| CliError::library(&p, e)
    };
    match spec {
        ModelSpec::Leaf {
            family,
            params,
            validate_args,
            allow_nan_stats,
        } => {
            let defaults = Flags::default();
            let flags = Flags {
                validate_args: validate_args.unwrap_or(defaults.validate_args),
                allow_nan_stats: allow_nan_stats.unwrap_or(defaults.allow_nan_stats),
            };
            let p = param_map(params, ctx, path)?;
            construct_family(family, &p, flags).map_err(lib(&format!("{path}.params")))
        }
        ModelSpec::Transformed {
            base,
            bijectors,
            batch_shape,
            event_shape,
        } => {
            let path = format!("{path}.transformed");
            let base = build_model(base, ctx, &format!("{path}.base"))?;
            let parts = bijectors
                .iter()
                .enumerate()
                .map(|(i, b)| build_bijector(b, ctx, &format!("{path}.bijectors[{i}]")))
                .collect::<CliResult<Vec<_>>>()?;
            let bij: Arc<dyn Bijector> = if parts.len() == 1 {
                parts.into_iter().next().expect("one part")
            } else {
                Arc::new(Chain::new(parts).map_err(lib(&format!("{path}.bijectors")))?)
            };
            let td = TransformedDistribution::with_shapes(
                base,
                bij,
                batch_shape.clone().map(Shape::new),
                event_shape.clone().map(Shape::new),
            )
            .map_err(lib(&path))?;
            Ok(Arc::new(td))
        }
        ModelSpec::Independent { base, rank } => {
            let path = format!("{path}.independent");
            let inner = build_model(base, ctx, &format!("{path}.base"))?;
            let d = match rank {
                Some(r) => Independent::new(inner, *r),
                None => Independent::rightmost(inner),
            }
            .map_err(lib(&format!("{path}.rank")))?;
            Ok(Arc::new(d))
        }
        ModelSpec::Mixture { probs, components } => {
            let path = format!("{path}.mixture");
            let probs_path = format!("{path}.probs");
            let probs = NdValue::vector(probs.clone()).cast(ctx.dtype).map_err(lib(&probs_path))?;
            let cat = Categorical::from_probs(probs).map_err(lib(&probs_path))?;
            let cpath = format!("{path}.components");
            Ok(match components {
                Components::Same(c) => {
                    let comp = build_model(c, ctx, &cpath)?;
                    Arc::new(MixtureSameFamily::new(cat, comp).map_err(lib(&cpath))?)
                }
                Components::List(list) => {
                    let comps = list
                        .iter()
                        .enumerate()
                        .map(|(i, c)| build_model(c, ctx, &format!("{cpath}[{i}]")))
                        .collect::<CliResult<Vec<_>>>()?;
                    Arc::new(Mixture::new(cat, comps).map_err(lib(&cpath))?)
                }
            })
        }
        ModelSpec::Autoregressive { family, params, steps } => {
            let path = format!("{path}.autoregressive");
            build_autoregressive(family, params, *steps, ctx, &path)
        }
        ModelSpec::Kde { points_file, kernel } => {
            let path = format!("{path}.kde");
            let file = resolve(&ctx.base_dir, points_file);
            let points = read_points(&file)?.cast(ctx.dtype).map_err(lib(&format!("{path}.points_file")))?;
            let kctx = ctx.with_points(points.clone());
            let kpath = format!("{path}.kernel");
            let d = kde(&points, |_| {
                build_model(kernel, &kctx, &kpath).map_err(|e| match e {
                    CliError::Validation { source, .. } => source,
                    other => distkit::Error::Shape(other.to_string()),
                })
            })
            .map_err(lib(&kpath))?;
            Ok(Arc::new(d))
        }
    }
}

fn resolve(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn build_autoregressive(
    family: &str,
    params: &Params,
    steps: Option<usize>,
    ctx: &BuildContext,
    path: &str,
) -> CliResult<Arc<dyn Distribution>> {
    let allowed: &[&str] = match family {
        "Normal" => &["shift_weights", "log_scale_weights", "shift_bias", "log_scale_bias"],
        _ => &["shift_weights", "shift_bias"],
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(CliError::parse(
            format!("{path}.params.{k}"),
            format!("unknown parameter for {family}; expected one of {allowed:?}"),
        ));
    }
    let p = param_map(params, ctx, path)?;
    let ppath = format!("{path}.params");
    let w = p
        .get("shift_weights")
        .cloned()
        .ok_or_else(|| CliError::parse(format!("{ppath}.shift_weights"), "missing required parameter"))?;
    let d = w.shape().dims().first().copied().unwrap_or(0);
    for (name, v) in p.iter().filter(|(k, _)| k.ends_with("weights")) {
        if v.shape().rank() == 2 {
            let n = v.shape().dims()[1];
            if let Some(k) = (0..v.len()).find(|&k| k % n >= k / n && v.data()[k] != 0.0) {
                return Err(CliError::library(
                    &ppath,
                    distkit::Error::InvalidParameter {
                        param: name.clone(),
                        reason: format!("entry [{}, {}] is on or above the diagonal", k / n, k % n),
                    },
                ));
            }
        }
    }
    let ls = p
        .get("log_scale_weights")
        .cloned()
        .unwrap_or_else(|| NdValue::zeros(w.shape().clone(), w.dtype()));
    let f = LinearAutoregressive::new(w, ls, p.get("shift_bias").cloned(), p.get("log_scale_bias").cloned())
        .map_err(|e| CliError::library(&ppath, e))?;
    let f = Arc::new(f);
    let dtype = ctx.dtype;
    let normal = family == "Normal";
    let make: MakeDistribution = Arc::new(move |x: &NdValue| {
        let (mut shift, mut scale) = (Vec::with_capacity(x.len()), Vec::with_capacity(x.len()));
        for row in x.rows(1) {
            let (m, s) = f.shift_and_log_scale(row);
            shift.extend(m);
            scale.extend(s.into_iter().map(f64::exp));
        }
        let shift = NdValue::new(x.shape().clone(), DType::F64, shift)?.cast(dtype)?;
        let inner: Arc<dyn Distribution> = if normal {
            let scale = NdValue::new(x.shape().clone(), DType::F64, scale)?.cast(dtype)?;
            Arc::new(Normal::new(shift, scale)?)
        } else {
            Arc::new(Bernoulli::from_logits(shift)?)
        };
        Ok(Arc::new(Independent::rightmost(inner)?) as Arc<dyn Distribution>)
    });
    let ar = Autoregressive::new(make, Shape::from([d]), steps.unwrap_or(d)).map_err(|e| CliError::library(path, e))?;
    Ok(Arc::new(ar))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_round_trip() {
        let text = r#"{"family":"Normal","params":{"loc":[0,1.5],"scale":2},"validate_args":true}"#;
        let s = parse_model_str(text, "model").unwrap();
        assert_eq!(parse_model(&s.to_json(), "model").unwrap(), s);
    }

    #[test]
    fn unknown_key_names_path() {
        let text = r#"{"independent":{"base":{"family":"Normal","params":{}},"rnak":1}}"#;
        let e = parse_model_str(text, "model").unwrap_err();
        assert!(e.to_string().starts_with("model.independent.rnak"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn ragged_params_rejected() {
        let text = r#"{"family":"Normal","params":{"loc":[[0,1],[2]],"scale":1}}"#;
        let s = parse_model_str(text, "model").unwrap();
        let e = build_model(&s, &BuildContext::new(DType::F64, "."), "model").err().unwrap();
        assert!(e.to_string().contains("model.params.loc[1]"), "{e}");
    }

    #[test]
    fn validation_error_names_parameter() {
        let text = r#"{"family":"Normal","params":{"loc":0,"scale":-1},"validate_args":true}"#;
        let s = parse_model_str(text, "model").unwrap();
        let e = build_model(&s, &BuildContext::new(DType::F64, "."), "model").err().unwrap();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().starts_with("model.params.scale"), "{e}");
    }

    #[test]
    fn autoregressive_mask_enforced() {
        let text = r#"{"autoregressive":{"family":"Bernoulli","params":{"shift_weights":[[0,1],[0,0]]}}}"#;
        let s = parse_model_str(text, "m").unwrap();
        let e = build_model(&s, &BuildContext::new(DType::F64, "."), "m").err().unwrap();
        assert!(e.to_string().contains("m.autoregressive.params.shift_weights"), "{e}");
    }
}
