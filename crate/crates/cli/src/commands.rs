//! Command implementations. Each returns the text to write and never touches
//! global state beyond the files it is pointed at.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use distkit::diagnostics::mean_and_stderr;
use distkit::{kl_divergence, DType, Distribution, NdValue, RngState, Shape};

use crate::error::{CliError, CliResult};
use crate::records::{format_number, read_points, read_records, read_text, record_line, records};
use crate::spec::{build_model, parse_model_str, BuildContext, ModelSpec};

/// A model argument: a path to a JSON file, or inline JSON starting with `{`.
pub fn load_spec(arg: &str) -> CliResult<(ModelSpec, PathBuf)> {
    if arg.trim_start().starts_with('{') {
        return Ok((parse_model_str(arg, "model")?, PathBuf::from(".")));
    }
    let path = Path::new(arg);
    let text = read_text(path)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((parse_model_str(&text, "model")?, dir))
}

pub fn load_model(arg: &str, dtype: DType) -> CliResult<Arc<dyn Distribution>> {
    let (spec, dir) = load_spec(arg)?;
    build_model(&spec, &BuildContext::new(dtype, dir), "model")
}

fn draw(d: &dyn Distribution, n: usize, seed: u64) -> CliResult<NdValue> {
    if n == 0 {
        return Err(CliError::parse("--n", "must be at least 1"));
    }
    d.sample(&Shape::from([n]), &RngState::from_seed(seed))
        .map_err(|e| CliError::library("sample", e))
}

/// `n` draws as NDJSON, one record per draw with shape `batch ++ event`.
pub fn sample(model: &str, n: usize, seed: u64, dtype: DType) -> CliResult<String> {
    let d = load_model(model, dtype)?;
    Ok(records(&draw(d.as_ref(), n, seed)?, "value"))
}

fn score(d: &dyn Distribution, xs: &[NdValue], dtype: DType) -> CliResult<String> {
    let event = d.event_shape();
    let mut out = String::new();
    for (i, x) in xs.iter().enumerate() {
        let where_ = format!("data line {}", i + 1);
        if !x.shape().ends_with(&event) {
            return Err(CliError::Validation {
                path: format!("{where_}.shape"),
                source: distkit::Error::Shape(format!("{} does not end with the event shape {event}", x.shape())),
            });
        }
        let x = x.cast(d.dtype()).map_err(|e| CliError::library(&where_, e))?;
        let lp = d.log_prob(&x).map_err(|e| CliError::library(&where_, e))?;
        out.push_str(&record_line(i, lp.shape(), "log_prob", lp.data(), dtype));
        out.push('\n');
    }
    Ok(out)
}

/// Log density of every record in `data`.
pub fn logprob(model: &str, data: &Path, dtype: DType) -> CliResult<String> {
    let d = load_model(model, dtype)?;
    score(d.as_ref(), &read_records(data)?, dtype)
}

/// Closed-form KL divergence and, with `mc`, a Monte Carlo estimate and its
/// standard error per batch member.
pub fn kl(p: &str, q: &str, mc: Option<usize>, seed: u64, dtype: DType) -> CliResult<String> {
    let p = load_model(p, dtype)?;
    let q = load_model(q, dtype)?;
    let exact = kl_divergence(p.as_ref(), q.as_ref()).map_err(|e| CliError::library("kl", e))?;
    let list = |xs: &[f64]| xs.iter().map(|&x| format_number(x, dtype)).collect::<Vec<_>>().join(",");
    let dims = exact.shape().dims().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
    let mut line = format!("{{\"shape\":[{dims}],\"kl\":[{}]", list(exact.data()));
    if let Some(n) = mc {
        let y = draw(p.as_ref(), n, seed)?;
        let lp = p.log_prob(&y).map_err(|e| CliError::library("kl.mc", e))?;
        let lq = q.log_prob(&y).map_err(|e| CliError::library("kl.mc", e))?;
        let diff = lp.sub(&lq).map_err(|e| CliError::library("kl.mc", e))?;
        let width = diff.len() / n;
        let (mut means, mut errs) = (Vec::new(), Vec::new());
        for j in 0..width {
            let col: Vec<f64> = (0..n).map(|i| diff.data()[i * width + j]).collect();
            let (m, se) = mean_and_stderr(&col);
            means.push(m);
            errs.push(se);
        }
        line.push_str(&format!(",\"mc\":[{}],\"mc_stderr\":[{}]", list(&means), list(&errs)));
    }
    line.push_str("}\n");
    Ok(line)
}

/// Kernel density estimate over the points in `data` with `kernel` as the
/// template (`"$points"` stands for the stacked points). Samples `n` draws
/// when given, otherwise scores each point.
pub fn kde(kernel: &str, data: &Path, n: Option<usize>, seed: u64, dtype: DType) -> CliResult<String> {
    let (spec, dir) = load_spec(kernel)?;
    let points = read_points(data)?
        .cast(dtype)
        .map_err(|e| CliError::library("data", e))?;
    let ctx = BuildContext::new(dtype, dir).with_points(points.clone());
    let mut failure = None;
    let d = distkit::meta::kde(&points, |_| {
        build_model(&spec, &ctx, "model").map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            distkit::Error::Shape(msg)
        })
    });
    let d = match (d, failure) {
        (_, Some(e)) => return Err(e),
        (Ok(d), None) => d,
        (Err(e), None) => return Err(CliError::library("model", e)),
    };
    match n {
        Some(n) => Ok(records(&draw(&d, n, seed)?, "value")),
        None => {
            let rows: Vec<NdValue> = (0..points.shape().dims()[0])
                .map(|i| points.index_axis(0, i))
                .collect::<distkit::Result<_>>()
                .map_err(|e| CliError::library("data", e))?;
            score(&d, &rows, dtype)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_is_deterministic() {
        let m = r#"{"family":"Normal","params":{"loc":0,"scale":1}}"#;
        let a = sample(m, 3, 7, DType::F64).unwrap();
        assert_eq!(a, sample(m, 3, 7, DType::F64).unwrap());
        assert_eq!(a.lines().count(), 3);
        assert_ne!(a, sample(m, 3, 8, DType::F64).unwrap());
    }

    #[test]
    fn kl_reference_pair() {
        let p = r#"{"family":"Normal","params":{"loc":0,"scale":1}}"#;
        let q = r#"{"family":"Normal","params":{"loc":-1,"scale":2}}"#;
        let out = kl(p, q, Some(20_000), 3, DType::F64).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let exact = v["kl"][0].as_f64().unwrap();
        assert!((exact - 0.443_147).abs() < 1e-6);
        let mc = v["mc"][0].as_f64().unwrap();
        let se = v["mc_stderr"][0].as_f64().unwrap();
        assert!((mc - exact).abs() < 4.0 * se);
    }

    #[test]
    fn unregistered_pair_exits_4() {
        let p = r#"{"family":"Normal","params":{"loc":0,"scale":1}}"#;
        let q = r#"{"family":"Cauchy","params":{"loc":0,"scale":1}}"#;
        assert_eq!(kl(p, q, None, 0, DType::F64).unwrap_err().exit_code(), 4);
    }

    #[test]
    fn f32_precision_prints_single_floats() {
        let m = r#"{"family":"Normal","params":{"loc":0.1,"scale":1}}"#;
        let out = sample(m, 2, 1, DType::F32).unwrap();
        let v: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
        let token = v["value"][0].to_string();
        let x: f32 = token.parse().unwrap();
        assert_eq!(format!("{x:?}"), token);
    }
}
