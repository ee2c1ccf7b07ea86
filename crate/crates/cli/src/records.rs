//! NDJSON records: one JSON object per line carrying a shape and a flat value list.

use std::fmt::Write as _;
use std::path::Path;

use distkit::{DType, NdValue, Shape};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Shortest round-trip decimal for the given dtype. Non-finite values become
/// the strings `"Infinity"`, `"-Infinity"` and `"NaN"`.
pub fn format_number(x: f64, dtype: DType) -> String {
    if x.is_nan() {
        return "\"NaN\"".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "\"Infinity\"" } else { "\"-Infinity\"" }.into();
    }
    match dtype {
        DType::I64 => format!("{}", x as i64),
        DType::F32 => format!("{:?}", x as f32),
        DType::F64 => format!("{x:?}"),
    }
}

fn write_list(out: &mut String, xs: impl IntoIterator<Item = String>) {
    out.push('[');
    for (i, x) in xs.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&x);
    }
    out.push(']');
}

/// `{"index":i,"shape":[..],"<field>":[..]}` for one record.
pub fn record_line(index: usize, shape: &Shape, field: &str, data: &[f64], dtype: DType) -> String {
    let mut s = String::new();
    write!(s, "{{\"index\":{index},\"shape\":").expect("write to string");
    write_list(&mut s, shape.dims().iter().map(|d| d.to_string()));
    write!(s, ",\"{field}\":").expect("write to string");
    write_list(&mut s, data.iter().map(|&x| format_number(x, dtype)));
    s.push('}');
    s
}

/// Splits `values` along its leading axis into one record per slice.
pub fn records(values: &NdValue, field: &str) -> String {
    let dims = values.shape().dims();
    let n = dims.first().copied().unwrap_or(1);
    let inner = values.shape().drop_first(1);
    let width = inner.num_elements();
    let mut out = String::new();
    for i in 0..n {
        out.push_str(&record_line(i, &inner, field, &values.data()[i * width..(i + 1) * width], values.dtype()));
        out.push('\n');
    }
    out
}

fn number(v: &Value, path: &str) -> CliResult<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| CliError::parse(path, "number out of range")),
        Value::String(s) if s == "Infinity" => Ok(f64::INFINITY),
        Value::String(s) if s == "-Infinity" => Ok(f64::NEG_INFINITY),
        Value::String(s) if s == "NaN" => Ok(f64::NAN),
        _ => Err(CliError::parse(path, "expected a number")),
    }
}

fn nested(v: &Value, path: &str, dims: &mut Vec<usize>, depth: usize, out: &mut Vec<f64>) -> CliResult<()> {
    match v {
        Value::Array(items) => {
            if dims.len() == depth {
                if !out.is_empty() {
                    return Err(CliError::parse(path, "ragged array"));
                }
                dims.push(items.len());
            } else if dims.get(depth) != Some(&items.len()) {
                return Err(CliError::parse(path, "ragged array"));
            }
            for (i, x) in items.iter().enumerate() {
                nested(x, &format!("{path}[{i}]"), dims, depth + 1, out)?;
            }
            Ok(())
        }
        other => {
            if dims.len() != depth {
                return Err(CliError::parse(path, "ragged array"));
            }
            out.push(number(other, path)?);
            Ok(())
        }
    }
}

/// Parses one data line: a record with `shape` and `value`, a bare number,
/// or a nested array.
pub fn parse_record(line: &str, path: &str) -> CliResult<NdValue> {
    let v: Value = serde_json::from_str(line).map_err(|e| CliError::parse(path, format!("invalid JSON: {e}")))?;
    let (dims, data) = match &v {
        Value::Object(m) => {
            if let Some(k) = m.keys().find(|k| !["index", "shape", "value"].contains(&k.as_str())) {
                return Err(CliError::parse(format!("{path}.{k}"), "unknown key; expected index, shape, value"));
            }
            let shape_path = format!("{path}.shape");
            let dims = m
                .get("shape")
                .and_then(Value::as_array)
                .ok_or_else(|| CliError::parse(&shape_path, "expected an array of dimensions"))?
                .iter()
                .map(|d| d.as_u64().map(|u| u as usize))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| CliError::parse(&shape_path, "expected non-negative integers"))?;
            let value_path = format!("{path}.value");
            let data = m
                .get("value")
                .and_then(Value::as_array)
                .ok_or_else(|| CliError::parse(&value_path, "expected a flat array of numbers"))?
                .iter()
                .enumerate()
                .map(|(i, x)| number(x, &format!("{value_path}[{i}]")))
                .collect::<CliResult<Vec<_>>>()?;
            (dims, data)
        }
        other => {
            let (mut dims, mut data) = (Vec::new(), Vec::new());
            nested(other, path, &mut dims, 0, &mut data)?;
            (dims, data)
        }
    };
    NdValue::new(dims, DType::F64, data).map_err(|e| CliError::library(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads every non-blank line of an NDJSON file.
pub fn read_records(path: &Path) -> CliResult<Vec<NdValue>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_record(l, &format!("{}:{}", path.display(), i + 1)))
        .collect()
}

/// Stacks the records of a points file along a new leading axis.
pub fn read_points(path: &Path) -> CliResult<NdValue> {
    let rows = read_records(path)?;
    let where_ = path.display().to_string();
    let Some(first) = rows.first() else {
        return Err(CliError::library(&where_, distkit::Error::EmptyPoints));
    };
    let shape = first.shape().clone();
    let mut data = Vec::with_capacity(rows.len() * shape.num_elements());
    for (i, r) in rows.iter().enumerate() {
        if r.shape() != &shape {
            return Err(CliError::parse(
                format!("{where_}:{}", i + 1),
                format!("point shape {} differs from the first point's {shape}", r.shape()),
            ));
        }
        data.extend_from_slice(r.data());
    }
    NdValue::new(Shape::new(vec![rows.len()]).concat(&shape), DType::F64, data).map_err(|e| CliError::library(&where_, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip() {
        for &x in &[0.1, 1.0 / 3.0, 1e-300, -2.5e17, 5e-324] {
            let s = format_number(x, DType::F64);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_number(0.1f32 as f64, DType::F32), "0.1");
        assert_eq!(format_number(3.0, DType::I64), "3");
        assert_eq!(format_number(f64::NEG_INFINITY, DType::F64), "\"-Infinity\"");
    }

    #[test]
    fn record_round_trip() {
        let v = NdValue::new([2, 3], DType::F64, vec![0.5, -1.0, 2.0, 1e-20, 3.25, -0.0]).unwrap();
        let text = records(&v.reshape([1, 2, 3]).unwrap(), "value");
        let back = parse_record(text.trim(), "line").unwrap();
        assert_eq!(back.shape(), v.shape());
        assert_eq!(back.data(), v.data());
    }

    #[test]
    fn nested_arrays_and_ragged() {
        let v = parse_record("[[1,2],[3,4]]", "l").unwrap();
        assert_eq!(v.shape(), &Shape::from([2, 2]));
        assert!(parse_record("[[1,2],[3]]", "l").is_err());
        assert!(parse_record("[1,[2]]", "l").is_err());
        assert_eq!(parse_record("2.5", "l").unwrap().shape(), &Shape::scalar());
    }
}
