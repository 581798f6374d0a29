//! JSON document format for [`GenerativeModel`].
//!
//! Arrays are stored as `{"shape": [...], "values": nested lists}` in row-major
//! order. Reading is done by hand over [`serde_json::Value`] so that every schema
//! error carries a JSON-pointer-like path to the offending field.

use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde_json::{json, Map, Value};

use crate::categorical::{Categorical, Cpt, DirichletParams};
use crate::error::{Error, Result};
use crate::model::{FactorSpec, GenerativeModel, ModalitySpec};

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn nest(data: &[f64], shape: &[usize]) -> Value {
    match shape {
        [] => json!(data[0]),
        [_] => Value::Array(data.iter().map(|&x| json!(x)).collect()),
        [n, rest @ ..] => {
            let stride: usize = rest.iter().product();
            Value::Array(
                (0..*n)
                    .map(|i| nest(&data[i * stride..(i + 1) * stride], rest))
                    .collect(),
            )
        }
    }
}

fn array_value(a: &ArrayD<f64>) -> Value {
    let std = a.as_standard_layout();
    let data = std.as_slice().expect("standard layout");
    json!({ "shape": a.shape(), "values": nest(data, a.shape()) })
}

fn optional_array(a: Option<&ArrayD<f64>>) -> Value {
    a.map(array_value).unwrap_or(Value::Null)
}

pub fn to_value(model: &GenerativeModel) -> Value {
    json!({
        "factors": model.factors,
        "modalities": model.modalities,
        "actions": model.actions,
        "A": model.a.iter().map(|x| array_value(x.array())).collect::<Vec<_>>(),
        "B": model.b.iter().map(|x| array_value(x.array())).collect::<Vec<_>>(),
        "c": model.c,
        "d": model.d.iter().map(|q| q.probs().to_vec()).collect::<Vec<_>>(),
        "dirichlet_a": model.dirichlet_a.iter().map(|x| optional_array(x.as_ref().map(|p| p.array()))).collect::<Vec<_>>(),
        "dirichlet_b": model.dirichlet_b.iter().map(|x| optional_array(x.as_ref().map(|p| p.array()))).collect::<Vec<_>>(),
        "dirichlet_d": model.dirichlet_d.iter().map(|x| optional_array(x.as_ref().map(|p| p.array()))).collect::<Vec<_>>(),
        "control_map": model.control_map,
    })
}

pub fn serialize(model: &GenerativeModel) -> String {
    serde_json::to_string_pretty(&to_value(model)).expect("model values are finite")
}

pub fn deserialize(text: &str) -> Result<GenerativeModel> {
    let value: Value = serde_json::from_str(text).map_err(|e| schema("", e.to_string()))?;
    from_value(&value)
}

pub fn write_model(model: &GenerativeModel, path: &Path) -> Result<()> {
    std::fs::write(path, serialize(model))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<GenerativeModel> {
    deserialize(&std::fs::read_to_string(path)?)
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, base: &str) -> Result<(&'a Value, String)> {
    let path = format!("{base}/{key}");
    obj.get(key)
        .map(|v| (v, path.clone()))
        .ok_or_else(|| schema(&path, "missing field"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| schema(path, "expected an array"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| schema(path, "expected a number"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| schema(path, "expected a non-negative integer"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| schema(path, "expected a string"))
}

fn as_bool(v: &Value, path: &str) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| schema(path, "expected a boolean"))
}

fn f64_list(v: &Value, path: &str) -> Result<Vec<f64>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{path}/{i}")))
        .collect()
}

fn labels(obj: &Map<String, Value>, base: &str) -> Result<Vec<String>> {
    match obj.get("labels") {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(v) => {
            let path = format!("{base}/labels");
            as_array(v, &path)?
                .iter()
                .enumerate()
                .map(|(i, x)| as_str(x, &format!("{path}/{i}")).map(str::to_string))
                .collect()
        }
    }
}

fn flatten(v: &Value, shape: &[usize], path: &str, out: &mut Vec<f64>) -> Result<()> {
    match shape {
        [] => {
            out.push(as_f64(v, path)?);
            Ok(())
        }
        [n, rest @ ..] => {
            let items = as_array(v, path)?;
            if items.len() != *n {
                return Err(schema(
                    path,
                    format!("expected {n} entries, found {}", items.len()),
                ));
            }
            for (i, item) in items.iter().enumerate() {
                flatten(item, rest, &format!("{path}/{i}"), out)?;
            }
            Ok(())
        }
    }
}

fn nested_path(base: &str, shape: &[usize], mut flat: usize) -> String {
    let mut idx = vec![0; shape.len()];
    for k in (0..shape.len()).rev() {
        idx[k] = flat % shape[k];
        flat /= shape[k];
    }
    let tail: String = idx.iter().map(|i| format!("/{i}")).collect();
    format!("{base}/values{tail}")
}

fn parse_array(v: &Value, path: &str) -> Result<ArrayD<f64>> {
    let obj = v
        .as_object()
        .ok_or_else(|| schema(path, "expected an object"))?;
    let (shape_v, shape_path) = field(obj, "shape", path)?;
    let shape: Vec<usize> = as_array(shape_v, &shape_path)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_usize(x, &format!("{shape_path}/{i}")))
        .collect::<Result<_>>()?;
    let (values_v, values_path) = field(obj, "values", path)?;
    let mut data = Vec::with_capacity(shape.iter().product());
    flatten(values_v, &shape, &values_path, &mut data)?;
    Ok(ArrayD::from_shape_vec(IxDyn(&shape), data).expect("length checked while flattening"))
}

fn parse_cpts(v: &Value, path: &str) -> Result<Vec<Cpt>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| parse_array(x, &format!("{path}/{i}")).map(Cpt::from_array_unchecked))
        .collect()
}

fn parse_dirichlet(v: &Value, path: &str) -> Result<Vec<Option<DirichletParams>>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let p = format!("{path}/{i}");
            if x.is_null() {
                return Ok(None);
            }
            let arr = parse_array(x, &p)?;
            let std = arr.as_standard_layout();
            let flat = std.as_slice().expect("standard layout");
            if let Some(k) = flat.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
                return Err(schema(
                    &nested_path(&p, arr.shape(), k),
                    format!("concentration {} must be strictly positive", flat[k]),
                ));
            }
            Ok(Some(DirichletParams::new(arr.clone())?))
        })
        .collect()
}

pub fn from_value(value: &Value) -> Result<GenerativeModel> {
    let root = value
        .as_object()
        .ok_or_else(|| schema("", "expected an object"))?;

    let (v, p) = field(root, "factors", "")?;
    let factors = as_array(v, &p)?
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let base = format!("{p}/{i}");
            let obj = f
                .as_object()
                .ok_or_else(|| schema(&base, "expected an object"))?;
            let get = |k: &str| field(obj, k, &base);
            let (name, np) = get("name")?;
            let (card, cp) = get("cardinality")?;
            let (ctrl, ctp) = get("control_cardinality")?;
            let (learn, lp) = get("learnable_transitions")?;
            Ok(FactorSpec {
                name: as_str(name, &np)?.to_string(),
                cardinality: as_usize(card, &cp)?,
                control_cardinality: as_usize(ctrl, &ctp)?,
                learnable_transitions: as_bool(learn, &lp)?,
                labels: labels(obj, &base)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (v, p) = field(root, "modalities", "")?;
    let modalities = as_array(v, &p)?
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let base = format!("{p}/{i}");
            let obj = m
                .as_object()
                .ok_or_else(|| schema(&base, "expected an object"))?;
            let (name, np) = field(obj, "name", &base)?;
            let (card, cp) = field(obj, "cardinality", &base)?;
            let (learn, lp) = field(obj, "learnable_likelihood", &base)?;
            Ok(ModalitySpec {
                name: as_str(name, &np)?.to_string(),
                cardinality: as_usize(card, &cp)?,
                learnable_likelihood: as_bool(learn, &lp)?,
                labels: labels(obj, &base)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (v, p) = field(root, "actions", "")?;
    let actions = as_array(v, &p)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_str(x, &format!("{p}/{i}")).map(str::to_string))
        .collect::<Result<Vec<_>>>()?;

    let (v, p) = field(root, "A", "")?;
    let a = parse_cpts(v, &p)?;
    let (v, p) = field(root, "B", "")?;
    let b = parse_cpts(v, &p)?;

    let (v, p) = field(root, "c", "")?;
    let c = as_array(v, &p)?
        .iter()
        .enumerate()
        .map(|(i, x)| f64_list(x, &format!("{p}/{i}")))
        .collect::<Result<Vec<_>>>()?;

    let (v, p) = field(root, "d", "")?;
    let d = as_array(v, &p)?
        .iter()
        .enumerate()
        .map(|(i, x)| f64_list(x, &format!("{p}/{i}")).map(Categorical::from_vec_unchecked))
        .collect::<Result<Vec<_>>>()?;

    let (v, p) = field(root, "dirichlet_a", "")?;
    let dirichlet_a = parse_dirichlet(v, &p)?;
    let (v, p) = field(root, "dirichlet_b", "")?;
    let dirichlet_b = parse_dirichlet(v, &p)?;
    let (v, p) = field(root, "dirichlet_d", "")?;
    let dirichlet_d = parse_dirichlet(v, &p)?;

    let (v, p) = field(root, "control_map", "")?;
    let control_map = as_array(v, &p)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let rp = format!("{p}/{i}");
            as_array(row, &rp)?
                .iter()
                .enumerate()
                .map(|(j, x)| as_usize(x, &format!("{rp}/{j}")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let model = GenerativeModel {
        factors,
        modalities,
        actions,
        a,
        b,
        c,
        d,
        dirichlet_a,
        dirichlet_b,
        dirichlet_d,
        control_map,
    };
    let report = model.validate();
    if !report.is_valid() {
        return Err(Error::InvalidModel(report));
    }
    Ok(model)
}
