//! JSON system documents and shared encoding helpers.
//!
//! The encoding conventions used everywhere: real matrices are row-major
//! nested arrays of numbers, complex entries are `[re, im]` pairs, and every
//! report carries a `"verdict"` field. The decoder is hand-rolled so that
//! schema violations (missing or extra fields) and bad numeric entries are
//! reported as distinct errors.

use nalgebra::DMatrix;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::profile::{ExponentialProfile, ProfileTerm};
use crate::system::{BoundarySymbol, FirstOrderSystem};
use crate::viscous::SecondOrderSystem;

// ---------------------------------------------------------------------------
// Low-level decoding helpers

fn as_object<'v>(v: &'v Value, what: &str) -> Result<&'v Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::SchemaError(format!("{what} must be a JSON object")))
}

fn require<'v>(obj: &'v Map<String, Value>, key: &str, what: &str) -> Result<&'v Value> {
    obj.get(key)
        .ok_or_else(|| Error::SchemaError(format!("{what}: missing field \"{key}\"")))
}

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], what: &str) -> Result<()> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::SchemaError(format!(
                "{what}: unknown field \"{key}\""
            )));
        }
    }
    Ok(())
}

fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::ValueError(format!("{what} must be a nonnegative integer")))
}

fn as_f64(v: &Value, what: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::ValueError(format!("{what} must be a number")))
}

/// Decode a scalar entry that is either a real number or an `[re, im]` pair.
fn as_complex(v: &Value, what: &str) -> Result<C64> {
    match v {
        Value::Number(_) => Ok(C64::new(as_f64(v, what)?, 0.0)),
        Value::Array(pair) if pair.len() == 2 => {
            let re = as_f64(&pair[0], what)?;
            let im = as_f64(&pair[1], what)?;
            Ok(C64::new(re, im))
        }
        _ => Err(Error::ValueError(format!(
            "{what} must be a number or an [re, im] pair"
        ))),
    }
}

pub fn parse_real_matrix(v: &Value, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
    let outer = v
        .as_array()
        .ok_or_else(|| Error::SchemaError(format!("{what} must be an array of rows")))?;
    if outer.len() != rows {
        return Err(Error::SchemaError(format!(
            "{what} has {} rows, expected {rows}",
            outer.len()
        )));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (i, row) in outer.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::SchemaError(format!("{what} row {i} must be an array")))?;
        if row.len() != cols {
            return Err(Error::SchemaError(format!(
                "{what} row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        for (j, entry) in row.iter().enumerate() {
            m[(i, j)] = as_f64(entry, &format!("{what}[{i}][{j}]"))?;
        }
    }
    Ok(m)
}

pub fn parse_complex_matrix(
    v: &Value,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<DMatrix<C64>> {
    let outer = v
        .as_array()
        .ok_or_else(|| Error::SchemaError(format!("{what} must be an array of rows")))?;
    if outer.len() != rows {
        return Err(Error::SchemaError(format!(
            "{what} has {} rows, expected {rows}",
            outer.len()
        )));
    }
    let mut m = DMatrix::from_element(rows, cols, C64::new(0.0, 0.0));
    for (i, row) in outer.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::SchemaError(format!("{what} row {i} must be an array")))?;
        if row.len() != cols {
            return Err(Error::SchemaError(format!(
                "{what} row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        for (j, entry) in row.iter().enumerate() {
            m[(i, j)] = as_complex(entry, &format!("{what}[{i}][{j}]"))?;
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Encoding helpers

pub fn real_matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json_f64(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn complex_json(z: C64) -> Value {
    Value::Array(vec![json_f64(z.re), json_f64(z.im)])
}

pub fn complex_matrix_json(m: &DMatrix<C64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_json(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn complex_vector_json(v: &nalgebra::DVector<C64>) -> Value {
    Value::Array(v.iter().map(|&z| complex_json(z)).collect())
}

fn json_f64(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

// ---------------------------------------------------------------------------
// System documents

/// A parsed hyperbolic system document: the operator plus its boundary symbol.
#[derive(Debug, Clone)]
pub struct ParsedSystem {
    pub system: FirstOrderSystem,
    pub boundary: BoundarySymbol,
}

/// Parse a hyperbolic system document.
///
/// Schema: `{"n": int, "d": int, "A": [d row-major n x n real matrices],
/// "boundary": {"k": int, "matrix": [[...]]}}` where boundary entries may be
/// numbers or `[re, im]` pairs, or `{"k": int, "symbol": name,
/// "params": {...}, "bound": number?}` for a named frequency-dependent
/// symbol.
pub fn parse_system(text: &str) -> Result<ParsedSystem> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::SchemaError(format!("invalid JSON: {e}")))?;
    parse_system_value(&value)
}

pub fn parse_system_value(value: &Value) -> Result<ParsedSystem> {
    let obj = as_object(value, "system document")?;
    reject_unknown(obj, &["n", "d", "A", "boundary"], "system document")?;
    let n = as_usize(require(obj, "n", "system document")?, "n")?;
    let d = as_usize(require(obj, "d", "system document")?, "d")?;
    let a_val = require(obj, "A", "system document")?;
    let a_list = a_val
        .as_array()
        .ok_or_else(|| Error::SchemaError("\"A\" must be an array of matrices".into()))?;
    if a_list.len() != d {
        return Err(Error::SchemaError(format!(
            "\"A\" has {} matrices, expected d = {d}",
            a_list.len()
        )));
    }
    let mut a = Vec::with_capacity(d);
    for (j, mv) in a_list.iter().enumerate() {
        a.push(parse_real_matrix(mv, n, n, &format!("A[{}]", j + 1))?);
    }
    let system = FirstOrderSystem::new(n, d, a)?;
    let boundary = parse_boundary(require(obj, "boundary", "system document")?, n)?;
    // spot-check the declared norm bound of frequency-dependent symbols
    if !boundary.is_constant() {
        let probes: Vec<crate::system::Frequency> = [0.01, 1.0, 100.0]
            .iter()
            .flat_map(|&gamma| {
                [0.0, 1.0, -37.0].iter().map(move |&tau| {
                    crate::system::Frequency::new(
                        tau,
                        nalgebra::DVector::from_element(d - 1, 0.7),
                        gamma,
                    )
                    .expect("probe frequency")
                })
            })
            .collect();
        if !boundary.check_bound(&probes, 1e-9) {
            return Err(Error::ValueError(
                "the boundary symbol exceeds its declared norm bound on sampled frequencies".into(),
            ));
        }
    }
    Ok(ParsedSystem { system, boundary })
}

fn parse_boundary(v: &Value, n: usize) -> Result<BoundarySymbol> {
    let obj = as_object(v, "boundary")?;
    reject_unknown(
        obj,
        &["k", "matrix", "symbol", "params", "bound"],
        "boundary",
    )?;
    let k = as_usize(require(obj, "k", "boundary")?, "boundary.k")?;
    match (obj.get("matrix"), obj.get("symbol")) {
        (Some(mv), None) => {
            let m = parse_complex_matrix(mv, k, n, "boundary.matrix")?;
            Ok(BoundarySymbol::constant(m))
        }
        (None, Some(name)) => {
            let name = name
                .as_str()
                .ok_or_else(|| Error::SchemaError("boundary.symbol must be a string".into()))?;
            let params = match obj.get("params") {
                None => Map::new(),
                Some(p) => as_object(p, "boundary.params")?.clone(),
            };
            let base_v = params.get("matrix").ok_or_else(|| {
                Error::SchemaError("boundary.params must carry a \"matrix\"".into())
            })?;
            let base = parse_complex_matrix(base_v, k, n, "boundary.params.matrix")?;
            BoundarySymbol::named(name, base, &params)
        }
        (Some(_), Some(_)) => Err(Error::SchemaError(
            "boundary: give either \"matrix\" or \"symbol\", not both".into(),
        )),
        (None, None) => Err(Error::SchemaError(
            "boundary: one of \"matrix\" or \"symbol\" is required".into(),
        )),
    }
}

/// Serialize a system and its boundary back into document form. Constant
/// boundaries round-trip bit-exactly.
pub fn system_document(system: &FirstOrderSystem, boundary: &BoundarySymbol) -> Value {
    let mut obj = Map::new();
    obj.insert("n".into(), Value::from(system.n() as u64));
    obj.insert("d".into(), Value::from(system.d() as u64));
    obj.insert(
        "A".into(),
        Value::Array(system.coefficients().iter().map(real_matrix_json).collect()),
    );
    let mut bnd = Map::new();
    bnd.insert("k".into(), Value::from(boundary.k() as u64));
    if boundary.is_constant() {
        let m =
            boundary.evaluate(&crate::system::Frequency::one_d(0.0, 1.0).expect("unit frequency"));
        if m.iter().all(|z| z.im == 0.0) {
            bnd.insert("matrix".into(), real_matrix_json(&m.map(|z| z.re)));
        } else {
            bnd.insert("matrix".into(), complex_matrix_json(&m));
        }
    } else {
        bnd.insert("symbol".into(), Value::from(boundary.kind_name()));
        bnd.insert("bound".into(), json_f64(boundary.bound()));
    }
    obj.insert("boundary".into(), Value::Object(bnd));
    Value::Object(obj)
}

// ---------------------------------------------------------------------------
// Viscous documents

/// A parsed partially parabolic system document.
#[derive(Debug, Clone)]
pub struct ParsedViscous {
    pub system: SecondOrderSystem,
    /// Boundary matrix on the hyperbolic block, to be lifted by the
    /// dissipative construction.
    pub boundary1: Option<DMatrix<C64>>,
    /// Explicit boundary matrix on U = (u1, u2, u2').
    pub boundary_u: Option<DMatrix<C64>>,
}

/// Parse a second-order (partially parabolic) system document.
///
/// Schema extends the hyperbolic one: `{"n1", "n2", "d", "A0", "A",
/// "B" (d x d array of n x n real matrices), "theta", "boundary1"? ,
/// "boundaryU"?}`.
pub fn parse_viscous(text: &str) -> Result<ParsedViscous> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::SchemaError(format!("invalid JSON: {e}")))?;
    parse_viscous_value(&value)
}

pub fn parse_viscous_value(value: &Value) -> Result<ParsedViscous> {
    let obj = as_object(value, "viscous document")?;
    reject_unknown(
        obj,
        &[
            "n1",
            "n2",
            "d",
            "A0",
            "A",
            "B",
            "theta",
            "boundary1",
            "boundaryU",
        ],
        "viscous document",
    )?;
    let n1 = as_usize(require(obj, "n1", "viscous document")?, "n1")?;
    let n2 = as_usize(require(obj, "n2", "viscous document")?, "n2")?;
    let d = as_usize(require(obj, "d", "viscous document")?, "d")?;
    let n = n1 + n2;
    let a0 = parse_real_matrix(require(obj, "A0", "viscous document")?, n, n, "A0")?;
    let a_list = require(obj, "A", "viscous document")?
        .as_array()
        .ok_or_else(|| Error::SchemaError("\"A\" must be an array of matrices".into()))?;
    if a_list.len() != d {
        return Err(Error::SchemaError(format!(
            "\"A\" has {} matrices, expected d = {d}",
            a_list.len()
        )));
    }
    let mut a = Vec::with_capacity(d);
    for (j, mv) in a_list.iter().enumerate() {
        a.push(parse_real_matrix(mv, n, n, &format!("A[{}]", j + 1))?);
    }
    let b_outer = require(obj, "B", "viscous document")?
        .as_array()
        .ok_or_else(|| Error::SchemaError("\"B\" must be a d x d array of matrices".into()))?;
    if b_outer.len() != d {
        return Err(Error::SchemaError(format!(
            "\"B\" has {} rows, expected d = {d}",
            b_outer.len()
        )));
    }
    let mut b = Vec::with_capacity(d);
    for (j, bj) in b_outer.iter().enumerate() {
        let inner = bj.as_array().ok_or_else(|| {
            Error::SchemaError(format!("B[{}] must be an array of matrices", j + 1))
        })?;
        if inner.len() != d {
            return Err(Error::SchemaError(format!(
                "B[{}] has {} entries, expected d = {d}",
                j + 1,
                inner.len()
            )));
        }
        let mut row = Vec::with_capacity(d);
        for (kx, mv) in inner.iter().enumerate() {
            row.push(parse_real_matrix(
                mv,
                n,
                n,
                &format!("B[{}][{}]", j + 1, kx + 1),
            )?);
        }
        b.push(row);
    }
    let theta = as_f64(require(obj, "theta", "viscous document")?, "theta")?;
    let system = SecondOrderSystem::new(n1, n2, d, a0, a, b, theta)?;
    let boundary1 = match obj.get("boundary1") {
        None => None,
        Some(v) => {
            let m = as_object(v, "boundary1")?;
            reject_unknown(m, &["k", "matrix"], "boundary1")?;
            let k = as_usize(require(m, "k", "boundary1")?, "boundary1.k")?;
            Some(parse_complex_matrix(
                require(m, "matrix", "boundary1")?,
                k,
                n1,
                "boundary1.matrix",
            )?)
        }
    };
    let boundary_u = match obj.get("boundaryU") {
        None => None,
        Some(v) => {
            let m = as_object(v, "boundaryU")?;
            reject_unknown(m, &["k", "matrix"], "boundaryU")?;
            let k = as_usize(require(m, "k", "boundaryU")?, "boundaryU.k")?;
            Some(parse_complex_matrix(
                require(m, "matrix", "boundaryU")?,
                k,
                n1 + 2 * n2,
                "boundaryU.matrix",
            )?)
        }
    };
    if boundary1.is_some() && boundary_u.is_some() {
        return Err(Error::SchemaError(
            "give either \"boundary1\" or \"boundaryU\", not both".into(),
        ));
    }
    Ok(ParsedViscous {
        system,
        boundary1,
        boundary_u,
    })
}

pub fn viscous_document(sys: &SecondOrderSystem, boundary1: Option<&DMatrix<C64>>) -> Value {
    let mut obj = Map::new();
    obj.insert("n1".into(), Value::from(sys.n1() as u64));
    obj.insert("n2".into(), Value::from(sys.n2() as u64));
    obj.insert("d".into(), Value::from(sys.d() as u64));
    obj.insert("A0".into(), real_matrix_json(sys.a0()));
    obj.insert(
        "A".into(),
        Value::Array(sys.a().iter().map(real_matrix_json).collect()),
    );
    obj.insert(
        "B".into(),
        Value::Array(
            sys.b()
                .iter()
                .map(|row| Value::Array(row.iter().map(real_matrix_json).collect()))
                .collect(),
        ),
    );
    obj.insert("theta".into(), json_f64(sys.theta()));
    if let Some(g1) = boundary1 {
        let mut b = Map::new();
        b.insert("k".into(), Value::from(g1.nrows() as u64));
        b.insert("matrix".into(), complex_matrix_json(g1));
        obj.insert("boundary1".into(), Value::Object(b));
    }
    Value::Object(obj)
}

// ---------------------------------------------------------------------------
// Profile terms

/// Parse a forcing profile given as a JSON list of `{v, mu: [re, im], m}`.
pub fn parse_profile(v: &Value, dim: usize) -> Result<ExponentialProfile> {
    let list = v
        .as_array()
        .ok_or_else(|| Error::SchemaError("forcing must be an array of terms".into()))?;
    let mut terms = Vec::with_capacity(list.len());
    for (i, tv) in list.iter().enumerate() {
        let obj = as_object(tv, &format!("term {i}"))?;
        reject_unknown(obj, &["v", "mu", "m"], &format!("term {i}"))?;
        let vv = require(obj, "v", &format!("term {i}"))?
            .as_array()
            .ok_or_else(|| Error::SchemaError(format!("term {i}: \"v\" must be an array")))?;
        if vv.len() != dim {
            return Err(Error::SchemaError(format!(
                "term {i}: \"v\" has length {}, expected {dim}",
                vv.len()
            )));
        }
        let coeff = nalgebra::DVector::from_iterator(
            dim,
            vv.iter()
                .enumerate()
                .map(|(j, e)| as_complex(e, &format!("term {i} v[{j}]")))
                .collect::<Result<Vec<_>>>()?,
        );
        let rate = as_complex(
            require(obj, "mu", &format!("term {i}"))?,
            &format!("term {i} mu"),
        )?;
        let power = match obj.get("m") {
            None => 0,
            Some(mv) => as_usize(mv, &format!("term {i} m"))? as u32,
        };
        terms.push(ProfileTerm { coeff, rate, power });
    }
    ExponentialProfile::new(dim, terms)
}

pub fn profile_json(p: &ExponentialProfile) -> Value {
    Value::Array(
        p.terms()
            .iter()
            .map(|t| {
                let mut obj = Map::new();
                obj.insert("v".into(), complex_vector_json(&t.coeff));
                obj.insert("mu".into(), complex_json(t.rate));
                obj.insert("m".into(), Value::from(t.power as u64));
                Value::Object(obj)
            })
            .collect(),
    )
}

/// Parse a complex vector given as a JSON array of numbers or pairs.
pub fn parse_complex_vector(v: &Value, what: &str) -> Result<nalgebra::DVector<C64>> {
    let list = v
        .as_array()
        .ok_or_else(|| Error::SchemaError(format!("{what} must be an array")))?;
    let entries = list
        .iter()
        .enumerate()
        .map(|(i, e)| as_complex(e, &format!("{what}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(nalgebra::DVector::from_vec(entries))
}

pub fn real_system_matrix(m: &DMatrix<C64>) -> Option<DMatrix<f64>> {
    if m.iter().all(|z| z.im == 0.0) {
        Some(m.map(|z| z.re))
    } else {
        None
    }
}
