//! JSON input documents and deterministic report output.
//!
//! Complex numbers are written either as a bare real number or as `[re, im]`.
//! Matrices are arrays of rows. Spaces are a shorthand string (`"M:2"`,
//! `"D:3"`, `"C"`) or `{"label": ..., "basis": [matrix, ...]}`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::{json, Value};

use crate::bilinear::{BilinearMapRep, BilinearWeight};
use crate::error::{Error, Result};
use crate::estimate::{EstimatorConfig, NormEstimate, Witness};
use crate::lambdaclass::parse_shorthand;
use crate::linalg::{CMat, C64};
use crate::maps::{LinearMapRep, WeightSequence};
use crate::space::{ConcreteSpace, MatElement, TensorElement};

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ComplexDoc {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexDoc> for C64 {
    fn from(z: ComplexDoc) -> Self {
        match z {
            ComplexDoc::Real(re) => C64::new(re, 0.0),
            ComplexDoc::Pair([re, im]) => C64::new(re, im),
        }
    }
}

pub type MatrixDoc = Vec<Vec<ComplexDoc>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SpaceDoc {
    Shorthand(String),
    Explicit {
        #[serde(default)]
        label: Option<String>,
        basis: Vec<MatrixDoc>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementDoc {
    pub space: SpaceDoc,
    pub level: usize,
    pub coeffs: Vec<ComplexDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorDoc {
    pub left: SpaceDoc,
    pub right: SpaceDoc,
    pub level: usize,
    pub coeffs: Vec<ComplexDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MapDoc {
    /// `identity:<space>`, `transpose:d`, `adjoint:d`, `trace:d`.
    Builtin { builtin: String },
    Explicit {
        domain: SpaceDoc,
        codomain: SpaceDoc,
        /// `m_F × m_E` coordinate matrix.
        coeff: MatrixDoc,
        #[serde(default)]
        conj_linear: bool,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum BilinearDoc {
    /// `scalar` or `matmul:d`.
    Builtin { builtin: String },
    Explicit {
        left: SpaceDoc,
        right: SpaceDoc,
        target: SpaceDoc,
        /// `m_G × (m_E m_F)`, column `r m_F + s`.
        coeff: MatrixDoc,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightDoc {
    Identity,
    Transpose,
    /// Entry `n - 1` is `U_n`.
    UnitaryConjugation { unitaries: Vec<MatrixDoc> },
    /// Entry `n - 1` is the `n² × n²` table of `λ_n`.
    Custom { tables: Vec<MatrixDoc> },
}

fn matrix(doc: &MatrixDoc, field: &str) -> Result<CMat> {
    let rows = doc.len();
    let cols = doc.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || doc.iter().any(|r| r.len() != cols) {
        return Err(Error::parse(field, "matrix rows must be nonempty and of equal length"));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| doc[i][j].into()))
}

fn coeffs(doc: &[ComplexDoc]) -> Vec<C64> {
    doc.iter().map(|&z| z.into()).collect()
}

pub fn space_from_doc(doc: &SpaceDoc, field: &str) -> Result<Arc<ConcreteSpace>> {
    match doc {
        SpaceDoc::Shorthand(s) => parse_shorthand(s)
            .map(Arc::new)
            .map_err(|e| Error::parse(field, e.to_string())),
        SpaceDoc::Explicit { label, basis } => {
            let mats = basis
                .iter()
                .enumerate()
                .map(|(k, m)| matrix(m, &format!("{field}.basis[{k}]")))
                .collect::<Result<Vec<_>>>()?;
            ConcreteSpace::new(label.clone().unwrap_or_else(|| "E".into()), mats)
                .map(Arc::new)
                .map_err(|e| Error::parse(field, e.to_string()))
        }
    }
}

pub fn element_from_doc(doc: &ElementDoc) -> Result<MatElement> {
    let space = space_from_doc(&doc.space, "space")?;
    MatElement::new(space, doc.level, coeffs(&doc.coeffs)).map_err(|e| Error::parse("coeffs", e.to_string()))
}

pub fn tensor_from_doc(doc: &TensorDoc) -> Result<TensorElement> {
    let left = space_from_doc(&doc.left, "left")?;
    let right = space_from_doc(&doc.right, "right")?;
    TensorElement::new(left, right, doc.level, coeffs(&doc.coeffs)).map_err(|e| Error::parse("coeffs", e.to_string()))
}

fn builtin_size(s: &str, name: &str) -> Result<usize> {
    s.parse::<usize>()
        .ok()
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::parse("builtin", format!("`{name}` needs a positive size, got `{s}`")))
}

/// `identity:<space>`, `transpose:d`, `adjoint:d`, `trace:d`.
pub fn builtin_map(label: &str) -> Result<LinearMapRep> {
    let (name, arg) = label
        .split_once(':')
        .ok_or_else(|| Error::parse("builtin", format!("expected `name:arg`, got `{label}`")))?;
    match name {
        "identity" => Ok(LinearMapRep::identity(Arc::new(parse_shorthand(arg)?))),
        "transpose" => Ok(LinearMapRep::transpose(builtin_size(arg, name)?)),
        "adjoint" => Ok(LinearMapRep::adjoint(builtin_size(arg, name)?)),
        "trace" => Ok(LinearMapRep::trace(builtin_size(arg, name)?)),
        _ => Err(Error::parse("builtin", format!("unknown map `{name}`"))),
    }
}

pub fn map_from_doc(doc: &MapDoc) -> Result<LinearMapRep> {
    match doc {
        MapDoc::Builtin { builtin } => builtin_map(builtin),
        MapDoc::Explicit {
            domain,
            codomain,
            coeff,
            conj_linear,
        } => {
            let d = space_from_doc(domain, "domain")?;
            let c = space_from_doc(codomain, "codomain")?;
            LinearMapRep::new(d, c, matrix(coeff, "coeff")?, *conj_linear).map_err(|e| Error::parse("coeff", e.to_string()))
        }
    }
}

pub fn bilinear_from_doc(doc: &BilinearDoc) -> Result<BilinearMapRep> {
    match doc {
        BilinearDoc::Builtin { builtin } => match builtin.split_once(':') {
            None if builtin == "scalar" => Ok(BilinearMapRep::scalar_multiplication()),
            Some(("matmul", d)) => Ok(BilinearMapRep::matrix_multiplication(builtin_size(d, "matmul")?)),
            _ => Err(Error::parse("builtin", format!("unknown bilinear map `{builtin}`"))),
        },
        BilinearDoc::Explicit {
            left,
            right,
            target,
            coeff,
        } => {
            let l = space_from_doc(left, "left")?;
            let r = space_from_doc(right, "right")?;
            let t = space_from_doc(target, "target")?;
            BilinearMapRep::new(l, r, t, matrix(coeff, "coeff")?).map_err(|e| Error::parse("coeff", e.to_string()))
        }
    }
}

pub fn weight_from_doc(doc: &WeightDoc) -> Result<WeightSequence> {
    let mats = |v: &[MatrixDoc], field: &str| {
        v.iter()
            .enumerate()
            .map(|(k, m)| matrix(m, &format!("{field}[{k}]")))
            .collect::<Result<Vec<_>>>()
    };
    match doc {
        WeightDoc::Identity => Ok(WeightSequence::identity()),
        WeightDoc::Transpose => Ok(WeightSequence::transpose()),
        WeightDoc::UnitaryConjugation { unitaries } => WeightSequence::unitary_conjugation(mats(unitaries, "unitaries")?),
        WeightDoc::Custom { tables } => WeightSequence::custom(mats(tables, "tables")?),
    }
}

/// Reads and parses a JSON document; errors carry the path, line and column.
pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), format!("cannot read file: {e}")))?;
    parse_json(&text, &path.display().to_string())
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::parse(context, e.to_string()))
}

/// Weight from `identity`, `transpose`, or a path to a [`WeightDoc`] file.
pub fn weight_from_flag(flag: &str) -> Result<WeightSequence> {
    match flag {
        "identity" => Ok(WeightSequence::identity()),
        "transpose" => Ok(WeightSequence::transpose()),
        path => weight_from_doc(&load_json(Path::new(path))?),
    }
}

pub fn bilinear_weight_from_flag(flag: &str) -> Result<BilinearWeight> {
    BilinearWeight::from_shorthand(flag)
}

fn ser_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v + 0.0)
    } else {
        s.serialize_str(&fmt_f64(*v))
    }
}

/// 17 significant digits, `inf` / `-inf` / `nan` otherwise.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        // `+ 0.0` folds −0 into 0
        format!("{:.16e}", v + 0.0)
    }
}

fn complex_json(z: &C64) -> Value {
    json!([z.re, z.im])
}

fn matrix_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_json(&m[(i, j)])).collect()))
            .collect(),
    )
}

fn element_json(x: &MatElement) -> Value {
    json!({
        "space": x.space().label(),
        "level": x.level(),
        "coeffs": x.coeffs().iter().map(complex_json).collect::<Vec<_>>(),
    })
}

pub fn witness_json(w: &Witness) -> (&'static str, Value) {
    match w {
        Witness::Element(x) => ("element", element_json(x)),
        Witness::Pair(a, b) => ("pair", json!({"first": element_json(a), "second": element_json(b)})),
        Witness::Factors(fs) => ("factors", Value::Array(fs.iter().map(matrix_json).collect())),
        Witness::Functional(f) => ("functional", Value::Array(f.iter().map(complex_json).collect())),
        Witness::Decomposition(d) => (
            "decomposition",
            json!({
                "mode": d.mode.label(),
                "cost": d.cost(),
                "alpha": matrix_json(&d.alpha),
                "e": element_json(&d.e),
                "f": element_json(&d.f),
                "beta": matrix_json(&d.beta),
            }),
        ),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub quantity: String,
    #[serde(serialize_with = "ser_f64")]
    pub lower: f64,
    #[serde(serialize_with = "ser_f64")]
    pub upper: f64,
    pub level: Option<usize>,
    pub witness_ref: Option<String>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessDoc {
    pub id: String,
    pub kind: String,
    pub data: Value,
}

/// An inequality checked by a suite: passes when `slack ≥ −tol`.
#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub statement: String,
    #[serde(serialize_with = "ser_f64")]
    pub slack: f64,
    #[serde(serialize_with = "ser_f64")]
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    #[serde(serialize_with = "ser_f64")]
    pub tol: f64,
    pub level_max: usize,
    pub rows: Vec<ReportRow>,
    pub assertions: Vec<Assertion>,
    pub witnesses: Vec<WitnessDoc>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: impl Into<String>, cfg: &EstimatorConfig, level_max: usize) -> Self {
        Report {
            command: command.into(),
            seed: cfg.seed,
            restarts: cfg.restarts,
            max_iter: cfg.max_iter,
            tol: cfg.tol,
            level_max,
            rows: Vec::new(),
            assertions: Vec::new(),
            witnesses: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push_witness(&mut self, w: &Witness) -> String {
        let id = format!("w{}", self.witnesses.len());
        let (kind, data) = witness_json(w);
        self.witnesses.push(WitnessDoc {
            id: id.clone(),
            kind: kind.into(),
            data,
        });
        id
    }

    /// One row for the bracket, then one row per profile level.
    pub fn push_estimate(&mut self, quantity: &str, est: &NormEstimate, level: Option<usize>) {
        let witness_ref = est.witness.as_ref().map(|w| self.push_witness(w));
        self.rows.push(ReportRow {
            quantity: quantity.into(),
            lower: est.lower,
            upper: est.upper,
            level,
            witness_ref,
            converged: est.converged,
        });
        for (k, v) in est.level_profile.iter().enumerate() {
            self.rows.push(ReportRow {
                quantity: format!("{quantity}.profile"),
                lower: *v,
                upper: est.upper,
                level: Some(k + 1),
                witness_ref: None,
                converged: est.converged,
            });
        }
        self.notes.extend(est.notes.iter().map(|n| format!("{quantity}: {n}")));
    }

    pub fn assert(&mut self, name: &str, statement: impl Into<String>, slack: f64, tol: f64) -> bool {
        let pass = slack >= -tol;
        self.assertions.push(Assertion {
            name: name.into(),
            statement: statement.into(),
            slack,
            tol,
            pass,
        });
        pass
    }

    pub fn all_pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,lower,upper,level,witness_ref,converged\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&r.quantity),
                fmt_f64(r.lower),
                fmt_f64(r.upper),
                r.level.map_or(String::new(), |l| l.to_string()),
                r.witness_ref.as_deref().unwrap_or(""),
                r.converged
            );
        }
        for a in &self.assertions {
            let _ = writeln!(
                out,
                "{},{},{},,,{}",
                csv_field(&format!("assert:{}", a.name)),
                fmt_f64(a.slack),
                fmt_f64(a.slack),
                a.pass
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_shorthand_and_explicit_spaces() {
        let doc: ElementDoc = parse_json(r#"{"space": "M:2", "level": 1, "coeffs": [1, 0, [0, 1], 0]}"#, "t").unwrap();
        let x = element_from_doc(&doc).unwrap();
        assert_eq!(x.coeffs()[2], C64::new(0.0, 1.0));

        let doc: ElementDoc = parse_json(
            r#"{"space": {"label": "E", "basis": [[[1, 0], [0, 0]], [[0, 1], [0, 0]]]}, "level": 1, "coeffs": [2, 3]}"#,
            "t",
        )
        .unwrap();
        let x = element_from_doc(&doc).unwrap();
        assert_eq!(x.space().dim(), 2);
    }

    #[test]
    fn parse_errors_name_the_location() {
        let err = parse_json::<ElementDoc>("{\"space\": \"M:2\",\n \"level\": \"x\"}", "in.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("in.json") && msg.contains("line 2"), "{msg}");
        let doc: ElementDoc = parse_json(r#"{"space": "Q:2", "level": 1, "coeffs": [1]}"#, "t").unwrap();
        assert!(element_from_doc(&doc).unwrap_err().to_string().contains("space"));
    }

    #[test]
    fn maps_and_weights() {
        let m: MapDoc = parse_json(r#"{"builtin": "transpose:2"}"#, "t").unwrap();
        assert_eq!(map_from_doc(&m).unwrap().domain().dim(), 4);
        let m: MapDoc = parse_json(r#"{"domain": "C", "codomain": "D:2", "coeff": [[1], [2]]}"#, "t").unwrap();
        assert_eq!(map_from_doc(&m).unwrap().coeff()[(1, 0)], C64::new(2.0, 0.0));
        let w: WeightDoc = parse_json(r#"{"kind": "transpose"}"#, "t").unwrap();
        assert_eq!(weight_from_doc(&w).unwrap().label(), "transpose");
        let b: BilinearDoc = parse_json(r#"{"builtin": "matmul:2"}"#, "t").unwrap();
        assert_eq!(bilinear_from_doc(&b).unwrap().target().dim(), 4);
    }

    #[test]
    fn csv_is_stable() {
        let mut r = Report::new("norm", &EstimatorConfig::default(), 1);
        r.push_estimate("min_norm", &NormEstimate::exact(1.0), Some(1));
        r.push_estimate("x", &NormEstimate::exact(f64::INFINITY), None);
        assert_eq!(
            r.to_csv(),
            "quantity,lower,upper,level,witness_ref,converged\n\
             min_norm,1.0000000000000000e0,1.0000000000000000e0,1,,true\n\
             x,inf,inf,,,true\n"
        );
        assert!(r.to_text().contains("\"inf\""));
    }
}
