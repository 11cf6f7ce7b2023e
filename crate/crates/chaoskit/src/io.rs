//! Kernel files, run manifests and the CSV / JSON output envelopes.
//!
//! Kernel JSON:
//!
//! ```json
//! {"model": "classical", "p": 2, "m": 2, "mode": "exact", "coeffs": ["0", "1", "1", "0"]}
//! ```
//!
//! Coefficients are row-major over index tuples `(i_1, …, i_p) ∈ {1..m}^p`
//! with `i_1` most significant; coefficient `a_I` is the value on the cell
//! `∏_j [(i_j - 1)/m, i_j/m)`. Exact files use `"num/den"` strings (plain
//! integers are accepted too), float files use JSON numbers. An optional
//! `"expect"` object lists invariants that `verify --fixture` checks.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chaoskit_core::scalar::parse_rational;
use chaoskit_core::{GridKernel, Model, NumericMode, Rational, Scalar};
use num_traits::FromPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const CSV_SCHEMA: &str = "chaoskit-csv/1";
pub const JSON_SCHEMA: &str = "chaoskit-json/1";
pub const MANIFEST_SCHEMA: &str = "chaoskit-manifest/1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] chaoskit_core::Error),
}

/// A kernel in whichever numeric mode its file declared.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyKernel {
    Exact(GridKernel<Rational>),
    Float(GridKernel<f64>),
}

impl AnyKernel {
    pub fn mode(&self) -> NumericMode {
        match self {
            AnyKernel::Exact(_) => NumericMode::Exact,
            AnyKernel::Float(_) => NumericMode::Float,
        }
    }

    /// Converts to the requested scalar type. Floats become the exact
    /// rationals they encode.
    pub fn to_scalar<S: Scalar>(&self) -> Result<GridKernel<S>, IoError> {
        match self {
            AnyKernel::Exact(k) => Ok(k.map(|x| S::from_rational(x))),
            AnyKernel::Float(k) => {
                let coeffs = k.coeffs().iter().map(|&x| float_to_scalar(x)).collect::<Result<Vec<S>, _>>()?;
                Ok(GridKernel::new(k.order(), k.resolution(), coeffs)?)
            }
        }
    }
}

/// The exact rational a binary64 value encodes, in `S`.
pub fn float_to_scalar<S: Scalar>(x: f64) -> Result<S, IoError> {
    Rational::from_f64(x)
        .map(|r| S::from_rational(&r))
        .ok_or_else(|| IoError::Format(format!("{x} is not finite")))
}

/// Invariants a fixture file asserts about its kernel.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    /// `E[F^k]` by moment order, as `"num/den"` strings or numbers.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub moments: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetric: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror_symmetric: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub off_diagonal: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelDoc {
    pub model: Model,
    pub kernel: AnyKernel,
    pub expect: Option<Expectations>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelJson {
    model: String,
    p: usize,
    m: usize,
    mode: String,
    coeffs: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expect: Option<Expectations>,
}

fn coeff_rational(v: &Value, at: usize) -> Result<Rational, IoError> {
    let bad = || IoError::Format(format!("coefficient {at}: expected \"num/den\" or an integer, got {v}"));
    match v {
        Value::String(s) => parse_rational(s).ok_or_else(bad),
        Value::Number(n) => n.as_i64().map(|i| Rational::from_ratio(i, 1)).ok_or_else(bad),
        _ => Err(bad()),
    }
}

fn coeff_float(v: &Value, at: usize) -> Result<f64, IoError> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| IoError::Format(format!("coefficient {at}: {n} is not a binary64 value"))),
        Value::String(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| IoError::Format(format!("coefficient {at}: cannot parse '{s}'"))),
        other => Err(IoError::Format(format!("coefficient {at}: expected a number, got {other}"))),
    }
}

/// Parses a value that may be an exact string or a number into `S`.
pub fn value_to_scalar<S: Scalar>(v: &Value) -> Result<S, IoError> {
    match S::MODE {
        NumericMode::Exact => match v {
            Value::Number(n) if n.as_i64().is_none() => float_to_scalar(n.as_f64().unwrap_or(f64::NAN)),
            _ => coeff_rational(v, 0).map(|r| S::from_rational(&r)),
        },
        NumericMode::Float => match v {
            Value::String(s) => match parse_rational(s) {
                Some(r) => Ok(S::from_rational(&r)),
                None => float_to_scalar(coeff_float(v, 0)?),
            },
            _ => float_to_scalar(coeff_float(v, 0)?),
        },
    }
}

pub fn parse_kernel(text: &str) -> Result<KernelDoc, IoError> {
    let raw: KernelJson = serde_json::from_str(text)?;
    let model: Model = raw.model.parse()?;
    let mode: NumericMode = raw
        .mode
        .parse()
        .map_err(|_| IoError::Format(format!("unknown mode '{}'", raw.mode)))?;
    let kernel = match mode {
        NumericMode::Exact => {
            let coeffs = raw
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, v)| coeff_rational(v, i))
                .collect::<Result<Vec<_>, _>>()?;
            AnyKernel::Exact(GridKernel::new(raw.p, raw.m, coeffs)?)
        }
        NumericMode::Float => {
            let coeffs = raw
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, v)| coeff_float(v, i))
                .collect::<Result<Vec<_>, _>>()?;
            AnyKernel::Float(GridKernel::new(raw.p, raw.m, coeffs)?)
        }
    };
    Ok(KernelDoc {
        model,
        kernel,
        expect: raw.expect,
    })
}

pub fn read_kernel(path: &Path) -> Result<KernelDoc, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_kernel(&text)
}

pub fn kernel_to_json<S: Scalar>(model: Model, kernel: &GridKernel<S>) -> String {
    let coeffs = kernel.coeffs().iter().map(scalar_json).collect();
    let doc = KernelJson {
        model: model.as_str().into(),
        p: kernel.order(),
        m: kernel.resolution(),
        mode: S::MODE.as_str().into(),
        coeffs,
        expect: None,
    };
    serde_json::to_string_pretty(&doc).expect("kernel documents serialize")
}

/// Exact values as `"num/den"` strings, floats as JSON numbers.
pub fn scalar_json<S: Scalar>(x: &S) -> Value {
    match S::MODE {
        NumericMode::Exact => Value::String(x.to_string()),
        NumericMode::Float => serde_json::Number::from_f64(x.to_f64()).map_or(Value::Null, Value::Number),
    }
}

/// Provenance embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    /// Arguments after the program name, with any output destination removed.
    pub argv: Vec<String>,
    pub kernel_source: Option<String>,
    pub model: Option<String>,
    pub mode: String,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub versions: BTreeMap<String, String>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String], mode: NumericMode, timestamp: String) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("chaoskit".to_string(), env!("CARGO_PKG_VERSION").to_string());
        RunManifest {
            schema: MANIFEST_SCHEMA.into(),
            command: command.into(),
            argv: strip_output_args(argv),
            kernel_source: None,
            model: None,
            mode: mode.as_str().into(),
            seed: None,
            rng: None,
            versions,
            timestamp,
        }
    }
}

fn strip_output_args(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
            continue;
        }
        if a == "--output" || a == "-o" {
            skip = true;
            continue;
        }
        if a.starts_with("--output=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}

/// `SOURCE_DATE_EPOCH` when set, the current time otherwise, as RFC 3339 UTC.
pub fn timestamp_now() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or_else(|| chrono::Utc::now().timestamp());
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// A table with a header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    Value::Object(
                        self.header
                            .iter()
                            .cloned()
                            .zip(r.iter().map(|c| Value::String(c.clone())))
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

pub fn render_csv(manifest: &RunManifest, table: &Table) -> Result<String, IoError> {
    let mut out = String::new();
    out.push_str(&format!("# schema: {CSV_SCHEMA}\n"));
    out.push_str(&format!("# manifest: {}\n", serde_json::to_string(manifest)?));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Format(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
    Ok(out)
}

pub fn render_json(manifest: &RunManifest, result: Value) -> Result<String, IoError> {
    let doc = serde_json::json!({
        "schema": JSON_SCHEMA,
        "manifest": manifest,
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

/// Recovers the manifest embedded in a CSV or JSON output.
pub fn extract_manifest(text: &str) -> Result<RunManifest, IoError> {
    if text.starts_with("# schema:") {
        let line = text
            .lines()
            .find_map(|l| l.strip_prefix("# manifest: "))
            .ok_or_else(|| IoError::Format("CSV output has no manifest line".into()))?;
        return Ok(serde_json::from_str(line)?);
    }
    let doc: Value = serde_json::from_str(text)?;
    let m = doc
        .get("manifest")
        .ok_or_else(|| IoError::Format("JSON output has no manifest".into()))?;
    Ok(serde_json::from_value(m.clone())?)
}

/// Parses the CSV body of an output, skipping the comment header.
pub fn parse_csv(text: &str) -> Result<Table, IoError> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_round_trip() {
        let k = GridKernel::new(2, 2, vec![Rational::from_ratio(0, 1), Rational::from_ratio(5, 2), Rational::from_ratio(5, 2), Rational::from_ratio(-1, 3)]).unwrap();
        let text = kernel_to_json(Model::Free, &k);
        assert!(text.contains("\"5/2\""));
        let doc = parse_kernel(&text).unwrap();
        assert_eq!(doc.model, Model::Free);
        assert_eq!(doc.kernel, AnyKernel::Exact(k));
    }

    #[test]
    fn float_round_trip_and_conversion() {
        let k = GridKernel::new(1, 2, vec![0.5, -1.25]).unwrap();
        let doc = parse_kernel(&kernel_to_json(Model::Classical, &k)).unwrap();
        assert_eq!(doc.kernel, AnyKernel::Float(k));
        let exact: GridKernel<Rational> = doc.kernel.to_scalar().unwrap();
        assert_eq!(exact.coeffs()[1], Rational::from_ratio(-5, 4));
    }

    #[test]
    fn rejects_bad_files() {
        let short = r#"{"model":"classical","p":2,"m":2,"mode":"exact","coeffs":["0","1","1"]}"#;
        assert!(matches!(parse_kernel(short), Err(IoError::Core(chaoskit_core::Error::LengthMismatch { .. }))));
        let nan = r#"{"model":"classical","p":1,"m":1,"mode":"float","coeffs":["NaN"]}"#;
        assert!(matches!(parse_kernel(nan), Err(IoError::Core(chaoskit_core::Error::NonFinite { .. }))));
        let junk = r#"{"model":"classical","p":1,"m":1,"mode":"exact","coeffs":["x"]}"#;
        assert!(matches!(parse_kernel(junk), Err(IoError::Format(_))));
        let extra = r#"{"model":"classical","p":1,"m":1,"mode":"exact","coeffs":["1"],"bogus":1}"#;
        assert!(matches!(parse_kernel(extra), Err(IoError::Json(_))));
    }

    #[test]
    fn manifest_round_trip() {
        let argv: Vec<String> = ["moment", "--k", "4", "--output", "x.json"].iter().map(|s| s.to_string()).collect();
        let m = RunManifest::new("moment", &argv, NumericMode::Exact, "2020-01-01T00:00:00Z".into());
        assert_eq!(m.argv, vec!["moment", "--k", "4"]);
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        let csv = render_csv(&m, &t).unwrap();
        assert_eq!(extract_manifest(&csv).unwrap(), m);
        assert_eq!(parse_csv(&csv).unwrap(), t);
        let json = render_json(&m, t.to_json()).unwrap();
        assert_eq!(extract_manifest(&json).unwrap(), m);
    }
}
