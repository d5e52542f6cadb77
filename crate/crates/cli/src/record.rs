//! Experiment records and their serialization.
//!
//! One record per experiment (or per grid point): a versioned schema tag,
//! the subcommand, its parameters, the seed, named numeric results, and a
//! pass flag. Records print as line-delimited JSON or CSV; identical
//! parameters and seed reproduce byte-identical output.

use num_traits::ToPrimitive;
use serde_json::{Map, Number, Value};
use splitmix_core::exact::Rational;
use std::collections::BTreeMap;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub subcommand: String,
    pub seed: u64,
    pub params: BTreeMap<String, Value>,
    pub results: BTreeMap<String, Value>,
    pub pass: bool,
}

impl ExperimentRecord {
    pub fn new(subcommand: &str, seed: u64) -> Self {
        ExperimentRecord {
            subcommand: subcommand.into(),
            seed,
            params: BTreeMap::new(),
            results: BTreeMap::new(),
            pass: true,
        }
    }

    pub fn param(&mut self, key: &str, value: Value) -> &mut Self {
        self.params.insert(key.into(), value);
        self
    }

    pub fn result(&mut self, key: &str, value: Value) -> &mut Self {
        self.results.insert(key.into(), value);
        self
    }

    /// Records a rational exactly (`<key>_exact` as "num/den") alongside its
    /// 12-significant-digit float rendering.
    pub fn result_rational(&mut self, key: &str, value: &Rational) -> &mut Self {
        self.results
            .insert(key.into(), num(value.to_f64().unwrap_or(f64::NAN)));
        self.results.insert(
            format!("{key}_exact"),
            Value::String(format!("{}/{}", value.numer(), value.denom())),
        );
        self
    }

    pub fn set_pass(&mut self, pass: bool) -> &mut Self {
        self.pass = pass;
        self
    }

    fn to_json_value(&self) -> Value {
        let mut map = Map::new();
        map.insert("schema".into(), Value::from(SCHEMA_VERSION));
        map.insert("subcommand".into(), Value::String(self.subcommand.clone()));
        map.insert("seed".into(), Value::from(self.seed));
        map.insert(
            "params".into(),
            Value::Object(self.params.clone().into_iter().collect()),
        );
        map.insert(
            "results".into(),
            Value::Object(self.results.clone().into_iter().collect()),
        );
        map.insert("pass".into(), Value::Bool(self.pass));
        Value::Object(map)
    }
}

/// Rounds to 12 significant digits so printed probabilities are stable and
/// readable.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let digits = 11 - x.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits);
    (x * factor).round() / factor
}

pub fn num(x: f64) -> Value {
    Number::from_f64(sig12(x))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn int(x: u64) -> Value {
    Value::from(x)
}

pub fn list(values: impl IntoIterator<Item = u64>) -> Value {
    Value::Array(values.into_iter().map(Value::from).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

pub fn render(records: &[ExperimentRecord], format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut out = String::new();
            for r in records {
                out.push_str(
                    &serde_json::to_string(&r.to_json_value()).expect("record is valid JSON"),
                );
                out.push('\n');
            }
            out
        }
        OutputFormat::Csv => render_csv(records),
    }
}

fn render_csv(records: &[ExperimentRecord]) -> String {
    let mut param_keys: Vec<String> = Vec::new();
    let mut result_keys: Vec<String> = Vec::new();
    for r in records {
        for k in r.params.keys() {
            if !param_keys.contains(k) {
                param_keys.push(k.clone());
            }
        }
        for k in r.results.keys() {
            if !result_keys.contains(k) {
                result_keys.push(k.clone());
            }
        }
    }
    param_keys.sort();
    result_keys.sort();

    let mut out = String::new();
    out.push_str("schema,subcommand,seed,pass");
    for k in &param_keys {
        out.push_str(&format!(",params.{k}"));
    }
    for k in &result_keys {
        out.push_str(&format!(",results.{k}"));
    }
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{SCHEMA_VERSION},{},{},{}",
            r.subcommand, r.seed, r.pass
        ));
        for k in &param_keys {
            out.push(',');
            if let Some(v) = r.params.get(k) {
                out.push_str(&csv_cell(v));
            }
        }
        for k in &result_keys {
            out.push(',');
            if let Some(v) = r.results.get(k) {
                out.push_str(&csv_cell(v));
            }
        }
        out.push('\n');
    }
    out
}

fn csv_cell(v: &Value) -> String {
    let raw = match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}
