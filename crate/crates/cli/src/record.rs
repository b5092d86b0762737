use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use tree_entropy::estimators::Estimate;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    /// Multiplier applied to entropies (stored in nats) at output.
    pub fn factor(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LOG2_E,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

/// One row of a result series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub series: String,
    pub n: Option<usize>,
    pub r: Option<usize>,
    #[serde(flatten)]
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub command: String,
    pub version: String,
    pub units: Units,
    pub seed: u64,
    /// Resolved settings, as text.
    pub config: BTreeMap<String, String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub series: Vec<Point>,
    pub details: serde_json::Value,
}

pub const TIMESTAMP_FIELDS: [&str; 2] = ["started_unix", "finished_unix"];

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl ResultRecord {
    pub fn new(command: &str, seed: u64, units: Units) -> Self {
        ResultRecord {
            experiment: format!("{command}-s{seed}"),
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            units,
            seed,
            config: BTreeMap::new(),
            started_unix: unix_now(),
            finished_unix: 0.0,
            series: Vec::new(),
            details: serde_json::Value::Null,
        }
    }

    pub fn echo(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.into(), value.to_string());
    }

    /// Adds an entropy-valued estimate, converted to the record's units.
    pub fn push_entropy(&mut self, series: &str, n: Option<usize>, r: Option<usize>, e: &Estimate) {
        let estimate = e.scaled(self.units.factor());
        self.series.push(Point { series: series.into(), n, r, estimate });
    }

    /// Adds a unitless estimate (probabilities, fractions, coefficients).
    pub fn push_plain(&mut self, series: &str, n: Option<usize>, r: Option<usize>, e: &Estimate) {
        self.series.push(Point { series: series.into(), n, r, estimate: e.clone() });
    }

    pub fn finish(&mut self) {
        self.finished_unix = unix_now();
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::usage(format!("bad result record: {e}")))
    }

    /// Flat series with columns `series, n, r, value, stderr, samples, seed`.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::usage(e.to_string());
        w.write_record(["series", "n", "r", "value", "stderr", "samples", "seed"]).map_err(io)?;
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        for p in &self.series {
            let e = &p.estimate;
            w.write_record([
                p.series.clone(),
                opt(p.n),
                opt(p.r),
                e.value.to_string(),
                e.stderr.to_string(),
                e.samples.to_string(),
                e.seed.to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

/// The record with timestamp fields removed, for comparing runs.
pub fn strip_timestamps(json: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(json).unwrap_or(serde_json::Value::Null);
    if let Some(obj) = v.as_object_mut() {
        for k in TIMESTAMP_FIELDS {
            obj.remove(k);
        }
    }
    v
}
