use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::measure::Estimate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "INFO",
        })
    }
}

/// One measured quantity, optionally compared with an oracle value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub input: String,
    #[serde(with = "float")]
    pub estimate: f64,
    #[serde(with = "float")]
    pub std_error: f64,
    #[serde(with = "opt_float")]
    pub oracle: Option<f64>,
    #[serde(with = "opt_float")]
    pub deviation: Option<f64>,
    #[serde(with = "opt_float")]
    pub sigma_multiple: Option<f64>,
    pub verdict: Verdict,
}

impl Row {
    pub fn info(input: impl Into<String>, est: Estimate) -> Self {
        Self {
            input: input.into(),
            estimate: est.value,
            std_error: est.std_error,
            oracle: None,
            deviation: None,
            sigma_multiple: None,
            verdict: Verdict::Info,
        }
    }

    /// A row compared with `oracle`; the deviation is `estimate - oracle`.
    pub fn compare(input: impl Into<String>, est: Estimate, oracle: f64, verdict: Verdict) -> Self {
        Self {
            input: input.into(),
            estimate: est.value,
            std_error: est.std_error,
            oracle: Some(oracle),
            deviation: Some(est.value - oracle),
            sigma_multiple: Some(est.sigma_distance(oracle)),
            verdict,
        }
    }

    /// An error that was expected or tolerated, recorded as an INFO row.
    pub fn error(input: impl Into<String>, err: &crate::Error) -> Self {
        Self {
            input: format!("{}; error: {err}", input.into()),
            estimate: f64::NAN,
            std_error: f64::NAN,
            oracle: None,
            deviation: None,
            sigma_multiple: None,
            verdict: Verdict::Info,
        }
    }
}

/// Verdict for one acceptance criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub criterion: String,
    pub description: String,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub rows: Vec<Row>,
    pub summary: Vec<Criterion>,
    pub seed: u64,
    pub wall_time_ms: Option<u64>,
    /// Series for the convergence chart; not part of the serialized report.
    #[serde(skip)]
    pub plot: Option<Plot>,
}

/// Quotient against ε with the sharp constant as reference level.
#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub points: Vec<(f64, f64)>,
    pub reference: f64,
}

impl ExperimentReport {
    pub(crate) fn new(experiment: &str, seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            params: BTreeMap::new(),
            rows: Vec::new(),
            summary: Vec::new(),
            seed,
            wall_time_ms: None,
            plot: None,
        }
    }

    pub(crate) fn param(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("parameters are plain data");
        self.params.insert(key.to_string(), value);
    }

    /// Adds a criterion whose verdict is PASS iff every listed row passed.
    /// Rows must be non-empty; INFO rows are ignored.
    pub(crate) fn criterion_over(&mut self, id: &str, description: &str, rows: &[Row]) {
        let graded: Vec<_> = rows.iter().filter(|r| r.verdict != Verdict::Info).collect();
        let verdict = if graded.is_empty() {
            Verdict::Fail
        } else {
            Verdict::from_bool(graded.iter().all(|r| r.verdict == Verdict::Pass))
        };
        self.criterion(id, description, verdict);
    }

    pub(crate) fn criterion(&mut self, id: &str, description: &str, verdict: Verdict) {
        self.summary.push(Criterion {
            criterion: id.to_string(),
            description: description.to_string(),
            verdict,
        });
    }

    pub fn any_fail(&self) -> bool {
        self.summary.iter().any(|c| c.verdict == Verdict::Fail) || self.rows.iter().any(|r| r.verdict == Verdict::Fail)
    }

    /// Combined verdict of every summary entry for `id`: FAIL wins, then
    /// PASS; a criterion with only INFO entries stays INFO.
    pub fn verdict_of(&self, id: &str) -> Option<Verdict> {
        let found: Vec<Verdict> = self.summary.iter().filter(|c| c.criterion == id).map(|c| c.verdict).collect();
        if found.is_empty() {
            None
        } else if found.contains(&Verdict::Fail) {
            Some(Verdict::Fail)
        } else if found.contains(&Verdict::Pass) {
            Some(Verdict::Pass)
        } else {
            Some(Verdict::Info)
        }
    }
}

/// JSON has no literal for non-finite numbers; they travel as the strings
/// `"inf"`, `"-inf"` and `"nan"`.
mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        Num(f64),
        Text(String),
    }

    pub(super) fn to_f64(r: Repr) -> Result<f64, String> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => other.parse().map_err(|_| format!("not a number: {other:?}")),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        to_f64(Repr::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

mod opt_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::float::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<super::float::Repr>::deserialize(d)?
            .map(super::float::to_f64)
            .transpose()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_keeps_bits_and_non_finite_values() {
        let mut report = ExperimentReport::new("demo", 7);
        report.param("p", 2.0);
        report.rows.push(Row::compare("a", Estimate::exact(0.1 + 0.2), 0.3, Verdict::Pass));
        report.rows.push(Row::compare("b", Estimate::exact(f64::INFINITY), 0.5, Verdict::Info));
        report.rows.push(Row::error("c", &crate::Error::ZeroNorm));
        report.criterion_over("AC1", "demo", &report.rows.clone());
        let text = serde_json::to_string(&report).unwrap();
        let back: ExperimentReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.rows[0].estimate.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(back.rows[1].estimate, f64::INFINITY);
        assert_eq!(back.rows[1].sigma_multiple, Some(f64::INFINITY));
        assert!(back.rows[2].estimate.is_nan());
        assert_eq!(back.summary, report.summary);
        assert_eq!(report.verdict_of("AC1"), Some(Verdict::Pass));
        assert_eq!(report.verdict_of("AC2"), None);
    }
}
