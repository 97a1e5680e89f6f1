//! Weights `φ` on `[0, 1]^m` for the weighted Hardy and Cesàro operators.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type FactorFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type JointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Weight {
    /// `Π t_i^{a_i}`.
    Monomial(Vec<f64>),
    /// Any nonnegative integrable weight. When `factors` is present the
    /// weight is the product `Π factors[i](t_i)` and `eval` must agree with it.
    General {
        label: String,
        m: usize,
        eval: JointFn,
        factors: Option<Vec<FactorFn>>,
    },
}

impl Weight {
    /// `φ ≡ 1`.
    pub fn one(m: usize) -> Self {
        Weight::Monomial(vec![0.0; m])
    }

    /// `φ ≡ 0`.
    pub fn zero(m: usize) -> Self {
        Self::separable("zero", (0..m).map(|_| Arc::new(|_: f64| 0.0) as FactorFn).collect())
    }

    pub fn separable(label: impl Into<String>, factors: Vec<FactorFn>) -> Self {
        let fs = factors.clone();
        Weight::General {
            label: label.into(),
            m: factors.len(),
            eval: Arc::new(move |t: &[f64]| fs.iter().zip(t).map(|(f, t)| f(*t)).product()),
            factors: Some(factors),
        }
    }

    pub fn joint(label: impl Into<String>, m: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Weight::General {
            label: label.into(),
            m,
            eval: Arc::new(eval),
            factors: None,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Weight::Monomial(a) => a.len(),
            Weight::General { m, .. } => *m,
        }
    }

    pub fn exponents(&self) -> Option<&[f64]> {
        match self {
            Weight::Monomial(a) => Some(a),
            Weight::General { .. } => None,
        }
    }

    pub fn is_separable(&self) -> bool {
        match self {
            Weight::Monomial(_) => true,
            Weight::General { factors, .. } => factors.is_some(),
        }
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        match self {
            Weight::Monomial(a) => a.iter().zip(t).map(|(a, t)| if *a == 0.0 { 1.0 } else { t.powf(*a) }).product(),
            Weight::General { eval, .. } => eval(t),
        }
    }

    /// Factor `i` of a separable weight.
    pub fn factor(&self, i: usize) -> Option<FactorFn> {
        match self {
            Weight::Monomial(a) => {
                let a = a[i];
                Some(Arc::new(move |t: f64| if a == 0.0 { 1.0 } else { t.powf(a) }))
            }
            Weight::General { factors, .. } => factors.as_ref().map(|f| f[i].clone()),
        }
    }

    pub fn check_m(&self, m: usize) -> Result<()> {
        if self.m() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: self.m(),
            });
        }
        if let Weight::Monomial(a) = self {
            if a.iter().any(|a| !a.is_finite() || *a < 0.0) {
                return Err(Error::invalid("monomial exponents must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    /// Parses `one`, `zero`, `monomial:a_1,…` (a single exponent is repeated
    /// over all factors) or `table:<file>`.
    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let w = match text.split_once(':') {
            None if text == "one" => Weight::one(m),
            None if text == "zero" => Weight::zero(m),
            Some(("monomial", list)) => {
                let mut a = list
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad exponent {t:?}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                if a.len() == 1 && m > 1 {
                    a = vec![a[0]; m];
                }
                Weight::Monomial(a)
            }
            Some(("table", path)) => Self::from_table_file(Path::new(path), m)?,
            _ => return Err(Error::Parse(format!("unknown weight {text:?} (one|zero|monomial:a,…|table:<file>)"))),
        };
        w.check_m(m)?;
        Ok(w)
    }

    pub fn from_table_file(path: &Path, m: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut w = Self::from_table(&text, m)?;
        if let Weight::General { label, .. } = &mut w {
            *label = format!("table:{}", path.display());
        }
        Ok(w)
    }

    /// A separable weight from CSV rows `t,φ_1(t)[,φ_2(t),…]`, interpolated
    /// linearly. One value column is shared by every factor. The grid must be
    /// increasing and cover `[0, 1]`; a non-numeric first line is a header.
    pub fn from_table(text: &str, m: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => rows.push(v),
                Err(_) if i == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("weight table line {}: {e}", i + 1))),
            }
        }
        let width = rows.first().map_or(0, Vec::len);
        if rows.len() < 2 || width < 2 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::Parse("weight table needs ≥ 2 rows of equal width ≥ 2".into()));
        }
        let columns = width - 1;
        if columns != 1 && columns != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: columns,
            });
        }
        let ts: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        if ts.windows(2).any(|w| !(w[1] > w[0])) || ts[0] > 0.0 || *ts.last().unwrap() < 1.0 {
            return Err(Error::Parse("weight table grid must increase and cover [0, 1]".into()));
        }
        if rows.iter().flat_map(|r| &r[1..]).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("weight table values must be finite and nonnegative"));
        }
        let ts = Arc::new(ts);
        let factors = (0..m)
            .map(|i| {
                let col = if columns == 1 { 1 } else { i + 1 };
                let vs: Vec<f64> = rows.iter().map(|r| r[col]).collect();
                let ts = ts.clone();
                Arc::new(move |t: f64| interpolate(&ts, &vs, t)) as FactorFn
            })
            .collect();
        Ok(Self::separable("table", factors))
    }
}

fn interpolate(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let k = ts.partition_point(|x| *x <= t);
    if k == 0 {
        return vs[0];
    }
    if k == ts.len() {
        return vs[k - 1];
    }
    let (t0, t1) = (ts[k - 1], ts[k]);
    vs[k - 1] + (vs[k] - vs[k - 1]) * (t - t0) / (t1 - t0)
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Monomial(a) if a.iter().all(|a| *a == 0.0) => f.write_str("one"),
            Weight::Monomial(a) => {
                let parts: Vec<String> = a.iter().map(|a| a.to_string()).collect();
                write!(f, "monomial:{}", parts.join(","))
            }
            Weight::General { label, .. } => f.write_str(label),
        }
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Weight({self})")
    }
}
