//! Two-input binary-style datasets: one `(x1, x2, d)` column per sample.

use std::io::Read;
use std::path::Path;

use log::warn;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset is empty")]
    Empty,
    #[error("inputs must be nonnegative concentrations (sample {sample})")]
    NegativeInput { sample: usize },
    #[error("batch size {batch} does not divide dataset size {p}")]
    Batch { p: usize, batch: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    pub name: String,
    /// Columns of the sample matrix: `(x1, x2, d)`.
    pub samples: Vec<[S; 3]>,
}

/// Inputs of one mini-batch with the constant bias row appended, plus targets.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchView<S> {
    /// One `(x1, x2, 1)` column per sample.
    pub xi: Vec<[S; 3]>,
    pub delta: Vec<S>,
}

impl<S: Scalar> BatchView<S> {
    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }
}

const INPUTS: [(f64, f64); 4] = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];

impl<S: Scalar> Dataset<S> {
    fn truth_table(name: &str, labels: [f64; 4]) -> Self {
        let samples = INPUTS
            .iter()
            .zip(labels)
            .map(|(&(a, b), d)| [S::lit(a), S::lit(b), S::lit(d)])
            .collect();
        Self {
            name: name.to_string(),
            samples,
        }
    }

    pub fn or() -> Self {
        Self::truth_table("OR", [0.0, 1.0, 1.0, 1.0])
    }

    pub fn xor() -> Self {
        Self::truth_table("XOR", [0.0, 1.0, 1.0, 0.0])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<S> {
        self.samples.iter().map(|s| s[2]).collect()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.samples.is_empty() {
            return Err(DatasetError::Empty);
        }
        if let Some(i) = self
            .samples
            .iter()
            .position(|s| s[0] < S::zero() || s[1] < S::zero())
        {
            return Err(DatasetError::NegativeInput { sample: i + 1 });
        }
        Ok(())
    }

    /// Mini-batch `b` (zero based) of size `batch`, samples taken consecutively.
    pub fn batch(&self, b: usize, batch: usize) -> Result<BatchView<S>, DatasetError> {
        let p = self.len();
        if batch == 0 || batch > p || p % batch != 0 {
            return Err(DatasetError::Batch { p, batch });
        }
        let start = (b % (p / batch)) * batch;
        let cols = &self.samples[start..start + batch];
        Ok(BatchView {
            xi: cols.iter().map(|s| [s[0], s[1], S::one()]).collect(),
            delta: cols.iter().map(|s| s[2]).collect(),
        })
    }

    /// The whole dataset as a single batch.
    pub fn full_batch(&self) -> BatchView<S> {
        self.batch(0, self.len()).expect("nonempty dataset")
    }

    /// Reads CSV with header `x1,x2,d`.
    pub fn from_csv_reader<R: Read>(name: &str, reader: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header_err = |message: String| DatasetError::Parse { line: 1, message };
        let headers = rdr
            .headers()
            .map_err(|e| header_err(e.to_string()))?
            .clone();
        let col = |want: &str| {
            headers
                .iter()
                .position(|h| h == want)
                .ok_or_else(|| header_err(format!("missing column `{want}`")))
        };
        let (c1, c2, cd) = (col("x1")?, col("x2")?, col("d")?);
        let mut samples = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| DatasetError::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(line),
                message: e.to_string(),
            })?;
            let field = |c: usize| -> Result<f64, DatasetError> {
                let raw = rec.get(c).unwrap_or("");
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DatasetError::Parse {
                        line,
                        message: format!("not a number: `{raw}`"),
                    })
            };
            let (x1, x2, d) = (field(c1)?, field(c2)?, field(cd)?);
            if !(0.0..=1.0).contains(&d) {
                warn!("{name}: target {d} on line {line} lies outside [0, 1]");
            }
            samples.push([S::lit(x1), S::lit(x2), S::lit(d)]);
        }
        let ds = Self {
            name: name.to_string(),
            samples,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// `OR`, `XOR` (case-insensitive) or a path to a CSV file.
    pub fn load(spec: &str) -> Result<Self, DatasetError> {
        match spec.to_ascii_uppercase().as_str() {
            "OR" => Ok(Self::or()),
            "XOR" => Ok(Self::xor()),
            _ => {
                let path = Path::new(spec);
                let name = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or(spec)
                    .to_string();
                Self::from_csv_reader(&name, std::fs::File::open(path)?)
            }
        }
    }
}
