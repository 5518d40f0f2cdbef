//! Scalar maps over the communication floor and their CSV form.
//!
//! CSV layout: a header line `nx,ny,step,quantity`, a line with those four
//! values, then `ny` rows of `nx` values (row `j` is `y = (j + ½)·step`),
//! each written with 9 significant digits.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid has {got} values, expected {nx} x {ny}")]
    Shape { nx: usize, ny: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("malformed grid CSV: {0}")]
    Csv(String),
}

/// Floor applied before converting ratios to dB so maps stay finite.
pub const DB_FLOOR: f64 = -300.0;

/// `10·log10(x)`, floored at [`DB_FLOOR`].
pub fn to_db(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combining {
    Sc,
    Mrc,
}

impl Combining {
    pub fn name(self) -> &'static str {
        match self {
            Combining::Sc => "sc",
            Combining::Mrc => "mrc",
        }
    }
}

impl fmt::Display for Combining {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    SnrDb,
    SinrDb,
    GainDb,
    Lux,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::SnrDb => "snr_db",
            Quantity::SinrDb => "sinr_db",
            Quantity::GainDb => "gain_db",
            Quantity::Lux => "lux",
        }
    }

    pub fn parse(s: &str) -> Option<Quantity> {
        [Quantity::SnrDb, Quantity::SinrDb, Quantity::GainDb, Quantity::Lux]
            .into_iter()
            .find(|q| q.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub nx: usize,
    pub ny: usize,
    pub step: f64,
    /// Row-major, `values[j * nx + i]`.
    pub values: Vec<f64>,
    pub quantity: Quantity,
}

impl ScalarGrid {
    pub fn new(nx: usize, ny: usize, step: f64, values: Vec<f64>, quantity: Quantity) -> Result<Self, GridError> {
        if values.len() != nx * ny {
            return Err(GridError::Shape { nx, ny, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(ScalarGrid { nx, ny, step, values, quantity })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Floor-plane coordinates of entry `k`.
    pub fn position(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.nx, k / self.nx);
        ((i as f64 + 0.5) * self.step, (j as f64 + 0.5) * self.step)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 16 + 64);
        s.push_str("nx,ny,step,quantity\n");
        let _ = writeln!(s, "{},{},{},{}", self.nx, self.ny, self.step, self.quantity.name());
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, GridError> {
        let bad = |m: &str| GridError::Csv(m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("nx,ny,step,quantity") {
            return Err(bad("missing header"));
        }
        let meta: Vec<&str> = lines.next().ok_or_else(|| bad("missing metadata"))?.split(',').collect();
        if meta.len() != 4 {
            return Err(bad("metadata needs 4 fields"));
        }
        let nx: usize = meta[0].parse().map_err(|_| bad("nx"))?;
        let ny: usize = meta[1].parse().map_err(|_| bad("ny"))?;
        let step: f64 = meta[2].parse().map_err(|_| bad("step"))?;
        let quantity = Quantity::parse(meta[3]).ok_or_else(|| bad("quantity"))?;
        let mut values = Vec::with_capacity(nx * ny);
        for line in lines.filter(|l| !l.is_empty()) {
            for v in line.split(',') {
                values.push(v.trim().parse::<f64>().map_err(|_| bad("value"))?);
            }
        }
        ScalarGrid::new(nx, ny, step, values, quantity)
    }

    /// Pointwise `self - other`.
    pub fn difference(&self, other: &ScalarGrid, quantity: Quantity) -> Result<ScalarGrid, GridError> {
        if self.values.len() != other.values.len() {
            return Err(GridError::Shape { nx: self.nx, ny: self.ny, got: other.values.len() });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        ScalarGrid::new(self.nx, self.ny, self.step, values, quantity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub quantity: Quantity,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub argmin: (f64, f64),
    pub argmax: (f64, f64),
    pub threshold: f64,
    /// Percentage of points with value >= threshold.
    pub coverage_percent: f64,
}

/// Extremes, mean and threshold coverage of a map. First occurrence wins
/// for the arg-extremes.
pub fn summarize(map: &ScalarGrid, threshold: f64) -> Summary {
    let n = map.values.len();
    let (mut kmin, mut kmax) = (0, 0);
    for (k, &v) in map.values.iter().enumerate() {
        if v < map.values[kmin] {
            kmin = k;
        }
        if v > map.values[kmax] {
            kmax = k;
        }
    }
    let covered = map.values.iter().filter(|&&v| v >= threshold).count();
    Summary {
        quantity: map.quantity,
        min: map.values[kmin],
        max: map.values[kmax],
        mean: map.values.iter().sum::<f64>() / n as f64,
        argmin: map.position(kmin),
        argmax: map.position(kmax),
        threshold,
        coverage_percent: 100.0 * covered as f64 / n as f64,
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "quantity: {}", self.quantity.name())?;
        writeln!(f, "min: {:.6} at ({:.3}, {:.3})", self.min, self.argmin.0, self.argmin.1)?;
        writeln!(f, "max: {:.6} at ({:.3}, {:.3})", self.max, self.argmax.0, self.argmax.1)?;
        writeln!(f, "mean: {:.6}", self.mean)?;
        writeln!(f, "coverage >= {:.6}: {:.2}%", self.threshold, self.coverage_percent)
    }
}
