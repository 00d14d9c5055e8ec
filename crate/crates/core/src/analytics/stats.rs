//! Summary statistics with exact, order-independent merging.
//!
//! All accumulators hold integer tallies (IC bands and community scores are
//! integers), so merging partial results in any grouping gives bit-identical
//! final numbers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    #[serde(alias = "ln")]
    E,
    #[serde(alias = "2")]
    Two,
    #[serde(alias = "10")]
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::E => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

impl FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "e" | "ln" => Ok(LogBase::E),
            "2" | "two" => Ok(LogBase::Two),
            "10" | "ten" => Ok(LogBase::Ten),
            _ => Err(format!("unknown log base {s:?}; expected e, 2 or 10")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    #[default]
    HalfUp,
    Ceil,
}

impl FromStr for Rounding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "half_up" => Ok(Rounding::HalfUp),
            "ceil" => Ok(Rounding::Ceil),
            _ => Err(format!("unknown rounding {s:?}; expected half_up or ceil")),
        }
    }
}

/// Length bins are `rounding(log_base(word_count))`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinConfig {
    pub base: LogBase,
    pub rounding: Rounding,
}

impl BinConfig {
    /// `None` for empty documents, which have no logarithm.
    pub fn bin(&self, word_count: usize) -> Option<i64> {
        if word_count == 0 {
            return None;
        }
        let l = self.base.log(word_count as f64);
        Some(match self.rounding {
            Rounding::HalfUp => (l + 0.5).floor() as i64,
            Rounding::Ceil => l.ceil() as i64,
        })
    }
}

impl fmt::Display for BinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.base {
            LogBase::E => "e",
            LogBase::Two => "2",
            LogBase::Ten => "10",
        };
        let rounding = match self.rounding {
            Rounding::HalfUp => "half_up",
            Rounding::Ceil => "ceil",
        };
        write!(f, "log base {base}, {rounding} rounding")
    }
}

/// Count, sum and sum of squares of integer observations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub sum: i128,
    pub sum_sq: i128,
}

impl Moments {
    pub fn add(&mut self, x: i64) {
        self.n += 1;
        self.sum += x as i128;
        self.sum_sq += (x as i128) * (x as i128);
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.n as f64
    }

    /// Sample standard deviation (n - 1 denominator); 0 for n < 2.
    pub fn sample_sd(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as i128;
        // n * sum_sq - sum^2 is exact in integers
        let ss = (n * self.sum_sq - self.sum * self.sum) as f64 / self.n as f64;
        (ss.max(0.0) / (self.n - 1) as f64).sqrt()
    }

    /// Half-width of the normal-approximation 95% interval of the mean.
    pub fn ci95_halfwidth(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        1.96 * self.sample_sd() / (self.n as f64).sqrt()
    }
}

/// Sufficient statistics for regressing y on x.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OlsAccumulator {
    pub n: u64,
    pub sx: i128,
    pub sy: i128,
    pub sxx: i128,
    pub sxy: i128,
}

impl OlsAccumulator {
    pub fn add(&mut self, x: i64, y: i64) {
        let (x, y) = (x as i128, y as i128);
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.sxy += x * y;
    }

    pub fn merge(&mut self, o: &OlsAccumulator) {
        self.n += o.n;
        self.sx += o.sx;
        self.sy += o.sy;
        self.sxx += o.sxx;
        self.sxy += o.sxy;
    }

    /// `(slope, intercept)`, or `None` when x never varies.
    pub fn fit(&self) -> Option<(f64, f64)> {
        let n = self.n as i128;
        let cxx = n * self.sxx - self.sx * self.sx;
        if self.n == 0 || cxx == 0 {
            return None;
        }
        let cxy = n * self.sxy - self.sx * self.sy;
        let slope = cxy as f64 / cxx as f64;
        let intercept = (self.sy as f64 - slope * self.sx as f64) / self.n as f64;
        Some((slope, intercept))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LetterValue {
    /// 1 is the median, 2 the fourths, 3 the eighths, ...
    pub level: usize,
    pub label: String,
    pub depth: f64,
    pub lower: f64,
    pub upper: f64,
}

fn level_label(level: usize) -> String {
    const LABELS: [&str; 13] = ["M", "F", "E", "D", "C", "B", "A", "Z", "Y", "X", "W", "V", "U"];
    LABELS.get(level - 1).map_or_else(|| format!("L{level}"), |s| s.to_string())
}

/// Letter values of `data`: the median, then successively halved tail
/// depths `d' = (floor(d) + 1) / 2`. Levels beyond the median are kept while
/// each tail still holds at least 8 points.
pub fn letter_values(data: &[f64]) -> Vec<LetterValue> {
    if data.is_empty() {
        return Vec::new();
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let at = |d: f64| {
        let lo = d.floor() as usize;
        let hi = d.ceil() as usize;
        let lower = (sorted[lo - 1] + sorted[hi - 1]) / 2.0;
        let upper = (sorted[n - lo] + sorted[n - hi]) / 2.0;
        (lower, upper)
    };
    let mut out = Vec::new();
    let mut depth = (n as f64 + 1.0) / 2.0;
    let mut level = 1;
    loop {
        let (lower, upper) = at(depth);
        out.push(LetterValue {
            level,
            label: level_label(level),
            depth,
            lower,
            upper,
        });
        depth = (depth.floor() + 1.0) / 2.0;
        level += 1;
        if depth.floor() < 8.0 {
            break;
        }
    }
    out
}
