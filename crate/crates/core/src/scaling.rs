//! Per-feature scalers with fit-on-train-only semantics.
//!
//! [`fit_scaler`] learns the statistics a [`ScalerKind`] needs from the
//! training matrix; [`FittedScaler::transform`] applies them unchanged to
//! any matrix with the same number of columns. Standard deviations are
//! population (ddof = 0) throughout.
//!
//! Degenerate columns (zero spread) never divide by zero: they map to the
//! image of the column center, `0` for the centered maps and `0.5` for
//! `TT` and `LS`. `RS` with zero IQR falls back to `x - median`.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Cap on the number of reference quantiles stored by `QT`.
pub const MAX_QUANTILES: usize = 1000;

/// Probability clip applied before the inverse normal CDF.
const NORMAL_CLIP: f64 = 1e-7;

/// Constant inside the tanh estimator.
const TANH_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScalerKind {
    /// No scaling (baseline).
    NO,
    /// Min-max normalization.
    MM,
    /// Max-abs normalization.
    MA,
    /// Z-score normalization.
    ZSN,
    /// Variable stability scaling.
    VAST,
    /// Pareto scaling.
    PS,
    /// Mean centering.
    MC,
    /// Robust scaler (median / IQR).
    RS,
    /// Quantile transformation.
    QT,
    /// Decimal scaling.
    DS,
    /// Tanh transformation.
    TT,
    /// Logistic sigmoid transformation.
    LS,
    /// Hyperbolic tangent transformation.
    HT,
}

impl ScalerKind {
    pub const ALL: [ScalerKind; 13] = [
        ScalerKind::NO,
        ScalerKind::MM,
        ScalerKind::MA,
        ScalerKind::ZSN,
        ScalerKind::VAST,
        ScalerKind::PS,
        ScalerKind::MC,
        ScalerKind::RS,
        ScalerKind::QT,
        ScalerKind::DS,
        ScalerKind::TT,
        ScalerKind::LS,
        ScalerKind::HT,
    ];

    pub fn abbreviation(self) -> &'static str {
        match self {
            ScalerKind::NO => "NO",
            ScalerKind::MM => "MM",
            ScalerKind::MA => "MA",
            ScalerKind::ZSN => "ZSN",
            ScalerKind::VAST => "VAST",
            ScalerKind::PS => "PS",
            ScalerKind::MC => "MC",
            ScalerKind::RS => "RS",
            ScalerKind::QT => "QT",
            ScalerKind::DS => "DS",
            ScalerKind::TT => "TT",
            ScalerKind::LS => "LS",
            ScalerKind::HT => "HT",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScalerKind::NO => "no scaling",
            ScalerKind::MM => "min-max normalization",
            ScalerKind::MA => "max-abs normalization",
            ScalerKind::ZSN => "z-score normalization",
            ScalerKind::VAST => "variable stability scaling",
            ScalerKind::PS => "Pareto scaling",
            ScalerKind::MC => "mean centering",
            ScalerKind::RS => "robust scaler",
            ScalerKind::QT => "quantile transformation",
            ScalerKind::DS => "decimal scaling",
            ScalerKind::TT => "tanh transformation",
            ScalerKind::LS => "logistic sigmoid transformation",
            ScalerKind::HT => "hyperbolic tangent transformation",
        }
    }

    fn uses_moments(self) -> bool {
        matches!(
            self,
            ScalerKind::ZSN
                | ScalerKind::VAST
                | ScalerKind::PS
                | ScalerKind::TT
                | ScalerKind::LS
                | ScalerKind::HT
        )
    }
}

impl fmt::Display for ScalerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

impl FromStr for ScalerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScalerKind::ALL
            .into_iter()
            .find(|k| k.abbreviation() == s)
            .ok_or_else(|| Error::UnknownScaler(s.to_owned()))
    }
}

/// Output distribution of the quantile transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantileOutput {
    #[default]
    Uniform,
    Normal,
}

impl FromStr for QuantileOutput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(QuantileOutput::Uniform),
            "normal" => Ok(QuantileOutput::Normal),
            other => Err(Error::InvalidInput(format!(
                "unknown quantile output {other:?} (expected uniform or normal)"
            ))),
        }
    }
}

/// Statistics learned at fit time. Only the vectors a kind needs are set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iqr: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimal_exponent: Option<Vec<u32>>,
    /// Probability levels shared by all features, strictly increasing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile_levels: Option<Vec<f64>>,
    /// Per-feature reference values at `quantile_levels`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile_references: Option<Vec<Vec<f64>>>,
}

impl ScalerStats {
    /// Number of stored scalar statistics.
    pub fn value_count(&self) -> usize {
        let len = |v: &Option<Vec<f64>>| v.as_ref().map_or(0, Vec::len);
        len(&self.mean)
            + len(&self.std)
            + len(&self.min)
            + len(&self.max)
            + len(&self.max_abs)
            + len(&self.median)
            + len(&self.iqr)
            + self.decimal_exponent.as_ref().map_or(0, Vec::len)
            + len(&self.quantile_levels)
            + self
                .quantile_references
                .as_ref()
                .map_or(0, |r| r.iter().map(Vec::len).sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedScaler {
    pub kind: ScalerKind,
    pub n_features: usize,
    pub fit_row_count: usize,
    #[serde(default)]
    pub qt_output: QuantileOutput,
    pub stats: ScalerStats,
    /// Columns with zero spread for this kind's statistics.
    #[serde(default)]
    pub degenerate_columns: Vec<usize>,
}

/// Type-7 (linear interpolation) quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_column(col: ArrayView1<f64>) -> Vec<f64> {
    let mut v = col.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Population mean and standard deviation.
fn moments(col: ArrayView1<f64>) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn decimal_exponent(max_abs: f64) -> u32 {
    let mut j = 0u32;
    while max_abs / 10f64.powi(j as i32) >= 1.0 {
        j += 1;
    }
    j
}

/// Learns the statistics for `kind` from `train_x` (n × d).
pub fn fit_scaler(kind: ScalerKind, train_x: ArrayView2<f64>) -> Result<FittedScaler> {
    fit_scaler_with(kind, train_x, QuantileOutput::Uniform)
}

pub fn fit_scaler_with(
    kind: ScalerKind,
    train_x: ArrayView2<f64>,
    qt_output: QuantileOutput,
) -> Result<FittedScaler> {
    let (n, d) = train_x.dim();
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput(format!(
            "cannot fit scaler on {n}x{d} matrix"
        )));
    }
    if train_x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "NaN or infinite value in scaler input".into(),
        ));
    }

    let columns = || train_x.axis_iter(Axis(1));
    let mut stats = ScalerStats::default();
    let mut degenerate = Vec::new();

    match kind {
        ScalerKind::NO => {}
        ScalerKind::MM => {
            let (mut lo, mut hi) = (Vec::with_capacity(d), Vec::with_capacity(d));
            for (j, col) in columns().enumerate() {
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if max == min {
                    degenerate.push(j);
                }
                lo.push(min);
                hi.push(max);
            }
            stats.min = Some(lo);
            stats.max = Some(hi);
        }
        ScalerKind::MA | ScalerKind::DS => {
            let max_abs: Vec<f64> = columns()
                .map(|col| col.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                .collect();
            degenerate.extend(
                max_abs
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| **m == 0.0)
                    .map(|(j, _)| j),
            );
            if kind == ScalerKind::MA {
                stats.max_abs = Some(max_abs);
            } else {
                stats.decimal_exponent =
                    Some(max_abs.iter().map(|&m| decimal_exponent(m)).collect());
            }
        }
        ScalerKind::MC => {
            stats.mean = Some(columns().map(|col| moments(col).0).collect());
        }
        k if k.uses_moments() => {
            let (mut mean, mut std) = (Vec::with_capacity(d), Vec::with_capacity(d));
            for (j, col) in columns().enumerate() {
                let (m, s) = moments(col);
                if s == 0.0 {
                    degenerate.push(j);
                }
                mean.push(m);
                std.push(s);
            }
            stats.mean = Some(mean);
            stats.std = Some(std);
        }
        ScalerKind::RS => {
            let (mut median, mut iqr) = (Vec::with_capacity(d), Vec::with_capacity(d));
            for (j, col) in columns().enumerate() {
                let sorted = sorted_column(col);
                let spread = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
                if spread == 0.0 {
                    degenerate.push(j);
                }
                median.push(quantile_sorted(&sorted, 0.5));
                iqr.push(spread);
            }
            stats.median = Some(median);
            stats.iqr = Some(iqr);
        }
        ScalerKind::QT => {
            let n_q = n.min(MAX_QUANTILES);
            let levels: Vec<f64> = if n_q == 1 {
                vec![0.0]
            } else {
                (0..n_q).map(|i| i as f64 / (n_q - 1) as f64).collect()
            };
            let mut references = Vec::with_capacity(d);
            for (j, col) in columns().enumerate() {
                let sorted = sorted_column(col);
                if sorted[0] == sorted[n - 1] {
                    degenerate.push(j);
                }
                references.push(
                    levels
                        .iter()
                        .map(|&p| quantile_sorted(&sorted, p))
                        .collect(),
                );
            }
            stats.quantile_levels = Some(levels);
            stats.quantile_references = Some(references);
        }
        _ => unreachable!(),
    }

    Ok(FittedScaler {
        kind,
        n_features: d,
        fit_row_count: n,
        qt_output,
        stats,
        degenerate_columns: degenerate,
    })
}

fn required<'a, T>(v: &'a Option<Vec<T>>, name: &str, d: usize) -> Result<&'a [T]> {
    match v {
        Some(v) if v.len() == d => Ok(v),
        Some(v) => Err(Error::Unfitted(format!(
            "{name} has length {} (expected {d})",
            v.len()
        ))),
        None => Err(Error::Unfitted(format!("{name} statistic missing"))),
    }
}

/// Logistic function, evaluated without overflow for large |q|.
fn logistic(q: f64) -> f64 {
    if q >= 0.0 {
        1.0 / (1.0 + (-q).exp())
    } else {
        let e = q.exp();
        e / (1.0 + e)
    }
}

/// `(1 - e^-q) / (1 + e^-q)`, rewritten for negative `q` so `e^-q` cannot overflow.
fn hyperbolic(q: f64) -> f64 {
    if q >= 0.0 {
        let e = (-q).exp();
        (1.0 - e) / (1.0 + e)
    } else {
        let e = q.exp();
        (e - 1.0) / (e + 1.0)
    }
}

/// Empirical CDF by linear interpolation between reference quantiles.
/// Values at or below the smallest reference map to 0, at or above the
/// largest to 1; a value equal to a run of repeated references maps to the
/// mean of the run's first and last levels.
fn quantile_position(x: f64, refs: &[f64], levels: &[f64]) -> f64 {
    let last = refs.len() - 1;
    if x <= refs[0] {
        return 0.0;
    }
    if x >= refs[last] {
        return 1.0;
    }
    // refs[lo] < x <= ... ; first index with refs[i] >= x
    let lo = refs.partition_point(|&r| r < x);
    let hi = refs.partition_point(|&r| r <= x);
    if hi > lo {
        return 0.5 * (levels[lo] + levels[hi - 1]);
    }
    let (a, b) = (lo - 1, lo);
    levels[a] + (x - refs[a]) / (refs[b] - refs[a]) * (levels[b] - levels[a])
}

impl FittedScaler {
    pub fn stored_value_count(&self) -> usize {
        self.stats.value_count()
    }

    /// Slope and intercept per feature for the kinds that are affine maps
    /// (`NO`, `MM`, `MA`, `ZSN`, `VAST`, `PS`, `MC`, `RS`, `DS`).
    pub fn affine_coefficients(&self) -> Option<Vec<(f64, f64)>> {
        let d = self.n_features;
        let s = &self.stats;
        let coeffs = match self.kind {
            ScalerKind::NO => vec![(1.0, 0.0); d],
            ScalerKind::MM => {
                let (min, max) = (s.min.as_ref()?, s.max.as_ref()?);
                (0..d)
                    .map(|j| {
                        let range = max[j] - min[j];
                        if range == 0.0 {
                            (0.0, 0.0)
                        } else {
                            (1.0 / range, -min[j] / range)
                        }
                    })
                    .collect()
            }
            ScalerKind::MA => s
                .max_abs
                .as_ref()?
                .iter()
                .map(|&m| if m == 0.0 { (0.0, 0.0) } else { (1.0 / m, 0.0) })
                .collect(),
            ScalerKind::DS => s
                .decimal_exponent
                .as_ref()?
                .iter()
                .map(|&j| (1.0 / 10f64.powi(j as i32), 0.0))
                .collect(),
            ScalerKind::MC => s.mean.as_ref()?.iter().map(|&m| (1.0, -m)).collect(),
            ScalerKind::ZSN | ScalerKind::VAST | ScalerKind::PS => {
                let (mean, std) = (s.mean.as_ref()?, s.std.as_ref()?);
                (0..d)
                    .map(|j| {
                        let (m, sd) = (mean[j], std[j]);
                        if sd == 0.0 {
                            return (0.0, 0.0);
                        }
                        let slope = match self.kind {
                            ScalerKind::ZSN => 1.0 / sd,
                            ScalerKind::VAST => m / (sd * sd),
                            _ => 1.0 / sd.sqrt(),
                        };
                        (slope, -m * slope)
                    })
                    .collect()
            }
            ScalerKind::RS => {
                let (median, iqr) = (s.median.as_ref()?, s.iqr.as_ref()?);
                (0..d)
                    .map(|j| {
                        let slope = if iqr[j] == 0.0 { 1.0 } else { 1.0 / iqr[j] };
                        (slope, -median[j] * slope)
                    })
                    .collect()
            }
            _ => return None,
        };
        Some(coeffs)
    }

    /// Applies the fitted map to every cell of `x` (m × d). The input is
    /// left untouched.
    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let d = self.n_features;
        if x.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        let s = &self.stats;
        match self.kind {
            ScalerKind::NO => {}
            ScalerKind::MM => {
                let (min, max) = (required(&s.min, "min", d)?, required(&s.max, "max", d)?);
                map_columns(&mut out, |j, v| {
                    let range = max[j] - min[j];
                    if range == 0.0 {
                        0.0
                    } else {
                        (v - min[j]) / range
                    }
                });
            }
            ScalerKind::MA => {
                let max_abs = required(&s.max_abs, "max_abs", d)?;
                map_columns(&mut out, |j, v| {
                    if max_abs[j] == 0.0 {
                        0.0
                    } else {
                        v / max_abs[j]
                    }
                });
            }
            ScalerKind::MC => {
                let mean = required(&s.mean, "mean", d)?;
                map_columns(&mut out, |j, v| v - mean[j]);
            }
            ScalerKind::DS => {
                let exps = required(&s.decimal_exponent, "decimal_exponent", d)?;
                let divisors: Vec<f64> = exps.iter().map(|&j| 10f64.powi(j as i32)).collect();
                map_columns(&mut out, |j, v| v / divisors[j]);
            }
            ScalerKind::RS => {
                let (median, iqr) = (
                    required(&s.median, "median", d)?,
                    required(&s.iqr, "iqr", d)?,
                );
                map_columns(&mut out, |j, v| {
                    if iqr[j] == 0.0 {
                        v - median[j]
                    } else {
                        (v - median[j]) / iqr[j]
                    }
                });
            }
            kind @ (ScalerKind::ZSN
            | ScalerKind::VAST
            | ScalerKind::PS
            | ScalerKind::TT
            | ScalerKind::LS
            | ScalerKind::HT) => {
                let (mean, std) = (required(&s.mean, "mean", d)?, required(&s.std, "std", d)?);
                map_columns(&mut out, |j, v| {
                    let (m, sd) = (mean[j], std[j]);
                    if sd == 0.0 {
                        return match kind {
                            ScalerKind::TT | ScalerKind::LS => 0.5,
                            _ => 0.0,
                        };
                    }
                    let q = (v - m) / sd;
                    match kind {
                        ScalerKind::ZSN => q,
                        ScalerKind::VAST => q * (m / sd),
                        ScalerKind::PS => (v - m) / sd.sqrt(),
                        ScalerKind::TT => 0.5 * ((TANH_SCALE * q).tanh() + 1.0),
                        ScalerKind::LS => logistic(q),
                        _ => hyperbolic(q),
                    }
                });
            }
            ScalerKind::QT => {
                let levels = s
                    .quantile_levels
                    .as_deref()
                    .ok_or_else(|| Error::Unfitted("quantile_levels statistic missing".into()))?;
                let refs = required(&s.quantile_references, "quantile_references", d)?;
                if levels.is_empty() || refs.iter().any(|r| r.len() != levels.len()) {
                    return Err(Error::Unfitted("quantile grid shape mismatch".into()));
                }
                let normal = Normal::standard();
                let output = self.qt_output;
                map_columns(&mut out, |j, v| {
                    let p = quantile_position(v, &refs[j], levels);
                    match output {
                        QuantileOutput::Uniform => p,
                        QuantileOutput::Normal => {
                            normal.inverse_cdf(p.clamp(NORMAL_CLIP, 1.0 - NORMAL_CLIP))
                        }
                    }
                });
            }
        }
        Ok(out)
    }

    /// As [`transform`](Self::transform) but borrows the input for `NO`,
    /// so the baseline makes no copy.
    pub fn transform_cow<'a>(&self, x: &'a Array2<f64>) -> Result<Cow<'a, Array2<f64>>> {
        if self.kind == ScalerKind::NO {
            if x.ncols() != self.n_features {
                return Err(Error::DimensionMismatch {
                    expected: self.n_features,
                    got: x.ncols(),
                });
            }
            return Ok(Cow::Borrowed(x));
        }
        self.transform(x.view()).map(Cow::Owned)
    }
}

fn map_columns(x: &mut Array2<f64>, f: impl Fn(usize, f64) -> f64) {
    for mut row in x.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = f(j, *v);
        }
    }
}
