//! Group-comparison metrics: descriptive statistics, histograms, Earth
//! Mover's Distance and Sum of Absolute Differences.
//!
//! Standard deviations are population (divide by `n`). EMD compares the
//! unit-mass versions of two histograms; SAD compares raw counts.

use std::fmt::{Debug, Display};

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{model_metrics, ClassModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("no samples")]
    Empty,
    #[error("bin edges must be at least two strictly increasing finite values")]
    BadEdges,
    #[error("sample {value} lies outside [{low}, {high}]")]
    OutOfRange { value: String, low: String, high: String },
    #[error("histograms have different bin edges")]
    MismatchedEdges,
    #[error("histogram has no mass")]
    ZeroTotal,
    #[error("sample {0} is not finite")]
    NotFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats<T> {
    pub n: usize,
    pub min: T,
    pub max: T,
    pub mean: T,
    pub std: T,
}

impl<T: Float + Display> Display for DescriptiveStats<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:.2}/{:.2}/{:.2}/{:.2}",
            self.min, self.max, self.mean, self.std
        )
    }
}

/// Single-pass (Welford) min/max/mean/population std.
pub fn stats<T: Float + Debug>(samples: &[T]) -> Result<DescriptiveStats<T>, AnalyticsError> {
    let first = *samples.first().ok_or(AnalyticsError::Empty)?;
    let (mut min, mut max) = (first, first);
    let mut mean = T::zero();
    let mut m2 = T::zero();
    for (k, &x) in samples.iter().enumerate() {
        if !x.is_finite() {
            return Err(AnalyticsError::NotFinite(format!("{x:?}")));
        }
        min = min.min(x);
        max = max.max(x);
        let n = T::from(k + 1).expect("count fits the float type");
        let delta = x - mean;
        mean = mean + delta / n;
        m2 = m2 + delta * (x - mean);
    }
    let n = T::from(samples.len()).expect("count fits the float type");
    Ok(DescriptiveStats {
        n: samples.len(),
        min,
        max,
        mean: mean.max(min).min(max),
        std: (m2.max(T::zero()) / n).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram<T> {
    bin_edges: Vec<T>,
    counts: Vec<u64>,
}

impl<T: Float + Debug> Histogram<T> {
    pub fn from_counts(bin_edges: Vec<T>, counts: Vec<u64>) -> Result<Self, AnalyticsError> {
        check_edges(&bin_edges)?;
        if counts.len() + 1 != bin_edges.len() {
            return Err(AnalyticsError::BadEdges);
        }
        Ok(Self { bin_edges, counts })
    }

    pub fn bin_edges(&self) -> &[T] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn width(&self, i: usize) -> T {
        self.bin_edges[i + 1] - self.bin_edges[i]
    }
}

fn check_edges<T: Float>(edges: &[T]) -> Result<(), AnalyticsError> {
    if edges.len() < 2
        || edges.iter().any(|e| !e.is_finite())
        || edges.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(AnalyticsError::BadEdges);
    }
    Ok(())
}

/// `bins` equal-width bins spanning `[low, high]`.
pub fn uniform_edges<T: Float>(low: T, high: T, bins: usize) -> Vec<T> {
    let k = T::from(bins).expect("bin count fits the float type");
    (0..=bins)
        .map(|i| {
            if i == bins {
                high
            } else {
                low + (high - low) * T::from(i).expect("index fits") / k
            }
        })
        .collect()
}

/// Bins `[e_i, e_{i+1})`, with the last bin closed on the right.
pub fn histogram<T: Float + Debug>(samples: &[T], bin_edges: &[T]) -> Result<Histogram<T>, AnalyticsError> {
    check_edges(bin_edges)?;
    let k = bin_edges.len() - 1;
    let (low, high) = (bin_edges[0], bin_edges[k]);
    let mut counts = vec![0u64; k];
    for &x in samples {
        if !(x >= low && x <= high) {
            return Err(AnalyticsError::OutOfRange {
                value: format!("{x:?}"),
                low: format!("{low:?}"),
                high: format!("{high:?}"),
            });
        }
        // first edge strictly greater than x, minus one
        let bin = bin_edges.partition_point(|&e| e <= x).saturating_sub(1).min(k - 1);
        counts[bin] += 1;
    }
    Ok(Histogram {
        bin_edges: bin_edges.to_vec(),
        counts,
    })
}

fn same_edges<T: Float>(a: &Histogram<T>, b: &Histogram<T>) -> Result<(), AnalyticsError> {
    if a.bin_edges != b.bin_edges {
        return Err(AnalyticsError::MismatchedEdges);
    }
    Ok(())
}

/// One-dimensional EMD between the normalized histograms, in sample units.
pub fn emd<T: Float + Debug>(a: &Histogram<T>, b: &Histogram<T>) -> Result<T, AnalyticsError> {
    same_edges(a, b)?;
    let (ta, tb) = (a.total(), b.total());
    if ta == 0 || tb == 0 {
        return Err(AnalyticsError::ZeroTotal);
    }
    let (ta, tb) = (T::from(ta).unwrap(), T::from(tb).unwrap());
    let (mut ca, mut cb) = (0u64, 0u64);
    let mut acc = T::zero();
    for i in 0..a.counts.len() {
        ca += a.counts[i];
        cb += b.counts[i];
        let diff = T::from(ca).unwrap() / ta - T::from(cb).unwrap() / tb;
        acc = acc + diff.abs() * a.width(i);
    }
    Ok(acc)
}

/// Sum of absolute count differences.
pub fn sad<T: Float>(a: &Histogram<T>, b: &Histogram<T>) -> Result<u64, AnalyticsError> {
    same_edges(a, b)?;
    Ok(a.counts
        .iter()
        .zip(&b.counts)
        .map(|(&x, &y)| x.abs_diff(y))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Read a pre-generated transcript.
    CG,
    /// Interviewed the simulated client.
    EG,
}

impl Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Group::CG => "CG",
            Group::EG => "EG",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary<T> {
    pub group: Group,
    pub duration_hours: DescriptiveStats<T>,
    pub class_count: DescriptiveStats<T>,
    pub attribute_count: DescriptiveStats<T>,
}

pub fn group_summary<T: Float + Debug>(
    submissions: &[(T, &ClassModel)],
    group: Group,
) -> Result<GroupSummary<T>, AnalyticsError> {
    if submissions.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let durations: Vec<T> = submissions.iter().map(|(d, _)| *d).collect();
    let metrics: Vec<_> = submissions.iter().map(|(_, m)| model_metrics(m)).collect();
    let to_t = |v: usize| T::from(v).expect("count fits the float type");
    let classes: Vec<T> = metrics.iter().map(|m| to_t(m.class_count)).collect();
    let attributes: Vec<T> = metrics.iter().map(|m| to_t(m.total_attribute_count)).collect();
    Ok(GroupSummary {
        group,
        duration_hours: stats(&durations)?,
        class_count: stats(&classes)?,
        attribute_count: stats(&attributes)?,
    })
}
