//! Discretization of real-valued market targets into category labels.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Category label: {-1, 0, 1} for 3-class schemes, {0, 1} for sign.
pub type CategoryLabel = i8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Sign,
    EqualFrequency,
    Kmeans,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sign => "sign",
            Method::EqualFrequency => "equal_frequency",
            Method::Kmeans => "kmeans",
        }
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sign" => Ok(Method::Sign),
            "equal_frequency" | "eqfreq" => Ok(Method::EqualFrequency),
            "kmeans" => Ok(Method::Kmeans),
            other => Err(Error::invalid(format!(
                "unknown discretization method {other:?}"
            ))),
        }
    }
}

/// A fitted mapping from real values to category labels.
///
/// `boundaries` are strictly increasing cut points; a value equal to a
/// boundary maps to the higher label. The sign scheme instead applies the
/// strict rule `value > 0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscretizationScheme {
    pub method: Method,
    pub boundaries: Vec<f64>,
    #[cfg_attr(
        feature = "serde",
        serde(skip_serializing_if = "Option::is_none", default)
    )]
    pub centers: Option<Vec<f64>>,
    /// Labels in ascending value order.
    pub labels: Vec<CategoryLabel>,
}

impl DiscretizationScheme {
    pub fn class_count(&self) -> usize {
        self.labels.len()
    }

    /// Structural checks for schemes loaded from external sources.
    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::invalid("scheme has no labels"));
        }
        if self.method != Method::Sign && self.labels.len() != self.boundaries.len() + 1 {
            return Err(Error::invalid(format!(
                "scheme has {} labels but {} boundaries",
                self.labels.len(),
                self.boundaries.len()
            )));
        }
        if self.boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("scheme boundary is not finite"));
        }
        for pair in self.boundaries.windows(2) {
            if pair[0] > pair[1] {
                return Err(Error::invalid("scheme boundaries are not sorted"));
            }
        }
        for pair in self.labels.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::invalid("scheme labels must be strictly increasing"));
            }
        }
        Ok(())
    }

    pub fn apply(&self, value: f64) -> CategoryLabel {
        match self.method {
            Method::Sign => {
                if value > 0.0 {
                    1
                } else {
                    0
                }
            }
            _ => {
                let bin = self.boundaries.iter().filter(|b| value >= **b).count();
                self.labels[bin]
            }
        }
    }
}

/// Labels each value by the fitted scheme.
pub fn apply_scheme(scheme: &DiscretizationScheme, value: f64) -> CategoryLabel {
    scheme.apply(value)
}

/// Binary sign labels: 1 for positive values, 0 otherwise.
pub fn binarize_sign(values: &[f64]) -> (Vec<CategoryLabel>, DiscretizationScheme) {
    let scheme = DiscretizationScheme {
        method: Method::Sign,
        boundaries: alloc::vec![0.0],
        centers: None,
        labels: alloc::vec![0, 1],
    };
    let labels = values.iter().map(|v| scheme.apply(*v)).collect();
    (labels, scheme)
}

/// Equal-frequency 3-class discretization.
///
/// Values are sorted descending (stable: by value, then original index); the
/// top bin is labelled 1, the middle 0, the bottom -1. Bin sizes differ by at
/// most one, with the remainder assigned to the higher-value bins first.
pub fn equal_frequency(values: &[f64]) -> Result<(Vec<CategoryLabel>, DiscretizationScheme)> {
    let n = values.len();
    let k = 3;
    if n < k {
        return Err(Error::invalid(format!("need at least {k} values, got {n}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value"));
    }
    let (min, max) = min_max(values);
    if min == max {
        return Err(Error::degenerate(
            "degenerate distribution: all values equal",
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));

    let base = n / k;
    let rem = n % k;
    let sizes = [
        base + usize::from(rem > 0),
        base + usize::from(rem > 1),
        base,
    ];
    let bin_labels: [CategoryLabel; 3] = [1, 0, -1];

    let mut labels = alloc::vec![0i8; n];
    let mut pos = 0usize;
    let mut cuts = Vec::new(); // boundaries in ascending order, computed below
    for (bin, &size) in sizes.iter().enumerate() {
        for &idx in &order[pos..pos + size] {
            labels[idx] = bin_labels[bin];
        }
        if bin + 1 < k {
            // midpoint between the last value of this bin and the first of the next
            let hi = values[order[pos + size - 1]];
            let lo = values[order[pos + size]];
            cuts.push((hi + lo) / 2.0);
        }
        pos += size;
    }
    cuts.reverse();

    let scheme = DiscretizationScheme {
        method: Method::EqualFrequency,
        boundaries: cuts,
        centers: None,
        labels: alloc::vec![-1, 0, 1],
    };
    Ok((labels, scheme))
}

/// Outcome of a 1-D k-means fit.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansFit {
    pub labels: Vec<CategoryLabel>,
    pub scheme: DiscretizationScheme,
    /// Within-cluster sum of squares after each assignment pass.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KmeansFit {
    pub fn final_wcss(&self) -> f64 {
        *self.wcss_history.last().expect("at least one iteration")
    }
}

pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_TOL: f64 = 1e-9;

/// Lloyd's algorithm in one dimension with deterministic sorted-quantile
/// initialization: centers start at the (2j+1)/(2k) quantiles of the sorted
/// data. Clusters are relabelled by ascending center; for k = 3 the labels
/// are -1, 0, 1. Scheme boundaries are midpoints between adjacent centers.
pub fn kmeans_1d(values: &[f64], k: usize, max_iter: usize, tol: f64) -> Result<KmeansFit> {
    let n = values.len();
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be >= 1"));
    }
    if n < k {
        return Err(Error::invalid(format!("need at least {k} values, got {n}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value"));
    }
    let mut distinct = values.to_vec();
    distinct.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::degenerate(format!(
            "need at least {k} distinct values, got {}",
            distinct.len()
        )));
    }

    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let mut centers: Vec<f64> = (0..k)
        .map(|j| sorted[(((2 * j + 1) * n) / (2 * k)).min(n - 1)])
        .collect();
    // quantile picks can collide on duplicate-heavy data; fall back to
    // quantiles of the distinct values, which are unique by construction
    let collides = centers.windows(2).any(|w| w[0] == w[1]);
    if collides {
        let m = distinct.len();
        centers = (0..k)
            .map(|j| distinct[(((2 * j + 1) * m) / (2 * k)).min(m - 1)])
            .collect();
    }

    let mut assignment = alloc::vec![0usize; n];
    let mut wcss_history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..max_iter {
        iterations += 1;
        // assignment: nearest center, ties toward the higher index so the
        // rule agrees with boundary application (boundary -> higher label)
        let mut wcss = 0.0;
        for (i, &v) in values.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (j, &c) in centers.iter().enumerate() {
                let d = (v - c) * (v - c);
                if d <= best_d {
                    best_d = d;
                    best = j;
                }
            }
            assignment[i] = best;
            wcss += best_d;
        }
        wcss_history.push(wcss);

        // update: mean of each cluster; empty clusters keep their center
        let mut sums = alloc::vec![0.0; k];
        let mut counts = alloc::vec![0usize; k];
        for (i, &v) in values.iter().enumerate() {
            sums[assignment[i]] += v;
            counts[assignment[i]] += 1;
        }
        let mut max_move = 0.0f64;
        for j in 0..k {
            if counts[j] > 0 {
                let new_center = sums[j] / counts[j] as f64;
                max_move = max_move.max(crate::math::abs(new_center - centers[j]));
                centers[j] = new_center;
            }
        }
        if max_move < tol {
            converged = true;
            break;
        }
    }

    // relabel clusters by ascending center
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centers[a].partial_cmp(&centers[b]).unwrap());
    let mut rank_of = alloc::vec![0usize; k];
    for (rank, &j) in order.iter().enumerate() {
        rank_of[j] = rank;
    }
    let sorted_centers: Vec<f64> = order.iter().map(|&j| centers[j]).collect();
    let scheme_labels: Vec<CategoryLabel> = (0..k)
        .map(|rank| rank as i8 - ((k as i8 - 1) / 2))
        .collect();
    let labels: Vec<CategoryLabel> = assignment
        .iter()
        .map(|&j| scheme_labels[rank_of[j]])
        .collect();
    let boundaries: Vec<f64> = sorted_centers
        .windows(2)
        .map(|w| (w[0] + w[1]) / 2.0)
        .collect();

    Ok(KmeansFit {
        labels,
        scheme: DiscretizationScheme {
            method: Method::Kmeans,
            boundaries,
            centers: Some(sorted_centers),
            labels: scheme_labels,
        },
        wcss_history,
        iterations,
        converged,
    })
}

/// k-means with the default iteration cap and tolerance.
pub fn kmeans_1d_default(values: &[f64], k: usize) -> Result<KmeansFit> {
    kmeans_1d(values, k, KMEANS_MAX_ITER, KMEANS_TOL)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}
