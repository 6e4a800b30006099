//! Weighted categorical distributions and conditional distribution tables.
//!
//! These are the sampling substrate for persona attributes and scenario
//! elements: ordered category/probability lists with load-time
//! normalization, filter-induced renormalization, and inverse-CDF draws
//! that are deterministic per seed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Prng;

/// Raw probability sums may deviate from one by at most this much before a
/// normalization warning is emitted.
pub const SUM_WARN_TOLERANCE: f64 = 1e-6;

/// An ordered list of `(category, probability)` entries.
///
/// Entry order is part of the distribution's identity: inverse-CDF sampling
/// walks entries in order, so a fixed order plus a fixed seed yields a fixed
/// draw sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDistribution {
    /// Identifier used in diagnostics (e.g. `age`, `scenario.activity`).
    #[serde(default)]
    pub name: String,
    /// `(category, probability)` pairs in sampling order.
    pub entries: Vec<(String, f64)>,
}

impl CategoricalDistribution {
    /// Build a distribution from `(label, probability)` pairs.
    pub fn new(name: impl Into<String>, entries: Vec<(&str, f64)>) -> Self {
        Self {
            name: name.into(),
            entries: entries
                .into_iter()
                .map(|(label, p)| (label.to_string(), p))
                .collect(),
        }
    }

    /// Category labels in entry order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(label, _)| label.as_str())
    }

    /// Whether `label` is one of this distribution's categories.
    pub fn contains(&self, label: &str) -> bool {
        self.labels().any(|l| l == label)
    }

    /// Total raw probability mass.
    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// Structural problems with this distribution, each phrased for a
    /// validation report. Empty means valid (prior to normalization).
    pub fn problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.entries.is_empty() {
            problems.push(format!("distribution `{}` has no entries", self.name));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (label, p) in &self.entries {
            if label.is_empty() {
                problems.push(format!(
                    "distribution `{}` has an empty category label",
                    self.name
                ));
            }
            if !seen.insert(label.as_str()) {
                problems.push(format!(
                    "distribution `{}` repeats the category `{label}`",
                    self.name
                ));
            }
            if !p.is_finite() || *p < 0.0 {
                problems.push(format!(
                    "distribution `{}` has an invalid probability {p} for `{label}`",
                    self.name
                ));
            }
        }
        if self.entries.iter().all(|(_, p)| *p <= 0.0) && !self.entries.is_empty() {
            problems.push(format!(
                "distribution `{}` has no positive probability mass",
                self.name
            ));
        }
        problems
    }

    /// Normalize probabilities to sum to one when the raw sum deviates
    /// from one by more than [`SUM_WARN_TOLERANCE`], returning the
    /// deviation. Callers warn when the deviation exceeds the tolerance.
    pub fn normalize(&mut self) -> f64 {
        let mass = self.mass();
        let deviation = (mass - 1.0).abs();
        // Rescaling within the tolerance would only shuffle last-ulp noise,
        // and skipping it makes loading a fixed point: a saved normalized
        // config reloads to exactly the same probabilities.
        if mass > 0.0 && deviation > SUM_WARN_TOLERANCE {
            for (_, p) in &mut self.entries {
                *p /= mass;
            }
        }
        deviation
    }

    /// A copy of this distribution restricted to categories accepted by
    /// `allow`, renormalized over the remaining mass.
    ///
    /// Fails with [`Error::InfeasibleConstraints`] when no positive mass
    /// survives the restriction.
    pub fn restricted(&self, allow: impl Fn(&str) -> bool) -> Result<CategoricalDistribution> {
        let entries: Vec<(String, f64)> = self
            .entries
            .iter()
            .filter(|(label, _)| allow(label))
            .cloned()
            .collect();
        let mass: f64 = entries.iter().map(|(_, p)| p).sum();
        if entries.is_empty() || mass <= 0.0 {
            return Err(Error::InfeasibleConstraints {
                attribute: self.name.clone(),
                detail: "restriction removed all probability mass".into(),
            });
        }
        Ok(CategoricalDistribution {
            name: self.name.clone(),
            entries: entries
                .into_iter()
                .map(|(label, p)| (label, p / mass))
                .collect(),
        })
    }
}

/// Resolve a uniform draw `u ∈ [0,1)` to a category by inverse CDF.
///
/// Separated from [`sample_categorical`] so the cumulative-bound arithmetic
/// is testable against hand-traced uniforms.
pub fn pick_by_cdf<'a>(dist: &'a CategoricalDistribution, u: f64) -> Result<&'a str> {
    let mut cumulative = 0.0;
    let mut last_positive: Option<&str> = None;
    for (label, p) in &dist.entries {
        if *p > 0.0 {
            cumulative += p;
            last_positive = Some(label);
            if u < cumulative {
                return Ok(label);
            }
        }
    }
    // Floating-point fallthrough: a normalized distribution can accumulate
    // to slightly below 1.0; the draw then belongs to the final bucket.
    last_positive.ok_or_else(|| Error::EmptyDistribution {
        name: dist.name.clone(),
    })
}

/// Draw one category from `dist` using inverse-CDF sampling.
pub fn sample_categorical<'a>(
    dist: &'a CategoricalDistribution,
    rng: &mut Prng,
) -> Result<&'a str> {
    let u: f64 = rng.gen();
    pick_by_cdf(dist, u)
}

/// A background attribute's distribution, conditioned on a base attribute.
///
/// `rows` maps condition values (e.g. an age bracket) to distributions; the
/// `default` row is used when the condition value has no matching row. A
/// flat (unconditional) attribute is expressed as an empty `rows` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDistributionTable {
    /// The attribute this table samples (e.g. `education`).
    #[serde(default)]
    pub attribute: String,
    /// The conditioning attribute (e.g. `age`).
    pub condition_key: String,
    /// `(condition value, distribution)` rows, checked in order.
    #[serde(default)]
    pub rows: Vec<(String, CategoricalDistribution)>,
    /// Fallback distribution when no row matches.
    pub default: CategoricalDistribution,
}

impl ConditionalDistributionTable {
    /// The distribution to sample for a given condition value.
    pub fn row_for(&self, condition_value: &str) -> &CategoricalDistribution {
        self.rows
            .iter()
            .find(|(value, _)| value == condition_value)
            .map(|(_, dist)| dist)
            .unwrap_or(&self.default)
    }

    /// Structural problems across all rows and the default.
    pub fn problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (value, dist) in &self.rows {
            if !seen.insert(value.as_str()) {
                problems.push(format!(
                    "table `{}` repeats the condition value `{value}`",
                    self.attribute
                ));
            }
            problems.extend(dist.problems());
        }
        problems.extend(self.default.problems());
        problems
    }

    /// Normalize every row and the default; returns the largest deviation
    /// of any raw sum from one.
    pub fn normalize(&mut self) -> f64 {
        let mut worst: f64 = 0.0;
        for (_, dist) in &mut self.rows {
            worst = worst.max(dist.normalize());
        }
        worst.max(self.default.normalize())
    }
}
