//! Distances between discrete distributions and goodness-of-fit tests.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::Serialize;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

use crate::dd::Value;
use crate::error::{Error, Result};

/// A normalized distribution over ordered outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<K: Ord> {
    probs: BTreeMap<K, f64>,
}

impl<K: Ord + Clone> Distribution<K> {
    /// Normalizes nonnegative masses; zero-mass outcomes stay in the support.
    pub fn from_masses(masses: impl IntoIterator<Item = (K, f64)>) -> Self {
        let mut probs: BTreeMap<K, f64> = BTreeMap::new();
        for (k, m) in masses {
            *probs.entry(k).or_insert(0.0) += m;
        }
        let total: f64 = probs.values().sum();
        if total > 0.0 {
            probs.values_mut().for_each(|p| *p /= total);
        }
        Distribution { probs }
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (K, u64)>) -> Self {
        Self::from_masses(counts.into_iter().map(|(k, c)| (k, c as f64)))
    }

    pub fn from_exact<'a>(probs: impl IntoIterator<Item = (K, &'a Value)>) -> Self {
        Self::from_masses(probs.into_iter().map(|(k, v)| (k, v.to_f64().unwrap_or(f64::NAN))))
    }

    pub fn uniform(outcomes: impl IntoIterator<Item = K>) -> Self {
        Self::from_masses(outcomes.into_iter().map(|k| (k, 1.0)))
    }

    pub fn prob(&self, k: &K) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = &K> {
        self.probs.keys()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.probs.iter().map(|(k, p)| (k, *p))
    }
}

fn union<'a, K: Ord + Clone>(p: &'a Distribution<K>, q: &'a Distribution<K>) -> Vec<(f64, f64)> {
    let mut keys: Vec<&K> = p.support().chain(q.support()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter().map(|k| (p.prob(k), q.prob(k))).collect()
}

/// Jensen-Shannon divergence in bits, within `[0, 1]`.
pub fn js_divergence<K: Ord + Clone>(p: &Distribution<K>, q: &Distribution<K>) -> f64 {
    let kl = |a: f64, m: f64| if a > 0.0 { a * (a / m).log2() } else { 0.0 };
    let d: f64 = union(p, q)
        .into_iter()
        .map(|(a, b)| {
            let m = 0.5 * (a + b);
            0.5 * (kl(a, m) + kl(b, m))
        })
        .sum();
    d.clamp(0.0, 1.0)
}

/// Square root of the base-2 Jensen-Shannon divergence.
pub fn js_distance<K: Ord + Clone>(p: &Distribution<K>, q: &Distribution<K>) -> f64 {
    js_divergence(p, q).sqrt()
}

pub fn tv_distance<K: Ord + Clone>(p: &Distribution<K>, q: &Distribution<K>) -> f64 {
    let d: f64 = union(p, q).into_iter().map(|(a, b)| (a - b).abs()).sum();
    (0.5 * d).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of observed counts against `expected`. Every
/// observed outcome must lie in the support of `expected`.
pub fn chi_square<K: Ord + Clone>(observed: &BTreeMap<K, u64>, expected: &Distribution<K>) -> Result<ChiSquare> {
    let n: u64 = observed.values().sum();
    if observed.iter().any(|(k, &c)| c > 0 && expected.prob(k) <= 0.0) {
        return Err(Error::Invalid("observed outcome outside the expected support".into()));
    }
    let cells: Vec<f64> = expected.iter().filter(|(_, p)| *p > 0.0).map(|(_, p)| p).collect();
    if cells.len() < 2 || n == 0 {
        return Ok(ChiSquare {
            statistic: 0.0,
            df: cells.len().saturating_sub(1),
            p_value: 1.0,
        });
    }
    let statistic: f64 = expected
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|(k, p)| {
            let e = p * n as f64;
            let o = observed.get(k).copied().unwrap_or(0) as f64;
            (o - e) * (o - e) / e
        })
        .sum();
    let df = cells.len() - 1;
    let p_value = ChiSquared::new(df as f64).expect("positive df").sf(statistic);
    Ok(ChiSquare { statistic, df, p_value })
}

/// `y -> number of outcomes seen exactly y times`. Pass zero counts for
/// outcomes that never occurred to include them.
pub fn frequency_of_frequencies(counts: impl IntoIterator<Item = u64>) -> BTreeMap<u64, u64> {
    let mut hist = BTreeMap::new();
    for c in counts {
        *hist.entry(c).or_insert(0) += 1;
    }
    hist
}

/// The frequency-of-frequencies histogram an ideal uniform sampler gives in
/// expectation: with `outcomes` equally likely outcomes and `samples` draws,
/// the share of outcomes seen `y` times is the Binomial(samples, 1/outcomes)
/// mass at `y`. The far tail is dropped and the rest renormalized.
pub fn uniform_frequency_histogram(samples: u64, outcomes: u64) -> Distribution<u64> {
    let p = 1.0 / outcomes as f64;
    let b = Binomial::new(p, samples).expect("valid binomial");
    let mean = samples as f64 * p;
    let sd = (mean * (1.0 - p)).sqrt();
    let top = ((mean + 30.0 * sd + 30.0).ceil() as u64).min(samples);
    Distribution::from_masses((0..=top).map(|y| (y, b.pmf(y))))
}
