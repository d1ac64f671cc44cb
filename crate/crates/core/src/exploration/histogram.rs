//! Histograms over a node population and drill-down into one bucket.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ExplorationError, Result};
use crate::graph::{Graph, NodeId, Predicate, PropertyValue, ValueType};
use crate::par::Exec;
use crate::text::fnv1a64;

/// Number of equal-width bins for real-valued attributes.
pub const REAL_BINS: usize = 10;
/// Sample ids kept per bucket.
pub const SAMPLE_IDS: usize = 10;

/// A histogram bucket key: an exact value, a real interval, or "∅" for
/// nodes lacking the attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketKey {
    Value(PropertyValue),
    /// `lo <= v < hi`, or `lo <= v <= hi` when `closed` (the last bin).
    Range { lo: f64, hi: f64, closed: bool },
    #[serde(rename = "∅")]
    Missing,
}

impl BucketKey {
    pub fn predicate(&self, attribute: &str) -> Predicate {
        let attribute = attribute.to_string();
        match self {
            BucketKey::Value(value) => Predicate::Eq {
                attribute,
                value: value.clone(),
            },
            BucketKey::Range { lo, hi, closed } => Predicate::Range {
                attribute,
                lo: *lo,
                hi: *hi,
                closed: *closed,
            },
            BucketKey::Missing => Predicate::Missing { attribute },
        }
    }

    fn rank(&self) -> (u8, Option<&PropertyValue>, f64) {
        match self {
            BucketKey::Value(v) => (0, Some(v), 0.0),
            BucketKey::Range { lo, .. } => (1, None, *lo),
            BucketKey::Missing => (2, None, 0.0),
        }
    }
}

impl Eq for BucketKey {}

impl PartialOrd for BucketKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Values ascending, then ranges by lower bound, then "∅".
impl Ord for BucketKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let (ra, va, la) = self.rank();
        let (rb, vb, lb) = other.rank();
        ra.cmp(&rb).then_with(|| va.cmp(&vb)).then_with(|| la.total_cmp(&lb))
    }
}

impl fmt::Display for BucketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BucketKey::Value(v) => f.write_str(&v.display_text()),
            BucketKey::Range { lo, hi, closed: false } => write!(f, "[{lo}, {hi})"),
            BucketKey::Range { lo, hi, closed: true } => write!(f, "[{lo}, {hi}]"),
            BucketKey::Missing => f.write_str("∅"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub key: BucketKey,
    /// Display form of the key.
    pub label: String,
    pub count: usize,
    /// Up to [`SAMPLE_IDS`] member ids, ascending.
    pub sample_ids: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub attribute: String,
    pub total: usize,
    pub buckets: Vec<HistogramBucket>,
    /// Fingerprint of the population the histogram was computed over.
    pub population_digest: String,
}

/// Order-insensitive fingerprint of a node set.
pub fn population_digest(population: &[NodeId]) -> String {
    let mut ids = population.to_vec();
    ids.sort();
    ids.dedup();
    let mut bytes = Vec::with_capacity(ids.len() * 16);
    for id in &ids {
        bytes.extend_from_slice(id.as_bytes());
    }
    format!("{:016x}-{}", fnv1a64(&bytes), ids.len())
}

/// Equal-width edges over `[min, max]`; `None` when all values coincide
/// or the span is not finite.
fn real_edges(min: f64, max: f64) -> Option<Vec<f64>> {
    let width = (max - min) / REAL_BINS as f64;
    if !(width.is_finite() && width > 0.0) {
        return None;
    }
    let mut edges: Vec<f64> = (0..REAL_BINS).map(|i| min + i as f64 * width).collect();
    edges.push(max);
    edges.windows(2).all(|w| w[0] < w[1]).then_some(edges)
}

fn real_key(v: f64, edges: &Option<Vec<f64>>, min: f64, max: f64) -> BucketKey {
    let Some(edges) = edges else {
        return BucketKey::Range {
            lo: min,
            hi: max,
            closed: true,
        };
    };
    // largest i with edges[i] <= v, capped to the last bin
    let i = edges.partition_point(|e| *e <= v).saturating_sub(1).min(REAL_BINS - 1);
    BucketKey::Range {
        lo: edges[i],
        hi: edges[i + 1],
        closed: i == REAL_BINS - 1,
    }
}

/// Buckets `population` by `attribute`: exact values for non-real types,
/// [`REAL_BINS`] equal-width bins for reals, "∅" for missing values.
/// Only non-empty buckets are returned, ascending by key.
pub fn attribute_histogram(graph: &Graph, population: &[NodeId], attribute: &str, exec: Exec) -> Histogram {
    let mut ids = population.to_vec();
    ids.sort();
    ids.dedup();
    let values: Vec<Option<&PropertyValue>> =
        exec.map(&ids, |id| graph.node(*id).and_then(|n| n.property(attribute)));
    let is_real = values.iter().flatten().any(|v| v.value_type() == ValueType::Real);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    if is_real {
        for r in values.iter().flatten().filter_map(|v| v.as_real()) {
            min = min.min(r);
            max = max.max(r);
        }
    }
    let edges = if is_real { real_edges(min, max) } else { None };
    let key_of = |v: Option<&PropertyValue>| match v {
        None => BucketKey::Missing,
        Some(v) if is_real => match v.as_real() {
            Some(r) => real_key(r, &edges, min, max),
            None => BucketKey::Value(v.clone()),
        },
        Some(v) => BucketKey::Value(v.clone()),
    };
    let pairs: Vec<(NodeId, Option<&PropertyValue>)> = ids.iter().copied().zip(values).collect();
    let groups = exec.fold_reduce(
        &pairs,
        BTreeMap::<BucketKey, (usize, Vec<NodeId>)>::new,
        |mut acc, (id, v)| {
            let slot = acc.entry(key_of(*v)).or_default();
            slot.0 += 1;
            slot.1.push(*id);
            slot.1.sort();
            slot.1.truncate(SAMPLE_IDS);
            acc
        },
        |mut a, b| {
            for (k, (count, samples)) in b {
                let slot = a.entry(k).or_default();
                slot.0 += count;
                slot.1.extend(samples);
                slot.1.sort();
                slot.1.truncate(SAMPLE_IDS);
            }
            a
        },
    );
    Histogram {
        attribute: attribute.to_string(),
        total: ids.len(),
        buckets: groups
            .into_iter()
            .map(|(key, (count, sample_ids))| HistogramBucket {
                label: key.to_string(),
                key,
                count,
                sample_ids,
            })
            .collect(),
        population_digest: population_digest(&ids),
    }
}

/// Members of `population` in the bucket `key` of `histogram`, ascending.
///
/// Fails with `StaleBucket` when `population` is not the one the histogram
/// was computed over, or the key is not one of its buckets.
pub fn filter_by_bucket(
    graph: &Graph,
    population: &[NodeId],
    histogram: &Histogram,
    key: &BucketKey,
) -> Result<Vec<NodeId>> {
    if population_digest(population) != histogram.population_digest {
        return Err(ExplorationError::StaleBucket("the population changed since the histogram".into()));
    }
    if !histogram.buckets.iter().any(|b| &b.key == key) {
        return Err(ExplorationError::StaleBucket(format!("no bucket {key} in the histogram")));
    }
    let predicate = key.predicate(&histogram.attribute);
    let mut out: Vec<NodeId> = population
        .iter()
        .copied()
        .filter(|id| graph.node(*id).is_some_and(|n| predicate.matches(n)))
        .collect();
    out.sort();
    out.dedup();
    Ok(out)
}
