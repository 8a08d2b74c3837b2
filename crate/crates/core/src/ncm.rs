//! Non-conformity measures over a reference set.
//!
//! * KNN: sum of distances to the `k` nearest reference vectors.
//! * LOF: mean ratio of the neighbours' local densities to the query's own,
//!   where the local density is the inverse mean reach-distance and
//!   `reach_dist_k(x, o) = max(d(x, o), d(x, NN_k(x)))`.
//! * LoOP: a probabilistic outlier score in `[0, 1]` built from a half-normal
//!   model of neighbour distances.
//!
//! Queries are either external vectors or members of the reference set. A
//! member never counts as its own neighbour. Neighbour search is an exact
//! linear scan; ties are broken by the lower reference index.

use std::cmp::Ordering;

use crate::embedding::EmbeddedVector;
use crate::error::{Error, Result};
use crate::metric::{fit_metric, whitened_distance, MetricModel};

/// Local density reported when the mean reach-distance is zero.
pub const DENSITY_CAP: f64 = 1e12;

pub const DEFAULT_LOOP_LAMBDA: f64 = 3.0;

/// Proper-training vectors together with the metric fitted on them.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    vectors: Vec<EmbeddedVector>,
    metric: MetricModel,
    // row-major, vectors.len() x dim
    whitened: Vec<f64>,
    dim: usize,
}

impl ReferenceSet {
    /// Fits a shrunk Mahalanobis metric on `vectors`.
    pub fn fit(vectors: Vec<EmbeddedVector>, shrinkage: f64) -> Result<Self> {
        let metric = fit_metric(&vectors, shrinkage)?;
        Self::with_metric(vectors, metric)
    }

    pub fn with_metric(vectors: Vec<EmbeddedVector>, metric: MetricModel) -> Result<Self> {
        let dim = metric.dim();
        let mut whitened = Vec::with_capacity(vectors.len() * dim);
        for v in &vectors {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
            whitened.extend(metric.whiten(v.values()));
        }
        Ok(Self {
            vectors,
            metric,
            whitened,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[EmbeddedVector] {
        &self.vectors
    }

    pub fn metric(&self) -> &MetricModel {
        &self.metric
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.whitened[i * self.dim..(i + 1) * self.dim]
    }

    fn resolve(&self, query: Query<'_>) -> Result<Resolved<'_>> {
        match query {
            Query::Vector(v) => {
                if v.dim() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: v.dim(),
                    });
                }
                Ok(Resolved {
                    point: std::borrow::Cow::Owned(self.metric.whiten(v.values())),
                    exclude: None,
                })
            }
            Query::Member(i) => {
                if i >= self.len() {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        len: self.len(),
                    });
                }
                Ok(Resolved {
                    point: std::borrow::Cow::Borrowed(self.row(i)),
                    exclude: Some(i),
                })
            }
        }
    }

    fn distance_to(&self, q: &Resolved<'_>, i: usize) -> f64 {
        whitened_distance(&q.point, self.row(i))
    }

    fn neighbors(&self, q: &Resolved<'_>, k: usize) -> NeighborList {
        let mut all: Vec<Neighbor> = (0..self.len())
            .filter(|&i| Some(i) != q.exclude)
            .map(|i| Neighbor {
                index: i,
                distance: self.distance_to(q, i),
            })
            .collect();
        if k < all.len() {
            all.select_nth_unstable_by(k - 1, Neighbor::order);
            all.truncate(k);
        }
        all.sort_unstable_by(Neighbor::order);
        NeighborList { entries: all }
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k >= self.len() {
            return Err(Error::KTooLarge {
                k,
                reference_size: self.len(),
            });
        }
        Ok(())
    }
}

/// What is being scored: an outside vector or a reference member.
#[derive(Debug, Clone, Copy)]
pub enum Query<'a> {
    Vector(&'a EmbeddedVector),
    Member(usize),
}

impl<'a> From<&'a EmbeddedVector> for Query<'a> {
    fn from(v: &'a EmbeddedVector) -> Self {
        Query::Vector(v)
    }
}

struct Resolved<'a> {
    point: std::borrow::Cow<'a, [f64]>,
    exclude: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

impl Neighbor {
    fn order(a: &Neighbor, b: &Neighbor) -> Ordering {
        a.distance
            .total_cmp(&b.distance)
            .then(a.index.cmp(&b.index))
    }
}

/// The `k` nearest reference vectors, ascending by distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    entries: Vec<Neighbor>,
}

impl NeighborList {
    pub fn entries(&self) -> &[Neighbor] {
        &self.entries
    }

    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|n| n.index)
    }

    /// Distance to the k-th (farthest) neighbour.
    pub fn k_distance(&self) -> f64 {
        self.entries.last().map_or(0.0, |n| n.distance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NcmKind {
    Knn { k: usize },
    Lof { k: usize },
    Loop { k: usize, lambda: f64 },
}

impl NcmKind {
    pub fn k(&self) -> usize {
        match *self {
            NcmKind::Knn { k } | NcmKind::Lof { k } | NcmKind::Loop { k, .. } => k,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NcmKind::Knn { .. } => "knn",
            NcmKind::Lof { .. } => "lof",
            NcmKind::Loop { .. } => "loop",
        }
    }

    fn validate(&self, reference_size: usize) -> Result<()> {
        let k = self.k();
        if k == 0 || k >= reference_size {
            return Err(Error::KTooLarge { k, reference_size });
        }
        if let NcmKind::Loop { lambda, .. } = *self {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(Error::InvalidLambda(lambda));
            }
        }
        Ok(())
    }
}

pub fn k_nearest<'a>(
    query: impl Into<Query<'a>>,
    reference: &ReferenceSet,
    k: usize,
) -> Result<NeighborList> {
    reference.check_k(k)?;
    let q = reference.resolve(query.into())?;
    Ok(reference.neighbors(&q, k))
}

pub fn knn_ncm<'a>(query: impl Into<Query<'a>>, reference: &ReferenceSet, k: usize) -> Result<f64> {
    let nn = k_nearest(query, reference, k)?;
    Ok(nn.entries.iter().map(|n| n.distance).sum())
}

/// `max(d(x, o), d(x, NN_k(x)))` for reference member `o`.
pub fn reach_dist<'a>(
    query: impl Into<Query<'a>>,
    o: usize,
    k: usize,
    reference: &ReferenceSet,
) -> Result<f64> {
    reference.check_k(k)?;
    let q = reference.resolve(query.into())?;
    if o >= reference.len() {
        return Err(Error::IndexOutOfRange {
            index: o,
            len: reference.len(),
        });
    }
    let nn = reference.neighbors(&q, k);
    Ok(reference.distance_to(&q, o).max(nn.k_distance()))
}

fn density_from(nn: &NeighborList, pair_distance: impl Fn(usize) -> f64) -> f64 {
    let kd = nn.k_distance();
    let mean_reach = nn.indices().map(|o| pair_distance(o).max(kd)).sum::<f64>() / nn.k() as f64;
    if mean_reach > 0.0 {
        1.0 / mean_reach
    } else {
        DENSITY_CAP
    }
}

fn resolved_density(reference: &ReferenceSet, q: &Resolved<'_>, k: usize) -> f64 {
    let nn = reference.neighbors(q, k);
    density_from(&nn, |o| reference.distance_to(q, o))
}

fn member_density(reference: &ReferenceSet, i: usize, k: usize) -> f64 {
    let q = Resolved {
        point: std::borrow::Cow::Borrowed(reference.row(i)),
        exclude: Some(i),
    };
    resolved_density(reference, &q, k)
}

/// Inverse mean reach-distance to the `k` nearest neighbours.
pub fn local_density<'a>(
    query: impl Into<Query<'a>>,
    reference: &ReferenceSet,
    k: usize,
) -> Result<f64> {
    reference.check_k(k)?;
    let q = reference.resolve(query.into())?;
    Ok(resolved_density(reference, &q, k))
}

fn lof_with(
    reference: &ReferenceSet,
    q: &Resolved<'_>,
    k: usize,
    density_of: impl Fn(usize) -> f64,
) -> f64 {
    let nn = reference.neighbors(q, k);
    let own = density_from(&nn, |o| reference.distance_to(q, o));
    nn.indices().map(|o| density_of(o) / own).sum::<f64>() / k as f64
}

/// Local outlier factor of the query against `reference`.
pub fn lof_ncm<'a>(query: impl Into<Query<'a>>, reference: &ReferenceSet, k: usize) -> Result<f64> {
    reference.check_k(k)?;
    let q = reference.resolve(query.into())?;
    Ok(lof_with(reference, &q, k, |o| {
        member_density(reference, o, k)
    }))
}

/// `num / den`, with `0 / 0 = 1` and `x / 0` capped.
fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        DENSITY_CAP
    } else {
        1.0
    }
}

/// Standard distance to the neighbour set, scaled by `lambda`.
fn probabilistic_distance(nn: &NeighborList, lambda: f64) -> f64 {
    let mean_sq = nn
        .entries
        .iter()
        .map(|n| n.distance * n.distance)
        .sum::<f64>()
        / nn.k() as f64;
    lambda * mean_sq.sqrt()
}

#[derive(Debug, Clone)]
struct LoopStats {
    pdist: Vec<f64>,
    nplof: f64,
}

impl LoopStats {
    fn fit(reference: &ReferenceSet, k: usize, lambda: f64) -> Self {
        let neighbor_lists: Vec<NeighborList> = (0..reference.len())
            .map(|i| {
                let q = Resolved {
                    point: std::borrow::Cow::Borrowed(reference.row(i)),
                    exclude: Some(i),
                };
                reference.neighbors(&q, k)
            })
            .collect();
        let pdist: Vec<f64> = neighbor_lists
            .iter()
            .map(|nn| probabilistic_distance(nn, lambda))
            .collect();
        let mean_plof_sq = neighbor_lists
            .iter()
            .zip(&pdist)
            .map(|(nn, &pd)| {
                let plof = plof(nn, pd, &pdist);
                plof * plof
            })
            .sum::<f64>()
            / reference.len() as f64;
        Self {
            nplof: lambda * mean_plof_sq.sqrt(),
            pdist,
        }
    }

    fn score(&self, reference: &ReferenceSet, q: &Resolved<'_>, k: usize, lambda: f64) -> f64 {
        let nn = reference.neighbors(q, k);
        let plof = plof(&nn, probabilistic_distance(&nn, lambda), &self.pdist);
        outlier_probability(plof, self.nplof)
    }
}

fn plof(nn: &NeighborList, pdist: f64, all: &[f64]) -> f64 {
    let expected = nn.indices().map(|o| all[o]).sum::<f64>() / nn.k() as f64;
    ratio(pdist, expected) - 1.0
}

fn outlier_probability(plof: f64, nplof: f64) -> f64 {
    if nplof > 0.0 {
        libm::erf(plof / (nplof * std::f64::consts::SQRT_2)).max(0.0)
    } else if plof > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Local outlier probability of the query against `reference`.
///
/// The aggregate deviation `nPLOF` is taken over the reference members.
pub fn loop_score<'a>(
    query: impl Into<Query<'a>>,
    reference: &ReferenceSet,
    k: usize,
    lambda: f64,
) -> Result<f64> {
    NcmKind::Loop { k, lambda }.validate(reference.len())?;
    let q = reference.resolve(query.into())?;
    let stats = LoopStats::fit(reference, k, lambda);
    Ok(stats.score(reference, &q, k, lambda))
}

#[derive(Debug, Clone)]
enum Stats {
    Knn,
    Lof { density: Vec<f64> },
    Loop(LoopStats),
}

/// A non-conformity measure with all reference-side quantities precomputed,
/// ready to score many queries.
#[derive(Debug, Clone)]
pub struct FittedNcm {
    reference: ReferenceSet,
    kind: NcmKind,
    stats: Stats,
}

impl FittedNcm {
    pub fn fit(reference: ReferenceSet, kind: NcmKind) -> Result<Self> {
        kind.validate(reference.len())?;
        let stats = match kind {
            NcmKind::Knn { .. } => Stats::Knn,
            NcmKind::Lof { k } => Stats::Lof {
                density: (0..reference.len())
                    .map(|i| member_density(&reference, i, k))
                    .collect(),
            },
            NcmKind::Loop { k, lambda } => Stats::Loop(LoopStats::fit(&reference, k, lambda)),
        };
        Ok(Self {
            reference,
            kind,
            stats,
        })
    }

    pub fn reference(&self) -> &ReferenceSet {
        &self.reference
    }

    pub fn kind(&self) -> NcmKind {
        self.kind
    }

    pub fn score<'a>(&self, query: impl Into<Query<'a>>) -> Result<f64> {
        let q = self.reference.resolve(query.into())?;
        let k = self.kind.k();
        Ok(match (&self.stats, self.kind) {
            (Stats::Knn, _) => self
                .reference
                .neighbors(&q, k)
                .entries
                .iter()
                .map(|n| n.distance)
                .sum(),
            (Stats::Lof { density }, _) => lof_with(&self.reference, &q, k, |o| density[o]),
            (Stats::Loop(stats), NcmKind::Loop { lambda, .. }) => {
                stats.score(&self.reference, &q, k, lambda)
            }
            (Stats::Loop(_), _) => unreachable!("loop stats imply a loop kind"),
        })
    }
}
