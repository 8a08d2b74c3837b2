//! Brute-force oracles shared by the oracle tests and the acceptance runner.
//!
//! Every oracle works from the precision matrix and the explicit quadratic
//! form, sorts the full distance list, and uses its own `erf`, so it shares
//! no code path with the library beyond the fitted precision.

#![allow(dead_code)]

use icad_core::ncm::DENSITY_CAP;
use icad_core::{embed_values, EmbeddedVector, FittedNcm, NcmKind, Query, ReferenceSet};
use icad_core::{k_nearest, knn_ncm, lof_ncm, loop_score};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Oracle {
    pub points: Vec<Vec<f64>>,
    precision: Vec<Vec<f64>>,
}

impl Oracle {
    pub fn new(
        vectors: &[EmbeddedVector],
        dim: usize,
        precision: impl Fn(usize, usize) -> f64,
    ) -> Self {
        Self {
            points: vectors.iter().map(|v| v.values().to_vec()).collect(),
            precision: (0..dim)
                .map(|i| (0..dim).map(|j| precision(i, j)).collect())
                .collect(),
        }
    }

    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let mut q = 0.0;
        for (i, row) in self.precision.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                q += d[i] * p * d[j];
            }
        }
        q.max(0.0).sqrt()
    }

    /// Full sort by (distance, index), then truncate.
    pub fn neighbors(&self, q: &[f64], exclude: Option<usize>, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, p)| (i, self.dist(q, p)))
            .collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    pub fn knn(&self, q: &[f64], exclude: Option<usize>, k: usize) -> f64 {
        self.neighbors(q, exclude, k).iter().map(|n| n.1).sum()
    }

    pub fn density(&self, q: &[f64], exclude: Option<usize>, k: usize) -> f64 {
        let nn = self.neighbors(q, exclude, k);
        let kdist = nn[k - 1].1;
        let mean: f64 = nn
            .iter()
            .map(|&(o, _)| self.dist(q, &self.points[o]).max(kdist))
            .sum::<f64>()
            / k as f64;
        if mean == 0.0 {
            DENSITY_CAP
        } else {
            1.0 / mean
        }
    }

    pub fn lof(&self, q: &[f64], exclude: Option<usize>, k: usize) -> f64 {
        let own = self.density(q, exclude, k);
        self.neighbors(q, exclude, k)
            .iter()
            .map(|&(o, _)| self.density(&self.points[o], Some(o), k) / own)
            .sum::<f64>()
            / k as f64
    }

    pub fn pdist(&self, q: &[f64], exclude: Option<usize>, k: usize, lambda: f64) -> f64 {
        let nn = self.neighbors(q, exclude, k);
        lambda * (nn.iter().map(|n| n.1 * n.1).sum::<f64>() / k as f64).sqrt()
    }

    pub fn plof(&self, q: &[f64], exclude: Option<usize>, k: usize, lambda: f64) -> f64 {
        let own = self.pdist(q, exclude, k, lambda);
        let expected = self
            .neighbors(q, exclude, k)
            .iter()
            .map(|&(o, _)| self.pdist(&self.points[o], Some(o), k, lambda))
            .sum::<f64>()
            / k as f64;
        let ratio = match (own > 0.0, expected > 0.0) {
            (_, true) => own / expected,
            (true, false) => DENSITY_CAP,
            (false, false) => 1.0,
        };
        ratio - 1.0
    }

    pub fn loop_score(&self, q: &[f64], exclude: Option<usize>, k: usize, lambda: f64) -> f64 {
        let n = self.points.len();
        let mean_sq = (0..n)
            .map(|i| self.plof(&self.points[i], Some(i), k, lambda).powi(2))
            .sum::<f64>()
            / n as f64;
        let nplof = lambda * mean_sq.sqrt();
        let plof = self.plof(q, exclude, k, lambda);
        if nplof == 0.0 {
            return if plof > 0.0 { 1.0 } else { 0.0 };
        }
        erf_simpson(plof / (nplof * std::f64::consts::SQRT_2)).max(0.0)
    }
}

/// `2/sqrt(pi) * integral of exp(-t^2)` by composite Simpson's rule.
pub fn erf_simpson(x: f64) -> f64 {
    if x.abs() > 6.0 {
        return x.signum();
    }
    let n = 4000;
    let h = x / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(0.0) + f(x);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub struct Case {
    pub vectors: Vec<EmbeddedVector>,
    pub queries: Vec<EmbeddedVector>,
    pub k: usize,
    pub shrinkage: f64,
    pub lambda: f64,
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let dim = rng.random_range(2..=8usize);
    let n = rng.random_range((dim + 2).max(5)..=50usize);
    let k = rng.random_range(1..=(n - 1).min(10));
    let mut vectors = if rng.random_bool(0.5) {
        // lagged windows of a random walk
        let mut x = 0.0;
        let values: Vec<f64> = (0..n + dim - 1)
            .map(|_| {
                x += gaussian(rng);
                x
            })
            .collect();
        embed_values(&values, dim).unwrap().into_columns()
    } else {
        let scale: Vec<f64> = (0..dim)
            .map(|_| 10f64.powf(rng.random_range(-1.0..1.0)))
            .collect();
        (0..n)
            .map(|_| EmbeddedVector::from_values(scale.iter().map(|s| s * gaussian(rng)).collect()))
            .collect()
    };
    if rng.random_bool(0.2) {
        // coincident members exercise the zero-distance rules
        let copies = rng.random_range(1..=k.min(n / 2));
        for c in 0..copies {
            vectors[n - 1 - c] = vectors[0].clone();
        }
    }
    let mut queries: Vec<EmbeddedVector> = (0..3)
        .map(|_| EmbeddedVector::from_values((0..dim).map(|_| 2.0 * gaussian(rng)).collect()))
        .collect();
    queries.push(EmbeddedVector::from_values(
        vectors[0].values().iter().map(|v| v + 25.0).collect(),
    ));
    queries.push(vectors[0].clone());
    Case {
        vectors,
        queries,
        k,
        shrinkage: rng.random_range(0.05..=1.0),
        lambda: rng.random_range(1.0..4.0),
    }
}

/// Runs `count` random configurations from `seed` and compares every
/// library score with its oracle. Returns the number of queries checked.
pub fn check_configurations(seed: u64, count: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for case_no in 0..count {
        let c = random_case(&mut rng);
        let reference =
            ReferenceSet::fit(c.vectors.clone(), c.shrinkage).map_err(|e| e.to_string())?;
        let dim = reference.dim();
        let precision = reference.metric().precision();
        let oracle = Oracle::new(&c.vectors, dim, |i, j| precision[(i, j)]);
        let lof = FittedNcm::fit(reference.clone(), NcmKind::Lof { k: c.k })
            .map_err(|e| e.to_string())?;
        let lop = FittedNcm::fit(
            reference.clone(),
            NcmKind::Loop {
                k: c.k,
                lambda: c.lambda,
            },
        )
        .map_err(|e| e.to_string())?;

        let mut targets: Vec<(Query, Vec<f64>, Option<usize>)> = (0..c.vectors.len())
            .map(|i| (Query::Member(i), c.vectors[i].values().to_vec(), Some(i)))
            .collect();
        targets.extend(
            c.queries
                .iter()
                .map(|q| (Query::Vector(q), q.values().to_vec(), None)),
        );

        for (query, point, exclude) in targets {
            let ctx = || format!("case {case_no}, query {exclude:?} {point:?}, k {}", c.k);
            let fail =
                |what: &str, got: f64, want: f64| Err(format!("{what} {got} vs {want}: {}", ctx()));

            let nn = k_nearest(query, &reference, c.k).map_err(|e| e.to_string())?;
            let got: Vec<usize> = nn.indices().collect();
            let want: Vec<usize> = oracle
                .neighbors(&point, exclude, c.k)
                .iter()
                .map(|n| n.0)
                .collect();
            if got != want {
                return Err(format!("neighbours {got:?} vs {want:?}: {}", ctx()));
            }

            let got = knn_ncm(query, &reference, c.k).map_err(|e| e.to_string())?;
            let want = oracle.knn(&point, exclude, c.k);
            if !rel_close(got, want, 1e-9) {
                return fail("knn", got, want);
            }

            let got = lof_ncm(query, &reference, c.k).map_err(|e| e.to_string())?;
            let want = oracle.lof(&point, exclude, c.k);
            if !rel_close(got, want, 1e-9) {
                return fail("lof", got, want);
            }
            let fitted = lof.score(query).map_err(|e| e.to_string())?;
            if fitted != got {
                return fail("fitted lof", fitted, got);
            }

            let got = loop_score(query, &reference, c.k, c.lambda).map_err(|e| e.to_string())?;
            let want = oracle.loop_score(&point, exclude, c.k, c.lambda);
            if !rel_close(got, want, 1e-9) {
                return fail("loop", got, want);
            }
            let fitted = lop.score(query).map_err(|e| e.to_string())?;
            if fitted != got {
                return fail("fitted loop", fitted, got);
            }
            checked += 1;
        }
    }
    Ok(checked)
}
