//! Balanced k-means zoning, per-zone PCA whitening and linear trend removal.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cluster memberships and centroids.
#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.k()];
        for &c in &self.assignment {
            out[c] += 1;
        }
        out
    }

    /// Within-cluster sum of squared distances to the centroids.
    pub fn sse(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .map(|(p, &c)| sq_dist(p, &self.centroids[c]))
            .sum()
    }
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

fn recompute_centroids(points: &[Vec<f64>], assignment: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    (sums, counts)
}

fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[next].clone());
        let c = centroids.last().unwrap();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centroids
}

fn validate_points(points: &[Vec<f64>], k: usize) -> Result<()> {
    if k == 0 || k > points.len() {
        return Err(Error::EmptyClusterUnrecoverable { k, n: points.len() });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: p.len(),
        });
    }
    Ok(())
}

/// Plain Lloyd's k-means with k-means++ seeding.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    validate_points(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp(points, k, &mut rng);
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (a, p) in assignment.iter_mut().zip(points) {
            let j = nearest(p, &centroids);
            changed |= *a != j;
            *a = j;
        }
        let (mut next, counts) = recompute_centroids(points, &assignment, k);
        // Reseed empty clusters with the point farthest from its centroid.
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let far = (0..points.len())
                .max_by(|&a, &b| {
                    sq_dist(&points[a], &next[assignment[a]])
                        .total_cmp(&sq_dist(&points[b], &next[assignment[b]]))
                })
                .unwrap();
            next[j] = points[far].clone();
            assignment[far] = j;
            changed = true;
        }
        centroids = next;
        if !changed {
            break;
        }
    }
    let (centroids, _) = recompute_centroids(points, &assignment, k);
    Ok(Clustering {
        assignment,
        centroids,
    })
}

/// Greedy capacity-constrained assignment: all (point, cluster) pairs are
/// visited in order of distance and each point takes the nearest cluster
/// that still has room. `N mod K` clusters may hold `⌈N/K⌉` points, the rest
/// `⌊N/K⌋`.
fn capacity_assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    let n = points.len();
    let k = centroids.len();
    let lo = n / k;
    let mut big_left = n % k;
    let mut pairs: Vec<(f64, u32, u32)> = Vec::with_capacity(n * k);
    for (i, p) in points.iter().enumerate() {
        for (c, z) in centroids.iter().enumerate() {
            pairs.push((sq_dist(p, z), i as u32, c as u32));
        }
    }
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assignment = vec![usize::MAX; n];
    let mut sizes = vec![0usize; k];
    let mut left = n;
    for (_, i, c) in pairs {
        let (i, c) = (i as usize, c as usize);
        if assignment[i] != usize::MAX {
            continue;
        }
        let cap = if big_left > 0 { lo + 1 } else { lo };
        if sizes[c] >= cap {
            continue;
        }
        assignment[i] = c;
        sizes[c] += 1;
        if sizes[c] == lo + 1 {
            big_left -= 1;
        }
        left -= 1;
        if left == 0 {
            break;
        }
    }
    assignment
}

/// k-means followed by balanced refinement so every cluster holds between
/// `⌊N/K⌋` and `⌈N/K⌉` points.
///
/// Starting from the unconstrained centroids, alternates capacity-constrained
/// assignment and centroid updates until the SSE stops improving, keeping
/// the lowest-SSE balanced partition.
pub fn balanced_kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    let base = kmeans(points, k, seed, max_iter)?;
    let mut centroids = base.centroids;
    let mut best: Option<(f64, Clustering)> = None;
    let mut previous: Vec<usize> = Vec::new();
    for _ in 0..max_iter.max(1) {
        let assignment = capacity_assign(points, &centroids);
        if assignment == previous {
            break;
        }
        let (next, _) = recompute_centroids(points, &assignment, k);
        let candidate = Clustering {
            assignment: assignment.clone(),
            centroids: next.clone(),
        };
        let sse = candidate.sse(points);
        let best_sse = best.as_ref().map_or(f64::INFINITY, |(b, _)| *b);
        if sse < best_sse {
            best = Some((sse, candidate));
        }
        if sse > best_sse * (1.0 - 1e-6) {
            break;
        }
        centroids = next;
        previous = assignment;
    }
    best.map(|(_, c)| c).ok_or(Error::EmptyClusterUnrecoverable { k, n: points.len() })
}

/// PCA whitening of one zone: `z_iso = A (z − z̄)` with `A = Λ^{-1/2} Vᵀ`.
#[derive(Clone, Debug)]
pub struct Whitening {
    pub centroid: DVector<f64>,
    pub transform: DMatrix<f64>,
    /// Eigenvalues of the (ridged) sample covariance, ascending.
    pub variances: DVector<f64>,
}

impl Whitening {
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let centered = DVector::from_column_slice(z) - &self.centroid;
        (&self.transform * centered).as_slice().to_vec()
    }
}

pub fn whiten(points: &[Vec<f64>]) -> Result<(Whitening, Vec<Vec<f64>>)> {
    let m = points.len();
    let dim = points.first().map_or(0, Vec::len);
    if m < dim + 1 || dim == 0 {
        return Err(Error::RankDeficient { min_eig: 0.0 });
    }
    let mut centroid = DVector::zeros(dim);
    for p in points {
        centroid += DVector::from_column_slice(p);
    }
    centroid /= m as f64;
    let mut cov = DMatrix::zeros(dim, dim);
    for p in points {
        let d = DVector::from_column_slice(p) - &centroid;
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= (m - 1) as f64;
    let ridge = 1e-10 * cov.trace() / dim as f64;
    for i in 0..dim {
        cov[(i, i)] += ridge;
    }
    let (vals, vecs) = sym_eigen(&cov)?;
    if !(vals[0] >= 1e-12) {
        return Err(Error::RankDeficient { min_eig: vals[0] });
    }
    let mut transform = vecs.transpose();
    for (i, mut row) in transform.row_iter_mut().enumerate() {
        row /= vals[i].sqrt();
    }
    let w = Whitening {
        centroid,
        transform,
        variances: vals,
    };
    let coords = points.iter().map(|p| w.apply(p)).collect();
    Ok((w, coords))
}

/// Ordinary least-squares trend `μ(z) = c̄ + C z` and its residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct Trend {
    pub intercept: f64,
    pub slope: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl Trend {
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.intercept + self.slope.iter().zip(z).map(|(c, v)| c * v).sum::<f64>()
    }
}

pub fn fit_trend(coords: &[Vec<f64>], y: &[f64]) -> Result<Trend> {
    let m = coords.len();
    let dim = coords.first().map_or(0, Vec::len);
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    if m < dim + 2 {
        return Err(Error::SingularDesign);
    }
    let design = DMatrix::from_fn(m, dim + 1, |i, j| if j == 0 { 1.0 } else { coords[i][j - 1] });
    let target = DVector::from_column_slice(y);
    let qr = design.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return Err(Error::SingularDesign);
    }
    let qty = qr.q().transpose() * &target;
    let beta = r.solve_upper_triangular(&qty).ok_or(Error::SingularDesign)?;
    let residuals = (target - design * &beta).as_slice().to_vec();
    Ok(Trend {
        intercept: beta[0],
        slope: beta.as_slice()[1..].to_vec(),
        residuals,
    })
}
