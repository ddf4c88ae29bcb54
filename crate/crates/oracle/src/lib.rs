//! Slow, direct reference implementations for testing `marketmode`.
//!
//! Nothing here depends on the library under test. Matrices are row-major `Vec<f64>`,
//! return series are plain `Vec<Vec<f64>>` (one row per ticker).

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random returns with up to three latent factors and random per-row scales.
/// `days` may be below `rows`, which yields singular correlation matrices.
pub fn random_rows<R: Rng>(rng: &mut R, rows: usize, days: usize) -> Vec<Vec<f64>> {
    let factors = rng.random_range(0..4);
    let paths: Vec<Vec<f64>> = (0..factors)
        .map(|_| (0..days).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    (0..rows)
        .map(|_| {
            let loads: Vec<f64> = (0..factors).map(|_| rng.random_range(-2.0..2.0)).collect();
            let scale = rng.random_range(0.001..0.1);
            (0..days)
                .map(|t| {
                    let common: f64 = loads.iter().zip(&paths).map(|(b, f)| b * f[t]).sum();
                    let eps: f64 = StandardNormal.sample(rng);
                    scale * (common + eps)
                })
                .collect()
        })
        .collect()
}

/// Pearson correlation from raw sums.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Correlation matrix of `picks` over columns `start..end`, entry by entry.
pub fn pearson_matrix(rows: &[Vec<f64>], picks: &[usize], start: usize, end: usize) -> Vec<f64> {
    let n = picks.len();
    let mut out = vec![1.0; n * n];
    for (a, &i) in picks.iter().enumerate() {
        for (b, &j) in picks.iter().enumerate() {
            if a != b {
                out[a * n + b] = pearson(&rows[i][start..end], &rows[j][start..end]);
            }
        }
    }
    out
}

/// Eigenvalues in descending order, from nalgebra.
pub fn eigenvalues(entries: &[f64], n: usize) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_row_slice(n, n, entries);
    let mut values: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Roots of the characteristic polynomial of a symmetric 3x3 matrix (trigonometric form), descending.
pub fn cubic_roots(a: &[f64]) -> [f64; 3] {
    let p1 = a[1] * a[1] + a[2] * a[2] + a[5] * a[5];
    let q = (a[0] + a[4] + a[8]) / 3.0;
    let p2 = (a[0] - q).powi(2) + (a[4] - q).powi(2) + (a[8] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b: Vec<f64> = (0..9).map(|k| (a[k] - if k % 4 == 0 { q } else { 0.0 }) / p).collect();
    let det = b[0] * (b[4] * b[8] - b[5] * b[7]) - b[1] * (b[3] * b[8] - b[5] * b[6]) + b[2] * (b[3] * b[7] - b[4] * b[6]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [l1, 3.0 * q - l1 - l3, l3]
}

/// Median by full sort; even length averages the two central values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn mean_abs_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Draw `draw` of an `(m, n)` portfolio: a ChaCha8 stream keyed by `seed`, stream id
/// `m << 56 | n << 48 | draw`; `m` sectors sampled without replacement, then `n` members of each.
pub fn draw(seed: u64, groups: &[Vec<usize>], m: usize, n: usize, draw: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((m as u64) << 56) | ((n as u64) << 48) | draw);
    let chosen = index::sample(&mut rng, groups.len(), m).into_vec();
    let mut picked = Vec::new();
    for g in chosen {
        for k in index::sample(&mut rng, groups[g].len(), n).into_vec() {
            picked.push(groups[g][k]);
        }
    }
    picked.sort();
    picked
}

/// Per-window median of `lambda_1 / k` over `portfolios`, windows ending at `tau..=T`.
pub fn median_trajectory(rows: &[Vec<f64>], portfolios: &[Vec<usize>], tau: usize) -> Vec<f64> {
    let days = rows[0].len();
    (tau..=days)
        .map(|t| {
            let lambdas: Vec<f64> = portfolios
                .iter()
                .map(|p| eigenvalues(&pearson_matrix(rows, p, t - tau, t), p.len())[0] / p.len() as f64)
                .collect();
            median(&lambdas)
        })
        .collect()
}

/// One merge: `(left, right, height, size)`; leaves are `0..L`, step `s` creates node `L + s`.
pub type Merge = (usize, usize, f64, usize);

/// Textbook UPGMA: every step recomputes every cluster-pair average from leaf distances.
///
/// `rank[i]` orders leaves for tie-breaking and for choosing the left child.
pub fn upgma(dist: &[f64], rank: &[usize]) -> Vec<Merge> {
    let n = rank.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let min_rank = |c: &[usize]| c.iter().map(|&i| rank[i]).min().unwrap();
    let mut merges = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let (ca, cb) = (&clusters[a].1, &clusters[b].1);
                let total: f64 = ca.iter().flat_map(|&i| cb.iter().map(move |&j| dist[i * n + j])).sum();
                let avg = total / (ca.len() * cb.len()) as f64;
                let (ra, rb) = (min_rank(ca), min_rank(cb));
                let key = (ra.min(rb), ra.max(rb));
                let better = match &best {
                    None => true,
                    Some((d, k, _, _)) => avg < *d || (avg == *d && key < *k),
                };
                if better {
                    best = Some((avg, key, a, b));
                }
            }
        }
        let (height, _, a, b) = best.unwrap();
        let (ida, la) = clusters[a].clone();
        let (idb, lb) = clusters[b].clone();
        let (left, right) = if min_rank(&la) <= min_rank(&lb) { (ida, idb) } else { (idb, ida) };
        merges.push((left, right, height, la.len() + lb.len()));
        clusters.remove(b);
        clusters.remove(a);
        clusters.push((n + step, [la, lb].concat()));
    }
    merges
}
