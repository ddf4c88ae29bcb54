//! Average-linkage (UPGMA) clustering of diversification trajectories.

use std::fmt::{self, Display, Write as _};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampling::{MedianTrajectory, PortfolioSpec};

/// Mean absolute difference between two aligned trajectories.
pub fn trajectory_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Symmetric distances with zero diagonal between labelled items.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<L> {
    labels: Vec<L>,
    entries: Vec<f64>,
}

impl<L: Clone> DistanceMatrix<L> {
    pub fn new(labels: Vec<L>, entries: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if entries.len() != n * n {
            return Err(Error::InvalidConfig(format!(
                "{} distances for {n} labels",
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::InvalidConfig(format!("nonzero self-distance at {i}")));
            }
            for j in 0..n {
                let d = entries[i * n + j];
                if !(d >= 0.0) || !d.is_finite() || d != entries[j * n + i] {
                    return Err(Error::InvalidConfig(format!(
                        "distance ({i},{j}) must be finite, non-negative and symmetric"
                    )));
                }
            }
        }
        Ok(Self { labels, entries })
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len() + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Pairwise trajectory distances, labels in `(m, n)` lexicographic order.
pub fn distance_matrix(trajectories: &[MedianTrajectory]) -> Result<DistanceMatrix<PortfolioSpec>> {
    let mut sorted: Vec<&MedianTrajectory> = trajectories.iter().collect();
    sorted.sort_by_key(|t| t.spec);
    let n = sorted.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let distances = pairs
        .par_iter()
        .map(|&(i, j)| trajectory_distance(&sorted[i].values, &sorted[j].values))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = vec![0.0; n * n];
    for (&(i, j), d) in pairs.iter().zip(distances) {
        entries[i * n + j] = d;
        entries[j * n + i] = d;
    }
    DistanceMatrix::new(sorted.iter().map(|t| t.spec).collect(), entries)
}

/// One agglomeration step.
///
/// Leaves are clusters `0..L`; the cluster created at step `s` is `L + s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram<L> {
    labels: Vec<L>,
    merges: Vec<Merge>,
}

impl<L> Dendrogram<L> {
    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn leaves(&self) -> usize {
        self.labels.len()
    }
}

/// UPGMA: repeatedly merges the closest pair of clusters, where the distance between
/// clusters is the mean leaf-to-leaf distance.
///
/// Exact ties go to the pair whose smallest-label members are lexicographically smallest,
/// so the result does not depend on the input order of the labels.
pub fn average_linkage<L: Ord + Clone>(dist: &DistanceMatrix<L>) -> Dendrogram<L> {
    let n = dist.len();
    let mut d = dist.entries.clone();
    // per active slot: (cluster id, size, smallest leaf index by label)
    let mut active: Vec<Option<(usize, usize, usize)>> = (0..n).map(|i| Some((i, 1, i))).collect();
    let key = |leaf: usize| &dist.labels[leaf];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..n {
            let Some((_, _, ki)) = active[i] else { continue };
            for j in (i + 1)..n {
                let Some((_, _, kj)) = active[j] else { continue };
                let dij = d[i * n + j];
                let better = match best {
                    None => true,
                    Some((bi, bj)) => {
                        let dbest = d[bi * n + bj];
                        if dij != dbest {
                            dij < dbest
                        } else {
                            let (_, _, kbi) = active[bi].unwrap();
                            let (_, _, kbj) = active[bj].unwrap();
                            ordered(key(ki), key(kj)) < ordered(key(kbi), key(kbj))
                        }
                    }
                };
                if better {
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best.expect("at least two active clusters");
        let (ci, si, ki) = active[i].unwrap();
        let (cj, sj, kj) = active[j].unwrap();
        let height = d[i * n + j];
        let (left, right) = if key(ki) <= key(kj) { (ci, cj) } else { (cj, ci) };
        merges.push(Merge {
            left,
            right,
            height,
            size: si + sj,
        });
        // merged cluster lives in slot i
        let (wi, wj) = (si as f64, sj as f64);
        for k in 0..n {
            if k == i || k == j || active[k].is_none() {
                continue;
            }
            let updated = (wi * d[i * n + k] + wj * d[j * n + k]) / (wi + wj);
            d[i * n + k] = updated;
            d[k * n + i] = updated;
        }
        let kmin = if key(ki) <= key(kj) { ki } else { kj };
        active[i] = Some((n + step, si + sj, kmin));
        active[j] = None;
    }
    Dendrogram {
        labels: dist.labels.clone(),
        merges,
    }
}

fn ordered<'a, L: Ord>(a: &'a L, b: &'a L) -> (&'a L, &'a L) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Flat partition from applying the first `L - k` merges.
///
/// Returns one cluster id per leaf; ids are numbered from 0 in order of each cluster's
/// first leaf in label order.
pub fn cut_clusters<L>(dendrogram: &Dendrogram<L>, k: usize) -> Result<Vec<usize>> {
    let n = dendrogram.leaves();
    if k == 0 || k > n {
        return Err(Error::ClusterCount { k, leaves: n });
    }
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (step, m) in dendrogram.merges.iter().take(n - k).enumerate() {
        let node = n + step;
        let (a, b) = (root(&mut parent, m.left), root(&mut parent, m.right));
        parent[a] = node;
        parent[b] = node;
    }
    let mut ids = std::collections::HashMap::new();
    Ok((0..n)
        .map(|leaf| {
            let r = root(&mut parent, leaf);
            let next = ids.len();
            *ids.entry(r).or_insert(next)
        })
        .collect())
}

impl<L: Display> Dendrogram<L> {
    /// Newick tree with quoted labels; branch lengths are height differences.
    pub fn to_newick(&self) -> String {
        let n = self.leaves();
        if n == 0 {
            return ";".into();
        }
        let height = |node: usize| if node < n { 0.0 } else { self.merges[node - n].height };
        let mut out = String::new();
        fn emit<L: Display>(tree: &Dendrogram<L>, node: usize, out: &mut String, height: &dyn Fn(usize) -> f64) {
            let n = tree.leaves();
            if node < n {
                let label = tree.labels[node].to_string().replace('\'', "''");
                write!(out, "'{label}'").unwrap();
            } else {
                let m = tree.merges[node - n];
                out.push('(');
                for (i, child) in [m.left, m.right].into_iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    emit(tree, child, out, height);
                    write!(out, ":{}", m.height - height(child)).unwrap();
                }
                out.push(')');
            }
        }
        let root = if n == 1 { 0 } else { 2 * n - 2 };
        emit(self, root, &mut out, &height);
        out.push(';');
        out
    }
}

impl<L: Display> fmt::Display for Dendrogram<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_newick())
    }
}
