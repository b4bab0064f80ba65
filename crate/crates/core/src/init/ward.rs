use serde::{Deserialize, Serialize};

use crate::clustering::squared_distance;
use crate::error::{Error, Result};
use crate::types::CurveSet;

/// One agglomeration step. Leaves are `0..N`; the cluster created by step
/// `s` has id `N + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Increase of the total within-cluster sum of squares.
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    /// Heights of the last `count` merges, final merge first: the drop in
    /// total within-cluster variance gained by each extra cluster.
    pub fn last_heights(&self, count: usize) -> Vec<f64> {
        self.merges.iter().rev().take(count).map(|m| m.height).collect()
    }

    /// Leaves in plotting order (left subtree first).
    pub fn leaf_order(&self) -> Vec<usize> {
        let n = self.leaves;
        if self.merges.is_empty() {
            return (0..n).collect();
        }
        let mut out = Vec::with_capacity(n);
        let mut stack = vec![n + self.merges.len() - 1];
        while let Some(node) = stack.pop() {
            if node < n {
                out.push(node);
            } else {
                let m = &self.merges[node - n];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        out
    }

    /// Labels after undoing all but the first `N - k` merges. Clusters are
    /// numbered by their smallest member.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.leaves;
        if k == 0 || k > n {
            return Err(Error::domain(format!("cannot cut {n} leaves into {k} clusters")));
        }
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (s, m) in self.merges.iter().take(n - k).enumerate() {
            let node = n + s;
            let a = find(&mut parent, m.left);
            let b = find(&mut parent, m.right);
            parent[a] = node;
            parent[b] = node;
        }
        let mut label_of_root = vec![usize::MAX; 2 * n];
        let mut labels = vec![0; n];
        let mut next = 0;
        for (i, label) in labels.iter_mut().enumerate() {
            let r = find(&mut parent, i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            *label = label_of_root[r];
        }
        Ok(labels)
    }
}

/// Ward agglomeration on squared grid distances.
///
/// Pairwise costs start at `||x_i - x_j||^2 / 2`, the sum-of-squares
/// increase of merging two points, and are updated with the Lance-Williams
/// formula. The closest pair is found by a row-major scan, so ties go to
/// the pair with the smallest slot indices.
pub fn ward_cluster(set: &CurveSet) -> Result<Dendrogram> {
    let n = set.len();
    if n < 2 {
        return Err(Error::domain("Ward clustering needs at least two curves"));
    }
    let mut d = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * squared_distance(set.row(i), set.row(j));
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let (mut a, mut b, mut best) = (0, 0, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if active[j] && d[i * n + j] < best {
                    best = d[i * n + j];
                    a = i;
                    b = j;
                }
            }
        }
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((na + nk) * d[a * n + k] + (nb + nk) * d[b * n + k] - nk * best)
                / (na + nb + nk);
            d[a * n + k] = v;
            d[k * n + a] = v;
        }
        let (lo, hi) = if id[a] < id[b] { (id[a], id[b]) } else { (id[b], id[a]) };
        merges.push(Merge {
            left: lo,
            right: hi,
            height: best,
            size: size[a] + size[b],
        });
        active[b] = false;
        size[a] += size[b];
        id[a] = n + step;
    }
    Ok(Dendrogram { leaves: n, merges })
}

/// Cluster labels from cutting a dendrogram into `k` groups.
pub fn partition_from_dendrogram(dendrogram: &Dendrogram, k: usize) -> Result<Vec<usize>> {
    dendrogram.cut(k)
}
