//! Agglomerative clustering over a precomputed dissimilarity matrix:
//! average-linkage dendrograms, flat cuts, optimal leaf ordering for heatmap
//! display, and silhouette scores for selecting the cluster count.
//!
//! Everything here is deterministic. Ties in merge selection and leaf
//! ordering break toward the smaller row index, so identical inputs always
//! produce identical dendrograms and orderings.

use std::collections::HashMap;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, values: vec![0.0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
        self.values[j * self.n + i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One agglomeration step. `a` and `b` are cluster ids: leaves are
/// `0..n`, the cluster formed by step `s` has id `n + s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// Stepwise dendrogram over `n` observations; always `n - 1` merges.
#[derive(Debug, Clone)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

/// Average-linkage agglomerative clustering by repeated global-minimum
/// merging with Lance-Williams updates. Average linkage is reducible, so
/// merge heights are non-decreasing.
pub fn average_linkage(dist: &SquareMatrix) -> Dendrogram {
    let n = dist.n();
    let total = if n == 0 { 0 } else { 2 * n - 1 };
    let mut work = vec![f64::INFINITY; total * total];
    for i in 0..n {
        for j in 0..n {
            work[i * total + j] = dist.at(i, j);
        }
    }
    let mut size = vec![1usize; total];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let v = work[a * total + b];
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        let (height, a, b) = best;
        let new_id = n + step;
        for &k in &active {
            if k != a && k != b {
                let v = (size[a] as f64 * work[a * total + k] + size[b] as f64 * work[b * total + k])
                    / (size[a] + size[b]) as f64;
                work[new_id * total + k] = v;
                work[k * total + new_id] = v;
            }
        }
        size[new_id] = size[a] + size[b];
        active.retain(|&x| x != a && x != b);
        active.push(new_id);
        merges.push(Merge { a, b, height, size: size[new_id] });
    }
    debug_assert!(merges.windows(2).all(|w| w[0].height <= w[1].height + 1e-12));
    Dendrogram { n, merges }
}

/// Flat partition from the first `n - k` merges. Returns one label in
/// `0..k` per leaf; label numbering follows first appearance by leaf index.
pub fn cut(dend: &Dendrogram, k: usize) -> Vec<usize> {
    let n = dend.n;
    assert!(k >= 1 && k <= n, "cut k={k} outside 1..={n}");
    let mut parent: Vec<usize> = (0..2 * n.max(1) - 1).collect();
    for (step, m) in dend.merges.iter().take(n - k).enumerate() {
        parent[m.a] = n + step;
        parent[m.b] = n + step;
    }
    let mut labels = vec![usize::MAX; n];
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for leaf in 0..n {
        let mut root = leaf;
        while parent[root] != root {
            root = parent[root];
        }
        let next = seen.len();
        labels[leaf] = *seen.entry(root).or_insert(next);
    }
    labels
}

/// Mean silhouette coefficient of a labeled partition under `dist`.
/// Singleton clusters contribute 0, the usual convention.
pub fn silhouette(dist: &SquareMatrix, labels: &[usize]) -> f64 {
    let n = labels.len();
    assert_eq!(dist.n(), n);
    if n == 0 {
        return 0.0;
    }
    let k = labels.iter().copied().max().map(|m| m + 1).unwrap_or(0);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut sum = 0.0;
    for i in 0..n {
        let own = &members[labels[i]];
        if own.len() <= 1 {
            continue; // s(i) = 0
        }
        let a = own.iter().filter(|&&j| j != i).map(|&j| dist.at(i, j)).sum::<f64>()
            / (own.len() - 1) as f64;
        let b = members
            .iter()
            .enumerate()
            .filter(|(c, m)| *c != labels[i] && !m.is_empty())
            .map(|(_, m)| m.iter().map(|&j| dist.at(i, j)).sum::<f64>() / m.len() as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            let denom = a.max(b);
            if denom > 0.0 {
                sum += (b - a) / denom;
            }
        }
    }
    sum / n as f64
}

/// Pick the cluster count with the best silhouette over `k_min..=k_max`
/// (clamped to the observation count); ties go to the smaller k. Also
/// returns the per-k scores for reporting.
pub fn select_k(
    dend: &Dendrogram,
    dist: &SquareMatrix,
    k_min: usize,
    k_max: usize,
) -> (usize, Vec<(usize, f64)>) {
    let n = dend.n;
    let hi = k_max.min(n);
    let lo = k_min.min(hi).max(1);
    let mut scores = Vec::new();
    let mut best = (lo, f64::NEG_INFINITY);
    for k in lo..=hi {
        let labels = cut(dend, k);
        let s = silhouette(dist, &labels);
        scores.push((k, s));
        if s > best.1 {
            best = (k, s);
        }
    }
    (best.0, scores)
}

struct OloNode {
    // leaf -> (side, index within side); absent for leaves
    side_of: HashMap<usize, (bool, usize)>, // false = left child
    left: usize,
    right: usize,
    left_leaves: Vec<usize>,
    right_leaves: Vec<usize>,
    score: Vec<f64>,         // |L| x |R|, row-major by (left idx, right idx)
    split: Vec<(usize, usize)>, // chosen (m, k) per (u, w)
}

/// Leaf ordering that maximizes the summed similarity between adjacent
/// leaves among all orderings consistent with the dendrogram, with ties
/// broken toward smaller row indexes.
pub fn optimal_leaf_order(dend: &Dendrogram, sim: &SquareMatrix) -> Vec<usize> {
    let n = dend.n;
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0];
    }
    let total = 2 * n - 1;
    let mut leaves: Vec<Vec<usize>> = vec![Vec::new(); total];
    for i in 0..n {
        leaves[i] = vec![i];
    }
    let mut nodes: Vec<Option<OloNode>> = (0..total).map(|_| None).collect();

    // M(v)(u, w): best adjacency score of an ordering of leaves(v) starting
    // at u (in the left child) and ending at w (in the right child).
    // M(v)(u, w) = max over m, k of M(L)(u, m) + sim(m, k) + M(R)(k, w).
    let m_of = |nodes: &Vec<Option<OloNode>>, v: usize, from: usize, to: usize| -> f64 {
        if v < n {
            return 0.0; // single leaf
        }
        let node = nodes[v].as_ref().unwrap();
        let (from_side, fi) = node.side_of[&from];
        let (_, ti) = node.side_of[&to];
        if !from_side {
            node.score[fi * node.right_leaves.len() + ti]
        } else {
            // reversed orientation of the stored (left, right) entry
            node.score[ti * node.right_leaves.len() + fi]
        }
    };
    // valid opposite ends for an ordering of leaves(v) starting at `u`
    let ends_for = |nodes: &Vec<Option<OloNode>>, v: usize, u: usize| -> Vec<usize> {
        if v < n {
            return vec![u];
        }
        let node = nodes[v].as_ref().unwrap();
        let (side, _) = node.side_of[&u];
        if !side { node.right_leaves.clone() } else { node.left_leaves.clone() }
    };

    for (step, merge) in dend.merges.iter().enumerate() {
        let v = n + step;
        let (left, right) = (merge.a, merge.b);
        let left_leaves = leaves[left].clone();
        let right_leaves = leaves[right].clone();
        let mut side_of = HashMap::with_capacity(left_leaves.len() + right_leaves.len());
        for (i, &l) in left_leaves.iter().enumerate() {
            side_of.insert(l, (false, i));
        }
        for (i, &r) in right_leaves.iter().enumerate() {
            side_of.insert(r, (true, i));
        }
        let cols = right_leaves.len();
        let mut score = vec![f64::NEG_INFINITY; left_leaves.len() * cols];
        let mut split = vec![(usize::MAX, usize::MAX); left_leaves.len() * cols];
        for (ui, &u) in left_leaves.iter().enumerate() {
            let ends = ends_for(&nodes, left, u);
            // H(k) = best M(L)(u, m) + sim(m, k), remembering m
            let mut h = vec![(f64::NEG_INFINITY, usize::MAX); right_leaves.len()];
            for &m in &ends {
                let base = m_of(&nodes, left, u, m);
                for (ki, &k) in right_leaves.iter().enumerate() {
                    let cand = base + sim.at(m, k);
                    if cand > h[ki].0 || (cand == h[ki].0 && m < h[ki].1) {
                        h[ki] = (cand, m);
                    }
                }
            }
            for (wi, &w) in right_leaves.iter().enumerate() {
                let starts = ends_for(&nodes, right, w);
                let mut best = (f64::NEG_INFINITY, usize::MAX, usize::MAX); // (score, m, k)
                for &k in &starts {
                    let ki = side_of[&k].1;
                    let cand = h[ki].0 + m_of(&nodes, right, k, w);
                    if cand > best.0 || (cand == best.0 && (h[ki].1, k) < (best.1, best.2)) {
                        best = (cand, h[ki].1, k);
                    }
                }
                score[ui * cols + wi] = best.0;
                split[ui * cols + wi] = (best.1, best.2);
            }
        }
        let mut merged = left_leaves.clone();
        merged.extend_from_slice(&right_leaves);
        leaves[v] = merged;
        nodes[v] = Some(OloNode { side_of, left, right, left_leaves, right_leaves, score, split });
    }

    // best endpoints at the root, smallest (u, w) on ties
    let root = total - 1;
    let root_node = nodes[root].as_ref().unwrap();
    let cols = root_node.right_leaves.len();
    let mut best = (f64::NEG_INFINITY, usize::MAX, usize::MAX);
    for (ui, &u) in root_node.left_leaves.iter().enumerate() {
        for (wi, &w) in root_node.right_leaves.iter().enumerate() {
            let s = root_node.score[ui * cols + wi];
            let (lo, hi) = if u < w { (u, w) } else { (w, u) };
            if s > best.0 || (s == best.0 && (lo, hi) < (best.1, best.2)) {
                best = (s, lo, hi);
            }
        }
    }
    // orient so the ordering starts at the smaller endpoint
    let (u, w) = (best.1, best.2);
    let mut order = Vec::with_capacity(n);
    emit(&nodes, n, root, u, w, &mut order);
    debug_assert_eq!(order.len(), n);
    order
}

fn emit(
    nodes: &Vec<Option<OloNode>>,
    n: usize,
    v: usize,
    from: usize,
    to: usize,
    out: &mut Vec<usize>,
) {
    if v < n {
        out.push(from);
        return;
    }
    let node = nodes[v].as_ref().unwrap();
    let (from_side, fi) = node.side_of[&from];
    let cols = node.right_leaves.len();
    if !from_side {
        let ti = node.side_of[&to].1;
        let (m, k) = node.split[fi * cols + ti];
        emit(nodes, n, node.left, from, m, out);
        emit(nodes, n, node.right, k, to, out);
    } else {
        // stored entry is (to in L) .. m | k .. (from in R); reversed emit
        let ti = node.side_of[&to].1;
        let (m, k) = node.split[ti * cols + fi];
        emit(nodes, n, node.right, from, k, out);
        emit(nodes, n, node.left, m, to, out);
    }
}
