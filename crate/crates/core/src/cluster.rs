//! Attractor clustering: weighted attractor graphs, the Zhang weighted
//! clustering coefficient, and single-link dendrograms.

use std::fmt::Write as _;

use crate::distance::{DistanceMatrix, Measure};
use crate::error::{Error, Result};

/// Symmetric weight matrix with entries in `[0, 1]` and a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedAdjacency {
    n: usize,
    a: Vec<f64>,
}

impl WeightedAdjacency {
    /// `values` is row-major `n x n`.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidParams(format!(
                    "nonzero diagonal weight at {i}"
                )));
            }
            for j in 0..i {
                let w = values[i * n + j];
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidParams(format!(
                        "weight {w} at ({i}, {j}) outside [0, 1]"
                    )));
                }
                if w != values[j * n + i] {
                    return Err(Error::InvalidParams(format!(
                        "asymmetric weight at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(WeightedAdjacency { n, a: values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }
}

/// Normalised reciprocal distances: `a_ij = min(1, d_min / d_ij)` where
/// `d_min` is the smallest positive off-diagonal distance. The closest pair
/// gets weight 1, zero-distance pairs are clamped to 1, and a matrix with no
/// positive distance becomes all ones.
pub fn weights_from_distances(d: &DistanceMatrix) -> Result<WeightedAdjacency> {
    let n = d.len();
    if n < 2 {
        return Err(Error::TooFew {
            what: "a weighted attractor graph",
            min: 2,
            got: n,
        });
    }
    let d_min = d
        .upper_triangle()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dij = d.get(i, j);
            a[i * n + j] = if dij > 0.0 {
                (d_min / dij).min(1.0)
            } else {
                1.0
            };
        }
    }
    WeightedAdjacency::new(n, a)
}

/// `C_i = n_i / g_i` with `n_i = (A^3)_ii / 2` (weighted triangles through i)
/// and `g_i = ((sum_u a_iu)^2 - sum_u a_iu^2) / 2`. `None` when `g_i = 0`,
/// i.e. node `i` has at most one neighbour with positive weight.
pub fn node_clustering_coefficient(adj: &WeightedAdjacency, i: usize) -> Option<f64> {
    let row = adj.row(i);
    let strength: f64 = row.iter().sum();
    let square_sum: f64 = row.iter().map(|w| w * w).sum();
    let g = 0.5 * (strength * strength - square_sum);
    if g <= 0.0 {
        return None;
    }
    let mut closed = 0.0;
    for (u, &a_iu) in row.iter().enumerate() {
        if a_iu == 0.0 {
            continue;
        }
        let through_u: f64 = adj
            .row(u)
            .iter()
            .zip(row)
            .map(|(a_uv, a_vi)| a_uv * a_vi)
            .sum();
        closed += a_iu * through_u;
    }
    Some((0.5 * closed / g).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringReport {
    pub labels: Vec<String>,
    pub per_node: Vec<Option<f64>>,
    /// Mean of the defined per-node coefficients.
    pub network: f64,
}

impl ClusteringReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,clustering\n");
        for (label, c) in self.labels.iter().zip(&self.per_node) {
            match c {
                Some(c) => writeln!(out, "{label},{c:.6}"),
                None => writeln!(out, "{label},NA"),
            }
            .expect("writing to a String");
        }
        writeln!(out, "network,{:.6}", self.network).expect("writing to a String");
        out
    }
}

pub fn clustering_report(adj: &WeightedAdjacency, labels: &[String]) -> Result<ClusteringReport> {
    if labels.len() != adj.len() {
        return Err(Error::DimensionMismatch {
            expected: adj.len(),
            found: labels.len(),
        });
    }
    let per_node: Vec<Option<f64>> = (0..adj.len())
        .map(|i| node_clustering_coefficient(adj, i))
        .collect();
    let defined: Vec<f64> = per_node.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedClustering);
    }
    Ok(ClusteringReport {
        labels: labels.to_vec(),
        per_node,
        network: defined.iter().sum::<f64>() / defined.len() as f64,
    })
}

/// Mean of the defined `C_i`; an error when none is defined.
pub fn network_clustering_coefficient(adj: &WeightedAdjacency) -> Result<f64> {
    let labels: Vec<String> = (0..adj.len()).map(|i| i.to_string()).collect();
    clustering_report(adj, &labels).map(|r| r.network)
}

/// One agglomeration step. Leaves are clusters `0..N`; the cluster formed by
/// step `s` has id `N + s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    measure: Measure,
    labels: Vec<String>,
    merges: Vec<Merge>,
}

/// Single-link agglomerative clustering.
///
/// At each step the two clusters at the smallest minimum member distance are
/// merged. Ties go to the pair whose smallest member labels sort first; the
/// left child of a merge is the cluster with the smaller label.
pub fn single_link_dendrogram(d: &DistanceMatrix) -> Result<Dendrogram> {
    let n = d.len();
    if n < 2 {
        return Err(Error::TooFew {
            what: "a dendrogram",
            min: 2,
            got: n,
        });
    }
    let labels = d.labels();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| labels[a].cmp(&labels[b]).then(a.cmp(&b)));
    let mut key = vec![0usize; n];
    for (rank, &i) in order.iter().enumerate() {
        key[i] = rank;
    }

    let mut dist: Vec<f64> = (0..n * n).map(|x| d.get(x / n, x % n)).collect();
    let mut id: Vec<usize> = (0..n).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (x, &p) in active.iter().enumerate() {
            for &q in &active[x + 1..] {
                let h = dist[p * n + q];
                let (lo, hi) = if key[p] < key[q] {
                    (key[p], key[q])
                } else {
                    (key[q], key[p])
                };
                let better = match best {
                    None => true,
                    Some((bh, blo, bhi, _, _)) => h < bh || (h == bh && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((h, lo, hi, p, q));
                }
            }
        }
        let (height, _, _, p, q) = best.expect("at least two active clusters");
        let (keep, gone) = if key[p] < key[q] { (p, q) } else { (q, p) };
        merges.push(Merge {
            left: id[keep],
            right: id[gone],
            height,
        });
        for &r in &active {
            let m = dist[keep * n + r].min(dist[gone * n + r]);
            dist[keep * n + r] = m;
            dist[r * n + keep] = m;
        }
        dist[keep * n + keep] = 0.0;
        id[keep] = n + step;
        active.retain(|&r| r != gone);
    }

    Ok(Dendrogram {
        measure: d.measure(),
        labels: labels.to_vec(),
        merges,
    })
}

fn newick_label(label: &str) -> String {
    if label
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
    {
        label.to_string()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

impl Dendrogram {
    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Members of a cluster id, as leaf indices in ascending order.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        let n = self.labels.len();
        let mut out = Vec::new();
        let mut stack = vec![cluster];
        while let Some(c) = stack.pop() {
            if c < n {
                out.push(c);
            } else {
                let m = self.merges[c - n];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        out.sort_unstable();
        out
    }

    fn height_of(&self, cluster: usize) -> f64 {
        let n = self.labels.len();
        if cluster < n {
            0.0
        } else {
            self.merges[cluster - n].height
        }
    }

    /// Newick text with ultrametric branch lengths: a node at merge height
    /// `h` sits at depth `h / 2`, so each branch is half the height
    /// difference between parent and child.
    pub fn to_newick(&self) -> String {
        let n = self.labels.len();
        let root = n + self.merges.len() - 1;
        let mut out = String::new();
        self.write_newick(root, &mut out);
        out.push(';');
        out
    }

    fn write_newick(&self, cluster: usize, out: &mut String) {
        let n = self.labels.len();
        if cluster < n {
            out.push_str(&newick_label(&self.labels[cluster]));
            return;
        }
        let m = self.merges[cluster - n];
        out.push('(');
        for (i, child) in [m.left, m.right].into_iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            self.write_newick(child, out);
            let branch = (m.height - self.height_of(child)) / 2.0;
            write!(out, ":{branch}").expect("writing to a String");
        }
        out.push(')');
    }

    /// Merge table: `step,left,right,height`.
    pub fn merges_csv(&self) -> String {
        let mut out = String::from("step,left,right,height\n");
        for (step, m) in self.merges.iter().enumerate() {
            writeln!(
                out,
                "{step},{},{},{}",
                m.left,
                m.right,
                self.measure.format_value(m.height)
            )
            .expect("writing to a String");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(labels: &[&str], rows: &[&[f64]]) -> DistanceMatrix {
        let values = rows.iter().flat_map(|r| r.iter().copied()).collect();
        DistanceMatrix::new(
            Measure::Euclidean,
            labels.iter().map(|s| s.to_string()).collect(),
            values,
        )
        .unwrap()
    }

    fn adjacency(n: usize, upper: &[(usize, usize, f64)]) -> WeightedAdjacency {
        let mut a = vec![0.0; n * n];
        for &(i, j, w) in upper {
            a[i * n + j] = w;
            a[j * n + i] = w;
        }
        WeightedAdjacency::new(n, a).unwrap()
    }

    /// Direct triple sum and quoted g_i, as an independent check.
    fn zhang_oracle(adj: &WeightedAdjacency, i: usize) -> Option<f64> {
        let n = adj.len();
        let mut num = 0.0;
        for u in (0..n).filter(|&u| u != i) {
            for v in (0..n).filter(|&v| v != i && v != u) {
                num += adj.get(i, u) * adj.get(u, v) * adj.get(v, i);
            }
        }
        num *= 0.5;
        let s: f64 = (0..n).filter(|&u| u != i).map(|u| adj.get(i, u)).sum();
        let s2: f64 = (0..n)
            .filter(|&u| u != i)
            .map(|u| adj.get(i, u).powi(2))
            .sum();
        let g = 0.5 * (s * s - s2);
        (g > 0.0).then(|| num / g)
    }

    #[test]
    fn weights_examples() {
        let d = matrix(
            &["A", "B", "C"],
            &[&[0.0, 1.0, 2.0], &[1.0, 0.0, 4.0], &[2.0, 4.0, 0.0]],
        );
        let w = weights_from_distances(&d).unwrap();
        assert_eq!((w.get(0, 1), w.get(0, 2), w.get(1, 2)), (1.0, 0.5, 0.25));

        let d = matrix(
            &["A", "B", "C"],
            &[&[0.0, 3.0, 3.0], &[3.0, 0.0, 3.0], &[3.0, 3.0, 0.0]],
        );
        let w = weights_from_distances(&d).unwrap();
        assert!((0..3).all(|i| (0..3).all(|j| w.get(i, j) == if i == j { 0.0 } else { 1.0 })));

        let d = matrix(
            &["A", "B", "C"],
            &[&[0.0, 0.0, 2.0], &[0.0, 0.0, 4.0], &[2.0, 4.0, 0.0]],
        );
        let w = weights_from_distances(&d).unwrap();
        assert_eq!((w.get(0, 1), w.get(0, 2), w.get(1, 2)), (1.0, 1.0, 0.5));

        let d = matrix(&["A", "B"], &[&[0.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(weights_from_distances(&d).unwrap().get(0, 1), 1.0);
        assert!(weights_from_distances(&matrix(&["A"], &[&[0.0]])).is_err());
    }

    #[test]
    fn clustering_examples() {
        let complete = adjacency(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]);
        for i in 0..3 {
            assert_eq!(node_clustering_coefficient(&complete, i), Some(1.0));
        }
        assert_eq!(network_clustering_coefficient(&complete).unwrap(), 1.0);

        let star = adjacency(3, &[(0, 1, 1.0), (0, 2, 1.0)]);
        assert_eq!(node_clustering_coefficient(&star, 0), Some(0.0));
        assert_eq!(node_clustering_coefficient(&star, 1), None);

        let w = 0.3;
        let uniform = adjacency(3, &[(0, 1, w), (0, 2, w), (1, 2, w)]);
        assert!((network_clustering_coefficient(&uniform).unwrap() - w).abs() < 1e-15);

        let empty = adjacency(3, &[]);
        assert!(matches!(
            network_clustering_coefficient(&empty),
            Err(Error::UndefinedClustering)
        ));
    }

    #[test]
    fn clustering_report_csv() {
        let star = adjacency(3, &[(0, 1, 1.0), (0, 2, 1.0)]);
        let labels: Vec<String> = ["A0", "A1", "A2"].iter().map(|s| s.to_string()).collect();
        let report = clustering_report(&star, &labels).unwrap();
        assert_eq!(
            report.to_csv(),
            "label,clustering\nA0,0.000000\nA1,NA\nA2,NA\nnetwork,0.000000\n"
        );
    }

    #[test]
    fn single_link_examples() {
        let d = matrix(
            &["A", "B", "C"],
            &[&[0.0, 1.0, 5.0], &[1.0, 0.0, 3.0], &[5.0, 3.0, 0.0]],
        );
        let dg = single_link_dendrogram(&d).unwrap();
        assert_eq!(
            dg.merges(),
            &[
                Merge {
                    left: 0,
                    right: 1,
                    height: 1.0
                },
                Merge {
                    left: 3,
                    right: 2,
                    height: 3.0
                }
            ]
        );
        assert_eq!(dg.to_newick(), "((A:0.5,B:0.5):1,C:1.5);");

        let d = matrix(&["A", "B"], &[&[0.0, 2.0], &[2.0, 0.0]]);
        let dg = single_link_dendrogram(&d).unwrap();
        assert_eq!(dg.merges().len(), 1);
        assert_eq!(dg.to_newick(), "(A:1,B:1);");
        assert_eq!(dg.merges_csv(), "step,left,right,height\n0,0,1,2.000000\n");

        assert!(single_link_dendrogram(&matrix(&["A"], &[&[0.0]])).is_err());
    }

    #[test]
    fn ties_break_by_label_order() {
        // Every pair at distance 1: merges chain in label order.
        let d = matrix(
            &["C", "A", "B"],
            &[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]],
        );
        let dg = single_link_dendrogram(&d).unwrap();
        assert_eq!(
            dg.merges()[0],
            Merge {
                left: 1,
                right: 2,
                height: 1.0
            }
        );
        assert_eq!(
            dg.merges()[1],
            Merge {
                left: 3,
                right: 0,
                height: 1.0
            }
        );
        assert_eq!(dg.to_newick(), "((A:0.5,B:0.5):0,C:0.5);");
    }

    #[test]
    fn newick_quotes_unusual_labels() {
        let d = matrix(&["a b", "c"], &[&[0.0, 2.0], &[2.0, 0.0]]);
        assert_eq!(
            single_link_dendrogram(&d).unwrap().to_newick(),
            "('a b':1,c:1);"
        );
    }

    fn arb_symmetric(max_n: usize, integral: bool) -> impl Strategy<Value = (usize, Vec<f64>)> {
        (2..=max_n).prop_flat_map(move |n| {
            let entry = if integral {
                (0u32..6).prop_map(|x| x as f64).boxed()
            } else {
                (0.0f64..10.0).boxed()
            };
            prop::collection::vec(entry, n * (n - 1) / 2).prop_map(move |upper| {
                let mut m = vec![0.0; n * n];
                let mut it = upper.into_iter();
                for i in 0..n {
                    for j in i + 1..n {
                        let v = it.next().unwrap();
                        m[i * n + j] = v;
                        m[j * n + i] = v;
                    }
                }
                (n, m)
            })
        })
    }

    fn labelled(n: usize, values: Vec<f64>) -> DistanceMatrix {
        DistanceMatrix::new(
            Measure::Euclidean,
            (0..n).map(|i| format!("L{i:03}")).collect(),
            values,
        )
        .unwrap()
    }

    fn mst_weights(n: usize, m: &[f64]) -> Vec<f64> {
        let mut in_tree = vec![false; n];
        let mut best = vec![f64::INFINITY; n];
        best[0] = 0.0;
        let mut out = Vec::new();
        for round in 0..n {
            let u = (0..n)
                .filter(|&v| !in_tree[v])
                .min_by(|&a, &b| best[a].total_cmp(&best[b]))
                .unwrap();
            in_tree[u] = true;
            if round > 0 {
                out.push(best[u]);
            }
            for v in 0..n {
                if !in_tree[v] && m[u * n + v] < best[v] {
                    best[v] = m[u * n + v];
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    fn leaf_sets(dg: &Dendrogram) -> Vec<(Vec<String>, Vec<String>, f64)> {
        let names = |c: usize| {
            let mut v: Vec<String> = dg
                .members(c)
                .into_iter()
                .map(|i| dg.labels()[i].clone())
                .collect();
            v.sort();
            v
        };
        dg.merges()
            .iter()
            .map(|m| (names(m.left), names(m.right), m.height))
            .collect()
    }

    proptest! {
        #[test]
        fn zhang_matches_triple_sum((n, mut m) in arb_symmetric(12, false)) {
            m.iter_mut().for_each(|v| *v /= 10.0);
            let adj = WeightedAdjacency::new(n, m).unwrap();
            for i in 0..n {
                match (node_clustering_coefficient(&adj, i), zhang_oracle(&adj, i)) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                    (a, b) => prop_assert_eq!(a, b),
                }
            }
        }

        #[test]
        fn weights_are_order_reversing_and_scale_free((n, m) in arb_symmetric(10, false), c in 0.1f64..50.0) {
            let d = labelled(n, m.clone());
            let w = weights_from_distances(&d).unwrap();
            let scaled = labelled(n, m.iter().map(|v| v * c).collect());
            let ws = weights_from_distances(&scaled).unwrap();
            for i in 0..n {
                prop_assert_eq!(w.get(i, i), 0.0);
                for j in 0..n {
                    prop_assert!((0.0..=1.0).contains(&w.get(i, j)));
                    prop_assert_eq!(w.get(i, j), w.get(j, i));
                    prop_assert!((w.get(i, j) - ws.get(i, j)).abs() < 1e-12);
                    for u in 0..n {
                        for v in 0..n {
                            if i != j && u != v && d.get(i, j) < d.get(u, v) {
                                prop_assert!(w.get(i, j) >= w.get(u, v));
                            }
                        }
                    }
                }
            }
        }

        #[test]
        fn single_link_heights_equal_mst_weights((n, m) in arb_symmetric(25, true)) {
            let dg = single_link_dendrogram(&labelled(n, m.clone())).unwrap();
            let heights: Vec<f64> = dg.merges().iter().map(|x| x.height).collect();
            prop_assert!(heights.windows(2).all(|w| w[0] <= w[1]));
            let mut sorted = heights.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assert_eq!(sorted, mst_weights(n, &m));
            let mut used: Vec<usize> = dg.merges().iter().flat_map(|x| [x.left, x.right]).collect();
            used.sort();
            prop_assert_eq!(used, (0..2 * n - 2).collect::<Vec<_>>());
        }

        #[test]
        fn single_link_is_permutation_invariant((n, m) in arb_symmetric(12, true), seed: u64) {
            let d = labelled(n, m.clone());
            let mut perm: Vec<usize> = (0..n).collect();
            let mut s = seed;
            for i in (1..n).rev() {
                s = crate::seed::mix64(s);
                perm.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let labels = (0..n).map(|i| d.labels()[perm[i]].clone()).collect();
            let values = (0..n * n).map(|x| d.get(perm[x / n], perm[x % n])).collect();
            let permuted = DistanceMatrix::new(Measure::Euclidean, labels, values).unwrap();
            let a = single_link_dendrogram(&d).unwrap();
            let b = single_link_dendrogram(&permuted).unwrap();
            prop_assert_eq!(leaf_sets(&a), leaf_sets(&b));
        }

        #[test]
        fn scaling_distances_scales_heights((n, m) in arb_symmetric(10, true), c in 1u32..9) {
            let a = single_link_dendrogram(&labelled(n, m.clone())).unwrap();
            let b = single_link_dendrogram(&labelled(n, m.iter().map(|v| v * c as f64).collect())).unwrap();
            for (x, y) in a.merges().iter().zip(b.merges()) {
                prop_assert_eq!(x.height * c as f64, y.height);
            }
        }

        #[test]
        fn binary_weights_reduce_to_edge_counting(n in 3usize..15, bits in prop::collection::vec(any::<bool>(), 105)) {
            let mut a = vec![0.0; n * n];
            let mut it = bits.into_iter();
            for i in 0..n {
                for j in i + 1..n {
                    let w = if it.next().unwrap() { 1.0 } else { 0.0 };
                    a[i * n + j] = w;
                    a[j * n + i] = w;
                }
            }
            let adj = WeightedAdjacency::new(n, a).unwrap();
            for i in 0..n {
                let nbrs: Vec<usize> = (0..n).filter(|&u| adj.get(i, u) == 1.0).collect();
                let deg = nbrs.len();
                let links = nbrs.iter().enumerate()
                    .flat_map(|(x, &u)| nbrs[x + 1..].iter().map(move |&v| (u, v)))
                    .filter(|&(u, v)| adj.get(u, v) == 1.0)
                    .count();
                let expected = (deg >= 2).then(|| links as f64 / (deg * (deg - 1) / 2) as f64);
                match (node_clustering_coefficient(&adj, i), expected) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                    (a, b) => prop_assert_eq!(a, b),
                }
            }
        }
    }
}
