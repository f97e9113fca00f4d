//! Synthetic graph generators used by verification sweeps and the
//! end-to-end learning checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SgclError};
use crate::graph::CsrGraph;
use crate::nd::DenseMatrix;

/// Two-block stochastic block model with Gaussian class-separated features.
/// Nodes [0, n/2) belong to class 0, the rest to class 1.
pub fn sbm_two_block(
    n: usize,
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    feature_sep: f32,
    seed: u64,
) -> Result<CsrGraph> {
    if n < 2 {
        return Err(SgclError::Config("sbm: need at least 2 nodes".into()));
    }
    for p in [p_in, p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(SgclError::Config(format!(
                "sbm: edge probability {p} outside [0, 1]"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n / 2;
    let class_of = |v: usize| usize::from(v >= half);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if class_of(u) == class_of(v) { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    // class mean along a random direction with per-coordinate magnitude
    // ~ N(0, feature_sep^2): classes sit at +/- half the direction vector,
    // unit noise on top
    let direction = DenseMatrix::gaussian(1, feature_dim, feature_sep, &mut rng);
    let mut features = DenseMatrix::gaussian(n, feature_dim, 1.0, &mut rng);
    for v in 0..n {
        let sign = if class_of(v) == 0 { 0.5 } else { -0.5 };
        for c in 0..feature_dim {
            features[(v, c)] += sign * direction.data[c];
        }
    }
    let labels: Vec<usize> = (0..n).map(class_of).collect();
    let mut g = CsrGraph::from_edges(&edges, features)?;
    g.labels = Some(labels);
    g.num_classes = Some(2);
    Ok(g)
}

/// Random graph with maximum degree capped at `d_max` and features drawn
/// uniformly from [0, 1); used by the approximation-bound sweep.
pub fn random_bounded_degree(
    n: usize,
    d_max: usize,
    feature_dim: usize,
    seed: u64,
) -> Result<CsrGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; n];
    let mut edges = Vec::new();
    // Erdos-Renyi-style proposals, rejecting any edge that would exceed the
    // cap; expected degree sits around d_max / 2.
    let attempts = n * d_max;
    for _ in 0..attempts {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v || degree[u] >= d_max || degree[v] >= d_max {
            continue;
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        if edges.contains(&(a, b)) {
            continue;
        }
        degree[a] += 1;
        degree[b] += 1;
        edges.push((a, b));
    }
    let features = DenseMatrix::from_vec(
        n,
        feature_dim,
        (0..n * feature_dim).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )?;
    CsrGraph::from_edges(&edges, features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::degree_bound;

    #[test]
    fn sbm_shapes_and_labels() {
        let g = sbm_two_block(40, 0.2, 0.01, 8, 1.0, 0).unwrap();
        assert_eq!(g.num_nodes, 40);
        assert_eq!(g.features.shape(), (40, 8));
        let labels = g.labels.as_ref().unwrap();
        assert_eq!(labels.iter().filter(|&&c| c == 0).count(), 20);
        assert_eq!(g.num_classes, Some(2));
    }

    #[test]
    fn sbm_in_block_denser_than_cross() {
        let g = sbm_two_block(200, 0.2, 0.01, 4, 1.0, 1).unwrap();
        let labels = g.labels.as_ref().unwrap();
        let mut within = 0usize;
        let mut across = 0usize;
        for (u, v) in g.undirected_pairs() {
            if labels[u] == labels[v] {
                within += 1;
            } else {
                across += 1;
            }
        }
        assert!(within > 4 * across, "{within} within vs {across} across");
    }

    #[test]
    fn sbm_deterministic() {
        let a = sbm_two_block(30, 0.3, 0.05, 4, 1.0, 9).unwrap();
        let b = sbm_two_block(30, 0.3, 0.05, 4, 1.0, 9).unwrap();
        assert_eq!(a.col_idx, b.col_idx);
        assert_eq!(a.features.data, b.features.data);
    }

    #[test]
    fn sbm_rejects_bad_probability() {
        assert!(sbm_two_block(10, 1.5, 0.1, 4, 1.0, 0).is_err());
    }

    #[test]
    fn bounded_degree_cap_holds() {
        for seed in 0..5 {
            let g = random_bounded_degree(50, 10, 8, seed).unwrap();
            assert!(degree_bound(&g) <= 10);
            assert!(g.row_ptr[50] > 0, "graph should have some edges");
        }
    }

    #[test]
    fn bounded_degree_features_in_unit_interval() {
        let g = random_bounded_degree(20, 4, 6, 3).unwrap();
        assert!(g.features.data.iter().all(|&v| (0.0..1.0).contains(&v)));
    }
}
