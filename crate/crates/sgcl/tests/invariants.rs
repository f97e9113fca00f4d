//! Randomized invariants over the core data structures and kernels.

use proptest::prelude::*;

use sgcl::bits::BinaryMatrix;
use sgcl::contrastive::mrl_loss;
use sgcl::encoder::{firing_rate, group_widths, SpikeTrain};
use sgcl::graph::{drop_edges, sym_norm_coeffs, CsrGraph};
use sgcl::nd::DenseMatrix;
use sgcl::neuron::{neuron_step, NeuronConfig, NeuronKind, NeuronState, ResetMode};

fn arb_edges(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..n, 0..n), 0..3 * n)
        .prop_map(|pairs| pairs.into_iter().filter(|(u, v)| u != v).collect())
}

fn graph_from(n: usize, edges: &[(usize, usize)]) -> CsrGraph {
    CsrGraph::from_edges(edges, DenseMatrix::zeros(n, 2)).unwrap()
}

proptest! {
    #[test]
    fn csr_is_sorted_symmetric_and_valid(n in 2usize..30, edges in arb_edges(30)) {
        let edges: Vec<_> = edges.into_iter()
            .filter(|&(u, v)| u < n && v < n)
            .collect();
        let g = graph_from(n, &edges);
        g.validate().unwrap();
        for u in 0..n {
            let nb = g.neighbors(u);
            prop_assert!(nb.windows(2).all(|w| w[0] < w[1]), "sorted, deduped");
            for &v in nb {
                prop_assert!(g.neighbors(v).contains(&u), "symmetric");
            }
        }
    }

    #[test]
    fn dropped_edges_are_a_subset(n in 4usize..20, edges in arb_edges(20), p in 0.0f64..1.0, seed in 0u64..1000) {
        let edges: Vec<_> = edges.into_iter()
            .filter(|&(u, v)| u < n && v < n)
            .collect();
        let g = graph_from(n, &edges);
        let h = drop_edges(&g, p, seed).unwrap();
        h.validate().unwrap();
        for (u, v) in h.undirected_pairs() {
            prop_assert!(g.neighbors(u).contains(&v), "dropping never invents edges");
        }
        prop_assert!(h.num_directed_edges() <= g.num_directed_edges());
    }

    #[test]
    fn sym_norm_coeffs_positive_and_bounded(n in 2usize..20, edges in arb_edges(20)) {
        let edges: Vec<_> = edges.into_iter()
            .filter(|&(u, v)| u < n && v < n)
            .collect();
        let g = graph_from(n, &edges);
        let coeffs = sym_norm_coeffs(&g);
        for &c in &coeffs.self_term {
            prop_assert!(c > 0.0 && c <= 1.0);
        }
        for &c in &coeffs.neighbor {
            prop_assert!(c > 0.0 && c <= 1.0);
        }
    }

    #[test]
    fn bit_roundtrip(rows in 1usize..12, cols in 1usize..70, bits in prop::collection::vec(any::<bool>(), 12 * 70)) {
        let mut m = BinaryMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, bits[r * cols + c]);
            }
        }
        // packed bytes survive a write/read roundtrip
        let mut copy = BinaryMatrix::zeros(rows, cols);
        for r in 0..rows {
            copy.set_row_bytes(r, &m.row_bytes(r));
        }
        prop_assert_eq!(&copy, &m);
        // dense roundtrip and popcount agreement
        let back = BinaryMatrix::from_dense_nonzero(&m.to_dense());
        prop_assert_eq!(&back, &m);
        let expected: u64 = (0..rows)
            .map(|r| (0..cols).filter(|&c| bits[r * cols + c]).count() as u64)
            .sum();
        prop_assert_eq!(m.count_ones(), expected);
    }

    #[test]
    fn group_widths_follow_the_split_rule(d in 1usize..200, t in 1usize..32) {
        prop_assume!(t <= d);
        let widths = group_widths(d, t).unwrap();
        prop_assert_eq!(widths.len(), t);
        if d % t == 0 {
            // even case: an exact partition of the feature columns
            prop_assert!(widths.iter().all(|&w| w == d / t));
            prop_assert_eq!(widths.iter().sum::<usize>(), d);
        } else {
            // uneven case: T-1 groups of floor(d/T), then the remainder
            prop_assert!(widths[..t - 1].iter().all(|&w| w == d / t));
            prop_assert_eq!(widths[t - 1], d % t);
        }
        prop_assert!(widths.iter().all(|&w| w > 0));
    }

    #[test]
    fn firing_rate_is_a_probability(t in 1usize..8, rows in 1usize..6, cols in 1usize..6, bits in prop::collection::vec(any::<bool>(), 8 * 6 * 6)) {
        let steps: Vec<BinaryMatrix> = (0..t)
            .map(|s| {
                let mut m = BinaryMatrix::zeros(rows, cols);
                for r in 0..rows {
                    for c in 0..cols {
                        m.set(r, c, bits[(s * 6 + r) * 6 + c]);
                    }
                }
                m
            })
            .collect();
        let rates = firing_rate(&SpikeTrain { steps });
        prop_assert!(rates.data.iter().all(|&r| (0.0..=1.0).contains(&r)));
    }

    #[test]
    fn mrl_loss_nonnegative_with_consistent_subgradients(
        pos in prop::collection::vec(-3.0f32..3.0, 1..20),
        neg_offset in prop::collection::vec(-3.0f32..3.0, 1..20),
        margin in 0.0f32..2.0,
    ) {
        let n = pos.len().min(neg_offset.len());
        let pos = &pos[..n];
        let neg: Vec<f32> = neg_offset[..n].to_vec();
        let (loss, d_pos, d_neg) = mrl_loss(pos, &neg, margin);
        prop_assert!(loss >= 0.0);
        let inv_n = 1.0 / n as f32;
        for i in 0..n {
            let active = pos[i] - neg[i] + margin > 0.0;
            prop_assert_eq!(d_pos[i], if active { inv_n } else { 0.0 });
            prop_assert_eq!(d_neg[i], if active { -inv_n } else { 0.0 });
        }
        if pos.iter().zip(&neg).all(|(p, q)| p - q + margin <= 0.0) {
            prop_assert_eq!(loss, 0.0);
        }
    }

    #[test]
    fn if_neuron_fires_iff_threshold_reached(
        currents in prop::collection::vec(-2.0f32..2.0, 1..40),
        v_th in 0.05f32..1.5,
    ) {
        let cfg = NeuronConfig {
            kind: NeuronKind::If,
            v_threshold: v_th,
            reset_mode: ResetMode::BySubtraction,
            ..NeuronConfig::default()
        };
        let mut state = NeuronState::new(1, 1, cfg);
        let mut v = 0.0f32;
        for &i in &currents {
            let (spikes, trace) = neuron_step(&mut state, &DenseMatrix::from_vec(1, 1, vec![i]).unwrap()).unwrap();
            v += i;
            prop_assert!((trace.v_pre.data[0] - v).abs() < 1e-5);
            let fired = v - v_th >= 0.0;
            prop_assert_eq!(spikes.get(0, 0), fired);
            if fired {
                v -= v_th;
            }
            prop_assert!((state.potential.data[0] - v).abs() < 1e-5);
        }
    }

    #[test]
    fn cka_stays_in_unit_interval(
        xs in prop::collection::vec(-2.0f32..2.0, 60),
        ys in prop::collection::vec(-2.0f32..2.0, 45),
    ) {
        let x = DenseMatrix::from_vec(15, 4, xs).unwrap();
        let y = DenseMatrix::from_vec(15, 3, ys).unwrap();
        match sgcl::analytics::cka(&x, &y) {
            Ok(v) => prop_assert!((-1e-9..=1.0 + 1e-9).contains(&v), "cka = {v}"),
            Err(_) => {} // degenerate zero-variance draw is allowed to error
        }
    }
}
