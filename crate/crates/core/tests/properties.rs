use proptest::prelude::*;
use trustgnn::graph::parse_level;
use trustgnn::graph::{
    brute_force_chain_paths, enumerate_chain_types, split_edges, ChainMode, Direction, Edge, TrustGraph,
};
use trustgnn::model::TrustGnn;
use trustgnn::ndiff::{complex_conjugate, complex_hadamard, complex_unit_normalize, kernels, ComplexView, Tensor};
use trustgnn::toy::toy_config;
use trustgnn::train::metrics::{accuracy, class_counts, mean_absolute_error, micro_f1};
use trustgnn::train::{evaluate, init_params, LevelScale};

fn tensor(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-10.0f64..10.0, rows * cols).prop_map(move |d| Tensor::new(rows, cols, d).unwrap())
}

fn graph_strategy() -> impl Strategy<Value = TrustGraph> {
    (2usize..12, 1usize..4).prop_flat_map(|(n, r)| {
        prop::collection::vec((0..n, 0..n, 0..r), 0..30).prop_map(move |raw| {
            let mut seen = std::collections::HashSet::new();
            let edges: Vec<Edge> = raw
                .into_iter()
                .filter(|&(s, d, _)| s != d && seen.insert((s, d)))
                .map(|(s, d, t)| Edge::new(s, d, t))
                .collect();
            TrustGraph::new(n, r, edges).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_rotation_keeps_modulus(x in tensor(2, 8), r in tensor(1, 8)) {
        prop_assume!(r.max_abs() > 1e-3);
        let u = complex_unit_normalize(&r, 1e-12).unwrap();
        let y = complex_hadamard(&x, &u).unwrap();
        let (xv, yv) = (ComplexView::new(&x).unwrap(), ComplexView::new(&y).unwrap());
        for row in 0..2 {
            for k in 0..4 {
                prop_assert!((xv.modulus(row, k) - yv.modulus(row, k)).abs() <= 1e-10 * xv.modulus(row, k).max(1.0));
            }
        }
    }

    #[test]
    fn conjugate_undoes_a_rotation(x in tensor(3, 6), r in tensor(1, 6)) {
        prop_assume!(ComplexView::new(&r).map(|v| (0..3).all(|k| v.modulus(0, k) > 1e-3)).unwrap());
        let u = complex_unit_normalize(&r, 1e-12).unwrap();
        let back = complex_hadamard(&complex_hadamard(&x, &u).unwrap(), &complex_conjugate(&u).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&x) <= 1e-10 * x.max_abs().max(1.0));
    }

    #[test]
    fn rotations_associate(a in tensor(1, 4), b in tensor(1, 4), c in tensor(1, 4)) {
        let l = complex_hadamard(&complex_hadamard(&a, &b).unwrap(), &c).unwrap();
        let r = complex_hadamard(&a, &complex_hadamard(&b, &c).unwrap()).unwrap();
        prop_assert!(l.max_abs_diff(&r) <= 1e-12 * l.max_abs().max(1.0));
    }

    #[test]
    fn reach_sum_counts_walks(g in graph_strategy(), seed in 0u64..1000) {
        let chains = enumerate_chain_types(g.num_relations(), 3, ChainMode::UpToK).unwrap();
        let chain = &chains.types()[(seed as usize) % chains.len()];
        let h = Tensor::from_fn(g.num_nodes(), 2, |r, c| (r * 3 + c + seed as usize) as f64 % 7.0 - 3.0);
        for dir in [Direction::Trustee, Direction::Trustor] {
            let fast = g.chain_reach_sum(chain, dir, &h).unwrap();
            for v in 0..g.num_nodes() {
                let paths = brute_force_chain_paths(&g, chain, dir, v).unwrap();
                let mut want = [0.0; 2];
                for p in &paths {
                    let u = if dir == Direction::Trustee { p[0] } else { *p.last().unwrap() };
                    want[0] += h.get(u, 0);
                    want[1] += h.get(u, 1);
                }
                prop_assert!((fast.get(v, 0) - want[0]).abs() <= 1e-9 * want[0].abs().max(1.0));
                prop_assert!((fast.get(v, 1) - want[1]).abs() <= 1e-9 * want[1].abs().max(1.0));
                // a walk of the type visits every hop in order
                for p in &paths {
                    prop_assert_eq!(p.len(), chain.len() + 1);
                    for (hop, w) in p.windows(2).enumerate() {
                        prop_assert_eq!(g.relation(w[0], w[1]), Some(chain.rels()[hop]));
                    }
                }
            }
        }
    }

    #[test]
    fn trustor_reach_is_trustee_reach_on_the_reversed_graph(g in graph_strategy(), seed in 0u64..100) {
        let chains = enumerate_chain_types(g.num_relations(), 3, ChainMode::UpToK).unwrap();
        let chain = &chains.types()[(seed as usize) % chains.len()];
        let h = Tensor::from_fn(g.num_nodes(), 3, |r, c| ((r + 1) * (c + 2)) as f64);
        let a = g.chain_reach_sum(chain, Direction::Trustor, &h).unwrap();
        let b = g.reversed().chain_reach_sum(&chain.reversed(), Direction::Trustee, &h).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn chain_counts_follow_the_closed_form(r in 1usize..5, k in 1usize..4) {
        let exact = enumerate_chain_types(r, k, ChainMode::ExactK).unwrap();
        let upto = enumerate_chain_types(r, k, ChainMode::UpToK).unwrap();
        prop_assert_eq!(exact.len(), r.pow(k as u32));
        prop_assert_eq!(upto.len(), (1..=k).map(|i| r.pow(i as u32)).sum::<usize>());
        // shorter first, then lexicographic
        for w in upto.types().windows(2) {
            prop_assert!((w[0].len(), w[0].rels()) < (w[1].len(), w[1].rels()));
        }
    }

    #[test]
    fn softmax_is_a_distribution(x in prop::collection::vec(-800.0f64..800.0, 1..10)) {
        let p = kernels::softmax(&x);
        prop_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(kernels::argmax(&p), kernels::argmax(&x));
    }

    #[test]
    fn micro_f1_is_accuracy(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..100)) {
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let f1 = micro_f1(&class_counts(&t, &p, 4).unwrap());
        prop_assert!((f1 - accuracy(&t, &p)).abs() < 1e-12);
    }

    #[test]
    fn splits_partition_the_edges(g in graph_strategy(), ratio in 0.1f64..0.9, seed in 0u64..50) {
        let n = g.num_edges();
        let want = (n as f64 * ratio).round() as usize;
        prop_assume!(want > 0 && want < n);
        let s = split_edges(g.edges(), ratio, seed).unwrap();
        prop_assert_eq!(s.train.len(), want);
        let mut all: Vec<Edge> = s.train.iter().chain(&s.test).copied().collect();
        all.sort();
        let mut orig = g.edges().to_vec();
        orig.sort();
        prop_assert_eq!(all, orig);
        prop_assert_eq!(split_edges(g.edges(), ratio, seed).unwrap(), s);
    }

    #[test]
    fn canonical_files_round_trip(g in graph_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.tsv");
        g.save(&path).unwrap();
        let back = TrustGraph::load(&path, g.num_relations()).unwrap();
        prop_assert_eq!(back.node_ids(), g.node_ids());
        prop_assert_eq!(back.edges(), g.edges());
        // converting an already converted file changes nothing
        let convert = |text: &[u8]| {
            let mut out = Vec::new();
            TrustGraph::read_raw(text, g.num_relations()).unwrap().write_tsv(&mut out).unwrap();
            out
        };
        let mut raw = Vec::new();
        g.write_tsv(&mut raw).unwrap();
        let once = convert(&raw);
        prop_assert_eq!(convert(&once), once);
    }

    #[test]
    fn tensors_survive_json(t in tensor(3, 4)) {
        let text = serde_json::to_string(&t.to_rows()).unwrap();
        let rows: Vec<Vec<f64>> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(Tensor::from_rows(&rows).unwrap(), t);
    }

    #[test]
    fn mae_follows_the_named_levels(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
        let scale = LevelScale::for_relations(4);
        let value = |name: &str| scale.value(parse_level(name, 4).unwrap());
        prop_assert_eq!([value("Observer"), value("apprentice"), value("JOURNEYER"), value("master")], [0.1, 0.4, 0.7, 0.9]);
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let direct = pairs.iter().map(|&(a, b)| (scale.value(a) - scale.value(b)).abs()).sum::<f64>() / pairs.len() as f64;
        let mae = mean_absolute_error(&t, &p, &scale);
        prop_assert!((mae - direct).abs() < 1e-12);
        // swapping truth and prediction leaves the error unchanged
        prop_assert!((mean_absolute_error(&p, &t, &scale) - mae).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn evaluation_is_pure(g in graph_strategy(), seed in 0u64..1000) {
        prop_assume!(g.num_edges() > 0);
        let config = trustgnn::train::TrainConfig { num_relations: g.num_relations(), ..toy_config() };
        let model = TrustGnn::new(config.model_spec(g.num_nodes()).unwrap()).unwrap();
        let params = init_params(&model, seed);
        let a = evaluate(&model, &params, &g, g.edges()).unwrap();
        let b = evaluate(&model, &params, &g, g.edges()).unwrap();
        prop_assert_eq!(a, b);
    }
}
