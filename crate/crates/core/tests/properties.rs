//! Randomized invariants across modules.

use automine::cluster::{kmeans, Algorithm, ClusterData, Measure};
use automine::dataset::{
    generate_student_data, infer_types, read_csv, write_csv_to, AttributeKind, Cell, Dataset, MissingPolicy, RawColumn,
};
use automine::detection::{build_knn_graph, silhouette};
use automine::pipeline::{canonical_trace, AgentId, AgentMessage, Bus, MessageKind};
use automine::profile::SessionRecord;
use automine::ranking::{rank_attributes, RankWeights};
use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use std::sync::OnceLock;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn mixed_dataset(num: &[Option<f64>], cat: &[String]) -> Dataset {
    let schema = vec![("num".to_string(), AttributeKind::Numeric), ("cat".to_string(), AttributeKind::Categorical)];
    let rows = num
        .iter()
        .zip(cat)
        .map(|(v, c)| vec![v.map_or(Cell::Missing, Cell::Number), Cell::Category(c.clone())])
        .collect();
    Dataset::from_rows(&schema, rows).unwrap()
}

fn numeric_column() -> impl Strategy<Value = Vec<Option<f64>>> {
    prop::collection::vec(prop::option::weighted(0.85, -1e6f64..1e6), 1..40)
        .prop_filter("needs a present value", |v| v.iter().any(Option::is_some))
}

fn raw_cell() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => (-1000i32..1000).prop_map(|v| v.to_string()),
        2 => (-100.0f64..100.0).prop_map(|v| format!("{v:.3}")),
        1 => "c[a-z]{0,3}",
        1 => Just(String::new()),
        1 => Just("NA".to_string()),
    ]
}

fn student() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| generate_student_data(200, 3).unwrap())
}

fn session(i: usize, attrs: Vec<String>) -> SessionRecord {
    SessionRecord {
        session_id: format!("s{i}"),
        user_id: "u".into(),
        timestamp: Utc.timestamp_opt(1_700_000_000 + i as i64, 0).unwrap(),
        objective: "x".into(),
        objective_tokens: vec![],
        selected_attributes: attrs,
        algorithm_used: None,
        k_used: None,
        quality_summary: None,
        accepted: false,
        navigation: vec![],
    }
}

fn points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2), 6..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(num in numeric_column(), seed_cats in prop::collection::vec("c[a-z]{0,4}", 40)) {
        let cat = seed_cats[..num.len()].to_vec();
        let ds = mixed_dataset(&num, &cat);
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf, b',').unwrap();
        let back = read_csv(buf.as_slice(), b',', true).unwrap();
        prop_assert_eq!(back.n(), ds.n());
        for (a, b) in ds.attributes().iter().zip(back.attributes()) {
            prop_assert_eq!(&a.name, &b.name);
            prop_assert_eq!(a.kind, b.kind);
        }
        for (ra, rb) in ds.rows().iter().zip(back.rows()) {
            match (&ra[0], &rb[0]) {
                (Cell::Number(x), Cell::Number(y)) => prop_assert!(close(*x, *y, 1e-9)),
                (x, y) => prop_assert_eq!(x, y),
            }
            prop_assert_eq!(&ra[1], &rb[1]);
        }
    }

    #[test]
    fn inference_ignores_row_order(
        (cols, perm) in prop::collection::vec(prop::collection::vec(raw_cell(), 12), 1..4)
            .prop_flat_map(|cols| (Just(cols), Just((0..12).collect::<Vec<usize>>()).prop_shuffle()))
    ) {
        let raw = |order: &[usize]| -> Vec<RawColumn> {
            cols.iter()
                .enumerate()
                .map(|(j, c)| RawColumn { name: format!("c{j}"), cells: order.iter().map(|&i| c[i].clone()).collect() })
                .collect()
        };
        let identity: Vec<usize> = (0..12).collect();
        match (infer_types(&raw(&identity)), infer_types(&raw(&perm))) {
            (Ok(a), Ok(b)) => {
                for (x, y) in a.iter().zip(&b) {
                    prop_assert_eq!(x.kind, y.kind);
                    prop_assert_eq!(x.cardinality, y.cardinality);
                    prop_assert!(close(x.missing_ratio, y.missing_ratio, 1e-12));
                }
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn imputation_keeps_n_and_mean(num in numeric_column()) {
        let cat: Vec<String> = (0..num.len()).map(|i| if i % 3 == 0 { "a".into() } else { "b".into() }).collect();
        let ds = mixed_dataset(&num, &cat);
        let filled = ds.handle_missing(MissingPolicy::ImputeMeanMode).unwrap();
        prop_assert_eq!(filled.n(), ds.n());
        let present: Vec<f64> = num.iter().flatten().copied().collect();
        let before = present.iter().sum::<f64>() / present.len() as f64;
        let after: Vec<f64> = filled.column(0).map(|c| c.as_number().unwrap()).collect();
        prop_assert!(close(after.iter().sum::<f64>() / after.len() as f64, before, 1e-9));
        prop_assert_eq!(filled.attributes()[0].missing_ratio, 0.0);
    }

    #[test]
    fn summer_is_lowest_for_every_seed(seed in any::<u64>()) {
        let ds = generate_student_data(300, seed).unwrap();
        let s = ds.attribute_index("SEMESTER").unwrap();
        let p = ds.attribute_index("PASS_PERCENTAGE").unwrap();
        let mut sums = std::collections::HashMap::<String, (f64, usize)>::new();
        for row in ds.rows() {
            let e = sums.entry(row[s].as_category().unwrap().to_string()).or_default();
            e.0 += row[p].as_number().unwrap();
            e.1 += 1;
        }
        let mean = |k: &str| sums[k].0 / sums[k].1 as f64;
        prop_assert!(mean("summer") < mean("spring"));
        prop_assert!(mean("summer") < mean("fall"));
    }

    #[test]
    fn more_usage_never_lowers_rank(attr in 0usize..25, sessions in 1usize..6, used in 0usize..6) {
        let used = used.min(sessions - 1);
        let ds = student();
        let name = ds.attributes()[attr].name.clone();
        let history = |u: usize| -> Vec<SessionRecord> {
            (0..sessions).map(|i| session(i, if i < u { vec![name.clone()] } else { vec![] })).collect()
        };
        let rank_of = |u: usize| {
            let r = rank_attributes(ds, &["performance".to_string()], &history(u), 3, RankWeights::default()).unwrap();
            r.ranks.iter().find(|a| a.name == name).unwrap().rank
        };
        prop_assert!(rank_of(used + 1) <= rank_of(used));
    }

    #[test]
    fn kmeans_ignores_affine_rescaling(rows in points(), scale in (0.1f64..20.0, 0.1f64..20.0), shift in (-100.0f64..100.0, -100.0f64..100.0), seed in 0u64..50) {
        let schema = vec![("x".to_string(), AttributeKind::Numeric), ("y".to_string(), AttributeKind::Numeric)];
        let build = |f: &dyn Fn(&[f64]) -> Vec<f64>| {
            let cells = rows.iter().map(|r| f(r).into_iter().map(Cell::Number).collect()).collect();
            let ds = Dataset::from_rows(&schema, cells).unwrap();
            ClusterData::from_dataset(&ds, &["x".to_string(), "y".to_string()]).unwrap()
        };
        let a = build(&|r| r.to_vec());
        let b = build(&|r| vec![scale.0 * r[0] + shift.0, scale.1 * r[1] + shift.1]);
        let ma = kmeans(&a, 3, seed, 100).unwrap();
        let mb = kmeans(&b, 3, seed, 100).unwrap();
        prop_assert_eq!(ma.assignments, mb.assignments);
        prop_assert!(close(ma.objective, mb.objective, 1e-9));
    }

    #[test]
    fn silhouette_is_bounded(rows in points(), labels in prop::collection::vec(0usize..4, 30)) {
        let data = ClusterData::from_numeric(&rows);
        let labels = &labels[..rows.len()];
        prop_assume!(labels.iter().collect::<std::collections::HashSet<_>>().len() >= 2);
        let s = silhouette(&data, labels, Measure::SqEuclidean).unwrap();
        prop_assert!(s.per_point.iter().chain(&s.per_cluster).chain([&s.overall]).all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn neighbor_graph_is_symmetric(rows in points(), k_nn in 1usize..6) {
        let data = ClusterData::from_numeric(&rows);
        let g = build_knn_graph(&data, Measure::SqEuclidean, k_nn).unwrap();
        for (i, adj) in g.adjacency.iter().enumerate() {
            prop_assert!(adj.len() <= k_nn);
            prop_assert!(!adj.contains(&i));
            for &j in adj {
                prop_assert!(g.adjacency[j].contains(&i));
            }
        }
    }

    #[test]
    fn bus_only_follows_the_canonical_order(msgs in prop::collection::vec((0usize..4, 0usize..4, 0usize..3), 0..20)) {
        let agents = [AgentId::UserInterface, AgentId::Ranking, AgentId::DataMining, AgentId::Visualization];
        let kinds = [MessageKind::TransferControl, MessageKind::Result, MessageKind::Error];
        let mut bus = Bus::new();
        let mut accepted = 0;
        for (f, t, k) in msgs {
            let before = bus.clone();
            match bus.dispatch(AgentMessage::new(agents[f], agents[t], kinds[k], "p")) {
                Ok(_) => accepted += 1,
                Err(_) => prop_assert_eq!(&bus, &before),
            }
        }
        prop_assert_eq!(bus.log().len(), accepted);
        let trace = canonical_trace();
        let transfers: Vec<_> = bus.log().iter().filter(|m| m.kind != MessageKind::Error).map(|m| (m.from, m.to, m.kind)).collect();
        prop_assert_eq!(&transfers[..], &trace[..transfers.len()]);
    }
}

#[test]
fn algorithm_ids_round_trip() {
    for a in Algorithm::ALL {
        assert_eq!(a.id().parse::<Algorithm>().unwrap(), a);
    }
}
