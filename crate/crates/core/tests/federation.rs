//! Whole-federation queries over the generated dataset against brute force.

mod common;

use common::*;
use xfed::bench::{orders_query, xjoin_query};
use xfed::decomposer::Output;
use xfed::frontend::NATION_SUPPLIERS_QUERY;
use xfed::mediator::MediatorConfig;

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn worked_query_matches_brute_force_on_several_seeds() {
    for (scale, seed) in [(1.0, 1), (0.5, 5), (0.3, 11)] {
        let desk = Desk::new(scale, seed);
        let topo = desk.topologies(&MediatorConfig::default());
        let got = topo.mediator("M0").unwrap().run(NATION_SUPPLIERS_QUERY).unwrap();
        let want = worked_oracle(&desk.data);
        assert!(!want.is_empty(), "seed {seed} selects nothing");
        assert_eq!(canonical_docs(&got.documents), want, "scale {scale} seed {seed}");
    }
}

#[test]
fn every_join_strategy_and_serial_execution_agree() {
    let desk = Desk::new(0.5, 2);
    let want = worked_oracle(&desk.data);
    for config in [MediatorConfig::default(), MediatorConfig { parallel_sources: false, unoptimized: true, ..Default::default() }] {
        let topo = desk.topologies(&config);
        let m0 = topo.mediator("M0").unwrap();
        for algo in ["nested-loop", "sort-merge", "dependent"] {
            let q = format!("(:: hint join=t1_t2 algo={algo} ::) (:: hint join=t2_t3 algo={algo} ::) {NATION_SUPPLIERS_QUERY}");
            let got = m0.run(&q).unwrap();
            assert_eq!(canonical_docs(&got.documents), want, "{algo}");
        }
    }
}

#[test]
fn worked_query_decomposes_as_the_goldens() {
    let desk = Desk::new(1.0, 1);
    let topo = desk.topologies(&MediatorConfig::default());
    let d = topo.mediator("M0").unwrap().decompose(NATION_SUPPLIERS_QUERY, Output::Documents).unwrap();
    assert_eq!(format!("{}\n", d.canonical), golden("worked_canonical.txt"));
    let atoms: String = d.atoms.iter().map(|a| format!("{a}\n")).chain([format!("{}\n", d.global)]).collect();
    assert_eq!(atoms, golden("worked_atoms.txt"));
    assert_eq!(d.binding_table(), golden("worked_bindings.txt"));
    assert_eq!(d.plan_text(), golden("worked_plan.txt"));
}

#[test]
fn join_runs_inside_a7_and_on_the_mediator_over_a2_a3() {
    let desk = Desk::new(1.0, 1);
    let topo = desk.topologies(&MediatorConfig::default());
    let q = xjoin_query(1000);
    assert_eq!(topo.mediator("M2").unwrap().decompose(&q, Output::Documents).unwrap().plan_text(), golden("xjoin_m2_plan.txt"));
    assert_eq!(topo.mediator("M4").unwrap().decompose(&q, Output::Documents).unwrap().plan_text(), golden("xjoin_m4_plan.txt"));
    for n in [1, 37] {
        let want = xjoin_oracle(&desk.data, n);
        for m in ["M2", "M4"] {
            assert_eq!(canonical_docs(&topo.mediator(m).unwrap().run(&xjoin_query(n as u64)).unwrap().documents), want, "{m} N={n}");
        }
    }
}

#[test]
fn orders_selection_is_the_same_everywhere() {
    let desk = Desk::new(0.5, 4);
    let topo = desk.topologies(&MediatorConfig::default());
    for n in [0, 1, 10, 400] {
        let want = orders_oracle(&desk.data, n);
        assert_eq!(canonical_docs(&topo.run_direct(n as u64).unwrap().0), want);
        for m in ["M0", "M1"] {
            assert_eq!(canonical_docs(&topo.mediator(m).unwrap().run(&orders_query(n as u64)).unwrap().documents), want, "{m} N={n}");
        }
    }
}

#[test]
fn empty_dataset_answers_nothing() {
    let desk = Desk::new(0.0, 1);
    let topo = desk.topologies(&MediatorConfig::default());
    assert!(topo.mediator("M0").unwrap().run(NATION_SUPPLIERS_QUERY).unwrap().documents.is_empty());
    assert!(topo.mediator("M4").unwrap().run(&xjoin_query(10)).unwrap().documents.is_empty());
}
