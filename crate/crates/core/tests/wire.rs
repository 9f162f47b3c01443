//! Wire round trips over random relations and the desk dataset.

mod common;

use common::*;
use proptest::prelude::*;
use xfed::wire::{decode_bytes, encode_to_vec};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_relations_round_trip(seed in any::<u64>()) {
        let m = random_tree_relation(&mut rng(seed)).materialize().unwrap();
        let back = decode_bytes(&encode_to_vec(m.relation()).unwrap()).unwrap();
        prop_assert_eq!(&back.schema.attributes, &m.schema.attributes);
        prop_assert_eq!(back.canonical(), m.canonical());
    }
}

#[test]
fn dataset_relations_round_trip_and_shrink() {
    let desk = Desk::new(0.2, 7);
    for (name, m, xml) in dataset_relations(desk.dir.path()) {
        let bytes = encode_to_vec(m.relation()).unwrap();
        assert_eq!(decode_bytes(&bytes).unwrap().canonical(), m.canonical(), "{name}");
        if m.tuples.len() >= 10 {
            assert!(bytes.len() < xml, "{name}: {} wire bytes, {xml} XML bytes", bytes.len());
        }
    }
}
