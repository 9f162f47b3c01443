//! Algebraic identities over random small relations.

mod common;

use common::*;
use proptest::prelude::*;
use xfed::xalgebra::setops::x_distinct;
use xfed::xalgebra::validate::{validate_schema, validate_tuple};
use xfed::xalgebra::{
    path, x_difference, x_join, x_nest, x_product, x_project, x_restrict, x_union, x_unnest, Attr, CmpOp, JoinAlgo, Materialized, Predicate,
    XRelation,
};

fn checked(rel: XRelation) -> Materialized {
    let m = rel.materialize().unwrap();
    validate_schema(&m.schema).unwrap();
    for t in &m.tuples {
        validate_tuple(&m.schema, t).unwrap();
    }
    m
}

fn on_keys(op: CmpOp) -> Predicate {
    Predicate::cmp_attr(path("a/k"), op, path("b/k"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn equi_join_is_restricted_product(l in rows_strategy(), r in rows_strategy()) {
        let p = on_keys(CmpOp::Eq);
        let want = checked(x_restrict(x_product(left(&l), right(&r)).unwrap(), &p).unwrap()).canonical_multiset();
        for algo in [JoinAlgo::NestedLoop, JoinAlgo::SortMerge, JoinAlgo::Dependent] {
            let got = checked(x_join(left(&l), right(&r), &p, algo).unwrap()).canonical_multiset();
            prop_assert_eq!(&got, &want, "{}", algo.name());
        }
    }

    #[test]
    fn theta_join_is_restricted_product(l in rows_strategy(), r in rows_strategy()) {
        let p = Predicate::and(vec![on_keys(CmpOp::Lt), Predicate::cmp_attr(path("a/v"), CmpOp::Ne, path("b/w"))]);
        let want = checked(x_restrict(x_product(left(&l), right(&r)).unwrap(), &p).unwrap()).canonical_multiset();
        let got = checked(x_join(left(&l), right(&r), &p, JoinAlgo::NestedLoop).unwrap()).canonical_multiset();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn unnest_undoes_nest(l in rows_strategy()) {
        // Duplicate-free, keyed rows with exactly one value each.
        let mut rows: Vec<Row> = l.into_iter().filter(|r| r.key.is_some()).map(|r| Row { key: r.key, vals: r.vals.into_iter().take(1).collect() }).filter(|r| !r.vals.is_empty()).collect();
        rows.sort_by_key(|r| (r.key, r.vals.clone()));
        rows.dedup_by_key(|r| (r.key, r.vals.clone()));
        let key = Attr::new(path("a/k"));
        let nested = checked(x_nest(left(&rows), std::slice::from_ref(&key)).unwrap());
        let flat = checked(x_unnest(nested.into_relation(), &Attr::new(path("a/v")), &[key]).unwrap());
        prop_assert_eq!(flat.canonical_multiset(), checked(left(&rows)).canonical_multiset());
    }

    #[test]
    fn projection_is_idempotent(l in rows_strategy()) {
        let keep = [Attr::new(path("a/v"))];
        let once = checked(x_project(left(&l), &keep).unwrap());
        let twice = checked(x_project(once.relation(), &keep).unwrap());
        prop_assert_eq!(once.canonical(), twice.canonical());
    }

    #[test]
    fn set_laws(l in rows_strategy()) {
        prop_assert!(checked(x_difference(left(&l), left(&l)).unwrap()).tuples.is_empty());
        let empty = left(&[]);
        let u = checked(x_union(left(&l), empty).unwrap());
        prop_assert_eq!(u.canonical(), checked(x_distinct(left(&l))).canonical());
    }
}
