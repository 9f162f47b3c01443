//! Shared fixtures: random small relations, the desk dataset, and a
//! brute-force evaluator for the nation/supplier query.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};

use xfed::adapters::{Adapter, AdapterQuery, FileAdapter, TabularAdapter};
use xfed::bench::{generate, Dataset, DatasetSpec, Link, Topologies};
use xfed::mediator::MediatorConfig;
use xfed::xalgebra::relation::prefix_close;
use xfed::xalgebra::{path, x_source, Attr, Materialized, NodeRef, Path, XRelation, XRelationSchema, XTree, XTuple};
use xfed::xml::{documents, escape_text, parse_events, XmlEvent};

/// One document `<root><k>key</k><leaf>v</leaf>…</root>`; a missing key
/// leaves the `k` binding empty.
#[derive(Clone, Debug)]
pub struct Row {
    pub key: Option<u8>,
    pub vals: Vec<u8>,
}

pub fn rows_strategy() -> impl Strategy<Value = Vec<Row>> {
    let row = (proptest::option::weighted(0.85, 0u8..4), proptest::collection::vec(0u8..5, 0..3)).prop_map(|(key, vals)| Row { key, vals });
    proptest::collection::vec(row, 0..=6)
}

pub fn random_rows(rng: &mut ChaCha8Rng) -> Vec<Row> {
    let n = rng.random_range(0..=6);
    (0..n)
        .map(|_| Row {
            key: (rng.random_range(0..20) > 2).then(|| rng.random_range(0..4)),
            vals: (0..rng.random_range(0..3)).map(|_| rng.random_range(0..5)).collect(),
        })
        .collect()
}

pub fn rows_xml(root: &str, leaf: &str, rows: &[Row]) -> String {
    let mut s = String::new();
    for r in rows {
        s.push_str(&format!("<{root}>"));
        if let Some(k) = r.key {
            s.push_str(&format!("<k>{k}</k>"));
        }
        for v in &r.vals {
            s.push_str(&format!("<{leaf}>{v}</{leaf}>"));
        }
        s.push_str(&format!("</{root}>"));
    }
    s
}

/// Attributes `root/k` and `root/leaf`.
pub fn relation(root: &str, leaf: &str, rows: &[Row]) -> XRelation {
    let attrs = vec![Attr::new(path(&format!("{root}/k"))), Attr::new(path(&format!("{root}/{leaf}")))];
    let guide: Vec<Path> = attrs.iter().map(|a| a.path.clone()).collect();
    x_source(parse_events(&rows_xml(root, leaf, rows)).unwrap().into_iter(), guide, attrs).unwrap()
}

pub fn left(rows: &[Row]) -> XRelation {
    relation("a", "v", rows)
}

pub fn right(rows: &[Row]) -> XRelation {
    relation("b", "w", rows)
}

const LABELS: [&str; 3] = ["a", "b", "c"];
const TEXTS: [&str; 8] = ["45", "-3.50", "0.10", "x", "a<b & c", "", "2024-01-02", "héllo"];

fn grow(rng: &mut ChaCha8Rng, t: &mut XTree, parent: u32, depth: usize) {
    for _ in 0..rng.random_range(1..=3) {
        let label = LABELS[rng.random_range(0..LABELS.len())];
        if depth < 3 && rng.random_bool(0.4) {
            let c = t.add_child(parent, label);
            grow(rng, t, c, depth + 1);
        } else {
            t.add_leaf(parent, label, TEXTS[rng.random_range(0..TEXTS.len())]);
        }
    }
}

/// A relation of up to 12 random single-tree tuples over labels a, b, c
/// with mixed string, decimal and empty leaves. Attributes are drawn from
/// the paths that actually occur.
pub fn random_tree_relation(rng: &mut ChaCha8Rng) -> XRelation {
    let trees: Vec<XTree> = (0..rng.random_range(0..=12))
        .map(|_| {
            let mut t = XTree::new("r");
            grow(rng, &mut t, 0, 1);
            t
        })
        .collect();
    let mut paths: Vec<Path> = prefix_close(trees.iter().flat_map(|t| t.paths())).into_iter().collect();
    paths.sort();
    if paths.is_empty() {
        paths.push(path("r"));
    }
    let mut attrs: Vec<Attr> = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let a = Attr::new(paths[rng.random_range(0..paths.len())].clone());
        if !attrs.contains(&a) {
            attrs.push(a);
        }
    }
    let tuples = trees
        .into_iter()
        .map(|t| XTuple {
            refs: attrs.iter().map(|a| t.find(&a.path).into_iter().map(|n| NodeRef::new(0, n)).collect()).collect(),
            forest: vec![Arc::new(t)],
        })
        .collect();
    XRelation::from_tuples(XRelationSchema::new(attrs, paths).unwrap(), tuples)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The desk-scale dataset written to a temporary directory.
pub struct Desk {
    pub dir: tempfile::TempDir,
    pub data: Dataset,
}

impl Desk {
    pub fn new(scale: f64, seed: u64) -> Desk {
        let dir = tempfile::tempdir().unwrap();
        let data = generate(&DatasetSpec::new(scale, seed));
        data.write(dir.path()).unwrap();
        Desk { dir, data }
    }

    pub fn topologies(&self, config: &MediatorConfig) -> Topologies {
        Topologies::build(self.dir.path(), config, Link::InProcess).unwrap()
    }
}

/// Sorts the members of every `<suppliers>` region so documents compare
/// independently of member order.
pub fn canonical_doc(doc: &str) -> String {
    let (Some(open), Some(close)) = (doc.find("<suppliers>"), doc.rfind("</suppliers>")) else {
        return doc.to_string();
    };
    let body = &doc[open + "<suppliers>".len()..close];
    let mut members: Vec<String> = body.split("<supplier>").filter(|m| !m.is_empty()).map(|m| format!("<supplier>{m}")).collect();
    members.sort();
    format!("{}<suppliers>{}{}", &doc[..open], members.concat(), &doc[close..])
}

pub fn canonical_docs<S: AsRef<str>>(docs: &[S]) -> Vec<String> {
    let mut v: Vec<String> = docs.iter().map(|d| canonical_doc(d.as_ref())).collect();
    v.sort();
    v
}

/// Nation/supplier query by brute force: every nation whose comment has
/// "iron", every supplier of it, every partsupp row of that supplier with
/// availqty above 45; nations without any such pair produce no document.
pub fn worked_oracle(d: &Dataset) -> Vec<String> {
    let mut out = Vec::new();
    for n in d.nations.iter().filter(|n| n.comment.contains("iron")) {
        let mut members = Vec::new();
        for s in d.suppliers.iter().filter(|s| s.nation == n.key) {
            for ps in d.partsupp.iter().filter(|ps| ps.supp == s.key && ps.availqty > 45) {
                members.push(format!(
                    "<supplier><name>{}</name></supplier><phone><phone>{}</phone></phone>\
                     <partsupp><partkey><partkey>{}</partkey></partkey><supplycost><supplycost>{}</supplycost></supplycost></partsupp>",
                    escape_text(&s.name),
                    escape_text(&s.phone),
                    ps.part,
                    ps.supplycost
                ));
            }
        }
        if !members.is_empty() {
            out.push(format!("<nation><name><name>{}</name></name><suppliers>{}</suppliers></nation>", escape_text(&n.name), members.concat()));
        }
    }
    canonical_docs(&out)
}

/// LINEITEM ⋈ ORDERS on orderkey below `n`, by brute force.
pub fn xjoin_oracle(d: &Dataset, n: u32) -> Vec<String> {
    let orders: BTreeMap<u32, &str> = d.orders.iter().map(|o| (o.key, o.comment.as_str())).collect();
    let docs: Vec<String> = d
        .lineitems
        .iter()
        .filter(|l| l.order < n)
        .filter_map(|l| {
            orders.get(&l.order).map(|oc| {
                format!("<result><lcom><comment>{}</comment></lcom><ocom><comment>{}</comment></ocom></result>", escape_text(&l.comment), escape_text(oc))
            })
        })
        .collect();
    canonical_docs(&docs)
}

/// The ORDERS selection below `n`, by brute force.
pub fn orders_oracle(d: &Dataset, n: u32) -> Vec<String> {
    let docs: Vec<String> = d
        .orders
        .iter()
        .filter(|o| o.key < n)
        .map(|o| format!("<result><O><comment>{}</comment></O></result>", escape_text(&o.comment)))
        .collect();
    canonical_docs(&docs)
}

/// Every collection of stores A1 to A6 as a relation binding each leaf
/// path, with the byte length of its XML text.
pub fn dataset_relations(dir: &std::path::Path) -> Vec<(String, Materialized, usize)> {
    let mut out = Vec::new();
    for id in ["A1", "A2", "A3", "A4", "A5", "A6"] {
        let store = dir.join(id);
        let adapter: Box<dyn Adapter> =
            if ["A1", "A2", "A3"].contains(&id) { Box::new(TabularAdapter::new(id, &store)) } else { Box::new(FileAdapter::new(id, &store)) };
        for c in adapter.descriptor().unwrap().collections {
            let root = c.root().unwrap().to_string();
            let q = AdapterQuery::new(format!("for $x in Collection(\"{}\")/{root} return $x", c.name));
            let events: Vec<XmlEvent> = adapter.execute(&q).unwrap().collect();
            let text: usize = documents(&events).unwrap().iter().map(String::len).sum();
            let leaves: Vec<Attr> =
                c.guide.iter().filter(|p| !c.guide.iter().any(|q| q.len() > p.len() && p.is_prefix_of(q))).map(|p| Attr::new(p.clone())).collect();
            let rel = x_source(events.into_iter(), c.guide.iter().cloned(), leaves).unwrap().materialize().unwrap();
            out.push((format!("{id}/{}", c.name), rel, text));
        }
    }
    out
}
