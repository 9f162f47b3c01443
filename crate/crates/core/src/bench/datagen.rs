//! Seeded TPC-style dataset: eight collections, some grouped into trees,
//! placed on seven adapter stores.
//!
//! | store | kind    | collections                       |
//! |-------|---------|-----------------------------------|
//! | A1    | tabular | PARTSUPP                          |
//! | A2    | tabular | CUSTOMER, LINEITEM                |
//! | A3    | tabular | ORDERS                            |
//! | A4    | xml     | SUPPLIER (first half of the keys) |
//! | A5    | xml     | PART                              |
//! | A6    | xml     | SUPPLIER (second half), NATION, REGION |
//! | A7    | tabular | copies of A1, A2 and A3           |

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::rngs::ChaCha8Rng;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};

use crate::adapters::tabular::write_table;
use crate::adapters::AdapterError;
use crate::xml::escape_text;

pub const NATION_NAMES: [&str; 25] = [
    "ALGERIA", "ARGENTINA", "BRAZIL", "CANADA", "EGYPT", "ETHIOPIA", "FRANCE", "GERMANY", "INDIA", "INDONESIA", "IRAN", "IRAQ", "JAPAN",
    "JORDAN", "KENYA", "MOROCCO", "MOZAMBIQUE", "PERU", "CHINA", "ROMANIA", "SAUDI ARABIA", "VIETNAM", "RUSSIA", "UNITED KINGDOM",
    "UNITED STATES",
];
const NATION_REGIONS: [u32; 25] = [0, 1, 1, 1, 4, 0, 3, 3, 2, 2, 4, 4, 2, 4, 0, 0, 0, 1, 2, 3, 4, 2, 3, 3, 1];
pub const REGION_NAMES: [&str; 5] = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"];

/// Comment vocabulary. No word contains the selection token.
const WORDS: [&str; 32] = [
    "blithely", "quickly", "furiously", "carefully", "regular", "pending", "final", "express", "special", "bold", "even", "silent", "fluffy",
    "daring", "deposits", "requests", "accounts", "packages", "theodolites", "pinto", "beans", "foxes", "asymptotes", "platelets", "sleep",
    "haggle", "nag", "wake", "cajole", "boost", "among", "above",
];

/// The word nation comments are selected on.
pub const TOKEN: &str = "iron";

/// Tuple counts per collection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Counts {
    pub nations: usize,
    pub regions: usize,
    pub suppliers: usize,
    pub parts: usize,
    pub partsupp: usize,
    pub customers: usize,
    pub orders: usize,
    pub lineitems: usize,
}

impl Counts {
    pub const DESK: Counts =
        Counts { nations: 25, regions: 5, suppliers: 100, parts: 200, partsupp: 800, customers: 150, orders: 1500, lineitems: 6000 };

    /// Desk counts times `scale`, rounded; at least one of each when `scale > 0`.
    pub fn scaled(scale: f64) -> Counts {
        let s = |n: usize| {
            let v = (n as f64 * scale.max(0.0)).round() as usize;
            if scale > 0.0 { v.max(1) } else { 0 }
        };
        let d = Counts::DESK;
        Counts {
            nations: s(d.nations),
            regions: s(d.regions),
            suppliers: s(d.suppliers),
            parts: s(d.parts),
            partsupp: s(d.partsupp),
            customers: s(d.customers),
            orders: s(d.orders),
            lineitems: s(d.lineitems),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub counts: Counts,
    pub seed: u64,
    /// Share of nations whose comment holds [`TOKEN`].
    pub iron_fraction: f64,
}

impl DatasetSpec {
    pub fn new(scale: f64, seed: u64) -> DatasetSpec {
        DatasetSpec { counts: Counts::scaled(scale), seed, iron_fraction: 0.2 }
    }

    /// Nations whose comment holds the token.
    pub fn iron_nations(&self) -> usize {
        (self.counts.nations as f64 * self.iron_fraction.clamp(0.0, 1.0)).round() as usize
    }
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::new(1.0, 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nation {
    pub key: u32,
    pub name: String,
    pub region: u32,
    pub comment: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub key: u32,
    pub name: String,
    pub comment: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Supplier {
    pub key: u32,
    pub name: String,
    pub address: String,
    pub nation: u32,
    pub phone: String,
    pub acctbal: String,
    pub comment: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Part {
    pub key: u32,
    pub name: String,
    pub mfgr: String,
    pub brand: String,
    pub size: u32,
    pub retailprice: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartSupp {
    pub part: u32,
    pub supp: u32,
    pub availqty: u32,
    pub supplycost: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Customer {
    pub key: u32,
    pub name: String,
    pub nation: u32,
    pub phone: String,
    pub acctbal: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Order {
    pub key: u32,
    pub cust: u32,
    pub status: String,
    pub totalprice: String,
    pub orderdate: String,
    pub comment: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineItem {
    pub order: u32,
    pub part: u32,
    pub supp: u32,
    pub linenumber: u32,
    pub quantity: u32,
    pub comment: String,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dataset {
    pub nations: Vec<Nation>,
    pub regions: Vec<Region>,
    pub suppliers: Vec<Supplier>,
    pub parts: Vec<Part>,
    pub partsupp: Vec<PartSupp>,
    pub customers: Vec<Customer>,
    pub orders: Vec<Order>,
    pub lineitems: Vec<LineItem>,
}

fn comment(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn money(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> String {
    let cents = rng.random_range(lo * 100..=hi * 100);
    format!("{}.{:02}", cents / 100, cents % 100)
}

fn phone(rng: &mut ChaCha8Rng, nation: u32) -> String {
    format!("{}-{}-{}-{}", nation + 10, rng.random_range(100..1000), rng.random_range(100..1000), rng.random_range(1000..10000))
}

/// Key in `1..=n`, or 0 when the referenced collection is empty.
fn key(rng: &mut ChaCha8Rng, n: usize) -> u32 {
    if n == 0 { 0 } else { rng.random_range(1..=n as u32) }
}

/// Deterministic in `spec`: same spec, same dataset.
pub fn generate(spec: &DatasetSpec) -> Dataset {
    let c = spec.counts;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut iron: Vec<bool> = (0..c.nations).map(|i| i < spec.iron_nations()).collect();
    iron.shuffle(&mut rng);
    let nations = (0..c.nations)
        .map(|i| {
            let mut words: Vec<String> = comment(&mut rng, 6).split(' ').map(str::to_string).collect();
            if iron[i] {
                let at = rng.random_range(0..=words.len());
                words.insert(at, TOKEN.to_string());
            }
            let name = NATION_NAMES.get(i).map_or_else(|| format!("NATION {i}"), |n| n.to_string());
            Nation { key: i as u32, name, region: NATION_REGIONS[i % 25] % c.regions.max(1) as u32, comment: words.join(" ") }
        })
        .collect();
    let regions = (0..c.regions)
        .map(|i| Region {
            key: i as u32,
            name: REGION_NAMES.get(i).map_or_else(|| format!("REGION {i}"), |n| n.to_string()),
            comment: comment(&mut rng, 5),
        })
        .collect();
    let suppliers = (1..=c.suppliers as u32)
        .map(|k| {
            let nation = if c.nations == 0 { 0 } else { rng.random_range(0..c.nations as u32) };
            Supplier {
                key: k,
                name: format!("Supplier#{k:09}"),
                address: format!("{} {}", rng.random_range(1..1000), comment(&mut rng, 1)),
                nation,
                phone: phone(&mut rng, nation),
                acctbal: money(&mut rng, 0, 9999),
                comment: comment(&mut rng, 5),
            }
        })
        .collect();
    let parts = (1..=c.parts as u32)
        .map(|k| {
            let m = rng.random_range(1..=5);
            Part {
                key: k,
                name: comment(&mut rng, 3),
                mfgr: format!("Manufacturer#{m}"),
                brand: format!("Brand#{m}{}", rng.random_range(1..=5)),
                size: rng.random_range(1..=50),
                retailprice: money(&mut rng, 900, 2000),
            }
        })
        .collect();
    // TPC spreads each part over suppliers spaced a quarter of the key range apart.
    let s = c.suppliers.max(1);
    let partsupp = (0..c.partsupp)
        .map(|j| {
            let p = j % c.parts.max(1);
            let i = j / c.parts.max(1);
            let supp = if c.suppliers == 0 { 0 } else { ((p + i * (s / 4 + p / s)) % s + 1) as u32 };
            PartSupp { part: p as u32 + 1, supp, availqty: rng.random_range(1..=100), supplycost: money(&mut rng, 1, 1000) }
        })
        .collect();
    let customers = (1..=c.customers as u32)
        .map(|k| {
            let nation = if c.nations == 0 { 0 } else { rng.random_range(0..c.nations as u32) };
            Customer { key: k, name: format!("Customer#{k:09}"), nation, phone: phone(&mut rng, nation), acctbal: money(&mut rng, 0, 9999) }
        })
        .collect();
    let orders: Vec<Order> = (0..c.orders as u32)
        .map(|k| Order {
            key: k,
            cust: key(&mut rng, c.customers),
            status: ["F", "O", "P"][rng.random_range(0..3)].to_string(),
            totalprice: money(&mut rng, 1000, 400_000),
            orderdate: format!("{}-{:02}-{:02}", rng.random_range(1992..=1998), rng.random_range(1..=12), rng.random_range(1..=28)),
            comment: comment(&mut rng, 4),
        })
        .collect();
    // One to seven lines per order, all lines placed.
    let mut per_order = vec![0usize; c.orders];
    if c.orders > 0 {
        for n in per_order.iter_mut().take(c.lineitems) {
            *n = 1;
        }
        let mut left = c.lineitems.saturating_sub(c.orders);
        while left > 0 {
            let o = rng.random_range(0..c.orders);
            if per_order[o] < 7 || per_order.iter().all(|n| *n >= 7) {
                per_order[o] += 1;
                left -= 1;
            }
        }
    }
    let mut lineitems = Vec::with_capacity(c.lineitems);
    for (o, n) in per_order.iter().enumerate() {
        for l in 1..=*n as u32 {
            lineitems.push(LineItem {
                order: o as u32,
                part: key(&mut rng, c.parts),
                supp: key(&mut rng, c.suppliers),
                linenumber: l,
                quantity: rng.random_range(1..=50),
                comment: comment(&mut rng, 3),
            });
        }
    }
    Dataset { nations, regions, suppliers, parts, partsupp, customers, orders, lineitems }
}

fn el(out: &mut String, tag: &str, text: &str) {
    let _ = write!(out, "<{tag}>{}</{tag}>", escape_text(text));
}

impl Supplier {
    pub fn to_xml(&self) -> String {
        let mut s = String::from("<supplier><id>");
        el(&mut s, "suppkey", &self.key.to_string());
        s.push_str("</id>");
        el(&mut s, "name", &self.name);
        el(&mut s, "address", &self.address);
        s.push_str("<contact>");
        el(&mut s, "phone", &self.phone);
        s.push_str("<localisation>");
        el(&mut s, "nationkey", &self.nation.to_string());
        s.push_str("</localisation></contact>");
        el(&mut s, "acctbal", &self.acctbal);
        el(&mut s, "comment", &self.comment);
        s.push_str("</supplier>");
        s
    }
}

impl Nation {
    pub fn to_xml(&self) -> String {
        let mut s = String::from("<nation>");
        el(&mut s, "nationkey", &self.key.to_string());
        el(&mut s, "name", &self.name);
        el(&mut s, "regionkey", &self.region.to_string());
        el(&mut s, "comment", &self.comment);
        s.push_str("</nation>");
        s
    }
}

impl Region {
    pub fn to_xml(&self) -> String {
        let mut s = String::from("<region>");
        el(&mut s, "regionkey", &self.key.to_string());
        el(&mut s, "name", &self.name);
        el(&mut s, "comment", &self.comment);
        s.push_str("</region>");
        s
    }
}

impl Part {
    pub fn to_xml(&self) -> String {
        let mut s = String::from("<part>");
        el(&mut s, "partkey", &self.key.to_string());
        el(&mut s, "name", &self.name);
        s.push_str("<maker>");
        el(&mut s, "mfgr", &self.mfgr);
        el(&mut s, "brand", &self.brand);
        s.push_str("</maker>");
        el(&mut s, "size", &self.size.to_string());
        el(&mut s, "retailprice", &self.retailprice);
        s.push_str("</part>");
        s
    }
}

fn write_docs(file: &Path, docs: impl Iterator<Item = String>) -> Result<(), AdapterError> {
    let mut text = String::new();
    for d in docs {
        text.push_str(&d);
        text.push('\n');
    }
    fs::write(file, text).map_err(|e| AdapterError::Store(format!("{}: {e}", file.display())))
}

impl Dataset {
    /// Suppliers stored on A4; the rest live on A6.
    pub fn a4_suppliers(&self) -> usize {
        self.suppliers.len().div_ceil(2)
    }

    fn write_relational(&self, dir: &Path, tables: &[&str]) -> Result<(), AdapterError> {
        for t in tables {
            let file = dir.join(format!("{t}.tbl"));
            match *t {
                "PARTSUPP" => write_table(
                    &file,
                    &["partkey", "suppkey", "availqty", "supplycost"],
                    self.partsupp.iter().map(|r| vec![r.part.to_string(), r.supp.to_string(), r.availqty.to_string(), r.supplycost.clone()]),
                )?,
                "CUSTOMER" => write_table(
                    &file,
                    &["custkey", "name", "nationkey", "phone", "acctbal"],
                    self.customers.iter().map(|r| vec![r.key.to_string(), r.name.clone(), r.nation.to_string(), r.phone.clone(), r.acctbal.clone()]),
                )?,
                "LINEITEM" => write_table(
                    &file,
                    &["orderkey", "partkey", "suppkey", "linenumber", "quantity", "comment"],
                    self.lineitems.iter().map(|r| {
                        vec![
                            r.order.to_string(),
                            r.part.to_string(),
                            r.supp.to_string(),
                            r.linenumber.to_string(),
                            r.quantity.to_string(),
                            r.comment.clone(),
                        ]
                    }),
                )?,
                "ORDERS" => write_table(
                    &file,
                    &["orderkey", "custkey", "orderstatus", "totalprice", "orderdate", "comment"],
                    self.orders.iter().map(|r| {
                        vec![r.key.to_string(), r.cust.to_string(), r.status.clone(), r.totalprice.clone(), r.orderdate.clone(), r.comment.clone()]
                    }),
                )?,
                other => unreachable!("no table {other}"),
            }
        }
        Ok(())
    }

    /// Write the seven stores under `dir`, one subdirectory per adapter.
    pub fn write(&self, dir: &Path) -> Result<(), AdapterError> {
        for a in ["A1", "A2", "A3", "A4", "A5", "A6", "A7"] {
            fs::create_dir_all(dir.join(a))?;
        }
        self.write_relational(&dir.join("A1"), &["PARTSUPP"])?;
        self.write_relational(&dir.join("A2"), &["CUSTOMER", "LINEITEM"])?;
        self.write_relational(&dir.join("A3"), &["ORDERS"])?;
        self.write_relational(&dir.join("A7"), &["PARTSUPP", "CUSTOMER", "LINEITEM", "ORDERS"])?;
        let (a4, a6) = self.suppliers.split_at(self.a4_suppliers());
        write_docs(&dir.join("A4").join("SUPPLIER.xml"), a4.iter().map(Supplier::to_xml))?;
        write_docs(&dir.join("A5").join("PART.xml"), self.parts.iter().map(Part::to_xml))?;
        write_docs(&dir.join("A6").join("SUPPLIER.xml"), a6.iter().map(Supplier::to_xml))?;
        write_docs(&dir.join("A6").join("NATION.xml"), self.nations.iter().map(Nation::to_xml))?;
        write_docs(&dir.join("A6").join("REGION.xml"), self.regions.iter().map(Region::to_xml))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_counts_and_token_share() {
        let spec = DatasetSpec::default();
        let d = generate(&spec);
        assert_eq!(d.nations.len(), 25);
        assert_eq!(d.lineitems.len(), 6000);
        assert_eq!(d.partsupp.len(), 800);
        assert_eq!(d.nations.iter().filter(|n| n.comment.contains(TOKEN)).count(), 5);
        assert!(WORDS.iter().all(|w| !w.contains(TOKEN)));
        let mut lines = vec![0; d.orders.len()];
        for l in &d.lineitems {
            lines[l.order as usize] += 1;
        }
        assert!(lines.iter().all(|n| (1..=7).contains(n)));
        assert!(d.suppliers.iter().all(|s| (s.nation as usize) < d.nations.len()));
        assert!(d.partsupp.iter().all(|p| (1..=100).contains(&p.supp)));
    }

    #[test]
    fn same_seed_same_bytes() {
        let write = |seed| {
            let dir = tempfile::tempdir().unwrap();
            generate(&DatasetSpec::new(0.2, seed)).write(dir.path()).unwrap();
            let mut files = Vec::new();
            for a in fs::read_dir(dir.path()).unwrap() {
                for f in fs::read_dir(a.unwrap().path()).unwrap() {
                    let p = f.unwrap().path();
                    files.push((p.strip_prefix(dir.path()).unwrap().to_path_buf(), fs::read(&p).unwrap()));
                }
            }
            files.sort();
            files
        };
        assert_eq!(write(7), write(7));
        assert_ne!(write(7), write(8));
    }

    #[test]
    fn scale_zero_is_empty() {
        let d = generate(&DatasetSpec::new(0.0, 1));
        assert_eq!(d, Dataset::default());
    }
}
