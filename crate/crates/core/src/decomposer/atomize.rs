use std::collections::HashMap;
use std::fmt;

use super::DecomposeError;
use crate::frontend::{Canonical, Cond, ReconNode, ReturnItem, SimpleSource, VarPath};
use crate::xalgebra::aggregate::AggregateFn;

/// A query over one global collection: its restriction and the paths the
/// rest of the plan needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomicQuery {
    pub id: String,
    pub var: String,
    /// Collection name, or `*`.
    pub collection: String,
    /// Steps from the document root to the node the variable binds.
    pub root: Vec<String>,
    /// Restriction paths first, then return paths.
    pub used: Vec<VarPath>,
    pub restriction: Option<Cond>,
    pub returns: Vec<VarPath>,
    /// The simple query this atom came from.
    pub query: String,
}

impl AtomicQuery {
    /// Root-relative path text of a variable path of this atom.
    pub fn full_steps(&self, p: &VarPath) -> Vec<String> {
        self.root.iter().chain(&p.steps).cloned().collect()
    }

    pub fn used_paths(&self) -> Vec<String> {
        self.used.iter().map(|p| self.full_steps(p).join("/")).collect()
    }
}

impl fmt::Display for AtomicQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src = crate::frontend::ForSource::Collection { name: self.collection.clone(), steps: self.root.clone() };
        write!(f, "for ${} in {src}", self.var)?;
        if let Some(r) = &self.restriction {
            write!(f, " where {r}")?;
        }
        let ret: Vec<String> = self.returns.iter().map(|p| p.to_string()).collect();
        write!(f, " return ({})", ret.join(", "))
    }
}

/// One nesting level of the result: the variables of one FLWR.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestLevel {
    pub query: String,
    pub parent: Option<String>,
    pub vars: Vec<String>,
}

/// What remains for the mediator once the atoms are shipped.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct GlobalQuery {
    /// `(variable, atom id)` in atom order.
    pub fors: Vec<(String, String)>,
    /// Conditions spanning two atoms.
    pub joins: Vec<Cond>,
    pub nest: Vec<NestLevel>,
    /// Template paths grouped like the result nesting.
    pub ret: Vec<ReturnItem>,
    pub aggregates: Vec<(AggregateFn, VarPath)>,
}

impl GlobalQuery {
    pub fn atom_of(&self, var: &str) -> Option<&str> {
        self.fors.iter().find(|(v, _)| v == var).map(|(_, a)| a.as_str())
    }

    /// Whether the result has nested FLWR levels.
    pub fn is_nested(&self) -> bool {
        self.nest.len() > 1
    }
}

impl fmt::Display for GlobalQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fors: Vec<String> = self.fors.iter().map(|(v, a)| format!("${v} in {a}")).collect();
        write!(f, "for {}", fors.join(", "))?;
        if !self.joins.is_empty() {
            let joins: Vec<String> = self.joins.iter().map(|c| c.to_string()).collect();
            write!(f, " where {}", joins.join(" and "))?;
        }
        let ret: Vec<String> = self.ret.iter().map(|r| r.to_string()).collect();
        write!(f, " return {}", ret.join(", "))
    }
}

/// Maps a collection name to the root element of its documents, for
/// `collection("NAME")` bindings without a path.
pub type RootResolver<'a> = &'a dyn Fn(&str) -> Option<String>;

/// Root element for a bare collection binding when nothing better is known.
pub fn default_root(name: &str) -> Option<String> {
    (name != "*").then(|| name.to_lowercase())
}

fn push_unique(v: &mut Vec<VarPath>, p: &VarPath) {
    if !v.contains(p) {
        v.push(p.clone());
    }
}

/// Split canonical simple queries into one atomic query per collection
/// variable plus the global join/nest query.
pub fn atomize(c: &Canonical, resolve_root: RootResolver) -> Result<(Vec<AtomicQuery>, GlobalQuery), DecomposeError> {
    let mut atoms: Vec<AtomicQuery> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut global = GlobalQuery::default();
    for s in &c.simple {
        let mut level_vars = Vec::new();
        for f in &s.fors {
            let SimpleSource::Collection { name, steps } = &f.source else { continue };
            let root = if steps.is_empty() {
                vec![resolve_root(name).ok_or_else(|| {
                    DecomposeError::Unsupported(format!("cannot tell the root element of collection {name:?}"))
                })?]
            } else {
                steps.clone()
            };
            let id = format!("t{}", atoms.len() + 1);
            index.insert(f.var.clone(), atoms.len());
            global.fors.push((f.var.clone(), id.clone()));
            level_vars.push(f.var.clone());
            atoms.push(AtomicQuery {
                id,
                var: f.var.clone(),
                collection: name.clone(),
                root,
                used: Vec::new(),
                restriction: None,
                returns: Vec::new(),
                query: s.id.clone(),
            });
        }
        global.nest.push(NestLevel { query: s.id.clone(), parent: s.parent.clone(), vars: level_vars });
    }
    let mut restrictions: Vec<Vec<Cond>> = vec![Vec::new(); atoms.len()];
    for s in &c.simple {
        let Some(w) = &s.where_ else { continue };
        for atom in w.conjuncts() {
            let vars = atom.vars();
            match vars.len() {
                0 => return Err(DecomposeError::Unsupported(format!("condition without a variable: {atom}"))),
                1 => {
                    let i = *index.get(vars[0]).ok_or_else(|| DecomposeError::Unsupported(format!("unbound ${}", vars[0])))?;
                    restrictions[i].push(atom.clone());
                }
                2 => {
                    if !global.joins.contains(atom) {
                        global.joins.push(atom.clone());
                    }
                }
                _ => return Err(DecomposeError::Unsupported(format!("condition over more than two collections: {atom}"))),
            }
        }
    }
    for (a, r) in atoms.iter_mut().zip(restrictions) {
        a.restriction = Cond::and(r);
        if let Some(r) = &a.restriction {
            for p in r.paths() {
                push_unique(&mut a.used, p);
            }
        }
    }
    for s in &c.simple {
        for p in crate::frontend::flat_paths(&s.ret) {
            if let Some(&i) = index.get(&p.var) {
                push_unique(&mut atoms[i].returns, p);
                push_unique(&mut atoms[i].used, p);
            }
        }
    }
    global.ret = template_nest(c);
    collect_aggregates(&c.recon.nodes, &mut global.aggregates);
    Ok((atoms, global))
}

/// Each simple query's template groups spliced into the innermost group of its parent's.
fn template_nest(c: &Canonical) -> Vec<ReturnItem> {
    fn innermost(items: &mut Vec<ReturnItem>) -> &mut Vec<ReturnItem> {
        match items.last() {
            Some(ReturnItem::Group(_)) => match items.last_mut() {
                Some(ReturnItem::Group(g)) => innermost(g),
                _ => unreachable!(),
            },
            _ => items,
        }
    }
    fn build(c: &Canonical, id: &str) -> Vec<ReturnItem> {
        let s = c.simple.iter().find(|s| s.id == id).expect("simple query exists");
        let mut items = s.template_ret.clone();
        for child in c.simple.iter().filter(|k| k.parent.as_deref() == Some(id)) {
            let inner = build(c, &child.id);
            innermost(&mut items).extend(inner);
        }
        items
    }
    match c.simple.first() {
        Some(s) => build(c, &s.id),
        None => Vec::new(),
    }
}

fn collect_aggregates(nodes: &[ReconNode], out: &mut Vec<(AggregateFn, VarPath)>) {
    for n in nodes {
        match n {
            ReconNode::Aggregate { fun, path } => out.push((*fun, path.clone())),
            ReconNode::Element { children, .. } | ReconNode::Nested { children, .. } => collect_aggregates(children, out),
            ReconNode::Text(_) | ReconNode::Placeholder(_) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{canonize, normalize, parse, NATION_SUPPLIERS_QUERY};

    fn run(text: &str) -> (Vec<AtomicQuery>, GlobalQuery) {
        let c = canonize(&normalize(&parse(text).unwrap()).unwrap()).unwrap();
        atomize(&c, &default_root).unwrap()
    }

    #[test]
    fn worked_query_atoms() {
        let (atoms, global) = run(NATION_SUPPLIERS_QUERY);
        let text: Vec<String> = atoms.iter().map(|a| format!("{} = {a}", a.id)).collect();
        assert_eq!(
            text,
            [
                "t1 = for $n in Collection(\"*\")/nation where contains($n/comment, \"iron\") return ($n/nationkey, $n/name)",
                "t2 = for $s in Collection(\"*\")/supplier return ($s/contact/localisation/nationkey, $s/id/suppkey, $s/name, $s/contact/phone)",
                "t3 = for $ps in Collection(\"*\")/partsupp where $ps/availqty > 45 return ($ps/suppkey, $ps/partkey, $ps/supplycost)",
            ]
        );
        assert_eq!(
            global.to_string(),
            "for $n in t1, $s in t2, $ps in t3 where $s/id/suppkey = $ps/suppkey and $s/contact/localisation/nationkey = $n/nationkey \
             return ($n/name, ($s/name, $s/contact/phone, ($ps/partkey, $ps/supplycost)))"
        );
        assert_eq!(atoms[0].used_paths(), ["nation/comment", "nation/nationkey", "nation/name"]);
        assert_eq!(global.nest.len(), 2);
        assert_eq!(global.nest[1].vars, ["s", "ps"]);
    }

    #[test]
    fn single_collection_has_empty_global() {
        let (atoms, global) = run("for $O in collection(\"ORDERS\") where $O/orderkey < 10 return <result><O>$O/comment</O></result>");
        assert_eq!(atoms.len(), 1);
        assert_eq!(atoms[0].root, ["orders"]);
        assert_eq!(atoms[0].to_string(), "for $O in Collection(\"ORDERS\")/orders where $O/orderkey < 10 return ($O/comment)");
        assert!(global.joins.is_empty());
        assert!(!global.is_nested());
    }

    #[test]
    fn self_join_gives_two_atoms_on_one_collection() {
        let (atoms, global) =
            run("for $a in Collection(\"C\")/c, $b in Collection(\"C\")/c where $a/k = $b/j and $a/x > 1 return <p>$a/x $b/x</p>");
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].collection, atoms[1].collection);
        assert!(atoms[1].restriction.is_none());
        assert_eq!(global.joins.len(), 1);
    }

    #[test]
    fn three_collection_atom_is_unsupported() {
        let text = "for $a in Collection(\"A\")/a, $b in Collection(\"B\")/b, $c in Collection(\"C\")/c \
                    where ($a/k = $b/k or $b/k = $c/k) return $a";
        let c = canonize(&normalize(&parse(text).unwrap()).unwrap()).unwrap();
        assert!(matches!(atomize(&c, &default_root), Err(DecomposeError::Unsupported(_))));
    }
}
