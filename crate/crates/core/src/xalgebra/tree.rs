use std::collections::HashMap;

use super::path::Path;
use super::AlgebraError;
use crate::xml::{escape_text, XmlEvent};

pub type NodeId = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub label: String,
    pub text: Option<String>,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
}

/// An ordered labeled tree stored as an arena. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XTree {
    nodes: Vec<Node>,
}

impl XTree {
    pub fn new(root_label: &str) -> XTree {
        XTree { nodes: vec![Node { label: root_label.to_string(), text: None, children: Vec::new(), parent: None }] }
    }

    /// A single-node tree carrying a text value.
    pub fn leaf(label: &str, text: &str) -> XTree {
        let mut t = XTree::new(label);
        t.set_text(0, text);
        t
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, id: NodeId) -> bool {
        (id as usize) < self.nodes.len()
    }

    pub fn root_label(&self) -> &str {
        &self.nodes[0].label
    }

    pub fn add_child(&mut self, parent: NodeId, label: &str) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node { label: label.to_string(), text: None, children: Vec::new(), parent: Some(parent) });
        self.nodes[parent as usize].children.push(id);
        id
    }

    pub fn add_leaf(&mut self, parent: NodeId, label: &str, text: &str) -> NodeId {
        let id = self.add_child(parent, label);
        self.set_text(id, text);
        id
    }

    /// Empty text is stored as no text.
    pub fn set_text(&mut self, id: NodeId, text: &str) {
        self.nodes[id as usize].text = if text.is_empty() { None } else { Some(text.to_string()) };
    }

    pub fn append_text(&mut self, id: NodeId, text: &str) {
        let node = &mut self.nodes[id as usize];
        match &mut node.text {
            Some(t) => t.push_str(text),
            None if !text.is_empty() => node.text = Some(text.to_string()),
            None => {}
        }
    }

    pub fn path_of(&self, id: NodeId) -> Path {
        let mut labels = Vec::new();
        let mut cur = Some(id);
        while let Some(n) = cur {
            labels.push(self.nodes[n as usize].label.as_str());
            cur = self.nodes[n as usize].parent;
        }
        labels.reverse();
        Path::from_steps(&labels).expect("tree labels are valid steps")
    }

    /// Preorder node ids of the subtree rooted at `id`.
    pub fn preorder(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n as usize].children.iter().rev());
        }
        out
    }

    /// Nodes whose root-to-node path equals `p`, in document order.
    pub fn find(&self, p: &Path) -> Vec<NodeId> {
        let steps: Vec<&str> = p.steps().collect();
        if steps[0] != self.root_label() {
            return Vec::new();
        }
        let mut frontier = vec![0];
        for step in &steps[1..] {
            frontier = frontier
                .iter()
                .flat_map(|n| self.nodes[*n as usize].children.iter().copied())
                .filter(|c| self.nodes[*c as usize].label == *step)
                .collect();
        }
        frontier
    }

    /// XPath string value: the node's text, or the concatenated text of its descendants.
    pub fn string_value(&self, id: NodeId) -> String {
        let node = &self.nodes[id as usize];
        if node.children.is_empty() {
            return node.text.clone().unwrap_or_default();
        }
        let mut out = String::new();
        for n in self.preorder(id) {
            if let Some(t) = &self.nodes[n as usize].text {
                out.push_str(t);
            }
        }
        out
    }

    pub fn write_canonical(&self, id: NodeId, out: &mut String) {
        let node = &self.nodes[id as usize];
        out.push('<');
        out.push_str(&node.label);
        out.push('>');
        if let Some(t) = &node.text {
            out.push_str(&escape_text(t));
        }
        for c in &node.children {
            self.write_canonical(*c, out);
        }
        out.push_str("</");
        out.push_str(&node.label);
        out.push('>');
    }

    pub fn canonical(&self, id: NodeId) -> String {
        let mut s = String::new();
        self.write_canonical(id, &mut s);
        s
    }

    pub fn write_events(&self, id: NodeId, out: &mut Vec<XmlEvent>) {
        let node = &self.nodes[id as usize];
        out.push(XmlEvent::Open(node.label.clone()));
        if let Some(t) = &node.text {
            out.push(XmlEvent::Text(t.clone()));
        }
        for c in &node.children {
            self.write_events(*c, out);
        }
        out.push(XmlEvent::Close);
    }

    /// Every root-to-node path, in first-appearance preorder.
    pub fn paths(&self) -> Vec<Path> {
        let mut seen = indexmap::IndexSet::new();
        for n in self.preorder(0) {
            seen.insert(self.path_of(n));
        }
        seen.into_iter().collect()
    }

    /// Copy the subtree at `src_id` of `src` under `parent` in `self`,
    /// recording the id mapping.
    pub fn graft(&mut self, parent: NodeId, src: &XTree, src_id: NodeId, map: &mut HashMap<NodeId, NodeId>) -> NodeId {
        let node = src.node(src_id);
        let id = self.add_child(parent, &node.label);
        self.nodes[id as usize].text = node.text.clone();
        map.insert(src_id, id);
        for c in &node.children {
            self.graft(id, src, *c, map);
        }
        id
    }

    /// Keep only the nodes for which `keep` is true (the root is always kept
    /// when anything is). Children of dropped nodes are dropped with them.
    /// Returns the new tree and the old-to-new id map, or `None` when the root is dropped.
    pub fn retain(&self, keep: &[bool]) -> Option<(XTree, HashMap<NodeId, NodeId>)> {
        if !keep[0] {
            return None;
        }
        let mut out = XTree::new(&self.nodes[0].label);
        out.nodes[0].text = self.nodes[0].text.clone();
        let mut map = HashMap::new();
        map.insert(0, 0);
        let mut stack = vec![0 as NodeId];
        while let Some(n) = stack.pop() {
            let new_parent = map[&n];
            for c in &self.nodes[n as usize].children {
                if keep[*c as usize] {
                    let id = out.add_child(new_parent, &self.nodes[*c as usize].label);
                    out.nodes[id as usize].text = self.nodes[*c as usize].text.clone();
                    map.insert(*c, id);
                }
            }
            // Children were appended in order; visit them in reverse so the stack pops them in order.
            for c in self.nodes[n as usize].children.iter().rev() {
                if keep[*c as usize] {
                    stack.push(*c);
                }
            }
        }
        Some((out, map))
    }

    /// Check structural invariants: consistent parent links, leaves carry text.
    pub fn validate(&self) -> Result<(), AlgebraError> {
        if self.nodes[0].parent.is_some() {
            return Err(AlgebraError::Invariant("root has a parent".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.text.is_some() && !n.children.is_empty() {
                return Err(AlgebraError::Invariant(format!("node {i} has both text and children")));
            }
            for c in &n.children {
                if self.nodes.get(*c as usize).and_then(|c| c.parent) != Some(i as NodeId) {
                    return Err(AlgebraError::Invariant(format!("child link {i}->{c} inconsistent")));
                }
            }
            if i > 0 {
                let p = n.parent.ok_or_else(|| AlgebraError::Invariant(format!("node {i} detached")))?;
                if !self.nodes[p as usize].children.contains(&(i as NodeId)) {
                    return Err(AlgebraError::Invariant(format!("parent link of {i} inconsistent")));
                }
            }
        }
        Ok(())
    }
}

/// Incremental tree construction from open/text/close events.
#[derive(Debug)]
pub struct TreeBuilder {
    tree: Option<XTree>,
    stack: Vec<NodeId>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        TreeBuilder { tree: None, stack: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn open(&mut self, label: &str) {
        match &mut self.tree {
            None => {
                self.tree = Some(XTree::new(label));
                self.stack.push(0);
            }
            Some(t) => {
                let parent = *self.stack.last().expect("open inside a finished tree");
                let id = t.add_child(parent, label);
                self.stack.push(id);
            }
        }
    }

    pub fn text(&mut self, text: &str) -> Result<(), AlgebraError> {
        let (Some(t), Some(cur)) = (&mut self.tree, self.stack.last()) else {
            return Err(AlgebraError::Stream("text outside of an element".into()));
        };
        if text.trim().is_empty() {
            return Ok(());
        }
        if !t.node(*cur).children.is_empty() {
            return Err(AlgebraError::Stream("mixed content is not supported".into()));
        }
        t.append_text(*cur, text);
        Ok(())
    }

    /// Close the current element; returns the finished tree when the root closes.
    pub fn close(&mut self) -> Result<Option<XTree>, AlgebraError> {
        let closed = self.stack.pop().ok_or_else(|| AlgebraError::Stream("close without open".into()))?;
        if let Some(t) = &self.tree {
            if let Some(parent) = t.node(closed).parent {
                // Text before a child element makes the parent mixed content.
                if t.node(parent).text.is_some() {
                    return Err(AlgebraError::Stream("mixed content is not supported".into()));
                }
            }
        }
        if self.stack.is_empty() {
            Ok(self.tree.take())
        } else {
            Ok(None)
        }
    }
}

impl Default for TreeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// Build trees from a complete event slice. Boundaries are ignored.
pub fn trees_from_events(events: &[XmlEvent]) -> Result<Vec<XTree>, AlgebraError> {
    let mut b = TreeBuilder::new();
    let mut out = Vec::new();
    for ev in events {
        match ev {
            XmlEvent::Open(l) => b.open(l),
            XmlEvent::Text(t) => b.text(t)?,
            XmlEvent::Close => {
                if let Some(t) = b.close()? {
                    out.push(t);
                }
            }
            XmlEvent::DocumentBoundary => {}
            XmlEvent::Error(m) => return Err(AlgebraError::Stream(m.clone())),
        }
    }
    if b.depth() != 0 {
        return Err(AlgebraError::Stream("unterminated element".into()));
    }
    Ok(out)
}

pub fn parse_trees(text: &str) -> Result<Vec<XTree>, AlgebraError> {
    let events = crate::xml::parse_events(text).map_err(|e| AlgebraError::Stream(e.to_string()))?;
    trees_from_events(&events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xalgebra::path::path;

    fn sample() -> XTree {
        parse_trees("<a><b>1</b><c><d>x</d><d>y</d></c></a>").unwrap().remove(0)
    }

    #[test]
    fn find_and_paths() {
        let t = sample();
        assert_eq!(t.find(&path("a/c/d")).len(), 2);
        assert_eq!(t.find(&path("z")).len(), 0);
        assert_eq!(t.paths(), vec![path("a"), path("a/b"), path("a/c"), path("a/c/d")]);
        assert_eq!(t.string_value(t.find(&path("a/c"))[0]), "xy");
        assert_eq!(t.canonical(0), "<a><b>1</b><c><d>x</d><d>y</d></c></a>");
        t.validate().unwrap();
    }

    #[test]
    fn retain_drops_subtrees_of_removed_nodes() {
        let t = sample();
        let mut keep = vec![true; t.len()];
        keep[t.find(&path("a/c"))[0] as usize] = false;
        let (r, map) = t.retain(&keep).unwrap();
        assert_eq!(r.canonical(0), "<a><b>1</b></a>");
        assert_eq!(map.len(), 2);
        r.validate().unwrap();
    }

    #[test]
    fn mixed_content_is_an_error() {
        assert!(parse_trees("<a>x<b>1</b></a>").is_err());
        assert!(parse_trees("<a><b>1</b>x</a>").is_err());
    }
}
