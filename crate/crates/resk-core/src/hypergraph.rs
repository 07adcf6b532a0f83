//! The dual hypergraph of a query: atoms are vertices, each variable is the
//! hyperedge of all atoms containing it. Reachability questions run as BFS
//! over the bipartite atom/variable incidence graph with banned variables
//! deleted.

use crate::error::Error;
use crate::query::Query;
use crate::Result;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct DualHypergraph {
    pub vertices: Vec<String>,
    /// variable -> indexes into `vertices`
    pub edges: BTreeMap<String, BTreeSet<usize>>,
}

/// An alternating atom/variable sequence: `atoms[i]` and `atoms[i+1]` both
/// contain `vars[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub atoms: Vec<String>,
    pub vars: Vec<String>,
}

pub fn build(q: &Query) -> DualHypergraph {
    let vertices: Vec<String> = q.atoms.iter().map(|a| a.relation.clone()).collect();
    let mut edges: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (i, a) in q.atoms.iter().enumerate() {
        for v in a.vars() {
            edges.entry(v.to_string()).or_default().insert(i);
        }
    }
    DualHypergraph { vertices, edges }
}

impl DualHypergraph {
    pub fn vertex(&self, name: &str) -> Result<usize> {
        self.vertices
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownAtom(name.to_string()))
    }

    /// BFS from `from`, ignoring every hyperedge in `banned_vars`.
    /// Returns the set of reachable vertex indexes (including `from`).
    pub fn reachable_avoiding(&self, from: usize, banned_vars: &BTreeSet<&str>) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        let mut used_edges: BTreeSet<&str> = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(from);
        queue.push_back(from);
        while let Some(v) = queue.pop_front() {
            for (var, members) in &self.edges {
                if banned_vars.contains(var.as_str()) || used_edges.contains(var.as_str()) {
                    continue;
                }
                if members.contains(&v) {
                    used_edges.insert(var);
                    for &m in members {
                        if seen.insert(m) {
                            queue.push_back(m);
                        }
                    }
                }
            }
        }
        seen
    }

    /// True iff a path from `from` to `to` exists that uses no hyperedge in
    /// `banned_vars`.
    pub fn connected_avoiding(
        &self,
        from: &str,
        to: &str,
        banned_vars: &BTreeSet<&str>,
    ) -> Result<bool> {
        Ok(self.path_avoiding(from, to, banned_vars)?.is_some())
    }

    /// The certificate form of `connected_avoiding`: an alternating sequence
    /// of atoms and the variables joining them, `A1, x1, A2, ..., An`,
    /// with each xi occurring in both neighbours.
    pub fn path_avoiding(
        &self,
        from: &str,
        to: &str,
        banned_vars: &BTreeSet<&str>,
    ) -> Result<Option<Path>> {
        let f = self.vertex(from)?;
        let t = self.vertex(to)?;
        let mut parent: BTreeMap<usize, (usize, String)> = BTreeMap::new();
        let mut seen: BTreeSet<usize> = [f].into();
        let mut queue = VecDeque::from([f]);
        while let Some(v) = queue.pop_front() {
            if v == t {
                let mut atoms = vec![self.vertices[t].clone()];
                let mut vars = Vec::new();
                let mut cur = t;
                while cur != f {
                    let (prev, var) = parent[&cur].clone();
                    vars.push(var);
                    atoms.push(self.vertices[prev].clone());
                    cur = prev;
                }
                atoms.reverse();
                vars.reverse();
                return Ok(Some(Path { atoms, vars }));
            }
            for (var, members) in &self.edges {
                if banned_vars.contains(var.as_str()) || !members.contains(&v) {
                    continue;
                }
                for &m in members {
                    if seen.insert(m) {
                        parent.insert(m, (v, var.clone()));
                        queue.push_back(m);
                    }
                }
            }
        }
        Ok(None)
    }

    pub fn components(&self) -> Vec<BTreeSet<usize>> {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        let mut out = Vec::new();
        let none = BTreeSet::new();
        for v in 0..self.vertices.len() {
            if seen.contains(&v) {
                continue;
            }
            let comp = self.reachable_avoiding(v, &none);
            seen.extend(comp.iter().copied());
            out.push(comp);
        }
        out
    }

    /// DOT export for documentation: a bipartite rendering with box nodes for
    /// atoms and point nodes for variables.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph hypergraph {\n");
        for v in &self.vertices {
            let _ = writeln!(s, "  \"{v}\" [shape=box];");
        }
        for (var, members) in &self.edges {
            let _ = writeln!(s, "  \"var_{var}\" [shape=point, xlabel=\"{var}\"];");
            for &m in members {
                let _ = writeln!(s, "  \"var_{var}\" -- \"{}\";", self.vertices[m]);
            }
        }
        s.push_str("}\n");
        s
    }
}
