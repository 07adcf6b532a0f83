//! Layered flow networks for linear queries.
//!
//! Every witness of the query traces an s-t path whose nodes are its
//! projections onto consecutive interface variable sets; every edge carries
//! one tuple. Endogenous tuples get capacity 1, exogenous (including padded
//! dissociation layers) the infinity sentinel, so an integral min cut is a
//! minimum contingency set. Responsibility variants re-weight one witness to
//! the sentinel and the target tuples to zero.

use crate::engine::{Compiled, Database, Value, Witness};
use crate::error::Error;
use crate::linearize::Linearization;
use crate::query::Query;
use crate::Result;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

/// Positional pattern over one relation; `None` cells are wildcards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuplePattern {
    pub relation: String,
    pub cells: Vec<Option<Value>>,
}

impl TuplePattern {
    pub fn matches(&self, tuple: &[Value]) -> bool {
        tuple.len() == self.cells.len()
            && self
                .cells
                .iter()
                .zip(tuple)
                .all(|(c, v)| c.is_none() || c == &Some(*v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    /// An endogenous tuple of the named relation.
    Tuple { relation: String, tuple: Vec<Value> },
    /// An exogenous layer crossing; `matching` marks target-pattern paths
    /// inside a layer that hosts the responsibility target.
    Exo { layer: usize, matching: bool },
}

#[derive(Debug, Clone)]
pub struct FlowEdge {
    pub from: usize,
    pub to: usize,
    pub cap: u64,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    pub node_count: usize,
    pub edges: Vec<FlowEdge>,
    pub sentinel: u64,
}

pub const SOURCE: usize = 0;
pub const SINK: usize = 1;

/// Capacity policy for one network build.
struct CapSpec<'a> {
    /// Pattern of the responsibility target, when building N_w and N_{w,tau}.
    target: Option<&'a TuplePattern>,
    /// The witness whose edges are protected at the sentinel.
    protected: Option<&'a Witness>,
    /// Layer index hosting the target relation.
    target_layer: Option<usize>,
    /// Target-relation tuples excluded from the instance (forced deletions
    /// accounted separately by the caller).
    skip_target_tuples: Option<&'a BTreeSet<Vec<Value>>>,
}

/// Everything fixed across the per-witness networks of one solve.
pub struct NetworkContext<'a> {
    lin: &'a Linearization,
    /// Per layer: variable indexes (into the compiled query) of the layer tuple.
    layer_vars: Vec<Vec<usize>>,
    /// Per interface i (between layer i and i+1): variable indexes.
    interfaces: Vec<Vec<usize>>,
    /// Variable indexes of the target relation's positional vars.
    target_vars: Option<Vec<usize>>,
    target_layer: Option<usize>,
    pub sentinel: u64,
}

impl<'a> NetworkContext<'a> {
    pub fn new(
        q: &'a Query,
        lin: &'a Linearization,
        db: &Database,
        target_relation: Option<&str>,
    ) -> Result<Self> {
        let compiled = Compiled::new(q);
        let var_of = |v: &str| -> Result<usize> {
            compiled
                .var_index(v)
                .ok_or_else(|| Error::UnknownVariable(v.to_string()))
        };
        let mut layer_vars = Vec::new();
        for l in &lin.layers {
            layer_vars.push(
                l.vars
                    .iter()
                    .map(|v| var_of(v))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let mut interfaces = Vec::new();
        for i in 0..lin.layers.len().saturating_sub(1) {
            let right: BTreeSet<&str> = lin.layers[i + 1].vars.iter().map(|s| s.as_str()).collect();
            let shared: Vec<usize> = lin.layers[i]
                .vars
                .iter()
                .filter(|v| right.contains(v.as_str()))
                .map(|v| var_of(v))
                .collect::<Result<Vec<_>>>()?;
            interfaces.push(shared);
        }
        let mut sentinel = 1u64;
        for a in &q.atoms {
            if a.endogenous {
                sentinel += db.relation(&a.relation)?.tuples.len() as u64;
            }
        }
        let (target_vars, target_layer) = match target_relation {
            None => (None, None),
            Some(rel) => {
                let atom = q
                    .atom(rel)
                    .ok_or_else(|| Error::UnknownRelation(rel.to_string()))?;
                let vars = atom
                    .vars()
                    .iter()
                    .map(|v| var_of(v))
                    .collect::<Result<Vec<_>>>()?;
                let layer = lin
                    .layers
                    .iter()
                    .position(|l| l.members.iter().any(|m| m == rel))
                    .ok_or_else(|| Error::UnknownRelation(rel.to_string()))?;
                (Some(vars), Some(layer))
            }
        };
        Ok(NetworkContext {
            lin,
            layer_vars,
            interfaces,
            target_vars,
            target_layer,
            sentinel,
        })
    }

    pub fn target_tuple_of(&self, w: &Witness) -> Option<Vec<Value>> {
        self.target_vars
            .as_ref()
            .map(|tv| tv.iter().map(|&i| w.assignment[i]).collect())
    }

    fn build(&self, witnesses: &[Witness], spec: &CapSpec<'_>) -> FlowNetwork {
        let mut nodes: HashMap<(usize, Vec<Value>), usize> = HashMap::new();
        let mut node_count = 2;
        let mut edge_index: HashMap<(usize, EdgeKey), usize> = HashMap::new();
        let mut edges: Vec<FlowEdge> = Vec::new();

        let protected_tuples: Vec<Option<Vec<Value>>> = match spec.protected {
            None => vec![None; self.lin.layers.len()],
            Some(w) => self
                .layer_vars
                .iter()
                .map(|vs| Some(vs.iter().map(|&i| w.assignment[i]).collect()))
                .collect(),
        };

        for w in witnesses {
            let target_tuple = self.target_tuple_of(w);
            let target_matches = match (&target_tuple, spec.target) {
                (Some(t), Some(p)) => p.matches(t),
                _ => false,
            };
            if let (Some(skip), Some(t)) = (spec.skip_target_tuples, &target_tuple) {
                if skip.contains(t) {
                    continue;
                }
            }
            let mut prev = SOURCE;
            for (i, layer) in self.lin.layers.iter().enumerate() {
                let next = if i + 1 == self.lin.layers.len() {
                    SINK
                } else {
                    let key: Vec<Value> = self.interfaces[i]
                        .iter()
                        .map(|&vi| w.assignment[vi])
                        .collect();
                    *nodes.entry((i, key)).or_insert_with(|| {
                        node_count += 1;
                        node_count - 1
                    })
                };
                let layer_tuple: Vec<Value> = self.layer_vars[i]
                    .iter()
                    .map(|&vi| w.assignment[vi])
                    .collect();
                let (key, label, cap) = if layer.endogenous {
                    // For the endogenous target layer the layer tuple is the
                    // target tuple itself, so `target_matches` decides.
                    let cap = if spec.target_layer == Some(i) && target_matches {
                        0
                    } else if protected_tuples[i].as_deref() == Some(layer_tuple.as_slice()) {
                        self.sentinel
                    } else {
                        1
                    };
                    (
                        EdgeKey::Tuple(layer_tuple.clone()),
                        EdgeLabel::Tuple {
                            relation: layer.name.clone(),
                            tuple: layer_tuple,
                        },
                        cap,
                    )
                } else {
                    let matching = spec.target_layer == Some(i) && target_matches;
                    let cap = if matching { 0 } else { self.sentinel };
                    (
                        EdgeKey::Exo {
                            left: prev,
                            right: next,
                            matching,
                        },
                        EdgeLabel::Exo { layer: i, matching },
                        cap,
                    )
                };
                match edge_index.get(&(i, key.clone())) {
                    Some(&idx) => {
                        debug_assert_eq!(
                            edges[idx].cap, cap,
                            "edge capacity must not depend on the witness that induced it"
                        );
                    }
                    None => {
                        edges.push(FlowEdge {
                            from: prev,
                            to: next,
                            cap,
                            label,
                        });
                        edge_index.insert((i, key), edges.len() - 1);
                    }
                };
                prev = next;
            }
        }
        FlowNetwork {
            node_count,
            edges,
            sentinel: self.sentinel,
        }
    }

    /// Network whose finite min cut is the resilience optimum.
    pub fn resilience_network(&self, witnesses: &[Witness]) -> FlowNetwork {
        self.build(
            witnesses,
            &CapSpec {
                target: None,
                protected: None,
                target_layer: None,
                skip_target_tuples: None,
            },
        )
    }

    /// Network for one surviving witness `w`: target-pattern edges cost 0,
    /// the rest of `w` is uncuttable, everything else is as in the
    /// resilience network. `skip` drops target-relation tuples deleted up
    /// front by the full-domination accounting.
    pub fn responsibility_network(
        &self,
        witnesses: &[Witness],
        w: &Witness,
        pattern: &TuplePattern,
        skip: Option<&BTreeSet<Vec<Value>>>,
    ) -> FlowNetwork {
        self.build(
            witnesses,
            &CapSpec {
                target: Some(pattern),
                protected: Some(w),
                target_layer: self.target_layer,
                skip_target_tuples: skip,
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum EdgeKey {
    Tuple(Vec<Value>),
    Exo {
        left: usize,
        right: usize,
        matching: bool,
    },
}

#[derive(Debug, Clone)]
pub struct CutResult {
    pub value: u64,
    /// Endogenous tuples on the cut (cap 1 edges).
    pub tuples: Vec<(String, Vec<Value>)>,
}

/// Dinic max-flow with residual-reachability cut extraction. The max-flow
/// value is checked against the cut capacity sum.
pub fn min_cut(net: &FlowNetwork) -> CutResult {
    let n = net.node_count;
    let mut heads: Vec<Vec<usize>> = vec![Vec::new(); n];
    // arcs: (to, cap). arc i and i^1 are duals.
    let mut arcs: Vec<(usize, u64)> = Vec::new();
    for e in &net.edges {
        heads[e.from].push(arcs.len());
        arcs.push((e.to, e.cap));
        heads[e.to].push(arcs.len());
        arcs.push((e.from, 0));
    }

    let mut total = 0u64;
    loop {
        // BFS levels.
        let mut level = vec![usize::MAX; n];
        level[SOURCE] = 0;
        let mut queue = std::collections::VecDeque::from([SOURCE]);
        while let Some(u) = queue.pop_front() {
            for &a in &heads[u] {
                let (v, cap) = arcs[a];
                if cap > 0 && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if level[SINK] == usize::MAX {
            break;
        }
        // DFS blocking flow.
        let mut iter = vec![0usize; n];
        loop {
            let pushed = dinic_dfs(SOURCE, u64::MAX, &mut arcs, &heads, &level, &mut iter);
            if pushed == 0 {
                break;
            }
            total += pushed;
        }
    }

    // Residual reachability from s.
    let mut seen = vec![false; n];
    seen[SOURCE] = true;
    let mut stack = vec![SOURCE];
    while let Some(u) = stack.pop() {
        for &a in &heads[u] {
            let (v, cap) = arcs[a];
            if cap > 0 && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    let mut tuples = Vec::new();
    let mut cut_sum = 0u64;
    for (i, e) in net.edges.iter().enumerate() {
        if seen[e.from] && !seen[e.to] {
            cut_sum += e.cap;
            if e.cap > 0 && e.cap < net.sentinel {
                if let EdgeLabel::Tuple { relation, tuple } = &net.edges[i].label {
                    tuples.push((relation.clone(), tuple.clone()));
                }
            }
        }
    }
    assert_eq!(
        total, cut_sum,
        "max-flow value must equal the extracted cut capacity"
    );
    tuples.sort();
    CutResult {
        value: total,
        tuples,
    }
}

fn dinic_dfs(
    u: usize,
    limit: u64,
    arcs: &mut [(usize, u64)],
    heads: &[Vec<usize>],
    level: &[usize],
    iter: &mut [usize],
) -> u64 {
    if u == SINK {
        return limit;
    }
    while iter[u] < heads[u].len() {
        let a = heads[u][iter[u]];
        let (v, cap) = arcs[a];
        if cap > 0 && level[v] == level[u] + 1 {
            let pushed = dinic_dfs(v, limit.min(cap), arcs, heads, level, iter);
            if pushed > 0 {
                arcs[a].1 -= pushed;
                arcs[a ^ 1].1 += pushed;
                return pushed;
            }
        }
        iter[u] += 1;
    }
    0
}

/// DOT export of a network for documentation.
pub fn to_dot(net: &FlowNetwork, db: &Database) -> String {
    let mut s = String::from("digraph flow {\n  rankdir=LR;\n");
    for e in &net.edges {
        let name = |n: usize| match n {
            SOURCE => "s".to_string(),
            SINK => "t".to_string(),
            k => format!("n{k}"),
        };
        let label = match &e.label {
            EdgeLabel::Tuple { relation, tuple } => {
                format!("{}({})", relation, db.render_tuple(tuple).join(","))
            }
            EdgeLabel::Exo { layer, matching } => {
                if *matching {
                    format!("exo{layer}*")
                } else {
                    format!("exo{layer}")
                }
            }
        };
        let cap = if e.cap >= net.sentinel {
            "inf".to_string()
        } else {
            e.cap.to_string()
        };
        let _ = writeln!(
            s,
            "  {} -> {} [label=\"{label} ({cap})\"];",
            name(e.from),
            name(e.to)
        );
    }
    s.push_str("}\n");
    s
}
