//! Linear orders and dissociation.
//!
//! A query is linear when its atoms admit an order in which every variable
//! spans a contiguous block. Triad-free queries may not be linear as written,
//! but dissociating exogenous atoms (padding them with extra variables, the
//! database lifted by a cross product that is never materialized) always
//! produces an equivalent linear query. The placement walk puts endogenous
//! atoms in their unique admissible slots and merges the exogenous atoms of
//! each gap into one padded atom.

use crate::error::Error;
use crate::hypergraph;
use crate::query::{Atom, Query, Term};
use crate::structure;
use crate::Result;
use std::collections::BTreeSet;

pub type LinearOrder = Vec<String>;

/// One atom of the linearized query: either an endogenous atom, unchanged,
/// or the merge of all exogenous atoms attached to one gap, dissociated to
/// the padded variable tuple in `vars`.
#[derive(Debug, Clone)]
pub struct Layer {
    pub name: String,
    pub endogenous: bool,
    /// Original atom names backing this layer (one for endogenous layers).
    pub members: Vec<String>,
    pub vars: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Linearization {
    /// The dissociated query, atoms already in linear order.
    pub query: Query,
    pub order: LinearOrder,
    pub layers: Vec<Layer>,
}

/// Does every variable occupy a contiguous block of `atoms`?
pub fn contiguous(atoms: &[(String, BTreeSet<String>)]) -> bool {
    let mut all_vars: BTreeSet<&String> = BTreeSet::new();
    for (_, vs) in atoms {
        all_vars.extend(vs.iter());
    }
    for v in all_vars {
        let occ: Vec<usize> = atoms
            .iter()
            .enumerate()
            .filter(|(_, (_, vs))| vs.contains(v))
            .map(|(i, _)| i)
            .collect();
        if let (Some(&first), Some(&last)) = (occ.first(), occ.last()) {
            if occ.len() != last - first + 1 {
                return false;
            }
        }
    }
    true
}

/// Searches for a witness order proving the query linear as written.
/// Depth-first over prefixes: any variable shared between the placed prefix
/// and the unplaced remainder must occur in the next atom.
pub fn is_linear(q: &Query) -> Option<LinearOrder> {
    let n = q.atoms.len();
    let var_sets: Vec<BTreeSet<&str>> = q.atoms.iter().map(|a| a.var_set()).collect();
    let mut order: Vec<usize> = Vec::new();
    let mut used = vec![false; n];

    fn dfs(
        q: &Query,
        var_sets: &[BTreeSet<&str>],
        order: &mut Vec<usize>,
        used: &mut [bool],
    ) -> bool {
        let n = var_sets.len();
        if order.len() == n {
            return true;
        }
        let placed_vars: BTreeSet<&str> = order
            .iter()
            .flat_map(|&i| var_sets[i].iter().copied())
            .collect();
        let open: BTreeSet<&str> = placed_vars
            .into_iter()
            .filter(|v| (0..n).any(|i| !used[i] && var_sets[i].contains(v)))
            .collect();
        let mut candidates: Vec<usize> = (0..n)
            .filter(|&i| !used[i] && open.iter().all(|v| var_sets[i].contains(v)))
            .collect();
        candidates.sort_by(|&a, &b| q.atoms[a].relation.cmp(&q.atoms[b].relation));
        for i in candidates {
            used[i] = true;
            order.push(i);
            if dfs(q, var_sets, order, used) {
                return true;
            }
            order.pop();
            used[i] = false;
        }
        false
    }

    if dfs(q, &var_sets, &mut order, &mut used) {
        Some(
            order
                .into_iter()
                .map(|i| q.atoms[i].relation.clone())
                .collect(),
        )
    } else {
        None
    }
}

/// Appends `var` to an exogenous atom. The matching database transformation
/// pads the relation with every domain value; solvers represent that lift
/// implicitly and never materialize it.
pub fn dissociate(q: &Query, atom: &str, var: &str) -> Result<Query> {
    let idx = q.atom_index(atom)?;
    if q.atoms[idx].endogenous {
        return Err(Error::DissociateEndogenous(atom.to_string()));
    }
    if q.atoms[idx].var_set().contains(var) {
        return Err(Error::DissociateDuplicate {
            atom: atom.to_string(),
            var: var.to_string(),
        });
    }
    if !q.vars().contains(&var) {
        return Err(Error::UnknownVariable(var.to_string()));
    }
    let mut out = q.clone();
    out.atoms[idx].terms.push(Term::Var(var.to_string()));
    Ok(out)
}

/// Linearizes a connected, triad-free query whose normalization is done:
/// places endogenous atoms by the cut test, then pads and merges the
/// exogenous atoms of each gap. Fails loudly if a placement is not unique or
/// the result is not contiguous.
pub fn linearize_triad_free(q: &Query) -> Result<Linearization> {
    if let Some(t) = structure::find_triad(q)? {
        return Err(Error::TriadPresent(t.0));
    }
    if q.components()?.len() > 1 {
        return Err(Error::Invalid("linearize needs a connected query".into()));
    }

    let endo: Vec<&Atom> = q.atoms.iter().filter(|a| a.endogenous).collect();

    let mut sorted = endo.clone();
    sorted.sort_by(|a, b| a.relation.cmp(&b.relation));

    if sorted.len() < 3 {
        return build_layers(q, &sorted).ok_or_else(|| placement_failure(q));
    }

    // Place endogenous atoms one at a time into slots admitted by the cut
    // test. The admissible slot is usually unique, but a query that is
    // linear in several ways admits ties, so the search backtracks and the
    // contiguity check on the finished layering is the arbiter.
    let h = hypergraph::build(q);
    let separated = |cut_atom: &Atom, a: &Atom, b: &Atom| -> Result<bool> {
        let banned: BTreeSet<&str> = cut_atom.var_set();
        Ok(!h.connected_avoiding(&a.relation, &b.relation, &banned)?)
    };

    fn place<'a>(
        q: &Query,
        remaining: &[&'a Atom],
        placed: &mut Vec<&'a Atom>,
        separated: &dyn Fn(&Atom, &Atom, &Atom) -> Result<bool>,
    ) -> Result<Option<Linearization>> {
        let Some((&next, rest)) = remaining.split_first() else {
            return Ok(build_layers(q, placed));
        };
        let k = placed.len();
        let mut slots = Vec::new();
        if separated(placed[0], next, placed[1])? {
            slots.push(0);
        }
        for p in 0..k - 1 {
            if separated(next, placed[p], placed[p + 1])? {
                slots.push(p + 1);
            }
        }
        if separated(placed[k - 1], next, placed[k - 2])? {
            slots.push(k);
        }
        for slot in slots {
            placed.insert(slot, next);
            if let Some(done) = place(q, rest, placed, separated)? {
                return Ok(Some(done));
            }
            placed.remove(slot);
        }
        Ok(None)
    }

    let mut placed: Vec<&Atom> = vec![sorted[0], sorted[1]];
    place(q, &sorted[2..], &mut placed, &separated)?.ok_or_else(|| placement_failure(q))
}

fn placement_failure(q: &Query) -> Error {
    Error::Invalid(format!(
        "no contiguous linear order exists for `{q}`; the placement walk failed"
    ))
}

/// Builds the layering for one endogenous order: exogenous atoms assigned to
/// gaps (rightmost first, leftovers to the leftmost gap per the induction's
/// base case), padded and merged. Returns `None` when the result is not
/// contiguous, which makes the placement search try another order.
fn build_layers(q: &Query, order: &[&Atom]) -> Option<Linearization> {
    let exo: Vec<&Atom> = q.atoms.iter().filter(|a| !a.endogenous).collect();
    let all_vars: Vec<String> = {
        let mut vs: Vec<String> = q.vars().into_iter().map(|s| s.to_string()).collect();
        vs.sort_unstable();
        vs
    };
    let n = order.len();
    // An exogenous atom carrying a variable new to a gap's right endpoint
    // anchors in that gap; atoms reachable from an anchor through variables
    // no endogenous atom carries must join it (their hyperedges have nowhere
    // else to stay contiguous). Leftovers land in the leftmost gap, the
    // induction's base case.
    let endo_vars: BTreeSet<&str> = order.iter().flat_map(|a| a.var_set()).collect();
    let mut gap_members: Vec<Vec<&Atom>> = vec![Vec::new(); n.saturating_sub(1).max(1)];
    let mut unassigned: Vec<&Atom> = exo.clone();
    if n >= 2 {
        for gap in (1..n).rev() {
            if gap == 1 {
                gap_members[0] = std::mem::take(&mut unassigned);
                break;
            }
            let left: BTreeSet<&str> = order[gap - 1].var_set();
            let right: BTreeSet<&str> = order[gap].var_set();
            let (mut members, mut rest): (Vec<&Atom>, Vec<&Atom>) =
                unassigned.into_iter().partition(|a| {
                    a.var_set()
                        .iter()
                        .any(|v| right.contains(v) && !left.contains(v))
                });
            loop {
                let private_vars: BTreeSet<&str> = members
                    .iter()
                    .flat_map(|a| a.var_set())
                    .filter(|v| !endo_vars.contains(*v))
                    .collect();
                let (absorbed, kept): (Vec<&Atom>, Vec<&Atom>) = rest
                    .into_iter()
                    .partition(|a| a.var_set().iter().any(|v| private_vars.contains(v)));
                rest = kept;
                if absorbed.is_empty() {
                    break;
                }
                members.extend(absorbed);
            }
            gap_members[gap - 1] = members;
            unassigned = rest;
        }
    } else {
        gap_members[0] = unassigned;
    }

    let mut layers: Vec<Layer> = Vec::new();
    let push_exo_layer = |layers: &mut Vec<Layer>, members: &[&Atom], vars: Vec<String>| {
        if members.is_empty() {
            return;
        }
        let mut names: Vec<String> = members.iter().map(|a| a.relation.clone()).collect();
        names.sort_unstable();
        layers.push(Layer {
            name: names[0].clone(),
            endogenous: false,
            members: names,
            vars,
        });
    };

    if n == 0 {
        push_exo_layer(&mut layers, &gap_members[0], all_vars.clone());
    } else if n <= 2 {
        // Base case: every exogenous atom is padded to the full variable set.
        layers.push(endo_layer(order[0]));
        push_exo_layer(&mut layers, &gap_members[0], all_vars.clone());
        if n == 2 {
            layers.push(endo_layer(order[1]));
        }
    } else {
        for (i, atom) in order.iter().enumerate() {
            layers.push(endo_layer(atom));
            if i + 1 < n {
                let members = &gap_members[i];
                if !members.is_empty() {
                    let mut vars: BTreeSet<String> = order[i]
                        .var_set()
                        .iter()
                        .chain(order[i + 1].var_set().iter())
                        .map(|s| s.to_string())
                        .collect();
                    for m in members {
                        vars.extend(m.var_set().iter().map(|s| s.to_string()));
                    }
                    push_exo_layer(&mut layers, members, vars.into_iter().collect());
                }
            }
        }
    }

    let shape: Vec<(String, BTreeSet<String>)> = layers
        .iter()
        .map(|l| (l.name.clone(), l.vars.iter().cloned().collect()))
        .collect();
    if !contiguous(&shape) {
        return None;
    }

    let atoms: Vec<Atom> = layers
        .iter()
        .map(|l| Atom {
            relation: l.name.clone(),
            terms: l.vars.iter().map(|v| Term::Var(v.clone())).collect(),
            endogenous: l.endogenous,
        })
        .collect();
    let query = Query {
        name: q.name.clone(),
        head: Vec::new(),
        atoms,
        fds: q.fds.clone(),
    };
    let order = layers.iter().map(|l| l.name.clone()).collect();
    Some(Linearization {
        query,
        order,
        layers,
    })
}

fn endo_layer(a: &Atom) -> Layer {
    Layer {
        name: a.relation.clone(),
        endogenous: true,
        members: vec![a.relation.clone()],
        vars: a.vars().into_iter().map(|s| s.to_string()).collect(),
    }
}
