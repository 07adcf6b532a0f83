//! Structural normalization and the tractability classification.
//!
//! Resilience is polynomial exactly when the query, after closing under
//! FD-induced rewrites and making dominated atoms exogenous, has no triad.
//! Responsibility replaces domination with full domination. These transforms
//! and the triad search live here.

use crate::engine::{Database, Relation, Value};
use crate::error::Error;
use crate::hypergraph::{self, DualHypergraph};
use crate::linearize;
use crate::query::{FunctionalDependency, Query, Term};
use crate::Result;
use std::collections::{BTreeMap, BTreeSet};

/// Three endogenous atoms pairwise connected by paths avoiding the third
/// atom's variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triad(pub [String; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Resilience,
    Responsibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ptime,
    NpComplete,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub problem: Problem,
    pub verdict: Verdict,
    pub triad: Option<Triad>,
    /// Witness order of the dissociated query when the verdict is ptime.
    pub linear_order: Option<Vec<String>>,
    /// Closure + (full) domination normal form, before dissociation.
    pub normalized_query: Query,
}

fn is_triad(h: &DualHypergraph, q: &Query, triple: [&str; 3]) -> Result<bool> {
    for k in 0..3 {
        let spectator = q.atom(triple[k]).unwrap();
        let banned: BTreeSet<&str> = spectator.var_set();
        let a = triple[(k + 1) % 3];
        let b = triple[(k + 2) % 3];
        if !h.connected_avoiding(a, b, &banned)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exhaustive search over endogenous triples, in sorted name order.
pub fn find_triad(q: &Query) -> Result<Option<Triad>> {
    let h = hypergraph::build(q);
    let mut names: Vec<&str> = q
        .atoms
        .iter()
        .filter(|a| a.endogenous)
        .map(|a| a.relation.as_str())
        .collect();
    names.sort_unstable();
    let n = names.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if is_triad(&h, q, [names[i], names[j], names[k]])? {
                    return Ok(Some(Triad([
                        names[i].to_string(),
                        names[j].to_string(),
                        names[k].to_string(),
                    ])));
                }
            }
        }
    }
    Ok(None)
}

/// Checks that a specific triple is a triad of `q`.
pub fn validate_triad(q: &Query, triad: &Triad) -> Result<()> {
    let h = hypergraph::build(q);
    for name in &triad.0 {
        let atom = q
            .atom(name)
            .ok_or_else(|| Error::UnknownAtom(name.clone()))?;
        if !atom.endogenous {
            return Err(Error::InvalidTriad(triad.0.clone()));
        }
    }
    if !is_triad(&h, q, [&triad.0[0], &triad.0[1], &triad.0[2]])? {
        return Err(Error::InvalidTriad(triad.0.clone()));
    }
    Ok(())
}

/// Marks every endogenous atom B with some endogenous A, var(A) ⊂ var(B),
/// as exogenous. One simultaneous pass suffices; a defensive second pass
/// asserts convergence.
pub fn apply_domination(q: &Query) -> Query {
    let mut out = q.clone();
    let mut pass = 0;
    loop {
        let endo: Vec<(String, BTreeSet<&str>)> = out
            .atoms
            .iter()
            .filter(|a| a.endogenous)
            .map(|a| (a.relation.clone(), a.var_set()))
            .collect();
        let dominated: BTreeSet<String> = endo
            .iter()
            .filter(|(b, bv)| {
                endo.iter()
                    .any(|(a, av)| a != b && av.is_subset(bv) && av.len() < bv.len())
            })
            .map(|(b, _)| b.clone())
            .collect();
        if dominated.is_empty() {
            break;
        }
        debug_assert_eq!(pass, 0, "domination must converge in one simultaneous pass");
        for a in &mut out.atoms {
            if dominated.contains(&a.relation) {
                a.endogenous = false;
            }
        }
        pass += 1;
    }
    out
}

/// Variables of `atom` that cannot reach an endogenous atom other than
/// `atom` except through the atom's other variables.
pub fn solitary_vars(q: &Query, atom: &str) -> Result<BTreeSet<String>> {
    let h = hypergraph::build(q);
    let f_idx = h.vertex(atom)?;
    let f_vars: Vec<String> = q.atoms[f_idx]
        .vars()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut out = BTreeSet::new();
    for w in &f_vars {
        let banned: BTreeSet<&str> = f_vars
            .iter()
            .map(|s| s.as_str())
            .filter(|v| v != &w.as_str())
            .collect();
        let mut escaped = false;
        for &start in &h.edges[w] {
            for reached in h.reachable_avoiding(start, &banned) {
                if reached != f_idx && q.atoms[reached].endogenous {
                    escaped = true;
                    break;
                }
            }
            if escaped {
                break;
            }
        }
        if !escaped {
            out.insert(w.clone());
        }
    }
    Ok(out)
}

fn fully_dominated(q: &Query, atom: &str) -> Result<bool> {
    let f = q
        .atom(atom)
        .ok_or_else(|| Error::UnknownAtom(atom.to_string()))?;
    if !f.endogenous {
        return Ok(false);
    }
    let fv = f.var_set();
    let sol = solitary_vars(q, atom)?;
    for y in fv.iter().filter(|y| !sol.contains(**y)) {
        let covered = q.atoms.iter().any(|a| {
            a.endogenous && a.relation != f.relation && {
                let av = a.var_set();
                av.contains(y) && av.is_subset(&fv) && av.len() < fv.len()
            }
        });
        if !covered {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Solitary variables of the target's relation captured at the moment full
/// domination made it exogenous; responsibility solves need them to account
/// for forced deletions inside that relation.
#[derive(Debug, Clone)]
pub struct TargetMarking {
    pub relation: String,
    pub solitary: BTreeSet<String>,
}

/// Iterates full domination to a fixpoint, marking atoms exogenous in sorted
/// name order. When `target` names an atom, that atom is only marked once no
/// other candidate remains, and the marking is reported back.
pub fn apply_full_domination_with_target(
    q: &Query,
    target: Option<&str>,
) -> Result<(Query, Option<TargetMarking>)> {
    // The preservation argument for marking a non-target atom needs the
    // target's relation to still be endogenous, so the analysis treats it
    // that way throughout, and once the target itself is marked the pass
    // must stop: further markings would reason about a query in which the
    // target's tuples look undeletable.
    let mut out = q.clone();
    let mut restore_target_flag = None;
    if let Some(t) = target {
        if let Some(idx) = out.atoms.iter().position(|a| a.relation == t) {
            if !out.atoms[idx].endogenous {
                restore_target_flag = Some(idx);
                out.atoms[idx].endogenous = true;
            }
        }
    }
    let mut marking = None;
    loop {
        let mut names: Vec<String> = out
            .atoms
            .iter()
            .filter(|a| a.endogenous)
            .map(|a| a.relation.clone())
            .collect();
        names.sort_unstable();
        let mut candidate = None;
        for name in &names {
            if Some(name.as_str()) == target {
                continue;
            }
            if fully_dominated(&out, name)? {
                candidate = Some(name.clone());
                break;
            }
        }
        let mut target_marked = false;
        if candidate.is_none() {
            if let Some(t) = target {
                if restore_target_flag.is_none()
                    && out.atom(t).map(|a| a.endogenous).unwrap_or(false)
                    && fully_dominated(&out, t)?
                {
                    marking = Some(TargetMarking {
                        relation: t.to_string(),
                        solitary: solitary_vars(&out, t)?,
                    });
                    candidate = Some(t.to_string());
                    target_marked = true;
                }
            }
        }
        let Some(name) = candidate else { break };
        for a in &mut out.atoms {
            if a.relation == name {
                a.endogenous = false;
            }
        }
        if target_marked {
            break;
        }
    }
    if let Some(idx) = restore_target_flag {
        out.atoms[idx].endogenous = false;
    }
    Ok((out, marking))
}

pub fn apply_full_domination(q: &Query) -> Result<Query> {
    Ok(apply_full_domination_with_target(q, None)?.0)
}

fn fd_closure(start: &BTreeSet<String>, fds: &[FunctionalDependency]) -> BTreeSet<String> {
    let mut out = start.clone();
    loop {
        let mut grew = false;
        for fd in fds {
            if !out.contains(&fd.dependent) && fd.determinants.iter().all(|d| out.contains(d)) {
                out.insert(fd.dependent.clone());
                grew = true;
            }
        }
        if !grew {
            return out;
        }
    }
}

/// Query-level closure under induced rewrites: every atom's variable set
/// becomes the FD-closure of its original set. Added variables are appended
/// in sorted order, so the result is canonical and idempotent.
pub fn induced_rewrite_closure(q: &Query) -> Query {
    let mut out = q.clone();
    for a in &mut out.atoms {
        let have: BTreeSet<String> = a.var_set().iter().map(|s| s.to_string()).collect();
        let closed = fd_closure(&have, &q.fds);
        for v in closed.difference(&have) {
            a.terms.push(Term::Var(v.clone()));
        }
    }
    out
}

/// Verifies that the database satisfies every FD of the query: across all
/// relations whose atom contains the determinants and the dependent, equal
/// determinant values must fix the dependent value.
pub fn check_fds(q: &Query, db: &Database) -> Result<()> {
    for fd in &q.fds {
        fd_pairs(q, db, fd, true)?;
    }
    Ok(())
}

/// det-values (sorted by variable name) -> dependent value, pooled over all
/// atoms containing determinants ∪ {dependent}. With `strict`, conflicting
/// pairs are an FD violation; otherwise the first pair per key wins (lift
/// steps use this: pairs from tuples outside every witness carry no
/// semantic weight, so any fixed choice is sound there).
fn fd_pairs(
    q: &Query,
    db: &Database,
    fd: &FunctionalDependency,
    strict: bool,
) -> Result<BTreeMap<Vec<Value>, Value>> {
    let mut map = BTreeMap::new();
    for a in &q.atoms {
        let vars = a.vars();
        let det_pos: Option<Vec<usize>> = fd
            .determinants
            .iter()
            .map(|d| vars.iter().position(|v| *v == d.as_str()))
            .collect();
        let dep_pos = vars.iter().position(|v| *v == fd.dependent.as_str());
        let (Some(det_pos), Some(dep_pos)) = (det_pos, dep_pos) else {
            continue;
        };
        let rel = db.relation(&a.relation)?;
        for t in &rel.tuples {
            let key: Vec<Value> = det_pos.iter().map(|&p| t[p]).collect();
            let val = t[dep_pos];
            match map.get(&key) {
                Some(&prev) if prev != val && strict => {
                    return Err(Error::FdViolation(fd.to_string()));
                }
                Some(_) => {}
                None => {
                    map.insert(key, val);
                }
            }
        }
    }
    Ok(map)
}

/// A query closed under induced rewrites together with the correspondingly
/// lifted database. `original_arity` maps each relation to its arity before
/// the closure; lifted columns are appended, so truncating a lifted tuple to
/// the original arity recovers the source tuple.
#[derive(Debug, Clone)]
pub struct ClosedInstance {
    pub query: Query,
    pub database: Database,
    pub original_arity: BTreeMap<String, usize>,
}

/// Applies induced rewrites to `q` and `db` together until the query is
/// closed. The dependent value of each extended tuple is determined by
/// pooling every relation that already pairs determinants with the
/// dependent AND the witness set (which is what the dependency really
/// constrains when no single relation carries all the columns). Tuples
/// whose determinant values never co-occur with the dependent are dropped:
/// they join no witness.
pub fn close_with_database(
    q: &Query,
    db: &Database,
    config: &crate::engine::Config,
) -> Result<ClosedInstance> {
    check_fds(q, db)?;
    let mut query = q.clone();
    let mut database = db.clone();
    let original_arity: BTreeMap<String, usize> = q
        .atoms
        .iter()
        .map(|a| (a.relation.clone(), a.terms.len()))
        .collect();

    // Rewrites preserve the witness assignments, so one enumeration serves
    // every step; enumerate only when a rewrite actually applies.
    let boolean = Query {
        head: Vec::new(),
        ..q.clone()
    };
    let compiled = crate::engine::Compiled::new(&boolean);
    let mut witness_cache: Option<Vec<crate::engine::Witness>> = None;

    loop {
        // Applicable rewrites, canonical order: (atom index, dependent).
        let mut applicable: Vec<(usize, usize)> = Vec::new();
        for (ai, a) in query.atoms.iter().enumerate() {
            let have = a.var_set();
            for (fi, fd) in query.fds.iter().enumerate() {
                if fd.determinants.iter().all(|d| have.contains(d.as_str()))
                    && !have.contains(fd.dependent.as_str())
                {
                    applicable.push((ai, fi));
                }
            }
        }
        if applicable.is_empty() {
            break;
        }
        applicable.sort_by(|a, b| {
            (a.0, &query.fds[a.1].dependent).cmp(&(b.0, &query.fds[b.1].dependent))
        });
        let (ai, fi) = applicable[0];
        let fd = query.fds[fi].clone();
        let mut map = BTreeMap::new();
        let det_idx: Vec<usize> = fd
            .determinants
            .iter()
            .map(|d| {
                compiled
                    .var_index(d)
                    .ok_or_else(|| Error::UnknownVariable(d.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let dep_idx = compiled
            .var_index(&fd.dependent)
            .ok_or_else(|| Error::UnknownVariable(fd.dependent.clone()))?;
        if witness_cache.is_none() {
            witness_cache = Some(crate::engine::enumerate_witnesses(&boolean, db, config)?);
        }
        // Witness pairs are authoritative: a conflict among them is a real
        // violation. Relation pairs only fill keys no witness touches;
        // conflicting relation pairs on such keys come from tuples that can
        // never join a witness, so the first choice is as good as any.
        for w in witness_cache.as_ref().unwrap() {
            let key: Vec<Value> = det_idx.iter().map(|&i| w.assignment[i]).collect();
            let val = w.assignment[dep_idx];
            match map.get(&key) {
                Some(&prev) if prev != val => return Err(Error::FdViolation(fd.to_string())),
                Some(_) => {}
                None => {
                    map.insert(key, val);
                }
            }
        }
        for (key, val) in fd_pairs(&query, &database, &fd, false)? {
            map.entry(key).or_insert(val);
        }
        let det_sorted: Vec<&String> = fd.determinants.iter().collect();
        let vars = query.atoms[ai].vars();
        let det_pos: Vec<usize> = det_sorted
            .iter()
            .map(|d| vars.iter().position(|v| *v == d.as_str()).unwrap())
            .collect();
        let rel_name = query.atoms[ai].relation.clone();
        let rel = database.relation(&rel_name)?.clone();
        let mut lifted = BTreeSet::new();
        for t in &rel.tuples {
            let key: Vec<Value> = det_pos.iter().map(|&p| t[p]).collect();
            if let Some(&val) = map.get(&key) {
                let mut ext = t.clone();
                ext.push(val);
                lifted.insert(ext);
            }
        }
        database.relations.insert(
            rel_name,
            Relation {
                arity: rel.arity + 1,
                tuples: lifted,
            },
        );
        query.atoms[ai].terms.push(Term::Var(fd.dependent.clone()));
    }
    // The closure must not disturb the witness set.
    if cfg!(debug_assertions) {
        if let Some(before) = &witness_cache {
            let after = crate::engine::enumerate_witnesses(
                &Query {
                    head: Vec::new(),
                    ..query.clone()
                },
                &database,
                config,
            )?;
            assert_eq!(
                before.len(),
                after.len(),
                "induced rewrites must preserve witnesses"
            );
        }
    }
    Ok(ClosedInstance {
        query,
        database,
        original_arity,
    })
}

/// Full dichotomy pipeline: FD closure, then domination (resilience) or full
/// domination (responsibility), then triad search. Disconnected queries are
/// classified per component; the query is NP-complete iff some component is.
pub fn classify(q: &Query, problem: Problem) -> Result<Classification> {
    let comps = q.components()?;
    let mut normalized_atoms = Vec::new();
    let mut triad = None;
    let mut orders: Option<Vec<String>> = Some(Vec::new());
    for comp in &comps {
        let closed = induced_rewrite_closure(comp);
        // Rewrites may leave two atoms with identical variable sets; they
        // merge into an intersection like any other duplicates.
        let closed = crate::query::normalize(&closed, None)?.query;
        let normal = match problem {
            Problem::Resilience => apply_domination(&closed),
            Problem::Responsibility => apply_full_domination(&closed)?,
        };
        if triad.is_none() {
            triad = find_triad(&normal)?;
        }
        if triad.is_none() {
            if let Some(orders) = orders.as_mut() {
                let lin = linearize::linearize_triad_free(&normal)?;
                orders.extend(lin.order.iter().cloned());
            }
        } else {
            orders = None;
        }
        normalized_atoms.extend(normal.atoms);
    }
    let normalized_query = Query {
        name: q.name.clone(),
        head: Vec::new(),
        atoms: normalized_atoms,
        fds: q.fds.clone(),
    };
    Ok(Classification {
        problem,
        verdict: if triad.is_some() {
            Verdict::NpComplete
        } else {
            Verdict::Ptime
        },
        linear_order: if triad.is_some() { None } else { orders },
        triad,
        normalized_query,
    })
}
