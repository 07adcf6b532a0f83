//! Exact solvers for any self-join-free conjunctive query at desk scale.
//!
//! Resilience is a minimum hitting set over the witnesses' endogenous tuple
//! sets. Responsibility fixes one surviving witness `w` through the target
//! and hits every target-disjoint witness with tuples outside `w`; the
//! answer is the minimum over eligible `w`. Search is branch-and-bound with
//! a greedy disjoint-witness packing bound.

use crate::engine::{
    apply_deletions, enumerate_witnesses, query_true, Compiled, Config, ContingencySet, Database,
    Value, Witness,
};
use crate::error::Error;
use crate::flow::TuplePattern;
use crate::query::Query;
use crate::Result;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
pub enum ResilienceAnswer {
    Exact {
        k: usize,
        set: ContingencySet,
    },
    /// Budget mode only: every contingency set is larger than the budget.
    AboveBudget {
        budget: usize,
    },
}

impl ResilienceAnswer {
    pub fn k(&self) -> Option<usize> {
        match self {
            ResilienceAnswer::Exact { k, .. } => Some(*k),
            ResilienceAnswer::AboveBudget { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum RespAnswer {
    Cause { k: usize, set: ContingencySet },
    NotACause,
}

/// Minimum number of endogenous deletions falsifying the query, with a
/// witnessing contingency set. `budget` turns the search into a decision:
/// the result is `AboveBudget` as soon as no set of that size exists.
pub fn exact_resilience(
    q: &Query,
    db: &Database,
    config: &Config,
    budget: Option<usize>,
) -> Result<ResilienceAnswer> {
    let comps = q.components()?;
    let mut best: Option<(usize, ContingencySet)> = None;
    let mut all_unfalsifiable = true;
    let mut nodes = 0u64;
    for comp in &comps {
        let witnesses = enumerate_witnesses(&comp_boolean(comp), db, config)?;
        if witnesses.is_empty() {
            // A false component makes the query false already.
            verify_resilience(q, db, &ContingencySet::default())?;
            return Ok(ResilienceAnswer::Exact {
                k: 0,
                set: ContingencySet::default(),
            });
        }
        let inst = match build_instance(comp, db, &witnesses, &BTreeSet::new(), None)? {
            Some(inst) => inst,
            None => continue, // some witness is all-exogenous: component unfalsifiable
        };
        all_unfalsifiable = false;
        let cap = best.as_ref().map(|(k, _)| *k).or(budget.map(|b| b + 1));
        if let Some((k, ids)) = solve_hitting(&inst, cap, config, &mut nodes)? {
            let set = inst.contingency(&ids);
            if best.as_ref().map(|(bk, _)| k < *bk).unwrap_or(true) {
                best = Some((k, set));
            }
        }
    }
    match best {
        Some((k, set)) => {
            verify_resilience(q, db, &set)?;
            debug_assert_eq!(set.size(), k);
            Ok(ResilienceAnswer::Exact { k, set })
        }
        None if all_unfalsifiable => Err(Error::CannotFalsify(
            "an all-exogenous witness exists in every component".into(),
        )),
        None => Ok(ResilienceAnswer::AboveBudget {
            budget: budget.unwrap_or(0),
        }),
    }
}

/// Responsibility of a single concrete tuple.
pub fn exact_responsibility(
    q: &Query,
    db: &Database,
    config: &Config,
    relation: &str,
    tuple: &[Value],
) -> Result<RespAnswer> {
    let pattern = TuplePattern {
        relation: relation.to_string(),
        cells: tuple.iter().map(|&v| Some(v)).collect(),
    };
    exact_wildcard_responsibility(q, db, config, &pattern)
}

/// Responsibility of the tuple set denoted by a wildcard pattern.
pub fn exact_wildcard_responsibility(
    q: &Query,
    db: &Database,
    config: &Config,
    pattern: &TuplePattern,
) -> Result<RespAnswer> {
    let comps = q.components()?;
    let home = comps
        .iter()
        .find(|c| c.atom(&pattern.relation).is_some())
        .ok_or_else(|| Error::UnknownRelation(pattern.relation.clone()))?;
    for comp in &comps {
        if !query_true(comp, db)? {
            // Some component is false: the query is false, nothing is a cause.
            return Ok(RespAnswer::NotACause);
        }
    }
    let answer = responsibility_in_component(home, db, config, pattern)?;
    if let RespAnswer::Cause { k, set } = &answer {
        verify_responsibility(q, db, pattern, *k, set)?;
    }
    Ok(answer)
}

fn responsibility_in_component(
    q: &Query,
    db: &Database,
    config: &Config,
    pattern: &TuplePattern,
) -> Result<RespAnswer> {
    let qb = comp_boolean(q);
    let compiled = Compiled::new(&qb);
    let f_idx = qb.atom_index(&pattern.relation)?;
    {
        let arity = qb.atoms[f_idx].vars().len();
        if pattern.cells.len() != arity {
            return Err(Error::ArityMismatch {
                relation: pattern.relation.clone(),
                expected: arity,
                got: pattern.cells.len(),
            });
        }
    }
    let witnesses = enumerate_witnesses(&qb, db, config)?;
    let eligible: Vec<&Witness> = witnesses
        .iter()
        .filter(|w| pattern.matches(&compiled.tuple_of(f_idx, w)))
        .collect();
    if eligible.is_empty() {
        return Ok(RespAnswer::NotACause);
    }

    // The surviving-witness candidates only differ through their forbidden
    // tuple sets; identical sets give identical subproblems.
    let mut seen_forbidden: BTreeSet<Vec<(usize, Vec<Value>)>> = BTreeSet::new();
    let mut best: Option<(usize, ContingencySet)> = None;
    let mut nodes = 0u64;
    for w in eligible {
        let forbidden: BTreeSet<(usize, Vec<Value>)> = (0..qb.atoms.len())
            .map(|i| (i, compiled.tuple_of(i, w)))
            .collect();
        if !seen_forbidden.insert(forbidden.iter().cloned().collect()) {
            continue;
        }
        let Some(inst) = build_instance(q, db, &witnesses, &forbidden, Some((f_idx, pattern)))?
        else {
            continue; // some pattern-free witness cannot be hit while sparing w
        };
        let cap = best.as_ref().map(|(k, _)| *k);
        if let Some((k, ids)) = solve_hitting(&inst, cap, config, &mut nodes)? {
            let set = inst.contingency(&ids);
            if best.as_ref().map(|(bk, _)| k < *bk).unwrap_or(true) {
                best = Some((k, set));
            }
        }
    }
    Ok(match best {
        Some((k, set)) => RespAnswer::Cause { k, set },
        None => RespAnswer::NotACause,
    })
}

fn comp_boolean(q: &Query) -> Query {
    let mut out = q.clone();
    out.head.clear();
    out
}

/// Post-solve check: the returned set must actually falsify the query.
pub fn verify_resilience(q: &Query, db: &Database, set: &ContingencySet) -> Result<()> {
    let after = apply_deletions(q, db, set)?;
    if query_true(q, &after)? {
        return Err(Error::Invalid(format!(
            "resilience verification failed: query still true after deleting {}",
            set.describe(db)
        )));
    }
    Ok(())
}

/// Post-solve check of the responsibility definition: the query survives the
/// contingency set alone and dies once the matched tuples go too.
pub fn verify_responsibility(
    q: &Query,
    db: &Database,
    pattern: &TuplePattern,
    k: usize,
    set: &ContingencySet,
) -> Result<()> {
    if set.size() != k {
        return Err(Error::Invalid("contingency size mismatch".into()));
    }
    let survives = apply_deletions(q, db, set)?;
    if !query_true(q, &survives)? {
        return Err(Error::Invalid(format!(
            "responsibility verification failed: query already false after {}",
            set.describe(db)
        )));
    }
    let mut with_target = set.clone();
    let rel = db.relation(&pattern.relation)?;
    for t in &rel.tuples {
        if pattern.matches(t) {
            with_target
                .tuples
                .insert((pattern.relation.clone(), t.clone()));
        }
    }
    // The matched tuples may live in an exogenous relation, so delete them
    // directly instead of going through apply_deletions.
    let mut after = apply_deletions(q, db, set)?;
    if let Some(r) = after.relations.get_mut(&pattern.relation) {
        r.tuples.retain(|t| !pattern.matches(t));
    }
    if query_true(q, &after)? {
        return Err(Error::Invalid(
            "responsibility verification failed: query survives contingency plus target".into(),
        ));
    }
    Ok(())
}

struct HittingInstance {
    /// Distinct candidate tuples in display order: (relation, tuple).
    universe: Vec<(String, Vec<Value>)>,
    /// Witness constraints as sorted id sets, minimal and deduplicated.
    sets: Vec<Vec<u32>>,
}

impl HittingInstance {
    fn contingency(&self, ids: &[u32]) -> ContingencySet {
        let mut set = ContingencySet::default();
        for &id in ids {
            let (r, t) = &self.universe[id as usize];
            set.tuples.insert((r.clone(), t.clone()));
        }
        set
    }
}

/// Builds the hitting instance over the witnesses that must be destroyed.
/// `forbidden` tuples (the protected witness) are unavailable; with a target
/// pattern, witnesses whose target-relation tuple matches are exempt and
/// matching tuples are excluded from the universe. Returns `None` when some
/// witness has no candidate tuple at all.
fn build_instance(
    q: &Query,
    db: &Database,
    witnesses: &[Witness],
    forbidden: &BTreeSet<(usize, Vec<Value>)>,
    target: Option<(usize, &TuplePattern)>,
) -> Result<Option<HittingInstance>> {
    let qb = comp_boolean(q);
    let compiled = Compiled::new(&qb);
    let mut raw_sets: Vec<BTreeSet<(usize, Vec<Value>)>> = Vec::new();
    for w in witnesses {
        if let Some((f_idx, pattern)) = target {
            if pattern.matches(&compiled.tuple_of(f_idx, w)) {
                continue; // dies with the target set
            }
        }
        let mut set = BTreeSet::new();
        for i in 0..qb.atoms.len() {
            if !qb.atoms[i].endogenous {
                continue;
            }
            let t = compiled.tuple_of(i, w);
            if forbidden.contains(&(i, t.clone())) {
                continue;
            }
            if let Some((f_idx, pattern)) = target {
                if i == f_idx && pattern.matches(&t) {
                    continue;
                }
            }
            set.insert((i, t));
        }
        if set.is_empty() {
            if forbidden.is_empty() && target.is_none() {
                return Err(Error::CannotFalsify(format!(
                    "({})",
                    db.render_tuple(&w.assignment).join(",")
                )));
            }
            return Ok(None);
        }
        raw_sets.push(set);
    }

    // Universe in (relation, rendered tuple) order so that tuple ids sort
    // the way outputs display.
    let mut tuples: BTreeSet<(String, Vec<String>, usize, Vec<Value>)> = BTreeSet::new();
    for set in &raw_sets {
        for (i, t) in set {
            tuples.insert((
                qb.atoms[*i].relation.clone(),
                db.render_tuple(t),
                *i,
                t.clone(),
            ));
        }
    }
    let mut id_of: BTreeMap<(usize, Vec<Value>), u32> = BTreeMap::new();
    let mut universe = Vec::new();
    for (rel, _, i, t) in tuples {
        id_of.insert((i, t.clone()), universe.len() as u32);
        universe.push((rel, t));
    }
    let sets: Vec<Vec<u32>> = raw_sets
        .iter()
        .map(|s| {
            let mut v: Vec<u32> = s.iter().map(|key| id_of[key]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    Ok(Some(HittingInstance {
        sets: reduce_sets(sets, universe.len()),
        universe,
    }))
}

/// Classic kernelization for hitting set, run to a fixpoint:
/// - a constraint that contains another is satisfied whenever the smaller
///   one is, so supersets go;
/// - a tuple whose constraint memberships are a subset of another tuple's is
///   never needed in an optimal answer, so it leaves the candidate pool
///   (ties keep the smaller id).
fn reduce_sets(mut sets: Vec<Vec<u32>>, universe: usize) -> Vec<Vec<u32>> {
    loop {
        sets.sort();
        sets.dedup();
        let mut minimal: Vec<Vec<u32>> = Vec::new();
        for s in &sets {
            if !sets
                .iter()
                .any(|o| o.len() < s.len() && o.iter().all(|x| s.binary_search(x).is_ok()))
            {
                minimal.push(s.clone());
            }
        }
        sets = minimal;

        let words = sets.len().div_ceil(64);
        let mut membership: Vec<Vec<u64>> = vec![vec![0u64; words]; universe];
        let mut active: Vec<bool> = vec![false; universe];
        for (si, s) in sets.iter().enumerate() {
            for &id in s {
                membership[id as usize][si / 64] |= 1 << (si % 64);
                active[id as usize] = true;
            }
        }
        let ids: Vec<u32> = (0..universe as u32)
            .filter(|&i| active[i as usize])
            .collect();
        let subset = |a: &[u64], b: &[u64]| a.iter().zip(b).all(|(x, y)| x & !y == 0);
        let mut dominated: Vec<u32> = Vec::new();
        for &u in &ids {
            let mu = &membership[u as usize];
            let dead = ids.iter().any(|&v| {
                v != u
                    && subset(mu, &membership[v as usize])
                    && (!subset(&membership[v as usize], mu) || v < u)
            });
            if dead {
                dominated.push(u);
            }
        }
        if dominated.is_empty() {
            return sets;
        }
        let drop: BTreeSet<u32> = dominated.into_iter().collect();
        for s in &mut sets {
            s.retain(|x| !drop.contains(x));
            debug_assert!(
                !s.is_empty(),
                "domination must leave a survivor per constraint"
            );
        }
    }
}

/// Disjoint-set packing: a family of pairwise disjoint constraints
/// lower-bounds any hitting set. Two-element constraints form a graph whose
/// matching we improve with length-3 alternating exchanges (greedy alone
/// finds only a third of a long cycle, which cripples the bound); larger
/// constraints join greedily afterwards.
fn packing_bound(sets: &[Vec<u32>]) -> usize {
    let twos: Vec<[u32; 2]> = sets
        .iter()
        .filter(|s| s.len() == 2)
        .map(|s| [s[0], s[1]])
        .collect();
    let mut mate: BTreeMap<u32, u32> = BTreeMap::new();
    for e in &twos {
        if !mate.contains_key(&e[0]) && !mate.contains_key(&e[1]) {
            mate.insert(e[0], e[1]);
            mate.insert(e[1], e[0]);
        }
    }
    let mut adj: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for e in &twos {
        adj.entry(e[0]).or_default().push(e[1]);
        adj.entry(e[1]).or_default().push(e[0]);
    }
    for _ in 0..4 {
        let mut improved = false;
        let matched: Vec<(u32, u32)> = mate
            .iter()
            .filter(|(u, v)| *u < v)
            .map(|(&u, &v)| (u, v))
            .collect();
        for (u, v) in matched {
            if mate.get(&u) != Some(&v) {
                continue;
            }
            let free_nb = |w: u32, other: u32| -> Option<u32> {
                adj.get(&w)?
                    .iter()
                    .find(|x| !mate.contains_key(x) && **x != other)
                    .copied()
            };
            if let (Some(x), Some(y)) = (free_nb(u, v), free_nb(v, u)) {
                if x != y {
                    mate.remove(&u);
                    mate.remove(&v);
                    mate.insert(x, u);
                    mate.insert(u, x);
                    mate.insert(v, y);
                    mate.insert(y, v);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let mut count = mate.len() / 2;
    let mut used: BTreeSet<u32> = mate.keys().copied().collect();
    let mut rest: Vec<&Vec<u32>> = sets.iter().filter(|s| s.len() != 2).collect();
    rest.sort_by_key(|s| s.len());
    for s in rest {
        if s.iter().all(|x| !used.contains(x)) {
            used.extend(s.iter().copied());
            count += 1;
        }
    }
    count
}

/// Branch and bound. `cap`, when set, excludes answers of size >= cap
/// (so pass budget+1 for a "<= budget" decision). Returns the optimum below
/// the cap with the chosen ids, or None.
fn solve_hitting(
    inst: &HittingInstance,
    cap: Option<usize>,
    config: &Config,
    nodes: &mut u64,
) -> Result<Option<(usize, Vec<u32>)>> {
    if inst.sets.is_empty() {
        return Ok(Some((0, Vec::new())));
    }
    let mut best: Option<Vec<u32>> = None;
    let mut best_k = cap.unwrap_or(usize::MAX);
    let mut state = SearchState {
        chosen: Vec::new(),
        excluded: vec![false; inst.universe.len()],
    };
    search(inst, &mut state, &mut best, &mut best_k, config, nodes)?;
    let Some(ids) = best else { return Ok(None) };

    // Lexicographic tightening: rebuild the optimum as the smallest sorted
    // id sequence of the same size. Quadratic in the universe; skipped for
    // large instances where the deterministic search order already fixes
    // the output.
    if inst.universe.len() <= 200 && cap.is_none() {
        if let Some(tight) = lex_tighten(inst, ids.len(), config, nodes)? {
            return Ok(Some((tight.len(), tight)));
        }
    }
    Ok(Some((ids.len(), ids)))
}

struct SearchState {
    chosen: Vec<u32>,
    excluded: Vec<bool>,
}

/// DPLL-style search: propagate unit constraints, prune with the packing
/// bound, then branch on the highest-degree candidate by inclusion and
/// exclusion. Exclusion chains propagate deterministically through sparse
/// structures (paths, cycles), which plain inclusion branching handles badly.
fn search(
    inst: &HittingInstance,
    state: &mut SearchState,
    best: &mut Option<Vec<u32>>,
    best_k: &mut usize,
    config: &Config,
    nodes: &mut u64,
) -> Result<()> {
    *nodes += 1;
    if *nodes > config.branch_cap {
        return Err(Error::BranchCapExceeded(config.branch_cap));
    }

    // Unit propagation: a constraint with a single live candidate forces it.
    let mut forced = 0usize;
    let (live, dead_end) = loop {
        if state.chosen.len() >= *best_k {
            break (Vec::new(), true);
        }
        let chosen_set: BTreeSet<u32> = state.chosen.iter().copied().collect();
        let mut live: Vec<Vec<u32>> = Vec::new();
        let mut unit: Option<u32> = None;
        let mut empty = false;
        for s in &inst.sets {
            if s.iter().any(|x| chosen_set.contains(x)) {
                continue;
            }
            let cands: Vec<u32> = s
                .iter()
                .copied()
                .filter(|&x| !state.excluded[x as usize])
                .collect();
            match cands.len() {
                0 => {
                    empty = true;
                    break;
                }
                1 => unit = Some(cands[0]),
                _ => live.push(cands),
            }
        }
        if empty {
            break (Vec::new(), true);
        }
        match unit {
            Some(v) => {
                state.chosen.push(v);
                forced += 1;
            }
            None => break (live, false),
        }
    };

    if !dead_end {
        if live.is_empty() {
            let mut ids = state.chosen.clone();
            ids.sort_unstable();
            *best_k = ids.len();
            *best = Some(ids);
        } else if state.chosen.len() + packing_bound(&live) < *best_k {
            // Branch on the candidate hitting the most open constraints.
            let mut degree: BTreeMap<u32, usize> = BTreeMap::new();
            for s in &live {
                for &x in s {
                    *degree.entry(x).or_default() += 1;
                }
            }
            let (&v, _) = degree
                .iter()
                .max_by_key(|(id, d)| (**d, std::cmp::Reverse(**id)))
                .unwrap();
            state.chosen.push(v);
            search(inst, state, best, best_k, config, nodes)?;
            state.chosen.pop();

            state.excluded[v as usize] = true;
            search(inst, state, best, best_k, config, nodes)?;
            state.excluded[v as usize] = false;
        }
    }
    for _ in 0..forced {
        state.chosen.pop();
    }
    Ok(())
}

/// Finds the lexicographically smallest hitting set of exactly size `k`,
/// growing the answer id by id with feasibility decision searches.
fn lex_tighten(
    inst: &HittingInstance,
    k: usize,
    config: &Config,
    nodes: &mut u64,
) -> Result<Option<Vec<u32>>> {
    let mut fixed: Vec<u32> = Vec::new();
    let mut floor = 0u32;
    'grow: while fixed.len() < k {
        let mut cand = floor;
        while cand < inst.universe.len() as u32 {
            fixed.push(cand);
            if feasible(inst, &fixed, k, cand + 1, config, nodes)? {
                floor = cand + 1;
                continue 'grow;
            }
            fixed.pop();
            cand += 1;
        }
        return Ok(None);
    }
    let chosen: BTreeSet<u32> = fixed.iter().copied().collect();
    if inst
        .sets
        .iter()
        .all(|s| s.iter().any(|x| chosen.contains(x)))
    {
        Ok(Some(fixed))
    } else {
        Ok(None)
    }
}

/// Can `fixed` extend to а hitting set of size exactly `k` using ids >= floor?
fn feasible(
    inst: &HittingInstance,
    fixed: &[u32],
    k: usize,
    floor: u32,
    config: &Config,
    nodes: &mut u64,
) -> Result<bool> {
    let chosen: BTreeSet<u32> = fixed.iter().copied().collect();
    let remaining: Vec<Vec<u32>> = inst
        .sets
        .iter()
        .filter(|s| !s.iter().any(|x| chosen.contains(x)))
        .map(|s| {
            s.iter()
                .copied()
                .filter(|&x| x >= floor)
                .collect::<Vec<u32>>()
        })
        .collect();
    if remaining.iter().any(|s| s.is_empty()) {
        return Ok(remaining.iter().all(|s| !s.is_empty()));
    }
    let sub = HittingInstance {
        universe: inst.universe.clone(),
        sets: remaining,
    };
    let budget = k - fixed.len();
    let mut best: Option<Vec<u32>> = None;
    let mut best_k = budget + 1;
    let mut state = SearchState {
        chosen: Vec::new(),
        excluded: vec![false; sub.universe.len()],
    };
    search(&sub, &mut state, &mut best, &mut best_k, config, nodes)?;
    Ok(best.is_some())
}
