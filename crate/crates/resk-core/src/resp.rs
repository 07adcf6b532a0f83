//! Top-level solvers. They classify the (component of the) query, run the
//! linearize + min-cut pipeline when it is tractable, fall back to the exact
//! search otherwise, and verify every answer against the definitions before
//! returning it.

use crate::engine::{
    apply_deletions, apply_plan, enumerate_witnesses, query_true, Compiled, Config, ContingencySet,
    Database, Value, Witness,
};
use crate::error::Error;
use crate::exact::{self, ResilienceAnswer, RespAnswer};
use crate::flow::{self, NetworkContext, TuplePattern};
use crate::linearize;
use crate::query::{normalize, AtomPlan, Query};
use crate::structure;
use crate::Result;
use std::collections::{BTreeMap, BTreeSet};

/// A per-position pattern over one relation; `None` cells are wildcards.
/// `S(*,5,7)` matches every S-tuple with 5 and 7 in the last two columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WildcardTuple {
    pub relation: String,
    pub pattern: Vec<Option<String>>,
}

impl WildcardTuple {
    pub fn concrete(relation: &str, values: &[&str]) -> Self {
        WildcardTuple {
            relation: relation.to_string(),
            pattern: values.iter().map(|v| Some(v.to_string())).collect(),
        }
    }

    pub fn has_wildcards(&self) -> bool {
        self.pattern.iter().any(|c| c.is_none())
    }

    /// Parses `S(3,5,7)`, `S(*,5,7)`, `R(a1,*)`, with double quotes for
    /// values containing commas or parentheses.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Invalid(format!("bad tuple `{text}`: {msg}"));
        let open = text.find('(').ok_or_else(|| bad("missing `(`"))?;
        if !text.trim_end().ends_with(')') {
            return Err(bad("missing `)`"));
        }
        let relation = text[..open].trim().to_string();
        if relation.is_empty() {
            return Err(bad("missing relation name"));
        }
        let inner = &text.trim_end()[open + 1..text.trim_end().len() - 1];
        let mut cells = Vec::new();
        let mut field = String::new();
        let mut chars = inner.chars().peekable();
        let mut quoted_done = false;
        loop {
            match chars.next() {
                Some('"') if field.is_empty() && !quoted_done => loop {
                    match chars.next() {
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            field.push('"');
                        }
                        Some('"') => {
                            quoted_done = true;
                            break;
                        }
                        Some(c) => field.push(c),
                        None => return Err(bad("unterminated quote")),
                    }
                },
                Some(',') => {
                    cells.push(std::mem::take(&mut field));
                    quoted_done = false;
                }
                Some(c) => {
                    if quoted_done && !c.is_whitespace() {
                        return Err(bad("text after closing quote"));
                    }
                    if !quoted_done {
                        field.push(c);
                    }
                }
                None => {
                    cells.push(field);
                    break;
                }
            }
        }
        let pattern = cells
            .into_iter()
            .map(|c| {
                let c = c.trim().to_string();
                if c == "*" {
                    None
                } else {
                    Some(c)
                }
            })
            .collect::<Vec<_>>();
        if pattern.is_empty() {
            return Err(bad("empty tuple"));
        }
        Ok(WildcardTuple { relation, pattern })
    }

    /// Interns the constant cells. `None` when some constant does not occur
    /// in the database at all (the pattern then matches nothing).
    fn intern(&self, db: &Database) -> Option<TuplePattern> {
        let mut cells = Vec::with_capacity(self.pattern.len());
        for c in &self.pattern {
            match c {
                None => cells.push(None),
                Some(s) => cells.push(Some(db.value_id(s)?)),
            }
        }
        Some(TuplePattern {
            relation: self.relation.clone(),
            cells,
        })
    }
}

impl std::fmt::Display for WildcardTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let cells: Vec<String> = self
            .pattern
            .iter()
            .map(|c| match c {
                None => "*".to_string(),
                Some(s) => s.clone(),
            })
            .collect();
        write!(f, "{}({})", self.relation, cells.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Flow,
    Exact,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub k: usize,
    pub contingency: Vec<(String, Vec<String>)>,
    pub method: Method,
}

#[derive(Debug, Clone)]
pub enum RespOutcome {
    Cause(Solution),
    NotACause,
}

#[derive(Debug, Clone)]
pub struct MaxRespSet {
    /// The resilience optimum; members have responsibility sets of size k-1.
    pub k: usize,
    pub members: Vec<(String, Vec<String>)>,
}

/// Minimum endogenous deletions falsifying the query: min-cut over the
/// linearized query when triad-free (after closure and domination), the
/// exact search otherwise. Disconnected queries take the component minimum.
pub fn solve_resilience(q: &Query, db: &Database, config: &Config) -> Result<Solution> {
    let mut best: Option<Solution> = None;
    for comp in q.components()? {
        let sol = resilience_component(&comp, db, config)?;
        if sol.k == 0 {
            return Ok(sol);
        }
        if best.as_ref().map(|b| sol.k < b.k).unwrap_or(true) {
            best = Some(sol);
        }
    }
    best.ok_or_else(|| Error::Invalid("query has no atoms".into()))
}

/// A component readied for the flow pipeline: closed under induced rewrites
/// with the database lifted alongside, then re-normalized because rewrites
/// can leave two atoms with the same variable set (those merge into an
/// intersection). Contingency tuples map back through both steps.
struct Prepared {
    query: Query,
    db: Database,
    merge_plan: Vec<AtomPlan>,
    /// Pre-closure arity per original relation name.
    original_arity: BTreeMap<String, usize>,
    /// Endogenous flags of the pre-merge (closed) query, by relation.
    closed_endogenous: BTreeMap<String, bool>,
}

impl Prepared {
    fn new(comp: &Query, db: &Database, config: &Config) -> Result<Prepared> {
        let closed = structure::close_with_database(comp, db, config)?;
        let merged = normalize(&closed.query, None)?;
        let merged_db = apply_plan(&merged.plan, &closed.database)?;
        let closed_endogenous = closed
            .query
            .atoms
            .iter()
            .map(|a| (a.relation.clone(), a.endogenous))
            .collect();
        Ok(Prepared {
            query: merged.query,
            db: merged_db,
            merge_plan: merged.plan,
            original_arity: closed.original_arity,
            closed_endogenous,
        })
    }

    /// Maps tuples of the prepared instance back to original tuples:
    /// a merged relation delegates to its first endogenous member (deleting
    /// the joint tuple there kills the same witnesses), then lifted columns
    /// drop off.
    fn unlift(&self, tuples: &[(String, Vec<Value>)]) -> ContingencySet {
        let mut set = ContingencySet::default();
        for (rel, t) in tuples {
            let (closed_rel, closed_tuple) = match self
                .merge_plan
                .iter()
                .find(|p| &p.output == rel && !p.is_identity())
            {
                None => (rel.clone(), t.clone()),
                Some(plan) => {
                    let src = plan
                        .sources
                        .iter()
                        .find(|s| self.closed_endogenous.get(&s.relation) == Some(&true))
                        .unwrap_or(&plan.sources[0]);
                    let mut source_tuple = vec![0; src.arity];
                    for (j, &pos) in src.keep.iter().enumerate() {
                        source_tuple[pos] = t[j];
                    }
                    (src.relation.clone(), source_tuple)
                }
            };
            let arity = self
                .original_arity
                .get(&closed_rel)
                .copied()
                .unwrap_or(closed_tuple.len());
            set.tuples
                .insert((closed_rel, closed_tuple[..arity].to_vec()));
        }
        set
    }
}

fn resilience_component(comp: &Query, db: &Database, config: &Config) -> Result<Solution> {
    let prepared = Prepared::new(comp, db, config)?;
    let dominated = structure::apply_domination(&prepared.query);
    if structure::find_triad(&dominated)?.is_none() {
        let witnesses = enumerate_witnesses(&prepared.query, &prepared.db, config)?;
        if witnesses.is_empty() {
            return Ok(Solution {
                k: 0,
                contingency: Vec::new(),
                method: Method::Flow,
            });
        }
        let lin = linearize::linearize_triad_free(&dominated)?;
        let ctx = NetworkContext::new(&dominated, &lin, &prepared.db, None)?;
        let cut = flow::min_cut(&ctx.resilience_network(&witnesses));
        if cut.value >= ctx.sentinel {
            return Err(Error::CannotFalsify(
                "the min cut cannot avoid exogenous tuples".into(),
            ));
        }
        let set = prepared.unlift(&cut.tuples);
        exact::verify_resilience(comp, db, &set)?;
        debug_assert_eq!(set.size() as u64, cut.value);
        Ok(Solution {
            k: cut.value as usize,
            contingency: set.render(db),
            method: Method::Flow,
        })
    } else {
        let ResilienceAnswer::Exact { k, set } = exact::exact_resilience(comp, db, config, None)?
        else {
            unreachable!("no budget given")
        };
        Ok(Solution {
            k,
            contingency: set.render(db),
            method: Method::Exact,
        })
    }
}

/// Responsibility of a concrete tuple or wildcard set: minimum contingency
/// that leaves the query true but makes deleting the matched tuples falsify
/// it. Flow path when the full-domination normal form is triad-free.
pub fn solve_responsibility(
    q: &Query,
    db: &Database,
    config: &Config,
    target: &WildcardTuple,
) -> Result<RespOutcome> {
    let comps = q.components()?;
    let home = comps
        .iter()
        .find(|c| c.atom(&target.relation).is_some())
        .ok_or_else(|| Error::UnknownRelation(target.relation.clone()))?;
    for comp in &comps {
        if !query_true(comp, db)? {
            return Ok(RespOutcome::NotACause);
        }
    }

    {
        let atom = home.atom(&target.relation).unwrap();
        if atom.vars().len() != target.pattern.len() {
            return Err(Error::ArityMismatch {
                relation: target.relation.clone(),
                expected: atom.vars().len(),
                got: target.pattern.len(),
            });
        }
    }

    let prepared = Prepared::new(home, db, config)?;
    let exact_fallback = |db: &Database| -> Result<RespOutcome> {
        let answer = exact::exact_wildcard_responsibility(
            home,
            db,
            config,
            &match target.intern(db) {
                Some(p) => p,
                None => return Ok(RespOutcome::NotACause),
            },
        )?;
        Ok(match answer {
            RespAnswer::Cause { k, set } => RespOutcome::Cause(Solution {
                k,
                contingency: set.render(db),
                method: Method::Exact,
            }),
            RespAnswer::NotACause => RespOutcome::NotACause,
        })
    };
    if prepared.query.atom(&target.relation).is_none() {
        // The rewrites merged the target's relation into an intersection
        // atom; the exact search handles that case directly.
        return exact_fallback(db);
    }
    let (normal, marking) =
        structure::apply_full_domination_with_target(&prepared.query, Some(&target.relation))?;
    if structure::find_triad(&normal)?.is_some() {
        return exact_fallback(db);
    }

    // Lift the pattern to the closed query: appended FD columns are
    // functions of the original ones, so wildcards keep the match set.
    let lifted_arity = prepared.query.atom(&target.relation).unwrap().vars().len();
    let mut lifted = target.clone();
    lifted.pattern.resize(lifted_arity, None);
    let Some(pattern) = lifted.intern(&prepared.db) else {
        return Ok(RespOutcome::NotACause);
    };

    let lin = linearize::linearize_triad_free(&normal)?;
    let ctx = NetworkContext::new(&normal, &lin, &prepared.db, Some(&target.relation))?;
    let witnesses = enumerate_witnesses(&prepared.query, &prepared.db, config)?;
    let compiled = Compiled::new(&prepared.query);
    let f_idx = prepared.query.atom_index(&target.relation)?;
    let eligible: Vec<&Witness> = witnesses
        .iter()
        .filter(|w| pattern.matches(&compiled.tuple_of(f_idx, w)))
        .collect();
    if eligible.is_empty() {
        return Ok(RespOutcome::NotACause);
    }

    // When full domination made the target's own relation exogenous, the
    // matched-tuple look-alikes (same values on non-solitary variables)
    // must be deleted up front: a surviving witness through the target
    // would otherwise shadow them past any cut.
    let forced_groups: Option<ForcedDeletions> = match &marking {
        Some(m) => Some(ForcedDeletions::new(
            &prepared.query,
            &compiled,
            f_idx,
            &m.solitary,
            &witnesses,
            &pattern,
        )?),
        None => None,
    };

    let mut best: Option<(u64, ContingencySet)> = None;
    for w in eligible {
        let m_star = compiled.tuple_of(f_idx, w);
        let forced = forced_groups
            .as_ref()
            .map(|fg| fg.for_target_tuple(&m_star));
        let net = ctx.responsibility_network(&witnesses, w, &pattern, forced.as_ref());
        let cut = flow::min_cut(&net);
        if cut.value >= ctx.sentinel {
            continue; // this witness admits no contingency set
        }
        let total = cut.value + forced.as_ref().map(|f| f.len() as u64).unwrap_or(0);
        if best.as_ref().map(|(bk, _)| total < *bk).unwrap_or(true) {
            let mut tuples = cut.tuples.clone();
            if let Some(f) = &forced {
                for t in f {
                    tuples.push((target.relation.clone(), t.clone()));
                }
            }
            let set = prepared.unlift(&tuples);
            best = Some((total, set));
        }
    }
    let Some((k, set)) = best else {
        return Ok(RespOutcome::NotACause);
    };
    let original_pattern = target
        .intern(db)
        .ok_or_else(|| Error::Invalid("target constants missing from the database".into()))?;
    exact::verify_responsibility(home, db, &original_pattern, k as usize, &set)?;
    Ok(RespOutcome::Cause(Solution {
        k: k as usize,
        contingency: set.render(db),
        method: Method::Flow,
    }))
}

/// The look-alike bookkeeping for a fully dominated target relation:
/// tuples of that relation grouped by their non-solitary projection.
struct ForcedDeletions {
    /// non-solitary projection -> tuples with that projection, minus matches.
    groups: BTreeMap<Vec<Value>, BTreeSet<Vec<Value>>>,
    nonsolitary_pos: Vec<usize>,
}

impl ForcedDeletions {
    fn new(
        q: &Query,
        compiled: &Compiled,
        f_idx: usize,
        solitary: &BTreeSet<String>,
        witnesses: &[Witness],
        pattern: &TuplePattern,
    ) -> Result<Self> {
        let f_vars = q.atoms[f_idx].vars();
        let nonsolitary_pos: Vec<usize> = f_vars
            .iter()
            .enumerate()
            .filter(|(_, v)| !solitary.contains(**v))
            .map(|(p, _)| p)
            .collect();
        let mut groups: BTreeMap<Vec<Value>, BTreeSet<Vec<Value>>> = BTreeMap::new();
        for w in witnesses {
            let t = compiled.tuple_of(f_idx, w);
            if pattern.matches(&t) {
                continue;
            }
            let key: Vec<Value> = nonsolitary_pos.iter().map(|&p| t[p]).collect();
            groups.entry(key).or_default().insert(t);
        }
        Ok(ForcedDeletions {
            groups,
            nonsolitary_pos,
        })
    }

    fn for_target_tuple(&self, m_star: &[Value]) -> BTreeSet<Vec<Value>> {
        let key: Vec<Value> = self.nonsolitary_pos.iter().map(|&p| m_star[p]).collect();
        self.groups.get(&key).cloned().unwrap_or_default()
    }
}

/// Computes the set of maximum-responsibility tuples by repeated resilience:
/// start from a minimum contingency set Γ with |Γ| = k; any other cause c
/// belongs iff the resilience of D - {c} is k - 1, and that run's contingency
/// set joins the answer too.
pub fn max_responsibility_set(q: &Query, db: &Database, config: &Config) -> Result<MaxRespSet> {
    if !query_true(q, db)? {
        return Err(Error::Invalid(
            "query is false; no tuple has responsibility".into(),
        ));
    }
    let base = solve_resilience(q, db, config)?;
    let k = base.k;
    let mut members: BTreeSet<(String, Vec<String>)> = base.contingency.into_iter().collect();

    let causes = cause_tuples(q, db, config)?;
    for c in causes {
        if members.contains(&c) {
            continue;
        }
        let mut single = ContingencySet::default();
        let ids = db
            .tuple_ids(&c.1.iter().map(|s| s.as_str()).collect::<Vec<_>>())
            .ok_or_else(|| Error::Invalid("cause tuple has unknown values".into()))?;
        single.tuples.insert((c.0.clone(), ids));
        let without = apply_deletions(q, db, &single)?;
        let gamma = if query_true(q, &without)? {
            Some(solve_resilience(q, &without, config)?)
        } else {
            None
        };
        let sub = gamma.as_ref().map(|g| g.k).unwrap_or(0);
        if sub == k - 1 {
            if let Some(g) = gamma {
                members.extend(g.contingency);
            }
            members.insert(c);
        }
    }
    Ok(MaxRespSet {
        k,
        members: members.into_iter().collect(),
    })
}

/// Causes at desk scale: endogenous tuples occurring in at least one witness.
pub fn cause_tuples(
    q: &Query,
    db: &Database,
    config: &Config,
) -> Result<Vec<(String, Vec<String>)>> {
    let mut out: BTreeSet<(String, Vec<String>)> = BTreeSet::new();
    for comp in q.components()? {
        let mut qb = comp.clone();
        qb.head.clear();
        let compiled = Compiled::new(&qb);
        let witnesses = enumerate_witnesses(&qb, db, config)?;
        for w in &witnesses {
            for (i, atom) in qb.atoms.iter().enumerate() {
                if atom.endogenous {
                    out.insert((
                        atom.relation.clone(),
                        db.render_tuple(&compiled.tuple_of(i, w)),
                    ));
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}
