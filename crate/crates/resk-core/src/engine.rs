//! Databases, witness enumeration, and tuple deletions.
//!
//! Constants are interned to `u32` ids; relations are sorted sets of id
//! tuples, so iteration order (and therefore every solver output) is
//! deterministic. A `Database` is immutable once built — transformations
//! clone it.

use crate::error::Error;
use crate::query::{AtomPlan, Query};
use crate::Result;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

pub type Value = u32;

/// Caps for the exact machinery. `witness_cap` bounds enumeration,
/// `branch_cap` bounds branch-and-bound nodes.
#[derive(Debug, Clone, Copy)]
pub struct Config {
    pub witness_cap: usize,
    pub branch_cap: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            witness_cap: 1_000_000,
            branch_cap: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Relation {
    pub arity: usize,
    pub tuples: BTreeSet<Vec<Value>>,
}

#[derive(Debug, Clone, Default)]
pub struct Database {
    values: Vec<String>,
    lookup: HashMap<String, Value>,
    pub relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Database::default()
    }

    pub fn intern(&mut self, s: &str) -> Value {
        if let Some(&v) = self.lookup.get(s) {
            return v;
        }
        let v = self.values.len() as Value;
        self.values.push(s.to_string());
        self.lookup.insert(s.to_string(), v);
        v
    }

    pub fn value_id(&self, s: &str) -> Option<Value> {
        self.lookup.get(s).copied()
    }

    pub fn value_str(&self, v: Value) -> &str {
        &self.values[v as usize]
    }

    pub fn relation(&self, name: &str) -> Result<&Relation> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn ensure_relation(&mut self, name: &str, arity: usize) -> Result<()> {
        match self.relations.get(name) {
            Some(r) if r.arity != arity => Err(Error::ArityMismatch {
                relation: name.to_string(),
                expected: r.arity,
                got: arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.relations.insert(
                    name.to_string(),
                    Relation {
                        arity,
                        tuples: BTreeSet::new(),
                    },
                );
                Ok(())
            }
        }
    }

    /// Inserts a row of raw string values. Returns false when the row was
    /// already present (set semantics).
    pub fn add_row(&mut self, relation: &str, row: &[&str]) -> Result<bool> {
        self.ensure_relation(relation, row.len())?;
        let tuple: Vec<Value> = row.iter().map(|s| self.intern(s)).collect();
        Ok(self
            .relations
            .get_mut(relation)
            .unwrap()
            .tuples
            .insert(tuple))
    }

    pub fn add_tuple(&mut self, relation: &str, tuple: Vec<Value>) -> Result<bool> {
        self.ensure_relation(relation, tuple.len())?;
        Ok(self
            .relations
            .get_mut(relation)
            .unwrap()
            .tuples
            .insert(tuple))
    }

    pub fn render_tuple(&self, tuple: &[Value]) -> Vec<String> {
        tuple
            .iter()
            .map(|&v| self.value_str(v).to_string())
            .collect()
    }

    pub fn tuple_ids(&self, row: &[&str]) -> Option<Vec<Value>> {
        row.iter().map(|s| self.value_id(s)).collect()
    }

    pub fn total_tuples(&self) -> usize {
        self.relations.values().map(|r| r.tuples.len()).sum()
    }
}

/// One valuation of all query variables that makes every atom true.
/// `assignment[i]` is the value of the i-th variable of `Compiled::vars`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Witness {
    pub assignment: Vec<Value>,
}

/// A set of (relation, tuple) pairs slated for deletion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContingencySet {
    pub tuples: BTreeSet<(String, Vec<Value>)>,
}

impl ContingencySet {
    pub fn size(&self) -> usize {
        self.tuples.len()
    }

    pub fn render(&self, db: &Database) -> Vec<(String, Vec<String>)> {
        self.tuples
            .iter()
            .map(|(r, t)| (r.clone(), db.render_tuple(t)))
            .collect()
    }

    pub fn describe(&self, db: &Database) -> String {
        let mut s = String::new();
        for (i, (r, t)) in self.tuples.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(s, "{}({})", r, db.render_tuple(t).join(","));
        }
        s
    }
}

/// Positional view of a query used by the join and the solvers:
/// variables in first-occurrence order, atoms as variable-index vectors.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub vars: Vec<String>,
    pub atom_vars: Vec<Vec<usize>>,
    pub endogenous: Vec<bool>,
    pub atom_names: Vec<String>,
}

impl Compiled {
    pub fn new(q: &Query) -> Self {
        let vars: Vec<String> = q.vars().into_iter().map(|s| s.to_string()).collect();
        let index: BTreeMap<&str, usize> = vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        let atom_vars = q
            .atoms
            .iter()
            .map(|a| a.vars().into_iter().map(|v| index[v]).collect())
            .collect();
        Compiled {
            vars,
            atom_vars,
            endogenous: q.atoms.iter().map(|a| a.endogenous).collect(),
            atom_names: q.atoms.iter().map(|a| a.relation.clone()).collect(),
        }
    }

    pub fn var_index(&self, v: &str) -> Option<usize> {
        self.vars.iter().position(|x| x == v)
    }

    /// The tuple atom `i` contributes to witness `w`.
    pub fn tuple_of(&self, i: usize, w: &Witness) -> Vec<Value> {
        self.atom_vars[i]
            .iter()
            .map(|&vi| w.assignment[vi])
            .collect()
    }
}

/// Loads one CSV file per relation of `q` from `dir`. No header row,
/// positional columns, values optionally double-quoted. Duplicate rows are
/// dropped with a warning.
pub fn load_database(q: &Query, dir: &Path) -> Result<(Database, Vec<String>)> {
    let mut db = Database::new();
    let mut warnings = Vec::new();
    for atom in &q.atoms {
        let path = dir.join(format!("{}.csv", atom.relation));
        if !path.is_file() {
            return Err(Error::MissingRelationFile(path.display().to_string()));
        }
        let text = std::fs::read_to_string(&path)?;
        db.ensure_relation(&atom.relation, atom.terms.len())?;
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let row = parse_csv_row(line).map_err(|msg| Error::Syntax {
                line: lineno + 1,
                col: 1,
                msg: format!("{}: {msg}", path.display()),
            })?;
            if row.len() != atom.terms.len() {
                return Err(Error::ArityMismatch {
                    relation: atom.relation.clone(),
                    expected: atom.terms.len(),
                    got: row.len(),
                });
            }
            let fields: Vec<&str> = row.iter().map(|s| s.as_str()).collect();
            if !db.add_row(&atom.relation, &fields)? {
                warnings.push(format!(
                    "{}:{}: duplicate row ignored",
                    path.display(),
                    lineno + 1
                ));
            }
        }
    }
    Ok((db, warnings))
}

fn parse_csv_row(line: &str) -> std::result::Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        let mut field = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            loop {
                match chars.next() {
                    Some('"') => {
                        if chars.peek() == Some(&'"') {
                            chars.next();
                            field.push('"');
                        } else {
                            break;
                        }
                    }
                    Some(c) => field.push(c),
                    None => return Err("unterminated quoted field".into()),
                }
            }
            match chars.next() {
                None => {
                    out.push(field);
                    return Ok(out);
                }
                Some(',') => out.push(field),
                Some(c) => return Err(format!("unexpected `{c}` after quoted field")),
            }
        } else {
            loop {
                match chars.next() {
                    None => {
                        out.push(field);
                        return Ok(out);
                    }
                    Some(',') => {
                        out.push(field);
                        break;
                    }
                    Some(c) => field.push(c),
                }
            }
        }
    }
}

pub fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes a database back to one CSV file per relation.
pub fn write_database(db: &Database, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, rel) in &db.relations {
        let mut text = String::new();
        for tuple in &rel.tuples {
            let row: Vec<String> = tuple.iter().map(|&v| csv_escape(db.value_str(v))).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(dir.join(format!("{name}.csv")), text)?;
    }
    Ok(())
}

/// Materializes the normalization plan against a raw database: selections for
/// constants and repeated positions, projections, and intersections of merged
/// relations.
pub fn apply_plan(plan: &[AtomPlan], raw: &Database) -> Result<Database> {
    let mut out = raw.clone();
    for ap in plan {
        if ap.is_identity() {
            continue;
        }
        let mut acc: Option<BTreeSet<Vec<Value>>> = None;
        let mut width = 0;
        for src in &ap.sources {
            let rel = raw.relation(&src.relation)?;
            if rel.arity != src.arity {
                return Err(Error::ArityMismatch {
                    relation: src.relation.clone(),
                    expected: src.arity,
                    got: rel.arity,
                });
            }
            let consts: Vec<(usize, Option<Value>)> = src
                .const_filter
                .iter()
                .map(|(pos, c)| (*pos, raw.value_id(c)))
                .collect();
            let mut projected = BTreeSet::new();
            'tuples: for t in &rel.tuples {
                for (pos, cv) in &consts {
                    match cv {
                        Some(v) if t[*pos] == *v => {}
                        _ => continue 'tuples,
                    }
                }
                for (p, q) in &src.eq_filter {
                    if t[*p] != t[*q] {
                        continue 'tuples;
                    }
                }
                projected.insert(src.keep.iter().map(|&p| t[p]).collect::<Vec<Value>>());
            }
            width = src.keep.len();
            acc = Some(match acc {
                None => projected,
                Some(prev) => prev.intersection(&projected).cloned().collect(),
            });
        }
        for src in &ap.sources {
            if src.relation != ap.output {
                out.relations.remove(&src.relation);
            }
        }
        out.relations.insert(
            ap.output.clone(),
            Relation {
                arity: width,
                tuples: acc.unwrap_or_default(),
            },
        );
    }
    Ok(out)
}

/// Enumerates all witnesses of a (normalized, Boolean) query, joining atoms
/// in query order with hash indexes on already-bound variables.
pub fn enumerate_witnesses(q: &Query, db: &Database, config: &Config) -> Result<Vec<Witness>> {
    let c = Compiled::new(q);
    enumerate_compiled(&c, q, db, config.witness_cap)
}

/// True iff the query holds; per component, so disconnected queries do not
/// build cross products.
pub fn query_true(q: &Query, db: &Database) -> Result<bool> {
    for comp in q.components()? {
        let c = Compiled::new(&comp);
        if find_witness(&c, &comp, db)?.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

struct AtomIndex<'d> {
    shared: Vec<usize>,
    fresh: Vec<usize>,
    by_key: HashMap<Vec<Value>, Vec<&'d Vec<Value>>>,
}

fn build_indexes<'d>(c: &Compiled, q: &Query, db: &'d Database) -> Result<Vec<AtomIndex<'d>>> {
    let mut bound = vec![false; c.vars.len()];
    let mut out = Vec::with_capacity(q.atoms.len());
    for (i, atom) in q.atoms.iter().enumerate() {
        let rel = db.relation(&atom.relation)?;
        if rel.arity != c.atom_vars[i].len() {
            return Err(Error::ArityMismatch {
                relation: atom.relation.clone(),
                expected: c.atom_vars[i].len(),
                got: rel.arity,
            });
        }
        let shared: Vec<usize> = (0..rel.arity)
            .filter(|&p| bound[c.atom_vars[i][p]])
            .collect();
        let fresh: Vec<usize> = (0..rel.arity)
            .filter(|&p| !bound[c.atom_vars[i][p]])
            .collect();
        let mut by_key: HashMap<Vec<Value>, Vec<&Vec<Value>>> = HashMap::new();
        for t in &rel.tuples {
            let key: Vec<Value> = shared.iter().map(|&p| t[p]).collect();
            by_key.entry(key).or_default().push(t);
        }
        for &p in &fresh {
            bound[c.atom_vars[i][p]] = true;
        }
        out.push(AtomIndex {
            shared,
            fresh,
            by_key,
        });
    }
    Ok(out)
}

fn extend_partial(
    c: &Compiled,
    idx: &AtomIndex<'_>,
    atom: usize,
    partial: &[Value],
    t: &[Value],
) -> Option<Vec<Value>> {
    let mut ext = partial.to_vec();
    for &p in &idx.fresh {
        let vi = c.atom_vars[atom][p];
        // A fresh variable may repeat inside this atom only when positions
        // agree; normalization collapses those, but the check keeps
        // hand-built queries honest.
        if ext[vi] != Value::MAX && ext[vi] != t[p] {
            return None;
        }
        ext[vi] = t[p];
    }
    Some(ext)
}

pub(crate) fn enumerate_compiled(
    c: &Compiled,
    q: &Query,
    db: &Database,
    cap: usize,
) -> Result<Vec<Witness>> {
    let indexes = build_indexes(c, q, db)?;
    let mut partials: Vec<Vec<Value>> = vec![vec![Value::MAX; c.vars.len()]];
    for (i, idx) in indexes.iter().enumerate() {
        let mut next = Vec::new();
        for partial in &partials {
            let key: Vec<Value> = idx
                .shared
                .iter()
                .map(|&p| partial[c.atom_vars[i][p]])
                .collect();
            if let Some(matches) = idx.by_key.get(&key) {
                for t in matches {
                    if let Some(ext) = extend_partial(c, idx, i, partial, t) {
                        next.push(ext);
                        if next.len() > cap {
                            return Err(Error::WitnessCapExceeded(cap));
                        }
                    }
                }
            }
        }
        partials = next;
        if partials.is_empty() {
            return Ok(Vec::new());
        }
    }
    Ok(partials
        .into_iter()
        .map(|assignment| Witness { assignment })
        .collect())
}

/// Depth-first search for a single witness; used by truth checks so that a
/// positive answer never pays for full enumeration.
pub(crate) fn find_witness(c: &Compiled, q: &Query, db: &Database) -> Result<Option<Witness>> {
    let indexes = build_indexes(c, q, db)?;
    fn dfs(
        c: &Compiled,
        indexes: &[AtomIndex<'_>],
        atom: usize,
        partial: &[Value],
    ) -> Option<Vec<Value>> {
        if atom == indexes.len() {
            return Some(partial.to_vec());
        }
        let idx = &indexes[atom];
        let key: Vec<Value> = idx
            .shared
            .iter()
            .map(|&p| partial[c.atom_vars[atom][p]])
            .collect();
        for t in idx.by_key.get(&key)? {
            if let Some(ext) = extend_partial(c, idx, atom, partial, t) {
                if let Some(done) = dfs(c, indexes, atom + 1, &ext) {
                    return Some(done);
                }
            }
        }
        None
    }
    let start = vec![Value::MAX; c.vars.len()];
    Ok(dfs(c, &indexes, 0, &start).map(|assignment| Witness { assignment }))
}

/// Removes the contingency set from the database. Every member must be an
/// endogenous tuple of `q` present in `db`.
pub fn apply_deletions(q: &Query, db: &Database, g: &ContingencySet) -> Result<Database> {
    let mut out = db.clone();
    for (rel_name, tuple) in &g.tuples {
        let atom = q
            .atom(rel_name)
            .ok_or_else(|| Error::UnknownRelation(rel_name.clone()))?;
        if !atom.endogenous {
            return Err(Error::BadDeletion(format!(
                "{}({})",
                rel_name,
                db.render_tuple(tuple).join(",")
            )));
        }
        let rel = out
            .relations
            .get_mut(rel_name)
            .ok_or_else(|| Error::UnknownRelation(rel_name.clone()))?;
        if !rel.tuples.remove(tuple) {
            return Err(Error::BadDeletion(format!(
                "{}({})",
                rel_name,
                db.render_tuple(tuple).join(",")
            )));
        }
    }
    Ok(out)
}
