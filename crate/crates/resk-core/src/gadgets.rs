//! Hardness-gadget databases from 3CNF formulas, plus the embedding of
//! triangle instances into arbitrary triad queries. These are the adversarial
//! test factories: a formula is satisfiable exactly when the generated
//! instance's optimum meets the advertised bound.

use crate::engine::{ContingencySet, Database};
use crate::error::Error;
use crate::query::{parse_query, Query};
use crate::structure::{self, Triad};
use crate::Result;
use std::collections::{BTreeSet, HashMap};

/// A 3CNF formula. Literals are signed 1-based variable indexes; every
/// clause must use three distinct variables (the gadget vertex
/// identification scheme requires it).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf3 {
    pub n: usize,
    pub clauses: Vec<[i32; 3]>,
}

impl Cnf3 {
    pub fn new(n: usize, clauses: Vec<[i32; 3]>) -> Result<Self> {
        for (ci, clause) in clauses.iter().enumerate() {
            let mut vars = BTreeSet::new();
            for &lit in clause {
                let v = lit.unsigned_abs() as usize;
                if lit == 0 || v > n {
                    return Err(Error::BadCnf(format!(
                        "literal {lit} out of range in clause {}",
                        ci + 1
                    )));
                }
                if !vars.insert(v) {
                    return Err(Error::RepeatedClauseVariable(ci + 1));
                }
            }
        }
        Ok(Cnf3 { n, clauses })
    }

    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    /// Standard DIMACS CNF: `c` comments, a `p cnf <vars> <clauses>` header,
    /// then clauses as whitespace-separated literals terminated by 0.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut lits: Vec<i32> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('p') {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 || parts[0] != "cnf" {
                    return Err(Error::BadCnf(format!("bad problem line `{line}`")));
                }
                let n = parts[1]
                    .parse()
                    .map_err(|_| Error::BadCnf("bad var count".into()))?;
                let m = parts[2]
                    .parse()
                    .map_err(|_| Error::BadCnf("bad clause count".into()))?;
                header = Some((n, m));
                continue;
            }
            for tok in line.split_whitespace() {
                lits.push(
                    tok.parse()
                        .map_err(|_| Error::BadCnf(format!("bad literal `{tok}`")))?,
                );
            }
        }
        let Some((n, m)) = header else {
            return Err(Error::BadCnf("missing `p cnf` line".into()));
        };
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        for lit in lits {
            if lit == 0 {
                if current.len() != 3 {
                    return Err(Error::BadCnf(format!(
                        "clause {} has {} literals; need exactly 3",
                        clauses.len() + 1,
                        current.len()
                    )));
                }
                clauses.push([current[0], current[1], current[2]]);
                current.clear();
            } else {
                current.push(lit);
            }
        }
        if !current.is_empty() {
            return Err(Error::BadCnf(
                "trailing literals without terminating 0".into(),
            ));
        }
        if clauses.len() != m {
            return Err(Error::BadCnf(format!(
                "header promises {m} clauses, found {}",
                clauses.len()
            )));
        }
        Cnf3::new(n, clauses)
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&lit| {
                let v = lit.unsigned_abs() as usize - 1;
                (lit > 0) == assignment[v]
            })
        })
    }

    /// Exhaustive satisfiability check; fine for the desk-scale formulas the
    /// gadget tests use.
    pub fn find_assignment(&self) -> Option<Vec<bool>> {
        for bits in 0u64..(1u64 << self.n) {
            let assignment: Vec<bool> = (0..self.n).map(|i| bits >> i & 1 == 1).collect();
            if self.satisfied_by(&assignment) {
                return Some(assignment);
            }
        }
        None
    }
}

struct UnionFind {
    parent: HashMap<String, String>,
}

impl UnionFind {
    fn new() -> Self {
        UnionFind {
            parent: HashMap::new(),
        }
    }

    fn find(&mut self, x: &str) -> String {
        let p = match self.parent.get(x) {
            None => return x.to_string(),
            Some(p) => p.clone(),
        };
        let root = self.find(&p);
        self.parent.insert(x.to_string(), root.clone());
        root
    }

    /// Smaller name becomes the representative.
    fn union(&mut self, a: &str, b: &str) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        let (min, max) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent.insert(max, min);
    }
}

/// The triangle query the generated database is meant for.
pub fn triangle_query() -> Query {
    parse_query("q :- R(x,y), S(y,z), T(z,x)").unwrap()
}

/// Edge roles inside one variable gadget, prior to identification.
/// `k` runs 1..=4m around the cycle; `next(k)` wraps.
struct TriangleNames {
    m: usize,
}

impl TriangleNames {
    fn wrap(&self, k: usize) -> usize {
        (k - 1) % (4 * self.m) + 1
    }
    fn a(&self, i: usize, k: usize) -> String {
        format!("a{}_{}", i, self.wrap(k))
    }
    fn b(&self, i: usize, k: usize) -> String {
        format!("b{}_{}", i, self.wrap(k))
    }
    fn c(&self, i: usize, k: usize) -> String {
        format!("c{}_{}", i, self.wrap(k))
    }
}

/// Builds the triangle-hardness database: one 2m-segment cycle gadget per
/// variable and one vertex-identified triangle per clause. The returned
/// budget is 6mn: the instance has a contingency set of that size iff the
/// formula is satisfiable.
pub fn gen_triangle_instance(psi: &Cnf3) -> Result<(Database, usize)> {
    let (n, m) = (psi.n, psi.m());
    if m == 0 {
        return Err(Error::BadCnf("formula needs at least one clause".into()));
    }
    let names = TriangleNames { m };
    let mut uf = UnionFind::new();

    for (j, clause) in psi.clauses.iter().enumerate() {
        let [l1, l2, l3] = *clause;
        let (i1, p1) = (l1.unsigned_abs() as usize, l1 > 0);
        let (i2, p2) = (l2.unsigned_abs() as usize, l2 > 0);
        let (i3, p3) = (l3.unsigned_abs() as usize, l3 > 0);
        // Pick the solid edge carrying the literal's polarity inside the
        // clause's odd segment: R and T are positive at odd k, S at even k.
        let k1 = if p1 { 4 * j + 1 } else { 4 * j + 2 };
        let k2 = if p2 { 4 * j + 2 } else { 4 * j + 1 };
        let k3 = if p3 { 4 * j + 1 } else { 4 * j + 2 };
        uf.union(&names.b(i1, k1), &names.b(i2, k2));
        uf.union(&names.c(i2, k2), &names.c(i3, k3));
        uf.union(&names.a(i3, k3 + 1), &names.a(i1, k1));
    }

    let mut db = Database::new();
    for i in 1..=n {
        for k in 1..=4 * m {
            let a_k = uf.find(&names.a(i, k));
            let b_k = uf.find(&names.b(i, k));
            let c_k = uf.find(&names.c(i, k));
            let a_next = uf.find(&names.a(i, k + 1));
            let b_next = uf.find(&names.b(i, k + 1));
            // Solid cycle edges.
            db.add_row("R", &[&a_k, &b_k])?;
            db.add_row("S", &[&b_k, &c_k])?;
            db.add_row("T", &[&c_k, &a_next])?;
            // Dotted edges, each closing exactly one triangle.
            db.add_row("R", &[&a_next, &b_k])?;
            db.add_row("S", &[&b_next, &c_k])?;
            db.add_row("T", &[&c_k, &a_k])?;
        }
    }
    Ok((db, 6 * m * n))
}

/// The contingency set a truth assignment induces on the triangle instance:
/// per variable the 6m solid edges carrying the assigned literal. It
/// falsifies the query exactly when the assignment satisfies the formula.
pub fn triangle_assignment_contingency(
    psi: &Cnf3,
    db: &Database,
    assignment: &[bool],
) -> Result<ContingencySet> {
    let m = psi.m();
    let names = TriangleNames { m };
    let mut uf = rebuild_uf(psi, &names);
    let mut set = ContingencySet::default();
    let mut insert = |db: &Database, rel: &str, from: String, to: String| -> Result<()> {
        let t = db
            .tuple_ids(&[&from, &to])
            .ok_or_else(|| Error::Invalid(format!("missing gadget value {from}/{to}")))?;
        set.tuples.insert((rel.to_string(), t));
        Ok(())
    };
    for i in 1..=psi.n {
        let truth = assignment[i - 1];
        for k in 1..=4 * m {
            let odd = k % 2 == 1;
            if odd == truth {
                insert(db, "R", uf.find(&names.a(i, k)), uf.find(&names.b(i, k)))?;
                insert(
                    db,
                    "T",
                    uf.find(&names.c(i, k)),
                    uf.find(&names.a(i, k + 1)),
                )?;
            }
            if (k % 2 == 0) == truth {
                insert(db, "S", uf.find(&names.b(i, k)), uf.find(&names.c(i, k)))?;
            }
        }
    }
    Ok(set)
}

fn rebuild_uf(psi: &Cnf3, names: &TriangleNames) -> UnionFind {
    let mut uf = UnionFind::new();
    for (j, clause) in psi.clauses.iter().enumerate() {
        let [l1, l2, l3] = *clause;
        let (i1, p1) = (l1.unsigned_abs() as usize, l1 > 0);
        let (i2, p2) = (l2.unsigned_abs() as usize, l2 > 0);
        let (i3, p3) = (l3.unsigned_abs() as usize, l3 > 0);
        let k1 = if p1 { 4 * j + 1 } else { 4 * j + 2 };
        let k2 = if p2 { 4 * j + 2 } else { 4 * j + 1 };
        let k3 = if p3 { 4 * j + 1 } else { 4 * j + 2 };
        uf.union(&names.b(i1, k1), &names.b(i2, k2));
        uf.union(&names.c(i2, k2), &names.c(i3, k3));
        uf.union(&names.a(i3, k3 + 1), &names.a(i1, k1));
    }
    uf
}

/// The rats query the generated database is meant for.
pub fn rats_query() -> Query {
    parse_query("q :- A(x), R(x,y), S(y,z), T(z,x)").unwrap()
}

#[derive(Debug, Clone)]
pub struct RatsInstance {
    pub db: Database,
    /// The distinguished tuple S(b0,c0) whose responsibility encodes SAT.
    pub target_relation: String,
    pub target: Vec<String>,
    /// Budget: responsibility of the target is <= k iff the formula is SAT.
    pub k: usize,
    pub t: usize,
    /// True when `t` was overridden below the faithful 8m.
    pub faithful: bool,
}

/// Builds the responsibility-hardness database for the rats query: per
/// variable a complete bipartite S-block with two literal matchings hanging
/// off the anchor a0, per clause seven elements joined to the matchings of
/// the clause's satisfying assignments. `t_override` shrinks the matchings
/// for desk-scale tests (non-faithful below the canonical 8m, still needing
/// t >= 7m so that matching elements stay unique per clause-assignment).
pub fn gen_rats_instance(psi: &Cnf3, t_override: Option<usize>) -> Result<RatsInstance> {
    let (n, m) = (psi.n, psi.m());
    if m == 0 {
        return Err(Error::BadCnf("formula needs at least one clause".into()));
    }
    let t = t_override.unwrap_or(8 * m);
    if t < 7 * m {
        return Err(Error::RatsTooSmall { t, m });
    }
    let mut db = Database::new();
    db.add_row("A", &["a0"])?;
    db.add_row("R", &["a0", "b0"])?;
    db.add_row("S", &["b0", "c0"])?;
    db.add_row("T", &["c0", "a0"])?;

    let b = |l: usize, j: usize| format!("b{l}_{j}");
    let c = |l: usize, j: usize| format!("c{l}_{j}");
    for l in 1..=n {
        for j in 1..=2 * t {
            db.add_row("R", &["a0", &b(l, j)])?;
            db.add_row("T", &[&c(l, j), "a0"])?;
        }
        for j in 1..=t {
            for jj in 1..=t {
                db.add_row("S", &[&b(l, j), &c(l, jj)])?;
            }
            // The positive-literal matching pairs the two halves one way,
            // the negative-literal matching the other.
            db.add_row("S", &[&b(l, j), &c(l, t + j)])?;
            db.add_row("S", &[&b(l, t + j), &c(l, j)])?;
        }
    }

    let mut r_counter = 0usize;
    let mut used = BTreeSet::new();
    for (s, clause) in psi.clauses.iter().enumerate() {
        for i in good_assignments(clause) {
            r_counter += 1;
            let r = r_counter;
            assert!(r <= t, "matching allocation must stay within t");
            assert!(used.insert((s, i)));
            let element = format!("a{}_{}", s + 1, i);
            db.add_row("A", &element_row(&element))?;
            for (pos, &lit) in clause.iter().enumerate() {
                let l = lit.unsigned_abs() as usize;
                let truth = i >> (2 - pos) & 1 == 1;
                let (b_idx, c_idx) = if truth { (r, t + r) } else { (t + r, r) };
                db.add_row("R", &[&element, &b(l, b_idx)])?;
                db.add_row("T", &[&c(l, c_idx), &element])?;
            }
        }
    }

    let k = 2 * t * n + 6 * m;
    Ok(RatsInstance {
        db,
        target_relation: "S".to_string(),
        target: vec!["b0".to_string(), "c0".to_string()],
        k,
        t,
        faithful: t == 8 * m,
    })
}

fn element_row(element: &str) -> [&str; 1] {
    [element]
}

/// The seven (or fewer never happens: clauses always have exactly one
/// falsifying assignment) assignments of a clause's three variables that
/// satisfy it, encoded as 3-bit numbers, first literal's variable at the
/// high bit.
fn good_assignments(clause: &[i32; 3]) -> Vec<usize> {
    (0..8)
        .filter(|i| {
            clause.iter().enumerate().any(|(pos, &lit)| {
                let truth = i >> (2 - pos) & 1 == 1;
                (lit > 0) == truth
            })
        })
        .collect()
}

/// The contingency set a truth assignment induces on a rats instance: one
/// side of each bipartite block, the assigned matching, and the clause
/// elements whose assignment disagrees.
pub fn rats_assignment_contingency(
    psi: &Cnf3,
    inst: &RatsInstance,
    assignment: &[bool],
) -> Result<ContingencySet> {
    let db = &inst.db;
    let t = inst.t;
    let mut set = ContingencySet::default();
    let b = |l: usize, j: usize| format!("b{l}_{j}");
    let c = |l: usize, j: usize| format!("c{l}_{j}");
    let mut insert = |rel: &str, row: Vec<String>| -> Result<()> {
        let fields: Vec<&str> = row.iter().map(|s| s.as_str()).collect();
        let tid = db
            .tuple_ids(&fields)
            .ok_or_else(|| Error::Invalid(format!("missing gadget row {row:?}")))?;
        set.tuples.insert((rel.to_string(), tid));
        Ok(())
    };
    for l in 1..=psi.n {
        if assignment[l - 1] {
            for j in 1..=t {
                insert("T", vec![c(l, j), "a0".into()])?;
                insert("S", vec![b(l, j), c(l, t + j)])?;
            }
        } else {
            for j in 1..=t {
                insert("R", vec!["a0".into(), b(l, j)])?;
                insert("S", vec![b(l, t + j), c(l, j)])?;
            }
        }
    }
    for (s, clause) in psi.clauses.iter().enumerate() {
        let alpha: usize = clause.iter().enumerate().fold(0, |acc, (pos, &lit)| {
            let v = lit.unsigned_abs() as usize - 1;
            acc | (usize::from(assignment[v]) << (2 - pos))
        });
        for i in good_assignments(clause) {
            if i != alpha {
                insert("A", vec![format!("a{}_{}", s + 1, i)])?;
            }
        }
    }
    Ok(set)
}

/// Embeds a triangle-query database into an arbitrary query along one of its
/// triads, preserving witnesses one for one. Variables are split into seven
/// classes by their membership in the triad atoms' variable sets; each class
/// takes a fixed value shape per triangle witness.
pub fn embed_triangle(q: &Query, triad: &Triad, d_tri: &Database) -> Result<Database> {
    structure::validate_triad(q, triad)?;
    let [s0, s1, s2] = &triad.0;
    let v0: BTreeSet<&str> = q.atom(s0).unwrap().var_set();
    let v1: BTreeSet<&str> = q.atom(s1).unwrap().var_set();
    let v2: BTreeSet<&str> = q.atom(s2).unwrap().var_set();
    if let Some(shared) = v0.iter().find(|v| v1.contains(**v) && v2.contains(**v)) {
        return Err(Error::TriadSharedVariable(shared.to_string()));
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Class {
        OnlyS0,
        OnlyS1,
        OnlyS2,
        Rest,
        S2S0,
        S0S1,
        S1S2,
    }
    let classify = |v: &str| -> Class {
        match (v0.contains(v), v1.contains(v), v2.contains(v)) {
            (true, false, false) => Class::OnlyS0,
            (false, true, false) => Class::OnlyS1,
            (false, false, true) => Class::OnlyS2,
            (true, true, false) => Class::S0S1,
            (false, true, true) => Class::S1S2,
            (true, false, true) => Class::S2S0,
            (false, false, false) => Class::Rest,
            (true, true, true) => unreachable!("checked above"),
        }
    };

    let tri_q = triangle_query();
    let tri_witnesses =
        crate::engine::enumerate_witnesses(&tri_q, d_tri, &crate::engine::Config::default())?;

    let mut out = Database::new();
    let value_of = |cls: Class, a: &str, bb: &str, cc: &str| -> String {
        match cls {
            Class::OnlyS0 => format!("{a}|{bb}"),
            Class::OnlyS1 => format!("{bb}|{cc}"),
            Class::OnlyS2 => format!("{cc}|{a}"),
            Class::Rest => format!("{a}|{bb}|{cc}"),
            Class::S2S0 => a.to_string(),
            Class::S0S1 => bb.to_string(),
            Class::S1S2 => cc.to_string(),
        }
    };

    // Triad relations mirror R, S, T tuple for tuple.
    let triad_sources = [(s0, "R"), (s1, "S"), (s2, "T")];
    for (atom_name, source) in triad_sources {
        let atom = q.atom(atom_name).unwrap();
        let rel = d_tri.relation(source)?;
        if rel.arity != 2 {
            return Err(Error::ArityMismatch {
                relation: source.to_string(),
                expected: 2,
                got: rel.arity,
            });
        }
        for tuple in &rel.tuples {
            let (first, second) = (d_tri.value_str(tuple[0]), d_tri.value_str(tuple[1]));
            let (a, bb, cc) = match source {
                "R" => (first, second, "!"),
                "S" => ("!", first, second),
                _ => (second, "!", first),
            };
            let row: Vec<String> = atom
                .vars()
                .iter()
                .map(|v| value_of(classify(v), a, bb, cc))
                .collect();
            let fields: Vec<&str> = row.iter().map(|s| s.as_str()).collect();
            out.add_row(&atom.relation, &fields)?;
        }
    }

    // Every other relation holds one tuple per triangle witness.
    for atom in &q.atoms {
        if triad.0.contains(&atom.relation) {
            continue;
        }
        out.ensure_relation(&atom.relation, atom.vars().len())?;
        for w in &tri_witnesses {
            let vals: Vec<&str> = w.assignment.iter().map(|&v| d_tri.value_str(v)).collect();
            let (a, bb, cc) = (vals[0], vals[1], vals[2]);
            let row: Vec<String> = atom
                .vars()
                .iter()
                .map(|v| value_of(classify(v), a, bb, cc))
                .collect();
            let fields: Vec<&str> = row.iter().map(|s| s.as_str()).collect();
            out.add_row(&atom.relation, &fields)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{enumerate_witnesses, Config};
    use crate::exact::exact_resilience;
    use crate::query::parse_query;
    use std::collections::BTreeMap;

    fn psi_simple() -> Cnf3 {
        // (v1 OR NOT v2 OR v3), one clause with mixed polarity.
        Cnf3::new(3, vec![[1, -2, 3]]).unwrap()
    }

    #[test]
    fn dimacs_round_trip() {
        let text = "c tiny\np cnf 3 2\n1 -2 3 0\n-1 2 -3 0\n";
        let psi = Cnf3::parse_dimacs(text).unwrap();
        assert_eq!(psi.n, 3);
        assert_eq!(psi.clauses, vec![[1, -2, 3], [-1, 2, -3]]);
        assert!(Cnf3::parse_dimacs("p cnf 2 1\n1 1 2 0\n").is_err());
        assert!(Cnf3::parse_dimacs("p cnf 2 1\n1 2 0\n").is_err());
    }

    #[test]
    fn triangle_instance_shape() {
        let psi = psi_simple();
        let (db, k) = gen_triangle_instance(&psi).unwrap();
        assert_eq!(k, 18);
        let q = triangle_query();
        let ws = enumerate_witnesses(&q, &db, &Config::default()).unwrap();
        // 12m triangles per gadget plus one per clause, none spurious.
        assert_eq!(ws.len(), 12 * 3 + 1); // 12m triangles per gadget (m = 1) plus the clause
    }

    #[test]
    fn dotted_edges_close_one_triangle_each() {
        let psi = psi_simple();
        let (db, _) = gen_triangle_instance(&psi).unwrap();
        let q = triangle_query();
        let compiled = crate::engine::Compiled::new(&q);
        let ws = enumerate_witnesses(&q, &db, &Config::default()).unwrap();
        let names = TriangleNames { m: psi.m() };
        let mut uf = rebuild_uf(&psi, &names);
        // Count witness membership of each dotted tuple.
        let mut counts: BTreeMap<(usize, Vec<u32>), usize> = BTreeMap::new();
        for w in &ws {
            for i in 0..3 {
                *counts.entry((i, compiled.tuple_of(i, w))).or_default() += 1;
            }
        }
        for i in 1..=psi.n {
            for k in 1..=4 * psi.m() {
                let dotted = [
                    ("R", uf.find(&names.a(i, k + 1)), uf.find(&names.b(i, k))),
                    ("S", uf.find(&names.b(i, k + 1)), uf.find(&names.c(i, k))),
                    ("T", uf.find(&names.c(i, k)), uf.find(&names.a(i, k))),
                ];
                for (rel, from, to) in dotted {
                    let atom = ["R", "S", "T"].iter().position(|r| *r == rel).unwrap();
                    let t = db.tuple_ids(&[&from, &to]).unwrap();
                    assert_eq!(
                        counts.get(&(atom, t)).copied().unwrap_or(0),
                        1,
                        "dotted {rel}({from},{to})"
                    );
                }
            }
        }
    }

    #[test]
    fn satisfiable_formula_meets_the_budget() {
        let psi = psi_simple();
        let (db, k) = gen_triangle_instance(&psi).unwrap();
        let q = triangle_query();
        let ans = exact_resilience(&q, &db, &Config::default(), Some(k)).unwrap();
        assert_eq!(ans.k(), Some(k));
    }

    #[test]
    fn assignment_contingency_has_size_6mn_and_falsifies() {
        let psi = Cnf3::new(4, vec![[1, -2, 3], [-1, 2, -4]]).unwrap();
        let (db, k) = gen_triangle_instance(&psi).unwrap();
        let assignment = psi.find_assignment().unwrap();
        let set = triangle_assignment_contingency(&psi, &db, &assignment).unwrap();
        assert_eq!(set.size(), k);
        let q = triangle_query();
        let after = crate::engine::apply_deletions(&q, &db, &set).unwrap();
        assert!(!crate::engine::query_true(&q, &after).unwrap());
    }

    #[test]
    fn rats_instance_structure() {
        let psi = psi_simple();
        let inst = gen_rats_instance(&psi, Some(7)).unwrap();
        assert!(!inst.faithful);
        assert_eq!(inst.k, 2 * 7 * 3 + 6);
        let t = inst.t;
        let db = &inst.db;
        // Per gadget: 2t R-edges, 2t T-edges, t^2 + 2t S-edges.
        let r = db.relation("R").unwrap().tuples.len();
        let s = db.relation("S").unwrap().tuples.len();
        let tt = db.relation("T").unwrap().tuples.len();
        // Plus the anchor row and 3 per clause element.
        assert_eq!(r, 3 * 2 * t + 1 + 7 * 3);
        assert_eq!(tt, 3 * 2 * t + 1 + 7 * 3);
        assert_eq!(s, 3 * (t * t + 2 * t) + 1);
        // Seven elements, three witnesses each.
        let q = rats_query();
        let compiled = crate::engine::Compiled::new(&q);
        let ws = enumerate_witnesses(&q, db, &Config::default()).unwrap();
        let mut per_element: BTreeMap<String, usize> = BTreeMap::new();
        for w in &ws {
            let a_val = db.value_str(compiled.tuple_of(0, w)[0]).to_string();
            if a_val != "a0" {
                *per_element.entry(a_val).or_default() += 1;
            }
        }
        assert_eq!(per_element.len(), 7);
        assert!(per_element.values().all(|&cnt| cnt == 3));
        // Total witness count: gadget blocks via a0, the target, the elements.
        assert_eq!(ws.len(), 3 * (t * t + 2 * t) + 1 + 21);
    }

    #[test]
    fn rats_needs_t_at_least_7m() {
        let psi = psi_simple();
        assert!(matches!(
            gen_rats_instance(&psi, Some(6)),
            Err(Error::RatsTooSmall { .. })
        ));
    }

    #[test]
    fn rats_assignment_contingency_works() {
        let psi = psi_simple();
        let inst = gen_rats_instance(&psi, Some(7)).unwrap();
        let assignment = psi.find_assignment().unwrap();
        let set = rats_assignment_contingency(&psi, &inst, &assignment).unwrap();
        assert_eq!(set.size(), inst.k);
        let q = rats_query();
        // The query stays true (the target witness survives) and dies with
        // the target.
        let after = crate::engine::apply_deletions(&q, &inst.db, &set).unwrap();
        assert!(crate::engine::query_true(&q, &after).unwrap());
        let mut with_target = set.clone();
        with_target
            .tuples
            .insert(("S".into(), inst.db.tuple_ids(&["b0", "c0"]).unwrap()));
        let dead = crate::engine::apply_deletions(&q, &inst.db, &with_target).unwrap();
        assert!(!crate::engine::query_true(&q, &dead).unwrap());
    }

    #[test]
    fn embed_into_tripod_matches_construction() {
        use crate::engine::test_util::db;
        let tripod = parse_query("q :- A(x), B(y), C(z), W^x(x,y,z)").unwrap();
        let triad = Triad(["A".into(), "B".into(), "C".into()]);
        let d_tri = db(&[
            ("R", &[&["1", "2"]]),
            ("S", &[&["2", "3"]]),
            ("T", &[&["3", "1"]]),
        ]);
        let out = embed_triangle(&tripod, &triad, &d_tri).unwrap();
        let a: Vec<Vec<String>> = out
            .relation("A")
            .unwrap()
            .tuples
            .iter()
            .map(|t| out.render_tuple(t))
            .collect();
        assert_eq!(a, vec![vec!["1|2".to_string()]]);
        // One triangle, one witness.
        let ws = enumerate_witnesses(&tripod, &out, &Config::default()).unwrap();
        assert_eq!(ws.len(), 1);
    }

    #[test]
    fn embed_preserves_witness_counts_and_optima() {
        use crate::engine::test_util::db;
        let tripod = parse_query("q :- A(x), B(y), C(z), W^x(x,y,z)").unwrap();
        let triad = Triad(["A".into(), "B".into(), "C".into()]);
        // Two triangles sharing the S edge.
        let d_tri = db(&[
            ("R", &[&["1", "2"], &["9", "2"]]),
            ("S", &[&["2", "3"]]),
            ("T", &[&["3", "1"], &["3", "9"]]),
        ]);
        let out = embed_triangle(&tripod, &triad, &d_tri).unwrap();
        let tri_ws = enumerate_witnesses(&triangle_query(), &d_tri, &Config::default()).unwrap();
        let ws = enumerate_witnesses(&tripod, &out, &Config::default()).unwrap();
        assert_eq!(tri_ws.len(), ws.len());
        let k_tri = exact_resilience(&triangle_query(), &d_tri, &Config::default(), None)
            .unwrap()
            .k();
        let k_emb = exact_resilience(&tripod, &out, &Config::default(), None)
            .unwrap()
            .k();
        assert_eq!(k_tri, k_emb);
    }

    #[test]
    fn embed_rejects_bad_triads() {
        let tripod = parse_query("q :- A(x), B(y), C(z), W(x,y,z)").unwrap();
        let not_triad = Triad(["A".into(), "B".into(), "W".into()]);
        let d_tri = crate::engine::test_util::db(&[
            ("R", &[&["1", "2"]]),
            ("S", &[&["2", "3"]]),
            ("T", &[&["3", "1"]]),
        ]);
        assert!(embed_triangle(&tripod, &not_triad, &d_tri).is_err());
        // A variable shared by all three triad atoms is rejected.
        let shared = parse_query("q :- R(x,y,u), S(y,z,u), T(z,x,u)").unwrap();
        let triad = Triad(["R".into(), "S".into(), "T".into()]);
        assert!(matches!(
            embed_triangle(&shared, &triad, &d_tri),
            Err(Error::TriadSharedVariable(_))
        ));
    }
}
