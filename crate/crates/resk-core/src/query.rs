//! Self-join-free conjunctive queries: parsing, printing, normalization.
//!
//! The concrete syntax is Datalog-like:
//!
//! ```text
//! q(x,u) :- R(x,y), S^x(y,z,w), T(w,u)
//! fds:
//! x y -> z
//! ```
//!
//! `^x` marks an atom exogenous (its tuples may never be deleted). Terms are
//! variables, integers, or double-quoted strings; integers and quoted strings
//! are constants. Lines starting with `#` are comments.

use crate::error::Error;
use crate::Result;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => {
                if !c.is_empty() && c.chars().all(|ch| ch.is_ascii_digit()) {
                    write!(f, "{c}")
                } else {
                    write!(f, "\"{}\"", c.replace('\\', "\\\\").replace('"', "\\\""))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub relation: String,
    pub terms: Vec<Term>,
    pub endogenous: bool,
}

impl Atom {
    pub fn new(relation: &str, vars: &[&str], endogenous: bool) -> Self {
        Atom {
            relation: relation.to_string(),
            terms: vars.iter().map(|v| Term::Var(v.to_string())).collect(),
            endogenous,
        }
    }

    /// Distinct variables of the atom, in positional order.
    pub fn vars(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for t in &self.terms {
            if let Term::Var(v) = t {
                if seen.insert(v.as_str()) {
                    out.push(v.as_str());
                }
            }
        }
        out
    }

    pub fn var_set(&self) -> BTreeSet<&str> {
        self.terms.iter().filter_map(|t| t.as_var()).collect()
    }

    pub fn has_constants(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, Term::Const(_)))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.relation)?;
        if !self.endogenous {
            write!(f, "^x")?;
        }
        write!(f, "(")?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FunctionalDependency {
    pub determinants: BTreeSet<String>,
    pub dependent: String,
}

impl FunctionalDependency {
    pub fn new(determinants: &[&str], dependent: &str) -> Self {
        FunctionalDependency {
            determinants: determinants.iter().map(|s| s.to_string()).collect(),
            dependent: dependent.to_string(),
        }
    }
}

impl fmt::Display for FunctionalDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dets: Vec<&str> = self.determinants.iter().map(|s| s.as_str()).collect();
        write!(f, "{} -> {}", dets.join(" "), self.dependent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub name: String,
    pub head: Vec<String>,
    pub atoms: Vec<Atom>,
    pub fds: Vec<FunctionalDependency>,
}

impl Query {
    /// All variables of the query, ordered by first occurrence.
    pub fn vars(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for a in &self.atoms {
            for v in a.vars() {
                if seen.insert(v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn atom(&self, relation: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| a.relation == relation)
    }

    pub fn atom_index(&self, relation: &str) -> Result<usize> {
        self.atoms
            .iter()
            .position(|a| a.relation == relation)
            .ok_or_else(|| Error::UnknownAtom(relation.to_string()))
    }

    pub fn is_boolean(&self) -> bool {
        self.head.is_empty()
    }

    pub fn has_constants(&self) -> bool {
        self.atoms.iter().any(|a| a.has_constants())
    }

    /// Drops head variables, turning the query Boolean without touching atoms.
    pub fn dropped_head(&self) -> Query {
        Query {
            head: Vec::new(),
            ..self.clone()
        }
    }

    fn check_sj_free(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for a in &self.atoms {
            if !seen.insert(a.relation.clone()) {
                return Err(Error::SelfJoin(a.relation.clone()));
            }
        }
        Ok(())
    }

    /// Connected components of the (variable-sharing) atom graph,
    /// each as a sub-query carrying the FDs over its own variables.
    pub fn components(&self) -> Result<Vec<Query>> {
        let n = self.atoms.len();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                let vi = self.atoms[i].var_set();
                for (j, cj) in comp.iter_mut().enumerate() {
                    if *cj == usize::MAX && !vi.is_disjoint(&self.atoms[j].var_set()) {
                        *cj = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        let mut out = Vec::new();
        for c in 0..next {
            let atoms: Vec<Atom> = self
                .atoms
                .iter()
                .zip(&comp)
                .filter(|(_, k)| **k == c)
                .map(|(a, _)| a.clone())
                .collect();
            let vars: BTreeSet<&str> = atoms.iter().flat_map(|a| a.vars()).collect();
            let fds: Vec<FunctionalDependency> = self
                .fds
                .iter()
                .filter(|fd| {
                    fd.determinants.iter().any(|d| vars.contains(d.as_str()))
                        || vars.contains(fd.dependent.as_str())
                })
                .cloned()
                .collect();
            for fd in &fds {
                let all_in = fd.determinants.iter().all(|d| vars.contains(d.as_str()))
                    && vars.contains(fd.dependent.as_str());
                if !all_in {
                    return Err(Error::FdSpansComponents(fd.to_string()));
                }
            }
            let head = self
                .head
                .iter()
                .filter(|h| vars.contains(h.as_str()))
                .cloned()
                .collect();
            out.push(Query {
                name: self.name.clone(),
                head,
                atoms,
                fds,
            });
        }
        Ok(out)
    }

    pub fn is_connected(&self) -> Result<bool> {
        Ok(self.components()?.len() <= 1)
    }

    fn validate(&self) -> Result<()> {
        self.check_sj_free()?;
        for a in &self.atoms {
            if a.terms.is_empty() {
                return Err(Error::Invalid(format!(
                    "atom `{}` has no arguments",
                    a.relation
                )));
            }
        }
        let vars: BTreeSet<&str> = self.vars().into_iter().collect();
        for h in &self.head {
            if !vars.contains(h.as_str()) {
                return Err(Error::Invalid(format!(
                    "head variable `{h}` occurs in no atom"
                )));
            }
        }
        for fd in &self.fds {
            if fd.determinants.contains(&fd.dependent) {
                return Err(Error::Invalid(format!(
                    "functional dependency {fd} is trivial"
                )));
            }
            for v in fd.determinants.iter().chain(std::iter::once(&fd.dependent)) {
                if !vars.contains(v.as_str()) {
                    return Err(Error::UnknownVariable(v.clone()));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.head.is_empty() {
            write!(f, "({})", self.head.join(","))?;
        }
        write!(f, " :- ")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        if !self.fds.is_empty() {
            writeln!(f)?;
            writeln!(f, "fds:")?;
            for (i, fd) in self.fds.iter().enumerate() {
                if i > 0 {
                    writeln!(f)?;
                }
                write!(f, "{fd}")?;
            }
        }
        Ok(())
    }
}

/// How one raw relation feeds a normalized atom: which positions survive,
/// which must equal a constant, which must equal each other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePlan {
    pub relation: String,
    pub arity: usize,
    /// Raw positions projected into the normalized atom, in output order.
    pub keep: Vec<usize>,
    pub const_filter: Vec<(usize, String)>,
    pub eq_filter: Vec<(usize, usize)>,
}

/// Recipe for materializing one normalized relation from raw relations.
/// Several sources mean the normalized relation is their intersection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomPlan {
    pub output: String,
    pub sources: Vec<SourcePlan>,
}

impl AtomPlan {
    pub fn is_identity(&self) -> bool {
        self.sources.len() == 1 && {
            let s = &self.sources[0];
            s.relation == self.output
                && s.const_filter.is_empty()
                && s.eq_filter.is_empty()
                && s.keep.len() == s.arity
                && s.keep.iter().enumerate().all(|(i, &p)| i == p)
        }
    }
}

/// A query together with the per-atom materialization plan produced by
/// normalization. `plan[i]` explains how to build the relation of `atoms[i]`
/// from the raw input relations.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub query: Query,
    pub plan: Vec<AtomPlan>,
}

/// Normalizes a parsed query into the Boolean, constant-free, duplicate-free
/// form the solvers operate on.
///
/// Steps, in order: substitute an optional output tuple for the head
/// variables, drop the head, select-and-project constants away, collapse
/// repeated variable positions, and merge atoms with identical variable sets
/// (their relations intersect at load time). Relations whose contents change
/// get a fresh primed name.
pub fn normalize(q: &Query, output: Option<&[String]>) -> Result<Normalized> {
    q.validate()?;
    let mut atoms = q.atoms.clone();

    if let Some(vals) = output {
        if vals.len() != q.head.len() {
            return Err(Error::Invalid(format!(
                "output tuple has {} values but the head has {} variables",
                vals.len(),
                q.head.len()
            )));
        }
        let sub: BTreeMap<&str, &str> = q
            .head
            .iter()
            .map(|h| h.as_str())
            .zip(vals.iter().map(|v| v.as_str()))
            .collect();
        for a in &mut atoms {
            for t in &mut a.terms {
                if let Term::Var(v) = t {
                    if let Some(c) = sub.get(v.as_str()) {
                        *t = Term::Const(c.to_string());
                    }
                }
            }
        }
    } else if !q.head.is_empty() {
        // Resilience of a non-Boolean query: head variables become existential.
    }

    let taken: BTreeSet<String> = atoms.iter().map(|a| a.relation.clone()).collect();
    let fresh_name = |base: &str, taken: &BTreeSet<String>| -> String {
        let mut name = format!("{base}'");
        while taken.contains(&name) {
            name.push('\'');
        }
        name
    };

    // Selection + projection + repeated-position collapse, one atom at a time.
    let mut out_atoms = Vec::new();
    let mut plans = Vec::new();
    let mut names = taken.clone();
    for a in &atoms {
        let mut keep = Vec::new();
        let mut const_filter = Vec::new();
        let mut eq_filter = Vec::new();
        let mut first_pos: BTreeMap<&str, usize> = BTreeMap::new();
        let mut vars = Vec::new();
        for (i, t) in a.terms.iter().enumerate() {
            match t {
                Term::Const(c) => const_filter.push((i, c.clone())),
                Term::Var(v) => match first_pos.get(v.as_str()) {
                    Some(&p) => eq_filter.push((p, i)),
                    None => {
                        first_pos.insert(v, i);
                        keep.push(i);
                        vars.push(v.clone());
                    }
                },
            }
        }
        if vars.is_empty() {
            return Err(Error::Invalid(format!(
                "atom `{}` has no variables after constant elimination",
                a.relation
            )));
        }
        let changed = !const_filter.is_empty() || !eq_filter.is_empty();
        let output_name = if changed {
            let n = fresh_name(&a.relation, &names);
            names.insert(n.clone());
            n
        } else {
            a.relation.clone()
        };
        plans.push(AtomPlan {
            output: output_name.clone(),
            sources: vec![SourcePlan {
                relation: a.relation.clone(),
                arity: a.terms.len(),
                keep,
                const_filter,
                eq_filter,
            }],
        });
        out_atoms.push(Atom {
            relation: output_name,
            terms: vars.into_iter().map(Term::Var).collect(),
            endogenous: a.endogenous,
        });
    }

    // Merge atoms with identical variable sets; the merged relation is the
    // intersection of the members, so it is endogenous as soon as one member
    // is (a joint tuple dies when deleted from any one member).
    let mut merged_atoms: Vec<Atom> = Vec::new();
    let mut merged_plans: Vec<AtomPlan> = Vec::new();
    for (atom, plan) in out_atoms.into_iter().zip(plans) {
        let vset: BTreeSet<String> = atom.var_set().iter().map(|s| s.to_string()).collect();
        if let Some(k) = merged_atoms.iter().position(|m| {
            m.var_set()
                .iter()
                .map(|s| s.to_string())
                .collect::<BTreeSet<_>>()
                == vset
        }) {
            // Reorder the incoming source so its kept positions line up with
            // the variable order of the atom already in place.
            let target_vars: Vec<&str> = merged_atoms[k].vars();
            let incoming_vars: Vec<&str> = atom.vars();
            let mut src = plan.sources.into_iter().next().unwrap();
            let mut keep_reordered = Vec::with_capacity(src.keep.len());
            for tv in &target_vars {
                let idx = incoming_vars.iter().position(|v| v == tv).unwrap();
                keep_reordered.push(src.keep[idx]);
            }
            src.keep = keep_reordered;
            merged_atoms[k].endogenous |= atom.endogenous;
            let name = format!("{}∩{}", merged_plans[k].output, plan.output);
            merged_atoms[k].relation = name.clone();
            merged_plans[k].output = name;
            merged_plans[k].sources.push(src);
        } else {
            merged_atoms.push(atom);
            merged_plans.push(plan);
        }
    }

    let query = Query {
        name: q.name.clone(),
        head: Vec::new(),
        atoms: merged_atoms,
        fds: q.fds.clone(),
    };
    query.check_sj_free()?;
    Ok(Normalized {
        query,
        plan: merged_plans,
    })
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some('#') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                _ => break,
            }
        }
    }

    fn eat(&mut self, want: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(want) {
            for _ in 0..want.chars().count() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        if self.eat(want) {
            Ok(())
        } else {
            self.err(format!("expected `{want}`"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let mut s = String::new();
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                s.push(c);
                self.bump();
            }
            _ => return self.err("expected identifier"),
        }
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '\'' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        Ok(s)
    }

    fn term(&mut self) -> Result<Term> {
        self.skip_ws();
        match self.peek() {
            Some('"') => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some(c) => s.push(c),
                            None => return self.err("unterminated string"),
                        },
                        Some(c) => s.push(c),
                        None => return self.err("unterminated string"),
                    }
                }
                Ok(Term::Const(s))
            }
            Some(c) if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Ok(Term::Const(s))
            }
            _ => Ok(Term::Var(self.ident()?)),
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let relation = self.ident()?;
        let endogenous = !self.eat("^x");
        self.expect("(")?;
        let mut terms = vec![self.term()?];
        while self.eat(",") {
            terms.push(self.term()?);
        }
        self.expect(")")?;
        Ok(Atom {
            relation,
            terms,
            endogenous,
        })
    }
}

/// Parses query text in the grammar documented at the top of this module.
pub fn parse_query(text: &str) -> Result<Query> {
    let (rule_part, fd_part) = match text
        .lines()
        .position(|l| l.trim_start().starts_with("fds:"))
    {
        Some(idx) => {
            let mut rule = String::new();
            let mut fds = String::new();
            for (i, l) in text.lines().enumerate() {
                if i < idx {
                    rule.push_str(l);
                    rule.push('\n');
                } else if i > idx {
                    fds.push_str(l);
                    fds.push('\n');
                }
            }
            (rule, fds)
        }
        None => (text.to_string(), String::new()),
    };

    let mut p = Parser::new(&rule_part);
    let name = p.ident()?;
    let mut head = Vec::new();
    if p.eat("(") {
        loop {
            match p.term()? {
                Term::Var(v) => head.push(v),
                Term::Const(_) => return p.err("head arguments must be variables"),
            }
            if !p.eat(",") {
                break;
            }
        }
        p.expect(")")?;
    }
    p.expect(":-")?;
    let mut atoms = vec![p.atom()?];
    while p.eat(",") {
        atoms.push(p.atom()?);
    }
    p.skip_ws();
    if p.peek().is_some() {
        return p.err("trailing input after query body");
    }

    let mut fds = Vec::new();
    for (lineno, line) in fd_part.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((lhs, rhs)) = line.split_once("->") else {
            return Err(Error::Syntax {
                line: lineno + 1,
                col: 1,
                msg: format!("bad functional dependency `{line}`"),
            });
        };
        let determinants: BTreeSet<String> =
            lhs.split_whitespace().map(|s| s.to_string()).collect();
        let dependent = rhs.trim().to_string();
        if determinants.is_empty()
            || dependent.is_empty()
            || dependent.contains(char::is_whitespace)
        {
            return Err(Error::Syntax {
                line: lineno + 1,
                col: 1,
                msg: format!("bad functional dependency `{line}`"),
            });
        }
        fds.push(FunctionalDependency {
            determinants,
            dependent,
        });
    }

    let q = Query {
        name,
        head,
        atoms,
        fds,
    };
    q.validate()?;
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(text: &str) -> Query {
        parse_query(text).unwrap()
    }

    #[test]
    fn parses_triangle() {
        let tri = q("q :- R(x,y), S(y,z), T(z,x)");
        assert_eq!(tri.atoms.len(), 3);
        assert!(tri.atoms.iter().all(|a| a.endogenous));
        assert_eq!(tri.vars(), vec!["x", "y", "z"]);
    }

    #[test]
    fn parses_rats_with_exogenous_markers() {
        let rats = q("q :- A(x), R^x(x,y), S(y,z), T^x(z,x)");
        assert!(rats.atom("A").unwrap().endogenous);
        assert!(!rats.atom("R").unwrap().endogenous);
        assert!(rats.atom("S").unwrap().endogenous);
        assert!(!rats.atom("T").unwrap().endogenous);
    }

    #[test]
    fn parses_single_atom() {
        let single = q("q :- A(x)");
        assert_eq!(single.atoms.len(), 1);
    }

    #[test]
    fn rejects_self_join() {
        let err = parse_query("q :- R(x,y), R(y,z)").unwrap_err();
        assert!(matches!(err, Error::SelfJoin(_)));
    }

    #[test]
    fn parses_head_fds_comments_and_constants() {
        let text = "# example\nq(x,u) :- R(x,y), S(y,z,w), T(w,u)\nfds:\nx y -> z # key\n";
        let parsed = q(text);
        assert_eq!(parsed.head, vec!["x", "u"]);
        assert_eq!(parsed.fds.len(), 1);
        assert_eq!(parsed.fds[0].to_string(), "x y -> z");

        let withc = q("q :- R(\"a\",y), S(y, 7)");
        assert!(withc.atom("R").unwrap().has_constants());
    }

    #[test]
    fn print_parse_roundtrip() {
        for text in [
            "q :- R(x,y), S(y,z), T(z,x)",
            "q :- A(x), R^x(x,y), S(y,z), T^x(z,x)",
            "q :- A(x), B(y), C(z), W(x,y,z)\nfds:\nx -> y",
        ] {
            let parsed = q(text);
            assert_eq!(parse_query(&parsed.to_string()).unwrap(), parsed);
        }
    }

    #[test]
    fn normalize_merges_duplicate_variable_sets() {
        let n = normalize(&q("q :- R(x,y), Q(x,y), S(y,z)"), None).unwrap();
        assert_eq!(n.query.atoms.len(), 2);
        assert_eq!(n.query.atoms[0].relation, "R∩Q");
        assert_eq!(n.plan[0].sources.len(), 2);
        // Re-normalizing is the identity.
        let again = normalize(&n.query, None).unwrap();
        assert_eq!(again.query, n.query);
        assert!(again.plan.iter().all(|p| p.is_identity()));
    }

    #[test]
    fn normalize_merges_reordered_variable_sets() {
        let n = normalize(&q("q :- R(x,y), Q(y,x), S(y,z)"), None).unwrap();
        assert_eq!(n.query.atoms.len(), 2);
        // Q's columns map in swapped order.
        assert_eq!(n.plan[0].sources[1].keep, vec![1, 0]);
    }

    #[test]
    fn normalize_collapses_repeated_positions() {
        let n = normalize(&q("q :- R(x,x,y), S(y)"), None).unwrap();
        let a = &n.query.atoms[0];
        assert_eq!(a.vars(), vec!["x", "y"]);
        assert_eq!(n.plan[0].sources[0].eq_filter, vec![(0, 1)]);
        assert_eq!(n.plan[0].sources[0].keep, vec![0, 2]);
    }

    #[test]
    fn normalize_substitutes_output_tuple() {
        let parsed = q("q(x,u) :- R(x,y), S(y,z,w), T(w,u)");
        let n = normalize(&parsed, Some(&["1".into(), "9".into()])).unwrap();
        assert_eq!(n.query.to_string(), "q :- R'(y), S(y,z,w), T'(w)");
        assert_eq!(
            n.plan[0].sources[0].const_filter,
            vec![(0, "1".to_string())]
        );
        assert_eq!(
            n.plan[2].sources[0].const_filter,
            vec![(1, "9".to_string())]
        );
    }

    #[test]
    fn normalize_without_output_drops_head() {
        let parsed = q("q(x) :- R(x,y), S(y)");
        let n = normalize(&parsed, None).unwrap();
        assert!(n.query.is_boolean());
        assert_eq!(n.query.atoms.len(), 2);
        assert!(n.plan.iter().all(|p| p.is_identity()));
    }

    #[test]
    fn components_split_disjoint_queries() {
        let parsed = q("q :- A(x), B(y)");
        let comps = parsed.components().unwrap();
        assert_eq!(comps.len(), 2);
        let tri = q("q :- R(x,y), S(y,z), T(z,x)");
        assert!(tri.is_connected().unwrap());
    }
}
