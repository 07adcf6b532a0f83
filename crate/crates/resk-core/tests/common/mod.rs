//! Shared helpers for the integration suites: random instance generation
//! with FD repair, and the flow-versus-oracle comparison harness.

// Each integration target compiles this module separately and uses a
// different slice of it.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;
use resk_core::engine::{Config, Database};
use resk_core::exact::{self, RespAnswer};
use resk_core::query::{parse_query, Query};
use resk_core::resp::{self, Method, RespOutcome, WildcardTuple};
use resk_core::structure;

pub fn cfg() -> Config {
    Config::default()
}

/// The six triad-free benchmark queries of the randomized harness: the two
/// dissociation examples, a plain chain, brats (domination + full domination
/// at work), and two FD-bearing queries whose closure removes the triad.
pub fn oracle_queries() -> Vec<(&'static str, Query)> {
    vec![
        (
            "raxx",
            parse_query("q :- A(x), R^x(x,y), S(y,z), T^x(z,x)").unwrap(),
        ),
        (
            "brxatxsx",
            parse_query("q :- A(x), R^x(x,y), B(y), S^x(y,z), T^x(z,x)").unwrap(),
        ),
        ("chain", parse_query("q :- A(x), R(x,y), S(y,z)").unwrap()),
        (
            "brats",
            parse_query("q :- A(x), R(x,y), B(y), S(y,z), T(z,x)").unwrap(),
        ),
        (
            "tripod_fd",
            parse_query("q :- A(x), B(y), C(z), W(x,y,z)\nfds:\nx -> y").unwrap(),
        ),
        (
            "triangle_fd",
            parse_query("q :- R(x,y), S(y,z), T(z,x)\nfds:\nx y -> z").unwrap(),
        ),
    ]
}

/// Random database over a small constant domain. Tuples violating a
/// functional dependency of the query are dropped as they are drawn, so the
/// result always satisfies the FDs.
pub fn random_database(q: &Query, rng: &mut StdRng, max_tuples: usize, domain: usize) -> Database {
    let mut db = Database::new();
    let values: Vec<String> = (0..domain).map(|i| format!("v{i}")).collect();
    for atom in &q.atoms {
        let arity = atom.vars().len();
        db.ensure_relation(&atom.relation, arity).unwrap();
        let count = rng.random_range((max_tuples / 2).max(1)..=max_tuples);
        for _ in 0..count {
            let row: Vec<&str> = (0..arity)
                .map(|_| values[rng.random_range(0..domain)].as_str())
                .collect();
            db.add_row(&atom.relation, &row).unwrap();
        }
    }
    repair_fds(q, &mut db);
    structure::check_fds(q, &db).expect("repair must leave the FDs satisfied");
    db
}

/// Drops tuples that conflict with an earlier tuple on some FD, scanning
/// relations in name order; then removes witness-level conflicts (the
/// dependency must also be functional over the witness set when no single
/// relation carries all the columns).
fn repair_fds(q: &Query, db: &mut Database) {
    use resk_core::engine::{enumerate_witnesses, Compiled};
    use std::collections::BTreeMap;
    for fd in &q.fds {
        let mut map: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
        let names: Vec<String> = db.relations.keys().cloned().collect();
        for name in names {
            let Some(atom) = q.atom(&name) else { continue };
            let vars = atom.vars();
            let det_pos: Option<Vec<usize>> = fd
                .determinants
                .iter()
                .map(|d| vars.iter().position(|v| *v == d.as_str()))
                .collect();
            let dep_pos = vars.iter().position(|v| *v == fd.dependent.as_str());
            let (Some(det_pos), Some(dep_pos)) = (det_pos, dep_pos) else {
                continue;
            };
            let rel = db.relations.get_mut(&name).unwrap();
            let tuples: Vec<Vec<u32>> = rel.tuples.iter().cloned().collect();
            for t in tuples {
                let key: Vec<u32> = det_pos.iter().map(|&p| t[p]).collect();
                match map.get(&key) {
                    Some(&v) if v != t[dep_pos] => {
                        rel.tuples.remove(&t);
                    }
                    Some(_) => {}
                    None => {
                        map.insert(key, t[dep_pos]);
                    }
                }
            }
        }
        // Witness-level pass: keep the first dependent value seen per key,
        // break later conflicting witnesses by deleting one tuple carrying
        // the dependent variable. Repeats until clean.
        let compiled = Compiled::new(q);
        let det_idx: Vec<usize> = fd
            .determinants
            .iter()
            .map(|d| compiled.var_index(d).unwrap())
            .collect();
        let dep_idx = compiled.var_index(&fd.dependent).unwrap();
        let dep_atom = q
            .atoms
            .iter()
            .position(|a| a.vars().contains(&fd.dependent.as_str()))
            .unwrap();
        loop {
            let witnesses = enumerate_witnesses(q, db, &cfg()).unwrap();
            let mut seen: BTreeMap<Vec<u32>, u32> = map.clone();
            let mut removed = false;
            for w in &witnesses {
                let key: Vec<u32> = det_idx.iter().map(|&i| w.assignment[i]).collect();
                let val = w.assignment[dep_idx];
                match seen.get(&key) {
                    Some(&v) if v != val => {
                        let t = compiled.tuple_of(dep_atom, w);
                        db.relations
                            .get_mut(&q.atoms[dep_atom].relation)
                            .unwrap()
                            .tuples
                            .remove(&t);
                        removed = true;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(key, val);
                    }
                }
            }
            if !removed {
                break;
            }
        }
    }
}

pub struct HarnessStats {
    pub instances: usize,
    pub resilience_checks: usize,
    pub responsibility_checks: usize,
    pub wildcard_checks: usize,
}

/// One randomized round: flow-path resilience against the oracle, flow-path
/// responsibility against the oracle for every cause tuple, and (optionally)
/// wildcard patterns. Also asserts res <= rsp + 1 throughout. Panics on any
/// disagreement.
pub fn check_instance(
    name: &str,
    q: &Query,
    db: &Database,
    rng: &mut StdRng,
    wildcards: bool,
    stats: &mut HarnessStats,
) {
    let config = cfg();
    stats.instances += 1;

    let sol = resp::solve_resilience(q, db, &config).unwrap();
    let oracle = exact::exact_resilience(q, db, &config, None);
    let res_k = match oracle {
        Ok(ans) => {
            let k = ans.k().unwrap();
            assert_eq!(sol.k, k, "{name}: flow resilience {} vs oracle {k}", sol.k);
            assert_eq!(sol.method, Method::Flow, "{name}: expected the flow path");
            stats.resilience_checks += 1;
            Some(k)
        }
        Err(_) => None, // unfalsifiable instances are rejected by both paths
    };

    for (rel, tuple) in resp::cause_tuples(q, db, &config).unwrap() {
        let fields: Vec<&str> = tuple.iter().map(|s| s.as_str()).collect();
        let ids = db.tuple_ids(&fields).unwrap();
        let target = WildcardTuple::concrete(&rel, &fields);
        let flow_ans = resp::solve_responsibility(q, db, &config, &target).unwrap();
        let oracle_ans = exact::exact_responsibility(q, db, &config, &rel, &ids).unwrap();
        stats.responsibility_checks += 1;
        match (&flow_ans, &oracle_ans) {
            (RespOutcome::Cause(f), RespAnswer::Cause { k, .. }) => {
                assert_eq!(f.k, *k, "{name}: responsibility of {rel}({tuple:?})");
                if let Some(res) = res_k {
                    assert!(
                        res <= *k + 1,
                        "{name}: res {res} > rsp+1 {} for {rel}({tuple:?})",
                        k + 1
                    );
                }
            }
            (RespOutcome::NotACause, RespAnswer::NotACause) => {}
            _ => panic!("{name}: flow and oracle disagree on {rel}({tuple:?})"),
        }
    }

    if wildcards {
        for _ in 0..3 {
            let atom = &q.atoms[rng.random_range(0..q.atoms.len())];
            let rel = db.relations.get(&atom.relation).unwrap();
            if rel.tuples.is_empty() {
                continue;
            }
            let tuples: Vec<&Vec<u32>> = rel.tuples.iter().collect();
            let base = tuples[rng.random_range(0..tuples.len())];
            let pattern: Vec<Option<String>> = base
                .iter()
                .map(|&v| {
                    if rng.random_bool(0.4) {
                        None
                    } else {
                        Some(db.value_str(v).to_string())
                    }
                })
                .collect();
            let target = WildcardTuple {
                relation: atom.relation.clone(),
                pattern,
            };
            let flow_ans = resp::solve_responsibility(q, db, &cfg(), &target).unwrap();
            let tp = resk_core::flow::TuplePattern {
                relation: target.relation.clone(),
                cells: target
                    .pattern
                    .iter()
                    .map(|c| c.as_ref().map(|s| db.value_id(s).unwrap()))
                    .collect(),
            };
            let oracle_ans = exact::exact_wildcard_responsibility(q, db, &cfg(), &tp).unwrap();
            stats.wildcard_checks += 1;
            match (&flow_ans, &oracle_ans) {
                (RespOutcome::Cause(f), RespAnswer::Cause { k, .. }) => {
                    assert_eq!(f.k, *k, "{name}: wildcard {target}");
                }
                (RespOutcome::NotACause, RespAnswer::NotACause) => {}
                _ => panic!("{name}: wildcard disagreement on {target}"),
            }
            // A wildcard-free pattern is ordinary responsibility.
            if !target.has_wildcards() {
                let plain =
                    exact::exact_responsibility(q, db, &cfg(), &target.relation, base).unwrap();
                match (&oracle_ans, &plain) {
                    (RespAnswer::Cause { k: a, .. }, RespAnswer::Cause { k: b, .. }) => {
                        assert_eq!(a, b, "{name}: rsp* with no wildcards differs from rsp")
                    }
                    (RespAnswer::NotACause, RespAnswer::NotACause) => {}
                    _ => panic!("{name}: rsp* with no wildcards differs from rsp on {target}"),
                }
            }
        }
    }
}
