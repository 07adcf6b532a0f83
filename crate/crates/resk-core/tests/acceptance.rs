//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS line with its measurements (run with `--nocapture` to see them).
//! Tolerances and thresholds are pinned in the assertions.

mod common;

use common::{cfg, check_instance, oracle_queries, random_database, HarnessStats};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use resk_core::engine::{self, apply_deletions, enumerate_witnesses, query_true, Database};
use resk_core::exact::{self, RespAnswer};
use resk_core::flow::TuplePattern;
use resk_core::gadgets::{self, Cnf3};
use resk_core::linearize;
use resk_core::query::{normalize, parse_query};
use resk_core::resp::{self, RespOutcome, WildcardTuple};
use resk_core::structure::{self, Problem, Verdict};
use std::time::Instant;

fn db(rows: &[(&str, &[&[&str]])]) -> Database {
    let mut out = Database::new();
    for (rel, tuples) in rows {
        for t in *tuples {
            out.add_row(rel, t).unwrap();
        }
    }
    out
}

fn example_12() -> (resk_core::query::Query, Database) {
    let q = parse_query("q :- R'(y), S(y,z,w), T'(w)").unwrap();
    let d = db(&[
        ("R'", &[&["3"], &["4"]]),
        ("S", &[&["3", "5", "7"], &["3", "6", "7"], &["4", "5", "7"]]),
        ("T'", &[&["7"]]),
    ]);
    (q, d)
}

#[test]
fn criterion_1_worked_example_fidelity() {
    let start = Instant::now();
    let (q, d) = example_12();

    let res = resp::solve_resilience(&q, &d, &cfg()).unwrap();
    assert_eq!(res.k, 1);
    assert_eq!(
        res.contingency,
        vec![("T'".to_string(), vec!["7".to_string()])]
    );

    let target = WildcardTuple::concrete("S", &["3", "5", "7"]);
    let RespOutcome::Cause(rsp) = resp::solve_responsibility(&q, &d, &cfg(), &target).unwrap()
    else {
        panic!("S(3,5,7) is a cause")
    };
    assert_eq!(rsp.k, 2);

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "took {elapsed:?}, tolerance 1s"
    );
    println!(
        "criterion 1 (worked example fidelity): PASS — k=1 with T'(7), responsibility 2, {elapsed:?}"
    );
}

#[test]
fn criterion_2_classification_table() {
    use Problem::*;
    use Verdict::*;
    let cases: Vec<(&str, Problem, Verdict, Option<[&str; 3]>)> = vec![
        ("q :- R(x,y), S(y,z), T(z,x)", Resilience, NpComplete, None),
        (
            "q :- R(x,y), S(y,z), T(z,x)",
            Responsibility,
            NpComplete,
            None,
        ),
        (
            "q :- A(x), B(y), C(z), W(x,y,z)",
            Resilience,
            NpComplete,
            None,
        ),
        (
            "q :- A(x), B(y), C(z), W(x,y,z)",
            Responsibility,
            NpComplete,
            None,
        ),
        ("q :- A(x), R(x,y), S(y,z), T(z,x)", Resilience, Ptime, None),
        (
            "q :- A(x), R(x,y), S(y,z), T(z,x)",
            Responsibility,
            NpComplete,
            Some(["R", "S", "T"]),
        ),
        (
            "q :- A(x), R(x,y), B(y), S(y,z), T(z,x)",
            Resilience,
            Ptime,
            None,
        ),
        (
            "q :- A(x), R(x,y), B(y), S(y,z), T(z,x)",
            Responsibility,
            Ptime,
            None,
        ),
        (
            "q :- A(x), B(y), C(z), W(x,y,z)\nfds:\nx -> y",
            Resilience,
            Ptime,
            None,
        ),
        ("q :- A(x), R(x,y), S(y,z)", Resilience, Ptime, None),
        ("q :- A(x), R(x,y), S(y,z)", Responsibility, Ptime, None),
    ];
    for (text, problem, verdict, triad) in cases {
        let q = parse_query(text).unwrap();
        let start = Instant::now();
        let c = structure::classify(&q, problem).unwrap();
        let elapsed = start.elapsed();
        assert!(
            elapsed.as_secs_f64() < 1.0,
            "{text}: took {elapsed:?}, tolerance 1s"
        );
        assert_eq!(c.verdict, verdict, "{text} ({problem:?})");
        if let Some(expected) = triad {
            let got = c
                .triad
                .as_ref()
                .map(|t| [t.0[0].as_str(), t.0[1].as_str(), t.0[2].as_str()]);
            assert_eq!(got, Some(expected), "{text}");
        }
    }
    println!("criterion 2 (classification table): PASS — 11 classifications, each under 1s");
}

#[test]
fn criterion_3_oracle_equivalence() {
    let start = Instant::now();
    let mut stats = HarnessStats {
        instances: 0,
        resilience_checks: 0,
        responsibility_checks: 0,
        wildcard_checks: 0,
    };
    for (name, q) in oracle_queries() {
        let mut rng = StdRng::seed_from_u64(0x5eed_0003);
        for _ in 0..500 {
            let d = random_database(&q, &mut rng, 12, 6);
            check_instance(name, &q, &d, &mut rng, false, &mut stats);
        }
    }
    let elapsed = start.elapsed();
    assert!(stats.instances == 3000);
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "took {elapsed:?}, tolerance 60s"
    );
    println!(
        "criterion 3 (oracle equivalence): PASS — {} instances, {} resilience and {} responsibility agreements in {elapsed:?}",
        stats.instances, stats.resilience_checks, stats.responsibility_checks
    );
}

#[test]
fn criterion_4_wildcard_equivalence() {
    let start = Instant::now();
    let mut stats = HarnessStats {
        instances: 0,
        resilience_checks: 0,
        responsibility_checks: 0,
        wildcard_checks: 0,
    };
    for (name, q) in oracle_queries() {
        let mut rng = StdRng::seed_from_u64(0x5eed_0004);
        for _ in 0..500 {
            let d = random_database(&q, &mut rng, 12, 6);
            check_wildcards_only(name, &q, &d, &mut rng, &mut stats);
        }
    }
    let elapsed = start.elapsed();
    assert!(
        stats.wildcard_checks > 3000,
        "only {} wildcard checks ran",
        stats.wildcard_checks
    );
    println!(
        "criterion 4 (wildcard equivalence): PASS — {} wildcard agreements over {} instances in {elapsed:?}",
        stats.wildcard_checks, stats.instances
    );
}

fn check_wildcards_only(
    name: &str,
    q: &resk_core::query::Query,
    d: &Database,
    rng: &mut StdRng,
    stats: &mut HarnessStats,
) {
    stats.instances += 1;
    for _ in 0..3 {
        let atom = &q.atoms[rng.random_range(0..q.atoms.len())];
        let rel = d.relations.get(&atom.relation).unwrap();
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
                    Some(d.value_str(v).to_string())
                }
            })
            .collect();
        let target = WildcardTuple {
            relation: atom.relation.clone(),
            pattern,
        };
        let flow_ans = resp::solve_responsibility(q, d, &cfg(), &target).unwrap();
        let tp = TuplePattern {
            relation: target.relation.clone(),
            cells: target
                .pattern
                .iter()
                .map(|c| c.as_ref().map(|s| d.value_id(s).unwrap()))
                .collect(),
        };
        let oracle_ans = exact::exact_wildcard_responsibility(q, d, &cfg(), &tp).unwrap();
        stats.wildcard_checks += 1;
        match (&flow_ans, &oracle_ans) {
            (RespOutcome::Cause(f), RespAnswer::Cause { k, .. }) => {
                assert_eq!(f.k, *k, "{name}: wildcard {target}")
            }
            (RespOutcome::NotACause, RespAnswer::NotACause) => {}
            _ => panic!("{name}: wildcard disagreement on {target}"),
        }
        if !target.has_wildcards() {
            let plain = exact::exact_responsibility(q, d, &cfg(), &target.relation, base).unwrap();
            match (&oracle_ans, &plain) {
                (RespAnswer::Cause { k: a, .. }, RespAnswer::Cause { k: b, .. }) => {
                    assert_eq!(a, b, "{name}: zero-wildcard rsp* differs from rsp")
                }
                (RespAnswer::NotACause, RespAnswer::NotACause) => {}
                _ => panic!("{name}: zero-wildcard rsp* differs from rsp on {target}"),
            }
        }
    }
}

#[test]
fn criterion_5_triangle_gadget_soundness() {
    let start = Instant::now();
    let q = gadgets::triangle_query();

    // Exhaustive sweep: every 3CNF over exactly the variables {1,2,3} with
    // one or two (possibly equal) distinct-variable clauses. All such
    // formulas are satisfiable, so the optimum must be exactly 6mn.
    let all_clauses: Vec<[i32; 3]> = (0..8)
        .map(|i| {
            let sign = |b: usize, v: i32| if i >> b & 1 == 1 { v } else { -v };
            [sign(2, 1), sign(1, 2), sign(0, 3)]
        })
        .collect();
    let mut formulas: Vec<Cnf3> = Vec::new();
    for c in &all_clauses {
        formulas.push(Cnf3::new(3, vec![*c]).unwrap());
    }
    for (i, a) in all_clauses.iter().enumerate() {
        for b in &all_clauses[i..] {
            formulas.push(Cnf3::new(3, vec![*a, *b]).unwrap());
        }
    }
    assert_eq!(formulas.len(), 8 + 36);
    for psi in &formulas {
        let (d, k) = gadgets::gen_triangle_instance(psi).unwrap();
        let sat = psi.find_assignment().is_some();
        assert!(sat, "every clause pair over three variables is satisfiable");
        let ans = exact::exact_resilience(&q, &d, &cfg(), None).unwrap();
        assert_eq!(
            ans.k(),
            Some(k),
            "6mn must be the optimum for a satisfiable formula"
        );
    }

    // Larger random formulas: the assignment-induced contingency set has
    // size exactly 6mn and falsifies the query.
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    let mut checked = 0;
    for _ in 0..25 {
        let n = rng.random_range(4..=8);
        let m = rng.random_range(1..=6);
        let mut clauses = Vec::new();
        for _ in 0..m {
            let mut vars: Vec<i32> = (1..=n as i32).collect();
            for i in 0..3 {
                let j = rng.random_range(i..vars.len());
                vars.swap(i, j);
            }
            clauses.push([
                if rng.random_bool(0.5) {
                    vars[0]
                } else {
                    -vars[0]
                },
                if rng.random_bool(0.5) {
                    vars[1]
                } else {
                    -vars[1]
                },
                if rng.random_bool(0.5) {
                    vars[2]
                } else {
                    -vars[2]
                },
            ]);
        }
        let psi = Cnf3::new(n, clauses).unwrap();
        let Some(assignment) = psi.find_assignment() else {
            continue;
        };
        let (d, k) = gadgets::gen_triangle_instance(&psi).unwrap();
        assert_eq!(k, 6 * m * n);
        let gamma = gadgets::triangle_assignment_contingency(&psi, &d, &assignment).unwrap();
        assert_eq!(gamma.size(), k, "assignment contingency must have size 6mn");
        let after = apply_deletions(&q, &d, &gamma).unwrap();
        assert!(
            !query_true(&q, &after).unwrap(),
            "assignment contingency must falsify"
        );
        checked += 1;
    }
    assert!(checked >= 20);

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "took {elapsed:?}, tolerance 120s"
    );
    println!(
        "criterion 5 (gadget soundness): PASS — 44 exhaustive formulas at the 6mn optimum, {checked} random assignment checks in {elapsed:?}"
    );
}

#[test]
fn criterion_6_rats_gadget_structure() {
    let start = Instant::now();
    let q = gadgets::rats_query();

    // Faithful instance (t = 8m): per-gadget edge counts and clause shape.
    let psi = Cnf3::new(3, vec![[1, -2, 3]]).unwrap();
    let inst = gadgets::gen_rats_instance(&psi, None).unwrap();
    assert!(inst.faithful);
    let t = inst.t;
    assert_eq!(t, 8);
    for l in 1..=3usize {
        let prefix_b = format!("b{l}_");
        let prefix_c = format!("c{l}_");
        let d = &inst.db;
        let r_count = d
            .relation("R")
            .unwrap()
            .tuples
            .iter()
            .filter(|tp| d.value_str(tp[0]) == "a0" && d.value_str(tp[1]).starts_with(&prefix_b))
            .count();
        let t_count = d
            .relation("T")
            .unwrap()
            .tuples
            .iter()
            .filter(|tp| d.value_str(tp[1]) == "a0" && d.value_str(tp[0]).starts_with(&prefix_c))
            .count();
        let s_count = d
            .relation("S")
            .unwrap()
            .tuples
            .iter()
            .filter(|tp| d.value_str(tp[0]).starts_with(&prefix_b))
            .count();
        assert_eq!(r_count, 2 * t, "gadget {l}: 2t R-edges");
        assert_eq!(t_count, 2 * t, "gadget {l}: 2t T-edges");
        assert_eq!(s_count, t * t + 2 * t, "gadget {l}: t^2+2t S-edges");
    }
    // Seven clause elements, three witnesses each.
    let compiled = engine::Compiled::new(&q);
    let ws = enumerate_witnesses(&q, &inst.db, &cfg()).unwrap();
    let mut per_element = std::collections::BTreeMap::new();
    for w in &ws {
        let a_val = inst.db.value_str(compiled.tuple_of(0, w)[0]).to_string();
        if a_val != "a0" {
            *per_element.entry(a_val).or_insert(0usize) += 1;
        }
    }
    assert_eq!(per_element.len(), 7);
    assert!(per_element.values().all(|&c| c == 3));

    // Reduced-t instances (flagged non-faithful): the target's exact
    // responsibility must be exactly (2t)n + 6m for satisfiable formulas.
    let mut equality_checks = 0;
    for clause in [[1, -2, 3], [-1, 2, -3], [1, 2, 3], [-1, -2, -3]] {
        let psi = Cnf3::new(3, vec![clause]).unwrap();
        assert!(psi.find_assignment().is_some());
        let inst = gadgets::gen_rats_instance(&psi, Some(7)).unwrap();
        assert!(!inst.faithful);
        let ids = inst.db.tuple_ids(&["b0", "c0"]).unwrap();
        let RespAnswer::Cause { k, .. } =
            exact::exact_responsibility(&q, &inst.db, &cfg(), "S", &ids).unwrap()
        else {
            panic!("the distinguished tuple is a cause")
        };
        assert_eq!(
            k, inst.k,
            "clause {clause:?}: responsibility must meet the k formula"
        );
        equality_checks += 1;
    }

    let elapsed = start.elapsed();
    println!(
        "criterion 6 (rats gadget structure): PASS — faithful counts verified, {equality_checks} reduced-t equality checks in {elapsed:?}"
    );
}

#[test]
fn criterion_7_fd_machinery() {
    let start = Instant::now();

    // Closure of the tripod with x -> y, then domination, kills the triad.
    let tripod_fd = parse_query("q :- A(x), B(y), C(z), W(x,y,z)\nfds:\nx -> y").unwrap();
    let closed = structure::induced_rewrite_closure(&tripod_fd);
    assert_eq!(closed.atom("A").unwrap().vars(), vec!["x", "y"]);
    assert_eq!(closed.atom("B").unwrap().vars(), vec!["y"]);
    assert_eq!(closed.atom("C").unwrap().vars(), vec!["z"]);
    assert_eq!(closed.atom("W").unwrap().vars(), vec!["x", "y", "z"]);
    let dominated = structure::apply_domination(&closed);
    assert!(
        !dominated.atom("A").unwrap().endogenous,
        "B dominates the rewritten A"
    );
    assert_eq!(structure::find_triad(&dominated).unwrap(), None);

    // Ten FD-bearing queries: normalize, classify; when a triad survives,
    // embed a triangle instance and check the output satisfies the FDs row
    // by row with witnesses preserved one for one.
    let suite = [
        "q :- A(x), B(y), C(z), W(x,y,z)\nfds:\nx -> y",
        "q :- R(x,y), S(y,z), T(z,x)",
        "q :- R(x,y), S(y,z), T(z,x), W^x(x,w)\nfds:\nw -> x",
        "q :- R(x,y), S(y,z), T(z,u), U(u,v), V(v,x)\nfds:\nx -> y",
        "q :- A(x), R(x,y), S(y,z), T(z,x)\nfds:\nz -> x",
        "q :- R(x,y), S(y,z), T(z,x)\nfds:\nx -> y",
        "q :- A(x), B(y), C(z), W(x,y,z)\nfds:\nx y -> z",
        "q :- A(x), R(x,y), B(y), S(y,z), T(z,x)\nfds:\ny -> z",
        "q :- R(x,y), S(y,z), T(z,x), U^x(u,x)\nfds:\nu -> x",
        "q :- A(x), B(y), C(z), W(x,y,z,w)\nfds:\nx -> w",
    ];
    // Three triangles with pairwise-distinct x-anchors: two share the S(2,3)
    // edge, the third is apart. Distinct anchors keep the witness maps
    // one-to-one even for non-triad atoms that only see one anchor variable.
    let d_tri = db(&[
        ("R", &[&["1", "2"], &["9", "2"], &["4", "8"]]),
        ("S", &[&["2", "3"], &["8", "5"]]),
        ("T", &[&["3", "1"], &["3", "9"], &["5", "4"]]),
    ]);
    let tri_ws = enumerate_witnesses(&gadgets::triangle_query(), &d_tri, &cfg()).unwrap();
    let mut embedded = 0;
    let mut easy = 0;
    for text in suite {
        let q = parse_query(text).unwrap();
        let closed = structure::induced_rewrite_closure(&q);
        let merged = normalize(&closed, None).unwrap().query;
        let dominated = structure::apply_domination(&merged);
        match structure::find_triad(&dominated).unwrap() {
            None => {
                let c = structure::classify(&q, Problem::Resilience).unwrap();
                assert_eq!(c.verdict, Verdict::Ptime, "{text}");
                easy += 1;
            }
            Some(triad) => {
                let out = gadgets::embed_triangle(&merged, &triad, &d_tri).unwrap();
                // Row-by-row FD check on the generated database.
                structure::check_fds(&merged, &out)
                    .unwrap_or_else(|e| panic!("{text}: embedded instance violates the FDs: {e}"));
                // Witness bijection.
                let ws = enumerate_witnesses(&merged, &out, &cfg()).unwrap();
                assert_eq!(ws.len(), tri_ws.len(), "{text}: witness bijection");
                // When no domination was needed, optima transfer exactly.
                if dominated == merged {
                    let k_tri =
                        exact::exact_resilience(&gadgets::triangle_query(), &d_tri, &cfg(), None)
                            .unwrap()
                            .k();
                    let k_emb = exact::exact_resilience(&merged, &out, &cfg(), None)
                        .unwrap()
                        .k();
                    assert_eq!(k_tri, k_emb, "{text}: optima must transfer");
                }
                embedded += 1;
            }
        }
    }
    assert_eq!(embedded + easy, 10);
    assert!(embedded >= 4, "the suite must exercise the embedding");

    let elapsed = start.elapsed();
    println!(
        "criterion 7 (FD machinery): PASS — tripod rewrite verified, {embedded} embedded and {easy} tractable FD queries in {elapsed:?}"
    );
}

#[test]
fn criterion_8_max_responsibility_algorithm() {
    let start = Instant::now();
    let queries = [
        ("chain", "q :- A(x), R(x,y), S(y,z)", 10, 6),
        ("brats", "q :- A(x), R(x,y), B(y), S(y,z), T(z,x)", 8, 5),
        ("rats", "q :- A(x), R(x,y), S(y,z), T(z,x)", 8, 5),
        ("triangle", "q :- R(x,y), S(y,z), T(z,x)", 8, 5),
    ];
    let mut rounds = 0;
    for (name, text, max_tuples, domain) in queries {
        let q = parse_query(text).unwrap();
        let mut rng = StdRng::seed_from_u64(0x5eed_0008);
        let mut done = 0;
        while done < 50 {
            let d = random_database(&q, &mut rng, max_tuples, domain);
            if !query_true(&q, &d).unwrap() {
                continue;
            }
            let s = resp::max_responsibility_set(&q, &d, &cfg()).unwrap();
            let mut sweep = std::collections::BTreeSet::new();
            for c in resp::cause_tuples(&q, &d, &cfg()).unwrap() {
                let fields: Vec<&str> = c.1.iter().map(|x| x.as_str()).collect();
                let ids = d.tuple_ids(&fields).unwrap();
                if let RespAnswer::Cause { k, .. } =
                    exact::exact_responsibility(&q, &d, &cfg(), &c.0, &ids).unwrap()
                {
                    if k + 1 == s.k {
                        sweep.insert(c);
                    }
                }
            }
            let members: std::collections::BTreeSet<_> = s.members.iter().cloned().collect();
            assert_eq!(
                members, sweep,
                "{name}: max responsibility set vs per-tuple sweep"
            );
            done += 1;
            rounds += 1;
        }
    }
    assert!(rounds >= 200);
    let elapsed = start.elapsed();
    println!(
        "criterion 8 (max responsibility via resilience): PASS — {rounds} instances agree with the sweep in {elapsed:?}"
    );
}

#[test]
fn criterion_9_structural_invariants() {
    // The invariants are enforced inside every solve of criteria 3-8:
    // linearization fails loudly unless each variable spans a contiguous
    // block, min_cut asserts max-flow equals the extracted cut capacity, and
    // every solver verifies its contingency set against the definitions
    // before returning. This test re-runs a seeded slice with the checks
    // exposed directly.
    let start = Instant::now();
    let mut stats = HarnessStats {
        instances: 0,
        resilience_checks: 0,
        responsibility_checks: 0,
        wildcard_checks: 0,
    };
    for (name, q) in oracle_queries() {
        // Contiguity, checked explicitly on the linearization the solvers use.
        let closed = structure::induced_rewrite_closure(&q);
        let merged = normalize(&closed, None).unwrap().query;
        let dominated = structure::apply_domination(&merged);
        let lin = linearize::linearize_triad_free(&dominated).unwrap();
        let shape: Vec<(String, std::collections::BTreeSet<String>)> = lin
            .layers
            .iter()
            .map(|l| (l.name.clone(), l.vars.iter().cloned().collect()))
            .collect();
        assert!(
            linearize::contiguous(&shape),
            "{name}: linearization must be contiguous"
        );

        let mut rng = StdRng::seed_from_u64(0x5eed_0009);
        for _ in 0..25 {
            let d = random_database(&q, &mut rng, 10, 6);
            check_instance(name, &q, &d, &mut rng, true, &mut stats);
        }
    }
    let elapsed = start.elapsed();
    println!(
        "criterion 9 (structural invariants): PASS — contiguity, flow/cut agreement, and post-hoc contingency verification held over {} instances ({} responsibility, {} wildcard checks) in {elapsed:?}",
        stats.instances, stats.responsibility_checks, stats.wildcard_checks
    );
}
