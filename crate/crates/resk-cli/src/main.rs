//! `resk` — resilience and responsibility analysis for self-join-free
//! conjunctive queries from the command line. Machine-readable JSON by
//! default, `--format text` for eyes.

use clap::{Parser, Subcommand, ValueEnum};
use resk_core::engine::{self, Config};
use resk_core::error::Error;
use resk_core::gadgets::{self, Cnf3};
use resk_core::linearize;
use resk_core::query::{normalize, parse_query, Normalized, Query};
use resk_core::resp::{self, RespOutcome, WildcardTuple};
use resk_core::structure::{self, Problem, Verdict};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "resk",
    version,
    about = "Resilience and responsibility of sj-free conjunctive queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Resilience,
    Responsibility,
}

#[derive(Clone, Copy, ValueEnum)]
enum GadgetKind {
    Triangle,
    Rats,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether resilience/responsibility is tractable for a query.
    Classify {
        #[arg(short = 'q', long = "query")]
        query: PathBuf,
        #[arg(long, value_enum, default_value_t = ProblemArg::Resilience)]
        problem: ProblemArg,
    },
    /// Minimum endogenous deletions that falsify the query.
    Resilience {
        #[arg(short = 'q', long = "query")]
        query: PathBuf,
        #[arg(short = 'd', long = "data")]
        data: PathBuf,
        /// Fix the head variables to this output tuple (source side-effects).
        #[arg(long, value_delimiter = ',')]
        output_tuple: Option<Vec<String>>,
    },
    /// Minimum contingency set making a tuple (or wildcard set) counterfactual.
    Responsibility {
        #[arg(short = 'q', long = "query")]
        query: PathBuf,
        #[arg(short = 'd', long = "data")]
        data: PathBuf,
        /// The target, e.g. 'S(3,5,7)' or 'S(*,5,7)'.
        #[arg(long)]
        tuple: String,
        #[arg(long, value_delimiter = ',')]
        output_tuple: Option<Vec<String>>,
    },
    /// All tuples of maximum responsibility, computed via resilience.
    MaxRespSet {
        #[arg(short = 'q', long = "query")]
        query: PathBuf,
        #[arg(short = 'd', long = "data")]
        data: PathBuf,
    },
    /// Closure of the query under FD-induced rewrites.
    Closure {
        #[arg(short = 'q', long = "query")]
        query: PathBuf,
    },
    /// Dissociated linear form of a triad-free query.
    Linearize {
        #[arg(short = 'q', long = "query")]
        query: PathBuf,
    },
    /// Generate a hardness-gadget database from a 3CNF formula.
    GenGadget {
        #[arg(long, value_enum)]
        kind: GadgetKind,
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Rats only: override the matching size t (faithful value is 8m).
        #[arg(long)]
        t: Option<usize>,
    },
    /// Enumerate the witnesses of the query over a database.
    Witnesses {
        #[arg(short = 'q', long = "query")]
        query: PathBuf,
        #[arg(short = 'd', long = "data")]
        data: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Syntax { .. }
        | Error::Io(_)
        | Error::MissingRelationFile(_)
        | Error::BadCnf(_)
        | Error::SelfJoin(_)
        | Error::UnknownRelation(_)
        | Error::UnknownAtom(_)
        | Error::UnknownVariable(_)
        | Error::ArityMismatch { .. } => 2,
        _ => 1,
    }
}

fn config() -> Config {
    let mut config = Config::default();
    if let Ok(cap) = std::env::var("RESK_WITNESS_CAP") {
        if let Ok(cap) = cap.parse() {
            config.witness_cap = cap;
        }
    }
    config
}

fn read_query(path: &Path) -> Result<Query, Error> {
    parse_query(&std::fs::read_to_string(path)?)
}

fn prepare(
    query_path: &Path,
    data_dir: &Path,
    output_tuple: Option<&[String]>,
) -> Result<(Normalized, engine::Database), Error> {
    let raw = read_query(query_path)?;
    let normalized = normalize(&raw, output_tuple)?;
    let (db, warnings) = engine::load_database(&raw, data_dir)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let cooked = engine::apply_plan(&normalized.plan, &db)?;
    Ok((normalized, cooked))
}

#[derive(Serialize)]
struct TupleOut {
    relation: String,
    tuple: Vec<String>,
}

#[derive(Serialize)]
struct SolutionOut {
    k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    contingency: Vec<TupleOut>,
    method: &'static str,
}

fn solution_out(sol: &resp::Solution, with_score: bool) -> SolutionOut {
    SolutionOut {
        k: sol.k,
        score: with_score.then(|| 1.0 / (1.0 + sol.k as f64)),
        contingency: sol
            .contingency
            .iter()
            .map(|(relation, tuple)| TupleOut {
                relation: relation.clone(),
                tuple: tuple.clone(),
            })
            .collect(),
        method: match sol.method {
            resp::Method::Flow => "flow",
            resp::Method::Exact => "exact",
        },
    }
}

fn emit<T: Serialize>(format: Format, value: &T, text: String) {
    match format {
        Format::Json => println!("{}", serde_json::to_string(value).expect("serializable")),
        Format::Text => println!("{text}"),
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let config = config();
    match &cli.command {
        Command::Classify { query, problem } => {
            let raw = read_query(query)?;
            let normalized = normalize(&raw, None)?;
            let problem = match problem {
                ProblemArg::Resilience => Problem::Resilience,
                ProblemArg::Responsibility => Problem::Responsibility,
            };
            let c = structure::classify(&normalized.query, problem)?;
            #[derive(Serialize)]
            struct ClassifyOut {
                problem: &'static str,
                verdict: &'static str,
                triad: Option<[String; 3]>,
                linear_order: Option<Vec<String>>,
                normalized_query: String,
            }
            let out = ClassifyOut {
                problem: match c.problem {
                    Problem::Resilience => "resilience",
                    Problem::Responsibility => "responsibility",
                },
                verdict: match c.verdict {
                    Verdict::Ptime => "ptime",
                    Verdict::NpComplete => "np_complete",
                },
                triad: c.triad.as_ref().map(|t| t.0.clone()),
                linear_order: c.linear_order.clone(),
                normalized_query: c.normalized_query.to_string(),
            };
            let text = match &c.triad {
                Some(t) => format!(
                    "{}: NP-complete (triad {{{}, {}, {}}})",
                    out.problem, t.0[0], t.0[1], t.0[2]
                ),
                None => format!(
                    "{}: PTIME (linear order {})",
                    out.problem,
                    out.linear_order.as_deref().unwrap_or(&[]).join(" ")
                ),
            };
            emit(cli.format, &out, text);
            Ok(ExitCode::SUCCESS)
        }
        Command::Resilience {
            query,
            data,
            output_tuple,
        } => {
            let (normalized, db) = prepare(query, data, output_tuple.as_deref())?;
            let sol = resp::solve_resilience(&normalized.query, &db, &config)?;
            let out = solution_out(&sol, false);
            let text = format!(
                "k = {} via {} — delete {}",
                out.k,
                out.method,
                describe(&out.contingency)
            );
            emit(cli.format, &out, text);
            Ok(ExitCode::SUCCESS)
        }
        Command::Responsibility {
            query,
            data,
            tuple,
            output_tuple,
        } => {
            let (normalized, db) = prepare(query, data, output_tuple.as_deref())?;
            let target = WildcardTuple::parse(tuple)?;
            match resp::solve_responsibility(&normalized.query, &db, &config, &target)? {
                RespOutcome::Cause(sol) => {
                    let out = solution_out(&sol, true);
                    let text = format!(
                        "k = {} (score {:.4}) via {} — contingency {}",
                        out.k,
                        out.score.unwrap_or(0.0),
                        out.method,
                        describe(&out.contingency)
                    );
                    emit(cli.format, &out, text);
                    Ok(ExitCode::SUCCESS)
                }
                RespOutcome::NotACause => {
                    #[derive(Serialize)]
                    struct NotACause {
                        not_a_cause: bool,
                    }
                    emit(
                        cli.format,
                        &NotACause { not_a_cause: true },
                        format!("{target} is not a cause"),
                    );
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::MaxRespSet { query, data } => {
            let (normalized, db) = prepare(query, data, None)?;
            let s = resp::max_responsibility_set(&normalized.query, &db, &config)?;
            #[derive(Serialize)]
            struct MaxOut {
                k: usize,
                members: Vec<TupleOut>,
            }
            let out = MaxOut {
                k: s.k,
                members: s
                    .members
                    .iter()
                    .map(|(relation, tuple)| TupleOut {
                        relation: relation.clone(),
                        tuple: tuple.clone(),
                    })
                    .collect(),
            };
            let text = format!("k = {}; members: {}", out.k, describe(&out.members));
            emit(cli.format, &out, text);
            Ok(ExitCode::SUCCESS)
        }
        Command::Closure { query } => {
            let raw = read_query(query)?;
            let normalized = normalize(&raw, None)?;
            let closed = structure::induced_rewrite_closure(&normalized.query);
            #[derive(Serialize)]
            struct ClosureOut {
                query: String,
            }
            emit(
                cli.format,
                &ClosureOut {
                    query: closed.to_string(),
                },
                closed.to_string(),
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Linearize { query } => {
            let raw = read_query(query)?;
            let normalized = normalize(&raw, None)?;
            let closed = structure::induced_rewrite_closure(&normalized.query);
            let dominated = structure::apply_domination(&closed);
            let lin = linearize::linearize_triad_free(&dominated)?;
            #[derive(Serialize)]
            struct LinearizeOut {
                query: String,
                order: Vec<String>,
            }
            let out = LinearizeOut {
                query: lin.query.to_string(),
                order: lin.order.clone(),
            };
            let text = format!("{}\norder: {}", out.query, out.order.join(" "));
            emit(cli.format, &out, text);
            Ok(ExitCode::SUCCESS)
        }
        Command::GenGadget { kind, cnf, out, t } => {
            let psi = Cnf3::parse_dimacs(&std::fs::read_to_string(cnf)?)?;
            #[derive(Serialize)]
            struct GadgetOut {
                kind: &'static str,
                query: String,
                k: usize,
                #[serde(skip_serializing_if = "Option::is_none")]
                target: Option<String>,
                #[serde(skip_serializing_if = "Option::is_none")]
                t: Option<usize>,
                #[serde(skip_serializing_if = "Option::is_none")]
                faithful: Option<bool>,
                relations: std::collections::BTreeMap<String, usize>,
            }
            let info = match kind {
                GadgetKind::Triangle => {
                    if t.is_some() {
                        return Err(Error::Invalid("--t applies to the rats gadget only".into()));
                    }
                    let (db, k) = gadgets::gen_triangle_instance(&psi)?;
                    engine::write_database(&db, out)?;
                    GadgetOut {
                        kind: "triangle",
                        query: gadgets::triangle_query().to_string(),
                        k,
                        target: None,
                        t: None,
                        faithful: None,
                        relations: db
                            .relations
                            .iter()
                            .map(|(n, r)| (n.clone(), r.tuples.len()))
                            .collect(),
                    }
                }
                GadgetKind::Rats => {
                    let inst = gadgets::gen_rats_instance(&psi, *t)?;
                    engine::write_database(&inst.db, out)?;
                    GadgetOut {
                        kind: "rats",
                        query: gadgets::rats_query().to_string(),
                        k: inst.k,
                        target: Some(format!(
                            "{}({})",
                            inst.target_relation,
                            inst.target.join(",")
                        )),
                        t: Some(inst.t),
                        faithful: Some(inst.faithful),
                        relations: inst
                            .db
                            .relations
                            .iter()
                            .map(|(n, r)| (n.clone(), r.tuples.len()))
                            .collect(),
                    }
                }
            };
            let text = format!(
                "{} gadget written: k = {}{}",
                info.kind,
                info.k,
                info.target
                    .as_ref()
                    .map(|t| format!(", target {t}"))
                    .unwrap_or_default()
            );
            emit(cli.format, &info, text);
            Ok(ExitCode::SUCCESS)
        }
        Command::Witnesses { query, data } => {
            let (normalized, db) = prepare(query, data, None)?;
            let compiled = engine::Compiled::new(&normalized.query);
            let witnesses = engine::enumerate_witnesses(&normalized.query, &db, &config)?;
            #[derive(Serialize)]
            struct WitnessOut {
                count: usize,
                vars: Vec<String>,
                witnesses: Vec<Vec<String>>,
            }
            let out = WitnessOut {
                count: witnesses.len(),
                vars: compiled.vars.clone(),
                witnesses: witnesses
                    .iter()
                    .map(|w| db.render_tuple(&w.assignment))
                    .collect(),
            };
            let text = format!("{} witnesses over ({})", out.count, out.vars.join(","));
            emit(cli.format, &out, text);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn describe(tuples: &[TupleOut]) -> String {
    if tuples.is_empty() {
        return "nothing".to_string();
    }
    tuples
        .iter()
        .map(|t| format!("{}({})", t.relation, t.tuple.join(",")))
        .collect::<Vec<_>>()
        .join(", ")
}
