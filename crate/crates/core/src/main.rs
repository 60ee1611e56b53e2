use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use attrdbg::bench::{bench, named_corpus};
use attrdbg::evaluator::{evaluate, AttributedTree, EvalStatus};
use attrdbg::gad::{GadConfig, Strategy, Termination};
use attrdbg::grammar::{bundled, validate_against, Grammar, ShapeCheck};
use attrdbg::mutate::mutate_grammar;
use attrdbg::sentence::{load_tree, parse_input};
use attrdbg::server::{serve, AppState};
use attrdbg::session::{run_trace, transcript, ConsoleOracle, Oracle, ReferenceOracle, ScriptedOracle, SessionError};

const EXIT_USAGE: u8 = 1;
const EXIT_FAULT: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(name = "attrdbg", version, about = "Evaluate attribute grammars and localize faulty semantic rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a sentence and print every attribute value.
    Eval {
        grammar: PathBuf,
        /// Sentence text; omit when using --tree.
        input: Option<String>,
        /// Read a serialized parse tree instead of parsing INPUT.
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Write the computation trace as JSON lines.
        #[arg(long)]
        dump_trace: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Localize the rule responsible for a wrong result.
    Debug {
        grammar: PathBuf,
        input: String,
        #[arg(long, default_value = "gad")]
        strategy: Strategy,
        /// interactive, scripted:FILE or reference:GRAMMAR
        #[arg(long, default_value = "interactive")]
        oracle: String,
        /// Stop once at most this many rules remain.
        #[arg(long, default_value_t = 1)]
        epsilon: usize,
        #[arg(long)]
        lambda: Option<f64>,
        /// Write the session log here.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Write a single-rule mutant of a grammar.
    Mutate {
        grammar: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Mutant source goes here (and the manifest to FILE.json); stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the manifest as JSON instead of the source.
        #[arg(long)]
        json: bool,
    },
    /// Compare the strategies over a mutant corpus.
    Bench {
        /// g1, minisem or all
        #[arg(long, default_value = "all")]
        corpus: String,
        /// Number of seeds to draw mutants from; every site when omitted.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, value_delimiter = ',', default_values_t = Strategy::ALL)]
        strategies: Vec<Strategy>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the session API over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// 0 picks a free port.
        #[arg(long, env = "ATTRDBG_PORT", default_value_t = 8080)]
        port: u16,
        /// Keep session logs here and restore them on startup.
        #[arg(long, env = "ATTRDBG_DATA_DIR")]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure(EXIT_USAGE, e.to_string())
    }
}

/// Reads a grammar file; the bundled sample names work from any directory.
fn load_grammar(path: &Path) -> Result<Grammar, Failure> {
    let src = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            let bundled = match path.file_name().and_then(|n| n.to_str()) {
                Some("g1_buggy.ag") => bundled::G1_BUGGY,
                Some("g1_fixed.ag") => bundled::G1_FIXED,
                Some("minisem_fixed.ag") => bundled::MINISEM_FIXED,
                _ => return Err(Failure(EXIT_USAGE, format!("{}: {e}", path.display()))),
            };
            bundled.to_string()
        }
    };
    attrdbg::parse_grammar(&src).map_err(|e| Failure(EXIT_USAGE, format!("{}:{e}", path.display())))
}

fn print_values(at: &AttributedTree, out: &mut impl Write) -> io::Result<()> {
    for n in at.tree.nonterminals() {
        writeln!(out, "{}[{}] {:?}", n.symbol.name(), n.id, at.tree.text(n.id))?;
        for i in at.inherited_of(n.id).into_iter().chain(at.synthesized_of(n.id)) {
            let v = at.value(i).map(|v| v.to_string()).unwrap_or_else(|| "undefined".into());
            writeln!(out, "  {} = {v}", at.attr_name(i))?;
        }
    }
    let root = at.tree.nodes[at.root()].symbol.name();
    for (i, v) in at.root_outputs() {
        let v = v.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into());
        writeln!(out, "{root}.{} = {v}", at.attr_name(i))?;
    }
    Ok(())
}

fn cmd_eval(grammar: &Path, input: Option<&str>, tree: Option<&Path>, dump: Option<&Path>, as_json: bool) -> Result<u8, Failure> {
    let g = Arc::new(load_grammar(grammar)?);
    let parsed = match (input, tree) {
        (_, Some(p)) => load_tree(&g, &fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?)?,
        (Some(i), None) => parse_input(&g, i)?,
        (None, None) => return Err(Failure(EXIT_USAGE, "give INPUT or --tree".into())),
    };
    let at = evaluate(g, parsed)?;
    if let Some(p) = dump {
        fs::write(p, at.export_trace())?;
    }
    let mut out = io::stdout().lock();
    if as_json {
        let nodes: Vec<_> = at
            .tree
            .nonterminals()
            .map(|n| {
                let attrs: serde_json::Map<_, _> = at
                    .inherited_of(n.id)
                    .into_iter()
                    .chain(at.synthesized_of(n.id))
                    .map(|i| (at.attr_name(i).to_string(), at.value(i).map(|v| v.to_json()).unwrap_or_default()))
                    .collect();
                json!({"node": n.id, "symbol": n.symbol.name(), "text": at.tree.text(n.id), "attrs": attrs})
            })
            .collect();
        let root: serde_json::Map<_, _> =
            at.root_outputs().into_iter().map(|(i, v)| (at.attr_name(i).to_string(), v.map(|v| v.to_json()).unwrap_or_default())).collect();
        let fault = at.fault().map(|f| json!({"instance": at.label(f.comp), "kind": format!("{:?}", f.kind), "message": f.message}));
        writeln!(out, "{}", json!({"status": if at.is_failed() { "failed" } else { "completed" }, "fault": fault, "nodes": nodes, "root": root}))?;
    } else {
        print_values(&at, &mut out)?;
    }
    if let EvalStatus::Failed(_) = &at.status {
        for f in at.faults() {
            eprintln!("runtime error at {}: {}", at.label(f.comp), f.message);
        }
        return Ok(EXIT_FAULT);
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_debug(
    grammar: &Path,
    input: &str,
    strategy: Strategy,
    oracle: &str,
    epsilon: usize,
    lambda: Option<f64>,
    transcript_path: Option<&Path>,
    as_json: bool,
) -> Result<u8, Failure> {
    let g = Arc::new(load_grammar(grammar)?);
    let at = Arc::new(evaluate(g.clone(), parse_input(&g, input)?)?);
    let mut config = GadConfig::new(strategy, epsilon);
    if let Some(l) = lambda {
        config.lambda = l;
    }
    let stdin = io::stdin();
    let mut oracle: Box<dyn Oracle> = match oracle.split_once(':') {
        None if oracle == "interactive" => Box::new(ConsoleOracle::new(stdin.lock(), io::stdout())),
        Some(("scripted", file)) => {
            let text = fs::read_to_string(file).map_err(|e| format!("{file}: {e}"))?;
            Box::new(ScriptedOracle::new(&transcript::from_jsonl(&text).map_err(|e| format!("{file}: {e}"))?))
        }
        Some(("reference", file)) => {
            let intended = load_grammar(Path::new(file))?;
            if let ShapeCheck::ShapeMismatch(d) = validate_against(&g, &intended) {
                return Err(Failure(EXIT_USAGE, format!("{file} does not match the grammar's shape: {}", d.join("; "))));
            }
            Box::new(ReferenceOracle::new(Arc::new(intended)))
        }
        _ => return Err(Failure(EXIT_USAGE, format!("unknown oracle {oracle:?}"))),
    };
    if let Some(f) = at.fault() {
        eprintln!("runtime error at {}: {}", at.label(f.comp), f.message);
    }
    let outcome = match run_trace(at.clone(), config, oracle.as_mut()) {
        Ok(o) => o,
        Err(SessionError::NothingToDebug) => return Err(Failure(EXIT_USAGE, "the output was judged correct; nothing to debug".into())),
        Err(e) => return Err(e.into()),
    };
    if let Some(p) = transcript_path {
        fs::write(p, transcript::to_jsonl(&outcome.transcript))?;
    }
    let mut out = io::stdout().lock();
    if as_json {
        let mut report = serde_json::to_value(&outcome.report)?;
        report["candidate_comps"] = json!(outcome.report.candidate_comps.iter().map(|&c| at.label(c)).collect::<Vec<_>>());
        writeln!(out, "{}", json!({"report": report, "transcript": outcome.transcript, "metrics": outcome.metrics}))?;
    } else {
        write!(out, "{}", outcome.report.render(&at))?;
    }
    Ok(if outcome.report.terminated_by == Termination::Abort { EXIT_ABORT } else { 0 })
}

fn cmd_mutate(grammar: &Path, seed: u64, out: Option<&Path>, as_json: bool) -> Result<u8, Failure> {
    let g = load_grammar(grammar)?;
    let (m, mutation) = mutate_grammar(&g, seed)?;
    let manifest = json!({"grammar": g.name, "source": grammar.display().to_string(), "mutation": mutation});
    match out {
        Some(p) => {
            fs::write(p, m.to_source())?;
            let mut mp = p.as_os_str().to_owned();
            mp.push(".json");
            fs::write(&mp, serde_json::to_string_pretty(&manifest)? + "\n")?;
        }
        None if !as_json => print!("{}", m.to_source()),
        None => {}
    }
    if as_json {
        println!("{manifest}");
    } else {
        eprintln!("mutated {} ({}): {} -> {}", mutation.rule, mutation.operator, mutation.before, mutation.after);
    }
    Ok(0)
}

fn cmd_bench(corpus: &str, trials: Option<u64>, strategies: &[Strategy], format: Format, out: Option<&Path>) -> Result<u8, Failure> {
    let c = named_corpus(corpus, trials).ok_or_else(|| format!("unknown corpus {corpus:?} (expected g1, minisem or all)"))?;
    let report = bench(&c, strategies);
    let text = match format {
        Format::Text => report.to_text(),
        Format::Csv => report.to_csv(),
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
    };
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_serve(host: &str, port: u16, data_dir: Option<PathBuf>) -> Result<u8, Failure> {
    let addr: SocketAddr = format!("{host}:{port}").parse().map_err(|e| format!("{host}:{port}: {e}"))?;
    let state = match data_dir {
        Some(d) => AppState::with_data_dir(d)?,
        None => AppState::new(),
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(serve(addr, state, |bound| {
        println!("listening on http://{bound}");
        let _ = io::stdout().flush();
    }))?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Eval { grammar, input, tree, dump_trace, json } => {
            cmd_eval(grammar, input.as_deref(), tree.as_deref(), dump_trace.as_deref(), *json)
        }
        Command::Debug { grammar, input, strategy, oracle, epsilon, lambda, transcript, json } => {
            cmd_debug(grammar, input, *strategy, oracle, *epsilon, *lambda, transcript.as_deref(), *json)
        }
        Command::Mutate { grammar, seed, out, json } => cmd_mutate(grammar, *seed, out.as_deref(), *json),
        Command::Bench { corpus, trials, strategies, format, out } => cmd_bench(corpus, *trials, strategies, *format, out.as_deref()),
        Command::Serve { host, port, data_dir } => cmd_serve(host, *port, data_dir.clone()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
