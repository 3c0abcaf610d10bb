//! Command-line front end for the trace-semantics engine: enumerate the
//! global traces of a program (`run`), validate a serialized trace against a
//! well-formedness policy (`check-wf`), or attempt a contract proof
//! (`prove`). Output is deterministic; machine format is newline-delimited
//! JSON with sorted keys.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lagc_core::compose::{finalize, Bounds, Engine, EngineError, Node, RunResult, Status};
use lagc_core::dl::{prove_program, Formula, ProofNode, ProverOptions, Verdict};
use lagc_core::expr::SExpr;
use lagc_core::lang::{parse, parse_expr, LanguageVariant, ParseError, Program};
use lagc_core::trace::{Item, Trace, TracePiece};
use lagc_core::value::Value;
use lagc_core::wf::{validate_trace, ChannelOwners, TraceViolation, WfChecker, WfPolicy};

/// Exit codes: anything the user got wrong in the input syntax is 2, a
/// variant-gate violation is 3, and 4 means the run ended without a single
/// decided result (all branches truncated, or a proof attempt got stuck).
const EXIT_OK: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_GATE: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "lagc",
    version,
    about = "Locally-abstract, globally-concrete trace semantics: enumerate, check, prove"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enumerate the global traces of a program.
    Run(RunArgs),
    /// Validate a serialized trace against a well-formedness policy.
    CheckWf(CheckWfArgs),
    /// Attempt a proof of a program contract.
    Prove(ProveArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Args)]
struct RunArgs {
    /// Language variant: seq, par, proc, multi, promela, actor, ao.
    #[arg(long)]
    model: String,
    /// Well-formedness policy, repeatable; `base[+pattern]*`, e.g.
    /// `multi+fifo+bd:3`. Defaults to the variant's canonical policy.
    #[arg(long = "wf")]
    wf: Vec<String>,
    /// Input-value domain, `LO..HI` (inclusive).
    #[arg(long)]
    domain: Option<String>,
    /// Id-pool size, repeatable; `SORT=N` with SORT one of mid, pid, oid, fid.
    #[arg(long = "pool-size")]
    pool_size: Vec<String>,
    /// Maximum composition steps per branch.
    #[arg(long = "max-steps")]
    max_steps: Option<usize>,
    /// Maximum number of collected traces (fallback: env LAGC_MAX_TRACES).
    #[arg(long = "max-traces")]
    max_traces: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Explore branches in parallel; output is byte-identical to serial.
    #[arg(long)]
    parallel: bool,
    /// Program source file.
    file: PathBuf,
}

#[derive(Args)]
struct CheckWfArgs {
    /// Policy name, `base[+pattern]*`.
    #[arg(long)]
    policy: String,
    /// Serialized trace file (newline-delimited JSON items).
    file: PathBuf,
}

#[derive(Args)]
struct ProveArgs {
    /// Language variant.
    #[arg(long)]
    model: String,
    /// Contract file: lines `pre: <expr>` (optional, repeatable) and
    /// `post: <expr>`.
    #[arg(long)]
    contract: PathBuf,
    /// Discharge domain, `LO..HI` (inclusive).
    #[arg(long)]
    domain: Option<String>,
    /// Bound on rule applications along a proof branch.
    #[arg(long = "max-depth")]
    max_depth: Option<usize>,
    /// Bound on loop unfoldings along a proof branch.
    #[arg(long = "loop-unroll")]
    loop_unroll: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Program source file.
    file: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run(args) => cmd_run(&args),
        Cmd::CheckWf(args) => cmd_check_wf(&args),
        Cmd::Prove(args) => cmd_prove(&args),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PARSE)
        }
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn parse_variant(name: &str) -> Result<LanguageVariant, String> {
    LanguageVariant::from_name(name).ok_or_else(|| format!("unknown model `{name}`"))
}

fn parse_domain(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("domain `{s}` is not of the form LO..HI"))?;
    let lo: i64 = lo.trim().parse().map_err(|_| format!("bad domain bound `{lo}`"))?;
    let hi: i64 = hi.trim().parse().map_err(|_| format!("bad domain bound `{hi}`"))?;
    if lo > hi {
        return Err(format!("domain {lo}..{hi} is empty"));
    }
    Ok((lo, hi))
}

/// Parse the program, mapping syntax errors to exit 2 and variant-gate
/// violations to exit 3.
fn load_program(path: &PathBuf, variant: LanguageVariant) -> Result<Program, (u8, String)> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| (EXIT_PARSE, format!("cannot read {}: {e}", path.display())))?;
    parse(&source, variant).map_err(|e| match e {
        ParseError::Gate(msg) => (EXIT_GATE, format!("gate violation: {msg}")),
        other => (EXIT_PARSE, format!("parse error: {other}")),
    })
}

fn bounds_from(max_steps: Option<usize>, max_traces: Option<usize>) -> Result<Bounds, String> {
    let mut bounds = Bounds::default();
    if let Some(n) = max_steps {
        bounds.max_steps = n;
    }
    match max_traces {
        Some(n) => bounds.max_traces = n,
        None => {
            if let Ok(env) = std::env::var("LAGC_MAX_TRACES") {
                bounds.max_traces = env
                    .parse()
                    .map_err(|_| format!("LAGC_MAX_TRACES=`{env}` is not a number"))?;
            }
        }
    }
    if bounds.max_steps == 0 || bounds.max_traces == 0 {
        return Err("bounds must be at least 1".into());
    }
    Ok(bounds)
}

fn value_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Int(n) => serde_json::Value::from(*n),
        Value::Bool(b) => serde_json::Value::from(*b),
        other => serde_json::Value::from(other.to_string()),
    }
}

fn json_value_to_value(j: &serde_json::Value) -> Result<Value, String> {
    match j {
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(Value::Int)
            .ok_or_else(|| format!("non-integer number {n}")),
        serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
        serde_json::Value::String(s) => parse_value_token(s),
        other => Err(format!("unsupported value {other}")),
    }
}

fn parse_value_token(s: &str) -> Result<Value, String> {
    match s {
        "tt" => return Ok(Value::Bool(true)),
        "ff" => return Ok(Value::Bool(false)),
        _ => {}
    }
    if let Ok(n) = s.parse::<i64>() {
        return Ok(Value::Int(n));
    }
    let (sort, num) = s.split_at(1);
    let n: u32 = num
        .parse()
        .map_err(|_| format!("unrecognised value token `{s}`"))?;
    Ok(match sort {
        "p" => Value::Pid(n),
        "i" => Value::Mid(n),
        "o" => Value::Oid(n),
        "f" => Value::Fid(n),
        "c" => Value::Cid(n),
        _ => return Err(format!("unrecognised value token `{s}`")),
    })
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn cmd_run(args: &RunArgs) -> Result<u8, String> {
    let variant = parse_variant(&args.model)?;
    let prog = match load_program(&args.file, variant) {
        Ok(p) => p,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return Ok(code);
        }
    };
    let mut engine = Engine::new(&prog);
    if !args.wf.is_empty() {
        // Repeatable --wf flags combine into one `base[+pattern]*` policy.
        let joined = args.wf.join("+");
        engine.policy = WfPolicy::parse(&joined)?;
    }
    if let Some(d) = &args.domain {
        engine.domain = parse_domain(d)?;
    }
    for spec in &args.pool_size {
        let (sort, n) = spec
            .split_once('=')
            .ok_or_else(|| format!("pool size `{spec}` is not of the form SORT=N"))?;
        let n: u32 = n.parse().map_err(|_| format!("bad pool size `{spec}`"))?;
        if n == 0 {
            return Err("pool sizes must be at least 1".into());
        }
        match sort {
            "mid" => engine.pools.mids = n,
            "pid" => engine.pools.pids = n,
            "oid" => engine.pools.oids = n,
            "fid" => engine.pools.fids = n,
            _ => return Err(format!("unknown id sort `{sort}` (mid, pid, oid, fid)")),
        }
    }
    let bounds = bounds_from(args.max_steps, args.max_traces)?;
    let result = if args.parallel {
        parallel_enumerate(&engine, &bounds)
    } else {
        engine.enumerate(&bounds)
    }
    .map_err(|e: EngineError| format!("{e}"))?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match args.format {
        Format::Text => emit_text(&mut out, &result),
        Format::Machine => emit_machine(&mut out, &result),
    }
    .map_err(|e| format!("{e}"))?;

    let all_truncated =
        !result.traces.is_empty() && result.traces.iter().all(|(_, s)| *s == Status::Truncated);
    Ok(if all_truncated { EXIT_INCONCLUSIVE } else { EXIT_OK })
}

/// Parallel exploration: split at the initial configuration's successors and
/// explore each subtree on the thread pool. [`finalize`] sorts and
/// deduplicates, so the merged output is byte-identical to a serial run
/// (whenever the trace budget does not bind).
fn parallel_enumerate(engine: &Engine, bounds: &Bounds) -> Result<RunResult, EngineError> {
    use rayon::prelude::*;
    let init = engine.initial()?;
    let succs: Vec<Node> = engine
        .successors(&init)?
        .into_iter()
        .filter(|n| n.cfg != init.cfg)
        .collect();
    if succs.is_empty() {
        return engine.enumerate(bounds);
    }
    let ancestors = vec![init.cfg.clone()];
    let parts: Result<Vec<RunResult>, EngineError> = succs
        .into_par_iter()
        .map(|n| engine.explore(n, &ancestors, bounds))
        .collect();
    Ok(finalize(parts?, bounds.max_traces))
}

fn summary_counts(result: &RunResult) -> (usize, usize, usize) {
    let mut c = (0, 0, 0);
    for (_, s) in &result.traces {
        match s {
            Status::Completed => c.0 += 1,
            Status::Deadlocked => c.1 += 1,
            Status::Truncated => c.2 += 1,
        }
    }
    c
}

fn emit_text(out: &mut impl Write, result: &RunResult) -> std::io::Result<()> {
    for (i, (tr, status)) in result.traces.iter().enumerate() {
        writeln!(out, "=== trace {} ({}) ===", i + 1, status.name())?;
        for item in tr.items() {
            match item {
                Item::State(st) => writeln!(out, "{st}")?,
                Item::Event(ev) => writeln!(out, "{ev}")?,
            }
        }
    }
    let (c, d, t) = summary_counts(result);
    writeln!(out, "summary: completed={c} deadlocked={d} truncated={t}")?;
    if result.budget_exhausted {
        writeln!(out, "note: trace budget exhausted; the set is incomplete")?;
    }
    Ok(())
}

fn state_json(st: &lagc_core::SymbolicState) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (x, se) in st.iter() {
        let v = match se.as_value() {
            Some(v) => value_json(v),
            None => serde_json::Value::from(se.to_string()),
        };
        map.insert(x.to_string(), v);
    }
    serde_json::Value::Object(map)
}

fn event_json(ev: &lagc_core::event::Event) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    map.insert("kind".into(), ev.kind.name().into());
    if let Some(m) = &ev.method {
        map.insert("method".into(), m.as_str().into());
    }
    let payload: Vec<serde_json::Value> = ev
        .payload
        .iter()
        .map(|se| match se.as_value() {
            Some(v) => value_json(v),
            None => serde_json::Value::from(se.to_string()),
        })
        .collect();
    map.insert("payload".into(), payload.into());
    if let Some(t) = &ev.tag {
        map.insert("tag".into(), value_json(t));
    }
    serde_json::Value::Object(map)
}

fn emit_machine(out: &mut impl Write, result: &RunResult) -> std::io::Result<()> {
    for (tr, status) in &result.traces {
        let header = serde_json::json!({
            "pc": [],
            "status": status.name(),
            "truncated": *status == Status::Truncated,
        });
        writeln!(out, "{header}")?;
        for item in tr.items() {
            let record = match item {
                Item::State(st) => serde_json::json!({ "state": state_json(st) }),
                Item::Event(ev) => serde_json::json!({ "event": event_json(ev) }),
            };
            writeln!(out, "{record}")?;
        }
    }
    let (c, d, t) = summary_counts(result);
    let summary = serde_json::json!({
        "summary": {
            "budget_exhausted": result.budget_exhausted,
            "completed": c,
            "deadlocked": d,
            "truncated": t,
        }
    });
    writeln!(out, "{summary}")
}

// ---------------------------------------------------------------------------
// check-wf
// ---------------------------------------------------------------------------

fn cmd_check_wf(args: &CheckWfArgs) -> Result<u8, String> {
    let policy = WfPolicy::parse(&args.policy)?;
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| format!("cannot read {}: {e}", args.file.display()))?;
    let trace = parse_trace_file(&text)?;
    if trace.is_empty() {
        // wf(ε) = true: the empty trace satisfies every policy.
        println!("pass");
        return Ok(EXIT_OK);
    }
    let owners = ChannelOwners::new();

    // Incremental checker (the one the enumerator runs online).
    let mut checker = WfChecker::new(policy.clone(), owners.clone());
    let mut incremental: Result<(), usize> = Ok(());
    for (i, ev) in trace.events().iter().enumerate() {
        if !checker.extend(ev) {
            incremental = Err(i);
            break;
        }
    }
    // Whole-trace validator (the independent second implementation). Its
    // event verdict must agree with the incremental one on the base clauses;
    // pattern constraints are whole-trace and only this validator sees them.
    let whole = validate_trace(&policy, &owners, &TracePiece::unconditional(trace.clone()));

    match (&incremental, &whole) {
        (Ok(()), Ok(())) => {
            println!("pass");
            Ok(EXIT_OK)
        }
        (Err(i), _) => {
            println!("fail at event {i}");
            Ok(EXIT_FAIL)
        }
        (Ok(()), Err(TraceViolation::Event(i))) => {
            println!("fail at event {i}");
            Ok(EXIT_FAIL)
        }
        (Ok(()), Err(TraceViolation::Structure(d))) => {
            println!("fail: {d}");
            Ok(EXIT_FAIL)
        }
    }
}

/// Parse the newline-delimited trace serialization: an optional header
/// record `{"pc": …}`, then one record per item, `{"state": {…}}` or
/// `{"event": {…}}`. An empty file is the empty trace.
fn parse_trace_file(text: &str) -> Result<Trace, String> {
    let mut trace = Trace::empty();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| format!("line {}: not a JSON record: {e}", lineno + 1))?;
        let obj = record
            .as_object()
            .ok_or_else(|| format!("line {}: expected an object", lineno + 1))?;
        if obj.contains_key("pc") || obj.contains_key("summary") {
            continue; // header / summary records carry no items
        }
        if let Some(st) = obj.get("state") {
            let map = st
                .as_object()
                .ok_or_else(|| format!("line {}: state is not an object", lineno + 1))?;
            let mut state = lagc_core::SymbolicState::new();
            for (k, v) in map {
                let val = json_value_to_value(v)
                    .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                state.bind_raw(lagc_core::Var::new(k), SExpr::Val(val));
            }
            trace = trace.push_state(state);
        } else if let Some(evj) = obj.get("event") {
            let map = evj
                .as_object()
                .ok_or_else(|| format!("line {}: event is not an object", lineno + 1))?;
            let kind_name = map
                .get("kind")
                .and_then(|k| k.as_str())
                .ok_or_else(|| format!("line {}: event has no kind", lineno + 1))?;
            let kind = lagc_core::event::EventKind::from_name(kind_name)
                .ok_or_else(|| format!("line {}: unknown event kind `{kind_name}`", lineno + 1))?;
            let payload: Vec<SExpr> = map
                .get("payload")
                .and_then(|p| p.as_array())
                .map(|a| {
                    a.iter()
                        .map(|v| json_value_to_value(v).map(SExpr::Val))
                        .collect::<Result<Vec<_>, _>>()
                })
                .transpose()
                .map_err(|e| format!("line {}: {e}", lineno + 1))?
                .unwrap_or_default();
            let mut ev = match map.get("method").and_then(|m| m.as_str()) {
                Some(m) => lagc_core::event::Event::with_method(kind, m, payload),
                None => lagc_core::event::Event::new(kind, payload),
            };
            if let Some(tag) = map.get("tag") {
                let tag = json_value_to_value(tag)
                    .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                ev = ev
                    .tagged(tag)
                    .map_err(|e| format!("line {}: {e}", lineno + 1))?;
            }
            trace = trace.push_event(ev);
        } else {
            return Err(format!(
                "line {}: record is neither a state nor an event",
                lineno + 1
            ));
        }
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// prove
// ---------------------------------------------------------------------------

fn cmd_prove(args: &ProveArgs) -> Result<u8, String> {
    let variant = parse_variant(&args.model)?;
    let prog = match load_program(&args.file, variant) {
        Ok(p) => p,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return Ok(code);
        }
    };
    let contract = std::fs::read_to_string(&args.contract)
        .map_err(|e| format!("cannot read {}: {e}", args.contract.display()))?;
    let (gamma, post) = parse_contract(&contract)?;
    let mut opts = ProverOptions::default();
    if let Some(d) = &args.domain {
        opts.domain = parse_domain(d)?;
    }
    if let Some(n) = args.max_depth {
        opts.max_depth = n;
    }
    if let Some(n) = args.loop_unroll {
        opts.loop_unroll = n;
    }
    let verdict = prove_program(&prog, gamma, post, &opts);
    match args.format {
        Format::Text => match &verdict {
            Verdict::Proved(tree) => {
                println!("proved ({} rule applications)", tree.size());
            }
            Verdict::Refuted { leaf, counter } => {
                println!("refuted: {}", render_counter(counter));
                println!("  at leaf: {leaf}");
            }
            Verdict::Stuck { leaf, reason } => {
                println!("stuck: {reason}");
                println!("  at leaf: {leaf}");
            }
        },
        Format::Machine => {
            let record = match &verdict {
                Verdict::Proved(tree) => serde_json::json!({
                    "verdict": "proved",
                    "rule_applications": tree.size(),
                    "rules": rule_trail(tree),
                }),
                Verdict::Refuted { leaf, counter } => serde_json::json!({
                    "verdict": "refuted",
                    "leaf": leaf,
                    "counter": counter
                        .iter()
                        .map(|(x, v)| (x.to_string(), value_json(v)))
                        .collect::<serde_json::Map<_, _>>(),
                }),
                Verdict::Stuck { leaf, reason } => serde_json::json!({
                    "verdict": "stuck",
                    "leaf": leaf,
                    "reason": reason,
                }),
            };
            println!("{record}");
        }
    }
    Ok(match verdict {
        Verdict::Proved(_) => EXIT_OK,
        Verdict::Refuted { .. } => EXIT_FAIL,
        Verdict::Stuck { .. } => EXIT_INCONCLUSIVE,
    })
}

fn render_counter(counter: &lagc_core::ConcretizationMapping) -> String {
    let parts: Vec<String> = counter.iter().map(|(x, v)| format!("{x} = {v}")).collect();
    format!("counter-valuation [{}]", parts.join(", "))
}

fn rule_trail(tree: &ProofNode) -> Vec<String> {
    let mut out = Vec::new();
    fn walk(n: &ProofNode, out: &mut Vec<String>) {
        out.push(n.rule.clone());
        for p in &n.premises {
            walk(p, out);
        }
    }
    walk(tree, &mut out);
    out
}

/// Contract files: `pre: <expr>` lines (optional, conjoined) and exactly one
/// `post: <expr>` line. Blank lines and `#` comments are skipped.
fn parse_contract(text: &str) -> Result<(Vec<Formula>, Formula), String> {
    let mut gamma = Vec::new();
    let mut post = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, expr) = line
            .split_once(':')
            .ok_or_else(|| format!("contract line {}: expected `pre:` or `post:`", lineno + 1))?;
        let formula = Formula::Atom(
            parse_expr(expr.trim())
                .map_err(|e| format!("contract line {}: {e}", lineno + 1))?,
        );
        match key.trim() {
            "pre" => gamma.push(formula),
            "post" => {
                if post.replace(formula).is_some() {
                    return Err("contract has more than one `post:` line".into());
                }
            }
            other => return Err(format!("contract line {}: unknown key `{other}`", lineno + 1)),
        }
    }
    let post = post.ok_or("contract has no `post:` line")?;
    Ok((gamma, post))
}
