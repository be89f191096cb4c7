//! Command-line front end: document I/O, subcommand dispatch and exit codes.
//!
//! Exit codes: 0 success, 1 violation or counterexample, 2 unsupported
//! question, 3 I/O, usage or schema error.

use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use quanta_core::analysis::{
    almost_sure_acceptance, analyze_deterministic_wa, analyze_inf_exact, analyze_limavg_nwa, analyze_liminf_nwa,
    approx_inf_sum, sup_sumplus_distribution, AnalysisReport,
};
use quanta_core::automaton::WeightedAutomaton;
use quanta_core::gen;
use quanta_core::json::{self as qjson, Document};
use quanta_core::markov::{validate_chain, LabeledMarkovChain};
use quanta_core::mca::{mca_to_nwa, validate_mca, Mca};
use quanta_core::nwa::{nwa_to_mca, validate_nwa, Nwa, Severity, ValidationReport};
use quanta_core::sim::{check_equivalence_on_prefixes, monte_carlo_estimate, Equivalence, McConfig, Model};
use quanta_core::value::{parse_rational, FinValFn, InfValFn, Rational};
use quanta_core::Error;

#[derive(Parser, Debug)]
#[command(name = "quanta", version, about = "Quantitative analysis of nested weighted automata over Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a document (kind detected from its keys)
    Validate { file: String },
    /// Translate between nested automata and counter automata
    Translate {
        #[command(subcommand)]
        direction: Direction,
    },
    /// Answer a probabilistic question exactly (or approximately with --approx)
    Analyze(AnalyzeArgs),
    /// Monte Carlo estimate of the expected value
    Simulate(SimulateArgs),
    /// Print a generated document
    Generate {
        #[command(subcommand)]
        what: Generator,
    },
    /// Compare two models on all words up to a length
    Equivalence {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long, default_value_t = 10)]
        max_len: usize,
    },
}

#[derive(Subcommand, Debug)]
enum Direction {
    NwaToMca {
        #[arg(long)]
        width: usize,
        file: String,
    },
    McaToNwa { file: String },
}

#[derive(Args, Debug)]
#[group(id = "model", required = true, multiple = false)]
struct ModelArgs {
    #[arg(long, group = "model")]
    nwa: Option<String>,
    #[arg(long, group = "model")]
    mca: Option<String>,
    #[arg(long, group = "model")]
    wa: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Question {
    Expected,
    Distribution,
    AlmostSure,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    chain: String,
    #[arg(long, value_enum, default_value_t = Question::Expected)]
    question: Question,
    /// Threshold(s) for the distribution, as p/q; may be repeated
    #[arg(long)]
    lambda: Vec<String>,
    #[arg(long)]
    approx: bool,
    #[arg(long)]
    epsilon: Option<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    chain: String,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Defaults to $QUANTA_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    burn_in: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Generator {
    BlocksDiff,
    Art {
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    Cnf {
        #[arg(long)]
        file: String,
    },
    Uniform {
        /// Comma-separated letters
        #[arg(long)]
        alphabet: String,
    },
    Intersection {
        #[arg(long, num_args = 1.., required = true)]
        files: Vec<String>,
    },
    /// Chain emitting r, then # with probability p or g otherwise
    RequestGrant {
        #[arg(long, default_value = "1/2")]
        p: String,
    },
}

/// A failure with its exit code and machine-readable tag.
struct Failure {
    code: i32,
    tag: String,
    message: String,
}

impl Failure {
    fn new(code: i32, tag: &str, message: impl Into<String>) -> Self {
        Failure { code, tag: tag.to_string(), message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure::new(3, "IoError", message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Value(_) | Error::Schema(_) | Error::NonDeterministic { .. } => 3,
            Error::OpenProblem(_)
            | Error::SumUnboundedBelow
            | Error::Unsupported(_)
            | Error::NotDualizable(_)
            | Error::UndefinedExpected
            | Error::StateBudgetExceeded(_)
            | Error::DepthCap { .. } => 2,
            _ => 1,
        };
        Failure::new(code, e.tag(), e.to_string())
    }
}

type Outcome = std::result::Result<(i32, String), Failure>;

/// Runs one command; returns the exit code and the text for stdout.
pub fn run_command<I, T>(argv: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            return (code, e.to_string());
        }
    };
    match dispatch(cli.command) {
        Ok(r) => r,
        Err(f) => (f.code, json!({"error": f.tag, "message": f.message}).to_string()),
    }
}

fn read_source(path: &str) -> std::result::Result<String, Failure> {
    if path == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::io(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        std::fs::read_to_string(PathBuf::from(path)).map_err(|e| Failure::io(format!("{path}: {e}")))
    }
}

fn load(path: &str) -> std::result::Result<Document, Failure> {
    Ok(qjson::parse_document(&read_source(path)?)?)
}

fn load_chain(path: &str) -> std::result::Result<LabeledMarkovChain, Failure> {
    let c = qjson::parse_chain(&read_source(path)?)?;
    let issues = validate_chain(&c);
    if !issues.is_empty() {
        return Err(Failure::new(3, "SchemaError", format!("invalid chain: {}", issues.join("; "))));
    }
    Ok(c)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn rational_arg(s: &str, what: &str) -> std::result::Result<Rational, Failure> {
    parse_rational(s).map_err(|e| Failure::new(3, "ValueError", format!("{what}: {e}")))
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Validate { file } => validate(&file),
        Command::Translate { direction } => translate(direction),
        Command::Analyze(args) => analyze(&args),
        Command::Simulate(args) => simulate(&args),
        Command::Generate { what } => generate(what),
        Command::Equivalence { left, right, max_len } => equivalence(&left, &right, max_len),
    }
}

fn report_json(kind: &str, r: &ValidationReport) -> (i32, String) {
    let issues: Vec<Value> = r
        .issues
        .iter()
        .map(|i| {
            let sev = if i.severity == Severity::Error { "error" } else { "warning" };
            json!({"kind": i.kind, "severity": sev, "message": i.message})
        })
        .collect();
    let code = if r.is_valid() { 0 } else { 1 };
    (code, pretty(&json!({"kind": kind, "valid": r.is_valid(), "issues": issues})))
}

fn validate(file: &str) -> Outcome {
    let doc = load(file)?;
    Ok(match &doc {
        Document::Nwa(n) => report_json("nwa", &validate_nwa(n)),
        Document::Mca(m) => report_json("mca", &validate_mca(m)),
        Document::Chain(c) => {
            let mut r = ValidationReport::default();
            for issue in validate_chain(c) {
                r.error("chain", issue);
            }
            report_json("chain", &r)
        }
        Document::Automaton(_) => report_json("automaton", &ValidationReport::default()),
    })
}

fn expect_nwa(doc: Document) -> std::result::Result<Nwa, Failure> {
    match doc {
        Document::Nwa(n) => Ok(n),
        other => Err(Failure::new(3, "SchemaError", format!("expected a nested automaton, got {}", other.kind()))),
    }
}

fn expect_mca(doc: Document) -> std::result::Result<Mca, Failure> {
    match doc {
        Document::Mca(m) => Ok(m),
        other => Err(Failure::new(3, "SchemaError", format!("expected a counter automaton, got {}", other.kind()))),
    }
}

fn translate(d: Direction) -> Outcome {
    match d {
        Direction::NwaToMca { width, file } => {
            let nwa = expect_nwa(load(&file)?)?;
            Ok((0, pretty(&qjson::mca_to_json(&nwa_to_mca(&nwa, width)?))))
        }
        Direction::McaToNwa { file } => {
            let mca = expect_mca(load(&file)?)?;
            Ok((0, pretty(&qjson::nwa_to_json(&mca_to_nwa(&mca)?))))
        }
    }
}

enum Loaded {
    Nwa(Nwa),
    Wa(WeightedAutomaton),
}

/// Loads the analyzed model; non-deterministic input is refused as an
/// undecidable question rather than a schema error.
fn load_model(m: &ModelArgs) -> std::result::Result<Loaded, Failure> {
    let refuse = |e: Error| match e {
        Error::NonDeterministic { .. } => Failure::new(
            2,
            "Undecidable",
            format!("undecidable: analysis of non-deterministic automata is not supported ({e})"),
        ),
        e => e.into(),
    };
    if let Some(p) = &m.nwa {
        Ok(Loaded::Nwa(qjson::parse_nwa(&read_source(p)?).map_err(refuse)?))
    } else if let Some(p) = &m.mca {
        let mca = qjson::parse_mca(&read_source(p)?).map_err(refuse)?;
        Ok(Loaded::Nwa(mca_to_nwa(&mca)?))
    } else if let Some(p) = &m.wa {
        Ok(Loaded::Wa(qjson::parse_automaton(&read_source(p)?).map_err(refuse)?))
    } else {
        Err(Failure::new(3, "UsageError", "one of --nwa, --mca, --wa is required"))
    }
}

fn has_sumplus(nwa: &Nwa) -> bool {
    nwa.slaves.iter().any(|s| !s.is_dummy() && s.fin_fn() == Some(&FinValFn::SumPlus))
}

fn analyze(a: &AnalyzeArgs) -> Outcome {
    let model = load_model(&a.model)?;
    let chain = load_chain(&a.chain)?;
    let lambdas = a.lambda.iter().map(|l| rational_arg(l, "lambda")).collect::<std::result::Result<Vec<_>, _>>()?;
    let nwa = match model {
        Loaded::Wa(wa) => {
            if a.question == Question::AlmostSure && lambdas.is_empty() {
                return Err(Failure::new(3, "UsageError", "--question almost-sure on an automaton needs --lambda"));
            }
            let r = analyze_deterministic_wa(&wa, &chain)?;
            return Ok(answer(a.question, &r, &lambdas));
        }
        Loaded::Nwa(n) => n,
    };
    let v = validate_nwa(&nwa);
    if !v.is_valid() {
        return Ok(report_json("nwa", &v));
    }
    if a.question == Question::AlmostSure && lambdas.is_empty() {
        let res = almost_sure_acceptance(&nwa, &chain);
        let code = if res.holds { 0 } else { 1 };
        return Ok((code, json!({"almostSureAccepting": res.holds, "reasons": res.reasons}).to_string()));
    }
    let report = match nwa.master_fn {
        InfValFn::LimInf | InfValFn::LimSup => analyze_liminf_nwa(&nwa, &chain)?,
        InfValFn::LimAvg => analyze_limavg_nwa(&nwa, &chain)?,
        InfValFn::Inf | InfValFn::Sup => {
            if a.approx {
                let eps = a
                    .epsilon
                    .as_deref()
                    .ok_or_else(|| Failure::new(3, "UsageError", "--approx needs --epsilon"))?;
                approx_inf_sum(&nwa, &chain, &rational_arg(eps, "epsilon")?)?
            } else if nwa.master_fn == InfValFn::Sup && has_sumplus(&nwa) && a.question != Question::Expected {
                let [lambda] = lambdas.as_slice() else {
                    return Err(Failure::new(
                        3,
                        "UsageError",
                        "the distribution of Sup over SumPlus slaves is computed for exactly one --lambda",
                    ));
                };
                sup_sumplus_distribution(&nwa, &chain, lambda)?
            } else {
                analyze_inf_exact(&nwa, &chain)?
            }
        }
    };
    Ok(answer(a.question, &report, &lambdas))
}

fn answer(q: Question, r: &AnalysisReport, lambdas: &[Rational]) -> (i32, String) {
    let mut v = qjson::report_to_json(r, lambdas);
    if q == Question::AlmostSure {
        let holds: Vec<Value> = lambdas
            .iter()
            .map(|l| {
                let full = r.distribution.unresolved == Rational::from_integer(0.into())
                    && r.cdf(&quanta_core::value::ExtValue::Finite(l.clone())) == Rational::from_integer(1.into());
                json!({"lambda": quanta_core::value::fmt_rational(l), "holds": full})
            })
            .collect();
        v["almostSure"] = Value::Array(holds);
    }
    (0, v.to_string())
}

fn simulate(a: &SimulateArgs) -> Outcome {
    let model = load_model(&a.model)?;
    let chain = load_chain(&a.chain)?;
    let seed = match a.seed {
        Some(s) => s,
        None => match std::env::var("QUANTA_SEED") {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Failure::new(3, "UsageError", format!("QUANTA_SEED `{s}` is not an integer")))?,
            Err(_) => 0,
        },
    };
    let cfg = McConfig { horizon: a.horizon, samples: a.samples, seed, burn_in: a.burn_in };
    let est = match &model {
        Loaded::Nwa(n) => monte_carlo_estimate(Model::Nwa(n), &chain, &cfg)?,
        Loaded::Wa(w) => monte_carlo_estimate(Model::Wa(w), &chain, &cfg)?,
    };
    let dec = |x: f64| if x.is_finite() { format!("{x:.6}") } else { "nan".to_string() };
    Ok((
        0,
        json!({
            "mean": dec(est.mean),
            "variance": dec(est.variance),
            "stdError": dec(est.std_error),
            "rejectionRate": dec(est.rejection_rate),
            "accepted": est.accepted,
            "samples": est.samples,
            "horizon": a.horizon,
            "burnIn": est.burn_in,
            "seed": seed,
        })
        .to_string(),
    ))
}

fn generate(g: Generator) -> Outcome {
    let doc = match g {
        Generator::BlocksDiff => Document::Mca(gen::build_blocks_diff()),
        Generator::Art { k } => {
            if k == 0 {
                return Err(Failure::new(3, "UsageError", "--k must be at least 1"));
            }
            Document::Nwa(gen::build_art(k))
        }
        Generator::Cnf { file } => {
            let (n, clauses) = gen::parse_dimacs(&read_source(&file)?)?;
            Document::Nwa(gen::cnf_to_nwa(n, &clauses)?)
        }
        Generator::Uniform { alphabet } => {
            let letters: Vec<&str> = alphabet.split(',').map(str::trim).collect();
            let al = quanta_core::automaton::Alphabet::new(letters)?;
            Document::Chain(gen::uniform_chain(&al))
        }
        Generator::Intersection { files } => {
            let dfas = files
                .iter()
                .map(|f| Ok(qjson::parse_dfa(&read_source(f)?)?))
                .collect::<std::result::Result<Vec<_>, Failure>>()?;
            Document::Nwa(gen::intersection_to_nwa(&dfas)?)
        }
        Generator::RequestGrant { p } => Document::Chain(gen::request_grant_chain(rational_arg(&p, "p")?)),
    };
    Ok((0, pretty(&doc.to_json())))
}

fn as_model(d: &Document) -> std::result::Result<Model<'_>, Failure> {
    match d {
        Document::Nwa(n) => Ok(Model::Nwa(n)),
        Document::Mca(m) => Ok(Model::Mca(m)),
        Document::Automaton(a) => Ok(Model::Wa(a)),
        Document::Chain(_) => Err(Failure::new(3, "SchemaError", "a chain is not a model")),
    }
}

fn equivalence(left: &str, right: &str, max_len: usize) -> Outcome {
    let (l, r) = (load(left)?, load(right)?);
    let (ml, mr) = (as_model(&l)?, as_model(&r)?);
    if ml.alphabet() != mr.alphabet() {
        return Err(Failure::new(3, "SchemaError", "the two models use different alphabets"));
    }
    Ok(match check_equivalence_on_prefixes(ml, mr, ml.alphabet(), max_len)? {
        Equivalence::Equivalent => (0, json!({"result": "equivalent", "maxLen": max_len}).to_string()),
        Equivalence::Counterexample(w) => (
            1,
            json!({"result": "counterexample", "word": ml.alphabet().render_word(&w), "maxLen": max_len}).to_string(),
        ),
    })
}
