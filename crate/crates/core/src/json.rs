//! JSON documents for automata, nested automata, counter automata and
//! chains, and for analysis reports.

use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Map, Value};

use crate::analysis::{AnalysisReport, Method};
use crate::automaton::{Alphabet, LabeledAutomaton, ValueFn, Weight, WeightedAutomaton};
use crate::error::{Error, Result};
use crate::gen::Dfa;
use crate::markov::{EdgeWeight, LabeledMarkovChain};
use crate::mca::{CounterInstr, Mca};
use crate::nwa::Nwa;
use crate::value::{fmt_rational, parse_rational, FinValFn, InfValFn, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Document {
    Automaton(WeightedAutomaton),
    Nwa(Nwa),
    Mca(Mca),
    Chain(LabeledMarkovChain),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Automaton(_) => "automaton",
            Document::Nwa(_) => "nwa",
            Document::Mca(_) => "mca",
            Document::Chain(_) => "chain",
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Document::Automaton(a) => automaton_to_json(a),
            Document::Nwa(n) => nwa_to_json(n),
            Document::Mca(m) => mca_to_json(m),
            Document::Chain(c) => chain_to_json(c),
        }
    }
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn parse_value(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| schema(format!("invalid JSON: {e}")))
}

/// Detects the document kind from its keys.
pub fn parse_document(text: &str) -> Result<Document> {
    document_from_json(&parse_value(text)?)
}

pub fn document_from_json(v: &Value) -> Result<Document> {
    let obj = v.as_object().ok_or_else(|| schema("document must be an object"))?;
    if obj.contains_key("master") {
        Ok(Document::Nwa(nwa_from_json(v)?))
    } else if obj.contains_key("counters") {
        Ok(Document::Mca(mca_from_json(v)?))
    } else if obj.contains_key("edges") {
        Ok(Document::Chain(chain_from_json(v)?))
    } else {
        Ok(Document::Automaton(automaton_from_json(v)?))
    }
}

pub fn parse_nwa(text: &str) -> Result<Nwa> {
    nwa_from_json(&parse_value(text)?)
}

pub fn parse_mca(text: &str) -> Result<Mca> {
    mca_from_json(&parse_value(text)?)
}

pub fn parse_chain(text: &str) -> Result<LabeledMarkovChain> {
    chain_from_json(&parse_value(text)?)
}

pub fn parse_automaton(text: &str) -> Result<WeightedAutomaton> {
    automaton_from_json(&parse_value(text)?)
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| schema(format!("missing field `{key}`")))
}

fn object(v: &Value, what: &str) -> Result<Map<String, Value>> {
    v.as_object().cloned().ok_or_else(|| schema(format!("{what} must be an object")))
}

fn string<'a>(v: &'a Value, what: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| schema(format!("{what} must be a string")))
}

fn strings(v: &Value, what: &str) -> Result<Vec<String>> {
    v.as_array()
        .ok_or_else(|| schema(format!("{what} must be an array")))?
        .iter()
        .map(|x| string(x, what).map(str::to_string))
        .collect()
}

fn array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(format!("{what} must be an array")))
}

fn integer(v: &Value, what: &str) -> Result<BigInt> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(BigInt::from(i))
            } else if let Some(u) = n.as_u64() {
                Ok(BigInt::from(u))
            } else {
                Err(schema(format!("{what} must be an integer")))
            }
        }
        Value::String(s) => BigInt::from_str(s.trim()).map_err(|_| schema(format!("{what} must be an integer"))),
        _ => Err(schema(format!("{what} must be an integer"))),
    }
}

fn integer_json(n: &BigInt) -> Value {
    match n.to_i64() {
        Some(i) => json!(i),
        None => json!(n.to_string()),
    }
}

/// Shared header: alphabet, state names and initial state.
struct Header {
    alphabet: Alphabet,
    states: Vec<String>,
    initial: usize,
    accepting: Vec<bool>,
}

impl Header {
    fn parse(obj: &Map<String, Value>) -> Result<Self> {
        let alphabet = Alphabet::new(strings(field(obj, "alphabet")?, "alphabet")?)
            .map_err(|e| schema(format!("alphabet: {e}")))?;
        let states = strings(field(obj, "states")?, "states")?;
        if states.is_empty() {
            return Err(schema("need at least one state"));
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                return Err(schema(format!("duplicate state `{s}`")));
            }
        }
        let mut h = Header { alphabet, accepting: vec![false; states.len()], initial: 0, states };
        h.initial = h.state(field(obj, "initial")?)?;
        if let Some(acc) = obj.get("accepting") {
            for a in array(acc, "accepting")? {
                let q = h.state(a)?;
                h.accepting[q] = true;
            }
        }
        Ok(h)
    }

    fn state(&self, v: &Value) -> Result<usize> {
        let name = string(v, "state")?;
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| schema(format!("unknown state `{name}`")))
    }

    fn letter(&self, v: &Value) -> Result<usize> {
        let name = string(v, "letter")?;
        self.alphabet.index(name).ok_or_else(|| schema(format!("unknown letter `{name}`")))
    }

    /// (from, letter, to, transition object) for every transition.
    fn transitions(&self, obj: &Map<String, Value>) -> Result<Vec<(usize, usize, usize, Map<String, Value>)>> {
        let Some(ts) = obj.get("transitions") else { return Ok(Vec::new()) };
        array(ts, "transitions")?
            .iter()
            .map(|t| {
                let t = object(t, "transition")?;
                Ok((self.state(field(&t, "from")?)?, self.letter(field(&t, "letter")?)?, self.state(field(&t, "to")?)?, t))
            })
            .collect()
    }
}

fn header_json(alphabet: &Alphabet, states: &[String], initial: usize, accepting: &[bool]) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("alphabet".into(), json!(alphabet.letters()));
    m.insert("states".into(), json!(states));
    m.insert("initial".into(), json!(states[initial]));
    let acc: Vec<&String> = states.iter().zip(accepting).filter(|(_, a)| **a).map(|(s, _)| s).collect();
    m.insert("accepting".into(), json!(acc));
    m
}

fn value_fn_from(obj: &Map<String, Value>, key: &str) -> Result<ValueFn> {
    let name = string(field(obj, key)?, key)?;
    Ok(match name {
        "Min" => ValueFn::Fin(FinValFn::Min),
        "Max" => ValueFn::Fin(FinValFn::Max),
        "Sum" => ValueFn::Fin(FinValFn::Sum),
        "SumPlus" => ValueFn::Fin(FinValFn::SumPlus),
        "BSum" => {
            let b = integer(field(obj, "bound")?, "bound")?;
            if b < BigInt::zero() {
                return Err(schema("bound must be non-negative"));
            }
            ValueFn::Fin(FinValFn::BSum(b))
        }
        other => ValueFn::Inf(InfValFn::from_str(other).map_err(|_| schema(format!("unknown value function `{other}`")))?),
    })
}

fn value_fn_into(m: &mut Map<String, Value>, f: &ValueFn) {
    m.insert("valueFunction".into(), json!(f.name()));
    if let ValueFn::Fin(FinValFn::BSum(b)) = f {
        m.insert("bound".into(), integer_json(b));
    }
}

fn weight_from(v: Option<&Value>) -> Result<Weight> {
    match v {
        None => Err(schema("transition needs a `weight`")),
        Some(Value::String(s)) if s == "silent" => Ok(Weight::Silent),
        Some(v) => Ok(Weight::Value(integer(v, "weight")?)),
    }
}

fn weight_json(w: &Weight) -> Value {
    match w {
        Weight::Value(v) => integer_json(v),
        Weight::Silent => json!("silent"),
    }
}

pub fn automaton_from_json(v: &Value) -> Result<WeightedAutomaton> {
    let obj = object(v, "automaton")?;
    let h = Header::parse(&obj)?;
    let f = value_fn_from(&obj, "valueFunction")?;
    let mut a = WeightedAutomaton::new(h.alphabet.clone(), h.states.clone(), h.initial, f);
    a.accepting = h.accepting.clone();
    for (from, letter, to, t) in h.transitions(&obj)? {
        a.add_transition(from, letter, to, weight_from(t.get("weight"))?)?;
    }
    Ok(a)
}

pub fn automaton_to_json(a: &WeightedAutomaton) -> Value {
    let mut m = header_json(&a.alphabet, &a.states, a.initial, &a.accepting);
    value_fn_into(&mut m, &a.value_fn);
    let ts: Vec<Value> = a
        .transitions()
        .map(|(q, l, t, w)| {
            json!({"from": a.states[q], "letter": a.alphabet.letter(l), "to": a.states[t], "weight": weight_json(w)})
        })
        .collect();
    m.insert("transitions".into(), Value::Array(ts));
    Value::Object(m)
}

fn master_from_json(v: &Value, slaves: usize) -> Result<LabeledAutomaton> {
    let obj = object(v, "master")?;
    let h = Header::parse(&obj)?;
    let mut a = LabeledAutomaton::new(h.alphabet.clone(), h.states.clone(), h.initial);
    a.accepting = h.accepting.clone();
    for (from, letter, to, t) in h.transitions(&obj)? {
        let label = integer(field(&t, "label")?, "label")?
            .to_usize()
            .filter(|l| (1..=slaves).contains(l))
            .ok_or_else(|| schema(format!("label must be between 1 and {slaves}")))?;
        a.add_transition(from, letter, to, label - 1)?;
    }
    Ok(a)
}

fn master_to_json(a: &LabeledAutomaton) -> Value {
    let mut m = header_json(&a.alphabet, &a.states, a.initial, &a.accepting);
    let ts: Vec<Value> = a
        .transitions()
        .map(|(q, l, t, lab)| {
            json!({"from": a.states[q], "letter": a.alphabet.letter(l), "to": a.states[t], "label": lab + 1})
        })
        .collect();
    m.insert("transitions".into(), Value::Array(ts));
    Value::Object(m)
}

pub fn nwa_from_json(v: &Value) -> Result<Nwa> {
    let obj = object(v, "nested automaton")?;
    let slaves: Vec<WeightedAutomaton> = array(field(&obj, "slaves")?, "slaves")?
        .iter()
        .map(automaton_from_json)
        .collect::<Result<_>>()?;
    if slaves.is_empty() {
        return Err(schema("need at least one slave"));
    }
    let master = master_from_json(field(&obj, "master")?, slaves.len())?;
    let f = match value_fn_from(&obj, "masterFunction")? {
        ValueFn::Inf(f) => f,
        ValueFn::Fin(g) => return Err(schema(format!("master function must be an infinite-word function, got {}", g.name()))),
    };
    let nwa = Nwa::new(master, f, slaves);
    if let Some(d) = obj.get("dummies") {
        let given: Vec<usize> = array(d, "dummies")?
            .iter()
            .map(|x| integer(x, "dummy").map(|i| i.to_usize().unwrap_or(0)))
            .collect::<Result<_>>()?;
        let actual: Vec<usize> = nwa.dummies().iter().map(|i| i + 1).collect();
        let mut sorted = given.clone();
        sorted.sort_unstable();
        if sorted != actual {
            return Err(schema(format!("`dummies` lists {given:?} but the dummy slaves are {actual:?}")));
        }
    }
    Ok(nwa)
}

pub fn nwa_to_json(n: &Nwa) -> Value {
    let dummies: Vec<usize> = n.dummies().iter().map(|i| i + 1).collect();
    json!({
        "master": master_to_json(&n.master),
        "masterFunction": n.master_fn.name(),
        "slaves": n.slaves.iter().map(automaton_to_json).collect::<Vec<_>>(),
        "dummies": dummies,
    })
}

fn instr_from(v: &Value) -> Result<CounterInstr> {
    match v {
        Value::String(s) if s == "s" => Ok(CounterInstr::start()),
        Value::String(s) if s == "t" => Ok(CounterInstr::terminate()),
        Value::Object(o) => {
            let flag = |k: &str| -> Result<bool> {
                match o.get(k) {
                    None => Ok(false),
                    Some(Value::Bool(b)) => Ok(*b),
                    Some(_) => Err(schema(format!("`{k}` must be a boolean"))),
                }
            };
            let add = match o.get("add") {
                None => BigInt::zero(),
                Some(x) => integer(x, "add")?,
            };
            Ok(CounterInstr { start: flag("start")?, add, terminate: flag("terminate")? })
        }
        other => Ok(CounterInstr { add: integer(other, "instruction")?, ..CounterInstr::noop() }),
    }
}

fn instr_json(i: &CounterInstr) -> Value {
    match (i.start, i.add.is_zero(), i.terminate) {
        (false, _, false) => integer_json(&i.add),
        (true, true, false) => json!("s"),
        (false, true, true) => json!("t"),
        _ => json!({"start": i.start, "add": integer_json(&i.add), "terminate": i.terminate}),
    }
}

pub fn mca_from_json(v: &Value) -> Result<Mca> {
    let obj = object(v, "counter automaton")?;
    let h = Header::parse(&obj)?;
    let counters = integer(field(&obj, "counters")?, "counters")?
        .to_usize()
        .ok_or_else(|| schema("counters must be a non-negative integer"))?;
    let f = match value_fn_from(&obj, "valueFunction")? {
        ValueFn::Inf(f) => f,
        ValueFn::Fin(g) => return Err(schema(format!("counter automata need an infinite-word function, got {}", g.name()))),
    };
    let mut a = Mca::new(h.alphabet.clone(), h.states.clone(), h.initial, f, counters);
    a.accepting = h.accepting.clone();
    for (from, letter, to, t) in h.transitions(&obj)? {
        let instr: Vec<CounterInstr> = array(field(&t, "instructions")?, "instructions")?
            .iter()
            .map(instr_from)
            .collect::<Result<_>>()?;
        a.add_transition(from, letter, to, instr)?;
    }
    Ok(a)
}

pub fn mca_to_json(a: &Mca) -> Value {
    let mut m = header_json(&a.alphabet, &a.states, a.initial, &a.accepting);
    m.insert("valueFunction".into(), json!(a.value_fn.name()));
    m.insert("counters".into(), json!(a.counters));
    let ts: Vec<Value> = a
        .transitions()
        .map(|(q, l, t, instr)| {
            json!({
                "from": a.states[q],
                "letter": a.alphabet.letter(l),
                "to": a.states[t],
                "instructions": instr.iter().map(instr_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    m.insert("transitions".into(), Value::Array(ts));
    Value::Object(m)
}

fn rational_from(v: &Value, what: &str) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s).map_err(|e| schema(format!("{what}: {e}"))),
        Value::Number(_) => Ok(Rational::from_integer(integer(v, what)?)),
        _ => Err(schema(format!("{what} must be a \"p/q\" string"))),
    }
}

pub fn chain_from_json(v: &Value) -> Result<LabeledMarkovChain> {
    let obj = object(v, "chain")?;
    let h = Header::parse(&obj)?;
    let mut c = LabeledMarkovChain::new(h.alphabet.clone(), h.states.clone(), h.initial);
    for e in array(field(&obj, "edges")?, "edges")? {
        let e = object(e, "edge")?;
        let from = h.state(field(&e, "from")?)?;
        let letter = h.letter(field(&e, "letter")?)?;
        let to = h.state(field(&e, "to")?)?;
        let prob = rational_from(field(&e, "prob")?, "prob")?;
        let weight = match e.get("weight") {
            None => EdgeWeight::Value(Rational::zero()),
            Some(Value::String(s)) if s == "silent" => EdgeWeight::Silent,
            Some(w) => EdgeWeight::Value(rational_from(w, "weight")?),
        };
        c.add_weighted_edge(from, letter, to, prob, weight);
    }
    Ok(c)
}

pub fn chain_to_json(c: &LabeledMarkovChain) -> Value {
    let mut m = Map::new();
    m.insert("alphabet".into(), json!(c.alphabet.letters()));
    m.insert("states".into(), json!(c.states));
    m.insert("initial".into(), json!(c.states[c.initial]));
    let edges: Vec<Value> = c
        .edges
        .iter()
        .map(|e| {
            let mut o = Map::new();
            o.insert("from".into(), json!(c.states[e.from]));
            o.insert("letter".into(), json!(c.alphabet.letter(e.letter)));
            o.insert("to".into(), json!(c.states[e.to]));
            o.insert("prob".into(), json!(fmt_rational(&e.prob)));
            match &e.weight {
                EdgeWeight::Silent => {
                    o.insert("weight".into(), json!("silent"));
                }
                EdgeWeight::Value(w) if w.is_zero() => {}
                EdgeWeight::Value(w) if w.is_integer() => {
                    o.insert("weight".into(), integer_json(&w.to_integer()));
                }
                EdgeWeight::Value(w) => {
                    o.insert("weight".into(), json!(fmt_rational(w)));
                }
            }
            Value::Object(o)
        })
        .collect();
    m.insert("edges".into(), Value::Array(edges));
    Value::Object(m)
}

/// Finite automaton over {a, b} for the intersection generator; missing
/// moves reject.
pub fn dfa_from_json(v: &Value) -> Result<Dfa> {
    let obj = object(v, "automaton")?;
    let h = Header::parse(&obj)?;
    if h.alphabet.letters() != ["a", "b"] {
        return Err(schema("finite automata for the intersection generator use the alphabet [\"a\", \"b\"]"));
    }
    let mut delta = vec![[None, None]; h.states.len()];
    for (from, letter, to, _) in h.transitions(&obj)? {
        if delta[from][letter].replace(to).is_some() {
            return Err(Error::NonDeterministic {
                state: h.states[from].clone(),
                letter: h.alphabet.letter(letter).to_string(),
            });
        }
    }
    Ok(Dfa { initial: h.initial, accepting: h.accepting, delta })
}

pub fn parse_dfa(text: &str) -> Result<Dfa> {
    dfa_from_json(&parse_value(text)?)
}

fn method_params(m: &Method) -> Value {
    let opt = |b: &Option<BigInt>| b.as_ref().map_or(Value::Null, |b| json!(b.to_string()));
    match m {
        Method::InfExact { bound } => json!({ "bound": opt(bound) }),
        Method::InfApprox { epsilon, bound, size, min_prob } => json!({
            "epsilon": fmt_rational(epsilon),
            "bound": opt(bound),
            "size": size.to_string(),
            "minProb": fmt_rational(min_prob),
        }),
        Method::SupSumPlusCdf { lambda, bound } => json!({ "lambda": fmt_rational(lambda), "bound": bound.to_string() }),
        _ => json!({}),
    }
}

/// Report with exact values as strings; `lambdas` adds a CDF table.
pub fn report_to_json(r: &AnalysisReport, lambdas: &[Rational]) -> Value {
    let mut o = Map::new();
    o.insert("expected".into(), r.expected.as_ref().map_or(Value::Null, |v| json!(v.to_string())));
    o.insert("exact".into(), json!(r.exact));
    o.insert("method".into(), json!(r.method.tag()));
    o.insert("params".into(), method_params(&r.method));
    let points: Vec<Value> = r
        .distribution
        .points
        .iter()
        .map(|(v, p)| json!({"value": v.to_string(), "prob": fmt_rational(p)}))
        .collect();
    o.insert("distribution".into(), Value::Array(points));
    if !r.distribution.unresolved.is_zero() {
        o.insert("unresolved".into(), json!(fmt_rational(&r.distribution.unresolved)));
    }
    o.insert(
        "almostSureBound".into(),
        r.almost_sure_bound().map_or(Value::Null, |v| json!(v.to_string())),
    );
    if !lambdas.is_empty() {
        let table: Vec<Value> = lambdas
            .iter()
            .map(|l| {
                let v = crate::value::ExtValue::Finite(l.clone());
                json!({"lambda": fmt_rational(l), "cdf": fmt_rational(&r.cdf(&v))})
            })
            .collect();
        o.insert("cdf".into(), Value::Array(table));
    }
    Value::Object(o)
}
