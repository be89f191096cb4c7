//! Automata with monitor counters.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_traits::Zero;

use crate::automaton::{Alphabet, LabeledAutomaton, ValueFn, Weight, WeightedAutomaton};
use crate::error::{Error, Result};
use crate::nwa::{dummy_slave, Nwa, PrefixTrace, ValidationReport};
use crate::value::{ExtValue, FinValFn, InfValFn};

/// Instruction for one counter on one transition: optionally start it, add
/// a value, optionally terminate it, in that order. The plain forms are a
/// bare start, a bare add and a bare terminate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CounterInstr {
    pub start: bool,
    pub add: BigInt,
    pub terminate: bool,
}

impl CounterInstr {
    pub fn noop() -> Self {
        CounterInstr { start: false, add: BigInt::zero(), terminate: false }
    }

    pub fn start() -> Self {
        CounterInstr { start: true, ..Self::noop() }
    }

    pub fn terminate() -> Self {
        CounterInstr { terminate: true, ..Self::noop() }
    }

    pub fn add(n: i64) -> Self {
        CounterInstr { add: BigInt::from(n), ..Self::noop() }
    }

    /// Whether this instruction is legal on a counter in the given state.
    fn legal(&self, active: bool) -> bool {
        if self.start {
            !active
        } else {
            active || (self.add.is_zero() && !self.terminate)
        }
    }

    /// Whether the counter is active after this instruction.
    fn after(&self, active: bool) -> bool {
        (active || self.start) && !self.terminate
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mca {
    pub alphabet: Alphabet,
    pub states: Vec<String>,
    pub initial: usize,
    pub accepting: Vec<bool>,
    pub delta: Vec<Vec<Option<(usize, Vec<CounterInstr>)>>>,
    pub value_fn: InfValFn,
    pub counters: usize,
}

impl Mca {
    pub fn new(alphabet: Alphabet, states: Vec<String>, initial: usize, value_fn: InfValFn, counters: usize) -> Self {
        let n = states.len();
        let l = alphabet.len();
        Mca {
            alphabet,
            states,
            initial,
            accepting: vec![false; n],
            delta: vec![vec![None; l]; n],
            value_fn,
            counters,
        }
    }

    pub fn add_transition(&mut self, from: usize, letter: usize, to: usize, instr: Vec<CounterInstr>) -> Result<()> {
        if to >= self.states.len() || from >= self.states.len() {
            return Err(Error::Schema("transition endpoint out of range".into()));
        }
        let slot = &mut self.delta[from][letter];
        if slot.is_some() {
            return Err(Error::NonDeterministic {
                state: self.states[from].clone(),
                letter: self.alphabet.letter(letter).to_string(),
            });
        }
        *slot = Some((to, instr));
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize, &Vec<CounterInstr>)> + '_ {
        self.delta.iter().enumerate().flat_map(|(q, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(a, t)| t.as_ref().map(|(to, i)| (q, a, *to, i)))
        })
    }
}

type Activity = Vec<bool>;

/// Reachable (state, active-counter set) pairs, ignoring illegal moves.
fn activity_reach(mca: &Mca) -> Vec<(usize, Activity)> {
    let mut seen: BTreeSet<(usize, Activity)> = BTreeSet::new();
    let start = (mca.initial, vec![false; mca.counters]);
    seen.insert(start.clone());
    let mut stack = vec![start];
    let mut order = Vec::new();
    while let Some((q, act)) = stack.pop() {
        order.push((q, act.clone()));
        for (to, instr) in mca.delta[q].iter().flatten() {
            if instr.len() != mca.counters || instr.iter().zip(&act).any(|(i, a)| !i.legal(*a)) {
                continue;
            }
            let next: Activity = instr.iter().zip(&act).map(|(i, a)| i.after(*a)).collect();
            if seen.insert((*to, next.clone())) {
                stack.push((*to, next));
            }
        }
    }
    order
}

pub fn validate_mca(mca: &Mca) -> ValidationReport {
    let mut r = ValidationReport::default();
    for (q, a, _, instr) in mca.transitions() {
        let here = format!("{} -{}->", mca.states[q], mca.alphabet.letter(a));
        if instr.len() != mca.counters {
            r.error("arity", format!("{here} has {} instructions for {} counters", instr.len(), mca.counters));
            continue;
        }
        if instr.iter().filter(|i| i.start).count() > 1 {
            r.error("multiple-start", format!("{here} starts more than one counter"));
        }
    }
    let mut flagged = BTreeSet::new();
    for (q, act) in activity_reach(mca) {
        for (a, t) in mca.delta[q].iter().enumerate() {
            let Some((_, instr)) = t else { continue };
            if instr.len() != mca.counters {
                continue;
            }
            for (c, (i, active)) in instr.iter().zip(&act).enumerate() {
                if !i.legal(*active) && flagged.insert((q, a, c)) {
                    let what = if i.start { "starts an active" } else { "updates an inactive" };
                    r.warn(
                        "counter-misuse",
                        format!(
                            "{} -{}-> {what} counter {} on some reachable path",
                            mca.states[q],
                            mca.alphabet.letter(a),
                            c + 1
                        ),
                    );
                }
            }
        }
    }
    r
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Emission {
    pub activation: usize,
    pub value: BigInt,
    pub end: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct McaTrace {
    pub emitted: Vec<Emission>,
    /// Activation positions of counters still running at the end.
    pub pending: BTreeSet<usize>,
}

struct RawMca {
    trace: McaTrace,
    failure: Option<usize>,
    error: Option<Error>,
}

fn run_mca(mca: &Mca, word: &[usize]) -> RawMca {
    let mut counters: Vec<Option<(usize, BigInt)>> = vec![None; mca.counters];
    let mut q = mca.initial;
    let mut trace = McaTrace::default();
    for (pos, &a) in word.iter().enumerate() {
        let Some((to, instr)) = &mca.delta[q][a] else {
            return finish(trace, counters, Some(pos), Error::MasterStuck { position: pos });
        };
        for (c, i) in instr.iter().enumerate() {
            if !i.legal(counters[c].is_some()) {
                return finish(trace, counters, Some(pos), Error::RuntimeInstruction { position: pos, counter: c });
            }
        }
        for (c, i) in instr.iter().enumerate() {
            if i.start {
                counters[c] = Some((pos, BigInt::zero()));
            }
            if let Some((_, v)) = &mut counters[c] {
                *v += &i.add;
            }
            if i.terminate {
                let (activation, value) = counters[c].take().expect("checked legal");
                trace.emitted.push(Emission { activation, value, end: pos });
            }
        }
        q = *to;
    }
    RawMca { trace: with_pending(trace, &counters), failure: None, error: None }
}

fn with_pending(mut trace: McaTrace, counters: &[Option<(usize, BigInt)>]) -> McaTrace {
    trace.pending = counters.iter().flatten().map(|(p, _)| *p).collect();
    trace
}

fn finish(trace: McaTrace, counters: Vec<Option<(usize, BigInt)>>, failure: Option<usize>, e: Error) -> RawMca {
    RawMca { trace: with_pending(trace, &counters), failure, error: Some(e) }
}

/// Steps the counter configurations along `word`, emitting the value of
/// every counter at its termination, keyed by its activation position.
pub fn simulate_mca_prefix(mca: &Mca, word: &[usize]) -> Result<McaTrace> {
    let raw = run_mca(mca, word);
    match raw.error {
        Some(e) => Err(e),
        None => Ok(raw.trace),
    }
}

pub fn mca_prefix_trace(mca: &Mca, word: &[usize]) -> PrefixTrace {
    let raw = run_mca(mca, word);
    let mut t = PrefixTrace { failure: raw.failure, ..Default::default() };
    for e in raw.trace.emitted {
        t.values.insert(e.activation, (ExtValue::from_bigint(e.value), e.end));
    }
    t.pending = raw.trace.pending;
    t.finish()
}

/// Builds an NWA with one slave per (counter, starting state) pair plus a
/// dummy slave. The master tracks which counters are active so that illegal
/// instructions block the run exactly where the counter automaton would.
pub fn mca_to_nwa(mca: &Mca) -> Result<Nwa> {
    let n = mca.counters;
    // slaves: (counter, source state) in sorted order
    let mut starts: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (q, _, _, instr) in mca.transitions() {
        let started: Vec<usize> = (0..instr.len()).filter(|&c| instr[c].start).collect();
        if started.len() > 1 {
            return Err(Error::Unsupported("a transition starts more than one counter".into()));
        }
        if let Some(&c) = started.first() {
            starts.insert((c, q));
        }
    }
    let slave_index: BTreeMap<(usize, usize), usize> =
        starts.iter().enumerate().map(|(i, key)| (*key, i)).collect();
    let dummy = starts.len();
    let mut slaves: Vec<WeightedAutomaton> = starts.iter().map(|&(c, q)| counter_slave(mca, c, q)).collect();
    slaves.push(dummy_slave(&mca.alphabet));

    let mut ids: HashMap<(usize, Activity), usize> = HashMap::new();
    let mut keys: Vec<(usize, Activity)> = vec![(mca.initial, vec![false; n])];
    ids.insert(keys[0].clone(), 0);
    let mut trans = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        let (q, act) = keys[i].clone();
        for (a, t) in mca.delta[q].iter().enumerate() {
            let Some((to, instr)) = t else { continue };
            if instr.len() != n || instr.iter().zip(&act).any(|(ins, ac)| !ins.legal(*ac)) {
                continue;
            }
            let next: Activity = instr.iter().zip(&act).map(|(ins, ac)| ins.after(*ac)).collect();
            let label = match instr.iter().position(|ins| ins.start) {
                Some(c) => slave_index[&(c, q)],
                None => dummy,
            };
            let key = (*to, next);
            let j = *ids.entry(key.clone()).or_insert_with(|| {
                keys.push(key);
                keys.len() - 1
            });
            trans.push((i, a, j, label));
        }
        i += 1;
    }
    let names = keys
        .iter()
        .map(|(q, act)| {
            if n == 0 {
                return mca.states[*q].clone();
            }
            let on: Vec<String> = (0..n).filter(|&c| act[c]).map(|c| (c + 1).to_string()).collect();
            format!("{}{{{}}}", mca.states[*q], on.join(","))
        })
        .collect();
    let mut master = LabeledAutomaton::new(mca.alphabet.clone(), names, 0);
    for (j, (q, _)) in keys.iter().enumerate() {
        master.accepting[j] = mca.accepting[*q];
    }
    for (from, a, to, label) in trans {
        master.add_transition(from, a, to, label)?;
    }
    Ok(Nwa::new(master, mca.value_fn, slaves))
}

/// Slave following counter `c` from a start taken in state `src`.
fn counter_slave(mca: &Mca, c: usize, src: usize) -> WeightedAutomaton {
    // ids: 0 = init, 1 = acc, 2 + q = copy of q
    let mut names = vec!["init".to_string(), "acc".to_string()];
    names.extend(mca.states.iter().cloned());
    let mut s = WeightedAutomaton::new(mca.alphabet.clone(), names, 0, ValueFn::Fin(FinValFn::Sum));
    s.set_accepting(1, true);
    for (a, t) in mca.delta[src].iter().enumerate() {
        let Some((to, instr)) = t else { continue };
        let i = &instr[c];
        if i.start {
            let target = if i.terminate { 1 } else { 2 + to };
            s.add_transition(0, a, target, Weight::Value(i.add.clone())).expect("fresh slot");
        }
    }
    for p in 0..mca.num_states() {
        for (a, t) in mca.delta[p].iter().enumerate() {
            let Some((to, instr)) = t else { continue };
            let i = &instr[c];
            if i.start {
                continue;
            }
            let target = if i.terminate { 1 } else { 2 + to };
            s.add_transition(2 + p, a, target, Weight::Value(i.add.clone())).expect("fresh slot");
        }
    }
    prune(&s)
}

/// Keeps only states reachable from the initial state.
fn prune(s: &WeightedAutomaton) -> WeightedAutomaton {
    let reach = s.reachable();
    let keep: Vec<usize> = (0..s.num_states()).filter(|&q| reach[q]).collect();
    let mut map = vec![usize::MAX; s.num_states()];
    for (i, &q) in keep.iter().enumerate() {
        map[q] = i;
    }
    let names = keep.iter().map(|&q| s.states[q].clone()).collect();
    let mut out = WeightedAutomaton::new(s.alphabet.clone(), names, map[s.initial], s.value_fn.clone());
    for (i, &q) in keep.iter().enumerate() {
        out.accepting[i] = s.accepting[q];
    }
    for (q, a, to, w) in s.transitions() {
        if reach[q] {
            out.add_transition(map[q], a, map[to], w.clone()).expect("fresh slot");
        }
    }
    out
}
