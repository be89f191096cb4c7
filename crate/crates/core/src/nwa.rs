//! Nested weighted automata: a master automaton over infinite words that
//! launches finite-word slave automata, one per position.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_bigint::BigInt;

use crate::automaton::{to_sum_slave, Alphabet, LabeledAutomaton, ValueFn, Weight, WeightedAutomaton, WordMode};
use crate::error::{Error, Result};
use crate::mca::{CounterInstr, Mca};
use crate::value::{ExtValue, FinAccumulator, FinValFn, InfValFn};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nwa {
    pub master: LabeledAutomaton,
    pub master_fn: InfValFn,
    pub slaves: Vec<WeightedAutomaton>,
}

impl Nwa {
    pub fn new(master: LabeledAutomaton, master_fn: InfValFn, slaves: Vec<WeightedAutomaton>) -> Self {
        Nwa { master, master_fn, slaves }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.master.alphabet
    }

    pub fn is_dummy(&self, i: usize) -> bool {
        self.slaves[i].is_dummy()
    }

    pub fn dummies(&self) -> Vec<usize> {
        (0..self.slaves.len()).filter(|&i| self.is_dummy(i)).collect()
    }

    /// The value function shared by the non-dummy slaves.
    pub fn slave_fn(&self) -> Option<FinValFn> {
        let mut fns = self
            .slaves
            .iter()
            .filter(|s| !s.is_dummy())
            .filter_map(|s| s.fin_fn().cloned());
        let first = fns.next()?;
        if fns.all(|g| g == first) {
            Some(first)
        } else {
            None
        }
    }

    /// Unary size: master states plus the sizes of all slaves.
    pub fn size(&self) -> BigInt {
        let mut n = BigInt::from(self.master.num_states());
        for s in &self.slaves {
            n += s.size();
        }
        n
    }

    pub fn dualize(&self) -> Result<Nwa> {
        let master_fn = self
            .master_fn
            .dual()
            .ok_or_else(|| Error::NotDualizable(format!("{} master", self.master_fn.name())))?;
        let slaves = self
            .slaves
            .iter()
            .map(|s| if s.is_dummy() { Ok(s.clone()) } else { s.dualize() })
            .collect::<Result<Vec<_>>>()?;
        Ok(Nwa { master: self.master.clone(), master_fn, slaves })
    }

    /// Same automaton with every non-dummy slave rewritten as a Sum slave.
    pub fn with_sum_slaves(&self) -> Result<Nwa> {
        let slaves = self
            .slaves
            .iter()
            .map(|s| if s.is_dummy() { Ok(s.clone()) } else { to_sum_slave(s) })
            .collect::<Result<Vec<_>>>()?;
        Ok(Nwa { master: self.master.clone(), master_fn: self.master_fn, slaves })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub kind: &'static str,
    pub severity: Severity,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn error(&mut self, kind: &'static str, message: String) {
        self.issues.push(Issue { kind, severity: Severity::Error, message });
    }

    pub fn warn(&mut self, kind: &'static str, message: String) {
        self.issues.push(Issue { kind, severity: Severity::Warning, message });
    }

    pub fn is_valid(&self) -> bool {
        self.issues.iter().all(|i| i.severity == Severity::Warning)
    }

    pub fn has(&self, kind: &str) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }
}

pub fn validate_nwa(nwa: &Nwa) -> ValidationReport {
    let mut r = ValidationReport::default();
    let k = nwa.slaves.len();
    if k == 0 {
        r.error("slaves", "no slave automata".into());
    }
    for (q, a, _, label) in nwa.master.transitions() {
        if label >= k {
            r.error(
                "label-range",
                format!(
                    "master transition {} -{}-> uses slave {} but only {} exist",
                    nwa.master.states[q],
                    nwa.alphabet().letter(a),
                    label + 1,
                    k
                ),
            );
        }
    }
    for (i, s) in nwa.slaves.iter().enumerate() {
        let name = i + 1;
        if s.alphabet != *nwa.alphabet() {
            r.error("alphabet", format!("slave {name} uses a different alphabet"));
        }
        if s.mode() != WordMode::Finite {
            r.error("slave-mode", format!("slave {name} is not a finite-word automaton"));
        }
        if s.transitions().any(|(_, _, _, w)| *w == Weight::Silent) {
            r.error("slave-weight", format!("slave {name} has a silent weight"));
        }
        if s.is_dummy() {
            if s.transitions().next().is_some() {
                r.warn("dummy", format!("slave {name} accepts immediately; its transitions are never used"));
            }
            continue;
        }
        for q in 0..s.num_states() {
            if s.accepting[q] && s.delta[q].iter().any(|t| t.is_some()) && reaches_accepting(s, q) {
                r.warn(
                    "prefix-free",
                    format!(
                        "slave {name}: accepting state `{}` can reach an accepting state; runs halt at the first one",
                        s.states[q]
                    ),
                );
            }
        }
        if !s.reachable().iter().zip(&s.accepting).any(|(r, a)| *r && *a) {
            r.warn("slave-accepting", format!("slave {name} never reaches an accepting state"));
        }
    }
    if nwa.slave_fn().is_none() && nwa.slaves.iter().any(|s| !s.is_dummy()) {
        r.error("slave-function", "non-dummy slaves use different value functions".into());
    }
    r
}

/// Whether some accepting state is reachable from `q` in at least one step.
fn reaches_accepting(s: &WeightedAutomaton, q: usize) -> bool {
    let mut seen = vec![false; s.num_states()];
    let mut stack: Vec<usize> = s.delta[q].iter().flatten().map(|(t, _)| *t).collect();
    while let Some(p) = stack.pop() {
        if s.accepting[p] {
            return true;
        }
        if !seen[p] {
            seen[p] = true;
            stack.extend(s.delta[p].iter().flatten().map(|(t, _)| *t));
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlaveOutcome {
    /// Finished at step `end` (inclusive) with the given value.
    Completed { value: ExtValue, end: usize },
    StillRunning,
    Rejected { position: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NwaTrace {
    pub outcomes: Vec<SlaveOutcome>,
}

#[derive(Clone, Debug)]
pub(crate) struct RawTrace {
    pub outcomes: Vec<SlaveOutcome>,
    pub stuck: Option<usize>,
}

struct Running {
    launch: usize,
    slave: usize,
    state: usize,
    acc: FinAccumulator,
}

pub(crate) fn run_prefix(nwa: &Nwa, word: &[usize]) -> RawTrace {
    let mut outcomes = Vec::with_capacity(word.len());
    let mut active: Vec<Running> = Vec::new();
    let mut q = nwa.master.initial;
    for (pos, &a) in word.iter().enumerate() {
        let Some((q2, label)) = nwa.master.step(q, a) else {
            for r in active {
                outcomes[r.launch] = SlaveOutcome::StillRunning;
            }
            return RawTrace { outcomes, stuck: Some(pos) };
        };
        q = q2;
        let slave = &nwa.slaves[label];
        if slave.is_dummy() {
            outcomes.push(SlaveOutcome::Completed { value: ExtValue::Bottom, end: pos });
        } else {
            outcomes.push(SlaveOutcome::StillRunning);
            active.push(Running { launch: pos, slave: label, state: slave.initial, acc: FinAccumulator::Empty });
        }
        active.retain_mut(|r| {
            let s = &nwa.slaves[r.slave];
            match s.step(r.state, a) {
                None => {
                    outcomes[r.launch] = SlaveOutcome::Rejected { position: pos };
                    false
                }
                Some((to, w)) => {
                    if let Weight::Value(v) = w {
                        r.acc.push(s.fin_fn().unwrap_or(&FinValFn::Sum), v);
                    }
                    r.state = *to;
                    if s.accepting[*to] {
                        outcomes[r.launch] = SlaveOutcome::Completed { value: r.acc.value(), end: pos };
                        false
                    } else {
                        true
                    }
                }
            }
        });
    }
    RawTrace { outcomes, stuck: None }
}

/// Runs the master along `word`, launching a slave at every position.
pub fn simulate_nwa_prefix(nwa: &Nwa, word: &[usize]) -> Result<NwaTrace> {
    let raw = run_prefix(nwa, word);
    match raw.stuck {
        Some(position) => Err(Error::MasterStuck { position }),
        None => Ok(NwaTrace { outcomes: raw.outcomes }),
    }
}

/// Launch-indexed view of a prefix run, cut at the first failure.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrefixTrace {
    /// launch position -> (value, completion step); silent values omitted
    pub values: BTreeMap<usize, (ExtValue, usize)>,
    pub pending: BTreeSet<usize>,
    pub failure: Option<usize>,
}

impl PrefixTrace {
    pub fn finish(mut self) -> Self {
        if let Some(p) = self.failure {
            self.values.retain(|_, (_, end)| *end < p);
            self.pending.clear();
        }
        self
    }
}

pub fn nwa_prefix_trace(nwa: &Nwa, word: &[usize]) -> PrefixTrace {
    let raw = run_prefix(nwa, word);
    let mut t = PrefixTrace { failure: raw.stuck, ..Default::default() };
    for (i, o) in raw.outcomes.iter().enumerate() {
        match o {
            SlaveOutcome::Completed { value, end } => {
                if !value.is_bottom() {
                    t.values.insert(i, (value.clone(), *end));
                }
            }
            SlaveOutcome::StillRunning => {
                t.pending.insert(i);
            }
            SlaveOutcome::Rejected { position } => {
                t.failure = Some(t.failure.map_or(*position, |f| f.min(*position)));
            }
        }
    }
    t.finish()
}

/// Step-indexed view: per step, the minimum (or maximum) of the values of
/// slaves finishing at that step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepTrace {
    pub steps: Vec<Option<ExtValue>>,
    pub failure: Option<usize>,
}

pub fn nwa_step_trace(nwa: &Nwa, word: &[usize], take_min: bool) -> StepTrace {
    let lt = nwa_prefix_trace(nwa, word);
    let len = lt.failure.unwrap_or(word.len());
    let mut steps: Vec<Option<ExtValue>> = vec![None; len];
    for (v, end) in lt.values.values() {
        let slot = &mut steps[*end];
        *slot = Some(match slot.take() {
            None => v.clone(),
            Some(old) => {
                let better = if take_min { v < &old } else { v > &old };
                if better {
                    v.clone()
                } else {
                    old
                }
            }
        });
    }
    StepTrace { steps, failure: lt.failure }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WidthCheck {
    BoundedBy(usize),
    Exceeds { k: usize, witness: Vec<usize> },
}

type Config = (usize, Vec<(usize, usize)>);

/// Decides whether at most `k` slaves ever take part in a single step. A
/// slave takes part if it was running before the step or is launched by it
/// (dummies excluded).
pub fn check_width_bound(nwa: &Nwa, k: usize) -> WidthCheck {
    let start: Config = (nwa.master.initial, Vec::new());
    let mut parent: HashMap<Config, Option<(Config, usize)>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    let path = |parent: &HashMap<Config, Option<(Config, usize)>>, mut c: Config| {
        let mut w = Vec::new();
        while let Some(Some((p, a))) = parent.get(&c) {
            w.push(*a);
            c = p.clone();
        }
        w.reverse();
        w
    };
    while let Some(cfg) = queue.pop_front() {
        let (q, active) = &cfg;
        for a in 0..nwa.alphabet().len() {
            let Some((q2, label)) = nwa.master.step(*q, a) else { continue };
            let Some(launched) = nwa.slaves.get(label) else { continue };
            let launching = !launched.is_dummy();
            if active.len() + usize::from(launching) > k {
                let mut w = path(&parent, cfg.clone());
                w.push(a);
                return WidthCheck::Exceeds { k, witness: w };
            }
            let mut next = Vec::with_capacity(active.len() + 1);
            let mut dead = false;
            let mut moves: Vec<(usize, usize)> = active.clone();
            if launching {
                moves.push((label, launched.initial));
            }
            for (i, s) in moves {
                match nwa.slaves[i].step(s, a) {
                    None => {
                        dead = true;
                        break;
                    }
                    Some((to, _)) => {
                        if !nwa.slaves[i].accepting[*to] {
                            next.push((i, *to));
                        }
                    }
                }
            }
            if dead {
                continue;
            }
            next.sort_unstable();
            let c2 = (q2, next);
            if !parent.contains_key(&c2) {
                parent.insert(c2.clone(), Some((cfg.clone(), a)));
                queue.push_back(c2);
            }
        }
    }
    WidthCheck::BoundedBy(k)
}

/// Translates an NWA whose steps involve at most `k` slaves into an
/// automaton with `k` monitor counters. Slaves are first rewritten as Sum
/// slaves; each running slave occupies one counter.
pub fn nwa_to_mca(nwa: &Nwa, k: usize) -> Result<Mca> {
    let sum = nwa.with_sum_slaves()?;
    type Slots = Vec<Option<(usize, usize)>>;
    let mut ids: HashMap<(usize, Slots), usize> = HashMap::new();
    let mut keys: Vec<(usize, Slots)> = Vec::new();
    let start = (sum.master.initial, vec![None; k]);
    ids.insert(start.clone(), 0);
    keys.push(start);
    let mut trans: Vec<(usize, usize, usize, Vec<CounterInstr>)> = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        let (q, slots) = keys[i].clone();
        'letters: for a in 0..sum.alphabet().len() {
            let Some((q2, label)) = sum.master.step(q, a) else { continue };
            let Some(launched) = sum.slaves.get(label) else { continue };
            let mut instr = vec![CounterInstr::noop(); k];
            let mut next = slots.clone();
            for (c, slot) in slots.iter().enumerate() {
                let Some((si, s)) = slot else { continue };
                let slave = &sum.slaves[*si];
                let Some((to, w)) = slave.step(*s, a) else { continue 'letters };
                instr[c].add = w.value().cloned().unwrap_or_default();
                if slave.accepting[*to] {
                    instr[c].terminate = true;
                    next[c] = None;
                } else {
                    next[c] = Some((*si, *to));
                }
            }
            if !launched.is_dummy() {
                let c = slots.iter().position(|s| s.is_none()).ok_or(Error::WidthExceeded { k })?;
                let Some((to, w)) = launched.step(launched.initial, a) else { continue };
                instr[c].start = true;
                instr[c].add = w.value().cloned().unwrap_or_default();
                if launched.accepting[*to] {
                    instr[c].terminate = true;
                } else {
                    next[c] = Some((label, *to));
                }
            }
            let key = (q2, next);
            let j = *ids.entry(key.clone()).or_insert_with(|| {
                keys.push(key);
                keys.len() - 1
            });
            trans.push((i, a, j, instr));
        }
        i += 1;
    }
    let names: Vec<String> = keys
        .iter()
        .map(|(q, slots)| {
            let inner: Vec<String> = slots
                .iter()
                .map(|s| match s {
                    None => "-".to_string(),
                    Some((si, st)) => format!("{}:{}", si + 1, sum.slaves[*si].states[*st]),
                })
                .collect();
            if k == 0 {
                sum.master.states[*q].clone()
            } else {
                format!("{}|{}", sum.master.states[*q], inner.join(","))
            }
        })
        .collect();
    let mut mca = Mca::new(sum.alphabet().clone(), names, 0, sum.master_fn, k);
    for (j, (q, _)) in keys.iter().enumerate() {
        mca.accepting[j] = sum.master.accepting[*q];
    }
    for (from, a, to, instr) in trans {
        mca.add_transition(from, a, to, instr)?;
    }
    Ok(mca)
}

/// Convenience constructor for slaves used throughout tests and builders.
pub fn one_step_slave(alphabet: &Alphabet, weights: &[i64], g: FinValFn) -> WeightedAutomaton {
    let mut s = WeightedAutomaton::new(alphabet.clone(), vec!["init".into(), "acc".into()], 0, ValueFn::Fin(g));
    for (a, w) in weights.iter().enumerate() {
        s.add_transition(0, a, 1, Weight::int(*w)).expect("fresh automaton");
    }
    s.set_accepting(1, true);
    s
}

pub fn dummy_slave(alphabet: &Alphabet) -> WeightedAutomaton {
    let mut s = WeightedAutomaton::new(alphabet.clone(), vec!["d".into()], 0, ValueFn::Fin(FinValFn::Sum));
    s.set_accepting(0, true);
    s
}
