//! Deterministic weighted and labeled automata.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::value::{apply_finval, ExtValue, FinValFn, InfValFn};

pub type Word = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    letters: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(letters: impl IntoIterator<Item = S>) -> Result<Self> {
        let letters: Vec<String> = letters.into_iter().map(Into::into).collect();
        if letters.is_empty() {
            return Err(Error::Schema("alphabet is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for l in &letters {
            if l.is_empty() {
                return Err(Error::Schema("empty letter".into()));
            }
            if !seen.insert(l.as_str()) {
                return Err(Error::Schema(format!("duplicate letter `{l}`")));
            }
        }
        Ok(Alphabet { letters })
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[String] {
        &self.letters
    }

    pub fn letter(&self, i: usize) -> &str {
        &self.letters[i]
    }

    pub fn index(&self, letter: &str) -> Option<usize> {
        self.letters.iter().position(|l| l == letter)
    }

    /// Parses a word. Over single-character alphabets every character is a
    /// letter (whitespace ignored); otherwise letters are whitespace separated.
    pub fn parse_word(&self, s: &str) -> Result<Word> {
        let single = self.letters.iter().all(|l| l.chars().count() == 1);
        let tokens: Vec<String> = if single {
            s.chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| c.to_string())
                .collect()
        } else {
            s.split_whitespace().map(str::to_string).collect()
        };
        tokens
            .iter()
            .map(|t| {
                self.index(t)
                    .ok_or_else(|| Error::Schema(format!("letter `{t}` not in alphabet")))
            })
            .collect()
    }

    pub fn render_word(&self, w: &[usize]) -> String {
        let single = self.letters.iter().all(|l| l.chars().count() == 1);
        let parts: Vec<&str> = w.iter().map(|&i| self.letter(i)).collect();
        if single {
            parts.concat()
        } else {
            parts.join(" ")
        }
    }
}

/// Transition weight. `Silent` only appears in infinite-word automata.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Weight {
    Value(BigInt),
    Silent,
}

impl Weight {
    pub fn int(n: i64) -> Self {
        Weight::Value(BigInt::from(n))
    }

    pub fn value(&self) -> Option<&BigInt> {
        match self {
            Weight::Value(v) => Some(v),
            Weight::Silent => None,
        }
    }

    pub fn negate(&self) -> Self {
        match self {
            Weight::Value(v) => Weight::Value(-v),
            Weight::Silent => Weight::Silent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ValueFn {
    Fin(FinValFn),
    Inf(InfValFn),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WordMode {
    Finite,
    Infinite,
}

impl ValueFn {
    pub fn mode(&self) -> WordMode {
        match self {
            ValueFn::Fin(_) => WordMode::Finite,
            ValueFn::Inf(_) => WordMode::Infinite,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ValueFn::Fin(g) => g.name(),
            ValueFn::Inf(f) => f.name(),
        }
    }
}

/// Deterministic weighted automaton with a partial transition map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedAutomaton {
    pub alphabet: Alphabet,
    pub states: Vec<String>,
    pub initial: usize,
    pub accepting: Vec<bool>,
    /// `delta[state][letter]`
    pub delta: Vec<Vec<Option<(usize, Weight)>>>,
    pub value_fn: ValueFn,
}

impl WeightedAutomaton {
    pub fn new(alphabet: Alphabet, states: Vec<String>, initial: usize, value_fn: ValueFn) -> Self {
        let n = states.len();
        let l = alphabet.len();
        WeightedAutomaton {
            alphabet,
            states,
            initial,
            accepting: vec![false; n],
            delta: vec![vec![None; l]; n],
            value_fn,
        }
    }

    /// Builds an automaton with states named by index.
    pub fn with_size(alphabet: Alphabet, n: usize, value_fn: ValueFn) -> Self {
        let states = (0..n).map(|i| format!("q{i}")).collect();
        Self::new(alphabet, states, 0, value_fn)
    }

    pub fn add_transition(&mut self, from: usize, letter: usize, to: usize, weight: Weight) -> Result<()> {
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
        *slot = Some((to, weight));
        Ok(())
    }

    pub fn set_accepting(&mut self, q: usize, acc: bool) {
        self.accepting[q] = acc;
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn mode(&self) -> WordMode {
        self.value_fn.mode()
    }

    pub fn fin_fn(&self) -> Option<&FinValFn> {
        match &self.value_fn {
            ValueFn::Fin(g) => Some(g),
            ValueFn::Inf(_) => None,
        }
    }

    pub fn inf_fn(&self) -> Option<InfValFn> {
        match &self.value_fn {
            ValueFn::Inf(f) => Some(*f),
            ValueFn::Fin(_) => None,
        }
    }

    pub fn step(&self, q: usize, a: usize) -> Option<&(usize, Weight)> {
        self.delta[q][a].as_ref()
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize, &Weight)> + '_ {
        self.delta.iter().enumerate().flat_map(|(q, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(a, t)| t.as_ref().map(|(to, w)| (q, a, *to, w)))
        })
    }

    /// Slaves whose initial state accepts finish before reading anything.
    pub fn is_dummy(&self) -> bool {
        self.accepting[self.initial]
    }

    /// Unary size: number of states plus the sum of absolute weights.
    pub fn size(&self) -> BigInt {
        let mut n = BigInt::from(self.states.len());
        for (_, _, _, w) in self.transitions() {
            if let Weight::Value(v) = w {
                n += v.abs();
            }
        }
        n
    }

    pub fn max_abs_weight(&self) -> BigInt {
        self.transitions()
            .filter_map(|(_, _, _, w)| w.value().map(|v| v.abs()))
            .max()
            .unwrap_or_else(BigInt::zero)
    }

    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        while let Some(q) = stack.pop() {
            for (to, _) in self.delta[q].iter().flatten() {
                if !seen[*to] {
                    seen[*to] = true;
                    stack.push(*to);
                }
            }
        }
        seen
    }

    /// Negates every weight and swaps the value function for its dual.
    pub fn dualize(&self) -> Result<WeightedAutomaton> {
        let value_fn = match &self.value_fn {
            ValueFn::Fin(g) => ValueFn::Fin(
                g.dual()
                    .ok_or_else(|| Error::NotDualizable(format!("{} slave", g.name())))?,
            ),
            ValueFn::Inf(f) => ValueFn::Inf(
                f.dual()
                    .ok_or_else(|| Error::NotDualizable(format!("{} automaton", f.name())))?,
            ),
        };
        let mut out = self.clone();
        out.value_fn = value_fn;
        for row in &mut out.delta {
            for (_, w) in row.iter_mut().flatten() {
                *w = w.negate();
            }
        }
        Ok(out)
    }
}

/// Value of the unique run over a finite word. Rejection (no run, or a run
/// ending outside the accepting set) gives `PlusInfinity`.
pub fn run_weighted_finite(wa: &WeightedAutomaton, word: &[usize]) -> ExtValue {
    let g = match &wa.value_fn {
        ValueFn::Fin(g) => g,
        ValueFn::Inf(_) => return ExtValue::PlusInfinity,
    };
    let mut q = wa.initial;
    let mut weights = Vec::with_capacity(word.len());
    for &a in word {
        match wa.step(q, a) {
            Some((to, w)) => {
                if let Weight::Value(v) = w {
                    weights.push(v.clone());
                }
                q = *to;
            }
            None => return ExtValue::PlusInfinity,
        }
    }
    if wa.accepting[q] {
        apply_finval(g, &weights)
    } else {
        ExtValue::PlusInfinity
    }
}

fn copy_with_fn(slave: &WeightedAutomaton, value_fn: ValueFn) -> WeightedAutomaton {
    let mut out = slave.clone();
    out.value_fn = value_fn;
    out
}

/// Incrementally numbers product states discovered by a worklist search.
struct Interner<K> {
    ids: HashMap<K, usize>,
    keys: Vec<K>,
}

impl<K: Clone + Eq + std::hash::Hash> Interner<K> {
    fn new() -> Self {
        Interner { ids: HashMap::new(), keys: Vec::new() }
    }

    /// Returns the id and whether the key is new.
    fn intern(&mut self, k: K) -> (usize, bool) {
        if let Some(&i) = self.ids.get(&k) {
            return (i, false);
        }
        let i = self.keys.len();
        self.ids.insert(k.clone(), i);
        self.keys.push(k);
        (i, true)
    }
}

/// Rewrites a Min or Max slave as a bounded-sum slave that remembers the
/// running extremum in its state and only pays it on the final transition.
pub fn normalize_slave(slave: &WeightedAutomaton) -> Result<WeightedAutomaton> {
    let is_min = match slave.fin_fn() {
        Some(FinValFn::Min) => true,
        Some(FinValFn::Max) => false,
        _ => return Err(Error::Unsupported("normalize_slave expects a Min or Max slave".into())),
    };
    let bound = slave.max_abs_weight().max(BigInt::from(1));
    // key: (state, extremum so far); accepting targets drop the extremum
    let mut ids: Interner<(usize, Option<BigInt>)> = Interner::new();
    ids.intern((slave.initial, None));
    let mut trans = Vec::new();
    let mut i = 0;
    while i < ids.keys.len() {
        let (q, ext) = ids.keys[i].clone();
        if !slave.accepting[q] {
            for a in 0..slave.alphabet.len() {
                let Some((to, w)) = slave.step(q, a) else { continue };
                let w = w.value().cloned().unwrap_or_default();
                let e = match &ext {
                    None => w,
                    Some(e) if is_min => e.clone().min(w),
                    Some(e) => e.clone().max(w),
                };
                if slave.accepting[*to] {
                    let (j, _) = ids.intern((*to, None));
                    trans.push((i, a, j, e));
                } else {
                    let (j, _) = ids.intern((*to, Some(e)));
                    trans.push((i, a, j, BigInt::zero()));
                }
            }
        }
        i += 1;
    }
    let names = ids
        .keys
        .iter()
        .map(|(q, e)| match e {
            None => slave.states[*q].clone(),
            Some(e) => format!("{}[{}]", slave.states[*q], e),
        })
        .collect();
    let mut out = WeightedAutomaton::new(slave.alphabet.clone(), names, 0, ValueFn::Fin(FinValFn::BSum(bound)));
    for (j, (q, _)) in ids.keys.iter().enumerate() {
        out.accepting[j] = slave.accepting[*q];
    }
    for (from, a, to, w) in trans {
        out.add_transition(from, a, to, Weight::Value(w))?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Clip {
    InRange(BigInt),
    Saturated(bool),
}

/// Rewrites any finite-word slave as a Sum slave with the same value on
/// every word (halting at the first accepting state).
pub fn to_sum_slave(slave: &WeightedAutomaton) -> Result<WeightedAutomaton> {
    let g = slave
        .fin_fn()
        .ok_or_else(|| Error::Unsupported("expected a finite-word slave".into()))?;
    match g {
        FinValFn::Sum => Ok(slave.clone()),
        FinValFn::SumPlus => {
            let mut out = copy_with_fn(slave, ValueFn::Fin(FinValFn::Sum));
            for row in &mut out.delta {
                for (_, w) in row.iter_mut().flatten() {
                    if let Weight::Value(v) = w {
                        *v = v.abs();
                    }
                }
            }
            Ok(out)
        }
        FinValFn::Min | FinValFn::Max => to_sum_slave(&normalize_slave(slave)?),
        FinValFn::BSum(bound) => bsum_to_sum(slave, bound),
    }
}

fn bsum_to_sum(slave: &WeightedAutomaton, bound: &BigInt) -> Result<WeightedAutomaton> {
    let mut ids: Interner<(usize, Clip)> = Interner::new();
    ids.intern((slave.initial, Clip::InRange(BigInt::zero())));
    let mut trans = Vec::new();
    let mut i = 0;
    while i < ids.keys.len() {
        let (q, clip) = ids.keys[i].clone();
        if !slave.accepting[q] {
            for a in 0..slave.alphabet.len() {
                let Some((to, w)) = slave.step(q, a) else { continue };
                let w = w.value().cloned().unwrap_or_default();
                let (next, pay) = match &clip {
                    Clip::Saturated(pos) => (Clip::Saturated(*pos), BigInt::zero()),
                    Clip::InRange(v) => {
                        let s = v + &w;
                        if s.abs() > *bound {
                            let pos = s.is_positive();
                            let target = if pos { bound.clone() } else { -bound.clone() };
                            (Clip::Saturated(pos), target - v)
                        } else {
                            (Clip::InRange(s), w)
                        }
                    }
                };
                let (j, _) = ids.intern((*to, next));
                trans.push((i, a, j, pay));
            }
        }
        i += 1;
    }
    let names = ids
        .keys
        .iter()
        .map(|(q, c)| match c {
            Clip::InRange(v) => format!("{}[{}]", slave.states[*q], v),
            Clip::Saturated(true) => format!("{}[+B]", slave.states[*q]),
            Clip::Saturated(false) => format!("{}[-B]", slave.states[*q]),
        })
        .collect();
    let mut out = WeightedAutomaton::new(slave.alphabet.clone(), names, 0, ValueFn::Fin(FinValFn::Sum));
    for (j, (q, _)) in ids.keys.iter().enumerate() {
        out.accepting[j] = slave.accepting[*q];
    }
    for (from, a, to, w) in trans {
        out.add_transition(from, a, to, Weight::Value(w))?;
    }
    Ok(out)
}

/// Labeled automaton used as the master of a nested automaton; each
/// transition carries a slave index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledAutomaton {
    pub alphabet: Alphabet,
    pub states: Vec<String>,
    pub initial: usize,
    pub accepting: Vec<bool>,
    pub delta: Vec<Vec<Option<(usize, usize)>>>,
}

impl LabeledAutomaton {
    pub fn new(alphabet: Alphabet, states: Vec<String>, initial: usize) -> Self {
        let n = states.len();
        let l = alphabet.len();
        LabeledAutomaton {
            alphabet,
            states,
            initial,
            accepting: vec![false; n],
            delta: vec![vec![None; l]; n],
        }
    }

    pub fn add_transition(&mut self, from: usize, letter: usize, to: usize, label: usize) -> Result<()> {
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
        *slot = Some((to, label));
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn step(&self, q: usize, a: usize) -> Option<(usize, usize)> {
        self.delta[q][a]
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        self.delta.iter().enumerate().flat_map(|(q, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(a, t)| t.map(|(to, l)| (q, a, to, l)))
        })
    }
}
