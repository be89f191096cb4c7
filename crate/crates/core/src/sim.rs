//! Seeded Monte Carlo sampling and brute-force oracles.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::automaton::{Alphabet, Weight, WeightedAutomaton, Word};
use crate::error::{Error, Result};
use crate::markov::{LabeledMarkovChain, Product};
use crate::analysis::min_achievable_slave_value;
use crate::mca::{mca_prefix_trace, mca_to_nwa, Mca};
use crate::nwa::{nwa_prefix_trace, nwa_step_trace, Nwa, StepTrace};
use crate::value::{ExtValue, FinAccumulator, FinValFn, InfValFn, Rational};

/// Anything that assigns values to words.
#[derive(Clone, Copy, Debug)]
pub enum Model<'a> {
    Nwa(&'a Nwa),
    Mca(&'a Mca),
    Wa(&'a WeightedAutomaton),
}

impl Model<'_> {
    pub fn alphabet(&self) -> &Alphabet {
        match self {
            Model::Nwa(n) => n.alphabet(),
            Model::Mca(m) => &m.alphabet,
            Model::Wa(w) => &w.alphabet,
        }
    }

    pub fn value_fn(&self) -> Result<InfValFn> {
        match self {
            Model::Nwa(n) => Ok(n.master_fn),
            Model::Mca(m) => Ok(m.value_fn),
            Model::Wa(w) => w.inf_fn().ok_or_else(|| Error::Unsupported("finite-word automaton".into())),
        }
    }
}

fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Chain with cumulative probabilities per state, for fast sampling.
struct Sampler {
    initial: usize,
    out: Vec<Vec<(f64, usize, usize)>>,
}

impl Sampler {
    fn new(m: &LabeledMarkovChain) -> Self {
        let mut out = vec![Vec::new(); m.num_states()];
        for e in &m.edges {
            if e.prob.is_zero() {
                continue;
            }
            out[e.from].push((e.prob.to_f64().unwrap_or(0.0), e.letter, e.to));
        }
        for row in &mut out {
            let mut acc = 0.0;
            for (p, _, _) in row.iter_mut() {
                acc += *p;
                *p = acc;
            }
            if let Some(last) = row.last_mut() {
                last.0 = f64::INFINITY;
            }
        }
        Sampler { initial: m.initial, out }
    }

    #[inline]
    fn next(&self, s: usize, rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
        let row = &self.out[s];
        match row.len() {
            0 => None,
            1 => Some((row[0].1, row[0].2)),
            _ => {
                let u: f64 = rng.gen();
                row.iter().find(|(c, _, _)| u < *c).map(|&(_, a, t)| (a, t))
            }
        }
    }
}

/// Word of the given length drawn from the chain; the stream is selected
/// by `index`, so samples do not depend on the order they are drawn in.
/// The word is shorter if the chain reaches a state without edges.
pub fn sample_word(m: &LabeledMarkovChain, length: usize, seed: u64, index: u64) -> Word {
    let sampler = Sampler::new(m);
    let mut rng = rng_for(seed, index);
    let mut s = sampler.initial;
    let mut w = Vec::with_capacity(length);
    for _ in 0..length {
        let Some((a, t)) = sampler.next(s, &mut rng) else { break };
        w.push(a);
        s = t;
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum IFn {
    Min,
    Max,
    Sum,
    SumPlus,
    BSum(i64),
}

#[derive(Clone, Copy, Debug)]
struct Acc {
    val: i64,
    some: bool,
    saturated: bool,
}

impl Acc {
    const EMPTY: Acc = Acc { val: 0, some: false, saturated: false };

    #[inline]
    fn push(&mut self, g: IFn, w: i64) {
        if self.saturated {
            return;
        }
        let w = if g == IFn::SumPlus { w.abs() } else { w };
        self.val = if !self.some {
            w
        } else {
            match g {
                IFn::Min => self.val.min(w),
                IFn::Max => self.val.max(w),
                _ => self.val.saturating_add(w),
            }
        };
        self.some = true;
        if let IFn::BSum(b) = g {
            if self.val.abs() > b {
                self.val = b * self.val.signum();
                self.saturated = true;
            }
        }
    }
}

fn small(n: &BigInt) -> Result<i64> {
    n.to_i64().ok_or_else(|| Error::Unsupported(format!("weight {n} does not fit the simulator")))
}

/// Finite-word automaton with flat transition tables.
struct CSlave {
    letters: usize,
    initial: usize,
    /// `to` per (state, letter), `usize::MAX` if missing
    to: Vec<usize>,
    weight: Vec<Option<i64>>,
    accepting: Vec<bool>,
    g: IFn,
}

impl CSlave {
    fn new(s: &WeightedAutomaton) -> Result<Self> {
        let letters = s.alphabet.len();
        let n = s.num_states();
        let mut to = vec![usize::MAX; n * letters];
        let mut weight = vec![None; n * letters];
        for (q, a, t, w) in s.transitions() {
            to[q * letters + a] = t;
            weight[q * letters + a] = match w {
                Weight::Value(v) => Some(small(v)?),
                Weight::Silent => None,
            };
        }
        let g = match s.fin_fn() {
            Some(FinValFn::Min) => IFn::Min,
            Some(FinValFn::Max) => IFn::Max,
            Some(FinValFn::Sum) | None => IFn::Sum,
            Some(FinValFn::SumPlus) => IFn::SumPlus,
            Some(FinValFn::BSum(b)) => IFn::BSum(small(b)?),
        };
        Ok(CSlave { letters, initial: s.initial, to, weight, accepting: s.accepting.clone(), g })
    }
}

struct CNwa {
    letters: usize,
    initial: usize,
    /// (to, label) per (state, letter)
    master: Vec<Option<(usize, usize)>>,
    slaves: Vec<CSlave>,
    dummy: Vec<bool>,
}

impl CNwa {
    fn new(nwa: &Nwa) -> Result<Self> {
        let letters = nwa.alphabet().len();
        let mut master = vec![None; nwa.master.num_states() * letters];
        for (q, a, t, l) in nwa.master.transitions() {
            master[q * letters + a] = Some((t, l));
        }
        let slaves = nwa.slaves.iter().map(CSlave::new).collect::<Result<Vec<_>>>()?;
        let dummy = (0..nwa.slaves.len()).map(|i| nwa.is_dummy(i)).collect();
        Ok(CNwa { letters, initial: nwa.master.initial, master, slaves, dummy })
    }
}

struct CWa {
    letters: usize,
    initial: usize,
    delta: Vec<Option<(usize, Option<i64>)>>,
}

impl CWa {
    fn new(wa: &WeightedAutomaton) -> Result<Self> {
        let letters = wa.alphabet.len();
        let mut delta = vec![None; wa.num_states() * letters];
        for (q, a, t, w) in wa.transitions() {
            let w = match w {
                Weight::Value(v) => Some(small(v)?),
                Weight::Silent => None,
            };
            delta[q * letters + a] = Some((t, w));
        }
        Ok(CWa { letters, initial: wa.initial, delta })
    }
}

/// Folds values into the estimate of an infinite-word value function.
#[derive(Clone, Copy, Debug)]
struct Fold {
    f: InfValFn,
    count: u64,
    sum: i128,
    ext: i64,
}

impl Fold {
    fn new(f: InfValFn) -> Self {
        Fold { f, count: 0, sum: 0, ext: 0 }
    }

    #[inline]
    fn add(&mut self, v: i64) {
        self.ext = if self.count == 0 {
            v
        } else {
            match self.f {
                InfValFn::Inf | InfValFn::LimInf => self.ext.min(v),
                InfValFn::Sup | InfValFn::LimSup => self.ext.max(v),
                InfValFn::LimAvg => 0,
            }
        };
        self.count += 1;
        self.sum += i128::from(v);
    }

    fn estimate(&self) -> Option<f64> {
        match (self.count, self.f) {
            (0, _) => None,
            (n, InfValFn::LimAvg) => Some(self.sum as f64 / n as f64),
            _ => Some(self.ext as f64),
        }
    }
}

#[derive(Clone, Copy)]
struct Active {
    launch: usize,
    slave: usize,
    state: usize,
    acc: Acc,
}

/// `None` means the sample was rejected.
fn run_nwa_sample(c: &CNwa, sampler: &Sampler, f: InfValFn, horizon: usize, burn_in: usize, rng: &mut ChaCha8Rng) -> Option<f64> {
    let mut fold = Fold::new(f);
    let mut active: Vec<Active> = Vec::new();
    let (mut q, mut s) = (c.initial, sampler.initial);
    for pos in 0..horizon {
        let (a, s2) = sampler.next(s, rng)?;
        s = s2;
        let (q2, l) = c.master[q * c.letters + a]?;
        q = q2;
        if !c.dummy[l] {
            active.push(Active { launch: pos, slave: l, state: c.slaves[l].initial, acc: Acc::EMPTY });
        }
        let mut rejected = false;
        active.retain_mut(|r| {
            let sl = &c.slaves[r.slave];
            let k = r.state * sl.letters + a;
            let t = sl.to[k];
            if t == usize::MAX {
                rejected = true;
                return false;
            }
            if let Some(w) = sl.weight[k] {
                r.acc.push(sl.g, w);
            }
            r.state = t;
            if sl.accepting[t] {
                if r.acc.some && r.launch >= burn_in {
                    fold.add(r.acc.val);
                }
                false
            } else {
                true
            }
        });
        if rejected {
            return None;
        }
    }
    fold.estimate()
}

fn run_wa_sample(c: &CWa, sampler: &Sampler, f: InfValFn, horizon: usize, burn_in: usize, rng: &mut ChaCha8Rng) -> Option<f64> {
    let mut fold = Fold::new(f);
    let (mut q, mut s) = (c.initial, sampler.initial);
    for pos in 0..horizon {
        let (a, s2) = sampler.next(s, rng)?;
        s = s2;
        let (q2, w) = c.delta[q * c.letters + a]?;
        q = q2;
        if let (Some(w), true) = (w, pos >= burn_in) {
            fold.add(w);
        }
    }
    fold.estimate()
}

#[derive(Clone, Debug)]
pub struct McConfig {
    pub horizon: usize,
    pub samples: usize,
    pub seed: u64,
    /// Defaults to `horizon / 10` for limit functions and 0 otherwise.
    pub burn_in: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample variance of the per-sample estimates.
    pub variance: f64,
    pub std_error: f64,
    pub rejection_rate: f64,
    pub accepted: usize,
    pub samples: usize,
    pub burn_in: usize,
}

/// Estimates the expected value by simulating `samples` prefixes of length
/// `horizon`. Samples where the run gets stuck, a slave rejects, or no
/// value completes count as rejected and do not enter the mean.
pub fn monte_carlo_estimate(model: Model, m: &LabeledMarkovChain, cfg: &McConfig) -> Result<McEstimate> {
    let f = model.value_fn()?;
    let burn_in = cfg.burn_in.unwrap_or(if f.is_limit() { cfg.horizon / 10 } else { 0 });
    if burn_in > cfg.horizon {
        return Err(Error::Unsupported("burn-in exceeds the horizon".into()));
    }
    let sampler = Sampler::new(m);
    let results: Vec<Option<f64>> = match model {
        Model::Wa(wa) => {
            let c = CWa::new(wa)?;
            (0..cfg.samples)
                .into_par_iter()
                .map(|i| run_wa_sample(&c, &sampler, f, cfg.horizon, burn_in, &mut rng_for(cfg.seed, i as u64)))
                .collect()
        }
        Model::Nwa(_) | Model::Mca(_) => {
            let owned;
            let nwa = match model {
                Model::Nwa(n) => n,
                Model::Mca(mca) => {
                    owned = mca_to_nwa(mca)?;
                    &owned
                }
                Model::Wa(_) => unreachable!(),
            };
            let c = CNwa::new(nwa)?;
            (0..cfg.samples)
                .into_par_iter()
                .map(|i| run_nwa_sample(&c, &sampler, f, cfg.horizon, burn_in, &mut rng_for(cfg.seed, i as u64)))
                .collect()
        }
    };
    let kept: Vec<f64> = results.iter().flatten().copied().collect();
    let n = kept.len();
    let mean = if n == 0 { f64::NAN } else { kept.iter().sum::<f64>() / n as f64 };
    let variance = if n < 2 { 0.0 } else { kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 };
    Ok(McEstimate {
        mean,
        variance,
        std_error: if n == 0 { f64::NAN } else { (variance / n as f64).sqrt() },
        rejection_rate: if cfg.samples == 0 { 0.0 } else { (cfg.samples - n) as f64 / cfg.samples as f64 },
        accepted: n,
        samples: cfg.samples,
        burn_in,
    })
}

pub const DEPTH_CAP: usize = 64;

/// Probability masses of a slave's runs over all chain words of bounded
/// length.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrefixExpectation {
    /// Sum of probability times value over runs that completed with a value.
    pub value_sum: Rational,
    pub completed: Rational,
    /// Completed without any weight (dummy slaves).
    pub silent: Rational,
    pub rejected: Rational,
    /// Still running after `depth` letters.
    pub residual: Rational,
}

/// Exhaustive expectation of a slave started at chain state `start`,
/// enumerating every chain path of length at most `depth`.
pub fn exhaustive_prefix_expectation(
    slave: &WeightedAutomaton,
    m: &LabeledMarkovChain,
    start: usize,
    depth: usize,
) -> Result<PrefixExpectation> {
    if depth > DEPTH_CAP {
        return Err(Error::DepthCap { depth, cap: DEPTH_CAP });
    }
    let g = slave.fin_fn().cloned().unwrap_or(FinValFn::Sum);
    let mut out = PrefixExpectation::default();
    if slave.accepting[slave.initial] {
        out.silent = Rational::from_integer(1.into());
        return Ok(out);
    }
    let edges = m.out_edges();
    let mut layer: HashMap<(usize, FinAccumulator, usize), Rational> = HashMap::new();
    layer.insert((slave.initial, FinAccumulator::Empty, start), Rational::from_integer(1.into()));
    for _ in 0..depth {
        let mut next: HashMap<(usize, FinAccumulator, usize), Rational> = HashMap::new();
        for ((q, acc, s), p) in layer {
            if edges[s].is_empty() {
                out.rejected += p;
                continue;
            }
            for &ei in &edges[s] {
                let e = &m.edges[ei];
                let pe = &p * &e.prob;
                let Some((t, w)) = slave.step(q, e.letter) else {
                    out.rejected += pe;
                    continue;
                };
                let mut acc = acc.clone();
                if let Weight::Value(v) = w {
                    acc.push(&g, v);
                }
                if slave.accepting[*t] {
                    match acc.value() {
                        ExtValue::Finite(v) => {
                            out.value_sum += &pe * v;
                            out.completed += pe;
                        }
                        _ => out.silent += pe,
                    }
                } else {
                    *next.entry((*t, acc, e.to)).or_insert_with(Rational::zero) += pe;
                }
            }
        }
        layer = next;
    }
    out.residual = layer.into_values().sum();
    Ok(out)
}

/// Distribution of an Inf or Sup master found by enumerating chain paths;
/// mass is placed once the value can no longer change.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExhaustiveDistribution {
    pub points: Vec<(ExtValue, Rational)>,
    pub rejected: Rational,
    pub residual: Rational,
}

type Config = (usize, usize, Vec<(usize, usize, FinAccumulator)>, Option<BigInt>);

/// Per master-times-chain pair, a lower bound on every value a later
/// launch can produce.
fn future_lower_bounds(nwa: &Nwa, m: &LabeledMarkovChain) -> Result<HashMap<(usize, usize), Option<ExtValue>>> {
    let p: Product<usize> = Product::build(m, nwa.master.initial, |q, a| nwa.master.step(q, a));
    let mut lb: Vec<Option<ExtValue>> = vec![None; p.len()];
    let mut per_state: HashMap<(usize, usize), Option<ExtValue>> = HashMap::new();
    for (i, pair) in p.pairs.iter().enumerate() {
        let Some((_, s)) = pair else { continue };
        for e in &p.out[i] {
            let Some(l) = e.payload else { continue };
            if nwa.is_dummy(l) {
                continue;
            }
            let v = match per_state.get(&(l, *s)) {
                Some(v) => v.clone(),
                None => {
                    let v = match min_achievable_slave_value(&nwa.slaves[l], m, *s) {
                        Ok(v) => Some(v),
                        Err(Error::NoAcceptingPath) => None,
                        Err(e) => return Err(e),
                    };
                    per_state.insert((l, *s), v.clone());
                    v
                }
            };
            lb[i] = lower(lb[i].take(), v);
        }
    }
    loop {
        let mut changed = false;
        for i in 0..p.len() {
            for e in &p.out[i] {
                let merged = lower(lb[i].clone(), lb[e.to].clone());
                if merged != lb[i] {
                    lb[i] = merged;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(p.pairs.iter().zip(lb).filter_map(|(pr, v)| pr.map(|k| (k, v))).collect())
}

fn lower(a: Option<ExtValue>, b: Option<ExtValue>) -> Option<ExtValue> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y < x { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

pub fn exhaustive_nwa_distribution(nwa: &Nwa, m: &LabeledMarkovChain, depth: usize) -> Result<ExhaustiveDistribution> {
    match nwa.master_fn {
        InfValFn::Inf => {}
        InfValFn::Sup => {
            let mut d = exhaustive_nwa_distribution(&nwa.dualize()?, m, depth)?;
            for (v, _) in d.points.iter_mut() {
                *v = v.negate();
            }
            d.points.reverse();
            return Ok(d);
        }
        f => return Err(Error::Unsupported(format!("{} master in the exhaustive oracle", f.name()))),
    }
    if depth > DEPTH_CAP {
        return Err(Error::DepthCap { depth, cap: DEPTH_CAP });
    }
    let bounds = future_lower_bounds(nwa, m)?;
    let edges = m.out_edges();
    let mut out = ExhaustiveDistribution::default();
    let mut points: HashMap<BigInt, Rational> = HashMap::new();
    let mut layer: HashMap<Config, Rational> = HashMap::new();
    layer.insert((nwa.master.initial, m.initial, Vec::new(), None), Rational::from_integer(1.into()));
    for _ in 0..depth {
        let mut next: HashMap<Config, Rational> = HashMap::new();
        for ((q, s, active, low), p) in layer {
            if edges[s].is_empty() {
                out.rejected += p;
                continue;
            }
            'edges: for &ei in &edges[s] {
                let e = &m.edges[ei];
                let pe = &p * &e.prob;
                let Some((q2, l)) = nwa.master.step(q, e.letter) else {
                    out.rejected += pe;
                    continue;
                };
                let mut low = low.clone();
                let mut act = Vec::with_capacity(active.len() + 1);
                let launched = (!nwa.is_dummy(l)).then(|| (l, nwa.slaves[l].initial, FinAccumulator::Empty));
                for (j, st, acc) in active.iter().cloned().chain(launched) {
                    let slave = &nwa.slaves[j];
                    let Some((t, w)) = slave.step(st, e.letter) else {
                        out.rejected += pe;
                        continue 'edges;
                    };
                    let mut acc = acc;
                    if let Weight::Value(v) = w {
                        acc.push(slave.fin_fn().unwrap_or(&FinValFn::Sum), v);
                    }
                    if slave.accepting[*t] {
                        if let FinAccumulator::Running(v) | FinAccumulator::Saturated(v) = &acc {
                            low = Some(low.map_or(v.clone(), |x: BigInt| x.min(v.clone())));
                        }
                    } else {
                        act.push((j, *t, acc));
                    }
                }
                act.sort();
                let settled = act.is_empty()
                    && low.as_ref().map_or(false, |v| match bounds.get(&(q2, e.to)).cloned().flatten() {
                        None => true,
                        Some(b) => b >= ExtValue::from_bigint(v.clone()),
                    });
                if settled {
                    *points.entry(low.expect("settled")).or_insert_with(Rational::zero) += pe;
                } else {
                    *next.entry((q2, e.to, act, low)).or_insert_with(Rational::zero) += pe;
                }
            }
        }
        layer = next;
    }
    out.residual = layer.into_values().sum();
    let mut pts: Vec<(ExtValue, Rational)> = points.into_iter().map(|(v, p)| (ExtValue::from_bigint(v), p)).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    out.points = pts;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    Counterexample(Word),
}

fn wa_step_trace(wa: &WeightedAutomaton, word: &[usize]) -> StepTrace {
    let mut q = wa.initial;
    let mut steps = Vec::with_capacity(word.len());
    for (pos, &a) in word.iter().enumerate() {
        let Some((t, w)) = wa.step(q, a) else {
            return StepTrace { steps, failure: Some(pos) };
        };
        steps.push(w.value().map(|v| ExtValue::from_bigint(v.clone())));
        q = *t;
    }
    StepTrace { steps, failure: None }
}

/// Compares the values two models produce on every word of length at most
/// `max_len`, shortest words first. Without a plain weighted automaton the
/// comparison is per launch position; otherwise it is per step, keeping the
/// least (Inf, LimInf) or greatest value finishing at each step.
pub fn check_equivalence_on_prefixes(a: Model, b: Model, alphabet: &Alphabet, max_len: usize) -> Result<Equivalence> {
    let step_view = matches!(a, Model::Wa(_)) || matches!(b, Model::Wa(_));
    let take_min = [a, b].iter().any(|x| {
        matches!(x, Model::Wa(w) if matches!(w.inf_fn(), Some(InfValFn::Inf | InfValFn::LimInf)))
    });
    let (na, nb) = (as_nwa(a)?, as_nwa(b)?);
    let trace_of = |model: Model, nwa: &Option<Nwa>, w: &[usize]| -> Trace {
        match (model, nwa) {
            (Model::Wa(wa), _) => Trace::Step(wa_step_trace(wa, w)),
            (Model::Nwa(n), _) if step_view => Trace::Step(nwa_step_trace(n, w, take_min)),
            (Model::Mca(_), Some(n)) if step_view => Trace::Step(nwa_step_trace(n, w, take_min)),
            (Model::Nwa(n), _) => Trace::Launch(nwa_prefix_trace(n, w)),
            (Model::Mca(mca), _) => Trace::Launch(mca_prefix_trace(mca, w)),
        }
    };
    let k = alphabet.len();
    for len in 0..=max_len {
        let mut word = vec![0usize; len];
        loop {
            if trace_of(a, &na, &word) != trace_of(b, &nb, &word) {
                return Ok(Equivalence::Counterexample(word));
            }
            // odometer increment, last position fastest
            let mut i = len;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                word[i] += 1;
                if word[i] < k {
                    break;
                }
                word[i] = 0;
            }
            if word.iter().all(|&x| x == 0) {
                break;
            }
        }
    }
    Ok(Equivalence::Equivalent)
}

#[derive(PartialEq, Eq, Debug)]
enum Trace {
    Launch(crate::nwa::PrefixTrace),
    Step(StepTrace),
}

fn as_nwa(m: Model) -> Result<Option<Nwa>> {
    match m {
        Model::Mca(mca) => Ok(Some(mca_to_nwa(mca)?)),
        _ => Ok(None),
    }
}
