//! Inf and Sup masters: translation of bounded-sum nested automata into
//! deterministic Inf/Sup automata, and the exact and approximate analyses
//! built on it.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::nested::{has_reachable_negative_cycle, liminf_scc_values, min_prefix, min_rest, require_almost_sure};
use super::report::{AnalysisReport, Distribution, Method};
use super::wa::analyze_deterministic_wa;
use crate::automaton::{ValueFn, Weight, WeightedAutomaton};
use crate::error::{Error, Result};
use crate::markov::LabeledMarkovChain;
use crate::nwa::Nwa;
use crate::value::{ExtValue, FinAccumulator, FinValFn, InfValFn, Rational};

#[derive(Clone, Debug)]
pub struct InfWaOptions {
    /// Inf masters only: drop slave copies whose value is provably above
    /// this bound. Sound for analysis when the Inf value is almost surely
    /// at most the bound; the result is then not value-equal on all words.
    pub prune_above: Option<Rational>,
    pub budget: usize,
}

impl Default for InfWaOptions {
    fn default() -> Self {
        InfWaOptions { prune_above: None, budget: 200_000 }
    }
}

type Entry = (usize, usize, FinAccumulator);

struct SlaveInfo {
    g: FinValFn,
    rest: Vec<Option<ExtValue>>,
    prefix: Vec<Option<ExtValue>>,
}

/// Order of accumulators by the final value they can lead to: a copy with a
/// smaller key never finishes with a larger value than a copy with a larger
/// key sitting in the same slave state.
fn rank(acc: &FinAccumulator) -> (bool, BigInt, u8) {
    match acc {
        FinAccumulator::Empty => (false, BigInt::zero(), 0),
        FinAccumulator::Saturated(v) if v.is_negative() => (true, v.clone(), 0),
        FinAccumulator::Running(v) => (true, v.clone(), 1),
        FinAccumulator::Saturated(v) => (true, v.clone(), 2),
    }
}

fn provably_above(info: &SlaveInfo, s: usize, acc: &FinAccumulator, u: &Rational) -> bool {
    let Some(rest) = &info.rest[s] else { return true };
    let FinValFn::BSum(b) = &info.g else { return false };
    let above = |x: &BigInt| Rational::from_integer(x.clone()) > *u;
    let v = match acc {
        FinAccumulator::Saturated(v) => return v.is_positive() && above(b),
        FinAccumulator::Running(v) => v.clone(),
        FinAccumulator::Empty => BigInt::zero(),
    };
    let low_safe = match &info.prefix[s] {
        Some(ExtValue::Finite(p)) => Rational::from_integer(v.clone()) + p >= Rational::from_integer(-b.clone()),
        _ => false,
    };
    match rest {
        ExtValue::Finite(r) if low_safe => {
            let lo = Rational::from_integer(v) + r;
            above(b) && lo > *u
        }
        _ => false,
    }
}

pub fn bsum_nwa_to_inf_wa(nwa: &Nwa) -> Result<WeightedAutomaton> {
    bsum_nwa_to_inf_wa_with(nwa, &InfWaOptions::default())
}

/// Deterministic Inf (or Sup) automaton whose states record the master
/// state and, per slave and slave state, the best accumulated value of
/// the running copies there.
pub fn bsum_nwa_to_inf_wa_with(nwa: &Nwa, opts: &InfWaOptions) -> Result<WeightedAutomaton> {
    let take_min = match nwa.master_fn {
        InfValFn::Inf => true,
        InfValFn::Sup => false,
        f => return Err(Error::Unsupported(format!("{} master in the Inf translation", f.name()))),
    };
    let prune = if take_min { opts.prune_above.clone() } else { None };
    let mut infos = Vec::with_capacity(nwa.slaves.len());
    for s in &nwa.slaves {
        let g = s.fin_fn().cloned().ok_or_else(|| Error::Unsupported("expected finite-word slaves".into()))?;
        if !s.is_dummy() && !matches!(g, FinValFn::Min | FinValFn::Max | FinValFn::BSum(_)) {
            return Err(Error::Unsupported(format!("{} slave in the Inf translation", g.name())));
        }
        let (rest, prefix) = if prune.is_some() { (min_rest(s), min_prefix(s)) } else { (Vec::new(), Vec::new()) };
        infos.push(SlaveInfo { g, rest, prefix });
    }
    let master = &nwa.master;
    let mut ids: HashMap<(usize, Vec<Entry>), usize> = HashMap::new();
    let mut keys: Vec<(usize, Vec<Entry>)> = vec![(master.initial, Vec::new())];
    ids.insert(keys[0].clone(), 0);
    let mut trans = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        let (q, entries) = keys[i].clone();
        'letters: for a in 0..nwa.alphabet().len() {
            let Some((q2, l)) = master.step(q, a) else { continue };
            let mut done: Vec<BigInt> = Vec::new();
            let mut next: Vec<Entry> = Vec::with_capacity(entries.len() + 1);
            let launched = (!nwa.is_dummy(l)).then(|| (l, nwa.slaves[l].initial, FinAccumulator::Empty));
            for (j, s, acc) in entries.iter().cloned().chain(launched) {
                let slave = &nwa.slaves[j];
                let Some((t, w)) = slave.step(s, a) else { continue 'letters };
                let mut acc = acc;
                if let Weight::Value(v) = w {
                    acc.push(&infos[j].g, v);
                }
                if slave.accepting[*t] {
                    if let FinAccumulator::Running(v) | FinAccumulator::Saturated(v) = &acc {
                        done.push(v.clone());
                    }
                } else {
                    next.push((j, *t, acc));
                }
            }
            next.sort_by(|x, y| (x.0, x.1, rank(&x.2)).cmp(&(y.0, y.1, rank(&y.2))));
            if !take_min {
                next.reverse();
            }
            next.dedup_by(|later, kept| later.0 == kept.0 && later.1 == kept.1 && rank(&later.2).0 == rank(&kept.2).0);
            if let Some(u) = &prune {
                next.retain(|(j, s, acc)| !provably_above(&infos[*j], *s, acc, u));
            }
            next.sort();
            let weight = if take_min { done.into_iter().min() } else { done.into_iter().max() };
            let key = (q2, next);
            let to = match ids.get(&key) {
                Some(&id) => id,
                None => {
                    if keys.len() >= opts.budget {
                        return Err(Error::StateBudgetExceeded(opts.budget));
                    }
                    ids.insert(key.clone(), keys.len());
                    keys.push(key);
                    keys.len() - 1
                }
            };
            trans.push((i, a, to, weight.map_or(Weight::Silent, Weight::Value)));
        }
        i += 1;
    }
    let names = keys
        .iter()
        .map(|(q, es)| {
            let inner: Vec<String> = es
                .iter()
                .map(|(j, s, acc)| {
                    let v = match acc {
                        FinAccumulator::Empty => "_".to_string(),
                        FinAccumulator::Running(v) => v.to_string(),
                        FinAccumulator::Saturated(v) if v.is_positive() => "+B".to_string(),
                        FinAccumulator::Saturated(_) => "-B".to_string(),
                    };
                    format!("{}:{}={}", j + 1, nwa.slaves[*j].states[*s], v)
                })
                .collect();
            format!("{}{{{}}}", master.states[*q], inner.join(","))
        })
        .collect();
    let mut wa = WeightedAutomaton::new(nwa.alphabet().clone(), names, 0, ValueFn::Inf(nwa.master_fn));
    for (j, (q, _)) in keys.iter().enumerate() {
        wa.accepting[j] = master.accepting[*q];
    }
    for (from, a, to, w) in trans {
        wa.add_transition(from, a, to, w)?;
    }
    Ok(wa)
}

/// Largest per-component LimInf value of the Inf master read as a LimInf
/// master; the Inf value is almost surely at most this.
fn liminf_upper(sum: &Nwa, m: &LabeledMarkovChain) -> Result<Vec<(ExtValue, Rational)>> {
    let mut lim = sum.clone();
    lim.master_fn = InfValFn::LimInf;
    liminf_scc_values(&lim, m)
}

fn max_finite(points: &[(ExtValue, Rational)]) -> Option<Rational> {
    points.iter().filter_map(|(v, _)| v.as_finite().cloned()).max()
}

fn with_slave(slave: &WeightedAutomaton, g: FinValFn) -> WeightedAutomaton {
    let mut s = slave.clone();
    s.value_fn = ValueFn::Fin(g);
    s
}

fn abs_weights(slave: &WeightedAutomaton) -> WeightedAutomaton {
    let mut s = slave.clone();
    for row in &mut s.delta {
        for (_, w) in row.iter_mut().flatten() {
            if let Weight::Value(v) = w {
                *v = v.abs();
            }
        }
    }
    s
}

fn clipped_report(clipped: &Nwa, m: &LabeledMarkovChain, u: Option<Rational>) -> Result<AnalysisReport> {
    let opts = InfWaOptions { prune_above: u, ..InfWaOptions::default() };
    let wa = bsum_nwa_to_inf_wa_with(clipped, &opts)?;
    analyze_deterministic_wa(&wa, m)
}

/// Exact expected value and distribution for Inf and Sup masters.
pub fn analyze_inf_exact(nwa: &Nwa, m: &LabeledMarkovChain) -> Result<AnalysisReport> {
    match nwa.master_fn {
        InfValFn::Inf => {}
        InfValFn::Sup => {
            if nwa.slaves.iter().any(|s| !s.is_dummy() && s.fin_fn() == Some(&FinValFn::SumPlus)) {
                return Err(Error::OpenProblem("expected value of Sup masters over SumPlus slaves".into()));
            }
            return Ok(analyze_inf_exact(&nwa.dualize()?, m)?.negate());
        }
        f => return Err(Error::Unsupported(format!("{} master in the Inf analysis", f.name()))),
    }
    require_almost_sure(nwa, m)?;
    let mut slaves = Vec::with_capacity(nwa.slaves.len());
    let mut needs_clip = false;
    for s in &nwa.slaves {
        slaves.push(match s.fin_fn() {
            _ if s.is_dummy() => s.clone(),
            Some(FinValFn::SumPlus) => {
                needs_clip = true;
                with_slave(&abs_weights(s), FinValFn::Sum)
            }
            Some(FinValFn::Sum) => {
                if has_reachable_negative_cycle(s)? {
                    return Err(Error::SumUnboundedBelow);
                }
                needs_clip = true;
                s.clone()
            }
            _ => s.clone(),
        });
    }
    let base = Nwa::new(nwa.master.clone(), InfValFn::Inf, slaves);
    let u = max_finite(&liminf_upper(&base.with_sum_slaves()?, m)?);
    let bound = if needs_clip {
        let size = nwa.size();
        let mut b: BigInt = BigInt::from(2) * &size + 1;
        if let Some(u) = &u {
            b = b.max(u.ceil().to_integer() + &size + 1);
        }
        Some(b)
    } else {
        None
    };
    let mut clipped = base;
    if let Some(b) = &bound {
        for s in clipped.slaves.iter_mut() {
            if matches!(s.fin_fn(), Some(FinValFn::Sum)) && !s.is_dummy() {
                s.value_fn = ValueFn::Fin(FinValFn::BSum(b.clone()));
            }
        }
    }
    let mut report = clipped_report(&clipped, m, u)?;
    report.method = Method::InfExact { bound };
    Ok(report)
}

/// Distribution of a Sup master over SumPlus slaves, exact at `lambda`:
/// slave values are clipped just above `lambda`, so `cdf(lambda)` is
/// exact while the expected value is left out.
pub fn sup_sumplus_distribution(nwa: &Nwa, m: &LabeledMarkovChain, lambda: &Rational) -> Result<AnalysisReport> {
    if nwa.master_fn != InfValFn::Sup {
        return Err(Error::Unsupported("expected a Sup master".into()));
    }
    let b: BigInt = (lambda.floor().to_integer() + BigInt::one()).max(BigInt::one());
    let slaves = nwa
        .slaves
        .iter()
        .map(|s| if s.is_dummy() { s.clone() } else { with_slave(&abs_weights(s), FinValFn::BSum(b.clone())) })
        .collect();
    let clipped = Nwa::new(nwa.master.clone(), InfValFn::Sup, slaves);
    let dual = clipped.dualize()?;
    require_almost_sure(&dual, m)?;
    let mut report = clipped_report(&dual, m, None)?.negate();
    report.expected = None;
    report.method = Method::SupSumPlusCdf { lambda: lambda.clone(), bound: b };
    Ok(report)
}

fn log2_big(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 60 {
        n.to_f64().unwrap_or(f64::MAX).log2()
    } else {
        let shift = bits - 60;
        (n >> shift).to_f64().unwrap_or(f64::MAX).log2() + shift as f64
    }
}

/// Clipping bound for the approximation: `ceil(n/p^n * L)` with
/// `L = ceil(|log2(n^2 eps / p^n)|) + 1`, and never below `2n + 1`.
pub fn approx_bound(size: &BigInt, min_prob: &Rational, epsilon: &Rational) -> Result<BigInt> {
    let n = size
        .to_u32()
        .ok_or_else(|| Error::Unsupported("automaton too large for the approximation bound".into()))?;
    let pn = min_prob.pow(n as i32);
    let nr = Rational::from_integer(size.clone());
    let x = &nr * &nr * epsilon / &pn;
    let l = (log2_big(x.numer()) - log2_big(x.denom())).abs().ceil() as u64 + 1;
    let b = (nr / pn * Rational::from_integer(BigInt::from(l))).ceil().to_integer();
    Ok(b.max(BigInt::from(2) * size + 1))
}

/// Inf or Sup master over Sum slaves: clips the slaves far enough that
/// the expected value moves by at most `epsilon`.
pub fn approx_inf_sum(nwa: &Nwa, m: &LabeledMarkovChain, epsilon: &Rational) -> Result<AnalysisReport> {
    match nwa.master_fn {
        InfValFn::Inf => {}
        InfValFn::Sup => return Ok(approx_inf_sum(&nwa.with_sum_slaves()?.dualize()?, m, epsilon)?.negate()),
        f => return Err(Error::Unsupported(format!("{} master in the Inf approximation", f.name()))),
    }
    if !epsilon.is_positive() {
        return Err(Error::Unsupported("epsilon must be positive".into()));
    }
    require_almost_sure(nwa, m)?;
    let size = nwa.size();
    let min_prob = m.min_positive_prob().unwrap_or_else(Rational::one);
    let sum = nwa.with_sum_slaves()?;
    let limits = liminf_upper(&sum, m)?;
    let method = |bound| Method::InfApprox { epsilon: epsilon.clone(), bound, size: size.clone(), min_prob: min_prob.clone() };
    let minus: Rational = limits
        .iter()
        .filter(|(v, _)| *v == ExtValue::MinusInfinity)
        .map(|(_, p)| p.clone())
        .sum();
    if !minus.is_zero() {
        let mut distribution = Distribution::from_points([(ExtValue::MinusInfinity, minus.clone())]);
        distribution.unresolved = Rational::one() - minus;
        let exact = distribution.unresolved.is_zero();
        return Ok(AnalysisReport { expected: Some(ExtValue::MinusInfinity), distribution, method: method(None), exact });
    }
    let bound = approx_bound(&size, &min_prob, epsilon)?;
    let mut report = analyze_inf_clipped(&sum, m, &bound)?;
    report.method = method(Some(bound));
    report.exact = false;
    Ok(report)
}

/// Exact analysis of the Inf master with every Sum slave clipped to
/// `BSum(bound)`.
pub fn analyze_inf_clipped(nwa: &Nwa, m: &LabeledMarkovChain, bound: &BigInt) -> Result<AnalysisReport> {
    require_almost_sure(nwa, m)?;
    let sum = nwa.with_sum_slaves()?;
    let u = max_finite(&liminf_upper(&sum, m)?);
    let mut clipped = sum;
    for s in clipped.slaves.iter_mut() {
        if !s.is_dummy() {
            s.value_fn = ValueFn::Fin(FinValFn::BSum(bound.clone()));
        }
    }
    let mut report = clipped_report(&clipped, m, u)?;
    report.method = Method::InfExact { bound: Some(bound.clone()) };
    Ok(report)
}
