//! Almost-sure acceptance, slave statistics, and the limit analyses of
//! nested automata over a chain.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::Zero;

use super::report::{AnalysisReport, Distribution, Method};
use crate::automaton::{to_sum_slave, Weight, WeightedAutomaton};
use crate::error::{Error, Result};
use crate::linalg::{self, SparseRow};
use crate::markov::{absorption_probabilities, limavg_of_chain, EdgeWeight, LabeledMarkovChain, Product};
use crate::nwa::Nwa;
use crate::value::{ExtValue, InfValFn, Rational};

/// A move of the slave-times-chain graph; `to == None` means the slave
/// accepted.
#[derive(Clone, Debug)]
pub(crate) struct SlaveMove {
    pub to: Option<usize>,
    pub prob: Rational,
    pub weight: BigInt,
}

/// Reachable part of (slave state, chain state) pairs from a start pair
/// whose slave state is not accepting.
#[derive(Clone, Debug)]
pub(crate) struct SlaveChain {
    pub nodes: Vec<(usize, usize)>,
    pub moves: Vec<Vec<SlaveMove>>,
    pub rejects: bool,
}

pub(crate) fn explore(slave: &WeightedAutomaton, m: &LabeledMarkovChain, out: &[Vec<usize>], start: (usize, usize)) -> SlaveChain {
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    ids.insert(start, 0);
    let mut nodes = vec![start];
    let mut moves: Vec<Vec<SlaveMove>> = vec![Vec::new()];
    let mut rejects = false;
    let mut i = 0;
    while i < nodes.len() {
        let (q, s) = nodes[i];
        let mut here = Vec::new();
        for &ei in &out[s] {
            let e = &m.edges[ei];
            let Some((q2, w)) = slave.step(q, e.letter) else {
                rejects = true;
                continue;
            };
            let weight = w.value().cloned().unwrap_or_default();
            let to = if slave.accepting[*q2] {
                None
            } else {
                Some(*ids.entry((*q2, e.to)).or_insert_with(|| {
                    nodes.push((*q2, e.to));
                    moves.push(Vec::new());
                    nodes.len() - 1
                }))
            };
            here.push(SlaveMove { to, prob: e.prob.clone(), weight });
        }
        moves[i] = here;
        i += 1;
    }
    SlaveChain { nodes, moves, rejects }
}

impl SlaveChain {
    /// Nodes from which acceptance is reachable.
    fn co_accepting(&self) -> Vec<bool> {
        let n = self.nodes.len();
        let mut rev = vec![Vec::new(); n];
        let mut good = vec![false; n];
        let mut stack = Vec::new();
        for (i, ms) in self.moves.iter().enumerate() {
            for mv in ms {
                match mv.to {
                    None => {
                        if !good[i] {
                            good[i] = true;
                            stack.push(i);
                        }
                    }
                    Some(j) => rev[j].push(i),
                }
            }
        }
        while let Some(j) = stack.pop() {
            for &i in &rev[j] {
                if !good[i] {
                    good[i] = true;
                    stack.push(i);
                }
            }
        }
        good
    }

    pub fn terminates_almost_surely(&self) -> bool {
        !self.rejects && self.co_accepting().iter().all(|&b| b)
    }

    /// Expected total weight until acceptance from the start node.
    pub fn expected_total(&self) -> Result<Rational> {
        let n = self.nodes.len();
        let mut rows: Vec<SparseRow> = Vec::with_capacity(n);
        let mut rhs = vec![Rational::zero(); n];
        for (i, ms) in self.moves.iter().enumerate() {
            let mut row = linalg::identity_row(i);
            for mv in ms {
                rhs[i] += &mv.prob * Rational::from_integer(mv.weight.clone());
                if let Some(j) = mv.to {
                    *row.entry(j).or_insert_with(Rational::zero) -= &mv.prob;
                }
            }
            rows.push(row);
        }
        let x = linalg::solve(n, &rows, &[rhs])?;
        Ok(x[0][0].clone())
    }

    /// Minimal total weight over paths from the start node to acceptance.
    pub fn min_total(&self) -> Result<ExtValue> {
        let n = self.nodes.len();
        let good = self.co_accepting();
        if !good[0] {
            return Err(Error::NoAcceptingPath);
        }
        // Bellman-Ford over nodes; index n is the accepting sink
        let mut dist: Vec<Option<BigInt>> = vec![None; n + 1];
        dist[0] = Some(BigInt::zero());
        let target = |mv: &SlaveMove| mv.to.unwrap_or(n);
        let relax = |dist: &mut Vec<Option<BigInt>>| {
            let mut changed = Vec::new();
            for (i, ms) in self.moves.iter().enumerate() {
                let Some(d) = dist[i].clone() else { continue };
                for mv in ms {
                    let t = target(mv);
                    let nd = &d + &mv.weight;
                    if dist[t].as_ref().map_or(true, |old| nd < *old) {
                        dist[t] = Some(nd);
                        changed.push(t);
                    }
                }
            }
            changed
        };
        for _ in 0..n {
            if relax(&mut dist).is_empty() {
                break;
            }
        }
        let unstable = relax(&mut dist);
        if !unstable.is_empty() {
            // anything reachable from a still-improving node sits behind a
            // negative cycle; if it can still accept the infimum is -inf
            let mut seen = vec![false; n + 1];
            let mut stack = unstable;
            while let Some(i) = stack.pop() {
                if seen[i] {
                    continue;
                }
                seen[i] = true;
                if i == n || good[i] {
                    return Ok(ExtValue::MinusInfinity);
                }
                for mv in &self.moves[i] {
                    stack.push(target(mv));
                }
            }
        }
        Ok(dist[n].clone().map(ExtValue::from_bigint).expect("accepting reachable"))
    }
}

/// Statistics of a slave launched by a master transition on `letter`
/// with the chain moving to `next`: the first slave step is fixed.
#[derive(Clone, Debug)]
enum FirstStep {
    Rejects,
    Accepts(BigInt),
    Continues(BigInt, SlaveChain),
}

fn first_step(slave: &WeightedAutomaton, m: &LabeledMarkovChain, out: &[Vec<usize>], letter: usize, next: usize) -> FirstStep {
    match slave.step(slave.initial, letter) {
        None => FirstStep::Rejects,
        Some((t, w)) => {
            let w = w.value().cloned().unwrap_or_default();
            if slave.accepting[*t] {
                FirstStep::Accepts(w)
            } else {
                FirstStep::Continues(w, explore(slave, m, out, (*t, next)))
            }
        }
    }
}

struct SlaveCache<'a> {
    nwa: &'a Nwa,
    m: &'a LabeledMarkovChain,
    out: Vec<Vec<usize>>,
    cache: HashMap<(usize, usize, usize), FirstStep>,
}

impl<'a> SlaveCache<'a> {
    fn new(nwa: &'a Nwa, m: &'a LabeledMarkovChain) -> Self {
        SlaveCache { nwa, m, out: m.out_edges(), cache: HashMap::new() }
    }

    fn get(&mut self, slave: usize, letter: usize, next: usize) -> &FirstStep {
        let (nwa, m, out) = (self.nwa, self.m, &self.out);
        self.cache
            .entry((slave, letter, next))
            .or_insert_with(|| first_step(&nwa.slaves[slave], m, out, letter, next))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlmostSure {
    pub holds: bool,
    pub reasons: Vec<String>,
}

type MasterProduct = Product<usize>;

fn master_product(nwa: &Nwa, m: &LabeledMarkovChain) -> MasterProduct {
    Product::build(m, nwa.master.initial, |q, a| nwa.master.step(q, a))
}

/// Decides whether the accepted words have probability one.
pub fn almost_sure_acceptance(nwa: &Nwa, m: &LabeledMarkovChain) -> AlmostSure {
    let p = master_product(nwa, m);
    let mut reasons = Vec::new();
    let label = |q: usize, s: usize| format!("({}, {})", nwa.master.states[q], m.states[s]);
    if p.reject.is_some() {
        reasons.push("the master has no move on a letter the chain emits with positive probability".to_string());
    }
    for scc in p.end_sccs() {
        if Some(scc[0]) == p.reject {
            continue;
        }
        let (q0, s0) = p.pairs[scc[0]].expect("not the sink");
        let accepting = scc
            .iter()
            .any(|&i| p.pairs[i].map_or(false, |(q, _)| nwa.master.accepting[q]));
        if !accepting {
            reasons.push(format!("end component at {} has no accepting master state", label(q0, s0)));
        }
        let launches = scc.iter().any(|&i| {
            p.out[i]
                .iter()
                .any(|e| e.payload.map_or(false, |l| l < nwa.slaves.len() && !nwa.is_dummy(l)))
        });
        if !launches {
            reasons.push(format!("end component at {} only launches dummy slaves", label(q0, s0)));
        }
    }
    let mut cache = SlaveCache::new(nwa, m);
    let mut seen = std::collections::HashSet::new();
    for (i, edges) in p.out.iter().enumerate() {
        let Some((q, s)) = p.pairs[i] else { continue };
        for e in edges {
            let (Some(l), Some(ci)) = (e.payload, e.chain_edge) else { continue };
            if l >= nwa.slaves.len() {
                reasons.push(format!("master launches missing slave {} at {}", l + 1, label(q, s)));
                continue;
            }
            if nwa.is_dummy(l) {
                continue;
            }
            let next = m.edges[ci].to;
            if !seen.insert((l, e.letter, next)) {
                continue;
            }
            let ok = match cache.get(l, e.letter, next) {
                FirstStep::Rejects => false,
                FirstStep::Accepts(_) => true,
                FirstStep::Continues(_, sc) => sc.terminates_almost_surely(),
            };
            if !ok {
                reasons.push(format!(
                    "slave {} launched on `{}` at {} does not terminate almost surely",
                    l + 1,
                    m.alphabet.letter(e.letter),
                    label(q, s)
                ));
            }
        }
    }
    AlmostSure { holds: reasons.is_empty(), reasons }
}

pub(crate) fn require_almost_sure(nwa: &Nwa, m: &LabeledMarkovChain) -> Result<()> {
    let a = almost_sure_acceptance(nwa, m);
    if a.holds {
        Ok(())
    } else {
        Err(Error::NotAlmostSureAccepting(a.reasons.join("; ")))
    }
}

/// Minimal value the slave can produce on words of the chain read from
/// `start`.
pub fn min_achievable_slave_value(slave: &WeightedAutomaton, m: &LabeledMarkovChain, start: usize) -> Result<ExtValue> {
    if slave.is_dummy() {
        return Ok(ExtValue::Bottom);
    }
    let sum = to_sum_slave(slave)?;
    explore(&sum, m, &m.out_edges(), (sum.initial, start)).min_total()
}

/// Expected value of the slave on words of the chain read from `start`.
pub fn slave_expected_value(slave: &WeightedAutomaton, m: &LabeledMarkovChain, start: usize) -> Result<ExtValue> {
    if slave.is_dummy() {
        return Ok(ExtValue::Bottom);
    }
    let sum = to_sum_slave(slave)?;
    let sc = explore(&sum, m, &m.out_edges(), (sum.initial, start));
    if !sc.terminates_almost_surely() {
        return Err(Error::NotAlmostSurelyTerminating { slave: "slave".into(), state: m.states[start].clone() });
    }
    Ok(ExtValue::Finite(sc.expected_total()?))
}

/// LimInf (and, through negation, LimSup) of a nested automaton: within
/// an end component the value is the least value any launch can reach.
pub fn analyze_liminf_nwa(nwa: &Nwa, m: &LabeledMarkovChain) -> Result<AnalysisReport> {
    match nwa.master_fn {
        InfValFn::LimInf => {}
        InfValFn::LimSup => {
            let flipped = nwa.with_sum_slaves()?.dualize()?;
            return Ok(analyze_liminf_nwa(&flipped, m)?.negate());
        }
        f => return Err(Error::Unsupported(format!("{} master in limit analysis", f.name()))),
    }
    require_almost_sure(nwa, m)?;
    let sum = nwa.with_sum_slaves()?;
    let values = liminf_scc_values(&sum, m)?;
    AnalysisReport::from_distribution(Distribution::from_points(values), Method::LimInfScc)
}

/// (value, probability) per end component of master x chain.
pub(crate) fn liminf_scc_values(sum: &Nwa, m: &LabeledMarkovChain) -> Result<Vec<(ExtValue, Rational)>> {
    let p = master_product(sum, m);
    let ends = p.end_sccs();
    let probs = absorption_probabilities(&p.graph(), p.initial, &ends)?;
    let mut cache = SlaveCache::new(sum, m);
    let mut out = Vec::new();
    for (scc, prob) in ends.iter().zip(probs) {
        let mut best: Option<ExtValue> = None;
        for &i in scc {
            for e in &p.out[i] {
                let (Some(l), Some(ci)) = (e.payload, e.chain_edge) else { continue };
                if sum.is_dummy(l) {
                    continue;
                }
                let v = match cache.get(l, e.letter, m.edges[ci].to) {
                    FirstStep::Rejects => continue,
                    FirstStep::Accepts(w) => ExtValue::from_bigint(w.clone()),
                    FirstStep::Continues(w, sc) => match sc.min_total() {
                        Ok(ExtValue::Finite(r)) => ExtValue::Finite(r + Rational::from_integer(w.clone())),
                        Ok(other) => other,
                        Err(Error::NoAcceptingPath) => continue,
                        Err(e) => return Err(e),
                    },
                };
                if best.as_ref().map_or(true, |b| v < *b) {
                    best = Some(v);
                }
            }
        }
        let v = best.ok_or(Error::NoAcceptingPath)?;
        out.push((v, prob));
    }
    Ok(out)
}

/// Mean-payoff analysis through the chain whose weights are expected slave
/// values.
pub fn analyze_limavg_nwa(nwa: &Nwa, m: &LabeledMarkovChain) -> Result<AnalysisReport> {
    if nwa.master_fn != InfValFn::LimAvg {
        return Err(Error::Unsupported(format!("{} master in mean-payoff analysis", nwa.master_fn.name())));
    }
    require_almost_sure(nwa, m)?;
    let chain = expected_slave_chain(nwa, m)?;
    let res = limavg_of_chain(&chain)?;
    let dist = Distribution::from_points(res.per_end_scc.into_iter().map(|s| (ExtValue::Finite(s.value), s.reach)));
    let mut report = AnalysisReport::from_distribution(dist, Method::LimAvgProduct)?;
    report.expected = Some(res.overall);
    Ok(report)
}

/// Master x chain with each launch weighted by the expected value of the
/// launched slave (silent for dummies).
pub fn expected_slave_chain(nwa: &Nwa, m: &LabeledMarkovChain) -> Result<LabeledMarkovChain> {
    let sum = nwa.with_sum_slaves()?;
    let p = master_product(&sum, m);
    let names = p
        .pairs
        .iter()
        .map(|pr| match pr {
            Some((q, s)) => format!("({},{})", sum.master.states[*q], m.states[*s]),
            None => "reject".to_string(),
        })
        .collect();
    let mut chain = LabeledMarkovChain::new(m.alphabet.clone(), names, p.initial);
    let mut cache = SlaveCache::new(&sum, m);
    for (from, edges) in p.out.iter().enumerate() {
        for e in edges {
            let weight = match (e.payload, e.chain_edge) {
                (Some(l), Some(ci)) if !sum.is_dummy(l) => {
                    let next = m.edges[ci].to;
                    let v = match cache.get(l, e.letter, next) {
                        FirstStep::Accepts(w) => Rational::from_integer(w.clone()),
                        FirstStep::Continues(w, sc) if sc.terminates_almost_surely() => {
                            sc.expected_total()? + Rational::from_integer(w.clone())
                        }
                        _ => {
                            return Err(Error::NotAlmostSurelyTerminating {
                                slave: format!("slave {}", l + 1),
                                state: m.states[next].clone(),
                            })
                        }
                    };
                    EdgeWeight::Value(v)
                }
                _ => EdgeWeight::Silent,
            };
            chain.add_weighted_edge(from, e.letter, e.to, e.prob.clone(), weight);
        }
    }
    Ok(chain)
}

/// Whether some cycle with negative total weight lies on a path from the
/// initial state to an accepting state (halting at the first one).
pub fn has_reachable_negative_cycle(slave: &WeightedAutomaton) -> Result<bool> {
    let sum = to_sum_slave(slave)?;
    Ok(matches!(min_rest(&sum)[sum.initial], Some(ExtValue::MinusInfinity)))
}

/// Per state, the minimal total weight of a path to acceptance (`None`
/// if acceptance is unreachable). Accepting states have value zero.
pub(crate) fn min_rest(sum: &WeightedAutomaton) -> Vec<Option<ExtValue>> {
    backward_min(sum, |q| sum.accepting[q])
}

/// Per state, the least prefix sum (at most zero) along paths that can
/// still reach acceptance; `None` where acceptance is unreachable.
pub(crate) fn min_prefix(sum: &WeightedAutomaton) -> Vec<Option<ExtValue>> {
    let rest = min_rest(sum);
    backward_min(sum, |q| rest[q].is_some())
}

/// Least weight of a path (stopping at accepting states) from each state
/// to some state satisfying `base`, where every base state counts zero.
fn backward_min(sum: &WeightedAutomaton, base: impl Fn(usize) -> bool) -> Vec<Option<ExtValue>> {
    let n = sum.num_states();
    let w = |x: &Weight| x.value().cloned().unwrap_or_default();
    let mut dist: Vec<Option<BigInt>> = (0..n).map(|q| base(q).then(BigInt::zero)).collect();
    let edges: Vec<(usize, usize, BigInt)> = sum
        .transitions()
        .filter(|(q, _, _, _)| !sum.accepting[*q])
        .map(|(q, _, to, x)| (q, to, w(x)))
        .collect();
    let relax = |dist: &mut Vec<Option<BigInt>>| {
        let mut changed = Vec::new();
        for (q, to, x) in &edges {
            let Some(d) = dist[*to].clone() else { continue };
            let nd = d + x;
            if dist[*q].as_ref().map_or(true, |old| nd < *old) {
                dist[*q] = Some(nd);
                changed.push(*q);
            }
        }
        changed
    };
    for _ in 0..n {
        if relax(&mut dist).is_empty() {
            break;
        }
    }
    let mut minus = vec![false; n];
    let mut stack = relax(&mut dist);
    // predecessors of improving states also reach the negative cycle
    while let Some(q) = stack.pop() {
        if minus[q] {
            continue;
        }
        minus[q] = true;
        for (p, to, _) in &edges {
            if *to == q && !minus[*p] {
                stack.push(*p);
            }
        }
    }
    (0..n)
        .map(|q| {
            if minus[q] {
                Some(ExtValue::MinusInfinity)
            } else {
                dist[q].clone().map(ExtValue::from_bigint)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{Alphabet, LabeledAutomaton, ValueFn};
    use crate::gen::{build_art, request_grant_chain, uniform_chain};
    use crate::nwa::{dummy_slave, one_step_slave};
    use crate::value::{rat, ratio, FinValFn};

    fn letter_valued(f: InfValFn) -> Nwa {
        let al = Alphabet::new(["a", "b"]).unwrap();
        let mut m = LabeledAutomaton::new(al.clone(), vec!["m".into()], 0);
        m.add_transition(0, 0, 0, 0).unwrap();
        m.add_transition(0, 1, 0, 0).unwrap();
        m.accepting[0] = true;
        Nwa::new(m, f, vec![one_step_slave(&al, &[1, 2], FinValFn::Sum)])
    }

    #[test]
    fn art_almost_sure() {
        let art = build_art(2);
        assert!(almost_sure_acceptance(&art, &request_grant_chain(ratio(1, 2))).holds);
        assert!(!almost_sure_acceptance(&art, &uniform_chain(art.alphabet())).holds);
    }

    #[test]
    fn dummy_only_is_not_almost_sure() {
        let al = Alphabet::new(["a"]).unwrap();
        let mut m = LabeledAutomaton::new(al.clone(), vec!["m".into()], 0);
        m.add_transition(0, 0, 0, 0).unwrap();
        m.accepting[0] = true;
        let nwa = Nwa::new(m, InfValFn::LimAvg, vec![dummy_slave(&al)]);
        assert!(!almost_sure_acceptance(&nwa, &uniform_chain(&al)).holds);
        assert!(matches!(
            analyze_limavg_nwa(&nwa, &uniform_chain(&al)),
            Err(Error::NotAlmostSureAccepting(_))
        ));
    }

    #[test]
    fn art_slave_statistics() {
        let art = build_art(2);
        let chain = request_grant_chain(ratio(1, 2));
        assert_eq!(slave_expected_value(&art.slaves[1], &chain, 0).unwrap(), ExtValue::int(2));
        assert_eq!(min_achievable_slave_value(&art.slaves[1], &chain, 0).unwrap(), ExtValue::int(1));
        assert_eq!(slave_expected_value(&art.slaves[0], &chain, 0).unwrap(), ExtValue::Bottom);
    }

    #[test]
    fn art_mean_payoff() {
        let r = analyze_limavg_nwa(&build_art(2), &request_grant_chain(ratio(1, 2))).unwrap();
        assert_eq!(r.expected, Some(ExtValue::int(2)));
        assert_eq!(r.distribution, Distribution::point(ExtValue::int(2)));
    }

    #[test]
    fn letter_valued_limits() {
        let chain = uniform_chain(&Alphabet::new(["a", "b"]).unwrap());
        let r = analyze_liminf_nwa(&letter_valued(InfValFn::LimInf), &chain).unwrap();
        assert_eq!(r.expected, Some(ExtValue::int(1)));
        let r = analyze_liminf_nwa(&letter_valued(InfValFn::LimSup), &chain).unwrap();
        assert_eq!(r.expected, Some(ExtValue::int(2)));
        assert_eq!(r.distribution, Distribution::point(ExtValue::int(2)));
    }

    #[test]
    fn negative_cycle_gives_minus_infinity() {
        let al = Alphabet::new(["a", "b"]).unwrap();
        let mut s = WeightedAutomaton::with_size(al.clone(), 2, ValueFn::Fin(FinValFn::Sum));
        s.add_transition(0, 0, 0, Weight::int(-1)).unwrap();
        s.add_transition(0, 1, 1, Weight::int(0)).unwrap();
        s.set_accepting(1, true);
        let chain = uniform_chain(&al);
        assert_eq!(min_achievable_slave_value(&s, &chain, 0).unwrap(), ExtValue::MinusInfinity);
        assert!(has_reachable_negative_cycle(&s).unwrap());
        let mut nwa = letter_valued(InfValFn::LimInf);
        nwa.slaves[0] = s;
        let r = analyze_liminf_nwa(&nwa, &chain).unwrap();
        assert_eq!(r.expected, Some(ExtValue::MinusInfinity));
        assert_eq!(r.distribution, Distribution::point(ExtValue::MinusInfinity));
    }

    #[test]
    fn sumplus_minimum_is_nonnegative() {
        let al = Alphabet::new(["a", "b"]).unwrap();
        let mut s = WeightedAutomaton::with_size(al.clone(), 2, ValueFn::Fin(FinValFn::SumPlus));
        s.add_transition(0, 0, 0, Weight::int(-3)).unwrap();
        s.add_transition(0, 1, 1, Weight::int(-1)).unwrap();
        s.set_accepting(1, true);
        assert_eq!(min_achievable_slave_value(&s, &uniform_chain(&al), 0).unwrap(), ExtValue::Finite(rat(1)));
    }

    #[test]
    fn no_accepting_path() {
        let al = Alphabet::new(["a"]).unwrap();
        let mut s = WeightedAutomaton::with_size(al.clone(), 2, ValueFn::Fin(FinValFn::Sum));
        s.add_transition(0, 0, 0, Weight::int(1)).unwrap();
        s.set_accepting(1, true);
        let chain = uniform_chain(&al);
        assert_eq!(min_achievable_slave_value(&s, &chain, 0), Err(Error::NoAcceptingPath));
        assert!(matches!(slave_expected_value(&s, &chain, 0), Err(Error::NotAlmostSurelyTerminating { .. })));
    }
}
