//! Labeled Markov chains, products with automata, and the exact linear
//! algebra built on top of them (absorption, stationary laws, mean payoff).

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use crate::automaton::{Alphabet, Weight, WeightedAutomaton};
use crate::error::{Error, Result};
use crate::linalg::{self, SparseRow};
use crate::value::{fmt_rational, ExtValue, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EdgeWeight {
    Value(Rational),
    Silent,
}

impl EdgeWeight {
    pub fn is_silent(&self) -> bool {
        matches!(self, EdgeWeight::Silent)
    }

    pub fn value(&self) -> Option<&Rational> {
        match self {
            EdgeWeight::Value(v) => Some(v),
            EdgeWeight::Silent => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub letter: usize,
    pub to: usize,
    pub prob: Rational,
    pub weight: EdgeWeight,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledMarkovChain {
    pub alphabet: Alphabet,
    pub states: Vec<String>,
    pub initial: usize,
    pub edges: Vec<Edge>,
}

impl LabeledMarkovChain {
    pub fn new(alphabet: Alphabet, states: Vec<String>, initial: usize) -> Self {
        LabeledMarkovChain { alphabet, states, initial, edges: Vec::new() }
    }

    pub fn add_edge(&mut self, from: usize, letter: usize, to: usize, prob: Rational) {
        self.add_weighted_edge(from, letter, to, prob, EdgeWeight::Value(Rational::zero()));
    }

    pub fn add_weighted_edge(&mut self, from: usize, letter: usize, to: usize, prob: Rational, weight: EdgeWeight) {
        self.edges.push(Edge { from, letter, to, prob, weight });
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Outgoing edge indices per state, positive probability only.
    pub fn out_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_states()];
        for (i, e) in self.edges.iter().enumerate() {
            if e.prob > Rational::zero() {
                out[e.from].push(i);
            }
        }
        out
    }

    pub fn graph(&self) -> Graph {
        let mut g: Vec<BTreeMap<usize, Rational>> = vec![BTreeMap::new(); self.num_states()];
        for e in &self.edges {
            if e.prob > Rational::zero() {
                *g[e.from].entry(e.to).or_insert_with(Rational::zero) += &e.prob;
            }
        }
        g.into_iter().map(|m| m.into_iter().collect()).collect()
    }

    pub fn min_positive_prob(&self) -> Option<Rational> {
        self.edges
            .iter()
            .filter(|e| e.prob > Rational::zero())
            .map(|e| e.prob.clone())
            .min()
    }
}

/// Successor lists with aggregated probabilities.
pub type Graph = Vec<Vec<(usize, Rational)>>;

pub fn validate_chain(m: &LabeledMarkovChain) -> Vec<String> {
    let mut issues = Vec::new();
    let n = m.num_states();
    if m.initial >= n {
        issues.push("initial state out of range".to_string());
    }
    let mut sums = vec![Rational::zero(); n];
    let mut keys = HashMap::new();
    for e in &m.edges {
        if e.from >= n || e.to >= n || e.letter >= m.alphabet.len() {
            issues.push("edge endpoint or letter out of range".to_string());
            continue;
        }
        if e.prob < Rational::zero() || e.prob > Rational::one() {
            issues.push(format!(
                "edge {} -{}-> {} has probability {} outside [0,1]",
                m.states[e.from],
                m.alphabet.letter(e.letter),
                m.states[e.to],
                fmt_rational(&e.prob)
            ));
        }
        if keys.insert((e.from, e.letter, e.to), ()).is_some() {
            issues.push(format!(
                "duplicate edge {} -{}-> {}",
                m.states[e.from],
                m.alphabet.letter(e.letter),
                m.states[e.to]
            ));
        }
        sums[e.from] += &e.prob;
    }
    for (s, total) in sums.iter().enumerate() {
        if !total.is_one() {
            issues.push(format!(
                "outgoing probabilities of `{}` sum to {}",
                m.states[s],
                fmt_rational(total)
            ));
        }
    }
    issues
}

pub fn word_prefix_probability(m: &LabeledMarkovChain, u: &[usize]) -> Rational {
    let mut dist: BTreeMap<usize, Rational> = BTreeMap::new();
    dist.insert(m.initial, Rational::one());
    let out = m.out_edges();
    for &a in u {
        let mut next: BTreeMap<usize, Rational> = BTreeMap::new();
        for (s, p) in &dist {
            for &ei in &out[*s] {
                let e = &m.edges[ei];
                if e.letter == a {
                    *next.entry(e.to).or_insert_with(Rational::zero) += p * &e.prob;
                }
            }
        }
        dist = next;
    }
    dist.values().sum()
}

/// Iterative Tarjan. Components come out sinks first (reverse topological).
pub fn sccs(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < adj[v].len() {
                let w = adj[v][*i];
                *i += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

pub fn adjacency(g: &Graph) -> Vec<Vec<usize>> {
    g.iter().map(|row| row.iter().map(|(t, _)| *t).collect()).collect()
}

/// Components without positive-probability edges leaving them.
pub fn end_sccs_of(g: &Graph) -> Vec<Vec<usize>> {
    let comps = sccs(&adjacency(g));
    let mut comp_of = vec![0; g.len()];
    for (i, c) in comps.iter().enumerate() {
        for &s in c {
            comp_of[s] = i;
        }
    }
    let mut result: Vec<Vec<usize>> = comps
        .iter()
        .enumerate()
        .filter(|(i, c)| c.iter().all(|&s| g[s].iter().all(|(t, _)| comp_of[*t] == *i)))
        .map(|(_, c)| c.clone())
        .collect();
    result.sort();
    result
}

pub fn end_sccs(m: &LabeledMarkovChain) -> Vec<Vec<usize>> {
    end_sccs_of(&m.graph())
}

pub fn reachable_from(g: &Graph, start: usize) -> Vec<bool> {
    let mut seen = vec![false; g.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(s) = stack.pop() {
        for (t, _) in &g[s] {
            if !seen[*t] {
                seen[*t] = true;
                stack.push(*t);
            }
        }
    }
    seen
}

/// Probability, from `initial`, of eventually entering each target set.
/// Targets must be closed and pairwise disjoint.
pub fn absorption_probabilities(g: &Graph, initial: usize, targets: &[Vec<usize>]) -> Result<Vec<Rational>> {
    let n = g.len();
    let mut target_of = vec![usize::MAX; n];
    for (t, set) in targets.iter().enumerate() {
        for &s in set {
            target_of[s] = t;
        }
    }
    if target_of[initial] != usize::MAX {
        let mut v = vec![Rational::zero(); targets.len()];
        v[target_of[initial]] = Rational::one();
        return Ok(v);
    }
    let reach = reachable_from(g, initial);
    // states that can reach some target, by backward search
    let mut rev = vec![Vec::new(); n];
    for (s, row) in g.iter().enumerate() {
        for (t, _) in row {
            rev[*t].push(s);
        }
    }
    let mut co = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&s| target_of[s] != usize::MAX).collect();
    for &s in &stack {
        co[s] = true;
    }
    while let Some(s) = stack.pop() {
        for &p in &rev[s] {
            if !co[p] {
                co[p] = true;
                stack.push(p);
            }
        }
    }
    if !co[initial] {
        return Ok(vec![Rational::zero(); targets.len()]);
    }
    let unknowns: Vec<usize> = (0..n)
        .filter(|&s| reach[s] && co[s] && target_of[s] == usize::MAX)
        .collect();
    let mut local = vec![usize::MAX; n];
    for (i, &s) in unknowns.iter().enumerate() {
        local[s] = i;
    }
    let k = unknowns.len();
    let mut rows = Vec::with_capacity(k);
    let mut rhs = vec![vec![Rational::zero(); k]; targets.len()];
    for (i, &s) in unknowns.iter().enumerate() {
        let mut row = linalg::identity_row(i);
        for (t, p) in &g[s] {
            if local[*t] != usize::MAX {
                *row.entry(local[*t]).or_insert_with(Rational::zero) -= p;
            } else if target_of[*t] != usize::MAX {
                rhs[target_of[*t]][i] += p;
            }
        }
        rows.push(row);
    }
    let x = linalg::solve(k, &rows, &rhs)?;
    Ok(x.into_iter().map(|col| col[local[initial]].clone()).collect())
}

pub fn reach_probabilities(m: &LabeledMarkovChain, targets: &[Vec<usize>]) -> Result<Vec<Rational>> {
    absorption_probabilities(&m.graph(), m.initial, targets)
}

/// Stationary law of the chain restricted to `states`, which must form a
/// closed strongly connected set.
pub fn stationary_of(g: &Graph, states: &[usize]) -> Result<BTreeMap<usize, Rational>> {
    if states.is_empty() {
        return Err(Error::NotIrreducible);
    }
    let mut local = HashMap::new();
    for (i, &s) in states.iter().enumerate() {
        local.insert(s, i);
    }
    let k = states.len();
    let mut sub: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &s) in states.iter().enumerate() {
        for (t, _) in &g[s] {
            match local.get(t) {
                Some(&j) => sub[i].push(j),
                None => return Err(Error::NotIrreducible),
            }
        }
    }
    if sccs(&sub).len() != 1 {
        return Err(Error::NotIrreducible);
    }
    // balance: pi_j - sum_i pi_i P(i,j) = 0, first row replaced by sum pi = 1
    let mut rows: Vec<SparseRow> = (0..k).map(linalg::identity_row).collect();
    for (i, &s) in states.iter().enumerate() {
        for (t, p) in &g[s] {
            let j = local[t];
            *rows[j].entry(i).or_insert_with(Rational::zero) -= p;
        }
    }
    rows[0] = (0..k).map(|i| (i, Rational::one())).collect();
    let mut rhs = vec![Rational::zero(); k];
    rhs[0] = Rational::one();
    let x = linalg::solve(k, &rows, &[rhs])?;
    Ok(states.iter().zip(x[0].iter()).map(|(s, p)| (*s, p.clone())).collect())
}

pub fn stationary_distribution(m: &LabeledMarkovChain, states: &[usize]) -> Result<BTreeMap<usize, Rational>> {
    stationary_of(&m.graph(), states)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SccAverage {
    pub states: Vec<usize>,
    pub reach: Rational,
    pub value: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LimAvgResult {
    pub overall: ExtValue,
    pub per_end_scc: Vec<SccAverage>,
}

/// Long-run average of the non-silent edge weights, per reachable end
/// component and mixed by absorption probability.
pub fn limavg_of_chain(m: &LabeledMarkovChain) -> Result<LimAvgResult> {
    let g = m.graph();
    let reach = reachable_from(&g, m.initial);
    let ends: Vec<Vec<usize>> = end_sccs_of(&g).into_iter().filter(|c| reach[c[0]]).collect();
    let probs = absorption_probabilities(&g, m.initial, &ends)?;
    let out = m.out_edges();
    let mut per = Vec::new();
    let mut overall = Rational::zero();
    for (scc, p) in ends.into_iter().zip(probs) {
        let pi = stationary_of(&g, &scc)?;
        let mut num = Rational::zero();
        let mut den = Rational::zero();
        for &s in &scc {
            for &ei in &out[s] {
                let e = &m.edges[ei];
                if let EdgeWeight::Value(w) = &e.weight {
                    let freq = &pi[&s] * &e.prob;
                    num += &freq * w;
                    den += freq;
                }
            }
        }
        if den.is_zero() {
            return Err(Error::AllSilentEndScc(scc));
        }
        let value = num / den;
        overall += &p * &value;
        per.push(SccAverage { states: scc, reach: p, value });
    }
    Ok(LimAvgResult { overall: ExtValue::Finite(overall), per_end_scc: per })
}

/// Product of an automaton step function with a chain, restricted to the
/// part reachable from `(q0, chain.initial)`. Missing automaton moves lead
/// to a single absorbing reject sink.
#[derive(Clone, Debug)]
pub struct Product<T> {
    /// `(automaton state, chain state)`; the reject sink has no pair.
    pub pairs: Vec<Option<(usize, usize)>>,
    pub out: Vec<Vec<ProductEdge<T>>>,
    pub initial: usize,
    pub reject: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct ProductEdge<T> {
    pub letter: usize,
    pub to: usize,
    pub prob: Rational,
    /// Index of the underlying chain edge; `None` on the sink loop.
    pub chain_edge: Option<usize>,
    pub payload: Option<T>,
}

impl<T: Clone> Product<T> {
    pub fn build(m: &LabeledMarkovChain, q0: usize, step: impl Fn(usize, usize) -> Option<(usize, T)>) -> Self {
        let out_edges = m.out_edges();
        let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut pairs = vec![Some((q0, m.initial))];
        ids.insert((q0, m.initial), 0);
        let mut out: Vec<Vec<ProductEdge<T>>> = vec![Vec::new()];
        let mut reject = None;
        let mut i = 0;
        while i < pairs.len() {
            let Some((q, s)) = pairs[i] else {
                i += 1;
                continue;
            };
            let mut edges = Vec::new();
            for &ei in &out_edges[s] {
                let e = &m.edges[ei];
                let (to, payload) = match step(q, e.letter) {
                    Some((q2, t)) => {
                        let id = *ids.entry((q2, e.to)).or_insert_with(|| {
                            pairs.push(Some((q2, e.to)));
                            out.push(Vec::new());
                            pairs.len() - 1
                        });
                        (id, Some(t))
                    }
                    None => {
                        let id = *reject.get_or_insert_with(|| {
                            pairs.push(None);
                            out.push(Vec::new());
                            pairs.len() - 1
                        });
                        (id, None)
                    }
                };
                edges.push(ProductEdge { letter: e.letter, to, prob: e.prob.clone(), chain_edge: Some(ei), payload });
            }
            out[i] = edges;
            i += 1;
        }
        if let Some(r) = reject {
            out[r] = vec![ProductEdge { letter: 0, to: r, prob: Rational::one(), chain_edge: None, payload: None }];
        }
        Product { pairs, out, initial: 0, reject }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn graph(&self) -> Graph {
        self.out
            .iter()
            .map(|edges| {
                let mut agg: BTreeMap<usize, Rational> = BTreeMap::new();
                for e in edges {
                    *agg.entry(e.to).or_insert_with(Rational::zero) += &e.prob;
                }
                agg.into_iter().collect()
            })
            .collect()
    }

    /// End components reachable from the initial state (all of them are,
    /// since the product only holds reachable states).
    pub fn end_sccs(&self) -> Vec<Vec<usize>> {
        end_sccs_of(&self.graph())
    }
}

/// Sum of an automaton weight and a chain weight; silence only survives
/// when both sides are silent or the chain contributes zero.
pub fn combine_weights(a: &Weight, c: &EdgeWeight) -> EdgeWeight {
    match (a, c) {
        (Weight::Value(x), EdgeWeight::Value(y)) => EdgeWeight::Value(Rational::from_integer(x.clone()) + y),
        (Weight::Value(x), EdgeWeight::Silent) => EdgeWeight::Value(Rational::from_integer(x.clone())),
        (Weight::Silent, EdgeWeight::Value(y)) if y.is_zero() => EdgeWeight::Silent,
        (Weight::Silent, EdgeWeight::Value(y)) => EdgeWeight::Value(y.clone()),
        (Weight::Silent, EdgeWeight::Silent) => EdgeWeight::Silent,
    }
}

/// Product of a deterministic weighted automaton and a chain, as a chain.
#[derive(Clone, Debug)]
pub struct ProductChain {
    pub chain: LabeledMarkovChain,
    pub pairs: Vec<Option<(usize, usize)>>,
    pub reject: Option<usize>,
}

pub fn product_chain(a: &WeightedAutomaton, m: &LabeledMarkovChain) -> ProductChain {
    let p = Product::build(m, a.initial, |q, l| a.step(q, l).cloned());
    let names = p
        .pairs
        .iter()
        .map(|pr| match pr {
            Some((q, s)) => format!("({},{})", a.states[*q], m.states[*s]),
            None => "reject".to_string(),
        })
        .collect();
    let mut chain = LabeledMarkovChain::new(m.alphabet.clone(), names, p.initial);
    for (from, edges) in p.out.iter().enumerate() {
        for e in edges {
            let w = match (&e.payload, e.chain_edge) {
                (Some(w), Some(ci)) => combine_weights(w, &m.edges[ci].weight),
                _ => EdgeWeight::Silent,
            };
            chain.add_weighted_edge(from, e.letter, e.to, e.prob.clone(), w);
        }
    }
    ProductChain { chain, pairs: p.pairs, reject: p.reject }
}
