//! Expected value and distribution of deterministic infinite-word weighted
//! automata over a chain.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use super::report::{AnalysisReport, Distribution, Method};
use crate::automaton::WeightedAutomaton;
use crate::error::{Error, Result};
use crate::markov::{
    absorption_probabilities, end_sccs_of, limavg_of_chain, product_chain, EdgeWeight, Graph, ProductChain,
};
use crate::value::{ExtValue, InfValFn, Rational};

pub fn analyze_deterministic_wa(wa: &WeightedAutomaton, m: &crate::markov::LabeledMarkovChain) -> Result<AnalysisReport> {
    let f = wa
        .inf_fn()
        .ok_or_else(|| Error::Unsupported("expected an infinite-word automaton".into()))?;
    let pc = product_chain(wa, m);
    let g = pc.chain.graph();
    if pc.reject.is_some() {
        return Err(Error::RejectionMassPositive("the automaton has no move on some likely letter".into()));
    }
    let ends = end_sccs_of(&g);
    for scc in &ends {
        if !scc.iter().any(|&s| pc.pairs[s].map_or(false, |(q, _)| wa.accepting[q])) {
            return Err(Error::RejectionMassPositive(format!(
                "end component containing `{}` has no accepting state",
                pc.chain.states[scc[0]]
            )));
        }
        if scc_weights(&pc, scc).is_empty() {
            return Err(Error::RejectionMassPositive(format!(
                "end component containing `{}` only has silent weights",
                pc.chain.states[scc[0]]
            )));
        }
    }
    let dist = match f {
        InfValFn::LimInf | InfValFn::LimSup => {
            let probs = absorption_probabilities(&g, pc.chain.initial, &ends)?;
            Distribution::from_points(ends.iter().zip(probs).map(|(scc, p)| {
                let ws = scc_weights(&pc, scc);
                let v = if f == InfValFn::LimInf { ws.iter().min() } else { ws.iter().max() };
                (ExtValue::Finite(v.cloned().expect("non-silent checked")), p)
            }))
        }
        InfValFn::LimAvg => {
            let res = limavg_of_chain(&pc.chain)?;
            Distribution::from_points(
                res.per_end_scc.into_iter().map(|s| (ExtValue::Finite(s.value), s.reach)),
            )
        }
        InfValFn::Inf | InfValFn::Sup => extremum_distribution(&pc, &ends, f == InfValFn::Inf)?,
    };
    AnalysisReport::from_distribution(dist, Method::WaDirect)
}

fn scc_weights(pc: &ProductChain, scc: &[usize]) -> Vec<Rational> {
    let mut inside = vec![false; pc.chain.num_states()];
    for &s in scc {
        inside[s] = true;
    }
    pc.chain
        .edges
        .iter()
        .filter(|e| inside[e.from] && e.prob > Rational::zero())
        .filter_map(|e| e.weight.value().cloned())
        .collect()
}

fn better(take_min: bool, a: &Rational, b: &Rational) -> bool {
    if take_min {
        a < b
    } else {
        a > b
    }
}

fn fold(take_min: bool, cur: &Option<Rational>, w: &Rational) -> Option<Rational> {
    match cur {
        Some(c) if !better(take_min, w, c) => Some(c.clone()),
        _ => Some(w.clone()),
    }
}

/// Augments the product with the running extremum until an end component
/// is entered; inside it every weight recurs, so the final value is the
/// extremum of the running value and the component's weights.
fn extremum_distribution(pc: &ProductChain, ends: &[Vec<usize>], take_min: bool) -> Result<Distribution> {
    let n = pc.chain.num_states();
    let mut end_of = vec![usize::MAX; n];
    for (j, scc) in ends.iter().enumerate() {
        for &s in scc {
            end_of[s] = j;
        }
    }
    let scc_ext: Vec<Rational> = ends
        .iter()
        .map(|scc| {
            let ws = scc_weights(pc, scc);
            let v = if take_min { ws.iter().min() } else { ws.iter().max() };
            v.cloned().expect("non-silent checked")
        })
        .collect();
    let out = pc.chain.out_edges();

    #[derive(Clone, PartialEq, Eq, Hash)]
    enum Node {
        Live(usize, Option<Rational>),
        Absorbed(usize, Option<Rational>),
    }
    let node_of = |s: usize, e: Option<Rational>| {
        if end_of[s] != usize::MAX {
            Node::Absorbed(end_of[s], e)
        } else {
            Node::Live(s, e)
        }
    };
    let mut ids: HashMap<Node, usize> = HashMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let start = node_of(pc.chain.initial, None);
    ids.insert(start.clone(), 0);
    nodes.push(start);
    let mut aug: Vec<BTreeMap<usize, Rational>> = vec![BTreeMap::new()];
    let mut i = 0;
    while i < nodes.len() {
        match nodes[i].clone() {
            Node::Absorbed(..) => {
                aug[i].insert(i, Rational::one());
            }
            Node::Live(s, e) => {
                for &ei in &out[s] {
                    let edge = &pc.chain.edges[ei];
                    let e2 = match &edge.weight {
                        EdgeWeight::Value(w) => fold(take_min, &e, w),
                        EdgeWeight::Silent => e.clone(),
                    };
                    let node = node_of(edge.to, e2);
                    let j = *ids.entry(node.clone()).or_insert_with(|| {
                        nodes.push(node);
                        aug.push(BTreeMap::new());
                        nodes.len() - 1
                    });
                    *aug[i].entry(j).or_insert_with(Rational::zero) += &edge.prob;
                }
            }
        }
        i += 1;
    }
    let graph: Graph = aug.into_iter().map(|m| m.into_iter().collect()).collect();
    let absorbing: Vec<usize> = (0..nodes.len())
        .filter(|&i| matches!(nodes[i], Node::Absorbed(..)))
        .collect();
    let targets: Vec<Vec<usize>> = absorbing.iter().map(|&i| vec![i]).collect();
    let probs = absorption_probabilities(&graph, 0, &targets)?;
    Ok(Distribution::from_points(absorbing.iter().zip(probs).map(|(&i, p)| {
        let Node::Absorbed(j, e) = &nodes[i] else { unreachable!() };
        let v = fold(take_min, e, &scc_ext[*j]).expect("some value");
        (ExtValue::Finite(v), p)
    })))
}
