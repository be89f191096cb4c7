//! Builders for reference automata, chains and reduction instances.

use num_bigint::BigInt;

use crate::automaton::{Alphabet, LabeledAutomaton, ValueFn, Weight, WeightedAutomaton};
use crate::error::{Error, Result};
use crate::markov::LabeledMarkovChain;
use crate::mca::{CounterInstr, Mca};
use crate::nwa::{dummy_slave, one_step_slave, Nwa};
use crate::value::{FinValFn, InfValFn, Rational};

/// Counter automaton over {a, #} whose value on `##a^k#a^m#` blocks is the
/// largest |k - m|.
pub fn build_blocks_diff() -> Mca {
    let al = Alphabet::new(["a", "#"]).unwrap();
    let (a, h) = (0, 1);
    let states = ["q0", "q1", "q2", "q3"].map(String::from).to_vec();
    let mut m = Mca::new(al, states, 0, InfValFn::Sup, 2);
    m.accepting[0] = true;
    let s = CounterInstr::start;
    let t = CounterInstr::terminate;
    let add = CounterInstr::add;
    m.add_transition(0, h, 1, vec![s(), add(0)]).unwrap();
    m.add_transition(1, h, 2, vec![add(0), s()]).unwrap();
    m.add_transition(2, a, 2, vec![add(1), add(-1)]).unwrap();
    m.add_transition(2, h, 3, vec![add(0), add(0)]).unwrap();
    m.add_transition(3, a, 3, vec![add(-1), add(1)]).unwrap();
    m.add_transition(3, h, 0, vec![t(), t()]).unwrap();
    m
}

pub fn art_alphabet() -> Alphabet {
    Alphabet::new(["r", "g", "#"]).unwrap()
}

/// Average response time with at most `k` pending requests. Slave 1 is a
/// dummy, slave 2 counts the letters up to and excluding the next grant.
pub fn build_art(k: usize) -> Nwa {
    assert!(k >= 1, "k must be positive");
    let al = art_alphabet();
    let (r, g, h) = (0, 1, 2);
    let states = (0..=k).map(|i| format!("q{i}")).collect();
    let mut master = LabeledAutomaton::new(al.clone(), states, 0);
    master.accepting[0] = true;
    for i in 0..=k {
        if i < k {
            master.add_transition(i, r, i + 1, 1).unwrap();
        }
        if i >= 1 {
            master.add_transition(i, h, i, 0).unwrap();
            master.add_transition(i, g, 0, 0).unwrap();
        }
    }
    let mut b2 = WeightedAutomaton::new(al.clone(), vec!["p0".into(), "p1".into()], 0, ValueFn::Fin(FinValFn::Sum));
    b2.add_transition(0, r, 0, Weight::int(1)).unwrap();
    b2.add_transition(0, h, 0, Weight::int(1)).unwrap();
    b2.add_transition(0, g, 1, Weight::int(0)).unwrap();
    b2.set_accepting(1, true);
    Nwa::new(master, InfValFn::LimAvg, vec![dummy_slave(&al), b2])
}

/// Chain emitting a request, then `#` with probability `p` or a grant.
pub fn request_grant_chain(p: Rational) -> LabeledMarkovChain {
    let al = art_alphabet();
    let mut m = LabeledMarkovChain::new(al, vec!["s0".into(), "s1".into()], 0);
    let one = Rational::from_integer(1.into());
    m.add_edge(0, 0, 1, one.clone());
    m.add_edge(1, 2, 1, p.clone());
    m.add_edge(1, 1, 0, one - p);
    m
}

pub fn uniform_chain(alphabet: &Alphabet) -> LabeledMarkovChain {
    let mut m = LabeledMarkovChain::new(alphabet.clone(), vec!["u".into()], 0);
    let p = Rational::new(1.into(), BigInt::from(alphabet.len()));
    for a in 0..alphabet.len() {
        m.add_edge(0, a, 0, p.clone());
    }
    m
}

/// Master that launches slaves 1..=m on its first m steps, then the last
/// slave forever.
fn staggered_master(al: &Alphabet, m: usize) -> LabeledAutomaton {
    let states = (0..=m).map(|i| format!("p{i}")).collect();
    let mut master = LabeledAutomaton::new(al.clone(), states, 0);
    for i in 0..m {
        for a in 0..al.len() {
            master.add_transition(i, a, i + 1, i).unwrap();
        }
    }
    for a in 0..al.len() {
        master.add_transition(m, a, m, m).unwrap();
    }
    master.accepting[m] = true;
    master
}

/// (Inf;Min) automaton over {0,1} whose value under the uniform chain has
/// expectation (#satisfying assignments) / 2^n. Clauses use DIMACS literals.
pub fn cnf_to_nwa(n: usize, clauses: &[Vec<i64>]) -> Result<Nwa> {
    let m = clauses.len();
    if n == 0 || m == 0 {
        return Err(Error::Schema("need at least one variable and one clause".into()));
    }
    for c in clauses {
        for &lit in c {
            if lit == 0 || lit.unsigned_abs() as usize > n {
                return Err(Error::Schema(format!("literal {lit} out of range")));
            }
        }
    }
    let al = Alphabet::new(["0", "1"]).unwrap();
    let mut slaves = Vec::with_capacity(m + 1);
    for (i, clause) in clauses.iter().enumerate() {
        slaves.push(clause_slave(&al, n, m - i, clause));
    }
    slaves.push(one_step_slave(&al, &[1, 1], FinValFn::Min));
    Ok(Nwa::new(staggered_master(&al, m), InfValFn::Inf, slaves))
}

fn clause_slave(al: &Alphabet, n: usize, skip: usize, clause: &[i64]) -> WeightedAutomaton {
    // skip states 0..skip, then read states (var j, satisfied) , then acc
    let read = |j: usize, sat: bool| skip + 2 * j + usize::from(sat);
    let acc = skip + 2 * n;
    let mut names: Vec<String> = (0..skip).map(|j| format!("skip{j}")).collect();
    for j in 0..n {
        names.push(format!("x{}", j + 1));
        names.push(format!("x{}+", j + 1));
    }
    names.push("acc".into());
    let mut s = WeightedAutomaton::new(al.clone(), names, 0, ValueFn::Fin(FinValFn::Min));
    for j in 0..skip {
        let to = if j + 1 < skip { j + 1 } else { read(0, false) };
        for a in 0..2 {
            s.add_transition(j, a, to, Weight::int(1)).unwrap();
        }
    }
    for j in 0..n {
        for sat in [false, true] {
            for bit in 0..2usize {
                let lit = if bit == 1 { (j + 1) as i64 } else { -((j + 1) as i64) };
                let sat2 = sat || clause.contains(&lit);
                if j + 1 == n {
                    s.add_transition(read(j, sat), bit, acc, Weight::int(i64::from(sat2))).unwrap();
                } else {
                    s.add_transition(read(j, sat), bit, read(j + 1, sat2), Weight::int(1)).unwrap();
                }
            }
        }
    }
    s.set_accepting(acc, true);
    s
}

/// Parses the clause section of a DIMACS CNF file.
pub fn parse_dimacs(text: &str) -> Result<(usize, Vec<Vec<i64>>)> {
    let mut n = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "cnf" {
                return Err(Error::Schema(format!("bad problem line `{line}`")));
            }
            n = Some(parts[1].parse().map_err(|_| Error::Schema("bad variable count".into()))?);
            continue;
        }
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| Error::Schema(format!("bad literal `{tok}`")))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                current.push(lit);
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    let n = n.ok_or_else(|| Error::Schema("missing `p cnf` line".into()))?;
    Ok((n, clauses))
}

/// Deterministic finite automaton over {a, b}; missing moves reject.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    pub initial: usize,
    pub accepting: Vec<bool>,
    pub delta: Vec<[Option<usize>; 2]>,
}

impl Dfa {
    pub fn accepts(&self, w: &[usize]) -> bool {
        let mut q = self.initial;
        for &a in w {
            match self.delta[q][a] {
                Some(t) => q = t,
                None => return false,
            }
        }
        self.accepting[q]
    }
}

/// (Inf;Min) automaton over {a, b, #} with value 1 on `u v # w` (|u| = n)
/// iff every automaton accepts `v`.
pub fn intersection_to_nwa(dfas: &[Dfa]) -> Result<Nwa> {
    let n = dfas.len();
    if n == 0 {
        return Err(Error::Schema("need at least one automaton".into()));
    }
    let al = Alphabet::new(["a", "b", "#"]).unwrap();
    let mut slaves = Vec::with_capacity(n + 1);
    for (i, d) in dfas.iter().enumerate() {
        slaves.push(dfa_slave(&al, n - i, d));
    }
    slaves.push(one_step_slave(&al, &[1, 1, 1], FinValFn::Min));
    Ok(Nwa::new(staggered_master(&al, n), InfValFn::Inf, slaves))
}

fn dfa_slave(al: &Alphabet, skip: usize, d: &Dfa) -> WeightedAutomaton {
    let k = d.delta.len();
    // skip states, dfa states, sink, acc
    let sim = |q: usize| skip + q;
    let sink = skip + k;
    let acc = skip + k + 1;
    let mut names: Vec<String> = (0..skip).map(|j| format!("skip{j}")).collect();
    names.extend((0..k).map(|q| format!("d{q}")));
    names.push("sink".into());
    names.push("acc".into());
    let mut s = WeightedAutomaton::new(al.clone(), names, 0, ValueFn::Fin(FinValFn::Min));
    for j in 0..skip {
        let to = if j + 1 < skip { j + 1 } else { sim(d.initial) };
        for a in 0..3 {
            s.add_transition(j, a, to, Weight::int(1)).unwrap();
        }
    }
    for q in 0..k {
        for a in 0..2 {
            let to = d.delta[q][a].map_or(sink, sim);
            s.add_transition(sim(q), a, to, Weight::int(1)).unwrap();
        }
        s.add_transition(sim(q), 2, acc, Weight::int(i64::from(d.accepting[q]))).unwrap();
    }
    for a in 0..2 {
        s.add_transition(sink, a, sink, Weight::int(1)).unwrap();
    }
    s.add_transition(sink, 2, acc, Weight::int(0)).unwrap();
    s.set_accepting(acc, true);
    s
}
