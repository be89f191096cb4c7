//! Extended values and the value functions that aggregate weight sequences.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::ValueError;

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Renders a rational as `p/q`, always with an explicit denominator.
pub fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<Rational, ValueError> {
    let s = s.trim();
    let bad = || ValueError::BadRational(s.to_string());
    match s.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(
            BigInt::from_str(s).map_err(|_| bad())?,
        )),
    }
}

/// A value produced by an automaton: a rational, one of the two infinities,
/// or the silent value `Bottom` which never takes part in aggregation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtValue {
    Finite(Rational),
    PlusInfinity,
    MinusInfinity,
    Bottom,
}

impl ExtValue {
    pub fn int(n: i64) -> Self {
        ExtValue::Finite(rat(n))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        ExtValue::Finite(Rational::from_integer(n))
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, ExtValue::Bottom)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtValue::Finite(_))
    }

    pub fn as_finite(&self) -> Option<&Rational> {
        match self {
            ExtValue::Finite(r) => Some(r),
            _ => None,
        }
    }

    /// Negation; swaps the infinities and fixes `Bottom`.
    pub fn negate(&self) -> Self {
        match self {
            ExtValue::Finite(r) => ExtValue::Finite(-r),
            ExtValue::PlusInfinity => ExtValue::MinusInfinity,
            ExtValue::MinusInfinity => ExtValue::PlusInfinity,
            ExtValue::Bottom => ExtValue::Bottom,
        }
    }

    fn rank(&self) -> Option<u8> {
        match self {
            ExtValue::MinusInfinity => Some(0),
            ExtValue::Finite(_) => Some(1),
            ExtValue::PlusInfinity => Some(2),
            ExtValue::Bottom => None,
        }
    }
}

impl PartialOrd for ExtValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let (a, b) = (self.rank()?, other.rank()?);
        match (self, other) {
            (ExtValue::Finite(x), ExtValue::Finite(y)) => Some(x.cmp(y)),
            _ => Some(a.cmp(&b)),
        }
    }
}

impl fmt::Display for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::Finite(r) => write!(f, "{}", fmt_rational(r)),
            ExtValue::PlusInfinity => write!(f, "+inf"),
            ExtValue::MinusInfinity => write!(f, "-inf"),
            ExtValue::Bottom => write!(f, "bottom"),
        }
    }
}

impl FromStr for ExtValue {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+inf" | "inf" => Ok(ExtValue::PlusInfinity),
            "-inf" => Ok(ExtValue::MinusInfinity),
            "bottom" => Ok(ExtValue::Bottom),
            other => parse_rational(other).map(ExtValue::Finite),
        }
    }
}

/// Value functions over finite weight sequences.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FinValFn {
    Min,
    Max,
    Sum,
    SumPlus,
    BSum(BigInt),
}

impl FinValFn {
    pub fn name(&self) -> &'static str {
        match self {
            FinValFn::Min => "Min",
            FinValFn::Max => "Max",
            FinValFn::Sum => "Sum",
            FinValFn::SumPlus => "SumPlus",
            FinValFn::BSum(_) => "BSum",
        }
    }

    /// The function obtained after negating every weight, if there is one.
    pub fn dual(&self) -> Option<FinValFn> {
        match self {
            FinValFn::Min => Some(FinValFn::Max),
            FinValFn::Max => Some(FinValFn::Min),
            FinValFn::Sum => Some(FinValFn::Sum),
            FinValFn::BSum(b) => Some(FinValFn::BSum(b.clone())),
            FinValFn::SumPlus => None,
        }
    }
}

/// Value functions over infinite weight sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InfValFn {
    Sup,
    Inf,
    LimSup,
    LimInf,
    LimAvg,
}

impl InfValFn {
    pub fn name(&self) -> &'static str {
        match self {
            InfValFn::Sup => "Sup",
            InfValFn::Inf => "Inf",
            InfValFn::LimSup => "LimSup",
            InfValFn::LimInf => "LimInf",
            InfValFn::LimAvg => "LimAvg",
        }
    }

    pub fn dual(&self) -> Option<InfValFn> {
        match self {
            InfValFn::Sup => Some(InfValFn::Inf),
            InfValFn::Inf => Some(InfValFn::Sup),
            InfValFn::LimSup => Some(InfValFn::LimInf),
            InfValFn::LimInf => Some(InfValFn::LimSup),
            // limsup of averages does not negate into limsup of averages
            InfValFn::LimAvg => None,
        }
    }

    pub fn is_limit(&self) -> bool {
        matches!(self, InfValFn::LimSup | InfValFn::LimInf | InfValFn::LimAvg)
    }
}

impl FromStr for InfValFn {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Sup" => Ok(InfValFn::Sup),
            "Inf" => Ok(InfValFn::Inf),
            "LimSup" => Ok(InfValFn::LimSup),
            "LimInf" => Ok(InfValFn::LimInf),
            "LimAvg" => Ok(InfValFn::LimAvg),
            other => Err(ValueError::UnknownFunction(other.to_string())),
        }
    }
}

/// Applies a finite-word value function. The empty sequence (a run of
/// length one) has the silent value.
pub fn apply_finval(g: &FinValFn, seq: &[BigInt]) -> ExtValue {
    if seq.is_empty() {
        return ExtValue::Bottom;
    }
    let v = match g {
        FinValFn::Min => seq.iter().min().cloned().unwrap(),
        FinValFn::Max => seq.iter().max().cloned().unwrap(),
        FinValFn::Sum => seq.iter().sum(),
        FinValFn::SumPlus => seq.iter().map(|w| w.abs()).sum(),
        FinValFn::BSum(bound) => {
            let mut acc = BigInt::zero();
            for w in seq {
                acc += w;
                if acc.abs() > *bound {
                    return ExtValue::from_bigint(if acc.is_positive() {
                        bound.clone()
                    } else {
                        -bound.clone()
                    });
                }
            }
            acc
        }
    };
    ExtValue::from_bigint(v)
}

/// Truncated estimator of an infinite-word value function: drops the first
/// `burn_in` entries and every `Bottom`, then aggregates what is left.
pub fn estimate_infval(
    f: InfValFn,
    seq: &[ExtValue],
    burn_in: usize,
) -> Result<Rational, ValueError> {
    let mut kept = Vec::new();
    for v in seq.iter().skip(burn_in) {
        match v {
            ExtValue::Bottom => {}
            ExtValue::Finite(r) => kept.push(r),
            _ => return Err(ValueError::NonFiniteEntry),
        }
    }
    if kept.is_empty() {
        return Err(ValueError::EmptyAfterFilter);
    }
    Ok(match f {
        InfValFn::LimAvg => {
            let total: Rational = kept.iter().copied().sum();
            total / Rational::from_integer(BigInt::from(kept.len()))
        }
        InfValFn::Inf | InfValFn::LimInf => kept.into_iter().min().cloned().unwrap(),
        InfValFn::Sup | InfValFn::LimSup => kept.into_iter().max().cloned().unwrap(),
    })
}

/// Streaming accumulator for a finite-word value function.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FinAccumulator {
    Empty,
    Running(BigInt),
    Saturated(BigInt),
}

impl FinAccumulator {
    pub fn push(&mut self, g: &FinValFn, w: &BigInt) {
        let next = match (&*self, g) {
            (FinAccumulator::Saturated(_), _) => return,
            (FinAccumulator::Empty, FinValFn::SumPlus) => w.abs(),
            (FinAccumulator::Empty, _) => w.clone(),
            (FinAccumulator::Running(a), FinValFn::Min) => a.min(w).clone(),
            (FinAccumulator::Running(a), FinValFn::Max) => a.max(w).clone(),
            (FinAccumulator::Running(a), FinValFn::Sum) => a + w,
            (FinAccumulator::Running(a), FinValFn::SumPlus) => a + w.abs(),
            (FinAccumulator::Running(a), FinValFn::BSum(_)) => a + w,
        };
        *self = match g {
            FinValFn::BSum(bound) if next.abs() > *bound => {
                FinAccumulator::Saturated(if next.is_positive() {
                    bound.clone()
                } else {
                    -bound.clone()
                })
            }
            _ => FinAccumulator::Running(next),
        };
    }

    pub fn value(&self) -> ExtValue {
        match self {
            FinAccumulator::Empty => ExtValue::Bottom,
            FinAccumulator::Running(v) | FinAccumulator::Saturated(v) => {
                ExtValue::from_bigint(v.clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn finval_examples() {
        assert_eq!(apply_finval(&FinValFn::Sum, &ints(&[1, -2, 3])), ExtValue::int(2));
        assert_eq!(
            apply_finval(&FinValFn::BSum(BigInt::from(2)), &ints(&[1, 1, 1])),
            ExtValue::int(2)
        );
        assert_eq!(apply_finval(&FinValFn::Min, &[]), ExtValue::Bottom);
        assert_eq!(apply_finval(&FinValFn::SumPlus, &ints(&[1, -2])), ExtValue::int(3));
        assert_eq!(
            apply_finval(&FinValFn::BSum(BigInt::from(2)), &ints(&[-1, -2, 5])),
            ExtValue::int(-2)
        );
    }

    #[test]
    fn infval_estimates() {
        let b = ExtValue::Bottom;
        assert_eq!(
            estimate_infval(InfValFn::LimAvg, &[ExtValue::int(1), b, ExtValue::int(3)], 0).unwrap(),
            rat(2)
        );
        let seq = [ExtValue::int(5), ExtValue::int(2), ExtValue::int(9)];
        assert_eq!(estimate_infval(InfValFn::Inf, &seq, 0).unwrap(), rat(2));
        let seq = [9, 1, 1, 1].map(ExtValue::int);
        assert_eq!(estimate_infval(InfValFn::LimInf, &seq, 1).unwrap(), rat(1));
        assert!(matches!(
            estimate_infval(InfValFn::Sup, &[ExtValue::Bottom], 0),
            Err(ValueError::EmptyAfterFilter)
        ));
    }

    #[test]
    fn ordering_and_text() {
        assert!(ExtValue::MinusInfinity < ExtValue::int(-100));
        assert!(ExtValue::int(100) < ExtValue::PlusInfinity);
        assert_eq!(ExtValue::Bottom.partial_cmp(&ExtValue::int(0)), None);
        for s in ["2/1", "-3/4", "+inf", "-inf", "bottom"] {
            assert_eq!(s.parse::<ExtValue>().unwrap().to_string(), s);
        }
        assert_eq!(parse_rational("6/4").unwrap(), ratio(3, 2));
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn accumulator_matches_direct_application() {
        let seqs = [vec![3, -1, 4], vec![-5, 6], vec![2, 2, 2]];
        let fns = [
            FinValFn::Min,
            FinValFn::Max,
            FinValFn::Sum,
            FinValFn::SumPlus,
            FinValFn::BSum(BigInt::from(4)),
        ];
        for s in &seqs {
            for g in &fns {
                let mut acc = FinAccumulator::Empty;
                for w in ints(s) {
                    acc.push(g, &w);
                }
                assert_eq!(acc.value(), apply_finval(g, &ints(s)), "{g:?} {s:?}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bsum_stays_in_bound(seq in proptest::collection::vec(-5i64..=5, 0..12), b in 1i64..6) {
                let bound = BigInt::from(b);
                if let ExtValue::Finite(v) = apply_finval(&FinValFn::BSum(bound), &ints(&seq)) {
                    prop_assert!(v.abs() <= rat(b));
                }
            }

            #[test]
            fn sumplus_dominates_sum(seq in proptest::collection::vec(-5i64..=5, 1..12)) {
                let s = apply_finval(&FinValFn::Sum, &ints(&seq));
                let p = apply_finval(&FinValFn::SumPlus, &ints(&seq));
                let (s, p) = (s.as_finite().unwrap().clone(), p.as_finite().unwrap().clone());
                prop_assert!(p >= s.abs());
                prop_assert!(p >= rat(0));
            }
        }
    }
}
