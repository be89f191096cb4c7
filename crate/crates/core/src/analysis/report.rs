use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::value::{ExtValue, Rational};

/// Finite list of point masses, sorted by value, equal values merged.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Distribution {
    pub points: Vec<(ExtValue, Rational)>,
    /// Mass the analysis could not place (only for inexact reports).
    pub unresolved: Rational,
}

impl Distribution {
    pub fn from_points(points: impl IntoIterator<Item = (ExtValue, Rational)>) -> Self {
        let mut pts: Vec<(ExtValue, Rational)> = points
            .into_iter()
            .filter(|(v, p)| !p.is_zero() && !v.is_bottom())
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("bottom filtered"));
        let mut merged: Vec<(ExtValue, Rational)> = Vec::with_capacity(pts.len());
        for (v, p) in pts {
            match merged.last_mut() {
                Some((lv, lp)) if *lv == v => *lp += p,
                _ => merged.push((v, p)),
            }
        }
        Distribution { points: merged, unresolved: Rational::zero() }
    }

    pub fn point(v: ExtValue) -> Self {
        Self::from_points([(v, Rational::one())])
    }

    pub fn total(&self) -> Rational {
        self.points.iter().map(|(_, p)| p).sum::<Rational>() + &self.unresolved
    }

    /// P(value <= lambda).
    pub fn cdf(&self, lambda: &ExtValue) -> Rational {
        self.points
            .iter()
            .filter(|(v, _)| v <= lambda)
            .map(|(_, p)| p.clone())
            .sum()
    }

    pub fn expected(&self) -> Result<ExtValue> {
        let has = |x: &ExtValue| self.points.iter().any(|(v, _)| v == x);
        match (has(&ExtValue::MinusInfinity), has(&ExtValue::PlusInfinity)) {
            (true, true) => Err(Error::UndefinedExpected),
            (true, false) => Ok(ExtValue::MinusInfinity),
            (false, true) => Ok(ExtValue::PlusInfinity),
            (false, false) => Ok(ExtValue::Finite(
                self.points
                    .iter()
                    .map(|(v, p)| v.as_finite().expect("finite point") * p)
                    .sum(),
            )),
        }
    }

    pub fn negate(&self) -> Self {
        let mut d = Self::from_points(self.points.iter().map(|(v, p)| (v.negate(), p.clone())));
        d.unresolved = self.unresolved.clone();
        d
    }

    /// Smallest value λ with P(value <= λ) = 1, if the mass is fully placed.
    pub fn almost_sure_bound(&self) -> Option<ExtValue> {
        if !self.unresolved.is_zero() {
            return None;
        }
        self.points.last().map(|(v, _)| v.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Method {
    LimInfScc,
    /// `bound` is the clipping bound when Sum slaves had to be clipped.
    InfExact { bound: Option<BigInt> },
    /// `bound` is `None` when the limit pre-check already settled the value.
    InfApprox { epsilon: Rational, bound: Option<BigInt>, size: BigInt, min_prob: Rational },
    SupSumPlusCdf { lambda: Rational, bound: BigInt },
    LimAvgProduct,
    WaDirect,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::LimInfScc => "liminf-scc",
            Method::InfExact { .. } => "inf-exact",
            Method::InfApprox { .. } => "inf-approx",
            Method::SupSumPlusCdf { .. } => "sup-sumplus-cdf",
            Method::LimAvgProduct => "limavg-product",
            Method::WaDirect => "wa-direct",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalysisReport {
    /// `None` when only the distribution below a threshold is meaningful.
    pub expected: Option<ExtValue>,
    pub distribution: Distribution,
    pub method: Method,
    pub exact: bool,
}

impl AnalysisReport {
    pub fn from_distribution(distribution: Distribution, method: Method) -> Result<Self> {
        let expected = Some(distribution.expected()?);
        Ok(AnalysisReport { expected, distribution, method, exact: true })
    }

    /// Report of the automaton with all weights negated.
    pub fn negate(&self) -> Self {
        AnalysisReport {
            expected: self.expected.as_ref().map(ExtValue::negate),
            distribution: self.distribution.negate(),
            method: self.method.clone(),
            exact: self.exact,
        }
    }

    pub fn cdf(&self, lambda: &ExtValue) -> Rational {
        self.distribution.cdf(lambda)
    }

    pub fn almost_sure_bound(&self) -> Option<ExtValue> {
        self.distribution.almost_sure_bound()
    }
}
