use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// `coeff * prod x_v^e_v` with `coeff > 0`. Exponents are kept sorted by
/// variable and zero exponents are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exps: Vec<(VarId, f64)>,
}

impl Monomial {
    pub fn constant(coeff: f64) -> Self {
        debug_assert!(coeff > 0.0, "monomial coefficient must be positive: {coeff}");
        Self { coeff, exps: Vec::new() }
    }

    pub fn var(v: VarId) -> Self {
        Self { coeff: 1.0, exps: vec![(v, 1.0)] }
    }

    pub fn new(coeff: f64, exps: impl IntoIterator<Item = (VarId, f64)>) -> Self {
        let mut m = Self::constant(coeff);
        for (v, e) in exps {
            m = m.mul(&Monomial { coeff: 1.0, exps: vec![(v, e)] });
        }
        m
    }

    pub fn is_constant(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { coeff: self.coeff * c, exps: self.exps.clone() }
    }

    pub fn mul(&self, other: &Monomial) -> Self {
        let mut exps = Vec::with_capacity(self.exps.len() + other.exps.len());
        let (mut i, mut j) = (0, 0);
        while i < self.exps.len() || j < other.exps.len() {
            let take = match (self.exps.get(i), other.exps.get(j)) {
                (Some(a), Some(b)) if a.0 == b.0 => {
                    let e = a.1 + b.1;
                    i += 1;
                    j += 1;
                    if e == 0.0 {
                        continue;
                    }
                    (a.0, e)
                }
                (Some(a), Some(b)) if a.0 < b.0 => {
                    i += 1;
                    *a
                }
                (Some(_), Some(b)) => {
                    j += 1;
                    *b
                }
                (Some(a), None) => {
                    i += 1;
                    *a
                }
                (None, Some(b)) => {
                    j += 1;
                    *b
                }
                (None, None) => unreachable!(),
            };
            exps.push(take);
        }
        Self { coeff: self.coeff * other.coeff, exps }
    }

    pub fn pow(&self, e: f64) -> Self {
        if e == 0.0 {
            return Self::constant(1.0);
        }
        Self {
            coeff: self.coeff.powf(e),
            exps: self.exps.iter().map(|&(v, x)| (v, x * e)).collect(),
        }
    }

    pub fn recip(&self) -> Self {
        self.pow(-1.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exps.iter().fold(self.coeff, |acc, &(v, e)| acc * x[v.0].powf(e))
    }

    pub fn ln_eval(&self, x: &[f64]) -> f64 {
        self.exps.iter().fold(self.coeff.ln(), |acc, &(v, e)| acc + e * x[v.0].ln())
    }

    fn key(&self) -> Vec<(usize, u64)> {
        self.exps.iter().map(|&(v, e)| (v.0, e.to_bits())).collect()
    }
}

/// Sum of monomials. Like terms are merged on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl From<Monomial> for Posynomial {
    fn from(m: Monomial) -> Self {
        Self { terms: vec![m] }
    }
}

impl Posynomial {
    pub fn new(terms: impl IntoIterator<Item = Monomial>) -> Self {
        let mut merged: BTreeMap<Vec<(usize, u64)>, Monomial> = BTreeMap::new();
        let mut order = Vec::new();
        for t in terms {
            let key = t.key();
            match merged.get_mut(&key) {
                Some(m) => m.coeff += t.coeff,
                None => {
                    order.push(key.clone());
                    merged.insert(key, t);
                }
            }
        }
        let terms = order.into_iter().map(|k| merged.remove(&k).unwrap()).collect();
        Self { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Posynomial) -> Self {
        Self::new(self.terms.iter().chain(&other.terms).cloned())
    }

    pub fn mul(&self, other: &Posynomial) -> Self {
        Self::new(
            self.terms
                .iter()
                .flat_map(|a| other.terms.iter().map(move |b| a.mul(b))),
        )
    }

    pub fn mul_mono(&self, m: &Monomial) -> Self {
        Self::new(self.terms.iter().map(|t| t.mul(m)))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }
}

/// `prod lhs_j(x) <= rhs(x)`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub label: String,
    /// Factors of the left side; factors shared between constraints are
    /// shared `Arc`s and are evaluated once per solver step.
    pub lhs: Vec<Arc<Posynomial>>,
    pub rhs: Monomial,
}

impl Constraint {
    pub fn new(label: impl Into<String>, lhs: Posynomial, rhs: Monomial) -> Self {
        Self { label: label.into(), lhs: vec![Arc::new(lhs)], rhs }
    }

    pub fn factored(label: impl Into<String>, lhs: Vec<Arc<Posynomial>>, rhs: Monomial) -> Self {
        Self { label: label.into(), lhs, rhs }
    }

    /// `lhs(x) / rhs(x)`; the constraint holds when this is at most one.
    pub fn ratio(&self, x: &[f64]) -> f64 {
        self.lhs.iter().map(|p| p.eval(x)).product::<f64>() / self.rhs.eval(x)
    }

    /// Left side multiplied out into a single posynomial.
    pub fn expanded(&self) -> Posynomial {
        self.lhs
            .iter()
            .fold(Posynomial::from(Monomial::constant(1.0)), |acc, p| acc.mul(p))
    }
}

/// Maximize `prod x_j^c_j` subject to the constraints and optional upper
/// bounds, over `x > 0`.
#[derive(Debug, Clone, Default)]
pub struct GpProblem {
    pub names: Vec<String>,
    pub objective: Vec<(VarId, f64)>,
    pub constraints: Vec<Constraint>,
    pub upper_bounds: Vec<Option<f64>>,
}

impl GpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> VarId {
        self.names.push(name.into());
        self.upper_bounds.push(None);
        VarId(self.names.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(VarId)
    }

    pub fn set_upper_bound(&mut self, v: VarId, ub: f64) -> Result<()> {
        if !(ub > 0.0) {
            return Err(domain(format!("upper bound must be positive, got {ub}")));
        }
        self.upper_bounds[v.0] = Some(ub);
        Ok(())
    }

    pub fn maximize(&mut self, objective: impl IntoIterator<Item = (VarId, f64)>) {
        self.objective = objective.into_iter().filter(|(_, c)| *c != 0.0).collect();
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    /// `sum c_j ln x_j`.
    pub fn log_objective(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|(v, c)| c * x[v.0].ln()).sum()
    }

    /// Largest `ratio - 1` over constraints and bounds; non-positive when
    /// `x` is feasible.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let c = self.constraints.iter().map(|c| c.ratio(x) - 1.0);
        let b = self
            .upper_bounds
            .iter()
            .enumerate()
            .filter_map(|(j, ub)| ub.map(|u| x[j] / u - 1.0));
        c.chain(b).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let check = |m: &Monomial, what: &str| -> Result<()> {
            if !(m.coeff > 0.0) || !m.coeff.is_finite() {
                return Err(domain(format!("{what}: coefficient {} is not positive", m.coeff)));
            }
            if let Some((v, e)) = m.exps.iter().find(|(v, e)| v.0 >= n || !e.is_finite()) {
                return Err(domain(format!("{what}: bad exponent {e} on variable {}", v.0)));
            }
            Ok(())
        };
        for c in &self.constraints {
            if c.lhs.iter().any(|p| p.is_empty()) {
                return Err(domain(format!("{}: empty posynomial", c.label)));
            }
            for p in &c.lhs {
                for t in &p.terms {
                    check(t, &c.label)?;
                }
            }
            check(&c.rhs, &c.label)?;
        }
        if let Some((v, c)) = self.objective.iter().find(|(v, c)| v.0 >= n || !c.is_finite()) {
            return Err(domain(format!("objective: bad exponent {c} on variable {}", v.0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

impl fmt::Display for GpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GpStatus::Optimal => "optimal",
            GpStatus::Infeasible => "infeasible",
            GpStatus::MaxIter => "max-iter",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpSolution {
    /// Indexed by `VarId`.
    pub values: Vec<f64>,
    /// `sum c_j ln x_j` at `values`.
    pub objective_value: f64,
    pub status: GpStatus,
    pub kkt_residual: f64,
    pub newton_steps: usize,
}

impl GpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_algebra() {
        let (x, y) = (VarId(0), VarId(1));
        let m = Monomial::new(2.0, [(x, 1.0), (y, -2.0)]);
        let n = Monomial::new(3.0, [(y, 2.0)]);
        let p = m.mul(&n);
        assert_eq!(p.coeff, 6.0);
        assert_eq!(p.exps, vec![(x, 1.0)]);
        assert!((m.eval(&[2.0, 4.0]) - 2.0 * 2.0 / 16.0).abs() < 1e-15);
        assert!((m.pow(0.5).eval(&[2.0, 4.0]) - (m.eval(&[2.0, 4.0])).sqrt()).abs() < 1e-15);
        assert!((m.recip().mul(&m).coeff - 1.0).abs() < 1e-15);
        assert!(m.recip().mul(&m).is_constant());
    }

    #[test]
    fn posynomial_product_merges_like_terms() {
        let x = Monomial::var(VarId(0));
        let one_plus_x = Posynomial::new([Monomial::constant(1.0), x.clone()]);
        let sq = one_plus_x.mul(&one_plus_x);
        assert_eq!(sq.len(), 3);
        let pt = [3.0];
        assert!((sq.eval(&pt) - 16.0).abs() < 1e-12);
    }
}
