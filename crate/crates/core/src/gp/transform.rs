use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::expr::{GpProblem, Monomial, Posynomial};

type SparseRow = Vec<(usize, f64)>;

/// `ln sum_t exp(a_t . y + b_t)`.
#[derive(Debug, Clone)]
pub struct LseFactor {
    pub rows: Vec<SparseRow>,
    pub offsets: Vec<f64>,
}

impl LseFactor {
    fn from_posynomial(p: &Posynomial) -> Self {
        let rows = p
            .terms
            .iter()
            .map(|t| t.exps.iter().map(|&(v, e)| (v.0, e)).collect())
            .collect();
        let offsets = p.terms.iter().map(|t| t.coeff.ln()).collect();
        Self { rows, offsets }
    }

    fn exponents(&self, y: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.offsets)
            .map(|(row, b)| b + row.iter().map(|&(j, a)| a * y[j]).sum::<f64>())
            .collect()
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        let z = self.exponents(y);
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + z.iter().map(|zi| (zi - m).exp()).sum::<f64>().ln()
    }

    /// Value, gradient and Hessian; `grad` and `hess` are overwritten.
    pub fn derivatives(&self, y: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) -> f64 {
        let z = self.exponents(y);
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = z.iter().map(|zi| (zi - m).exp()).collect();
        let total: f64 = w.iter().sum();
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.fill(0.0);
        for (row, wi) in self.rows.iter().zip(&w) {
            let p = wi / total;
            for &(j, a) in row {
                grad[j] += p * a;
                for &(l, b) in row {
                    hess[(j, l)] += p * a * b;
                }
            }
        }
        let n = grad.len();
        for j in 0..n {
            if grad[j] == 0.0 {
                continue;
            }
            for l in 0..n {
                hess[(j, l)] -= grad[j] * grad[l];
            }
        }
        m + total.ln()
    }
}

/// `sum_{f in factors} lse_f(y) + a . y + b <= 0`.
#[derive(Debug, Clone)]
pub struct ConvexConstraint {
    pub label: String,
    pub factors: Vec<usize>,
    pub linear: SparseRow,
    pub offset: f64,
}

/// Log-space form of a [`GpProblem`]: maximize `c . y` subject to convex
/// constraints. Posynomial factors shared between constraints appear once
/// in `factors`.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    pub n: usize,
    pub c: Vec<f64>,
    pub factors: Vec<LseFactor>,
    pub constraints: Vec<ConvexConstraint>,
    /// Labels of variable-free constraints that can never hold.
    pub violated_constants: Vec<String>,
}

impl ConvexProgram {
    pub fn factor_values(&self, y: &[f64]) -> Vec<f64> {
        self.factors.iter().map(|f| f.value(y)).collect()
    }

    pub fn constraint_value(&self, i: usize, y: &[f64], factor_values: &[f64]) -> f64 {
        let c = &self.constraints[i];
        c.factors.iter().map(|&f| factor_values[f]).sum::<f64>()
            + c.linear.iter().map(|&(j, a)| a * y[j]).sum::<f64>()
            + c.offset
    }

    pub fn constraint_values(&self, y: &[f64]) -> Vec<f64> {
        let fv = self.factor_values(y);
        (0..self.constraints.len())
            .map(|i| self.constraint_value(i, y, &fv))
            .collect()
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        self.c.iter().zip(y).map(|(c, y)| c * y).sum()
    }
}

fn add_mono(linear: &mut BTreeMap<usize, f64>, offset: &mut f64, m: &Monomial, sign: f64) {
    *offset += sign * m.coeff.ln();
    for &(v, e) in &m.exps {
        *linear.entry(v.0).or_insert(0.0) += sign * e;
    }
}

pub fn log_transform(problem: &GpProblem) -> ConvexProgram {
    let n = problem.num_vars();
    let mut c = vec![0.0; n];
    for &(v, e) in &problem.objective {
        c[v.0] += e;
    }
    let mut pool: Vec<Arc<Posynomial>> = Vec::new();
    let mut factors = Vec::new();
    let mut constraints = Vec::new();
    let mut violated_constants = Vec::new();

    for con in &problem.constraints {
        let mut linear = BTreeMap::new();
        let mut offset = 0.0;
        let mut idx = Vec::new();
        for p in &con.lhs {
            if p.len() == 1 {
                add_mono(&mut linear, &mut offset, &p.terms[0], 1.0);
                continue;
            }
            let found = pool
                .iter()
                .position(|q| Arc::ptr_eq(q, p) || (q.len() == p.len() && **q == **p));
            let f = found.unwrap_or_else(|| {
                pool.push(Arc::clone(p));
                factors.push(LseFactor::from_posynomial(p));
                pool.len() - 1
            });
            idx.push(f);
        }
        add_mono(&mut linear, &mut offset, &con.rhs, -1.0);
        let linear: SparseRow = linear.into_iter().filter(|&(_, a)| a != 0.0).collect();
        if idx.is_empty() && linear.is_empty() {
            if offset > 1e-12 {
                violated_constants.push(con.label.clone());
            }
            continue;
        }
        constraints.push(ConvexConstraint { label: con.label.clone(), factors: idx, linear, offset });
    }
    for (j, ub) in problem.upper_bounds.iter().enumerate() {
        if let Some(u) = ub {
            constraints.push(ConvexConstraint {
                label: format!("{} <= {u}", problem.names[j]),
                factors: Vec::new(),
                linear: vec![(j, 1.0)],
                offset: -u.ln(),
            });
        }
    }
    ConvexProgram { n, c, factors, constraints, violated_constants }
}
