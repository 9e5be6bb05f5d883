use nalgebra::{DMatrix, DVector};

use super::expr::{GpProblem, GpSolution, GpStatus};
use super::transform::{log_transform, ConvexProgram};
use crate::error::{domain, Error, Result};

const MAX_LOG_STEP: f64 = 5.0;
const NOISE_DECREMENT: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stop once the duality gap `m / t` falls below this.
    pub tol: f64,
    pub mu: f64,
    pub t0: f64,
    pub ls_alpha: f64,
    pub ls_beta: f64,
    /// Newton steps allowed in each phase.
    pub max_newton: usize,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            mu: 10.0,
            t0: 1.0,
            ls_alpha: 0.25,
            ls_beta: 0.5,
            max_newton: 500,
            newton_tol: 1e-10,
        }
    }
}

/// Barrier subproblem. In phase one an extra slack variable `s` is appended
/// and the constraints read `g_i(y) <= s`; the goal is to push `s` below 0.
struct Barrier<'a> {
    prog: &'a ConvexProgram,
    phase_one: bool,
}

struct Local {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    slacks: Vec<f64>,
}

impl Barrier<'_> {
    fn dim(&self) -> usize {
        self.prog.n + self.phase_one as usize
    }

    /// Linear objective being minimized.
    fn cost(&self, j: usize) -> f64 {
        match (self.phase_one, j == self.prog.n) {
            (true, true) => 1.0,
            (true, false) => 0.0,
            (false, _) => -self.prog.c[j],
        }
    }

    /// `g_i(y) - s`, which must stay negative.
    fn slacks(&self, z: &[f64]) -> Vec<f64> {
        let y = &z[..self.prog.n];
        let fv = self.prog.factor_values(y);
        let s = if self.phase_one { z[self.prog.n] } else { 0.0 };
        (0..self.prog.constraints.len())
            .map(|i| self.prog.constraint_value(i, y, &fv) - s)
            .collect()
    }

    fn local(&self, z: &[f64], t: f64) -> Local {
        let n = self.prog.n;
        let d = self.dim();
        let y = &z[..n];
        let nf = self.prog.factors.len();
        let mut fgrad = vec![vec![0.0; n]; nf];
        let mut fhess = vec![DMatrix::zeros(n, n); nf];
        let mut fval = vec![0.0; nf];
        for f in 0..nf {
            fval[f] = self.prog.factors[f].derivatives(y, &mut fgrad[f], &mut fhess[f]);
        }
        let s = if self.phase_one { z[n] } else { 0.0 };
        let mut grad = DVector::from_fn(d, |j, _| t * self.cost(j));
        let mut hess = DMatrix::zeros(d, d);
        let mut factor_weight = vec![0.0; nf];
        let mut slacks = Vec::with_capacity(self.prog.constraints.len());
        for (i, con) in self.prog.constraints.iter().enumerate() {
            let g = self.prog.constraint_value(i, y, &fval) - s;
            slacks.push(g);
            let w = -1.0 / g;
            let mut dg = DVector::zeros(d);
            for &f in &con.factors {
                factor_weight[f] += w;
                for j in 0..n {
                    dg[j] += fgrad[f][j];
                }
            }
            for &(j, a) in &con.linear {
                dg[j] += a;
            }
            if self.phase_one {
                dg[n] = -1.0;
            }
            grad.axpy(w, &dg, 1.0);
            hess.ger(w * w, &dg, &dg, 1.0);
        }
        for f in 0..nf {
            if factor_weight[f] != 0.0 {
                let mut block = hess.view_mut((0, 0), (n, n));
                block += &fhess[f] * factor_weight[f];
            }
        }
        Local { grad, hess, slacks }
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = hess.clone().cholesky() {
        return Some(ch.solve(&(-grad)));
    }
    let scale = hess.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut reg = 1e-10 * scale;
    while reg < 1e10 * scale {
        let mut h = hess.clone();
        for j in 0..h.nrows() {
            h[(j, j)] += reg;
        }
        if let Some(ch) = h.cholesky() {
            return Some(ch.solve(&(-grad)));
        }
        reg *= 10.0;
    }
    None
}

enum Centering {
    Centered,
    /// Phase one reached a strictly feasible point.
    Feasible,
    OutOfSteps,
}

fn center(
    b: &Barrier,
    z: &mut Vec<f64>,
    t: f64,
    steps: &mut usize,
    opts: &SolverOptions,
) -> Result<Centering> {
    let mut prev_decrement = f64::INFINITY;
    loop {
        if *steps >= opts.max_newton {
            return Ok(Centering::OutOfSteps);
        }
        let loc = b.local(z, t);
        let dz = newton_direction(&loc.hess, &loc.grad).ok_or_else(|| Error::Solver {
            iteration: *steps,
            reason: "Newton system could not be factorized".into(),
        })?;
        let slope = loc.grad.dot(&dz);
        let decrement = -slope / 2.0;
        log::trace!("phase1={} t={t:.1e} step={} decrement={decrement:.3e}", b.phase_one, *steps);
        // Inside the quadratic region the decrement should collapse; once it
        // stops shrinking it is rounding noise and the point is centered.
        let stalled = decrement < NOISE_DECREMENT && decrement > 0.25 * prev_decrement;
        if decrement <= opts.newton_tol || stalled {
            return Ok(Centering::Centered);
        }
        prev_decrement = decrement;
        // Decrease of the barrier function, evaluated as a difference to
        // avoid cancellation against the large `t * cost` term.
        let decrease = |step: f64| -> Option<f64> {
            let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, d)| a + step * d).collect();
            let slacks = b.slacks(&trial);
            if slacks.iter().any(|g| !(*g < 0.0)) {
                return None;
            }
            let lin: f64 = (0..b.dim()).map(|j| b.cost(j) * dz[j]).sum::<f64>() * step * t;
            let bar: f64 = slacks.iter().zip(&loc.slacks).map(|(n, o)| (n / o).ln()).sum();
            Some(lin - bar)
        };
        // Cap the move in log space; directions the barrier leaves flat
        // (e.g. phase one with a nearly unconstrained slack) otherwise give
        // enormous regularized steps.
        let longest = dz.amax();
        let mut step = if longest > MAX_LOG_STEP { MAX_LOG_STEP / longest } else { 1.0 };
        let mut accepted = false;
        for _ in 0..60 {
            if let Some(df) = decrease(step) {
                if df <= opts.ls_alpha * step * slope {
                    accepted = true;
                    break;
                }
            }
            step *= opts.ls_beta;
        }
        if !accepted {
            // Rounding keeps the line search from making progress; the
            // point is as centered as floating point allows.
            return Ok(Centering::Centered);
        }
        for (a, d) in z.iter_mut().zip(dz.iter()) {
            *a += step * d;
        }
        *steps += 1;
        if b.phase_one && z[b.prog.n] < 0.0 {
            return Ok(Centering::Feasible);
        }
        if z[..b.prog.n].iter().any(|v| v.abs() > 700.0) {
            return Err(Error::Solver {
                iteration: *steps,
                reason: "iterates diverge; problem appears unbounded".into(),
            });
        }
    }
}

/// Barrier method on the log-transformed problem, starting from `x0`
/// (all ones if absent). A phase-one problem is solved first when `x0` is
/// not strictly feasible.
pub fn solve(problem: &GpProblem, x0: Option<&[f64]>, opts: &SolverOptions) -> Result<GpSolution> {
    problem.validate()?;
    let prog = log_transform(problem);
    let n = prog.n;
    let mut y: Vec<f64> = match x0 {
        Some(x) => {
            if x.len() != n || x.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(domain("starting point must have one positive entry per variable"));
            }
            x.iter().map(|v| v.ln()).collect()
        }
        None => vec![0.0; n],
    };
    let finish = |y: &[f64], status, kkt, steps| GpSolution {
        values: y.iter().map(|v| v.exp()).collect(),
        objective_value: prog.objective(y),
        status,
        kkt_residual: kkt,
        newton_steps: steps,
    };
    if !prog.violated_constants.is_empty() {
        return Ok(finish(&y, GpStatus::Infeasible, 0.0, 0));
    }
    let m = prog.constraints.len() as f64;
    let mut total_steps = 0;

    let worst = prog.constraint_values(&y).into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !(worst < 0.0) {
        let b = Barrier { prog: &prog, phase_one: true };
        let mut z = y.clone();
        z.push(worst.max(0.0) + 1.0);
        let mut t = opts.t0;
        let mut steps = 0;
        loop {
            match center(&b, &mut z, t, &mut steps, opts)? {
                Centering::Feasible => break,
                Centering::OutOfSteps => {
                    return Ok(finish(&z[..n], GpStatus::Infeasible, 0.0, steps));
                }
                Centering::Centered => {
                    let s = z[n];
                    if s - m / t > 0.0 || m / t < 1e-12 {
                        log::debug!("phase one: min slack {s:.3e} at gap {:.1e}", m / t);
                        return Ok(finish(&z[..n], GpStatus::Infeasible, 0.0, steps));
                    }
                    if s < 0.0 {
                        break;
                    }
                    t *= opts.mu;
                }
            }
        }
        total_steps += steps;
        z.truncate(n);
        y = z;
    }

    let b = Barrier { prog: &prog, phase_one: false };
    let kkt = |y: &[f64], t: f64| {
        if m == 0.0 {
            return prog.c.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        }
        let loc = b.local(y, t);
        loc.grad.amax() / t
    };
    if m == 0.0 {
        if prog.c.iter().any(|c| *c != 0.0) {
            return Err(Error::Solver { iteration: 0, reason: "unconstrained objective is unbounded".into() });
        }
        return Ok(finish(&y, GpStatus::Optimal, 0.0, total_steps));
    }
    let mut t = opts.t0;
    let mut steps = 0;
    loop {
        let outcome = center(&b, &mut y, t, &mut steps, opts)?;
        if matches!(outcome, Centering::OutOfSteps) {
            let r = kkt(&y, t);
            return Ok(finish(&y, GpStatus::MaxIter, r, total_steps + steps));
        }
        if m / t < opts.tol {
            let r = kkt(&y, t);
            return Ok(finish(&y, GpStatus::Optimal, r, total_steps + steps));
        }
        t *= opts.mu;
    }
}

#[cfg(test)]
mod tests {
    use super::super::expr::{Constraint, Monomial, Posynomial, VarId};
    use super::*;

    fn box_problem() -> GpProblem {
        // maximize x*y s.t. x + y <= 2  ->  x = y = 1
        let mut gp = GpProblem::new();
        let x = gp.add_var("x");
        let y = gp.add_var("y");
        gp.maximize([(x, 1.0), (y, 1.0)]);
        gp.push(Constraint::new(
            "sum",
            Posynomial::new([Monomial::var(x), Monomial::var(y)]),
            Monomial::constant(2.0),
        ));
        gp
    }

    #[test]
    fn solves_symmetric_problem() {
        let sol = solve(&box_problem(), None, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, GpStatus::Optimal);
        assert!((sol.values[0] - 1.0).abs() < 1e-6, "{:?}", sol.values);
        assert!((sol.values[1] - 1.0).abs() < 1e-6);
        assert!(sol.kkt_residual < 1e-6);
    }

    #[test]
    fn infeasible_start_goes_through_phase_one() {
        let sol = solve(&box_problem(), Some(&[10.0, 5.0]), &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, GpStatus::Optimal);
        assert!((sol.values[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn detects_infeasibility() {
        let mut gp = box_problem();
        gp.push(Constraint::new("low", Monomial::constant(3.0).into(), Monomial::var(VarId(0))));
        let sol = solve(&gp, None, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, GpStatus::Infeasible);
    }

    #[test]
    fn respects_upper_bounds() {
        let mut gp = box_problem();
        gp.set_upper_bound(VarId(0), 0.5).unwrap();
        let sol = solve(&gp, None, &SolverOptions::default()).unwrap();
        assert!((sol.values[0] - 0.5).abs() < 1e-6);
        assert!((sol.values[1] - 1.5).abs() < 1e-6);
    }
}
