use super::expr::GpProblem;
use crate::error::{domain, Error, Result};

const MAX_VARS: usize = 5;

#[derive(Debug, Clone)]
pub struct GridPoint {
    pub values: Vec<f64>,
    /// `sum c_j ln x_j`.
    pub objective: f64,
}

/// Brute-force search over a logarithmic grid with `resolution` points per
/// variable, followed by one refinement grid spanning two coarse steps either side of the best
/// point.
/// Returns `None` when no grid point is feasible. Meant as a reference for
/// small problems only.
pub fn grid_oracle(
    problem: &GpProblem,
    ranges: &[(f64, f64)],
    resolution: usize,
) -> Result<Option<GridPoint>> {
    let n = problem.num_vars();
    if n > MAX_VARS {
        return Err(Error::Capacity(format!("grid oracle handles at most {MAX_VARS} variables, got {n}")));
    }
    if ranges.len() != n {
        return Err(domain(format!("expected {n} ranges, got {}", ranges.len())));
    }
    if resolution < 2 {
        return Err(domain("grid resolution must be at least 2"));
    }
    if ranges.iter().any(|&(lo, hi)| !(lo > 0.0 && hi >= lo && hi.is_finite())) {
        return Err(domain("grid ranges must satisfy 0 < lo <= hi < inf"));
    }
    let logs: Vec<(f64, f64)> = ranges.iter().map(|&(lo, hi)| (lo.ln(), hi.ln())).collect();
    let best = scan(problem, &logs, resolution);
    let Some(best) = best else { return Ok(None) };
    let refined: Vec<(f64, f64)> = logs
        .iter()
        .zip(&best.values)
        .map(|(&(lo, hi), x)| {
            let step = 2.0 * (hi - lo) / (resolution - 1) as f64;
            let c = x.ln();
            ((c - step).max(lo), (c + step).min(hi))
        })
        .collect();
    Ok(match scan(problem, &refined, resolution) {
        Some(p) if p.objective > best.objective => Some(p),
        _ => Some(best),
    })
}

fn scan(problem: &GpProblem, logs: &[(f64, f64)], res: usize) -> Option<GridPoint> {
    let n = logs.len();
    let axes: Vec<Vec<f64>> = logs
        .iter()
        .map(|&(lo, hi)| {
            (0..res)
                .map(|i| (lo + (hi - lo) * i as f64 / (res - 1) as f64).exp())
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut best: Option<GridPoint> = None;
    loop {
        for j in 0..n {
            x[j] = axes[j][idx[j]];
        }
        if problem.max_violation(&x) <= 1e-12 {
            let obj = problem.log_objective(&x);
            if best.as_ref().is_none_or(|b| obj > b.objective) {
                best = Some(GridPoint { values: x.clone(), objective: obj });
            }
        }
        let mut j = 0;
        loop {
            if j == n {
                return best;
            }
            idx[j] += 1;
            if idx[j] < res {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}
