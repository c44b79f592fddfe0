use nalgebra::{DMatrix, DVector};

use super::{ConstraintSystem, SolveResult};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol_residual: f64,
    pub max_iterations: usize,
    pub lambda_init: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol_residual: 1e-10, max_iterations: 100, lambda_init: 1e-3 }
    }
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn damped_step(jtj: &DMatrix<f64>, g: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let mut m = jtj.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += lambda;
    }
    let rhs = -g;
    match m.clone().cholesky() {
        Some(ch) => Some(ch.solve(&rhs)),
        None => m.svd(true, true).solve(&rhs, 1e-14).ok(),
    }
}

/// Levenberg-Marquardt from the system's initial parameters. Every trial
/// step, accepted or not, counts as one iteration.
pub fn solve_system(sys: &ConstraintSystem, opts: &SolverOptions) -> SolveResult {
    let mut x = sys.params().values().to_vec();
    let mut r = sys.residuals(&x);
    let mut rn = norm(&r);
    let mut lambda = opts.lambda_init;
    let mut iterations = 0;
    'outer: while rn > opts.tol_residual && iterations < opts.max_iterations && !x.is_empty() {
        let j = sys.jacobian(&x);
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        loop {
            if iterations >= opts.max_iterations {
                break 'outer;
            }
            iterations += 1;
            let Some(delta) = damped_step(&jtj, &g, lambda) else { break 'outer };
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            let rt = sys.residuals(&trial);
            let tn = norm(&rt);
            if tn.is_finite() && tn < rn {
                x = trial;
                r = rt;
                rn = tn;
                lambda = (lambda / 10.0).max(1e-15);
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break 'outer;
            }
        }
    }
    let params = sys.params().with_values(x);
    SolveResult { curves: params.to_curves(), params, residual_norm: rn, iterations, converged: rn <= opts.tol_residual }
}
