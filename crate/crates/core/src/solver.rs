//! Deflated conjugate gradients for the singular finite volume system.
//!
//! The operator has the constants as its kernel. The right-hand side is
//! required to be orthogonal to that kernel, iterates are kept orthogonal to
//! it, and the result is shifted to zero area-weighted mean.

use crate::error::SolverError;
use crate::fv::{NodalField, SparseSystem};
use crate::sparse::{dot, norm2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub rel_tol: f64,
    /// `None` means `⌈10 √N⌉`.
    pub max_iter: Option<usize>,
    /// Re-project the iterate onto the complement of the constants every this many iterations.
    pub reproject_every: usize,
    /// Diagonal (Jacobi) preconditioning.
    pub jacobi: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { rel_tol: 1e-10, max_iter: None, reproject_every: 50, jacobi: false }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(SolverError::BadOptions(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol)));
        }
        if self.max_iter == Some(0) {
            return Err(SolverError::BadOptions("max_iter must be at least 1".into()));
        }
        if self.reproject_every == 0 {
            return Err(SolverError::BadOptions("reproject_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn iteration_limit(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| (10.0 * (n as f64).sqrt()).ceil() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖A u − b‖₂ / ‖b‖₂`, recomputed from the returned solution.
    pub final_relative_residual: f64,
    /// `Σ m_a(V_i) u_i / Σ m_a(V_i)`.
    pub mean_of_solution: f64,
    /// Relative residual after every iteration.
    pub history: Vec<f64>,
}

/// `v − (Σ aᵢ vᵢ / Σ aᵢ) 1`.
pub fn deflate(v: &[f64], areas: &[f64]) -> Vec<f64> {
    assert_eq!(v.len(), areas.len());
    let mean = weighted_mean(v, areas);
    v.iter().map(|x| x - mean).collect()
}

fn weighted_mean(v: &[f64], areas: &[f64]) -> f64 {
    dot(v, areas) / areas.iter().sum::<f64>()
}

fn project_out_constants(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Solves `A u = b` with `Σ m_a(V_i) u_i = 0`.
///
/// `b` must already be deflated; a right-hand side with
/// `|Σ b_i| > 1e-8 ‖b‖₁` is rejected as incompatible.
pub fn solve(sys: &SparseSystem, opts: &SolveOptions) -> Result<(NodalField, SolveReport), SolverError> {
    opts.validate()?;
    let n = sys.len();
    if sys.matrix.nrows() != n || sys.cell_areas.len() != n {
        return Err(SolverError::DimensionMismatch { expected: n, got: sys.matrix.nrows() });
    }
    let b = &sys.rhs;
    let l1: f64 = b.iter().map(|v| v.abs()).sum();
    let sum: f64 = b.iter().sum();
    if sum.abs() > 1e-8 * l1 {
        return Err(SolverError::IncompatibleSource { sum, l1 });
    }
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        let report = SolveReport { iterations: 0, final_relative_residual: 0.0, mean_of_solution: 0.0, history: vec![] };
        return Ok((NodalField::zeros(n), report));
    }

    let (x, iterations, mut history) = run_cg(sys, opts, b_norm, |_| {});
    let mut ap = vec![0.0; n];
    let u = deflate(&x, &sys.cell_areas);
    sys.matrix.mul_vec_into(&u, &mut ap);
    let residual: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
    let final_rel = norm2(&residual) / b_norm;
    if final_rel > opts.rel_tol {
        history.push(final_rel);
        return Err(SolverError::NotConverged { iterations, history });
    }
    let mean = weighted_mean(&u, &sys.cell_areas);
    let report = SolveReport { iterations, final_relative_residual: final_rel, mean_of_solution: mean, history };
    Ok((NodalField::new(u), report))
}

/// Plain or Jacobi-preconditioned CG from a zero initial guess. `observe`
/// sees every iterate.
fn run_cg<F: FnMut(&[f64])>(
    sys: &SparseSystem,
    opts: &SolveOptions,
    b_norm: f64,
    mut observe: F,
) -> (Vec<f64>, usize, Vec<f64>) {
    let n = sys.len();
    let b = &sys.rhs;
    let limit = opts.iteration_limit(n);
    let inv_diag: Option<Vec<f64>> = opts.jacobi.then(|| sys.matrix.diagonal().iter().map(|d| 1.0 / d).collect());
    let precondition = |r: &[f64]| -> Vec<f64> {
        match &inv_diag {
            Some(w) => r.iter().zip(w).map(|(a, b)| a * b).collect(),
            None => r.to_vec(),
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < limit {
        sys.matrix.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        iterations += 1;
        observe(&x);

        if iterations % opts.reproject_every == 0 {
            project_out_constants(&mut x);
        }
        let rel = norm2(&r) / b_norm;
        history.push(rel);
        if rel <= opts.rel_tol {
            // confirm against the true residual before stopping
            sys.matrix.mul_vec_into(&x, &mut ap);
            r = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
            let true_rel = norm2(&r) / b_norm;
            if true_rel <= opts.rel_tol {
                break;
            }
            *history.last_mut().unwrap() = true_rel;
            z = precondition(&r);
            p = z.clone();
            rz = dot(&r, &z);
            continue;
        }
        z = precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }

    (x, iterations, history)
}
