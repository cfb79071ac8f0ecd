//! Unpreconditioned Krylov solvers for the shifted systems `(E + s A) x = b`
//! that appear in every implicit substep.
//!
//! CG handles symmetric operators, BiCGStab everything else; [`Method::Auto`]
//! picks from the operator's symmetry tag. Both start from a zero guess, run
//! in a fixed order, and re-check the true residual `b - M x` before
//! returning. When the recurrence residual drifts from the true one the
//! iteration restarts from the current iterate.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::operators::{LinearGridOperator, Symmetry};
use crate::scalar::{axpy, dot, norm2, Real};
use crate::sparse::CsrMatrix;

/// Square linear map applied to plain slices.
pub trait LinearMap<T: Real> {
    fn dim(&self) -> usize;
    /// `out = M x`
    fn apply(&self, x: &[T], out: &mut [T]);
    fn is_symmetric(&self) -> bool;
}

impl<T: Real> LinearMap<T> for LinearGridOperator<T> {
    fn dim(&self) -> usize {
        LinearGridOperator::dim(self)
    }
    fn apply(&self, x: &[T], out: &mut [T]) {
        self.apply_slice(x, out);
    }
    fn is_symmetric(&self) -> bool {
        self.symmetry() == Symmetry::Symmetric
    }
}

impl<T: Real> LinearMap<T> for CsrMatrix<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[T], out: &mut [T]) {
        self.mul_vec_into(x, out);
    }
    fn is_symmetric(&self) -> bool {
        self.transpose_defect(T::one()) == T::zero()
    }
}

/// `E + coeff * A`
#[derive(Clone, Copy, Debug)]
pub struct Shifted<'a, T> {
    op: &'a LinearGridOperator<T>,
    coeff: T,
}

impl<'a, T: Real> Shifted<'a, T> {
    pub fn new(op: &'a LinearGridOperator<T>, coeff: T) -> Self {
        Shifted { op, coeff }
    }
}

impl<T: Real> LinearMap<T> for Shifted<'_, T> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply(&self, x: &[T], out: &mut [T]) {
        self.op.apply_slice(x, out);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi + self.coeff * *o;
        }
    }
    fn is_symmetric(&self) -> bool {
        self.op.symmetry() == Symmetry::Symmetric || self.coeff == T::zero()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// CG for symmetric maps, BiCGStab otherwise.
    Auto,
    Cg,
    BiCgStab,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Relative residual target `||b - M x|| / ||b||`.
    pub tolerance: T,
    /// Defaults to ten times the dimension.
    pub max_iterations: Option<usize>,
    pub method: Method,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            tolerance: T::floor_tol(1e-12),
            max_iterations: None,
            method: Method::Auto,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > T::zero() && self.tolerance < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidArgument("max iterations must be >= 1".into()));
        }
        Ok(())
    }

    fn max_iter(&self, dim: usize) -> usize {
        self.max_iterations.unwrap_or(10 * dim.max(1))
    }
}

/// Accepted solution with the iteration count and verified relative residual.
#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub residual: T,
}

fn check_dims<T: Real, M: LinearMap<T> + ?Sized>(m: &M, b: &[T]) -> Result<()> {
    if b.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: b.len(),
        });
    }
    Ok(())
}

fn true_residual<T: Real, M: LinearMap<T> + ?Sized>(m: &M, b: &[T], x: &[T], r: &mut [T]) -> T {
    m.apply(x, r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm2(r)
}

/// Conjugate gradients for a symmetric positive definite `m`.
pub fn solve_spd<T: Real, M: LinearMap<T> + ?Sized>(m: &M, b: &[T], cfg: &SolverConfig<T>) -> Result<Solution<T>> {
    cfg.validate()?;
    check_dims(m, b)?;
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok(Solution {
            x,
            iterations: 0,
            residual: T::zero(),
        });
    }
    let target = cfg.tolerance * bnorm;
    let max_iter = cfg.max_iter(n);
    let mut r = b.to_vec();
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut it = 0;
    loop {
        p.copy_from_slice(&r);
        let mut rr = dot(&r, &r);
        while it < max_iter && rr.sqrt() > target {
            m.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > T::zero()) {
                return Err(Error::Breakdown {
                    method: "CG",
                    iterations: it,
                    residual: (rr.sqrt() / bnorm).to_f64_lossy(),
                });
            }
            let alpha = rr / pq;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &q, &mut r);
            it += 1;
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            for (pi, &ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            rr = rr_new;
        }
        let res = true_residual(m, b, &x, &mut r);
        if res <= target {
            return Ok(Solution {
                x,
                iterations: it,
                residual: res / bnorm,
            });
        }
        if it >= max_iter {
            return Err(Error::NotConverged {
                method: "CG",
                iterations: it,
                residual: (res / bnorm).to_f64_lossy(),
            });
        }
    }
}

enum BiCgOutcome {
    Converged,
    Exhausted,
    Breakdown,
}

/// One BiCGStab cycle from the current `x`; `it` counts iterations across cycles.
fn bicgstab_cycle<T: Real, M: LinearMap<T> + ?Sized>(
    m: &M,
    b: &[T],
    x: &mut [T],
    target: T,
    max_iter: usize,
    it: &mut usize,
) -> BiCgOutcome {
    let n = b.len();
    let mut r = vec![T::zero(); n];
    if true_residual(m, b, x, &mut r) <= target {
        return BiCgOutcome::Converged;
    }
    let r_hat = r.clone();
    let r_hat_norm = norm2(&r_hat);
    let tiny = T::epsilon() * T::epsilon();
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut p = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    while *it < max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() <= tiny * r_hat_norm * norm2(&r) {
            return BiCgOutcome::Breakdown;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        m.apply(&p, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() <= tiny * r_hat_norm * norm2(&v) || denom == T::zero() {
            return BiCgOutcome::Breakdown;
        }
        alpha = rho_new / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        *it += 1;
        if norm2(&s) <= target {
            axpy(alpha, &p, x);
            return BiCgOutcome::Converged;
        }
        m.apply(&s, &mut t);
        let tt = dot(&t, &t);
        if tt == T::zero() {
            return BiCgOutcome::Breakdown;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= target {
            return BiCgOutcome::Converged;
        }
        if omega == T::zero() {
            return BiCgOutcome::Breakdown;
        }
        rho = rho_new;
    }
    BiCgOutcome::Exhausted
}

/// BiCGStab for a general nonsingular `m`. A breakdown triggers one restart
/// from a perturbed iterate; a second breakdown is an error.
pub fn solve_general<T: Real, M: LinearMap<T> + ?Sized>(
    m: &M,
    b: &[T],
    cfg: &SolverConfig<T>,
) -> Result<Solution<T>> {
    cfg.validate()?;
    check_dims(m, b)?;
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok(Solution {
            x,
            iterations: 0,
            residual: T::zero(),
        });
    }
    let target = cfg.tolerance * bnorm;
    let max_iter = cfg.max_iter(n);
    let mut it = 0;
    let mut restarted = false;
    let mut r = vec![T::zero(); n];
    loop {
        match bicgstab_cycle(m, b, &mut x, target, max_iter, &mut it) {
            BiCgOutcome::Converged => {
                let res = true_residual(m, b, &x, &mut r);
                if res <= target {
                    return Ok(Solution {
                        x,
                        iterations: it,
                        residual: res / bnorm,
                    });
                }
                if it >= max_iter {
                    return Err(Error::NotConverged {
                        method: "BiCGStab",
                        iterations: it,
                        residual: (res / bnorm).to_f64_lossy(),
                    });
                }
            }
            BiCgOutcome::Exhausted => {
                let res = true_residual(m, b, &x, &mut r);
                return Err(Error::NotConverged {
                    method: "BiCGStab",
                    iterations: it,
                    residual: (res / bnorm).to_f64_lossy(),
                });
            }
            BiCgOutcome::Breakdown => {
                let res = true_residual(m, b, &x, &mut r);
                if restarted {
                    return Err(Error::Breakdown {
                        method: "BiCGStab",
                        iterations: it,
                        residual: (res / bnorm).to_f64_lossy(),
                    });
                }
                restarted = true;
                let bump = T::lit(1e-3) * bnorm / T::from_usize_lossy(n).sqrt();
                for (i, xi) in x.iter_mut().enumerate() {
                    let sign = if i % 2 == 0 { T::one() } else { -T::one() };
                    *xi += sign * bump / T::from_usize_lossy(i % 7 + 1);
                }
            }
        }
    }
}

/// Dispatches on `cfg.method`.
pub fn solve<T: Real, M: LinearMap<T> + ?Sized>(m: &M, b: &[T], cfg: &SolverConfig<T>) -> Result<Solution<T>> {
    match cfg.method {
        Method::Cg => solve_spd(m, b, cfg),
        Method::BiCgStab => solve_general(m, b, cfg),
        Method::Auto if m.is_symmetric() => solve_spd(m, b, cfg),
        Method::Auto => solve_general(m, b, cfg),
    }
}

/// Solves `(E + coeff * A) x = b` on the grid of `a`.
pub fn solve_shifted<T: Real>(
    a: &LinearGridOperator<T>,
    coeff: T,
    b: &GridFunction<T>,
    cfg: &SolverConfig<T>,
) -> Result<GridFunction<T>> {
    a.grid().check_same(b.grid())?;
    if coeff == T::zero() {
        return Ok(b.clone());
    }
    let sol = solve(&Shifted::new(a, coeff), b.values(), cfg)?;
    GridFunction::from_values(a.grid(), sol.x)
}
