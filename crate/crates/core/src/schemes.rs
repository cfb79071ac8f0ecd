//! Two-level time steppers: explicit, weighted, regularized additive,
//! regularized multiplicative and vector additive.
//!
//! Step functions are pure: they read `y^n` and return a fresh `y^{n+1}`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::linsolve::{solve_shifted, SolverConfig};
use crate::operators::LinearGridOperator;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Explicit,
    Weighted,
    RegAdditive,
    RegMultiplicative,
    VectorAdditive,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::Explicit,
        SchemeKind::Weighted,
        SchemeKind::RegAdditive,
        SchemeKind::RegMultiplicative,
        SchemeKind::VectorAdditive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Explicit => "explicit",
            SchemeKind::Weighted => "weighted",
            SchemeKind::RegAdditive => "regadd",
            SchemeKind::RegMultiplicative => "regmult",
            SchemeKind::VectorAdditive => "vector",
        }
    }

    /// Uses the split operators `A_a` rather than `A`.
    pub fn is_decomposed(self) -> bool {
        matches!(
            self,
            SchemeKind::RegAdditive | SchemeKind::RegMultiplicative | SchemeKind::VectorAdditive
        )
    }

    pub fn uses_sigma(self) -> bool {
        matches!(
            self,
            SchemeKind::Weighted | SchemeKind::RegAdditive | SchemeKind::RegMultiplicative
        )
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "explicit" => Ok(SchemeKind::Explicit),
            "weighted" | "implicit" => Ok(SchemeKind::Weighted),
            "regadd" | "additive" => Ok(SchemeKind::RegAdditive),
            "regmult" | "multiplicative" => Ok(SchemeKind::RegMultiplicative),
            "vector" => Ok(SchemeKind::VectorAdditive),
            other => Err(Error::InvalidArgument(format!(
                "unknown scheme '{other}' (expected explicit, weighted, regadd, regmult or vector)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig<T> {
    pub kind: SchemeKind,
    /// Weight of the new time level; ignored by the explicit and vector schemes.
    pub sigma: T,
    pub tau: T,
    pub steps: usize,
    /// Recombination weights `c_a` of the vector scheme; `None` means `1/p`.
    pub weights: Option<Vec<T>>,
    pub solver: SolverConfig<T>,
}

impl<T: Real> SchemeConfig<T> {
    pub fn new(kind: SchemeKind, tau: T, steps: usize) -> Self {
        SchemeConfig {
            kind,
            sigma: T::one(),
            tau,
            steps,
            weights: None,
            solver: SolverConfig::default(),
        }
    }

    pub fn with_sigma(mut self, sigma: T) -> Self {
        self.sigma = sigma;
        self
    }

    /// Checks the config against `p` split operators.
    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.tau > T::zero() && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.sigma >= T::zero() && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be finite and nonnegative, got {}",
                self.sigma
            )));
        }
        if p == 0 {
            return Err(Error::InvalidArgument("at least one split operator is required".into()));
        }
        if let Some(w) = &self.weights {
            if self.kind != SchemeKind::VectorAdditive {
                return Err(Error::InvalidArgument(
                    "recombination weights only apply to the vector scheme".into(),
                ));
            }
            check_weights(w, p)?;
        }
        self.solver.validate()
    }

    /// Fraction of the step at which the source is sampled.
    pub fn source_offset(&self) -> T {
        match self.kind {
            SchemeKind::Explicit => T::zero(),
            SchemeKind::VectorAdditive => T::one(),
            _ => self.sigma,
        }
    }

    /// Advances `state` by one step.
    pub fn step(
        &self,
        state: &SchemeState<T>,
        full: &LinearGridOperator<T>,
        parts: &[LinearGridOperator<T>],
        source: &SourceTerm<T>,
    ) -> Result<SchemeState<T>> {
        let grid = *state.grid();
        let t = T::from_usize_lossy(state.step()) * self.tau + self.source_offset() * self.tau;
        let phi = source.eval(&grid, t)?;
        let phi = phi.as_ref();
        let (tau, sigma, cfg) = (self.tau, self.sigma, &self.solver);
        match (self.kind, state) {
            (SchemeKind::VectorAdditive, SchemeState::Vector { step, ys }) => Ok(SchemeState::Vector {
                step: step + 1,
                ys: step_vector(ys, parts, tau, phi, cfg)?,
            }),
            (kind, SchemeState::Scalar { step, y }) if kind != SchemeKind::VectorAdditive => {
                let next = match kind {
                    SchemeKind::Explicit => step_explicit(y, full, tau, phi)?,
                    SchemeKind::Weighted => step_weighted(y, full, sigma, tau, phi, cfg)?,
                    SchemeKind::RegAdditive => step_reg_additive(y, parts, sigma, tau, phi, cfg)?,
                    SchemeKind::RegMultiplicative => step_reg_multiplicative(y, parts, sigma, tau, phi, cfg)?,
                    SchemeKind::VectorAdditive => unreachable!(),
                };
                Ok(SchemeState::Scalar { step: step + 1, y: next })
            }
            _ => Err(Error::InvalidArgument(format!(
                "state layout does not match scheme {}",
                self.kind
            ))),
        }
    }
}

fn check_weights<T: Real>(w: &[T], p: usize) -> Result<()> {
    if w.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: w.len(),
        });
    }
    if w.iter().any(|&c| !(c >= T::zero())) {
        return Err(Error::InvalidArgument("recombination weights must be nonnegative".into()));
    }
    let sum: T = w.iter().copied().sum();
    if (sum - T::one()).abs() > T::floor_tol(1e-12) * T::from_usize_lossy(p) {
        return Err(Error::InvalidArgument(format!(
            "recombination weights must sum to 1, got {sum}"
        )));
    }
    Ok(())
}

/// Scheme state at time level `n`.
#[derive(Clone, Debug, PartialEq)]
pub enum SchemeState<T> {
    Scalar { step: usize, y: GridFunction<T> },
    /// One field per split operator.
    Vector { step: usize, ys: Vec<GridFunction<T>> },
}

impl<T: Real> SchemeState<T> {
    /// `y^0 = u^0`; the vector scheme starts with `p` equal copies.
    pub fn initial(kind: SchemeKind, u0: &GridFunction<T>, p: usize) -> Self {
        match kind {
            SchemeKind::VectorAdditive => SchemeState::Vector {
                step: 0,
                ys: vec![u0.clone(); p],
            },
            _ => SchemeState::Scalar { step: 0, y: u0.clone() },
        }
    }

    pub fn step(&self) -> usize {
        match self {
            SchemeState::Scalar { step, .. } | SchemeState::Vector { step, .. } => *step,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        match self {
            SchemeState::Scalar { y, .. } => y.grid(),
            SchemeState::Vector { ys, .. } => ys[0].grid(),
        }
    }

    /// All stored fields in order.
    pub fn fields(&self) -> &[GridFunction<T>] {
        match self {
            SchemeState::Scalar { y, .. } => std::slice::from_ref(y),
            SchemeState::Vector { ys, .. } => ys,
        }
    }

    /// `y^n`, or `sum c_a y_a^n` for the vector scheme.
    pub fn scalar_view(&self, weights: Option<&[T]>) -> Result<GridFunction<T>> {
        match self {
            SchemeState::Scalar { y, .. } => Ok(y.clone()),
            SchemeState::Vector { ys, .. } => {
                let p = ys.len();
                let uniform;
                let w = match weights {
                    Some(w) => {
                        check_weights(w, p)?;
                        w
                    }
                    None => {
                        uniform = vec![T::one() / T::from_usize_lossy(p); p];
                        &uniform
                    }
                };
                let mut out = GridFunction::zeros(ys[0].grid());
                for (c, y) in w.iter().zip(ys) {
                    out.axpy(*c, y)?;
                }
                Ok(out)
            }
        }
    }
}

/// Right-hand side `f(t)` sampled on the grid.
#[derive(Clone, Default)]
pub enum SourceTerm<T> {
    #[default]
    Zero,
    Fn(Arc<dyn Fn(T) -> GridFunction<T> + Send + Sync>),
}

impl<T: Real> SourceTerm<T> {
    pub fn from_fn(f: impl Fn(T) -> GridFunction<T> + Send + Sync + 'static) -> Self {
        SourceTerm::Fn(Arc::new(f))
    }

    /// `None` for the zero source.
    pub fn eval(&self, grid: &Grid<T>, t: T) -> Result<Option<GridFunction<T>>> {
        match self {
            SourceTerm::Zero => Ok(None),
            SourceTerm::Fn(f) => {
                let phi = f(t);
                grid.check_same(phi.grid())?;
                Ok(Some(phi))
            }
        }
    }
}

impl<T> fmt::Debug for SourceTerm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceTerm::Zero => f.write_str("SourceTerm::Zero"),
            SourceTerm::Fn(_) => f.write_str("SourceTerm::Fn(..)"),
        }
    }
}

fn add_source<T: Real>(y: &mut GridFunction<T>, tau: T, phi: Option<&GridFunction<T>>) -> Result<()> {
    match phi {
        Some(phi) => y.axpy(tau, phi),
        None => Ok(()),
    }
}

fn check_parts<T: Real>(y: &GridFunction<T>, parts: &[LinearGridOperator<T>]) -> Result<()> {
    if parts.is_empty() {
        return Err(Error::InvalidArgument("at least one split operator is required".into()));
    }
    for a in parts {
        y.grid().check_same(a.grid())?;
    }
    Ok(())
}

/// `y - tau A y + tau phi`
pub fn step_explicit<T: Real>(
    y: &GridFunction<T>,
    a: &LinearGridOperator<T>,
    tau: T,
    phi: Option<&GridFunction<T>>,
) -> Result<GridFunction<T>> {
    let mut next = y.clone();
    next.axpy(-tau, &a.apply(y)?)?;
    add_source(&mut next, tau, phi)?;
    Ok(next)
}

/// Solves `(E + sigma tau A) y^{n+1} = (E - (1 - sigma) tau A) y^n + tau phi`.
pub fn step_weighted<T: Real>(
    y: &GridFunction<T>,
    a: &LinearGridOperator<T>,
    sigma: T,
    tau: T,
    phi: Option<&GridFunction<T>>,
    cfg: &SolverConfig<T>,
) -> Result<GridFunction<T>> {
    let mut rhs = y.clone();
    let explicit_part = (T::one() - sigma) * tau;
    if explicit_part != T::zero() {
        rhs.axpy(-explicit_part, &a.apply(y)?)?;
    }
    add_source(&mut rhs, tau, phi)?;
    solve_shifted(a, sigma * tau, &rhs, cfg)
}

/// `y_a = y^n - p tau (E + sigma p tau A_a)^{-1} A_a y^n + tau phi`, averaged
/// over `a`. The `p` solves run concurrently.
pub fn step_reg_additive<T: Real>(
    y: &GridFunction<T>,
    parts: &[LinearGridOperator<T>],
    sigma: T,
    tau: T,
    phi: Option<&GridFunction<T>>,
    cfg: &SolverConfig<T>,
) -> Result<GridFunction<T>> {
    check_parts(y, parts)?;
    let p = T::from_usize_lossy(parts.len());
    let ptau = p * tau;
    let substeps: Vec<GridFunction<T>> = parts
        .par_iter()
        .map(|a| {
            let w = solve_shifted(a, sigma * ptau, &a.apply(y)?, cfg)?;
            let mut ya = y.clone();
            ya.axpy(-ptau, &w)?;
            add_source(&mut ya, tau, phi)?;
            Ok(ya)
        })
        .collect::<Result<_>>()?;
    let mut next = GridFunction::zeros(y.grid());
    for ya in &substeps {
        next.axpy(T::one(), ya)?;
    }
    Ok(next.scaled(T::one() / p))
}

/// Sequential substeps `z <- z - tau (E + sigma tau A_a)^{-1} A_a z`, with
/// `tau phi` added in the last one.
pub fn step_reg_multiplicative<T: Real>(
    y: &GridFunction<T>,
    parts: &[LinearGridOperator<T>],
    sigma: T,
    tau: T,
    phi: Option<&GridFunction<T>>,
    cfg: &SolverConfig<T>,
) -> Result<GridFunction<T>> {
    check_parts(y, parts)?;
    let mut z = y.clone();
    for a in parts {
        let w = solve_shifted(a, sigma * tau, &a.apply(&z)?, cfg)?;
        z.axpy(-tau, &w)?;
    }
    add_source(&mut z, tau, phi)?;
    Ok(z)
}

/// For `a = 1..p` in order, solves
/// `(E + tau A_a) y_a^{n+1} = y_a^n + tau phi - tau sum_{b<a} A_b y_b^{n+1} - tau sum_{b>a} A_b y_b^n`.
pub fn step_vector<T: Real>(
    ys: &[GridFunction<T>],
    parts: &[LinearGridOperator<T>],
    tau: T,
    phi: Option<&GridFunction<T>>,
    cfg: &SolverConfig<T>,
) -> Result<Vec<GridFunction<T>>> {
    if ys.len() != parts.len() {
        return Err(Error::DimensionMismatch {
            expected: parts.len(),
            got: ys.len(),
        });
    }
    check_parts(&ys[0], parts)?;
    // A_b y_b, holding the old level for b >= a and the new one for b < a
    let mut applied: Vec<GridFunction<T>> = parts.iter().zip(ys).map(|(a, y)| a.apply(y)).collect::<Result<_>>()?;
    let mut next = Vec::with_capacity(ys.len());
    for (alpha, a) in parts.iter().enumerate() {
        let mut rhs = ys[alpha].clone();
        add_source(&mut rhs, tau, phi)?;
        for (beta, ay) in applied.iter().enumerate() {
            if beta != alpha {
                rhs.axpy(-tau, ay)?;
            }
        }
        let ya = solve_shifted(a, tau, &rhs, cfg)?;
        applied[alpha] = a.apply(&ya)?;
        next.push(ya);
    }
    Ok(next)
}

/// Runs `cfg.steps` steps from `u0`, calling `observe` on the initial state
/// and after every step. Returns the final state.
pub fn run<T: Real>(
    u0: &GridFunction<T>,
    cfg: &SchemeConfig<T>,
    full: &LinearGridOperator<T>,
    parts: &[LinearGridOperator<T>],
    source: &SourceTerm<T>,
    mut observe: impl FnMut(&SchemeState<T>) -> Result<()>,
) -> Result<SchemeState<T>> {
    cfg.validate(parts.len())?;
    u0.grid().check_same(full.grid())?;
    let mut state = SchemeState::initial(cfg.kind, u0, parts.len());
    observe(&state)?;
    for _ in 0..cfg.steps {
        state = cfg.step(&state, full, parts, source)?;
        observe(&state)?;
    }
    Ok(state)
}

/// Every state from `y^0` to `y^N`.
pub fn trajectory<T: Real>(
    u0: &GridFunction<T>,
    cfg: &SchemeConfig<T>,
    full: &LinearGridOperator<T>,
    parts: &[LinearGridOperator<T>],
    source: &SourceTerm<T>,
) -> Result<Vec<SchemeState<T>>> {
    let mut out = Vec::with_capacity(cfg.steps + 1);
    run(u0, cfg, full, parts, source, |s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}
