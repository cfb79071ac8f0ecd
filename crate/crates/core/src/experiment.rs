//! End-to-end experiment setup on the unit square: operator assembly,
//! partition, splitting, the scheme run and its error report.

use std::fmt;
use std::str::FromStr;

use crate::analysis::{ErrorReport, LocalizationStats, localization_stats};
use crate::decomposition::{
    build_partition, decompose, interface_exchange_volume, Decomposition, DecompositionSpec, OperatorParts,
    OverlapVariant, PartitionOfUnity,
};
use crate::error::{Error, Result};
use crate::grid::{sample_exact, Axis, Grid, GridFunction};
use crate::linsolve::SolverConfig;
use crate::operators::{assemble_convection, assemble_laplacian, gradient_factorization, EdgeField, LinearGridOperator, NodeField};
use crate::scalar::Real;
use crate::schemes::{run, step_weighted, SchemeConfig, SchemeKind, SchemeState, SourceTerm};

/// Substeps per step of the Crank-Nicolson reference used when no closed
/// form is available.
pub const REFERENCE_SUBSTEPS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    /// `-Laplace`, exact separable solution.
    Heat,
    /// `-Laplace` plus central convection with constant velocity.
    ConvDiff,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Heat => "heat",
            Problem::ConvDiff => "convdiff",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heat" => Ok(Problem::Heat),
            "convdiff" => Ok(Problem::ConvDiff),
            other => Err(Error::InvalidArgument(format!(
                "unknown problem '{other}' (expected heat or convdiff)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig<T> {
    pub problem: Problem,
    /// Mode numbers of the initial data.
    pub n1: u32,
    pub n2: u32,
    pub v1: T,
    pub v2: T,
    pub cells1: usize,
    pub cells2: usize,
    pub t_final: T,
    pub steps: usize,
    pub scheme: SchemeKind,
    pub sigma: T,
    pub axis: Axis,
    pub strips: usize,
    pub groups: usize,
    pub overlap: OverlapVariant,
    /// Band dilation for the localization statistics, in cells.
    pub margin: usize,
    pub weights: Option<Vec<T>>,
}

impl<T: Real> Default for ExperimentConfig<T> {
    fn default() -> Self {
        ExperimentConfig {
            problem: Problem::Heat,
            n1: 2,
            n2: 1,
            v1: T::one(),
            v2: T::half(),
            cells1: 32,
            cells2: 32,
            t_final: T::lit(0.01),
            steps: 10,
            scheme: SchemeKind::Weighted,
            sigma: T::one(),
            axis: Axis::X1,
            strips: 4,
            groups: 2,
            overlap: OverlapVariant::IntegerNode,
            margin: 2,
            weights: None,
        }
    }
}

impl<T: Real> ExperimentConfig<T> {
    /// `tau = T / N`; a zero-step run uses `tau = T`.
    pub fn tau(&self) -> T {
        self.t_final / T::from_usize_lossy(self.steps.max(1))
    }

    pub fn grid(&self) -> Result<Grid<T>> {
        Grid::new(self.cells1, self.cells2, T::one(), T::one())
    }

    /// Strip layout; schemes without splitting use a single strip.
    pub fn decomposition_spec(&self) -> DecompositionSpec {
        if self.scheme.is_decomposed() {
            let cells = match self.axis {
                Axis::X1 => self.cells1,
                Axis::X2 => self.cells2,
            };
            DecompositionSpec::equal_strips(cells, self.axis, self.strips, self.groups, self.overlap)
        } else {
            DecompositionSpec::single(self.axis)
        }
    }

    pub fn scheme_config(&self) -> SchemeConfig<T> {
        let mut cfg = SchemeConfig::new(self.scheme, self.tau(), self.steps).with_sigma(self.sigma);
        cfg.weights = self.weights.clone();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.t_final > T::zero() && self.t_final.is_finite()) {
            return bad(format!("final time must be positive, got {}", self.t_final));
        }
        if self.n1 == 0 || self.n2 == 0 {
            return bad("mode numbers must be at least 1".into());
        }
        if !(self.v1.is_finite() && self.v2.is_finite()) {
            return bad("velocities must be finite".into());
        }
        let grid = self.grid()?;
        let p = if self.scheme.is_decomposed() {
            self.decomposition_spec().validate(&grid)?;
            self.groups
        } else {
            1
        };
        self.scheme_config().validate(p)
    }

    /// Same grid and time parameters.
    pub fn compatible_with(&self, other: &Self) -> bool {
        self.problem == other.problem
            && (self.n1, self.n2) == (other.n1, other.n2)
            && (self.cells1, self.cells2) == (other.cells1, other.cells2)
            && self.t_final == other.t_final
            && self.steps == other.steps
            && self.v1 == other.v1
            && self.v2 == other.v2
    }
}

/// Assembled operators and partition for one experiment.
#[derive(Clone, Debug)]
pub struct Setup<T> {
    pub grid: Grid<T>,
    pub pou: PartitionOfUnity<T>,
    pub split: Decomposition<T>,
}

impl<T: Real> Setup<T> {
    pub fn full(&self) -> &LinearGridOperator<T> {
        &self.split.full
    }

    pub fn parts(&self) -> &[LinearGridOperator<T>] {
        &self.split.parts
    }

    /// Exchange nodes summed over groups.
    pub fn exchange_volume(&self) -> usize {
        if self.pou.group_count() == 1 {
            0
        } else {
            interface_exchange_volume(&self.pou).iter().sum()
        }
    }
}

/// Operator parts `D = -Laplace` (with `k = 1`) and the convection for
/// `problem`.
pub fn operator_parts<T: Real>(grid: &Grid<T>, problem: Problem, v1: T, v2: T) -> Result<OperatorParts<T>> {
    let diffusion = assemble_laplacian(grid);
    let gradient = gradient_factorization(grid, &EdgeField::constant(grid, T::one()))?;
    let convection = match problem {
        Problem::Heat => LinearGridOperator::zero(grid),
        Problem::ConvDiff => assemble_convection(grid, &NodeField::constant(grid, v1), &NodeField::constant(grid, v2))?,
    };
    Ok(OperatorParts {
        diffusion,
        convection,
        gradient,
    })
}

pub fn build_setup<T: Real>(cfg: &ExperimentConfig<T>) -> Result<Setup<T>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let pou = build_partition(&grid, &cfg.decomposition_spec())?;
    let parts = operator_parts(&grid, cfg.problem, cfg.v1, cfg.v2)?;
    let split = decompose(&parts, &pou)?;
    Ok(Setup { grid, pou, split })
}

/// Reference solution at `t^n = n tau`: the exact mode for the heat problem,
/// otherwise Crank-Nicolson with [`REFERENCE_SUBSTEPS`] substeps per step.
struct Reference<T: Real> {
    problem: Problem,
    n1: u32,
    n2: u32,
    current: GridFunction<T>,
}

impl<T: Real> Reference<T> {
    fn new(cfg: &ExperimentConfig<T>, u0: &GridFunction<T>) -> Self {
        Reference {
            problem: cfg.problem,
            n1: cfg.n1,
            n2: cfg.n2,
            current: u0.clone(),
        }
    }

    fn at(&mut self, n: usize, tau: T, a: &LinearGridOperator<T>) -> Result<GridFunction<T>> {
        match self.problem {
            Problem::Heat => sample_exact(a.grid(), T::from_usize_lossy(n) * tau, self.n1, self.n2),
            Problem::ConvDiff => {
                if n > 0 {
                    let sub = tau / T::from_usize_lossy(REFERENCE_SUBSTEPS);
                    for _ in 0..REFERENCE_SUBSTEPS {
                        self.current = step_weighted(&self.current, a, T::half(), sub, None, &SolverConfig::default())?;
                    }
                }
                Ok(self.current.clone())
            }
        }
    }
}

/// Runs one experiment and records `eps(t^n)` for every step.
pub fn run_experiment<T: Real>(cfg: &ExperimentConfig<T>) -> Result<(ErrorReport<T>, Setup<T>)> {
    let setup = build_setup(cfg)?;
    let report = run_on_setup(cfg, &setup)?;
    Ok((report, setup))
}

pub fn run_on_setup<T: Real>(cfg: &ExperimentConfig<T>, setup: &Setup<T>) -> Result<ErrorReport<T>> {
    let scheme = cfg.scheme_config();
    let tau = scheme.tau;
    let u0 = sample_exact(&setup.grid, T::zero(), cfg.n1, cfg.n2)?;
    let mut reference = Reference::new(cfg, &u0);
    let mut eps = Vec::with_capacity(cfg.steps + 1);
    let mut local_error = GridFunction::zeros(&setup.grid);
    let weights = cfg.weights.clone();
    run(&u0, &scheme, setup.full(), setup.parts(), &SourceTerm::Zero, |state: &SchemeState<T>| {
        let n = state.step();
        let y = state.scalar_view(weights.as_deref())?;
        let diff = y.sub(&reference.at(n, tau, setup.full())?)?;
        eps.push((n, T::from_usize_lossy(n) * tau, diff.norm()));
        local_error = diff;
        Ok(())
    })?;
    Ok(ErrorReport {
        scheme: cfg.scheme.name().to_string(),
        grid: setup.grid,
        sigma: cfg.sigma,
        tau,
        overlap: cfg.scheme.is_decomposed().then(|| cfg.overlap.name().to_string()),
        eps,
        local_error,
    })
}

/// Localization of the final error relative to the experiment's overlap band.
pub fn localization<T: Real>(
    cfg: &ExperimentConfig<T>,
    setup: &Setup<T>,
    report: &ErrorReport<T>,
) -> Result<LocalizationStats<T>> {
    localization_stats(&report.local_error, &setup.pou, cfg.margin)
}
