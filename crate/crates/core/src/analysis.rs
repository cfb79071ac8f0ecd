//! Transition-operator norms, error norms, convergence orders and error
//! localization.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decomposition::PartitionOfUnity;
use crate::error::{Error, Result};
use crate::grid::{sample_exact, Axis, Grid, GridFunction};
use crate::operators::{laplacian_eigenvalue, LinearGridOperator};
use crate::scalar::{dot, norm2, Real};
use crate::schemes::{SchemeConfig, SchemeKind, SchemeState, SourceTerm};

/// Largest state dimension for which the transition map is materialized.
pub const DENSE_LIMIT: usize = 1024;
/// Relative tolerance on successive Rayleigh quotients.
pub const POWER_RTOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 10_000;
/// Squarings of `M^T M` before the power iteration starts.
pub const POWER_SQUARINGS: usize = 24;
const POWER_SEED: u64 = 0x7a5e_11a7;

/// Row-major dense square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let n = columns.len();
        let mut data = vec![T::zero(); n * n];
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: col.len() });
            }
            for (i, &v) in col.iter().enumerate() {
                data[i * n + j] = v;
            }
        }
        Ok(DenseMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn mul_transpose_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for (i, &xi) in x.iter().enumerate() {
            for (yj, &m) in y.iter_mut().zip(self.row(i)) {
                *yj += m * xi;
            }
        }
        y
    }

    /// `M^T M`, bitwise symmetric.
    pub fn gram(&self) -> Self {
        let n = self.n;
        let cols: Vec<Vec<T>> = (0..n).map(|j| (0..n).map(|i| self.get(i, j)).collect()).collect();
        symmetric_products(&cols)
    }

    /// Spectral norm by power iteration on `(M^T M)^(2^k)`, formed by
    /// repeated squaring, from a seeded random start. The eigenvalue is the
    /// Rayleigh quotient of `M^T M`; the squarings separate clustered top
    /// singular values that plain iteration cannot resolve.
    pub fn spectral_norm(&self) -> Result<T> {
        if self.n == 0 {
            return Ok(T::zero());
        }
        let b = self.gram();
        let mut c = b.clone();
        for _ in 0..POWER_SQUARINGS {
            let scale = c.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if scale == T::zero() {
                return Ok(T::zero());
            }
            c.data.iter_mut().for_each(|v| *v /= scale);
            let rows: Vec<Vec<T>> = (0..c.n).map(|i| c.row(i).to_vec()).collect();
            c = symmetric_products(&rows);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
        let mut v: Vec<T> = (0..self.n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let rtol = T::floor_tol(POWER_RTOL);
        let mut lambda = -T::one();
        for _ in 0..POWER_MAX_ITER {
            let w = c.mul_vec(&v);
            let nw = norm2(&w);
            if nw == T::zero() {
                return Ok(T::zero());
            }
            v = w.into_iter().map(|x| x / nw).collect();
            let next = dot(&v, &b.mul_vec(&v));
            if (next - lambda).abs() <= rtol * next.abs() {
                return Ok(next.max(T::zero()).sqrt());
            }
            lambda = next;
        }
        Err(Error::PowerIteration {
            iterations: POWER_MAX_ITER,
        })
    }
}

/// `P_ij = v_i . v_j` over the given vectors, upper triangle mirrored.
fn symmetric_products<T: Real>(vecs: &[Vec<T>]) -> DenseMatrix<T> {
    let n = vecs.len();
    let upper: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| dot(&vecs[i], &vecs[j])).collect())
        .collect();
    let mut data = vec![T::zero(); n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            data[i * n + i + off] = v;
            data[(i + off) * n + i] = v;
        }
    }
    DenseMatrix { n, data }
}

/// Dense transition map `y^n -> y^{n+1}` of one zero-source step. For the
/// vector scheme the state is the concatenation of all `p` components.
pub fn transition_matrix<T: Real>(
    cfg: &SchemeConfig<T>,
    full: &LinearGridOperator<T>,
    parts: &[LinearGridOperator<T>],
) -> Result<DenseMatrix<T>> {
    cfg.validate(parts.len())?;
    let grid = *full.grid();
    let n = grid.interior_count();
    let copies = match cfg.kind {
        SchemeKind::VectorAdditive => parts.len(),
        _ => 1,
    };
    let dim = n * copies;
    if dim > DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "transition map of dimension {dim} exceeds the dense limit {DENSE_LIMIT}"
        )));
    }
    let source = SourceTerm::Zero;
    let columns: Vec<Vec<T>> = (0..dim)
        .into_par_iter()
        .map(|k| {
            let fields: Vec<GridFunction<T>> = (0..copies)
                .map(|c| {
                    let mut f = GridFunction::zeros(&grid);
                    if k / n == c {
                        f.values_mut()[k % n] = T::one();
                    }
                    f
                })
                .collect();
            let state = match cfg.kind {
                SchemeKind::VectorAdditive => SchemeState::Vector { step: 0, ys: fields },
                _ => SchemeState::Scalar {
                    step: 0,
                    y: fields.into_iter().next().expect("one field"),
                },
            };
            let next = cfg.step(&state, full, parts, &source)?;
            Ok(next.fields().iter().flat_map(|f| f.values().iter().copied()).collect())
        })
        .collect::<Result<_>>()?;
    DenseMatrix::from_columns(&columns)
}

/// `||S||_2` of one zero-source step.
pub fn transition_norm<T: Real>(
    cfg: &SchemeConfig<T>,
    full: &LinearGridOperator<T>,
    parts: &[LinearGridOperator<T>],
) -> Result<T> {
    transition_matrix(cfg, full, parts)?.spectral_norm()
}

/// `||y - u(., t)||` against the separable exact mode.
pub fn error_norm<T: Real>(y: &GridFunction<T>, t: T, n1: u32, n2: u32) -> Result<T> {
    Ok(y.sub(&sample_exact(y.grid(), t, n1, n2)?)?.norm())
}

/// `exp(-lambda_h t)` times the sampled mode: the exact solution of the
/// space-discrete problem for single-mode data.
pub fn semidiscrete_exact<T: Real>(grid: &Grid<T>, t: T, n1: u32, n2: u32) -> Result<GridFunction<T>> {
    let lam = laplacian_eigenvalue(grid, n1, n2);
    Ok(sample_exact(grid, T::zero(), n1, n2)?.scaled((-lam * t).exp()))
}

/// Least-squares slope of `log(error)` against `log(step)`.
pub fn convergence_order<T: Real>(steps: &[T], errors: &[T]) -> Result<T> {
    if steps.len() != errors.len() {
        return Err(Error::DimensionMismatch {
            expected: steps.len(),
            got: errors.len(),
        });
    }
    if steps.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least three refinements, got {}",
            steps.len()
        )));
    }
    if steps.iter().chain(errors).any(|&v| !(v > T::zero())) {
        return Err(Error::InvalidArgument("steps and errors must be positive".into()));
    }
    let xs: Vec<T> = steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<T> = errors.iter().map(|e| e.ln()).collect();
    let m = T::from_usize_lossy(xs.len());
    let mx = xs.iter().copied().sum::<T>() / m;
    let my = ys.iter().copied().sum::<T>() / m;
    let sxy: T = xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    if sxx == T::zero() {
        return Err(Error::InvalidArgument("steps must not all be equal".into()));
    }
    Ok(sxy / sxx)
}

/// Max of `|error|` inside and outside the overlap band.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationStats<T> {
    pub inside_max: T,
    pub outside_max: T,
    /// Interior nodes within `margin` cells of an overlap node along the
    /// decomposition axis.
    pub band: Vec<bool>,
    pub margin: usize,
    /// Interior index of the largest `|error|`, first in grid order on ties.
    pub argmax: Option<usize>,
}

impl<T: Real> LocalizationStats<T> {
    pub fn argmax_in_band(&self) -> bool {
        self.argmax.is_some_and(|k| self.band[k])
    }
}

/// Band = nodes where some `chi_a` lies in (0, 1), dilated by `margin` cells
/// along the decomposition axis.
pub fn localization_stats<T: Real>(
    field: &GridFunction<T>,
    pou: &PartitionOfUnity<T>,
    margin: usize,
) -> Result<LocalizationStats<T>> {
    let grid = pou.grid();
    grid.check_same(field.grid())?;
    let overlap = pou.overlap_nodes();
    let axis = pou.spec().axis;
    let mut band = vec![false; grid.interior_count()];
    for (k, i1, i2) in grid.interior_nodes() {
        let i = match axis {
            Axis::X1 => i1,
            Axis::X2 => i2,
        };
        let lo = i.saturating_sub(margin).max(1);
        let hi = (i + margin).min(grid.cells(axis) - 1);
        band[k] = (lo..=hi).any(|j| {
            let idx = match axis {
                Axis::X1 => grid.index(j, i2),
                Axis::X2 => grid.index(i1, j),
            };
            idx.is_some_and(|m| overlap[m])
        });
    }
    let (mut inside_max, mut outside_max) = (T::zero(), T::zero());
    let mut argmax = None;
    let mut best = -T::one();
    for (k, &v) in field.values().iter().enumerate() {
        let a = v.abs();
        if a > best {
            best = a;
            argmax = Some(k);
        }
        if band[k] {
            inside_max = inside_max.max(a);
        } else {
            outside_max = outside_max.max(a);
        }
    }
    Ok(LocalizationStats {
        inside_max,
        outside_max,
        band,
        margin,
        argmax,
    })
}

/// Error history of one run plus the final local error field.
#[derive(Clone, Debug)]
pub struct ErrorReport<T> {
    pub scheme: String,
    pub grid: Grid<T>,
    pub sigma: T,
    pub tau: T,
    pub overlap: Option<String>,
    /// `(n, t^n, eps(t^n))` for `n = 0..=N`.
    pub eps: Vec<(usize, T, T)>,
    /// `y^N - u(., T)`
    pub local_error: GridFunction<T>,
}

impl<T: Real> ErrorReport<T> {
    pub fn final_error(&self) -> T {
        self.eps.last().map_or(T::zero(), |e| e.2)
    }

    /// `step,t,eps` rows.
    pub fn write_eps_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,t,eps")?;
        for (n, t, e) in &self.eps {
            writeln!(out, "{n},{t:.16e},{e:.16e}")?;
        }
        Ok(())
    }

    pub fn write_field_csv<W: Write>(&self, out: W) -> Result<()> {
        self.local_error.write_csv(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{build_partition, DecompositionSpec, OverlapVariant};
    use crate::operators::{assemble_laplacian, laplacian_max_eigenvalue};
    use crate::schemes::run;

    #[test]
    fn single_node_weighted_norm() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        let a = LinearGridOperator::<f64>::diagonal(&g, &[16.0]).unwrap();
        let cfg = SchemeConfig::new(SchemeKind::Weighted, 0.1, 1);
        let s = transition_norm(&cfg, &a, std::slice::from_ref(&a)).unwrap();
        assert!((s - 1.0 / 2.6).abs() <= 1e-12);
    }

    #[test]
    fn explicit_norm_beyond_limit() {
        let g = Grid::<f64>::unit_square(8).unwrap();
        let a = assemble_laplacian(&g);
        let tau = 2.5 / laplacian_max_eigenvalue(&g);
        let cfg = SchemeConfig::new(SchemeKind::Explicit, tau, 1);
        let s = transition_norm(&cfg, &a, std::slice::from_ref(&a)).unwrap();
        assert!((s - 1.5).abs() <= 1e-3, "{s}");
    }

    #[test]
    fn clustered_singular_values_are_resolved() {
        let n = 40;
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut c = vec![0.0; n];
                c[j] = 0.5 * (1.0 - 1e-6 * j as f64);
                c
            })
            .collect();
        let m = DenseMatrix::from_columns(&cols).unwrap();
        assert!((m.spectral_norm().unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn dense_limit_enforced() {
        let g = Grid::<f64>::unit_square(34).unwrap();
        let a = assemble_laplacian(&g);
        let cfg = SchemeConfig::new(SchemeKind::Weighted, 0.1, 1);
        assert!(transition_matrix(&cfg, &a, std::slice::from_ref(&a)).is_err());
    }

    #[test]
    fn error_norm_of_exact_and_perturbed() {
        let g = Grid::<f64>::unit_square(10).unwrap();
        let mut y = sample_exact(&g, 0.004, 2, 1).unwrap();
        assert_eq!(error_norm(&y, 0.004, 2, 1).unwrap(), 0.0);
        y.values_mut()[17] += -0.3;
        let e = error_norm(&y, 0.004, 2, 1).unwrap();
        assert!((e - 0.3 * (0.1f64 * 0.1).sqrt()).abs() <= 1e-15);
    }

    #[test]
    fn implicit_error_matches_modewise_recursion() {
        let g = Grid::<f64>::unit_square(32).unwrap();
        let a = assemble_laplacian(&g);
        let (tau, steps) = (1e-3, 10);
        let cfg = SchemeConfig::new(SchemeKind::Weighted, tau, steps);
        let u0 = sample_exact(&g, 0.0, 2, 1).unwrap();
        let last = run(&u0, &cfg, &a, std::slice::from_ref(&a), &SourceTerm::Zero, |_| Ok(())).unwrap();
        let t = tau * steps as f64;
        let eps = error_norm(&last.fields()[0], t, 2, 1).unwrap();
        let lam = laplacian_eigenvalue(&g, 2, 1);
        let a_n = (1.0 + tau * lam).powi(-(steps as i32));
        let closed = (a_n - (-5.0 * std::f64::consts::PI.powi(2) * t).exp()).abs() * 0.5;
        assert!((eps - closed).abs() <= 1e-10, "{eps} vs {closed}");
    }

    #[test]
    fn orders_of_exact_power_laws() {
        let taus = [0.1, 0.05, 0.025, 0.0125];
        let lin: Vec<f64> = taus.iter().map(|t| 3.0 * t).collect();
        let quad: Vec<f64> = taus.iter().map(|t| 0.7 * t * t).collect();
        assert!((convergence_order(&taus, &lin).unwrap() - 1.0).abs() <= 1e-12);
        assert!((convergence_order(&taus, &quad).unwrap() - 2.0).abs() <= 1e-12);
        assert!(convergence_order(&taus[..2], &lin[..2]).is_err());
        assert!(convergence_order(&taus, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn localization_band() {
        let g = Grid::<f64>::unit_square(16).unwrap();
        let spec = DecompositionSpec::equal_strips(16, Axis::X1, 2, 2, OverlapVariant::IntegerNode);
        let pou = build_partition(&g, &spec).unwrap();
        let zero = GridFunction::zeros(&g);
        let s = localization_stats(&zero, &pou, 2).unwrap();
        assert_eq!((s.inside_max, s.outside_max), (0.0, 0.0));
        // interface column i1 = 8, band 6..=10
        let in_band = s.band.iter().filter(|&&b| b).count();
        assert_eq!(in_band, 5 * 15);
        let mut f = GridFunction::zeros(&g);
        f.values_mut()[g.index(8, 3).unwrap()] = -2.0;
        let s = localization_stats(&f, &pou, 0).unwrap();
        assert_eq!((s.inside_max, s.outside_max), (2.0, 0.0));
        assert!(s.argmax_in_band());
    }

    #[test]
    fn report_csv() {
        let g = Grid::<f64>::unit_square(4).unwrap();
        let r = ErrorReport {
            scheme: "weighted".into(),
            grid: g,
            sigma: 1.0,
            tau: 0.1,
            overlap: None,
            eps: vec![(0, 0.0, 0.0), (1, 0.1, 1e-3)],
            local_error: GridFunction::zeros(&g),
        };
        let mut buf = Vec::new();
        r.write_eps_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("step,t,eps\n0,"));
        assert_eq!(r.final_error(), 1e-3);
    }
}
