//! Assembly of the discrete problem operators.
//!
//! * [`assemble_laplacian`]: the 5-point Dirichlet Laplacian.
//! * [`assemble_diffusion`]: the same stencil with a coefficient per edge.
//! * [`assemble_convection`]: central convection written as the half-sum of
//!   the advective and conservative forms, which makes the matrix exactly
//!   skew-symmetric.
//! * [`split_symmetric_skew`]: `A = D + C` with `D = (A + A^T)/2`, `C = (A - A^T)/2`.
//! * [`gradient_factorization`]: the weighted gradient `G` with `D = G^T G`.
//!
//! The node space carries the inner product `sum y w h1 h2` and the edge space
//! uses the same weight per edge, so the adjoint of `G` is its transpose.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{Axis, Edge, Grid, GridFunction};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Symmetry class asserted for an operator at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric,
    Skew,
    General,
}

impl Symmetry {
    pub fn name(self) -> &'static str {
        match self {
            Symmetry::Symmetric => "symmetric",
            Symmetry::Skew => "skew",
            Symmetry::General => "general",
        }
    }
}

/// Relative tolerance for symmetry tags.
const SYMMETRY_RTOL: f64 = 1e-13;

/// Square sparse operator over the interior nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGridOperator<T> {
    grid: Grid<T>,
    matrix: CsrMatrix<T>,
    symmetry: Symmetry,
}

impl<T: Real> LinearGridOperator<T> {
    /// Wraps `matrix`, verifying that it is square over `grid` and that it
    /// honors the `symmetry` tag.
    pub fn new(grid: &Grid<T>, matrix: CsrMatrix<T>, symmetry: Symmetry) -> Result<Self> {
        let n = grid.interior_count();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        let sign = match symmetry {
            Symmetry::Symmetric => Some(T::one()),
            Symmetry::Skew => Some(-T::one()),
            Symmetry::General => None,
        };
        if let Some(sign) = sign {
            let defect = matrix.transpose_defect(sign);
            let bound = T::floor_tol(SYMMETRY_RTOL) * matrix.max_abs();
            if defect > bound {
                return Err(Error::SymmetryViolation {
                    tag: symmetry.name(),
                    defect: defect.to_f64_lossy(),
                    bound: bound.to_f64_lossy(),
                });
            }
        }
        Ok(LinearGridOperator {
            grid: *grid,
            matrix,
            symmetry,
        })
    }

    pub fn zero(grid: &Grid<T>) -> Self {
        let n = grid.interior_count();
        LinearGridOperator {
            grid: *grid,
            matrix: CsrMatrix::zeros(n, n),
            symmetry: Symmetry::Symmetric,
        }
    }

    pub fn identity(grid: &Grid<T>) -> Self {
        LinearGridOperator {
            grid: *grid,
            matrix: CsrMatrix::identity(grid.interior_count()),
            symmetry: Symmetry::Symmetric,
        }
    }

    pub fn diagonal(grid: &Grid<T>, diag: &[T]) -> Result<Self> {
        if diag.len() != grid.interior_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.interior_count(),
                got: diag.len(),
            });
        }
        Self::new(grid, CsrMatrix::from_diagonal(diag), Symmetry::Symmetric)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> T {
        self.matrix.get(row, col)
    }

    pub fn apply(&self, y: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.grid.check_same(y.grid())?;
        GridFunction::from_values(&self.grid, self.matrix.mul_vec(y.values()))
    }

    pub fn apply_slice(&self, x: &[T], out: &mut [T]) {
        self.matrix.mul_vec_into(x, out);
    }

    /// `(A y, y)` in the grid inner product.
    pub fn quadratic_form(&self, y: &GridFunction<T>) -> Result<T> {
        self.apply(y)?.inner_product(y)
    }

    pub fn transpose(&self) -> Self {
        LinearGridOperator {
            grid: self.grid,
            matrix: self.matrix.transpose(),
            symmetry: self.symmetry,
        }
    }

    /// `self + other`; the tag is kept when both operands share it.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let tag = if self.symmetry == other.symmetry {
            self.symmetry
        } else {
            Symmetry::General
        };
        Self::new(&self.grid, self.matrix.add(&other.matrix)?, tag)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let tag = if self.symmetry == other.symmetry {
            self.symmetry
        } else {
            Symmetry::General
        };
        Self::new(&self.grid, self.matrix.sub(&other.matrix)?, tag)
    }

    pub fn scale(&self, a: T) -> Self {
        LinearGridOperator {
            grid: self.grid,
            matrix: self.matrix.scale(a),
            symmetry: self.symmetry,
        }
    }

    /// Sum of several operators on one grid.
    pub fn sum<'a>(grid: &Grid<T>, ops: impl IntoIterator<Item = &'a Self>) -> Result<Self> {
        let mut acc: Option<Self> = None;
        for op in ops {
            acc = Some(match acc {
                None => op.clone(),
                Some(a) => a.add(op)?,
            });
        }
        Ok(acc.unwrap_or_else(|| Self::zero(grid)))
    }

    pub fn max_abs(&self) -> T {
        self.matrix.max_abs()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        self.matrix.to_dense()
    }

    /// Coordinate-list dump: one `row col value` line per stored entry,
    /// sorted by `(row, col)`.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        for (r, c, v) in self.matrix.triplets() {
            writeln!(out, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }
}

/// Values at every node of the grid, boundary included, indexed
/// `i1 + i2 (N1 + 1)`. Used for velocity components.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeField<T> {
    n1: usize,
    n2: usize,
    values: Vec<T>,
}

impl<T: Real> NodeField<T> {
    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        NodeField {
            n1: grid.n1(),
            n2: grid.n2(),
            values: vec![c; (grid.n1() + 1) * (grid.n2() + 1)],
        }
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity((grid.n1() + 1) * (grid.n2() + 1));
        for i2 in 0..=grid.n2() {
            for i1 in 0..=grid.n1() {
                let (x1, x2) = grid.coords(i1, i2);
                values.push(f(x1, x2));
            }
        }
        NodeField {
            n1: grid.n1(),
            n2: grid.n2(),
            values,
        }
    }

    pub fn from_values(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        let expected = (grid.n1() + 1) * (grid.n2() + 1);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(NodeField {
            n1: grid.n1(),
            n2: grid.n2(),
            values,
        })
    }

    #[inline]
    pub fn at(&self, i1: usize, i2: usize) -> T {
        self.values[i1 + i2 * (self.n1 + 1)]
    }

    fn fits(&self, grid: &Grid<T>) -> bool {
        self.n1 == grid.n1() && self.n2 == grid.n2()
    }
}

/// One value per grid edge, in [`Grid::edge`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeField<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> EdgeField<T> {
    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        EdgeField {
            grid: *grid,
            values: vec![c; grid.edge_count()],
        }
    }

    /// Evaluates `f(edge, x1, x2)` at each edge midpoint.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn(Edge, T, T) -> T) -> Self {
        let values = (0..grid.edge_count())
            .map(|e| {
                let edge = grid.edge(e);
                let (x1, x2) = grid.edge_midpoint(edge);
                f(edge, x1, x2)
            })
            .collect();
        EdgeField {
            grid: *grid,
            values,
        }
    }

    pub fn from_values(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.edge_count(),
                got: values.len(),
            });
        }
        Ok(EdgeField {
            grid: *grid,
            values,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `(u, w)` over edges with weight `h1 h2`.
    pub fn inner_product(&self, other: &EdgeField<T>) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        Ok(crate::scalar::dot(&self.values, &other.values) * self.grid.cell_area())
    }
}

/// Map from node functions to edge functions, `(G y)_e = sqrt(k_e) (y_head - y_tail) / h`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeOperator<T> {
    grid: Grid<T>,
    matrix: CsrMatrix<T>,
}

impl<T: Real> EdgeOperator<T> {
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// `edge_count x interior_count` matrix.
    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn apply(&self, y: &GridFunction<T>) -> Result<EdgeField<T>> {
        self.grid.check_same(y.grid())?;
        EdgeField::from_values(&self.grid, self.matrix.mul_vec(y.values()))
    }

    pub fn adjoint_apply(&self, u: &EdgeField<T>) -> Result<GridFunction<T>> {
        self.grid.check_same(u.grid())?;
        GridFunction::from_values(&self.grid, self.matrix.mul_transpose_vec(u.values()))
    }

    /// `G^* diag(w) G`, symmetric by construction.
    pub fn weighted_normal(&self, weights: &[T]) -> Result<LinearGridOperator<T>> {
        LinearGridOperator::new(
            &self.grid,
            self.matrix.weighted_gram(weights)?,
            Symmetry::Symmetric,
        )
    }

    /// `G^* G`
    pub fn normal(&self) -> Result<LinearGridOperator<T>> {
        self.weighted_normal(&vec![T::one(); self.matrix.nrows()])
    }
}

fn neighbor(i1: usize, i2: usize, axis: Axis, forward: bool) -> (usize, usize) {
    match (axis, forward) {
        (Axis::X1, true) => (i1 + 1, i2),
        (Axis::X1, false) => (i1 - 1, i2),
        (Axis::X2, true) => (i1, i2 + 1),
        (Axis::X2, false) => (i1, i2 - 1),
    }
}

/// 5-point Laplacian with homogeneous Dirichlet closure.
pub fn assemble_laplacian<T: Real>(grid: &Grid<T>) -> LinearGridOperator<T> {
    let inv1 = (grid.h1() * grid.h1()).recip();
    let inv2 = (grid.h2() * grid.h2()).recip();
    let diag = T::two() * inv1 + T::two() * inv2;
    let mut trip = Vec::with_capacity(5 * grid.interior_count());
    for (k, i1, i2) in grid.interior_nodes() {
        trip.push((k, k, diag));
        for (axis, inv) in [(Axis::X1, inv1), (Axis::X2, inv2)] {
            for fwd in [false, true] {
                let (j1, j2) = neighbor(i1, i2, axis, fwd);
                if let Some(m) = grid.index(j1, j2) {
                    trip.push((k, m, -inv));
                }
            }
        }
    }
    let n = grid.interior_count();
    LinearGridOperator::new(
        grid,
        CsrMatrix::from_triplets(n, n, &trip).expect("stencil in range"),
        Symmetry::Symmetric,
    )
    .expect("Laplacian is symmetric")
}

/// Variable-coefficient diffusion stencil assembled edge by edge: each edge
/// contributes the flux `k_e (y_head - y_tail) / h^2` to both endpoints.
pub fn assemble_diffusion<T: Real>(grid: &Grid<T>, k: &EdgeField<T>) -> Result<LinearGridOperator<T>> {
    grid.check_same(k.grid())?;
    let mut trip = Vec::with_capacity(4 * grid.edge_count());
    for (e, &ke) in k.values().iter().enumerate() {
        let edge = grid.edge(e);
        let h = grid.step(edge.axis);
        let a = ke / (h * h);
        let (t1, t2) = edge.tail();
        let (h1, h2) = edge.head();
        let tail = grid.index(t1, t2);
        let head = grid.index(h1, h2);
        if let Some(t) = tail {
            trip.push((t, t, a));
        }
        if let Some(hd) = head {
            trip.push((hd, hd, a));
        }
        if let (Some(t), Some(hd)) = (tail, head) {
            trip.push((t, hd, -a));
            trip.push((hd, t, -a));
        }
    }
    let n = grid.interior_count();
    LinearGridOperator::new(grid, CsrMatrix::from_triplets(n, n, &trip)?, Symmetry::Symmetric)
}

/// Central convection operator
/// `(C y)(x) = sum_a [v_a(x+) y(x+) - v_a(x-) y(x-) + v_a(x) (y(x+) - y(x-))] / (4 h_a)`
/// with `x+- = x +- h_a e_a`. The coupling of `x` and `x+` is
/// `(v(x) + v(x+)) / (4h)` and of `x+` back to `x` its exact negative.
pub fn assemble_convection<T: Real>(
    grid: &Grid<T>,
    v1: &NodeField<T>,
    v2: &NodeField<T>,
) -> Result<LinearGridOperator<T>> {
    if !v1.fits(grid) || !v2.fits(grid) {
        return Err(Error::GridMismatch(
            "velocity field does not cover the grid nodes".into(),
        ));
    }
    let mut trip = Vec::with_capacity(4 * grid.interior_count());
    for (k, i1, i2) in grid.interior_nodes() {
        for (axis, v) in [(Axis::X1, v1), (Axis::X2, v2)] {
            let quarter = (T::lit(4.0) * grid.step(axis)).recip();
            let (p1, p2) = neighbor(i1, i2, axis, true);
            if let Some(m) = grid.index(p1, p2) {
                let c = (v.at(i1, i2) + v.at(p1, p2)) * quarter;
                trip.push((k, m, c));
                trip.push((m, k, -c));
            }
        }
    }
    let n = grid.interior_count();
    LinearGridOperator::new(grid, CsrMatrix::from_triplets(n, n, &trip)?, Symmetry::Skew)
}

/// `A = D + C` with `D = (A + A^T) / 2` symmetric and `C = (A - A^T) / 2` skew.
pub fn split_symmetric_skew<T: Real>(
    a: &LinearGridOperator<T>,
) -> Result<(LinearGridOperator<T>, LinearGridOperator<T>)> {
    let at = a.matrix().transpose();
    let half = T::half();
    let d = a.matrix().lincomb(half, &at, half)?;
    let c = a.matrix().lincomb(half, &at, -half)?;
    // (x + y)/2 and (x - y)/2 as lincomb computes them are exactly (anti)symmetric
    Ok((
        LinearGridOperator::new(a.grid(), d, Symmetry::Symmetric)?,
        LinearGridOperator::new(a.grid(), c, Symmetry::Skew)?,
    ))
}

/// Weighted gradient `G = k^{1/2} grad` from nodes to edges, with the
/// diffusivity given at edge midpoints. `G^T G` reproduces
/// [`assemble_diffusion`] with the same `k`.
pub fn gradient_factorization<T: Real>(grid: &Grid<T>, k: &EdgeField<T>) -> Result<EdgeOperator<T>> {
    grid.check_same(k.grid())?;
    let mut trip = Vec::with_capacity(2 * grid.edge_count());
    for (e, &ke) in k.values().iter().enumerate() {
        if !(ke > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "diffusivity must be positive, edge {e} has {ke}"
            )));
        }
        let edge = grid.edge(e);
        let g = ke.sqrt() / grid.step(edge.axis);
        let (t1, t2) = edge.tail();
        let (h1, h2) = edge.head();
        if let Some(hd) = grid.index(h1, h2) {
            trip.push((e, hd, g));
        }
        if let Some(t) = grid.index(t1, t2) {
            trip.push((e, t, -g));
        }
    }
    Ok(EdgeOperator {
        grid: *grid,
        matrix: CsrMatrix::from_triplets(grid.edge_count(), grid.interior_count(), &trip)?,
    })
}

/// Smallest eigenvalue `delta_1 + delta_2`, `delta_a = 4/h_a^2 sin^2(pi h_a / (2 l_a))`,
/// of the Dirichlet Laplacian.
pub fn laplacian_lower_bound<T: Real>(grid: &Grid<T>) -> T {
    let delta = |h: T, l: T| {
        let s = (T::PI() * h / (T::two() * l)).sin();
        T::lit(4.0) / (h * h) * s * s
    };
    delta(grid.h1(), grid.l1()) + delta(grid.h2(), grid.l2())
}

/// Eigenvalue of the 5-point Laplacian for the mode
/// `sin(n1 pi x1 / l1) sin(n2 pi x2 / l2)`:
/// `sum_a 4/h_a^2 sin^2(n_a pi h_a / (2 l_a))`.
pub fn laplacian_eigenvalue<T: Real>(grid: &Grid<T>, n1: u32, n2: u32) -> T {
    let term = |n: u32, h: T, l: T| {
        let s = (T::from_u32(n).unwrap() * T::PI() * h / (T::two() * l)).sin();
        T::lit(4.0) / (h * h) * s * s
    };
    term(n1, grid.h1(), grid.l1()) + term(n2, grid.h2(), grid.l2())
}

/// Largest eigenvalue of the 5-point Laplacian (mode `(N1 - 1, N2 - 1)`).
pub fn laplacian_max_eigenvalue<T: Real>(grid: &Grid<T>) -> T {
    laplacian_eigenvalue(grid, (grid.n1() - 1) as u32, (grid.n2() - 1) as u32)
}
