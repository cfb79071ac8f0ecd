//! Uniform rectangular grids over `[0, l1] x [0, l2]` and functions on their
//! interior nodes.
//!
//! Only interior nodes carry storage. Boundary values are identically zero
//! (homogeneous Dirichlet), so every operator acting on a [`GridFunction`] is
//! square over the interior. Nodes are enumerated row-major with `i1` fastest:
//! interior node `(i1, i2)`, `1 <= i_a <= N_a - 1`, has linear index
//! `(i1 - 1) + (i2 - 1) * (N1 - 1)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::{self, Real};

/// Coordinate direction of the 2D grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::X1 => Axis::X2,
            Axis::X2 => Axis::X1,
        }
    }
}

/// Uniform rectangular mesh. Steps are derived from node counts and lengths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    n1: usize,
    n2: usize,
    l1: T,
    l2: T,
    h1: T,
    h2: T,
}

impl<T: Real> Grid<T> {
    pub fn new(n1: usize, n2: usize, l1: T, l2: T) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(Error::InvalidGrid(format!(
                "node counts must be >= 2 per axis, got ({n1}, {n2})"
            )));
        }
        if !(l1 > T::zero()) || !(l2 > T::zero()) || !l1.is_finite() || !l2.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "lengths must be positive and finite, got ({l1}, {l2})"
            )));
        }
        Ok(Grid {
            n1,
            n2,
            l1,
            l2,
            h1: l1 / T::from_usize_lossy(n1),
            h2: l2 / T::from_usize_lossy(n2),
        })
    }

    /// Square `n x n` grid on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, T::one(), T::one())
    }

    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn l1(&self) -> T {
        self.l1
    }
    pub fn l2(&self) -> T {
        self.l2
    }
    pub fn h1(&self) -> T {
        self.h1
    }
    pub fn h2(&self) -> T {
        self.h2
    }

    /// Cell count along `axis`.
    pub fn cells(&self, axis: Axis) -> usize {
        match axis {
            Axis::X1 => self.n1,
            Axis::X2 => self.n2,
        }
    }

    pub fn step(&self, axis: Axis) -> T {
        match axis {
            Axis::X1 => self.h1,
            Axis::X2 => self.h2,
        }
    }

    pub fn length(&self, axis: Axis) -> T {
        match axis {
            Axis::X1 => self.l1,
            Axis::X2 => self.l2,
        }
    }

    /// Weight `h1 * h2` of the discrete L2 inner product.
    pub fn cell_area(&self) -> T {
        self.h1 * self.h2
    }

    /// Number of interior nodes, `(N1 - 1)(N2 - 1)`.
    pub fn interior_count(&self) -> usize {
        (self.n1 - 1) * (self.n2 - 1)
    }

    /// Linear index of interior node `(i1, i2)`, or `None` on the boundary.
    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> Option<usize> {
        if i1 == 0 || i2 == 0 || i1 >= self.n1 || i2 >= self.n2 {
            None
        } else {
            Some((i1 - 1) + (i2 - 1) * (self.n1 - 1))
        }
    }

    /// Node indices `(i1, i2)` of the interior node with linear index `k`.
    #[inline]
    pub fn node(&self, k: usize) -> (usize, usize) {
        let m = self.n1 - 1;
        (k % m + 1, k / m + 1)
    }

    #[inline]
    pub fn coords(&self, i1: usize, i2: usize) -> (T, T) {
        (
            T::from_usize_lossy(i1) * self.h1,
            T::from_usize_lossy(i2) * self.h2,
        )
    }

    /// Iterator over `(k, i1, i2)` in storage order.
    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.interior_count()).map(move |k| {
            let (i1, i2) = self.node(k);
            (k, i1, i2)
        })
    }

    pub(crate) fn check_same(&self, other: &Grid<T>) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "({}x{}, l=({}, {})) vs ({}x{}, l=({}, {}))",
                self.n1, self.n2, self.l1, self.l2, other.n1, other.n2, other.l1, other.l2
            )))
        }
    }
}

/// Grid edge joining `tail = (i1, i2)` to `tail + e_axis`. Only edges with at
/// least one interior endpoint exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub axis: Axis,
    pub i1: usize,
    pub i2: usize,
}

impl Edge {
    pub fn tail(&self) -> (usize, usize) {
        (self.i1, self.i2)
    }

    pub fn head(&self) -> (usize, usize) {
        match self.axis {
            Axis::X1 => (self.i1 + 1, self.i2),
            Axis::X2 => (self.i1, self.i2 + 1),
        }
    }
}

impl<T: Real> Grid<T> {
    /// Edges along `axis`: `N1 (N2 - 1)` for `X1`, `(N1 - 1) N2` for `X2`.
    pub fn edge_count_along(&self, axis: Axis) -> usize {
        match axis {
            Axis::X1 => self.n1 * (self.n2 - 1),
            Axis::X2 => (self.n1 - 1) * self.n2,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count_along(Axis::X1) + self.edge_count_along(Axis::X2)
    }

    /// Edges along `X1` come first, each block ordered with the first tail
    /// index fastest.
    pub fn edge(&self, e: usize) -> Edge {
        let m1 = self.edge_count_along(Axis::X1);
        if e < m1 {
            Edge {
                axis: Axis::X1,
                i1: e % self.n1,
                i2: e / self.n1 + 1,
            }
        } else {
            let e = e - m1;
            Edge {
                axis: Axis::X2,
                i1: e % (self.n1 - 1) + 1,
                i2: e / (self.n1 - 1),
            }
        }
    }

    pub fn edge_index(&self, edge: Edge) -> Option<usize> {
        let Edge { axis, i1, i2 } = edge;
        match axis {
            Axis::X1 if i1 < self.n1 && i2 >= 1 && i2 < self.n2 => Some(i1 + (i2 - 1) * self.n1),
            Axis::X2 if i1 >= 1 && i1 < self.n1 && i2 < self.n2 => {
                Some(self.edge_count_along(Axis::X1) + (i1 - 1) + i2 * (self.n1 - 1))
            }
            _ => None,
        }
    }

    /// Midpoint coordinates of an edge.
    pub fn edge_midpoint(&self, edge: Edge) -> (T, T) {
        let (x1, x2) = self.coords(edge.i1, edge.i2);
        match edge.axis {
            Axis::X1 => (x1 + T::half() * self.h1, x2),
            Axis::X2 => (x1, x2 + T::half() * self.h2),
        }
    }
}

/// Values on the interior nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        GridFunction {
            grid: *grid,
            values: vec![T::zero(); grid.interior_count()],
        }
    }

    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        GridFunction {
            grid: *grid,
            values: vec![c; grid.interior_count()],
        }
    }

    pub fn from_values(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.interior_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.interior_count(),
                got: values.len(),
            });
        }
        Ok(GridFunction {
            grid: *grid,
            values,
        })
    }

    /// Samples `f(x1, x2)` at every interior node.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T, T) -> T) -> Self {
        let values = grid
            .interior_nodes()
            .map(|(_, i1, i2)| {
                let (x1, x2) = grid.coords(i1, i2);
                f(x1, x2)
            })
            .collect();
        GridFunction {
            grid: *grid,
            values,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at interior node `(i1, i2)`; zero on the boundary.
    pub fn at(&self, i1: usize, i2: usize) -> T {
        self.grid
            .index(i1, i2)
            .map_or(T::zero(), |k| self.values[k])
    }

    /// `(y, w) = sum y(x) w(x) h1 h2` over interior nodes.
    pub fn inner_product(&self, other: &GridFunction<T>) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        Ok(scalar::dot(&self.values, &other.values) * self.grid.cell_area())
    }

    pub fn norm(&self) -> T {
        (scalar::dot(&self.values, &self.values) * self.grid.cell_area()).sqrt()
    }

    /// Largest absolute nodal value.
    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// `self - other`
    pub fn sub(&self, other: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.grid.check_same(&other.grid)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: T, other: &GridFunction<T>) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        scalar::axpy(alpha, &other.values, &mut self.values);
        Ok(())
    }

    pub fn scaled(&self, alpha: T) -> GridFunction<T> {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| alpha * v).collect(),
        }
    }

    /// Writes `i1,i2,x1,x2,value` rows in storage order with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i1,i2,x1,x2,value")?;
        for (k, i1, i2) in self.grid.interior_nodes() {
            let (x1, x2) = self.grid.coords(i1, i2);
            writeln!(
                out,
                "{i1},{i2},{:.16e},{:.16e},{:.16e}",
                x1, x2, self.values[k]
            )?;
        }
        Ok(())
    }
}

/// Exact solution `sin(n1 pi x1) sin(n2 pi x2) exp(-pi^2 (n1^2 + n2^2) t)` of
/// the heat equation on the unit square, sampled at interior nodes.
pub fn sample_exact<T: Real>(grid: &Grid<T>, t: T, n1: u32, n2: u32) -> Result<GridFunction<T>> {
    if grid.l1() != T::one() || grid.l2() != T::one() {
        return Err(Error::InvalidArgument(
            "exact heat solution is defined on the unit square only".into(),
        ));
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "mode numbers must be natural, got ({n1}, {n2})"
        )));
    }
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    let pi = T::PI();
    let k1 = T::from_u32(n1).unwrap() * pi;
    let k2 = T::from_u32(n2).unwrap() * pi;
    let decay = (-(k1 * k1 + k2 * k2) * t).exp();
    Ok(GridFunction::from_fn(grid, |x1, x2| {
        (k1 * x1).sin() * (k2 * x2).sin() * decay
    }))
}
