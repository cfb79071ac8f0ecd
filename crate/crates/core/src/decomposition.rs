//! Partition of unity over strip subdomains and the decomposition operators
//! `A_a = C_a + D_a` built from it.
//!
//! The domain is cut into strips along one axis. Every interface between two
//! strips carries a piecewise-linear ramp whose width depends on the overlap
//! variant. Measured in cells along the decomposition axis, with `i` the
//! interface node index:
//!
//! | variant       | ramp support     | weights at half-integer points |
//! |---------------|------------------|--------------------------------|
//! | `IntegerNode` | `[i-1/2, i+1/2]` | `{0, 1}`                       |
//! | `HalfInteger` | `[i-3/2, i+1/2]` | `{0, 1/2, 1}`                  |
//! | `Wide3h`      | `[i-3/2, i+3/2]` | `{0, 1/3, 2/3, 1}`             |
//!
//! Strip weights are differences of consecutive ramps, so they sum to one
//! exactly. The weights are evaluated in rational arithmetic and only then
//! rounded to the working scalar. Strips are assigned to groups cyclically
//! (`strip s -> group s mod p`), so non-adjacent strips may share one weight.
//!
//! Node weights `chi_a` sample the ramps at integer nodes. Edge weights
//! `chi~_a` sample them at edge midpoints; for edges transverse to the
//! decomposition axis the midpoint shares the node coordinate along the axis.

use std::io::Write;

use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, GridFunction};
use crate::operators::{EdgeOperator, LinearGridOperator, Symmetry};
use crate::scalar::Real;

pub type Rational = Ratio<i64>;

/// Geometry of the transition band between neighboring strips.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OverlapVariant {
    /// Weights jump across one cell; overlap width `h`.
    IntegerNode,
    /// Interface through a half-integer point; overlap width `2h`.
    HalfInteger,
    /// Ramp over three cells; overlap width `3h`.
    Wide3h,
}

impl OverlapVariant {
    /// Ramp width in cells.
    pub fn width(self) -> i64 {
        match self {
            OverlapVariant::IntegerNode => 1,
            OverlapVariant::HalfInteger => 2,
            OverlapVariant::Wide3h => 3,
        }
    }

    /// Ramp center, in half cells, for the interface at node `i`.
    fn center2(self, i: usize) -> i64 {
        let i = i as i64;
        match self {
            OverlapVariant::IntegerNode | OverlapVariant::Wide3h => 2 * i,
            OverlapVariant::HalfInteger => 2 * i - 1,
        }
    }

    /// Exact weight set at half-integer points along the decomposition axis.
    pub fn edge_value_set(self) -> Vec<Rational> {
        let w = self.width();
        (0..=w).map(|k| Rational::new(k, w)).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            OverlapVariant::IntegerNode => "integer",
            OverlapVariant::HalfInteger => "half",
            OverlapVariant::Wide3h => "wide3h",
        }
    }
}

impl std::str::FromStr for OverlapVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integer" => Ok(OverlapVariant::IntegerNode),
            "half" => Ok(OverlapVariant::HalfInteger),
            "wide3h" => Ok(OverlapVariant::Wide3h),
            other => Err(Error::InvalidArgument(format!(
                "unknown overlap variant '{other}' (expected integer, half or wide3h)"
            ))),
        }
    }
}

/// Strip decomposition along one axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecompositionSpec {
    pub axis: Axis,
    pub strip_count: usize,
    pub group_count: usize,
    pub variant: OverlapVariant,
    /// Interface node indices along `axis`, strictly increasing,
    /// `strip_count - 1` of them.
    pub interfaces: Vec<usize>,
}

impl DecompositionSpec {
    /// `strips` equal strips with interfaces at `round(k N / strips)`.
    pub fn equal_strips(
        cells: usize,
        axis: Axis,
        strips: usize,
        groups: usize,
        variant: OverlapVariant,
    ) -> Self {
        let interfaces = (1..strips.max(1))
            .map(|k| (2 * k * cells + strips) / (2 * strips))
            .collect();
        DecompositionSpec {
            axis,
            strip_count: strips,
            group_count: groups,
            variant,
            interfaces,
        }
    }

    /// One strip, one group: `chi = 1` everywhere.
    pub fn single(axis: Axis) -> Self {
        DecompositionSpec {
            axis,
            strip_count: 1,
            group_count: 1,
            variant: OverlapVariant::IntegerNode,
            interfaces: Vec::new(),
        }
    }

    pub fn group_of_strip(&self, strip: usize) -> usize {
        strip % self.group_count
    }

    /// Checks the spec against a grid: `1 <= p <= strips`, one interface per
    /// strip boundary, interfaces at least two nodes apart, and every ramp
    /// supported inside the domain.
    pub fn validate<T: Real>(&self, grid: &Grid<T>) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDecomposition(msg));
        if self.strip_count == 0 || self.group_count == 0 {
            return bad("strip and group counts must be positive".into());
        }
        if self.group_count > self.strip_count {
            return bad(format!(
                "group count {} exceeds strip count {}",
                self.group_count, self.strip_count
            ));
        }
        if self.interfaces.len() + 1 != self.strip_count {
            return bad(format!(
                "{} strips need {} interfaces, got {}",
                self.strip_count,
                self.strip_count - 1,
                self.interfaces.len()
            ));
        }
        let cells = grid.cells(self.axis) as i64;
        let w = self.variant.width();
        for pair in self.interfaces.windows(2) {
            if pair[1] < pair[0] + 2 {
                return bad(format!(
                    "interfaces {} and {} are closer than two nodes",
                    pair[0], pair[1]
                ));
            }
        }
        for &i in &self.interfaces {
            let c2 = self.variant.center2(i);
            if c2 - w < 0 || c2 + w > 2 * cells {
                return bad(format!(
                    "interface {i} is too close to the boundary for a {}-cell ramp on {cells} cells",
                    w
                ));
            }
        }
        Ok(())
    }

    /// Exact left-side ramp of interface `k` at doubled coordinate `theta2`.
    fn ramp(&self, k: usize, theta2: i64) -> Rational {
        let w = self.variant.width();
        let c2 = self.variant.center2(self.interfaces[k]);
        let r = Rational::new(c2 + w - theta2, 2 * w);
        r.max(Rational::zero()).min(Rational::one())
    }

    /// Exact group weights at doubled coordinate `theta2` along the axis.
    fn group_weights(&self, theta2: i64) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.group_count];
        let mut left = Rational::zero();
        for s in 0..self.strip_count {
            let right = if s + 1 == self.strip_count {
                Rational::one()
            } else {
                self.ramp(s, theta2)
            };
            out[self.group_of_strip(s)] += right - left;
            left = right;
        }
        out
    }
}

/// Per-group weights at interior nodes and at edge midpoints.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity<T> {
    grid: Grid<T>,
    spec: DecompositionSpec,
    node_exact: Vec<Vec<Rational>>,
    edge_exact: Vec<Vec<Rational>>,
    node: Vec<Vec<T>>,
    edge: Vec<Vec<T>>,
}

fn to_real<T: Real>(r: Rational) -> T {
    T::from_i64(*r.numer()).unwrap() / T::from_i64(*r.denom()).unwrap()
}

/// Samples the strip ramps of `spec` at nodes and edge midpoints of `grid`.
pub fn build_partition<T: Real>(grid: &Grid<T>, spec: &DecompositionSpec) -> Result<PartitionOfUnity<T>> {
    spec.validate(grid)?;
    let p = spec.group_count;
    let axis_coord = |i1: usize, i2: usize| match spec.axis {
        Axis::X1 => i1,
        Axis::X2 => i2,
    } as i64;

    let mut node_exact = vec![Vec::with_capacity(grid.interior_count()); p];
    for (_, i1, i2) in grid.interior_nodes() {
        for (g, w) in spec.group_weights(2 * axis_coord(i1, i2)).into_iter().enumerate() {
            node_exact[g].push(w);
        }
    }
    let mut edge_exact = vec![Vec::with_capacity(grid.edge_count()); p];
    for e in 0..grid.edge_count() {
        let edge = grid.edge(e);
        let base = 2 * axis_coord(edge.i1, edge.i2);
        let theta2 = if edge.axis == spec.axis { base + 1 } else { base };
        for (g, w) in spec.group_weights(theta2).into_iter().enumerate() {
            edge_exact[g].push(w);
        }
    }
    let convert = |v: &Vec<Vec<Rational>>| -> Vec<Vec<T>> {
        v.iter().map(|row| row.iter().map(|&r| to_real(r)).collect()).collect()
    };
    Ok(PartitionOfUnity {
        grid: *grid,
        spec: spec.clone(),
        node: convert(&node_exact),
        edge: convert(&edge_exact),
        node_exact,
        edge_exact,
    })
}

impl<T: Real> PartitionOfUnity<T> {
    /// Degenerate one-group partition.
    pub fn trivial(grid: &Grid<T>) -> Self {
        build_partition(grid, &DecompositionSpec::single(Axis::X1)).expect("single strip is valid")
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn spec(&self) -> &DecompositionSpec {
        &self.spec
    }

    pub fn group_count(&self) -> usize {
        self.node.len()
    }

    /// `chi_a` at interior nodes.
    pub fn node_weights(&self, group: usize) -> &[T] {
        &self.node[group]
    }

    /// `chi~_a` at edge midpoints, in [`Grid::edge`] order.
    pub fn edge_weights(&self, group: usize) -> &[T] {
        &self.edge[group]
    }

    pub fn exact_node_weights(&self, group: usize) -> &[Rational] {
        &self.node_exact[group]
    }

    pub fn exact_edge_weights(&self, group: usize) -> &[Rational] {
        &self.edge_exact[group]
    }

    /// Nodes where some group weight lies strictly between 0 and 1.
    pub fn overlap_nodes(&self) -> Vec<bool> {
        (0..self.grid.interior_count())
            .map(|k| {
                self.node_exact
                    .iter()
                    .any(|w| w[k] > Rational::zero() && w[k] < Rational::one())
            })
            .collect()
    }

    /// Writes `group,i1,i2,chi` rows (groups numbered from 1).
    pub fn write_node_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "group,i1,i2,chi")?;
        for (g, w) in self.node.iter().enumerate() {
            for (k, i1, i2) in self.grid.interior_nodes() {
                writeln!(out, "{},{i1},{i2},{:.16e}", g + 1, w[k])?;
            }
        }
        Ok(())
    }

    /// Writes `group,axis,edge_i1,edge_i2,chi_tilde` rows; the edge indices
    /// are those of its tail node and `axis` is 1 or 2.
    pub fn write_edge_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "group,axis,edge_i1,edge_i2,chi_tilde")?;
        for (g, w) in self.edge.iter().enumerate() {
            for (e, &v) in w.iter().enumerate() {
                let edge = self.grid.edge(e);
                writeln!(
                    out,
                    "{},{},{},{},{:.16e}",
                    g + 1,
                    edge.axis.index() + 1,
                    edge.i1,
                    edge.i2,
                    v
                )?;
            }
        }
        Ok(())
    }
}

/// `D_a = G^* diag(chi~_a) G` for every group.
pub fn decompose_diffusion<T: Real>(
    g: &EdgeOperator<T>,
    pou: &PartitionOfUnity<T>,
) -> Result<Vec<LinearGridOperator<T>>> {
    g.grid().check_same(pou.grid())?;
    (0..pou.group_count())
        .map(|a| g.weighted_normal(pou.edge_weights(a)))
        .collect()
}

/// `C_a = (diag(chi_a) C + C diag(chi_a)) / 2` for every group.
pub fn decompose_skew<T: Real>(
    c: &LinearGridOperator<T>,
    pou: &PartitionOfUnity<T>,
) -> Result<Vec<LinearGridOperator<T>>> {
    c.grid().check_same(pou.grid())?;
    if c.symmetry() != Symmetry::Skew && c.matrix().nnz() > 0 {
        return Err(Error::InvalidArgument(format!(
            "skew decomposition needs a skew operator, got {}",
            c.symmetry().name()
        )));
    }
    (0..pou.group_count())
        .map(|a| {
            let chi = pou.node_weights(a);
            let m = c
                .matrix()
                .map_entries(|i, j, v| (chi[i] + chi[j]) * v * T::half());
            LinearGridOperator::new(c.grid(), m, Symmetry::Skew)
        })
        .collect()
}

/// Symmetric/skew parts of a problem operator together with the
/// factorization `D = G^* G`.
#[derive(Clone, Debug)]
pub struct OperatorParts<T> {
    pub diffusion: LinearGridOperator<T>,
    pub convection: LinearGridOperator<T>,
    pub gradient: EdgeOperator<T>,
}

/// Result of splitting `A` over a partition.
#[derive(Clone, Debug)]
pub struct Decomposition<T> {
    /// `A = D + C`
    pub full: LinearGridOperator<T>,
    /// `A_a = C_a + D_a`
    pub parts: Vec<LinearGridOperator<T>>,
    pub diffusion_parts: Vec<LinearGridOperator<T>>,
    pub skew_parts: Vec<LinearGridOperator<T>>,
}

/// Relative tolerance of the splitting identity `sum A_a = A`.
pub const SPLIT_RTOL: f64 = 1e-12;
/// Number of random probes for `x^T A_a x >= 0`.
const NONNEG_PROBES: usize = 32;

/// Builds `A_a = C_a + D_a`, then checks `sum A_a = A` to a relative
/// max-norm tolerance and `x^T A_a x >= 0` on seeded random probes.
pub fn decompose<T: Real>(parts: &OperatorParts<T>, pou: &PartitionOfUnity<T>) -> Result<Decomposition<T>> {
    let grid = *parts.diffusion.grid();
    let d_parts = decompose_diffusion(&parts.gradient, pou)?;
    let c_parts = decompose_skew(&parts.convection, pou)?;
    let has_skew = parts.convection.matrix().nnz() > 0;
    let a_parts: Vec<_> = d_parts
        .iter()
        .zip(&c_parts)
        .map(|(d, c)| if has_skew { d.add(c) } else { Ok(d.clone()) })
        .collect::<Result<_>>()?;

    let full = if has_skew {
        parts.diffusion.add(&parts.convection)?
    } else {
        parts.diffusion.clone()
    };
    let sum = LinearGridOperator::sum(&grid, &a_parts)?;
    let defect = sum.matrix().sub(full.matrix())?.max_abs();
    let bound = T::floor_tol(SPLIT_RTOL) * full.max_abs();
    if defect > bound {
        return Err(Error::SplittingCheck(format!(
            "||sum A_a - A||_max = {defect:e} exceeds {bound:e}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d0d0);
    for _ in 0..NONNEG_PROBES {
        let x: Vec<T> = (0..grid.interior_count())
            .map(|_| T::lit(rng.random_range(-1.0..1.0)))
            .collect();
        let x = GridFunction::from_values(&grid, x)?;
        let xx = x.inner_product(&x)?;
        for (a, op) in a_parts.iter().enumerate() {
            let q = op.quadratic_form(&x)?;
            if q < -T::floor_tol(SPLIT_RTOL) * op.max_abs() * xx {
                return Err(Error::SplittingCheck(format!(
                    "part {} is not nonnegative: (A_a x, x) = {q:e}",
                    a + 1
                )));
            }
        }
    }
    Ok(Decomposition {
        full,
        parts: a_parts,
        diffusion_parts: d_parts,
        skew_parts: c_parts,
    })
}

/// Per-group count of exchange nodes: nodes where the group's weight is
/// strictly between 0 and 1, plus zero-weight nodes its stencil reaches
/// through an edge carrying positive weight.
pub fn interface_exchange_volume<T: Real>(pou: &PartitionOfUnity<T>) -> Vec<usize> {
    let grid = pou.grid();
    (0..pou.group_count())
        .map(|a| {
            let chi = pou.exact_node_weights(a);
            let chi_edge = pou.exact_edge_weights(a);
            let mut count = chi
                .iter()
                .filter(|&&w| w > Rational::zero() && w < Rational::one())
                .count();
            let mut read = vec![false; grid.interior_count()];
            for (e, &w) in chi_edge.iter().enumerate() {
                if w == Rational::zero() {
                    continue;
                }
                let edge = grid.edge(e);
                for (i1, i2) in [edge.tail(), edge.head()] {
                    if let Some(k) = grid.index(i1, i2) {
                        if chi[k] == Rational::zero() {
                            read[k] = true;
                        }
                    }
                }
            }
            count += read.iter().filter(|&&r| r).count();
            count
        })
        .collect()
}
