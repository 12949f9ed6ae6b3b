//! Tensor-product grids over the domain box, the control-region mask and
//! space-time fields.
//!
//! Nodes are numbered with the first axis fastest. A [`SpaceTimeField`]
//! stores the whole time history of every node contiguously
//! (`values[node * (nt + 1) + k]`), since the memory operators act on
//! complete time series.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::{BoxRegion, ModelParams};
use crate::time::{MemoryOperators, TimeGrid};

pub use crate::time::TimeOpTag;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    n: [usize; 3],
    lo: [f64; 3],
    h: [f64; 3],
}

impl SpatialGrid {
    /// Uniform grid on `domain` with `nodes[a]` nodes (boundary included)
    /// along axis `a`.
    pub fn new(domain: &BoxRegion, dim: usize, nodes: &[usize]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("spatial dimension must be 1, 2 or 3, got {dim}")));
        }
        if nodes.len() != dim {
            return Err(Error::InvalidGrid(format!("expected {dim} node counts, got {}", nodes.len())));
        }
        let mut g = SpatialGrid { dim, n: [1; 3], lo: [0.0; 3], h: [1.0; 3] };
        for a in 0..dim {
            if nodes[a] < 3 {
                return Err(Error::InvalidGrid(format!("axis {a} needs at least 3 nodes, got {}", nodes[a])));
            }
            g.n[a] = nodes[a];
            g.lo[a] = domain.lo[a];
            g.h[a] = (domain.hi[a] - domain.lo[a]) / (nodes[a] - 1) as f64;
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn shape(&self) -> &[usize] {
        &self.n[..self.dim]
    }
    pub fn spacing(&self) -> &[f64] {
        &self.h[..self.dim]
    }
    pub fn num_nodes(&self) -> usize {
        self.n.iter().product()
    }
    pub fn cell_volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    pub fn multi_index(&self, node: usize) -> [usize; 3] {
        let i0 = node % self.n[0];
        let r = node / self.n[0];
        [i0, r % self.n[1], r / self.n[1]]
    }

    pub fn node_index(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.n[0] * (idx[1] + self.n[1] * idx[2])
    }

    pub fn coords(&self, node: usize) -> [f64; 3] {
        let m = self.multi_index(node);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = if m[a] == self.n[a] - 1 {
                self.lo[a] + self.h[a] * (self.n[a] - 1) as f64
            } else {
                self.lo[a] + self.h[a] * m[a] as f64
            };
        }
        x
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let m = self.multi_index(node);
        (0..self.dim).any(|a| m[a] == 0 || m[a] == self.n[a] - 1)
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&p| !self.is_boundary(p)).collect()
    }

    /// Tensor-product trapezoidal weights.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        (0..self.num_nodes())
            .map(|p| {
                let m = self.multi_index(p);
                (0..self.dim)
                    .map(|a| if m[a] == 0 || m[a] == self.n[a] - 1 { 0.5 * self.h[a] } else { self.h[a] })
                    .product()
            })
            .collect()
    }

    /// Second-order Laplacian with homogeneous Dirichlet data. Boundary
    /// values of `u` are treated as zero; the result is zero on the boundary.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes()];
        for p in 0..self.num_nodes() {
            if self.is_boundary(p) {
                continue;
            }
            let m = self.multi_index(p);
            let mut s = 0.0;
            for a in 0..self.dim {
                let inv_h2 = 1.0 / (self.h[a] * self.h[a]);
                let mut lo = m;
                lo[a] -= 1;
                let mut hi = m;
                hi[a] += 1;
                let ul = if lo[a] == 0 { 0.0 } else { self.value_if_interior(u, lo) };
                let uh = if hi[a] == self.n[a] - 1 { 0.0 } else { self.value_if_interior(u, hi) };
                s += (ul - 2.0 * u[p] + uh) * inv_h2;
            }
            out[p] = s;
        }
        out
    }

    fn value_if_interior(&self, u: &[f64], idx: [usize; 3]) -> f64 {
        let q = self.node_index(idx);
        if self.is_boundary(q) {
            0.0
        } else {
            u[q]
        }
    }

    /// `int grad a . grad b dx` from one-sided differences on grid edges,
    /// with boundary values taken as zero. For such fields this equals
    /// `-(a, laplacian(b))` in the quadrature inner product exactly.
    pub fn gradient_pairing(&self, a: &[f64], b: &[f64]) -> f64 {
        let val = |u: &[f64], q: usize| if self.is_boundary(q) { 0.0 } else { u[q] };
        let mut s = 0.0;
        for p in 0..self.num_nodes() {
            let m = self.multi_index(p);
            for ax in 0..self.dim {
                if m[ax] + 1 >= self.n[ax] {
                    continue;
                }
                let mut nb = m;
                nb[ax] += 1;
                let q = self.node_index(nb);
                let da = val(a, q) - val(a, p);
                let db = val(b, q) - val(b, p);
                s += da * db / (self.h[ax] * self.h[ax]);
            }
        }
        s * self.cell_volume()
    }

    /// The operator `-laplacian` restricted to interior nodes, in compressed
    /// row form, indexed by position in [`Self::interior_nodes`].
    pub fn interior_stencil(&self) -> Stencil {
        let interior = self.interior_nodes();
        let mut pos = vec![usize::MAX; self.num_nodes()];
        for (i, &p) in interior.iter().enumerate() {
            pos[p] = i;
        }
        let mut st = Stencil { diag: Vec::with_capacity(interior.len()), offsets: vec![0], cols: Vec::new(), vals: Vec::new() };
        for &p in &interior {
            let m = self.multi_index(p);
            let mut d = 0.0;
            for a in 0..self.dim {
                let inv_h2 = 1.0 / (self.h[a] * self.h[a]);
                d += 2.0 * inv_h2;
                for nb in [m[a] - 1, m[a] + 1] {
                    let mut idx = m;
                    idx[a] = nb;
                    let q = self.node_index(idx);
                    if !self.is_boundary(q) {
                        st.cols.push(pos[q]);
                        st.vals.push(-inv_h2);
                    }
                }
            }
            st.diag.push(d);
            st.offsets.push(st.cols.len());
        }
        st
    }
}

/// Sparse symmetric matrix in compressed rows with the diagonal stored apart.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub diag: Vec<f64>,
    pub offsets: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Stencil {
    pub fn len(&self) -> usize {
        self.diag.len()
    }
    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = alpha * x + beta * (S x)`.
    pub fn apply_shifted(&self, alpha: f64, beta: f64, x: &[f64], y: &mut [f64]) {
        for i in 0..self.len() {
            let mut s = self.diag[i] * x[i];
            for j in self.offsets[i]..self.offsets[i + 1] {
                s += self.vals[j] * x[self.cols[j]];
            }
            y[i] = alpha * x[i] + beta * s;
        }
    }
}

/// Which part of the domain a masked integral runs over. `Complement` is
/// everything outside the control region, so `Omega` and `Complement`
/// partition `All`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    All,
    Omega,
    Complement,
}

/// Node indicator of the control region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubdomainMask {
    inside: Vec<bool>,
}

impl SubdomainMask {
    /// A node belongs to the region iff its coordinates lie in the closed box.
    pub fn from_box(grid: &SpatialGrid, omega: &BoxRegion) -> Result<Self> {
        let inside: Vec<bool> = (0..grid.num_nodes())
            .map(|p| omega.contains(&grid.coords(p)[..grid.dim()]))
            .collect();
        if inside.iter().enumerate().any(|(p, &i)| i && grid.is_boundary(p)) {
            return Err(Error::InvalidGrid("control region touches the domain boundary".into()));
        }
        Ok(SubdomainMask { inside })
    }

    /// No node is controlled.
    pub fn empty(grid: &SpatialGrid) -> Self {
        SubdomainMask { inside: vec![false; grid.num_nodes()] }
    }

    pub fn contains(&self, node: usize) -> bool {
        self.inside[node]
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.inside.iter().enumerate().filter(|(_, &b)| b).map(|(p, _)| p)
    }

    pub fn includes(&self, region: Region, node: usize) -> bool {
        match region {
            Region::All => true,
            Region::Omega => self.inside[node],
            Region::Complement => !self.inside[node],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: SpatialGrid,
    tgrid: TimeGrid,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: SpatialGrid, tgrid: TimeGrid) -> Self {
        SpaceTimeField { grid, tgrid, values: vec![0.0; grid.num_nodes() * tgrid.len()] }
    }

    /// Samples `f(x, t)`, where `x` has `grid.dim()` coordinates.
    pub fn from_fn(grid: SpatialGrid, tgrid: TimeGrid, f: impl Fn(&[f64], f64) -> f64) -> Self {
        let nk = tgrid.len();
        let mut values = Vec::with_capacity(grid.num_nodes() * nk);
        for p in 0..grid.num_nodes() {
            let x = grid.coords(p);
            for k in 0..nk {
                values.push(f(&x[..grid.dim()], tgrid.node(k)));
            }
        }
        SpaceTimeField { grid, tgrid, values }
    }

    pub fn from_values(grid: SpatialGrid, tgrid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() * tgrid.len() {
            return Err(Error::GridMismatch("field length differs from nodes x (nt + 1)"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("space-time field"));
        }
        Ok(SpaceTimeField { grid, tgrid, values })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
    pub fn tgrid(&self) -> &TimeGrid {
        &self.tgrid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn series(&self, node: usize) -> &[f64] {
        let nk = self.tgrid.len();
        &self.values[node * nk..(node + 1) * nk]
    }
    pub fn series_mut(&mut self, node: usize) -> &mut [f64] {
        let nk = self.tgrid.len();
        &mut self.values[node * nk..(node + 1) * nk]
    }
    pub fn get(&self, node: usize, k: usize) -> f64 {
        self.values[node * self.tgrid.len() + k]
    }
    pub fn set(&mut self, node: usize, k: usize, v: f64) {
        let nk = self.tgrid.len();
        self.values[node * nk + k] = v;
    }

    /// All node values at time level `k`.
    pub fn slice_at(&self, k: usize) -> Vec<f64> {
        let nk = self.tgrid.len();
        (0..self.grid.num_nodes()).map(|p| self.values[p * nk + k]).collect()
    }

    pub fn same_layout(&self, other: &SpaceTimeField) -> Result<()> {
        if self.grid != other.grid || self.tgrid != other.tgrid {
            return Err(Error::GridMismatch("space-time fields on different grids"));
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &SpaceTimeField) -> Result<()> {
        self.same_layout(other)?;
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    /// Copy with every node outside `region` set to zero.
    pub fn restricted(&self, mask: &SubdomainMask, region: Region) -> Self {
        let mut out = self.clone();
        for p in 0..self.grid.num_nodes() {
            if !mask.includes(region, p) {
                out.series_mut(p).iter_mut().for_each(|v| *v = 0.0);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero_on_boundary(&self) -> bool {
        (0..self.grid.num_nodes())
            .filter(|&p| self.grid.is_boundary(p))
            .all(|p| self.series(p).iter().all(|&v| v == 0.0))
    }

    /// Applies a time operator to the series of every interior node.
    /// Boundary series of the result are zero.
    pub fn lift(&self, ops: &MemoryOperators, tag: TimeOpTag) -> Result<Self> {
        if *ops.grid() != self.tgrid {
            return Err(Error::GridMismatch("time operators built for another time grid"));
        }
        let mut out = SpaceTimeField::zeros(self.grid, self.tgrid);
        for p in 0..self.grid.num_nodes() {
            if !self.grid.is_boundary(p) {
                let y = ops.apply(tag, self.series(p));
                out.series_mut(p).copy_from_slice(&y);
            }
        }
        Ok(out)
    }

    /// Trapezoidal `int_region int_0^T field`.
    pub fn integrate(&self, mask: &SubdomainMask, region: Region) -> f64 {
        let wx = self.grid.quadrature_weights();
        let wt = self.tgrid.weights();
        (0..self.grid.num_nodes())
            .filter(|&p| mask.includes(region, p))
            .map(|p| wx[p] * self.series(p).iter().zip(&wt).map(|(v, w)| v * w).sum::<f64>())
            .sum()
    }

    /// Trapezoidal `int_region field(x, t_k) dx`.
    pub fn integrate_space_at(&self, k: usize, mask: &SubdomainMask, region: Region) -> f64 {
        let wx = self.grid.quadrature_weights();
        (0..self.grid.num_nodes())
            .filter(|&p| mask.includes(region, p))
            .map(|p| wx[p] * self.get(p, k))
            .sum()
    }

    /// Space-time trapezoidal `int_region int_0^T a b`.
    pub fn inner(&self, other: &SpaceTimeField, mask: &SubdomainMask, region: Region) -> Result<f64> {
        self.same_layout(other)?;
        let wx = self.grid.quadrature_weights();
        let wt = self.tgrid.weights();
        Ok((0..self.grid.num_nodes())
            .filter(|&p| mask.includes(region, p))
            .map(|p| {
                let s: f64 = self.series(p).iter().zip(other.series(p)).zip(&wt).map(|((a, b), w)| a * b * w).sum();
                wx[p] * s
            })
            .sum())
    }

    /// `int_region a(x, t_k) b(x, t_k) dx`.
    pub fn inner_at(&self, other: &SpaceTimeField, k: usize, mask: &SubdomainMask, region: Region) -> Result<f64> {
        self.same_layout(other)?;
        let wx = self.grid.quadrature_weights();
        Ok((0..self.grid.num_nodes())
            .filter(|&p| mask.includes(region, p))
            .map(|p| wx[p] * self.get(p, k) * other.get(p, k))
            .sum())
    }

    pub fn l2_norm(&self, mask: &SubdomainMask, region: Region) -> f64 {
        libm::sqrt(self.inner(self, mask, region).unwrap_or(0.0).max(0.0))
    }
}

/// Applies the named time operator at every interior node.
pub fn lift_timeop(field: &SpaceTimeField, tag: TimeOpTag, params: &ModelParams) -> Result<SpaceTimeField> {
    let ops = MemoryOperators::new(params, *field.tgrid())?;
    field.lift(&ops, tag)
}

pub fn integrate_spacetime(field: &SpaceTimeField, mask: &SubdomainMask, region: Region) -> f64 {
    field.integrate(mask, region)
}

pub fn integrate_space_at(field: &SpaceTimeField, k: usize, mask: &SubdomainMask, region: Region) -> f64 {
    field.integrate_space_at(k, mask, region)
}
