//! A fully discretized instance: parameters, space and time grids, control
//! mask and the cached time operators.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::space::{SpaceTimeField, SpatialGrid, Stencil, SubdomainMask};
use crate::time::{MemoryOperators, TimeGrid};

#[derive(Debug, Clone)]
pub struct Model {
    params: ModelParams,
    grid: SpatialGrid,
    tgrid: TimeGrid,
    mask: SubdomainMask,
    ops: MemoryOperators,
    interior: Vec<usize>,
    stencil: Stencil,
}

impl Model {
    /// Discretizes the domain of `params` with `nodes` per axis and `nt`
    /// time steps on `[0, T]`. The control mask is the staircase of the
    /// control box.
    pub fn new(params: ModelParams, nodes: &[usize], nt: usize) -> Result<Self> {
        let grid = SpatialGrid::new(params.domain(), params.sim_dim(), nodes)?;
        let tgrid = TimeGrid::new(params.horizon(), nt)?;
        let mask = SubdomainMask::from_box(&grid, params.omega())?;
        let ops = MemoryOperators::new(&params, tgrid)?;
        let interior = grid.interior_nodes();
        let stencil = grid.interior_stencil();
        Ok(Model { params, grid, tgrid, mask, ops, interior, stencil })
    }

    /// Replaces the control mask, e.g. by [`SubdomainMask::empty`].
    pub fn with_mask(mut self, mask: SubdomainMask) -> Result<Self> {
        if mask.len() != self.grid.num_nodes() {
            return Err(Error::GridMismatch("mask size differs from node count"));
        }
        if mask.nodes().any(|p| self.grid.is_boundary(p)) {
            return Err(Error::InvalidGrid("control region touches the domain boundary".into()));
        }
        self.mask = mask;
        Ok(self)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
    pub fn tgrid(&self) -> &TimeGrid {
        &self.tgrid
    }
    pub fn mask(&self) -> &SubdomainMask {
        &self.mask
    }
    pub fn ops(&self) -> &MemoryOperators {
        &self.ops
    }
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }
    /// `-laplacian` on interior nodes.
    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn zeros(&self) -> SpaceTimeField {
        SpaceTimeField::zeros(self.grid, self.tgrid)
    }

    pub fn field_from_fn(&self, f: impl Fn(&[f64], f64) -> f64) -> SpaceTimeField {
        SpaceTimeField::from_fn(self.grid, self.tgrid, f)
    }

    pub fn check_layout(&self, field: &SpaceTimeField) -> Result<()> {
        if *field.grid() != self.grid || *field.tgrid() != self.tgrid {
            return Err(Error::GridMismatch("field does not live on the model grids"));
        }
        Ok(())
    }

    /// Interior series packed node-major, `nt + 1` values per interior node.
    pub(crate) fn gather(&self, field: &SpaceTimeField) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.interior.len() * self.tgrid.len());
        for &p in &self.interior {
            out.extend_from_slice(field.series(p));
        }
        out
    }

    pub(crate) fn scatter(&self, packed: &[f64]) -> SpaceTimeField {
        let nk = self.tgrid.len();
        let mut f = self.zeros();
        for (i, &p) in self.interior.iter().enumerate() {
            f.series_mut(p).copy_from_slice(&packed[i * nk..(i + 1) * nk]);
        }
        f
    }

    /// Estimated bytes for `fields` persistent space-time fields.
    pub fn memory_estimate(&self, fields: usize) -> usize {
        self.grid.num_nodes() * self.tgrid.len() * fields * core::mem::size_of::<f64>()
    }
}
