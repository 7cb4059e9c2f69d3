//! Cell-centred grids, fields, forward-difference calculus and midpoint quadrature.
//!
//! A [`DiscreteDomain`] is a set of interior cells on a uniform lattice. Values live at
//! cell centres; exterior cells carry the homogeneous Dirichlet value `0`. The discrete
//! gradient is a forward difference per axis. Every lattice face touching an interior
//! cell belongs to exactly one *stencil record*: the interior cells themselves plus the
//! exterior "ghost" positions whose forward neighbour is interior.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::{fsum, norm, pow_abs, Real};

/// Polygon to be tiled by interior cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainShape<S> {
    /// `[lo, hi]` in one dimension.
    Interval { lo: S, hi: S },
    /// Axis aligned rectangle `[lo.0, hi.0] x [lo.1, hi.1]`.
    Rectangle { lo: [S; 2], hi: [S; 2] },
    /// Rectangle with the upper-right block `[cut.0, hi.0] x [cut.1, hi.1]` removed.
    LShape { lo: [S; 2], hi: [S; 2], cut: [S; 2] },
}

impl<S: Real> DomainShape<S> {
    pub fn dim(&self) -> usize {
        match self {
            DomainShape::Interval { .. } => 1,
            _ => 2,
        }
    }
}

/// Everything needed to build a [`DiscreteDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec<S> {
    pub shape: DomainShape<S>,
    pub h: S,
    /// Codomain dimension `N` of the unknown (1 or 2).
    pub ncomp: usize,
    /// Centre of the balls `B_R`; defaults to the coordinate origin.
    pub origin: [S; 2],
    /// Layers of exterior cells added around the polygon's bounding box.
    pub pad: usize,
}

impl<S: Real> DomainSpec<S> {
    pub fn new(shape: DomainShape<S>, h: S, ncomp: usize) -> Self {
        DomainSpec { shape, h, ncomp, origin: [S::zero(); 2], pad: 0 }
    }

    pub fn with_origin(mut self, origin: [S; 2]) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_padding(mut self, pad: usize) -> Self {
        self.pad = pad;
        self
    }
}

/// Uniform lattice of `nx * ny` square cells of side `h` (`ny == 1` when `dim == 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<S> {
    pub dim: usize,
    pub nx: usize,
    pub ny: usize,
    pub h: S,
    /// Lower-left corner of the lattice.
    pub lo: [S; 2],
}

impl<S: Real> Grid<S> {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    /// Cell centre of lattice position `(ix, iy)`; signed so that ghost positions work.
    pub fn center_of(&self, ix: i64, iy: i64) -> [S; 2] {
        let half = S::lit(0.5);
        let x = self.lo[0] + (S::from_i64(ix).unwrap() + half) * self.h;
        let y = if self.dim == 1 { S::zero() } else { self.lo[1] + (S::from_i64(iy).unwrap() + half) * self.h };
        [x, y]
    }

    pub fn center(&self, idx: usize) -> [S; 2] {
        let (ix, iy) = self.coords(idx);
        self.center_of(ix as i64, iy as i64)
    }

    /// Upper corner of the lattice.
    pub fn hi(&self) -> [S; 2] {
        let hy = if self.dim == 1 { S::zero() } else { self.h * S::from_usize_lossy(self.ny) };
        [self.lo[0] + self.h * S::from_usize_lossy(self.nx), self.lo[1] + hy]
    }

    /// Euclidean diameter of the lattice box.
    pub fn diameter(&self) -> S {
        let wx = self.h * S::from_usize_lossy(self.nx);
        if self.dim == 1 {
            wx
        } else {
            let wy = self.h * S::from_usize_lossy(self.ny);
            (wx * wx + wy * wy).sqrt()
        }
    }

    /// Cell measure `h^d`.
    pub fn cell_measure(&self) -> S {
        self.h.powi(self.dim as i32)
    }
}

/// Stencil record: one forward-difference gradient sample.
///
/// `base` is the interior cell at the record position (`None` for a ghost), `fwd[a]` the
/// interior cell one step along axis `a` (`None` when that neighbour is exterior).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StencilRecord {
    pub base: Option<usize>,
    pub fwd: [Option<usize>; 2],
}

/// Bounded polygonal domain as an interior cell set on a uniform lattice.
#[derive(Debug, Clone)]
pub struct DiscreteDomain<S> {
    grid: Grid<S>,
    ncomp: usize,
    origin: [S; 2],
    /// Lattice indices of interior cells, in lattice order.
    cells: Vec<usize>,
    /// Lattice index -> interior index.
    slot: Vec<Option<usize>>,
    /// Interior records first (record `i` is cell `i`), then ghosts.
    records: Vec<StencilRecord>,
}

fn cells_along<S: Real>(len: S, h: S, what: &str) -> Result<usize> {
    if !(len > S::zero()) {
        return Err(Error::InvalidDomain(format!("{what} has non-positive extent {len}")));
    }
    let n = (len / h).round();
    let tol = S::lit(1e-9).max(S::epsilon() * S::lit(64.0));
    if ((n * h - len) / len).abs() > tol || n < S::one() {
        return Err(Error::InvalidDomain(format!("{what} extent {len} is not an integer multiple of h = {h}")));
    }
    Ok(n.to_usize().unwrap())
}

/// Tiles `spec.shape` with cells of side `spec.h`.
pub fn build_domain<S: Real>(spec: &DomainSpec<S>) -> Result<DiscreteDomain<S>> {
    let h = spec.h;
    if !(h > S::zero()) || !h.is_finite() {
        return Err(Error::InvalidDomain(format!("spacing must be positive, got {h}")));
    }
    if !(1..=2).contains(&spec.ncomp) {
        return Err(Error::InvalidDomain(format!("codomain dimension must be 1 or 2, got {}", spec.ncomp)));
    }
    let dim = spec.shape.dim();
    let (lo, hi) = match &spec.shape {
        DomainShape::Interval { lo, hi } => ([*lo, S::zero()], [*hi, S::zero()]),
        DomainShape::Rectangle { lo, hi } | DomainShape::LShape { lo, hi, .. } => (*lo, *hi),
    };
    let nx = cells_along(hi[0] - lo[0], h, "x")?;
    let ny = if dim == 1 { 1 } else { cells_along(hi[1] - lo[1], h, "y")? };
    let cut = match &spec.shape {
        DomainShape::LShape { cut, .. } => {
            let cx = cells_along(cut[0] - lo[0], h, "notch x offset")?;
            let cy = cells_along(cut[1] - lo[1], h, "notch y offset")?;
            if cx >= nx || cy >= ny {
                return Err(Error::InvalidDomain("L-shape notch lies outside the rectangle".into()));
            }
            Some((cx, cy))
        }
        _ => None,
    };

    let pad = spec.pad;
    let gnx = nx + 2 * pad;
    let gny = if dim == 1 { 1 } else { ny + 2 * pad };
    let pad_s = S::from_usize_lossy(pad) * h;
    let glo = if dim == 1 { [lo[0] - pad_s, S::zero()] } else { [lo[0] - pad_s, lo[1] - pad_s] };
    let grid = Grid { dim, nx: gnx, ny: gny, h, lo: glo };

    let ypad = if dim == 1 { 0 } else { pad };
    let mut slot = vec![None; grid.len()];
    let mut cells = Vec::new();
    for iy in 0..gny {
        for ix in 0..gnx {
            if ix < pad || ix >= pad + nx || iy < ypad || iy >= ypad + ny {
                continue;
            }
            let (lx, ly) = (ix - pad, iy - ypad);
            if let Some((cx, cy)) = cut {
                if lx >= cx && ly >= cy {
                    continue;
                }
            }
            let idx = grid.index(ix, iy);
            slot[idx] = Some(cells.len());
            cells.push(idx);
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidDomain("domain has no interior cells".into()));
    }
    let dom = DiscreteDomain::from_parts(grid, spec.ncomp, spec.origin, cells, slot);
    if !dom.is_connected() {
        return Err(Error::InvalidDomain("interior cells are not edge-connected".into()));
    }
    Ok(dom)
}

impl<S: Real> DiscreteDomain<S> {
    fn from_parts(grid: Grid<S>, ncomp: usize, origin: [S; 2], cells: Vec<usize>, slot: Vec<Option<usize>>) -> Self {
        let mut dom = DiscreteDomain { grid, ncomp, origin, cells, slot, records: Vec::new() };
        dom.records = dom.assemble_records();
        dom
    }

    /// Builds a domain directly from a lattice mask (used for masks loaded from files).
    pub fn from_mask(grid: Grid<S>, mask: &[bool], ncomp: usize, origin: [S; 2]) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::Mismatch(format!("mask has {} entries, lattice {}", mask.len(), grid.len())));
        }
        let mut slot = vec![None; grid.len()];
        let mut cells = Vec::new();
        for (idx, &m) in mask.iter().enumerate() {
            if m {
                slot[idx] = Some(cells.len());
                cells.push(idx);
            }
        }
        if cells.is_empty() {
            return Err(Error::InvalidDomain("domain has no interior cells".into()));
        }
        let dom = DiscreteDomain::from_parts(grid, ncomp, origin, cells, slot);
        if !dom.is_connected() {
            return Err(Error::InvalidDomain("interior cells are not edge-connected".into()));
        }
        Ok(dom)
    }

    fn lookup(&self, ix: i64, iy: i64) -> Option<usize> {
        if ix < 0 || iy < 0 || ix >= self.grid.nx as i64 || iy >= self.grid.ny as i64 {
            return None;
        }
        self.slot[self.grid.index(ix as usize, iy as usize)]
    }

    fn assemble_records(&self) -> Vec<StencilRecord> {
        let d = self.grid.dim;
        let step = |a: usize| if a == 0 { (1i64, 0i64) } else { (0, 1) };
        let fwd_of = |ix: i64, iy: i64| {
            let mut fwd = [None, None];
            for (a, f) in fwd.iter_mut().enumerate().take(d) {
                let (dx, dy) = step(a);
                *f = self.lookup(ix + dx, iy + dy);
            }
            fwd
        };
        let mut records = Vec::with_capacity(self.cells.len());
        let mut ghosts = BTreeMap::new();
        for &idx in &self.cells {
            let (ix, iy) = self.grid.coords(idx);
            let (ix, iy) = (ix as i64, iy as i64);
            records.push(StencilRecord { base: self.lookup(ix, iy), fwd: fwd_of(ix, iy) });
            for a in 0..d {
                let (dx, dy) = step(a);
                let (gx, gy) = (ix - dx, iy - dy);
                if self.lookup(gx, gy).is_none() {
                    ghosts.entry((gy, gx)).or_insert(());
                }
            }
        }
        for (gy, gx) in ghosts.into_keys() {
            records.push(StencilRecord { base: None, fwd: fwd_of(gx, gy) });
        }
        records
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(c) = queue.pop_front() {
            let (ix, iy) = self.grid.coords(self.cells[c]);
            let (ix, iy) = (ix as i64, iy as i64);
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(n) = self.lookup(ix + dx, iy + dy) {
                    if !seen[n] {
                        seen[n] = true;
                        count += 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        count == self.cells.len()
    }

    pub fn grid(&self) -> &Grid<S> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn h(&self) -> S {
        self.grid.h
    }

    pub fn origin(&self) -> [S; 2] {
        self.origin
    }

    pub fn cell_measure(&self) -> S {
        self.grid.cell_measure()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Lattice index of interior cell `c`.
    pub fn lattice_index(&self, c: usize) -> usize {
        self.cells[c]
    }

    /// Interior index of a lattice cell, if it is interior.
    pub fn interior_index(&self, lattice: usize) -> Option<usize> {
        self.slot[lattice]
    }

    pub fn is_interior(&self, lattice: usize) -> bool {
        self.slot[lattice].is_some()
    }

    pub fn center(&self, c: usize) -> [S; 2] {
        self.grid.center(self.cells[c])
    }

    /// Distance of the centre of cell `c` from the origin.
    pub fn radius_of(&self, c: usize) -> S {
        let x = self.center(c);
        let dx = x[0] - self.origin[0];
        let dy = x[1] - self.origin[1];
        (dx * dx + dy * dy).sqrt()
    }

    pub fn records(&self) -> &[StencilRecord] {
        &self.records
    }

    pub fn num_ghosts(&self) -> usize {
        self.records.len() - self.cells.len()
    }

    /// Entries per cell of a gradient field, `d * N`.
    pub fn grad_width(&self) -> usize {
        self.grid.dim * self.ncomp
    }

    /// Interior mask over the lattice.
    pub fn mask(&self) -> Vec<bool> {
        self.slot.iter().map(Option::is_some).collect()
    }

    /// Cells whose centres lie in the open ball `B_R(origin)`.
    pub fn region(&self, radius: S) -> Region<S> {
        let cells = (0..self.num_cells()).filter(|&c| self.radius_of(c) < radius).collect();
        Region { radius, cells }
    }

    /// All interior cells.
    pub fn whole(&self) -> Region<S> {
        Region { radius: S::infinity(), cells: (0..self.num_cells()).collect() }
    }

    /// Whether the closed ball `B_R(origin)` lies inside the lattice box.
    pub fn ball_within_box(&self, radius: S) -> bool {
        let hi = self.grid.hi();
        let lo = self.grid.lo;
        let ok_x = self.origin[0] - radius >= lo[0] && self.origin[0] + radius <= hi[0];
        ok_x && (self.grid.dim == 1 || (self.origin[1] - radius >= lo[1] && self.origin[1] + radius <= hi[1]))
    }

    /// Forward-difference gradient on every stencil record, `d * N` entries per record.
    pub fn record_gradient(&self, u: &Field<S>) -> Result<Vec<S>> {
        self.check_scalar(u)?;
        let n = self.ncomp;
        let d = self.grid.dim;
        let inv_h = S::one() / self.grid.h;
        let mut out = vec![S::zero(); self.records.len() * d * n];
        for (k, rec) in self.records.iter().enumerate() {
            for a in 0..d {
                for j in 0..n {
                    let here = rec.base.map_or(S::zero(), |c| u.values[c * n + j]);
                    let next = rec.fwd[a].map_or(S::zero(), |c| u.values[c * n + j]);
                    out[(k * d + a) * n + j] = (next - here) * inv_h;
                }
            }
        }
        Ok(out)
    }

    /// Adjoint of [`record_gradient`](Self::record_gradient): maps record-wise `d * N` data
    /// to per-cell `N` vectors with `<grad u, q> = <u, grad_adjoint(q)>`.
    pub fn gradient_adjoint(&self, q: &[S]) -> Vec<S> {
        let n = self.ncomp;
        let d = self.grid.dim;
        let inv_h = S::one() / self.grid.h;
        let mut out = vec![S::zero(); self.cells.len() * n];
        for (k, rec) in self.records.iter().enumerate() {
            for a in 0..d {
                for j in 0..n {
                    let v = q[(k * d + a) * n + j] * inv_h;
                    if let Some(c) = rec.base {
                        out[c * n + j] = out[c * n + j] - v;
                    }
                    if let Some(c) = rec.fwd[a] {
                        out[c * n + j] = out[c * n + j] + v;
                    }
                }
            }
        }
        out
    }

    pub(crate) fn check_scalar(&self, u: &Field<S>) -> Result<()> {
        if u.rank != Rank::Scalar || u.width != self.ncomp || u.values.len() != self.num_cells() * self.ncomp {
            return Err(Error::Mismatch(format!(
                "expected scalar field with {} cells x {} components, got {:?} x {} ({} values)",
                self.num_cells(),
                self.ncomp,
                u.rank,
                u.width,
                u.values.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_field(&self, u: &Field<S>) -> Result<()> {
        let want = match u.rank {
            Rank::Scalar => self.ncomp,
            Rank::Gradient => self.grad_width(),
            Rank::Custom => u.width,
        };
        if u.width != want || u.values.len() != self.num_cells() * u.width {
            return Err(Error::Mismatch(format!(
                "{:?} field of width {} with {} values does not fit {} cells",
                u.rank,
                u.width,
                u.values.len(),
                self.num_cells()
            )));
        }
        Ok(())
    }

    /// Zero extension of per-cell nonnegative scalars onto the whole lattice.
    pub fn extend_by_zero(&self, per_cell: &[S]) -> BoxField<S> {
        let mut values = vec![S::zero(); self.grid.len()];
        for (c, &v) in per_cell.iter().enumerate() {
            values[self.cells[c]] = v;
        }
        BoxField { nx: self.grid.nx, ny: self.grid.ny, values }
    }

    /// Restriction of a lattice field to interior cells.
    pub fn restrict(&self, f: &BoxField<S>) -> Vec<S> {
        self.cells.iter().map(|&idx| f.values[idx]).collect()
    }
}

/// What a [`Field`] stores per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rank {
    /// A vector in `R^N`.
    Scalar,
    /// A `d x N` matrix, stored axis-major (`entry (a, j)` at `a * N + j`).
    Gradient,
    /// Any fixed width (cut-offs, coefficients).
    Custom,
}

/// Cell-centred values on the interior cells of a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<S> {
    pub rank: Rank,
    pub width: usize,
    pub values: Vec<S>,
}

impl<S: Real> Field<S> {
    pub fn zeros(dom: &DiscreteDomain<S>, rank: Rank) -> Self {
        let width = match rank {
            Rank::Scalar => dom.ncomp(),
            Rank::Gradient => dom.grad_width(),
            Rank::Custom => 1,
        };
        Field { rank, width, values: vec![S::zero(); dom.num_cells() * width] }
    }

    /// Samples `f(center, out)` on every interior cell.
    pub fn from_fn(dom: &DiscreteDomain<S>, rank: Rank, mut f: impl FnMut([S; 2], &mut [S])) -> Self {
        let mut field = Field::zeros(dom, rank);
        let w = field.width;
        for c in 0..dom.num_cells() {
            f(dom.center(c), &mut field.values[c * w..(c + 1) * w]);
        }
        field
    }

    /// One value per cell (rank [`Rank::Custom`], width 1).
    pub fn coefficient(values: Vec<S>) -> Self {
        Field { rank: Rank::Custom, width: 1, values }
    }

    pub fn num_cells(&self) -> usize {
        self.values.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn cell(&self, c: usize) -> &[S] {
        &self.values[c * self.width..(c + 1) * self.width]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [S] {
        let w = self.width;
        &mut self.values[c * w..(c + 1) * w]
    }

    /// Frobenius magnitude per cell.
    pub fn magnitudes(&self) -> Vec<S> {
        (0..self.num_cells()).map(|c| norm(self.cell(c))).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == S::zero())
    }

    pub fn scaled(&self, a: S) -> Self {
        Field { rank: self.rank, width: self.width, values: self.values.iter().map(|&v| a * v).collect() }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: S, other: &Field<S>, b: S) -> Result<Self> {
        if self.width != other.width || self.values.len() != other.values.len() {
            return Err(Error::Mismatch("combining fields of different shape".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect();
        Ok(Field { rank: self.rank, width: self.width, values })
    }

    /// Maximum absolute entry.
    pub fn max_abs(&self) -> S {
        self.values.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    /// Converts the scalar type (e.g. `f64` results into `f32` inputs).
    pub fn cast<T: Real>(&self) -> Field<T> {
        Field { rank: self.rank, width: self.width, values: self.values.iter().map(|v| T::lit(v.as_f64())).collect() }
    }
}

/// Scalar values on every lattice cell, interior or not.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxField<S> {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<S>,
}

impl<S: Real> BoxField<S> {
    pub fn constant(grid: &Grid<S>, value: S) -> Self {
        BoxField { nx: grid.nx, ny: grid.ny, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: &Grid<S>, mut f: impl FnMut([S; 2]) -> S) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        BoxField { nx: grid.nx, ny: grid.ny, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> S {
        self.values.iter().fold(S::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn min(&self) -> S {
        self.values.iter().fold(S::infinity(), |m, &v| m.min(v))
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        BoxField { nx: self.nx, ny: self.ny, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn fits(&self, grid: &Grid<S>) -> bool {
        self.nx == grid.nx && self.ny == grid.ny && self.values.len() == grid.len()
    }
}

/// `Omega_R`: interior cells whose centres lie in the open ball of radius `R` about the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Region<S> {
    pub radius: S,
    pub cells: Vec<usize>,
}

impl<S: Real> Region<S> {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Forward-difference gradient on interior cells, zero Dirichlet ghosts across the boundary.
pub fn gradient<S: Real>(u: &Field<S>, dom: &DiscreteDomain<S>) -> Result<Field<S>> {
    let mut all = dom.record_gradient(u)?;
    all.truncate(dom.num_cells() * dom.grad_width());
    Ok(Field { rank: Rank::Gradient, width: dom.grad_width(), values: all })
}

/// `sum_{c in reg} |v_c|^t w_c h^d` with compensated summation in region order.
pub fn weighted_integral<S: Real>(
    dom: &DiscreteDomain<S>,
    v: &Field<S>,
    weight: Option<&BoxField<S>>,
    t: S,
    reg: &Region<S>,
) -> Result<S> {
    if !(t > S::zero()) {
        return Err(Error::InvalidExponent(format!("integrability exponent must be positive, got {t}")));
    }
    dom.check_field(v)?;
    if let Some(w) = weight {
        if !w.fits(dom.grid()) {
            return Err(Error::Mismatch("weight does not fit the domain lattice".into()));
        }
    }
    let hd = dom.cell_measure();
    let s = fsum(reg.cells.iter().map(|&c| {
        let w = weight.map_or(S::one(), |w| w.values[dom.lattice_index(c)]);
        pow_abs(norm(v.cell(c)), t) * w
    }));
    Ok(s * hd)
}

/// `(sum_{c in reg} |v_c|^t w_c h^d)^(1/t)`, midpoint quadrature; rejects `t < 1`.
pub fn weighted_norm<S: Real>(
    dom: &DiscreteDomain<S>,
    v: &Field<S>,
    weight: Option<&BoxField<S>>,
    t: S,
    reg: &Region<S>,
) -> Result<S> {
    if !(t >= S::one()) {
        return Err(Error::InvalidExponent(format!("norm exponent must be >= 1, got {t}")));
    }
    Ok(weighted_integral(dom, v, weight, t, reg)?.powf(t.recip()))
}

/// Radial cut-off: `1` on `B_R`, `0` outside `B_R'`, smoothstep ramp in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff<S> {
    pub inner: S,
    pub outer: S,
    pub center: [S; 2],
}

impl<S: Real> Cutoff<S> {
    /// Supremum of `|smoothstep'|` on `[0, 1]`; the continuum bound is `RAMP_SLOPE / (R' - R)`.
    pub const RAMP_SLOPE: f64 = 1.5;

    pub fn new(inner: S, outer: S, center: [S; 2]) -> Result<Self> {
        if !(inner > S::zero()) || !(outer > inner) {
            return Err(Error::InvalidArgument(format!(
                "cut-off radii must satisfy 0 < R < R', got R = {inner}, R' = {outer}"
            )));
        }
        Ok(Cutoff { inner, outer, center })
    }

    pub fn value(&self, x: [S; 2]) -> S {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let r = (dx * dx + dy * dy).sqrt();
        if r <= self.inner {
            S::one()
        } else if r >= self.outer {
            S::zero()
        } else {
            let t = (r - self.inner) / (self.outer - self.inner);
            S::one() - t * t * (S::lit(3.0) - S::lit(2.0) * t)
        }
    }

    /// Largest forward-difference gradient magnitude of the sampled cut-off over the lattice,
    /// differencing against the cut-off itself (no Dirichlet ghosts).
    pub fn max_discrete_gradient(&self, grid: &Grid<S>) -> S {
        let mut worst = S::zero();
        for iy in -1..=grid.ny as i64 {
            for ix in -1..=grid.nx as i64 {
                let here = self.value(grid.center_of(ix, iy));
                let gx = (self.value(grid.center_of(ix + 1, iy)) - here) / grid.h;
                let gy =
                    if grid.dim == 2 { (self.value(grid.center_of(ix, iy + 1)) - here) / grid.h } else { S::zero() };
                worst = worst.max((gx * gx + gy * gy).sqrt());
            }
        }
        worst
    }
}

/// Samples the cut-off `rho` with `rho = 1` on `B_R`, `supp rho` in `B_R'` on interior cells.
pub fn cutoff_field<S: Real>(inner: S, outer: S, dom: &DiscreteDomain<S>) -> Result<Field<S>> {
    let cut = Cutoff::new(inner, outer, dom.origin())?;
    Ok(Field::coefficient((0..dom.num_cells()).map(|c| cut.value(dom.center(c))).collect()))
}
