//! Dyadic Whitney decompositions of lattice open sets, with a piecewise-linear partition of
//! unity and the relative truncation built on it.
//!
//! Geometry is exact: cube corners live on an integer lattice fine enough that the `9/8`
//! and `3/2` inflations of every cube are integral, and distances are compared as squared
//! integers.

mod truncation;

pub use truncation::{relative_truncate, truncation_constants, TruncationConstants};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::maximal::CellMask;
use crate::scalar::Real;

/// Side of a finest-level cube in integer units (makes `s/16` integral for every cube).
const FINEST: i64 = 16;

/// Sub-cell samples per axis used for the partition of unity; odd so the cell centre is one.
pub const SAMPLES_PER_AXIS: usize = 5;

/// What lies outside the lattice box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutsideRule {
    /// Everything outside the box belongs to the complement of `O`.
    #[default]
    Complement,
    /// The box is the whole space; only non-member cells form the complement.
    Universe,
}

/// Closed dyadic cube `[lo, lo + side]^d` in integer units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cube {
    pub level: u32,
    /// Position in the level's dyadic lattice.
    pub index: [i64; 2],
    pub floor_clipped: bool,
    #[serde(skip)]
    lo: [i64; 2],
    #[serde(skip)]
    side: i64,
}

impl Cube {
    fn hi(&self, k: usize) -> i64 {
        self.lo[k] + self.side
    }
}

/// `(cube, psi, grad psi)` at one sample.
pub type PartitionEntry<S> = (usize, S, [S; 2]);

/// Partition of unity sampled at [`SAMPLES_PER_AXIS`]^d points per lattice cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity<S> {
    /// Per sample, the cubes with non-zero `psi` as `(cube, psi, grad psi)`.
    pub entries: Vec<Vec<PartitionEntry<S>>>,
    /// Measured `max_i diam(Q_i) max |grad psi_i|`.
    pub gradient_constant: S,
}

impl<S> PartitionOfUnity<S> {
    /// Sample index of sub-point `(jx, jy)` in lattice cell `cell`.
    pub fn sample_index(&self, dim: usize, cell: usize, jx: usize, jy: usize) -> usize {
        let per = if dim == 1 { SAMPLES_PER_AXIS } else { SAMPLES_PER_AXIS * SAMPLES_PER_AXIS };
        cell * per + jy * SAMPLES_PER_AXIS + jx
    }

    /// Sample at the centre of lattice cell `cell`.
    pub fn centre_sample(&self, dim: usize, cell: usize) -> usize {
        let mid = SAMPLES_PER_AXIS / 2;
        self.sample_index(dim, cell, mid, if dim == 1 { 0 } else { mid })
    }
}

/// Whitney cubes of a lattice open set, their neighbour sets and optional partition.
#[derive(Debug, Clone)]
pub struct WhitneyDecomposition<S> {
    pub grid: Grid<S>,
    pub open: CellMask,
    pub rule: OutsideRule,
    /// Finest level searched before cubes are clipped; the root is level 0.
    pub floor: u32,
    pub cubes: Vec<Cube>,
    /// `A_i`: indices of cubes meeting `Q_i`, including `i`, ascending.
    pub neighbors: Vec<Vec<usize>>,
    pub partition: Option<PartitionOfUnity<S>>,
    cell_level: u32,
    /// Integer units per lattice cell.
    cell_units: i64,
}

/// Level of a single lattice cell for the given lattice.
pub fn cell_level<S: Real>(grid: &Grid<S>) -> u32 {
    let n = grid.nx.max(if grid.dim == 1 { 1 } else { grid.ny });
    n.next_power_of_two().trailing_zeros()
}

struct Geometry<'a> {
    dim: usize,
    n: [i64; 2],
    w: i64,
    mask: &'a CellMask,
    rule: OutsideRule,
    /// Complement cells touching `O` (lower corners, units).
    boundary: Vec<[i64; 2]>,
}

impl Geometry<'_> {
    fn member(&self, ix: i64, iy: i64) -> bool {
        ix >= 0 && iy >= 0 && ix < self.n[0] && iy < self.n[1] && self.mask.contains(ix as usize, iy as usize)
    }

    /// Lattice cell range whose interiors meet the open box `(lo, lo + side)`, clipped to the lattice.
    fn cell_range(&self, lo: [i64; 2], side: i64, k: usize) -> (i64, i64) {
        if k >= self.dim {
            return (0, 1);
        }
        let a = lo[k].div_euclid(self.w).max(0);
        let b = (lo[k] + side + self.w - 1).div_euclid(self.w).min(self.n[k]);
        (a, b)
    }

    fn intersects(&self, q: &Cube) -> bool {
        let (x0, x1) = self.cell_range(q.lo, q.side, 0);
        let (y0, y1) = self.cell_range(q.lo, q.side, 1);
        (y0..y1).any(|iy| (x0..x1).any(|ix| self.member(ix, iy)))
    }

    fn inside_open(&self, q: &Cube) -> bool {
        for k in 0..self.dim {
            if q.lo[k] < 0 || q.hi(k) > self.n[k] * self.w {
                return false;
            }
        }
        let (x0, x1) = self.cell_range(q.lo, q.side, 0);
        let (y0, y1) = self.cell_range(q.lo, q.side, 1);
        (y0..y1).all(|iy| (x0..x1).all(|ix| self.member(ix, iy)))
    }

    /// Squared distance from the closed cube to the complement of `O`.
    fn dist2(&self, q: &Cube) -> i64 {
        let mut best = i64::MAX;
        for b in &self.boundary {
            let mut d2 = 0;
            for k in 0..self.dim {
                let gap = (b[k] - q.hi(k)).max(q.lo[k] - (b[k] + self.w)).max(0);
                d2 += gap * gap;
            }
            best = best.min(d2);
            if best == 0 {
                return 0;
            }
        }
        if self.rule == OutsideRule::Complement {
            for k in 0..self.dim {
                let gap = q.lo[k].min(self.n[k] * self.w - q.hi(k)).max(0);
                best = best.min(gap * gap);
            }
        }
        best
    }

    fn diam2(&self, q: &Cube) -> i64 {
        self.dim as i64 * q.side * q.side
    }
}

fn children(q: &Cube, dim: usize) -> Vec<Cube> {
    let s = q.side / 2;
    let ny: i64 = if dim == 1 { 1 } else { 2 };
    let mut out = Vec::with_capacity(4);
    for cy in 0..ny {
        for cx in 0..2 {
            let lo = [q.lo[0] + cx * s, if dim == 1 { 0 } else { q.lo[1] + cy * s }];
            out.push(Cube {
                level: q.level + 1,
                index: [q.index[0] * 2 + cx, if dim == 1 { 0 } else { q.index[1] * 2 + cy }],
                floor_clipped: false,
                lo,
                side: s,
            });
        }
    }
    out
}

/// Whitney decomposition of the open set `O` (interior of the union of its closed cells).
///
/// A dyadic cube `Q` of the root is accepted iff `dist(Q, O^c) > diam(Q)` and its parent fails
/// that test. Cubes still unaccepted at `floor` are emitted with `floor_clipped` set,
/// subdivided until they lie in `O`. `floor` defaults to the level of one lattice cell.
pub fn whitney_decompose<S: Real>(
    grid: &Grid<S>,
    open: &CellMask,
    floor: Option<u32>,
    rule: OutsideRule,
) -> Result<WhitneyDecomposition<S>> {
    let ny = if grid.dim == 1 { 1 } else { grid.ny };
    if open.nx != grid.nx || open.ny != ny {
        return Err(Error::Mismatch(format!("mask is {}x{}, lattice is {}x{}", open.nx, open.ny, grid.nx, ny)));
    }
    if open.is_empty() {
        return Err(Error::Whitney("the open set is empty".into()));
    }
    if rule == OutsideRule::Universe && open.count() == open.members.len() {
        return Err(Error::Whitney("the open set fills the whole lattice; its complement is empty".into()));
    }
    let m = cell_level(grid);
    let floor = floor.unwrap_or(m);
    if floor > m + 8 {
        return Err(Error::Whitney(format!("resolution floor {floor} is more than 8 levels below the cell level {m}")));
    }
    let fine = floor.max(m);
    let w = FINEST << (fine - m);
    let dim = grid.dim;

    let mut boundary = Vec::new();
    for iy in 0..ny as i64 {
        for ix in 0..grid.nx as i64 {
            if open.contains(ix as usize, iy as usize) {
                continue;
            }
            let touches = (-1..=1).any(|dy| {
                (-1..=1).any(|dx| {
                    (dx, dy) != (0, 0) && {
                        let (jx, jy) = (ix + dx, iy + dy);
                        jx >= 0
                            && jy >= 0
                            && jx < grid.nx as i64
                            && jy < ny as i64
                            && open.contains(jx as usize, jy as usize)
                    }
                })
            });
            if touches {
                boundary.push([ix * w, iy * w]);
            }
        }
    }
    let geo = Geometry { dim, n: [grid.nx as i64, ny as i64], w, mask: open, rule, boundary };

    let root = Cube { level: 0, index: [0, 0], floor_clipped: false, lo: [0, 0], side: FINEST << fine };
    let mut cubes = Vec::new();
    let mut stack = vec![root];
    while let Some(q) = stack.pop() {
        if !geo.intersects(&q) {
            continue;
        }
        if geo.dist2(&q) > geo.diam2(&q) {
            cubes.push(q);
        } else if q.level >= floor {
            clip(&geo, q, &mut cubes);
        } else {
            stack.extend(children(&q, dim).into_iter().rev());
        }
    }
    cubes.sort_by_key(|q| (q.level, q.index[1], q.index[0]));

    let neighbors = neighbor_sets(&cubes, dim);
    Ok(WhitneyDecomposition {
        grid: grid.clone(),
        open: open.clone(),
        rule,
        floor,
        cubes,
        neighbors,
        partition: None,
        cell_level: m,
        cell_units: w,
    })
}

fn clip(geo: &Geometry<'_>, q: Cube, out: &mut Vec<Cube>) {
    let mut stack = vec![q];
    while let Some(q) = stack.pop() {
        if !geo.intersects(&q) {
            continue;
        }
        if geo.inside_open(&q) || q.side <= FINEST {
            out.push(Cube { floor_clipped: true, ..q });
        } else {
            stack.extend(children(&q, geo.dim).into_iter().rev());
        }
    }
}

fn closed_meet(a: &Cube, b: &Cube, dim: usize) -> bool {
    (0..dim).all(|k| a.lo[k] <= b.hi(k) && b.lo[k] <= a.hi(k))
}

fn open_meet(a: &Cube, b: &Cube, dim: usize) -> bool {
    (0..dim).all(|k| a.lo[k] < b.hi(k) && b.lo[k] < a.hi(k))
}

fn neighbor_sets(cubes: &[Cube], dim: usize) -> Vec<Vec<usize>> {
    (0..cubes.len())
        .into_par_iter()
        .map(|i| (0..cubes.len()).filter(|&j| closed_meet(&cubes[i], &cubes[j], dim)).collect())
        .collect()
}

/// Tensor-product bump: `1` on `Q`, `0` outside `(9/8) Q`, linear in between along each axis.
fn bump<S: Real>(x: [S; 2], centre: [S; 2], half: S, dim: usize) -> (S, [S; 2]) {
    let ramp = half / S::lit(8.0);
    let mut theta = [S::one(); 2];
    let mut dtheta = [S::zero(); 2];
    for k in 0..dim {
        let off = x[k] - centre[k];
        let t = off.abs() - half;
        if t >= ramp {
            return (S::zero(), [S::zero(); 2]);
        }
        if t > S::zero() {
            theta[k] = S::one() - t / ramp;
            dtheta[k] = -off.signum() / ramp;
        }
    }
    let phi = theta[0] * theta[1];
    (phi, [dtheta[0] * theta[1], theta[0] * dtheta[1]])
}

/// Per-property outcome of [`WhitneyDecomposition::check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhitneyCheck {
    pub cubes: usize,
    pub floor_clipped: usize,
    /// (i): interiors pairwise disjoint.
    pub disjoint: bool,
    /// (i): every cell of `O` covered exactly, no cell outside `O` touched.
    pub covers: bool,
    /// (ii) violations among unclipped cubes.
    pub separation_violations: usize,
    /// Extremes of `dist / diam` over unclipped cubes.
    pub min_dist_ratio: f64,
    pub max_dist_ratio: f64,
    /// (iii) violations among touching pairs, excluding cubes finer than the floor.
    pub size_ratio_violations: usize,
    /// (iv): largest `|A_i \ {i}|` and its bound `4^d - 2^d`.
    pub max_neighbors: usize,
    pub neighbor_bound: usize,
    pub neighbor_symmetric: bool,
    /// (v) violations: pairs where `j in A_i` disagrees with the open `3/2` inflations meeting.
    pub inflation_violations: usize,
    /// (v) violations among pairs of unclipped cubes.
    pub inflation_violations_unclipped: usize,
    /// (vi), present once the partition is built.
    pub partition: Option<PartitionCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionCheck {
    /// Largest `|sum_i psi_i - 1|` over samples in `O`.
    pub sum_error: f64,
    /// Samples outside `O` where some `psi_i` is non-zero.
    pub outside_support: usize,
    /// Samples in `(1/2) Q_i` with `psi_i != 1`.
    pub half_cube_violations: usize,
    /// Samples outside `(9/8) Q_i` with `psi_i != 0`.
    pub support_violations: usize,
    pub gradient_constant: f64,
}

impl WhitneyCheck {
    /// Whether every property holds (separation only for unclipped cubes).
    pub fn pass(&self, partition_tol: f64) -> bool {
        let base = self.disjoint
            && self.covers
            && self.separation_violations == 0
            && self.size_ratio_violations == 0
            && self.max_neighbors <= self.neighbor_bound
            && self.neighbor_symmetric
            && self.inflation_violations_unclipped == 0;
        base && self.partition.as_ref().is_none_or(|p| {
            p.sum_error <= partition_tol
                && p.outside_support == 0
                && p.half_cube_violations == 0
                && p.support_violations == 0
        })
    }
}

impl<S: Real> WhitneyDecomposition<S> {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    fn units_to_length(&self) -> S {
        self.grid.h / S::from_i64(self.cell_units).unwrap()
    }

    fn geometry(&self) -> Geometry<'_> {
        let ny = if self.grid.dim == 1 { 1 } else { self.grid.ny };
        let mut boundary = Vec::new();
        let w = self.cell_units;
        for iy in 0..ny {
            for ix in 0..self.grid.nx {
                if !self.open.contains(ix, iy) {
                    boundary.push([ix as i64 * w, iy as i64 * w]);
                }
            }
        }
        Geometry {
            dim: self.grid.dim,
            n: [self.grid.nx as i64, ny as i64],
            w,
            mask: &self.open,
            rule: self.rule,
            boundary,
        }
    }

    /// Lower corner of `Q_i` in physical coordinates.
    pub fn corner(&self, i: usize) -> [S; 2] {
        let u = self.units_to_length();
        let q = &self.cubes[i];
        let y = if self.grid.dim == 1 { S::zero() } else { self.grid.lo[1] + S::from_i64(q.lo[1]).unwrap() * u };
        [self.grid.lo[0] + S::from_i64(q.lo[0]).unwrap() * u, y]
    }

    pub fn side(&self, i: usize) -> S {
        S::from_i64(self.cubes[i].side).unwrap() * self.units_to_length()
    }

    pub fn diam(&self, i: usize) -> S {
        self.side(i) * S::from_usize_lossy(self.grid.dim).sqrt()
    }

    pub fn centre(&self, i: usize) -> [S; 2] {
        let c = self.corner(i);
        let half = self.side(i) / S::lit(2.0);
        [c[0] + half, if self.grid.dim == 1 { S::zero() } else { c[1] + half }]
    }

    /// `dist(Q_i, O^c)` by exact geometry against every complement cell.
    pub fn distance_to_complement(&self, i: usize) -> S {
        let d2 = self.geometry().dist2(&self.cubes[i]);
        S::from_i64(d2).unwrap().sqrt() * self.units_to_length()
    }

    /// Lattice position of the sub-cell sample `s` in physical coordinates.
    pub fn sample_point(&self, s: usize) -> (usize, [S; 2]) {
        let dim = self.grid.dim;
        let per = if dim == 1 { SAMPLES_PER_AXIS } else { SAMPLES_PER_AXIS * SAMPLES_PER_AXIS };
        let cell = s / per;
        let r = s % per;
        let (jx, jy) = (r % SAMPLES_PER_AXIS, r / SAMPLES_PER_AXIS);
        let (ix, iy) = self.grid.coords(cell);
        let h = self.grid.h;
        let q = S::from_usize_lossy(SAMPLES_PER_AXIS);
        let off = |j: usize| (S::from_usize_lossy(2 * j + 1) / (S::lit(2.0) * q)) * h;
        let x = self.grid.lo[0] + S::from_usize_lossy(ix) * h + off(jx);
        let y = if dim == 1 { S::zero() } else { self.grid.lo[1] + S::from_usize_lossy(iy) * h + off(jy) };
        (cell, [x, y])
    }

    /// Builds `psi_i = phi_i / sum_j phi_j` at every sub-cell sample.
    ///
    /// Fails if a sample inside `O` is not covered by any bump.
    pub fn partition_of_unity(&mut self) -> Result<()> {
        let dim = self.grid.dim;
        let ny = if dim == 1 { 1 } else { self.grid.ny };
        let w = self.cell_units;
        // cubes whose inflated support meets each lattice cell
        let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); self.grid.nx * ny];
        for (i, q) in self.cubes.iter().enumerate() {
            let pad = q.side / 16;
            let range = |k: usize, n: usize| {
                if k >= dim {
                    return (0, 1);
                }
                let a = (q.lo[k] - pad).div_euclid(w).max(0) as usize;
                let b = ((q.hi(k) + pad + w - 1).div_euclid(w).max(0) as usize).min(n);
                (a, b)
            };
            let (x0, x1) = range(0, self.grid.nx);
            let (y0, y1) = range(1, ny);
            for iy in y0..y1 {
                for ix in x0..x1 {
                    by_cell[iy * self.grid.nx + ix].push(i);
                }
            }
        }
        let per = if dim == 1 { SAMPLES_PER_AXIS } else { SAMPLES_PER_AXIS * SAMPLES_PER_AXIS };
        let total = self.grid.nx * ny * per;
        let geo: Vec<([S; 2], S)> =
            (0..self.cubes.len()).map(|i| (self.centre(i), self.side(i) / S::lit(2.0))).collect();
        let entries: Vec<Result<Vec<PartitionEntry<S>>>> = (0..total)
            .into_par_iter()
            .map(|s| {
                let (cell, x) = self.sample_point(s);
                let mut raw = Vec::new();
                let mut sum = S::zero();
                let mut dsum = [S::zero(); 2];
                for &i in &by_cell[cell] {
                    let (phi, dphi) = bump(x, geo[i].0, geo[i].1, dim);
                    if phi > S::zero() {
                        sum = sum + phi;
                        dsum[0] = dsum[0] + dphi[0];
                        dsum[1] = dsum[1] + dphi[1];
                        raw.push((i, phi, dphi));
                    }
                }
                if raw.is_empty() {
                    if self.open.members[cell] {
                        return Err(Error::Whitney(format!("sample {s} in O is not covered by any bump")));
                    }
                    return Ok(raw);
                }
                let s2 = sum * sum;
                Ok(raw
                    .into_iter()
                    .map(|(i, phi, dphi)| {
                        let g = [(dphi[0] * sum - phi * dsum[0]) / s2, (dphi[1] * sum - phi * dsum[1]) / s2];
                        (i, phi / sum, g)
                    })
                    .collect())
            })
            .collect();
        let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
        let mut constant = S::zero();
        for list in &entries {
            for &(i, _, g) in list {
                let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
                constant = constant.max(self.diam(i) * gn);
            }
        }
        self.partition = Some(PartitionOfUnity { entries, gradient_constant: constant });
        Ok(())
    }

    /// Checks properties (i)-(vi); (vi) only if the partition has been built.
    pub fn check(&self) -> WhitneyCheck {
        let dim = self.grid.dim;
        let geo = self.geometry();
        let n = self.cubes.len();
        let clipped = self.cubes.iter().filter(|q| q.floor_clipped).count();

        let disjoint = (0..n)
            .all(|i| self.neighbors[i].iter().all(|&j| j == i || !open_meet(&self.cubes[i], &self.cubes[j], dim)));

        // exact area bookkeeping per lattice cell
        let ny = if dim == 1 { 1 } else { self.grid.ny };
        let w = self.cell_units;
        let mut area = vec![0i64; self.grid.nx * ny];
        let mut outside = false;
        for q in &self.cubes {
            let (x0, x1) = geo.cell_range(q.lo, q.side, 0);
            let (y0, y1) = geo.cell_range(q.lo, q.side, 1);
            for iy in y0..y1 {
                for ix in x0..x1 {
                    let overlap = |k: usize, i: i64| {
                        if k >= dim {
                            1
                        } else {
                            (q.hi(k).min((i + 1) * w) - q.lo[k].max(i * w)).max(0)
                        }
                    };
                    let a = overlap(0, ix) * overlap(1, iy);
                    if a > 0 {
                        area[iy as usize * self.grid.nx + ix as usize] += a;
                        if !geo.member(ix, iy) {
                            outside = true;
                        }
                    }
                }
            }
        }
        let full = if dim == 1 { w } else { w * w };
        let covers = !outside && area.iter().zip(&self.open.members).all(|(&a, &m)| if m { a == full } else { a == 0 });

        let mut separation_violations = 0;
        let (mut lo_ratio, mut hi_ratio) = (f64::INFINITY, 0.0f64);
        for q in self.cubes.iter().filter(|q| !q.floor_clipped) {
            let d2 = geo.dist2(q);
            let diam2 = geo.diam2(q);
            if !(d2 > diam2 && d2 <= 16 * diam2) {
                separation_violations += 1;
            }
            let ratio = (d2 as f64 / diam2 as f64).sqrt();
            lo_ratio = lo_ratio.min(ratio);
            hi_ratio = hi_ratio.max(ratio);
        }

        let sub_floor = |q: &Cube| q.level > self.floor;
        let mut size_ratio_violations = 0;
        let mut symmetric = true;
        let mut max_neighbors = 0;
        for i in 0..n {
            max_neighbors = max_neighbors.max(self.neighbors[i].len() - 1);
            for &j in &self.neighbors[i] {
                if self.neighbors[j].binary_search(&i).is_err() {
                    symmetric = false;
                }
                let (a, b) = (&self.cubes[i], &self.cubes[j]);
                if sub_floor(a) || sub_floor(b) {
                    continue;
                }
                if 2 * b.side < a.side || b.side > 2 * a.side {
                    size_ratio_violations += 1;
                }
            }
        }

        let inflate = |q: &Cube| {
            let pad = q.side / 4;
            Cube { lo: [q.lo[0] - pad, q.lo[1] - pad], side: q.side + 2 * pad, ..*q }
        };
        let inflated: Vec<Cube> = self.cubes.iter().map(inflate).collect();
        let (inflation_violations, inflation_violations_unclipped) = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut all = 0usize;
                let mut unclipped = 0usize;
                for j in 0..n {
                    let meets = open_meet(&inflated[i], &inflated[j], dim);
                    let listed = self.neighbors[i].binary_search(&j).is_ok();
                    if meets != listed {
                        all += 1;
                        if !self.cubes[i].floor_clipped && !self.cubes[j].floor_clipped {
                            unclipped += 1;
                        }
                    }
                }
                (all, unclipped)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

        WhitneyCheck {
            cubes: n,
            floor_clipped: clipped,
            disjoint,
            covers,
            separation_violations,
            min_dist_ratio: lo_ratio,
            max_dist_ratio: hi_ratio,
            size_ratio_violations,
            max_neighbors,
            neighbor_bound: 4usize.pow(dim as u32) - 2usize.pow(dim as u32),
            neighbor_symmetric: symmetric,
            inflation_violations,
            inflation_violations_unclipped,
            partition: self.partition.as_ref().map(|p| self.check_partition(p)),
        }
    }

    fn check_partition(&self, pou: &PartitionOfUnity<S>) -> PartitionCheck {
        let dim = self.grid.dim;
        let mut sum_error = 0.0f64;
        let mut outside_support = 0;
        let mut half_cube_violations = 0;
        let mut support_violations = 0;
        let centres: Vec<([S; 2], S)> =
            (0..self.cubes.len()).map(|i| (self.centre(i), self.side(i) / S::lit(2.0))).collect();
        let within = |x: [S; 2], i: usize, factor: S| {
            let (c, half) = centres[i];
            (0..dim).all(|k| (x[k] - c[k]).abs() < half * factor)
        };
        for (s, list) in pou.entries.iter().enumerate() {
            let (cell, x) = self.sample_point(s);
            if self.open.members[cell] {
                let total: f64 = list.iter().map(|e| e.1.as_f64()).sum();
                sum_error = sum_error.max((total - 1.0).abs());
            } else if !list.is_empty() {
                outside_support += 1;
            }
            for &(i, psi, _) in list {
                if !within(x, i, S::lit(9.0 / 8.0)) && psi != S::zero() {
                    support_violations += 1;
                }
            }
            for &(i, psi, _) in list {
                if within(x, i, S::lit(0.5)) && psi != S::one() {
                    half_cube_violations += 1;
                }
            }
        }
        PartitionCheck {
            sum_error,
            outside_support,
            half_cube_violations,
            support_violations,
            gradient_constant: pou.gradient_constant.as_f64(),
        }
    }

    /// JSON-ready listing: `{level, index, neighbors, floor_clipped}` per cube.
    pub fn summary(&self) -> Vec<CubeSummary> {
        self.cubes
            .iter()
            .enumerate()
            .map(|(i, q)| CubeSummary {
                level: q.level,
                index: if self.grid.dim == 1 { vec![q.index[0]] } else { q.index.to_vec() },
                neighbors: self.neighbors[i].clone(),
                floor_clipped: q.floor_clipped,
            })
            .collect()
    }

    /// Cube outlines over the open set, as a self-contained SVG document.
    pub fn to_svg(&self) -> String {
        let size = 512.0;
        let dim = self.grid.dim;
        let ny = if dim == 1 { 1 } else { self.grid.ny };
        let n = self.grid.nx.max(ny) as f64;
        let px = size / n;
        let height = if dim == 1 { px.max(24.0) } else { size };
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{height}" viewBox="0 0 {size} {height}">"#
        );
        let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
        for iy in 0..ny {
            for ix in 0..self.grid.nx {
                if self.open.contains(ix, iy) {
                    let y = if dim == 1 { 0.0 } else { size - (iy + 1) as f64 * px };
                    let hgt = if dim == 1 { height } else { px };
                    let _ = writeln!(
                        svg,
                        r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#dde8f5"/>"##,
                        ix as f64 * px,
                        y,
                        px,
                        hgt
                    );
                }
            }
        }
        let scale = px / self.cell_units as f64;
        for q in &self.cubes {
            let side = q.side as f64 * scale;
            let x = q.lo[0] as f64 * scale;
            let (y, hgt) = if dim == 1 { (0.0, height) } else { (size - q.lo[1] as f64 * scale - side, side) };
            let color = if q.floor_clipped { "#c0392b" } else { "#1f3b5c" };
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{side:.3}" height="{hgt:.3}" fill="none" stroke="{color}" stroke-width="0.6"/>"#
            );
        }
        svg.push_str("</svg>\n");
        svg
    }

    /// Level of a single lattice cell.
    pub fn cell_level(&self) -> u32 {
        self.cell_level
    }

    pub(crate) fn cube_units(&self, i: usize) -> ([i64; 2], i64) {
        (self.cubes[i].lo, self.cubes[i].side)
    }

    pub(crate) fn cell_units(&self) -> i64 {
        self.cell_units
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeSummary {
    pub level: u32,
    pub index: Vec<i64>,
    pub neighbors: Vec<usize>,
    pub floor_clipped: bool,
}
