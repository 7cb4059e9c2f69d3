//! Discrete Hardy-Littlewood maximal function, the localized weight `omega`,
//! Muckenhoupt constant estimates and superlevel sets.
//!
//! The lattice box is the computational whole space: balls are clipped to it and
//! averages are taken over the clipped ball. Zero extension outside `Omega` is realised
//! by exterior lattice cells carrying `0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BoxField, DiscreteDomain, Field, Grid};
use crate::operators::ExponentSet;
use crate::scalar::{norm, Real};

/// Radius bucket of a squared integer offset: the least `j` with `j^2 >= dist2`.
fn bucket_table(max_dist2: usize) -> Vec<u32> {
    let mut table = vec![0u32; max_dist2 + 1];
    let mut j = 0usize;
    for (d2, slot) in table.iter_mut().enumerate() {
        while j * j < d2 {
            j += 1;
        }
        *slot = j as u32;
    }
    table
}

/// `MF(x) = max_j` of the average of `F` over lattice cells whose centres lie within
/// `j h` of `x`, for `j = 0..=J` with `J h` spanning the box diagonal. `j = 0` is the cell itself.
pub fn maximal_function<S: Real>(grid: &Grid<S>, f: &BoxField<S>) -> Result<BoxField<S>> {
    if !f.fits(grid) {
        return Err(Error::Mismatch("maximal function input does not fit the lattice".into()));
    }
    if let Some(bad) = f.values.iter().find(|v| !(**v >= S::zero())) {
        return Err(Error::InvalidArgument(format!("maximal function needs F >= 0, found {bad}")));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let max_d2 = (nx - 1) * (nx - 1) + (ny - 1) * (ny - 1);
    let table = bucket_table(max_d2);
    let nb = table[max_d2] as usize + 1;
    let values: Vec<S> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || (vec![S::zero(); nb], vec![0usize; nb]),
            |(sums, counts), x| {
                sums.iter_mut().for_each(|s| *s = S::zero());
                counts.iter_mut().for_each(|c| *c = 0);
                let (xi, xj) = grid.coords(x);
                let fx = f.values[x];
                for yj in 0..ny {
                    let dj = xj.abs_diff(yj);
                    let row = yj * nx;
                    for yi in 0..nx {
                        let di = xi.abs_diff(yi);
                        let b = table[di * di + dj * dj] as usize;
                        // differences from F(x) keep constants exact
                        sums[b] = sums[b] + (f.values[row + yi] - fx);
                        counts[b] += 1;
                    }
                }
                let mut best = fx;
                let mut acc = S::zero();
                let mut n = 0usize;
                for b in 0..nb {
                    if counts[b] == 0 {
                        continue;
                    }
                    acc = acc + sums[b];
                    n += counts[b];
                    let avg = fx + acc / S::from_usize_lossy(n);
                    if avg > best {
                        best = avg;
                    }
                }
                best
            },
        )
        .collect();
    Ok(BoxField { nx, ny, values })
}

/// Lattice cell set, e.g. a superlevel set `O_lambda = [M h_delta > lambda]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    pub nx: usize,
    pub ny: usize,
    pub members: Vec<bool>,
}

impl CellMask {
    pub fn new(nx: usize, ny: usize, members: Vec<bool>) -> Result<Self> {
        if members.len() != nx * ny {
            return Err(Error::Mismatch(format!("mask has {} entries for a {nx}x{ny} lattice", members.len())));
        }
        Ok(CellMask { nx, ny, members })
    }

    pub fn empty(nx: usize, ny: usize) -> Self {
        CellMask { nx, ny, members: vec![false; nx * ny] }
    }

    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let members = (0..nx * ny).map(|i| f(i % nx, i / nx)).collect();
        CellMask { nx, ny, members }
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|m| **m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn contains(&self, ix: usize, iy: usize) -> bool {
        self.members[iy * self.nx + ix]
    }

    pub fn is_subset_of(&self, other: &CellMask) -> bool {
        self.members.iter().zip(&other.members).all(|(a, b)| !*a || *b)
    }
}

/// `O_lambda`: cells whose value exceeds `lambda`.
pub fn level_set<S: Real>(field: &BoxField<S>, lambda: S) -> CellMask {
    CellMask { nx: field.nx, ny: field.ny, members: field.values.iter().map(|&v| v > lambda).collect() }
}

/// Positive weight on the lattice with the parameters it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight<S> {
    pub field: BoxField<S>,
    /// `M[h chi_{Omega_2R}]` (without `delta`), kept for level sets.
    pub maximal: Option<BoxField<S>>,
    pub eps: S,
    pub delta: S,
    pub radius: S,
    pub provenance: String,
}

/// Serializable parameter block of a [`Weight`].
#[derive(Debug, Clone, Serialize)]
pub struct WeightMetadata {
    pub eps: f64,
    pub delta: f64,
    pub radius: f64,
    pub provenance: String,
    pub min: f64,
    pub max: f64,
}

impl<S: Real> Weight<S> {
    /// Wraps an arbitrary positive lattice field.
    pub fn from_field(field: BoxField<S>, provenance: impl Into<String>) -> Result<Self> {
        if field.values.iter().any(|v| !(*v > S::zero()) || !v.is_finite()) {
            return Err(Error::InvalidArgument("weights must be positive and finite".into()));
        }
        Ok(Weight {
            field,
            maximal: None,
            eps: S::zero(),
            delta: S::zero(),
            radius: S::infinity(),
            provenance: provenance.into(),
        })
    }

    /// The unit weight.
    pub fn unit(grid: &Grid<S>) -> Self {
        Weight::from_field(BoxField::constant(grid, S::one()), "unit").expect("unit weight")
    }

    /// `M h_delta = M[h chi] + delta`.
    pub fn maximal_shifted(&self) -> Option<BoxField<S>> {
        self.maximal.as_ref().map(|m| m.map(|v| v + self.delta))
    }

    pub fn metadata(&self) -> WeightMetadata {
        WeightMetadata {
            eps: self.eps.as_f64(),
            delta: self.delta.as_f64(),
            radius: self.radius.as_f64(),
            provenance: self.provenance.clone(),
            min: self.field.min().as_f64(),
            max: self.field.max().as_f64(),
        }
    }
}

/// Per-cell `|f| + |g|^(s/q)` on `Omega_2R`, zero elsewhere, zero-extended to the lattice.
pub fn localized_source<S: Real>(
    f: &Field<S>,
    g: &Field<S>,
    exps: &ExponentSet<S>,
    radius: S,
    dom: &DiscreteDomain<S>,
) -> Result<BoxField<S>> {
    dom.check_field(f)?;
    dom.check_scalar(g)?;
    let two_r = S::lit(2.0) * radius;
    let power = exps.s / exps.q;
    let per_cell: Vec<S> = (0..dom.num_cells())
        .map(|c| if dom.radius_of(c) < two_r { norm(f.cell(c)) + norm(g.cell(c)).powf(power) } else { S::zero() })
        .collect();
    Ok(dom.extend_by_zero(&per_cell))
}

/// `omega = (M[(|f| + |g|^(s/q)) chi_{Omega_2R}] + delta)^(-eps)` on the lattice.
pub fn build_weight<S: Real>(
    f: &Field<S>,
    g: &Field<S>,
    exps: &ExponentSet<S>,
    delta: S,
    radius: S,
    dom: &DiscreteDomain<S>,
) -> Result<Weight<S>> {
    if !(delta > S::zero()) || delta > S::one() {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(radius > S::zero()) {
        return Err(Error::InvalidArgument(format!("R must be positive, got {radius}")));
    }
    let source = localized_source(f, g, exps, radius, dom)?;
    let maximal = maximal_function(dom.grid(), &source)?;
    let eps = exps.eps;
    let field = maximal.map(|m| (m + delta).powf(-eps));
    Ok(Weight {
        field,
        maximal: Some(maximal),
        eps,
        delta,
        radius,
        provenance: format!("h = |f| + |g|^(s/q) on Omega_2R, s/q = {}", (exps.s / exps.q).as_f64()),
    })
}

/// Sampled Muckenhoupt constant of `weight`.
///
/// For `p > 1` the maximum over `ball_samples` random balls (centres uniform in the box,
/// radii uniform in `[h, diam]`) of `(avg w)(avg w^(-1/(p-1)))^(p-1)`; for `p = 1` the
/// maximum over cells of `M w / w`.
pub fn ap_constant<S: Real>(grid: &Grid<S>, weight: &BoxField<S>, p: S, ball_samples: usize, seed: u64) -> Result<S> {
    if !(p >= S::one()) {
        return Err(Error::InvalidExponent(format!("A_p needs p >= 1, got {p}")));
    }
    if ball_samples == 0 {
        return Err(Error::InvalidArgument("ball_samples must be at least 1".into()));
    }
    if !weight.fits(grid) {
        return Err(Error::Mismatch("weight does not fit the lattice".into()));
    }
    if p == S::one() {
        let m = maximal_function(grid, weight)?;
        return Ok(m.values.iter().zip(&weight.values).fold(S::zero(), |acc, (&mw, &w)| acc.max(mw / w)));
    }
    let dual = (p - S::one()).recip();
    let dual_w: Vec<S> = weight.values.iter().map(|&w| w.powf(-dual)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = grid.lo;
    let hi = grid.hi();
    let h = grid.h.as_f64();
    let diam = grid.diameter().as_f64().max(h);
    let mut best = S::zero();
    for _ in 0..ball_samples {
        let cx = rng.gen_range(lo[0].as_f64()..hi[0].as_f64());
        let cy = if grid.dim == 2 { rng.gen_range(lo[1].as_f64()..hi[1].as_f64()) } else { 0.0 };
        let rad = if diam > h { rng.gen_range(h..=diam) } else { h };
        let (sw, sd, n) = ball_sums(grid, &weight.values, &dual_w, [cx, cy], rad);
        if n == 0 {
            continue;
        }
        let nn = S::from_usize_lossy(n);
        let prod = (sw / nn) * (sd / nn).powf(p - S::one());
        best = best.max(prod);
    }
    Ok(best)
}

fn ball_sums<S: Real>(grid: &Grid<S>, w: &[S], dual: &[S], c: [f64; 2], rad: f64) -> (S, S, usize) {
    let h = grid.h.as_f64();
    let lo = [grid.lo[0].as_f64(), grid.lo[1].as_f64()];
    let span = |center: f64, low: f64, n: usize| {
        let a = ((center - rad - low) / h - 0.5).floor().max(0.0) as usize;
        let b = (((center + rad - low) / h - 0.5).ceil().max(0.0) as usize).min(n - 1);
        (a, b)
    };
    let (x0, x1) = span(c[0], lo[0], grid.nx);
    let (y0, y1) = if grid.dim == 2 { span(c[1], lo[1], grid.ny) } else { (0, 0) };
    let r2 = rad * rad;
    let (mut sw, mut sd, mut n) = (S::zero(), S::zero(), 0usize);
    for iy in y0..=y1 {
        let y = if grid.dim == 2 { lo[1] + (iy as f64 + 0.5) * h } else { 0.0 };
        for ix in x0..=x1 {
            let x = lo[0] + (ix as f64 + 0.5) * h;
            let d2 = (x - c[0]).powi(2) + (y - c[1]).powi(2);
            if d2 <= r2 {
                let idx = grid.index(ix, iy);
                sw = sw + w[idx];
                sd = sd + dual[idx];
                n += 1;
            }
        }
    }
    (sw, sd, n)
}
