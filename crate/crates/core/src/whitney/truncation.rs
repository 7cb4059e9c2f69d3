use serde::Serialize;

use super::{WhitneyDecomposition, SAMPLES_PER_AXIS};
use crate::error::{Error, Result};
use crate::grid::{DiscreteDomain, Field};
use crate::maximal::CellMask;
use crate::scalar::{fsum, norm, pow_abs, Real};

/// Averages of `u` over `(9/8) Q_i`, or `0` where the inflated cube leaves `Omega`.
fn inflated_averages<S: Real>(u: &Field<S>, w: &WhitneyDecomposition<S>, dom: &DiscreteDomain<S>) -> Vec<Vec<S>> {
    let dim = dom.dim();
    let n = dom.ncomp();
    let cw = w.cell_units();
    let grid = dom.grid();
    let extent = [grid.nx as i64 * cw, grid.ny as i64 * cw];
    (0..w.len())
        .map(|i| {
            let (lo, side) = w.cube_units(i);
            let pad = side / 16;
            let a = [lo[0] - pad, lo[1] - pad];
            let b = [lo[0] + side + pad, lo[1] + side + pad];
            if (0..dim).any(|k| a[k] < 0 || b[k] > extent[k]) {
                return vec![S::zero(); n];
            }
            let range =
                |k: usize| if k >= dim { (0, 1) } else { (a[k].div_euclid(cw), (b[k] + cw - 1).div_euclid(cw)) };
            let (x0, x1) = range(0);
            let (y0, y1) = range(1);
            let mut weights = Vec::new();
            for iy in y0..y1 {
                for ix in x0..x1 {
                    let Some(c) = dom.interior_index(grid.index(ix as usize, iy as usize)) else {
                        return vec![S::zero(); n];
                    };
                    let overlap =
                        |k: usize, i: i64| if k >= dim { 1 } else { b[k].min((i + 1) * cw) - a[k].max(i * cw) };
                    weights.push((c, overlap(0, ix) * overlap(1, iy)));
                }
            }
            let total: i64 = weights.iter().map(|&(_, v)| v).sum();
            let total = S::from_i64(total).unwrap();
            (0..n).map(|j| fsum(weights.iter().map(|&(c, v)| u.cell(c)[j] * S::from_i64(v).unwrap())) / total).collect()
        })
        .collect()
}

/// `u_O = sum_i psi_i ubar_i` on cells of `O`, `u` elsewhere.
///
/// `ubar_i` is the exact cell-quadrature mean of `u` over `(9/8) Q_i` when that cube lies in
/// `Omega`, and `0` otherwise. `psi_i` is read at cell centres.
pub fn relative_truncate<S: Real>(
    u: &Field<S>,
    open: &CellMask,
    w: &WhitneyDecomposition<S>,
    dom: &DiscreteDomain<S>,
) -> Result<Field<S>> {
    dom.check_scalar(u)?;
    if &w.open != open || &w.grid != dom.grid() {
        return Err(Error::Mismatch("decomposition was built for another open set or lattice".into()));
    }
    let pou = w.partition.as_ref().ok_or_else(|| Error::Whitney("partition of unity has not been built".into()))?;
    let averages = inflated_averages(u, w, dom);
    let n = dom.ncomp();
    let mut out = u.clone();
    for c in 0..dom.num_cells() {
        let lattice = dom.lattice_index(c);
        if !open.members[lattice] {
            continue;
        }
        let s = pou.centre_sample(dom.dim(), lattice);
        let rec = out.cell_mut(c);
        for (j, v) in rec.iter_mut().enumerate().take(n) {
            *v = fsum(pou.entries[s].iter().map(|&(i, psi, _)| psi * averages[i][j]));
        }
    }
    Ok(out)
}

/// Measured constants of the relative truncation for one `(u, O)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationConstants {
    /// `int_Omega |grad(u - u_O)|^p / int_{O cap Omega} |grad u|^p`.
    pub gradient: f64,
    /// `int_O |u_O|^r / int_{O cap Omega} |u|^r`.
    pub lebesgue: f64,
}

/// Gradient contraction and `L^r` stability ratios of [`relative_truncate`].
///
/// Inside `O` the gradient of `u_O` is `sum_i grad psi_i ubar_i` averaged over the partition
/// samples of each cell, so ramps narrower than a cell are integrated rather than differenced
/// across. Elsewhere `grad (u - u_O)` is the forward difference.
pub fn truncation_constants<S: Real>(
    u: &Field<S>,
    open: &CellMask,
    w: &WhitneyDecomposition<S>,
    dom: &DiscreteDomain<S>,
    p: S,
    r: S,
) -> Result<TruncationConstants> {
    let uo = relative_truncate(u, open, w, dom)?;
    let pou = w.partition.as_ref().expect("checked by relative_truncate");
    let averages = inflated_averages(u, w, dom);
    let diff = u.combine(S::one(), &uo, -S::one())?;
    let hd = dom.cell_measure();
    let width = dom.grad_width();
    let dim = dom.dim();
    let n = dom.ncomp();
    let in_open: Vec<bool> = (0..dom.num_cells()).map(|c| open.members[dom.lattice_index(c)]).collect();

    let gd = dom.record_gradient(&diff)?;
    let gu = dom.record_gradient(u)?;
    let per = if dim == 1 { SAMPLES_PER_AXIS } else { SAMPLES_PER_AXIS * SAMPLES_PER_AXIS };
    let inv_per = S::one() / S::from_usize_lossy(per);
    let mut z = vec![S::zero(); width];
    let num = fsum((0..dom.records().len()).map(|k| {
        let base = (k < dom.num_cells() && in_open[k]).then(|| dom.lattice_index(k));
        let Some(lattice) = base else {
            return pow_abs(norm(&gd[k * width..(k + 1) * width]), p);
        };
        let first = pou.sample_index(dim, lattice, 0, 0);
        fsum((first..first + per).map(|s| {
            z.copy_from_slice(&gu[k * width..(k + 1) * width]);
            for &(i, _, dpsi) in &pou.entries[s] {
                for a in 0..dim {
                    for j in 0..n {
                        z[a * n + j] = z[a * n + j] - dpsi[a] * averages[i][j];
                    }
                }
            }
            pow_abs(norm(&z), p)
        })) * inv_per
    })) * hd;
    let den = fsum(
        gu.chunks(width).take(dom.num_cells()).zip(&in_open).filter(|(_, &m)| m).map(|(z, _)| pow_abs(norm(z), p)),
    ) * hd;

    let n = dom.ncomp();
    let lr = |f: &Field<S>| {
        fsum(f.values.chunks(n).zip(&in_open).filter(|(_, &m)| m).map(|(z, _)| pow_abs(norm(z), r))) * hd
    };
    let ratio = |a: S, b: S| if b > S::zero() { (a / b).as_f64() } else { 0.0 };
    Ok(TruncationConstants { gradient: ratio(num, den), lebesgue: ratio(lr(&uo), lr(u)) })
}
