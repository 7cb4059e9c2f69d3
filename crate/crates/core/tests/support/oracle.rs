//! Coordinate-descent oracle for the discrete energy, shared with the acceptance suite.

use plaplab_core::grid::{build_domain, DiscreteDomain, DomainShape, DomainSpec, Field, Rank};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Brute-force energy on an `nx x ny` rectangle (`ny = 1` in 1D), built from scratch.
pub struct Oracle {
    nx: i64,
    ny: i64,
    dim: usize,
    h: f64,
    p: f64,
    r: f64,
    /// `|f|^(p-2) f` per cell, `dim` entries.
    ff: Vec<Vec<f64>>,
    /// `|g|^(r-2) g` per cell.
    gg: Vec<f64>,
    /// Record positions: interior cells and outside cells with an interior forward neighbour.
    records: Vec<(i64, i64)>,
}

impl Oracle {
    #[allow(clippy::too_many_arguments)]
    pub fn new(nx: i64, ny: i64, dim: usize, h: f64, p: f64, r: f64, f: &[Vec<f64>], g: &[f64]) -> Self {
        let ff = f
            .iter()
            .map(|v| {
                let m = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| if m > 0.0 { m.powf(p - 2.0) * x } else { 0.0 }).collect()
            })
            .collect();
        let gg = g.iter().map(|x| x.abs().powf(r - 2.0) * x).collect();
        let mut records = Vec::new();
        let ylo = if dim == 1 { 0 } else { -1 };
        for j in ylo..ny {
            for i in -1..nx {
                let inside = |a: i64, b: i64| a >= 0 && a < nx && b >= 0 && b < ny;
                if inside(i, j) || inside(i + 1, j) || (dim == 2 && inside(i, j + 1)) {
                    records.push((i, j));
                }
            }
        }
        Oracle { nx, ny, dim, h, p, r, ff, gg, records }
    }

    fn at(&self, u: &[f64], i: i64, j: i64) -> f64 {
        if i < 0 || j < 0 || i >= self.nx || j >= self.ny {
            0.0
        } else {
            u[(j * self.nx + i) as usize]
        }
    }

    fn record(&self, u: &[f64], i: i64, j: i64) -> Vec<f64> {
        let mut z = vec![(self.at(u, i + 1, j) - self.at(u, i, j)) / self.h];
        if self.dim == 2 {
            z.push((self.at(u, i, j + 1) - self.at(u, i, j)) / self.h);
        }
        z
    }

    /// `dJ/du_c` with `J` differentiated by hand, record by record.
    fn partial(&self, u: &[f64], c: usize) -> f64 {
        let (ci, cj) = (c as i64 % self.nx, c as i64 / self.nx);
        let mut s = 0.0;
        for &(i, j) in &self.records {
            // dz/du_c is -1/h on every axis when c is the record cell, +1/h on the axis pointing to c
            let mut dz = vec![0.0; self.dim];
            if (i, j) == (ci, cj) {
                dz.iter_mut().for_each(|v| *v = -1.0 / self.h);
            }
            if (i + 1, j) == (ci, cj) {
                dz[0] += 1.0 / self.h;
            }
            if self.dim == 2 && (i, j + 1) == (ci, cj) {
                dz[1] += 1.0 / self.h;
            }
            if dz.iter().all(|v| *v == 0.0) {
                continue;
            }
            let z = self.record(u, i, j);
            let m = z.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = if m > 0.0 { m.powf(self.p - 2.0) } else { 0.0 };
            let interior = i >= 0 && j >= 0;
            for a in 0..self.dim {
                let force = if interior { self.ff[(j * self.nx + i) as usize][a] } else { 0.0 };
                s += (scale * z[a] - force) * dz[a];
            }
        }
        let uc = u[c];
        s += uc.abs().powf(self.r - 2.0) * uc - self.gg[c];
        s * self.h.powi(self.dim as i32)
    }

    /// Exact coordinate minimisation by bisection on the partial derivative, swept to a fixpoint.
    pub fn solve(&self) -> Vec<f64> {
        let n = (self.nx * self.ny) as usize;
        let mut u = vec![0.0; n];
        for _ in 0..200_000 {
            let mut change: f64 = 0.0;
            for c in 0..n {
                let old = u[c];
                let mut w = 1.0;
                let (mut lo, mut hi) = loop {
                    u[c] = old - w;
                    let a = self.partial(&u, c);
                    u[c] = old + w;
                    let b = self.partial(&u, c);
                    if a <= 0.0 && b >= 0.0 {
                        break (old - w, old + w);
                    }
                    w *= 2.0;
                };
                while hi - lo > 1e-14 * (1.0 + old.abs()) {
                    let mid = 0.5 * (lo + hi);
                    u[c] = mid;
                    if self.partial(&u, c) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                u[c] = 0.5 * (lo + hi);
                change = change.max((u[c] - old).abs());
            }
            if change < 1e-13 {
                return u;
            }
        }
        panic!("coordinate descent did not settle");
    }
}

pub fn rectangle(n: usize, h: f64) -> DiscreteDomain<f64> {
    let side = n as f64 * h;
    build_domain(&DomainSpec::new(DomainShape::Rectangle { lo: [0.0, 0.0], hi: [side, side] }, h, 1)).unwrap()
}

pub fn interval(n: usize, h: f64) -> DiscreteDomain<f64> {
    build_domain(&DomainSpec::new(DomainShape::Interval { lo: 0.0, hi: n as f64 * h }, h, 1)).unwrap()
}

/// Lattice position of interior cell `c` from its centre.
pub fn position(dom: &DiscreteDomain<f64>, c: usize) -> usize {
    let x = dom.center(c);
    let h = dom.h();
    let i = (x[0] / h).floor() as usize;
    let j = if dom.dim() == 2 { (x[1] / h).floor() as usize } else { 0 };
    let nx = dom.grid().nx;
    j * nx + i
}

pub fn random_data(dom: &DiscreteDomain<f64>, rng: &mut ChaCha8Rng) -> (Field<f64>, Field<f64>) {
    let f = Field::from_fn(dom, Rank::Gradient, |_, o| o.iter_mut().for_each(|v| *v = rng.gen_range(-2.0..2.0)));
    let g = Field::from_fn(dom, Rank::Scalar, |_, o| o[0] = rng.gen_range(-2.0..2.0));
    (f, g)
}

/// Oracle minimiser of the problem with data `f`, `g`, indexed like the solver's cells.
pub fn oracle_solution(dom: &DiscreteDomain<f64>, f: &Field<f64>, g: &Field<f64>, p: f64, r: f64) -> Vec<f64> {
    let n = dom.num_cells();
    let mut fo = vec![Vec::new(); n];
    let mut go = vec![0.0; n];
    for c in 0..n {
        fo[position(dom, c)] = f.cell(c).to_vec();
        go[position(dom, c)] = g.cell(c)[0];
    }
    let (nx, ny) = (dom.grid().nx as i64, dom.grid().ny as i64);
    let uo = Oracle::new(nx, ny, dom.dim(), dom.h(), p, r, &fo, &go).solve();
    (0..n).map(|c| uo[position(dom, c)]).collect()
}
