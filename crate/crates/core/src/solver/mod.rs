//! Discrete Dirichlet problems for the canonical p-Laplace flux with absorption, solved
//! as minimisation of the convex energy
//!
//! ```text
//! J(u) = h^d sum_records |grad u|^p / p + h^d sum_cells ( |u|^r / r - F : grad u - G . u )
//! ```
//!
//! with `F = |f|^(p-2) f` and `G = |g|^(r-2) g`. The Euler-Lagrange equation of `J` is the
//! weak form tested against cell indicators.

mod study;
mod truncate;

pub use study::{approximation_study, xpr_norm, ApproxOutcome, ApproxRecord, ApproxReport, StudyOptions};
pub use truncate::truncate_forcing;

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DiscreteDomain, Field, Rank};
use crate::operators::{p_laplace_flux, smoothed_flux, ExponentSet, OperatorSpec};
use crate::scalar::{fsum, norm, pow_abs, Real};

/// Smoothing parameter of the line-search derivative for `p < 2`.
pub const LINE_SEARCH_MU: f64 = 1e-8;

/// Energy functional of one discrete problem, with the forcing already mapped through
/// `|f|^(p-2) f` and `|g|^(r-2) g`.
#[derive(Debug, Clone)]
pub struct EnergyProblem<'a, S> {
    dom: &'a DiscreteDomain<S>,
    p: S,
    r: S,
    /// `|f|^(p-2) f` per interior record.
    flux_force: Vec<S>,
    /// `|g|^(r-2) g` per cell.
    absorb_force: Vec<S>,
}

impl<'a, S: Real> EnergyProblem<'a, S> {
    pub fn new(dom: &'a DiscreteDomain<S>, f: &Field<S>, g: &Field<S>, p: S, r: S) -> Result<Self> {
        if f.rank != Rank::Gradient {
            return Err(Error::Mismatch("f must be a gradient-rank field".into()));
        }
        dom.check_field(f)?;
        dom.check_scalar(g)?;
        if !(p > S::one()) || !(r > S::one()) {
            return Err(Error::InvalidExponent(format!("need p, r > 1, got p = {p}, r = {r}")));
        }
        let w = dom.grad_width();
        let n = dom.ncomp();
        let mut flux_force = vec![S::zero(); f.values.len()];
        for c in 0..dom.num_cells() {
            p_laplace_flux(f.cell(c), p, &mut flux_force[c * w..(c + 1) * w]);
        }
        let mut absorb_force = vec![S::zero(); g.values.len()];
        for c in 0..dom.num_cells() {
            p_laplace_flux(g.cell(c), r, &mut absorb_force[c * n..(c + 1) * n]);
        }
        Ok(EnergyProblem { dom, p, r, flux_force, absorb_force })
    }

    /// Same as [`new`](Self::new) but rejects any operator other than the canonical flux.
    pub fn from_operator(
        op: &OperatorSpec<S>,
        dom: &'a DiscreteDomain<S>,
        f: &Field<S>,
        g: &Field<S>,
        exps: &ExponentSet<S>,
    ) -> Result<Self> {
        if !op.is_canonical() {
            return Err(Error::NonCanonicalOperator(op.name.clone()));
        }
        Self::new(dom, f, g, exps.p, exps.r)
    }

    pub fn domain(&self) -> &DiscreteDomain<S> {
        self.dom
    }

    fn as_field(&self, u: &[S]) -> Field<S> {
        Field { rank: Rank::Scalar, width: self.dom.ncomp(), values: u.to_vec() }
    }

    fn check_len(&self, u: &[S]) -> Result<()> {
        if u.len() != self.dom.num_cells() * self.dom.ncomp() {
            return Err(Error::Mismatch(format!("state has {} values", u.len())));
        }
        Ok(())
    }

    /// Energy terms in summation order: one per record, then one per cell.
    fn terms<'b>(&'b self, grad: &'b [S], u: &'b [S]) -> impl Iterator<Item = S> + 'b {
        let w = self.dom.grad_width();
        let n = self.dom.ncomp();
        let nrec = self.dom.records().len();
        let ncell = self.dom.num_cells();
        let (p, r) = (self.p, self.r);
        let dirichlet = (0..nrec).map(move |k| pow_abs(norm(&grad[k * w..(k + 1) * w]), p) / p);
        let cellwise = (0..ncell).map(move |c| {
            let uc = &u[c * n..(c + 1) * n];
            let gc = &grad[c * w..(c + 1) * w];
            let ff = &self.flux_force[c * w..(c + 1) * w];
            let gg = &self.absorb_force[c * n..(c + 1) * n];
            let work = ff.iter().zip(gc).fold(S::zero(), |a, (&x, &y)| a + x * y);
            let load = gg.iter().zip(uc).fold(S::zero(), |a, (&x, &y)| a + x * y);
            pow_abs(norm(uc), r) / r - work - load
        });
        dirichlet.chain(cellwise)
    }

    pub fn energy(&self, u: &[S]) -> Result<S> {
        self.check_len(u)?;
        let grad = self.dom.record_gradient(&self.as_field(u))?;
        Ok(fsum(self.terms(&grad, u)) * self.dom.cell_measure())
    }

    /// Energy and a bound on its floating point evaluation error.
    fn energy_with_noise(&self, u: &[S], grad: &[S]) -> (S, S) {
        let hd = self.dom.cell_measure();
        let terms: Vec<S> = self.terms(grad, u).collect();
        let mag = fsum(terms.iter().map(|t| t.abs()));
        (fsum(terms) * hd, S::lit(16.0) * S::epsilon() * mag * hd)
    }

    /// Exact gradient of [`energy`](Self::energy) with respect to the cell values.
    pub fn gradient(&self, u: &[S]) -> Result<Vec<S>> {
        self.check_len(u)?;
        let grad = self.dom.record_gradient(&self.as_field(u))?;
        Ok(self.gradient_from(u, &grad))
    }

    fn gradient_from(&self, u: &[S], grad: &[S]) -> Vec<S> {
        let w = self.dom.grad_width();
        let n = self.dom.ncomp();
        let hd = self.dom.cell_measure();
        let mut q = vec![S::zero(); grad.len()];
        for k in 0..self.dom.records().len() {
            p_laplace_flux(&grad[k * w..(k + 1) * w], self.p, &mut q[k * w..(k + 1) * w]);
        }
        for (qi, &fi) in q.iter_mut().zip(&self.flux_force) {
            *qi = *qi - fi;
        }
        let mut out = self.dom.gradient_adjoint(&q);
        let mut buf = vec![S::zero(); n];
        for c in 0..self.dom.num_cells() {
            p_laplace_flux(&u[c * n..(c + 1) * n], self.r, &mut buf);
            for j in 0..n {
                let i = c * n + j;
                out[i] = (out[i] + buf[j] - self.absorb_force[i]) * hd;
            }
        }
        out
    }

    /// `||grad J||_2 h^(-d/2)`: the discrete weak residual in `L^2`.
    pub fn residual_norm(&self, grad_j: &[S]) -> S {
        norm(grad_j) / self.dom.cell_measure().sqrt()
    }
}

/// Line restriction `phi(a) = J(u + a d)` with cached gradients.
struct Line<'p, 'a, S> {
    prob: &'p EnergyProblem<'a, S>,
    u: &'p [S],
    d: &'p [S],
    gu: Vec<S>,
    gd: Vec<S>,
    mu: S,
}

impl<S: Real> Line<'_, '_, S> {
    fn derivative(&self, a: S) -> S {
        let prob = self.prob;
        let w = prob.dom.grad_width();
        let n = prob.dom.ncomp();
        let ncell = prob.dom.num_cells();
        let smooth = prob.p < S::lit(2.0);
        let mut z = vec![S::zero(); w];
        let mut fz = vec![S::zero(); w];
        let mut acc = Vec::with_capacity(prob.dom.records().len() + ncell);
        for k in 0..prob.dom.records().len() {
            for i in 0..w {
                z[i] = self.gu[k * w + i] + a * self.gd[k * w + i];
            }
            if smooth {
                smoothed_flux(&z, prob.p, self.mu, &mut fz);
            } else {
                p_laplace_flux(&z, prob.p, &mut fz);
            }
            let mut t = S::zero();
            for i in 0..w {
                let force = if k < ncell { prob.flux_force[k * w + i] } else { S::zero() };
                t = t + (fz[i] - force) * self.gd[k * w + i];
            }
            acc.push(t);
        }
        let mut v = vec![S::zero(); n];
        let mut fv = vec![S::zero(); n];
        for c in 0..ncell {
            for j in 0..n {
                v[j] = self.u[c * n + j] + a * self.d[c * n + j];
            }
            p_laplace_flux(&v, prob.r, &mut fv);
            let mut t = S::zero();
            for j in 0..n {
                t = t + (fv[j] - prob.absorb_force[c * n + j]) * self.d[c * n + j];
            }
            acc.push(t);
        }
        fsum(acc) * prob.dom.cell_measure()
    }
}

/// Stopping and iteration limits for [`solve_weak`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target for [`SolveReport::residual_norm`].
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iters: 20_000 }
    }
}

/// Outcome of a descent run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_energy: f64,
    pub residual_norm: f64,
    pub converged: bool,
    pub line_search_failures: usize,
    pub restarts: usize,
    pub wall_time: f64,
    /// Smoothing used in line-search derivatives (`0` when `p >= 2`).
    pub mu: f64,
    /// Energy after the initial guess and after every accepted step.
    pub energy_history: Vec<f64>,
    /// Floating point resolution of the energy evaluation at the final iterate.
    pub energy_noise: f64,
}

/// `J(u)` for the canonical flux.
pub fn discrete_energy<S: Real>(
    u: &Field<S>,
    f: &Field<S>,
    g: &Field<S>,
    exps: &ExponentSet<S>,
    dom: &DiscreteDomain<S>,
) -> Result<S> {
    dom.check_scalar(u)?;
    EnergyProblem::new(dom, f, g, exps.p, exps.r)?.energy(&u.values)
}

/// Gradient of [`discrete_energy`] with respect to the cell values.
pub fn energy_gradient<S: Real>(
    u: &Field<S>,
    f: &Field<S>,
    g: &Field<S>,
    exps: &ExponentSet<S>,
    dom: &DiscreteDomain<S>,
) -> Result<Field<S>> {
    dom.check_scalar(u)?;
    let values = EnergyProblem::new(dom, f, g, exps.p, exps.r)?.gradient(&u.values)?;
    Ok(Field { rank: Rank::Scalar, width: dom.ncomp(), values })
}

/// Minimises the discrete energy with Polak-Ribiere+ conjugate gradients.
///
/// Each step runs a bracketing line search on `phi'(a)` and accepts only points with
/// `-sigma |phi'(0)| <= phi'(a) <= 0`; convexity of `phi` then certifies `J` did not increase
/// even once the decrease is below the resolution of `J` itself. Non-descent directions
/// restart from steepest descent.
pub fn solve_weak<S: Real>(
    f: &Field<S>,
    g: &Field<S>,
    exps: &ExponentSet<S>,
    dom: &DiscreteDomain<S>,
    opts: &SolveOptions,
    init: Option<&Field<S>>,
) -> Result<(Field<S>, SolveReport)> {
    let prob = EnergyProblem::new(dom, f, g, exps.p, exps.r)?;
    minimize(&prob, opts, init)
}

/// [`solve_weak`] for an already assembled problem.
pub fn minimize<S: Real>(
    prob: &EnergyProblem<'_, S>,
    opts: &SolveOptions,
    init: Option<&Field<S>>,
) -> Result<(Field<S>, SolveReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let dom = prob.dom;
    let start = Instant::now();
    let mut u = match init {
        Some(u0) => {
            dom.check_scalar(u0)?;
            u0.values.clone()
        }
        None => vec![S::zero(); dom.num_cells() * dom.ncomp()],
    };
    let tol = S::lit(opts.tol);
    let mu = if prob.p < S::lit(2.0) { S::lit(LINE_SEARCH_MU) } else { S::zero() };
    let sigma = S::lit(0.1);

    let grad_rec = dom.record_gradient(&prob.as_field(&u))?;
    let (mut energy, mut noise) = prob.energy_with_noise(&u, &grad_rec);
    let mut g = prob.gradient_from(&u, &grad_rec);
    let mut res = prob.residual_norm(&g);
    if !energy.is_finite() || !res.is_finite() {
        return Err(Error::NonFinite { iteration: 0, detail: format!("J = {energy}, residual = {res}") });
    }
    let mut history = vec![energy.as_f64()];
    let mut failures = 0usize;
    let mut restarts = 0usize;
    let mut iterations = 0usize;
    let mut d: Vec<S> = g.iter().map(|&x| -x).collect();
    let mut steepest = true;
    let mut alpha = {
        let h = dom.h();
        h.powi(2 - dom.dim() as i32) / S::from_usize_lossy(2 * dom.dim())
    };

    while res > tol && iterations < opts.max_iters {
        let mut slope = dot(&g, &d);
        if !(slope < S::zero()) {
            d = g.iter().map(|&x| -x).collect();
            slope = -dot(&g, &g);
            steepest = true;
            restarts += 1;
        }
        let line = Line {
            prob,
            u: &u,
            d: &d,
            gu: dom.record_gradient(&prob.as_field(&u))?,
            gd: dom.record_gradient(&prob.as_field(&d))?,
            mu,
        };
        let step = line_search(&line, slope, alpha, sigma);
        let accepted = match step {
            Some(a) => {
                let trial: Vec<S> = u.iter().zip(&d).map(|(&x, &y)| x + a * y).collect();
                let trial_rec = dom.record_gradient(&prob.as_field(&trial))?;
                let (e_new, n_new) = prob.energy_with_noise(&trial, &trial_rec);
                if !e_new.is_finite() {
                    return Err(Error::NonFinite { iteration: iterations, detail: format!("J = {e_new} at step {a}") });
                }
                if e_new <= energy + noise.max(n_new) {
                    Some((a, trial, trial_rec, e_new, n_new))
                } else {
                    None
                }
            }
            None => None,
        };
        let Some((a, trial, trial_rec, e_new, n_new)) = accepted else {
            failures += 1;
            if steepest {
                break;
            }
            d = g.iter().map(|&x| -x).collect();
            steepest = true;
            restarts += 1;
            continue;
        };
        iterations += 1;
        alpha = a;
        u = trial;
        energy = e_new;
        noise = n_new;
        history.push(energy.as_f64());
        let g_new = prob.gradient_from(&u, &trial_rec);
        res = prob.residual_norm(&g_new);
        if !res.is_finite() {
            return Err(Error::NonFinite { iteration: iterations, detail: "residual".into() });
        }
        let gg = dot(&g, &g);
        let beta = if gg > S::zero() {
            let num = g_new.iter().zip(&g).fold(S::zero(), |acc, (&a1, &a0)| acc + a1 * (a1 - a0));
            (num / gg).max(S::zero())
        } else {
            S::zero()
        };
        for (di, &gi) in d.iter_mut().zip(&g_new) {
            *di = -gi + beta * *di;
        }
        steepest = beta == S::zero();
        g = g_new;
    }

    let report = SolveReport {
        iterations,
        final_energy: energy.as_f64(),
        residual_norm: res.as_f64(),
        converged: res <= tol,
        line_search_failures: failures,
        restarts,
        wall_time: start.elapsed().as_secs_f64(),
        mu: mu.as_f64(),
        energy_history: history,
        energy_noise: noise.as_f64(),
    };
    Ok((prob.as_field(&u), report))
}

fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    fsum(a.iter().zip(b).map(|(&x, &y)| x * y))
}

/// Finds `a > 0` with `-sigma |phi'(0)| <= phi'(a) <= 0` by expansion then Illinois regula falsi.
fn line_search<S: Real>(line: &Line<'_, '_, S>, slope0: S, guess: S, sigma: S) -> Option<S> {
    let target = sigma * slope0.abs();
    let (mut lo, mut f_lo) = (S::zero(), slope0);
    let mut hi = guess.max(S::min_positive_value());
    let mut f_hi = line.derivative(hi);
    let mut expansions = 0;
    while f_hi < S::zero() {
        if f_hi >= -target {
            return Some(hi);
        }
        lo = hi;
        f_lo = f_hi;
        hi = hi * S::lit(4.0);
        f_hi = line.derivative(hi);
        expansions += 1;
        if expansions > 200 || !f_hi.is_finite() {
            return None;
        }
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let denom = f_hi - f_lo;
        let mut a = if denom > S::zero() { lo - f_lo * (hi - lo) / denom } else { S::lit(0.5) * (lo + hi) };
        if !(a > lo && a < hi) {
            a = S::lit(0.5) * (lo + hi);
        }
        let v = line.derivative(a);
        if !v.is_finite() {
            return None;
        }
        if v <= S::zero() {
            if v >= -target {
                return Some(a);
            }
            lo = a;
            f_lo = v;
            if side == -1 {
                f_hi = f_hi / S::lit(2.0);
            }
            side = -1;
        } else {
            hi = a;
            f_hi = v;
            if side == 1 {
                f_lo = f_lo / S::lit(2.0);
            }
            side = 1;
        }
        if hi - lo <= S::epsilon() * hi {
            break;
        }
    }
    if lo > S::zero() {
        Some(lo)
    } else {
        None
    }
}
