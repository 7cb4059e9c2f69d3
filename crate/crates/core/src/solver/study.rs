use serde::Serialize;

use super::{solve_weak, truncate_forcing, SolveOptions, SolveReport};
use crate::error::{Error, Result};
use crate::grid::{gradient, weighted_integral, DiscreteDomain, Field, Rank};
use crate::maximal::{build_weight, Weight};
use crate::operators::ExponentSet;
use crate::scalar::{fsum, norm, pow_abs, Real};

/// Knobs of [`approximation_study`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StudyOptions {
    pub solve: SolveOptions,
    /// Support radius of the truncated data; `None` uses `B_k`.
    pub ball_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum ApproxOutcome {
    Converged,
    NotConverged,
    Failed(String),
}

/// One level of the approximating sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxRecord {
    pub k: f64,
    /// `int_{Omega_R} |grad u^k|^p`.
    pub e_p_unweighted: f64,
    /// `int_{Omega_R} |grad u^k|^p omega`.
    pub e_p_weighted: f64,
    pub e_r_unweighted: f64,
    pub e_r_weighted: f64,
    /// `X^{p,r}` distance to the previous level (to the zero start for the first level).
    pub xpr_distance: f64,
    pub iterations: usize,
    pub residual: f64,
    pub outcome: ApproxOutcome,
    pub solve: Option<SolveReport>,
}

/// Result of an approximation sweep over truncation levels.
#[derive(Debug, Clone, Serialize)]
pub struct ApproxReport<S> {
    pub k_schedule: Vec<f64>,
    pub records: Vec<ApproxRecord>,
    pub radius: f64,
    pub delta: f64,
    #[serde(skip)]
    pub weight: Weight<S>,
    /// `u^k` per level, in schedule order.
    #[serde(skip)]
    pub solutions: Vec<Field<S>>,
}

impl<S> ApproxReport<S> {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.outcome == ApproxOutcome::Converged)
    }
}

/// `||grad v||_p + ||v||_r` over the whole domain, boundary faces included.
pub fn xpr_norm<S: Real>(v: &Field<S>, p: S, r: S, dom: &DiscreteDomain<S>) -> Result<S> {
    let grad = dom.record_gradient(v)?;
    let w = dom.grad_width();
    let n = dom.ncomp();
    let hd = dom.cell_measure();
    let gp = fsum(grad.chunks(w).map(|z| pow_abs(norm(z), p))) * hd;
    let vr = fsum(v.values.chunks(n).map(|z| pow_abs(norm(z), r))) * hd;
    Ok(gp.powf(p.recip()) + vr.powf(r.recip()))
}

/// Solves the truncated problems along `k_schedule`, warm-starting each from the previous
/// level, and records the local energies against the weight built from the untruncated data.
#[allow(clippy::too_many_arguments)]
pub fn approximation_study<S: Real>(
    f: &Field<S>,
    g: &Field<S>,
    exps: &ExponentSet<S>,
    dom: &DiscreteDomain<S>,
    k_schedule: &[S],
    delta: S,
    radius: S,
    opts: &StudyOptions,
) -> Result<ApproxReport<S>> {
    if k_schedule.is_empty() {
        return Err(Error::InvalidArgument("k schedule is empty".into()));
    }
    if k_schedule.windows(2).any(|w| !(w[0] < w[1])) || !(k_schedule[0] > S::zero()) {
        return Err(Error::InvalidArgument("k schedule must be positive and strictly increasing".into()));
    }
    let weight = build_weight(f, g, exps, delta, radius, dom)?;
    let region = dom.region(radius);
    let ball = opts.ball_radius.map(S::lit);
    let mut prev = Field::zeros(dom, Rank::Scalar);
    let mut records = Vec::with_capacity(k_schedule.len());
    let mut solutions = Vec::with_capacity(k_schedule.len());

    for &k in k_schedule {
        let fk = truncate_forcing(f, k, dom, ball)?;
        let gk = truncate_forcing(g, k, dom, ball)?;
        match solve_weak(&fk, &gk, exps, dom, &opts.solve, Some(&prev)) {
            Ok((u, rep)) => {
                let du = u.combine(S::one(), &prev, -S::one())?;
                let grad = gradient(&u, dom)?;
                let wf = Some(&weight.field);
                let rec = ApproxRecord {
                    k: k.as_f64(),
                    e_p_unweighted: weighted_integral(dom, &grad, None, exps.p, &region)?.as_f64(),
                    e_p_weighted: weighted_integral(dom, &grad, wf, exps.p, &region)?.as_f64(),
                    e_r_unweighted: weighted_integral(dom, &u, None, exps.r, &region)?.as_f64(),
                    e_r_weighted: weighted_integral(dom, &u, wf, exps.r, &region)?.as_f64(),
                    xpr_distance: xpr_norm(&du, exps.p, exps.r, dom)?.as_f64(),
                    iterations: rep.iterations,
                    residual: rep.residual_norm,
                    outcome: if rep.converged { ApproxOutcome::Converged } else { ApproxOutcome::NotConverged },
                    solve: Some(rep),
                };
                records.push(rec);
                prev = u.clone();
                solutions.push(u);
            }
            Err(e) => {
                records.push(ApproxRecord {
                    k: k.as_f64(),
                    e_p_unweighted: f64::NAN,
                    e_p_weighted: f64::NAN,
                    e_r_unweighted: f64::NAN,
                    e_r_weighted: f64::NAN,
                    xpr_distance: f64::NAN,
                    iterations: 0,
                    residual: f64::NAN,
                    outcome: ApproxOutcome::Failed(e.to_string()),
                    solve: None,
                });
                solutions.push(prev.clone());
            }
        }
    }

    Ok(ApproxReport {
        k_schedule: k_schedule.iter().map(|k| k.as_f64()).collect(),
        records,
        radius: radius.as_f64(),
        delta: delta.as_f64(),
        weight,
        solutions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainShape, DomainSpec};
    use crate::operators::derive_exponents;

    #[test]
    fn zero_data_gives_zero_records() {
        let d = build_domain(&DomainSpec::new(DomainShape::Rectangle { lo: [-1.0, -1.0], hi: [1.0, 1.0] }, 0.25, 1))
            .unwrap();
        let e = derive_exponents(2.0, 3.0, 0.25).unwrap();
        let f = Field::zeros(&d, Rank::Gradient);
        let g = Field::zeros(&d, Rank::Scalar);
        let rep = approximation_study(&f, &g, &e, &d, &[1.0, 2.0, 4.0], 1.0, 0.5, &StudyOptions::default()).unwrap();
        assert!(rep.all_converged());
        for r in &rep.records {
            assert_eq!([r.e_p_unweighted, r.e_p_weighted, r.e_r_unweighted, r.e_r_weighted, r.xpr_distance], [0.0; 5]);
        }
    }

    #[test]
    fn rejects_bad_schedule() {
        let d = build_domain(&DomainSpec::new(DomainShape::Interval { lo: 0.0, hi: 1.0 }, 0.25, 1)).unwrap();
        let e = derive_exponents(2.0, 3.0, 0.25).unwrap();
        let f = Field::zeros(&d, Rank::Gradient);
        let g = Field::zeros(&d, Rank::Scalar);
        let o = StudyOptions::default();
        assert!(approximation_study(&f, &g, &e, &d, &[2.0, 2.0], 1.0, 0.5, &o).is_err());
        assert!(approximation_study(&f, &g, &e, &d, &[], 1.0, 0.5, &o).is_err());
    }
}
