//! Elliptic flux `A(x, z)`, its structural constants and the exponent family.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::DiscreteDomain;
use crate::scalar::{norm, Real};

/// `|z|^(p-2) z` written into `out`; `0` at `z = 0` for every `p > 1`.
pub fn p_laplace_flux<S: Real>(z: &[S], p: S, out: &mut [S]) {
    let m = norm(z);
    let scale = if m == S::zero() {
        S::zero()
    } else if p == S::lit(2.0) {
        S::one()
    } else {
        m.powf(p - S::lit(2.0))
    };
    for (o, &zi) in out.iter_mut().zip(z) {
        *o = scale * zi;
    }
}

/// Convenience wrapper around [`p_laplace_flux`] returning a new vector.
pub fn p_laplace_flux_vec<S: Real>(z: &[S], p: S) -> Vec<S> {
    let mut out = vec![S::zero(); z.len()];
    p_laplace_flux(z, p, &mut out);
    out
}

/// Exponents `p < r`, the perturbation `eps` and the derived `q = p - eps`, `s = (p - eps) r / p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentSet<S> {
    pub p: S,
    pub r: S,
    pub q: S,
    pub s: S,
    pub eps: S,
    pub p_conj: S,
    pub r_conj: S,
}

/// Builds the exponent family, rejecting `eps` outside `(0, min(1, p/r))`.
pub fn derive_exponents<S: Real>(p: S, r: S, eps: S) -> Result<ExponentSet<S>> {
    if !(p > S::one()) || !p.is_finite() {
        return Err(Error::InvalidExponent(format!("p must satisfy p > 1, got {p}")));
    }
    if !(r > p) || !r.is_finite() {
        return Err(Error::InvalidExponent(format!("r must satisfy r > p = {p}, got {r}")));
    }
    if !(eps > S::zero()) {
        return Err(Error::InvalidExponent(format!("eps must be positive, got {eps}")));
    }
    if !(eps < S::one()) {
        return Err(Error::InvalidExponent(format!("eps = {eps} violates eps < 1 (needed for q > p - 1)")));
    }
    let ratio = p / r;
    if !(eps < ratio) {
        return Err(Error::InvalidExponent(format!(
            "eps = {eps} violates eps < p/r = {ratio} (eps_0 = min(eps_1, p/r))"
        )));
    }
    let q = p - eps;
    let s = (p - eps) * r / p;
    if !(s > r - S::one()) || !(q > p - S::one()) {
        return Err(Error::InvalidExponent(format!("derived q = {q}, s = {s} fall outside (p-1, p) x (r-1, r)")));
    }
    Ok(ExponentSet { p, r, q, s, eps, p_conj: p / (p - S::one()), r_conj: r / (r - S::one()) })
}

impl<S: Real> ExponentSet<S> {
    /// `(q/(p-q), s/(r-s))`; the two agree for every valid set.
    pub fn hoelder_ratios(&self) -> (S, S) {
        (self.q / (self.p - self.q), self.s / (self.r - self.s))
    }

    /// `d - p r / (r - p)`, the power of `R` in the local estimate.
    pub fn geometric_power(&self, d: usize) -> S {
        S::from_usize_lossy(d) - self.p * self.r / (self.r - self.p)
    }
}

/// Flux signature: cell centre, `z` (`d x N`, axis-major), output buffer.
pub type FluxFn<S> = dyn Fn([S; 2], &[S], &mut [S]) + Send + Sync;

/// Which flux an [`OperatorSpec`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// `|z|^(p-2) z`.
    PLaplace,
    /// `|z|^(p-2) z + b(x)` with a bounded offset.
    PerturbedPLaplace,
    /// User supplied flux, only checked, never solved.
    Custom,
}

/// Caratheodory flux with its claimed structural constants.
#[derive(Clone)]
pub struct OperatorSpec<S> {
    pub name: String,
    pub kind: OperatorKind,
    pub p: S,
    pub c1: S,
    pub c2: S,
    /// Coercivity defect, one value per cell.
    pub beta1: Vec<S>,
    /// Growth defect, one value per cell.
    pub beta2: Vec<S>,
    flux: Arc<FluxFn<S>>,
}

impl<S: Real> fmt::Debug for OperatorSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("p", &self.p)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .finish_non_exhaustive()
    }
}

impl<S: Real> OperatorSpec<S> {
    /// The canonical p-Laplace flux with `C1 = C2 = 1`, `beta1 = beta2 = 0`.
    pub fn p_laplace(p: S, dom: &DiscreteDomain<S>) -> Self {
        let n = dom.num_cells();
        OperatorSpec {
            name: "p-laplace".into(),
            kind: OperatorKind::PLaplace,
            p,
            c1: S::one(),
            c2: S::one(),
            beta1: vec![S::zero(); n],
            beta2: vec![S::zero(); n],
            flux: Arc::new(move |_, z, out| p_laplace_flux(z, p, out)),
        }
    }

    /// `|z|^(p-2) z + b(x)` where `b = offset(x)` is a bounded `d x N` field.
    ///
    /// Constants: `C2 = 1`, `beta2 = |b|`; by Young's inequality with weight
    /// `eta = (p/2)^(1/p)`, `C1 = 1/2` and `beta1 = |b|^p' / (p' eta^p')`.
    pub fn perturbed_p_laplace(
        p: S,
        dom: &DiscreteDomain<S>,
        offset: impl Fn([S; 2], &mut [S]) + Send + Sync + 'static,
    ) -> Self {
        let width = dom.grad_width();
        let pc = p / (p - S::one());
        let eta = (p / S::lit(2.0)).powf(p.recip());
        let mut beta1 = Vec::with_capacity(dom.num_cells());
        let mut beta2 = Vec::with_capacity(dom.num_cells());
        let mut buf = vec![S::zero(); width];
        for c in 0..dom.num_cells() {
            offset(dom.center(c), &mut buf);
            let b = norm(&buf);
            beta2.push(b);
            beta1.push(b.powf(pc) / (pc * eta.powf(pc)));
        }
        let offset = Arc::new(offset);
        OperatorSpec {
            name: "perturbed-p-laplace".into(),
            kind: OperatorKind::PerturbedPLaplace,
            p,
            c1: S::lit(0.5),
            c2: S::one(),
            beta1,
            beta2,
            flux: Arc::new(move |x, z, out| {
                p_laplace_flux(z, p, out);
                let mut b = vec![S::zero(); z.len()];
                offset(x, &mut b);
                for (o, bi) in out.iter_mut().zip(b) {
                    *o = *o + bi;
                }
            }),
        }
    }

    /// Arbitrary flux with claimed constants and defects (per cell).
    pub fn custom(
        name: impl Into<String>,
        p: S,
        c1: S,
        c2: S,
        beta1: Vec<S>,
        beta2: Vec<S>,
        flux: impl Fn([S; 2], &[S], &mut [S]) + Send + Sync + 'static,
    ) -> Self {
        OperatorSpec { name: name.into(), kind: OperatorKind::Custom, p, c1, c2, beta1, beta2, flux: Arc::new(flux) }
    }

    /// Looks up a named operator: `"p-laplace"` or `"perturbed-p-laplace"` (offset
    /// `amplitude * e_1` on the first gradient entry).
    pub fn by_name(name: &str, p: S, amplitude: S, dom: &DiscreteDomain<S>) -> Result<Self> {
        match name {
            "p-laplace" => Ok(Self::p_laplace(p, dom)),
            "perturbed-p-laplace" => Ok(Self::perturbed_p_laplace(p, dom, move |_, b| {
                for v in b.iter_mut() {
                    *v = S::zero();
                }
                b[0] = amplitude;
            })),
            other => Err(Error::InvalidArgument(format!("unknown operator `{other}`"))),
        }
    }

    pub fn eval(&self, x: [S; 2], z: &[S], out: &mut [S]) {
        (self.flux)(x, z, out)
    }

    pub fn is_canonical(&self) -> bool {
        self.kind == OperatorKind::PLaplace
    }
}

/// Worst-case margins found by [`check_structure`] (negative means violated).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureReport {
    pub samples: usize,
    /// `min (A:z - C1|z|^p + beta1) / scale`.
    pub coercivity_margin: f64,
    /// `min (C2|z|^(p-1) + beta2 - |A|) / scale`.
    pub growth_margin: f64,
    /// `min (A(z1) - A(z2)):(z1 - z2) / scale`.
    pub monotonicity_margin: f64,
    pub pass: bool,
}

/// Sampling configuration for [`check_structure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRange {
    /// Entries of `z` are drawn with magnitude `|z| in [min, max]` (log-uniform).
    pub min_magnitude: f64,
    pub max_magnitude: f64,
}

impl Default for SampleRange {
    fn default() -> Self {
        SampleRange { min_magnitude: 1e-3, max_magnitude: 1e2 }
    }
}

/// Tolerance on the normalised margins.
pub const STRUCTURE_TOLERANCE: f64 = 1e-10;

fn random_matrix<S: Real>(rng: &mut ChaCha8Rng, width: usize, range: SampleRange) -> Vec<S> {
    let mut z: Vec<f64> = (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let m = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let (lo, hi) = (range.min_magnitude.ln(), range.max_magnitude.ln());
    let target = rng.gen_range(lo..=hi).exp();
    for v in z.iter_mut() {
        *v *= target / m;
    }
    z.into_iter().map(S::lit).collect()
}

fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Randomised check of coercivity, growth and monotonicity of `op` at `sample_count` draws.
///
/// Margins are divided by `1 + |scale|` of the compared quantities so that rounding
/// in large `|z|^p` does not register as a violation.
pub fn check_structure<S: Real>(
    op: &OperatorSpec<S>,
    dom: &DiscreteDomain<S>,
    sample_count: usize,
    seed: u64,
    range: SampleRange,
) -> Result<StructureReport> {
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample_count must be at least 1".into()));
    }
    if op.beta1.len() != dom.num_cells() || op.beta2.len() != dom.num_cells() {
        return Err(Error::Mismatch("beta fields do not match the domain".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = dom.grad_width();
    let p = op.p;
    let mut a0 = vec![S::zero(); width];
    let mut a1 = vec![S::zero(); width];
    let mut a2 = vec![S::zero(); width];
    let (mut coer, mut grow, mut mono) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..sample_count {
        let c = rng.gen_range(0..dom.num_cells());
        let x = dom.center(c);
        let z: Vec<S> = random_matrix(&mut rng, width, range);
        let z1: Vec<S> = random_matrix(&mut rng, width, range);
        let z2: Vec<S> = random_matrix(&mut rng, width, range);
        op.eval(x, &z, &mut a0);
        op.eval(x, &z1, &mut a1);
        op.eval(x, &z2, &mut a2);

        let zn = norm(&z);
        let lhs = dot(&a0, &z);
        let rhs = op.c1 * zn.powf(p) - op.beta1[c];
        let scale = S::one() + lhs.abs().max(rhs.abs());
        coer = coer.min(((lhs - rhs) / scale).as_f64());

        let an = norm(&a0);
        let bound = op.c2 * zn.powf(p - S::one()) + op.beta2[c];
        let scale = S::one() + an.max(bound);
        grow = grow.min(((bound - an) / scale).as_f64());

        let da: Vec<S> = a1.iter().zip(&a2).map(|(&x, &y)| x - y).collect();
        let dz: Vec<S> = z1.iter().zip(&z2).map(|(&x, &y)| x - y).collect();
        let m = dot(&da, &dz);
        let scale = S::one() + norm(&da) * norm(&dz);
        mono = mono.min((m / scale).as_f64());
    }
    let pass = coer >= -STRUCTURE_TOLERANCE && grow >= -STRUCTURE_TOLERANCE && mono >= -STRUCTURE_TOLERANCE;
    Ok(StructureReport {
        samples: sample_count,
        coercivity_margin: coer,
        growth_margin: grow,
        monotonicity_margin: mono,
        pass,
    })
}

/// Smoothed flux `(|z|^2 + mu^2)^((p-2)/2) z`, used only for line-search derivatives when `p < 2`.
pub(crate) fn smoothed_flux<S: Real>(z: &[S], p: S, mu: S, out: &mut [S]) {
    let m2 = z.iter().fold(mu * mu, |acc, &v| acc + v * v);
    let scale = if m2 == S::zero() { S::zero() } else { m2.powf((p - S::lit(2.0)) / S::lit(2.0)) };
    for (o, &zi) in out.iter_mut().zip(z) {
        *o = scale * zi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainShape, DomainSpec};

    fn square() -> DiscreteDomain<f64> {
        build_domain(&DomainSpec::new(DomainShape::Rectangle { lo: [0.0, 0.0], hi: [1.0, 1.0] }, 0.25, 1)).unwrap()
    }

    #[test]
    fn flux_examples() {
        assert_eq!(p_laplace_flux_vec(&[0.0, 0.0], 1.5), vec![0.0, 0.0]);
        assert_eq!(p_laplace_flux_vec(&[1.5, -2.0], 2.0), vec![1.5, -2.0]);
        assert_eq!(p_laplace_flux_vec(&[2.0, 0.0], 3.0), vec![4.0, 0.0]);
        let f32_out = p_laplace_flux_vec(&[2.0_f32, 0.0], 3.0);
        assert_eq!(f32_out, vec![4.0_f32, 0.0]);
    }

    #[test]
    fn exponent_examples() {
        let e = derive_exponents(2.0, 3.0, 0.5).unwrap();
        assert_eq!(e.q, 1.5);
        assert_eq!(e.s, 2.25);
        assert_eq!(e.p_conj, 2.0);
        assert_eq!(e.r_conj, 1.5);

        let e = derive_exponents(1.5f64, 2.0, 0.4).unwrap();
        assert!((e.q - 1.1).abs() < 1e-15);
        assert!((e.s - 1.1 * 2.0 / 1.5).abs() < 1e-15);
        assert!(e.s > e.r - 1.0);
        let (a, b) = e.hoelder_ratios();
        assert!((a - 2.75).abs() < 1e-12 && (b - 2.75).abs() < 1e-12);

        let e = derive_exponents(2.0f64, 3.0, 1e-9).unwrap();
        assert!((e.q - 2.0).abs() < 1e-8 && (e.s - 3.0).abs() < 1e-8);
    }

    #[test]
    fn exponent_rejections_name_the_bound() {
        let err = derive_exponents(2.0, 3.0, 0.7).unwrap_err().to_string();
        assert!(err.contains("p/r"), "{err}");
        let err = derive_exponents(3.0, 3.5, 0.9).unwrap_err().to_string();
        assert!(err.contains("p/r"), "{err}");
        let err = derive_exponents(4.0, 5.0, 1.0).unwrap_err().to_string();
        assert!(err.contains("eps < 1"), "{err}");
        assert!(derive_exponents(2.0, 3.0, 0.0).is_err());
        assert!(derive_exponents(2.0, 1.5, 0.1).is_err());
        assert!(derive_exponents(1.0, 1.5, 0.1).is_err());
    }

    #[test]
    fn canonical_operator_passes() {
        let d = square();
        for p in [1.5, 2.0, 3.0] {
            let op = OperatorSpec::p_laplace(p, &d);
            let rep = check_structure(&op, &d, 2000, 7, SampleRange::default()).unwrap();
            assert!(rep.pass, "{rep:?}");
            assert!(rep.coercivity_margin.abs() < 1e-12);
            assert!(rep.growth_margin.abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_operator_passes() {
        let d = square();
        let op = OperatorSpec::by_name("perturbed-p-laplace", 2.5, 0.75, &d).unwrap();
        assert!(!op.is_canonical());
        let rep = check_structure(&op, &d, 2000, 3, SampleRange::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(OperatorSpec::by_name("nope", 2.0, 0.0, &d).is_err());
    }

    #[test]
    fn anti_monotone_fails() {
        let d = square();
        let n = d.num_cells();
        let op = OperatorSpec::custom("neg", 2.0, 1.0, 1.0, vec![0.0; n], vec![0.0; n], |_, z, out| {
            for (o, v) in out.iter_mut().zip(z) {
                *o = -*v;
            }
        });
        let rep = check_structure(&op, &d, 100, 1, SampleRange::default()).unwrap();
        assert!(!rep.pass);
        assert!(rep.monotonicity_margin < 0.0);
    }

    #[test]
    fn doubled_flux_breaks_growth() {
        let d = square();
        let n = d.num_cells();
        let op = OperatorSpec::custom("double", 2.0, 1.0, 1.0, vec![0.0; n], vec![0.0; n], |_, z, out| {
            for (o, v) in out.iter_mut().zip(z) {
                *o = 2.0 * *v;
            }
        });
        let rep = check_structure(&op, &d, 100, 1, SampleRange::default()).unwrap();
        assert!(!rep.pass);
        assert!(rep.growth_margin < 0.0);
        assert!(rep.monotonicity_margin >= 0.0);
    }
}
