#![allow(clippy::needless_range_loop)]

use plaplab_core::estimate::verify_embedding;
use plaplab_core::grid::{
    build_domain, gradient, weighted_norm, BoxField, DiscreteDomain, DomainShape, DomainSpec, Field, Grid, Rank,
};
use plaplab_core::maximal::maximal_function;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 8;

fn grid() -> Grid<f64> {
    Grid { dim: 2, nx: N, ny: N, h: 1.0 / N as f64, lo: [0.0, 0.0] }
}

fn square() -> DiscreteDomain<f64> {
    build_domain(&DomainSpec::new(DomainShape::Rectangle { lo: [0.0, 0.0], hi: [1.0, 1.0] }, 1.0 / N as f64, 1))
        .unwrap()
}

fn boxed(values: Vec<f64>) -> BoxField<f64> {
    BoxField { nx: N, ny: N, values }
}

fn scalar(values: Vec<f64>) -> Field<f64> {
    Field { rank: Rank::Scalar, width: 1, values }
}

fn nonneg() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..10.0f64, N * N)
}

fn signed() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, N * N)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn maximal_dominates_and_is_sublinear(f in nonneg(), g in nonneg(), a in 0.0..5.0f64) {
        let gr = grid();
        let mf = maximal_function(&gr, &boxed(f.clone())).unwrap();
        let mg = maximal_function(&gr, &boxed(g.clone())).unwrap();
        let sum: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x + y).collect();
        let ms = maximal_function(&gr, &boxed(sum)).unwrap();
        let ma = maximal_function(&gr, &boxed(f.iter().map(|x| a * x).collect())).unwrap();
        for i in 0..N * N {
            prop_assert!(mf.values[i] >= f[i]);
            prop_assert!(ms.values[i] <= mf.values[i] + mg.values[i] + 1e-12);
            prop_assert!(close(ma.values[i], a * mf.values[i]));
        }
    }

    #[test]
    fn maximal_is_monotone(f in nonneg(), bump in nonneg()) {
        let gr = grid();
        let big: Vec<f64> = f.iter().zip(&bump).map(|(x, y)| x + y).collect();
        let mf = maximal_function(&gr, &boxed(f)).unwrap();
        let mb = maximal_function(&gr, &boxed(big)).unwrap();
        for i in 0..N * N {
            prop_assert!(mf.values[i] <= mb.values[i] + 1e-12);
        }
    }

    #[test]
    fn gradient_is_linear(u in signed(), v in signed(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let dom = square();
        let (u, v) = (scalar(u), scalar(v));
        let lhs = gradient(&u.combine(a, &v, b).unwrap(), &dom).unwrap();
        let gu = gradient(&u, &dom).unwrap();
        let gv = gradient(&v, &dom).unwrap();
        for i in 0..lhs.values.len() {
            let want = a * gu.values[i] + b * gv.values[i];
            prop_assert!((lhs.values[i] - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn norms_scale_and_order(u in signed(), extra in nonneg(), a in -4.0..4.0f64, t in 1.0..5.0f64) {
        let dom = square();
        let reg = dom.whole();
        let u = scalar(u);
        let n = weighted_norm(&dom, &u, None, t, &reg).unwrap();
        let na = weighted_norm(&dom, &u.scaled(a), None, t, &reg).unwrap();
        prop_assert!(close(na, a.abs() * n));
        // |u| <= |w| pointwise gives ||u|| <= ||w||
        let w = scalar(u.values.iter().zip(&extra).map(|(x, e)| x.signum() * (x.abs() + e)).collect());
        prop_assert!(n <= weighted_norm(&dom, &w, None, t, &reg).unwrap() * (1.0 + 1e-14));
        let weight = boxed(extra.iter().map(|e| 0.1 + e).collect());
        let nw = weighted_norm(&dom, &u, Some(&weight), t, &reg).unwrap();
        let nw2 = weighted_norm(&dom, &u, Some(&weight.map(|x| 2.0 * x)), t, &reg).unwrap();
        prop_assert!(close(nw2, 2f64.powf(1.0 / t) * nw));
    }
}

/// The criterion names 50 random pairs; these run on top of the shrinking cases above.
#[test]
fn maximal_on_fifty_seeded_pairs() {
    let gr = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..50 {
        let f: Vec<f64> = (0..N * N).map(|_| rng.gen_range(0.0..1.0f64).powi(3) * 20.0).collect();
        let g: Vec<f64> = (0..N * N).map(|_| rng.gen_range(0.0..5.0)).collect();
        let mf = maximal_function(&gr, &boxed(f.clone())).unwrap();
        let mg = maximal_function(&gr, &boxed(g.clone())).unwrap();
        let ms = maximal_function(&gr, &boxed(f.iter().zip(&g).map(|(a, b)| a + b).collect())).unwrap();
        let mx = maximal_function(&gr, &boxed(f.iter().zip(&g).map(|(a, b)| a.max(*b)).collect())).unwrap();
        for i in 0..N * N {
            assert!(mf.values[i] >= f[i]);
            assert!(ms.values[i] <= mf.values[i] + mg.values[i] + 1e-12);
            assert!(mx.values[i] + 1e-12 >= mf.values[i].max(mg.values[i]));
        }
    }
    let c = maximal_function(&gr, &BoxField::constant(&gr, 0.3)).unwrap();
    assert!(c.values.iter().all(|&v| v == 0.3));
}

#[test]
fn embedding_on_hundred_random_pairs() {
    let dom = square();
    let reg = dom.whole();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let p = rng.gen_range(1.5..4.0);
        let q = rng.gen_range(1.05..p - 0.05);
        let v = Field::from_fn(&dom, Rank::Gradient, |_, o| o.iter_mut().for_each(|x| *x = rng.gen_range(-3.0..3.0)));
        let w = boxed((0..N * N).map(|_| rng.gen_range(-4.0..4.0f64).exp()).collect());
        let m = verify_embedding(&v, &w, p, q, &reg, &dom).unwrap();
        assert!(m.margin >= -1e-12 * m.rhs, "{m:?}");
    }
}
