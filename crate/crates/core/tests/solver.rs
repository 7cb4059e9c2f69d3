#[path = "support/oracle.rs"]
mod oracle;

use oracle::{interval, oracle_solution, random_data, rectangle};
use plaplab_core::grid::{build_domain, DomainShape, DomainSpec, Field, Rank};
use plaplab_core::operators::derive_exponents;
use plaplab_core::solver::{
    approximation_study, discrete_energy, energy_gradient, solve_weak, truncate_forcing, xpr_norm, SolveOptions,
    StudyOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_coordinate_descent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = SolveOptions { tol: 1e-12, max_iters: 50_000 };
    for (p, r) in [(2.0, 3.0), (3.0, 4.0), (1.5, 2.5)] {
        let exps = derive_exponents(p, r, 0.25).unwrap();
        for dom in [rectangle(5, 0.2), rectangle(3, 0.25), interval(8, 0.125)] {
            let (f, g) = random_data(&dom, &mut rng);
            let (u, rep) = solve_weak(&f, &g, &exps, &dom, &opts, None).unwrap();
            assert!(rep.converged, "p = {p}: {rep:?}");
            let uo = oracle_solution(&dom, &f, &g, p, r);
            for (c, want) in uo.iter().enumerate() {
                let e = (u.cell(c)[0] - want).abs();
                assert!(e < 1e-8, "p = {p}, r = {r}, cell {c}: off by {e:e}");
            }
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (p, r) in [(2.0, 3.0), (3.0, 4.0), (2.5, 4.0)] {
        let exps = derive_exponents(p, r, 0.25).unwrap();
        let dom = rectangle(8, 0.125);
        let (f, g) = random_data(&dom, &mut rng);
        // keep u away from 0 so the absorption term stays smooth along the probes
        let u = Field::from_fn(&dom, Rank::Scalar, |_, o| o[0] = rng.gen_range(0.5..1.5));
        let grad = energy_gradient(&u, &f, &g, &exps, &dom).unwrap();
        let energy = |v: &Field<f64>| discrete_energy(v, &f, &g, &exps, &dom).unwrap();
        for _ in 0..20 {
            let dir = Field::from_fn(&dom, Rank::Scalar, |_, o| o[0] = rng.gen_range(-0.3..0.3));
            let exact: f64 = grad.values.iter().zip(&dir.values).map(|(a, b)| a * b).sum();
            let fd = |t: f64| {
                (energy(&u.combine(1.0, &dir, t).unwrap()) - energy(&u.combine(1.0, &dir, -t).unwrap())) / (2.0 * t)
            };
            let rel = (fd(1e-4) - exact).abs() / exact.abs().max(1e-12);
            assert!(rel <= 1e-5, "p = {p}: relative error {rel:e}");

            let steps = [0.4, 0.2, 0.1, 0.05];
            let errs: Vec<f64> = steps.iter().map(|&t| (fd(t) - exact).abs()).collect();
            if errs.iter().all(|e| *e > 1e-11) {
                let slope = (errs[0] / errs[3]).ln() / (steps[0] / steps[3]).ln();
                assert!((1.7..2.3).contains(&slope), "p = {p}: observed order {slope}");
            }
        }
    }
}

#[test]
fn random_starts_agree_and_energy_never_rises() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dom = rectangle(16, 1.0 / 16.0);
    let opts = SolveOptions::default();
    for (p, r) in [(2.0, 3.0), (3.0, 4.0), (1.5, 2.5)] {
        let exps = derive_exponents(p, r, 0.25).unwrap();
        let (f, g) = random_data(&dom, &mut rng);
        let mut sols = Vec::new();
        for _ in 0..2 {
            let init = Field::from_fn(&dom, Rank::Scalar, |_, o| o[0] = rng.gen_range(-1.0..1.0));
            let (u, rep) = solve_weak(&f, &g, &exps, &dom, &opts, Some(&init)).unwrap();
            assert!(rep.converged, "{rep:?}");
            for w in rep.energy_history.windows(2) {
                assert!(w[1] <= w[0] + rep.energy_noise, "energy rose: {} -> {}", w[0], w[1]);
            }
            sols.push(u);
        }
        let diff = sols[0].values.iter().zip(&sols[1].values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 4.0 * opts.tol, "p = {p}: starts differ by {diff:e}");
    }
}

#[test]
fn transposition_and_reflection_symmetry() {
    let h = 1.0 / 12.0;
    let dom =
        build_domain(&DomainSpec::new(DomainShape::Rectangle { lo: [-0.5f64, -0.5], hi: [0.5, 0.5] }, h, 1)).unwrap();
    let g = Field::from_fn(&dom, Rank::Scalar, |x: [f64; 2], o| o[0] = (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp());
    let gt = Field::from_fn(&dom, Rank::Scalar, |x: [f64; 2], o| o[0] = (-(x[1] * x[1] + 2.0 * x[0] * x[0])).exp());
    let f = Field::zeros(&dom, Rank::Gradient);
    let opts = SolveOptions { tol: 1e-11, max_iters: 20_000 };
    let find = |x: [f64; 2]| {
        (0..dom.num_cells()).find(|&c| {
            let y = dom.center(c);
            (y[0] - x[0]).abs() < 1e-9 && (y[1] - x[1]).abs() < 1e-9
        })
    };
    for (p, r) in [(2.0, 3.0), (3.0, 4.0)] {
        let exps = derive_exponents(p, r, 0.25).unwrap();
        let (u, _) = solve_weak(&f, &g, &exps, &dom, &opts, None).unwrap();
        let (ut, _) = solve_weak(&f, &gt, &exps, &dom, &opts, None).unwrap();
        for c in 0..dom.num_cells() {
            let x = dom.center(c);
            let t = find([x[1], x[0]]).unwrap();
            assert!((u.cell(c)[0] - ut.cell(t)[0]).abs() < 1e-9);
            // forward differences pair faces differently after a reflection unless p = 2
            if p == 2.0 {
                let m = find([-x[0], x[1]]).unwrap();
                assert!((u.cell(c)[0] - u.cell(m)[0]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn truncation_is_monotone_and_eventually_exact() {
    let dom = rectangle(16, 1.0 / 16.0);
    let f = Field::from_fn(&dom, Rank::Gradient, |x, o| {
        o[0] = 3.0 * (6.0 * x[0]).sin();
        o[1] = 2.0 * x[1] - 1.0;
    });
    let mut prev = vec![0.0; dom.num_cells()];
    for k in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let fk = truncate_forcing(&f, k, &dom, None).unwrap();
        let m = fk.magnitudes();
        let full = f.magnitudes();
        for c in 0..dom.num_cells() {
            assert!(m[c] <= k + 1e-12 && m[c] + 1e-12 >= prev[c]);
            if dom.radius_of(c) < k && full[c] <= k {
                assert_eq!(fk.cell(c), f.cell(c));
            }
        }
        prev = m;
    }

    // bounded data: once k exceeds |f|, |g| and the domain radius every level solves the same problem
    let g = Field::from_fn(&dom, Rank::Scalar, |x, o| o[0] = x[0] - x[1]);
    let exps = derive_exponents(2.0, 3.0, 0.25).unwrap();
    let opts = StudyOptions::default();
    let rep = approximation_study(&f, &g, &exps, &dom, &[4.0, 8.0, 16.0], 1.0, 0.25, &opts).unwrap();
    assert!(rep.all_converged());
    for rec in &rep.records[1..] {
        assert!(rec.xpr_distance <= 2.0 * opts.solve.tol, "{rec:?}");
    }
    // cold starts land on the same point too
    let (cold, _) = solve_weak(&f, &g, &exps, &dom, &opts.solve, None).unwrap();
    let d = xpr_norm(&cold.combine(1.0, &rep.solutions[2], -1.0).unwrap(), 2.0, 3.0, &dom).unwrap();
    assert!(d <= 1e-6, "cold start differs by {d:e}");
}

#[test]
fn single_precision_solves() {
    let dom =
        build_domain(&DomainSpec::new(DomainShape::Rectangle { lo: [0.0f32, 0.0], hi: [1.0, 1.0] }, 0.125, 1)).unwrap();
    let exps = derive_exponents(2.0f32, 3.0, 0.25).unwrap();
    let f = Field::zeros(&dom, Rank::Gradient);
    let g = Field::from_fn(&dom, Rank::Scalar, |_, o| o[0] = 1.0f32);
    let (u, rep) = solve_weak(&f, &g, &exps, &dom, &SolveOptions { tol: 1e-4, max_iters: 5000 }, None).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert!(u.values.iter().all(|v| *v > 0.0 && *v < 1.0));
}
