use plaplab_core::grid::Grid;
use plaplab_core::maximal::CellMask;
use plaplab_core::whitney::{whitney_decompose, OutsideRule, WhitneyDecomposition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square_grid(n: usize) -> Grid<f64> {
    Grid { dim: 2, nx: n, ny: n, h: 1.0 / n as f64, lo: [0.0, 0.0] }
}

fn decompose(grid: &Grid<f64>, mask: &CellMask, rule: OutsideRule) -> WhitneyDecomposition<f64> {
    let mut w = whitney_decompose(grid, mask, None, rule).unwrap();
    w.partition_of_unity().unwrap();
    w
}

/// Brute-force distance from the closed cube to every closed complement cell.
fn brute_distance(w: &WhitneyDecomposition<f64>, i: usize) -> f64 {
    let g = &w.grid;
    let c = w.corner(i);
    let s = w.side(i);
    let mut best = f64::INFINITY;
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            if w.open.contains(ix, iy) {
                continue;
            }
            let (bx, by) = (g.lo[0] + ix as f64 * g.h, g.lo[1] + iy as f64 * g.h);
            let gx = (bx - (c[0] + s)).max(c[0] - (bx + g.h)).max(0.0);
            let gy = (by - (c[1] + s)).max(c[1] - (by + g.h)).max(0.0);
            best = best.min(gx.hypot(gy));
        }
    }
    best
}

#[test]
fn half_plane_sizes_follow_distance() {
    let g = square_grid(32);
    let mask = CellMask::from_fn(32, 32, |_, iy| iy >= 16);
    let w = decompose(&g, &mask, OutsideRule::Universe);
    let check = w.check();
    assert!(check.pass(1e-12), "{check:?}");
    for i in 0..w.len() {
        let d = brute_distance(&w, i);
        assert!((d - w.distance_to_complement(i)).abs() < 1e-12);
        // the complement is the lower half, so the distance is the height above the line
        assert!((d - (w.corner(i)[1] - 0.5)).abs() < 1e-12);
        if !w.cubes[i].floor_clipped {
            assert!(w.diam(i) < d && d <= 4.0 * w.diam(i));
        }
    }
}

#[test]
fn square_and_interval_pass() {
    let g = square_grid(32);
    let mask = CellMask::from_fn(32, 32, |ix, iy| (8..24).contains(&ix) && (8..24).contains(&iy));
    let check = decompose(&g, &mask, OutsideRule::Complement).check();
    assert!(check.pass(1e-12), "{check:?}");
    assert!(check.partition.unwrap().gradient_constant <= 16.0 * 2.0);

    let line = Grid { dim: 1, nx: 64, ny: 1, h: 1.0 / 64.0, lo: [0.0, 0.0] };
    let all = CellMask::from_fn(64, 1, |_, _| true);
    let check = decompose(&line, &all, OutsideRule::Complement).check();
    assert!(check.pass(1e-12), "{check:?}");
    // a half-size neighbour's ramp reaching a flat bump gives diam |psi'| up to 2 * 16 in 1D
    assert!(check.partition.unwrap().gradient_constant <= 32.0);
}

#[test]
fn random_masks_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = square_grid(32);
    for _ in 0..5 {
        let blocks: Vec<bool> = (0..64).map(|_| rng.gen_bool(0.5)).collect();
        let mut mask = CellMask::from_fn(32, 32, |ix, iy| blocks[(iy / 4) * 8 + ix / 4]);
        mask.members[0] = false;
        if mask.is_empty() {
            continue;
        }
        let w = decompose(&g, &mask, OutsideRule::Universe);
        let check = w.check();
        assert!(check.pass(1e-12), "{check:?}");
        for i in (0..w.len()).step_by(7) {
            assert!((brute_distance(&w, i) - w.distance_to_complement(i)).abs() < 1e-12);
        }
    }
}
