//! Weighted estimate constants over the stability matrix: 2 domains x 3 forcings x 2 eps,
//! k in {2, 8, 32}, at h = 1/16 and h = 1/32.
//!
//! `cargo run --release -p plaplab-core --example theorem_matrix`

use plaplab_core::estimate::estimate_sweep;
use plaplab_core::forcing::Profile;
use plaplab_core::grid::{build_domain, DomainShape, DomainSpec, Rank};
use plaplab_core::operators::derive_exponents;
use plaplab_core::solver::StudyOptions;

fn main() {
    let shapes = [
        ("square", DomainShape::Rectangle { lo: [-1.0, -1.0], hi: [1.0, 1.0] }),
        ("lshape", DomainShape::LShape { lo: [-1.0, -1.0], hi: [1.0, 1.0], cut: [0.0, 0.0] }),
    ];
    let bump = Profile::GaussianBump { amplitude: 4.0, width: 0.3, center: [-0.25, -0.25] };
    let forcings = [
        ("constant", Profile::Constant { value: 1.0 }, Profile::Constant { value: 1.0 }),
        ("gaussian-bump", bump, bump),
        ("radial-singularity", Profile::RadialSingularity { alpha: 1.05, amplitude: 1.0 }, Profile::Zero),
    ];
    let ks = [2.0, 8.0, 32.0];
    for (sname, shape) in &shapes {
        for (fname, fp, gp) in &forcings {
            for eps in [0.25, 0.5] {
                let exps = derive_exponents(2.0, 3.0, eps).unwrap();
                let mut per_h = Vec::new();
                for h in [1.0 / 16.0, 1.0 / 32.0] {
                    let dom = build_domain(&DomainSpec::new(*shape, h, 1)).unwrap();
                    let f = fp.field(Rank::Gradient, &dom);
                    let g = gp.field(Rank::Scalar, &dom);
                    let (reps, _) =
                        estimate_sweep(&f, &g, &exps, &dom, &ks, 1.0, 0.5, &StudyOptions::default()).unwrap();
                    per_h.push(reps.iter().map(|r| r.empirical_constant).collect::<Vec<_>>());
                }
                println!("{sname:7} {fname:19} eps={eps:<5} h=1/16 {:?}  h=1/32 {:?}", per_h[0], per_h[1]);
            }
        }
    }
}
