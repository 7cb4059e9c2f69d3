//! Calibration run behind the default blow-up thresholds.
//!
//! `cargo run --release -p plaplab-core --example blowup_calibration`

use std::time::Instant;

use plaplab_core::estimate::{blowup_study, BlowupOptions, Thresholds};
use plaplab_core::grid::{build_domain, DomainShape, DomainSpec};
use plaplab_core::operators::derive_exponents;

fn main() {
    let exps = derive_exponents(2.0, 3.0, 0.25).unwrap();
    for (label, h, alpha) in [
        ("32x32", 1.0 / 16.0, 1.05),
        ("64x64", 1.0 / 32.0, 1.05),
        ("128x128", 1.0 / 64.0, 1.05),
        ("256x256", 1.0 / 128.0, 1.05),
    ] {
        let dom =
            build_domain(&DomainSpec::new(DomainShape::Rectangle { lo: [-1.0, -1.0], hi: [1.0, 1.0] }, h, 1)).unwrap();
        let start = Instant::now();
        let opts = BlowupOptions { thresholds: Thresholds { t1: 0.0, t2: 1.0 }, ..Default::default() };
        let rep = blowup_study(alpha, &exps, &dom, &opts).unwrap();
        println!("{label} alpha={alpha} ({:.1}s)", start.elapsed().as_secs_f64());
        println!("  L^q ratio {:.4}  L^p ratio {:.4}", rep.in_lq.increment_ratio, rep.in_lp.increment_ratio);
        for r in &rep.records {
            println!(
                "  k={:<5} Ep={:.6e} Epw={:.6e} dist={:.3e} it={} res={:.2e}",
                r.k, r.e_p_unweighted, r.e_p_weighted, r.xpr_distance, r.iterations, r.residual
            );
        }
        println!(
            "  growth {:.4}  last change {:.4e}",
            rep.verdicts.unweighted_growth, rep.verdicts.weighted_last_change
        );
    }
}
