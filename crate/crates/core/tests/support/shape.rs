//! Random open sets in continuous coordinates, shared with the acceptance suite.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Open set from discs and boxes in continuous coordinates, so it refines with the grid.
#[derive(Debug)]
pub struct Shape {
    pub discs: Vec<([f64; 2], f64)>,
    pub boxes: Vec<([f64; 2], [f64; 2])>,
}

impl Shape {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let discs = (0..rng.gen_range(1..3))
            .map(|_| ([rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)], rng.gen_range(0.2..0.45)))
            .collect();
        let boxes = (0..rng.gen_range(0..2))
            .map(|_| {
                let lo = [rng.gen_range(-0.9..0.2), rng.gen_range(-0.9..0.2)];
                (lo, [lo[0] + rng.gen_range(0.3..0.7), lo[1] + rng.gen_range(0.3..0.7)])
            })
            .collect();
        Shape { discs, boxes }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.discs.iter().any(|(c, r)| (x[0] - c[0]).hypot(x[1] - c[1]) < *r)
            || self.boxes.iter().any(|(a, b)| x[0] > a[0] && x[0] < b[0] && x[1] > a[1] && x[1] < b[1])
    }
}
