//! Named analytic forcing profiles.

use serde::{Deserialize, Serialize};

use crate::grid::{DiscreteDomain, Field, Rank};
use crate::scalar::Real;

/// Scalar profile placed in the first component (`e_1` direction for gradient-rank data).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    Constant {
        value: f64,
    },
    GaussianBump {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `amplitude |x - origin|^(-alpha)`.
    RadialSingularity {
        alpha: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn value(&self, x: [f64; 2], origin: [f64; 2]) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value,
            Profile::GaussianBump { amplitude, width, center } => {
                let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                amplitude * (-r2 / (width * width)).exp()
            }
            Profile::RadialSingularity { alpha, amplitude } => {
                let r = (x[0] - origin[0]).hypot(x[1] - origin[1]);
                amplitude * r.powf(-alpha)
            }
        }
    }

    /// Whether the profile is bounded on bounded sets.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, Profile::RadialSingularity { alpha, .. } if *alpha > 0.0)
    }

    /// Samples the profile at cell centres into the first entry of each record.
    pub fn field<S: Real>(&self, rank: Rank, dom: &DiscreteDomain<S>) -> Field<S> {
        let o = dom.origin();
        let origin = [o[0].as_f64(), o[1].as_f64()];
        Field::from_fn(dom, rank, |x, out| {
            out[0] = S::lit(self.value([x[0].as_f64(), x[1].as_f64()], origin));
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_evaluate() {
        let o = [0.0, 0.0];
        assert_eq!(Profile::Constant { value: 2.0 }.value([5.0, 1.0], o), 2.0);
        let s = Profile::RadialSingularity { alpha: 1.0, amplitude: 1.0 };
        assert!((s.value([0.0, 0.5], o) - 2.0).abs() < 1e-15);
        let g = Profile::GaussianBump { amplitude: 3.0, width: 0.5, center: [0.0, 0.0] };
        assert_eq!(g.value([0.0, 0.0], o), 3.0);
        assert!(!s.is_bounded() && g.is_bounded());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"kind":"radial-singularity","alpha":1.0,"amplitude":1.0}"#);
        let back: Profile = serde_json::from_str(r#"{"kind":"radial-singularity","alpha":1.05}"#).unwrap();
        assert_eq!(back, Profile::RadialSingularity { alpha: 1.05, amplitude: 1.0 });
    }
}
