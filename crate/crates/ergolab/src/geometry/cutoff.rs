//! Smooth transition functions built from the degree-9 smoothstep.
//!
//! The smoothstep `S(x) = x^5 (126 - 420x + 540x^2 - 315x^3 + 70x^4)` rises from 0 to 1
//! on [0, 1] and has four vanishing derivatives at both ends, so every cut-off here is C⁴.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Highest derivative order supported by the evaluators.
pub const MAX_ORDER: usize = 4;

const SMOOTHSTEP: [f64; 10] = [0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0];

/// k-th derivative of the smoothstep, clamped to its plateaus outside [0, 1].
pub fn smoothstep(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    poly_derivative(&SMOOTHSTEP, x, k)
}

fn poly_derivative(c: &[f64], x: f64, k: usize) -> f64 {
    let mut acc = 0.0;
    for n in (k..c.len()).rev() {
        let mut f = 1.0;
        for j in 0..k {
            f *= (n - j) as f64;
        }
        acc = acc * x + c[n] * f;
    }
    acc
}

/// A single transition profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Cutoff {
    /// 0 for x ≤ a, 1 for x ≥ b.
    Rise { a: f64, b: f64 },
    /// 1 for x ≤ a, 0 for x ≥ b.
    Fall { a: f64, b: f64 },
    /// Rises on [a, b], equals 1 on [b, c], falls on [c, d].
    Window { a: f64, b: f64, c: f64, d: f64 },
    /// Even profile: 1 on [-inner, inner], 0 for |x| ≥ outer.
    EvenPlateau { inner: f64, outer: f64 },
}

impl Cutoff {
    /// Value (order 0) or derivative of the given order at x.
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        match *self {
            Cutoff::Rise { a, b } => rise(x, a, b, order),
            Cutoff::Fall { a, b } => fall(x, a, b, order),
            Cutoff::Window { a, b, c, d } => {
                if x < b {
                    rise(x, a, b, order)
                } else if x > c {
                    fall(x, c, d, order)
                } else if order == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Cutoff::EvenPlateau { inner, outer } => {
                let v = fall(x.abs(), inner, outer, order);
                if x < 0.0 && order % 2 == 1 {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// Closed interval outside of which the profile is locally constant.
    pub fn transition_support(&self) -> (f64, f64) {
        match *self {
            Cutoff::Rise { a, b } | Cutoff::Fall { a, b } => (a, b),
            Cutoff::Window { a, d, .. } => (a, d),
            Cutoff::EvenPlateau { outer, .. } => (-outer, outer),
        }
    }
}

fn rise(x: f64, a: f64, b: f64, k: usize) -> f64 {
    let w = b - a;
    smoothstep((x - a) / w, k) / w.powi(k as i32)
}

fn fall(x: f64, a: f64, b: f64, k: usize) -> f64 {
    let v = rise(x, a, b, k);
    if k == 0 {
        1.0 - v
    } else {
        -v
    }
}

/// Named collection of cut-offs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutoffLibrary {
    pub entries: BTreeMap<String, Cutoff>,
}

impl Default for CutoffLibrary {
    /// The standard set: `theta1`, `theta2` rise on [0, 1] (callers shift the argument),
    /// `theta3` is the even plateau on [-1, 1] vanishing beyond 2, `theta4` rises on [3/4, 1],
    /// and `theta_rbar`, `theta_vartheta` are the bump profiles of the 3+1 examples.
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("theta1".into(), Cutoff::Rise { a: 0.0, b: 1.0 });
        entries.insert("theta2".into(), Cutoff::Rise { a: 0.0, b: 1.0 });
        entries.insert("theta3".into(), Cutoff::EvenPlateau { inner: 1.0, outer: 2.0 });
        entries.insert("theta4".into(), Cutoff::Rise { a: 0.75, b: 1.0 });
        entries.insert(
            "theta_rbar".into(),
            Cutoff::Window { a: 3.0, b: 4.0, c: 5.0, d: 6.0 },
        );
        entries.insert(
            "theta_vartheta".into(),
            Cutoff::Window { a: PI / 6.0, b: PI / 4.0, c: 3.0 * PI / 4.0, d: 5.0 * PI / 6.0 },
        );
        CutoffLibrary { entries }
    }
}

impl CutoffLibrary {
    pub fn get(&self, name: &str) -> Result<&Cutoff> {
        self.entries
            .get(name)
            .ok_or_else(|| LabError::Domain(format!("unknown cut-off `{name}`")))
    }
}

/// Evaluate a named cut-off or one of its first four derivatives.
pub fn smooth_cutoff(lib: &CutoffLibrary, name: &str, x: f64, order: usize) -> Result<f64> {
    if order > MAX_ORDER {
        return Err(LabError::Domain(format!("derivative order {order} > {MAX_ORDER}")));
    }
    Ok(lib.get(name)?.eval(x, order))
}

/// θ₃ from the default library.
pub fn theta3(x: f64, order: usize) -> f64 {
    Cutoff::EvenPlateau { inner: 1.0, outer: 2.0 }.eval(x, order)
}

/// θ₄ from the default library.
pub fn theta4(x: f64, order: usize) -> f64 {
    Cutoff::Rise { a: 0.75, b: 1.0 }.eval(x, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plateaus() {
        let lib = CutoffLibrary::default();
        assert_eq!(smooth_cutoff(&lib, "theta3", 0.5, 0).unwrap(), 1.0);
        assert_eq!(smooth_cutoff(&lib, "theta3", 3.0, 0).unwrap(), 0.0);
        assert_eq!(smooth_cutoff(&lib, "theta3", -1.0, 0).unwrap(), 1.0);
        assert_eq!(smooth_cutoff(&lib, "theta4", 0.5, 1).unwrap(), 0.0);
        assert_eq!(smooth_cutoff(&lib, "theta4", 1.2, 0).unwrap(), 1.0);
        assert_eq!(smooth_cutoff(&lib, "theta_rbar", 4.5, 0).unwrap(), 1.0);
        assert_eq!(smooth_cutoff(&lib, "theta_rbar", 2.9, 0).unwrap(), 0.0);
        assert!(smooth_cutoff(&lib, "nope", 0.0, 0).is_err());
        assert!(smooth_cutoff(&lib, "theta3", 0.0, 5).is_err());
    }

    #[test]
    fn smoothstep_end_jets_vanish() {
        for k in 1..=4 {
            assert!(poly_derivative(&SMOOTHSTEP, 0.0, k).abs() < 1e-12);
            assert!(poly_derivative(&SMOOTHSTEP, 1.0, k).abs() < 1e-9, "k={k}");
        }
        assert!((poly_derivative(&SMOOTHSTEP, 1.0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let shapes = [
            Cutoff::Rise { a: 0.3, b: 1.7 },
            Cutoff::Fall { a: -1.0, b: 2.0 },
            Cutoff::Window { a: 3.0, b: 4.0, c: 5.0, d: 6.0 },
            Cutoff::EvenPlateau { inner: 1.0, outer: 2.0 },
        ];
        let h = 1e-5;
        for c in shapes {
            let (lo, hi) = c.transition_support();
            for i in 0..50 {
                let x = lo - 0.5 + (hi - lo + 1.0) * (i as f64 + 0.37) / 50.0;
                for k in 0..4 {
                    let fd = (c.eval(x + h, k) - c.eval(x - h, k)) / (2.0 * h);
                    let an = c.eval(x, k + 1);
                    let scale = 1.0 + an.abs();
                    assert!((fd - an).abs() < 1e-4 * scale, "{c:?} x={x} k={k}: {fd} vs {an}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn values_in_unit_interval(x in -10.0f64..10.0) {
            let lib = CutoffLibrary::default();
            for c in lib.entries.values() {
                let v = c.eval(x, 0);
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn theta3_is_even(x in -3.0f64..3.0) {
            for k in 0..=4 {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert!((theta3(-x, k) - s * theta3(x, k)).abs() < 1e-12);
            }
        }
    }
}
