//! Fourth-order jets of functions of one variable: the value and the first four
//! derivatives at a point, with the arithmetic needed to differentiate radial weights.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// `Jet([u, u', u'', u''', u''''])` at some point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet(pub [f64; 5]);

impl Jet {
    pub fn constant(c: f64) -> Self {
        Jet([c, 0.0, 0.0, 0.0, 0.0])
    }

    /// The identity function at x.
    pub fn variable(x: f64) -> Self {
        Jet([x, 1.0, 0.0, 0.0, 0.0])
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn d(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// Jet of the derivative. The top entry is unknown and set to NaN.
    pub fn derivative(&self) -> Self {
        let u = self.0;
        Jet([u[1], u[2], u[3], u[4], f64::NAN])
    }

    /// Jet with the value replaced and the derivatives kept.
    pub fn with_value(mut self, v: f64) -> Self {
        self.0[0] = v;
        self
    }

    /// g ∘ u, given g and its first four derivatives at u(x).
    pub fn compose(&self, g: [f64; 5]) -> Self {
        let [_, u1, u2, u3, u4] = self.0;
        Jet([
            g[0],
            g[1] * u1,
            g[2] * u1 * u1 + g[1] * u2,
            g[3] * u1.powi(3) + 3.0 * g[2] * u1 * u2 + g[1] * u3,
            g[4] * u1.powi(4) + 6.0 * g[3] * u1 * u1 * u2 + g[2] * (4.0 * u1 * u3 + 3.0 * u2 * u2) + g[1] * u4,
        ])
    }

    pub fn exp(&self) -> Self {
        let e = self.0[0].exp();
        self.compose([e; 5])
    }

    pub fn ln(&self) -> Self {
        let x = self.0[0];
        self.compose([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / x.powi(3), -6.0 / x.powi(4)])
    }

    pub fn powf(&self, p: f64) -> Self {
        let x = self.0[0];
        let mut g = [0.0; 5];
        let mut c = 1.0;
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = c * x.powf(p - k as f64);
            c *= p - k as f64;
        }
        self.compose(g)
    }

    pub fn recip(&self) -> Self {
        self.powf(-1.0)
    }

    /// A cut-off profile θ(u(x)) with θ given by its derivative evaluator.
    pub fn through(&self, theta: impl Fn(f64, usize) -> f64) -> Self {
        let x = self.0[0];
        self.compose([theta(x, 0), theta(x, 1), theta(x, 2), theta(x, 3), theta(x, 4)])
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.map(|v| -v))
    }
}

impl Mul for Jet {
    type Output = Jet;
    /// Leibniz rule.
    fn mul(self, o: Jet) -> Jet {
        const BINOM: [[f64; 5]; 5] = [
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0, 0.0],
            [1.0, 2.0, 1.0, 0.0, 0.0],
            [1.0, 3.0, 3.0, 1.0, 0.0],
            [1.0, 4.0, 6.0, 4.0, 1.0],
        ];
        Jet(std::array::from_fn(|k| (0..=k).map(|j| BINOM[k][j] * self.0[j] * o.0[k - j]).sum()))
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        Jet(self.0.map(|v| v * c))
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j * self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.0[0] += c;
        self
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn close(a: Jet, b: [f64; 5], tol: f64) {
        for k in 0..5 {
            assert_relative_eq!(a.d(k), b[k], max_relative = tol, epsilon = tol);
        }
    }

    #[test]
    fn closed_forms() {
        let x = Jet::variable(0.7);
        let e = 0.7f64.exp();
        close((x * 2.0).exp(), [e * e, 2.0 * e * e, 4.0 * e * e, 8.0 * e * e, 16.0 * e * e], 1e-13);
        close(x.ln(), [0.7f64.ln(), 1.0 / 0.7, -1.0 / 0.49, 2.0 / 0.343, -6.0 / 0.2401], 1e-13);
        let s = x * x * x;
        close(s, [0.343, 1.47, 4.2, 6.0, 0.0], 1e-13);
        close(x.powf(3.0), [0.343, 1.47, 4.2, 6.0, 0.0], 1e-12);
        close(x.recip() * x, [1.0, 0.0, 0.0, 0.0, 0.0], 1e-13);
    }

    proptest! {
        #[test]
        fn composition_agrees_with_finite_differences(a in 0.2f64..2.0, b in -0.4f64..1.0, x0 in 0.5f64..2.0) {
            // u(x) = e^{ax} / (2 + bx)
            let eval = |x: f64| (a * x).exp() / (2.0 + b * x);
            let j = (Jet::variable(x0) * a).exp() / (Jet::variable(x0) * b + 2.0);
            let h = 1e-3;
            let d1 = (eval(x0 + h) - eval(x0 - h)) / (2.0 * h);
            let d2 = (eval(x0 + h) - 2.0 * eval(x0) + eval(x0 - h)) / (h * h);
            prop_assert!((j.d(1) - d1).abs() < 1e-5 * (1.0 + d1.abs()));
            prop_assert!((j.d(2) - d2).abs() < 1e-4 * (1.0 + d2.abs()));
            let dj = j.derivative();
            let h2 = 1e-4;
            let jp = (Jet::variable(x0 + h2) * a).exp() / (Jet::variable(x0 + h2) * b + 2.0);
            let jm = (Jet::variable(x0 - h2) * a).exp() / (Jet::variable(x0 - h2) * b + 2.0);
            let d4 = (jp.d(3) - jm.d(3)) / (2.0 * h2);
            prop_assert!((dj.d(3) - d4).abs() < 1e-5 * (1.0 + d4.abs()));
        }
    }
}
