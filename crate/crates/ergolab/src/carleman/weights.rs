//! Radial weights: the base function w̄, w = e^{l w̄}, the piecewise w_R, the far-region
//! profile v_s and the multiplier data f, h.
//!
//! On the vortex and on flat 2+1 space in polar coordinates, g^{rr} = 1 and √|g| = r, so for
//! functions of r alone ∇u·∇u = u'², □u = u'' + u'/r and the Hessian contraction
//! ∇^μ∇^ν u ∇_μu ∇_νu = u'' u'². Everything below is therefore one-dimensional jet calculus.
//! Since every quantity of interest is homogeneous in f, f is carried through its logarithm.

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::Serialize;

use super::jet::Jet;
use super::params::CarlemanParams;
use crate::error::{LabError, Result};
use crate::geometry::{smoothstep, theta4, ModelKind, SpacetimeModel};

/// The radial data of a supported model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialSetting {
    pub kind: ModelKind,
    /// Circulation C (0 on flat space).
    pub circulation: f64,
    /// Smallest radius of the manifold.
    pub r_min: f64,
    /// Outer radius of the ergoregion, if there is one.
    pub ergo_radius: Option<f64>,
}

impl RadialSetting {
    pub fn from_model(model: &SpacetimeModel) -> Result<Self> {
        model.validate()?;
        match model.kind {
            ModelKind::HydroVortex => Ok(RadialSetting {
                kind: model.kind,
                circulation: model.c,
                r_min: model.delta,
                ergo_radius: Some(model.c),
            }),
            ModelKind::Minkowski if model.spatial_dim == 2 => {
                Ok(RadialSetting { kind: model.kind, circulation: 0.0, r_min: 0.0, ergo_radius: None })
            }
            _ => Err(LabError::Unsupported(format!(
                "radial Carleman weights need the vortex or flat 2+1 space, got {:?} in dimension {}",
                model.kind,
                model.dim()
            ))),
        }
    }

    /// Whether r lies in ℰ_δ = {dist(·, ℰ) ≤ δ}.
    pub fn in_ergo_neighbourhood(&self, r: f64, delta: f64) -> bool {
        self.ergo_radius.is_some_and(|c| r <= c + delta)
    }

    /// Inverse metric on the (t, φ) block and the r-derivative of the lower (t, φ) block.
    pub fn tphi_block(&self, r: f64) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
        let c = self.circulation;
        let inv = [[-1.0, -c / (r * r)], [-c / (r * r), (1.0 - c * c / (r * r)) / (r * r)]];
        let d_lower = [[-2.0 * c * c / r.powi(3), 0.0], [0.0, 2.0 * r]];
        (inv, d_lower)
    }
}

/// Solution of w̄'' + w̄'/r = γ on (a, b) with w̄(a) = 1, w̄(b) = 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseWeight {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    /// w̄ = A + B log r + γ r²/4.
    pub coef: (f64, f64),
    /// Discrete solution on a grid uniform in log r.
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Max-norm residual of the tridiagonal system.
    pub residual: f64,
    /// Max |discrete − closed form| on the grid.
    pub closed_form_deviation: f64,
    /// Smallest discrete slope, and the smallest analytic slope over the scanned range.
    pub min_slope: f64,
}

impl BaseWeight {
    /// Closed form, continued analytically past both ends.
    pub fn jet(&self, r: f64) -> Jet {
        let x = Jet::variable(r);
        x.ln() * self.coef.1 + x * x * (self.gamma / 4.0) + self.coef.0
    }

    /// inf over r ≥ c + 2δ minus max over ℰ_δ; w̄ is increasing so both are endpoint values.
    pub fn separation(&self, ergo_radius: f64, delta: f64) -> f64 {
        self.jet(ergo_radius + 2.0 * delta).value() - self.jet(ergo_radius + delta).value()
    }
}

/// Solves the radial elliptic problem for w̄ between the ergoregion (or r₀/6) and R₀/4.
pub fn solve_base_weight(model: &SpacetimeModel, params: &CarlemanParams) -> Result<BaseWeight> {
    let setting = RadialSetting::from_model(model)?;
    let a = setting.ergo_radius.unwrap_or(params.r0_for(model) / 6.0);
    let b = params.big_r0 / 4.0;
    if !(b > a && a > 0.0) {
        return Err(LabError::Construction(format!("need 0 < a < R0/4, got a = {a}, R0/4 = {b}")));
    }
    let gamma = params.gamma;
    let n = 4000;
    let (xa, xb) = (a.ln(), b.ln());
    let h = (xb - xa) / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| if i == n { b } else { (xa + h * i as f64).exp() }).collect();
    // In x = log r the equation is w_xx = γ e^{2x}.
    let rhs: Vec<f64> = grid.iter().map(|r| h * h * gamma * r * r).collect();
    let m = n - 1;
    let mut d = vec![-2.0; m];
    let mut q: Vec<f64> = (1..n).map(|i| rhs[i]).collect();
    q[0] -= 1.0;
    q[m - 1] -= 2.0;
    // Thomas sweep with unit off-diagonals.
    for i in 1..m {
        let w = 1.0 / d[i - 1];
        d[i] -= w;
        q[i] -= w * q[i - 1];
    }
    let mut u = vec![0.0; m];
    u[m - 1] = q[m - 1] / d[m - 1];
    for i in (0..m - 1).rev() {
        u[i] = (q[i] - u[i + 1]) / d[i];
    }
    let mut values = Vec::with_capacity(n + 1);
    values.push(1.0);
    values.extend(u);
    values.push(2.0);
    let residual = (1..n)
        .map(|i| (values[i + 1] - 2.0 * values[i] + values[i - 1] - rhs[i]).abs())
        .fold(0.0, f64::max);
    let cb = (1.0 - gamma * (b * b - a * a) / 4.0) / (b / a).ln();
    let ca = 1.0 - cb * a.ln() - gamma * a * a / 4.0;
    let mut base = BaseWeight {
        a,
        b,
        gamma,
        coef: (ca, cb),
        grid,
        values,
        residual,
        closed_form_deviation: 0.0,
        min_slope: 0.0,
    };
    base.closed_form_deviation =
        base.grid.iter().zip(&base.values).map(|(&r, v)| (v - base.jet(r).value()).abs()).fold(0.0, f64::max);
    let discrete = base.values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let lo = setting.r_min.max(a / 8.0).max(1e-12);
    let analytic = (0..=2000)
        .map(|i| base.jet(lo * (1.5 * params.big_r0 / lo).powf(i as f64 / 2000.0)).d(1))
        .fold(f64::INFINITY, f64::min);
    base.min_slope = analytic;
    if !(discrete > 0.0 && analytic > 0.0 && residual < 1e-10) {
        return Err(LabError::Construction(format!(
            "maximum principle certificate failed: min discrete step {discrete:e}, min slope {analytic:e}, residual {residual:e}"
        )));
    }
    Ok(base)
}

/// w = e^{l w̄} with its Hessian certificate. The Morse deformation is the identity in the
/// radial case, so the deformed weight equals w and the critical set is empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpWeight {
    pub base: BaseWeight,
    pub l: f64,
    /// min of ∇^μ∇^ν w ∇_μw ∇_νw over {r₀/8 ≤ r ≤ R₀} outside the ergoregion.
    pub hessian_min: f64,
    pub hessian_argmin: f64,
    /// ∇^μw ∇_μw on the ergoregion boundary.
    pub boundary_gradient_sq: Option<f64>,
    pub critical_set: Vec<f64>,
}

impl ExpWeight {
    pub fn jet(&self, r: f64) -> Jet {
        (self.base.jet(r) * self.l).exp()
    }
}

pub fn build_w(model: &SpacetimeModel, base: BaseWeight, l: f64, params: &CarlemanParams) -> Result<ExpWeight> {
    let setting = RadialSetting::from_model(model)?;
    let lo = setting.ergo_radius.unwrap_or(params.r0_for(model) / 8.0).max(setting.r_min);
    let hi = params.big_r0;
    let mut w = ExpWeight {
        base,
        l,
        hessian_min: f64::INFINITY,
        hessian_argmin: lo,
        boundary_gradient_sq: None,
        critical_set: Vec::new(),
    };
    for i in 0..=4000 {
        let r = lo * (hi / lo).powf(i as f64 / 4000.0);
        let j = w.jet(r);
        let c = j.d(2) * j.d(1) * j.d(1);
        if c < w.hessian_min {
            w.hessian_min = c;
            w.hessian_argmin = r;
        }
    }
    w.boundary_gradient_sq = setting.ergo_radius.map(|c| w.jet(c).d(1).powi(2));
    if !(w.hessian_min > 0.0) {
        return Err(LabError::Construction(format!(
            "Hessian certificate fails at l = {l} (min {:.3e} at r = {:.4}); increase l",
            w.hessian_min, w.hessian_argmin
        )));
    }
    Ok(w)
}

/// Closed-form building blocks of w_R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// R^{-3ε₀} w.
    Inner,
    /// C₁ R^{-3ε₀} r^{2+ε₀} / (2+ε₀), the rising part of the bridge.
    Rising,
    /// C₁ ε₀⁻¹ (r/R)^{ε₀}.
    Power,
    /// -δ₁(x − 3/5)⁶ − ((x−1)² + 10)/(2s).
    Sextic,
    /// −((x−1)² + 10)/(2s).
    Quadratic,
    /// log(x − 0.9 log x)/(2s).
    LogProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PieceKind {
    /// w_R = shape + offset.
    Closed { shape: Shape, offset: f64 },
    /// w_R' = (1−χ) from' + χ to' + κ S'(u)/(hi−lo), w_R(lo) = anchor.
    Blend { from: Shape, to: Shape, anchor: f64, kappa: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub kind: PieceKind,
}

/// Constants produced by the assembly. C₄ overflows a double for realistic s, so its
/// logarithm is stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub log_c4: f64,
}

/// A derivative jump at a join between two pieces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeamResidual {
    pub label: String,
    pub r: f64,
    /// max over orders 0..=4 of the relative jump.
    pub residual: f64,
}

/// Grid re-verification of the bounds on the bridge and on v_s.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeBounds {
    /// min R^{3ε₀} ∂_r w_R on [R₀, R^{ε₀}].
    pub bridge_slope_lower: f64,
    /// max ∂_r w_R on [R₀, R^{ε₀}].
    pub bridge_slope_upper: f64,
    /// max over orders 2..=4 of |∂^k_r w_R| on [R₀, R^{ε₀}].
    pub bridge_higher_upper: f64,
    /// min R^{3ε₀}(w'' + w'/r − |r^{-1/2} w''| − |r^{-3/2} w'|) on [R₀, R^{ε₀}].
    pub bridge_second_derivative_margin: f64,
    /// min s dv_s/dx on [1/2, 1], and the subinterval of x where dv_s/dx < 0.
    pub vs_slope_lower: f64,
    pub vs_decreasing_on: Option<(f64, f64)>,
}

/// The weights of the Carleman multiplier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightProfile {
    pub setting: RadialSetting,
    pub params: CarlemanParams,
    pub w: ExpWeight,
    pub pieces: Vec<Piece>,
    pub constants: DerivedConstants,
    pub r0: f64,
    /// Radii between which h passes from (r^{-1} − r^{-3/2}) f' to ½ f''.
    pub h_transition: (f64, f64),
    pub seams: Vec<SeamResidual>,
    pub bounds: Option<DerivativeBounds>,
}

/// One sample of the profile. Values of w̄, w only make sense up to R₀; v_s on [R/2, R].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightSample {
    pub r: f64,
    pub w_bar: Option<[f64; 5]>,
    pub w: Option<[f64; 5]>,
    pub w_r: Option<[f64; 5]>,
    pub v_s: Option<[f64; 5]>,
    /// log f and its derivatives.
    pub log_f: [f64; 5],
    /// h / f(r) with two derivatives.
    pub h_over_f: [f64; 3],
}

const GL_DEGREE: usize = 48;

fn gl() -> GaussLegendre {
    GaussLegendre::new(GL_DEGREE.try_into().expect("nonzero degree"))
}

impl WeightProfile {
    fn r_eps(&self) -> f64 {
        self.params.big_r.powf(self.params.eps0)
    }

    /// Closed-form jet of a shape, value included.
    pub fn shape_jet(&self, shape: Shape, r: f64) -> Jet {
        let p = &self.params;
        let (big_r, e, s) = (p.big_r, p.eps0, p.s);
        let x = Jet::variable(r) * (1.0 / big_r);
        let c1 = self.constants.c1;
        match shape {
            Shape::Inner => self.w.jet(r) * big_r.powf(-3.0 * e),
            Shape::Rising => Jet::variable(r).powf(2.0 + e) * (c1 * big_r.powf(-3.0 * e) / (2.0 + e)),
            Shape::Power => x.powf(e) * (c1 / e),
            Shape::Sextic => {
                let y = (Jet::variable(r) + (-0.6 * big_r)) * (1.0 / big_r);
                let y2 = y * y;
                y2 * y2 * y2 * (-p.delta1) + self.shape_jet(Shape::Quadratic, r)
            }
            Shape::Quadratic => {
                let y = x + (-1.0);
                (y * y + 10.0) * (-0.5 / s)
            }
            Shape::LogProfile => (x - x.ln() * 0.9).ln() * (0.5 / s),
        }
    }

    fn blend_slope(&self, piece: &Piece, r: f64) -> Jet {
        let PieceKind::Blend { from, to, kappa, .. } = piece.kind else { unreachable!() };
        let width = piece.hi - piece.lo;
        let u = (Jet::variable(r) + (-piece.lo)) * (1.0 / width);
        let chi = u.through(smoothstep);
        let bump = u.through(|x, k| smoothstep(x, k + 1)) * (kappa / width);
        let a = self.shape_jet(from, r).derivative();
        let b = self.shape_jet(to, r).derivative();
        (Jet::constant(1.0) - chi) * a + chi * b + bump
    }

    fn blend_integral(&self, piece: &Piece, r: f64) -> f64 {
        if r <= piece.lo {
            return 0.0;
        }
        gl().integrate(piece.lo, r, |x| self.blend_slope(piece, x).value())
    }

    /// Jet of w_R on a given piece; the value is computed only if `with_value`.
    pub fn piece_jet(&self, idx: usize, r: f64, with_value: bool) -> Jet {
        let piece = &self.pieces[idx];
        match piece.kind {
            PieceKind::Closed { shape, offset } => self.shape_jet(shape, r) + offset,
            PieceKind::Blend { anchor, .. } => {
                let p = self.blend_slope(piece, r).0;
                let v = if with_value { anchor + self.blend_integral(piece, r) } else { f64::NAN };
                Jet([v, p[0], p[1], p[2], p[3]])
            }
        }
    }

    fn piece_index(&self, r: f64) -> usize {
        self.pieces.iter().position(|p| r <= p.hi).unwrap_or(self.pieces.len() - 1)
    }

    /// Jet of w_R for r ≤ R.
    pub fn w_r_jet(&self, r: f64, with_value: bool) -> Jet {
        self.piece_jet(self.piece_index(r), r, with_value)
    }

    fn far_log_f(&self, r: f64) -> Jet {
        let x = Jet::variable(r) * (1.0 / self.params.big_r);
        (x - x.ln() * 0.9).ln() + 2.0 * self.params.s * self.constants.c3
    }

    /// Jet of log f. For r ≤ R the derivatives come from w_R; the value is only filled in
    /// when requested.
    pub fn log_f_jet(&self, r: f64, with_value: bool) -> Jet {
        if r >= self.params.big_r {
            self.far_log_f(r)
        } else {
            self.w_r_jet(r, with_value) * (2.0 * self.params.s)
        }
    }

    /// f / f(r) around r, i.e. exp(log f − log f(r)).
    pub fn f_hat(&self, r: f64) -> Jet {
        self.log_f_jet(r, false).with_value(0.0).exp()
    }

    /// v_s(x) at x = r/R for r ∈ [R/2, R], as a jet in r.
    pub fn v_s_jet(&self, r: f64) -> Option<Jet> {
        let big_r = self.params.big_r;
        (r >= 0.5 * big_r && r <= big_r).then(|| self.w_r_jet(r, true) + (-self.constants.c3))
    }

    /// θ_{≥R₀} = θ₄(r/R₀).
    pub fn theta_ge_r0(&self, r: f64) -> Jet {
        (Jet::variable(r) * (1.0 / self.params.big_r0)).through(theta4)
    }

    /// θ_{≤R} = θ₄(R/r).
    pub fn theta_le_r(&self, r: f64) -> Jet {
        (Jet::variable(r).recip() * self.params.big_r).through(theta4)
    }

    /// θ_{≤R₀/2} = θ₄(R₀/(2r)).
    pub fn theta_le_half_r0(&self, r: f64) -> Jet {
        (Jet::variable(r).recip() * (0.5 * self.params.big_r0)).through(theta4)
    }

    /// (r^{-1} − r^{-3/2}) f'.
    fn h_outer(&self, r: f64, f: Jet) -> Jet {
        let x = Jet::variable(r);
        (x.recip() - x.powf(-1.5)) * f.derivative()
    }

    /// h / f(r) around r, valid to second order.
    pub fn h_over_f(&self, r: f64) -> Jet {
        let f = self.f_hat(r);
        let big_r = self.params.big_r;
        let far = f.derivative().derivative() * 0.5;
        if r >= self.h_transition.1 {
            return far;
        }
        let near = if r <= 4.0 * big_r / 3.0 {
            let mut h = self.theta_ge_r0(r) * self.h_outer(r, f);
            let th = self.theta_le_half_r0(r);
            if th.0.iter().any(|&v| v != 0.0) {
                let w2 = self.w_r_jet(r, false).derivative().derivative();
                h = h - th * w2 * f * (self.params.s * self.params.delta1);
            }
            h
        } else {
            self.h_outer(r, f)
        };
        if r <= self.h_transition.0 {
            return near;
        }
        let (a, b) = self.h_transition;
        let chi = ((Jet::variable(r) + (-a)) * (1.0 / (b - a))).through(smoothstep);
        (Jet::constant(1.0) - chi) * near + chi * far
    }

    pub fn sample(&self, r: f64) -> WeightSample {
        let p = &self.params;
        let inner = r <= p.big_r0;
        let h = self.h_over_f(r);
        WeightSample {
            r,
            w_bar: inner.then(|| self.w.base.jet(r).0),
            w: inner.then(|| self.w.jet(r).0),
            w_r: (r <= p.big_r).then(|| self.w_r_jet(r, true).0),
            v_s: self.v_s_jet(r).map(|j| j.0),
            log_f: self.log_f_jet(r, true).0,
            h_over_f: [h.d(0), h.d(1), h.d(2)],
        }
    }

    pub fn samples(&self, grid: &[f64]) -> Vec<WeightSample> {
        grid.par_iter().map(|&r| self.sample(r)).collect()
    }

    /// Smallest radius of the scanned domain.
    pub fn r_start(&self) -> f64 {
        self.setting.r_min.max(self.r0 / 8.0)
    }

    /// Grid with `n` points per region, uniform in log r except on [R/2, R].
    pub fn region_grid(&self, n: usize, r_far: f64) -> Vec<f64> {
        let p = &self.params;
        let big_r = p.big_r;
        let edges = [self.r_start(), p.big_r0, self.r_eps(), 0.5 * big_r, big_r, big_r / p.delta2, r_far];
        let mut g = Vec::new();
        for (k, w) in edges.windows(2).enumerate() {
            for i in 0..n {
                let t = i as f64 / n as f64;
                g.push(if k == 3 { w[0] + (w[1] - w[0]) * t } else { w[0] * (w[1] / w[0]).powf(t) });
            }
        }
        g.push(r_far);
        g
    }

    /// inf over {r ≥ r₀/4, r ≤ R} \ ℰ_{2δ} of w_R minus max over ℰ_δ of w_R, times R^{3ε₀}.
    pub fn separation(&self, delta: f64) -> Option<f64> {
        let c = self.setting.ergo_radius?;
        let scale = self.params.big_r.powf(3.0 * self.params.eps0);
        Some((self.w_r_jet(c + 2.0 * delta, true).value() - self.w_r_jet(c + delta, true).value()) * scale)
    }

    /// sup − inf of w_R over r ≤ R, in units of ε₀⁻¹ R^{3ε₀}.
    pub fn oscillation_ratio(&self) -> f64 {
        let p = &self.params;
        let lo = self.w_r_jet(self.r_start(), true).value();
        let hi = self.w_r_jet(p.big_r, true).value();
        (hi - lo) * p.eps0 * p.big_r.powf(-3.0 * p.eps0)
    }

    /// Jumps of r^k ∂^k, relative to the largest scaled derivative on either side.
    fn seam(&self, label: &str, r: f64, left: Jet, right: Jet) -> SeamResidual {
        let scaled = |j: &Jet, k: usize| j.d(k) * r.powi(k as i32);
        let scale = (1..5).map(|k| scaled(&left, k).abs().max(scaled(&right, k).abs())).fold(0.0, f64::max);
        let residual = (0..5)
            .map(|k| {
                let s = if k == 0 { scale.max(left.value().abs()) } else { scale };
                if s == 0.0 {
                    0.0
                } else {
                    (scaled(&left, k) - scaled(&right, k)).abs() / s
                }
            })
            .fold(0.0, f64::max);
        SeamResidual { label: label.to_string(), r, residual }
    }

    fn compute_seams(&self) -> Vec<SeamResidual> {
        let p = &self.params;
        let mut out = Vec::new();
        let r_quarter = self.r0 / 4.0;
        if r_quarter >= self.setting.r_min {
            let j = self.w_r_jet(r_quarter, true);
            out.push(self.seam("r0/4", r_quarter, j, j));
        }
        for i in 0..self.pieces.len() - 1 {
            let r = self.pieces[i].hi;
            let label = match i {
                0 => "R0".to_string(),
                3 => "R^eps0".to_string(),
                4 => "R/2".to_string(),
                _ => format!("x = {:.4}", r / p.big_r),
            };
            out.push(self.seam(&label, r, self.piece_jet(i, r, true), self.piece_jet(i + 1, r, true)));
        }
        let left = self.piece_jet(self.pieces.len() - 1, p.big_r, true) * (2.0 * p.s);
        out.push(self.seam("R", p.big_r, left, self.far_log_f(p.big_r)));
        for (label, r) in [("4R/3", 4.0 * p.big_r / 3.0), ("h transition start", self.h_transition.0), ("h transition end", self.h_transition.1), ("R/delta2", p.big_r / p.delta2)] {
            let eps = 1e-12 * r;
            let (a, b) = (self.h_over_f(r - eps), self.h_over_f(r + eps));
            let rel = (0..3).map(|k| (a.d(k) - b.d(k)).abs() / a.d(k).abs().max(b.d(k).abs()).max(1e-300)).fold(0.0, f64::max);
            out.push(SeamResidual { label: format!("h at {label}"), r, residual: rel });
        }
        out
    }

    fn compute_bounds(&self) -> DerivativeBounds {
        let p = &self.params;
        let scale = p.big_r.powf(3.0 * p.eps0);
        let (lo, hi) = (p.big_r0, self.r_eps());
        let n = 4000;
        let bridge: Vec<(f64, Jet)> = (0..=n)
            .into_par_iter()
            .map(|i| {
                let r = lo * (hi / lo).powf(i as f64 / n as f64);
                (r, self.w_r_jet(r, false))
            })
            .collect();
        let mut b = DerivativeBounds {
            bridge_slope_lower: f64::INFINITY,
            bridge_slope_upper: 0.0,
            bridge_higher_upper: 0.0,
            bridge_second_derivative_margin: f64::INFINITY,
            vs_slope_lower: f64::INFINITY,
            vs_decreasing_on: None,
        };
        for (r, j) in &bridge {
            let (w1, w2) = (j.d(1), j.d(2));
            b.bridge_slope_lower = b.bridge_slope_lower.min(w1 * scale);
            b.bridge_slope_upper = b.bridge_slope_upper.max(w1);
            b.bridge_higher_upper = b.bridge_higher_upper.max(w2.abs()).max(j.d(3).abs()).max(j.d(4).abs());
            let m = w2 + w1 / r - (r.powf(-0.5) * w2).abs() - (r.powf(-1.5) * w1).abs();
            b.bridge_second_derivative_margin = b.bridge_second_derivative_margin.min(m * scale);
        }
        let mut dec: Option<(f64, f64)> = None;
        for i in 0..=n {
            let x = 0.5 + 0.5 * i as f64 / n as f64;
            let dv = self.w_r_jet(x * p.big_r, false).d(1) * p.big_r;
            b.vs_slope_lower = b.vs_slope_lower.min(p.s * dv);
            if dv < 0.0 {
                dec = Some(dec.map_or((x, x), |(a, _)| (a, x)));
            }
        }
        b.vs_decreasing_on = dec;
        b
    }
}

/// Assembles w_R on r ≤ R from w and the parameters.
pub fn build_wr(model: &SpacetimeModel, params: &CarlemanParams, w: ExpWeight) -> Result<WeightProfile> {
    params.validate_ranges()?;
    let setting = RadialSetting::from_model(model)?;
    let (big_r, big_r0, e) = (params.big_r, params.big_r0, params.eps0);
    let r_eps = big_r.powf(e);
    if 11.0 * big_r / 20.0 <= r_eps {
        return Err(LabError::Parameter(format!("R^eps0 = {r_eps:.3e} must lie below 11R/20")));
    }
    let rise_end = 1.5 * big_r0;
    let fall_start = r_eps - 1.0;
    if fall_start <= rise_end {
        return Err(LabError::Parameter(format!(
            "bridge [R0, R^eps0] too short: R^eps0 - 1 = {fall_start:.3e} <= 1.5 R0"
        )));
    }
    // C₁ makes the rising slope dominate R^{-3ε₀} w' on the first blend: independent of R.
    let c1 = 2.0
        * (0..=400)
            .map(|i| {
                let r = big_r0 + (rise_end - big_r0) * i as f64 / 400.0;
                w.jet(r).d(1) / r.powf(1.0 + e)
            })
            .fold(0.0, f64::max);
    let mut prof = WeightProfile {
        setting,
        params: params.clone(),
        w,
        pieces: Vec::new(),
        constants: DerivedConstants { c1, c2: 0.0, c3: 0.0, log_c4: 0.0 },
        r0: params.r0_for(model),
        h_transition: (1.4 * big_r, 1.75 * big_r),
        seams: Vec::new(),
        bounds: None,
    };
    if big_r / params.delta2 < prof.h_transition.1 {
        return Err(LabError::Parameter(format!(
            "h bracketing infeasible: R/delta2 = {:.3e} lies inside the transition ending at 1.75R",
            big_r / params.delta2
        )));
    }
    let closed = |shape, offset| PieceKind::Closed { shape, offset };
    let blend = |from, to, anchor| PieceKind::Blend { from, to, anchor, kappa: 0.0 };
    let push = |prof: &mut WeightProfile, lo: f64, hi: f64, kind: PieceKind| {
        prof.pieces.push(Piece { lo, hi, kind });
        let i = prof.pieces.len() - 1;
        prof.piece_jet(i, hi, true).value()
    };
    let xr = |x: f64| x * big_r;

    let end0 = push(&mut prof, 0.0, big_r0, closed(Shape::Inner, 0.0));
    let end1 = push(&mut prof, big_r0, rise_end, blend(Shape::Inner, Shape::Rising, end0));
    let off2 = end1 - prof.shape_jet(Shape::Rising, rise_end).value();
    let end2 = push(&mut prof, rise_end, fall_start, closed(Shape::Rising, off2));
    let end3 = push(&mut prof, fall_start, r_eps, blend(Shape::Rising, Shape::Power, end2));
    let c2 = end3 - prof.shape_jet(Shape::Power, r_eps).value();
    prof.constants.c2 = c2;
    push(&mut prof, r_eps, xr(0.5), closed(Shape::Power, c2));
    let end5 = push(&mut prof, xr(0.5), xr(0.55), closed(Shape::Power, c2));
    // The sextic piece sits at C₃ + O(1/s); C₃ is fixed by continuity at x = 23/40.
    let b6 = Piece { lo: xr(0.55), hi: xr(0.575), kind: blend(Shape::Power, Shape::Sextic, end5) };
    let rise6 = {
        prof.pieces.push(b6);
        let i = prof.pieces.len() - 1;
        let v = prof.blend_integral(&prof.pieces[i], b6.hi);
        prof.pieces.pop();
        v
    };
    let c3 = end5 + rise6 - prof.shape_jet(Shape::Sextic, xr(0.575)).value();
    prof.constants.c3 = c3;
    prof.constants.log_c4 = c3;
    push(&mut prof, xr(0.55), xr(0.575), blend(Shape::Power, Shape::Sextic, end5));
    push(&mut prof, xr(0.575), xr(0.6), closed(Shape::Sextic, c3));
    push(&mut prof, xr(0.6), xr(0.7), closed(Shape::Quadratic, c3));
    // Value gap between the quadratic and the log profile, closed by a smooth bump in the slope.
    let mut b9 = Piece { lo: xr(0.7), hi: xr(0.75), kind: blend(Shape::Quadratic, Shape::LogProfile, 0.0) };
    prof.pieces.push(b9);
    let i9 = prof.pieces.len() - 1;
    let drift = prof.blend_integral(&prof.pieces[i9], b9.hi);
    prof.pieces.pop();
    let q0 = prof.shape_jet(Shape::Quadratic, xr(0.7)).value();
    let l1 = prof.shape_jet(Shape::LogProfile, xr(0.75)).value();
    b9.kind = PieceKind::Blend { from: Shape::Quadratic, to: Shape::LogProfile, anchor: q0 + c3, kappa: l1 - q0 - drift };
    prof.pieces.push(b9);
    push(&mut prof, xr(0.75), big_r, closed(Shape::LogProfile, c3));

    prof.seams = prof.compute_seams();
    let bounds = prof.compute_bounds();
    if !(bounds.bridge_slope_lower > 0.0) {
        return Err(LabError::Parameter(format!(
            "bridge slope lower bound violated: min R^(3 eps0) w_R' = {:.3e}",
            bounds.bridge_slope_lower
        )));
    }
    if !(bounds.bridge_second_derivative_margin > 0.0) {
        return Err(LabError::Parameter(format!(
            "bridge second-derivative bound violated: margin {:.3e}",
            bounds.bridge_second_derivative_margin
        )));
    }
    prof.bounds = Some(bounds);
    Ok(prof)
}

/// Report of the f, h checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FhReport {
    /// Relative jumps of log f and (log f)' at r = R.
    pub f_jump_at_r: f64,
    pub df_jump_at_r: f64,
    /// min over (4R/3, R/δ₂) of r² h / f(R).
    pub h_lower: f64,
    /// max over (4R/3, R/δ₂) of h / min{(r^{-1} − r^{-3/2}) f', (1 − r^{-1/2}) f''}.
    pub h_upper_ratio: f64,
    /// max over (4R/3, R/δ₂) of −R⁴ □h / f(R).
    pub box_h_upper: f64,
    /// max over r ≥ R/δ₂ of |h − ½ f''| / f''.
    pub far_h_deviation: f64,
}

/// Finishes the profile with f and h and checks the bracketing of h.
pub fn build_f_h(profile: WeightProfile) -> Result<(WeightProfile, FhReport)> {
    let p = &profile.params;
    let big_r = p.big_r;
    let left = profile.piece_jet(profile.pieces.len() - 1, big_r, true) * (2.0 * p.s);
    let right = profile.far_log_f(big_r);
    let f_jump = (left.value() - right.value()).abs() / right.value().abs().max(1.0);
    let df_jump = (left.d(1) - right.d(1)).abs() / right.d(1).abs();
    let (a, b) = (4.0 * big_r / 3.0, big_r / p.delta2);
    let n = 4000;
    let rows: Vec<(f64, f64, f64)> = (1..n)
        .into_par_iter()
        .map(|i| {
            let r = a * (b / a).powf(i as f64 / n as f64);
            let f = profile.f_hat(r);
            // f(r)/f(R) = φ(r/R) for r ≥ R.
            let x = r / big_r;
            let phi = x - 0.9 * x.ln();
            let h = profile.h_over_f(r);
            let f1 = f.d(1);
            let f2 = f.d(2);
            let upper = ((1.0 / r - r.powf(-1.5)) * f1).min((1.0 - r.powf(-0.5)) * f2);
            let box_h = h.d(2) + h.d(1) / r;
            (r * r * h.value() * phi, h.value() / upper, -box_h * phi * big_r.powi(4))
        })
        .collect();
    let far_dev = (0..=200)
        .map(|i| {
            let r = b * 100f64.powf(i as f64 / 200.0);
            let h = profile.h_over_f(r);
            let f2 = profile.f_hat(r).d(2);
            (h.value() - 0.5 * f2).abs() / f2
        })
        .fold(0.0, f64::max);
    let report = FhReport {
        f_jump_at_r: f_jump,
        df_jump_at_r: df_jump,
        h_lower: rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        h_upper_ratio: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        box_h_upper: rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max),
        far_h_deviation: far_dev,
    };
    if !(report.h_lower > 0.0 && report.h_upper_ratio <= 1.0) {
        return Err(LabError::Parameter(format!(
            "h bracketing infeasible: min r^2 h/f(R) = {:.3e}, max h/upper = {:.4}",
            report.h_lower, report.h_upper_ratio
        )));
    }
    Ok((profile, report))
}

/// Runs the whole construction: w̄, w, w_R, f and h.
pub fn build_profile(model: &SpacetimeModel, params: &CarlemanParams) -> Result<(WeightProfile, FhReport)> {
    let base = solve_base_weight(model, params)?;
    let w = build_w(model, base, params.l, params)?;
    let wr = build_wr(model, params, w)?;
    build_f_h(wr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::params::choose_parameters;
    use approx::assert_relative_eq;

    fn vortex() -> SpacetimeModel {
        SpacetimeModel::vortex(1.0, 0.3)
    }

    #[test]
    fn flat_annulus_matches_the_log_profile() {
        let params = CarlemanParams { gamma: 0.0, ..CarlemanParams::default() };
        let base = solve_base_weight(&SpacetimeModel::minkowski(2), &params).unwrap();
        let (a, b) = (base.a, base.b);
        assert_eq!((a, b), (1.0, 4.0));
        for (&r, &v) in base.grid.iter().zip(&base.values) {
            let exact = 1.0 + (r / a).ln() / (b / a).ln();
            assert!((v - exact).abs() < 1e-8, "r = {r}: {v} vs {exact}");
        }
        assert!(base.residual < 1e-10);
        assert_eq!(base.values[0], 1.0);
        assert_eq!(*base.values.last().unwrap(), 2.0);
    }

    #[test]
    fn vortex_base_weight_with_source() {
        let params = CarlemanParams::default();
        let base = solve_base_weight(&vortex(), &params).unwrap();
        println!("gamma = {}: residual {:.2e}, deviation from closed form {:.2e}", base.gamma, base.residual, base.closed_form_deviation);
        assert!(base.residual < 1e-10);
        assert!(base.closed_form_deviation < 1e-6);
        assert!(base.min_slope > 0.0);
        for d in [0.05, 0.1] {
            assert!(base.separation(1.0, d) > 0.0);
        }
        let j = base.jet(2.0);
        assert_relative_eq!(j.d(2) + j.d(1) / 2.0, base.gamma, epsilon = 1e-12);
    }

    #[test]
    fn large_source_breaks_the_maximum_principle_certificate() {
        let params = CarlemanParams { gamma: 1.0, ..CarlemanParams::default() };
        assert!(solve_base_weight(&vortex(), &params).is_err());
        assert!(matches!(
            solve_base_weight(&SpacetimeModel::bump3d(), &CarlemanParams::default()),
            Err(LabError::Unsupported(_))
        ));
    }

    #[test]
    fn hessian_certificate_grows_with_l() {
        let params = CarlemanParams::default();
        let ls = [2.0, 4.0, 8.0];
        let mins: Vec<f64> = ls
            .iter()
            .map(|&l| build_w(&vortex(), solve_base_weight(&vortex(), &params).unwrap(), l, &params).unwrap().hessian_min)
            .collect();
        for (i, (l, m)) in ls.iter().zip(&mins).enumerate() {
            println!("l = {l}: min Hessian contraction {m:.4e}");
            if i > 0 {
                let slope = (m / mins[i - 1]).ln() / (l / ls[i - 1]).ln();
                println!("  log-log slope {slope:.2}");
                assert!(slope >= 1.8);
            }
        }
        let w = build_w(&vortex(), solve_base_weight(&vortex(), &params).unwrap(), 2.0, &params).unwrap();
        assert!(w.boundary_gradient_sq.unwrap() > 0.0);
        assert!(w.critical_set.is_empty());
        assert!(build_w(&vortex(), solve_base_weight(&vortex(), &params).unwrap(), 0.5, &params).is_err());
    }

    #[test]
    fn reference_profile_invariants() {
        let params = choose_parameters(1.0, 0.05, 0.1, 0.1).unwrap();
        let (prof, fh) = build_profile(&vortex(), &params).unwrap();
        let p = &prof.params;
        println!("R = {:.3e}, s = {:.3e}, constants {:?}", p.big_r, p.s, prof.constants);
        for s in &prof.seams {
            println!("seam {:>22} at r = {:.4e}: {:.2e}", s.label, s.r, s.residual);
            assert!(s.residual < 1e-8, "{}", s.label);
        }
        assert!(fh.f_jump_at_r < 1e-10 && fh.df_jump_at_r < 1e-10);
        println!("{fh:?}");
        let b = prof.bounds.as_ref().unwrap();
        println!("{b:?}");
        assert!(b.bridge_slope_lower > 0.0 && b.bridge_second_derivative_margin > 0.0);
        // v_s(1) = 0 and the slope of w_R at R^{ε₀}.
        assert!(prof.v_s_jet(p.big_r).unwrap().value().abs() < 1e-300 + 1e-12 / p.s);
        let r_eps = p.big_r.powf(p.eps0);
        let expected = prof.constants.c1 * p.big_r.powf(-2.0 * p.eps0 + p.eps0 * p.eps0);
        assert_relative_eq!(prof.w_r_jet(r_eps, false).d(1), expected, max_relative = 1e-10);
        // far profile
        for x in [1.5, 3.0, 20.0] {
            let r = x * p.big_r;
            let d = prof.log_f_jet(r, true);
            assert_relative_eq!(d.value(), 2.0 * p.s * prof.constants.c3 + (x - 0.9 * x.ln()).ln(), max_relative = 1e-15);
            assert_relative_eq!(d.d(1), (1.0 - 0.9 / x) / p.big_r / (x - 0.9 * x.ln()), max_relative = 1e-12);
        }
        assert!(fh.far_h_deviation < 1e-12);
        for d in [0.05, 0.1] {
            let c = prof.separation(d).unwrap();
            println!("separation c_delta({d}) = {c:.4e}");
            assert!(c > 0.0);
        }
        println!("oscillation (sup - inf) eps0 R^(-3 eps0) = {:.4e}", prof.oscillation_ratio());
        let grid = prof.region_grid(50, 100.0 * p.big_r / p.delta2);
        assert!(prof.samples(&grid).iter().all(|s| s.log_f.iter().take(4).all(|v| v.is_finite())));
    }

    #[test]
    fn short_bridge_is_rejected() {
        let params = CarlemanParams { s: 1e3, big_r: 1e20, ..CarlemanParams::default() };
        let base = solve_base_weight(&vortex(), &params).unwrap();
        let w = build_w(&vortex(), base, params.l, &params).unwrap();
        assert!(matches!(build_wr(&vortex(), &params, w), Err(LabError::Parameter(_))));
    }
}
