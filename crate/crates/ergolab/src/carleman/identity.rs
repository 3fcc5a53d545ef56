//! Numerical checks of the multiplier identity and of the frequency-localised Carleman
//! inequality on radial models.
//!
//! For a mode φ = u(t, r) e^{imφ} the identity reduces to integrals over (t, r) with
//! dg = 2π r dt dr. G = □φ is taken from central differences of u, so the identity residual
//! decays like the square of the step.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bulk::{bulk_direct, MultiplierWeights};
use super::jet::Jet;
use super::params::CarlemanParams;
use super::weights::{build_profile, RadialSetting, WeightProfile};
use crate::energy::{flux_density, FieldSnapshot, VectorField};
use crate::error::{LabError, Result};
use crate::frequency::TimeSeriesField;
use crate::geometry::{theta4, SpacetimeModel};

/// Closed-form multiplier data with both cut-offs in a bounded range, for exercising every
/// term of the identity: log f = a r + b log r, h = c f / (1 + r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticWeight {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub big_r: f64,
    pub big_r0: f64,
}

impl MultiplierWeights for AnalyticWeight {
    fn f_hat(&self, r: f64) -> Jet {
        let x = Jet::variable(r);
        (x * self.a + x.ln() * self.b).with_value(0.0).exp()
    }
    fn h_over_f(&self, r: f64) -> Jet {
        self.f_hat(r) * (Jet::variable(r) + 1.0).recip() * self.c
    }
    fn log_f(&self, r: f64) -> f64 {
        self.a * r + self.b * r.ln()
    }
    fn theta_le_r(&self, r: f64) -> Jet {
        (Jet::variable(r).recip() * self.big_r).through(theta4)
    }
    fn theta_ge_r0(&self, r: f64) -> Jet {
        (Jet::variable(r) * (1.0 / self.big_r0)).through(theta4)
    }
}

/// u = A exp(−((r − r_c − v t)/σ)²) e^{−iωt}, on the azimuthal mode m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPulse {
    pub amplitude: f64,
    pub r_c: f64,
    pub sigma: f64,
    pub v: f64,
    pub omega: f64,
    pub m: i64,
}

impl GaussianPulse {
    /// (u, u_t, u_r).
    pub fn eval(&self, t: f64, r: f64) -> (C, C, C) {
        let xi = (r - self.r_c - self.v * t) / self.sigma;
        let u = C::from_polar(self.amplitude * (-xi * xi).exp(), -self.omega * t);
        let ut = u * C::new(2.0 * xi * self.v / self.sigma, -self.omega);
        let ur = u * (-2.0 * xi / self.sigma);
        (u, ut, ur)
    }

    /// Radial interval holding the pulse to e^{-36} over [τ₁, τ₂].
    pub fn support(&self, tau: (f64, f64)) -> (f64, f64) {
        let (a, b) = (self.v * tau.0, self.v * tau.1);
        (self.r_c + a.min(b) - 6.0 * self.sigma, self.r_c + a.max(b) + 6.0 * self.sigma)
    }
}

/// The integrated terms of the identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityTerms {
    pub step: f64,
    /// Bulk integrals on the left: Hessian of f^{1/2}φ, the r⁻¹ corrections, the Hessian
    /// outside R, the h term and the 𝒜 term.
    pub lhs_terms: [f64; 5],
    pub lhs: f64,
    /// −∫ Re{G(2∇f·∇φ̄ + (□f − 2h)φ̄)}.
    pub source: f64,
    /// The boundary integrals at τ₁ and τ₂, with their signs.
    pub boundary: [f64; 2],
    pub residual: f64,
}

struct RadialData {
    r: f64,
    f: f64,
    f1: f64,
    f2: f64,
    box_f: f64,
    h: f64,
    theta: f64,
    theta2: f64,
    bulk: f64,
    ginv: [[f64; 2]; 2],
    hess: [f64; 3],
}

fn radial_data(setting: &RadialSetting, weights: &impl MultiplierWeights, r: f64, log_ref: f64) -> RadialData {
    let f = (weights.log_f(r) - log_ref).exp();
    let fh = weights.f_hat(r);
    let (f1, f2) = (fh.d(1) * f, fh.d(2) * f);
    let th = weights.theta_le_r(r).value();
    let (ginv, dg) = setting.tphi_block(r);
    RadialData {
        r,
        f,
        f1,
        f2,
        box_f: f2 + f1 / r,
        h: weights.h_over_f(r).value() * f,
        theta: th,
        theta2: th * weights.theta_ge_r0(r).value(),
        bulk: bulk_direct(weights, r) * f,
        ginv,
        // H_tt, H_rr, H_φφ; the mixed components vanish.
        hess: [0.5 * dg[0][0] * f1, f2, 0.5 * dg[1][1] * f1],
    }
}

/// H^{μν} c_μ c̄_ν for lower components c = (c_t, c_r, c_φ).
fn hessian_form(d: &RadialData, c: [C; 3]) -> f64 {
    let g = d.ginv;
    let up_t = c[0] * g[0][0] + c[2] * g[0][1];
    let up_p = c[0] * g[1][0] + c[2] * g[1][1];
    d.hess[0] * up_t.norm_sqr() + d.hess[1] * c[1].norm_sqr() + d.hess[2] * up_p.norm_sqr()
}

/// g^{μν} a_μ ā_ν.
fn metric_form(d: &RadialData, a: [C; 3]) -> f64 {
    let g = d.ginv;
    g[0][0] * a[0].norm_sqr() + 2.0 * g[0][1] * (a[0] * a[2].conj()).re + g[1][1] * a[2].norm_sqr() + a[1].norm_sqr()
}

fn trapezoid(n: usize, i: usize) -> f64 {
    if i == 0 || i == n {
        0.5
    } else {
        1.0
    }
}

/// Evaluates both sides of the multiplier identity for the pulse on [τ₁, τ₂] with step `h`
/// and returns the terms and |LHS − RHS| over the largest term.
pub fn multiplier_identity_residual(
    model: &SpacetimeModel,
    weights: &impl MultiplierWeights,
    pulse: &GaussianPulse,
    tau: (f64, f64),
    h: f64,
) -> Result<IdentityTerms> {
    let setting = RadialSetting::from_model(model)?;
    let (lo, hi) = pulse.support(tau);
    if lo - 2.0 * h <= setting.r_min {
        return Err(LabError::Domain(format!(
            "pulse support [{lo:.4}, {hi:.4}] touches the boundary r = {}",
            setting.r_min
        )));
    }
    if !(tau.1 > tau.0 && h > 0.0) {
        return Err(LabError::Domain("need tau1 < tau2 and a positive step".into()));
    }
    let nr = ((hi - lo) / h).ceil() as usize;
    let nt = ((tau.1 - tau.0) / h).ceil() as usize;
    let (hr, ht) = ((hi - lo) / nr as f64, (tau.1 - tau.0) / nt as f64);
    let log_ref = weights.log_f(0.5 * (lo + hi));
    let data: Vec<RadialData> =
        (0..=nr).into_par_iter().map(|j| radial_data(&setting, weights, lo + hr * j as f64, log_ref)).collect();
    let m = pulse.m as f64;
    let im = C::new(0.0, m);
    let cc = setting.circulation;
    let box_phi = |t: f64, d: &RadialData| {
        let r = d.r;
        let u = |t: f64, r: f64| pulse.eval(t, r).0;
        let u0 = u(t, r);
        let utt = (u(t + ht, r) - u0 * 2.0 + u(t - ht, r)) / (ht * ht);
        let ut = (u(t + ht, r) - u(t - ht, r)) / (2.0 * ht);
        let urr = (u(t, r + hr) - u0 * 2.0 + u(t, r - hr)) / (hr * hr);
        let ur = (u(t, r + hr) - u(t, r - hr)) / (2.0 * hr);
        let g = d.ginv;
        utt * g[0][0] + ut * im * (2.0 * g[0][1]) - u0 * (m * m * g[1][1]) + urr + ur / r
    };
    let rows: Vec<([f64; 5], f64)> = (0..=nt)
        .into_par_iter()
        .map(|i| {
            let t = tau.0 + ht * i as f64;
            let wt = trapezoid(nt, i) * ht;
            let mut terms = [0.0; 5];
            let mut source = 0.0;
            for (j, d) in data.iter().enumerate() {
                let w = wt * trapezoid(nr, j) * hr * 2.0 * PI * d.r;
                let (u, ut, ur) = pulse.eval(t, d.r);
                let a = [ut, ur, im * u];
                let c = [ut, ur + u * (0.5 * d.f1 / d.f), im * u];
                terms[0] += w * 2.0 * d.theta * hessian_form(d, c);
                terms[1] += w * 2.0 * d.theta2 * d.f1 / d.r * (ur.norm_sqr() - c[1].norm_sqr());
                terms[2] += w * 2.0 * (1.0 - d.theta) * hessian_form(d, a);
                terms[3] += w * (-2.0 * d.h * metric_form(d, a));
                terms[4] += w * d.bulk * u.norm_sqr();
                let g = box_phi(t, d);
                source -= w * (g * (ur.conj() * (2.0 * d.f1) + u.conj() * (d.box_f - 2.0 * d.h))).re;
            }
            (terms, source)
        })
        .collect();
    let mut lhs_terms = [0.0; 5];
    let mut source = 0.0;
    for (t, s) in &rows {
        for k in 0..5 {
            lhs_terms[k] += t[k];
        }
        source += s;
    }
    let mut boundary = [0.0; 2];
    for (k, (&t, sign)) in [tau.0, tau.1].iter().zip([-1.0, 1.0]).enumerate() {
        let mut acc = 0.0;
        for (j, d) in data.iter().enumerate() {
            let (u, ut, ur) = pulse.eval(t, d.r);
            let na = ut + im * u * (cc / (d.r * d.r));
            let v = ur.conj() * na * (2.0 * d.f1) + u * na.conj() * (d.box_f - 2.0 * d.h);
            acc += trapezoid(nr, j) * hr * 2.0 * PI * d.r * v.re;
        }
        boundary[k] = sign * acc;
    }
    let lhs: f64 = lhs_terms.iter().sum();
    let rhs = source - boundary[0] - boundary[1];
    let scale = lhs_terms.iter().chain([source, boundary[0], boundary[1]].iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let residual = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
    Ok(IdentityTerms { step: h, lhs_terms, lhs, source, boundary, residual })
}

/// Residuals at h, h/2, h/4, … and the observed orders between consecutive levels.
pub fn identity_convergence(
    model: &SpacetimeModel,
    weights: &impl MultiplierWeights,
    pulse: &GaussianPulse,
    tau: (f64, f64),
    h0: f64,
    levels: usize,
) -> Result<(Vec<IdentityTerms>, Vec<f64>)> {
    let runs = (0..levels)
        .map(|k| multiplier_identity_residual(model, weights, pulse, tau, h0 / 2f64.powi(k as i32)))
        .collect::<Result<Vec<_>>>()?;
    let orders = runs.windows(2).map(|w| (w[0].residual / w[1].residual).log2()).collect();
    Ok((runs, orders))
}

/// The profile of `params` rebuilt with s chosen so that log f changes by `spread` across the
/// pulse support. The reference s makes f vary far beyond floating range on any resolvable
/// grid, while the identity holds for every s.
pub fn profile_for_pulse(
    model: &SpacetimeModel,
    params: &CarlemanParams,
    pulse: &GaussianPulse,
    tau: (f64, f64),
    spread: f64,
) -> Result<WeightProfile> {
    let (lo, hi) = pulse.support(tau);
    let unit = CarlemanParams { s: 1.0, ..params.clone() };
    let (prof, _) = build_profile(model, &unit)?;
    let change = (prof.log_f_jet(hi, true).value() - prof.log_f_jet(lo, true).value()).abs();
    if !(change > 0.0) {
        return Err(LabError::Numerical { t: 0.0, msg: "log f is flat across the pulse".into() });
    }
    let rescaled = CarlemanParams { s: spread / change, ..params.clone() };
    Ok(build_profile(model, &rescaled)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallCondition {
    Dirichlet,
    Neumann,
}

/// Density of the extra boundary integral on the inner wall of the vortex, with the normal
/// pointing into the fluid, for mode data (u, u_t, u_r) on the wall.
pub fn wall_boundary_density(
    model: &SpacetimeModel,
    weights: &impl MultiplierWeights,
    m: i64,
    u: C,
    ut: C,
    ur: C,
) -> Result<f64> {
    let setting = RadialSetting::from_model(model)?;
    if setting.r_min <= 0.0 {
        return Err(LabError::Unsupported("the model has no timelike boundary".into()));
    }
    let r = setting.r_min;
    let d = radial_data(&setting, weights, r, weights.log_f(r));
    let a = [ut, ur, C::new(0.0, m as f64) * u];
    let fh = weights.f_hat(r);
    let hj = weights.h_over_f(r);
    // (□f)' and h' relative to f(r).
    let dbox = fh.d(3) + fh.d(2) / r - fh.d(1) / (r * r);
    let zeroth = d.f1 * d.f2 + hj.d(1) - 0.5 * dbox;
    let v = ur.conj() * ur * (2.0 * d.f1) + u * ur.conj() * (d.box_f - 2.0 * d.h);
    Ok(v.re - d.f1 * metric_form(&d, a) + zeroth * u.norm_sqr())
}

/// Outcome of the frequency-localised Carleman inequality check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub omega_k: f64,
    pub tau: (f64, f64),
    pub r1: f64,
    /// ∫∫ (J^N·N + |ψ_k|²) over {r ≤ R₁} outside ℰ_{2δ₁}.
    pub lhs: f64,
    /// δ₂ times the same integral over ℰ_{δ₁}.
    pub ergo_term: f64,
    /// C(1 + ω_k^{-10})(log(2 + τ₂))⁴ e^{C' max{ω_k, ω_k^{-ε₀}, −log δ₂}} ℰ_log[ψ].
    pub envelope_term: f64,
    pub ratio: f64,
    pub passes: bool,
}

/// Constants of the error envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityConstants {
    pub prefactor: f64,
    pub exponent: f64,
}

impl Default for InequalityConstants {
    fn default() -> Self {
        let e = super::bulk::Envelopes::frozen();
        InequalityConstants { prefactor: e.carleman_prefactor, exponent: e.carleman_exponent }
    }
}

/// Checks the Carleman inequality for a band component ψ_k. `e_log` is ℰ_log of the
/// full solution, which the component does not determine.
#[allow(clippy::too_many_arguments)]
pub fn carleman_inequality_check(
    series_k: &TimeSeriesField,
    model: &SpacetimeModel,
    params: &CarlemanParams,
    delta1: f64,
    tau: (f64, f64),
    r1: f64,
    e_log: f64,
    constants: InequalityConstants,
) -> Result<InequalityReport> {
    let omega = params
        .omega_k
        .ok_or_else(|| LabError::Precondition("parameters carry no omega_k to check against".into()))?;
    params.check_s_bounds(omega)?;
    let setting = RadialSetting::from_model(model)?;
    let (t_lo, t_hi) = (series_k.t0, series_k.t_end());
    if !(tau.0 < tau.1 && tau.0 >= t_lo - 1e-12 && tau.1 <= t_hi + 1e-12) {
        return Err(LabError::Domain(format!("[{}, {}] not inside the series [{t_lo}, {t_hi}]", tau.0, tau.1)));
    }
    let dt_series = series_k.time_derivative.clone().unwrap_or_else(|| series_k.derivative());
    let outer_lo = setting.ergo_radius.map_or(f64::NEG_INFINITY, |c| c + 2.0 * delta1);
    let ergo_hi = setting.ergo_radius.map(|c| c + delta1);
    let r = &series_k.r;
    let masses: Vec<(f64, f64, f64)> = (0..series_k.len())
        .into_par_iter()
        .filter_map(|j| {
            let t = series_k.time(j);
            (t >= tau.0 - 1e-12 && t <= tau.1 + 1e-12).then_some(j)
        })
        .map(|j| {
            let t = series_k.time(j);
            let snap = FieldSnapshot::new(series_k.m, t, r.clone(), series_k.values[j].clone(), dt_series[j].clone())?;
            let dens = flux_density(model, &snap, VectorField::N)?;
            let mut outer = 0.0;
            let mut ergo = 0.0;
            for i in 0..r.len() - 1 {
                let mid = 0.5 * (r[i] + r[i + 1]);
                let g = |k: usize| dens[k] + snap.phi[k].norm_sqr() * r[k];
                let piece = 0.5 * (g(i) + g(i + 1)) * (r[i + 1] - r[i]) * 2.0 * PI;
                if mid > outer_lo && mid <= r1 {
                    outer += piece;
                }
                if ergo_hi.is_some_and(|e| mid <= e) {
                    ergo += piece;
                }
            }
            Ok((t, outer, ergo))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lhs = 0.0;
    let mut ergo = 0.0;
    for w in masses.windows(2) {
        let dt = w[1].0 - w[0].0;
        lhs += 0.5 * (w[0].1 + w[1].1) * dt;
        ergo += 0.5 * (w[0].2 + w[1].2) * dt;
    }
    let growth = omega.max(omega.powf(-params.eps0)).max(-params.delta2.ln());
    let envelope_term = constants.prefactor
        * (1.0 + omega.powi(-10))
        * (2.0 + tau.1).ln().powi(4)
        * (constants.exponent * growth).exp()
        * e_log;
    let ergo_term = params.delta2 * ergo;
    let rhs = ergo_term + envelope_term;
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(InequalityReport { omega_k: omega, tau, r1, lhs, ergo_term, envelope_term, ratio, passes: ratio <= 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::params::choose_parameters;
    use crate::carleman::weights::build_profile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn analytic() -> AnalyticWeight {
        AnalyticWeight { a: 0.4, b: 0.5, c: 0.3, big_r: 6.0, big_r0: 4.0 }
    }

    fn print_table(label: &str, runs: &[IdentityTerms], orders: &[f64]) {
        println!("{label}");
        println!("{:>10} {:>12} {:>12} {:>12}", "h", "lhs", "residual", "order");
        for (i, t) in runs.iter().enumerate() {
            let o = if i == 0 { String::new() } else { format!("{:.3}", orders[i - 1]) };
            println!("{:>10.5} {:>12.5e} {:>12.4e} {:>12}", t.step, t.lhs, t.residual, o);
        }
    }

    #[test]
    fn zero_field_gives_zero_residual() {
        let pulse = GaussianPulse { amplitude: 0.0, r_c: 5.0, sigma: 0.5, v: 0.0, omega: 1.0, m: 1 };
        let t = multiplier_identity_residual(&SpacetimeModel::minkowski(2), &analytic(), &pulse, (0.0, 1.0), 0.05).unwrap();
        assert_eq!(t.residual, 0.0);
    }

    #[test]
    fn flat_pulse_with_active_cutoffs_converges_at_second_order() {
        let pulse = GaussianPulse { amplitude: 1.0, r_c: 5.5, sigma: 0.6, v: 1.0, omega: 2.0, m: 1 };
        let (runs, orders) =
            identity_convergence(&SpacetimeModel::minkowski(2), &analytic(), &pulse, (0.0, 1.0), 0.04, 3).unwrap();
        print_table("Minkowski, analytic weight", &runs, &orders);
        for o in orders {
            assert!((o - 2.0).abs() < 0.3);
        }
    }

    #[test]
    fn vortex_pulse_converges_at_second_order() {
        let pulse = GaussianPulse { amplitude: 1.0, r_c: 3.0, sigma: 0.25, v: 0.5, omega: 3.0, m: 2 };
        let (runs, orders) =
            identity_convergence(&SpacetimeModel::vortex(1.0, 0.3), &analytic(), &pulse, (0.0, 1.0), 0.02, 3).unwrap();
        print_table("vortex, analytic weight", &runs, &orders);
        for o in orders {
            assert!((o - 2.0).abs() < 0.3);
        }
    }

    #[test]
    fn constructed_weights_satisfy_the_identity() {
        let params = choose_parameters(1.0, 0.05, 0.1, 0.1).unwrap();
        let cases = [
            (SpacetimeModel::minkowski(2), GaussianPulse { amplitude: 1.0, r_c: 3.0, sigma: 0.3, v: 0.5, omega: 2.0, m: 1 }),
            (SpacetimeModel::vortex(1.0, 0.3), GaussianPulse { amplitude: 1.0, r_c: 3.0, sigma: 0.25, v: 0.5, omega: 3.0, m: 2 }),
        ];
        for (model, pulse) in cases {
            let prof = profile_for_pulse(&model, &params, &pulse, (0.0, 1.0), 2.0).unwrap();
            let (runs, orders) = identity_convergence(&model, &prof, &pulse, (0.0, 1.0), 0.02, 3).unwrap();
            print_table(&format!("{:?}, constructed weight with s = {:.4e}", model.kind, prof.params.s), &runs, &orders);
            for o in orders {
                assert!((o - 2.0).abs() < 0.3);
            }
        }
    }

    #[test]
    fn support_at_the_wall_is_rejected() {
        let pulse = GaussianPulse { amplitude: 1.0, r_c: 0.6, sigma: 0.2, v: 0.0, omega: 1.0, m: 1 };
        assert!(multiplier_identity_residual(&SpacetimeModel::vortex(1.0, 0.3), &analytic(), &pulse, (0.0, 1.0), 0.05).is_err());
    }

    #[test]
    fn dirichlet_wall_term_is_nonnegative_and_neumann_is_not() {
        let model = SpacetimeModel::vortex(1.0, 0.3);
        let params = choose_parameters(1.0, 0.05, 0.1, 0.1).unwrap();
        let (prof, _) = build_profile(&model, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut c = || C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let mut neumann_min = f64::INFINITY;
        for _ in 0..200 {
            let (u, ut, ur) = (c(), c(), c());
            let m = 1 + (ut.re.abs() * 5.0) as i64;
            let zero = C::new(0.0, 0.0);
            assert!(wall_boundary_density(&model, &prof, m, zero, zero, ur).unwrap() >= 0.0);
            assert!(wall_boundary_density(&model, &analytic(), m, zero, zero, ur).unwrap() >= 0.0);
            let neu = wall_boundary_density(&model, &analytic(), m, u, ut, zero).unwrap();
            neumann_min = neumann_min.min(neu);
        }
        // Data annihilated by N = ∂_t + C r⁻² ∂_φ make the gradient term negative inside ℰ.
        for m in [5, 10, 20] {
            let u = C::new(1.0, 0.0);
            let ut = -C::new(0.0, m as f64) * u * (1.0 / 0.09);
            neumann_min = neumann_min.min(wall_boundary_density(&model, &analytic(), m, u, ut, C::new(0.0, 0.0)).unwrap());
        }
        println!("min Neumann wall density over samples: {neumann_min:.4e}");
        assert!(neumann_min < 0.0);
    }

    fn synthetic_series(r: Vec<f64>, centre: f64, width: f64, omega: f64) -> TimeSeriesField {
        let dt = 0.05;
        let n = 200;
        let values: Vec<Vec<C>> = (0..n)
            .map(|j| {
                let t = j as f64 * dt;
                r.iter()
                    .map(|&x| {
                        let y = ((x - centre) / width).powi(2);
                        if y < 1.0 {
                            C::from_polar((1.0 - y).powi(4), -omega * t)
                        } else {
                            C::new(0.0, 0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let derivative = values.iter().map(|row| row.iter().map(|v| v * C::new(0.0, -omega)).collect()).collect();
        TimeSeriesField::new(1, 0.0, dt, r, values, Some(derivative)).unwrap()
    }

    #[test]
    fn field_inside_the_ergoregion_leaves_the_left_side_empty() {
        let model = SpacetimeModel::vortex(1.0, 0.3);
        let params = choose_parameters(1.0, 0.05, 0.1, 0.1).unwrap();
        let r: Vec<f64> = (0..=400).map(|i| 0.3 + 9.7 * i as f64 / 400.0).collect();
        let series = synthetic_series(r, 0.65, 0.3, 1.0);
        let rep = carleman_inequality_check(&series, &model, &params, 0.05, (0.0, 9.0), 16.0, 1.0, InequalityConstants::default())
            .unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert!(rep.ergo_term > 0.0 && rep.passes);
        let bad = CarlemanParams { s: params.s * 1e-20, ..params.clone() };
        assert!(matches!(
            carleman_inequality_check(&series, &model, &bad, 0.05, (0.0, 9.0), 16.0, 1.0, InequalityConstants::default()),
            Err(LabError::Precondition(_))
        ));
    }
}
