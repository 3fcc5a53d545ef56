//! The zeroth-order coefficient 𝒜 of the multiplier identity and its regional bounds.
//!
//! For radial f, h on the vortex or on flat 2+1 space, with V = f''f'/f, θ = θ_{≤R} and
//! Θ = θ_{≤R} θ_{≥R₀},
//!
//! 𝒜 = □h + (θV)' + θV/r − ½θ f''f'²/f² − ½□□f − (Θ r⁻¹f'²/f)' − Θ r⁻²f'²/f + ½Θ r⁻¹f'³/f².
//!
//! For r ≤ R, where f = e^{2s w_R}, the same quantity is assembled as s³𝒜₃ + s²𝒜₂ + s𝒜₁
//! from the derivatives of w_R; no s⁴ term appears.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jet::Jet;
use super::weights::WeightProfile;

/// Radial multiplier data: f and h normalized by f at the evaluation point, and the two
/// cut-offs entering the multiplier.
pub trait MultiplierWeights: Sync {
    /// Jet of f/f(r) at r.
    fn f_hat(&self, r: f64) -> Jet;
    /// Jet of h/f(r) at r, valid to second order.
    fn h_over_f(&self, r: f64) -> Jet;
    /// log f(r), up to an additive constant.
    fn log_f(&self, r: f64) -> f64;
    fn theta_le_r(&self, r: f64) -> Jet;
    fn theta_ge_r0(&self, r: f64) -> Jet;
}

impl MultiplierWeights for WeightProfile {
    fn f_hat(&self, r: f64) -> Jet {
        WeightProfile::f_hat(self, r)
    }
    fn h_over_f(&self, r: f64) -> Jet {
        WeightProfile::h_over_f(self, r)
    }
    fn log_f(&self, r: f64) -> f64 {
        self.log_f_jet(r, true).value()
    }
    fn theta_le_r(&self, r: f64) -> Jet {
        WeightProfile::theta_le_r(self, r)
    }
    fn theta_ge_r0(&self, r: f64) -> Jet {
        WeightProfile::theta_ge_r0(self, r)
    }
}

/// 𝒜/f at r from f̂ = f/f(r) and h/f(r).
pub fn bulk_direct(weights: &impl MultiplierWeights, r: f64) -> f64 {
    let f = weights.f_hat(r);
    let h = weights.h_over_f(r);
    let inv = Jet::variable(r).recip();
    let f1 = f.derivative();
    let f2 = f1.derivative();
    let v = f2 * f1 / f;
    let th = weights.theta_le_r(r);
    let tt = th * weights.theta_ge_r0(r);
    let lap = |j: Jet| j.d(2) + j.d(1) / r;
    let q = tt * inv * f1 * f1 / f;
    let (f1v, f2v) = (f1.value(), f2.value());
    lap(h) + (th * v).d(1) + th.value() * v.value() / r - 0.5 * th.value() * f2v * f1v * f1v
        - 0.5 * lap(f2 + f1 * inv)
        - q.d(1)
        - q.value() / r
        + 0.5 * tt.value() / r * f1v.powi(3)
}

/// Coefficients [𝒜₃, 𝒜₂, 𝒜₁] of s³, s², s in 𝒜/f for r ≤ R.
pub fn bulk_split(profile: &WeightProfile, r: f64) -> [f64; 3] {
    let w = profile.w_r_jet(r, false);
    let t = profile.theta_le_half_r0(r);
    let p = profile.theta_ge_r0(r);
    let d1 = profile.params.delta1;
    let (w1, w2, w3, w4) = (w.d(1), w.d(2), w.d(3), w.d(4));
    let (t0, t1, t2) = (t.d(0), t.d(1), t.d(2));
    let (p0, p1, p2) = (p.d(0), p.d(1), p.d(2));
    let q = r.powf(-0.5);
    let (q2, q3) = (q * q, q * q * q);
    let (q4, q5, q6, q7) = (q2 * q2, q2 * q3, q3 * q3, q3 * q3 * q);
    let a3 = d1 * (-4.0 * t0 * w1 * w1 * w2) + p0 * (-8.0 * q3 + 4.0 * q2) * w1.powi(3) + 4.0 * w1 * w1 * w2;
    let a2 = d1 * (t0 * (-2.0 * q2 * w1 * w2 - 4.0 * w1 * w3 - 2.0 * w2 * w2) - 4.0 * t1 * w1 * w2)
        + p0 * ((8.0 * q5 - 4.0 * q4) * w1 * w1 + (-12.0 * q3 + 4.0 * q2) * w1 * w2)
        + p1 * (-8.0 * q3 + 4.0 * q2) * w1 * w1
        + 2.0 * q4 * w1 * w1
        - 8.0 * q2 * w1 * w2
        - 4.0 * w1 * w3
        - 2.0 * w2 * w2;
    let a1 = d1 * (t0 * (-q2 * w3 - w4) + t1 * (-q2 * w2 - 2.0 * w3) - t2 * w2)
        + p0 * ((-4.5 * q7 + 2.0 * q6) * w1 + (4.0 * q5 - 2.0 * q4) * w2 + (-2.0 * q3 + 2.0 * q2) * w3)
        + p1 * ((4.0 * q5 - 2.0 * q4) * w1 + (-4.0 * q3 + 4.0 * q2) * w2)
        + p2 * (-2.0 * q3 + 2.0 * q2) * w1
        - q6 * w1
        + q4 * w2
        - 2.0 * q2 * w3
        - w4;
    [a3, a2, a1]
}

/// 𝒜/f at r: the s-split inside r ≤ R, the direct form beyond.
pub fn bulk_over_f(profile: &WeightProfile, r: f64) -> f64 {
    let s = profile.params.s;
    if r <= profile.params.big_r {
        let [a3, a2, a1] = bulk_split(profile, r);
        s * s * s * a3 + s * s * a2 + s * a1
    } else {
        bulk_direct(profile, r)
    }
}

/// Frozen envelope constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelopes {
    /// Lower constants in the inner, bridge and intermediate regions.
    pub inner_lower: f64,
    pub bridge_lower: f64,
    pub intermediate_lower: f64,
    /// Upper constants for −𝒜 on [R/2, R] and on [R, R/δ₂].
    pub almost_r_upper: f64,
    pub away_upper: f64,
    /// Lower constant c in 𝒜/f(R) + ½R⁻¹r⁻³ ≥ c r⁻⁴ beyond R/δ₂.
    pub far_lower: f64,
    /// Prefactor and exponent constant of the error envelope in the Carleman inequality.
    pub carleman_prefactor: f64,
    pub carleman_exponent: f64,
}

impl Envelopes {
    pub fn frozen() -> Self {
        serde_json::from_str(include_str!("envelopes.json")).expect("envelope constants parse")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BulkRegion {
    /// Outside ℰ_{δ₁} up to R₀.
    Inner,
    /// [R₀, R^{ε₀}].
    Bridge,
    /// [R^{ε₀}, R/2].
    Intermediate,
    /// [R/2, R].
    AlmostR,
    /// [R, R/δ₂].
    Away,
    /// [R/δ₂, ∞).
    Far,
}

/// Measured envelope constant of one region and its margin against the frozen value.
/// Lower-bound regions report measured/frozen − 1, upper-bound regions 1 − measured/frozen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionMargin {
    pub region: BulkRegion,
    pub interval: (f64, f64),
    pub measured: f64,
    pub frozen: f64,
    pub margin: f64,
    /// Where the extremum is attained.
    pub argext: f64,
    /// Minimum of 𝒜/f over the region, for reference.
    pub min_bulk_over_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BulkSample {
    pub r: f64,
    /// 𝒜/f(r).
    pub bulk_over_f: f64,
    pub log_f: f64,
    /// [𝒜₃, 𝒜₂, 𝒜₁] for r ≤ R.
    pub split: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BulkCoefficient {
    pub samples: Vec<BulkSample>,
    pub regions: Vec<RegionMargin>,
}

impl BulkCoefficient {
    pub fn min_margin(&self) -> f64 {
        self.regions.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn region(&self, region: BulkRegion) -> Option<&RegionMargin> {
        self.regions.iter().find(|r| r.region == region)
    }
}

fn grid(lo: f64, hi: f64, n: usize, log: bool) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            if log {
                lo * (hi / lo).powf(t)
            } else {
                lo + (hi - lo) * t
            }
        })
        .collect()
}

/// Samples 𝒜 on every region with `n` points each and measures the envelope constants.
pub fn bulk_coefficient(profile: &WeightProfile, envelopes: &Envelopes, n: usize) -> BulkCoefficient {
    let p = &profile.params;
    let (s, big_r, e) = (p.s, p.big_r, p.eps0);
    let r_eps = big_r.powf(e);
    let inner_lo = profile.setting.ergo_radius.map_or(profile.r0 / 4.0, |c| c + p.delta1);
    let far_end = 100.0 * big_r / p.delta2;
    let ln_phi = |r: f64| {
        let x = r / big_r;
        (x - 0.9 * x.ln()).ln()
    };
    let s3 = s * s * s;
    // (region, lo, hi, log grid, normalized quantity, lower?)
    type Norm<'a> = Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>;
    let inner_norm = s3 * big_r.powf(-9.0 * e);
    let specs: Vec<(BulkRegion, f64, f64, bool, Norm, bool, f64)> = vec![
        (BulkRegion::Inner, inner_lo, p.big_r0, true, Box::new(move |_, a| a / inner_norm), true, envelopes.inner_lower),
        (BulkRegion::Bridge, p.big_r0, r_eps, true, Box::new(move |_, a| a / inner_norm), true, envelopes.bridge_lower),
        (
            BulkRegion::Intermediate,
            r_eps,
            0.5 * big_r,
            true,
            Box::new(move |r, a| a / (e * big_r.powf(-3.0 * e) * r.powf(-4.0 + 3.0 * e) * s3)),
            true,
            envelopes.intermediate_lower,
        ),
        (
            BulkRegion::AlmostR,
            0.5 * big_r,
            big_r,
            false,
            Box::new(move |r, a| {
                let dv = profile.w_r_jet(r, false).d(1) * big_r;
                -a * big_r.powi(4) / (dv.abs() * s3 + s * s + s)
            }),
            false,
            envelopes.almost_r_upper,
        ),
        (
            BulkRegion::Away,
            big_r,
            big_r / p.delta2,
            true,
            Box::new(move |r, a| -a * ln_phi(r).exp() * big_r.powi(4)),
            false,
            envelopes.away_upper,
        ),
        (
            BulkRegion::Far,
            big_r / p.delta2,
            far_end,
            true,
            Box::new(move |r, a| (a * ln_phi(r).exp() + 0.5 / (big_r * r.powi(3))) * r.powi(4)),
            true,
            envelopes.far_lower,
        ),
    ];
    let mut samples = Vec::new();
    let mut regions = Vec::new();
    if profile.r_start() < inner_lo {
        samples.extend(
            grid(profile.r_start(), inner_lo, n, true)[..n].par_iter().map(|&r| sample(profile, r)).collect::<Vec<_>>(),
        );
    }
    for (region, lo, hi, log, norm, lower, frozen) in specs {
        let pts = grid(lo, hi, n, log);
        let rows: Vec<(BulkSample, f64)> = pts
            .par_iter()
            .map(|&r| {
                let smp = sample(profile, r);
                (smp, norm(r, smp.bulk_over_f))
            })
            .collect();
        let pick = |a: f64, b: f64| if lower { a < b } else { a > b };
        let (mut measured, mut argext) = (rows[0].1, lo);
        for (smp, v) in &rows {
            if pick(*v, measured) {
                measured = *v;
                argext = smp.r;
            }
        }
        let margin = if lower { measured / frozen - 1.0 } else { 1.0 - measured / frozen };
        regions.push(RegionMargin {
            region,
            interval: (lo, hi),
            measured,
            frozen,
            margin,
            argext,
            min_bulk_over_f: rows.iter().map(|x| x.0.bulk_over_f).fold(f64::INFINITY, f64::min),
        });
        let take = if region == BulkRegion::Far { rows.len() } else { rows.len() - 1 };
        samples.extend(rows.into_iter().take(take).map(|x| x.0));
    }
    BulkCoefficient { samples, regions }
}

fn sample(profile: &WeightProfile, r: f64) -> BulkSample {
    let inside = r <= profile.params.big_r;
    BulkSample {
        r,
        bulk_over_f: bulk_over_f(profile, r),
        log_f: profile.log_f_jet(r, true).value(),
        split: inside.then(|| bulk_split(profile, r)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::params::{choose_parameters, CarlemanParams};
    use crate::carleman::weights::build_profile;
    use crate::geometry::SpacetimeModel;

    fn moderate(s: f64) -> WeightProfile {
        let params = CarlemanParams { s, big_r: 1e14, eps0: 0.2, ..CarlemanParams::default() };
        build_profile(&SpacetimeModel::vortex(1.0, 0.3), &params).unwrap().0
    }

    #[test]
    fn split_agrees_with_direct_assembly() {
        let prof = moderate(40.0);
        let s = prof.params.s;
        let big_r = prof.params.big_r;
        let mut worst: f64 = 0.0;
        for r in prof.region_grid(40, big_r) {
            if r >= big_r {
                continue;
            }
            let [a3, a2, a1] = bulk_split(&prof, r);
            let split = s.powi(3) * a3 + s * s * a2 + s * a1;
            let direct = bulk_direct(&prof, r);
            // Size of the individual terms, to which cancellation errors are relative.
            let w1 = prof.w_r_jet(r, false).d(1);
            let scale = (2.0 * s * w1).powi(4) + (s.powi(3) * a3).abs() + (s * s * a2).abs() + (s * a1).abs();
            let rel = (split - direct).abs() / scale;
            worst = worst.max(rel);
            assert!(rel < 1e-8, "r = {r:e}: split {split:e}, direct {direct:e}");
        }
        println!("max relative split/direct discrepancy {worst:.2e}");
    }

    #[test]
    fn no_quartic_growth_in_s() {
        // In the bridge w_R does not depend on s, so 𝒜/f is a cubic polynomial in s.
        let (a, b) = (moderate(40.0), moderate(80.0));
        for r in [20.0, 100.0, 1000.0] {
            let (x, y) = (bulk_direct(&a, r), bulk_direct(&b, r));
            println!("r = {r}: A(80)/A(40) = {:.4}", y / x);
            assert!((y / x - 8.0).abs() < 0.5);
        }
    }

    #[test]
    fn far_region_closed_form() {
        let prof = moderate(40.0);
        let big_r = prof.params.big_r;
        for x in [12.0, 50.0, 500.0] {
            let r = x * big_r;
            let phi = x - 0.9 * x.ln();
            let a = bulk_direct(&prof, r) * phi;
            let exact = 1.8 / r.powi(4) - 0.5 / (big_r * r.powi(3));
            assert!((a - exact).abs() < 1e-9 * exact.abs(), "x = {x}: {a:e} vs {exact:e}");
        }
    }

    #[test]
    fn reference_margins_are_positive() {
        let params = choose_parameters(1.0, 0.05, 0.1, 0.1).unwrap();
        let (prof, _) = build_profile(&SpacetimeModel::vortex(1.0, 0.3), &params).unwrap();
        let bulk = bulk_coefficient(&prof, &Envelopes::frozen(), 400);
        for r in &bulk.regions {
            println!(
                "{:<13} [{:.3e}, {:.3e}] measured {:>11.4e} frozen {:>11.4e} margin {:>7.4} at r = {:.4e}",
                format!("{:?}", r.region),
                r.interval.0,
                r.interval.1,
                r.measured,
                r.frozen,
                r.margin,
                r.argext
            );
        }
        assert!(bulk.min_margin() > 0.0);
        let far = bulk.region(BulkRegion::Far).unwrap();
        assert!((far.measured - 1.8).abs() < 1e-6);
        assert!(bulk.samples.windows(2).all(|w| w[0].r < w[1].r));
    }
}
