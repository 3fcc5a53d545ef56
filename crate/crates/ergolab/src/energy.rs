//! Energy-momentum tensor, vector-field currents and their fluxes through {t = const}.
//!
//! Fields are single azimuthal modes ψ = u(t, r) e^{imφ} of the 2+1 families; the pointwise
//! routines (`q_tensor`, `current_j`, `current_k`) work for any model.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{ChartPoint, MetricData, ModelKind, SpacetimeModel};

/// Q_μν = Re(∂_μψ ∂_νψ̄) − ½ g_μν g^{λκ} Re(∂_λψ ∂_κψ̄).
pub fn q_tensor(metric: &MetricData, grad: &[Complex64]) -> DMatrix<f64> {
    let n = metric.dim();
    let mut q = DMatrix::from_fn(n, n, |a, b| (grad[a] * grad[b].conj()).re);
    let mut contr = 0.0;
    for a in 0..n {
        for b in 0..n {
            contr += metric.g_inv[(a, b)] * q[(a, b)];
        }
    }
    q -= &metric.g * (0.5 * contr);
    q
}

/// Raise both indices.
pub fn raise(metric: &MetricData, t: &DMatrix<f64>) -> DMatrix<f64> {
    &metric.g_inv * t * &metric.g_inv
}

/// J^X_μ = Q_μν X^ν.
pub fn current_j(q: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    q * x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorField {
    T,
    N,
    Phi,
    /// r ∂_r.
    RadialDilation,
}

impl VectorField {
    pub fn components(&self, model: &SpacetimeModel, p: &ChartPoint) -> DVector<f64> {
        let n = model.dim();
        let mut v = DVector::zeros(n);
        match self {
            VectorField::T => v[0] = 1.0,
            VectorField::N => return model.observer_n(p),
            VectorField::Phi => v[model.phi_index()] = 1.0,
            VectorField::RadialDilation => v[1] = p.r,
        }
        v
    }

    /// ∂_k X^α.
    pub fn derivative(&self, model: &SpacetimeModel, p: &ChartPoint, k: usize) -> DVector<f64> {
        let n = model.dim();
        match self {
            VectorField::T | VectorField::Phi => DVector::zeros(n),
            VectorField::RadialDilation => {
                let mut v = DVector::zeros(n);
                if k == 1 {
                    v[1] = 1.0;
                }
                v
            }
            VectorField::N => {
                if k == 0 || k == model.phi_index() {
                    return DVector::zeros(n);
                }
                let h = 1e-4 * (1.0 + p.r.abs());
                let at = |s: f64| {
                    let mut q = *p;
                    if k == 1 {
                        q.r += s;
                    } else {
                        q.theta += s;
                    }
                    model.observer_n(&q)
                };
                (at(-2.0 * h) - at(2.0 * h) + (at(h) - at(-h)) * 8.0) / (12.0 * h)
            }
        }
    }
}

/// Deformation tensor (L_X g)_μν.
pub fn lie_derivative_metric(model: &SpacetimeModel, p: &ChartPoint, x: VectorField) -> DMatrix<f64> {
    let n = model.dim();
    let g = model.components(p);
    let xv = x.components(model, p);
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        if xv[a] != 0.0 {
            out += model.components_derivative(p, a) * xv[a];
        }
    }
    let dx: Vec<DVector<f64>> = (0..n).map(|k| x.derivative(model, p, k)).collect();
    for mu in 0..n {
        for nu in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                s += g[(a, nu)] * dx[mu][a] + g[(mu, a)] * dx[nu][a];
            }
            out[(mu, nu)] += s;
        }
    }
    out
}

/// K^X = Q_μν ∇^μ X^ν = ½ Q^{μν} (L_X g)_μν.
pub fn current_k(model: &SpacetimeModel, p: &ChartPoint, grad: &[Complex64], x: VectorField) -> Result<f64> {
    let metric = model.metric_at(p)?;
    let q_up = raise(&metric, &q_tensor(&metric, grad));
    let l = lie_derivative_metric(model, p, x);
    Ok(0.5 * q_up.component_mul(&l).sum())
}

/// One azimuthal mode on a radial grid at a fixed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub m: i64,
    pub t: f64,
    pub r: Vec<f64>,
    pub phi: Vec<Complex64>,
    pub dphi_dt: Vec<Complex64>,
    pub dphi_dr: Vec<Complex64>,
}

impl FieldSnapshot {
    /// Snapshot with ∂_r φ from finite differences (see [`gradient`]).
    pub fn new(m: i64, t: f64, r: Vec<f64>, phi: Vec<Complex64>, dphi_dt: Vec<Complex64>) -> Result<Self> {
        if r.len() != phi.len() || r.len() != dphi_dt.len() || r.len() < 3 {
            return Err(LabError::Domain("snapshot arrays must have equal length >= 3".into()));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::Domain("radial grid must be strictly increasing".into()));
        }
        let dphi_dr = gradient(&r, &phi);
        Ok(FieldSnapshot { m, t, r, phi, dphi_dt, dphi_dr })
    }

    pub fn zeros_like(&self) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); self.r.len()];
        FieldSnapshot { phi: z.clone(), dphi_dt: z.clone(), dphi_dr: z, ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Covector (∂_t, ∂_r, ∂_φ) of ψ at grid index i (the e^{imφ} factor dropped).
    pub fn grad(&self, i: usize) -> [Complex64; 3] {
        [self.dphi_dt[i], self.dphi_dr[i], Complex64::new(0.0, self.m as f64) * self.phi[i]]
    }
}

/// Derivative on a grid: fourth order in the interior of uniform grids, second order
/// otherwise and one-sided at the ends.
pub fn gradient(r: &[f64], f: &[Complex64]) -> Vec<Complex64> {
    let n = r.len();
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    for i in 1..n - 1 {
        let (h0, h1) = (r[i] - r[i - 1], r[i + 1] - r[i]);
        d[i] = (f[i + 1] * h0 * h0 - f[i - 1] * h1 * h1 + f[i] * (h1 * h1 - h0 * h0)) / (h0 * h1 * (h0 + h1));
    }
    let one_sided = |i0: usize, i1: usize, i2: usize| {
        let (h1, h2) = (r[i1] - r[i0], r[i2] - r[i0]);
        let c1 = h2 / (h1 * (h2 - h1));
        let c2 = -h1 / (h2 * (h2 - h1));
        f[i1] * c1 + f[i2] * c2 - f[i0] * (c1 + c2)
    };
    d[0] = one_sided(0, 1, 2);
    d[n - 1] = one_sided(n - 1, n - 2, n - 3);
    let h = (r[n - 1] - r[0]) / (n - 1) as f64;
    let uniform = r.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
    if uniform && n >= 5 {
        // fourth-order central stencil away from the ends
        for i in 2..n - 2 {
            d[i] = (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) / (12.0 * h);
        }
    }
    d
}

/// Radial integration region on Σ_t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "snake_case")]
pub enum Region {
    All,
    /// Points within radial distance δ of the ergoregion.
    Ergoregion { delta: f64 },
    Annulus { a: f64, b: f64 },
}

impl Region {
    /// Interval [lo, hi] in r̄, or None for an empty region.
    pub fn interval(&self, model: &SpacetimeModel) -> Option<(f64, f64)> {
        match *self {
            Region::All => Some((f64::NEG_INFINITY, f64::INFINITY)),
            Region::Annulus { a, b } => (a < b).then_some((a, b)),
            Region::Ergoregion { delta } => match model.kind {
                ModelKind::HydroVortex => Some((model.delta, model.c + delta)),
                ModelKind::HydroVortexDoubled => {
                    Some((2.0 * model.delta - model.c - delta, model.c + delta))
                }
                _ => None,
            },
        }
    }
}

/// ∫ f dr over [lo, hi] of the piecewise-linear interpolant of samples f on grid r.
pub fn integrate_interval(r: &[f64], f: &[f64], lo: f64, hi: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..r.len() - 1 {
        let (a, b) = (r[i].max(lo), r[i + 1].min(hi));
        if b <= a {
            continue;
        }
        let h = r[i + 1] - r[i];
        let lerp = |x: f64| f[i] + (f[i + 1] - f[i]) * (x - r[i]) / h;
        acc += 0.5 * (lerp(a) + lerp(b)) * (b - a);
    }
    acc
}

/// Pointwise J^X_μ n^μ √γ at every grid point (√γ the induced volume density).
pub fn flux_density(model: &SpacetimeModel, snap: &FieldSnapshot, x: VectorField) -> Result<Vec<f64>> {
    (0..snap.len())
        .map(|i| {
            if snap.r[i] == 0.0 && model.kind == ModelKind::Minkowski {
                // polar axis: the induced volume density vanishes
                return Ok(0.0);
            }
            let p = ChartPoint::new(snap.t, snap.r[i], 0.0);
            let metric = model.metric_at(&p)?;
            let q = q_tensor(&metric, &snap.grad(i));
            let n = metric.unit_normal();
            let j = current_j(&q, &x.components(model, &p));
            Ok(j.dot(&n) * metric.sqrt_abs_det / metric.lapse())
        })
        .collect()
}

/// ∫_{Σ_t ∩ region} J^X_μ n^μ dg_Σ, integrated over φ.
pub fn slice_flux(model: &SpacetimeModel, snap: &FieldSnapshot, x: VectorField, region: Region) -> Result<f64> {
    let Some((lo, hi)) = region.interval(model) else {
        return Ok(0.0);
    };
    let dens = flux_density(model, snap, x)?;
    Ok(2.0 * PI * integrate_interval(&snap.r, &dens, lo, hi))
}

/// Radius function used in the weights: the areal radius on the double, r̄ elsewhere.
pub fn weight_radius(model: &SpacetimeModel, r: f64) -> f64 {
    if model.kind == ModelKind::HydroVortexDoubled {
        (r - model.delta).abs() + model.delta
    } else {
        r
    }
}

/// ℰ_log = E_N + ∫ (log(2 + r))³ J^N_μ n^μ.
pub fn weighted_energy_log(model: &SpacetimeModel, snap: &FieldSnapshot) -> Result<f64> {
    let dens = flux_density(model, snap, VectorField::N)?;
    let weighted: Vec<f64> = dens
        .iter()
        .zip(&snap.r)
        .map(|(d, &r)| (2.0 + weight_radius(model, r)).ln().powi(3) * d)
        .collect();
    let lo = snap.r[0];
    let hi = snap.r[snap.len() - 1];
    Ok(2.0 * PI * (integrate_interval(&snap.r, &dens, lo, hi) + integrate_interval(&snap.r, &weighted, lo, hi)))
}

/// ∂_t²u from the reduced equation, with ∂_r(p u_r) by finite differences.
pub fn second_time_derivative(model: &SpacetimeModel, snap: &FieldSnapshot) -> Result<Vec<Complex64>> {
    let op = model.wave_operator_coefficients(snap.m)?;
    let flux: Vec<Complex64> = snap.r.iter().zip(&snap.dphi_dr).map(|(&r, d)| d * op.flux_at(r).p).collect();
    let div = gradient(&snap.r, &flux);
    Ok((0..snap.len())
        .map(|i| {
            let c = op.flux_at(snap.r[i]);
            (Complex64::new(0.0, c.b) * snap.dphi_dt[i] + div[i] + snap.phi[i] * c.q) / c.w
        })
        .collect())
}

/// T-inner product of two solutions on the same slice:
/// ¼ ∫ Re{ nψ₁ Tψ̄₂ + nψ₂ Tψ̄₁ − ψ₁ n(Tψ̄₂) − ψ₂ n(Tψ̄₁) } dg_Σ.
///
/// The ¼ makes ⟨ψ, ψ⟩ equal to the T-energy of ψ when the boundary terms vanish.
pub fn t_inner_product(model: &SpacetimeModel, a: &FieldSnapshot, b: &FieldSnapshot) -> Result<f64> {
    if a.r != b.r || a.m != b.m {
        return Err(LabError::Domain("inner product needs the same grid and mode".into()));
    }
    let att = second_time_derivative(model, a)?;
    let btt = second_time_derivative(model, b)?;
    let datt = gradient(&a.r, &a.dphi_dt);
    let dbtt = gradient(&b.r, &b.dphi_dt);
    let im = Complex64::new(0.0, a.m as f64);
    let dens: Vec<f64> = (0..a.len())
        .map(|i| {
            let p = ChartPoint::new(a.t, a.r[i], 0.0);
            let metric = model.metric_at(&p).expect("grid inside chart");
            let n = metric.unit_normal();
            let d = |u: Complex64, ur: Complex64, ut: Complex64| n[0] * ut + n[1] * ur + n[2] * im * u;
            let na = d(a.phi[i], a.dphi_dr[i], a.dphi_dt[i]);
            let nb = d(b.phi[i], b.dphi_dr[i], b.dphi_dt[i]);
            let nta = d(a.dphi_dt[i], datt[i], att[i]);
            let ntb = d(b.dphi_dt[i], dbtt[i], btt[i]);
            let s = na * b.dphi_dt[i].conj() + nb * a.dphi_dt[i].conj()
                - a.phi[i] * ntb.conj()
                - b.phi[i] * nta.conj();
            0.25 * s.re * metric.sqrt_abs_det / metric.lapse()
        })
        .collect();
    Ok(2.0 * PI * integrate_interval(&a.r, &dens, a.r[0], a.r[a.len() - 1]))
}

/// T-energy from the flux form, 2π ∫ ½(w|u_t|² + p|u_r|² − q|u|²) dr; agrees with
/// `slice_flux(·, T, ·)` on every 2+1 family.
pub fn mode_energy_density(model: &SpacetimeModel, snap: &FieldSnapshot) -> Result<Vec<f64>> {
    let op = model.wave_operator_coefficients(snap.m)?;
    Ok((0..snap.len())
        .map(|i| {
            let c = op.flux_at(snap.r[i]);
            0.5 * (c.w * snap.dphi_dt[i].norm_sqr() + c.p * snap.dphi_dr[i].norm_sqr() - c.q * snap.phi[i].norm_sqr())
        })
        .collect())
}

/// Energy flux through the ends of the grid: (inner, outer), positive when energy leaves.
pub fn boundary_fluxes(model: &SpacetimeModel, snap: &FieldSnapshot) -> Result<(f64, f64)> {
    let op = model.wave_operator_coefficients(snap.m)?;
    let n = snap.len() - 1;
    let s = |i: usize| op.flux_at(snap.r[i]).p * (snap.dphi_dr[i] * snap.dphi_dt[i].conj()).re;
    Ok((2.0 * PI * s(0), -2.0 * PI * s(n)))
}

/// One row of the diagnostics series.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub e_t_total: f64,
    pub e_t_ergo: f64,
    pub e_n: f64,
    pub e_log: f64,
    pub flux_in: f64,
    pub flux_out: f64,
}

impl EnergyReport {
    pub fn is_finite(&self) -> bool {
        [self.t, self.e_t_total, self.e_t_ergo, self.e_n, self.e_log, self.flux_in, self.flux_out]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Componentwise sum over modes at the same time.
    pub fn merge(&self, o: &EnergyReport) -> EnergyReport {
        EnergyReport {
            t: self.t,
            e_t_total: self.e_t_total + o.e_t_total,
            e_t_ergo: self.e_t_ergo + o.e_t_ergo,
            e_n: self.e_n + o.e_n,
            e_log: self.e_log + o.e_log,
            flux_in: self.flux_in + o.flux_in,
            flux_out: self.flux_out + o.flux_out,
        }
    }
}

/// Full diagnostic row for one mode; `ergo_delta` sets the ergoregion neighbourhood.
pub fn energy_report(model: &SpacetimeModel, snap: &FieldSnapshot, ergo_delta: f64) -> Result<EnergyReport> {
    let t_dens = flux_density(model, snap, VectorField::T)?;
    let n_dens = flux_density(model, snap, VectorField::N)?;
    let (lo, hi) = (snap.r[0], snap.r[snap.len() - 1]);
    let e_t_total = 2.0 * PI * integrate_interval(&snap.r, &t_dens, lo, hi);
    let e_t_ergo = match (Region::Ergoregion { delta: ergo_delta }).interval(model) {
        Some((a, b)) => 2.0 * PI * integrate_interval(&snap.r, &t_dens, a, b),
        None => 0.0,
    };
    let e_n = 2.0 * PI * integrate_interval(&snap.r, &n_dens, lo, hi);
    let weighted: Vec<f64> = n_dens
        .iter()
        .zip(&snap.r)
        .map(|(d, &r)| (2.0 + weight_radius(model, r)).ln().powi(3) * d)
        .collect();
    let e_log = e_n + 2.0 * PI * integrate_interval(&snap.r, &weighted, lo, hi);
    let (flux_in, flux_out) = boundary_fluxes(model, snap)?;
    Ok(EnergyReport { t: snap.t, e_t_total, e_t_ergo, e_n, e_log, flux_in, flux_out })
}

/// Radial weight in the weighted boundedness estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialWeight {
    /// r^a with growth factor (1 + |τ − τ₁|)^a.
    Polynomial,
    /// (log r)^a with growth factor (log(2 + |τ − τ₁|))^{a+1}.
    Logarithmic,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedBoundReport {
    pub a: f64,
    pub weight: RadialWeight,
    /// Rows (τ, R, ratio) with ratio = LHS / (growth factor · RHS integral).
    pub rows: Vec<(f64, f64, f64)>,
    pub max_ratio: f64,
    pub c_a: f64,
    pub violated: bool,
}

/// Measure the weighted boundedness ratio on a recorded series. The domain of dependence of
/// Σ_{τ₁} ∩ {r ≥ R} at time τ is {r ≥ R + v|τ − τ₁|} with v the maximal radial speed.
pub fn dyadic_weighted_bound_check(
    model: &SpacetimeModel,
    series: &[FieldSnapshot],
    tau1_index: usize,
    a: f64,
    r_base: f64,
    shells: usize,
    weight: RadialWeight,
    c_a: f64,
) -> Result<WeightedBoundReport> {
    let v = 1.0;
    let w = |r: f64| match weight {
        RadialWeight::Polynomial => r.powf(a),
        RadialWeight::Logarithmic => r.ln().powf(a),
    };
    let weighted_integral = |s: &FieldSnapshot, lo: f64| -> Result<f64> {
        let d = flux_density(model, s, VectorField::T)?;
        let f: Vec<f64> = d.iter().zip(&s.r).map(|(x, &r)| x * w(weight_radius(model, r))).collect();
        Ok(2.0 * PI * integrate_interval(&s.r, &f, lo, f64::INFINITY))
    };
    let s1 = &series[tau1_index];
    let mut rows = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for k in 0..shells {
        let rk = r_base * 2f64.powi(k as i32);
        let rhs0 = weighted_integral(s1, rk)?;
        for s in series {
            let dt = (s.t - s1.t).abs();
            let growth = match weight {
                RadialWeight::Polynomial => (1.0 + dt).powf(a),
                RadialWeight::Logarithmic => (2.0 + dt).ln().powf(a + 1.0),
            };
            let lhs = weighted_integral(s, rk + v * dt)?;
            let ratio = if rhs0 > 0.0 { lhs / (growth * rhs0) } else if lhs.abs() < 1e-300 { 0.0 } else { f64::INFINITY };
            max_ratio = max_ratio.max(ratio);
            rows.push((s.t, rk, ratio));
        }
    }
    Ok(WeightedBoundReport { a, weight, rows, max_ratio, c_a, violated: max_ratio > c_a })
}
