//! Wave packets θ e^{ilw} concentrated inside the ergoregion, whose time derivative carries
//! strictly negative T-energy of order −l⁴.
//!
//! The phase is w = αt + W(r) + γφ with dw null. For the radially symmetric 2+1 families
//! the null condition is solved exactly, W'(r)² = −(g^{tt}α² + 2g^{tφ}αγ + g^{φφ}γ²); the
//! frozen-coefficient variant W(r) = W'(r_c)(r − r_c) is available as [`PhaseModel::Affine`].

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::energy::{self, FieldSnapshot, Region, VectorField};
use crate::error::{LabError, Result};
use crate::evolution::ModeData;
use crate::geometry::{ChartPoint, Cutoff, ModelKind, SpacetimeModel};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModel {
    /// Exact radial solution of the eikonal equation.
    Eikonal,
    /// Phase linearised at the packet center.
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngularProfile {
    /// No angular cut-off: the packet is the single mode m = −s l γ.
    Uniform,
    /// Smooth bump of the given half-width around φ = 0, projected onto modes.
    Bump { half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavePacketSpec {
    pub center_r: f64,
    pub l: f64,
    pub radial_half_width: f64,
    /// Angular wave number of the phase (γ in w = αt + W + γφ).
    pub gamma: f64,
    /// α = alpha_ratio · |γ|.
    pub alpha_ratio: f64,
    /// Sign of W' (outgoing +1, ingoing −1).
    pub radial_sign: f64,
    /// Use e^{−ilw} instead of e^{ilw}.
    pub conjugate: bool,
    pub amplitude: f64,
    pub angular: AngularProfile,
    pub phase: PhaseModel,
}

impl Default for WavePacketSpec {
    fn default() -> Self {
        WavePacketSpec {
            center_r: 0.6,
            l: 40.0,
            radial_half_width: 0.25,
            gamma: -100.0,
            alpha_ratio: 0.15,
            radial_sign: 1.0,
            conjugate: true,
            amplitude: 1.0,
            angular: AngularProfile::Uniform,
            phase: PhaseModel::Eikonal,
        }
    }
}

impl WavePacketSpec {
    pub fn alpha(&self) -> f64 {
        self.alpha_ratio * self.gamma.abs()
    }

    fn sign(&self) -> f64 {
        if self.conjugate {
            -1.0
        } else {
            1.0
        }
    }

    /// Azimuthal number carried by the phase.
    pub fn phase_mode(&self) -> f64 {
        self.sign() * self.l * self.gamma
    }

    fn radial_bump(&self) -> Cutoff {
        let hw = self.radial_half_width;
        let c = self.center_r;
        Cutoff::Window { a: c - hw, b: c, c, d: c + hw }
    }
}

/// Null covector dw = α dt + β dr + γ dφ at a point, with its dual vector L = ∇w.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullPair {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub l_vector: [f64; 3],
    /// g^{-1}(dw, dw), zero up to round-off.
    pub null_residual: f64,
    /// dw(T) = g(L, T).
    pub dw_t: f64,
}

fn inverse_tphi(model: &SpacetimeModel, r: f64) -> Result<(f64, f64, f64)> {
    let m = model.metric_at(&ChartPoint::new(0.0, r, 0.0))?;
    Ok((m.g_inv[(0, 0)], m.g_inv[(0, 2)], m.g_inv[(2, 2)]))
}

/// −(g^{tt}α² + 2g^{tφ}αγ + g^{φφ}γ²), the square of the radial component of a null dw.
fn beta_squared(model: &SpacetimeModel, r: f64, alpha: f64, gamma: f64) -> Result<f64> {
    let (tt, tp, pp) = inverse_tphi(model, r)?;
    Ok(-(tt * alpha * alpha + 2.0 * tp * alpha * gamma + pp * gamma * gamma))
}

/// Null covector with dw(T) = α > 0 at a point where T is spacelike.
pub fn build_null_pair(model: &SpacetimeModel, r: f64, alpha: f64, gamma: f64, radial_sign: f64) -> Result<NullPair> {
    if model.spatial_dim != 2 {
        return Err(LabError::Unsupported("null pairs are built on the 2+1 families".into()));
    }
    let md = model.metric_at(&ChartPoint::new(0.0, r, 0.0))?;
    if md.g_tt <= 0.0 {
        return Err(LabError::Precondition(format!("T is not spacelike at r = {r}")));
    }
    if alpha <= 0.0 {
        return Err(LabError::Precondition("dw(T) must be positive".into()));
    }
    let b2 = beta_squared(model, r, alpha, gamma)?;
    if b2 < 0.0 {
        return Err(LabError::Construction(format!("no null covector with alpha = {alpha}, gamma = {gamma} at r = {r}")));
    }
    let mirror = if model.kind == ModelKind::HydroVortexDoubled && r < model.delta { -1.0 } else { 1.0 };
    let beta = mirror * radial_sign.signum() * b2.sqrt();
    let dw = [alpha, beta, gamma];
    let mut lv = [0.0; 3];
    let mut res = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            lv[a] += md.g_inv[(a, b)] * dw[b];
            res += md.g_inv[(a, b)] * dw[a] * dw[b];
        }
    }
    Ok(NullPair { alpha, beta, gamma, l_vector: lv, null_residual: res, dw_t: alpha })
}

/// Radial factor R(r) = A θ_r(r) e^{i s l W(r)} and its first two derivatives.
struct RadialPacket {
    spec: WavePacketSpec,
    model: SpacetimeModel,
    /// W on a fine table, integrated from the center.
    w_table: Vec<(f64, f64)>,
    affine_beta: f64,
}

impl RadialPacket {
    fn new(model: &SpacetimeModel, spec: &WavePacketSpec) -> Result<Self> {
        let alpha = spec.alpha();
        let lo = spec.center_r - spec.radial_half_width;
        let hi = spec.center_r + spec.radial_half_width;
        let pair = build_null_pair(model, spec.center_r, alpha, spec.gamma, spec.radial_sign)?;
        let mut w_table = vec![];
        if spec.phase == PhaseModel::Eikonal {
            // Simpson integration of W' on a fine table
            let n = 4000;
            let h = (hi - lo) / n as f64;
            let wp = |r: f64| -> Result<f64> { Ok(spec.radial_sign * beta_squared(model, r, alpha, spec.gamma)?.max(0.0).sqrt()) };
            let mut acc = 0.0;
            w_table.push((lo, 0.0));
            for i in 0..n {
                let a = lo + h * i as f64;
                acc += h / 6.0 * (wp(a)? + 4.0 * wp(a + h / 2.0)? + wp(a + h)?);
                w_table.push((a + h, acc));
            }
        }
        Ok(RadialPacket { spec: *spec, model: model.clone(), w_table, affine_beta: pair.beta })
    }

    /// (W, W', W'').
    fn phase(&self, r: f64) -> (f64, f64, f64) {
        match self.spec.phase {
            PhaseModel::Affine => (self.affine_beta * (r - self.spec.center_r), self.affine_beta, 0.0),
            PhaseModel::Eikonal => {
                let (alpha, gamma) = (self.spec.alpha(), self.spec.gamma);
                let b2 = |x: f64| beta_squared(&self.model, x, alpha, gamma).unwrap_or(0.0).max(0.0);
                let wp = self.spec.radial_sign * b2(r).sqrt();
                let e = 1e-6 * r;
                let wpp = self.spec.radial_sign * ((b2(r + e)).sqrt() - (b2(r - e)).sqrt()) / (2.0 * e);
                let t = &self.w_table;
                let h = t[1].0 - t[0].0;
                let k = (((r - t[0].0) / h).floor().max(0.0) as usize).min(t.len() - 2);
                // cubic Hermite interpolation of W using W' at the table nodes
                let (x0, y0) = t[k];
                let (x1, y1) = t[k + 1];
                let d0 = self.spec.radial_sign * b2(x0).sqrt();
                let d1 = self.spec.radial_sign * b2(x1).sqrt();
                let s = (r - x0) / h;
                let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
                let h10 = s.powi(3) - 2.0 * s * s + s;
                let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
                let h11 = s.powi(3) - s * s;
                let _ = x1;
                (h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1, wp, wpp)
            }
        }
    }

    /// (R, R', R'').
    fn eval(&self, r: f64) -> (C, C, C) {
        let bump = self.spec.radial_bump();
        let a = self.spec.amplitude;
        let (th, th1, th2) = (a * bump.eval(r, 0), a * bump.eval(r, 1), a * bump.eval(r, 2));
        if th == 0.0 && th1 == 0.0 && th2 == 0.0 {
            let z = C::new(0.0, 0.0);
            return (z, z, z);
        }
        let (w, w1, w2) = self.phase(r);
        let k = self.spec.sign() * self.spec.l;
        let e = C::new(0.0, k * w).exp();
        let ik = C::new(0.0, k);
        let r0 = e * th;
        let r1 = e * (th1 + ik * w1 * th);
        let r2 = e * (th2 + ik * w1 * th1 * 2.0 + ik * w2 * th + (ik * w1) * (ik * w1) * th);
        (r0, r1, r2)
    }
}

/// Angular coefficients c_m of Θ(φ) e^{i s l γ φ}.
fn angular_modes(spec: &WavePacketSpec) -> Result<Vec<(i64, C)>> {
    let k = spec.phase_mode();
    match spec.angular {
        AngularProfile::Uniform => {
            if (k - k.round()).abs() > 1e-9 {
                return Err(LabError::Precondition(format!("s l gamma = {k} is not an integer")));
            }
            Ok(vec![(k.round() as i64, C::new(1.0, 0.0))])
        }
        AngularProfile::Bump { half_width } => {
            let n = 4096;
            let bump = Cutoff::Window { a: -half_width, b: 0.0, c: 0.0, d: half_width };
            let mut buf: Vec<C> = (0..n)
                .map(|j| {
                    let mut ph = 2.0 * PI * j as f64 / n as f64;
                    if ph > PI {
                        ph -= 2.0 * PI;
                    }
                    C::new(0.0, k * ph).exp() * bump.eval(ph, 0)
                })
                .collect();
            FftPlanner::new().plan_fft_forward(n).process(&mut buf);
            let coeffs: Vec<(i64, C)> = buf
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let m = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
                    (m, c / n as f64)
                })
                .collect();
            let total: f64 = coeffs.iter().map(|(_, c)| c.norm_sqr()).sum();
            let mut sorted = coeffs.clone();
            sorted.sort_by(|a, b| b.1.norm_sqr().total_cmp(&a.1.norm_sqr()).then(a.0.cmp(&b.0)));
            let mut kept = vec![];
            let mut acc = 0.0;
            for (m, c) in sorted {
                if total - acc < 1e-6 * total {
                    break;
                }
                acc += c.norm_sqr();
                kept.push((m, c));
            }
            kept.sort_by_key(|x| x.0);
            Ok(kept)
        }
    }
}

/// Per-mode packet data together with the derived data of Tφ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PacketMode {
    pub m: i64,
    /// φ|_{t=0}.
    pub phi0: Vec<C>,
    /// Tφ|_{t=0}.
    pub phi1: Vec<C>,
    /// ∂_r Tφ|_{t=0}, analytic.
    pub phi1_r: Vec<C>,
    /// T²φ|_{t=0}, from the wave equation.
    pub phi2: Vec<C>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialData {
    pub spec: WavePacketSpec,
    pub r: Vec<f64>,
    pub modes: Vec<PacketMode>,
    /// T-energy of Tφ before normalization.
    pub raw_energy: f64,
    /// Factor applied to the raw data.
    pub normalization: f64,
    /// T-energy of Tφ after normalization, re-measured by quadrature.
    pub measured_energy: f64,
}

impl InitialData {
    /// Data (Tφ, T²φ) of the evolved field ψ = Tφ.
    pub fn evolution_data(&self) -> Vec<ModeData> {
        self.modes.iter().map(|p| ModeData { m: p.m, u: p.phi1.clone(), ut: p.phi2.clone() }).collect()
    }

    /// Snapshots of ψ = Tφ with analytic radial derivatives.
    pub fn snapshots(&self) -> Result<Vec<FieldSnapshot>> {
        self.modes
            .iter()
            .map(|p| {
                let mut s = FieldSnapshot::new(p.m, 0.0, self.r.clone(), p.phi1.clone(), p.phi2.clone())?;
                s.dphi_dr = p.phi1_r.clone();
                Ok(s)
            })
            .collect()
    }

    /// T-energy of ψ = Tφ summed over modes.
    pub fn t_energy(&self, model: &SpacetimeModel) -> Result<f64> {
        self.snapshots()?.iter().map(|s| energy::slice_flux(model, s, VectorField::T, Region::All)).sum()
    }

    fn scale(&mut self, f: f64) {
        for p in &mut self.modes {
            for v in [&mut p.phi0, &mut p.phi1, &mut p.phi1_r, &mut p.phi2] {
                v.iter_mut().for_each(|z| *z *= f);
            }
        }
    }
}

fn check_support(model: &SpacetimeModel, spec: &WavePacketSpec) -> Result<()> {
    let lo = spec.center_r - spec.radial_half_width;
    let hi = spec.center_r + spec.radial_half_width;
    let inside = |r: f64| model.ergoregion_indicator(&ChartPoint::new(0.0, r, 0.0)).map(|g| g > 0.0).unwrap_or(false);
    let n = 200;
    for i in 0..=n {
        let r = lo + (hi - lo) * i as f64 / n as f64;
        let edge = i == 0 || i == n;
        if !inside(r) && !(edge && spec.radial_half_width > 0.0) {
            return Err(LabError::Domain(format!("packet support [{lo}, {hi}] leaks outside the ergoregion at r = {r}")));
        }
    }
    if lo <= model.chart.r_min || (model.kind == ModelKind::HydroVortex && lo <= model.delta) {
        return Err(LabError::Domain("packet support touches the inner boundary".into()));
    }
    Ok(())
}

/// Sample θ e^{ilw} and its time derivatives on the grid, per azimuthal mode.
pub fn build_wave_packet(model: &SpacetimeModel, spec: &WavePacketSpec, grid: &[f64]) -> Result<InitialData> {
    check_support(model, spec)?;
    let rp = RadialPacket::new(model, spec)?;
    let omega = spec.sign() * spec.l * spec.alpha();
    let iw = C::new(0.0, omega);
    let mut modes = vec![];
    for (m, cm) in angular_modes(spec)? {
        let op = model.wave_operator_coefficients(m)?;
        let mut pm = PacketMode { m, phi0: vec![], phi1: vec![], phi1_r: vec![], phi2: vec![] };
        for &r in grid {
            let (r0, r1, r2) = rp.eval(r);
            let (u, ur, urr) = (cm * r0, cm * r1, cm * r2);
            let ut = iw * u;
            let c = op.at(r);
            let utt = -(c.a_t * ut + c.a_rr * urr + c.a_r * ur + c.a_0 * u) / c.a_tt;
            pm.phi0.push(u);
            pm.phi1.push(ut);
            pm.phi1_r.push(iw * ur);
            pm.phi2.push(utt);
        }
        modes.push(pm);
    }
    let mut data = InitialData { spec: *spec, r: grid.to_vec(), modes, raw_energy: 0.0, normalization: 1.0, measured_energy: 0.0 };
    data.raw_energy = data.t_energy(model)?;
    data.measured_energy = data.raw_energy;
    Ok(data)
}

/// L²(r dr) norm of □_g φ̃ for the packet, summed over modes.
pub fn packet_residual(model: &SpacetimeModel, spec: &WavePacketSpec, grid: &[f64]) -> Result<f64> {
    let rp = RadialPacket::new(model, spec)?;
    let omega = spec.sign() * spec.l * spec.alpha();
    let iw = C::new(0.0, omega);
    let mut total = 0.0;
    for (m, cm) in angular_modes(spec)? {
        let op = model.wave_operator_coefficients(m)?;
        let dens: Vec<f64> = grid
            .iter()
            .map(|&r| {
                let (r0, r1, r2) = rp.eval(r);
                let c = op.at(r);
                let b = cm * (c.a_tt * iw * iw * r0 + c.a_t * iw * r0 + c.a_rr * r2 + c.a_r * r1 + c.a_0 * r0);
                b.norm_sqr() * energy::weight_radius(model, r)
            })
            .collect();
        total += 2.0 * PI * energy::integrate_interval(grid, &dens, grid[0], grid[grid.len() - 1]);
    }
    Ok(total.sqrt())
}

/// Packet rescaled so that the T-energy of Tφ is −1.
pub fn negative_energy_data(model: &SpacetimeModel, spec: &WavePacketSpec, grid: &[f64]) -> Result<InitialData> {
    let mut data = build_wave_packet(model, spec, grid)?;
    if !(data.raw_energy < 0.0) {
        let mut works = None;
        for k in 1..=6 {
            let l = spec.l * 2f64.powi(k);
            let trial = WavePacketSpec { l, ..*spec };
            if let Ok(d) = build_wave_packet(model, &trial, grid) {
                if d.raw_energy < 0.0 {
                    works = Some(l);
                    break;
                }
            }
        }
        return Err(LabError::Precondition(match works {
            Some(l) => format!("l = {} too small (energy {:.3e} >= 0); l = {l} works", spec.l, data.raw_energy),
            None => format!("l = {} too small (energy {:.3e} >= 0); no tested l works", spec.l, data.raw_energy),
        }));
    }
    let f = 1.0 / (-data.raw_energy).sqrt();
    data.scale(f);
    data.normalization = f;
    data.measured_energy = data.t_energy(model)?;
    Ok(data)
}

/// Uniform grid on [a, b] with n points.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Shared handle used by the CLI to pass packets around.
pub type SharedData = Arc<InitialData>;
