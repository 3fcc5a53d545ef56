//! Time-frequency decomposition of recorded mode fields.
//!
//! A recorded field ψ(t, r) is first cut off smoothly in the distorted time
//! t₋ = t + ½θ₁(r)(r − R₁), giving ψ_c = θ₂(t₋)ψ, and then split into dyadic bands
//! ψ_k = ζ_k ∗ ψ_c. The kernels are normalised so that ψ̂_k = ζ̂_k ψ̂_c with
//! ζ̂_0(ω) = θ₃(ω/ω₀) and ζ̂_k(ω) = θ₃(ω/ω_k) − θ₃(ω/ω_{k−1}).
//! Convolutions are done by FFT with 4× zero padding, one radius at a time.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::energy::{self, FieldSnapshot};
use crate::error::{LabError, Result};
use crate::geometry::cutoff::theta3;
use crate::geometry::{Cutoff, SpacetimeModel};

type C = Complex64;

/// Mass of a kernel allowed outside the recorded window.
pub const TAIL_TOLERANCE: f64 = 1e-9;

/// Which projection to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    K(usize),
    /// ψ_{≤ω₊}
    Low,
    /// ψ_{≥ω₊} = ψ_c − ψ_{≤ω₊}
    High,
}

/// Scaled kernel shapes, computed once: ζ_k(t) = ω_k Z(ω_k t) with Z determined by the
/// symbol profile in x = ω/ω_k.
struct ScaledKernels {
    dt: f64,
    /// Z for the symbols θ₃(x), θ₃(x) − θ₃(2x), θ₃(x/2), θ₃(x/2) − θ₃(4x), sampled on t ≥ 0.
    shapes: [Vec<f64>; 4],
}

const SHAPE_LOW: usize = 0;
const SHAPE_BAND: usize = 1;
const SHAPE_XI_LOW: usize = 2;
const SHAPE_XI_BAND: usize = 3;

fn scaled_kernels() -> &'static ScaledKernels {
    static CELL: OnceLock<ScaledKernels> = OnceLock::new();
    CELL.get_or_init(|| {
        let n = 1 << 19;
        let dt = 0.05;
        let dw = 2.0 * PI / (n as f64 * dt);
        let profiles: [fn(f64) -> f64; 4] = [
            |x| theta3(x, 0),
            |x| theta3(x, 0) - theta3(2.0 * x, 0),
            |x| theta3(x / 2.0, 0),
            |x| theta3(x / 2.0, 0) - theta3(4.0 * x, 0),
        ];
        let fft = FftPlanner::new().plan_fft_inverse(n);
        let shapes = profiles.map(|f| {
            let mut buf: Vec<C> = (0..n)
                .map(|j| {
                    let w = if j < n / 2 { j as f64 } else { j as f64 - n as f64 } * dw;
                    C::new(f(w), 0.0)
                })
                .collect();
            fft.process(&mut buf);
            // Z(t) = (1/2π)∫ S(ω) e^{iωt} dω ≈ (dω/2π) Σ S e^{iωt}
            buf[..n / 2].iter().map(|z| z.re * dw / (2.0 * PI)).collect()
        });
        ScaledKernels { dt, shapes }
    })
}

impl ScaledKernels {
    fn eval(&self, shape: usize, t: f64) -> f64 {
        let s = &self.shapes[shape];
        let x = t.abs() / self.dt;
        let i = x.floor() as usize;
        if i + 2 >= s.len() {
            return 0.0;
        }
        // four-point Lagrange interpolation, using evenness at the origin
        let at = |k: isize| s[k.unsigned_abs()];
        let f = x - i as f64;
        let i = i as isize;
        let (a, b, c, d) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        -a * f * (f - 1.0) * (f - 2.0) / 6.0 + b * (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0
            - c * (f + 1.0) * f * (f - 2.0) / 2.0
            + d * (f + 1.0) * f * (f - 1.0) / 6.0
    }

    /// Smallest L with ∫_{|t|>L}|Z| ≤ tol ∫|Z|.
    fn tail_span(&self, shape: usize, tol: f64) -> f64 {
        let s = &self.shapes[shape];
        let total: f64 = s.iter().map(|v| v.abs()).sum();
        let mut tail = 0.0;
        for i in (0..s.len()).rev() {
            tail += s[i].abs();
            if tail > tol * total {
                return (i + 1) as f64 * self.dt;
            }
        }
        0.0
    }

    /// sup_t |Z(t)|(1 + |t|^m).
    fn schwartz_constant(&self, shape: usize, m: i32) -> f64 {
        self.shapes[shape]
            .iter()
            .enumerate()
            .map(|(i, v)| v.abs() * (1.0 + (i as f64 * self.dt).powi(m)))
            .fold(0.0, f64::max)
    }
}

/// Dyadic family ω_k = 2^k ω₀, k = 0..n, with n = ⌈log₂(ω₊/ω₀)⌉.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierBank {
    pub omega0: f64,
    pub omega_plus: f64,
    pub n: usize,
    pub omegas: Vec<f64>,
}

impl MollifierBank {
    pub fn new(omega0: f64, omega_plus: f64) -> Result<Self> {
        if !(omega0 > 0.0 && omega0 < 1.0) {
            return Err(LabError::Parameter(format!("omega0 = {omega0} must lie in (0, 1)")));
        }
        if !(omega_plus > 1.0 && omega_plus > omega0) {
            return Err(LabError::Parameter(format!("omega_plus = {omega_plus} must exceed 1")));
        }
        let n = (omega_plus / omega0).log2().ceil() as usize;
        let omegas = (0..=n).map(|k| omega0 * 2f64.powi(k as i32)).collect();
        Ok(MollifierBank { omega0, omega_plus, n, omegas })
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k > self.n {
            return Err(LabError::Domain(format!("band {k} > n = {}", self.n)));
        }
        Ok(())
    }

    /// ζ̂_k(ω).
    pub fn zeta_symbol(&self, k: usize, w: f64) -> f64 {
        if k == 0 {
            theta3(w / self.omegas[0], 0)
        } else {
            theta3(w / self.omegas[k], 0) - theta3(w / self.omegas[k - 1], 0)
        }
    }

    /// Symbol of ζ_{≤ω₊} = Σ_k ζ_k.
    pub fn low_symbol(&self, w: f64) -> f64 {
        theta3(w / self.omegas[self.n], 0)
    }

    /// ξ̂_k(ω), equal to 1 on the support of ζ̂_k.
    pub fn xi_symbol(&self, k: usize, w: f64) -> f64 {
        if k == 0 {
            theta3(w / (2.0 * self.omegas[0]), 0)
        } else {
            theta3(w / (2.0 * self.omegas[k]), 0) - theta3(2.0 * w / self.omegas[k - 1], 0)
        }
    }

    /// Symbol of the antiderivative ξ̃_k, ξ̂_k(ω)/(iω); zero at ω = 0 where ξ̂_k vanishes.
    pub fn xi_tilde_symbol(&self, k: usize, w: f64) -> C {
        let x = self.xi_symbol(k, w);
        if x == 0.0 {
            C::new(0.0, 0.0)
        } else {
            C::new(0.0, -x / w)
        }
    }

    fn symbol(&self, band: Band, w: f64) -> f64 {
        match band {
            Band::K(k) => self.zeta_symbol(k, w),
            Band::Low => self.low_symbol(w),
            Band::High => 1.0 - self.low_symbol(w),
        }
    }

    fn scale(&self, band: Band) -> (usize, f64) {
        match band {
            Band::K(0) => (SHAPE_LOW, self.omegas[0]),
            Band::K(k) => (SHAPE_BAND, self.omegas[k]),
            Band::Low | Band::High => (SHAPE_LOW, self.omegas[self.n]),
        }
    }

    /// Kernel ζ_k (or ζ_{≤ω₊}) at time t.
    pub fn kernel(&self, band: Band, t: f64) -> f64 {
        let (shape, w) = self.scale(band);
        w * scaled_kernels().eval(shape, w * t)
    }

    /// Half-width of the time window carrying all but `tol` of the kernel's L¹ mass.
    pub fn tail_span(&self, band: Band, tol: f64) -> f64 {
        let (shape, w) = self.scale(band);
        scaled_kernels().tail_span(shape, tol) / w
    }

    /// Same for ξ_k.
    pub fn xi_tail_span(&self, k: usize, tol: f64) -> f64 {
        let shape = if k == 0 { SHAPE_XI_LOW } else { SHAPE_XI_BAND };
        scaled_kernels().tail_span(shape, tol) / self.omegas[k]
    }

    /// sup_t ω_k^{-1}|ζ_k(t)|(1 + |ω_k t|^m) for each k.
    pub fn schwartz_constants(&self, m: i32) -> Vec<f64> {
        let sk = scaled_kernels();
        (0..=self.n).map(|k| sk.schwartz_constant(if k == 0 { SHAPE_LOW } else { SHAPE_BAND }, m)).collect()
    }
}

/// Uniformly sampled mode field ψ(t_j, r_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesField {
    pub m: i64,
    pub t0: f64,
    pub dt: f64,
    pub r: Vec<f64>,
    /// values[j][i] = ψ(t0 + j dt, r_i).
    pub values: Vec<Vec<C>>,
    /// ∂_t ψ at the same samples, when known.
    pub time_derivative: Option<Vec<Vec<C>>>,
    pub cutoff_applied: bool,
    /// Time interval on which the samples are trustworthy.
    pub valid_window: (f64, f64),
}

impl TimeSeriesField {
    pub fn new(m: i64, t0: f64, dt: f64, r: Vec<f64>, values: Vec<Vec<C>>, time_derivative: Option<Vec<Vec<C>>>) -> Result<Self> {
        if !(dt > 0.0) || values.len() < 4 {
            return Err(LabError::Domain("time series needs dt > 0 and at least 4 samples".into()));
        }
        let rows_ok = |v: &Vec<Vec<C>>| v.len() == values.len() && v.iter().all(|row| row.len() == r.len());
        if !rows_ok(&values) || time_derivative.as_ref().is_some_and(|d| !rows_ok(d)) {
            return Err(LabError::Domain("time series rows must match the radial grid".into()));
        }
        let finite = |v: &Vec<Vec<C>>| v.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite(&values) || time_derivative.as_ref().is_some_and(|d| !finite(d)) {
            return Err(LabError::Domain("time series contains non-finite samples".into()));
        }
        let t1 = t0 + dt * (values.len() - 1) as f64;
        Ok(TimeSeriesField { m, t0, dt, r, values, time_derivative, cutoff_applied: false, valid_window: (t0, t1) })
    }

    /// Series from equally spaced snapshots of one mode. A shorter final interval, as
    /// produced when the run length is not a multiple of the output spacing, is dropped.
    pub fn from_snapshots(snaps: &[FieldSnapshot]) -> Result<Self> {
        if snaps.len() < 4 {
            return Err(LabError::Domain("need at least 4 snapshots".into()));
        }
        let dt = snaps[1].t - snaps[0].t;
        let n = snaps.len();
        let snaps = if (snaps[n - 1].t - snaps[n - 2].t) < dt * (1.0 - 1e-9) { &snaps[..n - 1] } else { snaps };
        for w in snaps.windows(2) {
            if ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.abs().max(1.0) || w[1].m != snaps[0].m || w[1].r != snaps[0].r {
                return Err(LabError::Domain("snapshots must share mode and grid and be equally spaced".into()));
            }
        }
        Self::new(
            snaps[0].m,
            snaps[0].t,
            dt,
            snaps[0].r.clone(),
            snaps.iter().map(|s| s.phi.clone()).collect(),
            Some(snaps.iter().map(|s| s.dphi_dt.clone()).collect()),
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + self.dt * j as f64
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// ∂_t ψ: recorded if present, otherwise fourth-order differences in t.
    pub fn derivative(&self) -> Vec<Vec<C>> {
        if let Some(d) = &self.time_derivative {
            return d.clone();
        }
        let n = self.len();
        let v = &self.values;
        let h = self.dt;
        (0..n)
            .map(|j| {
                (0..self.r.len())
                    .map(|i| {
                        if j >= 2 && j + 2 < n {
                            (v[j - 2][i] - v[j - 1][i] * 8.0 + v[j + 1][i] * 8.0 - v[j + 2][i]) / (12.0 * h)
                        } else if j == 0 {
                            (v[1][i] * 4.0 - v[2][i] - v[0][i] * 3.0) / (2.0 * h)
                        } else if j == n - 1 {
                            (v[n - 1][i] * 3.0 - v[n - 2][i] * 4.0 + v[n - 3][i]) / (2.0 * h)
                        } else {
                            (v[j + 1][i] - v[j - 1][i]) / (2.0 * h)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn snapshot(&self, j: usize) -> Result<FieldSnapshot> {
        let d = self.derivative();
        FieldSnapshot::new(self.m, self.time(j), self.r.clone(), self.values[j].clone(), d[j].clone())
    }
}

/// θ₁ = Rise on [R₁, R₁ + 1].
fn theta1(r1: f64) -> Cutoff {
    Cutoff::Rise { a: r1, b: r1 + 1.0 }
}

/// θ₂ = Rise on [0, 1].
const THETA2: Cutoff = Cutoff::Rise { a: 0.0, b: 1.0 };

/// t₋ = t + ½θ₁(r)(r − R₁).
pub fn distorted_time(t: f64, r: f64, r1: f64) -> f64 {
    t + 0.5 * theta1(r1).eval(r, 0) * (r - r1)
}

/// ∂_r t₋ and ∂_r² t₋.
fn distorted_time_r(r: f64, r1: f64) -> (f64, f64) {
    let th = theta1(r1);
    let d1 = 0.5 * (th.eval(r, 1) * (r - r1) + th.eval(r, 0));
    let d2 = 0.5 * (th.eval(r, 2) * (r - r1) + 2.0 * th.eval(r, 1));
    (d1, d2)
}

/// ψ_c = θ₂(t₋)ψ. The series must start where θ₂(t₋) vanishes or ψ does.
pub fn temporal_cutoff(series: &TimeSeriesField, r1: f64) -> Result<TimeSeriesField> {
    let scale = series.values.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    for (i, &r) in series.r.iter().enumerate() {
        if distorted_time(series.t0, r, r1) > 0.0 && series.values[0][i].norm() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(LabError::Precondition(format!(
                "recorded span starts at t = {} where t_- > 0 at r = {r}; start earlier or move R1 outward",
                series.t0
            )));
        }
    }
    let d = series.derivative();
    let mut values = series.values.clone();
    let mut dvals = d.clone();
    for j in 0..series.len() {
        let t = series.time(j);
        for (i, &r) in series.r.iter().enumerate() {
            let tm = distorted_time(t, r, r1);
            let (c0, c1) = (THETA2.eval(tm, 0), THETA2.eval(tm, 1));
            values[j][i] = series.values[j][i] * c0;
            dvals[j][i] = d[j][i] * c0 + series.values[j][i] * c1;
        }
    }
    Ok(TimeSeriesField {
        values,
        time_derivative: Some(dvals),
        cutoff_applied: true,
        valid_window: series.valid_window,
        ..series.clone()
    })
}

/// Apply per-bin multipliers to each radial column with 4× zero padding.
/// Returns one output series per multiplier (values and ∂_t).
fn filter_columns<F>(series: &TimeSeriesField, multipliers: &[F]) -> Vec<(Vec<Vec<C>>, Vec<Vec<C>>)>
where
    F: Fn(f64) -> C + Sync,
{
    let nt = series.len();
    let nf = 4 * nt;
    let dw = 2.0 * PI / (nf as f64 * series.dt);
    let freqs: Vec<f64> = (0..nf).map(|j| if j < nf / 2 { j as f64 } else { j as f64 - nf as f64 } * dw).collect();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nf);
    let inv = planner.plan_fft_inverse(nf);
    let nr = series.r.len();
    let columns: Vec<Vec<(Vec<C>, Vec<C>)>> = (0..nr)
        .into_par_iter()
        .map(|i| {
            let mut buf = vec![C::new(0.0, 0.0); nf];
            for j in 0..nt {
                buf[j] = series.values[j][i];
            }
            fwd.process(&mut buf);
            multipliers
                .iter()
                .map(|mult| {
                    let mut a: Vec<C> = buf.iter().zip(&freqs).map(|(z, &w)| z * mult(w)).collect();
                    let mut b: Vec<C> = a.iter().zip(&freqs).map(|(z, &w)| z * C::new(0.0, w)).collect();
                    inv.process(&mut a);
                    inv.process(&mut b);
                    let s = 1.0 / nf as f64;
                    (a[..nt].iter().map(|z| z * s).collect(), b[..nt].iter().map(|z| z * s).collect())
                })
                .collect()
        })
        .collect();
    (0..multipliers.len())
        .map(|k| {
            let mut v = vec![vec![C::new(0.0, 0.0); nr]; nt];
            let mut d = vec![vec![C::new(0.0, 0.0); nr]; nt];
            for (i, col) in columns.iter().enumerate() {
                for j in 0..nt {
                    v[j][i] = col[k].0[j];
                    d[j][i] = col[k].1[j];
                }
            }
            (v, d)
        })
        .collect()
}

fn projected(series: &TimeSeriesField, v: Vec<Vec<C>>, d: Vec<Vec<C>>, window: (f64, f64)) -> TimeSeriesField {
    TimeSeriesField { values: v, time_derivative: Some(d), valid_window: window, ..series.clone() }
}

fn check_span(series: &TimeSeriesField, span: f64) -> Result<(f64, f64)> {
    let (a, b) = series.valid_window;
    if b - a <= span {
        return Err(LabError::Precondition(format!(
            "window too short: kernel tail needs a recorded span > {span:.4}, have {:.4}",
            b - a
        )));
    }
    Ok((a, b - span))
}

/// ψ_k, ψ_{≤ω₊} or ψ_{≥ω₊} of a cut-off series, with ∂_t from the spectral derivative.
pub fn project_component(series: &TimeSeriesField, bank: &MollifierBank, band: Band) -> Result<TimeSeriesField> {
    if !series.cutoff_applied {
        return Err(LabError::Precondition("apply the temporal cut-off first".into()));
    }
    if let Band::K(k) = band {
        bank.check_k(k)?;
    }
    let window = check_span(series, bank.tail_span(band, TAIL_TOLERANCE))?;
    let mult = |w: f64| C::new(bank.symbol(band, w), 0.0);
    let (v, d) = filter_columns(series, &[mult]).pop().expect("one multiplier");
    Ok(projected(series, v, d, window))
}

/// All bands ψ_0..ψ_n together with ψ_{≤ω₊} and ψ_{≥ω₊}, sharing one forward FFT per radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decomposition {
    pub bands: Vec<TimeSeriesField>,
    pub low: TimeSeriesField,
    pub high: TimeSeriesField,
}

pub fn decompose(series: &TimeSeriesField, bank: &MollifierBank) -> Result<Decomposition> {
    if !series.cutoff_applied {
        return Err(LabError::Precondition("apply the temporal cut-off first".into()));
    }
    let window = check_span(series, bank.tail_span(Band::K(0), TAIL_TOLERANCE))?;
    let mut mults: Vec<Box<dyn Fn(f64) -> C + Sync>> = (0..=bank.n)
        .map(|k| Box::new(move |w: f64| C::new(bank.zeta_symbol(k, w), 0.0)) as Box<dyn Fn(f64) -> C + Sync>)
        .collect();
    mults.push(Box::new(|w: f64| C::new(bank.low_symbol(w), 0.0)));
    let mut out = filter_columns(series, &mults);
    let (lv, ld) = out.pop().expect("low band");
    let sd = series.derivative();
    let hv: Vec<Vec<C>> = series.values.iter().zip(&lv).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    let hd: Vec<Vec<C>> = sd.iter().zip(&ld).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    Ok(Decomposition {
        bands: out.into_iter().map(|(v, d)| projected(series, v, d, window)).collect(),
        low: projected(series, lv, ld, window),
        high: projected(series, hv, hd, window),
    })
}

/// ∫∫ w(r) |f|² √g dr dt over t ∈ [t1, t2] (trapezoid in t, piecewise linear in r).
fn spacetime_integral(
    model: &SpacetimeModel,
    series: &TimeSeriesField,
    vals: &[Vec<C>],
    weight: &dyn Fn(f64) -> f64,
    (t1, t2): (f64, f64),
    (r_lo, r_hi): (f64, f64),
) -> f64 {
    let mut acc = 0.0;
    let rows: Vec<usize> = (0..series.len()).filter(|&j| series.time(j) >= t1 - 1e-12 && series.time(j) <= t2 + 1e-12).collect();
    for (idx, &j) in rows.iter().enumerate() {
        let dens: Vec<f64> = series
            .r
            .iter()
            .zip(&vals[j])
            .map(|(&r, z)| weight(r) * z.norm_sqr() * energy::weight_radius(model, r))
            .collect();
        let slice = energy::integrate_interval(&series.r, &dens, r_lo, r_hi);
        let wt = if idx == 0 || idx == rows.len() - 1 { 0.5 } else { 1.0 };
        acc += wt * slice * series.dt;
    }
    2.0 * PI * acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub k: usize,
    /// ∫θ|Tψ_k|² / (ω_k² ∫θ|ψ_k|²).
    pub ratio: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub within_bounds: bool,
}

/// Compare ∫θ|Tψ_k|² with ω_k²∫θ|ψ_k|² on [t1, t2] × {r ≤ R}.
pub fn sandwich_check(
    model: &SpacetimeModel,
    series_k: &TimeSeriesField,
    bank: &MollifierBank,
    k: usize,
    weight: &dyn Fn(f64) -> f64,
    times: (f64, f64),
    r_max: f64,
) -> Result<SandwichReport> {
    bank.check_k(k)?;
    let d = series_k.derivative();
    let rr = (f64::NEG_INFINITY, r_max);
    let num = spacetime_integral(model, series_k, &d, weight, times, rr);
    let den = bank.omegas[k].powi(2) * spacetime_integral(model, series_k, &series_k.values, weight, times, rr);
    if !(den > 0.0) {
        return Err(LabError::Numerical { t: times.0, msg: "vanishing denominator in the sandwich ratio".into() });
    }
    let ratio = num / den;
    let (lo, hi) = (1.0 / 16.0, 16.0);
    Ok(SandwichReport { k, ratio, lower_bound: lo, upper_bound: hi, within_bounds: ratio >= lo && ratio <= hi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReproducingReport {
    pub k: usize,
    /// ‖ψ_k − ξ_k ∗ ψ_k‖ / ‖ψ_k‖ on the checked window.
    pub residual: f64,
    /// ‖ψ_k − ξ̃_k ∗ Tψ_k‖ / ‖ψ_k‖, for k ≥ 1.
    pub residual_antiderivative: Option<f64>,
    /// ‖ψ_k‖ on the window; residuals become absolute when it falls below 1e-300.
    pub norm: f64,
    pub window: (f64, f64),
}

/// Check ψ_k = ξ_k ∗ ψ_k and ψ_k = ξ̃_k ∗ Tψ_k on the part of the window unaffected by
/// the truncation of ψ_k.
pub fn reproducing_check(series_k: &TimeSeriesField, bank: &MollifierBank, k: usize) -> Result<ReproducingReport> {
    bank.check_k(k)?;
    let span = bank.xi_tail_span(k, TAIL_TOLERANCE);
    let (a, b) = series_k.valid_window;
    let window = (a + span, b - span);
    if window.1 <= window.0 {
        return Err(LabError::Precondition(format!("window too short for the reproducing check: need > {:.4}", 2.0 * span)));
    }
    let xi = |w: f64| C::new(bank.xi_symbol(k, w), 0.0);
    let (rep, _) = filter_columns(series_k, &[xi]).pop().expect("one multiplier");
    let anti = if k >= 1 {
        let d = TimeSeriesField { values: series_k.derivative(), time_derivative: None, ..series_k.clone() };
        let xt = |w: f64| bank.xi_tilde_symbol(k, w);
        Some(filter_columns(&d, &[xt]).pop().expect("one multiplier").0)
    } else {
        None
    };
    let mut norm = 0.0;
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for j in 0..series_k.len() {
        let t = series_k.time(j);
        if t < window.0 || t > window.1 {
            continue;
        }
        for i in 0..series_k.r.len() {
            let v = series_k.values[j][i];
            norm += v.norm_sqr();
            e1 += (v - rep[j][i]).norm_sqr();
            if let Some(an) = &anti {
                e2 += (v - an[j][i]).norm_sqr();
            }
        }
    }
    let scale = if norm > 1e-300 { norm.sqrt() } else { 1.0 };
    Ok(ReproducingReport {
        k,
        residual: e1.sqrt() / scale,
        residual_antiderivative: anti.map(|_| e2.sqrt() / scale),
        norm: norm.sqrt(),
        window,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDecayReport {
    pub t: f64,
    pub radii: Vec<f64>,
    /// Energy of the field in the shell [R, 2R] at time t.
    pub shell_energy: Vec<f64>,
    /// (q, R^q · shell energy) for q ∈ {1, 2, 4}.
    pub weighted: Vec<(i32, Vec<f64>)>,
    pub monotone: bool,
}

/// Shell energies ∫_R^{2R}(|Tψ|² + |∂_rψ|² + m²|ψ|²/r²) r dr · 2π at sample j.
pub fn tail_decay_check(model: &SpacetimeModel, series: &TimeSeriesField, j: usize, radii: &[f64]) -> Result<TailDecayReport> {
    if j >= series.len() {
        return Err(LabError::Domain("time index outside the series".into()));
    }
    let snap = series.snapshot(j)?;
    let m2 = (series.m as f64).powi(2);
    let dens: Vec<f64> = (0..snap.len())
        .map(|i| {
            let r = energy::weight_radius(model, snap.r[i]);
            let ang = if r > 0.0 { m2 * snap.phi[i].norm_sqr() / (r * r) } else { 0.0 };
            (snap.dphi_dt[i].norm_sqr() + snap.dphi_dr[i].norm_sqr() + ang) * r
        })
        .collect();
    let shell: Vec<f64> = radii.iter().map(|&r| 2.0 * PI * energy::integrate_interval(&snap.r, &dens, r, 2.0 * r)).collect();
    let mut monotone = true;
    let weighted = [1, 2, 4]
        .iter()
        .map(|&q| {
            let v: Vec<f64> = radii.iter().zip(&shell).map(|(r, e)| r.powi(q) * e).collect();
            monotone &= v.windows(2).all(|w| w[1] <= w[0]);
            (q, v)
        })
        .collect();
    Ok(TailDecayReport { t: snap.t, radii: radii.to_vec(), shell_energy: shell, weighted, monotone })
}

/// F = 2∂^μθ₂(t₋)∂_μψ + (□_g θ₂(t₋))ψ for a raw (not cut-off) 2+1 mode series.
pub fn source_term(model: &SpacetimeModel, series: &TimeSeriesField, r1: f64) -> Result<TimeSeriesField> {
    let op = model.wave_operator_coefficients(series.m)?;
    let d = series.derivative();
    let im = C::new(0.0, series.m as f64);
    let mut out = vec![vec![C::new(0.0, 0.0); series.r.len()]; series.len()];
    for (j, row) in out.iter_mut().enumerate() {
        let t = series.time(j);
        let psi_r = energy::gradient(&series.r, &series.values[j]);
        for (i, &r) in series.r.iter().enumerate() {
            let tm = distorted_time(t, r, r1);
            let (c1, c2) = (THETA2.eval(tm, 1), THETA2.eval(tm, 2));
            if c1 == 0.0 && c2 == 0.0 {
                continue;
            }
            let md = model.metric_at(&crate::geometry::ChartPoint::new(t, r, 0.0))?;
            let (gtt, gtp, grr) = (md.g_inv[(0, 0)], md.g_inv[(0, 2)], md.g_inv[(1, 1)]);
            let (s1, s2) = distorted_time_r(r, r1);
            let th_t = c1;
            let th_r = c1 * s1;
            let th_tt = c2;
            let th_rr = c2 * s1 * s1 + c1 * s2;
            let a_r = op.at(r).a_r;
            let psi = series.values[j][i];
            let grad_dot = (d[j][i] * gtt + im * psi * gtp) * th_t + psi_r[i] * grr * th_r;
            let box_theta = gtt * th_tt + grr * (th_rr + a_r * th_r);
            row[i] = grad_dot * 2.0 + psi * box_theta;
        }
    }
    let mut f = TimeSeriesField::new(series.m, series.t0, series.dt, series.r.clone(), out, None)?;
    f.cutoff_applied = true;
    f.valid_window = series.valid_window;
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceBoundReport {
    pub k: usize,
    pub q: i32,
    pub q_prime: i32,
    pub tau1: Vec<f64>,
    /// ∫_{R(τ₁, τ₂)} r^q |F_k|².
    pub integrals: Vec<f64>,
    /// integral / ((1 + ω_k^{−q−2})(1 + ω_k τ₁)^{−q'} ℰ_log).
    pub envelope_constants: Vec<f64>,
    pub e_log: f64,
    /// integral at τ₁ = 2T over integral at τ₁ = T.
    pub decay_ratio: f64,
    pub finite: bool,
    pub decays: bool,
}

/// Weighted spacetime norms of F_k from τ₁ ∈ {T, 2T} to the end of the valid window.
pub fn source_term_bound_check(
    model: &SpacetimeModel,
    series: &TimeSeriesField,
    bank: &MollifierBank,
    k: usize,
    q: i32,
    q_prime: i32,
    r1: f64,
    t_ref: f64,
) -> Result<SourceBoundReport> {
    bank.check_k(k)?;
    let f = source_term(model, series, r1)?;
    let fk = project_component(&f, bank, Band::K(k))?;
    let e_log = energy::weighted_energy_log(model, &series.snapshot(0)?)?;
    let wk = bank.omegas[k];
    let t2 = fk.valid_window.1;
    let weight = |r: f64| r.abs().powi(q);
    let tau1 = vec![t_ref, 2.0 * t_ref];
    let integrals: Vec<f64> = tau1
        .iter()
        .map(|&t1| spacetime_integral(model, &fk, &fk.values, &weight, (t1, t2), (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    let envelope_constants = tau1
        .iter()
        .zip(&integrals)
        .map(|(&t1, &i)| i / ((1.0 + wk.powi(-q - 2)) * (1.0 + wk * t1).powi(-q_prime) * e_log))
        .collect();
    let decay_ratio = integrals[1] / integrals[0];
    let finite = integrals.iter().all(|v| v.is_finite()) && e_log.is_finite();
    Ok(SourceBoundReport {
        k,
        q,
        q_prime,
        tau1,
        integrals,
        envelope_constants,
        e_log,
        decay_ratio,
        finite,
        decays: decay_ratio < 1.0,
    })
}

/// ‖ψ_{≥ω₊}‖² / ‖ψ_c‖² over the valid window.
pub fn high_frequency_fraction(series_c: &TimeSeriesField, bank: &MollifierBank) -> Result<f64> {
    let hi = project_component(series_c, bank, Band::High)?;
    let (a, b) = hi.valid_window;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..hi.len() {
        let t = hi.time(j);
        if t < a || t > b {
            continue;
        }
        num += hi.values[j].iter().map(|z| z.norm_sqr()).sum::<f64>();
        den += series_c.values[j].iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok(num / den.max(f64::MIN_POSITIVE))
}

/// ∫|ψ₀|² / (ω₀² ∫(|Tφ|² + |∂_rφ|² + |φ|²)) with ψ = Tφ, both over the valid window of ψ₀.
pub fn low_frequency_diagnostic(
    model: &SpacetimeModel,
    phi: &TimeSeriesField,
    bank: &MollifierBank,
    r1: f64,
) -> Result<f64> {
    let psi = TimeSeriesField { values: phi.derivative(), time_derivative: None, ..phi.clone() };
    let psi_c = temporal_cutoff(&psi, r1)?;
    let p0 = project_component(&psi_c, bank, Band::K(0))?;
    let win = p0.valid_window;
    let one = |_: f64| 1.0;
    let all = (f64::NEG_INFINITY, f64::INFINITY);
    let num = spacetime_integral(model, &p0, &p0.values, &one, win, all);
    let dphi_r: Vec<Vec<C>> = phi.values.iter().map(|row| energy::gradient(&phi.r, row)).collect();
    let den = spacetime_integral(model, phi, &psi.values, &one, win, all)
        + spacetime_integral(model, phi, &dphi_r, &one, win, all)
        + spacetime_integral(model, phi, &phi.values, &one, win, all);
    Ok(num / (bank.omega0.powi(2) * den).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone_series(omega: f64, dt: f64, n: usize, r: Vec<f64>) -> TimeSeriesField {
        let values = (0..n).map(|j| vec![C::new(0.0, omega * j as f64 * dt).exp(); r.len()]).collect();
        TimeSeriesField::new(0, 0.0, dt, r, values, None).unwrap()
    }

    #[test]
    fn distorted_time_examples() {
        let r1 = 10.0;
        assert_eq!(distorted_time(3.0, 5.0, r1), 3.0);
        assert!((distorted_time(0.0, 12.0, r1) - 1.0).abs() < 1e-15);
        for i in 0..200 {
            let r = 8.0 + 0.03 * i as f64;
            let (d, _) = distorted_time_r(r, r1);
            let fd = (distorted_time(0.0, r + 1e-6, r1) - distorted_time(0.0, r - 1e-6, r1)) / 2e-6;
            assert!((d - fd).abs() < 1e-6);
            // causal compatibility in the sense of the slope bound stated for t₋
            assert!(d >= 0.0 && d <= 0.5 + 0.5 * theta1(r1).eval(r, 1) * (r - r1) + 1e-12);
        }
    }

    #[test]
    fn symbols_partition_and_reproduce() {
        let bank = MollifierBank::new(0.25, 10.0).unwrap();
        assert_eq!(bank.n, 6);
        for i in 0..4000 {
            let w = -40.0 + 0.02 * i as f64;
            let s: f64 = (0..=bank.n).map(|k| bank.zeta_symbol(k, w)).sum();
            assert!((s - bank.low_symbol(w)).abs() < 1e-12);
            for k in 0..=bank.n {
                let z = bank.zeta_symbol(k, w);
                assert!((z - bank.xi_symbol(k, w) * z).abs() < 1e-12);
                let lo = if k == 0 { 0.0 } else { bank.omegas[k - 1] };
                if w.abs() < lo || w.abs() > 2.0 * bank.omegas[k] {
                    assert_eq!(z, 0.0);
                }
                if k >= 1 {
                    let back = bank.xi_tilde_symbol(k, w) * C::new(0.0, w) * z;
                    assert!((back.re - z).abs() < 1e-12 && back.im.abs() < 1e-12);
                }
            }
            assert!(bank.low_symbol(w) == 0.0 || w.abs() <= 4.0 * bank.omega_plus);
        }
    }

    #[test]
    fn kernel_matches_quadrature_and_schwartz_bound() {
        // oracle: (1/π)∫₀^{2ω} S(ω') cos(ω' t) dω' by composite Simpson
        let bank = MollifierBank::new(0.5, 4.0).unwrap();
        for (k, t) in [(0usize, 0.0), (0, 1.3), (2, 0.7), (2, 4.1), (3, 12.0)] {
            let top = 2.0 * bank.omegas[k];
            let n = 20000;
            let h = top / n as f64;
            let f = |w: f64| bank.zeta_symbol(k, w) * (w * t).cos();
            let mut s = f(0.0) + f(top);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(h * i as f64);
            }
            let oracle = s * h / 3.0 / PI;
            let got = bank.kernel(Band::K(k), t);
            assert!((got - oracle).abs() < 1e-6 * (1.0 + oracle.abs()), "k={k} t={t}: {got} vs {oracle}");
        }
        let c4 = bank.schwartz_constants(4);
        println!("Schwartz constants (m = 4): {c4:?}");
        assert!(c4.iter().all(|c| c.is_finite() && *c < 1e4));
        // k ≥ 1 kernels are exact rescalings of one another
        assert!((c4[1] - c4[3]).abs() < 1e-12);
    }

    #[test]
    fn tone_in_band_is_recovered() {
        let bank = MollifierBank::new(0.5, 8.0).unwrap();
        let k = 3;
        let w = bank.omegas[k];
        let span = bank.tail_span(Band::K(0), TAIL_TOLERANCE);
        let dt = 0.05;
        let n = ((2.5 * span) / dt) as usize;
        let raw = tone_series(w, dt, n, vec![1.0]);
        let c = temporal_cutoff(&raw, 1e9).unwrap();
        let dec = decompose(&c, &bank).unwrap();
        let (a, b) = dec.bands[k].valid_window;
        let mut err = [0.0f64; 8];
        for j in 0..n {
            let t = raw.time(j);
            if t < a + 1.0 + span || t > b {
                continue;
            }
            for (kk, band) in dec.bands.iter().enumerate() {
                let target = if kk == k { raw.values[j][0] } else { C::new(0.0, 0.0) };
                err[kk] = err[kk].max((band.values[j][0] - target).norm());
            }
        }
        println!("tone errors per band: {:?}", &err[..=bank.n]);
        assert!(err[k] < 1e-6);
        for (kk, e) in err.iter().enumerate().take(bank.n + 1) {
            if (kk as i64 - k as i64).abs() >= 2 {
                assert!(*e < 1e-6);
            }
        }
        for j in 0..n {
            let s: C = dec.bands.iter().map(|b| b.values[j][0]).sum();
            assert!((s - dec.low.values[j][0]).norm() < 1e-10);
            assert!((dec.low.values[j][0] + dec.high.values[j][0] - c.values[j][0]).norm() < 1e-14);
        }
    }

    #[test]
    fn dc_lands_in_lowest_band() {
        let bank = MollifierBank::new(0.5, 4.0).unwrap();
        let span = bank.tail_span(Band::K(0), TAIL_TOLERANCE);
        let dt = 0.1;
        let n = (3.0 * span / dt) as usize;
        let c = temporal_cutoff(&tone_series(0.0, dt, n, vec![1.0]), 1e9).unwrap();
        let dec = decompose(&c, &bank).unwrap();
        let j = (2.0 * span / dt) as usize;
        assert!((dec.bands[0].values[j][0] - 1.0).norm() < 1e-6);
        for b in &dec.bands[1..] {
            assert!(b.values[j][0].norm() < 1e-6);
        }
    }

    #[test]
    fn short_window_is_rejected() {
        let bank = MollifierBank::new(0.5, 4.0).unwrap();
        let c = temporal_cutoff(&tone_series(1.0, 0.1, 100, vec![1.0]), 1e9).unwrap();
        let e = project_component(&c, &bank, Band::K(0)).unwrap_err().to_string();
        assert!(e.contains("window too short"));
        let raw = tone_series(1.0, 0.1, 100, vec![1.0]);
        assert!(project_component(&raw, &bank, Band::K(0)).is_err());
    }

    #[test]
    fn cutoff_limits_and_band_mass() {
        let r = vec![1.0, 2.0];
        let n = 400;
        let dt = 0.01;
        let raw = tone_series(3.0, dt, n, r.clone());
        let c = temporal_cutoff(&raw, 100.0).unwrap();
        for j in 0..n {
            let t = raw.time(j);
            let expect = THETA2.eval(t, 0);
            assert!((c.values[j][0] - raw.values[j][0] * expect).norm() < 1e-15);
        }
        // entirely in t₋ ≥ 1 → unchanged, entirely in t₋ ≤ 0 → zero
        let late = TimeSeriesField { t0: 5.0, ..raw.clone() };
        let zero_start = TimeSeriesField { values: vec![vec![C::new(0.0, 0.0); 2]; n], ..late.clone() };
        assert!(temporal_cutoff(&late, 100.0).is_err());
        assert!(temporal_cutoff(&zero_start, 100.0).is_ok());
        let late_ok = temporal_cutoff(&TimeSeriesField { t0: 0.0, ..raw.clone() }, -1e9);
        assert!(late_ok.is_err());
        let early = TimeSeriesField { t0: -20.0, ..raw.clone() };
        let ce = temporal_cutoff(&early, 100.0).unwrap();
        assert!(ce.values.iter().flatten().all(|z| z.norm() == 0.0));
        // transition band mass against direct quadrature of θ₂² over [0, 1]
        let mass: f64 = (0..n).map(|j| c.values[j][0].norm_sqr() * dt).sum::<f64>() - 0.5 * dt * c.values[n - 1][0].norm_sqr();
        let oracle = {
            let m = 100000;
            let h = 1.0 / m as f64;
            (0..m).map(|i| THETA2.eval((i as f64 + 0.5) * h, 0).powi(2) * h).sum::<f64>() + (raw.time(n - 1) - 1.0)
        };
        assert!((mass - oracle).abs() < 1e-6, "{mass} vs {oracle}");
    }

    #[test]
    fn sandwich_ratios() {
        let model = SpacetimeModel::minkowski(2);
        let bank = MollifierBank::new(0.5, 8.0).unwrap();
        let k = 2;
        let wk = bank.omegas[k];
        let r = vec![1.0, 1.5, 2.0];
        let one = |_: f64| 1.0;
        let t = (0.0, 200.0);
        let s1 = sandwich_check(&model, &tone_series(wk, 0.01, 20001, r.clone()), &bank, k, &one, t, 3.0).unwrap();
        let s2 = sandwich_check(&model, &tone_series(2.0 * wk, 0.01, 20001, r.clone()), &bank, k, &one, t, 3.0).unwrap();
        println!("ratios: tone {:.6}, edge {:.6}", s1.ratio, s2.ratio);
        assert!((s1.ratio - 1.0).abs() < 1e-6 && (s2.ratio - 4.0).abs() < 1e-5);
        // broadband in-band signal through the actual projection
        let span = bank.tail_span(Band::K(0), TAIL_TOLERANCE);
        let dt = 0.05;
        let n = (3.0 * span / dt) as usize;
        let values: Vec<Vec<C>> = (0..n)
            .map(|j| {
                let tt = j as f64 * dt;
                let z: C = [0.6, 0.8, 1.1, 1.4, 1.9].iter().map(|f| C::new(0.0, f * wk * tt + f).exp()).sum();
                vec![z; r.len()]
            })
            .collect();
        let raw = TimeSeriesField::new(0, 0.0, dt, r.clone(), values, None).unwrap();
        let pk = project_component(&temporal_cutoff(&raw, 1e9).unwrap(), &bank, Band::K(k)).unwrap();
        let win = (span, pk.valid_window.1);
        let s3 = sandwich_check(&model, &pk, &bank, k, &one, win, 3.0).unwrap();
        println!("broadband ratio {:.4}", s3.ratio);
        assert!(s3.ratio >= 0.25 * 0.9 && s3.ratio <= 4.0 * 1.1 && s3.within_bounds);
        let zero = TimeSeriesField { values: vec![vec![C::new(0.0, 0.0); 3]; 100], ..tone_series(1.0, 0.1, 100, r) };
        assert!(sandwich_check(&model, &zero, &bank, k, &one, (0.0, 5.0), 3.0).is_err());
    }

    #[test]
    fn reproducing_formulas() {
        let bank = MollifierBank::new(0.5, 8.0).unwrap();
        let span = bank.tail_span(Band::K(0), TAIL_TOLERANCE);
        let dt = 0.05;
        let n = (5.0 * span / dt) as usize;
        let values: Vec<Vec<C>> = (0..n)
            .map(|j| {
                let t = j as f64 * dt;
                vec![C::new(0.0, 1.7 * t).exp() + C::new(0.0, -3.1 * t).exp() * 0.5 + C::new(0.0, 0.4 * t).exp()]
            })
            .collect();
        let raw = TimeSeriesField::new(0, 0.0, dt, vec![1.0], values, None).unwrap();
        let c = temporal_cutoff(&raw, 1e9).unwrap();
        let dec = decompose(&c, &bank).unwrap();
        for k in 0..=bank.n {
            let rep = reproducing_check(&dec.bands[k], &bank, k).unwrap();
            println!("k={k} residual {:.3e} anti {:?} norm {:.3e}", rep.residual, rep.residual_antiderivative, rep.norm);
            if rep.norm > 1e-3 {
                assert!(rep.residual < 1e-6);
                if let Some(a) = rep.residual_antiderivative {
                    assert!(a < 1e-6);
                }
            }
        }
    }

    #[test]
    fn parseval_normalisation() {
        let n = 1000;
        let x: Vec<C> = (0..n).map(|j| C::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos() * 0.3)).collect();
        let mut y = x.clone();
        FftPlanner::new().plan_fft_forward(n).process(&mut y);
        let a: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let b: f64 = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn high_frequency_part_decays_with_smoothness() {
        // (1 − t²)₊^p has spectrum ~ ω^{-(p+1)}, so ‖ψ_{≥ω₊}‖² ~ ω₊^{-2p-1}
        let p = 3;
        let dt = 0.002;
        let mut fr = vec![];
        let pluses = [4.0, 8.0, 16.0, 32.0];
        for &wp in &pluses {
            let bank = MollifierBank::new(0.5, wp).unwrap();
            let span = bank.tail_span(Band::High, TAIL_TOLERANCE);
            let center = span + 2.0;
            let n = ((2.0 * span + 4.0) / dt) as usize + 8;
            let values = (0..n)
                .map(|j| {
                    let t = j as f64 * dt - center;
                    vec![C::new((1.0 - t * t).max(0.0).powi(p), 0.0)]
                })
                .collect();
            let s = TimeSeriesField::new(0, 0.0, dt, vec![1.0], values, None).unwrap();
            let c = temporal_cutoff(&s, 1e9).unwrap();
            let full = TimeSeriesField { valid_window: (0.0, c.t_end() + span + 1.0), ..c };
            fr.push(high_frequency_fraction(&full, &bank).unwrap());
        }
        let lx: Vec<f64> = pluses.iter().map(|v: &f64| v.ln()).collect();
        let slope = (fr[3].ln() - fr[1].ln()) / (lx[3] - lx[1]);
        println!("high-frequency fractions {fr:?}, slope {slope:.3}");
        assert!(slope < -2.0 * p as f64);
    }

    #[test]
    fn flat_pulse_finite_speed_and_tails() {
        use crate::evolution::{evolve, ModeData, OuterBc, RunConfig};
        let model = SpacetimeModel::minkowski(2);
        let mut cfg = RunConfig::vortex(1.0, 0.3, vec![1], 60.0, 1201, 30.0);
        cfg.model = model.clone();
        cfg.r_min = 0.0;
        cfg.outer_bc = OuterBc::Reflecting;
        cfg.output_every = 0.1;
        cfg.keep_snapshots = true;
        let g = cfg.grid();
        let bump = Cutoff::Window { a: 1.0, b: 2.0, c: 2.0, d: 3.0 };
        let u: Vec<C> = g.iter().map(|&r| C::new(bump.eval(r, 0), 0.0)).collect();
        let s = evolve(&cfg, &[ModeData { m: 1, u, ut: vec![C::new(0.0, 0.0); g.len()] }]).unwrap();
        let series = TimeSeriesField::from_snapshots(&s.snapshots[&1]).unwrap();
        // data supported in r < 3: nothing beyond 3 + t + margin
        let j = series.len() - 1;
        let t = series.time(j);
        let rep = tail_decay_check(&model, &series, j, &[3.0 + t + 1.0]).unwrap();
        println!("shell energy beyond the light cone: {:.3e}", rep.shell_energy[0]);
        assert!(rep.shell_energy[0] < 1e-10);
        let c = temporal_cutoff(&series, 1e9).unwrap();
        let bank = MollifierBank::new(0.9, 4.0).unwrap();
        let span = bank.tail_span(Band::K(2), TAIL_TOLERANCE);
        if c.t_end() > span {
            let p2 = project_component(&c, &bank, Band::K(2)).unwrap();
            let rep = tail_decay_check(&model, &p2, 0, &[6.0, 12.0, 24.0]).unwrap();
            println!("{:?}", rep.weighted);
            assert!(rep.monotone);
        }
    }

    #[test]
    fn source_term_is_commutator_of_box_with_cutoff() {
        // oracle: F = □(θ₂ψ) − θ₂□ψ, with □ from the reduced mode operator by finite differences
        let model = SpacetimeModel::vortex(1.0, 0.3);
        let m = 2;
        let r1 = 2.0;
        let psi = |t: f64, r: f64| C::new(0.0, 0.7 * t).exp() * (-(r - 2.5f64).powi(2)) .exp() * C::new(1.0, 0.3 * r);
        let dt = 0.01;
        let r: Vec<f64> = (0..401).map(|i| 0.5 + 0.01 * i as f64).collect();
        let values: Vec<Vec<C>> = (0..301).map(|j| r.iter().map(|&x| psi(-1.5 + j as f64 * dt, x)).collect()).collect();
        let deriv: Vec<Vec<C>> = (0..301)
            .map(|j| r.iter().map(|&x| (psi(-1.5 + j as f64 * dt + 1e-6, x) - psi(-1.5 + j as f64 * dt - 1e-6, x)) / 2e-6).collect())
            .collect();
        let series = TimeSeriesField::new(m, -1.5, dt, r.clone(), values, Some(deriv)).unwrap();
        let f = source_term(&model, &series, r1).unwrap();
        let op = model.wave_operator_coefficients(m).unwrap();
        let box_of = |g: &dyn Fn(f64, f64) -> C, t: f64, x: f64| {
            let h = 1e-3;
            let c = op.at(x);
            let u = g(t, x);
            let ut = (g(t + h, x) - g(t - h, x)) / (2.0 * h);
            let utt = (g(t + h, x) - u * 2.0 + g(t - h, x)) / (h * h);
            let ur = (g(t, x + h) - g(t, x - h)) / (2.0 * h);
            let urr = (g(t, x + h) - u * 2.0 + g(t, x - h)) / (h * h);
            c.a_tt * utt + c.a_t * ut + c.a_rr * urr + c.a_r * ur + c.a_0 * u
        };
        let cut = |t: f64, x: f64| psi(t, x) * THETA2.eval(distorted_time(t, x, r1), 0);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for j in (20..280).step_by(13) {
            for i in (20..380).step_by(17) {
                let (t, x) = (series.time(j), r[i]);
                let oracle = box_of(&cut, t, x) - box_of(&psi, t, x) * THETA2.eval(distorted_time(t, x, r1), 0);
                worst = worst.max((f.values[j][i] - oracle).norm());
                scale = scale.max(oracle.norm());
            }
        }
        println!("max |F - oracle| = {worst:.3e} (scale {scale:.3e})");
        assert!(worst < 2e-3 * scale);
        // support on the band 0 ≤ t₋ ≤ 1
        for j in 0..series.len() {
            for (i, &x) in r.iter().enumerate() {
                let tm = distorted_time(series.time(j), x, r1);
                if !(0.0..=1.0).contains(&tm) {
                    assert_eq!(f.values[j][i].norm(), 0.0);
                }
            }
        }
        let zero = TimeSeriesField { values: vec![vec![C::new(0.0, 0.0); r.len()]; 301], time_derivative: None, ..series };
        assert!(source_term(&model, &zero, r1).unwrap().values.iter().flatten().all(|z| z.norm() == 0.0));
    }
}
