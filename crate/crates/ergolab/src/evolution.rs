//! Per-azimuthal-mode evolution of □_g φ = 0 on the 2+1 families.
//!
//! Each mode u(t, r) obeys the flux form `w u_tt − i b u_t = ∂_r(p u_r) + q u − √g G`
//! (G a prescribed source, zero for physical runs). The scheme is a staggered leapfrog in
//! (u, π = ∂_t u) with the first-order frame-dragging term treated by a Cayley average:
//!
//! `π^{n+½}(w − i b dt/2) = π^{n−½}(w + i b dt/2) + dt (L u^n − √g G^n)`, `u^{n+1} = u^n + dt π^{n+½}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::energy::{self, EnergyReport, FieldSnapshot};
use crate::error::{LabError, Result};
use crate::geometry::{InnerBc, ModelKind, SpacetimeModel};

type C = Complex64;

/// Field prescribed as a function of (t, r).
pub type FieldFn = Arc<dyn Fn(f64, f64) -> C + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterBc {
    /// Homogeneous Dirichlet; conserves the T-energy.
    Reflecting,
    /// First-order outgoing condition u_t + u_r + u/(2r) = 0.
    Sommerfeld,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: SpacetimeModel,
    pub modes: Vec<i64>,
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub cfl: f64,
    pub t_final: f64,
    pub outer_bc: OuterBc,
    /// Time between recorded diagnostics.
    pub output_every: f64,
    /// Width of the ergoregion neighbourhood used for E_T_ergo.
    pub ergo_delta: f64,
    /// Radii at which |u| is recorded.
    pub probes: Vec<f64>,
    /// Keep full snapshots at every output time.
    pub keep_snapshots: bool,
    /// Fixed time step; the CFL step is used when absent.
    #[serde(default)]
    pub dt: Option<f64>,
}

impl RunConfig {
    /// Reflecting vortex run on [δ, r_max] with defaults for the numerical knobs.
    pub fn vortex(c: f64, delta: f64, modes: Vec<i64>, r_max: f64, n_r: usize, t_final: f64) -> Self {
        RunConfig {
            model: SpacetimeModel::vortex(c, delta),
            modes,
            r_min: delta,
            r_max,
            n_r,
            cfl: 0.5,
            t_final,
            outer_bc: OuterBc::Sommerfeld,
            output_every: 0.5,
            ergo_delta: 0.0,
            probes: vec![],
            keep_snapshots: false,
            dt: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(LabError::Precondition(format!("CFL factor {} outside (0, 0.9]", self.cfl)));
        }
        if self.n_r < 128 {
            return Err(LabError::Precondition(format!("n_r = {} < 128", self.n_r)));
        }
        if !(self.r_max > self.r_min) {
            return Err(LabError::Precondition("r_max must exceed r_min".into()));
        }
        if self.model.is_vortex() && self.r_max < 4.0 * self.model.c {
            return Err(LabError::Precondition("r_max must be at least 4 C".into()));
        }
        if self.model.kind == ModelKind::HydroVortex && (self.r_min - self.model.delta).abs() > 1e-12 {
            return Err(LabError::Precondition("vortex grid must start at the wall r = delta".into()));
        }
        if self.model.kind == ModelKind::HydroVortexDoubled
            && ((self.r_min + self.r_max) / 2.0 - self.model.delta).abs() > 1e-12
        {
            return Err(LabError::Precondition("doubled grid must be symmetric about delta".into()));
        }
        if self.modes.is_empty() {
            return Err(LabError::Precondition("no azimuthal modes".into()));
        }
        if !(self.t_final > 0.0) || !(self.output_every > 0.0) {
            return Err(LabError::Precondition("t_final and output_every must be positive".into()));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        (self.r_max - self.r_min) / (self.n_r - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n_r).map(|i| self.r_min + h * i as f64).collect()
    }

    /// Same run with the grid spacing halved.
    pub fn refined(&self) -> Self {
        RunConfig { n_r: 2 * self.n_r - 1, ..self.clone() }
    }
}

/// Largest characteristic speed of the discrete per-mode operator over the grid, and
/// dt = CFL · h / c_max.
pub fn cfl_dt(config: &RunConfig) -> Result<f64> {
    if !(config.cfl > 0.0 && config.cfl <= 0.9) {
        return Err(LabError::Precondition(format!("CFL factor {} outside (0, 0.9]", config.cfl)));
    }
    let h = config.h();
    let mut c_max: f64 = 0.0;
    for &m in &config.modes {
        let op = config.model.wave_operator_coefficients(m)?;
        for r in config.grid() {
            if config.model.kind == ModelKind::Minkowski && r == 0.0 {
                continue;
            }
            let c = op.at(r);
            if !(c.a_tt < 0.0 && c.a_rr > 0.0) {
                return Err(LabError::Construction(format!(
                    "principal part not hyperbolic at r = {r}: a_tt = {}, a_rr = {}",
                    c.a_tt, c.a_rr
                )));
            }
            let lower = (c.a_0.abs() + c.a_t.norm_sqr() / 4.0) / c.a_rr;
            let speed = (c.a_rr / c.a_tt.abs()).sqrt() * (1.0 + h * h * lower / 4.0).sqrt();
            c_max = c_max.max(speed);
        }
    }
    Ok(config.cfl * h / c_max)
}

/// Initial data of one mode on the run grid: u and ∂_t u at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeData {
    pub m: i64,
    pub u: Vec<C>,
    pub ut: Vec<C>,
}

impl ModeData {
    pub fn zero(m: i64, n: usize) -> Self {
        ModeData { m, u: vec![C::new(0.0, 0.0); n], ut: vec![C::new(0.0, 0.0); n] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EndBc {
    Dirichlet,
    Neumann,
    Sommerfeld,
    /// Values imposed from a prescribed field.
    Prescribed,
}

/// Leapfrog state of a single azimuthal mode.
pub struct ModeSolver {
    pub m: i64,
    pub r: Vec<f64>,
    pub h: f64,
    pub dt: f64,
    pub step_index: usize,
    w: Vec<f64>,
    b: Vec<f64>,
    q: Vec<f64>,
    sqrt_g: Vec<f64>,
    p_half: Vec<f64>,
    radius: Vec<f64>,
    u: Vec<C>,
    u_prev: Vec<C>,
    pi_half: Vec<C>,
    pi_half_prev: Vec<C>,
    left: EndBc,
    right: EndBc,
    source: Option<FieldFn>,
    boundary: Option<FieldFn>,
}

impl ModeSolver {
    pub fn new(config: &RunConfig, data: &ModeData, dt: f64) -> Result<Self> {
        let op = config.model.wave_operator_coefficients(data.m)?;
        let r = config.grid();
        let n = r.len();
        if data.u.len() != n || data.ut.len() != n {
            return Err(LabError::Domain("initial data length does not match the grid".into()));
        }
        let h = config.h();
        let fc: Vec<_> = r.iter().map(|&x| op.flux_at(x)).collect();
        let p_half = (0..n - 1).map(|i| op.flux_at(r[i] + 0.5 * h).p).collect();
        let outer = match config.outer_bc {
            OuterBc::Reflecting => EndBc::Dirichlet,
            OuterBc::Sommerfeld => EndBc::Sommerfeld,
        };
        let left = match config.model.inner_bc {
            InnerBc::Dirichlet => EndBc::Dirichlet,
            InnerBc::Neumann => EndBc::Neumann,
            InnerBc::Doubled => outer,
        };
        let radius = r.iter().map(|&x| energy::weight_radius(&config.model, x)).collect();
        let mut s = ModeSolver {
            m: data.m,
            h,
            dt,
            step_index: 0,
            w: fc.iter().map(|c| c.w).collect(),
            b: fc.iter().map(|c| c.b).collect(),
            q: fc.iter().map(|c| c.q).collect(),
            sqrt_g: fc.iter().map(|c| c.sqrt_g).collect(),
            p_half,
            radius,
            u: data.u.clone(),
            u_prev: data.u.clone(),
            pi_half: data.ut.clone(),
            pi_half_prev: data.ut.clone(),
            left,
            right: outer,
            source: None,
            boundary: None,
            r,
        };
        s.start(&data.ut);
        Ok(s)
    }

    /// Attach a source G = □_g ψ and impose boundary values from `exact`.
    pub fn with_manufactured(mut self, source: FieldFn, exact: FieldFn, ut0: &[C]) -> Self {
        self.source = Some(source);
        self.boundary = Some(exact);
        self.left = EndBc::Prescribed;
        self.right = EndBc::Prescribed;
        self.start(ut0);
        self
    }

    fn lu(&self, i: usize) -> C {
        let u = &self.u;
        (self.p_half[i] * (u[i + 1] - u[i]) - self.p_half[i - 1] * (u[i] - u[i - 1])) / (self.h * self.h)
            + self.q[i] * u[i]
    }

    fn forcing(&self, i: usize, t: f64) -> C {
        match &self.source {
            Some(g) => self.sqrt_g[i] * g(t, self.r[i]),
            None => C::new(0.0, 0.0),
        }
    }

    /// π^{−½} = π⁰ − (dt/2) u_tt⁰ with u_tt⁰ from the discrete equation.
    fn start(&mut self, ut: &[C]) {
        let n = self.r.len();
        let t0 = 0.0;
        let mut pi = ut.to_vec();
        for i in 1..n - 1 {
            let utt = (C::new(0.0, self.b[i]) * ut[i] + self.lu(i) - self.forcing(i, t0)) / self.w[i];
            pi[i] = ut[i] - utt * (0.5 * self.dt);
        }
        self.pi_half = pi.clone();
        self.pi_half_prev = pi;
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    /// Advance u from t_n to t_{n+1}.
    pub fn step(&mut self) -> Result<()> {
        let n = self.r.len();
        let t = self.time();
        let dt = self.dt;
        let mut pi_new = vec![C::new(0.0, 0.0); n];
        for i in 1..n - 1 {
            let ib = C::new(0.0, self.b[i] * dt / 2.0);
            let rhs = self.pi_half[i] * (self.w[i] + ib) + (self.lu(i) - self.forcing(i, t)) * dt;
            pi_new[i] = rhs / (self.w[i] - ib);
        }
        let mut u_new: Vec<C> = self.u.iter().zip(&pi_new).map(|(u, p)| u + p * dt).collect();
        let t_new = t + dt;
        self.apply_end(&mut u_new, 0, t_new);
        self.apply_end(&mut u_new, n - 1, t_new);
        pi_new[0] = (u_new[0] - self.u[0]) / dt;
        pi_new[n - 1] = (u_new[n - 1] - self.u[n - 1]) / dt;
        if !u_new.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(LabError::Numerical { t, msg: format!("non-finite field in mode {}", self.m) });
        }
        self.u_prev = std::mem::replace(&mut self.u, u_new);
        self.pi_half_prev = std::mem::replace(&mut self.pi_half, pi_new);
        self.step_index += 1;
        Ok(())
    }

    fn apply_end(&self, u_new: &mut [C], i: usize, t_new: f64) {
        let n = u_new.len();
        let (bc, inward, inward2) = if i == 0 { (self.left, 1, 2) } else { (self.right, n - 2, n - 3) };
        u_new[i] = match bc {
            EndBc::Dirichlet => C::new(0.0, 0.0),
            EndBc::Neumann => (u_new[inward] * 4.0 - u_new[inward2]) / 3.0,
            EndBc::Sommerfeld => {
                let (dt, h) = (self.dt, self.h);
                let rad = self.radius[i].abs().max(1e-12);
                (self.u[i] / dt + u_new[inward] / h) / (1.0 / dt + 1.0 / h + 0.5 / rad)
            }
            EndBc::Prescribed => self.boundary.as_ref().map(|f| f(t_new, self.r[i])).unwrap_or_default(),
        };
    }

    /// Field at the previous integer step with π averaged across it (second order).
    pub fn lagged_snapshot(&self) -> Result<FieldSnapshot> {
        let pi: Vec<C> = self.pi_half_prev.iter().zip(&self.pi_half).map(|(a, b)| (a + b) * 0.5).collect();
        let t = (self.step_index as f64 - 1.0) * self.dt;
        FieldSnapshot::new(self.m, t, self.r.clone(), self.u_prev.clone(), pi)
    }

    /// Current field values.
    pub fn field(&self) -> &[C] {
        &self.u
    }
}

/// Least-squares exponential fit on the last half of a positive series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
}

impl GrowthFit {
    pub fn excludes_zero(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

/// Fit log y = a + rate · t on samples with t ≥ t_final/2; 95% Student-t interval.
pub fn fit_growth(t: &[f64], y: &[f64]) -> Option<GrowthFit> {
    let t_end = *t.last()?;
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(&ti, &yi)| ti >= t_end / 2.0 && yi > 0.0)
        .map(|(&ti, &yi)| (ti, yi.ln()))
        .collect();
    let n = pts.len();
    if n < 4 {
        return None;
    }
    let nf = n as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let rate = sxy / sxx;
    let resid: f64 = pts.iter().map(|p| (p.1 - my - rate * (p.0 - mt)).powi(2)).sum();
    let se = (resid / (nf - 2.0) / sxx).sqrt();
    let tq = StudentsT::new(0.0, 1.0, nf - 2.0).ok()?.inverse_cdf(0.975);
    Some(GrowthFit { rate, ci_low: rate - tq * se, ci_high: rate + tq * se, samples: n })
}

/// Recorded output of a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub totals: Vec<EnergyReport>,
    pub per_mode: BTreeMap<i64, Vec<EnergyReport>>,
    /// Cumulative boundary energy outflow ∫₀ᵗ(flux_in + flux_out), summed over modes.
    pub cumulative_flux: Vec<f64>,
    /// |u| at each probe radius, per mode and output time.
    pub probes: BTreeMap<i64, Vec<Vec<f64>>>,
    pub snapshots: BTreeMap<i64, Vec<FieldSnapshot>>,
    pub dt: f64,
    pub steps: usize,
}

impl DiagnosticsSeries {
    pub fn times(&self) -> Vec<f64> {
        self.totals.iter().map(|r| r.t).collect()
    }

    /// max_t |E_T(t) + flux(t) − E_T(0)| / |E_T(0)|.
    pub fn ledger_residual(&self) -> f64 {
        let e0 = self.totals[0].e_t_total;
        self.totals
            .iter()
            .zip(&self.cumulative_flux)
            .map(|(r, f)| (r.e_t_total + f - e0).abs())
            .fold(0.0, f64::max)
            / e0.abs().max(f64::MIN_POSITIVE)
    }

    pub fn growth_fit(&self) -> Option<GrowthFit> {
        let e: Vec<f64> = self.totals.iter().map(|r| r.e_n).collect();
        fit_growth(&self.times(), &e)
    }

    /// E_N(T_final) / E_N(T_final / 2), reading the recorded sample nearest to T_final / 2.
    pub fn doubling_ratio(&self) -> f64 {
        let last = self.totals.last().expect("non-empty series");
        let half = last.t / 2.0;
        let mid = self
            .totals
            .iter()
            .min_by(|a, b| (a.t - half).abs().total_cmp(&(b.t - half).abs()))
            .expect("non-empty series");
        last.e_n / mid.e_n
    }
}

struct ModeRun {
    m: i64,
    reports: Vec<EnergyReport>,
    cumulative: Vec<f64>,
    probes: Vec<Vec<f64>>,
    snapshots: Vec<FieldSnapshot>,
    dt: f64,
    steps: usize,
}

fn run_mode(config: &RunConfig, data: &ModeData, dt: f64, n_steps: usize, stride: usize) -> Result<ModeRun> {
    let mut solver = ModeSolver::new(config, data, dt)?;
    let probe_idx: Vec<usize> = config
        .probes
        .iter()
        .map(|&r| (((r - config.r_min) / config.h()).round().max(0.0) as usize).min(config.n_r - 1))
        .collect();
    let mut out = ModeRun { m: data.m, reports: vec![], cumulative: vec![], probes: vec![], snapshots: vec![], dt, steps: n_steps };
    let mut cum = 0.0;
    let mut last_rate: Option<f64> = None;
    for n in 0..=n_steps {
        solver.step()?;
        // boundary fluxes are integrated every step with the trapezoid rule
        let rate = boundary_rate(&solver, config)?;
        if let Some(prev) = last_rate {
            cum += 0.5 * (prev + rate) * dt;
        }
        last_rate = Some(rate);
        if n % stride == 0 || n == n_steps {
            let snap = solver.lagged_snapshot()?;
            let rep = energy::energy_report(&config.model, &snap, config.ergo_delta)?;
            if !rep.is_finite() {
                return Err(LabError::Numerical { t: snap.t, msg: "non-finite diagnostics".into() });
            }
            out.reports.push(rep);
            out.cumulative.push(cum);
            out.probes.push(probe_idx.iter().map(|&i| snap.phi[i].norm()).collect());
            if config.keep_snapshots {
                out.snapshots.push(snap);
            }
        }
    }
    Ok(out)
}

fn boundary_rate(solver: &ModeSolver, config: &RunConfig) -> Result<f64> {
    let n = solver.r.len();
    let pi: Vec<C> = solver.pi_half_prev.iter().zip(&solver.pi_half).map(|(a, b)| (a + b) * 0.5).collect();
    let u = &solver.u_prev;
    let h = solver.h;
    let ur0 = (u[1] * 4.0 - u[2] - u[0] * 3.0) / (2.0 * h);
    let urn = (u[n - 1] * 3.0 - u[n - 2] * 4.0 + u[n - 3]) / (2.0 * h);
    let op = config.model.wave_operator_coefficients(solver.m)?;
    let p0 = op.flux_at(solver.r[0]).p;
    let pn = op.flux_at(solver.r[n - 1]).p;
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(two_pi * p0 * (ur0 * pi[0].conj()).re - two_pi * pn * (urn * pi[n - 1].conj()).re)
}

/// Run all modes to T_final (one worker per mode) and merge the diagnostics in mode order.
pub fn evolve(config: &RunConfig, data: &[ModeData]) -> Result<DiagnosticsSeries> {
    config.validate()?;
    let mut sorted: Vec<&ModeData> = data.iter().collect();
    sorted.sort_by_key(|d| d.m);
    let wanted: Vec<i64> = {
        let mut m = config.modes.clone();
        m.sort();
        m
    };
    if sorted.iter().map(|d| d.m).collect::<Vec<_>>() != wanted {
        return Err(LabError::Precondition("initial data modes differ from the configured modes".into()));
    }
    let dt0 = match config.dt {
        Some(dt) => dt,
        None => cfl_dt(config)?,
    };
    let n_steps = (config.t_final / dt0).ceil() as usize;
    let dt = config.t_final / n_steps as f64;
    let stride = ((config.output_every / dt).round() as usize).max(1);
    let runs: Vec<Result<ModeRun>> = sorted.par_iter().map(|d| run_mode(config, d, dt, n_steps, stride)).collect();
    let mut series = DiagnosticsSeries { dt, steps: n_steps, ..Default::default() };
    for run in runs {
        let run = run?;
        if series.totals.is_empty() {
            series.totals = run.reports.clone();
            series.cumulative_flux = run.cumulative.clone();
        } else {
            for (k, r) in run.reports.iter().enumerate() {
                series.totals[k] = series.totals[k].merge(r);
                series.cumulative_flux[k] += run.cumulative[k];
            }
        }
        series.per_mode.insert(run.m, run.reports);
        series.probes.insert(run.m, run.probes);
        if config.keep_snapshots {
            series.snapshots.insert(run.m, run.snapshots);
        }
        debug_assert!(run.dt == dt && run.steps == n_steps);
    }
    Ok(series)
}

/// Growth rates from two resolutions; the scheme is flagged when the runs disagree by more
/// than the physical rate itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCheck {
    pub coarse: Option<GrowthFit>,
    pub fine: Option<GrowthFit>,
    pub relative_rate_change: f64,
    pub max_log_divergence_rate: f64,
    pub scheme_suspect: bool,
}

pub fn cross_check(coarse: &DiagnosticsSeries, fine: &DiagnosticsSeries) -> CrossCheck {
    let a = coarse.growth_fit();
    let b = fine.growth_fit();
    let rel = match (a, b) {
        (Some(a), Some(b)) => (a.rate - b.rate).abs() / b.rate.abs().max(1e-300),
        _ => f64::INFINITY,
    };
    let mut worst: f64 = 0.0;
    for (x, y) in coarse.totals.iter().zip(&fine.totals) {
        if x.t > 0.0 && x.e_n > 0.0 && y.e_n > 0.0 {
            worst = worst.max((x.e_n / y.e_n).ln().abs() / x.t);
        }
    }
    let rate = b.map(|f| f.rate.abs()).unwrap_or(0.0);
    CrossCheck { coarse: a, fine: b, relative_rate_change: rel, max_log_divergence_rate: worst, scheme_suspect: worst > rate.max(1e-3) }
}

/// Closed-form mode u(t, r) with the derivatives needed to build its source.
#[derive(Clone)]
pub struct ExactMode {
    pub u: FieldFn,
    pub u_t: FieldFn,
    pub u_tt: FieldFn,
    pub u_r: FieldFn,
    pub u_rr: FieldFn,
}

impl ExactMode {
    /// e^{−iωt} e^{−((r − r_c)/σ)²}.
    pub fn gaussian_tone(omega: f64, rc: f64, sigma: f64) -> Self {
        let g = move |r: f64| (-((r - rc) / sigma).powi(2)).exp();
        let gr = move |r: f64| -2.0 * (r - rc) / (sigma * sigma) * g(r);
        let grr = move |r: f64| (4.0 * (r - rc).powi(2) / sigma.powi(4) - 2.0 / (sigma * sigma)) * g(r);
        let e = move |t: f64| C::new(0.0, -omega * t).exp();
        ExactMode {
            u: Arc::new(move |t, r| e(t) * g(r)),
            u_t: Arc::new(move |t, r| C::new(0.0, -omega) * e(t) * g(r)),
            u_tt: Arc::new(move |t, r| -omega * omega * e(t) * g(r)),
            u_r: Arc::new(move |t, r| e(t) * gr(r)),
            u_rr: Arc::new(move |t, r| e(t) * grr(r)),
        }
    }

    /// u = (1 + t + γt²)(a + b r): integrated without truncation error by the scheme on the
    /// flat m = 0 operator.
    pub fn quadratic_linear(gamma: f64, a: f64, b: f64) -> Self {
        ExactMode {
            u: Arc::new(move |t, r| C::new((1.0 + t + gamma * t * t) * (a + b * r), 0.0)),
            u_t: Arc::new(move |t, r| C::new((1.0 + 2.0 * gamma * t) * (a + b * r), 0.0)),
            u_tt: Arc::new(move |_, r| C::new(2.0 * gamma * (a + b * r), 0.0)),
            u_r: Arc::new(move |t, _| C::new((1.0 + t + gamma * t * t) * b, 0.0)),
            u_rr: Arc::new(|_, _| C::new(0.0, 0.0)),
        }
    }

    /// G = □_g(u e^{imφ}) e^{−imφ} from the reduced coefficients.
    pub fn source(&self, model: &SpacetimeModel, m: i64) -> Result<FieldFn> {
        let op = model.wave_operator_coefficients(m)?;
        let s = self.clone();
        Ok(Arc::new(move |t, r| {
            let c = op.at(r);
            c.a_tt * (s.u_tt)(t, r) + c.a_t * (s.u_t)(t, r) + c.a_rr * (s.u_rr)(t, r) + c.a_r * (s.u_r)(t, r)
                + c.a_0 * (s.u)(t, r)
        }))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_r: Vec<usize>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
    pub observed_order: f64,
    /// Orders between successive pairs disagree, or the error sits at round-off.
    pub pre_asymptotic: bool,
    pub at_roundoff: bool,
}

/// Manufactured-solution study over three grids N, 2N−1, 4N−3 with dt ∝ h; the error is the
/// max-norm difference to the exact mode at T_final.
pub fn manufactured_residual(config: &RunConfig, m: i64, exact: &ExactMode) -> Result<ConvergenceReport> {
    let mut cfgs = vec![config.clone()];
    cfgs.push(cfgs[0].refined());
    cfgs.push(cfgs[1].refined());
    let mut errors = vec![];
    let mut ns = vec![];
    for cfg in &cfgs {
        let cfg = RunConfig { modes: vec![m], ..cfg.clone() };
        let dt0 = cfl_dt(&cfg)?;
        let steps = (cfg.t_final / dt0).ceil() as usize;
        let dt = cfg.t_final / steps as f64;
        let r = cfg.grid();
        let data = ModeData {
            m,
            u: r.iter().map(|&x| (exact.u)(0.0, x)).collect(),
            ut: r.iter().map(|&x| (exact.u_t)(0.0, x)).collect(),
        };
        let mut solver = ModeSolver::new(&cfg, &data, dt)?
            .with_manufactured(exact.source(&cfg.model, m)?, exact.u.clone(), &data.ut);
        for _ in 0..steps {
            solver.step()?;
        }
        let t = solver.time();
        let err = solver
            .field()
            .iter()
            .zip(&r)
            .map(|(u, &x)| (u - (exact.u)(t, x)).norm())
            .fold(0.0, f64::max);
        errors.push(err);
        ns.push(cfg.n_r);
    }
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let at_roundoff = errors.iter().all(|&e| e < 1e-11);
    let pre = !at_roundoff && ((orders[0] - orders[1]).abs() > 0.3 || orders.iter().any(|o| !o.is_finite()));
    Ok(ConvergenceReport {
        n_r: ns,
        observed_order: *orders.last().unwrap(),
        errors,
        orders,
        pre_asymptotic: pre,
        at_roundoff,
    })
}

/// Period of the lowest regular m = 0 mode of the unit-speed disk of radius R with Dirichlet
/// outer wall, measured from the zero crossings of u(t, R/3).
pub fn measure_period(times: &[f64], values: &[f64]) -> Option<f64> {
    let mut crossings = vec![];
    for k in 1..values.len() {
        let (a, b) = (values[k - 1], values[k]);
        if a > 0.0 && b <= 0.0 {
            crossings.push(times[k - 1] + (times[k] - times[k - 1]) * a / (a - b));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    Some((crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
}
