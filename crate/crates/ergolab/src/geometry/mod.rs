//! Stationary metric families with ergoregions, their inverses, frame fields and the
//! per-azimuthal-mode reduction of the wave operator.
//!
//! Coordinates are `(t, r, φ)` for the 2+1 families and `(t, r, ϑ, φ)` for the 3+1 ones.

pub mod cutoff;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
pub use cutoff::{smooth_cutoff, smoothstep, theta3, theta4, Cutoff, CutoffLibrary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    HydroVortex,
    HydroVortexDoubled,
    BumpErgoregion3D,
    AlmostSchwarzschild3D,
    Minkowski,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerBc {
    Dirichlet,
    Neumann,
    Doubled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartBounds {
    pub r_min: f64,
    pub r_max: f64,
}

/// A member of one of the metric families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeModel {
    pub kind: ModelKind,
    /// Circulation of the vortex.
    pub c: f64,
    /// Inner radius of the vortex (the wall, or the gluing radius of the double).
    pub delta: f64,
    /// Mass parameter of the almost-Schwarzschild example.
    pub mass: f64,
    /// Multiplies (θ_r̄ θ_ϑ)² in g_tt of the bump example.
    pub bump_amplitude: f64,
    /// Number of spatial dimensions (2 or 3); only free for Minkowski.
    pub spatial_dim: usize,
    pub inner_bc: InnerBc,
    pub chart: ChartBounds,
    pub theta_r: Cutoff,
    pub theta_vartheta: Cutoff,
}

/// A point of the coordinate chart. `theta` is ignored by 2+1 families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl ChartPoint {
    pub fn new(t: f64, r: f64, phi: f64) -> Self {
        ChartPoint { t, r, theta: PI / 2.0, phi }
    }

    pub fn new3(t: f64, r: f64, theta: f64, phi: f64) -> Self {
        ChartPoint { t, r, theta, phi }
    }

    /// Coordinate vector in chart order for a chart of dimension `n`.
    pub fn coords(&self, n: usize) -> Vec<f64> {
        if n == 3 {
            vec![self.t, self.r, self.phi]
        } else {
            vec![self.t, self.r, self.theta, self.phi]
        }
    }

    pub fn from_coords(x: &[f64]) -> Self {
        if x.len() == 3 {
            ChartPoint::new(x[0], x[1], x[2])
        } else {
            ChartPoint::new3(x[0], x[1], x[2], x[3])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricData {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub sqrt_abs_det: f64,
    /// g(T, T).
    pub g_tt: f64,
    /// Reference Riemannian metric dt² + g_Σ.
    pub g_ref: DMatrix<f64>,
}

impl MetricData {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn negative_eigenvalues(&self) -> usize {
        SymmetricEigen::new(self.g.clone())
            .eigenvalues
            .iter()
            .filter(|&&l| l < 0.0)
            .count()
    }

    /// Lapse of the t-foliation, 1/√(−g^{tt}).
    pub fn lapse(&self) -> f64 {
        1.0 / (-self.g_inv[(0, 0)]).sqrt()
    }

    /// Future unit normal to {t = const}, n^μ = −α g^{μt}.
    pub fn unit_normal(&self) -> DVector<f64> {
        let a = self.lapse();
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|mu| -a * self.g_inv[(mu, 0)]))
    }

    pub fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.g * y)[(0, 0)]
    }
}

impl SpacetimeModel {
    fn base(kind: ModelKind, spatial_dim: usize, r_min: f64, r_max: f64) -> Self {
        SpacetimeModel {
            kind,
            c: 0.0,
            delta: 0.0,
            mass: 0.0,
            bump_amplitude: 2.0,
            spatial_dim,
            inner_bc: InnerBc::Dirichlet,
            chart: ChartBounds { r_min, r_max },
            theta_r: Cutoff::Window { a: 3.0, b: 4.0, c: 5.0, d: 6.0 },
            theta_vartheta: Cutoff::Window {
                a: PI / 6.0,
                b: PI / 4.0,
                c: 3.0 * PI / 4.0,
                d: 5.0 * PI / 6.0,
            },
        }
    }

    /// Hydrodynamic vortex with circulation `c` and wall at `delta`.
    pub fn vortex(c: f64, delta: f64) -> Self {
        SpacetimeModel { c, delta, ..Self::base(ModelKind::HydroVortex, 2, delta, f64::INFINITY) }
    }

    /// The vortex glued to its mirror image across r̄ = δ.
    pub fn vortex_doubled(c: f64, delta: f64) -> Self {
        SpacetimeModel {
            c,
            delta,
            inner_bc: InnerBc::Doubled,
            ..Self::base(ModelKind::HydroVortexDoubled, 2, f64::NEG_INFINITY, f64::INFINITY)
        }
    }

    pub fn bump3d() -> Self {
        Self::base(ModelKind::BumpErgoregion3D, 3, 0.0, f64::INFINITY)
    }

    pub fn almost_schwarzschild(mass: f64) -> Self {
        SpacetimeModel {
            mass,
            bump_amplitude: 1.0,
            ..Self::base(ModelKind::AlmostSchwarzschild3D, 3, 2.0 * mass, f64::INFINITY)
        }
    }

    /// Flat space in polar (d = 2) or spherical (d = 3) coordinates.
    pub fn minkowski(spatial_dim: usize) -> Self {
        Self::base(ModelKind::Minkowski, spatial_dim, 0.0, f64::INFINITY)
    }

    pub fn with_inner_bc(mut self, bc: InnerBc) -> Self {
        self.inner_bc = bc;
        self
    }

    /// Spacetime dimension.
    pub fn dim(&self) -> usize {
        self.spatial_dim + 1
    }

    pub fn phi_index(&self) -> usize {
        self.spatial_dim
    }

    pub fn is_vortex(&self) -> bool {
        matches!(self.kind, ModelKind::HydroVortex | ModelKind::HydroVortexDoubled)
    }

    pub fn has_horizon(&self) -> bool {
        self.kind == ModelKind::AlmostSchwarzschild3D
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_vortex() && !(self.c > self.delta && self.delta > 0.0) {
            return Err(LabError::Domain(format!(
                "vortex needs C > delta > 0, got C = {}, delta = {}",
                self.c, self.delta
            )));
        }
        if self.kind == ModelKind::AlmostSchwarzschild3D && self.mass <= 0.0 {
            return Err(LabError::Domain("mass must be positive".into()));
        }
        if self.spatial_dim != 2 && self.spatial_dim != 3 {
            return Err(LabError::Domain("spatial dimension must be 2 or 3".into()));
        }
        let expect = match self.kind {
            ModelKind::HydroVortex | ModelKind::HydroVortexDoubled => Some(2),
            ModelKind::BumpErgoregion3D | ModelKind::AlmostSchwarzschild3D => Some(3),
            ModelKind::Minkowski => None,
        };
        if let Some(d) = expect {
            if d != self.spatial_dim {
                return Err(LabError::Domain(format!("{:?} is {d}-dimensional", self.kind)));
            }
        }
        Ok(())
    }

    /// Areal radius of the vortex family: ρ = |r̄ − δ| + δ on the double, r̄ otherwise.
    fn areal(&self, r: f64) -> (f64, f64) {
        if self.kind == ModelKind::HydroVortexDoubled {
            ((r - self.delta).abs() + self.delta, sign0(r - self.delta))
        } else {
            (r, 1.0)
        }
    }

    fn check_point(&self, p: &ChartPoint) -> Result<()> {
        let ChartBounds { r_min, r_max } = self.chart;
        let ok = match self.kind {
            ModelKind::HydroVortex => p.r >= self.delta && p.r >= r_min && p.r <= r_max,
            ModelKind::HydroVortexDoubled => p.r >= r_min && p.r <= r_max,
            ModelKind::AlmostSchwarzschild3D => p.r > 2.0 * self.mass && p.r <= r_max,
            _ => p.r > 0.0 && p.r >= r_min && p.r <= r_max,
        };
        if !ok || !p.r.is_finite() || !p.t.is_finite() || !p.phi.is_finite() {
            return Err(LabError::Domain(format!("r = {} outside chart of {:?}", p.r, self.kind)));
        }
        if self.spatial_dim == 3 && !(0.0..=PI).contains(&p.theta) {
            return Err(LabError::Domain(format!("theta = {} outside [0, pi]", p.theta)));
        }
        Ok(())
    }

    /// Metric components in the chart.
    pub fn components(&self, p: &ChartPoint) -> DMatrix<f64> {
        let n = self.dim();
        let ph = self.phi_index();
        let mut g = DMatrix::zeros(n, n);
        match self.kind {
            ModelKind::HydroVortex | ModelKind::HydroVortexDoubled => {
                let (rho, _) = self.areal(p.r);
                g[(0, 0)] = -(1.0 - self.c * self.c / (rho * rho));
                g[(0, 2)] = -self.c;
                g[(2, 0)] = -self.c;
                g[(1, 1)] = 1.0;
                g[(2, 2)] = rho * rho;
            }
            ModelKind::Minkowski => {
                g[(0, 0)] = -1.0;
                g[(1, 1)] = 1.0;
                if self.spatial_dim == 2 {
                    g[(2, 2)] = p.r * p.r;
                } else {
                    g[(2, 2)] = p.r * p.r;
                    g[(3, 3)] = (p.r * p.theta.sin()).powi(2);
                }
            }
            ModelKind::BumpErgoregion3D => {
                let b = self.theta_r.eval(p.r, 0) * self.theta_vartheta.eval(p.theta, 0);
                g[(0, 0)] = -(1.0 - self.bump_amplitude * b * b);
                g[(0, ph)] = -500.0 * b;
                g[(ph, 0)] = -500.0 * b;
                g[(1, 1)] = 1.0;
                g[(2, 2)] = p.r * p.r;
                g[(3, 3)] = (p.r * p.theta.sin()).powi(2);
            }
            ModelKind::AlmostSchwarzschild3D => {
                let m = self.mass;
                let b = self.theta_r.eval(p.r / m, 0) * self.theta_vartheta.eval(p.theta, 0);
                let f = 1.0 - 2.0 * m / p.r;
                g[(0, 0)] = -(f - self.bump_amplitude * b * b);
                g[(0, ph)] = -500.0 * m * b;
                g[(ph, 0)] = -500.0 * m * b;
                g[(1, 1)] = 1.0 / f;
                g[(2, 2)] = p.r * p.r;
                g[(3, 3)] = (p.r * p.theta.sin()).powi(2);
            }
        }
        g
    }

    /// ∂g/∂x^k. The families are stationary and axisymmetric, so t- and φ-derivatives vanish
    /// exactly; r and ϑ derivatives use a fourth-order central difference.
    pub fn components_derivative(&self, p: &ChartPoint, k: usize) -> DMatrix<f64> {
        let n = self.dim();
        if k == 0 || k == self.phi_index() {
            return DMatrix::zeros(n, n);
        }
        let h = 1e-4 * (1.0 + p.r.abs());
        let shift = |s: f64| {
            let mut q = *p;
            if k == 1 {
                q.r += s;
            } else {
                q.theta += s;
            }
            self.components(&q)
        };
        (shift(-2.0 * h) - shift(2.0 * h) + (shift(h) - shift(-h)) * 8.0) / (12.0 * h)
    }

    /// Metric, inverse, volume density and reference metric at a chart point.
    pub fn metric_at(&self, p: &ChartPoint) -> Result<MetricData> {
        self.check_point(p)?;
        let g = self.components(p);
        let n = self.dim();
        let ph = self.phi_index();
        // (t, φ) block inverted in closed form, the rest is diagonal.
        let (a, b, c) = (g[(0, 0)], g[(0, ph)], g[(ph, ph)]);
        let d_block = a * c - b * b;
        let mut det = d_block;
        for i in 1..ph {
            det *= g[(i, i)];
        }
        if det.abs() < 1e-14 {
            return Err(LabError::Signature(format!("degenerate metric, det = {det:e}")));
        }
        let mut g_inv = DMatrix::zeros(n, n);
        g_inv[(0, 0)] = c / d_block;
        g_inv[(0, ph)] = -b / d_block;
        g_inv[(ph, 0)] = -b / d_block;
        g_inv[(ph, ph)] = a / d_block;
        for i in 1..ph {
            g_inv[(i, i)] = 1.0 / g[(i, i)];
        }
        let mut g_ref = DMatrix::zeros(n, n);
        g_ref[(0, 0)] = 1.0;
        for i in 1..n {
            g_ref[(i, i)] = g[(i, i)];
        }
        let sqrt_abs_det = match self.kind {
            ModelKind::HydroVortex | ModelKind::HydroVortexDoubled => self.areal(p.r).0,
            _ => det.abs().sqrt(),
        };
        Ok(MetricData { g_tt: g[(0, 0)], g, g_inv, sqrt_abs_det, g_ref })
    }

    /// g(T, T): positive inside the ergoregion.
    pub fn ergoregion_indicator(&self, p: &ChartPoint) -> Result<f64> {
        Ok(self.metric_at(p)?.g_tt)
    }

    /// Globally timelike field N = ∂_t − (g_tφ/g_φφ)∂_φ with a grid certificate of g(N, N) < 0.
    pub fn timelike_observer_n(&self) -> Result<FrameFields> {
        self.validate()?;
        if self.has_horizon() {
            return Err(LabError::Precondition("model has an event horizon".into()));
        }
        let mut worst = f64::NEG_INFINITY;
        let (lo, hi) = match self.kind {
            ModelKind::HydroVortex => (self.delta, self.delta + 50.0 * self.c),
            ModelKind::HydroVortexDoubled => (self.delta - 50.0 * self.c, self.delta + 50.0 * self.c),
            _ => (0.05, 20.0),
        };
        let nth = if self.spatial_dim == 3 { 64 } else { 1 };
        for i in 0..=2000 {
            let r = lo + (hi - lo) * i as f64 / 2000.0;
            for j in 0..nth {
                let theta = if nth == 1 { PI / 2.0 } else { PI * (j as f64 + 0.5) / nth as f64 };
                let p = ChartPoint::new3(0.0, r, theta, 0.0);
                let m = self.metric_at(&p)?;
                let nv = self.observer_n(&p);
                worst = worst.max(m.dot(&nv, &nv));
            }
        }
        if worst >= 0.0 {
            return Err(LabError::Construction(format!("g(N,N) reaches {worst}")));
        }
        Ok(FrameFields { model: self.clone(), max_g_nn: worst })
    }

    /// Components of N at a point (no certificate).
    pub fn observer_n(&self, p: &ChartPoint) -> DVector<f64> {
        let g = self.components(p);
        let ph = self.phi_index();
        let mut v = DVector::zeros(self.dim());
        v[0] = 1.0;
        if self.is_vortex() {
            let (rho, _) = self.areal(p.r);
            v[ph] = self.c / (rho * rho);
        } else if g[(ph, ph)] > 0.0 {
            v[ph] = -g[(0, ph)] / g[(ph, ph)];
        }
        v
    }

    /// Reduced radial operator for the mode e^{imφ}.
    pub fn wave_operator_coefficients(&self, m: i64) -> Result<ModeOperator> {
        if self.spatial_dim != 2 {
            return Err(LabError::Unsupported(format!(
                "per-mode radial reduction needs a 2+1 axisymmetric model, got {:?}",
                self.kind
            )));
        }
        Ok(ModeOperator { model: self.clone(), m })
    }

    /// Signed g(T,T) scan on a uniform radial grid at ϑ = π/2.
    pub fn scan_ergoregion(&self, r_lo: f64, r_hi: f64, n: usize) -> Result<Vec<(f64, f64)>> {
        (0..n)
            .map(|i| {
                let r = r_lo + (r_hi - r_lo) * i as f64 / (n - 1) as f64;
                Ok((r, self.ergoregion_indicator(&ChartPoint::new(0.0, r, 0.0))?))
            })
            .collect()
    }
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Distinguished vector fields T, N, Φ with the certificate max g(N, N) on the scan grid.
#[derive(Debug, Clone)]
pub struct FrameFields {
    pub model: SpacetimeModel,
    pub max_g_nn: f64,
}

impl FrameFields {
    pub fn t(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.model.dim());
        v[0] = 1.0;
        v
    }

    pub fn n(&self, p: &ChartPoint) -> DVector<f64> {
        self.model.observer_n(p)
    }

    pub fn phi(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.model.dim());
        v[self.model.phi_index()] = 1.0;
        v
    }
}

/// Coefficients of □_g(u e^{imφ}) e^{−imφ} = a_tt u_tt + a_tr u_tr + a_rr u_rr + a_t u_t + a_r u_r + a_0 u.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoefficients {
    pub a_tt: f64,
    pub a_tr: f64,
    pub a_rr: f64,
    pub a_t: Complex64,
    pub a_r: f64,
    pub a_0: f64,
}

/// Flux-form data of the reduced equation:
/// `w u_tt − i b u_t = ∂_r(p u_r) + q u` multiplied through by √|g|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxCoefficients {
    pub sqrt_g: f64,
    pub w: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub model: SpacetimeModel,
    pub m: i64,
}

impl ModeOperator {
    fn inverse_parts(&self, r: f64) -> (f64, f64, f64, f64, f64) {
        let model = &self.model;
        let (rho, drho) = model.areal(r);
        let (gtt, gtp, gpp) = match model.kind {
            ModelKind::HydroVortex | ModelKind::HydroVortexDoubled => {
                let c = model.c;
                (-1.0, -c / (rho * rho), (1.0 - c * c / (rho * rho)) / (rho * rho))
            }
            _ => (-1.0, 0.0, 1.0 / (r * r)),
        };
        // g^{rr} = 1 and √|g| = ρ for every 2+1 family
        (gtt, gtp, gpp, rho, drho)
    }

    pub fn at(&self, r: f64) -> ModeCoefficients {
        let (gtt, gtp, gpp, rho, drho) = self.inverse_parts(r);
        let m = self.m as f64;
        ModeCoefficients {
            a_tt: gtt,
            a_tr: 0.0,
            a_rr: 1.0,
            a_t: Complex64::new(0.0, 2.0 * m * gtp),
            a_r: drho / rho,
            a_0: -m * m * gpp,
        }
    }

    pub fn flux_at(&self, r: f64) -> FluxCoefficients {
        let (gtt, gtp, gpp, rho, _) = self.inverse_parts(r);
        let m = self.m as f64;
        FluxCoefficients {
            sqrt_g: rho,
            w: -rho * gtt,
            b: 2.0 * m * rho * gtp,
            p: rho,
            q: -rho * m * m * gpp,
        }
    }
}

/// Connectivity summary of the ergoregion of a 3+1 bump model in the (r̄, ϑ) rectangle.
#[derive(Debug, Clone, Serialize)]
pub struct ErgoTopology {
    pub inside_cells: usize,
    pub inside_components: usize,
    pub outside_components: usize,
    pub touches_rectangle_edge: bool,
    pub ok: bool,
}

/// Sign-change topology scan of {g(T,T) > 0} over (r_lo, r_hi) × (ϑ_lo, ϑ_hi): the region
/// should be one component without holes, away from the rectangle's edges.
pub fn ergoregion_topology(
    model: &SpacetimeModel,
    (r_lo, r_hi): (f64, f64),
    (th_lo, th_hi): (f64, f64),
    n: usize,
) -> Result<ErgoTopology> {
    let mut inside = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            let r = r_lo + (r_hi - r_lo) * (i as f64 + 0.5) / n as f64;
            let th = th_lo + (th_hi - th_lo) * (j as f64 + 0.5) / n as f64;
            inside[i * n + j] = model.ergoregion_indicator(&ChartPoint::new3(0.0, r, th, 0.0))? > 0.0;
        }
    }
    let count = |want: bool| -> usize {
        let mut seen = vec![false; n * n];
        let mut comps = 0;
        for s in 0..n * n {
            if inside[s] != want || seen[s] {
                continue;
            }
            comps += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(c) = stack.pop() {
                let (i, j) = (c / n, c % n);
                let nb = [
                    (i.wrapping_sub(1), j),
                    (i + 1, j),
                    (i, j.wrapping_sub(1)),
                    (i, j + 1),
                ];
                for (a, b) in nb {
                    if a < n && b < n && inside[a * n + b] == want && !seen[a * n + b] {
                        seen[a * n + b] = true;
                        stack.push(a * n + b);
                    }
                }
            }
        }
        comps
    };
    let inside_cells = inside.iter().filter(|&&b| b).count();
    let inside_components = count(true);
    let outside_components = count(false);
    let touches = (0..n).any(|k| {
        inside[k] || inside[(n - 1) * n + k] || inside[k * n] || inside[k * n + n - 1]
    });
    Ok(ErgoTopology {
        inside_cells,
        inside_components,
        outside_components,
        touches_rectangle_edge: touches,
        ok: inside_components == 1 && outside_components == 1 && !touches,
    })
}
