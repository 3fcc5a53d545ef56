//! Carleman parameters and the relations that tie R and s to the frequency ω_k.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{ModelKind, SpacetimeModel};

/// Inputs of the weight construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanParams {
    /// Exponent scale s ≫ 1.
    pub s: f64,
    /// Outer radius R ≫ R₀.
    pub big_r: f64,
    pub eps0: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Exponentiation rate in w = e^{l w̄}.
    pub l: f64,
    /// Radius of the inner region, R₀.
    pub big_r0: f64,
    /// Small radius r₀; `None` picks the model default.
    #[serde(default)]
    pub r0: Option<f64>,
    /// Right-hand side γ of the radial elliptic problem for w̄.
    pub gamma: f64,
    /// Lower bound for ε₀ s R^{-9ε₀}.
    pub scale_threshold: f64,
    /// Frequency the parameters were chosen for, if any.
    #[serde(default)]
    pub omega_k: Option<f64>,
}

impl Default for CarlemanParams {
    fn default() -> Self {
        CarlemanParams {
            s: 1.0,
            big_r: 1.0,
            eps0: 0.1,
            delta0: 0.1,
            delta1: 0.05,
            delta2: 0.1,
            l: 2.0,
            big_r0: 16.0,
            r0: None,
            gamma: 0.05,
            scale_threshold: 10.0,
            omega_k: None,
        }
    }
}

/// Constant C in the relations between R, s and ω_k.
pub const RELATION_CONSTANT: f64 = 1.0;

impl CarlemanParams {
    /// r₀ for the model: a quarter of the smallest radius for the vortex, 6 on flat space
    /// (so that the inner boundary of the elliptic problem sits at r = 1).
    pub fn r0_for(&self, model: &SpacetimeModel) -> f64 {
        self.r0.unwrap_or(match model.kind {
            ModelKind::HydroVortex => model.delta / 4.0,
            _ => 6.0,
        })
    }

    /// ε₀ s R^{-9ε₀}.
    pub fn scale_ratio(&self) -> f64 {
        self.eps0 * self.s * self.big_r.powf(-9.0 * self.eps0)
    }

    /// Smallest admissible R^{ε₀}: past 16/ε₀² the r^{-1/2} corrections are below ε₀/4.
    pub fn min_bridge_end(&self) -> f64 {
        (16.0 / (self.eps0 * self.eps0)).max(2.0 * self.big_r0)
    }

    /// Range checks on the raw inputs.
    pub fn validate_ranges(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(LabError::Parameter(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        unit("eps0", self.eps0)?;
        unit("delta0", self.delta0)?;
        unit("delta1", self.delta1)?;
        unit("delta2", self.delta2)?;
        if self.delta2 >= 4.0 / 7.0 {
            return Err(LabError::Parameter(format!(
                "delta2 = {} leaves no room between 4R/3 and R/delta2 for the h transition",
                self.delta2
            )));
        }
        if !(self.s > 0.0 && self.l > 0.0 && self.big_r0 > 0.0 && self.gamma >= 0.0) {
            return Err(LabError::Parameter("s, l, R0 must be positive and gamma non-negative".into()));
        }
        if self.big_r.powf(self.eps0) < self.min_bridge_end() {
            return Err(LabError::Parameter(format!(
                "R^eps0 = {:.4e} is below the bridge minimum {:.4e}",
                self.big_r.powf(self.eps0),
                self.min_bridge_end()
            )));
        }
        Ok(())
    }

    /// Range checks plus the largeness hypothesis on ε₀ s R^{-9ε₀}.
    pub fn validate(&self) -> Result<()> {
        self.validate_ranges()?;
        if self.scale_ratio() < self.scale_threshold {
            return Err(LabError::Parameter(format!(
                "eps0 s R^(-9 eps0) = {:.4e} is below the threshold {}",
                self.scale_ratio(),
                self.scale_threshold
            )));
        }
        Ok(())
    }

    /// Lower bound for R: C max{1, ω^{-1/(1-9ε₀)}, (-log δ₂)^{1/(1-9ε₀)}}.
    pub fn r_lower_bound(omega: f64, eps0: f64, delta2: f64) -> f64 {
        let p = 1.0 / (1.0 - 9.0 * eps0);
        RELATION_CONSTANT * 1f64.max(omega.powf(-p)).max((-delta2.ln()).max(0.0).powf(p))
    }

    /// The interval C^{1/3} max{(1+ω)R^{9ε₀}, -log δ₂} ≤ s ≤ C^{-1/3} R ω.
    pub fn s_bounds(big_r: f64, omega: f64, eps0: f64, delta2: f64) -> (f64, f64) {
        let c = RELATION_CONSTANT.cbrt();
        let lo = c * ((1.0 + omega) * big_r.powf(9.0 * eps0)).max(-delta2.ln());
        let hi = big_r * omega / c;
        (lo, hi)
    }

    /// Checks that s lies in the interval for `omega`.
    pub fn check_s_bounds(&self, omega: f64) -> Result<()> {
        let (lo, hi) = Self::s_bounds(self.big_r, omega, self.eps0, self.delta2);
        if self.s < lo || self.s > hi {
            return Err(LabError::Precondition(format!(
                "s = {:.4e} outside [{lo:.4e}, {hi:.4e}] for omega_k = {omega}",
                self.s
            )));
        }
        Ok(())
    }
}

/// Picks the smallest R on a log grid (16 points per decade) satisfying the lower bound for
/// R, the construction minimum and a non-empty s interval, and takes s at the geometric
/// middle of that interval.
pub fn choose_parameters(omega_k: f64, delta1: f64, eps0: f64, delta2: f64) -> Result<CarlemanParams> {
    choose_parameters_from(&CarlemanParams { delta1, eps0, delta2, ..CarlemanParams::default() }, omega_k)
}

/// As [`choose_parameters`], with the remaining inputs taken from `template`.
pub fn choose_parameters_from(template: &CarlemanParams, omega_k: f64) -> Result<CarlemanParams> {
    if !(omega_k > 0.0 && omega_k.is_finite()) {
        return Err(LabError::Parameter(format!("omega_k must be positive, got {omega_k}")));
    }
    if template.eps0 >= 1.0 / 9.0 {
        return Err(LabError::Parameter(format!(
            "infeasible: eps0 = {} must be below 1/9 for the R lower bound to exist",
            template.eps0
        )));
    }
    let probe = CarlemanParams { big_r: f64::MAX, s: 1.0, ..template.clone() };
    probe.validate_ranges().or_else(|e| match e {
        LabError::Parameter(m) if m.contains("bridge minimum") => Ok(()),
        e => Err(e),
    })?;
    let r_min = CarlemanParams::r_lower_bound(omega_k, template.eps0, template.delta2)
        .max(template.min_bridge_end().powf(1.0 / template.eps0));
    let mut binding = "R lower bound";
    for j in 0..(16 * 300) {
        let big_r = 10f64.powf(j as f64 / 16.0);
        if big_r < r_min {
            continue;
        }
        let (lo, hi) = CarlemanParams::s_bounds(big_r, omega_k, template.eps0, template.delta2);
        if lo > hi {
            binding = "empty s interval";
            continue;
        }
        let s = (lo * hi).sqrt();
        let p = CarlemanParams { s, big_r, omega_k: Some(omega_k), ..template.clone() };
        if p.scale_ratio() < p.scale_threshold {
            binding = "eps0 s R^(-9 eps0) threshold";
            continue;
        }
        p.validate()?;
        return Ok(p);
    }
    Err(LabError::Parameter(format!("infeasible parameters for omega_k = {omega_k}: binding constraint is the {binding}")))
}
