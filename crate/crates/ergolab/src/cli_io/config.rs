//! Typed run configuration: one TOML file with a section per subcommand.
//!
//! Every key has a default, so an empty file is a valid configuration. Unknown keys and
//! out-of-range values are rejected with the dotted path of the offending key.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::evolution::{OuterBc, RunConfig};
use crate::geometry::{InnerBc, ModelKind, SpacetimeModel};
use crate::initial_data::WavePacketSpec;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LabConfig {
    pub run: RunSection,
    pub model: ModelSection,
    pub simulate: SimulateSection,
    pub packet: PacketSection,
    pub frequency: FrequencySection,
    pub carleman: CarlemanSection,
    pub hardy: HardySection,
    pub geometry: GeometrySection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    /// Seed of every random stream of the run.
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Vortex,
    VortexDoubled,
    Minkowski,
    Bump3d,
    AlmostSchwarzschild,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub kind: ModelChoice,
    pub c: f64,
    pub delta: f64,
    pub inner_bc: InnerBc,
    /// Only read for Minkowski.
    pub spatial_dim: usize,
    pub mass: f64,
    pub bump_amplitude: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: ModelChoice::Vortex,
            c: 1.0,
            delta: 0.3,
            inner_bc: InnerBc::Dirichlet,
            spatial_dim: 2,
            mass: 1.0,
            bump_amplitude: 2.0,
        }
    }
}

impl ModelSection {
    pub fn to_model(&self) -> SpacetimeModel {
        match self.kind {
            ModelChoice::Vortex => SpacetimeModel::vortex(self.c, self.delta).with_inner_bc(self.inner_bc),
            ModelChoice::VortexDoubled => SpacetimeModel::vortex_doubled(self.c, self.delta),
            ModelChoice::Minkowski => SpacetimeModel::minkowski(self.spatial_dim),
            ModelChoice::Bump3d => SpacetimeModel { bump_amplitude: self.bump_amplitude, ..SpacetimeModel::bump3d() },
            ModelChoice::AlmostSchwarzschild => SpacetimeModel::almost_schwarzschild(self.mass),
        }
    }

    pub fn is_vortex(&self) -> bool {
        matches!(self.kind, ModelChoice::Vortex | ModelChoice::VortexDoubled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Zero,
    /// Real Gaussian u = e^{−((r − center)/width)²}, u_t = 0, in every mode.
    Gaussian,
    /// Normalized negative-energy packet from the `[packet]` section.
    Packet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateSection {
    pub modes: Vec<i64>,
    /// Outer radius; δ + 10 C on the vortex and 10 on flat space when absent.
    pub r_max: Option<f64>,
    pub n_r: usize,
    pub cfl: f64,
    pub t_final: f64,
    pub outer_bc: OuterBc,
    pub output_every: f64,
    pub ergo_delta: f64,
    pub probes: Vec<f64>,
    pub dt: Option<f64>,
    pub data: DataSource,
    pub pulse_center: f64,
    pub pulse_width: f64,
    /// Repeat the run with the grid spacing halved and compare growth rates.
    pub refine_check: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            modes: vec![2],
            r_max: None,
            n_r: 1001,
            cfl: 0.5,
            t_final: 50.0,
            outer_bc: OuterBc::Sommerfeld,
            output_every: 0.5,
            ergo_delta: 0.0,
            probes: vec![],
            dt: None,
            data: DataSource::Gaussian,
            pulse_center: 1.0,
            pulse_width: 0.2,
            refine_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PacketSection {
    pub center_r: f64,
    pub l: f64,
    pub radial_half_width: f64,
    pub gamma: f64,
    pub alpha_ratio: f64,
    pub radial_sign: f64,
    pub conjugate: bool,
    pub amplitude: f64,
    /// Points of the packet grid over its support (make-data only).
    pub n_r: usize,
    /// Values of l for the energy scaling sweep; empty skips the sweep.
    pub l_sweep: Vec<f64>,
}

impl Default for PacketSection {
    fn default() -> Self {
        let s = WavePacketSpec::default();
        PacketSection {
            center_r: s.center_r,
            l: s.l,
            radial_half_width: s.radial_half_width,
            gamma: s.gamma,
            alpha_ratio: s.alpha_ratio,
            radial_sign: s.radial_sign,
            conjugate: s.conjugate,
            amplitude: s.amplitude,
            n_r: 20001,
            l_sweep: vec![10.0, 20.0, 40.0, 80.0],
        }
    }
}

impl PacketSection {
    pub fn spec(&self) -> WavePacketSpec {
        WavePacketSpec {
            center_r: self.center_r,
            l: self.l,
            radial_half_width: self.radial_half_width,
            gamma: self.gamma,
            alpha_ratio: self.alpha_ratio,
            radial_sign: self.radial_sign,
            conjugate: self.conjugate,
            amplitude: self.amplitude,
            ..WavePacketSpec::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencySource {
    /// Sum of unit tones e^{iωt} at every radius.
    Tones,
    /// Snapshots of the first mode of the `[simulate]` run.
    Simulate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrequencySection {
    pub omega0: f64,
    pub omega_plus: f64,
    pub source: FrequencySource,
    pub tones: Vec<f64>,
    pub dt: f64,
    /// Record length for tone input; three kernel spans when absent.
    pub duration: Option<f64>,
    pub radii: Vec<f64>,
    /// Radius of the distorted-time cut-off.
    pub r1: f64,
    /// Outer radius of the sandwich integrals.
    pub sandwich_r_max: f64,
}

impl Default for FrequencySection {
    fn default() -> Self {
        FrequencySection {
            omega0: 0.5,
            omega_plus: 8.0,
            source: FrequencySource::Tones,
            tones: vec![2.0],
            dt: 0.05,
            duration: None,
            radii: vec![1.0, 1.5, 2.0],
            r1: 1e9,
            sandwich_r_max: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarlemanSection {
    pub omega_k: f64,
    pub delta1: f64,
    pub eps0: f64,
    pub delta2: f64,
    pub samples_per_region: usize,
    pub separation_deltas: Vec<f64>,
    pub pulse_center: f64,
    pub pulse_sigma: f64,
    pub pulse_velocity: f64,
    pub pulse_omega: f64,
    pub pulse_mode: i64,
    pub tau_end: f64,
    /// Change of log f across the pulse for the identity check.
    pub log_f_spread: f64,
    pub identity_h0: f64,
    pub identity_levels: usize,
}

impl Default for CarlemanSection {
    fn default() -> Self {
        CarlemanSection {
            omega_k: 1.0,
            delta1: 0.05,
            eps0: 0.1,
            delta2: 0.1,
            samples_per_region: 400,
            separation_deltas: vec![0.05, 0.1],
            pulse_center: 3.0,
            pulse_sigma: 0.25,
            pulse_velocity: 0.5,
            pulse_omega: 3.0,
            pulse_mode: 2,
            tau_end: 1.0,
            log_f_spread: 2.0,
            identity_h0: 0.02,
            identity_levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HardySection {
    pub dims: Vec<usize>,
    pub exponents: Vec<f64>,
    /// Also run the logarithmic inequality.
    pub logarithmic: bool,
    pub count: usize,
    pub calibration_count: usize,
    pub n: usize,
    pub refined_n: usize,
    /// Allowed relative change of a calibrated constant under refinement.
    pub stability: f64,
}

impl Default for HardySection {
    fn default() -> Self {
        HardySection {
            dims: vec![2, 3],
            exponents: vec![0.5, 1.0, 2.0],
            logarithmic: false,
            count: 100,
            calibration_count: 1000,
            n: 801,
            refined_n: 1601,
            stability: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LintModel {
    Vortex,
    VortexDoubled,
    Bump3d,
    AlmostSchwarzschild,
    Minkowski2,
    Minkowski3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySection {
    pub models: Vec<LintModel>,
    pub points: usize,
    pub scan_cells: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            models: vec![
                LintModel::Vortex,
                LintModel::VortexDoubled,
                LintModel::Bump3d,
                LintModel::AlmostSchwarzschild,
                LintModel::Minkowski2,
                LintModel::Minkowski3,
            ],
            points: 1000,
            scan_cells: 4096,
        }
    }
}

fn bad(key: &str, msg: impl Into<String>) -> LabError {
    LabError::Config { key: key.into(), msg: msg.into() }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive and finite, got {v}")))
    }
}

fn unit_open(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(bad(key, format!("must lie in (0, 1), got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(bad(key, format!("must be at least {min}, got {v}")))
    }
}

impl LabConfig {
    /// Range checks on every section.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if matches!(m.kind, ModelChoice::Vortex | ModelChoice::VortexDoubled) {
            positive("model.delta", m.delta)?;
            if !(m.c > m.delta) {
                return Err(bad("model.c", format!("circulation C = {} must exceed delta = {}", m.c, m.delta)));
            }
        }
        if m.kind == ModelChoice::Minkowski && !(m.spatial_dim == 2 || m.spatial_dim == 3) {
            return Err(bad("model.spatial_dim", format!("must be 2 or 3, got {}", m.spatial_dim)));
        }
        positive("model.mass", m.mass)?;
        positive("model.bump_amplitude", m.bump_amplitude)?;
        if m.kind == ModelChoice::VortexDoubled && m.inner_bc != InnerBc::Doubled && m.inner_bc != InnerBc::Dirichlet {
            return Err(bad("model.inner_bc", "the doubled vortex has no wall"));
        }

        let s = &self.simulate;
        if s.modes.is_empty() {
            return Err(bad("simulate.modes", "at least one azimuthal mode is needed"));
        }
        if !(s.cfl > 0.0 && s.cfl <= 0.9) {
            return Err(bad("simulate.cfl", format!("must lie in (0, 0.9], got {}", s.cfl)));
        }
        at_least("simulate.n_r", s.n_r, 128)?;
        positive("simulate.t_final", s.t_final)?;
        positive("simulate.output_every", s.output_every)?;
        positive("simulate.pulse_width", s.pulse_width)?;
        if !(s.ergo_delta >= 0.0) {
            return Err(bad("simulate.ergo_delta", format!("must be non-negative, got {}", s.ergo_delta)));
        }
        if let Some(dt) = s.dt {
            positive("simulate.dt", dt)?;
        }
        if let Some(r_max) = s.r_max {
            positive("simulate.r_max", r_max)?;
            if m.is_vortex() && r_max < m.delta + 4.0 * m.c {
                return Err(bad("simulate.r_max", format!("must be at least delta + 4 C = {}", m.delta + 4.0 * m.c)));
            }
        }

        let p = &self.packet;
        positive("packet.l", p.l)?;
        positive("packet.radial_half_width", p.radial_half_width)?;
        positive("packet.alpha_ratio", p.alpha_ratio)?;
        positive("packet.amplitude", p.amplitude)?;
        if p.radial_sign.abs() != 1.0 {
            return Err(bad("packet.radial_sign", format!("must be 1 or -1, got {}", p.radial_sign)));
        }
        at_least("packet.n_r", p.n_r, 3)?;
        for (i, l) in p.l_sweep.iter().enumerate() {
            positive(&format!("packet.l_sweep[{i}]"), *l)?;
        }

        let f = &self.frequency;
        unit_open("frequency.omega0", f.omega0)?;
        if !(f.omega_plus > 1.0) {
            return Err(bad("frequency.omega_plus", format!("must exceed 1, got {}", f.omega_plus)));
        }
        positive("frequency.dt", f.dt)?;
        if let Some(d) = f.duration {
            positive("frequency.duration", d)?;
        }
        if f.source == FrequencySource::Tones && (f.tones.is_empty() || f.radii.is_empty()) {
            return Err(bad("frequency.tones", "tone input needs at least one tone and one radius"));
        }
        positive("frequency.sandwich_r_max", f.sandwich_r_max)?;

        let c = &self.carleman;
        positive("carleman.omega_k", c.omega_k)?;
        unit_open("carleman.delta1", c.delta1)?;
        unit_open("carleman.eps0", c.eps0)?;
        unit_open("carleman.delta2", c.delta2)?;
        at_least("carleman.samples_per_region", c.samples_per_region, 8)?;
        for (i, d) in c.separation_deltas.iter().enumerate() {
            positive(&format!("carleman.separation_deltas[{i}]"), *d)?;
        }
        positive("carleman.pulse_sigma", c.pulse_sigma)?;
        positive("carleman.tau_end", c.tau_end)?;
        positive("carleman.log_f_spread", c.log_f_spread)?;
        positive("carleman.identity_h0", c.identity_h0)?;
        at_least("carleman.identity_levels", c.identity_levels, 2)?;

        let h = &self.hardy;
        for (i, d) in h.dims.iter().enumerate() {
            if !(*d == 2 || *d == 3) {
                return Err(bad(&format!("hardy.dims[{i}]"), format!("must be 2 or 3, got {d}")));
            }
        }
        for (i, a) in h.exponents.iter().enumerate() {
            positive(&format!("hardy.exponents[{i}]"), *a)?;
        }
        at_least("hardy.count", h.count, 1)?;
        at_least("hardy.calibration_count", h.calibration_count, 1)?;
        at_least("hardy.n", h.n, 21)?;
        at_least("hardy.refined_n", h.refined_n, h.n)?;
        positive("hardy.stability", h.stability)?;

        let g = &self.geometry;
        at_least("geometry.points", g.points, 1)?;
        at_least("geometry.scan_cells", g.scan_cells, 16)?;
        Ok(())
    }

    /// The evolution run described by `[model]` and `[simulate]`.
    pub fn run_config(&self) -> Result<RunConfig> {
        let model = self.model.to_model();
        if model.spatial_dim != 2 {
            return Err(bad("model.kind", "evolution runs on the 2+1 families only"));
        }
        let s = &self.simulate;
        let r_max = s.r_max.unwrap_or(match model.kind {
            ModelKind::HydroVortex | ModelKind::HydroVortexDoubled => model.delta + 10.0 * model.c,
            _ => 10.0,
        });
        let r_min = match model.kind {
            ModelKind::HydroVortex => model.delta,
            ModelKind::HydroVortexDoubled => 2.0 * model.delta - r_max,
            _ => 0.0,
        };
        let config = RunConfig {
            model,
            modes: s.modes.clone(),
            r_min,
            r_max,
            n_r: s.n_r,
            cfl: s.cfl,
            t_final: s.t_final,
            outer_bc: s.outer_bc,
            output_every: s.output_every,
            ergo_delta: s.ergo_delta,
            probes: s.probes.clone(),
            keep_snapshots: false,
            dt: s.dt,
        };
        config.validate().map_err(|e| bad("simulate", e.to_string()))?;
        Ok(config)
    }

    /// Canonical TOML text; parsing it gives back the same configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Parse, default and validate configuration text.
pub fn parse_config_str(text: &str) -> Result<LabConfig> {
    let value: toml::Table = toml::from_str(text).map_err(|e| bad("<syntax>", e.message().to_string()))?;
    let mut unknown: Vec<String> = vec![];
    let mut track = |path: serde_ignored::Path| unknown.push(path.to_string());
    let de = serde_ignored::Deserializer::new(toml::Value::Table(value), &mut track);
    let config: LabConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        bad(if key == "." { "<root>" } else { &key }, e.into_inner().to_string())
    })?;
    if let Some(key) = unknown.into_iter().next() {
        return Err(bad(&key, "unknown key"));
    }
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<LabConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| bad("<file>", format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(text: &str) -> String {
        match parse_config_str(text).unwrap_err() {
            LabError::Config { key, .. } => key,
            e => panic!("not a config error: {e}"),
        }
    }

    #[test]
    fn minimal_vortex_config_gets_defaults() {
        let cfg = parse_config_str("[model]\nkind = \"vortex\"\nc = 1.0\ndelta = 0.3\n").unwrap();
        assert_eq!(cfg.simulate.cfl, 0.5);
        assert_eq!(cfg.simulate.outer_bc, OuterBc::Sommerfeld);
        let run = cfg.run_config().unwrap();
        assert_eq!(run.r_min, 0.3);
        assert_eq!(run.r_max, 10.3);
        assert_eq!(parse_config_str("").unwrap(), LabConfig::default());
    }

    #[test]
    fn circulation_not_above_delta_is_rejected() {
        assert_eq!(key_of("[model]\nc = 0.3\ndelta = 0.3\n"), "model.c");
        assert_eq!(key_of("[model]\nc = 0.2\ndelta = 0.3\n"), "model.c");
    }

    #[test]
    fn errors_carry_key_paths() {
        assert_eq!(key_of("[simulate]\ncfl = 1.5\n"), "simulate.cfl");
        assert_eq!(key_of("[simulate]\ncfll = 0.4\n"), "simulate.cfll");
        assert_eq!(key_of("[bogus]\nx = 1\n"), "bogus");
        assert_eq!(key_of("[simulate]\nn_r = \"many\"\n"), "simulate.n_r");
        assert_eq!(key_of("[simulate]\nouter_bc = \"absorbing\"\n"), "simulate.outer_bc");
        assert_eq!(key_of("[hardy]\nexponents = [1.0, -2.0]\n"), "hardy.exponents[1]");
        assert_eq!(key_of("[carleman]\neps0 = 1.5\n"), "carleman.eps0");
        assert_eq!(key_of("[model\n"), "<syntax>");
    }

    #[test]
    fn round_trip_through_text() {
        let mut cfg = LabConfig::default();
        cfg.simulate.r_max = Some(12.5);
        cfg.simulate.probes = vec![0.5, 2.0];
        cfg.simulate.dt = Some(1e-3);
        cfg.run.seed = 99;
        cfg.model.kind = ModelChoice::Minkowski;
        cfg.frequency.source = FrequencySource::Simulate;
        cfg.carleman.omega_k = 0.1 + 0.2;
        let text = cfg.to_toml();
        assert_eq!(parse_config_str(&text).unwrap(), cfg);
        assert_eq!(parse_config_str(&LabConfig::default().to_toml()).unwrap(), LabConfig::default());
    }
}
