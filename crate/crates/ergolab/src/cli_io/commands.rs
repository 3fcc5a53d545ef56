//! The subcommands: each reads the parsed configuration, calls into the numerical modules
//! and writes its outputs through an [`OutputSet`].

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::carleman::{
    bulk_coefficient, build_profile, choose_parameters, identity_convergence, profile_for_pulse, Envelopes, GaussianPulse,
};
use crate::error::{LabError, Result};
use crate::evolution::{cross_check, evolve, DiagnosticsSeries, ModeData, RunConfig};
use crate::frequency::{decompose, sandwich_check, temporal_cutoff, Band, MollifierBank, TimeSeriesField, TAIL_TOLERANCE};
use crate::geometry::{ChartPoint, ModelKind, SpacetimeModel};
use crate::hardy::{calibrate, run_suite, HardyKind};
use crate::initial_data::{build_wave_packet, loglog_slope, negative_energy_data, uniform_grid};

use super::config::{DataSource, FrequencySource, LabConfig, LintModel, ModelChoice};
use super::output::{fmt17, CheckResult, Csv, OutputSet, RunManifest, MANIFEST_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    MakeData,
    FreqAnalyze,
    CarlemanCertify,
    HardyCheck,
    GeometryLint,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Simulate,
        Subcommand::MakeData,
        Subcommand::FreqAnalyze,
        Subcommand::CarlemanCertify,
        Subcommand::HardyCheck,
        Subcommand::GeometryLint,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::MakeData => "make-data",
            Subcommand::FreqAnalyze => "freq-analyze",
            Subcommand::CarlemanCertify => "carleman-certify",
            Subcommand::HardyCheck => "hardy-check",
            Subcommand::GeometryLint => "geometry-lint",
        }
    }
}

/// Result of a completed run: the manifest and the directory it describes.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

/// Runs `sub` into `out_dir/<subcommand>` and writes the manifest last.
pub fn run(sub: Subcommand, config: &LabConfig, out_dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let dir = out_dir.join(sub.name());
    let mut out = OutputSet::open(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.run.threads)
        .build()
        .map_err(|e| LabError::Io(e.to_string()))?;
    let checks = pool.install(|| match sub {
        Subcommand::Simulate => simulate(config, &mut out),
        Subcommand::MakeData => make_data(config, &mut out),
        Subcommand::FreqAnalyze => freq_analyze(config, &mut out),
        Subcommand::CarlemanCertify => carleman_certify(config, &mut out),
        Subcommand::HardyCheck => hardy_check(config, &mut out),
        Subcommand::GeometryLint => geometry_lint(config, &mut out),
    })?;
    let problems = out.audit()?;
    if !problems.is_empty() {
        return Err(LabError::Io(format!("output audit failed: {}", problems.join("; "))));
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: sub.name().into(),
        config: config.clone(),
        config_hash: RunManifest::config_hash(config),
        seed: config.run.seed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs: out.records.clone(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| LabError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(RunOutcome { dir, manifest })
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

/// Independent stream for item `index` of a subcommand.
fn stream_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.gen()
}

fn initial_modes(config: &LabConfig, run: &mut RunConfig) -> Result<Vec<ModeData>> {
    let r = run.grid();
    let s = &config.simulate;
    Ok(match s.data {
        DataSource::Zero => run.modes.iter().map(|&m| ModeData::zero(m, r.len())).collect(),
        DataSource::Gaussian => run
            .modes
            .iter()
            .map(|&m| ModeData {
                m,
                u: r.iter().map(|&x| C::new((-((x - s.pulse_center) / s.pulse_width).powi(2)).exp(), 0.0)).collect(),
                ut: vec![C::new(0.0, 0.0); r.len()],
            })
            .collect(),
        DataSource::Packet => {
            let data = negative_energy_data(&run.model, &config.packet.spec(), &r)?;
            let modes = data.evolution_data();
            run.modes = modes.iter().map(|d| d.m).collect();
            modes
        }
    })
}

fn diagnostics_csv(series: &DiagnosticsSeries) -> Csv {
    let mut t = Csv::new(&["t", "e_t_total", "e_t_ergo", "e_n", "e_log", "flux_in", "flux_out", "cumulative_outflow"]);
    for (r, f) in series.totals.iter().zip(&series.cumulative_flux) {
        t.floats(&[r.t, r.e_t_total, r.e_t_ergo, r.e_n, r.e_log, r.flux_in, r.flux_out, *f]);
    }
    t
}

fn simulate(config: &LabConfig, out: &mut OutputSet) -> Result<Vec<CheckResult>> {
    let mut run = config.run_config()?;
    let data = initial_modes(config, &mut run)?;
    let series = evolve(&run, &data)?;
    out.csv("diagnostics.csv", &diagnostics_csv(&series))?;
    let mut per_mode = Csv::new(&["m", "t", "e_t_total", "e_t_ergo", "e_n"]);
    for (m, reps) in &series.per_mode {
        for r in reps {
            per_mode.row(vec![m.to_string(), fmt17(r.t), fmt17(r.e_t_total), fmt17(r.e_t_ergo), fmt17(r.e_n)]);
        }
    }
    out.csv("modes.csv", &per_mode)?;
    if !run.probes.is_empty() {
        let mut header = vec!["m".to_string(), "t".to_string()];
        header.extend(run.probes.iter().map(|r| format!("abs_u_at_{}", fmt17(*r))));
        let mut p = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
        let times = series.times();
        for (m, rows) in &series.probes {
            for (t, vals) in times.iter().zip(rows) {
                let mut cells = vec![m.to_string(), fmt17(*t)];
                cells.extend(vals.iter().map(|&v| fmt17(v)));
                p.row(cells);
            }
        }
        out.csv("probes.csv", &p)?;
    }
    let refinement = if config.simulate.refine_check {
        let mut fine = run.refined();
        let fine_data = initial_modes(config, &mut fine)?;
        Some(cross_check(&series, &evolve(&fine, &fine_data)?))
    } else {
        None
    };
    let summary = json!({
        "modes": run.modes,
        "r_min": run.r_min,
        "r_max": run.r_max,
        "n_r": run.n_r,
        "dt": series.dt,
        "steps": series.steps,
        "outputs": series.totals.len(),
        "ledger_residual": series.ledger_residual(),
        "doubling_ratio": series.doubling_ratio(),
        "growth_fit": series.growth_fit(),
        "refinement": refinement.as_ref().map(to_json),
    });
    out.json("summary.json", &summary)?;
    let mut checks = vec![CheckResult::new(
        "diagnostics_finite",
        series.totals.iter().all(|r| r.is_finite()),
        format!("{} output times", series.totals.len()),
    )];
    if let Some(c) = refinement {
        checks.push(CheckResult::new(
            "refinement_consistent",
            !c.scheme_suspect,
            format!("relative rate change {:.3e}", c.relative_rate_change),
        ));
    }
    Ok(checks)
}

fn make_data(config: &LabConfig, out: &mut OutputSet) -> Result<Vec<CheckResult>> {
    let model = config.model.to_model();
    let p = &config.packet;
    let spec = p.spec();
    let grid = uniform_grid(p.center_r - p.radial_half_width, p.center_r + p.radial_half_width, p.n_r);
    let raw = build_wave_packet(&model, &spec, &grid)?;
    let data = if raw.raw_energy < 0.0 { negative_energy_data(&model, &spec, &grid)? } else { raw.clone() };
    let mut t = Csv::new(&["m", "r", "re_phi0", "im_phi0", "re_psi", "im_psi", "re_psi_t", "im_psi_t"]);
    for pm in &data.modes {
        for (i, r) in data.r.iter().enumerate() {
            let (a, b, c) = (pm.phi0[i], pm.phi1[i], pm.phi2[i]);
            let mut cells = vec![pm.m.to_string()];
            cells.extend([*r, a.re, a.im, b.re, b.im, c.re, c.im].map(fmt17));
            t.row(cells);
        }
    }
    out.csv("packet.csv", &t)?;
    let mut sweep = vec![];
    for &l in &p.l_sweep {
        let d = build_wave_packet(&model, &crate::initial_data::WavePacketSpec { l, ..spec }, &grid)?;
        sweep.push((l, d.raw_energy));
    }
    let mut checks = vec![
        CheckResult::new("raw_energy_negative", raw.raw_energy < 0.0, format!("raw T-energy {:.6e}", raw.raw_energy)),
        CheckResult::new(
            "normalized_energy",
            (data.measured_energy + 1.0).abs() < 1e-3,
            format!("re-measured T-energy {:.9}", data.measured_energy),
        ),
    ];
    let slope = (sweep.len() >= 2).then(|| {
        let ls: Vec<f64> = sweep.iter().map(|s| s.0).collect();
        let es: Vec<f64> = sweep.iter().map(|s| s.1).collect();
        loglog_slope(&ls, &es)
    });
    if let Some(s) = slope {
        checks.push(CheckResult::new("energy_scaling", (3.5..=4.5).contains(&s), format!("log-log slope {s:.4}")));
    }
    let summary = json!({
        "modes": data.modes.iter().map(|m| m.m).collect::<Vec<_>>(),
        "grid": [grid[0], grid[grid.len() - 1], grid.len()],
        "raw_energy": raw.raw_energy,
        "normalization": data.normalization,
        "measured_energy": data.measured_energy,
        "l_sweep": sweep.iter().map(|(l, e)| json!({"l": l, "raw_energy": e})).collect::<Vec<_>>(),
        "slope": slope,
    });
    out.json("summary.json", &summary)?;
    Ok(checks)
}

fn tone_input(config: &LabConfig, bank: &MollifierBank) -> Result<TimeSeriesField> {
    let f = &config.frequency;
    let span = bank.tail_span(Band::K(0), TAIL_TOLERANCE);
    let duration = f.duration.unwrap_or(3.0 * span);
    let n = (duration / f.dt).round() as usize + 1;
    let values = (0..n)
        .map(|j| {
            let t = j as f64 * f.dt;
            let z: C = f.tones.iter().map(|w| C::new(0.0, w * t).exp()).sum();
            vec![z; f.radii.len()]
        })
        .collect();
    TimeSeriesField::new(0, 0.0, f.dt, f.radii.clone(), values, None)
}

fn freq_analyze(config: &LabConfig, out: &mut OutputSet) -> Result<Vec<CheckResult>> {
    let f = &config.frequency;
    let bank = MollifierBank::new(f.omega0, f.omega_plus)?;
    let (model, raw) = match f.source {
        FrequencySource::Tones => (config.model.to_model(), tone_input(config, &bank)?),
        FrequencySource::Simulate => {
            let mut run = config.run_config()?;
            run.keep_snapshots = true;
            let mut data = initial_modes(config, &mut run)?;
            data.truncate(1);
            run.modes = vec![data[0].m];
            let series = evolve(&run, &data)?;
            let snaps = series.snapshots.values().next().cloned().unwrap_or_default();
            (run.model.clone(), TimeSeriesField::from_snapshots(&snaps)?)
        }
    };
    let cut = temporal_cutoff(&raw, f.r1)?;
    let dec = decompose(&cut, &bank)?;
    let span = bank.tail_span(Band::K(0), TAIL_TOLERANCE);
    let mut partition: f64 = 0.0;
    let mut split: f64 = 0.0;
    for j in 0..cut.len() {
        for i in 0..cut.r.len() {
            let s: C = dec.bands.iter().map(|b| b.values[j][i]).sum();
            partition = partition.max((s - dec.low.values[j][i]).norm());
            split = split.max((dec.low.values[j][i] + dec.high.values[j][i] - cut.values[j][i]).norm());
        }
    }
    let rms: Vec<f64> = dec
        .bands
        .iter()
        .map(|b| {
            let (a, e) = b.valid_window;
            let rows: Vec<&Vec<C>> =
                (0..b.len()).filter(|&j| b.time(j) >= a && b.time(j) <= e).map(|j| &b.values[j]).collect();
            let n = rows.iter().map(|r| r.len()).sum::<usize>().max(1);
            (rows.iter().flat_map(|r| r.iter()).map(|z| z.norm_sqr()).sum::<f64>() / n as f64).sqrt()
        })
        .collect();
    let top = rms.iter().cloned().fold(0.0, f64::max);
    let one = |_: f64| 1.0;
    let mut table = Csv::new(&["k", "omega_k", "rms", "sandwich_ratio", "within_bounds"]);
    let mut bands = vec![];
    let mut sandwich_ok = true;
    let mut tone_error: Option<f64> = None;
    for (k, b) in dec.bands.iter().enumerate() {
        let (a, e) = b.valid_window;
        let window = (a + 1.0 + span, e);
        let active = rms[k] > 1e-6 * top && window.1 > window.0;
        let sw = if active { Some(sandwich_check(&model, b, &bank, k, &one, window, f.sandwich_r_max)?) } else { None };
        if let Some(s) = &sw {
            sandwich_ok &= s.within_bounds;
        }
        if f.source == FrequencySource::Tones {
            let mut err: f64 = 0.0;
            for j in 0..b.len() {
                let t = b.time(j);
                if t < window.0 || t > window.1 {
                    continue;
                }
                let expect: C = f.tones.iter().map(|w| C::new(0.0, w * t).exp() * bank.zeta_symbol(k, *w)).sum();
                for v in &b.values[j] {
                    err = err.max((v - expect).norm());
                }
            }
            tone_error = Some(tone_error.unwrap_or(0.0).max(err));
        }
        table.row(vec![
            k.to_string(),
            fmt17(bank.omegas[k]),
            fmt17(rms[k]),
            sw.map_or("NaN".into(), |s| fmt17(s.ratio)),
            sw.map_or("".into(), |s| s.within_bounds.to_string()),
        ]);
        bands.push(json!({"k": k, "omega_k": bank.omegas[k], "rms": rms[k], "valid_window": b.valid_window, "sandwich": sw}));
    }
    out.csv("bands.csv", &table)?;
    let mut checks = vec![
        CheckResult::new("partition", partition < 1e-10, format!("max |sum_k psi_k - psi_low| = {partition:.3e}")),
        CheckResult::new("sandwich_bounds", sandwich_ok, "ratios within [1/16, 16] on active bands"),
    ];
    if let Some(e) = tone_error {
        checks.push(CheckResult::new("tone_recovery", e < 1e-6, format!("max band error {e:.3e}")));
    }
    let summary = json!({
        "omega0": bank.omega0,
        "omega_plus": bank.omega_plus,
        "bands": bands,
        "samples": cut.len(),
        "radii": cut.r.len(),
        "partition_residual": partition,
        "low_high_residual": split,
        "tone_recovery_error": tone_error,
    });
    out.json("summary.json", &summary)?;
    Ok(checks)
}

fn carleman_certify(config: &LabConfig, out: &mut OutputSet) -> Result<Vec<CheckResult>> {
    let c = &config.carleman;
    let model = config.model.to_model();
    if !matches!(config.model.kind, ModelChoice::Vortex | ModelChoice::Minkowski) || model.spatial_dim != 2 {
        return Err(LabError::Config {
            key: "model.kind".into(),
            msg: "Carleman weights are built for the vortex and 2D Minkowski".into(),
        });
    }
    let params = choose_parameters(c.omega_k, c.delta1, c.eps0, c.delta2)?;
    let (profile, fh) = build_profile(&model, &params)?;
    let bulk = bulk_coefficient(&profile, &Envelopes::frozen(), c.samples_per_region);
    let mut table = Csv::new(&["r", "bulk_over_f", "log_f", "a3", "a2", "a1"]);
    for s in &bulk.samples {
        let [a3, a2, a1] = s.split.unwrap_or([f64::NAN; 3]);
        table.floats(&[s.r, s.bulk_over_f, s.log_f, a3, a2, a1]);
    }
    out.csv("bulk.csv", &table)?;
    let separation: Vec<(f64, Option<f64>)> = c.separation_deltas.iter().map(|&d| (d, profile.separation(d))).collect();
    let pulse = GaussianPulse {
        amplitude: 1.0,
        r_c: c.pulse_center,
        sigma: c.pulse_sigma,
        v: c.pulse_velocity,
        omega: c.pulse_omega,
        m: c.pulse_mode,
    };
    let tau = (0.0, c.tau_end);
    let weights = profile_for_pulse(&model, &params, &pulse, tau, c.log_f_spread)?;
    let (runs, orders) = identity_convergence(&model, &weights, &pulse, tau, c.identity_h0, c.identity_levels)?;
    let rows: Vec<serde_json::Value> = runs
        .iter()
        .enumerate()
        .map(|(i, t)| {
            json!({"h": t.step, "lhs": t.lhs, "source": t.source, "boundary": t.boundary, "residual": t.residual,
                   "order": if i == 0 { None } else { Some(orders[i - 1]) }})
        })
        .collect();
    let min_margin = bulk.min_margin();
    let order_ok = orders.iter().all(|o| (o - 2.0).abs() <= 0.3);
    let mut checks = vec![
        CheckResult::new("bulk_margins", min_margin > 0.0, format!("minimum regional margin {min_margin:.4}")),
        CheckResult::new(
            "identity_order",
            order_ok,
            format!("observed orders {}", orders.iter().map(|o| format!("{o:.4}")).collect::<Vec<_>>().join(", ")),
        ),
    ];
    if model.is_vortex() {
        for (d, v) in &separation {
            let v = v.unwrap_or(f64::NAN);
            checks.push(CheckResult::new(&format!("separation_{d}"), v > 0.0, format!("c_delta = {v:.6e}")));
        }
    }
    let certificate = json!({
        "model": model.kind,
        "params": params,
        "constants": profile.constants,
        "seams": profile.seams,
        "f_h": fh,
        "regions": bulk.regions,
        "min_margin": min_margin,
        "separation": separation.iter().map(|(d, v)| json!({"delta": d, "c_delta": v})).collect::<Vec<_>>(),
        "identity": {"pulse": pulse, "tau": tau, "s": weights.params.s, "levels": rows, "orders": orders},
        "checks": checks,
    });
    out.json("certificate.json", &certificate)?;
    Ok(checks)
}

fn hardy_check(config: &LabConfig, out: &mut OutputSet) -> Result<Vec<CheckResult>> {
    let h = &config.hardy;
    let mut kinds: Vec<HardyKind> = h.exponents.iter().map(|&a| HardyKind::Polynomial { a }).collect();
    if h.logarithmic {
        kinds.push(HardyKind::Logarithmic);
    }
    let mut table = Csv::new(&[
        "dim",
        "kind",
        "a",
        "constant",
        "refined_constant",
        "relative_change",
        "count",
        "violations",
        "max_ratio",
    ]);
    let mut checks = vec![];
    let mut suites = vec![];
    let mut index = 0u64;
    for &dim in &h.dims {
        for &kind in &kinds {
            let cal_seed = stream_seed(config.run.seed, 2 * index);
            let suite_seed = stream_seed(config.run.seed, 2 * index + 1);
            index += 1;
            let coarse = calibrate(dim, kind, h.calibration_count, cal_seed, h.n)?;
            let fine = calibrate(dim, kind, h.calibration_count, cal_seed, h.refined_n)?;
            let rel = (fine.constant / coarse.constant - 1.0).abs();
            let rep = run_suite(dim, kind, coarse.constant, h.count, suite_seed, h.n)?;
            let (name, a) = match kind {
                HardyKind::Polynomial { a } => ("polynomial", a),
                HardyKind::Logarithmic => ("logarithmic", f64::NAN),
            };
            table.row(vec![
                dim.to_string(),
                name.into(),
                fmt17(a),
                fmt17(coarse.constant),
                fmt17(fine.constant),
                fmt17(rel),
                rep.count.to_string(),
                rep.violations.to_string(),
                fmt17(rep.max_ratio),
            ]);
            let label = if a.is_nan() { format!("d{dim}_log") } else { format!("d{dim}_a{a}") };
            suites.push(json!({
                "dim": dim, "kind": name, "a": if a.is_nan() { None } else { Some(a) },
                "calibration_count": h.calibration_count, "max_required": coarse.max_required,
                "constant": coarse.constant, "refined_constant": fine.constant, "relative_change": rel,
                "count": rep.count, "violations": rep.violations, "max_ratio": rep.max_ratio,
            }));
            checks.push(CheckResult::new(
                &format!("{label}_violations"),
                rep.violations == 0,
                format!("{} of {} exceed C = {:.6}", rep.violations, rep.count, coarse.constant),
            ));
            checks.push(CheckResult::new(
                &format!("{label}_stability"),
                rel <= h.stability,
                format!("relative change {rel:.4e} under refinement"),
            ));
        }
    }
    out.csv("hardy.csv", &table)?;
    out.json("summary.json", &json!({"suites": suites, "checks": checks}))?;
    Ok(checks)
}

fn lint_model(config: &LabConfig, which: LintModel) -> SpacetimeModel {
    let m = &config.model;
    let (c, delta) = if m.is_vortex() { (m.c, m.delta) } else { (1.0, 0.3) };
    match which {
        LintModel::Vortex => SpacetimeModel::vortex(c, delta),
        LintModel::VortexDoubled => SpacetimeModel::vortex_doubled(c, delta),
        LintModel::Bump3d => SpacetimeModel { bump_amplitude: m.bump_amplitude, ..SpacetimeModel::bump3d() },
        LintModel::AlmostSchwarzschild => SpacetimeModel::almost_schwarzschild(m.mass),
        LintModel::Minkowski2 => SpacetimeModel::minkowski(2),
        LintModel::Minkowski3 => SpacetimeModel::minkowski(3),
    }
}

fn random_point(model: &SpacetimeModel, rng: &mut ChaCha8Rng) -> ChartPoint {
    let span = 10.0 * model.c.max(1.0);
    let r = match model.kind {
        ModelKind::HydroVortex => rng.gen_range(model.delta..model.delta + span),
        ModelKind::HydroVortexDoubled => rng.gen_range(2.0 * model.delta - span..model.delta + span),
        ModelKind::AlmostSchwarzschild3D => rng.gen_range(2.05 * model.mass..2.0 * model.mass + span),
        _ => rng.gen_range(0.1..10.0),
    };
    ChartPoint::new3(rng.gen_range(-5.0..5.0), r, rng.gen_range(0.2..2.9), rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Geometry identities of one model on `points` random chart points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LintReport {
    pub model: ModelKind,
    pub inverse_error: f64,
    pub symmetry_error: f64,
    pub signature_failures: usize,
    /// max |g(N, N) + 1| on the vortex family.
    pub unit_normal_error: Option<f64>,
    /// (location, cell width) of the first ergosphere crossing on the vortex.
    pub ergosphere: Option<(f64, f64)>,
}

pub fn lint(model: &SpacetimeModel, points: usize, cells: usize, seed: u64) -> Result<LintReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = if model.is_vortex() { Some(model.timelike_observer_n()?) } else { None };
    let mut rep = LintReport {
        model: model.kind,
        inverse_error: 0.0,
        symmetry_error: 0.0,
        signature_failures: 0,
        unit_normal_error: frame.as_ref().map(|_| 0.0),
        ergosphere: None,
    };
    for _ in 0..points {
        let p = random_point(model, &mut rng);
        let d = model.metric_at(&p)?;
        let n = d.dim();
        let e = (&d.g * &d.g_inv - nalgebra::DMatrix::identity(n, n)).abs().max();
        rep.inverse_error = rep.inverse_error.max(e);
        rep.symmetry_error = rep.symmetry_error.max((&d.g - d.g.transpose()).abs().max());
        if d.negative_eigenvalues() != 1 {
            rep.signature_failures += 1;
        }
        if let (Some(f), Some(u)) = (&frame, rep.unit_normal_error.as_mut()) {
            let v = f.n(&p);
            *u = u.max((d.dot(&v, &v) + 1.0).abs());
        }
    }
    if model.kind == ModelKind::HydroVortex {
        let scan = model.scan_ergoregion(model.delta, 4.0 * model.c, cells)?;
        let h = scan[1].0 - scan[0].0;
        rep.ergosphere = scan.windows(2).find(|w| w[0].1 > 0.0 && w[1].1 <= 0.0).map(|w| (w[1].0, h));
    }
    Ok(rep)
}

fn geometry_lint(config: &LabConfig, out: &mut OutputSet) -> Result<Vec<CheckResult>> {
    let g = &config.geometry;
    let mut table = Csv::new(&[
        "model",
        "inverse_error",
        "symmetry_error",
        "signature_failures",
        "unit_normal_error",
        "ergosphere_r",
        "cell",
    ]);
    let mut checks = vec![];
    let mut reports = vec![];
    for (i, &which) in g.models.iter().enumerate() {
        let model = lint_model(config, which);
        let rep = lint(&model, g.points, g.scan_cells, stream_seed(config.run.seed, i as u64))?;
        let name = serde_json::to_value(which).expect("model name").as_str().unwrap_or("?").to_string();
        let (er, cell) = rep.ergosphere.unwrap_or((f64::NAN, f64::NAN));
        table.row(vec![
            name.clone(),
            fmt17(rep.inverse_error),
            fmt17(rep.symmetry_error),
            rep.signature_failures.to_string(),
            fmt17(rep.unit_normal_error.unwrap_or(f64::NAN)),
            fmt17(er),
            fmt17(cell),
        ]);
        checks.push(CheckResult::new(
            &format!("{name}_inverse"),
            rep.inverse_error < 1e-12 && rep.symmetry_error == 0.0,
            format!("max |g g^-1 - I| = {:.3e}", rep.inverse_error),
        ));
        checks.push(CheckResult::new(
            &format!("{name}_signature"),
            rep.signature_failures == 0,
            format!("{} points without Lorentzian signature", rep.signature_failures),
        ));
        if let Some(u) = rep.unit_normal_error {
            checks.push(CheckResult::new(&format!("{name}_unit_normal"), u < 1e-14, format!("max |g(N,N) + 1| = {u:.3e}")));
        }
        if model.kind == ModelKind::HydroVortex {
            let ok = rep.ergosphere.is_some_and(|(r, h)| (r - model.c).abs() <= h);
            checks.push(CheckResult::new(&format!("{name}_ergosphere"), ok, format!("crossing at {er} (cell {cell:.3e})")));
        }
        reports.push(rep);
    }
    out.csv("geometry.csv", &table)?;
    out.json("summary.json", &json!({"reports": reports, "checks": checks}))?;
    Ok(checks)
}
