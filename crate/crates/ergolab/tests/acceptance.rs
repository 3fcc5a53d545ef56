//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1, 4, 7, 8 and 9 read the checks of a full pipeline run with the default
//! configuration; criterion 10 repeats that run and compares the outputs byte for byte.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ergolab::cli_io::{run, LabConfig, RunManifest, Subcommand};
use ergolab::energy::{self, current_k, VectorField};
use ergolab::evolution::{
    cfl_dt, cross_check, evolve, manufactured_residual, measure_period, ExactMode, ModeData, ModeSolver, OuterBc,
    RunConfig,
};
use ergolab::frequency::{project_component, sandwich_check, temporal_cutoff, Band, MollifierBank, TimeSeriesField};
use ergolab::geometry::{ChartPoint, InnerBc, SpacetimeModel};
use ergolab::initial_data::{negative_energy_data, WavePacketSpec};
use num_complex::Complex64 as C;

struct Outcome {
    pass: bool,
    detail: String,
    /// Wall time of the subcommand, when the criterion reads a finished run.
    secs: Option<f64>,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into(), secs: None }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ergolab-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn pipeline(out: &Path) -> BTreeMap<&'static str, RunManifest> {
    let config = LabConfig::default();
    Subcommand::ALL
        .iter()
        .map(|&s| (s.name(), run(s, &config, out).unwrap_or_else(|e| panic!("{}: {e}", s.name())).manifest))
        .collect()
}

fn from_checks(m: &RunManifest) -> Outcome {
    let failed: Vec<String> = m.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect();
    let shown: Vec<String> = m.checks.iter().map(|c| c.detail.clone()).collect();
    let detail = if failed.is_empty() { shown.join("; ") } else { failed.join("; ") };
    Outcome { pass: failed.is_empty(), detail, secs: Some(m.wall_time_seconds) }
}

fn gaussian(cfg: &RunConfig, m: i64, rc: f64, w: f64) -> ModeData {
    let r = cfg.grid();
    let f = |x: f64| (-((x - rc) / w).powi(2)).exp();
    ModeData { m, u: r.iter().map(|&x| C::new(f(x), 0.0)).collect(), ut: r.iter().map(|&x| C::new(0.0, 0.3 * f(x))).collect() }
}

fn bessel_j0(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        term *= -(x * x / 4.0) / (k * k) as f64;
        sum += term;
    }
    sum
}

fn solver_convergence() -> Outcome {
    let mut orders = vec![];
    let mut vortex = RunConfig::vortex(1.0, 0.3, vec![0], 6.3, 129, 2.0);
    vortex.outer_bc = OuterBc::Reflecting;
    let flat = RunConfig { model: SpacetimeModel::minkowski(2), r_min: 0.5, ..vortex.clone() };
    for (name, cfg) in [("vortex", &vortex), ("minkowski", &flat)] {
        for m in [0, 2] {
            let rep = manufactured_residual(cfg, m, &ExactMode::gaussian_tone(1.3, 2.0, 0.8)).unwrap();
            orders.push((name, m, rep.observed_order));
        }
    }
    let orders_ok = orders.iter().all(|o| (o.2 - 2.0).abs() <= 0.2);

    let big_r = 10.0;
    let j01 = 2.404825557695773;
    let cfg = RunConfig {
        model: SpacetimeModel::minkowski(2).with_inner_bc(InnerBc::Neumann),
        modes: vec![0],
        r_min: 0.0,
        r_max: big_r,
        n_r: 1024,
        cfl: 0.5,
        t_final: 4.0 * 2.0 * PI * big_r / j01,
        outer_bc: OuterBc::Reflecting,
        output_every: 1.0,
        ergo_delta: 0.0,
        probes: vec![],
        keep_snapshots: false,
        dt: None,
    };
    let r = cfg.grid();
    let data = ModeData {
        m: 0,
        u: r.iter().map(|&x| C::new(bessel_j0(j01 * x / big_r), 0.0)).collect(),
        ut: vec![C::new(0.0, 0.0); r.len()],
    };
    let dt = cfl_dt(&cfg).unwrap();
    let probe = ((big_r / 3.0) / cfg.h()).round() as usize;
    let mut solver = ModeSolver::new(&cfg, &data, dt).unwrap();
    let (mut times, mut values) = (vec![], vec![]);
    while solver.time() < cfg.t_final {
        solver.step().unwrap();
        times.push(solver.time());
        values.push(solver.field()[probe].re);
    }
    let omega = measure_period(&times, &values).map(|p| 2.0 * PI / p).unwrap_or(f64::NAN);
    let exact = j01 / big_r;
    let rel = (omega / exact - 1.0).abs();
    let detail = orders.iter().map(|(n, m, o)| format!("{n} m={m} order {o:.3}")).collect::<Vec<_>>().join(", ");
    outcome(orders_ok && rel < 5e-3, format!("{detail}; box mode ω = {omega:.6} vs {exact:.6} (rel {rel:.2e})"))
}

fn energy_ledger() -> Outcome {
    let mut cfg = RunConfig::vortex(1.0, 0.3, vec![0, 1], 10.3, 2048, 50.0);
    cfg.model = cfg.model.with_inner_bc(InnerBc::Dirichlet);
    cfg.outer_bc = OuterBc::Reflecting;
    cfg.keep_snapshots = true;
    cfg.output_every = 5.0;
    let data: Vec<ModeData> = cfg.modes.iter().map(|&m| gaussian(&cfg, m, 3.0, 0.5)).collect();
    let s = evolve(&cfg, &data).unwrap();
    let drift = s.ledger_residual();
    let mut k_rel: f64 = 0.0;
    for snaps in s.snapshots.values() {
        for snap in snaps {
            let dens: Vec<f64> = (0..snap.len())
                .map(|i| {
                    let p = ChartPoint::new(snap.t, snap.r[i], 0.0);
                    current_k(&cfg.model, &p, &snap.grad(i), VectorField::T).unwrap().abs()
                        * energy::weight_radius(&cfg.model, snap.r[i])
                })
                .collect();
            let k = energy::integrate_interval(&snap.r, &dens, snap.r[0], *snap.r.last().unwrap());
            let e = energy::energy_report(&cfg.model, snap, 0.0).unwrap().e_n;
            k_rel = k_rel.max(k / e);
        }
    }
    let mut m2 = RunConfig { modes: vec![2], keep_snapshots: false, ..cfg.clone() };
    m2.output_every = 0.5;
    let unstable = evolve(&m2, &[gaussian(&m2, 2, 3.0, 0.5)]).unwrap().ledger_residual();
    outcome(
        drift < 1e-4 && k_rel < 1e-10,
        format!("m ∈ {{0, 1}} drift {drift:.3e}, ∫|K^T| / E_N {k_rel:.1e}; unstable m = 2 drift {unstable:.3e} (not gated)"),
    )
}

fn trapping() -> Outcome {
    let model = SpacetimeModel::vortex(1.0, 0.3).with_inner_bc(InnerBc::Dirichlet);
    let spec = WavePacketSpec { center_r: 0.65, radial_half_width: 0.3, gamma: -10.0, l: 10.0, alpha_ratio: 0.3, ..Default::default() };
    let mut cfg = RunConfig::vortex(1.0, 0.3, vec![], 4.3, 8001, 10.0);
    cfg.model = model.clone();
    cfg.output_every = 0.25;
    let data = negative_energy_data(&model, &spec, &cfg.grid()).unwrap();
    let modes = data.evolution_data();
    cfg.modes = modes.iter().map(|d| d.m).collect();
    let s = evolve(&cfg, &modes).unwrap();
    let worst = s.totals.iter().map(|r| r.e_t_ergo).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        worst <= -1.0 + 5e-2,
        format!(
            "m = {:?}, initial E_T = {:.6}, max E_T_ergo over {} outputs to t = {} is {worst:.5}",
            cfg.modes,
            data.measured_energy,
            s.totals.len(),
            cfg.t_final
        ),
    )
}

fn instability() -> Outcome {
    let mut cfg = RunConfig::vortex(1.0, 0.3, vec![2], 10.3, 1001, 100.0);
    cfg.model = cfg.model.with_inner_bc(InnerBc::Dirichlet);
    let data = |c: &RunConfig| {
        let r = c.grid();
        ModeData {
            m: 2,
            u: r.iter().map(|&x| C::new((-((x - 1.0) / 0.2).powi(2)).exp(), 0.0)).collect(),
            ut: vec![C::new(0.0, 0.0); r.len()],
        }
    };
    let coarse = evolve(&cfg, &[data(&cfg)]).unwrap();
    let fine_cfg = cfg.refined();
    let fine = evolve(&fine_cfg, &[data(&fine_cfg)]).unwrap();
    let ratio = coarse.doubling_ratio();
    let check = cross_check(&coarse, &fine);
    let (Some(fit), Some(fit_fine)) = (check.coarse, check.fine) else {
        return outcome(false, "growth fit failed");
    };
    outcome(
        ratio >= 2.0 && fit.rate > 0.0 && fit.excludes_zero() && check.relative_rate_change <= 0.2,
        format!(
            "E_N(T)/E_N(T/2) = {ratio:.3}, rate {:.5} CI [{:.5}, {:.5}], refined rate {:.5} (change {:.2}%)",
            fit.rate,
            fit.ci_low,
            fit.ci_high,
            fit_fine.rate,
            100.0 * check.relative_rate_change
        ),
    )
}

fn in_band_tone() -> (bool, String) {
    let bank = MollifierBank::new(0.5, 8.0).unwrap();
    let model = SpacetimeModel::minkowski(2);
    let r = vec![1.0, 1.5, 2.0];
    let span = bank.tail_span(Band::K(0), 1e-12);
    let dt = 0.05;
    let mut worst: f64 = 0.0;
    for k in 1..bank.omegas.len() - 1 {
        let wk = bank.omegas[k];
        let n = (3.0 * span / dt) as usize;
        let values = (0..n).map(|j| vec![C::new(0.0, wk * j as f64 * dt).exp(); r.len()]).collect();
        let raw = TimeSeriesField::new(0, 0.0, dt, r.clone(), values, None).unwrap();
        let pk = project_component(&temporal_cutoff(&raw, 1e9).unwrap(), &bank, Band::K(k)).unwrap();
        let s = sandwich_check(&model, &pk, &bank, k, &|_| 1.0, (span, pk.valid_window.1), 3.0).unwrap();
        worst = worst.max((s.ratio - 1.0).abs());
    }
    (worst < 0.05, format!("in-band tone ratios within 1 ± {worst:.1e}"))
}

fn determinism(first: &BTreeMap<&str, RunManifest>, a: &Path, b: &Path) -> Outcome {
    let second = pipeline(b);
    let mut files = 0;
    let mut differ = vec![];
    for (name, m) in first {
        let n = &second[name];
        if m.outputs != n.outputs || m.config_hash != n.config_hash {
            differ.push(name.to_string());
        }
        for o in &m.outputs {
            let x = std::fs::read(a.join(name).join(&o.file)).unwrap();
            let y = std::fs::read(b.join(name).join(&o.file)).unwrap();
            files += 1;
            if x != y {
                differ.push(format!("{name}/{}", o.file));
            }
        }
    }
    outcome(differ.is_empty(), format!("{files} output files compared across two runs; differing: {differ:?}"))
}

fn main() {
    let a = scratch("a");
    let b = scratch("b");
    let t0 = Instant::now();
    let first = pipeline(&a);
    println!("pipeline run in {:.1} s", t0.elapsed().as_secs_f64());

    type Criterion<'a> = (usize, &'a str, f64, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        (1, "geometry exactness", 5.0, Box::new(|| from_checks(&first["geometry-lint"]))),
        (2, "solver convergence", 120.0, Box::new(solver_convergence)),
        (3, "energy ledger", f64::INFINITY, Box::new(energy_ledger)),
        (4, "negative-energy data", 60.0, Box::new(|| from_checks(&first["make-data"]))),
        (5, "ergoregion trapping", 600.0, Box::new(trapping)),
        (6, "instability surrogate", 1800.0, Box::new(instability)),
        (
            7,
            "frequency decomposition",
            120.0,
            Box::new(|| {
                let o = from_checks(&first["freq-analyze"]);
                let (ok, d) = in_band_tone();
                Outcome { pass: o.pass && ok, detail: format!("{}; {d}", o.detail), secs: None }
            }),
        ),
        (8, "Carleman certificates", 300.0, Box::new(|| from_checks(&first["carleman-certify"]))),
        (9, "Hardy suite", 60.0, Box::new(|| from_checks(&first["hardy-check"]))),
        (10, "determinism", f64::INFINITY, Box::new(|| determinism(&first, &a, &b))),
    ];
    let mut failures = 0;
    for (n, name, budget, f) in &criteria {
        let start = Instant::now();
        let o = f();
        let secs = o.secs.unwrap_or(start.elapsed().as_secs_f64());
        let pass = o.pass && secs < *budget;
        failures += usize::from(!pass);
        println!("criterion {n:>2} {name}: {} ({}; {secs:.1} s)", if pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let _ = std::fs::remove_dir_all(&a);
    let _ = std::fs::remove_dir_all(&b);
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
