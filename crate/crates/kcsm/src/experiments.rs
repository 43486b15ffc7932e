//! Experiment drivers: one function per [`ExperimentKind`].
//!
//! Seeding: trajectory `i` at the `j`-th value of q draws its dynamics from
//! `stream_rng(seed, stream_id(j, i))` and its initial configuration from
//! `stream_rng(seed ^ INIT_SALT, stream_id(j, i))`. Work is spread over a
//! rayon pool but results are gathered in index order, so the output does
//! not depend on the number of threads.

use rayon::prelude::*;
use serde_json::{json, Value};

use kcsm_core::auxiliary::{
    enabled_in_window, estimate_dbar, estimate_label_diffusivity, in_a, kzeros_lower_bound, sample_mu3,
    simulate_aux, AuxPath,
};
use kcsm_core::constraints::{check_axioms, ConstraintModel};
use kcsm_core::dynamics::{hitting_time_t0, simulate_joint, Event, Frame, Seed, Trajectory};
use kcsm_core::estimate::{
    east_ratio_report, estimate_d, fit_power_law, sandwich_check, zero_cluster_mobility, ClusterOptions,
    EstimateReport, FitOptions, Warning,
};
use kcsm_core::exact::{
    build_generator, dirichlet_split, hitting_cdf_many, max_fa_functional, relaxation_time, spectral_gap,
    GeneratorKind, GeneratorRecord, SpectralResult, TestFunction, DEFAULT_STATE_CAP,
};
use kcsm_core::lattice::{Boundary, Direction, Params, SpinConfig};
use kcsm_core::rng::{stream_id, stream_rng, SimRng};
use rand::Rng;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::formats::{Assertion, LogHeader, ResultRow, SCHEMA_VERSION};

/// Mixed into the root seed for initial configurations.
pub const INIT_SALT: u64 = 0x1f2e_3d4c_5b6a_7988;

/// Ring carrying the swap dynamics; paths stay far from wrapping.
pub const AUX_RING: usize = 4096;

/// Events kept in an event log; longer runs are logged over a prefix.
const LOG_EVENT_CAP: f64 = 2e6;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] kcsm_core::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

pub struct EventLog {
    pub header: LogHeader,
    pub events: Vec<Event>,
}

pub struct Outcome {
    pub rows: Vec<ResultRow>,
    pub assertions: Vec<Assertion>,
    pub estimates: Value,
    pub event_log: Option<EventLog>,
    /// Generators worth dumping, with a directory name for each.
    pub generators: Vec<(String, GeneratorRecord)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Run `cfg` on `jobs` worker threads (0 picks the rayon default).
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Outcome, RunError> {
    cfg.check()?;
    crate::config::estimate_resources(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    pool.install(|| {
        let mut run = Runner::new(cfg);
        match cfg.kind {
            ExperimentKind::DScaling => run.d_scaling()?,
            ExperimentKind::Sandwich => run.sandwich()?,
            ExperimentKind::EastRatio => run.east_ratio()?,
            ExperimentKind::AuxDynamics => run.aux_dynamics()?,
            ExperimentKind::GapTable => run.gap_table()?,
            ExperimentKind::HittingTimes => run.hitting_times()?,
            ExperimentKind::AppendixFunctionals => run.appendix_functionals()?,
            ExperimentKind::ClusterMobility => run.cluster_mobility()?,
            ExperimentKind::AxiomChecks => run.axiom_checks()?,
        }
        Ok(run.finish())
    })
}

pub fn dynamics_seed(root: u64, job: usize, index: usize) -> Seed {
    Seed {
        root,
        stream: stream_id(job as u32, index as u32),
    }
}

pub fn init_rng(root: u64, job: usize, index: usize) -> SimRng {
    stream_rng(root ^ INIT_SALT, stream_id(job as u32, index as u32))
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    name: String,
    model: String,
    rows: Vec<ResultRow>,
    assertions: Vec<Assertion>,
    estimates: serde_json::Map<String, Value>,
    event_log: Option<EventLog>,
    generators: Vec<(String, GeneratorRecord)>,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Runner {
            cfg,
            name: format!("{:?}", cfg.kind),
            model: cfg.model.to_string(),
            rows: Vec::new(),
            assertions: Vec::new(),
            estimates: serde_json::Map::new(),
            event_log: None,
            generators: Vec::new(),
        }
    }

    fn finish(self) -> Outcome {
        Outcome {
            rows: self.rows,
            assertions: self.assertions,
            estimates: Value::Object(self.estimates),
            event_log: self.event_log,
            generators: self.generators,
        }
    }

    fn row(&mut self, q: Option<f64>, param: Option<f64>, quantity: &str, value: f64) -> &mut ResultRow {
        self.rows.push(ResultRow {
            schema_version: SCHEMA_VERSION,
            experiment: self.name.clone(),
            model: self.model.clone(),
            q,
            param,
            quantity: quantity.to_string(),
            value,
            ..ResultRow::default()
        });
        self.rows.last_mut().expect("just pushed")
    }

    fn estimate_row(&mut self, q: f64, param: Option<f64>, quantity: &str, e: &EstimateReport) {
        let r = self.row(Some(q), param, quantity, e.value);
        r.stderr = Some(e.stderr);
    }

    fn assert(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    fn sigmas(&self) -> f64 {
        self.cfg.acceptance.sigmas.unwrap_or(3.0)
    }

    fn fit_options(&self) -> FitOptions {
        let mut o = FitOptions::default();
        if let Some([lo, hi]) = self.cfg.lag_window {
            o.lag_lo_frac = lo;
            o.lag_hi_frac = hi;
        }
        o
    }

    fn params(q: f64) -> Result<Params, RunError> {
        Ok(Params::new(q)?)
    }

    /// Tracer ensemble at the `job`-th q on the configured ring.
    fn ensemble(
        &self,
        model: ConstraintModel,
        q: f64,
        job: usize,
        dims: &[usize],
        count: usize,
    ) -> Result<Vec<Trajectory>, RunError> {
        let p = Self::params(q)?;
        let cfg = self.cfg;
        let dt = cfg.sample_interval();
        let out: Result<Vec<Trajectory>, kcsm_core::Error> = (0..count)
            .into_par_iter()
            .map(|i| {
                let c0 = SpinConfig::sample(&p, dims, Boundary::Periodic, &mut init_rng(cfg.seed, job, i))?;
                let (traj, _) = simulate_joint(model, p, c0, cfg.horizon, dt, dynamics_seed(cfg.seed, job, i), |_| {})?;
                Ok(traj)
            })
            .collect();
        Ok(out?)
    }

    fn diffusion(&mut self, model: ConstraintModel, q: f64, job: usize, dims: &[usize]) -> Result<EstimateReport, RunError> {
        self.diffusion_n(model, q, job, dims, self.cfg.n_trajectories)
    }

    fn diffusion_n(
        &mut self,
        model: ConstraintModel,
        q: f64,
        job: usize,
        dims: &[usize],
        count: usize,
    ) -> Result<EstimateReport, RunError> {
        let trajs = self.ensemble(model, q, job, dims, count)?;
        let u = Direction::unit(dims.len(), 0);
        let e = estimate_d(&trajs, &u, &self.fit_options())?;
        self.note_warnings(q, &e);
        Ok(e)
    }

    fn note_warnings(&mut self, q: f64, e: &EstimateReport) {
        for w in &e.warnings {
            let (quantity, v) = match *w {
                Warning::Nonlinear { r_squared } => ("warning_nonlinear_r2", r_squared),
                Warning::Wrapped { trajectories } => ("warning_wrapped", trajectories as f64),
                Warning::Censored { samples } => ("warning_censored", samples as f64),
            };
            self.row(Some(q), None, quantity, v);
        }
    }

    /// Log the first trajectory at the first q, over a prefix short enough
    /// to keep the log bounded. Same seed, so it is a prefix of the run.
    fn maybe_log(&mut self, model: ConstraintModel, dims: &[usize]) -> Result<(), RunError> {
        if !self.cfg.event_log {
            return Ok(());
        }
        let q = self.cfg.q_list[0];
        let p = Self::params(q)?;
        let n: usize = dims.iter().product();
        let t = self.cfg.horizon.min(LOG_EVENT_CAP / (n + 2 * dims.len()) as f64);
        let c0 = SpinConfig::sample(&p, dims, Boundary::Periodic, &mut init_rng(self.cfg.seed, 0, 0))?;
        let mut events = Vec::new();
        simulate_joint(model, p, c0.clone(), t, t, dynamics_seed(self.cfg.seed, 0, 0), |e| events.push(*e))?;
        self.estimates.insert("event_log_horizon".into(), json!(t));
        self.event_log = Some(EventLog {
            header: LogHeader {
                model,
                q,
                frame: Frame::Lab,
                initial: c0,
            },
            events,
        });
        Ok(())
    }

    fn d_scaling(&mut self) -> Result<(), RunError> {
        let model = self.cfg.model.0;
        let dims = self.cfg.dims.clone();
        let k = self.sigmas();
        let mut points = Vec::new();
        let mut per_q = Vec::new();
        for (j, &q) in self.cfg.q_list.iter().enumerate() {
            let e = self.diffusion(model, q, j, &dims)?;
            self.estimate_row(q, None, "D", &e);
            let upper = q * q;
            let ok = e.value <= upper + k * e.stderr;
            self.row(Some(q), None, "D_upper_bound", upper).pass = Some(ok);
            self.assert(
                &format!("D <= q^2 at q = {q}"),
                ok,
                format!("D = {:.4e} ± {:.1e}, q² = {upper:.4e}", e.value, e.stderr),
            );
            points.push((q, e.value, e.stderr));
            per_q.push(json!({"q": q, "D": e.value, "stderr": e.stderr, "r_squared": e.r_squared}));
        }
        self.estimates.insert("D".into(), Value::Array(per_q));
        let expected = self.cfg.acceptance.exponent.or(match model {
            ConstraintModel::KZeros(k) if dims.len() == 1 => Some(k as f64 + 1.0),
            _ => None,
        });
        if points.len() >= 4 {
            let fit = fit_power_law(&points)?;
            let r = self.row(None, None, "exponent", fit.exponent);
            r.stderr = Some(fit.stderr);
            self.estimates
                .insert("exponent".into(), json!({"value": fit.exponent, "stderr": fit.stderr}));
            if let Some(x) = expected {
                let tol = self.cfg.acceptance.exponent_tol.unwrap_or(if model == ConstraintModel::fa1f() {
                    0.3
                } else {
                    0.5
                });
                let ok = (fit.exponent - x).abs() <= tol;
                let r = self.rows.last_mut().expect("exponent row");
                r.lower = Some(x - tol);
                r.upper = Some(x + tol);
                r.pass = Some(ok);
                self.assert(
                    "exponent",
                    ok,
                    format!("fitted {:.3} ± {:.3}, expected {x} ± {tol}", fit.exponent, fit.stderr),
                );
            }
        }
        self.maybe_log(model, &dims)
    }

    fn ring_gap(&self, model: ConstraintModel, p: Params, n: usize) -> Result<SpectralResult, RunError> {
        let d = self.cfg.dims.len().max(1);
        let dims = vec![n; d];
        let g = build_generator(model, p, &dims, Boundary::Periodic, GeneratorKind::Environment, DEFAULT_STATE_CAP)?;
        Ok(spectral_gap(&g)?)
    }

    fn sandwich(&mut self) -> Result<(), RunError> {
        let model = self.cfg.model.0;
        let dims = self.cfg.dims.clone();
        let n = self.cfg.lengths.first().copied().unwrap_or(12);
        let k = self.sigmas();
        let mut out = Vec::new();
        for (j, &q) in self.cfg.q_list.iter().enumerate() {
            let p = Self::params(q)?;
            let gap = self.ring_gap(model, p, n)?;
            self.row(Some(q), Some(n as f64), "gap", gap.gap);
            let e = self.diffusion(model, q, j, &dims)?;
            self.estimate_row(q, None, "D", &e);
            let s = sandwich_check(&e, &gap, p, dims.len());
            let lower_ok = s.lower <= s.value + k * s.stderr;
            let upper_ok = s.value <= s.upper + k * s.stderr;
            self.row(Some(q), None, "D_lower_bound", s.lower).pass = Some(lower_ok);
            self.row(Some(q), None, "D_upper_bound", s.upper).pass = Some(upper_ok);
            self.assert(
                &format!("sandwich at q = {q}"),
                lower_ok && upper_ok,
                format!(
                    "{:.4e} ≤ {:.4e} ± {:.1e} ≤ {:.4e} (gap {:.4e} on ring {n})",
                    s.lower, s.value, s.stderr, s.upper, gap.gap
                ),
            );
            out.push(json!({"q": q, "gap": gap.gap, "lower": s.lower, "D": s.value, "stderr": s.stderr, "upper": s.upper}));
        }
        self.estimates.insert("sandwich".into(), Value::Array(out));
        self.maybe_log(model, &dims)
    }

    fn east_ratio(&mut self) -> Result<(), RunError> {
        let dims = self.cfg.dims.clone();
        let mut points = Vec::new();
        for (j, &q) in self.cfg.q_list.iter().enumerate() {
            let p = Self::params(q)?;
            let l = (4.0 / q).ceil() as usize;
            let gap = relaxation_time(l, p)?;
            self.row(Some(q), Some(l as f64), "gap", gap.gap);
            let trend = (1.0 / gap.gap).ln() / (1.0 / q).ln().powi(2);
            self.row(Some(q), Some(l as f64), "log_inv_gap_over_log_inv_q_sq", trend);
            let e = self.diffusion(ConstraintModel::East, q, j, &dims)?;
            self.estimate_row(q, None, "D", &e);
            points.push((p, e, gap));
        }
        let report = east_ratio_report(&points)?;
        for r in &report.rows {
            self.row(Some(r.q), None, "log_D_over_log_gap", r.log_ratio);
            self.row(Some(r.q), None, "D_over_q2_gap", r.c_estimate);
        }
        let min = self.cfg.acceptance.min_final_log_ratio.unwrap_or(0.75);
        self.assert(
            "log D / log gap increasing as q decreases",
            report.increasing,
            format!("{:?}", report.rows.iter().map(|r| r.log_ratio).collect::<Vec<_>>()),
        );
        self.assert(
            "final log ratio",
            report.final_log_ratio > min,
            format!("{:.4} > {min}", report.final_log_ratio),
        );
        self.assert("D >= c q^2 gap", report.c_lower > 0.0, format!("c = {:.4e}", report.c_lower));
        self.estimates.insert(
            "east_ratio".into(),
            json!({
                "rows": report.rows.iter().map(|r| json!({
                    "q": r.q, "D": r.d, "stderr": r.d_stderr, "gap": r.gap, "log_ratio": r.log_ratio, "c": r.c_estimate
                })).collect::<Vec<_>>(),
                "final_log_ratio": report.final_log_ratio,
                "c_lower": report.c_lower,
            }),
        );
        self.maybe_log(ConstraintModel::East, &dims)
    }

    fn aux_paths(&self, q: f64, job: usize, ring: usize, horizon: f64) -> Result<Vec<AuxPath>, RunError> {
        let p = Self::params(q)?;
        let cfg = self.cfg;
        let dt = cfg.sample_dt.unwrap_or(horizon / 100.0);
        let out: Result<Vec<AuxPath>, kcsm_core::Error> = (0..cfg.n_trajectories)
            .into_par_iter()
            .map(|i| {
                let c0 = sample_mu3(p, &[ring], &mut init_rng(cfg.seed, job, i))?;
                simulate_aux(&c0, horizon, dt, false, &mut dynamics_seed(cfg.seed, job, i).rng())
            })
            .collect();
        Ok(out?)
    }

    fn aux_dynamics(&mut self) -> Result<(), RunError> {
        let ring = AUX_RING;
        let horizon = self.cfg.aux_horizon.unwrap_or(self.cfg.horizon);
        let k = self.sigmas();
        let opts = self.fit_options();

        let mut windows = 0;
        let mut bad = Vec::new();
        for w in 0u8..32 {
            if in_a(w) {
                windows += 1;
                match enabled_in_window(w) {
                    Ok(m) if m.len() == 2 => {}
                    _ => bad.push(w),
                }
            }
        }
        self.row(None, None, "a_windows", windows as f64);
        self.assert(
            "exactly two enabled moves on every A-window",
            bad.is_empty(),
            format!("{windows} windows, failures {bad:?}"),
        );

        let mut qs: Vec<f64> = self.cfg.q_list.clone();
        for &q in &self.cfg.compare_q {
            if !qs.contains(&q) {
                qs.push(q);
            }
        }
        let mut violations = 0u64;
        let mut paths_run = 0usize;
        let mut dbars = Vec::new();
        let mut out = Vec::new();
        for (j, &q) in qs.iter().enumerate() {
            let paths = self.aux_paths(q, j, ring, horizon)?;
            paths_run += paths.len();
            violations += paths.iter().map(|p| p.bound_violations).sum::<u64>();
            let dbar = estimate_dbar(&paths, &opts)?;
            let label = estimate_label_diffusivity(&paths, &opts)?;
            self.estimate_row(q, None, "D_bar", &dbar);
            self.estimate_row(q, None, "label_diffusivity", &label);
            if self.cfg.q_list.contains(&q) {
                let ok = dbar.value >= 4.0 / 9.0 - k * dbar.stderr;
                self.row(Some(q), None, "D_bar_lower_bound", 4.0 / 9.0).pass = Some(ok);
                self.assert(
                    &format!("D_bar >= 4/9 at q = {q}"),
                    ok,
                    format!("{:.4} ± {:.4}", dbar.value, dbar.stderr),
                );
            }
            out.push(json!({"q": q, "D_bar": dbar.value, "stderr": dbar.stderr, "label": label.value}));
            dbars.push((q, dbar));
        }
        self.row(None, Some(paths_run as f64), "bound_violations", violations as f64).pass = Some(violations == 0);
        self.assert(
            "|X| >= floor(2|N|/3) pathwise",
            violations == 0,
            format!("{violations} violations over {paths_run} paths"),
        );
        self.estimates.insert("aux".into(), Value::Array(out));

        let dims = if self.cfg.dims.is_empty() { vec![256] } else { self.cfg.dims.clone() };
        let mut cmp = Vec::new();
        for (j, &q) in self.cfg.compare_q.iter().enumerate() {
            let p = Self::params(q)?;
            let dbar = &dbars.iter().find(|(x, _)| *x == q).expect("simulated above").1;
            let bound = kzeros_lower_bound(dbar, p);
            let count = self.cfg.compare_trajectories.unwrap_or(self.cfg.n_trajectories);
            let e = self.diffusion_n(ConstraintModel::KZeros(3), q, qs.len() + j, &dims, count)?;
            self.estimate_row(q, None, "D_kzeros3", &e);
            let ok = bound <= e.value + k * e.stderr;
            self.row(Some(q), None, "kzeros3_lower_bound", bound).pass = Some(ok);
            self.assert(
                &format!("three-zeros lower bound at q = {q}"),
                ok,
                format!("bound {bound:.4e} vs D = {:.4e} ± {:.1e}", e.value, e.stderr),
            );
            cmp.push(json!({"q": q, "bound": bound, "D": e.value, "stderr": e.stderr}));
        }
        self.estimates.insert("kzeros3".into(), Value::Array(cmp));
        Ok(())
    }

    fn gap_table(&mut self) -> Result<(), RunError> {
        let model = self.cfg.model.0;
        let boundary = if model == ConstraintModel::East {
            Boundary::FrozenEmpty
        } else {
            Boundary::Periodic
        };
        let d = self.cfg.dims.len().max(1);
        let mut lengths = self.cfg.lengths.clone();
        lengths.sort_unstable();
        lengths.dedup();
        let mut worst_balance: f64 = 0.0;
        let mut out = Vec::new();
        for &q in &self.cfg.q_list {
            let p = Self::params(q)?;
            let mut gaps = Vec::new();
            for &l in &lengths {
                let g = build_generator(model, p, &vec![l; d], boundary, GeneratorKind::Environment, DEFAULT_STATE_CAP)?;
                let defect = g.detailed_balance_defect();
                worst_balance = worst_balance.max(defect);
                if g.len() < 2 {
                    self.row(Some(q), Some(l as f64), "class_size", g.len() as f64);
                    continue;
                }
                let s = spectral_gap(&g)?;
                self.row(Some(q), Some(l as f64), "gap", s.gap);
                self.row(Some(q), Some(l as f64), "class_size", s.class_size as f64);
                self.row(Some(q), Some(l as f64), "detailed_balance_defect", defect);
                gaps.push((l, s.gap));
                if Some(&l) == lengths.last() {
                    self.generators.push((format!("{}_q{q}_L{l}", self.model), g));
                }
            }
            if boundary == Boundary::FrozenEmpty {
                let ok = gaps.windows(2).all(|w| w[1].1 < w[0].1);
                self.assert(
                    &format!("gap decreasing in L at q = {q}"),
                    ok,
                    format!("{gaps:?}"),
                );
            }
            out.push(json!({"q": q, "gaps": gaps}));
        }
        self.assert(
            "detailed balance",
            worst_balance <= 1e-12,
            format!("largest defect {worst_balance:.2e}"),
        );
        self.estimates.insert("gaps".into(), Value::Array(out));
        Ok(())
    }

    fn hitting_times(&mut self) -> Result<(), RunError> {
        let cfg = self.cfg;
        let k = self.sigmas();
        let mut lengths = cfg.lengths.clone();
        lengths.sort_unstable();
        lengths.dedup();
        let n = cfg.n_trajectories as f64;
        let mut out = Vec::new();
        for (j, &q) in cfg.q_list.iter().enumerate() {
            let p = Self::params(q)?;
            let mut medians = Vec::new();
            for (li, &l) in lengths.iter().enumerate() {
                let job = j * lengths.len() + li;
                let samples: Result<Vec<_>, kcsm_core::Error> = (0..cfg.n_trajectories)
                    .into_par_iter()
                    .map(|i| hitting_time_t0(l, p, dynamics_seed(cfg.seed, job, i).rng(), cfg.horizon))
                    .collect();
                let samples = samples?;
                let censored = samples.iter().filter(|s| s.censored).count();
                let mut times: Vec<f64> = samples.iter().map(|s| s.time).collect();
                times.sort_by(f64::total_cmp);
                let mean = times.iter().sum::<f64>() / n;
                let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0).max(1.0);
                let se = (var / n).sqrt();
                let median = times[times.len() / 2];
                let lf = Some(l as f64);
                self.row(Some(q), lf, "mean_T0", mean).stderr = Some(se);
                self.row(Some(q), lf, "median_T0", median);
                self.row(Some(q), lf, "censored", censored as f64);
                medians.push((l, median));
                if l == 1 {
                    let ok = censored == 0 && (mean - 1.0 / q).abs() <= k * se;
                    self.assert(
                        &format!("mean T0 = 1/q at q = {q}"),
                        ok,
                        format!("{mean:.4} ± {se:.4} vs {:.4}", 1.0 / q),
                    );
                }
                if l <= 10 {
                    let grid: Vec<f64> = if cfg.times.is_empty() {
                        vec![0.5 * median, median, 2.0 * median]
                    } else {
                        cfg.times.clone()
                    };
                    let exact = hitting_cdf_many(l, p, &grid)?;
                    let mut worst: f64 = 0.0;
                    for (&t, &pe) in grid.iter().zip(&exact) {
                        let emp = times.partition_point(|&x| x <= t) as f64 / n;
                        let sigma = (pe * (1.0 - pe) / n).sqrt().max(1.0 / n);
                        let r = self.row(Some(q), Some(t), &format!("cdf_T0_l{l}"), emp);
                        r.stderr = Some(sigma);
                        r.lower = Some(pe - k * sigma);
                        r.upper = Some(pe + k * sigma);
                        r.pass = Some((emp - pe).abs() <= k * sigma);
                        worst = worst.max((emp - pe).abs() / sigma);
                    }
                    self.assert(
                        &format!("CDF of T0 matches the exact chain, l = {l}, q = {q}"),
                        worst <= k,
                        format!("largest deviation {worst:.2} σ"),
                    );
                }
            }
            if medians.len() > 1 {
                let ok = medians.windows(2).all(|w| w[1].1 > w[0].1);
                self.assert(
                    &format!("median T0 increasing in l at q = {q}"),
                    ok,
                    format!("{medians:?}"),
                );
            }
            out.push(json!({"q": q, "medians": medians}));
        }
        self.estimates.insert("hitting".into(), Value::Array(out));
        Ok(())
    }

    fn appendix_functionals(&mut self) -> Result<(), RunError> {
        let cfg = self.cfg;
        let (lo, hi) = (-4i64, 4i64);
        let mut ratios = Vec::new();
        let mut out = Vec::new();
        for (j, &q) in cfg.q_list.iter().enumerate() {
            let p = Self::params(q)?;
            let sup = max_fa_functional(p, lo, hi)?;
            let splits: Result<Vec<_>, kcsm_core::Error> = (0..cfg.n_trajectories)
                .into_par_iter()
                .map(|i| {
                    let mut rng = dynamics_seed(cfg.seed, j, i).rng();
                    let scale = 10f64.powf(rng.random_range(-3.0..1.0));
                    let values = (0..1usize << (hi - lo + 1))
                        .map(|_| scale * rng.random_range(-1.0..1.0))
                        .collect();
                    dirichlet_split(&TestFunction::table_1d(lo, hi, values)?, p)
                })
                .collect();
            let splits = splits?;
            let jump_max = splits.iter().map(|s| s.jump_functional).fold(f64::NEG_INFINITY, f64::max);
            let fa_max = splits.iter().map(|s| s.fa_functional).fold(f64::NEG_INFINITY, f64::max);
            let q2 = q * q;
            let jump_ok = jump_max <= q2 + 1e-10;
            let r = self.row(Some(q), None, "max_jump_functional_random", jump_max);
            r.upper = Some(q2);
            r.pass = Some(jump_ok);
            self.assert(
                &format!("2mu(jf) - D_jump(f) <= q^2 at q = {q}"),
                jump_ok,
                format!("max over {} functions {jump_max:.6e}, q² = {q2:.6e}", splits.len()),
            );
            let cover_ok = fa_max <= sup.value + 1e-10;
            self.row(Some(q), None, "max_fa_functional_random", fa_max).pass = Some(cover_ok);
            self.assert(
                &format!("random f never beat the maximiser at q = {q}"),
                cover_ok,
                format!("{fa_max:.6e} vs {:.6e}", sup.value),
            );
            self.row(Some(q), None, "sup_fa_functional", sup.value).stderr = Some(sup.residual);
            self.row(Some(q), None, "sup_fa_functional_over_q2", sup.value / q2);
            ratios.push(sup.value / q2);
            out.push(json!({"q": q, "sup": sup.value, "iterations": sup.iterations, "jump_max": jump_max}));
        }
        let c = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let floor = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        self.row(None, None, "C", c);
        let ok = c.is_finite() && floor > 0.0 && c / floor <= 2.0;
        self.assert(
            "sup(2mu(jf) - D_FA(f)) <= C q^2 with one C",
            ok,
            format!("C = {c:.4}, sup/q² ranges over [{floor:.4}, {c:.4}]"),
        );
        self.estimates.insert("appendix".into(), json!({"rows": out, "C": c}));
        Ok(())
    }

    fn cluster_mobility(&mut self) -> Result<(), RunError> {
        let cfg = self.cfg;
        let model = cfg.model.0;
        let results: Result<Vec<EstimateReport>, kcsm_core::Error> = cfg
            .q_list
            .par_iter()
            .enumerate()
            .map(|(j, &q)| {
                let p = Params::new(q)?;
                let mut o = ClusterOptions::for_model(model, p);
                o.trajectories = cfg.n_trajectories.max(2);
                if let Some(h) = cfg.aux_horizon {
                    o.horizon = h;
                }
                zero_cluster_mobility(model, p, &o, &mut dynamics_seed(cfg.seed, j, 0).rng())
            })
            .collect();
        let mut points = Vec::new();
        let mut out = Vec::new();
        for (&q, e) in cfg.q_list.iter().zip(results?) {
            self.estimate_row(q, None, "cluster_D", &e);
            self.note_warnings(q, &e);
            out.push(json!({"q": q, "D": e.value, "stderr": e.stderr}));
            points.push((q, e.value, e.stderr));
        }
        self.estimates.insert("cluster".into(), Value::Array(out));
        if points.len() >= 4 && points.iter().all(|p| p.1 > 0.0) {
            let fit = fit_power_law(&points)?;
            self.row(None, None, "exponent", fit.exponent).stderr = Some(fit.stderr);
            let expected = cfg.acceptance.exponent.or(match model {
                ConstraintModel::KZeros(_) => Some(1.0),
                ConstraintModel::East => None,
            });
            if let Some(x) = expected {
                let tol = cfg.acceptance.exponent_tol.unwrap_or(if model == ConstraintModel::fa1f() {
                    0.3
                } else {
                    0.4
                });
                let ok = (fit.exponent - x).abs() <= tol;
                self.assert(
                    "cluster exponent",
                    ok,
                    format!("fitted {:.3} ± {:.3}, expected {x} ± {tol}", fit.exponent, fit.stderr),
                );
            }
        }
        Ok(())
    }

    fn axiom_checks(&mut self) -> Result<(), RunError> {
        let model = self.cfg.model.0;
        let report = check_axioms(&model, &self.cfg.dims)?;
        self.row(None, None, "configs_checked", report.configs_checked as f64);
        self.row(None, None, "interior_sites", report.interior_sites as f64);
        self.row(None, None, "failures", report.failures.len() as f64).pass = Some(report.passed());
        self.assert(
            "constraint axioms",
            report.passed(),
            match report.failures.first() {
                None => format!("{} configurations", report.configs_checked),
                Some(c) => format!("{:?} at {:?}: {}", c.axiom, c.site.0, c.detail),
            },
        );
        Ok(())
    }
}
