//! Estimators: diffusion coefficients from displacement samples, power-law
//! fits, the easy-bounds sandwich and East ratio reports.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::constraints::ConstraintModel;
use crate::dynamics::Trajectory;
use crate::exact::SpectralResult;
use crate::lattice::{Direction, Params};
use crate::math;
use crate::rng::exponential;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Warning {
    /// Mean MSD against lag fits a line with `R²` below the threshold.
    Nonlinear { r_squared: f64 },
    /// Some trajectories moved far enough to risk wrapping the torus.
    Wrapped { trajectories: usize },
    /// Samples dropped before the horizon.
    Censored { samples: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub burn_in: f64,
    /// Lag interval used for the slope fit.
    pub fit_window: (f64, f64),
    pub r_squared: f64,
    pub warnings: Vec<Warning>,
    pub method: String,
}

impl EstimateReport {
    pub fn nonlinear(&self) -> bool {
        self.warnings.iter().any(|w| matches!(w, Warning::Nonlinear { .. }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub burn_in_frac: f64,
    /// Lag range as fractions of the post-burn-in span.
    pub lag_lo_frac: f64,
    pub lag_hi_frac: f64,
    pub max_lags: usize,
    pub min_series: usize,
    pub r2_threshold: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            burn_in_frac: 0.1,
            lag_lo_frac: 0.05,
            lag_hi_frac: 0.25,
            max_lags: 24,
            min_series: 20,
            r2_threshold: 0.98,
        }
    }
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, R²)`.
fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (my - slope * mx, slope, r2)
}

/// Sum after sorting, so that the result does not depend on input order.
fn ordered_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = ordered_sum(v.to_vec()) / n;
    let var = ordered_sum(v.iter().map(|x| (x - m) * (x - m)).collect()) / (n - 1.0);
    (m, math::sqrt(var / n))
}

/// Diffusivity `lim E[y_t²]/(2t)` from scalar series sampled every `dt`.
///
/// Each series yields a time-averaged mean square increment at every lag in
/// the fit window, taken over start times after the burn-in; the slope of a
/// straight-line fit, halved, is its estimate. Series are i.i.d., so the
/// reported error is the standard error of the per-series estimates.
pub fn estimate_msd_slope(series: &[Vec<f64>], dt: f64, opts: &FitOptions) -> Result<EstimateReport> {
    if series.len() < opts.min_series.max(2) {
        return Err(Error::Precondition(format!(
            "need at least {} independent series, got {}",
            opts.min_series.max(2),
            series.len()
        )));
    }
    let m = series[0].len();
    if series.iter().any(|s| s.len() != m) {
        return Err(Error::Precondition(String::from("series are not on a common sample grid")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(String::from("sample interval must be positive")));
    }
    let start = math::ceil(opts.burn_in_frac * (m - 1) as f64) as usize;
    let span = (m - 1).saturating_sub(start);
    let lo = (math::floor(opts.lag_lo_frac * span as f64) as usize).max(1);
    let hi = (math::floor(opts.lag_hi_frac * span as f64) as usize).min(span);
    if hi <= lo {
        return Err(Error::Precondition(format!(
            "fit window holds too few samples ({m} samples, lags {lo}..{hi})"
        )));
    }
    let count = opts.max_lags.max(2).min(hi - lo + 1);
    let mut lags: Vec<usize> = (0..count)
        .map(|k| lo + math::floor((hi - lo) as f64 * k as f64 / (count - 1) as f64 + 0.5) as usize)
        .collect();
    lags.dedup();
    let x: Vec<f64> = lags.iter().map(|&l| l as f64 * dt).collect();

    let mut per_series = Vec::with_capacity(series.len());
    let mut curves = Vec::with_capacity(series.len());
    for s in series {
        let curve: Vec<f64> = lags
            .iter()
            .map(|&l| {
                let n = m - l - start;
                let mut acc = 0.0;
                for i in start..m - l {
                    let d = s[i + l] - s[i];
                    acc += d * d;
                }
                acc / n as f64
            })
            .collect();
        per_series.push(0.5 * ols(&x, &curve).1);
        curves.push(curve);
    }
    let (value, stderr) = mean_and_stderr(&per_series);
    let mean_curve: Vec<f64> = (0..lags.len())
        .map(|k| ordered_sum(curves.iter().map(|c| c[k]).collect()) / curves.len() as f64)
        .collect();
    let r_squared = ols(&x, &mean_curve).2;
    let mut warnings = Vec::new();
    if r_squared < opts.r2_threshold {
        warnings.push(Warning::Nonlinear { r_squared });
    }
    Ok(EstimateReport {
        value,
        stderr,
        n_samples: series.len(),
        burn_in: start as f64 * dt,
        fit_window: (x[0], x[x.len() - 1]),
        r_squared,
        warnings,
        method: String::from("time-averaged mean square increment, linear fit over lags, per-series standard error"),
    })
}

/// `u·Du` from tracer trajectories: half the long-lag slope of
/// `E[(u·X_t)²]`.
pub fn estimate_d(trajectories: &[Trajectory], u: &Direction, opts: &FitOptions) -> Result<EstimateReport> {
    let Some(first) = trajectories.first() else {
        return Err(Error::Precondition(String::from("no trajectories")));
    };
    if trajectories.iter().any(|t| t.d != u.dim()) {
        return Err(Error::UnsupportedDimension {
            expected: first.d,
            got: u.dim(),
        });
    }
    if trajectories.iter().any(|t| t.sample_times != first.sample_times) {
        return Err(Error::Precondition(String::from("trajectories are not on a common sample grid")));
    }
    if first.len() < 3 {
        return Err(Error::Precondition(String::from("too few samples per trajectory")));
    }
    let dt = first.sample_times[1] - first.sample_times[0];
    let series: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|t| (0..t.len()).map(|k| u.dot(t.displacement(k))).collect())
        .collect();
    let mut report = estimate_msd_slope(&series, dt, opts)?;
    let wrapped = trajectories.iter().filter(|t| t.meta.wrap_warning).count();
    if wrapped > 0 {
        report.warnings.push(Warning::Wrapped { trajectories: wrapped });
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub stderr: f64,
    /// Intercept of `ln D` against `ln q`.
    pub log_prefactor: f64,
    pub points: usize,
}

/// Weighted least squares of `ln D` on `ln q` with weights `(D/σ)²`. When
/// any `σ` is zero the fit is unweighted and the error comes from the
/// residuals. Weighted errors are inflated by the reduced χ² when it
/// exceeds one.
pub fn fit_power_law(points: &[(f64, f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 4 {
        return Err(Error::Precondition(String::from("need at least 4 points")));
    }
    if points.iter().any(|&(q, d, s)| !(q > 0.0) || !(d > 0.0) || !(s >= 0.0)) {
        return Err(Error::Domain(String::from("power-law fit needs q > 0, D > 0 and σ ≥ 0")));
    }
    let (qmin, qmax) = points
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &(q, _, _)| (a.min(q), b.max(q)));
    if qmax < 2.0 * qmin {
        return Err(Error::Precondition(String::from("q values must span at least a factor 2")));
    }
    let x: Vec<f64> = points.iter().map(|p| math::ln(p.0)).collect();
    let y: Vec<f64> = points.iter().map(|p| math::ln(p.1)).collect();
    let unweighted = points.iter().any(|p| p.2 == 0.0);
    let w: Vec<f64> = points
        .iter()
        .map(|&(_, d, s)| if unweighted { 1.0 } else { (d / s) * (d / s) })
        .collect();
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        s += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    let det = s * sxx - sx * sx;
    let slope = (s * sxy - sx * sy) / det;
    let icpt = (sy - slope * sx) / s;
    let chi2: f64 = (0..x.len())
        .map(|i| {
            let r = y[i] - icpt - slope * x[i];
            w[i] * r * r
        })
        .sum();
    let dof = (x.len() - 2) as f64;
    let var = if unweighted {
        chi2 / dof * s / det
    } else {
        (s / det) * (chi2 / dof).max(1.0)
    };
    Ok(PowerLawFit {
        exponent: slope,
        stderr: math::sqrt(var),
        log_prefactor: icpt,
        points: x.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichReport {
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
    pub stderr: f64,
    /// `value + 3σ − lower`; non-negative when the lower bound holds.
    pub lower_margin: f64,
    /// `upper + 3σ − value`; non-negative when the upper bound holds.
    pub upper_margin: f64,
}

impl SandwichReport {
    pub fn lower_ok(&self) -> bool {
        self.lower_margin >= 0.0
    }

    pub fn upper_ok(&self) -> bool {
        self.upper_margin >= 0.0
    }

    pub fn passed(&self) -> bool {
        self.lower_ok() && self.upper_ok()
    }
}

/// Compare an estimate of `u·Du` with `[gap/(4d+gap)·q², q²]` at 3σ.
pub fn sandwich_check(d_hat: &EstimateReport, gap: &SpectralResult, params: Params, d: usize) -> SandwichReport {
    let (lower, upper) = crate::exact::gap_sandwich(gap, params, d);
    let three = 3.0 * d_hat.stderr;
    SandwichReport {
        lower,
        upper,
        value: d_hat.value,
        stderr: d_hat.stderr,
        lower_margin: d_hat.value + three - lower,
        upper_margin: upper + three - d_hat.value,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EastRatioRow {
    pub q: f64,
    pub d: f64,
    pub d_stderr: f64,
    pub gap: f64,
    pub d_over_gap: f64,
    /// `ln D / ln gap`.
    pub log_ratio: f64,
    /// `D / (q² gap)`.
    pub c_estimate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EastRatioReport {
    /// Sorted by decreasing `q`.
    pub rows: Vec<EastRatioRow>,
    /// `ln D / ln gap` increases along the sweep.
    pub increasing: bool,
    pub final_log_ratio: f64,
    /// Smallest `(D − 3σ)/(q² gap)` over the sweep.
    pub c_lower: f64,
}

/// Ratios between East diffusion estimates and spectral gaps along a sweep
/// in `q`.
pub fn east_ratio_report(points: &[(Params, EstimateReport, SpectralResult)]) -> Result<EastRatioReport> {
    if points.is_empty() {
        return Err(Error::Precondition(String::from("empty sweep")));
    }
    let mut rows: Vec<EastRatioRow> = points
        .iter()
        .map(|(params, est, gap)| {
            let q = params.q();
            EastRatioRow {
                q,
                d: est.value,
                d_stderr: est.stderr,
                gap: gap.gap,
                d_over_gap: est.value / gap.gap,
                log_ratio: math::ln(est.value) / math::ln(gap.gap),
                c_estimate: est.value / (q * q * gap.gap),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.q.total_cmp(&a.q));
    let increasing = rows.windows(2).all(|w| w[1].log_ratio > w[0].log_ratio);
    let c_lower = rows
        .iter()
        .map(|r| (r.d - 3.0 * r.d_stderr) / (r.q * r.q * r.gap))
        .fold(f64::INFINITY, f64::min);
    Ok(EastRatioReport {
        final_log_ratio: rows[rows.len() - 1].log_ratio,
        rows,
        increasing,
        c_lower,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterOptions {
    pub horizon: f64,
    pub trajectories: usize,
    /// Censor once the number of zeros exceeds the resting size by this much.
    pub max_extra_zeros: usize,
    /// Censor once the zeros span more than this many sites.
    pub max_diameter: i64,
}

impl ClusterOptions {
    pub fn for_model(model: ConstraintModel, params: Params) -> Self {
        let k = model.threshold() as i64;
        ClusterOptions {
            horizon: 200.0 / params.q(),
            trajectories: 400,
            max_extra_zeros: 3,
            max_diameter: 3 * k + 4,
        }
    }
}

/// Zeros of a configuration that is occupied everywhere else, on ℤ.
fn cluster_rates(model: ConstraintModel, params: Params, zeros: &[i64], out: &mut Vec<(i64, f64)>) {
    out.clear();
    let r = model.radius() as i64;
    let lo = zeros[0] - r;
    let hi = zeros[zeros.len() - 1] + r;
    let empty = |x: i64| zeros.binary_search(&x).is_ok();
    for y in lo..=hi {
        let allowed = match model {
            ConstraintModel::East => empty(y + 1),
            ConstraintModel::KZeros(k) => {
                let k = k as i64;
                zeros.iter().filter(|&&z| z != y && (z - y).abs() <= k).count() >= k as usize
            }
        };
        if allowed {
            out.push((y, if empty(y) { params.p() } else { params.q() }));
        }
    }
}

/// Left end of the zeros when they form the resting block of `k`
/// consecutive sites.
fn resting_position(zeros: &[i64], k: usize) -> Option<i64> {
    (zeros.len() == k && zeros[k - 1] - zeros[0] == k as i64 - 1).then(|| zeros[0])
}

/// Diffusivity of an isolated block of `k` zeros on an otherwise occupied
/// line (`k` the constraint threshold). The block is located at the times
/// it is back at rest; a run is censored when the zeros proliferate or
/// spread, and then contributes up to its last resting time. The estimate
/// is `Σ X² / (2 Σ t)` with a ratio-estimator standard error.
pub fn zero_cluster_mobility<R: Rng>(
    model: ConstraintModel,
    params: Params,
    opts: &ClusterOptions,
    rng: &mut R,
) -> Result<EstimateReport> {
    let k = model.threshold();
    if k == 0 {
        return Err(Error::Precondition(String::from("no resting block without a constraint threshold")));
    }
    if !(opts.horizon > 0.0) || opts.trajectories < 2 {
        return Err(Error::InvalidParameter(String::from("need a positive horizon and at least two runs")));
    }
    let mut a = Vec::with_capacity(opts.trajectories);
    let mut b = Vec::with_capacity(opts.trajectories);
    let mut censored = 0usize;
    let mut rates = Vec::new();
    for _ in 0..opts.trajectories {
        let mut zeros: Vec<i64> = (0..k as i64).collect();
        let (mut t, mut rest_t, mut rest_x) = (0.0, 0.0, 0i64);
        loop {
            cluster_rates(model, params, &zeros, &mut rates);
            let total: f64 = rates.iter().map(|r| r.1).sum();
            if total == 0.0 {
                rest_t = opts.horizon;
                break;
            }
            t += exponential(rng, total);
            if t >= opts.horizon {
                if resting_position(&zeros, k).is_some() {
                    rest_t = opts.horizon;
                }
                break;
            }
            let mut pick = rng.random::<f64>() * total;
            let mut site = rates[rates.len() - 1].0;
            for &(y, r) in &rates {
                if pick < r {
                    site = y;
                    break;
                }
                pick -= r;
            }
            match zeros.binary_search(&site) {
                Ok(i) => {
                    zeros.remove(i);
                }
                Err(i) => zeros.insert(i, site),
            }
            if let Some(x) = resting_position(&zeros, k) {
                rest_t = t;
                rest_x = x;
            } else if zeros.len() > k + opts.max_extra_zeros
                || zeros.is_empty()
                || zeros[zeros.len() - 1] - zeros[0] >= opts.max_diameter
            {
                censored += 1;
                break;
            }
        }
        a.push((rest_x * rest_x) as f64);
        b.push(2.0 * rest_t);
    }
    let sb = ordered_sum(b.clone());
    if sb == 0.0 {
        return Err(Error::Precondition(String::from("no observed resting time")));
    }
    let value = ordered_sum(a.clone()) / sb;
    let n = a.len() as f64;
    let resid = ordered_sum(a.iter().zip(&b).map(|(x, y)| (x - value * y) * (x - value * y)).collect());
    let stderr = math::sqrt(resid * n / (n - 1.0)) / sb;
    let mut warnings = Vec::new();
    if censored > 0 {
        warnings.push(Warning::Censored { samples: censored });
    }
    Ok(EstimateReport {
        value,
        stderr,
        n_samples: a.len(),
        burn_in: 0.0,
        fit_window: (0.0, opts.horizon),
        r_squared: f64::NAN,
        warnings,
        method: String::from("resting-block displacement, ratio estimator"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::exact::SpectralMethod;
    use crate::rng::stream_rng;

    fn report(value: f64, stderr: f64) -> EstimateReport {
        EstimateReport {
            value,
            stderr,
            n_samples: 20,
            burn_in: 0.0,
            fit_window: (0.0, 1.0),
            r_squared: 1.0,
            warnings: vec![],
            method: String::new(),
        }
    }

    fn gap(g: f64) -> SpectralResult {
        SpectralResult {
            gap: g,
            relaxation_time: 1.0 / g,
            class_size: 2,
            method: SpectralMethod::Dense,
            residual: 0.0,
        }
    }

    #[test]
    fn random_walk_series() {
        // Rate-1 each way walk sampled every 0.5: E[y_t²] = 2t, slope/2 = 1.
        let mut rng = stream_rng(11, 0);
        let series: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let mut y = 0.0;
                let mut t = 0.0;
                let mut next = exponential(&mut rng, 2.0);
                (0..2001)
                    .map(|k| {
                        let target = k as f64 * 0.5;
                        while next <= target {
                            y += if rng.random::<bool>() { 1.0 } else { -1.0 };
                            t = next;
                            next = t + exponential(&mut rng, 2.0);
                        }
                        y
                    })
                    .collect()
            })
            .collect();
        let r = estimate_msd_slope(&series, 0.5, &FitOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 3.0 * r.stderr, "{} ± {}", r.value, r.stderr);
        assert!(!r.nonlinear());
        let mut rev = series.clone();
        rev.reverse();
        let r2 = estimate_msd_slope(&rev, 0.5, &FitOptions::default()).unwrap();
        assert_eq!(r.value, r2.value);
        assert_eq!(r.stderr, r2.stderr);
    }

    #[test]
    fn frozen_series_give_zero() {
        let series = vec![vec![3.0; 100]; 20];
        let r = estimate_msd_slope(&series, 1.0, &FitOptions::default()).unwrap();
        assert_eq!((r.value, r.stderr), (0.0, 0.0));
        assert!(estimate_msd_slope(&series[..5], 1.0, &FitOptions::default()).is_err());
    }

    #[test]
    fn sublinear_growth_is_flagged() {
        // y_k = sqrt(k) deterministically: increments are not linear in lag.
        let series: Vec<Vec<f64>> = (0..20)
            .map(|i| (0..400).map(|k| math::ln(1.0 + k as f64) * (1.0 + i as f64)).collect())
            .collect();
        let opts = FitOptions {
            burn_in_frac: 0.0,
            lag_lo_frac: 0.01,
            lag_hi_frac: 0.99,
            ..FitOptions::default()
        };
        assert!(estimate_msd_slope(&series, 1.0, &opts).unwrap().nonlinear());
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [0.1, 0.2, 0.3, 0.4].iter().map(|&q: &f64| (q, q * q, 0.0)).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-9 && f.stderr < 1e-9);
        let pts: Vec<_> = [0.1, 0.15, 0.2, 0.3].iter().map(|&q: &f64| (q, 0.7 * q * q * q, 1e-3 * q)).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.exponent - 3.0).abs() < 1e-9);
        assert!((f.log_prefactor - math::ln(0.7)).abs() < 1e-9);
    }

    #[test]
    fn power_law_preconditions() {
        let ok = [(0.1, 1.0, 0.1), (0.2, 1.0, 0.1), (0.3, 1.0, 0.1), (0.4, 1.0, 0.1)];
        assert!(fit_power_law(&ok[..3]).is_err());
        let mut bad = ok;
        bad[1].1 = 0.0;
        assert!(matches!(fit_power_law(&bad), Err(Error::Domain(_))));
        let narrow = [(0.3, 1.0, 0.1), (0.35, 1.0, 0.1), (0.4, 1.0, 0.1), (0.45, 1.0, 0.1)];
        assert!(fit_power_law(&narrow).is_err());
    }

    #[test]
    fn sandwich_examples() {
        let p = Params::new(0.4).unwrap();
        let q2 = 0.16;
        assert!(sandwich_check(&report(q2 / 2.0, 0.0), &gap(1.0), p, 1).passed());
        let s = sandwich_check(&report(2.0 * q2, 0.001), &gap(1.0), p, 1);
        assert!(s.lower_ok() && !s.upper_ok());
        let s = sandwich_check(&report(q2 / 6.0, 0.0), &gap(1.0), p, 1);
        assert!(!s.lower_ok());
    }

    #[test]
    fn east_ratio_arithmetic() {
        let p = Params::new(0.3).unwrap();
        let r = east_ratio_report(&[(p, report(0.01, 0.0), gap(0.01))]).unwrap();
        assert!((r.final_log_ratio - 1.0).abs() < 1e-15);
        let p2 = Params::new(0.5).unwrap();
        let r = east_ratio_report(&[
            (p, report(1e-3, 1e-5), gap(1e-3)),
            (p2, report(0.2, 1e-4), gap(0.1)),
        ])
        .unwrap();
        assert_eq!(r.rows[0].q, 0.5);
        assert!(r.increasing);
        assert!(r.c_lower > 0.0);
    }

    #[test]
    fn single_zero_moves_at_rate_of_order_q() {
        // Leading order for FA-1f: a neighbour empties at rate 2q, then one of
        // the two zeros refills, moving the rest position with probability ½.
        let q = 0.05;
        let p = Params::new(q).unwrap();
        let mut opts = ClusterOptions::for_model(ConstraintModel::fa1f(), p);
        opts.trajectories = 300;
        let r = zero_cluster_mobility(ConstraintModel::fa1f(), p, &opts, &mut stream_rng(12, 0)).unwrap();
        assert!((r.value - q / 2.0).abs() < 0.25 * q, "{} ± {}", r.value, r.stderr);
    }

    #[test]
    fn resting_block() {
        assert_eq!(resting_position(&[3, 4], 2), Some(3));
        assert_eq!(resting_position(&[3, 5], 2), None);
        assert_eq!(resting_position(&[3], 2), None);
    }
}
