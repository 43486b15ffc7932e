//! The swap dynamics of a tracer sitting in a block of at least three
//! zeros, used for the lower bound in the k-zeros models.
//!
//! A window is the occupation of sites `−2..=2` around the tracer packed
//! in five bits, bit `i` holding site `i − 2` (1 = occupied).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::estimate::{estimate_msd_slope, EstimateReport, FitOptions};
use crate::lattice::{Boundary, Params, SpinConfig};
use crate::math;
use crate::rng::exponential;
use crate::{Error, Result};

/// Which pair of zeros next to the origin makes the window belong to `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pattern {
    /// Sites 1 and 2 empty.
    Right,
    /// Sites −1 and 1 empty.
    Center,
    /// Sites −2 and −1 empty.
    Left,
}

#[inline]
fn bit(w: u8, x: i64) -> bool {
    (w >> (x + 2)) & 1 == 1
}

/// The pattern witnessing `w ∈ A`, checked in the order right, center,
/// left; `None` when `w ∉ A`.
pub fn witness(w: u8) -> Option<Pattern> {
    let e = |x| !bit(w, x);
    if !e(0) {
        return None;
    }
    if e(1) && e(2) {
        Some(Pattern::Right)
    } else if e(-1) && e(1) {
        Some(Pattern::Center)
    } else if e(-2) && e(-1) {
        Some(Pattern::Left)
    } else {
        None
    }
}

pub fn in_a(w: u8) -> bool {
    witness(w).is_some()
}

fn window_weight(w: u8, params: Params) -> f64 {
    let ones = (w & 0x1f).count_ones() as i32;
    math::powi(params.p(), ones) * math::powi(params.q(), 5 - ones)
}

/// `μ(A)`, by enumeration of the 2⁵ windows.
pub fn event_a_mass(params: Params) -> f64 {
    (0u8..32).filter(|&w| in_a(w)).map(|w| window_weight(w, params)).sum()
}

/// The law of the window under `μ(·|A)`, indexed by window.
pub fn window_law(params: Params) -> [f64; 32] {
    let z = event_a_mass(params);
    let mut law = [0.0; 32];
    for w in 0u8..32 {
        if in_a(w) {
            law[w as usize] = window_weight(w, params) / z;
        }
    }
    law
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionedConfig {
    config: SpinConfig,
    witness: Pattern,
}

impl ConditionedConfig {
    /// Wrap a one-dimensional periodic configuration whose window at the
    /// origin lies in `A`.
    pub fn new(config: SpinConfig) -> Result<Self> {
        if config.dim() != 1 {
            return Err(Error::UnsupportedDimension {
                expected: 1,
                got: config.dim(),
            });
        }
        if config.len() < 5 || config.boundary() != Boundary::Periodic {
            return Err(Error::Precondition(String::from("need a periodic ring of at least 5 sites")));
        }
        let w = read_window(&config, 0);
        let witness = witness(w).ok_or_else(|| Error::Precondition(format!("window {w:05b} is not in A")))?;
        Ok(ConditionedConfig { config, witness })
    }

    pub fn config(&self) -> &SpinConfig {
        &self.config
    }

    pub fn witness(&self) -> Pattern {
        self.witness
    }

    pub fn window(&self) -> u8 {
        read_window(&self.config, 0)
    }
}

fn read_window(c: &SpinConfig, at: usize) -> u8 {
    let mut w = 0u8;
    for x in -2i64..=2 {
        let i = c.step_index(at, 0, x).expect("periodic ring");
        if c.occupied(i) {
            w |= 1 << (x + 2);
        }
    }
    w
}

/// Draw from `μ(·|A)` on a ring of `dims[0]` sites: the window from its
/// exact conditional law, every other site independently.
pub fn sample_mu3<R: Rng + ?Sized>(params: Params, dims: &[usize], rng: &mut R) -> Result<ConditionedConfig> {
    if dims.len() != 1 {
        return Err(Error::UnsupportedDimension {
            expected: 1,
            got: dims.len(),
        });
    }
    let mut c = SpinConfig::sample(&params, dims, Boundary::Periodic, rng)?;
    if c.len() < 5 {
        return Err(Error::Precondition(String::from("need a ring of at least 5 sites")));
    }
    let law = window_law(params);
    let mut u = rng.random::<f64>();
    let mut w = 0u8;
    for (k, &pk) in law.iter().enumerate() {
        if pk > 0.0 {
            w = k as u8;
            if u < pk {
                break;
            }
            u -= pk;
        }
    }
    for x in -2i64..=2 {
        let i = c.step_index(0, 0, x).expect("periodic ring");
        c.set(i, bit(w, x));
    }
    ConditionedConfig::new(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AuxMove {
    JumpRight,
    JumpLeft,
    Swap,
}

/// Moves enabled in window `w`, each at rate 1.
pub fn enabled_in_window(w: u8) -> Result<Vec<AuxMove>> {
    if !in_a(w) {
        return Err(Error::Precondition(format!("window {w:05b} is not in A")));
    }
    let mut out = Vec::with_capacity(2);
    if !bit(w, 1) {
        out.push(AuxMove::JumpRight);
    }
    if !bit(w, -1) {
        out.push(AuxMove::JumpLeft);
    }
    if bit(w, 1) || bit(w, -1) {
        out.push(AuxMove::Swap);
    }
    Ok(out)
}

pub fn enabled_moves(c: &ConditionedConfig) -> Result<Vec<AuxMove>> {
    enabled_in_window(c.window())
}

/// The move raising the label by one: jump right onto an empty site 1,
/// otherwise swap.
pub fn forward_move(w: u8) -> AuxMove {
    if bit(w, 1) {
        AuxMove::Swap
    } else {
        AuxMove::JumpRight
    }
}

/// The move lowering the label by one.
pub fn backward_move(w: u8) -> AuxMove {
    if bit(w, -1) {
        AuxMove::Swap
    } else {
        AuxMove::JumpLeft
    }
}

/// Change of the label index caused by `mv` in window `w`.
pub fn label_step(w: u8, mv: AuxMove) -> i64 {
    match mv {
        AuxMove::JumpRight => 1,
        AuxMove::JumpLeft => -1,
        AuxMove::Swap if bit(w, 1) => 1,
        AuxMove::Swap => -1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxEvent {
    pub time: f64,
    pub mv: AuxMove,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuxPath {
    /// Empty unless recording was requested.
    pub events: Vec<AuxEvent>,
    pub sample_times: Vec<f64>,
    pub x_samples: Vec<i64>,
    pub n_samples: Vec<i64>,
    pub x: i64,
    pub n: i64,
    pub event_count: u64,
    /// Events after which `|X| < ⌊2|N|/3⌋`.
    pub bound_violations: u64,
    /// Sum of the inter-event times, for rate checks.
    pub holding_time: f64,
}

/// Run the swap dynamics from `c0` up to `horizon`, sampling `X` and `N`
/// every `sample_dt`. The window is followed around the ring; every
/// post-move window is checked to lie in `A`.
pub fn simulate_aux<R: Rng + ?Sized>(
    c0: &ConditionedConfig,
    horizon: f64,
    sample_dt: f64,
    record: bool,
    rng: &mut R,
) -> Result<AuxPath> {
    if !(horizon > 0.0 && horizon.is_finite()) || !(sample_dt > 0.0) {
        return Err(Error::InvalidParameter(String::from("need positive horizon and sample interval")));
    }
    let len = c0.config.len();
    let need = 10.0 * math::sqrt(2.0 * horizon);
    if (len as f64) < need {
        return Err(Error::Precondition(format!(
            "ring of {len} sites is too short for horizon {horizon}; need at least {}",
            math::ceil(need)
        )));
    }
    let mut c = c0.config.clone();
    let mut at = 0usize;
    let step = |i: usize, s: i64| (i as i64 + s).rem_euclid(len as i64) as usize;
    let mut path = AuxPath {
        events: Vec::new(),
        sample_times: Vec::new(),
        x_samples: Vec::new(),
        n_samples: Vec::new(),
        x: 0,
        n: 0,
        event_count: 0,
        bound_violations: 0,
        holding_time: 0.0,
    };
    let mut t = 0.0;
    let mut next_sample = 0usize;
    let samples = math::floor(horizon / sample_dt) as usize;
    loop {
        let dt = exponential(rng, 2.0);
        let t_next = t + dt;
        while next_sample <= samples && (next_sample as f64) * sample_dt < t_next {
            path.sample_times.push(next_sample as f64 * sample_dt);
            path.x_samples.push(path.x);
            path.n_samples.push(path.n);
            next_sample += 1;
        }
        if t_next > horizon {
            break;
        }
        t = t_next;
        path.holding_time += dt;
        let w = read_window(&c, at);
        let moves = enabled_in_window(w).map_err(|e| Error::Invariant(format!("{e}")))?;
        if moves.len() != 2 {
            return Err(Error::Invariant(format!("window {w:05b} enables {} moves", moves.len())));
        }
        let mv = moves[rng.random_range(0..2)];
        path.n += label_step(w, mv);
        match mv {
            AuxMove::JumpRight => {
                at = step(at, 1);
                path.x += 1;
            }
            AuxMove::JumpLeft => {
                at = step(at, -1);
                path.x -= 1;
            }
            AuxMove::Swap => {
                for s in [1i64, 2] {
                    let (a, b) = (step(at, s), step(at, -s));
                    let (oa, ob) = (c.occupied(a), c.occupied(b));
                    c.set(a, ob);
                    c.set(b, oa);
                }
            }
        }
        let w2 = read_window(&c, at);
        if !in_a(w2) {
            return Err(Error::Invariant(format!("move {mv:?} took window {w:05b} to {w2:05b} outside A")));
        }
        path.event_count += 1;
        if path.x.abs() < 2 * path.n.abs() / 3 {
            path.bound_violations += 1;
        }
        if record {
            path.events.push(AuxEvent { time: t, mv });
        }
    }
    Ok(path)
}

fn series_of(paths: &[AuxPath], pick: impl Fn(&AuxPath) -> &[i64]) -> Result<(Vec<Vec<f64>>, f64)> {
    let Some(first) = paths.first() else {
        return Err(Error::Precondition(String::from("no paths")));
    };
    if first.sample_times.len() < 3 || paths.iter().any(|p| p.sample_times != first.sample_times) {
        return Err(Error::Precondition(String::from("paths are not on a common sample grid")));
    }
    let dt = first.sample_times[1] - first.sample_times[0];
    Ok((paths.iter().map(|p| pick(p).iter().map(|&v| v as f64).collect()).collect(), dt))
}

/// `D̄ = lim E[X_t²]/(2t)` from independent paths.
pub fn estimate_dbar(paths: &[AuxPath], opts: &FitOptions) -> Result<EstimateReport> {
    let (series, dt) = series_of(paths, |p| &p.x_samples)?;
    estimate_msd_slope(&series, dt, opts)
}

/// `lim E[N_t²]/(2t)`, which is 1 for the labelled walk.
pub fn estimate_label_diffusivity(paths: &[AuxPath], opts: &FitOptions) -> Result<EstimateReport> {
    let (series, dt) = series_of(paths, |p| &p.n_samples)?;
    estimate_msd_slope(&series, dt, opts)
}

/// `((1+2p)/4)·q⁴·D̄`, the lower bound on `e₁·De₁` for three zeros.
pub fn kzeros_lower_bound(dbar: &EstimateReport, params: Params) -> f64 {
    let q = params.q();
    (1.0 + 2.0 * params.p()) / 4.0 * q * q * q * q * dbar.value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use alloc::vec;

    fn w(s: &str) -> u8 {
        // Sites −2..2 left to right.
        s.bytes().enumerate().fold(0, |acc, (i, b)| acc | (((b == b'1') as u8) << i))
    }

    #[test]
    fn rule_reading() {
        let all = enabled_in_window(w("10001")).unwrap();
        assert_eq!(all, vec![AuxMove::JumpRight, AuxMove::JumpLeft]);
        let left = enabled_in_window(w("00010")).unwrap();
        assert_eq!(left, vec![AuxMove::JumpLeft, AuxMove::Swap]);
        assert_eq!(witness(w("00010")), Some(Pattern::Left));
        assert_eq!(witness(w("11000")), Some(Pattern::Right));
        assert_eq!(witness(w("10001")), Some(Pattern::Center));
        assert!(enabled_in_window(w("10101")).is_err());
        assert!(enabled_in_window(w("00100")).is_err());
    }

    #[test]
    fn exactly_two_moves_everywhere_in_a() {
        let mut count = 0;
        for v in 0u8..32 {
            if in_a(v) {
                count += 1;
                assert_eq!(enabled_in_window(v).unwrap().len(), 2);
                let f = forward_move(v);
                let b = backward_move(v);
                assert_ne!(f, b);
                assert_eq!(label_step(v, f), 1);
                assert_eq!(label_step(v, b), -1);
            }
        }
        // η_0 = 0 and one of three pairs of the four other sites empty.
        assert_eq!(count, 8);
    }

    /// Apply a move to a window on sites −4..=4 (bit `x + 4`), leaving the
    /// newly exposed site empty; returns the window and which sites of the
    /// result are known.
    fn apply9(v: u16, mv: AuxMove) -> (u16, u16) {
        match mv {
            AuxMove::JumpRight => (v >> 1, 0x0ff),
            AuxMove::JumpLeft => ((v << 1) & 0x1ff, 0x1fe),
            AuxMove::Swap => {
                let get = |x: i64| (v >> (x + 4)) & 1;
                let mut out = v;
                for s in [1i64, 2] {
                    out &= !(1 << (s + 4)) & !(1 << (-s + 4));
                    out |= get(-s) << (s + 4) | get(s) << (-s + 4);
                }
                (out, 0x1ff)
            }
        }
    }

    fn center(v: u16) -> u8 {
        ((v >> 2) & 0x1f) as u8
    }

    #[test]
    fn labelling_is_consistent_and_reversible() {
        let p = Params::new(0.3).unwrap();
        let weight = |v: u16, mask: u16| {
            let ones = (v & mask).count_ones() as i32;
            let known = mask.count_ones() as i32;
            math::powi(p.p(), ones) * math::powi(p.q(), known - ones)
        };
        for v in 0u16..512 {
            if !in_a(center(v)) {
                continue;
            }
            for mv in enabled_in_window(center(v)).unwrap() {
                let (v2, known) = apply9(v, mv);
                assert!(in_a(center(v2)), "{v:09b} {mv:?}");
                // The label moves by ±1 and the opposite move undoes it.
                let dn = label_step(center(v), mv);
                let back = if dn == 1 { backward_move(center(v2)) } else { forward_move(center(v2)) };
                assert_eq!(label_step(center(v2), back), -dn);
                let (v3, known3) = apply9(v2, back);
                let mask = known & known3;
                assert_eq!(v3 & mask, v & mask, "{v:09b} {mv:?} {back:?}");
                // Detailed balance w.r.t. the product measure on the common
                // sites: both directions have rate 1 and equal weight.
                assert!((weight(v, mask) - weight(v3, mask)).abs() < 1e-15);
                assert_eq!((v & 0x1ff).count_ones() - (v2 & known).count_ones(), match mv {
                    AuxMove::JumpRight => (v & 1) as u32,
                    AuxMove::JumpLeft => ((v >> 8) & 1) as u32,
                    AuxMove::Swap => 0,
                });
            }
        }
    }

    #[test]
    fn a_mass_identity() {
        for q in [0.1, 0.3, 0.5, 0.77] {
            let p = Params::new(q).unwrap();
            let expect = q * q * q * (1.0 + 2.0 * (1.0 - q));
            assert!((event_a_mass(p) - expect).abs() < 1e-15);
            assert!((window_law(p).iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sampler_window_law() {
        let p = Params::new(0.3).unwrap();
        let law = window_law(p);
        let mut counts = [0u32; 32];
        let mut rng = stream_rng(13, 0);
        let n = 100_000;
        for _ in 0..n {
            let c = sample_mu3(p, &[16], &mut rng).unwrap();
            assert!(in_a(c.window()));
            counts[c.window() as usize] += 1;
        }
        let tv: f64 = 0.5 * law.iter().zip(&counts).map(|(a, &b)| (a - b as f64 / n as f64).abs()).sum::<f64>();
        assert!(tv < 0.01, "{tv}");
    }

    #[test]
    fn path_invariants() {
        let p = Params::new(0.3).unwrap();
        let mut rng = stream_rng(14, 0);
        for _ in 0..200 {
            let c = sample_mu3(p, &[512], &mut rng).unwrap();
            let path = simulate_aux(&c, 200.0, 1.0, true, &mut rng).unwrap();
            assert_eq!(path.bound_violations, 0);
            assert_eq!(path.events.len() as u64, path.event_count);
            // X changes only on jumps.
            let jumps: i64 = path
                .events
                .iter()
                .map(|e| match e.mv {
                    AuxMove::JumpRight => 1,
                    AuxMove::JumpLeft => -1,
                    AuxMove::Swap => 0,
                })
                .sum();
            assert_eq!(jumps, path.x);
            assert_eq!(path.sample_times.len(), 201);
            assert!((path.n - path.event_count as i64) % 2 == 0);
        }
    }

    #[test]
    fn ring_too_short_is_rejected() {
        let p = Params::new(0.3).unwrap();
        let c = sample_mu3(p, &[64], &mut stream_rng(15, 0)).unwrap();
        assert!(matches!(simulate_aux(&c, 1e4, 1.0, false, &mut stream_rng(15, 1)), Err(Error::Precondition(_))));
    }

    #[test]
    fn bound_arithmetic() {
        let r = EstimateReport {
            value: 4.0 / 9.0,
            stderr: 0.0,
            n_samples: 20,
            burn_in: 0.0,
            fit_window: (0.0, 1.0),
            r_squared: 1.0,
            warnings: vec![],
            method: String::new(),
        };
        let b = kzeros_lower_bound(&r, Params::new(0.3).unwrap());
        assert!((b - 2.4 / 4.0 * 0.0081 * 4.0 / 9.0).abs() < 1e-15);
        assert!((b - 0.00216).abs() < 1e-12);
        let q = 1e-3;
        let small = kzeros_lower_bound(&r, Params::new(q).unwrap()) / q.powi(4);
        assert!((small - 0.75 * 4.0 / 9.0).abs() < 1e-3);
    }
}
