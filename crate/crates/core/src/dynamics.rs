//! Continuous-time simulation via the graphical construction.
//!
//! Every site carries a rate-1 Poisson clock and, when a tracer is present,
//! each of its `2d` jump directions carries one more. A ring draws a mark
//! (empty with probability `q`); if the constraint holds the site takes the
//! mark, otherwise the ring is rejected but still reported. Events are drawn
//! from the superposed clock, so the random stream consumed per event does
//! not depend on the frame, which gives an exact coupling between the joint
//! process and the environment seen from the tracer.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::constraints::{ConstraintModel, NeighborTable};
use crate::lattice::{Boundary, Params, Site, SpinConfig};
use crate::rng::{exponential, stream_rng, SimRng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RingOutcome {
    Rejected,
    Empty,
    Occupied,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    /// A clock ring at a lab-frame site index.
    Ring {
        site: usize,
        mark_empty: bool,
        outcome: RingOutcome,
    },
    /// A tracer jump attempt along `axis` by `step` (±1).
    Tracer { axis: usize, step: i8, jumped: bool },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Which configuration the simulation stores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    Lab,
    /// The environment recentred on the tracer after every jump.
    Tracer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TracerState {
    /// Lab-frame site index of the tracer on the torus.
    pub wrapped: usize,
    /// Cumulative displacement, never wrapped.
    pub unwrapped: Vec<i64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub rings: u64,
    pub flips: u64,
    pub jump_attempts: u64,
    pub jumps: u64,
}

pub struct Simulation<R> {
    model: ConstraintModel,
    params: Params,
    table: NeighborTable,
    config: SpinConfig,
    rng: R,
    time: f64,
    pending: Option<f64>,
    tracer: Option<TracerState>,
    frame: Frame,
    neg_x: Vec<i64>,
    stats: RunStats,
}

impl<R: Rng> Simulation<R> {
    /// The environment process alone.
    pub fn environment(model: ConstraintModel, params: Params, config0: SpinConfig, rng: R) -> Result<Self> {
        let table = NeighborTable::new(model, config0.dims(), config0.boundary())?;
        Ok(Simulation {
            model,
            params,
            table,
            neg_x: vec![0; config0.dim()],
            config: config0,
            rng,
            time: 0.0,
            pending: None,
            tracer: None,
            frame: Frame::Lab,
            stats: RunStats::default(),
        })
    }

    /// Environment plus a tracer started at the origin. In the tracer frame
    /// `config0` is read as already centred on the tracer.
    pub fn with_tracer(
        model: ConstraintModel,
        params: Params,
        config0: SpinConfig,
        frame: Frame,
        rng: R,
    ) -> Result<Self> {
        if config0.boundary() != Boundary::Periodic {
            return Err(Error::BoundaryViolation(String::from(
                "tracer dynamics need a periodic lattice",
            )));
        }
        let d = config0.dim();
        let mut sim = Self::environment(model, params, config0, rng)?;
        sim.tracer = Some(TracerState {
            wrapped: 0,
            unwrapped: vec![0; d],
        });
        sim.frame = frame;
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn config(&self) -> &SpinConfig {
        &self.config
    }

    pub fn tracer(&self) -> Option<&TracerState> {
        self.tracer.as_ref()
    }

    pub fn displacement(&self) -> &[i64] {
        self.tracer.as_ref().map_or(&[], |t| &t.unwrapped)
    }

    pub fn stats(&self) -> RunStats {
        self.stats
    }

    pub fn model(&self) -> ConstraintModel {
        self.model
    }

    pub fn params(&self) -> Params {
        self.params
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Lab-frame configuration. In the tracer frame this undoes the recentring.
    pub fn lab_config(&self) -> SpinConfig {
        match (self.frame, &self.tracer) {
            (Frame::Tracer, Some(t)) => {
                let neg: Vec<i64> = self.config.coords_of(t.wrapped).0.iter().map(|c| -c).collect();
                self.config.shift(&Site(neg)).expect("periodic lattice")
            }
            _ => self.config.clone(),
        }
    }

    fn total_rate(&self) -> f64 {
        let n = self.config.len();
        (n + if self.tracer.is_some() { 2 * self.config.dim() } else { 0 }) as f64
    }

    /// Execute the next event if it happens no later than `horizon`.
    /// Otherwise advance the clock to `horizon` and keep the event pending,
    /// so that splitting a run into segments does not change it.
    pub fn step_until(&mut self, horizon: f64) -> Option<Event> {
        let rate = self.total_rate();
        let next = match self.pending {
            Some(t) => t,
            None => {
                let t = self.time + exponential(&mut self.rng, rate);
                self.pending = Some(t);
                t
            }
        };
        if next > horizon {
            self.time = self.time.max(horizon);
            return None;
        }
        self.pending = None;
        self.time = next;
        Some(self.execute(next))
    }

    fn execute(&mut self, time: f64) -> Event {
        let n = self.config.len();
        let slots = self.total_rate() as usize;
        let k = self.rng.random_range(0..slots);
        if k < n {
            let mark_empty = self.rng.random::<f64>() < self.params.q();
            let local = match (self.frame, &self.tracer) {
                (Frame::Tracer, Some(t)) if t.wrapped != 0 => {
                    self.config.offset_index(k, &self.neg_x).expect("periodic lattice")
                }
                _ => k,
            };
            self.stats.rings += 1;
            let outcome = if self.table.allows(&self.config, local) {
                if self.config.vacant(local) != mark_empty {
                    self.stats.flips += 1;
                }
                self.config.set(local, !mark_empty);
                if mark_empty {
                    RingOutcome::Empty
                } else {
                    RingOutcome::Occupied
                }
            } else {
                RingOutcome::Rejected
            };
            Event {
                time,
                kind: EventKind::Ring {
                    site: k,
                    mark_empty,
                    outcome,
                },
            }
        } else {
            let axis = (k - n) / 2;
            let step: i8 = if (k - n) % 2 == 0 { 1 } else { -1 };
            let jumped = self.try_jump(axis, step as i64);
            Event {
                time,
                kind: EventKind::Tracer { axis, step, jumped },
            }
        }
    }

    fn try_jump(&mut self, axis: usize, step: i64) -> bool {
        self.stats.jump_attempts += 1;
        let tracer = self.tracer.as_mut().expect("tracer present");
        let here = match self.frame {
            Frame::Lab => tracer.wrapped,
            Frame::Tracer => 0,
        };
        let there = self.config.step_index(here, axis, step).expect("periodic lattice");
        if self.config.occupied(here) || self.config.occupied(there) {
            return false;
        }
        tracer.wrapped = self.config.step_index(tracer.wrapped, axis, step).expect("periodic lattice");
        tracer.unwrapped[axis] += step;
        if self.frame == Frame::Tracer {
            let mut y = vec![0i64; self.config.dim()];
            y[axis] = step;
            self.config = self.config.shift(&Site(y)).expect("periodic lattice");
            let pos = self.config.coords_of(tracer.wrapped);
            for (n, c) in self.neg_x.iter_mut().zip(pos.0) {
                *n = -c;
            }
        }
        debug_assert!(self.frame != Frame::Tracer || self.config.vacant(0));
        self.stats.jumps += 1;
        true
    }

    /// Run to `horizon`, passing every event to `sink`.
    pub fn run_until<F: FnMut(&Event)>(&mut self, horizon: f64, mut sink: F) {
        while let Some(e) = self.step_until(horizon) {
            sink(&e);
        }
    }

    /// Run to `horizon`, calling `at_sample` at `0, dt, 2dt, …` (and at
    /// `horizon` itself when it is not on the grid).
    pub fn run_sampled<F, G>(&mut self, horizon: f64, dt: f64, mut sink: F, mut at_sample: G)
    where
        F: FnMut(&Event),
        G: FnMut(f64, &Self),
    {
        let grid = sample_grid(self.time, horizon, dt);
        for t in grid {
            self.run_until(t, &mut sink);
            at_sample(t, self);
        }
    }
}

fn sample_grid(start: f64, horizon: f64, dt: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let t = start + k as f64 * dt;
        if t > horizon * (1.0 + 1e-12) {
            break;
        }
        grid.push(t.min(horizon));
        k += 1;
    }
    if grid.last().is_some_and(|&t| t < horizon) {
        grid.push(horizon);
    }
    grid
}

/// Reproducibility handle for a single run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seed {
    pub root: u64,
    pub stream: u64,
}

impl Seed {
    pub fn rng(&self) -> SimRng {
        stream_rng(self.root, self.stream)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryMeta {
    pub model: ConstraintModel,
    pub q: f64,
    pub dims: Vec<usize>,
    pub horizon: f64,
    pub stats: RunStats,
    /// Set when some coordinate of the displacement exceeded a quarter of
    /// the torus side.
    pub wrap_warning: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    /// Unwrapped displacements, `d` entries per sample.
    pub displacements: Vec<i64>,
    pub d: usize,
    pub seed: Seed,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }

    pub fn displacement(&self, k: usize) -> &[i64] {
        &self.displacements[k * self.d..(k + 1) * self.d]
    }

    pub fn final_displacement(&self) -> &[i64] {
        self.displacement(self.len() - 1)
    }
}

/// Run the environment process. Returns the final configuration and the
/// counts of rings and flips.
pub fn simulate_env<R: Rng, F: FnMut(&Event)>(
    model: ConstraintModel,
    params: Params,
    config0: SpinConfig,
    horizon: f64,
    rng: R,
    sink: F,
) -> Result<(SpinConfig, RunStats)> {
    check_horizon(horizon)?;
    let mut sim = Simulation::environment(model, params, config0, rng)?;
    sim.run_until(horizon, sink);
    Ok((sim.config, sim.stats))
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("horizon must be positive and finite, got {horizon}")))
    }
}

fn run_tracer<F: FnMut(&Event)>(
    model: ConstraintModel,
    params: Params,
    config0: SpinConfig,
    frame: Frame,
    horizon: f64,
    sample_dt: f64,
    seed: Seed,
    sink: F,
) -> Result<(Trajectory, SpinConfig)> {
    check_horizon(horizon)?;
    if !(sample_dt > 0.0) {
        return Err(Error::InvalidParameter(String::from("sample interval must be positive")));
    }
    let dims = config0.dims().to_vec();
    let d = dims.len();
    let mut sim = Simulation::with_tracer(model, params, config0, frame, seed.rng())?;
    let mut times = Vec::new();
    let mut disp = Vec::new();
    let mut max_abs = vec![0i64; d];
    sim.run_sampled(horizon, sample_dt, sink, |t, s| {
        times.push(t);
        for (m, &x) in max_abs.iter_mut().zip(s.displacement()) {
            *m = (*m).max(x.abs());
        }
        disp.extend_from_slice(s.displacement());
    });
    let wrap_warning = max_abs.iter().zip(&dims).any(|(&m, &n)| 4 * m as usize > n);
    let traj = Trajectory {
        sample_times: times,
        displacements: disp,
        d,
        seed,
        meta: TrajectoryMeta {
            model,
            q: params.q(),
            dims,
            horizon,
            stats: sim.stats,
            wrap_warning,
        },
    };
    Ok((traj, sim.config))
}

/// Run the joint environment and tracer process in the lab frame.
pub fn simulate_joint<F: FnMut(&Event)>(
    model: ConstraintModel,
    params: Params,
    config0: SpinConfig,
    horizon: f64,
    sample_dt: f64,
    seed: Seed,
    sink: F,
) -> Result<(Trajectory, SpinConfig)> {
    run_tracer(model, params, config0, Frame::Lab, horizon, sample_dt, seed, sink)
}

/// Run the environment seen from the tracer. The returned configuration is
/// centred on the tracer.
pub fn simulate_seen_from_tracer<F: FnMut(&Event)>(
    model: ConstraintModel,
    params: Params,
    config0: SpinConfig,
    horizon: f64,
    sample_dt: f64,
    seed: Seed,
    sink: F,
) -> Result<(Trajectory, SpinConfig)> {
    run_tracer(model, params, config0, Frame::Tracer, horizon, sample_dt, seed, sink)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistinguishedZeroTrack {
    pub jump_times: Vec<f64>,
    /// Unwrapped positions; `positions[0]` is the start.
    pub positions: Vec<i64>,
    /// Events after which the tracked site was found occupied.
    pub violations: u64,
    pub events_checked: u64,
    /// The tracked zero left a frozen-empty segment on the right.
    pub exited: bool,
}

/// Replay an East event log and follow the distinguished zero: it moves one
/// step right at each legal ring of its site.
pub fn track_distinguished_zero(
    config0: &SpinConfig,
    events: &[Event],
    start: &Site,
) -> Result<DistinguishedZeroTrack> {
    if config0.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            expected: 1,
            got: config0.dim(),
        });
    }
    let mut xi = config0
        .index_of(start)
        .ok_or_else(|| Error::BoundaryViolation(format!("start {:?} is not writable", start.0)))?;
    if config0.occupied(xi) {
        return Err(Error::Precondition(format!("start site {:?} is occupied at time 0", start.0)));
    }
    let table = NeighborTable::new(ConstraintModel::East, config0.dims(), config0.boundary())?;
    let mut config = config0.clone();
    let mut pos = start.0[0];
    let mut track = DistinguishedZeroTrack {
        jump_times: Vec::new(),
        positions: vec![pos],
        violations: 0,
        events_checked: 0,
        exited: false,
    };
    for e in events {
        let EventKind::Ring { site, outcome, .. } = e.kind else {
            continue;
        };
        let legal = table.allows(&config, site);
        if legal != (outcome != RingOutcome::Rejected) {
            return Err(Error::Invariant(format!(
                "event log disagrees with the East constraint at t = {}",
                e.time
            )));
        }
        match outcome {
            RingOutcome::Rejected => {}
            RingOutcome::Empty => config.set(site, false),
            RingOutcome::Occupied => config.set(site, true),
        }
        if track.exited {
            continue;
        }
        if site == xi && legal {
            pos += 1;
            track.jump_times.push(e.time);
            track.positions.push(pos);
            match config.step_index(xi, 0, 1) {
                Some(next) => xi = next,
                None => {
                    track.exited = true;
                    continue;
                }
            }
        }
        track.events_checked += 1;
        if config.occupied(xi) {
            track.violations += 1;
        }
    }
    Ok(track)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HittingSample {
    pub time: f64,
    pub censored: bool,
}

/// First time site 1 empties in East started from `1…1` on sites `1..=l`
/// with a frozen zero at `l + 1`. Runs past `cap` are censored at `cap`.
pub fn hitting_time_t0<R: Rng>(l: usize, params: Params, rng: R, cap: f64) -> Result<HittingSample> {
    if l == 0 {
        return Err(Error::InvalidParameter(String::from("l must be positive")));
    }
    let config0 = SpinConfig::filled(&[l], Boundary::FrozenEmpty, true)?;
    let mut sim = Simulation::environment(ConstraintModel::East, params, config0, rng)?;
    while let Some(e) = sim.step_until(cap) {
        if let EventKind::Ring { site: 0, outcome: RingOutcome::Empty, .. } = e.kind {
            return Ok(HittingSample {
                time: e.time,
                censored: false,
            });
        }
    }
    Ok(HittingSample {
        time: cap,
        censored: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fa(q: f64) -> (ConstraintModel, Params) {
        (ConstraintModel::fa1f(), Params::new(q).unwrap())
    }

    #[test]
    fn blocked_environment_executes_nothing() {
        let (m, p) = fa(0.3);
        let c = SpinConfig::filled(&[64], Boundary::Periodic, true).unwrap();
        let (end, stats) = simulate_env(m, p, c.clone(), 50.0, stream_rng(1, 0), |_| {}).unwrap();
        assert_eq!(end, c);
        assert_eq!(stats.flips, 0);
        assert!(stats.rings > 0);
    }

    #[test]
    fn frozen_environment_keeps_tracer_still() {
        let (m, p) = fa(0.5);
        let c = SpinConfig::filled(&[32], Boundary::Periodic, true).unwrap();
        let (traj, _) = simulate_joint(m, p, c, 100.0, 1.0, Seed { root: 2, stream: 0 }, |_| {}).unwrap();
        assert!(traj.displacements.iter().all(|&x| x == 0));
        assert_eq!(traj.meta.stats.jumps, 0);
    }

    #[test]
    fn identical_seeds_identical_logs() {
        let (m, p) = fa(0.3);
        let run = || {
            let c = SpinConfig::sample(&p, &[40], Boundary::Periodic, &mut stream_rng(9, 1)).unwrap();
            let mut log = Vec::new();
            simulate_joint(m, p, c, 20.0, 1.0, Seed { root: 9, stream: 2 }, |e| log.push(*e)).unwrap();
            log
        };
        let (a, b) = (run(), run());
        assert!(!a.is_empty());
        assert!(a.iter().zip(&b).all(|(x, y)| x.time.to_bits() == y.time.to_bits() && x.kind == y.kind));
        assert_eq!(a.len(), b.len());
    }

    #[test]
    fn segmented_run_equals_single_run() {
        let (m, p) = fa(0.4);
        let c = SpinConfig::sample(&p, &[30], Boundary::Periodic, &mut stream_rng(4, 0)).unwrap();
        let mut a = Simulation::environment(m, p, c.clone(), stream_rng(4, 1)).unwrap();
        let mut b = Simulation::environment(m, p, c, stream_rng(4, 1)).unwrap();
        a.run_until(10.0, |_| {});
        for t in [1.0, 2.5, 2.5, 7.0, 10.0] {
            b.run_until(t, |_| {});
        }
        assert_eq!(a.config(), b.config());
        assert_eq!(a.stats(), b.stats());
    }

    #[test]
    fn tracer_jumps_only_between_empty_sites() {
        let (m, p) = (ConstraintModel::KZeros(2), Params::new(0.5).unwrap());
        let c = SpinConfig::sample(&p, &[6, 6], Boundary::Periodic, &mut stream_rng(3, 0)).unwrap();
        let mut sim = Simulation::with_tracer(m, p, c, Frame::Lab, stream_rng(3, 1)).unwrap();
        let mut jumps = 0;
        while let Some(before) = sim.tracer().cloned().map(|t| (t, sim.config().clone())) {
            let Some(e) = sim.step_until(200.0) else { break };
            if let EventKind::Tracer { axis, step, jumped } = e.kind {
                let (t, cfg) = before;
                let there = cfg.step_index(t.wrapped, axis, step as i64).unwrap();
                assert_eq!(jumped, cfg.vacant(t.wrapped) && cfg.vacant(there));
                jumps += jumped as u32;
            }
        }
        assert!(jumps > 10);
    }

    #[test]
    fn frames_are_coupled_exactly() {
        for (m, dims) in [
            (ConstraintModel::fa1f(), vec![50]),
            (ConstraintModel::KZeros(2), vec![7, 6]),
            (ConstraintModel::East, vec![40]),
        ] {
            let p = Params::new(0.45).unwrap();
            let c = SpinConfig::sample(&p, &dims, Boundary::Periodic, &mut stream_rng(5, 0)).unwrap();
            let mut lab = Simulation::with_tracer(m, p, c.clone(), Frame::Lab, stream_rng(5, 1)).unwrap();
            let mut rel = Simulation::with_tracer(m, p, c, Frame::Tracer, stream_rng(5, 1)).unwrap();
            for k in 1..=40 {
                let t = k as f64 * 2.0;
                lab.run_until(t, |_| {});
                rel.run_until(t, |_| {});
                assert_eq!(lab.displacement(), rel.displacement());
                let x = lab.config().coords_of(lab.tracer().unwrap().wrapped);
                assert_eq!(&lab.config().shift(&x).unwrap(), rel.config());
                assert_eq!(&rel.lab_config(), lab.config());
            }
            assert!(lab.stats().jumps > 0, "{m:?}");
        }
    }

    #[test]
    fn single_free_spin_spends_fraction_q_empty() {
        // East segment of length 1: the virtual right neighbour is empty.
        let p = Params::new(0.3).unwrap();
        let c = SpinConfig::filled(&[1], Boundary::FrozenEmpty, true).unwrap();
        let mut sim = Simulation::environment(ConstraintModel::East, p, c, stream_rng(6, 0)).unwrap();
        let horizon = 1e4;
        let (mut last, mut empty_time) = (0.0, 0.0);
        let mut was_empty = false;
        sim.run_until(horizon, |e| {
            if was_empty {
                empty_time += e.time - last;
            }
            last = e.time;
            if let EventKind::Ring { outcome, .. } = e.kind {
                was_empty = outcome == RingOutcome::Empty;
            }
        });
        if was_empty {
            empty_time += horizon - last;
        }
        // Correlation time of the spin is 1, so σ ≈ sqrt(2 q p / horizon).
        let frac = empty_time / horizon;
        let sigma = (2.0 * 0.3 * 0.7 / horizon).sqrt();
        assert!((frac - 0.3).abs() < 3.0 * sigma, "frac = {frac}");
    }

    #[test]
    fn stationary_empty_fraction() {
        let (m, p) = fa(0.3);
        let c = SpinConfig::sample(&p, &[512], Boundary::Periodic, &mut stream_rng(7, 0)).unwrap();
        let (end, _) = simulate_env(m, p, c, 1e3, stream_rng(7, 1), |_| {}).unwrap();
        let frac = end.count_empty() as f64 / 512.0;
        let sigma = (0.3f64 * 0.7 / 512.0).sqrt();
        assert!((frac - 0.3).abs() < 3.0 * sigma, "frac = {frac}");
    }

    #[test]
    fn wrap_warning_on_tiny_torus() {
        let (m, p) = fa(0.95);
        let c = SpinConfig::filled(&[8], Boundary::Periodic, false).unwrap();
        let (traj, _) = simulate_joint(m, p, c, 200.0, 1.0, Seed { root: 1, stream: 1 }, |_| {}).unwrap();
        assert!(traj.meta.wrap_warning);
        assert_eq!(traj.displacement(0), &[0]);
    }

    #[test]
    fn distinguished_zero_in_all_empty_environment() {
        // q close to 1 keeps the segment nearly empty; the zero still moves
        // at every legal ring of its site.
        let p = Params::new(0.999).unwrap();
        let c = SpinConfig::filled(&[64], Boundary::Periodic, false).unwrap();
        let mut log = Vec::new();
        simulate_env(ConstraintModel::East, p, c.clone(), 30.0, stream_rng(8, 0), |e| log.push(*e)).unwrap();
        let track = track_distinguished_zero(&c, &log, &Site::d1(0)).unwrap();
        assert_eq!(track.violations, 0);
        assert!(track.positions.windows(2).all(|w| w[1] == w[0] + 1));
        assert_eq!(track.positions.len(), track.jump_times.len() + 1);
        assert!(track.jump_times.len() > 10);
    }

    #[test]
    fn distinguished_zero_rejects_occupied_start() {
        let c = SpinConfig::parse_1d("1000", Boundary::Periodic).unwrap();
        assert!(matches!(
            track_distinguished_zero(&c, &[], &Site::d1(0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn single_site_hitting_time_is_exponential() {
        let p = Params::new(0.3).unwrap();
        let n = 4000;
        let mut sum = 0.0;
        for i in 0..n {
            let s = hitting_time_t0(1, p, stream_rng(10, i), 1e6).unwrap();
            assert!(!s.censored);
            sum += s.time;
        }
        let mean = sum / n as f64;
        let sigma = (1.0 / 0.3) / (n as f64).sqrt();
        assert!((mean - 1.0 / 0.3).abs() < 3.0 * sigma, "mean = {mean}");
    }

    #[test]
    fn hitting_time_censoring() {
        let p = Params::new(0.05).unwrap();
        let s = hitting_time_t0(10, p, stream_rng(11, 0), 1.0).unwrap();
        assert!(s.censored);
        assert_eq!(s.time, 1.0);
    }

    #[test]
    fn sample_grid_includes_horizon() {
        assert_eq!(sample_grid(0.0, 1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(sample_grid(0.0, 1.1, 0.5), vec![0.0, 0.5, 1.0, 1.1]);
    }
}
