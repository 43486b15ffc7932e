//! Variational upper bounds on `u·Du`, the cluster sums `S₀`, `S₁` and the
//! Dirichlet-form functionals of the FA-1f alternative argument.
//!
//! Cylinder functions are tables indexed by the occupations of a window:
//! bit `k` of the index is the occupation at `window[k]`. Exact sums run
//! over every configuration of the window thickened by the constraint
//! radius, weighted by the product measure.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::spectral::SpectralResult;
use crate::constraints::{l1_ball, ConstraintModel};
use crate::lattice::{Direction, Params, SpinConfig};
use crate::math;
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Largest summation window for exact mode.
pub const EXACT_SITE_CAP: usize = 22;

#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    /// Values indexed by window occupations.
    Table { window: Vec<Vec<i64>>, values: Vec<f64> },
    /// `min{x ≥ 0 : η_x = 1}` capped at `radius` (d = 1).
    FirstOneRight { radius: usize },
    /// One plus the largest first coordinate of the cluster of empty sites
    /// at the origin (0 when the origin is occupied), computed inside the
    /// window `{0..radius−1}` in d = 1 and the ℓ¹ ball of `radius` otherwise.
    ClusterFrontier { radius: usize },
}

impl TestFunction {
    pub fn table(window: Vec<Vec<i64>>, values: Vec<f64>) -> Result<Self> {
        if window.len() > 30 || values.len() != 1usize << window.len() {
            return Err(Error::InvalidParameter(format!(
                "a table on {} sites needs 2^{} values, got {}",
                window.len(),
                window.len(),
                values.len()
            )));
        }
        let d = window.first().map_or(0, |w| w.len());
        if window.iter().any(|w| w.len() != d) {
            return Err(Error::InvalidParameter(String::from("window sites differ in dimension")));
        }
        Ok(TestFunction::Table { window, values })
    }

    /// A table on the contiguous one-dimensional window `lo..=hi`.
    pub fn table_1d(lo: i64, hi: i64, values: Vec<f64>) -> Result<Self> {
        Self::table((lo..=hi).map(|x| vec![x]).collect(), values)
    }

    pub fn window(&self, d: usize) -> Result<Vec<Vec<i64>>> {
        match self {
            TestFunction::Table { window, .. } => {
                if window.first().is_some_and(|w| w.len() != d) {
                    return Err(Error::UnsupportedDimension {
                        expected: window[0].len(),
                        got: d,
                    });
                }
                Ok(window.clone())
            }
            TestFunction::FirstOneRight { radius } => {
                if d != 1 {
                    return Err(Error::UnsupportedDimension { expected: 1, got: d });
                }
                Ok((0..*radius as i64).map(|x| vec![x]).collect())
            }
            TestFunction::ClusterFrontier { radius } => {
                if d == 1 {
                    Ok((0..*radius as i64).map(|x| vec![x]).collect())
                } else {
                    Ok(l1_ball(d, *radius as i64))
                }
            }
        }
    }

    /// Value from the occupations of the window sites (bit `k` ↔ `window[k]`).
    pub fn value_from_bits(&self, window: &[Vec<i64>], bits: u64) -> f64 {
        match self {
            TestFunction::Table { values, .. } => values[bits as usize],
            TestFunction::FirstOneRight { radius } => {
                let r = *radius as u32;
                bits.trailing_zeros().min(r) as f64
            }
            TestFunction::ClusterFrontier { radius } => {
                if window[0].len() == 1 {
                    return bits.trailing_zeros().min(*radius as u32) as f64;
                }
                cluster_frontier(window, bits)
            }
        }
    }

    /// Value at the origin of `config`; virtual sites read as empty.
    pub fn eval(&self, config: &SpinConfig) -> Result<f64> {
        let window = self.window(config.dim())?;
        if window.len() > 64 {
            return Err(Error::Resource {
                what: String::from("test-function window sites"),
                needed: window.len() as u128,
                cap: 64,
            });
        }
        let mut bits = 0u64;
        for (k, w) in window.iter().enumerate() {
            if config.offset_index(0, w).is_some_and(|i| config.occupied(i)) {
                bits |= 1 << k;
            }
        }
        Ok(self.value_from_bits(&window, bits))
    }

    fn materialize(&self, window: &[Vec<i64>]) -> Result<Vec<f64>> {
        match self {
            TestFunction::Table { values, .. } => Ok(values.clone()),
            _ => {
                if window.len() > EXACT_SITE_CAP {
                    return Err(Error::Resource {
                        what: String::from("test-function window sites"),
                        needed: window.len() as u128,
                        cap: EXACT_SITE_CAP as u128,
                    });
                }
                Ok((0..1u64 << window.len()).map(|b| self.value_from_bits(window, b)).collect())
            }
        }
    }
}

fn cluster_frontier(window: &[Vec<i64>], bits: u64) -> f64 {
    let origin = window.iter().position(|w| w.iter().all(|&c| c == 0));
    let Some(o) = origin else { return 0.0 };
    if (bits >> o) & 1 == 1 {
        return 0.0;
    }
    let index: BTreeMap<&[i64], usize> = window.iter().enumerate().map(|(k, w)| (w.as_slice(), k)).collect();
    let mut seen = 1u64 << o;
    let mut stack = vec![o];
    let mut best = 0i64;
    let mut probe = vec![0i64; window[0].len()];
    while let Some(k) = stack.pop() {
        best = best.max(window[k][0]);
        for axis in 0..probe.len() {
            for step in [-1i64, 1] {
                probe.copy_from_slice(&window[k]);
                probe[axis] += step;
                if let Some(&j) = index.get(probe.as_slice()) {
                    if (seen >> j) & 1 == 0 && (bits >> j) & 1 == 0 {
                        seen |= 1 << j;
                        stack.push(j);
                    }
                }
            }
        }
    }
    (best + 1) as f64
}

/// `j_u(η) = (1−η_0) Σ_i Σ_α (1−η_{αe_i}) α u_i`. Virtual sites read empty.
pub fn current_ju(config: &SpinConfig, u: &Direction) -> Result<f64> {
    if u.dim() != config.dim() {
        return Err(Error::UnsupportedDimension {
            expected: config.dim(),
            got: u.dim(),
        });
    }
    if config.occupied(0) {
        return Ok(0.0);
    }
    let mut j = 0.0;
    for (axis, &ui) in u.components().iter().enumerate() {
        for step in [1i64, -1] {
            if config.step_index(0, axis, step).is_none_or(|k| config.vacant(k)) {
                j += step as f64 * ui;
            }
        }
    }
    Ok(j)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveReport {
    /// Flip term plus jump term; half of it bounds `u·Du` from above.
    pub value: f64,
    pub flip_term: f64,
    pub jump_term: f64,
    pub stderr: f64,
    pub flip_stderr: f64,
    pub jump_stderr: f64,
    pub samples: u64,
    pub summed_sites: usize,
}

impl ObjectiveReport {
    pub fn upper_bound(&self) -> f64 {
        0.5 * self.value
    }
}

enum Gather {
    Contiguous { shift: u32, mask: u64 },
    Sites(Vec<u32>),
}

impl Gather {
    fn new(positions: Vec<u32>) -> Self {
        let contiguous = positions.windows(2).all(|w| w[1] == w[0] + 1);
        match (contiguous, positions.first()) {
            (true, Some(&s)) if positions.len() < 64 => Gather::Contiguous {
                shift: s,
                mask: (1u64 << positions.len()) - 1,
            },
            _ => Gather::Sites(positions),
        }
    }

    #[inline]
    fn apply(&self, b: u64) -> u64 {
        match self {
            Gather::Contiguous { shift, mask } => (b >> shift) & mask,
            Gather::Sites(p) => {
                let mut out = 0;
                for (k, &s) in p.iter().enumerate() {
                    out |= ((b >> s) & 1) << k;
                }
                out
            }
        }
    }
}

struct Flip {
    k: u32,
    pos: u32,
    nbrs: Vec<u32>,
}

struct Jump {
    drift: f64,
    target: u32,
    gather: Gather,
}

/// Per-configuration integrands, before weighting.
#[derive(Clone, Copy, Default)]
struct Terms {
    flip: f64,
    jump_u: f64,
    jump_0: f64,
    jf: f64,
}

struct Engine {
    sites: usize,
    origin: u32,
    win: Gather,
    flips: Vec<Flip>,
    jumps: Vec<Jump>,
    threshold: usize,
    q: f64,
    p: f64,
}

impl Engine {
    fn new(model: ConstraintModel, params: Params, window: &[Vec<i64>], u: &Direction) -> Result<Self> {
        let d = u.dim();
        if window.is_empty() {
            return Err(Error::InvalidParameter(String::from("empty window")));
        }
        if window.iter().any(|w| w.len() != d) {
            return Err(Error::UnsupportedDimension {
                expected: d,
                got: window[0].len(),
            });
        }
        let offsets = model.neighborhood_offsets(d)?;
        let pad = model.radius().max(1) as i64;
        let mut ext: Vec<Vec<i64>> = Vec::new();
        for w in window.iter().chain(core::iter::once(&vec![0; d])) {
            for b in l1_ball(d, pad) {
                ext.push(w.iter().zip(&b).map(|(x, y)| x + y).collect());
            }
        }
        ext.sort();
        ext.dedup();
        if ext.len() > 63 {
            return Err(Error::Resource {
                what: String::from("summation sites"),
                needed: ext.len() as u128,
                cap: 63,
            });
        }
        let pos: BTreeMap<Vec<i64>, u32> = ext.iter().cloned().zip(0u32..).collect();
        let at = |x: &[i64]| pos[x];
        let add = |x: &[i64], y: &[i64]| -> Vec<i64> { x.iter().zip(y).map(|(a, b)| a + b).collect() };
        let win = Gather::new(window.iter().map(|w| at(w)).collect());
        let flips = window
            .iter()
            .enumerate()
            .map(|(k, w)| Flip {
                k: k as u32,
                pos: at(w),
                nbrs: offsets.iter().map(|o| at(&add(w, o))).collect(),
            })
            .collect();
        let mut jumps = Vec::new();
        for axis in 0..d {
            for step in [1i64, -1] {
                let mut e = vec![0i64; d];
                e[axis] = step;
                jumps.push(Jump {
                    drift: step as f64 * u.components()[axis],
                    target: at(&e),
                    gather: Gather::new(window.iter().map(|w| at(&add(w, &e))).collect()),
                });
            }
        }
        Ok(Engine {
            sites: ext.len(),
            origin: at(&vec![0; d]),
            win,
            flips,
            jumps,
            threshold: model.threshold(),
            q: params.q(),
            p: params.p(),
        })
    }

    #[inline]
    fn terms(&self, b: u64, f: &dyn Fn(u64) -> f64) -> Terms {
        let a = self.win.apply(b);
        let f0 = f(a);
        let mut t = Terms::default();
        for fl in &self.flips {
            let zeros = fl.nbrs.iter().filter(|&&n| (b >> n) & 1 == 0).count();
            if zeros >= self.threshold {
                let rate = if (b >> fl.pos) & 1 == 0 { self.p } else { self.q };
                let df = f(a ^ (1 << fl.k)) - f0;
                t.flip += rate * df * df;
            }
        }
        if (b >> self.origin) & 1 == 0 {
            let mut j = 0.0;
            for jp in &self.jumps {
                if (b >> jp.target) & 1 == 0 {
                    let df = f(jp.gather.apply(b)) - f0;
                    t.jump_u += (jp.drift + df) * (jp.drift + df);
                    t.jump_0 += df * df;
                    j += jp.drift;
                }
            }
            t.jf = j * f0;
        }
        t
    }

    fn weights_by_count(&self) -> Vec<f64> {
        let (lq, lp) = (math::ln(self.q), math::ln(self.p));
        (0..=self.sites)
            .map(|ones| math::exp(ones as f64 * lp + (self.sites - ones) as f64 * lq))
            .collect()
    }

    fn exact(&self, f: &dyn Fn(u64) -> f64) -> Result<Terms> {
        if self.sites > EXACT_SITE_CAP {
            return Err(Error::Resource {
                what: String::from("exact summation sites"),
                needed: self.sites as u128,
                cap: EXACT_SITE_CAP as u128,
            });
        }
        let w = self.weights_by_count();
        let mut acc = Terms::default();
        for b in 0..1u64 << self.sites {
            let t = self.terms(b, f);
            let wb = w[b.count_ones() as usize];
            acc.flip += wb * t.flip;
            acc.jump_u += wb * t.jump_u;
            acc.jump_0 += wb * t.jump_0;
            acc.jf += wb * t.jf;
        }
        Ok(acc)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        let mut b = 0u64;
        for s in 0..self.sites {
            if rng.random::<f64>() >= self.q {
                b |= 1 << s;
            }
        }
        b
    }
}

/// The bracket of the variational formula for `u·Du` at the test function
/// `f`: flip term `Σ_y μ(c_y r_y [∇_y f]²)` plus jump term
/// `Σ_{i,α} μ(η̄_0 η̄_{αe_i} [αu_i + f(η_{αe_i+·}) − f(η)]²)`.
pub fn variational_objective(
    f: &TestFunction,
    u: &Direction,
    model: ConstraintModel,
    params: Params,
    mode: Mode,
) -> Result<ObjectiveReport> {
    let window = f.window(u.dim())?;
    let engine = Engine::new(model, params, &window, u)?;
    match mode {
        Mode::Exact => {
            let table = f.materialize(&window)?;
            let t = engine.exact(&|a| table[a as usize])?;
            Ok(ObjectiveReport {
                value: t.flip + t.jump_u,
                flip_term: t.flip,
                jump_term: t.jump_u,
                stderr: 0.0,
                flip_stderr: 0.0,
                jump_stderr: 0.0,
                samples: 1u64 << engine.sites,
                summed_sites: engine.sites,
            })
        }
        Mode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidParameter(String::from("need at least two samples")));
            }
            let table = (window.len() <= EXACT_SITE_CAP).then(|| f.materialize(&window)).transpose()?;
            let direct = |a: u64| f.value_from_bits(&window, a);
            let lookup = |a: u64| table.as_ref().map_or_else(|| direct(a), |t| t[a as usize]);
            let mut rng = stream_rng(seed, 0);
            let (mut s, mut ss) = ([0.0f64; 3], [0.0f64; 3]);
            for _ in 0..samples {
                let t = engine.terms(engine.sample(&mut rng), &lookup);
                for (k, v) in [t.flip, t.jump_u, t.flip + t.jump_u].into_iter().enumerate() {
                    s[k] += v;
                    ss[k] += v * v;
                }
            }
            let n = samples as f64;
            let se = |k: usize| {
                let m = s[k] / n;
                math::sqrt(((ss[k] / n - m * m) * n / (n - 1.0)).max(0.0) / n)
            };
            Ok(ObjectiveReport {
                value: s[2] / n,
                flip_term: s[0] / n,
                jump_term: s[1] / n,
                stderr: se(2),
                flip_stderr: se(0),
                jump_stderr: se(1),
                samples: samples as u64,
                summed_sites: engine.sites,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct S0S1Report {
    pub s0: f64,
    pub s1: f64,
    pub s0_stderr: f64,
    pub s1_stderr: f64,
    /// Standard error of `(1−q)S₀ − qS₁`, accounting for correlation.
    pub balance_stderr: f64,
    pub samples: u64,
    pub truncation_hits: u64,
    pub radius: usize,
    /// False when more than 0.1% of samples hit the truncation radius.
    pub reliable: bool,
}

impl S0S1Report {
    pub fn balance(&self, params: Params) -> f64 {
        params.p() * self.s0 - params.q() * self.s1
    }

    /// The flip term of the variational bracket, `(1−q)S₀ + qS₁`.
    pub fn flip_term(&self, params: Params) -> f64 {
        params.p() * self.s0 + params.q() * self.s1
    }
}

/// Contributions to `S₀` and `S₁` of one configuration given on the sites
/// `−pad..radius+pad` (`occ[x + pad]`), for the test function
/// `f = min(first one at x ≥ 0, radius)`. Returns `(s0, s1, truncated)`.
pub(crate) fn s0_s1_terms(model: ConstraintModel, occ: &[bool], pad: usize, radius: usize) -> (f64, f64, bool) {
    let at = |x: usize| occ[x + pad];
    let allowed = |y: usize| -> bool {
        let yi = y as i64;
        match model {
            ConstraintModel::East => !occ[(yi + 1 + pad as i64) as usize],
            ConstraintModel::KZeros(k) => {
                let k = k as i64;
                let zeros = (-k..=k)
                    .filter(|&o| o != 0 && !occ[(yi + o + pad as i64) as usize])
                    .count();
                zeros >= k as usize
            }
        }
    };
    let m = (0..radius).find(|&x| at(x)).unwrap_or(radius);
    let mut s0 = 0.0;
    for y in 0..m {
        if allowed(y) {
            let d = (m - y) as f64;
            s0 += d * d;
        }
    }
    let mut s1 = 0.0;
    let mut truncated = m == radius;
    if m < radius {
        let next = (m + 1..radius).find(|&x| at(x)).unwrap_or(radius);
        truncated = next == radius;
        if allowed(m) {
            let d = (next - m) as f64;
            s1 = d * d;
        }
    }
    (s0, s1, truncated)
}

/// Monte Carlo estimates of `S₀ = Σ_y μ(c_y η̄_y [∇_y f]²)` and
/// `S₁ = Σ_y μ(c_y η_y [∇_y f]²)` for the one-dimensional cluster function
/// truncated at `radius`.
pub fn sums_s0_s1<R: Rng>(
    model: ConstraintModel,
    params: Params,
    samples: usize,
    radius: usize,
    rng: &mut R,
) -> Result<S0S1Report> {
    if samples < 2 || radius == 0 {
        return Err(Error::InvalidParameter(String::from("need samples ≥ 2 and radius ≥ 1")));
    }
    let pad = model.radius();
    let len = radius + 2 * pad;
    let mut occ = vec![false; len];
    let (p, q) = (params.p(), params.q());
    let (mut a0, mut a1, mut aa0, mut aa1, mut ab, mut aa01) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut hits = 0u64;
    for _ in 0..samples {
        for o in occ.iter_mut() {
            *o = rng.random::<f64>() >= q;
        }
        let (s0, s1, trunc) = s0_s1_terms(model, &occ, pad, radius);
        hits += trunc as u64;
        a0 += s0;
        a1 += s1;
        aa0 += s0 * s0;
        aa1 += s1 * s1;
        let bal = p * s0 - q * s1;
        ab += bal * bal;
        aa01 += bal;
    }
    let n = samples as f64;
    let se = |s: f64, ss: f64| {
        let m = s / n;
        math::sqrt(((ss / n - m * m) * n / (n - 1.0)).max(0.0) / n)
    };
    Ok(S0S1Report {
        s0: a0 / n,
        s1: a1 / n,
        s0_stderr: se(a0, aa0),
        s1_stderr: se(a1, aa1),
        balance_stderr: se(aa01, ab),
        samples: samples as u64,
        truncation_hits: hits,
        radius,
        reliable: (hits as f64) <= 1e-3 * n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirichletSplit {
    pub d_jump: f64,
    pub d_fa: f64,
    pub mu_jf: f64,
    /// `2μ(jf) − 𝓓_jump(f)`.
    pub jump_functional: f64,
    /// `2μ(jf) − 𝓓_FA(f)`.
    pub fa_functional: f64,
}

/// The FA-1f, d = 1 quantities `𝓓_jump(f)`, `𝓓_FA(f)` and `μ(jf)` with
/// `j = j_{e_1}`, by exact summation.
pub fn dirichlet_split(f: &TestFunction, params: Params) -> Result<DirichletSplit> {
    let u = Direction::unit(1, 0);
    let window = f.window(1)?;
    let engine = Engine::new(ConstraintModel::fa1f(), params, &window, &u)?;
    let table = f.materialize(&window)?;
    let t = engine.exact(&|a| table[a as usize])?;
    let d_jump = 0.5 * t.jump_0;
    let d_fa = 0.5 * t.flip;
    Ok(DirichletSplit {
        d_jump,
        d_fa,
        mu_jf: t.jf,
        jump_functional: 2.0 * t.jf - d_jump,
        fa_functional: 2.0 * t.jf - d_fa,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaMaximum {
    /// `sup_f {2μ(jf) − 𝓓_FA(f)}` over functions of the window.
    pub value: f64,
    pub maximizer: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Maximise `2μ(jf) − 𝓓_FA(f)` over functions of the sites `lo..=hi`
/// (FA-1f, d = 1). The objective is concave quadratic, `2b·f − f·Kf`, so
/// the maximiser solves `Kf = b` and the maximum is `b·f`.
pub fn max_fa_functional(params: Params, lo: i64, hi: i64) -> Result<FaMaximum> {
    if hi < lo || hi - lo + 1 > 16 {
        return Err(Error::InvalidParameter(String::from("window must have 1 to 16 sites")));
    }
    let window: Vec<Vec<i64>> = (lo..=hi).map(|x| vec![x]).collect();
    let nw = window.len();
    let engine = Engine::new(ConstraintModel::fa1f(), params, &window, &Direction::unit(1, 0))?;
    if engine.sites > EXACT_SITE_CAP {
        return Err(Error::Resource {
            what: String::from("exact summation sites"),
            needed: engine.sites as u128,
            cap: EXACT_SITE_CAP as u128,
        });
    }
    let m = 1usize << nw;
    // h[a * nw + k]: symmetric weight of the edge a ↔ a^k, so that
    // 𝓓_FA(f) = ½ Σ_a Σ_k h (f_a − f_{a^k})² / 2.
    let mut g = vec![0.0; m * nw];
    let mut b = vec![0.0; m];
    let w = engine.weights_by_count();
    for bits in 0..1u64 << engine.sites {
        let wb = w[bits.count_ones() as usize];
        let a = engine.win.apply(bits) as usize;
        for fl in &engine.flips {
            let zeros = fl.nbrs.iter().filter(|&&n| (bits >> n) & 1 == 0).count();
            if zeros >= engine.threshold {
                let rate = if (bits >> fl.pos) & 1 == 0 { engine.p } else { engine.q };
                g[a * nw + fl.k as usize] += 0.5 * wb * rate;
            }
        }
        if (bits >> engine.origin) & 1 == 0 {
            let j: f64 = engine
                .jumps
                .iter()
                .filter(|jp| (bits >> jp.target) & 1 == 0)
                .map(|jp| jp.drift)
                .sum();
            b[a] += wb * j;
        }
    }
    let mut h = vec![0.0; m * nw];
    for a in 0..m {
        for k in 0..nw {
            h[a * nw + k] = g[a * nw + k] + g[(a ^ (1 << k)) * nw + k];
        }
    }
    let apply = |f: &[f64], out: &mut [f64]| {
        for a in 0..m {
            let mut acc = 0.0;
            for k in 0..nw {
                acc += h[a * nw + k] * (f[a] - f[a ^ (1 << k)]);
            }
            out[a] = acc;
        }
    };
    let diag: Vec<f64> = (0..m).map(|a| (0..nw).map(|k| h[a * nw + k]).sum::<f64>()).collect();
    let center = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        for x in v.iter_mut() {
            *x -= mean;
        }
    };
    center(&mut b);
    let bnorm = math::sqrt(b.iter().map(|x| x * x).sum());
    let mut f = vec![0.0; m];
    if bnorm == 0.0 {
        return Ok(FaMaximum {
            value: 0.0,
            maximizer: f,
            iterations: 0,
            residual: 0.0,
        });
    }
    // Jacobi-preconditioned conjugate gradients on the consistent singular
    // system; iterates stay orthogonal to constants.
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(x, d)| x / d).collect();
    center(&mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut kp = vec![0.0; m];
    let mut iterations = 0;
    let mut res = bnorm;
    while iterations < 20 * m {
        iterations += 1;
        apply(&p, &mut kp);
        let pkp: f64 = p.iter().zip(&kp).map(|(a, b)| a * b).sum();
        let alpha = rz / pkp;
        for i in 0..m {
            f[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        res = math::sqrt(r.iter().map(|x| x * x).sum());
        if res <= 1e-13 * bnorm {
            break;
        }
        for i in 0..m {
            z[i] = r[i] / diag[i];
        }
        center(&mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res > 1e-9 * bnorm {
        return Err(Error::NoConvergence { iterations, residual: res });
    }
    let value = b.iter().zip(&f).map(|(x, y)| x * y).sum();
    Ok(FaMaximum {
        value,
        maximizer: f,
        iterations,
        residual: res,
    })
}

/// Bounds on `u·Du` for a unit `u`: `[gap/(4d+gap)·q², q²]`.
pub fn gap_sandwich(env_gap: &SpectralResult, params: Params, d: usize) -> (f64, f64) {
    let q2 = params.q() * params.q();
    let g = env_gap.gap;
    (g / (4.0 * d as f64 + g) * q2, q2)
}
