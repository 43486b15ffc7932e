//! Constraint kernels, flip rates, axiom checks and the emptiability search.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::{Boundary, Params, Site, SpinConfig};
use crate::{Error, Result};

/// A constraint `c_x` evaluated at a linear site index.
///
/// Implementors must read only sites within `radius` of `x`. The built-in
/// families are [`ConstraintModel::KZeros`] and [`ConstraintModel::East`];
/// other kernels can be plugged into [`check_axioms`].
pub trait Kernel {
    fn radius(&self) -> usize;
    fn allows(&self, config: &SpinConfig, x: usize) -> bool;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintModel {
    /// At least `k` empty sites within ℓ¹ distance `k`. `KZeros(1)` is FA-1f.
    KZeros(u32),
    /// The right neighbour must be empty (d = 1 only).
    East,
}

impl ConstraintModel {
    pub fn fa1f() -> Self {
        ConstraintModel::KZeros(1)
    }

    pub fn radius(&self) -> usize {
        match *self {
            ConstraintModel::KZeros(k) => k as usize,
            ConstraintModel::East => 1,
        }
    }

    /// Number of empty neighbours required.
    pub fn threshold(&self) -> usize {
        match *self {
            ConstraintModel::KZeros(k) => k as usize,
            ConstraintModel::East => 1,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ConstraintModel::KZeros(1) => String::from("FA-1f"),
            ConstraintModel::KZeros(k) => format!("{k}-zeros"),
            ConstraintModel::East => String::from("East"),
        }
    }

    /// Offsets read by the constraint in dimension `d`.
    pub fn neighborhood_offsets(&self, d: usize) -> Result<Vec<Vec<i64>>> {
        match *self {
            ConstraintModel::East => {
                if d != 1 {
                    return Err(Error::UnsupportedDimension { expected: 1, got: d });
                }
                Ok(vec![vec![1]])
            }
            ConstraintModel::KZeros(k) => {
                if k == 0 {
                    return Err(Error::InvalidParameter(String::from("k must be positive")));
                }
                Ok(l1_ball(d, k as i64)
                    .into_iter()
                    .filter(|y| y.iter().any(|&c| c != 0))
                    .collect())
            }
        }
    }

    /// Check the model against a lattice shape. Periodic sides must be at
    /// least `2r + 1` so that neighbourhood offsets stay distinct.
    pub fn validate_for(&self, dims: &[usize], boundary: Boundary) -> Result<()> {
        if let ConstraintModel::KZeros(0) = self {
            return Err(Error::InvalidParameter(String::from("k must be positive")));
        }
        if *self == ConstraintModel::East && dims.len() != 1 {
            return Err(Error::UnsupportedDimension {
                expected: 1,
                got: dims.len(),
            });
        }
        if boundary == Boundary::Periodic {
            let need = 2 * self.radius() + 1;
            if let Some(&n) = dims.iter().find(|&&n| n < need) {
                return Err(Error::InvalidParameter(format!(
                    "periodic side {n} is shorter than 2r+1 = {need}"
                )));
            }
        }
        Ok(())
    }

    /// `c_x` as 0 or 1.
    pub fn constraint(&self, config: &SpinConfig, x: &Site) -> Result<u8> {
        let i = self.checked_index(config, x)?;
        let offsets = self.neighborhood_offsets(config.dim())?;
        let zeros = offsets
            .iter()
            .filter(|y| config.offset_index(i, y).is_none_or(|j| config.vacant(j)))
            .count();
        Ok((zeros >= self.threshold()) as u8)
    }

    /// `c_x · r_x`: the rate at which `x` flips.
    pub fn flip_rate(&self, config: &SpinConfig, x: &Site, params: &Params) -> Result<f64> {
        let c = self.constraint(config, x)?;
        let i = self.checked_index(config, x)?;
        let r = if config.vacant(i) { params.p() } else { params.q() };
        Ok(c as f64 * r)
    }

    fn checked_index(&self, config: &SpinConfig, x: &Site) -> Result<usize> {
        if *self == ConstraintModel::East && config.dim() != 1 {
            return Err(Error::UnsupportedDimension {
                expected: 1,
                got: config.dim(),
            });
        }
        if x.dim() != config.dim() {
            return Err(Error::UnsupportedDimension {
                expected: config.dim(),
                got: x.dim(),
            });
        }
        config.index_of(x).ok_or_else(|| {
            Error::BoundaryViolation(format!("site {:?} is not writable", x.0))
        })
    }
}

impl Kernel for ConstraintModel {
    fn radius(&self) -> usize {
        ConstraintModel::radius(self)
    }

    fn allows(&self, config: &SpinConfig, x: usize) -> bool {
        let site = config.coords_of(x);
        self.constraint(config, &site).map(|c| c == 1).unwrap_or(false)
    }
}

/// All integer points of ℓ¹ norm at most `r` in dimension `d`, in
/// lexicographic order.
pub fn l1_ball(d: usize, r: i64) -> Vec<Vec<i64>> {
    fn rec(d: usize, r: i64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if d == 0 {
            out.push(prefix.clone());
            return;
        }
        for c in -r..=r {
            prefix.push(c);
            rec(d - 1, r - c.abs(), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, r, &mut Vec::new(), &mut out);
    out
}

/// Sentinel for a neighbour outside a frozen-empty box; reads as empty.
pub const VIRTUAL: u32 = u32::MAX;

/// Precomputed neighbourhoods of every site for one model and lattice shape.
#[derive(Clone, Debug)]
pub struct NeighborTable {
    model: ConstraintModel,
    width: usize,
    threshold: usize,
    table: Vec<u32>,
}

impl NeighborTable {
    pub fn new(model: ConstraintModel, dims: &[usize], boundary: Boundary) -> Result<Self> {
        model.validate_for(dims, boundary)?;
        let offsets = model.neighborhood_offsets(dims.len())?;
        let shape = SpinConfig::filled(dims, boundary, false)?;
        if shape.len() >= VIRTUAL as usize {
            return Err(Error::Resource {
                what: String::from("lattice sites"),
                needed: shape.len() as u128,
                cap: VIRTUAL as u128 - 1,
            });
        }
        let mut table = Vec::with_capacity(shape.len() * offsets.len());
        for i in 0..shape.len() {
            for y in &offsets {
                table.push(shape.offset_index(i, y).map_or(VIRTUAL, |j| j as u32));
            }
        }
        Ok(NeighborTable {
            model,
            width: offsets.len(),
            threshold: model.threshold(),
            table,
        })
    }

    pub fn model(&self) -> ConstraintModel {
        self.model
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.table[i * self.width..(i + 1) * self.width]
    }

    #[inline]
    pub fn allows(&self, config: &SpinConfig, i: usize) -> bool {
        let mut zeros = 0;
        for &j in self.neighbors(i) {
            if j == VIRTUAL || config.vacant(j as usize) {
                zeros += 1;
                if zeros >= self.threshold {
                    return true;
                }
            }
        }
        false
    }

    /// Same as [`allows`](Self::allows) for a configuration packed in a word.
    #[inline]
    pub fn allows_bits(&self, bits: u64, i: usize) -> bool {
        let mut zeros = 0;
        for &j in self.neighbors(i) {
            if j == VIRTUAL || (bits >> j) & 1 == 0 {
                zeros += 1;
                if zeros >= self.threshold {
                    return true;
                }
            }
        }
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axiom {
    OwnSiteIndependence,
    Monotonicity,
    TranslationInvariance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub axiom: Axiom,
    pub config: SpinConfig,
    pub site: Site,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxiomReport {
    pub configs_checked: u64,
    pub interior_sites: usize,
    pub failures: Vec<Counterexample>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failure(&self, axiom: Axiom) -> Option<&Counterexample> {
        self.failures.iter().find(|c| c.axiom == axiom)
    }
}

/// Largest window accepted by [`check_axioms`].
pub const AXIOM_WINDOW_CAP: usize = 20;

/// Exhaustively check own-site independence, monotonicity and translation
/// invariance of `kernel` on every configuration of a frozen-empty window.
/// Only sites whose whole neighbourhood lies inside the window are tested.
/// At most one counterexample per axiom is kept.
pub fn check_axioms<K: Kernel + ?Sized>(kernel: &K, window_dims: &[usize]) -> Result<AxiomReport> {
    let probe = SpinConfig::filled(window_dims, Boundary::FrozenEmpty, false)?;
    let n = probe.len();
    if n > AXIOM_WINDOW_CAP {
        return Err(Error::Resource {
            what: String::from("axiom-check window sites"),
            needed: n as u128,
            cap: AXIOM_WINDOW_CAP as u128,
        });
    }
    let r = kernel.radius() as i64;
    let interior: Vec<usize> = (0..n)
        .filter(|&i| {
            let s = probe.coords_of(i);
            s.0.iter()
                .zip(window_dims)
                .all(|(&c, &len)| c >= r && c < len as i64 - r)
        })
        .collect();
    if interior.is_empty() {
        return Err(Error::Precondition(format!(
            "window {window_dims:?} has no site at distance {r} from its edge"
        )));
    }
    let mut failures: Vec<Counterexample> = Vec::new();
    let record = |failures: &mut Vec<Counterexample>, ax: Axiom, c: &SpinConfig, i: usize, detail: String| {
        if failures.iter().all(|f| f.axiom != ax) {
            failures.push(Counterexample {
                axiom: ax,
                config: c.clone(),
                site: c.coords_of(i),
                detail,
            });
        }
    };
    let d = window_dims.len();
    for bits in 0..(1u64 << n) {
        let c = SpinConfig::from_bits(window_dims, Boundary::FrozenEmpty, bits)?;
        for &x in &interior {
            let cx = kernel.allows(&c, x);
            let mut flipped = c.clone();
            flipped.toggle(x);
            if kernel.allows(&flipped, x) != cx {
                record(
                    &mut failures,
                    Axiom::OwnSiteIndependence,
                    &c,
                    x,
                    String::from("constraint changes when the site itself flips"),
                );
            }
            for y in (0..n).filter(|&y| y != x && c.vacant(y)) {
                let mut more = c.clone();
                more.set(y, true);
                if kernel.allows(&more, x) && !cx {
                    record(
                        &mut failures,
                        Axiom::Monotonicity,
                        &c,
                        x,
                        format!("filling site {:?} enables the constraint", c.coords_of(y).0),
                    );
                }
            }
            for axis in 0..d {
                let Some(x2) = c.step_index(x, axis, 1) else { continue };
                if !interior.contains(&x2) {
                    continue;
                }
                let mut moved = SpinConfig::filled(window_dims, Boundary::FrozenEmpty, false)?;
                for y in 0..n {
                    if let Some(y2) = c.step_index(y, axis, 1) {
                        moved.set(y2, c.occupied(y));
                    }
                }
                if kernel.allows(&moved, x2) != cx {
                    record(
                        &mut failures,
                        Axiom::TranslationInvariance,
                        &c,
                        x,
                        format!("constraint differs after translating along axis {axis}"),
                    );
                }
            }
        }
    }
    Ok(AxiomReport {
        configs_checked: 1u64 << n,
        interior_sites: interior.len(),
        failures,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reachability {
    Reachable,
    Unreachable,
    /// The node budget ran out before the search finished.
    Indeterminate { explored: usize },
}

pub const DEFAULT_SEARCH_BUDGET: usize = 1_000_000;

/// Whether a sequence of legal flips can empty `target`, by breadth-first
/// search over the configuration graph of the (at most 64-site) window.
pub fn can_empty(
    model: ConstraintModel,
    config: &SpinConfig,
    target: &Site,
    budget: usize,
) -> Result<Reachability> {
    let Some(start) = config.to_bits() else {
        return Err(Error::Resource {
            what: String::from("can_empty window sites"),
            needed: config.len() as u128,
            cap: 64,
        });
    };
    let t = config.index_of(target).ok_or_else(|| {
        Error::BoundaryViolation(format!("target {:?} is not writable", target.0))
    })?;
    let table = NeighborTable::new(model, config.dims(), config.boundary())?;
    if (start >> t) & 1 == 0 {
        return Ok(Reachability::Reachable);
    }
    let n = config.len();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start);
    queue.push_back(start);
    while let Some(s) = queue.pop_front() {
        for i in 0..n {
            if !table.allows_bits(s, i) {
                continue;
            }
            let next = s ^ (1u64 << i);
            if (next >> t) & 1 == 0 {
                return Ok(Reachability::Reachable);
            }
            if seen.insert(next) {
                if seen.len() > budget {
                    return Ok(Reachability::Indeterminate { explored: seen.len() });
                }
                queue.push_back(next);
            }
        }
    }
    Ok(Reachability::Unreachable)
}
