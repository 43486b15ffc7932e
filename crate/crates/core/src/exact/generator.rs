use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::{ConstraintModel, NeighborTable};
use crate::lattice::{Boundary, Params, SpinConfig};
use crate::math;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    Environment,
    SeenFromTracer,
}

pub const DEFAULT_STATE_CAP: usize = 1 << 20;

/// Sites above which the visited set switches from a bitmap to a sorted list.
const BITMAP_SITES: usize = 28;

/// The generator restricted to the communicating class of the all-empty
/// configuration, in compressed sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorRecord {
    pub model: ConstraintModel,
    pub q: f64,
    pub dims: Vec<usize>,
    pub boundary: Boundary,
    pub kind: GeneratorKind,
    /// Packed configurations, sorted increasingly.
    pub states: Vec<u64>,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    /// Off-diagonal rates; the diagonal is `-exit_rates[i]`.
    pub rates: Vec<f64>,
    pub exit_rates: Vec<f64>,
    /// Product measure conditioned on the class.
    pub weights: Vec<f64>,
}

impl GeneratorRecord {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn sites(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().map(|&j| j as usize).zip(self.rates[r].iter().copied())
    }

    /// Rate `i → j` (off-diagonal), zero when absent.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.rates[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Largest `|w_i L_ij − w_j L_ji|` over all stored transitions.
    pub fn detailed_balance_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for (j, r) in self.row(i) {
                let back = self.rate(j, i);
                worst = worst.max(math::abs(self.weights[i] * r - self.weights[j] * back));
            }
        }
        worst
    }

    /// Largest absolute row sum of the full generator, diagonal included.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.len())
            .map(|i| math::abs(self.row(i).map(|(_, r)| r).sum::<f64>() - self.exit_rates[i]))
            .fold(0.0, f64::max)
    }

    /// `(L f)(i)` for a function on the class.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        for i in 0..self.len() {
            let mut acc = -self.exit_rates[i] * f[i];
            for (j, r) in self.row(i) {
                acc += r * f[j];
            }
            out[i] = acc;
        }
    }
}

/// Site permutations realising the recentring shifts `η ↦ η_{αe_i+·}`:
/// bit `x` of the shifted state is bit `perm[x]` of the original.
fn shift_permutations(dims: &[usize]) -> Result<Vec<Vec<usize>>> {
    let shape = SpinConfig::filled(dims, Boundary::Periodic, false)?;
    let mut perms = Vec::new();
    for axis in 0..dims.len() {
        for step in [1i64, -1] {
            perms.push(
                (0..shape.len())
                    .map(|x| shape.step_index(x, axis, step).expect("periodic"))
                    .collect(),
            );
        }
    }
    Ok(perms)
}

fn permute(state: u64, perm: &[usize]) -> u64 {
    let mut out = 0u64;
    for (x, &src) in perm.iter().enumerate() {
        out |= ((state >> src) & 1) << x;
    }
    out
}

/// Each step along `axis` as `(axis, ±1)` in the order used by
/// [`shift_permutations`].
fn shift_moves(d: usize) -> Vec<(usize, i64)> {
    (0..d).flat_map(|a| [(a, 1), (a, -1)]).collect()
}

struct Visited {
    bitmap: Option<Vec<u64>>,
    list: alloc::collections::BTreeSet<u64>,
}

impl Visited {
    fn new(sites: usize) -> Self {
        if sites <= BITMAP_SITES {
            Visited {
                bitmap: Some(vec![0u64; (1usize << sites).div_ceil(64)]),
                list: Default::default(),
            }
        } else {
            Visited {
                bitmap: None,
                list: Default::default(),
            }
        }
    }

    fn insert(&mut self, s: u64) -> bool {
        match &mut self.bitmap {
            Some(b) => {
                let (w, bit) = ((s >> 6) as usize, 1u64 << (s & 63));
                let fresh = b[w] & bit == 0;
                b[w] |= bit;
                fresh
            }
            None => self.list.insert(s),
        }
    }
}

/// Assemble the generator on the communicating class of the all-empty
/// configuration. `SeenFromTracer` adds the recentring shifts at rate 1,
/// gated by `(1−η_0)(1−η_{αe_i})`, and needs a periodic lattice.
pub fn build_generator(
    model: ConstraintModel,
    params: Params,
    dims: &[usize],
    boundary: Boundary,
    kind: GeneratorKind,
    cap: usize,
) -> Result<GeneratorRecord> {
    let table = NeighborTable::new(model, dims, boundary)?;
    let n: usize = dims.iter().product();
    if n > 63 {
        return Err(Error::Resource {
            what: String::from("sites in an exact generator"),
            needed: n as u128,
            cap: 63,
        });
    }
    if kind == GeneratorKind::SeenFromTracer && boundary != Boundary::Periodic {
        return Err(Error::BoundaryViolation(String::from(
            "the seen-from-tracer generator needs a periodic lattice",
        )));
    }
    let shape = SpinConfig::filled(dims, boundary, false)?;
    let perms = match kind {
        GeneratorKind::Environment => Vec::new(),
        GeneratorKind::SeenFromTracer => shift_permutations(dims)?,
    };
    let targets: Vec<usize> = match kind {
        GeneratorKind::Environment => Vec::new(),
        GeneratorKind::SeenFromTracer => shift_moves(dims.len())
            .into_iter()
            .map(|(axis, step)| shape.step_index(0, axis, step).expect("periodic"))
            .collect(),
    };

    let transitions = |s: u64, out: &mut Vec<(u64, f64)>| {
        out.clear();
        for y in 0..n {
            if table.allows_bits(s, y) {
                let rate = if (s >> y) & 1 == 0 { params.p() } else { params.q() };
                out.push((s ^ (1u64 << y), rate));
            }
        }
        if s & 1 == 0 {
            for (perm, &t) in perms.iter().zip(&targets) {
                if (s >> t) & 1 == 0 {
                    let shifted = permute(s, perm);
                    if shifted != s {
                        out.push((shifted, 1.0));
                    }
                }
            }
        }
    };

    let mut visited = Visited::new(n);
    let mut states = Vec::new();
    let mut queue = VecDeque::new();
    visited.insert(0);
    queue.push_back(0u64);
    let mut buf = Vec::new();
    while let Some(s) = queue.pop_front() {
        states.push(s);
        transitions(s, &mut buf);
        for &(t, _) in &buf {
            if visited.insert(t) {
                if states.len() + queue.len() >= cap {
                    return Err(Error::Resource {
                        what: String::from("communicating-class states"),
                        needed: (states.len() + queue.len() + 1) as u128,
                        cap: cap as u128,
                    });
                }
                queue.push_back(t);
            }
        }
    }
    drop(visited);
    states.sort_unstable();

    let dense_index: Option<Vec<u32>> = (n <= 24).then(|| {
        let mut idx = vec![u32::MAX; 1usize << n];
        for (i, &s) in states.iter().enumerate() {
            idx[s as usize] = i as u32;
        }
        idx
    });
    let lookup = |s: u64| -> usize {
        match &dense_index {
            Some(idx) => idx[s as usize] as usize,
            None => states.binary_search(&s).expect("closed class"),
        }
    };

    let mut row_ptr = Vec::with_capacity(states.len() + 1);
    let mut cols = Vec::new();
    let mut rates = Vec::new();
    let mut exit_rates = Vec::with_capacity(states.len());
    let mut row: Vec<(u32, f64)> = Vec::new();
    row_ptr.push(0);
    for &s in &states {
        transitions(s, &mut buf);
        row.clear();
        row.extend(buf.iter().map(|&(t, r)| (lookup(t) as u32, r)));
        row.sort_unstable_by_key(|e| e.0);
        let mut exit = 0.0;
        let mut k = 0;
        while k < row.len() {
            let (j, mut r) = row[k];
            k += 1;
            while k < row.len() && row[k].0 == j {
                r += row[k].1;
                k += 1;
            }
            cols.push(j);
            rates.push(r);
            exit += r;
        }
        exit_rates.push(exit);
        row_ptr.push(cols.len());
    }

    let (lq, lp) = (math::ln(params.q()), math::ln(params.p()));
    let logw: Vec<f64> = states
        .iter()
        .map(|s| {
            let occ = s.count_ones() as f64;
            occ * lp + (n as f64 - occ) * lq
        })
        .collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = logw.iter().map(|l| math::exp(l - top)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }

    let gen = GeneratorRecord {
        model,
        q: params.q(),
        dims: dims.to_vec(),
        boundary,
        kind,
        states,
        row_ptr,
        cols,
        rates,
        exit_rates,
        weights,
    };
    let defect = gen.detailed_balance_defect();
    if !(defect <= 1e-12) {
        return Err(Error::Invariant(format!(
            "assembled generator violates detailed balance by {defect:e}"
        )));
    }
    Ok(gen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(m: ConstraintModel, q: f64, dims: &[usize], b: Boundary, k: GeneratorKind) -> GeneratorRecord {
        build_generator(m, Params::new(q).unwrap(), dims, b, k, DEFAULT_STATE_CAP).unwrap()
    }

    #[test]
    fn single_free_spin() {
        let g = gen(ConstraintModel::East, 0.3, &[1], Boundary::FrozenEmpty, GeneratorKind::Environment);
        assert_eq!(g.states, vec![0, 1]);
        assert!((g.rate(0, 1) - 0.7).abs() < 1e-15);
        assert!((g.rate(1, 0) - 0.3).abs() < 1e-15);
        assert!((g.weights[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn fa_ring_of_four_excludes_the_blocked_state() {
        let g = gen(ConstraintModel::fa1f(), 0.4, &[4], Boundary::Periodic, GeneratorKind::Environment);
        assert_eq!(g.len(), 15);
        assert!(g.index_of(0b1111).is_none());
    }

    #[test]
    fn invariants_of_assembled_generators() {
        for (m, dims, b, k) in [
            (ConstraintModel::fa1f(), vec![8], Boundary::Periodic, GeneratorKind::Environment),
            (ConstraintModel::KZeros(2), vec![7], Boundary::Periodic, GeneratorKind::Environment),
            (ConstraintModel::East, vec![8], Boundary::FrozenEmpty, GeneratorKind::Environment),
            (ConstraintModel::fa1f(), vec![7], Boundary::Periodic, GeneratorKind::SeenFromTracer),
            (ConstraintModel::fa1f(), vec![3, 3], Boundary::Periodic, GeneratorKind::SeenFromTracer),
        ] {
            let g = gen(m, 0.27, &dims, b, k);
            assert!(g.detailed_balance_defect() <= 1e-12);
            assert!(g.row_sum_defect() <= 1e-12);
            assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let ones = vec![1.0; g.len()];
            let mut out = vec![0.0; g.len()];
            g.apply(&ones, &mut out);
            assert!(out.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn east_segment_class_is_everything() {
        let g = gen(ConstraintModel::East, 0.3, &[6], Boundary::FrozenEmpty, GeneratorKind::Environment);
        assert_eq!(g.len(), 64);
    }

    #[test]
    fn tracer_generator_has_shift_moves() {
        let g = gen(ConstraintModel::fa1f(), 0.5, &[5], Boundary::Periodic, GeneratorKind::SeenFromTracer);
        let e = gen(ConstraintModel::fa1f(), 0.5, &[5], Boundary::Periodic, GeneratorKind::Environment);
        assert_eq!(g.len(), e.len());
        // 0b00100: origin and its neighbours empty, zeros elsewhere except site 2.
        let s = 0b00100u64;
        let i = g.index_of(s).unwrap();
        // Shift by +1: new bit x = old bit x+1, so the one moves to site 1.
        let j = g.index_of(0b00010).unwrap();
        let flip_rate = e.rate(e.index_of(s).unwrap(), e.index_of(0b00110).unwrap());
        assert!((g.rate(i, j) - 1.0).abs() < 1e-15);
        assert!((flip_rate - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cap_is_enforced() {
        let r = build_generator(
            ConstraintModel::East,
            Params::new(0.3).unwrap(),
            &[12],
            Boundary::FrozenEmpty,
            GeneratorKind::Environment,
            1000,
        );
        assert!(matches!(r, Err(Error::Resource { .. })));
    }
}
