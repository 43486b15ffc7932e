//! Finite lattice configurations and the Bernoulli product measure.
//!
//! Occupation variables are bit-packed (`1` = occupied, `0` = empty) with
//! row-major site indexing. The origin is the site with all coordinates zero,
//! which is index 0. Under [`Boundary::Periodic`] coordinates wrap; under
//! [`Boundary::FrozenEmpty`] sites outside the box are virtual, read as empty
//! and can never be written.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::math;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    FrozenEmpty,
}

/// A lattice point given by integer coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn origin(d: usize) -> Self {
        Site(vec![0; d])
    }

    /// A one-dimensional site.
    pub fn d1(x: i64) -> Self {
        Site(vec![x])
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }
}

/// Equilibrium parameters. `q` is the probability that a site is empty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    q: f64,
}

impl Params {
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(Params { q })
        } else {
            Err(Error::InvalidParameter(format!("q must lie in (0,1), got {q}")))
        }
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Density `1 - q`.
    #[inline]
    pub fn p(&self) -> f64 {
        1.0 - self.q
    }
}

/// Direction `u` for the quadratic form `u·Du`.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    u: Vec<f64>,
}

impl Direction {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.is_empty() || u.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(String::from(
                "direction must be a non-empty vector of finite entries",
            )));
        }
        Ok(Direction { u })
    }

    /// The unit vector `e_axis` in dimension `d`.
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut u = vec![0.0; d];
        u[axis] = 1.0;
        Direction { u }
    }

    pub fn components(&self) -> &[f64] {
        &self.u
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.u.iter().map(|x| x * x).sum())
    }

    /// `u·x` for an integer displacement.
    pub fn dot(&self, x: &[i64]) -> f64 {
        self.u.iter().zip(x).map(|(a, &b)| a * b as f64).sum()
    }
}

/// Occupation variables on a finite box.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    dims: Vec<usize>,
    strides: Vec<usize>,
    boundary: Boundary,
    len: usize,
    words: Vec<u64>,
}

fn strides_for(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    strides
}

impl SpinConfig {
    /// A configuration with every site occupied (`occupied = true`) or empty.
    pub fn filled(dims: &[usize], boundary: Boundary, occupied: bool) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter(String::from(
                "lattice needs at least one axis and positive side lengths",
            )));
        }
        let len = dims.iter().product::<usize>();
        let nwords = len.div_ceil(64);
        let mut words = vec![if occupied { u64::MAX } else { 0 }; nwords];
        if occupied && len % 64 != 0 {
            words[nwords - 1] = (1u64 << (len % 64)) - 1;
        }
        Ok(SpinConfig {
            dims: dims.to_vec(),
            strides: strides_for(dims),
            boundary,
            len,
            words,
        })
    }

    /// Build from a slice of 0/1 occupations in row-major order.
    pub fn from_occupancy(dims: &[usize], boundary: Boundary, occ: &[u8]) -> Result<Self> {
        let mut c = Self::filled(dims, boundary, false)?;
        if occ.len() != c.len {
            return Err(Error::InvalidParameter(format!(
                "expected {} occupation values, got {}",
                c.len,
                occ.len()
            )));
        }
        for (i, &v) in occ.iter().enumerate() {
            match v {
                0 => {}
                1 => c.set(i, true),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "occupation values must be 0 or 1, got {v}"
                    )))
                }
            }
        }
        Ok(c)
    }

    /// Parse a one-dimensional configuration such as `"10110"`.
    pub fn parse_1d(s: &str, boundary: Boundary) -> Result<Self> {
        let occ: Vec<u8> = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidParameter(format!("unexpected character {ch:?}"))),
            })
            .collect::<Result<_>>()?;
        Self::from_occupancy(&[occ.len()], boundary, &occ)
    }

    /// Configuration from the low `len` bits of `bits` (bit i = site i).
    pub fn from_bits(dims: &[usize], boundary: Boundary, bits: u64) -> Result<Self> {
        let mut c = Self::filled(dims, boundary, false)?;
        if c.len > 64 {
            return Err(Error::Resource {
                what: String::from("bit-pattern configuration"),
                needed: c.len as u128,
                cap: 64,
            });
        }
        let mask = if c.len == 64 { u64::MAX } else { (1u64 << c.len) - 1 };
        c.words[0] = bits & mask;
        Ok(c)
    }

    /// The occupations as one machine word, for lattices of at most 64 sites.
    pub fn to_bits(&self) -> Option<u64> {
        (self.len <= 64).then(|| self.words[0])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    #[inline]
    pub fn occupied(&self, i: usize) -> bool {
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn vacant(&self, i: usize) -> bool {
        !self.occupied(i)
    }

    #[inline]
    pub fn set(&mut self, i: usize, occupied: bool) {
        let bit = 1u64 << (i & 63);
        if occupied {
            self.words[i >> 6] |= bit;
        } else {
            self.words[i >> 6] &= !bit;
        }
    }

    #[inline]
    pub fn toggle(&mut self, i: usize) {
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    pub fn count_occupied(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn count_empty(&self) -> usize {
        self.len - self.count_occupied()
    }

    /// Linear index of a site, wrapping under periodic boundaries. `None`
    /// for virtual sites outside a frozen-empty box.
    pub fn index_of(&self, site: &Site) -> Option<usize> {
        if site.dim() != self.dim() {
            return None;
        }
        let mut idx = 0;
        for (axis, &c) in site.coords().iter().enumerate() {
            let n = self.dims[axis] as i64;
            let c = match self.boundary {
                Boundary::Periodic => c.rem_euclid(n),
                Boundary::FrozenEmpty if (0..n).contains(&c) => c,
                Boundary::FrozenEmpty => return None,
            };
            idx += c as usize * self.strides[axis];
        }
        Some(idx)
    }

    pub fn coords_of(&self, i: usize) -> Site {
        Site(
            self.strides
                .iter()
                .zip(&self.dims)
                .map(|(&s, &n)| ((i / s) % n) as i64)
                .collect(),
        )
    }

    /// Index of `i + offset`, or `None` when that lands on a virtual site.
    pub fn offset_index(&self, i: usize, offset: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for axis in 0..self.dims.len() {
            let n = self.dims[axis] as i64;
            let c = ((i / self.strides[axis]) % self.dims[axis]) as i64 + offset[axis];
            let c = match self.boundary {
                Boundary::Periodic => c.rem_euclid(n),
                Boundary::FrozenEmpty if (0..n).contains(&c) => c,
                Boundary::FrozenEmpty => return None,
            };
            idx += c as usize * self.strides[axis];
        }
        Some(idx)
    }

    /// Index of the site one step of size `step` along `axis` from `i`.
    #[inline]
    pub fn step_index(&self, i: usize, axis: usize, step: i64) -> Option<usize> {
        let n = self.dims[axis] as i64;
        let s = self.strides[axis];
        let c = ((i / s) % self.dims[axis]) as i64;
        let t = c + step;
        let t = match self.boundary {
            Boundary::Periodic => t.rem_euclid(n),
            Boundary::FrozenEmpty if (0..n).contains(&t) => t,
            Boundary::FrozenEmpty => return None,
        };
        Some((i as i64 + (t - c) * s as i64) as usize)
    }

    /// Occupation at a site; virtual sites read as empty.
    pub fn get(&self, site: &Site) -> u8 {
        self.index_of(site).map_or(0, |i| self.occupied(i) as u8)
    }

    fn writable(&self, site: &Site) -> Result<usize> {
        if site.dim() != self.dim() {
            return Err(Error::UnsupportedDimension {
                expected: self.dim(),
                got: site.dim(),
            });
        }
        self.index_of(site).ok_or_else(|| {
            Error::BoundaryViolation(format!("site {:?} is outside the frozen-empty box", site.0))
        })
    }

    /// The configuration flipped at `x`.
    pub fn flip(&self, x: &Site) -> Result<Self> {
        let i = self.writable(x)?;
        let mut c = self.clone();
        c.toggle(i);
        Ok(c)
    }

    /// Swap the occupations of sites −1 and +1, and of −2 and +2 (1d only).
    pub fn exchange(&self) -> Result<Self> {
        if self.dim() != 1 {
            return Err(Error::UnsupportedDimension {
                expected: 1,
                got: self.dim(),
            });
        }
        if self.len < 5 {
            return Err(Error::Precondition(String::from(
                "exchange needs a lattice of at least 5 sites",
            )));
        }
        let idx = |x: i64| self.writable(&Site::d1(x));
        let (m2, m1, p1, p2) = (idx(-2)?, idx(-1)?, idx(1)?, idx(2)?);
        let mut c = self.clone();
        c.set(m1, self.occupied(p1));
        c.set(p1, self.occupied(m1));
        c.set(m2, self.occupied(p2));
        c.set(p2, self.occupied(m2));
        Ok(c)
    }

    /// The translated configuration `x ↦ c(x + y)` (periodic lattices only).
    pub fn shift(&self, y: &Site) -> Result<Self> {
        if self.boundary != Boundary::Periodic {
            return Err(Error::BoundaryViolation(String::from(
                "shift is only defined on periodic lattices",
            )));
        }
        if y.dim() != self.dim() {
            return Err(Error::UnsupportedDimension {
                expected: self.dim(),
                got: y.dim(),
            });
        }
        let mut c = Self::filled(&self.dims, self.boundary, false)?;
        if self.dim() == 1 {
            let n = self.len as i64;
            let s = y.0[0].rem_euclid(n) as usize;
            for x in 0..self.len {
                let src = if x + s >= self.len { x + s - self.len } else { x + s };
                if self.occupied(src) {
                    c.set(x, true);
                }
            }
        } else {
            for x in 0..self.len {
                let src = self.offset_index(x, y.coords()).expect("periodic");
                if self.occupied(src) {
                    c.set(x, true);
                }
            }
        }
        Ok(c)
    }

    /// Product Bernoulli weight: empty sites weigh `q`, occupied ones `1 - q`.
    pub fn bernoulli_weight(&self, params: &Params) -> f64 {
        let occ = self.count_occupied() as i32;
        let emp = self.len as i32 - occ;
        math::powi(params.p(), occ) * math::powi(params.q(), emp)
    }

    /// Draw from the product measure: each site independently empty with
    /// probability `q`.
    pub fn sample<R: Rng + ?Sized>(
        params: &Params,
        dims: &[usize],
        boundary: Boundary,
        rng: &mut R,
    ) -> Result<Self> {
        let mut c = Self::filled(dims, boundary, false)?;
        for i in 0..c.len {
            if rng.random::<f64>() >= params.q() {
                c.set(i, true);
            }
        }
        Ok(c)
    }

    /// Indices of the nearest-neighbour connected cluster of empty sites
    /// containing the origin (breadth-first, origin first). Empty when the
    /// origin is occupied.
    pub fn cluster_indices_at_origin(&self) -> Vec<usize> {
        if self.occupied(0) {
            return Vec::new();
        }
        let mut seen = vec![false; self.len];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        seen[0] = true;
        queue.push_back(0usize);
        while let Some(i) = queue.pop_front() {
            out.push(i);
            for axis in 0..self.dim() {
                for step in [-1i64, 1] {
                    if let Some(j) = self.step_index(i, axis, step) {
                        if !seen[j] && self.vacant(j) {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        out
    }

    /// The cluster of empty sites containing the origin, as sorted sites.
    pub fn cluster_at_origin(&self) -> Vec<Site> {
        let mut sites: Vec<Site> = self
            .cluster_indices_at_origin()
            .into_iter()
            .map(|i| self.coords_of(i))
            .collect();
        sites.sort();
        sites
    }
}

impl fmt::Debug for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpinConfig({:?}, {:?}, \"{}\")", self.dims, self.boundary, self)
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = *self.dims.last().unwrap_or(&1);
        for i in 0..self.len {
            if i > 0 && i % row == 0 {
                f.write_str("/")?;
            }
            f.write_str(if self.occupied(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use alloc::string::ToString;

    fn ring(s: &str) -> SpinConfig {
        SpinConfig::parse_1d(s, Boundary::Periodic).unwrap()
    }

    #[test]
    fn flip_examples() {
        let c = SpinConfig::filled(&[5], Boundary::Periodic, false).unwrap();
        let f = c.flip(&Site::d1(0)).unwrap();
        assert_eq!(f.to_string(), "10000");
        assert_eq!(f.flip(&Site::d1(0)).unwrap(), c);
        assert_eq!(ring("101").flip(&Site::d1(1)).unwrap().to_string(), "111");
    }

    #[test]
    fn flip_virtual_site_is_rejected() {
        let c = SpinConfig::filled(&[4], Boundary::FrozenEmpty, true).unwrap();
        assert!(matches!(c.flip(&Site::d1(4)), Err(Error::BoundaryViolation(_))));
        assert!(matches!(c.flip(&Site::d1(-1)), Err(Error::BoundaryViolation(_))));
        assert_eq!(c.get(&Site::d1(7)), 0);
    }

    #[test]
    fn exchange_examples() {
        // Window (η−2, η−1, η0, η1, η2) sits at ring indices 5, 6, 0, 1, 2.
        let window = |w: [u8; 5]| {
            let mut occ = [0u8; 7];
            occ[5] = w[0];
            occ[6] = w[1];
            occ[0] = w[2];
            occ[1] = w[3];
            occ[2] = w[4];
            SpinConfig::from_occupancy(&[7], Boundary::Periodic, &occ).unwrap()
        };
        assert_eq!(window([1, 1, 0, 0, 0]).exchange().unwrap(), window([0, 0, 0, 1, 1]));
        assert_eq!(window([0, 1, 0, 1, 0]).exchange().unwrap(), window([0, 1, 0, 1, 0]));
        let c2 = SpinConfig::filled(&[3, 3], Boundary::Periodic, false).unwrap();
        assert!(matches!(c2.exchange(), Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn shift_examples() {
        assert_eq!(ring("100").shift(&Site::d1(1)).unwrap().to_string(), "001");
        assert_eq!(ring("10110").shift(&Site::d1(0)).unwrap(), ring("10110"));
        let frozen = SpinConfig::parse_1d("100", Boundary::FrozenEmpty).unwrap();
        assert!(matches!(frozen.shift(&Site::d1(1)), Err(Error::BoundaryViolation(_))));
    }

    #[test]
    fn bernoulli_weights() {
        let params = Params::new(0.3).unwrap();
        let ones = SpinConfig::filled(&[6], Boundary::Periodic, true).unwrap();
        assert!((ones.bernoulli_weight(&params) - 0.7f64.powi(6)).abs() < 1e-15);
        let total: f64 = (0..1u64 << 10)
            .map(|b| {
                SpinConfig::from_bits(&[10], Boundary::Periodic, b)
                    .unwrap()
                    .bernoulli_weight(&params)
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mass_of_three_zero_event() {
        // Sum the weights of 5-site windows (−2..2) lying in A.
        for q in [0.1, 0.3, 0.5, 0.8] {
            let params = Params::new(q).unwrap();
            let mut mass = 0.0;
            for b in 0..32u64 {
                let occ = |k: i64| (b >> (k + 2)) & 1 == 1;
                let e = |k: i64| !occ(k);
                let in_a = e(0) && ((e(1) && e(2)) || (e(-1) && e(1)) || (e(-2) && e(-1)));
                if in_a {
                    let w = SpinConfig::from_bits(&[5], Boundary::FrozenEmpty, b).unwrap();
                    mass += w.bernoulli_weight(&params);
                }
            }
            let p = 1.0 - q;
            assert!((mass - q * q * q * (1.0 + 2.0 * p)).abs() < 1e-14);
        }
    }

    #[test]
    fn sampler_frequencies_and_determinism() {
        for (q, tol) in [(0.5, 5e-3), (0.2, 4e-3)] {
            let params = Params::new(q).unwrap();
            let mut rng = stream_rng(11, 0);
            let c = SpinConfig::sample(&params, &[100_000], Boundary::Periodic, &mut rng).unwrap();
            let frac = c.count_empty() as f64 / 1e5;
            assert!((frac - q).abs() < tol, "q={q} frac={frac}");
        }
        let params = Params::new(0.4).unwrap();
        let a = SpinConfig::sample(&params, &[300], Boundary::Periodic, &mut stream_rng(3, 9)).unwrap();
        let b = SpinConfig::sample(&params, &[300], Boundary::Periodic, &mut stream_rng(3, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn params_reject_endpoints() {
        assert!(Params::new(0.0).is_err());
        assert!(Params::new(1.0).is_err());
        assert!(Params::new(f64::NAN).is_err());
    }

    #[test]
    fn cluster_examples() {
        assert!(ring("10000").cluster_at_origin().is_empty());
        assert_eq!(ring("000000").cluster_at_origin().len(), 6);
        // …1 0 0 1… with zeros at 0 and 1.
        let c = ring("001111");
        assert_eq!(c.cluster_at_origin(), vec![Site::d1(0), Site::d1(1)]);
        // Wraps around the ring: zeros at −1, 0, 1.
        assert_eq!(ring("001110").cluster_at_origin().len(), 3);
    }

    #[test]
    fn cluster_in_two_dimensions() {
        // 3x4 torus; origin at (0,0).
        let occ = [
            0, 0, 1, 1, //
            1, 0, 1, 1, //
            1, 0, 0, 1,
        ];
        let c = SpinConfig::from_occupancy(&[3, 4], Boundary::FrozenEmpty, &occ).unwrap();
        let cl = c.cluster_at_origin();
        assert_eq!(cl.len(), 5);
        assert!(cl.contains(&Site(vec![2, 2])));
    }
}
