//! Exact law of the East hitting time `T₀` by uniformisation of the chain
//! killed when site 1 empties.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::Params;
use crate::math;
use crate::{Error, Result};

const MAX_SITES: usize = 20;

/// `P(T₀ ≤ t)` for East on sites `1..=l` started from all occupied with a
/// frozen zero at `l + 1`.
pub fn hitting_cdf(l: usize, params: Params, t: f64) -> Result<f64> {
    Ok(hitting_cdf_many(l, params, &[t])?[0])
}

/// [`hitting_cdf`] at several times, sharing one uniformised chain.
pub fn hitting_cdf_many(l: usize, params: Params, times: &[f64]) -> Result<Vec<f64>> {
    if l == 0 || l > MAX_SITES {
        return Err(Error::InvalidParameter(String::from(
            "hitting_cdf needs 1 ≤ l ≤ 20",
        )));
    }
    if times.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter(String::from("times must be finite and non-negative")));
    }
    let (q, p) = (params.q(), params.p());
    // Transient states: site 0 occupied; index = remaining bits shifted down.
    let m = 1usize << (l - 1);
    let lambda = l as f64;
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let mean = lambda * t_max;
    let n_max = (mean + 12.0 * math::sqrt(mean) + 40.0) as usize;

    let state = |k: usize| ((k as u64) << 1) | 1;
    let empty = |s: u64, y: usize| y >= l || (s >> y) & 1 == 0;
    // Outgoing transient moves and the killing rate of each state.
    let mut moves: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    let mut stay = vec![0.0; m];
    for k in 0..m {
        let s = state(k);
        let mut out = Vec::new();
        let mut exit = 0.0;
        for y in 1..l {
            if empty(s, y + 1) {
                let r = if (s >> y) & 1 == 1 { q } else { p };
                out.push((((s ^ (1 << y)) >> 1) as usize, r / lambda));
                exit += r;
            }
        }
        if empty(s, 1) {
            exit += q;
        }
        stay[k] = 1.0 - exit / lambda;
        moves.push(out);
    }

    let mut pi = vec![0.0; m];
    pi[m - 1] = 1.0;
    let mut next = vec![0.0; m];
    let mut survival = Vec::with_capacity(n_max + 1);
    for _ in 0..=n_max {
        survival.push(pi.iter().sum::<f64>());
        for v in next.iter_mut() {
            *v = 0.0;
        }
        for k in 0..m {
            let mass = pi[k];
            if mass == 0.0 {
                continue;
            }
            next[k] += mass * stay[k];
            for &(j, r) in &moves[k] {
                next[j] += mass * r;
            }
        }
        core::mem::swap(&mut pi, &mut next);
    }

    Ok(times
        .iter()
        .map(|&t| {
            let mu = lambda * t;
            let surv: f64 = if mu == 0.0 {
                survival[0]
            } else {
                let lmu = math::ln(mu);
                survival
                    .iter()
                    .enumerate()
                    .map(|(n, &s)| {
                        let lw = -mu + n as f64 * lmu - math::ln_factorial(n as u64);
                        if lw < -745.0 {
                            0.0
                        } else {
                            math::exp(lw) * s
                        }
                    })
                    .sum()
            };
            (1.0 - surv).clamp(0.0, 1.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_is_exponential() {
        let params = Params::new(0.3).unwrap();
        for t in [0.0, 0.5, 2.0, 7.5] {
            let exact = 1.0 - libm::exp(-0.3 * t);
            assert!((hitting_cdf(1, params, t).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn two_sites_against_matrix_exponential() {
        // Transient states (η1, η2) with η1 = 1: η2 ∈ {1, 0}.
        // From η2 = 1: site 2 empties at rate q. From η2 = 0: site 2 fills at
        // rate p, site 1 empties at rate q (absorbing).
        let q = 0.25;
        let p = 0.75;
        let params = Params::new(q).unwrap();
        // Survival from state A (η2 = 1) solves a 2x2 linear ODE; integrate
        // it with a fine RK4 as an independent reference.
        let rhs = |a: f64, b: f64| (-q * a + p * b, q * a - (p + q) * b);
        let (mut a, mut b) = (1.0, 0.0);
        let h = 1e-3;
        let mut t = 0.0;
        for target in [1.0, 4.0, 10.0] {
            while t < target - 1e-12 {
                let k1 = rhs(a, b);
                let k2 = rhs(a + 0.5 * h * k1.0, b + 0.5 * h * k1.1);
                let k3 = rhs(a + 0.5 * h * k2.0, b + 0.5 * h * k2.1);
                let k4 = rhs(a + h * k3.0, b + h * k3.1);
                a += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
                b += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
                t += h;
            }
            let cdf = hitting_cdf(2, params, target).unwrap();
            assert!((cdf - (1.0 - a - b)).abs() < 1e-9, "t={target}");
        }
    }

    #[test]
    fn cdf_is_monotone_in_time_and_decreasing_in_length() {
        let params = Params::new(0.25).unwrap();
        let ts = [1.0, 5.0, 20.0, 80.0];
        let mut prev: Option<Vec<f64>> = None;
        for l in [1, 2, 4, 6] {
            let c = hitting_cdf_many(l, params, &ts).unwrap();
            assert!(c.windows(2).all(|w| w[1] >= w[0]));
            if let Some(p) = &prev {
                assert!(c.iter().zip(p).all(|(x, y)| x < y));
            }
            prev = Some(c);
        }
    }
}
