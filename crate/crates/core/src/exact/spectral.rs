//! Spectral gaps of reversible generators.
//!
//! The generator is symmetrised as `S = W^{1/2} L W^{-1/2}`; the null vector
//! of `-S` is `√w`. Small classes use a dense tridiagonal QL solve, larger
//! ones a Lanczos iteration restricted to the orthogonal complement of `√w`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::generator::{build_generator, GeneratorKind, GeneratorRecord, DEFAULT_STATE_CAP};
use crate::constraints::ConstraintModel;
use crate::lattice::{Boundary, Params};
use crate::math;
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Largest class solved densely by default.
pub const DENSE_LIMIT: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpectralMethod {
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralResult {
    pub gap: f64,
    pub relaxation_time: f64,
    pub class_size: usize,
    pub method: SpectralMethod,
    /// Residual norm of the returned Ritz pair (zero for the dense path).
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Stop when the Ritz residual falls below `rel_tol · θ`.
    pub rel_tol: f64,
    pub check_every: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_iter: 60_000,
            rel_tol: 1e-7,
            check_every: 10,
            seed: 0x5eed,
        }
    }
}

pub fn spectral_gap(gen: &GeneratorRecord) -> Result<SpectralResult> {
    let method = if gen.len() <= DENSE_LIMIT {
        SpectralMethod::Dense
    } else {
        SpectralMethod::Lanczos
    };
    spectral_gap_with(gen, method, LanczosOptions::default())
}

pub fn spectral_gap_with(
    gen: &GeneratorRecord,
    method: SpectralMethod,
    opts: LanczosOptions,
) -> Result<SpectralResult> {
    if gen.len() < 2 {
        return Err(Error::Precondition(String::from(
            "a spectral gap needs at least two states",
        )));
    }
    let (gap, residual) = match method {
        SpectralMethod::Dense => (dense_gap(gen)?, 0.0),
        SpectralMethod::Lanczos => lanczos_gap(gen, opts)?,
    };
    let gap = gap.max(0.0);
    Ok(SpectralResult {
        gap,
        relaxation_time: 1.0 / gap,
        class_size: gen.len(),
        method,
        residual,
    })
}

/// Gap of East on `L` sites with a frozen empty site to the right.
pub fn relaxation_time(l: usize, params: Params) -> Result<SpectralResult> {
    let gen = build_generator(
        ConstraintModel::East,
        params,
        &[l],
        Boundary::FrozenEmpty,
        GeneratorKind::Environment,
        DEFAULT_STATE_CAP,
    )?;
    spectral_gap(&gen)
}

fn sqrt_weights(gen: &GeneratorRecord) -> Vec<f64> {
    gen.weights.iter().map(|&w| math::sqrt(w)).collect()
}

fn dense_gap(gen: &GeneratorRecord) -> Result<f64> {
    let n = gen.len();
    let v = sqrt_weights(gen);
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    let mut a = vec![0.0; n * n];
    let mut bound: f64 = 0.0;
    for i in 0..n {
        a[i * n + i] = gen.exit_rates[i];
        let mut row = gen.exit_rates[i];
        for (j, r) in gen.row(i) {
            let s = math::sqrt(r * gen.rate(j, i));
            a[i * n + j] = -s;
            row += s;
        }
        bound = bound.max(row);
    }
    // Lift the null direction above the rest of the spectrum.
    let lift = bound + 1.0;
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] += lift * v[i] * v[j] / norm2;
        }
    }
    let eig = dense_symmetric_eigenvalues(&mut a, n)?;
    Ok(eig[0])
}

/// All eigenvalues of a dense symmetric row-major matrix, ascending.
/// The matrix is overwritten.
pub fn dense_symmetric_eigenvalues(a: &mut [f64], n: usize) -> Result<Vec<f64>> {
    let (mut d, mut e) = tridiagonalize(a, n);
    tql_eigenvalues(&mut d, &mut e)?;
    d.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(d)
}

/// Householder reduction to tridiagonal form. Returns the diagonal and the
/// subdiagonal (`e[i]` couples `i` and `i+1`; the last entry is zero).
fn tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| math::abs(a[i * n + k])).sum();
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                let mut h = 0.0;
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= 0.0 { -math::sqrt(h) } else { math::sqrt(h) };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j * n + k] * a[i * n + k];
                    }
                    for k in j + 1..=l {
                        g += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g / h;
                    f += e[j] * a[i * n + j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
    }
    for i in 0..n {
        d[i] = a[i * n + i];
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    if n > 0 {
        e[n - 1] = 0.0;
    }
    (d, e)
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        math::abs(a)
    } else {
        -math::abs(a)
    }
}

fn hypot(a: f64, b: f64) -> f64 {
    libm::hypot(a, b)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
fn tql_eigenvalues(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = math::abs(d[m]) + math::abs(d[m + 1]);
                if math::abs(e[m]) <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    residual: math::abs(e[l]),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + sign(r, g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Number of eigenvalues of the tridiagonal `(a, b)` strictly below `x`.
fn sturm_count(a: &[f64], b: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..a.len() {
        let off = if i == 0 { 0.0 } else { b[i - 1] * b[i - 1] };
        q = a[i] - x - if i == 0 { 0.0 } else { off / q };
        if q == 0.0 {
            q = f64::EPSILON * (math::abs(a[i]) + math::abs(x) + f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn smallest_tridiagonal_eigenvalue(a: &[f64], b: &[f64]) -> f64 {
    let k = a.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = if i > 0 { math::abs(b[i - 1]) } else { 0.0 } + if i + 1 < k { math::abs(b[i]) } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(a, b, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Last component of the unit eigenvector of the tridiagonal `(a, b)` for
/// the eigenvalue `theta`, by two steps of inverse iteration.
fn last_eigenvector_component(a: &[f64], b: &[f64], theta: f64) -> f64 {
    let k = a.len();
    if k == 1 {
        return 1.0;
    }
    let scale = a.iter().map(|x| math::abs(*x)).fold(0.0, f64::max).max(1e-300);
    let shift = theta - 1e-13 * scale;
    let mut x = vec![1.0; k];
    for _ in 0..3 {
        // Tridiagonal solve with partial pivoting (Gaussian elimination on
        // a banded matrix with up to two superdiagonals).
        let mut diag: Vec<f64> = a.iter().map(|v| v - shift).collect();
        let mut sup1: Vec<f64> = b.to_vec();
        sup1.push(0.0);
        let mut sup2 = vec![0.0; k];
        let mut sub: Vec<f64> = b.to_vec();
        let mut rhs = x.clone();
        for i in 0..k - 1 {
            if math::abs(sub[i]) > math::abs(diag[i]) {
                // Swap rows i and i+1.
                let (d0, s10, s20, r0) = (diag[i], sup1[i], sup2[i], rhs[i]);
                diag[i] = sub[i];
                sup1[i] = diag[i + 1];
                sup2[i] = sup1[i + 1];
                rhs[i] = rhs[i + 1];
                sub[i] = d0;
                diag[i + 1] = s10;
                sup1[i + 1] = s20;
                rhs[i + 1] = r0;
            }
            if diag[i] == 0.0 {
                diag[i] = 1e-300;
            }
            let m = sub[i] / diag[i];
            diag[i + 1] -= m * sup1[i];
            sup1[i + 1] -= m * sup2[i];
            rhs[i + 1] -= m * rhs[i];
        }
        if diag[k - 1] == 0.0 {
            diag[k - 1] = 1e-300;
        }
        for i in (0..k).rev() {
            let mut v = rhs[i];
            if i + 1 < k {
                v -= sup1[i] * x[i + 1];
            }
            if i + 2 < k {
                v -= sup2[i] * x[i + 2];
            }
            x[i] = v / diag[i];
        }
        let norm = math::sqrt(x.iter().map(|v| v * v).sum());
        for v in &mut x {
            *v /= norm;
        }
    }
    x[k - 1]
}

fn lanczos_gap(gen: &GeneratorRecord, opts: LanczosOptions) -> Result<(f64, f64)> {
    let n = gen.len();
    let sw = sqrt_weights(gen);
    let inv: Vec<f64> = sw.iter().map(|&s| 1.0 / s).collect();
    let norm2: f64 = sw.iter().map(|x| x * x).sum();
    let project = |x: &mut [f64]| {
        let c: f64 = x.iter().zip(&sw).map(|(a, b)| a * b).sum::<f64>() / norm2;
        for (xi, s) in x.iter_mut().zip(&sw) {
            *xi -= c * s;
        }
    };
    let mut z = vec![0.0; n];
    let matvec = |x: &[f64], out: &mut [f64], z: &mut [f64]| {
        for i in 0..n {
            z[i] = x[i] * inv[i];
        }
        for i in 0..n {
            let r = gen.row_ptr[i]..gen.row_ptr[i + 1];
            let mut acc = 0.0;
            for k in r {
                acc += gen.rates[k] * z[gen.cols[k] as usize];
            }
            out[i] = gen.exit_rates[i] * x[i] - sw[i] * acc;
        }
    };

    let mut rng = stream_rng(opts.seed, n as u64);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    project(&mut v);
    let nv = math::sqrt(v.iter().map(|x| x * x).sum());
    for x in &mut v {
        *x /= nv;
    }
    let mut v_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut beta_prev = 0.0;
    let mut last = (f64::NAN, f64::INFINITY);
    for it in 1..=opts.max_iter {
        matvec(&v, &mut w, &mut z);
        for i in 0..n {
            w[i] -= beta_prev * v_prev[i];
        }
        let alpha: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        for i in 0..n {
            w[i] -= alpha * v[i];
        }
        project(&mut w);
        let beta = math::sqrt(w.iter().map(|x| x * x).sum());
        alphas.push(alpha);
        let scale = alphas.iter().map(|x| math::abs(*x)).fold(0.0, f64::max);
        let breakdown = beta <= 1e-13 * scale || it == n - 1;
        if it % opts.check_every == 0 || breakdown || it == opts.max_iter {
            let theta = smallest_tridiagonal_eigenvalue(&alphas, &betas);
            let resid = if breakdown {
                0.0
            } else {
                math::abs(beta * last_eigenvector_component(&alphas, &betas, theta))
            };
            last = (theta, resid);
            if resid <= opts.rel_tol * math::abs(theta) {
                return Ok((theta, resid));
            }
            if breakdown {
                return Ok((theta, resid));
            }
        }
        betas.push(beta);
        core::mem::swap(&mut v_prev, &mut v);
        for i in 0..n {
            v[i] = w[i] / beta;
        }
        beta_prev = beta;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: last.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::generator::GeneratorKind;

    fn east(l: usize, q: f64) -> GeneratorRecord {
        build_generator(
            ConstraintModel::East,
            Params::new(q).unwrap(),
            &[l],
            Boundary::FrozenEmpty,
            GeneratorKind::Environment,
            DEFAULT_STATE_CAP,
        )
        .unwrap()
    }

    #[test]
    fn single_spin_gap_is_one() {
        for q in [0.1, 0.5, 0.9] {
            let r = spectral_gap(&east(1, q)).unwrap();
            assert!((r.gap - 1.0).abs() < 1e-13);
            assert!((r.relaxation_time * r.gap - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_site_east_by_hand() {
        // States (η0, η1) with a frozen zero at site 2. Site 1 is free and
        // site 0 needs η1 = 0, so the chain is the path 01 - 00 - 10 - 11.
        // At q = 1/2 all rates are 1/2: half the path Laplacian.
        let r = spectral_gap(&east(2, 0.5)).unwrap();
        let expect = 1.0 - libm::cos(core::f64::consts::PI / 4.0);
        assert!((r.gap - expect).abs() < 1e-13, "{}", r.gap);
    }

    #[test]
    fn tridiagonal_solver_on_known_spectrum() {
        // Path-graph Laplacian of size 6 with unit weights.
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            if i + 1 < n {
                a[i * n + i + 1] = -1.0;
                a[(i + 1) * n + i] = -1.0;
            }
        }
        let eig = dense_symmetric_eigenvalues(&mut a, n).unwrap();
        for (k, lam) in eig.iter().enumerate() {
            let expect = 2.0 - 2.0 * libm::cos(core::f64::consts::PI * k as f64 / n as f64);
            assert!((lam - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn east_gap_decreases_with_length() {
        for q in [0.3, 0.5] {
            let gaps: Vec<f64> = (1..=10)
                .map(|l| relaxation_time(l, Params::new(q).unwrap()).unwrap().gap)
                .collect();
            assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        }
    }

    #[test]
    fn dense_and_lanczos_agree() {
        for g in [
            east(8, 0.3),
            east(9, 0.2),
            build_generator(
                ConstraintModel::fa1f(),
                Params::new(0.25).unwrap(),
                &[9],
                Boundary::Periodic,
                GeneratorKind::SeenFromTracer,
                DEFAULT_STATE_CAP,
            )
            .unwrap(),
        ] {
            let d = spectral_gap_with(&g, SpectralMethod::Dense, LanczosOptions::default()).unwrap();
            let l = spectral_gap_with(&g, SpectralMethod::Lanczos, LanczosOptions::default()).unwrap();
            assert!((d.gap - l.gap).abs() <= 1e-8 * d.gap.max(1e-3), "{} vs {}", d.gap, l.gap);
        }
    }

    #[test]
    fn sturm_bisection_matches_qr() {
        let a = [2.0, -1.0, 3.5, 0.25, 1.0];
        let b = [0.5, 1.5, -0.75, 2.0];
        let mut d = a.to_vec();
        let mut e = b.to_vec();
        e.push(0.0);
        tql_eigenvalues(&mut d, &mut e).unwrap();
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((smallest_tridiagonal_eigenvalue(&a, &b) - min).abs() < 1e-13);
    }
}
