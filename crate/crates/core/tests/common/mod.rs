//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_bigint::{BigInt, BigUint};
use num_traits::{Float, One, Signed, ToPrimitive, Zero};
use rand::rngs::ChaCha20Rng;
use rand::{RngExt, SeedableRng};
use std::cmp::Ordering;

/// `beta` as an exact fraction.
fn exact_fraction(beta: f64) -> (BigInt, BigInt) {
    let (mantissa, exponent, _) = beta.integer_decode();
    let m = BigInt::from(mantissa);
    if exponent >= 0 {
        (m << exponent as usize, BigInt::one())
    } else {
        (m, BigInt::one() << (-exponent) as usize)
    }
}

/// Exact `C(n, k)`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// Natural log of a big unsigned integer, good to full `f64` precision.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Exact sign of the certificate polynomial at `t = a / b` (`a, b > 0`),
/// positive where the binomial-sum side dominates. For `k = N` the equation
/// with right-hand side `1` is used, negative at `t = 0`.
pub fn exact_sign(n: u64, k: u64, beta: f64, a: &BigInt, b: &BigInt) -> Ordering {
    let (bn, bd) = exact_fraction(beta);
    // powers a^(i-k) b^(4N-i) for i = k..=4N, built incrementally
    let top = 4 * n;
    let mut b_pow = vec![BigInt::one(); (top - k + 1) as usize];
    for j in 1..b_pow.len() {
        b_pow[j] = &b_pow[j - 1] * b;
    }
    let mut first = BigInt::zero();
    let mut second = BigInt::zero();
    let mut pivot = BigInt::zero();
    let mut a_pow = BigInt::one();
    let mut coeff = BigInt::one(); // C(i, k)
    for i in k..=top {
        if i > k {
            a_pow *= a;
            coeff = coeff * BigInt::from(i) / BigInt::from(i - k);
        }
        let term = &coeff * &a_pow * &b_pow[(top - i) as usize];
        match i.cmp(&n) {
            Ordering::Less => first += term,
            Ordering::Equal => pivot = term,
            Ordering::Greater => second += term,
        }
    }
    let scale = BigInt::from(6 * n) * &bd;
    let value = if k == n {
        &bn * second - scale * &b_pow[(3 * n) as usize]
    } else {
        &bn * (first * 3 + second) - scale * pivot
    };
    if value.is_positive() {
        Ordering::Greater
    } else if value.is_negative() {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

/// Bits of the dyadic grid used by the oracle's bisection (`≈ 2.3e-14`).
const GRID_BITS: usize = 45;

fn sign_on_grid(n: u64, k: u64, beta: f64, a: &BigInt) -> Ordering {
    exact_sign(n, k, beta, a, &(BigInt::one() << GRID_BITS))
}

/// Bisection on the dyadic grid between `lo` (sign `s_lo`) and `hi`.
fn bisect_grid(n: u64, k: u64, beta: f64, mut lo: BigInt, mut hi: BigInt) -> f64 {
    let s_lo = sign_on_grid(n, k, beta, &lo);
    while &hi - &lo > BigInt::one() {
        let mid: BigInt = (&lo + &hi) >> 1;
        let s = sign_on_grid(n, k, beta, &mid);
        if s == Ordering::Equal {
            return grid_value(&mid);
        }
        if s == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (grid_value(&lo) + grid_value(&hi)) / 2.0
}

fn grid_value(a: &BigInt) -> f64 {
    a.to_f64().unwrap() / (1u64 << GRID_BITS) as f64
}

/// Exact risk interval `(lower, upper)` from big-integer arithmetic: roots of
/// the certificate polynomial in `t` are located by exact sign evaluation on
/// a `2^-45` grid. Refuses `N > 30`.
pub fn exact_root_oracle(n: u64, k: u64, beta: f64) -> Option<(f64, f64)> {
    if n > 30 || k > n {
        return None;
    }
    let one = BigInt::one() << GRID_BITS;
    // a point where the sign is positive for large t
    let mut far = one.clone();
    while sign_on_grid(n, k, beta, &far) != Ordering::Greater {
        far <<= 1;
    }
    if k == n {
        let t = bisect_grid(n, k, beta, BigInt::zero(), far);
        return Some(((1.0 - t).max(0.0), 1.0));
    }
    // an interior point with negative sign: t = 1 - k/N, else a grid scan
    let guess = BigInt::from(n - k) * &one / BigInt::from(n);
    let inner = if sign_on_grid(n, k, beta, &guess) == Ordering::Less {
        guess
    } else {
        let steps = 1u64 << 14;
        (1..steps)
            .map(|j| &far * BigInt::from(j) / BigInt::from(steps))
            .find(|a| sign_on_grid(n, k, beta, a) == Ordering::Less)?
    };
    let t_small = bisect_grid(n, k, beta, BigInt::zero(), inner.clone());
    let t_large = bisect_grid(n, k, beta, inner, far);
    Some(((1.0 - t_large).max(0.0), 1.0 - t_small))
}

/// `min ½xᵀPx + qᵀx` subject to `l ≤ Ax ≤ u` by enumerating every assignment
/// of rows to {inactive, lower, upper} and keeping the KKT point. Requires
/// positive definite `P` and few rows.
pub fn enumerate_qp(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
) -> Option<DVector<f64>> {
    let n = p.nrows();
    let m = a.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..3usize.pow(m as u32) {
        let mut c = code;
        let mut rows = Vec::new();
        let mut skip = false;
        for i in 0..m {
            let side = c % 3;
            c /= 3;
            match side {
                1 if l[i].is_finite() => rows.push((i, l[i], -1.0)),
                2 if u[i].is_finite() && l[i] != u[i] => rows.push((i, u[i], 1.0)),
                0 => {}
                _ => skip = true,
            }
        }
        if skip {
            continue;
        }
        let k = rows.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(p);
        rhs.rows_mut(0, n).copy_from(&(-q));
        for (r, &(i, bound, _)) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = a[(i, j)];
                kkt[(j, n + r)] = a[(i, j)];
            }
            rhs[n + r] = bound;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let x = sol.rows(0, n).clone_owned();
        let ax = a * &x;
        let feasible = (0..m).all(|i| ax[i] >= l[i] - 1e-9 && ax[i] <= u[i] + 1e-9);
        let signs_ok = rows.iter().enumerate().all(|(r, &(i, _, dir))| {
            // equality rows accept either sign
            l[i] == u[i] || sol[n + r] * dir >= -1e-9
        });
        if feasible && signs_ok {
            let obj = 0.5 * x.dot(&(p * &x)) + q.dot(&x);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

/// A random strictly convex QP with a known feasible point: mixes two-sided,
/// one-sided, equality and free rows.
pub fn random_qp(seed: u64) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=4usize);
    let m = rng.random_range(1..=5usize);
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let p = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
    let q = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let ax0 = &a * &x0;
    let mut l = DVector::zeros(m);
    let mut u = DVector::zeros(m);
    for i in 0..m {
        let (lo, hi) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        match rng.random_range(0..7u32) {
            0 => {
                l[i] = ax0[i];
                u[i] = ax0[i];
            }
            1 => {
                l[i] = f64::NEG_INFINITY;
                u[i] = ax0[i] + hi;
            }
            2 => {
                l[i] = ax0[i] - lo;
                u[i] = f64::INFINITY;
            }
            3 => {
                l[i] = f64::NEG_INFINITY;
                u[i] = f64::INFINITY;
            }
            _ => {
                l[i] = ax0[i] - lo;
                u[i] = ax0[i] + hi;
            }
        }
    }
    (p, q, a, l, u)
}

/// Minimum of a convex function on `[lo, hi]` by ternary search.
pub fn ternary_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi))
}

/// `min over γ ≥ 0 of γ + ρ Σ (dᵢ² - γ)₊`, by trying every kink.
pub fn svdd_radius_objective(d2: &[f64], rho: f64) -> f64 {
    std::iter::once(0.0)
        .chain(d2.iter().copied())
        .map(|g| g + rho * d2.iter().map(|d| (d - g).max(0.0)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Optimal SVDD objective for points in the plane (or on the line when the
/// second coordinate is absent), linear kernel, by nested convex search over
/// the center.
pub fn svdd_objective_oracle(points: &[Vec<f64>], rho: f64) -> f64 {
    let coord = |j: usize| points.iter().map(move |p| p.get(j).copied().unwrap_or(0.0));
    let (lo0, hi0) = coord(0).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo1, hi1) = coord(1).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let at = |c0: f64, c1: f64| {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| (p[0] - c0).powi(2) + p.get(1).map_or(0.0, |x| (x - c1).powi(2)))
            .collect();
        svdd_radius_objective(&d2, rho)
    };
    if points[0].len() == 1 {
        ternary_min(lo0, hi0, |c| at(c, 0.0))
    } else {
        ternary_min(lo0, hi0, |c0| ternary_min(lo1, hi1, |c1| at(c0, c1)))
    }
}
