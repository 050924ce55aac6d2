//! Distribution-free risk intervals for scenario programs with relaxed
//! constraints.
//!
//! Given `N` scenarios, an observed complexity `k` (the number of scenario
//! constraints that are active or violated at the optimum) and a confidence
//! parameter `beta`, the interval `[eps_lower(k), eps_upper(k)]` contains the
//! violation probability of the optimal design with probability at least
//! `1 - beta`. The endpoints are `1 - t` for the two non-negative roots `t` of
//!
//! ```text
//! C(N,k) t^(N-k) = beta/(2N) * sum_{i=k}^{N-1} C(i,k) t^(i-k)
//!                + beta/(6N) * sum_{i=N+1}^{4N} C(i,k) t^(i-k)
//! ```
//!
//! (for `k = N` the left-hand side is replaced by `1` and only one root
//! exists). Every sum is evaluated in the log domain: the coefficients
//! overflow `f64` long before `N = 2000`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::BoundsError;

/// Bisection stops once the bracket stops shrinking; it must reach at least
/// this width in `v`.
pub const ROOT_TOLERANCE: f64 = 1e-10;
/// Upper limit on bisection steps and on bracket-expansion steps.
pub const MAX_STEPS: usize = 200;

/// `(N, k, beta)` for one risk-interval evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    n_scenarios: usize,
    complexity: usize,
    confidence_param: f64,
}

impl BoundQuery {
    pub fn new(
        n_scenarios: usize,
        complexity: usize,
        confidence_param: f64,
    ) -> Result<Self, BoundsError> {
        if n_scenarios == 0 {
            return Err(BoundsError::NoScenarios);
        }
        if complexity > n_scenarios {
            return Err(BoundsError::ComplexityExceedsSampleSize {
                complexity,
                n_scenarios,
            });
        }
        if !(confidence_param > 0.0 && confidence_param < 1.0) {
            return Err(BoundsError::InvalidConfidence(confidence_param));
        }
        Ok(Self {
            n_scenarios,
            complexity,
            confidence_param,
        })
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn complexity(&self) -> usize {
        self.complexity
    }

    pub fn confidence_param(&self) -> f64 {
        self.confidence_param
    }

    /// `k / N`, the point both endpoints approach as `N` grows.
    pub fn ratio(&self) -> f64 {
        self.complexity as f64 / self.n_scenarios as f64
    }
}

/// Certified range for the violation probability.
///
/// `root_lower_t` is the larger root `t̄(k)` (it determines the lower
/// endpoint) and `root_upper_t` the smaller root `t̲(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskInterval {
    pub lower: f64,
    pub upper: f64,
    pub query: BoundQuery,
    pub root_lower_t: f64,
    pub root_upper_t: f64,
}

impl RiskInterval {
    pub fn contains(&self, risk: f64) -> bool {
        self.lower <= risk && risk <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Closed-form caps obtained from the two bracketing inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplicitBoundPair {
    /// Upper cap on `eps_upper(k)`.
    pub upper_cap: f64,
    /// Floor under `eps_lower(k)`, clamped at zero.
    pub lower_floor: f64,
    /// Constant `lambda` in the upper cap. For `k = 0` this is
    /// `ln(beta/2 + e)`, the analogue obtained with `a = 2`.
    pub lambda_used: f64,
    /// Gap `g(k, N, beta)` of the lower floor; zero for `k = 0`, where the
    /// floor is identically zero.
    pub g_value: f64,
}

/// `ln C(n, k)`.
///
/// Small `min(k, n-k)` goes through a compensated sum of `ln((n-i)/(i+1))`,
/// which keeps full relative precision when the result is small; larger
/// arguments use log-gamma differences.
pub fn log_binomial(n: u64, k: u64) -> Result<f64, BoundsError> {
    if k > n {
        return Err(BoundsError::BinomialDomain { n, k });
    }
    let k = k.min(n - k);
    if k == 0 {
        return Ok(0.0);
    }
    if k <= 2048 {
        let mut sum = NeumaierSum::default();
        for i in 0..k {
            sum.add(((n - i) as f64 / (i + 1) as f64).ln());
        }
        return Ok(sum.value());
    }
    let (n, k) = (n as f64, k as f64);
    Ok(ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0))
}

/// Sign of `LHS - RHS` of the certificate equation written in `v = 1 - t`:
/// `+1` at `v = 1`, `-1` strictly between the two endpoints, `+1` again
/// below the lower root.
pub fn certificate_residual_sign(query: &BoundQuery, v: f64) -> Result<i8, BoundsError> {
    if query.complexity == query.n_scenarios {
        return Err(BoundsError::FullComplexity);
    }
    check_v(v)?;
    let poly = CertificatePoly::new(query);
    Ok(sign(poly.log_ratio(v)))
}

/// `ln(LHS) - ln(RHS)` of the certificate equation at `v`; zero at both
/// endpoints. For `k = N` the equation with constant right-hand side `1` is
/// used.
pub fn certificate_log_ratio(query: &BoundQuery, v: f64) -> Result<f64, BoundsError> {
    check_v(v)?;
    Ok(CertificatePoly::new(query).log_ratio(v))
}

/// [`certificate_log_ratio`] in terms of `t = 1 - v >= 0`, which keeps
/// full precision for small `t`.
pub fn certificate_log_ratio_at_t(query: &BoundQuery, t: f64) -> Result<f64, BoundsError> {
    if t.is_nan() || t < 0.0 {
        return Err(BoundsError::VOutOfRange(1.0 - t));
    }
    Ok(CertificatePoly::new(query).log_ratio_at_log_t(t.ln()))
}

/// The risk interval `[eps_lower(k), eps_upper(k)]` for one query.
pub fn epsilon_bounds(query: &BoundQuery) -> Result<RiskInterval, BoundsError> {
    let poly = CertificatePoly::new(query);
    if query.complexity == query.n_scenarios {
        return full_complexity_bounds(query, &poly);
    }

    let v0 = poly.interior_point(query)?;

    // Upper endpoint: the residual is positive at v = 1 (t = 0).
    let v_upper = bisect(&poly, v0, 1.0)?;

    // Lower endpoint: expand geometrically below v0 until the sign flips.
    let step = 1.0 / query.n_scenarios as f64;
    let mut width = step;
    let mut v_pos = None;
    for _ in 0..MAX_STEPS {
        let candidate = v0 - width;
        if poly.log_ratio(candidate) > 0.0 {
            v_pos = Some(candidate);
            break;
        }
        width *= 2.0;
    }
    let v_pos = v_pos.ok_or(BoundsError::Bracketing {
        n_scenarios: query.n_scenarios,
        complexity: query.complexity,
    })?;
    let v_lower = bisect(&poly, v0, v_pos)?;

    let root_lower_t = refine_in_log_t(&poly, 1.0 - v_lower);
    let root_upper_t = refine_in_log_t(&poly, 1.0 - v_upper);
    Ok(RiskInterval {
        lower: (1.0 - root_lower_t).max(0.0),
        upper: 1.0 - root_upper_t,
        query: *query,
        root_lower_t,
        root_upper_t,
    })
}

fn full_complexity_bounds(
    query: &BoundQuery,
    poly: &CertificatePoly,
) -> Result<RiskInterval, BoundsError> {
    // log_ratio is -inf at t = 0 and increases with t.
    let mut t = 1.0;
    let mut found = false;
    for _ in 0..MAX_STEPS {
        if poly.log_ratio(1.0 - t) > 0.0 {
            found = true;
            break;
        }
        t *= 2.0;
    }
    if !found {
        return Err(BoundsError::Bracketing {
            n_scenarios: query.n_scenarios,
            complexity: query.complexity,
        });
    }
    let v_root = bisect(poly, 1.0, 1.0 - t)?;
    let root_lower_t = refine_in_log_t(poly, 1.0 - v_root);
    Ok(RiskInterval {
        lower: (1.0 - root_lower_t).max(0.0),
        upper: 1.0,
        query: *query,
        root_lower_t,
        root_upper_t: 0.0,
    })
}

/// Risk intervals for every `k = 0..=N`.
pub fn epsilon_table(
    n_scenarios: usize,
    confidence_param: f64,
) -> Result<Vec<RiskInterval>, BoundsError> {
    // validate once so the error names the real problem
    BoundQuery::new(n_scenarios, 0, confidence_param)?;
    (0..=n_scenarios)
        .into_par_iter()
        .map(|k| epsilon_bounds(&BoundQuery::new(n_scenarios, k, confidence_param)?))
        .collect()
}

/// Closed-form cap on `eps_upper(k)`.
pub fn explicit_upper_bound(query: &BoundQuery) -> f64 {
    explicit_bounds(query).upper_cap
}

/// Closed-form floor under `eps_lower(k)`: `max{0, k/N - 2 g(k, N, beta)}`.
pub fn explicit_lower_bound(query: &BoundQuery) -> f64 {
    explicit_bounds(query).lower_floor
}

pub fn explicit_bounds(query: &BoundQuery) -> ExplicitBoundPair {
    let n = query.n_scenarios as f64;
    let k = query.complexity as f64;
    let beta = query.confidence_param;

    if query.complexity == 0 {
        let lambda = (beta / 2.0 + std::f64::consts::E).ln();
        return ExplicitBoundPair {
            upper_cap: 2.0 / n * (lambda + (2.0 / beta).ln()),
            lower_floor: 0.0,
            lambda_used: lambda,
            g_value: 0.0,
        };
    }

    let root_k = k.sqrt();
    let lambda = (beta / (2.0 * (k + 1.0)) + (1.0 / root_k).exp()).ln() + root_k / (root_k + 1.0);
    let upper_cap = if query.complexity == query.n_scenarios {
        1.0
    } else {
        k / n + (root_k + 1.0) / n * (lambda + (2.0 / beta).ln() + (k + 1.0).ln())
    };

    let g = lower_gap(query);
    ExplicitBoundPair {
        upper_cap,
        lower_floor: (k / n - 2.0 * g).max(0.0),
        lambda_used: lambda,
        g_value: g,
    }
}

/// `g(k, N, beta)`: distance between `k/N` and the largest `v` allowed by the
/// relaxed lower inequality. Requires `k >= 1`.
fn lower_gap(query: &BoundQuery) -> f64 {
    let n = query.n_scenarios as f64;
    let k = query.complexity as f64;
    let beta = query.confidence_param;
    let root_k = k.sqrt();
    let largest_v = k / (n + 1.0) * (1.0 - 1.0 / (2.0 * root_k))
        - root_k / (n + 1.0) * ((12.0 / beta).ln() + (beta / 6.0 + k + 1.0).ln());
    k / n - largest_v
}

/// `phi_{H,k}(v) = sum_{i=k}^{H-1} C(i,k) (1-v)^(i-k)`, evaluated through
/// the binomial-tail form `sum_{i=k+1}^{H} C(H,i) v^i (1-v)^(H-i) / v^(k+1)`.
pub fn binomial_tail_phi(h: u64, k: u64, v: f64) -> Result<f64, BoundsError> {
    if h == 0 || k > h - 1 {
        return Err(BoundsError::PhiDomain { h, k });
    }
    if !(v > 0.0 && v <= 1.0) {
        return Err(BoundsError::PhiArgument(v));
    }
    let ln_v = v.ln();
    let ln_w = (-v).ln_1p();
    let mut logs = Vec::with_capacity((h - k) as usize);
    for i in (k + 1)..=h {
        let tail_power = h - i;
        let w_part = if tail_power == 0 {
            0.0
        } else {
            tail_power as f64 * ln_w
        };
        logs.push(log_binomial(h, i)? + i as f64 * ln_v + w_part);
    }
    Ok((log_sum_exp(&logs) - (k + 1) as f64 * ln_v).exp())
}

fn check_v(v: f64) -> Result<(), BoundsError> {
    if v.is_nan() || v > 1.0 {
        return Err(BoundsError::VOutOfRange(v));
    }
    Ok(())
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Newton steps on the log-ratio in `ln t`, kept only while they shrink the
/// residual; recovers relative precision in `t` that is lost in `v = 1 - t`
/// when `t` is tiny.
fn refine_in_log_t(poly: &CertificatePoly, t: f64) -> f64 {
    if t <= 0.0 {
        return t;
    }
    let mut s = t.ln();
    let mut r = poly.log_ratio_at_log_t(s);
    for _ in 0..50 {
        let slope = poly.slope_in_log_t(s);
        if r == 0.0 || slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = s - r / slope;
        let r_next = poly.log_ratio_at_log_t(next);
        if !(r_next.abs() < r.abs()) {
            break;
        }
        s = next;
        r = r_next;
    }
    s.exp()
}

/// Bisection between a point with negative log-ratio and one with positive
/// log-ratio, run until the bracket stops shrinking.
fn bisect(poly: &CertificatePoly, mut neg: f64, mut pos: f64) -> Result<f64, BoundsError> {
    for _ in 0..MAX_STEPS {
        let mid = 0.5 * (neg + pos);
        if mid == neg || mid == pos {
            break;
        }
        let r = poly.log_ratio(mid);
        if r < 0.0 {
            neg = mid;
        } else if r > 0.0 {
            pos = mid;
        } else {
            return Ok(mid);
        }
    }
    if (pos - neg).abs() > ROOT_TOLERANCE {
        return Err(BoundsError::NotConverged {
            width: (pos - neg).abs(),
        });
    }
    // the endpoint closer to the root in residual terms
    if poly.log_ratio(neg).abs() <= poly.log_ratio(pos).abs() {
        Ok(neg)
    } else {
        Ok(pos)
    }
}

/// Terms this far below the largest one are below the rounding of the sum.
const NEGLIGIBLE_LOG: f64 = -60.0;

/// The certificate equation as `sum_j exp(c_j + e_j ln t) = exp(c_R + e_R ln t)`.
struct CertificatePoly {
    log_coeffs: Vec<f64>,
    exponents: Vec<f64>,
    rhs_log_coeff: f64,
    rhs_exponent: f64,
}

impl CertificatePoly {
    fn new(query: &BoundQuery) -> Self {
        let n = query.n_scenarios;
        let k = query.complexity;
        let beta = query.confidence_param;
        let nf = n as f64;

        // ln C(i, k) for i = k..=4N, accumulated from C(k, k) = 1.
        let top = 4 * n;
        let mut ln_choose = Vec::with_capacity(top - k + 1);
        let mut acc = NeumaierSum::default();
        ln_choose.push(0.0);
        for i in (k + 1)..=top {
            acc.add((i as f64 / (i - k) as f64).ln());
            ln_choose.push(acc.value());
        }
        let lc = |i: usize| ln_choose[i - k];

        let mut log_coeffs = Vec::with_capacity(top - k);
        let mut exponents = Vec::with_capacity(top - k);
        if k < n {
            let head = (beta / (2.0 * nf)).ln();
            for i in k..n {
                log_coeffs.push(head + lc(i));
                exponents.push((i - k) as f64);
            }
        }
        let tail = (beta / (6.0 * nf)).ln();
        for i in (n + 1)..=top {
            log_coeffs.push(tail + lc(i));
            exponents.push((i - k) as f64);
        }

        let (rhs_log_coeff, rhs_exponent) = if k < n {
            (lc(n), (n - k) as f64)
        } else {
            (0.0, 0.0)
        };
        Self {
            log_coeffs,
            exponents,
            rhs_log_coeff,
            rhs_exponent,
        }
    }

    fn log_ratio(&self, v: f64) -> f64 {
        self.log_ratio_at_log_t((1.0 - v).ln())
    }

    fn log_ratio_at_log_t(&self, ln_t: f64) -> f64 {
        let term = |c: f64, e: f64| if e == 0.0 { c } else { c + e * ln_t };
        let mut max = f64::NEG_INFINITY;
        for (&c, &e) in self.log_coeffs.iter().zip(&self.exponents) {
            max = max.max(term(c, e));
        }
        let lhs = if max == f64::NEG_INFINITY {
            max
        } else {
            let mut sum = 0.0;
            for (&c, &e) in self.log_coeffs.iter().zip(&self.exponents) {
                let d = term(c, e) - max;
                if d > NEGLIGIBLE_LOG {
                    sum += d.exp();
                }
            }
            max + sum.ln()
        };
        let rhs = term(self.rhs_log_coeff, self.rhs_exponent);
        if rhs == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        lhs - rhs
    }

    /// Derivative of the log-ratio with respect to `s = ln t`. The log-ratio
    /// is a log-sum-exp of affine functions of `s` minus an affine function,
    /// hence convex in `s`.
    fn slope_in_log_t(&self, s: f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for (&c, &e) in self.log_coeffs.iter().zip(&self.exponents) {
            max = max.max(c + e * s);
        }
        let mut weight = 0.0;
        let mut moment = 0.0;
        for (&c, &e) in self.log_coeffs.iter().zip(&self.exponents) {
            let d = c + e * s - max;
            if d > NEGLIGIBLE_LOG {
                let w = d.exp();
                weight += w;
                moment += w * e;
            }
        }
        moment / weight - self.rhs_exponent
    }

    /// A point strictly between the two roots (negative residual). `k/N` is
    /// tried first; otherwise the minimizer of the convex log-ratio over
    /// `ln t` is located by bisection on its slope.
    fn interior_point(&self, query: &BoundQuery) -> Result<f64, BoundsError> {
        let ratio = query.ratio();
        if self.log_ratio(ratio) < 0.0 {
            return Ok(ratio);
        }
        let fail = BoundsError::Bracketing {
            n_scenarios: query.n_scenarios,
            complexity: query.complexity,
        };
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut steps = 0;
        while self.slope_in_log_t(lo) >= 0.0 {
            lo *= 2.0;
            steps += 1;
            if steps > MAX_STEPS {
                return Err(fail);
            }
        }
        while self.slope_in_log_t(hi) <= 0.0 {
            hi *= 2.0;
            steps += 1;
            if steps > MAX_STEPS {
                return Err(fail);
            }
        }
        for _ in 0..MAX_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.slope_in_log_t(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = 1.0 - (0.5 * (lo + hi)).exp();
        if self.log_ratio(v) < 0.0 {
            Ok(v)
        } else {
            Err(fail)
        }
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}
