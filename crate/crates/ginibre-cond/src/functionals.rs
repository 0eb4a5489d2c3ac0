//! Multiplicative functionals over point configurations and the scalar
//! machinery of their regularized expectations.
//!
//! For two tuples p = (p_1..p_l), q = (q_1..q_l) of distinct points, the
//! basic objects are
//!
//! * the ratio multiplier h(z) = prod_i |(z - p_i)/(z - q_i)|^2 - 1, which
//!   is >= -1, has poles at the q_i, and decays like 1/|z| at infinity;
//! * the compensator kappa(p, z) = p/z + conj(p)/conj(z)
//!   + p^2/(2 z^2) + conj(p)^2/(2 conj(z)^2), the explicit correction that
//!   makes exterior products converge — for radial weights its angular
//!   average vanishes identically;
//! * the partial product Gamma_{p,q}(X; R) = prod_{x in X, |x| <= R}
//!   prod_i |(x - p_i)/(x - q_i)|^2 and its compensated version Psi;
//! * the radius r_{p,q} beyond which both the per-factor and product
//!   deviations from 1 stay below 1/2, located by a doubling-then-bisection
//!   search against a circle-sweep oracle;
//! * the split I(n, R) = E_1 + E_2 + E_3 + E_4 of the second-order Fredholm
//!   trace tr T - (1/2) tr T^2 into an inner part, two annular diagonal
//!   integrals, and a commutator term — the decomposition behind the
//!   regularized determinant factorization;
//! * the radial double integrals I_1, I_2 controlling the commutator term,
//!   with the finite-order versus full-kernel comparisons they satisfy.
//!
//! Everything here accumulates products in log space and avoids raw powers
//! of large moments: the incomplete-moment products are grouped as
//! (a_k^2 U)(a_k^2 U), each factor of which is bounded by 1/(2 pi r^2).

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelModel};
use crate::quadrature::{fredholm_det, nystrom, nystrom_plain, Grid};
use crate::weights::{weighted_power_integral, QuadratureSpec, RadialWeight};
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

/// Minimum separation below which points are treated as coincident, and the
/// guard distance around multiplier poles.
const POLE_TOL: f64 = 1e-12;

/// Two equal-length tuples of pairwise-distinct points; the (p, q) data of a
/// multiplicative functional. Points may coincide across tuples (p_i = q_j
/// is allowed), only within a tuple must they be distinct.
#[derive(Debug, Clone)]
pub struct TuplePair {
    p: Vec<Complex64>,
    q: Vec<Complex64>,
}

impl TuplePair {
    /// Validates lengths (equal, >= 1) and within-tuple distinctness
    /// (separation > 1e-12).
    pub fn new(p: Vec<Complex64>, q: Vec<Complex64>) -> Result<Self> {
        assert_eq!(p.len(), q.len(), "tuples must have equal length");
        assert!(!p.is_empty(), "tuples must be nonempty");
        for t in [&p, &q] {
            for i in 0..t.len() {
                for j in 0..i {
                    if (t[i] - t[j]).norm() <= POLE_TOL {
                        return Err(Error::DegenerateCondition {
                            re: t[i].re,
                            im: t[i].im,
                            diag: 0.0,
                        });
                    }
                }
            }
        }
        Ok(Self { p, q })
    }

    /// Single-pair convenience constructor.
    pub fn single(p: Complex64, q: Complex64) -> Result<Self> {
        Self::new(vec![p], vec![q])
    }

    /// Tuple length l.
    pub fn len(&self) -> usize {
        self.p.len()
    }

    /// Always false (constructors require l >= 1).
    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// The numerator tuple p.
    pub fn p(&self) -> &[Complex64] {
        &self.p
    }

    /// The denominator tuple q (the poles of h).
    pub fn q(&self) -> &[Complex64] {
        &self.q
    }

    /// kappa(p-tuple, z) - kappa(q-tuple, z).
    pub fn kappa_diff(&self, z: Complex64) -> Result<f64> {
        Ok(kappa_tuple(&self.p, z)? - kappa_tuple(&self.q, z)?)
    }
}

/// The compensator kappa(p, z) = 2 Re(p/z) + Re((p/z)^2) (written with its
/// conjugate halves it is manifestly real). Requires z != 0.
pub fn kappa(p: Complex64, z: Complex64) -> Result<f64> {
    if z.norm() == 0.0 {
        return Err(Error::DivisionByZero);
    }
    let u = p / z;
    Ok(2.0 * u.re + (u * u).re)
}

/// Sum of [`kappa`] over a tuple.
pub fn kappa_tuple(points: &[Complex64], z: Complex64) -> Result<f64> {
    let mut s = 0.0;
    for &p in points {
        s += kappa(p, z)?;
    }
    Ok(s)
}

/// h(z) = prod_i |(z - p_i)/(z - q_i)|^2 - 1, accumulated in log space
/// through expm1 so near-cancellation at large |z| stays accurate. The
/// value is >= -1 (it equals -1 exactly when z hits some p_i); z within
/// 1e-12 of a pole q_i is an error.
pub fn h_func(pair: &TuplePair, z: Complex64) -> Result<f64> {
    let mut log_ratio = 0.0f64;
    for (&p, &q) in pair.p.iter().zip(&pair.q) {
        let dq = (z - q).norm();
        if dq <= POLE_TOL {
            return Err(Error::PoleProximity { re: z.re, im: z.im });
        }
        log_ratio += 2.0 * ((z - p).norm().ln() - dq.ln());
    }
    Ok(log_ratio.exp_m1())
}

/// Max over a circle sweep (radii r x {1, 1.5, 2, 4}, 64 offset angles) of
/// `f` applied to the h-value. The tested envelopes decrease beyond the
/// poles, so this sweep is a faithful stand-in for the sup over |z| >= r.
pub fn circle_sweep_sup<F: Fn(f64) -> f64>(pair: &TuplePair, r: f64, f: F) -> f64 {
    let mut sup = f64::NEG_INFINITY;
    for factor in [1.0, 1.5, 2.0, 4.0] {
        let rr = r * factor;
        for j in 0..64 {
            let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / 64.0;
            let z = Complex64::from_polar(rr, theta);
            // Sweep circles sit beyond every pole by construction of the
            // callers (r exceeds the point moduli), so h is finite here.
            if let Ok(h) = h_func(pair, z) {
                sup = sup.max(f(h));
            }
        }
    }
    sup
}

/// Both closeness conditions at radius r: every single-factor deviation
/// sup_i ||(z-p_i)/(z-q_i)|^2 - 1| and the product deviation |h| stay
/// within 1/2 on the sweep circles.
fn closeness_holds(pair: &TuplePair, r: f64) -> bool {
    const BUDGET: f64 = 0.5 + 1e-12;
    for factor in [1.0, 1.5, 2.0, 4.0] {
        let rr = r * factor;
        for j in 0..64 {
            let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / 64.0;
            let z = Complex64::from_polar(rr, theta);
            let mut log_ratio = 0.0f64;
            for (&p, &q) in pair.p.iter().zip(&pair.q) {
                let single = 2.0 * ((z - p).norm().ln() - (z - q).norm().ln());
                if single.exp_m1().abs() > BUDGET {
                    return false;
                }
                log_ratio += single;
            }
            if log_ratio.exp_m1().abs() > BUDGET {
                return false;
            }
        }
    }
    true
}

/// The smallest sweep-verified radius (to ~1e-9) at which both closeness
/// conditions hold, floored at (max point modulus) + 1. Doubling search
/// followed by bisection; always terminates because the tested ratios tend
/// to 1 at infinity.
pub fn r_pq(pair: &TuplePair) -> f64 {
    let floor = pair
        .p
        .iter()
        .chain(&pair.q)
        .map(|c| c.norm())
        .fold(0.0f64, f64::max)
        + 1.0;
    if closeness_holds(pair, floor) {
        return floor;
    }
    let mut hi = floor;
    loop {
        hi *= 2.0;
        if closeness_holds(pair, hi) {
            break;
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if closeness_holds(pair, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-9 {
            break;
        }
    }
    hi
}

/// Gamma_{p,q}(X; R) = prod over configuration points |x| <= R of
/// prod_i |(x - p_i)/(x - q_i)|^2, accumulated in log space. Returns 0 when
/// a configuration point hits some p_i (a zero factor) and errors if one
/// sits within 1e-12 of a pole q_i.
pub fn partial_gamma(points: &[Complex64], pair: &TuplePair, big_r: f64) -> Result<f64> {
    let mut log_sum = 0.0f64;
    for &x in points {
        if x.norm() > big_r {
            continue;
        }
        for (&p, &q) in pair.p.iter().zip(&pair.q) {
            let dq = (x - q).norm();
            if dq <= POLE_TOL {
                return Err(Error::PoleProximity { re: x.re, im: x.im });
            }
            log_sum += 2.0 * ((x - p).norm().ln() - dq.ln());
        }
    }
    Ok(log_sum.exp())
}

/// The annular compensator integral
/// int_{r <= |z| <= R} (kappa(p, z) - kappa(q, z)) K(z, z) dlambda_phi(z),
/// discretized on `grid`. For radial weights the angular averages of kappa
/// vanish, so the value is zero to rounding.
pub fn compensator<K: Kernel + ?Sized>(
    pair: &TuplePair,
    kernel: &K,
    r: f64,
    big_r: f64,
    grid: &Grid,
) -> Result<f64> {
    assert!(big_r > r && r > 0.0, "need 0 < r < R");
    let mut total = 0.0f64;
    for (&z, &w) in grid.nodes.iter().zip(&grid.weights) {
        let rad = z.norm();
        if rad < r || rad > big_r {
            continue;
        }
        total += pair.kappa_diff(z)? * kernel.checked_eval(z, z)?.re * w;
    }
    Ok(total)
}

/// The compensated partial product
/// Psi^{(R)}(X) = exp(compensator over [r_pq, R]) x Gamma(X; R).
/// For radial weights this equals [`partial_gamma`] to rounding.
pub fn partial_psi<K: Kernel + ?Sized>(
    points: &[Complex64],
    pair: &TuplePair,
    kernel: &K,
    big_r: f64,
    grid: &Grid,
) -> Result<f64> {
    let r = r_pq(pair);
    assert!(
        big_r > r,
        "compensated product needs R beyond the closeness radius"
    );
    let comp = compensator(pair, kernel, r, big_r, grid)?;
    Ok(comp.exp() * partial_gamma(points, pair, big_r)?)
}

/// |Delta(t)|^2 = prod_{i<j} |t_j - t_i|^2 (1 for l <= 1).
pub fn vandermonde_sq(t: &[Complex64]) -> f64 {
    let mut log_sum = 0.0f64;
    for i in 0..t.len() {
        for j in 0..i {
            log_sum += 2.0 * (t[i] - t[j]).norm().ln();
        }
    }
    log_sum.exp()
}

/// The closed-form expectation of Gamma under the q-conditioned process:
/// det_{ij} K(p_i, p_j) / det_{ij} K(q_i, q_j) x |Delta(q)|^2 / |Delta(p)|^2.
/// Fails with [`Error::SingularGram`] when either determinant vanishes
/// numerically.
pub fn expected_gamma_closed<K: Kernel + ?Sized>(kernel: &K, pair: &TuplePair) -> Result<f64> {
    let l = pair.len();
    let gram = |pts: &[Complex64]| -> Result<f64> {
        let mut m = faer::Mat::<faer::c64>::zeros(l, l);
        for i in 0..l {
            for j in 0..l {
                let v = kernel.checked_eval(pts[i], pts[j])?;
                m[(i, j)] = faer::c64::new(v.re, v.im);
            }
        }
        let d = m.determinant();
        if !(d.norm() > 1e-300) {
            return Err(Error::SingularGram(format!(
                "kernel Gram determinant {d} at tuple of size {l}"
            )));
        }
        Ok(d.re)
    };
    let num = gram(&pair.p)?;
    let den = gram(&pair.q)?;
    Ok(num / den * vandermonde_sq(&pair.q) / vandermonde_sq(&pair.p))
}

/// The Fredholm route to the same expectation at horizon R = grid.r_max:
/// det(1 + T) with T = sgn(h) sqrt|h| K^q sqrt|h| over the grid. Converges
/// to [`expected_gamma_closed`] as the grid radius grows.
pub fn expected_gamma_fredholm(
    kernel: &KernelModel,
    pair: &TuplePair,
    grid: &Arc<Grid>,
) -> Result<f64> {
    let palm = kernel.palm(pair.q())?;
    let t = nystrom(&palm, grid, |z| h_func(pair, z).unwrap_or(f64::NAN), pair.q())?;
    let det = fredholm_det(&t)?;
    Ok(det.re)
}

/// rho(q) / rho(p) for a single pair: E[Psi_{p,q}] x K(q,q) / K(p,p), with
/// the expectation taken by the Fredholm route on `grid` (the closed-form
/// route would cancel identically and verify nothing). Radial weights give
/// 1 up to discretization.
pub fn rho_ratio(
    kernel: &KernelModel,
    p: Complex64,
    q: Complex64,
    grid: &Arc<Grid>,
) -> Result<f64> {
    let pair = TuplePair::single(p, q)?;
    let e_gamma = expected_gamma_fredholm(kernel, &pair, grid)?;
    let r = r_pq(&pair);
    let comp = if grid.r_max > r {
        compensator(&pair, kernel, r, grid.r_max, grid)?
    } else {
        0.0
    };
    let kq = kernel.eval(q, q).re;
    let kp = kernel.eval(p, p).re;
    Ok(e_gamma * comp.exp() * kq / kp)
}

/// log prod_i |(z - p_i)/(z - q_i)|^2 + (kappa(p, z) - kappa(q, z)) — the
/// error of the compensator as a second-order expansion of the log-ratio;
/// decays like 1/|z|^3.
pub fn kappa_residual(pair: &TuplePair, z: Complex64) -> Result<f64> {
    let mut log_ratio = 0.0f64;
    for (&p, &q) in pair.p.iter().zip(&pair.q) {
        let dq = (z - q).norm();
        if dq <= POLE_TOL {
            return Err(Error::PoleProximity { re: z.re, im: z.im });
        }
        log_ratio += 2.0 * ((z - p).norm().ln() - dq.ln());
    }
    Ok(log_ratio + pair.kappa_diff(z)?)
}

/// The four terms splitting I(n, R) = tr T - (1/2) tr T^2 at an
/// intermediate radius r: an inner part (e1), two annular diagonal
/// integrals (e2 against the unreduced kernel, e3 against the reduction
/// difference), and the commutator term (e4 >= 0).
#[derive(Debug, Clone)]
pub struct RegularizationTerms {
    /// Inner-disk part of the second-order trace.
    pub e1: f64,
    /// Annular integral of (h - h^2/2 + kappa-difference) against the
    /// unreduced kernel diagonal.
    pub e2: f64,
    /// Annular integral of (h - h^2/2) against the Palm-reduction deficit
    /// of the diagonal.
    pub e3: f64,
    /// Quarter squared Hilbert-Schmidt norm of the commutator of the outer
    /// multiplier with the reduced kernel; nonnegative.
    pub e4: f64,
    /// Inner radius of the annulus.
    pub r: f64,
    /// Outer truncation radius.
    pub big_r: f64,
    /// Kernel order.
    pub n: usize,
}

impl RegularizationTerms {
    /// e1 + e2 + e3 + e4, which matches tr T - (1/2) tr T^2.
    pub fn sum(&self) -> f64 {
        self.e1 + self.e2 + self.e3 + self.e4
    }
}

/// [`RegularizationTerms`] together with the directly computed traces of T
/// and T^2, so the defining identity can be checked without recomputing the
/// discretized kernel.
#[derive(Debug, Clone)]
pub struct RegularizationReport {
    /// The four-way split.
    pub terms: RegularizationTerms,
    /// tr T.
    pub trace_t: f64,
    /// tr T^2.
    pub trace_t_sq: f64,
}

impl RegularizationReport {
    /// I(n, R) = tr T - (1/2) tr T^2, the quantity the four terms sum to.
    pub fn trace_target(&self) -> f64 {
        self.trace_t - 0.5 * self.trace_t_sq
    }
}

/// Computes the four-way split and the trace target in one pass over the
/// discretized q-reduced kernel.
///
/// Requires r_pq(pair) < r < R <= grid radius and n >= l. The heavy object
/// is the dense Palm matrix P; every sum is then a deterministic O(dim^2)
/// stream over its entries.
pub fn regularization_report(
    n: usize,
    big_r: f64,
    r: f64,
    kernel: &KernelModel,
    pair: &TuplePair,
    grid: &Arc<Grid>,
) -> Result<RegularizationReport> {
    assert_eq!(n, kernel.order(), "order argument must match the kernel");
    assert!(n >= pair.len(), "kernel order below tuple length");
    assert!(
        r > r_pq(pair) - 1e-12 && r < big_r,
        "need r_pq <= r < R (got r = {r}, R = {big_r})"
    );
    assert!(
        big_r <= grid.r_max + 1e-9,
        "grid must cover the outer radius"
    );
    let palm = kernel.palm(pair.q())?;
    let p_op = nystrom_plain(&palm, grid)?;
    let dim = p_op.dim();

    // Node-wise multiplier values and masks.
    let mut h = vec![0.0f64; dim];
    for (j, &z) in grid.nodes.iter().enumerate() {
        h[j] = h_func(pair, z)?;
    }
    let radius: Vec<f64> = grid.nodes.iter().map(|z| z.norm()).collect();
    let d: Vec<f64> = (0..dim)
        .map(|j| if radius[j] <= big_r { h[j] } else { 0.0 })
        .collect();
    let d0: Vec<f64> = (0..dim)
        .map(|j| if radius[j] <= r { h[j] } else { 0.0 })
        .collect();
    let d1: Vec<f64> = (0..dim)
        .map(|j| {
            if radius[j] > r && radius[j] <= big_r {
                h[j]
            } else {
                0.0
            }
        })
        .collect();

    // Column-parallel streams over |P_jk|^2; each column's partial sums are
    // summed in index order, so the reduction is deterministic.
    struct ColSums {
        dd: f64,
        d0d: f64,
        d1d0: f64,
        e4: f64,
    }
    let data = p_op.data();
    let cols: Vec<ColSums> = (0..dim)
        .into_par_iter()
        .map(|k| {
            let col = &data[k * dim..(k + 1) * dim];
            let mut t_d = 0.0;
            let mut t_d0 = 0.0;
            let mut t_d1 = 0.0;
            let mut e4 = 0.0;
            for j in 0..dim {
                let m = col[j].norm_sqr();
                t_d += d[j] * m;
                t_d0 += d0[j] * m;
                t_d1 += d1[j] * m;
                let diff = d1[j] - d1[k];
                e4 += diff * diff * m;
            }
            ColSums {
                dd: d[k] * t_d,
                d0d: d[k] * t_d0,
                d1d0: d0[k] * t_d1,
                e4,
            }
        })
        .collect();
    let mut s_dd = 0.0;
    let mut s_d0d = 0.0;
    let mut s_d1d0 = 0.0;
    let mut s_e4 = 0.0;
    for c in &cols {
        s_dd += c.dd;
        s_d0d += c.d0d;
        s_d1d0 += c.d1d0;
        s_e4 += c.e4;
    }
    let mut diag_d = 0.0;
    let mut diag_d0 = 0.0;
    for j in 0..dim {
        let pjj = p_op.at(j, j).re;
        diag_d += d[j] * pjj;
        diag_d0 += d0[j] * pjj;
    }

    // Annular diagonal integrals (e2 against the unreduced kernel, e3
    // against the reduction deficit).
    let mut e2 = 0.0;
    let mut e3 = 0.0;
    for j in 0..dim {
        if !(radius[j] > r && radius[j] <= big_r) {
            continue;
        }
        let z = grid.nodes[j];
        let w = grid.weights[j];
        let base_diag = kernel.checked_eval(z, z)?.re;
        let palm_diag = p_op.at(j, j).re / w;
        let factor = h[j] - 0.5 * h[j] * h[j];
        e2 += w * (factor + pair.kappa_diff(z)?) * base_diag;
        e3 += w * factor * (palm_diag - base_diag);
    }

    let terms = RegularizationTerms {
        e1: diag_d0 - 0.5 * s_d0d - 0.5 * s_d1d0,
        e2,
        e3,
        e4: 0.25 * s_e4,
        r,
        big_r,
        n,
    };
    Ok(RegularizationReport {
        terms,
        trace_t: diag_d,
        trace_t_sq: s_dd,
    })
}

/// The four-way split alone; see [`regularization_report`].
pub fn regularization_terms(
    n: usize,
    big_r: f64,
    r: f64,
    kernel: &KernelModel,
    pair: &TuplePair,
    grid: &Arc<Grid>,
) -> Result<RegularizationTerms> {
    Ok(regularization_report(n, big_r, r, kernel, pair, grid)?.terms)
}

/// The radial double integrals controlling the commutator term, at
/// finite order n and for the full kernel (truncated at the coefficient
/// count with a reported tail certificate).
#[derive(Debug, Clone)]
pub struct ClaimsValues {
    /// I_1(n, r): inner x outer mixed integral at order n.
    pub i1_n: f64,
    /// I_2(n, r): outer x outer integral at order n.
    pub i2_n: f64,
    /// I_1(r): full-kernel value, truncated from below at the coefficient
    /// count (every term is nonnegative, so the truncation only helps the
    /// comparison I_1(n) <= I_1).
    pub i1: f64,
    /// I_2(r): full-kernel value, truncated from below by dropping the
    /// upper boundary term and all regrouped summands beyond the
    /// coefficient count (each is nonnegative).
    pub i2: f64,
    /// The dropped boundary term 4 pi^2 a_{N-1}^4 U(N-1) U(N-2); the
    /// truncation is certified fine when this is <= 1/r^2.
    pub tail_certificate: f64,
    /// Truncation order N (the coefficient count).
    pub truncation_order: usize,
}

/// Computes I_1(n, r), I_2(n, r) and their full-kernel companions from the
/// coefficient list (length N >= n) by reducing the angular integrals to
/// incomplete radial moments:
///
/// ```text
/// I_1(n, r) = 4 pi^2 sum_{k<n} a_k^4 L(k) U(k-1),
/// I_2(n, r) = 4 pi^2 [ 2 sum_{k<n} a_k^4 U(k) U(k-1)
///                      - 2 sum_{k<n-1} a_k^2 a_{k+1}^2 U(k)^2 ],
/// ```
///
/// with L(k) the inner and U(m) the outer incomplete moments at radius r.
/// Products are grouped as (a^2 U)(a^2 U); each grouped factor is at most
/// 1/(2 pi) by the moment normalization, so nothing overflows.
pub fn i1_i2_radial(
    coeffs: &[f64],
    weight: &RadialWeight,
    n: usize,
    r: f64,
) -> Result<ClaimsValues> {
    let big_n = coeffs.len();
    assert!(n >= 1 && n <= big_n, "need 1 <= n <= coefficient count");
    assert!(r > 0.0, "split radius must be positive");
    let quad = QuadratureSpec::default();
    // u[i] = U(i - 1) = int_r^inf t^{2(i-1)+1} e^{-2 phi} dt for i = 0..=N,
    // l[k] = int_0^r t^{2k+1} e^{-2 phi} dt for k = 0..N-1.
    let mut u = Vec::with_capacity(big_n + 1);
    for i in 0..=big_n {
        let s = 2 * i as i32 - 1;
        u.push(weighted_power_integral(weight, s, r, None, &quad)?);
    }
    let mut l = Vec::with_capacity(big_n);
    for k in 0..big_n {
        l.push(weighted_power_integral(
            weight,
            2 * k as i32 + 1,
            0.0,
            Some(r),
            &quad,
        )?);
    }
    let four_pi_sq = 4.0 * std::f64::consts::PI.powi(2);
    // Grouped factors: bu[k] = a_k^2 U(k), bu_prev[k] = a_k^2 U(k-1),
    // bl[k] = a_k^2 L(k).
    let bu: Vec<f64> = (0..big_n).map(|k| coeffs[k] * u[k + 1]).collect();
    let bu_prev: Vec<f64> = (0..big_n).map(|k| coeffs[k] * u[k]).collect();
    let bl: Vec<f64> = (0..big_n).map(|k| coeffs[k] * l[k]).collect();

    let i1_sum = |order: usize| -> f64 {
        let mut s = 0.0;
        for k in 0..order {
            s += bl[k] * bu_prev[k];
        }
        four_pi_sq * s
    };
    let i2_at = |order: usize| -> f64 {
        let mut diag = 0.0;
        for k in 0..order {
            diag += bu[k] * bu_prev[k];
        }
        let mut cross = 0.0;
        for k in 0..order.saturating_sub(1) {
            cross += bu[k] * coeffs[k + 1] * u[k + 1];
        }
        four_pi_sq * (2.0 * diag - 2.0 * cross)
    };
    let boundary = four_pi_sq * bu[big_n - 1] * bu_prev[big_n - 1];
    Ok(ClaimsValues {
        i1_n: i1_sum(n),
        i2_n: i2_at(n),
        i1: i1_sum(big_n),
        // Full-kernel value truncated from below: drop the upper boundary
        // term of the regrouped sum (it is the tail certificate).
        i2: i2_at(big_n) - boundary,
        tail_certificate: boundary,
        truncation_order: big_n,
    })
}
