//! Reproducing kernels, their truncations, and Palm reductions.
//!
//! For a radial weight the monomials z^k are orthogonal in
//! L^2(e^{-2 phi} dlambda), and the reproducing kernel of the span of the
//! first n of them is
//!
//! ```text
//! Pi_n(z, w) = sum_{k < n} a_k^2 (z conj(w))^k,      a_k^2 = 1 / ||z^k||^2.
//! ```
//!
//! The full (infinite-rank) kernel is represented by a high truncation with
//! a tail-mass diagnostic; for the Ginibre weight the full kernel has the
//! closed form (2/pi) e^{2 z conj(w)}, which the truncation must reproduce
//! on the working disk.
//!
//! Palm reduction conditions the process on carrying a point at q and
//! removes it; at the kernel level this is the rank-one update
//!
//! ```text
//! K^q(z, w) = K(z, w) - K(z, q) K(q, w) / K(q, q),
//! ```
//!
//! iterated over a tuple of distinct points. [`PalmedKernel`] memoizes the
//! chain of intermediate diagonals and cross-values so one evaluation costs
//! O(l^2) kernel calls instead of expanding the l-fold formula symbolically.

use crate::error::{Error, Result};
use crate::weights::{moment_coefficients, QuadratureSpec, RadialWeight};
use num_complex::Complex64;

/// A Hermitian reproducing kernel together with its reference weight.
///
/// Implementations are immutable and evaluation is pure, so values can be
/// shared freely across threads.
pub trait Kernel: Send + Sync {
    /// K(z, w). Hermitian: eval(z, w) = conj(eval(w, z)).
    fn eval(&self, z: Complex64, w: Complex64) -> Complex64;

    /// Truncation order n of the underlying polynomial space.
    fn order(&self) -> usize;

    /// Number of conditioning points already removed (0 for a bare kernel).
    fn conditioning_count(&self) -> usize {
        0
    }

    /// Effective rank n - l of the kernel as a projection.
    fn rank(&self) -> usize {
        self.order() - self.conditioning_count()
    }

    /// The radial weight whose measure the kernel reproduces against.
    fn weight(&self) -> &RadialWeight;

    /// `eval` with a finiteness check, signalling [`Error::Overflow`] when
    /// the Horner sum leaves the representable range instead of saturating.
    fn checked_eval(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let v = self.eval(z, w);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow(format!(
                "kernel evaluation overflowed at z = {z}, w = {w}"
            )))
        }
    }
}

/// The truncated kernel Pi_n(z, w) = sum_{k<n} a_k^2 (z conj(w))^k.
#[derive(Debug, Clone)]
pub struct KernelModel {
    weight: RadialWeight,
    coeffs: Vec<f64>,
    /// a_n^2, one past the truncation — drives the tail-mass diagnostic.
    tail_coeff: Option<f64>,
}

impl KernelModel {
    /// Builds Pi_n for `weight` by computing the moment coefficients
    /// a_k^2 = 1/||z^k||^2 with the adaptive radial quadrature (plus one
    /// extra coefficient for the tail diagnostic).
    pub fn new(weight: RadialWeight, n: usize, quad: &QuadratureSpec) -> Result<Self> {
        assert!(n >= 1, "kernel order must be positive");
        let mut coeffs = moment_coefficients(&weight, n + 1, quad)?;
        let tail = coeffs.pop();
        Ok(Self {
            weight,
            coeffs,
            tail_coeff: tail,
        })
    }

    /// Builds Pi_n from externally supplied coefficients (oracle or cached
    /// routes). No tail diagnostic is available on this path.
    pub fn from_coefficients(weight: RadialWeight, coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "kernel order must be positive");
        assert!(
            coeffs.iter().all(|&c| c.is_finite() && c > 0.0),
            "coefficients must be positive and finite"
        );
        Self {
            weight,
            coeffs,
            tail_coeff: None,
        }
    }

    /// The coefficients a_k^2, k = 0..n-1.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Ratio of the first omitted term to the retained sum on the diagonal
    /// at radius `r`: a_n^2 r^{2n} / Pi_n(r, r). The truncation is a faithful
    /// surrogate of the full kernel on a disk when this is < 1e-12 there.
    /// `None` when the extra coefficient was not computed.
    pub fn tail_diagnostic(&self, r: f64) -> Option<f64> {
        let tail = self.tail_coeff?;
        let n = self.coeffs.len() as f64;
        let z = Complex64::new(r, 0.0);
        let retained = self.eval(z, z).re;
        // log-space to survive large n or r
        let log_term = tail.ln() + 2.0 * n * r.ln();
        Some((log_term - retained.ln()).exp())
    }

    /// Palm-reduces by the tuple `points` (empty tuple allowed).
    pub fn palm(&self, points: &[Complex64]) -> Result<PalmedKernel> {
        PalmedKernel::new(self.clone(), points)
    }
}

impl Kernel for KernelModel {
    fn eval(&self, z: Complex64, w: Complex64) -> Complex64 {
        let u = z * w.conj();
        let mut acc = Complex64::new(self.coeffs[self.coeffs.len() - 1], 0.0);
        for &c in self.coeffs[..self.coeffs.len() - 1].iter().rev() {
            acc = acc * u + c;
        }
        acc
    }

    fn order(&self) -> usize {
        self.coeffs.len()
    }

    fn weight(&self) -> &RadialWeight {
        &self.weight
    }
}

/// A kernel conditioned on carrying particles at a tuple of distinct points,
/// with those particles removed: the iterated rank-one reduction of a base
/// [`KernelModel`].
///
/// An empty tuple reduces exactly to the base kernel.
#[derive(Debug, Clone)]
pub struct PalmedKernel {
    base: KernelModel,
    points: Vec<Complex64>,
    /// diag[t] = K^{(t)}(q_t, q_t) where K^{(t)} is the kernel after t
    /// reductions; strictly positive by construction.
    diag: Vec<f64>,
    /// cross[t][i - t - 1] = K^{(t)}(q_t, q_i) for i > t.
    cross: Vec<Vec<Complex64>>,
}

impl PalmedKernel {
    /// Reduces `base` by each point of the tuple in order. Points must be
    /// pairwise distinct (separation > 1e-12) and each intermediate diagonal
    /// must stay above 1e-14 of the base diagonal, otherwise the tuple is
    /// degenerate for this kernel.
    pub fn new(base: KernelModel, points: &[Complex64]) -> Result<Self> {
        let l = points.len();
        assert!(
            l <= base.order(),
            "cannot condition on more points than the kernel order"
        );
        for i in 0..l {
            for j in 0..i {
                if (points[i] - points[j]).norm() <= 1e-12 {
                    return Err(Error::DegenerateCondition {
                        re: points[i].re,
                        im: points[i].im,
                        diag: 0.0,
                    });
                }
            }
        }
        // Schur-complement sweep over the Gram matrix of the tuple.
        let mut m = vec![vec![Complex64::ZERO; l]; l];
        for i in 0..l {
            for j in 0..l {
                m[i][j] = base.eval(points[i], points[j]);
            }
        }
        let mut diag = Vec::with_capacity(l);
        let mut cross = Vec::with_capacity(l);
        for t in 0..l {
            let scale = base.eval(points[t], points[t]).re;
            let dt = m[t][t].re;
            if !(dt > 1e-14 * scale) {
                return Err(Error::DegenerateCondition {
                    re: points[t].re,
                    im: points[t].im,
                    diag: dt,
                });
            }
            diag.push(dt);
            cross.push(m[t][t + 1..].to_vec());
            for i in t + 1..l {
                for j in t + 1..l {
                    let update = m[i][t] * m[t][j] / dt;
                    m[i][j] -= update;
                }
            }
        }
        Ok(Self {
            base,
            points: points.to_vec(),
            diag,
            cross,
        })
    }

    /// Adds one more conditioning point, reducing this kernel further.
    pub fn extend(&self, q: Complex64) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.push(q);
        Self::new(self.base.clone(), &pts)
    }

    /// The conditioning tuple.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// The unreduced kernel.
    pub fn base(&self) -> &KernelModel {
        &self.base
    }
}

impl Kernel for PalmedKernel {
    fn eval(&self, z: Complex64, w: Complex64) -> Complex64 {
        let l = self.points.len();
        let mut v = self.base.eval(z, w);
        if l == 0 {
            return v;
        }
        let mut a: Vec<Complex64> = self.points.iter().map(|&q| self.base.eval(z, q)).collect();
        let mut b: Vec<Complex64> = self.points.iter().map(|&q| self.base.eval(q, w)).collect();
        for t in 0..l {
            let dt = self.diag[t];
            v -= a[t] * b[t] / dt;
            for i in t + 1..l {
                let mti = self.cross[t][i - t - 1];
                let (at, bt) = (a[t], b[t]);
                a[i] -= at * mti / dt;
                b[i] -= mti.conj() * bt / dt;
            }
        }
        v
    }

    fn order(&self) -> usize {
        self.base.order()
    }

    fn conditioning_count(&self) -> usize {
        self.points.len()
    }

    fn weight(&self) -> &RadialWeight {
        self.base.weight()
    }
}

/// Palm-reduces any kernel by one further point, returning the memoized
/// chain form.
pub fn palm_reduce(kernel: &PalmedKernel, q: Complex64) -> Result<PalmedKernel> {
    kernel.extend(q)
}

/// sup over grid nodes of K(z, z) e^{-2 phi(|z|)} — the weighted diagonal
/// (Christ) supremum. Finite for any finite grid.
pub fn christ_sup<K: Kernel + ?Sized>(kernel: &K, grid: &crate::quadrature::Grid) -> f64 {
    let w = kernel.weight();
    grid.nodes
        .iter()
        .map(|&z| kernel.eval(z, z).re * w.density(z))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Convenience: the truncated-kernel trace integrand checker used by the
/// integrability diagnostic — 2 pi r^{-3} Pi_n(r, r) e^{-2 phi(r)} r,
/// integrated over [r0, big_r] with a fixed rule.
pub fn inverse_cube_diagonal_integral(
    kernel: &KernelModel,
    r0: f64,
    big_r: f64,
    nodes: usize,
) -> f64 {
    assert!(r0 > 0.0 && big_r > r0);
    let w = kernel.weight();
    let f = |r: f64| {
        let z = Complex64::new(r, 0.0);
        2.0 * std::f64::consts::PI * kernel.eval(z, z).re * w.density(z) / (r * r)
    };
    crate::gauss::integrate_fixed(&f, r0, big_r, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::ginibre_closed_coefficients;
    use approx::assert_relative_eq;
    use rand::Rng;
    use std::f64::consts::PI;

    fn ginibre_kernel(n: usize) -> KernelModel {
        KernelModel::from_coefficients(RadialWeight::ginibre(), ginibre_closed_coefficients(n))
    }

    fn random_points(count: usize, radius: f64, seed: u64) -> Vec<Complex64> {
        let mut rng = crate::rng::derived_stream(seed, "kernel-tests", 0);
        (0..count)
            .map(|_| {
                Complex64::new(
                    rng.random_range(-radius..radius),
                    rng.random_range(-radius..radius),
                )
            })
            .collect()
    }

    #[test]
    fn eval_examples() {
        let k = ginibre_kernel(12);
        // Only k = 0 survives at the origin.
        assert_relative_eq!(
            k.eval(Complex64::ZERO, Complex64::ZERO).re,
            2.0 / PI,
            max_relative = 1e-14
        );
        // Full-kernel closed form (2/pi) e^{2 z conj(w)} at z = w = 1.
        let k40 = ginibre_kernel(40);
        let one = Complex64::new(1.0, 0.0);
        assert_relative_eq!(
            k40.eval(one, one).re,
            (2.0 / PI) * 2.0f64.exp(),
            max_relative = 1e-10
        );
        // z = 1, w = i: exponent 2 z conj(w) = -2i.
        let got = k40.eval(one, Complex64::new(0.0, 1.0));
        let want = Complex64::new(0.0, -2.0).exp() * (2.0 / PI);
        assert!((got - want).norm() <= 1e-10 * want.norm());
    }

    #[test]
    fn quadrature_coefficients_match_closed_form_route() {
        let k = KernelModel::new(RadialWeight::ginibre(), 8, &QuadratureSpec::default()).unwrap();
        let exact = ginibre_closed_coefficients(8);
        for (a, b) in k.coefficients().iter().zip(&exact) {
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn hermitian_symmetry() {
        let k = ginibre_kernel(20);
        for pair in random_points(40, 2.0, 1).chunks(2) {
            let (z, w) = (pair[0], pair[1]);
            let fwd = k.eval(z, w);
            let bwd = k.eval(w, z).conj();
            assert!((fwd - bwd).norm() <= 1e-13 * fwd.norm().max(1.0));
        }
    }

    #[test]
    fn diagonal_monotone_in_order() {
        let pts = random_points(10, 2.0, 2);
        for n in 1..12usize {
            let a = ginibre_kernel(n);
            let b = ginibre_kernel(n + 1);
            for &z in &pts {
                assert!(a.eval(z, z).re <= b.eval(z, z).re + 1e-14);
            }
        }
    }

    #[test]
    fn overflow_is_signalled() {
        let k = ginibre_kernel(60);
        let z = Complex64::new(1e4, 0.0);
        assert!(matches!(
            k.checked_eval(z, z),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn tail_diagnostic_small_on_working_disk() {
        let k = KernelModel::new(RadialWeight::ginibre(), 60, &QuadratureSpec::default()).unwrap();
        let tail = k.tail_diagnostic(2.0).unwrap();
        assert!(tail < 1e-12, "tail ratio {tail}");
        assert!(KernelModel::from_coefficients(
            RadialWeight::ginibre(),
            ginibre_closed_coefficients(4)
        )
        .tail_diagnostic(1.0)
        .is_none());
    }

    #[test]
    fn palm_at_origin_subtracts_constant() {
        // base(z, 0) = a_0^2 for every z, so the reduction term is exactly
        // a_0^2 = 2/pi independent of the pair.
        let k = ginibre_kernel(10);
        let p = k.palm(&[Complex64::ZERO]).unwrap();
        for pair in random_points(20, 1.5, 3).chunks(2) {
            let (z, w) = (pair[0], pair[1]);
            let got = p.eval(z, w);
            let want = k.eval(z, w) - 2.0 / PI;
            assert!((got - want).norm() <= 1e-13);
        }
    }

    #[test]
    fn palm_vanishes_at_conditioning_points() {
        let k = ginibre_kernel(12);
        let q = vec![Complex64::new(0.4, -0.3), Complex64::new(-0.7, 0.2)];
        let p = k.palm(&q).unwrap();
        let scale = k.eval(q[0], q[0]).re;
        for &qi in &q {
            for &w in &random_points(10, 2.0, 4) {
                assert!(p.eval(qi, w).norm() <= 1e-12 * scale);
                assert!(p.eval(w, qi).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn empty_tuple_is_identity() {
        let k = ginibre_kernel(9);
        let p = k.palm(&[]).unwrap();
        for pair in random_points(40, 2.0, 5).chunks(2) {
            assert_eq!(p.eval(pair[0], pair[1]), k.eval(pair[0], pair[1]));
        }
        assert_eq!(p.rank(), 9);
    }

    #[test]
    fn reduction_order_independent() {
        let k = ginibre_kernel(12);
        let (q1, q2) = (Complex64::new(0.5, 0.1), Complex64::new(-0.2, 0.6));
        let a = k.palm(&[q1, q2]).unwrap();
        let b = k.palm(&[q2, q1]).unwrap();
        for pair in random_points(40, 2.0, 6).chunks(2) {
            let (z, w) = (pair[0], pair[1]);
            let (va, vb) = (a.eval(z, w), b.eval(z, w));
            assert!((va - vb).norm() <= 1e-10 * va.norm().max(1.0));
        }
    }

    #[test]
    fn palm_diagonal_below_base_diagonal() {
        let k = ginibre_kernel(10);
        let p = k
            .palm(&[Complex64::new(0.3, 0.3), Complex64::new(-0.5, 0.0)])
            .unwrap();
        for &z in &random_points(20, 2.0, 7) {
            assert!(p.eval(z, z).re <= k.eval(z, z).re + 1e-13);
        }
    }

    #[test]
    fn degenerate_tuples_rejected() {
        let k = ginibre_kernel(8);
        let q = Complex64::new(0.4, 0.4);
        // Coincident points.
        assert!(matches!(
            k.palm(&[q, q]),
            Err(Error::DegenerateCondition { .. })
        ));
        // Reducing twice by (numerically) the same point: the second
        // diagonal is the vanished reduced diagonal.
        let once = k.palm(&[q]).unwrap();
        assert!(matches!(
            once.extend(q + Complex64::new(2e-13, 0.0)),
            Err(Error::DegenerateCondition { .. })
        ));
    }

    #[test]
    fn gram_matrices_positive_semidefinite() {
        // Min eigenvalue of the weighted Gram matrix >= -1e-10 * max
        // eigenvalue, certified through a shifted Cholesky factorization.
        let k = ginibre_kernel(14);
        let pts = random_points(24, 2.0, 8);
        let n = pts.len();
        let w = k.weight();
        let mut g = faer::Mat::<faer::c64>::zeros(n, n);
        let mut max_diag = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let v = k.eval(pts[i], pts[j])
                    * (w.density(pts[i]) * w.density(pts[j])).sqrt();
                g[(i, j)] = faer::c64::new(v.re, v.im);
            }
            max_diag = max_diag.max(g[(i, i)].re);
        }
        for i in 0..n {
            g[(i, i)] += faer::c64::new(1e-10 * max_diag, 0.0);
        }
        assert!(
            g.llt(faer::Side::Lower).is_ok(),
            "shifted Gram matrix not positive definite"
        );
    }

    #[test]
    fn inverse_cube_diagonal_integral_bounded_in_r() {
        // The weighted diagonal is bounded, so the r^{-3} radial integral
        // converges; extending the upper limit must not grow the value.
        let k = ginibre_kernel(30);
        let base = inverse_cube_diagonal_integral(&k, 1.0, 10.0, 512);
        let mid = inverse_cube_diagonal_integral(&k, 1.0, 20.0, 1024);
        let far = inverse_cube_diagonal_integral(&k, 1.0, 50.0, 2048);
        assert!(base.is_finite() && mid.is_finite() && far.is_finite());
        assert!(mid >= base - 1e-12 && far >= mid - 1e-12);
        assert!((far - mid).abs() < 1e-10, "integral kept growing: {mid} -> {far}");
    }

    #[test]
    fn christ_sup_flat_for_ginibre() {
        let k = ginibre_kernel(60);
        let grid = crate::quadrature::build_polar_grid(k.weight(), 3.0, 48, 48).unwrap();
        let sup = christ_sup(&k, &grid);
        assert_relative_eq!(sup, 2.0 / PI, max_relative = 0.01);
        // Single-term kernel: the sup is a_0^2 * max density = 2/pi near 0.
        let k1 = ginibre_kernel(1);
        let sup1 = christ_sup(&k1, &grid);
        assert!(sup1 <= 2.0 / PI + 1e-12);
        assert_relative_eq!(sup1, (2.0 / PI) * (-2.0 * grid.nodes[0].norm_sqr()).exp(), max_relative = 1e-9);
        // Palm reduction only lowers the diagonal.
        let p = k.palm(&[Complex64::new(0.5, 0.0)]).unwrap();
        assert!(christ_sup(&p, &grid) <= sup + 1e-12);
    }
}
