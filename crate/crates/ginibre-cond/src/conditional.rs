//! Conditional structure: the law of the points inside a window given the
//! configuration outside it.
//!
//! For a disk window containing the origin and a configuration E outside
//! it, the interior points follow a determinantal-ensemble density with the
//! modified weight W_E(z) e^{-2 phi(|z|)}, where
//!
//! ```text
//! W_E(z) = prod_{x in E} |1 - z/x|^2
//! ```
//!
//! is the exterior interaction normalized at the origin (which is why the
//! origin must lie inside the window). The identity
//! |z - x|^2 = |x|^2 |1 - z/x|^2 makes the joint density factor into a
//! function of the exterior alone times this conditional form — a statement
//! that can be checked exactly, configuration by configuration, and
//! statistically against histograms of exact samples.

use crate::ensembles::{ope_log_density, DiscreteSampler};
use crate::error::{Error, Result};
use crate::quadrature::Grid;
use crate::rng::derived_stream;
use crate::weights::RadialWeight;
use num_complex::Complex64;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::sync::Arc;

/// A disk window. Conditional quantities require the origin strictly
/// inside (the exterior products are normalized there).
#[derive(Debug, Clone, Copy)]
pub struct Window {
    /// Disk center.
    pub center: Complex64,
    /// Disk radius (positive).
    pub radius: f64,
}

impl Window {
    /// A disk window; the radius must be positive.
    pub fn disk(center: Complex64, radius: f64) -> Self {
        assert!(radius > 0.0, "window radius must be positive");
        Self { center, radius }
    }

    /// Whether z lies strictly inside the window.
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }

    fn validate(&self, exterior: &[Complex64]) -> Result<()> {
        if self.center.norm() >= self.radius {
            return Err(Error::OriginNotInWindow {
                re: self.center.re,
                im: self.center.im,
                radius: self.radius,
            });
        }
        for &x in exterior {
            if self.contains(x) {
                return Err(Error::ExteriorPointInsideWindow { re: x.re, im: x.im });
            }
        }
        Ok(())
    }
}

/// log W_E(z) = sum_{x in E} 2 log|1 - z/x|; the log of the
/// origin-normalized exterior interaction.
pub fn log_exterior_weight(
    window: &Window,
    exterior: &[Complex64],
    z: Complex64,
) -> Result<f64> {
    window.validate(exterior)?;
    let mut s = 0.0;
    for &x in exterior {
        // x != 0 because the origin is inside the window and x is outside.
        s += 2.0 * (Complex64::new(1.0, 0.0) - z / x).norm().ln();
    }
    Ok(s)
}

/// W_E(z) = prod_{x in E} |1 - z/x|^2. Equals 1 at z = 0.
pub fn exterior_weight(window: &Window, exterior: &[Complex64], z: Complex64) -> Result<f64> {
    Ok(log_exterior_weight(window, exterior, z)?.exp())
}

/// Unnormalized log density of the interior points given the exterior:
/// pairwise repulsion plus, per point, the log exterior weight and the
/// radial weight. Interior points must lie inside the window.
pub fn conditional_log_density(
    weight: &RadialWeight,
    window: &Window,
    exterior: &[Complex64],
    interior: &[Complex64],
) -> Result<f64> {
    window.validate(exterior)?;
    let mut s = 0.0;
    for (i, &z) in interior.iter().enumerate() {
        assert!(
            window.contains(z),
            "interior point ({}, {}) lies outside the window",
            z.re,
            z.im
        );
        for &other in &interior[..i] {
            s += 2.0 * (z - other).norm().ln();
        }
        s += log_exterior_weight(window, exterior, z)?;
        s -= 2.0 * weight.phi(z.norm());
    }
    Ok(s)
}

/// Exact factorization check: for the fixed exterior of `config` and
/// `trials` random replacements of its interior tuple, the difference of
/// joint log densities must match the difference of conditional log
/// densities. Returns the largest absolute gap (zero up to rounding when
/// the factorization holds).
///
/// Replacement tuples are drawn uniformly in the window from the derived
/// streams ("perturb", t) of `master_seed`.
pub fn conditional_factorization_check(
    weight: &RadialWeight,
    window: &Window,
    config: &[Complex64],
    master_seed: u64,
    trials: usize,
) -> Result<f64> {
    let interior: Vec<Complex64> = config.iter().copied().filter(|&z| window.contains(z)).collect();
    let exterior: Vec<Complex64> = config
        .iter()
        .copied()
        .filter(|&z| !window.contains(z))
        .collect();
    window.validate(&exterior)?;
    assert!(
        !interior.is_empty(),
        "factorization check needs at least one interior point"
    );
    let k = interior.len();
    let joint = |inner: &[Complex64]| -> f64 {
        let mut full = exterior.clone();
        full.extend_from_slice(inner);
        ope_log_density(weight, &[], &full)
    };
    let base_joint = joint(&interior);
    let base_cond = conditional_log_density(weight, window, &exterior, &interior)?;
    let mut worst = 0.0f64;
    for t in 0..trials {
        let mut rng = derived_stream(master_seed, "perturb", t as u64);
        let alt: Vec<Complex64> = (0..k)
            .map(|_| {
                let r = window.radius * rng.random::<f64>().sqrt();
                let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                window.center + Complex64::from_polar(r, theta)
            })
            .collect();
        let lhs = base_joint - joint(&alt);
        let rhs = base_cond - conditional_log_density(weight, window, &exterior, &alt)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Outcome of the conditional histogram test.
#[derive(Debug, Clone)]
pub struct ConditionalHistogram {
    /// Right-tail p-value of the chi-square statistic.
    pub p_value: f64,
    /// The chi-square statistic over the merged cells.
    pub statistic: f64,
    /// Number of samples that contributed (exactly one interior point).
    pub hits: usize,
    /// Number of merged cells (degrees of freedom + 1).
    pub cells: usize,
}

/// Histogram test of the conditional law: draws `samples` configurations
/// of the order-n ensemble on `grid`, keeps those with exactly one point
/// inside `window`, and compares the observed cell of that point (8 x 8
/// cells over the window's bounding square) with the cell masses predicted
/// from each sample's own exterior through the conditional density. Cells
/// are merged until every expected count is at least 5; the statistic is
/// referred to the chi-square distribution.
///
/// With `null_model` set, predictions ignore the exterior interaction
/// (W = 1); the test is then expected to reject.
///
/// Needs at least 500 contributing samples, otherwise
/// [`Error::InsufficientSamples`].
pub fn conditional_histogram_test(
    weight: &RadialWeight,
    n: usize,
    window: &Window,
    grid: &Arc<Grid>,
    master_seed: u64,
    samples: usize,
    null_model: bool,
) -> Result<ConditionalHistogram> {
    window.validate(&[])?;
    let sampler = DiscreteSampler::new(weight, n, &[], grid)?;

    // Interior nodes and their cells.
    let mut interior_nodes: Vec<usize> = Vec::new();
    for (j, &z) in grid.nodes.iter().enumerate() {
        if window.contains(z) {
            interior_nodes.push(j);
        }
    }
    if interior_nodes.len() < 64 {
        return Err(Error::GridTooCoarse(format!(
            "only {} grid nodes inside the window",
            interior_nodes.len()
        )));
    }
    let cell_of = |z: Complex64| -> usize {
        let side = 2.0 * window.radius;
        let fx = ((z.re - (window.center.re - window.radius)) / side * 8.0).clamp(0.0, 7.999);
        let fy = ((z.im - (window.center.im - window.radius)) / side * 8.0).clamp(0.0, 7.999);
        (fx as usize) * 8 + fy as usize
    };

    let mut observed = [0.0f64; 64];
    let mut expected = [0.0f64; 64];
    let mut hits = 0usize;
    for s in 0..samples {
        let mut rng = derived_stream(master_seed, "sampler", s as u64);
        let pts = sampler.sample(&mut rng);
        let inside: Vec<Complex64> = pts.iter().copied().filter(|&z| window.contains(z)).collect();
        if inside.len() != 1 {
            continue;
        }
        hits += 1;
        observed[cell_of(inside[0])] += 1.0;
        let exterior: Vec<Complex64> =
            pts.iter().copied().filter(|&z| !window.contains(z)).collect();
        // Predicted cell masses from this sample's exterior.
        let mut cell_mass = [0.0f64; 64];
        let mut total = 0.0;
        for &j in &interior_nodes {
            let z = grid.nodes[j];
            let mut lw = 0.0;
            if !null_model {
                for &x in &exterior {
                    lw += 2.0 * (Complex64::new(1.0, 0.0) - z / x).norm().ln();
                }
            }
            let mass = grid.weights[j] * lw.exp();
            cell_mass[cell_of(z)] += mass;
            total += mass;
        }
        for (e, m) in expected.iter_mut().zip(cell_mass) {
            *e += m / total;
        }
    }
    if hits < 500 {
        return Err(Error::InsufficientSamples {
            hits,
            required: 500,
        });
    }

    // Merge cells (in index order) until each merged bin expects >= 5.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0f64, 0.0f64);
    for c in 0..64 {
        acc.0 += observed[c];
        acc.1 += expected[c];
        if acc.1 >= 5.0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 {
        if let Some(last) = bins.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        } else {
            bins.push(acc);
        }
    }
    if bins.len() < 2 {
        return Err(Error::InsufficientSamples {
            hits,
            required: 500,
        });
    }
    let statistic: f64 = bins.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let df = (bins.len() - 1) as f64;
    let p_value = 1.0 - ChiSquared::new(df).unwrap().cdf(statistic);
    Ok(ConditionalHistogram {
        p_value,
        statistic,
        hits,
        cells: bins.len(),
    })
}
