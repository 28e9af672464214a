//! The c-optimality criterion `c' M(xi)^- c`, i.e. the linearized variance of
//! `g(theta_hat)` per observation, plus a grid-search oracle over two-point
//! designs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::model::{
    c_vector, fim_design, CVector, DesignSpace, InfoMatrix, ModelParams, TimeThreshold,
};

/// Below `DET_FLOOR * trace^2` the information matrix is treated as rank one.
pub const DET_FLOOR: f64 = 1e-14;
/// `c` is estimable when `||(I - M M^+) c|| < ESTIMABILITY_TOL * ||c||`.
pub const ESTIMABILITY_TOL: f64 = 1e-9;

/// `c' M^- c`, using the closed-form inverse when `M` is well conditioned and
/// the Moore-Penrose inverse otherwise.
pub fn criterion_value(m: &InfoMatrix, c: CVector) -> Result<f64> {
    let cv = c.as_array();
    let tr = m.trace();
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::Inestimable);
    }
    let det = m.det();
    if det > DET_FLOOR * tr * tr {
        let inv = m.inverse().ok_or(Error::Inestimable)?;
        return Ok(inv.quad_form(cv));
    }
    // Rank one: M^+ = u u' / lambda_max.
    let [_, lambda] = m.eigenvalues();
    let u = m.leading_eigenvector();
    let proj = u[0] * cv[0] + u[1] * cv[1];
    let resid = (cv[0] - proj * u[0]).hypot(cv[1] - proj * u[1]);
    if resid >= ESTIMABILITY_TOL * c.norm() {
        return Err(Error::Inestimable);
    }
    Ok(proj * proj / lambda)
}

/// Linearized per-observation variance of `g(theta_hat)` under `design`.
pub fn c_variance(design: &Design, theta: &ModelParams, t0: TimeThreshold) -> Result<f64> {
    let c = c_vector(theta, t0)?;
    let m = fim_design(design, theta)?;
    criterion_value(&m, c)
}

/// `c_variance(num) / c_variance(den)`, both at `theta`. At most one when
/// `num` is c-optimal at `theta`.
pub fn efficiency(
    design_num: &Design,
    design_den: &Design,
    theta: &ModelParams,
    t0: TimeThreshold,
) -> Result<f64> {
    let num = c_variance(design_num, theta, t0)?;
    let den = c_variance(design_den, theta, t0)?;
    Ok(num / den)
}

/// Candidate support values and weights for [`brute_force_best`].
///
/// Every unordered pair of support values is combined with every weight `w`
/// as `{phi_i: 1 - w, phi_j: w}` (with `phi_i < phi_j` by index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceGrid {
    pub phi: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BruteForceGrid {
    /// `n_phi` equispaced values on `[a, b]` including both ends and the
    /// interior weights `k / (n_weights + 1)`.
    pub fn equispaced(space: &DesignSpace, n_phi: usize, n_weights: usize) -> Self {
        let (a, b) = (space.a(), space.b());
        let phi = (0..n_phi)
            .map(|k| {
                if k + 1 == n_phi {
                    b
                } else {
                    a + (b - a) * k as f64 / (n_phi - 1) as f64
                }
            })
            .collect();
        BruteForceGrid {
            phi,
            weights: interior_weights(n_weights),
        }
    }

    /// `n_phi` equispaced values strictly inside `(a, b)`.
    pub fn interior(space: &DesignSpace, n_phi: usize, n_weights: usize) -> Self {
        let (a, b) = (space.a(), space.b());
        let phi = (1..=n_phi)
            .map(|k| a + (b - a) * k as f64 / (n_phi + 1) as f64)
            .collect();
        BruteForceGrid {
            phi,
            weights: interior_weights(n_weights),
        }
    }

    /// Halves both spacings; the refined grid contains every point of an
    /// [`BruteForceGrid::equispaced`] grid of the given sizes.
    pub fn refined(space: &DesignSpace, n_phi: usize, n_weights: usize) -> Self {
        Self::equispaced(space, 2 * n_phi - 1, 2 * n_weights + 1)
    }
}

fn interior_weights(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}

/// Best two-point design on the grid. Ties go to the lowest support pair
/// and then the lowest weight index, independent of evaluation order.
pub fn brute_force_best(
    theta: &ModelParams,
    space: &DesignSpace,
    t0: TimeThreshold,
    grid: &BruteForceGrid,
) -> Result<(Design, f64)> {
    theta.validate_on(space)?;
    if let Some(p) = grid.phi.iter().find(|p| !space.contains(**p)) {
        return Err(Error::InvalidDesign(format!(
            "grid value {p} outside the design space"
        )));
    }
    let c = c_vector(theta, t0)?;
    let info = grid
        .phi
        .iter()
        .map(|&phi| crate::model::fim_point(phi, theta))
        .collect::<Result<Vec<_>>>()?;
    let n = grid.phi.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();

    let best = pairs
        .par_iter()
        .enumerate()
        .filter_map(|(pair_idx, &(i, j))| {
            let mut best: Option<(f64, usize, usize)> = None;
            for (w_idx, &w) in grid.weights.iter().enumerate() {
                let mut m = info[i].scaled(1.0 - w);
                m.add_scaled(w, &info[j]);
                if let Ok(v) = criterion_value(&m, c) {
                    if best.is_none_or(|(bv, _, _)| v < bv) {
                        best = Some((v, pair_idx, w_idx));
                    }
                }
            }
            best
        })
        .reduce_with(|x, y| {
            if x.0 < y.0 || (x.0 == y.0 && (x.1, x.2) <= (y.1, y.2)) {
                x
            } else {
                y
            }
        });

    let (value, pair_idx, w_idx) = best.ok_or(Error::Inestimable)?;
    let (i, j) = pairs[pair_idx];
    let design = Design::two_point(grid.phi[i], grid.phi[j], grid.weights[w_idx])?;
    Ok((design, value))
}
