//! Accuracy measures for approximate modes: per-mode angles, principal
//! angles between spans, and an a-posteriori residual bound on the sines of
//! those angles that needs no exact reference.
//!
//! All angles are in degrees.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PodError, Result};
use crate::matcore::{qr_parts, svd_parts, DenseMatrix, TruncatedFactor};
use crate::par;

fn check_pair(exact: &TruncatedFactor, approx: &TruncatedFactor, k: usize) -> Result<()> {
    if exact.rows() != approx.rows() {
        return Err(PodError::shape(format!(
            "factors have {} and {} rows",
            exact.rows(),
            approx.rows()
        )));
    }
    if k == 0 || k > exact.rank() || k > approx.rank() {
        return Err(PodError::param(format!(
            "k = {k} needs both factors to have at least k modes (have {} and {})",
            exact.rank(),
            approx.rank()
        )));
    }
    Ok(())
}

/// Angle between the lines spanned by `x` and `y`, in degrees.
///
/// Computed as `atan2(‖x̂ − (x̂·ŷ)ŷ‖, |x̂·ŷ|)` on the normalized vectors, which
/// equals `arccos|x̂·ŷ|` but keeps full precision for tiny angles.
fn line_angle_deg(x: nalgebra::DVectorView<'_, f64>, y: nalgebra::DVectorView<'_, f64>) -> f64 {
    let (nx, ny) = (x.norm(), y.norm());
    if nx == 0.0 || ny == 0.0 {
        return 90.0;
    }
    let (xh, yh) = (x / nx, y / ny);
    let c = xh.dot(&yh);
    let s = (&xh - &yh * c).norm();
    s.atan2(c.abs()).to_degrees()
}

/// Angles `θᵢ` between matching modes `i = 1..k`, sign-invariant.
pub fn mode_angles(exact: &TruncatedFactor, approx: &TruncatedFactor, k: usize) -> Result<Vec<f64>> {
    check_pair(exact, approx, k)?;
    Ok((0..k)
        .map(|i| line_angle_deg(exact.u().column(i), approx.u().column(i)))
        .collect())
}

/// Orthonormal basis of the span of the first `k` columns.
fn basis(u: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    qr_parts(&u.columns(0, k).into_owned()).0
}

/// Principal angles between the spans of the leading `k` modes, ascending.
///
/// Both inputs are re-orthonormalized first, so approximately orthonormal
/// factors are accepted. Angles below 45° come from the sines (singular
/// values of `B − A·AᵀB`), the rest from the cosines (singular values of
/// `AᵀB`).
pub fn principal_angles(exact: &TruncatedFactor, approx: &TruncatedFactor, k: usize) -> Result<Vec<f64>> {
    check_pair(exact, approx, k)?;
    subspace_angles(exact.u(), approx.u(), k)
}

/// Principal angles between the spans of the first `k` columns of `a` and `b`.
pub fn subspace_angles(a: &DMatrix<f64>, b: &DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() || k > a.ncols() || k > b.ncols() {
        return Err(PodError::shape("incompatible bases for principal angles"));
    }
    let (qa, qb) = (basis(a, k), basis(b, k));
    let cross = qa.tr_mul(&qb);
    let (_, cos, _) = svd_parts(&cross)?;
    let (_, sin, _) = svd_parts(&(&qb - &qa * &cross))?;
    // cosines descend and sines ascend along the same ordering of angles
    let sines: Vec<f64> = sin.iter().rev().copied().collect();
    Ok((0..k)
        .map(|i| {
            let c = cos[i].clamp(0.0, 1.0);
            if c * c > 0.5 {
                sines[i].clamp(0.0, 1.0).asin().to_degrees()
            } else {
                c.acos().to_degrees()
            }
        })
        .collect())
}

/// Residual-based bound on the sines of the angles between approximate and
/// exact singular subspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedinReport {
    /// `‖AṼ_k − Ũ_kΣ̃_k‖_F`.
    pub r_norm: f64,
    /// `‖AᵀŨ_k − Ṽ_kΣ̃_k‖_F`.
    pub s_norm: f64,
    /// `min(|σ̃_k − σ̃_{k+1}|, σ̃_k)`.
    pub omega_hat: f64,
    /// `√(r_norm² + s_norm²)/ω̂`; `+∞` (written as `null`) when degenerate.
    #[serde(with = "nonfinite_as_null")]
    pub measure: f64,
    /// `√(2k)`: the measure of a factor with no information.
    pub ceiling: f64,
    /// `ω̂ ≤ 1e-14·σ̃₁`: the gap is too small for the bound to mean anything.
    pub degenerate: bool,
}

impl WedinReport {
    /// Suggestion shown to users when the gap estimate vanishes.
    pub fn advisory(&self) -> Option<&'static str> {
        self.degenerate.then_some(
            "sigma_k and sigma_k+1 are numerically equal; increase k by one or two and rerun",
        )
    }
}

mod nonfinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Evaluates the residual bound for the leading `k` modes of `factor`.
///
/// `factor` must carry `v` and at least `k + 1` singular values.
pub fn wedin_measure(a: &DenseMatrix, factor: &TruncatedFactor, k: usize) -> Result<WedinReport> {
    let v = factor
        .v()
        .ok_or_else(|| PodError::param("the residual bound needs right singular vectors"))?;
    if k == 0 || factor.rank() < k + 1 {
        return Err(PodError::param(format!(
            "the residual bound for k = {k} needs {} singular values, factor has {}",
            k + 1,
            factor.rank()
        )));
    }
    if factor.rows() != a.rows() || v.nrows() != a.cols() {
        return Err(PodError::shape("factor does not match the matrix"));
    }
    let sigma = factor.sigma();
    let uk = factor.u().columns(0, k).into_owned();
    let vk = v.columns(0, k).into_owned();
    let mut us = uk.clone();
    let mut vs = vk.clone();
    for j in 0..k {
        us.column_mut(j).scale_mut(sigma[j]);
        vs.column_mut(j).scale_mut(sigma[j]);
    }
    let r_norm = (par::mul(a.as_mat(), &vk) - us).norm();
    let s_norm = (par::tr_mul(a.as_mat(), &uk) - vs).norm();
    let omega_hat = (sigma[k - 1] - sigma[k]).abs().min(sigma[k - 1]);
    let degenerate = omega_hat <= 1e-14 * sigma[0];
    let measure = if degenerate {
        f64::INFINITY
    } else {
        (r_norm * r_norm + s_norm * s_norm).sqrt() / omega_hat
    };
    Ok(WedinReport {
        r_norm,
        s_norm,
        omega_hat,
        measure,
        ceiling: (2.0 * k as f64).sqrt(),
        degenerate,
    })
}

#[cfg(test)]
pub(crate) mod oracle {
    /// Gap using every true singular value: `min(min_j |σ̃_k − σ_{k+j}|, σ̃_k)`.
    pub fn exact_omega(sigma_tilde_k: f64, true_sigma: &[f64], k: usize) -> f64 {
        true_sigma[k..]
            .iter()
            .map(|s| (sigma_tilde_k - s).abs())
            .fold(sigma_tilde_k, f64::min)
    }
}
