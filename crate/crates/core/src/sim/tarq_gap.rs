use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{error_covariance, plant_covariance_after_control, SystemModel};

/// Expected difference between the plant-state second moments obtained with
/// and without truncated retransmission:
/// `(ε - εⁿ)(AΘAᵀ - AΦ_{k+n}Aᵀ) + (1 - εⁿ)(A^{n+1} - A²)Φ_k(A^{n+1} - A²)ᵀ`.
pub fn tarq_gap_analytic(
    model: &SystemModel,
    theta: &DMatrix<f64>,
    phi_kn: &DMatrix<f64>,
    phi_k: &DMatrix<f64>,
    eps_c: f64,
    n: u32,
) -> Result<DMatrix<f64>> {
    if n < 1 {
        return Err(Error::Argument("retransmission budget n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&eps_c) {
        return Err(Error::Argument(format!("eps_c must lie in [0,1], got {eps_c}")));
    }
    let m = model.state_dim();
    for (name, mat) in [("Theta", theta), ("Phi_k+n", phi_kn), ("Phi_k", phi_k)] {
        if mat.nrows() != m || mat.ncols() != m {
            return Err(Error::Dimension(format!("{name} must be {m}x{m}")));
        }
    }
    let a = model.a();
    let eps_n = eps_c.powi(n as i32);
    let a2 = a * a;
    let an1 = a.pow(n + 1);
    let gap = &an1 - &a2;
    let first = (a * theta * a.transpose() - a * phi_kn * a.transpose()) * (eps_c - eps_n);
    let second = &gap * phi_k * gap.transpose() * (1.0 - eps_n);
    Ok(first + second)
}

/// The gap evaluated with `Θ = Θ(Δ+n)`, `Φ_{k+n} = Φ(Δ+n)`, `Φ_k = Φ(Δ)`.
pub fn tarq_gap_at(model: &SystemModel, delta: u32, n: u32, eps_c: f64) -> Result<DMatrix<f64>> {
    let theta = error_covariance(model, delta + n)?;
    let phi_kn = plant_covariance_after_control(model, delta + n)?;
    let phi_k = plant_covariance_after_control(model, delta)?;
    tarq_gap_analytic(model, &theta, &phi_kn, &phi_k, eps_c, n)
}
