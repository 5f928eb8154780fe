//! Executable check of the same-class gradient-dissimilarity bound.
//!
//! For unit activations `z_c`, `z_k` and softmax outputs `p_a`, `p_b` with a
//! shared target class `y`, the Frobenius norm of the difference between the
//! two final-layer gradient contributions is bounded by
//! `||p_a - e_y|| * ||z_c - z_k|| + ||p_a - p_b||`.

use ndarray::Array1;

use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-6;
const SIMPLEX_TOL: f64 = 1e-9;

fn check_unit(name: &str, z: &Array1<f64>) -> Result<()> {
    let norm = z.dot(z).sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidInput(format!(
            "{name} must have unit l2 norm, got {norm}"
        )));
    }
    Ok(())
}

fn check_simplex(name: &str, p: &Array1<f64>) -> Result<()> {
    if p.iter().any(|&v| v < -SIMPLEX_TOL) {
        return Err(Error::InvalidInput(format!("{name} has negative entries")));
    }
    let sum: f64 = p.sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "{name} must sum to 1, got {sum}"
        )));
    }
    Ok(())
}

/// Evaluate both sides of the bound; the contract is `lhs <= rhs + 1e-9`.
pub fn check_gradient_bound(
    z_c: &Array1<f64>,
    z_k: &Array1<f64>,
    p_a: &Array1<f64>,
    p_b: &Array1<f64>,
    y: usize,
) -> Result<(f64, f64)> {
    if z_c.len() != z_k.len() {
        return Err(Error::DimensionMismatch(format!(
            "activation dims {} vs {}",
            z_c.len(),
            z_k.len()
        )));
    }
    if p_a.len() != p_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "probability dims {} vs {}",
            p_a.len(),
            p_b.len()
        )));
    }
    if y >= p_a.len() {
        return Err(Error::InvalidInput(format!(
            "class {y} out of range for {} classes",
            p_a.len()
        )));
    }
    check_unit("z_c", z_c)?;
    check_unit("z_k", z_k)?;
    check_simplex("p_a", p_a)?;
    check_simplex("p_b", p_b)?;

    let k = p_a.len();
    let mut e_y = Array1::zeros(k);
    e_y[y] = 1.0;

    let qa = p_a - &e_y;
    let qb = p_b - &e_y;

    // lhs = || qa z_c^T - qb z_k^T ||_F
    let mut frob_sq = 0.0;
    for i in 0..k {
        for j in 0..z_c.len() {
            let v = qa[i] * z_c[j] - qb[i] * z_k[j];
            frob_sq += v * v;
        }
    }
    let lhs = frob_sq.sqrt();

    let z_diff = z_c - z_k;
    let p_diff = p_a - p_b;
    let rhs = qa.dot(&qa).sqrt() * z_diff.dot(&z_diff).sqrt() + p_diff.dot(&p_diff).sqrt();
    Ok((lhs, rhs))
}
