//! Log-domain Sinkhorn solver for entropically regularized optimal
//! transport, plus the unnormalized Wasserstein baseline.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::probe::ActivationSet;

/// An entropic transport plan with its transport cost and solver diagnostics.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub plan: Array2<f64>,
    pub row_marginal: Array1<f64>,
    pub col_marginal: Array1<f64>,
    /// Transport term `<plan, C>` only; no entropy contribution, so the
    /// cost stays within the bounds of the cost matrix.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final l1 violation of the row marginals.
    pub marginal_violation: f64,
}

const MARGINAL_SUM_TOL: f64 = 1e-9;

fn logsumexp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Uniform marginal over `n` atoms.
pub fn uniform_marginal(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

/// Solve entropic OT by alternating log-domain potential updates until the
/// row-marginal l1 violation drops below `tol` or `max_iter` is reached.
/// Column marginals are exact after every column update.
pub fn sinkhorn(
    cost: &Array2<f64>,
    a: &Array1<f64>,
    b: &Array1<f64>,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<TransportPlan> {
    let (n, m) = cost.dim();
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("sinkhorn needs a nonempty cost matrix".into()));
    }
    if a.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "marginals ({}, {}) vs cost {}x{}",
            a.len(),
            b.len(),
            n,
            m
        )));
    }
    if epsilon <= 0.0 {
        return Err(Error::InvalidInput(format!("epsilon must be > 0, got {epsilon}")));
    }
    if tol <= 0.0 || max_iter == 0 {
        return Err(Error::InvalidInput("tolerance and max_iter must be positive".into()));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost matrix".into()));
    }
    for (name, marg) in [("row", a), ("column", b)] {
        if marg.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "{name} marginal must be strictly positive"
            )));
        }
        let sum: f64 = marg.sum();
        if (sum - 1.0).abs() > MARGINAL_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "{name} marginal sums to {sum}, expected 1"
            )));
        }
    }

    let log_a = a.mapv(f64::ln);
    let log_b = b.mapv(f64::ln);
    let mut f = Array1::<f64>::zeros(n);
    let mut g = Array1::<f64>::zeros(m);

    let update = |f: &mut Array1<f64>, g: &mut Array1<f64>, eps: f64| {
        for i in 0..n {
            let lse = logsumexp((0..m).map(|j| (g[j] - cost[[i, j]]) / eps));
            f[i] = eps * (log_a[i] - lse);
        }
        for j in 0..m {
            let lse = logsumexp((0..n).map(|i| (f[i] - cost[[i, j]]) / eps));
            g[j] = eps * (log_b[j] - lse);
        }
    };

    // Warm start by annealing the regularization down to the target; the
    // fixed point at the target epsilon is unchanged, it is just reached in
    // far fewer iterations than from cold potentials.
    let max_cost = cost.iter().fold(0.0f64, |acc, &c| acc.max(c.abs()));
    let mut eps_stage = max_cost / 2.0;
    while eps_stage > epsilon {
        for _ in 0..5 {
            update(&mut f, &mut g, eps_stage);
        }
        eps_stage /= 2.0;
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;

    while iterations < max_iter {
        // Row log-sums under the current g; also yields the row marginals of
        // the implicit plan, so each convergence check is free.
        let mut row_violation = 0.0;
        let mut s = Array1::<f64>::zeros(n);
        for i in 0..n {
            let lse = logsumexp((0..m).map(|j| (g[j] - cost[[i, j]]) / epsilon));
            s[i] = lse;
            let row_sum = (f[i] / epsilon + lse).exp();
            row_violation += (row_sum - a[i]).abs();
        }
        violation = row_violation;
        if row_violation < tol {
            converged = true;
            break;
        }

        for i in 0..n {
            f[i] = epsilon * (log_a[i] - s[i]);
        }
        for j in 0..m {
            let lse = logsumexp((0..n).map(|i| (f[i] - cost[[i, j]]) / epsilon));
            g[j] = epsilon * (log_b[j] - lse);
        }
        iterations += 1;
    }

    let mut plan = Array2::<f64>::zeros((n, m));
    let mut transport_cost = 0.0;
    for i in 0..n {
        for j in 0..m {
            let p = ((f[i] + g[j] - cost[[i, j]]) / epsilon).exp();
            plan[[i, j]] = p;
            transport_cost += p * cost[[i, j]];
        }
    }

    Ok(TransportPlan {
        plan,
        row_marginal: a.clone(),
        col_marginal: b.clone(),
        cost: transport_cost,
        iterations,
        converged,
        marginal_violation: violation,
    })
}

/// Entropic transport cost between two activation sets under squared
/// Euclidean ground cost, with no class structure and no normalization.
///
/// `epsilon_scale` is relative to the largest ground cost, so the returned
/// value scales with the activations (the point of the baseline).
pub fn wasserstein_baseline(
    h_a: &ActivationSet,
    h_b: &ActivationSet,
    epsilon_scale: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if h_a.dim() != h_b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "activation dims {} vs {}",
            h_a.dim(),
            h_b.dim()
        )));
    }
    if epsilon_scale <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "epsilon_scale must be > 0, got {epsilon_scale}"
        )));
    }
    let (n, m) = (h_a.n(), h_b.n());
    let mut cost = Array2::<f64>::zeros((n, m));
    let mut max_cost: f64 = 0.0;
    for i in 0..n {
        let ra = h_a.activations.row(i);
        for j in 0..m {
            let rb = h_b.activations.row(j);
            let sq: f64 = ra
                .iter()
                .zip(rb.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            cost[[i, j]] = sq;
            max_cost = max_cost.max(sq);
        }
    }
    if max_cost == 0.0 {
        return Ok(0.0);
    }
    let plan = sinkhorn(
        &cost,
        &uniform_marginal(n),
        &uniform_marginal(m),
        epsilon_scale * max_cost,
        tol,
        max_iter,
    )?;
    Ok(plan.cost)
}
