//! Independent oracles and fuzz helpers shared by the integration suites.
//! Everything here deliberately avoids the implementation paths it checks.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use fedsim_core::datagen::{gen_synthetic_pair, Dataset, SyntheticConfig};
use fedsim_core::probe::{init_model, Activation, ModelParams, ModelSpec};
use fedsim_core::rng::{rng_from_seed, SeededRng};

// ---------------------------------------------------------------------------
// Exact optimal transport by successive-shortest-path min-cost flow over
// integer masses. Exact for the transportation LP, so it lower-bounds any
// feasible (in particular any converged Sinkhorn) plan's cost.
// ---------------------------------------------------------------------------

struct Arc {
    to: usize,
    rev: usize,
    cap: i64,
    cost: f64,
}

struct FlowGraph {
    arcs: Vec<Vec<Arc>>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        Self { arcs: (0..n).map(|_| Vec::new()).collect() }
    }

    fn add(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        let rev_from = self.arcs[to].len();
        let rev_to = self.arcs[from].len();
        self.arcs[from].push(Arc { to, rev: rev_from, cap, cost });
        self.arcs[to].push(Arc { to: from, rev: rev_to, cap: 0, cost: -cost });
    }

    /// Bellman-Ford based successive shortest paths; returns total cost of a
    /// max flow from s to t.
    fn min_cost_max_flow(&mut self, s: usize, t: usize) -> f64 {
        let n = self.arcs.len();
        let mut total_cost = 0.0;
        loop {
            let mut dist = vec![f64::INFINITY; n];
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
            dist[s] = 0.0;
            // Plain relaxation passes; graphs here are tiny.
            for _ in 0..n {
                let mut changed = false;
                for u in 0..n {
                    if !dist[u].is_finite() {
                        continue;
                    }
                    for (k, arc) in self.arcs[u].iter().enumerate() {
                        if arc.cap > 0 && dist[u] + arc.cost < dist[arc.to] - 1e-15 {
                            dist[arc.to] = dist[u] + arc.cost;
                            prev[arc.to] = Some((u, k));
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if !dist[t].is_finite() {
                return total_cost;
            }
            // Bottleneck along the path.
            let mut bottleneck = i64::MAX;
            let mut v = t;
            while let Some((u, k)) = prev[v] {
                bottleneck = bottleneck.min(self.arcs[u][k].cap);
                v = u;
            }
            let mut v = t;
            while let Some((u, k)) = prev[v] {
                let rev = self.arcs[u][k].rev;
                self.arcs[u][k].cap -= bottleneck;
                self.arcs[v][rev].cap += bottleneck;
                total_cost += self.arcs[u][k].cost * bottleneck as f64;
                v = u;
            }
        }
    }
}

/// Exact OT cost for integer source/sink masses under `cost`, normalized so
/// the marginals are probability vectors.
pub fn exact_ot_cost(cost: &Array2<f64>, supply: &[i64], demand: &[i64]) -> f64 {
    let (n, m) = cost.dim();
    assert_eq!(supply.len(), n);
    assert_eq!(demand.len(), m);
    let total: i64 = supply.iter().sum();
    assert_eq!(total, demand.iter().sum::<i64>(), "unbalanced masses");

    let src = n + m;
    let sink = n + m + 1;
    let mut g = FlowGraph::new(n + m + 2);
    for (i, &s) in supply.iter().enumerate() {
        g.add(src, i, s, 0.0);
    }
    for (j, &d) in demand.iter().enumerate() {
        g.add(n + j, sink, d, 0.0);
    }
    for i in 0..n {
        for j in 0..m {
            g.add(i, n + j, total, cost[[i, j]]);
        }
    }
    g.min_cost_max_flow(src, sink) / total as f64
}

/// Brute-force assignment oracle for the unit-mass square case; used to
/// cross-check the flow oracle itself.
pub fn exact_assignment_cost(cost: &Array2<f64>) -> f64 {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols());
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, cost, &mut best);
    best / n as f64
}

fn permute(perm: &mut Vec<usize>, k: usize, cost: &Array2<f64>, best: &mut f64) {
    let n = perm.len();
    if k == n {
        let total: f64 = (0..n).map(|i| cost[[i, perm[i]]]).sum();
        if total < *best {
            *best = total;
        }
        return;
    }
    for i in k..n {
        perm.swap(k, i);
        permute(perm, k + 1, cost, best);
        perm.swap(k, i);
    }
}

// ---------------------------------------------------------------------------
// Hellinger by quadrature: H^2 = 1 - integral of sqrt(p * q).
// ---------------------------------------------------------------------------

/// Numeric Hellinger distance between two 1-D Gaussians via Simpson's rule.
pub fn hellinger_quadrature_1d(mu_a: f64, var_a: f64, mu_b: f64, var_b: f64) -> f64 {
    let sd = var_a.max(var_b).sqrt();
    let lo = mu_a.min(mu_b) - 14.0 * sd;
    let hi = mu_a.max(mu_b) + 14.0 * sd;
    let steps = 40_000usize; // even
    let h = (hi - lo) / steps as f64;
    let pdf = |x: f64, mu: f64, var: f64| {
        (-((x - mu) * (x - mu)) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    };
    let f = |x: f64| (pdf(x, mu_a, var_a) * pdf(x, mu_b, var_b)).sqrt();
    let mut sum = f(lo) + f(hi);
    for k in 1..steps {
        let x = lo + h * k as f64;
        sum += f(x) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let bc = sum * h / 3.0;
    (1.0 - bc).clamp(0.0, 1.0).sqrt()
}

/// Numeric Hellinger distance between two 2-D Gaussians (full covariance)
/// on a tensor Simpson grid.
pub fn hellinger_quadrature_2d(
    mu_a: &[f64; 2],
    cov_a: &[[f64; 2]; 2],
    mu_b: &[f64; 2],
    cov_b: &[[f64; 2]; 2],
) -> f64 {
    let density = |x: f64, y: f64, mu: &[f64; 2], cov: &[[f64; 2]; 2]| {
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        let inv = [
            [cov[1][1] / det, -cov[0][1] / det],
            [-cov[1][0] / det, cov[0][0] / det],
        ];
        let dx = x - mu[0];
        let dy = y - mu[1];
        let q = dx * dx * inv[0][0] + 2.0 * dx * dy * inv[0][1] + dy * dy * inv[1][1];
        (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
    };
    let spread = cov_a[0][0]
        .max(cov_a[1][1])
        .max(cov_b[0][0])
        .max(cov_b[1][1])
        .sqrt();
    let lo_x = mu_a[0].min(mu_b[0]) - 12.0 * spread;
    let hi_x = mu_a[0].max(mu_b[0]) + 12.0 * spread;
    let lo_y = mu_a[1].min(mu_b[1]) - 12.0 * spread;
    let hi_y = mu_a[1].max(mu_b[1]) + 12.0 * spread;
    let steps = 1200usize; // even
    let hx = (hi_x - lo_x) / steps as f64;
    let hy = (hi_y - lo_y) / steps as f64;
    let weight = |k: usize| {
        if k == 0 || k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut sum = 0.0;
    for i in 0..=steps {
        let x = lo_x + hx * i as f64;
        let mut row = 0.0;
        for j in 0..=steps {
            let y = lo_y + hy * j as f64;
            row += weight(j) * (density(x, y, mu_a, cov_a) * density(x, y, mu_b, cov_b)).sqrt();
        }
        sum += weight(i) * row;
    }
    let bc = sum * hx * hy / 9.0;
    (1.0 - bc).clamp(0.0, 1.0).sqrt()
}

// ---------------------------------------------------------------------------
// Fuzzing helpers.
// ---------------------------------------------------------------------------

/// A random (dataset pair, model) instance at fuzz scale.
pub fn fuzz_instance(seed: u64) -> (Dataset, Dataset, ModelParams) {
    let mut rng = rng_from_seed(seed ^ 0xf00d_2200);
    let dim = rng.random_range(4..=12);
    let classes = rng.random_range(2..=4usize);
    let cfg = SyntheticConfig {
        dim,
        classes,
        samples_per_client: rng.random_range(60..=140),
        overlap: rng.random_range(0.0..=1.0),
        mean_separation: rng.random_range(1.0..6.0),
        cov_scale: rng.random_range(0.5..2.0),
        seed: rng.random(),
    };
    let (a, b) = gen_synthetic_pair(&cfg).expect("fuzz config valid");
    let hidden = vec![rng.random_range(8..=24), rng.random_range(4..=10)];
    let spec = ModelSpec {
        input: dim,
        hidden,
        classes,
        activation: Activation::Tanh,
        seed: rng.random(),
    };
    let model = init_model(&spec).expect("fuzz spec valid");
    (a, b, model)
}

/// Uniformly random point on the unit sphere in `d` dimensions.
pub fn random_unit(d: usize, rng: &mut SeededRng) -> Array1<f64> {
    loop {
        let v = Array1::from_iter((0..d).map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z
        }));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-9 {
            return v / norm;
        }
    }
}

/// Random probability vector via normalized exponentials.
pub fn random_simplex(k: usize, rng: &mut SeededRng) -> Array1<f64> {
    let mut v = Array1::from_iter((0..k).map(|_| -f64::ln(rng.random_range(1e-12..1.0))));
    let sum = v.sum();
    v.mapv_inplace(|x| x / sum);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
