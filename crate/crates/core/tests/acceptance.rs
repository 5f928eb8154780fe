//! Acceptance suite: every release criterion runs at its pinned tolerance
//! and prints one pass/fail line. Run with `--nocapture` to see the lines:
//!
//! ```text
//! cargo test -p fedsim-core --test acceptance -- --nocapture
//! ```

mod common;

use std::time::Instant;

use ndarray::Array2;
use rand::Rng;

use fedsim_core::datagen::SyntheticConfig;
use fedsim_core::harness::stats::spearman;
use fedsim_core::harness::{run_experiment, ExperimentConfig, RunRow, Scenario};
use fedsim_core::metric::{
    class_stats, hellinger_gaussian, pairwise_ot_similarity, sinkhorn, uniform_marginal,
    ClassStats, MetricConfig,
};
use fedsim_core::privacy::{
    add_dp_noise_stats, check_privacy_budget, noise_sigmas, normalized_gram, secure_dot_product,
    svd_reconstruction_attack, symmetric_gaussian_noise, private_pairwise_similarity,
    PrivacyBudget,
};
use fedsim_core::probe::{check_gradient_bound, extract_activations, run_probe_round, Activation,
    ModelSpec, TrainOpts};
use fedsim_core::rng::{derive_seed, rng_from_seed};

use common::*;

fn criterion(id: u32, name: &str, body: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    match outcome {
        Ok(detail) => {
            println!("acceptance {id:02} {name}: PASS [{elapsed:.1?}] {detail}");
        }
        Err(msg) => {
            println!("acceptance {id:02} {name}: FAIL [{elapsed:.1?}] {msg}");
            panic!("criterion {id} ({name}) failed: {msg}");
        }
    }
}

fn fuzz_metric_cfg() -> MetricConfig {
    MetricConfig {
        min_class_samples: 5,
        ..MetricConfig::default()
    }
}

/// The desk-scale configuration all training-based criteria share: hard
/// enough that accuracy does not saturate, sampled heavily enough that
/// held-out evaluation noise stays small.
fn desk_config(scenario: Scenario, seeds: Vec<u64>, levels: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        scenario,
        datagen: SyntheticConfig {
            dim: 16,
            classes: 4,
            samples_per_client: 1600,
            overlap: 0.5,
            mean_separation: 3.0,
            cov_scale: 1.0,
            seed: 0,
        },
        model: ModelSpec {
            input: 16,
            hidden: vec![32, 16],
            classes: 4,
            activation: Activation::Tanh,
            seed: 0,
        },
        train: TrainOpts {
            learning_rate: 0.05,
            batch_size: 64,
            epochs: 1,
            prox_mu: 0.0,
            seed: 0,
        },
        metric: MetricConfig::default(),
        privacy: None,
        rounds: 12,
        seeds,
        levels,
        output_dir: None,
        mu_grid: Vec::new(),
        subsample_levels: Vec::new(),
        eval_train_frac: 0.5,
    }
}

fn rows_at<'a>(rows: &'a [RunRow], level: f64) -> Vec<&'a RunRow> {
    rows.iter().filter(|r| r.level == level).collect()
}

#[test]
fn criterion_01_boundedness_and_symmetry() {
    criterion(1, "boundedness_symmetry", || {
        let cfg = fuzz_metric_cfg();
        let mut max_asym: f64 = 0.0;
        for trial in 0..200u64 {
            let (a, b, model) = fuzz_instance(trial);
            let ab = pairwise_ot_similarity(&a, &b, &model, &cfg)
                .map_err(|e| format!("trial {trial}: {e}"))?;
            let ba = pairwise_ot_similarity(&b, &a, &model, &cfg)
                .map_err(|e| format!("trial {trial} reversed: {e}"))?;
            for (tag, s) in [("AB", ab.s_tilde), ("BA", ba.s_tilde)] {
                if !(0.0..=1.0).contains(&s) || !s.is_finite() {
                    return Err(format!("trial {trial}: s_{tag} = {s} out of [0,1]"));
                }
            }
            let asym = (ab.s_tilde - ba.s_tilde).abs();
            max_asym = max_asym.max(asym);
            if asym > 0.01 {
                return Err(format!(
                    "trial {trial}: |s_AB - s_BA| = {asym} exceeds 0.01"
                ));
            }
        }
        Ok(format!("200 fuzzed pairs in [0,1], max asymmetry {max_asym:.2e}"))
    });
}

#[test]
fn criterion_02_self_similarity() {
    criterion(2, "self_similarity", || {
        let cfg = fuzz_metric_cfg();
        let mut worst: f64 = 0.0;
        for trial in 0..20u64 {
            let (a, _, model) = fuzz_instance(1000 + trial);
            let report = pairwise_ot_similarity(&a, &a, &model, &cfg)
                .map_err(|e| format!("trial {trial}: {e}"))?;
            worst = worst.max(report.s_tilde);
            if report.s_tilde > 0.05 {
                return Err(format!(
                    "trial {trial}: self-cost {} exceeds 0.05",
                    report.s_tilde
                ));
            }
        }
        Ok(format!("20 fuzzed datasets, worst self-cost {worst:.4}"))
    });
}

#[test]
fn criterion_03_threshold_reproduction() {
    criterion(3, "threshold_reproduction", || {
        let cfg = desk_config(
            Scenario::OverlapSweep,
            vec![0, 1, 2, 3, 4],
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
        );
        let result = run_experiment(&cfg).map_err(|e| e.to_string())?;
        if result.failed_rows() > 0 {
            let first = result.rows.iter().find_map(|r| r.error.clone());
            return Err(format!("{} failed rows; first: {first:?}", result.failed_rows()));
        }

        // (a) Same-mixture pairs: s <= 0.1 and FedAvg at least matches local.
        for row in rows_at(&result.rows, 1.0) {
            let s = row.s_tilde.unwrap();
            if s > 0.1 {
                return Err(format!("seed {}: same-mixture s {} > 0.1", row.seed, s));
            }
            if row.fedavg_accuracy.unwrap() < row.local_accuracy.unwrap() {
                return Err(format!(
                    "seed {}: same-mixture fedavg {} < local {}",
                    row.seed,
                    row.fedavg_accuracy.unwrap(),
                    row.local_accuracy.unwrap()
                ));
            }
        }
        // (b) Disjoint-mixture pairs: s >= 0.3 and FedAvg strictly worse.
        for row in rows_at(&result.rows, 0.0) {
            let s = row.s_tilde.unwrap();
            if s < 0.3 {
                return Err(format!("seed {}: disjoint s {} < 0.3", row.seed, s));
            }
            if row.fedavg_accuracy.unwrap() >= row.local_accuracy.unwrap() {
                return Err(format!(
                    "seed {}: disjoint fedavg {} >= local {}",
                    row.seed,
                    row.fedavg_accuracy.unwrap(),
                    row.local_accuracy.unwrap()
                ));
            }
        }
        // (c) Negative rank correlation between cost and improvement.
        let rho = result
            .aggregates
            .spearman_s_vs_improvement
            .ok_or("no correlation computed")?;
        if rho > -0.6 {
            return Err(format!("Spearman(s, improvement) = {rho:.3} > -0.6"));
        }

        // Overlap monotonicity per seed, allowing one small inversion.
        for &seed in &cfg.seeds {
            let mut by_level: Vec<(f64, f64)> = result
                .rows
                .iter()
                .filter(|r| r.seed == seed)
                .map(|r| (r.level, r.s_tilde.unwrap()))
                .collect();
            by_level.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut inversions = 0;
            for w in by_level.windows(2) {
                let rise = w[1].1 - w[0].1;
                if rise > 0.0 {
                    inversions += 1;
                    if rise > 0.02 {
                        return Err(format!(
                            "seed {seed}: s rose by {rise:.3} from overlap {} to {}",
                            w[0].0, w[1].0
                        ));
                    }
                }
            }
            if inversions > 1 {
                return Err(format!("seed {seed}: {inversions} monotonicity inversions"));
            }
        }

        let mean_at = |level: f64| {
            mean(&rows_at(&result.rows, level)
                .iter()
                .map(|r| r.s_tilde.unwrap())
                .collect::<Vec<_>>())
        };
        Ok(format!(
            "mean s: overlap 1.0 -> {:.3}, 0.0 -> {:.3}; Spearman(s, improvement) = {rho:.3}",
            mean_at(1.0),
            mean_at(0.0)
        ))
    });
}

#[test]
fn criterion_04_sinkhorn_oracle_equivalence() {
    criterion(4, "sinkhorn_vs_exact_ot", || {
        let mut rng = rng_from_seed(404);
        let mut max_gap: f64 = 0.0;
        for trial in 0..100 {
            let n = rng.random_range(2..=6);
            let m = rng.random_range(2..=6);
            let cost = Array2::from_shape_fn((n, m), |_| rng.random_range(0.1..1.0));
            let supply: Vec<i64> = (0..n).map(|_| rng.random_range(1..=4)).collect();
            let total: i64 = supply.iter().sum();
            // Random demand composition of the same total.
            let mut demand = vec![1i64; m];
            let mut rest = total - m as i64;
            assert!(rest >= 0 || total >= m as i64, "m exceeds total");
            while rest > 0 {
                let j = rng.random_range(0..m);
                demand[j] += 1;
                rest -= 1;
            }

            let exact = exact_ot_cost(&cost, &supply, &demand);
            let a = ndarray::Array1::from_iter(supply.iter().map(|&s| s as f64 / total as f64));
            let b = ndarray::Array1::from_iter(demand.iter().map(|&d| d as f64 / total as f64));
            let plan = sinkhorn(&cost, &a, &b, 1e-3, 1e-12, 500_000)
                .map_err(|e| format!("trial {trial}: {e}"))?;
            if !plan.converged {
                return Err(format!(
                    "trial {trial}: solver did not converge (violation {})",
                    plan.marginal_violation
                ));
            }
            if plan.cost < exact - 1e-9 {
                return Err(format!(
                    "trial {trial}: entropic cost {} undercuts exact {}",
                    plan.cost, exact
                ));
            }
            let gap = (plan.cost - exact) / exact;
            max_gap = max_gap.max(gap);
            if gap > 0.05 {
                return Err(format!(
                    "trial {trial}: relative gap {gap:.4} exceeds 5% (exact {exact}, entropic {})",
                    plan.cost
                ));
            }
        }

        // Cross-check the flow oracle against brute-force assignment.
        for trial in 0..20 {
            let n = rng.random_range(2..=6);
            let cost = Array2::from_shape_fn((n, n), |_| rng.random_range(0.1..1.0));
            let unit = vec![1i64; n];
            let flow = exact_ot_cost(&cost, &unit, &unit);
            let brute = exact_assignment_cost(&cost);
            if (flow - brute).abs() > 1e-9 {
                return Err(format!(
                    "oracle self-check {trial}: flow {flow} vs brute-force {brute}"
                ));
            }
        }
        Ok(format!("100 instances, max relative gap {max_gap:.4}"))
    });
}

#[test]
fn criterion_05_hellinger_oracle() {
    criterion(5, "hellinger_quadrature", || {
        // The standard pair: N(0,1) vs N(1,1).
        let expected = (1.0 - (-0.125f64).exp()).sqrt();
        let make_1d = |mu: f64, var: f64| ClassStats {
            class: 0,
            mean: ndarray::array![mu],
            cov: ndarray::array![[var]],
            count: 10,
            noised: false,
        };
        let closed = hellinger_gaussian(&make_1d(0.0, 1.0), &make_1d(1.0, 1.0))
            .map_err(|e| e.to_string())?;
        if (closed - expected).abs() > 1e-9 {
            return Err(format!("standard pair: closed form {closed} vs sqrt(1-e^-1/8) {expected}"));
        }

        let mut rng = rng_from_seed(505);
        let mut max_err: f64 = 0.0;
        for trial in 0..25 {
            let (mu_a, var_a) = (rng.random_range(-2.0..2.0), rng.random_range(0.5..2.0));
            let (mu_b, var_b) = (rng.random_range(-2.0..2.0), rng.random_range(0.5..2.0));
            let numeric = hellinger_quadrature_1d(mu_a, var_a, mu_b, var_b);
            let closed = hellinger_gaussian(&make_1d(mu_a, var_a), &make_1d(mu_b, var_b))
                .map_err(|e| e.to_string())?;
            let err = (closed - numeric).abs();
            max_err = max_err.max(err);
            if err > 1e-6 {
                return Err(format!(
                    "1d trial {trial}: closed {closed} vs quadrature {numeric} (err {err:.2e})"
                ));
            }
        }

        for trial in 0..25 {
            let rand_cov = |rng: &mut fedsim_core::rng::SeededRng| {
                let vx: f64 = rng.random_range(0.5..1.5);
                let vy: f64 = rng.random_range(0.5..1.5);
                let r = rng.random_range(-0.6..0.6) * (vx * vy).sqrt();
                [[vx, r], [r, vy]]
            };
            let mu_a = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let mu_b = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let cov_a = rand_cov(&mut rng);
            let cov_b = rand_cov(&mut rng);
            let to_stats = |mu: &[f64; 2], cov: &[[f64; 2]; 2]| ClassStats {
                class: 0,
                mean: ndarray::array![mu[0], mu[1]],
                cov: ndarray::array![[cov[0][0], cov[0][1]], [cov[1][0], cov[1][1]]],
                count: 10,
                noised: false,
            };
            let numeric = hellinger_quadrature_2d(&mu_a, &cov_a, &mu_b, &cov_b);
            let closed = hellinger_gaussian(&to_stats(&mu_a, &cov_a), &to_stats(&mu_b, &cov_b))
                .map_err(|e| e.to_string())?;
            let err = (closed - numeric).abs();
            max_err = max_err.max(err);
            if err > 1e-6 {
                return Err(format!(
                    "2d trial {trial}: closed {closed} vs quadrature {numeric} (err {err:.2e})"
                ));
            }
        }
        Ok(format!("50 pairs within 1e-6 of quadrature, max err {max_err:.2e}"))
    });
}

#[test]
fn criterion_06_inner_product_concentration() {
    criterion(6, "proposition1_concentration", || {
        let samples = 100_000usize;
        let thresholds = [0.1, 0.2, 0.3];
        let mut detail = String::new();
        for d in [16usize, 64, 256] {
            let mut rng = rng_from_seed(600 + d as u64);
            let mut exceed = [0usize; 3];
            for _ in 0..samples {
                let u = random_unit(d, &mut rng);
                let v = random_unit(d, &mut rng);
                let dot = u.dot(&v).abs();
                for (k, &t) in thresholds.iter().enumerate() {
                    if dot > t {
                        exceed[k] += 1;
                    }
                }
            }
            for (k, &t) in thresholds.iter().enumerate() {
                let p_hat = exceed[k] as f64 / samples as f64;
                let bound = 2.0 * (-(d as f64 - 1.0) * t * t / 2.0).exp();
                let se = (p_hat * (1.0 - p_hat) / samples as f64).sqrt();
                if p_hat > bound + 3.0 * se {
                    return Err(format!(
                        "d={d}, t={t}: tail {p_hat:.5} exceeds bound {bound:.5} + 3se {:.5}",
                        3.0 * se
                    ));
                }
            }
            detail.push_str(&format!("d={d} ok; "));
        }
        Ok(format!("{detail}10^5 pairs per (d,t) under the 2exp(-(d-1)t^2/2) bound"))
    });
}

#[test]
fn criterion_07_gradient_bound() {
    criterion(7, "proposition2_bound", || {
        let (d, k) = (8usize, 4usize);
        let mut rng = rng_from_seed(700);
        let mut max_ratio: f64 = 0.0;
        for trial in 0..100_000 {
            let z_c = random_unit(d, &mut rng);
            let z_k = random_unit(d, &mut rng);
            let p_a = random_simplex(k, &mut rng);
            let p_b = random_simplex(k, &mut rng);
            let y = rng.random_range(0..k);
            let (lhs, rhs) = check_gradient_bound(&z_c, &z_k, &p_a, &p_b, y)
                .map_err(|e| format!("trial {trial}: {e}"))?;
            if lhs > rhs + 1e-9 {
                return Err(format!("trial {trial}: lhs {lhs} > rhs {rhs} + 1e-9"));
            }
            if rhs > 0.0 {
                max_ratio = max_ratio.max(lhs / rhs);
            }
        }
        Ok(format!("10^5 instances hold; max lhs/rhs = {max_ratio:.4}"))
    });
}

#[test]
fn criterion_08_weight_divergence_coupling() {
    criterion(8, "weight_divergence_coupling", || {
        let levels: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
        let cfg = desk_config(Scenario::WeightDivergenceStudy, vec![10, 11, 12], levels);
        let result = run_experiment(&cfg).map_err(|e| e.to_string())?;
        if result.failed_rows() > 0 {
            let first = result.rows.iter().find_map(|r| r.error.clone());
            return Err(format!("{} failed rows; first: {first:?}", result.failed_rows()));
        }
        let rho_s = result
            .aggregates
            .spearman_s_vs_divergence
            .ok_or("no s-divergence correlation")?;
        let rho_w = result
            .aggregates
            .spearman_wasserstein_vs_divergence
            .ok_or("no wasserstein-divergence correlation")?;
        if rho_s < 0.6 {
            return Err(format!("Spearman(s, divergence) = {rho_s:.3} < 0.6"));
        }
        if rho_s < rho_w {
            return Err(format!(
                "metric correlation {rho_s:.3} below Wasserstein baseline {rho_w:.3}"
            ));
        }
        Ok(format!(
            "Spearman(s, div) = {rho_s:.3} >= 0.6 and >= Wasserstein {rho_w:.3} over 24 runs"
        ))
    });
}

#[test]
fn criterion_09_sample_size_study() {
    criterion(9, "sample_size_study", || {
        let mut cfg = desk_config(Scenario::SampleSizeStudy, vec![20, 21, 22, 23, 24], vec![]);
        cfg.datagen.samples_per_client = 1600; // 400 per class
        cfg.subsample_levels = vec![10, 25, 50, 100];
        let result = run_experiment(&cfg).map_err(|e| e.to_string())?;
        if result.failed_rows() > 0 {
            let first = result.rows.iter().find_map(|r| r.error.clone());
            return Err(format!("{} failed rows; first: {first:?}", result.failed_rows()));
        }

        let deviations = |level: f64| -> Vec<f64> {
            result
                .rows
                .iter()
                .filter(|r| r.level == level)
                .map(|r| r.s_tilde_subsampled.unwrap() - r.s_tilde_full.unwrap())
                .collect()
        };
        // 10 per class overestimates on average.
        let low = deviations(10.0);
        let low_mean = mean(&low);
        if low_mean <= 0.0 {
            return Err(format!("mean(s_sub - s_full) at 10/class = {low_mean:.4}, expected > 0"));
        }
        // At >= 50 per class the absolute deviation stays within 0.05.
        for level in [50.0, 100.0, 400.0] {
            let devs: Vec<f64> = deviations(level).iter().map(|d| d.abs()).collect();
            let mad = mean(&devs);
            if mad > 0.05 {
                return Err(format!("mean |s_sub - s_full| at {level}/class = {mad:.4} > 0.05"));
            }
        }
        // The full subsample is the identity.
        for dev in deviations(400.0) {
            if dev.abs() > 1e-12 {
                return Err(format!("full-level deviation {dev} should be 0"));
            }
        }
        Ok(format!(
            "overestimation at 10/class = {low_mean:.4} > 0; deviations at >=50/class within 0.05"
        ))
    });
}

#[test]
fn criterion_10_fedprox_trend() {
    criterion(10, "fedprox_mu_trend", || {
        let levels = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let mut cfg = desk_config(Scenario::FedproxMuSweep, vec![30, 31, 32], levels);
        cfg.rounds = 8;
        let result = run_experiment(&cfg).map_err(|e| e.to_string())?;
        if result.failed_rows() > 0 {
            let first = result.rows.iter().find_map(|r| r.error.clone());
            return Err(format!("{} failed rows; first: {first:?}", result.failed_rows()));
        }
        let rho = result
            .aggregates
            .spearman_s_vs_best_mu
            .ok_or("no s-vs-best-mu correlation")?;
        if rho >= 0.0 {
            return Err(format!("Spearman(s, best mu) = {rho:.3}, expected negative"));
        }
        Ok(format!("Spearman(s, best mu) = {rho:.3} < 0 over 18 runs x 8-point mu grid"))
    });
}

#[test]
fn criterion_11_privacy_suite() {
    criterion(11, "privacy_suite", || {
        // (a) SMC product exact to 1e-9 relative error on 1000 fuzzed shapes.
        let mut rng = rng_from_seed(1100);
        for trial in 0..1000u64 {
            let n_a = rng.random_range(1..10);
            let n_b = rng.random_range(1..10);
            let d = rng.random_range(1..8);
            let x = Array2::from_shape_fn((n_a, d), |_| rng.random_range(-3.0..3.0));
            let y = Array2::from_shape_fn((n_b, d), |_| rng.random_range(-3.0..3.0));
            let out = secure_dot_product(&x, &y, trial).map_err(|e| e.to_string())?;
            let plain = x.dot(&y.t());
            let err: f64 = out
                .product
                .iter()
                .zip(plain.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = plain.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            if err / norm > 1e-9 {
                return Err(format!("(a) trial {trial}: SMC relative error {}", err / norm));
            }
        }

        // (b) Empirical noise std vs the sigma formulas at 10^4 draws.
        let d = 6usize;
        let stats = ClassStats {
            class: 0,
            mean: ndarray::Array1::from_elem(d, 0.2),
            cov: ndarray::Array2::eye(d),
            count: 100,
            noised: false,
        };
        let budget = PrivacyBudget::new(1.0, 1e-5).map_err(|e| e.to_string())?;
        let (sigma_mean, sigma_cov) = noise_sigmas(&budget, stats.count);
        let draws = 10_000u64;
        let mut mean_sq = 0.0;
        let mut mean_n = 0usize;
        let mut cov_sq = 0.0;
        let mut cov_n = 0usize;
        for seed in 0..draws {
            let noised = add_dp_noise_stats(&stats, &budget, 1e-4, seed)
                .map_err(|e| e.to_string())?;
            for (a, b) in noised.mean.iter().zip(stats.mean.iter()) {
                mean_sq += (a - b) * (a - b);
                mean_n += 1;
            }
            // Upper triangle: entries are iid before symmetrization.
            for i in 0..d {
                for j in i..d {
                    let delta = noised.cov[[i, j]] - stats.cov[[i, j]];
                    cov_sq += delta * delta;
                    cov_n += 1;
                }
            }
        }
        let emp_mean_sigma = (mean_sq / mean_n as f64).sqrt();
        let emp_cov_sigma = (cov_sq / cov_n as f64).sqrt();
        if (emp_mean_sigma - sigma_mean).abs() / sigma_mean > 0.03 {
            return Err(format!(
                "(b) mean noise std {emp_mean_sigma:.6} vs sigma_mu {sigma_mean:.6} (>3%)"
            ));
        }
        if (emp_cov_sigma - sigma_cov).abs() / sigma_cov > 0.03 {
            return Err(format!(
                "(b) cov noise std {emp_cov_sigma:.6} vs sigma_cov {sigma_cov:.6} (>3%)"
            ));
        }

        // (c) Gate predicate exact on a boundary grid.
        for d in [1usize, 16, 64, 256] {
            for n in [1usize, 10, 100, 1000] {
                let threshold = 6.0 * (d as f64).sqrt() / n as f64;
                let just_below = threshold * (1.0 - 1e-12);
                let checks = [
                    (just_below, true),
                    (threshold, false),
                    (threshold * (1.0 + 1e-12), false),
                ];
                for (rho, expect) in checks {
                    let got = check_privacy_budget(rho, d, n)
                        .map_err(|e| e.to_string())?
                        .pass;
                    if got != expect {
                        return Err(format!(
                            "(c) gate(rho={rho}, d={d}, n={n}) = {got}, expected {expect}"
                        ));
                    }
                }
            }
        }

        // (d) Attack alignment monotone non-decreasing in rho
        //     (d=32, n=200, k=3, 20 seeds, 5-point log sweep).
        let (dim, n, k) = (32usize, 200usize, 3usize);
        let threshold = 6.0 * (dim as f64).sqrt() / n as f64;
        let rhos: Vec<f64> = (-2..=2)
            .map(|e| threshold * 10f64.powi(e))
            .collect();
        let mut mean_aligns = Vec::new();
        for &rho in &rhos {
            let budget = PrivacyBudget::new(rho, 1e-5).map_err(|e| e.to_string())?;
            let (_, sigma_cov) = noise_sigmas(&budget, n);
            let mut total = 0.0;
            for seed in 0..20u64 {
                let mut data_rng = rng_from_seed(derive_seed(1111, "attack-data", seed));
                let h = Array2::from_shape_fn((n, dim), |_| data_rng.random_range(-1.0..1.0));
                let gram = normalized_gram(&h).map_err(|e| e.to_string())?;
                // Gram scales like n times the covariance, so the released
                // noise applies at the same scale.
                let mut noise_rng = rng_from_seed(derive_seed(2222, "attack-noise", seed));
                let noise =
                    symmetric_gaussian_noise(dim, sigma_cov * n as f64, &mut noise_rng);
                let noisy = &gram + &noise;
                let result =
                    svd_reconstruction_attack(&noisy, &h, k).map_err(|e| e.to_string())?;
                total += result.alignment;
            }
            mean_aligns.push(total / 20.0);
        }
        for w in mean_aligns.windows(2) {
            if w[1] < w[0] {
                return Err(format!(
                    "(d) alignment decreased along rho sweep: {mean_aligns:?}"
                ));
            }
        }

        // (e) Private vs plain in the noiseless limit.
        let cfg = SyntheticConfig {
            dim: 8,
            classes: 2,
            samples_per_client: 160,
            overlap: 0.5,
            mean_separation: 4.0,
            cov_scale: 1.0,
            seed: 15,
        };
        let (a, b) = fedsim_core::datagen::gen_synthetic_pair(&cfg).map_err(|e| e.to_string())?;
        let spec = ModelSpec {
            input: 8,
            hidden: vec![16, 8],
            classes: 2,
            activation: Activation::Tanh,
            seed: 5,
        };
        let probe = run_probe_round(&[a.clone(), b.clone()], &spec, &TrainOpts::default())
            .map_err(|e| e.to_string())?;
        let metric_cfg = MetricConfig { min_class_samples: 10, ..MetricConfig::default() };
        let plain = pairwise_ot_similarity(&a, &b, &probe.global, &metric_cfg)
            .map_err(|e| e.to_string())?;
        let big = PrivacyBudget::new(1e12, 1e-5).map_err(|e| e.to_string())?;
        let (private, _) = private_pairwise_similarity(
            &a, &b, &probe.global, &metric_cfg, &big, true, 7,
        )
        .map_err(|e| e.to_string())?;
        let gap = (private.s_tilde - plain.s_tilde).abs();
        if gap > 0.01 {
            return Err(format!("(e) |s_private - s_plain| = {gap} > 0.01 at rho=1e12"));
        }

        Ok(format!(
            "SMC exact, noise std calibrated, gate exact, attack monotone {mean_aligns:?}, noiseless gap {gap:.2e}"
        ))
    });
}

#[test]
fn criterion_12_wasserstein_interpretability() {
    criterion(12, "wasserstein_scale_contrast", || {
        let mut cfg = desk_config(Scenario::WassersteinComparison, vec![40, 41, 42], vec![1.0, 10.0]);
        cfg.datagen.samples_per_client = 400;
        let result = run_experiment(&cfg).map_err(|e| e.to_string())?;
        if result.failed_rows() > 0 {
            let first = result.rows.iter().find_map(|r| r.error.clone());
            return Err(format!("{} failed rows; first: {first:?}", result.failed_rows()));
        }
        let mut detail = String::new();
        for &seed in &cfg.seeds {
            let at = |level: f64| {
                result
                    .rows
                    .iter()
                    .find(|r| r.seed == seed && r.level == level)
                    .cloned()
                    .ok_or(format!("missing row for seed {seed}, level {level}"))
            };
            let base = at(1.0)?;
            let scaled = at(10.0)?;
            let (w1, w10) = (base.wasserstein.unwrap(), scaled.wasserstein.unwrap());
            let (s1, s10) = (base.s_tilde.unwrap(), scaled.s_tilde.unwrap());
            if w10 < 10.0 * w1 {
                return Err(format!(
                    "seed {seed}: baseline scaled only {}x (from {w1} to {w10})",
                    w10 / w1
                ));
            }
            if (s10 - s1).abs() > 0.02 {
                return Err(format!(
                    "seed {seed}: metric moved by {} under scaling",
                    (s10 - s1).abs()
                ));
            }
            detail.push_str(&format!("seed {seed}: wass x{:.0}, |ds| {:.1e}; ", w10 / w1, (s10 - s1).abs()));
        }
        Ok(detail)
    });
}
