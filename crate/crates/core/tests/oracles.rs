//! Independent-oracle checks: every statistic is recomputed by a second
//! route that shares no code with the implementation it verifies.

use emostock_core::discretize::kmeans_1d_default;
use emostock_core::math::f_survival;
use emostock_core::rng::Rng;
use emostock_core::stats::{granger_test, ols_fit, pearson, Matrix};

use statrs::distribution::{ContinuousCDF, FisherSnedecor};

/// Direct textbook evaluation of the correlation coefficient.
fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let dx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let dy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    num / (dx * dy).sqrt()
}

#[test]
fn pearson_matches_direct_formula_on_random_pairs() {
    let mut rng = Rng::seed_from_u64(101);
    for trial in 0..1000 {
        let n = 20 + rng.index(180);
        let x: Vec<f64> = (0..n).map(|_| rng.normal_with(0.0, 2.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 0.5 * x[i] + rng.normal_with(0.0, 1.5))
            .collect();
        let got = pearson(&x, &y).unwrap();
        let want = pearson_oracle(&x, &y);
        assert!(
            (got - want).abs() < 1e-10,
            "trial {trial}: {got} vs oracle {want}"
        );
    }
}

/// Normal-equations solve (X'X b = X'y) by Gaussian elimination with partial
/// pivoting; deliberately a different algorithm than the QR in `ols_fit`.
#[allow(clippy::needless_range_loop)]
fn ols_oracle(design: &Matrix, response: &[f64]) -> (Vec<f64>, f64) {
    let m = design.rows();
    let p = design.cols();
    let mut xtx = vec![vec![0.0f64; p]; p];
    let mut xty = vec![0.0f64; p];
    for r in 0..m {
        let row = design.row(r);
        for i in 0..p {
            xty[i] += row[i] * response[r];
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    // gaussian elimination with partial pivoting
    let mut a = xtx;
    let mut b = xty;
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        for row in (col + 1)..p {
            let factor = a[row][col] / diag;
            for k in col..p {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut coef = vec![0.0f64; p];
    for col in (0..p).rev() {
        let mut acc = b[col];
        for k in (col + 1)..p {
            acc -= a[col][k] * coef[k];
        }
        coef[col] = acc / a[col][col];
    }
    let rss: f64 = (0..m)
        .map(|r| {
            let fit: f64 = design.row(r).iter().zip(&coef).map(|(x, c)| x * c).sum();
            (response[r] - fit) * (response[r] - fit)
        })
        .sum();
    (coef, rss)
}

#[test]
fn ols_matches_normal_equations_oracle() {
    let mut rng = Rng::seed_from_u64(202);
    for trial in 0..200 {
        let m = 13 + rng.index(38); // up to 50 rows
        let p = 2 + rng.index(11); // up to 12 columns
        let m = m.max(p + 1);
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            let mut row = vec![1.0];
            row.extend((1..p).map(|_| rng.normal_with(0.0, 1.0)));
            rows.push(row);
        }
        let design = Matrix::from_rows(&rows).unwrap();
        let truth: Vec<f64> = (0..p).map(|_| rng.normal_with(0.0, 2.0)).collect();
        let response: Vec<f64> = (0..m)
            .map(|r| {
                let signal: f64 = design.row(r).iter().zip(&truth).map(|(x, c)| x * c).sum();
                signal + rng.normal_with(0.0, 0.3)
            })
            .collect();

        let (coef, rss) = ols_fit(&design, &response).unwrap();
        let (coef_o, rss_o) = ols_oracle(&design, &response);
        for (c, co) in coef.iter().zip(&coef_o) {
            let rel = (c - co).abs() / co.abs().max(1.0);
            assert!(rel < 1e-8, "trial {trial}: coef {c} vs {co}");
        }
        let rel = (rss - rss_o).abs() / rss_o.max(1e-12);
        assert!(rel < 1e-8, "trial {trial}: rss {rss} vs {rss_o}");
    }
}

#[test]
fn f_distribution_tail_matches_statrs() {
    for &d1 in &[1usize, 2, 3, 5, 10] {
        for &d2 in &[4usize, 10, 30, 100, 180] {
            let dist = FisherSnedecor::new(d1 as f64, d2 as f64).unwrap();
            for i in 1..80 {
                let f = i as f64 * 0.25;
                let got = f_survival(f, d1 as f64, d2 as f64);
                let want = 1.0 - dist.cdf(f);
                assert!(
                    (got - want).abs() < 1e-10,
                    "F({d1},{d2}) at {f}: {got} vs {want}"
                );
            }
        }
    }
}

/// Exact optimal 1-D k-means cost by dynamic programming over sorted values.
#[allow(clippy::needless_range_loop)]
fn dp_optimal_wcss(values: &[f64], k: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut ps = vec![0.0f64; n + 1];
    let mut ps2 = vec![0.0f64; n + 1];
    for (i, v) in sorted.iter().enumerate() {
        ps[i + 1] = ps[i] + v;
        ps2[i + 1] = ps2[i] + v * v;
    }
    let cost = |i: usize, j: usize| {
        let cnt = (j - i + 1) as f64;
        let s = ps[j + 1] - ps[i];
        let s2 = ps2[j + 1] - ps2[i];
        (s2 - s * s / cnt).max(0.0)
    };
    let mut dp = vec![vec![f64::INFINITY; n]; k];
    for j in 0..n {
        dp[0][j] = cost(0, j);
    }
    for c in 1..k {
        for j in c..n {
            for split in c..=j {
                let cand = dp[c - 1][split - 1] + cost(split, j);
                if cand < dp[c][j] {
                    dp[c][j] = cand;
                }
            }
        }
    }
    dp[k - 1][n - 1]
}

#[test]
fn kmeans_within_one_percent_of_dp_optimum() {
    let mut rng = Rng::seed_from_u64(303);
    for trial in 0..30 {
        let n = 30 + rng.index(271); // up to 300
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let mode = [-3.0, 0.0, 3.0][i % 3];
                rng.normal_with(mode, 0.3 + 0.2 * (trial % 3) as f64)
            })
            .collect();
        let fit = kmeans_1d_default(&values, 3).unwrap();
        let optimal = dp_optimal_wcss(&values, 3);
        let got = fit.final_wcss();
        assert!(
            got <= optimal * 1.01 + 1e-9,
            "trial {trial}: lloyd {got} vs optimal {optimal}"
        );
    }
}

#[test]
fn granger_detects_planted_dependency_at_every_lag() {
    let mut rng = Rng::seed_from_u64(404);
    for lag in 1..=5usize {
        let t = 200;
        let x: Vec<f64> = (0..t).map(|_| rng.normal()).collect();
        let mut y = vec![0.0f64; t];
        for i in lag..t {
            y[i] = 0.8 * x[i - lag] + rng.normal_with(0.0, 0.1);
        }
        let result = granger_test(&x, &y, lag).unwrap();
        assert!(result.p_value < 0.001, "lag {lag}: p = {}", result.p_value);
    }
}

#[test]
fn granger_null_rejection_rate_is_calibrated() {
    let mut rng = Rng::seed_from_u64(505);
    let trials = 400;
    let mut rejections = 0usize;
    for _ in 0..trials {
        let x: Vec<f64> = (0..191).map(|_| rng.normal()).collect();
        let y: Vec<f64> = (0..191).map(|_| rng.normal()).collect();
        if granger_test(&x, &y, 3).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    assert!(
        (0.02..=0.08).contains(&rate),
        "null rejection rate {rate} outside [0.02, 0.08]"
    );
}
