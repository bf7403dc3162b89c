//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any gated criterion fails.

// The oracles are plain index loops on purpose.
#![allow(clippy::needless_range_loop)]
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use superflow::data::{
    build_supervised, generate_synthetic_basin, ColumnDescriptor, CsvFormat, DateRange, NaiveDate, PeriodSplit,
    Process, SyntheticParams,
};
use superflow::ensemble::{
    equal_weight_predict, solve_simplex_weights, super_learner_predict, EnsembleWeights, SIMPLEX_MAX_ITER, SIMPLEX_TOL,
};
use superflow::harness::{export_report, run_experiment, ExperimentConfig, ExperimentReport, Manifest};
use superflow::learners::boost::fit_gradient_boosting;
use superflow::learners::lasso::{coordinate_descent_lasso, lambda_max};
use superflow::learners::linear::fit_ols;
use superflow::learners::loess::fit_loess;
use superflow::learners::mars::mars_build;
use superflow::learners::nnet::{n_weights, penalized_loss_and_gradient};
use superflow::learners::{fit_learner, BoostConfig, LearnerConfig, LearnerId, LoessConfig, MarsConfig, MarsVariant};
use superflow::metrics::{compute_metrics, Algorithm, Metric};
use superflow::select::{permutation_vim, select_predictors, VimConfig, DEFAULT_PER_TYPE};
use superflow::Matrix;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn desk_suite() -> ExperimentConfig {
    let path = repo_root().join("configs/desk_suite.toml");
    ExperimentConfig::from_file(&path).expect("desk suite config parses")
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    Matrix::new(n, d, (0..n * d).map(|_| normal.sample(rng)).collect()).unwrap()
}

fn naive_mse(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s / a.len() as f64
}

// 1. simplex solver

fn simplex_vertex_dominance() -> Outcome {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_sum = 0.0f64;
    for inst in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + inst);
        let (n, m) = (50, 10);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        // columns are noisy, biased forecasts of y with varying quality
        let mut z = Matrix::zeros(n, m);
        for j in 0..m {
            let sd = rng.random_range(0.1..5.0);
            let bias = rng.random_range(-2.0..2.0);
            let noise = Normal::new(bias, sd).unwrap();
            for i in 0..n {
                z.set(i, j, y[i] + noise.sample(&mut rng));
            }
        }
        let w = solve_simplex_weights(&z, &y, SIMPLEX_TOL, SIMPLEX_MAX_ITER)
            .map_err(|e| format!("instance {inst}: {e}"))?;
        check(w.w.iter().all(|&v| v >= 0.0), || {
            format!("instance {inst}: negative weight {:?}", w.w)
        })?;
        let sum: f64 = w.w.iter().sum();
        worst_sum = worst_sum.max((sum - 1.0).abs());
        check((sum - 1.0).abs() <= 1e-10, || {
            format!("instance {inst}: weights sum to {sum}")
        })?;
        let combined: Vec<f64> = (0..n).map(|i| (0..m).map(|j| w.w[j] * z.get(i, j)).sum()).collect();
        let achieved = naive_mse(&combined, &y);
        let best = (0..m)
            .map(|j| naive_mse(&z.column(j), &y))
            .fold(f64::INFINITY, f64::min);
        worst_gap = worst_gap.max(achieved - best);
        check(achieved <= best + 1e-9, || {
            format!("instance {inst}: {achieved} > vertex {best}")
        })?;
    }
    Ok(format!(
        "max(achieved - best vertex) = {worst_gap:.3e}, max |sum-1| = {worst_sum:.1e}"
    ))
}

// 2. metrics

fn naive_metrics(f: &[f64], o: &[f64]) -> [f64; 4] {
    let n = f.len();
    let mut abs = Vec::new();
    let (mut sa, mut ss) = (0.0, 0.0);
    for i in 0..n {
        let e = f[i] - o[i];
        sa += e.abs();
        ss += e * e;
        abs.push(e.abs());
    }
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = if n % 2 == 1 {
        abs[n / 2]
    } else {
        (abs[n / 2 - 1] + abs[n / 2]) / 2.0
    };
    let (mut mf, mut mo) = (0.0, 0.0);
    for i in 0..n {
        mf += f[i];
        mo += o[i];
    }
    mf /= n as f64;
    mo /= n as f64;
    let (mut num, mut vf, mut vo) = (0.0, 0.0, 0.0);
    for i in 0..n {
        num += (f[i] - mf) * (o[i] - mo);
        vf += (f[i] - mf) * (f[i] - mf);
        vo += (o[i] - mo) * (o[i] - mo);
    }
    [sa / n as f64, (ss / n as f64).sqrt(), med, num * num / (vf * vo)]
}

fn metric_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for pair in 0..1000 {
        let n = rng.random_range(2..200);
        let o: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..20.0)).collect();
        let f: Vec<f64> = o.iter().map(|v| v + rng.random_range(-3.0..3.0)).collect();
        let r = compute_metrics(Algorithm::SuperLearner, &f, &o).map_err(|e| format!("pair {pair}: {e}"))?;
        let want = naive_metrics(&f, &o);
        let got = [r.mae, r.rmse, r.medae, r.r2.ok_or("r2 undefined on random pair")?];
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
            check((g - w).abs() <= 1e-12, || format!("pair {pair}: {g} vs {w}"))?;
        }
    }
    let r = compute_metrics(Algorithm::SuperLearner, &[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).map_err(|e| e.to_string())?;
    let round = |v: f64| (v * 1e4).round() / 1e4;
    let got = [
        round(r.mae),
        round(r.rmse),
        round(r.medae),
        round(r.r2.unwrap_or(f64::NAN)),
    ];
    check(got == [0.6667, 1.1547, 0.0, 0.9231], || {
        format!("hand example gave {got:?}")
    })?;
    Ok(format!("max diff {worst:.1e}; hand example {got:?}"))
}

// 3. learner oracles

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn normal_equations(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let (n, d) = (x.rows(), x.cols());
    let design = |i: usize, j: usize| if j == 0 { 1.0 } else { x.get(i, j - 1) };
    let mut xtx = vec![vec![0.0; d + 1]; d + 1];
    let mut xty = vec![0.0; d + 1];
    for i in 0..n {
        for a in 0..=d {
            xty[a] += design(i, a) * y[i];
            for b in 0..=d {
                xtx[a][b] += design(i, a) * design(i, b);
            }
        }
    }
    gauss_solve(xtx, xty)
}

fn standardize(x: &Matrix, y: &[f64]) -> (Matrix, Vec<f64>) {
    let (n, d) = (x.rows(), x.cols());
    let mut out = Matrix::zeros(n, d);
    for j in 0..d {
        let col = x.column(j);
        let m = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        for i in 0..n {
            out.set(i, j, (col[i] - m) / sd);
        }
    }
    let ym = y.iter().sum::<f64>() / n as f64;
    (out, y.iter().map(|v| v - ym).collect())
}

fn linear_data(seed: u64, n: usize, d: usize) -> (Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_matrix(&mut rng, n, d);
    let y = x
        .iter_rows()
        .map(|r| {
            1.5 + r.iter().enumerate().map(|(j, v)| (j as f64 - 2.0) * v).sum::<f64>() + rng.random_range(-0.5..0.5)
        })
        .collect();
    (x, y)
}

fn learner_oracles() -> Outcome {
    let mut notes = Vec::new();

    let mut ols_err = 0.0f64;
    for seed in 0..5 {
        let (x, y) = linear_data(30 + seed, 120, 6);
        let fit = fit_ols(&x, &y);
        let oracle = normal_equations(&x, &y);
        ols_err = ols_err.max((fit.intercept - oracle[0]).abs());
        for (c, o) in fit.coef.iter().zip(&oracle[1..]) {
            ols_err = ols_err.max((c - o).abs());
        }
    }
    check(ols_err <= 1e-6, || {
        format!("OLS differs from normal equations by {ols_err:e}")
    })?;
    notes.push(format!("ols {ols_err:.1e}"));

    let mut lasso_err = 0.0f64;
    for seed in 0..5 {
        let (x, y) = linear_data(40 + seed, 150, 5);
        let (xs, yc) = standardize(&x, &y);
        let beta = coordinate_descent_lasso(&xs, &yc, 0.0, 1e-13, 100_000).map_err(|e| e.to_string())?;
        let ols = fit_ols(&xs, &yc);
        for (b, o) in beta.iter().zip(&ols.coef) {
            lasso_err = lasso_err.max((b - o).abs());
        }
        let lmax = lambda_max(&xs, &yc);
        for lambda in [lmax, 1.5 * lmax] {
            let zero = coordinate_descent_lasso(&xs, &yc, lambda, 1e-10, 10_000).map_err(|e| e.to_string())?;
            check(zero.iter().all(|&b| b == 0.0), || {
                format!("lasso at {lambda} kept {zero:?}")
            })?;
        }
    }
    check(lasso_err <= 1e-6, || {
        format!("lasso at lambda 0 differs from OLS by {lasso_err:e}")
    })?;
    notes.push(format!("lasso {lasso_err:.1e}"));

    let mut nn_err = 0.0f64;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
        let (d, hidden) = (4, 5);
        let x = random_matrix(&mut rng, 40, d);
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut w: Vec<f64> = (0..n_weights(d, hidden)).map(|_| rng.random_range(-0.7..0.7)).collect();
        let (_, g) = penalized_loss_and_gradient(&w, &x, &y, hidden, 1e-3);
        let h = 1e-5;
        let mut diff = 0.0;
        let mut norm = 0.0;
        for k in 0..w.len() {
            let w0 = w[k];
            w[k] = w0 + h;
            let up = penalized_loss_and_gradient(&w, &x, &y, hidden, 1e-3).0;
            w[k] = w0 - h;
            let down = penalized_loss_and_gradient(&w, &x, &y, hidden, 1e-3).0;
            w[k] = w0;
            let fd = (up - down) / (2.0 * h);
            diff += (fd - g[k]).powi(2);
            norm += g[k].powi(2);
        }
        nn_err = nn_err.max(diff.sqrt() / norm.sqrt().max(1e-300));
    }
    check(nn_err <= 1e-4, || {
        format!("neural net gradient relative error {nn_err:e}")
    })?;
    notes.push(format!("nnet grad {nn_err:.1e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let x = random_matrix(&mut rng, 200, 4);
    let y: Vec<f64> = x
        .iter_rows()
        .map(|r| (2.0 * r[0]).sin() + r[1] * r[2] + 0.2 * rng.random::<f64>())
        .collect();
    let boost = fit_gradient_boosting(&x, &y, &BoostConfig::default()).map_err(|e| e.to_string())?;
    let mut prev = f64::INFINITY;
    for r in 0..=boost.trees.len() {
        let e = naive_mse(&boost.predict_rounds(&x, r), &y);
        check(e <= prev, || format!("boosting MSE rose at round {r}: {e} > {prev}"))?;
        prev = e;
    }
    notes.push(format!("boost final mse {prev:.3}"));

    for variant in [MarsVariant::Mars, MarsVariant::PolyMars] {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(70 + seed);
            let x = random_matrix(&mut rng, 200, 5);
            let y: Vec<f64> = x
                .iter_rows()
                .map(|r| (r[0] - 0.3).max(0.0) * 2.0 + r[1].abs() + 0.3 * rng.random::<f64>())
                .collect();
            let m = mars_build(&x, &y, &MarsConfig::default(), variant).map_err(|e| e.to_string())?;
            check(m.gcv <= m.forward_gcv, || {
                format!(
                    "{variant:?} seed {seed}: pruned GCV {} > forward {}",
                    m.gcv, m.forward_gcv
                )
            })?;
        }
    }
    notes.push("mars gcv ok".into());

    let mut loess_err = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    for d in [1usize, 2, 3] {
        let x = random_matrix(&mut rng, 120, d);
        for degree in [1usize, 2] {
            // additive polynomial of the local degree
            let poly = |r: &[f64]| -> f64 {
                1.0 + r
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (j as f64 + 0.5) * v + if degree == 2 { 0.7 * v * v } else { 0.0 })
                    .sum::<f64>()
            };
            let y: Vec<f64> = x.iter_rows().map(poly).collect();
            let model = fit_loess(&x, &y, &LoessConfig { span: 0.75, degree }).map_err(|e| e.to_string())?;
            let q = random_matrix(&mut rng, 30, d);
            for (p, row) in model.predict(&q).iter().zip(q.iter_rows()) {
                loess_err = loess_err.max((p - poly(row)).abs());
            }
        }
    }
    check(loess_err <= 1e-8, || format!("loess polynomial error {loess_err:e}"))?;
    notes.push(format!("loess {loess_err:.1e}"));

    Ok(notes.join(", "))
}

// 4. importance recovery

fn vim_recovery() -> Outcome {
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
    let params = SyntheticParams {
        start_date: d(2004, 12, 2),
        baseflow: 0.2,
        ..SyntheticParams::linear_reservoir(0.9, 0.0)
    };
    let train = DateRange::new(d(2005, 1, 1), d(2006, 12, 31)).unwrap();
    let q1 = ColumnDescriptor::new(Process::Q, 1);
    let mut top = 0;
    let mut selected_when_positive = 0;
    let mut positive = 0;
    for seed in 0..20u64 {
        let series = generate_synthetic_basin(500 + seed, 1491, &params).map_err(|e| e.to_string())?;
        let data = build_supervised(&series, 30, &train, None).map_err(|e| e.to_string())?;
        let vim = permutation_vim(&data, &VimConfig::default(), 900 + seed).map_err(|e| e.to_string())?;
        if vim.ranked(Process::Q).first().map(|c| c.0) == Some(q1) {
            top += 1;
        }
        if vim.score_of(q1).unwrap_or(0.0) > 0.0 {
            positive += 1;
            let set = select_predictors(&vim, DEFAULT_PER_TYPE).map_err(|e| e.to_string())?;
            if set.selected.contains(&q1) {
                selected_when_positive += 1;
            }
        }
    }
    check(top >= 18, || format!("Q1 top-ranked in only {top}/20 runs"))?;
    check(selected_when_positive == positive, || {
        format!("Q1 selected in {selected_when_positive} of {positive} runs with positive importance")
    })?;
    Ok(format!(
        "Q1 top in {top}/20, selected in {selected_when_positive}/{positive} positive runs"
    ))
}

// 5 and 6 share the desk suite run.

fn equal_weight_equivalence(report: &ExperimentReport) -> Outcome {
    let config = &report.config;
    let Manifest::Synthetic { n_days, params, .. } = &config.manifest else {
        return Err("desk suite is not synthetic".into());
    };
    let mut worst = 0.0f64;
    let mut stored = 0.0f64;
    for basin in &report.basins {
        let seed: u64 = basin
            .basin_id
            .trim_start_matches("synth-")
            .parse()
            .map_err(|_| "bad basin id")?;
        let series = generate_synthetic_basin(seed, *n_days, params).map_err(|e| e.to_string())?;
        let sel = Some(basin.predictors.selected.as_slice());
        let train = build_supervised(&series, config.lag_window, &basin.train, sel).map_err(|e| e.to_string())?;
        let test = build_supervised(&series, config.lag_window, &basin.test, sel).map_err(|e| e.to_string())?;
        let lc = LearnerConfig {
            seed: basin.seed,
            ..config.learners.clone()
        };
        let models = LearnerId::ALL
            .iter()
            .map(|&id| fit_learner(id, &train, &lc))
            .collect::<superflow::Result<Vec<_>>>()
            .map_err(|e| format!("{}: {e}", basin.basin_id))?;
        let m = models.len();
        let uniform = EnsembleWeights {
            learners: LearnerId::ALL.iter().map(|l| l.name().to_string()).collect(),
            w: vec![1.0 / m as f64; m],
            achieved_cv_mse: f64::NAN,
            iterations: 0,
            residual: 0.0,
            fold_scheme: None,
        };
        let ew = equal_weight_predict(&models, &test).map_err(|e| e.to_string())?;
        let sl = super_learner_predict(&uniform, &models, &test).map_err(|e| e.to_string())?;
        for (a, b) in ew.iter().zip(&sl) {
            worst = worst.max((a - b).abs());
        }
        if let Some(fc) = &basin.forecasts {
            for (a, b) in ew.iter().zip(&fc.predicted[Algorithm::EqualWeight.index()]) {
                stored = stored.max((a - b).abs());
            }
        }
    }
    check(worst <= 1e-12, || format!("max |EW - SL(uniform)| = {worst:e}"))?;
    Ok(format!(
        "{} basins, max |EW - SL(uniform)| = {worst:.1e}, max diff to harness EW = {stored:.1e}",
        report.basins.len()
    ))
}

fn end_to_end_ordering(report: &ExperimentReport) -> Outcome {
    check(report.failures.is_empty(), || {
        format!("failed basins: {:?}", report.failures)
    })?;
    check(report.basins.len() == 20, || format!("{} basins", report.basins.len()))?;
    let rmse = report.metric(Metric::Rmse);
    let sl = Algorithm::SuperLearner.index();
    let ew = Algorithm::EqualWeight.index();
    let sl_rank = rmse.mean_ranks[sl].ok_or("no SL rank")?;
    let ew_rank = rmse.mean_ranks[ew].ok_or("no EW rank")?;
    let sl_imp = rmse.mean_improvements[sl].ok_or("no SL improvement")?;
    let mut table: Vec<(f64, &str)> = Algorithm::ALL
        .iter()
        .map(|a| (rmse.mean_ranks[a.index()].unwrap_or(f64::NAN), a.name()))
        .collect();
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    let listing: Vec<String> = table.iter().map(|(r, n)| format!("{n} {r:.2}")).collect();
    println!("    mean RMSE ranks: {}", listing.join(", "));
    let summary = format!("SL rank {sl_rank:.2}, SL improvement {sl_imp:.2}%, EW rank {ew_rank:.2}");
    check(sl_rank <= 4.0, || format!("SL mean rank too high: {summary}"))?;
    check(sl_imp > 0.0, || {
        format!("SL does not beat linear regression: {summary}")
    })?;
    check(ew_rank <= 5.0, || format!("EW mean rank too high: {summary}"))?;
    Ok(summary)
}

// 7. determinism

fn reduced(mut config: ExperimentConfig, n_basins: usize) -> ExperimentConfig {
    if let Manifest::Synthetic { n_basins: n, .. } = &mut config.manifest {
        *n = n_basins;
    }
    config.importance.forest.n_trees = 100;
    config.learners.random_forest.n_trees = 100;
    config.learners.extra_trees.n_trees = 100;
    config
}

fn export_bytes(config: &ExperimentConfig, dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let report = run_experiment(config).map_err(|e| e.to_string())?;
    let files = export_report(&report, dir).map_err(|e| e.to_string())?;
    let mut names: Vec<String> = files.iter().map(|f| f.file.clone()).collect();
    names.push("manifest.json".into());
    names
        .into_iter()
        .map(|f| {
            let bytes = fs::read(dir.join(&f)).map_err(|e| e.to_string())?;
            Ok((f, bytes))
        })
        .collect()
}

fn determinism() -> Outcome {
    let base = reduced(desk_suite(), 3);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for workers in [1usize, 3] {
        let config = ExperimentConfig {
            workers,
            ..base.clone()
        };
        let dir = tmp.path().join(format!("w{workers}"));
        runs.push(export_bytes(&config, &dir)?);
    }
    check(runs[0].len() == runs[1].len(), || "different file sets".into())?;
    for ((fa, a), (fb, b)) in runs[0].iter().zip(&runs[1]) {
        check(fa == fb && a == b, || format!("{fa} differs between 1 and 3 workers"))?;
    }
    Ok(format!("{} files byte-identical across 1 and 3 workers", runs[0].len()))
}

// 8. CAMELS-format files with the default periods

fn camels_path() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let params = SyntheticParams {
        start_date: NaiveDate::from_ymd_opt(2003, 12, 2).unwrap(),
        ..SyntheticParams::default()
    };
    let series = generate_synthetic_basin(77, 3683, &params).map_err(|e| e.to_string())?;
    let path = tmp.path().join("01013500.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| e.to_string())?;
    w.write_record(["date", "prcp", "tmin", "tmax", "q"])
        .map_err(|e| e.to_string())?;
    for i in 0..series.len() {
        let t = series.t()[i];
        w.write_record([
            series.date_at(i).to_string(),
            series.p()[i].to_string(),
            (t - 4.0).to_string(),
            (t + 4.0).to_string(),
            series.q()[i].to_string(),
        ])
        .map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())?;
    let config = ExperimentConfig {
        split: PeriodSplit::camels_default(),
        manifest: Manifest::Files {
            paths: vec![path],
            format: CsvFormat::Camels,
        },
        ..reduced(ExperimentConfig::default(), 1)
    };
    let report = run_experiment(&config).map_err(|e| e.to_string())?;
    let files = export_report(&report, &tmp.path().join("out")).map_err(|e| e.to_string())?;
    Ok(format!("1 CAMELS-format basin, {} export files", files.len()))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report_line = |label: &str, gated: bool, run: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let outcome = run();
        let el = t.elapsed();
        let mark = match (&outcome, gated) {
            (Ok(_), _) => "PASS",
            (Err(_), true) => "FAIL",
            (Err(_), false) => "INFO",
        };
        let detail = match &outcome {
            Ok(s) | Err(s) => s.clone(),
        };
        println!("{mark} {label} [{:.1}s] {detail}", el.as_secs_f64());
        if gated && outcome.is_err() {
            failed += 1;
        }
        el
    };

    let limit = |el: Duration, secs: u64, label: &str| -> Result<(), String> {
        check(el <= Duration::from_secs(secs), || {
            format!("{label} took {:.1}s, limit {secs}s", el.as_secs_f64())
        })
    };

    let el = report_line(
        "criterion 1: simplex vertex dominance",
        true,
        &mut simplex_vertex_dominance,
    );
    let t1 = limit(el, 5, "criterion 1");
    report_line("criterion 2: metric oracle", true, &mut metric_oracle);
    let el = report_line("criterion 3: learner oracles", true, &mut learner_oracles);
    let t3 = limit(el, 60, "criterion 3");
    let el = report_line("criterion 4: importance recovery", true, &mut vim_recovery);
    let t4 = limit(el, 180, "criterion 4");

    let t = Instant::now();
    let mut suite = desk_suite();
    suite.workers = 1;
    let desk = run_experiment(&suite);
    let suite_time = t.elapsed();
    match desk {
        Ok(report) => {
            report_line("criterion 5: equal-weight equivalence", true, &mut || {
                equal_weight_equivalence(&report)
            });
            report_line("criterion 6: end-to-end ordering", true, &mut || {
                let s = end_to_end_ordering(&report)?;
                Ok(format!("{s}; suite ran in {:.1}s", suite_time.as_secs_f64()))
            });
        }
        Err(e) => {
            report_line("criterion 5: equal-weight equivalence", true, &mut || {
                Err(format!("desk suite failed: {e}"))
            });
            report_line("criterion 6: end-to-end ordering", true, &mut || {
                Err(format!("desk suite failed: {e}"))
            });
        }
    }
    let t6 = limit(suite_time, 600, "criterion 6");
    report_line("criterion 7: determinism across worker counts", true, &mut determinism);
    report_line("criterion 8: CAMELS-format path (not gated)", false, &mut camels_path);

    report_line("runtime budgets", true, &mut || {
        for r in [&t1, &t3, &t4, &t6] {
            r.clone()?;
        }
        Ok("criteria 1, 3, 4 and 6 within limits".into())
    });

    if failed == 0 {
        println!("all gated criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} gated check(s) failed");
        ExitCode::FAILURE
    }
}
