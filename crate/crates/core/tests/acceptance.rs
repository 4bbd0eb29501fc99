//! Acceptance suite: one runner executes every criterion, prints a pass/fail
//! line with its runtime, and fails if any criterion fails.
//!
//! The external-data criterion runs only when `SPARSE_IQA_EXT_CORPUS`,
//! `SPARSE_IQA_EXT_PAIRS` and `SPARSE_IQA_EXT_MOS` are set (see README).

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use sparse_iqa::decoder::{lbfgs_minimize, LbfgsOptions};
use sparse_iqa::eval::{
    compute_metrics, distances, evaluate_records, fit_logistic, histogram_distances, joint_histograms,
    EvalConfig, LogisticParams, ScoreRecord, SubjectiveRecord,
};
use sparse_iqa::model_io::{decode_model, encode_model};
use sparse_iqa::preprocess::{apply_normalization, fit_normalization, sample_random_patches_stream};
use sparse_iqa::scorer::{pearson, score_pair, spearman};
use sparse_iqa::{ChannelImage, DecoderHyperparams, Error, PatchBatch};

use common::*;

type Check = Result<String, String>;

/// Bypasses the test harness's output capture so results always show.
fn report(line: String) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

struct Runner {
    failures: Vec<String>,
}

impl Runner {
    fn run(&mut self, id: &str, title: &str, budget_s: f64, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        let result = result.and_then(|detail| {
            if secs <= budget_s { Ok(detail) } else { Err(format!("{detail}; exceeded {budget_s} s budget")) }
        });
        match &result {
            Ok(detail) => report(format!("[PASS] {id} {title} ({secs:.2} s): {detail}")),
            Err(detail) => {
                report(format!("[FAIL] {id} {title} ({secs:.2} s): {detail}"));
                self.failures.push(id.to_string());
            }
        }
    }
}

fn gradient() -> Check {
    let mut worst = 0.0f64;
    let mut worst_aggregate = 0.0f64;
    for (beta, lambda) in GRADIENT_GRID {
        for seed in 0..5 {
            let c = gradient_check(beta, lambda, seed);
            worst = worst.max(c.max_relative);
            worst_aggregate = worst_aggregate.max(c.aggregate);
        }
    }
    ensure(worst < 1e-6, || format!("max relative error {worst:.3e}"))?;
    ensure(worst_aggregate < 1e-8, || format!("aggregate relative error {worst_aggregate:.3e}"))?;
    Ok(format!("20 models, max relative error {worst:.2e}, aggregate {worst_aggregate:.2e}"))
}

fn covariance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = m.column_mean();
    let centered = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - mean[i]);
    &centered * centered.transpose() / m.ncols() as f64
}

fn whitening() -> Check {
    let mut r = rng(21);
    let mix = DMatrix::from_fn(192, 192, |i, j| {
        let v: f64 = r.random_range(-1.0..1.0);
        if i == j { 1.0 + v.abs() } else { 0.15 * v }
    });
    let z = DMatrix::from_fn(192, 2000, |_, _| r.random_range(-1.0..1.0));
    let shift = DVector::from_fn(192, |_, _| r.random_range(-2.0..2.0));
    let mut x = &mix * z;
    for mut col in x.column_iter_mut() {
        col += &shift;
    }
    let batch = PatchBatch::new(x).unwrap();

    let stats = fit_normalization(&batch, 0.0).map_err(|e| e.to_string())?;
    let white = apply_normalization(&batch, &stats).unwrap();
    let cov = covariance(white.matrix());
    let (mut off, mut diag) = (0.0f64, 0.0f64);
    for i in 0..192 {
        for j in 0..192 {
            if i == j { diag = diag.max((cov[(i, j)] - 1.0).abs()) } else { off = off.max(cov[(i, j)].abs()) }
        }
    }
    ensure(off < 1e-6 && diag < 1e-6, || format!("off-diagonal {off:.2e}, diagonal error {diag:.2e}"))?;

    let stats = fit_normalization(&batch, 0.1).unwrap();
    let cov = covariance(apply_normalization(&batch, &stats).unwrap().matrix());
    let max_var = cov.diagonal().max();
    ensure(max_var <= 1.0, || format!("variance {max_var} above 1 with regularizer"))?;
    Ok(format!("eps=0 off-diag {off:.1e}, diag {diag:.1e}; eps=0.1 max variance {max_var:.4}"))
}

fn optimizer() -> Check {
    let tight = LbfgsOptions {
        gradient_tolerance: 1e-10,
        objective_tolerance: 0.0,
        max_iterations: 1000,
        ..Default::default()
    };
    let mut rosenbrock = |x: &[f64], g: &mut [f64]| {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    };
    let out = lbfgs_minimize(&mut rosenbrock, &[-1.2, 1.0], &tight);
    let err = (out.x[0] - 1.0).abs().max((out.x[1] - 1.0).abs());
    ensure(err < 1e-5, || format!("Rosenbrock ended at {:?}", out.x))?;

    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let n = r.random_range(5..40);
        let b = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(n, n) * 0.5;
        let c = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
        let exact = a.clone().cholesky().unwrap().solve(&c);
        let mut quad = |x: &[f64], g: &mut [f64]| {
            let xv = DVector::from_column_slice(x);
            let ax = &a * &xv;
            for i in 0..n {
                g[i] = ax[i] - c[i];
            }
            0.5 * xv.dot(&ax) - c.dot(&xv)
        };
        let out = lbfgs_minimize(&mut quad, &vec![0.0; n], &tight);
        worst = worst.max((DVector::from_vec(out.x) - &exact).amax());
    }
    ensure(worst < 1e-8, || format!("quadratic error {worst:.2e}"))?;
    Ok(format!("Rosenbrock error {err:.1e} in {} iterations; 10 quadratics max error {worst:.1e}", out.iterations))
}

fn desk_training(desk: &Desk) -> Check {
    let (first, last) = (desk.trace.initial(), desk.trace.last());
    let ratio = last.objective / first.objective;
    let rho = desk.model.hyperparams.rho;
    ensure(ratio < 0.5, || format!("objective ratio {ratio:.3}"))?;
    ensure((last.mean_rho_hat - rho).abs() < 0.02, || format!("mean activation {:.4}", last.mean_rho_hat))?;
    Ok(format!(
        "J {:.2} -> {:.3} (ratio {ratio:.4}), mean activation {:.4}, {} iterations, trained in {:.1} s",
        first.objective, last.objective, last.mean_rho_hat, last.iteration, desk.seconds
    ))
}

fn channels(img: &image::RgbImage) -> ChannelImage {
    ChannelImage::from_rgb(img).unwrap()
}

fn scoring_identities(desk: &Desk) -> Check {
    let model = &desk.model;
    let images = testkit::corpus(10, 96, 96, 4000);
    for (i, img) in images.iter().enumerate() {
        let c = channels(img);
        let s = score_pair(model, &c, &c).map_err(|e| e.to_string())?.value;
        ensure(s == 1.0, || format!("image {i}: self score {s:?}"))?;
        for d in [testkit::gaussian_blur(img, 1.5), testkit::gaussian_noise(img, 15.0, i as u64)] {
            let d = channels(&d);
            let ab = score_pair(model, &c, &d).unwrap().value;
            let ba = score_pair(model, &d, &c).unwrap().value;
            ensure(ab == ba, || format!("image {i}: asymmetric {ab} vs {ba}"))?;
            ensure((0.0..=1.0).contains(&ab), || format!("image {i}: score {ab} outside [0, 1]"))?;
        }
    }
    Ok("10 images: self score exactly 1, swaps identical, all scores in [0, 1]".into())
}

fn monotonic(desk: &Desk) -> Check {
    let refs = testkit::corpus(5, 96, 96, 5000);
    let mut blur_ok = 0;
    let mut noise_ok = 0;
    for (i, r) in refs.iter().enumerate() {
        let c = channels(r);
        let score = |d: image::RgbImage| score_pair(&desk.model, &c, &channels(&d)).unwrap().value;
        let blur: Vec<f64> = [0.5f32, 1.0, 2.0, 4.0].iter().map(|&s| score(testkit::gaussian_blur(r, s))).collect();
        let noise: Vec<f64> =
            [5.0, 10.0, 20.0, 40.0].iter().map(|&s| score(testkit::gaussian_noise(r, s, 77 + i as u64))).collect();
        blur_ok += blur.windows(2).all(|w| w[0] > w[1]) as usize;
        noise_ok += noise.windows(2).all(|w| w[0] > w[1]) as usize;
    }
    ensure(blur_ok >= 4 && noise_ok >= 4, || format!("blur {blur_ok}/5, noise {noise_ok}/5"))?;
    Ok(format!("strictly decreasing: blur {blur_ok}/5, noise {noise_ok}/5"))
}

fn metric_oracles() -> Check {
    let close = |what: &str, i: usize, a: f64, b: f64| {
        ensure((a - b).abs() <= 1e-12, || format!("fixture {i}: {what} {a} vs oracle {b}"))
    };
    let mut r = rng(77);
    for i in 0..100 {
        let n = r.random_range(5..150);
        let obj = random_scores(&mut r, n);
        let pred = random_scores(&mut r, n);
        let mos = random_scores(&mut r, n);
        let std: Vec<f64> = (0..n).map(|_| r.random_range(0.1..2.0)).collect();
        let m = compute_metrics(&obj, &pred, &mos, Some(&std)).map_err(|e| e.to_string())?;
        close("srcc", i, m.srcc, naive_spearman(&obj, &mos))?;
        close("spearman", i, spearman(&pred, &mos).unwrap(), naive_spearman(&pred, &mos))?;
        close("plcc", i, m.plcc, naive_pearson(&pred, &mos))?;
        close("pearson", i, pearson(&obj, &mos).unwrap(), naive_pearson(&obj, &mos))?;
        close("rmse", i, m.rmse, naive_rmse(&pred, &mos))?;
        close("outlier ratio", i, m.outlier_ratio.unwrap(), naive_outlier_ratio(&pred, &mos, &std))?;

        let bins = r.random_range(2..20);
        let (ha, hb) = joint_histograms(&pred, &mos, bins).unwrap().unwrap();
        let (oa, ob) = naive_histograms(&pred, &mos, bins);
        for k in 0..bins {
            close("histogram bin", i, ha[k], oa[k])?;
            close("histogram bin", i, hb[k], ob[k])?;
        }
        let d = histogram_distances(&pred, &mos, bins).unwrap();
        close("emd", i, d.emd, naive_emd(&oa, &ob))?;
        close("kl", i, d.kl, naive_kl(&oa, &ob, sparse_iqa::eval::KL_SMOOTHING))?;
        close("js", i, d.js, naive_js(&oa, &ob))?;
        close("hi", i, d.hi, naive_intersection_distance(&oa, &ob))?;
        close("l2", i, d.l2, naive_l2(&oa, &ob))?;
        ensure(distances(&ha, &hb) == d, || "distances differ from histogram_distances".into())?;
    }
    Ok("100 fixtures: correlations, rmse, outlier ratio, bins and five distances within 1e-12".into())
}

/// Monotone curves: generic shapes plus MOS-like and DMOS-like scales.
const LOGISTIC_FIXTURES: [([f64; 5], f64, f64); 6] = [
    ([2.0, 1.5, 0.3, 0.1, -0.2], -2.0, 2.0),
    ([1.0, 3.0, 0.5, 0.2, 0.1], 0.0, 1.0),
    ([60.0, 8.0, 0.5, 10.0, 40.0], 0.0, 1.0),
    ([-50.0, 6.0, 0.6, -5.0, 50.0], 0.0, 1.0),
    ([80.0, 12.0, 0.8, 0.0, 30.0], 0.3, 1.0),
    ([5.0, 0.8, 2.0, 0.05, 3.0], 0.0, 5.0),
];

fn regression() -> Check {
    let mut worst = 0.0f64;
    for (k, (truth, lo, hi)) in LOGISTIC_FIXTURES.iter().enumerate() {
        let truth = LogisticParams(*truth);
        let x: Vec<f64> = (0..60).map(|i| lo + (hi - lo) * i as f64 / 59.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| truth.predict(v)).collect();
        let fit = fit_logistic(&x, &y, LogisticParams::default()).map_err(|e| e.to_string())?;
        ensure(fit.warning.is_none(), || format!("fixture {k}: {:?}", fit.warning))?;
        let fitted: Vec<f64> = x.iter().map(|&v| fit.params.predict(v)).collect();
        let rmse = naive_rmse(&fitted, &y);
        worst = worst.max(rmse);
        ensure(rmse < 1e-6, || format!("fixture {k}: rmse {rmse:.2e}"))?;
        // a decreasing fit flips the sign only
        let before = spearman(&x, &y).unwrap().abs();
        let after = spearman(&fitted, &y).unwrap().abs();
        ensure(before == after, || format!("fixture {k}: srcc {before} became {after}"))?;
    }
    Ok(format!("{} fixtures, worst prediction rmse {worst:.1e}, srcc unchanged", LOGISTIC_FIXTURES.len()))
}

fn round_trip() -> Check {
    let model = small_model();
    let bytes = encode_model(model).map_err(|e| e.to_string())?;
    let back = decode_model(&bytes).map_err(|e| e.to_string())?;
    let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
    ensure(bits(back.params()) == bits(model.params()), || "parameters changed".into())?;
    ensure(back.stats.zca.iter().zip(model.stats.zca.iter()).all(|(a, b)| a.to_bits() == b.to_bits()), || {
        "whitening matrix changed".into()
    })?;
    ensure(encode_model(&back).unwrap() == bytes, || "re-encoding differs".into())?;

    let classify = |b: &[u8]| match decode_model(b) {
        Err(Error::Model(e)) => format!("{e:?}").split(['(', ' ', '{']).next().unwrap().to_string(),
        Err(e) => format!("other: {e}"),
        Ok(_) => "accepted".into(),
    };
    let mut flipped = bytes.clone();
    *flipped.last_mut().unwrap() ^= 0x01;
    let mut magic = bytes.clone();
    magic[0] = b'X';
    let mut version = bytes.clone();
    version[8] = 2;
    let mut header = bytes.clone();
    header[20] = b'!';
    let cases: [(&str, Vec<u8>, &str); 5] = [
        ("flipped payload bit", flipped, "Checksum"),
        ("truncated", bytes[..bytes.len() - 8].to_vec(), "Dimension"),
        ("bad magic", magic, "BadMagic"),
        ("future version", version, "VersionMismatch"),
        ("broken header", header, "Header"),
    ];
    for (what, data, expected) in cases {
        let got = classify(&data);
        ensure(got == expected, || format!("{what}: expected {expected}, got {got}"))?;
    }
    Ok(format!("{} bytes bit-exact; 5 corruption classes rejected correctly", bytes.len()))
}

// ---- optional external-data criterion ----

fn images_under(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap().flatten() {
        let p = entry.path();
        if p.is_dir() {
            images_under(&p, out);
        } else if p
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| ["png", "jpg", "jpeg", "bmp"].contains(&e.to_ascii_lowercase().as_str()))
        {
            out.push(p);
        }
    }
}

fn external(corpus: &Path, pairs: &Path, mos: &Path) -> Check {
    let mut files = Vec::new();
    images_under(corpus, &mut files);
    files.sort();
    files.truncate(1000);
    let batches: Vec<PatchBatch> = files
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let img = ChannelImage::open(p).ok()?;
            sample_random_patches_stream(&img, 100, 0, i as u64).ok()
        })
        .collect();
    let raw = PatchBatch::concat(&batches);
    let stats = fit_normalization(&raw, 0.1).map_err(|e| e.to_string())?;
    let white = apply_normalization(&raw, &stats).unwrap();
    let (model, _) = sparse_iqa::decoder::train(&white, &DecoderHyperparams::default(), &stats, 0)
        .map_err(|e| e.to_string())?;

    let base = pairs.parent().unwrap_or(Path::new(""));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(pairs)
        .map_err(|e| e.to_string())?;
    let mut scores = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| e.to_string())?;
        let r = ChannelImage::open(base.join(&row[2])).map_err(|e| e.to_string())?;
        let d = ChannelImage::open(base.join(&row[3])).map_err(|e| e.to_string())?;
        let s = score_pair(&model, &r, &d).map_err(|e| e.to_string())?;
        scores.push(ScoreRecord { image_id: row[0].into(), reference_id: row[1].into(), score: s.value });
    }
    let subjective: Vec<SubjectiveRecord> = sparse_iqa::eval::read_subjective(mos).map_err(|e| e.to_string())?;
    let report = evaluate_records(&scores, &subjective, &EvalConfig::default()).map_err(|e| e.to_string())?.report;
    let (plcc, srcc) = (report.plcc.abs(), report.srcc.abs());
    ensure(plcc >= 0.93 && srcc >= 0.93, || format!("plcc {plcc:.4}, srcc {srcc:.4}"))?;
    Ok(format!("plcc {plcc:.4}, srcc {srcc:.4} on {} images", report.n_images))
}

#[test]
fn acceptance() {
    let mut runner = Runner { failures: Vec::new() };
    runner.run("AC1", "gradient correctness", 10.0, gradient);
    runner.run("AC2", "whitening", 5.0, whitening);
    runner.run("AC3", "optimizer", 1.0, optimizer);

    let mut desk = None;
    runner.run("AC4", "desk-scale training", 300.0, || {
        let d = train_desk_model();
        let r = desk_training(&d);
        desk = Some(d);
        r
    });
    let desk_ref = desk.as_ref();
    let need_desk = || desk_ref.ok_or_else(|| "desk model unavailable".to_string());
    runner.run("AC5", "scoring identities", 60.0, || scoring_identities(need_desk()?));
    runner.run("AC6", "monotonicity", 60.0, || monotonic(need_desk()?));
    runner.run("AC7", "metric oracles", 10.0, metric_oracles);
    runner.run("AC8", "logistic regression", 10.0, regression);
    runner.run("AC9", "model round trip", 60.0, round_trip);

    let vars = ["SPARSE_IQA_EXT_CORPUS", "SPARSE_IQA_EXT_PAIRS", "SPARSE_IQA_EXT_MOS"].map(std::env::var_os);
    match vars {
        [Some(c), Some(p), Some(m)] => {
            runner.run("AC10", "external database", 7200.0, || external(c.as_ref(), p.as_ref(), m.as_ref()))
        }
        _ => report("[SKIP] AC10 external database: SPARSE_IQA_EXT_* not set".into()),
    }

    assert!(runner.failures.is_empty(), "failed: {}", runner.failures.join(", "));
}
