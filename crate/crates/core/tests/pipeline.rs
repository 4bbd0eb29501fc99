mod common;

use std::io::Write;

use common::*;
use sparse_iqa::eval::{
    compute_metrics, evaluate_database, fit_logistic, histogram_distances, EvalConfig, LogisticParams,
};
use sparse_iqa::scorer::{represent_with, score_pair, score_pair_with};
use sparse_iqa::{ChannelImage, Execution, SuppressionPolicy};

fn channels(img: &image::RgbImage) -> ChannelImage {
    ChannelImage::from_rgb(img).unwrap()
}

#[test]
fn self_and_swapped_scores() {
    let model = small_model();
    for (i, img) in testkit::corpus(4, 64, 48, 300).iter().enumerate() {
        let c = channels(img);
        assert_eq!(score_pair(model, &c, &c).unwrap().value, 1.0);
        let d = channels(&testkit::gaussian_noise(img, 12.0, i as u64));
        let ab = score_pair(model, &c, &d).unwrap();
        let ba = score_pair(model, &d, &c).unwrap();
        assert_eq!(ab, ba);
        assert!(ab.value > 0.0 && ab.value < 1.0);
    }
}

#[test]
fn heavier_blur_scores_lower_on_average() {
    let model = small_model();
    let refs = testkit::corpus(4, 64, 64, 310);
    let mut totals = [0.0; 4];
    for r in &refs {
        let c = channels(r);
        for (k, sigma) in [0.5f32, 1.0, 2.0, 4.0].iter().enumerate() {
            totals[k] += score_pair(model, &c, &channels(&testkit::gaussian_blur(r, *sigma))).unwrap().value;
        }
    }
    assert!(totals.windows(2).all(|w| w[0] > w[1]), "{totals:?}");
}

#[test]
fn execution_modes_agree_bitwise() {
    let model = small_model();
    let img = channels(&testkit::scene(80, 72, 9));
    let seq = represent_with(Execution::Sequential, model, &img).unwrap();
    let par = represent_with(Execution::Parallel, model, &img).unwrap();
    assert_eq!(seq.values, par.values);
    let d = channels(&testkit::gaussian_blur(&testkit::scene(80, 72, 9), 1.0));
    let policy = SuppressionPolicy::default();
    assert_eq!(
        score_pair_with(Execution::Sequential, model, &policy, &img, &d).unwrap(),
        score_pair_with(Execution::Parallel, model, &policy, &img, &d).unwrap()
    );
}

#[test]
fn policies_change_scores_but_not_identities() {
    let model = small_model();
    let img = testkit::scene(64, 64, 12);
    let c = channels(&img);
    let d = channels(&testkit::gaussian_blur(&img, 2.0));
    let mut seen = Vec::new();
    for policy in [
        SuppressionPolicy::MeanRelative { tau: 0.0 },
        SuppressionPolicy::MeanRelative { tau: 0.5 },
        SuppressionPolicy::Absolute { threshold: 0.01 },
    ] {
        assert_eq!(score_pair_with(Execution::Sequential, model, &policy, &c, &c).unwrap().value, 1.0);
        seen.push(score_pair_with(Execution::Sequential, model, &policy, &c, &d).unwrap().value);
    }
    assert!(seen[0] != seen[1] || seen[1] != seen[2], "{seen:?}");
}

#[test]
fn database_evaluation_composes_its_parts() {
    let dir = tempfile::tempdir().unwrap();
    let obj = [0.91, 0.42, 0.77, 0.15, 0.60];
    let mos = [78.0, 35.0, 70.0, 12.0, 41.0];
    let std = [6.0, 5.0, 4.0, 3.0, 5.5];
    let mut s = std::fs::File::create(dir.path().join("scores.tsv")).unwrap();
    writeln!(s, "# model=m policy=mean-relative tau=0.5").unwrap();
    writeln!(s, "image_id\treference_id\tscore").unwrap();
    for (i, o) in obj.iter().enumerate() {
        writeln!(s, "img{i}\tref{}\t{o}", i % 2).unwrap();
    }
    let mut m = std::fs::File::create(dir.path().join("mos.csv")).unwrap();
    writeln!(m, "image_id,mos,mos_std").unwrap();
    for i in (0..5).rev() {
        writeln!(m, "img{i},{},{}", mos[i], std[i]).unwrap();
    }
    drop((s, m));

    let config = EvalConfig::default();
    let got = evaluate_database(&dir.path().join("scores.tsv"), &dir.path().join("mos.csv"), &config).unwrap();

    let fit = fit_logistic(&obj, &mos, LogisticParams::default()).unwrap();
    let regressed: Vec<f64> = obj.iter().map(|&x| fit.params.predict(x)).collect();
    let metrics = compute_metrics(&obj, &regressed, &mos, Some(&std)).unwrap();
    let hist = histogram_distances(&mos, &regressed, config.bins).unwrap();

    let r = &got.report;
    assert_eq!(r.n_images, 5);
    assert_eq!(r.regression, fit.params);
    assert_eq!((r.rmse, r.plcc, r.srcc, r.outlier_ratio), (metrics.rmse, metrics.plcc, metrics.srcc, metrics.outlier_ratio));
    assert_eq!(r.histogram, hist);
    assert_eq!(r.score_provenance, ["model=m policy=mean-relative tau=0.5"]);
    let ids: Vec<&str> = got.scatter.iter().map(|p| p.image_id.as_str()).collect();
    assert_eq!(ids, ["img0", "img1", "img2", "img3", "img4"]);
    assert_eq!(got.scatter[2].regressed, regressed[2]);
}
