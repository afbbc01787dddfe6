//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! printed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{ar_from_reflection, ar_series, random_stable_model, rng};
use mipdc_core::burg::{burg_fit, burg_psd, select_order_reflection};
use mipdc_core::classification::{build_feature_vectors, cross_validate, CvConfig, DEFAULT_C, DEFAULT_GAMMA};
use mipdc_core::connectivity::{flow_map, pdc, PdcTensor};
use mipdc_core::discriminability::{ranksum_test, RankSumMethod};
use mipdc_core::grid::{Band, FreqGrid};
use mipdc_core::mvar::{fit_mvar_samples, select_order_aic_samples, MvarModel};
use mipdc_core::pipeline::{connectivity_track, power_track, BurgSettings, MvarSettings, PowerScale, PowerTrack};
use mipdc_core::preprocess::{preprocess_recording, PreprocessConfig};
use mipdc_core::signal_io::{segment_epochs, ClassLabel, EpochSet};
use mipdc_core::synth::{generate, make_two_class_scenario, GroundTruth, ScenarioConfig};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn grid() -> Vec<f64> {
    FreqGrid::default().freqs()
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn pdc_normalization() -> Outcome {
    let start = Instant::now();
    let freqs = grid();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let m = [2, 4, 16][k % 3];
        let p = 1 + k % 6;
        let model = random_stable_model(&mut r, m, p, 0.95);
        let t = pdc(&model, &freqs, 1200.0).unwrap();
        for j in 0..m {
            for f in 0..freqs.len() {
                let mass: f64 = (0..m).map(|i| t.get(i, j, f).powi(2)).sum();
                worst = worst.max((mass - 1.0).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && within(elapsed, 10),
        format!(
            "100 models, max |column mass - 1| = {worst:.2e}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Directed coupling `(from, to, lag, weight)`.
type Coupling = (usize, usize, usize, f64);

/// Sparse models with AR(2) self-dynamics and a fixed set of directed edges.
fn graph_model(m: usize, edges: &[Coupling]) -> MvarModel {
    let mut coeffs = vec![DMatrix::<f64>::zeros(m, m); 2];
    for c in 0..m {
        let theta = 2.0 * std::f64::consts::PI * (0.08 + 0.05 * c as f64);
        coeffs[0][(c, c)] = 2.0 * 0.6 * theta.cos();
        coeffs[1][(c, c)] = -0.36;
    }
    for &(from, to, lag, w) in edges {
        coeffs[lag - 1][(to, from)] = w;
    }
    MvarModel::new(coeffs, DMatrix::identity(m, m)).unwrap()
}

fn structural_zeros() -> Outcome {
    let start = Instant::now();
    let freqs = grid();
    let fs = 100.0;
    let graphs: [(usize, Vec<Coupling>); 3] = [
        (3, vec![(0, 1, 1, 0.5), (1, 2, 2, -0.4)]),
        (4, vec![(0, 1, 1, 0.4), (2, 3, 1, 0.3), (3, 0, 2, -0.3)]),
        (
            5,
            vec![(4, 0, 1, 0.5), (0, 2, 2, 0.35), (1, 3, 1, -0.45), (2, 1, 1, 0.3)],
        ),
    ];
    let mut zero_ok = true;
    let mut worst = 0.0f64;
    for (g, (m, edges)) in graphs.iter().enumerate() {
        let model = graph_model(*m, edges);
        let truth = pdc(&model, &freqs, fs).unwrap();
        for i in 0..*m {
            for j in 0..*m {
                let is_edge = i == j || edges.iter().any(|e| e.0 == j && e.1 == i);
                if !is_edge {
                    zero_ok &= (0..freqs.len()).all(|f| truth.get(i, j, f) == 0.0);
                }
            }
        }
        let x = generate(&GroundTruth::new(model, 10 + g as u64), 50_000, 500).unwrap();
        let fitted = pdc(&fit_mvar_samples(&x, 2).unwrap(), &freqs, fs).unwrap();
        let sup = truth
            .values()
            .iter()
            .zip(fitted.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(sup);
    }
    let elapsed = start.elapsed();
    outcome(
        zero_ok && worst <= 0.05 && within(elapsed, 60),
        format!(
            "3 graphs, non-edges exactly zero: {zero_ok}, fitted sup-norm {worst:.4}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

const REFLECTIONS: [f64; 12] = [0.6, -0.5, 0.4, 0.3, -0.3, 0.25, 0.3, -0.25, 0.2, 0.25, -0.2, 0.3];

fn order_selection() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    for seed in 0..100u64 {
        let model = random_stable_model(&mut rng(100 + seed), 4, 3, 0.9);
        let x = generate(&GroundTruth::new(model, seed), 5_000, 300).unwrap();
        if select_order_aic_samples(&x, 10).unwrap() == 3 {
            hits += 1;
        }
    }
    let a = ar_from_reflection(&REFLECTIONS);
    let burg_orders: Vec<usize> = (0..5)
        .map(|seed| select_order_reflection(&ar_series(&a, 10_000, seed), 20, 0.1).unwrap())
        .collect();
    let elapsed = start.elapsed();
    outcome(
        hits >= 95 && burg_orders.iter().all(|&o| o == 12) && within(elapsed, 120),
        format!(
            "AIC true order in {hits}/100 seeds, reflection scan orders {burg_orders:?}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn burg_psd_correctness() -> Outcome {
    let fs = 200.0;
    let (f0, r) = (10.0, 0.95);
    let theta = 2.0 * std::f64::consts::PI * f0 / fs;
    let a = [2.0 * r * theta.cos(), -r * r];
    let x = ar_series(&a, 20_000, 3);
    let model = burg_fit(&x, 2).unwrap();
    let coarse: Vec<f64> = (0..200).map(|k| k as f64 * 0.5).collect();
    let psd = burg_psd(&model, &coarse, fs).unwrap();
    let peak = coarse[(0..psd.len()).max_by(|&i, &j| psd[i].total_cmp(&psd[j])).unwrap()];
    let fine: Vec<f64> = (0..1000).map(|k| k as f64 * 0.1).collect();
    let dense = burg_psd(&model, &fine, fs).unwrap();
    // The last trapezoid ends at Nyquist, where the density is evaluated at 99.9 Hz.
    let integral: f64 = dense.windows(2).map(|w| 0.05 * (w[0] + w[1])).sum::<f64>() + 0.1 * dense[999];
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
    let rel = (integral - var).abs() / var;
    outcome(
        (peak - f0).abs() <= 0.5 && rel <= 0.10,
        format!(
            "peak {peak} Hz, integral {integral:.3} vs variance {var:.3} ({:.2}% off)",
            100.0 * rel
        ),
    )
}

fn subsets(n: usize, k: usize) -> Vec<u32> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize == k).collect()
}

fn rank_sum(mask: u32, n: usize) -> usize {
    (0..n).filter(|&r| mask & (1 << r) != 0).map(|r| r + 1).sum()
}

fn wilcoxon_oracle() -> Outcome {
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let mut all_exact = true;
    for n in 2..=12usize {
        for nx in 1..n {
            let all = subsets(n, nx);
            let sums: Vec<usize> = all.iter().map(|&m| rank_sum(m, n)).collect();
            for (&mask, &w) in all.iter().zip(&sums) {
                let le = sums.iter().filter(|&&s| s <= w).count() as f64;
                let ge = sums.iter().filter(|&&s| s >= w).count() as f64;
                let expected = (2.0 * le.min(ge) / all.len() as f64).min(1.0);
                let x: Vec<f64> = (0..n)
                    .filter(|r| mask & (1 << r) != 0)
                    .map(|r| (r + 1) as f64)
                    .collect();
                let y: Vec<f64> = (0..n)
                    .filter(|r| mask & (1 << r) == 0)
                    .map(|r| (r + 1) as f64)
                    .collect();
                let res = ranksum_test(&x, &y).unwrap();
                all_exact &= res.method == RankSumMethod::Exact;
                worst = worst.max((res.p_value - expected).abs());
                checked += 1;
            }
        }
    }
    let p = ranksum_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap().p_value;
    outcome(
        worst <= 1e-12 && all_exact && p == 0.1,
        format!("{checked} rank assignments, max deviation {worst:.1e}, p({{1,2,3}} vs {{4,5,6}}) = {p}"),
    )
}

fn analysis_bands() -> Vec<(String, Band)> {
    vec![("alpha".into(), Band::ALPHA), ("beta".into(), Band::BETA)]
}

fn edge_screening() -> Outcome {
    let start = Instant::now();
    let freqs = grid();
    let (from, to) = (5, 6);
    // Per band: seeds recovering the edge as Class1, false edges in total.
    let mut hits = [0usize; 2];
    let mut false_edges = [0usize; 2];
    let mut distinct = std::collections::BTreeSet::new();
    for seed in 1..=10u64 {
        let config = ScenarioConfig {
            rhythm: None,
            seed,
            ..ScenarioConfig::default()
        };
        let scenario = make_two_class_scenario(&config).unwrap();
        let track = connectivity_track(
            &scenario.epochs,
            &freqs,
            &MvarSettings::default(),
            &analysis_bands(),
            0.001,
        )
        .unwrap();
        for (b, band) in track.bands.iter().enumerate() {
            let edges = &band.significance.edges;
            if edges
                .iter()
                .any(|e| (e.from, e.to) == (from, to) && e.predominant == ClassLabel::Class1)
            {
                hits[b] += 1;
            }
            for e in edges.iter().filter(|e| (e.from, e.to) != (from, to)) {
                false_edges[b] += 1;
                distinct.insert((seed, e.from, e.to));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        hits.iter().all(|&h| h >= 9) && false_edges.iter().all(|&f| f <= 3) && within(elapsed, 300),
        format!(
            "CZ->C4 as Class1 in alpha {}/10, beta {}/10 seeds; false edges alpha {}, beta {}, distinct {}; {:.1} s",
            hits[0],
            hits[1],
            false_edges[0],
            false_edges[1],
            distinct.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn flow_consistency() -> Outcome {
    let freqs = grid();
    let band = Band::BETA;
    let n_freqs = band.indices(&freqs).len() as f64;
    let mut r = rng(7);
    let mut max_ratio = 0.0f64;
    for k in 0..60 {
        let m = [2, 4, 16][k % 3];
        let model = random_stable_model(&mut r, m, 1 + k % 4, 0.95);
        let t = pdc(&model, &freqs, 1200.0).unwrap();
        let fm = flow_map(&[t], &band, ClassLabel::Class1).unwrap();
        max_ratio = max_ratio.max(fm.outflow.iter().fold(0.0, |a: f64, &v| a.max(v)) / n_freqs);
    }

    let scenario = make_two_class_scenario(&ScenarioConfig {
        epochs_per_class: 30,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let settings = MvarSettings {
        max_order: 4,
        fixed_order: None,
    };
    let track = connectivity_track(&scenario.epochs, &freqs, &settings, &analysis_bands(), 0.001).unwrap();
    let mut pipeline_ratio = 0.0f64;
    for b in &track.bands {
        for fm in &b.flows {
            let nf = fm.n_freqs as f64;
            pipeline_ratio = pipeline_ratio.max(fm.outflow.iter().fold(0.0, |a: f64, &v| a.max(v)) / nf);
        }
    }

    // Independent channels: only the diagonal of PDC is non-zero.
    let mut independent = 0.0f64;
    for m in [2, 4, 16] {
        let coeffs = vec![DMatrix::from_diagonal(&nalgebra::DVector::from_fn(m, |i, _| {
            0.3 + 0.04 * i as f64
        }))];
        let model = MvarModel::new(coeffs, DMatrix::identity(m, m)).unwrap();
        let tensors: Vec<PdcTensor> = (0..3).map(|_| pdc(&model, &freqs, 1200.0).unwrap()).collect();
        for band in [Band::ALPHA, Band::BETA] {
            let fm = flow_map(&tensors, &band, ClassLabel::Class2).unwrap();
            independent = fm
                .outflow
                .iter()
                .chain(&fm.inflow)
                .fold(independent, |a, &v| a.max(v.abs()));
        }
    }
    outcome(
        max_ratio <= 1.0 + 1e-12 && pipeline_ratio <= 1.0 && independent == 0.0,
        format!(
            "max outflow / band size: single epoch {max_ratio:.4}, 30-epoch pipeline {pipeline_ratio:.4}; \
             independent-channel flows max {independent}"
        ),
    )
}

/// Default scenario (class-1 rhythm on channel 13 at 24 Hz), filtered as the
/// pipeline does by default, then the power track.
fn power_run(seed: u64) -> (EpochSet, PowerTrack) {
    let scenario = make_two_class_scenario(&ScenarioConfig {
        seed,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let rec = preprocess_recording(&scenario.recording, &PreprocessConfig::default()).unwrap();
    let epochs = segment_epochs(&rec, 1.0).unwrap();
    let cv = CvConfig {
        seed,
        ..CvConfig::default()
    };
    let track = power_track(&epochs, &grid(), &BurgSettings::default(), PowerScale::Decibel, &cv).unwrap();
    (epochs, track)
}

fn classification() -> Outcome {
    let (epochs, track) = power_run(1);
    let cv = CvConfig::default();
    assert_eq!(
        (cv.c_penalty, cv.gamma, cv.n_repeats, cv.split_fraction),
        (DEFAULT_C, DEFAULT_GAMMA, 100, 0.5)
    );
    let (features, labels) =
        build_feature_vectors(&epochs, &track.feature, track.burg_orders[track.feature.channel]).unwrap();
    let mut null_means = Vec::new();
    let mut null_stds = Vec::new();
    for s in 0..10u64 {
        let mut shuffled = labels.clone();
        shuffled.shuffle(&mut rng(1000 + s));
        let res = cross_validate(&features, &shuffled, &CvConfig { seed: s, ..cv.clone() }).unwrap();
        null_means.push(res.mean_accuracy_pct);
        null_stds.push(res.std_accuracy_pct);
    }
    let null = null_means.iter().sum::<f64>() / null_means.len() as f64;
    let row = track.cv.to_row(&track.feature.channel_name, &track.feature.band);
    let singles: Vec<String> = null_means.iter().map(|v| format!("{v:.1}")).collect();
    outcome(
        row.mean > 90.0 && (null - 50.0).abs() <= 6.0 && row.std.is_finite(),
        format!(
            "separable: {:.1} ± {:.1} % ({}, {}-{} Hz, n = {}); shuffled null mean over 10 shuffles {null:.1} % \
             (single shuffles {}; SD {:.1} to {:.1})",
            row.mean,
            row.std,
            row.channel,
            row.band[0],
            row.band[1],
            row.n,
            singles.join(", "),
            null_stds.iter().cloned().fold(f64::INFINITY, f64::min),
            null_stds.iter().cloned().fold(0.0, f64::max),
        ),
    )
}

fn rsquared_localization() -> Outcome {
    let mut good = 0;
    let mut picks = Vec::new();
    for seed in 1..=5u64 {
        let (_, track) = power_run(seed);
        let f = &track.feature;
        let ok = f.channel == 13 && f.center_hz == 24.0 && f.band == Band::new(23.0, 25.0).unwrap();
        good += ok as usize;
        picks.push(format!("({}, {} Hz)", f.channel, f.center_hz));
    }
    outcome(
        good == 5,
        format!("argmax over 5 seeds: {}; band 23-25 Hz in {good}/5", picks.join(" ")),
    )
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "csv" | "svg")))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let root = std::env::temp_dir().join(format!("mipdc-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    let run = |name: &str, jobs: &str| {
        let out = root.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_mipdc"))
            .args(["all", "--seed", "7", "--jobs", jobs, "--set", "svm.repeats=30", "--out"])
            .arg(&out)
            .output()
            .expect("spawn mipdc");
        (status.status.success(), read_outputs(&out))
    };
    let (ok_a, a) = run("a", "1");
    let (ok_b, b) = run("b", "2");
    let _ = std::fs::remove_dir_all(&root);
    let identical = a == b;
    let diff: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    outcome(
        ok_a && ok_b && identical && a.iter().any(|f| f.0 == "report.json"),
        format!(
            "{} output files compared across two runs (1 and 2 workers), differing: {diff:?}",
            a.len()
        ),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 10] = [
        ("PDC normalization", pdc_normalization),
        ("structural-zero fidelity", structural_zeros),
        ("order selection", order_selection),
        ("Burg PSD correctness", burg_psd_correctness),
        ("Wilcoxon oracle", wilcoxon_oracle),
        ("edge screening end to end", edge_screening),
        ("flow-map consistency", flow_consistency),
        ("classification track", classification),
        ("r² map localization", rsquared_localization),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failures += !o.pass as usize;
        println!(
            "criterion {:>2} {}: {} | {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
