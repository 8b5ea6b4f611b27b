//! The seven acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line to stderr, bypassing output capture.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use ssi_cli::experiment::{fit_and_score, fit_autoencoder, CorpusData, FeatureSets};
use ssi_cli::sweep::SweepTable;
use ssi_cli::PipelineConfig;
use ssi_core::autoenc::{build_autoencoder, AutoencoderConfig};
use ssi_core::estimator::{EstimatorConfig, WindowSpec};
use ssi_core::evalmetrics::{evaluate, nmse, pearson, Normalizer};
use ssi_core::mgclsp::{read_params, MgcLspVector, LSP_ORDER};
use ssi_core::nncore::{chain_specs, gradient_check, Activation, Mlp};
use ssi_core::synthcorpus::{Manifest, Split};
use ssi_core::vocoder::{
    b2mc, coeff_to_lsp, filter_excitation, frame_filter, gnorm, ignorm, lsp_to_coeff, mc2b, mglsa_synthesize,
    read_wav, FrameFilter, MglsaFilter, VocoderConfig,
};

fn verdict(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().lock().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_1_weight_counts() {
    let published = [12.6, 46.2, 4.8, 5.3, 6.6, 8.7, 9.7, 8.9, 11.0, 13.1];
    let table = SweepTable::counts(&PipelineConfig::default().sweep, &EstimatorConfig::default());
    let mut worst = 0.0f64;
    for (row, want) in table.rows.iter().zip(published) {
        worst = worst.max((row.weights as f64 / 1e6 - want).abs());
    }
    let rows_ok = table.rows.len() == published.len() && worst <= 0.05;

    let mut encoders_ok = true;
    for (n, millions) in [(64, 0.5), (128, 1.0), (256, 2.1), (512, 4.2)] {
        let cfg = AutoencoderConfig {
            bottleneck: n,
            ..Default::default()
        };
        let exact = 8192 * n as u64;
        let built = build_autoencoder(&cfg).unwrap().layers()[0].weights.len() as u64;
        encoders_ok &= cfg.encoder_weights() == exact
            && built == exact
            && (exact as f64 / 1e6 - millions).abs() <= 0.05;
    }
    verdict(
        1,
        rows_ok && encoders_ok,
        &format!("max row deviation {worst:.4}M over {} rows; encoder sizes exact: {encoders_ok}", table.rows.len()),
    );
}

#[test]
fn criterion_2_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut params = 0;
    for net in 0..50 {
        let depth = rng.random_range(1..=4);
        let mut dims = vec![rng.random_range(1..=6)];
        for _ in 0..depth {
            dims.push(rng.random_range(1..=7));
        }
        let batch = rng.random_range(1..=4);
        let l2 = if net % 2 == 0 { 0.0 } else { rng.random_range(1e-4..1e-2) };
        let model = Mlp::<f64>::new(&chain_specs(&dims, Activation::SILU, Activation::Linear), net).unwrap();
        let inputs: Vec<f64> = (0..batch * dims[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
        let targets: Vec<f64> = (0..batch * dims[depth]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let check = gradient_check(&model, &inputs, &targets, batch, l2, 1e-5, 1e-6).unwrap();
        worst = worst.max(check.max_relative_error);
        params += check.parameters;
    }
    verdict(
        2,
        worst < 1e-4,
        &format!("max relative error {worst:.3e} over {params} parameters of 50 networks"),
    );
}

/// Strictly increasing frequencies in `(0, pi)` with random spacing.
fn random_lsp(order: usize, rng: &mut ChaCha8Rng) -> MgcLspVector {
    let gaps: Vec<f64> = (0..=order).map(|_| rng.random_range(0.15..1.0)).collect();
    let total: f64 = gaps.iter().sum();
    let mut acc = 0.0;
    let lsp = gaps[..order]
        .iter()
        .map(|g| {
            acc += g / total * PI;
            acc
        })
        .collect();
    MgcLspVector::new(rng.random_range(-3.0..3.0), lsp).unwrap()
}

fn closed_form_db(f: &FrameFilter, cfg: &VocoderConfig, w: f64) -> f64 {
    let z1 = Complex::from_polar(1.0, -w);
    let allpass = (z1 - cfg.alpha) / (1.0 - cfg.alpha * z1);
    let mut phi = (1.0 - cfg.alpha * cfg.alpha) * z1 / (1.0 - cfg.alpha * z1);
    let mut sum = Complex::new(1.0, 0.0);
    for m in 1..=cfg.order {
        sum += f.coeffs[m] * phi;
        phi *= allpass;
    }
    20.0 * (f.amplitude * sum.norm().powf(1.0 / cfg.gamma)).log10()
}

#[test]
fn criterion_3_vocoder_math() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = VocoderConfig::default();

    let mut lsp_err = 0.0f64;
    for i in 0..1000 {
        let order = 2 + i % 23;
        let v = random_lsp(order, &mut rng);
        let back = coeff_to_lsp(&lsp_to_coeff(&v).unwrap()).unwrap();
        lsp_err = lsp_err.max((back.gain - v.gain).abs());
        for (a, b) in back.lsp.iter().zip(&v.lsp) {
            lsp_err = lsp_err.max((a - b).abs());
        }
    }

    let mut pair_err = 0.0f64;
    for _ in 0..1000 {
        let c: Vec<f64> = (0..=cfg.order).map(|_| rng.random_range(-0.5..0.5)).collect();
        let round = b2mc(&mc2b(&c, cfg.alpha), cfg.alpha);
        let norm = gnorm(&c, cfg.gamma).unwrap();
        let back = ignorm(&norm, cfg.gamma).unwrap();
        for k in 0..c.len() {
            pair_err = pair_err.max((round[k] - c[k]).abs()).max((back[k] - c[k]).abs());
        }
    }

    let mut filt = MglsaFilter::new(cfg.order, cfg.alpha, cfg.stage().unwrap());
    let zeros = vec![0.0; cfg.order + 1];
    let x: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut identity = x.iter().all(|&s| filt.process(s, &zeros) == s);
    let flat = MgcLspVector::new(0.0, (1..=LSP_ORDER).map(|k| k as f64 * PI / 25.0).collect()).unwrap();
    let flat_filter = frame_filter(&flat, &cfg).unwrap();
    let excitation: Vec<f64> = (0..ssi_core::vocoder::frame_bounds(3, &cfg)[3]).map(|_| rng.random_range(-1.0..1.0)).collect();
    let through = filter_excitation(&excitation, &vec![flat_filter; 3], &cfg).unwrap();
    identity &= through.iter().zip(&excitation).all(|(y, x)| (y - x).abs() < 1e-9);

    let n = 16384;
    let mut db_err = 0.0f64;
    let mut settled = true;
    for _ in 0..10 {
        let v = random_lsp(LSP_ORDER, &mut rng);
        let f = frame_filter(&v, &cfg).unwrap();
        let mut filt = MglsaFilter::new(cfg.order, cfg.alpha, cfg.stage().unwrap());
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|i| Complex::new(filt.process(if i == 0 { f.amplitude } else { 0.0 }, &f.coeffs), 0.0))
            .collect();
        let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
        settled &= buf[n - 64..].iter().all(|c| c.norm() < 1e-9 * peak);
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        for g in 0..64 {
            let bin = 1 + g * (n / 2 - 2) / 63;
            let w = 2.0 * PI * bin as f64 / n as f64;
            let measured = 20.0 * buf[bin].norm().log10();
            db_err = db_err.max((measured - closed_form_db(&f, &cfg, w)).abs());
        }
    }

    verdict(
        3,
        lsp_err < 1e-8 && pair_err < 1e-12 && identity && settled && db_err < 0.1,
        &format!(
            "lsp round trip {lsp_err:.2e}; mc2b/gnorm round trips {pair_err:.2e}; zero filter identity {identity}; impulse response max deviation {db_err:.4} dB"
        ),
    );
}

#[test]
fn criterion_4_metric_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let target: Vec<Vec<f64>> = (0..300).map(|_| (0..25).map(|d| rng.random_range(-1.0..1.0) * (d + 1) as f64).collect()).collect();
    let n = target.len() as f64;
    let means: Vec<f64> = (0..25).map(|d| target.iter().map(|r| r[d]).sum::<f64>() / n).collect();
    let mean_pred = vec![means; target.len()];
    let (_, per_dim) = nmse(&mean_pred, &target).unwrap();
    let mean_ok = per_dim.iter().all(|&v| v == 1.0);

    let id = evaluate(&target, &target, &Normalizer::Evaluation).unwrap();
    let identity_ok = id.nmse_mean == 0.0 && (id.corr_mean - 1.0).abs() < 1e-12;

    let pred: Vec<Vec<f64>> = target.iter().map(|r| r.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect()).collect();
    let (base, _) = pearson(&pred, &target).unwrap();
    let mut affine_err = 0.0f64;
    for _ in 0..20 {
        let (a, b) = (rng.random_range(0.01..100.0), rng.random_range(-50.0..50.0));
        let moved: Vec<Vec<f64>> = pred.iter().map(|r| r.iter().map(|v| a * v + b).collect()).collect();
        affine_err = affine_err.max((pearson(&moved, &target).unwrap().0 - base).abs());
    }
    verdict(
        4,
        mean_ok && identity_ok && affine_err < 1e-9,
        &format!("mean predictor exactly 1: {mean_ok}; identity nmse 0 / corr 1: {identity_ok}; affine drift {affine_err:.2e}"),
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn criterion_5_autoencoder_features_and_context_help() {
    let (mut ae9, mut ae1, mut pix1) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 1..=3 {
        let mut cfg = PipelineConfig::default();
        cfg.autoencoder.bottleneck = 64;
        cfg.apply_seed(seed);
        let data = CorpusData::synthesize(&cfg.corpus).unwrap();
        let ae = fit_autoencoder(&data, &cfg.autoencoder, &mut |_| {}).unwrap();
        let encoded = FeatureSets::encoded(&ae.model, &data).unwrap();
        let pixels = FeatureSets::pixels(&data).unwrap();
        let score = |sets: &FeatureSets, width: usize| {
            let est = EstimatorConfig {
                window: WindowSpec::new(width).unwrap(),
                ..cfg.estimator.clone()
            };
            fit_and_score(sets, &est, &Normalizer::Evaluation, &mut |_| {}).unwrap().dev.nmse_mean
        };
        ae9.push(score(&encoded, 9));
        ae1.push(score(&encoded, 1));
        pix1.push(score(&pixels, 1));
    }
    let detail = format!("dev NMSE per seed: AE w=9 {ae9:.3?}, AE w=1 {ae1:.3?}, pixels w=1 {pix1:.3?}");
    let (m9, m1, mp) = (median(ae9), median(ae1), median(pix1));
    verdict(
        5,
        m9 < mp && m9 < m1,
        &format!("medians AE w=9 {m9:.3} < pixels w=1 {mp:.3} and < AE w=1 {m1:.3}; {detail}"),
    );
}

const SMOKE: &str = "[autoencoder.train]\nmax_epochs = 3\n\n[estimator.train]\nmax_epochs = 3\n";

/// Runs the whole command chain on the default corpus with a short training
/// budget under `root`.
fn run_chain(root: &Path) {
    if root.exists() {
        std::fs::remove_dir_all(root).unwrap();
    }
    std::fs::create_dir_all(root).unwrap();
    let config = root.join("ssi.toml");
    let paths = format!(
        "\n[paths]\ncorpus = {:?}\nwork = {:?}\n",
        root.join("corpus").display().to_string(),
        root.join("work").display().to_string()
    );
    std::fs::write(&config, format!("{SMOKE}{paths}")).unwrap();
    for cmd in ["gen-corpus", "train-ae", "encode", "train-est", "predict", "synth", "eval"] {
        let out = Command::new(env!("CARGO_BIN_EXE_ssi"))
            .arg("--config")
            .arg(&config)
            .arg(cmd)
            .output()
            .unwrap();
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

fn first_chain() -> &'static Path {
    static ROOT: OnceLock<PathBuf> = OnceLock::new();
    ROOT.get_or_init(|| {
        let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-chain-a");
        run_chain(&root);
        root
    })
}

#[test]
fn criterion_6_end_to_end_smoke() {
    let root = first_chain();
    let cfg = VocoderConfig::default();
    let corpus = root.join("corpus");
    let names = Manifest::read(&corpus).unwrap().names(Split::Test).to_vec();
    let mut worst_offset = 0.0f64;
    let mut worst_clip = 0.0f64;
    let mut finite = true;
    let mut complete = !names.is_empty();
    for (i, name) in names.iter().enumerate() {
        let wav = root.join("work/wav/test").join(format!("{name}.wav"));
        let params = read_params(&root.join("work/predictions/test").join(format!("{name}.param")), LSP_ORDER).unwrap();
        let Ok((samples, rate)) = read_wav(&wav) else {
            complete = false;
            continue;
        };
        let frames = params.len() as f64;
        worst_offset = worst_offset.max((samples.len() as f64 / rate as f64 - frames / 82.0).abs() * 82.0);
        let clipped = samples.iter().filter(|s| s.abs() >= 32767.0 / 32768.0).count();
        worst_clip = worst_clip.max(clipped as f64 / samples.len() as f64);
        let f0 = ssi_core::mgclsp::read_f0(&corpus.join("test").join(format!("{name}.f0"))).unwrap();
        let raw = mglsa_synthesize(&params, &f0, &cfg, 1 + i as u64).unwrap();
        finite &= raw.iter().chain(&samples).all(|s| s.is_finite());
    }
    verdict(
        6,
        complete && worst_offset <= 1.0 && finite && worst_clip < 0.01,
        &format!(
            "{} test WAVs; max duration offset {worst_offset:.3} frames; finite samples {finite}; max clipped fraction {worst_clip:.4}",
            names.len()
        ),
    );
}

fn collect_files(dir: &Path, base: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
    let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_files(&path, base, out);
        } else {
            out.push((path.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
        }
    }
}

#[test]
fn criterion_7_determinism() {
    let a = first_chain();
    let b = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-chain-b");
    run_chain(&b);
    let (mut fa, mut fb) = (Vec::new(), Vec::new());
    for sub in ["corpus", "work"] {
        collect_files(&a.join(sub), a, &mut fa);
        collect_files(&b.join(sub), &b, &mut fb);
    }
    let same_set = fa.iter().map(|f| &f.0).eq(fb.iter().map(|f| &f.0));
    let differing: Vec<String> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    let kinds = ["model", "json", "feat", "param", "wav", "txt", "jsonl"];
    let covered = kinds.iter().all(|k| fa.iter().any(|f| f.0.extension().is_some_and(|e| e == *k)));
    verdict(
        7,
        same_set && differing.is_empty() && covered,
        &format!(
            "{} files compared across two runs (models, features, parameters, audio, reports, logs); differing: {differing:?}",
            fa.len()
        ),
    );
}
