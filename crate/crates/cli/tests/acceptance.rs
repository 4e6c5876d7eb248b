//! Acceptance suite. Each criterion prints one `[PASS]`/`[FAIL]` line and
//! asserts at its stated tolerance.

mod common;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use poselift::corrupt::blur::DEFAULT_DELTA;
use poselift::corrupt::crop::crop_line;
use poselift::corrupt::erase::{plan_guided_patches, square_at};
use poselift::corrupt::noise::{gaussian_field, impulse_count, GAUSSIAN_SIGMA, IMPULSE_RATIO};
use poselift::corrupt::{impulse_noise, patch_side, BlurKernel, FrameBuffer, PixelTrack};
use poselift::metrics::{inclusion_mask, mpjpe, p_mpjpe};
use poselift::net::{build_model, run_gradcheck, Conv, Geometry, GradCheckOptions, InputMode, Layer, LifterConfig, LifterModel, Tensor};
use poselift::synthgen::{synthesize_sequence, SynthConfig};
use poselift::tagn::{apply_tagn, TagnConfig};
use poselift::corrupt::SplitRole;
use poselift::{DatasetBundle, PoseSequence2D, PoseSequence3D, SeededRng, SkeletonLayout};

use poselift_cli::pipeline;
use poselift_cli::{Preset, RunConfig};

use common::verdict;

#[test]
fn criterion_01_gradient_correctness() {
    let start = Instant::now();
    let report = run_gradcheck(&GradCheckOptions::new(1)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let cases: Vec<&str> = report.entries.iter().map(|e| e.case.as_str()).collect();
    let required = [
        "conv",
        "ca_conv",
        "ca_conv_gate_path",
        "model_pose_only_dense",
        "model_conf_concat_dense",
        "model_confidence_aware_dense",
    ];
    let covered = required.iter().all(|r| cases.contains(r));
    let pass = report.passed() && report.max_rel_error() <= 1e-4 && secs < 60.0 && covered;
    verdict(
        1,
        "gradient correctness",
        pass,
        &format!("max rel error {:.2e} over {} cases in {secs:.1} s", report.max_rel_error(), cases.len()),
    );
}

fn random_batch(len: usize, batch: usize, j: usize, rng: &mut SeededRng) -> Tensor<f64> {
    let data = (0..len * batch * 2 * j).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    Tensor::from_vec(&[len, batch, 2 * j], data).unwrap()
}

/// Confidence stream pinned at 1: zero weights, saturating bias.
fn saturate(conv: &mut Conv<f64>) {
    conv.weight.data.fill(0.0);
    conv.bias.data.fill(40.0);
}

#[test]
fn criterion_02_caconv_equivalence() {
    let layout = SkeletonLayout::h36m16();
    let j = layout.joint_count;
    let base = LifterConfig { channels: 64, dropout_rate: 0.0, gamma: 0.0, ..Default::default() };
    let ca_cfg = LifterConfig { input_mode: InputMode::ConfidenceAware, ..base.clone() };
    let mut ca: LifterModel<f64> = build_model(&ca_cfg, &layout, &SeededRng::new(2, 0)).unwrap();
    let mut plain: LifterModel<f64> = build_model(&base, &layout, &SeededRng::new(99, 0)).unwrap();
    for layer in std::iter::once(&mut ca.input).chain(ca.blocks.iter_mut()) {
        if let Layer::Ca(c) = layer {
            saturate(&mut c.conf);
        }
    }
    let pose_of = |l: &Layer<f64>| match l {
        Layer::Ca(c) => Layer::Plain(c.pose.clone()),
        Layer::Plain(p) => Layer::Plain(p.clone()),
    };
    plain.input = pose_of(&ca.input);
    plain.blocks = ca.blocks.iter().map(pose_of).collect();
    plain.head = ca.head.clone();

    let rf = ca.receptive_field();
    let mut rng = SeededRng::new(3, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = random_batch(rf, 1, j, &mut rng);
        let ones = Tensor::filled(&[rf, 1, j], 1.0);
        let (a, _) = ca.forward(&x, Some(&ones), Geometry::Dense, None).unwrap();
        let (b, _) = plain.forward(&x, None, Geometry::Dense, None).unwrap();
        worst = worst.max(a.max_abs_diff(&b));
    }
    verdict(2, "CA-Conv equivalence", worst <= 1e-6, &format!("max |diff| {worst:.2e} over 100 inputs"));
}

fn random_pose(frames: usize, joints: usize, seed: u64) -> PoseSequence2D {
    let mut rng = SeededRng::new(seed, 0);
    let data = (0..frames * joints * 2).map(|_| rng.uniform_range(-0.8, 0.8)).collect();
    PoseSequence2D::new(frames, joints, data, 1000, 1000).unwrap()
}

#[test]
fn criterion_03_tagn_statistics() {
    // All frames and joints at sigma 0.1 over 10^5 joints.
    let seq = random_pose(6250, 16, 1);
    let full = apply_tagn(&seq, &TagnConfig::new(0.1, 1.0, 1.0), &mut SeededRng::new(2, 0)).unwrap();
    let diffs: Vec<f64> = full.data.iter().zip(&seq.data).map(|(a, b)| a - b).collect();
    let axis_std = |axis: usize| {
        let d: Vec<f64> = diffs.iter().skip(axis).step_by(2).copied().collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    };
    let (sx, sy) = (axis_std(0), axis_std(1));
    let touched_all = full.data.chunks(2).zip(seq.data.chunks(2)).all(|(a, b)| a != b);
    let std_ok = [sx, sy].iter().all(|s| (s / 0.1 - 1.0).abs() <= 0.02);

    // Half the frames, half the joints.
    let seq = random_pose(100, 16, 3);
    let half = apply_tagn(&seq, &TagnConfig::new(0.3, 0.5, 0.5), &mut SeededRng::new(4, 0)).unwrap();
    let mut frames = 0;
    let mut counts_ok = true;
    for t in 0..100 {
        let hit = (0..16).filter(|&j| half.get(t, j) != seq.get(t, j)).count();
        if hit > 0 {
            frames += 1;
            counts_ok &= hit == 8;
        }
        for j in 0..16 {
            let (a, b) = (half.get(t, j), seq.get(t, j));
            // Untouched entries must be bit-identical; touched ones move on both axes.
            counts_ok &= (a[0].to_bits() == b[0].to_bits()) == (a[1].to_bits() == b[1].to_bits());
        }
    }
    let pass = std_ok && touched_all && frames == 50 && counts_ok;
    verdict(
        3,
        "TAGN statistics",
        pass,
        &format!("std x {sx:.5} y {sy:.5} (target 0.1 +-2%), all touched {touched_all}, {frames} frames x 8 joints {counts_ok}"),
    );
}

#[test]
fn criterion_04_corruption_constants() {
    let (w, h) = (320u32, 240u32);
    let mut rng = SeededRng::new(5, 0);

    let grey = FrameBuffer::filled(w, h, 0.5);
    let hit = impulse_noise(&grey, IMPULSE_RATIO, &mut rng);
    let changed = (0..grey.pixel_count())
        .filter(|&i| hit.pixels[3 * i..3 * i + 3] != grey.pixels[3 * i..3 * i + 3])
        .count();
    let expected = (0.27 * f64::from(w * h)).floor() as usize;
    let impulse_ok = changed == expected && impulse_count(IMPULSE_RATIO, w, h) == expected;

    let field = gaussian_field(1_000_000, GAUSSIAN_SIGMA, &mut rng);
    let mean = field.iter().sum::<f64>() / field.len() as f64;
    let std = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / field.len() as f64).sqrt();
    let gauss_ok = (std / 0.38 - 1.0).abs() <= 0.01;

    let side_ok = [(500, 500, 50), (1000, 1002, 100), (640, 480, 48), (99, 300, 9)]
        .iter()
        .all(|&(w, h, s)| patch_side(w, h) == s);

    // y_avg = 100 sits above 2H/3; y_avg = 200 is capped at 160.
    let track = |y: f64| PixelTrack::new(2, 2, vec![10.0, y - 5.0, 20.0, y + 5.0, 30.0, y, 40.0, y]).unwrap();
    let crop_ok = crop_line(&track(100.0), 240) == 100.0 && crop_line(&track(200.0), 240) == 160.0;

    let mut blur_ok = true;
    let mut worst_sum = 0.0f64;
    for i in 0..16 {
        let k = BlurKernel::new(i as f64 * std::f64::consts::PI / 8.0, DEFAULT_DELTA).unwrap();
        worst_sum = worst_sum.max((k.sum() - 1.0).abs());
        blur_ok &= (k.sum() - 1.0).abs() <= 1e-6;
    }
    let pass = impulse_ok && gauss_ok && side_ok && crop_ok && blur_ok;
    verdict(
        4,
        "corruption operator constants",
        pass,
        &format!(
            "impulse {changed}/{expected}, gaussian std {std:.4}, patch side {side_ok}, crop line {crop_ok}, blur |sum-1| {worst_sum:.1e}"
        ),
    );
}

/// Fraction of all keypoints inside any of the rectangles.
fn coverage(track: &PixelTrack, rects: &[poselift::corrupt::Rect]) -> f64 {
    let mut inside = 0;
    for t in 0..track.frames {
        for j in 0..track.joints {
            let [x, y] = track.get(t, j);
            inside += usize::from(rects.iter().any(|r| r.contains(x, y)));
        }
    }
    inside as f64 / (track.frames * track.joints) as f64
}

#[test]
fn criterion_05_gpe_guidance() {
    let layout = SkeletonLayout::h36m16();
    let cfg = SynthConfig { frames: 100, ..Default::default() };
    let mut wins = 0;
    let (mut guided_sum, mut uniform_sum) = (0.0, 0.0);
    for seed in 0..100u64 {
        let rec = synthesize_sequence(&layout, &cfg, format!("gpe{seed}"), &SeededRng::new(seed, 0)).unwrap();
        let (w, h) = (rec.gt2d.width_px, rec.gt2d.height_px);
        let track = PixelTrack::from_pose(&rec.gt2d);
        let rects = plan_guided_patches(&track, w, h, &mut SeededRng::new(seed, 1)).unwrap();
        let guided = coverage(&track, &rects);
        // Same number of squares, centres uniform over the frame; averaged over draws.
        let mut rng = SeededRng::new(seed, 2);
        let draws = 20;
        let mut uniform = 0.0;
        for _ in 0..draws {
            let random: Vec<_> = (0..rects.len())
                .filter_map(|_| {
                    let c = [rng.uniform_range(0.0, f64::from(w)), rng.uniform_range(0.0, f64::from(h))];
                    square_at(c, patch_side(w, h), w, h)
                })
                .collect();
            uniform += coverage(&track, &random) / draws as f64;
        }
        wins += usize::from(guided > uniform);
        guided_sum += guided;
        uniform_sum += uniform;
    }
    let pass = wins >= 95 && guided_sum > uniform_sum;
    verdict(
        5,
        "GPE guidance",
        pass,
        &format!("guided beats uniform in {wins}/100 seeds; mean coverage {:.3} vs {:.3}", guided_sum / 100.0, uniform_sum / 100.0),
    );
}

fn random_3d(frames: usize, joints: usize, rng: &mut SeededRng) -> PoseSequence3D {
    let data = (0..frames * joints * 3).map(|_| rng.uniform_range(-0.8, 0.8)).collect();
    PoseSequence3D::new(frames, joints, data).unwrap()
}

/// Random rotation from a normalised quaternion.
fn rotation(rng: &mut SeededRng) -> [[f64; 3]; 3] {
    let q: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

#[test]
fn criterion_06_metric_oracles() {
    let mut rng = SeededRng::new(6, 0);
    let (t, j) = (40, 16);
    let gt = random_3d(t, j, &mut rng);
    let pred = random_3d(t, j, &mut rng);

    // Brute-force MPJPE.
    let mut brute = 0.0;
    for f in 0..t {
        for k in 0..j {
            let (a, b) = (pred.get(f, k), gt.get(f, k));
            brute += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        }
    }
    brute /= (t * j) as f64;
    let fast = mpjpe(&pred, &gt, None).unwrap();
    let brute_ok = (fast - brute).abs() <= 1e-9;

    // Exact similarity transforms vanish under alignment.
    let mut sim_worst = 0.0f64;
    for _ in 0..10 {
        let r = rotation(&mut rng);
        let s = rng.uniform_range(0.5, 2.0);
        let shift = [rng.normal(), rng.normal(), rng.normal()];
        let data = (0..t * j)
            .flat_map(|i| {
                let p = gt.get(i / j, i % j);
                (0..3).map(move |a| s * (r[a][0] * p[0] + r[a][1] * p[1] + r[a][2] * p[2]) + shift[a])
            })
            .collect();
        let moved = PoseSequence3D::new(t, j, data).unwrap();
        sim_worst = sim_worst.max(p_mpjpe(&moved, &gt, None).unwrap());
    }
    let sim_ok = sim_worst <= 1e-6;

    // Alignment never hurts, frame by frame.
    let mut frame_ok = true;
    for f in 0..t {
        let one = |p: &PoseSequence3D| PoseSequence3D::new(1, j, p.frame(f).to_vec()).unwrap();
        frame_ok &= p_mpjpe(&one(&pred), &one(&gt), None).unwrap() <= mpjpe(&one(&pred), &one(&gt), None).unwrap() + 1e-9;
    }

    // Inclusion masks nest in tau, and tau = inf keeps every joint.
    let clean = random_pose(t, j, 7);
    let mut noisy = clean.clone();
    for v in &mut noisy.data {
        *v += rng.normal() * 0.1;
    }
    let taus = [0.0, 0.02, 0.05, 0.1, 0.2, 0.5, f64::INFINITY];
    let masks: Vec<_> = taus.iter().map(|&tau| inclusion_mask(&clean, &noisy, tau).unwrap()).collect();
    let nest_ok = masks.windows(2).all(|w| w[0].is_subset_of(&w[1]));
    let inf = masks.last().unwrap();
    let inf_ok = inf.included() == t * j && mpjpe(&pred, &gt, Some(inf)).unwrap() == mpjpe(&pred, &gt, None).unwrap();

    let pass = brute_ok && sim_ok && frame_ok && nest_ok && inf_ok;
    verdict(
        6,
        "metric oracles",
        pass,
        &format!(
            "brute-force {brute_ok}, similarity P-MPJPE {sim_worst:.1e}, P<=M framewise {frame_ok}, nesting {nest_ok}, tau=inf {inf_ok}"
        ),
    );
}

fn poselift(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_poselift"))
        .args(args)
        .arg("--run-dir")
        .arg(dir)
        .output()
        .expect("failed to launch poselift")
}

/// Every file under `dir`, relative path to bytes.
fn snapshot(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_10_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let config = tmp.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
  "seed": 17,
  "synth": { "sequences": 10, "frames": 100 },
  "test_sequences": 2,
  "lifter": { "num_blocks": 2, "channels": 16 },
  "train": { "epochs": 2, "batch_size": 16 },
  "eval": { "histogram_bins": 8 }
}"#,
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    let steps: Vec<Vec<&str>> = vec![
        vec!["synth"],
        vec!["corrupt"],
        vec!["train", "--preset", "corrupt+caconv(1)"],
        vec!["eval", "--preset", "corrupt+caconv(1)"],
        vec!["sweep", "--grid", "rf", "--preset", "clean"],
        vec!["gradcheck"],
    ];
    let mut runs = Vec::new();
    let mut all_ok = true;
    for _ in 0..2 {
        if run.exists() {
            std::fs::remove_dir_all(&run).unwrap();
        }
        for step in &steps {
            let mut args = step.clone();
            args.extend(["--config", cfg, "--threads", "2"]);
            let out = poselift(&run, &args);
            all_ok &= out.status.success();
            assert!(out.status.success(), "{step:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
        let out = poselift(&run, &["report", run.to_str().unwrap(), "--config", cfg]);
        all_ok &= out.status.success();
        runs.push(snapshot(&run));
    }
    let (a, b) = (&runs[0], &runs[1]);
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
    let pass = all_ok && a.len() == b.len() && differing.is_empty() && a.len() > 20;
    verdict(
        10,
        "determinism",
        pass,
        &format!("{} files compared across two full reruns, {} differ", a.len(), differing.len()),
    );
}

/// Pinned synthetic benchmark shared by the trend criteria. Data comes from
/// one fixed seed; the model seeds vary.
struct Bench {
    base: RunConfig,
    clean_train: DatasetBundle,
    corrupt_train: DatasetBundle,
    test: DatasetBundle,
    results: Mutex<HashMap<(String, u64), Arc<OnceLock<f64>>>>,
}

const DATA_SEED: u64 = 1;
const MODEL_SEEDS: [u64; 3] = [11, 12, 13];

fn bench() -> &'static Bench {
    static BENCH: OnceLock<Bench> = OnceLock::new();
    BENCH.get_or_init(|| {
        let mut base = RunConfig { seed: DATA_SEED, test_sequences: 10, ..Default::default() };
        base.synth.sequences = 60;
        base.synth.frames = 500;
        base.lifter = LifterConfig { channels: 128, ..LifterConfig::with_receptive_field(27).unwrap() };
        base.train.epochs = 50;
        base.train.batch_size = 8;
        let (clean_train, clean_test) = pipeline::synthesize(&base).unwrap();
        let corrupt_train = pipeline::corrupt(&base, &clean_train, SplitRole::Train).unwrap();
        let test = pipeline::corrupt(&base, &clean_test.unwrap(), SplitRole::Test).unwrap();
        Bench { base, clean_train, corrupt_train, test, results: Mutex::new(HashMap::new()) }
    })
}

/// Average MPJPE≤0.1 in mm of one preset trained with one model seed; memoised.
fn average(preset: &str, seed: u64) -> f64 {
    let b = bench();
    let key = (preset.to_string(), seed);
    // Tests sharing a model wait for one training run instead of repeating it.
    let slot = b.results.lock().unwrap().entry(key.clone()).or_default().clone();
    *slot.get_or_init(|| {
        let preset: Preset = key.0.parse().unwrap();
        let cfg = RunConfig { seed, preset: Some(preset.clone()), ..b.base.clone() };
        let train = if preset.trains_on_corrupt() { &b.corrupt_train } else { &b.clean_train };
        let (report, _) = pipeline::run_preset::<f32>(&cfg, train, &b.test).unwrap();
        let v = report.average.mpjpe_tau_mm;
        let _ = writeln!(std::io::stdout().lock(), "    {key:?}: {v:.2} mm");
        v
    })
}

fn rel_gain(worse: f64, better: f64) -> f64 {
    (worse - better) / worse
}

fn seeds_where(f: impl Fn(u64) -> bool) -> usize {
    MODEL_SEEDS.iter().filter(|&&s| f(s)).count()
}

fn mean_over_seeds(preset: &str) -> f64 {
    MODEL_SEEDS.iter().map(|&s| average(preset, s)).sum::<f64>() / MODEL_SEEDS.len() as f64
}

#[test]
fn criterion_07_tagn_trend() {
    let (clean, best, weak) = ("clean", "clean+tagn(0.3,0.5,0.5)", "clean+tagn(0.05,0.2,0.2)");
    let wins = seeds_where(|s| rel_gain(average(clean, s), average(best, s)) >= 0.03);
    let (m_clean, m_best, m_weak) = (mean_over_seeds(clean), mean_over_seeds(best), mean_over_seeds(weak));
    let pass = wins >= 2 && m_best <= m_weak;
    verdict(
        7,
        "TAGN trend",
        pass,
        &format!(
            "TAGN(0.3) beats clean by >=3% in {wins}/3 seeds; mean Average clean {m_clean:.2}, TAGN(0.3) {m_best:.2}, TAGN(0.05) {m_weak:.2} mm"
        ),
    );
}

#[test]
fn criterion_08_caconv_trend() {
    let (clean, plain, ca1, ca0) = ("clean", "corrupt", "corrupt+caconv(1)", "corrupt+caconv(0)");
    let wins = seeds_where(|s| rel_gain(average(plain, s), average(ca1, s)) >= 0.01);
    let (m_clean, m_plain, m_ca1, m_ca0) =
        (mean_over_seeds(clean), mean_over_seeds(plain), mean_over_seeds(ca1), mean_over_seeds(ca0));
    let gap = rel_gain(m_clean, m_plain);
    let pass = wins >= 2 && m_ca1 <= m_ca0 && gap >= 0.10;
    verdict(
        8,
        "CA-Conv trend",
        pass,
        &format!(
            "caconv(1) beats corrupt by >=1% in {wins}/3 seeds; mean Average caconv(1) {m_ca1:.2}, caconv(0) {m_ca0:.2}, corrupt {m_plain:.2}, clean {m_clean:.2} mm; corrupt vs clean gain {:.1}%",
            gap * 100.0
        ),
    );
}

#[test]
fn criterion_09_pk_sweep() {
    let ratios = [0.1, 0.3, 0.5, 0.8, 1.0];
    let seed = MODEL_SEEDS[0];
    let mut grid = [[0.0f64; 5]; 5];
    for (i, p) in ratios.iter().enumerate() {
        for (j, k) in ratios.iter().enumerate() {
            grid[i][j] = average(&format!("clean+tagn(0.3,{p},{k})"), seed);
        }
    }
    let corner = grid[4][4];
    let worst_row = (0..5).all(|j| grid[4][j] <= corner);
    let worst_col = (0..5).all(|i| grid[i][4] <= corner);
    let low_k: Vec<f64> = (0..5).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| grid[i][j]).collect();
    let (lo, hi) = low_k.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = hi / lo - 1.0;
    let pass = worst_row && worst_col && spread <= 0.05;
    let table: Vec<String> =
        grid.iter().map(|r| r.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>().join(" ")).collect();
    verdict(
        9,
        "p,k sweep shape",
        pass,
        &format!(
            "(1,1) = {corner:.2} mm worst of row {worst_row}, of column {worst_col}; k<=0.5 spread {:.1}%; rows p=0.1..1 [{}]",
            spread * 100.0,
            table.join(" | ")
        ),
    );
}
