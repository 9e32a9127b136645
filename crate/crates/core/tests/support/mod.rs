//! Independent oracles and one check function per headline property. Each
//! check panics with a diagnostic on failure. Shared by the core test
//! targets and the workspace acceptance run.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use candle_core::Tensor;
use cyscolor::color::{delta_e76, lab_distance, palette_distance, rgb_to_lab, Color, ColorSpace, Palette};
use cyscolor::colorizer::{palette_adherence, ColorizeRequest, Colorizer, ColorizerConfig, ColorizerTrainer};
use cyscolor::dataset::{circular_mean_deg, extract_dominant_colors, welch_t_test, KMeansConfig};
use cyscolor::eval::{
    binomial_two_sided_p, run_diversity_grid, tally, AnswerKey, DiversityExperiment, Modality, Side, Variant,
};
use cyscolor::fusion::{fuse, FusionWeights};
use cyscolor::imaging::{LumaGrid, RgbGrid};
use cyscolor::nn;
use cyscolor::palette_gan::{
    loss_discriminator, loss_generator, GanConfig, PaletteGan, PaletteTrainer, TrainingBatch, TrainingItem,
};
use cyscolor::toy;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// ------------------------------------------------------------------ losses

/// `L_D` re-derived in expanded polynomial form.
pub fn oracle_loss_d(real: f64, fake: f64, alpha: f64) -> f64 {
    alpha * (real * real - 2.0 * real + 1.0) + (1.0 - alpha) * fake * fake
}

/// `L_G` re-derived in expanded polynomial form.
pub fn oracle_loss_g(fake: f64, alpha: f64) -> f64 {
    alpha * (fake * fake - 2.0 * fake + 1.0)
}

pub fn loss_formulas() {
    assert_eq!(loss_discriminator(1.0, 0.0, 0.5), 0.0);
    assert_eq!(loss_discriminator(0.0, 1.0, 0.5), 1.0);
    assert_eq!(loss_discriminator(0.5, 0.5, 0.5), 0.25);
    assert_eq!(loss_generator(1.0, 0.5), 0.0);
    assert_eq!(loss_generator(0.0, 0.5), 0.5);
    assert_eq!(loss_generator(0.5, 0.5), 0.125);

    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let real = rng.random_range(-1.0..2.0);
        let fake = rng.random_range(-1.0..2.0);
        let alpha = rng.random_range(0.001..0.999);
        let d = loss_discriminator(real, fake, alpha);
        let g = loss_generator(fake, alpha);
        assert!((d - oracle_loss_d(real, fake, alpha)).abs() <= 1e-12, "L_D({real}, {fake}, {alpha})");
        assert!((g - oracle_loss_g(fake, alpha)).abs() <= 1e-12, "L_G({fake}, {alpha})");
        assert!(d >= 0.0 && g >= 0.0);
    }
}

// ------------------------------------------------------------------ fusion

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn fusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let d = rng.random_range(1..24);
        let (t, i, c, p) = (
            random_vec(&mut rng, d),
            random_vec(&mut rng, d),
            random_vec(&mut rng, d),
            random_vec(&mut rng, d),
        );
        let w = FusionWeights::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))
            .unwrap();
        let fused = fuse(&w, &t, &i, &c, &p).unwrap();
        for k in 0..d {
            let oracle = w.text * t[k] + w.image * i[k] + w.category * c[k];
            assert!((fused.c1[k] - oracle).abs() <= 1e-12, "c1 oracle");
        }
        assert_eq!(fused.c2, p);
        assert_eq!(fused.y.len(), 2 * d);
        assert_eq!(&fused.y[..d], fused.c1.as_slice());
        assert_eq!(&fused.y[d..], p.as_slice());

        let s = rng.random_range(0.1..5.0);
        let scaled = FusionWeights::new(s * w.text, s * w.image, s * w.category).unwrap();
        let fs = fuse(&scaled, &t, &i, &c, &p).unwrap();
        for k in 0..d {
            assert!((fs.c1[k] - s * fused.c1[k]).abs() <= 1e-12 * (1.0 + fused.c1[k].abs() * s), "homogeneity");
        }

        let erased = FusionWeights::new(0.0, w.image, w.category).unwrap();
        let other = random_vec(&mut rng, d);
        let a = fuse(&erased, &t, &i, &c, &p).unwrap();
        let b = fuse(&erased, &other, &i, &c, &p).unwrap();
        assert_eq!(a.c1, b.c1, "zero weight must erase the modality");
    }

    for w in [FusionWeights::PALETTE, FusionWeights::COLORIZER] {
        assert!((w.text + w.image + w.category - 1.0).abs() < 1e-15);
        let v = random_vec(&mut rng, 16);
        let fused = fuse(&w, &v, &v, &v, &v).unwrap();
        for k in 0..16 {
            assert!((fused.c1[k] - v[k]).abs() <= 1e-12, "c1 = v under default weights");
        }
    }

    // Erasure also holds through the full encoder stack.
    let (vocab, cats) = toy::dark_bright_vocab();
    let mut cfg = GanConfig::new(vocab.len(), cats.len());
    cfg.d = 8;
    cfg.hidden = 16;
    cfg.image_resolution = 8;
    cfg.weights = FusionWeights::new(0.0, 0.6, 0.4).unwrap();
    let model = PaletteGan::new(cfg, vocab, cats).unwrap();
    let image = LumaGrid::filled(8, 8, 0.4);
    let a = model.context_builder().build("dark", "toy-a", &image).unwrap();
    let b = model.context_builder().build("bright", "toy-a", &image).unwrap();
    let ya = model.encoder().encode(&a, &[]).unwrap();
    let yb = model.encoder().encode(&b, &[]).unwrap();
    assert_eq!(ya.y, yb.y);
}

// --------------------------------------------------------------- gradients

pub fn tiny_gan(seed: u64) -> PaletteGan {
    let (vocab, cats) = toy::dark_bright_vocab();
    let mut cfg = GanConfig::new(vocab.len(), cats.len());
    cfg.d = 8;
    cfg.noise_dim = 4;
    cfg.hidden = 16;
    cfg.image_resolution = 8;
    cfg.batch_size = 4;
    cfg.seed = seed;
    PaletteGan::new(cfg, vocab, cats).unwrap()
}

pub fn random_palette(rng: &mut ChaCha8Rng) -> Palette {
    Palette::new(
        (0..5)
            .map(|_| Color::rgb(rng.random(), rng.random(), rng.random()).unwrap())
            .collect(),
    )
    .unwrap()
}

fn random_luma(rng: &mut ChaCha8Rng, w: usize, h: usize) -> LumaGrid {
    LumaGrid::new(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap()
}

fn tiny_batch(model: &PaletteGan, rng: &mut ChaCha8Rng) -> TrainingBatch {
    let texts = ["dark", "bright", "dark bright", ""];
    let items = (0..4)
        .map(|k| TrainingItem {
            context: model
                .context_builder()
                .build(texts[k], ["toy-a", "toy-b"][k % 2], &random_luma(rng, 8, 8))
                .unwrap(),
            palette: random_palette(rng),
            step: k + 1,
        })
        .collect();
    TrainingBatch::new(items).unwrap()
}

pub struct GradReport {
    pub checked: usize,
    pub worst: f64,
    pub worst_at: String,
}

/// Compares backprop gradients of `loss` with central differences for a
/// spread of entries in every parameter under `prefixes`.
pub fn finite_difference_check(
    model: &PaletteGan,
    prefixes: &[&str],
    per_tensor: usize,
    loss: impl Fn() -> Tensor,
) -> GradReport {
    const H: f64 = 1e-6;
    let grads = loss().backward().unwrap();
    let mut report = GradReport {
        checked: 0,
        worst: 0.0,
        worst_at: String::new(),
    };
    let names: Vec<String> = model
        .params()
        .names()
        .filter(|n| prefixes.iter().any(|p| n.starts_with(p)))
        .map(str::to_string)
        .collect();
    assert!(!names.is_empty());
    for name in names {
        let var = model.params().var(&name).unwrap();
        let dims = var.as_tensor().dims().to_vec();
        let original = var.as_tensor().flatten_all().unwrap().to_vec1::<f64>().unwrap();
        let analytic = match grads.get(var.as_tensor()) {
            Some(g) => g.flatten_all().unwrap().to_vec1::<f64>().unwrap(),
            None => vec![0.0; original.len()],
        };
        let n = original.len();
        let step = (n / per_tensor).max(1);
        for idx in (0..n).step_by(step).take(per_tensor) {
            let eval_at = |x: f64| {
                let mut v = original.clone();
                v[idx] = x;
                var.set(&Tensor::from_vec(v, dims.as_slice(), &nn::device()).unwrap()).unwrap();
                loss().to_scalar::<f64>().unwrap()
            };
            let numeric = (eval_at(original[idx] + H) - eval_at(original[idx] - H)) / (2.0 * H);
            var.set(&Tensor::from_vec(original.clone(), dims.as_slice(), &nn::device()).unwrap()).unwrap();
            let a = analytic[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.checked += 1;
            if rel > report.worst {
                report.worst = rel;
                report.worst_at = format!("{name}[{idx}]: analytic {a:e} numeric {numeric:e}");
            }
        }
    }
    report
}

pub fn gradients() {
    let start = Instant::now();
    let model = tiny_gan(8);
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let batch = tiny_batch(&model, &mut rng);
    let z = nn::rows(&(0..4).map(|_| random_vec(&mut rng, 4)).collect::<Vec<_>>()).unwrap();
    let fake = model.generate_batch(&batch, &z).unwrap().detach();

    let d = finite_difference_check(&model, &["enc/", "disc/"], 6, || {
        model.discriminator_loss(&batch, &fake).unwrap().loss
    });
    assert!(d.checked > 50, "too few entries checked: {}", d.checked);
    assert!(d.worst <= 1e-3, "L_D gradient off at {}", d.worst_at);

    let g = finite_difference_check(&model, &["gen/", "disc/"], 6, || {
        model.generator_loss(&batch, &z).unwrap().loss
    });
    assert!(g.checked > 30, "too few entries checked: {}", g.checked);
    assert!(g.worst <= 1e-3, "L_G gradient off at {}", g.worst_at);

    assert!(start.elapsed() < Duration::from_secs(60), "took {:?}", start.elapsed());
}

// -------------------------------------------------------------- color math

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Minimum mean ΔE76 over all 120 color matchings.
pub fn exhaustive_distance(a: &Palette, b: &Palette) -> f64 {
    let mut perms = Vec::new();
    permutations(&mut (0..5).collect(), 0, &mut perms);
    assert_eq!(perms.len(), 120);
    perms
        .iter()
        .map(|p| {
            (0..5)
                .map(|i| delta_e76(&a.colors()[i], &b.colors()[p[i]]))
                .sum::<f64>()
                / 5.0
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn color_math() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let rgb: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let c = Color::rgb(rgb[0], rgb[1], rgb[2]).unwrap();
        for space in [ColorSpace::Lab, ColorSpace::Hsl] {
            let back = c.to(space).to(ColorSpace::Rgb).channels();
            for i in 0..3 {
                assert!((back[i] - rgb[i]).abs() <= 1.0 / 255.0, "{rgb:?} via {space:?} -> {back:?}");
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let a = random_palette(&mut rng);
        let b = random_palette(&mut rng);
        let got = palette_distance(&a, &b);
        let want = exhaustive_distance(&a, &b);
        assert!((got - want).abs() < 1e-9, "palette_distance {got} vs {want}");
    }
}

// -------------------------------------------------------------- clustering

/// 30 pixels drawn from 12 distinct colors in three loose groups.
pub fn three_cluster_image() -> RgbGrid {
    let groups: [[[f64; 3]; 4]; 3] = [
        [[0.80, 0.10, 0.10], [0.85, 0.15, 0.12], [0.75, 0.12, 0.08], [0.82, 0.05, 0.15]],
        [[0.10, 0.60, 0.20], [0.15, 0.65, 0.25], [0.12, 0.55, 0.18], [0.08, 0.62, 0.22]],
        [[0.20, 0.25, 0.80], [0.25, 0.30, 0.85], [0.18, 0.22, 0.75], [0.22, 0.28, 0.78]],
    ];
    let counts = [[4, 3, 3, 2], [3, 2, 2, 1], [3, 3, 2, 2]];
    let mut pixels = Vec::new();
    for g in 0..3 {
        for c in 0..4 {
            for _ in 0..counts[g][c] {
                pixels.push(groups[g][c]);
            }
        }
    }
    assert_eq!(pixels.len(), 30);
    RgbGrid::new(6, 5, pixels).unwrap()
}

/// Exhaustive k-means optimum over every assignment of the distinct colors
/// (pixels sharing a color always share a cluster in an optimal partition).
/// Returns the optimal inertia and the clusters as (Lab center, share),
/// largest share first.
pub fn brute_force_kmeans(points: &[([f64; 3], f64)], k: usize) -> (f64, Vec<([f64; 3], f64)>) {
    let n = points.len();
    let total: f64 = points.iter().map(|p| p.1).sum();
    let mut best = (f64::INFINITY, Vec::new());
    let mut assign = vec![0usize; n];
    loop {
        let mut mass = vec![0.0; k];
        let mut sum = vec![[0.0; 3]; k];
        for (p, &a) in points.iter().zip(&assign) {
            mass[a] += p.1;
            for i in 0..3 {
                sum[a][i] += p.1 * p.0[i];
            }
        }
        if mass.iter().all(|m| *m > 0.0) {
            let centers: Vec<[f64; 3]> = (0..k).map(|c| sum[c].map(|s| s / mass[c])).collect();
            let sse: f64 = points
                .iter()
                .zip(&assign)
                .map(|(p, &a)| p.1 * (0..3).map(|i| (p.0[i] - centers[a][i]).powi(2)).sum::<f64>())
                .sum();
            if sse < best.0 - 1e-9 {
                let mut clusters: Vec<([f64; 3], f64)> = (0..k).map(|c| (centers[c], mass[c] / total)).collect();
                clusters.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
                best = (sse, clusters);
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            assign[i] += 1;
            if assign[i] < k {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
    }
}

pub fn clustering() {
    let image = three_cluster_image();
    let mut distinct: Vec<([f64; 3], f64)> = Vec::new();
    for p in &image.pixels {
        let lab = rgb_to_lab(*p);
        match distinct.iter_mut().find(|d| d.0 == lab) {
            Some(d) => d.1 += 1.0,
            None => distinct.push((lab, 1.0)),
        }
    }
    assert_eq!(distinct.len(), 12);
    let (_, expected) = brute_force_kmeans(&distinct, 3);
    let config = KMeansConfig {
        k: 3,
        ..KMeansConfig::default()
    };
    let got = extract_dominant_colors(&image, &config).unwrap();
    assert!((got.proportions().iter().sum::<f64>() - 1.0).abs() <= 1e-6);
    assert_eq!(got.len(), 3);
    for (i, (center, share)) in expected.iter().enumerate() {
        assert!((got.proportions()[i] - share).abs() < 1e-12, "share {i}");
        assert!(lab_distance(got.colors()[i].to_lab(), *center) < 1e-6, "center {i}");
    }
}

// -------------------------------------------------------------- statistics

/// Welch fixtures with (t, df, two-sided p) computed with 50-digit
/// arithmetic (mpmath).
pub const WELCH_REFERENCE: [(&[f64], &[f64], f64, f64, f64); 3] = [
    (
        &[0.42, 0.51, 0.39, 0.47, 0.55, 0.44, 0.50, 0.46],
        &[0.36, 0.41, 0.33, 0.45, 0.38, 0.40, 0.35, 0.43, 0.37],
        3.599653512519063575,
        12.971041145341420507,
        0.0032447468848092627993,
    ),
    (
        &[12.1, 14.3, 11.8, 13.9, 15.2, 12.7],
        &[13.0, 12.2, 14.1, 13.5, 12.9, 13.8, 14.4, 12.6, 13.1, 13.3],
        0.073634597601089410362,
        6.5586226432184512517,
        0.94349614084162001955,
    ),
    (
        &[2.5, 3.1, 2.8, 3.6, 2.2, 3.0, 2.9, 3.3, 2.7, 3.4, 2.6, 3.2],
        &[5.1, 1.2, 4.4, 0.3, 6.2, 2.8, 3.9],
        -0.58552354826431570868,
        6.2590550564258025614,
        0.57868207800679760781,
    ),
];

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Two-sided tail of Student's t by composite Simpson integration of the
/// density from 0 to |t|.
pub fn t_two_sided_by_quadrature(t: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let pdf = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    let n = 200_000;
    let h = t.abs() / n as f64;
    let mut s = pdf(0.0) + pdf(t.abs());
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

/// Two-sided permutation p-value for a difference in means, with the
/// `(extreme + 1) / (shuffles + 1)` convention.
pub fn permutation_p(a: &[f64], b: &[f64], shuffles: usize, seed: u64) -> f64 {
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let observed = (mean(a) - mean(b)).abs();
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..shuffles {
        pooled.shuffle(&mut rng);
        let (x, y) = pooled.split_at(a.len());
        if (mean(x) - mean(y)).abs() >= observed - 1e-12 {
            extreme += 1;
        }
    }
    (extreme + 1) as f64 / (shuffles + 1) as f64
}

pub fn normal_sample(rng: &mut ChaCha8Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    let d = Normal::new(mean, sd).unwrap();
    (0..n).map(|_| d.sample(rng)).collect()
}

pub fn statistics() {
    for (a, b, t, df, p) in WELCH_REFERENCE {
        let got = welch_t_test(a, b).unwrap();
        assert!((got.t - t).abs() <= 1e-9, "t {} vs {t}", got.t);
        assert!((got.df - df).abs() <= 1e-9, "df {} vs {df}", got.df);
        assert!((got.p - p).abs() <= 1e-9, "p {} vs {p}", got.p);
        let q = t_two_sided_by_quadrature(got.t, got.df);
        assert!((got.p - q).abs() <= 1e-9, "p {} vs quadrature {q}", got.p);
    }

    let shuffles = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let a = normal_sample(&mut rng, 400, 0.3, 0.1);
    let b = normal_sample(&mut rng, 400, 0.7, 0.1);
    let welch = welch_t_test(&a, &b).unwrap();
    let perm = permutation_p(&a, &b, shuffles, 1);
    let resolution = 1.0 / (shuffles + 1) as f64;
    assert!(perm <= resolution * (1.0 + 1e-12), "no shuffle should reach the observed shift");
    assert!(welch.p <= resolution && welch.p < 1e-10, "welch p {}", welch.p);

    let same = welch_t_test(&a, &a).unwrap();
    assert_eq!(same.t, 0.0);
    assert_eq!(same.p, 1.0);
}

// ----------------------------------------------------------- autoregression

pub fn autoregressive() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut changed = 0;
    for trial in 0..100 {
        let model = tiny_gan(1000 + trial);
        let text = ["dark", "bright", "bd", ""][trial as usize % 4];
        let ctx = model
            .context_builder()
            .build(text, ["toy-a", "toy-b"][trial as usize % 2], &random_luma(&mut rng, 8, 8))
            .unwrap();

        let seed = rng.random();
        let p = model.sample_palette(&ctx, seed).unwrap();
        assert_eq!(p.colors().len(), 5);
        for c in p.colors() {
            assert!(c.to_rgb().iter().all(|v| (0.0..=1.0).contains(v)), "{c:?}");
        }
        let again = model.sample_palette(&ctx, seed).unwrap();
        let bits = |p: &Palette| -> Vec<u64> { p.colors().iter().flat_map(|c| c.to_rgb().map(f64::to_bits)).collect() };
        assert_eq!(bits(&p), bits(&again), "sampling must be bitwise deterministic");

        let first = Color::rgb(rng.random(), rng.random(), rng.random()).unwrap();
        let second = Color::rgb(rng.random(), rng.random(), rng.random()).unwrap();
        let replaced = Color::rgb(rng.random(), rng.random(), rng.random()).unwrap();
        let z = random_vec(&mut rng, 4);
        let a = model.next_color(&ctx, &[first, second], &z).unwrap();
        let b = model.next_color(&ctx, &[first, replaced], &z).unwrap();
        if a != b {
            changed += 1;
        }
    }
    assert!(changed >= 95, "prefix perturbation changed only {changed}/100 outputs");
}

// --------------------------------------------------------- training signal

pub fn mean_lightness(model: &PaletteGan, text: &str, fill: f64) -> f64 {
    let image = LumaGrid::filled(toy::TOY_RESOLUTION, toy::TOY_RESOLUTION, fill);
    let mut total = 0.0;
    let mut n = 0.0;
    for category in model.categories().names() {
        let ctx = model.context_builder().build(text, category, &image).unwrap();
        for seed in 0..20 {
            let p = model.sample_palette(&ctx, seed).unwrap();
            for c in p.to_space(ColorSpace::Hsl).colors() {
                total += c.channels()[2];
                n += 1.0;
            }
        }
    }
    total / n
}

pub fn palette_training_signal() {
    let start = Instant::now();
    let (vocab, cats) = toy::dark_bright_vocab();
    let model = toy::palette_model(vocab, cats, 7).unwrap();
    let examples = toy::dark_bright_examples(&model, 50, 11).unwrap();
    let mut trainer = PaletteTrainer::new(model).unwrap();
    trainer.fit(&examples, 1500, |_| {}).unwrap();
    let model = trainer.into_model();
    let dark = mean_lightness(&model, toy::DARK, 0.2);
    let bright = mean_lightness(&model, toy::BRIGHT, 0.8);
    assert!(dark + 0.1 <= bright, "dark {dark:.3} bright {bright:.3}");
    assert!(start.elapsed() < Duration::from_secs(600), "took {:?}", start.elapsed());
}

pub fn colorizer_training_signal() {
    let (vocab, cats) = toy::red_vocab();
    let model = toy::colorizer_model(vocab, cats, 3).unwrap();
    let examples = toy::red_examples(&model, 40, 5).unwrap();
    let mut trainer = ColorizerTrainer::new(model).unwrap();
    trainer.fit(&examples, 500, |_| {}).unwrap();
    let model = trainer.into_model();
    let mut hues = Vec::new();
    for ex in toy::red_examples(&model, 5, 99).unwrap() {
        let request = ColorizeRequest {
            grayscale: ex.image.luma(),
            palette: ex.palette,
            context: ex.context.clone(),
        };
        let out = model.colorize(&request, 0).unwrap();
        hues.extend(out.rgb.pixels.iter().map(|p| cyscolor::color::rgb_to_hsl(*p)[0]));
    }
    let mean = circular_mean_deg(&hues);
    let off = mean.min(360.0 - mean);
    assert!(off <= 30.0, "mean hue {mean:.1}");
}

pub fn training_signal() {
    palette_training_signal();
    colorizer_training_signal();
}

// -------------------------------------------------------------- colorizer

pub fn tiny_colorizer(resolution: usize, seed: u64) -> Colorizer {
    let (vocab, cats) = toy::red_vocab();
    let mut cfg = ColorizerConfig::new(vocab.len(), cats.len());
    cfg.d = 8;
    cfg.channels = 8;
    cfg.noise_dim = 4;
    cfg.resolution = resolution;
    cfg.image_resolution = 8;
    cfg.seed = seed;
    Colorizer::new(cfg, vocab, cats).unwrap()
}

pub fn random_rgb(rng: &mut ChaCha8Rng, w: usize, h: usize) -> RgbGrid {
    RgbGrid::new(w, h, (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect()).unwrap()
}

/// Adherence by explicit double loop over pixels and palette colors.
pub fn brute_force_adherence(image: &RgbGrid, palette: &Palette, threshold: f64) -> f64 {
    let mut hits = 0usize;
    for p in &image.pixels {
        let px = Color::rgb(p[0], p[1], p[2]).unwrap();
        let mut best = f64::INFINITY;
        for c in palette.colors() {
            best = best.min(delta_e76(&px, c));
        }
        if best < threshold {
            hits += 1;
        }
    }
    hits as f64 / image.pixels.len() as f64
}

pub fn colorizer_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let sizes = [(8, 8), (13, 7), (16, 16), (31, 20), (1, 5)];
    for resolution in [8, 12, 16] {
        let model = tiny_colorizer(resolution, resolution as u64);
        for (w, h) in sizes {
            let image = random_rgb(&mut rng, w, h);
            let luma = image.luma();
            let palette = random_palette(&mut rng);
            let ctx = model.context_builder().build("red", "toy", &luma).unwrap();
            let out = model.colorize_any(&luma, &palette, &ctx, rng.random()).unwrap();
            assert_eq!((out.width, out.height), (w, h));
            assert_eq!((out.rgb.width, out.rgb.height), (w, h));
            for (px, l) in out.rgb.pixels.iter().zip(&luma.data) {
                let got = rgb_to_lab(*px)[0] / 100.0;
                assert!((got - l).abs() <= 1e-3, "lightness {got} vs {l} at resolution {resolution}");
            }
        }
    }

    for _ in 0..20 {
        let image = random_rgb(&mut rng, 9, 6);
        let palette = random_palette(&mut rng);
        for threshold in [0.0, 5.0, 25.0, 40.0, 80.0, 1000.0] {
            let got = palette_adherence(&image, &palette, threshold);
            let want = brute_force_adherence(&image, &palette, threshold);
            assert!((got - want).abs() < 1e-12, "adherence {got} vs {want} at {threshold}");
        }
    }
    let palette = random_palette(&mut rng);
    let exact = RgbGrid::new(5, 1, palette.rgb().to_vec()).unwrap();
    assert_eq!(palette_adherence(&exact, &palette, 1e-9), 1.0);
    assert_eq!(palette_adherence(&exact, &palette, 0.0), 0.0);
}

// -------------------------------------------------------------- evaluation

/// `C(n, k)` exactly.
pub fn choose(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Two-sided exact binomial p against 1/2 from integer tail counts.
pub fn exact_binomial_p(k: u32, n: u32) -> f64 {
    let m = k.min(n - k);
    let tail: u128 = (0..=m).map(|i| choose(n, i)).sum();
    (2.0 * tail as f64 / 2f64.powi(n as i32)).min(1.0)
}

/// A key for `pairs` pairs and a vote CSV in which `ours` of the votes pick
/// the system's side.
pub fn synthetic_votes(pairs: usize, raters: usize, ours: usize, seed: u64) -> (AnswerKey, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = AnswerKey {
        ours: (0..pairs)
            .map(|i| (format!("p{i:03}"), if rng.random_bool(0.5) { Side::Left } else { Side::Right }))
            .collect::<BTreeMap<_, _>>(),
    };
    let mut slots: Vec<bool> = (0..pairs * raters).map(|i| i < ours).collect();
    slots.shuffle(&mut rng);
    let mut csv = String::from("pair_id,rater_id,choice\n");
    for (i, for_ours) in slots.into_iter().enumerate() {
        let pair = format!("p{:03}", i % pairs);
        let side = key.ours[&pair];
        let pick = match (side, for_ours) {
            (Side::Left, true) | (Side::Right, false) => "left",
            _ => "right",
        };
        csv.push_str(&format!("{pair},r{},{pick}\n", i / pairs));
    }
    (key, csv)
}

pub fn evaluation() {
    let model = tiny_gan(3);
    let base_image = LumaGrid::filled(8, 8, 0.5);
    let duplicated = [
        (Modality::Text, vec![Variant::Text("dark".into()), Variant::Text("dark".into())]),
        (
            Modality::Image,
            vec![Variant::Image(LumaGrid::filled(8, 8, 0.1)), Variant::Image(LumaGrid::filled(8, 8, 0.1))],
        ),
        (
            Modality::Category,
            vec![Variant::Category("toy-b".into()), Variant::Category("toy-b".into())],
        ),
    ];
    for (varied, variants) in duplicated {
        let grid = run_diversity_grid(
            &DiversityExperiment {
                varied,
                base_text: "bright".into(),
                base_category: "toy-a".into(),
                base_image: base_image.clone(),
                variants,
                seed: 4,
            },
            &model,
        )
        .unwrap();
        assert_eq!(grid.palettes.len(), 2);
        assert_eq!(grid.palettes[0], grid.palettes[1]);
        assert_eq!(grid.dispersion, Some(0.0), "{varied:?}");
    }

    assert!((binomial_two_sided_p(20, 20) - 2.0 * 0.5f64.powi(20)).abs() < 1e-18);
    for (pairs, raters, ours) in [(20, 1, 20), (20, 1, 10), (20, 4, 60), (20, 4, 40), (20, 4, 47), (15, 3, 9), (30, 4, 0)] {
        let (key, csv) = synthetic_votes(pairs, raters, ours, ours as u64);
        let t = tally(csv.as_bytes(), &key).unwrap();
        let n = pairs * raters;
        assert_eq!((t.votes, t.ours, t.pairs, t.raters), (n, ours, pairs, raters));
        assert!((t.fraction - ours as f64 / n as f64).abs() < 1e-15);
        let want = exact_binomial_p(ours as u32, n as u32);
        assert!((t.p_value - want).abs() <= 1e-12 * want.max(1e-300) + 1e-15, "p {} vs {want}", t.p_value);
    }
}

/// Name and check for every headline property, in reporting order.
pub fn all_checks() -> Vec<(&'static str, fn())> {
    vec![
        ("loss-formula fidelity", loss_formulas),
        ("fusion correctness", fusion),
        ("gradient checks", gradients),
        ("color math", color_math),
        ("clustering oracle", clustering),
        ("statistics oracle", statistics),
        ("autoregressive contract", autoregressive),
        ("desk-scale training signal", training_signal),
        ("colorizer invariants", colorizer_invariants),
        ("evaluation harness", evaluation),
    ]
}
