//! Palette-conditioned colorization GAN.
//!
//! The generator predicts Lab chroma planes for a grayscale image; the
//! lightness plane of the output is always the input itself. The condition
//! is the same fused context as the palette network, computed with the
//! colorizer's own encoders and weights and the whole five-color palette.

use std::path::Path;

use candle_core::{Tensor, D};
use candle_nn::optim::AdamW;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, CheckpointMeta};
use crate::color::{lab_distance, lab_to_rgb_unclamped, rgb_to_lab, Palette, PALETTE_LEN};
use crate::dataset::CategoryVocab;
use crate::error::{Error, Result};
use crate::fusion::{ContextBuilder, ContextEncoder, ContextInput, EncoderConfig, FusionWeights, TokenVocab};
use crate::imaging::{upscale_nearest, LumaGrid, RgbGrid};
use crate::nn::{self, Conv2d, Linear, ParamStore};
use crate::palette_gan::{lsgan_d_loss, lsgan_g_loss, model_version, noise, StepReport};

pub const CHECKPOINT_KIND: &str = "colorizer_gan";

/// Chroma planes are predicted in `[-1,1]` and scaled by this.
pub const CHROMA_SCALE: f64 = 128.0;

pub const DEFAULT_ADHERENCE_THRESHOLD: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorizerConfig {
    pub alpha: f64,
    pub noise_dim: usize,
    pub d: usize,
    /// Base channel count of the generator and discriminator.
    pub channels: usize,
    /// Side of the square working resolution; a multiple of 4.
    pub resolution: usize,
    pub image_resolution: usize,
    pub vocab_size: usize,
    pub category_count: usize,
    pub weights: FusionWeights,
    /// Weight of the L1 chroma term added to the generator loss. Zero gives
    /// the pure adversarial objective.
    pub recon_weight: f64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl ColorizerConfig {
    pub fn new(vocab_size: usize, category_count: usize) -> Self {
        ColorizerConfig {
            alpha: 0.5,
            noise_dim: 8,
            d: 64,
            channels: 16,
            resolution: 128,
            image_resolution: 64,
            vocab_size,
            category_count,
            weights: FusionWeights::COLORIZER,
            recon_weight: 10.0,
            lr_g: 1e-3,
            lr_d: 1e-3,
            batch_size: 8,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::validation(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.resolution < 8 || self.resolution % 4 != 0 {
            return Err(Error::validation(format!(
                "working resolution must be a multiple of 4 and at least 8, got {}",
                self.resolution
            )));
        }
        if self.noise_dim == 0 || self.channels == 0 || self.batch_size == 0 {
            return Err(Error::validation("noise_dim, channels and batch_size must be positive"));
        }
        if !(self.recon_weight >= 0.0 && self.lr_g >= 0.0 && self.lr_d >= 0.0) {
            return Err(Error::validation("weights and learning rates must be non-negative"));
        }
        self.encoder_config().validate()?;
        self.weights.validate()
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            d: self.d,
            image_resolution: self.image_resolution,
            vocab_size: self.vocab_size,
            category_count: self.category_count,
            palette_slots: PALETTE_LEN,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorizeRequest {
    pub grayscale: LumaGrid,
    pub palette: Palette,
    pub context: ContextInput,
}

/// Colorized output. `lab` holds the requested Lab values before gamut
/// mapping; `rgb` is what gets rendered.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorizedImage {
    pub width: usize,
    pub height: usize,
    pub lab: Vec<[f64; 3]>,
    pub rgb: RgbGrid,
    /// Pixels whose chroma had to be reduced to fit the sRGB gamut.
    pub gamut_clipped: usize,
}

/// Maps a Lab color into sRGB keeping its lightness, shrinking chroma by
/// bisection when needed. Returns the color and whether it was reduced.
pub fn gamut_map(lab: [f64; 3]) -> ([f64; 3], bool) {
    const EPS: f64 = 1e-9;
    let inside = |rgb: &[f64; 3]| rgb.iter().all(|v| (-EPS..=1.0 + EPS).contains(v));
    let l = lab[0].clamp(0.0, 100.0);
    if l == 0.0 {
        return ([0.0; 3], lab[1] != 0.0 || lab[2] != 0.0);
    }
    let rgb = lab_to_rgb_unclamped([l, lab[1], lab[2]]);
    if inside(&rgb) {
        return (rgb.map(|v| v.clamp(0.0, 1.0)), false);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if inside(&lab_to_rgb_unclamped([l, lab[1] * mid, lab[2] * mid])) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rgb = lab_to_rgb_unclamped([l, lab[1] * lo, lab[2] * lo]);
    (rgb.map(|v| v.clamp(0.0, 1.0)), true)
}

/// Fraction of pixels within ΔE76 `threshold` (strictly) of some palette
/// color.
pub fn palette_adherence(image: &RgbGrid, palette: &Palette, threshold: f64) -> f64 {
    if image.pixels.is_empty() {
        return 0.0;
    }
    let targets = palette.lab();
    let hits = image
        .pixels
        .iter()
        .filter(|p| {
            let lab = rgb_to_lab(**p);
            targets.iter().any(|t| lab_distance(lab, *t) < threshold)
        })
        .count();
    hits as f64 / image.pixels.len() as f64
}

/// Encoder-decoder over the lightness plane. The condition and noise are
/// broadcast over the bottleneck, and the input plane is concatenated again
/// before the output head.
pub struct ColorGenerator {
    down1: Conv2d,
    down2: Conv2d,
    mid: Conv2d,
    up1: Conv2d,
    up2: Conv2d,
    head: Conv2d,
}

impl ColorGenerator {
    fn new(store: &mut ParamStore, cfg: &ColorizerConfig) -> Result<Self> {
        let c = cfg.channels;
        let cond = 2 * cfg.d + cfg.noise_dim;
        Ok(ColorGenerator {
            down1: Conv2d::new(store, "gen/down1", 1, c, 3, 2)?,
            down2: Conv2d::new(store, "gen/down2", c, 2 * c, 3, 2)?,
            mid: Conv2d::new(store, "gen/mid", 2 * c + cond, 2 * c, 3, 1)?,
            up1: Conv2d::new(store, "gen/up1", 3 * c, c, 3, 1)?,
            up2: Conv2d::new(store, "gen/up2", c + 1, c, 3, 1)?,
            head: Conv2d::new(store, "gen/head", c, 2, 3, 1)?,
        })
    }

    /// `l: [B,1,R,R]`, `y: [B,2d]`, `z: [B,noise]` → chroma `[B,2,R,R]` in
    /// `(-1,1)`.
    pub fn forward(&self, l: &Tensor, y: &Tensor, z: &Tensor) -> Result<Tensor> {
        let (_, _, h, w) = l.dims4()?;
        let e1 = nn::leaky(&self.down1.forward(l)?)?;
        let e2 = nn::leaky(&self.down2.forward(&e1)?)?;
        let (b, _, h4, w4) = e2.dims4()?;
        let cond = Tensor::cat(&[y, z], 1)?;
        let k = cond.dim(1)?;
        let cond = cond.reshape((b, k, 1, 1))?.broadcast_as((b, k, h4, w4))?;
        let m = nn::leaky(&self.mid.forward(&Tensor::cat(&[&e2, &cond], 1)?)?)?;
        let (_, _, h2, w2) = e1.dims4()?;
        let u1 = m.upsample_nearest2d(h2, w2)?;
        let u1 = nn::leaky(&self.up1.forward(&Tensor::cat(&[&u1, &e1], 1)?)?)?;
        let u2 = u1.upsample_nearest2d(h, w)?;
        let u2 = nn::leaky(&self.up2.forward(&Tensor::cat(&[&u2, l], 1)?)?)?;
        Ok(self.head.forward(&u2)?.tanh()?)
    }
}

/// Scores a (lightness, chroma) image under a condition.
pub struct ColorDiscriminator {
    conv1: Conv2d,
    conv2: Conv2d,
    fc1: Linear,
    fc2: Linear,
}

impl ColorDiscriminator {
    fn new(store: &mut ParamStore, cfg: &ColorizerConfig) -> Result<Self> {
        let c = cfg.channels;
        Ok(ColorDiscriminator {
            conv1: Conv2d::new(store, "disc/conv1", 3, c, 3, 2)?,
            conv2: Conv2d::new(store, "disc/conv2", c, 2 * c, 3, 2)?,
            fc1: Linear::new(store, "disc/fc1", 2 * c + 2 * cfg.d, 2 * c)?,
            fc2: Linear::new(store, "disc/fc2", 2 * c, 1)?,
        })
    }

    /// `l: [B,1,R,R]`, `ab: [B,2,R,R]`, `y: [B,2d]` → `[B]`.
    pub fn forward(&self, l: &Tensor, ab: &Tensor, y: &Tensor) -> Result<Tensor> {
        let x = Tensor::cat(&[l, ab], 1)?;
        let h = nn::leaky(&self.conv1.forward(&x)?)?;
        let h = nn::leaky(&self.conv2.forward(&h)?)?;
        let h = Tensor::cat(&[&nn::global_pool(&h)?, y], D::Minus1)?;
        let h = nn::leaky(&self.fc1.forward(&h)?)?;
        Ok(self.fc2.forward(&h)?.squeeze(1)?)
    }
}

/// A training pair at the working resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorizerExample {
    pub context: ContextInput,
    pub palette: Palette,
    pub image: RgbGrid,
}

pub struct Colorizer {
    config: ColorizerConfig,
    vocab: TokenVocab,
    categories: CategoryVocab,
    store: ParamStore,
    encoder: ContextEncoder,
    generator: ColorGenerator,
    discriminator: ColorDiscriminator,
}

impl Colorizer {
    pub fn new(config: ColorizerConfig, vocab: TokenVocab, categories: CategoryVocab) -> Result<Self> {
        config.validate()?;
        if config.vocab_size != vocab.len() {
            return Err(Error::Dimension {
                what: "vocabulary size",
                expected: config.vocab_size,
                got: vocab.len(),
            });
        }
        if config.category_count != categories.len() {
            return Err(Error::Dimension {
                what: "category count",
                expected: config.category_count,
                got: categories.len(),
            });
        }
        let mut store = ParamStore::new(config.seed);
        let encoder = ContextEncoder::new(&mut store, "enc", config.encoder_config(), config.weights)?;
        let generator = ColorGenerator::new(&mut store, &config)?;
        let discriminator = ColorDiscriminator::new(&mut store, &config)?;
        Ok(Colorizer {
            config,
            vocab,
            categories,
            store,
            encoder,
            generator,
            discriminator,
        })
    }

    pub fn config(&self) -> &ColorizerConfig {
        &self.config
    }

    pub fn vocab(&self) -> &TokenVocab {
        &self.vocab
    }

    pub fn categories(&self) -> &CategoryVocab {
        &self.categories
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn context_builder(&self) -> ContextBuilder<'_> {
        ContextBuilder {
            vocab: &self.vocab,
            categories: &self.categories,
            resolution: self.config.image_resolution,
        }
    }

    pub fn version(&self) -> Result<String> {
        model_version(&self.config.to_json(), &self.store)
    }

    fn check_resolution(&self, w: usize, h: usize) -> Result<()> {
        let r = self.config.resolution;
        if w != r || h != r {
            return Err(Error::validation(format!(
                "image is {w}x{h}, colorizer works at {r}x{r}"
            )));
        }
        Ok(())
    }

    fn lightness_tensor(&self, planes: &[&LumaGrid]) -> Result<Tensor> {
        let r = self.config.resolution;
        let data: Vec<f64> = planes.iter().flat_map(|g| g.data.iter().copied()).collect();
        Ok(Tensor::from_vec(data, (planes.len(), 1, r, r), &nn::device())?)
    }

    /// Chroma planes in `(-1,1)` for one request, `[2, R*R]` row-major.
    fn predict_chroma(&self, request: &ColorizeRequest, seed: u64) -> Result<[Vec<f64>; 2]> {
        let g = &request.grayscale;
        self.check_resolution(g.width, g.height)?;
        let y = self
            .encoder
            .forward(&[&request.context], &[request.palette.colors().as_slice()])?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = nn::rows(&[noise(&mut rng, self.config.noise_dim)])?;
        let ab = self.generator.forward(&self.lightness_tensor(&[g])?, &y, &z)?;
        let ab = ab.get(0)?;
        Ok([ab.get(0)?.flatten_all()?.to_vec1()?, ab.get(1)?.flatten_all()?.to_vec1()?])
    }

    /// Colorizes a grayscale image at the working resolution.
    pub fn colorize(&self, request: &ColorizeRequest, seed: u64) -> Result<ColorizedImage> {
        let [a, b] = self.predict_chroma(request, seed)?;
        let g = &request.grayscale;
        Ok(compose(g, &a, &b))
    }

    /// Colorizes an image of any size: the lightness is resampled to the
    /// working resolution for prediction, and the chroma is scaled back up
    /// with nearest-neighbor sampling and combined with the original
    /// full-resolution lightness.
    pub fn colorize_any(
        &self,
        grayscale: &LumaGrid,
        palette: &Palette,
        context: &ContextInput,
        seed: u64,
    ) -> Result<ColorizedImage> {
        let r = self.config.resolution;
        let request = ColorizeRequest {
            grayscale: grayscale.resize(r, r),
            palette: *palette,
            context: context.clone(),
        };
        let [a, b] = self.predict_chroma(&request, seed)?;
        let (w, h) = (grayscale.width, grayscale.height);
        let a = upscale_nearest(&a, r, r, w, h);
        let b = upscale_nearest(&b, r, r, w, h);
        Ok(compose(grayscale, &a, &b))
    }

    fn batch_tensors(&self, batch: &[&ColorizerExample]) -> Result<(Tensor, Tensor, Tensor)> {
        let r = self.config.resolution;
        let mut lum = Vec::with_capacity(batch.len());
        let mut chroma = Vec::with_capacity(batch.len() * 2 * r * r);
        for ex in batch {
            self.check_resolution(ex.image.width, ex.image.height)?;
            let [l, a, b] = ex.image.lab_planes();
            lum.push(LumaGrid {
                width: r,
                height: r,
                data: l.iter().map(|v| (v / 100.0).clamp(0.0, 1.0)).collect(),
            });
            chroma.extend(a.iter().map(|v| v / CHROMA_SCALE));
            chroma.extend(b.iter().map(|v| v / CHROMA_SCALE));
        }
        let refs: Vec<&LumaGrid> = lum.iter().collect();
        let l = self.lightness_tensor(&refs)?;
        let ab = Tensor::from_vec(chroma, (batch.len(), 2, r, r), &nn::device())?;
        let contexts: Vec<&ContextInput> = batch.iter().map(|e| &e.context).collect();
        let palettes: Vec<&[_]> = batch.iter().map(|e| e.palette.colors().as_slice()).collect();
        let y = self.encoder.forward(&contexts, &palettes)?;
        Ok((l, ab, y))
    }

    fn meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            kind: CHECKPOINT_KIND.into(),
            config_json: self.config.to_json(),
            vocab_json: self.vocab.to_json(),
            categories: self.categories.names().to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.meta(), &self.store.tensors())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (meta, tensors) = checkpoint::load(path, CHECKPOINT_KIND)?;
        let config: ColorizerConfig = serde_json::from_str(&meta.config_json)?;
        let vocab = TokenVocab::from_json(&meta.vocab_json)?;
        let categories = CategoryVocab::new(meta.categories.clone())?;
        let model = Colorizer::new(config, vocab, categories)?;
        model.store.assign(&tensors).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(model)
    }

    pub fn load_expecting(path: &Path, expected: &ColorizerConfig) -> Result<Self> {
        let (meta, _) = checkpoint::load(path, CHECKPOINT_KIND)?;
        checkpoint::ensure_config(path, &meta, &expected.to_json())?;
        Self::load(path)
    }
}

fn compose(grayscale: &LumaGrid, a: &[f64], b: &[f64]) -> ColorizedImage {
    let mut lab = Vec::with_capacity(grayscale.data.len());
    let mut pixels = Vec::with_capacity(grayscale.data.len());
    let mut clipped = 0;
    for (i, l) in grayscale.data.iter().enumerate() {
        let px = [l * 100.0, a[i] * CHROMA_SCALE, b[i] * CHROMA_SCALE];
        let (rgb, reduced) = gamut_map(px);
        clipped += reduced as usize;
        lab.push(px);
        pixels.push(rgb);
    }
    ColorizedImage {
        width: grayscale.width,
        height: grayscale.height,
        lab,
        rgb: RgbGrid {
            width: grayscale.width,
            height: grayscale.height,
            pixels,
        },
        gamut_clipped: clipped,
    }
}

/// Exclusive owner of a colorizer during training.
pub struct ColorizerTrainer {
    model: Colorizer,
    opt_d: AdamW,
    opt_g: AdamW,
    rng: ChaCha8Rng,
    step: usize,
}

impl ColorizerTrainer {
    pub fn new(model: Colorizer) -> Result<Self> {
        let opt_d = nn::adam(model.store.vars_under(&["enc/", "disc/"]), model.config.lr_d)?;
        let opt_g = nn::adam(model.store.vars_under(&["gen/"]), model.config.lr_g)?;
        let rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0xc010_712e);
        Ok(ColorizerTrainer {
            model,
            opt_d,
            opt_g,
            rng,
            step: 0,
        })
    }

    pub fn model(&self) -> &Colorizer {
        &self.model
    }

    pub fn into_model(self) -> Colorizer {
        self.model
    }

    /// One discriminator update followed by one generator update on
    /// `L_G + w·L1`. The report's `L_G` is the adversarial term alone.
    pub fn train_step(&mut self, batch: &[&ColorizerExample]) -> Result<StepReport> {
        if batch.is_empty() {
            return Err(Error::validation("empty training batch"));
        }
        let cfg = self.model.config.clone();
        let z_rows: Vec<Vec<f64>> = (0..batch.len()).map(|_| noise(&mut self.rng, cfg.noise_dim)).collect();
        let z = nn::rows(&z_rows)?;

        let (l, real, y) = self.model.batch_tensors(batch)?;
        let fake = self.model.generator.forward(&l, &y.detach(), &z)?.detach();
        let d_real = self.model.discriminator.forward(&l, &real, &y)?;
        let d_fake = self.model.discriminator.forward(&l, &fake, &y)?;
        let loss_d = lsgan_d_loss(&d_real, &d_fake, cfg.alpha)?;
        let loss_d_value = loss_d.to_scalar::<f64>()?;
        if !loss_d_value.is_finite() {
            return Err(Error::Divergence {
                step: self.step,
                loss_d: loss_d_value,
                loss_g: f64::NAN,
            });
        }
        nn::descend(&mut self.opt_d, &loss_d)?;

        let (l, real, y) = self.model.batch_tensors(batch)?;
        let y = y.detach();
        let fake = self.model.generator.forward(&l, &y, &z)?;
        let g_fake = self.model.discriminator.forward(&l, &fake, &y)?;
        let loss_adv = lsgan_g_loss(&g_fake, cfg.alpha)?;
        let recon = (&fake - &real)?.abs()?.mean_all()?;
        let total = (&loss_adv + (&recon * cfg.recon_weight)?)?;
        let loss_g_value = loss_adv.to_scalar::<f64>()?;
        let total_value = total.to_scalar::<f64>()?;
        if !total_value.is_finite() {
            return Err(Error::Divergence {
                step: self.step,
                loss_d: loss_d_value,
                loss_g: total_value,
            });
        }
        nn::descend(&mut self.opt_g, &total)?;

        let report = StepReport {
            step: self.step,
            loss_d: loss_d_value,
            loss_g: loss_g_value,
            loss_l1: Some(recon.to_scalar::<f64>()?),
            d_real: d_real.to_vec1()?,
            d_fake: d_fake.to_vec1()?,
            g_fake: g_fake.to_vec1()?,
        };
        self.step += 1;
        Ok(report)
    }

    pub fn fit(
        &mut self,
        examples: &[ColorizerExample],
        steps: usize,
        mut on_step: impl FnMut(&StepReport),
    ) -> Result<Vec<StepReport>> {
        if examples.is_empty() {
            return Err(Error::validation("no training examples"));
        }
        let mut reports = Vec::with_capacity(steps);
        for _ in 0..steps {
            let batch: Vec<&ColorizerExample> = (0..self.model.config.batch_size)
                .map(|_| &examples[self.rng.random_range(0..examples.len())])
                .collect();
            let r = self.train_step(&batch)?;
            on_step(&r);
            reports.push(r);
        }
        Ok(reports)
    }
}
