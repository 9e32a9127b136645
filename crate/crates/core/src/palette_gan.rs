//! Autoregressive conditional LSGAN for five-color palettes.
//!
//! At step `t` the generator sees noise plus the fused condition built from
//! the text/image/category context and the colors emitted so far, and
//! proposes color `t`. The discriminator scores whether a color is a
//! plausible next color for that same condition. Five steps make a palette.
//!
//! Training is teacher-forced: prefixes come from the ground-truth palette.
//! The context encoders are updated with the discriminator; the generator
//! consumes the condition as a constant.

use std::path::Path;

use candle_core::Tensor;
use candle_nn::optim::AdamW;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, sha256_hex, CheckpointMeta};
use crate::color::{Color, ColorSpace, Palette, PALETTE_LEN};
use crate::dataset::CategoryVocab;
use crate::error::{Error, Result};
use crate::fusion::{ContextBuilder, ContextEncoder, ContextInput, EncoderConfig, FusedContext, FusionWeights, TokenVocab};
use crate::nn::{self, Linear, ParamStore};

pub const CHECKPOINT_KIND: &str = "palette_gan";

/// `α(s_real − 1)² + (1 − α)s_fake²`.
pub fn loss_discriminator(score_real: f64, score_fake: f64, alpha: f64) -> f64 {
    alpha * (score_real - 1.0).powi(2) + (1.0 - alpha) * score_fake.powi(2)
}

/// `α(s_fake − 1)²`.
pub fn loss_generator(score_fake: f64, alpha: f64) -> f64 {
    alpha * (score_fake - 1.0).powi(2)
}

/// Batch-mean discriminator loss on score tensors.
pub fn lsgan_d_loss(real: &Tensor, fake: &Tensor, alpha: f64) -> Result<Tensor> {
    let r = ((real - 1.0)?.sqr()?.mean_all()? * alpha)?;
    let f = (fake.sqr()?.mean_all()? * (1.0 - alpha))?;
    Ok((r + f)?)
}

/// Batch-mean generator loss on score tensors.
pub fn lsgan_g_loss(fake: &Tensor, alpha: f64) -> Result<Tensor> {
    Ok(((fake - 1.0)?.sqr()?.mean_all()? * alpha)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub alpha: f64,
    pub noise_dim: usize,
    /// Per-modality encoding width; the condition `y` is `2d` wide.
    pub d: usize,
    pub hidden: usize,
    pub image_resolution: usize,
    pub vocab_size: usize,
    pub category_count: usize,
    pub weights: FusionWeights,
    pub lr_g: f64,
    pub lr_d: f64,
    pub batch_size: usize,
    pub steps_per_epoch: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl GanConfig {
    pub fn new(vocab_size: usize, category_count: usize) -> Self {
        GanConfig {
            alpha: 0.5,
            noise_dim: 16,
            d: 128,
            hidden: 128,
            image_resolution: 64,
            vocab_size,
            category_count,
            weights: FusionWeights::PALETTE,
            lr_g: 1e-3,
            lr_d: 1e-3,
            batch_size: 32,
            steps_per_epoch: 100,
            epochs: 20,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::validation(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.noise_dim == 0 || self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::validation("noise_dim, hidden and batch_size must be positive"));
        }
        if !(self.lr_g >= 0.0 && self.lr_d >= 0.0) {
            return Err(Error::validation("learning rates must be non-negative"));
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
            palette_slots: PALETTE_LEN - 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Three fully connected layers with a sigmoid head: one RGB color.
pub struct Generator {
    l1: Linear,
    l2: Linear,
    l3: Linear,
}

impl Generator {
    fn new(store: &mut ParamStore, cfg: &GanConfig) -> Result<Self> {
        Ok(Generator {
            l1: Linear::new(store, "gen/l1", cfg.noise_dim + 2 * cfg.d, cfg.hidden)?,
            l2: Linear::new(store, "gen/l2", cfg.hidden, cfg.hidden)?,
            l3: Linear::new(store, "gen/l3", cfg.hidden, 3)?,
        })
    }

    /// `z: [B, noise]`, `y: [B, 2d]` → `[B, 3]` in `(0,1)`.
    pub fn forward(&self, z: &Tensor, y: &Tensor) -> Result<Tensor> {
        let h = Tensor::cat(&[z, y], 1)?;
        let h = nn::leaky(&self.l1.forward(&h)?)?;
        let h = nn::leaky(&self.l2.forward(&h)?)?;
        nn::sigmoid(&self.l3.forward(&h)?)
    }
}

/// Three fully connected layers with an unbounded linear head.
pub struct Discriminator {
    l1: Linear,
    l2: Linear,
    l3: Linear,
}

impl Discriminator {
    fn new(store: &mut ParamStore, cfg: &GanConfig) -> Result<Self> {
        Ok(Discriminator {
            l1: Linear::new(store, "disc/l1", 3 + 2 * cfg.d, cfg.hidden)?,
            l2: Linear::new(store, "disc/l2", cfg.hidden, cfg.hidden)?,
            l3: Linear::new(store, "disc/l3", cfg.hidden, 1)?,
        })
    }

    /// `x: [B, 3]`, `y: [B, 2d]` → `[B]`.
    pub fn forward(&self, x: &Tensor, y: &Tensor) -> Result<Tensor> {
        let h = Tensor::cat(&[x, y], 1)?;
        let h = nn::leaky(&self.l1.forward(&h)?)?;
        let h = nn::leaky(&self.l2.forward(&h)?)?;
        Ok(self.l3.forward(&h)?.squeeze(1)?)
    }
}

/// One teacher-forced sample: the context, its palette and the step whose
/// color is the target. The prefix is `palette[..step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingItem {
    pub context: ContextInput,
    pub palette: Palette,
    pub step: usize,
}

impl TrainingItem {
    pub fn prefix(&self) -> &[Color] {
        &self.palette.colors()[..self.step]
    }

    pub fn target(&self) -> &Color {
        &self.palette.colors()[self.step]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    items: Vec<TrainingItem>,
}

impl TrainingBatch {
    pub fn new(items: Vec<TrainingItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::validation("empty training batch"));
        }
        if let Some(it) = items.iter().find(|it| it.step >= PALETTE_LEN) {
            return Err(Error::validation(format!("step {} outside 0..{PALETTE_LEN}", it.step)));
        }
        Ok(TrainingBatch { items })
    }

    pub fn items(&self) -> &[TrainingItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// A context paired with its ground-truth palette.
#[derive(Debug, Clone, PartialEq)]
pub struct PaletteExample {
    pub context: ContextInput,
    pub palette: Palette,
}

/// Graph-attached loss with the discriminator scores it was built from.
pub struct LossTerms {
    pub loss: Tensor,
    /// Scores on real colors (discriminator loss only).
    pub real: Option<Tensor>,
    /// Scores on generated colors.
    pub fake: Tensor,
}

pub struct PaletteGan {
    config: GanConfig,
    vocab: TokenVocab,
    categories: CategoryVocab,
    store: ParamStore,
    encoder: ContextEncoder,
    generator: Generator,
    discriminator: Discriminator,
}

impl PaletteGan {
    /// Freshly initialized model; parameters are drawn from `config.seed`.
    pub fn new(config: GanConfig, vocab: TokenVocab, categories: CategoryVocab) -> Result<Self> {
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
        let generator = Generator::new(&mut store, &config)?;
        let discriminator = Discriminator::new(&mut store, &config)?;
        Ok(PaletteGan {
            config,
            vocab,
            categories,
            store,
            encoder,
            generator,
            discriminator,
        })
    }

    pub fn config(&self) -> &GanConfig {
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

    pub fn encoder(&self) -> &ContextEncoder {
        &self.encoder
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.discriminator
    }

    pub fn context_builder(&self) -> ContextBuilder<'_> {
        ContextBuilder {
            vocab: &self.vocab,
            categories: &self.categories,
            resolution: self.config.image_resolution,
        }
    }

    /// Digest of configuration and current parameters.
    pub fn version(&self) -> Result<String> {
        model_version(&self.config.to_json(), &self.store)
    }

    fn check_y(&self, y: &FusedContext) -> Result<()> {
        let want = 2 * self.config.d;
        if y.y.len() != want {
            return Err(Error::Dimension {
                what: "fused context",
                expected: want,
                got: y.y.len(),
            });
        }
        Ok(())
    }

    pub fn generator_forward(&self, z: &[f64], y: &FusedContext) -> Result<Color> {
        if z.len() != self.config.noise_dim {
            return Err(Error::Dimension {
                what: "noise",
                expected: self.config.noise_dim,
                got: z.len(),
            });
        }
        self.check_y(y)?;
        let out = self
            .generator
            .forward(&nn::rows(&[z.to_vec()])?, &nn::rows(&[y.y.clone()])?)?;
        let rgb = out.get(0)?.to_vec1::<f64>()?;
        Ok(Color::clamped(ColorSpace::Rgb, [rgb[0], rgb[1], rgb[2]]))
    }

    pub fn discriminator_forward(&self, x: &Color, y: &FusedContext) -> Result<f64> {
        self.check_y(y)?;
        let x = nn::rows(&[x.to_rgb().to_vec()])?;
        let s = self.discriminator.forward(&x, &nn::rows(&[y.y.clone()])?)?;
        Ok(s.get(0)?.to_scalar::<f64>()?)
    }

    /// The next color after `prefix` for a given noise vector.
    pub fn next_color(&self, context: &ContextInput, prefix: &[Color], z: &[f64]) -> Result<Color> {
        let y = self.encoder.encode(context, prefix)?;
        self.generator_forward(z, &y)
    }

    /// Runs five generation steps, feeding each emitted color back into the
    /// prefix. Noise comes from a stream seeded by `seed`.
    pub fn sample_palette(&self, context: &ContextInput, seed: u64) -> Result<Palette> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut colors: Vec<Color> = Vec::with_capacity(PALETTE_LEN);
        for _ in 0..PALETTE_LEN {
            let z = noise(&mut rng, self.config.noise_dim);
            let c = self.next_color(context, &colors, &z)?;
            colors.push(c);
        }
        Palette::new(colors)
    }

    fn batch_condition(&self, batch: &TrainingBatch) -> Result<(Tensor, Tensor)> {
        let contexts: Vec<&ContextInput> = batch.items.iter().map(|i| &i.context).collect();
        let prefixes: Vec<&[Color]> = batch.items.iter().map(TrainingItem::prefix).collect();
        let y = self.encoder.forward(&contexts, &prefixes)?;
        let x = nn::rows(
            &batch
                .items
                .iter()
                .map(|i| i.target().to_rgb().to_vec())
                .collect::<Vec<_>>(),
        )?;
        Ok((x, y))
    }

    /// Generated colors `[B, 3]` for a batch and noise `z: [B, noise]`. The
    /// condition enters detached, so only generator parameters are upstream.
    pub fn generate_batch(&self, batch: &TrainingBatch, z: &Tensor) -> Result<Tensor> {
        let (_, y) = self.batch_condition(batch)?;
        self.generator.forward(z, &y.detach())
    }

    /// `L_D` on a batch against the given generated colors, differentiable in
    /// the encoder and discriminator parameters.
    pub fn discriminator_loss(&self, batch: &TrainingBatch, fake: &Tensor) -> Result<LossTerms> {
        let (x, y) = self.batch_condition(batch)?;
        let real = self.discriminator.forward(&x, &y)?;
        let fake = self.discriminator.forward(&fake.detach(), &y)?;
        Ok(LossTerms {
            loss: lsgan_d_loss(&real, &fake, self.config.alpha)?,
            real: Some(real),
            fake,
        })
    }

    /// `L_G` on a batch for noise `z`, differentiable in the generator and
    /// discriminator parameters.
    pub fn generator_loss(&self, batch: &TrainingBatch, z: &Tensor) -> Result<LossTerms> {
        let (_, y) = self.batch_condition(batch)?;
        let y = y.detach();
        let fake = self.discriminator.forward(&self.generator.forward(z, &y)?, &y)?;
        Ok(LossTerms {
            loss: lsgan_g_loss(&fake, self.config.alpha)?,
            real: None,
            fake,
        })
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
        let config: GanConfig = serde_json::from_str(&meta.config_json)?;
        let vocab = TokenVocab::from_json(&meta.vocab_json)?;
        let categories = CategoryVocab::new(meta.categories.clone())?;
        let model = PaletteGan::new(config, vocab, categories)?;
        model.store.assign(&tensors).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(model)
    }

    /// Loads only if the stored configuration equals `expected`.
    pub fn load_expecting(path: &Path, expected: &GanConfig) -> Result<Self> {
        let (meta, _) = checkpoint::load(path, CHECKPOINT_KIND)?;
        checkpoint::ensure_config(path, &meta, &expected.to_json())?;
        Self::load(path)
    }
}

pub(crate) fn model_version(config_json: &str, store: &ParamStore) -> Result<String> {
    let mut bytes = config_json.as_bytes().to_vec();
    for (name, values) in store.snapshot()? {
        bytes.extend_from_slice(name.as_bytes());
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(sha256_hex(&bytes)[..16].to_string())
}

pub(crate) fn noise(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Scalar outcome of one alternating update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    #[serde(rename = "L_D")]
    pub loss_d: f64,
    #[serde(rename = "L_G")]
    pub loss_g: f64,
    /// Mean absolute chroma error, for networks with a reconstruction term.
    #[serde(rename = "L1", skip_serializing_if = "Option::is_none", default)]
    pub loss_l1: Option<f64>,
    /// Discriminator scores on real and generated colors in the D update.
    #[serde(skip)]
    pub d_real: Vec<f64>,
    #[serde(skip)]
    pub d_fake: Vec<f64>,
    /// Discriminator scores on generated colors in the G update.
    #[serde(skip)]
    pub g_fake: Vec<f64>,
}

/// Exclusive owner of a model during training.
pub struct PaletteTrainer {
    model: PaletteGan,
    opt_d: AdamW,
    opt_g: AdamW,
    rng: ChaCha8Rng,
    step: usize,
}

impl PaletteTrainer {
    pub fn new(model: PaletteGan) -> Result<Self> {
        let opt_d = nn::adam(model.store.vars_under(&["enc/", "disc/"]), model.config.lr_d)?;
        let opt_g = nn::adam(model.store.vars_under(&["gen/"]), model.config.lr_g)?;
        let rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0x5eed_0f_7a1e);
        Ok(PaletteTrainer {
            model,
            opt_d,
            opt_g,
            rng,
            step: 0,
        })
    }

    pub fn model(&self) -> &PaletteGan {
        &self.model
    }

    pub fn into_model(self) -> PaletteGan {
        self.model
    }

    /// One discriminator update on `L_D` followed by one generator update on
    /// `L_G`, sharing the same noise draw.
    pub fn train_step(&mut self, batch: &TrainingBatch) -> Result<StepReport> {
        let cfg = &self.model.config;
        let b = batch.len();
        let z_rows: Vec<Vec<f64>> = (0..b).map(|_| noise(&mut self.rng, cfg.noise_dim)).collect();
        let z = nn::rows(&z_rows)?;

        let fake = self.model.generate_batch(batch, &z)?;
        let d = self.model.discriminator_loss(batch, &fake)?;
        let loss_d_value = d.loss.to_scalar::<f64>()?;
        if !loss_d_value.is_finite() {
            return Err(Error::Divergence {
                step: self.step,
                loss_d: loss_d_value,
                loss_g: f64::NAN,
            });
        }
        nn::descend(&mut self.opt_d, &d.loss)?;

        let g = self.model.generator_loss(batch, &z)?;
        let loss_g_value = g.loss.to_scalar::<f64>()?;
        if !loss_g_value.is_finite() {
            return Err(Error::Divergence {
                step: self.step,
                loss_d: loss_d_value,
                loss_g: loss_g_value,
            });
        }
        nn::descend(&mut self.opt_g, &g.loss)?;

        let report = StepReport {
            step: self.step,
            loss_d: loss_d_value,
            loss_g: loss_g_value,
            loss_l1: None,
            d_real: d.real.expect("discriminator loss keeps real scores").to_vec1()?,
            d_fake: d.fake.to_vec1()?,
            g_fake: g.fake.to_vec1()?,
        };
        self.step += 1;
        Ok(report)
    }

    /// Draws a batch of (example, step) pairs uniformly.
    pub fn sample_batch(&mut self, examples: &[PaletteExample]) -> Result<TrainingBatch> {
        use rand::Rng;
        if examples.is_empty() {
            return Err(Error::validation("no training examples"));
        }
        let items = (0..self.model.config.batch_size)
            .map(|_| {
                let ex = &examples[self.rng.random_range(0..examples.len())];
                TrainingItem {
                    context: ex.context.clone(),
                    palette: ex.palette,
                    step: self.rng.random_range(0..PALETTE_LEN),
                }
            })
            .collect();
        TrainingBatch::new(items)
    }

    /// Runs `steps` updates on batches drawn from `examples`, calling
    /// `on_step` after each.
    pub fn fit(
        &mut self,
        examples: &[PaletteExample],
        steps: usize,
        mut on_step: impl FnMut(&StepReport),
    ) -> Result<Vec<StepReport>> {
        let mut reports = Vec::with_capacity(steps);
        for _ in 0..steps {
            let batch = self.sample_batch(examples)?;
            let r = self.train_step(&batch)?;
            on_step(&r);
            reports.push(r);
        }
        Ok(reports)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::LumaGrid;

    pub(crate) fn tiny_model(seed: u64) -> PaletteGan {
        let vocab = TokenVocab::build(["dark bright"]);
        let categories = CategoryVocab::new(vec!["a".into(), "b".into()]).unwrap();
        let mut cfg = GanConfig::new(vocab.len(), categories.len());
        cfg.d = 8;
        cfg.noise_dim = 4;
        cfg.hidden = 16;
        cfg.image_resolution = 8;
        cfg.batch_size = 4;
        cfg.seed = seed;
        PaletteGan::new(cfg, vocab, categories).unwrap()
    }

    fn ctx(model: &PaletteGan, text: &str, fill: f64) -> ContextInput {
        model
            .context_builder()
            .build(text, "a", &LumaGrid::filled(8, 8, fill))
            .unwrap()
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss_discriminator(1.0, 0.0, 0.5), 0.0);
        assert_eq!(loss_discriminator(0.0, 1.0, 0.5), 1.0);
        assert_eq!(loss_discriminator(0.5, 0.5, 0.5), 0.25);
        assert_eq!(loss_generator(1.0, 0.5), 0.0);
        assert_eq!(loss_generator(0.0, 0.5), 0.5);
        assert_eq!(loss_generator(0.5, 0.5), 0.125);
    }

    #[test]
    fn tensor_losses_average_scalar_losses() {
        let real = [0.3, 1.7, -0.2];
        let fake = [0.9, 0.1, 2.5];
        let dev = nn::device();
        let rt = Tensor::new(&real, &dev).unwrap();
        let ft = Tensor::new(&fake, &dev).unwrap();
        let ld = lsgan_d_loss(&rt, &ft, 0.3).unwrap().to_scalar::<f64>().unwrap();
        let lg = lsgan_g_loss(&ft, 0.3).unwrap().to_scalar::<f64>().unwrap();
        let ld_ref: f64 = (0..3).map(|i| loss_discriminator(real[i], fake[i], 0.3)).sum::<f64>() / 3.0;
        let lg_ref: f64 = fake.iter().map(|f| loss_generator(*f, 0.3)).sum::<f64>() / 3.0;
        assert!((ld - ld_ref).abs() < 1e-12);
        assert!((lg - lg_ref).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_bad_alpha() {
        let mut cfg = GanConfig::new(4, 2);
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_err());
        cfg.alpha = 0.5;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn forward_dimension_checks() {
        let m = tiny_model(0);
        let c = ctx(&m, "dark", 0.2);
        let y = m.encoder().encode(&c, &[]).unwrap();
        assert!(m.generator_forward(&[0.0; 3], &y).is_err());
        let short = FusedContext {
            c1: vec![0.0; 8],
            c2: vec![0.0; 7],
            y: vec![0.0; 15],
        };
        assert!(m.generator_forward(&[0.0; 4], &short).is_err());
        assert!(m.discriminator_forward(&Color::rgb(0.1, 0.2, 0.3).unwrap(), &short).is_err());
    }

    #[test]
    fn sampling_gives_five_deterministic_colors() {
        let m = tiny_model(1);
        let c = ctx(&m, "bright", 0.8);
        let a = m.sample_palette(&c, 42).unwrap();
        let b = m.sample_palette(&c, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.colors().len(), 5);
        assert_eq!(a.space(), ColorSpace::Rgb);
        assert_ne!(a, m.sample_palette(&c, 43).unwrap());
    }

    #[test]
    fn batch_rejects_step_five() {
        let m = tiny_model(2);
        let p = Palette::from_hex(&["#000000"; 5]).unwrap();
        let item = TrainingItem {
            context: ctx(&m, "dark", 0.1),
            palette: p,
            step: 5,
        };
        assert!(TrainingBatch::new(vec![item]).is_err());
        assert!(TrainingBatch::new(vec![]).is_err());
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut m = tiny_model(3);
        m.config.lr_d = 0.0;
        m.config.lr_g = 0.0;
        let before = m.params().snapshot().unwrap();
        let p = Palette::from_hex(&["#102030", "#405060", "#708090", "#A0B0C0", "#D0E0F0"]).unwrap();
        let examples = vec![PaletteExample {
            context: ctx(&m, "dark", 0.3),
            palette: p,
        }];
        let mut trainer = PaletteTrainer::new(m).unwrap();
        trainer.fit(&examples, 3, |_| {}).unwrap();
        assert_eq!(trainer.model().params().snapshot().unwrap(), before);
    }

    #[test]
    fn checkpoint_round_trip_and_config_guard() {
        let m = tiny_model(4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.safetensors");
        m.save(&path).unwrap();
        let back = PaletteGan::load(&path).unwrap();
        assert_eq!(back.params().snapshot().unwrap(), m.params().snapshot().unwrap());
        assert_eq!(back.version().unwrap(), m.version().unwrap());
        assert!(PaletteGan::load_expecting(&path, m.config()).is_ok());
        let mut other = m.config().clone();
        other.hidden = 32;
        let err = PaletteGan::load_expecting(&path, &other).err().unwrap();
        assert!(err.to_string().contains("hash mismatch"), "{err}");
    }
}
