//! Small synthetic datasets and model configurations for smoke tests and
//! demos. Everything here trains in seconds to minutes on a CPU.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color::{Color, Palette, PALETTE_LEN};
use crate::colorizer::{Colorizer, ColorizerConfig, ColorizerExample};
use crate::dataset::CategoryVocab;
use crate::error::Result;
use crate::fusion::TokenVocab;
use crate::imaging::{LumaGrid, RgbGrid};
use crate::palette_gan::{GanConfig, PaletteExample, PaletteGan};

pub const TOY_RESOLUTION: usize = 16;
pub const DARK: &str = "dark";
pub const BRIGHT: &str = "bright";

fn random_palette(rng: &mut ChaCha8Rng, lightness: (f64, f64)) -> Result<Palette> {
    let colors = (0..PALETTE_LEN)
        .map(|_| {
            Color::hsl(
                rng.random_range(0.0..360.0),
                rng.random_range(0.3..0.9),
                rng.random_range(lightness.0..lightness.1),
            )
            .map(|c| c.to(crate::ColorSpace::Rgb))
        })
        .collect::<Result<Vec<_>>>()?;
    Palette::new(colors)
}

/// Small palette network over `vocab` and `categories`.
pub fn palette_model(vocab: TokenVocab, categories: CategoryVocab, seed: u64) -> Result<PaletteGan> {
    let mut cfg = GanConfig::new(vocab.len(), categories.len());
    cfg.d = 16;
    cfg.hidden = 64;
    cfg.noise_dim = 8;
    cfg.image_resolution = TOY_RESOLUTION;
    cfg.batch_size = 32;
    cfg.lr_g = 2e-3;
    cfg.lr_d = 2e-3;
    cfg.seed = seed;
    PaletteGan::new(cfg, vocab, categories)
}

/// Small colorizer over `vocab` and `categories`.
pub fn colorizer_model(vocab: TokenVocab, categories: CategoryVocab, seed: u64) -> Result<Colorizer> {
    let mut cfg = ColorizerConfig::new(vocab.len(), categories.len());
    cfg.d = 8;
    cfg.channels = 8;
    cfg.noise_dim = 4;
    cfg.resolution = TOY_RESOLUTION;
    cfg.image_resolution = TOY_RESOLUTION;
    cfg.batch_size = 8;
    cfg.lr_g = 2e-3;
    cfg.lr_d = 2e-3;
    cfg.seed = seed;
    Colorizer::new(cfg, vocab, categories)
}

/// `n` records alternating between "dark" contexts (dark image, palette
/// lightness 0.1–0.3) and "bright" ones (bright image, 0.7–0.9). Categories
/// are assigned at random so only text and image carry the signal.
pub fn dark_bright_examples(model: &PaletteGan, n: usize, seed: u64) -> Result<Vec<PaletteExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let builder = model.context_builder();
    let names = model.categories().names().to_vec();
    (0..n)
        .map(|i| {
            let (text, range, fill) = if i % 2 == 0 {
                (DARK, (0.1, 0.3), 0.2)
            } else {
                (BRIGHT, (0.7, 0.9), 0.8)
            };
            let category = &names[rng.random_range(0..names.len())];
            let image = LumaGrid::filled(TOY_RESOLUTION, TOY_RESOLUTION, fill);
            Ok(PaletteExample {
                context: builder.build(text, category, &image)?,
                palette: random_palette(&mut rng, range)?,
            })
        })
        .collect()
}

/// Vocabulary and categories for the dark/bright task.
pub fn dark_bright_vocab() -> (TokenVocab, CategoryVocab) {
    let vocab = TokenVocab::build([DARK, BRIGHT]);
    let categories = CategoryVocab::new(vec!["toy-a".into(), "toy-b".into()]).expect("valid names");
    (vocab, categories)
}

/// A red-dominated image: red tints of varying lightness with a little
/// per-pixel noise.
pub fn red_image(rng: &mut ChaCha8Rng, size: usize) -> Result<RgbGrid> {
    let base = rng.random_range(0.35..0.65);
    let pixels = (0..size * size)
        .map(|i| {
            let ramp = (i % size) as f64 / size as f64 * 0.2;
            let l = (base + ramp - 0.1 + rng.random_range(-0.03..0.03)).clamp(0.15, 0.85);
            Color::hsl(rng.random_range(-8.0f64..8.0).rem_euclid(360.0), 0.85, l).map(|c| c.to_rgb())
        })
        .collect::<Result<Vec<_>>>()?;
    RgbGrid::new(size, size, pixels)
}

/// `n` examples whose palettes are five shades of red and whose images are
/// red-tinted.
pub fn red_examples(model: &Colorizer, n: usize, seed: u64) -> Result<Vec<ColorizerExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let builder = model.context_builder();
    let names = model.categories().names().to_vec();
    let r = model.config().resolution;
    (0..n)
        .map(|_| {
            let image = red_image(&mut rng, r)?;
            let palette = Palette::new(
                (0..PALETTE_LEN)
                    .map(|k| Color::hsl(0.0, 0.8, 0.25 + 0.1 * k as f64).map(|c| c.to(crate::ColorSpace::Rgb)))
                    .collect::<Result<Vec<_>>>()?,
            )?;
            let category = &names[rng.random_range(0..names.len())];
            Ok(ColorizerExample {
                context: builder.build("red", category, &image.luma())?,
                palette,
                image,
            })
        })
        .collect()
}

/// Vocabulary and categories for the red colorization task.
pub fn red_vocab() -> (TokenVocab, CategoryVocab) {
    let vocab = TokenVocab::build(["red"]);
    let categories = CategoryVocab::new(vec!["toy".into()]).expect("valid name");
    (vocab, categories)
}
