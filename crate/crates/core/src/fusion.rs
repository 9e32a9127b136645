//! Modality encoders and the weighted context fusion.
//!
//! Each modality is encoded to a `d`-dimensional vector. The modality
//! context is the weighted sum `c1 = λ_text·E_text + λ_image·E_image +
//! λ_category·E_category`, the palette encoding is `c2`, and the condition
//! handed to the networks is their concatenation `y = [c1, c2]`.

use std::collections::BTreeMap;

use candle_core::{Tensor, D};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::color::Color;
use crate::dataset::clean_keyword;
use crate::error::{Error, Result};
use crate::imaging::LumaGrid;
use crate::nn::{self, Conv2d, Embedding, Linear, ParamStore};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;

/// Character-level token vocabulary. Ids 0 and 1 are reserved for padding
/// and unknown characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenVocab {
    ids: BTreeMap<String, u32>,
}

impl TokenVocab {
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut chars = std::collections::BTreeSet::new();
        for t in texts {
            chars.extend(clean_keyword(t).chars().filter(|c| !c.is_whitespace()));
        }
        let mut ids = BTreeMap::new();
        ids.insert("<pad>".to_string(), PAD);
        ids.insert("<unk>".to_string(), UNK);
        for (i, c) in chars.into_iter().enumerate() {
            ids.insert(c.to_string(), i as u32 + 2);
        }
        TokenVocab { ids }
    }

    pub fn from_map(ids: BTreeMap<String, u32>) -> Result<Self> {
        let mut seen: Vec<u32> = ids.values().copied().collect();
        seen.sort_unstable();
        if seen.iter().enumerate().any(|(i, id)| *id != i as u32) {
            return Err(Error::validation("vocabulary ids must be 0..n without gaps"));
        }
        if ids.get("<pad>") != Some(&PAD) || ids.get("<unk>") != Some(&UNK) {
            return Err(Error::validation("vocabulary must reserve 0=<pad> and 1=<unk>"));
        }
        Ok(TokenVocab { ids })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Cleans the text and maps each non-space character to its id, using
    /// the unknown id for characters outside the vocabulary.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        clean_keyword(text)
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| *self.ids.get(c.to_string().as_str()).unwrap_or(&UNK))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.ids).expect("string map serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_map(serde_json::from_str(json)?)
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// Raw multi-modal condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextInput {
    pub tokens: Vec<u32>,
    /// Grayscale at the encoder resolution, values are Lab lightness / 100.
    pub image: LumaGrid,
    pub category: u32,
}

/// Turns user-facing inputs into a [`ContextInput`]: tokenizes the text,
/// resolves the category name and resizes the grayscale image.
#[derive(Debug, Clone)]
pub struct ContextBuilder<'a> {
    pub vocab: &'a TokenVocab,
    pub categories: &'a crate::dataset::CategoryVocab,
    pub resolution: usize,
}

impl ContextBuilder<'_> {
    pub fn build(&self, text: &str, category: &str, image: &LumaGrid) -> Result<ContextInput> {
        let category = self
            .categories
            .id(category)
            .ok_or_else(|| Error::validation(format!("unknown category {category:?}")))?;
        Ok(ContextInput {
            tokens: self.vocab.encode(text),
            image: image.resize(self.resolution, self.resolution),
            category,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub text: f64,
    pub image: f64,
    pub category: f64,
}

impl FusionWeights {
    /// Defaults for palette generation.
    pub const PALETTE: FusionWeights = FusionWeights {
        text: 0.5,
        image: 0.4,
        category: 0.1,
    };

    /// Defaults for colorization.
    pub const COLORIZER: FusionWeights = FusionWeights {
        text: 0.3,
        image: 0.6,
        category: 0.1,
    };

    pub fn new(text: f64, image: f64, category: f64) -> Result<Self> {
        let w = FusionWeights {
            text,
            image,
            category,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("text", self.text), ("image", self.image), ("category", self.category)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("weight for {name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// The encoded condition: modality fusion `c1`, palette encoding `c2` and
/// their concatenation `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedContext {
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub y: Vec<f64>,
}

/// Weighted modality sum followed by concatenation with the palette
/// encoding.
pub fn fuse(
    weights: &FusionWeights,
    e_text: &[f64],
    e_image: &[f64],
    e_category: &[f64],
    c2: &[f64],
) -> Result<FusedContext> {
    weights.validate()?;
    let d = e_text.len();
    for (what, v) in [("image encoding", e_image), ("category encoding", e_category), ("palette encoding", c2)] {
        if v.len() != d {
            return Err(Error::Dimension {
                what,
                expected: d,
                got: v.len(),
            });
        }
    }
    let c1: Vec<f64> = (0..d)
        .map(|i| weights.text * e_text[i] + weights.image * e_image[i] + weights.category * e_category[i])
        .collect();
    let mut y = c1.clone();
    y.extend_from_slice(c2);
    Ok(FusedContext {
        c1,
        c2: c2.to_vec(),
        y,
    })
}

/// Batched form of [`fuse`] on `[B, d]` tensors, returning `y` as `[B, 2d]`.
pub fn fuse_tensors(
    weights: &FusionWeights,
    e_text: &Tensor,
    e_image: &Tensor,
    e_category: &Tensor,
    c2: &Tensor,
) -> Result<Tensor> {
    let c1 = ((e_text * weights.text)? + (e_image * weights.image)?)?;
    let c1 = (c1 + (e_category * weights.category)?)?;
    Ok(Tensor::cat(&[&c1, c2], D::Minus1)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Per-modality embedding width.
    pub d: usize,
    /// Side of the square grayscale input.
    pub image_resolution: usize,
    pub vocab_size: usize,
    pub category_count: usize,
    /// Color slots the palette encoder accepts.
    pub palette_slots: usize,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.image_resolution < 4 || self.category_count == 0 || self.palette_slots == 0 {
            return Err(Error::validation(format!("invalid encoder configuration {self:?}")));
        }
        if self.vocab_size < 2 {
            return Err(Error::validation("vocabulary must hold at least the two reserved ids"));
        }
        Ok(())
    }
}

/// Token embedding, masked mean pooling and a tanh projection. The empty
/// sequence encodes to the zero vector.
pub struct TextEncoder {
    embed: Embedding,
    proj: Linear,
    d: usize,
}

impl TextEncoder {
    fn new(store: &mut ParamStore, prefix: &str, cfg: &EncoderConfig) -> Result<Self> {
        Ok(TextEncoder {
            embed: Embedding::new(store, &format!("{prefix}/text/embed"), cfg.vocab_size, cfg.d)?,
            proj: Linear::new(store, &format!("{prefix}/text/proj"), cfg.d, cfg.d)?,
            d: cfg.d,
        })
    }

    pub fn forward(&self, batch: &[&[u32]]) -> Result<Tensor> {
        let b = batch.len();
        let max_len = batch.iter().map(|t| t.len()).max().unwrap_or(0);
        if max_len == 0 {
            return Ok(Tensor::zeros((b, self.d), nn::DTYPE, &nn::device())?);
        }
        let mut ids = Vec::with_capacity(b * max_len);
        let mut mask = Vec::with_capacity(b * max_len);
        let mut inv_count = Vec::with_capacity(b);
        let mut present = Vec::with_capacity(b);
        for tokens in batch {
            ids.extend_from_slice(tokens);
            ids.extend(std::iter::repeat(PAD).take(max_len - tokens.len()));
            mask.extend(std::iter::repeat(1.0).take(tokens.len()));
            mask.extend(std::iter::repeat(0.0).take(max_len - tokens.len()));
            inv_count.push(1.0 / tokens.len().max(1) as f64);
            present.push(if tokens.is_empty() { 0.0 } else { 1.0 });
        }
        let dev = nn::device();
        let emb = self.embed.forward(&ids)?.reshape((b, max_len, self.d))?;
        let mask = Tensor::from_vec(mask, (b, max_len, 1), &dev)?;
        let pooled = emb.broadcast_mul(&mask)?.sum(1)?;
        let pooled = pooled.broadcast_mul(&Tensor::from_vec(inv_count, (b, 1), &dev)?)?;
        let out = self.proj.forward(&pooled)?.tanh()?;
        Ok(out.broadcast_mul(&Tensor::from_vec(present, (b, 1), &dev)?)?)
    }
}

/// Two strided convolutions, global average pooling and a tanh projection.
pub struct ImageEncoder {
    conv1: Conv2d,
    conv2: Conv2d,
    proj: Linear,
    resolution: usize,
}

const IMAGE_CHANNELS: [usize; 2] = [8, 16];

impl ImageEncoder {
    fn new(store: &mut ParamStore, prefix: &str, cfg: &EncoderConfig) -> Result<Self> {
        Ok(ImageEncoder {
            conv1: Conv2d::new(store, &format!("{prefix}/image/conv1"), 1, IMAGE_CHANNELS[0], 3, 2)?,
            conv2: Conv2d::new(
                store,
                &format!("{prefix}/image/conv2"),
                IMAGE_CHANNELS[0],
                IMAGE_CHANNELS[1],
                3,
                2,
            )?,
            proj: Linear::new(store, &format!("{prefix}/image/proj"), IMAGE_CHANNELS[1], cfg.d)?,
            resolution: cfg.image_resolution,
        })
    }

    pub fn forward(&self, batch: &[&LumaGrid]) -> Result<Tensor> {
        let r = self.resolution;
        let mut data = Vec::with_capacity(batch.len() * r * r);
        for img in batch {
            if img.width != r || img.height != r {
                return Err(Error::validation(format!(
                    "grayscale image is {}x{}, encoder expects {r}x{r}",
                    img.width, img.height
                )));
            }
            data.extend_from_slice(&img.data);
        }
        let x = Tensor::from_vec(data, (batch.len(), 1, r, r), &nn::device())?;
        let h = nn::leaky(&self.conv1.forward(&x)?)?;
        let h = nn::leaky(&self.conv2.forward(&h)?)?;
        Ok(self.proj.forward(&nn::global_pool(&h)?)?.tanh()?)
    }
}

pub struct CategoryEncoder {
    table: Embedding,
}

impl CategoryEncoder {
    fn new(store: &mut ParamStore, prefix: &str, cfg: &EncoderConfig) -> Result<Self> {
        Ok(CategoryEncoder {
            table: Embedding::new(store, &format!("{prefix}/category"), cfg.category_count, cfg.d)?,
        })
    }

    pub fn forward(&self, ids: &[u32]) -> Result<Tensor> {
        self.table.forward(ids)
    }
}

/// Encodes up to `slots` RGB colors. Unused slots are zero and a presence
/// mask is appended, so the empty input maps to a fixed learned vector.
pub struct PaletteEncoder {
    proj: Linear,
    slots: usize,
}

impl PaletteEncoder {
    fn new(store: &mut ParamStore, prefix: &str, cfg: &EncoderConfig) -> Result<Self> {
        Ok(PaletteEncoder {
            proj: Linear::new(store, &format!("{prefix}/palette"), cfg.palette_slots * 4, cfg.d)?,
            slots: cfg.palette_slots,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    fn features(&self, colors: &[Color]) -> Result<Vec<f64>> {
        if colors.len() > self.slots {
            return Err(Error::validation(format!(
                "palette encoder takes at most {} colors, got {}",
                self.slots,
                colors.len()
            )));
        }
        let mut f = vec![0.0; self.slots * 4];
        for (i, c) in colors.iter().enumerate() {
            f[i * 3..i * 3 + 3].copy_from_slice(&c.to_rgb());
            f[self.slots * 3 + i] = 1.0;
        }
        Ok(f)
    }

    pub fn forward(&self, batch: &[&[Color]]) -> Result<Tensor> {
        let feats = batch
            .iter()
            .map(|p| self.features(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.proj.forward(&nn::rows(&feats)?)?.tanh()?)
    }
}

/// The full set of modality encoders plus the fusion weights of one network.
pub struct ContextEncoder {
    pub text: TextEncoder,
    pub image: ImageEncoder,
    pub category: CategoryEncoder,
    pub palette: PaletteEncoder,
    pub weights: FusionWeights,
    config: EncoderConfig,
}

impl ContextEncoder {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        config: EncoderConfig,
        weights: FusionWeights,
    ) -> Result<Self> {
        config.validate()?;
        weights.validate()?;
        Ok(ContextEncoder {
            text: TextEncoder::new(store, prefix, &config)?,
            image: ImageEncoder::new(store, prefix, &config)?,
            category: CategoryEncoder::new(store, prefix, &config)?,
            palette: PaletteEncoder::new(store, prefix, &config)?,
            weights,
            config,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Width of `y`.
    pub fn output_dim(&self) -> usize {
        2 * self.config.d
    }

    pub fn validate(&self, ctx: &ContextInput) -> Result<()> {
        if let Some(t) = ctx.tokens.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(Error::validation(format!(
                "token id {t} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        if ctx.category as usize >= self.config.category_count {
            return Err(Error::validation(format!(
                "category id {} outside {} categories",
                ctx.category, self.config.category_count
            )));
        }
        let r = self.config.image_resolution;
        if ctx.image.width != r || ctx.image.height != r {
            return Err(Error::validation(format!(
                "grayscale image is {}x{}, encoder expects {r}x{r}",
                ctx.image.width, ctx.image.height
            )));
        }
        Ok(())
    }

    /// `[B, d]` modality encodings (text, image, category).
    pub fn encode_modalities(&self, contexts: &[&ContextInput]) -> Result<[Tensor; 3]> {
        for c in contexts {
            self.validate(c)?;
        }
        let tokens: Vec<&[u32]> = contexts.iter().map(|c| c.tokens.as_slice()).collect();
        let images: Vec<&LumaGrid> = contexts.iter().map(|c| &c.image).collect();
        let cats: Vec<u32> = contexts.iter().map(|c| c.category).collect();
        Ok([
            self.text.forward(&tokens)?,
            self.image.forward(&images)?,
            self.category.forward(&cats)?,
        ])
    }

    /// `y` for a batch, `[B, 2d]`.
    pub fn forward(&self, contexts: &[&ContextInput], palettes: &[&[Color]]) -> Result<Tensor> {
        if contexts.len() != palettes.len() {
            return Err(Error::Dimension {
                what: "palette batch",
                expected: contexts.len(),
                got: palettes.len(),
            });
        }
        let [t, i, c] = self.encode_modalities(contexts)?;
        let c2 = self.palette.forward(palettes)?;
        fuse_tensors(&self.weights, &t, &i, &c, &c2)
    }

    /// Single-example encoding with all intermediate vectors.
    pub fn encode(&self, context: &ContextInput, palette: &[Color]) -> Result<FusedContext> {
        let [t, i, c] = self.encode_modalities(&[context])?;
        let c2 = self.palette.forward(&[palette])?;
        let first = |x: &Tensor| -> Result<Vec<f64>> { Ok(x.get(0)?.to_vec1::<f64>()?) };
        fuse(&self.weights, &first(&t)?, &first(&i)?, &first(&c)?, &first(&c2)?)
    }
}
