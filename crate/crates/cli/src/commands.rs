use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cyscolor::colorizer::{Colorizer, ColorizerConfig, ColorizerExample, ColorizerTrainer};
use cyscolor::config::Config;
use cyscolor::dataset::{
    build_from_dir, load_dataset_file, write_dataset, CategoryVocab, CurationConfig, DatasetRecord, ImageDir,
    KMeansConfig, StatsSource,
};
use cyscolor::eval::{
    build_preference_study, corpus_comparison_report, run_diversity_grid, sample_records, tally, AnswerKey, Artifact,
    DiversityExperiment, Modality, StudyItem, Variant,
};
use cyscolor::fusion::TokenVocab;
use cyscolor::imaging::{encode_png16, load_rgb, LumaGrid, RgbGrid};
use cyscolor::palette_gan::{GanConfig, PaletteExample, PaletteGan, PaletteTrainer, StepReport};
use cyscolor::Palette;
use serde::Deserialize;

use crate::{
    Cli, ColorizeArgs, Command, DatasetBuildArgs, DatasetStatsArgs, DiversityArgs, EvaluateCommand, GenerateArgs,
    StatsOn, StudyArgs, TallyArgs, TrainColorizerArgs, TrainCommon, TrainPaletteArgs, Varied,
};

/// Bad invocation: missing inputs, conflicting or invalid flags.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(usage(format!("{what} {} does not exist or is not a file", path.display())));
    }
    Ok(())
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        return Err(usage(format!("{what} {} does not exist or is not a directory", path.display())));
    }
    Ok(())
}

fn model_path(flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let path = flag
        .clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| usage(format!("no {what} model given (use --model or the config file)")))?;
    require_file(&path, &format!("{what} model"))?;
    Ok(path)
}

struct Ctx<'a> {
    cli: &'a Cli,
    config: Config,
    seed: u64,
}

impl Ctx<'_> {
    fn emit(&self, value: &serde_json::Value, human: impl FnOnce() -> String) {
        if self.cli.json {
            println!("{value}");
        } else {
            println!("{}", human());
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(p) = &cli.config {
        require_file(p, "config file")?;
    }
    let config = Config::load(cli.config.as_deref()).map_err(|e| usage(e.to_string()))?;
    let seed = cli.seed.unwrap_or(config.seed);
    let ctx = Ctx { cli, config, seed };
    match &cli.command {
        Command::DatasetBuild(a) => dataset_build(&ctx, a),
        Command::DatasetStats(a) => dataset_stats(&ctx, a),
        Command::TrainPalette(a) => train_palette(&ctx, a),
        Command::TrainColorizer(a) => train_colorizer(&ctx, a),
        Command::Generate(a) => generate(&ctx, a),
        Command::Colorize(a) => colorize(&ctx, a),
        Command::Evaluate(EvaluateCommand::Diversity(a)) => diversity(&ctx, a),
        Command::Evaluate(EvaluateCommand::Study(a)) => study(&ctx, a),
        Command::Evaluate(EvaluateCommand::Tally(a)) => run_tally(&ctx, a),
        Command::Serve => serve(&ctx),
    }
}

fn dataset_build(ctx: &Ctx<'_>, a: &DatasetBuildArgs) -> Result<()> {
    require_dir(&a.images, "image directory")?;
    let categories = ctx.config.category_vocab()?;
    let kmeans = KMeansConfig {
        k: a.k,
        seed: ctx.seed,
        ..KMeansConfig::default()
    };
    let curation = CurationConfig {
        dedup_threshold: a.dedup_threshold,
        beta: a.beta,
    };
    let report = build_from_dir(&a.images, &categories, &kmeans, &curation)?;
    write_dataset(BufWriter::new(File::create(&a.out)?), &report.records)?;
    let skipped: Vec<_> = report
        .skipped
        .iter()
        .map(|(p, why)| serde_json::json!({ "image": p.display().to_string(), "reason": why }))
        .collect();
    ctx.emit(
        &serde_json::json!({ "records": report.records.len(), "skipped": skipped, "out": a.out }),
        || {
            format!(
                "wrote {} records to {} ({} skipped)",
                report.records.len(),
                a.out.display(),
                report.skipped.len()
            )
        },
    );
    Ok(())
}

fn load_records(path: &Path, categories: &CategoryVocab) -> Result<Vec<DatasetRecord>> {
    let report = load_dataset_file(path, categories, false).with_context(|| format!("reading {}", path.display()))?;
    for (line, why) in &report.rejected {
        tracing::warn!(file = %path.display(), line, reason = %why, "rejected record");
    }
    if report.records.is_empty() {
        bail!("{} holds no valid records", path.display());
    }
    Ok(report.records)
}

fn dataset_stats(ctx: &Ctx<'_>, a: &DatasetStatsArgs) -> Result<()> {
    require_file(&a.a, "--a")?;
    require_file(&a.b, "--b")?;
    let categories = ctx.config.category_vocab()?;
    let mut ra = load_records(&a.a, &categories)?;
    let mut rb = load_records(&a.b, &categories)?;
    if let Some(n) = a.sample {
        ra = sample_records(&ra, n, ctx.seed);
        rb = sample_records(&rb, n, ctx.seed.wrapping_add(1));
    }
    let dir_for = |flag: &Option<PathBuf>, data: &Path| -> Result<ImageDir> {
        let root = flag
            .clone()
            .unwrap_or_else(|| data.parent().map(Path::to_path_buf).unwrap_or_default());
        require_dir(&root, "image directory")?;
        Ok(ImageDir { root })
    };
    let report = match a.on {
        StatsOn::Palette => corpus_comparison_report(&ra, &StatsSource::Palette, &rb, &StatsSource::Palette)?,
        StatsOn::Image => {
            let da = dir_for(&a.images_a, &a.a)?;
            let db = dir_for(&a.images_b, &a.b)?;
            corpus_comparison_report(&ra, &StatsSource::Image(&da), &rb, &StatsSource::Image(&db))?
        }
    };
    if let Some(p) = &a.out_json {
        std::fs::write(p, report.to_json()?)?;
    }
    if let Some(p) = &a.out_csv {
        std::fs::write(p, report.to_csv()?)?;
    }
    println!("{}", report.to_json()?);
    Ok(())
}

fn training_set(common: &TrainCommon, categories: &CategoryVocab) -> Result<Vec<(DatasetRecord, RgbGrid)>> {
    require_file(&common.data, "--data")?;
    require_dir(&common.images, "--images")?;
    let records = load_records(&common.data, categories)?;
    records
        .into_iter()
        .map(|r| {
            let path = common.images.join(&r.image);
            let img = load_rgb(&path).with_context(|| format!("loading {}", path.display()))?;
            Ok((r, img))
        })
        .collect()
}

fn loss_log(path: &Option<PathBuf>) -> Result<Option<BufWriter<File>>> {
    Ok(match path {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    })
}

fn log_step(log: &mut Option<BufWriter<File>>, r: &StepReport) {
    if let Some(w) = log {
        if let Err(e) = serde_json::to_writer(&mut *w, r).map_err(std::io::Error::other).and_then(|_| w.write_all(b"\n")) {
            tracing::warn!(error = %e, "could not write loss log");
        }
    }
    if r.step % 100 == 0 {
        tracing::info!(step = r.step, loss_d = r.loss_d, loss_g = r.loss_g, "training");
    }
}

fn train_palette(ctx: &Ctx<'_>, a: &TrainPaletteArgs) -> Result<()> {
    let categories = ctx.config.category_vocab()?;
    let data = training_set(&a.common, &categories)?;
    let vocab = TokenVocab::build(data.iter().map(|(r, _)| r.text()).collect::<Vec<_>>().iter().map(String::as_str));
    let mut cfg = GanConfig::new(vocab.len(), categories.len());
    cfg.seed = ctx.seed;
    if let Some(v) = a.common.d {
        cfg.d = v;
    }
    if let Some(v) = a.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = a.common.image_resolution {
        cfg.image_resolution = v;
    }
    if let Some(v) = a.common.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.common.lr {
        cfg.lr_d = v;
        cfg.lr_g = v;
    }
    let model = PaletteGan::new(cfg, vocab, categories).map_err(|e| usage(e.to_string()))?;
    let builder = model.context_builder();
    let examples = data
        .iter()
        .map(|(r, img)| {
            Ok(PaletteExample {
                context: builder.build(&r.text(), &r.category, &img.luma())?,
                palette: r.palette,
            })
        })
        .collect::<cyscolor::Result<Vec<_>>>()?;
    let mut log = loss_log(&a.common.log)?;
    let mut trainer = PaletteTrainer::new(model)?;
    let reports = trainer.fit(&examples, a.common.steps, |r| log_step(&mut log, r))?;
    if let Some(w) = log.as_mut() {
        w.flush()?;
    }
    let model = trainer.into_model();
    model.save(&a.common.out)?;
    report_training(ctx, &a.common.out, &model.version()?, reports.last());
    Ok(())
}

fn report_training(ctx: &Ctx<'_>, out: &Path, version: &str, last: Option<&StepReport>) {
    let value = serde_json::json!({
        "out": out,
        "version": version,
        "steps": last.map_or(0, |r| r.step + 1),
        "L_D": last.map(|r| r.loss_d),
        "L_G": last.map(|r| r.loss_g),
    });
    ctx.emit(&value, || format!("saved {} (version {version})", out.display()));
}

fn train_colorizer(ctx: &Ctx<'_>, a: &TrainColorizerArgs) -> Result<()> {
    let categories = ctx.config.category_vocab()?;
    let data = training_set(&a.common, &categories)?;
    let vocab = TokenVocab::build(data.iter().map(|(r, _)| r.text()).collect::<Vec<_>>().iter().map(String::as_str));
    let mut cfg = ColorizerConfig::new(vocab.len(), categories.len());
    cfg.seed = ctx.seed;
    if let Some(v) = a.common.d {
        cfg.d = v;
    }
    if let Some(v) = a.resolution {
        cfg.resolution = v;
    }
    if let Some(v) = a.channels {
        cfg.channels = v;
    }
    if let Some(v) = a.recon_weight {
        cfg.recon_weight = v;
    }
    if let Some(v) = a.common.image_resolution {
        cfg.image_resolution = v;
    }
    if let Some(v) = a.common.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.common.lr {
        cfg.lr_d = v;
        cfg.lr_g = v;
    }
    let model = Colorizer::new(cfg, vocab, categories).map_err(|e| usage(e.to_string()))?;
    let r = model.config().resolution;
    let builder = model.context_builder();
    let examples = data
        .iter()
        .map(|(rec, img)| {
            Ok(ColorizerExample {
                context: builder.build(&rec.text(), &rec.category, &img.luma())?,
                palette: rec.palette,
                image: img.resize(r, r),
            })
        })
        .collect::<cyscolor::Result<Vec<_>>>()?;
    let mut log = loss_log(&a.common.log)?;
    let mut trainer = ColorizerTrainer::new(model)?;
    let reports = trainer.fit(&examples, a.common.steps, |r| log_step(&mut log, r))?;
    if let Some(w) = log.as_mut() {
        w.flush()?;
    }
    let model = trainer.into_model();
    model.save(&a.common.out)?;
    report_training(ctx, &a.common.out, &model.version()?, reports.last());
    Ok(())
}

fn luma_from(path: &Path) -> Result<LumaGrid> {
    require_file(path, "image")?;
    Ok(load_rgb(path)?.luma())
}

fn generate(ctx: &Ctx<'_>, a: &GenerateArgs) -> Result<()> {
    let path = model_path(&a.model, &ctx.config.palette_model, "palette")?;
    let image = luma_from(&a.image)?;
    let model = PaletteGan::load(&path)?;
    let context = model
        .context_builder()
        .build(&a.text, &a.category, &image)
        .map_err(|e| usage(e.to_string()))?;
    let palette = model.sample_palette(&context, ctx.seed)?;
    ctx.emit(&serde_json::json!({ "palette": palette, "seed": ctx.seed }), || {
        palette.to_hex().join(" ")
    });
    Ok(())
}

fn parse_palette(raw: &str) -> Result<Palette> {
    let hex: Vec<&str> = raw.split(',').map(str::trim).collect();
    Palette::from_hex(&hex).map_err(|e| usage(format!("--palette: {e}")))
}

fn colorize(ctx: &Ctx<'_>, a: &ColorizeArgs) -> Result<()> {
    let path = model_path(&a.model, &ctx.config.colorizer_model, "colorizer")?;
    let palette = parse_palette(&a.palette)?;
    let image = luma_from(&a.image)?;
    let model = Colorizer::load(&path)?;
    let category = a
        .category
        .clone()
        .unwrap_or_else(|| model.categories().names()[0].clone());
    let context = model
        .context_builder()
        .build(&a.text, &category, &image)
        .map_err(|e| usage(e.to_string()))?;
    let out = model.colorize_any(&image, &palette, &context, ctx.seed)?;
    std::fs::write(&a.out, encode_png16(&out.rgb)?)?;
    ctx.emit(
        &serde_json::json!({
            "out": a.out,
            "width": out.width,
            "height": out.height,
            "gamut_clipped": out.gamut_clipped,
        }),
        || format!("wrote {} ({}x{}, {} pixels gamut-mapped)", a.out.display(), out.width, out.height, out.gamut_clipped),
    );
    Ok(())
}

fn diversity(ctx: &Ctx<'_>, a: &DiversityArgs) -> Result<()> {
    let path = model_path(&a.model, &ctx.config.palette_model, "palette")?;
    let base_image = luma_from(&a.image)?;
    let (varied, variants) = match a.varied {
        Varied::Text => (Modality::Text, a.variants.iter().cloned().map(Variant::Text).collect()),
        Varied::Category => (Modality::Category, a.variants.iter().cloned().map(Variant::Category).collect()),
        Varied::Image => (
            Modality::Image,
            a.variants
                .iter()
                .map(|p| luma_from(Path::new(p)).map(Variant::Image))
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let model = PaletteGan::load(&path)?;
    let experiment = DiversityExperiment {
        varied,
        base_text: a.text.clone(),
        base_category: a.category.clone(),
        base_image,
        variants,
        seed: ctx.seed,
    };
    let grid = run_diversity_grid(&experiment, &model).map_err(|e| usage(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&grid)?);
    Ok(())
}

#[derive(Deserialize)]
struct StudyLine {
    keyword: String,
    palette: Option<Vec<String>>,
    image: Option<PathBuf>,
}

fn study_items(path: &Path) -> Result<Vec<StudyItem>> {
    require_file(path, "study input")?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut items = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), i + 1);
        let raw: StudyLine = serde_json::from_str(&line).with_context(at)?;
        let artifact = match (raw.palette, raw.image) {
            (Some(p), None) => Artifact::Palette(Palette::from_hex(&p).with_context(at)?),
            (None, Some(img)) => Artifact::Image(load_rgb(&base.join(img)).with_context(at)?),
            _ => bail!("{}: give exactly one of palette or image", at()),
        };
        items.push(StudyItem {
            keyword: raw.keyword,
            artifact,
        });
    }
    Ok(items)
}

fn study(ctx: &Ctx<'_>, a: &StudyArgs) -> Result<()> {
    let ours = study_items(&a.ours)?;
    let baseline = study_items(&a.baseline)?;
    if a.key.starts_with(&a.out) {
        return Err(usage("the answer key must be written outside the study bundle"));
    }
    let (manifest, key) = build_preference_study(&ours, &baseline, &a.out, ctx.seed)?;
    std::fs::write(&a.key, serde_json::to_vec_pretty(&key)?)?;
    ctx.emit(
        &serde_json::json!({ "pairs": manifest.pairs.len(), "bundle": a.out, "key": a.key }),
        || format!("wrote {} pairs to {}", manifest.pairs.len(), a.out.display()),
    );
    Ok(())
}

fn run_tally(_ctx: &Ctx<'_>, a: &TallyArgs) -> Result<()> {
    require_file(&a.votes, "--votes")?;
    require_file(&a.key, "--key")?;
    let key: AnswerKey = serde_json::from_slice(&std::fs::read(&a.key)?)?;
    let t = tally(File::open(&a.votes)?, &key)?;
    println!("{}", serde_json::to_string_pretty(&t)?);
    Ok(())
}

fn serve(ctx: &Ctx<'_>) -> Result<()> {
    let config = ctx.config.clone();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(cyscolor_gateway::serve(config))?;
    Ok(())
}
