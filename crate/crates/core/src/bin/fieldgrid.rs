use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Deserialize;

use fieldgrid::config::{ExtentSetting, PipelineConfig, ThresholdChoice};
use fieldgrid::edge::{self, BandComposite, ScharrOptions};
use fieldgrid::extract::{extract_with, ExtractOptions, MaskTriple, Method, ThresholdSet};
use fieldgrid::fusion::{consensus, mosaic_windows, WindowPrediction};
use fieldgrid::io::{self, DType};
use fieldgrid::labelgen::{rasterize_polygons, LabelSet};
use fieldgrid::metrics::{object_metrics, pixel_metrics, wilcoxon_signed_rank};
use fieldgrid::raster::{FieldLabelMap, GeoTransform, GridSpec, Raster};
use fieldgrid::report::{self, EvalReport, OptimizationReport};
use fieldgrid::synth::{degrade, generate_scene, SceneSpec};
use fieldgrid::threshold::{search_instance_thresholds, InstanceSearch};
use fieldgrid::vectorize::vectorize;

/// Field instance extraction and evaluation.
#[derive(Parser, Debug)]
#[command(name = "fieldgrid", version)]
struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for candidate evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scene with reference fields and oracle masks.
    Synth(SynthArgs),
    /// Build extent/boundary/distance label rasters from reference fields.
    Labels(LabelsArgs),
    /// Scharr edge pseudoprobability of an image.
    Scharr(ScharrArgs),
    /// Average overlapping window predictions into one mask raster.
    Mosaic(MosaicArgs),
    /// Average mask rasters from several dates.
    Consensus(ConsensusArgs),
    /// Extract field instances from masks.
    Extract(ExtractArgs),
    /// Search instance thresholds against reference fields.
    Optimize(OptimizeArgs),
    /// Score extracted fields against reference fields.
    Evaluate(EvaluateArgs),
    /// Tabulate evaluation reports and optionally compare two of them.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML scene description; flags below override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    fields: Option<usize>,
    #[arg(long)]
    crop_fraction: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    blur_sigma: Option<f64>,
    /// Also write this many degraded copies of the oracle masks.
    #[arg(long, default_value_t = 0)]
    dates: usize,
    #[arg(long, default_value_t = 0.3)]
    dropout: f64,
    #[arg(long, default_value_t = 0.05)]
    date_noise: f64,
}

#[derive(Args, Debug)]
struct LabelsArgs {
    /// Reference fields as GeoJSON.
    #[arg(long, conflicts_with = "fields")]
    polygons: Option<PathBuf>,
    /// Reference fields as a label map raster.
    #[arg(long)]
    fields: Option<PathBuf>,
    /// Raster whose grid the polygons are burned into.
    #[arg(long, requires = "polygons")]
    like: Option<PathBuf>,
    #[arg(long)]
    buffer_px: Option<usize>,
    /// 3-band float32 output (extent, boundary, distance).
    #[arg(long)]
    out: PathBuf,
    /// Rasterized label map output.
    #[arg(long)]
    fields_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScharrArgs {
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Rescale each band before averaging instead of after.
    #[arg(long)]
    per_band: bool,
}

#[derive(Args, Debug)]
struct MosaicArgs {
    /// JSON manifest: grid shape, geotransform and window files.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConsensusArgs {
    /// Mask rasters (3 bands each), one per date.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MethodArgs {
    /// cutoff or watershed.
    #[arg(long)]
    method: Option<Method>,
    /// Random candidates for the watershed search.
    #[arg(long)]
    budget: Option<usize>,
    /// auto, joint, mcc or a fixed extent threshold.
    #[arg(long)]
    extent: Option<ExtentSetting>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    masks: Option<PathBuf>,
    /// "extent,boundary,distance" or "optimize" (needs --reference).
    #[arg(long)]
    thresholds: Option<ThresholdChoice>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    polygons_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    masks: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    method: MethodArgs,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Full candidate table as CSV.
    #[arg(long)]
    candidates_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Extracted label map.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Row name in tables; defaults to the label file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Evaluation reports (JSON).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    csv: PathBuf,
    /// With exactly two reports: paired signed-rank test on per-field values.
    #[arg(long)]
    wilcoxon_out: Option<PathBuf>,
    /// Per-field value compared by the test: s_over, s_under or best_overlap.
    #[arg(long, default_value = "s_over")]
    metric: String,
}

#[derive(Deserialize)]
struct Manifest {
    width: usize,
    height: usize,
    geotransform: Option<GeoTransform>,
    windows: Vec<ManifestWindow>,
}

#[derive(Deserialize)]
struct ManifestWindow {
    row: usize,
    col: usize,
    path: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FIELDGRID_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Synth(a) => synth(&cfg, a),
        Command::Labels(a) => labels(&cfg, a),
        Command::Scharr(a) => scharr(&cfg, a),
        Command::Mosaic(a) => mosaic(a),
        Command::Consensus(a) => consensus_cmd(a),
        Command::Extract(a) => extract_cmd(&cfg, a),
        Command::Optimize(a) => optimize(&cfg, a),
        Command::Evaluate(a) => evaluate(&cfg, a),
        Command::Report(a) => report_cmd(a),
    }
}

fn pick(flag: Option<PathBuf>, from_config: &Option<PathBuf>, what: &str) -> anyhow::Result<PathBuf> {
    flag.or_else(|| from_config.clone())
        .ok_or_else(|| anyhow!("no {what} path given on the command line or in the config"))
}

fn read_masks(path: &Path) -> anyhow::Result<MaskTriple> {
    Ok(MaskTriple::from_stacked(&io::read_raster(path)?)?)
}

fn synth(cfg: &PipelineConfig, a: SynthArgs) -> anyhow::Result<()> {
    let out = pick(a.out, &cfg.paths.output, "output directory")?;
    let mut spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SceneSpec::default(),
    };
    spec.rng_seed = cfg.seed;
    spec.buffer_px = cfg.buffer_px;
    if let Some(v) = a.size {
        spec.size = v;
    }
    if let Some(v) = a.fields {
        spec.n_fields = v;
    }
    if let Some(v) = a.crop_fraction {
        spec.crop_fraction = v;
    }
    if let Some(v) = a.noise_sigma {
        spec.noise_sigma = v;
    }
    if let Some(v) = a.blur_sigma {
        spec.blur_sigma = v;
    }
    let scene = generate_scene(&spec)?;
    let gt = spec.geotransform();
    info!("scene with {} fields", scene.reference.max_label());
    io::write_raster(&scene.image, out.join("image.bin"), DType::Float32)?;
    io::write_label_map(&scene.reference, gt, out.join("reference.bin"))?;
    io::write_polygons(&vectorize(&scene.reference, &gt), out.join("reference.geojson"))?;
    io::write_raster(&label_stack(&scene.labels, gt)?, out.join("labels.bin"), DType::Float32)?;
    io::write_raster(&scene.oracle_masks.to_stacked(), out.join("masks.bin"), DType::Float32)?;
    for k in 0..a.dates {
        let seed = cfg.seed.wrapping_add(1 + k as u64);
        let d = degrade(&scene.oracle_masks, a.dropout, a.date_noise, seed)?;
        io::write_raster(&d.to_stacked(), out.join(format!("date_{k}.bin")), DType::Float32)?;
    }
    std::fs::write(out.join("scene.toml"), toml::to_string(&spec)?)
        .with_context(|| format!("writing {}", out.join("scene.toml").display()))?;
    Ok(())
}

fn label_stack(labels: &LabelSet, gt: GeoTransform) -> anyhow::Result<Raster> {
    let e = labels.extent.to_raster(gt);
    let b = labels.boundary.to_raster(gt);
    let d = labels.distance.clone().with_geotransform(gt);
    Ok(Raster::stack(&[&e, &b, &d])?)
}

fn labels(cfg: &PipelineConfig, a: LabelsArgs) -> anyhow::Result<()> {
    let (fields, gt) = match (a.polygons, a.fields) {
        (Some(p), None) => {
            let like = a.like.ok_or_else(|| anyhow!("--polygons needs --like <raster> for the grid"))?;
            let grid_src = io::read_raster(&like)?;
            let gt = grid_src.geotransform;
            let grid = GridSpec::new(grid_src.width(), grid_src.height(), gt);
            (rasterize_polygons(&io::read_polygons(&p)?, &grid), gt)
        }
        (None, Some(f)) => io::read_label_map(&f)?,
        _ => bail!("give exactly one of --polygons or --fields"),
    };
    let buffer = a.buffer_px.unwrap_or(cfg.buffer_px);
    if buffer == 0 {
        bail!("--buffer-px must be >= 1");
    }
    let set = LabelSet::from_labels(&fields, buffer);
    io::write_raster(&label_stack(&set, gt)?, &a.out, DType::Float32)?;
    if let Some(p) = a.fields_out {
        io::write_label_map(&fields, gt, p)?;
    }
    Ok(())
}

fn scharr(cfg: &PipelineConfig, a: ScharrArgs) -> anyhow::Result<()> {
    let image = io::read_raster(pick(a.image, &cfg.paths.image, "image")?)?;
    let composite = if a.per_band {
        BandComposite::RescaleThenAverage
    } else {
        BandComposite::AverageThenRescale
    };
    let p = edge::edge_pseudoprobability(&image, ScharrOptions::default(), composite)?;
    io::write_raster(&p, &a.out, DType::Float32)?;
    Ok(())
}

fn mosaic(a: MosaicArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.manifest)
        .with_context(|| format!("reading {}", a.manifest.display()))?;
    let m: Manifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.manifest.display()))?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let windows = m
        .windows
        .iter()
        .map(|w| {
            Ok(WindowPrediction {
                row: w.row,
                col: w.col,
                masks: read_masks(&base.join(&w.path))?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let gt = m.geotransform.unwrap_or_default();
    let out = mosaic_windows(&windows, m.width, m.height, gt)?;
    io::write_raster(&out.to_stacked(), &a.out, DType::Float32)?;
    Ok(())
}

fn consensus_cmd(a: ConsensusArgs) -> anyhow::Result<()> {
    let series = a.inputs.iter().map(|p| read_masks(p)).collect::<anyhow::Result<Vec<_>>>()?;
    io::write_raster(&consensus(&series)?.to_stacked(), &a.out, DType::Float32)?;
    Ok(())
}

fn instance_search(cfg: &PipelineConfig, m: &MethodArgs) -> InstanceSearch {
    let method = m.method.unwrap_or(cfg.method);
    let mut search = InstanceSearch::new(method)
        .budget(m.budget.unwrap_or(cfg.budget))
        .seed(cfg.seed)
        .extent(m.extent.unwrap_or(cfg.extent_strategy).resolve(method));
    search.extract = extract_options(cfg);
    search
}

fn extract_options(cfg: &PipelineConfig) -> ExtractOptions {
    ExtractOptions {
        connectivity: cfg.connectivity,
        min_field_size: cfg.min_field_size,
    }
}

fn extract_cmd(cfg: &PipelineConfig, a: ExtractArgs) -> anyhow::Result<()> {
    let masks = read_masks(&pick(a.masks, &cfg.paths.masks, "masks")?)?;
    let search = instance_search(cfg, &a.method);
    let t: ThresholdSet = match a.thresholds.unwrap_or(cfg.thresholds) {
        ThresholdChoice::Fixed(t) => t,
        ThresholdChoice::Optimize => {
            let ref_path = pick(a.reference, &cfg.paths.reference, "reference")
                .context("optimizing thresholds needs reference fields")?;
            let (reference, _) = io::read_label_map(ref_path)?;
            search_instance_thresholds(&masks, &reference, &search)?
                .selected
                .thresholds
        }
    };
    info!("extracting with {t:?}");
    let labels = extract_with(&masks, &t, search.method, &search.extract);
    let gt = masks.geotransform();
    io::write_label_map(&labels, gt, &a.out)?;
    if let Some(p) = a.polygons_out {
        io::write_polygons(&vectorize(&labels, &gt), p)?;
    }
    Ok(())
}

fn optimize(cfg: &PipelineConfig, a: OptimizeArgs) -> anyhow::Result<()> {
    let masks = read_masks(&pick(a.masks, &cfg.paths.masks, "masks")?)?;
    let (reference, _) = io::read_label_map(pick(a.reference, &cfg.paths.reference, "reference")?)?;
    let search = instance_search(cfg, &a.method);
    let outcome = search_instance_thresholds(&masks, &reference, &search)?;
    report::write_json(&OptimizationReport::new(&outcome, search.seed, search.budget), &a.out)?;
    if let Some(p) = a.candidates_csv {
        report::write_candidates_csv(&outcome.candidates, p)?;
    }
    Ok(())
}

fn evaluate(cfg: &PipelineConfig, a: EvaluateArgs) -> anyhow::Result<()> {
    let (extracted, _) = io::read_label_map(&a.labels)?;
    let (reference, _): (FieldLabelMap, _) =
        io::read_label_map(pick(a.reference, &cfg.paths.reference, "reference")?)?;
    let pixel = pixel_metrics(&extracted.extent(), &reference.extent())?;
    let object = object_metrics(&extracted, &reference)?;
    let name = a.name.unwrap_or_else(|| {
        a.labels
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let rep = EvalReport::new(name.clone(), pixel, object);
    report::write_json(&rep, &a.out)?;
    if let Some(p) = a.csv {
        report::write_summary_csv(&[(name, rep.object.summary)], p)?;
    }
    Ok(())
}

fn report_cmd(a: ReportArgs) -> anyhow::Result<()> {
    let reports = a
        .inputs
        .iter()
        .map(|p| Ok(report::read_json::<EvalReport>(p)?))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let rows: Vec<_> = reports.iter().map(|r| (r.name.clone(), r.object.summary)).collect();
    report::write_summary_csv(&rows, &a.csv)?;
    if let Some(out) = a.wilcoxon_out {
        let [x, y] = reports.as_slice() else {
            bail!("--wilcoxon-out needs exactly two reports");
        };
        let value = |f: &fieldgrid::metrics::ReferenceFieldMetrics| -> anyhow::Result<f64> {
            Ok(match a.metric.as_str() {
                "s_over" => f.s_over,
                "s_under" => f.s_under,
                "best_overlap" => f.best_overlap,
                other => bail!("unknown metric {other:?}"),
            })
        };
        let (mut va, mut vb) = (Vec::new(), Vec::new());
        for fa in &x.object.fields {
            if let Some(fb) = y.object.fields.iter().find(|f| f.reference_id == fa.reference_id) {
                va.push(value(fa)?);
                vb.push(value(fb)?);
            }
        }
        report::write_json(&wilcoxon_signed_rank(&va, &vb)?, out)?;
    }
    Ok(())
}
