use std::fs;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use catchcomp::aggregate::Method;
use catchcomp::compose::{compare_segmented, error_table, pair_with_truth, CompositionEstimate, Grouping};
use catchcomp::io::tables::{self, Precision};
use catchcomp::io::{self as cio, svg, DetectionFile, RunConfig};
use catchcomp::pipeline;
use catchcomp::sim::generate_scenario;
use catchcomp::stats::{
    coco_map, expert_agreement, repeated_stratified_kfold, AlphaBands, GroundTruthBox, Interpolation, IouKind,
    ScoredPrediction, SdConvention,
};
use catchcomp::Error;

#[derive(Parser)]
#[command(name = "catchcomp", version, about = "Catch composition from conveyor-belt detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded belt scenario as a detection file.
    Simulate(SimulateArgs),
    /// Track detection files into per-frame track rows.
    Track(TrackArgs),
    /// Label tracks and count species per AFO.
    Compose(ComposeArgs),
    /// COCO-style mAP of detections against annotations.
    EvaluateDetections(EvalDetArgs),
    /// Per-species composition error with paired tests.
    EvaluateComposition(EvalCompArgs),
    /// Agreement among expert identifications.
    Agreement(AgreementArgs),
    /// Repeated stratified k-fold splits.
    Kfold(KfoldArgs),
    /// Tables and plots for a set of per-AFO results.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the true species counts as CSV.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    common: Common,
    /// Detection files; standard input when absent or `-`.
    #[arg(long, short)]
    input: Vec<String>,
    /// Directory of PGM frames to estimate belt motion from (single input).
    #[arg(long)]
    frames: Option<PathBuf>,
}

#[derive(Args)]
struct ComposeArgs {
    #[command(flatten)]
    common: Common,
    /// Track CSV or detection files; standard input when absent or `-`.
    #[arg(long, short)]
    input: Vec<String>,
    #[arg(long)]
    method: Option<Method>,
    /// True counts CSV; adds the segmented fraction.
    #[arg(long)]
    ground_truth: Option<String>,
    #[arg(long, value_parser = parse_precision, default_value = "full")]
    decimals: Precision,
}

#[derive(Clone, Copy, ValueEnum)]
enum IouArg {
    Box,
    Mask,
}

#[derive(Clone, Copy, ValueEnum)]
enum InterpArg {
    Coco101,
    AllPoints,
}

impl From<InterpArg> for Interpolation {
    fn from(a: InterpArg) -> Self {
        match a {
            InterpArg::Coco101 => Interpolation::Coco101,
            InterpArg::AllPoints => Interpolation::AllPoints,
        }
    }
}

#[derive(Args)]
struct EvalDetArgs {
    #[command(flatten)]
    common: Common,
    /// Detection file with the predictions.
    #[arg(long, short)]
    input: String,
    /// Annotation file with the ground truth.
    #[arg(long)]
    annotations: String,
    #[arg(long, value_enum, default_value = "box")]
    iou: IouArg,
    #[arg(long, value_enum, default_value = "coco101")]
    interpolation: InterpArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SdArg {
    Sample,
    Population,
}

impl From<SdArg> for SdConvention {
    fn from(a: SdArg) -> Self {
        match a {
            SdArg::Sample => SdConvention::Sample,
            SdArg::Population => SdConvention::Population,
        }
    }
}

#[derive(Args)]
struct EvalCompArgs {
    #[command(flatten)]
    common: Common,
    /// Per-AFO table, or a composition CSV when --ground-truth is given.
    #[arg(long, short)]
    input: String,
    #[arg(long)]
    ground_truth: Option<String>,
    #[arg(long, default_value = "flat")]
    method: Method,
    #[arg(long, value_enum, default_value = "population")]
    sd: SdArg,
    #[arg(long, default_value = "0.10,0.05,0.01")]
    alpha_bands: AlphaBands,
    #[arg(long, value_parser = parse_precision, default_value = "1")]
    decimals: Precision,
}

#[derive(Args)]
struct AgreementArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, short)]
    input: String,
    #[arg(long, default_value_t = 4)]
    min_experts: usize,
    #[arg(long, value_enum, default_value = "sample")]
    sd: SdArg,
    #[arg(long, value_parser = parse_precision, default_value = "1")]
    decimals: Precision,
}

#[derive(Args)]
struct KfoldArgs {
    #[command(flatten)]
    common: Common,
    /// CSV with an id column and a label column.
    #[arg(long, short)]
    input: String,
    #[arg(long, default_value = "id")]
    id_column: String,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-AFO tables; segmentation is compared between the first two and
    /// composition error is reported for the last.
    #[arg(long, short, required = true)]
    input: Vec<String>,
    /// Output directory.
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, default_value = "flat")]
    method: Method,
    #[arg(long, value_enum, default_value = "population")]
    sd: SdArg,
    #[arg(long, default_value = "0.10,0.05,0.01")]
    alpha_bands: AlphaBands,
    #[arg(long, value_parser = parse_precision, default_value = "1")]
    decimals: Precision,
    /// Detection and annotation files for PR curves.
    #[arg(long, requires = "annotations")]
    predictions: Option<String>,
    #[arg(long, requires = "predictions")]
    annotations: Option<String>,
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    if s == "full" {
        return Ok(Precision::Full);
    }
    s.parse::<usize>().map(Precision::Decimals).map_err(|_| format!("expected 'full' or a number, got '{s}'"))
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type Outcome = Result<(), Failure>;

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn emit(output: &Option<PathBuf>, bytes: &[u8]) -> io::Result<()> {
    match output {
        Some(p) => fs::write(p, bytes),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()
        }
    }
}

/// `(name, contents)` of every input; `-` or nothing means standard input.
fn read_inputs(inputs: &[String]) -> Result<Vec<(String, Vec<u8>)>, Error> {
    let mut stdin_used = false;
    let names: Vec<String> = if inputs.is_empty() { vec!["-".into()] } else { inputs.to_vec() };
    names
        .into_iter()
        .map(|name| {
            if name == "-" {
                if stdin_used {
                    return Err(Error::Config("standard input given twice".into()));
                }
                stdin_used = true;
                let mut buf = Vec::new();
                io::stdin().lock().read_to_end(&mut buf)?;
                Ok(("<stdin>".into(), buf))
            } else {
                let path = cio::resolve_path(&name);
                Ok((path.display().to_string(), cio::read_file(&path)?))
            }
        })
        .collect()
}

fn parse_detection_bytes(name: &str, bytes: &[u8]) -> Result<DetectionFile, Error> {
    cio::parse_detections(BufReader::new(bytes), name)
}

fn is_jsonl(bytes: &[u8]) -> bool {
    bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{')
}

fn simulate(a: SimulateArgs) -> Outcome {
    let mut cfg = load_config(&a.common.config)?;
    if let Some(seed) = a.seed {
        cfg.simulator.seed = seed;
    }
    cfg.validate()?;
    let scenario = generate_scenario(&cfg.simulator)?;
    let mut buf = Vec::new();
    cio::write_detections(&mut buf, &pipeline::scenario_file(&scenario))?;
    emit(&a.common.output, &buf)?;
    if let Some(p) = a.truth {
        let mut t = Vec::new();
        tables::write_ground_truth(&mut t, std::slice::from_ref(&scenario.truth.ground_truth))?;
        fs::write(p, t)?;
    }
    Ok(())
}

fn track(a: TrackArgs) -> Outcome {
    let cfg = load_config(&a.common.config)?;
    if a.frames.is_some() && a.input.len() > 1 {
        return Err(Failure::Usage("--frames needs exactly one input".into()));
    }
    let inputs = read_inputs(&a.input)?;
    let files: Vec<DetectionFile> =
        inputs.iter().map(|(n, b)| parse_detection_bytes(n, b)).collect::<Result<_, _>>()?;
    let motions = match &a.frames {
        Some(dir) => {
            let frames = cio::pgm::read_frame_dir(dir)?;
            let flows = catchcomp::motion::frame_flows(&frames, &cfg.motion)?;
            let first = files[0].stream.first().map_or(0, |f| f.frame);
            Some(pipeline::motions_from_flows(first, &flows, &cfg.motion))
        }
        None => None,
    };
    let results: Vec<Vec<catchcomp::tracker::Track>> =
        files.par_iter().map(|f| pipeline::track_file(f, &cfg, motions.as_ref())).collect::<Result<_, _>>()?;
    let mut w = tables::TrackWriter::new(Vec::new())?;
    for (f, tracks) in files.iter().zip(&results) {
        for t in pipeline::counted_tracks(tracks, &cfg) {
            w.write_track(&f.header.afo_id, t)?;
        }
    }
    emit(&a.common.output, &w.finish()?)?;
    Ok(())
}

fn compose(a: ComposeArgs) -> Outcome {
    let mut cfg = load_config(&a.common.config)?;
    if let Some(m) = a.method {
        cfg.aggregation.method = m;
    }
    cfg.validate()?;
    let inputs = read_inputs(&a.input)?;
    let per_input: Vec<Vec<CompositionEstimate>> = inputs
        .par_iter()
        .map(|(name, bytes)| -> Result<Vec<CompositionEstimate>, Error> {
            if is_jsonl(bytes) {
                let file = parse_detection_bytes(name, bytes)?;
                Ok(vec![pipeline::compose_file(&file, &cfg)?.1])
            } else {
                let tracks = tables::parse_tracks(bytes.as_slice(), name)?;
                pipeline::label_track_file(&tracks, &cfg.aggregation)?
                    .into_iter()
                    .map(|(afo, labels)| catchcomp::compose::estimate_composition(&labels, &afo))
                    .collect()
            }
        })
        .collect::<Result<_, _>>()?;
    let mut estimates: Vec<CompositionEstimate> = per_input.into_iter().flatten().collect();
    if let Some(gt) = &a.ground_truth {
        let gts = tables::read_ground_truth(&cio::resolve_path(gt))?;
        estimates = estimates
            .into_iter()
            .map(|e| {
                let g =
                    gts.iter().find(|g| g.afo_id == e.afo_id).ok_or_else(|| Error::UnmatchedAfo(e.afo_id.clone()))?;
                e.with_ground_truth(g)
            })
            .collect::<Result<_, _>>()?;
    }
    let mut buf = Vec::new();
    tables::write_compositions(&mut buf, &estimates, a.decimals)?;
    emit(&a.common.output, &buf)?;
    Ok(())
}

fn evaluate_detections(a: EvalDetArgs) -> Outcome {
    let preds = cio::read_detections(&cio::resolve_path(&a.input))?;
    let ann = cio::read_annotations(&cio::resolve_path(&a.annotations))?;
    let p: Vec<ScoredPrediction> = preds
        .stream
        .iter()
        .flat_map(|f| f.detections.iter())
        .map(|d| ScoredPrediction { image: d.frame, bbox: d.bbox, mask: d.mask.clone(), confidence: d.confidence })
        .collect();
    let g: Vec<GroundTruthBox> =
        ann.annotations.iter().map(|x| GroundTruthBox { image: x.frame, bbox: x.bbox, mask: x.mask.clone() }).collect();
    let kind = match a.iou {
        IouArg::Box => IouKind::Box,
        IouArg::Mask => IouKind::Mask,
    };
    let r = coco_map(&p, &g, kind, a.interpolation.into())?;
    let kind_name = match kind {
        IouKind::Box => "box",
        IouKind::Mask => "mask",
    };
    let mut out = String::from("kind,iou,ap,true_positives,recall\n");
    for t in &r.thresholds {
        out.push_str(&format!(
            "{kind_name},{},{},{},{}\n",
            t.iou,
            t.ap,
            t.true_positives,
            t.true_positives as f64 / g.len() as f64
        ));
    }
    out.push_str(&format!("{kind_name},mean,{},,{}\n", r.map, r.recall));
    emit(&a.common.output, out.as_bytes())?;
    Ok(())
}

fn evaluate_composition(a: EvalCompArgs) -> Outcome {
    let path = cio::resolve_path(&a.input);
    let pairs = match &a.ground_truth {
        None => tables::afo_pairs(&tables::read_afo_table(&path)?, a.method),
        Some(gt) => {
            let est = tables::parse_compositions(cio::open_file(&path)?, &path.display().to_string())?;
            let gts = tables::read_ground_truth(&cio::resolve_path(gt))?;
            pair_with_truth(&est, &gts, &Grouping::IdPrefix)?
        }
    };
    let table = error_table(&pairs, a.sd.into())?;
    let mut buf = Vec::new();
    tables::write_error_table(&mut buf, &table, a.method, &a.alpha_bands, a.decimals)?;
    emit(&a.common.output, &buf)?;
    Ok(())
}

fn agreement(a: AgreementArgs) -> Outcome {
    let m = tables::read_expert_matrix(&cio::resolve_path(&a.input))?;
    let r = expert_agreement(&m, a.min_experts, a.sd.into())?;
    let mut buf = Vec::new();
    tables::write_agreement(&mut buf, &r, a.decimals)?;
    emit(&a.common.output, &buf)?;
    Ok(())
}

fn kfold(a: KfoldArgs) -> Outcome {
    let path = cio::resolve_path(&a.input);
    let source = path.display().to_string();
    let mut rdr =
        csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&path).map_err(|e| csv_failure(&source, e))?;
    let headers = rdr.headers().map_err(|e| csv_failure(&source, e))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Failure::Lib(Error::Parse { source_name: source.clone(), line: 1, message: format!("no column '{name}'") })
        })
    };
    let (ic, lc) = (col(&a.id_column)?, col(&a.label_column)?);
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_failure(&source, e))?;
        ids.push(rec.get(ic).unwrap_or_default().to_string());
        labels.push(rec.get(lc).unwrap_or_default().to_string());
    }
    let splits = repeated_stratified_kfold(&labels, a.folds, a.repeats, a.seed)?;
    let mut out = String::from("repeat,fold,id,label\n");
    for s in &splits {
        for &i in &s.validation {
            out.push_str(&format!("{},{},{},{}\n", s.repeat, s.fold, csv_field(&ids[i]), csv_field(&labels[i])));
        }
    }
    emit(&a.common.output, out.as_bytes())?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_failure(source: &str, e: csv::Error) -> Failure {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Failure::Lib(Error::Io(io)),
        other => Failure::Lib(Error::Parse { source_name: source.to_string(), line, message: format!("{other:?}") }),
    }
}

fn stem(p: &Path) -> String {
    let s = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
    s.strip_prefix("afo_").map(str::to_string).unwrap_or(s)
}

fn report(a: ReportArgs) -> Outcome {
    let paths: Vec<PathBuf> = a.input.iter().map(|s| cio::resolve_path(s)).collect();
    let loaded: Vec<Vec<tables::AfoRow>> =
        paths.par_iter().map(|p| tables::read_afo_table(p)).collect::<Result<_, _>>()?;
    fs::create_dir_all(&a.output)?;
    let sd: SdConvention = a.sd.into();
    if loaded.len() >= 2 {
        let cmp = compare_segmented(&tables::afo_segmented(&loaded[0]), &tables::afo_segmented(&loaded[1]), sd)?;
        let mut buf = Vec::new();
        tables::write_segmented(&mut buf, (&stem(&paths[0]), &stem(&paths[1])), &cmp, &a.alpha_bands, a.decimals)?;
        fs::write(a.output.join("segmented.csv"), buf)?;
    }
    let last = loaded.last().expect("at least one input");
    let table = error_table(&tables::afo_pairs(last, a.method), sd)?;
    let mut buf = Vec::new();
    tables::write_error_table(&mut buf, &table, a.method, &a.alpha_bands, a.decimals)?;
    fs::write(a.output.join("composition_error.csv"), buf)?;
    let bars: Vec<svg::CompositionBar> = last
        .iter()
        .map(|r| svg::CompositionBar { afo_id: &r.afo_id, predicted: r.predicted(a.method), truth: Some(r.truth) })
        .collect();
    fs::write(a.output.join("composition.svg"), svg::composition_bars(&bars))?;
    if let (Some(p), Some(g)) = (&a.predictions, &a.annotations) {
        let preds = cio::read_detections(&cio::resolve_path(p))?;
        let ann = cio::read_annotations(&cio::resolve_path(g))?;
        let sp: Vec<ScoredPrediction> = preds
            .stream
            .iter()
            .flat_map(|f| f.detections.iter())
            .map(|d| ScoredPrediction { image: d.frame, bbox: d.bbox, mask: d.mask.clone(), confidence: d.confidence })
            .collect();
        let gt: Vec<GroundTruthBox> = ann
            .annotations
            .iter()
            .map(|x| GroundTruthBox { image: x.frame, bbox: x.bbox, mask: x.mask.clone() })
            .collect();
        let boxes = coco_map(&sp, &gt, IouKind::Box, Interpolation::Coco101)?;
        let with_masks = sp.iter().all(|x| x.mask.is_some()) && gt.iter().all(|x| x.mask.is_some());
        let masks = if with_masks { Some(coco_map(&sp, &gt, IouKind::Mask, Interpolation::Coco101)?) } else { None };
        let mut curves = vec![("box", &boxes)];
        if let Some(m) = &masks {
            curves.push(("mask", m));
        }
        fs::write(a.output.join("pr_curves.svg"), svg::pr_curves(&curves))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Track(a) => track(a),
        Command::Compose(a) => compose(a),
        Command::EvaluateDetections(a) => evaluate_detections(a),
        Command::EvaluateComposition(a) => evaluate_composition(a),
        Command::Agreement(a) => agreement(a),
        Command::Kfold(a) => kfold(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        // reader went away, e.g. `| head`
        Err(Failure::Lib(Error::Io(e))) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io(_) => 1,
                Error::Parse { .. } => 3,
                _ => 4,
            })
        }
    }
}
