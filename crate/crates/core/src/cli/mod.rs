//! Command-line front end. Every command writes a run manifest next to its
//! outputs; `replay` re-runs a command from its manifest. Errors are reported
//! on one line as `error:<category>: <message>`.

mod manifest;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub use manifest::RunManifest;

use crate::analysis::{
    assign_size, distance_csv, mean_face, percentile_probe, scatter_csv, scatter_svg,
    stratified_exemplars, AnalysisError, LatentRow, LatentTable, StratifiedReport,
};
use crate::assignment::{auction_solve_with_stats, point_cost, AssignmentError, AuctionParams};
use crate::formats::{
    read_checkpoint, read_latents, read_metadata, read_pcf, read_ply, write_checkpoint,
    write_latents, write_metadata, write_pcf, FormatError, ScanMetadata, ScanRecord,
};
use crate::geometry::{nearest_distances, PointCloud};
use crate::pipeline::{extract_face, synth_dataset_with, PipelineError, PreprocessConfig};
use crate::vae::{emd_loss_with_sigma, train_with, Vae, VaeConfig, VaeError, EVAL_EPS_REL};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Model(#[from] VaeError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    /// Stable machine-readable category used in the `error:<category>:` prefix.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } | CliError::Format(FormatError::Io { .. }) => "io",
            CliError::Format(_) => "format",
            CliError::Pipeline(_) => "pipeline",
            CliError::Model(_) => "model",
            CliError::Analysis(_) => "analysis",
            CliError::Assignment(_) => "assignment",
            CliError::Input(_) => "input",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "facefit", version, about = "Face-scan sizing exemplars from 3-D point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Generate synthetic landmarked head scans.
    Synth(SynthArgs),
    /// Extract fixed-size, centered face clouds from landmarked scans.
    Preprocess(PreprocessArgs),
    /// Train the autoencoder.
    Train(TrainArgs),
    /// Encode processed clouds into a latent CSV.
    Encode(EncodeArgs),
    /// Mean face and per-dimension percentile probes.
    Explore(ExploreArgs),
    /// Per-group k-means and exemplar report.
    Cluster(ClusterArgs),
    /// Assign a scan to a size group.
    Size(SizeArgs),
    /// Matching distance between two clouds.
    Emd(EmdArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    pub count: usize,
    /// Surface points per scan.
    #[arg(long, default_value_t = 30_000)]
    pub points: usize,
    /// Gaussian noise std in meters.
    #[arg(long, default_value_t = 0.001)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub points: usize,
    #[arg(long, default_value_t = 0.04)]
    pub chin_margin: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub latent: usize,
    #[arg(long, default_value_t = 0.0625)]
    pub width_mult: f64,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.1)]
    pub val_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExploreArgs {
    #[arg(long)]
    pub latents: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![5.0, 95.0])]
    pub percentiles: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub latents: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec!["gender".to_string(), "race".to_string()])]
    pub group_by: Vec<String>,
    /// Latent dimensions for the scatter plots.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1])]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub scan: PathBuf,
    /// Metadata sidecar; defaults to the scan path with a `.json` extension.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EmdArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Absolute final auction epsilon; defaults to 1e-4 of the mean pair cost.
    #[arg(long)]
    pub eps_final: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Usage(e.to_string())
        }
        _ => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("");
            CliError::Usage(first.trim_start_matches("error: ").to_string())
        }
    })?;
    let recorded: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    execute(&cli.command, &recorded, out)
}

/// Entry point for the binary: runs, prints errors, maps them to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if args.iter().skip(1).any(|a| a == "--help" || a == "-h" || a == "--version" || a == "-V")
        || args.len() == 1
    {
        if let Err(e) = Cli::try_parse_from(&args) {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(args, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error:{}: {msg}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(cmd: &Command, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Synth(a) => cmd_synth(a, argv, out),
        Command::Preprocess(a) => cmd_preprocess(a, argv, out),
        Command::Train(a) => cmd_train(a, argv, out),
        Command::Encode(a) => cmd_encode(a, argv, out),
        Command::Explore(a) => cmd_explore(a, argv, out),
        Command::Cluster(a) => cmd_cluster(a, argv, out),
        Command::Size(a) => cmd_size(a, out),
        Command::Emd(a) => cmd_emd(a, out),
        Command::Replay(a) => cmd_replay(a, out),
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn manifest_for(
    command: &str,
    params: &impl Serialize,
    seed: Option<u64>,
    inputs: &[&Path],
    outputs: &[&Path],
    argv: &[String],
) -> RunManifest {
    RunManifest::new(command, params, seed, inputs, outputs, argv)
}

/// Scans in a directory: every `<stem>.json` sidecar with a `<stem>.pcf` or
/// `<stem>.ply` cloud, in sorted file-name order.
pub fn load_scans(dir: &Path) -> Result<Vec<ScanRecord>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut metas: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
        .collect();
    metas.sort();
    let mut scans = Vec::with_capacity(metas.len());
    for m in metas {
        let pcf = m.with_extension("pcf");
        let ply = m.with_extension("ply");
        let cloud = if pcf.exists() {
            read_pcf(&pcf)?
        } else if ply.exists() {
            read_ply(&ply)?
        } else {
            continue;
        };
        scans.push(ScanRecord {
            meta: read_metadata(&m)?,
            cloud,
        });
    }
    Ok(scans)
}

fn cmd_synth(a: &SynthArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    if a.points < 2 {
        return Err(CliError::Usage("--points must be >= 2".into()));
    }
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(CliError::Usage("--noise must be >= 0".into()));
    }
    create_dir(&a.out)?;
    let scans = synth_dataset_with(a.count, a.seed, a.noise, a.points.div_ceil(2));
    for s in &scans {
        write_pcf(&s.cloud, &a.out.join(format!("{}.pcf", s.id())))?;
        write_metadata(&s.meta, &a.out.join(format!("{}.json", s.id())))?;
    }
    manifest_for("synth", a, Some(a.seed), &[], &[&a.out], argv).write(&a.out.join("manifest.json"))?;
    say(out, format!("wrote {} scans to {}", scans.len(), a.out.display()))
}

fn cmd_preprocess(a: &PreprocessArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let scans = load_scans(&a.input)?;
    if scans.is_empty() {
        return Err(CliError::Input(format!("no scans found in {}", a.input.display())));
    }
    create_dir(&a.out)?;
    let mut skipped = Vec::new();
    let mut written = 0;
    for (i, scan) in scans.iter().enumerate() {
        let cfg = PreprocessConfig {
            target_points: a.points,
            chin_margin: a.chin_margin,
            seed: a.seed.wrapping_add(i as u64),
        };
        match extract_face(scan, &cfg) {
            Ok(face) => {
                let mut meta = scan.meta.clone();
                meta.landmarks = None;
                write_pcf(&face, &a.out.join(format!("{}.pcf", scan.id())))?;
                write_metadata(&meta, &a.out.join(format!("{}.json", scan.id())))?;
                written += 1;
            }
            Err(e @ PipelineError::MissingLandmarks(_)) => {
                eprintln!("skip: {e}");
                skipped.push(scan.id().to_string());
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mut log = String::from("id,reason\n");
    for id in &skipped {
        log.push_str(&format!("{id},missing landmarks\n"));
    }
    write_text(&a.out.join("skipped.csv"), &log)?;
    manifest_for("preprocess", a, Some(a.seed), &[&a.input], &[&a.out], argv)
        .write(&a.out.join("manifest.json"))?;
    say(out, format!("processed {written} scans, skipped {}", skipped.len()))
}

fn side_path(out: &Path, suffix: &str) -> PathBuf {
    let name = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{name}.{suffix}"))
}

fn cmd_train(a: &TrainArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let scans = load_scans(&a.data)?;
    let n_points = scans.first().map_or(0, |s| s.cloud.len());
    let cfg = VaeConfig {
        n_points,
        latent_dim: a.latent,
        width_mult: a.width_mult,
        batch_size: a.batch,
        lr: a.lr,
        max_epochs: a.max_epochs,
        patience: a.patience,
        seed: a.seed,
        val_frac: a.val_frac,
        ..VaeConfig::default()
    };
    let clouds: Vec<PointCloud> = scans.into_iter().map(|s| s.cloud).collect();
    let outcome = train_with(&clouds, &cfg, |e| {
        eprintln!(
            "epoch {:>3}  train L_r {:.6e}  L_l {:.6e}  val L_r {:.6e}  L_l {:.6e}",
            e.epoch, e.train_lr, e.train_ll, e.val_lr, e.val_ll
        );
    })?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_checkpoint(&outcome.model.to_checkpoint(), &a.out)?;
    let log_path = side_path(&a.out, "log.csv");
    write_text(&log_path, &outcome.log.to_csv())?;
    manifest_for("train", a, Some(a.seed), &[&a.data], &[&a.out, &log_path], argv)
        .write(&side_path(&a.out, "manifest.json"))?;
    let best = outcome.log.epochs[outcome.best_epoch];
    say(
        out,
        format!(
            "best epoch {} of {}: val L_r {:.6e}, val L_l {:.6e}",
            outcome.best_epoch,
            outcome.log.epochs.len() - 1,
            best.val_lr,
            best.val_ll
        ),
    )
}

fn load_model(path: &Path) -> Result<Vae<f32>, CliError> {
    Ok(Vae::from_checkpoint(&read_checkpoint(path)?)?)
}

fn encode_scans(model: &Vae<f32>, scans: &[ScanRecord]) -> Result<LatentTable, CliError> {
    use rayon::prelude::*;
    let rows: Vec<LatentRow> = scans
        .par_iter()
        .map(|s| {
            Ok(LatentRow {
                id: s.id().to_string(),
                z: model.encode(&s.cloud)?,
                gender: s.meta.gender,
                race: s.meta.race,
            })
        })
        .collect::<Result<_, VaeError>>()?;
    Ok(LatentTable::with_dim(rows, model.config().latent_dim)?)
}

fn cmd_encode(a: &EncodeArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let mut scans = load_scans(&a.data)?;
    scans.sort_by(|x, y| x.id().cmp(y.id()));
    let table = encode_scans(&model, &scans)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_latents(&table, &a.out)?;
    manifest_for("encode", a, None, &[&a.model, &a.data], &[&a.out], argv)
        .write(&side_path(&a.out, "manifest.json"))?;
    say(out, format!("encoded {} scans", table.len()))
}

#[derive(Serialize)]
struct ProbeSummary {
    dim: usize,
    percentile: f64,
    point: Vec<f64>,
    nearest_id: String,
    cloud: String,
    distances: String,
}

#[derive(Serialize)]
struct ExploreSummary {
    mean_face_id: String,
    mean: Vec<f64>,
    probes: Vec<ProbeSummary>,
}

fn pct_label(p: f64) -> String {
    format!("{p}").replace('.', "_")
}

fn cmd_explore(a: &ExploreArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let table = read_latents(&a.latents)?;
    let scans = load_scans(&a.data)?;
    let cloud_of = |id: &str| -> Result<&PointCloud, CliError> {
        scans
            .iter()
            .find(|s| s.id() == id)
            .map(|s| &s.cloud)
            .ok_or_else(|| CliError::Input(format!("latent id {id:?} not found in {}", a.data.display())))
    };
    for r in table.rows() {
        cloud_of(&r.id)?;
    }
    create_dir(&a.out)?;
    let mean_id = mean_face(&table)?;
    let mean_cloud = cloud_of(&mean_id)?;
    write_pcf(mean_cloud, &a.out.join("mean_face.pcf"))?;
    say(out, format!("mean face: {mean_id}"))?;
    let mut probes = Vec::new();
    for dim in 0..table.dim() {
        for &pct in &a.percentiles {
            let probe = percentile_probe(&table, dim, pct)?;
            let cloud = cloud_of(&probe.nearest_id)?;
            let stem = format!("probe_d{dim}_p{}", pct_label(pct));
            write_pcf(cloud, &a.out.join(format!("{stem}.pcf")))?;
            let d = nearest_distances(cloud, mean_cloud);
            write_text(&a.out.join(format!("{stem}_distances.csv")), &distance_csv(cloud, &d))?;
            say(out, format!("dim {dim} pct {pct}: {}", probe.nearest_id))?;
            probes.push(ProbeSummary {
                dim,
                percentile: pct,
                point: probe.point,
                nearest_id: probe.nearest_id,
                cloud: format!("{stem}.pcf"),
                distances: format!("{stem}_distances.csv"),
            });
        }
    }
    let summary = ExploreSummary {
        mean_face_id: mean_id,
        mean: table.mean()?,
        probes,
    };
    write_text(&a.out.join("explore.json"), &serde_json::to_string_pretty(&summary).unwrap())?;
    manifest_for("explore", a, None, &[&a.latents, &a.data], &[&a.out], argv).write(&a.out.join("manifest.json"))
}

fn cmd_cluster(a: &ClusterArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let mut keys = a.group_by.clone();
    keys.sort();
    if keys != ["gender", "race"] {
        return Err(CliError::Usage(format!(
            "--group-by supports gender,race; got {}",
            a.group_by.join(",")
        )));
    }
    if a.dims.len() != 2 {
        return Err(CliError::Usage("--dims takes two latent indices".into()));
    }
    let table = read_latents(&a.latents)?;
    let report = stratified_exemplars(&table, a.k, a.seed);
    create_dir(&a.out)?;
    write_text(&a.out.join("report.json"), &report.to_json())?;
    let dims = (a.dims[0], a.dims[1]);
    for g in &report.groups {
        let rows: Vec<LatentRow> = g
            .members
            .iter()
            .map(|(id, _)| table.get(id).expect("member from table").clone())
            .collect();
        let labels: Vec<usize> = g.members.iter().map(|m| m.1).collect();
        let sub = LatentTable::with_dim(rows, table.dim())?;
        let centroids: Vec<Vec<f64>> = g.clusters.iter().map(|c| c.centroid.clone()).collect();
        let stem = format!("scatter_{}_{}", g.gender, g.race);
        let title = format!("{} / {}", g.gender, g.race);
        write_text(&a.out.join(format!("{stem}.svg")), &scatter_svg(&sub, &labels, &centroids, dims, &title)?)?;
        write_text(&a.out.join(format!("{stem}.csv")), &scatter_csv(&sub, &labels, dims)?)?;
    }
    for s in &report.skipped {
        eprintln!("skip: {} / {}: {}", s.gender, s.race, s.reason);
    }
    manifest_for("cluster", a, Some(a.seed), &[&a.latents], &[&a.out], argv).write(&a.out.join("manifest.json"))?;
    say(
        out,
        format!(
            "{} groups, {} exemplars, {} skipped",
            report.groups.len(),
            report.exemplar_count(),
            report.skipped.len()
        ),
    )
}

fn cmd_size(a: &SizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let cloud = if a.scan.extension().is_some_and(|x| x == "ply") {
        read_ply(&a.scan)?
    } else {
        read_pcf(&a.scan)?
    };
    let meta_path = a.meta.clone().unwrap_or_else(|| a.scan.with_extension("json"));
    let meta: ScanMetadata = read_metadata(&meta_path)?;
    let text = fs::read_to_string(&a.report).map_err(|e| CliError::io(&a.report, e))?;
    let report = StratifiedReport::from_json(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.report.display())))?;
    let group = report
        .group(meta.gender, meta.race)
        .ok_or_else(|| CliError::Input(format!("group {} / {} not in report", meta.gender, meta.race)))?;
    let z = model.encode(&cloud)?;
    let assigned = assign_size(&z, group)?;
    say(out, format!("group {} / {}", meta.gender, meta.race))?;
    say(out, format!("cluster {}", assigned.cluster))?;
    say(out, "cluster,distance,exemplar_id")?;
    for (c, d) in group.clusters.iter().zip(&assigned.distances) {
        say(out, format!("{},{:.16e},{}", c.cluster, d, c.exemplar_id))?;
    }
    Ok(())
}

fn cmd_emd(a: &EmdArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let x = read_pcf(&a.a)?;
    let y = read_pcf(&a.b)?;
    let costs = point_cost(&x, &y)?;
    let params = match a.eps_final {
        Some(eps) if eps > 0.0 => AuctionParams::with_final(&costs, eps),
        Some(eps) => return Err(CliError::Usage(format!("--eps-final must be positive, got {eps}"))),
        None => AuctionParams::relative(&costs, costs.mean_cost(), EVAL_EPS_REL),
    };
    let (assignment, stats) = auction_solve_with_stats(&costs, &params)?;
    let loss = emd_loss_with_sigma(&x, &y, assignment.sigma).loss;
    say(out, format!("emd {loss:.16e}"))?;
    say(out, format!("points {}", x.len()))?;
    say(out, format!("eps_final {:.6e}", params.eps_final))?;
    say(out, format!("phases {}", stats.phases))?;
    say(out, format!("bids {}", stats.bids))
}

fn cmd_replay(a: &ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let m = RunManifest::read(&a.manifest)?;
    if m.argv.first().is_some_and(|c| c == "replay") {
        return Err(CliError::Input("refusing to replay a replay".into()));
    }
    let args = std::iter::once("facefit".to_string()).chain(m.argv.iter().cloned());
    run(args, out)
}
