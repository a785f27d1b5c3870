use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use orchard_cli::config::AppConfig;
use orchard_cli::evaluate;
use orchard_cli::service::{serve, ServiceState};
use orchard_core::backends::registry;
use orchard_core::dataset::{kfold, parse_coco, split, AnnotatedImage, SplitSpec};
use orchard_core::pipeline::{analyze, report_to_json};

#[derive(Parser)]
#[command(name = "orchard", about = "Orange analysis pipeline and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one image and write report.json plus overlay.png.
    Analyze {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run the HTTP service until interrupted.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compute metric reports for one task.
    Evaluate {
        #[arg(long, value_parser = ["detection", "classification", "segmentation"])]
        task: String,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "coco", value_parser = ["coco", "yolo", "report"])]
        format: String,
        /// Also write PR and confidence curve CSVs here (detection only).
        #[arg(long)]
        curves_dir: Option<PathBuf>,
    },
    /// Write train/test/val manifest files from a seeded shuffle.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "80:15:5")]
        ratios: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "splits")]
        out: PathBuf,
    },
    /// Write k fold-manifest pairs for cross validation.
    Crossval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "folds")]
        out: PathBuf,
    },
}

fn load_config(path: Option<PathBuf>) -> Result<AppConfig, String> {
    let path = path.or_else(|| std::env::var("PIPELINE_CONFIG").ok().map(PathBuf::from));
    match path {
        Some(p) => AppConfig::load(&p),
        None => Ok(AppConfig::default()),
    }
}

/// Manifest input: a COCO JSON (by .json extension) or a plain text file
/// with one image id per line.
fn load_manifest(path: &PathBuf) -> Result<Vec<AnnotatedImage>, String> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = evaluate::read_to_string(path)?;
        let (images, _) = parse_coco(&text).map_err(|e| e.to_string())?;
        Ok(images)
    } else {
        let text = evaluate::read_to_string(path)?;
        let images: Vec<AnnotatedImage> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|id| AnnotatedImage {
                image_id: id.to_string(),
                file_path: PathBuf::from(id),
                width: 1,
                height: 1,
                boxes: vec![],
                class_label: None,
                mask_path: None,
            })
            .collect();
        Ok(images)
    }
}

fn write_manifest(path: &PathBuf, images: &[AnnotatedImage]) -> Result<(), String> {
    let text: String = images.iter().map(|i| format!("{}\n", i.image_id)).collect();
    std::fs::write(path, text).map_err(|e| format!("ManifestWrite: {}: {e}", path.display()))
}

fn run() -> Result<ExitCode, String> {
    match Cli::parse().command {
        Command::Analyze { image, config, out_dir } => {
            let app = load_config(config)?;
            let backends = registry(&app.backends).map_err(|e| e.to_string())?;
            let img = image::open(&image)
                .map_err(|e| format!("UndecodableImage: {}: {e}", image.display()))?
                .into_rgb8();
            let image_id = image
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into());
            let mut pipeline = app.pipeline_config();
            pipeline.crops_dir = out_dir.join("crops");
            pipeline.emit_overlay = true;
            std::fs::create_dir_all(&out_dir).map_err(|e| format!("OutDir: {e}"))?;
            match analyze(&img, &image_id, &pipeline, &backends) {
                Ok((report, overlay)) => {
                    std::fs::write(out_dir.join("report.json"), report_to_json(&report))
                        .map_err(|e| format!("ReportWrite: {e}"))?;
                    if let Some(overlay) = overlay {
                        overlay
                            .save(out_dir.join("overlay.png"))
                            .map_err(|e| format!("OverlayWrite: {e}"))?;
                    }
                    println!("count: {}", report.count);
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(2))
                }
            }
        }
        Command::Serve { bind, config } => {
            let app = load_config(config)?;
            let backends = registry(&app.backends).map_err(|e| e.to_string())?;
            let bind = std::env::var("PIPELINE_BIND").unwrap_or(bind);
            let state = Arc::new(ServiceState::new(
                backends,
                app.pipeline_config(),
                app.service.clone(),
            ));
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime.block_on(serve(state, &bind)).map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { task, pred, truth, format, curves_dir } => {
            let output = match task.as_str() {
                "classification" => evaluate::evaluate_classification(&truth, &pred)?,
                "detection" => {
                    evaluate::evaluate_detection(&truth, &pred, &format, curves_dir.as_deref())?
                }
                "segmentation" => evaluate::evaluate_segmentation(&truth, &pred)?,
                other => return Err(format!("UnknownTask: {other}")),
            };
            println!("{output}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Split { input, ratios, seed, out } => {
            let parts: Vec<u32> = ratios
                .split(':')
                .map(|p| p.parse().map_err(|_| format!("InvalidRatios: {ratios}")))
                .collect::<Result<_, _>>()?;
            let [train, test, val]: [u32; 3] = parts
                .try_into()
                .map_err(|_| format!("InvalidRatios: {ratios}"))?;
            let spec = SplitSpec::new(train, test, val, seed).map_err(|e| e.to_string())?;
            let dataset = load_manifest(&input)?;
            let (train_set, test_set, val_set) = split(&dataset, &spec).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&out).map_err(|e| format!("OutDir: {e}"))?;
            write_manifest(&out.join("train.txt"), &train_set)?;
            write_manifest(&out.join("test.txt"), &test_set)?;
            write_manifest(&out.join("val.txt"), &val_set)?;
            println!("{} {} {}", train_set.len(), test_set.len(), val_set.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Crossval { input, k, seed, out } => {
            let dataset = load_manifest(&input)?;
            let folds = kfold(&dataset, k, seed).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&out).map_err(|e| format!("OutDir: {e}"))?;
            for (i, (train_set, val_set)) in folds.iter().enumerate() {
                write_manifest(&out.join(format!("fold_{i}_train.txt")), train_set)?;
                write_manifest(&out.join(format!("fold_{i}_val.txt")), val_set)?;
            }
            println!("{} folds", folds.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
