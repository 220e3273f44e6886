use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use tilesight_client::Client;
use tilesight_core::catalog::Catalog;
use tilesight_core::config::PipelineConfig;
use tilesight_core::detection::DetectionSet;
use tilesight_core::encoding::{decode, load_predictions};
use tilesight_core::eval::{bench, evaluate_dataset, MatchConfig, MIN_WARMUP};
use tilesight_core::refdetect::detect;
use tilesight_core::scenegen::{generate_dataset, read_manifest, GenerationMode, SceneConfig, MANIFEST_FILE};

/// Images rendered per benchmark run.
const BENCH_IMAGES: usize = 10;

#[derive(Parser)]
#[command(name = "tilesight", version, about = "Oriented shape-tile detection tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset with annotations and a manifest.
    Generate {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "mixed")]
        mode: GenerationMode,
        #[arg(long, default_value_t = 8)]
        max_tiles: usize,
    },
    /// Run the reference detector on an image or on every image of a directory.
    Detect {
        #[arg(long)]
        image: PathBuf,
        /// Output file, or directory when --image is a directory. Stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Send images to a running service instead of detecting locally.
        #[arg(long)]
        server: Option<String>,
    },
    /// Turn a prediction tensor into detections.
    Decode {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a directory of detection files against annotations.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        tau: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the pipeline stages.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        iters: usize,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory served at / (the playground build).
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

fn load_config(path: Option<&Path>) -> AnyResult<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    })
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> AnyResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Images of a dataset directory (manifest order) or all PNGs in it.
fn images_in(dir: &Path) -> AnyResult<Vec<PathBuf>> {
    if dir.join(MANIFEST_FILE).is_file() {
        return Ok(read_manifest(dir)?
            .entries
            .iter()
            .map(|e| dir.join(&e.image_path))
            .collect());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))? {
        let p = entry?.path();
        if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn output_for(image: &Path, out_dir: &Path) -> PathBuf {
    let stem = image.file_stem().unwrap_or_default();
    out_dir.join(stem).with_extension("json")
}

fn detect_local(image: &Path, catalog: &Catalog, cfg: &PipelineConfig) -> AnyResult<DetectionSet> {
    let img = image::open(image)
        .map_err(|e| format!("{}: {e}", image.display()))?
        .to_rgb8();
    Ok(DetectionSet {
        detections: detect(&img, catalog, &cfg.detect)?,
    })
}

fn run_detect(image: &Path, out: Option<&Path>, config: Option<&Path>, server: Option<&str>) -> AnyResult<()> {
    let cfg = load_config(config)?;
    let catalog = cfg.load_catalog()?;
    let batch = image.is_dir();
    let inputs = if batch {
        images_in(image)?
    } else {
        vec![image.to_path_buf()]
    };
    if batch {
        let dir = out.ok_or("--out must name a directory when --image is a directory")?;
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    let target = |p: &Path| {
        if batch {
            out.map(|d| output_for(p, d))
        } else {
            out.map(Path::to_path_buf)
        }
    };
    match server {
        Some(url) => {
            let client = Client::new(url);
            let rt = tokio::runtime::Runtime::new()?;
            for p in &inputs {
                let png = fs::read(p).map_err(|e| format!("{}: {e}", p.display()))?;
                let set = rt.block_on(client.detect_png(png))?;
                emit(&set, target(p).as_deref())?;
            }
        }
        None => {
            let sets: Vec<AnyResult<DetectionSet>> =
                inputs.par_iter().map(|p| detect_local(p, &catalog, &cfg)).collect();
            for (p, set) in inputs.iter().zip(sets) {
                emit(&set?, target(p).as_deref())?;
            }
        }
    }
    if batch {
        eprintln!("wrote {} detection files", inputs.len());
    }
    Ok(())
}

fn run(command: Command) -> AnyResult<()> {
    match command {
        Command::Generate {
            count,
            seed,
            out,
            mode,
            max_tiles,
        } => {
            let cfg = PipelineConfig::default();
            let catalog = cfg.load_catalog()?;
            let registry = cfg.load_registry(&catalog)?;
            let scene = SceneConfig { max_tiles, ..cfg.scene };
            let m = generate_dataset(count, seed, &out, mode, &scene, &catalog, &registry)?;
            eprintln!("wrote {} images to {}", m.count, out.display());
        }
        Command::Detect {
            image,
            out,
            config,
            server,
        } => run_detect(&image, out.as_deref(), config.as_deref(), server.as_deref())?,
        Command::Decode { pred, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let catalog = cfg.load_catalog()?;
            let tensor = load_predictions(&pred)?;
            let detections = decode(&tensor, &cfg.anchor_grid()?, &catalog, &cfg.decode)?;
            emit(&DetectionSet { detections }, out.as_deref())?;
        }
        Command::Eval { pred, gt, tau, out } => {
            let cfg = MatchConfig {
                tau_vertex: tau,
                ..MatchConfig::default()
            };
            let report = evaluate_dataset(&pred, &gt, &cfg)?;
            println!(
                "precision {:.2} recall {:.2} fscore {:.2} (tp {} fp {} fn {})",
                report.precision, report.recall, report.fscore, report.tp, report.fp, report.r#fn
            );
            if let Some(p) = out {
                emit(&report, Some(&p))?;
            }
        }
        Command::Bench { config, iters } => {
            let cfg = load_config(config.as_deref())?;
            let catalog = cfg.load_catalog()?;
            let report = bench(&cfg, &catalog, BENCH_IMAGES, iters, MIN_WARMUP)?;
            emit(&report, None)?;
        }
        Command::Serve { port, static_dir } => {
            tracing_subscriber::fmt()
                .with_writer(std::io::stderr)
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .init();
            let state = tilesight_service::ServiceState::new(PipelineConfig::default())?;
            let app = tilesight_service::router(state, static_dir.as_deref());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
                tracing::info!("listening on http://{}", listener.local_addr()?);
                tilesight_service::serve(listener, app).await
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
