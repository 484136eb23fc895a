//! `sizegate`: command-line front end of the size-aware ranking validator.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use sizegate::config::{ConfigError, PipelineConfig};
use sizegate::eval::run_ablation;
use sizegate::geometry::{estimate_dims, Dims};
use sizegate::ingest::{
    attach_ground_truth, match_rgb_depth, read_depth_crop, read_ground_truth, read_rankings, read_stamps, write_jsonl,
    CropDir, CropSource,
};
use sizegate::kb::Catalogue;
use sizegate::quantize::quantize_observation;
use sizegate::reasoner::{NoEvidence, Reasoner, RegionRecord, SelectionRegime, ValidationMode};
use sizegate::synth::{FixtureKb, FixtureSpec};
use sizegate::Error;

#[derive(Debug, Parser)]
#[command(name = "sizegate", version, about = "Size-aware validation of object-recognition rankings")]
struct Cli {
    /// TOML config; every key has a default and `SIZEGATE_<KEY>` overrides it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Print the fully resolved config and exit.
    #[arg(long)]
    print_config: bool,
    /// Log more; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pair RGB frames with the nearest depth frame within ±mu seconds.
    MatchDepth {
        /// `frame_id,timestamp` CSV of RGB frames.
        rgb: PathBuf,
        /// `frame_id,timestamp` CSV of depth frames.
        depth: PathBuf,
    },
    /// Estimate metric dimensions from one 16-bit depth crop.
    Estimate {
        crop: PathBuf,
        /// Full-frame pixel position of the crop's top-left corner.
        #[arg(long, value_parser = parse_pair::<u32>, default_value = "0,0")]
        origin: (u32, u32),
    },
    /// Quantize metric dimensions into qualitative bins.
    Quantize {
        /// Depth and the two other dimensions, in meters.
        #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
        dims: [f64; 3],
        /// 2D bounding box width and height, in pixels.
        #[arg(long, value_parser = parse_pair::<f64>)]
        bbox: (f64, f64),
    },
    /// Correct rankings with one validation mode and selection regime.
    Validate {
        #[arg(long, default_value = "area_thin_ar")]
        mode: ValidationMode,
        #[arg(long, default_value = "auto")]
        regime: SelectionRegime,
        /// Corrected rankings; stdout by default.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-region reasoner trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score raw rankings and every requested (mode, regime) cell.
    Eval {
        #[arg(long, value_delimiter = ',', default_values_t = ValidationMode::ALL)]
        modes: Vec<ValidationMode>,
        #[arg(long, value_delimiter = ',', default_values_t = SelectionRegime::ALL)]
        regimes: Vec<SelectionRegime>,
    },
    /// Write a synthetic dataset with an enumerated expected report.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    regions: usize,
    #[arg(long, default_value_t = 12)]
    classes: usize,
    /// Fraction of regions with a wrong top-1.
    #[arg(long, default_value_t = 0.4)]
    corruption: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = KbKind::Separating)]
    kb: KbKind,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KbKind {
    Separating,
    Permissive,
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated values")?;
    let num = |x: &str| x.trim().parse::<T>().map_err(|_| format!("bad number `{x}`"));
    Ok((num(a)?, num(b)?))
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("bad number `{x}`")))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| "expected three comma-separated values".to_owned())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({ "error": { "kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() } });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = load_config(cli.config.as_deref())?;
    if cli.print_config {
        print!("{}", cfg.to_toml_string());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(ConfigError::Invalid("no subcommand given; see --help".into()).into());
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .map_err(|e| ConfigError::Invalid(format!("--jobs: {e}")))?;

    match command {
        Command::MatchDepth { rgb, depth } => match_depth(&cfg, &rgb, &depth),
        Command::Estimate { crop, origin } => {
            let crop = read_depth_crop(&crop)?.with_origin(origin.0, origin.1);
            let dims = estimate_dims(&crop, &cfg.intrinsics(), &cfg.geometry())?;
            print_json(&dims)
        }
        Command::Quantize { dims, bbox } => {
            let dims = Dims::new(dims[0], [dims[1], dims[2]]);
            let obs = quantize_observation(&dims, bbox, &cfg.quantizer())?;
            print_json(&obs)
        }
        Command::Validate {
            mode,
            regime,
            out,
            trace,
        } => validate(&cfg, mode, regime, out.as_deref(), trace.as_deref()),
        Command::Eval { modes, regimes } => eval(&cfg, &modes, &regimes),
        Command::Synth(args) => synth(&cfg, &args),
    }
}

/// Config file (if any) plus `SIZEGATE_*` overrides, with paths resolved
/// against the file's directory.
fn load_config(path: Option<&Path>) -> Result<PipelineConfig, ConfigError> {
    let env = std::env::vars();
    match path {
        Some(p) => PipelineConfig::load(p, env),
        None => PipelineConfig::from_toml_str("", env),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    println!("{text}");
    Ok(())
}

fn match_depth(cfg: &PipelineConfig, rgb: &Path, depth: &Path) -> Result<(), Error> {
    let pairs = match_rgb_depth(&read_stamps(rgb)?, &read_stamps(depth)?, &cfg.matching())?;
    let unmatched = pairs.iter().filter(|(_, d)| d.is_none()).count();
    if unmatched > 0 {
        log::warn!("{unmatched} of {} RGB frames have no depth frame within ±{} s", pairs.len(), cfg.mu);
    }
    let mut out = String::from("rgb_frame,depth_frame\n");
    for (r, d) in &pairs {
        out.push_str(&format!("{r},{}\n", d.as_deref().unwrap_or("")));
    }
    print!("{out}");
    Ok(())
}

struct Inputs {
    catalogue: Catalogue,
    records: Vec<RegionRecord>,
    crops: CropDir,
}

fn load_inputs(cfg: &PipelineConfig, need_truth: bool) -> Result<Inputs, Error> {
    let catalogue = Catalogue::load(cfg.existing_path("kb")?)?;
    let rankings = cfg.existing_path("rankings")?;
    let mut records = read_rankings(rankings)?;
    let truth = match cfg.truth {
        Some(_) => Some(cfg.existing_path("truth")?),
        None if need_truth => return Err(ConfigError::Missing("truth").into()),
        None => None,
    };
    if let Some(path) = truth {
        attach_ground_truth(&mut records, &read_ground_truth(path)?);
    }
    let crops_dir = match &cfg.crops_dir {
        Some(_) => cfg.existing_path("crops_dir")?.to_owned(),
        None => rankings.parent().unwrap_or(Path::new(".")).to_owned(),
    };
    Ok(Inputs {
        catalogue,
        records,
        crops: CropDir::new(crops_dir),
    })
}

fn reasoner<'a>(cfg: &PipelineConfig, catalogue: &'a Catalogue) -> Reasoner<'a> {
    Reasoner {
        intrinsics: cfg.intrinsics(),
        geometry: cfg.geometry(),
        quantizer: cfg.quantizer(),
        gate: cfg.gate(),
        ..Reasoner::new(catalogue)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn validate(
    cfg: &PipelineConfig,
    mode: ValidationMode,
    regime: SelectionRegime,
    out: Option<&Path>,
    trace: Option<&Path>,
) -> Result<(), Error> {
    let inputs = load_inputs(cfg, regime == SelectionRegime::OracleWrongOnly)?;
    let reasoner = reasoner(cfg, &inputs.catalogue);
    let results: Vec<_> = inputs
        .records
        .par_iter()
        .map(|rec| {
            if !reasoner.selects(rec, regime)? {
                return reasoner.apply(rec, Err(&NoEvidence::MissingCrop), mode, regime);
            }
            let evidence = match inputs.crops.crop_for(rec) {
                Ok(Some(crop)) => reasoner.observe(rec, &crop),
                Ok(None) => Err(NoEvidence::MissingCrop),
                Err(e) => {
                    log::warn!("region `{}`: {e}", rec.region_id);
                    Err(NoEvidence::Unreadable)
                }
            };
            reasoner.apply(rec, evidence.as_ref(), mode, regime)
        })
        .collect::<Result<_, _>>()?;
    let (corrected, traces): (Vec<RegionRecord>, Vec<_>) = results.into_iter().unzip();

    let out_path = out.map(Path::to_owned).or_else(|| cfg.output.as_ref().map(|d| d.join("validated.jsonl")));
    let trace_path = trace.map(Path::to_owned).or_else(|| cfg.output.as_ref().map(|d| d.join("trace.jsonl")));
    match &out_path {
        Some(p) => write_jsonl(&corrected, &mut create(p)?).map_err(|e| io_err(p, e))?,
        None => write_jsonl(&corrected, &mut io::stdout().lock()).map_err(|e| io_err(Path::new("<stdout>"), e))?,
    }
    if let Some(p) = &trace_path {
        write_jsonl(&traces, &mut create(p)?).map_err(|e| io_err(p, e))?;
    }
    let skipped = traces.iter().filter(|t| t.skipped.is_some()).count();
    log::info!(
        "{} regions, {} validated, {skipped} selected but unvalidated",
        traces.len(),
        traces.iter().filter(|t| t.validated).count()
    );
    Ok(())
}

fn eval(cfg: &PipelineConfig, modes: &[ValidationMode], regimes: &[SelectionRegime]) -> Result<(), Error> {
    let inputs = load_inputs(cfg, true)?;
    let reasoner = reasoner(cfg, &inputs.catalogue);
    let table = run_ablation(&inputs.records, &inputs.crops, &reasoner, modes, regimes)?;
    let text = table.to_text();
    if let Some(dir) = &cfg.output {
        let json = serde_json::to_string_pretty(&table).expect("serializable") + "\n";
        for (name, body) in [("report.json", &json), ("report.txt", &text)] {
            let path = dir.join(name);
            let mut w = create(&path)?;
            w.write_all(body.as_bytes())
                .and_then(|()| w.flush())
                .map_err(|e| io_err(&path, e))?;
        }
    }
    print!("{text}");
    Ok(())
}

fn synth(cfg: &PipelineConfig, args: &SynthArgs) -> Result<(), Error> {
    let spec = FixtureSpec {
        n_regions: args.regions,
        n_classes: args.classes,
        corruption_rate: args.corruption,
        seed: args.seed,
        kb: match args.kb {
            KbKind::Separating => FixtureKb::Separating,
            KbKind::Permissive => FixtureKb::Permissive,
        },
        intrinsics: cfg.intrinsics(),
        ..Default::default()
    };
    let dataset = spec.generate()?;
    dataset.write_to(&args.dir)?;
    log::info!("wrote {} regions to {}", dataset.regions.len(), args.dir.display());
    Ok(())
}
