//! `focusfuse` command-line front end.
//!
//! Every fusion setting is a global `--<key> <value>` flag using the dotted
//! config keys (`--ssf.lambda 0.1`, `--pyr.levels 4`). Flags override the
//! file passed with `--config`, which overrides the defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Arg, ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use focusfuse::config;
use focusfuse::dataset::{gen_mask_pair, simulate_defocus, MaskSpec, ShapeKind, DEFAULT_SIGMA};
use focusfuse::io::{load_image, load_rgb, save_image, save_rgb};
use focusfuse::metrics::{psnr, Scores};
use focusfuse::pipeline::{fuse, fuse_detailed, fuse_rgb_detailed, FusionConfig, Mode};
use focusfuse::ssf::decompose;
use focusfuse::{GrayImage, RgbImage};

const THREADS_VAR: &str = "FOCUSFUSE_THREADS";
const IMAGE_EXTS: [&str; 3] = ["png", "pgm", "pnm"];

#[derive(Parser, Debug)]
#[command(name = "focusfuse", version, about = "Multi-focus visible and infrared image fusion")]
struct Cli {
    /// Settings file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fuse one set of inputs.
    Fuse {
        /// First visible image (the only one in mmif mode).
        #[arg(long)]
        visa: Option<PathBuf>,
        /// Second visible image.
        #[arg(long)]
        visb: Option<PathBuf>,
        /// Infrared image.
        #[arg(long)]
        ir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the intermediate maps into this directory.
        #[arg(long, value_name = "DIR")]
        debug_dump: Option<PathBuf>,
    },
    /// Split images into structure (`_S`) and texture (`_T`, shifted by 0.5).
    Decompose {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Synthesize defocused pairs from all-in-focus images.
    Gendata {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Seed of the first image; later images (by file name) use seed + index.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        /// Force one mask family instead of drawing it.
        #[arg(long)]
        shape: Option<ShapeKind>,
    },
    /// Write one complementary mask pair.
    Genmask {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        shape: Option<ShapeKind>,
        /// Output for M1; M2 goes next to it with `_m2` appended unless `--out2` is given.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        out2: Option<PathBuf>,
    },
    /// Score fused images against their sources.
    Eval {
        #[arg(long, value_name = "DIR")]
        fused_dir: PathBuf,
        /// Holds `<id>_a`/`<id>_b` or `<id>_f1`/`<id>_f2` for each fused `<id>`.
        #[arg(long, value_name = "DIR")]
        src_dir: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Re-run fusion and scoring for each value of one setting.
    Sweep {
        /// Directory written by `gendata`.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// All-in-focus originals; adds a `psnr_clear` column.
        #[arg(long, value_name = "DIR")]
        clear_dir: Option<PathBuf>,
        /// Infrared images named like the originals; switches to tri mode.
        #[arg(long, value_name = "DIR")]
        ir_dir: Option<PathBuf>,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        report: PathBuf,
        /// Fill `runtime_ms` with wall-clock times (makes the report non-reproducible).
        #[arg(long)]
        timing: bool,
    },
}

fn command() -> clap::Command {
    config::KEYS.iter().fold(Cli::command(), |cmd, &key| {
        cmd.arg(
            Arg::new(key)
                .long(key)
                .global(true)
                .value_name("VALUE")
                .help(format!("Override config key `{key}`")),
        )
    })
}

/// Config file entries followed by flag overrides, in that order.
fn config_entries(cli: &Cli, matches: &ArgMatches) -> Result<Vec<(String, String)>> {
    let mut entries = match &cli.config {
        Some(path) => config::read_entries(path)?,
        None => Vec::new(),
    };
    let sub = matches.subcommand().map(|(_, m)| m).unwrap_or(matches);
    for &key in config::KEYS {
        if let Some(v) = sub.get_one::<String>(key).or_else(|| matches.get_one::<String>(key)) {
            entries.push((key.to_string(), v.clone()));
        }
    }
    Ok(entries)
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("{THREADS_VAR} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files of a directory, sorted by file name.
fn images_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && is_image(&path) {
            out.push(path);
        }
    }
    out.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(out)
}

fn find_image(dir: &Path, stem: &str) -> Option<PathBuf> {
    IMAGE_EXTS.iter().map(|e| dir.join(format!("{stem}.{e}"))).find(|p| p.is_file())
}

fn stem_of(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| anyhow!("bad file name {}", path.display()))
}

fn is_gray(img: &RgbImage) -> bool {
    img.r.data() == img.g.data() && img.g.data() == img.b.data()
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str, mode: Mode) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| anyhow!("--{flag} is required in {mode} mode"))
}

fn run_fuse(
    cfg: &FusionConfig,
    visa: &Option<PathBuf>,
    visb: &Option<PathBuf>,
    ir: &Option<PathBuf>,
    out: &Path,
    debug_dump: Option<&Path>,
) -> Result<()> {
    let mode = cfg.mode;
    let mut vis_paths = vec![required(visa, "visa", mode)?];
    if mode != Mode::Mmif {
        vis_paths.push(required(visb, "visb", mode)?);
    } else if visb.is_some() {
        bail!("--visb is not used in mmif mode");
    }
    let ir = match mode {
        Mode::Mfif if ir.is_some() => bail!("--ir is not used in mfif mode"),
        Mode::Mfif => None,
        _ => Some(load_image(required(ir, "ir", mode)?)?),
    };
    let visible = vis_paths.iter().map(load_rgb).collect::<focusfuse::Result<Vec<_>>>()?;
    let colour = visible.iter().any(|v| !is_gray(v))
        && out.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"));

    let detail = if colour {
        let (rgb, detail) = fuse_rgb_detailed(&visible, ir.as_ref(), cfg)?;
        save_rgb(&rgb, out)?;
        detail
    } else {
        let mut inputs: Vec<GrayImage> = visible.iter().map(RgbImage::luminance).collect();
        inputs.extend(ir);
        let detail = fuse_detailed(&inputs, cfg)?;
        save_image(&detail.fused, out)?;
        detail
    };
    if let Some(dir) = debug_dump {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for (name, img) in detail.debug_images() {
            save_image(&img, dir.join(format!("{name}.png")))?;
        }
    }
    Ok(())
}

fn run_decompose(cfg: &FusionConfig, inputs: &[PathBuf], out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    inputs.par_iter().try_for_each(|path| -> Result<()> {
        let stem = stem_of(path)?;
        let d = decompose(&load_image(path)?, &cfg.ssf)?;
        save_image(&d.structure, out.join(format!("{stem}_S.png")))?;
        save_image(&d.texture.offset(0.5), out.join(format!("{stem}_T.png")))?;
        Ok(())
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    filename: String,
    seed: u64,
    shape: String,
    area_frac: f64,
}

const MANIFEST: &str = "manifest.csv";

fn run_gendata(input: &Path, out: &Path, seed: u64, sigma: f64, shape: Option<ShapeKind>) -> Result<()> {
    let files = images_in(input)?;
    if files.is_empty() {
        bail!("no images in {}", input.display());
    }
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let rows = files
        .par_iter()
        .enumerate()
        .map(|(i, path)| -> Result<ManifestRow> {
            let stem = stem_of(path)?;
            let clear = load_image(path)?;
            let item_seed = seed.wrapping_add(i as u64);
            let spec = MaskSpec {
                seed: item_seed,
                shape_kind: shape,
            };
            let pair = gen_mask_pair(clear.width(), clear.height(), &spec)?;
            let (f1, f2) = simulate_defocus(&clear, &pair.m1, &pair.m2, sigma)?;
            save_image(&f1, out.join(format!("{stem}_f1.png")))?;
            save_image(&f2, out.join(format!("{stem}_f2.png")))?;
            save_image(&pair.m1.to_image(), out.join(format!("{stem}_m1.png")))?;
            Ok(ManifestRow {
                filename: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                seed: item_seed,
                shape: pair.shape.name().to_string(),
                area_frac: pair.area_fraction(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_path(out.join(MANIFEST))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn run_genmask(
    width: usize,
    height: usize,
    seed: u64,
    shape: Option<ShapeKind>,
    out: &Path,
    out2: Option<&Path>,
) -> Result<()> {
    let pair = gen_mask_pair(width, height, &MaskSpec { seed, shape_kind: shape })?;
    let second = match out2 {
        Some(p) => p.to_path_buf(),
        None => {
            let ext = out.extension().and_then(|e| e.to_str()).unwrap_or("png");
            out.with_file_name(format!("{}_m2.{ext}", stem_of(out)?))
        }
    };
    save_image(&pair.m1.to_image(), out)?;
    save_image(&pair.m2.to_image(), &second)?;
    println!("shape={} area_frac={}", pair.shape, pair.area_fraction());
    Ok(())
}

fn sources_for(src_dir: &Path, id: &str) -> Result<(PathBuf, PathBuf)> {
    for (a, b) in [("_a", "_b"), ("_f1", "_f2")] {
        if let (Some(pa), Some(pb)) = (find_image(src_dir, &format!("{id}{a}")), find_image(src_dir, &format!("{id}{b}"))) {
            return Ok((pa, pb));
        }
    }
    bail!("no sources for `{id}` in {} (expected {id}_a/{id}_b or {id}_f1/{id}_f2)", src_dir.display())
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn score_fields(s: &Scores) -> Vec<String> {
    [s.q_g, s.q_m, s.q_s, s.ag, s.sf, s.psnr].into_iter().map(fmt).collect()
}

const SCORE_COLUMNS: [&str; 6] = ["q_g", "q_m", "q_s", "ag", "sf", "psnr"];

fn run_eval(fused_dir: &Path, src_dir: &Path, report: &Path) -> Result<()> {
    let fused = images_in(fused_dir)?;
    if fused.is_empty() {
        bail!("no images in {}", fused_dir.display());
    }
    let rows = fused
        .par_iter()
        .map(|path| -> Result<(String, Scores)> {
            let id = stem_of(path)?;
            let (pa, pb) = sources_for(src_dir, &id)?;
            let scores = Scores::evaluate(&load_image(path)?, &load_image(pa)?, &load_image(pb)?)
                .with_context(|| format!("scoring `{id}`"))?;
            Ok((id, scores))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_path(report)?;
    let mut header = vec!["id"];
    header.extend(SCORE_COLUMNS);
    header.push("runtime_ms");
    w.write_record(&header)?;
    for (id, s) in &rows {
        let mut rec = vec![id.clone()];
        rec.extend(score_fields(s));
        rec.push("NA".into());
        w.write_record(&rec)?;
    }
    let all: Vec<Scores> = rows.iter().map(|(_, s)| *s).collect();
    if let Some(mean) = Scores::mean(&all) {
        let mut rec = vec!["MEAN".to_string()];
        rec.extend(score_fields(&mean));
        rec.push("NA".into());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

struct SweepItem {
    f1: GrayImage,
    f2: GrayImage,
    ir: Option<GrayImage>,
    clear: Option<GrayImage>,
}

fn load_sweep_items(data: &Path, clear_dir: Option<&Path>, ir_dir: Option<&Path>) -> Result<Vec<SweepItem>> {
    let mut reader = csv::Reader::from_path(data.join(MANIFEST))
        .with_context(|| format!("reading {}", data.join(MANIFEST).display()))?;
    let rows = reader.deserialize().collect::<std::result::Result<Vec<ManifestRow>, _>>()?;
    if rows.is_empty() {
        bail!("empty manifest in {}", data.display());
    }
    rows.par_iter()
        .map(|row| -> Result<SweepItem> {
            let stem = stem_of(Path::new(&row.filename))?;
            let need = |dir: &Path, name: &str| -> Result<GrayImage> {
                let p = find_image(dir, name).ok_or_else(|| anyhow!("missing {name} in {}", dir.display()))?;
                Ok(load_image(p)?)
            };
            Ok(SweepItem {
                f1: need(data, &format!("{stem}_f1"))?,
                f2: need(data, &format!("{stem}_f2"))?,
                ir: ir_dir.map(|d| need(d, &stem)).transpose()?,
                clear: clear_dir.map(|d| need(d, &stem)).transpose()?,
            })
        })
        .collect()
}

/// Scores against the two visible inputs, or the mean of (visible, infrared)
/// scores for both visible inputs in tri mode.
fn sweep_scores(item: &SweepItem, fused: &GrayImage) -> Result<Scores> {
    match &item.ir {
        None => Ok(Scores::evaluate(fused, &item.f1, &item.f2)?),
        Some(ir) => {
            let a = Scores::evaluate(fused, &item.f1, ir)?;
            let b = Scores::evaluate(fused, &item.f2, ir)?;
            Ok(Scores::mean(&[a, b]).expect("two rows"))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    base: &[(String, String)],
    data: &Path,
    clear_dir: Option<&Path>,
    ir_dir: Option<&Path>,
    param: &str,
    values: &[String],
    report: &Path,
    timing: bool,
) -> Result<()> {
    if !config::KEYS.contains(&param) {
        bail!("unknown configuration key `{param}`");
    }
    let items = load_sweep_items(data, clear_dir, ir_dir)?;
    let mut header = vec!["param", "value"];
    header.extend(SCORE_COLUMNS);
    if clear_dir.is_some() {
        header.push("psnr_clear");
    }
    header.push("runtime_ms");
    let mut w = csv::Writer::from_path(report)?;
    w.write_record(&header)?;

    for value in values {
        let mut entries = Vec::with_capacity(base.len() + 2);
        if !base.iter().any(|(k, _)| k == "mode") {
            let mode = if ir_dir.is_some() { Mode::Tri } else { Mode::Mfif };
            entries.push(("mode".to_string(), mode.name().to_string()));
        }
        entries.extend(base.iter().cloned());
        entries.push((param.to_string(), value.clone()));
        let cfg = config::from_entries(&entries).with_context(|| format!("{param} = {value}"))?;
        let wants_ir = cfg.mode != Mode::Mfif;
        if wants_ir != ir_dir.is_some() {
            bail!("{} mode {} --ir-dir", cfg.mode, if wants_ir { "needs" } else { "does not take" });
        }
        if cfg.mode == Mode::Mmif {
            bail!("sweep runs on visible pairs; use mfif or tri mode");
        }

        let per_item = items
            .par_iter()
            .map(|item| -> Result<(Scores, Option<f64>, f64)> {
                let mut inputs = vec![item.f1.clone(), item.f2.clone()];
                inputs.extend(item.ir.clone());
                let start = Instant::now();
                let fused = fuse(&inputs, &cfg)?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                let clear = item.clear.as_ref().map(|c| psnr(&fused, c)).transpose()?;
                Ok((sweep_scores(item, &fused)?, clear, ms))
            })
            .collect::<Result<Vec<_>>>()?;

        let n = per_item.len() as f64;
        let scores: Vec<Scores> = per_item.iter().map(|r| r.0).collect();
        let mut rec = vec![param.to_string(), value.clone()];
        rec.extend(score_fields(&Scores::mean(&scores).expect("non-empty")));
        if clear_dir.is_some() {
            rec.push(fmt(per_item.iter().filter_map(|r| r.1).sum::<f64>() / n));
        }
        rec.push(if timing {
            format!("{:.1}", per_item.iter().map(|r| r.2).sum::<f64>() / n)
        } else {
            "NA".into()
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli, matches: &ArgMatches) -> Result<()> {
    init_threads()?;
    let entries = config_entries(cli, matches)?;
    let cfg = || config::from_entries(&entries).map_err(anyhow::Error::from);
    match &cli.command {
        Command::Fuse {
            visa,
            visb,
            ir,
            out,
            debug_dump,
        } => run_fuse(&cfg()?, visa, visb, ir, out, debug_dump.as_deref()),
        Command::Decompose { inputs, out } => run_decompose(&cfg()?, inputs, out),
        Command::Gendata {
            input,
            out,
            seed,
            sigma,
            shape,
        } => run_gendata(input, out, *seed, *sigma, *shape),
        Command::Genmask {
            width,
            height,
            seed,
            shape,
            out,
            out2,
        } => run_genmask(*width, *height, *seed, *shape, out, out2.as_deref()),
        Command::Eval {
            fused_dir,
            src_dir,
            report,
        } => run_eval(fused_dir, src_dir, report),
        Command::Sweep {
            data,
            clear_dir,
            ir_dir,
            param,
            values,
            report,
            timing,
        } => {
            cfg()?;
            run_sweep(
                &entries,
                data,
                clear_dir.as_deref(),
                ir_dir.as_deref(),
                param,
                values,
                report,
                *timing,
            )
        }
    }
}

fn main() -> ExitCode {
    let parsed = command()
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m).map(|cli| (cli, m)));
    let (cli, matches) = match parsed {
        Ok(v) => v,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("bad arguments");
            eprintln!("focusfuse: {}", line.trim_start_matches("error: "));
            return ExitCode::FAILURE;
        }
    };
    match run(&cli, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("focusfuse: {e:#}");
            ExitCode::FAILURE
        }
    }
}
