//! `lungreg`: every pipeline stage as a deterministic subcommand.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on a data error.
//! Data errors print one machine-readable line on standard error:
//! `ERROR <code> <case_id or -> <message>`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use lungreg::dlfpr::{export_pseudo_pairs, reg, warp, warp_nearest};
use lungreg::imagedata::{load_manifest, read_mask, read_pgm, write_mask, write_pgm};
use lungreg::lungmask::split_mask;
use lungreg::lungmask::synth::{synth_dataset, write_dataset, DatasetConfig};
use lungreg::metrics::{format_summary, read_report, summarize};
use lungreg::pipeline::{augment, prepare, run_all, BackendSpec, ExternalBackend, LungImages};
use lungreg::relcoords::oracle_register;
use lungreg::{BinaryMask, CoordMap, Error, Side};

/// Largest mask (in pixels) the quadratic oracle accepts.
const ORACLE_MAX_PIXELS: usize = 64 * 64;

#[derive(Parser)]
#[command(
    name = "lungreg",
    version,
    about = "Pseudo-paired lung registration and anomaly scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a seeded synthetic dataset: cases, manifest, fixed mask and templates.
    GenSynthetic {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        lesion_rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a two-lung mask into its left and right lungs.
    SplitMask {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out_left: PathBuf,
        #[arg(long)]
        out_right: PathBuf,
    },
    /// Register a moving lung mask onto a fixed one; writes forward.cmap and inverse.cmap.
    Register {
        #[arg(long)]
        moving_mask: PathBuf,
        #[arg(long)]
        fixed_mask: PathBuf,
        #[arg(long)]
        out_pair: PathBuf,
        /// Treat both masks as two-lung masks and register this side.
        #[arg(long)]
        side: Option<Side>,
    },
    /// Brute-force relative-coordinate correspondence (masks up to 64x64 pixels).
    OracleRegister {
        #[arg(long)]
        moving_mask: PathBuf,
        #[arg(long)]
        fixed_mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pull-warp an image through a coordinate map.
    Warp {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Nearest-neighbour instead of bilinear sampling (use for masks).
        #[arg(long)]
        nearest: bool,
    },
    /// Bilateral augmentation of a registered case directory (l/fixed.pgm, r/fixed.pgm).
    Augment {
        #[arg(long)]
        case_dir: PathBuf,
        #[arg(long)]
        fixed_mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Register and augment every case into a training set.
    Prepare {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        fixed_mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker count; 0 uses one per logical CPU.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Export (moving, pseudo-fixed) pairs for training a learned registration.
    ExportDlpr {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        fixed_mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Translate, map back and score every case; writes artifacts and report.tsv.
    RunTest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        fixed_mask: PathBuf,
        #[arg(long, value_enum)]
        backend: BackendKind,
        #[arg(long)]
        template_l: Option<PathBuf>,
        #[arg(long)]
        template_r: Option<PathBuf>,
        /// External command with {in} and {out} placeholders.
        #[arg(long)]
        cmd: Option<String>,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',', required = true)]
        tau: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Worker count (and so the cap on concurrent backend processes); 0 uses one per logical CPU.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Seconds an external backend call may take.
        #[arg(long, default_value_t = 120)]
        timeout: u64,
    },
    /// Print AUC and mean localization scores per threshold from a report.
    Eval {
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Identity,
    Template,
    External,
}

/// Errors split by exit status.
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
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
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(2)
        }
    }
}

fn error_line(e: &Error) -> String {
    let message = match e {
        Error::Case { source, .. } => source.to_string(),
        other => other.to_string(),
    };
    let mut line = format!(
        "ERROR {} {} {}",
        e.code(),
        e.case_id().unwrap_or("-"),
        message.replace('\n', " ")
    );
    let stderr = match e {
        Error::Case { source, .. } => match source.as_ref() {
            Error::Backend { stderr, .. } => Some(stderr),
            _ => None,
        },
        Error::Backend { stderr, .. } => Some(stderr),
        _ => None,
    };
    if let Some(s) = stderr.filter(|s| !s.trim().is_empty()) {
        let _ = write!(line, "\nbackend stderr:\n{}", s.trim_end());
    }
    line
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(cmd: Cmd) -> CmdResult {
    match cmd {
        Cmd::GenSynthetic {
            seed,
            count,
            lesion_rate,
            out,
        } => {
            let ds = synth_dataset(&DatasetConfig::new(seed, count, lesion_rate))?;
            let paths = write_dataset(&ds, &out)?;
            println!("{}", paths.manifest.display());
        }
        Cmd::SplitMask {
            mask,
            out_left,
            out_right,
        } => {
            let lungs = split_mask(&read_mask(&mask)?)?;
            write_mask(&lungs.left, &out_left)?;
            write_mask(&lungs.right, &out_right)?;
        }
        Cmd::Register {
            moving_mask,
            fixed_mask,
            out_pair,
            side,
        } => {
            let (mut moving, mut fixed) = (read_mask(&moving_mask)?, read_mask(&fixed_mask)?);
            if let Some(side) = side {
                moving = split_mask(&moving)?.side(side).clone();
                fixed = split_mask(&fixed)?.side(side).clone();
            }
            let pair = reg(&moving, &fixed)?;
            create_dir(&out_pair)?;
            pair.forward.write(out_pair.join("forward.cmap"))?;
            pair.inverse.write(out_pair.join("inverse.cmap"))?;
        }
        Cmd::OracleRegister {
            moving_mask,
            fixed_mask,
            out,
        } => {
            let moving = read_mask(&moving_mask)?;
            let fixed = read_mask(&fixed_mask)?;
            for (name, m) in [("moving", &moving), ("fixed", &fixed)] {
                if m.height() * m.width() > ORACLE_MAX_PIXELS {
                    return Err(Failure::Usage(format!(
                        "{name} mask is {}x{}; the oracle is limited to 64x64 pixels",
                        m.height(),
                        m.width()
                    )));
                }
            }
            let map = oracle_register(&moving, &fixed)?;
            let mut text = String::from("# moving_row\tmoving_col\tfixed_row\tfixed_col\n");
            for ((pr, pc), (qr, qc)) in &map.entries {
                let _ = writeln!(text, "{pr}\t{pc}\t{qr}\t{qc}");
            }
            fs::write(&out, text).map_err(|e| Error::Io {
                path: out,
                source: e,
            })?;
        }
        Cmd::Warp {
            image,
            map,
            out,
            nearest,
        } => {
            let img = read_pgm(&image)?;
            let map = CoordMap::read(&map)?;
            let warped = if nearest {
                warp_nearest(&img, &map, 0)?
            } else {
                warp(&img, &map, 0)?
            };
            write_pgm(&warped, &out)?;
        }
        Cmd::Augment {
            case_dir,
            fixed_mask,
            out,
        } => augment_case(&case_dir, &read_mask(&fixed_mask)?, &out)?,
        Cmd::Prepare {
            manifest,
            fixed_mask,
            out,
            jobs,
        } => {
            let cases = load_manifest(&manifest)?;
            let ds = prepare(&cases, &read_mask(&fixed_mask)?, &out, jobs)?;
            println!(
                "X_l={} X_r={} Y_l={} Y_r={} skipped={}",
                ds.x_left.len(),
                ds.x_right.len(),
                ds.y_left.len(),
                ds.y_right.len(),
                ds.skipped.len()
            );
            for (id, reason) in &ds.skipped {
                eprintln!("skipped {id}: {reason}");
            }
        }
        Cmd::ExportDlpr {
            manifest,
            fixed_mask,
            out,
        } => {
            let cases = load_manifest(&manifest)?;
            let report = export_pseudo_pairs(&cases, &read_mask(&fixed_mask)?, &out)?;
            println!(
                "pairs={} failed={}",
                report.pairs.len(),
                report.failures.len()
            );
            for (id, reason) in &report.failures {
                eprintln!("skipped {id}: {reason}");
            }
        }
        Cmd::RunTest {
            manifest,
            fixed_mask,
            backend,
            template_l,
            template_r,
            cmd,
            tau,
            out,
            jobs,
            timeout,
        } => {
            if let Some(bad) = tau.iter().find(|t| t.is_nan() || **t < 0.0) {
                return Err(Failure::Usage(format!("--tau {bad} must be non-negative")));
            }
            let backend = match backend {
                BackendKind::Identity => BackendSpec::Identity,
                BackendKind::Template => match (template_l, template_r) {
                    (Some(l), Some(r)) => BackendSpec::template_from_files(l, r)?,
                    _ => {
                        return Err(Failure::Usage(
                            "--backend template needs --template-l and --template-r".into(),
                        ))
                    }
                },
                BackendKind::External => {
                    let Some(cmd) = cmd else {
                        return Err(Failure::Usage("--backend external needs --cmd".into()));
                    };
                    let ext = ExternalBackend::new(cmd, out.join("exchange"))
                        .map_err(|e| Failure::Usage(e.to_string()))?
                        .with_timeout(Duration::from_secs(timeout));
                    BackendSpec::External(ext)
                }
            };
            let cases = load_manifest(&manifest)?;
            let eval = run_all(
                &cases,
                &read_mask(&fixed_mask)?,
                &backend,
                &tau,
                Some(&out),
                jobs,
            )?;
            let _ = fs::remove_dir(out.join("exchange"));
            if let Some(report) = &eval.report {
                println!("{}", report.display());
            }
            for s in &eval.summaries {
                println!("{}", format_summary(s));
            }
        }
        Cmd::Eval { report } => {
            let rows = read_report(&report)?;
            for s in summarize(&rows)? {
                println!("{}", format_summary(&s));
            }
        }
    }
    Ok(())
}

/// Reads `<case_dir>/{l,r}/fixed.pgm`, writes `<case>_<side>_aug.pgm` for
/// both sides and `augment.tsv` under `out`.
fn augment_case(case_dir: &Path, fixed_mask: &BinaryMask, out: &Path) -> Result<(), Error> {
    let fixed = split_mask(fixed_mask)?;
    let case_id = case_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "case".into());
    let registered = LungImages {
        left: read_pgm(case_dir.join(Side::Left.tag()).join("fixed.pgm"))?,
        right: read_pgm(case_dir.join(Side::Right.tag()).join("fixed.pgm"))?,
    };
    let aug = augment(&registered, &fixed).map_err(|e| e.for_case(&case_id))?;
    create_dir(out)?;
    let mut text = String::from("# case_id\tside\taugmented\tpath\n");
    for side in Side::BOTH {
        let name = format!("{case_id}_{side}_aug.pgm");
        write_pgm(aug.side(side), out.join(&name))?;
        let _ = writeln!(text, "{case_id}\t{side}\ttrue\t{name}");
    }
    let manifest = out.join("augment.tsv");
    fs::write(&manifest, text).map_err(|e| Error::Io {
        path: manifest,
        source: e,
    })
}
