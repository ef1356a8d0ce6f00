//! The `gazekit` command line. Every analysis goes through [`crate::analysis`],
//! so files produced here match the service's artifacts byte for byte.

use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gazekit::cluster::{ClusterConfig, Method};
use gazekit::fixation::{self, Fixation, FixationConfig};
use gazekit::ingest::{self, ScreenSpec};
use gazekit::render::{self, LayerKind, Rgb};
use gazekit::sequence::{self, AoiSpec, BigramReport};
use gazekit::stats;
use serde::Serialize;

use crate::analysis::{
    self, Artifact, ClusterParams, FixateResult, KRange, NumberedFixation, RenderParams,
};
use crate::error::ApiError;
use crate::workspace::Workspace;

#[derive(Debug, Parser)]
#[command(name = "gazekit", version, about = "Offline eye-gaze analytics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a raw gaze log (and optional trial metadata) into a recording file.
    Ingest {
        log: PathBuf,
        #[arg(long)]
        screen: ScreenSpec,
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Detect fixations in a recording. Writes JSON, or CSV when the output
    /// path ends in `.csv`.
    Fixate {
        recording: PathBuf,
        #[command(flatten)]
        fixation: FixationArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Cluster fixation centroids with k-means or EM; pick k by Xie–Beni sweep.
    Cluster {
        fixations: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Em)]
        method: MethodArg,
        #[arg(long, conflicts_with = "sweep")]
        k: Option<usize>,
        /// `min..max`, inclusive.
        #[arg(long)]
        sweep: Option<KRange>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Region scanpath, bigram frequencies and AOI ratios for one or more
    /// fixation files.
    Sequence {
        #[arg(required = true)]
        fixations: Vec<PathBuf>,
        #[arg(long)]
        screen: ScreenSpec,
        /// Trial metadata whose AOIs are scored.
        #[arg(long)]
        aoi: Option<PathBuf>,
        /// Report each file separately instead of pooling bigrams.
        #[arg(long)]
        per_user: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Inferential tests over a numeric table.
    Stats {
        #[arg(value_enum)]
        test: StatsTest,
        /// Comma-, tab- or whitespace-separated; an optional header row.
        table: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Render a heatmap (PNG), gaze plot or scatter plot (SVG).
    Render {
        #[arg(value_enum)]
        layer: LayerArg,
        fixations: PathBuf,
        #[arg(long)]
        screen: ScreenSpec,
        /// Image placed underneath the layer; resized to the screen.
        #[arg(long)]
        stimulus: Option<PathBuf>,
        /// `t0,t1` onset window in ms (gaze plot and scatter).
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        low: Option<Rgb>,
        #[arg(long)]
        high: Option<Rgb>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        opacity: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Serve the HTTP API on localhost.
    Serve {
        #[arg(long, default_value = "gazekit-workspace")]
        workspace: PathBuf,
        #[arg(long, env = "GAZEKIT_PORT", default_value_t = 8737)]
        port: u16,
        /// Directory of static explorer assets mounted at `/ui`.
        #[arg(long, env = "GAZEKIT_UI_DIR")]
        ui_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct FixationArgs {
    #[arg(long)]
    pub dispersion: Option<f64>,
    #[arg(long = "min-dur")]
    pub min_dur: Option<u64>,
    #[arg(long = "max-gap")]
    pub max_gap: Option<u64>,
}

impl FixationArgs {
    fn config(&self) -> FixationConfig {
        let d = FixationConfig::default();
        FixationConfig {
            dispersion_px: self.dispersion.unwrap_or(d.dispersion_px),
            min_duration_ms: self.min_dur.unwrap_or(d.min_duration_ms),
            max_gap_ms: self.max_gap.unwrap_or(d.max_gap_ms),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Em,
    Kmeans,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatsTest {
    /// Columns are groups; blank cells are allowed.
    Anova,
    /// Rows are subjects, columns are conditions.
    Rmanova,
    /// Two columns.
    Corr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LayerArg {
    Heatmap,
    Gazeplot,
    Scatter,
}

impl From<LayerArg> for LayerKind {
    fn from(l: LayerArg) -> Self {
        match l {
            LayerArg::Heatmap => LayerKind::Heatmap,
            LayerArg::Gazeplot => LayerKind::Gazeplot,
            LayerArg::Scatter => LayerKind::Scatter,
        }
    }
}

fn read(path: &Path) -> Result<String, ApiError> {
    std::fs::read_to_string(path).map_err(|e| ApiError::Storage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ApiError> {
    std::fs::write(path, bytes).map_err(|e| ApiError::Storage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), ApiError> {
    write(
        path,
        &Artifact::Json(serde_json::to_value(v).expect("results serialize")).bytes(),
    )
}

fn bad_file(path: &Path, e: impl std::fmt::Display) -> ApiError {
    ApiError::validation(Some(path.display().to_string()), e.to_string())
}

/// Reads fixations from `fixate` JSON output, a bare JSON array or CSV.
pub fn load_fixations(path: &Path) -> Result<Vec<Fixation>, ApiError> {
    let raw = read(path)?;
    match raw.trim_start().chars().next() {
        Some('{') => {
            let doc: FixateResult = serde_json::from_str(&raw).map_err(|e| bad_file(path, e))?;
            Ok(doc.fixations.into_iter().map(|f| f.fixation).collect())
        }
        Some('[') => serde_json::from_str(&raw).map_err(|e| bad_file(path, e)),
        _ => Ok(ingest::parse_fixations(&raw)?),
    }
}

/// A numeric table; `None` marks a blank cell.
type Table = Vec<Vec<Option<f64>>>;

/// Parses a delimited numeric table, skipping a first row that is not
/// entirely numeric.
pub fn parse_table(raw: &str) -> Result<Table, ApiError> {
    let mut rows = Vec::new();
    let mut first = true;
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let is_first = std::mem::replace(&mut first, false);
        let cells: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else if line.contains('\t') {
            line.split('\t').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let parsed: Vec<Result<Option<f64>, &str>> = cells
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse().map(Some).map_err(|_| *c)
                }
            })
            .collect();
        if let Some(bad) = parsed.iter().find_map(|c| c.err()) {
            if is_first {
                continue;
            }
            return Err(ApiError::validation(
                Some(format!("line {}", i + 1)),
                format!("{bad:?} is not a number"),
            ));
        }
        rows.push(parsed.into_iter().map(Result::unwrap).collect());
    }
    if rows.is_empty() {
        return Err(ApiError::validation(None, "table has no numeric rows"));
    }
    Ok(rows)
}

fn columns(table: &Table) -> Vec<Vec<f64>> {
    let width = table.iter().map(Vec::len).max().unwrap_or(0);
    (0..width)
        .map(|c| {
            table
                .iter()
                .filter_map(|r| r.get(c).copied().flatten())
                .collect()
        })
        .collect()
}

fn complete_rows(table: &Table) -> Result<Vec<Vec<f64>>, ApiError> {
    table
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .copied()
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| ApiError::validation(Some(format!("row {}", i + 1)), "blank cell"))
        })
        .collect()
}

#[derive(Serialize)]
struct SequenceFile {
    file: String,
    #[serde(flatten)]
    report: analysis::SequenceResult,
}

#[derive(Serialize)]
struct SequenceOutput {
    mode: &'static str,
    screen: ScreenSpec,
    /// Bigrams pooled over every file (pooled mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pooled: Option<BigramReport>,
    files: Vec<SequenceFile>,
}

fn parse_window(raw: &str) -> Result<[f64; 2], ApiError> {
    let bad = || ApiError::validation(Some("window".into()), format!("{raw:?} is not t0,t1"));
    let (a, b) = raw.split_once(',').ok_or_else(bad)?;
    Ok([
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ])
}

/// Runs one command. Returns the message printed on success.
pub fn run(cli: Cli) -> Result<String, ApiError> {
    match cli.command {
        Command::Ingest {
            log,
            screen,
            meta,
            output,
        } => {
            let raw = read(&log)?;
            let (mut recording, report) = ingest::parse_gaze_log(&raw, screen)?;
            if let Some(meta) = meta {
                let doc = ingest::parse_trial_meta(&read(&meta)?)?;
                for w in &doc.warnings {
                    eprintln!("warning: {w}");
                }
                recording.attach_meta(doc)?;
            }
            recording.id = log
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            write_json(&output, &recording)?;
            Ok(format!(
                "{} samples ({} malformed rows skipped) -> {}",
                recording.samples.len(),
                report.malformed,
                output.display()
            ))
        }
        Command::Fixate {
            recording,
            fixation: args,
            output,
        } => {
            let rec: ingest::Recording =
                serde_json::from_str(&read(&recording)?).map_err(|e| bad_file(&recording, e))?;
            let cfg = args.config();
            cfg.validate()
                .map_err(|e| ApiError::validation(None, e.to_string()))?;
            let fx = fixation::detect_fixations(&rec, &cfg)?;
            if output.extension().is_some_and(|e| e == "csv") {
                write(&output, ingest::export_fixations(&fx).as_bytes())?;
            } else {
                let doc = FixateResult {
                    config: cfg,
                    count: fx.len(),
                    fixations: fx
                        .iter()
                        .enumerate()
                        .map(|(id, &fixation)| NumberedFixation { id, fixation })
                        .collect(),
                };
                write_json(&output, &doc)?;
            }
            Ok(format!("{} fixations -> {}", fx.len(), output.display()))
        }
        Command::Cluster {
            fixations,
            method,
            k,
            sweep,
            seed,
            restarts,
            output,
        } => {
            let fx = load_fixations(&fixations)?;
            let mut config = ClusterConfig::default();
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(r) = restarts {
                config.restarts = r;
            }
            let params = ClusterParams {
                method: match method {
                    MethodArg::Em => Method::Em,
                    MethodArg::Kmeans => Method::Kmeans,
                },
                k,
                sweep,
                config,
                fixation: FixationConfig::default(),
            };
            let result = analysis::cluster_fixations(&fx, &params)?;
            write_json(&output, &result)?;
            Ok(format!(
                "k = {} over {} points -> {}",
                result.model.k,
                result.n_points,
                output.display()
            ))
        }
        Command::Sequence {
            fixations,
            screen,
            aoi,
            per_user,
            output,
        } => {
            let aois: Vec<AoiSpec> = match aoi {
                Some(p) => ingest::parse_trial_meta(&read(&p)?)?.aois,
                None => Vec::new(),
            };
            let mut files = Vec::new();
            let mut labels = Vec::new();
            for path in &fixations {
                let fx = load_fixations(path)?;
                let report = analysis::sequence_report_with(&fx, screen, &aois)?;
                labels.push(report.sequence.clone());
                files.push(SequenceFile {
                    file: path.display().to_string(),
                    report,
                });
            }
            let out = SequenceOutput {
                mode: if per_user { "per-user" } else { "pooled" },
                screen,
                pooled: (!per_user).then(|| sequence::pooled_bigram_frequencies(&labels)),
                files,
            };
            write_json(&output, &out)?;
            Ok(format!(
                "{} scanpaths ({}) -> {}",
                fixations.len(),
                out.mode,
                output.display()
            ))
        }
        Command::Stats {
            test,
            table,
            output,
        } => {
            let t = parse_table(&read(&table)?)?;
            let value = match test {
                StatsTest::Anova => serde_json::to_value(stats::one_way_anova(&columns(&t))?),
                StatsTest::Rmanova => serde_json::to_value(stats::rm_anova(&complete_rows(&t)?)?),
                StatsTest::Corr => {
                    let rows = complete_rows(&t)?;
                    if rows.iter().any(|r| r.len() != 2) {
                        return Err(ApiError::validation(
                            None,
                            "correlation needs exactly two columns",
                        ));
                    }
                    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r[0], r[1])).unzip();
                    serde_json::to_value(stats::pearson_r(&xs, &ys)?)
                }
            }
            .expect("results serialize");
            let text = Artifact::Json(value).bytes();
            match output {
                Some(p) => {
                    write(&p, &text)?;
                    Ok(format!("-> {}", p.display()))
                }
                None => Ok(String::from_utf8(text)
                    .expect("JSON is UTF-8")
                    .trim_end()
                    .to_string()),
            }
        }
        Command::Render {
            layer,
            fixations,
            screen,
            stimulus,
            window,
            low,
            high,
            sigma,
            opacity,
            output,
        } => {
            let fx = load_fixations(&fixations)?;
            let d = RenderParams::default();
            let params = RenderParams {
                layer: layer.into(),
                window: window.as_deref().map(parse_window).transpose()?,
                low: low.unwrap_or(d.low),
                high: high.unwrap_or(d.high),
                kernel_sigma_px: sigma.unwrap_or(d.kernel_sigma_px),
                opacity: opacity.unwrap_or(d.opacity),
                fixation: d.fixation,
            };
            // Same validation as the service.
            let params = match analysis::AnalysisParams::parse(
                analysis::AnalysisKind::Render,
                serde_json::to_value(params).expect("params serialize"),
            )? {
                analysis::AnalysisParams::Render(p) => p,
                _ => unreachable!(),
            };
            let img = stimulus.as_deref().map(render::load_stimulus).transpose()?;
            let artifact = analysis::render_layer(&fx, screen, &params, img.as_ref())?;
            write(&output, &artifact.bytes())?;
            Ok(format!(
                "{} -> {}",
                artifact.content_type(),
                output.display()
            ))
        }
        Command::Serve {
            workspace,
            port,
            ui_dir,
        } => {
            let ws = Workspace::open(&workspace)?;
            let state = crate::http::AppState {
                workspace: ws,
                ui_dir,
            };
            let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::http::serve(addr, state))?;
            Ok("server stopped".into())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_header_and_blanks() {
        let t = parse_table("a,b,c\n1,2,3\n4,,6\n").unwrap();
        assert_eq!(
            t,
            vec![
                vec![Some(1.0), Some(2.0), Some(3.0)],
                vec![Some(4.0), None, Some(6.0)]
            ]
        );
        assert_eq!(columns(&t), vec![vec![1.0, 4.0], vec![2.0], vec![3.0, 6.0]]);
        assert!(complete_rows(&t).is_err());
    }

    #[test]
    fn table_whitespace_and_bad_cells() {
        let t = parse_table("1 2\n3\t4\n").unwrap();
        assert_eq!(t.len(), 2);
        let err = parse_table("1,2\nx,3\n").unwrap_err();
        assert_eq!(err.code(), "ValidationError");
        assert_eq!(err.field(), Some("line 2"));
        assert!(parse_table("h1,h2\n").is_err());
    }

    #[test]
    fn window_parsing() {
        assert_eq!(parse_window("10, 250.5").unwrap(), [10.0, 250.5]);
        assert!(parse_window("10").is_err());
    }

    #[test]
    fn cli_parses_every_subcommand() {
        for args in [
            &[
                "gazekit", "ingest", "log.csv", "--screen", "1366x768", "-o", "r.json",
            ][..],
            &[
                "gazekit",
                "fixate",
                "r.json",
                "--dispersion",
                "40",
                "--min-dur",
                "80",
                "-o",
                "f.json",
            ],
            &[
                "gazekit", "cluster", "f.json", "--method", "kmeans", "--sweep", "2..10", "--seed",
                "3", "-o", "m.json",
            ],
            &["gazekit", "cluster", "f.json", "--k", "3", "-o", "m.json"],
            &[
                "gazekit",
                "sequence",
                "a.json",
                "b.json",
                "--screen",
                "1366x768",
                "--per-user",
                "-o",
                "s.json",
            ],
            &["gazekit", "stats", "rmanova", "t.csv"],
            &[
                "gazekit", "render", "scatter", "f.json", "--screen", "800x600", "--window",
                "0,500", "--low", "0000ff", "-o", "s.svg",
            ],
            &["gazekit", "serve", "--workspace", "ws", "--port", "9000"],
        ] {
            Cli::try_parse_from(args).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        }
        assert!(Cli::try_parse_from([
            "gazekit", "cluster", "f.json", "--k", "3", "--sweep", "2..4", "-o", "m"
        ])
        .is_err());
    }
}
