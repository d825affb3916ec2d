use super::batch::{BatchRun, BatchStats};
use super::episode::{EpisodeResult, TerminationReason, CSV_SCHEMA_VERSION};
use super::HarnessError;
use crate::edge_ai::LatencyModel;
use crate::perception::PerceptionMode;
use crate::scenarios::Participants;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub dt: f64,
    pub latency: LatencyModel,
    /// The latency in command-line notation, e.g. `det:0.3`.
    pub latency_spec: String,
    pub latency_mean_s: f64,
    pub drop_rate: f64,
    pub participants: Participants,
    pub perception: PerceptionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub collision: bool,
    pub min_distance: Option<f64>,
    pub ticks: u64,
    pub termination: TerminationReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub csv_schema_version: u32,
    pub scenario: String,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub config: ConfigEcho,
    pub stats: BatchStats,
    /// What the `±` of `min_distance_std` means.
    pub std_kind: String,
    pub episodes: Vec<EpisodeSummary>,
}

impl Summary {
    pub fn of(run: &BatchRun) -> Self {
        let latency = run.spec.channel.default.latency;
        Self {
            schema_version: SUMMARY_SCHEMA_VERSION,
            csv_schema_version: CSV_SCHEMA_VERSION,
            scenario: run.spec.name.clone(),
            base_seed: run.base_seed,
            seeds: run.seeds(),
            config: ConfigEcho {
                dt: run.spec.dt,
                latency,
                latency_spec: latency.to_string(),
                latency_mean_s: latency.mean(),
                drop_rate: run.spec.channel.default.drop_rate,
                participants: run.spec.ego.participants,
                perception: run.spec.ego.perception,
            },
            stats: run.stats.clone(),
            std_kind: "sample".into(),
            episodes: run
                .episodes
                .iter()
                .map(|e| EpisodeSummary {
                    seed: e.seed,
                    collision: e.collision,
                    min_distance: e.min_distance.is_finite().then_some(e.min_distance),
                    ticks: e.ticks,
                    termination: e.termination,
                })
                .collect(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_episode_csv(episode: &EpisodeResult, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    if episode.rows.is_empty() {
        // serde only emits the header alongside the first record.
        w.write_record(CSV_COLUMNS).map_err(|e| csv_err(path, e))?;
    }
    for row in &episode.rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

/// Header of `episode_<i>.csv`, version [`CSV_SCHEMA_VERSION`].
pub const CSV_COLUMNS: [&str; 15] = [
    "tick",
    "time",
    "ego_x",
    "ego_y",
    "ego_yaw",
    "ego_speed",
    "behavior",
    "fused_count",
    "ego_only_count",
    "adversary_gap",
    "adversary_seen_by_ego",
    "source_counts",
    "sent",
    "dropped",
    "delivered",
];

/// Minimal static line chart: one `<polyline>` per series, one point per
/// sample, x in seconds.
pub fn render_detection_svg(series: &[(String, Vec<f64>)], dt: f64) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
    ];
    let n = series
        .iter()
        .map(|(_, s)| s.len())
        .max()
        .unwrap_or(0)
        .max(2);
    let y_max = series
        .iter()
        .flat_map(|(_, s)| s.iter().copied())
        .fold(1.0_f64, f64::max)
        .ceil();
    let sx = (W - 2.0 * PAD) / (n - 1) as f64;
    let sy = (H - 2.0 * PAD) / y_max;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{b} H{r}" stroke="black" fill="none"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(
        out,
        r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">time (s), 0 to {t:.2}</text>"#,
        x = W / 2.0,
        y = H - 10.0,
        t = (n - 1) as f64 * dt
    );
    let _ = writeln!(
        out,
        r#"<text x="12" y="{y}" font-size="12" transform="rotate(-90 12 {y})" text-anchor="middle">detected objects, 0 to {y_max}</text>"#,
        y = H / 2.0
    );
    for (i, (label, s)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .iter()
            .enumerate()
            .map(|(k, v)| format!("{:.2},{:.2}", PAD + k as f64 * sx, H - PAD - v * sy))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline data-label="{label}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-size="12" fill="{color}">{label}</text>"#,
            x = W - PAD - 120.0,
            y = PAD + 14.0 * (i as f64 + 1.0)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_detection_svg(
    series: &[(String, Vec<f64>)],
    dt: f64,
    path: &Path,
) -> Result<(), HarnessError> {
    std::fs::write(path, render_detection_svg(series, dt)).map_err(io_err(path))
}

/// Writes `episode_<i>.csv` per episode (in seed order), `summary.json`
/// and `detections.svg` into `dir`, creating it if needed.
pub fn emit_outputs(run: &BatchRun, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for (i, ep) in run.episodes.iter().enumerate() {
        let path = dir.join(format!("episode_{i}.csv"));
        write_episode_csv(ep, &path)?;
        written.push(path);
    }
    let summary = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&Summary::of(run)).expect("summary serializes");
    std::fs::write(&summary, json + "\n").map_err(io_err(&summary))?;
    written.push(summary);
    let svg = dir.join("detections.svg");
    write_detection_svg(
        &[
            ("fused".into(), run.stats.fused_count_series.clone()),
            ("ego only".into(), run.stats.ego_only_count_series.clone()),
        ],
        run.spec.dt,
        &svg,
    )?;
    written.push(svg);
    Ok(written)
}
