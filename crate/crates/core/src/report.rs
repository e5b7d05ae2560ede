//! End-to-end analysis and report emission: JSON reports, dimension CSVs,
//! log-log plot data (CSV, optional SVG) and per-block segment summaries.
//!
//! Everything written here is a pure function of the inputs and flags. The
//! one exception is [`Sidecar`], which carries the generation time and is
//! excluded from [`AnalysisReport::payload_json`].

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dimension::{classify, profile_layer, Classification, LambdaOutcome, LayerProfile};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScheduleKind};
use crate::io::{load_checkpoint, LayerKind, ShapeManifest, TensorRecord};
use crate::segment::{segment_2d, segment_4d};

pub const TOOL_NAME: &str = "fractaldim";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_LAMBDAS: [u32; 5] = [2, 3, 5, 7, 9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub lambda: u32,
    /// `estimated` or `skipped`.
    pub status: String,
    pub r_values: Vec<usize>,
    pub counts: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<f64>,
    pub perfect_tiling: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub name: String,
    pub kind: LayerKind,
    pub shape: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
    pub estimates: Vec<EstimateRow>,
}

/// Non-deterministic metadata, kept out of the payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub generated_unix_secs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool: String,
    pub tool_version: String,
    pub model_name: String,
    pub schedule: ScheduleKind,
    pub lambdas: Vec<u32>,
    /// SHA-256 over the analyzed `(name, shape, kind)` triples.
    pub input_digest: String,
    pub layers: Vec<LayerReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<Sidecar>,
}

impl AnalysisReport {
    pub fn with_timestamp(mut self) -> Self {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.sidecar = Some(Sidecar {
            generated_unix_secs: secs,
        });
        self
    }

    /// Deterministic JSON: the report without its sidecar.
    pub fn payload_json(&self) -> Result<String> {
        let payload = AnalysisReport {
            sidecar: None,
            ..self.clone()
        };
        serde_json::to_string_pretty(&payload).map_err(|e| Error::json("encoding report", e))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("encoding report", e))
    }

    pub fn layer(&self, name: &str) -> Option<&LayerReport> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn dimension(&self, layer: &str, lambda: u32) -> Option<f64> {
        self.layer(layer)?
            .estimates
            .iter()
            .find(|e| e.lambda == lambda)?
            .dimension
    }
}

fn estimate_row(grid: Grid, lambda: u32, outcome: &LambdaOutcome) -> EstimateRow {
    match outcome {
        LambdaOutcome::Estimated(est) => {
            let verdict = classify(grid, est);
            EstimateRow {
                lambda,
                status: "estimated".into(),
                r_values: est.schedule.r_values.clone(),
                counts: est.counts.clone(),
                dimension: Some(est.dimension),
                slope: Some(est.fit.slope),
                intercept: Some(est.fit.intercept),
                r_squared: Some(est.fit.r_squared),
                perfect_tiling: verdict.perfect_tiling,
                classification: Some(verdict.classification),
                skip_reason: None,
            }
        }
        LambdaOutcome::Skipped { schedule, reason } => EstimateRow {
            lambda,
            status: "skipped".into(),
            counts: schedule
                .r_values
                .iter()
                .map(|&r| (grid.rows() / r) * (grid.cols() / r))
                .collect(),
            r_values: schedule.r_values.clone(),
            dimension: None,
            slope: None,
            intercept: None,
            r_squared: None,
            perfect_tiling: schedule.tiles_perfectly(grid),
            classification: None,
            skip_reason: Some(reason.clone()),
        },
    }
}

fn layer_report(profile: &LayerProfile, shape: &[usize]) -> LayerReport {
    LayerReport {
        name: profile.layer_name.clone(),
        kind: profile.kind,
        shape: shape.to_vec(),
        rows: profile.grid.rows(),
        cols: profile.grid.cols(),
        estimates: profile
            .estimates
            .iter()
            .map(|(&lambda, outcome)| estimate_row(profile.grid, lambda, outcome))
            .collect(),
    }
}

fn digest(entries: &[(&str, &[usize], LayerKind)]) -> String {
    let mut hasher = Sha256::new();
    for (name, shape, kind) in entries {
        hasher.update(name.as_bytes());
        hasher.update([0]);
        for d in *shape {
            hasher.update((*d as u64).to_le_bytes());
        }
        hasher.update(kind.name().as_bytes());
        hasher.update([0xff]);
    }
    format!("sha256:{}", hex::encode(hasher.finalize()))
}

/// Profiles every conv and dense entry of the manifest. Layers come out
/// sorted by name, λ ascending.
pub fn analyze_manifest(
    manifest: &ShapeManifest,
    lambdas: &[u32],
    schedule: ScheduleKind,
) -> Result<AnalysisReport> {
    if lambdas.is_empty() {
        return Err(Error::EmptyLambdas);
    }
    if let Some(&bad) = lambdas.iter().find(|&&l| l < 2) {
        return Err(Error::InvalidLambda(bad));
    }
    let mut entries: Vec<_> = manifest.analyzable().collect();
    if entries.is_empty() {
        return Err(Error::NoAnalyzableLayers(manifest.model_name.clone()));
    }
    entries.sort_by(|a, b| a.name.cmp(&b.name));

    let layers = entries
        .par_iter()
        .map(|e| {
            let grid = Grid::from_shape(&e.shape)?;
            let profile = profile_layer(&e.name, e.kind, grid, lambdas, schedule)?;
            Ok(layer_report(&profile, &e.shape))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sorted_lambdas = lambdas.to_vec();
    sorted_lambdas.sort_unstable();
    sorted_lambdas.dedup();
    let keyed: Vec<_> = entries
        .iter()
        .map(|e| (e.name.as_str(), e.shape.as_slice(), e.kind))
        .collect();
    Ok(AnalysisReport {
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        model_name: manifest.model_name.clone(),
        schedule,
        lambdas: sorted_lambdas,
        input_digest: digest(&keyed),
        layers,
        sidecar: None,
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn analyze_checkpoint(
    path: impl AsRef<Path>,
    lambdas: &[u32],
    schedule: ScheduleKind,
) -> Result<AnalysisReport> {
    let path = path.as_ref();
    let records = load_checkpoint(path)?;
    let manifest = ShapeManifest::from_records(file_stem(path), &records)?;
    analyze_manifest(&manifest, lambdas, schedule)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn escape_csv(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const DIMENSION_CSV_HEADER: &str =
    "model,layer,kind,rows,cols,lambda,schedule,status,dimension,slope,intercept,r_squared,points,perfect_tiling,classification,skip_reason";

/// One row per `(layer, λ)`, skips included.
pub fn dimensions_csv(report: &AnalysisReport) -> String {
    let mut out = String::new();
    out.push_str(DIMENSION_CSV_HEADER);
    out.push('\n');
    for layer in &report.layers {
        for e in &layer.estimates {
            let classification = match e.classification {
                Some(Classification::Euclidean) => "euclidean",
                Some(Classification::Fractal) => "fractal",
                None => "",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                escape_csv(&report.model_name),
                escape_csv(&layer.name),
                layer.kind.name(),
                layer.rows,
                layer.cols,
                e.lambda,
                report.schedule.name(),
                e.status,
                opt(e.dimension),
                opt(e.slope),
                opt(e.intercept),
                opt(e.r_squared),
                e.r_values.len(),
                e.perfect_tiling,
                classification,
                escape_csv(e.skip_reason.as_deref().unwrap_or("")),
            );
        }
    }
    out
}

/// Fixed-width table with D at four decimals.
pub fn format_table(report: &AnalysisReport) -> String {
    let width = report
        .layers
        .iter()
        .map(|l| l.name.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}  {:>11}", "layer", "grid");
    for l in &report.lambdas {
        let _ = write!(out, "  {:>8}", format!("λ={l}"));
    }
    out.push('\n');
    for layer in &report.layers {
        let _ = write!(
            out,
            "{:<width$}  {:>11}",
            layer.name,
            format!("{}x{}", layer.rows, layer.cols)
        );
        for l in &report.lambdas {
            let cell = layer
                .estimates
                .iter()
                .find(|e| e.lambda == *l)
                .and_then(|e| e.dimension)
                .map(|d| format!("{d:.4}"))
                .unwrap_or_else(|| "-".into());
            let _ = write!(out, "  {cell:>8}");
        }
        out.push('\n');
    }
    out
}

pub fn write_report(report: &AnalysisReport, path: impl AsRef<Path>) -> Result<()> {
    let mut json = report.to_json()?;
    json.push('\n');
    write_file(path.as_ref(), json.as_bytes())
}

pub fn write_dimensions_csv(report: &AnalysisReport, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), dimensions_csv(report).as_bytes())
}

/// Points and fitted line of one `(layer, λ)` log-log regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub layer: String,
    pub lambda: u32,
    /// `(ln r, ln N)`.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
}

impl PlotSeries {
    pub fn fitted(&self, ln_r: f64) -> f64 {
        self.intercept + self.slope * ln_r
    }
}

pub fn plot_series(report: &AnalysisReport) -> Vec<PlotSeries> {
    let mut out = Vec::new();
    for layer in &report.layers {
        for e in &layer.estimates {
            let (Some(slope), Some(intercept)) = (e.slope, e.intercept) else {
                continue;
            };
            let points = e
                .r_values
                .iter()
                .zip(&e.counts)
                .filter(|(_, &n)| n > 0)
                .map(|(&r, &n)| ((r as f64).ln(), (n as f64).ln()))
                .collect();
            out.push(PlotSeries {
                layer: layer.name.clone(),
                lambda: e.lambda,
                points,
                slope,
                intercept,
            });
        }
    }
    out
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn series_csv(series: &PlotSeries) -> String {
    let mut out = String::from("ln_r,ln_n,fitted\n");
    for &(x, y) in &series.points {
        let _ = writeln!(out, "{x},{y},{}", series.fitted(x));
    }
    out
}

const PALETTE: [&str; 6] = [
    "#440154", "#3b528b", "#21918c", "#5ec962", "#fde725", "#e3742b",
];

/// Static SVG with every λ series of one layer: markers for data, lines for
/// fits.
pub fn layer_svg(layer: &str, series: &[&PlotSeries]) -> String {
    let (w, h, pad) = (640.0, 420.0, 56.0);
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r##"<path d="M{pad} {top} V{bottom} H{right}" stroke="#333" fill="none"/>"##,
        top = pad,
        bottom = h - pad,
        right = w - pad
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">ln r</text>"#,
        w / 2.0,
        h - pad / 3.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">ln N</text>"#,
        pad / 3.0,
        h / 2.0,
        pad / 3.0,
        h / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        w / 2.0,
        pad / 2.0,
        xml_escape(layer)
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let (a, b) = bounds(s.points.iter().map(|p| p.0));
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            sx(a),
            sy(s.fitted(a)),
            sx(b),
            sy(s.fitted(b))
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">λ={} D={:.4}</text>"#,
            w - pad - 110.0,
            pad + 16.0 * (k as f64 + 1.0),
            s.lambda,
            -s.slope
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Writes `<layer>.lambda<λ>.csv` for every series and, with `svg`, one
/// `<layer>.svg` per layer. Returns the written paths in order.
pub fn emit_plot(series: &[PlotSeries], dir: impl AsRef<Path>, svg: bool) -> Result<Vec<PathBuf>> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let dir = dir.as_ref();
    let mut written = Vec::new();
    for s in series {
        let path = dir.join(format!("{}.lambda{}.csv", file_safe(&s.layer), s.lambda));
        write_file(&path, series_csv(s).as_bytes())?;
        written.push(path);
    }
    if svg {
        let mut layers: Vec<&str> = series.iter().map(|s| s.layer.as_str()).collect();
        layers.dedup();
        for layer in layers {
            let of_layer: Vec<&PlotSeries> = series.iter().filter(|s| s.layer == layer).collect();
            let path = dir.join(format!("{}.svg", file_safe(layer)));
            write_file(&path, layer_svg(layer, &of_layer).as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub p: usize,
    pub q: usize,
    pub cells: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl BlockStats {
    fn of(p: usize, q: usize, values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self {
            p,
            q,
            cells: values.len(),
            min,
            max,
            mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub layer: String,
    pub r: usize,
    pub blocks: Vec<BlockStats>,
    /// Trimmed grid cells (kernel fibers for 4D tensors).
    pub trimmed_cells: usize,
}

pub fn segment_summary(record: &TensorRecord, r: usize) -> Result<SegmentSummary> {
    let (blocks, trimmed_cells) = match record.shape.len() {
        2 => {
            let p = segment_2d(&record.to_matrix()?, r)?;
            let stats = p
                .blocks
                .iter()
                .map(|(i, b)| BlockStats::of(i.p, i.q, b.values()))
                .collect();
            (stats, p.trimmed_cell_count)
        }
        4 => {
            let p = segment_4d(&record.to_tensor4d()?, r)?;
            let stats = p
                .blocks
                .iter()
                .map(|(i, b)| BlockStats::of(i.p, i.q, b.values()))
                .collect();
            (stats, p.trimmed_fiber_count)
        }
        _ => {
            return Err(Error::Rank {
                expected: 2,
                shape: record.shape.clone(),
            })
        }
    };
    Ok(SegmentSummary {
        layer: record.name.clone(),
        r,
        blocks,
        trimmed_cells,
    })
}

pub const SEGMENT_CSV_HEADER: &str = "row_kind,p,q,cells,min,max,mean";

/// One `block` row per block in row-major order, then a `trimmed` row.
pub fn write_segment_csv(summary: &SegmentSummary, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{SEGMENT_CSV_HEADER}")?;
    for b in &summary.blocks {
        writeln!(
            out,
            "block,{},{},{},{},{},{}",
            b.p, b.q, b.cells, b.min, b.max, b.mean
        )?;
    }
    writeln!(out, "trimmed,,,{},,,", summary.trimmed_cells)
}

pub fn segment_to_file(summary: &SegmentSummary, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_segment_csv(summary, &mut buf).expect("writing to memory");
    write_file(path.as_ref(), &buf)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::io::{builtin_manifest, Arch, Dtype};

    #[test]
    fn resnet_fc_values() {
        let report = analyze_manifest(
            &builtin_manifest(Arch::ResNet18),
            &[2, 5, 7],
            ScheduleKind::Geometric,
        )
        .unwrap();
        assert_abs_diff_eq!(
            report.dimension("fc.weight", 2).unwrap(),
            2.1288,
            epsilon = 5e-5
        );
        assert_abs_diff_eq!(
            report.dimension("fc.weight", 5).unwrap(),
            2.0024,
            epsilon = 5e-5
        );
        assert_abs_diff_eq!(
            report.dimension("fc.weight", 7).unwrap(),
            2.1843,
            epsilon = 5e-5
        );
        let names: Vec<_> = report.layers.iter().map(|l| l.name.clone()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }

    #[test]
    fn floor_schedule_changes_values() {
        let m = builtin_manifest(Arch::ResNet18);
        let geo = analyze_manifest(&m, &[2], ScheduleKind::Geometric).unwrap();
        let floor = analyze_manifest(&m, &[2], ScheduleKind::FloorDecay).unwrap();
        // (10, 512): r ∈ {10, 5, 2, 1} gives N ∈ {51, 204, 1280, 5120}
        let fc_floor = floor.dimension("fc.weight", 2).unwrap();
        assert_ne!(fc_floor, geo.dimension("fc.weight", 2).unwrap());
        let x: Vec<f64> = [10f64, 5.0, 2.0, 1.0].iter().map(|r| r.ln()).collect();
        let y: Vec<f64> = [51f64, 204.0, 1280.0, 5120.0]
            .iter()
            .map(|n| n.ln())
            .collect();
        let (mx, my) = (x.iter().sum::<f64>() / 4.0, y.iter().sum::<f64>() / 4.0);
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        assert_abs_diff_eq!(fc_floor, -sxy / sxx, epsilon = 1e-12);
    }

    #[test]
    fn no_analyzable_layers() {
        let m = ShapeManifest::from_json("biases", r#"[{"name":"b","shape":[4],"kind":"other"}]"#)
            .unwrap();
        assert!(matches!(
            analyze_manifest(&m, &[2], ScheduleKind::Geometric),
            Err(Error::NoAnalyzableLayers(_))
        ));
    }

    #[test]
    fn csv_row_count_includes_skips() {
        let m = builtin_manifest(Arch::SimpleCnn15);
        let report = analyze_manifest(&m, &DEFAULT_LAMBDAS, ScheduleKind::Geometric).unwrap();
        let csv = dimensions_csv(&report);
        assert_eq!(
            csv.lines().count(),
            1 + m.analyzable().count() * DEFAULT_LAMBDAS.len()
        );
        // conv1 (64, 3) has a single scale at λ ≥ 5
        assert!(csv
            .lines()
            .any(|l| l.contains("conv1.weight") && l.contains(",skipped,")));
    }

    #[test]
    fn table_uses_four_decimals() {
        let report = analyze_manifest(
            &builtin_manifest(Arch::ResNet18),
            &[2],
            ScheduleKind::Geometric,
        )
        .unwrap();
        let table = format_table(&report);
        assert!(table
            .lines()
            .any(|l| l.starts_with("fc.weight") && l.contains("2.1288")));
    }

    #[test]
    fn plot_series_for_64_by_64() {
        let m = ShapeManifest::from_json("m", r#"[{"name":"w","shape":[64,64],"kind":"dense2d"}]"#)
            .unwrap();
        let report = analyze_manifest(&m, &[2, 3], ScheduleKind::Geometric).unwrap();
        let series = plot_series(&report);
        let s3 = series.iter().find(|s| s.lambda == 3).unwrap();
        assert_eq!(s3.points.len(), 4);
        assert_abs_diff_eq!(s3.slope, -2.0928, epsilon = 5e-5);
        // perfect tiling: the fit passes through the data
        let s2 = series.iter().find(|s| s.lambda == 2).unwrap();
        for &(x, y) in &s2.points {
            assert_abs_diff_eq!(s2.fitted(x), y, epsilon = 1e-12);
        }

        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot(&series, dir.path(), true).unwrap();
        assert_eq!(files.len(), 3);
        let csv = std::fs::read_to_string(dir.path().join("w.lambda3.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        let svg = std::fs::read_to_string(dir.path().join("w.svg")).unwrap();
        assert!(svg.contains("ln r") && svg.contains("ln N"));

        assert!(matches!(
            emit_plot(&[], dir.path(), false),
            Err(Error::EmptySeries)
        ));
    }

    #[test]
    fn segment_rows() {
        let rec = TensorRecord::new("c", Dtype::F64, vec![4, 4], vec![3.5; 16]).unwrap();
        let s = segment_summary(&rec, 2).unwrap();
        assert_eq!(s.blocks.len(), 4);
        assert!(s.blocks.iter().all(|b| b.mean == 3.5));

        let rec = TensorRecord::new(
            "f",
            Dtype::F64,
            vec![5, 5],
            (0..25).map(f64::from).collect(),
        )
        .unwrap();
        let s = segment_summary(&rec, 2).unwrap();
        assert_eq!(s.trimmed_cells, 9);
        let mut buf = Vec::new();
        write_segment_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 + 1);
        assert_eq!(text.lines().last().unwrap(), "trimmed,,,9,,,");
        assert!(text.contains("block,1,1,4,0,6,3"));

        assert!(matches!(
            segment_summary(&rec, 0),
            Err(Error::InvalidScale { .. })
        ));
        let bias = TensorRecord::new("b", Dtype::F64, vec![5], vec![0.0; 5]).unwrap();
        assert!(matches!(segment_summary(&bias, 1), Err(Error::Rank { .. })));
    }
}
