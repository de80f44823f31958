use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use geolex::analysis::{classic_pca, decompose_and_analyze, project, project_matrix, top_words, Projection};
use geolex::corpus::{
    apply_filter, normalize, preset, read_records, CorpusError, CountAccumulator, FilterSpec, RecordFormat,
    RegionMask,
};
use geolex::geojson::model_layer;
use geolex::linalg::text::format_g17;
use geolex::store;
use geolex::synthetic::{generate, SyntheticSpec};
use geolex::PcpConfig;
use serde_json::{json, Value};

use crate::{input, output, CliError, Context, FilterOverrides, Outcome};

pub const DEFAULT_LEVEL: u32 = 6;
pub const DEFAULT_SEGMENTS: u32 = 4;
pub const STATS_FILE: &str = "stats.json";

fn parse_format(s: &str) -> Result<RecordFormat, String> {
    match s {
        "jsonl" | "json" => Ok(RecordFormat::Jsonl),
        "tsv" => Ok(RecordFormat::Tsv),
        _ => Err(format!("unknown format {s:?} (expected jsonl or tsv)")),
    }
}

fn parse_bbox(s: &str) -> Result<RegionMask, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number {p:?}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [min_lon, min_lat, max_lon, max_lat] if min_lon <= max_lon && min_lat <= max_lat => {
            Ok(RegionMask::BoundingBox {
                min_lon,
                min_lat,
                max_lon,
                max_lat,
            })
        }
        [_, _, _, _] => Err("bbox minimum exceeds maximum".into()),
        _ => Err("expected min_lon,min_lat,max_lon,max_lat".into()),
    }
}

/// Outer ring of a polygon file: a bare `[[lon, lat], ...]` array, or a
/// GeoJSON Polygon geometry, Feature, or FeatureCollection (first feature).
fn read_polygon(path: &Path) -> Result<RegionMask, CliError> {
    let file = File::open(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let v: Value =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let mut node = &v;
    loop {
        node = match node.get("type").and_then(Value::as_str) {
            Some("FeatureCollection") => &node["features"][0],
            Some("Feature") => &node["geometry"],
            Some("Polygon") => &node["coordinates"][0],
            Some(other) => return Err(input(format!("{}: unsupported GeoJSON type {other}", path.display()))),
            None => break,
        };
    }
    let ring: Vec<[f64; 2]> =
        serde_json::from_value(node.clone()).map_err(|e| input(format!("{}: {e}", path.display())))?;
    if ring.len() < 3 {
        return Err(input(format!("{}: polygon needs at least 3 vertices", path.display())));
    }
    Ok(RegionMask::Polygon(ring))
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(output)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(|e| output(format!("{}: {e}", path.display())))?);
    serde_json::to_writer_pretty(&mut w, v).map_err(output)?;
    writeln!(w).and_then(|_| w.flush()).map_err(output)
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Record file, one document per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for vocab.txt, cells.txt, counts.csv and stats.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Mesh level of the cells (default 6).
    #[arg(long)]
    pub level: Option<u32>,
    /// Take the level from a preset (usa or nyc).
    #[arg(long, conflicts_with = "level")]
    pub preset: Option<String>,
    /// Record layout: jsonl (text, lat, lon) or tsv (lat, lon, text).
    #[arg(long, value_parser = parse_format)]
    pub format: Option<RecordFormat>,
    /// Keep only documents inside min_lon,min_lat,max_lon,max_lat.
    #[arg(long, value_parser = parse_bbox, allow_hyphen_values = true, conflicts_with = "polygon")]
    pub bbox: Option<RegionMask>,
    /// Keep only documents inside a polygon read from a JSON file.
    #[arg(long)]
    pub polygon: Option<PathBuf>,
}

pub fn ingest(ctx: &Context, args: &IngestArgs) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let level = match (args.level, &args.preset) {
        (Some(l), _) => l,
        (None, Some(p)) => preset(p).map_err(input)?.level,
        (None, None) => match (cfg.level, &cfg.preset) {
            (Some(l), _) => l,
            (None, Some(p)) => preset(p).map_err(input)?.level,
            (None, None) => DEFAULT_LEVEL,
        },
    };
    let format = args.format.or(cfg.format).unwrap_or_default();
    let mask = match (&args.bbox, &args.polygon) {
        (Some(b), _) => Some(b.clone()),
        (None, Some(p)) => Some(read_polygon(&ctx.resolve(p))?),
        (None, None) => cfg.mask.clone(),
    };

    let path = ctx.resolve(&args.input);
    let file = File::open(&path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let mut acc = CountAccumulator::try_new(level).map_err(input)?.with_mask(mask);
    for rec in read_records(BufReader::new(file), format) {
        acc.add_record(rec).map_err(|e| input(format!("{}: {e}", path.display())))?;
    }
    let (w, stats) = acc.finish_with_stats();

    let out = ctx.resolve(&args.out);
    store::write_counts(&out, &w).map_err(output)?;
    let (words, cells) = w.shape();
    write_json(
        &out.join(STATS_FILE),
        &json!({
            "level": level,
            "documents": stats.documents,
            "empty_documents": stats.empty_documents,
            "malformed": stats.malformed,
            "outside_region": stats.outside_region,
            "tokens": stats.tokens,
            "words": words,
            "cells": cells,
            "nonzeros": w.nnz(),
        }),
    )?;
    println!(
        "level {level}: {} documents ({} empty), {} malformed, {} outside region, {} tokens",
        stats.documents, stats.empty_documents, stats.malformed, stats.outside_region, stats.tokens
    );
    println!("{words} words x {cells} cells, {} nonzero entries", w.nnz());
    Ok(Outcome::Done)
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Minimum tokens per cell.
    #[arg(long)]
    pub cell_min_tokens: Option<u64>,
    /// Minimum distinct words per cell.
    #[arg(long)]
    pub cell_min_distinct: Option<usize>,
    /// Minimum occurrences of a word over the kept cells.
    #[arg(long)]
    pub word_min_total: Option<u64>,
    /// Minimum number of kept cells a word appears in.
    #[arg(long)]
    pub word_min_cells: Option<usize>,
}

impl FilterArgs {
    fn overrides(&self) -> FilterOverrides {
        FilterOverrides {
            cell_min_tokens: self.cell_min_tokens,
            cell_min_distinct: self.cell_min_distinct,
            word_min_total: self.word_min_total,
            word_min_cells: self.word_min_cells,
        }
    }
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Directory written by `ingest`.
    #[arg(long)]
    pub counts: PathBuf,
    /// Directory for the frequency matrix and its sidecars.
    #[arg(long)]
    pub out: PathBuf,
    /// Start from a preset's thresholds (usa or nyc); threshold flags still apply.
    #[arg(long)]
    pub preset: Option<String>,
    #[command(flatten)]
    pub filter: FilterArgs,
}

pub fn matrix(ctx: &Context, args: &MatrixArgs) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    // a preset flag outranks every config setting; otherwise config preset,
    // then config thresholds
    let (spec, level) = match (&args.preset, &cfg.preset) {
        (Some(p), _) => {
            let p = preset(p).map_err(input)?;
            (p.filter, Some(p.level))
        }
        (None, Some(p)) => {
            let p = preset(p).map_err(input)?;
            (cfg.filter.apply(p.filter), Some(p.level))
        }
        (None, None) => (cfg.filter.apply(FilterSpec::default()), None),
    };
    let spec = args.filter.overrides().apply(spec);

    let dir = ctx.resolve(&args.counts);
    let w = store::read_counts(&dir).map_err(input)?;
    if let (Some(want), Ok(text)) = (level, fs::read_to_string(dir.join(STATS_FILE))) {
        let got = serde_json::from_str::<Value>(&text).ok().and_then(|v| v["level"].as_u64());
        if let Some(got) = got.filter(|&g| g != u64::from(want)) {
            eprintln!("warning: counts were binned at level {got}, preset expects level {want}");
        }
    }
    let filtered = match apply_filter(&w, &spec) {
        Ok(f) => f,
        Err(e @ CorpusError::EmptyAfterFilter { .. }) => return Err(CliError::FilterEmpty(e.to_string())),
        Err(e) => return Err(input(e)),
    };
    // cells can lose every word to the word rule; they cannot be normalized
    let emptied = filtered.cell_totals().iter().filter(|&&t| t == 0).count();
    let filtered = if emptied > 0 {
        eprintln!("warning: dropping {emptied} cells left without tokens by the word filter");
        let only_nonempty = FilterSpec {
            cell_min_tokens: 1,
            ..FilterSpec::default()
        };
        apply_filter(&filtered, &only_nonempty).map_err(|e| CliError::FilterEmpty(e.to_string()))?
    } else {
        filtered
    };
    let x = normalize(&filtered).map_err(input)?;

    let out = ctx.resolve(&args.out);
    store::write_frequency(&out, &x, Some(filtered.cell_totals())).map_err(output)?;
    let (words, cells) = x.shape();
    let (w0, c0) = w.shape();
    println!("{words} words x {cells} cells (from {w0} x {c0})");
    Ok(Outcome::Done)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Pca,
    Rpca,
}

#[derive(Debug, Args)]
pub struct PcpArgs {
    /// Sparse-term weight (default 1/sqrt of the larger dimension).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Relative feasibility tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Initial penalty (default 1.25 over the spectral norm).
    #[arg(long)]
    pub mu0: Option<f64>,
    /// Penalty growth factor.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Penalty cap (default 1e7 times mu0).
    #[arg(long)]
    pub mu_max: Option<f64>,
}

impl PcpArgs {
    pub fn apply(&self, mut c: PcpConfig) -> PcpConfig {
        c.lambda = self.lambda.or(c.lambda);
        c.tol_delta = self.tol.unwrap_or(c.tol_delta);
        c.max_iter = self.max_iter.unwrap_or(c.max_iter);
        c.mu0 = self.mu0.or(c.mu0);
        c.rho = self.rho.unwrap_or(c.rho);
        c.mu_max = self.mu_max.or(c.mu_max);
        c
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Directory written by `matrix`.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Output directory: raw/ for pca; low_rank/, sparse/, the two part
    /// matrices and diagnostics.json for rpca.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Rpca)]
    pub mode: Mode,
    #[command(flatten)]
    pub pcp: PcpArgs,
}

pub fn decompose(ctx: &Context, args: &DecomposeArgs) -> Result<Outcome, CliError> {
    let cfg = args.pcp.apply(ctx.config.pcp);
    cfg.validate().map_err(input)?;
    let x = store::read_frequency(&ctx.resolve(&args.matrix)).map_err(input)?;
    let out = ctx.resolve(&args.out);
    match args.mode {
        Mode::Pca => {
            let m = classic_pca(&x).map_err(input)?;
            store::write_model(&out.join("raw"), &m).map_err(output)?;
            let lead: Vec<String> = m.sigma().iter().take(5).map(|s| format!("{s:.6}")).collect();
            println!("{} components; leading singular values {}", m.components(), lead.join(" "));
            Ok(Outcome::Done)
        }
        Mode::Rpca => {
            let r = decompose_and_analyze(&x, &cfg).map_err(input)?;
            store::write_model(&out.join("low_rank"), &r.low_rank).map_err(output)?;
            store::write_model(&out.join("sparse"), &r.sparse).map_err(output)?;
            store::write_dense(&out.join("low_rank.csv"), &r.pcp.low_rank).map_err(output)?;
            store::write_dense(&out.join("sparse.csv"), &r.pcp.sparse).map_err(output)?;
            write_json(&out.join("diagnostics.json"), &r.pcp.diagnostics())?;
            println!(
                "{} iterations, residual {:.3e}, rank {} low-rank part, {} nonzero sparse entries, lambda {}",
                r.pcp.iterations,
                r.pcp.final_residual(),
                r.pcp.rank_lr,
                r.pcp.nnz_sparse,
                r.pcp.lambda
            );
            if r.not_converged() {
                eprintln!("warning: solver stopped at the iteration cap before converging");
                return Ok(Outcome::NotConverged);
            }
            Ok(Outcome::Done)
        }
    }
}

fn component_limit(requested: Option<usize>, available: usize) -> Result<usize, CliError> {
    match requested {
        None => Ok(available),
        Some(n) if n <= available => Ok(n),
        Some(n) => Err(input(format!("{n} components requested, model has {available}"))),
    }
}

#[derive(Debug, Args)]
pub struct TopWordsArgs {
    /// Model directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Words per sign and component.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Number of leading components (default all).
    #[arg(long)]
    pub components: Option<usize>,
    /// CSV destination (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn top_words_cmd(ctx: &Context, args: &TopWordsArgs) -> Result<Outcome, CliError> {
    let m = store::read_model(&ctx.resolve(&args.model)).map_err(input)?;
    let n = component_limit(args.components, m.components())?;
    let mut csv = String::from("component,sign,rank,word,score\n");
    for c in 0..n {
        let t = top_words(&m, c, args.k).map_err(input)?;
        for (sign, list) in [("positive", &t.positive), ("negative", &t.negative)] {
            for (rank, w) in list.iter().enumerate() {
                csv.push_str(&format!("{c},{sign},{},{},{}\n", rank + 1, w.word, format_g17(w.score)));
            }
        }
    }
    match &args.out {
        Some(p) => {
            let p = ctx.resolve(p);
            if let Some(dir) = p.parent() {
                fs::create_dir_all(dir).map_err(output)?;
            }
            fs::write(&p, csv).map_err(|e| output(format!("{}: {e}", p.display())))?;
        }
        None => print!("{csv}"),
    }
    Ok(Outcome::Done)
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Base model directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Frequency matrix directory of the new corpus (or counts with --use-counts).
    #[arg(long)]
    pub matrix: PathBuf,
    /// Treat --matrix as an `ingest` directory and project raw counts.
    #[arg(long)]
    pub use_counts: bool,
    /// Number of leading components (default all).
    #[arg(long)]
    pub components: Option<usize>,
    /// Directory for scores.csv (components x cells), cells.txt and alignment.json.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn project_cmd(ctx: &Context, args: &ProjectArgs) -> Result<Outcome, CliError> {
    let base = store::read_model(&ctx.resolve(&args.model)).map_err(input)?;
    let dir = ctx.resolve(&args.matrix);
    let p: Projection = if args.use_counts {
        let w = store::read_counts(&dir).map_err(input)?;
        project_matrix(&base, w.vocabulary(), w.cells(), &w.to_dense()).map_err(input)?
    } else {
        let x = store::read_frequency(&dir).map_err(input)?;
        project(&base, &x).map_err(input)?
    };
    let n = component_limit(args.components, p.scores.rows())?;
    let rows: Vec<usize> = (0..n).collect();

    let out = ctx.resolve(&args.out);
    store::write_dense(&out.join("scores.csv"), &p.scores.select_rows(&rows)).map_err(output)?;
    store::write_cells(&out.join(store::CELLS_FILE), &p.cells).map_err(output)?;
    write_json(&out.join("alignment.json"), &p.alignment)?;
    let a = &p.alignment;
    println!(
        "{n} components x {} cells; {} of {} model words matched, {} missing, {} new words without loadings",
        p.cells.len(),
        a.matched,
        a.base_words,
        a.missing_from_new.len(),
        a.unmatched_new.len()
    );
    Ok(Outcome::Done)
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Model directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Matrix directory whose cell_tokens.txt fills token_count.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Number of leading components (default all).
    #[arg(long)]
    pub components: Option<usize>,
    /// Great-circle subdivisions per trixel edge.
    #[arg(long)]
    pub segments: Option<u32>,
    /// GeoJSON destination.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn export_geojson(ctx: &Context, args: &ExportArgs) -> Result<Outcome, CliError> {
    let m = store::read_model(&ctx.resolve(&args.model)).map_err(input)?;
    let n = component_limit(args.components, m.components())?;
    let segments = args.segments.or(ctx.config.segments).unwrap_or(DEFAULT_SEGMENTS);
    let tokens = match &args.matrix {
        None => None,
        Some(d) => {
            let d = ctx.resolve(d);
            let cells = store::read_cells(&d.join(store::CELLS_FILE)).map_err(input)?;
            match store::read_cell_tokens(&d).map_err(input)? {
                None => {
                    eprintln!("warning: {} has no {}", d.display(), store::CELL_TOKENS_FILE);
                    None
                }
                Some(t) if t.len() != cells.len() => {
                    return Err(input(format!("{}: token counts do not match the cell list", d.display())))
                }
                Some(t) => Some(
                    m.cells()
                        .ids()
                        .iter()
                        .map(|&id| {
                            cells
                                .index_of(id)
                                .map(|j| t[j])
                                .ok_or_else(|| input(format!("cell {id} missing from {}", d.display())))
                        })
                        .collect::<Result<Vec<u64>, CliError>>()?,
                ),
            }
        }
    };
    let layer = model_layer(&m, tokens.as_deref(), n, segments).map_err(input)?;
    let out = ctx.resolve(&args.out);
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir).map_err(output)?;
    }
    let mut w = BufWriter::new(File::create(&out).map_err(|e| output(format!("{}: {e}", out.display())))?);
    serde_json::to_writer(&mut w, &layer).map_err(output)?;
    writeln!(w).and_then(|_| w.flush()).map_err(output)?;
    println!("{} features, {n} score properties", m.cells().len());
    Ok(Outcome::Done)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    Country,
    City,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for docs.jsonl and labels.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Scale::Country)]
    pub scale: Scale,
}

pub fn synth(ctx: &Context, args: &SynthArgs) -> Result<Outcome, CliError> {
    let spec = match args.scale {
        Scale::Country => SyntheticSpec::two_region_country(args.seed),
        Scale::City => SyntheticSpec::two_region_city(args.seed),
    };
    let corpus = generate(&spec);
    let out = ctx.resolve(&args.out);
    fs::create_dir_all(&out).map_err(output)?;

    let docs_path = out.join("docs.jsonl");
    let mut w = BufWriter::new(File::create(&docs_path).map_err(output)?);
    for d in &corpus.documents {
        let rec = json!({ "text": d.text, "lat": d.point.lat(), "lon": d.point.lon() });
        writeln!(w, "{rec}").map_err(output)?;
    }
    w.flush().map_err(output)?;

    let mut labels = String::from("cell,region,outlier\n");
    for l in &corpus.labels {
        let outlier = u8::from(Some(l.cell) == corpus.outlier_cell);
        labels.push_str(&format!("{},{},{outlier}\n", l.cell, spec.regions[l.region].name));
    }
    fs::write(out.join("labels.csv"), labels).map_err(output)?;
    println!(
        "{} documents over {} cells at level {}",
        corpus.documents.len(),
        corpus.labels.len(),
        spec.level
    );
    Ok(Outcome::Done)
}
