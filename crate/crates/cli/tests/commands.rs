mod common;

use std::fs;
use std::path::Path;

use common::{dense, geolex, lines, ok};
use geolex::analysis::{ComponentModel, SourceTag};
use geolex::corpus::{CellList, FrequencyMatrix, Vocabulary};
use geolex::htm::{locate, GeoPoint, TrixelId};
use geolex::linalg::DenseMatrix;
use geolex::store;
use rand::{Rng, SeedableRng};
use serde_json::Value;

fn words(n: usize) -> Vocabulary {
    Vocabulary::new((0..n).map(|i| format!("w{i:03}")).collect()).unwrap()
}

fn cells(n: usize) -> CellList {
    CellList::new((0..n as u64).map(|k| TrixelId::new(1 << 21 | k).unwrap()).collect()).unwrap()
}

/// Column-stochastic `(P Q)` with `P` words×rank and `Q` rank×cells both
/// column-stochastic, so the product has exactly that rank.
fn stochastic_product(seed: u64, m: usize, n: usize, rank: usize) -> DenseMatrix {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut column_stochastic = |rows: usize, cols: usize| {
        let mut a = DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(0.05..1.0));
        for j in 0..cols {
            let s: f64 = a.column(j).iter().sum();
            for i in 0..rows {
                a[(i, j)] /= s;
            }
        }
        a
    };
    let p = column_stochastic(m, rank);
    let q = column_stochastic(rank, n);
    p.matmul(&q).unwrap()
}

fn write_matrix(dir: &Path, x: DenseMatrix) -> FrequencyMatrix {
    let (m, n) = x.shape();
    let f = FrequencyMatrix::new(words(m), cells(n), x).unwrap();
    store::write_frequency(dir, &f, Some(&vec![100; n])).unwrap();
    f
}

#[test]
fn empty_input_gives_empty_matrix() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("in.jsonl"), "").unwrap();
    let out = ok(&["ingest", "--input", "in.jsonl", "--out", "c"], t.path());
    assert!(out.contains("0 documents"), "{out}");
    assert!(out.contains("0 words x 0 cells"), "{out}");
    let stats: Value = serde_json::from_str(&fs::read_to_string(t.path().join("c/stats.json")).unwrap()).unwrap();
    assert_eq!(stats["tokens"], 0);
    assert_eq!(store::read_counts(&t.path().join("c")).unwrap().shape(), (0, 0));
}

#[test]
fn three_records_match_hand_count() {
    let t = tempfile::tempdir().unwrap();
    let recs = "\
{\"text\": \"Snow snow RAIN\", \"lat\": 40.7, \"lon\": -74.0}\n\
{\"text\": \"snow, sun! 42 a\", \"lat\": 34.05, \"lon\": -118.25, \"id\": 7}\n\
{\"text\": \"rain http://x.co\", \"lat\": 40.71, \"lon\": -74.01}\n\
not json\n";
    fs::write(t.path().join("in.jsonl"), recs).unwrap();
    let out = ok(&["ingest", "--input", "in.jsonl", "--out", "c", "--level", "6"], t.path());
    assert!(out.contains("3 documents"), "{out}");
    assert!(out.contains("1 malformed"), "{out}");
    let ny = locate(GeoPoint::new(40.7, -74.0).unwrap(), 6).unwrap();
    let la = locate(GeoPoint::new(34.05, -118.25).unwrap(), 6).unwrap();
    assert_eq!(ny, locate(GeoPoint::new(40.71, -74.01).unwrap(), 6).unwrap());
    let (first, second) = if ny < la { (ny, la) } else { (la, ny) };
    let c = t.path().join("c");
    // the URL leaves "co" behind: splitting happens before the http rule
    assert_eq!(lines(&c.join("vocab.txt")), ["co", "rain", "snow", "sun"]);
    assert_eq!(lines(&c.join("cells.txt")), [first.to_string(), second.to_string()]);
    let (jny, jla) = if ny < la { (0, 1) } else { (1, 0) };
    let mut want = vec![
        "row,col,count".to_string(),
        format!("0,{jny},1"),
        format!("1,{jny},2"),
        format!("2,{jny},2"),
        format!("2,{jla},1"),
        format!("3,{jla},1"),
    ];
    let mut got = lines(&c.join("counts.csv"));
    want[1..].sort();
    got[1..].sort();
    assert_eq!(got, want);
}

#[test]
fn reruns_are_bit_identical() {
    let t = tempfile::tempdir().unwrap();
    ok(&["synth", "--out", "s", "--seed", "3", "--scale", "city"], t.path());
    for out in ["a", "b"] {
        ok(&["ingest", "--input", "s/docs.jsonl", "--out", &format!("{out}/c"), "--level", "9"], t.path());
        ok(&["matrix", "--counts", &format!("{out}/c"), "--out", &format!("{out}/m")], t.path());
    }
    for f in ["c/vocab.txt", "c/cells.txt", "c/counts.csv", "c/stats.json", "m/matrix.csv", "m/cell_tokens.txt"] {
        assert_eq!(
            fs::read(t.path().join("a").join(f)).unwrap(),
            fs::read(t.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn tsv_input_and_bbox_mask() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("in.tsv"), "40.7\t-74.0\thello world\n10.0\t10.0\tfar away\n").unwrap();
    let out = ok(
        &["ingest", "--input", "in.tsv", "--format", "tsv", "--bbox", "-80,35,-70,45", "--out", "c"],
        t.path(),
    );
    assert!(out.contains("1 outside region"), "{out}");
    assert_eq!(lines(&t.path().join("c/vocab.txt")), ["hello", "world"]);
}

#[test]
fn polygon_mask_from_geojson() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("in.tsv"), "40.7\t-74.0\tinside\n10.0\t10.0\toutside\n").unwrap();
    let poly = r#"{"type": "Feature", "properties": {}, "geometry": {"type": "Polygon",
        "coordinates": [[[-80, 35], [-70, 35], [-70, 45], [-80, 45], [-80, 35]]]}}"#;
    fs::write(t.path().join("p.json"), poly).unwrap();
    ok(&["ingest", "--input", "in.tsv", "--format", "tsv", "--polygon", "p.json", "--out", "c"], t.path());
    assert_eq!(lines(&t.path().join("c/vocab.txt")), ["inside"]);
}

#[test]
fn matrix_filters_and_normalizes() {
    let t = tempfile::tempdir().unwrap();
    ok(&["synth", "--out", "s", "--seed", "4", "--scale", "city"], t.path());
    ok(&["ingest", "--input", "s/docs.jsonl", "--out", "c", "--level", "9"], t.path());
    let counts = store::read_counts(&t.path().join("c")).unwrap();
    let out = ok(&["matrix", "--counts", "c", "--out", "m"], t.path());
    let x = store::read_frequency(&t.path().join("m")).unwrap();
    assert_eq!(x.shape(), counts.shape(), "{out}");
    for j in 0..x.shape().1 {
        let s: f64 = x.matrix().column(j).iter().sum();
        assert!((s - 1.0).abs() <= 1e-9);
    }
    let tokens = store::read_cell_tokens(&t.path().join("m")).unwrap().unwrap();
    assert_eq!(tokens, counts.cell_totals());

    let mut totals = counts.word_totals().to_vec();
    totals.sort_unstable();
    let median = totals[totals.len() / 2];
    let median_arg = median.to_string();
    ok(
        &["matrix", "--counts", "c", "--out", "m2", "--word-min-cells", "4", "--word-min-total", &median_arg],
        t.path(),
    );
    let want: Vec<String> = (0..counts.vocabulary().len())
        .filter(|&i| counts.word_cells()[i] >= 4 && counts.word_totals()[i] >= median)
        .map(|i| counts.vocabulary().get(i).to_string())
        .collect();
    assert!(want.len() < counts.vocabulary().len());
    assert_eq!(lines(&t.path().join("m2/vocab.txt")), want);

    let empty = geolex(&["matrix", "--counts", "c", "--out", "m3", "--preset", "usa"], t.path());
    assert_eq!(empty.status.code(), Some(3));
}

#[test]
fn preset_thresholds_come_from_config_or_flag() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("in.tsv"), "40.7\t-74.0\taa bb aa\n41.7\t-90.0\taa cc\n").unwrap();
    ok(&["ingest", "--input", "in.tsv", "--format", "tsv", "--out", "c"], t.path());
    fs::write(t.path().join("g.toml"), "[filter]\nword_min_cells = 2\n").unwrap();
    ok(&["--config", "g.toml", "matrix", "--counts", "c", "--out", "m"], t.path());
    assert_eq!(lines(&t.path().join("m/vocab.txt")), ["aa"]);
    // flags override the file
    ok(&["--config", "g.toml", "matrix", "--counts", "c", "--out", "m2", "--word-min-cells", "1"], t.path());
    assert_eq!(lines(&t.path().join("m2/vocab.txt")), ["aa", "bb", "cc"]);
    let out = geolex(&["matrix", "--counts", "c", "--out", "m3", "--preset", "usa"], t.path());
    assert_eq!(out.status.code(), Some(3));
    let out = geolex(&["matrix", "--counts", "c", "--out", "m3", "--preset", "paris"], t.path());
    assert_eq!(out.status.code(), Some(2));
    fs::write(t.path().join("bad.toml"), "levle = 3\n").unwrap();
    let out = geolex(&["--config", "bad.toml", "matrix", "--counts", "c", "--out", "m4"], t.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_dir_from_environment() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    fs::create_dir(&data).unwrap();
    fs::write(data.join("in.tsv"), "40.7\t-74.0\tsome words\n").unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_geolex"))
        .args(["ingest", "--input", "in.tsv", "--format", "tsv", "--out", "c"])
        .current_dir(t.path())
        .env("GEOLEX_DATA_DIR", &data)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("c/counts.csv").exists());
}

#[test]
fn pca_on_rank_one_matrix() {
    let t = tempfile::tempdir().unwrap();
    write_matrix(&t.path().join("m"), stochastic_product(1, 30, 12, 1));
    ok(&["decompose", "--matrix", "m", "--out", "d", "--mode", "pca"], t.path());
    let sigma: Vec<f64> = lines(&t.path().join("d/raw/sigma.csv")).iter().map(|s| s.parse().unwrap()).collect();
    assert!(sigma[1..].iter().all(|&s| s <= 1e-9 * sigma[0]));
}

#[test]
fn rpca_recovers_planted_rank() {
    let t = tempfile::tempdir().unwrap();
    let mut x = stochastic_product(2, 80, 60, 3);
    // move mass between two words in a few cells; columns stay stochastic
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    for j in (0..60).step_by(6) {
        let (a, b) = (rng.gen_range(0..40), rng.gen_range(40..80));
        let d = 0.5 * x[(b, j)];
        x[(a, j)] += d;
        x[(b, j)] -= d;
    }
    write_matrix(&t.path().join("m"), x);
    let out = geolex(&["decompose", "--matrix", "m", "--out", "d"], t.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let diag: Value = serde_json::from_str(&fs::read_to_string(t.path().join("d/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["converged"], true);
    assert_eq!(diag["rank_lr"], 3);
    for k in ["iterations", "residual_history", "nnz_sparse", "lambda", "objective"] {
        assert!(!diag[k].is_null(), "{k}");
    }
    let l = dense(&t.path().join("d/low_rank.csv"));
    let s = dense(&t.path().join("d/sparse.csv"));
    assert_eq!(l.shape(), (80, 60));
    assert_eq!(s.shape(), (80, 60));
    store::read_model(&t.path().join("d/low_rank")).unwrap();
    store::read_model(&t.path().join("d/sparse")).unwrap();
}

#[test]
fn iteration_cap_exits_with_status_four() {
    let t = tempfile::tempdir().unwrap();
    write_matrix(&t.path().join("m"), stochastic_product(3, 20, 10, 2));
    let out = geolex(&["decompose", "--matrix", "m", "--out", "d", "--max-iter", "1"], t.path());
    assert_eq!(out.status.code(), Some(4));
    let diag: Value = serde_json::from_str(&fs::read_to_string(t.path().join("d/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["converged"], false);
    assert!(t.path().join("d/sparse/v.csv").exists());
}

#[test]
fn missing_or_bad_inputs_are_input_errors() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(geolex(&["decompose", "--matrix", "nope", "--out", "d"], t.path()).status.code(), Some(2));
    assert_eq!(geolex(&["ingest", "--input", "nope", "--out", "c"], t.path()).status.code(), Some(2));
    write_matrix(&t.path().join("m"), stochastic_product(3, 20, 10, 2));
    let out = geolex(&["decompose", "--matrix", "m", "--out", "d", "--rho", "0.5"], t.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(geolex(&["frobnicate"], t.path()).status.code(), Some(2));
}

fn toy_model(dir: &Path) -> ComponentModel {
    let u = DenseMatrix::from_rows(&[vec![0.9, 0.1], vec![-0.5, 0.2], vec![0.1, -0.9]]).unwrap();
    let v = DenseMatrix::from_rows(&[vec![0.6, 0.8], vec![0.8, -0.6]]).unwrap();
    let vocab = Vocabulary::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
    let cells = CellList::new(vec![
        locate(GeoPoint::new(40.0, -100.0).unwrap(), 5).unwrap(),
        locate(GeoPoint::new(35.0, -85.0).unwrap(), 5).unwrap(),
    ])
    .unwrap();
    let m = ComponentModel::from_parts(vocab, cells, u, vec![2.0, 1.0], v, SourceTag::Raw).unwrap();
    store::write_model(dir, &m).unwrap();
    m
}

fn parse_csv(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn top_words_table() {
    let t = tempfile::tempdir().unwrap();
    toy_model(&t.path().join("model"));
    let out = ok(&["top-words", "--model", "model", "--k", "1"], t.path());
    assert!(out.starts_with("component,sign,rank,word,score\n"));
    let rows = parse_csv(&out);
    assert_eq!(rows.len(), 2 * 2);
    assert_eq!(rows[0], ["0", "positive", "1", "a", "0.90000000000000002"]);
    assert_eq!(rows[1][..4], ["0", "negative", "1", "b"]);
    assert_eq!(rows[3][..4], ["1", "negative", "1", "c"]);

    ok(&["top-words", "--model", "model", "--k", "20", "--components", "1", "--out", "t.csv"], t.path());
    let rows = parse_csv(&fs::read_to_string(t.path().join("t.csv")).unwrap());
    assert_eq!(rows.len(), 3, "saturates at the vocabulary");
    let out = geolex(&["top-words", "--model", "model", "--components", "3"], t.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn top_words_row_count_on_real_model() {
    let t = tempfile::tempdir().unwrap();
    write_matrix(&t.path().join("m"), stochastic_product(5, 60, 30, 30));
    ok(&["decompose", "--matrix", "m", "--out", "d", "--mode", "pca"], t.path());
    let out = ok(&["top-words", "--model", "d/raw", "--k", "4", "--components", "3"], t.path());
    let m = store::read_model(&t.path().join("d/raw")).unwrap();
    let want: usize = (0..3)
        .map(|c| {
            let col = m.u().column(c);
            col.iter().filter(|&&v| v > 0.0).count().min(4) + col.iter().filter(|&&v| v < 0.0).count().min(4)
        })
        .sum();
    let rows = parse_csv(&out);
    assert_eq!(rows.len(), want);
    // components 1 and 2 of a generic matrix are mixed-sign and saturate k
    assert_eq!(rows.iter().filter(|r| r[0] != "0").count(), 4 * 2 * 2);
    for r in &rows {
        let c: usize = r[0].parse().unwrap();
        let i = m.vocabulary().index_of(&r[3]).unwrap();
        assert_eq!(r[4].parse::<f64>().unwrap(), m.u()[(i, c)]);
    }
}

#[test]
fn geojson_matches_model() {
    let t = tempfile::tempdir().unwrap();
    let m = toy_model(&t.path().join("model"));
    let mdir = t.path().join("m");
    fs::create_dir(&mdir).unwrap();
    // token sidecar listed in the opposite cell order
    let ids = m.cells().ids();
    fs::write(mdir.join("cells.txt"), format!("{}\n{}\n", ids[1], ids[0])).unwrap();
    fs::write(mdir.join("cell_tokens.txt"), "20\n10\n").unwrap();
    ok(&["export-geojson", "--model", "model", "--matrix", "m", "--segments", "3", "--out", "map.geojson"], t.path());
    let g: Value = serde_json::from_str(&fs::read_to_string(t.path().join("map.geojson")).unwrap()).unwrap();
    let feats = g["features"].as_array().unwrap();
    assert_eq!(feats.len(), 2);
    for (j, f) in feats.iter().enumerate() {
        let ring = f["geometry"]["coordinates"][0].as_array().unwrap();
        assert_eq!(ring.len(), 3 * 3 + 1);
        assert_eq!(ring.first(), ring.last());
        assert_eq!(f["properties"]["trixel_id"], ids[j].raw());
        for i in 0..2 {
            assert_eq!(f["properties"][format!("score_{i}")].as_f64().unwrap(), m.v()[(j, i)]);
        }
    }
    assert_eq!(feats[0]["properties"]["token_count"], 10);
    assert_eq!(feats[1]["properties"]["token_count"], 20);

    ok(&["export-geojson", "--model", "model", "--components", "1", "--out", "one.geojson"], t.path());
    let g: Value = serde_json::from_str(&fs::read_to_string(t.path().join("one.geojson")).unwrap()).unwrap();
    assert!(g["features"][0]["properties"]["score_1"].is_null());
    assert!(g["features"][0]["properties"]["token_count"].is_null());
}

#[test]
fn self_projection_through_files() {
    let t = tempfile::tempdir().unwrap();
    write_matrix(&t.path().join("m"), stochastic_product(6, 40, 25, 25));
    ok(&["decompose", "--matrix", "m", "--out", "d", "--mode", "pca"], t.path());
    let out = ok(&["project", "--model", "d/raw", "--matrix", "m", "--out", "p"], t.path());
    assert!(out.contains("0 missing"), "{out}");
    let m = store::read_model(&t.path().join("d/raw")).unwrap();
    let scores = dense(&t.path().join("p/scores.csv"));
    assert!(scores.max_abs_diff(&m.sigma_vt()) <= 1e-9);
    let a: Value = serde_json::from_str(&fs::read_to_string(t.path().join("p/alignment.json")).unwrap()).unwrap();
    assert_eq!(a["missing_from_new"].as_array().unwrap().len(), 0);
    assert_eq!(a["matched"], 40);
}

#[test]
fn city_projection_dimensions() {
    let t = tempfile::tempdir().unwrap();
    write_matrix(&t.path().join("m"), stochastic_product(7, 40, 25, 5));
    ok(&["decompose", "--matrix", "m", "--out", "d", "--mode", "pca"], t.path());
    ok(&["synth", "--out", "s", "--scale", "city"], t.path());
    ok(&["ingest", "--input", "s/docs.jsonl", "--out", "c", "--level", "9"], t.path());
    // no shared words with the toy vocabulary
    let out = geolex(&["project", "--model", "d/raw", "--matrix", "c", "--use-counts", "--out", "p"], t.path());
    assert_eq!(out.status.code(), Some(2));

    ok(&["synth", "--out", "s2", "--scale", "country", "--seed", "2"], t.path());
    ok(&["ingest", "--input", "s2/docs.jsonl", "--out", "c2", "--level", "6"], t.path());
    ok(&["matrix", "--counts", "c2", "--out", "m2"], t.path());
    ok(&["decompose", "--matrix", "m2", "--out", "d2", "--mode", "pca"], t.path());
    ok(&["matrix", "--counts", "c", "--out", "mc"], t.path());
    ok(&["project", "--model", "d2/raw", "--matrix", "mc", "--components", "5", "--out", "p2"], t.path());
    let scores = dense(&t.path().join("p2/scores.csv"));
    let city_cells = lines(&t.path().join("mc/cells.txt")).len();
    assert_eq!(scores.shape(), (5, city_cells));
    assert!(scores.as_slice().iter().all(|v| v.is_finite()));
    ok(&["project", "--model", "d2/raw", "--matrix", "c", "--use-counts", "--out", "p3"], t.path());
    assert_eq!(lines(&t.path().join("p3/cells.txt")).len(), city_cells);
}
