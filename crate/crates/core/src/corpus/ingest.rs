use std::collections::HashMap;
use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{tokenize, CellList, CorpusError, CountMatrix, Document, Vocabulary};
use crate::htm::{self, GeoPoint, HtmError, TrixelId, MAX_LOCATE_LEVEL};

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    /// One JSON object per line: `{"text": .., "lat": .., "lon": .., "id": ..}`.
    #[default]
    Jsonl,
    /// `lat<TAB>lon<TAB>text`.
    Tsv,
}

#[derive(Deserialize)]
struct JsonRecord {
    text: String,
    lat: f64,
    lon: f64,
    #[serde(default)]
    id: Option<Value>,
}

fn parse_line(line: &str, format: RecordFormat) -> Result<Document, String> {
    match format {
        RecordFormat::Jsonl => {
            let rec: JsonRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
            let id = match rec.id {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => Some(s),
                Some(Value::Number(n)) => Some(n.to_string()),
                Some(other) => return Err(format!("unsupported id {other}")),
            };
            let point = GeoPoint::new(rec.lat, rec.lon).map_err(|e| e.to_string())?;
            Ok(Document { text: rec.text, point, id })
        }
        RecordFormat::Tsv => {
            let mut parts = line.splitn(3, '\t');
            let mut coord = |name: &str| -> Result<f64, String> {
                let field = parts.next().ok_or_else(|| format!("missing {name}"))?;
                field.trim().parse().map_err(|_| format!("bad {name} {field:?}"))
            };
            let lat = coord("lat")?;
            let lon = coord("lon")?;
            let text = parts.next().ok_or("missing text")?.to_string();
            let point = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
            Ok(Document::new(text, point))
        }
    }
}

/// Parses a record stream line by line. Blank lines are skipped; bad lines
/// come back as [`RecordError::Malformed`] so the caller can count them.
pub fn read_records<R: BufRead>(
    reader: R,
    format: RecordFormat,
) -> impl Iterator<Item = Result<Document, RecordError>> {
    reader.lines().enumerate().filter_map(move |(idx, line)| match line {
        Err(e) => Some(Err(RecordError::Io(e))),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(parse_line(l.trim_end_matches('\r'), format).map_err(|reason| {
            RecordError::Malformed {
                line: idx + 1,
                reason,
            }
        })),
    })
}

/// Geographic pre-filter on documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionMask {
    BoundingBox {
        min_lon: f64,
        min_lat: f64,
        max_lon: f64,
        max_lat: f64,
    },
    /// A simple polygon given as `[lon, lat]` vertices; closing is implicit.
    Polygon(Vec<[f64; 2]>),
}

impl RegionMask {
    pub fn contains(&self, p: &GeoPoint) -> bool {
        let (x, y) = (p.lon(), p.lat());
        match self {
            RegionMask::BoundingBox {
                min_lon,
                min_lat,
                max_lon,
                max_lat,
            } => (*min_lon..=*max_lon).contains(&x) && (*min_lat..=*max_lat).contains(&y),
            RegionMask::Polygon(ring) => {
                let mut inside = false;
                let n = ring.len();
                for k in 0..n {
                    let [xi, yi] = ring[k];
                    let [xj, yj] = ring[(k + n - 1) % n];
                    if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                }
                inside
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestStats {
    /// Documents binned into a cell, including ones with no tokens.
    pub documents: u64,
    pub empty_documents: u64,
    pub malformed: u64,
    pub outside_region: u64,
    pub tokens: u64,
}

impl IngestStats {
    fn absorb(&mut self, o: &IngestStats) {
        self.documents += o.documents;
        self.empty_documents += o.empty_documents;
        self.malformed += o.malformed;
        self.outside_region += o.outside_region;
        self.tokens += o.tokens;
    }
}

/// Mutable word×cell tally. Independent accumulators over disjoint shards of
/// a corpus can be merged in any order with the same result.
#[derive(Debug, Clone)]
pub struct CountAccumulator {
    level: u32,
    mask: Option<RegionMask>,
    word_ids: HashMap<String, usize>,
    words: Vec<String>,
    counts: HashMap<(usize, TrixelId), u64>,
    stats: IngestStats,
}

impl CountAccumulator {
    /// # Panics
    /// If `level` exceeds [`MAX_LOCATE_LEVEL`]; use [`CountAccumulator::try_new`]
    /// for untrusted input.
    pub fn new(level: u32) -> Self {
        Self::try_new(level).expect("valid mesh level")
    }

    pub fn try_new(level: u32) -> Result<Self, HtmError> {
        if level > MAX_LOCATE_LEVEL {
            return Err(HtmError::InvalidLevel {
                level,
                max: MAX_LOCATE_LEVEL,
            });
        }
        Ok(CountAccumulator {
            level,
            mask: None,
            word_ids: HashMap::new(),
            words: Vec::new(),
            counts: HashMap::new(),
            stats: IngestStats::default(),
        })
    }

    pub fn with_mask(mut self, mask: Option<RegionMask>) -> Self {
        self.mask = mask;
        self
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    fn word_id(&mut self, w: String) -> usize {
        if let Some(&i) = self.word_ids.get(&w) {
            return i;
        }
        let i = self.words.len();
        self.words.push(w.clone());
        self.word_ids.insert(w, i);
        i
    }

    /// Counts every token of `doc` in the cell containing its point.
    pub fn add_document(&mut self, doc: &Document) {
        if self.mask.as_ref().is_some_and(|m| !m.contains(&doc.point)) {
            self.stats.outside_region += 1;
            return;
        }
        let cell = htm::locate(doc.point, self.level).expect("level checked at construction");
        let tokens = tokenize(&doc.text);
        self.stats.documents += 1;
        if tokens.is_empty() {
            self.stats.empty_documents += 1;
        }
        self.stats.tokens += tokens.len() as u64;
        for t in tokens {
            let w = self.word_id(t);
            *self.counts.entry((w, cell)).or_insert(0) += 1;
        }
    }

    /// Adds a parsed record, counting malformed ones. I/O errors are fatal.
    pub fn add_record(&mut self, rec: Result<Document, RecordError>) -> Result<(), io::Error> {
        match rec {
            Ok(doc) => self.add_document(&doc),
            Err(RecordError::Malformed { .. }) => self.stats.malformed += 1,
            Err(RecordError::Io(e)) => return Err(e),
        }
        Ok(())
    }

    /// Adds an existing count matrix entrywise.
    pub fn add_counts(&mut self, w: &CountMatrix) {
        for (i, j, c) in w.triples() {
            let wid = self.word_id(w.vocabulary().get(i).to_string());
            *self.counts.entry((wid, w.cells().get(j))).or_insert(0) += c;
        }
    }

    pub fn merge(&mut self, other: CountAccumulator) {
        for ((w, cell), c) in other.counts {
            let wid = self.word_id(other.words[w].clone());
            *self.counts.entry((wid, cell)).or_insert(0) += c;
        }
        self.stats.absorb(&other.stats);
    }

    /// Canonical count matrix: words sorted lexicographically, cells by id.
    pub fn finish(self) -> CountMatrix {
        self.finish_with_stats().0
    }

    pub fn finish_with_stats(self) -> (CountMatrix, IngestStats) {
        let mut order: Vec<usize> = (0..self.words.len()).collect();
        order.sort_by(|&a, &b| self.words[a].cmp(&self.words[b]));
        let mut row_of = vec![0; self.words.len()];
        for (row, &w) in order.iter().enumerate() {
            row_of[w] = row;
        }
        let mut cells: Vec<TrixelId> = self.counts.keys().map(|&(_, c)| c).collect();
        cells.sort_unstable();
        cells.dedup();
        let cell_list = CellList::new(cells).expect("deduplicated");
        let vocab = Vocabulary::new(order.iter().map(|&w| self.words[w].clone()).collect())
            .expect("interned words are distinct");
        let triples: Vec<(usize, usize, u64)> = self
            .counts
            .iter()
            .map(|(&(w, cell), &c)| (row_of[w], cell_list.index_of(cell).expect("collected cell"), c))
            .collect();
        let w = CountMatrix::from_triples(vocab, cell_list, triples).expect("indices in range");
        (w, self.stats)
    }
}

/// Bins every document at `level` and tallies its tokens.
pub fn ingest(docs: impl IntoIterator<Item = Document>, level: u32) -> Result<CountMatrix, CorpusError> {
    let mut acc = CountAccumulator::try_new(level)?;
    for d in docs {
        acc.add_document(&d);
    }
    Ok(acc.finish())
}
