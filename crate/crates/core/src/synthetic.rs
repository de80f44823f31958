//! Seeded synthetic corpora with known regional structure.
//!
//! Every cell draws its tokens from a mixture of a Zipf-shaped shared
//! vocabulary and the exclusive vocabulary of the region it lies in. One
//! optional outlier cell additionally gets most of its tokens from a small
//! "weather bot" vocabulary found nowhere else.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::htm::{all_trixels, Trixel, TrixelId, UnitVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBox {
    /// Also the prefix of the region's exclusive words.
    pub name: String,
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl RegionBox {
    pub fn new(name: &str, min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Self {
        RegionBox {
            name: name.to_string(),
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        }
    }

    fn contains(&self, lon: f64, lat: f64) -> bool {
        (self.min_lon..=self.max_lon).contains(&lon) && (self.min_lat..=self.max_lat).contains(&lat)
    }

    fn center(&self) -> (f64, f64) {
        ((self.min_lon + self.max_lon) / 2.0, (self.min_lat + self.max_lat) / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierSpec {
    /// Region whose most central cell becomes the outlier.
    pub region: usize,
    /// Fraction of that cell's tokens drawn from the bot vocabulary.
    pub bot_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub level: u32,
    pub regions: Vec<RegionBox>,
    pub shared_words: usize,
    pub region_words: usize,
    pub bot_words: usize,
    pub docs_per_cell: usize,
    pub tokens_per_doc: usize,
    /// Per-cell share of region-specific tokens is drawn uniformly from this range.
    pub region_share: (f64, f64),
    pub outlier: Option<OutlierSpec>,
}

impl SyntheticSpec {
    /// Country-scale corpus: a western and an eastern region at level 6 with
    /// disjoint 50-word vocabularies over a 500-word shared base, and one
    /// bot-dominated cell in the west.
    pub fn two_region_country(seed: u64) -> Self {
        SyntheticSpec {
            seed,
            level: 6,
            regions: vec![
                RegionBox::new("west", -116.0, 34.0, -102.0, 44.0),
                RegionBox::new("east", -94.0, 34.0, -80.0, 44.0),
            ],
            shared_words: 500,
            region_words: 50,
            bot_words: 20,
            docs_per_cell: 400,
            tokens_per_doc: 12,
            region_share: (0.15, 0.25),
            outlier: Some(OutlierSpec {
                region: 0,
                bot_share: 0.7,
            }),
        }
    }

    /// City-scale companion of [`SyntheticSpec::two_region_country`]: small
    /// boxes inside each region at level 9, same vocabularies, no outlier.
    pub fn two_region_city(seed: u64) -> Self {
        SyntheticSpec {
            level: 9,
            regions: vec![
                RegionBox::new("west", -105.0, 38.0, -103.5, 39.5),
                RegionBox::new("east", -93.0, 38.0, -91.5, 39.5),
            ],
            docs_per_cell: 150,
            outlier: None,
            ..Self::two_region_country(seed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellLabel {
    pub cell: TrixelId,
    pub region: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    /// Every generated cell and the region it belongs to, by cell id.
    pub labels: Vec<CellLabel>,
    pub outlier_cell: Option<TrixelId>,
}

pub fn shared_word(i: usize) -> String {
    format!("common{i:03}")
}

pub fn region_word(region: &str, i: usize) -> String {
    format!("{region}{i:02}")
}

pub fn bot_word(i: usize) -> String {
    format!("forecast{i:02}")
}

/// Random point strictly inside `t`, kept away from its edges.
fn interior_point(t: &Trixel, rng: &mut impl Rng) -> UnitVector {
    let e: [f64; 3] = [rng.sample(Exp1), rng.sample(Exp1), rng.sample(Exp1)];
    let total: f64 = e.iter().sum();
    let w = e.map(|x| 0.8 * x / total + 0.2 / 3.0);
    let [a, b, c] = t.vertices;
    UnitVector::new(
        w[0] * a.x + w[1] * b.x + w[2] * c.x,
        w[0] * a.y + w[1] * b.y + w[2] * c.y,
        w[0] * a.z + w[1] * b.z + w[2] * c.z,
    )
    .expect("convex combination of trixel vertices")
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // vocabulary blocks: shared, then each region, then bot words
    let mut words: Vec<String> = (0..spec.shared_words).map(shared_word).collect();
    let region_start = words.len();
    for r in &spec.regions {
        words.extend((0..spec.region_words).map(|i| region_word(&r.name, i)));
    }
    let bot_start = words.len();
    words.extend((0..spec.bot_words).map(bot_word));

    let shared: Vec<f64> = (0..spec.shared_words).map(|i| 1.0 / (i as f64 + 2.0).powf(0.8)).collect();
    let shared_sum: f64 = shared.iter().sum();

    let mut cells: Vec<(Trixel, usize)> = all_trixels(spec.level)
        .into_iter()
        .filter_map(|t| {
            let c = t.center().to_geo();
            spec.regions
                .iter()
                .position(|r| r.contains(c.lon(), c.lat()))
                .map(|k| (t, k))
        })
        .collect();
    cells.sort_by_key(|(t, _)| t.id);

    let outlier_cell = spec.outlier.and_then(|o| {
        let (clon, clat) = spec.regions.get(o.region)?.center();
        cells
            .iter()
            .filter(|(_, k)| *k == o.region)
            .min_by(|(a, _), (b, _)| {
                let d = |t: &Trixel| {
                    let g = t.center().to_geo();
                    (g.lon() - clon).powi(2) + (g.lat() - clat).powi(2)
                };
                d(a).total_cmp(&d(b))
            })
            .map(|(t, _)| t.id)
    });

    let mut documents = Vec::new();
    let mut labels = Vec::with_capacity(cells.len());
    for (t, region) in &cells {
        let bot_share = match spec.outlier {
            Some(o) if Some(t.id) == outlier_cell => o.bot_share,
            _ => 0.0,
        };
        let region_share = rng.gen_range(spec.region_share.0..=spec.region_share.1) * (1.0 - bot_share);
        let base_share = 1.0 - region_share - bot_share;
        let mut weights = vec![0.0; words.len()];
        for (w, s) in weights.iter_mut().zip(&shared) {
            *w = base_share * s / shared_sum;
        }
        let own = region_start + region * spec.region_words;
        for w in &mut weights[own..own + spec.region_words] {
            *w = region_share / spec.region_words as f64;
        }
        if bot_share > 0.0 {
            for w in &mut weights[bot_start..] {
                *w = bot_share / spec.bot_words as f64;
            }
        }
        let dist = WeightedIndex::new(&weights).expect("positive weights");
        for _ in 0..spec.docs_per_cell {
            let text = (0..spec.tokens_per_doc)
                .map(|_| words[dist.sample(&mut rng)].as_str())
                .collect::<Vec<_>>()
                .join(" ");
            documents.push(Document::new(text, interior_point(t, &mut rng).to_geo()));
        }
        labels.push(CellLabel {
            cell: t.id,
            region: *region,
        });
    }
    SyntheticCorpus {
        documents,
        labels,
        outlier_cell,
    }
}
