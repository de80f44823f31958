//! GeoJSON choropleth layers: one polygon feature per trixel.

use serde_json::{json, Map, Value};

use crate::analysis::{AnalysisError, ComponentModel};
use crate::htm::{trixel_polygon, HtmError, TrixelId};

#[derive(Debug, thiserror::Error)]
pub enum GeoJsonError {
    #[error(transparent)]
    Htm(#[from] HtmError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{what} has {got} entries for {cells} cells")]
    Length { what: &'static str, got: usize, cells: usize },
}

/// `[lon, lat]` ring with longitudes unwrapped so consecutive points never
/// jump across the antimeridian.
fn ring_coordinates(id: TrixelId, segments_per_edge: u32) -> Result<Vec<Value>, HtmError> {
    let ring = trixel_polygon(id, segments_per_edge)?;
    let mut prev: Option<f64> = None;
    Ok(ring
        .iter()
        .map(|p| {
            let mut lon = p.lon();
            if let Some(q) = prev {
                while lon - q > 180.0 {
                    lon -= 360.0;
                }
                while q - lon > 180.0 {
                    lon += 360.0;
                }
            }
            prev = Some(lon);
            json!([lon, p.lat()])
        })
        .collect())
}

/// Builds a feature collection. `scores[j]` holds the exported component
/// values of cell `j`, written as `score_0`, `score_1`, ...
pub fn cell_layer(
    cells: &[TrixelId],
    token_counts: Option<&[u64]>,
    scores: &[Vec<f64>],
    segments_per_edge: u32,
) -> Result<Value, GeoJsonError> {
    if scores.len() != cells.len() {
        return Err(GeoJsonError::Length {
            what: "scores",
            got: scores.len(),
            cells: cells.len(),
        });
    }
    if let Some(t) = token_counts {
        if t.len() != cells.len() {
            return Err(GeoJsonError::Length {
                what: "token counts",
                got: t.len(),
                cells: cells.len(),
            });
        }
    }
    let mut features = Vec::with_capacity(cells.len());
    for (j, &id) in cells.iter().enumerate() {
        let mut props = Map::new();
        props.insert("trixel_id".into(), json!(id.raw()));
        props.insert("token_count".into(), token_counts.map_or(Value::Null, |t| json!(t[j])));
        for (i, s) in scores[j].iter().enumerate() {
            props.insert(format!("score_{i}"), json!(s));
        }
        features.push(json!({
            "type": "Feature",
            "geometry": {
                "type": "Polygon",
                "coordinates": [ring_coordinates(id, segments_per_edge)?],
            },
            "properties": props,
        }));
    }
    Ok(json!({ "type": "FeatureCollection", "features": features }))
}

/// Layer of the first `components` cell-score columns of a model.
pub fn model_layer(
    m: &ComponentModel,
    token_counts: Option<&[u64]>,
    components: usize,
    segments_per_edge: u32,
) -> Result<Value, GeoJsonError> {
    if components > m.components() {
        return Err(AnalysisError::ComponentOutOfRange {
            component: components.saturating_sub(1),
            available: m.components(),
        }
        .into());
    }
    let scores: Vec<Vec<f64>> = (0..m.cells().len())
        .map(|j| (0..components).map(|c| m.v()[(j, c)]).collect())
        .collect();
    cell_layer(m.cells().ids(), token_counts, &scores, segments_per_edge)
}
