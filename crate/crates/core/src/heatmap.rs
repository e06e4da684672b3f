//! Map-ready heat-map document and a small raster preview.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Region;
use crate::error::{Error, Result};
use crate::representativeness::{
    parse_hex, ColorScale, Method, RepresentativenessReport, SampleSet, ScoreMode, FILTERED_COLOR,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub bucket: usize,
    pub nfd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub bucket: usize,
    pub color: String,
    pub lo: f64,
    pub hi: f64,
}

/// Everything a map front end needs: colored cells, sample markers, the
/// legend and the regions removed by filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMapDocument {
    pub mode: ScoreMode,
    pub method: Method,
    #[serde(rename = "R")]
    pub r: f64,
    pub cells: Vec<HeatCell>,
    pub markers: Vec<Marker>,
    pub legend: Vec<LegendEntry>,
    pub filtered_color: String,
    pub filtered_regions: Vec<Marker>,
}

impl HeatMapDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn legend(scale: &ColorScale) -> Vec<LegendEntry> {
    (0..scale.buckets)
        .map(|b| {
            let (lo, hi) = scale.bucket_range(b);
            LegendEntry {
                bucket: b,
                color: scale.palette[b].clone(),
                lo,
                hi,
            }
        })
        .collect()
}

pub fn build_document(
    report: &RepresentativenessReport,
    samples: &SampleSet,
    excluded: &[Region],
    scale: &ColorScale,
) -> HeatMapDocument {
    let marker = |id: &str, lat: f64, lon: f64| Marker {
        id: id.to_string(),
        lat,
        lon,
    };
    HeatMapDocument {
        mode: report.mode,
        method: report.method,
        r: report.r,
        cells: report
            .cells
            .iter()
            .map(|c| HeatCell {
                id: c.id.clone(),
                lat: c.lat,
                lon: c.lon,
                bucket: c.bucket,
                nfd: c.nfd,
            })
            .collect(),
        markers: samples
            .resolved
            .iter()
            .map(|s| marker(&s.id, s.lat, s.lon))
            .collect(),
        legend: legend(scale),
        filtered_color: FILTERED_COLOR.to_string(),
        filtered_regions: excluded
            .iter()
            .map(|r| marker(&r.id, r.lat, r.lon))
            .collect(),
    }
}

// (lat, lon, rgb) with lower index winning distance ties
struct Point {
    lat: f64,
    lon: f64,
    rgb: [u8; 3],
}

/// Uniform lat/lon grid over the points for nearest-neighbour lookup.
struct GridIndex {
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl GridIndex {
    fn new(points: &[Point]) -> Self {
        let cell = (180.0 * 360.0 / points.len().max(1) as f64).sqrt().clamp(0.05, 90.0);
        let cols = (360.0 / cell).ceil() as usize;
        let rows = (180.0 / cell).ceil() as usize;
        let mut buckets = vec![Vec::new(); cols * rows];
        let mut idx = GridIndex {
            cell,
            cols,
            rows,
            buckets: Vec::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let (r, c) = idx.cell_of(p.lat, p.lon);
            buckets[r * cols + c].push(i);
        }
        idx.buckets = buckets;
        idx
    }

    fn cell_of(&self, lat: f64, lon: f64) -> (usize, usize) {
        let r = (((90.0 - lat) / self.cell).floor().max(0.0) as usize).min(self.rows - 1);
        let c = (((lon + 180.0) / self.cell).floor().max(0.0) as usize).min(self.cols - 1);
        (r, c)
    }

    fn nearest(&self, points: &[Point], lat: f64, lon: f64) -> Option<usize> {
        let (r0, c0) = self.cell_of(lat, lon);
        let mut best: Option<(f64, usize)> = None;
        let reach = self.rows.max(self.cols);
        for k in 0..=reach {
            // every point in ring k is at least (k - 1) cells away
            if let Some((d, _)) = best {
                let gap = (k as f64 - 1.0).max(0.0) * self.cell;
                if gap * gap > d {
                    break;
                }
            }
            let (rlo, rhi) = (r0.saturating_sub(k), (r0 + k).min(self.rows - 1));
            let (clo, chi) = (c0.saturating_sub(k), (c0 + k).min(self.cols - 1));
            for r in rlo..=rhi {
                for c in clo..=chi {
                    let on_ring = r + k == r0 || r == r0 + k || c + k == c0 || c == c0 + k;
                    if !on_ring {
                        continue;
                    }
                    for &i in &self.buckets[r * self.cols + c] {
                        let (dy, dx) = (points[i].lat - lat, points[i].lon - lon);
                        let d = dy * dy + dx * dx;
                        if best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                            best = Some((d, i));
                        }
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Renders an equirectangular binary PPM (P6). Each pixel takes the color
/// of the nearest region (filtered regions in the reserved color); sample
/// sites are drawn as 3x3 black squares.
pub fn render_raster(doc: &HeatMapDocument, width: usize, height: usize) -> Result<Vec<u8>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidConfig("raster needs a positive size".into()));
    }
    let color = |hex: &str| {
        parse_hex(hex).ok_or_else(|| Error::InvalidConfig(format!("bad color `{hex}`")))
    };
    let palette = doc
        .legend
        .iter()
        .map(|l| color(&l.color))
        .collect::<Result<Vec<_>>>()?;
    let filtered = color(&doc.filtered_color)?;
    let mut points: Vec<Point> = Vec::with_capacity(doc.cells.len() + doc.filtered_regions.len());
    for c in &doc.cells {
        let rgb = *palette
            .get(c.bucket)
            .ok_or_else(|| Error::InvalidConfig(format!("bucket {} has no color", c.bucket)))?;
        points.push(Point {
            lat: c.lat,
            lon: c.lon,
            rgb,
        });
    }
    points.extend(doc.filtered_regions.iter().map(|m| Point {
        lat: m.lat,
        lon: m.lon,
        rgb: filtered,
    }));

    let background = [255u8; 3];
    let mut pixels = vec![0u8; width * height * 3];
    if !points.is_empty() {
        let index = GridIndex::new(&points);
        pixels
            .par_chunks_mut(width * 3)
            .enumerate()
            .for_each(|(y, line)| {
                let lat = 90.0 - (y as f64 + 0.5) * 180.0 / height as f64;
                for x in 0..width {
                    let lon = -180.0 + (x as f64 + 0.5) * 360.0 / width as f64;
                    let rgb = index
                        .nearest(&points, lat, lon)
                        .map_or(background, |i| points[i].rgb);
                    line[x * 3..x * 3 + 3].copy_from_slice(&rgb);
                }
            });
    } else {
        pixels.fill(255);
    }
    for m in &doc.markers {
        let px = ((m.lon + 180.0) / 360.0 * width as f64).floor() as i64;
        let py = ((90.0 - m.lat) / 180.0 * height as f64).floor() as i64;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (x, y) = (px + dx, py + dy);
                if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
                    let o = (y as usize * width + x as usize) * 3;
                    pixels[o..o + 3].fill(0);
                }
            }
        }
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}
