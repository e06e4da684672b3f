//! Region/variable tables: CSV ingest, range filters and min-max normalization.
//!
//! A [`Dataset`] is immutable once built. Every transformation returns a new
//! dataset, so a snapshot can be shared freely between concurrent readers.
//!
//! The CSV layout is `region_id,lat,lon,<var1>,<var2>,...` with a comma
//! separator, `.` decimal point, LF line endings (a trailing CR is accepted)
//! and no quoting. Missing values are rejected.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ID_COLUMN: &str = "region_id";
const LAT_COLUMN: &str = "lat";
const LON_COLUMN: &str = "lon";

/// One geographic cell of the world grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

impl Region {
    pub fn new(id: impl Into<String>, lat: f64, lon: f64) -> Self {
        Region {
            id: id.into(),
            lat,
            lon,
        }
    }
}

/// Checks latitude in `[-90, 90]` and longitude in `[-180, 180)`.
pub fn check_coordinates(lat: f64, lon: f64) -> std::result::Result<(), &'static str> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err(LAT_COLUMN);
    }
    if !(-180.0..180.0).contains(&lon) {
        return Err(LON_COLUMN);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    #[default]
    Continuous,
    /// Integer class codes. These are treated as plain numbers downstream.
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(default)]
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_range: Option<(f64, f64)>,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VariableKind::Continuous,
            declared_range: None,
        }
    }
}

/// Min/max of a column captured when the dataset was normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
    /// Set when `min == max`; the column was mapped to all zeros.
    pub degenerate: bool,
}

impl ColumnRange {
    #[inline]
    pub fn normalize(&self, x: f64) -> f64 {
        if self.degenerate {
            0.0
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    #[inline]
    pub fn denormalize(&self, y: f64) -> f64 {
        if self.degenerate {
            self.min
        } else {
            y * (self.max - self.min) + self.min
        }
    }
}

/// Inclusive range predicate on one variable, in native units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterPredicate {
    pub variable: String,
    pub lo: f64,
    pub hi: f64,
}

impl FilterPredicate {
    pub fn new(variable: impl Into<String>, lo: f64, hi: f64) -> Self {
        FilterPredicate {
            variable: variable.into(),
            lo,
            hi,
        }
    }

    #[inline]
    pub fn accepts(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

impl FromStr for FilterPredicate {
    type Err = Error;

    /// Parses `var:lo..hi`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("filter `{s}` is not of the form var:lo..hi"));
        let (name, range) = s.rsplit_once(':').ok_or_else(bad)?;
        let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let name = name.trim();
        if name.is_empty() {
            return Err(bad());
        }
        Ok(FilterPredicate::new(name, lo, hi))
    }
}

/// Immutable region × variable matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    regions: Vec<Region>,
    variables: Vec<VariableSpec>,
    /// Row-major, `regions.len() * variables.len()`.
    values: Vec<f64>,
    normalization: Option<Vec<ColumnRange>>,
    index: HashMap<String, usize>,
}

impl Dataset {
    /// Builds a dataset in native units, validating every invariant.
    pub fn new(regions: Vec<Region>, variables: Vec<VariableSpec>, values: Vec<f64>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Malformed("dataset needs at least one variable".into()));
        }
        if regions.is_empty() {
            return Err(Error::Malformed("dataset needs at least one region".into()));
        }
        if values.len() != regions.len() * variables.len() {
            return Err(Error::DimensionMismatch {
                expected: regions.len() * variables.len(),
                actual: values.len(),
            });
        }
        let mut names = HashMap::new();
        for v in &variables {
            if names.insert(v.name.as_str(), ()).is_some() {
                return Err(Error::Malformed(format!("duplicate variable `{}`", v.name)));
            }
            if let Some((lo, hi)) = v.declared_range {
                if !(lo < hi) {
                    return Err(Error::Malformed(format!(
                        "declared range of `{}` must satisfy min < max",
                        v.name
                    )));
                }
            }
        }
        let ncols = variables.len();
        let mut index = HashMap::with_capacity(regions.len());
        for (i, r) in regions.iter().enumerate() {
            if let Err(column) = check_coordinates(r.lat, r.lon) {
                return Err(Error::Ingest {
                    row: i + 1,
                    column: column.into(),
                    message: "coordinate out of range".into(),
                });
            }
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::Ingest {
                    row: i + 1,
                    column: ID_COLUMN.into(),
                    message: format!("duplicate id `{}`", r.id),
                });
            }
            for (j, x) in values[i * ncols..(i + 1) * ncols].iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::Ingest {
                        row: i + 1,
                        column: variables[j].name.clone(),
                        message: "value must be finite".into(),
                    });
                }
            }
        }
        Ok(Dataset {
            regions,
            variables,
            values,
            normalization: None,
            index,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.regions.len()
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, row: usize) -> &Region {
        &self.regions[row]
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_vars();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_vars() + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.n_vars()).copied()
    }

    pub fn normalization(&self) -> Option<&[ColumnRange]> {
        self.normalization.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization.is_some()
    }

    /// Indices of columns flagged constant during normalization.
    pub fn degenerate_columns(&self) -> Vec<usize> {
        self.normalization
            .iter()
            .flatten()
            .enumerate()
            .filter(|(_, r)| r.degenerate)
            .map(|(j, _)| j)
            .collect()
    }

    /// New dataset holding `rows` (in the given order).
    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        let n = self.n_vars();
        let mut values = Vec::with_capacity(rows.len() * n);
        let mut regions = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        for (k, &i) in rows.iter().enumerate() {
            values.extend_from_slice(self.row(i));
            regions.push(self.regions[i].clone());
            index.insert(self.regions[i].id.clone(), k);
        }
        Dataset {
            regions,
            variables: self.variables.clone(),
            values,
            normalization: self.normalization.clone(),
            index,
        }
    }

    /// Keeps only the named columns, in the order given.
    pub fn select_variables(&self, names: &[String]) -> Result<Dataset> {
        if names.is_empty() {
            return Ok(self.clone());
        }
        let cols = names
            .iter()
            .map(|name| {
                self.variable_index(name)
                    .ok_or_else(|| Error::UnknownVariable(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut seen = std::collections::HashSet::new();
        for name in names {
            if !seen.insert(name) {
                return Err(Error::InvalidConfig(format!("variable `{name}` selected twice")));
            }
        }
        let mut values = Vec::with_capacity(self.n_rows() * cols.len());
        for i in 0..self.n_rows() {
            let row = self.row(i);
            values.extend(cols.iter().map(|&j| row[j]));
        }
        Ok(Dataset {
            regions: self.regions.clone(),
            variables: cols.iter().map(|&j| self.variables[j].clone()).collect(),
            values,
            normalization: self
                .normalization
                .as_ref()
                .map(|n| cols.iter().map(|&j| n[j]).collect()),
            index: self.index.clone(),
        })
    }

    /// Row indices that satisfy every predicate.
    pub fn filter_rows(&self, preds: &[FilterPredicate]) -> Result<Vec<usize>> {
        if self.is_normalized() {
            return Err(Error::InvalidConfig(
                "filters apply to native units and must run before normalization".into(),
            ));
        }
        let resolved = preds
            .iter()
            .map(|p| {
                if !(p.lo <= p.hi) {
                    return Err(Error::InvalidFilter {
                        variable: p.variable.clone(),
                        lo: p.lo,
                        hi: p.hi,
                    });
                }
                self.variable_index(&p.variable)
                    .map(|j| (j, p))
                    .ok_or_else(|| Error::UnknownVariable(p.variable.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.n_rows())
            .filter(|&i| {
                let row = self.row(i);
                resolved.iter().all(|(j, p)| p.accepts(row[*j]))
            })
            .collect())
    }

    /// Conjunction of inclusive range predicates. Fails if nothing survives.
    pub fn apply_filter(&self, preds: &[FilterPredicate]) -> Result<Dataset> {
        let rows = self.filter_rows(preds)?;
        if rows.is_empty() {
            return Err(Error::EmptyAfterFilter);
        }
        Ok(self.take_rows(&rows))
    }

    /// Min-max maps each column into `[0, 1]`. Constant columns become zero
    /// and are flagged in the recorded [`ColumnRange`].
    pub fn normalize_columns(&self) -> Result<Dataset> {
        if self.is_normalized() {
            return Err(Error::InvalidConfig("dataset is already normalized".into()));
        }
        let n = self.n_vars();
        let ranges: Vec<ColumnRange> = (0..n)
            .map(|j| {
                let (min, max) = self
                    .column(j)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
                ColumnRange {
                    min,
                    max,
                    degenerate: min == max,
                }
            })
            .collect();
        let values = self
            .values
            .chunks_exact(n)
            .flat_map(|row| row.iter().zip(&ranges).map(|(&x, r)| r.normalize(x).clamp(0.0, 1.0)))
            .collect();
        Ok(Dataset {
            regions: self.regions.clone(),
            variables: self.variables.clone(),
            values,
            normalization: Some(ranges),
            index: self.index.clone(),
        })
    }

    /// Maps normalized values back to native units.
    pub fn denormalize(&self) -> Result<Dataset> {
        let ranges = self
            .normalization
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("dataset is not normalized".into()))?;
        let n = self.n_vars();
        let values = self
            .values
            .chunks_exact(n)
            .flat_map(|row| row.iter().zip(ranges).map(|(&y, r)| r.denormalize(y)))
            .collect();
        Ok(Dataset {
            regions: self.regions.clone(),
            variables: self.variables.clone(),
            values,
            normalization: None,
            index: self.index.clone(),
        })
    }

    /// Normalizes an external row of native values with this dataset's
    /// recorded ranges. The result is not clamped: points outside the
    /// fitted population may fall outside `[0, 1]`.
    pub fn normalize_external(&self, native: &[f64]) -> Result<Vec<f64>> {
        let ranges = self
            .normalization
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("dataset is not normalized".into()))?;
        if native.len() != ranges.len() {
            return Err(Error::DimensionMismatch {
                expected: ranges.len(),
                actual: native.len(),
            });
        }
        Ok(native.iter().zip(ranges).map(|(&x, r)| r.normalize(x)).collect())
    }

    /// Uniform row subsample without replacement, original order kept.
    pub fn subsample(&self, count: usize, seed: u64) -> Result<Dataset> {
        if count == 0 || count > self.n_rows() {
            return Err(Error::InvalidConfig(format!(
                "subsample size {count} must be in 1..={}",
                self.n_rows()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = rand::seq::index::sample(&mut rng, self.n_rows(), count).into_vec();
        rows.sort_unstable();
        Ok(self.take_rows(&rows))
    }

    pub fn ingest_csv(source: impl std::io::Read) -> Result<Dataset> {
        let mut text = String::new();
        let mut source = source;
        source
            .read_to_string(&mut text)
            .map_err(|e| Error::Malformed(format!("input is not readable UTF-8: {e}")))?;
        parse_csv(&text)
    }

    /// Writes the dataset (in its current units) as CSV.
    pub fn write_csv(&self, mut sink: impl std::io::Write) -> std::io::Result<()> {
        sink.write_all(self.to_csv_string().as_bytes())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 12);
        out.push_str("region_id,lat,lon");
        for v in &self.variables {
            out.push(',');
            out.push_str(&v.name);
        }
        out.push('\n');
        for (i, r) in self.regions.iter().enumerate() {
            let _ = write!(out, "{},{},{}", r.id, r.lat, r.lon);
            for x in self.row(i) {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }
}

fn parse_csv(text: &str) -> Result<Dataset> {
    let mut lines = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .filter(|(_, l)| !l.is_empty());

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Malformed("empty input, expected a header row".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 4 || columns[..3] != [ID_COLUMN, LAT_COLUMN, LON_COLUMN] {
        return Err(Error::Malformed(
            "header must be `region_id,lat,lon,<variable>,...` with at least one variable".into(),
        ));
    }
    let variables: Vec<VariableSpec> = columns[3..]
        .iter()
        .map(|name| {
            if name.is_empty() {
                Err(Error::Malformed("empty variable name in header".into()))
            } else {
                Ok(VariableSpec::continuous(*name))
            }
        })
        .collect::<Result<_>>()?;

    let mut regions = Vec::new();
    let mut values = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (row, (_, line)) in lines.enumerate() {
        let row = row + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::Ingest {
                row,
                column: columns
                    .get(fields.len().min(columns.len() - 1))
                    .map(|c| c.to_string())
                    .unwrap_or_default(),
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(Error::Ingest {
                row,
                column: ID_COLUMN.into(),
                message: "missing id".into(),
            });
        }
        if let Some(first) = seen.insert(id.to_string(), row) {
            return Err(Error::Ingest {
                row,
                column: ID_COLUMN.into(),
                message: format!("duplicate id `{id}` (first seen on row {first})"),
            });
        }
        let number = |k: usize| -> Result<f64> {
            let raw = fields[k].trim();
            let msg = if raw.is_empty() {
                "missing value".to_string()
            } else {
                format!("`{raw}` is not a finite number")
            };
            match raw.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(Error::Ingest {
                    row,
                    column: columns[k].to_string(),
                    message: msg,
                }),
            }
        };
        let lat = number(1)?;
        let lon = number(2)?;
        if let Err(column) = check_coordinates(lat, lon) {
            return Err(Error::Ingest {
                row,
                column: column.into(),
                message: format!(
                    "{} out of range",
                    if column == LAT_COLUMN { lat } else { lon }
                ),
            });
        }
        for k in 3..columns.len() {
            values.push(number(k)?);
        }
        regions.push(Region::new(id, lat, lon));
    }
    if regions.is_empty() {
        return Err(Error::Malformed("no data rows".into()));
    }
    Dataset::new(regions, variables, values)
}
