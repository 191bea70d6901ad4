//! Training rows, CSV interchange, year splits and subsampling.

use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::land::{ActionDelta, CellContext, LandType, LandUseVector, FILE_TOLERANCE, N_TYPES};

pub mod synth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub ctx: CellContext,
    pub delta: ActionDelta,
    /// tC/ha.
    pub eluc: f64,
}

impl DatasetRow {
    pub fn validate(&self, tolerance: f64) -> Result<()> {
        self.ctx.validate(tolerance)?;
        if let Some(d) = self.delta.deltas.iter().find(|d| !d.is_finite()) {
            return Err(Error::Validation(format!("delta {d} is not finite")));
        }
        let sum = self.delta.sum();
        if sum.abs() > tolerance {
            return Err(Error::Validation(format!(
                "deltas sum to {sum}, expected 0"
            )));
        }
        let after = self.delta.apply_to(&self.ctx.usage);
        for (t, v) in LandType::ALL.iter().zip(after.fractions) {
            if v < -tolerance {
                return Err(Error::Validation(format!(
                    "usage plus delta leaves {t} at {v}"
                )));
            }
        }
        if !self.eluc.is_finite() {
            return Err(Error::Validation(format!(
                "eluc {} is not finite",
                self.eluc
            )));
        }
        Ok(())
    }

    /// Land use after the historical action, clamped at 0.
    pub fn after(&self) -> LandUseVector {
        let mut after = self.delta.apply_to(&self.ctx.usage);
        for f in after.fractions.iter_mut() {
            *f = f.max(0.0);
        }
        after
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
    pub region_tag: Option<String>,
}

/// Region tags understood by [`region_of`] and [`Dataset::filter_region`].
pub const REGIONS: [&str; 5] = ["us", "sa", "eu", "asia", "global"];

/// Longitude band a cell belongs to. Bands stand in for the country groups
/// used when training regional models.
pub fn region_of(lon: f64) -> &'static str {
    if lon < -90.0 {
        "us"
    } else if lon < -30.0 {
        "sa"
    } else if lon < 45.0 {
        "eu"
    } else {
        "asia"
    }
}

const USAGE_PREFIX: &str = "usage_";
const DELTA_PREFIX: &str = "delta_";

fn header() -> Vec<String> {
    let mut h: Vec<String> = ["cell_id", "year", "lat", "lon", "area", "nonland"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(LandType::ALL.iter().map(|t| format!("{USAGE_PREFIX}{t}")));
    h.extend(LandType::ALL.iter().map(|t| format!("{DELTA_PREFIX}{t}")));
    h.push("eluc".into());
    h
}

impl Dataset {
    pub fn new(rows: Vec<DatasetRow>, region_tag: Option<String>) -> Self {
        Dataset { rows, region_tag }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contexts(&self) -> Vec<CellContext> {
        self.rows.iter().map(|r| r.ctx.clone()).collect()
    }

    pub fn year_range(&self) -> Option<(i32, i32)> {
        let years = self.rows.iter().map(|r| r.ctx.year);
        let lo = years.clone().min()?;
        let hi = years.max()?;
        Some((lo, hi))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::read_csv(file, path)
    }

    pub fn read_csv(reader: impl Read, path: &Path) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let parse_err = |row: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            message,
        };
        let headers = rdr.headers()?.clone();
        let column = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| parse_err(0, format!("missing column `{name}`")))
        };
        let id_col = column("cell_id")?;
        let year_col = column("year")?;
        let lat_col = column("lat")?;
        let lon_col = column("lon")?;
        let area_col = column("area")?;
        let nonland_col = column("nonland")?;
        let eluc_col = column("eluc")?;
        let mut usage_cols = [0usize; N_TYPES];
        let mut delta_cols = [0usize; N_TYPES];
        for (i, t) in LandType::ALL.iter().enumerate() {
            usage_cols[i] = column(&format!("{USAGE_PREFIX}{t}"))?;
            delta_cols[i] = column(&format!("{DELTA_PREFIX}{t}"))?;
        }

        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row_no = i + 1;
            let record = record?;
            let field = |col: usize| -> Result<&str> {
                record
                    .get(col)
                    .map(str::trim)
                    .ok_or_else(|| parse_err(row_no, format!("missing field {col}")))
            };
            let num = |col: usize| -> Result<f64> {
                let s = field(col)?;
                let v: f64 = s
                    .parse()
                    .map_err(|_| parse_err(row_no, format!("`{s}` is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(row_no, format!("non-finite value `{s}`")));
                }
                Ok(v)
            };
            let year_str = field(year_col)?;
            let year: i32 = year_str
                .parse()
                .map_err(|_| parse_err(row_no, format!("`{year_str}` is not a year")))?;
            let mut fractions = [0.0; N_TYPES];
            let mut deltas = [0.0; N_TYPES];
            for k in 0..N_TYPES {
                fractions[k] = num(usage_cols[k])?;
                deltas[k] = num(delta_cols[k])?;
            }
            let row = DatasetRow {
                ctx: CellContext {
                    cell_id: field(id_col)?.to_string(),
                    lat: num(lat_col)?,
                    lon: num(lon_col)?,
                    area: num(area_col)?,
                    year,
                    usage: LandUseVector::new(fractions, num(nonland_col)?),
                },
                delta: ActionDelta { deltas },
                eluc: num(eluc_col)?,
            };
            row.validate(FILE_TOLERANCE)
                .map_err(|e| parse_err(row_no, e.to_string()))?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::NoRows {
                path: path.to_path_buf(),
            });
        }
        Ok(Dataset {
            rows,
            region_tag: None,
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Canonical CSV: fixed column order and shortest round-trip floats.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().from_writer(writer);
        wtr.write_record(header())?;
        for row in &self.rows {
            let c = &row.ctx;
            let mut rec: Vec<String> = Vec::with_capacity(31);
            rec.push(c.cell_id.clone());
            rec.push(c.year.to_string());
            rec.push(c.lat.to_string());
            rec.push(c.lon.to_string());
            rec.push(c.area.to_string());
            rec.push(c.usage.nonland.to_string());
            rec.extend(c.usage.fractions.iter().map(f64::to_string));
            rec.extend(row.delta.deltas.iter().map(f64::to_string));
            rec.push(row.eluc.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Rows whose year falls in each range. Ranges must not overlap.
    pub fn split_by_year(
        &self,
        train: RangeInclusive<i32>,
        test: RangeInclusive<i32>,
    ) -> Result<(Dataset, Dataset)> {
        if train.start() <= test.end() && test.start() <= train.end() {
            return Err(Error::Validation(format!(
                "year ranges {}..={} and {}..={} overlap",
                train.start(),
                train.end(),
                test.start(),
                test.end()
            )));
        }
        let pick = |r: &RangeInclusive<i32>| Dataset {
            rows: self
                .rows
                .iter()
                .filter(|row| r.contains(&row.ctx.year))
                .cloned()
                .collect(),
            region_tag: self.region_tag.clone(),
        };
        Ok((pick(&train), pick(&test)))
    }

    /// Train/test split on time: the last fifth of the year range (at least
    /// one year) is held out.
    pub fn holdout_split(&self) -> Result<(Dataset, Dataset)> {
        let (first, last) = self
            .year_range()
            .ok_or_else(|| Error::Validation("cannot split an empty dataset".into()))?;
        let span = last - first + 1;
        if span < 2 {
            return Err(Error::Validation(format!(
                "a held-out split needs at least two years, data covers only {first}"
            )));
        }
        let test_years = ((span as f64 * 0.2).round() as i32).max(1);
        let cut = last - test_years + 1;
        self.split_by_year(first..=cut - 1, cut..=last)
    }

    /// `ceil(fraction * len)` rows drawn without replacement, kept in file order.
    pub fn sample_fraction(&self, fraction: f64, seed: u64) -> Result<Dataset> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Validation(format!(
                "sample fraction {fraction} not in (0, 1]"
            )));
        }
        let n = self.rows.len();
        // Absorb representation error so 0.01 * 10_000 is 100, not 101.
        let k = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
        let k = k.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = index::sample(&mut rng, n, k).into_vec();
        picked.sort_unstable();
        Ok(Dataset {
            rows: picked.into_iter().map(|i| self.rows[i].clone()).collect(),
            region_tag: self.region_tag.clone(),
        })
    }

    /// Rows in the given longitude-band region; `global` keeps everything.
    pub fn filter_region(&self, tag: &str) -> Result<Dataset> {
        if !REGIONS.contains(&tag) {
            return Err(Error::Validation(format!("unknown region `{tag}`")));
        }
        let rows = if tag == "global" {
            self.rows.clone()
        } else {
            self.rows
                .iter()
                .filter(|r| region_of(r.ctx.lon) == tag)
                .cloned()
                .collect()
        };
        Ok(Dataset {
            rows,
            region_tag: Some(tag.to_string()),
        })
    }

    /// One context per cell: the row with the latest year.
    pub fn latest_per_cell(&self) -> Vec<CellContext> {
        let mut latest: std::collections::BTreeMap<&str, &CellContext> = Default::default();
        for row in &self.rows {
            let e = latest.entry(&row.ctx.cell_id).or_insert(&row.ctx);
            if row.ctx.year > e.year {
                *e = &row.ctx;
            }
        }
        latest.into_values().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "\
cell_id,year,lat,lon,area,nonland,usage_primf,usage_primn,usage_secdf,usage_secdn,usage_urban,usage_c3ann,usage_c4ann,usage_c3per,usage_c4per,usage_c3nfx,usage_pastr,usage_range,delta_primf,delta_primn,delta_secdf,delta_secdn,delta_urban,delta_c3ann,delta_c4ann,delta_c3per,delta_c4per,delta_c3nfx,delta_pastr,delta_range,eluc
a,2010,51.125,-0.125,48000.5,0.2,0,0,0.3,0,0,0,0,0,0,0,0.5,0,0,0,0.3,0,0,0,0,0,0,0,-0.3,0,-9.5
b,2011,-10.375,-60.625,75000,0,0.5,0,0,0,0.1,0.2,0,0,0,0,0.2,0,-0.1,0,0.05,0.05,0,0,0,0,0,0,0,0,3.25
";

    fn parse(text: &str) -> Result<Dataset> {
        Dataset::read_csv(text.as_bytes(), Path::new("fixture.csv"))
    }

    #[test]
    fn fixture_parses_to_known_values() {
        let ds = parse(FIXTURE).unwrap();
        assert_eq!(ds.len(), 2);
        let a = &ds.rows[0];
        assert_eq!(a.ctx.cell_id, "a");
        assert_eq!(a.ctx.year, 2010);
        assert_eq!(a.ctx.lat, 51.125);
        assert_eq!(a.ctx.lon, -0.125);
        assert_eq!(a.ctx.area, 48000.5);
        assert_eq!(a.ctx.usage.nonland, 0.2);
        assert_eq!(a.ctx.usage.get(LandType::Secdf), 0.3);
        assert_eq!(a.ctx.usage.get(LandType::Pastr), 0.5);
        assert_eq!(a.delta.get(LandType::Pastr), -0.3);
        assert_eq!(a.eluc, -9.5);
        let b = &ds.rows[1];
        assert_eq!(b.ctx.usage.get(LandType::Primf), 0.5);
        assert_eq!(b.delta.get(LandType::Primf), -0.1);
        assert_eq!(b.delta.get(LandType::Secdn), 0.05);
        assert_eq!(b.eluc, 3.25);
    }

    #[test]
    fn empty_file_is_an_error() {
        let header_only = FIXTURE.lines().next().unwrap().to_string() + "\n";
        let err = parse(&header_only).unwrap_err();
        assert!(err.to_string().contains("no rows"), "{err}");
    }

    #[test]
    fn missing_column_is_reported() {
        let text = FIXTURE.replacen(",eluc", ",elux", 1);
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("missing column `eluc`"), "{err}");
    }

    #[test]
    fn bad_rows_carry_their_number() {
        let text = FIXTURE.replace(",3.25", ",NaN");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");

        let text = FIXTURE.replace("51.125,-0.125,48000.5,0.2", "51.125,-0.125,48000.5,0.25");
        let err = parse(&text).unwrap_err();
        assert!(
            err.to_string().contains("row 1") && err.to_string().contains("sum"),
            "{err}"
        );
    }

    #[test]
    fn save_then_load_round_trips() {
        let ds = parse(FIXTURE).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let again = Dataset::read_csv(buf.as_slice(), Path::new("x")).unwrap();
        assert_eq!(again.rows, ds.rows);
        let mut buf2 = Vec::new();
        again.write_csv(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    fn years(ys: &[i32]) -> Dataset {
        let base = parse(FIXTURE).unwrap().rows[0].clone();
        Dataset::new(
            ys.iter()
                .map(|&y| {
                    let mut r = base.clone();
                    r.ctx.year = y;
                    r
                })
                .collect(),
            None,
        )
    }

    #[test]
    fn split_boundary() {
        let ds = years(&[2010, 2011, 2012]);
        let (train, test) = ds.split_by_year(1851..=2011, 2012..=2021).unwrap();
        assert_eq!((train.len(), test.len()), (2, 1));
        let (train, test) = ds.split_by_year(1851..=2020, 2021..=2030).unwrap();
        assert_eq!((train.len(), test.len()), (3, 0));
        assert!(ds.split_by_year(1851..=2012, 2012..=2021).is_err());
    }

    #[test]
    fn sample_sizes() {
        let ds = years(&vec![2000; 10_000]);
        assert_eq!(ds.sample_fraction(0.01, 7).unwrap().len(), 100);
        assert_eq!(ds.sample_fraction(1.0, 7).unwrap().len(), 10_000);
        assert_eq!(ds.sample_fraction(0.00001, 7).unwrap().len(), 1);
        assert!(ds.sample_fraction(0.0, 7).is_err());
        assert!(ds.sample_fraction(1.5, 7).is_err());
    }

    #[test]
    fn sample_is_deterministic() {
        let ds = years(&(0..500).collect::<Vec<_>>());
        let a = ds.sample_fraction(0.1, 42).unwrap();
        let b = ds.sample_fraction(0.1, 42).unwrap();
        let c = ds.sample_fraction(0.1, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn latest_year_per_cell() {
        let mut ds = years(&[2001, 2005, 2003]);
        ds.rows[2].ctx.cell_id = "other".into();
        let cells = ds.latest_per_cell();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].cell_id, "a");
        assert_eq!(cells[0].year, 2005);
        assert_eq!(cells[1].year, 2003);
    }
}
