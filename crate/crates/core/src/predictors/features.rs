use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::land::{ActionDelta, CellContext, LandType};

/// Which feature groups a predictor sees. The order of groups in the feature
/// vector is fixed: usage (12 types then nonland), deltas, area, lat/lon, year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub include_usage: bool,
    pub include_deltas: bool,
    pub include_area: bool,
    pub include_latlon: bool,
    pub include_year: bool,
}

impl FeatureSchema {
    pub const fn deltas_only() -> Self {
        FeatureSchema {
            include_usage: false,
            include_deltas: true,
            include_area: false,
            include_latlon: false,
            include_year: false,
        }
    }

    /// Usage, deltas and area; location and year stay out.
    pub const fn full() -> Self {
        FeatureSchema {
            include_usage: true,
            include_deltas: true,
            include_area: true,
            include_latlon: false,
            include_year: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.include_deltas {
            return Err(Error::SchemaMismatch("deltas"));
        }
        Ok(())
    }

    /// Parses a comma-separated list of groups: `usage,deltas,area,latlon,year`.
    /// The shorthands `deltas-only` and `full` are accepted.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec.trim() {
            "deltas-only" | "deltas_only" => return Ok(Self::deltas_only()),
            "full" => return Ok(Self::full()),
            _ => {}
        }
        let mut s = FeatureSchema {
            include_usage: false,
            include_deltas: false,
            include_area: false,
            include_latlon: false,
            include_year: false,
        };
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "usage" => s.include_usage = true,
                "deltas" => s.include_deltas = true,
                "area" => s.include_area = true,
                "latlon" => s.include_latlon = true,
                "year" => s.include_year = true,
                other => {
                    return Err(Error::Validation(format!(
                        "unknown feature group `{other}`"
                    )))
                }
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        let mut n = 0;
        if self.include_usage {
            n += 13;
        }
        if self.include_deltas {
            n += 12;
        }
        if self.include_area {
            n += 1;
        }
        if self.include_latlon {
            n += 2;
        }
        if self.include_year {
            n += 1;
        }
        n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        if self.include_usage {
            names.extend(LandType::ALL.iter().map(|t| format!("usage_{t}")));
            names.push("nonland".into());
        }
        if self.include_deltas {
            names.extend(LandType::ALL.iter().map(|t| format!("delta_{t}")));
        }
        if self.include_area {
            names.push("area".into());
        }
        if self.include_latlon {
            names.push("lat".into());
            names.push("lon".into());
        }
        if self.include_year {
            names.push("year".into());
        }
        names
    }

    /// Offset of the delta block within the feature vector.
    pub fn delta_offset(&self) -> usize {
        if self.include_usage {
            13
        } else {
            0
        }
    }

    pub fn featurize_into(&self, ctx: &CellContext, delta: &ActionDelta, out: &mut Vec<f64>) {
        out.clear();
        if self.include_usage {
            out.extend_from_slice(&ctx.usage.fractions);
            out.push(ctx.usage.nonland);
        }
        if self.include_deltas {
            out.extend_from_slice(&delta.deltas);
        }
        if self.include_area {
            out.push(ctx.area);
        }
        if self.include_latlon {
            out.push(ctx.lat);
            out.push(ctx.lon);
        }
        if self.include_year {
            out.push(ctx.year as f64);
        }
    }
}

pub fn featurize(ctx: &CellContext, delta: &ActionDelta, schema: &FeatureSchema) -> Vec<f64> {
    let mut out = Vec::with_capacity(schema.len());
    schema.featurize_into(ctx, delta, &mut out);
    out
}

/// Per-feature standardization fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let p = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        // Constant features map to 0 instead of dividing by zero.
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &mut [f64]) {
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::land::LandUseVector;

    fn ctx() -> CellContext {
        CellContext {
            cell_id: "x".into(),
            lat: 10.0,
            lon: 20.0,
            area: 5000.0,
            year: 1999,
            usage: LandUseVector::from_pairs(
                &[(LandType::Pastr, 0.6), (LandType::Primf, 0.3)],
                0.1,
            ),
        }
    }

    #[test]
    fn zero_delta_gives_zero_vector() {
        let v = featurize(&ctx(), &ActionDelta::ZERO, &FeatureSchema::deltas_only());
        assert_eq!(v, vec![0.0; 12]);
    }

    #[test]
    fn usage_then_deltas_in_canonical_order() {
        let schema = FeatureSchema {
            include_usage: true,
            ..FeatureSchema::deltas_only()
        };
        let d = ActionDelta::from_pairs(&[(LandType::Pastr, -0.2), (LandType::Secdf, 0.2)]);
        let v = featurize(&ctx(), &d, &schema);
        let mut expected = vec![
            0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.6, 0.0, 0.1,
        ];
        expected.extend([0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.2, 0.0]);
        assert_eq!(v, expected);
        assert_eq!(schema.names().len(), v.len());
        assert_eq!(schema.names()[13], "delta_primf");
    }

    #[test]
    fn area_flag_adds_one_feature() {
        let a = FeatureSchema::full();
        let b = FeatureSchema {
            include_area: false,
            ..a
        };
        assert_eq!(a.len(), b.len() + 1);
        let all = FeatureSchema::parse("usage,deltas,area,latlon,year").unwrap();
        let v = featurize(&ctx(), &ActionDelta::ZERO, &all);
        assert_eq!(&v[25..], &[5000.0, 10.0, 20.0, 1999.0]);
    }

    #[test]
    fn parse_requires_deltas() {
        assert!(FeatureSchema::parse("usage,area").is_err());
        assert!(FeatureSchema::parse("deltas,bogus").is_err());
        assert_eq!(
            FeatureSchema::parse("deltas").unwrap(),
            FeatureSchema::deltas_only()
        );
        assert_eq!(FeatureSchema::parse("full").unwrap(), FeatureSchema::full());
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&rows);
        let mut x = vec![3.0, 5.0];
        s.apply(&mut x);
        assert_eq!(x, vec![1.0, 0.0]);
    }
}
