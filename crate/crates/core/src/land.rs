//! Land-type taxonomy and the context / action / outcome value types.
//!
//! Every vector indexed by land type uses the canonical order of
//! [`LandType::ALL`]. Prescriptions only touch the eight
//! [`LandType::MODIFIABLE`] types; primary land, urban land and `c4per` stay
//! as they are.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for sums computed in memory.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Tolerance for sums read from files, which carry rounded decimals.
pub const FILE_TOLERANCE: f64 = 1e-6;

pub const N_TYPES: usize = 12;
pub const N_MODIFIABLE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandType {
    Primf,
    Primn,
    Secdf,
    Secdn,
    Urban,
    C3ann,
    C4ann,
    C3per,
    C4per,
    C3nfx,
    Pastr,
    Range,
}

impl LandType {
    pub const ALL: [LandType; N_TYPES] = [
        LandType::Primf,
        LandType::Primn,
        LandType::Secdf,
        LandType::Secdn,
        LandType::Urban,
        LandType::C3ann,
        LandType::C4ann,
        LandType::C3per,
        LandType::C4per,
        LandType::C3nfx,
        LandType::Pastr,
        LandType::Range,
    ];

    /// Types a prescriptor may reallocate, in prescriptor output order.
    pub const MODIFIABLE: [LandType; N_MODIFIABLE] = [
        LandType::Secdf,
        LandType::Secdn,
        LandType::C3ann,
        LandType::C4ann,
        LandType::C3per,
        LandType::C3nfx,
        LandType::Pastr,
        LandType::Range,
    ];

    pub const FIXED: [LandType; 4] = [
        LandType::Primf,
        LandType::Primn,
        LandType::Urban,
        LandType::C4per,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Position within [`LandType::MODIFIABLE`], if the type is modifiable.
    pub fn modifiable_index(self) -> Option<usize> {
        LandType::MODIFIABLE.iter().position(|&t| t == self)
    }

    pub fn is_modifiable(self) -> bool {
        self.modifiable_index().is_some()
    }

    pub fn name(self) -> &'static str {
        match self {
            LandType::Primf => "primf",
            LandType::Primn => "primn",
            LandType::Secdf => "secdf",
            LandType::Secdn => "secdn",
            LandType::Urban => "urban",
            LandType::C3ann => "c3ann",
            LandType::C4ann => "c4ann",
            LandType::C3per => "c3per",
            LandType::C4per => "c4per",
            LandType::C3nfx => "c3nfx",
            LandType::Pastr => "pastr",
            LandType::Range => "range",
        }
    }

    pub fn from_name(name: &str) -> Option<LandType> {
        LandType::ALL.into_iter().find(|t| t.name() == name)
    }
}

impl std::fmt::Display for LandType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fractional allocation of one grid cell over the 12 land types plus the
/// share that is not land at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandUseVector {
    pub fractions: [f64; N_TYPES],
    pub nonland: f64,
}

impl LandUseVector {
    pub fn new(fractions: [f64; N_TYPES], nonland: f64) -> Self {
        LandUseVector { fractions, nonland }
    }

    /// Builds a vector from named fractions; unnamed types are 0.
    pub fn from_pairs(pairs: &[(LandType, f64)], nonland: f64) -> Self {
        let mut fractions = [0.0; N_TYPES];
        for &(t, v) in pairs {
            fractions[t.index()] = v;
        }
        LandUseVector { fractions, nonland }
    }

    pub fn get(&self, t: LandType) -> f64 {
        self.fractions[t.index()]
    }

    pub fn set(&mut self, t: LandType, v: f64) {
        self.fractions[t.index()] = v;
    }

    pub fn land_total(&self) -> f64 {
        1.0 - self.nonland
    }

    pub fn modifiable_budget(&self) -> f64 {
        LandType::MODIFIABLE.iter().map(|&t| self.get(t)).sum()
    }

    pub fn modifiable(&self) -> [f64; N_MODIFIABLE] {
        LandType::MODIFIABLE.map(|t| self.get(t))
    }

    pub fn total(&self) -> f64 {
        self.fractions.iter().sum::<f64>() + self.nonland
    }

    pub fn validate(&self, tolerance: f64) -> Result<()> {
        for (t, &v) in LandType::ALL.iter().zip(&self.fractions) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!("fraction of {t} is {v}")));
            }
        }
        if !self.nonland.is_finite() || !(0.0..=1.0).contains(&self.nonland) {
            return Err(Error::Validation(format!(
                "nonland fraction is {}",
                self.nonland
            )));
        }
        let total = self.total();
        if (total - 1.0).abs() > tolerance {
            return Err(Error::Validation(format!(
                "land-use fractions sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Decision situation for one cell in one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellContext {
    pub cell_id: String,
    pub lat: f64,
    pub lon: f64,
    /// Hectares.
    pub area: f64,
    pub year: i32,
    pub usage: LandUseVector,
}

impl CellContext {
    pub fn validate(&self, tolerance: f64) -> Result<()> {
        if !(self.area > 0.0) || !self.area.is_finite() {
            return Err(Error::Validation(format!("cell area is {}", self.area)));
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::Validation(format!(
                "latitude {} out of range",
                self.lat
            )));
        }
        if !(-180.0..180.0).contains(&self.lon) {
            return Err(Error::Validation(format!(
                "longitude {} out of range",
                self.lon
            )));
        }
        self.usage.validate(tolerance)
    }
}

/// Target fractions for the modifiable types, in [`LandType::MODIFIABLE`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub targets: [f64; N_MODIFIABLE],
}

impl Recommendation {
    pub fn new(targets: [f64; N_MODIFIABLE]) -> Self {
        Recommendation { targets }
    }

    /// The recommendation that leaves the cell unchanged.
    pub fn current(ctx: &CellContext) -> Self {
        Recommendation {
            targets: ctx.usage.modifiable(),
        }
    }

    pub fn get(&self, t: LandType) -> Option<f64> {
        t.modifiable_index().map(|i| self.targets[i])
    }

    pub fn sum(&self) -> f64 {
        self.targets.iter().sum()
    }

    pub fn validate_against(&self, ctx: &CellContext, tolerance: f64) -> Result<()> {
        if let Some(v) = self.targets.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Validation(format!(
                "recommended fraction {v} is negative or not finite"
            )));
        }
        let budget = ctx.usage.modifiable_budget();
        let sum = self.sum();
        if (sum - budget).abs() > tolerance {
            return Err(Error::Validation(format!(
                "recommendation sums to {sum}, but the modifiable budget is {budget}"
            )));
        }
        Ok(())
    }
}

/// Signed per-type change in fraction, canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionDelta {
    pub deltas: [f64; N_TYPES],
}

impl ActionDelta {
    pub const ZERO: ActionDelta = ActionDelta {
        deltas: [0.0; N_TYPES],
    };

    pub fn from_pairs(pairs: &[(LandType, f64)]) -> Self {
        let mut deltas = [0.0; N_TYPES];
        for &(t, v) in pairs {
            deltas[t.index()] = v;
        }
        ActionDelta { deltas }
    }

    pub fn get(&self, t: LandType) -> f64 {
        self.deltas[t.index()]
    }

    pub fn sum(&self) -> f64 {
        self.deltas.iter().sum()
    }

    /// `usage + self`, with nonland carried over.
    pub fn apply_to(&self, usage: &LandUseVector) -> LandUseVector {
        let mut out = *usage;
        for (f, d) in out.fractions.iter_mut().zip(&self.deltas) {
            *f += d;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// tC/ha; positive means carbon is emitted.
    pub eluc: f64,
    /// Percent of the cell's land whose use changes.
    pub change: f64,
}

/// Replaces the modifiable fractions of `ctx.usage` with `rec`, keeping fixed
/// types and nonland bit-identical.
pub fn apply_recommendation(ctx: &CellContext, rec: &Recommendation) -> Result<LandUseVector> {
    rec.validate_against(ctx, SUM_TOLERANCE)?;
    let mut out = ctx.usage;
    for (t, &v) in LandType::MODIFIABLE.iter().zip(&rec.targets) {
        out.set(*t, v);
    }
    Ok(out)
}

/// Percent of land changed between two allocations of the same cell.
///
/// Normalized by the land total (1 - nonland); an all-water cell has zero
/// change.
pub fn compute_change(before: &LandUseVector, after: &LandUseVector) -> f64 {
    let land = before.land_total();
    if land <= 0.0 {
        return 0.0;
    }
    let moved: f64 = before
        .fractions
        .iter()
        .zip(&after.fractions)
        .map(|(b, a)| (a - b).max(0.0))
        .sum();
    (100.0 * moved / land).clamp(0.0, 100.0)
}

pub fn delta_of(before: &LandUseVector, after: &LandUseVector) -> ActionDelta {
    let mut deltas = [0.0; N_TYPES];
    for (d, (b, a)) in deltas
        .iter_mut()
        .zip(before.fractions.iter().zip(&after.fractions))
    {
        *d = a - b;
    }
    ActionDelta { deltas }
}
