//! Synthetic ground truth standing in for a bookkeeping emissions model.
//!
//! Each row gets an independently sampled land-use vector and a historical
//! action that reallocates modifiable land (and may clear primary land into
//! secondary land). The emission is linear in the action plus one
//! interaction term between forest regrowth and existing pasture, which a
//! purely linear model cannot represent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetRow};
use crate::error::{Error, Result};
use crate::land::{ActionDelta, CellContext, LandType, LandUseVector, N_MODIFIABLE, N_TYPES};
use crate::predictors::ElucModel;

/// tC/ha per unit delta, canonical land-type order.
pub const DEFAULT_WEIGHTS: [f64; N_TYPES] = [
    -40.0, // primf
    -15.0, // primn
    -30.0, // secdf
    -12.0, // secdn
    1.0,   // urban
    6.0,   // c3ann
    8.0,   // c4ann
    4.0,   // c3per
    5.0,   // c4per
    5.0,   // c3nfx
    -4.0,  // pastr
    -2.0,  // range
];

/// Dirichlet concentration per land type. Fixed types and secdf are sparse so
/// most of a cell's land is prescribable and not already forest.
pub const DEFAULT_CONCENTRATION: [f64; N_TYPES] = [
    0.1,  // primf
    0.1,  // primn
    0.2,  // secdf
    0.5,  // secdn
    0.05, // urban
    0.5,  // c3ann
    0.5,  // c4ann
    0.5,  // c3per
    0.05, // c4per
    0.5,  // c3nfx
    0.5,  // pastr
    0.5,  // range
];

pub const MAX_NONLAND: f64 = 0.3;
/// Upper bound on the share of each type an action may clear in one year.
pub const MAX_INTENSITY: f64 = 1.0;
/// Dirichlet concentrations for spreading cleared land over the modifiable
/// types (secdf, secdn, c3ann, c4ann, c3per, c3nfx, pastr, range). Values
/// below 1 put most of it on one or two types; secdf, the regrowth target,
/// is favoured.
pub const REDISTRIBUTION_CONCENTRATION: [f64; N_MODIFIABLE] =
    [1.0, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25];
pub const PRIMARY_LOSS_PROBABILITY: f64 = 0.5;
/// Chance that part of the remaining pasture is abandoned and regrows as secdf.
pub const ABANDONMENT_PROBABILITY: f64 = 0.5;

/// Cell edge of the synthetic grid in degrees.
const GRID_DEG: f64 = 0.25;
const HA_PER_DEG2_AT_EQUATOR: f64 = 111.32 * 111.32 * 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_cells: usize,
    /// Inclusive year range; every cell gets one row per year.
    pub years: (i32, i32),
    pub linear_weights: [f64; N_TYPES],
    pub interaction_coeff: f64,
    pub noise_std: f64,
    #[serde(default = "default_concentration")]
    pub usage_concentration: [f64; N_TYPES],
}

fn default_concentration() -> [f64; N_TYPES] {
    DEFAULT_CONCENTRATION
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_cells: 100,
            years: (2000, 2009),
            linear_weights: DEFAULT_WEIGHTS,
            interaction_coeff: 10.0,
            noise_std: 0.5,
            usage_concentration: DEFAULT_CONCENTRATION,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::Validation(format!("noise_std {}", self.noise_std)));
        }
        if self.linear_weights.iter().any(|w| !w.is_finite()) || !self.interaction_coeff.is_finite()
        {
            return Err(Error::Validation("generator weights must be finite".into()));
        }
        if self.usage_concentration.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Validation(
                "Dirichlet concentrations must be positive".into(),
            ));
        }
        if self.years.0 > self.years.1 {
            return Err(Error::Validation(format!(
                "year range {}..={} is empty",
                self.years.0, self.years.1
            )));
        }
        Ok(())
    }

    pub fn oracle(&self) -> SynthOracle {
        SynthOracle {
            weights: self.linear_weights,
            interaction: self.interaction_coeff,
        }
    }
}

/// The noiseless generator function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthOracle {
    pub weights: [f64; N_TYPES],
    pub interaction: f64,
}

impl Default for SynthOracle {
    fn default() -> Self {
        SynthConfig::default().oracle()
    }
}

impl SynthOracle {
    pub fn eluc(&self, usage: &LandUseVector, delta: &ActionDelta) -> f64 {
        let linear: f64 = self
            .weights
            .iter()
            .zip(&delta.deltas)
            .map(|(w, d)| w * d)
            .sum();
        linear + self.interaction * delta.get(LandType::Secdf) * usage.get(LandType::Pastr)
    }
}

impl ElucModel for SynthOracle {
    fn predict(&self, ctx: &CellContext, delta: &ActionDelta) -> Result<f64> {
        Ok(self.eluc(&ctx.usage, delta))
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, alpha: &[f64]) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|g| g / total).collect();
        }
    }
}

fn sample_usage(rng: &mut ChaCha8Rng, alpha: &[f64; N_TYPES]) -> LandUseVector {
    let nonland = rng.random_range(0.0..MAX_NONLAND);
    let land = 1.0 - nonland;
    let shares = dirichlet(rng, alpha);
    let mut fractions = [0.0; N_TYPES];
    for (f, s) in fractions.iter_mut().zip(shares) {
        *f = s * land;
    }
    LandUseVector::new(fractions, nonland)
}

fn sample_delta(rng: &mut ChaCha8Rng, usage: &LandUseVector) -> ActionDelta {
    let intensity = rng.random_range(0.0..MAX_INTENSITY);
    let mut deltas = [0.0; N_TYPES];

    let mut cleared = 0.0;
    for t in LandType::MODIFIABLE {
        let take = usage.get(t) * rng.random_range(0.0..=intensity);
        deltas[t.index()] -= take;
        cleared += take;
    }
    let shares = dirichlet(rng, &REDISTRIBUTION_CONCENTRATION);
    for (t, s) in LandType::MODIFIABLE.iter().zip(shares) {
        deltas[t.index()] += s * cleared;
    }

    if rng.random_bool(ABANDONMENT_PROBABILITY) {
        let p = LandType::Pastr.index();
        let abandoned = (usage.fractions[p] + deltas[p]) * rng.random_range(0.0..=1.0);
        deltas[p] -= abandoned;
        deltas[LandType::Secdf.index()] += abandoned;
    }

    let mut primary_loss = 0.0;
    for t in [LandType::Primf, LandType::Primn] {
        if rng.random_bool(PRIMARY_LOSS_PROBABILITY) {
            let take = usage.get(t) * rng.random_range(0.0..=intensity);
            deltas[t.index()] -= take;
            primary_loss += take;
        }
    }
    let to_forest = rng.random_range(0.0..=1.0);
    deltas[LandType::Secdf.index()] += to_forest * primary_loss;
    deltas[LandType::Secdn.index()] += (1.0 - to_forest) * primary_loss;

    ActionDelta { deltas }
}

fn snap(v: f64) -> f64 {
    (v / GRID_DEG).floor() * GRID_DEG + GRID_DEG / 2.0
}

/// Generates `n_cells * n_years` rows, cell-major, fully determined by the seed.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let oracle = cfg.oracle();
    let mut rows = Vec::with_capacity(cfg.n_cells * (cfg.years.1 - cfg.years.0 + 1) as usize);
    for cell in 0..cfg.n_cells {
        let lat = snap(rng.random_range(-60.0..70.0));
        let lon = snap(rng.random_range(-180.0..180.0));
        let area = HA_PER_DEG2_AT_EQUATOR * GRID_DEG * GRID_DEG * lat.to_radians().cos();
        for year in cfg.years.0..=cfg.years.1 {
            let usage = sample_usage(&mut rng, &cfg.usage_concentration);
            let delta = sample_delta(&mut rng, &usage);
            let noise: f64 = rng.sample(StandardNormal);
            let eluc = oracle.eluc(&usage, &delta) + cfg.noise_std * noise;
            rows.push(DatasetRow {
                ctx: CellContext {
                    cell_id: format!("c{cell:05}"),
                    lat,
                    lon,
                    area,
                    year,
                    usage,
                },
                delta,
                eluc,
            });
        }
    }
    Ok(Dataset::new(rows, Some("global".into())))
}
