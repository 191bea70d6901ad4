//! Read-only model store and the what-if computations behind the HTTP API.
//!
//! A store is a directory:
//!
//! ```text
//! store/
//!   cells.csv          dataset snapshot; the latest year of each cell is served
//!   predictors/*.json  saved predictors, keyed by model_id
//!   archive/*.json     prescriptor files, keyed by prescriptor_id
//!   static/            optional UI assets served at `/`
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::dataset::{region_of, Dataset, REGIONS};
use crate::error::{Error, Result};
use crate::land::{
    apply_recommendation, compute_change, delta_of, ActionDelta, CellContext, LandType,
    LandUseVector, Recommendation, N_MODIFIABLE,
};
use crate::predictors::{ElucModel, Predictor};
use crate::prescriptor::{prescribe, PrescriptorFile, PrescriptorNet};

pub mod api;

pub use api::{router, serve};

/// Tolerance on the sum of user-submitted fractions before renormalization.
pub const PREDICT_SUM_TOLERANCE: f64 = 1e-6;

/// Below this magnitude the baseline is treated as zero and no reduction is reported.
pub const BASELINE_EPSILON: f64 = 1e-9;

/// Failure of a store query, classified for the HTTP layer.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryError {
    NotFound(String),
    Invalid(String),
    Internal(String),
}

impl std::fmt::Display for QueryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryError::NotFound(m) | QueryError::Invalid(m) | QueryError::Internal(m) => {
                f.write_str(m)
            }
        }
    }
}

impl std::error::Error for QueryError {}

impl From<Error> for QueryError {
    fn from(e: Error) -> Self {
        QueryError::Internal(e.to_string())
    }
}

struct StoredPrescriptor {
    file: PrescriptorFile,
    net: PrescriptorNet,
}

pub struct ModelStore {
    cells: Vec<CellContext>,
    cell_index: BTreeMap<String, usize>,
    predictors: BTreeMap<String, Predictor>,
    prescriptors: BTreeMap<String, StoredPrescriptor>,
    static_dir: Option<PathBuf>,
}

/// Land-use fractions keyed by type name, in canonical order, then `nonland`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NamedUsage(pub LandUseVector);

impl Serialize for NamedUsage {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(LandType::ALL.len() + 1))?;
        for t in LandType::ALL {
            m.serialize_entry(t.name(), &self.0.get(t))?;
        }
        m.serialize_entry("nonland", &self.0.nonland)?;
        m.end()
    }
}

/// Per-type deltas keyed by type name, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NamedDelta(pub ActionDelta);

impl Serialize for NamedDelta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(LandType::ALL.len()))?;
        for t in LandType::ALL {
            m.serialize_entry(t.name(), &self.0.get(t))?;
        }
        m.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell_id: String,
    pub lat: f64,
    pub lon: f64,
    pub area: f64,
    pub year: i32,
    pub usage: NamedUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrescriptorSummary {
    pub prescriptor_id: String,
    pub run_id: String,
    pub eluc_mean: f64,
    pub change_mean: f64,
}

/// Effect of one recommendation on one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhatIf {
    pub predicted_eluc: f64,
    pub change_pct: f64,
    /// Prediction for leaving the cell unchanged.
    pub baseline_eluc: f64,
    /// `100 * (baseline - predicted) / |baseline|`; `None` for a zero baseline.
    pub eluc_reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrescribeResponse {
    pub cell_id: String,
    pub prescriptor_id: String,
    pub model_id: String,
    pub recommended: NamedUsage,
    pub delta: NamedDelta,
    #[serde(flatten)]
    pub outcome: WhatIf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictResponse {
    pub cell_id: String,
    pub model_id: String,
    #[serde(flatten)]
    pub outcome: WhatIf,
}

/// Modifiable fractions either as an 8-element list in modifiable order or
/// as an object keyed by type name (missing types are 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecommendedInput {
    List(Vec<f64>),
    Named(BTreeMap<String, f64>),
}

impl RecommendedInput {
    pub fn to_targets(&self) -> std::result::Result<[f64; N_MODIFIABLE], QueryError> {
        let mut out = [0.0; N_MODIFIABLE];
        match self {
            RecommendedInput::List(v) => {
                if v.len() != N_MODIFIABLE {
                    return Err(QueryError::Invalid(format!(
                        "recommended has {} entries, expected {N_MODIFIABLE}",
                        v.len()
                    )));
                }
                out.copy_from_slice(v);
            }
            RecommendedInput::Named(m) => {
                for (name, &v) in m {
                    let i = LandType::from_name(name)
                        .and_then(LandType::modifiable_index)
                        .ok_or_else(|| {
                            QueryError::Invalid(format!("`{name}` is not a modifiable land type"))
                        })?;
                    out[i] = v;
                }
            }
        }
        Ok(out)
    }
}

/// Scales `targets` onto the cell's modifiable budget when their sum is within
/// [`PREDICT_SUM_TOLERANCE`] of it.
pub fn renormalize(
    ctx: &CellContext,
    targets: [f64; N_MODIFIABLE],
) -> std::result::Result<Recommendation, QueryError> {
    if let Some(v) = targets.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(QueryError::Invalid(format!(
            "recommended fraction {v} is negative or not finite"
        )));
    }
    let sum: f64 = targets.iter().sum();
    let budget = ctx.usage.modifiable_budget();
    if (sum - budget).abs() > PREDICT_SUM_TOLERANCE {
        return Err(QueryError::Invalid(format!(
            "recommended fractions sum to {sum}, but the cell's modifiable budget is {budget}"
        )));
    }
    if sum == budget {
        return Ok(Recommendation::new(targets));
    }
    if sum <= 0.0 {
        return Ok(Recommendation::new([0.0; N_MODIFIABLE]));
    }
    let k = budget / sum;
    Ok(Recommendation::new(targets.map(|v| v * k)))
}

/// Prediction, change and reduction for `rec` on `ctx`.
pub fn what_if(
    ctx: &CellContext,
    rec: &Recommendation,
    model: &dyn ElucModel,
) -> Result<(LandUseVector, ActionDelta, WhatIf)> {
    let after = apply_recommendation(ctx, rec)?;
    let delta = delta_of(&ctx.usage, &after);
    let predicted_eluc = model.predict(ctx, &delta)?;
    let baseline_eluc = model.predict(ctx, &ActionDelta::ZERO)?;
    let eluc_reduction_pct = (baseline_eluc.abs() > BASELINE_EPSILON)
        .then(|| 100.0 * (baseline_eluc - predicted_eluc) / baseline_eluc.abs());
    Ok((
        after,
        delta,
        WhatIf {
            predicted_eluc,
            change_pct: compute_change(&ctx.usage, &after),
            baseline_eluc,
            eluc_reduction_pct,
        },
    ))
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

impl ModelStore {
    /// Builds a store from in-memory parts. Cells are used as given.
    pub fn new(
        cells: Vec<CellContext>,
        predictors: Vec<Predictor>,
        prescriptors: Vec<PrescriptorFile>,
    ) -> Result<Self> {
        let mut cell_index = BTreeMap::new();
        for (i, c) in cells.iter().enumerate() {
            if cell_index.insert(c.cell_id.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate cell id `{}`",
                    c.cell_id
                )));
            }
        }
        let mut preds = BTreeMap::new();
        for p in predictors {
            let id = p.model_id().to_string();
            if id.is_empty() {
                return Err(Error::Validation(format!(
                    "{} predictor has no model id",
                    p.family()
                )));
            }
            if preds.insert(id.clone(), p).is_some() {
                return Err(Error::Validation(format!("duplicate model id `{id}`")));
            }
        }
        let mut prescs = BTreeMap::new();
        for file in prescriptors {
            if file.eluc_mean.is_none() || file.change_mean.is_none() {
                return Err(Error::Validation(format!(
                    "prescriptor `{}` has no stored objectives",
                    file.prescriptor_id
                )));
            }
            let net = file.net()?;
            let id = file.prescriptor_id.clone();
            if prescs
                .insert(id.clone(), StoredPrescriptor { file, net })
                .is_some()
            {
                return Err(Error::Validation(format!(
                    "duplicate prescriptor id `{id}`"
                )));
            }
        }
        Ok(ModelStore {
            cells,
            cell_index,
            predictors: preds,
            prescriptors: prescs,
            static_dir: None,
        })
    }

    /// Loads a store directory (see the module docs). Missing parts are empty.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::Validation(format!(
                "store {} is not a directory",
                dir.display()
            )));
        }
        let cells_path = dir.join("cells.csv");
        let cells = if cells_path.exists() {
            Dataset::load_csv(&cells_path)?.latest_per_cell()
        } else {
            Vec::new()
        };
        let predictors = json_files(&dir.join("predictors"))?
            .iter()
            .map(Predictor::load)
            .collect::<Result<Vec<_>>>()?;
        let prescriptors = json_files(&dir.join("archive"))?
            .iter()
            .map(PrescriptorFile::load)
            .collect::<Result<Vec<_>>>()?;
        let mut store = ModelStore::new(cells, predictors, prescriptors)?;
        let static_dir = dir.join("static");
        store.static_dir = static_dir.is_dir().then_some(static_dir);
        Ok(store)
    }

    pub fn static_dir(&self) -> Option<&Path> {
        self.static_dir.as_deref()
    }

    pub fn cells(&self) -> &[CellContext] {
        &self.cells
    }

    pub fn cell(&self, id: &str) -> std::result::Result<&CellContext, QueryError> {
        self.cell_index
            .get(id)
            .map(|&i| &self.cells[i])
            .ok_or_else(|| QueryError::NotFound(format!("unknown cell `{id}`")))
    }

    pub fn model_ids(&self) -> impl Iterator<Item = &str> {
        self.predictors.keys().map(String::as_str)
    }

    /// The named predictor, or the first by id when `id` is `None`.
    pub fn predictor(&self, id: Option<&str>) -> std::result::Result<&Predictor, QueryError> {
        match id {
            Some(id) => self
                .predictors
                .get(id)
                .ok_or_else(|| QueryError::NotFound(format!("unknown model `{id}`"))),
            None => self
                .predictors
                .values()
                .next()
                .ok_or_else(|| QueryError::NotFound("the store has no predictors".into())),
        }
    }

    pub fn prescriptor(
        &self,
        id: &str,
    ) -> std::result::Result<(&PrescriptorFile, &PrescriptorNet), QueryError> {
        self.prescriptors
            .get(id)
            .map(|p| (&p.file, &p.net))
            .ok_or_else(|| QueryError::NotFound(format!("unknown prescriptor `{id}`")))
    }

    /// Cells in a region (`"global"` or `None` for all).
    pub fn cells_in(
        &self,
        region: Option<&str>,
    ) -> std::result::Result<Vec<CellSummary>, QueryError> {
        if let Some(r) = region {
            if !REGIONS.contains(&r) {
                return Err(QueryError::NotFound(format!(
                    "unknown region `{r}`; expected one of {}",
                    REGIONS.join(", ")
                )));
            }
        }
        Ok(self
            .cells
            .iter()
            .filter(|c| match region {
                None | Some("global") => true,
                Some(r) => region_of(c.lon) == r,
            })
            .map(|c| CellSummary {
                cell_id: c.cell_id.clone(),
                lat: c.lat,
                lon: c.lon,
                area: c.area,
                year: c.year,
                usage: NamedUsage(c.usage),
            })
            .collect())
    }

    /// Archive members by ascending change.
    pub fn prescriptor_summaries(&self) -> Vec<PrescriptorSummary> {
        let mut v: Vec<PrescriptorSummary> = self
            .prescriptors
            .values()
            .map(|p| PrescriptorSummary {
                prescriptor_id: p.file.prescriptor_id.clone(),
                run_id: p.file.run_id.clone(),
                eluc_mean: p.file.eluc_mean.unwrap_or(f64::NAN),
                change_mean: p.file.change_mean.unwrap_or(f64::NAN),
            })
            .collect();
        v.sort_by(|a, b| {
            a.change_mean
                .total_cmp(&b.change_mean)
                .then_with(|| a.prescriptor_id.cmp(&b.prescriptor_id))
        });
        v
    }

    pub fn prescribe(
        &self,
        cell_id: &str,
        prescriptor_id: &str,
        model_id: Option<&str>,
    ) -> std::result::Result<PrescribeResponse, QueryError> {
        let ctx = self.cell(cell_id)?;
        let (_, net) = self.prescriptor(prescriptor_id)?;
        let model = self.predictor(model_id)?;
        let rec = prescribe(net, ctx);
        let (after, delta, outcome) = what_if(ctx, &rec, model)?;
        Ok(PrescribeResponse {
            cell_id: ctx.cell_id.clone(),
            prescriptor_id: prescriptor_id.to_string(),
            model_id: model.model_id().to_string(),
            recommended: NamedUsage(after),
            delta: NamedDelta(delta),
            outcome,
        })
    }

    pub fn predict(
        &self,
        cell_id: &str,
        recommended: &RecommendedInput,
        model_id: Option<&str>,
    ) -> std::result::Result<PredictResponse, QueryError> {
        let ctx = self.cell(cell_id)?;
        let model = self.predictor(model_id)?;
        let rec = renormalize(ctx, recommended.to_targets()?)?;
        let (_, _, outcome) = what_if(ctx, &rec, model)?;
        Ok(PredictResponse {
            cell_id: ctx.cell_id.clone(),
            model_id: model.model_id().to_string(),
            outcome,
        })
    }
}
