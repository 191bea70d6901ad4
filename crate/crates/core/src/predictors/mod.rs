//! Surrogate ELUC predictors: linear regression, wide-and-deep MLP and a
//! bagged regression forest, behind one [`Predictor`] type.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::land::{ActionDelta, CellContext, LandType, LandUseVector};

pub mod features;
pub mod forest;
pub mod linreg;
pub mod mlp;

pub use features::{featurize, FeatureSchema, Standardizer};
pub use forest::{fit_forest, ForestParams, ForestPredictor};
pub use linreg::{fit_linreg, LinRegModel};
pub use mlp::{fit_mlp, MlpPredictor, TrainingParams};

/// Anything that maps a context and an action to an emission estimate in tC/ha.
pub trait ElucModel: Sync {
    fn predict(&self, ctx: &CellContext, delta: &ActionDelta) -> Result<f64>;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model_id: String,
    pub region_tag: Option<String>,
    pub train_years: Option<(i32, i32)>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Predictor {
    Linreg(LinRegModel),
    Mlp(MlpPredictor),
    Forest(ForestPredictor),
}

impl Predictor {
    pub fn family(&self) -> &'static str {
        match self {
            Predictor::Linreg(_) => "linreg",
            Predictor::Mlp(_) => "mlp",
            Predictor::Forest(_) => "forest",
        }
    }

    pub fn meta(&self) -> &ModelMeta {
        match self {
            Predictor::Linreg(m) => &m.meta,
            Predictor::Mlp(m) => &m.meta,
            Predictor::Forest(m) => &m.meta,
        }
    }

    pub fn meta_mut(&mut self) -> &mut ModelMeta {
        match self {
            Predictor::Linreg(m) => &mut m.meta,
            Predictor::Mlp(m) => &mut m.meta,
            Predictor::Forest(m) => &mut m.meta,
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        match self {
            Predictor::Linreg(m) => &m.schema,
            Predictor::Mlp(m) => &m.schema,
            Predictor::Forest(m) => &m.schema,
        }
    }

    pub fn model_id(&self) -> &str {
        &self.meta().model_id
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Predictor> {
        let p: Predictor = serde_json::from_str(text)?;
        p.schema().validate()?;
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Predictor> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Predictor::from_json(&text)
    }
}

impl ElucModel for Predictor {
    fn predict(&self, ctx: &CellContext, delta: &ActionDelta) -> Result<f64> {
        match self {
            Predictor::Linreg(m) => m.predict(ctx, delta),
            Predictor::Mlp(m) => m.predict(ctx, delta),
            Predictor::Forest(m) => m.predict(ctx, delta),
        }
    }
}

impl ElucModel for LinRegModel {
    fn predict(&self, ctx: &CellContext, delta: &ActionDelta) -> Result<f64> {
        LinRegModel::predict(self, ctx, delta)
    }
}

impl ElucModel for MlpPredictor {
    fn predict(&self, ctx: &CellContext, delta: &ActionDelta) -> Result<f64> {
        MlpPredictor::predict(self, ctx, delta)
    }
}

impl ElucModel for ForestPredictor {
    fn predict(&self, ctx: &CellContext, delta: &ActionDelta) -> Result<f64> {
        ForestPredictor::predict(self, ctx, delta)
    }
}

/// Mean absolute error over the dataset. Predictions may be computed in
/// parallel; the sum runs in row order.
pub fn evaluate_mae(model: &dyn ElucModel, ds: &Dataset) -> Result<f64> {
    use rayon::prelude::*;
    if ds.is_empty() {
        return Err(Error::Validation(
            "cannot evaluate on an empty dataset".into(),
        ));
    }
    let errors: Vec<f64> = ds
        .rows
        .par_iter()
        .map(|r| model.predict(&r.ctx, &r.delta).map(|p| (p - r.eluc).abs()))
        .collect::<Result<_>>()?;
    Ok(errors.iter().sum::<f64>() / ds.len() as f64)
}

/// Source types of the conversion heatmap (rows): everything except c4per.
pub fn heatmap_sources() -> Vec<LandType> {
    LandType::ALL
        .into_iter()
        .filter(|&t| t != LandType::C4per)
        .collect()
}

/// Target types (columns): primary, urban and c4per excluded.
pub fn heatmap_targets() -> Vec<LandType> {
    LandType::MODIFIABLE.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub sources: Vec<LandType>,
    pub targets: Vec<LandType>,
    /// `values[a][b]`: tC/ha for converting a cell that is 100% `sources[a]`
    /// entirely to `targets[b]`.
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn column_mean(&self, target: LandType) -> Option<f64> {
        let j = self.targets.iter().position(|&t| t == target)?;
        Some(self.values.iter().map(|row| row[j]).sum::<f64>() / self.values.len() as f64)
    }

    pub fn get(&self, source: LandType, target: LandType) -> Option<f64> {
        let i = self.sources.iter().position(|&t| t == source)?;
        let j = self.targets.iter().position(|&t| t == target)?;
        Some(self.values[i][j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("from");
        for t in &self.targets {
            out.push(',');
            out.push_str(t.name());
        }
        out.push('\n');
        for (s, row) in self.sources.iter().zip(&self.values) {
            out.push_str(s.name());
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Predictions for every full conversion from one land type to another, on a
/// cell that is entirely land. Location, area and year come from `baseline`.
pub fn conversion_heatmap(model: &dyn ElucModel, baseline: &CellContext) -> Result<Heatmap> {
    let sources = heatmap_sources();
    let targets = heatmap_targets();
    let mut values = Vec::with_capacity(sources.len());
    for &a in &sources {
        let mut ctx = baseline.clone();
        ctx.usage = LandUseVector::from_pairs(&[(a, 1.0)], 0.0);
        let mut row = Vec::with_capacity(targets.len());
        for &b in &targets {
            let mut delta = ActionDelta::ZERO;
            if a != b {
                delta.deltas[a.index()] = -1.0;
                delta.deltas[b.index()] = 1.0;
            }
            row.push(model.predict(&ctx, &delta)?);
        }
        values.push(row);
    }
    Ok(Heatmap {
        sources,
        targets,
        values,
    })
}
