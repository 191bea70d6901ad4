//! End-to-end steps shared by the CLI, the tests and the C interface.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolutionConfig, EvolutionResult};
use crate::land::CellContext;
use crate::predictors::mlp::DEFAULT_HIDDEN;
use crate::predictors::{
    evaluate_mae, fit_forest, fit_linreg, fit_mlp, FeatureSchema, ForestParams, Predictor,
    TrainingParams,
};
use crate::prescriptor::{fit_seed_maxsecdf, fit_seed_nochange, SeedFit, SeedTrainingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linreg,
    Mlp,
    Forest,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linreg" => Ok(Family::Linreg),
            "mlp" => Ok(Family::Mlp),
            "forest" => Ok(Family::Forest),
            other => Err(Error::Validation(format!(
                "unknown model family `{other}`; expected linreg, mlp or forest"
            ))),
        }
    }
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Linreg => "linreg",
            Family::Mlp => "mlp",
            Family::Forest => "forest",
        }
    }
}

/// Fits a predictor of the given family with default hyperparameters.
pub fn train_predictor(
    family: Family,
    ds: &Dataset,
    schema: FeatureSchema,
    seed: u64,
) -> Result<Predictor> {
    let mut p = match family {
        Family::Linreg => Predictor::Linreg(fit_linreg(ds, schema)?),
        Family::Mlp => Predictor::Mlp(fit_mlp(
            ds,
            schema,
            DEFAULT_HIDDEN,
            &TrainingParams {
                seed,
                ..TrainingParams::default()
            },
        )?),
        Family::Forest => Predictor::Forest(fit_forest(
            ds,
            schema,
            &ForestParams {
                seed,
                ..ForestParams::default()
            },
        )?),
    };
    let region = ds.region_tag.clone();
    let meta = p.meta_mut();
    meta.model_id = format!(
        "{}-{}-s{seed}",
        family.name(),
        region.as_deref().unwrap_or("global")
    );
    meta.region_tag = region;
    meta.train_years = ds.year_range();
    meta.seed = (family != Family::Linreg).then_some(seed);
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_mae: f64,
    pub test_mae: f64,
}

/// Trains on the early years of `ds` and reports MAE on both splits.
pub fn train_with_holdout(
    family: Family,
    ds: &Dataset,
    schema: FeatureSchema,
    seed: u64,
) -> Result<(Predictor, HoldoutReport)> {
    let (train, test) = ds.holdout_split()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Validation(
            "held-out split left one side empty".into(),
        ));
    }
    let model = train_predictor(family, &train, schema, seed)?;
    let report = HoldoutReport {
        train_rows: train.len(),
        test_rows: test.len(),
        train_mae: evaluate_mae(&model, &train)?,
        test_mae: evaluate_mae(&model, &test)?,
    };
    Ok((model, report))
}

/// Held-out MAE of an already trained model, using the same split as
/// [`train_with_holdout`] after restricting to the model's region.
pub fn holdout_mae(model: &Predictor, ds: &Dataset) -> Result<f64> {
    let ds = match &model.meta().region_tag {
        Some(tag) => ds.filter_region(tag)?,
        None => ds.clone(),
    };
    let (_, test) = ds.holdout_split()?;
    evaluate_mae(model, &test)
}

/// Evaluation contexts for an evolution run: a seeded sample of the rows.
pub fn evaluation_contexts(cfg: &EvolutionConfig, ds: &Dataset) -> Result<Vec<CellContext>> {
    Ok(ds
        .sample_fraction(cfg.eval_sample_fraction, cfg.seed)?
        .contexts())
}

/// The two backprop-trained seeds: keep-current and everything-to-secdf.
/// Each is the best network its training found, even if it missed its target.
pub fn seed_fits(contexts: &[CellContext], seed: u64) -> Result<Vec<SeedFit>> {
    let params = SeedTrainingParams {
        seed,
        ..SeedTrainingParams::default()
    };
    Ok(vec![
        fit_seed_nochange(contexts, &params)?,
        fit_seed_maxsecdf(contexts, &params)?,
    ])
}

/// Samples the evaluation set, trains the seed networks and evolves. The
/// seed fits are returned so callers can report targets that were missed.
pub fn evolve_on_dataset(
    cfg: &EvolutionConfig,
    ds: &Dataset,
    predictor: &Predictor,
) -> Result<(EvolutionResult, Vec<SeedFit>)> {
    cfg.validate()?;
    let contexts = evaluation_contexts(cfg, ds)?;
    let fits = seed_fits(&contexts, cfg.seed)?;
    let seeds: Vec<_> = fits.iter().map(|f| f.net.encode()).collect();
    Ok((evolve(cfg, &contexts, predictor, &seeds)?, fits))
}
