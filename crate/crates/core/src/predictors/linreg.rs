use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::features::{featurize, FeatureSchema};
use super::ModelMeta;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::land::{ActionDelta, CellContext};

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinRegModel {
    pub schema: FeatureSchema,
    /// tC/ha per unit feature, in schema order.
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Rank of the centered design matrix.
    pub effective_rank: usize,
    /// True when the design matrix was rank deficient and the minimum-norm
    /// solution was returned.
    pub rank_deficient: bool,
    pub meta: ModelMeta,
}

impl LinRegModel {
    pub fn predict_features(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, ctx: &CellContext, delta: &ActionDelta) -> Result<f64> {
        if self.weights.len() != self.schema.len() {
            return Err(Error::SchemaMismatch("weights"));
        }
        Ok(self.predict_features(&featurize(ctx, delta, &self.schema)))
    }

    /// Weight of the delta feature for each land type, canonical order.
    pub fn delta_weights(&self) -> Result<[f64; 12]> {
        if !self.schema.include_deltas || self.weights.len() != self.schema.len() {
            return Err(Error::SchemaMismatch("deltas"));
        }
        let off = self.schema.delta_offset();
        let mut w = [0.0; 12];
        w.copy_from_slice(&self.weights[off..off + 12]);
        Ok(w)
    }
}

/// Ordinary least squares with an intercept, solved by SVD of the centered
/// design matrix. A rank-deficient design yields the minimum-norm solution.
pub fn fit_linreg(ds: &Dataset, schema: FeatureSchema) -> Result<LinRegModel> {
    schema.validate()?;
    let p = schema.len();
    let n = ds.len();
    if n <= p {
        return Err(Error::Validation(format!(
            "linear regression needs more than {p} rows, got {n}"
        )));
    }
    let xs: Vec<Vec<f64>> = ds
        .rows
        .iter()
        .map(|r| featurize(&r.ctx, &r.delta, &schema))
        .collect();
    let ys: Vec<f64> = ds.rows.iter().map(|r| r.eluc).collect();

    let nf = n as f64;
    let mut x_mean = vec![0.0; p];
    for x in &xs {
        for (m, v) in x_mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= nf);
    let y_mean = ys.iter().sum::<f64>() / nf;

    let design = DMatrix::from_fn(n, p, |i, j| xs[i][j] - x_mean[j]);
    let target = DVector::from_iterator(n, ys.iter().map(|y| y - y_mean));

    let svd = design.svd(true, true);
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = s_max * RANK_TOLERANCE;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let uty = u.transpose() * &target;
    let mut coeffs = DVector::zeros(p);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            coeffs += v_t.row(k).transpose() * (uty[k] / s);
        }
    }

    let weights: Vec<f64> = coeffs.iter().copied().collect();
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Diverged("non-finite regression weight".into()));
    }
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinRegModel {
        schema,
        weights,
        intercept,
        effective_rank: rank,
        rank_deficient: rank < p,
        meta: ModelMeta {
            train_years: ds.year_range(),
            region_tag: ds.region_tag.clone(),
            ..ModelMeta::default()
        },
    })
}
