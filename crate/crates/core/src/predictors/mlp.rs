//! Single-hidden-layer regression network whose output layer sees both the
//! hidden activations and the raw (standardized) inputs, so the linear part
//! of the response is available without going through the hidden layer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::{featurize, FeatureSchema, Standardizer};
use super::ModelMeta;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::land::{ActionDelta, CellContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainingParams {
    fn default() -> Self {
        TrainingParams {
            epochs: 100,
            batch_size: 256,
            learning_rate: 1e-3,
            momentum: 0.9,
            seed: 0,
        }
    }
}

pub const DEFAULT_HIDDEN: usize = 64;

/// Raw parameters. `w1` is row-major `hidden x inputs`; `w_out` covers the
/// inputs first, then the hidden units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub inputs: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl MlpWeights {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        MlpWeights {
            inputs,
            hidden,
            w1: vec![0.0; inputs * hidden],
            b1: vec![0.0; hidden],
            w_out: vec![0.0; inputs + hidden],
            b_out: 0.0,
        }
    }

    pub fn random(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut w = MlpWeights::zeros(inputs, hidden);
        let he = Normal::new(0.0, (2.0 / inputs.max(1) as f64).sqrt()).expect("finite std");
        w.w1.iter_mut().for_each(|v| *v = he.sample(rng));
        let out = Normal::new(0.0, 1.0 / ((inputs + hidden) as f64).sqrt()).expect("finite std");
        w.w_out.iter_mut().for_each(|v| *v = out.sample(rng));
        w
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w_out.len() + 1
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w_out);
        v.push(self.b_out);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let (a, rest) = flat.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w_out.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w_out.copy_from_slice(c);
        self.b_out = d[0];
    }

    fn hidden_into(&self, x: &[f64], h: &mut [f64]) {
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
            let z = self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *hj = z.max(0.0);
        }
    }

    fn output(&self, x: &[f64], h: &[f64]) -> f64 {
        let (wx, wh) = self.w_out.split_at(self.inputs);
        self.b_out
            + wx.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            + wh.iter().zip(h).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        self.hidden_into(x, &mut h);
        self.output(x, &h)
    }

    /// Mean squared error over the batch and its gradient.
    pub fn loss_and_gradient(&self, xs: &[&[f64]], ys: &[f64]) -> (f64, MlpWeights) {
        let mut grad = MlpWeights::zeros(self.inputs, self.hidden);
        let mut h = vec![0.0; self.hidden];
        let m = xs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            self.hidden_into(x, &mut h);
            let err = self.output(x, &h) - y;
            loss += err * err;
            let g = 2.0 * err / m;
            grad.b_out += g;
            let (gx, gh) = grad.w_out.split_at_mut(self.inputs);
            for (gw, v) in gx.iter_mut().zip(x.iter()) {
                *gw += g * v;
            }
            let wh = &self.w_out[self.inputs..];
            for j in 0..self.hidden {
                gh[j] += g * h[j];
                if h[j] > 0.0 {
                    let gz = g * wh[j];
                    grad.b1[j] += gz;
                    let row = &mut grad.w1[j * self.inputs..(j + 1) * self.inputs];
                    for (gw, v) in row.iter_mut().zip(x.iter()) {
                        *gw += gz * v;
                    }
                }
            }
        }
        (loss / m, grad)
    }

    pub fn loss(&self, xs: &[&[f64]], ys: &[f64]) -> f64 {
        let m = xs.len() as f64;
        xs.iter()
            .zip(ys)
            .map(|(x, y)| {
                let e = self.forward(x) - y;
                e * e
            })
            .sum::<f64>()
            / m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpPredictor {
    pub schema: FeatureSchema,
    pub input_scaling: Standardizer,
    pub target_mean: f64,
    pub target_std: f64,
    pub weights: MlpWeights,
    pub meta: ModelMeta,
}

impl MlpPredictor {
    pub fn hidden_size(&self) -> usize {
        self.weights.hidden
    }

    pub fn predict_features(&self, x: &[f64]) -> f64 {
        let mut z = x.to_vec();
        self.input_scaling.apply(&mut z);
        self.target_mean + self.target_std * self.weights.forward(&z)
    }

    pub fn predict(&self, ctx: &CellContext, delta: &ActionDelta) -> Result<f64> {
        if self.weights.inputs != self.schema.len()
            || self.input_scaling.mean.len() != self.schema.len()
        {
            return Err(Error::SchemaMismatch("inputs"));
        }
        Ok(self.predict_features(&featurize(ctx, delta, &self.schema)))
    }
}

/// Result of a training run: the model and the full-data training loss
/// (standardized units) before the first epoch and after each epoch.
#[derive(Debug, Clone)]
pub struct MlpFit {
    pub model: MlpPredictor,
    pub loss_history: Vec<f64>,
}

pub fn fit_mlp(
    ds: &Dataset,
    schema: FeatureSchema,
    hidden_size: usize,
    params: &TrainingParams,
) -> Result<MlpPredictor> {
    fit_mlp_with_history(ds, schema, hidden_size, params).map(|f| f.model)
}

pub fn fit_mlp_with_history(
    ds: &Dataset,
    schema: FeatureSchema,
    hidden_size: usize,
    params: &TrainingParams,
) -> Result<MlpFit> {
    schema.validate()?;
    if ds.is_empty() {
        return Err(Error::Validation("cannot train on an empty dataset".into()));
    }
    if hidden_size == 0 || params.batch_size == 0 {
        return Err(Error::Validation(
            "hidden size and batch size must be positive".into(),
        ));
    }
    let mut xs: Vec<Vec<f64>> = ds
        .rows
        .iter()
        .map(|r| featurize(&r.ctx, &r.delta, &schema))
        .collect();
    let scaling = Standardizer::fit(&xs);
    xs.iter_mut().for_each(|x| scaling.apply(x));

    let ys_raw: Vec<f64> = ds.rows.iter().map(|r| r.eluc).collect();
    let n = ys_raw.len() as f64;
    let target_mean = ys_raw.iter().sum::<f64>() / n;
    let var = ys_raw
        .iter()
        .map(|y| (y - target_mean).powi(2))
        .sum::<f64>()
        / n;
    let target_std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    let ys: Vec<f64> = ys_raw
        .iter()
        .map(|y| (y - target_mean) / target_std)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut weights = MlpWeights::random(schema.len(), hidden_size, &mut rng);
    let mut velocity = vec![0.0; weights.param_count()];
    let mut flat = weights.flatten();

    let all: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let mut history = Vec::with_capacity(params.epochs + 1);
    history.push(weights.loss(&all, &ys));

    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut batch_x: Vec<&[f64]> = Vec::with_capacity(params.batch_size);
    let mut batch_y: Vec<f64> = Vec::with_capacity(params.batch_size);
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(params.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.push(&xs[i]);
                batch_y.push(ys[i]);
            }
            let (loss, grad) = weights.loss_and_gradient(&batch_x, &batch_y);
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "loss became {loss} in epoch {epoch}; lower the learning rate"
                )));
            }
            for ((w, v), g) in flat.iter_mut().zip(velocity.iter_mut()).zip(grad.flatten()) {
                *v = params.momentum * *v - params.learning_rate * g;
                *w += *v;
            }
            weights.set_flat(&flat);
        }
        let loss = weights.loss(&all, &ys);
        if !loss.is_finite() {
            return Err(Error::Diverged(format!(
                "loss became {loss} after epoch {epoch}; lower the learning rate"
            )));
        }
        history.push(loss);
    }

    Ok(MlpFit {
        model: MlpPredictor {
            schema,
            input_scaling: scaling,
            target_mean,
            target_std,
            weights,
            meta: ModelMeta {
                train_years: ds.year_range(),
                region_tag: ds.region_tag.clone(),
                seed: Some(params.seed),
                ..ModelMeta::default()
            },
        },
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::{synth_generate, SynthConfig};

    /// Central finite differences, independent of the backward pass.
    fn numeric_gradient(w: &MlpWeights, xs: &[&[f64]], ys: &[f64], step: f64) -> Vec<f64> {
        let base = w.flatten();
        let mut probe = w.clone();
        (0..base.len())
            .map(|k| {
                let mut p = base.clone();
                p[k] = base[k] + step;
                probe.set_flat(&p);
                let up = probe.loss(xs, ys);
                p[k] = base[k] - step;
                probe.set_flat(&p);
                let down = probe.loss(xs, ys);
                (up - down) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut w = MlpWeights::random(3, 2, &mut rng);
        w.b1.iter_mut().for_each(|b| *b = normal.sample(&mut rng));
        w.b_out = normal.sample(&mut rng);
        let data: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let xs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let ys: Vec<f64> = (0..6).map(|_| normal.sample(&mut rng)).collect();
        let (_, grad) = w.loss_and_gradient(&xs, &ys);
        let numeric = numeric_gradient(&w, &xs, &ys, 1e-5);
        for (a, n) in grad.flatten().iter().zip(&numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            assert!(rel < 1e-4, "analytic {a} numeric {n}");
        }
    }

    #[test]
    fn constant_target_is_fitted() {
        let mut ds = synth_generate(&SynthConfig {
            n_cells: 50,
            ..SynthConfig::default()
        })
        .unwrap();
        ds.rows.iter_mut().for_each(|r| r.eluc = 3.5);
        let params = TrainingParams {
            epochs: 1000,
            ..TrainingParams::default()
        };
        let m = fit_mlp(&ds, FeatureSchema::full(), 8, &params).unwrap();
        for r in &ds.rows {
            let p = m.predict(&r.ctx, &r.delta).unwrap();
            assert!((p - 3.5).abs() < 0.1, "{p}");
        }
    }

    #[test]
    fn training_reduces_loss() {
        let ds = synth_generate(&SynthConfig {
            n_cells: 100,
            ..SynthConfig::default()
        })
        .unwrap();
        let params = TrainingParams {
            epochs: 20,
            ..TrainingParams::default()
        };
        let fit = fit_mlp_with_history(&ds, FeatureSchema::full(), 16, &params).unwrap();
        assert!(fit.loss_history.last().unwrap() <= &fit.loss_history[0]);
    }

    #[test]
    fn first_steps_decrease_loss_on_fixed_batch() {
        let ds = synth_generate(&SynthConfig {
            n_cells: 60,
            ..SynthConfig::default()
        })
        .unwrap();
        let schema = FeatureSchema::full();
        let mut xs: Vec<Vec<f64>> = ds
            .rows
            .iter()
            .map(|r| featurize(&r.ctx, &r.delta, &schema))
            .collect();
        let s = Standardizer::fit(&xs);
        xs.iter_mut().for_each(|x| s.apply(x));
        let ys: Vec<f64> = ds.rows.iter().map(|r| r.eluc / 10.0).collect();
        let batch: Vec<&[f64]> = xs.iter().take(256).map(Vec::as_slice).collect();
        let by = &ys[..batch.len()];
        let params = TrainingParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut w = MlpWeights::random(schema.len(), DEFAULT_HIDDEN, &mut rng);
        let mut flat = w.flatten();
        let mut vel = vec![0.0; flat.len()];
        let mut prev = w.loss(&batch, by);
        for _ in 0..10 {
            let (_, g) = w.loss_and_gradient(&batch, by);
            for ((p, v), gi) in flat.iter_mut().zip(vel.iter_mut()).zip(g.flatten()) {
                *v = params.momentum * *v - params.learning_rate * gi;
                *p += *v;
            }
            w.set_flat(&flat);
            let now = w.loss(&batch, by);
            assert!(now < prev, "{now} !< {prev}");
            prev = now;
        }
    }

    #[test]
    fn divergence_is_reported() {
        let ds = synth_generate(&SynthConfig {
            n_cells: 20,
            ..SynthConfig::default()
        })
        .unwrap();
        let params = TrainingParams {
            learning_rate: 1e6,
            epochs: 50,
            ..TrainingParams::default()
        };
        let err = fit_mlp(&ds, FeatureSchema::full(), 8, &params).unwrap_err();
        assert!(matches!(err, Error::Diverged(_)), "{err}");
    }
}
