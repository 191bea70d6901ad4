//! Baselines that convert land to secdf up to a change threshold.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::run::evaluate_with;
use crate::land::{CellContext, LandType, Recommendation};
use crate::predictors::{ElucModel, LinRegModel};

const TARGET: LandType = LandType::Secdf;

fn sources() -> impl Iterator<Item = LandType> {
    LandType::MODIFIABLE.into_iter().filter(|&t| t != TARGET)
}

/// Mass (fraction of the cell) to move so the change equals `threshold_pct`,
/// capped by what the sources hold.
fn mass_to_move(ctx: &CellContext, threshold_pct: f64) -> f64 {
    let available: f64 = sources().map(|t| ctx.usage.get(t)).sum();
    let wanted = threshold_pct.clamp(0.0, 100.0) / 100.0 * ctx.usage.land_total();
    wanted.min(available).max(0.0)
}

fn recommend_with_takes(ctx: &CellContext, takes: &[(LandType, f64)]) -> Recommendation {
    let mut rec = Recommendation::current(ctx);
    let mut moved = 0.0;
    for &(t, take) in takes {
        let i = t.modifiable_index().expect("sources are modifiable");
        rec.targets[i] = (rec.targets[i] - take).max(0.0);
        moved += take;
    }
    rec.targets[TARGET.modifiable_index().expect("secdf is modifiable")] += moved;
    rec
}

/// Takes an equal amount from every non-secdf modifiable type; a type that
/// runs out gives what it has and the others cover the shortfall.
pub fn even_heuristic(ctx: &CellContext, threshold_pct: f64) -> Recommendation {
    let mut remaining = mass_to_move(ctx, threshold_pct);
    if remaining <= 0.0 {
        return Recommendation::current(ctx);
    }
    let mut srcs: Vec<(LandType, f64)> = sources().map(|t| (t, ctx.usage.get(t))).collect();
    srcs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut takes = Vec::with_capacity(srcs.len());
    let mut left = srcs.len();
    for (t, have) in srcs {
        let take = have.min(remaining / left as f64);
        takes.push((t, take));
        remaining -= take;
        left -= 1;
    }
    recommend_with_takes(ctx, &takes)
}

/// Empties source types in order of decreasing linear-regression delta weight
/// until the threshold is met, taking a partial amount from the last one.
pub fn linear_heuristic(
    ctx: &CellContext,
    threshold_pct: f64,
    linreg: &LinRegModel,
) -> Result<Recommendation> {
    let weights = linreg.delta_weights()?;
    let mut remaining = mass_to_move(ctx, threshold_pct);
    if remaining <= 0.0 {
        return Ok(Recommendation::current(ctx));
    }
    let mut srcs: Vec<LandType> = sources().collect();
    srcs.sort_by(|a, b| {
        weights[b.index()]
            .total_cmp(&weights[a.index()])
            .then(a.cmp(b))
    });
    let mut takes = Vec::new();
    for t in srcs {
        if remaining <= 0.0 {
            break;
        }
        let take = ctx.usage.get(t).min(remaining);
        takes.push((t, take));
        remaining -= take;
    }
    Ok(recommend_with_takes(ctx, &takes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    Even,
    Linear,
}

impl HeuristicKind {
    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::Even => "even",
            HeuristicKind::Linear => "linear",
        }
    }
}

impl std::str::FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(HeuristicKind::Even),
            "linear" => Ok(HeuristicKind::Linear),
            other => Err(Error::Validation(format!("unknown heuristic `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub kind: HeuristicKind,
    pub threshold: f64,
    pub change_mean: f64,
    pub eluc_mean: f64,
}

/// The ten thresholds 10, 20, ..., 100.
pub fn default_thresholds() -> Vec<f64> {
    (1..=10).map(|k| 10.0 * k as f64).collect()
}

/// Evaluates the heuristic at each threshold over `contexts`, sorted by change.
pub fn heuristic_sweep(
    kind: HeuristicKind,
    contexts: &[CellContext],
    thresholds: &[f64],
    predictor: &dyn ElucModel,
    linreg: Option<&LinRegModel>,
) -> Result<Vec<SweepPoint>> {
    if contexts.is_empty() {
        return Err(Error::Validation("sweep needs at least one context".into()));
    }
    let linreg = match (kind, linreg) {
        (HeuristicKind::Linear, None) => {
            return Err(Error::Validation(
                "the linear heuristic needs a linear regression model".into(),
            ))
        }
        (_, l) => l,
    };
    let mut points = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let o = evaluate_with(contexts, predictor, |ctx| match kind {
            HeuristicKind::Even => Ok(even_heuristic(ctx, threshold)),
            HeuristicKind::Linear => linear_heuristic(ctx, threshold, linreg.expect("checked")),
        })?;
        points.push(SweepPoint {
            kind,
            threshold,
            change_mean: o.change_mean,
            eluc_mean: o.eluc_mean,
        });
    }
    points.sort_by(|a, b| {
        a.change_mean
            .total_cmp(&b.change_mean)
            .then(a.threshold.total_cmp(&b.threshold))
    });
    Ok(points)
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("kind,threshold,change_mean,eluc_mean\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.kind.name(),
            p.threshold,
            p.change_mean,
            p.eluc_mean
        );
    }
    out
}
