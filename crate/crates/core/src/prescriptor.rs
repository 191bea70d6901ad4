//! Fixed-topology prescriptor network: 13 inputs (12 land fractions and the
//! scaled cell area), 16 tanh units, 8 softmax outputs over the modifiable
//! land types.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::land::{
    apply_recommendation, compute_change, CellContext, LandType, Recommendation, N_MODIFIABLE,
    N_TYPES,
};

pub const INPUTS: usize = N_TYPES + 1;
pub const HIDDEN: usize = 16;
pub const OUTPUTS: usize = N_MODIFIABLE;
pub const GENOME_LEN: usize = INPUTS * HIDDEN + HIDDEN + HIDDEN * OUTPUTS + OUTPUTS;

/// Multiplier applied to the cell area (hectares) before it enters the network.
pub const AREA_SCALE: f64 = 1e-5;

/// Flat weight vector. Layout: layer-1 weights input-major
/// (`w1[i * HIDDEN + j]` connects input `i` to hidden unit `j`), layer-1
/// biases, layer-2 weights hidden-major (`w2[j * OUTPUTS + k]`), layer-2 biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(pub Vec<f64>);

impl Genome {
    pub fn zeros() -> Self {
        Genome(vec![0.0; GENOME_LEN])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn genes(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrescriptorNet {
    pub w1: [[f64; HIDDEN]; INPUTS],
    pub b1: [f64; HIDDEN],
    pub w2: [[f64; OUTPUTS]; HIDDEN],
    pub b2: [f64; OUTPUTS],
}

impl Default for PrescriptorNet {
    fn default() -> Self {
        PrescriptorNet {
            w1: [[0.0; HIDDEN]; INPUTS],
            b1: [0.0; HIDDEN],
            w2: [[0.0; OUTPUTS]; HIDDEN],
            b2: [0.0; OUTPUTS],
        }
    }
}

/// A `rows x cols` matrix with orthonormal rows (if rows <= cols) or columns,
/// scaled by `gain`. Sign-corrected QR of a Gaussian matrix.
pub fn orthogonal_matrix(
    rows: usize,
    cols: usize,
    gain: f64,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let g = DMatrix::from_fn(tall, short, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..short {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    let q = if rows >= cols { q } else { q.transpose() };
    q * gain
}

impl PrescriptorNet {
    pub fn encode(&self) -> Genome {
        let mut g = Vec::with_capacity(GENOME_LEN);
        for row in &self.w1 {
            g.extend_from_slice(row);
        }
        g.extend_from_slice(&self.b1);
        for row in &self.w2 {
            g.extend_from_slice(row);
        }
        g.extend_from_slice(&self.b2);
        Genome(g)
    }

    pub fn decode(genome: &Genome) -> Result<Self> {
        if genome.len() != GENOME_LEN {
            return Err(Error::GenomeLength {
                expected: GENOME_LEN,
                actual: genome.len(),
            });
        }
        let mut it = genome.0.iter().copied();
        let mut net = PrescriptorNet::default();
        for row in net.w1.iter_mut() {
            row.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        net.b1.iter_mut().for_each(|v| *v = it.next().unwrap());
        for row in net.w2.iter_mut() {
            row.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        net.b2.iter_mut().for_each(|v| *v = it.next().unwrap());
        Ok(net)
    }

    /// Orthogonal weight matrices scaled by `gain`, zero biases.
    pub fn orthogonal(gain: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut net = PrescriptorNet::default();
        let w1 = orthogonal_matrix(INPUTS, HIDDEN, gain, rng);
        let w2 = orthogonal_matrix(HIDDEN, OUTPUTS, gain, rng);
        for i in 0..INPUTS {
            for j in 0..HIDDEN {
                net.w1[i][j] = w1[(i, j)];
            }
        }
        for j in 0..HIDDEN {
            for k in 0..OUTPUTS {
                net.w2[j][k] = w2[(j, k)];
            }
        }
        net
    }

    pub fn inputs(ctx: &CellContext) -> [f64; INPUTS] {
        let mut x = [0.0; INPUTS];
        x[..N_TYPES].copy_from_slice(&ctx.usage.fractions);
        x[N_TYPES] = ctx.area * AREA_SCALE;
        x
    }

    fn hidden(&self, x: &[f64; INPUTS]) -> [f64; HIDDEN] {
        let mut h = self.b1;
        for (xi, row) in x.iter().zip(&self.w1) {
            for (hj, w) in h.iter_mut().zip(row) {
                *hj += xi * w;
            }
        }
        h.map(f64::tanh)
    }

    fn logits_from_hidden(&self, h: &[f64; HIDDEN]) -> [f64; OUTPUTS] {
        let mut z = self.b2;
        for (hj, row) in h.iter().zip(&self.w2) {
            for (zk, w) in z.iter_mut().zip(row) {
                *zk += hj * w;
            }
        }
        z
    }

    pub fn logits(&self, ctx: &CellContext) -> [f64; OUTPUTS] {
        self.logits_from_hidden(&self.hidden(&Self::inputs(ctx)))
    }

    /// Softmax share per modifiable type.
    pub fn shares(&self, ctx: &CellContext) -> [f64; OUTPUTS] {
        softmax(&self.logits(ctx))
    }
}

pub fn softmax(z: &[f64; OUTPUTS]) -> [f64; OUTPUTS] {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - max).exp());
    let total: f64 = e.iter().sum();
    e.map(|v| v / total)
}

/// Scales softmax shares to the cell's modifiable budget.
pub fn recommendation_from_logits(logits: &[f64; OUTPUTS], ctx: &CellContext) -> Recommendation {
    let budget = ctx.usage.modifiable_budget();
    if budget <= 0.0 {
        return Recommendation::new([0.0; OUTPUTS]);
    }
    let mut targets = softmax(logits).map(|s| s * budget);
    // Put the rounding residue on the largest entry so the sum is exact to
    // within one ulp of the budget.
    let residue = budget - targets.iter().sum::<f64>();
    let k = (0..OUTPUTS)
        .max_by(|&a, &b| targets[a].total_cmp(&targets[b]))
        .unwrap_or(0);
    targets[k] = (targets[k] + residue).max(0.0);
    Recommendation::new(targets)
}

pub fn prescribe(net: &PrescriptorNet, ctx: &CellContext) -> Recommendation {
    recommendation_from_logits(&net.logits(ctx), ctx)
}

/// Serialized prescriptor: genome plus the input scaling it was evolved with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrescriptorFile {
    pub prescriptor_id: String,
    pub run_id: String,
    pub generation: usize,
    pub eluc_mean: Option<f64>,
    pub change_mean: Option<f64>,
    pub area_scale: f64,
    pub genome: Genome,
}

impl PrescriptorFile {
    pub fn net(&self) -> Result<PrescriptorNet> {
        if self.area_scale != AREA_SCALE {
            return Err(Error::Validation(format!(
                "prescriptor uses area scale {}, this build uses {AREA_SCALE}",
                self.area_scale
            )));
        }
        PrescriptorNet::decode(&self.genome)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: PrescriptorFile = serde_json::from_str(text)?;
        f.net()?;
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedTrainingParams {
    /// Upper bound; training stops as soon as the target is met.
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SeedTrainingParams {
    fn default() -> Self {
        SeedTrainingParams {
            max_epochs: 5000,
            learning_rate: 1e-2,
            seed: 0,
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Mean cross-entropy between the network's softmax and `targets`, with its
/// gradient in genome layout.
pub fn cross_entropy_gradient(
    net: &PrescriptorNet,
    inputs: &[[f64; INPUTS]],
    targets: &[[f64; OUTPUTS]],
) -> (f64, Vec<f64>) {
    let mut grad = PrescriptorNet::default();
    let m = inputs.len() as f64;
    let mut loss = 0.0;
    for (x, q) in inputs.iter().zip(targets) {
        let h = net.hidden(x);
        let p = softmax(&net.logits_from_hidden(&h));
        for (pk, qk) in p.iter().zip(q) {
            if *qk > 0.0 {
                loss -= qk * pk.max(1e-300).ln();
            }
        }
        let dz: [f64; OUTPUTS] = std::array::from_fn(|k| (p[k] - q[k]) / m);
        let mut dh = [0.0; HIDDEN];
        for j in 0..HIDDEN {
            for k in 0..OUTPUTS {
                grad.w2[j][k] += h[j] * dz[k];
                dh[j] += net.w2[j][k] * dz[k];
            }
        }
        for k in 0..OUTPUTS {
            grad.b2[k] += dz[k];
        }
        let da: [f64; HIDDEN] = std::array::from_fn(|j| dh[j] * (1.0 - h[j] * h[j]));
        for (i, xi) in x.iter().enumerate() {
            for j in 0..HIDDEN {
                grad.w1[i][j] += xi * da[j];
            }
        }
        for j in 0..HIDDEN {
            grad.b1[j] += da[j];
        }
    }
    (loss / m, grad.encode().0)
}

/// Result of seed training: the best network seen by the target metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedFit {
    pub net: PrescriptorNet,
    pub what: &'static str,
    /// Metric value of `net` (mean change percent, or mean secdf share).
    pub achieved: f64,
    pub target: f64,
    pub met: bool,
}

impl SeedFit {
    /// The network if it meets its target, otherwise a [`Error::SeedTraining`].
    pub fn into_net(self) -> Result<PrescriptorNet> {
        if self.met {
            Ok(self.net)
        } else {
            Err(Error::SeedTraining {
                what: self.what,
                achieved: self.achieved,
                target: self.target,
            })
        }
    }
}

struct Check {
    met: bool,
    value: f64,
    /// Lower is better.
    score: f64,
}

fn train_toward(
    contexts: &[&CellContext],
    targets: &[[f64; OUTPUTS]],
    params: &SeedTrainingParams,
    check: impl Fn(&PrescriptorNet) -> Check,
    what: &'static str,
    target: f64,
) -> Result<SeedFit> {
    let inputs: Vec<[f64; INPUTS]> = contexts.iter().map(|c| PrescriptorNet::inputs(c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut net = PrescriptorNet::orthogonal(1.0, &mut rng);
    let mut flat = net.encode().0;
    let mut adam = Adam::new(GENOME_LEN, params.learning_rate);
    let mut best: Option<(Check, PrescriptorNet)> = None;
    for epoch in 0..=params.max_epochs {
        if epoch % 25 == 0 || epoch == params.max_epochs {
            let c = check(&net);
            let met = c.met;
            if best.as_ref().is_none_or(|(b, _)| c.score < b.score) {
                best = Some((c, net.clone()));
            }
            if met {
                break;
            }
        }
        if epoch == params.max_epochs {
            break;
        }
        let (loss, grad) = cross_entropy_gradient(&net, &inputs, targets);
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("seed cross-entropy is {loss}")));
        }
        adam.step(&mut flat, &grad);
        net = PrescriptorNet::decode(&Genome(flat.clone()))?;
    }
    let (c, net) = best.expect("epoch 0 is always checked");
    Ok(SeedFit {
        net,
        what,
        achieved: c.value,
        target,
        met: c.met,
    })
}

fn positive_budget(contexts: &[CellContext]) -> Result<Vec<&CellContext>> {
    let kept: Vec<&CellContext> = contexts
        .iter()
        .filter(|c| c.usage.modifiable_budget() > 0.0)
        .collect();
    if kept.is_empty() {
        return Err(Error::Validation(
            "seed training needs contexts with a positive modifiable budget".into(),
        ));
    }
    Ok(kept)
}

pub fn mean_change(net: &PrescriptorNet, contexts: &[&CellContext]) -> f64 {
    let total: f64 = contexts
        .iter()
        .map(|c| {
            let after =
                apply_recommendation(c, &prescribe(net, c)).expect("prescribe keeps budget");
            compute_change(&c.usage, &after)
        })
        .sum();
    total / contexts.len() as f64
}

/// Mean secdf share of the prescribed budget.
pub fn mean_secdf_share(net: &PrescriptorNet, contexts: &[&CellContext]) -> f64 {
    let k = LandType::Secdf
        .modifiable_index()
        .expect("secdf is modifiable");
    contexts.iter().map(|c| net.shares(c)[k]).sum::<f64>() / contexts.len() as f64
}

pub const NOCHANGE_TARGET: f64 = 1.0;
pub const MAXSECDF_TARGET: f64 = 0.99;

/// Trains toward each cell's current modifiable allocation and returns the
/// network with the lowest mean change seen, whether or not it got below
/// [`NOCHANGE_TARGET`].
pub fn fit_seed_nochange(contexts: &[CellContext], params: &SeedTrainingParams) -> Result<SeedFit> {
    let ctxs = positive_budget(contexts)?;
    let targets: Vec<[f64; OUTPUTS]> = ctxs
        .iter()
        .map(|c| {
            let b = c.usage.modifiable_budget();
            c.usage.modifiable().map(|v| v / b)
        })
        .collect();
    train_toward(
        &ctxs,
        &targets,
        params,
        |net| {
            let m = mean_change(net, &ctxs);
            Check {
                met: m < NOCHANGE_TARGET,
                value: m,
                score: m,
            }
        },
        "mean change percent",
        NOCHANGE_TARGET,
    )
}

/// Trains toward putting the whole modifiable budget into secdf; the target
/// is met when every cell gets more than [`MAXSECDF_TARGET`] of its budget.
pub fn fit_seed_maxsecdf(contexts: &[CellContext], params: &SeedTrainingParams) -> Result<SeedFit> {
    let ctxs = positive_budget(contexts)?;
    let k = LandType::Secdf
        .modifiable_index()
        .expect("secdf is modifiable");
    let mut one_hot = [0.0; OUTPUTS];
    one_hot[k] = 1.0;
    let targets = vec![one_hot; ctxs.len()];
    train_toward(
        &ctxs,
        &targets,
        params,
        |net| {
            let worst = ctxs
                .iter()
                .map(|c| net.shares(c)[k])
                .fold(f64::INFINITY, f64::min);
            Check {
                met: worst > MAXSECDF_TARGET,
                value: mean_secdf_share(net, &ctxs),
                score: -worst,
            }
        },
        "mean secdf share",
        MAXSECDF_TARGET,
    )
}

/// Network whose prescriptions change less than [`NOCHANGE_TARGET`] percent
/// of the land on average over `contexts`.
pub fn train_seed_nochange(
    contexts: &[CellContext],
    params: &SeedTrainingParams,
) -> Result<PrescriptorNet> {
    fit_seed_nochange(contexts, params)?.into_net()
}

/// Network that puts more than [`MAXSECDF_TARGET`] of every cell's budget into secdf.
pub fn train_seed_maxsecdf(
    contexts: &[CellContext],
    params: &SeedTrainingParams,
) -> Result<PrescriptorNet> {
    fit_seed_maxsecdf(contexts, params)?.into_net()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::land::LandUseVector;

    fn ctx(usage: LandUseVector) -> CellContext {
        CellContext {
            cell_id: "x".into(),
            lat: 0.0,
            lon: 0.0,
            area: 77_000.0,
            year: 2000,
            usage,
        }
    }

    #[test]
    fn genome_length() {
        assert_eq!(GENOME_LEN, 360);
        assert_eq!(PrescriptorNet::default().encode(), Genome::zeros());
    }

    #[test]
    fn encode_decode_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Genome(
            (0..GENOME_LEN)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        );
        let net = PrescriptorNet::decode(&g).unwrap();
        assert_eq!(net.encode(), g);
        assert_eq!(PrescriptorNet::decode(&net.encode()).unwrap(), net);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let err = PrescriptorNet::decode(&Genome(vec![0.0; 359])).unwrap_err();
        assert!(err.to_string().contains("expected 360"), "{err}");
    }

    #[test]
    fn genome_layout() {
        let mut g = Genome::zeros();
        g.0[0] = 1.0;
        let net = PrescriptorNet::decode(&g).unwrap();
        let mut expected = PrescriptorNet::default();
        expected.w1[0][0] = 1.0;
        assert_eq!(net, expected);

        let mut g = Genome::zeros();
        g.0[GENOME_LEN - 1] = 2.0;
        g.0[INPUTS * HIDDEN] = 3.0;
        let net = PrescriptorNet::decode(&g).unwrap();
        assert_eq!(net.b2[OUTPUTS - 1], 2.0);
        assert_eq!(net.b1[0], 3.0);
    }

    #[test]
    fn zero_net_splits_budget_evenly() {
        let c = ctx(LandUseVector::from_pairs(
            &[
                (LandType::Pastr, 0.4),
                (LandType::Primf, 0.2),
                (LandType::C3ann, 0.2),
            ],
            0.2,
        ));
        let rec = prescribe(&PrescriptorNet::default(), &c);
        for v in rec.targets {
            assert!((v - 0.6 / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_budget_gives_zero_recommendation() {
        let c = ctx(LandUseVector::from_pairs(
            &[(LandType::Primf, 0.7), (LandType::Urban, 0.1)],
            0.2,
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = PrescriptorNet::orthogonal(1.0, &mut rng);
        let rec = prescribe(&net, &c);
        assert_eq!(rec.targets, [0.0; 8]);
        let after = apply_recommendation(&c, &rec).unwrap();
        assert_eq!(compute_change(&c.usage, &after), 0.0);
    }

    #[test]
    fn softmax_shift_invariance() {
        let c = ctx(LandUseVector::from_pairs(
            &[(LandType::Pastr, 0.5), (LandType::Secdn, 0.5)],
            0.0,
        ));
        let z = [0.3, -1.0, 2.0, 0.0, 0.7, -0.2, 1.1, 0.4];
        let a = recommendation_from_logits(&z, &c);
        let b = recommendation_from_logits(&z.map(|v| v + 17.5), &c);
        for (x, y) in a.targets.iter().zip(&b.targets) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_rows_and_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = PrescriptorNet::orthogonal(1.0, &mut rng);
        let w1 = DMatrix::from_fn(INPUTS, HIDDEN, |i, j| net.w1[i][j]);
        let gram = &w1 * w1.transpose();
        let err = (gram - DMatrix::identity(INPUTS, INPUTS)).abs().max();
        assert!(err < 1e-6, "{err}");
        let w2 = DMatrix::from_fn(HIDDEN, OUTPUTS, |j, k| net.w2[j][k]);
        let gram = w2.transpose() * &w2;
        let err = (gram - DMatrix::identity(OUTPUTS, OUTPUTS)).abs().max();
        assert!(err < 1e-6, "{err}");
        assert_eq!(net.b1, [0.0; HIDDEN]);
        assert_eq!(net.b2, [0.0; OUTPUTS]);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = PrescriptorNet::orthogonal(1.0, &mut rng);
        net.b1.iter_mut().for_each(|b| *b = 0.1);
        let c1 = ctx(LandUseVector::from_pairs(
            &[(LandType::Pastr, 0.6), (LandType::C3ann, 0.4)],
            0.0,
        ));
        let c2 = ctx(LandUseVector::from_pairs(
            &[(LandType::Secdf, 0.3), (LandType::Range, 0.5)],
            0.2,
        ));
        let inputs = [PrescriptorNet::inputs(&c1), PrescriptorNet::inputs(&c2)];
        let targets = [
            [0.1, 0.0, 0.3, 0.0, 0.0, 0.0, 0.6, 0.0],
            [0.0, 0.0, 0.0, 0.25, 0.25, 0.0, 0.0, 0.5],
        ];
        let (_, grad) = cross_entropy_gradient(&net, &inputs, &targets);
        let base = net.encode().0;
        for k in (0..GENOME_LEN).step_by(7) {
            let mut p = base.clone();
            p[k] += 1e-5;
            let up = cross_entropy_gradient(
                &PrescriptorNet::decode(&Genome(p.clone())).unwrap(),
                &inputs,
                &targets,
            )
            .0;
            p[k] -= 2e-5;
            let down = cross_entropy_gradient(
                &PrescriptorNet::decode(&Genome(p)).unwrap(),
                &inputs,
                &targets,
            )
            .0;
            let numeric = (up - down) / 2e-5;
            let rel = (grad[k] - numeric).abs() / grad[k].abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-4, "gene {k}: {} vs {numeric}", grad[k]);
        }
    }

    #[test]
    fn prescriptor_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = PrescriptorFile {
            prescriptor_id: "p1".into(),
            run_id: "r".into(),
            generation: 3,
            eluc_mean: Some(-1.5),
            change_mean: Some(12.25),
            area_scale: AREA_SCALE,
            genome: PrescriptorNet::orthogonal(1.0, &mut rng).encode(),
        };
        let back = PrescriptorFile::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
        let bad = PrescriptorFile {
            area_scale: 1e-3,
            ..f.clone()
        };
        assert!(PrescriptorFile::from_json(&bad.to_json().unwrap()).is_err());
    }

    fn small_set() -> Vec<CellContext> {
        (0..12)
            .map(|i| {
                let a = 0.05 + 0.03 * i as f64;
                ctx(LandUseVector::from_pairs(
                    &[
                        (LandType::Pastr, a),
                        (LandType::C3ann, 0.5 - a),
                        (LandType::Secdf, 0.2),
                        (LandType::Primf, 0.2),
                    ],
                    0.1,
                ))
            })
            .collect()
    }

    #[test]
    fn seeds_meet_their_targets_on_a_small_set() {
        let cs = small_set();
        let refs: Vec<&CellContext> = cs.iter().collect();
        let params = SeedTrainingParams::default();
        let keep = train_seed_nochange(&cs, &params).unwrap();
        assert!(mean_change(&keep, &refs) < NOCHANGE_TARGET);
        let secdf = train_seed_maxsecdf(&cs, &params).unwrap();
        let k = LandType::Secdf.modifiable_index().unwrap();
        assert!(cs.iter().all(|c| secdf.shares(c)[k] > MAXSECDF_TARGET));
    }

    #[test]
    fn missed_target_is_reported_with_the_best_network() {
        let cs = small_set();
        let params = SeedTrainingParams {
            max_epochs: 0,
            ..SeedTrainingParams::default()
        };
        let fit = fit_seed_nochange(&cs, &params).unwrap();
        assert!(!fit.met);
        let refs: Vec<&CellContext> = cs.iter().collect();
        assert_eq!(fit.achieved, mean_change(&fit.net, &refs));
        match train_seed_nochange(&cs, &params) {
            Err(Error::SeedTraining {
                achieved, target, ..
            }) => {
                assert_eq!(achieved, fit.achieved);
                assert_eq!(target, NOCHANGE_TARGET);
            }
            other => panic!("expected a seed training error, got {other:?}"),
        }
    }
}
