use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nsga::{assign_rank_and_crowding, ranked_indices, tournament_select};
use super::operators::{crossover, init_population, mutate};
use super::{ArchiveEntry, EvolutionConfig, Individual, Objectives, ParetoArchive};
use crate::error::{Error, Result};
use crate::land::{apply_recommendation, compute_change, delta_of, CellContext};
use crate::predictors::ElucModel;
use crate::prescriptor::{prescribe, Genome, PrescriptorFile, PrescriptorNet, AREA_SCALE};

/// Change objective bound of the hypervolume reference point.
pub const HV_CHANGE_REF: f64 = 101.0;

/// Prescribes for every context and averages predicted ELUC and land change.
pub fn evaluate_candidate(
    genome: &Genome,
    contexts: &[CellContext],
    predictor: &dyn ElucModel,
) -> Result<Objectives> {
    if contexts.is_empty() {
        return Err(Error::Validation("evaluation set is empty".into()));
    }
    let net = PrescriptorNet::decode(genome)?;
    evaluate_with(contexts, predictor, |ctx| Ok(prescribe(&net, ctx)))
}

/// Shared evaluation loop for anything that produces a recommendation per cell.
pub fn evaluate_with(
    contexts: &[CellContext],
    predictor: &dyn ElucModel,
    mut recommend: impl FnMut(&CellContext) -> Result<crate::land::Recommendation>,
) -> Result<Objectives> {
    let mut eluc = 0.0;
    let mut change = 0.0;
    for ctx in contexts {
        let rec = recommend(ctx)?;
        let after = apply_recommendation(ctx, &rec)?;
        let delta = delta_of(&ctx.usage, &after);
        eluc += predictor.predict(ctx, &delta)?;
        change += compute_change(&ctx.usage, &after);
    }
    let n = contexts.len() as f64;
    Ok(Objectives::new(eluc / n, change / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_eluc: f64,
    pub mean_eluc: f64,
    pub best_change: f64,
    pub mean_change: f64,
    pub archive_size: usize,
    pub archive_hypervolume: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub run_id: String,
    pub population: Vec<Individual>,
    pub archive: ParetoArchive,
    pub stats: Vec<GenerationStats>,
}

fn evaluate_pending(
    pop: &mut [Individual],
    contexts: &[CellContext],
    predictor: &dyn ElucModel,
) -> Result<()> {
    let results: Vec<(usize, Objectives)> = pop
        .par_iter()
        .enumerate()
        .filter(|(_, ind)| ind.objectives.is_none())
        .map(|(i, ind)| evaluate_candidate(&ind.genome, contexts, predictor).map(|o| (i, o)))
        .collect::<Result<_>>()?;
    for (i, o) in results {
        pop[i].objectives = Some(o);
    }
    Ok(())
}

fn record(
    generation: usize,
    pop: &[Individual],
    fresh: &[usize],
    archive: &mut ParetoArchive,
    max_eluc_seen: &mut f64,
) -> Result<GenerationStats> {
    for &i in fresh {
        let ind = &pop[i];
        let o = ind.objectives.ok_or(Error::Unevaluated(i))?;
        *max_eluc_seen = max_eluc_seen.max(o.eluc_mean);
        archive.insert(ArchiveEntry {
            id: ind.id.clone(),
            generation: ind.generation,
            objectives: o,
            genome: ind.genome.clone(),
        });
    }
    let objs: Vec<Objectives> = pop.iter().filter_map(|i| i.objectives).collect();
    let n = objs.len() as f64;
    let reference = Objectives::new(*max_eluc_seen + 1.0, HV_CHANGE_REF);
    Ok(GenerationStats {
        generation,
        best_eluc: objs
            .iter()
            .map(|o| o.eluc_mean)
            .fold(f64::INFINITY, f64::min),
        mean_eluc: objs.iter().map(|o| o.eluc_mean).sum::<f64>() / n,
        best_change: objs
            .iter()
            .map(|o| o.change_mean)
            .fold(f64::INFINITY, f64::min),
        mean_change: objs.iter().map(|o| o.change_mean).sum::<f64>() / n,
        archive_size: archive.len(),
        archive_hypervolume: archive.hypervolume(reference)?,
    })
}

fn individual_id(generation: usize, k: usize) -> String {
    format!("g{generation:03}_i{k:03}")
}

/// Runs NSGA-II for `cfg.generations` generations after the initial one.
///
/// Each generation keeps the `nb_elites` best individuals unchanged, uses the
/// best `1 - remove_population_pct` share as the parent pool, and fills the
/// rest of the population with mutated uniform-crossover children of
/// tournament winners. All randomness comes from one RNG advanced in the
/// sequential loop; evaluation is parallel and pure.
pub fn evolve(
    cfg: &EvolutionConfig,
    contexts: &[CellContext],
    predictor: &dyn ElucModel,
    seeds: &[Genome],
) -> Result<EvolutionResult> {
    cfg.validate()?;
    if contexts.is_empty() {
        return Err(Error::Validation("evaluation set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop: Vec<Individual> = init_population(cfg, seeds, &mut rng)?
        .into_iter()
        .enumerate()
        .map(|(k, g)| Individual::new(individual_id(0, k), 0, g))
        .collect();
    evaluate_pending(&mut pop, contexts, predictor)?;
    assign_rank_and_crowding(&mut pop)?;

    let mut archive = ParetoArchive::new();
    let mut max_eluc_seen = f64::NEG_INFINITY;
    let all: Vec<usize> = (0..pop.len()).collect();
    let mut stats = vec![record(0, &pop, &all, &mut archive, &mut max_eluc_seen)?];

    for generation in 1..=cfg.generations {
        let order = ranked_indices(&pop);
        let pool = &order[..cfg.survivors().min(order.len())];
        let mut next: Vec<Individual> = order[..cfg.nb_elites]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();
        let mut fresh = Vec::with_capacity(cfg.population_size - next.len());
        let mut k = 0;
        while next.len() < cfg.population_size {
            let a = tournament_select(&pop, pool, &mut rng);
            let b = tournament_select(&pop, pool, &mut rng);
            let child = crossover(&pop[a].genome, &pop[b].genome, &mut rng)?;
            let child = mutate(
                &child,
                cfg.mutation_probability,
                cfg.mutation_factor,
                &mut rng,
            );
            fresh.push(next.len());
            next.push(Individual::new(
                individual_id(generation, k),
                generation,
                child,
            ));
            k += 1;
        }
        pop = next;
        evaluate_pending(&mut pop, contexts, predictor)?;
        assign_rank_and_crowding(&mut pop)?;
        stats.push(record(
            generation,
            &pop,
            &fresh,
            &mut archive,
            &mut max_eluc_seen,
        )?);
    }

    Ok(EvolutionResult {
        run_id: format!("run-{}", cfg.seed),
        population: pop,
        archive,
        stats,
    })
}

impl EvolutionResult {
    pub fn prescriptor_files(&self) -> Vec<PrescriptorFile> {
        self.archive
            .sorted_by_change()
            .into_iter()
            .map(|m| PrescriptorFile {
                prescriptor_id: m.id.clone(),
                run_id: self.run_id.clone(),
                generation: m.generation,
                eluc_mean: Some(m.objectives.eluc_mean),
                change_mean: Some(m.objectives.change_mean),
                area_scale: AREA_SCALE,
                genome: m.genome.clone(),
            })
            .collect()
    }

    pub fn pareto_csv(&self) -> String {
        let mut out = String::from("id,eluc_mean,change_mean\n");
        for m in self.archive.sorted_by_change() {
            let _ = writeln!(
                out,
                "{},{},{}",
                m.id, m.objectives.eluc_mean, m.objectives.change_mean
            );
        }
        out
    }

    pub fn stats_csv(&self) -> String {
        let mut out = String::from(
            "generation,best_eluc,mean_eluc,best_change,mean_change,archive_size,archive_hypervolume\n",
        );
        for s in &self.stats {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.generation,
                s.best_eluc,
                s.mean_eluc,
                s.best_change,
                s.mean_change,
                s.archive_size,
                s.archive_hypervolume
            );
        }
        out
    }

    /// Writes `config.json`, `generation_stats.csv`, `pareto.csv` and one
    /// prescriptor JSON per archive member under `archive/`.
    pub fn write_dir(&self, cfg: &EvolutionConfig, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let archive_dir = dir.join("archive");
        std::fs::create_dir_all(&archive_dir).map_err(|e| Error::io(&archive_dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("config.json", serde_json::to_string_pretty(cfg)? + "\n")?;
        write("generation_stats.csv", self.stats_csv())?;
        write("pareto.csv", self.pareto_csv())?;
        for f in self.prescriptor_files() {
            f.save(archive_dir.join(format!("{}.json", f.prescriptor_id)))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::SynthOracle;
    use crate::land::{LandType, LandUseVector};
    use crate::predictors::{FeatureSchema, LinRegModel, ModelMeta};

    fn contexts(n: usize) -> Vec<CellContext> {
        (0..n)
            .map(|i| {
                let a = 0.1 + 0.8 * (i as f64 / n as f64);
                CellContext {
                    cell_id: format!("c{i}"),
                    lat: 0.0,
                    lon: 0.0,
                    area: 60_000.0,
                    year: 2000,
                    usage: LandUseVector::from_pairs(
                        &[
                            (LandType::C3ann, a * 0.9),
                            (LandType::Pastr, (1.0 - a) * 0.9),
                        ],
                        0.1,
                    ),
                }
            })
            .collect()
    }

    fn zero_linreg(intercept: f64) -> LinRegModel {
        LinRegModel {
            schema: FeatureSchema::deltas_only(),
            weights: vec![0.0; 12],
            intercept,
            effective_rank: 12,
            rank_deficient: false,
            meta: ModelMeta::default(),
        }
    }

    #[test]
    fn zero_budget_cell() {
        let ctx = CellContext {
            usage: LandUseVector::from_pairs(
                &[(LandType::Primf, 0.6), (LandType::Urban, 0.4)],
                0.0,
            ),
            ..contexts(1).remove(0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = PrescriptorNet::orthogonal(1.0, &mut rng).encode();
        let o = evaluate_candidate(&g, &[ctx], &zero_linreg(2.5)).unwrap();
        assert_eq!(o, Objectives::new(2.5, 0.0));
    }

    #[test]
    fn evaluation_is_pure() {
        let ctxs = contexts(20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = PrescriptorNet::orthogonal(1.0, &mut rng).encode();
        let a = evaluate_candidate(&g, &ctxs, &SynthOracle::default()).unwrap();
        let b = evaluate_candidate(&g, &ctxs, &SynthOracle::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_generations_archives_first_front() {
        let cfg = EvolutionConfig {
            population_size: 20,
            generations: 0,
            nb_elites: 2,
            ..EvolutionConfig::default()
        };
        let ctxs = contexts(10);
        let r = evolve(&cfg, &ctxs, &SynthOracle::default(), &[]).unwrap();
        assert_eq!(r.stats.len(), 1);
        let objs: Vec<Objectives> = r.population.iter().map(|i| i.objectives.unwrap()).collect();
        let front0 = super::super::nsga::sort_objectives(&objs).remove(0);
        let mut expected: Vec<Objectives> = front0.iter().map(|&i| objs[i]).collect();
        let mut got = r.archive.objectives();
        let key = |o: &Objectives| (o.change_mean.to_bits(), o.eluc_mean.to_bits());
        expected.sort_by_key(key);
        expected.dedup();
        got.sort_by_key(key);
        assert_eq!(got, expected);
    }

    #[test]
    fn small_run_invariants() {
        let cfg = EvolutionConfig {
            population_size: 30,
            generations: 8,
            nb_elites: 4,
            seed: 3,
            ..EvolutionConfig::default()
        };
        let ctxs = contexts(15);
        let r = evolve(&cfg, &ctxs, &SynthOracle::default(), &[]).unwrap();
        assert_eq!(r.stats.len(), 9);
        assert_eq!(r.population.len(), 30);
        for w in r.stats.windows(2) {
            assert!(w[1].archive_hypervolume >= w[0].archive_hypervolume);
        }
        let again = evolve(&cfg, &ctxs, &SynthOracle::default(), &[]).unwrap();
        assert_eq!(r.pareto_csv(), again.pareto_csv());
        assert_eq!(r.stats, again.stats);
    }
}
