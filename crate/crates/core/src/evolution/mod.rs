//! NSGA-II neuroevolution of prescriptor genomes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prescriptor::Genome;

pub mod archive;
pub mod nsga;
pub mod operators;
pub mod run;

pub use archive::{hypervolume, ArchiveEntry, ParetoArchive};
pub use nsga::{crowding_distance, fast_nondominated_sort, tournament_select};
pub use operators::{crossover, init_population, mutate};
pub use run::{evaluate_candidate, evolve, EvolutionResult, GenerationStats};

/// Both objectives are minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    /// tC/ha, mean over the evaluation contexts.
    pub eluc_mean: f64,
    /// Percent of land changed, mean over the evaluation contexts.
    pub change_mean: f64,
}

impl Objectives {
    pub fn new(eluc_mean: f64, change_mean: f64) -> Self {
        Objectives {
            eluc_mean,
            change_mean,
        }
    }
}

/// True iff `a` is no worse than `b` in both objectives and strictly better in one.
pub fn dominates(a: &Objectives, b: &Objectives) -> bool {
    a.eluc_mean <= b.eluc_mean
        && a.change_mean <= b.change_mean
        && (a.eluc_mean < b.eluc_mean || a.change_mean < b.change_mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: String,
    pub generation: usize,
    pub genome: Genome,
    pub objectives: Option<Objectives>,
    pub rank: usize,
    pub crowding: f64,
}

impl Individual {
    pub fn new(id: String, generation: usize, genome: Genome) -> Self {
        Individual {
            id,
            generation,
            genome,
            objectives: None,
            rank: 0,
            crowding: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParentSelection {
    Tournament,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitDistribution {
    Orthogonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub nb_elites: usize,
    pub mutation_probability: f64,
    pub mutation_factor: f64,
    pub remove_population_pct: f64,
    pub parent_selection: ParentSelection,
    pub initialization_distribution: InitDistribution,
    pub initialization_range: f64,
    pub eval_sample_fraction: f64,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population_size: 100,
            generations: 50,
            nb_elites: 10,
            mutation_probability: 0.2,
            mutation_factor: 0.2,
            remove_population_pct: 0.8,
            parent_selection: ParentSelection::Tournament,
            initialization_distribution: InitDistribution::Orthogonal,
            initialization_range: 1.0,
            eval_sample_fraction: 0.01,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.nb_elites == 0 || self.nb_elites > self.population_size {
            return bad(format!(
                "nb_elites {} must be in 1..={}",
                self.nb_elites, self.population_size
            ));
        }
        if !(0.0..1.0).contains(&self.remove_population_pct) {
            return bad(format!(
                "remove_population_pct {} not in [0, 1)",
                self.remove_population_pct
            ));
        }
        if !(0.0..=1.0).contains(&self.mutation_probability) {
            return bad(format!(
                "mutation_probability {} not in [0, 1]",
                self.mutation_probability
            ));
        }
        if !(self.mutation_factor >= 0.0) {
            return bad(format!(
                "mutation_factor {} is negative",
                self.mutation_factor
            ));
        }
        if !(self.eval_sample_fraction > 0.0 && self.eval_sample_fraction <= 1.0) {
            return bad(format!(
                "eval_sample_fraction {} not in (0, 1]",
                self.eval_sample_fraction
            ));
        }
        Ok(())
    }

    /// Individuals kept as the parent pool after removing the worst share.
    pub fn survivors(&self) -> usize {
        let keep = ((1.0 - self.remove_population_pct) * self.population_size as f64 - 1e-9).ceil();
        (keep as usize).max(self.nb_elites).max(1)
    }
}
