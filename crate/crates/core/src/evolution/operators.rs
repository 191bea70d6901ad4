use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::EvolutionConfig;
use crate::error::{Error, Result};
use crate::prescriptor::{Genome, PrescriptorNet};

/// Uniform crossover: each gene comes from either parent with probability 1/2.
pub fn crossover(a: &Genome, b: &Genome, rng: &mut impl Rng) -> Result<Genome> {
    if a.len() != b.len() {
        return Err(Error::GenomeLength {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(Genome(
        a.0.iter()
            .zip(&b.0)
            .map(|(&x, &y)| if rng.random_bool(0.5) { x } else { y })
            .collect(),
    ))
}

/// Multiplicative Gaussian noise: with `probability`, a gene becomes
/// `g * (1 + N(0, factor))`.
pub fn mutate(genome: &Genome, probability: f64, factor: f64, rng: &mut impl Rng) -> Genome {
    Genome(
        genome
            .0
            .iter()
            .map(|&g| {
                if rng.random_bool(probability) {
                    let z: f64 = rng.sample(StandardNormal);
                    g * (1.0 + factor * z)
                } else {
                    g
                }
            })
            .collect(),
    )
}

/// Seeds first, verbatim; the rest are orthogonally initialized networks.
pub fn init_population(
    cfg: &EvolutionConfig,
    seeds: &[Genome],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Genome>> {
    if seeds.len() > cfg.population_size {
        return Err(Error::Validation(format!(
            "{} seeds do not fit a population of {}",
            seeds.len(),
            cfg.population_size
        )));
    }
    let mut pop: Vec<Genome> = Vec::with_capacity(cfg.population_size);
    for s in seeds {
        PrescriptorNet::decode(s)?;
        pop.push(s.clone());
    }
    while pop.len() < cfg.population_size {
        pop.push(PrescriptorNet::orthogonal(cfg.initialization_range, rng).encode());
    }
    Ok(pop)
}
