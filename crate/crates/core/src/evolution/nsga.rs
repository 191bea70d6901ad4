use std::cmp::Ordering;

use rand::Rng;

use super::{dominates, Individual, Objectives};
use crate::error::{Error, Result};

/// Deb's fast non-dominated sort. Returns fronts of indices into `points`,
/// each front in ascending index order.
pub fn sort_objectives(points: &[Objectives]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

pub fn fast_nondominated_sort(pop: &[Individual]) -> Result<Vec<Vec<usize>>> {
    let points = pop
        .iter()
        .enumerate()
        .map(|(i, ind)| ind.objectives.ok_or(Error::Unevaluated(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(sort_objectives(&points))
}

/// Crowding distance of each point within one front. Boundary points of each
/// objective are infinite; an objective with zero range contributes nothing.
pub fn crowding_distance(front: &[Objectives]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let getters: [fn(&Objectives) -> f64; 2] = [|o| o.eluc_mean, |o| o.change_mean];
    for get in getters {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| get(&front[a]).total_cmp(&get(&front[b])).then(a.cmp(&b)));
        let lo = get(&front[order[0]]);
        let hi = get(&front[order[n - 1]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for k in 1..n - 1 {
            let gap = get(&front[order[k + 1]]) - get(&front[order[k - 1]]);
            dist[order[k]] += gap / range;
        }
    }
    dist
}

/// Sorts the population and writes rank and crowding into every individual.
pub fn assign_rank_and_crowding(pop: &mut [Individual]) -> Result<Vec<Vec<usize>>> {
    let fronts = fast_nondominated_sort(pop)?;
    for (rank, front) in fronts.iter().enumerate() {
        let objs: Vec<Objectives> = front.iter().map(|&i| pop[i].objectives.unwrap()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&objs)) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
    Ok(fronts)
}

/// Lower rank first, then larger crowding distance.
pub fn crowded_order(a: &Individual, b: &Individual) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.total_cmp(&a.crowding))
}

/// Population indices best-first by [`crowded_order`], ties by index.
pub fn ranked_indices(pop: &[Individual]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| crowded_order(&pop[a], &pop[b]).then(a.cmp(&b)));
    idx
}

/// Binary tournament among `pool` (indices into `pop`). Returns the winner's index.
pub fn tournament_select(pop: &[Individual], pool: &[usize], rng: &mut impl Rng) -> usize {
    assert!(!pool.is_empty(), "tournament over an empty pool");
    if pool.len() == 1 {
        return pool[0];
    }
    let i = rng.random_range(0..pool.len());
    let mut j = rng.random_range(0..pool.len() - 1);
    if j >= i {
        j += 1;
    }
    let (a, b) = (pool[i], pool[j]);
    match crowded_order(&pop[a], &pop[b]) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => {
            if rng.random_bool(0.5) {
                a
            } else {
                b
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prescriptor::Genome;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn o(a: f64, b: f64) -> Objectives {
        Objectives::new(a, b)
    }

    fn ind(rank: usize, crowding: f64) -> Individual {
        Individual {
            rank,
            crowding,
            objectives: Some(o(0.0, 0.0)),
            ..Individual::new(String::new(), 0, Genome::zeros())
        }
    }

    #[test]
    fn single_and_chain() {
        assert_eq!(sort_objectives(&[o(1.0, 1.0)]), vec![vec![0]]);
        assert_eq!(
            sort_objectives(&[o(3.0, 3.0), o(1.0, 1.0), o(2.0, 2.0)]),
            vec![vec![1], vec![2], vec![0]]
        );
    }

    #[test]
    fn unevaluated_is_an_error() {
        let pop = vec![Individual::new("a".into(), 0, Genome::zeros())];
        assert!(matches!(
            fast_nondominated_sort(&pop),
            Err(Error::Unevaluated(0))
        ));
    }

    #[test]
    fn crowding_fixtures() {
        assert!(crowding_distance(&[o(0.0, 0.0)])
            .iter()
            .all(|d| d.is_infinite()));
        assert!(crowding_distance(&[o(0.0, 1.0), o(1.0, 0.0)])
            .iter()
            .all(|d| d.is_infinite()));
        let d = crowding_distance(&[o(0.0, 2.0), o(1.0, 1.0), o(2.0, 0.0)]);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert_eq!(d[1], 2.0);
    }

    #[test]
    fn crowding_with_duplicates() {
        // Sorted by either objective the three copies of (1,1) sit between
        // (0,3) and (3,0); the middle copy has identical neighbours.
        let front = [
            o(0.0, 3.0),
            o(1.0, 1.0),
            o(1.0, 1.0),
            o(1.0, 1.0),
            o(3.0, 0.0),
        ];
        let d = crowding_distance(&front);
        assert!(d[0].is_infinite() && d[4].is_infinite());
        // eluc order: 0,1,2,3,4 -> copy 1 gets (1-0)/3, copy 2 gets 0, copy 3 gets (3-1)/3.
        // change order: 4,1,2,3,0 -> copy 1 gets (1-0)/3, copy 2 gets 0, copy 3 gets (3-1)/3.
        assert!((d[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(d[2], 0.0);
        assert!((d[3] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tournament_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pop = vec![ind(0, 1.0), ind(3, 5.0), ind(1, f64::INFINITY), ind(1, 0.5)];
        assert_eq!(tournament_select(&pop, &[1], &mut rng), 1);
        for _ in 0..100 {
            assert_eq!(tournament_select(&pop, &[0, 1], &mut rng), 0);
            assert_eq!(tournament_select(&pop, &[2, 3], &mut rng), 2);
        }
        let tied = vec![ind(0, 1.0), ind(0, 1.0)];
        let wins = (0..1000)
            .filter(|_| tournament_select(&tied, &[0, 1], &mut rng) == 0)
            .count();
        assert!((400..600).contains(&wins), "{wins}");
    }

    #[test]
    fn ranked_order() {
        let pop = vec![ind(1, 3.0), ind(0, 0.1), ind(0, f64::INFINITY), ind(1, 3.0)];
        assert_eq!(ranked_indices(&pop), vec![2, 1, 0, 3]);
    }
}
