use serde::{Deserialize, Serialize};

use super::{dominates, Objectives};
use crate::error::{Error, Result};
use crate::prescriptor::Genome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub id: String,
    pub generation: usize,
    pub objectives: Objectives,
    pub genome: Genome,
}

/// Every non-dominated individual seen so far, across generations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    members: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `entry` unless an existing member dominates it or has the same
    /// objectives; drops members the newcomer dominates. Returns whether it
    /// was added.
    pub fn insert(&mut self, entry: ArchiveEntry) -> bool {
        let o = entry.objectives;
        if self
            .members
            .iter()
            .any(|m| m.objectives == o || dominates(&m.objectives, &o))
        {
            return false;
        }
        self.members.retain(|m| !dominates(&o, &m.objectives));
        self.members.push(entry);
        true
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[ArchiveEntry] {
        &self.members
    }

    /// Members by ascending change (and so descending ELUC).
    pub fn sorted_by_change(&self) -> Vec<&ArchiveEntry> {
        let mut v: Vec<&ArchiveEntry> = self.members.iter().collect();
        v.sort_by(|a, b| {
            a.objectives
                .change_mean
                .total_cmp(&b.objectives.change_mean)
                .then_with(|| a.id.cmp(&b.id))
        });
        v
    }

    pub fn objectives(&self) -> Vec<Objectives> {
        self.members.iter().map(|m| m.objectives).collect()
    }

    pub fn hypervolume(&self, reference: Objectives) -> Result<f64> {
        hypervolume(&self.objectives(), reference)
    }
}

/// Area dominated by `front` and bounded by `reference`, both objectives
/// minimized. Dominated points in `front` are allowed and add nothing.
pub fn hypervolume(front: &[Objectives], reference: Objectives) -> Result<f64> {
    for p in front {
        if !(p.eluc_mean < reference.eluc_mean && p.change_mean < reference.change_mean) {
            return Err(Error::Reference(p.eluc_mean, p.change_mean));
        }
    }
    let mut pts: Vec<Objectives> = front.to_vec();
    pts.sort_by(|a, b| {
        a.eluc_mean
            .total_cmp(&b.eluc_mean)
            .then(a.change_mean.total_cmp(&b.change_mean))
    });
    let mut area = 0.0;
    let mut ceiling = reference.change_mean;
    for p in pts {
        if p.change_mean < ceiling {
            area += (reference.eluc_mean - p.eluc_mean) * (ceiling - p.change_mean);
            ceiling = p.change_mean;
        }
    }
    Ok(area)
}
