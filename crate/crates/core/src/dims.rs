//! Registry of the rated aesthetic dimensions.
//!
//! Fifteen dimensions are modelled. Three further dimensions were rated by
//! observers but carry too little between-stimulus variance to learn from;
//! they are kept in the registry, flagged excluded, so that any attempt to
//! train or score on them fails loudly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_TASKS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Objective,
    Subjective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimensionSpec {
    pub id: usize,
    pub name: &'static str,
    /// (negative pole, positive pole)
    pub polarity: (&'static str, &'static str),
    pub category: Category,
    pub excluded: bool,
}

const fn dim(id: usize, name: &'static str, neg: &'static str, pos: &'static str, category: Category) -> DimensionSpec {
    DimensionSpec { id, name, polarity: (neg, pos), category, excluded: false }
}

const fn excluded(id: usize, name: &'static str, neg: &'static str, pos: &'static str) -> DimensionSpec {
    DimensionSpec { id, name, polarity: (neg, pos), category: Category::Subjective, excluded: true }
}

use Category::{Objective, Subjective};

pub const ACTIVE_DIMENSIONS: [DimensionSpec; N_TASKS] = [
    dim(0, "light", "dark", "light", Objective),
    dim(1, "complexity", "simple", "complex", Objective),
    dim(2, "organization", "disordered", "organized", Objective),
    dim(3, "naturalness", "artificial", "natural", Objective),
    dim(4, "color_comfort", "uncomfortable colors", "comfortable colors", Subjective),
    dim(5, "interest", "boring", "interesting", Subjective),
    dim(6, "valence", "unpleasant", "pleasant", Subjective),
    dim(7, "stimulation", "calming", "stimulating", Subjective),
    dim(8, "vitality", "lifeless", "lively", Subjective),
    dim(9, "comfort", "uncomfortable", "comfortable", Subjective),
    dim(10, "relaxation", "tense", "relaxed", Subjective),
    dim(11, "hominess", "unhomely", "homely", Subjective),
    dim(12, "uplift", "depressing", "uplifting", Subjective),
    dim(13, "approachability", "leave", "enter", Subjective),
    dim(14, "explorability", "closed", "explorable", Subjective),
];

/// Rated but never modelled.
pub const EXCLUDED_DIMENSIONS: [DimensionSpec; 3] = [
    excluded(15, "beauty", "ugly", "beautiful"),
    excluded(16, "personalness", "impersonal", "personal"),
    excluded(17, "modernity", "aged", "modern"),
];

/// Every registered dimension, active first.
pub fn registry() -> impl Iterator<Item = &'static DimensionSpec> {
    ACTIVE_DIMENSIONS.iter().chain(EXCLUDED_DIMENSIONS.iter())
}

/// Look up an active dimension; excluded or unknown ids are rejected.
pub fn active(id: usize) -> Result<&'static DimensionSpec> {
    match registry().find(|d| d.id == id) {
        Some(d) if !d.excluded => Ok(d),
        Some(d) => Err(Error::Validation(format!("dimension {} ({}) is excluded from modelling", d.id, d.name))),
        None => Err(Error::Validation(format!("unknown dimension id {id}"))),
    }
}

pub fn by_name(name: &str) -> Result<&'static DimensionSpec> {
    let d = registry().find(|d| d.name == name).ok_or_else(|| Error::Validation(format!("unknown dimension {name:?}")))?;
    active(d.id)
}

/// Active dimension ids of one category, ascending.
pub fn ids_in(category: Category) -> Vec<usize> {
    ACTIVE_DIMENSIONS.iter().filter(|d| d.category == category).map(|d| d.id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_active_four_objective() {
        assert_eq!(ACTIVE_DIMENSIONS.len(), 15);
        for (i, d) in ACTIVE_DIMENSIONS.iter().enumerate() {
            assert_eq!(d.id, i);
            assert!(!d.excluded);
        }
        let names: Vec<_> = ids_in(Objective).iter().map(|&i| ACTIVE_DIMENSIONS[i].name).collect();
        assert_eq!(names, ["light", "complexity", "organization", "naturalness"]);
        assert_eq!(ids_in(Subjective).len(), 11);
    }

    #[test]
    fn excluded_dimensions_are_rejected() {
        for d in EXCLUDED_DIMENSIONS {
            assert!(d.excluded);
            assert!(active(d.id).is_err());
            assert!(by_name(d.name).is_err());
        }
        assert!(active(99).is_err());
        assert_eq!(by_name("hominess").unwrap().id, 11);
    }
}
