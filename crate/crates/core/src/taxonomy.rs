//! Species label taxonomy.
//!
//! ```text
//! TARGET ─┬─ SKJ
//!         └─ BET_OR_YFT ─┬─ BET
//!                        └─ YFT
//! NO_TARGET
//! FISH            (no species information)
//! ```

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A leaf class: the labels a fish can finally be assigned.
///
/// The declaration order is the fixed tie-break order used wherever a
/// maximum has to be picked among equal scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Species {
    #[serde(rename = "BET")]
    Bet,
    #[serde(rename = "SKJ")]
    Skj,
    #[serde(rename = "YFT")]
    Yft,
    #[serde(rename = "NO_TARGET")]
    NoTarget,
}

impl Species {
    pub const ALL: [Species; 4] = [Species::Bet, Species::Skj, Species::Yft, Species::NoTarget];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Species> {
        Species::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        SpeciesLabel::from(self).code()
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Species {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<SpeciesLabel>()?.as_species().ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// Any node of the taxonomy, leaves and internal nodes alike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpeciesLabel {
    Bet,
    Skj,
    Yft,
    NoTarget,
    Target,
    BetOrYft,
    Fish,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown species label '{0}'")]
pub struct UnknownLabel(pub String);

impl SpeciesLabel {
    pub const ALL: [SpeciesLabel; 7] = [
        SpeciesLabel::Bet,
        SpeciesLabel::Skj,
        SpeciesLabel::Yft,
        SpeciesLabel::NoTarget,
        SpeciesLabel::Target,
        SpeciesLabel::BetOrYft,
        SpeciesLabel::Fish,
    ];

    pub fn code(self) -> &'static str {
        match self {
            SpeciesLabel::Bet => "BET",
            SpeciesLabel::Skj => "SKJ",
            SpeciesLabel::Yft => "YFT",
            SpeciesLabel::NoTarget => "NO_TARGET",
            SpeciesLabel::Target => "TARGET",
            SpeciesLabel::BetOrYft => "BET_OR_YFT",
            SpeciesLabel::Fish => "FISH",
        }
    }

    /// Parent in the taxonomy; `None` for roots and for `FISH`.
    pub fn parent(self) -> Option<SpeciesLabel> {
        match self {
            SpeciesLabel::Bet | SpeciesLabel::Yft => Some(SpeciesLabel::BetOrYft),
            SpeciesLabel::Skj | SpeciesLabel::BetOrYft => Some(SpeciesLabel::Target),
            SpeciesLabel::Target | SpeciesLabel::NoTarget | SpeciesLabel::Fish => None,
        }
    }

    pub fn is_leaf(self) -> bool {
        self.as_species().is_some()
    }

    pub fn as_species(self) -> Option<Species> {
        match self {
            SpeciesLabel::Bet => Some(Species::Bet),
            SpeciesLabel::Skj => Some(Species::Skj),
            SpeciesLabel::Yft => Some(Species::Yft),
            SpeciesLabel::NoTarget => Some(Species::NoTarget),
            _ => None,
        }
    }

    /// Leaves below this node (the node itself for a leaf, empty for `FISH`).
    pub fn leaves(self) -> Vec<Species> {
        Species::ALL.into_iter().filter(|&s| self.contains(s)).collect()
    }

    /// Whether `species` lies in the subtree rooted here.
    pub fn contains(self, species: Species) -> bool {
        let mut node = Some(SpeciesLabel::from(species));
        while let Some(n) = node {
            if n == self {
                return true;
            }
            node = n.parent();
        }
        false
    }
}

impl From<Species> for SpeciesLabel {
    fn from(s: Species) -> Self {
        match s {
            Species::Bet => SpeciesLabel::Bet,
            Species::Skj => SpeciesLabel::Skj,
            Species::Yft => SpeciesLabel::Yft,
            Species::NoTarget => SpeciesLabel::NoTarget,
        }
    }
}

impl fmt::Display for SpeciesLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SpeciesLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        SpeciesLabel::ALL
            .into_iter()
            .find(|l| l.code().eq_ignore_ascii_case(t))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// One value per leaf species, indexed by [`Species`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerSpecies<T>(pub [T; 4]);

impl<T> PerSpecies<T> {
    pub fn from_fn(mut f: impl FnMut(Species) -> T) -> Self {
        PerSpecies(Species::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Species, &T)> {
        Species::ALL.into_iter().zip(self.0.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(Species, &T) -> U) -> PerSpecies<U> {
        PerSpecies::from_fn(|s| f(s, &self[s]))
    }
}

impl<T> Index<Species> for PerSpecies<T> {
    type Output = T;

    fn index(&self, s: Species) -> &T {
        &self.0[s.index()]
    }
}

impl<T> IndexMut<Species> for PerSpecies<T> {
    fn index_mut(&mut self, s: Species) -> &mut T {
        &mut self.0[s.index()]
    }
}
