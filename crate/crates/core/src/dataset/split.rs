use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Corpus, TrialRecord};

/// The seven combinations of held-out elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum HoldoutCase {
    Cup = 1,
    Container = 2,
    Material = 3,
    CupContainer = 4,
    ContainerMaterial = 5,
    CupMaterial = 6,
    All = 7,
}

impl HoldoutCase {
    pub const ALL: [HoldoutCase; 7] = [
        HoldoutCase::Cup,
        HoldoutCase::Container,
        HoldoutCase::Material,
        HoldoutCase::CupContainer,
        HoldoutCase::ContainerMaterial,
        HoldoutCase::CupMaterial,
        HoldoutCase::All,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self> {
        HoldoutCase::ALL
            .get(usize::from(id).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("case id must be 1..=7, got {id}")))
    }

    /// `(cup, container, material)` flags for the designated elements.
    pub fn designated(self) -> (bool, bool, bool) {
        match self {
            HoldoutCase::Cup => (true, false, false),
            HoldoutCase::Container => (false, true, false),
            HoldoutCase::Material => (false, false, true),
            HoldoutCase::CupContainer => (true, true, false),
            HoldoutCase::ContainerMaterial => (false, true, true),
            HoldoutCase::CupMaterial => (true, false, true),
            HoldoutCase::All => (true, true, true),
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            HoldoutCase::Cup => "cup",
            HoldoutCase::Container => "container",
            HoldoutCase::Material => "material",
            HoldoutCase::CupContainer => "cup and container",
            HoldoutCase::ContainerMaterial => "container and material",
            HoldoutCase::CupMaterial => "cup and material",
            HoldoutCase::All => "cup and container and material",
        }
    }
}

impl TryFrom<u8> for HoldoutCase {
    type Error = Error;
    fn try_from(id: u8) -> Result<Self> {
        HoldoutCase::from_id(id)
    }
}

impl From<HoldoutCase> for u8 {
    fn from(c: HoldoutCase) -> u8 {
        c.id()
    }
}

impl fmt::Display for HoldoutCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case {} (unseen {})", self.id(), self.description())
    }
}

/// Identities treated as unseen for each element type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnseenSet {
    pub cups: BTreeSet<String>,
    pub containers: BTreeSet<String>,
    pub materials: BTreeSet<String>,
}

impl Default for UnseenSet {
    /// Matches the default generator inventory: one cup, three containers and ice.
    fn default() -> Self {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        UnseenSet {
            cups: set(&["cup6"]),
            containers: set(&["ctn8", "ctn9", "ctn10"]),
            materials: set(&["ice"]),
        }
    }
}

enum Side {
    Test,
    Train,
    Mixed,
}

fn classify(trial: &TrialRecord, case: HoldoutCase, unseen: &UnseenSet) -> Side {
    let (cup, ctn, mat) = case.designated();
    let mut hits = Vec::with_capacity(3);
    if cup {
        hits.push(unseen.cups.contains(&trial.labels.cup));
    }
    if ctn {
        hits.push(unseen.containers.contains(&trial.labels.container));
    }
    if mat {
        hits.push(unseen.materials.contains(&trial.labels.material));
    }
    if hits.iter().all(|&h| h) {
        Side::Test
    } else if hits.iter().all(|&h| !h) {
        Side::Train
    } else {
        Side::Mixed
    }
}

/// Splits into `(train, test)`. Test trials use every designated unseen
/// element, train trials use none of them, and trials in between are dropped.
pub fn holdout_split(
    corpus: &Corpus,
    case: HoldoutCase,
    unseen: &UnseenSet,
) -> Result<(Corpus, Corpus)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for trial in &corpus.trials {
        match classify(trial, case, unseen) {
            Side::Test => test.push(trial.clone()),
            Side::Train => train.push(trial.clone()),
            Side::Mixed => {}
        }
    }
    if test.is_empty() {
        return Err(Error::InvalidArgument(format!("{case}: no test trials")));
    }
    if train.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{case}: no training trials"
        )));
    }
    Ok((Corpus::new(train), Corpus::new(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize_corpus, GeneratorSpec};

    #[test]
    fn case_ids_round_trip() {
        for case in HoldoutCase::ALL {
            assert_eq!(HoldoutCase::from_id(case.id()).unwrap(), case);
        }
        assert!(HoldoutCase::from_id(0).is_err());
        assert!(HoldoutCase::from_id(8).is_err());
    }

    #[test]
    fn splits_respect_designations() {
        let corpus = synthesize_corpus(&GeneratorSpec::default(), 1).unwrap();
        let unseen = UnseenSet::default();
        for case in HoldoutCase::ALL {
            let (train, test) = holdout_split(&corpus, case, &unseen).unwrap();
            let (cup, ctn, mat) = case.designated();
            for t in &test.trials {
                assert!(!cup || unseen.cups.contains(&t.labels.cup));
                assert!(!ctn || unseen.containers.contains(&t.labels.container));
                assert!(!mat || unseen.materials.contains(&t.labels.material));
            }
            for t in &train.trials {
                assert!(!cup || !unseen.cups.contains(&t.labels.cup));
                assert!(!ctn || !unseen.containers.contains(&t.labels.container));
                assert!(!mat || !unseen.materials.contains(&t.labels.material));
            }
            assert!(train.len() + test.len() <= corpus.len());
            let ids: BTreeSet<_> = train.trials.iter().map(|t| &t.id).collect();
            assert!(test.trials.iter().all(|t| !ids.contains(&t.id)));
        }
        let (train, test) = holdout_split(&corpus, HoldoutCase::Cup, &unseen).unwrap();
        assert_eq!(train.len() + test.len(), corpus.len());
        assert_eq!(test.len(), 30);
        let (_, test7) = holdout_split(&corpus, HoldoutCase::All, &unseen).unwrap();
        assert_eq!(test7.len(), 3);
    }

    #[test]
    fn impossible_split_rejected() {
        let corpus = synthesize_corpus(&GeneratorSpec::default(), 1).unwrap();
        let unseen = UnseenSet {
            cups: ["nope".to_string()].into(),
            ..UnseenSet::default()
        };
        assert!(holdout_split(&corpus, HoldoutCase::Cup, &unseen).is_err());
    }
}
