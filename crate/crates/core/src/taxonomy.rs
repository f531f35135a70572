//! Learning domains and their ordered categories.
//!
//! The vocabulary is fixed at compile time: three domains and sixteen
//! categories. Categories are identified by lowercase canonical names and
//! carry a 1-based rank inside their domain. Rank is metadata only; the
//! evaluation engine treats every category independently.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    Cognitive,
    Affective,
    Psychomotor,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Cognitive, Domain::Affective, Domain::Psychomotor];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Cognitive => "cognitive",
            Domain::Affective => "affective",
            Domain::Psychomotor => "psychomotor",
        }
    }

    /// Categories of this domain in hierarchical order (rank 1 first).
    pub fn categories(self) -> &'static [Category] {
        use Category::*;
        match self {
            Domain::Cognitive => &[Remember, Understand, Apply, Analyze, Evaluate, Create],
            Domain::Affective => &[
                Receiving,
                Responding,
                Valuing,
                Organization,
                CharacterizationByValue,
            ],
            Domain::Psychomotor => &[
                Imitation,
                Manipulation,
                Precision,
                Articulation,
                Naturalization,
            ],
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        Domain::ALL
            .into_iter()
            .find(|d| d.name() == wanted)
            .ok_or_else(|| TaxonomyError::UnknownDomain(s.trim().to_owned()))
    }
}

/// One of the sixteen evaluation categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Remember,
    Understand,
    Apply,
    Analyze,
    Evaluate,
    Create,
    Receiving,
    Responding,
    Valuing,
    Organization,
    CharacterizationByValue,
    Imitation,
    Manipulation,
    Precision,
    Articulation,
    Naturalization,
}

impl Category {
    pub const ALL: [Category; 16] = [
        Category::Remember,
        Category::Understand,
        Category::Apply,
        Category::Analyze,
        Category::Evaluate,
        Category::Create,
        Category::Receiving,
        Category::Responding,
        Category::Valuing,
        Category::Organization,
        Category::CharacterizationByValue,
        Category::Imitation,
        Category::Manipulation,
        Category::Precision,
        Category::Articulation,
        Category::Naturalization,
    ];

    pub fn domain(self) -> Domain {
        use Category::*;
        match self {
            Remember | Understand | Apply | Analyze | Evaluate | Create => Domain::Cognitive,
            Receiving | Responding | Valuing | Organization | CharacterizationByValue => {
                Domain::Affective
            }
            Imitation | Manipulation | Precision | Articulation | Naturalization => {
                Domain::Psychomotor
            }
        }
    }

    /// Canonical lowercase identifier.
    pub fn name(self) -> &'static str {
        use Category::*;
        match self {
            Remember => "remember",
            Understand => "understand",
            Apply => "apply",
            Analyze => "analyze",
            Evaluate => "evaluate",
            Create => "create",
            Receiving => "receiving",
            Responding => "responding",
            Valuing => "valuing",
            Organization => "organization",
            CharacterizationByValue => "characterization-by-value",
            Imitation => "imitation",
            Manipulation => "manipulation",
            Precision => "precision",
            Articulation => "articulation",
            Naturalization => "naturalization",
        }
    }

    /// 1-based position inside the domain hierarchy.
    pub fn rank(self) -> u8 {
        let siblings = self.domain().categories();
        let pos = siblings
            .iter()
            .position(|c| *c == self)
            .expect("category listed in its own domain");
        pos as u8 + 1
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_category(s)
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        parse_category(&raw).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Domain {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
}

/// A domain together with its ordered categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DomainEntry {
    pub domain: Domain,
    pub categories: Vec<CategoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryEntry {
    pub name: Category,
    pub rank: u8,
}

/// The complete vocabulary, domains in fixed order.
pub fn domains() -> Vec<DomainEntry> {
    Domain::ALL
        .into_iter()
        .map(|domain| DomainEntry {
            domain,
            categories: domain
                .categories()
                .iter()
                .map(|&c| CategoryEntry {
                    name: c,
                    rank: c.rank(),
                })
                .collect(),
        })
        .collect()
}

/// Case-insensitive lookup; surrounding whitespace is ignored.
pub fn parse_category(text: &str) -> Result<Category, TaxonomyError> {
    let wanted = text.trim().to_ascii_lowercase();
    Category::ALL
        .into_iter()
        .find(|c| c.name() == wanted)
        .ok_or_else(|| TaxonomyError::UnknownCategory(text.trim().to_owned()))
}

pub fn expand_domain(domain: Domain) -> std::collections::BTreeSet<Category> {
    domain.categories().iter().copied().collect()
}

/// Either a single category or a whole domain, as accepted in authoring
/// documents ("apply", "cognitive").
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Selector {
    Category(Category),
    Domain(Domain),
}

impl Selector {
    pub fn expand(self) -> Vec<Category> {
        match self {
            Selector::Category(c) => vec![c],
            Selector::Domain(d) => d.categories().to_vec(),
        }
    }
}

impl FromStr for Selector {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(c) = parse_category(s) {
            return Ok(Selector::Category(c));
        }
        s.parse::<Domain>()
            .map(Selector::Domain)
            .map_err(|_| TaxonomyError::UnknownCategory(s.trim().to_owned()))
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Category(c) => c.fmt(f),
            Selector::Domain(d) => d.fmt(f),
        }
    }
}

impl Serialize for Selector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Selector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

impl From<Category> for Selector {
    fn from(c: Category) -> Self {
        Selector::Category(c)
    }
}

impl From<Domain> for Selector {
    fn from(d: Domain) -> Self {
        Selector::Domain(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn cognitive_has_six_ending_in_create() {
        let all = domains();
        let cognitive = &all[0];
        assert_eq!(cognitive.domain, Domain::Cognitive);
        assert_eq!(cognitive.categories.len(), 6);
        assert_eq!(cognitive.categories.last().unwrap().name, Category::Create);
    }

    #[test]
    fn psychomotor_rank_one_is_imitation() {
        let all = domains();
        let psychomotor = all.iter().find(|d| d.domain == Domain::Psychomotor).unwrap();
        assert_eq!(psychomotor.categories[0].name.name(), "imitation");
        assert_eq!(psychomotor.categories[0].rank, 1);
    }

    #[test]
    fn sixteen_categories_total() {
        let n: usize = domains().iter().map(|d| d.categories.len()).sum();
        assert_eq!(n, 16);
        assert_eq!(domains(), domains());
    }

    #[test]
    fn parse_examples() {
        let p = parse_category("Precision").unwrap();
        assert_eq!((p.domain(), p.name(), p.rank()), (Domain::Psychomotor, "precision", 3));
        let r = parse_category("  remember ").unwrap();
        assert_eq!((r.domain(), r.rank()), (Domain::Cognitive, 1));
        assert_eq!(
            parse_category("wisdom"),
            Err(TaxonomyError::UnknownCategory("wisdom".into()))
        );
    }

    #[test]
    fn expand_examples() {
        assert_eq!(expand_domain(Domain::Affective).len(), 5);
        assert!(expand_domain(Domain::Cognitive).contains(&Category::Apply));
        let union: BTreeSet<Category> = Domain::ALL.into_iter().flat_map(expand_domain).collect();
        assert_eq!(union.len(), 16);
    }

    #[test]
    fn partition_round_trip_and_contiguous_ranks() {
        for c in Category::ALL {
            assert!(expand_domain(c.domain()).contains(&c));
            assert_eq!(parse_category(&c.to_string()).unwrap(), c);
            assert_eq!(parse_category(&c.name().to_uppercase()).unwrap(), c);
        }
        for d in Domain::ALL {
            let ranks: Vec<u8> = d.categories().iter().map(|c| c.rank()).collect();
            let expected: Vec<u8> = (1..=d.categories().len() as u8).collect();
            assert_eq!(ranks, expected);
        }
    }

    #[test]
    fn selector_prefers_categories_then_domains() {
        assert_eq!("apply".parse::<Selector>().unwrap(), Selector::Category(Category::Apply));
        assert_eq!(
            " Cognitive".parse::<Selector>().unwrap(),
            Selector::Domain(Domain::Cognitive)
        );
        assert_eq!(Selector::Domain(Domain::Psychomotor).expand().len(), 5);
        assert!("wisdom".parse::<Selector>().is_err());
    }

    #[test]
    fn serde_uses_canonical_names() {
        let json = serde_json::to_string(&Category::CharacterizationByValue).unwrap();
        assert_eq!(json, "\"characterization-by-value\"");
        let back: Category = serde_json::from_str("\"Valuing\"").unwrap();
        assert_eq!(back, Category::Valuing);
    }
}
