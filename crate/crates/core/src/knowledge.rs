//! Keyword dictionaries expanded from one-hop entity relations.
//!
//! A company entity contributes its own name and exchange codes as *main*
//! keywords; entities reachable through the recognised relation types
//! (location, key people, parent companies, subsidiaries, products) become
//! *related* keywords. Tweets mentioning only related keywords still count,
//! but with a reduced effect score downstream.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fold::{contains_on_boundary, fold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationType {
    LocationCountry,
    RegionServed,
    KeyPerson,
    KeyPeople,
    ParentCompany,
    Subsidiary,
    Product,
}

impl RelationType {
    pub const ALL: [RelationType; 7] = [
        RelationType::LocationCountry,
        RelationType::RegionServed,
        RelationType::KeyPerson,
        RelationType::KeyPeople,
        RelationType::ParentCompany,
        RelationType::Subsidiary,
        RelationType::Product,
    ];

    /// Name as it appears in relation snapshot files.
    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::LocationCountry => "LocationCountry",
            RelationType::RegionServed => "RegionServed",
            RelationType::KeyPerson => "KeyPerson",
            RelationType::KeyPeople => "KeyPeople",
            RelationType::ParentCompany => "parentCompany",
            RelationType::Subsidiary => "subsidiary",
            RelationType::Product => "product",
        }
    }

    /// Coarse category the relation belongs to.
    pub fn category(self) -> &'static str {
        match self {
            RelationType::LocationCountry | RelationType::RegionServed => "location",
            RelationType::KeyPerson | RelationType::KeyPeople => "person",
            RelationType::ParentCompany => "parent company",
            RelationType::Subsidiary => "subsidiary",
            RelationType::Product => "product",
        }
    }
}

impl FromStr for RelationType {
    type Err = String;

    /// Accepts snapshot names case-insensitively (`parentCompany`,
    /// `ParentCompany` and `parentcompany` are the same relation).
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        RelationType::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown relation type `{s}`"))
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRelation {
    pub source_entity: String,
    pub relation_type: RelationType,
    pub target_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchKind {
    Main,
    Related,
    None,
}

/// Main and related keywords, keyed by their folded form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordDictionary {
    main: BTreeMap<String, String>,
    related: BTreeMap<String, String>,
}

impl KeywordDictionary {
    /// Original spellings of the main keywords, in folded-key order.
    pub fn main_keywords(&self) -> impl Iterator<Item = &str> {
        self.main.values().map(String::as_str)
    }

    pub fn related_keywords(&self) -> impl Iterator<Item = &str> {
        self.related.values().map(String::as_str)
    }

    /// Rebuilds a dictionary from keyword lists, e.g. a stored expansion.
    pub fn from_lists<'a>(main: impl IntoIterator<Item = &'a str>, related: impl IntoIterator<Item = &'a str>) -> Self {
        let mut dict = Self::default();
        for kw in main {
            let folded = fold(kw.trim());
            if !folded.is_empty() {
                dict.main.entry(folded).or_insert_with(|| kw.trim().to_string());
            }
        }
        for kw in related {
            dict.add_related(kw);
        }
        dict
    }

    /// Adds a related keyword unless it is empty or already a main keyword.
    pub fn add_related(&mut self, keyword: &str) {
        let folded = fold(keyword.trim());
        if !folded.is_empty() && !self.main.contains_key(&folded) {
            self.related.entry(folded).or_insert_with(|| keyword.trim().to_string());
        }
    }

    /// Plain-text listing of main vs related keywords.
    pub fn report(&self, ticker: &str) -> String {
        let mut out = format!("[{ticker}]\n");
        for (label, set) in [("main", &self.main), ("related", &self.related)] {
            out.push_str(label);
            out.push_str(":\n");
            for original in set.values() {
                out.push_str("  ");
                out.push_str(original);
                out.push('\n');
            }
        }
        out
    }
}

/// Builds the keyword dictionary for `entity` from its one-hop relations.
///
/// Relations whose source is a different entity are ignored; only direct
/// neighbours of the company become related keywords.
pub fn expand_keywords(
    entity: &str,
    relations: &[EntityRelation],
    main_extra: &BTreeSet<String>,
) -> Result<KeywordDictionary> {
    let entity = entity.trim();
    if entity.is_empty() {
        return Err(Error::InvalidInput("entity name is empty".into()));
    }
    let mut dict = KeywordDictionary::default();
    for kw in std::iter::once(entity).chain(main_extra.iter().map(|s| s.trim())) {
        let folded = fold(kw);
        if !folded.is_empty() {
            dict.main.entry(folded).or_insert_with(|| kw.to_string());
        }
    }
    let entity_folded = fold(entity);
    for rel in relations
        .iter()
        .filter(|r| fold(r.source_entity.trim()) == entity_folded)
    {
        dict.add_related(&rel.target_label);
    }
    Ok(dict)
}

/// Classifies a text against a dictionary. Main keywords win over related
/// ones; matching is folded and respects token boundaries.
pub fn match_tweet(text: &str, dict: &KeywordDictionary) -> MatchKind {
    let folded = fold(text);
    if dict.main.keys().any(|k| contains_on_boundary(&folded, k)) {
        MatchKind::Main
    } else if dict.related.keys().any(|k| contains_on_boundary(&folded, k)) {
        MatchKind::Related
    } else {
        MatchKind::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(t: RelationType, label: &str) -> EntityRelation {
        EntityRelation {
            source_entity: "Garanti Bank".into(),
            relation_type: t,
            target_label: label.into(),
        }
    }

    fn garan() -> KeywordDictionary {
        let relations = vec![
            rel(RelationType::ParentCompany, "Doğuş Holding"),
            rel(RelationType::ParentCompany, "BBVA"),
            rel(RelationType::KeyPerson, "Ferit Şahenk"),
            rel(RelationType::LocationCountry, "Turkey"),
        ];
        expand_keywords("Garanti Bank", &relations, &BTreeSet::from(["#garan".to_string()])).unwrap()
    }

    #[test]
    fn garan_dictionary() {
        let d = garan();
        let main: BTreeSet<_> = d.main_keywords().collect();
        let related: BTreeSet<_> = d.related_keywords().collect();
        assert_eq!(main, BTreeSet::from(["Garanti Bank", "#garan"]));
        assert_eq!(
            related,
            BTreeSet::from(["Doğuş Holding", "BBVA", "Ferit Şahenk", "Turkey"])
        );
    }

    #[test]
    fn no_relations_and_self_label() {
        let d = expand_keywords("Akbank", &[], &BTreeSet::new()).unwrap();
        assert_eq!(d.related_keywords().count(), 0);

        let r = EntityRelation {
            source_entity: "Akbank".into(),
            relation_type: RelationType::Subsidiary,
            target_label: "AKBANK".into(),
        };
        let d = expand_keywords("Akbank", &[r], &BTreeSet::new()).unwrap();
        assert_eq!(d.related_keywords().count(), 0);
        assert!(expand_keywords("  ", &[], &BTreeSet::new()).is_err());
    }

    #[test]
    fn relations_of_other_entities_ignored() {
        let r = EntityRelation {
            source_entity: "Akbank".into(),
            relation_type: RelationType::KeyPerson,
            target_label: "Suzan Sabancı Dinçer".into(),
        };
        let d = expand_keywords("Garanti Bank", &[r], &BTreeSet::new()).unwrap();
        assert_eq!(d.related_keywords().count(), 0);
    }

    #[test]
    fn match_examples() {
        let d = garan();
        assert_eq!(match_tweet("bugün #garan çok iyi", &d), MatchKind::Main);
        assert_eq!(
            match_tweet("Doğuş Holding yeni yatırım açıkladı", &d),
            MatchKind::Related
        );
        assert_eq!(match_tweet("DOGUS HOLDİNG hisseleri", &d), MatchKind::Related);
        assert_eq!(match_tweet("hava çok güzel", &d), MatchKind::None);
        assert_eq!(match_tweet("garan yükseldi", &d), MatchKind::None);
        assert_eq!(match_tweet("BBVA ve Garanti Bank", &d), MatchKind::Main);
    }

    #[test]
    fn relation_names_parse() {
        assert_eq!(
            "parentCompany".parse::<RelationType>().unwrap(),
            RelationType::ParentCompany
        );
        assert_eq!("KeyPeople".parse::<RelationType>().unwrap(), RelationType::KeyPeople);
        assert!("founder".parse::<RelationType>().is_err());
        for r in RelationType::ALL {
            assert_eq!(r.as_str().parse::<RelationType>().unwrap(), r);
        }
    }

    #[test]
    fn report_lists_both_sets() {
        let r = garan().report("GARAN");
        assert!(r.starts_with("[GARAN]\nmain:\n"));
        assert!(r.contains("related:\n"));
        assert!(r.contains("  Ferit Şahenk\n"));
    }

    fn recase(s: &str, mask: &[bool]) -> String {
        s.chars()
            .zip(mask.iter().cycle())
            .map(|(c, &up)| {
                if up {
                    c.to_uppercase().collect::<String>()
                } else {
                    c.to_string()
                }
            })
            .collect()
    }

    proptest! {
        #[test]
        fn main_precedes_related(prefix in "[a-z ]{0,10}", suffix in "[a-z ]{0,10}", swap in any::<bool>()) {
            let d = garan();
            let (a, b) = if swap { ("bbva", "#garan") } else { ("#garan", "bbva") };
            let text = format!("{prefix} {a} {suffix} {b}");
            prop_assert_eq!(match_tweet(&text, &d), MatchKind::Main);
        }

        #[test]
        fn folding_invariance(text in "[a-zçğıöşü# ]{0,30}( doğuş holding| #garan| bbva)?", mask in prop::collection::vec(any::<bool>(), 1..8)) {
            let d = garan();
            let variant = recase(&text, &mask);
            prop_assert_eq!(match_tweet(&variant, &d), match_tweet(&fold(&text), &d));
            prop_assert_eq!(match_tweet(&text, &d), match_tweet(&fold(&text), &d));
        }

        #[test]
        fn growing_related_keeps_main(extra in "[a-z]{1,8}", text in "[a-z ]{0,20}") {
            let mut d = garan();
            let t = format!("{text} #garan");
            prop_assert_eq!(match_tweet(&t, &d), MatchKind::Main);
            d.add_related(&extra);
            prop_assert_eq!(match_tweet(&t, &d), MatchKind::Main);
        }
    }
}
