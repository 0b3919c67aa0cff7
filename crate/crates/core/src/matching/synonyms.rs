use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::normalize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynonymError {
    #[error("line {0}: expected `canonical<TAB>phrase|phrase|...`")]
    MissingTab(usize),
    #[error("line {0}: empty canonical value")]
    EmptyCanonical(usize),
    #[error("line {0}: empty phrase")]
    EmptyPhrase(usize),
}

/// Groups of equivalent surface phrases keyed by canonical attribute value.
///
/// Every member of a group, canonical value included, finds the whole
/// group. Comparison is over [`normalize`]d text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymTable {
    groups: Vec<Vec<String>>,
    index: HashMap<String, Vec<usize>>,
}

impl SynonymTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert<S: AsRef<str>>(&mut self, canonical: &str, phrases: &[S]) {
        let mut group: Vec<String> = Vec::with_capacity(phrases.len() + 1);
        for p in std::iter::once(canonical).chain(phrases.iter().map(AsRef::as_ref)) {
            let n = normalize(p);
            if !group.contains(&n) {
                group.push(n);
            }
        }
        let id = self.groups.len();
        for member in &group {
            self.index.entry(member.clone()).or_default().push(id);
        }
        self.groups.push(group);
    }

    /// Parses `canonical<TAB>phrase1|phrase2|...` lines. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, SynonymError> {
        let mut table = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (canonical, phrases) = line.split_once('\t').ok_or(SynonymError::MissingTab(line_no))?;
            if canonical.trim().is_empty() {
                return Err(SynonymError::EmptyCanonical(line_no));
            }
            let phrases: Vec<&str> = phrases.split('|').map(str::trim).collect();
            if phrases.iter().any(|p| p.is_empty()) {
                return Err(SynonymError::EmptyPhrase(line_no));
            }
            table.insert(canonical.trim(), &phrases);
        }
        Ok(table)
    }

    /// All normalized phrases equivalent to `value`, including itself.
    pub fn equivalents(&self, value: &str) -> BTreeSet<String> {
        let key = normalize(value);
        let mut out = BTreeSet::new();
        if let Some(ids) = self.index.get(&key) {
            for &id in ids {
                out.extend(self.groups[id].iter().cloned());
            }
        }
        out.insert(key);
        out
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        self.equivalents(a).contains(&normalize(b))
    }

    /// Every normalized phrase in the table.
    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.groups.iter().flatten().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: &str = "# nationality\nGerman\tcitizen of Germany|having German nationality\n\nFrench\tcitizen of France\n";

    #[test]
    fn lookup_is_symmetric_and_case_insensitive() {
        let t = SynonymTable::parse(TABLE).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.are_synonyms("German", "Citizen of GERMANY"));
        assert!(t.are_synonyms("citizen of germany", "german"));
        assert!(t.are_synonyms("having German nationality", "citizen of Germany"));
        assert!(!t.are_synonyms("German", "citizen of France"));
        assert!(t.are_synonyms("Unlisted", "unlisted"));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(SynonymTable::parse("German citizen"), Err(SynonymError::MissingTab(1)));
        assert_eq!(SynonymTable::parse("\tx"), Err(SynonymError::EmptyCanonical(1)));
        assert_eq!(SynonymTable::parse("a\tb||c"), Err(SynonymError::EmptyPhrase(1)));
    }
}
