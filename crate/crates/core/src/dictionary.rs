//! Canonical antibiotic vocabulary.
//!
//! Lab exports spell the same drug many ways: WHONET-style short codes
//! (`FOX`), full names (`cefoxitin`), local synonyms (`cefoxitina`), in any
//! case and occasionally with Romanian diacritics. The dictionary resolves a
//! free-text token to exactly one canonical code, or to `Unknown`, never to
//! two codes, and never by substring. The pseudo-token `MRSA` resolves to an
//! explicit flag rather than a drug, so it can never enter an S/I/R profile.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DictionaryError {
    #[error("synonym `{token}` maps to both {first} and {second}")]
    DuplicateSynonym {
        token: String,
        first: String,
        second: String,
    },
    #[error("malformed dictionary line {line}: {detail}")]
    MalformedLine { line: usize, detail: String },
    #[error("empty token")]
    EmptyToken,
}

/// Administration route of a drug.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Parenteral,
    Oral,
    Both,
}

impl Route {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parenteral" => Some(Route::Parenteral),
            "oral" => Some(Route::Oral),
            "both" | "" => Some(Route::Both),
            _ => None,
        }
    }
}

/// One drug: canonical code, full name, and every accepted spelling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntibioticEntry {
    pub code: String,
    pub canonical_name: String,
    pub synonyms: BTreeSet<String>,
    pub drug_class: String,
    pub route: Route,
}

impl AntibioticEntry {
    fn new(code: &str, name: &str, synonyms: &[&str], class: &str, route: Route) -> Self {
        Self {
            code: code.to_string(),
            canonical_name: name.to_string(),
            synonyms: synonyms.iter().map(|s| s.to_string()).collect(),
            drug_class: class.to_string(),
            route,
        }
    }

    /// Code, canonical name and declared synonyms: everything that resolves here.
    fn all_tokens(&self) -> impl Iterator<Item = (&str, MatchKind)> {
        [
            (self.code.as_str(), MatchKind::Code),
            (self.canonical_name.as_str(), MatchKind::Name),
        ]
        .into_iter()
        .chain(
            self.synonyms
                .iter()
                .map(|s| (s.as_str(), MatchKind::Synonym)),
        )
    }
}

/// How a token matched: against the code, the canonical name, a declared
/// synonym, or an explicit flag pseudo-entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Code,
    Name,
    Synonym,
    ExplicitFlag,
}

impl fmt::Display for MatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MatchKind::Code => "code",
            MatchKind::Name => "name",
            MatchKind::Synonym => "synonym",
            MatchKind::ExplicitFlag => "explicit_flag",
        };
        f.write_str(s)
    }
}

/// Result of resolving one token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    /// The token is a drug; `code` is canonical.
    Drug {
        code: String,
        kind: MatchKind,
    },
    /// The token is a reserved flag such as `MRSA`, not a drug.
    ExplicitFlag {
        flag: String,
    },
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum IndexTarget {
    Drug { code: String, kind: MatchKind },
    Flag { flag: String },
}

impl IndexTarget {
    fn described(&self) -> String {
        match self {
            IndexTarget::Drug { code, .. } => code.clone(),
            IndexTarget::Flag { flag } => format!("flag {flag}"),
        }
    }
}

/// Immutable token-to-code index. Safe to share across threads once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary {
    entries: BTreeMap<String, AntibioticEntry>,
    flags: BTreeMap<String, String>,
    index: BTreeMap<String, IndexTarget>,
}

/// Case-fold, trim, and strip diacritics so `Ceftazidimă` and `ceftazidima`
/// index identically. Romanian lab text motivates the ASCII folding.
pub fn fold_token(token: &str) -> String {
    token
        .trim()
        .chars()
        .flat_map(|c| c.to_lowercase())
        .map(|c| match c {
            'ă' | 'â' | 'á' | 'à' | 'ä' => 'a',
            'é' | 'è' | 'ê' | 'ë' => 'e',
            'î' | 'í' | 'ì' | 'ï' => 'i',
            'ó' | 'ò' | 'ô' | 'ö' => 'o',
            'ú' | 'ù' | 'û' | 'ü' => 'u',
            'ș' | 'ş' => 's',
            'ț' | 'ţ' => 't',
            _ => c,
        })
        .collect()
}

impl Dictionary {
    fn build(
        entries: Vec<AntibioticEntry>,
        flags: Vec<(String, String)>,
    ) -> Result<Self, DictionaryError> {
        let mut dict = Dictionary {
            entries: BTreeMap::new(),
            flags: BTreeMap::new(),
            index: BTreeMap::new(),
        };
        for entry in entries {
            dict.entries.insert(entry.code.clone(), entry);
        }
        for (token, flag) in flags {
            dict.flags.insert(token, flag);
        }
        dict.rebuild_index()?;
        Ok(dict)
    }

    fn rebuild_index(&mut self) -> Result<(), DictionaryError> {
        self.index.clear();
        let mut insert = |token: String, target: IndexTarget| -> Result<(), DictionaryError> {
            if let Some(existing) = self.index.get(&token) {
                // A token may appear several times within one entry (code
                // listed among its own synonyms); only cross-entry
                // collisions violate the invariant.
                let same_entry = match (existing, &target) {
                    (IndexTarget::Drug { code: a, .. }, IndexTarget::Drug { code: b, .. }) => {
                        a == b
                    }
                    (IndexTarget::Flag { flag: a }, IndexTarget::Flag { flag: b }) => a == b,
                    _ => false,
                };
                if !same_entry {
                    return Err(DictionaryError::DuplicateSynonym {
                        token,
                        first: existing.described(),
                        second: target.described(),
                    });
                }
                return Ok(());
            }
            self.index.insert(token, target);
            Ok(())
        };
        for (token, flag) in &self.flags {
            insert(fold_token(token), IndexTarget::Flag { flag: flag.clone() })?;
        }
        for entry in self.entries.values() {
            for (token, kind) in entry.all_tokens() {
                insert(
                    fold_token(token),
                    IndexTarget::Drug {
                        code: entry.code.clone(),
                        kind,
                    },
                )?;
            }
        }
        Ok(())
    }

    /// Resolve one token. Whole-token, case-insensitive, diacritic-folded;
    /// never a substring match.
    pub fn lookup_token(&self, token: &str) -> Result<Resolution, DictionaryError> {
        let folded = fold_token(token);
        if folded.is_empty() {
            return Err(DictionaryError::EmptyToken);
        }
        Ok(match self.index.get(&folded) {
            Some(IndexTarget::Drug { code, kind }) => Resolution::Drug {
                code: code.clone(),
                kind: *kind,
            },
            Some(IndexTarget::Flag { flag }) => Resolution::ExplicitFlag { flag: flag.clone() },
            None => Resolution::Unknown,
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = &AntibioticEntry> {
        self.entries.values()
    }

    pub fn get(&self, code: &str) -> Option<&AntibioticEntry> {
        self.entries.get(code)
    }

    pub fn contains_code(&self, code: &str) -> bool {
        self.entries.contains_key(code)
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn token_count(&self) -> usize {
        self.index.len()
    }
}

/// Drugs every installation understands. Covers the sentinel markers
/// (cefoxitin, oxacillin, ceftazidime) and the drugs commonly seen in
/// county lab exports, plus the reserved `MRSA` flag token.
pub fn builtin_default() -> Dictionary {
    use Route::{Both, Oral, Parenteral};
    let entries = vec![
        AntibioticEntry::new(
            "FOX",
            "cefoxitin",
            &["cefoxitina", "cefoxitine"],
            "cephamycin",
            Parenteral,
        ),
        AntibioticEntry::new(
            "OXA",
            "oxacillin",
            &["oxacilina", "oxacillina"],
            "penicillinase-stable penicillin",
            Both,
        ),
        AntibioticEntry::new(
            "CAZ",
            "ceftazidime",
            &["ceftazidim", "ceftazidima"],
            "3rd-gen cephalosporin",
            Parenteral,
        ),
        AntibioticEntry::new(
            "GEN",
            "gentamicin",
            &["gentamicina", "gentamycin", "gm"],
            "aminoglycoside",
            Parenteral,
        ),
        AntibioticEntry::new(
            "CIP",
            "ciprofloxacin",
            &["ciprofloxacina", "cipro"],
            "fluoroquinolone",
            Both,
        ),
        AntibioticEntry::new(
            "AMK",
            "amikacin",
            &["amikacina"],
            "aminoglycoside",
            Parenteral,
        ),
        AntibioticEntry::new(
            "AMP",
            "ampicillin",
            &["ampicilina"],
            "aminopenicillin",
            Both,
        ),
        AntibioticEntry::new(
            "CTX",
            "cefotaxime",
            &["cefotaxima"],
            "3rd-gen cephalosporin",
            Parenteral,
        ),
        AntibioticEntry::new("CLI", "clindamycin", &["clindamicina"], "lincosamide", Both),
        AntibioticEntry::new("COL", "colistin", &["colistina"], "polymyxin", Parenteral),
        AntibioticEntry::new("ERY", "erythromycin", &["eritromicina"], "macrolide", Both),
        AntibioticEntry::new("IPM", "imipenem", &[], "carbapenem", Parenteral),
        AntibioticEntry::new("LNZ", "linezolid", &[], "oxazolidinone", Both),
        AntibioticEntry::new("MEM", "meropenem", &[], "carbapenem", Parenteral),
        AntibioticEntry::new(
            "PEN",
            "penicillin",
            &["penicilina", "penicillin g"],
            "penicillin",
            Both,
        ),
        AntibioticEntry::new(
            "RIF",
            "rifampicin",
            &["rifampin", "rifampicina"],
            "rifamycin",
            Both,
        ),
        AntibioticEntry::new(
            "SXT",
            "trimethoprim-sulfamethoxazole",
            &["cotrimoxazole", "biseptol"],
            "folate pathway inhibitor",
            Oral,
        ),
        AntibioticEntry::new(
            "TET",
            "tetracycline",
            &["tetraciclina"],
            "tetracycline",
            Oral,
        ),
        AntibioticEntry::new(
            "VAN",
            "vancomycin",
            &["vancomicina"],
            "glycopeptide",
            Parenteral,
        ),
    ];
    let flags = vec![("MRSA".to_string(), "MRSA".to_string())];
    Dictionary::build(entries, flags).expect("builtin dictionary is collision-free")
}

/// Parse a dictionary file and merge it over the builtin set.
///
/// Format: UTF-8 CSV with header `code,canonical_name,synonyms,class,route`;
/// the synonyms field is `|`-separated; `#` starts a comment line. A file
/// entry whose code already exists replaces the builtin entry wholesale.
pub fn load_dictionary(text: &str) -> Result<Dictionary, DictionaryError> {
    let base = builtin_default();
    let mut entries: BTreeMap<String, AntibioticEntry> = base.entries.clone();
    let flags: Vec<(String, String)> = base
        .flags
        .iter()
        .map(|(t, f)| (t.clone(), f.clone()))
        .collect();

    let mut saw_header = false;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            let normalized: String = line.split(',').map(str::trim).collect::<Vec<_>>().join(",");
            if !normalized.eq_ignore_ascii_case("code,canonical_name,synonyms,class,route") {
                return Err(DictionaryError::MalformedLine {
                    line: line_no,
                    detail: "expected header `code,canonical_name,synonyms,class,route`"
                        .to_string(),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(DictionaryError::MalformedLine {
                line: line_no,
                detail: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let code = fields[0].to_uppercase();
        if !(2..=4).contains(&code.len()) || !code.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(DictionaryError::MalformedLine {
                line: line_no,
                detail: format!("code `{}` must be 2-4 ASCII letters", fields[0]),
            });
        }
        if fields[1].is_empty() {
            return Err(DictionaryError::MalformedLine {
                line: line_no,
                detail: "canonical_name is empty".to_string(),
            });
        }
        let route = Route::parse(fields[4]).ok_or_else(|| DictionaryError::MalformedLine {
            line: line_no,
            detail: format!("route `{}` not one of parenteral/oral/both", fields[4]),
        })?;
        let synonyms: BTreeSet<String> = fields[2]
            .split('|')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        entries.insert(
            code.clone(),
            AntibioticEntry {
                code,
                canonical_name: fields[1].to_string(),
                synonyms,
                drug_class: fields[3].to_string(),
                route,
            },
        );
    }
    Dictionary::build(entries.into_values().collect(), flags)
}
