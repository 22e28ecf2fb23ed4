//! Deterministic synthetic lab-export generator.
//!
//! Real isolate-level data cannot be shipped, so tests and demos run on
//! corpora with planted ground truth: exact MRSA and ceftazidime-resistant
//! isolate sets, exact tested/resistant pairs for gentamicin and
//! ciprofloxacin, and optional distractor lines carrying substring traps
//! ("moxifloxacin") that fool the legacy scanner but not token matching.
//! One seed governs all randomness; the same spec and seed produce
//! byte-identical output.
//!
//! Spelling discipline matters here: on resistant lines the generator only
//! emits spellings the legacy scanner can see (lowercase "oxa", never
//! "OXA") and never emits stray needle substrings, so that with no
//! distractors the two detection modes agree exactly.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lab::Category;
use crate::markers::Marker;
use crate::period::Period;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("infeasible corpus spec: {0}")]
    InfeasibleSpec(String),
}

/// Exact counts to plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedCounts {
    pub mrsa_count: usize,
    pub caz_count: usize,
    pub gen_resistant: usize,
    pub gen_tested: usize,
    pub cip_resistant: usize,
    pub cip_tested: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_patients: usize,
    pub n_isolates: usize,
    pub period: Period,
    pub planted: PlantedCounts,
    /// Probability that an eligible isolate's resistant line carries a
    /// substring trap instead of real drug tokens.
    pub distractor_rate: f64,
    pub seed: u64,
}

impl CorpusSpec {
    fn validate(&self) -> Result<(), CorpusError> {
        let fail = |msg: String| Err(CorpusError::InfeasibleSpec(msg));
        let p = &self.planted;
        if self.n_isolates > 0 && self.n_patients == 0 {
            return fail("isolates need at least one patient".to_string());
        }
        if self.n_patients > self.n_isolates {
            return fail(format!(
                "{} patients cannot all appear among {} isolates",
                self.n_patients, self.n_isolates
            ));
        }
        if self.n_isolates > 1_000_000 {
            return fail(format!(
                "{} isolates is beyond the generator's intended scale",
                self.n_isolates
            ));
        }
        if p.mrsa_count
            .checked_add(p.caz_count)
            .is_none_or(|sum| sum > self.n_isolates)
        {
            return fail(format!(
                "{} MRSA + {} CAZ exceed {} isolates",
                p.mrsa_count, p.caz_count, self.n_isolates
            ));
        }
        if p.gen_tested > self.n_isolates || p.cip_tested > self.n_isolates {
            return fail("tested counts exceed isolate count".to_string());
        }
        if p.gen_resistant > p.gen_tested || p.cip_resistant > p.cip_tested {
            return fail("resistant counts exceed tested counts".to_string());
        }
        if !(0.0..=1.0).contains(&self.distractor_rate) {
            return fail(format!(
                "distractor_rate {} not in [0,1]",
                self.distractor_rate
            ));
        }
        Ok(())
    }
}

/// What the generator planted for one isolate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthIsolate {
    pub isolate_id: String,
    pub patient_id: String,
    pub collection_date: NaiveDate,
    pub organism: String,
    pub profile: BTreeMap<String, Category>,
    pub explicit_mrsa: bool,
}

/// Full planted truth for a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: CorpusSpec,
    pub isolates: Vec<TruthIsolate>,
    pub mrsa_isolates: BTreeSet<String>,
    pub caz_isolates: BTreeSet<String>,
    /// Isolates whose resistant line carries a trap token and nothing else.
    pub distractor_isolates: BTreeSet<String>,
}

impl GroundTruth {
    pub fn finding_keys(&self) -> BTreeSet<(String, Marker)> {
        self.mrsa_isolates
            .iter()
            .map(|id| (id.clone(), Marker::Mrsa))
            .chain(
                self.caz_isolates
                    .iter()
                    .map(|id| (id.clone(), Marker::CazR)),
            )
            .collect()
    }

    pub fn isolate(&self, id: &str) -> Option<&TruthIsolate> {
        self.isolates.iter().find(|i| i.isolate_id == id)
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub csv: String,
    pub truth: GroundTruth,
}

const AUREUS_SPELLINGS: [&str; 4] = [
    "Staphylococcus aureus",
    "S. aureus",
    "Staph aureus",
    "staph. aureus",
];

const GRAM_NEGATIVE: [&str; 6] = [
    "Escherichia coli",
    "Klebsiella pneumoniae",
    "Pseudomonas aeruginosa",
    "Proteus mirabilis",
    "Enterobacter cloacae",
    "Acinetobacter baumannii",
];

const OTHER_ORGANISMS: [&str; 4] = [
    "Enterococcus faecalis",
    "Streptococcus pneumoniae",
    "Staphylococcus aureus",
    "Candida albicans",
];

const SPECIMENS: [&str; 6] = [
    "blood",
    "urine",
    "wound swab",
    "sputum",
    "catheter tip",
    "bronchial aspirate",
];

// Resistant-line spellings must stay visible to the case-sensitive legacy
// needles ("FOX", "fox", "oxa", "MRSA", "CAZ", "ceftazidim") and must not
// smuggle a needle into unrelated tokens. "OXA" in caps would be invisible
// to the legacy scan; full names of unrelated drugs can hide "oxa"
// (sulfamethoxazole), so resistant-line fillers are uppercase codes only.
const FOX_R_SPELLINGS: [&str; 3] = ["FOX", "fox", "cefoxitin"];
const OXA_R_SPELLINGS: [&str; 2] = ["oxa", "oxacillin"];
const CAZ_R_SPELLINGS: [&str; 3] = ["CAZ", "ceftazidime", "ceftazidim"];
const GEN_R_SPELLINGS: [&str; 3] = ["GEN", "gentamicin", "gentamicina"];
const CIP_R_SPELLINGS: [&str; 2] = ["CIP", "cipro"];
const GEN_SI_SPELLINGS: [&str; 3] = ["GEN", "gentamicin", "gm"];
const CIP_SI_SPELLINGS: [&str; 3] = ["CIP", "ciprofloxacin", "cipro"];

const FILLER_CODES: [&str; 12] = [
    "VAN", "AMK", "TET", "AMP", "MEM", "CTX", "ERY", "CLI", "PEN", "COL", "IPM", "RIF",
];
const FILLER_SI_NAMES: [&str; 12] = [
    "vancomycin",
    "amikacin",
    "tetracycline",
    "ampicillin",
    "meropenem",
    "cefotaxime",
    "erythromycin",
    "clindamycin",
    "penicillin",
    "colistin",
    "imipenem",
    "rifampicin",
];

/// Unknown tokens containing the lowercase "oxa" needle.
const TRAP_TOKENS: [&str; 4] = ["moxifloxacin", "levofloxacin", "norfloxacin", "cloxacillin"];

fn pick<'a>(rng: &mut ChaCha8Rng, options: &[&'a str]) -> &'a str {
    options[rng.gen_range(0..options.len())]
}

struct IsolatePlan {
    isolate_id: String,
    patient_id: String,
    date: NaiveDate,
    specimen: String,
    organism: String,
    r_tokens: Vec<String>,
    s_tokens: Vec<String>,
    i_tokens: Vec<String>,
    profile: BTreeMap<String, Category>,
    explicit_mrsa: bool,
}

/// Generate a corpus and its ground truth. Deterministic for a fixed spec.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_isolates;
    let planted = spec.planted;

    // marker assignment: one shuffle, disjoint prefixes
    let mut marker_slots: Vec<usize> = (0..n).collect();
    marker_slots.shuffle(&mut rng);
    let mrsa_set: BTreeSet<usize> = marker_slots[..planted.mrsa_count].iter().copied().collect();
    let caz_set: BTreeSet<usize> = marker_slots
        [planted.mrsa_count..planted.mrsa_count + planted.caz_count]
        .iter()
        .copied()
        .collect();

    // proportion planting, independent of markers
    let assign_categories = |rng: &mut ChaCha8Rng, tested: usize, resistant: usize| {
        let mut slots: Vec<usize> = (0..n).collect();
        slots.shuffle(rng);
        let mut map: BTreeMap<usize, Category> = BTreeMap::new();
        for (i, slot) in slots[..tested].iter().enumerate() {
            let category = if i < resistant {
                Category::Resistant
            } else if rng.gen_bool(0.8) {
                Category::Susceptible
            } else {
                Category::Intermediate
            };
            map.insert(*slot, category);
        }
        map
    };
    let gen_categories = assign_categories(&mut rng, planted.gen_tested, planted.gen_resistant);
    let cip_categories = assign_categories(&mut rng, planted.cip_tested, planted.cip_resistant);

    let first_day = spec.period.start().first_day();
    let day_span = (spec.period.end().last_day() - first_day).num_days();

    let mut plans: Vec<IsolatePlan> = Vec::with_capacity(n);
    let mut mrsa_ids = BTreeSet::new();
    let mut caz_ids = BTreeSet::new();
    let mut distractor_ids = BTreeSet::new();

    for i in 0..n {
        let isolate_id = format!("ISO-{:05}", i + 1);
        let patient_index = if i < spec.n_patients {
            i
        } else {
            rng.gen_range(0..spec.n_patients)
        };
        let patient_id = format!("PAT-{:04}", patient_index + 1);
        let date = first_day + Duration::days(rng.gen_range(0..=day_span));
        let specimen = pick(&mut rng, &SPECIMENS).to_string();

        let mut plan = IsolatePlan {
            isolate_id: isolate_id.clone(),
            patient_id,
            date,
            specimen,
            organism: String::new(),
            r_tokens: Vec::new(),
            s_tokens: Vec::new(),
            i_tokens: Vec::new(),
            profile: BTreeMap::new(),
            explicit_mrsa: false,
        };

        let is_mrsa = mrsa_set.contains(&i);
        let is_caz = caz_set.contains(&i);

        if is_mrsa {
            plan.organism = pick(&mut rng, &AUREUS_SPELLINGS).to_string();
            match rng.gen_range(0..5) {
                0 => {
                    plan.r_tokens
                        .push(pick(&mut rng, &FOX_R_SPELLINGS).to_string());
                    plan.profile.insert("FOX".to_string(), Category::Resistant);
                }
                1 => {
                    plan.r_tokens
                        .push(pick(&mut rng, &OXA_R_SPELLINGS).to_string());
                    plan.profile.insert("OXA".to_string(), Category::Resistant);
                }
                2 => {
                    plan.r_tokens
                        .push(pick(&mut rng, &FOX_R_SPELLINGS).to_string());
                    plan.r_tokens
                        .push(pick(&mut rng, &OXA_R_SPELLINGS).to_string());
                    plan.profile.insert("FOX".to_string(), Category::Resistant);
                    plan.profile.insert("OXA".to_string(), Category::Resistant);
                }
                3 => {
                    plan.r_tokens.push("MRSA".to_string());
                    plan.r_tokens
                        .push(pick(&mut rng, &FOX_R_SPELLINGS).to_string());
                    plan.profile.insert("FOX".to_string(), Category::Resistant);
                    plan.explicit_mrsa = true;
                }
                _ => {
                    plan.r_tokens.push("MRSA".to_string());
                    plan.explicit_mrsa = true;
                }
            }
            mrsa_ids.insert(isolate_id.clone());
        } else if is_caz {
            plan.organism = pick(&mut rng, &GRAM_NEGATIVE).to_string();
            plan.r_tokens
                .push(pick(&mut rng, &CAZ_R_SPELLINGS).to_string());
            plan.profile.insert("CAZ".to_string(), Category::Resistant);
            caz_ids.insert(isolate_id.clone());
        } else {
            // plain isolates draw from both pools; a susceptible S. aureus
            // here exercises the organism gate without firing anything
            let pool = if rng.gen_bool(0.6) {
                &GRAM_NEGATIVE[..]
            } else {
                &OTHER_ORGANISMS[..]
            };
            plan.organism = pick(&mut rng, pool).to_string();
            if plan.organism.eq_ignore_ascii_case("Staphylococcus aureus") && rng.gen_bool(0.5) {
                plan.s_tokens.push("fox".to_string());
                plan.profile
                    .insert("FOX".to_string(), Category::Susceptible);
            }
        }

        if let Some(category) = gen_categories.get(&i) {
            match category {
                Category::Resistant => plan
                    .r_tokens
                    .push(pick(&mut rng, &GEN_R_SPELLINGS).to_string()),
                Category::Susceptible => plan
                    .s_tokens
                    .push(pick(&mut rng, &GEN_SI_SPELLINGS).to_string()),
                _ => plan
                    .i_tokens
                    .push(pick(&mut rng, &GEN_SI_SPELLINGS).to_string()),
            }
            plan.profile.insert("GEN".to_string(), *category);
        }
        if let Some(category) = cip_categories.get(&i) {
            match category {
                Category::Resistant => plan
                    .r_tokens
                    .push(pick(&mut rng, &CIP_R_SPELLINGS).to_string()),
                Category::Susceptible => plan
                    .s_tokens
                    .push(pick(&mut rng, &CIP_SI_SPELLINGS).to_string()),
                _ => plan
                    .i_tokens
                    .push(pick(&mut rng, &CIP_SI_SPELLINGS).to_string()),
            }
            plan.profile.insert("CIP".to_string(), *category);
        }

        // texture: extra susceptible/intermediate drugs, occasionally an
        // extra resistant filler code
        let n_fillers = rng.gen_range(0..=3usize);
        for _ in 0..n_fillers {
            let idx = rng.gen_range(0..FILLER_CODES.len());
            let code = FILLER_CODES[idx];
            if plan.profile.contains_key(code) {
                continue;
            }
            let spelling = if rng.gen_bool(0.5) {
                code.to_string()
            } else {
                FILLER_SI_NAMES[idx].to_string()
            };
            if rng.gen_bool(0.85) {
                plan.s_tokens.push(spelling);
                plan.profile.insert(code.to_string(), Category::Susceptible);
            } else {
                plan.i_tokens.push(spelling);
                plan.profile
                    .insert(code.to_string(), Category::Intermediate);
            }
        }
        if !is_mrsa && !is_caz && rng.gen_bool(0.2) {
            let idx = rng.gen_range(0..FILLER_CODES.len());
            let code = FILLER_CODES[idx];
            if !plan.profile.contains_key(code) {
                plan.r_tokens.push(code.to_string());
                plan.profile.insert(code.to_string(), Category::Resistant);
            }
        }

        // a distractor line carries the trap and nothing else, so the
        // legacy excess is attributable token by token
        let eligible = !is_mrsa && !is_caz && plan.r_tokens.is_empty();
        if eligible && spec.distractor_rate > 0.0 && rng.gen_bool(spec.distractor_rate) {
            plan.r_tokens.push(pick(&mut rng, &TRAP_TOKENS).to_string());
            distractor_ids.insert(isolate_id.clone());
        }

        plans.push(plan);
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(crate::lab::LAB_EXPORT_HEADER)
        .expect("writing to memory");
    for plan in &plans {
        let date_text = if rng.gen_bool(0.5) {
            plan.date.format("%Y-%m-%d").to_string()
        } else {
            plan.date.format("%d.%m.%Y").to_string()
        };
        for (kind, tokens) in [
            ("R", &plan.r_tokens),
            ("S", &plan.s_tokens),
            ("I", &plan.i_tokens),
        ] {
            writer
                .write_record([
                    plan.isolate_id.as_str(),
                    plan.patient_id.as_str(),
                    date_text.as_str(),
                    plan.specimen.as_str(),
                    plan.organism.as_str(),
                    kind,
                    tokens.join(", ").as_str(),
                ])
                .expect("writing to memory");
        }
    }
    let csv = String::from_utf8(writer.into_inner().expect("writing to memory"))
        .expect("generator emits UTF-8");

    let isolates = plans
        .into_iter()
        .map(|p| TruthIsolate {
            isolate_id: p.isolate_id,
            patient_id: p.patient_id,
            collection_date: p.date,
            organism: p.organism,
            profile: p.profile,
            explicit_mrsa: p.explicit_mrsa,
        })
        .collect();

    Ok(Corpus {
        csv,
        truth: GroundTruth {
            spec: *spec,
            isolates,
            mrsa_isolates: mrsa_ids,
            caz_isolates: caz_ids,
            distractor_isolates: distractor_ids,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> CorpusSpec {
        CorpusSpec {
            n_patients: 20,
            n_isolates: 30,
            period: "2007-07".parse().unwrap(),
            planted: PlantedCounts {
                mrsa_count: 3,
                caz_count: 5,
                gen_resistant: 4,
                gen_tested: 10,
                cip_resistant: 2,
                cip_tested: 8,
            },
            distractor_rate: 0.0,
            seed: 7,
        }
    }

    #[test]
    fn same_seed_gives_byte_identical_output() {
        let spec = small_spec();
        let a = generate_corpus(&spec).unwrap();
        let b = generate_corpus(&spec).unwrap();
        assert_eq!(a.csv, b.csv);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn different_seed_changes_the_bytes() {
        let mut spec = small_spec();
        let a = generate_corpus(&spec).unwrap();
        spec.seed = 8;
        let b = generate_corpus(&spec).unwrap();
        assert_ne!(a.csv, b.csv);
    }

    #[test]
    fn planted_counts_are_exact() {
        let corpus = generate_corpus(&small_spec()).unwrap();
        assert_eq!(corpus.truth.mrsa_isolates.len(), 3);
        assert_eq!(corpus.truth.caz_isolates.len(), 5);
        assert!(corpus
            .truth
            .mrsa_isolates
            .is_disjoint(&corpus.truth.caz_isolates));
        let gen_tested = corpus
            .truth
            .isolates
            .iter()
            .filter(|i| i.profile.contains_key("GEN"))
            .count();
        assert_eq!(gen_tested, 10);
        let gen_resistant = corpus
            .truth
            .isolates
            .iter()
            .filter(|i| i.profile.get("GEN") == Some(&Category::Resistant))
            .count();
        assert_eq!(gen_resistant, 4);
    }

    #[test]
    fn every_patient_appears() {
        let corpus = generate_corpus(&small_spec()).unwrap();
        let patients: BTreeSet<&str> = corpus
            .truth
            .isolates
            .iter()
            .map(|i| i.patient_id.as_str())
            .collect();
        assert_eq!(patients.len(), 20);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let mut spec = small_spec();
        spec.planted.mrsa_count = 40;
        assert!(matches!(
            generate_corpus(&spec).unwrap_err(),
            CorpusError::InfeasibleSpec(_)
        ));
        let mut spec = small_spec();
        spec.n_patients = 31;
        assert!(generate_corpus(&spec).is_err());
        let mut spec = small_spec();
        spec.planted.gen_resistant = 11;
        assert!(generate_corpus(&spec).is_err());
        let mut spec = small_spec();
        spec.distractor_rate = 1.5;
        assert!(generate_corpus(&spec).is_err());
    }

    #[test]
    fn zero_planted_markers_means_no_findings() {
        let mut spec = small_spec();
        spec.planted.mrsa_count = 0;
        spec.planted.caz_count = 0;
        let corpus = generate_corpus(&spec).unwrap();
        assert!(corpus.truth.finding_keys().is_empty());

        let dict = crate::dictionary::builtin_default();
        let out = crate::lab::parse_lab_export(
            corpus.csv.as_bytes(),
            &dict,
            crate::lab::Strictness::Lenient,
        )
        .unwrap();
        let findings = crate::markers::detect_all(&out.records);
        assert!(findings.is_empty());
    }

    #[test]
    fn distractors_only_land_on_bare_resistant_lines() {
        let mut spec = small_spec();
        spec.distractor_rate = 0.8;
        let corpus = generate_corpus(&spec).unwrap();
        assert!(!corpus.truth.distractor_isolates.is_empty());
        for id in &corpus.truth.distractor_isolates {
            assert!(!corpus.truth.mrsa_isolates.contains(id));
            assert!(!corpus.truth.caz_isolates.contains(id));
            let truth = corpus.truth.isolate(id).unwrap();
            assert!(truth.profile.values().all(|c| *c != Category::Resistant));
        }
    }
}
