#![allow(dead_code)]

use std::path::PathBuf;

use haiscan::corpus::CorpusSpec;

/// Path of a fixture under the repository's `data/` directory.
pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    let path = data_path(name);
    std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read fixture {}: {e}", path.display()))
}

/// The July-2007-shaped corpus spec shipped in `data/`.
pub fn canonical_spec() -> CorpusSpec {
    serde_json::from_str(&read_fixture("corpus_july2007.json")).expect("canonical spec parses")
}
