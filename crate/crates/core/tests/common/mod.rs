#![allow(dead_code)]

use std::path::{Path, PathBuf};

use graphy_core::graph::{GraphStore, NodeId};
use graphy_core::inspection::{materialize, parse_workflow, run_inspection, Services, WorkflowSpec};
use graphy_core::navigation::{FixtureRepository, Repository};
use graphy_core::providers::ProviderConfig;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn workflow(name: &str) -> WorkflowSpec {
    let text = std::fs::read_to_string(fixtures().join("workflows").join(name)).unwrap();
    parse_workflow(&text).unwrap()
}

pub fn services() -> Services {
    let path = fixtures().join("providers.json");
    let config = ProviderConfig::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    Services::new(config.build(&fixtures(), true).unwrap())
}

pub fn repository() -> FixtureRepository {
    FixtureRepository::from_manifest(&fixtures().join("repo/manifest.json")).unwrap()
}

pub fn empty_store(spec: &WorkflowSpec) -> GraphStore {
    GraphStore::in_memory(spec.graph_schema().unwrap())
}

/// Fetches, inspects and writes one repository document.
pub fn seed(store: &mut GraphStore, spec: &WorkflowSpec, services: &Services, repo: &dyn Repository, id: &str) -> NodeId {
    let doc = repo.fetch(id).unwrap();
    let out = run_inspection(&doc, spec, services).unwrap();
    materialize(store, spec, &out).unwrap().fact
}

/// Compares `actual` with a golden file, rewriting it when GRAPHY_BLESS is set.
pub fn check_golden(name: &str, actual: &str) {
    let path = fixtures().join("golden").join(name);
    if std::env::var_os("GRAPHY_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden mismatch: {}", path.display());
}
