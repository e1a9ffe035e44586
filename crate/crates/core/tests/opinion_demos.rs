//! The three agreement-policy demonstrations, replayed through the engine.

use std::path::PathBuf;
use std::sync::Arc;

use socialbot_core::config::Config;
use socialbot_core::replay::{run_replay, ReplayFixture};
use socialbot_core::store::MemoryStore;

fn replay(policy_dir: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/opinion").join(policy_dir).join("replay.json");
    let fixture = ReplayFixture::load(path).unwrap();
    let config = Config::load(Some(&fixture.config), &[], Vec::new()).unwrap();
    let engine = config.engine_with_store(Arc::new(MemoryStore::new())).unwrap();
    let report = run_replay(&engine, &fixture, &Default::default()).unwrap();
    assert!(report.passed(), "{:#?}", report.mismatches);
}

#[test]
fn always_agree() {
    replay("always_agree");
}

#[test]
fn listen_first_disagree() {
    replay("listen_first_disagree");
}

#[test]
fn convinced_agree() {
    replay("convinced_agree");
}
