use cmgkit_core::miner::{
    build_commit_issue_map, commit_issue_map_json, fetch_records, list_referencing_commits, read_map_checkpoint,
    Client, FixtureTransport, MapOptions, RepoRef,
};
use cmgkit_core::par::Execution;
use std::path::PathBuf;
use std::sync::Arc;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn client() -> (Client, Arc<FixtureTransport>) {
    let t = Arc::new(FixtureTransport::from_file(&fixture("miner_replay.json")).unwrap());
    (Client::replay(t.clone()), t)
}

fn issues() -> Vec<u64> {
    std::fs::read_to_string(fixture("miner_issues.txt"))
        .unwrap()
        .lines()
        .map(|l| l.trim().parse().unwrap())
        .collect()
}

fn repo() -> RepoRef {
    "acme/widget".parse().unwrap()
}

#[test]
fn replay_reproduces_expected_map_bytes() {
    let expected = std::fs::read_to_string(fixture("miner_expected_map.json")).unwrap();
    for exec in [Execution::Sequential, Execution::Parallel] {
        let (c, _) = client();
        let opts = MapOptions { exec, ..MapOptions::default() };
        let map = build_commit_issue_map(&c, &repo(), &issues(), &opts).unwrap();
        assert_eq!(commit_issue_map_json(&map), expected, "{exec:?}");
    }
}

#[test]
fn two_pages_in_order_with_duplicate_kept_in_listing() {
    let (c, t) = client();
    let commits = list_referencing_commits(&c, &repo(), 3).unwrap();
    assert_eq!(commits.len(), 3);
    assert_eq!(commits[0], commits[2]);
    assert_eq!(t.requests().len(), 2);
}

#[test]
fn cross_repository_reference_dropped() {
    let (c, _) = client();
    let commits = list_referencing_commits(&c, &repo(), 7).unwrap();
    assert_eq!(commits, ["b".repeat(39) + "2"]);
}

#[test]
fn checkpoint_resume_skips_finished_issues() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("map.ckpt.jsonl");
    let all = issues();
    let (c, _) = client();
    let opts = MapOptions { checkpoint: Some(&ckpt), ..MapOptions::default() };
    build_commit_issue_map(&c, &repo(), &all[..2], &opts).unwrap();
    assert_eq!(read_map_checkpoint(&ckpt).unwrap().len(), 2);

    let (c2, t2) = client();
    let map = build_commit_issue_map(&c2, &repo(), &all, &opts).unwrap();
    let expected = std::fs::read_to_string(fixture("miner_expected_map.json")).unwrap();
    assert_eq!(commit_issue_map_json(&map), expected);
    assert!(t2.requests().iter().all(|p| !p.contains("/issues/3/") && !p.contains("/issues/7/")));
}

#[test]
fn records_carry_linked_issues_and_truncation() {
    let (c, _) = client();
    let map = build_commit_issue_map(&c, &repo(), &issues(), &MapOptions::default()).unwrap();
    let records = fetch_records(&c, &repo(), &map, &MapOptions::default()).unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[0].record.files.len(), 2);
    assert_eq!(records[1].record.issues.len(), 2);
    assert_eq!(records[1].record.issues[1].body, "");
    assert!(!records[0].truncated && records[2].truncated);
}
