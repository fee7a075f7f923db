mod common;

use std::fs;

use common::*;
use fdom_core::registry::{Registry, RegistryError};
use fdom_core::store::{list_snapshots, parse_journal, replay, StoreError, JOURNAL_FILE};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Reopening, replaying, and snapshotting at any point agree.
    #[test]
    fn reopen_equals_live_state(seed in any::<u64>(), ops in 1usize..80, snap_after in 0usize..3) {
        let dir = tempfile::tempdir().unwrap();
        let live = {
            let (reg, _) = Registry::open(dir.path(), PREFIX, clock()).unwrap();
            for chunk in 0..3 {
                run_workload(&reg, seed.wrapping_add(chunk as u64), WorkloadConfig { ops, max_records: 30 });
                if chunk == snap_after {
                    reg.write_snapshot().unwrap();
                }
            }
            reg.snapshot_state()
        };
        check_invariants(&live).map_err(TestCaseError::fail)?;
        let (reg, _) = Registry::open(dir.path(), PREFIX, clock()).unwrap();
        prop_assert_eq!(reg.snapshot_state().canonical_json(), live.canonical_json());
        let bytes = fs::read(dir.path().join(JOURNAL_FILE)).unwrap();
        let events = parse_journal(&bytes).unwrap().events;
        prop_assert_eq!(replay(&events).unwrap().canonical_json(), live.canonical_json());
    }
}

#[test]
fn corruption_before_the_tail_refuses_to_open() {
    let dir = tempfile::tempdir().unwrap();
    {
        let (reg, _) = Registry::open(dir.path(), PREFIX, clock()).unwrap();
        person(&reg, "Ada");
        person(&reg, "Bob");
    }
    let path = dir.path().join(JOURNAL_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let mangled = text.replacen("\"seq\":2", "\"seq\":x", 1);
    assert_ne!(text, mangled);
    fs::write(&path, &mangled).unwrap();
    match Registry::open(dir.path(), PREFIX, clock()) {
        Err(RegistryError::Storage(StoreError::CorruptEvent { line: 2, .. })) => {}
        other => panic!("unexpected {:?}", other.map(|_| ())),
    }
    // Nothing was truncated.
    assert_eq!(fs::read_to_string(&path).unwrap(), mangled);
}

#[test]
fn snapshots_are_named_by_sequence_and_newest_wins() {
    let dir = tempfile::tempdir().unwrap();
    let (reg, _) = Registry::open(dir.path(), PREFIX, clock()).unwrap();
    person(&reg, "Ada");
    reg.write_snapshot().unwrap();
    person(&reg, "Bob");
    reg.write_snapshot().unwrap();
    person(&reg, "Cy");
    let live = reg.snapshot_state().canonical_json();
    drop(reg);
    let seqs: Vec<u64> = list_snapshots(dir.path()).unwrap().into_iter().map(|(s, _)| s).collect();
    assert_eq!(seqs, [4, 2]);
    let (reg, rec) = Registry::open(dir.path(), PREFIX, clock()).unwrap();
    assert_eq!(rec.snapshot_seq, Some(4));
    assert_eq!(rec.events_replayed, 2);
    assert_eq!(reg.snapshot_state().canonical_json(), live);
}

#[test]
fn snapshot_ahead_of_the_journal_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    {
        let (reg, _) = Registry::open(dir.path(), PREFIX, clock()).unwrap();
        person(&reg, "Ada");
        person(&reg, "Bob");
        reg.write_snapshot().unwrap();
    }
    // Lose the last pair from the journal: the snapshot now describes events
    // that are no longer on disk and must not be trusted.
    let path = dir.path().join(JOURNAL_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let keep: String = text.split_inclusive('\n').take(2).collect();
    fs::write(&path, &keep).unwrap();
    let (reg, rec) = Registry::open(dir.path(), PREFIX, clock()).unwrap();
    assert_eq!(rec.snapshot_seq, None);
    assert_eq!(reg.snapshot_state().fdos().count(), 1);
}
