//! The committed test corpus must match what the scripts generate. Run with
//! UPDATE_GOLDEN=1 to rewrite it after changing a script or a prompt.

mod common;

use common::{corpus_dir, tree, update_golden, write_corpus};

#[test]
fn committed_corpus_matches_scripts() {
    let tmp = tempfile::tempdir().unwrap();
    write_corpus(tmp.path());
    let fresh = tree(tmp.path());
    if update_golden() {
        let dir = corpus_dir();
        if dir.exists() {
            std::fs::remove_dir_all(&dir).unwrap();
        }
        write_corpus(&dir);
    }
    let committed = tree(&corpus_dir());
    let names = |t: &[(String, Vec<u8>)]| t.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    assert_eq!(names(&committed), names(&fresh), "corpus file set differs; rerun with UPDATE_GOLDEN=1");
    for ((name, a), (_, b)) in committed.iter().zip(&fresh) {
        assert!(a == b, "{name} differs from its script; rerun with UPDATE_GOLDEN=1");
    }
}
