use stickynet::verify::{self, Status, VerifyConfig};

#[test]
fn default_suite_passes_and_is_reproducible() {
    let c = VerifyConfig { lemma_reps: 200_000, ..VerifyConfig::default() };
    let a = verify::run_all(&c, 7);
    let failed: Vec<_> = a.checks.iter().filter(|c| c.status == Status::Fail).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    let names: Vec<&str> = a.checks.iter().map(|c| c.name.as_str()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    let b = verify::run_all(&c, 7);
    assert_eq!(a, b);
}
