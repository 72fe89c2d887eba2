use vdwlab_core::acceptance::run_all;
use vdwlab_core::Exec;

#[test]
fn acceptance_criteria() {
    let outcomes = run_all(Exec::default(), |o| println!("{}", o.line()));
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
