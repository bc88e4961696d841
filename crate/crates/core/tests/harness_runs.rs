//! Full stage runs through the harness on builtin problems.

use sl_lab::criteria::{DivergenceVerdict, GrowthVerdict};
use sl_lab::harness::{run, CheckStatus, RunConfig, Stage, StageOutcome};
use sl_lab::semibound::SemiboundVerdict;
use sl_lab::weyl::EndpointLabel;

fn status(r: &sl_lab::harness::ConsolidatedReport, check: &str) -> CheckStatus {
    r.consistency.iter().find(|f| f.check == check).unwrap().status
}

#[test]
fn example_2_7_integral_implication_passes() {
    let cfg = RunConfig::builtin("example_2_7").with_stages(&[Stage::Criteria, Stage::Semibound, Stage::Classify]);
    let r = run(&cfg).unwrap();
    let v = &r.halves[0].verdicts;
    assert_eq!(v.hartman_rellich, Some(DivergenceVerdict::Diverges));
    assert_eq!(v.pw_growth, Some(GrowthVerdict::Violates));
    assert_eq!(v.semibound, Some(SemiboundVerdict::BoundedBelow));
    assert_eq!(v.label, Some(EndpointLabel::LimitPoint));
    assert_eq!(status(&r, "B"), CheckStatus::Pass);
    let b = r.consistency.iter().find(|f| f.check == "B").unwrap();
    assert_eq!(b.inputs.len(), 3);
}

#[test]
fn free_all_stages() {
    let mut cfg = RunConfig::builtin("free");
    cfg.reproducible = true;
    let r = run(&cfg).unwrap();
    assert!(r.failed_stages.is_empty(), "{:?}", r.failed_stages);
    let st = &r.halves[0].stages;
    for ok in [
        st.validate.as_ref().map(|o| o.ok().is_some()),
        st.criteria.as_ref().map(|o| o.ok().is_some()),
        st.semibound.as_ref().map(|o| o.ok().is_some()),
        st.oscillate.as_ref().map(|o| o.ok().is_some()),
        st.classify.as_ref().map(|o| o.ok().is_some()),
        st.replay.as_ref().map(|o| o.ok().is_some()),
    ] {
        assert_eq!(ok, Some(true));
    }
    assert!(st.validate.as_ref().unwrap().ok().unwrap().pass);
    assert_eq!(r.halves[0].verdicts.label, Some(EndpointLabel::LimitPoint));
    let replay = st.replay.as_ref().unwrap().ok().unwrap();
    assert!(!replay.reports.is_empty());
    assert!(replay.reports.iter().all(|x| x.finiteness.iter().all(|v| v.is_finite())));
    assert!(!r.consistency_failed);
}

#[test]
fn example_2_8_growth_implication_passes() {
    let cfg = RunConfig::builtin("example_2_8").with_stages(&[Stage::Criteria, Stage::Semibound, Stage::Classify]);
    let r = run(&cfg).unwrap();
    assert_eq!(status(&r, "C"), CheckStatus::Pass);
    assert_eq!(status(&r, "B"), CheckStatus::Skip);
}

#[test]
fn matrix_free_matrix_implication_passes() {
    let cfg = RunConfig::builtin("matrix_free").with_stages(&[Stage::Criteria, Stage::Semibound, Stage::Classify]);
    let r = run(&cfg).unwrap();
    assert_eq!(status(&r, "D"), CheckStatus::Pass);
    let crit = r.halves[0].stages.criteria.as_ref().unwrap();
    assert!(matches!(crit, StageOutcome::Ok { .. }));
    assert!(crit.ok().unwrap().hartman_rellich.is_none());
}

#[test]
fn replay_is_skipped_without_semibound() {
    let cfg = RunConfig::builtin("quartic_lc").with_stages(&[Stage::Replay]);
    let r = run(&cfg).unwrap();
    assert!(matches!(r.halves[0].stages.replay, Some(StageOutcome::Skipped { .. })));
}
