//! Cross-module implication checks.
//!
//! Each check looks at a handful of verdicts from one half-line and asks
//! whether a known implication between them is contradicted. Anything
//! undecided or missing makes the check `skip`; only confident verdicts can
//! `fail`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::criteria::{DivergenceVerdict, GrowthVerdict};
use crate::oscillation::OscVerdict;
use crate::semibound::SemiboundVerdict;
use crate::weyl::EndpointLabel;

/// Identifier of the result each check tests.
pub const THEOREM_IDS: [(&str, &str); 4] = [
    ("A", "semibounded_iff_nonoscillatory"),
    ("B", "integral_criterion_limit_point"),
    ("C", "growth_criterion_limit_point"),
    ("D", "matrix_growth_criterion_limit_point"),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaVerdict {
    pub lambda: f64,
    pub verdict: OscVerdict,
}

/// The verdicts of one half-line that the checks consume.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub m: usize,
    #[serde(default)]
    pub semibound: Option<SemiboundVerdict>,
    #[serde(default)]
    pub oscillation: Option<Vec<LambdaVerdict>>,
    #[serde(default)]
    pub hartman_rellich: Option<DivergenceVerdict>,
    /// Growth verdict under the weighted (r dx) reading of the sup.
    #[serde(default)]
    pub pw_growth: Option<GrowthVerdict>,
    #[serde(default)]
    pub label: Option<EndpointLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub check: String,
    pub theorem: String,
    pub half: String,
    /// The verdicts the check used, by name.
    pub inputs: BTreeMap<String, String>,
    pub status: CheckStatus,
    pub reason: String,
}

fn show<T: Serialize>(v: &Option<T>) -> String {
    match v {
        None => "missing".into(),
        Some(v) => match serde_json::to_value(v) {
            Ok(serde_json::Value::String(s)) => s,
            Ok(other) => other.to_string(),
            Err(_) => "?".into(),
        },
    }
}

struct Builder<'a> {
    check: &'static str,
    half: &'a str,
    inputs: BTreeMap<String, String>,
}

impl Builder<'_> {
    fn input(mut self, k: &str, v: String) -> Self {
        self.inputs.insert(k.into(), v);
        self
    }

    fn finish(self, status: CheckStatus, reason: impl Into<String>) -> Finding {
        let theorem = THEOREM_IDS.iter().find(|(c, _)| *c == self.check).map(|(_, t)| *t).unwrap_or("");
        Finding {
            check: self.check.into(),
            theorem: theorem.into(),
            half: self.half.into(),
            inputs: self.inputs,
            status,
            reason: reason.into(),
        }
    }
}

fn builder<'a>(check: &'static str, half: &'a str) -> Builder<'a> {
    Builder {
        check,
        half,
        inputs: BTreeMap::new(),
    }
}

fn check_a(s: &VerdictSummary, half: &str) -> Finding {
    let osc_text = match &s.oscillation {
        None => "missing".to_string(),
        Some(v) => v
            .iter()
            .map(|l| format!("{}:{}", l.lambda, show(&Some(l.verdict))))
            .collect::<Vec<_>>()
            .join(" "),
    };
    let b = builder("A", half)
        .input("semibound", show(&s.semibound))
        .input("oscillation", osc_text);
    let (Some(sb), Some(osc)) = (s.semibound, &s.oscillation) else {
        return b.finish(CheckStatus::Skip, "semibound or oscillation stage not available");
    };
    if osc.is_empty() {
        return b.finish(CheckStatus::Skip, "no λ tested");
    }
    let any_non = osc.iter().any(|l| l.verdict == OscVerdict::Nonoscillatory);
    let any_undecided = osc.iter().any(|l| l.verdict == OscVerdict::Undecided);
    match sb {
        SemiboundVerdict::Undecided => b.finish(CheckStatus::Skip, "semibound verdict undecided"),
        SemiboundVerdict::BoundedBelow if any_non => b.finish(CheckStatus::Pass, "bounded below and some tested λ is nonoscillatory"),
        SemiboundVerdict::BoundedBelow if any_undecided => {
            b.finish(CheckStatus::Skip, "bounded below, no λ confirmed nonoscillatory, some undecided")
        }
        SemiboundVerdict::BoundedBelow => b.finish(CheckStatus::Fail, "bounded below but every tested λ is oscillatory"),
        SemiboundVerdict::UnboundedBelow if any_non => b.finish(CheckStatus::Fail, "unbounded below yet some tested λ is nonoscillatory"),
        SemiboundVerdict::UnboundedBelow if any_undecided => {
            b.finish(CheckStatus::Skip, "unbounded below, some λ undecided")
        }
        SemiboundVerdict::UnboundedBelow => b.finish(CheckStatus::Pass, "unbounded below and every tested λ is oscillatory"),
    }
}

/// Shared shape of B, C, D: semibounded ∧ criterion ⇒ limit point.
fn implication(b: Builder<'_>, sb: Option<SemiboundVerdict>, criterion_holds: Option<bool>, label: Option<EndpointLabel>) -> Finding {
    match sb {
        None => return b.finish(CheckStatus::Skip, "semibound stage not available"),
        Some(SemiboundVerdict::Undecided) => return b.finish(CheckStatus::Skip, "semibound verdict undecided"),
        Some(SemiboundVerdict::UnboundedBelow) => return b.finish(CheckStatus::Skip, "precondition unmet: not bounded below"),
        Some(SemiboundVerdict::BoundedBelow) => {}
    }
    match criterion_holds {
        None => return b.finish(CheckStatus::Skip, "criterion not available or undecided"),
        Some(false) => return b.finish(CheckStatus::Skip, "precondition unmet: criterion does not hold"),
        Some(true) => {}
    }
    match label {
        None | Some(EndpointLabel::Undecided) => b.finish(CheckStatus::Skip, "classification undecided"),
        Some(EndpointLabel::LimitPoint) => b.finish(CheckStatus::Pass, "preconditions hold and the endpoint is limit point"),
        Some(l) => b.finish(CheckStatus::Fail, format!("preconditions hold but the endpoint is classified {}", show(&Some(l)))),
    }
}

fn growth_holds(v: Option<GrowthVerdict>) -> Option<bool> {
    match v? {
        GrowthVerdict::SatisfiesORho2 => Some(true),
        GrowthVerdict::Violates => Some(false),
        GrowthVerdict::Undecided => None,
    }
}

fn check_b(s: &VerdictSummary, half: &str) -> Finding {
    let b = builder("B", half)
        .input("semibound", show(&s.semibound))
        .input("hartman_rellich", show(&s.hartman_rellich))
        .input("label", show(&s.label));
    if s.m != 1 {
        return b.finish(CheckStatus::Skip, "scalar-only check");
    }
    let holds = match s.hartman_rellich {
        Some(DivergenceVerdict::Diverges) => Some(true),
        Some(DivergenceVerdict::Converges) => Some(false),
        _ => None,
    };
    implication(b, s.semibound, holds, s.label)
}

fn check_c(s: &VerdictSummary, half: &str) -> Finding {
    let b = builder("C", half)
        .input("semibound", show(&s.semibound))
        .input("pw_growth", show(&s.pw_growth))
        .input("label", show(&s.label));
    if s.m != 1 {
        return b.finish(CheckStatus::Skip, "scalar-only check; see D");
    }
    implication(b, s.semibound, growth_holds(s.pw_growth), s.label)
}

fn check_d(s: &VerdictSummary, half: &str) -> Finding {
    let b = builder("D", half)
        .input("semibound", show(&s.semibound))
        .input("pw_growth", show(&s.pw_growth))
        .input("label", show(&s.label));
    if s.m == 1 {
        return b.finish(CheckStatus::Skip, "m = 1 is covered by C");
    }
    implication(b, s.semibound, growth_holds(s.pw_growth), s.label)
}

/// Run checks A–D on one half-line's verdicts.
pub fn consistency_suite(summary: &VerdictSummary, half: &str) -> Vec<Finding> {
    vec![
        check_a(summary, half),
        check_b(summary, half),
        check_c(summary, half),
        check_d(summary, half),
    ]
}

pub fn any_failed(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.status == CheckStatus::Fail)
}

/// Deliberately inconsistent verdicts: bounded below, growth criterion
/// satisfied, yet limit circle.
pub fn fabricated_inconsistent_summary() -> VerdictSummary {
    VerdictSummary {
        m: 1,
        semibound: Some(SemiboundVerdict::BoundedBelow),
        oscillation: None,
        hartman_rellich: None,
        pw_growth: Some(GrowthVerdict::SatisfiesORho2),
        label: Some(EndpointLabel::LimitCircle),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn status(f: &[Finding], check: &str) -> CheckStatus {
        f.iter().find(|x| x.check == check).unwrap().status
    }

    #[test]
    fn fixture_fails_c() {
        let f = consistency_suite(&fabricated_inconsistent_summary(), "right");
        assert_eq!(status(&f, "C"), CheckStatus::Fail);
        assert!(any_failed(&f));
        let c = f.iter().find(|x| x.check == "C").unwrap();
        assert_eq!(c.inputs["label"], "limit_circle");
        assert_eq!(c.inputs["pw_growth"], "satisfies_O_rho2");
        assert_eq!(c.theorem, "growth_criterion_limit_point");
    }

    #[test]
    fn undecided_never_fails() {
        let s = VerdictSummary {
            m: 1,
            semibound: Some(SemiboundVerdict::BoundedBelow),
            oscillation: Some(vec![LambdaVerdict {
                lambda: 0.0,
                verdict: OscVerdict::Undecided,
            }]),
            hartman_rellich: Some(DivergenceVerdict::Diverges),
            pw_growth: Some(GrowthVerdict::Undecided),
            label: Some(EndpointLabel::Undecided),
        };
        let f = consistency_suite(&s, "right");
        assert!(f.iter().all(|x| x.status == CheckStatus::Skip), "{f:#?}");
    }

    #[test]
    fn equivalence_check() {
        let mut s = VerdictSummary {
            m: 1,
            semibound: Some(SemiboundVerdict::UnboundedBelow),
            oscillation: Some(vec![
                LambdaVerdict {
                    lambda: -10.0,
                    verdict: OscVerdict::Oscillatory,
                },
                LambdaVerdict {
                    lambda: 10.0,
                    verdict: OscVerdict::Oscillatory,
                },
            ]),
            ..Default::default()
        };
        assert_eq!(status(&consistency_suite(&s, "r"), "A"), CheckStatus::Pass);
        s.semibound = Some(SemiboundVerdict::BoundedBelow);
        assert_eq!(status(&consistency_suite(&s, "r"), "A"), CheckStatus::Fail);
        s.oscillation.as_mut().unwrap()[0].verdict = OscVerdict::Nonoscillatory;
        assert_eq!(status(&consistency_suite(&s, "r"), "A"), CheckStatus::Pass);
        s.semibound = Some(SemiboundVerdict::UnboundedBelow);
        assert_eq!(status(&consistency_suite(&s, "r"), "A"), CheckStatus::Fail);
    }

    #[test]
    fn matrix_uses_d() {
        let s = VerdictSummary {
            m: 2,
            semibound: Some(SemiboundVerdict::BoundedBelow),
            pw_growth: Some(GrowthVerdict::SatisfiesORho2),
            label: Some(EndpointLabel::LimitPoint),
            ..Default::default()
        };
        let f = consistency_suite(&s, "r");
        assert_eq!(status(&f, "D"), CheckStatus::Pass);
        assert_eq!(status(&f, "C"), CheckStatus::Skip);
        assert_eq!(status(&f, "B"), CheckStatus::Skip);
    }

    #[test]
    fn summary_round_trip() {
        let s = fabricated_inconsistent_summary();
        let text = serde_json::to_string(&s).unwrap();
        let back: VerdictSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
