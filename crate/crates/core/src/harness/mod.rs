//! Stage orchestration: load a problem, run the requested analyses, assemble
//! one JSON report with CSV sidecars, and evaluate the consistency checks.
//!
//! Stage graph: `validate`, `criteria`, `semibound`, `oscillate` and
//! `classify` are independent and run concurrently; `replay` needs the
//! semibound bound and runs after it.

mod consistency;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use consistency::{
    any_failed, consistency_suite, fabricated_inconsistent_summary, CheckStatus, Finding, LambdaVerdict, VerdictSummary,
    THEOREM_IDS,
};

use crate::coefficients::{self, builtin, load_problem_file, ConfigError, HypothesisReport, Problem, ProblemSet, Side};
use crate::criteria::{self, DivergenceEstimate, GrowthEstimate};
use crate::linalg::c;
use crate::odesolver::OdeOptions;
use crate::oscillation::{self, OscillationOptions, OscillationReport};
use crate::proofreplay::{self, ReplaySeries};
use crate::semibound::{self, SemiboundReport, SemiboundVerdict};
use crate::weyl::{self, ClassificationVerdict, EndpointLabel, WeylOptions};

pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown builtin problem {0:?} (known: {known})", known = coefficients::BUILTIN_NAMES.join(", "))]
    UnknownBuiltin(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validate,
    Criteria,
    Semibound,
    Oscillate,
    Classify,
    Replay,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Validate,
        Stage::Criteria,
        Stage::Semibound,
        Stage::Oscillate,
        Stage::Classify,
        Stage::Replay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::Criteria => "criteria",
            Stage::Semibound => "semibound",
            Stage::Oscillate => "oscillate",
            Stage::Classify => "classify",
            Stage::Replay => "replay",
        }
    }

    /// Stages whose output this one consumes.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Replay => &[Stage::Semibound],
            _ => &[],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| HarnessError::Invalid(format!("unknown stage {s:?}")))
    }
}

/// Parse `all` or a comma-separated stage list; dependencies are added.
pub fn parse_stages(list: &str) -> Result<Vec<Stage>, HarnessError> {
    let mut out: Vec<Stage> = if list.trim() == "all" {
        Stage::ALL.to_vec()
    } else {
        list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_, _>>()?
    };
    close_stages(&mut out);
    Ok(out)
}

fn close_stages(stages: &mut Vec<Stage>) {
    let deps: Vec<Stage> = stages.iter().flat_map(|s| s.requires().iter().copied()).collect();
    stages.extend(deps);
    stages.sort();
    stages.dedup();
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Builtin(String),
    File(PathBuf),
}

impl fmt::Display for ProblemSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSource::Builtin(n) => write!(f, "builtin:{n}"),
            ProblemSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: ProblemSource,
    pub stages: Vec<Stage>,
    /// Largest ρ of the growth sweep.
    pub rho_max: Option<f64>,
    /// Largest truncation point `d` for the ladders of the other stages.
    pub d_max: Option<f64>,
    pub z: [f64; 2],
    /// Overrides the ODE / quadrature tolerances when set.
    pub tol: Option<f64>,
    /// λ values probed by the oscillation stage.
    pub lambdas: Vec<f64>,
    /// Omit timestamps and timings so identical runs give identical bytes.
    pub reproducible: bool,
    /// Force the left half-line reading of a file problem.
    pub reflect: bool,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(source: ProblemSource) -> Self {
        Self {
            source,
            stages: Stage::ALL.to_vec(),
            rho_max: None,
            d_max: None,
            z: [0.0, 1.0],
            tol: None,
            lambdas: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            reproducible: false,
            reflect: false,
            out: None,
        }
    }

    pub fn builtin(name: &str) -> Self {
        Self::new(ProblemSource::Builtin(name.into()))
    }

    pub fn with_stages(mut self, stages: &[Stage]) -> Self {
        self.stages = stages.to_vec();
        close_stages(&mut self.stages);
        self
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(HarnessError::Invalid(format!("tolerance must be positive, got {t}")));
            }
        }
        for (name, v) in [("rho-max", self.rho_max), ("d-max", self.d_max)] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(HarnessError::Invalid(format!("--{name} must be finite, got {v}")));
                }
            }
        }
        if self.z[1] == 0.0 || !self.z.iter().all(|v| v.is_finite()) {
            return Err(HarnessError::Invalid(format!("z must be finite and nonreal, got {:?}", self.z)));
        }
        if self.lambdas.iter().any(|l| !l.is_finite()) {
            return Err(HarnessError::Invalid("λ grid must be finite".into()));
        }
        Ok(())
    }

    pub fn load(&self) -> Result<ProblemSet, HarnessError> {
        match &self.source {
            ProblemSource::Builtin(name) => {
                if self.reflect {
                    return Err(HarnessError::Invalid(
                        "builtin problems are right half-lines; reflection needs a problem file with a left endpoint".into(),
                    ));
                }
                let p = builtin(name).ok_or_else(|| HarnessError::UnknownBuiltin(name.clone()))?;
                Ok(ProblemSet::single(p))
            }
            ProblemSource::File(path) => Ok(load_problem_file(path, self.reflect)?),
        }
    }

    fn cap_d(&self, ladder: Vec<f64>) -> Vec<f64> {
        match self.d_max {
            Some(d) => ladder.into_iter().filter(|&x| x <= d).collect(),
            None => ladder,
        }
    }

    fn ode_tol(&self, base: OdeOptions) -> OdeOptions {
        match self.tol {
            Some(t) => OdeOptions {
                tol: t,
                atol: t,
                ..base
            },
            None => base,
        }
    }
}

/// Outcome of one stage.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StageOutcome<T> {
    Ok { result: T },
    Failed { error: String },
    Skipped { reason: String },
}

impl<T> StageOutcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            StageOutcome::Ok { result } => Some(result),
            _ => None,
        }
    }

    fn from_result<E: fmt::Display>(r: Result<T, E>) -> Self {
        match r {
            Ok(result) => StageOutcome::Ok { result },
            Err(e) => StageOutcome::Failed { error: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriteriaStage {
    /// Scalar problems only.
    pub hartman_rellich: Option<DivergenceEstimate>,
    pub notes: Vec<String>,
    pub pw_growth: GrowthEstimate,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StageReports {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate: Option<StageOutcome<HypothesisReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criteria: Option<StageOutcome<CriteriaStage>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semibound: Option<StageOutcome<SemiboundReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oscillate: Option<StageOutcome<Vec<OscillationReport>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classify: Option<StageOutcome<ClassificationVerdict>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay: Option<StageOutcome<ReplaySeries>>,
}

impl StageReports {
    fn failed(&self) -> Vec<&'static str> {
        fn bad<T>(o: &Option<StageOutcome<T>>) -> bool {
            matches!(o, Some(StageOutcome::Failed { .. }))
        }
        let mut out = Vec::new();
        if bad(&self.validate) {
            out.push("validate");
        }
        if bad(&self.criteria) {
            out.push("criteria");
        }
        if bad(&self.semibound) {
            out.push("semibound");
        }
        if bad(&self.oscillate) {
            out.push("oscillate");
        }
        if bad(&self.classify) {
            out.push("classify");
        }
        if bad(&self.replay) {
            out.push("replay");
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HalfReport {
    pub name: String,
    pub side: Side,
    pub m: usize,
    pub c: f64,
    pub stages: StageReports,
    pub verdicts: VerdictSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl HalfReport {
    pub fn tag(&self) -> &'static str {
        match self.side {
            Side::Right => "right",
            Side::LeftReflected => "left",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub stages: Vec<Stage>,
    pub rho_max: Option<f64>,
    pub d_max: Option<f64>,
    pub z: [f64; 2],
    pub tol: Option<f64>,
    pub lambdas: Vec<f64>,
    pub reflect: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsolidatedReport {
    pub schema_version: &'static str,
    pub tool_version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
    pub problem: String,
    pub source: String,
    pub settings: Settings,
    pub notes: Vec<String>,
    pub halves: Vec<HalfReport>,
    pub consistency: Vec<Finding>,
    pub consistency_failed: bool,
    pub failed_stages: Vec<String>,
    pub sidecars: Vec<String>,
}

impl ConsolidatedReport {
    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn timed<T>(enabled: bool, f: impl FnOnce() -> StageOutcome<T>) -> (Option<StageOutcome<T>>, f64) {
    if !enabled {
        return (None, 0.0);
    }
    let t = Instant::now();
    let out = f();
    (Some(out), t.elapsed().as_secs_f64() * 1e3)
}

fn stage_validate(p: &Problem, cfg: &RunConfig) -> StageOutcome<HypothesisReport> {
    let ladder = cfg.cap_d(coefficients::validate::default_ladder(p));
    if ladder.is_empty() {
        return StageOutcome::Skipped {
            reason: "d ladder empty after --d-max".into(),
        };
    }
    let mut opts = coefficients::validate::ValidateOptions::default();
    if let Some(t) = cfg.tol {
        opts.tol = t;
    }
    StageOutcome::Ok {
        result: coefficients::validate::validate_hypothesis(p, &ladder, opts),
    }
}

fn stage_criteria(p: &Problem, cfg: &RunConfig) -> StageOutcome<CriteriaStage> {
    let run = || -> Result<CriteriaStage, criteria::CriteriaError> {
        let mut notes = Vec::new();
        let hartman_rellich = if p.m() == 1 {
            let mut opts = criteria::DivergenceOptions::default();
            if let Some(t) = cfg.tol {
                opts.quad_tol = t;
            }
            let ladder: Vec<f64> = cfg
                .cap_d(criteria::hr_ladder(p))
                .into_iter()
                .filter(|&d| d < p.b().value())
                .collect();
            Some(criteria::hartman_rellich(p, &ladder, &opts)?)
        } else {
            notes.push("integral criterion is defined for scalar problems only".into());
            None
        };
        let rhos: Vec<f64> = criteria::default_rhos()
            .into_iter()
            .filter(|&r| cfg.rho_max.is_none_or(|m| r <= m) && r < p.b().value() && 0.5 * r > p.c())
            .collect();
        let pw_growth = criteria::pw_growth(p, &rhos, &criteria::GrowthOptions::default())?;
        Ok(CriteriaStage {
            hartman_rellich,
            notes,
            pw_growth,
        })
    };
    StageOutcome::from_result(run())
}

fn stage_semibound(p: &Problem, cfg: &RunConfig) -> StageOutcome<SemiboundReport> {
    let ladder = cfg.cap_d(semibound::default_ladder(p));
    StageOutcome::from_result(semibound::semibound_verdict(p, &ladder, &semibound::SemiboundOptions::default()))
}

fn stage_oscillate(p: &Problem, cfg: &RunConfig) -> StageOutcome<Vec<OscillationReport>> {
    let ladder = cfg.cap_d(oscillation::default_ladder(p));
    let mut opts = OscillationOptions::default();
    opts.ode = cfg.ode_tol(opts.ode);
    StageOutcome::from_result(oscillation::scan_lambdas(p, &cfg.lambdas, &ladder, &opts))
}

fn stage_classify(p: &Problem, cfg: &RunConfig) -> StageOutcome<ClassificationVerdict> {
    let ladder = cfg.cap_d(weyl::default_ladder(p));
    let mut opts = WeylOptions {
        z: c(cfg.z[0], cfg.z[1]),
        ..WeylOptions::default()
    };
    opts.ode = cfg.ode_tol(opts.ode);
    StageOutcome::from_result(weyl::classify_endpoint(p, Some(&ladder), &opts))
}

/// ρ values for the replay: four doublings starting well inside the half-line.
pub fn replay_rhos(problem: &Problem, rho_max: Option<f64>) -> Vec<f64> {
    let base = if problem.c() > 2.0 { 4.0 * problem.c() } else { 8.0 };
    (0..4)
        .map(|k| base * 2f64.powi(k))
        .filter(|&r| rho_max.is_none_or(|m| r <= m) && r < problem.b().value())
        .collect()
}

fn stage_replay(p: &Problem, cfg: &RunConfig, sb: Option<&StageOutcome<SemiboundReport>>) -> StageOutcome<ReplaySeries> {
    let Some(report) = sb.and_then(|o| o.ok()) else {
        return StageOutcome::Skipped {
            reason: "semibound stage unavailable".into(),
        };
    };
    if report.verdict != SemiboundVerdict::BoundedBelow {
        return StageOutcome::Skipped {
            reason: format!("replay needs a semibounded problem; semibound verdict is {:?}", report.verdict),
        };
    }
    let rhos = replay_rhos(p, cfg.rho_max);
    if rhos.is_empty() {
        return StageOutcome::Skipped {
            reason: "ρ ladder empty".into(),
        };
    }
    let run = || -> Result<ReplaySeries, proofreplay::ReplayError> {
        let shift = proofreplay::shift_from_semibound(report)?;
        proofreplay::inequality_chain(p, shift, &rhos, cfg.tol.unwrap_or(1e-10))
    };
    StageOutcome::from_result(run())
}

fn summarize(m: usize, st: &StageReports) -> VerdictSummary {
    let crit = st.criteria.as_ref().and_then(|o| o.ok());
    VerdictSummary {
        m,
        semibound: st.semibound.as_ref().and_then(|o| o.ok()).map(|r| r.verdict),
        oscillation: st.oscillate.as_ref().and_then(|o| o.ok()).map(|v| {
            v.iter()
                .map(|r| LambdaVerdict {
                    lambda: r.lambda,
                    verdict: r.verdict,
                })
                .collect()
        }),
        hartman_rellich: crit.and_then(|c| c.hartman_rellich.as_ref()).map(|h| h.verdict),
        pw_growth: crit.map(|c| c.pw_growth.verdict),
        label: st.classify.as_ref().and_then(|o| o.ok()).map(|v| v.label),
    }
}

fn run_half(p: &Problem, side: Side, cfg: &RunConfig) -> HalfReport {
    let want = |s: Stage| cfg.stages.contains(&s);
    let (((validate, tv), (criteria, tc)), (((semibound, ts), (oscillate, to)), (classify, tk))) = rayon::join(
        || {
            rayon::join(
                || timed(want(Stage::Validate), || stage_validate(p, cfg)),
                || timed(want(Stage::Criteria), || stage_criteria(p, cfg)),
            )
        },
        || {
            rayon::join(
                || {
                    rayon::join(
                        || timed(want(Stage::Semibound), || stage_semibound(p, cfg)),
                        || timed(want(Stage::Oscillate), || stage_oscillate(p, cfg)),
                    )
                },
                || timed(want(Stage::Classify), || stage_classify(p, cfg)),
            )
        },
    );
    let (replay, tr) = timed(want(Stage::Replay), || stage_replay(p, cfg, semibound.as_ref()));
    let stages = StageReports {
        validate,
        criteria,
        semibound,
        oscillate,
        classify,
        replay,
    };
    let timings_ms = (!cfg.reproducible).then(|| {
        [
            (Stage::Validate, tv),
            (Stage::Criteria, tc),
            (Stage::Semibound, ts),
            (Stage::Oscillate, to),
            (Stage::Classify, tk),
            (Stage::Replay, tr),
        ]
        .into_iter()
        .filter(|(s, _)| want(*s))
        .map(|(s, t)| (s.name().to_string(), t))
        .collect()
    });
    HalfReport {
        name: p.name.clone(),
        side,
        m: p.m(),
        c: p.c(),
        verdicts: summarize(p.m(), &stages),
        stages,
        timings_ms,
    }
}

/// Run the configured stages on every half-line of the problem. Does not
/// write anything; see [`write_outputs`].
pub fn run(cfg: &RunConfig) -> Result<ConsolidatedReport, HarnessError> {
    cfg.check()?;
    let set = cfg.load()?;
    let mut stages = cfg.stages.clone();
    close_stages(&mut stages);
    let cfg = RunConfig { stages, ..cfg.clone() };
    let halves: Vec<HalfReport> = set.halves.iter().map(|h| run_half(&h.problem, h.side, &cfg)).collect();

    let mut notes = set.notes.clone();
    if halves.len() == 2 {
        let labels: Vec<Option<EndpointLabel>> = halves.iter().map(|h| h.verdicts.label).collect();
        if labels.iter().all(|l| *l == Some(EndpointLabel::LimitPoint)) {
            notes.push("limit point at both ends: the maximal operator on the whole line is self-adjoint".into());
        }
    }
    let mut consistency = Vec::new();
    for h in &halves {
        consistency.extend(consistency_suite(&h.verdicts, h.tag()));
    }
    let failed_stages = halves
        .iter()
        .flat_map(|h| h.stages.failed().into_iter().map(move |s| format!("{}:{s}", h.tag())))
        .collect();
    let generated_at_unix = (!cfg.reproducible).then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    Ok(ConsolidatedReport {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        generated_at_unix,
        problem: set.name,
        source: cfg.source.to_string(),
        settings: Settings {
            stages: cfg.stages.clone(),
            rho_max: cfg.rho_max,
            d_max: cfg.d_max,
            z: cfg.z,
            tol: cfg.tol,
            lambdas: cfg.lambdas.clone(),
            reflect: cfg.reflect,
        },
        notes,
        consistency_failed: any_failed(&consistency),
        consistency,
        failed_stages,
        halves,
        sidecars: Vec::new(),
    })
}

/// Write `contents` next to `path` and rename over it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn sidecar_path(out: &Path, half: &str, kind: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.{half}.{kind}.csv"))
}

fn write_oscillation_csv<W: Write>(reports: &[OscillationReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "lambda,d,count")?;
    for r in reports {
        for (d, n) in r.d_ladder.iter().zip(&r.counts) {
            writeln!(w, "{:e},{:e},{}", r.lambda, d, n)?;
        }
    }
    Ok(())
}

/// Write CSV sidecars and the JSON report (atomically) under `out`.
pub fn write_outputs(report: &mut ConsolidatedReport, out: &Path) -> Result<(), HarnessError> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut sidecars = Vec::new();
    for h in &report.halves {
        let tag = h.tag();
        let mut emit = |kind: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<(), HarnessError> {
            let path = sidecar_path(out, tag, kind);
            let mut buf = Vec::new();
            f(&mut buf).map_err(io_err(&path))?;
            write_atomic(&path, &buf)?;
            sidecars.push(path.file_name().unwrap().to_string_lossy().into_owned());
            Ok(())
        };
        if let Some(r) = h.stages.semibound.as_ref().and_then(|o| o.ok()) {
            emit("semibound", &|b| r.write_csv(b))?;
        }
        if let Some(r) = h.stages.criteria.as_ref().and_then(|o| o.ok()) {
            emit("growth", &|b| r.pw_growth.write_csv(b))?;
        }
        if let Some(r) = h.stages.oscillate.as_ref().and_then(|o| o.ok()) {
            emit("oscillation", &|b| write_oscillation_csv(r, b))?;
        }
        if let Some(r) = h.stages.replay.as_ref().and_then(|o| o.ok()) {
            emit("replay", &|b| r.write_csv(b))?;
        }
    }
    report.sidecars = sidecars;
    write_atomic(out, report.to_json()?.as_bytes())
}

/// Re-evaluate the consistency checks on a saved report. Only the
/// `halves[].verdicts` blocks are read.
pub fn findings_from_report_json(text: &str) -> Result<Vec<Finding>, HarnessError> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    let halves = v
        .get("halves")
        .and_then(|h| h.as_array())
        .ok_or_else(|| HarnessError::Invalid("report has no `halves` array".into()))?;
    let mut out = Vec::new();
    for (i, h) in halves.iter().enumerate() {
        let summary: VerdictSummary = serde_json::from_value(
            h.get("verdicts")
                .cloned()
                .ok_or_else(|| HarnessError::Invalid(format!("halves[{i}] has no `verdicts`")))?,
        )?;
        let tag = match h.get("side").and_then(|s| s.as_str()) {
            Some("left_reflected") => "left".to_string(),
            Some("right") | None => "right".to_string(),
            Some(other) => other.to_string(),
        };
        out.extend(consistency_suite(&summary, &tag));
    }
    Ok(out)
}

/// A minimal saved report carrying the fabricated inconsistent verdicts.
pub fn fabricated_inconsistent_report_json() -> String {
    let v = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "problem": "fabricated_inconsistent",
        "halves": [{
            "name": "fabricated_inconsistent",
            "side": "right",
            "m": 1,
            "c": 0.0,
            "verdicts": fabricated_inconsistent_summary(),
        }],
    });
    serde_json::to_string_pretty(&v).expect("static JSON") + "\n"
}

/// One-line-per-check text summary.
pub fn format_findings(findings: &[Finding]) -> String {
    let mut s = String::new();
    for f in findings {
        let status = match f.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skip => "SKIP",
        };
        s.push_str(&format!("[{status}] {}/{} ({}) {}\n", f.half, f.check, f.theorem, f.reason));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_parsing() {
        assert_eq!(parse_stages("all").unwrap(), Stage::ALL.to_vec());
        assert_eq!(parse_stages("replay").unwrap(), vec![Stage::Semibound, Stage::Replay]);
        assert_eq!(parse_stages("classify, criteria").unwrap(), vec![Stage::Criteria, Stage::Classify]);
        assert!(parse_stages("bogus").is_err());
    }

    #[test]
    fn config_checks() {
        let mut cfg = RunConfig::builtin("free");
        cfg.tol = Some(-1.0);
        assert!(matches!(run(&cfg), Err(HarnessError::Invalid(_))));
        let cfg = RunConfig::builtin("nope");
        assert!(matches!(run(&cfg), Err(HarnessError::UnknownBuiltin(_))));
        let mut cfg = RunConfig::builtin("free");
        cfg.reflect = true;
        assert!(matches!(run(&cfg), Err(HarnessError::Invalid(_))));
    }

    #[test]
    fn quartic_semibound_classify() {
        let mut cfg = RunConfig::builtin("quartic_lc").with_stages(&[Stage::Semibound, Stage::Classify]);
        cfg.reproducible = true;
        let r = run(&cfg).unwrap();
        let v = &r.halves[0].verdicts;
        assert_eq!(v.semibound, Some(SemiboundVerdict::UnboundedBelow));
        assert_eq!(v.label, Some(EndpointLabel::LimitCircle));
        assert!(r.consistency.iter().all(|f| f.status == CheckStatus::Skip), "{:#?}", r.consistency);
        assert!(r.halves[0].stages.criteria.is_none());
        assert!(r.generated_at_unix.is_none() && r.halves[0].timings_ms.is_none());
    }

    #[test]
    fn fixture_report_fails() {
        let f = findings_from_report_json(&fabricated_inconsistent_report_json()).unwrap();
        assert!(any_failed(&f));
        assert!(format_findings(&f).contains("[FAIL] right/C"));
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(
            sidecar_path(Path::new("/tmp/x/out.json"), "right", "semibound"),
            PathBuf::from("/tmp/x/out.right.semibound.csv")
        );
    }
}
