use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::CoeffError;
use crate::exprdsl::{parse_expr, BinOp, Expr};

/// Which coefficient a field plays; decides the positivity check applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldKind {
    /// Leading coefficient: Hermitian positive definite.
    PLike,
    /// Potential: Hermitian.
    QLike,
    /// Weight: Hermitian positive definite except on declared null sets.
    RLike,
}

impl FieldKind {
    pub fn label(self) -> &'static str {
        match self {
            FieldKind::PLike => "P",
            FieldKind::QLike => "Q",
            FieldKind::RLike => "R",
        }
    }
}

/// One piece `[from, to)` of a piecewise definition; `entries` is row-major m×m.
#[derive(Debug, Clone)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    pub entries: Vec<Expr>,
    /// The field is allowed to vanish here (weight null set).
    pub null_set: bool,
}

/// Lazily generated windows `[n, n + 1/n)` for `n = 1..=n_max`, with
/// `inside` on the windows and `outside` everywhere else.
#[derive(Debug, Clone)]
pub struct HarmonicWindows {
    pub inside: Vec<Expr>,
    pub outside: Vec<Expr>,
    pub outside_null: bool,
    pub n_max: u64,
}

impl HarmonicWindows {
    pub const DEFAULT_N_MAX: u64 = 1_000_000;

    fn window_end(n: u64) -> f64 {
        n as f64 + 1.0 / n as f64
    }

    fn window_containing(&self, x: f64) -> Option<u64> {
        if !(x >= 1.0) {
            return None;
        }
        let n = x.floor() as u64;
        (n <= self.n_max && x < Self::window_end(n)).then_some(n)
    }
}

#[derive(Debug, Clone)]
pub enum PiecewiseDef {
    Segments(Vec<Segment>),
    Windows(HarmonicWindows),
}

/// Borrowed view of the definition on a sub-interval `[from, to)`.
#[derive(Debug, Clone, Copy)]
pub struct SegmentView<'a> {
    pub from: f64,
    pub to: f64,
    pub entries: &'a [Expr],
    pub null_set: bool,
}

impl SegmentView<'_> {
    /// Evaluate the piece's own formula (no segment lookup), so the closed
    /// right endpoint can be sampled as a left limit.
    pub fn eval_matrix(&self, m: usize, x: f64, kind: FieldKind) -> Result<DMatrix<f64>, CoeffError> {
        let mut out = DMatrix::zeros(m, m);
        for (k, e) in self.entries.iter().enumerate() {
            out[(k / m, k % m)] = e.eval(x).map_err(|source| CoeffError::Eval {
                coeff: kind.label(),
                x,
                source,
            })?;
        }
        Ok(out)
    }
}

/// Piecewise scalar or matrix coefficient.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    m: usize,
    kind: FieldKind,
    def: PiecewiseDef,
}

impl CoefficientField {
    pub fn from_segments(m: usize, kind: FieldKind, segments: Vec<Segment>) -> Result<Self, CoeffError> {
        if m == 0 {
            return Err(CoeffError::Invalid("dimension m must be positive".into()));
        }
        if segments.is_empty() {
            return Err(CoeffError::Invalid(format!("{} has no segments", kind.label())));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.from < s.to) {
                return Err(CoeffError::Invalid(format!(
                    "{} segment {i}: empty interval [{}, {})",
                    kind.label(),
                    s.from,
                    s.to
                )));
            }
            if s.entries.len() != m * m {
                return Err(CoeffError::Invalid(format!(
                    "{} segment {i}: expected {}x{} entries, got {}",
                    kind.label(),
                    m,
                    m,
                    s.entries.len()
                )));
            }
            if i > 0 && segments[i - 1].to != s.from {
                return Err(CoeffError::Invalid(format!(
                    "{} segments {} and {i} are not contiguous ({} != {})",
                    kind.label(),
                    i - 1,
                    segments[i - 1].to,
                    s.from
                )));
            }
        }
        Ok(Self {
            m,
            kind,
            def: PiecewiseDef::Segments(segments),
        })
    }

    pub fn from_windows(m: usize, kind: FieldKind, windows: HarmonicWindows) -> Result<Self, CoeffError> {
        if windows.inside.len() != m * m || windows.outside.len() != m * m {
            return Err(CoeffError::Invalid("window expressions do not match m".into()));
        }
        Ok(Self {
            m,
            kind,
            def: PiecewiseDef::Windows(windows),
        })
    }

    /// Single formula on the whole real line.
    pub fn uniform(m: usize, kind: FieldKind, entries: Vec<Expr>) -> Result<Self, CoeffError> {
        Self::from_segments(
            m,
            kind,
            vec![Segment {
                from: f64::NEG_INFINITY,
                to: f64::INFINITY,
                entries,
                null_set: false,
            }],
        )
    }

    /// Uniform field from row-major formula strings. Panics on bad formulas;
    /// intended for built-in problems and tests.
    pub fn uniform_str(m: usize, kind: FieldKind, entries: &[&str]) -> Self {
        let entries = entries.iter().map(|s| parse_expr(s).expect("builtin formula")).collect();
        Self::uniform(m, kind, entries).expect("builtin field")
    }

    /// `diag(v, …, v)` for a formula `v`.
    pub fn scaled_identity(m: usize, kind: FieldKind, v: &str) -> Self {
        let entries: Vec<String> = (0..m * m)
            .map(|k| if k / m == k % m { v.to_string() } else { "0".to_string() })
            .collect();
        let refs: Vec<&str> = entries.iter().map(String::as_str).collect();
        Self::uniform_str(m, kind, &refs)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn definition(&self) -> &PiecewiseDef {
        &self.def
    }

    /// Domain covered by the definition.
    pub fn span(&self) -> (f64, f64) {
        match &self.def {
            PiecewiseDef::Segments(s) => (s[0].from, s[s.len() - 1].to),
            PiecewiseDef::Windows(_) => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Piece containing `x`; at a breakpoint the right piece is used.
    pub fn segment_at(&self, x: f64) -> Option<SegmentView<'_>> {
        match &self.def {
            PiecewiseDef::Segments(segs) => {
                let i = segs.partition_point(|s| s.from <= x);
                if i == 0 {
                    return None;
                }
                let s = &segs[i - 1];
                (x < s.to).then_some(SegmentView {
                    from: s.from,
                    to: s.to,
                    entries: &s.entries,
                    null_set: s.null_set,
                })
            }
            PiecewiseDef::Windows(w) => Some(match w.window_containing(x) {
                Some(n) => SegmentView {
                    from: n as f64,
                    to: HarmonicWindows::window_end(n),
                    entries: &w.inside,
                    null_set: false,
                },
                None => {
                    let (from, to) = window_gap(w, x);
                    SegmentView {
                        from,
                        to,
                        entries: &w.outside,
                        null_set: w.outside_null,
                    }
                }
            }),
        }
    }

    /// Evaluate into a row-major buffer of length m².
    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<(), CoeffError> {
        let seg = self.segment_at(x).ok_or(CoeffError::OutOfDomain {
            coeff: self.kind.label(),
            x,
        })?;
        for (o, e) in out.iter_mut().zip(seg.entries) {
            *o = e.eval(x).map_err(|source| CoeffError::Eval {
                coeff: self.kind.label(),
                x,
                source,
            })?;
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> Result<DMatrix<f64>, CoeffError> {
        let mut buf = vec![0.0; self.m * self.m];
        self.eval_into(x, &mut buf)?;
        Ok(DMatrix::from_row_slice(self.m, self.m, &buf))
    }

    /// First entry; the scalar value when m = 1.
    pub fn eval_scalar(&self, x: f64) -> Result<f64, CoeffError> {
        let seg = self.segment_at(x).ok_or(CoeffError::OutOfDomain {
            coeff: self.kind.label(),
            x,
        })?;
        seg.entries[0].eval(x).map_err(|source| CoeffError::Eval {
            coeff: self.kind.label(),
            x,
            source,
        })
    }

    /// Append the breakpoints strictly inside `(lo, hi)`.
    pub fn breakpoints_in(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        match &self.def {
            PiecewiseDef::Segments(segs) => {
                for s in segs {
                    for v in [s.from, s.to] {
                        if v > lo && v < hi {
                            out.push(v);
                        }
                    }
                }
            }
            PiecewiseDef::Windows(w) => {
                if hi <= 1.0 {
                    return;
                }
                let first = lo.floor().max(1.0) as u64;
                let last = (hi.ceil().max(1.0) as u64).min(w.n_max);
                for n in first..=last {
                    for v in [n as f64, HarmonicWindows::window_end(n)] {
                        if v > lo && v < hi {
                            out.push(v);
                        }
                    }
                }
            }
        }
    }

    /// Smallest breakpoint strictly greater than `x`, if any.
    pub fn next_breakpoint_after(&self, x: f64) -> Option<f64> {
        match &self.def {
            PiecewiseDef::Segments(segs) => {
                let i = segs.partition_point(|s| s.from <= x);
                if i < segs.len() {
                    Some(segs[i].from)
                } else {
                    segs.last().map(|s| s.to).filter(|&t| t > x && t.is_finite())
                }
            }
            PiecewiseDef::Windows(w) => {
                if x < 1.0 {
                    return Some(1.0);
                }
                let n = x.floor() as u64;
                if n > w.n_max {
                    return None;
                }
                let end = HarmonicWindows::window_end(n);
                if end > x && end < (n + 1) as f64 {
                    Some(end)
                } else if n < w.n_max {
                    Some((n + 1) as f64)
                } else if end > x {
                    Some(end)
                } else {
                    None
                }
            }
        }
    }

    /// Pieces of the definition clipped to `[lo, hi)`.
    pub fn segments_in(&self, lo: f64, hi: f64) -> Vec<SegmentView<'_>> {
        let mut pts = vec![lo];
        self.breakpoints_in(lo, hi, &mut pts);
        pts.push(hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut out = Vec::with_capacity(pts.len());
        for w in pts.windows(2) {
            let mid = if w[1].is_finite() { 0.5 * (w[0] + w[1]) } else { w[0] + 1.0 };
            if let Some(seg) = self.segment_at(mid) {
                out.push(SegmentView {
                    from: w[0],
                    to: w[1],
                    ..seg
                });
            }
        }
        out
    }

    /// Restrict to `[lo, hi)`; only explicit segment lists are supported.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self, CoeffError> {
        let PiecewiseDef::Segments(_) = &self.def else {
            return Ok(self.clone());
        };
        let segs = self
            .segments_in(lo, hi)
            .into_iter()
            .map(|v| Segment {
                from: v.from,
                to: v.to,
                entries: v.entries.to_vec(),
                null_set: v.null_set,
            })
            .collect();
        Self::from_segments(self.m, self.kind, segs)
    }

    /// Pull back under `x ↦ 2c − x`.
    pub fn reflect(&self, c: f64) -> Result<Self, CoeffError> {
        let PiecewiseDef::Segments(segs) = &self.def else {
            return Err(CoeffError::Invalid(
                "reflection of windowed fields is not supported".into(),
            ));
        };
        let mirror = Expr::binary(BinOp::Sub, Expr::Const(2.0 * c), Expr::X);
        let mut out: Vec<Segment> = segs
            .iter()
            .map(|s| Segment {
                from: 2.0 * c - s.to,
                to: 2.0 * c - s.from,
                entries: s.entries.iter().map(|e| e.substitute_x(&mirror)).collect(),
                null_set: s.null_set,
            })
            .collect();
        out.reverse();
        Self::from_segments(self.m, self.kind, out)
    }
}

fn window_gap(w: &HarmonicWindows, x: f64) -> (f64, f64) {
    if x < 1.0 {
        return (f64::NEG_INFINITY, 1.0);
    }
    let n = x.floor() as u64;
    if n > w.n_max {
        return (HarmonicWindows::window_end(w.n_max), f64::INFINITY);
    }
    (HarmonicWindows::window_end(n), (n + 1) as f64)
}
