use nalgebra::DMatrix;

use super::dopri::{self, Workspace};
use super::{OdeError, OdeOptions};
use crate::coefficients::{CoeffError, FieldKind, Problem, SegmentView};
use crate::linalg::{qr_positive, CMat, C64};

/// Flat layout of the state: `U` (m×k), `V` (m×k) and the running weighted
/// Gram block `M = ∫ U* R U` (k×k), all complex, row-major, re/im interleaved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub m: usize,
    pub k: usize,
}

impl Layout {
    pub fn dim(&self) -> usize {
        2 * (2 * self.m * self.k + self.k * self.k)
    }

    fn v_off(&self) -> usize {
        2 * self.m * self.k
    }

    fn g_off(&self) -> usize {
        4 * self.m * self.k
    }

    fn read(data: &[f64], rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |i, j| {
            let o = 2 * (i * cols + j);
            C64::new(data[o], data[o + 1])
        })
    }

    fn write(data: &mut [f64], a: &CMat) {
        let cols = a.ncols();
        for i in 0..a.nrows() {
            for j in 0..cols {
                let o = 2 * (i * cols + j);
                data[o] = a[(i, j)].re;
                data[o + 1] = a[(i, j)].im;
            }
        }
    }

    pub fn u(&self, y: &[f64]) -> CMat {
        Self::read(&y[..self.v_off()], self.m, self.k)
    }

    pub fn v(&self, y: &[f64]) -> CMat {
        Self::read(&y[self.v_off()..self.g_off()], self.m, self.k)
    }

    pub fn gram(&self, y: &[f64]) -> CMat {
        Self::read(&y[self.g_off()..], self.k, self.k)
    }

    pub fn set_uv(&self, y: &mut [f64], u: &CMat, v: &CMat) {
        let (vo, go) = (self.v_off(), self.g_off());
        Self::write(&mut y[..vo], u);
        Self::write(&mut y[vo..go], v);
    }

    fn clear_gram(&self, y: &mut [f64]) {
        let go = self.g_off();
        y[go..].fill(0.0);
    }
}

/// Coefficient formulas frozen on one breakpoint-free piece, so that the
/// closed right end of the piece is evaluated with the piece's own formula.
struct Piece<'p> {
    end: f64,
    p: SegmentView<'p>,
    q: SegmentView<'p>,
    r: SegmentView<'p>,
}

struct Rhs {
    z: C64,
    shift: f64,
    m: usize,
    p: Vec<f64>,
    q: Vec<f64>,
    r: Vec<f64>,
    pinv: Vec<f64>,
    with_gram: bool,
}

fn eval_view(view: &SegmentView<'_>, kind: FieldKind, x: f64, out: &mut [f64]) -> Result<(), CoeffError> {
    for (o, e) in out.iter_mut().zip(view.entries) {
        *o = e.eval(x).map_err(|source| CoeffError::Eval {
            coeff: kind.label(),
            x,
            source,
        })?;
    }
    Ok(())
}

impl Rhs {
    fn invert_p(&mut self, x: f64) -> Result<(), OdeError> {
        let m = self.m;
        match m {
            1 => {
                if self.p[0] == 0.0 {
                    return Err(OdeError::SingularP { x });
                }
                self.pinv[0] = 1.0 / self.p[0];
            }
            2 => {
                let (a, b, c, d) = (self.p[0], self.p[1], self.p[2], self.p[3]);
                let det = a * d - b * c;
                if det == 0.0 {
                    return Err(OdeError::SingularP { x });
                }
                self.pinv.copy_from_slice(&[d / det, -b / det, -c / det, a / det]);
            }
            _ => {
                let inv = DMatrix::from_row_slice(m, m, &self.p)
                    .try_inverse()
                    .ok_or(OdeError::SingularP { x })?;
                for i in 0..m {
                    for j in 0..m {
                        self.pinv[i * m + j] = inv[(i, j)];
                    }
                }
            }
        }
        Ok(())
    }

    fn eval(&mut self, piece: &Piece<'_>, layout: Layout, x: f64, y: &[f64], dy: &mut [f64]) -> Result<(), OdeError> {
        let (m, k) = (layout.m, layout.k);
        eval_view(&piece.p, FieldKind::PLike, x, &mut self.p)?;
        eval_view(&piece.q, FieldKind::QLike, x, &mut self.q)?;
        eval_view(&piece.r, FieldKind::RLike, x, &mut self.r)?;
        self.invert_p(x)?;
        let vo = layout.v_off();
        let go = layout.g_off();
        let at = |base: usize, i: usize, j: usize| -> C64 {
            let o = base + 2 * (i * k + j);
            C64::new(y[o], y[o + 1])
        };
        for i in 0..m {
            for j in 0..k {
                let mut du = C64::new(0.0, 0.0);
                let mut dv = C64::new(0.0, 0.0);
                for l in 0..m {
                    du += at(vo, l, j) * self.pinv[i * m + l];
                    let ql = self.q[i * m + l] - self.shift * self.r[i * m + l];
                    dv += at(0, l, j) * (C64::new(ql, 0.0) - self.z * self.r[i * m + l]);
                }
                let o = 2 * (i * k + j);
                dy[o] = du.re;
                dy[o + 1] = du.im;
                dy[vo + o] = dv.re;
                dy[vo + o + 1] = dv.im;
            }
        }
        if self.with_gram {
            for a in 0..k {
                for b in 0..k {
                    let mut s = C64::new(0.0, 0.0);
                    for i in 0..m {
                        let ui = at(0, i, a).conj();
                        for l in 0..m {
                            let rl = self.r[i * m + l];
                            if rl != 0.0 {
                                s += ui * at(0, l, b) * rl;
                            }
                        }
                    }
                    let o = go + 2 * (a * k + b);
                    dy[o] = s.re;
                    dy[o + 1] = s.im;
                }
            }
        } else {
            dy[go..].fill(0.0);
        }
        Ok(())
    }
}

/// Closed stretch between renormalisations / checkpoints. The true solution
/// on the stretch is `Y_ren · e^{log_scale} · t_hat`, and the true weighted
/// Gram increment is `e^{2 log_scale} t_hat* m_seg t_hat`.
#[derive(Debug, Clone)]
pub struct GramSegment {
    pub x0: f64,
    pub x1: f64,
    pub t_hat: CMat,
    pub log_scale: f64,
    pub m_seg: CMat,
}

#[derive(Debug, Clone)]
pub struct GridPoint {
    pub x: f64,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
    pub seg: usize,
}

/// What an observer sees for a candidate step.
pub struct StepView<'a> {
    pub layout: Layout,
    pub x0: f64,
    pub y0: &'a [f64],
    pub x1: f64,
    pub y1: &'a [f64],
}

/// Stateful integrator for the first-order system
/// `U' = P⁻¹V`, `V' = (Q − zR)U`, `M' = U*RU` from `x = c`.
pub struct Integrator<'p> {
    problem: &'p Problem,
    z: C64,
    layout: Layout,
    opts: OdeOptions,
    x: f64,
    y: Vec<f64>,
    f: Vec<f64>,
    f_valid: bool,
    h: f64,
    piece: Option<Piece<'p>>,
    rhs: Rhs,
    ws: Workspace,
    t_hat: CMat,
    log_scale: f64,
    seg_start: f64,
    segments: Vec<GramSegment>,
    grid: Vec<GridPoint>,
    checkpoints: Vec<f64>,
    steps: usize,
    rejected: usize,
    renormalisations: usize,
}

impl<'p> Integrator<'p> {
    /// Start at `x = c` with columns `(U₀; V₀)`. Columns must be independent
    /// as 2m-vectors unless they are all zero.
    pub fn new(problem: &'p Problem, z: C64, u0: &CMat, v0: &CMat, opts: OdeOptions) -> Result<Self, OdeError> {
        let m = problem.m();
        if u0.nrows() != m || v0.nrows() != m || u0.ncols() != v0.ncols() || u0.ncols() == 0 {
            return Err(OdeError::InvalidInit(format!(
                "expected two {m}×k blocks, got {:?} and {:?}",
                u0.shape(),
                v0.shape()
            )));
        }
        if u0.iter().chain(v0.iter()).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(OdeError::InvalidInit("non-finite initial data".into()));
        }
        if !(opts.tol > 0.0) {
            return Err(OdeError::Invalid("tolerance must be positive".into()));
        }
        let k = u0.ncols();
        let layout = Layout { m, k };
        let mut y = vec![0.0; layout.dim()];
        layout.set_uv(&mut y, u0, v0);
        let c = problem.c();
        let mut it = Self {
            problem,
            z,
            layout,
            opts,
            x: c,
            f: vec![0.0; y.len()],
            y,
            f_valid: false,
            h: opts.h_init,
            piece: None,
            rhs: Rhs {
                z,
                shift: problem.shift(),
                m,
                p: vec![0.0; m * m],
                q: vec![0.0; m * m],
                r: vec![0.0; m * m],
                pinv: vec![0.0; m * m],
                with_gram: opts.track_gram,
            },
            ws: Workspace::new(layout.dim()),
            t_hat: CMat::identity(k, k),
            log_scale: 0.0,
            seg_start: c,
            segments: Vec::new(),
            grid: Vec::new(),
            checkpoints: vec![c],
            steps: 0,
            rejected: 0,
            renormalisations: 0,
        };
        it.ensure_piece()?;
        it.refresh_derivative()?;
        it.push_grid();
        Ok(it)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    /// Renormalised state at the current point.
    pub fn state(&self) -> &[f64] {
        &self.y
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn t_hat(&self) -> &CMat {
        &self.t_hat
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn ensure_piece(&mut self) -> Result<(), OdeError> {
        if let Some(p) = &self.piece {
            if self.x < p.end {
                return Ok(());
            }
        }
        let b = self.problem.b().value();
        let end = self
            .problem
            .next_breakpoint_after(self.x)
            .map_or(b, |bp| bp.min(b));
        let mid = if end.is_finite() { 0.5 * (self.x + end) } else { self.x + 1.0 };
        let view = |kind: FieldKind| -> Result<SegmentView<'p>, OdeError> {
            let field = match kind {
                FieldKind::PLike => self.problem.p_field(),
                FieldKind::QLike => self.problem.q_field(),
                FieldKind::RLike => self.problem.r_field(),
            };
            field
                .segment_at(mid)
                .ok_or(OdeError::Coefficient(CoeffError::OutOfDomain {
                    coeff: kind.label(),
                    x: mid,
                }))
        };
        self.piece = Some(Piece {
            end,
            p: view(FieldKind::PLike)?,
            q: view(FieldKind::QLike)?,
            r: view(FieldKind::RLike)?,
        });
        self.f_valid = false;
        Ok(())
    }

    fn refresh_derivative(&mut self) -> Result<(), OdeError> {
        let piece = self.piece.as_ref().expect("piece set");
        self.rhs.eval(piece, self.layout, self.x, &self.y, &mut self.f)?;
        self.f_valid = true;
        Ok(())
    }

    fn push_grid(&mut self) {
        if self.opts.store_grid {
            self.grid.push(GridPoint {
                x: self.x,
                y: self.y.clone(),
                dy: self.f.clone(),
                seg: self.segments.len(),
            });
        }
    }

    /// Advance exactly to `x_end`.
    pub fn advance_to(&mut self, x_end: f64) -> Result<(), OdeError> {
        self.advance_with(x_end, |_| true)
    }

    /// Advance exactly to `x_end`; `accept` may veto a step that passed the
    /// error test, in which case the step is halved and retried.
    pub fn advance_with<F>(&mut self, x_end: f64, mut accept: F) -> Result<(), OdeError>
    where
        F: FnMut(&StepView<'_>) -> bool,
    {
        if !(x_end <= self.problem.b().value()) || x_end.is_nan() {
            return Err(OdeError::OutOfRange {
                x: x_end,
                lo: self.problem.c(),
                hi: self.problem.b().value(),
            });
        }
        while self.x < x_end {
            self.ensure_piece()?;
            if !self.f_valid {
                self.refresh_derivative()?;
                // record the right derivative at a piece boundary
                if self.opts.store_grid {
                    self.push_grid();
                }
            }
            let piece_end = self.piece.as_ref().map_or(x_end, |p| p.end);
            let stop = x_end.min(piece_end);
            let remaining = stop - self.x;
            let mut h = self.h.min(self.opts.h_max).min(remaining);
            let lands = h >= remaining * (1.0 - 1e-12);
            if lands {
                h = remaining;
            }
            if h < self.opts.h_min * self.x.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { x: self.x, h });
            }
            if self.steps + self.rejected >= self.opts.max_steps {
                return Err(OdeError::TooManySteps {
                    x: self.x,
                    max_steps: self.opts.max_steps,
                });
            }
            let layout = self.layout;
            let piece = self.piece.as_ref().expect("piece set");
            let rhs = &mut self.rhs;
            let mut f = |x: f64, y: &[f64], dy: &mut [f64]| rhs.eval(piece, layout, x, y, dy);
            let err = dopri::step(&mut f, self.x, &self.y, &self.f, h, self.opts.atol, self.opts.tol, &mut self.ws)?;
            if !err.is_finite() || err > 1.0 {
                self.rejected += 1;
                self.h = h * if err.is_finite() { dopri::step_factor(err).min(1.0) } else { 0.1 };
                continue;
            }
            let x1 = if lands { stop } else { self.x + h };
            let ok = accept(&StepView {
                layout,
                x0: self.x,
                y0: &self.y,
                x1,
                y1: &self.ws.y_new,
            });
            if !ok {
                self.rejected += 1;
                self.h = 0.5 * h;
                continue;
            }
            self.steps += 1;
            self.x = x1;
            std::mem::swap(&mut self.y, &mut self.ws.y_new);
            self.f.copy_from_slice(&self.ws.k7);
            self.push_grid();
            self.h = h * dopri::step_factor(err);
            if lands {
                // keep the step suggestion from collapsing at piece ends
                self.h = self.h.max(remaining);
            }
            self.maybe_renormalise()?;
        }
        Ok(())
    }

    fn close_segment(&mut self) {
        let m_seg = self.layout.gram(&self.y);
        self.segments.push(GramSegment {
            x0: self.seg_start,
            x1: self.x,
            t_hat: self.t_hat.clone(),
            log_scale: self.log_scale,
            m_seg,
        });
        self.layout.clear_gram(&mut self.y);
        self.seg_start = self.x;
    }

    fn maybe_renormalise(&mut self) -> Result<(), OdeError> {
        let u = self.layout.u(&self.y);
        let v = self.layout.v(&self.y);
        let stacked = stack(&u, &v);
        let max_norm = (0..stacked.ncols())
            .map(|j| stacked.column(j).norm())
            .fold(0.0f64, f64::max);
        if max_norm <= self.opts.renorm_threshold {
            return Ok(());
        }
        self.renormalise_now()
    }

    /// Force a QR renormalisation at the current point.
    pub fn renormalise_now(&mut self) -> Result<(), OdeError> {
        let m = self.layout.m;
        let u = self.layout.u(&self.y);
        let v = self.layout.v(&self.y);
        let (q, r) = qr_positive(&stack(&u, &v));
        if (0..r.nrows()).any(|i| r[(i, i)].re == 0.0) {
            // all-zero data stays zero; nothing to renormalise
            return Ok(());
        }
        self.close_segment();
        let new_u = q.rows(0, m).clone_owned();
        let new_v = q.rows(m, m).clone_owned();
        self.layout.set_uv(&mut self.y, &new_u, &new_v);
        let t = &r * &self.t_hat;
        let scale = t.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        self.t_hat = t.unscale(scale);
        self.log_scale += scale.ln();
        self.renormalisations += 1;
        self.refresh_derivative()?;
        self.push_grid();
        Ok(())
    }

    /// Close the current Gram stretch at the current point.
    pub fn checkpoint(&mut self) {
        if self.checkpoints.last() == Some(&self.x) && self.seg_start == self.x {
            return;
        }
        self.close_segment();
        self.checkpoints.push(self.x);
        if self.f_valid {
            let _ = self.refresh_derivative();
        }
        self.push_grid();
    }

    /// Gram stretches closed so far.
    pub fn segments(&self) -> &[GramSegment] {
        &self.segments
    }

    /// True solution columns at the current point, scaled as
    /// `(U, V) = e^{log_scale} (Û, V̂)`.
    pub fn scaled_state(&self) -> (CMat, CMat, f64) {
        let u = self.layout.u(&self.y) * &self.t_hat;
        let v = self.layout.v(&self.y) * &self.t_hat;
        (u, v, self.log_scale)
    }

    pub fn finish(mut self) -> Trajectory {
        if self.seg_start < self.x || self.segments.is_empty() {
            self.close_segment();
        }
        if self.checkpoints.last() != Some(&self.x) {
            self.checkpoints.push(self.x);
        }
        Trajectory {
            layout: self.layout,
            z: self.z,
            c: self.problem.c(),
            x_end: self.x,
            grid: self.grid,
            segments: self.segments,
            checkpoints: self.checkpoints,
            stats: SolveStats {
                steps: self.steps,
                rejected: self.rejected,
                renormalisations: self.renormalisations,
            },
        }
    }
}

pub(crate) fn stack(u: &CMat, v: &CMat) -> CMat {
    let (m, k) = u.shape();
    let mut s = CMat::zeros(2 * m, k);
    s.rows_mut(0, m).copy_from(u);
    s.rows_mut(m, m).copy_from(v);
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SolveStats {
    pub steps: usize,
    pub rejected: usize,
    pub renormalisations: usize,
}

/// Completed integration: renormalised grid, Gram stretches and scale log.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub layout: Layout,
    pub z: C64,
    pub c: f64,
    pub x_end: f64,
    pub grid: Vec<GridPoint>,
    pub segments: Vec<GramSegment>,
    pub checkpoints: Vec<f64>,
    pub stats: SolveStats,
}

impl Trajectory {
    /// Renormalised state at `x` (cubic Hermite between grid points) and the
    /// index of its Gram stretch.
    pub fn ren_state_at(&self, x: f64) -> Result<(Vec<f64>, usize), OdeError> {
        let out = || OdeError::OutOfRange {
            x,
            lo: self.c,
            hi: self.x_end,
        };
        if self.grid.is_empty() || !(x >= self.c && x <= self.x_end) {
            return Err(out());
        }
        let idx = self.grid.partition_point(|g| g.x <= x);
        if idx == 0 {
            return Err(out());
        }
        let a = &self.grid[idx - 1];
        if a.x == x || idx == self.grid.len() {
            return Ok((a.y.clone(), a.seg));
        }
        let b = &self.grid[idx];
        let h = b.x - a.x;
        let t = (x - a.x) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let y = (0..a.y.len())
            .map(|i| h00 * a.y[i] + h10 * h * a.dy[i] + h01 * b.y[i] + h11 * h * b.dy[i])
            .collect();
        Ok((y, a.seg))
    }

    /// `(U T̂, V T̂, s)` with the true state equal to `e^s` times the pair.
    pub fn scaled_state_at(&self, x: f64) -> Result<(CMat, CMat, f64), OdeError> {
        let (y, seg) = self.ren_state_at(x)?;
        let s = &self.segments[seg.min(self.segments.len() - 1)];
        Ok((self.layout.u(&y) * &s.t_hat, self.layout.v(&y) * &s.t_hat, s.log_scale))
    }

    /// True (unrenormalised) `(U, V)` at `x`.
    pub fn state_at(&self, x: f64) -> Result<(CMat, CMat), OdeError> {
        let (u, v, s) = self.scaled_state_at(x)?;
        if s > 700.0 {
            return Err(OdeError::Overflow { x, log_scale: s });
        }
        let f = s.exp();
        Ok((u.map(|e| e * f), v.map(|e| e * f)))
    }

    /// Renormalised Gram accumulated on stretch `si` between `a` and `b`
    /// (both inside the stretch). Interior points are read from the grid.
    fn partial_gram(&self, si: usize, a: f64, b: f64) -> CMat {
        let s = &self.segments[si];
        let at = |x: f64| -> CMat {
            if x <= s.x0 {
                return CMat::zeros(self.layout.k, self.layout.k);
            }
            if x >= s.x1 {
                return s.m_seg.clone();
            }
            match self.ren_state_at(x) {
                Ok((y, seg)) if seg == si => self.layout.gram(&y),
                _ => CMat::zeros(self.layout.k, self.layout.k),
            }
        };
        at(b) - at(a)
    }

    /// `ln ∫_{x0}^{x1} (Yw)* R (Yw)` for a direction `w` in initial
    /// coordinates; `-inf` when zero. Stretches cut by `x0` or `x1` are
    /// resolved from the stored grid.
    pub fn log_weighted_norm(&self, w: &CMat, x0: f64, x1: f64) -> f64 {
        let mut terms = Vec::new();
        for (i, s) in self.segments.iter().enumerate() {
            if s.x1 <= x0 || s.x0 >= x1 || s.x1 <= s.x0 {
                continue;
            }
            let tw = &s.t_hat * w;
            let g = if s.x0 >= x0 && s.x1 <= x1 {
                s.m_seg.clone()
            } else {
                self.partial_gram(i, x0.max(s.x0), x1.min(s.x1))
            };
            let val = (tw.adjoint() * g * &tw)[(0, 0)].re;
            if val > 0.0 {
                terms.push(2.0 * s.log_scale + val.ln());
            }
        }
        log_sum_exp(&terms)
    }

    /// `∫_{x0}^{x1} (YW)* R (YW)` for a block of directions `W`, formed
    /// stretch by stretch so that cancellation inside `YW` costs accuracy
    /// relative to `|YW|`, not to `|Y|`. Returns the matrix scaled by
    /// `e^{-log_ref}` and `log_ref`.
    pub fn gram_restricted(&self, w: &CMat, x0: f64, x1: f64) -> (CMat, f64) {
        let j = w.ncols();
        let mut terms: Vec<(f64, CMat)> = Vec::new();
        for (i, s) in self.segments.iter().enumerate() {
            if s.x1 <= x0 || s.x0 >= x1 || s.x1 <= s.x0 {
                continue;
            }
            let tw = &s.t_hat * w;
            let g = if s.x0 >= x0 && s.x1 <= x1 {
                s.m_seg.clone()
            } else {
                self.partial_gram(i, x0.max(s.x0), x1.min(s.x1))
            };
            let a = tw.adjoint() * g * &tw;
            let mx = a.iter().map(|e| e.norm()).fold(0.0, f64::max);
            if mx > 0.0 {
                terms.push((2.0 * s.log_scale + mx.ln(), a.map(|e| e / mx)));
            }
        }
        let log_ref = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let mut out = CMat::zeros(j, j);
        if !log_ref.is_finite() {
            return (out, 0.0);
        }
        for (l, a) in terms {
            let f = (l - log_ref).exp();
            out += a.map(|e| e * f);
        }
        (out, log_ref)
    }

    /// Total weighted Gram `∫_c^{x1} Y* R Y` scaled by `e^{-2 s_ref}`;
    /// returns the matrix and `s_ref`.
    pub fn gram_scaled(&self, x1: f64) -> (CMat, f64) {
        let k = self.layout.k;
        let live = |s: &GramSegment| s.x0 < x1 && s.x1 > s.x0;
        let s_ref = self
            .segments
            .iter()
            .filter(|s| live(s))
            .map(|s| s.log_scale)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut g = CMat::zeros(k, k);
        if !s_ref.is_finite() {
            return (g, 0.0);
        }
        for (i, s) in self.segments.iter().enumerate().filter(|(_, s)| live(s)) {
            let f = (2.0 * (s.log_scale - s_ref)).exp();
            let m = if s.x1 <= x1 { s.m_seg.clone() } else { self.partial_gram(i, s.x0, x1) };
            g += (s.t_hat.adjoint() * m * &s.t_hat).map(|e| e * f);
        }
        (g, s_ref)
    }
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
}
