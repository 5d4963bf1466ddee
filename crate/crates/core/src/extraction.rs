//! Reconstruction of the additive generator of a black-box operation.
//!
//! Fix a base point `c` that is not idempotent, say `c < f(cⁿ)`. For a point
//! `x` and a rational `r = (p−q)/k` with `p, k ∈ A_n` and `q+1 ∈ A_n`, the
//! comparison `g(cᵖ) > g(xᵏ c^q)` holds exactly when `r > φ(x)`, where `φ`
//! is the generator normalised by `φ(c) = 1`. The set of such `r` is an
//! upper set of a dense set of rationals, so `φ(x)` is its infimum and can
//! be found by bisection over `p` at a fixed denominator `k`.
//!
//! When `c > f(cⁿ)` every comparison flips; the resulting table is
//! decreasing and is negated at the end, so the returned generator is always
//! increasing with `φ̂(c) = −1` in that branch.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axioms::{clamp_finite, AxiomKind, AxiomReport, Collector, SampleOutcome, Witness, WitnessDetail};
use crate::extension::{ExtendError, ExtendedOp};
use crate::generator::{GeneratorKind, GeneratorSpec};
use crate::interpolation::{InterpError, PiecewiseLinear};
use crate::interval::{ExtendedReal, Interval};
use crate::op::NaryOp;
use crate::sampling::{self, PointSampler};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractionError {
    #[error("every scanned point is (numerically) idempotent; largest |f(c^n) - c| was {max_displacement:e}")]
    AllIdempotent { max_displacement: f64 },
    #[error("base point {c} is unusable: {reason}")]
    InvalidBasePoint { c: f64, reason: String },
    #[error("grid point {x} is outside the domain")]
    InvalidGrid { x: f64 },
    #[error(
        "precision exhausted at (p={p}, q={q}, k={k}): value {value} is not usable; \
         reduce the resolution or move c toward the idempotent"
    )]
    PrecisionExhausted { p: u64, q: u64, k: u64, value: f64 },
    #[error("no {side} bracket for x={x} within {blocks} blocks")]
    BracketNotFound { x: f64, side: &'static str, blocks: usize },
    #[error("extracted values regress: phi({x0}) = {v0} but phi({x1}) = {v1}")]
    MonotonicityViolation { x0: f64, v0: f64, x1: f64, v1: f64 },
    #[error("iterates stopped being strictly monotone at step {step}: {prev} then {next}")]
    SequenceNotMonotone { step: usize, prev: f64, next: f64 },
    #[error("iterate {value} left the domain at step {step}")]
    DomainEscape { step: usize, value: f64 },
    #[error("no tuple found inside the tabulated range after {tries} tries")]
    OutsideTable { tries: usize },
    #[error("all grid points are too close to a generator zero")]
    NoUsablePoints,
    #[error("generators have different arities ({0} and {1})")]
    ArityMismatch(usize, usize),
    #[error(transparent)]
    Interp(#[from] InterpError),
}

/// `(p − q)/k` with `p, k ≡ 1` and `q ≡ 0 (mod n−1)`; `p, k ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RationalIndex {
    pub p: u64,
    pub q: u64,
    pub k: u64,
}

impl RationalIndex {
    pub fn new(p: u64, q: u64, k: u64, n: usize) -> Option<Self> {
        let m = (n as u64).checked_sub(1).filter(|&m| m >= 1)?;
        let ok = p >= 1 && k >= 1 && (p - 1).is_multiple_of(m) && (k - 1).is_multiple_of(m) && q.is_multiple_of(m);
        ok.then_some(RationalIndex { p, q, k })
    }

    pub fn value(&self) -> f64 {
        (self.p as f64 - self.q as f64) / self.k as f64
    }

    pub fn is_valid(&self, n: usize) -> bool {
        Self::new(self.p, self.q, self.k, n).is_some()
    }

    /// `(κp, κq, κk)`; congruences hold when `κ ≡ 1 (mod n−1)`.
    pub fn scaled(&self, kappa: u64) -> Self {
        RationalIndex {
            p: self.p * kappa,
            q: self.q * kappa,
            k: self.k * kappa,
        }
    }

    /// `(p + j, q + j, k)`; congruences hold when `j ≡ 0 (mod n−1)`.
    pub fn shifted(&self, j: u64) -> Self {
        RationalIndex {
            p: self.p + j,
            q: self.q + j,
            k: self.k,
        }
    }
}

impl fmt::Display for RationalIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}-{})/{}", self.p, self.q, self.k)
    }
}

/// Smallest `k ∈ A_n` with `(n−1)/k ≤ resolution`.
pub fn denominator_for(n: usize, resolution: f64) -> u64 {
    assert!(n >= 2 && resolution > 0.0, "need n >= 2 and a positive resolution");
    let m = (n - 1) as f64;
    let blocks = ((m / resolution - 1.0) / m).ceil().max(0.0);
    let mut k = 1 + blocks as u64 * (n as u64 - 1);
    while m / (k as f64) > resolution {
        k += n as u64 - 1;
    }
    k
}

/// The admissible rational closest to `target` on the grid of spacing
/// `(n−1)/k`, `k` minimal for `resolution`. Ties go to the larger value.
pub fn rational_grid(n: usize, target: f64, resolution: f64) -> RationalIndex {
    let k = denominator_for(n, resolution);
    let m = (n - 1) as i64;
    // Numerators p − q run over N ≡ 1 (mod n−1).
    let scaled = target * k as f64;
    let t = ((scaled - 1.0) / m as f64).floor() as i64;
    let below = 1 + t * m;
    let above = below + m;
    let numerator = if (scaled - below as f64).abs() < (above as f64 - scaled).abs() {
        below
    } else {
        above
    };
    let (p, q) = if numerator >= 1 {
        (numerator as u64, 0)
    } else {
        (1, (1 - numerator) as u64)
    };
    RationalIndex { p, q, k }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchDirection {
    /// `c < f(cⁿ)`
    CBelow,
    /// `c > f(cⁿ)`
    CAbove,
}

impl BranchDirection {
    /// `+1` for `CBelow`, `−1` for `CAbove`: the value of the final `φ̂(c)`.
    pub fn sign(self) -> f64 {
        match self {
            BranchDirection::CBelow => 1.0,
            BranchDirection::CAbove => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipOutcome {
    In,
    Out,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Explicit base point; scanned for when absent.
    pub base_point: Option<f64>,
    pub grid: Vec<f64>,
    /// Target spacing `(n−1)/k` of the rational grid.
    pub resolution: f64,
    /// Relative width of the `Undetermined` band around equality.
    pub comparison_band: f64,
    /// Half-width of the window scanned for a base point.
    pub scan_window: f64,
    pub scan_points: usize,
    /// Cap on the number of `n−1` blocks appended while bracketing.
    pub max_blocks: usize,
    pub seed: u64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            base_point: None,
            grid: Vec::new(),
            resolution: 1.0 / 64.0,
            comparison_band: 1e-12,
            scan_window: sampling::DEFAULT_WINDOW,
            scan_points: 201,
            max_blocks: 1 << 20,
            seed: 0,
        }
    }
}

/// Displacement `f(cⁿ) − c` must exceed this to count as non-idempotent.
fn selection_threshold(band: f64, c: f64, fc: f64) -> f64 {
    10.0 * band * (1.0 + c.abs() + fc.abs())
}

/// Picks the base point `c` and its branch.
pub fn select_base_point(op: &NaryOp, cfg: &ExtractionConfig) -> Result<(f64, BranchDirection), ExtractionError> {
    let classify = |c: f64| {
        let fc = op.diagonal(c);
        let d = fc - c;
        (d, selection_threshold(cfg.comparison_band, c, fc))
    };
    let direction = |d: f64| if d > 0.0 { BranchDirection::CBelow } else { BranchDirection::CAbove };
    if let Some(c) = cfg.base_point {
        if !op.domain().contains(c) {
            return Err(ExtractionError::InvalidBasePoint {
                c,
                reason: format!("outside the domain {}", op.domain()),
            });
        }
        let (d, thr) = classify(c);
        if d.abs().partial_cmp(&thr) != Some(std::cmp::Ordering::Greater) {
            return Err(ExtractionError::InvalidBasePoint {
                c,
                reason: format!("numerically idempotent (|f(c^n) - c| = {:e})", d.abs()),
            });
        }
        return Ok((c, direction(d)));
    }
    let sampler = PointSampler::new(op.domain(), cfg.scan_window);
    let mut best: Option<(f64, f64, f64)> = None;
    for c in sampler.line_grid(cfg.scan_points.max(3)) {
        let (d, thr) = classify(c);
        if !d.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, bd, _)| d.abs() > bd.abs()) {
            best = Some((c, d, thr));
        }
    }
    match best {
        Some((c, d, thr)) if d.abs() > thr => Ok((c, direction(d))),
        Some((_, d, _)) => Err(ExtractionError::AllIdempotent {
            max_displacement: d.abs(),
        }),
        None => Err(ExtractionError::AllIdempotent {
            max_displacement: f64::NAN,
        }),
    }
}

/// Orbit of `c` under `y ↦ f(y, cⁿ⁻¹)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenEndReport {
    pub iterates: Vec<f64>,
    pub direction: BranchDirection,
    /// The domain end the iterates move toward.
    pub approaching: ExtendedReal,
    pub endpoint_open: bool,
}

/// Iterates `x_m = f(x_{m−1}, c, …, c)` from `x₀ = c`, checking that the
/// orbit moves strictly toward one end of the domain without leaving it.
pub fn detect_open_end(
    op: &NaryOp,
    c: f64,
    direction: BranchDirection,
    steps: usize,
) -> Result<OpenEndReport, ExtractionError> {
    let g = ExtendedOp::new(op.clone());
    let mut iterates = vec![c];
    let mut prev = c;
    for step in 1..=steps {
        let next = g.append_block(prev, c);
        if !op.domain().contains(next) {
            return Err(ExtractionError::DomainEscape { step, value: next });
        }
        let moved = match direction {
            BranchDirection::CBelow => next > prev,
            BranchDirection::CAbove => next < prev,
        };
        if !moved {
            return Err(ExtractionError::SequenceNotMonotone { step, prev, next });
        }
        iterates.push(next);
        prev = next;
    }
    let (approaching, endpoint_open) = match direction {
        BranchDirection::CBelow => (op.domain().hi(), op.domain().hi_open()),
        BranchDirection::CAbove => (op.domain().lo(), op.domain().lo_open()),
    };
    Ok(OpenEndReport {
        iterates,
        direction,
        approaching,
        endpoint_open,
    })
}

/// Three-way comparison of `g(cᵖ)` against `b`, oriented by the branch.
fn compare(a: f64, b: f64, direction: BranchDirection, band: f64) -> MembershipOutcome {
    let diff = a - b;
    let width = band * 1f64.max(a.abs()).max(b.abs());
    let signed = direction.sign() * diff;
    if signed > width {
        MembershipOutcome::In
    } else if signed < -width {
        MembershipOutcome::Out
    } else {
        MembershipOutcome::Undetermined
    }
}

fn exhausted(idx: RationalIndex, err: ExtendError) -> ExtractionError {
    let value = match err {
        ExtendError::Escape { value, .. } | ExtendError::InputOutsideDomain { value } => value,
        _ => f64::NAN,
    };
    ExtractionError::PrecisionExhausted {
        p: idx.p,
        q: idx.q,
        k: idx.k,
        value,
    }
}

/// Decides whether `idx` belongs to `S_x`: `In` when `g(cᵖ)` exceeds
/// `g(xᵏ c^q)` by more than the band (reversed in the `CAbove` branch).
pub fn sx_membership(
    g: &ExtendedOp,
    c: f64,
    x: f64,
    idx: RationalIndex,
    direction: BranchDirection,
    band: f64,
) -> Result<MembershipOutcome, ExtractionError> {
    let n = g.arity();
    if !idx.is_valid(n) {
        return Err(ExtractionError::InvalidBasePoint {
            c,
            reason: format!("index {idx} violates the congruences for n={n}"),
        });
    }
    if !g.base().domain().contains(x) {
        return Err(ExtractionError::InvalidGrid { x });
    }
    let m = (n - 1) as u64;
    let a = g.power(c, idx.p as usize).map_err(|e| exhausted(idx, e))?;
    let mut b = g.power(x, idx.k as usize).map_err(|e| exhausted(idx, e))?;
    for _ in 0..idx.q / m {
        b = g.append_block(b, c);
        if !g.base().domain().contains(b) {
            return Err(exhausted(idx, ExtendError::Escape { value: b, step: 0 }));
        }
    }
    Ok(compare(a, b, direction, band))
}

/// `φ(x)` bracketed on the rational grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiEstimate {
    pub x: f64,
    pub value: f64,
    pub half_width: f64,
    /// Largest grid rational observed `Out` of `S_x`.
    pub lower: f64,
    /// Smallest grid rational observed `In` `S_x`.
    pub upper: f64,
    pub k: u64,
    pub q: u64,
    pub undetermined: usize,
    /// Set when an exact tie `g(cᵖ) = g(xᵏ c^q)` pinned the value.
    pub exact: bool,
}

/// Membership probes at fixed `x` and `k`, with the tail `g(xᵏ c^q)` memoised.
struct Prober<'a> {
    g: &'a ExtendedOp,
    c: f64,
    direction: BranchDirection,
    band: f64,
    k: u64,
    m: u64,
    tail: Vec<f64>,
    undetermined: usize,
}

impl Prober<'_> {
    fn index(&self, p_blocks: usize, q_blocks: usize) -> RationalIndex {
        RationalIndex {
            p: 1 + p_blocks as u64 * self.m,
            q: q_blocks as u64 * self.m,
            k: self.k,
        }
    }

    fn tail(&mut self, q_blocks: usize) -> Result<f64, ExtractionError> {
        while self.tail.len() <= q_blocks {
            let last = *self.tail.last().expect("seeded");
            let next = self.g.append_block(last, self.c);
            if !self.g.base().domain().contains(next) {
                let idx = self.index(0, self.tail.len());
                return Err(exhausted(idx, ExtendError::Escape { value: next, step: 0 }));
            }
            self.tail.push(next);
        }
        Ok(self.tail[q_blocks])
    }

    fn values(&mut self, p_blocks: usize, q_blocks: usize) -> Result<(f64, f64), ExtractionError> {
        let a = self
            .g
            .power_blocks(self.c, p_blocks)
            .map_err(|e| exhausted(self.index(p_blocks, q_blocks), e))?;
        let b = self.tail(q_blocks)?;
        Ok((a, b))
    }

    fn outcome(&mut self, p_blocks: usize, q_blocks: usize) -> Result<MembershipOutcome, ExtractionError> {
        let (a, b) = self.values(p_blocks, q_blocks)?;
        let o = compare(a, b, self.direction, self.band);
        if o == MembershipOutcome::Undetermined {
            self.undetermined += 1;
        }
        Ok(o)
    }
}

/// `inf S_x` to within the rational grid spacing `(n−1)/k`.
pub fn phi_at(
    g: &ExtendedOp,
    c: f64,
    x: f64,
    direction: BranchDirection,
    cfg: &ExtractionConfig,
) -> Result<PhiEstimate, ExtractionError> {
    let n = g.arity();
    if !g.base().domain().contains(x) {
        return Err(ExtractionError::InvalidGrid { x });
    }
    let k = denominator_for(n, cfg.resolution);
    let m = (n - 1) as u64;
    let step = m as f64 / k as f64;
    if x == c {
        // g(c^{q+1}) and g(c·c^q) are the same string.
        return Ok(PhiEstimate {
            x,
            value: 1.0,
            half_width: step,
            lower: 1.0 - step,
            upper: 1.0 + step,
            k,
            q: 0,
            undetermined: 1,
            exact: true,
        });
    }
    let head = g
        .power(x, k as usize)
        .map_err(|e| exhausted(RationalIndex { p: 1, q: 0, k }, e))?;
    let mut probe = Prober {
        g,
        c,
        direction,
        band: cfg.comparison_band,
        k,
        m,
        tail: vec![head],
        undetermined: 0,
    };
    let cap = cfg.max_blocks.max(1);

    // Lower bracket: grow q until the smallest p is out of S_x.
    let mut q_blocks = 0usize;
    while probe.outcome(0, q_blocks)? != MembershipOutcome::Out {
        q_blocks = if q_blocks == 0 { 1 } else { q_blocks * 2 };
        if q_blocks > cap {
            return Err(ExtractionError::BracketNotFound {
                x,
                side: "lower",
                blocks: cap,
            });
        }
    }
    // Upper bracket: grow p until it enters S_x.
    let mut lo = 0usize;
    let mut hi = 1usize;
    loop {
        match probe.outcome(hi, q_blocks)? {
            MembershipOutcome::In => break,
            MembershipOutcome::Out => lo = hi,
            MembershipOutcome::Undetermined => {}
        }
        hi *= 2;
        if hi > cap {
            return Err(ExtractionError::BracketNotFound {
                x,
                side: "upper",
                blocks: cap,
            });
        }
    }
    // Bisection: lo is Out, hi is In; Undetermined splits into two searches
    // for the edges of the tie band.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match probe.outcome(mid, q_blocks)? {
            MembershipOutcome::In => hi = mid,
            MembershipOutcome::Out => lo = mid,
            MembershipOutcome::Undetermined => {
                let (mut a, mut b) = (lo, mid);
                while b - a > 1 {
                    let t = a + (b - a) / 2;
                    if probe.outcome(t, q_blocks)? == MembershipOutcome::Out {
                        a = t;
                    } else {
                        b = t;
                    }
                }
                lo = a;
                let (mut a, mut b) = (mid, hi);
                while b - a > 1 {
                    let t = a + (b - a) / 2;
                    if probe.outcome(t, q_blocks)? == MembershipOutcome::In {
                        b = t;
                    } else {
                        a = t;
                    }
                }
                hi = b;
                break;
            }
        }
    }

    let q = q_blocks as u64 * m;
    let p_of = |blocks: usize| 1 + blocks as u64 * m;
    let r_of = |blocks: usize| (p_of(blocks) as f64 - q as f64) / k as f64;
    let (lower, upper) = (r_of(lo), r_of(hi));
    let mut value = ((p_of(lo) + p_of(hi)) as f64 / 2.0 - q as f64) / k as f64;
    let mut exact = false;
    if hi - lo >= 2 && hi - lo <= 17 {
        for blocks in lo + 1..hi {
            let (a, b) = probe.values(blocks, q_blocks)?;
            if a == b {
                value = r_of(blocks);
                exact = true;
                break;
            }
        }
    }
    Ok(PhiEstimate {
        x,
        value,
        half_width: (value - lower).max(upper - value),
        lower,
        upper,
        k,
        q,
        undetermined: probe.undetermined,
        exact,
    })
}

/// A tabulated, increasing approximation of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedGenerator {
    pub arity: usize,
    pub c: f64,
    pub direction: BranchDirection,
    /// `φ̂(c)`: `+1` or `−1` depending on the branch.
    pub normalization: f64,
    /// Largest per-point half-width.
    pub resolution_bound: f64,
    pub points: Vec<PhiEstimate>,
}

impl ExtractedGenerator {
    /// `(x, φ̂(x))` pairs sorted by `x`.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|e| (e.x, e.value)).collect()
    }

    pub fn interpolant(&self) -> Result<PiecewiseLinear, InterpError> {
        let (xs, ys) = self.points.iter().map(|e| (e.x, e.value)).unzip();
        PiecewiseLinear::new(xs, ys)
    }

    /// `φ̂(x)` by piecewise-linear interpolation; no extrapolation.
    pub fn phi_hat(&self, x: f64) -> Result<f64, InterpError> {
        self.interpolant()?.eval(x)
    }

    /// The table as a generator on its own (bounded) range, inverted by bisection.
    pub fn to_generator_spec(&self) -> Result<GeneratorSpec, ExtractionError> {
        let pl = self.interpolant()?;
        let (x0, x1) = pl.x_range();
        let (y0, y1) = pl.y_range();
        let domain = Interval::closed(x0, x1).map_err(|_| InterpError::TooFewKnots(1))?;
        let codomain = Interval::closed(y0, y1).map_err(|_| ExtractionError::NoUsablePoints)?;
        let inverse = pl.clone();
        Ok(GeneratorSpec::closed_form(
            "tabulated",
            domain,
            codomain,
            true,
            move |x| pl.eval(x).unwrap_or(f64::NAN),
            Some(move |y| inverse.inverse(y).unwrap_or(f64::NAN)),
        )
        .with_kind(GeneratorKind::Tabulated))
    }
}

/// Runs base-point selection and `phi_at` over the grid; the table is
/// negated in the `CAbove` branch so it always increases.
pub fn extract_generator(op: &NaryOp, cfg: &ExtractionConfig) -> Result<ExtractedGenerator, ExtractionError> {
    if let Some(&x) = cfg.grid.iter().find(|&&x| !op.domain().contains(x)) {
        return Err(ExtractionError::InvalidGrid { x });
    }
    let (c, direction) = select_base_point(op, cfg)?;
    let g = ExtendedOp::new(op.clone());
    let mut grid = cfg.grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut points: Vec<PhiEstimate> = grid
        .par_iter()
        .map(|&x| phi_at(&g, c, x, direction, cfg))
        .collect::<Result<_, _>>()?;
    if direction == BranchDirection::CAbove {
        for e in &mut points {
            e.value = -e.value;
            let (lo, hi) = (-e.upper, -e.lower);
            e.lower = lo;
            e.upper = hi;
        }
    }
    let resolution_bound = points.iter().map(|e| e.half_width).fold(0.0, f64::max);
    for w in points.windows(2) {
        if w[1].value < w[0].value - 2.0 * resolution_bound {
            return Err(ExtractionError::MonotonicityViolation {
                x0: w[0].x,
                v0: w[0].value,
                x1: w[1].x,
                v1: w[1].value,
            });
        }
    }
    Ok(ExtractedGenerator {
        arity: op.arity(),
        c,
        direction,
        normalization: direction.sign(),
        resolution_bound,
        points,
    })
}

/// Tolerance pieces of the additivity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditivityBudget {
    pub resolution_term: f64,
    pub interpolation_slack: f64,
    pub total: f64,
}

/// `(n+1)·bound + 2·slack` with slack `(n+1)·κ/4`, where `κ` is the table's
/// curvature scale (linear interpolation error is about a quarter of the
/// chord deviation over a doubled span).
pub fn additivity_budget(gen: &ExtractedGenerator, pl: &PiecewiseLinear) -> AdditivityBudget {
    let terms = (gen.arity + 1) as f64;
    let resolution_term = terms * gen.resolution_bound;
    let interpolation_slack = terms * pl.curvature_scale() / 4.0;
    AdditivityBudget {
        resolution_term,
        interpolation_slack,
        total: resolution_term + 2.0 * interpolation_slack,
    }
}

/// Random `n`-tuples drawn from the table range whose image under `f` stays in range.
fn in_range_tuples(
    op: &NaryOp,
    lo: f64,
    hi: f64,
    samples: usize,
    seed: u64,
    stream_id: u64,
    accept: impl Fn(&[f64], f64) -> bool,
) -> Result<Vec<(Vec<f64>, f64)>, ExtractionError> {
    use rand::Rng;
    let mut rng = sampling::stream(seed, stream_id);
    let mut out = Vec::with_capacity(samples);
    let budget = 1000 * samples.max(1);
    let mut tries = 0;
    while out.len() < samples {
        if tries >= budget {
            return Err(ExtractionError::OutsideTable { tries });
        }
        tries += 1;
        let xs: Vec<f64> = (0..op.arity()).map(|_| rng.gen_range(lo..=hi)).collect();
        let y = op.eval(&xs);
        if y.is_finite() && (lo..=hi).contains(&y) && accept(&xs, y) {
            out.push((xs, y));
        }
    }
    Ok(out)
}

/// Additivity `φ̂(f(x₁…xₙ)) = Σ φ̂(xᵢ)` on random tuples inside the table.
pub fn verify_additivity(
    gen: &ExtractedGenerator,
    op: &NaryOp,
    samples: usize,
    seed: u64,
) -> Result<AxiomReport, ExtractionError> {
    if gen.arity != op.arity() {
        return Err(ExtractionError::ArityMismatch(gen.arity, op.arity()));
    }
    let pl = gen.interpolant()?;
    let budget = additivity_budget(gen, &pl);
    let (lo, hi) = pl.x_range();
    let tuples = in_range_tuples(op, lo, hi, samples, seed, 20, |_, _| true)?;
    let mut c = Collector::new();
    for (xs, y) in tuples {
        let lhs = pl.eval(y)?;
        let rhs: f64 = xs.iter().map(|&x| pl.eval(x)).sum::<Result<f64, _>>()?;
        let r = (lhs - rhs).abs();
        c.push(SampleOutcome {
            residual: r,
            allowed: budget.total,
            witness: Witness {
                inputs: xs,
                detail: WitnessDetail::Additivity,
                lhs,
                rhs,
                residual: r,
            },
        });
    }
    Ok(c.finish(AxiomKind::Identity, "additivity", budget.total, seed))
}

/// Factor applied to `bound·slope` in the round-trip tolerance.
pub const ROUNDTRIP_FACTOR: f64 = 10.0;

/// Rebuilds `f̂ = φ̂⁻¹(Σ φ̂(xᵢ))` from the table and compares it with `f`.
///
/// Each sample may deviate by `10·bound·s`, where `s` is the local slope of
/// the inverse interpolant at `Σ φ̂(xᵢ)`. Residuals are reported in units of
/// `bound·s`, so the tolerance is the factor 10.
pub fn roundtrip(gen: &ExtractedGenerator, op: &NaryOp, samples: usize, seed: u64) -> Result<AxiomReport, ExtractionError> {
    if gen.arity != op.arity() {
        return Err(ExtractionError::ArityMismatch(gen.arity, op.arity()));
    }
    let spec = gen.to_generator_spec()?;
    let pl = gen.interpolant()?;
    let (lo, hi) = pl.x_range();
    let (ylo, yhi) = pl.y_range();
    let tuples = in_range_tuples(op, lo, hi, samples, seed, 21, |xs, _| {
        let s: f64 = xs.iter().map(|&x| spec.phi(x)).sum();
        (ylo..=yhi).contains(&s)
    })?;
    let mut c = Collector::new();
    for (xs, y) in tuples {
        let s: f64 = xs.iter().map(|&x| spec.phi(x)).sum();
        let rebuilt = spec.inverse(s).unwrap_or(f64::NAN);
        let r = (rebuilt - y).abs();
        let unit = gen.resolution_bound * pl.local_inverse_slope(s);
        let scaled = if r == 0.0 { 0.0 } else { r / unit };
        c.push(SampleOutcome {
            residual: scaled,
            allowed: ROUNDTRIP_FACTOR,
            witness: Witness {
                inputs: xs,
                detail: WitnessDetail::Roundtrip,
                lhs: rebuilt,
                rhs: y,
                residual: r,
            },
        });
    }
    Ok(c.finish(AxiomKind::Identity, "roundtrip", ROUNDTRIP_FACTOR, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub pass: bool,
    /// `(x, φ̂₁(x)/φ̂₂(x))` on the usable points.
    pub ratios: Vec<(f64, f64)>,
    pub mean_ratio: f64,
    /// `(max − min)/|mean|` of the ratios.
    pub spread: f64,
    pub allowed_spread: f64,
}

/// Pointwise ratio of two extractions; constant when both conjugate the
/// same operation to addition.
pub fn compare_scales(
    gen1: &ExtractedGenerator,
    gen2: &ExtractedGenerator,
    common_grid: &[f64],
) -> Result<ScaleReport, ExtractionError> {
    if gen1.arity != gen2.arity {
        return Err(ExtractionError::ArityMismatch(gen1.arity, gen2.arity));
    }
    let (pl1, pl2) = (gen1.interpolant()?, gen2.interpolant()?);
    let (b1, b2) = (gen1.resolution_bound, gen2.resolution_bound);
    let mut ratios = Vec::new();
    let mut rel_err: f64 = 0.0;
    for &x in common_grid {
        let (v1, v2) = (pl1.eval(x)?, pl2.eval(x)?);
        if v1.abs() > 5.0 * b1 && v2.abs() > 5.0 * b2 {
            ratios.push((x, v1 / v2));
            rel_err = rel_err.max(b1 / v1.abs() + b2 / v2.abs());
        }
    }
    if ratios.is_empty() {
        return Err(ExtractionError::NoUsablePoints);
    }
    let (min, max) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, r)| (lo.min(r), hi.max(r)));
    let mean_ratio = ratios.iter().map(|&(_, r)| r).sum::<f64>() / ratios.len() as f64;
    let spread = clamp_finite((max - min) / mean_ratio.abs());
    let allowed_spread = 2.0 * rel_err;
    Ok(ScaleReport {
        pass: spread <= allowed_spread,
        ratios,
        mean_ratio,
        spread,
        allowed_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::lookup_op;

    fn op(name: &str, n: usize) -> NaryOp {
        lookup_op(name, n).unwrap()
    }

    fn cfg_with(c: Option<f64>, grid: Vec<f64>, resolution: f64) -> ExtractionConfig {
        ExtractionConfig {
            base_point: c,
            grid,
            resolution,
            ..ExtractionConfig::default()
        }
    }

    /// Membership oracle for the sum: g(cᵖ) = pc and g(xᵏc^q) = kx + qc.
    fn sum_oracle(c: f64, x: f64, idx: RationalIndex) -> MembershipOutcome {
        let a = idx.p as f64 * c;
        let b = idx.k as f64 * x + idx.q as f64 * c;
        let d = if c > 0.0 { a - b } else { b - a };
        if d > 0.0 {
            MembershipOutcome::In
        } else if d < 0.0 {
            MembershipOutcome::Out
        } else {
            MembershipOutcome::Undetermined
        }
    }

    #[test]
    fn rational_index_invariants() {
        assert!(RationalIndex::new(5, 2, 3, 3).is_some());
        assert!(RationalIndex::new(4, 2, 3, 3).is_none());
        assert!(RationalIndex::new(5, 1, 3, 3).is_none());
        assert!(RationalIndex::new(0, 0, 1, 2).is_none());
        let r = RationalIndex::new(7, 3, 4, 4).unwrap();
        assert_eq!(r.value(), 1.0);
        assert!(r.scaled(4).is_valid(4) && r.shifted(3).is_valid(4));
        assert_eq!(r.scaled(4).value(), 1.0);
        assert_eq!(r.shifted(6).value(), 1.0);
    }

    #[test]
    fn rational_grid_examples() {
        let r = rational_grid(3, 1.0, 0.1);
        assert_eq!(r, RationalIndex { p: 21, q: 0, k: 21 });
        assert_eq!(r.value(), 1.0);
        let r = rational_grid(2, -0.3, 0.01);
        assert_eq!(r, RationalIndex { p: 1, q: 31, k: 100 });
        assert!((r.value() + 0.3).abs() < 1e-15);
        let r = rational_grid(3, 0.0, 1.0);
        assert_eq!(r, RationalIndex { p: 1, q: 0, k: 3 });
        assert!(r.value().abs() <= 1.0);
    }

    #[test]
    fn rational_grid_respects_contract() {
        for n in 2..6 {
            for &res in &[1.0, 0.3, 0.05, 1.0 / 64.0] {
                for i in -20..=20 {
                    let target = i as f64 * 0.37;
                    let r = rational_grid(n, target, res);
                    assert!(r.is_valid(n), "{r:?}");
                    assert!((r.value() - target).abs() <= res + 1e-12, "n={n} res={res} t={target} {r:?}");
                    assert!(((n - 1) as f64) / (r.k as f64) <= res);
                    let smaller = r.k as i64 - (n as i64 - 1);
                    assert!(smaller < 1 || ((n - 1) as f64) / smaller as f64 > res);
                    assert!(r.q == 0 || r.p == 1);
                }
            }
        }
    }

    #[test]
    fn base_point_selection() {
        let sum = op("sum", 2);
        let (c, dir) = select_base_point(&sum, &cfg_with(Some(1.0), vec![], 0.1)).unwrap();
        assert_eq!((c, dir), (1.0, BranchDirection::CBelow));
        let (c, dir) = select_base_point(&sum, &ExtractionConfig::default()).unwrap();
        assert!(c.abs() > 9.0);
        assert_eq!(dir, if c > 0.0 { BranchDirection::CBelow } else { BranchDirection::CAbove });

        let alt = op("alternating", 3);
        assert!(matches!(
            select_base_point(&alt, &ExtractionConfig::default()),
            Err(ExtractionError::AllIdempotent { .. })
        ));
        let prod = op("product", 3);
        let (c, dir) = select_base_point(&prod, &cfg_with(Some(2.0), vec![], 0.1)).unwrap();
        assert_eq!((c, dir), (2.0, BranchDirection::CBelow));
        assert!(matches!(
            select_base_point(&prod, &cfg_with(Some(1.0), vec![], 0.1)),
            Err(ExtractionError::InvalidBasePoint { .. })
        ));
        assert!(matches!(
            select_base_point(&prod, &cfg_with(Some(-1.0), vec![], 0.1)),
            Err(ExtractionError::InvalidBasePoint { .. })
        ));
    }

    #[test]
    fn open_end_detection() {
        let r = detect_open_end(&op("sum", 2), 1.0, BranchDirection::CBelow, 20).unwrap();
        let expected: Vec<f64> = (1..=21).map(f64::from).collect();
        assert_eq!(r.iterates, expected);
        assert_eq!(r.approaching, ExtendedReal::PosInf);
        assert!(r.endpoint_open);

        let r = detect_open_end(&op("bounded_product", 2), 0.5, BranchDirection::CAbove, 20).unwrap();
        for (m, &v) in r.iterates.iter().enumerate() {
            assert_eq!(v, 0.5f64.powi(m as i32 + 1));
        }
        assert_eq!(r.approaching, ExtendedReal::Finite(0.0));
        assert!(r.endpoint_open);

        let closed = NaryOp::new(2, Interval::closed(0.0, 1.0).unwrap(), "sum", |xs| xs[0] + xs[1]);
        assert!(matches!(
            detect_open_end(&closed, 0.25, BranchDirection::CBelow, 10),
            Err(ExtractionError::DomainEscape { step: 4, .. })
        ));
        assert!(matches!(
            detect_open_end(&op("sum", 2), 1.0, BranchDirection::CAbove, 3),
            Err(ExtractionError::SequenceNotMonotone { step: 1, .. })
        ));
    }

    #[test]
    fn membership_examples() {
        let g = ExtendedOp::new(op("sum", 2));
        let m = |x: f64, p, q, k| {
            sx_membership(&g, 1.0, x, RationalIndex { p, q, k }, BranchDirection::CBelow, 1e-12).unwrap()
        };
        assert_eq!(m(0.5, 3, 2, 1), MembershipOutcome::In);
        assert_eq!(m(2.0, 2, 1, 1), MembershipOutcome::Out);
        assert_eq!(m(1.0, 2, 1, 1), MembershipOutcome::Undetermined);
    }

    #[test]
    fn membership_matches_sum_oracle() {
        use rand::Rng;
        let mut rng = sampling::stream(17, 0);
        for n in [2usize, 3] {
            let g = ExtendedOp::new(op("sum", n));
            let m = (n - 1) as u64;
            for _ in 0..500 {
                let c = if rng.gen_bool(0.5) { 1.0 } else { -0.5 };
                let dir = if c > 0.0 { BranchDirection::CBelow } else { BranchDirection::CAbove };
                let x = (rng.gen_range(-4.0..4.0f64) * 64.0).round() / 64.0;
                let idx = RationalIndex {
                    p: 1 + rng.gen_range(0..60) * m,
                    q: rng.gen_range(0..60) * m,
                    k: 1 + rng.gen_range(0..20) * m,
                };
                let got = sx_membership(&g, c, x, idx, dir, 1e-12).unwrap();
                assert_eq!(got, sum_oracle(c, x, idx), "n={n} c={c} x={x} {idx:?}");
            }
        }
    }

    #[test]
    fn membership_overflow_is_reported() {
        let g = ExtendedOp::new(op("product", 2));
        let idx = RationalIndex { p: 2000, q: 0, k: 1 };
        assert!(matches!(
            sx_membership(&g, 2.0, 3.0, idx, BranchDirection::CBelow, 1e-12),
            Err(ExtractionError::PrecisionExhausted { p: 2000, .. })
        ));
    }

    #[test]
    fn phi_at_examples() {
        let g = ExtendedOp::new(op("sum", 2));
        let cfg = cfg_with(Some(1.0), vec![], 1.0 / 64.0);
        let e = phi_at(&g, 1.0, 1.5, BranchDirection::CBelow, &cfg).unwrap();
        assert!((e.value - 1.5).abs() <= 1.0 / 64.0);
        assert!(e.lower < 1.5 && 1.5 < e.upper);
        assert!(e.half_width <= 1.0 / 64.0);

        let g3 = ExtendedOp::new(op("product", 3));
        let res = 2.0 / 129.0;
        let cfg = cfg_with(Some(2.0), vec![], res);
        let e = phi_at(&g3, 2.0, 8.0, BranchDirection::CBelow, &cfg).unwrap();
        assert_eq!(e.k, 129);
        assert!((e.value - 3.0).abs() <= res);

        for (name, n, c) in [("sum", 3, 0.7), ("product", 2, 3.0), ("translated_sum", 3, 0.0)] {
            let g = ExtendedOp::new(op(name, n));
            let e = phi_at(&g, c, c, BranchDirection::CBelow, &cfg_with(Some(c), vec![], 0.05)).unwrap();
            assert_eq!(e.value, 1.0);
            assert!(e.exact);
        }
    }

    #[test]
    fn phi_at_matches_closed_form_sum() {
        // For the sum, φ(x) = x/c; half-widths never exceed the spacing.
        for n in [2usize, 3, 4] {
            let g = ExtendedOp::new(op("sum", n));
            for &c in &[1.0, 2.5] {
                let cfg = cfg_with(Some(c), vec![], 0.02);
                for i in -12..=12 {
                    let x = i as f64 * 0.37;
                    let e = phi_at(&g, c, x, BranchDirection::CBelow, &cfg).unwrap();
                    let truth = x / c;
                    assert!(e.lower <= truth && truth <= e.upper, "n={n} c={c} x={x} {e:?}");
                    assert!((e.value - truth).abs() <= e.half_width + 1e-12);
                    assert!(e.half_width <= (n - 1) as f64 / e.k as f64 + 1e-15);
                }
            }
        }
    }

    #[test]
    fn extraction_examples() {
        let grid: Vec<f64> = (-2..=2).map(f64::from).collect();
        let gen = extract_generator(&op("sum", 2), &cfg_with(Some(1.0), grid.clone(), 1.0 / 64.0)).unwrap();
        assert_eq!(gen.direction, BranchDirection::CBelow);
        assert_eq!(gen.normalization, 1.0);
        for (x, v) in gen.samples() {
            assert!((v - x).abs() <= 1.0 / 64.0);
        }
        assert_eq!(gen.phi_hat(1.0).unwrap(), 1.0);

        let gen = extract_generator(&op("sum", 2), &cfg_with(Some(-1.0), grid, 1.0 / 64.0)).unwrap();
        assert_eq!(gen.direction, BranchDirection::CAbove);
        assert_eq!(gen.phi_hat(-1.0).unwrap(), -1.0);
        for (x, v) in gen.samples() {
            assert!((v - x).abs() <= 1.0 / 64.0, "{x} {v}");
        }

        let gen = extract_generator(&op("product", 2), &cfg_with(Some(2.0), vec![0.5, 1.0, 2.0, 4.0], 0.02)).unwrap();
        for (x, v) in gen.samples() {
            assert!((v - x.log2()).abs() <= 0.02, "{x} {v}");
        }
    }

    #[test]
    fn extraction_errors() {
        assert!(matches!(
            extract_generator(&op("alternating", 3), &cfg_with(None, vec![0.0, 1.0], 0.1)),
            Err(ExtractionError::AllIdempotent { .. })
        ));
        assert!(matches!(
            extract_generator(&op("product", 2), &cfg_with(Some(2.0), vec![-1.0, 1.0], 0.1)),
            Err(ExtractionError::InvalidGrid { x }) if x == -1.0
        ));
        // c far from the idempotent with a fine grid overflows g(cᵖ).
        let cfg = ExtractionConfig {
            base_point: Some(1e100),
            grid: vec![1e-200],
            resolution: 0.01,
            ..ExtractionConfig::default()
        };
        assert!(matches!(
            extract_generator(&op("product", 2), &cfg),
            Err(ExtractionError::PrecisionExhausted { .. })
        ));
    }

    #[test]
    fn additivity_detects_corruption() {
        let grid: Vec<f64> = (-4..=4).map(|i| i as f64 * 0.5).collect();
        let sum = op("sum", 2);
        let gen = extract_generator(&sum, &cfg_with(Some(1.0), grid, 1.0 / 64.0)).unwrap();
        let report = verify_additivity(&gen, &sum, 100, 3).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.max_residual < 1e-12);

        let mut bad = gen.clone();
        bad.points[5].value += 10.0 * gen.resolution_bound;
        let report = verify_additivity(&bad, &sum, 100, 3).unwrap();
        assert!(!report.pass);
        assert!(report.witness.is_some());
    }

    #[test]
    fn scale_comparison() {
        let grid: Vec<f64> = (-4..=4).map(|i| i as f64 * 0.5).collect();
        let sum = op("sum", 2);
        let g1 = extract_generator(&sum, &cfg_with(Some(1.0), grid.clone(), 1.0 / 64.0)).unwrap();
        let g2 = extract_generator(&sum, &cfg_with(Some(2.0), grid.clone(), 1.0 / 64.0)).unwrap();
        let r = compare_scales(&g1, &g2, &grid).unwrap();
        assert!(r.pass);
        assert!((r.mean_ratio - 2.0).abs() < 1e-9);
        let same = compare_scales(&g1, &g1, &grid).unwrap();
        assert!(same.pass && same.spread == 0.0 && same.mean_ratio == 1.0);
        assert!(matches!(compare_scales(&g1, &g2, &[0.0]), Err(ExtractionError::NoUsablePoints)));
    }
}
