//! Additive generators: `f(x₁…xₙ) = φ⁻¹(φ(x₁)+…+φ(xₙ))`.
//!
//! A [`GeneratorSpec`] carries a continuous strictly monotone `φ: I → J`, an
//! optional closed-form inverse, and the codomain `J`. [`build_aczelian`]
//! turns it into an [`NaryOp`] after checking that `J` is closed under
//! `n`-term sums, which is what keeps the result inside `I`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{ExtendedReal, Interval, IntervalError};
use crate::op::NaryOp;

type RealFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("codomain {interval} is not closed under {n}-term sums")]
    InadmissibleCodomain { interval: Interval, n: usize },
    #[error("value {y} is outside the range of the generator on {bracket}")]
    OutOfRange { y: f64, bracket: Interval },
    #[error("function is not monotone on the bracket: f({x}) = {fx} leaves [{fa}, {fb}]")]
    NonMonotone { x: f64, fx: f64, fa: f64, fb: f64 },
    #[error("generator is not strictly monotone: equal values near {x}")]
    NotStrict { x: f64 },
    #[error("invalid interval: {0}")]
    Interval(#[from] IntervalError),
    #[error("arity must be at least 2, got {0}")]
    Arity(usize),
}

/// How `φ⁻¹` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    ClosedForm,
    Tabulated,
}

/// The admissible codomain shapes; `b ≤ 0 ≤ a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum CodomainForm {
    NegOpenB { b: f64 },
    NegClosedB { b: f64 },
    PosOpenA { a: f64 },
    PosClosedA { a: f64 },
    FullLine,
}

impl fmt::Display for CodomainForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodomainForm::NegOpenB { b } => write!(f, "]-inf,{b}["),
            CodomainForm::NegClosedB { b } => write!(f, "]-inf,{b}]"),
            CodomainForm::PosOpenA { a } => write!(f, "]{a},inf["),
            CodomainForm::PosClosedA { a } => write!(f, "[{a},inf["),
            CodomainForm::FullLine => write!(f, "]-inf,inf["),
        }
    }
}

/// True iff the set of `n`-term sums of `j` lies inside `j`.
///
/// The sums of `n` points of an interval fill the interval scaled by `n`
/// with the same open/closed flags, so the check is pure endpoint algebra.
pub fn n_sum_closed(j: &Interval, n: usize) -> bool {
    let scale = |e: ExtendedReal| match e {
        ExtendedReal::Finite(x) => ExtendedReal::Finite(n as f64 * x),
        other => other,
    };
    let (lo, hi) = (scale(j.lo()), scale(j.hi()));
    lo >= j.lo() && hi <= j.hi()
}

/// Classifies `j` as one of the five admissible codomain shapes.
pub fn validate_codomain(j: &Interval, n: usize) -> Result<CodomainForm, GeneratorError> {
    if n < 2 {
        return Err(GeneratorError::Arity(n));
    }
    let reject = || GeneratorError::InadmissibleCodomain { interval: *j, n };
    if !n_sum_closed(j, n) {
        return Err(reject());
    }
    match (j.lo(), j.hi()) {
        (ExtendedReal::NegInf, ExtendedReal::PosInf) => Ok(CodomainForm::FullLine),
        (ExtendedReal::NegInf, ExtendedReal::Finite(b)) if b <= 0.0 => Ok(if j.hi_open() {
            CodomainForm::NegOpenB { b }
        } else {
            CodomainForm::NegClosedB { b }
        }),
        (ExtendedReal::Finite(a), ExtendedReal::PosInf) if a >= 0.0 => Ok(if j.lo_open() {
            CodomainForm::PosOpenA { a }
        } else {
            CodomainForm::PosClosedA { a }
        }),
        _ => Err(reject()),
    }
}

/// Default inversion tolerance `1e-12·(1+|y|)`.
pub fn default_inversion_tol(y: f64) -> f64 {
    1e-12 * (1.0 + y.abs())
}

const MAX_HALVINGS: i32 = 1100;

/// Points walking from `start` toward the lower end of `iv`.
fn lower_candidates(iv: &Interval, start: f64) -> Vec<f64> {
    let mut out = Vec::new();
    match iv.lo() {
        ExtendedReal::Finite(lo) => {
            let gap = start - lo;
            for j in 0..MAX_HALVINGS {
                let x = lo + gap * 0.5f64.powi(j);
                if x <= lo {
                    break;
                }
                out.push(x);
            }
            if !iv.lo_open() {
                out.push(lo);
            }
        }
        _ => {
            for j in 0..1024 {
                let x = start - 2f64.powi(j);
                if !x.is_finite() {
                    break;
                }
                out.push(x);
            }
        }
    }
    out
}

fn upper_candidates(iv: &Interval, start: f64) -> Vec<f64> {
    let mut out = Vec::new();
    match iv.hi() {
        ExtendedReal::Finite(hi) => {
            let gap = hi - start;
            for j in 0..MAX_HALVINGS {
                let x = hi - gap * 0.5f64.powi(j);
                if x >= hi {
                    break;
                }
                out.push(x);
            }
            if !iv.hi_open() {
                out.push(hi);
            }
        }
        _ => {
            for j in 0..1024 {
                let x = start + 2f64.powi(j);
                if !x.is_finite() {
                    break;
                }
                out.push(x);
            }
        }
    }
    out
}

/// A finite interior reference point of `iv`.
pub fn interior_point(iv: &Interval) -> f64 {
    match (iv.lo(), iv.hi()) {
        (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a + 0.5 * (b - a),
        (ExtendedReal::Finite(a), _) => a + 1.0,
        (_, ExtendedReal::Finite(b)) => b - 1.0,
        _ => 0.0,
    }
}

/// Solves `phi(x) = y` on `bracket` by bisection.
///
/// Open or infinite bracket ends are approached through a halving (resp.
/// doubling) sequence until `y` is bracketed. Returns `x` with
/// `|phi(x) − y| ≤ tol` unless the bracket collapses to adjacent floats
/// first, in which case the better endpoint is returned.
pub fn invert_monotone<F>(phi: F, y: f64, bracket: &Interval, tol: f64) -> Result<f64, GeneratorError>
where
    F: Fn(f64) -> f64,
{
    let out_of_range = || GeneratorError::OutOfRange { y, bracket: *bracket };
    if !y.is_finite() {
        return Err(out_of_range());
    }
    let mid = interior_point(bracket);
    let lows = lower_candidates(bracket, mid);
    let highs = upper_candidates(bracket, mid);
    let (l0, h0) = match (lows.get(1), highs.get(1)) {
        (Some(&l), Some(&h)) if l < h => (l, h),
        _ => return Err(out_of_range()),
    };
    let increasing = phi(h0) >= phi(l0);
    // Walk outward until y is bracketed on each side.
    let below = |v: f64| if increasing { v <= y } else { v >= y };
    let above = |v: f64| if increasing { v >= y } else { v <= y };
    let mut a = None;
    for &x in &lows {
        let v = phi(x);
        if !v.is_nan() && below(v) {
            a = Some((x, v));
            break;
        }
    }
    let mut b = None;
    for &x in &highs {
        let v = phi(x);
        if !v.is_nan() && above(v) {
            b = Some((x, v));
            break;
        }
    }
    let ((mut xa, mut fa), (mut xb, mut fb)) = match (a, b) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(out_of_range()),
    };
    if (fa - y).abs() <= tol {
        return Ok(xa);
    }
    if (fb - y).abs() <= tol {
        return Ok(xb);
    }
    if xa > xb {
        // Only possible when y sits between phi(l0) and phi(h0) in the wrong order.
        return Err(GeneratorError::NonMonotone {
            x: xa,
            fx: fa,
            fa: fb,
            fb: fa,
        });
    }
    loop {
        let xm = xa + 0.5 * (xb - xa);
        if xm <= xa || xm >= xb {
            break;
        }
        let fm = phi(xm);
        let (lo_v, hi_v) = if fa <= fb { (fa, fb) } else { (fb, fa) };
        if fm.is_nan() || fm < lo_v || fm > hi_v {
            return Err(GeneratorError::NonMonotone {
                x: xm,
                fx: fm,
                fa,
                fb,
            });
        }
        if (fm - y).abs() <= tol {
            return Ok(xm);
        }
        if below(fm) {
            xa = xm;
            fa = fm;
        } else {
            xb = xm;
            fb = fm;
        }
    }
    Ok(if (fa - y).abs() <= (fb - y).abs() { xa } else { xb })
}

/// A continuous strictly monotone `φ: I → J`.
#[derive(Clone)]
pub struct GeneratorSpec {
    label: String,
    domain: Interval,
    codomain: Interval,
    increasing: bool,
    kind: GeneratorKind,
    phi: Arc<RealFn>,
    inverse: Option<Arc<RealFn>>,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("codomain", &self.codomain)
            .field("increasing", &self.increasing)
            .field("kind", &self.kind)
            .field("closed_inverse", &self.inverse.is_some())
            .finish()
    }
}

impl GeneratorSpec {
    /// A generator whose codomain and direction are stated by the caller.
    pub fn closed_form<P, Q>(
        label: impl Into<String>,
        domain: Interval,
        codomain: Interval,
        increasing: bool,
        phi: P,
        inverse: Option<Q>,
    ) -> Self
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        Q: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        GeneratorSpec {
            label: label.into(),
            domain,
            codomain,
            increasing,
            kind: GeneratorKind::ClosedForm,
            phi: Arc::new(phi),
            inverse: inverse.map(|q| Arc::new(q) as Arc<RealFn>),
        }
    }

    /// A generator given only by `φ`; direction and codomain are estimated
    /// from endpoint limits and the inverse falls back to bisection unless
    /// one is attached with [`GeneratorSpec::with_inverse`].
    pub fn from_phi<P>(label: impl Into<String>, domain: Interval, phi: P) -> Result<Self, GeneratorError>
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let phi: Arc<RealFn> = Arc::new(phi);
        let (codomain, increasing) = estimate_codomain(phi.as_ref(), &domain)?;
        Ok(GeneratorSpec {
            label: label.into(),
            domain,
            codomain,
            increasing,
            kind: GeneratorKind::ClosedForm,
            phi,
            inverse: None,
        })
    }

    pub fn with_inverse<Q>(mut self, inverse: Q) -> Self
    where
        Q: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.inverse = Some(Arc::new(inverse));
        self
    }

    pub fn with_kind(mut self, kind: GeneratorKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &Interval {
        &self.domain
    }

    pub fn codomain(&self) -> &Interval {
        &self.codomain
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn has_closed_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        (self.phi)(x)
    }

    /// `φ⁻¹(y)`, closed form when available and bisection otherwise.
    pub fn inverse(&self, y: f64) -> Result<f64, GeneratorError> {
        match &self.inverse {
            Some(q) => Ok(q(y)),
            None => invert_monotone(|x| (self.phi)(x), y, &self.domain, default_inversion_tol(y)),
        }
    }

    /// `r·φ` for `r ≠ 0`; the codomain is scaled (and mirrored when `r < 0`).
    ///
    /// # Panics
    /// If `r` is zero or not finite.
    pub fn scaled(&self, r: f64) -> GeneratorSpec {
        assert!(r != 0.0 && r.is_finite(), "scale factor must be finite and nonzero");
        let scale_end = |e: ExtendedReal| match e {
            ExtendedReal::Finite(x) => ExtendedReal::Finite(r * x),
            ExtendedReal::PosInf if r < 0.0 => ExtendedReal::NegInf,
            ExtendedReal::NegInf if r < 0.0 => ExtendedReal::PosInf,
            other => other,
        };
        let j = &self.codomain;
        let codomain = if r > 0.0 {
            Interval::new(scale_end(j.lo()), j.lo_open(), scale_end(j.hi()), j.hi_open())
        } else {
            Interval::new(scale_end(j.hi()), j.hi_open(), scale_end(j.lo()), j.lo_open())
        }
        .expect("scaling preserves nontriviality");
        let phi = Arc::clone(&self.phi);
        let inverse = self.inverse.as_ref().map(|q| {
            let q = Arc::clone(q);
            Arc::new(move |y: f64| q(y / r)) as Arc<RealFn>
        });
        GeneratorSpec {
            label: format!("{}*{}", r, self.label),
            domain: self.domain,
            codomain,
            increasing: self.increasing == (r > 0.0),
            kind: self.kind,
            phi: Arc::new(move |x| r * phi(x)),
            inverse,
        }
    }
}

/// Limit of `phi` at one end of `domain`, approached from `inner`.
///
/// Offsets shrink as `10⁻ᵏ·width` (k = 1..12) at finite ends and grow as
/// `10ᵏ` at infinite ends. A sequence whose increments do not contract is
/// read as divergent.
fn one_sided_limit(phi: &RealFn, end: ExtendedReal, inner: f64, scale: f64) -> ExtendedReal {
    if let ExtendedReal::Finite(e) = end {
        let v = phi(e);
        if v.is_finite() {
            return ExtendedReal::Finite(v);
        }
    }
    let points: Vec<f64> = (1..=12)
        .map(|k| match end {
            ExtendedReal::Finite(e) => e + (inner - e) * 10f64.powi(-k),
            ExtendedReal::PosInf => inner + scale * 10f64.powi(k),
            ExtendedReal::NegInf => inner - scale * 10f64.powi(k),
        })
        .collect();
    let values: Vec<f64> = points.iter().map(|&x| phi(x)).filter(|v| !v.is_nan()).collect();
    if values.len() < 3 {
        return ExtendedReal::Finite(values.last().copied().unwrap_or(phi(inner)));
    }
    let last = values[values.len() - 1];
    if last.is_infinite() {
        return ExtendedReal::from_f64(last).expect("not NaN");
    }
    let d_last = last - values[values.len() - 2];
    let d_prev = values[values.len() - 2] - values[values.len() - 3];
    let ratio = if d_prev != 0.0 { (d_last / d_prev).abs() } else { 0.0 };
    if ratio >= 0.9 && d_last.abs() > 1e-9 * (1.0 + last.abs()) {
        return if d_last > 0.0 {
            ExtendedReal::PosInf
        } else {
            ExtendedReal::NegInf
        };
    }
    let tail = if ratio < 1.0 { d_last * ratio / (1.0 - ratio) } else { 0.0 };
    let limit = last + tail;
    let snapped = if limit.abs() <= 1e-9 * (1.0 + values[0].abs()) { 0.0 } else { limit };
    ExtendedReal::Finite(snapped)
}

/// Image of `domain` under a continuous strictly monotone `phi`, plus its direction.
pub fn estimate_codomain(phi: &RealFn, domain: &Interval) -> Result<(Interval, bool), GeneratorError> {
    let inner = interior_point(domain);
    let width = match (domain.lo(), domain.hi()) {
        (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => b - a,
        _ => 1.0,
    };
    let probe_lo = lower_candidates(domain, inner).get(1).copied().unwrap_or(inner);
    let probe_hi = upper_candidates(domain, inner).get(1).copied().unwrap_or(inner);
    let (vl, vh) = (phi(probe_lo), phi(probe_hi));
    if vl == vh || vl.is_nan() || vh.is_nan() {
        return Err(GeneratorError::NotStrict { x: inner });
    }
    let increasing = vh > vl;
    let at_lo = one_sided_limit(phi, domain.lo(), inner, width);
    let at_hi = one_sided_limit(phi, domain.hi(), inner, width);
    let j = if increasing {
        Interval::new(at_lo, domain.lo_open() || !at_lo.is_finite(), at_hi, domain.hi_open() || !at_hi.is_finite())?
    } else {
        Interval::new(at_hi, domain.hi_open() || !at_hi.is_finite(), at_lo, domain.lo_open() || !at_lo.is_finite())?
    };
    Ok((j, increasing))
}

/// `f(x₁…xₙ) = φ⁻¹(Σ φ(xᵢ))` on the generator's domain.
pub fn build_aczelian(spec: &GeneratorSpec, n: usize) -> Result<NaryOp, GeneratorError> {
    validate_codomain(spec.codomain(), n)?;
    let g = spec.clone();
    let label = format!("aczel[{}; n={}]", spec.label(), n);
    Ok(NaryOp::new(n, *spec.domain(), label, move |xs| {
        let s: f64 = xs.iter().map(|&x| g.phi(x)).sum();
        g.inverse(s).unwrap_or(f64::NAN)
    }))
}
