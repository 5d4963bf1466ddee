//! Piecewise-linear interpolation through tabulated knots.

use thiserror::Error;

use crate::generator::{invert_monotone, GeneratorError};
use crate::interval::Interval;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error("need at least two knots, got {0}")]
    TooFewKnots(usize),
    #[error("knot abscissae must be finite and strictly increasing (index {0})")]
    UnsortedKnots(usize),
    #[error("knot ordinate at index {0} is not finite")]
    NonFinite(usize),
    #[error("{x} is outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Inversion(#[from] GeneratorError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, InterpError> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(InterpError::TooFewKnots(xs.len().min(ys.len())));
        }
        for i in 0..xs.len() {
            if !xs[i].is_finite() || (i > 0 && xs[i] <= xs[i - 1]) {
                return Err(InterpError::UnsortedKnots(i));
            }
            if !ys[i].is_finite() {
                return Err(InterpError::NonFinite(i));
            }
        }
        Ok(PiecewiseLinear { xs, ys })
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// `(min, max)` of the ordinates.
    pub fn y_range(&self) -> (f64, f64) {
        self.ys
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)))
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.ys.windows(2).all(|w| w[1] > w[0])
    }

    fn segment(&self, x: f64) -> Result<usize, InterpError> {
        let (lo, hi) = self.x_range();
        if !(lo..=hi).contains(&x) {
            return Err(InterpError::OutOfRange { x, lo, hi });
        }
        let i = self.xs.partition_point(|&k| k <= x);
        Ok(i.clamp(1, self.xs.len() - 1) - 1)
    }

    pub fn eval(&self, x: f64) -> Result<f64, InterpError> {
        let i = self.segment(x)?;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        if x == x0 {
            return Ok(y0);
        }
        if x == x1 {
            return Ok(y1);
        }
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    /// Solves `eval(x) = y` by bisection over the tabulated range.
    pub fn inverse(&self, y: f64) -> Result<f64, InterpError> {
        let (lo, hi) = self.x_range();
        let bracket = Interval::closed(lo, hi).expect("knots are strictly increasing");
        let tol = 1e-13 * (1.0 + y.abs());
        let phi = |x: f64| self.eval(x.clamp(lo, hi)).unwrap_or(f64::NAN);
        Ok(invert_monotone(phi, y, &bracket, tol)?)
    }

    /// Largest `|Δx/Δy|` over the segments touching the point where the
    /// interpolant takes the value `y` (the local slope of the inverse).
    pub fn local_inverse_slope(&self, y: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.xs.len() - 1 {
            let (a, b) = (self.ys[i].min(self.ys[i + 1]), self.ys[i].max(self.ys[i + 1]));
            let pad = 1e-12 * (1.0 + y.abs());
            if y >= a - pad && y <= b + pad {
                let dy = (self.ys[i + 1] - self.ys[i]).abs();
                let slope = if dy > 0.0 { (self.xs[i + 1] - self.xs[i]) / dy } else { f64::INFINITY };
                worst = worst.max(slope);
            }
        }
        worst
    }

    /// Deviation of each interior knot from the chord of its neighbours.
    pub fn chord_deviations(&self) -> Vec<f64> {
        (1..self.xs.len() - 1)
            .map(|i| {
                let (x0, x1, x2) = (self.xs[i - 1], self.xs[i], self.xs[i + 1]);
                let (y0, y1, y2) = (self.ys[i - 1], self.ys[i], self.ys[i + 1]);
                y1 - (y0 + (y2 - y0) * (x1 - x0) / (x2 - x0))
            })
            .collect()
    }

    /// Curvature-driven interpolation error scale.
    ///
    /// Adjacent chord deviations of a smooth function share their sign and
    /// size; an isolated bad knot produces alternating signs instead. Only
    /// same-sign neighbouring pairs contribute, by their smaller magnitude,
    /// so a single corrupted knot does not inflate the estimate. With a
    /// single interior knot its deviation is used as is.
    pub fn curvature_scale(&self) -> f64 {
        let dev = self.chord_deviations();
        match dev.len() {
            0 => 0.0,
            1 => dev[0].abs(),
            _ => dev
                .windows(2)
                .filter(|w| w[0].signum() == w[1].signum())
                .map(|w| w[0].abs().min(w[1].abs()))
                .fold(0.0, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_inverse() {
        let pl = PiecewiseLinear::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 3.0]).unwrap();
        assert_eq!(pl.eval(0.5).unwrap(), 1.0);
        assert_eq!(pl.eval(3.0).unwrap(), 3.0);
        assert_eq!(pl.eval(2.0).unwrap(), 2.5);
        assert!(matches!(pl.eval(3.5), Err(InterpError::OutOfRange { .. })));
        assert!((pl.inverse(2.5).unwrap() - 2.0).abs() < 1e-12);
        assert!((pl.inverse(1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(pl.inverse(4.0).is_err());
        assert_eq!(pl.local_inverse_slope(2.5), 2.0);
        assert_eq!(pl.local_inverse_slope(2.0), 2.0);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(PiecewiseLinear::new(vec![0.0], vec![0.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn curvature_scale_ignores_single_spike() {
        let xs: Vec<f64> = (0..9).map(f64::from).collect();
        let straight: Vec<f64> = xs.clone();
        assert_eq!(PiecewiseLinear::new(xs.clone(), straight.clone()).unwrap().curvature_scale(), 0.0);
        let mut spiked = straight;
        spiked[4] += 0.5;
        assert_eq!(PiecewiseLinear::new(xs.clone(), spiked).unwrap().curvature_scale(), 0.0);
        let squares: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let s = PiecewiseLinear::new(xs, squares).unwrap().curvature_scale();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
