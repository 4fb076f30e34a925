//! Piecewise-constant functions of time in canonical breakpoint form.
//!
//! A [`StepFn`] is a sorted list of `(t_i, delta_i)` pairs with pairwise
//! distinct times and no zero deltas; its value at `t` is the sum of deltas at
//! times `<= t`. Flood truncation is carried as metadata (`cutoff`), not as
//! breakpoints: after the cutoff the function is undefined, not zero.
//!
//! The combinators here are written so that adding an empty function, or
//! scaling by exactly 1, reproduces the other operand bit for bit. The sweep
//! algorithms rely on this to produce identical outputs regardless of whether
//! zero-flow edges are visited.

use thiserror::Error;

use crate::scalar::{cmp_real, Real};

#[derive(Debug, Error, PartialEq)]
pub enum StepFnError {
    #[error("function is undefined at t = {at} (flooded at t = {cutoff})")]
    UndefinedAfterFlood { at: f64, cutoff: f64 },
}

/// Canonical piecewise-constant function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFn<T> {
    breaks: Vec<(T, T)>,
    cutoff: Option<T>,
}

impl<T: Real> Default for StepFn<T> {
    fn default() -> Self {
        StepFn::empty()
    }
}

impl<T: Real> StepFn<T> {
    pub fn empty() -> Self {
        StepFn {
            breaks: Vec::new(),
            cutoff: None,
        }
    }

    /// Constant `rate` from time `t` on.
    pub fn step(t: T, rate: T) -> Self {
        if rate == T::zero() {
            return StepFn::empty();
        }
        StepFn {
            breaks: vec![(t, rate)],
            cutoff: None,
        }
    }

    /// Canonicalize arbitrary `(t, delta)` pairs: sort, merge equal times,
    /// drop zero deltas.
    pub fn from_deltas(mut deltas: Vec<(T, T)>) -> Self {
        deltas.sort_by(|a, b| cmp_real(a.0, b.0));
        let mut breaks: Vec<(T, T)> = Vec::with_capacity(deltas.len());
        for (t, d) in deltas {
            match breaks.last_mut() {
                Some((lt, ld)) if *lt == t => *ld = *ld + d,
                _ => breaks.push((t, d)),
            }
        }
        breaks.retain(|&(_, d)| d != T::zero());
        StepFn {
            breaks,
            cutoff: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.breaks.is_empty()
    }

    /// Number of breakpoints.
    pub fn complexity(&self) -> usize {
        self.breaks.len()
    }

    pub fn breakpoints(&self) -> &[(T, T)] {
        &self.breaks
    }

    pub fn cutoff(&self) -> Option<T> {
        self.cutoff
    }

    /// Attach (or tighten) a truncation time.
    pub fn truncated(mut self, cutoff: T) -> Self {
        if cutoff.is_infinite() {
            return self;
        }
        self.cutoff = Some(match self.cutoff {
            Some(c) if c <= cutoff => c,
            _ => cutoff,
        });
        self
    }

    /// Value ignoring truncation.
    pub fn value_at(&self, t: T) -> T {
        let mut v = T::zero();
        for &(ti, di) in &self.breaks {
            if ti > t {
                break;
            }
            v = v + di;
        }
        v
    }

    /// Value respecting the truncation domain.
    pub fn evaluate(&self, t: T) -> Result<T, StepFnError> {
        if let Some(c) = self.cutoff {
            if t >= c {
                return Err(StepFnError::UndefinedAfterFlood {
                    at: t.to_f64().unwrap_or(f64::NAN),
                    cutoff: c.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(self.value_at(t))
    }

    /// `self + c * g` in canonical form. `|result| <= |self| + |g|`.
    pub fn combine(&self, g: &StepFn<T>, c: T) -> StepFn<T> {
        let cutoff = match (self.cutoff, g.cutoff) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if c == T::zero() || g.is_empty() {
            let mut r = self.clone();
            r.cutoff = cutoff;
            return r;
        }
        if self.is_empty() {
            let mut r = if c == T::one() { g.clone() } else { g.scale(c) };
            r.cutoff = cutoff;
            return r;
        }
        let mut breaks = Vec::with_capacity(self.breaks.len() + g.breaks.len());
        let (a, b) = (&self.breaks, &g.breaks);
        let (mut i, mut j) = (0usize, 0usize);
        while i < a.len() || j < b.len() {
            let take_a = j >= b.len() || (i < a.len() && a[i].0 <= b[j].0);
            let take_b = i >= a.len() || (j < b.len() && b[j].0 <= a[i].0);
            let (t, d) = if take_a && take_b {
                let d = a[i].1 + c * b[j].1;
                let t = a[i].0;
                i += 1;
                j += 1;
                (t, d)
            } else if take_a {
                let (t, d) = a[i];
                i += 1;
                (t, d)
            } else {
                let (t, d) = b[j];
                j += 1;
                (t, c * d)
            };
            if d != T::zero() {
                breaks.push((t, d));
            }
        }
        StepFn { breaks, cutoff }
    }

    pub fn add(&self, g: &StepFn<T>) -> StepFn<T> {
        self.combine(g, T::one())
    }

    pub fn sub(&self, g: &StepFn<T>) -> StepFn<T> {
        self.combine(g, -T::one())
    }

    /// `c * self`; scaling by exactly 1 is an exact clone.
    pub fn scale(&self, c: T) -> StepFn<T> {
        if c == T::one() {
            return self.clone();
        }
        if c == T::zero() {
            return StepFn {
                breaks: Vec::new(),
                cutoff: self.cutoff,
            };
        }
        let breaks = self
            .breaks
            .iter()
            .map(|&(t, d)| (t, c * d))
            .filter(|&(_, d)| d != T::zero())
            .collect();
        StepFn {
            breaks,
            cutoff: self.cutoff,
        }
    }

    /// Exact integral over `[0, t]` (signed area; piecewise linear in `t`).
    pub fn integral_to(&self, t: T) -> T {
        let mut acc = T::zero();
        let mut level = T::zero();
        let mut prev: Option<T> = None;
        for &(ti, di) in &self.breaks {
            if ti >= t {
                break;
            }
            if let Some(p) = prev {
                acc = acc + level * (ti - p);
            }
            level = level + di;
            prev = Some(ti);
        }
        if let Some(p) = prev {
            if p < t {
                acc = acc + level * (t - p);
            }
        }
        acc
    }

    /// Least `tau` with integral over `[0, tau]` equal to `volume`, or
    /// `+inf` when the total integral never reaches it. Requires `f >= 0`.
    pub fn first_time_integral_reaches(&self, volume: T) -> T {
        debug_assert!(volume >= T::zero());
        if volume == T::zero() {
            return T::zero();
        }
        let mut acc = T::zero();
        let mut level = T::zero();
        let mut prev: Option<T> = None;
        for &(ti, di) in &self.breaks {
            if let Some(p) = prev {
                let gain = level * (ti - p);
                if level > T::zero() && acc + gain >= volume {
                    return p + (volume - acc) / level;
                }
                acc = acc + gain;
            }
            level = level + di;
            prev = Some(ti);
        }
        match prev {
            Some(p) if level > T::zero() => p + (volume - acc) / level,
            _ => T::infinity(),
        }
    }

    /// Zero before `tau`, equal to `self` from `tau` on. Used for spill
    /// onset: the depression passes its whole arrival rate over the saddle
    /// starting at its fill time.
    pub fn restrict_from(&self, tau: T) -> StepFn<T> {
        if tau.is_infinite() {
            return StepFn {
                breaks: Vec::new(),
                cutoff: self.cutoff,
            };
        }
        let mut breaks = Vec::new();
        let v = self.value_at(tau);
        if v != T::zero() {
            breaks.push((tau, v));
        }
        for &(ti, di) in &self.breaks {
            if ti > tau {
                breaks.push((ti, di));
            }
        }
        StepFn {
            breaks,
            cutoff: self.cutoff,
        }
    }

    /// `self` before `tau`, `g` at and after `tau`.
    pub fn switch_at(&self, tau: T, g: &StepFn<T>) -> StepFn<T> {
        if tau.is_infinite() {
            return self.clone();
        }
        let mut breaks = Vec::new();
        let mut pre = T::zero();
        for &(ti, di) in &self.breaks {
            if ti < tau {
                breaks.push((ti, di));
                pre = pre + di;
            } else {
                break;
            }
        }
        let jump = g.value_at(tau) - pre;
        if jump != T::zero() {
            breaks.push((tau, jump));
        }
        for &(ti, di) in &g.breaks {
            if ti > tau {
                breaks.push((ti, di));
            }
        }
        StepFn {
            breaks,
            cutoff: match (self.cutoff, g.cutoff) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
        }
    }

    /// Canonical sum of many functions in iteration order.
    pub fn sum<'a>(fns: impl IntoIterator<Item = &'a StepFn<T>>) -> StepFn<T>
    where
        T: 'a,
    {
        let mut acc = StepFn::empty();
        for f in fns {
            acc = acc.add(f);
        }
        acc
    }
}

/// Prefix integrals of a step function at its breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct CumFn<T> {
    /// `(t_i, integral over [0, t_i])` per breakpoint.
    entries: Vec<(T, T)>,
}

impl<T: Real> CumFn<T> {
    pub fn of(f: &StepFn<T>) -> Self {
        let mut entries = Vec::with_capacity(f.complexity());
        let mut acc = T::zero();
        let mut level = T::zero();
        let mut prev: Option<T> = None;
        for &(ti, di) in f.breakpoints() {
            if let Some(p) = prev {
                acc = acc + level * (ti - p);
            }
            entries.push((ti, acc));
            level = level + di;
            prev = Some(ti);
        }
        CumFn { entries }
    }

    pub fn entries(&self) -> &[(T, T)] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(v: &[(f64, f64)]) -> StepFn<f64> {
        StepFn::from_deltas(v.to_vec())
    }

    #[test]
    fn evaluate_sums_deltas_up_to_t() {
        assert_eq!(sf(&[(0.0, 2.0)]).evaluate(1.0).unwrap(), 2.0);
        assert_eq!(StepFn::<f64>::empty().evaluate(7.0).unwrap(), 0.0);
        assert_eq!(sf(&[(0.0, 2.0), (4.0, -2.0)]).evaluate(5.0).unwrap(), 0.0);
        assert_eq!(sf(&[(1.0, 3.0)]).evaluate(0.5).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_fails_past_the_flood_cutoff() {
        let f = sf(&[(0.0, 2.0)]).truncated(3.0);
        assert_eq!(f.evaluate(2.9).unwrap(), 2.0);
        assert!(matches!(
            f.evaluate(3.0),
            Err(StepFnError::UndefinedAfterFlood { .. })
        ));
    }

    #[test]
    fn combine_examples() {
        let f = sf(&[(0.0, 1.0), (2.0, 0.5)]);
        assert!(f.combine(&f, -1.0).is_empty(), "f - f vanishes");
        assert_eq!(f.combine(&sf(&[(1.0, 9.0)]), 0.0), f);
        assert_eq!(
            sf(&[(0.0, 1.0)]).combine(&sf(&[(1.0, 1.0)]), 2.0),
            sf(&[(0.0, 1.0), (1.0, 2.0)])
        );
    }

    #[test]
    fn integral_examples() {
        assert_eq!(sf(&[(0.0, 2.0)]).integral_to(3.0), 6.0);
        assert_eq!(StepFn::<f64>::empty().integral_to(5.0), 0.0);
        assert_eq!(sf(&[(0.0, 2.0), (4.0, -2.0)]).integral_to(10.0), 8.0);
    }

    #[test]
    fn first_reach_examples() {
        assert_eq!(sf(&[(0.0, 2.0)]).first_time_integral_reaches(10.0), 5.0);
        assert_eq!(
            StepFn::<f64>::empty().first_time_integral_reaches(1.0),
            f64::INFINITY
        );
        // Total volume is 8, so 10 is never reached.
        assert_eq!(
            sf(&[(0.0, 2.0), (4.0, -2.0)]).first_time_integral_reaches(10.0),
            f64::INFINITY
        );
        assert_eq!(sf(&[(0.0, 2.0)]).first_time_integral_reaches(0.0), 0.0);
        // Rate changes mid-way: 2 for 4s (vol 8), then 1: vol 10 at t = 6.
        assert_eq!(
            sf(&[(0.0, 2.0), (4.0, -1.0)]).first_time_integral_reaches(10.0),
            6.0
        );
    }

    #[test]
    fn restrict_and_switch() {
        let f = sf(&[(0.0, 2.0), (4.0, 1.0)]);
        let r = f.restrict_from(2.0);
        assert_eq!(r.value_at(1.9), 0.0);
        assert_eq!(r.value_at(2.0), 2.0);
        assert_eq!(r.value_at(5.0), 3.0);

        let g = sf(&[(0.0, 10.0)]);
        let s = f.switch_at(3.0, &g);
        assert_eq!(s.value_at(2.9), 2.0);
        assert_eq!(s.value_at(3.0), 10.0);
        assert_eq!(s.value_at(9.0), 10.0);
    }

    #[test]
    fn restrict_before_first_breakpoint_is_identity() {
        let f = sf(&[(1.0, 2.0), (4.0, 1.0)]);
        assert_eq!(f.restrict_from(0.5), f);
        assert_eq!(f.restrict_from(f64::INFINITY), StepFn::empty());
    }

    #[test]
    fn prefix_integrals_are_nondecreasing_for_nonnegative_fns() {
        let f = sf(&[(0.0, 2.0), (1.0, -1.0), (3.0, -1.0)]);
        let c = CumFn::of(&f);
        assert_eq!(c.entries(), &[(0.0, 0.0), (1.0, 2.0), (3.0, 4.0)]);
    }

    #[test]
    fn works_in_single_precision_too() {
        let f: StepFn<f32> = StepFn::from_deltas(vec![(0.0, 2.0), (4.0, -2.0)]);
        assert_eq!(f.integral_to(10.0), 8.0);
        assert_eq!(f.first_time_integral_reaches(8.0), 4.0);
    }
}
