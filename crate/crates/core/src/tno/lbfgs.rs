//! Limited-memory BFGS with a strong-Wolfe line search.

use crate::error::{bail, Result};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lbfgs {
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Stop once an accepted step lowers f by less than this.
    pub f_tol: f64,
    pub max_linesearch: usize,
}

impl Default for Lbfgs {
    fn default() -> Self {
        Lbfgs { memory: 10, c1: 1e-4, c2: 0.9, max_iters: 500, grad_tol: 1e-8, f_tol: 1e-12, max_linesearch: 30 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    CostStalled,
    MaxIterations,
    LineSearchFailed,
}

impl StopReason {
    pub fn converged(self) -> bool {
        matches!(self, StopReason::GradientTolerance | StopReason::CostStalled)
    }
}

/// One accepted iterate; iteration 0 is the starting point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub cost: f64,
    pub gradient_norm: f64,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: Vec<TracePoint>,
    pub stop: StopReason,
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Lbfgs {
    fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            bail!(InvalidParameter, "L-BFGS memory must be positive");
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            bail!(InvalidParameter, "need 0 < c1 < c2 < 1, got c1={} c2={}", self.c1, self.c2);
        }
        if !(self.grad_tol >= 0.0 && self.f_tol >= 0.0) {
            bail!(InvalidParameter, "tolerances must be non-negative");
        }
        Ok(())
    }

    /// Minimises `f`, which returns the value and gradient at a point.
    pub fn minimize<F>(&self, mut f: F, x0: Vec<f64>) -> Result<Minimum>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        self.validate()?;
        let start = Instant::now();
        let ms = |t: &Instant| t.elapsed().as_secs_f64() * 1e3;
        let mut evaluations = 1;
        let (f0, g0) = f(&x0)?;
        if !f0.is_finite() || g0.len() != x0.len() || g0.iter().any(|v| !v.is_finite()) {
            bail!(Validation, "objective is not finite at the starting point");
        }
        let mut cur = Point { x: x0, f: f0, g: g0 };
        let mut trace = vec![TracePoint { iteration: 0, cost: cur.f, gradient_norm: norm(&cur.g), wall_time_ms: ms(&start) }];
        let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(self.memory);
        let mut iterations = 0;
        let stop = loop {
            let gn = norm(&cur.g);
            if gn <= self.grad_tol {
                break StopReason::GradientTolerance;
            }
            if iterations >= self.max_iters {
                break StopReason::MaxIterations;
            }
            let mut d = direction(&cur.g, &hist);
            let mut slope = dot(&d, &cur.g);
            if !(slope < 0.0) {
                hist.clear();
                d = cur.g.iter().map(|v| -v).collect();
                slope = -gn * gn;
            }
            let alpha0 = if hist.is_empty() { (1.0 / norm(&d)).min(1.0) } else { 1.0 };
            let mut evals = 0;
            let mut probe = |alpha: f64| -> Result<Point> {
                evals += 1;
                let x: Vec<f64> = cur.x.iter().zip(&d).map(|(x, p)| x + alpha * p).collect();
                let (fx, gx) = f(&x)?;
                Ok(Point { x, f: fx, g: gx })
            };
            let found = strong_wolfe(&mut probe, cur.f, slope, &d, alpha0, self)?;
            evaluations += evals;
            let Some(next) = found else {
                break StopReason::LineSearchFailed;
            };
            iterations += 1;
            let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-16 * norm(&s) * norm(&y) {
                if hist.len() == self.memory {
                    hist.pop_front();
                }
                hist.push_back((s, y, 1.0 / sy));
            }
            let decrease = cur.f - next.f;
            cur = next;
            trace.push(TracePoint { iteration: iterations, cost: cur.f, gradient_norm: norm(&cur.g), wall_time_ms: ms(&start) });
            if decrease < self.f_tol {
                break StopReason::CostStalled;
            }
        };
        Ok(Minimum { gradient_norm: norm(&cur.g), x: cur.x, f: cur.f, iterations, evaluations, trace, stop })
    }
}

/// Two-loop recursion: −H·g with H₀ = (sᵀy / yᵀy)·I.
fn direction(g: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Bracketing search with cubic-interpolation zoom. `None` when no step
/// satisfying both conditions was found; a step satisfying sufficient
/// decrease alone is still returned at the evaluation limit.
fn strong_wolfe<P>(probe: &mut P, f0: f64, d0: f64, dir: &[f64], alpha0: f64, o: &Lbfgs) -> Result<Option<Point>>
where
    P: FnMut(f64) -> Result<Point>,
{
    let slope = |p: &Point| dot(&p.g, dir);
    let armijo = |a: f64, fa: f64| fa <= f0 + o.c1 * a * d0;
    let curvature = |da: f64| da.abs() <= -o.c2 * d0;
    let mut best: Option<(f64, Point)> = None;
    let keep = |a: f64, p: Point, best: &mut Option<(f64, Point)>| {
        if p.f.is_finite() && armijo(a, p.f) && best.as_ref().map_or(true, |(_, b)| p.f < b.f) {
            *best = Some((a, p));
        }
    };

    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, f0, d0);
    let mut a = alpha0;
    let mut evals = 0;
    let (mut lo, mut hi);
    loop {
        let p = probe(a)?;
        evals += 1;
        let da = slope(&p);
        if !p.f.is_finite() {
            (lo, hi) = ((a_prev, f_prev, d_prev), (a, f64::INFINITY, 0.0));
            break;
        }
        if !armijo(a, p.f) || (evals > 1 && p.f >= f_prev) {
            (lo, hi) = ((a_prev, f_prev, d_prev), (a, p.f, da));
            keep(a, p, &mut best);
            break;
        }
        if curvature(da) {
            return Ok(Some(p));
        }
        if da >= 0.0 {
            (lo, hi) = ((a, p.f, da), (a_prev, f_prev, d_prev));
            keep(a, p, &mut best);
            break;
        }
        (a_prev, f_prev, d_prev) = (a, p.f, da);
        keep(a, p, &mut best);
        if evals >= o.max_linesearch {
            return Ok(best.map(|(_, p)| p));
        }
        a *= 2.0;
    }
    while evals < o.max_linesearch {
        let a = interpolate(lo, hi);
        if (hi.0 - lo.0).abs() < 1e-16 * lo.0.abs().max(1e-300) {
            break;
        }
        let p = probe(a)?;
        evals += 1;
        let da = slope(&p);
        if !p.f.is_finite() || !armijo(a, p.f) || p.f >= lo.1 {
            hi = (a, p.f, da);
        } else {
            if curvature(da) {
                return Ok(Some(p));
            }
            if da * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, p.f, da);
        }
        keep(a, p, &mut best);
    }
    Ok(best.filter(|(_, p)| p.f < f0).map(|(_, p)| p))
}

/// Cubic minimiser through (a, f, f') at both ends, safeguarded into the
/// middle 80% of the bracket.
fn interpolate(lo: (f64, f64, f64), hi: (f64, f64, f64)) -> f64 {
    let (a, b) = (lo.0.min(hi.0), lo.0.max(hi.0));
    let w = b - a;
    let mid = 0.5 * (a + b);
    if !hi.1.is_finite() {
        return mid;
    }
    let d1 = lo.2 + hi.2 - 3.0 * (lo.1 - hi.1) / (lo.0 - hi.0);
    let disc = d1 * d1 - lo.2 * hi.2;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (hi.0 - lo.0).signum() * disc.sqrt();
    let t = hi.0 - (hi.0 - lo.0) * (hi.2 + d2 - d1) / (hi.2 - lo.2 + 2.0 * d2);
    if t.is_finite() && t > a + 0.1 * w && t < b - 0.1 * w {
        t
    } else {
        mid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() - 1 {
            let (a, b) = (1.0 - x[i], x[i + 1] - x[i] * x[i]);
            f += a * a + 100.0 * b * b;
            g[i] += -2.0 * a - 400.0 * x[i] * b;
            g[i + 1] += 200.0 * b;
        }
        Ok((f, g))
    }

    #[test]
    fn rosenbrock_converges() {
        let x0: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { -1.2 } else { 1.0 }).collect();
        let opt = Lbfgs { max_iters: 2000, grad_tol: 1e-9, f_tol: 0.0, ..Lbfgs::default() };
        let m = opt.minimize(rosenbrock, x0).unwrap();
        assert_eq!(m.stop, StopReason::GradientTolerance);
        assert!(m.x.iter().all(|v| (v - 1.0).abs() < 1e-6), "{:?}", m.x);
        for w in m.trace.windows(2) {
            assert!(w[1].cost <= w[0].cost);
        }
    }

    #[test]
    fn quadratic_needs_few_iterations() {
        let scales = [1.0, 4.0, 9.0, 25.0, 100.0];
        let f = |x: &[f64]| Ok((x.iter().zip(&scales).map(|(v, s)| 0.5 * s * v * v).sum(), x.iter().zip(&scales).map(|(v, s)| s * v).collect()));
        let m = Lbfgs::default().minimize(f, vec![1.0; 5]).unwrap();
        assert!(m.stop.converged());
        assert!(m.f < 1e-14 && m.iterations < 30);
    }

    #[test]
    fn stationary_start_takes_no_step() {
        let f = |x: &[f64]| Ok((x[0] * x[0], vec![2.0 * x[0]]));
        let m = Lbfgs::default().minimize(f, vec![0.0]).unwrap();
        assert_eq!((m.iterations, m.stop), (0, StopReason::GradientTolerance));
    }

    #[test]
    fn inconsistent_gradient_fails_gracefully() {
        // gradient points uphill: no step can satisfy sufficient decrease
        let f = |x: &[f64]| Ok((x[0], vec![-1.0]));
        let m = Lbfgs::default().minimize(f, vec![0.0]).unwrap();
        assert_eq!(m.stop, StopReason::LineSearchFailed);
        assert_eq!(m.f, 0.0);
    }

    #[test]
    fn rejects_bad_constants() {
        let o = Lbfgs { c1: 0.95, ..Lbfgs::default() };
        assert!(o.minimize(rosenbrock, vec![0.0, 0.0]).is_err());
    }
}
