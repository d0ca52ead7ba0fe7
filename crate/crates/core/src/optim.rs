//! Numerical minimizers: Brent's one-dimensional method and a
//! box-constrained limited-memory quasi-Newton method with finite-difference
//! gradients.

use std::collections::VecDeque;

/// Minimize `f` on `[lower, upper]` by Brent's combination of golden-section
/// search and successive parabolic interpolation.
///
/// `tol` is the absolute tolerance on the abscissa. Returns `(x, f(x))`.
///
/// ```
/// let (x, fx) = qmest::optim::brent_minimize(|x| (x - 1.5).powi(2), -5.0, 5.0, 1e-10);
/// assert!((x - 1.5).abs() < 1e-8);
/// assert!(fx < 1e-16);
/// ```
pub fn brent_minimize(f: impl Fn(f64) -> f64, lower: f64, upper: f64, tol: f64) -> (f64, f64) {
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let eps = f64::EPSILON.sqrt();
    let (mut a, mut b) = (lower, upper);
    let mut v = a + golden * (b - a);
    let (mut w, mut x) = (v, v);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut fx = f(x);
    let (mut fv, mut fw) = (fx, fx);
    let tol3 = tol / 3.0;

    loop {
        let xm = 0.5 * (a + b);
        let tol1 = eps * x.abs() + tol3;
        let t2 = 2.0 * tol1;
        if (x - xm).abs() <= t2 - 0.5 * (b - a) {
            break;
        }
        let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
        if e.abs() > tol1 {
            r = (x - w) * (fx - fv);
            q = (x - v) * (fx - fw);
            p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            r = e;
            e = d;
        }
        if p.abs() >= (0.5 * q * r).abs() || p <= q * (a - x) || p >= q * (b - x) {
            e = if x < xm { b - x } else { a - x };
            d = golden * e;
        } else {
            d = p / q;
            let u = x + d;
            if u - a < t2 || b - u < t2 {
                d = if x < xm { tol1 } else { -tol1 };
            }
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Settings for [`minimize_box`].
#[derive(Debug, Clone, Copy)]
pub struct BoxOptions {
    /// Stop once the relative objective reduction falls below
    /// `factr * f64::EPSILON`.
    pub factr: f64,
    pub max_iter: usize,
    /// Number of correction pairs kept.
    pub memory: usize,
    /// Stop when the projected gradient's largest component is at most this.
    pub pgtol: f64,
}

impl Default for BoxOptions {
    fn default() -> Self {
        BoxOptions {
            factr: 1e7,
            max_iter: 100,
            memory: 10,
            pgtol: 0.0,
        }
    }
}

/// Why a minimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    SmallReduction,
    SmallGradient,
    SimplexCollapsed,
    LineSearchFailed,
    IterationLimit,
    NonFiniteStart,
}

impl Stop {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Stop::SmallReduction | Stop::SmallGradient | Stop::SimplexCollapsed
        )
    }
}

#[derive(Debug, Clone)]
pub struct BoxOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub stop: Stop,
}

struct Counted<F> {
    f: F,
    calls: std::cell::Cell<usize>,
}

impl<F: Fn(&[f64]) -> f64> Counted<F> {
    fn eval(&self, x: &[f64]) -> f64 {
        self.calls.set(self.calls.get() + 1);
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(lo, hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central-difference gradient that never evaluates outside the box.
fn gradient<F: Fn(&[f64]) -> f64>(
    f: &Counted<F>,
    x: &[f64],
    fx: f64,
    lower: &[f64],
    upper: &[f64],
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        let hi = (x[i] + h).min(upper[i]);
        let lo = (x[i] - h).max(lower[i]);
        g[i] = if hi - x[i] >= 0.5 * h && x[i] - lo >= 0.5 * h {
            probe[i] = hi;
            let fp = f.eval(&probe);
            probe[i] = lo;
            let fm = f.eval(&probe);
            (fp - fm) / (hi - lo)
        } else if hi > x[i] {
            probe[i] = hi;
            (f.eval(&probe) - fx) / (hi - x[i])
        } else {
            probe[i] = lo;
            (fx - f.eval(&probe)) / (x[i] - lo)
        };
        probe[i] = x[i];
    }
    g
}

/// Components of the gradient that can still move the iterate inside the box.
fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            if (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0) {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

/// Minimize `f` subject to `lower <= x <= upper`.
///
/// A limited-memory BFGS direction is computed on the free variables (those
/// not pinned to a bound by the gradient). The step length satisfies the
/// strong Wolfe conditions, capped at the first bound the direction meets.
/// Gradients are central differences clipped to the box. The run counts as
/// converged when the objective reduction between iterations drops below
/// `factr·ε·max(|f_k|, |f_{k+1}|, 1)` or the projected gradient vanishes.
pub fn minimize_box(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &BoxOptions,
) -> BoxOutcome {
    assert_eq!(x0.len(), lower.len());
    assert_eq!(x0.len(), upper.len());
    let f = Counted {
        f,
        calls: std::cell::Cell::new(0),
    };
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut fx = f.eval(&x);
    let finish = |x: Vec<f64>, value, iterations, stop: Stop, f: &Counted<_>| BoxOutcome {
        x,
        value,
        iterations,
        evaluations: f.calls.get(),
        converged: stop.converged(),
        stop,
    };
    if !fx.is_finite() {
        return finish(x, fx, 0, Stop::NonFiniteStart, &f);
    }
    let mut g = gradient(&f, &x, fx, lower, upper);
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let tol = opts.factr * f64::EPSILON;

    for iter in 1..=opts.max_iter {
        let pg = projected_gradient(&x, &g, lower, upper);
        if pg.iter().all(|v| v.abs() <= opts.pgtol) {
            return finish(x, fx, iter - 1, Stop::SmallGradient, &f);
        }

        let mut attempt = 0;
        let (x_new, f_new, g_new) = loop {
            let d = search_direction(&x, &pg, &pairs, lower, upper);
            let slope = dot(&d, &g);
            let alpha_max = max_step(&x, &d, lower, upper);
            let found = if slope < 0.0 && alpha_max > 0.0 {
                let alpha0 = if pairs.is_empty() {
                    (1.0 / dot(&d, &d).sqrt()).min(1.0)
                } else {
                    1.0
                };
                let line = |alpha: f64| {
                    let mut trial: Vec<f64> =
                        x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
                    project(&mut trial, lower, upper);
                    let ft = f.eval(&trial);
                    let gt = if ft.is_finite() {
                        gradient(&f, &trial, ft, lower, upper)
                    } else {
                        vec![f64::NAN; trial.len()]
                    };
                    (trial, ft, gt)
                };
                wolfe_search(line, &d, fx, slope, alpha0.min(alpha_max), alpha_max)
            } else {
                None
            };
            match found {
                Some(hit) => break hit,
                None if !pairs.is_empty() && attempt == 0 => {
                    pairs.clear();
                    attempt += 1;
                }
                None => {
                    return finish(x, fx, iter, Stop::LineSearchFailed, &f);
                }
            }
        };

        let reduction = fx - f_new;
        let scale = fx.abs().max(f_new.abs()).max(1.0);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * dot(&y, &y) {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        if reduction <= tol * scale {
            return finish(x, fx, iter, Stop::SmallReduction, &f);
        }
    }
    finish(x, fx, opts.max_iter, Stop::IterationLimit, &f)
}

/// Quasi-Newton direction restricted to variables that can move. Components
/// that would push a variable sitting on a bound further out are dropped, and
/// steepest descent is used when what remains is not a descent direction.
fn search_direction(
    x: &[f64],
    pg: &[f64],
    pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    lower: &[f64],
    upper: &[f64],
) -> Vec<f64> {
    let mut d = two_loop(pg, pairs);
    for i in 0..d.len() {
        let blocked = (x[i] <= lower[i] && d[i] < 0.0) || (x[i] >= upper[i] && d[i] > 0.0);
        if pg[i] == 0.0 || blocked {
            d[i] = 0.0;
        }
    }
    if dot(&d, pg) >= 0.0 {
        d = pg.iter().map(|v| -v).collect();
    }
    d
}

/// Largest step along `d` that stays inside the box.
fn max_step(x: &[f64], d: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in 0..x.len() {
        if d[i] > 0.0 {
            alpha = alpha.min((upper[i] - x[i]) / d[i]);
        } else if d[i] < 0.0 {
            alpha = alpha.min((lower[i] - x[i]) / d[i]);
        }
    }
    alpha.max(0.0)
}

type LinePoint = (Vec<f64>, f64, Vec<f64>);

/// Step length satisfying the strong Wolfe conditions (Nocedal and Wright,
/// algorithms 3.5 and 3.6) on `[0, alpha_max]`. A step that reaches
/// `alpha_max` only needs sufficient decrease. Non-finite values count as too
/// long a step.
fn wolfe_search(
    line: impl Fn(f64) -> LinePoint,
    d: &[f64],
    f0: f64,
    slope0: f64,
    alpha_init: f64,
    alpha_max: f64,
) -> Option<LinePoint> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let armijo = |alpha: f64, fa: f64| fa.is_finite() && fa <= f0 + C1 * alpha * slope0;
    let curvature_ok = |s: f64| s.abs() <= -C2 * slope0;

    // Bracketing phase. `prev` is the last step that passed sufficient decrease.
    let mut prev: (f64, f64, f64, Option<LinePoint>) = (0.0, f0, slope0, None);
    let mut alpha = alpha_init;
    let (mut lo, mut hi) = loop {
        let point = line(alpha);
        let fa = point.1;
        if !armijo(alpha, fa) || (prev.0 > 0.0 && fa >= prev.1) {
            break (prev, (alpha, fa));
        }
        let sa = dot(&point.2, d);
        if curvature_ok(sa) {
            return Some(point);
        }
        if sa >= 0.0 {
            break ((alpha, fa, sa, Some(point)), (prev.0, prev.1));
        }
        if alpha >= alpha_max {
            return Some(point);
        }
        prev = (alpha, fa, sa, Some(point));
        alpha = (2.0 * alpha).min(alpha_max);
    };

    // Zoom phase on the bracket between `lo` (best so far) and `hi`.
    for _ in 0..40 {
        let (a_lo, f_lo, s_lo) = (lo.0, lo.1, lo.2);
        let (a_hi, f_hi) = hi;
        let width = a_hi - a_lo;
        if width.abs() <= f64::EPSILON * a_lo.abs().max(a_hi.abs()) {
            break;
        }
        let a = if f_hi.is_finite() {
            // Minimizer of the quadratic through f_lo, s_lo and f_hi.
            let denom = 2.0 * (f_hi - f_lo - s_lo * width);
            if denom > 0.0 {
                a_lo - s_lo * width * width / denom
            } else {
                a_lo + 0.5 * width
            }
        } else {
            a_lo + 0.5 * width
        };
        let (left, right) = (a_lo.min(a_hi), a_lo.max(a_hi));
        let margin = 0.1 * width.abs();
        let a = if a.is_nan() {
            a_lo + 0.5 * width
        } else {
            a.clamp(left + margin, right - margin)
        };
        let point = line(a);
        let fa = point.1;
        if !armijo(a, fa) || fa >= f_lo {
            hi = (a, fa);
            continue;
        }
        let sa = dot(&point.2, d);
        if curvature_ok(sa) {
            return Some(point);
        }
        if sa * width >= 0.0 {
            hi = (a_lo, f_lo);
        }
        lo = (a, fa, sa, Some(point));
    }
    // Fall back to the best step with sufficient decrease, if any.
    lo.3
}

/// Nelder-Mead simplex search with every vertex projected onto the box.
///
/// Used when the quasi-Newton line search cannot make progress, typically
/// because the objective is flat or non-smooth near `x0`. The initial simplex
/// steps 5% of the box width from `x0` along each axis, reflected inward at a
/// bound. Stops when the spread of simplex values falls below
/// `factr·ε·max(|f_best|, 1)`.
pub fn nelder_mead_box(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &BoxOptions,
) -> BoxOutcome {
    let f = Counted {
        f,
        calls: std::cell::Cell::new(0),
    };
    let n = x0.len();
    let mut start = x0.to_vec();
    project(&mut start, lower, upper);
    let mut simplex = vec![start.clone()];
    for i in 0..n {
        let mut v = start.clone();
        let h = 0.05 * (upper[i] - lower[i]).clamp(1e-8, 1e3);
        v[i] = if v[i] + h <= upper[i] {
            v[i] + h
        } else {
            v[i] - h
        };
        project(&mut v, lower, upper);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f.eval(v)).collect();
    let tol = opts.factr * f64::EPSILON;
    let max_iter = opts.max_iter * 20;
    let along = |from: &[f64], to: &[f64], t: f64| {
        let mut p: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect();
        project(&mut p, lower, upper);
        p
    };

    for iter in 1..=max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let (best, worst) = (values[0], values[n]);
        if best.is_finite() && worst - best <= tol * best.abs().max(1.0) {
            return BoxOutcome {
                x: simplex.swap_remove(0),
                value: best,
                iterations: iter - 1,
                evaluations: f.calls.get(),
                converged: true,
                stop: Stop::SimplexCollapsed,
            };
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let reflected = along(&simplex[n], &centroid, 2.0);
        let fr = f.eval(&reflected);
        if fr < values[0] {
            let expanded = along(&simplex[n], &centroid, 3.0);
            let fe = f.eval(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] {
                along(&simplex[n], &centroid, 1.5)
            } else {
                along(&simplex[n], &centroid, 0.5)
            };
            let fc = f.eval(&contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = along(&simplex[0], &simplex[i], 0.5);
                    values[i] = f.eval(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    BoxOutcome {
        x: simplex[best].clone(),
        value: values[best],
        iterations: max_iter,
        evaluations: f.calls.get(),
        converged: false,
        stop: Stop::IterationLimit,
    }
}

/// `-H·g` for the inverse-Hessian approximation held in `pairs`.
fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}
