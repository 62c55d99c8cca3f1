//! Scalar search helpers shared by the optimizer and threshold finders.

/// Inverse golden ratio, the interior-point placement factor.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes `f` on `[lo, hi]` by golden-section search.
///
/// Returns `(x_best, f_best)`. Stops once the two interior probes agree to
/// within `f_tol` or the interval collapses, whichever happens first.
pub(crate) fn golden_section_max<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    f_tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);

    for _ in 0..max_iter {
        if (f1 - f2).abs() < f_tol && (hi - lo) < 1e-3 * (1.0 + hi.abs()) {
            break;
        }
        if hi - lo < f64::EPSILON * (1.0 + hi.abs()) {
            break;
        }
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }

    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Finds the root of a decreasing function `f` on `[lo, hi]` by bisection.
///
/// Requires `f(lo) >= 0 >= f(hi)`. Stops when `|f(mid)| < f_tol` or the
/// bracket width falls below `x_tol`, and returns the bracket midpoint.
pub(crate) fn bisect_decreasing<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    f_tol: f64,
    x_tol: f64,
    max_iter: usize,
) -> f64 {
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..max_iter {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < f_tol || (hi - lo) < x_tol {
            return mid;
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}
