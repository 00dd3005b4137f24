//! One-dimensional maximization on a bracket.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`; the endpoints are included as candidates so a
/// monotone `f` yields the appropriate endpoint exactly.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, x_tol: f64) -> (f64, f64) {
    let fa = f(a);
    let fb = f(b);
    if !(b > a) {
        return (a, fa);
    }
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= x_tol {
            break;
        }
        if f1 >= f2 {
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
    let (mut best_x, mut best_f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    // ties resolved toward the smaller abscissa
    if fa >= best_f {
        best_x = a;
        best_f = fa;
    }
    if fb > best_f {
        best_x = b;
        best_f = fb;
    }
    (best_x, best_f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_maximum() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3f64).powi(2), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9);
        assert!(fx.abs() < 1e-17);
    }

    #[test]
    fn monotone_gives_endpoint() {
        assert_eq!(golden_section_max(|x| x, 0.0, 1.0, 1e-12).0, 1.0);
        assert_eq!(golden_section_max(|x| -x, 0.0, 1.0, 1e-12).0, 0.0);
    }

    #[test]
    fn flat_prefers_left() {
        assert_eq!(golden_section_max(|_| 2.0, 0.5, 1.0, 1e-12).0, 0.5);
    }
}
