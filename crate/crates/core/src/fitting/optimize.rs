//! Derivative-free minimisation in a box: Nelder-Mead for the joint
//! refinement, golden section for profiles, bisection for contour crossings.

pub(crate) type Point = [f64; 2];

#[derive(Debug, Clone, Copy)]
pub(crate) struct Bounds {
    pub lo: Point,
    pub hi: Point,
}

impl Bounds {
    pub fn clamp(&self, p: Point) -> Point {
        [p[0].clamp(self.lo[0], self.hi[0]), p[1].clamp(self.lo[1], self.hi[1])]
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }
}

fn finite_or_max(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Nelder-Mead started from `start` with initial edge lengths `steps`.
/// Vertices are projected into `bounds`.
pub(crate) fn nelder_mead(
    f: &impl Fn(Point) -> f64,
    start: Point,
    steps: Point,
    bounds: &Bounds,
    max_iter: usize,
) -> (Point, f64) {
    let mut simplex: [(Point, f64); 3] = [
        (start, 0.0),
        (bounds.clamp([start[0] + steps[0], start[1]]), 0.0),
        (bounds.clamp([start[0], start[1] + steps[1]]), 0.0),
    ];
    // a vertex clamped onto the start would make the simplex degenerate
    for (k, v) in simplex.iter_mut().enumerate().skip(1) {
        if v.0 == start {
            let axis = k - 1;
            v.0[axis] = bounds.clamp([start[0] - steps[0], start[1] - steps[1]])[axis];
        }
    }
    for v in simplex.iter_mut() {
        v.1 = finite_or_max(f(v.0));
    }
    let scale = [bounds.width(0).max(1e-300), bounds.width(1).max(1e-300)];

    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0], simplex[2]);
        let spread = (worst.1 - best.1).abs();
        let size = simplex
            .iter()
            .skip(1)
            .map(|v| ((v.0[0] - best.0[0]) / scale[0]).abs().max(((v.0[1] - best.0[1]) / scale[1]).abs()))
            .fold(0.0, f64::max);
        if spread <= 1e-10 * (1.0 + best.1.abs()) && size < 1e-9 {
            break;
        }
        if size < 1e-12 {
            break;
        }
        let centroid = [
            0.5 * (simplex[0].0[0] + simplex[1].0[0]),
            0.5 * (simplex[0].0[1] + simplex[1].0[1]),
        ];
        let along = |t: f64| bounds.clamp([centroid[0] + t * (worst.0[0] - centroid[0]), centroid[1] + t * (worst.0[1] - centroid[1])]);

        let xr = along(-1.0);
        let fr = finite_or_max(f(xr));
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = finite_or_max(f(xe));
            simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[1].1 {
            simplex[2] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = along(-0.5);
            (x, finite_or_max(f(x)))
        } else {
            let x = along(0.5);
            (x, finite_or_max(f(x)))
        };
        if fc < worst.1.min(fr) {
            simplex[2] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        for k in 1..3 {
            let p = simplex[k].0;
            let x = [best.0[0] + 0.5 * (p[0] - best.0[0]), best.0[1] + 0.5 * (p[1] - best.0[1])];
            simplex[k] = (x, finite_or_max(f(x)));
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// Minimum of a unimodal `f` on `[a, b]`; returns `(x, f(x))`.
pub(crate) fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, iterations: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = finite_or_max(f(c));
    let mut fd = finite_or_max(f(d));
    for _ in 0..iterations {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = finite_or_max(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = finite_or_max(f(d));
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Root of `g(t) = level` on `[a, b]` given `g(a) < level <= g(b)`.
pub(crate) fn bisect(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, level: f64, iterations: usize) -> f64 {
    for _ in 0..iterations {
        let mid = 0.5 * (a + b);
        if g(mid) < level {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_rotated_quadratic_minimum() {
        let f = |p: Point| {
            let (x, y) = (p[0] - 0.3, p[1] - 2.0);
            3.0 * x * x + 2.0 * x * y + y * y
        };
        let b = Bounds { lo: [-5.0, -5.0], hi: [5.0, 5.0] };
        let (x, fx) = nelder_mead(&f, [1.0, 1.0], [0.5, 0.5], &b, 1000);
        assert!((x[0] - 0.3).abs() < 1e-5 && (x[1] - 2.0).abs() < 1e-5, "{x:?}");
        assert!(fx < 1e-9);
    }

    #[test]
    fn nelder_mead_respects_bounds() {
        let f = |p: Point| (p[0] + 1.0).powi(2) + (p[1] - 0.5).powi(2);
        let b = Bounds { lo: [0.0, 0.0], hi: [1.0, 1.0] };
        let (x, _) = nelder_mead(&f, [0.5, 0.5], [0.1, 0.1], &b, 1000);
        assert!(x[0].abs() < 1e-8);
        assert!((x[1] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn golden_and_bisect() {
        let (x, _) = golden_section(&|x: f64| (x - 0.7).powi(2), 0.0, 2.0, 80);
        assert!((x - 0.7).abs() < 1e-8);
        let r = bisect(&|t: f64| t * t, 0.0, 3.0, 2.0, 60);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }
}
