//! Adaptive Simpson quadrature with an embedded error estimate.

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[inline]
fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrate `f` over `[a, b]` by interval bisection until the classic
/// Richardson estimate `|S2 - S1|/15` is below the per-interval share of
/// `eps` (absolute). Intervals narrower than ~1e-12 relative are accepted
/// as-is so singular endpoints cannot stall the recursion.
pub(crate) fn adaptive_simpson(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    eps: f64,
) -> Quadrature {
    struct Frame {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
    }

    let mut out = Quadrature::default();
    if !(b > a) {
        return out;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    out.evals = 3;
    let whole = simpson(fa, fm, fb, b - a);
    let mut stack = vec![Frame {
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        eps: eps.max(f64::MIN_POSITIVE),
    }];

    while let Some(fr) = stack.pop() {
        let m = 0.5 * (fr.a + fr.b);
        let lm = 0.5 * (fr.a + m);
        let rm = 0.5 * (m + fr.b);
        let flm = f(lm);
        let frm = f(rm);
        out.evals += 2;
        let left = simpson(fr.fa, flm, fr.fm, m - fr.a);
        let right = simpson(fr.fm, frm, fr.fb, fr.b - m);
        let delta = left + right - fr.whole;
        let width_floor = (fr.b - fr.a) <= 1e-12 * (1.0 + fr.a.abs());
        if delta.abs() <= 15.0 * fr.eps || width_floor || out.evals > 2_000_000 {
            out.value += left + right + delta / 15.0;
            out.error += delta.abs() / 15.0;
        } else {
            stack.push(Frame {
                a: fr.a,
                b: m,
                fa: fr.fa,
                fm: flm,
                fb: fr.fm,
                whole: left,
                eps: fr.eps / 2.0,
            });
            stack.push(Frame {
                a: m,
                b: fr.b,
                fa: fr.fm,
                fm: frm,
                fb: fr.fb,
                whole: right,
                eps: fr.eps / 2.0,
            });
        }
    }
    out
}

/// Integrate over `[0, t_max]` split into decade panels, apportioning the
/// relative tolerance by each panel's rough size.
pub(crate) fn integrate_decades(
    f: &mut dyn FnMut(f64) -> f64,
    t_max: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Quadrature {
    let mut edges = vec![0.0];
    let mut edge = 1.0f64.min(t_max);
    loop {
        edges.push(edge);
        if edge >= t_max {
            break;
        }
        edge = (edge * 10.0).min(t_max);
    }
    let mut total = Quadrature::default();
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let rough = {
            let m = 0.5 * (a + b);
            simpson(f(a), f(m), f(b), b - a).abs()
        };
        let eps = (rel_tol * rough).max(abs_floor);
        let part = adaptive_simpson(f, a, b, eps);
        total.value += part.value;
        total.error += part.error;
        total.evals += part.evals + 3;
    }
    total
}
