//! One-dimensional quadrature.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;

/// Adaptive Simpson rule with absolute tolerance `tol`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut evals = 3usize;
    let v = simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50, &mut evals)?;
    if !v.is_finite() {
        return Err(Error::Numeric(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    if *evals > 5_000_000 {
        return Err(Error::Numeric("adaptive Simpson exceeded evaluation budget".into()));
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals)?)
}

/// Double-exponential (tanh-sinh) rule on a finite interval. Integrable
/// endpoint singularities are fine: the integrand is never evaluated at
/// `a` or `b`.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    let centre = 0.5 * (a + b);
    let t_max = 6.5;
    // node at parameter t contributes weight * (f(left) + f(right))
    let node = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cosh_u = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
        // distance from the nearer endpoint, without cancellation
        let d = half * (-u).exp() / cosh_u;
        if d <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let xl = a + d;
        let xr = b - d;
        // an integrable singularity can still overflow at nodes within a few
        // ulps of the endpoint; their weight is negligible, so they are dropped
        let mut s = 0.0;
        for x in [xl, xr] {
            if x > a && x < b {
                let v = f(x);
                if v.is_finite() {
                    s += v;
                }
            }
        }
        w * s
    };
    let mut h = 0.5;
    let mut sum = FRAC_PI_2 * f(centre);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        sum += node(k as f64 * h);
        k += 1;
    }
    let mut estimate = half * h * sum;
    for _level in 0..12 {
        h *= 0.5;
        let mut extra = 0.0;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            extra += node(k as f64 * h);
            k += 2;
        }
        sum += extra;
        let next = half * h * sum;
        let err = (next - estimate).abs();
        estimate = next;
        if err <= tol.max(1e-15 * next.abs()) {
            if !estimate.is_finite() {
                break;
            }
            return Ok(estimate);
        }
    }
    if estimate.is_finite() {
        // last refinement did not meet tol; caller sees the best value
        Err(Error::Numeric(format!("tanh-sinh did not converge to {tol:e} (estimate {estimate})")))
    } else {
        Err(Error::Numeric("tanh-sinh produced a non-finite estimate".into()))
    }
}

/// ∫_a^∞ f via the substitution x = a + t/(1-t).
pub fn tanh_sinh_to_infinity<F>(f: F, a: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    tanh_sinh(
        |t| {
            let one_minus = 1.0 - t;
            let x = a + t / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1],
/// found by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fixed 16-point Gauss–Legendre on [a, b].
pub fn gauss16<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    let (nodes, weights) = RULE.get_or_init(|| gauss_legendre(16));
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    half * nodes.iter().zip(weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_and_exp() {
        let v = adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        let v = adaptive_simpson(f64::exp, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let v = tanh_sinh(|x| x.powf(-0.5), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-10, "{v}");
        // Beta(0.5, 0.5) normalisation: ∫ x^{-1/2}(1-x)^{-1/2} = π
        // near x = 1 the integrand only sees 1 - x to double precision
        let v = tanh_sinh(|x| (x * (1.0 - x)).powf(-0.5), 0.0, 1.0, 1e-9).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-7, "{v}");
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(5);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let p9: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((p9 - 2.0 / 9.0).abs() < 1e-14);
        assert!((gauss16(f64::exp, 0.0, 1.0) - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn half_line() {
        let v = tanh_sinh_to_infinity(|x| (-x).exp(), 0.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }
}
