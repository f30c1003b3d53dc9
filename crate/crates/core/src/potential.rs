//! q-potential functions U^(q)(x) = ∫ e^{-qt} P(X_t <= x) dt, the renewal
//! function U = U^(0) and the potential density u.

use crate::error::{Error, Result};
use crate::inversion::{invert_lattice, EulerInversion};
use crate::mc::{par_map, Estimate};
use crate::models::{sample_passage_time, JumpLaw, SubordinatorSpec};
use crate::rng::RngStream;
use crate::special::gamma;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Inversion,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTable {
    pub q: f64,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub density: Option<Vec<f64>>,
    pub provenance: Provenance,
}

fn check_q(q: f64) -> Result<()> {
    if q >= 0.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("q must be a finite nonnegative number, got {q}")))
    }
}

/// Parameters of u(x) = A + B e^{-ρx} for drift plus Exp(μ) jumps.
fn cpd_exp_parts(kappa: f64, rate: f64, mu: f64) -> (f64, f64, f64) {
    let s = kappa * mu + rate;
    (mu / s, rate / (kappa * s), s / kappa)
}

/// Closed-form U^(q)(x). Zero for x < 0.
pub fn potential_closed_form(spec: &SubordinatorSpec, q: f64, x: f64) -> Result<f64> {
    check_q(q)?;
    if x.is_nan() {
        return Err(Error::Domain("x is NaN".into()));
    }
    if x < 0.0 {
        return Ok(0.0);
    }
    match *spec {
        SubordinatorSpec::Poisson { jump_rate: r } => {
            let n = x.floor() + 1.0;
            Ok(if q == 0.0 { n / r } else { -(n * (r / (r + q)).ln()).exp_m1() / q })
        }
        SubordinatorSpec::Drift { kappa } => Ok(if q == 0.0 { x / kappa } else { -(-q * x / kappa).exp_m1() / q }),
        SubordinatorSpec::Stable { alpha } if q == 0.0 => Ok(x.powf(alpha) / gamma(1.0 + alpha)),
        SubordinatorSpec::CompoundPoissonDrift { kappa, jump_rate, jump_law: JumpLaw::Exponential { rate: mu } }
            if q == 0.0 && kappa > 0.0 =>
        {
            let (a, b, rho) = cpd_exp_parts(kappa, jump_rate, mu);
            Ok(a * x - b / rho * (-rho * x).exp_m1())
        }
        _ => Err(Error::Unsupported(format!("no closed-form potential for {} at q = {q}", spec.family_name()))),
    }
}

/// U^(q)(x) by inverting λ ↦ 1/(λ(q + φ(λ))). Lattice families have a
/// step-shaped U, so their generating function Σ U^(q)(n) s^n =
/// 1/((1-s)(q + φ(-ln s))) is inverted instead.
pub fn potential_numeric(spec: &SubordinatorSpec, q: f64, x: f64, inversion: &EulerInversion) -> Result<f64> {
    check_q(q)?;
    if !(x > 0.0) {
        return Err(Error::Domain(format!("numeric potential needs x > 0, got {x}")));
    }
    if spec.is_lattice() {
        let n = x.floor() as usize;
        return invert_lattice(
            |s: Complex64| 1.0 / ((1.0 - s) * (q + spec.laplace_exponent_complex(-s.ln()))),
            n,
            11.0,
        );
    }
    let inv = inversion
        .invert(|z: Complex64| 1.0 / (z * (q + spec.laplace_exponent_complex(z))), x)
        .map_err(|e| Error::Numeric(format!("potential inversion at x = {x}: {e}")))?;
    Ok(inv.value)
}

/// U^(q)(x), closed form when available and inversion otherwise.
pub fn potential(spec: &SubordinatorSpec, q: f64, x: f64, inversion: &EulerInversion) -> Result<f64> {
    match potential_closed_form(spec, q, x) {
        Err(Error::Unsupported(_)) if x > 0.0 => potential_numeric(spec, q, x, inversion),
        Err(Error::Unsupported(_)) => Ok(spec.potential_atom_at_zero(q)),
        other => other,
    }
}

/// Renewal function U(x) with the default inversion settings.
pub fn renewal(spec: &SubordinatorSpec, x: f64) -> Result<f64> {
    potential(spec, 0.0, x, &EulerInversion::default())
}

/// Potential density u(x) for families with a continuous density.
pub fn potential_density(spec: &SubordinatorSpec, x: f64, inversion: &EulerInversion) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("potential density needs x > 0, got {x}")));
    }
    if !spec.has_potential_density() {
        return Err(Error::DensityUnavailable(format!(
            "{} has no continuous potential density; use lattice logic",
            spec.family_name()
        )));
    }
    match *spec {
        SubordinatorSpec::Drift { kappa } => Ok(1.0 / kappa),
        SubordinatorSpec::Stable { alpha } => Ok(x.powf(alpha - 1.0) / gamma(alpha)),
        SubordinatorSpec::CompoundPoissonDrift { kappa, jump_rate, jump_law: JumpLaw::Exponential { rate: mu } } => {
            let (a, b, rho) = cpd_exp_parts(kappa, jump_rate, mu);
            Ok(a + b * (-rho * x).exp())
        }
        _ => inversion
            .invert(|z: Complex64| 1.0 / spec.laplace_exponent_complex(z), x)
            .map(|inv| inv.value)
            .map_err(|e| Error::Numeric(format!("density inversion at x = {x}: {e}"))),
    }
}

/// Monte Carlo estimate of U^(q)(x) from exact first-passage times:
/// ∫ e^{-qt} 1{X_t <= x} dt = (1 - e^{-qτ})/q with τ the passage time above x.
pub fn potential_mc(spec: &SubordinatorSpec, q: f64, x: f64, n_paths: usize, stream: RngStream) -> Result<Estimate> {
    check_q(q)?;
    if q == 0.0 && x.is_infinite() {
        return Err(Error::Domain("U(∞) is infinite at q = 0".into()));
    }
    if n_paths < 2 {
        return Err(Error::Domain("need at least two paths".into()));
    }
    let samples = par_map(n_paths, stream, |_, rng| {
        let tau = sample_passage_time(spec, x, rng);
        if q == 0.0 {
            tau
        } else if tau.is_infinite() {
            1.0 / q
        } else {
            -(-q * tau).exp_m1() / q
        }
    });
    Ok(Estimate::from_samples(&samples))
}

/// Tabulates U^(q) (and u where it exists) on `xs`.
pub fn potential_table(
    spec: &SubordinatorSpec,
    q: f64,
    xs: &[f64],
    inversion: &EulerInversion,
) -> Result<PotentialTable> {
    if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Domain("grid must be increasing and nonnegative".into()));
    }
    let closed = xs.iter().all(|&x| potential_closed_form(spec, q, x).is_ok());
    let values = xs.iter().map(|&x| potential(spec, q, x, inversion)).collect::<Result<Vec<_>>>()?;
    let density = if spec.has_potential_density() && q == 0.0 {
        Some(
            xs.iter()
                .map(|&x| if x > 0.0 { potential_density(spec, x, inversion) } else { Ok(f64::NAN) })
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(PotentialTable {
        q,
        xs: xs.to_vec(),
        values,
        density,
        provenance: if closed { Provenance::ClosedForm } else { Provenance::Inversion },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;

    fn inv() -> EulerInversion {
        EulerInversion::default()
    }

    #[test]
    fn closed_form_examples() {
        let p = SubordinatorSpec::poisson(1.0).unwrap();
        assert_eq!(potential_closed_form(&p, 0.0, 2.5).unwrap(), 3.0);
        assert_eq!(potential_closed_form(&p, 0.0, 0.0).unwrap(), 1.0);
        let d = SubordinatorSpec::drift(1.0).unwrap();
        assert_eq!(potential_closed_form(&d, 0.0, 7.0).unwrap(), 7.0);
        let s = SubordinatorSpec::stable(0.5).unwrap();
        assert!((potential_closed_form(&s, 0.0, 1.0).unwrap() - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-12);
        let g = SubordinatorSpec::gamma(1.0, 1.0).unwrap();
        assert!(matches!(potential_closed_form(&g, 0.0, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn inversion_matches_closed_forms() {
        let s = SubordinatorSpec::stable(0.5).unwrap();
        let v = potential_numeric(&s, 0.0, 4.0, &inv()).unwrap();
        let exact = 2.0 / gamma(1.5);
        assert!((v / exact - 1.0).abs() < 1e-6, "{v} vs {exact}");
        let d = SubordinatorSpec::drift(2.0).unwrap();
        assert!((potential_numeric(&d, 0.0, 3.0, &inv()).unwrap() - 1.5).abs() < 1e-6);
        let p = SubordinatorSpec::poisson(1.0).unwrap();
        for &x in &[0.5, 1.5, 2.5, 3.7] {
            let v = potential_numeric(&p, 0.0, x, &inv()).unwrap();
            let e = potential_closed_form(&p, 0.0, x).unwrap();
            assert!((v / e - 1.0).abs() < 1e-5, "poisson x={x}: {v} vs {e}");
        }
        let c = SubordinatorSpec::compound_poisson_drift(1.0, 1.0, JumpLaw::Exponential { rate: 1.0 }).unwrap();
        for &x in &[0.3, 1.0, 2.0] {
            let v = potential_numeric(&c, 0.0, x, &inv()).unwrap();
            let e = potential_closed_form(&c, 0.0, x).unwrap();
            assert!((v / e - 1.0).abs() < 1e-5, "cpd x={x}: {v} vs {e}");
        }
    }

    #[test]
    fn q_potentials_closed_vs_inversion() {
        for spec in [SubordinatorSpec::poisson(1.0).unwrap(), SubordinatorSpec::drift(1.5).unwrap()] {
            for &q in &[0.1, 1.0] {
                for &x in &[0.5, 2.5] {
                    let v = potential_numeric(&spec, q, x, &inv()).unwrap();
                    let e = potential_closed_form(&spec, q, x).unwrap();
                    assert!((v / e - 1.0).abs() < 1e-5, "{spec:?} q={q} x={x}: {v} vs {e}");
                }
            }
        }
    }

    #[test]
    fn densities() {
        let s = SubordinatorSpec::stable(0.5).unwrap();
        assert!((potential_density(&s, 1.0, &inv()).unwrap() - 0.5 / gamma(1.5)).abs() < 1e-12);
        let d = SubordinatorSpec::drift(4.0).unwrap();
        assert_eq!(potential_density(&d, 3.3, &inv()).unwrap(), 0.25);
        let p = SubordinatorSpec::poisson(1.0).unwrap();
        assert!(matches!(potential_density(&p, 1.0, &inv()), Err(Error::DensityUnavailable(_))));
        let c = SubordinatorSpec::compound_poisson_drift(1.0, 1.0, JumpLaw::Exponential { rate: 1.0 }).unwrap();
        assert!((potential_density(&c, 0.0001, &inv()).unwrap() - 1.0).abs() < 1e-3);
        assert!((potential_density(&c, 1.0, &inv()).unwrap() - 0.5 - 0.5 * (-2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn gamma_density_integrates_to_renewal() {
        let g = SubordinatorSpec::gamma(2.0, 1.0).unwrap();
        let u_int = adaptive_simpson(|y| potential_density(&g, y.max(1e-9), &inv()).unwrap(), 0.5, 2.0, 1e-8).unwrap();
        let diff = potential_numeric(&g, 0.0, 2.0, &inv()).unwrap() - potential_numeric(&g, 0.0, 0.5, &inv()).unwrap();
        assert!((u_int - diff).abs() < 1e-5, "{u_int} vs {diff}");
    }

    #[test]
    fn mc_examples() {
        let p = SubordinatorSpec::poisson(1.0).unwrap();
        let e = potential_mc(&p, 0.0, 0.0, 20_000, RngStream::new(1, 0)).unwrap();
        assert!(e.within(1.0, 3.0), "{e:?}");
        let d = SubordinatorSpec::drift(1.0).unwrap();
        let e = potential_mc(&d, 1.0, f64::INFINITY, 100, RngStream::new(1, 1)).unwrap();
        assert!((e.mean - 1.0).abs() < 1e-15);
        let s = SubordinatorSpec::stable(0.5).unwrap();
        let e = potential_mc(&s, 0.0, 1.0, 20_000, RngStream::new(1, 2)).unwrap();
        assert!(e.within(1.0 / gamma(1.5), 3.0), "{e:?}");
        let g = SubordinatorSpec::gamma(1.0, 1.0).unwrap();
        let e = potential_mc(&g, 0.0, 1.0, 20_000, RngStream::new(1, 3)).unwrap();
        let v = potential_numeric(&g, 0.0, 1.0, &inv()).unwrap();
        assert!(e.within(v, 3.0), "{e:?} vs {v}");
    }
}
