use crate::error::{Error, Result};
use crate::special::gamma;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

/// Jump-size law on (0, ∞) for compound Poisson subordinators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    Exponential { rate: f64 },
    Constant { size: f64 },
    Uniform { low: f64, high: f64 },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpLaw::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            JumpLaw::Constant { size } => size > 0.0 && size.is_finite(),
            JumpLaw::Uniform { low, high } => low >= 0.0 && high > low && high.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("bad jump law {self:?}")))
        }
    }

    /// E e^{-zJ}.
    pub fn laplace(&self, z: Complex64) -> Complex64 {
        match *self {
            JumpLaw::Exponential { rate } => rate / (rate + z),
            JumpLaw::Constant { size } => (-z * size).exp(),
            JumpLaw::Uniform { low, high } => {
                let w = high - low;
                if (z * w).norm() < 1e-8 {
                    (-z * (0.5 * (low + high))).exp()
                } else {
                    ((-z * low).exp() - (-z * high).exp()) / (z * w)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::Exponential { rate } => 1.0 / rate,
            JumpLaw::Constant { size } => size,
            JumpLaw::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        !matches!(self, JumpLaw::Constant { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Exponential { rate } => Exp::new(rate).expect("validated rate").sample(rng),
            JumpLaw::Constant { size } => size,
            JumpLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }
}

/// Parametric subordinator. Stable is normalised so that φ(λ) = λ^α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubordinatorSpec {
    Drift {
        kappa: f64,
    },
    /// Unit jumps at rate `jump_rate`.
    Poisson {
        jump_rate: f64,
    },
    CompoundPoissonDrift {
        kappa: f64,
        jump_rate: f64,
        jump_law: JumpLaw,
    },
    Stable {
        alpha: f64,
    },
    Gamma {
        gamma_shape: f64,
        gamma_rate: f64,
    },
}

impl SubordinatorSpec {
    pub fn drift(kappa: f64) -> Result<Self> {
        Self::Drift { kappa }.validated()
    }

    pub fn poisson(jump_rate: f64) -> Result<Self> {
        Self::Poisson { jump_rate }.validated()
    }

    pub fn compound_poisson_drift(kappa: f64, jump_rate: f64, jump_law: JumpLaw) -> Result<Self> {
        Self::CompoundPoissonDrift { kappa, jump_rate, jump_law }.validated()
    }

    pub fn stable(alpha: f64) -> Result<Self> {
        Self::Stable { alpha }.validated()
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Self::Gamma { gamma_shape: shape, gamma_rate: rate }.validated()
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let spec: SubordinatorSpec = serde_json::from_str(doc).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(format!("{msg}: {self:?}")));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            SubordinatorSpec::Drift { kappa } if !pos(kappa) => bad("drift needs kappa > 0"),
            SubordinatorSpec::Poisson { jump_rate } if !pos(jump_rate) => bad("jump_rate must be > 0"),
            SubordinatorSpec::CompoundPoissonDrift { kappa, jump_rate, jump_law } => {
                if !(kappa >= 0.0 && kappa.is_finite()) {
                    return bad("kappa must be >= 0");
                }
                if !pos(jump_rate) {
                    return bad("jump_rate must be > 0");
                }
                jump_law.validate()
            }
            SubordinatorSpec::Stable { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                bad("alpha must lie strictly inside (0, 1)")
            }
            SubordinatorSpec::Gamma { gamma_shape, gamma_rate } if !pos(gamma_shape) || !pos(gamma_rate) => {
                bad("gamma shape and rate must be > 0")
            }
            _ => Ok(()),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            SubordinatorSpec::Drift { .. } => "drift",
            SubordinatorSpec::Poisson { .. } => "poisson",
            SubordinatorSpec::CompoundPoissonDrift { .. } => "compound_poisson_drift",
            SubordinatorSpec::Stable { .. } => "stable",
            SubordinatorSpec::Gamma { .. } => "gamma",
        }
    }

    /// Laplace exponent φ(λ) = -log E e^{-λ X_1}.
    pub fn laplace_exponent(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("laplace exponent needs lambda >= 0, got {lambda}")));
        }
        Ok(match *self {
            SubordinatorSpec::Drift { kappa } => kappa * lambda,
            SubordinatorSpec::Poisson { jump_rate } => jump_rate * -(-lambda).exp_m1(),
            SubordinatorSpec::CompoundPoissonDrift { kappa, jump_rate, jump_law } => {
                let lt = jump_law.laplace(Complex64::new(lambda, 0.0)).re;
                kappa * lambda + jump_rate * (1.0 - lt)
            }
            SubordinatorSpec::Stable { alpha } => lambda.powf(alpha),
            SubordinatorSpec::Gamma { gamma_shape, gamma_rate } => gamma_shape * (lambda / gamma_rate).ln_1p(),
        })
    }

    /// φ continued to Re z > 0 (principal branches).
    pub fn laplace_exponent_complex(&self, z: Complex64) -> Complex64 {
        match *self {
            SubordinatorSpec::Drift { kappa } => z * kappa,
            SubordinatorSpec::Poisson { jump_rate } => (1.0 - (-z).exp()) * jump_rate,
            SubordinatorSpec::CompoundPoissonDrift { kappa, jump_rate, jump_law } => {
                z * kappa + (1.0 - jump_law.laplace(z)) * jump_rate
            }
            SubordinatorSpec::Stable { alpha } => z.powf(alpha),
            SubordinatorSpec::Gamma { gamma_shape, gamma_rate } => (z / gamma_rate + 1.0).ln() * gamma_shape,
        }
    }

    /// Finite Lévy measure, so jump times can be simulated exactly.
    pub fn is_finite_activity(&self) -> bool {
        matches!(
            self,
            SubordinatorSpec::Drift { .. }
                | SubordinatorSpec::Poisson { .. }
                | SubordinatorSpec::CompoundPoissonDrift { .. }
        )
    }

    /// Lives on the integer lattice (unit-jump Poisson).
    pub fn is_lattice(&self) -> bool {
        matches!(self, SubordinatorSpec::Poisson { .. })
    }

    /// Whether U(dx) has a continuous density on (0, ∞).
    pub fn has_potential_density(&self) -> bool {
        match *self {
            SubordinatorSpec::Drift { .. } | SubordinatorSpec::Stable { .. } | SubordinatorSpec::Gamma { .. } => true,
            SubordinatorSpec::Poisson { .. } => false,
            SubordinatorSpec::CompoundPoissonDrift { kappa, jump_law, .. } => {
                kappa > 0.0 && jump_law.is_absolutely_continuous()
            }
        }
    }

    /// U({0}) = ∫ P(X_t = 0) dt: the mean holding time at the start for
    /// driftless compound Poisson, zero otherwise.
    pub fn potential_atom_at_zero(&self, q: f64) -> f64 {
        match *self {
            SubordinatorSpec::Poisson { jump_rate } => 1.0 / (jump_rate + q),
            SubordinatorSpec::CompoundPoissonDrift { kappa: 0.0, jump_rate, .. } => 1.0 / (jump_rate + q),
            _ => 0.0,
        }
    }

    /// Killing-free mean E X_1 (infinite for stable).
    pub fn mean(&self) -> f64 {
        match *self {
            SubordinatorSpec::Drift { kappa } => kappa,
            SubordinatorSpec::Poisson { jump_rate } => jump_rate,
            SubordinatorSpec::CompoundPoissonDrift { kappa, jump_rate, jump_law } => {
                kappa + jump_rate * jump_law.mean()
            }
            SubordinatorSpec::Stable { .. } => f64::INFINITY,
            SubordinatorSpec::Gamma { gamma_shape, gamma_rate } => gamma_shape / gamma_rate,
        }
    }

    /// Tail of the Lévy measure ν(x, ∞) for x > 0.
    pub fn levy_tail(&self, x: f64) -> f64 {
        match *self {
            SubordinatorSpec::Drift { .. } => 0.0,
            SubordinatorSpec::Poisson { jump_rate } => {
                if x < 1.0 {
                    jump_rate
                } else {
                    0.0
                }
            }
            SubordinatorSpec::CompoundPoissonDrift { jump_rate, jump_law, .. } => {
                let tail = match jump_law {
                    JumpLaw::Exponential { rate } => (-rate * x).exp(),
                    JumpLaw::Constant { size } => f64::from(u8::from(x < size)),
                    JumpLaw::Uniform { low, high } => ((high - x.max(low)) / (high - low)).clamp(0.0, 1.0),
                };
                jump_rate * tail
            }
            SubordinatorSpec::Stable { alpha } => x.powf(-alpha) / gamma(1.0 - alpha),
            SubordinatorSpec::Gamma { gamma_shape, gamma_rate } => {
                // ν(dx) = shape x^{-1} e^{-rate x} dx, tail is shape·E1(rate·x)
                gamma_shape * exp_integral_e1(gamma_rate * x)
            }
        }
    }
}

/// Exponential integral E1(x) for x > 0.
fn exp_integral_e1(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x < 1.0 {
        // series: -γ - ln x + Σ (-1)^{k+1} x^k/(k k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            sum -= term / k as f64;
            if term.abs() < 1e-17 {
                break;
            }
        }
        -0.577_215_664_901_532_9 - x.ln() + sum
    } else {
        // continued fraction (modified Lentz)
        let mut b = x + 1.0;
        let mut c = 1e300;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..200 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_exponent_examples() {
        let s = SubordinatorSpec::stable(0.5).unwrap();
        assert!((s.laplace_exponent(4.0).unwrap() - 2.0).abs() < 1e-15);
        let d = SubordinatorSpec::drift(1.0).unwrap();
        assert_eq!(d.laplace_exponent(0.0).unwrap(), 0.0);
        let p = SubordinatorSpec::poisson(1.0).unwrap();
        assert!((p.laplace_exponent(2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert!(p.laplace_exponent(-1.0).is_err());
    }

    #[test]
    fn complex_matches_real_axis() {
        let specs = [
            SubordinatorSpec::drift(2.0).unwrap(),
            SubordinatorSpec::poisson(1.5).unwrap(),
            SubordinatorSpec::compound_poisson_drift(1.0, 1.0, JumpLaw::Exponential { rate: 1.0 }).unwrap(),
            SubordinatorSpec::compound_poisson_drift(0.0, 2.0, JumpLaw::Uniform { low: 0.5, high: 1.5 }).unwrap(),
            SubordinatorSpec::stable(0.3).unwrap(),
            SubordinatorSpec::gamma(2.0, 3.0).unwrap(),
        ];
        for s in specs {
            for &l in &[0.0, 0.1, 1.0, 7.0] {
                let c = s.laplace_exponent_complex(Complex64::new(l, 0.0));
                let r = s.laplace_exponent(l).unwrap();
                assert!((c.re - r).abs() < 1e-12 * (1.0 + r) && c.im.abs() < 1e-12, "{s:?} {l}");
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(SubordinatorSpec::stable(1.0).is_err());
        assert!(SubordinatorSpec::stable(0.0).is_err());
        assert!(SubordinatorSpec::drift(0.0).is_err());
        assert!(SubordinatorSpec::poisson(-1.0).is_err());
        assert!(SubordinatorSpec::gamma(1.0, 0.0).is_err());
        assert!(SubordinatorSpec::compound_poisson_drift(-1.0, 1.0, JumpLaw::Constant { size: 1.0 }).is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let s = SubordinatorSpec::from_json(r#"{"family": "stable", "alpha": 0.5}"#).unwrap();
        assert_eq!(s, SubordinatorSpec::Stable { alpha: 0.5 });
        let c = SubordinatorSpec::from_json(
            r#"{"family":"compound_poisson_drift","kappa":1,"jump_rate":1,"jump_law":{"law":"exponential","rate":1}}"#,
        )
        .unwrap();
        assert!(c.has_potential_density());
        assert!(SubordinatorSpec::from_json(r#"{"family": "stable", "alpha": 0.5, "beta": 1}"#).is_err());
        assert!(SubordinatorSpec::from_json(r#"{"family": "stable", "alpha": 1.5}"#).is_err());
    }

    #[test]
    fn e1_values() {
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-13);
        assert!((exp_integral_e1(0.1) - 1.822_923_958_419_390_7).abs() < 1e-12);
        assert!((exp_integral_e1(5.0) - 0.001_148_295_591_275_325_7).abs() < 1e-15);
    }
}
