use crate::error::{Error, Result};
use std::io::Write;

/// How a path evolves between its recorded points.
#[derive(Debug, Clone, PartialEq)]
pub enum Interpolation {
    /// Constant between points (pure jump or grid skeleton).
    Step,
    /// Straight lines between points.
    Linear,
    /// Constant slope between points, jumps at recorded times.
    Drift(f64),
    /// Slope per segment; `slopes.len() == times.len() - 1`.
    Segments(Vec<f64>),
    /// `(target - X)^alpha` decreases at constant `rate` between points:
    /// the real-time shape of a Lamperti path with linear drift in log space.
    PowerToward { target: f64, alpha: f64, rate: f64 },
}

/// A simulated trajectory. For killed paths the last recorded point is
/// `(lifetime, X_{lifetime-})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `f64::INFINITY` when the path is not killed.
    pub lifetime: f64,
    pub weight: f64,
    pub killed: bool,
    pub interpolation: Interpolation,
}

impl PathSample {
    pub fn new(times: Vec<f64>, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        let p = PathSample { times, values, lifetime: f64::INFINITY, weight: 1.0, killed: false, interpolation };
        p.check()?;
        Ok(p)
    }

    /// Marks the path killed at its last recorded time.
    pub fn kill_at_end(mut self) -> Self {
        self.killed = true;
        self.lifetime = *self.times.last().expect("non-empty path");
        self
    }

    /// Same path started from `x0 + start()`.
    pub fn shifted(mut self, dx: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v += dx);
        if let Interpolation::PowerToward { target, .. } = &mut self.interpolation {
            *target += dx;
        }
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Numeric(format!("malformed path: {m}")));
        if self.times.is_empty() || self.times.len() != self.values.len() {
            return bad("times and values must be non-empty and of equal length");
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("times must be strictly increasing");
        }
        if let Interpolation::Segments(s) = &self.interpolation {
            if s.len() + 1 != self.times.len() {
                return bad("one slope per segment");
            }
        }
        if !(self.weight >= 0.0) {
            return bad("weight must be nonnegative");
        }
        if self.killed && !(self.lifetime.is_finite() && self.lifetime <= *self.times.last().unwrap()) {
            return bad("killed path needs a finite lifetime within its span");
        }
        Ok(())
    }

    pub fn is_nondecreasing(&self) -> bool {
        let slopes_ok = match &self.interpolation {
            Interpolation::Drift(k) => *k >= 0.0,
            Interpolation::Segments(s) => s.iter().all(|&k| k >= 0.0),
            Interpolation::PowerToward { rate, .. } => *rate >= 0.0,
            _ => true,
        };
        slopes_ok && self.values.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn start(&self) -> f64 {
        self.values[0]
    }

    /// Last recorded value; `X_{ζ-}` for killed paths.
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// State at time `t`, or `None` once the path is dead. Beyond the last
    /// recorded time of a live path the interpolation rule is extended.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if t < self.times[0] || (self.killed && t >= self.lifetime) {
            return None;
        }
        // index of the last recorded time <= t
        let i = self.times.partition_point(|&s| s <= t) - 1;
        Some(self.evolve(i, t - self.times[i]))
    }

    /// Value reached `dt` after recorded point `i` without further jumps.
    pub fn evolve(&self, i: usize, dt: f64) -> f64 {
        let base = self.values[i];
        match &self.interpolation {
            Interpolation::Step => base,
            Interpolation::Drift(k) => base + k * dt,
            Interpolation::Segments(s) => base + s.get(i).copied().unwrap_or(0.0) * dt,
            Interpolation::Linear => match self.times.get(i + 1) {
                Some(&t1) => base + (self.values[i + 1] - base) * dt / (t1 - self.times[i]),
                None => base,
            },
            Interpolation::PowerToward { target, alpha, rate } => {
                let gap = ((target - base).max(0.0).powf(*alpha) - rate * dt).max(0.0);
                target - gap.powf(1.0 / alpha)
            }
        }
    }

    /// Left limit at recorded point `i >= 1`.
    pub fn left_limit(&self, i: usize) -> f64 {
        if self.killed && i == self.times.len() - 1 {
            return self.values[i];
        }
        self.evolve(i - 1, self.times[i] - self.times[i - 1])
    }

    /// First time the path exceeds `level`, if it does so before dying.
    pub fn passage_time(&self, level: f64) -> Option<f64> {
        if self.values[0] > level {
            return Some(self.times[0]);
        }
        for i in 1..self.times.len() {
            let (t0, t1) = (self.times[i - 1], self.times[i]);
            let x0 = self.values[i - 1];
            let left = self.evolve(i - 1, t1 - t0);
            if left > level {
                let dt = match &self.interpolation {
                    Interpolation::PowerToward { target, alpha, rate } => {
                        ((target - x0).powf(*alpha) - (target - level).powf(*alpha)) / rate
                    }
                    _ => (level - x0) / ((left - x0) / (t1 - t0)),
                };
                return Some(t0 + dt);
            }
            let last_killed = self.killed && i == self.times.len() - 1;
            if !last_killed && self.values[i] > level {
                return Some(t1);
            }
        }
        None
    }

    /// Writes `t,x,weight,killed` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,weight,killed")?;
        let n = self.times.len();
        for (i, (t, x)) in self.times.iter().zip(&self.values).enumerate() {
            let dead = self.killed && i == n - 1;
            writeln!(out, "{t},{x},{},{}", self.weight, u8::from(dead))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_rules() {
        let p = PathSample::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 3.0], Interpolation::Drift(0.5)).unwrap();
        assert_eq!(p.value_at(0.5), Some(0.25));
        assert_eq!(p.value_at(1.0), Some(2.0));
        assert_eq!(p.value_at(3.0), Some(3.5));
        let k = p.clone().kill_at_end();
        assert_eq!(k.value_at(2.0), None);
        assert_eq!(k.value_at(1.5), Some(2.25));
        let l = PathSample::new(vec![0.0, 2.0], vec![0.0, 1.0], Interpolation::Linear).unwrap();
        assert_eq!(l.value_at(1.0), Some(0.5));
    }

    #[test]
    fn passage_time_with_drift_and_jumps() {
        let p = PathSample::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 3.0], Interpolation::Drift(0.5)).unwrap();
        assert_eq!(p.passage_time(0.25), Some(0.5));
        assert_eq!(p.passage_time(1.0), Some(1.0));
        assert!((p.passage_time(2.1).unwrap() - 1.2).abs() < 1e-12);
        let k = p.kill_at_end();
        assert_eq!(k.passage_time(2.9), None);
    }

    #[test]
    fn power_toward_segments() {
        // (2 - X)^{1/2} falls at rate 0.5 from X = 1
        let interp = Interpolation::PowerToward { target: 2.0, alpha: 0.5, rate: 0.5 };
        let p = PathSample::new(vec![0.0, 1.0], vec![1.0, 1.5], interp).unwrap();
        assert!((p.value_at(0.5).unwrap() - (2.0 - 0.75f64.powi(2))).abs() < 1e-15);
        assert!((p.left_limit(1) - 1.75).abs() < 1e-15);
        let tau = p.passage_time(1.4375).unwrap();
        assert!((tau - 0.5).abs() < 1e-12, "{tau}");
    }

    #[test]
    fn rejects_malformed() {
        assert!(PathSample::new(vec![0.0, 0.0], vec![0.0, 1.0], Interpolation::Step).is_err());
        assert!(PathSample::new(vec![0.0, 1.0], vec![0.0], Interpolation::Step).is_err());
    }

    #[test]
    fn csv_export() {
        let p = PathSample::new(vec![0.0, 1.0], vec![0.0, 1.0], Interpolation::Step).unwrap().kill_at_end();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x,weight,killed\n0,0,1,0\n1,1,1,1\n");
    }
}
