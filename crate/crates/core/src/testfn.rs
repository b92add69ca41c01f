//! Compactly supported C² test functions `Phi(t, x) = a(t) b(x)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::quad;

/// One-dimensional factor of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    /// `(1 - r^2)^3` with `r = (s - center) / radius`.
    Bump { center: f64, radius: f64 },
    /// 1 on `[lo, hi]`, quintic smoothstep ramps of width `ramp` outside.
    Plateau { lo: f64, hi: f64, ramp: f64 },
}

fn smoothstep(z: f64) -> f64 {
    z * z * z * (10.0 + z * (-15.0 + 6.0 * z))
}

fn smoothstep_deriv(z: f64) -> f64 {
    30.0 * z * z * (1.0 - z) * (1.0 - z)
}

impl Profile {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Profile::Bump { center, radius } => {
                let r = (s - center) / radius;
                if r.abs() >= 1.0 {
                    0.0
                } else {
                    let w = 1.0 - r * r;
                    w * w * w
                }
            }
            Profile::Plateau { lo, hi, ramp } => {
                if s >= lo && s <= hi {
                    1.0
                } else if s < lo && s > lo - ramp {
                    smoothstep((s - (lo - ramp)) / ramp)
                } else if s > hi && s < hi + ramp {
                    smoothstep((hi + ramp - s) / ramp)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            Profile::Bump { center, radius } => {
                let r = (s - center) / radius;
                if r.abs() >= 1.0 {
                    0.0
                } else {
                    let w = 1.0 - r * r;
                    -6.0 * r * w * w / radius
                }
            }
            Profile::Plateau { lo, hi, ramp } => {
                if s < lo && s > lo - ramp {
                    smoothstep_deriv((s - (lo - ramp)) / ramp) / ramp
                } else if s > hi && s < hi + ramp {
                    -smoothstep_deriv((hi + ramp - s) / ramp) / ramp
                } else {
                    0.0
                }
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Profile::Bump { center, radius } => (center - radius, center + radius),
            Profile::Plateau { lo, hi, ramp } => (lo - ramp, hi + ramp),
        }
    }

    /// Points where the profile is not polynomial.
    pub fn knots(&self) -> Vec<f64> {
        match *self {
            Profile::Bump { center, radius } => vec![center - radius, center + radius],
            Profile::Plateau { lo, hi, ramp } => vec![lo - ramp, lo, hi, hi + ramp],
        }
    }

    /// Exact integral over `[a, b]` (polynomial pieces of degree <= 6).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b == a {
            return 0.0;
        }
        if b < a {
            return -self.integral(b, a);
        }
        let mut cuts = vec![a];
        cuts.extend(self.knots().into_iter().filter(|&k| k > a && k < b));
        cuts.push(b);
        cuts.windows(2)
            .map(|w| quad::gauss5(&|s| self.value(s), w[0], w[1]))
            .sum()
    }
}

/// Separable test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub t: Profile,
    pub x: Profile,
}

impl TestFunction {
    pub fn new(t: Profile, x: Profile) -> Self {
        TestFunction { t, x }
    }

    /// Plateau equal to one on `[t0, t1] x [x0, x1]`.
    pub fn plateau(t0: f64, t1: f64, x0: f64, x1: f64, ramp: f64) -> Self {
        TestFunction {
            t: Profile::Plateau {
                lo: t0,
                hi: t1,
                ramp,
            },
            x: Profile::Plateau {
                lo: x0,
                hi: x1,
                ramp,
            },
        }
    }

    /// Random product bump with support inside `t_range x x_range`.
    pub fn random_bump<R: Rng>(rng: &mut R, t_range: (f64, f64), x_range: (f64, f64)) -> Self {
        let draw = |rng: &mut R, (lo, hi): (f64, f64)| {
            let radius = rng.gen_range(0.1..0.45) * (hi - lo);
            let center = rng.gen_range(lo + radius..hi - radius);
            Profile::Bump { center, radius }
        };
        let t = draw(rng, t_range);
        let x = draw(rng, x_range);
        TestFunction { t, x }
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.t.value(t) * self.x.value(x)
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        self.t.derivative(t) * self.x.value(x)
    }

    pub fn dx(&self, t: f64, x: f64) -> f64 {
        self.t.value(t) * self.x.derivative(x)
    }

    /// `((t_lo, t_hi), (x_lo, x_hi))`
    pub fn support(&self) -> ((f64, f64), (f64, f64)) {
        (self.t.support(), self.x.support())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_integral_and_derivative() {
        let p = Profile::Bump {
            center: 0.0,
            radius: 1.0,
        };
        // int_{-1}^{1} (1 - r^2)^3 dr = 32/35
        assert!((p.integral(-2.0, 2.0) - 32.0 / 35.0).abs() < 1e-14);
        let h = 1e-6;
        for s in [-0.7, -0.1, 0.4, 0.95] {
            let fd = (p.value(s + h) - p.value(s - h)) / (2.0 * h);
            assert!((fd - p.derivative(s)).abs() < 1e-8);
        }
    }

    #[test]
    fn plateau_is_one_inside_and_smooth() {
        let p = Profile::Plateau {
            lo: 0.2,
            hi: 0.8,
            ramp: 0.1,
        };
        assert_eq!(p.value(0.5), 1.0);
        assert_eq!(p.value(0.05), 0.0);
        // each ramp integrates to ramp / 2
        assert!((p.integral(0.0, 1.0) - 0.7).abs() < 1e-14);
        let h = 1e-6;
        for s in [0.13, 0.17, 0.85, 0.88] {
            let fd = (p.value(s + h) - p.value(s - h)) / (2.0 * h);
            assert!((fd - p.derivative(s)).abs() < 1e-7);
        }
    }
}
