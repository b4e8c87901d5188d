use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::special::{beta_inc_split, erfc, gamma_p, gamma_q, ln_gamma};
use super::NumError;

/// The reference distributions used for intervals and p-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "df", rename_all = "snake_case")]
pub enum Dist {
    StdNormal,
    StudentT(f64),
    ChiSquare(f64),
}

impl Dist {
    fn df(&self) -> Option<f64> {
        match *self {
            Dist::StdNormal => None,
            Dist::StudentT(df) | Dist::ChiSquare(df) => Some(df),
        }
    }

    fn df_valid(&self) -> bool {
        self.df().is_none_or(|df| df.is_finite() && df >= 1.0)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Dist::StdNormal => (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            Dist::StudentT(v) => (ln_gamma(0.5 * (v + 1.0))
                - ln_gamma(0.5 * v)
                - 0.5 * (v * PI).ln()
                - 0.5 * (v + 1.0) * (x * x / v).ln_1p())
            .exp(),
            Dist::ChiSquare(k) => {
                if x <= 0.0 {
                    return 0.0;
                }
                ((0.5 * k - 1.0) * x.ln() - 0.5 * x - 0.5 * k * 2f64.ln() - ln_gamma(0.5 * k)).exp()
            }
        }
    }

    /// `P(X <= x)`. Returns NaN when the degrees of freedom are invalid.
    pub fn cdf(&self, x: f64) -> f64 {
        if !self.df_valid() || x.is_nan() {
            return f64::NAN;
        }
        match *self {
            Dist::StdNormal => 0.5 * erfc(-x / SQRT_2),
            Dist::StudentT(_) => {
                if x >= 0.0 {
                    1.0 - self.sf(x)
                } else {
                    self.sf(-x)
                }
            }
            Dist::ChiSquare(k) => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_p(0.5 * k, 0.5 * x)
                }
            }
        }
    }

    /// Upper tail `P(X > x)`, computed without cancellation.
    pub fn sf(&self, x: f64) -> f64 {
        if !self.df_valid() || x.is_nan() {
            return f64::NAN;
        }
        match *self {
            Dist::StdNormal => 0.5 * erfc(x / SQRT_2),
            Dist::StudentT(v) => {
                if x == f64::INFINITY {
                    return 0.0;
                }
                let x2 = x * x;
                let tail = 0.5 * beta_inc_split(0.5 * v, 0.5, v / (v + x2), x2 / (v + x2));
                if x >= 0.0 {
                    tail
                } else {
                    1.0 - tail
                }
            }
            Dist::ChiSquare(k) => {
                if x <= 0.0 {
                    1.0
                } else {
                    gamma_q(0.5 * k, 0.5 * x)
                }
            }
        }
    }

    /// Two-sided tail probability `P(|X| > |x|)` for the symmetric laws.
    pub fn two_sided_p(&self, x: f64) -> f64 {
        (2.0 * self.sf(x.abs())).min(1.0)
    }

    pub fn quantile(&self, prob: f64) -> Result<f64, NumError> {
        if !(prob > 0.0 && prob < 1.0) {
            return Err(NumError::DomainError(format!(
                "probability {prob} outside (0, 1)"
            )));
        }
        if !self.df_valid() {
            return Err(NumError::DomainError(format!(
                "degrees of freedom {:?} must be >= 1",
                self.df()
            )));
        }
        Ok(match *self {
            Dist::StdNormal => normal_quantile(prob),
            Dist::StudentT(_) => {
                if prob == 0.5 {
                    0.0
                } else if prob > 0.5 {
                    self.upper_symmetric(1.0 - prob)
                } else {
                    -self.upper_symmetric(prob)
                }
            }
            Dist::ChiSquare(k) => self.chi_square_quantile(prob, k),
        })
    }

    /// Positive `x` with `sf(x) = tail`, for `tail < 0.5`.
    fn upper_symmetric(&self, tail: f64) -> f64 {
        let mut hi = (-normal_quantile(tail)).max(1.0);
        while self.sf(hi) > tail {
            hi *= 2.0;
        }
        let guess = -normal_quantile(tail);
        root_bracketed(
            |x| tail - self.sf(x),
            |x| self.pdf(x),
            0.0,
            hi,
            guess.clamp(0.0, hi),
        )
    }

    fn chi_square_quantile(&self, prob: f64, k: f64) -> f64 {
        let mut hi = k.max(1.0);
        if prob <= 0.5 {
            while self.cdf(hi) < prob {
                hi *= 2.0;
            }
            root_bracketed(|x| self.cdf(x) - prob, |x| self.pdf(x), 0.0, hi, 0.5 * hi)
        } else {
            let tail = 1.0 - prob;
            while self.sf(hi) > tail {
                hi *= 2.0;
            }
            root_bracketed(|x| tail - self.sf(x), |x| self.pdf(x), 0.0, hi, 0.5 * hi)
        }
    }
}

pub fn dist_cdf(dist: Dist, x: f64) -> f64 {
    dist.cdf(x)
}

pub fn dist_quantile(dist: Dist, prob: f64) -> Result<f64, NumError> {
    dist.quantile(prob)
}

/// Safeguarded Newton on an increasing function `g` with `g(lo) <= 0 <= g(hi)`.
fn root_bracketed(
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    mut x: f64,
) -> f64 {
    for _ in 0..400 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let slope = dg(x);
        let newton = x - gx / slope;
        x = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}

// Acklam's rational approximation, refined by Halley steps on erfc.
fn normal_quantile(p: f64) -> f64 {
    if p > 0.5 {
        return -normal_quantile(1.0 - p);
    }
    if p == 0.5 {
        return 0.0;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let mut x = if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..2 {
        let e = 0.5 * erfc(-x / SQRT_2) - p;
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}
