//! Welch's two-sample t-test and the special functions behind its p-value.

use serde::{Deserialize, Serialize};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];
const CF_MAX_ITER: usize = 300;
const CF_EPS: f64 = 1e-15;
const CF_TINY: f64 = 1e-300;

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Continued fraction for the incomplete beta, evaluated with modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() || df.is_nan() || df <= 0.0 {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    inc_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GroupSummary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std_dev: f64,
    pub n: usize,
}

impl GroupSummary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return GroupSummary { mean: f64::NAN, std_dev: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        GroupSummary { mean, std_dev: var.sqrt(), n }
    }

    fn variance(&self) -> f64 {
        self.std_dev * self.std_dev
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    /// Both groups have zero variance; `t` is reported as 0 and `p` as 1.
    pub zero_variance: bool,
}

/// Welch's unequal-variance t-test. Both groups need at least two samples.
pub fn welch_t_test(a: &GroupSummary, b: &GroupSummary) -> Option<WelchTest> {
    if a.n < 2 || b.n < 2 {
        return None;
    }
    let (na, nb) = (a.n as f64, b.n as f64);
    let (sa, sb) = (a.variance() / na, b.variance() / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Some(WelchTest {
            t: 0.0,
            df: na + nb - 2.0,
            p_value: 1.0,
            zero_variance: true,
        });
    }
    let t = (a.mean - b.mean) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Some(WelchTest {
        t,
        df,
        p_value: student_t_two_sided_p(t, df),
        zero_variance: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n={n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn inc_beta_closed_forms() {
        // I_x(1, 1) = x, I_x(a, 1) = x^a, I_x(1, b) = 1 - (1 - x)^b
        for &x in &[0.01, 0.2, 0.5, 0.77, 0.999] {
            assert!((inc_beta(1.0, 1.0, x) - x).abs() < 1e-13);
            assert!((inc_beta(3.5, 1.0, x) - x.powf(3.5)).abs() < 1e-13);
            assert!((inc_beta(1.0, 2.5, x) - (1.0 - (1.0 - x).powf(2.5))).abs() < 1e-13);
        }
        assert_eq!(inc_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(inc_beta(2.0, 3.0, 1.0), 1.0);
    }

    #[test]
    fn t_p_value_closed_forms() {
        // df = 1 is Cauchy: p = 1 - 2 atan(|t|) / pi
        for &t in &[0.0f64, 0.3, 1.0, 4.2, 30.0] {
            let want = 1.0 - 2.0 * t.abs().atan() / std::f64::consts::PI;
            assert!((student_t_two_sided_p(t, 1.0) - want).abs() < 1e-12, "t={t}");
        }
        // df = 2: p = 1 - |t| / sqrt(2 + t^2)
        for &t in &[0.5f64, 2.0, 9.0] {
            let want = 1.0 - t / (2.0 + t * t).sqrt();
            assert!((student_t_two_sided_p(t, 2.0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn welch_hand_example() {
        let a = GroupSummary::of(&[1.0, 2.0, 3.0, 4.0]);
        let b = GroupSummary::of(&[2.0, 4.0, 6.0, 8.0, 10.0]);
        let w = welch_t_test(&a, &b).unwrap();
        // va = 5/3, vb = 10; se2 = 5/12 + 2
        let se2: f64 = 5.0 / 12.0 + 2.0;
        assert!((w.t - (2.5 - 6.0) / se2.sqrt()).abs() < 1e-14);
        let df = se2 * se2 / ((5.0f64 / 12.0).powi(2) / 3.0 + 4.0 / 4.0);
        assert!((w.df - df).abs() < 1e-12);
        assert!(!w.zero_variance);
    }

    #[test]
    fn welch_degenerate_cases() {
        let c = GroupSummary::of(&[1.0, 1.0, 1.0]);
        let w = welch_t_test(&c, &c).unwrap();
        assert!(w.zero_variance);
        assert_eq!((w.t, w.p_value), (0.0, 1.0));
        assert!(welch_t_test(&GroupSummary::of(&[1.0]), &c).is_none());
    }
}
