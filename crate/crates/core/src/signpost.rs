//! Rounding marks ("signposts") for the classic divisor methods and for the
//! power-law family.
//!
//! A quota `q` with integer part `f` rounds up to `f + 1` when `q >= r(f)`
//! and down to `f` otherwise. The power-law mark for exponent `b` is
//!
//! ```text
//! r_b(f) = (((f + 1)^(b + 1) - f^(b + 1)) / (b + 1))^(1 / b)
//! ```
//!
//! with limits `r_-inf = f`, `r_-1 = 1 / ln(1 + 1/f)`,
//! `r_0 = (f + 1)^(f + 1) / (e f^f)` and `r_+inf = f + 1`.

use serde::Serialize;

/// Below this distance from 0 or -1 the exponent is replaced by its limit.
const LIMIT_BAND: f64 = 1e-9;
/// Exponents at or beyond this magnitude are treated as infinite.
const INFINITE_BETA: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SignpostRule {
    Adams,
    Dean,
    HuntingtonHill,
    Webster,
    Jefferson,
    /// Power-law exponent; `f64::INFINITY` and `f64::NEG_INFINITY` are allowed.
    PowerLaw(f64),
}

impl SignpostRule {
    pub fn mark(&self, f: u64) -> f64 {
        let x = f as f64;
        match *self {
            SignpostRule::Adams => x,
            SignpostRule::Dean => {
                if f == 0 {
                    0.0
                } else {
                    x * (x + 1.0) / (x + 0.5)
                }
            }
            SignpostRule::HuntingtonHill => (x * (x + 1.0)).sqrt(),
            SignpostRule::Webster => x + 0.5,
            SignpostRule::Jefferson => x + 1.0,
            SignpostRule::PowerLaw(beta) => power_law_mark(beta, f),
        }
    }

    /// True when the rule hands every state at least one seat (`r(0) = 0`).
    pub fn guarantees_one_seat(&self) -> bool {
        self.mark(0) == 0.0
    }

    pub fn label(&self) -> String {
        match self {
            SignpostRule::Adams => "adams".into(),
            SignpostRule::Dean => "dean".into(),
            SignpostRule::HuntingtonHill => "hill".into(),
            SignpostRule::Webster => "webster".into(),
            SignpostRule::Jefferson => "jefferson".into(),
            SignpostRule::PowerLaw(b) => format!("powerlaw:{}", format_beta(*b)),
        }
    }
}

fn format_beta(b: f64) -> String {
    if b == f64::INFINITY {
        "+inf".into()
    } else if b == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{b}")
    }
}

pub fn signpost(rule: SignpostRule, f: u64) -> f64 {
    rule.mark(f)
}

pub fn signpost_table(rule: SignpostRule, f_max: u64) -> Vec<(u64, f64)> {
    (0..=f_max).map(|f| (f, rule.mark(f))).collect()
}

/// `ln |e^a - 1|` without overflow for large `a`.
fn ln_abs_expm1(a: f64) -> f64 {
    if a > 30.0 {
        a + (-(-a).exp()).ln_1p()
    } else {
        a.exp_m1().abs().ln()
    }
}

fn power_law_mark(beta: f64, f: u64) -> f64 {
    let x = f as f64;
    if beta >= INFINITE_BETA {
        return x + 1.0;
    }
    if beta <= -INFINITE_BETA {
        return x;
    }
    // Exact forms for the named members of the family.
    if beta == 1.0 {
        return x + 0.5;
    }
    if beta == -2.0 {
        return (x * (x + 1.0)).sqrt();
    }
    if beta == 2.0 {
        return (x * (x + 1.0) + 1.0 / 3.0).sqrt();
    }

    let near_zero = beta.abs() < LIMIT_BAND;
    let near_minus_one = (beta + 1.0).abs() < LIMIT_BAND;

    if f == 0 {
        if beta <= -1.0 || near_minus_one {
            return 0.0;
        }
        if near_zero {
            return (-1.0f64).exp();
        }
        return (-(beta + 1.0).ln() / beta).exp();
    }

    let step = (1.0 / x).ln_1p();
    let r = if near_zero {
        (x + 1.0) * (x * step - 1.0).exp()
    } else if near_minus_one {
        1.0 / step
    } else {
        // r = f * (f X)^(1/b) with X = expm1((b + 1) ln(1 + 1/f)) / (b + 1)
        let a = (beta + 1.0) * step;
        let ln_fx = x.ln() + ln_abs_expm1(a) - (beta + 1.0).abs().ln();
        x * (ln_fx / beta).exp()
    };
    r.clamp(x, x + 1.0)
}
