//! Digamma and trigamma on the positive reals.
//!
//! Both use upward recurrence to push the argument above 6, then the
//! Euler-Maclaurin asymptotic series (Abramowitz & Stegun 6.3.18 and 6.4.12)
//! with Bernoulli terms through x^-14 and x^-15. The truncation error of the
//! tail at x = 6 is below 2e-13, so absolute accuracy is ~1e-12 wherever the
//! result is O(1); for results of magnitude ~1e6 (trigamma near 1e-3) accuracy
//! is limited by f64 ulp instead.

const RECURRENCE_THRESHOLD: f64 = 6.0;

/// First derivative of ln Gamma. Panics for x <= 0, NaN, or infinity.
pub fn digamma(x: f64) -> f64 {
    assert!(
        x > 0.0 && x.is_finite(),
        "digamma requires finite x > 0, got {x}"
    );
    let mut acc = 0.0;
    let mut y = x;
    while y < RECURRENCE_THRESHOLD {
        acc -= 1.0 / y;
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
    acc + y.ln() - 0.5 * inv - tail
}

/// Second derivative of ln Gamma. Panics for x <= 0, NaN, or infinity.
pub fn trigamma(x: f64) -> f64 {
    assert!(
        x > 0.0 && x.is_finite(),
        "trigamma requires finite x > 0, got {x}"
    );
    let mut acc = 0.0;
    let mut y = x;
    while y < RECURRENCE_THRESHOLD {
        acc += 1.0 / (y * y);
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let tail = inv
        * inv2
        * (1.0 / 6.0
            - inv2
                * (1.0 / 30.0
                    - inv2
                        * (1.0 / 42.0
                            - inv2
                                * (1.0 / 30.0
                                    - inv2
                                        * (5.0 / 66.0
                                            - inv2 * (691.0 / 2730.0 - inv2 * (7.0 / 6.0)))))));
    acc + inv + 0.5 * inv2 + tail
}
