//! Exponential integrals used by the Ewald sums.

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Ein(s) = ∫_0^s (1 - e^{-t}) / t dt`, entire and equal to `E1(s) + ln s + γ` for `s > 0`.
pub fn ein(s: f64) -> f64 {
    if s <= 1.0 {
        // alternating series sum_{k>=1} (-1)^{k+1} s^k / (k k!)
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..60 {
            term *= -s / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        e1(s) + s.ln() + EULER_GAMMA
    }
}

/// Exponential integral `E1(s) = ∫_s^∞ e^{-t} / t dt` for `s > 0`.
pub fn e1(s: f64) -> f64 {
    if s <= 0.0 {
        return f64::INFINITY;
    }
    if s <= 1.0 {
        return ein(s) - s.ln() - EULER_GAMMA;
    }
    if s > 745.0 {
        return 0.0;
    }
    // modified Lentz evaluation of the continued fraction
    let tiny = 1e-300;
    let mut b = s + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-s).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // values from the tabulated exponential integral
        assert!((e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-15);
        assert!((e1(0.1) - 1.822_923_958_419_390_7).abs() < 1e-14);
        assert!((e1(5.0) - 0.001_148_295_591_275_325_7).abs() < 1e-17);
        assert!((ein(1.0) - 0.796_599_599_297_053_1).abs() < 1e-15);
    }

    #[test]
    fn branches_agree_at_the_seam() {
        let s = 1.0 + 1e-9;
        let lhs = e1(s) + s.ln() + EULER_GAMMA;
        let rhs = ein(1.0) + 1e-9 * (1.0 - (-1.0f64).exp());
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn derivative_of_ein() {
        for &s in &[0.01, 0.5, 2.0, 7.0] {
            let h = 1e-5;
            let fd = (ein(s + h) - ein(s - h)) / (2.0 * h);
            assert!((fd - (1.0 - (-s).exp()) / s).abs() < 1e-9);
        }
    }
}
