//! Modified Bessel function of the second kind, `K_ν(x)` for real order.
//!
//! The order is split as `ν = μ + m` with `|μ| ≤ 1/2`. `K_μ` and `K_{μ+1}` come
//! from Temme's series for `x < 2` and from Steed's continued fraction
//! otherwise; forward recurrence (stable for `K`) then climbs to `ν`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SERIES_CROSSOVER: f64 = 2.0;
const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-17;

/// Taylor coefficients of `1/Γ(z) = Σ c_k z^k` (c_1 first).
const RECIP_GAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// Temme's auxiliary gamma quantities for `|μ| ≤ 1/2`:
/// `(gam1, gam2, 1/Γ(1+μ), 1/Γ(1−μ))`.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mu2 = mu * mu;
    let horner = |first: usize| {
        (first..RECIP_GAMMA.len() + 1)
            .step_by(2)
            .rev()
            .fold(0.0, |acc, k| acc * mu2 + RECIP_GAMMA[k - 1])
    };
    // gam1 = -Σ_{k even} c_k μ^{k-2},  gam2 = Σ_{k odd} c_k μ^{k-1}
    let gam1 = -horner(2);
    let gam2 = horner(1);
    // 1/Γ(1+μ) = gam2 - μ·gam1,  1/Γ(1−μ) = gam2 + μ·gam1
    let gampl = gam2 - mu * gam1;
    let gammi = gam2 + mu * gam1;
    (gam1, gam2, gampl, gammi)
}

/// Returns `(K_μ(x), K_{μ+1}(x))` for `|μ| ≤ 1/2`.
fn k_pair(mu: f64, x: f64) -> Result<(f64, f64)> {
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    if x < SERIES_CROSSOVER {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < 1e-15 {
            1.0
        } else {
            pimu / pimu.sin()
        };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < 1e-15 { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        let mut done = false;
        for i in 1..=MAX_ITER {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            let del1 = c * (p - fi * ff);
            sum1 += del1;
            if del.abs() < sum.abs() * EPS {
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Numerical(format!(
                "Temme series for K at x={x} did not converge"
            )));
        }
        Ok((sum, sum1 * 2.0 * xi))
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut c = a1;
        let mut q = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut done = false;
        for i in 2..=MAX_ITER {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Numerical(format!(
                "continued fraction for K at x={x} did not converge"
            )));
        }
        let h = a1 * h;
        let kmu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        let k1 = kmu * (mu + x + 0.5 - h) * xi;
        Ok((kmu, k1))
    }
}

/// Modified Bessel function of the second kind `K_ν(x)` for `ν ≥ 0`, `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("bessel_k requires x > 0, got {x}")));
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::Domain(format!(
            "bessel_k requires a finite order >= 0, got {nu}"
        )));
    }
    let steps = (nu + 0.5).floor() as usize;
    let mu = nu - steps as f64;
    let (mut k_lo, mut k_hi) = k_pair(mu, x)?;
    let two_over_x = 2.0 / x;
    for i in 1..=steps {
        let next = (mu + i as f64) * two_over_x * k_hi + k_lo;
        k_lo = k_hi;
        k_hi = next;
    }
    Ok(k_lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn temme_gammas_match_known_values() {
        let (gam1, gam2, gampl, gammi) = temme_gammas(0.0);
        assert!((gam1 + 0.577_215_664_901_532_9).abs() < 1e-15);
        assert!((gam2 - 1.0).abs() < 1e-15);
        assert_eq!(gampl, gammi);
        // 1/Γ(1.5) = 2/√π, 1/Γ(0.5) = 1/√π
        let (_, _, gampl, gammi) = temme_gammas(0.5);
        assert!(rel(gampl, 2.0 / PI.sqrt()) < 1e-14);
        assert!(rel(gammi, 1.0 / PI.sqrt()) < 1e-14);
    }

    #[test]
    fn half_integer_closed_forms() {
        let k_half = |x: f64| (PI / (2.0 * x)).sqrt() * (-x).exp();
        for &x in &[1e-6, 0.01, 0.5, 1.0, 1.999, 2.0, 3.7, 20.0, 50.0] {
            assert!(rel(bessel_k(0.5, x).unwrap(), k_half(x)) < 1e-10, "x={x}");
            let k32 = k_half(x) * (1.0 + 1.0 / x);
            assert!(rel(bessel_k(1.5, x).unwrap(), k32) < 1e-10, "x={x}");
            let k52 = k_half(x) * (1.0 + 3.0 / x + 3.0 / (x * x));
            assert!(rel(bessel_k(2.5, x).unwrap(), k52) < 1e-10, "x={x}");
        }
        assert!((bessel_k(0.5, 1.0).unwrap() - 0.461_068_504).abs() < 1e-9);
    }

    #[test]
    fn known_integer_order_values() {
        // Abramowitz & Stegun table 9.8
        assert!(rel(bessel_k(0.0, 1.0).unwrap(), 0.421_024_438_240_708_3) < 1e-12);
        assert!(rel(bessel_k(1.0, 1.0).unwrap(), 0.601_907_230_197_234_6) < 1e-12);
        assert!(rel(bessel_k(1.0, 2.0).unwrap(), 0.139_865_881_816_522_4) < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(bessel_k(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(1.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(-1.0, 1.0), Err(Error::Domain(_))));
    }
}
