//! Modified Bessel functions I0 and I1 (Abramowitz & Stegun 9.8.1-9.8.4
//! polynomial approximations), accurate to ~1e-7 relative.

pub fn bessel_i0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 3.75 {
        let y = (x / 3.75).powi(2);
        1.0 + y
            * (3.5156229
                + y * (3.0899424
                    + y * (1.2067492 + y * (0.2659732 + y * (0.360768e-1 + y * 0.45813e-2)))))
    } else {
        let z = 3.75 / ax;
        (ax.exp() / ax.sqrt())
            * (0.39894228
                + z * (0.1328592e-1
                    + z * (0.225319e-2
                        + z * (-0.157565e-2
                            + z * (0.916281e-2
                                + z * (-0.2057706e-1
                                    + z * (0.2635537e-1
                                        + z * (-0.1647633e-1 + z * 0.392377e-2))))))))
    }
}

pub fn bessel_i1(x: f64) -> f64 {
    let ax = x.abs();
    let result = if ax < 3.75 {
        let y = (x / 3.75).powi(2);
        ax * (0.5
            + y * (0.87890594
                + y * (0.51498869
                    + y * (0.15084934 + y * (0.2658733e-1 + y * (0.301532e-2 + y * 0.32411e-3))))))
    } else {
        let z = 3.75 / ax;
        (ax.exp() / ax.sqrt())
            * (0.39894228
                + z * (-0.3988024e-1
                    + z * (-0.362018e-2
                        + z * (0.163801e-2
                            + z * (-0.1031555e-1
                                + z * (0.2282967e-1
                                    + z * (-0.2895312e-1
                                        + z * (0.1787654e-1 + z * (-0.420059e-2)))))))))
    };
    if x < 0.0 {
        -result
    } else {
        result
    }
}

/// Mean resultant length of a von Mises distribution: `A(k) = I1(k)/I0(k)`.
pub fn bessel_ratio(kappa: f64) -> f64 {
    if kappa == 0.0 {
        return 0.0;
    }
    if kappa > 500.0 {
        // Asymptotic expansion; the exp() factors overflow above ~700.
        let k = kappa;
        return 1.0 - 1.0 / (2.0 * k) - 1.0 / (8.0 * k * k) - 1.0 / (8.0 * k * k * k);
    }
    bessel_i1(kappa) / bessel_i0(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_values() {
        // Reference values from standard tables.
        assert_relative_eq!(bessel_i0(0.0), 1.0, max_relative = 1e-7);
        assert_relative_eq!(bessel_i0(1.0), 1.2660658777520084, max_relative = 1e-6);
        assert_relative_eq!(bessel_i1(1.0), 0.5651591039924851, max_relative = 1e-6);
        assert_relative_eq!(bessel_i0(5.0), 27.239871823604442, max_relative = 1e-6);
        assert_relative_eq!(bessel_i1(5.0), 24.335642142450524, max_relative = 1e-6);
    }

    #[test]
    fn ratio_is_monotone_in_kappa() {
        let mut prev = 0.0;
        for i in 1..200 {
            let k = i as f64 * 0.5;
            let r = bessel_ratio(k);
            assert!(r > prev && r < 1.0);
            prev = r;
        }
    }

    #[test]
    fn ratio_continuous_at_asymptotic_switch() {
        let below = bessel_ratio(499.9);
        let above = bessel_ratio(500.1);
        assert!((below - above).abs() < 1e-6);
    }
}
