//! C⁴ transition functions built from the degree-9 smoothstep.

/// `S(t) = 126t⁵ - 420t⁶ + 540t⁷ - 315t⁸ + 70t⁹` on `[0,1]`, clamped outside.
/// The first four derivatives vanish at both ends.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let t5 = t * t * t * t * t;
        t5 * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + 70.0 * t))))
    }
}

/// `S'(t) = 630 t⁴ (1-t)⁴`.
pub fn smoothstep_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let s = t * (1.0 - t);
        630.0 * s * s * s * s
    }
}

/// Radial bump: 1 on `[0,1]`, 0 on `[2,∞)`.
pub fn bump(rho: f64) -> f64 {
    1.0 - smoothstep(rho - 1.0)
}

pub fn bump_deriv(rho: f64) -> f64 {
    -smoothstep_deriv(rho - 1.0)
}
