use crate::error::{LabError, Result};
use crate::radial::{integrate_unchecked, radial_derivative, Field, RadialGrid};

/// Value on `[3, ∞)`: fixed by also matching the fifth derivative at 1.
pub const PLATEAU: f64 = 13.0 / 3.0;

// ϕ(1 + t) on [0, 2]
const C6: f64 = -21.0 / 16.0;
const C7: f64 = 11.0 / 8.0;
const C8: f64 = -65.0 / 128.0;
const C9: f64 = 25.0 / 384.0;

/// The profile `ϕ`: `ρ²` on `[0,1]`, constant `13/3` on `[3,∞)`, and on
/// `[1,3]` the degree-9 polynomial
/// `1 + 2t + t² - (21/16)t⁶ + (11/8)t⁷ - (65/128)t⁸ + (25/384)t⁹`, `t = ρ-1`,
/// which matches `ρ²` to fifth order at 1 and is flat to fourth order at 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VirialProfile;

impl VirialProfile {
    /// `[ϕ, ϕ', ϕ'', ϕ''', ϕ'''']` at `ρ`.
    pub fn derivatives(&self, rho: f64) -> [f64; 5] {
        if rho <= 1.0 {
            [rho * rho, 2.0 * rho, 2.0, 0.0, 0.0]
        } else if rho >= 3.0 {
            [PLATEAU, 0.0, 0.0, 0.0, 0.0]
        } else {
            let t = rho - 1.0;
            let t2 = t * t;
            let t3 = t2 * t;
            let t4 = t3 * t;
            let t5 = t4 * t;
            let t6 = t5 * t;
            let v = 1.0 + 2.0 * t + t2 + t6 * (C6 + t * (C7 + t * (C8 + t * C9)));
            let d1 =
                2.0 + 2.0 * t + t5 * (6.0 * C6 + t * (7.0 * C7 + t * (8.0 * C8 + t * 9.0 * C9)));
            let d2 = 2.0 + t4 * (30.0 * C6 + t * (42.0 * C7 + t * (56.0 * C8 + t * 72.0 * C9)));
            let d3 = t3 * (120.0 * C6 + t * (210.0 * C7 + t * (336.0 * C8 + t * 504.0 * C9)));
            let d4 = t2 * (360.0 * C6 + t * (840.0 * C7 + t * (1680.0 * C8 + t * 3024.0 * C9)));
            [v, d1, d2, d3, d4]
        }
    }

    /// `sup |ϕ''|`, sampled on a fine mesh of the transition.
    pub fn c_phi(&self) -> f64 {
        (0..=20_000)
            .map(|k| self.derivatives(1.0 + 2.0 * k as f64 / 20_000.0)[2].abs())
            .fold(2.0, f64::max)
    }
}

/// `ϕ_R(r) = R²ϕ(r/R)` and the radial derivative tables the virial
/// identities need, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VirialWeight {
    pub radius: f64,
    pub grid: RadialGrid,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
    /// `Δϕ_R = ϕ_R'' + 3ϕ_R'/r`
    pub lap: Vec<f64>,
    /// `Δ²ϕ_R = ϕ'''' + 6ϕ'''/r + 3ϕ''/r² - 3ϕ'/r³`
    pub bilap: Vec<f64>,
    /// `sup |ϕ''|`
    pub c_phi: f64,
}

pub fn build_virial_weight(grid: RadialGrid, radius: f64) -> Result<VirialWeight> {
    if !(radius >= 1.0 && radius.is_finite()) {
        return Err(LabError::InvalidArgument(format!(
            "virial radius must be >= 1, got {radius}"
        )));
    }
    if 3.0 * radius > grid.r_max() {
        return Err(LabError::DomainTooSmall(format!(
            "virial radius {radius} needs r_max >= {}, grid has {}",
            3.0 * radius,
            grid.r_max()
        )));
    }
    let prof = VirialProfile;
    let len = grid.len();
    let (mut phi, mut dphi, mut d2phi, mut lap, mut bilap) = (
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    );
    for i in 0..len {
        let r = grid.r(i);
        let rho = r / radius;
        let [v, d1, d2, d3, d4] = prof.derivatives(rho);
        let f1 = radius * d1;
        let f2 = d2;
        let f3 = d3 / radius;
        let f4 = d4 / (radius * radius);
        phi.push(radius * radius * v);
        dphi.push(f1);
        d2phi.push(f2);
        if rho <= 1.0 {
            lap.push(8.0);
            bilap.push(0.0);
        } else {
            lap.push(f2 + 3.0 * f1 / r);
            bilap.push(f4 + 6.0 * f3 / r + 3.0 * f2 / (r * r) - 3.0 * f1 / (r * r * r));
        }
    }
    Ok(VirialWeight {
        radius,
        grid,
        phi,
        dphi,
        d2phi,
        lap,
        bilap,
        c_phi: prof.c_phi(),
    })
}

/// `V_R = ∫ϕ_R|u|²`.
pub fn virial(u: &Field, w: &VirialWeight) -> Result<f64> {
    w.grid.check_compatible(u.grid())?;
    Ok(integrate_unchecked(
        u.grid(),
        u.values().iter().zip(&w.phi).map(|(z, p)| p * z.norm_sqr()),
    ))
}

/// `∂_t V_R = 2∫Im(ū u_r) ϕ_R'`.
pub fn virial_dt(u: &Field, w: &VirialWeight) -> Result<f64> {
    w.grid.check_compatible(u.grid())?;
    let du = radial_derivative(u);
    Ok(2.0
        * integrate_unchecked(
            u.grid(),
            u.values()
                .iter()
                .zip(du.values())
                .zip(&w.dphi)
                .map(|((z, d), p)| (z.conj() * d).im * p),
        ))
}

/// `∂²_t V_R = 4∫ϕ_R''|u_r|² - ∫[Δ²ϕ_R|u|² + Δϕ_R(|u|⁴ - (4/5)|u|^{10/3})]`.
pub fn virial_dtt(u: &Field, w: &VirialWeight) -> Result<f64> {
    w.grid.check_compatible(u.grid())?;
    let du = radial_derivative(u);
    Ok(integrate_unchecked(
        u.grid(),
        (0..u.grid().len()).map(|i| {
            let a2 = u.values()[i].norm_sqr();
            let hess = 4.0 * w.d2phi[i] * du.values()[i].norm_sqr();
            let pot = w.bilap[i] * a2 + w.lap[i] * (a2 * a2 - 0.8 * a2.powf(5.0 / 3.0));
            hess - pot
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{grad_sq, lp_integral};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    const PI2: f64 = PI * PI;

    #[test]
    fn profile_matching_conditions() {
        let p = VirialProfile;
        let at1 = p.derivatives(1.0 + 1e-12);
        let exact = [1.0, 2.0, 2.0, 0.0, 0.0];
        for k in 0..5 {
            assert!((at1[k] - exact[k]).abs() < 1e-9, "{k} {at1:?}");
        }
        let at3 = p.derivatives(3.0 - 1e-12);
        assert!((at3[0] - PLATEAU).abs() < 1e-9);
        for (k, v) in at3.iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-8, "{k} {v}");
        }
        // analytic derivatives agree with differencing
        for k in 1..40 {
            let rho = 1.0 + k as f64 / 20.0;
            let d = p.derivatives(rho);
            for j in 0..4 {
                let fd = (p.derivatives(rho + 1e-6)[j] - p.derivatives(rho - 1e-6)[j]) / 2e-6;
                assert!(
                    (fd - d[j + 1]).abs() < 1e-5 * (1.0 + d[j + 1].abs()),
                    "{rho} {j}"
                );
            }
        }
        let mut prev = 0.0;
        for k in 0..=3000 {
            let v = p.derivatives(k as f64 / 1000.0)[0];
            assert!(v >= prev);
            prev = v;
        }
        let c = p.c_phi();
        assert!(c > 4.0 && c < 4.1, "{c}");
    }

    #[test]
    fn weight_examples() {
        let g = RadialGrid::new(30.0, 3000).unwrap();
        let w = build_virial_weight(g, 1.0).unwrap();
        let i = g.index_floor(0.5);
        assert!((w.phi[i] - 0.25).abs() < 1e-14 && (w.dphi[i] - 1.0).abs() < 1e-14);
        let j = g.index_floor(4.0);
        assert_eq!((w.dphi[j], w.d2phi[j]), (0.0, 0.0));
        assert_eq!(w.lap[0], 8.0);
        assert!(build_virial_weight(g, 11.0).is_err());
        assert!(matches!(
            build_virial_weight(g, 11.0),
            Err(LabError::DomainTooSmall(_))
        ));
        assert!(build_virial_weight(g, 0.5).is_err());
    }

    #[test]
    fn virial_values_for_gaussian() {
        let g = RadialGrid::new(30.0, 3000).unwrap();
        let u = Field::from_real_fn(g, |r| (-0.5 * r * r).exp());
        let wide = build_virial_weight(g, 10.0).unwrap();
        let v = virial(&u, &wide).unwrap();
        assert!((v / (2.0 * PI2) - 1.0).abs() < 1e-8, "{v}");
        let narrow = build_virial_weight(g, 1.0).unwrap();
        assert!(virial(&u, &narrow).unwrap() < v);
        assert_eq!(virial_dt(&u, &wide).unwrap(), 0.0);
        let vtt = virial_dtt(&u, &wide).unwrap();
        let expect =
            8.0 * grad_sq(&u) - 8.0 * lp_integral(&u, 4.0) + 6.4 * lp_integral(&u, 10.0 / 3.0);
        assert!((vtt / expect - 1.0).abs() < 1e-4, "{vtt} {expect}");
        assert!((vtt / (16.304 * PI2) - 1.0).abs() < 1e-4, "{vtt}");
        assert_eq!(virial_dtt(&Field::zeros(g), &wide).unwrap(), 0.0);
    }

    #[test]
    fn outgoing_chirp_has_positive_flux() {
        let g = RadialGrid::new(30.0, 3000).unwrap();
        let u = Field::from_fn(g, |r| Complex64::from_polar((-0.5 * r * r).exp(), r));
        let w = build_virial_weight(g, 2.0).unwrap();
        assert!(virial_dt(&u, &w).unwrap() > 0.0);
    }

    #[test]
    fn bilaplacian_matches_differenced_laplacian() {
        let g = RadialGrid::new(30.0, 30000).unwrap();
        let w = build_virial_weight(g, 2.0).unwrap();
        let h = g.h();
        for r in [2.3, 3.1, 4.0, 4.9, 5.7] {
            let i = g.index_floor(r);
            let ri = g.r(i);
            let d2 = (w.lap[i + 1] - 2.0 * w.lap[i] + w.lap[i - 1]) / (h * h);
            let d1 = (w.lap[i + 1] - w.lap[i - 1]) / (2.0 * h);
            let fd = d2 + 3.0 * d1 / ri;
            assert!(
                (fd - w.bilap[i]).abs() < 1e-4 * (1.0 + w.bilap[i].abs()),
                "{r}"
            );
        }
    }
}
