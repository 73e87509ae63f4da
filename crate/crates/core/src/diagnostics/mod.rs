//! Localized virial, interaction Morawetz and Strichartz-norm diagnostics.

mod morawetz;
mod quadrature;
mod virial;

pub use morawetz::{
    auto_stride, build_morawetz_kernel, build_morawetz_kernel_strided, log_trapezoid,
    morawetz_bound, morawetz_m, morawetz_mr, r_ladder, MorawetzKernel, PhiTable,
};
pub use quadrature::gauss_legendre;
pub use virial::{build_virial_weight, virial, virial_dt, virial_dtt, VirialProfile, VirialWeight};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::radial::{lp_integral, Field};

/// Records ordered by strictly increasing time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<R> {
    entries: Vec<(f64, R)>,
}

impl<R> Default for TimeSeries<R> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
        }
    }
}

impl<R> TimeSeries<R> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, r: R) -> Result<()> {
        if let Some((last, _)) = self.entries.last() {
            if !(t > *last) {
                return invalid(format!("time {t} does not follow {last}"));
            }
        }
        self.entries.push((t, r));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, (f64, R)> {
        self.entries.iter()
    }

    pub fn first(&self) -> Option<&(f64, R)> {
        self.entries.first()
    }

    pub fn last(&self) -> Option<&(f64, R)> {
        self.entries.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|(t, _)| *t).collect()
    }

    pub fn into_entries(self) -> Vec<(f64, R)> {
        self.entries
    }
}

impl<R> std::ops::Index<usize> for TimeSeries<R> {
    type Output = (f64, R);
    fn index(&self, i: usize) -> &Self::Output {
        &self.entries[i]
    }
}

/// Running space-time integrals `∫‖u‖⁶_{L⁶}`, `∫‖u‖⁴_{L⁴}`, `∫‖u‖³_{L³}` dt.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StrichartzAccumulator {
    pub t_a: f64,
    pub t_b: f64,
    pub l6: f64,
    pub l4: f64,
    pub l3: f64,
}

/// Finalized norms; `W₁ ∩ W₂` is reported as the pair `(w1, w2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrichartzNorms {
    /// `L⁶_t L⁶_x`
    pub w1: f64,
    /// `L⁴_t L⁴_x`
    pub w2: f64,
    /// `L³_t L³_x`
    pub v0: f64,
}

impl StrichartzAccumulator {
    pub fn starting_at(t_a: f64) -> Self {
        Self {
            t_a,
            t_b: t_a,
            ..Default::default()
        }
    }

    pub fn finish(&self) -> StrichartzNorms {
        StrichartzNorms {
            w1: self.l6.powf(1.0 / 6.0),
            w2: self.l4.powf(0.25),
            v0: self.l3.powf(1.0 / 3.0),
        }
    }
}

/// Left-endpoint update over a window of length `dt`.
pub fn strichartz_update(
    acc: StrichartzAccumulator,
    u: &Field,
    dt: f64,
) -> Result<StrichartzAccumulator> {
    if !(dt > 0.0) {
        return invalid(format!("dt must be positive, got {dt}"));
    }
    if u.is_zero() {
        return Ok(StrichartzAccumulator {
            t_b: acc.t_b + dt,
            ..acc
        });
    }
    Ok(StrichartzAccumulator {
        t_a: acc.t_a,
        t_b: acc.t_b + dt,
        l6: acc.l6 + dt * lp_integral(u, 6.0),
        l4: acc.l4 + dt * lp_integral(u, 4.0),
        l3: acc.l3 + dt * lp_integral(u, 3.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialGrid;

    #[test]
    fn series_is_strictly_increasing() {
        let mut ts = TimeSeries::new();
        ts.push(0.0, 1).unwrap();
        ts.push(0.5, 2).unwrap();
        assert!(ts.push(0.5, 3).is_err());
        assert!(ts.push(0.1, 3).is_err());
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.times(), vec![0.0, 0.5]);
    }

    #[test]
    fn strichartz_examples() {
        let g = RadialGrid::new(10.0, 1000).unwrap();
        let z = Field::zeros(g);
        let acc = strichartz_update(StrichartzAccumulator::default(), &z, 0.1).unwrap();
        assert_eq!((acc.l6, acc.l4, acc.l3), (0.0, 0.0, 0.0));

        let u = Field::from_real_fn(g, |r| (-0.5 * r * r).exp());
        let mut acc = StrichartzAccumulator::starting_at(0.0);
        let mut prev = acc;
        for _ in 0..10 {
            acc = strichartz_update(acc, &u, 0.25).unwrap();
            assert!(acc.l6 >= prev.l6 && acc.l4 >= prev.l4 && acc.l3 >= prev.l3);
            prev = acc;
        }
        let w1 = acc.finish().w1;
        let expect = 2.5f64.powf(1.0 / 6.0) * lp_integral(&u, 6.0).powf(1.0 / 6.0);
        assert!((w1 / expect - 1.0).abs() < 1e-12);
        assert!(strichartz_update(acc, &u, 0.0).is_err());
    }
}
