//! Seeded random fields and scaling pairs shared by `verify` and the tests.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::functionals::{
    lambda_derivative_residual, lambda_second_derivative_residual, ScalingPair,
};
use crate::radial::{Field, RadialGrid};

pub const SUITE_SEED: u64 = 0x5eed_cafe;

/// Grid fine enough that the O(h²) floor of the discrete identities sits
/// well below the checked tolerances.
pub fn suite_grid() -> RadialGrid {
    RadialGrid::new(12.0, 48_000).expect("suite grid")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One term `a(1 + c r²) e^{-r²/w²} e^{i p r²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub a: f64,
    pub c: f64,
    pub w: f64,
    pub p: f64,
}

/// Sum of one to three bumps; smooth, even in `r`, decaying.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothField {
    pub terms: Vec<Bump>,
}

impl SmoothField {
    pub fn random(rng: &mut impl Rng, complex: bool) -> Self {
        let k = rng.gen_range(1..=3);
        let terms = (0..k)
            .map(|_| Bump {
                a: rng.gen_range(-1.0..1.0),
                c: rng.gen_range(0.0..3.0),
                w: rng.gen_range(0.5..2.0),
                p: if complex {
                    rng.gen_range(-1.0..1.0)
                } else {
                    0.0
                },
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, r: f64) -> Complex64 {
        let r2 = r * r;
        self.terms
            .iter()
            .map(|b| {
                Complex64::from_polar(b.a * (1.0 + b.c * r2) * (-r2 / (b.w * b.w)).exp(), b.p * r2)
            })
            .sum()
    }

    pub fn sample(&self, grid: RadialGrid) -> Field {
        Field::from_fn(grid, |r| self.eval(r))
    }
}

/// Uniform direction in the admissible cone.
pub fn random_unit_pair(rng: &mut impl Rng) -> ScalingPair {
    loop {
        let th: f64 = rng.gen_range(-PI..PI);
        let p = ScalingPair::new(th.cos(), th.sin());
        if p.in_omega() {
            return p;
        }
    }
}

pub const H_FIRST: f64 = 1e-4;
pub const H_SECOND: f64 = 5e-4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LambdaSuite {
    pub cases: usize,
    pub worst_first: f64,
    pub worst_second: f64,
}

/// Worst residuals of both scaling identities over `fields × pairs` cases.
pub fn lambda_suite(seed: u64, fields: usize, pairs: usize) -> Result<LambdaSuite> {
    let mut rng = rng(seed);
    let grid = suite_grid();
    let mut out = LambdaSuite::default();
    for _ in 0..fields {
        let u = SmoothField::random(&mut rng, true).sample(grid);
        for _ in 0..pairs {
            let p = random_unit_pair(&mut rng);
            out.worst_first = out
                .worst_first
                .max(lambda_derivative_residual(&u, p, H_FIRST)?);
            out.worst_second = out
                .worst_second
                .max(lambda_second_derivative_residual(&u, p, H_SECOND)?);
            out.cases += 1;
        }
    }
    Ok(out)
}
