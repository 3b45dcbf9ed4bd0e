//! Seeded generation of solved samples.

use crate::domain::{derive_seed, generate_domain, sample_boundary_values, sample_source};
use crate::error::Result;
use crate::fvm::{solve_poisson, BcKind, SolutionSample, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub corners: usize,
    pub base_n: usize,
    pub count: usize,
    pub seed: u64,
    /// `g ≡ 0`.
    pub homogeneous: bool,
    pub bc: BcKind,
    pub tol: f64,
}

impl DatasetSpec {
    pub fn new(corners: usize, base_n: usize, count: usize, seed: u64) -> DatasetSpec {
        DatasetSpec {
            corners,
            base_n,
            count,
            seed,
            homogeneous: false,
            bc: BcKind::Dirichlet,
            tol: DEFAULT_TOL,
        }
    }

    /// Sample `index`, independent of `count`: domain, source and boundary
    /// values each draw from their own stream of the per-sample seed.
    pub fn sample(&self, index: usize) -> Result<SolutionSample> {
        let s = derive_seed(self.seed, index as u64);
        let domain = generate_domain(self.base_n, self.corners, derive_seed(s, 0))?;
        let f = sample_source(&domain, derive_seed(s, 1));
        let g = sample_boundary_values(&domain.boundary, derive_seed(s, 2), self.homogeneous);
        solve_poisson(&domain, &f, &g, self.bc, self.tol)
    }

    pub fn generate(&self) -> Result<Vec<SolutionSample>> {
        (0..self.count).map(|i| self.sample(i)).collect()
    }
}
