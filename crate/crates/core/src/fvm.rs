//! Cell-centered finite-volume Laplacian with Dirichlet or Neumann faces,
//! a plain Gauss-Seidel solver, and discrete Green's-function utilities.
//!
//! The assembled system is `L u = f − b`, where `L` is the discrete
//! Laplacian (negative diagonal) and `b` collects the boundary-face
//! contributions. Per cell:
//!
//! ```text
//! (Σ_nbr u_nbr − (n_nbr + 2 n_dirichlet) u_c) / h² = f_c − 2 Σ_D g / h² − Σ_N g / h
//! ```

use crate::domain::{BoundarySet, Domain, SourceField};
use crate::error::{BenoError, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BcKind {
    #[default]
    Dirichlet,
    Neumann,
}

impl BcKind {
    pub fn name(self) -> &'static str {
        match self {
            BcKind::Dirichlet => "dirichlet",
            BcKind::Neumann => "neumann",
        }
    }

    pub fn parse(s: &str) -> Result<BcKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BcKind::Dirichlet),
            "neumann" => Ok(BcKind::Neumann),
            other => Err(BenoError::Parse(format!("unknown boundary kind {other:?}"))),
        }
    }
}

/// Matrix-free discrete Laplacian over the interior cells.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    pub h: f64,
    pub bc: BcKind,
    nbr_offsets: Vec<usize>,
    nbrs: Vec<usize>,
    /// Integer diagonal magnitude before dividing by `h²`.
    diag: Vec<u32>,
    /// `b` in `L u = f − b`.
    pub rhs_boundary: Vec<f64>,
}

impl LinearOperator {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn neighbors(&self, c: usize) -> &[usize] {
        &self.nbrs[self.nbr_offsets[c]..self.nbr_offsets[c + 1]]
    }

    /// Integer stencil of row `c`: diagonal magnitude and the off-diagonal
    /// magnitudes (all 1), in units of `1/h²`.
    pub fn integer_row(&self, c: usize) -> (u32, Vec<u32>) {
        (self.diag[c], vec![1; self.neighbors(c).len()])
    }

    /// All-Neumann operators annihilate constants.
    pub fn is_singular(&self) -> bool {
        self.bc == BcKind::Neumann
    }

    /// `L u`
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let inv_h2 = 1.0 / (self.h * self.h);
        (0..self.len())
            .map(|c| {
                let s: f64 = self.neighbors(c).iter().map(|&k| u[k]).sum();
                (s - self.diag[c] as f64 * u[c]) * inv_h2
            })
            .collect()
    }

    /// Right-hand side `f − b` for a source field.
    pub fn rhs(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(&self.rhs_boundary).map(|(f, b)| f - b).collect()
    }

    pub fn residual_norm(&self, u: &[f64], rhs: &[f64]) -> f64 {
        self.apply(u)
            .iter()
            .zip(rhs)
            .map(|(a, r)| (a - r) * (a - r))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn assemble_operator(domain: &Domain, bc: BcKind, boundary: &BoundarySet) -> Result<LinearOperator> {
    let n = domain.len();
    if boundary.len() != domain.boundary.len() || boundary.g.len() != boundary.len() {
        return Err(BenoError::ShapeMismatch(format!(
            "{} boundary values for {} interfaces",
            boundary.g.len(),
            domain.boundary.len()
        )));
    }
    let h = domain.h;
    let mut nbr_offsets = Vec::with_capacity(n + 1);
    let mut nbrs = Vec::with_capacity(4 * n);
    let mut diag = Vec::with_capacity(n);
    nbr_offsets.push(0);
    for &(i, j) in &domain.cells {
        let (i, j) = (i as isize, j as isize);
        let mut count = 0u32;
        // fixed W, E, S, N order
        for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            if let Some(k) = domain.cell_at(i + di, j + dj) {
                nbrs.push(k);
                count += 1;
            }
        }
        nbr_offsets.push(nbrs.len());
        diag.push(count);
    }
    let mut rhs_boundary = vec![0.0; n];
    for (face, &g) in boundary.interfaces.iter().zip(&boundary.g) {
        match bc {
            BcKind::Dirichlet => {
                diag[face.cell] += 2;
                rhs_boundary[face.cell] += 2.0 * g / (h * h);
            }
            BcKind::Neumann => {
                rhs_boundary[face.cell] += g / h;
            }
        }
    }
    Ok(LinearOperator {
        h,
        bc,
        nbr_offsets,
        nbrs,
        diag,
        rhs_boundary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// Relative residual after each sweep (entry 0 is the initial guess).
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Over-relaxation factor; 1.0 is plain Gauss-Seidel.
    pub omega: f64,
}

impl SolverOptions {
    pub fn for_grid(base_n: usize, tol: f64) -> SolverOptions {
        SolverOptions {
            tol,
            max_iter: 200 * base_n * base_n,
            omega: 1.0,
        }
    }
}

fn project_mean_zero(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// In-place lexicographic Gauss-Seidel sweeps from a zero initial guess.
///
/// Stops when the relative residual `‖L u − rhs‖ / ‖rhs‖` drops to `tol`
/// (absolute residual when `rhs = 0`). Singular (all-Neumann) systems are
/// solved in the mean-zero subspace.
pub fn gauss_seidel(op: &LinearOperator, rhs: &[f64], opts: SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    if rhs.len() != op.len() {
        return Err(BenoError::ShapeMismatch(format!(
            "rhs has {} entries, operator has {} rows",
            rhs.len(),
            op.len()
        )));
    }
    if opts.tol <= 0.0 || !opts.tol.is_finite() {
        return Err(BenoError::InvalidParameter(format!("tolerance {} must be positive", opts.tol)));
    }
    let mut rhs = rhs.to_vec();
    if op.is_singular() {
        project_mean_zero(&mut rhs);
    }
    let rhs_norm = rhs.iter().map(|r| r * r).sum::<f64>().sqrt();
    let scale = if rhs_norm > 0.0 { rhs_norm } else { 1.0 };
    let h2 = op.h * op.h;
    let mut u = vec![0.0; op.len()];
    let mut residual = op.residual_norm(&u, &rhs) / scale;
    let mut history = vec![residual];
    let mut iterations = 0;
    while residual > opts.tol && iterations < opts.max_iter {
        for c in 0..op.len() {
            let s: f64 = op.neighbors(c).iter().map(|&k| u[k]).sum();
            let gs = (s - h2 * rhs[c]) / op.diag[c] as f64;
            u[c] = if opts.omega == 1.0 {
                gs
            } else {
                (1.0 - opts.omega) * u[c] + opts.omega * gs
            };
        }
        if op.is_singular() {
            project_mean_zero(&mut u);
        }
        iterations += 1;
        residual = op.residual_norm(&u, &rhs) / scale;
        history.push(residual);
        if !residual.is_finite() {
            return Err(BenoError::NonFinite("gauss_seidel".into()));
        }
    }
    let report = SolveReport {
        iterations,
        final_residual: residual,
        converged: residual <= opts.tol,
        residual_history: history,
    };
    Ok((u, report))
}

/// One solved (or unsolved) boundary-value instance. Boundary values live
/// in `domain.boundary.g`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSample {
    pub domain: Domain,
    pub f: SourceField,
    pub u: Vec<f64>,
    pub bc: BcKind,
    pub report: Option<SolveReport>,
}

impl SolutionSample {
    pub fn g(&self) -> &[f64] {
        &self.domain.boundary.g
    }

    pub fn is_solved(&self) -> bool {
        self.u.iter().all(|v| v.is_finite())
    }

    /// Sample with the NaN sentinel in place of a solution.
    pub fn unsolved(domain: Domain, f: SourceField, bc: BcKind) -> SolutionSample {
        let u = vec![f64::NAN; domain.len()];
        SolutionSample {
            domain,
            f,
            u,
            bc,
            report: None,
        }
    }
}

pub fn solve_poisson(domain: &Domain, f: &SourceField, boundary: &BoundarySet, bc: BcKind, tol: f64) -> Result<SolutionSample> {
    if f.values.len() != domain.len() {
        return Err(BenoError::ShapeMismatch(format!(
            "source has {} values for {} cells",
            f.values.len(),
            domain.len()
        )));
    }
    let op = assemble_operator(domain, bc, boundary)?;
    let rhs = op.rhs(&f.values);
    let (u, report) = gauss_seidel(&op, &rhs, SolverOptions::for_grid(domain.base_n, tol))?;
    if !report.converged {
        return Err(BenoError::NotConverged {
            iterations: report.iterations,
            residual: report.final_residual,
        });
    }
    Ok(SolutionSample {
        domain: domain.with_boundary_values(boundary.g.clone())?,
        f: f.clone(),
        u,
        bc,
        report: Some(report),
    })
}

/// Column `j` of the discrete Green's function: solves `L col = e_j / h²`
/// with homogeneous Dirichlet faces.
pub fn discrete_green_column(domain: &Domain, j: usize, tol: f64) -> Result<Vec<f64>> {
    if j >= domain.len() {
        return Err(BenoError::InvalidParameter(format!(
            "cell index {j} out of range for {} cells",
            domain.len()
        )));
    }
    let zero = domain.boundary.with_values(vec![0.0; domain.boundary.len()])?;
    let op = assemble_operator(domain, BcKind::Dirichlet, &zero)?;
    let mut rhs = vec![0.0; domain.len()];
    rhs[j] = 1.0 / (domain.h * domain.h);
    let (col, report) = gauss_seidel(&op, &rhs, SolverOptions::for_grid(domain.base_n, tol))?;
    if !report.converged {
        return Err(BenoError::NotConverged {
            iterations: report.iterations,
            residual: report.final_residual,
        });
    }
    Ok(col)
}

/// Full discrete Green's matrix, column-major (`cols[j][i] = G[i, j]`).
pub fn discrete_green_matrix(domain: &Domain, tol: f64) -> Result<Vec<Vec<f64>>> {
    (0..domain.len()).map(|j| discrete_green_column(domain, j, tol)).collect()
}

/// Solution assembled from Green's columns: an area term over the source
/// plus a boundary term from the Dirichlet face contributions.
pub fn green_reconstruction(domain: &Domain, green: &[Vec<f64>], f: &[f64], boundary: &BoundarySet) -> Result<Vec<f64>> {
    let op = assemble_operator(domain, BcKind::Dirichlet, boundary)?;
    let h2 = domain.h * domain.h;
    let mut u = vec![0.0; domain.len()];
    for (j, col) in green.iter().enumerate() {
        let area = f[j] * h2;
        let bnd = -op.rhs_boundary[j] * h2;
        for (ui, gij) in u.iter_mut().zip(col) {
            *ui += gij * (area + bnd);
        }
    }
    Ok(u)
}

pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Relative ℓ2 norm of `solve(f, g) − solve(f, 0) − solve(0, g)`.
pub fn superposition_check(domain: &Domain, f: &SourceField, boundary: &BoundarySet, tol: f64) -> Result<f64> {
    let zero_g = boundary.with_values(vec![0.0; boundary.len()])?;
    let zero_f = SourceField::zeros(domain);
    let full = solve_poisson(domain, f, boundary, BcKind::Dirichlet, tol)?;
    let interior = solve_poisson(domain, f, &zero_g, BcKind::Dirichlet, tol)?;
    let edge = solve_poisson(domain, &zero_f, boundary, BcKind::Dirichlet, tol)?;
    let defect: Vec<f64> = (0..domain.len())
        .map(|i| full.u[i] - interior.u[i] - edge.u[i])
        .collect();
    let num = defect.iter().map(|d| d * d).sum::<f64>().sqrt();
    let den = full.u.iter().map(|d| d * d).sum::<f64>().sqrt();
    Ok(if den > 0.0 { num / den } else { num })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenCheckReport {
    pub superposition_defects: Vec<f64>,
    pub symmetry_defect: f64,
    pub reconstruction_error: f64,
}

impl GreenCheckReport {
    pub fn max_superposition(&self) -> f64 {
        self.superposition_defects.iter().cloned().fold(0.0, f64::max)
    }
}

/// Superposition over random domains plus Green symmetry and reconstruction
/// on the uncut `base_n` grid.
pub fn green_check_suite(base_n: usize, trials: usize, seed: u64, tol: f64) -> Result<GreenCheckReport> {
    use crate::domain::{derive_seed, generate_domain, sample_boundary_values, sample_source};

    let mut superposition_defects = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let d = generate_domain(base_n.max(8), (t % 5) as usize, derive_seed(seed, 3 * t))?;
        let f = sample_source(&d, derive_seed(seed, 3 * t + 1));
        let g = sample_boundary_values(&d.boundary, derive_seed(seed, 3 * t + 2), false);
        superposition_defects.push(superposition_check(&d, &f, &g, tol)?);
    }

    let square = Domain::square(base_n)?;
    let green = discrete_green_matrix(&square, tol)?;
    let mut sym_num = 0.0f64;
    let mut sym_den = 0.0f64;
    for i in 0..square.len() {
        for j in 0..square.len() {
            sym_num = sym_num.max((green[j][i] - green[i][j]).abs());
            sym_den = sym_den.max(green[j][i].abs());
        }
    }
    let f = sample_source(&square, derive_seed(seed, u64::MAX - 1));
    let g = sample_boundary_values(&square.boundary, derive_seed(seed, u64::MAX), false);
    let direct = solve_poisson(&square, &f, &g, BcKind::Dirichlet, tol)?;
    let rebuilt = green_reconstruction(&square, &green, &f.values, &g)?;
    Ok(GreenCheckReport {
        superposition_defects,
        symmetry_defect: sym_num / sym_den,
        reconstruction_error: relative_l2(&rebuilt, &direct.u),
    })
}
