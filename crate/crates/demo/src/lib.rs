//! wasm-bindgen bindings for the static page in `www/`.

use beno_core::domain::{generate_domain, sample_boundary_values, sample_source, Domain};
use beno_core::fvm::{discrete_green_column, solve_poisson, BcKind, SolutionSample, DEFAULT_TOL};
use beno_core::graph::union_edges;
use beno_core::io::render_panels;
use wasm_bindgen::prelude::*;

fn js_err(e: beno_core::BenoError) -> JsError {
    JsError::new(&format!("{}: {e}", e.code()))
}

/// A solved random sample plus its rendering scale.
#[wasm_bindgen]
pub struct Workbench {
    sample: SolutionSample,
    ppc: u32,
    width: u32,
    height: u32,
}

#[wasm_bindgen]
impl Workbench {
    /// Generates a domain with `corners` cut corners, random f and g, and
    /// solves it.
    #[wasm_bindgen(constructor)]
    pub fn new(base_n: usize, corners: usize, seed: u64, neumann: bool, ppc: u32) -> Result<Workbench, JsError> {
        let domain = generate_domain(base_n, corners, seed).map_err(js_err)?;
        let f = sample_source(&domain, seed.wrapping_add(1));
        let g = sample_boundary_values(&domain.boundary, seed.wrapping_add(2), false);
        let bc = if neumann { BcKind::Neumann } else { BcKind::Dirichlet };
        let sample = solve_poisson(&domain, &f, &g, bc, DEFAULT_TOL).map_err(js_err)?;
        let probe = render_panels(&sample.domain, &[&sample.u], ppc.max(1)).map_err(js_err)?;
        Ok(Workbench {
            sample,
            ppc: ppc.max(1),
            width: probe.width,
            height: probe.height,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> u32 {
        self.height
    }

    /// One-line description of the solve.
    pub fn summary(&self) -> String {
        let d = &self.sample.domain;
        let (lo, hi) = min_max(&self.sample.u);
        let report = match &self.sample.report {
            Some(r) => format!("{} sweeps, residual {:.2e}", r.iterations, r.final_residual),
            None => "unsolved".to_string(),
        };
        format!(
            "{} cells, {} boundary faces, {} cut corners, {}; u in [{lo:.3}, {hi:.3}]",
            d.len(),
            d.boundary.len(),
            d.corner_count(),
            report
        )
    }

    /// RGBA heatmap of the solution (`width × height`).
    pub fn solution_rgba(&self) -> Result<Vec<u8>, JsError> {
        self.render(&self.sample.u)
    }

    /// RGBA heatmap of the discrete Green's function column for the cell
    /// under image pixel (`px`, `py`); `None` outside the domain.
    pub fn green_rgba(&self, px: u32, py: u32) -> Result<Option<Vec<u8>>, JsError> {
        let Some(j) = self.cell_under(px, py) else {
            return Ok(None);
        };
        let column = discrete_green_column(&self.sample.domain, j, DEFAULT_TOL).map_err(js_err)?;
        self.render(&column).map(Some)
    }

    /// Graph edges as flat `[x0, y0, x1, y1, ...]` in image pixels.
    pub fn graph_segments(&self, k: usize) -> Result<Vec<f64>, JsError> {
        let d = &self.sample.domain;
        let edges = union_edges(&d.centers, k).map_err(js_err)?;
        let side = (d.base_n as u32 * self.ppc) as f64;
        let to_px = |p: [f64; 2]| [p[0] * side, (1.0 - p[1]) * side];
        let mut out = Vec::with_capacity(edges.len() * 4);
        for (a, b) in edges {
            // undirected pairs appear twice
            if a < b {
                out.extend(to_px(d.centers[a]));
                out.extend(to_px(d.centers[b]));
            }
        }
        Ok(out)
    }
}

impl Workbench {
    fn render(&self, values: &[f64]) -> Result<Vec<u8>, JsError> {
        Ok(render_panels(&self.sample.domain, &[values], self.ppc).map_err(js_err)?.rgba)
    }

    fn cell_under(&self, px: u32, py: u32) -> Option<usize> {
        let d: &Domain = &self.sample.domain;
        let n = d.base_n as u32;
        let (i, row) = (px / self.ppc, py / self.ppc);
        if i >= n || row >= n {
            return None;
        }
        d.cell_at(i as isize, (n - 1 - row) as isize)
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_click_and_overlay() {
        let w = Workbench::new(16, 4, 3, false, 8).unwrap();
        assert_eq!(w.solution_rgba().unwrap().len(), (w.width * w.height * 4) as usize);
        assert!(w.summary().contains("4 cut corners"));
        let center = 8 * 8;
        assert!(w.green_rgba(center, center).unwrap().is_some());
        assert!(w.green_rgba(0, 0).unwrap().is_none() || w.sample.domain.cuts[3] == 0);
        assert!(w.green_rgba(10_000, 0).unwrap().is_none());
        let seg = w.graph_segments(8).unwrap();
        assert!(!seg.is_empty() && seg.len().is_multiple_of(4));
        assert!(seg.iter().all(|&c| (0.0..=128.0).contains(&c)));
    }
}
