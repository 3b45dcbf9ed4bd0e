use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use crate::error::Result;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(flat index, analytic, numeric)` per probe.
    pub probes: Vec<(usize, f64, f64)>,
}

/// Compares the reverse-mode gradient of `f` against central differences at
/// `probe_count` random flat indices (without replacement when possible).
///
/// `f(store)` returns the scalar value and the flat gradient. The relative
/// error of a probe uses the denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(store: &mut ParamStore, probe_count: usize, eps: f64, seed: u64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(f64, Vec<f64>)>,
{
    let (_, analytic) = f(store)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = store.len();
    let mut picks: Vec<usize> = if probe_count >= n {
        (0..n).collect()
    } else {
        rand::seq::index::sample(&mut rng, n, probe_count).into_vec()
    };
    picks.sort_unstable();
    let mut probes = Vec::with_capacity(picks.len());
    let mut max_rel = 0.0f64;
    for &k in &picks {
        let orig = store.values()[k];
        store.values_mut()[k] = orig + eps;
        let (plus, _) = f(store)?;
        store.values_mut()[k] = orig - eps;
        let (minus, _) = f(store)?;
        store.values_mut()[k] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
        probes.push((k, a, numeric));
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        probes,
    })
}
