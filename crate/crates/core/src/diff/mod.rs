//! Minimal differentiable layer: dense tensors, a reverse-mode tape over
//! whole-tensor ops, parameter storage, and a finite-difference checker.

pub mod gradcheck;
pub mod nn;
pub mod params;
pub mod tape;
pub mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use nn::{LayerNorm, Linear, Mlp, SplitLinear};
pub use params::{init_rng, Init, ParamId, ParamSpec, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use std::rc::Rc;

    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng, scale: f64) -> Tensor {
        Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect()).unwrap()
    }

    /// Central-difference check of the gradient with respect to an input tensor.
    fn input_fd<F>(x: &Tensor, eps: f64, f: F) -> (Vec<f64>, Vec<f64>)
    where
        F: Fn(&Tensor) -> (f64, Vec<f64>),
    {
        let (_, analytic) = f(x);
        let mut numeric = Vec::with_capacity(x.len());
        for k in 0..x.len() {
            let mut p = x.clone();
            p.data_mut()[k] += eps;
            let mut m = x.clone();
            m.data_mut()[k] -= eps;
            numeric.push((f(&p).0 - f(&m).0) / (2.0 * eps));
        }
        (analytic, numeric)
    }

    fn max_rel(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    /// Weighted sum `Σ c_k y_k` with fixed pseudo-random weights, as a scalar head.
    fn weighted_sum(tape: &mut Tape, y: Var) -> Var {
        let [r, c] = tape.shape(y);
        let w: Rc<[f64]> = (0..r * c).map(|k| ((k as f64) * 0.7).sin()).collect();
        // mse(y, w) has gradient 2(y - w)/n: nonuniform upstream signal
        tape.mse(y, w).unwrap()
    }

    #[test]
    fn linear_identity_and_constant() {
        let mut rng = init_rng(0);
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, "l", 3, 3, true, &mut rng).unwrap();
        store.value_mut(lin.w).iter_mut().for_each(|v| *v = 0.0);
        store.value_mut(lin.b.unwrap()).copy_from_slice(&[1.5, -2.0, 0.25]);
        let x = Tensor::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        {
            let mut tape = Tape::new(&store);
            let xv = tape.constant(x.clone());
            let y = lin.forward(&mut tape, xv).unwrap();
            for r in 0..2 {
                assert_eq!(tape.value(y).row(r), &[1.5, -2.0, 0.25]);
            }
        }
        let w = store.value_mut(lin.w);
        w.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..3 {
            w[k * 3 + k] = 1.0;
        }
        store.value_mut(lin.b.unwrap()).iter_mut().for_each(|v| *v = 0.0);
        let mut tape = Tape::new(&store);
        let xv = tape.constant(x.clone());
        let y = lin.forward(&mut tape, xv).unwrap();
        assert_eq!(tape.value(y), &x);
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut rng = init_rng(3);
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, "l", 4, 3, true, &mut rng).unwrap();
        store.value_mut(lin.b.unwrap()).iter_mut().for_each(|v| *v = 0.3);
        let x = random_tensor(5, 4, &mut ChaCha8Rng::seed_from_u64(9), 1.0);
        let eval = |s: &ParamStore, x: &Tensor| {
            let mut tape = Tape::new(s);
            let xv = tape.input(x.clone());
            let y = lin.forward(&mut tape, xv).unwrap();
            let l = weighted_sum(&mut tape, y);
            let g = tape.backward(l).unwrap();
            (tape.value(l).get(0, 0), g.params.clone(), g.input(xv).unwrap().to_vec())
        };
        let report = grad_check(&mut store, 100, 1e-6, 1, |s| {
            let (l, g, _) = eval(s, &x);
            Ok((l, g))
        })
        .unwrap();
        assert!(report.max_rel_error <= 1e-6, "{report:?}");
        let (a, n) = input_fd(&x, 1e-6, |x| {
            let (l, _, gx) = eval(&store, x);
            (l, gx)
        });
        assert!(max_rel(&a, &n) <= 1e-6);
    }

    #[test]
    fn silu_values() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::from_rows(&[[0.0, 1.0, 20.0]]));
        let y = tape.silu(x);
        let v = tape.value(y).row(0).to_vec();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((v[1] - 0.731059).abs() < 1e-6);
        // 20 - 20σ(20) = 20e⁻²⁰/(1 + e⁻²⁰) ≈ 4.12e-8
        let gap = 20.0 * (-20.0f64).exp() / (1.0 + (-20.0f64).exp());
        assert!(((20.0 - v[2]) - gap).abs() < 1e-14);
        assert!((v[2] - 20.0).abs() < 5e-8);
    }

    #[test]
    fn softmax_values_and_stability() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::from_rows(&[[0.0, 0.0], [1000.0, 0.0], [-1000.0, 1000.0]]));
        let y = tape.softmax_rows(x);
        let t = tape.value(y);
        assert_eq!(t.row(0), &[0.5, 0.5]);
        assert!((t.get(1, 0) - 1.0).abs() < 1e-12 && t.get(1, 1).abs() < 1e-12);
        assert!(t.is_finite());
        tape.check_finite().unwrap();
    }

    #[test]
    fn elementwise_gradients_match_finite_differences() {
        let x = random_tensor(4, 5, &mut ChaCha8Rng::seed_from_u64(2), 2.0);
        let store = ParamStore::new();
        type Build = fn(&mut Tape, Var) -> Var;
        let cases: [(&str, Build); 3] = [
            ("silu", |t, x| t.silu(x)),
            ("softmax", |t, x| t.softmax_rows(x)),
            ("mean_rows", |t, x| t.mean_rows(x)),
        ];
        for (name, build) in cases {
            let (a, n) = input_fd(&x, 1e-6, |x| {
                let mut tape = Tape::new(&store);
                let xv = tape.input(x.clone());
                let y = build(&mut tape, xv);
                let l = weighted_sum(&mut tape, y);
                let g = tape.backward(l).unwrap();
                (tape.value(l).get(0, 0), g.input(xv).unwrap().to_vec())
            });
            assert!(max_rel(&a, &n) <= 1e-6, "{name}: {}", max_rel(&a, &n));
        }
    }

    #[test]
    fn layer_norm_properties() {
        let mut rng = init_rng(4);
        let mut store = ParamStore::new();
        let ln = LayerNorm::new(&mut store, "ln", 4, &mut rng).unwrap();
        store.value_mut(ln.bias).copy_from_slice(&[0.1, 0.2, 0.3, 0.4]);
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::from_rows(&[[2.0, 2.0, 2.0, 2.0], [1.0, -3.0, 0.5, 7.0]]));
        let y = ln.forward(&mut tape, x).unwrap();
        let t = tape.value(y);
        assert!(t.row(0).iter().zip([0.1, 0.2, 0.3, 0.4]).all(|(a, b)| (a - b).abs() < 1e-12));
        let pre: Vec<f64> = t.row(1).iter().zip([0.1, 0.2, 0.3, 0.4]).map(|(a, b)| a - b).collect();
        let mean = pre.iter().sum::<f64>() / 4.0;
        let var = pre.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn layer_norm_gradients() {
        let mut rng = init_rng(5);
        let mut store = ParamStore::new();
        let ln = LayerNorm::new(&mut store, "ln", 6, &mut rng).unwrap();
        for (k, v) in store.values_mut().iter_mut().enumerate() {
            *v += 0.1 * (k as f64).cos();
        }
        let x = random_tensor(3, 6, &mut ChaCha8Rng::seed_from_u64(8), 1.5);
        let eval = |s: &ParamStore, x: &Tensor| {
            let mut tape = Tape::new(s);
            let xv = tape.input(x.clone());
            let y = ln.forward(&mut tape, xv).unwrap();
            let l = weighted_sum(&mut tape, y);
            let g = tape.backward(l).unwrap();
            (tape.value(l).get(0, 0), g.params.clone(), g.input(xv).unwrap().to_vec())
        };
        let report = grad_check(&mut store, 100, 1e-6, 2, |s| {
            let (l, g, _) = eval(s, &x);
            Ok((l, g))
        })
        .unwrap();
        assert!(report.max_rel_error <= 1e-5, "{report:?}");
        let (a, n) = input_fd(&x, 1e-6, |x| {
            let (l, _, gx) = eval(&store, x);
            (l, gx)
        });
        assert!(max_rel(&a, &n) <= 1e-5, "{}", max_rel(&a, &n));
    }

    #[test]
    fn structural_ops_gradients() {
        // gather / scatter / concat / slice / matmul_t / add_row / sub / scale in one graph
        let x = random_tensor(4, 6, &mut ChaCha8Rng::seed_from_u64(12), 1.0);
        let store = ParamStore::new();
        let idx: Rc<[usize]> = Rc::from(vec![2usize, 0, 3, 3, 1]);
        let (a, n) = input_fd(&x, 1e-6, |x| {
            let mut tape = Tape::new(&store);
            let xv = tape.input(x.clone());
            let left = tape.slice_cols(xv, 0, 3).unwrap();
            let right = tape.slice_cols(xv, 3, 3).unwrap();
            let att = tape.matmul_t(left, right).unwrap();
            let att = tape.scale(att, 0.5);
            let att = tape.softmax_rows(att);
            let mixed = tape.matmul(att, right).unwrap();
            let g = tape.gather(mixed, idx.clone()).unwrap();
            let s = tape.scatter_add(g, idx.clone(), 4).unwrap();
            let cat = tape.concat_cols(&[s, left]).unwrap();
            let row = tape.mean_rows(cat);
            let shifted = tape.add_row(cat, row).unwrap();
            let d = tape.sub(shifted, cat).unwrap();
            let y = tape.add(d, shifted).unwrap();
            let y = tape.silu(y);
            let l = weighted_sum(&mut tape, y);
            let grads = tape.backward(l).unwrap();
            (tape.value(l).get(0, 0), grads.input(xv).unwrap().to_vec())
        });
        assert!(max_rel(&a, &n) <= 1e-6, "{}", max_rel(&a, &n));
    }

    fn linear_chain_loss(store: &ParamStore, layers: &[Linear], x: &Tensor, flip: bool) -> crate::Result<(f64, Vec<f64>)> {
        let mut tape = Tape::new(store);
        let mut h = tape.constant(x.clone());
        for l in layers {
            h = l.forward(&mut tape, h)?;
        }
        // quadratic in any single scalar, so central differences are exact up to rounding
        let n = tape.value(h).len();
        let l = tape.mse(h, Rc::from(vec![0.25; n]))?;
        let g = tape.backward(l)?;
        let mut params = g.params;
        if flip {
            params.iter_mut().for_each(|v| *v = -*v);
        }
        Ok((tape.value(l).get(0, 0), params))
    }

    #[test]
    fn grad_check_on_linear_chain_and_sensitivity() {
        let mut rng = init_rng(21);
        let mut store = ParamStore::new();
        let layers = vec![
            Linear::new(&mut store, "a", 3, 4, true, &mut rng).unwrap(),
            Linear::new(&mut store, "b", 4, 2, true, &mut rng).unwrap(),
        ];
        let x = random_tensor(5, 3, &mut ChaCha8Rng::seed_from_u64(1), 1.0);
        let good = grad_check(&mut store, 20, 1e-6, 4, |s| linear_chain_loss(s, &layers, &x, false)).unwrap();
        assert!(good.max_rel_error <= 1e-8, "{good:?}");
        let bad = grad_check(&mut store, 20, 1e-6, 4, |s| linear_chain_loss(s, &layers, &x, true)).unwrap();
        assert!(bad.max_rel_error >= 0.5);
    }

    #[test]
    fn shape_errors_are_reported() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(2, 3));
        assert!(tape.matmul(a, b).is_err());
        assert!(tape.linear(a, b, None).is_err());
        assert!(tape.gather(a, Rc::from(vec![5usize])).is_err());
        assert!(tape.mse(a, Rc::from(vec![0.0])).is_err());
    }

    #[test]
    fn non_finite_values_poison_the_tape() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let a = tape.constant(Tensor::from_rows(&[[f64::MAX, 1.0]]));
        let b = tape.scale(a, 10.0);
        let l = tape.mse(b, Rc::from(vec![0.0, 0.0])).unwrap();
        assert!(tape.check_finite().is_err());
        assert!(tape.backward(l).is_err());
    }
}
