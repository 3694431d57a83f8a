//! Central-difference gradient verification.

use super::graph::Tensor;
use super::params::{Ctx, ParamStore};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Compare reverse-mode gradients of a scalar loss against central finite
/// differences, coordinate by coordinate, over every parameter the forward
/// pass touches. Returns the largest relative error, with a `1e-8`
/// denominator floor.
///
/// `build` must construct the same computation on every call for a given
/// store state.
pub fn grad_check(
    store: &mut ParamStore,
    h: f64,
    build: impl Fn(&mut Ctx) -> Tensor,
) -> f64 {
    let analytic: Vec<(String, Vec<f64>)> = {
        let mut ctx = Ctx::new(store, true);
        let loss = build(&mut ctx);
        assert_eq!(loss.numel(), 1, "grad_check requires a scalar loss");
        loss.backward();
        ctx.grads()
    };

    let mut max_rel: f64 = 0.0;
    for (name, grad) in &analytic {
        for i in 0..grad.len() {
            let orig = store.get(name).unwrap().data[i];
            store.get_mut(name).unwrap().data[i] = orig + h;
            let f_plus = eval_scalar(store, &build);
            store.get_mut(name).unwrap().data[i] = orig - h;
            let f_minus = eval_scalar(store, &build);
            store.get_mut(name).unwrap().data[i] = orig;

            let fd = (f_plus - f_minus) / (2.0 * h);
            let rel = relative_error(grad[i], fd);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}

fn eval_scalar(store: &mut ParamStore, build: &impl Fn(&mut Ctx) -> Tensor) -> f64 {
    let mut ctx = Ctx::new(store, false);
    build(&mut ctx).value()[0]
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(1e-8, f64::max(a.abs(), b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers;
    use crate::nn::params::Init;

    #[test]
    fn quadratic_gradient_is_exact() {
        // f(theta) = theta^2 at theta = 3: analytic and FD both give 6.
        let mut store = ParamStore::new(0);
        store.insert("theta", vec![1], vec![3.0]);
        let err = grad_check(&mut store, DEFAULT_STEP, |ctx| {
            let t = ctx.param("theta", &[1], Init::Zeros);
            t.mul(&t).sum_all()
        });
        assert!(err < 1e-9, "err = {err}");
    }

    #[test]
    fn layer_norm_gradients_verify() {
        let mut store = ParamStore::new(21);
        store.insert("x", vec![3, 5], (0..15).map(|i| (i as f64) * 0.37 - 2.0).collect());
        let err = grad_check(&mut store, DEFAULT_STEP, |ctx| {
            let x = ctx.param("x", &[3, 5], Init::Zeros);
            let y = layers::layer_norm(ctx, "ln", &x);
            // weight the outputs so the gradient is not trivially uniform
            let w = ctx.constant(&[3, 5], (0..15).map(|i| ((i % 4) as f64) - 1.5).collect());
            y.mul(&w).sum_all()
        });
        assert!(err <= 1e-3, "layer_norm grad check failed: {err}");
    }

    #[test]
    fn transformer_layer_gradients_verify() {
        let cfg = layers::LayerCfg::new(4, 2);
        let mut store = ParamStore::new(33);
        store.insert("x", vec![3, 4], (0..12).map(|i| (i as f64) * 0.21 - 1.1).collect());
        let err = grad_check(&mut store, DEFAULT_STEP, |ctx| {
            let x = ctx.param("x", &[3, 4], Init::Zeros);
            let y = layers::transformer_layer(ctx, "t", &x, cfg);
            let w = ctx.constant(&[3, 4], (0..12).map(|i| ((i % 3) as f64) * 0.5 - 0.4).collect());
            y.mul(&w).sum_all()
        });
        assert!(err <= 1e-3, "transformer grad check failed: {err}");
    }

    #[test]
    fn softmax_cross_entropy_gradients_verify() {
        let mut store = ParamStore::new(4);
        store.insert("logits", vec![5], vec![0.3, -1.2, 0.8, 2.0, -0.5]);
        let err = grad_check(&mut store, DEFAULT_STEP, |ctx| {
            let l = ctx.param("logits", &[5], Init::Zeros);
            l.cross_entropy(3)
        });
        assert!(err <= 1e-6, "cross entropy grad check failed: {err}");
    }
}
