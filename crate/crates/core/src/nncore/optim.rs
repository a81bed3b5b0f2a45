use super::ParamStore;

/// One SGD-with-momentum update over every parameter in the store:
/// `v ← μ·v − η·g`, `θ ← θ + v`, `g ← 0`.
///
/// Bumps the store generation.
pub fn sgd_momentum_step(store: &mut ParamStore, lr: f64, momentum: f64) {
    for p in store.params_mut() {
        let value = p.value.data_mut();
        let vel = p.velocity.data_mut();
        let grad = p.grad.data_mut();
        for ((v, m), g) in value.iter_mut().zip(vel.iter_mut()).zip(grad.iter_mut()) {
            *m = momentum * *m - lr * *g;
            *v += *m;
            *g = 0.0;
        }
    }
    store.bump_generation();
}
