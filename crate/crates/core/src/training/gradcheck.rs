//! Finite-difference probes used to verify analytic gradients.

use crate::model::ParamStore;

/// Central difference of `f` along parameter `i` with step `h`. Restores
/// the parameter afterwards.
pub fn central_fd<F>(f: &mut F, params: &mut ParamStore, i: usize, h: f64) -> f64
where
    F: FnMut(&ParamStore) -> f64,
{
    let orig = params.values[i];
    params.values[i] = orig + h;
    let fp = f(params);
    params.values[i] = orig - h;
    let fm = f(params);
    params.values[i] = orig;
    (fp - fm) / (2.0 * h)
}

/// Richardson-extrapolated central difference: combines steps h and h/2 to
/// cancel the quadratic truncation term, which matters where the loss has
/// strong curvature (batch norm with small batches).
pub fn richardson_fd<F>(mut f: F, params: &mut ParamStore, i: usize, h: f64) -> f64
where
    F: FnMut(&ParamStore) -> f64,
{
    let d1 = central_fd(&mut f, params, i, h);
    let d2 = central_fd(&mut f, params, i, h / 2.0);
    (4.0 * d2 - d1) / 3.0
}

/// Default step ladder for piecewise-smooth networks.
pub const FD_STEPS: [f64; 4] = [3e-5, 1e-5, 3e-6, 1e-6];

/// Central differences over a ladder of shrinking steps, returning the
/// estimate where two successive steps agree best. ReLU and max-pool kinks
/// sitting inside a large probe radius ruin that step but not the smaller
/// ones; a genuinely wrong analytic gradient disagrees at every step.
pub fn fd_best<F>(mut f: F, params: &mut ParamStore, i: usize, steps: &[f64]) -> f64
where
    F: FnMut(&ParamStore) -> f64,
{
    assert!(steps.len() >= 2);
    let ests: Vec<f64> = steps
        .iter()
        .map(|&h| central_fd(&mut f, params, i, h))
        .collect();
    let mut best = *ests.last().unwrap();
    let mut best_gap = f64::INFINITY;
    for k in 0..ests.len() - 1 {
        let gap = (ests[k] - ests[k + 1]).abs();
        if gap < best_gap {
            best_gap = gap;
            best = ests[k + 1];
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_polynomial_derivatives() {
        // f(x) = x^3 at x = 2: plain central diff has h^2 error, the
        // extrapolated version is exact to roundoff.
        let mut params = ParamStore::zeros(1);
        params.values[0] = 2.0;
        let f = |p: &ParamStore| p.values[0].powi(3);
        let d = richardson_fd(f, &mut params, 0, 1e-3);
        assert!((d - 12.0).abs() < 1e-10, "{d}");
        assert_eq!(params.values[0], 2.0);
    }

    #[test]
    fn ladder_steps_past_a_nearby_kink() {
        // f(x) = relu(x - x0)·3 + x² with the kink 2e-5 away from the probe
        // point: wide steps straddle it, the narrow ones recover f'(x0-2e-5).
        let x0 = 0.5;
        let mut params = ParamStore::zeros(1);
        params.values[0] = x0 - 2e-5;
        let f = |p: &ParamStore| 3.0 * (p.values[0] - x0).max(0.0) + p.values[0] * p.values[0];
        let want = 2.0 * (x0 - 2e-5);
        let wide = central_fd(&mut f.clone(), &mut params, 0, 3e-5);
        assert!((wide - want).abs() > 0.1, "kink not straddled: {wide}");
        let d = fd_best(f, &mut params, 0, &FD_STEPS);
        assert!((d - want).abs() < 1e-8, "{d} vs {want}");
    }
}
