use super::params::ParamStore;

/// Compares analytic gradients against central differences on every
/// parameter coordinate and returns the worst relative error
/// `|a - n| / max(1e-8, |a| + |n|)`.
///
/// `loss_fn` must zero and repopulate the gradient buffers and return the
/// loss; it is called once for the analytic pass and twice per coordinate.
pub fn grad_check<F>(mut loss_fn: F, params: &mut ParamStore<f64>, h: f64) -> f64
where
    F: FnMut(&mut ParamStore<f64>) -> f64,
{
    loss_fn(params);
    let analytic: Vec<(String, Vec<f64>)> = params
        .iter()
        .map(|(n, p)| (n.to_string(), p.grad.data().to_vec()))
        .collect();
    let mut worst = 0.0f64;
    for (name, grads) in analytic {
        for (i, &a) in grads.iter().enumerate() {
            let orig = params.get(&name).expect("present").data()[i];
            set(params, &name, i, orig + h);
            let up = loss_fn(params);
            set(params, &name, i, orig - h);
            let down = loss_fn(params);
            set(params, &name, i, orig);
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    loss_fn(params);
    worst
}

fn set(params: &mut ParamStore<f64>, name: &str, i: usize, v: f64) {
    params.param_mut(name).expect("present").value.data_mut()[i] = v;
}
