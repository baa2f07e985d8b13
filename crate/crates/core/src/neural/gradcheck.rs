//! Central finite-difference checks of [`Network::backward`].

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Inputs, NetConfig, Network, Role, ACTION_DIM};
use crate::error::Result;

/// Result for one parameter group (or `"action"` for the critic's input).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCheck {
    pub name: String,
    pub analytic_norm: f64,
    /// `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖)`, zero when both vanish.
    pub rel_error: f64,
}

/// Random images in [0, 1], corner features in [−1, 1], step fraction in
/// [0, 1] and actions in [0, 1].
pub fn random_inputs(cfg: &NetConfig, batch: usize, with_actions: bool, seed: u64) -> Inputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = Array2::from_shape_fn((batch, cfg.image_len()), |_| rng.gen::<f64>());
    let ed = cfg.extra_dim();
    let extras = Array2::from_shape_fn((batch, ed), |(_, j)| {
        if j + 1 == ed {
            rng.gen::<f64>()
        } else {
            rng.gen_range(-1.0..1.0)
        }
    });
    let actions = with_actions.then(|| Array2::from_shape_fn((batch, ACTION_DIM), |_| rng.gen::<f64>()));
    Inputs { images, extras, actions }
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// `L = Σ w ⊙ output`, so `∂L/∂output = w`.
fn weighted(net: &Network, inp: &Inputs, w: &Array2<f64>) -> Result<f64> {
    let (y, _) = net.forward(inp)?;
    Ok((&y * w).sum())
}

/// Compares backprop against central differences with step `eps` for every
/// parameter group, plus the action input of a critic.
pub fn check_network(net: &Network, inp: &Inputs, eps: f64, seed: u64) -> Result<Vec<GroupCheck>> {
    let (y, tape) = net.forward(inp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array2::from_shape_fn(y.raw_dim(), |_| rng.gen_range(-1.0..1.0));
    let (grad, d_action) = net.backward(&tape, &w)?;

    let mut probe = net.clone();
    let mut out = Vec::new();
    for g in net.param_groups() {
        let mut fd = Vec::with_capacity(g.range.len());
        for i in g.range.clone() {
            let p = net.params[i];
            probe.params[i] = p + eps;
            let hi = weighted(&probe, inp, &w)?;
            probe.params[i] = p - eps;
            let lo = weighted(&probe, inp, &w)?;
            probe.params[i] = p;
            fd.push((hi - lo) / (2.0 * eps));
        }
        let an = &grad[g.range.clone()];
        out.push(GroupCheck {
            name: g.name,
            analytic_norm: an.iter().map(|x| x * x).sum::<f64>().sqrt(),
            rel_error: rel_error(an, &fd),
        });
    }
    if net.role() == Role::Critic {
        let da = d_action.expect("critic returns action gradient");
        let acts = inp.actions.clone().expect("critic inputs carry actions");
        let mut fd = Vec::new();
        for idx in ndarray::indices(acts.raw_dim()) {
            let mut a = acts.clone();
            a[idx] += eps;
            let hi = weighted(net, &inp.with_actions(a.clone()), &w)?;
            a[idx] -= 2.0 * eps;
            let lo = weighted(net, &inp.with_actions(a), &w)?;
            fd.push((hi - lo) / (2.0 * eps));
        }
        let an: Vec<f64> = da.iter().copied().collect();
        out.push(GroupCheck {
            name: "action".into(),
            analytic_norm: an.iter().map(|x| x * x).sum::<f64>().sqrt(),
            rel_error: rel_error(&an, &fd),
        });
    }
    Ok(out)
}

/// Gradient checks of a freshly initialised actor and critic on random
/// inputs.
pub fn check_config(cfg: &NetConfig, batch: usize, eps: f64) -> Result<Vec<(Role, GroupCheck)>> {
    let mut out = Vec::new();
    for (k, role) in [Role::Actor, Role::Critic].into_iter().enumerate() {
        let net = Network::new(cfg, role)?;
        let inp = random_inputs(cfg, batch, role == Role::Critic, cfg.seed ^ (k as u64 + 11));
        out.extend(check_network(&net, &inp, eps, cfg.seed + k as u64)?.into_iter().map(|g| (role, g)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn miniature_gradients_match_finite_differences() {
        let checks = check_config(&NetConfig::miniature(), 3, 1e-4).unwrap();
        // 5 layers x (weight, bias) per network, plus the critic's action.
        assert_eq!(checks.len(), 21);
        for (role, g) in &checks {
            assert!(g.analytic_norm > 0.0, "{role:?} {} has zero gradient", g.name);
            assert!(g.rel_error < 1e-3, "{role:?} {}: {}", g.name, g.rel_error);
        }
    }
}
