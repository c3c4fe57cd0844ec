use super::graph::{Graph, Var};
use super::param::{ParamGrads, ParamId, ParamStore};
use super::Tensor;
use crate::error::{Error, Result};
use crate::par;

/// Outcome of comparing autodiff gradients with central differences.
#[derive(Debug, Clone)]
pub struct GradCheck {
    /// max over entries of `|analytic − numeric| / max(1, |analytic|)`
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub analytic: ParamGrads,
    pub numeric: ParamGrads,
}

/// Builds the loss graph once for autodiff and `2 · #scalars` more times for
/// central differences with step `h`.
pub fn gradient_check<F>(store: &ParamStore, h: f64, loss_fn: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var> + Sync,
{
    let mut g = Graph::new();
    let loss = loss_fn(&mut g, store)?;
    let first = g.value(loss).item();
    let analytic = g.backward(loss)?.params();

    let mut g2 = Graph::new();
    let l2 = loss_fn(&mut g2, store)?;
    let second = g2.value(l2).item();
    if first.to_bits() != second.to_bits() {
        return Err(Error::Nondeterministic { first, second });
    }

    let numeric = numeric_gradient(store, h, &loss_fn)?;
    let (max_rel_error, worst) = compare_gradients(store, &analytic, &numeric);
    Ok(GradCheck {
        max_rel_error,
        worst,
        analytic,
        numeric,
    })
}

/// Central-difference gradient of every parameter entry.
pub fn numeric_gradient<F>(store: &ParamStore, h: f64, loss_fn: &F) -> Result<ParamGrads>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var> + Sync,
{
    if !(h > 0.0) {
        return Err(Error::invalid(format!("finite-difference step {h} must be positive")));
    }
    let probes: Vec<(ParamId, usize)> = store
        .ids()
        .flat_map(|id| (0..store.value(id).len()).map(move |i| (id, i)))
        .collect();
    let eval = |id: ParamId, i: usize, delta: f64| -> Result<f64> {
        let mut s = store.clone();
        s.value_mut(id).data_mut()[i] += delta;
        let mut g = Graph::new();
        let l = loss_fn(&mut g, &s)?;
        Ok(g.value(l).item())
    };
    let diffs = par::map_slice(&probes, |&(id, i)| -> Result<f64> {
        Ok((eval(id, i, h)? - eval(id, i, -h)?) / (2.0 * h))
    });
    let mut out = ParamGrads::new();
    for id in store.ids() {
        out.insert(id, Tensor::zeros(store.value(id).shape()));
    }
    for (&(id, i), d) in probes.iter().zip(diffs) {
        out.get_mut(&id).expect("inserted above").data_mut()[i] = d?;
    }
    Ok(out)
}

/// Parameters missing from `analytic` count as zero gradients.
pub fn compare_gradients(
    store: &ParamStore,
    analytic: &ParamGrads,
    numeric: &ParamGrads,
) -> (f64, Option<(String, usize)>) {
    let mut worst = (0.0, None);
    for (id, n) in numeric {
        let zeros;
        let a = match analytic.get(id) {
            Some(a) => a,
            None => {
                zeros = Tensor::zeros(n.shape());
                &zeros
            }
        };
        for (i, (&av, &nv)) in a.data().iter().zip(n.data()).enumerate() {
            let err = (av - nv).abs() / av.abs().max(1.0);
            if err > worst.0 || worst.1.is_none() {
                worst = (err, Some((store.name(*id).to_string(), i)));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Mlp, MlpSpec, OutputActivation};
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn quadratic_loss_is_exact() {
        let mut store = ParamStore::new();
        store
            .insert("theta", Tensor::matrix(2, 3, vec![0.5, -1.5, 2.0, 3.0, 0.1, -0.7]))
            .unwrap();
        let report = gradient_check(&store, 1e-5, |g, s| {
            let p = g.param(s, s.id("theta").unwrap())?;
            let sq = g.square(p)?;
            let l = g.sum(sq)?;
            g.scale(l, 0.5)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-7, "{}", report.max_rel_error);
        let id = store.id("theta").unwrap();
        assert_eq!(report.analytic[&id], *store.value(id));
    }

    #[test]
    fn mlp_mean_squared_loss() {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(
            &mut store,
            "net",
            MlpSpec::new(vec![4, 6, 5, 3], Activation::Gelu, OutputActivation::Identity),
            3,
        )
        .unwrap();
        let x = Tensor::matrix(8, 4, (0..32).map(|i| (i as f64 * 0.61).sin()).collect());
        let y = Tensor::matrix(8, 3, (0..24).map(|i| (i as f64 * 0.29).cos()).collect());
        let report = gradient_check(&store, 1e-5, |g, s| {
            let xv = g.input(x.clone())?;
            let yv = g.input(y.clone())?;
            let out = mlp.forward(g, s, xv)?;
            let d = g.sub(out, yv)?;
            let sq = g.square(d)?;
            let l = g.sum(sq)?;
            g.scale(l, 1.0 / 8.0)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{}", report.max_rel_error);
    }

    #[test]
    fn doubled_gradient_is_flagged() {
        let mut store = ParamStore::new();
        store
            .insert("theta", Tensor::matrix(1, 3, vec![2.0, -3.0, 4.0]))
            .unwrap();
        let f = |g: &mut Graph, s: &ParamStore| {
            let p = g.param(s, s.id("theta").unwrap())?;
            let sq = g.square(p)?;
            let l = g.sum(sq)?;
            g.scale(l, 0.5)
        };
        let report = gradient_check(&store, 1e-5, f).unwrap();
        let doubled: ParamGrads = report
            .analytic
            .iter()
            .map(|(k, v)| (*k, v.map(|x| 2.0 * x)))
            .collect();
        let (err, _) = compare_gradients(&store, &doubled, &report.numeric);
        assert!((err - 0.5).abs() < 1e-6, "{err}");
    }

    #[test]
    fn nondeterministic_loss_is_an_error() {
        let mut store = ParamStore::new();
        store.insert("theta", Tensor::zeros(&[1, 1])).unwrap();
        let calls = AtomicUsize::new(0);
        let res = gradient_check(&store, 1e-5, |g, s| {
            let c = calls.fetch_add(1, Ordering::SeqCst) as f64;
            let p = g.param(s, s.id("theta").unwrap())?;
            let k = g.input(Tensor::scalar(c))?;
            let y = g.add(p, k)?;
            g.sum(y)
        });
        assert!(matches!(res, Err(Error::Nondeterministic { .. })));
    }
}
