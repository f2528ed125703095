use super::graph::{Graph, Var};
use super::tensor::ParamSet;
use crate::error::{Error, Result};

/// Outcome of a central-difference comparison.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
}

fn evaluate<F>(f: &mut F, params: &ParamSet) -> Result<f64>
where
    F: FnMut(&mut Graph, &ParamSet) -> Result<Var>,
{
    let mut g = Graph::new();
    let loss = f(&mut g, params)?;
    Ok(g.scalar(loss))
}

/// Compare the analytic gradient of `f` against central differences for
/// every entry of every `requires_grad` tensor in `params`.
///
/// The relative error of an entry is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
/// `f` must build its loss in the graph it is given (evaluation mode, so no
/// dropout). Existing gradient buffers in `params` are overwritten.
pub fn check_gradients<F>(mut f: F, params: &mut ParamSet, epsilon: f64) -> Result<GradCheckReport>
where
    F: FnMut(&mut Graph, &ParamSet) -> Result<Var>,
{
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    params.zero_grad();
    let mut g = Graph::new();
    let loss = f(&mut g, params)?;
    let first = g.scalar(loss);
    g.backward(loss, params)?;
    drop(g);

    let second = evaluate(&mut f, params)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        entries_checked: 0,
    };
    for p in 0..params.len() {
        if !params.by_index(p).requires_grad {
            continue;
        }
        let analytic = params.by_index(p).grad.clone().unwrap_or_default();
        for j in 0..params.by_index(p).len() {
            let orig = params.by_index(p).data()[j];
            params.by_index_mut(p).data_mut()[j] = orig + epsilon;
            let up = evaluate(&mut f, params);
            params.by_index_mut(p).data_mut()[j] = orig - epsilon;
            let down = evaluate(&mut f, params);
            params.by_index_mut(p).data_mut()[j] = orig;
            let numeric = (up? - down?) / (2.0 * epsilon);
            let a = analytic[j];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.entries_checked += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((params.name_of(p).to_string(), j));
            }
        }
    }
    Ok(report)
}
