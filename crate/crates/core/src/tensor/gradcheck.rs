use rand::seq::index;
use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// Gradients below this magnitude are compared on an absolute scale.
const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateError {
    pub group: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct FiniteDiffReport {
    /// Worst probed coordinate of each parameter group, in group order.
    pub worst: Vec<CoordinateError>,
    pub probes: usize,
    pub epsilon: f64,
}

impl FiniteDiffReport {
    pub fn max_error(&self) -> f64 {
        self.worst.iter().map(|c| c.error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.worst.iter().all(|c| c.error < tolerance)
    }
}

pub(crate) fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares analytic gradients against central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` on sampled coordinates of every group.
///
/// `loss_and_grads` maps a full parameter set to the loss and its gradient
/// per group. Groups with at most `probes_per_group` coordinates are probed
/// exhaustively.
pub fn finite_diff_check<F, R>(
    mut loss_and_grads: F,
    groups: &[(String, Tensor<f64>)],
    probes_per_group: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<FiniteDiffReport>
where
    F: FnMut(&[Tensor<f64>]) -> Result<(f64, Vec<Tensor<f64>>)>,
    R: Rng + ?Sized,
{
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mut params: Vec<Tensor<f64>> = groups.iter().map(|(_, t)| t.clone()).collect();
    let (base, analytic) = loss_and_grads(&params)?;
    if !base.is_finite() {
        return Err(Error::NonFinite {
            op: "finite_diff_check",
        });
    }
    if analytic.len() != params.len() {
        return Err(Error::shape(
            "finite_diff_check",
            &[params.len()],
            &[analytic.len()],
        ));
    }

    let mut worst = Vec::with_capacity(groups.len());
    let mut probes = 0;
    for (g, (name, _)) in groups.iter().enumerate() {
        let len = params[g].len();
        let coords: Vec<usize> = if len <= probes_per_group {
            (0..len).collect()
        } else {
            let mut picked = index::sample(rng, len, probes_per_group).into_vec();
            picked.sort_unstable();
            picked
        };
        let mut group_worst: Option<CoordinateError> = None;
        for idx in coords {
            let original = params[g].data()[idx];
            params[g].data_mut()[idx] = original + epsilon;
            let (plus, _) = loss_and_grads(&params)?;
            params[g].data_mut()[idx] = original - epsilon;
            let (minus, _) = loss_and_grads(&params)?;
            params[g].data_mut()[idx] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite {
                    op: "finite_diff_check",
                });
            }
            probes += 1;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[g].data()[idx];
            let error = relative_error(a, numeric);
            if group_worst.as_ref().is_none_or(|w| error > w.error) {
                group_worst = Some(CoordinateError {
                    group: name.clone(),
                    index: idx,
                    analytic: a,
                    numeric,
                    error,
                });
            }
        }
        if let Some(w) = group_worst {
            worst.push(w);
        }
    }
    Ok(FiniteDiffReport {
        worst,
        probes,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Tape, Unary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_check(kind: Option<Unary>, at: f64) -> FiniteDiffReport {
        let groups = vec![("x".to_string(), Tensor::scalar(at))];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        finite_diff_check(
            |p| {
                let mut tape = Tape::new();
                let x = tape.param(p[0].clone());
                let y = match kind {
                    Some(k) => tape.unary(k, x)?,
                    None => tape.mul(x, x)?,
                };
                let g = tape.backward(y)?;
                Ok((tape.value(y).data()[0], vec![g.wrt(x)]))
            },
            &groups,
            8,
            1e-5,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn square_at_three() {
        let report = scalar_check(None, 3.0);
        let w = &report.worst[0];
        assert_eq!(w.analytic, 6.0);
        assert!((w.numeric - 6.0).abs() < 1e-8);
        assert!(report.max_error() < 1e-8);
    }

    #[test]
    fn sigmoid_at_zero() {
        let report = scalar_check(Some(Unary::Sigmoid), 0.0);
        let w = &report.worst[0];
        assert_eq!(w.analytic, 0.25);
        assert!((w.numeric - 0.25).abs() < 1e-8);
        assert!(report.max_error() < 1e-8);
    }

    #[test]
    fn tanh_and_exp_adjoints() {
        assert!(scalar_check(Some(Unary::Tanh), 0.3).max_error() < 1e-8);
        assert!(scalar_check(Some(Unary::Exp), -0.7).max_error() < 1e-8);
        assert!(scalar_check(Some(Unary::LeakyRelu(0.2)), -0.7).max_error() < 1e-8);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let groups = vec![("x".to_string(), Tensor::scalar(2.0))];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report = finite_diff_check(
            |p| {
                let x = p[0].data()[0];
                Ok((x * x, vec![Tensor::scalar(2.1 * x)]))
            },
            &groups,
            1,
            1e-5,
            &mut rng,
        )
        .unwrap();
        assert!(report.max_error() > 1e-2);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let groups = vec![("x".to_string(), Tensor::scalar(0.0))];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = finite_diff_check(
            |_| Ok((f64::NAN, vec![Tensor::scalar(0.0)])),
            &groups,
            1,
            1e-5,
            &mut rng,
        );
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn samples_when_group_is_large() {
        let groups = vec![("w".to_string(), Tensor::filled(10, 10, 0.5))];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let report = finite_diff_check(
            |p| {
                let mut tape = Tape::new();
                let w = tape.param(p[0].clone());
                let sq = tape.mul(w, w)?;
                let s = tape.sum_all(sq)?;
                let g = tape.backward(s)?;
                Ok((tape.value(s).data()[0], vec![g.wrt(w)]))
            },
            &groups,
            7,
            1e-5,
            &mut rng,
        )
        .unwrap();
        assert_eq!(report.probes, 7);
        assert!(report.passes(1e-8));
    }
}
