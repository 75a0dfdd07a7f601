use super::SparseFunctionalSample;
use crate::error::{FdaError, Result};
use crate::kernelsmooth::{Curve, Surface};

fn scale_at(mean: &Curve, autocov: &Surface, t: f64) -> Result<(f64, f64)> {
    let v = autocov.eval(t, t);
    if !(v > 0.0) {
        return Err(FdaError::DegenerateVariance { at: t });
    }
    Ok((mean.eval(t), v.sqrt()))
}

/// Standardize each observation as `(y − μ(t)) / √C(t,t)`, with `μ` and the
/// covariance diagonal linearly interpolated from the fitted grid.
pub fn normalize_sample(
    sample: &SparseFunctionalSample,
    mean: &Curve,
    autocov: &Surface,
) -> Result<SparseFunctionalSample> {
    let mut out = sample.clone();
    for obs in out.subjects.values_mut() {
        for o in obs.iter_mut() {
            let (m, sd) = scale_at(mean, autocov, o.time)?;
            o.value = (o.value - m) / sd;
        }
    }
    Ok(out)
}

/// Inverse of [`normalize_sample`].
pub fn denormalize_sample(
    sample: &SparseFunctionalSample,
    mean: &Curve,
    autocov: &Surface,
) -> Result<SparseFunctionalSample> {
    let mut out = sample.clone();
    for obs in out.subjects.values_mut() {
        for o in obs.iter_mut() {
            let (m, sd) = scale_at(mean, autocov, o.time)?;
            o.value = o.value * sd + m;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts(mu: f64, var: f64) -> (Curve, Surface) {
        let g = vec![0.0, 6.0, 12.0];
        (
            Curve::new(g.clone(), vec![mu; 3]).unwrap(),
            Surface::from_fn(&g, &g, |_, _| var),
        )
    }

    #[test]
    fn pure_scaling() {
        let s = SparseFunctionalSample::from_lists("X", (0.0, 12.0), vec![("a".into(), vec![3.0], vec![6.0])])
            .unwrap();
        let (m, c) = parts(0.0, 4.0);
        let n = normalize_sample(&s, &m, &c).unwrap();
        assert_eq!(n.subjects[&"a".into()][0].value, 3.0);
        let back = denormalize_sample(&n, &m, &c).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn zero_variance_names_time() {
        let s = SparseFunctionalSample::from_lists("X", (0.0, 12.0), vec![("a".into(), vec![2.5], vec![1.0])])
            .unwrap();
        let (m, c) = parts(0.0, 0.0);
        match normalize_sample(&s, &m, &c) {
            Err(FdaError::DegenerateVariance { at }) => assert_eq!(at, 2.5),
            other => panic!("unexpected {other:?}"),
        }
    }
}
