//! Per-agent feedback gains and the closed-loop matrices they certify.

use crate::matkit::{solve_care, spectral_abscissa, LinalgError, Mat};
use crate::model::{check_observable, AgentPlant, LqrWeights, StateSpace};

use super::{InternalModel, SynthesisError};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentGains {
    pub k1: Mat,
    pub k2: Mat,
    /// Luenberger gain, present for output feedback only.
    pub k3: Option<Mat>,
}

/// Plant augmented with the internal model:
/// `([[A, 0], [G₂C, G₁]], [[B], [G₂D]])`.
pub fn augmented_pair(ss: &StateSpace, im: &InternalModel) -> (Mat, Mat) {
    let (n, p, nz) = (ss.n(), ss.p(), im.n_z());
    let mut a = Mat::zeros(n + nz, n + nz);
    a.view_mut((0, 0), (n, n)).copy_from(&ss.a);
    a.view_mut((n, 0), (nz, n)).copy_from(&(&im.g2 * &ss.c));
    a.view_mut((n, n), (nz, nz)).copy_from(&im.g1);
    let mut b = Mat::zeros(n + nz, p);
    b.view_mut((0, 0), (n, p)).copy_from(&ss.b);
    b.view_mut((n, 0), (nz, p)).copy_from(&(&im.g2 * &ss.d));
    (a, b)
}

/// State-feedback closed loop on `(x, ξ)`:
/// `[[A + BK₁, BK₂], [G₂(C + DK₁), G₁ + G₂DK₂]]`.
pub fn closed_loop_matrix(ss: &StateSpace, im: &InternalModel, k1: &Mat, k2: &Mat) -> Mat {
    let (n, nz) = (ss.n(), im.n_z());
    let mut m = Mat::zeros(n + nz, n + nz);
    m.view_mut((0, 0), (n, n)).copy_from(&(&ss.a + &ss.b * k1));
    m.view_mut((0, n), (n, nz)).copy_from(&(&ss.b * k2));
    m.view_mut((n, 0), (nz, n)).copy_from(&(&im.g2 * (&ss.c + &ss.d * k1)));
    m.view_mut((n, n), (nz, nz)).copy_from(&(&im.g1 + &im.g2 * &ss.d * k2));
    m
}

/// Output-feedback closed loop on `(x, ζ, ξ)` with the plant running
/// `actual` and the estimator built from `nominal`.
pub fn output_closed_loop_matrix(
    nominal: &StateSpace,
    actual: &StateSpace,
    im: &InternalModel,
    gains: &AgentGains,
    k3: &Mat,
) -> Mat {
    let (n, nz) = (nominal.n(), im.n_z());
    let (k1, k2) = (&gains.k1, &gains.k2);
    let dd = &actual.d - &nominal.d;
    let mut m = Mat::zeros(2 * n + nz, 2 * n + nz);
    m.view_mut((0, 0), (n, n)).copy_from(&actual.a);
    m.view_mut((0, n), (n, n)).copy_from(&(&actual.b * k1));
    m.view_mut((0, 2 * n), (n, nz)).copy_from(&(&actual.b * k2));

    m.view_mut((n, 0), (n, n)).copy_from(&(k3 * &actual.c));
    m.view_mut((n, n), (n, n))
        .copy_from(&(&nominal.a - k3 * &nominal.c + &nominal.b * k1 + k3 * &dd * k1));
    m.view_mut((n, 2 * n), (n, nz)).copy_from(&(&nominal.b * k2 + k3 * &dd * k2));

    m.view_mut((2 * n, 0), (nz, n)).copy_from(&(&im.g2 * &actual.c));
    m.view_mut((2 * n, n), (nz, n)).copy_from(&(&im.g2 * &actual.d * k1));
    m.view_mut((2 * n, 2 * n), (nz, nz)).copy_from(&(&im.g1 + &im.g2 * &actual.d * k2));
    m
}

/// `T = [[I, 0, 0], [−I, I, 0], [0, 0, I]]` on `(x, ζ, ξ)`.
pub fn estimator_similarity(n: usize, nz: usize) -> Mat {
    let mut t = Mat::identity(2 * n + nz, 2 * n + nz);
    t.view_mut((n, 0), (n, n)).copy_from(&(-Mat::identity(n, n)));
    t
}

/// `T Ā T⁻¹`, which separates the estimation error `ζ − x` from the rest.
pub fn triangularized_output_loop(a_bar: &Mat, n: usize, nz: usize) -> Mat {
    let t = estimator_similarity(n, nz);
    let mut t_inv = Mat::identity(2 * n + nz, 2 * n + nz);
    t_inv.view_mut((n, 0), (n, n)).copy_from(&Mat::identity(n, n));
    t * a_bar * t_inv
}

fn weights(n: usize, w: LqrWeights) -> Result<Mat, SynthesisError> {
    if !(w.state > 0.0 && w.input > 0.0) {
        return Err(SynthesisError::InvalidOption(format!(
            "LQR weights must be positive, got state {} input {}",
            w.state, w.input
        )));
    }
    Ok(Mat::identity(n, n) * w.state)
}

/// LQR gains `[K₁ K₂] = −R⁻¹B̂ᵀP̂` for the augmented pair, with a Hurwitz
/// check on the resulting closed loop.
pub fn stabilizing_gains(plant: &AgentPlant, im: &InternalModel, w: LqrWeights) -> Result<(Mat, Mat), SynthesisError> {
    let agent = plant.index();
    let ss = plant.nominal();
    let (a_hat, b_hat) = augmented_pair(ss, im);
    let q = weights(a_hat.nrows(), w)?;
    let r = Mat::identity(ss.p(), ss.p()) * w.input;
    let p_hat = solve_care(&a_hat, &b_hat, &q, &r).map_err(|e| match e {
        LinalgError::NotStabilizable { mode, .. } => SynthesisError::AugmentedUncontrollable { agent, mode },
        other => SynthesisError::agent_stage("regulator Riccati equation", agent)(other),
    })?;
    let k = -(b_hat.transpose() * p_hat) / w.input;
    let (n, nz) = (ss.n(), im.n_z());
    let k1 = k.columns(0, n).clone_owned();
    let k2 = k.columns(n, nz).clone_owned();
    let abscissa = spectral_abscissa(&closed_loop_matrix(ss, im, &k1, &k2))
        .map_err(SynthesisError::agent_stage("closed-loop spectrum", agent))?;
    if !(abscissa < 0.0) {
        return Err(SynthesisError::NotHurwitz { agent, abscissa });
    }
    Ok((k1, k2))
}

/// Luenberger gain from the dual LQR problem on `(Aᵀ, Cᵀ)`; `A − K₃C` is Hurwitz.
pub fn luenberger_gain(plant: &AgentPlant, w: LqrWeights, rank_tol: f64) -> Result<Mat, SynthesisError> {
    let agent = plant.index();
    let ss = plant.nominal();
    if !check_observable(&ss.c, &ss.a, rank_tol) {
        return Err(SynthesisError::AgentUnobservable { agent });
    }
    let q = weights(ss.n(), w)?;
    let r = Mat::identity(ss.q(), ss.q()) * w.input;
    let p = solve_care(&ss.a.transpose(), &ss.c.transpose(), &q, &r)
        .map_err(SynthesisError::agent_stage("estimator Riccati equation", agent))?;
    let k3 = p * ss.c.transpose() / w.input;
    let abscissa = spectral_abscissa(&(&ss.a - &k3 * &ss.c))
        .map_err(SynthesisError::agent_stage("estimator spectrum", agent))?;
    if !(abscissa < 0.0) {
        return Err(SynthesisError::NotHurwitz { agent, abscissa });
    }
    Ok(k3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::is_hurwitz;
    use crate::synthesis::build_internal_model;

    fn scalar(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    fn oscillator_im() -> InternalModel {
        let s = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        build_internal_model(&s, 1, 1e-8, 1e-9).unwrap()
    }

    #[test]
    fn stable_first_order_plant() {
        let ss = StateSpace::new(scalar(-1.0), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let plant = AgentPlant::exact(1, ss.clone());
        let im = oscillator_im();
        let (k1, k2) = stabilizing_gains(&plant, &im, LqrWeights::default()).unwrap();
        assert!(is_hurwitz(&closed_loop_matrix(&ss, &im, &k1, &k2), 0.0).unwrap());
    }

    #[test]
    fn blocked_output_is_rejected() {
        // C = 0 and D = 0: the internal model never sees the plant.
        let ss = StateSpace::new(scalar(-1.0), scalar(1.0), scalar(0.0), scalar(0.0)).unwrap();
        let err = stabilizing_gains(&AgentPlant::exact(1, ss), &oscillator_im(), LqrWeights::default()).unwrap_err();
        assert!(matches!(err, SynthesisError::AugmentedUncontrollable { agent: 1, .. }), "{err}");
    }

    #[test]
    fn luenberger_examples() {
        let ss = StateSpace::new(scalar(-5.0), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let k3 = luenberger_gain(&AgentPlant::exact(1, ss), LqrWeights::default(), 1e-9).unwrap();
        assert!(k3[(0, 0)].is_finite() && k3[(0, 0)] >= 0.0);
        assert!(-5.0 - k3[(0, 0)] < 0.0);

        let blind = StateSpace::new(scalar(1.0), scalar(1.0), scalar(0.0), scalar(0.0)).unwrap();
        assert!(matches!(
            luenberger_gain(&AgentPlant::exact(1, blind), LqrWeights::default(), 1e-9),
            Err(SynthesisError::AgentUnobservable { agent: 1 })
        ));
    }

    #[test]
    fn similarity_zeroes_estimator_coupling() {
        let ss = StateSpace::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            Mat::from_row_slice(2, 1, &[0.0, 1.0]),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            scalar(0.0),
        )
        .unwrap();
        let plant = AgentPlant::exact(2, ss.clone());
        let im = oscillator_im();
        let (k1, k2) = stabilizing_gains(&plant, &im, LqrWeights::default()).unwrap();
        let k3 = luenberger_gain(&plant, LqrWeights::default(), 1e-9).unwrap();
        let gains = AgentGains { k1, k2, k3: Some(k3.clone()) };
        let a_bar = output_closed_loop_matrix(&ss, &ss, &im, &gains, &k3);
        let a_hat = triangularized_output_loop(&a_bar, 2, 2);
        assert!(a_hat.view((2, 0), (2, 2)).amax() < 1e-12);
        assert!(a_hat.view((2, 4), (2, 2)).amax() < 1e-12);
        assert!(is_hurwitz(&a_bar, 0.0).unwrap());
    }
}
