//! Instrumented iterative algorithms. Each one is a [`Stepper`] emitting the
//! loss it is analysed under, the step size, and (where available) the
//! noise `U_t` of its recursion plus martingale parts in `aux`.

pub mod pca;
pub mod ridge;
pub mod robbins_monro;
pub mod sgd;

pub use pca::{krasulina_stream, oja_stream, sin2, PcaMethod, PcaProblem, PcaStepper};
pub use ridge::{ridge_sgd, RidgeStepper, RidgeUpdate};
pub use robbins_monro::{robbins_monro, RmProblem, RmStepper};
pub use sgd::{sgd_pl, sgd_strongly_convex, SgdLoss, SgdProblem, SgdStepper};

use crate::error::{Error, Result};
use crate::linalg;
use crate::recursion::RecursionParams;
use crate::trace::Trace;

/// One iteration's record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t: u64,
    pub loss: f64,
    pub eta: f64,
    pub noise: Option<f64>,
    pub aux: [f64; 2],
}

pub trait Stepper {
    fn name(&self) -> &'static str;

    /// `L_0`.
    fn initial_loss(&self) -> f64;

    /// Advances one iteration.
    fn next_step(&mut self) -> Result<Step>;

    /// Names of the populated `aux` slots.
    fn aux_names(&self) -> &'static [&'static str] {
        &[]
    }

    /// Recursion constants the emitted noise is checked against.
    fn recursion_params(&self) -> Option<RecursionParams> {
        None
    }
}

/// Runs `horizon` steps and records them.
pub fn collect_trace<S: Stepper + ?Sized>(s: &mut S, horizon: usize, seed: u64) -> Result<Trace> {
    let mut losses = Vec::with_capacity(horizon + 1);
    let mut steps = Vec::with_capacity(horizon);
    let mut noise = Vec::with_capacity(horizon);
    let names = s.aux_names();
    let mut aux = vec![Vec::with_capacity(horizon); names.len()];
    let mut has_noise = true;
    losses.push(s.initial_loss());
    for _ in 0..horizon {
        let st = s.next_step()?;
        losses.push(st.loss);
        steps.push(st.eta);
        match st.noise {
            Some(u) => noise.push(u),
            None => has_noise = false,
        }
        for (k, ch) in aux.iter_mut().enumerate() {
            ch.push(st.aux[k]);
        }
    }
    let mut tr = Trace::new(losses, steps, has_noise.then_some(noise))?
        .with_meta("algorithm", s.name())
        .with_meta("seed", seed);
    for (name, ch) in names.iter().zip(aux) {
        tr = tr.with_aux(name, ch)?;
    }
    Ok(tr)
}

/// Radial projection onto the centred ball of radius `r`. The result's
/// computed norm never exceeds `r`, so projecting twice changes nothing.
pub fn project_ball(x: &mut [f64], r: f64) {
    let n = linalg::norm(x);
    if n > r {
        linalg::scale(r / n, x);
        while linalg::norm(x) > r {
            linalg::scale(1.0 - f64::EPSILON, x);
        }
    }
}

pub(crate) fn check_in_ball(x: &[f64], r: f64, what: &str) -> Result<()> {
    let n = linalg::norm(x);
    if n > r * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "{what} has norm {n}, outside the ball of radius {r}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::draw_rng;
    use rand::Rng;

    #[test]
    fn projection_is_idempotent_and_nonexpansive() {
        let mut rng = draw_rng(1, 0);
        for _ in 0..1000 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (mut pa, mut pb) = (a.clone(), b.clone());
            project_ball(&mut pa, 1.0);
            project_ball(&mut pb, 1.0);
            let mut ppa = pa.clone();
            project_ball(&mut ppa, 1.0);
            assert_eq!(pa, ppa);
            assert!(
                linalg::norm(&linalg::sub(&pa, &pb)) <= linalg::norm(&linalg::sub(&a, &b)) + 1e-15
            );
        }
    }
}
