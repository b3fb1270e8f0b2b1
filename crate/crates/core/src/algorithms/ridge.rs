//! Projected SGD for ridge regression over the centred ball of diameter
//! `diam`, with loss `|theta_t - theta*|^2`.

use serde::{Deserialize, Serialize};

use super::{check_in_ball, collect_trace, project_ball, Step, Stepper};
use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::schedule::StepSchedule;
use crate::streams::LinearModel;
use crate::trace::Trace;

/// How the penalty enters the step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeUpdate {
    /// `theta - eta (x (x^T theta - y) + lambda theta)`
    #[default]
    Gradient,
    /// `theta - eta x (x^T theta - y) + lambda theta`, the penalty added
    /// outside the step size.
    Literal,
}

pub struct RidgeStepper {
    model: LinearModel,
    radius: f64,
    lambda_pen: f64,
    update: RidgeUpdate,
    schedule: StepSchedule,
    theta: Vec<f64>,
    t: u64,
    seed: u64,
}

impl RidgeStepper {
    pub fn new(
        model: LinearModel,
        diam: f64,
        lambda_pen: f64,
        update: RidgeUpdate,
        schedule: StepSchedule,
        theta0: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        if !(diam > 0.0) || !(lambda_pen >= 0.0) {
            return Err(Error::domain(format!(
                "need diam > 0 and lambda_pen >= 0, got {diam}, {lambda_pen}"
            )));
        }
        if theta0.len() != model.dim() {
            return Err(Error::domain("theta0 dimension does not match the model"));
        }
        check_in_ball(&theta0, diam / 2.0, "theta0")?;
        Ok(RidgeStepper {
            model,
            radius: diam / 2.0,
            lambda_pen,
            update,
            schedule,
            theta: theta0,
            t: 0,
            seed,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn loss(&self) -> f64 {
        linalg::norm2(&linalg::sub(&self.theta, &self.model.theta_star))
    }
}

impl Stepper for RidgeStepper {
    fn name(&self) -> &'static str {
        "ridge_sgd"
    }

    fn initial_loss(&self) -> f64 {
        self.loss()
    }

    fn next_step(&mut self) -> Result<Step> {
        self.t += 1;
        let eta = self.schedule.eta(self.t);
        let (x, y, _) = self.model.sample(self.t, self.seed);
        let resid = dot(&x, &self.theta) - y;
        let prev = self.theta.clone();
        linalg::axpy(-eta * resid, &x, &mut self.theta);
        let pen = match self.update {
            RidgeUpdate::Gradient => -eta * self.lambda_pen,
            RidgeUpdate::Literal => self.lambda_pen,
        };
        linalg::axpy(pen, &prev, &mut self.theta);
        project_ball(&mut self.theta, self.radius);
        Ok(Step {
            t: self.t,
            loss: self.loss(),
            eta,
            noise: None,
            aux: [0.0; 2],
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ridge_sgd(
    model: &LinearModel,
    diam: f64,
    lambda_pen: f64,
    update: RidgeUpdate,
    schedule: &StepSchedule,
    theta0: &[f64],
    horizon: usize,
    seed: u64,
) -> Result<Trace> {
    schedule.validate(horizon as u64)?;
    let mut s = RidgeStepper::new(
        model.clone(),
        diam,
        lambda_pen,
        update,
        schedule.clone(),
        theta0.to_vec(),
        seed,
    )?;
    collect_trace(&mut s, horizon, seed)
}
