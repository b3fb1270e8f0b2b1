//! Projected SGD on `F(x) = lambda/2 |x|^2` over a centred ball.
//!
//! Strongly convex loss `|x_t - x*|^2`:
//! `L_t <= (1 - 2 lambda eta) L_{t-1} + 2 eta Y_t + eta^2 |g|^2`,
//! `Y_t = <grad F(x_{t-1}) - g, x_{t-1} - x*>`.
//!
//! PL loss `F(x_t) - F(x*)`:
//! `L_t <= (1 - tau eta) L_{t-1} + eta Y_t + mu/2 eta^2 |g|^2`,
//! `Y_t = <grad F(x_{t-1}), grad F(x_{t-1}) - g>`.

use serde::{Deserialize, Serialize};

use super::{check_in_ball, collect_trace, project_ball, Step, Stepper};
use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::recursion::RecursionParams;
use crate::schedule::StepSchedule;
use crate::streams::QuadraticGrad;
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdProblem {
    pub dim: usize,
    pub lambda: f64,
    pub b_noise: f64,
    /// Radius of the feasible ball.
    pub radius: f64,
    /// `B` with `max{|g - grad F|, |g|} <= B`.
    pub b: f64,
    /// Smoothness constant, for the PL loss.
    pub mu: f64,
    /// PL constant: `|grad F|^2 >= tau (F - F*)`.
    pub tau: f64,
}

impl SgdProblem {
    /// Defaults `mu = lambda`, `tau = 2 lambda` (exact for this quadratic).
    pub fn new(dim: usize, lambda: f64, b_noise: f64, radius: f64, b: f64) -> Result<Self> {
        let p = SgdProblem {
            dim,
            lambda,
            b_noise,
            radius,
            b,
            mu: lambda,
            tau: 2.0 * lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_pl(mut self, mu: f64, tau: f64) -> Result<Self> {
        self.mu = mu;
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        QuadraticGrad::new(self.lambda, self.b_noise)?;
        if !(self.radius > 0.0) || !(self.b > 0.0) {
            return Err(Error::domain("radius and b must be positive"));
        }
        let gmax = self.lambda * self.radius + self.b_noise;
        if gmax > self.b * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "gradient draws reach lambda*radius + b_noise = {gmax}, above b = {}",
                self.b
            )));
        }
        if !(self.mu >= self.lambda * (1.0 - 1e-12)) {
            return Err(Error::domain(format!(
                "mu = {} is below the curvature {}",
                self.mu, self.lambda
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 2.0 * self.lambda * (1.0 + 1e-12)) {
            return Err(Error::domain(format!(
                "tau = {} must lie in (0, 2 lambda] for this objective",
                self.tau
            )));
        }
        Ok(())
    }

    pub fn oracle(&self) -> QuadraticGrad {
        QuadraticGrad {
            lambda: self.lambda,
            b_noise: self.b_noise,
        }
    }

    pub fn x_star(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    /// `C1 = 2 lambda, C2 = B^2, C3 = 2B`.
    pub fn sc_params(&self) -> RecursionParams {
        RecursionParams {
            c1: 2.0 * self.lambda,
            c2: self.b * self.b,
            c3: 2.0 * self.b,
            terms_mean: vec![],
            terms_mag: vec![],
        }
    }

    /// `C1 = tau, C2 = 2 mu B^2, C3 = B sqrt(mu)`. The last constant covers
    /// `|Y| <= |grad F| b_noise <= sqrt(2 mu L) b_noise` only when
    /// `b_noise <= B / sqrt 2`.
    pub fn pl_params(&self) -> RecursionParams {
        RecursionParams {
            c1: self.tau,
            c2: 2.0 * self.mu * self.b * self.b,
            c3: self.b * self.mu.sqrt(),
            terms_mean: vec![],
            terms_mag: vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgdLoss {
    StronglyConvex,
    Pl,
}

pub struct SgdStepper {
    problem: SgdProblem,
    schedule: StepSchedule,
    loss: SgdLoss,
    x: Vec<f64>,
    t: u64,
    seed: u64,
}

impl SgdStepper {
    pub fn new(
        problem: SgdProblem,
        schedule: StepSchedule,
        loss: SgdLoss,
        x0: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        problem.validate()?;
        if x0.len() != problem.dim {
            return Err(Error::domain(format!(
                "x0 has {} entries, dim is {}",
                x0.len(),
                problem.dim
            )));
        }
        check_in_ball(&x0, problem.radius, "x0")?;
        Ok(SgdStepper {
            problem,
            schedule,
            loss,
            x: x0,
            t: 0,
            seed,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    fn loss_at(&self, x: &[f64]) -> f64 {
        match self.loss {
            SgdLoss::StronglyConvex => linalg::norm2(x),
            SgdLoss::Pl => self.problem.oracle().value(x),
        }
    }
}

impl Stepper for SgdStepper {
    fn name(&self) -> &'static str {
        match self.loss {
            SgdLoss::StronglyConvex => "sgd_strongly_convex",
            SgdLoss::Pl => "sgd_pl",
        }
    }

    fn initial_loss(&self) -> f64 {
        self.loss_at(&self.x)
    }

    fn next_step(&mut self) -> Result<Step> {
        self.t += 1;
        let eta = self.schedule.eta(self.t);
        let oracle = self.problem.oracle();
        let grad = oracle.grad(&self.x);
        let noise = oracle.noise(self.problem.dim, self.t, self.seed);
        let mut g = grad.clone();
        linalg::axpy(1.0, &noise, &mut g);
        let g2 = linalg::norm2(&g);

        // grad - g = -noise; x* = 0
        let (u, y) = match self.loss {
            SgdLoss::StronglyConvex => {
                let y = -dot(&noise, &self.x);
                (2.0 * eta * y + eta * eta * g2, y)
            }
            SgdLoss::Pl => {
                let y = -dot(&grad, &noise);
                (eta * y + 0.5 * self.problem.mu * eta * eta * g2, y)
            }
        };

        linalg::axpy(-eta, &g, &mut self.x);
        project_ball(&mut self.x, self.problem.radius);
        Ok(Step {
            t: self.t,
            loss: self.loss_at(&self.x),
            eta,
            noise: Some(u),
            aux: [y, 0.0],
        })
    }

    fn aux_names(&self) -> &'static [&'static str] {
        &["y"]
    }

    fn recursion_params(&self) -> Option<RecursionParams> {
        Some(match self.loss {
            SgdLoss::StronglyConvex => self.problem.sc_params(),
            SgdLoss::Pl => self.problem.pl_params(),
        })
    }
}

pub fn sgd_strongly_convex(
    problem: &SgdProblem,
    schedule: &StepSchedule,
    x0: &[f64],
    horizon: usize,
    seed: u64,
) -> Result<Trace> {
    schedule.validate(horizon as u64)?;
    let mut s = SgdStepper::new(
        problem.clone(),
        schedule.clone(),
        SgdLoss::StronglyConvex,
        x0.to_vec(),
        seed,
    )?;
    collect_trace(&mut s, horizon, seed)
}

pub fn sgd_pl(
    problem: &SgdProblem,
    schedule: &StepSchedule,
    x0: &[f64],
    horizon: usize,
    seed: u64,
) -> Result<Trace> {
    schedule.validate(horizon as u64)?;
    let mut s = SgdStepper::new(
        problem.clone(),
        schedule.clone(),
        SgdLoss::Pl,
        x0.to_vec(),
        seed,
    )?;
    collect_trace(&mut s, horizon, seed)
}
