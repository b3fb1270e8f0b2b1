//! Serializable descriptions of algorithms and boundaries, and the rules
//! that pair them.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algorithms::pca::warm_start;
use crate::algorithms::{
    PcaMethod, PcaProblem, PcaStepper, RidgeStepper, RidgeUpdate, RmProblem, RmStepper, SgdLoss,
    SgdProblem, SgdStepper, Stepper,
};
use crate::boundaries::{self, Boundary, BoundaryKind};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{channel_seed, draw_rng};
use crate::schedule::StepSchedule;
use crate::streams::{LinearModel, MKind, PcaStream, RmOracle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSpec {
    pub dim: usize,
    pub lambda: f64,
    pub b_noise: f64,
    pub radius: f64,
    pub b: f64,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    /// Defaults to `radius * e_1`.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

impl SgdSpec {
    pub fn problem(&self) -> Result<SgdProblem> {
        let p = SgdProblem::new(self.dim, self.lambda, self.b_noise, self.radius, self.b)?;
        match (self.mu, self.tau) {
            (None, None) => Ok(p),
            (mu, tau) => {
                let (m0, t0) = (p.mu, p.tau);
                p.with_pl(mu.unwrap_or(m0), tau.unwrap_or(t0))
            }
        }
    }

    pub fn start(&self) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| {
            let mut x = vec![0.0; self.dim];
            if self.dim > 0 {
                x[0] = self.radius;
            }
            x
        })
    }
}

/// Starting vector for streaming PCA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PcaInit {
    /// Unit vector at the given sin^2 from the principal direction.
    Warm {
        sin2: f64,
    },
    /// Uniform on the unit sphere, drawn per replication.
    UniformSphere,
    Fixed {
        v0: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaSpec {
    pub eigs: Vec<f64>,
    #[serde(default)]
    pub rotation_seed: Option<u64>,
    pub init: PcaInit,
}

impl PcaSpec {
    pub fn problem(&self) -> Result<PcaProblem> {
        PcaProblem::new(PcaStream::from_spec(&self.eigs, self.rotation_seed)?)
    }

    pub fn start(&self, problem: &PcaProblem, seed: u64) -> Result<Vec<f64>> {
        let d = problem.dim();
        match &self.init {
            PcaInit::Warm { sin2 } => {
                if !(0.0..=1.0).contains(sin2) {
                    return Err(Error::config(
                        "init.sin2",
                        format!("must lie in [0, 1], got {sin2}"),
                    ));
                }
                let v = warm_start(d, *sin2);
                Ok(match problem.stream.rotation() {
                    Some(o) => linalg::matvec(o, &v),
                    None => v,
                })
            }
            PcaInit::UniformSphere => Ok(uniform_sphere(d, channel_seed(seed, 2))),
            PcaInit::Fixed { v0 } => {
                let n = linalg::norm(v0);
                if v0.len() != d || !(n > 0.0) {
                    return Err(Error::config(
                        "init.v0",
                        "must be a nonzero vector of the stream dimension",
                    ));
                }
                Ok(v0.iter().map(|x| x / n).collect())
            }
        }
    }

    /// Initial loss when it is deterministic.
    pub fn fixed_initial_loss(&self, problem: &PcaProblem) -> Option<f64> {
        match &self.init {
            PcaInit::Warm { sin2 } => Some(*sin2),
            PcaInit::Fixed { v0 } => crate::algorithms::sin2(v0, problem.v_star()).ok(),
            PcaInit::UniformSphere => None,
        }
    }
}

pub fn uniform_sphere(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = draw_rng(seed, 0);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = linalg::norm(&v);
        if n > 1e-12 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmSpec {
    pub m_kind: MKind,
    #[serde(default)]
    pub theta: f64,
    pub r1: f64,
    pub x0: f64,
}

impl RmSpec {
    pub fn problem(&self) -> Result<RmProblem> {
        Ok(RmProblem::new(RmOracle::new(
            self.m_kind,
            self.theta,
            self.r1,
        )?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RidgeSpec {
    pub theta_star: Vec<f64>,
    pub x_radius: f64,
    pub noise_radius: f64,
    pub diam: f64,
    #[serde(default)]
    pub lambda_pen: f64,
    #[serde(default)]
    pub update: RidgeUpdate,
    /// Defaults to the origin.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
}

impl RidgeSpec {
    pub fn model(&self) -> Result<LinearModel> {
        LinearModel::new(self.theta_star.clone(), self.x_radius, self.noise_radius)
    }
}

/// Which algorithm a run uses, with its problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    SgdStronglyConvex(SgdSpec),
    SgdPl(SgdSpec),
    Krasulina(PcaSpec),
    Oja {
        #[serde(flatten)]
        pca: PcaSpec,
        #[serde(default = "default_true")]
        normalize_each_step: bool,
    },
    RobbinsMonro(RmSpec),
    Ridge(RidgeSpec),
}

fn default_true() -> bool {
    true
}

pub type DynStepper = Box<dyn Stepper + Send>;

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::SgdStronglyConvex(_) => "sgd_strongly_convex",
            AlgorithmSpec::SgdPl(_) => "sgd_pl",
            AlgorithmSpec::Krasulina(_) => "krasulina",
            AlgorithmSpec::Oja { .. } => "oja",
            AlgorithmSpec::RobbinsMonro(_) => "robbins_monro",
            AlgorithmSpec::Ridge(_) => "ridge",
        }
    }

    /// Builds the problem and checks it once, so configuration mistakes
    /// surface before any replication runs.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Domain(m) => Error::config("algorithm", m),
            other => other,
        };
        match self {
            AlgorithmSpec::SgdStronglyConvex(s) | AlgorithmSpec::SgdPl(s) => {
                let p = s.problem().map_err(wrap)?;
                let x0 = s.start();
                SgdStepper::new(p, StepSchedule::inverse_time(1.0, 1.0), SgdLoss::Pl, x0, 0)
                    .map_err(wrap)?;
            }
            AlgorithmSpec::Krasulina(p) | AlgorithmSpec::Oja { pca: p, .. } => {
                let prob = p.problem().map_err(wrap)?;
                p.start(&prob, 0)?;
            }
            AlgorithmSpec::RobbinsMonro(r) => {
                r.problem().map_err(wrap)?;
            }
            AlgorithmSpec::Ridge(r) => {
                let m = r.model().map_err(wrap)?;
                let th0 = r.theta0.clone().unwrap_or_else(|| vec![0.0; m.dim()]);
                RidgeStepper::new(
                    m,
                    r.diam,
                    r.lambda_pen,
                    r.update,
                    StepSchedule::inverse_time(1.0, 1.0),
                    th0,
                    0,
                )
                .map_err(wrap)?;
            }
        }
        Ok(())
    }

    pub fn stepper(&self, schedule: StepSchedule, seed: u64) -> Result<DynStepper> {
        Ok(match self {
            AlgorithmSpec::SgdStronglyConvex(s) => Box::new(SgdStepper::new(
                s.problem()?,
                schedule,
                SgdLoss::StronglyConvex,
                s.start(),
                seed,
            )?),
            AlgorithmSpec::SgdPl(s) => Box::new(SgdStepper::new(
                s.problem()?,
                schedule,
                SgdLoss::Pl,
                s.start(),
                seed,
            )?),
            AlgorithmSpec::Krasulina(p) => {
                let prob = p.problem()?;
                let v0 = p.start(&prob, seed)?;
                Box::new(PcaStepper::new(
                    prob,
                    schedule,
                    PcaMethod::Krasulina,
                    v0,
                    seed,
                )?)
            }
            AlgorithmSpec::Oja {
                pca,
                normalize_each_step,
            } => {
                let prob = pca.problem()?;
                let v0 = pca.start(&prob, seed)?;
                let m = PcaMethod::Oja {
                    normalize_each_step: *normalize_each_step,
                };
                Box::new(PcaStepper::new(prob, schedule, m, v0, seed)?)
            }
            AlgorithmSpec::RobbinsMonro(r) => {
                Box::new(RmStepper::new(r.problem()?, schedule, r.x0, seed))
            }
            AlgorithmSpec::Ridge(r) => {
                let m = r.model()?;
                let th0 = r.theta0.clone().unwrap_or_else(|| vec![0.0; m.dim()]);
                Box::new(RidgeStepper::new(
                    m,
                    r.diam,
                    r.lambda_pen,
                    r.update,
                    schedule,
                    th0,
                    seed,
                )?)
            }
        })
    }
}

/// Boundary parameters as they appear in configs. The confidence level
/// comes from the surrounding experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    Conf {
        c1: f64,
        c2: f64,
        c3: f64,
        a: f64,
        l_off: u64,
    },
    Sgd {
        b: f64,
        lambda: f64,
    },
    Pl {
        b: f64,
        mu: f64,
        tau: f64,
    },
    Oja {
        b: f64,
        rho: f64,
    },
    Ridge {
        b: f64,
        diam: f64,
        lambda_pen: f64,
        lambda_min: f64,
        theta_norm: f64,
    },
}

impl BoundarySpec {
    pub fn build(&self, delta: f64) -> Result<Boundary> {
        match *self {
            BoundarySpec::Conf {
                c1,
                c2,
                c3,
                a,
                l_off,
            } => boundaries::conf_boundary(c1, c2, c3, a, l_off, delta),
            BoundarySpec::Sgd { b, lambda } => boundaries::sgd_boundary(b, lambda, delta),
            BoundarySpec::Pl { b, mu, tau } => boundaries::pl_boundary(b, mu, tau, delta),
            BoundarySpec::Oja { b, rho } => boundaries::oja_boundary(b, rho, delta),
            BoundarySpec::Ridge {
                b,
                diam,
                lambda_pen,
                lambda_min,
                theta_norm,
            } => boundaries::ridge_boundary(b, diam, lambda_pen, lambda_min, theta_norm, delta),
        }
    }

    /// The boundary with the tightest constants the algorithm's problem
    /// admits.
    pub fn matching(alg: &AlgorithmSpec) -> Result<Self> {
        Ok(match alg {
            AlgorithmSpec::SgdStronglyConvex(s) => BoundarySpec::Sgd {
                b: s.b,
                lambda: s.lambda,
            },
            AlgorithmSpec::SgdPl(s) => {
                let p = s.problem()?;
                BoundarySpec::Pl {
                    b: p.b,
                    mu: p.mu,
                    tau: p.tau,
                }
            }
            AlgorithmSpec::Krasulina(p) | AlgorithmSpec::Oja { pca: p, .. } => {
                let prob = p.problem()?;
                BoundarySpec::Oja {
                    b: prob.b(),
                    rho: prob.rho(),
                }
            }
            AlgorithmSpec::Ridge(r) => {
                let m = r.model()?;
                BoundarySpec::Ridge {
                    b: m.b(),
                    diam: r.diam,
                    lambda_pen: r.lambda_pen,
                    lambda_min: m.lambda_min(),
                    theta_norm: linalg::norm(&r.theta_star),
                }
            }
            AlgorithmSpec::RobbinsMonro(_) => {
                return Err(Error::config(
                    "boundary",
                    "no closed-form anytime boundary covers the Robbins-Monro recursion; use the lil experiment",
                ))
            }
        })
    }
}

fn mismatch(reason: String) -> Error {
    Error::config("boundary", reason)
}

/// Checks that the boundary's hypotheses hold for the algorithm's problem:
/// constants must dominate the problem's and the boundary's schedule is the
/// one the algorithm will run.
pub fn check_pairing(alg: &AlgorithmSpec, bnd: &Boundary) -> Result<()> {
    const REL: f64 = 1e-12;
    let ge = |a: f64, b: f64| a >= b * (1.0 - REL);
    match (alg, &bnd.kind) {
        (AlgorithmSpec::SgdStronglyConvex(s), BoundaryKind::Sgd { b, lambda }) => {
            if !ge(*b, s.b) || !ge(s.lambda, *lambda) {
                return Err(mismatch(format!(
                    "sgd boundary needs b >= {} and lambda <= {}, got b={b}, lambda={lambda}",
                    s.b, s.lambda
                )));
            }
        }
        (AlgorithmSpec::SgdPl(s), BoundaryKind::Pl { b, mu, tau }) => {
            let p = s.problem()?;
            if !ge(*b, p.b) || !ge(*mu, p.mu) || !ge(p.tau, *tau) {
                return Err(mismatch(format!(
                    "pl boundary needs b >= {}, mu >= {}, tau <= {}",
                    p.b, p.mu, p.tau
                )));
            }
            if !ge(*b, std::f64::consts::SQRT_2 * p.b_noise) {
                return Err(mismatch(format!(
                    "pl boundary needs b >= sqrt(2) b_noise = {} for its noise constant",
                    std::f64::consts::SQRT_2 * p.b_noise
                )));
            }
        }
        (
            AlgorithmSpec::Krasulina(p) | AlgorithmSpec::Oja { pca: p, .. },
            BoundaryKind::Oja { b, rho, .. },
        ) => {
            let prob = p.problem()?;
            if !ge(*b, prob.b()) || !ge(prob.rho(), *rho) {
                return Err(mismatch(format!(
                    "oja boundary needs b >= {} and rho <= {}",
                    prob.b(),
                    prob.rho()
                )));
            }
            match p.fixed_initial_loss(&prob) {
                Some(l0) if l0 <= 0.25 => {}
                Some(l0) => {
                    return Err(mismatch(format!(
                        "oja boundary needs sin^2 at the start <= 1/4, got {l0}"
                    )))
                }
                None => {
                    return Err(mismatch(
                        "oja boundary needs a warm start; use oja-cold-start for random starts"
                            .into(),
                    ))
                }
            }
        }
        (
            AlgorithmSpec::Ridge(r),
            BoundaryKind::Ridge {
                b,
                diam,
                lambda_pen,
                lambda_min,
                theta_norm,
            },
        ) => {
            let m = r.model()?;
            let tn = linalg::norm(&r.theta_star);
            if !ge(*b, m.b())
                || *diam != r.diam
                || *lambda_pen != r.lambda_pen
                || !ge(m.lambda_min(), *lambda_min)
                || !ge(*theta_norm, tn)
            {
                return Err(mismatch(format!(
                    "ridge boundary needs b >= {}, diam = {}, lambda_pen = {}, lambda_min <= {}, theta_norm >= {tn}",
                    m.b(),
                    r.diam,
                    r.lambda_pen,
                    m.lambda_min()
                )));
            }
            if tn > r.diam / 2.0 {
                return Err(mismatch(
                    "theta_star must lie inside the feasible ball".into(),
                ));
            }
        }
        (_, BoundaryKind::Conf { c1, c2, c3, a, .. }) => {
            let st = alg.stepper(StepSchedule::inverse_time(1.0, 1.0), 0)?;
            let p = st.recursion_params().ok_or_else(|| {
                mismatch(format!(
                    "{} does not expose recursion constants",
                    alg.name()
                ))
            })?;
            if !p.terms_mean.is_empty() || !p.terms_mag.is_empty() {
                return Err(mismatch(format!(
                    "{} has higher-order noise terms the conf boundary does not cover",
                    alg.name()
                )));
            }
            if !ge(p.c1, *c1) || !ge(*c2, p.c2) || !ge(*c3, p.c3) {
                return Err(mismatch(format!(
                    "conf boundary needs c1 <= {}, c2 >= {}, c3 >= {}",
                    p.c1, p.c2, p.c3
                )));
            }
            if !ge(*a, st.initial_loss()) {
                return Err(mismatch(format!(
                    "a = {a} is below the initial loss {}",
                    st.initial_loss()
                )));
            }
        }
        (alg, kind) => {
            return Err(mismatch(format!(
                "boundary {:?} does not apply to {}",
                std::mem::discriminant(kind),
                alg.name()
            )))
        }
    }
    Ok(())
}
