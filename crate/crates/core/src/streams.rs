//! Seeded synthetic data that meets the boundedness assumptions exactly.
//!
//! Every draw is a pure function of `(spec, t, seed)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::rng::draw_rng;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Stream description as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamSpec {
    PcaRademacher {
        eigs: Vec<f64>,
        #[serde(default)]
        rotation_seed: Option<u64>,
    },
    LinearModel {
        theta_star: Vec<f64>,
        x_radius: f64,
        noise_radius: f64,
    },
    RmAdditive {
        m_kind: MKind,
        #[serde(default)]
        theta: f64,
        r1: f64,
    },
    QuadraticGrad {
        lambda: f64,
        b_noise: f64,
    },
}

/// Rademacher-coordinate data `X_j = s_j sqrt(eigs_j)`, optionally rotated
/// by a fixed orthogonal matrix `O`: covariance `O diag(eigs) O^T` and
/// `|X| = sqrt(sum eigs)` on every draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaStream {
    eigs: Vec<f64>,
    sqrt_eigs: Vec<f64>,
    rotation: Option<Vec<Vec<f64>>>,
}

impl PcaStream {
    pub fn new(eigs: Vec<f64>) -> Result<Self> {
        if eigs.is_empty() || eigs.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::domain(format!(
                "eigenvalues must be positive, got {eigs:?}"
            )));
        }
        if eigs.len() >= 2 && !(eigs[0] > eigs[1]) {
            return Err(Error::domain(format!(
                "need eigs[0] > eigs[1] for a positive eigengap, got {} and {}",
                eigs[0], eigs[1]
            )));
        }
        let sqrt_eigs = eigs.iter().map(|e| e.sqrt()).collect();
        Ok(PcaStream {
            eigs,
            sqrt_eigs,
            rotation: None,
        })
    }

    /// Rotates the data by the orthogonal matrix `o` (row-major).
    pub fn with_rotation(mut self, o: Vec<Vec<f64>>) -> Result<Self> {
        let d = self.dim();
        if o.len() != d || o.iter().any(|r| r.len() != d) {
            return Err(Error::domain(format!("rotation must be {d}x{d}")));
        }
        let ot = linalg::transpose(&o);
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot(&ot[i], &ot[j]) - want).abs() > 1e-10 {
                    return Err(Error::domain("rotation matrix is not orthogonal"));
                }
            }
        }
        self.rotation = Some(o);
        Ok(self)
    }

    pub fn from_spec(eigs: &[f64], rotation_seed: Option<u64>) -> Result<Self> {
        let s = PcaStream::new(eigs.to_vec())?;
        match rotation_seed {
            Some(seed) => s.with_rotation(random_rotation(eigs.len(), seed)?),
            None => Ok(s),
        }
    }

    pub fn dim(&self) -> usize {
        self.eigs.len()
    }

    pub fn eigs(&self) -> &[f64] {
        &self.eigs
    }

    pub fn rotation(&self) -> Option<&[Vec<f64>]> {
        self.rotation.as_deref()
    }

    /// `B = sqrt(sum eigs)`.
    pub fn b(&self) -> f64 {
        self.eigs.iter().sum::<f64>().sqrt()
    }

    /// `rho = eigs[0] - eigs[1]` (or `eigs[0]` in one dimension).
    pub fn rho(&self) -> f64 {
        self.eigs[0] - self.eigs.get(1).copied().unwrap_or(0.0)
    }

    /// Principal eigenvector `O e_1`.
    pub fn v_star(&self) -> Vec<f64> {
        let mut e1 = vec![0.0; self.dim()];
        e1[0] = 1.0;
        self.rotate(e1)
    }

    fn rotate(&self, x: Vec<f64>) -> Vec<f64> {
        match &self.rotation {
            Some(o) => linalg::matvec(o, &x),
            None => x,
        }
    }

    /// Dense covariance `O diag(eigs) O^T`.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                let mut e = vec![0.0; d];
                e[j] = 1.0;
                self.rotate(e)
            })
            .collect();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|k| (0..d).map(|j| self.eigs[j] * cols[j][i] * cols[j][k]).sum())
                    .collect()
            })
            .collect()
    }

    pub fn sample(&self, t: u64, seed: u64) -> Vec<f64> {
        let mut rng = draw_rng(seed, t);
        let x: Vec<f64> = self
            .sqrt_eigs
            .iter()
            .map(|&s| if rng.random::<bool>() { s } else { -s })
            .collect();
        let x = self.rotate(x);
        debug_assert!(linalg::norm(&x) <= self.b() * (1.0 + 1e-12));
        x
    }
}

/// Haar-ish orthogonal matrix from Gram-Schmidt on a seeded Gaussian matrix.
pub fn random_rotation(dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    for attempt in 0..16u64 {
        let mut rng = draw_rng(seed, attempt);
        let mut m: Vec<Vec<f64>> = (0..dim)
            .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        if linalg::orthonormalize_rows(&mut m) {
            return Ok(m);
        }
    }
    Err(Error::Numeric("could not draw a full-rank matrix".into()))
}

/// Gradient oracle for `F(x) = lambda/2 |x|^2`: `lambda x + eps` with
/// `eps` uniform on the sphere of radius `b_noise`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticGrad {
    pub lambda: f64,
    pub b_noise: f64,
}

impl QuadraticGrad {
    pub fn new(lambda: f64, b_noise: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(b_noise >= 0.0) || !(lambda + b_noise).is_finite() {
            return Err(Error::domain(format!(
                "need lambda > 0 and b_noise >= 0, got {lambda}, {b_noise}"
            )));
        }
        Ok(QuadraticGrad { lambda, b_noise })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.lambda * linalg::norm2(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| self.lambda * v).collect()
    }

    /// Uniform draw on the sphere of radius `b_noise` in `dim` dimensions.
    pub fn noise(&self, dim: usize, t: u64, seed: u64) -> Vec<f64> {
        if self.b_noise == 0.0 {
            return vec![0.0; dim];
        }
        let mut rng = draw_rng(seed, t);
        loop {
            let mut e: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = linalg::norm(&e);
            if n > 1e-300 {
                linalg::scale(self.b_noise / n, &mut e);
                return e;
            }
        }
    }

    pub fn sample(&self, x: &[f64], t: u64, seed: u64) -> Vec<f64> {
        let mut g = self.grad(x);
        linalg::axpy(1.0, &self.noise(x.len(), t, seed), &mut g);
        g
    }
}

/// Mean field of the Robbins-Monro problem, centred at the root `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MKind {
    /// `M(x) = slope (x - theta)`
    Linear { slope: f64 },
    /// `M(x) = a (x - theta)^3 + b (x - theta)`
    CubicPlusLinear { a: f64, b: f64 },
}

/// `Y(x) = M(x) + xi` with `xi` uniform on `[-sqrt 3, sqrt 3]` (unit variance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmOracle {
    pub m_kind: MKind,
    pub theta: f64,
    pub r1: f64,
}

impl RmOracle {
    pub fn new(m_kind: MKind, theta: f64, r1: f64) -> Result<Self> {
        if !(r1 >= SQRT3) {
            return Err(Error::domain(format!(
                "unit-variance uniform noise reaches sqrt(3); r1 = {r1} is too small"
            )));
        }
        match m_kind {
            MKind::Linear { slope } if !(slope > 0.0) => {
                return Err(Error::domain(format!(
                    "slope must be positive, got {slope}"
                )))
            }
            MKind::CubicPlusLinear { a, b } if !(a >= 0.0 && b > 0.0) => {
                return Err(Error::domain(format!(
                    "need a >= 0 and b > 0, got a={a}, b={b}"
                )))
            }
            _ => {}
        }
        if !theta.is_finite() {
            return Err(Error::domain("theta must be finite"));
        }
        Ok(RmOracle { m_kind, theta, r1 })
    }

    pub fn m(&self, x: f64) -> f64 {
        let u = x - self.theta;
        match self.m_kind {
            MKind::Linear { slope } => slope * u,
            MKind::CubicPlusLinear { a, b } => a * u * u * u + b * u,
        }
    }

    /// `R`, a lower bound on `M'`.
    pub fn r_lower(&self) -> f64 {
        match self.m_kind {
            MKind::Linear { slope } => slope,
            MKind::CubicPlusLinear { b, .. } => b,
        }
    }

    /// `M'(theta)`.
    pub fn slope_at_root(&self) -> f64 {
        self.r_lower()
    }

    /// Coefficients `p_0, p_1, ...` of `P` with `|M(x)| <= P(|x - theta|)`.
    pub fn poly_bound(&self) -> Vec<f64> {
        match self.m_kind {
            MKind::Linear { slope } => vec![0.0, slope],
            MKind::CubicPlusLinear { a, b } => vec![0.0, b, 0.0, a],
        }
    }

    pub fn noise(&self, t: u64, seed: u64) -> f64 {
        let xi = draw_rng(seed, t).random_range(-SQRT3..=SQRT3);
        debug_assert!(xi.abs() <= self.r1);
        xi
    }

    /// Returns `(Y(x), xi)`.
    pub fn sample(&self, x: f64, t: u64, seed: u64) -> (f64, f64) {
        let xi = self.noise(t, seed);
        (self.m(x) + xi, xi)
    }
}

/// `y = <theta*, x> + xi` with `x` a Rademacher vector scaled to norm
/// `x_radius` and `xi` uniform on `[-noise_radius, noise_radius]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub theta_star: Vec<f64>,
    pub x_radius: f64,
    pub noise_radius: f64,
}

impl LinearModel {
    pub fn new(theta_star: Vec<f64>, x_radius: f64, noise_radius: f64) -> Result<Self> {
        if theta_star.is_empty() || theta_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("theta_star must be a nonempty finite vector"));
        }
        if !(x_radius > 0.0) || !(noise_radius >= 0.0) {
            return Err(Error::domain(format!(
                "need x_radius > 0 and noise_radius >= 0, got {x_radius}, {noise_radius}"
            )));
        }
        Ok(LinearModel {
            theta_star,
            x_radius,
            noise_radius,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    /// Second-moment matrix `E x x^T = x_radius^2 / d * I`; its smallest
    /// eigenvalue.
    pub fn lambda_min(&self) -> f64 {
        self.x_radius * self.x_radius / self.dim() as f64
    }

    /// `max{|x|, |xi|}`.
    pub fn b(&self) -> f64 {
        self.x_radius.max(self.noise_radius)
    }

    /// Returns `(x, y, xi)`.
    pub fn sample(&self, t: u64, seed: u64) -> (Vec<f64>, f64, f64) {
        let mut rng = draw_rng(seed, t);
        let s = self.x_radius / (self.dim() as f64).sqrt();
        let x: Vec<f64> = (0..self.dim())
            .map(|_| if rng.random::<bool>() { s } else { -s })
            .collect();
        let xi = if self.noise_radius > 0.0 {
            rng.random_range(-self.noise_radius..=self.noise_radius)
        } else {
            0.0
        };
        let y = dot(&self.theta_star, &x) + xi;
        (x, y, xi)
    }
}
