//! Bounded generalized-acceleration disturbances `δ`.
//!
//! Every generator stays strictly inside `|δ_i| < γ1_i + γ2_i ‖ẋ‖²`, and the
//! bound is re-checked on every sample.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntsmc::Diagonal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    None,
    /// `δ_i = ρ γ1_i`.
    ConstantBias,
    /// `δ_i = ρ (γ1_i cos(Ω_i t + φ_i) + γ2_i ‖ẋ‖² sin(Ω_i t + φ_i))`.
    VelocityQuadratic,
    /// No additive term; the mismatch comes from the truth/nominal model pair.
    ParametricMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceConfig {
    pub generator: Generator,
    pub gamma1: Diagonal,
    pub gamma2: Diagonal,
    /// Fraction of the bound actually used; must be in `[0, 1)`.
    pub fill: f64,
    pub max_frequency: f64,
    pub seed: u64,
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        Self {
            generator: Generator::None,
            gamma1: Diagonal::Uniform(1e-5),
            gamma2: Diagonal::Uniform(1e-4),
            fill: 0.9,
            max_frequency: 0.5,
            seed: 0,
        }
    }
}

impl DisturbanceConfig {
    pub fn validate(&self, prefix: &str, n: usize) -> Result<()> {
        let g1 = self.gamma1.resolve(6 + n);
        let g2 = self.gamma2.resolve(6 + n);
        if g1.iter().chain(g2.iter()).any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::invalid(format!("{prefix}.gamma1"), "bounds must be non-negative"));
        }
        let active = matches!(self.generator, Generator::ConstantBias | Generator::VelocityQuadratic);
        if active && g1.iter().any(|x| *x <= 0.0) {
            return Err(Error::invalid(format!("{prefix}.gamma1"), "must be positive for a strict bound"));
        }
        if !(self.fill >= 0.0 && self.fill < 1.0) {
            return Err(Error::invalid(format!("{prefix}.fill"), "must be in [0, 1)"));
        }
        if !(self.max_frequency >= 0.0 && self.max_frequency.is_finite()) {
            return Err(Error::invalid(format!("{prefix}.max_frequency"), "must be non-negative"));
        }
        Ok(())
    }

    /// Instantiates the generator with a reproducible random phase per channel.
    pub fn build(&self, n: usize, stream: u64) -> Disturbance {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ stream);
        let dim = 6 + n;
        let freq = DVector::from_fn(dim, |_, _| rng.random_range(0.0..=self.max_frequency));
        let phase = DVector::from_fn(dim, |_, _| rng.random_range(0.0..std::f64::consts::TAU));
        Disturbance {
            generator: self.generator,
            gamma1: self.gamma1.resolve(dim),
            gamma2: self.gamma2.resolve(dim),
            fill: self.fill,
            freq,
            phase,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    pub generator: Generator,
    pub gamma1: DVector<f64>,
    pub gamma2: DVector<f64>,
    pub fill: f64,
    freq: DVector<f64>,
    phase: DVector<f64>,
}

impl Disturbance {
    pub fn none(n: usize) -> Self {
        DisturbanceConfig::default().build(n, 0)
    }

    pub fn is_active(&self) -> bool {
        matches!(self.generator, Generator::ConstantBias | Generator::VelocityQuadratic)
    }

    /// `γ1 + γ2 ‖ẋ‖²`.
    pub fn bound(&self, xdot_norm_sq: f64) -> DVector<f64> {
        &self.gamma1 + &self.gamma2 * xdot_norm_sq
    }

    /// `δ(t, ẋ)`; `None` when the generator adds nothing.
    pub fn sample(&self, t: f64, xdot_norm_sq: f64) -> Result<Option<DVector<f64>>> {
        let delta = match self.generator {
            Generator::None | Generator::ParametricMismatch => return Ok(None),
            Generator::ConstantBias => &self.gamma1 * self.fill,
            Generator::VelocityQuadratic => DVector::from_fn(self.gamma1.len(), |i, _| {
                let arg = self.freq[i] * t + self.phase[i];
                self.fill * (self.gamma1[i] * arg.cos() + self.gamma2[i] * xdot_norm_sq * arg.sin())
            }),
        };
        let bound = self.bound(xdot_norm_sq);
        for i in 0..delta.len() {
            if !(delta[i].abs() < bound[i]) {
                return Err(Error::DisturbanceBound { channel: i, value: delta[i].abs(), bound: bound[i] });
            }
        }
        Ok(Some(delta))
    }
}
