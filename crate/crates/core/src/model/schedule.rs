use crate::error::{Error, Result};

/// Linearly increasing fusion coefficient: `β_n = β_0 + n·Δ`,
/// `Δ = (β_N − β_0)/N`, for epochs `n = 1..=N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaSchedule {
    beta0: f64,
    beta_final: f64,
    epochs: usize,
    delta: f64,
}

impl BetaSchedule {
    pub fn new(beta0: f64, beta_final: f64, epochs: usize) -> Result<Self> {
        if !(0.0 <= beta0 && beta0 <= beta_final && beta_final <= 1.0) {
            return Err(Error::usage(format!(
                "need 0 <= beta0 <= betaN <= 1, got beta0={beta0}, betaN={beta_final}"
            )));
        }
        if epochs == 0 {
            return Err(Error::usage("beta schedule needs at least one epoch"));
        }
        Ok(Self {
            beta0,
            beta_final,
            epochs,
            delta: (beta_final - beta0) / epochs as f64,
        })
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn beta_final(&self) -> f64 {
        self.beta_final
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// β used at epoch `n` (1-based). `n = 0` gives `β_0`.
    pub fn beta_at(&self, n: usize) -> f64 {
        if n >= self.epochs {
            return self.beta_final;
        }
        self.beta0 + n as f64 * self.delta
    }

    /// `[β_1, .., β_N]`.
    pub fn values(&self) -> Vec<f64> {
        (1..=self.epochs).map(|n| self.beta_at(n)).collect()
    }
}
