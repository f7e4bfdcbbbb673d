//! Synthetic fast-state surrogates.
//!
//! The reduced dynamics only ever consumes the fast variables through three
//! properties: uniform boundedness, C¹ boundedness in the slow variables,
//! and exponential code-locality. A weighted sum of per-symbol embeddings
//! over a truncated window has all three, with the locality bound
//! 2·r·λⁿ available by construction, so it stands in for the section values
//! of the fast flow.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::code::Code;
use super::SymbolicError;
use crate::geometry::SlowPoint;

/// Truncation threshold: the window is cut where λ^M drops below this.
pub const TRUNCATION_FLOOR: f64 = 1e-14;

/// Cap on embedding norms guaranteeing ‖x_i‖ ≤ r under geometric summation.
pub fn embed_cap(r: f64, lambda: f64) -> f64 {
    r * (1.0 - lambda) * (1.0 - lambda) / 2.0
}

/// Smallest window half-width M with λ^M ≤ the truncation floor.
pub fn truncation_window(lambda: f64) -> usize {
    (TRUNCATION_FLOOR.ln() / lambda.ln()).ceil() as usize
}

/// Bounded symbol embeddings with geometric decay weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastStateModel {
    r: f64,
    lambda: f64,
    window: usize,
    embed: Vec<DVector<f64>>,
    /// Optional ε-proportional additive bias (the ε-dependence of the fast
    /// states); disabled by default.
    epsilon_bias: Option<DVector<f64>>,
}

impl FastStateModel {
    /// Model with an explicitly chosen window half-width.
    pub fn with_window(
        r: f64,
        lambda: f64,
        window: usize,
        embed: Vec<DVector<f64>>,
        epsilon_bias: Option<DVector<f64>>,
    ) -> Result<Self, SymbolicError> {
        if !r.is_finite() || r <= 0.0 {
            return Err(SymbolicError::BadFastModel(format!(
                "fast-state scale r must be positive, got {r}"
            )));
        }
        if lambda.is_nan() || lambda <= 0.0 || lambda >= 1.0 {
            return Err(SymbolicError::BadFastModel(format!(
                "contraction factor must lie in (0, 1), got {lambda}"
            )));
        }
        if lambda.powi(window as i32) > TRUNCATION_FLOOR {
            return Err(SymbolicError::BadFastModel(format!(
                "window {window} leaves λ^M = {:.3e} above the truncation floor",
                lambda.powi(window as i32)
            )));
        }
        if embed.is_empty() {
            return Err(SymbolicError::BadFastModel(
                "need one embedding per symbol".into(),
            ));
        }
        let dim = embed[0].len();
        if dim == 0 || embed.iter().any(|e| e.len() != dim) {
            return Err(SymbolicError::BadFastModel(
                "embeddings must share a positive dimension".into(),
            ));
        }
        let cap = embed_cap(r, lambda);
        for (symbol, e) in embed.iter().enumerate() {
            let norm = e.norm();
            if !norm.is_finite() || norm > cap * (1.0 + 1e-12) {
                return Err(SymbolicError::BadFastModel(format!(
                    "embedding of symbol {symbol} has norm {norm:.3e}, cap is {cap:.3e}"
                )));
            }
        }
        if let Some(bias) = &epsilon_bias {
            if bias.len() != dim || bias.iter().any(|b| !b.is_finite()) {
                return Err(SymbolicError::BadFastModel(
                    "bias must be finite and match the embedding dimension".into(),
                ));
            }
        }
        Ok(Self {
            r,
            lambda,
            window,
            embed,
            epsilon_bias,
        })
    }

    /// Model with the minimal admissible window.
    pub fn new(
        r: f64,
        lambda: f64,
        embed: Vec<DVector<f64>>,
        epsilon_bias: Option<DVector<f64>>,
    ) -> Result<Self, SymbolicError> {
        if lambda.is_nan() || lambda <= 0.0 || lambda >= 1.0 {
            return Err(SymbolicError::BadFastModel(format!(
                "contraction factor must lie in (0, 1), got {lambda}"
            )));
        }
        Self::with_window(r, lambda, truncation_window(lambda), embed, epsilon_bias)
    }

    /// Deterministic default embeddings at the cap norm: one direction per
    /// symbol, spread over the embedding space.
    pub fn with_default_embed(
        r: f64,
        lambda: f64,
        symbols: usize,
        embed_dim: usize,
    ) -> Result<Self, SymbolicError> {
        let embed = default_embeddings(r, lambda, symbols, embed_dim)?;
        Self::new(r, lambda, embed, None)
    }

    pub fn with_epsilon_bias(mut self, bias: DVector<f64>) -> Result<Self, SymbolicError> {
        if bias.len() != self.embed_dim() || bias.iter().any(|b| !b.is_finite()) {
            return Err(SymbolicError::BadFastModel(
                "bias must be finite and match the embedding dimension".into(),
            ));
        }
        self.epsilon_bias = Some(bias);
        Ok(self)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn embed_dim(&self) -> usize {
        self.embed[0].len()
    }

    pub fn symbols(&self) -> usize {
        self.embed.len()
    }

    pub fn epsilon_bias(&self) -> Option<&DVector<f64>> {
        self.epsilon_bias.as_ref()
    }

    /// Largest embedding norm actually present.
    pub fn max_embed_norm(&self) -> f64 {
        self.embed.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    /// Sup bound on ‖x_i‖ at ε = 0: Σ_{|k|≤M} λ^|k| times the largest
    /// embedding norm.
    pub fn sup_norm(&self) -> f64 {
        let weight_sum = 1.0
            + 2.0 * self.lambda * (1.0 - self.lambda.powi(self.window as i32))
                / (1.0 - self.lambda);
        weight_sum * self.max_embed_norm()
    }

    fn weighted_sum(&self, code: &Code, center: i64) -> Result<DVector<f64>, SymbolicError> {
        let mut acc = DVector::zeros(self.embed_dim());
        let m = self.window as i64;
        for offset in -m..=m {
            let symbol = code.lookup(center + offset);
            let e = self.embed.get(symbol).ok_or(SymbolicError::UnknownSymbol {
                symbol,
                count: self.embed.len(),
            })?;
            acc += e * self.lambda.powi(offset.unsigned_abs() as i32);
        }
        Ok(acc)
    }
}

/// The embeddings used by [`FastStateModel::with_default_embed`]: cap-norm
/// directions spread deterministically over the embedding space.
pub fn default_embeddings(
    r: f64,
    lambda: f64,
    symbols: usize,
    embed_dim: usize,
) -> Result<Vec<DVector<f64>>, SymbolicError> {
    if symbols == 0 || embed_dim == 0 {
        return Err(SymbolicError::BadFastModel(
            "need at least one symbol and one embedding dimension".into(),
        ));
    }
    if lambda.is_nan() || lambda <= 0.0 || lambda >= 1.0 {
        return Err(SymbolicError::BadFastModel(format!(
            "contraction factor must lie in (0, 1), got {lambda}"
        )));
    }
    if !r.is_finite() || r <= 0.0 {
        return Err(SymbolicError::BadFastModel(format!(
            "fast-state scale r must be positive, got {r}"
        )));
    }
    let cap = embed_cap(r, lambda);
    Ok((0..symbols)
        .map(|j| {
            let phase = 0.5 + 2.0 * std::f64::consts::PI * j as f64 / symbols as f64;
            let raw = DVector::from_fn(embed_dim, |k, _| (phase + 1.3 * k as f64).cos());
            let norm = raw.norm();
            raw * (cap / norm)
        })
        .collect())
}

/// Fast surrogates entering the slow step at index i: x_i and y_{i+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct FastPair {
    pub x: DVector<f64>,
    pub y_next: DVector<f64>,
}

/// Evaluate the fast surrogates at ε = 0. The slow point is part of the
/// interface but the synthetic states do not depend on it, which is what
/// makes their slow-derivative bound vanish.
pub fn fast_state(
    code: &Code,
    index: i64,
    _z: &SlowPoint,
    model: &FastStateModel,
) -> Result<FastPair, SymbolicError> {
    Ok(FastPair {
        x: model.weighted_sum(code, index)?,
        y_next: model.weighted_sum(code, index + 1)?,
    })
}

/// Fast surrogates including the optional ε-proportional bias.
pub fn fast_state_with_epsilon(
    code: &Code,
    index: i64,
    z: &SlowPoint,
    model: &FastStateModel,
    epsilon: f64,
) -> Result<FastPair, SymbolicError> {
    let mut pair = fast_state(code, index, z, model)?;
    if let Some(bias) = &model.epsilon_bias {
        pair.x += bias * epsilon;
        pair.y_next += bias * epsilon;
    }
    Ok(pair)
}
