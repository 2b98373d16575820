//! Tunable constants, tolerances and budgets.
//!
//! Unspecified absolute constants get documented defaults here; none of them
//! is asserted as a mathematical claim.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constants {
    /// Float comparison tolerance.
    pub tol: f64,
    /// Bohr-set membership ties: radii within this distance of the width.
    pub tie_tol: f64,
    /// Constant in the L1-smoothing and approximate-invariance bounds.
    pub c_smooth: f64,
    /// Domination lemma regime `ρ ≤ c_dom / r`.
    pub c_dom: f64,
    /// Regime `σ ≤ c_sigma · ε / (r 2^d)` for Bohr-case non-uniformity.
    pub c_sigma: f64,
    /// Regime `τ ≤ c_tau / rk(B)` for shift removal.
    pub c_tau: f64,
    /// Multiplier on the initial `τ = ε² / (r d 2^d)` of the Bohr increment.
    pub tau_scale: f64,
    /// Halvings of `τ` allowed per Bohr increment step.
    pub tau_retries: u32,
    /// `P_max = ⌈unbalance_factor · p / ε⌉`.
    pub unbalance_factor: f64,
    /// Random dependent-choice trials in the robust witness search.
    pub witness_trials: u64,
    /// Node budget for exact search.
    pub search_budget: u64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            tie_tol: 1e-12,
            c_smooth: 400.0,
            c_dom: 0.01,
            c_sigma: 0.01,
            c_tau: 0.0025,
            tau_scale: 1.0,
            tau_retries: 10,
            unbalance_factor: 64.0,
            witness_trials: 2000,
            search_budget: 50_000_000,
        }
    }
}

impl Constants {
    /// Applies a `KEY=VAL` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, val) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected KEY=VAL, got {assignment:?}")))?;
        let bad = || Error::Parse(format!("bad value for {key}: {val:?}"));
        let float = || val.trim().parse::<f64>().map_err(|_| bad());
        let int = || val.trim().parse::<u64>().map_err(|_| bad());
        match key.trim() {
            "tol" => self.tol = float()?,
            "tie_tol" => self.tie_tol = float()?,
            "c_smooth" | "C_smooth" => self.c_smooth = float()?,
            "c_dom" => self.c_dom = float()?,
            "c_sigma" => self.c_sigma = float()?,
            "c_tau" => self.c_tau = float()?,
            "tau_scale" => self.tau_scale = float()?,
            "tau_retries" => self.tau_retries = int()? as u32,
            "unbalance_factor" => self.unbalance_factor = float()?,
            "witness_trials" => self.witness_trials = int()?,
            "search_budget" => self.search_budget = int()?,
            other => return Err(Error::Parse(format!("unknown constant {other:?}"))),
        }
        Ok(())
    }
}
