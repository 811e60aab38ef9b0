use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which unmixing algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Fully constrained least squares with known endmembers.
    Fclsu,
    /// Convex-combination mixing matrix (`B >= 0`, columns sum to one).
    Fasun,
    /// Sparse, box-constrained mixing matrix (`0 <= B <= 1`, l1 penalty).
    Suns,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fclsu" => Ok(Method::Fclsu),
            "fasun" => Ok(Method::Fasun),
            "suns" => Ok(Method::Suns),
            other => Err(Error::param("method", format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fclsu => "fclsu",
            Method::Fasun => "fasun",
            Method::Suns => "suns",
        })
    }
}

/// Tuned hyperparameter sets for simulated and real scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Simulated,
    Real,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simulated" => Ok(Profile::Simulated),
            "real" => Ok(Profile::Real),
            other => Err(Error::param("profile", format!("unknown profile `{other}`"))),
        }
    }
}

/// Starting point of the mixing matrix `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initialization {
    /// `B = 0` with all splits and duals zero, so the first A-step sees
    /// `E = 0` and returns uniform abundances. In exact arithmetic every
    /// later update is symmetric in the endmember index; in practice the
    /// triangular solves break the tie at roundoff level and the symmetric
    /// point is unstable, so the endmembers separate within a few outer
    /// iterations.
    #[default]
    Zero,
    /// Picks `r` well-separated pixels by successive projection and starts
    /// each column of `B` on the library atom closest in spectral angle to
    /// one of them, with `S1 = B`, `S2 = D B` and zero duals. Does not rely
    /// on roundoff to separate the endmembers.
    AtomSelection,
}

impl FromStr for Initialization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" => Ok(Initialization::Zero),
            "atoms" | "atom-selection" => Ok(Initialization::AtomSelection),
            other => Err(Error::param("init", format!("unknown initialization `{other}`"))),
        }
    }
}

/// Penalties, iteration budgets and stopping rule for the ADMM solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmParams {
    /// A-step penalty on `A = S`.
    pub mu_a: f64,
    /// B-step penalty on `B = S1`.
    pub mu_b1: f64,
    /// B-step penalty on `D B = S2`.
    pub mu_b2: f64,
    /// l1 weight on `B` (SUnS only).
    pub lambda: f64,
    /// Outer cyclic-descent iterations.
    pub outer: usize,
    /// Inner ADMM iterations per A-step.
    pub inner_a: usize,
    /// Inner ADMM iterations per B-step.
    pub inner_b: usize,
    /// Stop once the relative objective change stays below `tol` for
    /// [`EARLY_STOP_WINDOW`] consecutive outer iterations. `0` disables.
    pub tol: f64,
    pub init: Initialization,
}

/// Consecutive small-change outer iterations required for early stopping.
pub const EARLY_STOP_WINDOW: usize = 10;

impl Default for AdmmParams {
    fn default() -> Self {
        Self::profile(Profile::Simulated, Method::Fasun)
    }
}

impl AdmmParams {
    /// Tuned defaults for a profile and method.
    pub fn profile(profile: Profile, method: Method) -> Self {
        let (mu_a, mu_b1, mu_b2, lambda) = match (profile, method) {
            (Profile::Simulated, _) => (50.0, 2.0, 1.0, 0.01),
            (Profile::Real, Method::Suns) => (400.0, 100.0, 1.0, 0.1),
            (Profile::Real, _) => (400.0, 20.0, 1.0, 0.1),
        };
        Self {
            mu_a,
            mu_b1,
            mu_b2,
            lambda,
            outer: 10_000,
            inner_a: 5,
            inner_b: 5,
            tol: 0.0,
            init: Initialization::default(),
        }
    }

    pub fn with_outer(mut self, outer: usize) -> Self {
        self.outer = outer;
        self
    }

    pub fn with_inner(mut self, inner_a: usize, inner_b: usize) -> Self {
        self.inner_a = inner_a;
        self.inner_b = inner_b;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_init(mut self, init: Initialization) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu_a", self.mu_a), ("mu_b1", self.mu_b1), ("mu_b2", self.mu_b2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::param(
                "lambda",
                format!("must be non-negative, got {}", self.lambda),
            ));
        }
        for (name, v) in [
            ("outer", self.outer),
            ("inner_a", self.inner_a),
            ("inner_b", self.inner_b),
        ] {
            if v == 0 {
                return Err(Error::param(name, "iteration counts must be at least 1"));
            }
        }
        if !(self.tol >= 0.0) {
            return Err(Error::param("tol", format!("must be non-negative, got {}", self.tol)));
        }
        Ok(())
    }
}
