//! Per-class network parameters and model variants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One transmission mode of the multi-rate variant: chosen with probability
/// `prob`, service time Erlang with `phases` stages and mean `mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceMode {
    pub prob: f64,
    pub mean: f64,
    #[serde(default = "one")]
    pub phases: u32,
}

fn one() -> u32 {
    1
}

/// How the queue-based back-off rate continues past the end of its table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    /// ν(n) equals the last table entry (or the nominal ν when the table is empty).
    Constant,
    /// ν(n) = ν·n with ν the nominal class back-off rate.
    Linear,
}

/// Back-off rate ν(n) as a function of the buffer content n ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueRates {
    /// `table[k]` is ν(k + 1).
    #[serde(default)]
    pub table: Vec<f64>,
    pub tail: TailRule,
}

impl QueueRates {
    pub fn linear() -> Self {
        Self {
            table: Vec::new(),
            tail: TailRule::Linear,
        }
    }

    pub fn constant() -> Self {
        Self {
            table: Vec::new(),
            tail: TailRule::Constant,
        }
    }

    /// ν(n); zero for n = 0 (empty nodes do not compete).
    pub fn rate(&self, n: usize, nominal: f64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        if let Some(v) = self.table.get(n - 1) {
            return *v;
        }
        match self.tail {
            TailRule::Constant => self.table.last().copied().unwrap_or(nominal),
            TailRule::Linear => nominal * n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Variant {
    #[default]
    Base,
    MultiRate {
        modes: Vec<Vec<ServiceMode>>,
    },
    QueueBased {
        rates: Vec<QueueRates>,
    },
    FiniteBuffer {
        capacity: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkParams {
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
    /// Transmission rates. For the multi-rate variant this must equal `1/U_c`.
    pub mu: Vec<f64>,
    /// Class proportions p_c, summing to one.
    pub proportions: Vec<f64>,
    #[serde(default)]
    pub variant: Variant,
}

impl NetworkParams {
    /// Base model with validated parameters.
    pub fn new(
        lambda: Vec<f64>,
        nu: Vec<f64>,
        mu: Vec<f64>,
        proportions: Vec<f64>,
    ) -> Result<Self> {
        let p = Self {
            lambda,
            nu,
            mu,
            proportions,
            variant: Variant::Base,
        };
        p.validate()?;
        Ok(p)
    }

    /// Base model with equal class proportions.
    pub fn uniform(lambda: Vec<f64>, nu: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        let c = lambda.len().max(1);
        Self::new(lambda, nu, mu, vec![1.0 / c as f64; c])
    }

    pub fn with_variant(mut self, variant: Variant) -> Result<Self> {
        if let Variant::MultiRate { modes } = &variant {
            self.mu = modes
                .iter()
                .map(|m| 1.0 / m.iter().map(|s| s.prob * s.mean).sum::<f64>())
                .collect();
        }
        self.variant = variant;
        self.validate()?;
        Ok(self)
    }

    pub fn num_classes(&self) -> usize {
        self.lambda.len()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.lambda.len();
        if c == 0 {
            return Err(Error::InvalidParameter(
                "at least one class is required".into(),
            ));
        }
        for (what, v) in [
            ("nu", &self.nu),
            ("mu", &self.mu),
            ("proportions", &self.proportions),
        ] {
            if v.len() != c {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: c,
                    got: v.len(),
                });
            }
        }
        for (i, &l) in self.lambda.iter().enumerate() {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "lambda[{i}] = {l} must be >= 0"
                )));
            }
        }
        for (name, v) in [("nu", &self.nu), ("mu", &self.mu)] {
            for (i, &x) in v.iter().enumerate() {
                if !(x.is_finite() && x > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "{name}[{i}] = {x} must be > 0"
                    )));
                }
            }
        }
        for (i, &p) in self.proportions.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "proportions[{i}] = {p} must lie in (0, 1]"
                )));
            }
        }
        let total: f64 = self.proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "class proportions sum to {total}, expected 1"
            )));
        }

        match &self.variant {
            Variant::Base => {}
            Variant::MultiRate { modes } => {
                if modes.len() != c {
                    return Err(Error::DimensionMismatch {
                        what: "multi-rate mode lists",
                        expected: c,
                        got: modes.len(),
                    });
                }
                for (i, list) in modes.iter().enumerate() {
                    if list.is_empty() {
                        return Err(Error::InvalidParameter(format!("class {i} has no modes")));
                    }
                    if list
                        .iter()
                        .any(|m| !(m.prob >= 0.0 && m.mean > 0.0 && m.phases >= 1))
                    {
                        return Err(Error::InvalidParameter(format!(
                            "class {i}: modes need prob >= 0, mean > 0, phases >= 1"
                        )));
                    }
                    let total: f64 = list.iter().map(|m| m.prob).sum();
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidParameter(format!(
                            "class {i}: mode probabilities sum to {total}"
                        )));
                    }
                    let u: f64 = list.iter().map(|m| m.prob * m.mean).sum();
                    if (self.mu[i] * u - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidParameter(format!(
                            "class {i}: mu = {} inconsistent with mean service time {u}",
                            self.mu[i]
                        )));
                    }
                }
            }
            Variant::QueueBased { rates } => {
                if rates.len() != c {
                    return Err(Error::DimensionMismatch {
                        what: "queue-based rate tables",
                        expected: c,
                        got: rates.len(),
                    });
                }
                for (i, r) in rates.iter().enumerate() {
                    if r.table.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                        return Err(Error::InvalidParameter(format!(
                            "class {i}: back-off rate table entries must be > 0"
                        )));
                    }
                }
            }
            Variant::FiniteBuffer { capacity } => {
                if capacity.len() != c {
                    return Err(Error::DimensionMismatch {
                        what: "buffer capacities",
                        expected: c,
                        got: capacity.len(),
                    });
                }
                if let Some(i) = capacity.iter().position(|&k| k == 0) {
                    return Err(Error::InvalidParameter(format!(
                        "class {i}: buffer capacity must be >= 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mean transmission time U_c.
    pub fn mean_service(&self, c: usize) -> f64 {
        match &self.variant {
            Variant::MultiRate { modes } => modes[c].iter().map(|m| m.prob * m.mean).sum(),
            _ => 1.0 / self.mu[c],
        }
    }

    /// σ_c = ν_c U_c (ν_c/μ_c in the base model).
    pub fn sigma(&self, c: usize) -> f64 {
        self.nu[c] * self.mean_service(c)
    }

    pub fn sigmas(&self) -> Vec<f64> {
        (0..self.num_classes()).map(|c| self.sigma(c)).collect()
    }

    /// Offered load ρ_c = λ_c U_c.
    pub fn load(&self, c: usize) -> f64 {
        self.lambda[c] * self.mean_service(c)
    }

    pub fn loads(&self) -> Vec<f64> {
        (0..self.num_classes()).map(|c| self.load(c)).collect()
    }

    /// Back-off rate of a class-`c` node holding `n` packets, at mean-field scale.
    pub fn backoff_rate(&self, c: usize, n: usize) -> f64 {
        match &self.variant {
            Variant::QueueBased { rates } => rates[c].rate(n, self.nu[c]),
            _ if n == 0 => 0.0,
            _ => self.nu[c],
        }
    }

    pub fn buffer_capacity(&self, c: usize) -> Option<usize> {
        match &self.variant {
            Variant::FiniteBuffer { capacity } => Some(capacity[c]),
            _ => None,
        }
    }
}
