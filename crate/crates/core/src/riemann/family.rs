//! Conformal perturbations `g_t = (1 + t φ) g₀` by a nonnegative bump `φ`.

use super::manifold::{ChartManifold, ChartPoint, ConformalFactor};
use crate::error::{GeonetError, Result};

/// Smooth bump `amplitude · exp(1 - 1/(1 - ρ²))`, `ρ = |x - center| / radius` measured
/// in the coordinates of the center's chart. Supported in the coordinate ball of `radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub center: ChartPoint,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: ChartPoint, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0) || !(amplitude > 0.0) {
            return Err(GeonetError::InvalidInput("bump radius and amplitude must be positive".into()));
        }
        Ok(Bump { center, radius, amplitude })
    }

    pub fn value(&self, m: &ChartManifold, p: &ChartPoint) -> f64 {
        let Some(q) = m.to_chart(p, self.center.chart) else {
            // unreachable from the center chart: far from the support
            return 0.0;
        };
        let d = m.chart(self.center.chart).wrap_delta(q.x - self.center.x);
        let rho2 = d.norm_squared() / (self.radius * self.radius);
        if rho2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - rho2)).exp()
        }
    }

    pub fn max_value(&self) -> f64 {
        self.amplitude
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BumpProfile {
    Zero,
    /// φ ≡ c everywhere. Not compactly supported; only meaningful as a test family.
    Constant(f64),
    Smooth(Bump),
}

impl BumpProfile {
    pub fn value(&self, m: &ChartManifold, p: &ChartPoint) -> f64 {
        match self {
            BumpProfile::Zero => 0.0,
            BumpProfile::Constant(c) => *c,
            BumpProfile::Smooth(b) => b.value(m, p),
        }
    }

    pub fn max_value(&self) -> f64 {
        match self {
            BumpProfile::Zero => 0.0,
            BumpProfile::Constant(c) => *c,
            BumpProfile::Smooth(b) => b.max_value(),
        }
    }
}

/// One-parameter family `t ↦ (1 + tφ) g₀` for `t ∈ [0, t_max]`.
#[derive(Clone, Debug)]
pub struct MetricFamily {
    base: ChartManifold,
    bump: BumpProfile,
    t_max: f64,
}

impl MetricFamily {
    pub fn new(base: ChartManifold, bump: BumpProfile, t_max: f64) -> Result<Self> {
        if !(t_max >= 0.0) {
            return Err(GeonetError::InvalidInput("t_max must be nonnegative".into()));
        }
        if let BumpProfile::Constant(c) = bump {
            if c < 0.0 {
                return Err(GeonetError::InvalidInput("bump must be nonnegative".into()));
            }
        }
        Ok(MetricFamily { base, bump, t_max })
    }

    pub fn base(&self) -> &ChartManifold {
        &self.base
    }

    pub fn bump(&self) -> &BumpProfile {
        &self.bump
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// The metric `g_t` as a manifold on the base atlas.
    pub fn at(&self, t: f64) -> ChartManifold {
        if t == 0.0 || self.bump == BumpProfile::Zero {
            return self.base.clone();
        }
        self.base.with_conformal(ConformalFactor::Bump { t, profile: self.bump })
    }
}
