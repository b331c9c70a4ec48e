//! Problem setup: which nonlinearities act where, and how the truncated
//! far boundary is closed.
//!
//! The interior reaction `g` and the bottom-face flux law `f` draw from one
//! registry of scalar laws. Signs follow the weak form: `g` enters the
//! residual with `+`, `f` with `-`.

use crate::error::{Error, Result};
use crate::field::{Field, FieldPreset};
use crate::grid::Grid;
use crate::weights::WeightModel;

#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    Zero,
    Linear { slope: f64 },
    /// `u - u³`, the bistable law with wells at ±1.
    DoubleWell,
    /// Odd power `sign(u) |u|^q`, `q ≥ 1`.
    Power { exponent: f64 },
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<()> {
        match self {
            Nonlinearity::Linear { slope } if !slope.is_finite() => {
                Err(Error::InvalidScenario("linear law needs a finite slope".into()))
            }
            Nonlinearity::Power { exponent } if !(exponent.is_finite() && *exponent >= 1.0) => {
                Err(Error::InvalidScenario(format!(
                    "power law needs exponent >= 1 (got {exponent})"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { slope } => slope * u,
            Nonlinearity::DoubleWell => u - u * u * u,
            Nonlinearity::Power { exponent } => u.signum() * u.abs().powf(*exponent),
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { slope } => *slope,
            Nonlinearity::DoubleWell => 1.0 - 3.0 * u * u,
            Nonlinearity::Power { exponent } => {
                if *exponent == 1.0 {
                    1.0
                } else {
                    exponent * u.abs().powf(exponent - 1.0)
                }
            }
        }
    }

    /// Antiderivative vanishing at zero; the energy integrand.
    pub fn primitive(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { slope } => 0.5 * slope * u * u,
            Nonlinearity::DoubleWell => 0.5 * u * u - 0.25 * u.powi(4),
            Nonlinearity::Power { exponent } => u.abs().powf(exponent + 1.0) / (exponent + 1.0),
        }
    }
}

/// Closure of the artificial truncation boundary (lateral walls and top).
/// The bottom face `x = 0` always carries the flux law and is never here.
#[derive(Debug, Clone, PartialEq)]
pub enum FarField {
    /// Natural condition: omit the boundary term, i.e. zero conormal flux.
    NeumannZero,
    /// Pin far nodes to an analytic trace.
    Dirichlet { profile: FieldPreset },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: WeightModel,
    pub grid: Grid,
    /// Interior reaction `g(u)`, mass-lumped at nodes.
    pub reaction: Nonlinearity,
    /// Bottom-face law `f(u)`; the flux condition reads `-a ∂ₓu = f(u)`.
    pub flux: Nonlinearity,
    pub far_field: FarField,
}

impl Scenario {
    pub fn new(
        model: WeightModel,
        grid: Grid,
        reaction: Nonlinearity,
        flux: Nonlinearity,
        far_field: FarField,
    ) -> Result<Self> {
        reaction.validate()?;
        flux.validate()?;
        if grid.ny < 4 || grid.nx < 4 {
            return Err(Error::InvalidScenario(format!(
                "solving needs at least 4 cells per axis, got ny = {}, nx = {}",
                grid.ny, grid.nx
            )));
        }
        if (model.alpha - grid.alpha).abs() > 0.0 {
            return Err(Error::InvalidScenario(format!(
                "weight exponent {} disagrees with grid exponent {}",
                model.alpha, grid.alpha
            )));
        }
        if let FarField::Dirichlet { profile } = &far_field {
            profile.validate(grid.n)?;
        }
        Ok(Self { model, grid, reaction, flux, far_field })
    }

    /// Pinned value per node, `None` when the node is free. Only far nodes
    /// are ever pinned.
    pub fn pinned(&self) -> Vec<Option<f64>> {
        match &self.far_field {
            FarField::NeumannZero => vec![None; self.grid.num_nodes()],
            FarField::Dirichlet { profile } => (0..self.grid.num_nodes())
                .map(|id| {
                    if self.grid.is_far(id) {
                        let (y, x) = self.grid.node_point(id);
                        Some(profile.eval(y, x))
                    } else {
                        None
                    }
                })
                .collect(),
        }
    }

    /// Overwrite pinned nodes with their trace values.
    pub fn impose_far_field(&self, field: &mut Field) {
        for (v, pin) in field.values.iter_mut().zip(self.pinned()) {
            if let Some(p) = pin {
                *v = p;
            }
        }
    }
}
