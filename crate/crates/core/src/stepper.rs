//! Classical RK4 time integration with fixed or CFL-limited steps.

use crate::error::{Error, Result};

/// Default CFL number for adaptive stepping.
pub const DEFAULT_CFL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    Fixed { dt: f64 },
    Adaptive { cfl: f64 },
}

/// Step-size policy plus optional hyperdiffusion `-ν_h (-Δ)^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStepper {
    pub control: StepControl,
    pub hyperdiffusion: f64,
    pub order: u32,
}

/// Outcome of a step-size choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepChoice {
    pub dt: f64,
    /// CFL number actually used, `dt * max|u| / h`.
    pub courant: f64,
    /// Fixed step exceeding the stability target; recorded, not fatal.
    pub cfl_exceeded: bool,
}

impl TimeStepper {
    pub fn fixed(dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            control: StepControl::Fixed { dt },
            hyperdiffusion: 0.0,
            order: 4,
        })
    }

    pub fn adaptive(cfl: f64) -> Result<Self> {
        if !(cfl.is_finite() && cfl > 0.0) {
            return Err(Error::Precondition(format!("CFL number must be positive, got {cfl}")));
        }
        Ok(Self {
            control: StepControl::Adaptive { cfl },
            hyperdiffusion: 0.0,
            order: 4,
        })
    }

    pub fn with_hyperdiffusion(mut self, coefficient: f64, order: u32) -> Result<Self> {
        if !(coefficient.is_finite() && coefficient >= 0.0) {
            return Err(Error::Precondition(format!(
                "hyperdiffusion coefficient must be >= 0, got {coefficient}"
            )));
        }
        if order == 0 {
            return Err(Error::Precondition("hyperdiffusion order must be >= 1".into()));
        }
        self.hyperdiffusion = coefficient;
        self.order = order;
        Ok(self)
    }

    pub fn is_inviscid(&self) -> bool {
        self.hyperdiffusion == 0.0
    }

    /// Picks the next step, never overshooting `remaining`.
    pub fn choose(&self, max_speed: f64, h: f64, remaining: f64) -> StepChoice {
        let (mut dt, target) = match self.control {
            StepControl::Fixed { dt } => (dt, DEFAULT_CFL),
            StepControl::Adaptive { cfl } => {
                let dt = if max_speed > 0.0 { cfl * h / max_speed } else { f64::INFINITY };
                (dt, cfl)
            }
        };
        if remaining < dt {
            dt = remaining;
        } else if remaining < 1.5 * dt && !matches!(self.control, StepControl::Fixed { .. }) {
            // Split the tail evenly instead of leaving a sliver step.
            dt = 0.5 * remaining;
        }
        // Absorb round-off so repeated additions land exactly on the target.
        if remaining - dt < 1e-12 * remaining.max(1.0) {
            dt = remaining;
        }
        let courant = dt * max_speed / h;
        StepChoice {
            dt,
            courant,
            cfl_exceeded: courant > target * (1.0 + 1e-12),
        }
    }
}

/// Multi-component state as flat arrays.
pub type State = Vec<Vec<f64>>;

fn axpy(y: &State, a: f64, k: &State) -> State {
    y.iter()
        .zip(k)
        .map(|(yc, kc)| yc.iter().zip(kc).map(|(p, q)| p + a * q).collect())
        .collect()
}

/// One classical RK4 step of `dy/dt = f(y)`.
pub fn rk4<F>(y: &State, dt: f64, f: F) -> Result<State>
where
    F: Fn(&State) -> Result<State>,
{
    let k1 = f(y)?;
    let k2 = f(&axpy(y, 0.5 * dt, &k1))?;
    let k3 = f(&axpy(y, 0.5 * dt, &k2))?;
    let k4 = f(&axpy(y, dt, &k3))?;
    Ok(y.iter()
        .enumerate()
        .map(|(c, yc)| {
            yc.iter()
                .enumerate()
                .map(|(i, v)| v + dt / 6.0 * (k1[c][i] + 2.0 * k2[c][i] + 2.0 * k3[c][i] + k4[c][i]))
                .collect()
        })
        .collect())
}
