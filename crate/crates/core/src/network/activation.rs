use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

/// Elementwise nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Linear,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn value(self, a: f64) -> f64 {
        match self {
            Activation::Linear => a,
            Activation::Relu => a.max(0.0),
            Activation::Tanh => a.tanh(),
        }
    }

    /// Derivative; Relu uses 0 at the kink.
    #[inline]
    pub fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = a.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn apply(self, a: &Matrix) -> Matrix {
        match self {
            Activation::Linear => a.clone(),
            _ => a.map(|v| self.value(v)),
        }
    }

    pub fn derivative_of(self, a: &Matrix) -> Matrix {
        a.map(|v| self.derivative(v))
    }
}
