//! Objective functions seen by the optimizers.

use crate::qot::QotModel;

/// Pressure of a candidate power vector (watts). Lower is better.
pub trait Pressure {
    /// Called once before iteration `n` (1-based) starts.
    fn begin_iteration(&mut self, _n: usize) {}

    fn pressure(&mut self, p: &[f64]) -> f64;
}

/// υ·J₁ under perfect monitoring.
#[derive(Debug, Clone, Copy)]
pub struct ModelPressure<'a> {
    pub model: &'a QotModel,
    pub upsilon: f64,
}

impl<'a> ModelPressure<'a> {
    pub fn new(model: &'a QotModel, upsilon: f64) -> Self {
        ModelPressure { model, upsilon }
    }
}

impl Pressure for ModelPressure<'_> {
    fn pressure(&mut self, p: &[f64]) -> f64 {
        self.upsilon * self.model.j1(p)
    }
}

/// Adapter for plain closures.
pub struct FnPressure<F>(pub F);

impl<F: FnMut(&[f64]) -> f64> Pressure for FnPressure<F> {
    fn pressure(&mut self, p: &[f64]) -> f64 {
        (self.0)(p)
    }
}

impl<P: Pressure + ?Sized> Pressure for &mut P {
    fn begin_iteration(&mut self, n: usize) {
        (**self).begin_iteration(n)
    }

    fn pressure(&mut self, p: &[f64]) -> f64 {
        (**self).pressure(p)
    }
}
