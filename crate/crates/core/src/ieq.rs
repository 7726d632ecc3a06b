//! Invariant energy quadratization of the double-well potential.
//!
//! The auxiliary variable is `U = sqrt(F(phi) + B)` and its time updates are
//! driven by `H(phi) = f(phi) / sqrt(F(phi) + B)`.

use alloc::format;

use crate::error::{Error, Result};
use crate::fespace::QuadField;
use crate::math::sqrt;

/// Physical coefficients of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    /// Mobility.
    pub gamma: f64,
    /// Viscosity.
    pub mu: f64,
    /// Mixing energy density.
    pub lambda: f64,
    /// Interface width.
    pub eps: f64,
    /// Positive shift making `F + B` strictly positive.
    pub shift: f64,
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("mu", self.mu), ("lambda", self.lambda), ("eps", self.eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.shift > 0.0 && self.shift.is_finite()) {
            return Err(Error::InvalidParameter(format!("B must be positive, got {}", self.shift)));
        }
        Ok(())
    }

    /// Double-well potential `(phi^2 - 1)^2 / (4 eps^2)`.
    #[inline]
    pub fn potential(&self, phi: f64) -> f64 {
        let a = phi * phi - 1.0;
        a * a / (4.0 * self.eps * self.eps)
    }

    /// Its derivative `(phi^3 - phi) / eps^2`.
    #[inline]
    pub fn potential_derivative(&self, phi: f64) -> f64 {
        (phi * phi * phi - phi) / (self.eps * self.eps)
    }

    /// `sqrt(F(phi) + B)`.
    pub fn shifted_root(&self, phi: f64) -> Result<f64> {
        let r = self.potential(phi) + self.shift;
        if !(r > 0.0) {
            return Err(Error::NonPositiveShift(r));
        }
        Ok(sqrt(r))
    }

    /// `f(phi) / sqrt(F(phi) + B)`.
    pub fn h(&self, phi: f64) -> Result<f64> {
        Ok(self.potential_derivative(phi) / self.shifted_root(phi)?)
    }

    /// `H` sampled pointwise.
    pub fn h_field(&self, phi: &QuadField<f64>) -> Result<QuadField<f64>> {
        let values = phi.values.iter().map(|&p| self.h(p)).collect::<Result<_>>()?;
        Ok(QuadField { n_qp: phi.n_qp, values })
    }

    /// Initial auxiliary variable `sqrt(F(phi) + B)` sampled pointwise.
    pub fn init_aux(&self, phi: &QuadField<f64>) -> Result<QuadField<f64>> {
        let values = phi.values.iter().map(|&p| self.shifted_root(p)).collect::<Result<_>>()?;
        Ok(QuadField { n_qp: phi.n_qp, values })
    }
}

/// First order update `U_base + H/2 (phi_new - phi_old)`.
pub fn aux_update_bdf1(
    base: &QuadField<f64>,
    h: &QuadField<f64>,
    phi_new: &QuadField<f64>,
    phi_old: &QuadField<f64>,
) -> QuadField<f64> {
    let values = (0..base.values.len())
        .map(|k| base.values[k] + 0.5 * h.values[k] * (phi_new.values[k] - phi_old.values[k]))
        .collect();
    QuadField { n_qp: base.n_qp, values }
}

/// Second order update `Ubar + H*/2 (3 phi_new - 4 phi_n + phi_nm1) / 3`,
/// with `Ubar = (4 U_n - U_nm1) / 3`.
pub fn aux_update_bdf2(
    base_n: &QuadField<f64>,
    base_nm1: &QuadField<f64>,
    h_star: &QuadField<f64>,
    phi_new: &QuadField<f64>,
    phi_n: &QuadField<f64>,
    phi_nm1: &QuadField<f64>,
) -> QuadField<f64> {
    let values = (0..base_n.values.len())
        .map(|k| {
            let bar = (4.0 * base_n.values[k] - base_nm1.values[k]) / 3.0;
            let d = 3.0 * phi_new.values[k] - 4.0 * phi_n.values[k] + phi_nm1.values[k];
            bar + 0.5 * h_star.values[k] * d / 3.0
        })
        .collect();
    QuadField { n_qp: base_n.n_qp, values }
}

/// Time discretization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Bdf1,
    Bdf2,
}

/// Treatment of the auxiliary variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Auxiliary variable kept at quadrature points.
    C,
    /// Auxiliary variable projected onto the phase space after each step.
    P,
    /// Starts as `C` and switches permanently to `P` on the first energy increase.
    Cp,
}

/// Representation in force for the current step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    C,
    P,
    CpBeforeSwitch,
    CpAfterSwitch,
}

impl Mode {
    pub fn initial(v: Variant) -> Mode {
        match v {
            Variant::C => Mode::C,
            Variant::P => Mode::P,
            Variant::Cp => Mode::CpBeforeSwitch,
        }
    }

    /// Whether steps in this mode project the auxiliary variable.
    pub fn projects(self) -> bool {
        matches!(self, Mode::P | Mode::CpAfterSwitch)
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::C => "C",
            Mode::P => "P",
            Mode::CpBeforeSwitch => "CP-C",
            Mode::CpAfterSwitch => "CP-P",
        }
    }
}

/// What the CP driver should do after a tentative step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchAction {
    Keep,
    /// Discard the tentative step and retake it in projected mode.
    SwitchAndRetake,
}

/// Switching rule: a tentative unprojected step whose energy exceeds the
/// previous one triggers the permanent switch.
pub fn cp_controller(prev_energy: f64, new_energy: f64, mode: Mode) -> (Mode, SwitchAction) {
    match mode {
        Mode::CpBeforeSwitch if new_energy > prev_energy => (Mode::CpAfterSwitch, SwitchAction::SwitchAndRetake),
        m => (m, SwitchAction::Keep),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhysParams {
        PhysParams { gamma: 1.0, mu: 1.0, lambda: 1.0, eps: 0.1, shift: 1.0 }
    }

    #[test]
    fn h_is_derivative_of_twice_root() {
        // d/dphi sqrt(F + B) = H / 2
        let p = params();
        let d = 1e-6;
        for phi in [-1.3, -0.4, 0.0, 0.7, 1.1] {
            let fd = (p.shifted_root(phi + d).unwrap() - p.shifted_root(phi - d).unwrap()) / (2.0 * d);
            assert!((fd - 0.5 * p.h(phi).unwrap()).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn shift_must_keep_radicand_positive() {
        let mut p = params();
        p.shift = -1e9;
        assert!(matches!(p.shifted_root(0.0), Err(Error::NonPositiveShift(_))));
    }

    #[test]
    fn controller_switches_only_on_increase() {
        assert_eq!(cp_controller(1.0, 1.0, Mode::CpBeforeSwitch), (Mode::CpBeforeSwitch, SwitchAction::Keep));
        assert_eq!(cp_controller(1.0, 1.0 + 1e-15, Mode::CpBeforeSwitch), (Mode::CpAfterSwitch, SwitchAction::SwitchAndRetake));
        assert_eq!(cp_controller(1.0, 2.0, Mode::C), (Mode::C, SwitchAction::Keep));
        assert_eq!(cp_controller(1.0, 2.0, Mode::CpAfterSwitch), (Mode::CpAfterSwitch, SwitchAction::Keep));
    }
}
