//! The ordered mass n-tuple, the system's fixed parameters.

use crate::error::SimError;

/// Masses of the n balls, bottom to top.
///
/// The cone-field machinery needs non-increasing masses; the simulator
/// itself does not, and the stable-orbit experiment deliberately runs
/// with the order inverted. The checked constructors record which
/// contract the vector satisfies.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector {
    m: Vec<f64>,
    strict: bool,
}

impl MassVector {
    /// Non-increasing masses `m1 >= m2 >= ... >= mn > 0`, n >= 2.
    pub fn new(m: Vec<f64>) -> Result<Self, SimError> {
        let mv = Self::unordered(m)?;
        if !mv.is_nonincreasing() {
            return Err(SimError::InvalidMasses(
                "masses must be non-increasing".into(),
            ));
        }
        Ok(mv)
    }

    /// Strictly decreasing masses.
    pub fn new_strict(m: Vec<f64>) -> Result<Self, SimError> {
        let mut mv = Self::new(m)?;
        if !mv.m.windows(2).all(|w| w[0] > w[1]) {
            return Err(SimError::InvalidMasses(
                "masses must be strictly decreasing".into(),
            ));
        }
        mv.strict = true;
        Ok(mv)
    }

    /// Positive masses in any order (for experiments that relax the
    /// ordering, e.g. the stable-orbit probe with m1 < m2).
    pub fn unordered(m: Vec<f64>) -> Result<Self, SimError> {
        if m.len() < 2 {
            return Err(SimError::InvalidMasses("need at least two balls".into()));
        }
        if !m.iter().all(|&x| x.is_finite() && x > 0.0) {
            return Err(SimError::InvalidMasses(
                "masses must be positive and finite".into(),
            ));
        }
        Ok(Self { m, strict: false })
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.m
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.m[i]
    }

    /// Restitution parameter of the pair `(i, i+1)` (0-based lower index):
    /// `gamma_i = (m_i - m_{i+1}) / (m_i + m_{i+1})`.
    pub fn gamma(&self, lower: usize) -> f64 {
        (self.m[lower] - self.m[lower + 1]) / (self.m[lower] + self.m[lower + 1])
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.m.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn all_equal(&self) -> bool {
        self.m.windows(2).all(|w| w[0] == w[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_enforced() {
        assert!(MassVector::new(vec![3.0, 2.0, 1.0]).is_ok());
        assert!(MassVector::new(vec![1.0, 1.0]).is_ok());
        assert!(MassVector::new(vec![1.0, 2.0]).is_err());
        assert!(MassVector::new_strict(vec![1.0, 1.0]).is_err());
        assert!(MassVector::unordered(vec![1.0, 2.0]).is_ok());
        assert!(MassVector::new(vec![1.0]).is_err());
        assert!(MassVector::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn gamma_values() {
        let m = MassVector::new(vec![3.0, 1.0]).unwrap();
        assert_eq!(m.gamma(0), 0.5);
        let eq = MassVector::new(vec![2.0, 2.0]).unwrap();
        assert_eq!(eq.gamma(0), 0.0);
    }
}
