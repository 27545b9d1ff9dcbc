//! The derivative cocycle of the flow in (δh, δv) coordinates.
//!
//! With `δh_i = m_i δq_i + m_i v_i δv_i` the inter-collision derivative is
//! the identity, so the cocycle is the ordered product of per-collision
//! maps. A ball collision acts by
//! `δh+ = R*_i [δh- + S_i δv-]`, `δv+ = R_i δv-`, where `R_i` is the
//! identity apart from the 2x2 block `[[γ, 1-γ], [1+γ, -γ]]` at the pair
//! and `S_i` is zero apart from `[[α, -α], [-α, α]]` with
//! `α_i = 2 m_i m_{i+1} (m_i - m_{i+1}) / (m_i + m_{i+1})^2 · ρ`.
//! A floor collision is the shear `δv_1 += 2 δh_1 / (m_1 v_1+)`.
//! All maps preserve the symplectic form `ω = Σ δh_i ∧ δv_i`, and for
//! non-increasing masses they never decrease `Q_1 = Σ δh_i δv_i`.

use crate::error::SimError;
use crate::mass::MassVector;
use crate::state::{CollisionEvent, CollisionLabel};

/// Tangent vector in the full 2n-dimensional (δh, δv) chart.
///
/// The energy-surface reduction `Σ δh_i = 0` is enforced on validated
/// input and preserved exactly by the collision maps; the corresponding
/// δv sum is *not* preserved by the floor shear and is only monitored.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub dh: Vec<f64>,
    pub dv: Vec<f64>,
}

impl TangentVector {
    /// Validated constructor: requires `|Σ δh| <= 1e-12 * max(norm, eps)`.
    pub fn new(dh: Vec<f64>, dv: Vec<f64>) -> Result<Self, SimError> {
        if dh.len() != dv.len() {
            return Err(SimError::Domain("mismatched tangent components".into()));
        }
        let tv = Self { dh, dv };
        let scale = tv.norm().max(f64::MIN_POSITIVE);
        if tv.sum_dh().abs() > 1e-12 * scale {
            return Err(SimError::Domain(format!(
                "tangent vector violates the reduction sum(dh) = 0 (got {})",
                tv.sum_dh()
            )));
        }
        Ok(tv)
    }

    pub fn new_unchecked(dh: Vec<f64>, dv: Vec<f64>) -> Self {
        Self { dh, dv }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            dh: vec![0.0; n],
            dv: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.dh.len()
    }

    pub fn sum_dh(&self) -> f64 {
        self.dh.iter().sum()
    }

    pub fn sum_dv(&self) -> f64 {
        self.dv.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n() {
            s += self.dh[i] * other.dh[i] + self.dv[i] * other.dv[i];
        }
        s
    }

    pub fn scale(&mut self, c: f64) {
        for x in self.dh.iter_mut().chain(self.dv.iter_mut()) {
            *x *= c;
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Self) {
        for i in 0..self.n() {
            self.dh[i] += c * other.dh[i];
            self.dv[i] += c * other.dv[i];
        }
    }

    /// Configuration-space components `δq_i = δh_i / m_i - v_i δv_i`,
    /// given the base point's velocities.
    pub fn dq(&self, masses: &MassVector, v: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.dh[i] / masses.mass(i) - v[i] * self.dv[i])
            .collect()
    }

    /// Builds (δh, δv) from configuration components at the base point:
    /// `δh_i = m_i δq_i + m_i v_i δv_i`.
    pub fn from_dq_dv(dq: &[f64], dv: &[f64], masses: &MassVector, v: &[f64]) -> Self {
        let dh = (0..dq.len())
            .map(|i| masses.mass(i) * dq[i] + masses.mass(i) * v[i] * dv[i])
            .collect();
        Self { dh, dv: dv.to_vec() }
    }
}

/// The monotone quadratic form `Q_1 = Σ δh_i δv_i`.
pub fn q_form(tv: &TangentVector) -> f64 {
    let mut s = 0.0;
    for i in 0..tv.n() {
        s += tv.dh[i] * tv.dv[i];
    }
    s
}

/// Canonical symplectic form `ω(u, w) = Σ (δh_i(u) δv_i(w) - δv_i(u) δh_i(w))`.
pub fn symplectic_form(u: &TangentVector, w: &TangentVector) -> f64 {
    let mut s = 0.0;
    for i in 0..u.n() {
        s += u.dh[i] * w.dv[i] - u.dv[i] * w.dh[i];
    }
    s
}

/// Per-collision linear map, stored structurally (2x2 blocks / rank-one
/// shear) so application is O(1) per vector regardless of n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollisionDerivative {
    Ball {
        /// 0-based lower index of the pair.
        lower: usize,
        gamma: f64,
        alpha: f64,
    },
    Floor {
        /// `2 / (m_1 v_1+)`.
        shear: f64,
    },
}

impl CollisionDerivative {
    pub fn apply_in_place(&self, tv: &mut TangentVector) {
        match *self {
            CollisionDerivative::Ball { lower, gamma, alpha } => {
                let i = lower;
                let (hi, hj) = (tv.dh[i], tv.dh[i + 1]);
                let (vi, vj) = (tv.dv[i], tv.dv[i + 1]);
                // R* [dh + S dv] on the block, with S = [[a, -a], [-a, a]]
                let si = hi + alpha * (vi - vj);
                let sj = hj - alpha * (vi - vj);
                tv.dh[i] = gamma * si + (1.0 + gamma) * sj;
                tv.dh[i + 1] = (1.0 - gamma) * si - gamma * sj;
                // R dv on the block
                tv.dv[i] = gamma * vi + (1.0 - gamma) * vj;
                tv.dv[i + 1] = (1.0 + gamma) * vi - gamma * vj;
            }
            CollisionDerivative::Floor { shear } => {
                tv.dv[0] += shear * tv.dh[0];
            }
        }
    }

    pub fn apply(&self, tv: &TangentVector) -> TangentVector {
        let mut out = tv.clone();
        self.apply_in_place(&mut out);
        out
    }

    /// The exact Q-form increment produced by this map at `tv`:
    /// `α (δv_i - δv_{i+1})^2` for ball maps, `2 δh_1^2 / (m_1 v_1+)`
    /// (i.e. `shear · δh_1^2`) for floor maps.
    pub fn q_increment(&self, tv: &TangentVector) -> f64 {
        match *self {
            CollisionDerivative::Ball { lower, alpha, .. } => {
                let d = tv.dv[lower] - tv.dv[lower + 1];
                alpha * d * d
            }
            CollisionDerivative::Floor { shear } => shear * tv.dh[0] * tv.dh[0],
        }
    }
}

/// Derivative of a ball collision `(i, i+1)` (0-based `lower`) with
/// pre-collision relative velocity `rho > 0`.
pub fn ball_derivative(
    lower: usize,
    rho: f64,
    masses: &MassVector,
) -> Result<CollisionDerivative, SimError> {
    if lower + 1 >= masses.n() {
        return Err(SimError::Domain(format!(
            "ball pair {lower} out of range for n = {}",
            masses.n()
        )));
    }
    if rho.is_nan() || rho <= 0.0 {
        return Err(SimError::Domain(format!(
            "ball derivative needs rho > 0, got {rho}"
        )));
    }
    let (mi, mj) = (masses.mass(lower), masses.mass(lower + 1));
    let sum = mi + mj;
    let alpha = 2.0 * mi * mj * (mi - mj) / (sum * sum) * rho;
    Ok(CollisionDerivative::Ball {
        lower,
        gamma: masses.gamma(lower),
        alpha,
    })
}

/// Derivative of a floor collision with outgoing velocity `v1_plus > 0`.
pub fn floor_derivative(
    v1_plus: f64,
    masses: &MassVector,
) -> Result<CollisionDerivative, SimError> {
    if v1_plus.is_nan() || v1_plus <= 0.0 {
        return Err(SimError::Domain(format!(
            "floor derivative needs v1+ > 0, got {v1_plus}"
        )));
    }
    Ok(CollisionDerivative::Floor {
        shear: 2.0 / (masses.mass(0) * v1_plus),
    })
}

/// Derivative of a logged collision event.
pub fn derivative_for(
    event: &CollisionEvent,
    masses: &MassVector,
) -> Result<CollisionDerivative, SimError> {
    match event.label {
        CollisionLabel::Ball(lower) => ball_derivative(lower, event.rho, masses),
        CollisionLabel::Floor => floor_derivative(event.rho, masses),
    }
}

/// Pushes a frame of tangent vectors through the ordered event list.
/// The cocycle is the identity between collisions, so this is the whole
/// derivative of the flow over the segment.
pub fn push_frame(
    frame: &[TangentVector],
    events: &[CollisionEvent],
    masses: &MassVector,
) -> Result<Vec<TangentVector>, SimError> {
    let mut out: Vec<TangentVector> = frame.to_vec();
    for ev in events {
        let d = derivative_for(ev, masses)?;
        for tv in &mut out {
            d.apply_in_place(tv);
        }
    }
    Ok(out)
}
