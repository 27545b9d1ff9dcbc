//! Phase states on the energy surface and collision event records.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::SimError;
use crate::mass::MassVector;

/// Positions and velocities of the n balls at absolute time `t`.
///
/// Positions are heights above the floor, ordered `0 <= q1 <= ... <= qn`.
/// The flow is studied on the energy surface `H = 1`, but the struct does
/// not hard-wire that: validation against a tolerance happens in
/// [`PhaseState::new`], and internal code (perturbed trajectories, the
/// finite-difference oracle) uses [`PhaseState::new_unchecked`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl PhaseState {
    /// Validated constructor: ordering within `eps_ord` and energy within
    /// `energy_tol` of 1.
    pub fn new(
        q: Vec<f64>,
        v: Vec<f64>,
        t: f64,
        masses: &MassVector,
        eps_ord: f64,
        energy_tol: f64,
    ) -> Result<Self, SimError> {
        if q.len() != masses.n() || v.len() != masses.n() {
            return Err(SimError::InvalidState(format!(
                "expected {} coordinates, got {} positions / {} velocities",
                masses.n(),
                q.len(),
                v.len()
            )));
        }
        let state = Self { q, v, t };
        if state.q[0] < -eps_ord {
            return Err(SimError::InvalidState("q1 below the floor".into()));
        }
        if state.q.windows(2).any(|w| w[1] < w[0] - eps_ord) {
            return Err(SimError::InvalidState("positions not ascending".into()));
        }
        let h = state.energy(masses);
        if (h - 1.0).abs() > energy_tol {
            return Err(SimError::InvalidState(format!(
                "energy {h} outside tolerance {energy_tol} of 1"
            )));
        }
        Ok(state)
    }

    pub fn new_unchecked(q: Vec<f64>, v: Vec<f64>, t: f64) -> Self {
        Self { q, v, t }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Total energy `H = sum_i (m_i q_i + 1/2 m_i v_i^2)`.
    pub fn energy(&self, masses: &MassVector) -> f64 {
        let mut h = 0.0;
        for i in 0..self.q.len() {
            let m = masses.mass(i);
            h += m * self.q[i] + 0.5 * m * self.v[i] * self.v[i];
        }
        h
    }

    /// Momentum `p_i = m_i v_i`.
    pub fn momentum(&self, masses: &MassVector, i: usize) -> f64 {
        masses.mass(i) * self.v[i]
    }
}

/// Collision label `sigma = (i, i+1)`. `Floor` is the paper-style pair
/// `(0, 1)`; `Ball(lower)` is the pair of balls `lower` and `lower + 1`
/// with `lower` 0-based (so `Ball(0)` is the paper's `(1, 2)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CollisionLabel {
    Floor,
    Ball(usize),
}

impl CollisionLabel {
    /// Paper-style lower index: 0 for the floor, 1-based ball index otherwise.
    pub fn paper_index(&self) -> usize {
        match self {
            CollisionLabel::Floor => 0,
            CollisionLabel::Ball(lower) => lower + 1,
        }
    }

    /// Inverse of [`CollisionLabel::paper_index`]; `i` must be `< n`.
    pub fn from_paper_index(i: usize, n: usize) -> Result<Self, SimError> {
        if i == 0 {
            Ok(CollisionLabel::Floor)
        } else if i < n {
            Ok(CollisionLabel::Ball(i - 1))
        } else {
            Err(SimError::Domain(format!(
                "collision label ({i}, {}) out of range for n = {n}",
                i + 1
            )))
        }
    }

    pub fn is_floor(&self) -> bool {
        matches!(self, CollisionLabel::Floor)
    }
}

impl fmt::Display for CollisionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = self.paper_index();
        write!(f, "{}-{}", i, i + 1)
    }
}

impl FromStr for CollisionLabel {
    type Err = SimError;

    /// Parses the plain-text label `i-j` with `j = i + 1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| SimError::Domain(format!("bad collision label {s:?}")))?;
        let i: usize = a
            .trim()
            .parse()
            .map_err(|_| SimError::Domain(format!("bad collision label {s:?}")))?;
        let j: usize = b
            .trim()
            .parse()
            .map_err(|_| SimError::Domain(format!("bad collision label {s:?}")))?;
        if j != i + 1 {
            return Err(SimError::Domain(format!(
                "collision label {s:?} is not of the form i-(i+1)"
            )));
        }
        if i == 0 {
            Ok(CollisionLabel::Floor)
        } else {
            Ok(CollisionLabel::Ball(i - 1))
        }
    }
}

/// One collision: absolute time, label, and the impact datum `rho`.
///
/// `rho` is the pre-collision relative velocity `v_i - v_{i+1}` for ball
/// collisions and the outgoing velocity `v1+` for floor collisions; both
/// are strictly positive on non-singular trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionEvent {
    pub t: f64,
    pub label: CollisionLabel,
    pub rho: f64,
}

/// Distribution choices for drawing initial conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapDistribution {
    /// Gaps uniform on (0, 1).
    Uniform,
    /// Gaps exponential with unit rate.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityDistribution {
    /// Standard normal velocities.
    Normal,
    /// Velocities uniform on (-1, 1).
    Uniform,
}

/// Sampling convention for initial states on `H = 1`.
///
/// Gaps and velocities are drawn from the configured distributions and the
/// pair `(q, v)` is rescaled along `(q, v) -> (s q, sqrt(s) v)`, under
/// which `H` scales linearly, to land exactly on `H = 1`. This is a
/// documented convention, not an exact Liouville sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub gaps: GapDistribution,
    pub velocities: VelocityDistribution,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            gaps: GapDistribution::Uniform,
            velocities: VelocityDistribution::Normal,
        }
    }
}

/// Deterministic variant of [`sample_state`]: one state per seed.
pub fn sample_state_seeded(masses: &MassVector, seed: u64, cfg: &SamplingConfig) -> PhaseState {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    sample_state(masses, &mut rng, cfg)
}

/// Draws an initial state on the energy surface.
pub fn sample_state<R: Rng + ?Sized>(
    masses: &MassVector,
    rng: &mut R,
    cfg: &SamplingConfig,
) -> PhaseState {
    let n = masses.n();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let mut q = Vec::with_capacity(n);
        let mut acc = 0.0;
        for _ in 0..n {
            let gap: f64 = match cfg.gaps {
                GapDistribution::Uniform => rng.random::<f64>(),
                GapDistribution::Exponential => -rng.random::<f64>().max(f64::MIN_POSITIVE).ln(),
            };
            acc += gap;
            q.push(acc);
        }
        let v: Vec<f64> = (0..n)
            .map(|_| match cfg.velocities {
                VelocityDistribution::Normal => normal.sample(rng),
                VelocityDistribution::Uniform => rng.random::<f64>() * 2.0 - 1.0,
            })
            .collect();
        let state = PhaseState::new_unchecked(q, v, 0.0);
        let h = state.energy(masses);
        if h <= 0.0 || !h.is_finite() {
            continue;
        }
        let s = 1.0 / h;
        let q = state.q.iter().map(|x| x * s).collect();
        let v = state.v.iter().map(|x| x * s.sqrt()).collect();
        return PhaseState::new_unchecked(q, v, 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn energy_examples() {
        // potential-only configuration summing to 1
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.0, 1.0], vec![0.0, 0.0], 0.0);
        assert_eq!(s.energy(&m), 1.0);

        // kinetic-only, 1/2 + 1/2
        let s = PhaseState::new_unchecked(vec![0.0, 0.0], vec![1.0, 1.0], 0.0);
        assert_eq!(s.energy(&m), 1.0);

        // mixed three-ball configuration, checked by direct arithmetic
        let m = MassVector::new(vec![3.0, 2.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.1, 0.2, 0.3], vec![0.0, 0.0, 0.0], 0.0);
        assert!((s.energy(&m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn label_roundtrip() {
        assert_eq!("0-1".parse::<CollisionLabel>().unwrap(), CollisionLabel::Floor);
        assert_eq!("2-3".parse::<CollisionLabel>().unwrap(), CollisionLabel::Ball(1));
        assert_eq!(CollisionLabel::Ball(1).to_string(), "2-3");
        assert!("2-4".parse::<CollisionLabel>().is_err());
        assert!("x".parse::<CollisionLabel>().is_err());
    }

    #[test]
    fn sampled_states_land_on_the_energy_surface() {
        let m = MassVector::new(vec![2.0, 1.5, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let s = sample_state(&m, &mut rng, &SamplingConfig::default());
            assert!((s.energy(&m) - 1.0).abs() < 1e-12);
            assert!(s.q.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.q[0] >= 0.0);
        }
    }

    #[test]
    fn validated_constructor_rejects_bad_states() {
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        assert!(PhaseState::new(vec![1.0, 0.5], vec![0.0, 0.0], 0.0, &m, 1e-9, 1e-6).is_err());
        assert!(PhaseState::new(vec![0.0, 1.0], vec![0.0, 5.0], 0.0, &m, 1e-9, 1e-6).is_err());
        assert!(PhaseState::new(vec![0.0, 1.0], vec![0.0, 0.0], 0.0, &m, 1e-9, 1e-6).is_ok());
    }
}
