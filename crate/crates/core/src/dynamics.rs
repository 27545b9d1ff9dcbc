//! Event-driven propagation of the falling-balls flow.
//!
//! All balls share the constant acceleration -1, so relative positions
//! evolve linearly between events: a ball pair meets after
//! `dt = (q_{i+1} - q_i) / (v_i - v_{i+1})` when the pair approaches, and
//! the floor collision time is the positive root of
//! `q1 + v1 dt - dt^2 / 2 = 0`. Collisions are resolved by the elastic
//! pair law and by reflection at the floor; everything here is pure
//! (state in, state out).

use std::collections::VecDeque;

use crate::error::SimError;
use crate::mass::MassVector;
use crate::state::{CollisionEvent, CollisionLabel, PhaseState};

/// Numerical tolerances of the event loop.
///
/// `eps_sing` and `eps_graze` implement the singularity cutoffs: the
/// flow's derivative is undefined at multiple and grazing collisions, and
/// trajectories passing closer than these thresholds are aborted rather
/// than propagated through garbage. `eps_ord` bounds how far positions
/// may leave the ordered cone before we declare a missed event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Two candidate event times closer than `eps_sing * max(1, dt)` are
    /// treated as a multiple collision.
    pub eps_sing: f64,
    /// Minimal approach speed (ball pairs) or impact speed (floor).
    pub eps_graze: f64,
    /// Position-ordering slack.
    pub eps_ord: f64,
    /// Validation tolerance on `|H - 1|` for externally supplied states.
    pub energy_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_sing: 1e-11,
            eps_graze: 1e-11,
            eps_ord: 1e-9,
            energy_tol: 1e-6,
        }
    }
}

/// Sliding-window guard against finite accumulation of collision times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccumulationGuard {
    pub max_events: usize,
    pub window: f64,
}

impl Default for AccumulationGuard {
    fn default() -> Self {
        Self {
            max_events: 10_000,
            window: 1e-6,
        }
    }
}

/// Optional energy renormalization: every `every` events the velocities
/// are rescaled to restore `H = 1` and the factor is logged. Off by
/// default so drift measurements see the raw arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormPolicy {
    pub every: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormRecord {
    pub event_index: u64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub tol: Tolerances,
    pub renorm: Option<RenormPolicy>,
    pub guard: Option<AccumulationGuard>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            renorm: None,
            guard: Some(AccumulationGuard::default()),
        }
    }
}

/// Stop criteria for [`simulate`]; whichever bound is hit first wins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_collisions: Option<u64>,
    pub max_time: Option<f64>,
}

impl StopRule {
    pub fn collisions(k: u64) -> Self {
        Self {
            max_collisions: Some(k),
            max_time: None,
        }
    }

    pub fn time(t: f64) -> Self {
        Self {
            max_collisions: None,
            max_time: Some(t),
        }
    }
}

/// Total energy of the state. Same as [`PhaseState::energy`], exposed as
/// a free function to match the rest of the operation set.
pub fn energy(state: &PhaseState, masses: &MassVector) -> f64 {
    state.energy(masses)
}

/// First positive root of `q1 + v1 t - t^2/2`, in the branch form that
/// avoids cancellation when `v1 < 0` and `q1` is small.
fn floor_time(q1: f64, v1: f64) -> f64 {
    let q1 = q1.max(0.0);
    let disc = (v1 * v1 + 2.0 * q1).sqrt();
    if v1 > 0.0 {
        v1 + disc
    } else if disc - v1 > 0.0 {
        2.0 * q1 / (disc - v1)
    } else {
        0.0 // v1 = q1 = 0: degenerate rest contact, caught as grazing later
    }
}

/// Minimal positive time to the next collision and its label.
pub fn next_event(
    state: &PhaseState,
    _masses: &MassVector,
    tol: &Tolerances,
) -> Result<(f64, CollisionLabel), SimError> {
    let n = state.n();
    if state.q[0] < -tol.eps_ord {
        return Err(SimError::OrderViolation {
            t: state.t,
            index: 0,
        });
    }

    let mut best: Option<(f64, CollisionLabel)> = None;
    let mut second: Option<f64> = None;
    let mut push = |dt: f64, label: CollisionLabel| {
        match best {
            None => best = Some((dt, label)),
            Some((b, _)) if dt < b => {
                second = Some(b);
                best = Some((dt, label));
            }
            Some(_) => match second {
                None => second = Some(dt),
                Some(s) if dt < s => second = Some(dt),
                Some(_) => {}
            },
        }
    };

    // The floor candidate always exists: the lowest ball cannot escape.
    push(floor_time(state.q[0], state.v[0]), CollisionLabel::Floor);

    for i in 0..n - 1 {
        let gap = state.q[i + 1] - state.q[i];
        if gap < -tol.eps_ord {
            return Err(SimError::OrderViolation {
                t: state.t,
                index: i + 1,
            });
        }
        let approach = state.v[i] - state.v[i + 1];
        if approach > 0.0 {
            push(gap.max(0.0) / approach, CollisionLabel::Ball(i));
        }
    }

    let (dt, label) = best.ok_or(SimError::NoEvent { t: state.t })?;
    if let Some(s) = second {
        if s - dt < tol.eps_sing * dt.max(1.0) {
            return Err(SimError::Singularity {
                t: state.t,
                dt_first: dt,
                dt_second: s,
            });
        }
    }
    Ok((dt, label))
}

/// Free fall for `dt`: `q += v dt - dt^2/2`, `v -= dt`, `t += dt`.
/// Energy is unchanged in exact arithmetic.
pub fn advance(state: &PhaseState, dt: f64, tol: &Tolerances) -> Result<PhaseState, SimError> {
    if dt.is_nan() || dt < 0.0 {
        return Err(SimError::Domain(format!("advance needs dt >= 0, got {dt}")));
    }
    let mut out = state.clone();
    let half = 0.5 * dt * dt;
    for i in 0..out.n() {
        out.q[i] += out.v[i] * dt - half;
        out.v[i] -= dt;
    }
    out.t += dt;

    if out.q[0] < -tol.eps_ord {
        return Err(SimError::OrderViolation {
            t: out.t,
            index: 0,
        });
    }
    for i in 0..out.n() - 1 {
        if out.q[i + 1] < out.q[i] - tol.eps_ord {
            return Err(SimError::OrderViolation {
                t: out.t,
                index: i + 1,
            });
        }
    }
    Ok(out)
}

/// Resolves the collision `label` at the current state.
///
/// Ball pairs follow the elastic law
/// `v_i+ = gamma v_i- + (1 - gamma) v_{i+1}-`,
/// `v_{i+1}+ = (1 + gamma) v_i- - gamma v_{i+1}-`;
/// the floor reflects `v1+ = -v1-`. Positions are pinned (pair midpoint,
/// floor zero) to stop drift-induced overlap. The emitted event carries
/// the impact datum `rho`.
pub fn apply_collision(
    state: &PhaseState,
    label: CollisionLabel,
    masses: &MassVector,
    tol: &Tolerances,
) -> Result<(PhaseState, CollisionEvent), SimError> {
    let mut out = state.clone();
    let rho = match label {
        CollisionLabel::Floor => {
            if state.q[0].abs() > tol.eps_ord {
                return Err(SimError::Domain(format!(
                    "floor collision applied at q1 = {}",
                    state.q[0]
                )));
            }
            if state.v[0] >= 0.0 {
                return Err(SimError::Domain(format!(
                    "floor collision applied with outgoing v1 = {}",
                    state.v[0]
                )));
            }
            if -state.v[0] < tol.eps_graze {
                return Err(SimError::GrazingSingularity {
                    t: state.t,
                    speed: -state.v[0],
                });
            }
            out.q[0] = 0.0;
            out.v[0] = -state.v[0];
            out.v[0]
        }
        CollisionLabel::Ball(i) => {
            if i + 1 >= state.n() {
                return Err(SimError::Domain(format!("ball pair {i} out of range")));
            }
            if (state.q[i + 1] - state.q[i]).abs() > tol.eps_ord {
                return Err(SimError::Domain(format!(
                    "ball collision ({}, {}) applied with gap {}",
                    i + 1,
                    i + 2,
                    state.q[i + 1] - state.q[i]
                )));
            }
            let approach = state.v[i] - state.v[i + 1];
            if approach <= 0.0 {
                return Err(SimError::Domain(format!(
                    "ball collision ({}, {}) applied with separating velocities",
                    i + 1,
                    i + 2
                )));
            }
            if approach < tol.eps_graze {
                return Err(SimError::GrazingSingularity {
                    t: state.t,
                    speed: approach,
                });
            }
            let mid = 0.5 * (state.q[i] + state.q[i + 1]);
            out.q[i] = mid;
            out.q[i + 1] = mid;
            let g = masses.gamma(i);
            let (vi, vj) = (state.v[i], state.v[i + 1]);
            out.v[i] = g * vi + (1.0 - g) * vj;
            out.v[i + 1] = (1.0 + g) * vi - g * vj;
            approach
        }
    };
    let event = CollisionEvent {
        t: state.t,
        label,
        rho,
    };
    Ok((out, event))
}

/// Incremental driver: repeated `next_event -> advance -> apply_collision`
/// with the singularity, accumulation, and renormalization bookkeeping.
/// [`simulate`] and the spectrum estimators are built on this.
pub struct Stepper<'a> {
    state: PhaseState,
    masses: &'a MassVector,
    opts: &'a SimOptions,
    recent: VecDeque<f64>,
    count: u64,
    zero_dt_run: usize,
    renorms: Vec<RenormRecord>,
}

impl<'a> Stepper<'a> {
    pub fn new(state: PhaseState, masses: &'a MassVector, opts: &'a SimOptions) -> Self {
        Self {
            state,
            masses,
            opts,
            recent: VecDeque::new(),
            count: 0,
            zero_dt_run: 0,
            renorms: Vec::new(),
        }
    }

    pub fn state(&self) -> &PhaseState {
        &self.state
    }

    pub fn collisions(&self) -> u64 {
        self.count
    }

    pub fn renorms(&self) -> &[RenormRecord] {
        &self.renorms
    }

    pub fn into_state(self) -> PhaseState {
        self.state
    }

    /// Time and label of the next event without advancing.
    pub fn peek(&self) -> Result<(f64, CollisionLabel), SimError> {
        next_event(&self.state, self.masses, &self.opts.tol)
    }

    /// Advances through exactly one collision.
    pub fn step(&mut self) -> Result<CollisionEvent, SimError> {
        let (dt, label) = self.peek()?;
        if dt == 0.0 {
            self.zero_dt_run += 1;
            if self.zero_dt_run > 2 * self.state.n() {
                return Err(SimError::Singularity {
                    t: self.state.t,
                    dt_first: 0.0,
                    dt_second: 0.0,
                });
            }
        } else {
            self.zero_dt_run = 0;
        }
        self.state = advance(&self.state, dt, &self.opts.tol)?;
        let (state, event) = apply_collision(&self.state, label, self.masses, &self.opts.tol)?;
        self.state = state;
        self.count += 1;

        if let Some(guard) = &self.opts.guard {
            self.recent.push_back(event.t);
            if self.recent.len() >= guard.max_events {
                let oldest = self.recent.pop_front().expect("non-empty window");
                if event.t - oldest < guard.window {
                    return Err(SimError::AccumulationSuspected {
                        t: event.t,
                        count: guard.max_events,
                        window: guard.window,
                    });
                }
            }
        }

        if let Some(renorm) = &self.opts.renorm {
            if self.count.is_multiple_of(renorm.every) {
                if let Some(factor) = self.renormalize() {
                    self.renorms.push(RenormRecord {
                        event_index: self.count,
                        factor,
                    });
                }
            }
        }
        Ok(event)
    }

    /// Moves the current state forward to absolute time `t_target`,
    /// which must lie before the next collision.
    pub fn coast_to(&mut self, t_target: f64) -> Result<(), SimError> {
        let dt = t_target - self.state.t;
        self.state = advance(&self.state, dt, &self.opts.tol)?;
        Ok(())
    }

    fn renormalize(&mut self) -> Option<f64> {
        let mut potential = 0.0;
        let mut kinetic = 0.0;
        for i in 0..self.state.n() {
            let m = self.masses.mass(i);
            potential += m * self.state.q[i];
            kinetic += 0.5 * m * self.state.v[i] * self.state.v[i];
        }
        if kinetic <= 0.0 || 1.0 - potential <= 0.0 {
            return None;
        }
        let factor = ((1.0 - potential) / kinetic).sqrt();
        for v in &mut self.state.v {
            *v *= factor;
        }
        Some(factor)
    }
}

/// Result of [`simulate`]: final state, the deterministic event log, and
/// any renormalizations that were applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub final_state: PhaseState,
    pub events: Vec<CollisionEvent>,
    pub renorms: Vec<RenormRecord>,
}

/// Propagates until the stop rule triggers. Every event log entry is
/// reproducible from its predecessor via `next_event`, `advance`,
/// `apply_collision`.
pub fn simulate(
    state: &PhaseState,
    masses: &MassVector,
    stop: StopRule,
    opts: &SimOptions,
) -> Result<SimRun, SimError> {
    let mut stepper = Stepper::new(state.clone(), masses, opts);
    let mut events = Vec::new();
    loop {
        if let Some(max) = stop.max_collisions {
            if stepper.collisions() >= max {
                break;
            }
        }
        if let Some(t_max) = stop.max_time {
            let (dt, _) = stepper.peek()?;
            if stepper.state().t + dt > t_max {
                stepper.coast_to(t_max)?;
                break;
            }
        } else if stop.max_collisions.is_none() {
            return Err(SimError::Domain("stop rule with no bound".into()));
        }
        events.push(stepper.step()?);
    }
    let renorms = stepper.renorms().to_vec();
    Ok(SimRun {
        final_state: stepper.into_state(),
        events,
        renorms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn next_event_ball_pair() {
        // (2 - 1) / (2 - 0) = 0.5, well before the floor time 2 + sqrt(6)
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![1.0, 2.0], vec![2.0, 0.0], 0.0);
        let (dt, label) = next_event(&s, &m, &tol()).unwrap();
        assert!((dt - 0.5).abs() < 1e-15);
        assert_eq!(label, CollisionLabel::Ball(0));
    }

    #[test]
    fn next_event_floor_root() {
        // zero relative velocity kills the ball event; the positive root of
        // 1 + t - t^2/2 is 1 + sqrt(3)
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![1.0, 2.0], vec![1.0, 1.0], 0.0);
        let (dt, label) = next_event(&s, &m, &tol()).unwrap();
        assert!((dt - (1.0 + 3.0f64.sqrt())).abs() < 1e-14);
        assert_eq!(label, CollisionLabel::Floor);
        // substitution check of the root
        let r = 1.0 + s.v[0] * dt - 0.5 * dt * dt;
        assert!(r.abs() < 1e-14);
    }

    #[test]
    fn next_event_symmetric_flight() {
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        for c in [0.3, 1.0, 2.5] {
            let s = PhaseState::new_unchecked(vec![0.0, 1.0], vec![c, c], 0.0);
            let (dt, label) = next_event(&s, &m, &tol()).unwrap();
            assert!((dt - 2.0 * c).abs() < 1e-14);
            assert_eq!(label, CollisionLabel::Floor);
        }
    }

    #[test]
    fn advance_kinematics() {
        let s = PhaseState::new_unchecked(vec![0.0, 1.0], vec![1.0, 1.0], 0.0);
        let out = advance(&s, 1.0, &tol()).unwrap();
        assert_eq!(out.q, vec![0.5, 1.5]);
        assert_eq!(out.v, vec![0.0, 0.0]);
        assert_eq!(out.t, 1.0);

        let id = advance(&s, 0.0, &tol()).unwrap();
        assert_eq!(id, s);

        // positions meet exactly at the collision instant of the pair test
        let s = PhaseState::new_unchecked(vec![1.0, 2.0], vec![2.0, 0.0], 0.0);
        let out = advance(&s, 0.5, &tol()).unwrap();
        assert!((out.q[0] - 1.875).abs() < 1e-15);
        assert!((out.q[1] - 1.875).abs() < 1e-15);
        assert!((out.v[0] - 1.5).abs() < 1e-15);
        assert!((out.v[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn advance_conserves_energy() {
        let m = MassVector::new(vec![2.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.1, 0.4], vec![0.6, -0.2], 0.0);
        let h0 = s.energy(&m);
        let out = advance(&s, 0.37, &tol()).unwrap();
        assert!((out.energy(&m) - h0).abs() < 1e-14);
    }

    #[test]
    fn equal_mass_collision_swaps_velocities() {
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![1.0, 1.0], vec![1.0, -1.0], 0.0);
        let (out, ev) = apply_collision(&s, CollisionLabel::Ball(0), &m, &tol()).unwrap();
        assert_eq!(out.v, vec![-1.0, 1.0]);
        assert_eq!(ev.rho, 2.0);
    }

    #[test]
    fn unequal_mass_collision_conserves_momentum_and_energy() {
        // gamma = 1/2: (1, -1) -> (0, 2)
        let m = MassVector::new(vec![3.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![1.0, 1.0], vec![1.0, -1.0], 0.0);
        let (out, _) = apply_collision(&s, CollisionLabel::Ball(0), &m, &tol()).unwrap();
        assert_eq!(out.v, vec![0.0, 2.0]);
        let p_before = 3.0 * 1.0 - 1.0;
        let p_after = 3.0 * out.v[0] + 1.0 * out.v[1];
        assert_eq!(p_before, p_after);
        let ke_before = 0.5 * 3.0 + 0.5;
        let ke_after = 0.5 * 3.0 * out.v[0] * out.v[0] + 0.5 * out.v[1] * out.v[1];
        assert_eq!(ke_before, ke_after);
    }

    #[test]
    fn floor_collision_reflects() {
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.0, 1.0], vec![-2.0, 0.0], 0.0);
        let (out, ev) = apply_collision(&s, CollisionLabel::Floor, &m, &tol()).unwrap();
        assert_eq!(out.v[0], 2.0);
        assert_eq!(ev.rho, 2.0);
        assert_eq!(out.q[0], 0.0);
    }

    #[test]
    fn grazing_collisions_are_singular() {
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.0, 1.0], vec![-1e-13, 0.0], 0.0);
        assert!(matches!(
            apply_collision(&s, CollisionLabel::Floor, &m, &tol()),
            Err(SimError::GrazingSingularity { .. })
        ));
    }

    #[test]
    fn simultaneous_candidates_are_singular() {
        // ball collision tuned to land exactly on the floor collision time
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let t_floor = 1.0 + 3.0f64.sqrt();
        let v2 = 1.0 - 1.0 / t_floor;
        let s = PhaseState::new_unchecked(vec![1.0, 2.0], vec![1.0, v2], 0.0);
        assert!(matches!(
            next_event(&s, &m, &tol()),
            Err(SimError::Singularity { .. })
        ));
    }

    #[test]
    fn simulate_zero_collisions_is_identity() {
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.0, 0.5], vec![0.5, 0.5], 0.0);
        let run = simulate(&s, &m, StopRule::collisions(0), &SimOptions::default()).unwrap();
        assert_eq!(run.final_state, s);
        assert!(run.events.is_empty());
    }

    #[test]
    fn simulate_respects_max_time() {
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.0, 1.0], vec![0.5, 0.5], 0.0);
        let run = simulate(&s, &m, StopRule::time(0.25), &SimOptions::default()).unwrap();
        assert!(run.events.is_empty());
        assert_eq!(run.final_state.t, 0.25);
    }

    #[test]
    fn event_log_replays_step_by_step() {
        let m = MassVector::new(vec![2.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.2, 0.5], vec![0.3, -0.4], 0.0);
        let opts = SimOptions::default();
        let run = simulate(&s, &m, StopRule::collisions(50), &opts).unwrap();
        assert_eq!(run.events.len(), 50);

        let mut cur = s;
        for ev in &run.events {
            let (dt, label) = next_event(&cur, &m, &opts.tol).unwrap();
            cur = advance(&cur, dt, &opts.tol).unwrap();
            let (next, replayed) = apply_collision(&cur, label, &m, &opts.tol).unwrap();
            assert_eq!(&replayed, ev);
            cur = next;
        }
        assert_eq!(cur, run.final_state);
    }

    #[test]
    fn long_run_energy_drift_stays_small() {
        let m = MassVector::new(vec![2.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.1, 0.3], vec![0.6, 0.3], 0.0);
        let h0 = s.energy(&m);
        assert!((h0 - 1.0).abs() < 0.1);
        let run = simulate(&s, &m, StopRule::collisions(10_000), &SimOptions::default()).unwrap();
        assert!((run.final_state.energy(&m) - h0).abs() < 1e-9);
    }

    #[test]
    fn renormalization_restores_unit_energy() {
        let m = MassVector::new(vec![2.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.1, 0.3], vec![0.5, 0.2], 0.0);
        let opts = SimOptions {
            renorm: Some(RenormPolicy { every: 100 }),
            ..SimOptions::default()
        };
        let run = simulate(&s, &m, StopRule::collisions(1000), &opts).unwrap();
        assert_eq!(run.renorms.len(), 10);
        assert!((run.final_state.energy(&m) - 1.0).abs() < 1e-10);
    }
}
