//! Independent brute-force oracles backing the test suite.
//!
//! These deliberately share no code with the implementations they
//! validate: event times come from sign scans plus bisection instead of
//! the closed forms, tangent maps from finite differences of the
//! nonlinear flow, and the equal-mass system from n non-interacting
//! bouncing particles. Simplicity over speed throughout.

use crate::dynamics::{advance, simulate, SimOptions, Stepper, StopRule};
use crate::error::OracleError;
use crate::mass::MassVector;
use crate::sequence::SymbolicSequence;
use crate::state::{CollisionEvent, CollisionLabel, PhaseState};
use crate::sufficiency::{classify_sequence, Dichotomy};
use crate::tangent::TangentVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub bisection_tol: f64,
    pub fd_epsilon: f64,
    pub enum_max_len: usize,
    pub ghost_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            bisection_tol: 1e-12,
            fd_epsilon: 1e-7,
            enum_max_len: 6,
            ghost_tol: 1e-9,
        }
    }
}

/// Gap functions of the state: ball gaps are linear in t, the floor gap
/// quadratic, so each has exactly one downward crossing and a coarse
/// scan cannot skip it.
fn gap_at(state: &PhaseState, which: usize, t: f64) -> f64 {
    if which == 0 {
        state.q[0] + state.v[0] * t - 0.5 * t * t
    } else {
        let i = which - 1;
        (state.q[i + 1] - state.q[i]) + (state.v[i + 1] - state.v[i]) * t
    }
}

/// First collision time and label located by scan + bisection on the gap
/// functions, never by the closed forms.
pub fn bisect_collision_time(
    state: &PhaseState,
    masses: &MassVector,
    cfg: &OracleConfig,
) -> Result<(f64, CollisionLabel), OracleError> {
    let n = masses.n();
    // Horizon: grow until the floor gap is strictly negative at the end;
    // the first crossing of anything lies inside.
    let mut bound = 1.0;
    while gap_at(state, 0, bound) > -1e-12 && bound < 1e9 {
        bound *= 2.0;
    }

    let mut best: Option<(f64, usize)> = None;
    for which in 0..n {
        let steps = 64;
        let h = bound / steps as f64;
        let mut a = 0.0;
        let mut fa = gap_at(state, which, a);
        for k in 1..=steps {
            let b = h * k as f64;
            let fb = gap_at(state, which, b);
            if fa >= 0.0 && fb < 0.0 {
                let (mut lo, mut hi) = (a, b);
                // capped: an unreachable tolerance ends at f64 resolution
                for _ in 0..200 {
                    if hi - lo <= cfg.bisection_tol {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if gap_at(state, which, mid) >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t = 0.5 * (lo + hi);
                match best {
                    Some((tb, _)) if tb <= t => {}
                    _ => best = Some((t, which)),
                }
                break;
            }
            a = b;
            fa = fb;
        }
    }
    let (dt, which) = best.ok_or_else(|| OracleError::Domain("no crossing found".into()))?;
    let label = if which == 0 {
        CollisionLabel::Floor
    } else {
        CollisionLabel::Ball(which - 1)
    };
    Ok((dt, label))
}

/// Finite-difference image of the tangent vector `u` over the segment
/// realized by `events` starting at `x0`.
///
/// Converts (δh, δv) to (δq, δv) at the base point, perturbs by `eps`
/// (one-sided, to avoid straddling singular manifolds), flows both
/// trajectories to a common time strictly between the segment's last
/// event and the next one, and converts the difference back.
pub fn finite_difference_cocycle(
    x0: &PhaseState,
    masses: &MassVector,
    events: &[CollisionEvent],
    u: &TangentVector,
    eps: f64,
    opts: &SimOptions,
) -> Result<TangentVector, OracleError> {
    if events.is_empty() {
        return Err(OracleError::Domain("empty segment".into()));
    }
    // replay the base segment
    let mut stepper = Stepper::new(x0.clone(), masses, opts);
    for (k, expected) in events.iter().enumerate() {
        let ev = stepper.step()?;
        if ev.label != expected.label {
            return Err(OracleError::Domain(format!(
                "event list does not belong to the base trajectory (index {k})"
            )));
        }
    }
    let (dt_next, _) = stepper.peek()?;
    let t_target = stepper.state().t + 0.5 * dt_next;
    let horizon = t_target - x0.t;
    let mut base_end = stepper.into_state();
    base_end = advance(&base_end, t_target - base_end.t, &opts.tol)?;

    // perturb along u and flow for the same duration
    let dq = u.dq(masses, &x0.v);
    let q: Vec<f64> = x0.q.iter().zip(&dq).map(|(q, d)| q + eps * d).collect();
    let v: Vec<f64> = x0.v.iter().zip(&u.dv).map(|(v, d)| v + eps * d).collect();
    let perturbed = PhaseState::new_unchecked(q, v, x0.t);
    let run = simulate(&perturbed, masses, StopRule::time(x0.t + horizon), opts)?;
    if run.events.len() != events.len() {
        return Err(OracleError::SequenceChanged {
            at: run.events.len().min(events.len()),
        });
    }
    for (k, (a, b)) in run.events.iter().zip(events).enumerate() {
        if a.label != b.label {
            return Err(OracleError::SequenceChanged { at: k });
        }
    }

    let n = masses.n();
    let dq_t: Vec<f64> = (0..n)
        .map(|i| (run.final_state.q[i] - base_end.q[i]) / eps)
        .collect();
    let dv_t: Vec<f64> = (0..n)
        .map(|i| (run.final_state.v[i] - base_end.v[i]) / eps)
        .collect();
    Ok(TangentVector::from_dq_dv(&dq_t, &dv_t, masses, &base_end.v))
}

/// One non-interacting bouncing particle: parabolic arcs split at floor
/// bounces, kept as explicit segments so heights at any time inside the
/// window are closed-form.
#[derive(Debug, Clone)]
struct GhostPath {
    /// (start time, height, velocity) per arc.
    segs: Vec<(f64, f64, f64)>,
}

impl GhostPath {
    fn build(t0: f64, q0: f64, v0: f64, t_end: f64) -> Self {
        // an initial incoming contact reflects immediately
        let (q0, v0) = if q0 <= 0.0 && v0 < 0.0 {
            (0.0, -v0)
        } else {
            (q0, v0)
        };
        let mut segs = vec![(t0, q0, v0)];
        let (mut t, mut q, mut v) = (t0, q0, v0);
        loop {
            let disc = (v * v + 2.0 * q.max(0.0)).sqrt();
            let s = if v > 0.0 {
                v + disc
            } else if disc - v > 0.0 {
                2.0 * q.max(0.0) / (disc - v)
            } else {
                break; // resting contact
            };
            if s <= 0.0 || t + s > t_end {
                break;
            }
            t += s;
            v = s - v; // reflected velocity: -(v - s)
            q = 0.0;
            segs.push((t, q, v));
        }
        Self { segs }
    }

    fn seg_at(&self, t: f64) -> (f64, f64, f64) {
        match self.segs.binary_search_by(|seg| seg.0.total_cmp(&t)) {
            Ok(k) => self.segs[k],
            Err(0) => self.segs[0],
            Err(k) => self.segs[k - 1],
        }
    }

    fn position_at(&self, t: f64) -> f64 {
        let (t0, q0, v0) = self.seg_at(t);
        let s = t - t0;
        q0 + v0 * s - 0.5 * s * s
    }
}

/// The equal-mass system as the sorted superposition of independent
/// bouncing particles: with the labels swapped at each pair collision,
/// the interacting flow and this one coincide.
#[derive(Debug, Clone)]
pub struct GhostTrajectory {
    paths: Vec<GhostPath>,
    pub t_start: f64,
    pub t_end: f64,
}

/// Builds the ghost system over `[state.t, state.t + duration]`.
/// All masses must be equal.
pub fn ghost_trajectory(
    state: &PhaseState,
    masses: &MassVector,
    duration: f64,
) -> Result<GhostTrajectory, OracleError> {
    if !masses.all_equal() {
        return Err(OracleError::Domain(
            "ghost trajectory needs equal masses".into(),
        ));
    }
    let t_end = state.t + duration;
    let paths = (0..state.n())
        .map(|i| GhostPath::build(state.t, state.q[i], state.v[i], t_end))
        .collect();
    Ok(GhostTrajectory {
        paths,
        t_start: state.t,
        t_end,
    })
}

impl GhostTrajectory {
    /// Sorted particle heights at time t.
    pub fn sorted_positions_at(&self, t: f64) -> Vec<f64> {
        let mut q: Vec<f64> = self.paths.iter().map(|p| p.position_at(t)).collect();
        q.sort_by(f64::total_cmp);
        q
    }

    /// Floor bounce times of all ghosts, merged and sorted.
    pub fn bounce_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .paths
            .iter()
            .flat_map(|p| p.segs.iter().skip(1).map(|s| s.0))
            .collect();
        times.sort_by(f64::total_cmp);
        times
    }

    /// Crossing time of the ghosts ranked `rank` and `rank + 1` near `t`:
    /// the instant the sorted order swaps, located by bracketed bisection
    /// on the height difference.
    pub fn crossing_near(&self, t: f64, rank: usize) -> Option<f64> {
        let ids = self.sorted_ids_at(t);
        let (a, b) = (ids[rank], ids[rank + 1]);
        let f = |s: f64| self.paths[a].position_at(s) - self.paths[b].position_at(s);
        let mut w = 1e-12;
        while w <= 0.25 {
            let (lo, hi) = ((t - w).max(self.t_start), (t + w).min(self.t_end));
            if f(lo) * f(hi) < 0.0 {
                let (mut lo, mut hi) = (lo, hi);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(lo) * f(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo < 1e-15 * t.abs().max(1.0) {
                        break;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            w *= 4.0;
        }
        None
    }

    fn sorted_ids_at(&self, t: f64) -> Vec<usize> {
        let q: Vec<f64> = self.paths.iter().map(|p| p.position_at(t)).collect();
        let mut ids: Vec<usize> = (0..q.len()).collect();
        ids.sort_by(|&i, &j| q[i].total_cmp(&q[j]));
        ids
    }
}

/// Exhaustive classification of every sequence with a connected ball
/// graph up to `max_len`, for desk-scale n. Deterministic given the seed.
pub fn enumerate_sequences(
    n: usize,
    max_len: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<(SymbolicSequence, Dichotomy)>, OracleError> {
    if n > 4 || max_len > 8 {
        return Err(OracleError::BudgetExceeded(format!(
            "enumeration guarded to n <= 4, max_len <= 8 (asked n = {n}, max_len = {max_len})"
        )));
    }
    let mut table = Vec::new();
    let mut index = 0u64;
    for len in 1..=max_len {
        for code in 0..n.pow(len as u32) {
            index += 1;
            let mut c = code;
            let labels: Vec<CollisionLabel> = (0..len)
                .map(|_| {
                    let d = c % n;
                    c /= n;
                    if d == 0 {
                        CollisionLabel::Floor
                    } else {
                        CollisionLabel::Ball(d - 1)
                    }
                })
                .collect();
            let seq = SymbolicSequence::new(labels, n)
                .map_err(|e| OracleError::Domain(e.to_string()))?;
            if seq.ball_edges().iter().all(|&e| e) {
                let verdict = classify_sequence(&seq, trials, seed.wrapping_add(index))?;
                table.push((seq, verdict));
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{apply_collision, next_event, Tolerances};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SimOptions {
        SimOptions::default()
    }

    #[test]
    fn bisection_reproduces_the_closed_forms() {
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let cfg = OracleConfig::default();

        let s = PhaseState::new_unchecked(vec![1.0, 2.0], vec![2.0, 0.0], 0.0);
        let (dt, label) = bisect_collision_time(&s, &m, &cfg).unwrap();
        assert!((dt - 0.5).abs() < 1e-10);
        assert_eq!(label, CollisionLabel::Ball(0));

        let s = PhaseState::new_unchecked(vec![1.0, 2.0], vec![1.0, 1.0], 0.0);
        let (dt, label) = bisect_collision_time(&s, &m, &cfg).unwrap();
        assert!((dt - (1.0 + 3.0f64.sqrt())).abs() < 1e-10);
        assert_eq!(label, CollisionLabel::Floor);
    }

    #[test]
    fn bisection_agrees_with_next_event_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = OracleConfig::default();
        let tol = Tolerances::default();
        let mut checked = 0;
        while checked < 10_000 {
            let n = rng.random_range(2..=4);
            let mut masses: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
            masses.sort_by(|a, b| b.total_cmp(a));
            let m = MassVector::new(masses).unwrap();
            let s = crate::state::sample_state(&m, &mut rng, &Default::default());
            let Ok((dt, label)) = next_event(&s, &m, &tol) else {
                continue;
            };
            let (dt_o, label_o) = bisect_collision_time(&s, &m, &cfg).unwrap();
            assert!(
                (dt - dt_o).abs() <= 10.0 * cfg.bisection_tol * dt.max(1.0),
                "dt {dt} vs oracle {dt_o}"
            );
            assert_eq!(label, label_o);
            checked += 1;
        }
    }

    #[test]
    fn ghost_matches_symmetric_two_ball_start() {
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.2, 0.6], vec![0.8, -0.4], 0.0);
        let run = simulate(&s, &m, StopRule::collisions(200), &opts()).unwrap();
        let ghost = ghost_trajectory(&s, &m, run.final_state.t + 1.0).unwrap();
        let mut cur = s;
        let tol = Tolerances::default();
        for ev in &run.events {
            let (dt, label) = next_event(&cur, &m, &tol).unwrap();
            cur = advance(&cur, dt, &tol).unwrap();
            let expect = ghost.sorted_positions_at(ev.t);
            for (a, b) in cur.q.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-9);
            }
            let (next, _) = apply_collision(&cur, label, &m, &tol).unwrap();
            cur = next;
        }
    }

    #[test]
    fn stacked_equal_mass_start_alternates_event_types() {
        // ball 1 launched off the floor under a falling ball 2: the first
        // events alternate pair and floor collisions, as the two
        // independent ghosts predict
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.0, 0.5], vec![0.8, -0.6], 0.0);
        assert_eq!(s.energy(&m), 1.0);
        let run = simulate(&s, &m, StopRule::collisions(6), &opts()).unwrap();
        for (k, ev) in run.events.iter().enumerate() {
            let expect = if k % 2 == 0 {
                CollisionLabel::Ball(0)
            } else {
                CollisionLabel::Floor
            };
            assert_eq!(ev.label, expect, "event {k}");
        }
        // and the ghost superposition reproduces the final positions
        let ghost = ghost_trajectory(&s, &m, run.final_state.t + 0.5).unwrap();
        let expect = ghost.sorted_positions_at(run.final_state.t);
        for (a, b) in run.final_state.q.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ghost_crossings_match_ball_collisions() {
        let m = MassVector::new(vec![1.0, 1.0, 1.0]).unwrap();
        let s = PhaseState::new_unchecked(vec![0.05, 0.3, 0.5], vec![0.4, -0.1, 0.25], 0.0);
        let run = simulate(&s, &m, StopRule::collisions(500), &opts()).unwrap();
        let ghost = ghost_trajectory(&s, &m, run.final_state.t + 1.0).unwrap();
        for ev in &run.events {
            if let CollisionLabel::Ball(i) = ev.label {
                let t_cross = ghost.crossing_near(ev.t, i).expect("crossing exists");
                assert!(
                    (t_cross - ev.t).abs() < 1e-9,
                    "collision at {} vs ghost crossing {t_cross}",
                    ev.t
                );
            }
        }
    }

    #[test]
    fn enumeration_budget_is_guarded() {
        assert!(matches!(
            enumerate_sequences(5, 2, 4, 0),
            Err(OracleError::BudgetExceeded(_))
        ));
        assert!(matches!(
            enumerate_sequences(3, 9, 4, 0),
            Err(OracleError::BudgetExceeded(_))
        ));
    }

    #[test]
    fn enumeration_for_two_balls_matches_the_remark() {
        // length <= 2 over labels {0-1, 1-2}: exactly the sequences
        // containing both labels are D1, and no-floor sequences are
        // certified insufficient
        let table = enumerate_sequences(2, 2, 6, 9).unwrap();
        assert_eq!(table.len(), 4); // 1-2 ; 0-1,1-2 ; 1-2,0-1 ; 1-2,1-2
        for (seq, verdict) in &table {
            let text = seq.to_string();
            let expect_d1 = text.contains("0-1") && text.contains("1-2");
            assert_eq!(verdict.is_d1(), expect_d1, "sequence {text}");
            if !seq.contains_floor() {
                assert!(matches!(verdict, Dichotomy::D2Certified { .. }));
            }
        }
    }
}
