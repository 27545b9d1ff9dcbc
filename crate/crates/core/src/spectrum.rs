//! Lyapunov spectrum estimation and hyperbolicity diagnostics.
//!
//! The derivative of the flow is the identity between collisions, so the
//! cocycle over a trajectory is the ordered product of per-collision
//! maps and exponents come from periodically re-orthonormalized frame
//! products, normalized by elapsed flow time.
//!
//! Two exactly invariant objects organize the full 2n-dimensional frame:
//! the functional `Σ δh` (constant under every collision map) and the
//! flow direction `(0, 1, ..., 1)` (fixed by every collision map). Both
//! carry exponent zero. The physically meaningful reduced spectrum lives
//! on `{Σ δh = 0}` modulo the flow direction; it is computed here by a
//! second frame propagated in the subspace `{Σ δh = 0, Σ δv = 0}` with
//! the flow component projected out after each collision, which is a
//! faithful matrix model of the quotient cocycle.

use num_complex::Complex64;

use crate::dynamics::{simulate, SimOptions, Stepper, StopRule};
use crate::error::SpectrumError;
use crate::mass::MassVector;
use crate::rational::{identity, left_mul_rstar, IncrementalRank, Rat};
use crate::sequence::SymbolicSequence;
use crate::state::{CollisionEvent, CollisionLabel, PhaseState};
use crate::sufficiency::{collision_graph, neutral_space, neutral_velocity_dim, RationalMasses};
use crate::tangent::{derivative_for, TangentVector};

/// Lyapunov spectrum estimate over one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// All 2n exponents of the full (δh, δv) frame, sorted descending.
    pub exponents: Vec<f64>,
    /// The 2n-2 exponents of the reduced (on-shell, flow-quotient)
    /// cocycle, sorted descending.
    pub reduced_exponents: Vec<f64>,
    /// Indices into `exponents` of the two values left over after
    /// matching the reduced spectrum: the constraint- and flow-related
    /// directions.
    pub flagged: [usize; 2],
    /// `max_j |λ_j + λ_{2n+1-j}|` over the sorted full spectrum.
    pub pairing_residual: f64,
    /// Angle between the exact flow direction and the span of the two
    /// flagged frame directions (diagnostic for the identification).
    pub flow_angle: f64,
    pub total_time: f64,
    pub collisions: u64,
    pub renorm_count: u64,
}

struct LogFrame {
    vectors: Vec<TangentVector>,
    logs: Vec<f64>,
    reduced: bool,
}

impl LogFrame {
    fn full(n: usize) -> Self {
        let mut vectors = Vec::with_capacity(2 * n);
        for k in 0..2 * n {
            let mut tv = TangentVector::zero(n);
            if k < n {
                tv.dh[k] = 1.0;
            } else {
                tv.dv[k - n] = 1.0;
            }
            vectors.push(tv);
        }
        Self {
            vectors,
            logs: vec![0.0; 2 * n],
            reduced: false,
        }
    }

    /// Frame spanning {Σ δh = 0, Σ δv = 0}, the standard complement of
    /// the flow line inside the energy shell.
    fn reduced(n: usize) -> Self {
        let mut vectors = Vec::with_capacity(2 * n - 2);
        for k in 0..n - 1 {
            let mut tv = TangentVector::zero(n);
            tv.dh[k] = 1.0;
            tv.dh[k + 1] = -1.0;
            vectors.push(tv);
        }
        for k in 0..n - 1 {
            let mut tv = TangentVector::zero(n);
            tv.dv[k] = 1.0;
            tv.dv[k + 1] = -1.0;
            vectors.push(tv);
        }
        let mut frame = Self {
            logs: vec![0.0; vectors.len()],
            vectors,
            reduced: true,
        };
        frame.orthonormalize(false);
        frame
    }

    /// Projects back onto the reduced subspace: removes the flow
    /// component (mean of δv) and the Σ δh drift (exact zero in real
    /// arithmetic, rounding in floats).
    fn project(tv: &mut TangentVector) {
        let n = tv.n() as f64;
        let mh = tv.sum_dh() / n;
        let mv = tv.sum_dv() / n;
        for x in tv.dh.iter_mut() {
            *x -= mh;
        }
        for x in tv.dv.iter_mut() {
            *x -= mv;
        }
    }

    fn push(&mut self, d: &crate::tangent::CollisionDerivative) {
        for tv in &mut self.vectors {
            d.apply_in_place(tv);
            if self.reduced {
                Self::project(tv);
            }
        }
    }

    /// Modified Gram-Schmidt; accumulates log norms when `collect`.
    fn orthonormalize(&mut self, collect: bool) {
        for j in 0..self.vectors.len() {
            for i in 0..j {
                let c = self.vectors[j].dot(&self.vectors[i]);
                let prev = self.vectors[i].clone();
                self.vectors[j].axpy(-c, &prev);
            }
            let nrm = self.vectors[j].norm();
            if collect {
                self.logs[j] += nrm.ln();
            }
            self.vectors[j].scale(1.0 / nrm);
        }
    }
}

/// Benettin-style spectrum estimate over `n_collisions` events,
/// re-orthonormalizing every `renorm_every` collisions. Exponents are
/// per unit flow time. Deterministic given the initial state.
pub fn lyapunov_spectrum(
    x0: &PhaseState,
    masses: &MassVector,
    n_collisions: u64,
    renorm_every: u64,
    opts: &SimOptions,
) -> Result<SpectrumReport, SpectrumError> {
    if renorm_every == 0 {
        return Err(SpectrumError::Domain("renorm_every must be positive".into()));
    }
    let n = masses.n();
    let mut full = LogFrame::full(n);
    let mut reduced = LogFrame::reduced(n);
    let mut stepper = Stepper::new(x0.clone(), masses, opts);
    let mut renorm_count = 0u64;
    let mut since_renorm = 0u64;
    for _ in 0..n_collisions {
        let ev = stepper.step()?;
        let d = derivative_for(&ev, masses)?;
        full.push(&d);
        reduced.push(&d);
        since_renorm += 1;
        if since_renorm == renorm_every {
            full.orthonormalize(true);
            reduced.orthonormalize(true);
            renorm_count += 1;
            since_renorm = 0;
        }
    }
    if since_renorm > 0 {
        full.orthonormalize(true);
        reduced.orthonormalize(true);
        renorm_count += 1;
    }
    let total_time = stepper.state().t - x0.t;
    if total_time <= 0.0 {
        return Err(SpectrumError::Domain(
            "no flow time elapsed; cannot normalize exponents".into(),
        ));
    }

    // sort descending, remembering which frame column each came from
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| full.logs[b].total_cmp(&full.logs[a]));
    let exponents: Vec<f64> = order.iter().map(|&k| full.logs[k] / total_time).collect();
    let mut reduced_exponents: Vec<f64> =
        reduced.logs.iter().map(|l| l / total_time).collect();
    reduced_exponents.sort_by(|a, b| b.total_cmp(a));

    // match the reduced spectrum into the full one; the two leftovers are
    // the constraint/flow-related exponents
    let mut used = vec![false; exponents.len()];
    for r in &reduced_exponents {
        let mut best: Option<(usize, f64)> = None;
        for (j, lam) in exponents.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (lam - r).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        used[best.expect("full spectrum larger than reduced").0] = true;
    }
    let leftovers: Vec<usize> = (0..exponents.len()).filter(|&j| !used[j]).collect();
    let flagged = [leftovers[0], leftovers[1]];

    // diagnostic: the exact flow direction against the flagged plane
    let mut flow = TangentVector::zero(n);
    for x in flow.dv.iter_mut() {
        *x = 1.0 / (n as f64).sqrt();
    }
    let mut proj = 0.0;
    for &j in &flagged {
        let c = flow.dot(&full.vectors[order[j]]);
        proj += c * c;
    }
    let flow_angle = proj.sqrt().min(1.0).acos();

    let m = exponents.len();
    let pairing_residual = (0..m)
        .map(|j| (exponents[j] + exponents[m - 1 - j]).abs())
        .fold(0.0, f64::max);

    Ok(SpectrumReport {
        exponents,
        reduced_exponents,
        flagged,
        pairing_residual,
        flow_angle,
        total_time,
        collisions: stepper.collisions(),
        renorm_count,
    })
}

/// Outcome of the strict cone-invariance check over a finite segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeCheckReport {
    pub strict: bool,
    /// Dimension of the (0, δv) neutral space (Property A obstruction).
    pub neutral_dim_v: usize,
    /// Dimension of the (δh, 0) neutral space; `None` when the
    /// connectivity precondition fails and the homogeneous system does
    /// not characterize it.
    pub neutral_dim_h: Option<usize>,
    pub events: u64,
    pub note: Option<String>,
}

/// Runs the trajectory for `t_events` collisions, extracts the realized
/// symbolic sequence, and checks strict cone invariance: Property A via
/// the ball-graph components and Property B via the exact neutral space
/// at the rationalized masses.
pub fn strict_invariance_check(
    x0: &PhaseState,
    masses: &MassVector,
    t_events: u64,
    opts: &SimOptions,
) -> Result<ConeCheckReport, SpectrumError> {
    let run = simulate(x0, masses, StopRule::collisions(t_events), opts)?;
    let seq = SymbolicSequence::from_events(&run.events, masses.n())
        .map_err(SpectrumError::Sufficiency)?;
    let dim_v = neutral_velocity_dim(&seq);
    if !collision_graph(&seq).balls_connected() {
        return Ok(ConeCheckReport {
            strict: false,
            neutral_dim_v: dim_v,
            neutral_dim_h: None,
            events: t_events,
            note: Some("ball collision graph disconnected over the segment".into()),
        });
    }
    let exact = RationalMasses::from_f64_exact(masses.masses())?;
    let report = neutral_space(&seq, &exact)?;
    Ok(ConeCheckReport {
        strict: dim_v == 0 && report.dimension == 0,
        neutral_dim_v: dim_v,
        neutral_dim_h: Some(report.dimension),
        events: t_events,
        note: (!seq.contains_floor()).then(|| "segment contains no floor collision".into()),
    })
}

/// Result of the onset scan.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetReport {
    /// Minimal prefix length (in events) with strict cone invariance, or
    /// `None` if the budget ran out first.
    pub onset: Option<u64>,
    pub events_scanned: u64,
    pub edges_complete: bool,
    pub floor_rank: usize,
}

/// Scans prefixes of the event log incrementally and reports the first
/// prefix that is sufficient. The running `R*` product and the row
/// echelon are maintained event by event, so no prefix is re-solved.
pub fn sufficiency_onset(
    x0: &PhaseState,
    masses: &MassVector,
    max_events: u64,
    opts: &SimOptions,
) -> Result<OnsetReport, SpectrumError> {
    let n = masses.n();
    let exact = RationalMasses::from_f64_exact(masses.masses())?;
    let gammas: Vec<Rat> = (0..n - 1).map(|i| exact.gamma(i)).collect();

    let mut stepper = Stepper::new(x0.clone(), masses, opts);
    let mut product = identity(n);
    let mut rank = IncrementalRank::new(n);
    rank.add_row(vec![num_traits::One::one(); n]); // the reduction Σ δh = 0
    let mut edges = vec![false; n - 1];

    for k in 1..=max_events {
        let ev = stepper.step()?;
        match ev.label {
            CollisionLabel::Ball(i) => {
                left_mul_rstar(&mut product, i, &gammas[i]);
                edges[i] = true;
            }
            CollisionLabel::Floor => {
                rank.add_row(product[0].clone());
            }
        }
        if rank.rank() == n && edges.iter().all(|&e| e) {
            return Ok(OnsetReport {
                onset: Some(k),
                events_scanned: k,
                edges_complete: true,
                floor_rank: rank.rank(),
            });
        }
    }
    Ok(OnsetReport {
        onset: None,
        events_scanned: max_events,
        edges_complete: edges.iter().all(|&e| e),
        floor_rank: rank.rank(),
    })
}

/// Tolerance on `||λ| - 1|` below which a monodromy spectrum counts as
/// linearly stable.
pub const UNIT_CIRCLE_TOL: f64 = 1e-6;

/// Search configuration for the two-ball periodic-orbit probe.
#[derive(Debug, Clone)]
pub struct OrbitProbeConfig {
    /// Grid resolution per section axis.
    pub grid: usize,
    /// Return-map powers to try (floor hits per period).
    pub max_floor_hits: usize,
    /// How many best grid cells to refine per power.
    pub newton_seeds: usize,
    pub newton_iters: usize,
    /// Convergence tolerance in section coordinates.
    pub section_tol: f64,
    pub opts: SimOptions,
}

impl Default for OrbitProbeConfig {
    fn default() -> Self {
        Self {
            grid: 48,
            max_floor_hits: 3,
            newton_seeds: 12,
            newton_iters: 80,
            section_tol: 1e-10,
            opts: SimOptions::default(),
        }
    }
}

/// Monodromy data of a located periodic orbit of the two-ball system.
///
/// The matrix is the reduced (2x2) cocycle over one period: the quotient
/// by the flow direction restricted to the energy shell, evaluated in an
/// orthonormal basis in which the symplectic form is standard, so its
/// determinant is 1 up to rounding and eigenvalues on the unit circle
/// mean linear stability.
#[derive(Debug, Clone)]
pub struct MonodromyReport {
    pub eigenvalues: [Complex64; 2],
    pub trace: f64,
    pub determinant: f64,
    pub max_unit_circle_deviation: f64,
    pub linearly_stable: bool,
    pub period: f64,
    pub floor_hits: usize,
    /// Section coordinates (v1 just after the floor bounce, v2).
    pub section_point: [f64; 2],
    pub section_residual: f64,
}

/// Section state just after a floor bounce: `q = (0, q2)`, `v = (u, w)`,
/// with `q2` pinned by `H = 1`. Returns `None` outside the energy shell.
fn section_state(masses: &MassVector, u: f64, w: f64) -> Option<PhaseState> {
    if u <= 0.0 {
        return None;
    }
    let (m1, m2) = (masses.mass(0), masses.mass(1));
    let q2 = (1.0 - 0.5 * m1 * u * u - 0.5 * m2 * w * w) / m2;
    if q2.is_nan() || q2 <= 1e-6 {
        return None;
    }
    Some(PhaseState::new_unchecked(vec![0.0, q2], vec![u, w], 0.0))
}

/// Return map to the floor section: propagates until the k-th floor
/// collision and reads the section coordinates just after it. Also
/// returns the events of the loop and the elapsed time.
fn return_map(
    masses: &MassVector,
    u: f64,
    w: f64,
    floor_hits: usize,
    opts: &SimOptions,
) -> Option<([f64; 2], Vec<CollisionEvent>, f64)> {
    let state = section_state(masses, u, w)?;
    let mut stepper = Stepper::new(state, masses, opts);
    let mut events = Vec::new();
    let mut hits = 0;
    // a period with k floor hits has at most a few ball collisions in
    // between on the energy shell; cap generously
    for _ in 0..64 * floor_hits {
        let ev = stepper.step().ok()?;
        let is_floor = ev.label.is_floor();
        events.push(ev);
        if is_floor {
            hits += 1;
            if hits == floor_hits {
                let s = stepper.state();
                return Some(([s.v[0], s.v[1]], events, s.t));
            }
        }
    }
    None
}

fn residual(masses: &MassVector, x: [f64; 2], k: usize, opts: &SimOptions) -> Option<[f64; 2]> {
    let (y, _, _) = return_map(masses, x[0], x[1], k, opts)?;
    Some([y[0] - x[0], y[1] - x[1]])
}

/// Locates a periodic orbit of the two-ball system by grid search plus a
/// finite-difference Newton iteration on the floor-section return map,
/// then reports the spectrum of the reduced monodromy.
///
/// Intended for the inverted-order experiment (`m1 < m2`, where a
/// linearly stable orbit exists) but works for any positive mass pair.
pub fn stable_orbit_probe(
    masses: &MassVector,
    cfg: &OrbitProbeConfig,
) -> Result<MonodromyReport, SpectrumError> {
    if masses.n() != 2 {
        return Err(SpectrumError::Domain(
            "the orbit probe is a two-ball experiment".into(),
        ));
    }
    let (m1, m2) = (masses.mass(0), masses.mass(1));
    let u_max = (2.0 / m1).sqrt();
    let w_max = (2.0 / m2).sqrt();

    let mut seeds_tried = 0usize;
    let mut best_residual = f64::INFINITY;

    for k in 1..=cfg.max_floor_hits {
        // coarse grid, ranked by residual
        let mut cells: Vec<(f64, [f64; 2])> = Vec::new();
        for iu in 1..cfg.grid {
            let u = u_max * iu as f64 / cfg.grid as f64;
            for iw in 0..cfg.grid {
                let w = -w_max + 2.0 * w_max * (iw as f64 + 0.5) / cfg.grid as f64;
                if let Some(r) = residual(masses, [u, w], k, &cfg.opts) {
                    cells.push((r[0].hypot(r[1]), [u, w]));
                }
            }
        }
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));

        for (_, seed) in cells.into_iter().take(cfg.newton_seeds) {
            seeds_tried += 1;
            if let Some(x) = newton_refine(masses, seed, k, cfg, &mut best_residual) {
                let (_, events, period) = return_map(masses, x[0], x[1], k, &cfg.opts)
                    .expect("converged point evaluates");
                let r = residual(masses, x, k, &cfg.opts).expect("converged point evaluates");
                let m = reduced_monodromy(&events, masses)?;
                return Ok(finish_report(m, period, k, x, r[0].hypot(r[1])));
            }
        }
    }
    Err(SpectrumError::OrbitNotFound {
        seeds_tried,
        best_residual,
    })
}

fn newton_refine(
    masses: &MassVector,
    mut x: [f64; 2],
    k: usize,
    cfg: &OrbitProbeConfig,
    best_residual: &mut f64,
) -> Option<[f64; 2]> {
    for _ in 0..cfg.newton_iters {
        let f = residual(masses, x, k, &cfg.opts)?;
        let fnorm = f[0].hypot(f[1]);
        *best_residual = best_residual.min(fnorm);
        if fnorm <= cfg.section_tol {
            return Some(x);
        }
        // central-difference Jacobian of the residual
        let mut jac = [[0.0f64; 2]; 2];
        for c in 0..2 {
            let h = 1e-7 * x[c].abs().max(0.1);
            let mut xp = x;
            xp[c] += h;
            let mut xm = x;
            xm[c] -= h;
            let fp = residual(masses, xp, k, &cfg.opts)?;
            let fm = residual(masses, xm, k, &cfg.opts)?;
            jac[0][c] = (fp[0] - fm[0]) / (2.0 * h);
            jac[1][c] = (fp[1] - fm[1]) / (2.0 * h);
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-14 {
            return None;
        }
        let dx = [
            (f[0] * jac[1][1] - f[1] * jac[0][1]) / det,
            (f[1] * jac[0][0] - f[0] * jac[1][0]) / det,
        ];
        let step = dx[0].hypot(dx[1]);
        let damp = if step > 0.2 { 0.2 / step } else { 1.0 };
        x = [x[0] - damp * dx[0], x[1] - damp * dx[1]];
        if !(x[0].is_finite() && x[1].is_finite()) {
            return None;
        }
    }
    None
}

/// The reduced 2x2 cocycle over the loop, in the orthonormal basis
/// `((1,-1)/sqrt(2), 0)`, `(0, (1,-1)/sqrt(2))` of
/// `{Σ δh = 0, Σ δv = 0}` with the flow component projected after each
/// collision.
fn reduced_monodromy(
    events: &[CollisionEvent],
    masses: &MassVector,
) -> Result<[[f64; 2]; 2], SpectrumError> {
    let isq = 1.0 / 2.0f64.sqrt();
    let basis = [
        TangentVector::new_unchecked(vec![isq, -isq], vec![0.0, 0.0]),
        TangentVector::new_unchecked(vec![0.0, 0.0], vec![isq, -isq]),
    ];
    let mut m = [[0.0f64; 2]; 2];
    for (j, b) in basis.iter().enumerate() {
        let mut img = b.clone();
        for ev in events {
            let d = derivative_for(ev, masses).map_err(SpectrumError::Sim)?;
            d.apply_in_place(&mut img);
            LogFrame::project(&mut img);
        }
        for (i, e) in basis.iter().enumerate() {
            m[i][j] = e.dot(&img);
        }
    }
    Ok(m)
}

fn finish_report(
    m: [[f64; 2]; 2],
    period: f64,
    floor_hits: usize,
    x: [f64; 2],
    section_residual: f64,
) -> MonodromyReport {
    let trace = m[0][0] + m[1][1];
    let determinant = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = trace * trace - 4.0 * determinant;
    let eigenvalues = if disc >= 0.0 {
        let r = disc.sqrt();
        [
            Complex64::new(0.5 * (trace + r), 0.0),
            Complex64::new(0.5 * (trace - r), 0.0),
        ]
    } else {
        let r = (-disc).sqrt();
        [
            Complex64::new(0.5 * trace, 0.5 * r),
            Complex64::new(0.5 * trace, -0.5 * r),
        ]
    };
    let max_unit_circle_deviation = eigenvalues
        .iter()
        .map(|l| (l.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    MonodromyReport {
        eigenvalues,
        trace,
        determinant,
        max_unit_circle_deviation,
        linearly_stable: max_unit_circle_deviation <= UNIT_CIRCLE_TOL,
        period,
        floor_hits,
        section_point: x,
        section_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{sample_state, SamplingConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SimOptions {
        SimOptions::default()
    }

    #[test]
    fn equal_mass_exponents_vanish() {
        let m = MassVector::new(vec![1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = sample_state(&m, &mut rng, &SamplingConfig::default());
        let rep = lyapunov_spectrum(&x0, &m, 20_000, 1, &opts()).unwrap();
        for lam in &rep.exponents {
            assert!(lam.abs() < 5e-3, "exponent {lam} too large: {:?}", rep.exponents);
        }
        assert_eq!(rep.exponents.len(), 4);
        assert_eq!(rep.reduced_exponents.len(), 2);
    }

    #[test]
    fn ordered_unequal_masses_are_hyperbolic() {
        let m = MassVector::new(vec![2.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x0 = sample_state(&m, &mut rng, &SamplingConfig::default());
        let rep = lyapunov_spectrum(&x0, &m, 50_000, 1, &opts()).unwrap();
        assert!(rep.exponents[0] > 0.01, "top exponent {:?}", rep.exponents);
        assert!(rep.pairing_residual < 0.05);
        // the reduced spectrum should carry the same top exponent
        assert!((rep.reduced_exponents[0] - rep.exponents[0]).abs() < 0.02);
    }

    #[test]
    fn cone_check_on_a_generic_two_ball_segment() {
        let m = MassVector::new(vec![2.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x0 = sample_state(&m, &mut rng, &SamplingConfig::default());
        // long enough to contain both collision types
        let rep = strict_invariance_check(&x0, &m, 20, &opts()).unwrap();
        assert!(rep.strict);
        assert_eq!(rep.neutral_dim_v, 0);
        assert_eq!(rep.neutral_dim_h, Some(0));
    }

    #[test]
    fn empty_segment_is_not_strict() {
        let m = MassVector::new(vec![2.0, 1.0]).unwrap();
        let x0 = PhaseState::new_unchecked(vec![0.1, 0.4], vec![0.3, 0.1], 0.0);
        let rep = strict_invariance_check(&x0, &m, 0, &opts()).unwrap();
        assert!(!rep.strict);
        assert_eq!(rep.neutral_dim_v, 1);
        assert_eq!(rep.neutral_dim_h, None);
    }

    #[test]
    fn floorless_segment_has_the_maximal_h_neutral_space() {
        // approaching pair far from the floor: the first event is 1-2
        let m = MassVector::new(vec![2.0, 1.0]).unwrap();
        let x0 = PhaseState::new_unchecked(vec![2.0, 2.2], vec![0.2, -0.2], 0.0);
        let rep = strict_invariance_check(&x0, &m, 1, &opts()).unwrap();
        assert!(!rep.strict);
        assert_eq!(rep.neutral_dim_v, 0);
        assert_eq!(rep.neutral_dim_h, Some(1)); // n - 1, no equations
        assert!(rep.note.is_some());
    }

    #[test]
    fn equal_mass_onset_is_bounded_by_all_particles_hitting_the_floor() {
        use crate::dynamics::{simulate, StopRule};
        let m = MassVector::new(vec![1.0, 1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let x0 = sample_state(&m, &mut rng, &SamplingConfig::default());
            let run = simulate(&x0, &m, StopRule::collisions(400), &opts()).unwrap();
            // ghost bookkeeping: a pair collision swaps slots, a floor
            // collision marks whichever relabeled particle is lowest
            let mut perm: Vec<usize> = (0..3).collect();
            let mut hit = [false; 3];
            let mut all_hit_at = None;
            for (k, ev) in run.events.iter().enumerate() {
                match ev.label {
                    CollisionLabel::Ball(i) => perm.swap(i, i + 1),
                    CollisionLabel::Floor => hit[perm[0]] = true,
                }
                if hit.iter().all(|&h| h) {
                    all_hit_at = Some(k as u64 + 1);
                    break;
                }
            }
            let Some(bound) = all_hit_at else { continue };
            let rep = sufficiency_onset(&x0, &m, 400, &opts()).unwrap();
            let onset = rep.onset.expect("onset within budget");
            assert!(onset <= bound, "onset {onset} later than all-hit bound {bound}");
        }
    }

    #[test]
    fn onset_is_found_quickly_for_generic_two_ball_data() {
        let m = MassVector::new(vec![2.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let x0 = sample_state(&m, &mut rng, &SamplingConfig::default());
            let rep = sufficiency_onset(&x0, &m, 200, &opts()).unwrap();
            let onset = rep.onset.expect("onset within budget");
            // consistency: the prefix at the onset is strict, the one
            // before is not
            let at = strict_invariance_check(&x0, &m, onset, &opts()).unwrap();
            assert!(at.strict);
            let before = strict_invariance_check(&x0, &m, onset - 1, &opts()).unwrap();
            assert!(!before.strict);
        }
    }

    #[test]
    fn probe_finds_the_stable_orbit_for_inverted_masses() {
        let m = MassVector::unordered(vec![1.0, 2.0]).unwrap();
        let cfg = OrbitProbeConfig {
            grid: 24,
            ..OrbitProbeConfig::default()
        };
        let rep = stable_orbit_probe(&m, &cfg).unwrap();
        assert!(rep.section_residual <= cfg.section_tol);
        assert!((rep.determinant - 1.0).abs() < 1e-10);
        assert!(
            rep.max_unit_circle_deviation <= UNIT_CIRCLE_TOL,
            "reduced monodromy spectrum off the unit circle: {:?}",
            rep.eigenvalues
        );
        assert!(rep.linearly_stable);
    }

    #[test]
    fn probe_orbit_for_ordered_masses_is_unstable() {
        let m = MassVector::new(vec![2.0, 1.0]).unwrap();
        let cfg = OrbitProbeConfig {
            grid: 24,
            ..OrbitProbeConfig::default()
        };
        match stable_orbit_probe(&m, &cfg) {
            Ok(rep) => {
                assert!((rep.determinant - 1.0).abs() < 1e-10);
                assert!(
                    rep.max_unit_circle_deviation > UNIT_CIRCLE_TOL,
                    "ordered masses should not yield a stable orbit: {:?}",
                    rep.eigenvalues
                );
            }
            Err(SpectrumError::OrbitNotFound { .. }) => {} // reported, not fatal
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
