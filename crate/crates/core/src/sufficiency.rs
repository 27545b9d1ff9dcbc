//! Symbolic-sequence sufficiency analysis over exact rationals.
//!
//! A tangent vector is neutral for a segment when the form Q1 vanishes
//! along the whole segment. Under the standing connectivity assumption
//! (every ball pair collides), neutral vectors have δv = 0 and their δh
//! component solves the homogeneous system with one row per floor
//! collision: the first row of the accumulated `R*` product, taken
//! together with the reduction `Σ δh = 0`. The segment (equivalently the
//! pair (Σ, m)) is *sufficient* when that solution space is trivial,
//! which is exactly strict invariance of the cone field `{Q1 >= 0}`.
//!
//! The solution space depends only on the symbolic sequence and the mass
//! vector, never on the impact data, so verdicts here are exact rational
//! computations.

use std::fmt;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::SufficiencyError;
use crate::rational::{identity, kernel_basis, left_mul_rstar, rat_from_f64, rat_i64, Rat};
use crate::sequence::{ExtendedSequence, SymbolicSequence};
use crate::state::CollisionLabel;

/// Collision graph on the vertex set {0, 1, ..., n}: edges are the
/// labels without multiplicity. Vertex 0 is the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionGraph {
    pub n: usize,
    /// `edges[i]` is the paper edge {i, i+1}; index 0 is the floor edge.
    pub edges: Vec<bool>,
    /// Connected components of the restriction to the ball vertices
    /// {1, ..., n}.
    pub ball_components: usize,
}

impl CollisionGraph {
    /// The restriction to {1, ..., n} is connected iff every ball edge
    /// occurs (only adjacent pairs ever collide).
    pub fn balls_connected(&self) -> bool {
        self.ball_components == 1
    }
}

pub fn collision_graph(seq: &SymbolicSequence) -> CollisionGraph {
    let n = seq.n();
    let mut edges = vec![false; n];
    for label in seq.labels() {
        edges[label.paper_index()] = true;
    }
    let ball_components = 1 + edges[1..].iter().filter(|&&e| !e).count();
    CollisionGraph {
        n,
        edges,
        ball_components,
    }
}

/// Dimension of the space of neutral vectors of the form (0, δv):
/// δv must be constant on each component of the ball-collision graph and
/// sum to zero, so the dimension is (number of components) - 1.
/// Dimension 0 is Property (A) for the segment.
pub fn neutral_velocity_dim(seq: &SymbolicSequence) -> usize {
    collision_graph(seq).ball_components - 1
}

/// Exact rational mass vector for the sufficiency algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMasses {
    m: Vec<Rat>,
}

impl RationalMasses {
    /// Positive, non-increasing masses (ties allowed: the equal-mass
    /// limiting case is a legitimate input).
    pub fn new(m: Vec<Rat>) -> Result<Self, SufficiencyError> {
        if m.len() < 2 {
            return Err(SufficiencyError::Domain("need at least two balls".into()));
        }
        if !m.iter().all(|x| x > &Rat::zero()) {
            return Err(SufficiencyError::Domain("masses must be positive".into()));
        }
        if !m.windows(2).all(|w| w[0] >= w[1]) {
            return Err(SufficiencyError::Domain(
                "masses must be non-increasing".into(),
            ));
        }
        Ok(Self { m })
    }

    /// Exact rationalization of f64 masses (every finite f64 is dyadic).
    pub fn from_f64_exact(m: &[f64]) -> Result<Self, SufficiencyError> {
        let m = m
            .iter()
            .map(|&x| {
                rat_from_f64(x).ok_or_else(|| {
                    SufficiencyError::Domain(format!("mass {x} is not rationalizable"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(m)
    }

    /// Parses `p/q` rationals or decimal literals, comma-separated.
    pub fn parse(text: &str) -> Result<Self, SufficiencyError> {
        let m = text
            .split(',')
            .map(|part| parse_rat(part.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(m)
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn masses(&self) -> &[Rat] {
        &self.m
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.m.windows(2).all(|w| w[0] > w[1])
    }

    /// `γ_i = (m_i - m_{i+1}) / (m_i + m_{i+1})` for the pair with
    /// 0-based lower index.
    pub fn gamma(&self, lower: usize) -> Rat {
        (&self.m[lower] - &self.m[lower + 1]) / (&self.m[lower] + &self.m[lower + 1])
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.m.iter().map(crate::rational::rat_to_f64).collect()
    }
}

impl fmt::Display for RationalMasses {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.m.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}/{}", m.numer(), m.denom())?;
        }
        Ok(())
    }
}

pub fn parse_rat(s: &str) -> Result<Rat, SufficiencyError> {
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p
            .trim()
            .parse()
            .map_err(|_| SufficiencyError::Domain(format!("bad rational {s:?}")))?;
        let q: i64 = q
            .trim()
            .parse()
            .map_err(|_| SufficiencyError::Domain(format!("bad rational {s:?}")))?;
        if q == 0 {
            return Err(SufficiencyError::Domain("zero denominator".into()));
        }
        Ok(rat_i64(p, q))
    } else {
        let x: f64 = s
            .parse()
            .map_err(|_| SufficiencyError::Domain(format!("bad number {s:?}")))?;
        rat_from_f64(x).ok_or_else(|| SufficiencyError::Domain(format!("bad number {s:?}")))
    }
}

/// Basis and dimension of the neutral space N(Σ, m) inside {Σ δh = 0}.
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralSpaceReport {
    pub dimension: usize,
    /// Exact δh basis vectors spanning the space.
    pub basis: Vec<Vec<Rat>>,
    pub sufficient: bool,
}

/// Builds the homogeneous-system rows of the sequence: one row per floor
/// collision, namely the first row of the accumulated `R*` product at
/// that point (floor entries contribute the identity).
pub fn floor_rows(seq: &SymbolicSequence, masses: &RationalMasses) -> Vec<Vec<Rat>> {
    let n = seq.n();
    let mut product = identity(n);
    let mut rows = Vec::new();
    for label in seq.labels() {
        match label {
            CollisionLabel::Ball(lower) => {
                let gamma = masses.gamma(*lower);
                left_mul_rstar(&mut product, *lower, &gamma);
            }
            CollisionLabel::Floor => rows.push(product[0].clone()),
        }
    }
    rows
}

/// Solves the homogeneous system together with `Σ δh = 0` over exact
/// rationals.
///
/// Requires the ball restriction of the collision graph to be connected;
/// otherwise neutral (0, δv) vectors exist and the system would not
/// characterize the full neutral space.
pub fn neutral_space(
    seq: &SymbolicSequence,
    masses: &RationalMasses,
) -> Result<NeutralSpaceReport, SufficiencyError> {
    if masses.n() != seq.n() {
        return Err(SufficiencyError::Domain(format!(
            "sequence is over n = {} but got {} masses",
            seq.n(),
            masses.n()
        )));
    }
    let graph = collision_graph(seq);
    if !graph.balls_connected() {
        return Err(SufficiencyError::PreconditionViolated(format!(
            "ball collision graph has {} components; the homogeneous system \
             characterizes the neutral space only when it is connected",
            graph.ball_components
        )));
    }
    let n = seq.n();
    let mut rows = floor_rows(seq, masses);
    rows.push(vec![num_traits::One::one(); n]);
    let basis = kernel_basis(&rows, n);
    Ok(NeutralSpaceReport {
        dimension: basis.len(),
        sufficient: basis.is_empty(),
        basis,
    })
}

/// Sufficiency verdict: trivial neutral space.
pub fn is_sufficient(
    seq: &SymbolicSequence,
    masses: &RationalMasses,
) -> Result<bool, SufficiencyError> {
    Ok(neutral_space(seq, masses)?.sufficient)
}

/// Structural insufficiency certificates from the sequence alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum D2Reason {
    /// No floor collision: the homogeneous system contains no equations,
    /// so the neutral space has dimension n - 1 for every mass vector.
    NoFloorCollision,
}

/// Dichotomy verdict for a symbolic sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Dichotomy {
    /// Sufficient for almost every mass vector, witnessed by one exact
    /// rational mass vector (the exceptional set is a proper algebraic
    /// subset, so a single exact sufficient point certifies the class).
    D1 { witness: RationalMasses },
    /// Insufficient for every mass vector, by structure.
    D2Certified { reason: D2Reason },
    /// All sampled mass vectors were insufficient; probabilistic verdict.
    D2Presumed { trials: usize },
}

impl Dichotomy {
    pub fn is_d1(&self) -> bool {
        matches!(self, Dichotomy::D1 { .. })
    }
}

/// Random exact rational masses, strictly decreasing, with numerators and
/// denominators bounded by `max_part`.
pub fn random_rational_masses<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    max_part: i64,
) -> RationalMasses {
    loop {
        let mut draws: Vec<Rat> = (0..n)
            .map(|_| {
                let p = rng.random_range(1..=max_part);
                let q = rng.random_range(1..=max_part);
                rat_i64(p, q)
            })
            .collect();
        draws.sort_by(|a, b| b.cmp(a));
        if draws.windows(2).any(|w| w[0] == w[1]) {
            continue; // value collision: reject and resample
        }
        return RationalMasses::new(draws).expect("sorted positive rationals");
    }
}

/// Classifies a sequence as D1 (with an exact sufficient witness) or D2.
///
/// The no-floor case is certified structurally; otherwise `trials` random
/// strictly-decreasing rational mass vectors are tested and any sufficient
/// hit certifies D1. An all-insufficient outcome is only "presumed" D2.
pub fn classify_sequence(
    seq: &SymbolicSequence,
    trials: usize,
    seed: u64,
) -> Result<Dichotomy, SufficiencyError> {
    let graph = collision_graph(seq);
    if !graph.balls_connected() {
        return Err(SufficiencyError::PreconditionViolated(
            "classification requires a connected ball collision graph".into(),
        ));
    }
    if !seq.contains_floor() {
        return Ok(Dichotomy::D2Certified {
            reason: D2Reason::NoFloorCollision,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let masses = random_rational_masses(seq.n(), &mut rng, 10_000);
        if neutral_space(seq, &masses)?.sufficient {
            return Ok(Dichotomy::D1 { witness: masses });
        }
    }
    Ok(Dichotomy::D2Presumed { trials })
}

/// Combinatorial monotonicity check: inserting one collision into a
/// sufficient extended sequence of a trajectory segment never destroys
/// sufficiency. Returns the inserted sequence's verdict.
///
/// The property is about sequences realized by trajectories. On
/// arbitrary label strings it is false: inserting a collision that
/// completes a repeated palindromic motif between two floor collisions
/// makes the corresponding `R*` products cancel (`R* R* = I`), collapses
/// two floor rows into one, and can leave a nontrivial neutral vector
/// for every mass vector (see `formal_insertion_boundary` in the tests).
/// [`SymbolicSequence::is_realizable`] screens the blatant cases; the
/// monotonicity harnesses draw their sequences from simulated runs.
pub fn cmp_check(
    ext: &ExtendedSequence,
    position: usize,
    label: CollisionLabel,
    rho: f64,
    masses: &RationalMasses,
) -> Result<bool, SufficiencyError> {
    if !is_sufficient(ext.sequence(), masses)? {
        return Err(SufficiencyError::PreconditionViolated(
            "cmp_check requires a sufficient base sequence".into(),
        ));
    }
    let inserted = ext.insert(position, label, rho)?;
    is_sufficient(inserted.sequence(), masses)
}

/// Subsequence monotonicity: if the masked subsequence is sufficient, the
/// full sequence must be. Returns the full sequence's verdict.
///
/// As with [`cmp_check`], the guarantee is for full sequences realized by
/// trajectories; the mask itself is unconstrained.
pub fn subsequence_monotonicity_check(
    seq: &SymbolicSequence,
    mask: &[bool],
    masses: &RationalMasses,
) -> Result<bool, SufficiencyError> {
    let sub = seq.masked(mask)?;
    let sub_graph = collision_graph(&sub);
    if !sub_graph.balls_connected() {
        return Err(SufficiencyError::PreconditionViolated(
            "masked subsequence has a disconnected ball graph".into(),
        ));
    }
    if !is_sufficient(&sub, masses)? {
        return Err(SufficiencyError::PreconditionViolated(
            "masked subsequence is not sufficient".into(),
        ));
    }
    is_sufficient(seq, masses)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(text: &str, n: usize) -> SymbolicSequence {
        SymbolicSequence::parse(text, n).unwrap()
    }

    #[test]
    fn graph_examples() {
        let g = collision_graph(&seq("1-2,0-1", 2));
        assert_eq!(g.edges, vec![true, true]);
        assert!(g.balls_connected());

        let g = collision_graph(&seq("0-1", 3));
        assert!(!g.balls_connected());
        assert_eq!(g.ball_components, 3);

        let g = collision_graph(&seq("1-2,2-3,3-4", 4));
        assert!(g.balls_connected());
    }

    #[test]
    fn velocity_neutral_dimensions() {
        assert_eq!(neutral_velocity_dim(&seq("1-2,2-3,3-4", 4)), 0);
        assert_eq!(neutral_velocity_dim(&seq("0-1,0-1", 3)), 2);
        assert_eq!(neutral_velocity_dim(&seq("1-2", 3)), 1);
    }

    #[test]
    fn no_floor_collision_means_full_neutral_space() {
        let masses = RationalMasses::parse("3/1,2/1,1/1").unwrap();
        let report = neutral_space(&seq("1-2,2-3,1-2", 3), &masses).unwrap();
        assert_eq!(report.dimension, 2);
        assert!(!report.sufficient);
    }

    #[test]
    fn two_ball_golden_sequences_are_sufficient() {
        // ball first: the single row reads -a = 0 on (a, -a)
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let masses = random_rational_masses(2, &mut rng, 100);
            let r = neutral_space(&seq("1-2,0-1", 2), &masses).unwrap();
            assert!(r.sufficient, "masses {masses}");
            // floor first: the row is the plain projection
            let r = neutral_space(&seq("0-1,1-2", 2), &masses).unwrap();
            assert!(r.sufficient, "masses {masses}");
        }
    }

    #[test]
    fn verdict_triple_from_the_examples() {
        let masses = RationalMasses::parse("2/1,1/1").unwrap();
        assert!(!is_sufficient(&seq("1-2,1-2", 2), &masses).unwrap());
        assert!(is_sufficient(&seq("1-2,0-1", 2), &masses).unwrap());
        assert!(is_sufficient(&seq("0-1,1-2", 2), &masses).unwrap());
    }

    #[test]
    fn disconnected_graph_is_a_precondition_violation() {
        let masses = RationalMasses::parse("3/1,2/1,1/1").unwrap();
        assert!(matches!(
            neutral_space(&seq("1-2,0-1", 3), &masses),
            Err(SufficiencyError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn classification_examples() {
        let v = classify_sequence(&seq("1-2,0-1", 2), 8, 1).unwrap();
        assert!(v.is_d1());
        let v = classify_sequence(&seq("1-2,1-2,1-2", 2), 8, 1).unwrap();
        assert_eq!(
            v,
            Dichotomy::D2Certified {
                reason: D2Reason::NoFloorCollision
            }
        );
        assert!(classify_sequence(&seq("0-1,1-2", 3), 8, 1).is_err());
    }

    #[test]
    fn d1_witness_replays_to_dimension_zero() {
        let s = seq("1-2,0-1,1-2", 2);
        match classify_sequence(&s, 8, 42).unwrap() {
            Dichotomy::D1 { witness } => {
                assert_eq!(neutral_space(&s, &witness).unwrap().dimension, 0);
            }
            other => panic!("expected D1, got {other:?}"),
        }
    }

    #[test]
    fn equal_mass_rstar_is_a_permutation() {
        // with equal masses each floor row pins one (dynamically relabeled)
        // index; dim = max(n - 1 - pins, 0)
        let masses = RationalMasses::parse("1/1,1/1,1/1").unwrap();
        // floor rows pin index 1, then (after 1-2 swap) index 2
        let r = neutral_space(&seq("1-2,2-3,0-1,1-2,0-1", 3), &masses).unwrap();
        assert_eq!(r.dimension, 0);
        // a single floor row pins only one index: dimension 1 remains
        let r = neutral_space(&seq("1-2,2-3,0-1", 3), &masses).unwrap();
        assert_eq!(r.dimension, 1);
    }

    #[test]
    fn verdicts_do_not_depend_on_impact_data() {
        let masses = RationalMasses::parse("5/2,1/1").unwrap();
        let base = seq("1-2,0-1", 2);
        for rho in [0.1, 1.0, 17.0] {
            let ext = ExtendedSequence::new(base.clone(), vec![rho, 2.0 * rho]).unwrap();
            let ok = cmp_check(&ext, 1, CollisionLabel::Ball(0), rho, &masses).unwrap();
            assert!(ok);
        }
    }

    #[test]
    fn cmp_insertions_preserve_sufficiency() {
        let masses = RationalMasses::parse("2/1,1/1").unwrap();
        let base = ExtendedSequence::new(seq("1-2,0-1", 2), vec![1.0, 1.0]).unwrap();
        for pos in 0..=2 {
            for label in [CollisionLabel::Floor, CollisionLabel::Ball(0)] {
                assert!(cmp_check(&base, pos, label, 0.7, &masses).unwrap());
            }
        }
    }

    #[test]
    fn subsequence_monotonicity_examples() {
        let masses = RationalMasses::parse("2/1,1/1").unwrap();
        let full = seq("1-2,1-2,0-1,1-2", 2);
        // embed the sufficient (1-2, 0-1) as a sparse subsequence
        assert!(subsequence_monotonicity_check(&full, &[false, true, true, false], &masses).unwrap());
        // full mask is trivially fine
        assert!(subsequence_monotonicity_check(&full, &[true; 4], &masses).unwrap());
        // insufficient premise is a precondition violation
        assert!(subsequence_monotonicity_check(&full, &[true, true, false, false], &masses).is_err());
    }

    #[test]
    fn formal_insertion_boundary() {
        // Monotonicity under insertion holds for trajectory sequences, not
        // for arbitrary label strings: completing a repeated palindromic
        // motif between floor collisions collapses two floor rows into
        // one (the motif's R* product is an involution) and the inserted
        // string becomes insufficient for every mass vector. The inserted
        // string here passes the coarse realizability screen but repeats
        // the motif 1-2,2-3,1-2 between consecutive floors.
        let base = SymbolicSequence::parse("0-1,3-4,2-3,1-2,0-1,1-2,2-3,1-2,0-1", 4).unwrap();
        let inserted = base.insert(2, CollisionLabel::Ball(0)).unwrap();
        assert!(inserted.is_realizable());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let masses = random_rational_masses(4, &mut rng, 1000);
            let base_report = neutral_space(&base, &masses).unwrap();
            let ins_report = neutral_space(&inserted, &masses).unwrap();
            if base_report.sufficient {
                assert_eq!(ins_report.dimension, 1, "masses {masses}");
            }
        }
    }

    #[test]
    fn mass_parsing() {
        let m = RationalMasses::parse("3/2, 1/2").unwrap();
        assert_eq!(m.gamma(0), rat_i64(1, 2));
        assert!(RationalMasses::parse("1/1,2/1").is_err());
        assert!(RationalMasses::parse("1/0,1/2").is_err());
        let m = RationalMasses::parse("0.5,0.25").unwrap();
        assert_eq!(m.masses()[0], rat_i64(1, 2));
    }
}
