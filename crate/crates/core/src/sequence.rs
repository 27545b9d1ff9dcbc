//! Symbolic collision sequences and their extended (impact-data) form.

use std::fmt;

use crate::error::SufficiencyError;
use crate::state::{CollisionEvent, CollisionLabel};

/// Ordered list of collision labels over an n-ball system.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicSequence {
    labels: Vec<CollisionLabel>,
    n: usize,
}

impl SymbolicSequence {
    pub fn new(labels: Vec<CollisionLabel>, n: usize) -> Result<Self, SufficiencyError> {
        if n < 2 {
            return Err(SufficiencyError::Domain("need n >= 2".into()));
        }
        for label in &labels {
            if let CollisionLabel::Ball(lower) = label {
                if lower + 1 >= n {
                    return Err(SufficiencyError::Domain(format!(
                        "label {label} out of range for n = {n}"
                    )));
                }
            }
        }
        Ok(Self { labels, n })
    }

    pub fn from_events(events: &[CollisionEvent], n: usize) -> Result<Self, SufficiencyError> {
        Self::new(events.iter().map(|e| e.label).collect(), n)
    }

    /// Parses the plain-text literal, e.g. `0-1,1-2,0-1`.
    pub fn parse(text: &str, n: usize) -> Result<Self, SufficiencyError> {
        let text = text.trim();
        if text.is_empty() {
            return Self::new(Vec::new(), n);
        }
        let labels = text
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<CollisionLabel>()
                    .map_err(|e| SufficiencyError::Domain(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(labels, n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[CollisionLabel] {
        &self.labels
    }

    pub fn contains_floor(&self) -> bool {
        self.labels.iter().any(|l| l.is_floor())
    }

    /// Which ball edges `(i, i+1)` (0-based lower index) occur.
    pub fn ball_edges(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n - 1];
        for label in &self.labels {
            if let CollisionLabel::Ball(lower) = label {
                seen[*lower] = true;
            }
        }
        seen
    }

    /// New sequence with `label` inserted at `position` (0..=len).
    pub fn insert(&self, position: usize, label: CollisionLabel) -> Result<Self, SufficiencyError> {
        if position > self.labels.len() {
            return Err(SufficiencyError::Domain(format!(
                "insertion position {position} out of range"
            )));
        }
        let mut labels = self.labels.clone();
        labels.insert(position, label);
        Self::new(labels, self.n)
    }

    /// Necessary condition for the sequence to be realized by an actual
    /// trajectory: after a pair collision the pair separates with
    /// constant relative velocity, so the same pair can only collide
    /// again after some collision involving one of its two balls (the
    /// floor counts for the lowest ball). Strings violating this admit
    /// no trajectory, and on such strings the neutral-space calculus
    /// behaves differently from any dynamical segment (adjacent equal
    /// pair maps cancel, `R* R* = I`).
    pub fn is_realizable(&self) -> bool {
        for (k, &label) in self.labels.iter().enumerate() {
            let CollisionLabel::Ball(p) = label else {
                continue;
            };
            for &later in &self.labels[k + 1..] {
                if later == label {
                    return false; // no touching collision in between
                }
                let touches = match later {
                    CollisionLabel::Floor => p == 0,
                    CollisionLabel::Ball(q) => q + 1 == p || q == p + 1,
                };
                if touches {
                    break;
                }
            }
        }
        true
    }

    /// The subsequence selected by `mask` (not necessarily contiguous).
    pub fn masked(&self, mask: &[bool]) -> Result<Self, SufficiencyError> {
        if mask.len() != self.labels.len() {
            return Err(SufficiencyError::Domain("mask length mismatch".into()));
        }
        let labels = self
            .labels
            .iter()
            .zip(mask)
            .filter_map(|(l, keep)| keep.then_some(*l))
            .collect();
        Self::new(labels, self.n)
    }
}

impl fmt::Display for SymbolicSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, label) in self.labels.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{label}")?;
        }
        Ok(())
    }
}

/// Symbolic sequence together with the impact data `rho_k > 0` that the
/// collision derivatives need.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSequence {
    seq: SymbolicSequence,
    rhos: Vec<f64>,
}

impl ExtendedSequence {
    pub fn new(seq: SymbolicSequence, rhos: Vec<f64>) -> Result<Self, SufficiencyError> {
        if rhos.len() != seq.len() {
            return Err(SufficiencyError::Domain(
                "impact data length must match the sequence".into(),
            ));
        }
        if !rhos.iter().all(|&r| r > 0.0) {
            return Err(SufficiencyError::Domain("impact data must be positive".into()));
        }
        Ok(Self { seq, rhos })
    }

    pub fn from_events(events: &[CollisionEvent], n: usize) -> Result<Self, SufficiencyError> {
        let seq = SymbolicSequence::from_events(events, n)?;
        Self::new(seq, events.iter().map(|e| e.rho).collect())
    }

    pub fn sequence(&self) -> &SymbolicSequence {
        &self.seq
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    pub fn insert(
        &self,
        position: usize,
        label: CollisionLabel,
        rho: f64,
    ) -> Result<Self, SufficiencyError> {
        let seq = self.seq.insert(position, label)?;
        let mut rhos = self.rhos.clone();
        if rho <= 0.0 {
            return Err(SufficiencyError::Domain("impact data must be positive".into()));
        }
        rhos.insert(position, rho);
        Self::new(seq, rhos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_roundtrip() {
        let seq = SymbolicSequence::parse("1-2,0-1,2-3", 3).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.to_string(), "1-2,0-1,2-3");
        assert_eq!(
            seq.labels(),
            &[
                CollisionLabel::Ball(0),
                CollisionLabel::Floor,
                CollisionLabel::Ball(1)
            ]
        );
        assert!(SymbolicSequence::parse("2-3", 2).is_err());
        assert!(SymbolicSequence::parse("", 2).unwrap().is_empty());
    }

    #[test]
    fn edges_and_floor_flags() {
        let seq = SymbolicSequence::parse("1-2,0-1", 3).unwrap();
        assert!(seq.contains_floor());
        assert_eq!(seq.ball_edges(), vec![true, false]);
    }

    #[test]
    fn masked_subsequence() {
        let seq = SymbolicSequence::parse("1-2,0-1,2-3", 3).unwrap();
        let sub = seq.masked(&[true, false, true]).unwrap();
        assert_eq!(sub.to_string(), "1-2,2-3");
    }

    #[test]
    fn realizability_filter() {
        // a collided pair needs a touching event before recolliding
        assert!(!SymbolicSequence::parse("1-2,1-2", 2).unwrap().is_realizable());
        assert!(SymbolicSequence::parse("1-2,0-1,1-2", 2).unwrap().is_realizable());
        // floor repeats are fine: gravity turns the lowest ball around
        assert!(SymbolicSequence::parse("0-1,0-1", 2).unwrap().is_realizable());
        // a (3,4) collision does not touch the pair (1,2)
        assert!(!SymbolicSequence::parse("1-2,3-4,1-2", 4).unwrap().is_realizable());
        assert!(SymbolicSequence::parse("1-2,2-3,1-2", 3).unwrap().is_realizable());
    }
}
