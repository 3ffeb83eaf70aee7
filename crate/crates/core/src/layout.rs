//! Coefficient layout: harmonic modes in canonical order, each owning a
//! contiguous run of radial coefficients.

use crate::angular::harmonic_modes;
use crate::radial::BasisKind;
use crate::special::HarmonicIndex;
use std::ops::Range;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLayout {
    pub kind: BasisKind,
    pub n_max: usize,
    pub degrees: Vec<usize>,
    pub modes: Vec<HarmonicIndex>,
    offsets: Vec<usize>,
    // position of each mode's degree within `degrees`
    degree_slot: Vec<usize>,
}

impl SpectralLayout {
    /// Even degrees `0, 2, …, l_max`.
    pub fn even(kind: BasisKind, l_max: usize, n_max: usize) -> Self {
        let degrees: Vec<usize> = (0..=l_max).step_by(2).collect();
        Self::with_degrees(kind, &degrees, n_max)
    }

    pub fn with_degrees(kind: BasisKind, degrees: &[usize], n_max: usize) -> Self {
        let modes = harmonic_modes(degrees);
        let mut offsets = Vec::with_capacity(modes.len() + 1);
        let mut degree_slot = Vec::with_capacity(modes.len());
        let mut acc = 0;
        for m in &modes {
            offsets.push(acc);
            acc += kind.radial_dim(m.l, n_max);
            degree_slot.push(degrees.iter().position(|&l| l == m.l).unwrap());
        }
        offsets.push(acc);
        Self {
            kind,
            n_max,
            degrees: degrees.to_vec(),
            modes,
            offsets,
            degree_slot,
        }
    }

    /// Total number of coefficients.
    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block(&self, mode: usize) -> Range<usize> {
        self.offsets[mode]..self.offsets[mode + 1]
    }

    pub fn degree_slot(&self, mode: usize) -> usize {
        self.degree_slot[mode]
    }

    /// Position of a harmonic index in the mode list.
    pub fn mode_index(&self, idx: HarmonicIndex) -> Option<usize> {
        self.modes.iter().position(|&m| m == idx)
    }
}

/// Degrees of freedom of the even-degree discretization: `Σ (2l+1) · radial_dim(l)`.
pub fn degrees_of_freedom(kind: BasisKind, l_max: usize, n_max: usize) -> usize {
    (0..=l_max)
        .step_by(2)
        .map(|l| (2 * l + 1) * kind.radial_dim(l, n_max))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_length_matches_dof() {
        for kind in [BasisKind::Jg1, BasisKind::JgInf] {
            let lay = SpectralLayout::even(kind, 8, 10);
            assert_eq!(lay.len(), degrees_of_freedom(kind, 8, 10));
            assert_eq!(lay.modes.len(), 1 + 5 + 9 + 13 + 17);
        }
    }

    #[test]
    fn canonical_order() {
        let lay = SpectralLayout::even(BasisKind::Jg1, 2, 3);
        let got: Vec<_> = lay.modes.iter().map(|m| (m.l, m.m, m.v)).collect();
        assert_eq!(
            got,
            vec![(0, 0, 0), (2, 0, 0), (2, 1, 0), (2, 1, 1), (2, 2, 0), (2, 2, 1)]
        );
        assert_eq!(lay.block(1), 4..8);
    }
}
