//! The coordination set: paired boundary components of the backbone and
//! sub-area models must agree.

use gridplan_core::Network;

/// Components per sub-area and stage: CIF, CID, P, Q, capacity, voltage.
pub const PER_AREA: usize = 6;

/// Indices of one backbone component and its sub-area counterpart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pair {
    pub backbone: usize,
    /// Block index of the sub-area (1-based; block 0 is the backbone).
    pub block: usize,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pairing {
    /// Boundary vector length per block.
    pub sizes: Vec<usize>,
    pub pairs: Vec<Pair>,
}

impl Pairing {
    /// Stage-major layout: the backbone lists every sub-area per stage, a
    /// sub-area lists its own components per stage.
    pub fn new(sub_areas: usize, stages: usize) -> Self {
        let mut pairs = Vec::new();
        for t in 0..stages {
            for k in 0..sub_areas {
                for c in 0..PER_AREA {
                    pairs.push(Pair {
                        backbone: t * PER_AREA * sub_areas + PER_AREA * k + c,
                        block: k + 1,
                        index: t * PER_AREA + c,
                    });
                }
            }
        }
        let mut sizes = vec![PER_AREA * sub_areas * stages];
        sizes.extend(std::iter::repeat(PER_AREA * stages).take(sub_areas));
        Self { sizes, pairs }
    }

    pub fn for_network(net: &Network) -> Self {
        let k = net.partition.as_ref().map_or(0, |p| p.sub_areas.len());
        Self::new(k, net.stages())
    }

    pub fn blocks(&self) -> usize {
        self.sizes.len()
    }

    /// Least-squares projection onto the coordination set: each pair is
    /// replaced by its mean, written identically on both sides.
    pub fn project(&self, slices: &[Vec<f64>]) -> Vec<Vec<f64>> {
        assert_eq!(slices.len(), self.sizes.len(), "one slice per block");
        for (s, &n) in slices.iter().zip(&self.sizes) {
            assert_eq!(s.len(), n, "slice length");
        }
        let mut z: Vec<Vec<f64>> = slices.to_vec();
        for p in &self.pairs {
            let m = 0.5 * (slices[0][p.backbone] + slices[p.block][p.index]);
            z[0][p.backbone] = m;
            z[p.block][p.index] = m;
        }
        z
    }

    /// True when every pair holds bitwise-equal values.
    pub fn is_member(&self, z: &[Vec<f64>]) -> bool {
        self.pairs
            .iter()
            .all(|p| z[0][p.backbone].to_bits() == z[p.block][p.index].to_bits())
    }

    /// Largest pairwise disagreement.
    pub fn mismatch(&self, slices: &[Vec<f64>]) -> f64 {
        self.pairs
            .iter()
            .map(|p| (slices[0][p.backbone] - slices[p.block][p.index]).abs())
            .fold(0.0, f64::max)
    }
}

/// Free-function form of [`Pairing::project`].
pub fn project_coordination(pairing: &Pairing, slices: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pairing.project(slices)
}
