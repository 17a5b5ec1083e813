use std::ops::Range;

/// Partition of `n` elements into `parts` chunks of `ceil(n / parts)`,
/// the trailing chunks possibly shorter or empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkLayout {
    n: usize,
    parts: usize,
    chunk: usize,
}

impl ChunkLayout {
    pub fn new(n: usize, parts: usize) -> Self {
        assert!(parts > 0, "chunk layout needs at least one part");
        Self {
            n,
            parts,
            chunk: n.div_ceil(parts),
        }
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn range(&self, c: usize) -> Range<usize> {
        let start = (c * self.chunk).min(self.n);
        let end = ((c + 1) * self.chunk).min(self.n);
        start..end
    }

    pub fn len(&self, c: usize) -> usize {
        self.range(c).len()
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..self.parts).map(|c| self.len(c)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RdRole {
    /// Even rank below `2r`: hands its data to `rank + 1` and waits.
    Donor,
    /// Odd rank below `2r`: absorbs its donor and takes id `rank / 2`.
    Absorber,
    /// Rank at or above `2r`: takes id `rank - r`.
    Direct,
}

/// Folding of `N` ranks onto the largest power of two for recursive doubling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecursiveDoublingPlan {
    pub size: usize,
    pub pof2: usize,
    pub remainder: usize,
}

impl RecursiveDoublingPlan {
    pub fn new(size: usize) -> Self {
        assert!(size > 0, "recursive doubling needs at least one rank");
        let pof2 = 1usize << (usize::BITS - 1 - size.leading_zeros());
        Self {
            size,
            pof2,
            remainder: size - pof2,
        }
    }

    /// Number of exchange steps among the power-of-two participants.
    pub fn steps(&self) -> usize {
        self.pof2.trailing_zeros() as usize
    }

    pub fn role(&self, rank: usize) -> RdRole {
        if rank < 2 * self.remainder {
            if rank.is_multiple_of(2) {
                RdRole::Donor
            } else {
                RdRole::Absorber
            }
        } else {
            RdRole::Direct
        }
    }

    /// Id in `[0, pof2)` for participating ranks; `None` for donors.
    pub fn remapped(&self, rank: usize) -> Option<usize> {
        match self.role(rank) {
            RdRole::Donor => None,
            RdRole::Absorber => Some(rank / 2),
            RdRole::Direct => Some(rank - self.remainder),
        }
    }

    /// Inverse of [`remapped`](Self::remapped).
    pub fn actual(&self, id: usize) -> usize {
        if id < self.remainder {
            2 * id + 1
        } else {
            id + self.remainder
        }
    }

    /// Exchange partner of a participating rank at step `t`.
    pub fn partner(&self, rank: usize, t: usize) -> Option<usize> {
        self.remapped(rank).map(|id| self.actual(id ^ (1 << t)))
    }
}
