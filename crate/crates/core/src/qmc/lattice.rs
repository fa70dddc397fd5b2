use rand::Rng;

/// An `n x T` array of classical bits, periodic in the slice index.
///
/// Besides the bits it caches the Hamming weight of every slice and the total
/// number of unequal links (pairs `x_d^(tau) != x_d^(tau+1)` over all `d` and
/// all `T` periodic links). Both caches are kept exact by [`Lattice::flip`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    n: usize,
    slices: usize,
    bits: Vec<u8>,
    slice_weights: Vec<usize>,
    unequal_links: usize,
}

impl Lattice {
    /// All bits zero.
    pub fn zeros(n: usize, slices: usize) -> Self {
        Self::from_fn(n, slices, |_, _| false)
    }

    /// Every bit independently uniform.
    pub fn random<R: Rng + ?Sized>(n: usize, slices: usize, rng: &mut R) -> Self {
        let bits: Vec<u8> = (0..n * slices).map(|_| rng.random::<bool>() as u8).collect();
        Self::from_bits(n, slices, bits)
    }

    /// `f(tau, d)` gives bit `d` of slice `tau`.
    pub fn from_fn(n: usize, slices: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(n * slices);
        for tau in 0..slices {
            for d in 0..n {
                bits.push(f(tau, d) as u8);
            }
        }
        Self::from_bits(n, slices, bits)
    }

    /// Decodes configuration index `code`, bit `tau * n + d` holding
    /// `x_d^(tau)`.
    pub fn from_code(n: usize, slices: usize, code: u64) -> Self {
        Self::from_fn(n, slices, |tau, d| (code >> (tau * n + d)) & 1 == 1)
    }

    fn from_bits(n: usize, slices: usize, bits: Vec<u8>) -> Self {
        assert!(n > 0 && slices > 0, "lattice needs at least one bit and one slice");
        assert_eq!(bits.len(), n * slices);
        let mut lat = Self {
            n,
            slices,
            bits,
            slice_weights: vec![0; slices],
            unequal_links: 0,
        };
        let (w, m) = lat.recount();
        lat.slice_weights = w;
        lat.unequal_links = m;
        lat
    }

    /// Recomputes slice weights and the unequal link count from the bits.
    pub fn recount(&self) -> (Vec<usize>, usize) {
        let weights = (0..self.slices)
            .map(|tau| self.slice(tau).iter().map(|&b| b as usize).sum())
            .collect();
        let unequal = (0..self.slices)
            .map(|tau| {
                let next = self.slice((tau + 1) % self.slices);
                self.slice(tau).iter().zip(next).filter(|(a, b)| a != b).count()
            })
            .sum();
        (weights, unequal)
    }

    /// Whether the caches agree with a fresh recount.
    pub fn caches_consistent(&self) -> bool {
        let (w, m) = self.recount();
        w == self.slice_weights && m == self.unequal_links
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn slice(&self, tau: usize) -> &[u8] {
        &self.bits[tau * self.n..(tau + 1) * self.n]
    }

    pub fn get(&self, tau: usize, d: usize) -> bool {
        self.bits[tau * self.n + d] == 1
    }

    pub fn slice_weight(&self, tau: usize) -> usize {
        self.slice_weights[tau]
    }

    pub fn slice_weights(&self) -> &[usize] {
        &self.slice_weights
    }

    /// Unequal links summed over all `T` periodic links and all `n` bits.
    pub fn unequal_links(&self) -> usize {
        self.unequal_links
    }

    pub(crate) fn prev(&self, tau: usize) -> usize {
        if tau == 0 {
            self.slices - 1
        } else {
            tau - 1
        }
    }

    pub(crate) fn next(&self, tau: usize) -> usize {
        if tau + 1 == self.slices {
            0
        } else {
            tau + 1
        }
    }

    /// Number of the two links touching `(tau, d)` whose ends currently agree.
    pub fn equal_links_at(&self, tau: usize, d: usize) -> usize {
        let b = self.bits[tau * self.n + d];
        let p = self.bits[self.prev(tau) * self.n + d];
        let q = self.bits[self.next(tau) * self.n + d];
        (b == p) as usize + (b == q) as usize
    }

    /// Flips one bit and updates both caches.
    pub fn flip(&mut self, tau: usize, d: usize) {
        let k = self.equal_links_at(tau, d);
        self.apply_flip(tau, d, k);
    }

    #[inline]
    pub(crate) fn apply_flip(&mut self, tau: usize, d: usize, equal_links: usize) {
        let idx = tau * self.n + d;
        let b = self.bits[idx];
        self.bits[idx] = b ^ 1;
        if b == 0 {
            self.slice_weights[tau] += 1;
        } else {
            self.slice_weights[tau] -= 1;
        }
        // equal links become unequal and vice versa
        self.unequal_links = self.unequal_links + 2 * equal_links - 2;
    }

    #[inline]
    pub(crate) fn raw(&self) -> &[u8] {
        &self.bits
    }
}
