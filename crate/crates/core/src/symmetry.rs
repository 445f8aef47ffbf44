//! The 48 axis permutations and reflections that map the velocity lattice onto itself.

/// A signed permutation of the three axes acting on lattice indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSymmetry {
    perm: [usize; 3],
    flip: [bool; 3],
}

impl GridSymmetry {
    pub fn all() -> Vec<GridSymmetry> {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::with_capacity(48);
        for perm in PERMS {
            for bits in 0..8u8 {
                out.push(GridSymmetry {
                    perm,
                    flip: [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0],
                });
            }
        }
        out
    }

    #[inline]
    pub fn apply_coords(&self, c: [usize; 3], n: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in 0..3 {
            let k = c[self.perm[a]];
            out[a] = if self.flip[a] { n - 1 - k } else { k };
        }
        out
    }

    /// Action on a velocity vector, consistent with [`Self::apply_coords`].
    pub fn apply_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for a in 0..3 {
            let x = v[self.perm[a]];
            out[a] = if self.flip[a] { -x } else { x };
        }
        out
    }
}

/// Orbit bookkeeping: for every node a representative and a symmetry mapping it there.
#[derive(Clone, Debug)]
pub struct OrbitTable {
    pub n: usize,
    /// Distinct representative nodes.
    pub reps: Vec<usize>,
    /// `rep_slot[i]` indexes `reps`.
    pub rep_slot: Vec<usize>,
    /// Symmetry `g` with `g(rep) = i`.
    pub to_node: Vec<GridSymmetry>,
    /// Stabilizer of each representative.
    pub stabilizers: Vec<Vec<GridSymmetry>>,
}

fn flat(c: [usize; 3], n: usize) -> usize {
    (c[0] * n + c[1]) * n + c[2]
}

fn unflat(i: usize, n: usize) -> [usize; 3] {
    [i / (n * n), (i / n) % n, i % n]
}

impl OrbitTable {
    pub fn new(n: usize) -> OrbitTable {
        let group = GridSymmetry::all();
        let m = n * n * n;
        let mut slot_of_rep = std::collections::HashMap::new();
        let mut reps = Vec::new();
        let mut rep_slot = vec![0; m];
        let mut to_node = vec![group[0]; m];
        for i in 0..m {
            let c = unflat(i, n);
            // Canonical form: fold every index onto the upper half, sort descending.
            let mut u = c.map(|k| if k >= n / 2 { k } else { n - 1 - k });
            u.sort_unstable_by(|a, b| b.cmp(a));
            let rep = flat(u, n);
            let slot = *slot_of_rep.entry(rep).or_insert_with(|| {
                reps.push(rep);
                reps.len() - 1
            });
            rep_slot[i] = slot;
            to_node[i] = *group
                .iter()
                .find(|g| g.apply_coords(u, n) == c)
                .expect("orbit element reachable");
        }
        let stabilizers = reps
            .iter()
            .map(|&r| {
                let c = unflat(r, n);
                group.iter().copied().filter(|g| g.apply_coords(c, n) == c).collect()
            })
            .collect();
        OrbitTable {
            n,
            reps,
            rep_slot,
            to_node,
            stabilizers,
        }
    }

    #[inline]
    pub fn map(&self, g: &GridSymmetry, i: usize) -> usize {
        flat(g.apply_coords(unflat(i, self.n), self.n), self.n)
    }
}
