use std::fmt;

/// A subset of terminals as a bitmask; terminal `i` is bit `i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TerminalSet(pub u64);

/// Bitmask sets cap the terminal count.
pub const MAX_TERMINALS: usize = 63;

impl TerminalSet {
    pub const EMPTY: TerminalSet = TerminalSet(0);

    pub fn full(m: usize) -> Self {
        TerminalSet((1u64 << m) - 1)
    }

    pub fn singleton(i: usize) -> Self {
        TerminalSet(1 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
        TerminalSet(it.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn with(self, i: usize) -> Self {
        TerminalSet(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Self {
        TerminalSet(self.0 & !(1 << i))
    }

    pub fn union(self, o: Self) -> Self {
        TerminalSet(self.0 | o.0)
    }

    pub fn intersection(self, o: Self) -> Self {
        TerminalSet(self.0 & o.0)
    }

    pub fn difference(self, o: Self) -> Self {
        TerminalSet(self.0 & !o.0)
    }

    pub fn is_subset(self, o: Self) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    /// Every subset of `self`, the empty set first.
    pub fn subsets(self) -> impl Iterator<Item = TerminalSet> {
        let full = self.0;
        let mut cur = 0u64;
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let out = TerminalSet(cur);
            if cur == full {
                done = true;
            } else {
                cur = (cur.wrapping_sub(full)) & full;
            }
            Some(out)
        })
    }
}

impl fmt::Display for TerminalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}
