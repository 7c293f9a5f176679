//! Bundles of goods as fixed-width bitsets.
//!
//! Goods are dense indices `0..m`; the default build caps `m` at [`MAX_GOODS`].

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MAX_GOODS: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Bundle(u64);

impl Bundle {
    pub const EMPTY: Bundle = Bundle(0);

    pub fn from_bits(bits: u64) -> Self {
        Bundle(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// Panics if a good index is `>= MAX_GOODS`.
    pub fn from_goods<I: IntoIterator<Item = usize>>(goods: I) -> Self {
        let mut bits = 0u64;
        for g in goods {
            assert!(g < MAX_GOODS, "good index {g} exceeds the {MAX_GOODS}-good cap");
            bits |= 1 << g;
        }
        Bundle(bits)
    }

    /// The full universe `{0, .., m-1}`.
    pub fn full(m: usize) -> Self {
        assert!(m <= MAX_GOODS);
        if m == MAX_GOODS {
            Bundle(u64::MAX)
        } else {
            Bundle((1u64 << m) - 1)
        }
    }

    pub fn singleton(good: usize) -> Self {
        Bundle::from_goods([good])
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, good: usize) -> bool {
        good < MAX_GOODS && self.0 & (1 << good) != 0
    }

    pub fn is_subset(self, other: Bundle) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Bundle) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: Bundle) -> Bundle {
        Bundle(self.0 | other.0)
    }

    pub fn intersection(self, other: Bundle) -> Bundle {
        Bundle(self.0 & other.0)
    }

    pub fn difference(self, other: Bundle) -> Bundle {
        Bundle(self.0 & !other.0)
    }

    /// Smallest member, if any.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Members in increasing order.
    pub fn goods(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let g = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(g)
            }
        })
    }

    /// True if every member is `< m`.
    pub fn fits(self, m: usize) -> bool {
        self.is_subset(Bundle::full(m))
    }

    /// Lexicographic order of the sorted member lists (`{0} < {0,1} < {1}`).
    pub fn lex_cmp(self, other: Bundle) -> Ordering {
        self.goods().cmp(other.goods())
    }

    /// Applies a relabeling `good -> perm[good]`.
    pub fn permute(self, perm: &[usize]) -> Bundle {
        Bundle::from_goods(self.goods().map(|g| perm[g]))
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, g) in self.goods().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{g}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for Bundle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.goods())
    }
}

impl<'de> Deserialize<'de> for Bundle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let goods: Vec<usize> = Vec::deserialize(deserializer)?;
        if let Some(bad) = goods.iter().find(|&&g| g >= MAX_GOODS) {
            return Err(serde::de::Error::custom(format!("good index {bad} exceeds the {MAX_GOODS}-good cap")));
        }
        Ok(Bundle::from_goods(goods))
    }
}

/// All nonempty subsets of `{0..m}` in increasing bitmask order.
pub fn nonempty_subsets(m: usize) -> impl Iterator<Item = Bundle> {
    assert!(m < MAX_GOODS);
    (1u64..(1u64 << m)).map(Bundle::from_bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra() {
        let a = Bundle::from_goods([0, 2]);
        let b = Bundle::from_goods([2, 3]);
        assert_eq!(a.union(b), Bundle::from_goods([0, 2, 3]));
        assert_eq!(a.intersection(b), Bundle::singleton(2));
        assert!(!a.is_disjoint(b));
        assert!(Bundle::singleton(2).is_subset(a));
        assert_eq!(a.len(), 2);
        assert_eq!(a.first(), Some(0));
        assert_eq!(Bundle::EMPTY.first(), None);
        assert!(a.fits(3));
        assert!(!b.fits(3));
    }

    #[test]
    fn lexicographic_member_order() {
        let s0 = Bundle::from_goods([0]);
        let s01 = Bundle::from_goods([0, 1]);
        let s1 = Bundle::from_goods([1]);
        let s02 = Bundle::from_goods([0, 2]);
        assert_eq!(s0.lex_cmp(s01), Ordering::Less);
        assert_eq!(s01.lex_cmp(s1), Ordering::Less);
        assert_eq!(s01.lex_cmp(s02), Ordering::Less);
        assert_eq!(s02.lex_cmp(s1), Ordering::Less);
    }

    #[test]
    fn serde_as_index_list() {
        let b = Bundle::from_goods([1, 4]);
        let text = serde_json::to_string(&b).unwrap();
        assert_eq!(text, "[1,4]");
        let back: Bundle = serde_json::from_str(&text).unwrap();
        assert_eq!(back, b);
        assert!(serde_json::from_str::<Bundle>("[64]").is_err());
    }

    #[test]
    fn full_universe() {
        assert_eq!(Bundle::full(3).bits(), 0b111);
        assert_eq!(Bundle::full(64).len(), 64);
        assert_eq!(nonempty_subsets(3).count(), 7);
    }
}
