//! Subsets of the ground set `{0, .., n-1}` as bit vectors, and the two
//! enumeration kernels built on them: k-subsets and matchings.

use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::exactmath::binom_u128;

/// Largest ground set the word-sized enumeration kernels accept.
pub const ENUMERATION_LIMIT: u32 = 64;

/// A subset of an `n`-element ground set.
///
/// Masks of different widths never compare equal. Ordering is lexicographic
/// on the ascending element lists, which is also the order edges appear in
/// the JSON interchange format.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SubsetMask {
    n: u32,
    words: SmallVec<[u64; 2]>,
}

fn word_count(n: u32) -> usize {
    (n as usize).div_ceil(64)
}

impl SubsetMask {
    pub fn empty(n: u32) -> Self {
        SubsetMask {
            n,
            words: SmallVec::from_elem(0, word_count(n)),
        }
    }

    pub fn full(n: u32) -> Self {
        let mut m = Self::empty(n);
        for (i, w) in m.words.iter_mut().enumerate() {
            let lo = i as u32 * 64;
            let bits = (n - lo).min(64);
            *w = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        }
        m
    }

    /// Builds a mask from element indices; out-of-range elements are rejected.
    pub fn from_elements<I: IntoIterator<Item = u32>>(n: u32, elems: I) -> Result<Self> {
        let mut m = Self::empty(n);
        for e in elems {
            if e >= n {
                return Err(Error::Validation(format!("element {e} outside ground set of size {n}")));
            }
            m.insert(e);
        }
        Ok(m)
    }

    /// Mask over `n <= 64` elements from a raw word.
    pub fn from_u64(n: u32, bits: u64) -> Self {
        assert!(n <= 64, "single-word mask needs n <= 64");
        debug_assert!(n == 64 || bits >> n == 0, "bits outside the ground set");
        let mut m = Self::empty(n);
        if n > 0 {
            m.words[0] = bits;
        }
        m
    }

    /// The raw word for masks of width at most 64.
    pub fn as_u64(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    pub fn width(&self) -> u32 {
        self.n
    }

    pub fn insert(&mut self, e: u32) {
        assert!(e < self.n);
        self.words[(e / 64) as usize] |= 1u64 << (e % 64);
    }

    pub fn remove(&mut self, e: u32) {
        assert!(e < self.n);
        self.words[(e / 64) as usize] &= !(1u64 << (e % 64));
    }

    pub fn contains(&self, e: u32) -> bool {
        e < self.n && self.words[(e / 64) as usize] >> (e % 64) & 1 == 1
    }

    pub fn len(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn check_width(&self, other: &Self) {
        assert_eq!(self.n, other.n, "mask widths differ");
    }

    pub fn union(&self, other: &Self) -> Self {
        self.check_width(other);
        SubsetMask {
            n: self.n,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
        }
    }

    pub fn union_with(&mut self, other: &Self) {
        self.check_width(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.check_width(other);
        SubsetMask {
            n: self.n,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.check_width(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.check_width(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    /// Elements in ascending order.
    pub fn elements(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros();
                w &= w - 1;
                Some(i as u32 * 64 + b)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.elements().collect()
    }

    /// Smallest element of `self XOR other`, if any.
    fn first_difference(&self, other: &Self) -> Option<(u32, bool)> {
        for (i, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let x = a ^ b;
            if x != 0 {
                let bit = x.trailing_zeros();
                return Some((i as u32 * 64 + bit, a >> bit & 1 == 1));
            }
        }
        None
    }

    fn has_element_above(&self, e: u32) -> bool {
        let wi = (e / 64) as usize;
        let bit = e % 64;
        let head = if bit == 63 { 0 } else { self.words[wi] >> (bit + 1) };
        head != 0 || self.words[wi + 1..].iter().any(|&w| w != 0)
    }
}

impl Ord for SubsetMask {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.n.cmp(&other.n) {
            Ordering::Equal => {}
            ord => return ord,
        }
        // Lists agree below the first differing element d. If d is in self,
        // self is smaller unless other ended before reaching d.
        match self.first_difference(other) {
            None => Ordering::Equal,
            Some((d, true)) => {
                if other.has_element_above(d) {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
            Some((d, false)) => {
                if self.has_element_above(d) {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        }
    }
}

impl PartialOrd for SubsetMask {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.elements().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}/{}", self.n)
    }
}

/// Pairwise disjoint edges, remembered together with their positions in the
/// edge list they were drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub n: u32,
    pub indices: Vec<usize>,
    pub edges: Vec<SubsetMask>,
}

/// Bitwise union of the edges in a matching.
pub fn union_of(matching: &Matching) -> SubsetMask {
    let mut u = SubsetMask::empty(matching.n);
    for e in &matching.edges {
        u.union_with(e);
    }
    u
}

/// Iterator over the `k`-subsets of `{0..n}` as raw words, in increasing
/// integer order (colexicographic order of the subsets).
#[derive(Debug, Clone)]
pub struct KSubsetWords {
    current: u128,
    limit: u128,
    k: u32,
    done: bool,
}

impl Iterator for KSubsetWords {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.done {
            return None;
        }
        let out = self.current;
        if self.k == 0 {
            self.done = true;
        } else {
            // Gosper's hack; u128 keeps n = 64 from overflowing.
            let c = self.current;
            let lowest = c & c.wrapping_neg();
            let ripple = c + lowest;
            let next = (((ripple ^ c) >> 2) / lowest) | ripple;
            if next >= self.limit {
                self.done = true;
            }
            self.current = next;
        }
        Some(out as u64)
    }
}

pub fn ksubset_words(n: u32, k: u32) -> Result<KSubsetWords> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::Capacity(format!(
            "k-subset enumeration limited to n <= {ENUMERATION_LIMIT}, got {n}"
        )));
    }
    if k > n {
        return Ok(KSubsetWords {
            current: 0,
            limit: 0,
            k,
            done: true,
        });
    }
    Ok(KSubsetWords {
        current: (1u128 << k) - 1,
        limit: 1u128 << n,
        k,
        done: false,
    })
}

/// All `k`-subsets of an `n`-set, each exactly once, in colexicographic
/// order (increasing value of the bitmask read as an integer). For `n = 3,
/// k = 2` that is `{0,1}, {0,2}, {1,2}`.
pub fn enumerate_ksubsets(n: u32, k: u32) -> Result<impl Iterator<Item = SubsetMask>> {
    Ok(ksubset_words(n, k)?.map(move |w| SubsetMask::from_u64(n, w)))
}

/// Lazy backtracking enumeration of the `size`-element matchings of an edge
/// list. Candidates are tried in index order and a branch is cut at the first
/// edge that meets the partial union.
pub struct Matchings<'a> {
    edges: &'a [SubsetMask],
    size: usize,
    stack: Vec<usize>,
    unions: Vec<SubsetMask>,
    cursor: usize,
    nodes: u64,
    done: bool,
    n: u32,
}

impl<'a> Matchings<'a> {
    /// Candidate edges examined so far.
    pub fn nodes(&self) -> u64 {
        self.nodes
    }

    fn emit(&self) -> Matching {
        Matching {
            n: self.n,
            indices: self.stack.clone(),
            edges: self.stack.iter().map(|&i| self.edges[i].clone()).collect(),
        }
    }
}

impl Iterator for Matchings<'_> {
    type Item = Matching;

    fn next(&mut self) -> Option<Matching> {
        if self.done {
            return None;
        }
        if self.size == 0 {
            self.done = true;
            return Some(Matching {
                n: self.n,
                indices: vec![],
                edges: vec![],
            });
        }
        loop {
            let needed = self.size - self.stack.len();
            if self.cursor + needed > self.edges.len() {
                match self.stack.pop() {
                    None => {
                        self.done = true;
                        return None;
                    }
                    Some(i) => {
                        self.unions.pop();
                        self.cursor = i + 1;
                        continue;
                    }
                }
            }
            let cand = self.cursor;
            self.nodes += 1;
            let fits = self.unions.last().is_none_or(|u| u.is_disjoint(&self.edges[cand]));
            self.cursor += 1;
            if !fits {
                continue;
            }
            let u = match self.unions.last() {
                Some(u) => u.union(&self.edges[cand]),
                None => self.edges[cand].clone(),
            };
            self.stack.push(cand);
            self.unions.push(u);
            if self.stack.len() == self.size {
                let out = self.emit();
                self.stack.pop();
                self.unions.pop();
                return Some(out);
            }
        }
    }
}

/// Every `s`-subset of `edges` whose members are pairwise disjoint, once each.
///
/// All edges must have the same width; an empty edge list yields only the
/// empty matching (for `s = 0`).
pub fn enumerate_matchings(edges: &[SubsetMask], s: usize) -> Matchings<'_> {
    let n = edges.first().map_or(0, |e| e.width());
    Matchings {
        edges,
        size: s,
        stack: Vec::with_capacity(s),
        unions: Vec::with_capacity(s),
        cursor: 0,
        nodes: 0,
        done: false,
        n,
    }
}

/// Same as [`enumerate_matchings`] but remembers the ground-set width so the
/// empty list still produces masks of the right width.
pub fn enumerate_matchings_in(n: u32, edges: &[SubsetMask], s: usize) -> Matchings<'_> {
    let mut it = enumerate_matchings(edges, s);
    it.n = n;
    it
}

/// Colexicographic rank of a k-subset: `sum_i C(c_i, i+1)` over its sorted
/// elements `c_0 < c_1 < ...`.
pub fn colex_rank(mask: &SubsetMask) -> Option<u128> {
    mask.elements().enumerate().try_fold(0u128, |acc, (i, c)| {
        acc.checked_add(binom_u128(u64::from(c), i as u64 + 1)?)
    })
}

/// Inverse of [`colex_rank`]: the k-subset of `{0..n}` with the given rank.
pub fn colex_unrank(n: u32, k: u32, rank: u128) -> Result<SubsetMask> {
    let total = binom_u128(u64::from(n), u64::from(k))
        .ok_or_else(|| Error::Capacity(format!("C({n},{k}) exceeds 128 bits")))?;
    if rank >= total {
        return Err(Error::Domain(format!(
            "rank {rank} out of range for C({n},{k}) = {total}"
        )));
    }
    let mut mask = SubsetMask::empty(n);
    let mut rest = rank;
    let mut upper = n; // exclusive bound on the next element
    for i in (1..=k).rev() {
        // largest c < upper with C(c, i) <= rest
        let (mut lo, mut hi) = (i - 1, upper - 1);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            let v = binom_u128(u64::from(mid), u64::from(i)).unwrap_or(u128::MAX);
            if v <= rest {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        mask.insert(lo);
        rest -= binom_u128(u64::from(lo), u64::from(i)).expect("bounded by total");
        upper = lo;
    }
    Ok(mask)
}
