use rustc_hash::FxHashMap;

use crate::{Error, Result};

/// Largest basis the enumerators will build.
pub const MAX_BASIS_SIZE: usize = 5_000_000;
/// Register width limit imposed by the `u128` occupation masks.
pub const MAX_SITES: usize = 128;

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Common view of an ordered list of qubit occupation masks.
pub trait BasisSet {
    fn sites(&self) -> usize;
    fn states(&self) -> &[u128];
    fn index_of(&self, mask: u128) -> Option<usize>;

    fn len(&self) -> usize {
        self.states().len()
    }

    fn is_empty(&self) -> bool {
        self.states().is_empty()
    }
}

fn check_size(sites: usize, count: Option<u128>) -> Result<usize> {
    match count {
        Some(c) if c <= MAX_BASIS_SIZE as u128 => Ok(c as usize),
        _ => Err(Error::SizeLimit(format!(
            "basis on {sites} sites exceeds {MAX_BASIS_SIZE} states"
        ))),
    }
}

fn build_index(states: &[u128]) -> FxHashMap<u128, usize> {
    let mut index = FxHashMap::with_capacity_and_hasher(states.len(), Default::default());
    for (i, &s) in states.iter().enumerate() {
        index.insert(s, i);
    }
    index
}

/// All masks on `sites` qubits with exactly `excitations` bits set, in
/// ascending numeric order.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    sites: usize,
    excitations: usize,
    states: Vec<u128>,
    index: FxHashMap<u128, usize>,
}

impl SectorBasis {
    pub fn new(sites: usize, excitations: usize) -> Result<Self> {
        if sites > MAX_SITES {
            return Err(Error::SizeLimit(format!("at most {MAX_SITES} sites, got {sites}")));
        }
        if excitations > sites {
            return Err(Error::InvalidSector(format!(
                "{excitations} excitations on {sites} sites"
            )));
        }
        let count = check_size(sites, binomial(sites, excitations))?;
        let mut states = Vec::with_capacity(count);
        let mut x: u128 = if excitations == 0 {
            0
        } else if excitations == 128 {
            u128::MAX
        } else {
            (1u128 << excitations) - 1
        };
        for _ in 0..count {
            states.push(x);
            if x == 0 {
                break;
            }
            // Gosper's hack; the final wrap is never stored
            let c = x & x.wrapping_neg();
            let r = x.wrapping_add(c);
            x = r | (((x ^ r) >> 2) >> x.trailing_zeros());
        }
        let index = build_index(&states);
        Ok(Self {
            sites,
            excitations,
            states,
            index,
        })
    }

    pub fn excitations(&self) -> usize {
        self.excitations
    }
}

impl BasisSet for SectorBasis {
    fn sites(&self) -> usize {
        self.sites
    }

    fn states(&self) -> &[u128] {
        &self.states
    }

    fn index_of(&self, mask: u128) -> Option<usize> {
        self.index.get(&mask).copied()
    }
}

/// Direct sum of the sectors `0..=max_excitations`, lowest sector first.
/// Closed under lowering operators.
#[derive(Debug, Clone)]
pub struct TruncatedBasis {
    sites: usize,
    max_excitations: usize,
    offsets: Vec<usize>,
    states: Vec<u128>,
    index: FxHashMap<u128, usize>,
}

impl TruncatedBasis {
    pub fn new(sites: usize, max_excitations: usize) -> Result<Self> {
        if max_excitations > sites {
            return Err(Error::InvalidSector(format!(
                "{max_excitations} excitations on {sites} sites"
            )));
        }
        let mut total: u128 = 0;
        for n in 0..=max_excitations {
            total = total.saturating_add(binomial(sites, n).unwrap_or(u128::MAX));
        }
        check_size(sites, Some(total))?;
        let mut states = Vec::new();
        let mut offsets = Vec::with_capacity(max_excitations + 2);
        for n in 0..=max_excitations {
            offsets.push(states.len());
            states.extend_from_slice(SectorBasis::new(sites, n)?.states());
        }
        offsets.push(states.len());
        let index = build_index(&states);
        Ok(Self {
            sites,
            max_excitations,
            offsets,
            states,
            index,
        })
    }

    pub fn max_excitations(&self) -> usize {
        self.max_excitations
    }

    /// Index range occupied by the `n`-excitation sector.
    pub fn sector_range(&self, n: usize) -> std::ops::Range<usize> {
        self.offsets[n]..self.offsets[n + 1]
    }
}

impl BasisSet for TruncatedBasis {
    fn sites(&self) -> usize {
        self.sites
    }

    fn states(&self) -> &[u128] {
        &self.states
    }

    fn index_of(&self, mask: u128) -> Option<usize> {
        self.index.get(&mask).copied()
    }
}

/// Mask with the listed sites raised.
pub fn mask_of(sites: &[usize]) -> u128 {
    sites.iter().fold(0u128, |m, &s| m | (1u128 << s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_sector_sizes() {
        assert_eq!(SectorBasis::new(4, 0).unwrap().len(), 1);
        assert_eq!(SectorBasis::new(4, 1).unwrap().len(), 4);
        let b = SectorBasis::new(4, 2).unwrap();
        assert_eq!(b.states(), &[0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]);
        assert_eq!(SectorBasis::new(4, 4).unwrap().states(), &[0b1111]);
    }

    #[test]
    fn too_many_excitations() {
        assert!(matches!(SectorBasis::new(4, 5), Err(Error::InvalidSector(_))));
        assert!(matches!(TruncatedBasis::new(2, 3), Err(Error::InvalidSector(_))));
    }

    #[test]
    fn wide_registers() {
        let b = SectorBasis::new(128, 1).unwrap();
        assert_eq!(b.len(), 128);
        assert_eq!(*b.states().last().unwrap(), 1u128 << 127);
        assert_eq!(SectorBasis::new(128, 128).unwrap().states(), &[u128::MAX]);
        assert!(matches!(SectorBasis::new(100, 50), Err(Error::SizeLimit(_))));
    }

    #[test]
    fn truncated_layout() {
        let t = TruncatedBasis::new(4, 2).unwrap();
        assert_eq!(t.len(), 1 + 4 + 6);
        assert_eq!(t.sector_range(1), 1..5);
        assert_eq!(t.index_of(0b0101), Some(6));
        assert_eq!(t.index_of(0b0111), None);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(60, 5), Some(5_461_512));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(0, 0), Some(1));
    }

    proptest! {
        #[test]
        fn sectors_are_sorted_complete_and_indexed(sites in 0usize..12, k in 0usize..12) {
            prop_assume!(k <= sites);
            let b = SectorBasis::new(sites, k).unwrap();
            prop_assert_eq!(b.len() as u128, binomial(sites, k).unwrap());
            prop_assert!(b.states().windows(2).all(|w| w[0] < w[1]));
            for (i, &s) in b.states().iter().enumerate() {
                prop_assert_eq!(s.count_ones() as usize, k);
                prop_assert!(s >> sites == 0);
                prop_assert_eq!(b.index_of(s), Some(i));
            }
        }
    }
}
