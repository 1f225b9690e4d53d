use itertools::Itertools;

use crate::domain::{block_ranges, DecisionSet, Vertex, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};

/// Largest k handled by the exhaustive search (2^k patterns per subset).
const MAX_PATTERN_BITS: usize = 20;

/// An index set I together with, for every pattern z ∈ {0,1}^I, a vertex x
/// with x[I] = z.
#[derive(Debug, Clone, PartialEq)]
pub struct ShatteredSet {
    pub indices: Vec<usize>,
    /// Witnesses ordered by pattern read as a binary number, with the first
    /// index of I as the most significant bit.
    pub witnesses: Vec<(Vec<u8>, Vertex)>,
}

impl ShatteredSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Whether every witness realizes its pattern and every pattern appears.
    pub fn verify(&self) -> bool {
        let k = self.indices.len();
        self.witnesses.len() == 1 << k
            && self.witnesses.iter().enumerate().all(|(id, (pattern, x))| {
                *pattern == pattern_bits(id, k)
                    && self.indices.iter().zip(pattern).all(|(&i, &b)| x[i] == b)
            })
    }
}

fn pattern_bits(id: usize, k: usize) -> Vec<u8> {
    (0..k).map(|j| ((id >> (k - 1 - j)) & 1) as u8).collect()
}

fn pattern_id(x: &[u8], indices: &[usize]) -> usize {
    indices.iter().fold(0, |acc, &i| (acc << 1) | x[i] as usize)
}

/// First size-k index set (in ascending lexicographic order) shattered by X.
/// Each witness is the canonically first vertex realizing its pattern.
pub fn find_shattered_set(set: &DecisionSet, k: usize) -> Result<ShatteredSet> {
    let d = set.dim();
    if k > d {
        return Err(Error::Precondition(format!("k = {k} exceeds dimension {d}")));
    }
    match set {
        DecisionSet::MSet { d, m } => {
            // A pattern with j ones on the first k coordinates needs m − j
            // further ones among the remaining d − k.
            if k > *m {
                return Err(Error::NotFound { k });
            }
            let indices: Vec<usize> = (0..k).collect();
            let witnesses = (0..1usize << k)
                .map(|id| {
                    let pattern = pattern_bits(id, k);
                    let mut x = vec![0u8; *d];
                    x[..k].copy_from_slice(&pattern);
                    let ones = pattern.iter().filter(|&&b| b == 1).count();
                    for xi in &mut x[k..k + (m - ones)] {
                        *xi = 1;
                    }
                    (pattern, x)
                })
                .collect();
            Ok(ShatteredSet { indices, witnesses })
        }
        DecisionSet::Multitask { blocks } => {
            // Two indices in one block cannot both be 1, so I takes at most
            // one index per block; the first such set uses block heads.
            if k > blocks.len() {
                return Err(Error::NotFound { k });
            }
            let ranges = block_ranges(blocks);
            let indices: Vec<usize> = ranges[..k].iter().map(|r| r.start).collect();
            let witnesses = (0..1usize << k)
                .map(|id| {
                    let pattern = pattern_bits(id, k);
                    let mut x = vec![0u8; d];
                    for (b, r) in ranges.iter().enumerate() {
                        let on = b >= k || pattern[b] == 1;
                        x[if on { r.start } else { r.start + 1 }] = 1;
                    }
                    (pattern, x)
                })
                .collect();
            Ok(ShatteredSet { indices, witnesses })
        }
        DecisionSet::Explicit(_) | DecisionSet::DagPaths(_) => {
            if k > MAX_PATTERN_BITS {
                return Err(Error::Precondition(format!("exhaustive shattering search limited to k ≤ {MAX_PATTERN_BITS}")));
            }
            let vertices = set.enumerate_vertices(DEFAULT_ENUMERATION_CAP)?;
            if vertices.len() < 1 << k {
                return Err(Error::NotFound { k });
            }
            for indices in (0..d).combinations(k) {
                let mut witnesses: Vec<Option<&Vertex>> = vec![None; 1 << k];
                let mut found = 0;
                for x in &vertices {
                    let slot = &mut witnesses[pattern_id(x, &indices)];
                    if slot.is_none() {
                        *slot = Some(x);
                        found += 1;
                        if found == witnesses.len() {
                            break;
                        }
                    }
                }
                if found == witnesses.len() {
                    let witnesses = witnesses
                        .into_iter()
                        .enumerate()
                        .map(|(id, x)| (pattern_bits(id, k), x.expect("all patterns found").clone()))
                        .collect();
                    return Ok(ShatteredSet { indices, witnesses });
                }
            }
            Err(Error::NotFound { k })
        }
    }
}
