//! Per-electrode Boolean functions and their two-level minimisation.
//!
//! Inputs are `k`-bit words with `x_0` in the most significant bit, matching
//! the machine's state encoding. Minimisation is Quine-McCluskey: all prime
//! implicants by iterated merging, then a cover. For `k <= 6` the cover is
//! exact (fewest terms, then fewest literals, then the lexicographically
//! smallest term list); wider tables fall back to a greedy cover with a
//! redundancy sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

pub const MAX_ARITY: usize = 16;
pub const EXACT_ARITY: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TruthTable {
    arity: usize,
    bits: Vec<bool>,
}

impl TruthTable {
    pub fn new(arity: usize, bits: Vec<bool>) -> Result<Self> {
        if arity > MAX_ARITY {
            return Err(Error::param("arity", format!("at most {MAX_ARITY}")));
        }
        if bits.len() != 1 << arity {
            return Err(Error::LengthMismatch {
                expected: 1 << arity,
                actual: bits.len(),
            });
        }
        Ok(TruthTable { arity, bits })
    }

    pub fn from_fn(arity: usize, f: impl Fn(u32) -> bool) -> Result<Self> {
        if arity > MAX_ARITY {
            return Err(Error::param("arity", format!("at most {MAX_ARITY}")));
        }
        Self::new(arity, (0..1u32 << arity).map(f).collect())
    }

    /// Parses a `2^k`-character string of `0`/`1`, input 0 first.
    pub fn from_bitstring(s: &str) -> Result<Self> {
        let s = s.trim();
        let arity = s.len().trailing_zeros() as usize;
        if s.is_empty() || 1 << arity != s.len() {
            return Err(Error::Domain(format!(
                "truth table length {} is not a power of two",
                s.len()
            )));
        }
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Domain(format!("`{c}` is not a bit"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(arity, bits)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, input: u32) -> bool {
        self.bits[input as usize]
    }

    pub fn minterms(&self) -> Vec<u32> {
        (0..self.bits.len() as u32).filter(|&v| self.bits[v as usize]).collect()
    }
}

/// Splits `g` into one table per electrode: table `i` holds bit `i` of the
/// output state, electrode 0 being the most significant bit.
pub fn tables_from_g(g: &BTreeMap<u32, u32>, k: usize) -> Result<Vec<TruthTable>> {
    if k > MAX_ARITY {
        return Err(Error::param("k", format!("at most {MAX_ARITY}")));
    }
    let outputs = (0..1u32 << k)
        .map(|v| g.get(&v).copied().ok_or(Error::MissingEntry(v)))
        .collect::<Result<Vec<_>>>()?;
    (0..k)
        .map(|i| {
            let shift = k - 1 - i;
            TruthTable::new(k, outputs.iter().map(|s| (s >> shift) & 1 == 1).collect())
        })
        .collect()
}

/// A product term: input `v` satisfies it when `v & mask == value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Implicant {
    pub mask: u32,
    pub value: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Literal {
    Positive,
    Negated,
    Absent,
}

impl Implicant {
    pub const TRUE: Implicant = Implicant { mask: 0, value: 0 };

    pub fn minterm(v: u32, arity: usize) -> Self {
        let mask = if arity == 0 { 0 } else { u32::MAX >> (32 - arity) };
        Implicant { mask, value: v & mask }
    }

    #[inline]
    pub fn covers(&self, v: u32) -> bool {
        v & self.mask == self.value
    }

    pub fn literal_count(&self) -> u32 {
        self.mask.count_ones()
    }

    /// Literal of variable `x_i` in a term over `arity` variables.
    pub fn literal(&self, i: usize, arity: usize) -> Literal {
        let bit = 1 << (arity - 1 - i);
        if self.mask & bit == 0 {
            Literal::Absent
        } else if self.value & bit != 0 {
            Literal::Positive
        } else {
            Literal::Negated
        }
    }

    /// Ordering key: literals of `x_0, x_1, ...` compared in turn with
    /// positive < negated < absent.
    fn order_key(&self, arity: usize) -> u64 {
        (0..arity).fold(0u64, |acc, i| {
            acc * 3
                + match self.literal(i, arity) {
                    Literal::Positive => 0,
                    Literal::Negated => 1,
                    Literal::Absent => 2,
                }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dnf {
    arity: usize,
    terms: Vec<Implicant>,
}

impl Dnf {
    /// Builds a DNF, dropping duplicate terms and sorting the rest.
    pub fn new(arity: usize, terms: Vec<Implicant>) -> Self {
        let mut terms: Vec<Implicant> = terms
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        terms.sort_by_key(|t| t.order_key(arity));
        Dnf { arity, terms }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> &[Implicant] {
        &self.terms
    }

    pub fn literal_count(&self) -> u32 {
        self.terms.iter().map(Implicant::literal_count).sum()
    }

    pub fn evaluate_value(&self, v: u32) -> bool {
        self.terms.iter().any(|t| t.covers(v))
    }

    pub fn evaluate(&self, input: &[bool]) -> Result<bool> {
        if input.len() != self.arity {
            return Err(Error::LengthMismatch {
                expected: self.arity,
                actual: input.len(),
            });
        }
        let v = input.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
        Ok(self.evaluate_value(v))
    }

    pub fn to_table(&self) -> TruthTable {
        TruthTable {
            arity: self.arity,
            bits: (0..1u32 << self.arity).map(|v| self.evaluate_value(v)).collect(),
        }
    }
}

impl fmt::Display for Dnf {
    /// Products of `x<i>` / `!x<i>` joined by `·`, terms joined by ` + `.
    /// The constants print as `0` and `1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (n, t) in self.terms.iter().enumerate() {
            if n > 0 {
                f.write_str(" + ")?;
            }
            if t.mask == 0 {
                f.write_str("1")?;
                continue;
            }
            let mut first = true;
            for i in 0..self.arity {
                let lit = match t.literal(i, self.arity) {
                    Literal::Absent => continue,
                    Literal::Positive => "",
                    Literal::Negated => "!",
                };
                if !first {
                    f.write_str("·")?;
                }
                first = false;
                write!(f, "{lit}x{i}")?;
            }
        }
        Ok(())
    }
}

/// All prime implicants of the table's on-set.
pub fn prime_implicants(t: &TruthTable) -> Vec<Implicant> {
    let mut current: BTreeSet<Implicant> = t
        .minterms()
        .into_iter()
        .map(|v| Implicant::minterm(v, t.arity))
        .collect();
    let mut primes = BTreeSet::new();
    while !current.is_empty() {
        let mut next = BTreeSet::new();
        let mut merged = BTreeSet::new();
        // Group by mask; two cubes merge when they share a mask and differ in
        // exactly one cared-for bit.
        let mut by_mask: BTreeMap<u32, Vec<Implicant>> = BTreeMap::new();
        for c in &current {
            by_mask.entry(c.mask).or_default().push(*c);
        }
        for (mask, cubes) in &by_mask {
            let values: BTreeSet<u32> = cubes.iter().map(|c| c.value).collect();
            for c in cubes {
                let mut bits = *mask;
                while bits != 0 {
                    let bit = bits & bits.wrapping_neg();
                    bits &= bits - 1;
                    if c.value & bit == 0 && values.contains(&(c.value | bit)) {
                        next.insert(Implicant {
                            mask: mask & !bit,
                            value: c.value,
                        });
                        merged.insert(*c);
                        merged.insert(Implicant {
                            mask: *mask,
                            value: c.value | bit,
                        });
                    }
                }
            }
        }
        primes.extend(current.difference(&merged).copied());
        current = next;
    }
    let mut out: Vec<Implicant> = primes.into_iter().collect();
    out.sort_by_key(|p| p.order_key(t.arity));
    out
}

/// Minimal two-level sum-of-products equivalent to `t`.
pub fn minimize(t: &TruthTable) -> Dnf {
    let minterms = t.minterms();
    if minterms.is_empty() {
        return Dnf::new(t.arity, Vec::new());
    }
    if minterms.len() == t.bits.len() {
        return Dnf::new(t.arity, vec![Implicant::TRUE]);
    }
    let primes = prime_implicants(t);
    let chosen = if t.arity <= EXACT_ARITY {
        exact_cover(&primes, &minterms)
    } else {
        greedy_cover(&primes, &minterms)
    };
    Dnf::new(t.arity, chosen.into_iter().map(|i| primes[i]).collect())
}

/// Branch and bound over the prime chart. Minterm sets fit in a u64.
fn exact_cover(primes: &[Implicant], minterms: &[u32]) -> Vec<usize> {
    let full: u64 = if minterms.len() == 64 {
        u64::MAX
    } else {
        (1u64 << minterms.len()) - 1
    };
    let cover: Vec<u64> = primes
        .iter()
        .map(|p| {
            minterms
                .iter()
                .enumerate()
                .filter(|(_, &m)| p.covers(m))
                .fold(0u64, |acc, (bit, _)| acc | 1 << bit)
        })
        .collect();
    let by_minterm: Vec<Vec<usize>> = (0..minterms.len())
        .map(|m| (0..primes.len()).filter(|&p| cover[p] >> m & 1 == 1).collect())
        .collect();
    let lits: Vec<u32> = primes.iter().map(Implicant::literal_count).collect();

    // Essential primes belong to every cover.
    let mut chosen: Vec<usize> = by_minterm
        .iter()
        .filter(|ps| ps.len() == 1)
        .map(|ps| ps[0])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let covered = chosen.iter().fold(0u64, |acc, &p| acc | cover[p]);

    let mut search = CoverSearch {
        cover: &cover,
        by_minterm: &by_minterm,
        lits: &lits,
        full,
        best: None,
    };
    let cost = (chosen.len(), chosen.iter().map(|&p| lits[p]).sum());
    search.run(&mut chosen, covered, cost);
    search.best.map(|(_, set)| set).unwrap_or_default()
}

struct CoverSearch<'a> {
    cover: &'a [u64],
    by_minterm: &'a [Vec<usize>],
    lits: &'a [u32],
    full: u64,
    best: Option<((usize, u32), Vec<usize>)>,
}

impl CoverSearch<'_> {
    fn run(&mut self, chosen: &mut Vec<usize>, covered: u64, cost: (usize, u32)) {
        if covered == self.full {
            let mut set = chosen.clone();
            set.sort_unstable();
            let better = match &self.best {
                None => true,
                Some((bc, bs)) => cost < *bc || (cost == *bc && set < *bs),
            };
            if better {
                self.best = Some((cost, set));
            }
            return;
        }
        if let Some((bc, _)) = &self.best {
            if self.lower_bound(covered, cost) > *bc {
                return;
            }
        }
        // Branch on the uncovered minterm with the fewest candidate primes.
        let mut open = !covered & self.full;
        let mut pick = usize::MAX;
        let mut fewest = usize::MAX;
        while open != 0 {
            let m = open.trailing_zeros() as usize;
            open &= open - 1;
            if self.by_minterm[m].len() < fewest {
                fewest = self.by_minterm[m].len();
                pick = m;
            }
        }
        let candidates = self.by_minterm;
        for &p in &candidates[pick] {
            chosen.push(p);
            self.run(
                chosen,
                covered | self.cover[p],
                (cost.0 + 1, cost.1 + self.lits[p]),
            );
            chosen.pop();
        }
    }

    /// Count of uncovered minterms with pairwise-disjoint candidate sets,
    /// each of which needs its own prime.
    fn lower_bound(&self, covered: u64, cost: (usize, u32)) -> (usize, u32) {
        let mut open = !covered & self.full;
        let mut blocked = 0u64;
        let mut extra = 0usize;
        let mut extra_lits = 0u32;
        while open != 0 {
            let m = open.trailing_zeros() as usize;
            open &= open - 1;
            if blocked >> m & 1 == 1 {
                continue;
            }
            extra += 1;
            let mut cheapest = u32::MAX;
            for &p in &self.by_minterm[m] {
                blocked |= self.cover[p];
                cheapest = cheapest.min(self.lits[p]);
            }
            extra_lits += cheapest;
        }
        (cost.0 + extra, cost.1 + extra_lits)
    }
}

fn greedy_cover(primes: &[Implicant], minterms: &[u32]) -> Vec<usize> {
    let mut open: BTreeSet<u32> = minterms.iter().copied().collect();
    let mut chosen = Vec::new();
    // Essentials first.
    for &m in minterms {
        let covering: Vec<usize> = (0..primes.len()).filter(|&p| primes[p].covers(m)).collect();
        if covering.len() == 1 && !chosen.contains(&covering[0]) {
            chosen.push(covering[0]);
        }
    }
    for &p in &chosen {
        open.retain(|&m| !primes[p].covers(m));
    }
    while !open.is_empty() {
        let best = (0..primes.len())
            .filter(|p| !chosen.contains(p))
            .max_by_key(|&p| {
                let gain = open.iter().filter(|&&m| primes[p].covers(m)).count();
                (gain, std::cmp::Reverse(primes[p].literal_count()), std::cmp::Reverse(p))
            })
            .expect("primes cover every minterm");
        open.retain(|&m| !primes[best].covers(m));
        chosen.push(best);
    }
    // Drop terms whose minterms are all covered elsewhere, most literals first.
    let mut order: Vec<usize> = (0..chosen.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse((primes[chosen[i]].literal_count(), i)));
    let mut keep = vec![true; chosen.len()];
    for i in order {
        keep[i] = false;
        let still = minterms.iter().all(|&m| {
            chosen
                .iter()
                .zip(&keep)
                .any(|(&p, &k)| k && primes[p].covers(m))
        });
        if !still {
            keep[i] = true;
        }
    }
    chosen
        .into_iter()
        .zip(keep)
        .filter(|&(_, k)| k)
        .map(|(p, _)| p)
        .collect()
}

pub fn dnf_lines(dnfs: &[Dnf]) -> String {
    dnfs.iter()
        .enumerate()
        .map(|(i, d)| format!("e{i}: {d}\n"))
        .collect()
}

pub fn dnf_csv(dnfs: &[Dnf], comment: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(c) = comment {
        s.push_str(&format!("# {c}\n"));
    }
    s.push_str("electrode,dnf\n");
    for (i, d) in dnfs.iter().enumerate() {
        s.push_str(&format!("{i},{d}\n"));
    }
    s
}
