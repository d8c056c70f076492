//! The unit group `(Z/nZ)^x`, its subgroups and cosets.
//!
//! A [`UnitGroup`] is stored as a direct product of cyclic factors, one per
//! odd prime-power component (generated by its smallest primitive root) and
//! zero, one or two for the 2-power component (`-1` and `5` when `2^k`,
//! `k >= 3`). Each factor carries a discrete-log table over its prime-power
//! modulus, which the character layer reads.
//!
//! Subgroups and cosets are explicit sorted element sets with a dense bitset
//! for membership.

use std::sync::Arc;

use bitvec::prelude::*;

use crate::arith::{self, euler_phi, factor, gcd, mod_inverse, mul_mod, pow_mod, Factorization};
use crate::{Error, Result};

/// Largest modulus for which groups are materialised.
pub const GROUP_CUTOFF: u64 = arith::ORACLE_CUTOFF;

const NO_LOG: u32 = u32::MAX;

/// One cyclic factor of the unit group.
#[derive(Debug, Clone)]
pub struct CyclicFactor {
    /// Generator lifted to a residue mod `n` (1 on every other component).
    pub generator: u64,
    /// Generator as a residue mod `prime_power`.
    pub local_generator: u64,
    pub order: u64,
    pub prime: u64,
    pub prime_power: u64,
    logs: Vec<u32>,
}

impl CyclicFactor {
    /// Exponent of `m` against this factor's generator, or `None` if `m` is
    /// not a unit modulo the component's prime power.
    #[inline]
    pub fn log(&self, m: u64) -> Option<u64> {
        match self.logs[(m % self.prime_power) as usize] {
            NO_LOG => None,
            e => Some(e as u64),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnitGroup {
    n: u64,
    factorization: Factorization,
    phi: u64,
    factors: Vec<CyclicFactor>,
}

/// Builds `(Z/nZ)^x` for `2 <= n <= GROUP_CUTOFF`.
pub fn unit_group(n: u64) -> Result<Arc<UnitGroup>> {
    UnitGroup::new(n).map(Arc::new)
}

impl UnitGroup {
    pub fn new(n: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("unit group needs n >= 2, got {n}")));
        }
        if n > GROUP_CUTOFF {
            return Err(Error::AboveCutoff {
                modulus: n,
                cutoff: GROUP_CUTOFF,
            });
        }
        let factorization = factor(n)?;
        let phi = euler_phi(&factorization);
        let mut factors = Vec::new();
        for (p, k, pk) in factorization.prime_powers() {
            let lift = |g: u64| crt_lift(g, pk, n);
            if p == 2 {
                match k {
                    1 => {}
                    2 => {
                        let mut logs = vec![NO_LOG; 4];
                        logs[1] = 0;
                        logs[3] = 1;
                        factors.push(CyclicFactor {
                            generator: lift(3),
                            local_generator: 3,
                            order: 2,
                            prime: 2,
                            prime_power: 4,
                            logs,
                        });
                    }
                    _ => {
                        let order5 = pk / 4;
                        let mut sign_logs = vec![NO_LOG; pk as usize];
                        let mut five_logs = vec![NO_LOG; pk as usize];
                        let mut v = 1u64;
                        for j in 0..order5 {
                            sign_logs[v as usize] = 0;
                            sign_logs[(pk - v) as usize] = 1;
                            five_logs[v as usize] = j as u32;
                            five_logs[(pk - v) as usize] = j as u32;
                            v = v * 5 % pk;
                        }
                        factors.push(CyclicFactor {
                            generator: lift(pk - 1),
                            local_generator: pk - 1,
                            order: 2,
                            prime: 2,
                            prime_power: pk,
                            logs: sign_logs,
                        });
                        factors.push(CyclicFactor {
                            generator: lift(5),
                            local_generator: 5,
                            order: order5,
                            prime: 2,
                            prime_power: pk,
                            logs: five_logs,
                        });
                    }
                }
            } else {
                let order = pk / p * (p - 1);
                let g = primitive_root(p, pk, order);
                let mut logs = vec![NO_LOG; pk as usize];
                let mut v = 1u64;
                for j in 0..order {
                    logs[v as usize] = j as u32;
                    v = mul_mod(v, g, pk);
                }
                factors.push(CyclicFactor {
                    generator: lift(g),
                    local_generator: g,
                    order,
                    prime: p,
                    prime_power: pk,
                    logs,
                });
            }
        }
        Ok(UnitGroup {
            n,
            factorization,
            phi,
            factors,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.n
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    /// `phi(n)`, the group order.
    pub fn order(&self) -> u64 {
        self.phi
    }

    pub fn cyclic_factors(&self) -> &[CyclicFactor] {
        &self.factors
    }

    /// Exponent of the group: lcm of the cyclic factor orders.
    pub fn exponent(&self) -> u64 {
        self.factors
            .iter()
            .fold(1, |acc, f| num_integer::lcm(acc, f.order))
    }

    #[inline]
    pub fn is_unit(&self, m: u64) -> bool {
        gcd(m % self.n, self.n) == 1
    }

    /// Units in increasing order.
    pub fn units(&self) -> impl Iterator<Item = u64> + '_ {
        (1..self.n).filter(move |&m| gcd(m, self.n) == 1)
    }

    /// Exponent vector of `m` against the cyclic factors, `None` off the units.
    pub fn discrete_logs(&self, m: u64) -> Option<Vec<u64>> {
        if !self.is_unit(m) {
            return None;
        }
        self.factors.iter().map(|f| f.log(m)).collect()
    }

    /// `prod g_i^{e_i} mod n`.
    pub fn from_exponents(&self, exponents: &[u64]) -> u64 {
        assert_eq!(exponents.len(), self.factors.len());
        self.factors
            .iter()
            .zip(exponents)
            .fold(1 % self.n, |acc, (f, &e)| {
                mul_mod(acc, pow_mod(f.generator, e, self.n), self.n)
            })
    }

    fn reduce(&self, m: i64) -> u64 {
        m.rem_euclid(self.n as i64) as u64
    }
}

/// The residue mod `n` that is `g` mod `pk` and 1 mod `n / pk`.
fn crt_lift(g: u64, pk: u64, n: u64) -> u64 {
    let rest = n / pk;
    if rest == 1 {
        return g % n;
    }
    let inv = mod_inverse(rest % pk, pk).expect("prime-power components are coprime");
    let t = mul_mod((g + pk - 1) % pk, inv, pk);
    (1 + rest * t) % n
}

/// Smallest generator of `(Z/p^kZ)^x`, `p` odd, checked against the
/// prime divisors of the group order.
fn primitive_root(p: u64, pk: u64, order: u64) -> u64 {
    let order_primes: Vec<u64> = factor(order).expect("order >= 1").primes().collect();
    (2..pk)
        .find(|&g| g % p != 0 && order_primes.iter().all(|&l| pow_mod(g, order / l, pk) != 1))
        .unwrap_or(1) // pk = 3 has generator 2, so this is only hit for p^k = 1
}

/// Multiplicative order of a unit `g` modulo `n`, by stepping through powers.
pub fn multiplicative_order(g: u64, n: u64) -> u64 {
    let mut v = g % n;
    let mut k = 1;
    while v != 1 % n {
        v = mul_mod(v, g, n);
        k += 1;
    }
    k
}

/// Is `u` a d-th power among the units mod `n`? Uses only modular
/// exponentiation on each prime-power component, no tables.
pub fn is_dth_power_residue(u: u64, f: &Factorization, d: u64) -> bool {
    if gcd(u % f.n().max(1), f.n()) != 1 {
        return false;
    }
    f.prime_powers().all(|(p, k, pk)| {
        let x = u % pk;
        if p != 2 {
            let phi = pk / p * (p - 1);
            let g = gcd(d, phi);
            return pow_mod(x, phi / g, pk) == 1;
        }
        match k {
            1 => true,
            2 => d % 2 == 1 || x == 1,
            _ => {
                if d % 2 == 1 {
                    return true;
                }
                let half = pk / 4; // order of 5
                let g = gcd(d, half);
                x % 4 == 1 && pow_mod(x, half / g, pk) == 1
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Subgroups
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Subgroup {
    group: Arc<UnitGroup>,
    elements: Vec<u64>,
    members: BitVec<u64, Lsb0>,
    generators: Vec<u64>,
}

impl Subgroup {
    fn from_members(group: Arc<UnitGroup>, members: BitVec<u64, Lsb0>, generators: Vec<u64>) -> Self {
        let elements = members.iter_ones().map(|i| i as u64).collect();
        Subgroup {
            group,
            elements,
            members,
            generators,
        }
    }

    /// The smallest subgroup containing `gens`.
    pub fn generated_by(group: Arc<UnitGroup>, gens: &[u64]) -> Result<Self> {
        let n = group.modulus();
        let gens: Vec<u64> = gens.iter().map(|&g| g % n).collect();
        if let Some(&bad) = gens.iter().find(|&&g| gcd(g, n) != 1) {
            return Err(Error::NotAUnit {
                value: bad,
                modulus: n,
            });
        }
        let mut members = bitvec![u64, Lsb0; 0; n as usize];
        let mut frontier = vec![1 % n];
        members.set((1 % n) as usize, true);
        while let Some(e) = frontier.pop() {
            for &g in &gens {
                let v = mul_mod(e, g, n);
                if !members[v as usize] {
                    members.set(v as usize, true);
                    frontier.push(v);
                }
            }
        }
        Ok(Self::from_members(group, members, gens))
    }

    /// `{x^d mod n : gcd(x, n) = 1}` by explicit enumeration over the units.
    pub fn dth_powers(group: Arc<UnitGroup>, d: u64) -> Self {
        let n = group.modulus();
        let mut members = bitvec![u64, Lsb0; 0; n as usize];
        for x in group.units() {
            members.set(pow_mod(x, d, n) as usize, true);
        }
        let generators = group
            .cyclic_factors()
            .iter()
            .map(|f| pow_mod(f.generator, d, n))
            .collect();
        Self::from_members(group, members, generators)
    }

    pub fn full(group: Arc<UnitGroup>) -> Self {
        let gens: Vec<u64> = group.cyclic_factors().iter().map(|f| f.generator).collect();
        Self::generated_by(group, &gens).expect("cyclic generators are units")
    }

    pub fn trivial(group: Arc<UnitGroup>) -> Self {
        Self::generated_by(group, &[]).expect("no generators")
    }

    pub fn group(&self) -> &Arc<UnitGroup> {
        &self.group
    }

    pub fn modulus(&self) -> u64 {
        self.group.modulus()
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    /// Generators recorded at construction; the subgroup is their closure.
    pub fn generators(&self) -> &[u64] {
        &self.generators
    }

    pub fn order(&self) -> u64 {
        self.elements.len() as u64
    }

    /// `phi(n) / |G|`.
    pub fn index(&self) -> u64 {
        self.group.order() / self.order()
    }

    pub fn contains(&self, m: i64) -> bool {
        self.members[self.group.reduce(m) as usize]
    }

    #[inline]
    pub fn contains_residue(&self, r: u64) -> bool {
        self.members[r as usize]
    }

    pub fn is_subgroup_of(&self, other: &Subgroup) -> bool {
        self.modulus() == other.modulus() && self.elements.iter().all(|&e| other.members[e as usize])
    }

    /// Every coset of this subgroup, each labelled by its smallest element.
    pub fn cosets(self: &Arc<Self>) -> Vec<Coset> {
        let n = self.modulus();
        let mut seen = bitvec![u64, Lsb0; 0; n as usize];
        let mut out = Vec::new();
        for a in self.group.units() {
            if seen[a as usize] {
                continue;
            }
            let c = Coset::new(a, Arc::clone(self)).expect("a is a unit");
            for &e in c.elements() {
                seen.set(e as usize, true);
            }
            out.push(c);
        }
        out
    }
}

/// How a subgroup of `(Z/qZ)^x` is chosen for each modulus `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubgroupRule {
    /// The whole unit group.
    Full,
    /// The d-th power residues.
    DthPowers(u64),
    /// The closure of these residues (each reduced mod `q`).
    Generators(Vec<u64>),
}

impl SubgroupRule {
    pub fn build(&self, group: &Arc<UnitGroup>) -> Result<Subgroup> {
        match self {
            SubgroupRule::Full => Ok(Subgroup::full(Arc::clone(group))),
            SubgroupRule::DthPowers(d) => Ok(Subgroup::dth_powers(Arc::clone(group), *d)),
            SubgroupRule::Generators(gens) => Subgroup::generated_by(Arc::clone(group), gens),
        }
    }

    /// `|G|` for modulus `q`, from closed forms where one exists.
    pub fn order(&self, q: u64) -> Result<u64> {
        let f = factor(q)?;
        match self {
            SubgroupRule::Full => Ok(euler_phi(&f)),
            SubgroupRule::DthPowers(d) => Ok(arith::r_d(&f, *d)),
            SubgroupRule::Generators(_) => Ok(self.build(&unit_group(q)?)?.order()),
        }
    }
}

pub fn dth_power_subgroup(g: &Arc<UnitGroup>, d: u64) -> Subgroup {
    Subgroup::dth_powers(Arc::clone(g), d)
}

pub fn subgroup_from_generators(g: &Arc<UnitGroup>, gens: &[u64]) -> Result<Subgroup> {
    Subgroup::generated_by(Arc::clone(g), gens)
}

pub fn index(g: &Subgroup) -> u64 {
    g.index()
}

// ---------------------------------------------------------------------------
// Cosets
// ---------------------------------------------------------------------------

/// `aG = {a g mod n : g in G}` for a unit `a`.
#[derive(Debug, Clone)]
pub struct Coset {
    subgroup: Arc<Subgroup>,
    representative: u64,
    elements: Vec<u64>,
    members: BitVec<u64, Lsb0>,
}

impl Coset {
    pub fn new(a: u64, subgroup: Arc<Subgroup>) -> Result<Self> {
        let n = subgroup.modulus();
        let a = a % n;
        if gcd(a, n) != 1 {
            return Err(Error::NotAUnit { value: a, modulus: n });
        }
        let mut members = bitvec![u64, Lsb0; 0; n as usize];
        for &g in subgroup.elements() {
            members.set(mul_mod(a, g, n) as usize, true);
        }
        let elements = members.iter_ones().map(|i| i as u64).collect();
        Ok(Coset {
            subgroup,
            representative: a,
            elements,
            members,
        })
    }

    pub fn subgroup(&self) -> &Arc<Subgroup> {
        &self.subgroup
    }

    pub fn representative(&self) -> u64 {
        self.representative
    }

    pub fn modulus(&self) -> u64 {
        self.subgroup.modulus()
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> u64 {
        self.elements.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// True iff `p mod n` lies in the coset (so in particular `gcd(p, n) = 1`).
    pub fn contains(&self, p: i64) -> bool {
        self.members[self.subgroup.group.reduce(p) as usize]
    }

    #[inline]
    pub fn contains_residue(&self, r: u64) -> bool {
        self.members[r as usize]
    }

    /// The same test routed through the subgroup: `a^{-1} p mod n in G`.
    pub fn contains_via_inverse(&self, p: i64) -> bool {
        let n = self.modulus();
        let r = self.subgroup.group.reduce(p);
        if gcd(r, n) != 1 {
            return false;
        }
        let inv = mod_inverse(self.representative, n).expect("representative is a unit");
        self.subgroup.contains_residue(mul_mod(inv, r, n))
    }
}

pub fn coset(a: u64, g: &Arc<Subgroup>) -> Result<Coset> {
    Coset::new(a, Arc::clone(g))
}

pub fn coset_contains(c: &Coset, p: i64) -> bool {
    c.contains(p)
}
