//! Factorization and the multiplicative arithmetic functions built on it.
//!
//! Every closed form here has a brute-force counterpart ([`brute_u_d`],
//! [`brute_r_d`], [`BruteForce`]) so that the per-prime-power case split can be
//! cross-checked by exhaustive enumeration.

use num_bigint::BigInt;
use num_integer::Integer;

use crate::rational::Rational;
use crate::{Error, Result};

/// Largest modulus the exhaustive oracles accept by default.
pub const ORACLE_CUTOFF: u64 = 1_000_000;

/// Trial division runs up to this bound before switching to Pollard rho.
const TRIAL_BOUND: u64 = 1 << 12;

// ---------------------------------------------------------------------------
// Modular helpers
// ---------------------------------------------------------------------------

#[inline]
pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m` by the extended Euclidean algorithm.
pub fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Deterministic Miller-Rabin for the full `u64` range.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Brent's variant of Pollard rho. `n` must be odd and composite.
fn pollard_rho(n: u64) -> u64 {
    let mut c = 1u64;
    loop {
        let f = |x: u64| ((x as u128 * x as u128 + c as u128) % n as u128) as u64;
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        let mut q = 1u64;
        let mut r = 1u64;
        let mut ys = 2u64;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..(128.min(r - k)) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = gcd(q, n);
                k += 128;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

fn split_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(n);
    split_into(d, out);
    split_into(n / d, out);
}

// ---------------------------------------------------------------------------
// Factorization
// ---------------------------------------------------------------------------

/// Prime-power decomposition `n = prod p^e` with strictly increasing primes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factorization {
    n: u64,
    factors: Vec<(u64, u32)>,
}

/// Factors `n >= 1`: trial division up to a small bound, then Pollard rho.
pub fn factor(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::InvalidInput("cannot factor 0".into()));
    }
    let mut m = n;
    let mut factors = Vec::new();
    let push = |p: u64, m: &mut u64, factors: &mut Vec<(u64, u32)>| {
        let mut e = 0;
        while (*m).is_multiple_of(p) {
            *m /= p;
            e += 1;
        }
        if e > 0 {
            factors.push((p, e));
        }
    };
    push(2, &mut m, &mut factors);
    let mut p = 3;
    while p <= TRIAL_BOUND && p * p <= m {
        push(p, &mut m, &mut factors);
        p += 2;
    }
    if m > 1 {
        if m < p * p {
            factors.push((m, 1));
        } else {
            let mut primes = Vec::new();
            split_into(m, &mut primes);
            primes.sort_unstable();
            for q in primes {
                match factors.last_mut() {
                    Some((last, e)) if *last == q => *e += 1,
                    _ => factors.push((q, 1)),
                }
            }
        }
    }
    Ok(Factorization { n, factors })
}

impl Factorization {
    /// Builds a factorization from explicit parts, checking every invariant.
    pub fn from_factors(factors: Vec<(u64, u32)>) -> Result<Self> {
        let mut n: u64 = 1;
        let mut prev = 1;
        for &(p, e) in &factors {
            if p <= prev || e == 0 || !is_prime(p) {
                return Err(Error::InvalidInput(format!(
                    "({p}, {e}) breaks the prime-power list invariants"
                )));
            }
            prev = p;
            let pk = p
                .checked_pow(e)
                .ok_or_else(|| Error::InvalidInput("factorization overflows u64".into()))?;
            n = n
                .checked_mul(pk)
                .ok_or_else(|| Error::InvalidInput("factorization overflows u64".into()))?;
        }
        Ok(Factorization { n, factors })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    /// `(p, e, p^e)` for every prime-power factor.
    pub fn prime_powers(&self) -> impl Iterator<Item = (u64, u32, u64)> + '_ {
        self.factors.iter().map(|&(p, e)| (p, e, p.pow(e)))
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn radical(&self) -> u64 {
        self.primes().product()
    }

    /// Squarefree divisors of `n` paired with their Mobius sign.
    pub fn squarefree_divisors(&self) -> Vec<(u64, i8)> {
        let mut out = vec![(1u64, 1i8)];
        for p in self.primes() {
            let len = out.len();
            for i in 0..len {
                let (d, s) = out[i];
                out.push((d * p, -s));
            }
        }
        out
    }

    pub fn divisors(&self) -> Vec<u64> {
        let mut out = vec![1u64];
        for (p, e, _) in self.prime_powers() {
            let len = out.len();
            let mut pk = 1;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    out.push(out[i] * pk);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

// ---------------------------------------------------------------------------
// Arithmetic functions
// ---------------------------------------------------------------------------

pub fn euler_phi(f: &Factorization) -> u64 {
    f.factors.iter().map(|&(p, e)| p.pow(e - 1) * (p - 1)).product()
}

pub fn tau(f: &Factorization) -> u64 {
    f.factors.iter().map(|&(_, e)| e as u64 + 1).product()
}

pub fn omega(f: &Factorization) -> u32 {
    f.factors.len() as u32
}

/// Number of solutions of `m^d = 1 (mod p^k)`.
pub fn u_d_prime_power(p: u64, k: u32, d: u64) -> u64 {
    let phi = p.pow(k - 1) * (p - 1);
    if p == 2 && k >= 3 && d.is_multiple_of(2) {
        gcd(2 * d, phi)
    } else {
        gcd(d, phi)
    }
}

/// Number of d-th roots of unity modulo `n`; `u_d(1) = 1`.
pub fn u_d(f: &Factorization, d: u64) -> u64 {
    assert!(d >= 1, "d must be positive");
    f.factors.iter().map(|&(p, k)| u_d_prime_power(p, k, d)).product()
}

/// Number of distinct d-th powers among the units modulo `n`; `r_d(1) = 1`.
pub fn r_d(f: &Factorization, d: u64) -> u64 {
    assert!(d >= 1, "d must be positive");
    f.factors
        .iter()
        .map(|&(p, k)| p.pow(k - 1) * (p - 1) / u_d_prime_power(p, k, d))
        .product()
}

/// `r_d(q) / q` as an exact rational.
pub fn s_d(q: u64, d: u64) -> Result<Rational> {
    let f = factor(q)?;
    Ok(Rational::new(BigInt::from(r_d(&f, d)), BigInt::from(q)))
}

// ---------------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------------

/// Exhaustive counterparts of [`u_d`] and [`r_d`], refusing moduli above `cutoff`.
#[derive(Debug, Clone, Copy)]
pub struct BruteForce {
    pub cutoff: u64,
}

impl Default for BruteForce {
    fn default() -> Self {
        BruteForce {
            cutoff: ORACLE_CUTOFF,
        }
    }
}

impl BruteForce {
    fn check(&self, n: u64, d: u64) -> Result<()> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput("n and d must be positive".into()));
        }
        if n > self.cutoff {
            return Err(Error::AboveCutoff {
                modulus: n,
                cutoff: self.cutoff,
            });
        }
        Ok(())
    }

    /// `Card{m in Z/nZ : m^d = 1 (mod n)}`.
    pub fn u_d(&self, n: u64, d: u64) -> Result<u64> {
        self.check(n, d)?;
        if n == 1 {
            return Ok(1);
        }
        Ok((0..n).filter(|&m| pow_mod(m, d, n) == 1).count() as u64)
    }

    /// `Card{m^d mod n : gcd(m, n) = 1}`.
    pub fn r_d(&self, n: u64, d: u64) -> Result<u64> {
        self.check(n, d)?;
        if n == 1 {
            return Ok(1);
        }
        let mut seen = vec![false; n as usize];
        let mut count = 0;
        for m in 1..n {
            if gcd(m, n) == 1 {
                let v = pow_mod(m, d, n) as usize;
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                }
            }
        }
        Ok(count)
    }
}

pub fn brute_u_d(n: u64, d: u64) -> Result<u64> {
    BruteForce::default().u_d(n, d)
}

pub fn brute_r_d(n: u64, d: u64) -> Result<u64> {
    BruteForce::default().r_d(n, d)
}

// ---------------------------------------------------------------------------
// Growth scans
// ---------------------------------------------------------------------------

/// Divisor counts and distinct-prime counts for every `n <= limit`.
pub fn sieve_tau_omega(limit: usize) -> (Vec<u32>, Vec<u8>) {
    let mut tau = vec![0u32; limit + 1];
    let mut omega = vec![0u8; limit + 1];
    for d in 1..=limit {
        for m in (d..=limit).step_by(d) {
            tau[m] += 1;
        }
    }
    for p in 2..=limit {
        if omega[p] == 0 {
            for m in (p..=limit).step_by(p) {
                omega[m] += 1;
            }
        }
    }
    (tau, omega)
}

/// Dyadic-block maxima of `tau(n)/n^eps` and `(2d)^omega(n)/n^eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRow {
    /// The block is `(block_end/2, block_end]`.
    pub block_end: u64,
    pub epsilon: f64,
    pub tau_max: f64,
    pub omega_power_max: f64,
}

/// Scans blocks `(2^(j-1), 2^j]` for `2 <= j <= max_log2`.
///
/// A maximum over all `n <= N` can only grow with `N`, so the scan reports
/// block maxima: the quantity that has to shrink for `tau(n) = o(n^eps)`.
pub fn growth_scan(max_log2: u32, epsilons: &[f64], d: u64) -> Vec<GrowthRow> {
    let limit = 1usize << max_log2;
    let (tau, omega) = sieve_tau_omega(limit);
    let base = (2 * d) as f64;
    let mut rows = Vec::new();
    for &eps in epsilons {
        for j in 2..=max_log2 {
            let lo = (1usize << (j - 1)) + 1;
            let hi = 1usize << j;
            let (mut tmax, mut wmax) = (0f64, 0f64);
            for n in lo..=hi {
                let scale = (n as f64).powf(eps);
                tmax = tmax.max(tau[n] as f64 / scale);
                wmax = wmax.max(base.powi(omega[n] as i32) / scale);
            }
            rows.push(GrowthRow {
                block_end: hi as u64,
                epsilon: eps,
                tau_max: tmax,
                omega_power_max: wmax,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(n: u64) -> Factorization {
        factor(n).unwrap()
    }

    fn trial_division(mut n: u64) -> Vec<(u64, u32)> {
        let mut out = Vec::new();
        let mut p = 2;
        while p * p <= n {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            if e > 0 {
                out.push((p, e));
            }
            p += 1;
        }
        if n > 1 {
            out.push((n, 1));
        }
        out
    }

    #[test]
    fn factor_examples() {
        assert!(factor(0).is_err());
        assert!(f(1).factors().is_empty());
        assert_eq!(f(360).factors(), &[(2, 3), (3, 2), (5, 1)]);
        assert_eq!(f(9991).factors(), &[(97, 1), (103, 1)]);
    }

    #[test]
    fn factor_matches_trial_division() {
        for n in 1..20_000u64 {
            assert_eq!(f(n).factors(), trial_division(n).as_slice(), "n = {n}");
        }
    }

    #[test]
    fn factor_large_semiprimes_via_rho() {
        // 999983 and 1000003 are prime; 10^12 scale products need rho.
        let n = 999_983u64 * 1_000_003;
        assert_eq!(f(n).factors(), &[(999_983, 1), (1_000_003, 1)]);
        let n = 4_294_967_291u64 * 3; // 2^32 - 5 is prime
        assert_eq!(f(n).factors(), &[(3, 1), (4_294_967_291, 1)]);
        let n = 1_000_000_007u64 * 999_999_937;
        let g = f(n);
        assert_eq!(g.factors(), &[(999_999_937, 1), (1_000_000_007, 1)]);
        let n = 2u64.pow(20) * 3u64.pow(5) * 1_000_003;
        assert_eq!(f(n).factors(), &[(2, 20), (3, 5), (1_000_003, 1)]);
    }

    #[test]
    fn from_factors_rejects_bad_lists() {
        assert!(Factorization::from_factors(vec![(3, 1), (2, 1)]).is_err());
        assert!(Factorization::from_factors(vec![(4, 1)]).is_err());
        assert!(Factorization::from_factors(vec![(2, 0)]).is_err());
        assert_eq!(
            Factorization::from_factors(vec![(2, 3), (3, 2), (5, 1)]).unwrap(),
            f(360)
        );
    }

    #[test]
    fn phi_tau_omega_examples() {
        assert_eq!(euler_phi(&f(1)), 1);
        assert_eq!(euler_phi(&f(10)), 4);
        assert_eq!(euler_phi(&f(49)), 42);
        assert_eq!((tau(&f(1)), omega(&f(1))), (1, 0));
        assert_eq!((tau(&f(360)), omega(&f(360))), (24, 3));
        assert_eq!((tau(&f(97)), omega(&f(97))), (2, 1));
    }

    #[test]
    fn phi_and_tau_against_enumeration() {
        for n in 1..600u64 {
            let phi = (1..=n).filter(|&m| gcd(m, n) == 1).count() as u64;
            let t = (1..=n).filter(|&m| n % m == 0).count() as u64;
            assert_eq!(euler_phi(&f(n)), phi);
            assert_eq!(tau(&f(n)), t);
            assert_eq!(f(n).divisors().len() as u64, t);
        }
    }

    #[test]
    fn u_d_and_r_d_examples() {
        assert_eq!(u_d(&f(8), 2), 4);
        assert_eq!(u_d(&f(4), 2), 2);
        assert_eq!(u_d(&f(9), 3), 3);
        assert_eq!(u_d(&f(1), 5), 1);
        assert_eq!(r_d(&f(7), 2), 3);
        assert_eq!(r_d(&f(12), 2), 1);
        assert_eq!(r_d(&f(1), 4), 1);
    }

    #[test]
    fn s_d_examples() {
        use crate::rational::ratio;
        assert_eq!(s_d(49, 2).unwrap(), ratio(3, 7));
        assert_eq!(s_d(1, 2).unwrap(), ratio(1, 1));
        for q in 1..200u64 {
            let expect = Rational::new(euler_phi(&f(q)).into(), q.into());
            assert_eq!(s_d(q, 1).unwrap(), expect);
        }
    }

    #[test]
    fn brute_oracles() {
        assert_eq!(brute_u_d(8, 2).unwrap(), 4);
        assert_eq!(brute_r_d(7, 2).unwrap(), 3);
        for d in 1..8 {
            assert_eq!(brute_u_d(1, d).unwrap(), 1);
            assert_eq!(brute_r_d(1, d).unwrap(), 1);
        }
        let small = BruteForce { cutoff: 100 };
        assert!(matches!(small.u_d(101, 2), Err(Error::AboveCutoff { .. })));
        assert!(brute_u_d(0, 2).is_err());
    }

    #[test]
    fn closed_forms_match_oracles_small_range() {
        for n in 1..=600u64 {
            let fac = f(n);
            for d in 1..=6 {
                assert_eq!(u_d(&fac, d), brute_u_d(n, d).unwrap(), "u_{d}({n})");
                assert_eq!(r_d(&fac, d), brute_r_d(n, d).unwrap(), "r_{d}({n})");
            }
        }
    }

    #[test]
    fn mod_inverse_and_primality() {
        assert_eq!(mod_inverse(3, 7), Some(5));
        assert_eq!(mod_inverse(6, 9), None);
        assert_eq!(mod_inverse(1, 1), Some(0));
        let sieve: Vec<bool> = (0..5000u64)
            .map(|n| n >= 2 && (2..n).take_while(|p| p * p <= n).all(|p| n % p != 0))
            .collect();
        for n in 0..5000u64 {
            assert_eq!(is_prime(n), sieve[n as usize], "n = {n}");
        }
        assert!(is_prime(18_446_744_073_709_551_557)); // largest 64-bit prime
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to 2, 3, 5, 7
    }

    #[test]
    fn squarefree_divisors_carry_mobius_signs() {
        let mut ds = f(60).squarefree_divisors();
        ds.sort_unstable();
        assert_eq!(
            ds,
            vec![
                (1, 1),
                (2, -1),
                (3, -1),
                (5, -1),
                (6, 1),
                (10, 1),
                (15, 1),
                (30, -1)
            ]
        );
    }

    #[test]
    fn tau_block_maxima_shrink_for_half_power() {
        // tau(n)/sqrt(n) peaks at n = 12; block maxima fall from (8, 16] on.
        let rows = growth_scan(20, &[0.5], 2);
        let tail: Vec<_> = rows.iter().filter(|r| r.block_end >= 16).collect();
        for w in tail.windows(2) {
            assert!(w[1].tau_max <= w[0].tau_max, "{:?}", w);
        }
    }

    #[test]
    fn omega_power_block_maxima_jump_at_primorials() {
        // (2d)^omega(n)/n^eps keeps jumping up when a block first contains a
        // new primorial multiple; the scan reports it rather than asserting decay.
        let rows = growth_scan(16, &[0.5], 2);
        let at = |e: u64| rows.iter().find(|r| r.block_end == e).unwrap().omega_power_max;
        assert!(at(1 << 12) > at(1 << 11)); // 2310 * k enters (2048, 4096]
    }
}
