//! Exact counting of integers in a coset below a bound, and the measure of
//! the interval systems built from such cosets.
//!
//! Counts are exact integers, measures exact rationals. The character-sum
//! identity is the one place where floating point enters, and its result is
//! rounded back to an integer under [`INTEGER_TOLERANCE`].

use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};

use crate::arith::{euler_phi, gcd, mod_inverse, mul_mod, tau};
use crate::characters::{pv_bound, quotient_characters, INTEGER_TOLERANCE};
use crate::rational::{self, floor_u64, from_u64, to_f64, Rational};
use crate::residue_group::{unit_group, Coset, Subgroup, SubgroupRule};
use crate::{Error, Result};

fn require_positive(mu: &Rational) -> Result<()> {
    if mu.is_positive() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("mu must be positive, got {mu}")))
    }
}

/// `phi_mu(n)`: integers in `[1, mu n]` coprime to `n`, by direct scan.
pub fn phi_mu(n: u64, mu: &Rational) -> Result<u64> {
    require_positive(mu)?;
    let limit = floor_u64(&(mu * from_u64(n)))?;
    Ok((1..=limit).filter(|&l| gcd(l, n) == 1).count() as u64)
}

/// Inclusion-exclusion count together with its remainder against `mu phi(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveCount {
    pub count: u64,
    /// `count - mu phi(n)`; bounded by `tau(n)` in absolute value.
    pub remainder: Rational,
}

/// `sum_{d | rad(n)} mobius(d) floor(mu n / d)`.
pub fn phi_mu_sieve(n: u64, mu: &Rational) -> Result<SieveCount> {
    require_positive(mu)?;
    let f = crate::arith::factor(n)?;
    let x = mu * from_u64(n);
    let mut total = BigInt::zero();
    for (d, sign) in f.squarefree_divisors() {
        let term = (&x / from_u64(d)).floor().to_integer();
        if sign > 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    let count = floor_u64(&Rational::from_integer(total))?;
    let remainder = from_u64(count) - mu * from_u64(euler_phi(&f));
    Ok(SieveCount { count, remainder })
}

/// Number of `l` in `[1, limit]` whose residue lies in the coset.
pub fn count_upto(limit: u64, c: &Coset) -> u64 {
    let n = c.modulus();
    let full = limit / n * c.len();
    let partial = c.elements().partition_point(|&e| e <= limit % n) as u64;
    full + partial
}

/// `Psi_X(aG)`: integers `l` in `[1, X]` with `l mod n` in the coset.
pub fn psi_count(x: &Rational, c: &Coset) -> Result<u64> {
    if x.is_negative() {
        return Ok(0);
    }
    Ok(count_upto(floor_u64(x)?, c))
}

/// Output of the character-sum route to `Psi_{mu n}(aG)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityValue {
    pub value: u64,
    /// The complex sum before rounding.
    pub raw: Complex64,
    /// Distance of `raw` from `value`.
    pub deviation: f64,
}

/// `(1/d) sum_{k <= mu n} sum_{chi in quot(G)} chi(a^{-1} k)`, rounded.
///
/// Fails with [`Error::NotIntegral`] if the raw sum is farther than
/// [`INTEGER_TOLERANCE`] from an integer.
pub fn psi_character_identity(mu: &Rational, c: &Coset) -> Result<IdentityValue> {
    require_positive(mu)?;
    let n = c.modulus();
    let limit = floor_u64(&(mu * from_u64(n)))?;
    let inv = mod_inverse(c.representative(), n).expect("coset representative is a unit");
    let quot = quotient_characters(c.subgroup());
    let index = c.subgroup().index() as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for chi in &quot {
        let values = chi.period_values();
        let mut s = Complex64::new(0.0, 0.0);
        for k in 1..=limit {
            s += values[mul_mod(inv, k % n, n) as usize];
        }
        total += s;
    }
    let raw = total / index;
    let value = raw.re.round().max(0.0);
    let deviation = (raw - Complex64::new(value, 0.0)).norm();
    if deviation > INTEGER_TOLERANCE {
        return Err(Error::NotIntegral {
            deviation,
            tolerance: INTEGER_TOLERANCE,
        });
    }
    Ok(IdentityValue {
        value: value as u64,
        raw,
        deviation,
    })
}

/// `Psi_{mu n}(aG)` against its main term `mu |G|` and the explicit bound
/// `tau(n) + 2 sqrt(n) log n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountEstimate {
    exact_count: u64,
    main_term: Rational,
    abs_error: Rational,
    bound: f64,
    normalized_error: f64,
}

impl CountEstimate {
    pub fn new(exact_count: u64, main_term: Rational, bound: f64) -> Self {
        let abs_error = (from_u64(exact_count) - &main_term).abs();
        let normalized_error = if bound > 0.0 {
            to_f64(&abs_error) / bound
        } else {
            0.0
        };
        CountEstimate {
            exact_count,
            main_term,
            abs_error,
            bound,
            normalized_error,
        }
    }

    pub fn exact_count(&self) -> u64 {
        self.exact_count
    }

    pub fn main_term(&self) -> &Rational {
        &self.main_term
    }

    pub fn abs_error(&self) -> &Rational {
        &self.abs_error
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `abs_error / bound`: the share of the proof bound actually used.
    pub fn normalized_error(&self) -> f64 {
        self.normalized_error
    }

    pub fn within_bound(&self) -> bool {
        to_f64(&self.abs_error) <= self.bound
    }
}

pub fn psi_estimate(mu: &Rational, c: &Coset) -> Result<CountEstimate> {
    require_positive(mu)?;
    let n = c.modulus();
    let exact = psi_count(&(mu * from_u64(n)), c)?;
    let main = mu * from_u64(c.len());
    let f = c.subgroup().group().factorization();
    let bound = tau(f) as f64 + pv_bound(n);
    Ok(CountEstimate::new(exact, main, bound))
}

/// Integers `p <= mu q^d` with `p mod q` in the coset, split into whole
/// blocks of length `q` and one partial block.
pub fn psi_power_lift(mu: &Rational, q: u64, d: u32, c: &Coset) -> Result<u64> {
    require_positive(mu)?;
    if c.modulus() != q {
        return Err(Error::InvalidInput(format!(
            "coset is modulo {}, expected {q}",
            c.modulus()
        )));
    }
    let qd = q
        .checked_pow(d)
        .ok_or_else(|| Error::InvalidInput(format!("{q}^{d} overflows u64")))?;
    let blocks = floor_u64(&(mu * from_u64(qd / q)))?;
    // nu q = mu q^d - blocks q, with nu in [0, 1).
    let nu_q = mu * from_u64(qd) - from_u64(blocks) * from_u64(q);
    Ok(blocks * c.len() + psi_count(&nu_q, c)?)
}

// ---------------------------------------------------------------------------
// Interval systems
// ---------------------------------------------------------------------------

/// The union of open intervals `(p/q^d - alpha/q^d, p/q^d + alpha/q^d)` over
/// `0 < p < q^d` with `p mod q` in the coset `aG`.
#[derive(Debug, Clone)]
pub struct IntervalSystem {
    pub k: usize,
    pub q: u64,
    pub d: u32,
    pub modulus: u64,
    pub alpha: Rational,
    pub radius: Rational,
    coset: Coset,
}

pub fn interval_system(
    k: usize,
    q: u64,
    d: u32,
    alpha: &Rational,
    a: u64,
    g: &Arc<Subgroup>,
) -> Result<IntervalSystem> {
    if !(alpha.is_positive() && *alpha < rational::ratio(1, 2)) {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in (0, 1/2), got {alpha}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidInput("d must be at least 1".into()));
    }
    if g.modulus() != q {
        return Err(Error::InvalidInput(format!(
            "subgroup is modulo {}, expected {q}",
            g.modulus()
        )));
    }
    let modulus = q
        .checked_pow(d)
        .ok_or_else(|| Error::InvalidInput(format!("{q}^{d} overflows u64")))?;
    let coset = Coset::new(a, Arc::clone(g))?;
    Ok(IntervalSystem {
        k,
        q,
        d,
        modulus,
        alpha: alpha.clone(),
        radius: alpha / from_u64(modulus),
        coset,
    })
}

/// Exact measure of `E ∩ (s, t)` and the recovered `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlap {
    pub measure: Rational,
    pub theta: Rational,
}

impl Overlap {
    pub fn theta_within_bound(&self) -> bool {
        self.theta.abs() <= from_u64(2)
    }
}

impl IntervalSystem {
    pub fn coset(&self) -> &Coset {
        &self.coset
    }

    /// `Psi_q(G) q^{d-1}`.
    pub fn center_count(&self) -> u64 {
        self.coset.len() * (self.modulus / self.q)
    }

    /// Centre numerators `p` in increasing order.
    pub fn centers(&self) -> impl Iterator<Item = u64> + '_ {
        (1..self.modulus).filter(move |&p| self.coset.contains_residue(p % self.q))
    }

    /// Numerators `p` in `[1, limit]` (capped at `q^d - 1`) that are centres.
    pub fn centers_upto(&self, limit: u64) -> u64 {
        count_upto(limit.min(self.modulus - 1), &self.coset)
    }

    /// `2 alpha |G| q^{d-1} / q^d`.
    pub fn measure(&self) -> Rational {
        from_u64(2) * &self.radius * from_u64(self.center_count())
    }

    /// `Psi_{mu q^d}(aG)` for `0 <= mu <= 1`.
    pub fn psi_scaled(&self, mu: &Rational) -> Result<u64> {
        Ok(self.centers_upto(floor_u64(&(mu * from_u64(self.modulus)))?))
    }

    pub fn overlap_measure(&self, s: &Rational, t: &Rational) -> Result<Overlap> {
        let zero = Rational::zero();
        if !(*s >= zero && s < t && *t <= Rational::one()) {
            return Err(Error::InvalidInput(format!(
                "need 0 <= s < t <= 1, got ({s}, {t})"
            )));
        }
        let big_q = from_u64(self.modulus);
        let (sq, tq) = (s * &big_q, t * &big_q);
        let alpha = &self.alpha;

        // Centres whose whole interval sits inside [sQ, tQ].
        let lo_in = (&sq + alpha).ceil();
        let hi_in = (&tq - alpha).floor();
        let inside = if hi_in >= lo_in {
            let hi = floor_u64(&hi_in)?;
            let lo = floor_u64(&lo_in)?;
            self.centers_upto(hi) - if lo == 0 { 0 } else { self.centers_upto(lo - 1) }
        } else {
            0
        };

        // Each endpoint window (x - alpha, x + alpha) has length 2 alpha < 1,
        // so holds at most one integer; those are the partially covered centres.
        let mut partial: Vec<u64> = Vec::with_capacity(2);
        for x in [&sq, &tq] {
            let cand = (x - alpha).floor() + Rational::one();
            if cand.is_positive() && cand < x + alpha {
                let p = floor_u64(&cand)?;
                if p < self.modulus && self.coset.contains_residue(p % self.q) && !partial.contains(&p) {
                    partial.push(p);
                }
            }
        }
        let mut scaled = from_u64(2) * alpha * from_u64(inside);
        for p in partial {
            let p = from_u64(p);
            let hi = (&p + alpha).min(tq.clone());
            let lo = (&p - alpha).max(sq.clone());
            if hi > lo {
                scaled += hi - lo;
            }
        }
        let measure = &scaled / &big_q;
        let psi_t = self.psi_scaled(t)?;
        let psi_s = self.psi_scaled(s)?;
        let theta = &scaled / (from_u64(2) * alpha) - (from_u64(psi_t) - from_u64(psi_s));
        Ok(Overlap { measure, theta })
    }
}

/// A finite union of disjoint open intervals inside `(0, 1)`.
pub fn validate_union(a: &[(Rational, Rational)]) -> Result<()> {
    let mut prev = Rational::zero();
    for (i, (s, t)) in a.iter().enumerate() {
        if !(s < t && *s >= prev && *t <= Rational::one()) {
            return Err(Error::InvalidInput(format!(
                "piece {i} ({s}, {t}) is empty, unsorted, overlapping or outside (0, 1)"
            )));
        }
        prev = t.clone();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub lambda_a: Rational,
    pub lambda_e: Rational,
    pub lambda_ae: Rational,
    /// `lambda(A ∩ E) / (lambda(A) lambda(E))`.
    pub multiplier: Rational,
}

pub fn overlap_bound_check(a: &[(Rational, Rational)], e: &IntervalSystem) -> Result<OverlapReport> {
    validate_union(a)?;
    if a.is_empty() {
        return Err(Error::InvalidInput("A must have at least one piece".into()));
    }
    let lambda_a: Rational = a.iter().map(|(s, t)| t - s).sum();
    let mut lambda_ae = Rational::zero();
    for (s, t) in a {
        lambda_ae += e.overlap_measure(s, t)?.measure;
    }
    let lambda_e = e.measure();
    let multiplier = &lambda_ae / (&lambda_a * &lambda_e);
    Ok(OverlapReport {
        lambda_a,
        lambda_e,
        lambda_ae,
        multiplier,
    })
}

#[derive(Debug, Clone)]
pub struct DecayRow {
    pub q: u64,
    pub report: OverlapReport,
    /// `multiplier - 1`.
    pub excess: f64,
    /// `q^{-(d - 1/2 - eps)}`.
    pub reference_rate: f64,
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `log |excess|` against `log q` (rows with zero
    /// excess are skipped).
    pub slope: f64,
    /// Largest `|excess| / reference_rate`: an empirical stand-in for `c_A`.
    pub max_ratio: f64,
}

impl DecayReport {
    pub fn decays(&self) -> bool {
        self.slope < 0.0
    }
}

/// Multiplier of `lambda(A ∩ E_q)` over `lambda(A) lambda(E_q)` across moduli.
pub fn overlap_decay_sweep(
    qs: &[u64],
    d: u32,
    alpha: &Rational,
    a: u64,
    rule: &SubgroupRule,
    pieces: &[(Rational, Rational)],
    epsilon: f64,
) -> Result<DecayReport> {
    let mut rows = Vec::with_capacity(qs.len());
    for &q in qs {
        let g = Arc::new(rule.build(&unit_group(q)?)?);
        let e = interval_system(0, q, d, alpha, a, &g)?;
        let report = overlap_bound_check(pieces, &e)?;
        let excess = to_f64(&(&report.multiplier - Rational::one()));
        let reference_rate = (q as f64).powf(-(d as f64 - 0.5 - epsilon));
        rows.push(DecayRow {
            q,
            report,
            excess,
            reference_rate,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.excess != 0.0)
        .map(|r| ((r.q as f64).ln(), r.excess.abs().ln()))
        .collect();
    let slope = least_squares_slope(&pts);
    let max_ratio = rows
        .iter()
        .map(|r| r.excess.abs() / r.reference_rate)
        .fold(0.0, f64::max);
    Ok(DecayReport {
        rows,
        slope,
        max_ratio,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::residue_group::{coset, dth_power_subgroup, subgroup_from_generators};

    fn squares_mod(q: u64) -> Arc<Subgroup> {
        Arc::new(dth_power_subgroup(&unit_group(q).unwrap(), 2))
    }

    fn units_mod(q: u64) -> Arc<Subgroup> {
        Arc::new(Subgroup::full(unit_group(q).unwrap()))
    }

    #[test]
    fn phi_mu_examples() {
        for n in [2u64, 10, 30, 97, 360] {
            assert_eq!(
                phi_mu(n, &ratio(1, 1)).unwrap(),
                euler_phi(&crate::factor(n).unwrap())
            );
        }
        assert_eq!(phi_mu(10, &ratio(1, 2)).unwrap(), 2);
        assert_eq!(phi_mu(10, &ratio(2, 1)).unwrap(), 8);
        assert!(phi_mu(10, &ratio(0, 1)).is_err());
    }

    #[test]
    fn sieve_examples() {
        let s = phi_mu_sieve(10, &ratio(1, 2)).unwrap();
        assert_eq!(
            s,
            SieveCount {
                count: 2,
                remainder: ratio(0, 1)
            }
        );
        for n in [2u64, 12, 97, 360] {
            assert_eq!(phi_mu_sieve(n, &ratio(1, 1)).unwrap().remainder, ratio(0, 1));
        }
        let s = phi_mu_sieve(30, &ratio(1, 4)).unwrap();
        assert_eq!(s.count, phi_mu(30, &ratio(1, 4)).unwrap());
        assert_eq!(s.count, 2);
        assert!(s.remainder.abs() <= ratio(8, 1));
    }

    #[test]
    fn sieve_matches_scan_on_a_grid() {
        for n in 2..=300u64 {
            let t = tau(&crate::factor(n).unwrap()) as i64;
            for j in 1..=40 {
                let mu = ratio(j, 20);
                let s = phi_mu_sieve(n, &mu).unwrap();
                assert_eq!(s.count, phi_mu(n, &mu).unwrap());
                assert!(s.remainder.abs() <= ratio(t, 1));
            }
        }
    }

    #[test]
    fn psi_count_examples() {
        let sq = squares_mod(7);
        let g = coset(1, &sq).unwrap();
        assert_eq!(psi_count(&ratio(7, 1), &g).unwrap(), 3);
        let c = coset(3, &sq).unwrap();
        assert_eq!(psi_count(&ratio(3, 1), &c).unwrap(), 1);
        assert_eq!(psi_count(&ratio(-3, 1), &c).unwrap(), 0);
        for n in [2u64, 9, 12, 100] {
            let s = Arc::new(subgroup_from_generators(&unit_group(n).unwrap(), &[n - 1]).unwrap());
            let c = coset(1, &s).unwrap();
            assert_eq!(psi_count(&from_u64(n), &c).unwrap(), s.order());
        }
    }

    #[test]
    fn psi_count_is_monotone_and_matches_enumeration() {
        let sq = squares_mod(45);
        let c = coset(2, &sq).unwrap();
        let mut prev = 0;
        for x in 0..400u64 {
            let direct = (1..=x).filter(|&l| c.contains(l as i64)).count() as u64;
            let got = psi_count(&from_u64(x), &c).unwrap();
            assert_eq!(got, direct);
            assert!(got >= prev);
            prev = got;
        }
    }

    #[test]
    fn identity_examples() {
        let g7 = unit_group(7).unwrap();
        let full = Arc::new(Subgroup::full(Arc::clone(&g7)));
        let c = coset(1, &full).unwrap();
        for mu in [ratio(1, 3), ratio(1, 1), ratio(3, 2)] {
            assert_eq!(
                psi_character_identity(&mu, &c).unwrap().value,
                phi_mu(7, &mu).unwrap()
            );
        }
        let c = coset(3, &squares_mod(7)).unwrap();
        assert_eq!(psi_character_identity(&ratio(1, 1), &c).unwrap().value, 3);
        let v = psi_character_identity(&ratio(3, 7), &c).unwrap();
        assert_eq!(v.value, 1);
        assert_eq!(v.value, psi_count(&ratio(3, 1), &c).unwrap());
        assert!(v.deviation < 1e-9);
    }

    #[test]
    fn estimate_examples() {
        let c = coset(3, &squares_mod(7)).unwrap();
        let e = psi_estimate(&ratio(1, 1), &c).unwrap();
        assert_eq!(e.abs_error(), &ratio(0, 1));
        let e = psi_estimate(&ratio(3, 7), &c).unwrap();
        assert_eq!(e.exact_count(), 1);
        assert_eq!(e.main_term(), &ratio(9, 7));
        assert_eq!(e.abs_error(), &ratio(2, 7));
        assert!((e.bound() - (2.0 + pv_bound(7))).abs() < 1e-12);
        assert!(e.within_bound());
    }

    #[test]
    fn power_lift_examples() {
        let sq = squares_mod(7);
        let g = coset(1, &sq).unwrap();
        assert_eq!(psi_power_lift(&ratio(1, 1), 7, 2, &g).unwrap(), 21);
        let direct = |mu: &Rational, q: u64, d: u32, c: &Coset| {
            let lim = floor_u64(&(mu * from_u64(q.pow(d)))).unwrap();
            (1..=lim).filter(|&p| c.contains(p as i64)).count() as u64
        };
        assert_eq!(psi_power_lift(&ratio(1, 2), 7, 2, &g).unwrap(), 11);
        assert_eq!(direct(&ratio(1, 2), 7, 2, &g), 11);
        let c = coset(3, &sq).unwrap();
        for mu in [ratio(1, 9), ratio(2, 3), ratio(5, 4)] {
            assert_eq!(
                psi_power_lift(&mu, 7, 1, &c).unwrap(),
                psi_count(&(&mu * from_u64(7)), &c).unwrap()
            );
        }
        assert!(psi_power_lift(&ratio(1, 2), 8, 2, &g).is_err());
    }

    #[test]
    fn interval_system_examples() {
        let e = interval_system(1, 5, 1, &ratio(1, 10), 1, &units_mod(5)).unwrap();
        assert_eq!(e.center_count(), 4);
        assert_eq!(e.measure(), ratio(4, 25));
        assert_eq!(e.radius, ratio(1, 50));

        let triv = Arc::new(Subgroup::trivial(unit_group(9).unwrap()));
        let e = interval_system(1, 9, 1, &ratio(1, 4), 1, &triv).unwrap();
        assert_eq!(e.centers().collect::<Vec<_>>(), vec![1]);

        let e = interval_system(1, 7, 2, &ratio(1, 4), 1, &squares_mod(7)).unwrap();
        assert_eq!(e.center_count(), 21);
        assert_eq!(e.centers().count(), 21);
        assert_eq!(e.measure(), ratio(2, 1) * ratio(1, 4) * ratio(3, 7));

        assert!(interval_system(1, 5, 1, &ratio(1, 2), 1, &units_mod(5)).is_err());
        assert!(interval_system(1, 5, 1, &ratio(0, 1), 1, &units_mod(5)).is_err());
        assert!(interval_system(1, 6, 1, &ratio(1, 4), 2, &units_mod(6)).is_err());
    }

    #[test]
    fn overlap_examples() {
        let e = interval_system(1, 5, 1, &ratio(1, 10), 1, &units_mod(5)).unwrap();
        let o = e.overlap_measure(&ratio(0, 1), &ratio(1, 1)).unwrap();
        assert_eq!(o.measure, e.measure());
        assert_eq!(o.theta, ratio(0, 1));
        let o = e.overlap_measure(&ratio(0, 1), &ratio(1, 2)).unwrap();
        assert_eq!(o.measure, ratio(2, 25));
        assert_eq!(o.theta, ratio(0, 1));
        // Cut through the interval around 1/5: half of it counted.
        let o = e.overlap_measure(&ratio(1, 5), &ratio(1, 2)).unwrap();
        assert_eq!(o.measure, ratio(1, 50) + ratio(2, 50));
        assert!(o.theta_within_bound());
        assert!(e.overlap_measure(&ratio(1, 2), &ratio(1, 2)).is_err());
    }

    /// Interval-by-interval intersection, independent of the counting shortcut.
    fn overlap_oracle(e: &IntervalSystem, s: &Rational, t: &Rational) -> Rational {
        let mut m = Rational::zero();
        for p in e.centers() {
            let c = Rational::new(p.into(), e.modulus.into());
            let lo = (&c - &e.radius).max(s.clone());
            let hi = (&c + &e.radius).min(t.clone());
            if hi > lo {
                m += hi - lo;
            }
        }
        m
    }

    #[test]
    fn overlap_matches_interval_oracle() {
        let cases = [
            (5u64, 1u32, ratio(1, 10)),
            (7, 2, ratio(2, 5)),
            (9, 2, ratio(1, 3)),
            (8, 2, ratio(49, 100)),
        ];
        for (q, d, alpha) in cases {
            let g = squares_mod(q);
            for a in unit_group(q).unwrap().units() {
                let e = interval_system(1, q, d, &alpha, a, &g).unwrap();
                for (s, t) in [(0, 13), (1, 7), (3, 11), (5, 13), (12, 13), (6, 7)] {
                    let (s, t) = (ratio(s, 13), ratio(t, 13));
                    let o = e.overlap_measure(&s, &t).unwrap();
                    assert_eq!(o.measure, overlap_oracle(&e, &s, &t));
                    assert!(o.theta_within_bound());
                }
            }
        }
    }

    #[test]
    fn overlap_is_monotone_in_the_window() {
        let e = interval_system(1, 11, 2, &ratio(3, 7), 2, &squares_mod(11)).unwrap();
        let mut prev = Rational::zero();
        for j in 1..=50 {
            let m = e.overlap_measure(&ratio(0, 1), &ratio(j, 50)).unwrap().measure;
            assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn overlap_bound_examples() {
        let e = interval_system(1, 5, 1, &ratio(1, 10), 1, &units_mod(5)).unwrap();
        let r = overlap_bound_check(&[(ratio(0, 1), ratio(1, 1))], &e).unwrap();
        assert_eq!(r.multiplier, ratio(1, 1));
        let r = overlap_bound_check(&[(ratio(0, 1), ratio(1, 2))], &e).unwrap();
        assert_eq!(r.multiplier, ratio(1, 1));
        assert!(overlap_bound_check(&[(ratio(1, 2), ratio(1, 3))], &e).is_err());
        assert!(overlap_bound_check(&[(ratio(0, 1), ratio(1, 2)), (ratio(1, 3), ratio(2, 3))], &e).is_err());
    }

    #[test]
    fn overlap_excess_decays_with_q() {
        let qs: Vec<u64> = (100..10_000u64)
            .filter(|&q| crate::arith::is_prime(q))
            .step_by(40)
            .collect();
        let pieces = [
            (ratio(1, 17), ratio(3, 11)),
            (ratio(2, 5), ratio(29, 53)),
            (ratio(5, 7), ratio(9, 10)),
        ];
        let r =
            overlap_decay_sweep(&qs, 2, &ratio(1, 4), 1, &SubgroupRule::DthPowers(2), &pieces, 0.1).unwrap();
        assert!(r.decays(), "slope {}", r.slope);
        assert!(r.max_ratio.is_finite());
    }
}
