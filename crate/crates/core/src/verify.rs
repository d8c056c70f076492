//! The cross-module invariant suite.
//!
//! Each check pits two independent routes against each other (a closed form
//! against brute force, a character sum against a direct count, ...) and
//! tallies the cases that disagree. [`Scale::quick`] keeps the whole suite in
//! seconds; [`Scale::full`] uses the ranges the acceptance suite demands.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::arith::{self, euler_phi, factor, gcd, mul_mod, omega, tau, BruteForce};
use crate::characters::{all_characters, pv_records, quotient_characters};
use crate::equidist::{
    interval_system, phi_mu, phi_mu_sieve, psi_character_identity, psi_count, psi_estimate, psi_power_lift,
};
use crate::experiment::{
    check_conditions, monte_carlo_measure, run, scan_hits, AlphaSequence, Experiment, ExperimentConfig,
    QSequence, SubgroupMode,
};
use crate::rational::{from_u64, ratio, to_f64, Rational};
use crate::residue_group::{coset, coset_contains, unit_group, Coset, Subgroup};
use crate::SCHEMA_VERSION;

/// Ranges for every check.
#[derive(Debug, Clone, PartialEq)]
pub struct Scale {
    pub oracle_n: u64,
    pub max_d: u64,
    pub group_n: u64,
    /// Exhaustive coset and quotient-character checks.
    pub coset_n: u64,
    pub sieve_n: u64,
    pub sieve_mu_steps: u64,
    pub characters_n: u64,
    pub pv_n: u64,
    pub random_tuples: usize,
    pub random_n: u64,
    pub lift_q: u64,
    pub overlap_cases: usize,
    pub growth_log2: u32,
    pub hit_scan_cases: usize,
    pub mc_horizon: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Scale {
    pub fn quick() -> Self {
        Scale {
            oracle_n: 400,
            max_d: 6,
            group_n: 300,
            coset_n: 60,
            sieve_n: 300,
            sieve_mu_steps: 40,
            characters_n: 80,
            pv_n: 150,
            random_tuples: 40,
            random_n: 500,
            lift_q: 60,
            overlap_cases: 150,
            growth_log2: 14,
            hit_scan_cases: 40,
            mc_horizon: 300,
            mc_samples: 60,
            seed: 20_240_601,
        }
    }

    pub fn full() -> Self {
        Scale {
            oracle_n: 5000,
            max_d: 6,
            group_n: 2000,
            coset_n: 200,
            sieve_n: 2000,
            sieve_mu_steps: 40,
            characters_n: 500,
            pv_n: 1000,
            random_tuples: 200,
            random_n: 2000,
            lift_q: 500,
            overlap_cases: 1000,
            growth_log2: 20,
            hit_scan_cases: 200,
            mc_horizon: 2000,
            mc_samples: 200,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: u64,
    pub failures: u64,
    /// First failing case, or a one-line summary statistic.
    pub detail: String,
    pub elapsed: Duration,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

/// Collects per-case results; keeps the first failure message.
#[derive(Debug, Default)]
struct Tally {
    cases: u64,
    failures: u64,
    first: Option<String>,
    note: String,
}

impl Tally {
    fn case(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(msg());
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.cases += other.cases;
        self.failures += other.failures;
        if self.first.is_none() {
            self.first = other.first;
        }
        self
    }

    fn finish(self, name: &'static str, start: Instant) -> CheckOutcome {
        CheckOutcome {
            name,
            cases: self.cases,
            failures: self.failures,
            detail: self.first.unwrap_or(self.note),
            elapsed: start.elapsed(),
        }
    }
}

/// Runs `f` for each item in parallel and merges the tallies in order.
fn par_tally<T: Send, F: Fn(T) -> Tally + Sync + Send>(items: Vec<T>, f: F) -> Tally {
    items
        .into_par_iter()
        .map(f)
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Tally::default(), Tally::merge)
}

// ---------------------------------------------------------------------------
// arith
// ---------------------------------------------------------------------------

/// `u_d`, `r_d` closed forms against enumeration.
pub fn check_power_counts(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let brute = BruteForce::default();
    let t = par_tally((1..=s.oracle_n).collect(), |n| {
        let mut t = Tally::default();
        let f = factor(n).expect("n >= 1");
        for d in 1..=s.max_d {
            let (u, r) = (arith::u_d(&f, d), arith::r_d(&f, d));
            let (bu, br) = (brute.u_d(n, d).unwrap(), brute.r_d(n, d).unwrap());
            t.case(u == bu && r == br, || {
                format!("n={n} d={d}: formula ({u}, {r}) vs brute ({bu}, {br})")
            });
        }
        t
    });
    t.finish("arith.power_counts_vs_brute", start)
}

/// `r u = phi`, `u <= (2d)^omega`, `phi 2^omega >= n` and multiplicativity.
pub fn check_arith_identities(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let t = par_tally((1..=s.oracle_n).collect(), |n| {
        let mut t = Tally::default();
        let f = factor(n).expect("n >= 1");
        let phi = euler_phi(&f);
        let w = omega(&f);
        t.case(phi << w >= n, || format!("phi({n}) 2^omega < n"));
        for d in 1..=s.max_d {
            let (u, r) = (arith::u_d(&f, d), arith::r_d(&f, d));
            t.case(u * r == phi, || format!("n={n} d={d}: r u != phi"));
            t.case(u <= (2 * d).pow(w), || format!("n={n} d={d}: u > (2d)^omega"));
        }
        // m coprime to n, both small enough to keep mn in range
        for m in [2u64, 3, 5, 7, 9, 16, 25] {
            if gcd(m, n) != 1 {
                continue;
            }
            let fm = factor(m).unwrap();
            let fmn = factor(m * n).unwrap();
            t.case(
                euler_phi(&fmn) == euler_phi(&fm) * phi && tau(&fmn) == tau(&fm) * tau(&f),
                || format!("phi/tau not multiplicative at {m} x {n}"),
            );
            for d in 1..=s.max_d {
                t.case(
                    arith::u_d(&fmn, d) == arith::u_d(&fm, d) * arith::u_d(&f, d)
                        && arith::r_d(&fmn, d) == arith::r_d(&fm, d) * arith::r_d(&f, d),
                    || format!("u/r not multiplicative at {m} x {n}, d={d}"),
                );
            }
        }
        t
    });
    t.finish("arith.identities", start)
}

/// Block maxima of `tau(n)/n^{1/2}` never rise once past `n = 16`. The other
/// growth ratios are reported by `cds arith --growth` but not asserted.
pub fn check_growth(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let rows = arith::growth_scan(s.growth_log2, &[0.5], 1);
    let mut t = Tally::default();
    let tail: Vec<_> = rows.iter().filter(|r| r.block_end >= 16).collect();
    for w in tail.windows(2) {
        t.case(w[1].tau_max <= w[0].tau_max, || {
            format!("tau/n^0.5 block max rises at {}", w[1].block_end)
        });
    }
    t.note = format!("{} blocks up to 2^{}", tail.len(), s.growth_log2);
    t.finish("arith.tau_growth_trend", start)
}

// ---------------------------------------------------------------------------
// residue_group
// ---------------------------------------------------------------------------

/// Decomposition orders and unique exponent vectors for every unit.
pub fn check_decomposition(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let t = par_tally((2..=s.group_n).collect(), |n| {
        let mut t = Tally::default();
        let g = unit_group(n).unwrap();
        let prod: u64 = g.cyclic_factors().iter().map(|c| c.order).product();
        t.case(prod == euler_phi(g.factorization()), || {
            format!("n={n}: orders multiply to {prod}")
        });
        for c in g.cyclic_factors() {
            let ord = crate::residue_group::multiplicative_order(c.local_generator, c.prime_power);
            t.case(ord == c.order, || {
                format!("n={n}: generator {} has order {ord}", c.local_generator)
            });
        }
        let mut seen = HashSet::new();
        for u in g.units() {
            let logs = g.discrete_logs(u).expect("unit");
            t.case(g.from_exponents(&logs) == u && seen.insert(logs), || {
                format!("n={n}: unit {u} round trip")
            });
        }
        t
    });
    t.finish("residue_group.decomposition", start)
}

/// `|G^(d)| = r_d`, index `= u_d`, subgroup axioms and `G^(d) <= G^(e)` for `e | d`.
pub fn check_power_subgroups(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let t = par_tally((2..=s.group_n).collect(), |n| {
        let mut t = Tally::default();
        let g = unit_group(n).unwrap();
        let f = g.factorization();
        let subs: Vec<Subgroup> = (1..=s.max_d)
            .map(|d| Subgroup::dth_powers(Arc::clone(&g), d))
            .collect();
        for (i, h) in subs.iter().enumerate() {
            let d = i as u64 + 1;
            t.case(
                h.order() == arith::r_d(f, d) && h.index() == arith::u_d(f, d),
                || format!("n={n} d={d}: order {} index {}", h.order(), h.index()),
            );
            let closed = h.contains_residue(1)
                && g.order().is_multiple_of(h.order())
                && h.generators()
                    .iter()
                    .all(|&x| h.elements().iter().all(|&y| h.contains_residue(mul_mod(x, y, n))))
                && h.elements()
                    .iter()
                    .all(|&x| h.contains_residue(arith::mod_inverse(x, n).unwrap()));
            t.case(closed, || format!("n={n} d={d}: not a subgroup"));
            for e in (1..d).filter(|e| d.is_multiple_of(*e)) {
                t.case(h.is_subgroup_of(&subs[e as usize - 1]), || {
                    format!("n={n}: G^({d}) not in G^({e})")
                });
            }
        }
        t
    });
    t.finish("residue_group.power_subgroups", start)
}

/// Subgroups exercised exhaustively for `n`.
fn sample_subgroups(n: u64, max_d: u64) -> Vec<Arc<Subgroup>> {
    let g = unit_group(n).unwrap();
    let mut out: Vec<Arc<Subgroup>> = (1..=max_d)
        .map(|d| Arc::new(Subgroup::dth_powers(Arc::clone(&g), d)))
        .collect();
    out.push(Arc::new(Subgroup::trivial(Arc::clone(&g))));
    if gcd(2, n) == 1 {
        out.push(Arc::new(Subgroup::generated_by(Arc::clone(&g), &[2]).unwrap()));
    }
    out
}

/// Coset partition, `p in aG <=> a^{-1} p in G`, and quotient characters.
pub fn check_cosets_and_quotients(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let t = par_tally((2..=s.coset_n).collect(), |n| {
        let mut t = Tally::default();
        let g = unit_group(n).unwrap();
        let chars = all_characters(&g);
        for h in sample_subgroups(n, s.max_d) {
            let cosets = h.cosets();
            let mut covered = HashSet::new();
            for c in &cosets {
                t.case(c.len() == h.order(), || format!("n={n}: coset size"));
                for &e in c.elements() {
                    t.case(covered.insert(e), || format!("n={n}: cosets overlap at {e}"));
                }
            }
            t.case(
                covered.len() as u64 == g.order() && cosets.len() as u64 == h.index(),
                || format!("n={n}: cosets do not partition the units"),
            );
            for a in g.units() {
                let c = coset(a, &h).unwrap();
                for p in g.units() {
                    t.case(
                        coset_contains(&c, p as i64) == c.contains_via_inverse(p as i64),
                        || format!("n={n} a={a} p={p}: coset membership routes disagree"),
                    );
                }
            }

            let quot = quotient_characters(&h);
            let keys: HashSet<Vec<u64>> = quot.iter().map(|c| c.exponents().to_vec()).collect();
            t.case(quot.len() as u64 == h.index(), || {
                format!("n={n}: {} quotient characters", quot.len())
            });
            for x in &quot {
                for y in &quot {
                    let prod: Vec<u64> = x
                        .exponents()
                        .iter()
                        .zip(y.exponents())
                        .zip(g.cyclic_factors())
                        .map(|((a, b), f)| (a + b) % f.order)
                        .collect();
                    t.case(keys.contains(&prod), || {
                        format!("n={n}: quotient characters not closed")
                    });
                }
            }
            for chi in &chars {
                let constant = cosets.iter().all(|c| {
                    let v0 = chi.evaluate(c.representative() as i64);
                    c.elements()
                        .iter()
                        .all(|&e| (chi.evaluate(e as i64) - v0).norm() < 1e-9)
                });
                t.case(constant == keys.contains(chi.exponents()), || {
                    format!(
                        "n={n} chi={:?}: coset-constancy vs quotient membership",
                        chi.exponents()
                    )
                });
            }
        }
        t
    });
    t.finish("residue_group.cosets_and_quotients", start)
}

// ---------------------------------------------------------------------------
// characters
// ---------------------------------------------------------------------------

/// Count, orthogonality, zeros at non-units, roots of unity, multiplicativity.
pub fn check_characters(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let t = par_tally((2..=s.characters_n).collect(), |n| {
        let mut t = Tally::default();
        let g = unit_group(n).unwrap();
        let chars = all_characters(&g);
        t.case(chars.len() as u64 == g.order(), || {
            format!("n={n}: {} characters", chars.len())
        });
        let units: Vec<u64> = g.units().collect();
        let exp = g.exponent() as i32;
        let table: Vec<Vec<num_complex::Complex64>> = chars.iter().map(|c| c.period_values()).collect();
        for &u in units.iter().skip(1) {
            let col: num_complex::Complex64 = table.iter().map(|v| v[u as usize]).sum();
            t.case(col.norm() < 1e-9, || format!("n={n}: column sum at {u} is {col}"));
        }
        for (chi, v) in chars.iter().zip(&table) {
            if !chi.is_principal() {
                let row: num_complex::Complex64 = units.iter().map(|&u| v[u as usize]).sum();
                t.case(row.norm() < 1e-9, || {
                    format!("n={n} chi={:?}: row sum {row}", chi.exponents())
                });
            }
            for m in 0..n {
                if gcd(m, n) != 1 {
                    t.case(v[m as usize] == num_complex::Complex64::new(0.0, 0.0), || {
                        format!("n={n}: chi({m}) != 0 at a non-unit")
                    });
                }
            }
            for &a in &units {
                t.case((v[a as usize].powi(exp) - 1.0).norm() < 1e-9, || {
                    format!("n={n}: chi({a}) not a root of unity")
                });
                for c in g.cyclic_factors() {
                    let b = c.generator;
                    let lhs = v[mul_mod(a, b, n) as usize];
                    t.case((lhs - v[a as usize] * v[b as usize]).norm() < 1e-9, || {
                        format!("n={n}: chi({a} * {b}) not multiplicative")
                    });
                }
            }
        }
        t
    });
    t.finish("characters.axioms", start)
}

/// `|sum_{m <= h} chi(m)| <= 2 sqrt(n) ln n` for every non-principal `chi`, `h <= n`.
pub fn check_polya_vinogradov(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let min_slack = std::sync::Mutex::new(f64::INFINITY);
    let t = par_tally((3..=s.pv_n).collect(), |n| {
        let mut t = Tally::default();
        for r in pv_records(n).unwrap() {
            let slack = r.slack();
            {
                let mut m = min_slack.lock().unwrap();
                *m = m.min(slack / r.bound);
            }
            t.case(slack >= 0.0, || {
                format!("n={n} chi={:?} h={}: |sum| = {}", r.exponents, r.h, r.sum.norm())
            });
        }
        t
    });
    let mut t = t;
    t.note = format!("smallest relative slack {:.4}", min_slack.into_inner().unwrap());
    t.finish("characters.polya_vinogradov", start)
}

// ---------------------------------------------------------------------------
// equidist
// ---------------------------------------------------------------------------

/// `phi_mu` by scan against the divisor sieve, with `|R| <= tau(n)`.
pub fn check_sieve(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let steps = s.sieve_mu_steps;
    let t = par_tally((1..=s.sieve_n).collect(), |n| {
        let mut t = Tally::default();
        let bound = from_u64(tau(&factor(n).unwrap()));
        for j in 1..=steps {
            let mu = ratio(j as i64, 20);
            let direct = phi_mu(n, &mu).unwrap();
            let sieve = phi_mu_sieve(n, &mu).unwrap();
            t.case(direct == sieve.count && sieve.remainder.abs() <= bound, || {
                format!(
                    "n={n} mu={mu}: scan {direct}, sieve {}, R = {}",
                    sieve.count, sieve.remainder
                )
            });
        }
        t
    });
    t.finish("equidist.sieve_identity", start)
}

/// One random `(n, G, a, mu)` tuple.
#[derive(Debug, Clone)]
pub struct CountCase {
    pub coset: Coset,
    pub mu: Rational,
}

/// Seeded random tuples with `n <= max_n`, a random subgroup rule, unit `a`
/// and `mu` in `(0, 1]`.
pub fn random_count_cases(count: usize, max_n: u64, seed: u64) -> Vec<CountCase> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(3..=max_n);
            let g = unit_group(n).unwrap();
            let h = match rng.random_range(0..4u32) {
                0 => Subgroup::full(Arc::clone(&g)),
                1 => Subgroup::trivial(Arc::clone(&g)),
                2 => Subgroup::dth_powers(Arc::clone(&g), rng.random_range(2..=6)),
                _ => {
                    let units: Vec<u64> = g.units().collect();
                    let gens: Vec<u64> = (0..rng.random_range(1..=2))
                        .map(|_| units[rng.random_range(0..units.len())])
                        .collect();
                    Subgroup::generated_by(Arc::clone(&g), &gens).unwrap()
                }
            };
            let a = loop {
                let a = rng.random_range(1..n);
                if gcd(a, n) == 1 {
                    break a;
                }
            };
            let den = rng.random_range(1..=1000i64);
            let mu = ratio(rng.random_range(1..=den), den);
            CountCase {
                coset: Coset::new(a, Arc::new(h)).unwrap(),
                mu,
            }
        })
        .collect()
}

/// Character-sum route to `Psi_{mu n}(aG)` against direct counting, plus
/// monotonicity of the count in `X`.
pub fn check_counting_identity(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let worst = std::sync::Mutex::new(0f64);
    let cases = random_count_cases(s.random_tuples, s.random_n, s.seed);
    let mut t = par_tally(cases, |c| {
        let mut t = Tally::default();
        let n = c.coset.modulus();
        let x = &c.mu * from_u64(n);
        let exact = psi_count(&x, &c.coset).unwrap();
        match psi_character_identity(&c.mu, &c.coset) {
            Ok(v) => {
                let mut w = worst.lock().unwrap();
                *w = w.max(v.deviation);
                t.case(v.value == exact, || {
                    format!("n={n} mu={}: identity {} vs count {exact}", c.mu, v.value)
                });
            }
            Err(e) => t.case(false, || format!("n={n} mu={}: {e}", c.mu)),
        }
        let later = psi_count(&(&x + ratio(1, 7)), &c.coset).unwrap();
        t.case(later >= exact, || format!("n={n}: psi_count decreased"));
        t
    });
    t.note = format!(
        "largest pre-rounding deviation {:.3e}",
        worst.into_inner().unwrap()
    );
    t.finish("equidist.character_identity", start)
}

/// `|Psi_{mu n}(aG) - mu |G|| <= tau(n) + 2 sqrt(n) ln n` on the random tuples.
pub fn check_count_bound(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let cases = random_count_cases(s.random_tuples, s.random_n, s.seed);
    let worst = std::sync::Mutex::new(0f64);
    let mut t = par_tally(cases, |c| {
        let mut t = Tally::default();
        let e = psi_estimate(&c.mu, &c.coset).unwrap();
        {
            let mut w = worst.lock().unwrap();
            *w = w.max(e.normalized_error());
        }
        let recomputed = (from_u64(e.exact_count()) - e.main_term()).abs();
        t.case(
            e.within_bound() && &recomputed == e.abs_error() && e.bound() >= 0.0,
            || {
                format!(
                    "n={} mu={}: error {} > bound {}",
                    c.coset.modulus(),
                    c.mu,
                    e.abs_error(),
                    e.bound()
                )
            },
        );
        t
    });
    t.note = format!("largest abs_error / bound {:.4}", worst.into_inner().unwrap());
    t.finish("equidist.count_bound", start)
}

/// Block decomposition of `#{p <= mu q^d : p mod q in aG}` against a direct
/// scan, for `q^d <= 10^6`.
pub fn check_power_lift(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let mus: Vec<Rational> = [(1, 7), (1, 3), (1, 2), (5, 7), (99, 100), (1, 1)]
        .iter()
        .map(|&(a, b)| ratio(a, b))
        .collect();
    let t = par_tally((2..=s.lift_q).collect(), |q| {
        let mut t = Tally::default();
        for d in 1..=3u32 {
            let qd = q.pow(d);
            if qd > 1_000_000 {
                continue;
            }
            let g = Arc::new(Subgroup::dth_powers(unit_group(q).unwrap(), d as u64));
            let c = coset(q - 1, &g).unwrap();
            let limits: Vec<u64> = mus
                .iter()
                .map(|mu| crate::rational::floor_u64(&(mu * from_u64(qd))).unwrap())
                .collect();
            let mut counts = vec![0u64; mus.len()];
            for p in 1..=qd {
                if c.contains_residue(p % q) {
                    for (cnt, &lim) in counts.iter_mut().zip(&limits) {
                        if p <= lim {
                            *cnt += 1;
                        }
                    }
                }
            }
            for (mu, want) in mus.iter().zip(counts) {
                let got = psi_power_lift(mu, q, d, &c).unwrap();
                t.case(got == want, || {
                    format!("q={q} d={d} mu={mu}: lift {got} vs scan {want}")
                });
            }
        }
        t
    });
    t.finish("equidist.power_lift", start)
}

/// Exact overlap of one interval system with `(s, t)`, summed interval by
/// interval. Only for small `q^d`.
fn overlap_by_intervals(e: &crate::IntervalSystem, s: &Rational, t: &Rational) -> Rational {
    let q = from_u64(e.modulus);
    let mut total = Rational::zero();
    for p in e.centers() {
        let c = from_u64(p) / &q;
        let lo = (&c - &e.radius).max(s.clone());
        let hi = (&c + &e.radius).min(t.clone());
        if hi > lo {
            total += hi - lo;
        }
    }
    total
}

fn random_rational(rng: &mut ChaCha20Rng, max_den: i64) -> Rational {
    let den = rng.random_range(1..=max_den);
    ratio(rng.random_range(0..=den), den)
}

/// `theta` in `[-2, 2]`, total measure, monotonicity in `(s, t)`, and an
/// interval-by-interval cross-check when `q^d` is small.
pub fn check_overlap(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(s.seed ^ 0x0e);
    let mut cases = Vec::with_capacity(s.overlap_cases);
    for i in 0..s.overlap_cases {
        let d = rng.random_range(1..=3u32);
        let q_max = [0, 3000, 300, 45][d as usize];
        let q = rng.random_range(2..=q_max);
        let den = rng.random_range(3..=1000i64);
        let alpha = ratio(rng.random_range(1..=(den - 1) / 2), den);
        let e = rng.random_range(1..=4u64);
        let a = loop {
            let a = rng.random_range(1..q.max(2));
            if gcd(a, q) == 1 {
                break a;
            }
        };
        let (mut lo, mut hi) = (
            random_rational(&mut rng, 1_000_000),
            random_rational(&mut rng, 1_000_000),
        );
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        if lo == hi {
            (lo, hi) = (Rational::zero(), Rational::one());
        }
        cases.push((i, q, d, alpha, e, a, lo, hi));
    }
    let t = par_tally(cases, |(i, q, d, alpha, e, a, lo, hi)| {
        let mut t = Tally::default();
        let g = Arc::new(Subgroup::dth_powers(unit_group(q).unwrap(), e));
        let sys = interval_system(i, q, d, &alpha, a, &g).unwrap();
        let ov = sys.overlap_measure(&lo, &hi).unwrap();
        t.case(ov.theta_within_bound(), || {
            format!(
                "case {i}: q={q} d={d} alpha={alpha} ({lo}, {hi}): theta {}",
                ov.theta
            )
        });
        let total = sys
            .overlap_measure(&Rational::zero(), &Rational::one())
            .unwrap()
            .measure;
        let expect = from_u64(2) * &alpha * from_u64(g.order() * sys.modulus / q) / from_u64(sys.modulus);
        t.case(total == expect && sys.measure() == expect, || {
            format!("case {i}: total measure {total} vs {expect}")
        });
        let wider = sys
            .overlap_measure(&(&lo * ratio(1, 2)), &((&hi + Rational::one()) * ratio(1, 2)))
            .unwrap();
        t.case(wider.measure >= ov.measure, || {
            format!("case {i}: overlap shrank on a wider window")
        });
        if sys.modulus <= 3000 {
            let want = overlap_by_intervals(&sys, &lo, &hi);
            t.case(ov.measure == want, || {
                format!("case {i}: overlap {} vs interval sum {want}", ov.measure)
            });
        }
        t
    });
    t.finish("equidist.overlap", start)
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

pub fn harmonic_config(
    q_sequence: QSequence,
    d: u32,
    mode: SubgroupMode,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        q_sequence,
        alpha_sequence: AlphaSequence::Harmonic { c: "2/5".into() },
        d,
        a: 1,
        subgroup_mode: mode,
        horizon,
        samples,
        precision_bits: 128,
        seed,
        min_hits: vec![1, 3, 5],
        ladder: None,
        conditions_horizon: None,
        epsilon: 0.1,
    }
}

/// `find_hits` against the exhaustive scan for `q^d <= 10^4`.
pub fn check_hits_vs_scan(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let configs = vec![
        {
            let mut c = harmonic_config(QSequence::Integers { start: 2 }, 1, SubgroupMode::Full, 60, 1, 0);
            c.alpha_sequence = AlphaSequence::List {
                values: (1..=60).map(|k| format!("{}/{}", 1 + k % 4, 10)).collect(),
            };
            c
        },
        harmonic_config(
            QSequence::Primes { start: 3 },
            2,
            SubgroupMode::DthPowers { exponent: None },
            24,
            1,
            0,
        ),
        {
            let mut c = harmonic_config(
                QSequence::PrimesCoprimeToA { start: 5 },
                2,
                SubgroupMode::Generators { generators: vec![4] },
                23,
                1,
                0,
            );
            c.a = 3;
            c
        },
        {
            let mut c = harmonic_config(
                QSequence::Integers { start: 5 },
                3,
                SubgroupMode::DthPowers { exponent: None },
                17,
                1,
                0,
            );
            c.alpha_sequence = AlphaSequence::Geometric { c: "9/10".into() };
            c
        },
    ];
    let mut rng = ChaCha20Rng::seed_from_u64(s.seed ^ 0x41);
    let mut t = Tally::default();
    for cfg in configs {
        let exp = Experiment::prepare(cfg).expect("valid config");
        if exp.terms.iter().any(|t| t.modulus > 10_000) {
            t.case(false, || "scan config exceeds q^d = 10^4".into());
            continue;
        }
        let xs: Vec<Rational> = (0..s.hit_scan_cases)
            .map(|i| {
                if i % 4 == 0 {
                    // exact centres
                    let term = &exp.terms[rng.random_range(0..exp.terms.len())];
                    Rational::new(rng.random_range(1..term.modulus).into(), term.modulus.into())
                } else {
                    Rational::new(
                        BigInt::from(rng.random::<u64>() >> 1),
                        BigInt::from(u64::MAX >> 1),
                    )
                }
            })
            .collect();
        let part = par_tally(xs, |x| {
            let mut t = Tally::default();
            let fast = exp.find_hits(&x);
            let slow = scan_hits(&x, &exp).unwrap();
            t.case(fast == slow, || {
                format!("x={x}: {} hits vs {} by scan", fast.len(), slow.len())
            });
            t
        });
        t = t.merge(part);
    }
    t.finish("experiment.hits_vs_scan", start)
}

/// Re-validation of every Monte Carlo hit, monotonicity of `F(m, K')` in both
/// arguments, and thread-count invariance of the summary.
pub fn check_monte_carlo(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let mut t = Tally::default();
    let configs = [
        harmonic_config(
            QSequence::Integers { start: 2 },
            1,
            SubgroupMode::Full,
            s.mc_horizon,
            s.mc_samples,
            s.seed,
        ),
        harmonic_config(
            QSequence::Primes { start: 7 },
            2,
            SubgroupMode::DthPowers { exponent: None },
            s.mc_horizon,
            s.mc_samples,
            s.seed,
        ),
    ];
    for cfg in configs {
        let (exp, _, mc, one) = run(cfg.clone(), 1).expect("valid config");
        let (_, _, _, many) = run(cfg, 4).expect("valid config");
        t.case(one.to_json() == many.to_json(), || {
            "summary differs between 1 and 4 threads".into()
        });

        let rule = exp.config.subgroup_rule();
        let den = BigInt::one() << exp.config.precision_bits as usize;
        let cosets: Vec<Coset> = exp.terms.iter().map(|term| term.coset(&rule).unwrap()).collect();
        for o in &mc.outcomes {
            let x = Rational::new(o.x_numerator.clone(), den.clone());
            for h in &o.hits {
                let term = &exp.terms[h.k - 1];
                let centre = Rational::new(h.p.into(), term.modulus.into());
                let ok = h.error == (&x - centre).abs()
                    && h.error < &term.alpha / from_u64(term.modulus)
                    && gcd(h.p, h.q) == 1
                    && coset_contains(&cosets[h.k - 1], h.p as i64);
                t.case(ok, || {
                    format!(
                        "sample {}: hit at k={} p={} fails re-validation",
                        o.index, h.k, h.p
                    )
                });
            }
        }
        let ladder = exp.config.ladder();
        for &m in &exp.config.min_hits {
            for w in ladder.windows(2) {
                t.case(mc.fraction(m, w[0]) <= mc.fraction(m, w[1]), || {
                    format!("F({m}, K') decreased at {}", w[1])
                });
            }
        }
        for w in exp.config.min_hits.windows(2) {
            for &k in &ladder {
                t.case(mc.fraction(w[1], k) <= mc.fraction(w[0], k), || {
                    format!("F(m, {k}) grew with m")
                });
            }
        }
    }
    t.finish("experiment.monte_carlo_consistency", start)
}

/// Observed fraction with at least one hit against the exact union bound
/// `sum lambda(E_k)` plus three binomial standard deviations.
pub fn convergent_control(cfg: ExperimentConfig) -> (Rational, Rational, f64) {
    let exp = Experiment::prepare(cfg).expect("valid config");
    let mc = monte_carlo_measure(&exp);
    let k = exp.config.horizon;
    let observed = mc.fraction(1, k).expect("K is on the ladder");
    let union = exp.expected_hits(k);
    let p = to_f64(&union).min(1.0);
    let sigma = (p * (1.0 - p) / exp.config.samples as f64).sqrt();
    (observed, union, sigma)
}

pub fn convergent_config(horizon: usize, samples: usize, seed: u64) -> ExperimentConfig {
    let mut c = harmonic_config(
        QSequence::Integers { start: 2 },
        1,
        SubgroupMode::Full,
        horizon,
        samples,
        seed,
    );
    c.alpha_sequence = AlphaSequence::Geometric { c: "2/5".into() };
    c
}

pub fn check_convergent_control(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let (observed, union, sigma) =
        convergent_control(convergent_config(s.mc_horizon, s.mc_samples.max(200), s.seed));
    let mut t = Tally::default();
    let limit = to_f64(&union) + 3.0 * sigma;
    t.case(to_f64(&observed) <= limit, || {
        format!("observed {observed} > union bound {} + 3 sigma", to_f64(&union))
    });
    t.note = format!("observed {observed}, union bound {:.6}", to_f64(&union));
    t.finish("experiment.convergent_control", start)
}

/// Exact density certificate for odd primes from 7 with `d = 2`.
pub fn check_conditions_certificate(s: &Scale) -> CheckOutcome {
    let start = Instant::now();
    let cfg = harmonic_config(
        QSequence::Primes { start: 7 },
        2,
        SubgroupMode::DthPowers { exponent: None },
        s.mc_horizon,
        1,
        0,
    );
    let exp = Experiment::prepare(cfg).unwrap();
    let r = check_conditions(&exp, 0.1);
    let mut t = Tally::default();
    let two_fifths = ratio(2, 5);
    t.case(
        r.min_density > two_fifths && r.running_min_c_ratio > two_fifths,
        || {
            format!(
                "min density {} / running min {}",
                r.min_density, r.running_min_c_ratio
            )
        },
    );
    for (term, row) in exp.terms.iter().zip(&r.rows) {
        let want = Rational::new((term.q - 1).into(), (2 * term.q).into());
        t.case(term.density() == want && row.c_ratio >= r.min_density, || {
            format!("q={}: density {}", term.q, term.density())
        });
    }
    t.finish("experiment.conditions_certificate", start)
}

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

pub type Check = fn(&Scale) -> CheckOutcome;

pub const CHECKS: &[Check] = &[
    check_power_counts,
    check_arith_identities,
    check_growth,
    check_decomposition,
    check_power_subgroups,
    check_cosets_and_quotients,
    check_characters,
    check_polya_vinogradov,
    check_sieve,
    check_counting_identity,
    check_count_bound,
    check_power_lift,
    check_overlap,
    check_hits_vs_scan,
    check_monte_carlo,
    check_convergent_control,
    check_conditions_certificate,
];

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(CheckOutcome::passed)
    }
}

pub fn run_suite(scale: &Scale) -> VerifyReport {
    VerifyReport {
        outcomes: CHECKS.iter().map(|c| c(scale)).collect(),
    }
}
