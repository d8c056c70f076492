//! Desk-scale experiments on approximation by fractions `p / q_k^d` whose
//! numerators lie in a prescribed coset `a G_k` modulo `q_k`.
//!
//! An [`ExperimentConfig`] names the denominators `q_k`, radii `alpha_k`,
//! the power `d`, the coset representative `a` and a rule for `G_k`. From it:
//!
//! - [`check_conditions`] computes the prefix sums behind the divergence and
//!   density hypotheses, exactly;
//! - [`abel_condition_check`] verifies that an averaged density bound implies
//!   the weighted one when `alpha_k` is non-increasing;
//! - [`Experiment::find_hits`] lists every `k <= K` with
//!   `|x - p/q_k^d| < alpha_k / q_k^d`, `gcd(p, q_k) = 1` and `p mod q_k in aG_k`,
//!   decided with integer arithmetic only;
//! - [`monte_carlo_measure`] samples dyadic `x` and tabulates the fraction of
//!   samples with at least `m` hits among `k <= K'`.

use std::sync::OnceLock;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{self, euler_phi, factor, gcd, is_prime, mod_inverse, mul_mod, Factorization};
use crate::format::sig12;
use crate::rational::{self, from_f64_exact, from_u64, parse_rational, to_exact_string, to_f64, Rational};
use crate::residue_group::{
    coset_contains, is_dth_power_residue, unit_group, Coset, SubgroupRule, GROUP_CUTOFF,
};
use crate::{Error, Result, SCHEMA_VERSION};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QSequence {
    /// Explicit denominators; must cover `k = 1..=K`.
    List { values: Vec<u64> },
    /// Consecutive primes `>= start`.
    Primes {
        #[serde(default = "default_start")]
        start: u64,
    },
    /// Consecutive integers `>= start` (`start >= 2`).
    Integers {
        #[serde(default = "default_start")]
        start: u64,
    },
    /// Consecutive primes `>= start` that do not divide `a`.
    PrimesCoprimeToA {
        #[serde(default = "default_start")]
        start: u64,
    },
}

fn default_start() -> u64 {
    2
}

/// Radii `alpha_k`, with `c` an exact rational string such as `"2/5"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlphaSequence {
    List {
        values: Vec<String>,
    },
    /// `c / k`.
    Harmonic {
        c: String,
    },
    /// `c / ((k + 1) ln(k + 1))`, rounded once to the nearest `f64` and then
    /// taken exactly.
    KLogK {
        c: String,
    },
    /// `c 2^{-k}`.
    Geometric {
        c: String,
    },
    /// `c / k^s`, rounded once to the nearest `f64` and then taken exactly.
    Power {
        c: String,
        s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SubgroupMode {
    /// d-th power residues mod `q_k`; `exponent` defaults to the config's `d`.
    DthPowers {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exponent: Option<u64>,
    },
    /// Subgroup generated by these residues mod `q_k`.
    Generators { generators: Vec<u64> },
    /// All of `(Z/q_kZ)^x`.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub q_sequence: QSequence,
    pub alpha_sequence: AlphaSequence,
    pub d: u32,
    pub a: u64,
    pub subgroup_mode: SubgroupMode,
    /// Horizon `K`.
    #[serde(rename = "K")]
    pub horizon: usize,
    pub samples: usize,
    #[serde(default = "default_precision")]
    pub precision_bits: u32,
    pub seed: u64,
    #[serde(default = "default_min_hits")]
    pub min_hits: Vec<u32>,
    /// Horizons `K' <= K` at which hit fractions are reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<usize>>,
    /// Prefix length for the exact condition sums; defaults to `min(K, 1000)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions_horizon: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}
fn default_precision() -> u32 {
    128
}
fn default_min_hits() -> Vec<u32> {
    vec![1, 3, 5]
}
fn default_epsilon() -> f64 {
    0.1
}

/// Largest `q^d` accepted; keeps every numerator in `u64`.
const MAX_DENOMINATOR: u64 = 1 << 62;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn subgroup_rule(&self) -> SubgroupRule {
        match &self.subgroup_mode {
            SubgroupMode::Full => SubgroupRule::Full,
            SubgroupMode::DthPowers { exponent } => {
                SubgroupRule::DthPowers(exponent.unwrap_or(self.d as u64))
            }
            SubgroupMode::Generators { generators } => SubgroupRule::Generators(generators.clone()),
        }
    }

    pub fn ladder(&self) -> Vec<usize> {
        match &self.ladder {
            Some(l) => l.clone(),
            None => {
                let mut l: Vec<usize> = std::iter::successors(Some(10usize), |x| x.checked_mul(10))
                    .take_while(|&x| x < self.horizon)
                    .collect();
                l.push(self.horizon);
                l
            }
        }
    }

    pub fn conditions_horizon(&self) -> usize {
        self.conditions_horizon
            .unwrap_or(self.horizon.min(1000))
            .min(self.horizon)
    }

    /// `q_1, .., q_K`.
    pub fn denominators(&self) -> Result<Vec<u64>> {
        let k = self.horizon;
        let take_from = |start: u64, keep: &dyn Fn(u64) -> bool| -> Vec<u64> {
            (start..).filter(|&q| keep(q)).take(k).collect()
        };
        let qs = match &self.q_sequence {
            QSequence::List { values } => {
                if values.len() < k {
                    return Err(Error::config(
                        "q_sequence.values",
                        format!("has {} entries, K = {k}", values.len()),
                    ));
                }
                values[..k].to_vec()
            }
            QSequence::Primes { start } => take_from(*start, &is_prime),
            QSequence::Integers { start } => take_from((*start).max(2), &|_| true),
            QSequence::PrimesCoprimeToA { start } => {
                take_from(*start, &|q| is_prime(q) && !self.a.is_multiple_of(q))
            }
        };
        Ok(qs)
    }

    /// `alpha_1, .., alpha_K` as exact rationals.
    pub fn alphas(&self) -> Result<Vec<Rational>> {
        let k = self.horizon;
        let c_of = |c: &str| parse_rational(c).map_err(|e| Error::config("alpha_sequence.c", e.to_string()));
        match &self.alpha_sequence {
            AlphaSequence::List { values } => {
                if values.len() < k {
                    return Err(Error::config(
                        "alpha_sequence.values",
                        format!("has {} entries, K = {k}", values.len()),
                    ));
                }
                values[..k]
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        parse_rational(v)
                            .map_err(|e| Error::config(format!("alpha_sequence.values[{i}]"), e.to_string()))
                    })
                    .collect()
            }
            AlphaSequence::Harmonic { c } => {
                let c = c_of(c)?;
                Ok((1..=k).map(|j| &c / from_u64(j as u64)).collect())
            }
            AlphaSequence::Geometric { c } => {
                let c = c_of(c)?;
                Ok((1..=k)
                    .map(|j| Rational::new(c.numer().clone(), c.denom() << j))
                    .collect())
            }
            AlphaSequence::KLogK { c } => {
                let c = to_f64(&c_of(c)?);
                (1..=k)
                    .map(|j| {
                        let x = (j + 1) as f64;
                        from_f64_exact(c / (x * x.ln()))
                    })
                    .collect()
            }
            AlphaSequence::Power { c, s } => {
                let c = to_f64(&c_of(c)?);
                (1..=k).map(|j| from_f64_exact(c / (j as f64).powf(*s))).collect()
            }
        }
    }

    /// Field-level validation of everything except the sequences' values.
    fn validate_scalars(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::config("K", "must be at least 1"));
        }
        if self.d == 0 {
            return Err(Error::config("d", "must be at least 1"));
        }
        if self.a == 0 {
            return Err(Error::config("a", "must be at least 1"));
        }
        if !(1..=4096).contains(&self.precision_bits) {
            return Err(Error::config("precision_bits", "must lie in 1..=4096"));
        }
        if self.min_hits.is_empty() || self.min_hits.contains(&0) {
            return Err(Error::config(
                "min_hits",
                "must be a non-empty list of positive counts",
            ));
        }
        if let Some(l) = &self.ladder {
            if l.is_empty()
                || l.windows(2).any(|w| w[0] >= w[1])
                || l[0] == 0
                || *l.last().unwrap() > self.horizon
            {
                return Err(Error::config(
                    "ladder",
                    "must be strictly increasing values in 1..=K",
                ));
            }
        }
        if let SubgroupMode::DthPowers { exponent: Some(0) } = self.subgroup_mode {
            return Err(Error::config("subgroup_mode.exponent", "must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::config("epsilon", "must lie in (0, 1/2)"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Prepared terms
// ---------------------------------------------------------------------------

/// How `p mod q` is tested against `aG`.
#[derive(Debug)]
enum Membership {
    Units,
    PowerResidue {
        a_inv: u64,
        exponent: u64,
    },
    Explicit {
        generators: Vec<u64>,
        coset: OnceLock<Coset>,
    },
}

/// Everything about index `k` that does not depend on the sampled `x`.
#[derive(Debug)]
pub struct Term {
    pub k: usize,
    pub q: u64,
    /// `q^d`.
    pub modulus: u64,
    pub alpha: Rational,
    /// `|G_k|`.
    pub subgroup_order: u64,
    factorization: Factorization,
    big_modulus: BigInt,
    /// Dyadic `m / 2^s >= alpha` for a cheap exact pre-check.
    alpha_bound: (BigInt, u64),
    membership: Membership,
    a: u64,
}

impl Term {
    /// `|G_k| / q_k`: centres per unit length of `E_k`, divided by `q_k^d`.
    pub fn density(&self) -> Rational {
        Rational::new(self.subgroup_order.into(), self.q.into())
    }

    /// `lambda(E_k) = 2 alpha_k |G_k| / q_k`.
    pub fn measure(&self) -> Rational {
        from_u64(2) * &self.alpha * self.density()
    }

    /// `phi(q) / (q^{1/2 - eps} |G|)`.
    pub fn cond_c_value(&self, epsilon: f64) -> f64 {
        euler_phi(&self.factorization) as f64
            / ((self.q as f64).powf(0.5 - epsilon) * self.subgroup_order as f64)
    }

    /// `gcd(p, q) = 1` and `p mod q in aG`.
    pub fn in_coset(&self, p: u64) -> bool {
        let r = p % self.q;
        if gcd(r, self.q) != 1 {
            return false;
        }
        match &self.membership {
            Membership::Units => true,
            Membership::PowerResidue { a_inv, exponent } => {
                is_dth_power_residue(mul_mod(*a_inv, r, self.q), &self.factorization, *exponent)
            }
            Membership::Explicit { generators, coset } => coset
                .get_or_init(|| {
                    let g = unit_group(self.q).expect("validated modulus");
                    let s = SubgroupRule::Generators(generators.clone())
                        .build(&g)
                        .expect("validated generators");
                    Coset::new(self.a, std::sync::Arc::new(s)).expect("validated unit")
                })
                .contains_residue(r),
        }
    }

    /// The explicit coset `aG_k`, built on demand.
    pub fn coset(&self, rule: &SubgroupRule) -> Result<Coset> {
        let g = unit_group(self.q)?;
        Coset::new(self.a, std::sync::Arc::new(rule.build(&g)?))
    }
}

/// One solved inequality `|x - p/q^d| < alpha/q^d` with `p mod q in aG`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HitRecord {
    pub k: usize,
    pub q: u64,
    pub p: u64,
    /// `|x - p/q^d|`.
    #[serde(serialize_with = "ser_rational")]
    pub error: Rational,
}

fn ser_rational<S: serde::Serializer>(x: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&to_exact_string(x))
}

/// A validated config with its per-`k` data materialised.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub terms: Vec<Term>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate_scalars()?;
        let qs = config.denominators()?;
        let alphas = config.alphas()?;
        let rule = config.subgroup_rule();
        let half = rational::ratio(1, 2);
        let mut terms = Vec::with_capacity(config.horizon);
        let mut prev = 0u64;
        for (i, (q, alpha)) in qs.into_iter().zip(alphas).enumerate() {
            let k = i + 1;
            if q < 2 {
                return Err(Error::config(
                    "q_sequence",
                    format!("q_{k} = {q} must be at least 2"),
                ));
            }
            if q <= prev {
                return Err(Error::config(
                    "q_sequence",
                    format!("not strictly increasing at k = {k}"),
                ));
            }
            prev = q;
            if !(alpha.is_positive() && alpha < half) {
                return Err(Error::config(
                    "alpha_sequence",
                    format!("alpha_{k} = {alpha} is outside (0, 1/2)"),
                ));
            }
            if gcd(config.a % q, q) != 1 {
                return Err(Error::config(
                    "a",
                    format!("a = {} is not a unit modulo q_{k} = {q}", config.a),
                ));
            }
            let modulus = q
                .checked_pow(config.d)
                .filter(|&m| m <= MAX_DENOMINATOR)
                .ok_or_else(|| Error::config("d", format!("q_{k}^d exceeds 2^62")))?;
            let factorization = factor(q)?;
            let (membership, subgroup_order) = match &rule {
                SubgroupRule::Full => (Membership::Units, euler_phi(&factorization)),
                SubgroupRule::DthPowers(e) => (
                    Membership::PowerResidue {
                        a_inv: mod_inverse(config.a % q, q).expect("checked unit"),
                        exponent: *e,
                    },
                    arith::r_d(&factorization, *e),
                ),
                SubgroupRule::Generators(gens) => {
                    if q > GROUP_CUTOFF {
                        return Err(Error::config(
                            "q_sequence",
                            format!("q_{k} = {q} is above {GROUP_CUTOFF}, too large for generator mode"),
                        ));
                    }
                    if let Some(g) = gens.iter().find(|&&g| gcd(g % q, q) != 1) {
                        return Err(Error::config(
                            "subgroup_mode.generators",
                            format!("{g} is not a unit modulo q_{k} = {q}"),
                        ));
                    }
                    (
                        Membership::Explicit {
                            generators: gens.clone(),
                            coset: OnceLock::new(),
                        },
                        rule.order(q)?,
                    )
                }
            };
            let alpha_bound = rational::dyadic_upper_bound(&alpha);
            terms.push(Term {
                k,
                q,
                modulus,
                alpha,
                subgroup_order,
                factorization,
                big_modulus: BigInt::from(modulus),
                alpha_bound,
                membership,
                a: config.a % q,
            });
        }
        Ok(Experiment { config, terms })
    }

    /// Hits for `x = num / den` (`den > 0`) among the first `horizon` terms.
    pub fn find_hits_raw(&self, num: &BigInt, den: &BigInt, horizon: usize) -> Vec<HitRecord> {
        let mut out = Vec::new();
        for term in self.terms.iter().take(horizon) {
            let scaled = num * &term.big_modulus;
            let floor = scaled.div_floor(den);
            // |x - p/Q| < alpha/Q  <=>  |xQ - p| < alpha < 1/2, so only the one
            // or two integers nearest xQ can qualify; floor - 1, floor and
            // floor + 1 cover every case.
            for delta in [-1i64, 0, 1] {
                let p = &floor + delta;
                if p.sign() != Sign::Plus || p >= term.big_modulus {
                    continue;
                }
                // dist * den = |xn Q - p den|
                let diff = (&scaled - &p * den).abs();
                let (m, s) = &term.alpha_bound;
                if (&diff << *s as usize) >= m * den {
                    continue;
                }
                if &diff * term.alpha.denom() >= term.alpha.numer() * den {
                    continue;
                }
                let p = p.to_u64_digits().1.first().copied().unwrap_or(0);
                if !term.in_coset(p) {
                    continue;
                }
                out.push(HitRecord {
                    k: term.k,
                    q: term.q,
                    p,
                    error: Rational::new(diff, den * &term.big_modulus),
                });
            }
        }
        out
    }

    pub fn find_hits(&self, x: &Rational) -> Vec<HitRecord> {
        self.find_hits_raw(x.numer(), x.denom(), self.terms.len())
    }

    /// `sum_{k <= K'} lambda(E_k)`, the expected number of hits among `k <= K'`.
    ///
    /// Exact, so denominators grow like the lcm of the `q_k`; over prime
    /// `q_k` this is slow well before `K' = 10^4`. See [`Self::expected_hits_upper`].
    pub fn expected_hits(&self, upto: usize) -> Rational {
        self.terms.iter().take(upto).map(Term::measure).sum()
    }

    /// Running upper bounds `m_j / 2^bits >= sum_{k <= K'_j} lambda(E_k)` at
    /// each `K'_j` in `ladder`, every term rounded up to the `2^-bits` grid.
    /// Over-estimates by at most `K' 2^-bits`.
    pub fn expected_hits_upper(&self, ladder: &[usize], bits: u32) -> Vec<Rational> {
        let scale = BigInt::one() << bits as usize;
        let mut acc = BigInt::zero();
        let mut done = 0;
        let mut out = Vec::with_capacity(ladder.len());
        for &kp in ladder {
            for t in &self.terms[done..kp] {
                let num = BigInt::from(2 * t.subgroup_order) * t.alpha.numer() * &scale;
                let den = t.alpha.denom() * BigInt::from(t.q);
                acc += num.div_ceil(&den);
            }
            done = kp;
            out.push(Rational::new(acc.clone(), scale.clone()));
        }
        out
    }
}

/// Oracle for [`Experiment::find_hits`]: scans every `p` in `(0, q^d)` with
/// explicit cosets. Only practical for small `q^d`.
pub fn scan_hits(x: &Rational, exp: &Experiment) -> Result<Vec<HitRecord>> {
    let rule = exp.config.subgroup_rule();
    let (xn, xd) = (x.numer(), x.denom());
    let mut out = Vec::new();
    for t in &exp.terms {
        let c = t.coset(&rule)?;
        let scaled = xn * BigInt::from(t.modulus);
        let limit = t.alpha.numer() * xd;
        for p in 1..t.modulus {
            if gcd(p, t.q) != 1 || !coset_contains(&c, p as i64) {
                continue;
            }
            // |x - p/Q| < alpha/Q  <=>  |xn Q - p xd| alpha_den < alpha_num xd
            let diff = (&scaled - BigInt::from(p) * xd).abs();
            if &diff * t.alpha.denom() < limit {
                out.push(HitRecord {
                    k: t.k,
                    q: t.q,
                    p,
                    error: Rational::new(diff, xd * BigInt::from(t.modulus)),
                });
            }
        }
    }
    Ok(out)
}

pub fn find_hits(x: &Rational, cfg: &ExperimentConfig) -> Result<Vec<HitRecord>> {
    Ok(Experiment::prepare(cfg.clone())?.find_hits(x))
}

// ---------------------------------------------------------------------------
// Condition checks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionsRow {
    pub n: usize,
    /// `sum_{k <= n} alpha_k`.
    pub partial_sum_alpha: Rational,
    /// `sum_{k <= n} alpha_k |G_k| / q_k`.
    pub weighted_sum: Rational,
    pub c_ratio: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionsReport {
    pub rows: Vec<ConditionsRow>,
    /// `phi(q_k) / (q_k^{1/2 - eps} |G_k|)` for every `k <= K`.
    pub cond_c_values: Vec<f64>,
    pub epsilon: f64,
    /// `min_n c_ratio_n` over the exact prefix rows.
    pub running_min_c_ratio: Rational,
    /// `min_{k <= K} |G_k| / q_k`. Each `c_ratio_n` is an `alpha`-weighted mean
    /// of these densities, so this is an exact lower bound for every prefix up to `K`.
    pub min_density: Rational,
}

impl ConditionsReport {
    /// Mean of the last quarter of `cond_c_values` below the mean of the first quarter.
    pub fn cond_c_decreasing(&self) -> bool {
        let v = &self.cond_c_values;
        let q = (v.len() / 4).max(1);
        if v.len() < 2 {
            return false;
        }
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        mean(&v[v.len() - q..]) < mean(&v[..q])
    }

    pub fn final_row(&self) -> &ConditionsRow {
        self.rows.last().expect("horizon >= 1")
    }
}

pub fn check_conditions(exp: &Experiment, epsilon: f64) -> ConditionsReport {
    let h = exp.config.conditions_horizon();
    let mut rows = Vec::with_capacity(h);
    let mut alpha_sum = Rational::zero();
    let mut weighted = Rational::zero();
    let mut running_min: Option<Rational> = None;
    for term in exp.terms.iter().take(h) {
        alpha_sum += &term.alpha;
        weighted += &term.alpha * term.density();
        let c_ratio = &weighted / &alpha_sum;
        if running_min.as_ref().is_none_or(|m| &c_ratio < m) {
            running_min = Some(c_ratio.clone());
        }
        rows.push(ConditionsRow {
            n: term.k,
            partial_sum_alpha: alpha_sum.clone(),
            weighted_sum: weighted.clone(),
            c_ratio,
        });
    }
    let min_density = exp.terms.iter().map(Term::density).min().expect("horizon >= 1");
    ConditionsReport {
        rows,
        cond_c_values: exp.terms.iter().map(|t| t.cond_c_value(epsilon)).collect(),
        epsilon,
        running_min_c_ratio: running_min.expect("horizon >= 1"),
        min_density,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbelRow {
    pub n: usize,
    /// `sum_{k <= n} |G_k| / q_k`.
    pub density_sum: Rational,
    pub c_ratio: Rational,
}

/// Summation by parts: `sum_k |G_k|/q_k > c n` for all `n` together with
/// non-increasing `alpha` gives `sum alpha_k |G_k|/q_k >= c sum alpha_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbelReport {
    pub rows: Vec<AbelRow>,
    /// Largest `c` with `sum_{k <= n} |G_k|/q_k >= c n` on every computed prefix.
    pub c_star: Rational,
    pub min_c_ratio: Rational,
}

impl AbelReport {
    /// The implication checked on the data: every `c_ratio_n >= c_star`.
    pub fn implication_holds(&self) -> bool {
        self.min_c_ratio >= self.c_star
    }
}

pub fn abel_condition_check(exp: &Experiment) -> Result<AbelReport> {
    let h = exp.config.conditions_horizon();
    let terms = &exp.terms[..h];
    if let Some(w) = terms.windows(2).find(|w| w[1].alpha > w[0].alpha) {
        return Err(Error::NotMonotone { k: w[1].k });
    }
    let mut density_sum = Rational::zero();
    let mut alpha_sum = Rational::zero();
    let mut weighted = Rational::zero();
    let mut c_star: Option<Rational> = None;
    let mut min_c: Option<Rational> = None;
    let mut rows = Vec::with_capacity(h);
    for t in terms {
        let dens = t.density();
        density_sum += &dens;
        alpha_sum += &t.alpha;
        weighted += &t.alpha * &dens;
        let avg = &density_sum / from_u64(t.k as u64);
        let c_ratio = &weighted / &alpha_sum;
        if c_star.as_ref().is_none_or(|c| &avg < c) {
            c_star = Some(avg);
        }
        if min_c.as_ref().is_none_or(|c| &c_ratio < c) {
            min_c = Some(c_ratio.clone());
        }
        rows.push(AbelRow {
            n: t.k,
            density_sum: density_sum.clone(),
            c_ratio,
        });
    }
    Ok(AbelReport {
        rows,
        c_star: c_star.expect("horizon >= 1"),
        min_c_ratio: min_c.expect("horizon >= 1"),
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

/// Uniform dyadic `m / 2^bits` in `[0, 1)` for sample `index`, drawn from
/// stream `index` of a ChaCha20 generator keyed by `seed`.
pub fn sample_dyadic(seed: u64, index: u64, bits: u32) -> BigInt {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let words = bits.div_ceil(32) as usize;
    let mut digits: Vec<u32> = (0..words).map(|_| rng.next_u32()).collect();
    let spare = words as u32 * 32 - bits;
    if spare > 0 {
        let last = digits.last_mut().expect("bits >= 1");
        *last >>= spare;
    }
    BigInt::from_slice(Sign::Plus, &digits)
}

#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub index: usize,
    pub x_numerator: BigInt,
    pub hits: Vec<HitRecord>,
}

/// Fraction of samples with at least `m` hits among `k <= k_prime`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionRow {
    pub k_prime: usize,
    pub m: u32,
    pub count: usize,
    /// Exact `count/samples`.
    pub fraction: String,
    pub fraction_decimal: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderRow {
    pub k_prime: usize,
    /// Total hits among `k <= k_prime` over all samples.
    pub total_hits: usize,
    pub mean_hits_decimal: String,
    /// `sum_{k <= k_prime} lambda(E_k)`, from a `2^-128`-grid upper bound.
    pub expected_hits_decimal: String,
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub samples: usize,
    pub outcomes: Vec<SampleOutcome>,
    pub table: Vec<FractionRow>,
    pub ladder: Vec<LadderRow>,
}

impl MonteCarloResult {
    pub fn fraction(&self, m: u32, k_prime: usize) -> Option<Rational> {
        self.table
            .iter()
            .find(|r| r.m == m && r.k_prime == k_prime)
            .map(|r| Rational::new(r.count.into(), self.samples.into()))
    }
}

/// Runs every sample; results depend only on the config, never on the
/// number of worker threads.
pub fn monte_carlo_measure(exp: &Experiment) -> MonteCarloResult {
    let cfg = &exp.config;
    let den = BigInt::one() << cfg.precision_bits as usize;
    let outcomes: Vec<SampleOutcome> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let num = sample_dyadic(cfg.seed, i as u64, cfg.precision_bits);
            let hits = exp.find_hits_raw(&num, &den, cfg.horizon);
            SampleOutcome {
                index: i,
                x_numerator: num,
                hits,
            }
        })
        .collect();

    let ladder = cfg.ladder();
    let n = cfg.samples.max(1);
    let mut table = Vec::new();
    for &m in &cfg.min_hits {
        for &kp in &ladder {
            let count = outcomes
                .iter()
                .filter(|o| o.hits.iter().filter(|h| h.k <= kp).count() >= m as usize)
                .count();
            table.push(FractionRow {
                k_prime: kp,
                m,
                count,
                fraction: format!("{count}/{}", cfg.samples),
                fraction_decimal: sig12(count as f64 / n as f64),
            });
        }
    }
    let upper = exp.expected_hits_upper(&ladder, 128);
    let mut ladder_rows = Vec::new();
    for (&kp, expected) in ladder.iter().zip(&upper) {
        let total: usize = outcomes
            .iter()
            .map(|o| o.hits.iter().filter(|h| h.k <= kp).count())
            .sum();
        ladder_rows.push(LadderRow {
            k_prime: kp,
            total_hits: total,
            mean_hits_decimal: sig12(total as f64 / n as f64),
            expected_hits_decimal: sig12(to_f64(expected)),
        });
    }
    MonteCarloResult {
        samples: cfg.samples,
        outcomes,
        table,
        ladder: ladder_rows,
    }
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConditionsSummary {
    pub horizon: usize,
    pub epsilon: String,
    pub partial_sum_alpha_decimal: String,
    pub final_c_ratio_decimal: String,
    pub running_min_c_ratio_decimal: String,
    /// Exact lower bound for `c_ratio_n`, every `n <= K`.
    pub min_density: String,
    pub cond_c_first: String,
    pub cond_c_last: String,
    pub cond_c_decreasing: bool,
}

impl ConditionsSummary {
    pub fn from_report(r: &ConditionsReport) -> Self {
        let last = r.final_row();
        ConditionsSummary {
            horizon: last.n,
            epsilon: sig12(r.epsilon),
            partial_sum_alpha_decimal: sig12(to_f64(&last.partial_sum_alpha)),
            final_c_ratio_decimal: sig12(to_f64(&last.c_ratio)),
            running_min_c_ratio_decimal: sig12(to_f64(&r.running_min_c_ratio)),
            min_density: to_exact_string(&r.min_density),
            cond_c_first: sig12(r.cond_c_values[0]),
            cond_c_last: sig12(*r.cond_c_values.last().expect("K >= 1")),
            cond_c_decreasing: r.cond_c_decreasing(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloSummary {
    pub samples: usize,
    pub horizon: usize,
    pub fractions: Vec<FractionRow>,
    pub ladder: Vec<LadderRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub conditions: ConditionsSummary,
    pub monte_carlo: MonteCarloSummary,
}

impl ExperimentSummary {
    pub fn new(exp: &Experiment, conditions: &ConditionsReport, mc: &MonteCarloResult) -> Self {
        ExperimentSummary {
            schema_version: SCHEMA_VERSION,
            config: exp.config.clone(),
            conditions: ConditionsSummary::from_report(conditions),
            monte_carlo: MonteCarloSummary {
                samples: mc.samples,
                horizon: exp.config.horizon,
                fractions: mc.table.clone(),
                ladder: mc.ladder.clone(),
            },
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serialises");
        s.push('\n');
        s
    }
}

/// Conditions, Monte Carlo and summary in one call, on a pool of `threads`
/// workers (`0` = rayon's default).
pub fn run(
    config: ExperimentConfig,
    threads: usize,
) -> Result<(Experiment, ConditionsReport, MonteCarloResult, ExperimentSummary)> {
    let exp = Experiment::prepare(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let (cond, mc) = pool.install(|| {
        let cond = check_conditions(&exp, exp.config.epsilon);
        let mc = monte_carlo_measure(&exp);
        (cond, mc)
    });
    let summary = ExperimentSummary::new(&exp, &cond, &mc);
    Ok((exp, cond, mc, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn base(q: QSequence, alpha: AlphaSequence, d: u32, mode: SubgroupMode, k: usize) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            q_sequence: q,
            alpha_sequence: alpha,
            d,
            a: 1,
            subgroup_mode: mode,
            horizon: k,
            samples: 64,
            precision_bits: 128,
            seed: 7,
            min_hits: vec![1, 2],
            ladder: None,
            conditions_horizon: None,
            epsilon: 0.1,
        }
    }

    fn single(q: u64, alpha: &str, d: u32) -> ExperimentConfig {
        base(
            QSequence::List { values: vec![q] },
            AlphaSequence::List {
                values: vec![alpha.into()],
            },
            d,
            SubgroupMode::Full,
            1,
        )
    }

    #[test]
    fn find_hits_examples() {
        let cfg = single(5, "2/5", 1);
        let hits = find_hits(&ratio(1, 3), &cfg).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].p, 2);
        assert_eq!(hits[0].error, ratio(1, 15));

        let cfg = single(5, "1/100", 1);
        assert!(find_hits(&ratio(1, 3), &cfg).unwrap().is_empty());

        // An exact centre hits with error 0 whenever the coset allows it.
        let cfg = single(7, "1/1000", 1);
        let hits = find_hits(&ratio(3, 7), &cfg).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].error, ratio(0, 1));
        let mut sq = single(7, "1/1000", 1);
        sq.subgroup_mode = SubgroupMode::DthPowers { exponent: Some(2) };
        assert!(find_hits(&ratio(3, 7), &sq).unwrap().is_empty()); // 3 is a non-residue
        assert_eq!(find_hits(&ratio(2, 7), &sq).unwrap().len(), 1);
    }

    #[test]
    fn find_hits_agrees_with_full_scan() {
        let modes = [
            SubgroupMode::Full,
            SubgroupMode::DthPowers { exponent: None },
            SubgroupMode::Generators { generators: vec![2] },
        ];
        for mode in modes {
            for d in [1u32, 2] {
                let mut cfg = base(
                    QSequence::PrimesCoprimeToA { start: 3 },
                    AlphaSequence::List {
                        values: ["49/100", "2/5", "1/3", "1/4", "3/7", "1/5", "9/20", "1/7"]
                            .map(String::from)
                            .to_vec(),
                    },
                    d,
                    mode.clone(),
                    8,
                );
                cfg.a = 2;
                let exp = Experiment::prepare(cfg).unwrap();
                assert!(exp.terms.iter().all(|t| t.modulus <= 10_000));
                for j in 0..300 {
                    let x = Rational::new(BigInt::from(j * 7919 % 3001 + 1), BigInt::from(3003));
                    assert_eq!(
                        exp.find_hits(&x),
                        scan_hits(&x, &exp).unwrap(),
                        "x = {x}, d = {d}"
                    );
                }
            }
        }
    }

    #[test]
    fn hit_records_revalidate() {
        let mut cfg = base(
            QSequence::Primes { start: 7 },
            AlphaSequence::Harmonic { c: "2/5".into() },
            2,
            SubgroupMode::DthPowers { exponent: None },
            300,
        );
        cfg.a = 3;
        let exp = Experiment::prepare(cfg).unwrap();
        let mc = monte_carlo_measure(&exp);
        let rule = exp.config.subgroup_rule();
        let den = BigInt::one() << 128usize;
        let mut seen = 0;
        for o in &mc.outcomes {
            let x = Rational::new(o.x_numerator.clone(), den.clone());
            for h in &o.hits {
                let t = &exp.terms[h.k - 1];
                let centre = Rational::new(h.p.into(), t.modulus.into());
                assert_eq!(h.error, (&x - &centre).abs());
                assert!(h.error < &t.alpha / from_u64(t.modulus));
                assert_eq!(gcd(h.p, h.q), 1);
                assert!(coset_contains(&t.coset(&rule).unwrap(), h.p as i64));
                seen += 1;
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn config_validation() {
        let ok = base(
            QSequence::Integers { start: 2 },
            AlphaSequence::Harmonic { c: "2/5".into() },
            1,
            SubgroupMode::Full,
            50,
        );
        assert!(Experiment::prepare(ok.clone()).is_ok());

        let mut bad = ok.clone();
        bad.alpha_sequence = AlphaSequence::Harmonic { c: "1/2".into() };
        assert!(
            matches!(Experiment::prepare(bad), Err(Error::Config { field, .. }) if field == "alpha_sequence")
        );

        let mut bad = ok.clone();
        bad.a = 6;
        assert!(matches!(Experiment::prepare(bad), Err(Error::Config { field, .. }) if field == "a"));

        let mut bad = ok.clone();
        bad.q_sequence = QSequence::List {
            values: vec![2, 3, 3],
        };
        bad.horizon = 3;
        assert!(Experiment::prepare(bad).is_err());

        let mut bad = ok.clone();
        bad.q_sequence = QSequence::List { values: vec![2, 3] };
        assert!(
            matches!(Experiment::prepare(bad), Err(Error::Config { field, .. }) if field == "q_sequence.values")
        );

        let mut bad = ok.clone();
        bad.ladder = Some(vec![10, 5]);
        assert!(Experiment::prepare(bad).is_err());

        let mut bad = ok;
        bad.subgroup_mode = SubgroupMode::Generators { generators: vec![4] };
        assert!(
            matches!(Experiment::prepare(bad), Err(Error::Config { field, .. }) if field == "subgroup_mode.generators")
        );
    }

    #[test]
    fn config_json_round_trip_and_diagnostics() {
        let text = r#"{
            "q_sequence": {"kind": "primes", "start": 7},
            "alpha_sequence": {"kind": "harmonic", "c": "2/5"},
            "d": 2, "a": 1,
            "subgroup_mode": {"mode": "dth-powers"},
            "K": 100, "samples": 10, "seed": 1
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.precision_bits, 128);
        assert_eq!(cfg.min_hits, vec![1, 3, 5]);
        assert_eq!(cfg.ladder(), vec![10, 100]);
        let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);

        let err = ExperimentConfig::from_json(&text.replace("\"K\"", "\"horizon\"")).unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
        assert!(err.line() > 0);
    }

    #[test]
    fn conditions_full_group_is_the_classical_ratio() {
        let cfg = base(
            QSequence::Integers { start: 2 },
            AlphaSequence::Harmonic { c: "1/3".into() },
            1,
            SubgroupMode::Full,
            60,
        );
        let exp = Experiment::prepare(cfg).unwrap();
        let r = check_conditions(&exp, 0.1);
        let mut num = Rational::zero();
        let mut den = Rational::zero();
        for (i, row) in r.rows.iter().enumerate() {
            let q = i as u64 + 2;
            let a = ratio(1, 3) / from_u64(i as u64 + 1);
            num += &a * Rational::new(euler_phi(&factor(q).unwrap()).into(), q.into());
            den += &a;
            assert_eq!(row.c_ratio, &num / &den);
            assert_eq!(row.partial_sum_alpha, den);
        }
        assert!(r.running_min_c_ratio >= r.min_density);
    }

    #[test]
    fn conditions_for_squares_over_odd_primes() {
        // |G|/q = (q - 1) / (2q): 1/3 at q = 3, exactly 2/5 at q = 5, above 2/5 from q = 7.
        let cfg = |start| {
            base(
                QSequence::Primes { start },
                AlphaSequence::Harmonic { c: "2/5".into() },
                2,
                SubgroupMode::DthPowers { exponent: None },
                400,
            )
        };
        let from3 = check_conditions(&Experiment::prepare(cfg(3)).unwrap(), 0.1);
        assert_eq!(from3.rows[0].c_ratio, ratio(1, 3));
        assert_eq!(from3.min_density, ratio(1, 3));
        let from7 = check_conditions(&Experiment::prepare(cfg(7)).unwrap(), 0.1);
        assert_eq!(from7.min_density, ratio(3, 7));
        assert!(from7.running_min_c_ratio > ratio(2, 5));
        assert!(from7.rows.iter().all(|r| r.c_ratio > ratio(2, 5)));
        for (t, row) in Experiment::prepare(cfg(7)).unwrap().terms.iter().zip(&from7.rows) {
            let _ = row;
            assert_eq!(t.density(), arith::s_d(t.q * t.q, 2).unwrap());
        }
        assert!(from7.cond_c_decreasing());
    }

    #[test]
    fn geometric_alpha_sums_stay_below_one() {
        let cfg = base(
            QSequence::Integers { start: 2 },
            AlphaSequence::Geometric { c: "2/5".into() },
            1,
            SubgroupMode::Full,
            200,
        );
        let r = check_conditions(&Experiment::prepare(cfg).unwrap(), 0.1);
        assert!(r.rows.iter().all(|row| row.partial_sum_alpha < ratio(1, 1)));
    }

    #[test]
    fn abel_examples() {
        // Constant density: both sides are trivially the same constant.
        let cfg = base(
            QSequence::Primes { start: 3 },
            AlphaSequence::Harmonic { c: "2/5".into() },
            1,
            SubgroupMode::Full,
            50,
        );
        let mut cfg_const = cfg.clone();
        cfg_const.q_sequence = QSequence::Primes { start: 3 };
        cfg_const.subgroup_mode = SubgroupMode::Generators { generators: vec![1] };
        let r = abel_condition_check(&Experiment::prepare(cfg_const).unwrap()).unwrap();
        assert!(r.implication_holds());

        let sq = base(
            QSequence::Primes { start: 7 },
            AlphaSequence::Harmonic { c: "2/5".into() },
            2,
            SubgroupMode::DthPowers { exponent: None },
            300,
        );
        let r = abel_condition_check(&Experiment::prepare(sq).unwrap()).unwrap();
        assert!(r.implication_holds());
        assert!(r.c_star > ratio(2, 5));

        // Constant alpha: c_ratio_n is exactly the running average.
        let flat = base(
            QSequence::Integers { start: 2 },
            AlphaSequence::List {
                values: vec!["1/4".into(); 40],
            },
            1,
            SubgroupMode::Full,
            40,
        );
        let r = abel_condition_check(&Experiment::prepare(flat).unwrap()).unwrap();
        for row in &r.rows {
            assert_eq!(row.c_ratio, &row.density_sum / from_u64(row.n as u64));
        }
        assert_eq!(r.min_c_ratio, r.c_star);

        let rising = base(
            QSequence::Integers { start: 2 },
            AlphaSequence::List {
                values: vec!["1/4".into(), "1/3".into()],
            },
            1,
            SubgroupMode::Full,
            2,
        );
        assert!(matches!(
            abel_condition_check(&Experiment::prepare(rising).unwrap()),
            Err(Error::NotMonotone { k: 2 })
        ));
        let _ = cfg;
    }

    #[test]
    fn expected_hits_upper_brackets_the_exact_sum() {
        let cfg = base(
            QSequence::Primes { start: 7 },
            AlphaSequence::Harmonic { c: "2/5".into() },
            2,
            SubgroupMode::DthPowers { exponent: None },
            300,
        );
        let exp = Experiment::prepare(cfg).unwrap();
        let ladder = [1, 10, 299, 300];
        let upper = exp.expected_hits_upper(&ladder, 64);
        for (&kp, u) in ladder.iter().zip(&upper) {
            let exact = exp.expected_hits(kp);
            assert!(u >= &exact);
            assert!(u - &exact <= Rational::new(kp.into(), BigInt::one() << 64usize));
        }
    }

    #[test]
    fn dyadic_samples_are_reproducible_and_in_range() {
        let a = sample_dyadic(9, 3, 128);
        assert_eq!(a, sample_dyadic(9, 3, 128));
        assert_ne!(a, sample_dyadic(9, 4, 128));
        assert_ne!(a, sample_dyadic(10, 3, 128));
        for bits in [1u32, 7, 32, 33, 128, 200] {
            for i in 0..50 {
                let x = sample_dyadic(1, i, bits);
                assert!(x < BigInt::one() << bits as usize);
                assert!(x.sign() != Sign::Minus);
            }
        }
    }

    #[test]
    fn monte_carlo_is_thread_count_invariant() {
        let cfg = base(
            QSequence::Integers { start: 2 },
            AlphaSequence::Harmonic { c: "2/5".into() },
            1,
            SubgroupMode::Full,
            500,
        );
        let (_, _, _, one) = run(cfg.clone(), 1).unwrap();
        let (_, _, _, four) = run(cfg, 4).unwrap();
        assert_eq!(one.to_json(), four.to_json());
    }

    #[test]
    fn fractions_are_monotone() {
        let mut cfg = base(
            QSequence::Integers { start: 2 },
            AlphaSequence::Harmonic { c: "2/5".into() },
            1,
            SubgroupMode::Full,
            2000,
        );
        cfg.min_hits = vec![1, 2, 3, 5];
        cfg.ladder = Some(vec![10, 100, 1000, 2000]);
        let exp = Experiment::prepare(cfg).unwrap();
        let mc = monte_carlo_measure(&exp);
        for &m in &exp.config.min_hits {
            for w in exp.config.ladder().windows(2) {
                assert!(mc.fraction(m, w[0]).unwrap() <= mc.fraction(m, w[1]).unwrap());
            }
        }
        for w in exp.config.min_hits.windows(2) {
            assert!(mc.fraction(w[1], 2000).unwrap() <= mc.fraction(w[0], 2000).unwrap());
        }
    }
}
