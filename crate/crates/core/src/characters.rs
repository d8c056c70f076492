//! Dirichlet characters modulo `n`.
//!
//! A character is an exponent vector `(e_1, .., e_r)` against the cyclic
//! factors of the unit group: `chi(g_i) = exp(2 pi i e_i / o_i)`. Values are
//! looked up through an integer phase index modulo the group exponent `L`, so
//! questions like "is `chi` trivial on `g`" are answered exactly and only the
//! final root of unity is floating point.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;

use crate::residue_group::{Subgroup, UnitGroup};

/// Tolerance for "this float sum is an integer / is zero" decisions.
pub const INTEGER_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DirichletCharacter {
    group: Arc<UnitGroup>,
    exponents: Vec<u64>,
    /// `L / o_i` per factor, `L` the group exponent.
    weights: Vec<u64>,
    roots: Arc<Vec<Complex64>>,
}

impl DirichletCharacter {
    /// Character with the given exponents; each is reduced modulo its factor order.
    pub fn new(group: Arc<UnitGroup>, exponents: &[u64]) -> Self {
        let roots = Arc::new(roots_of_unity(group.exponent()));
        Self::with_roots(group, exponents, roots)
    }

    fn with_roots(group: Arc<UnitGroup>, exponents: &[u64], roots: Arc<Vec<Complex64>>) -> Self {
        assert_eq!(exponents.len(), group.cyclic_factors().len());
        let l = roots.len() as u64;
        let exponents = exponents
            .iter()
            .zip(group.cyclic_factors())
            .map(|(&e, f)| e % f.order)
            .collect();
        let weights = group.cyclic_factors().iter().map(|f| l / f.order).collect();
        DirichletCharacter {
            group,
            exponents,
            weights,
            roots,
        }
    }

    pub fn group(&self) -> &Arc<UnitGroup> {
        &self.group
    }

    pub fn modulus(&self) -> u64 {
        self.group.modulus()
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    pub fn is_principal(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    /// `chi(m) = exp(2 pi i k / L)`; returns `k`, or `None` when `gcd(m, n) > 1`.
    #[inline]
    pub fn phase_index(&self, m: u64) -> Option<u64> {
        // The factor logs alone miss a shared factor 2 when 2 || n.
        if !self.group.is_unit(m) {
            return None;
        }
        let l = self.roots.len() as u64;
        let mut acc = 0u64;
        for ((f, &e), &w) in self
            .group
            .cyclic_factors()
            .iter()
            .zip(&self.exponents)
            .zip(&self.weights)
        {
            let log = f.log(m)?;
            acc = (acc + e * log % f.order * w) % l;
        }
        Some(acc)
    }

    /// Exact test `chi(m) = 1`.
    pub fn is_trivial_on(&self, m: u64) -> bool {
        self.phase_index(m) == Some(0)
    }

    pub fn evaluate(&self, m: i64) -> Complex64 {
        let r = m.rem_euclid(self.modulus() as i64) as u64;
        match self.phase_index(r) {
            Some(k) => self.roots[k as usize],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `chi(0), chi(1), .., chi(n-1)`.
    pub fn period_values(&self) -> Vec<Complex64> {
        (0..self.modulus())
            .map(|m| match self.phase_index(m) {
                Some(k) => self.roots[k as usize],
                None => Complex64::new(0.0, 0.0),
            })
            .collect()
    }

    /// `sum_{k=1}^{h} chi(k)`.
    pub fn char_sum(&self, h: u64) -> Complex64 {
        let n = self.modulus();
        let values = self.period_values();
        let partial = |upto: u64| -> Complex64 { (1..=upto).map(|k| values[(k % n) as usize]).sum() };
        let (periods, rest) = (h / n, h % n);
        if periods == 0 {
            return partial(rest);
        }
        partial(n) * periods as f64 + partial(rest)
    }

    /// The `h` in `1..=n` maximising `|sum_{k<=h} chi(k)|`, with that sum.
    ///
    /// One period suffices for non-principal characters, whose full-period sum
    /// vanishes.
    pub fn max_partial_sum(&self) -> (u64, Complex64) {
        let n = self.modulus();
        let values = self.period_values();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut best = (0u64, acc);
        for h in 1..=n {
            acc += values[(h % n) as usize];
            if h == 1 || acc.norm() > best.1.norm() {
                best = (h, acc);
            }
        }
        best
    }
}

fn roots_of_unity(l: u64) -> Vec<Complex64> {
    (0..l)
        .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / l as f64))
        .collect()
}

/// All `phi(n)` characters, exponent vectors in lexicographic order (so the
/// principal character comes first).
pub fn all_characters(g: &Arc<UnitGroup>) -> Vec<DirichletCharacter> {
    let roots = Arc::new(roots_of_unity(g.exponent()));
    let orders: Vec<u64> = g.cyclic_factors().iter().map(|f| f.order).collect();
    let mut out = Vec::with_capacity(g.order() as usize);
    let mut e = vec![0u64; orders.len()];
    loop {
        out.push(DirichletCharacter::with_roots(
            Arc::clone(g),
            &e,
            Arc::clone(&roots),
        ));
        // Odometer increment, last coordinate fastest.
        let mut i = orders.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            e[i] += 1;
            if e[i] < orders[i] {
                break;
            }
            e[i] = 0;
        }
    }
}

pub fn evaluate(chi: &DirichletCharacter, m: i64) -> Complex64 {
    chi.evaluate(m)
}

/// Characters trivial on every element of `g`: the `index(g)` characters
/// that factor through the quotient by `g`.
pub fn quotient_characters(g: &Subgroup) -> Vec<DirichletCharacter> {
    let gens: &[u64] = if g.generators().is_empty() && g.order() > 1 {
        g.elements()
    } else {
        g.generators()
    };
    all_characters(g.group())
        .into_iter()
        .filter(|chi| gens.iter().all(|&x| chi.is_trivial_on(x)))
        .collect()
}

pub fn char_sum(chi: &DirichletCharacter, h: u64) -> Complex64 {
    chi.char_sum(h)
}

/// `2 sqrt(n) log n`, natural logarithm.
pub fn pv_bound(n: u64) -> f64 {
    let n = n as f64;
    2.0 * n.sqrt() * n.ln()
}

/// Worst case of one modulus in the Polya-Vinogradov sweep.
#[derive(Debug, Clone)]
pub struct PvRecord {
    pub modulus: u64,
    pub exponents: Vec<u64>,
    pub h: u64,
    pub sum: Complex64,
    pub bound: f64,
}

impl PvRecord {
    pub fn slack(&self) -> f64 {
        self.bound - self.sum.norm()
    }
}

/// For each non-principal character mod `n`, the `h <= n` with the largest
/// partial sum. Partial sums are `n`-periodic past `h = n`.
pub fn pv_records(n: u64) -> crate::Result<Vec<PvRecord>> {
    let g = crate::residue_group::unit_group(n)?;
    let bound = pv_bound(n);
    Ok(all_characters(&g)
        .into_iter()
        .filter(|c| !c.is_principal())
        .map(|c| {
            let (h, sum) = c.max_partial_sum();
            PvRecord {
                modulus: n,
                exponents: c.exponents().to_vec(),
                h,
                sum,
                bound,
            }
        })
        .collect())
}
