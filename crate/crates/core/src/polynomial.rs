//! Sparse multivariate polynomials over a graded monomial ordering.
//!
//! Monomials of total degree `<= d` are ordered by degree first and then
//! lexicographically descending within a degree, so for two variables the
//! basis reads `1, v1, v2, v1^2, v1 v2, v2^2, ...`. Index 0 is the constant
//! and indices `1..=n_v` are the variables themselves.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients with smaller magnitude are dropped.
pub const PRUNE_TOL: f64 = 1e-14;

/// Default cap on the number of basis monomials.
pub const DEFAULT_BASIS_CAP: u128 = 100_000_000;

/// Exponent vector of a monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(n_v: usize) -> Self {
        Self(vec![0; n_v])
    }

    pub fn var(n_v: usize, index: usize) -> Self {
        let mut e = vec![0; n_v];
        e[index] = 1;
        Self(e)
    }

    /// `v_index^power`.
    pub fn var_pow(n_v: usize, index: usize, power: u32) -> Self {
        let mut e = vec![0; n_v];
        e[index] = power;
        Self(e)
    }

    pub fn n_v(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(v)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }
}

/// `binom(max_degree + n_v, n_v)`, or `None` on overflow.
pub fn count_monomials(n_v: usize, max_degree: u32) -> Option<u128> {
    binomial(max_degree as u128 + n_v as u128, n_v as u128)
}

pub(crate) fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// An enumerated graded basis with a reverse index.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialOrdering {
    n_v: usize,
    max_degree: u32,
    monomials: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

/// Basis of all monomials of degree `<= max_degree` in `n_v` variables.
pub fn monomial_basis(n_v: usize, max_degree: u32) -> Result<MonomialOrdering> {
    monomial_basis_capped(n_v, max_degree, DEFAULT_BASIS_CAP)
}

pub fn monomial_basis_capped(n_v: usize, max_degree: u32, cap: u128) -> Result<MonomialOrdering> {
    if n_v == 0 {
        return Err(Error::InvalidArgument("need at least one variable".into()));
    }
    let needed = count_monomials(n_v, max_degree).unwrap_or(u128::MAX);
    if needed > cap {
        return Err(Error::CapExceeded {
            what: "monomial basis",
            needed,
            cap,
        });
    }
    let mut monomials = Vec::with_capacity(needed as usize);
    let mut scratch = vec![0u32; n_v];
    for d in 0..=max_degree {
        push_degree(&mut monomials, &mut scratch, 0, d);
    }
    let index = monomials
        .iter()
        .enumerate()
        .map(|(i, m)| (m.clone(), i))
        .collect();
    Ok(MonomialOrdering {
        n_v,
        max_degree,
        monomials,
        index,
    })
}

// Exponents of degree `remaining` over variables `pos..`, lexicographically descending.
fn push_degree(out: &mut Vec<Monomial>, scratch: &mut [u32], pos: usize, remaining: u32) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(Monomial(scratch.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        scratch[pos] = e;
        push_degree(out, scratch, pos + 1, remaining - e);
    }
    scratch[pos] = 0;
}

impl MonomialOrdering {
    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomial(&self, index: usize) -> &Monomial {
        &self.monomials[index]
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Number of basis monomials of degree `<= degree`.
    pub fn count_up_to(&self, degree: u32) -> usize {
        count_monomials(self.n_v, degree.min(self.max_degree)).unwrap_or(0) as usize
    }
}

/// A sparse polynomial: distinct monomials with nonzero coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n_v: usize,
    terms: Vec<(f64, Monomial)>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    coeff: f64,
    exponents: Vec<u32>,
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<TermJson> = self
            .terms
            .iter()
            .map(|(c, m)| TermJson {
                coeff: *c,
                exponents: m.0.clone(),
            })
            .collect();
        terms.serialize(s)
    }
}

impl Polynomial {
    pub fn zero(n_v: usize) -> Self {
        Self { n_v, terms: Vec::new() }
    }

    /// Merges repeated monomials and drops near-zero coefficients. Term order
    /// follows first appearance.
    pub fn from_terms(n_v: usize, terms: impl IntoIterator<Item = (f64, Monomial)>) -> Result<Self> {
        let mut slot: HashMap<Monomial, usize> = HashMap::new();
        let mut merged: Vec<(f64, Monomial)> = Vec::new();
        for (c, m) in terms {
            if m.n_v() != n_v {
                return Err(Error::Shape(format!(
                    "monomial has {} exponents, expected {n_v}",
                    m.n_v()
                )));
            }
            match slot.get(&m) {
                Some(&i) => merged[i].0 += c,
                None => {
                    slot.insert(m.clone(), merged.len());
                    merged.push((c, m));
                }
            }
        }
        merged.retain(|(c, _)| c.abs() >= PRUNE_TOL);
        Ok(Self { n_v, terms: merged })
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn terms(&self) -> &[(f64, Monomial)] {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, m)| m.degree()).max().unwrap_or(0)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// `sum_m c_m * v^m`.
pub fn eval_poly(p: &Polynomial, v: &[f64]) -> Result<f64> {
    if v.len() != p.n_v {
        return Err(Error::Shape(format!(
            "point has {} coordinates, polynomial has {} variables",
            v.len(),
            p.n_v
        )));
    }
    Ok(p.terms.iter().map(|(c, m)| c * m.eval(v)).sum())
}

/// Multiplies every term by the monomial `m`.
pub fn shift_poly(p: &Polynomial, m: &Monomial) -> Polynomial {
    Polynomial {
        n_v: p.n_v,
        terms: p.terms.iter().map(|(c, t)| (*c, t.mul(m))).collect(),
    }
}

/// `psi(v)`: every basis monomial evaluated at `v`.
pub fn vandermonde_vector(v: &[f64], ordering: &MonomialOrdering) -> Result<Vec<f64>> {
    if v.len() != ordering.n_v {
        return Err(Error::Shape(format!(
            "point has {} coordinates, ordering has {} variables",
            v.len(),
            ordering.n_v
        )));
    }
    Ok(ordering.monomials.iter().map(|m| m.eval(v)).collect())
}
