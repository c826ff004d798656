//! Hahn series with rational exponents and finite support.
//!
//! An element is stored as `Σ_c π^c · X_c` over fractional classes
//! `c ∈ [0, 1)`, each `X_c` an element of ℚ_p (mixed characteristic,
//! π = p) or 𝔽_p((t)) (equal characteristic, π = t). Products of classes
//! that wrap past 1 carry a factor π into the prime field, so carries in
//! mixed characteristic resolve there. Support lists are produced in
//! multiplicative representatives.

use super::base::{Base, BaseKind, BaseRing, INF_PREC};
use crate::error::{Error, Result};
use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, PartialEq)]
pub struct HahnField {
    pub ring: BaseRing,
    /// Exponents above this bound are dropped.
    pub trunc: Rational64,
    /// Maximal number of support points.
    pub cap: usize,
}

pub type HahnRef = Arc<HahnField>;

#[derive(Clone, Debug)]
pub struct Hahn {
    field: HahnRef,
    terms: BTreeMap<Rational64, Base>,
}

fn frac_part(r: Rational64) -> (Rational64, i64) {
    let k = r.floor().to_integer();
    (r - Rational64::from_integer(k), k)
}

/// Teichmüller representative of `r ∈ 𝔽_p` in ℚ_p to absolute precision `prec`.
pub fn teich_prime(ring: &BaseRing, r: u64, prec: i64) -> Base {
    let mut x = ring.from_i64(r as i64, prec);
    if ring.kind == BaseKind::Fpt || r == 0 {
        return x;
    }
    for _ in 0..(4 * prec + 8) {
        let y = ring.pow(&x, ring.p);
        if ring.eq_prec(&x, &y) {
            break;
        }
        x = y;
    }
    x
}

impl HahnField {
    pub fn new(kind: BaseKind, p: u64, trunc: Rational64, cap: usize) -> Result<HahnRef> {
        let ring = BaseRing::new(kind, p);
        if kind == BaseKind::Qp && trunc.abs() + Rational64::from_integer(2) > Rational64::from_integer(ring.rcap) {
            return Err(Error::precision("truncation exceeds the mantissa capacity"));
        }
        Ok(Arc::new(HahnField { ring, trunc, cap }))
    }

    pub fn mixed(&self) -> bool {
        self.ring.kind == BaseKind::Qp
    }

    fn class_prec(&self, c: Rational64) -> i64 {
        (self.trunc - c).floor().to_integer() + 1
    }

    pub fn symbol(&self) -> String {
        if self.mixed() {
            self.ring.p.to_string()
        } else {
            "t".to_string()
        }
    }
}

impl Hahn {
    pub fn zero(field: &HahnRef) -> Hahn {
        Hahn {
            field: field.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn field(&self) -> &HahnRef {
        &self.field
    }

    /// `a · π^g` for an integer coefficient `a`.
    pub fn monomial(field: &HahnRef, a: i64, g: Rational64) -> Result<Hahn> {
        let (c, k) = frac_part(g);
        let r = &field.ring;
        let x = r.mul(&r.from_i64(a, INF_PREC), &r.uniformizer_pow(k, INF_PREC));
        let mut terms = BTreeMap::new();
        terms.insert(c, x);
        Hahn::normalize(field, terms)
    }

    pub fn from_int(field: &HahnRef, a: i64) -> Result<Hahn> {
        Hahn::monomial(field, a, Rational64::zero())
    }

    fn normalize(field: &HahnRef, terms: BTreeMap<Rational64, Base>) -> Result<Hahn> {
        let r = &field.ring;
        let mut out = BTreeMap::new();
        for (c, x) in terms {
            let x = r.with_prec(&x, field.class_prec(c));
            if !r.is_zero(&x) {
                out.insert(c, x);
            }
        }
        let h = Hahn {
            field: field.clone(),
            terms: out,
        };
        if h.support().len() > field.cap {
            return Err(Error::precision("support cap exceeded"));
        }
        Ok(h)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Minimal exponent of the support, `None` for zero.
    pub fn val(&self) -> Option<Rational64> {
        self.terms
            .iter()
            .filter_map(|(c, x)| self.field.ring.val(x).map(|v| *c + Rational64::from_integer(v)))
            .min()
    }

    pub fn add(&self, o: &Hahn) -> Result<Hahn> {
        let r = &self.field.ring;
        let mut t = self.terms.clone();
        for (c, x) in &o.terms {
            let cur = t.remove(c).unwrap_or_else(|| r.exact_zero());
            t.insert(*c, r.add(&cur, x));
        }
        Hahn::normalize(&self.field, t)
    }

    pub fn neg(&self) -> Hahn {
        let r = &self.field.ring;
        Hahn {
            field: self.field.clone(),
            terms: self.terms.iter().map(|(c, x)| (*c, r.neg(x))).collect(),
        }
    }

    pub fn sub(&self, o: &Hahn) -> Result<Hahn> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Hahn) -> Result<Hahn> {
        let r = &self.field.ring;
        let mut t: BTreeMap<Rational64, Base> = BTreeMap::new();
        for (c1, x1) in &self.terms {
            for (c2, x2) in &o.terms {
                let (c, k) = frac_part(*c1 + *c2);
                let mut y = r.mul(x1, x2);
                if k > 0 {
                    y = r.mul(&y, &r.uniformizer_pow(k, INF_PREC));
                }
                let y = r.with_prec(&y, self.field.class_prec(c));
                let cur = t.remove(&c).unwrap_or_else(|| r.exact_zero());
                t.insert(c, r.add(&cur, &y));
            }
        }
        Hahn::normalize(&self.field, t)
    }

    /// Inverse via the leading monomial and a geometric series.
    pub fn inv(&self) -> Result<Hahn> {
        let r = &self.field.ring;
        let g = self.val().ok_or_else(|| Error::precision("precision-zero divisor"))?;
        let (c, k) = frac_part(g);
        let lead = r.with_prec(&self.terms[&c], k + 1);
        let a = r.residue(&r.mul(&lead, &r.uniformizer_pow(-k, INF_PREC)))?;
        let ta = teich_prime(r, a, INF_PREC.min(r.rcap));
        // m = [a] π^g, m^{-1} = [a]^{-1} π^{-g}
        let (ci, ki) = frac_part(-g);
        let minv_x = r.mul(&r.inv(&ta)?, &r.uniformizer_pow(ki, INF_PREC));
        let mut mt = BTreeMap::new();
        mt.insert(ci, minv_x);
        let minv = Hahn {
            field: self.field.clone(),
            terms: mt,
        };
        // Work at extended truncation so the shift by -g loses nothing.
        let wide = Arc::new(HahnField {
            ring: self.field.ring.clone(),
            trunc: self.field.trunc + g.abs(),
            cap: usize::MAX,
        });
        let rebase = |h: &Hahn| Hahn {
            field: wide.clone(),
            terms: h.terms.clone(),
        };
        let one = Hahn::from_int(&wide, 1)?;
        let u = rebase(&self.mul_wide(&minv, &wide)?).sub(&one)?;
        let mut acc = one.clone();
        let mut pw = one;
        for _ in 0..(4 * self.field.cap + 64) {
            pw = pw.mul(&u.neg())?;
            if pw.is_zero() {
                break;
            }
            acc = acc.add(&pw)?;
        }
        let res = acc.mul_wide(&rebase(&minv), &self.field)?;
        Hahn::normalize(&self.field, res.terms)
    }

    fn mul_wide(&self, o: &Hahn, target: &HahnRef) -> Result<Hahn> {
        let a = Hahn {
            field: target.clone(),
            terms: self.terms.clone(),
        };
        let b = Hahn {
            field: target.clone(),
            terms: o.terms.clone(),
        };
        let r = &target.ring;
        let mut t: BTreeMap<Rational64, Base> = BTreeMap::new();
        for (c1, x1) in &a.terms {
            for (c2, x2) in &b.terms {
                let (c, k) = frac_part(*c1 + *c2);
                let y = r.mul(&r.mul(x1, x2), &r.uniformizer_pow(k, INF_PREC));
                let cur = t.remove(&c).unwrap_or_else(|| r.exact_zero());
                t.insert(c, r.add(&cur, &y));
            }
        }
        let wide = Arc::new(HahnField {
            ring: target.ring.clone(),
            trunc: target.trunc,
            cap: usize::MAX,
        });
        let h = Hahn::normalize(&wide, t)?;
        Ok(Hahn {
            field: target.clone(),
            terms: h.terms,
        })
    }

    pub fn div(&self, o: &Hahn) -> Result<Hahn> {
        self.mul(&o.inv()?)
    }

    /// Sorted support `(exponent, residue coefficient)` with coefficients
    /// read as multiplicative representatives.
    pub fn support(&self) -> Vec<(Rational64, u64)> {
        let r = &self.field.ring;
        let mut out = Vec::new();
        for (c, x) in &self.terms {
            let mut x = x.clone();
            let mut guard = 0;
            while let Some(v) = r.val(&x) {
                guard += 1;
                if guard > 4096 {
                    break;
                }
                let unit = r.mul(&x, &r.uniformizer_pow(-v, INF_PREC));
                let d = match r.residue(&unit) {
                    Ok(d) => d,
                    Err(_) => break,
                };
                out.push((*c + Rational64::from_integer(v), d));
                let rep = teich_prime(r, d, r.prec(&x).min(r.rcap + v.min(0)).max(v + 1));
                let t = r.mul(&rep, &r.uniformizer_pow(v, INF_PREC));
                x = r.sub(&x, &t);
            }
        }
        out.sort();
        out
    }

    pub fn eq_support(&self, o: &Hahn) -> bool {
        self.support() == o.support()
    }
}

impl PartialEq for Hahn {
    fn eq(&self, o: &Hahn) -> bool {
        self.eq_support(o)
    }
}

fn fmt_exp(sym: &str, g: Rational64) -> String {
    if g.is_zero() {
        String::new()
    } else if g.is_one() {
        sym.to_string()
    } else if g.is_integer() {
        format!("{sym}^{}", g.to_integer())
    } else {
        format!("{sym}^({g})")
    }
}

impl fmt::Display for Hahn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sym = self.field.symbol();
        let parts: Vec<String> = self
            .support()
            .into_iter()
            .map(|(g, d)| {
                let m = fmt_exp(&sym, g);
                match (m.is_empty(), d) {
                    (true, _) => d.to_string(),
                    (false, 1) => m,
                    _ => format!("{d}*{m}"),
                }
            })
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f3(trunc: i64) -> HahnRef {
        HahnField::new(BaseKind::Fpt, 3, Rational64::from_integer(trunc), 64).unwrap()
    }

    #[test]
    fn half_powers_multiply() {
        let k = f3(6);
        let h = Hahn::monomial(&k, 1, Rational64::new(1, 2)).unwrap();
        assert_eq!(h.mul(&h).unwrap().to_string(), "t");
    }

    #[test]
    fn cancellation_leaves_third_power() {
        let k = f3(6);
        let a = Hahn::from_int(&k, 1).unwrap().add(&Hahn::monomial(&k, 1, Rational64::new(1, 3)).unwrap()).unwrap();
        let b = a.add(&Hahn::from_int(&k, -1).unwrap()).unwrap();
        assert_eq!(b.to_string(), "t^(1/3)");
    }

    #[test]
    fn geometric_inverse() {
        let k = f3(3);
        let a = Hahn::from_int(&k, 1).unwrap().sub(&Hahn::monomial(&k, 1, Rational64::one()).unwrap()).unwrap();
        assert_eq!(a.inv().unwrap().to_string(), "1 + t + t^2 + t^3");
    }

    #[test]
    fn mixed_carries_and_inverse() {
        let k = HahnField::new(BaseKind::Qp, 3, Rational64::from_integer(4), 64).unwrap();
        let s = Hahn::monomial(&k, 1, Rational64::new(1, 2)).unwrap();
        let two = Hahn::from_int(&k, 2).unwrap();
        let x = two.add(&s).unwrap();
        let y = x.inv().unwrap().mul(&x).unwrap();
        assert_eq!(y.to_string(), "1");
        // 2 + 2 = 4 = 1 + 3 carries into the next exponent.
        assert_eq!(two.add(&two).unwrap().support(), vec![(Rational64::zero(), 1), (Rational64::one(), 1)]);
    }

    #[test]
    fn cap_is_enforced() {
        let k = HahnField::new(BaseKind::Fpt, 3, Rational64::from_integer(6), 2).unwrap();
        let mut acc = Hahn::zero(&k);
        let mut err = None;
        for i in 0..4 {
            match acc.add(&Hahn::monomial(&k, 1, Rational64::new(i, 4)).unwrap()) {
                Ok(h) => acc = h,
                Err(e) => err = Some(e),
            }
        }
        assert!(matches!(err, Some(Error::Precision(_))));
    }
}
