//! Prime fields of the tower: ℚ_p and 𝔽_p((t)) at finite absolute precision.
//!
//! An element is `π^v · m + O(π^prec)` with `m` a unit mantissa known modulo
//! `π^(prec - v)`. Zero is stored with `v == prec` and an empty mantissa.

use crate::error::{Error, Result};

/// Precision used for values that are exact (exact zero, embedded constants).
pub const INF_PREC: i64 = 1 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaseKind {
    Qp,
    Fpt,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Mant {
    Int(u64),
    Ser(Vec<u32>),
}

/// An element of ℚ_p or 𝔽_p((t)).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Base {
    v: i64,
    prec: i64,
    m: Mant,
}

/// Arithmetic context for [`Base`] values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseRing {
    pub kind: BaseKind,
    pub p: u64,
    /// Largest relative precision a mantissa may carry.
    pub rcap: i64,
    pows: Vec<u64>,
}

fn ord_u64(mut n: u64, p: u64) -> (i64, u64) {
    let mut k = 0;
    while n != 0 && n.is_multiple_of(p) {
        n /= p;
        k += 1;
    }
    (k, n)
}

fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (mut r0, mut r1) = (m as i128, a as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return None;
    }
    Some(s0.rem_euclid(m as i128) as u64)
}

impl BaseRing {
    pub fn new(kind: BaseKind, p: u64) -> Self {
        let mut pows = vec![1u64];
        let rcap = match kind {
            BaseKind::Qp => {
                while let Some(n) = pows.last().unwrap().checked_mul(p) {
                    if n >= 1u64 << 63 {
                        break;
                    }
                    pows.push(n);
                }
                (pows.len() - 1) as i64
            }
            BaseKind::Fpt => 64,
        };
        BaseRing { kind, p, rcap, pows }
    }

    fn pw(&self, k: i64) -> u64 {
        self.pows[k as usize]
    }

    fn clamp(prec: i64) -> i64 {
        prec.min(INF_PREC)
    }

    pub fn zero(&self, prec: i64) -> Base {
        let prec = Self::clamp(prec);
        Base {
            v: prec,
            prec,
            m: self.mant_zero(),
        }
    }

    fn mant_zero(&self) -> Mant {
        match self.kind {
            BaseKind::Qp => Mant::Int(0),
            BaseKind::Fpt => Mant::Ser(Vec::new()),
        }
    }

    pub fn exact_zero(&self) -> Base {
        self.zero(INF_PREC)
    }

    /// `π^v · unit` where the unit is given by an integer prime to p
    /// (Qp) or a constant (Fpt), capped to the relative precision limit.
    fn mk_int(&self, v: i64, unit: u64, prec: i64) -> Base {
        let prec = Self::clamp(prec);
        if v >= prec {
            return self.zero(prec);
        }
        let r = (prec - v).min(self.rcap);
        match self.kind {
            BaseKind::Qp => Base {
                v,
                prec: v + r,
                m: Mant::Int(unit % self.pw(r)),
            },
            BaseKind::Fpt => {
                let mut s = vec![0u32; r as usize];
                s[0] = (unit % self.p) as u32;
                Base {
                    v,
                    prec: v + r,
                    m: Mant::Ser(s),
                }
            }
        }
    }

    /// The integer `n`, known to absolute precision `prec`.
    pub fn from_i64(&self, n: i64, prec: i64) -> Base {
        if n == 0 {
            return self.zero(prec);
        }
        match self.kind {
            BaseKind::Qp => {
                let (v, u) = ord_u64(n.unsigned_abs(), self.p);
                let x = self.mk_int(v, u, prec);
                if n < 0 {
                    self.neg(&x)
                } else {
                    x
                }
            }
            BaseKind::Fpt => {
                let r = n.rem_euclid(self.p as i64) as u64;
                if r == 0 {
                    self.zero(prec)
                } else {
                    self.mk_int(0, r, prec)
                }
            }
        }
    }

    /// The uniformizer power `p^k` resp. `t^k`.
    pub fn uniformizer_pow(&self, k: i64, prec: i64) -> Base {
        self.mk_int(k, 1, prec)
    }

    /// `n / d` for integers, `d` nonzero in the field.
    pub fn from_ratio(&self, n: i64, d: i64, prec: i64) -> Result<Base> {
        let nn = self.from_i64(n, INF_PREC);
        let dd = self.from_i64(d, INF_PREC);
        Ok(self.with_prec(&self.div(&nn, &dd)?, prec))
    }

    pub fn is_zero(&self, x: &Base) -> bool {
        x.v >= x.prec
    }

    /// Valuation, or `None` when the element is zero at its precision.
    pub fn val(&self, x: &Base) -> Option<i64> {
        if self.is_zero(x) {
            None
        } else {
            Some(x.v)
        }
    }

    pub fn prec(&self, x: &Base) -> i64 {
        x.prec
    }

    /// Valuation with zero reported as its precision.
    pub fn val_or_prec(&self, x: &Base) -> i64 {
        x.v
    }

    pub fn with_prec(&self, x: &Base, prec: i64) -> Base {
        if prec >= x.prec {
            return x.clone();
        }
        if x.v >= prec {
            return self.zero(prec);
        }
        let r = prec - x.v;
        let m = match &x.m {
            Mant::Int(m) => Mant::Int(m % self.pw(r)),
            Mant::Ser(s) => Mant::Ser(s[..r as usize].to_vec()),
        };
        Base { v: x.v, prec, m }
    }

    pub fn neg(&self, x: &Base) -> Base {
        if self.is_zero(x) {
            return x.clone();
        }
        let r = x.prec - x.v;
        let m = match &x.m {
            Mant::Int(m) => Mant::Int(self.pw(r) - m),
            Mant::Ser(s) => Mant::Ser(
                s.iter()
                    .map(|&c| ((self.p - c as u64) % self.p) as u32)
                    .collect(),
            ),
        };
        Base { v: x.v, prec: x.prec, m }
    }

    pub fn add(&self, x: &Base, y: &Base) -> Base {
        let prec = x.prec.min(y.prec);
        let v = x.v.min(y.v);
        if v >= prec {
            return self.zero(prec);
        }
        let r = prec - v;
        match self.kind {
            BaseKind::Qp => {
                let md = self.pw(r) as u128;
                let term = |z: &Base| -> u128 {
                    match z.m {
                        Mant::Int(m) if z.v < z.prec && z.v - v < r => {
                            (m as u128 * self.pw(z.v - v) as u128) % md
                        }
                        _ => 0,
                    }
                };
                let s = ((term(x) + term(y)) % md) as u64;
                if s == 0 {
                    return self.zero(prec);
                }
                let (k, u) = ord_u64(s, self.p);
                Base {
                    v: v + k,
                    prec,
                    m: Mant::Int(u),
                }
            }
            BaseKind::Fpt => {
                let mut s = vec![0u64; r as usize];
                for z in [x, y] {
                    if let Mant::Ser(c) = &z.m {
                        if z.v < z.prec {
                            let sh = (z.v - v) as usize;
                            for (i, &ci) in c.iter().enumerate() {
                                if sh + i < s.len() {
                                    s[sh + i] += ci as u64;
                                }
                            }
                        }
                    }
                }
                let p = self.p;
                let k = match s.iter().position(|&c| c % p != 0) {
                    Some(k) => k,
                    None => return self.zero(prec),
                };
                Base {
                    v: v + k as i64,
                    prec,
                    m: Mant::Ser(s[k..].iter().map(|&c| (c % p) as u32).collect()),
                }
            }
        }
    }

    pub fn sub(&self, x: &Base, y: &Base) -> Base {
        self.add(x, &self.neg(y))
    }

    pub fn mul(&self, x: &Base, y: &Base) -> Base {
        if self.is_zero(x) || self.is_zero(y) {
            let prec = (x.prec + y.v).min(y.prec + x.v);
            return self.zero(prec);
        }
        let v = x.v + y.v;
        let r = (x.prec - x.v).min(y.prec - y.v);
        let m = match (&x.m, &y.m) {
            (Mant::Int(a), Mant::Int(b)) => {
                let md = self.pw(r) as u128;
                Mant::Int(((*a as u128 % md) * (*b as u128 % md) % md) as u64)
            }
            (Mant::Ser(a), Mant::Ser(b)) => {
                let r = r as usize;
                let mut s = vec![0u64; r];
                for i in 0..r.min(a.len()) {
                    if a[i] == 0 {
                        continue;
                    }
                    for j in 0..(r - i).min(b.len()) {
                        s[i + j] += a[i] as u64 * b[j] as u64;
                    }
                    if i % 64 == 63 {
                        for c in s.iter_mut() {
                            *c %= self.p;
                        }
                    }
                }
                Mant::Ser(s.into_iter().map(|c| (c % self.p) as u32).collect())
            }
            _ => unreachable!("mixed mantissa kinds"),
        };
        Base {
            v,
            prec: Self::clamp(v + r),
            m,
        }
    }

    pub fn inv(&self, x: &Base) -> Result<Base> {
        if self.is_zero(x) {
            return Err(Error::precision("precision-zero divisor"));
        }
        let r = x.prec - x.v;
        let m = match &x.m {
            Mant::Int(a) => Mant::Int(inv_mod(*a, self.pw(r)).expect("unit mantissa")),
            Mant::Ser(a) => {
                let p = self.p;
                let b0 = inv_mod(a[0] as u64, p).expect("unit mantissa");
                let mut b = vec![0u64; r as usize];
                b[0] = b0;
                for k in 1..r as usize {
                    let mut s = 0u64;
                    for i in 1..=k.min(a.len() - 1) {
                        s = (s + a[i] as u64 * b[k - i]) % p;
                    }
                    b[k] = (p - s) % p * b0 % p;
                }
                Mant::Ser(b.into_iter().map(|c| c as u32).collect())
            }
        };
        Ok(Base {
            v: -x.v,
            prec: Self::clamp(r - x.v),
            m,
        })
    }

    pub fn div(&self, x: &Base, y: &Base) -> Result<Base> {
        Ok(self.mul(x, &self.inv(y)?))
    }

    pub fn pow(&self, x: &Base, mut k: u64) -> Base {
        let mut acc = self.from_i64(1, INF_PREC);
        let mut b = x.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(&acc, &b);
            }
            k >>= 1;
            if k > 0 {
                b = self.mul(&b, &b);
            }
        }
        acc
    }

    /// Residue class in 𝔽_p of an integral element.
    pub fn residue(&self, x: &Base) -> Result<u64> {
        if x.v < 0 && !self.is_zero(x) {
            return Err(Error::domain("not integral"));
        }
        if x.v > 0 || self.is_zero(x) {
            if x.prec <= 0 {
                return Err(Error::precision("residue unknown at this precision"));
            }
            return Ok(0);
        }
        Ok(match &x.m {
            Mant::Int(m) => m % self.p,
            Mant::Ser(s) => s[0] as u64,
        })
    }

    /// Nonzero digits `(exponent, digit)` in ascending order, digits in [0, p).
    pub fn digits(&self, x: &Base) -> Vec<(i64, u64)> {
        if self.is_zero(x) {
            return Vec::new();
        }
        match &x.m {
            Mant::Int(m) => {
                let mut out = Vec::new();
                let mut n = *m;
                let mut k = x.v;
                while n > 0 {
                    let d = n % self.p;
                    if d != 0 {
                        out.push((k, d));
                    }
                    n /= self.p;
                    k += 1;
                }
                out
            }
            Mant::Ser(s) => s
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0)
                .map(|(i, &c)| (x.v + i as i64, c as u64))
                .collect(),
        }
    }

    /// Equality modulo the smaller of the two precisions.
    pub fn eq_prec(&self, x: &Base, y: &Base) -> bool {
        self.is_zero(&self.sub(x, y))
    }

    /// Reduction of an integral element modulo `π^n` as a small integer
    /// (Qp only; used by brute-force oracles).
    pub fn to_u64_mod(&self, x: &Base, n: i64) -> Option<u64> {
        if self.kind != BaseKind::Qp || n > self.rcap || x.prec < n {
            return None;
        }
        if self.is_zero(x) || x.v >= n {
            return Some(0);
        }
        if x.v < 0 {
            return None;
        }
        match x.m {
            Mant::Int(m) => {
                let md = self.pw(n) as u128;
                Some(((m as u128 * self.pw(x.v) as u128) % md) as u64)
            }
            _ => None,
        }
    }

    /// Coefficient list of an integral Fpt element modulo `t^n`.
    pub fn to_coeffs_mod(&self, x: &Base, n: i64) -> Option<Vec<u32>> {
        if self.kind != BaseKind::Fpt || x.prec < n {
            return None;
        }
        let mut out = vec![0u32; n.max(0) as usize];
        for (k, d) in self.digits(x) {
            if k < 0 {
                return None;
            }
            if k < n {
                out[k as usize] = d as u32;
            }
        }
        Some(out)
    }

    /// Element from coefficient digits `Σ d_k π^k` for k in 0..digits.len().
    pub fn from_digits(&self, digits: &[u64], prec: i64) -> Base {
        let mut acc = self.zero(prec);
        for (k, &d) in digits.iter().enumerate() {
            if d % self.p != 0 {
                let t = self.mk_int(k as i64, d % self.p, prec);
                acc = self.add(&acc, &t);
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: u64) -> BaseRing {
        BaseRing::new(BaseKind::Qp, p)
    }

    #[test]
    fn qp_digit_multiplication() {
        let r = q(3);
        let x = r.from_i64(3, 6);
        let y = r.from_i64(4, 6);
        let z = r.mul(&x, &y);
        assert!(r.eq_prec(&z, &r.from_i64(12, 7)));
        assert_eq!(r.digits(&z), vec![(1, 1), (2, 1)]);
    }

    #[test]
    fn qp_geometric_quotient() {
        let r = q(7);
        let z = r.div(&r.from_i64(8, 4), &r.from_i64(-6, 4)).unwrap();
        assert_eq!(r.digits(&z), vec![(0, 1), (1, 2), (2, 2), (3, 2)]);
        assert_eq!(r.prec(&z), 4);
    }

    #[test]
    fn fpt_inverse_cancels() {
        let r = BaseRing::new(BaseKind::Fpt, 5);
        let t = r.uniformizer_pow(1, 20);
        let one = r.mul(&r.inv(&t).unwrap(), &t);
        assert!(r.eq_prec(&one, &r.from_i64(1, 10)));
        let s = r.sub(&r.from_i64(1, 8), &t);
        let g = r.inv(&s).unwrap();
        assert_eq!(r.digits(&g), (0..8).map(|k| (k, 1)).collect::<Vec<_>>());
    }

    #[test]
    fn precision_rules() {
        let r = q(3);
        let x = r.from_i64(9, 10);
        let y = r.from_i64(1, 5);
        assert_eq!(r.prec(&r.add(&x, &y)), 5);
        assert_eq!(r.prec(&r.mul(&x, &y)), 7);
        assert_eq!(r.prec(&r.inv(&x).unwrap()), 6);
        assert!(r.inv(&r.zero(5)).is_err());
        assert!(r.residue(&r.inv(&x).unwrap()).is_err());
    }
}
