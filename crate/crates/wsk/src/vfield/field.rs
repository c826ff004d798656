//! Field descriptors and elements: ℚ_p, 𝔽_p((t)) and their finite extensions
//! `K0[z]/(g)[y]/(E)` with g unramified and E Eisenstein over the prime field.

use super::base::{Base, BaseKind, BaseRing, INF_PREC};
use super::gamma::Gamma;
use super::resfield::{first_irreducible, is_irreducible, Fq, Res};
use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_PREC: i64 = 12;
pub const DEFAULT_DEGREE_CAP: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Qp,
    Fpt,
    Ext,
}

/// Descriptor of an effective valued field.
#[derive(Debug)]
pub struct Field {
    pub kind: FieldKind,
    pub base: BaseRing,
    /// Unramified degree and monic modulus over the prime field (exact).
    pub f: usize,
    pub unram: Vec<Base>,
    /// Ramification index and monic Eisenstein polynomial (exact).
    pub e: usize,
    pub eis: Vec<Base>,
    /// Default working precision, in units where ord(p) = 1 (resp. ord(t) = 1).
    pub prec: i64,
    pub res: Fq,
    pub name: String,
    pi_inv: Option<Vec<Base>>,
}

pub type FieldRef = Arc<Field>;

impl PartialEq for Field {
    fn eq(&self, o: &Field) -> bool {
        self.base == o.base && self.unram == o.unram && self.eis == o.eis
    }
}

/// An element of a [`Field`], stored as coordinates over the basis
/// `y^i z^j` (i < e, j < f), index `i * f + j`.
#[derive(Clone, Debug)]
pub struct Elem {
    field: FieldRef,
    c: Vec<Base>,
}

fn base_name(kind: BaseKind, p: u64) -> String {
    match kind {
        BaseKind::Qp => format!("Q{p}"),
        BaseKind::Fpt => format!("F{p}t"),
    }
}

fn fmt_poly_name(coeffs: &[Base], base: &BaseRing, var: &str) -> String {
    let mut parts = Vec::new();
    for (i, c) in coeffs.iter().enumerate().rev() {
        if base.is_zero(c) {
            continue;
        }
        let cs = fmt_base_compact(base, c);
        let mono = match i {
            0 => String::new(),
            1 => var.to_string(),
            _ => format!("{var}^{i}"),
        };
        parts.push(match (cs.as_str(), mono.is_empty()) {
            (_, true) => cs,
            ("1", false) => mono,
            ("-1", false) => format!("-{mono}"),
            _ => format!("{cs}*{mono}"),
        });
    }
    let s = parts.join("+");
    s.replace("+-", "-")
}

impl Field {
    pub fn qp(p: u64, prec: i64) -> Result<FieldRef> {
        Self::build(BaseKind::Qp, p, prec, None, None)
    }

    pub fn fpt(p: u64, prec: i64) -> Result<FieldRef> {
        Self::build(BaseKind::Fpt, p, prec, None, None)
    }

    /// General constructor. `unram` is a monic polynomial over 𝔽_p given by
    /// integer coefficients (low degree first); `eis` a monic Eisenstein
    /// polynomial with coefficients in the prime field.
    pub fn build(
        kind: BaseKind,
        p: u64,
        prec: i64,
        unram: Option<Vec<u64>>,
        eis: Option<Vec<Base>>,
    ) -> Result<FieldRef> {
        Self::build_capped(kind, p, prec, unram, eis, DEFAULT_DEGREE_CAP)
    }

    pub fn build_capped(
        kind: BaseKind,
        p: u64,
        prec: i64,
        unram: Option<Vec<u64>>,
        eis: Option<Vec<Base>>,
        degree_cap: usize,
    ) -> Result<FieldRef> {
        if p < 2 || !(2..p).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d)) {
            return Err(Error::domain(format!("{p} is not prime")));
        }
        if p > 1 << 20 {
            return Err(Error::domain("prime too large"));
        }
        if prec < 1 {
            return Err(Error::domain("precision must be positive"));
        }
        let base = BaseRing::new(kind, p);
        if kind == BaseKind::Qp && prec > base.rcap {
            return Err(Error::precision(format!(
                "precision {prec} exceeds the mantissa capacity {} for p={p}",
                base.rcap
            )));
        }
        let g = unram.unwrap_or_else(|| vec![0, 1]);
        let f = g.len() - 1;
        if f == 0 || g[f] % p != 1 || !is_irreducible(&g.iter().map(|c| c % p).collect::<Vec<_>>(), p) {
            return Err(Error::domain("unramified modulus must be monic and irreducible mod p"));
        }
        let eis = eis.unwrap_or_else(|| vec![base.exact_zero(), base.from_i64(1, INF_PREC)]);
        let e = eis.len() - 1;
        if e == 0 || !base.eq_prec(&eis[e], &base.from_i64(1, INF_PREC)) {
            return Err(Error::domain("Eisenstein polynomial must be monic"));
        }
        if e > 1 {
            if base.val(&eis[0]) != Some(1) {
                return Err(Error::domain("Eisenstein constant term must have valuation 1"));
            }
            for c in &eis[1..e] {
                if base.val_or_prec(c) < 1 {
                    return Err(Error::domain("Eisenstein coefficients must be divisible by p"));
                }
            }
        }
        if e * f > degree_cap {
            return Err(Error::domain(format!(
                "extension degree {} exceeds the cap {degree_cap}",
                e * f
            )));
        }
        let res = Fq::new(p, g.iter().map(|c| c % p).collect());
        let unram: Vec<Base> = g.iter().map(|&c| base.from_i64(c as i64, INF_PREC)).collect();
        let mut name = base_name(kind, p);
        let ext = e > 1 || f > 1;
        if f > 1 {
            name.push_str(&format!("[z:{}]", fmt_poly_name(&unram, &base, "z")));
        }
        if e > 1 {
            name.push_str(&format!("[y:{}]", fmt_poly_name(&eis, &base, "y")));
        }
        let mut field = Field {
            kind: if ext { FieldKind::Ext } else { match kind {
                BaseKind::Qp => FieldKind::Qp,
                BaseKind::Fpt => FieldKind::Fpt,
            } },
            base,
            f,
            unram,
            e,
            eis,
            prec,
            res,
            name,
            pi_inv: None,
        };
        if e > 1 {
            let b = &field.base;
            let e0_inv = b.inv(&field.eis[0])?;
            let mut c = vec![b.exact_zero(); e * f];
            // y^{-1} = -(y^{e-1} + E_{e-1} y^{e-2} + ... + E_1) / E_0
            for i in 0..e {
                let coef = b.neg(&b.mul(&field.eis[i + 1], &e0_inv));
                c[i * f] = coef;
            }
            field.pi_inv = Some(c);
        }
        Ok(Arc::new(field))
    }

    /// Unramified extension of degree f with the first irreducible modulus.
    pub fn unramified(kind: BaseKind, p: u64, f: usize, prec: i64) -> Result<FieldRef> {
        Self::build(kind, p, prec, Some(first_irreducible(f, p)), None)
    }

    /// Totally ramified quadratic extension `y^2 - π` of the prime field.
    pub fn ramified_sqrt(kind: BaseKind, p: u64, prec: i64) -> Result<FieldRef> {
        let b = BaseRing::new(kind, p);
        let eis = vec![b.neg(&b.uniformizer_pow(1, INF_PREC)), b.exact_zero(), b.from_i64(1, INF_PREC)];
        Self::build(kind, p, prec, None, Some(eis))
    }

    pub fn p(&self) -> u64 {
        self.base.p
    }

    pub fn degree(&self) -> usize {
        self.e * self.f
    }

    pub fn is_base(&self) -> bool {
        self.e == 1 && self.f == 1
    }

    /// Residue field size q.
    pub fn q(&self) -> u64 {
        self.res.size()
    }

    pub fn mixed_char(&self) -> bool {
        self.base.kind == BaseKind::Qp
    }

    /// Same field with a different default precision.
    pub fn with_prec(&self, prec: i64) -> Result<FieldRef> {
        let g = self.res.modulus.clone();
        Self::build(self.base.kind, self.p(), prec, Some(g), Some(self.eis.clone()))
    }

    /// The prime field of this tower, at the same default precision.
    pub fn prime_field(&self) -> FieldRef {
        Self::build(self.base.kind, self.p(), self.prec, None, None).expect("prime field")
    }

    /// Whether `self` contains the field `sub` via coordinate embedding.
    pub fn contains(&self, sub: &Field) -> bool {
        if self.base != sub.base {
            return false;
        }
        (sub.f == 1 || (sub.unram == self.unram)) && (sub.e == 1 || sub.eis == self.eis)
    }

    /// The smallest field of the tower shape containing both `a` and `b`.
    pub fn join(a: &FieldRef, b: &FieldRef) -> Result<FieldRef> {
        if a.contains(b) {
            return Ok(a.clone());
        }
        if b.contains(a) {
            return Ok(b.clone());
        }
        let clash = a.base != b.base
            || (a.f > 1 && b.f > 1 && a.unram != b.unram)
            || (a.e > 1 && b.e > 1 && a.eis != b.eis);
        if clash {
            return Err(Error::domain(format!("no common field for {} and {}", a.name, b.name)));
        }
        let (u, r) = (if a.f > 1 { a } else { b }, if a.e > 1 { a } else { b });
        let base = &a.base;
        let g = u
            .unram
            .iter()
            .map(|c| match base.kind {
                BaseKind::Qp => base.to_u64_mod(c, 1),
                BaseKind::Fpt => base.to_coeffs_mod(c, 1).map(|v| v[0] as u64),
            })
            .collect::<Option<Vec<u64>>>()
            .ok_or_else(|| Error::domain("unramified modulus is not over the prime field"))?;
        Self::build_capped(base.kind, a.p(), a.prec.max(b.prec), Some(g), Some(r.eis.clone()), DEFAULT_DEGREE_CAP)
    }

    /// Scaled working precision (units of 1/e).
    pub fn prec_scaled(&self) -> i64 {
        self.prec * self.e as i64
    }
}

fn fmt_base_compact(b: &BaseRing, x: &Base) -> String {
    if b.is_zero(x) {
        return "0".to_string();
    }
    if b.kind == BaseKind::Qp {
        let n = b.prec(x).min(b.rcap);
        if let Some(u) = b.to_u64_mod(x, n) {
            let md = (b.p as u128).pow(n as u32);
            let half = (b.p as u128).pow(((n + 1) / 2) as u32);
            let u = u as u128;
            if u < half {
                return u.to_string();
            }
            if md - u < half {
                return format!("-{}", md - u);
            }
        }
    }
    fmt_base_digits(b, x, false)
}

fn fmt_base_digits(b: &BaseRing, x: &Base, with_o: bool) -> String {
    let unif = match b.kind {
        BaseKind::Qp => b.p.to_string(),
        BaseKind::Fpt => "t".to_string(),
    };
    let mut parts = Vec::new();
    for (k, d) in b.digits(x) {
        let mono = match k {
            0 => String::new(),
            1 => unif.clone(),
            _ => format!("{unif}^{k}"),
        };
        parts.push(if mono.is_empty() {
            d.to_string()
        } else if d == 1 {
            mono
        } else {
            format!("{d}*{mono}")
        });
    }
    if with_o && b.prec(x) < INF_PREC / 2 {
        parts.push(format!("O({unif}^{})", b.prec(x)));
    }
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join(" + ")
    }
}

impl Elem {
    pub fn field(&self) -> &FieldRef {
        &self.field
    }

    pub fn coords(&self) -> &[Base] {
        &self.c
    }

    pub fn from_coords(field: &FieldRef, c: Vec<Base>) -> Elem {
        debug_assert_eq!(c.len(), field.degree());
        Elem {
            field: field.clone(),
            c,
        }
        .normalized()
    }

    fn normalized(mut self) -> Elem {
        if self.c.len() == 1 {
            return self;
        }
        let ps = self.prec_s();
        let e = self.field.e as i64;
        let f = self.field.f;
        let b = &self.field.base;
        for (idx, x) in self.c.iter_mut().enumerate() {
            let i = (idx / f) as i64;
            if ps < INF_PREC {
                let lim = (ps - i + e - 1).div_euclid(e);
                if b.prec(x) > lim {
                    *x = b.with_prec(x, lim);
                }
            }
        }
        self
    }

    pub fn zero(field: &FieldRef) -> Elem {
        Elem {
            field: field.clone(),
            c: vec![field.base.exact_zero(); field.degree()],
        }
    }

    /// Zero known to absolute precision `prec` (a rational in the value group).
    pub fn zero_prec(field: &FieldRef, prec: Gamma) -> Elem {
        let mut z = Elem::zero(field);
        if let Gamma::Fin(r) = prec {
            let ps = (r * field.e as i64).ceil().to_integer();
            z = z.with_prec_scaled(ps);
        }
        z
    }

    pub fn from_base(field: &FieldRef, b: Base) -> Elem {
        let mut c = vec![field.base.exact_zero(); field.degree()];
        c[0] = b;
        Elem {
            field: field.clone(),
            c,
        }
    }

    /// The integer `n`, exact as far as the mantissa allows.
    pub fn from_int(field: &FieldRef, n: i64) -> Elem {
        Elem::from_base(field, field.base.from_i64(n, INF_PREC))
    }

    pub fn one(field: &FieldRef) -> Elem {
        Elem::from_int(field, 1)
    }

    pub fn from_ratio(field: &FieldRef, n: i64, d: i64) -> Result<Elem> {
        Ok(Elem::from_base(field, field.base.from_ratio(n, d, INF_PREC)?))
    }

    /// The uniformizer of the prime field (p or t).
    pub fn prime_uniformizer(field: &FieldRef) -> Elem {
        Elem::from_base(field, field.base.uniformizer_pow(1, INF_PREC))
    }

    /// The generator y of the ramified part (a uniformizer of the field).
    pub fn uniformizer(field: &FieldRef) -> Elem {
        if field.e == 1 {
            return Elem::prime_uniformizer(field);
        }
        let mut c = vec![field.base.exact_zero(); field.degree()];
        c[field.f] = field.base.from_i64(1, INF_PREC);
        Elem {
            field: field.clone(),
            c,
        }
    }

    /// The generator z of the unramified part.
    pub fn unram_gen(field: &FieldRef) -> Elem {
        if field.f == 1 {
            let neg = field.base.neg(&field.unram[0]);
            return Elem::from_base(field, neg);
        }
        let mut c = vec![field.base.exact_zero(); field.degree()];
        c[1] = field.base.from_i64(1, INF_PREC);
        Elem {
            field: field.clone(),
            c,
        }
    }

    /// Element of valuation `g` in the value group: `y^(g*e)`.
    pub fn monomial(field: &FieldRef, g: Gamma) -> Result<Elem> {
        let k = g
            .scaled(field.e as i64)
            .ok_or_else(|| Error::domain(format!("valuation {g} is not in the value group of {}", field.name)))?;
        let y = Elem::uniformizer(field);
        if k >= 0 {
            Ok(y.pow(k as u64))
        } else {
            Ok(y.inv()?.pow((-k) as u64))
        }
    }

    /// Embeds an element of a subfield (same prime field).
    pub fn embed(&self, target: &FieldRef) -> Result<Elem> {
        if Arc::ptr_eq(&self.field, target) || *self.field == **target {
            let mut x = self.clone();
            x.field = target.clone();
            return Ok(x);
        }
        if !target.contains(&self.field) {
            return Err(Error::domain(format!(
                "cannot embed {} into {}",
                self.field.name, target.name
            )));
        }
        let (se, sf) = (self.field.e, self.field.f);
        let (te, tf) = (target.e, target.f);
        let mut c = vec![target.base.exact_zero(); te * tf];
        for i in 0..se {
            for j in 0..sf {
                let ti = if se == 1 { 0 } else { i };
                let tj = if sf == 1 { 0 } else { j };
                c[ti * tf + tj] = self.c[i * sf + j].clone();
            }
        }
        Ok(Elem::from_coords(target, c))
    }

    /// The element as a member of the subfield `sub`, when its other
    /// coordinates vanish at precision.
    pub fn restrict(&self, sub: &FieldRef) -> Option<Elem> {
        if !self.field.contains(sub) {
            return None;
        }
        let f = self.field.f;
        let b = &self.field.base;
        let mut c = vec![b.exact_zero(); sub.degree()];
        for (idx, x) in self.c.iter().enumerate() {
            let (i, j) = (idx / f, idx % f);
            let si = if sub.e == 1 { (i == 0).then_some(0) } else { Some(i) };
            let sj = if sub.f == 1 { (j == 0).then_some(0) } else { Some(j) };
            match (si, sj) {
                (Some(a), Some(bb)) => c[a * sub.f + bb] = x.clone(),
                _ if b.is_zero(x) => {}
                _ => return None,
            }
        }
        Some(Elem::from_coords(sub, c))
    }

    /// Scaled valuation (units of 1/e) or `None` when zero at precision.
    pub fn val_s(&self) -> Option<i64> {
        let e = self.field.e as i64;
        let f = self.field.f;
        let b = &self.field.base;
        let mut best: Option<i64> = None;
        for (idx, x) in self.c.iter().enumerate() {
            if let Some(v) = b.val(x) {
                let s = v * e + (idx / f) as i64;
                best = Some(best.map_or(s, |m: i64| m.min(s)));
            }
        }
        match best {
            Some(v) if v < self.prec_s() => Some(v),
            _ => None,
        }
    }

    /// Scaled absolute precision (units of 1/e).
    pub fn prec_s(&self) -> i64 {
        let e = self.field.e as i64;
        let f = self.field.f;
        let b = &self.field.base;
        self.c
            .iter()
            .enumerate()
            .map(|(idx, x)| {
                let pr = b.prec(x);
                if pr >= INF_PREC {
                    INF_PREC
                } else {
                    pr * e + (idx / f) as i64
                }
            })
            .min()
            .unwrap_or(INF_PREC)
    }

    pub fn val(&self) -> Gamma {
        match self.val_s() {
            Some(v) => Gamma::frac(v, self.field.e as i64),
            None => Gamma::Inf,
        }
    }

    /// Valuation, with zero reported as its precision.
    pub fn val_or_prec(&self) -> Gamma {
        match self.val_s() {
            Some(v) => Gamma::frac(v, self.field.e as i64),
            None => self.prec(),
        }
    }

    pub fn prec(&self) -> Gamma {
        let p = self.prec_s();
        if p >= INF_PREC {
            Gamma::Inf
        } else {
            Gamma::frac(p, self.field.e as i64)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.val_s().is_none()
    }

    pub fn is_exact(&self) -> bool {
        self.prec_s() >= INF_PREC
    }

    pub fn with_prec_scaled(&self, ps: i64) -> Elem {
        let e = self.field.e as i64;
        let f = self.field.f;
        let b = &self.field.base;
        let c = self
            .c
            .iter()
            .enumerate()
            .map(|(idx, x)| {
                let i = (idx / f) as i64;
                b.with_prec(x, (ps - i + e - 1).div_euclid(e))
            })
            .collect();
        Elem {
            field: self.field.clone(),
            c,
        }
    }

    /// Lowers the absolute precision to `prec` (no-op if already lower).
    pub fn with_prec(&self, prec: Gamma) -> Elem {
        match prec {
            Gamma::Inf => self.clone(),
            Gamma::Fin(r) => self.with_prec_scaled((r * self.field.e as i64).ceil().to_integer()),
        }
    }

    /// Exact element keeping only the digits of scaled valuation below `ks`.
    pub fn truncate_exact(&self, ks: i64) -> Elem {
        let e = self.field.e as i64;
        let f = self.field.f;
        let b = &self.field.base;
        let c = self
            .c
            .iter()
            .enumerate()
            .map(|(idx, x)| {
                let i = (idx / f) as i64;
                let mut acc = b.exact_zero();
                for (k, d) in b.digits(x) {
                    if k * e + i < ks {
                        let t = b.mul(&b.from_i64(d as i64, INF_PREC), &b.uniformizer_pow(k, INF_PREC));
                        acc = b.add(&acc, &t);
                    }
                }
                acc
            })
            .collect();
        Elem {
            field: self.field.clone(),
            c,
        }
    }

    /// Lowers to the field's default working precision.
    pub fn at_working_prec(&self) -> Elem {
        self.with_prec_scaled(self.field.prec_scaled())
    }

    fn same_field(&self, o: &Elem) {
        debug_assert!(
            Arc::ptr_eq(&self.field, &o.field) || *self.field == *o.field,
            "mixed fields {} and {}",
            self.field.name,
            o.field.name
        );
    }

    pub fn add(&self, o: &Elem) -> Elem {
        self.same_field(o);
        let b = &self.field.base;
        let c = self.c.iter().zip(&o.c).map(|(x, y)| b.add(x, y)).collect();
        Elem::from_coords(&self.field, c)
    }

    pub fn sub(&self, o: &Elem) -> Elem {
        self.same_field(o);
        let b = &self.field.base;
        let c = self.c.iter().zip(&o.c).map(|(x, y)| b.sub(x, y)).collect();
        Elem::from_coords(&self.field, c)
    }

    pub fn neg(&self) -> Elem {
        let b = &self.field.base;
        Elem {
            field: self.field.clone(),
            c: self.c.iter().map(|x| b.neg(x)).collect(),
        }
    }

    fn umul(&self, a: &[Base], bb: &[Base]) -> Vec<Base> {
        let fld = &self.field;
        let b = &fld.base;
        let f = fld.f;
        if f == 1 {
            return vec![b.mul(&a[0], &bb[0])];
        }
        let mut prod = vec![b.exact_zero(); 2 * f - 1];
        for i in 0..f {
            if b.is_zero(&a[i]) && b.prec(&a[i]) >= INF_PREC {
                continue;
            }
            for j in 0..f {
                let t = b.mul(&a[i], &bb[j]);
                prod[i + j] = b.add(&prod[i + j], &t);
            }
        }
        for k in (f..2 * f - 1).rev() {
            let top = prod[k].clone();
            for l in 0..f {
                let t = b.mul(&top, &fld.unram[l]);
                prod[k - f + l] = b.sub(&prod[k - f + l], &t);
            }
        }
        prod.truncate(f);
        prod
    }

    pub fn mul(&self, o: &Elem) -> Elem {
        self.same_field(o);
        let fld = &self.field;
        let b = &fld.base;
        if fld.is_base() {
            return Elem {
                field: fld.clone(),
                c: vec![b.mul(&self.c[0], &o.c[0])],
            };
        }
        let (e, f) = (fld.e, fld.f);
        let mut prod: Vec<Vec<Base>> = vec![vec![b.exact_zero(); f]; 2 * e - 1];
        for i in 0..e {
            let ai = &self.c[i * f..(i + 1) * f];
            if ai.iter().all(|x| b.is_zero(x) && b.prec(x) >= INF_PREC) {
                continue;
            }
            for j in 0..e {
                let bj = &o.c[j * f..(j + 1) * f];
                let t = self.umul(ai, bj);
                for (acc, x) in prod[i + j].iter_mut().zip(&t) {
                    *acc = b.add(acc, x);
                }
            }
        }
        for k in (e..2 * e - 1).rev() {
            let top = prod[k].clone();
            for l in 0..e {
                let el = &fld.eis[l];
                for (jj, tj) in top.iter().enumerate() {
                    let t = b.mul(tj, el);
                    prod[k - e + l][jj] = b.sub(&prod[k - e + l][jj], &t);
                }
            }
        }
        prod.truncate(e);
        Elem::from_coords(fld, prod.into_iter().flatten().collect())
    }

    pub fn square(&self) -> Elem {
        self.mul(self)
    }

    pub fn pow(&self, mut k: u64) -> Elem {
        let mut acc = Elem::one(&self.field);
        let mut b = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&b);
            }
            k >>= 1;
            if k > 0 {
                b = b.mul(&b);
            }
        }
        acc
    }

    pub fn powi(&self, k: i64) -> Result<Elem> {
        if k >= 0 {
            Ok(self.pow(k as u64))
        } else {
            Ok(self.inv()?.pow((-k) as u64))
        }
    }

    fn pi_inv(&self) -> Elem {
        Elem {
            field: self.field.clone(),
            c: self.field.pi_inv.clone().expect("ramified field"),
        }
    }

    /// Lift of a residue-field element through the coordinate basis.
    pub fn lift_res(field: &FieldRef, r: &Res) -> Elem {
        let mut c = vec![field.base.exact_zero(); field.degree()];
        for (j, &d) in r.0.iter().enumerate() {
            c[j] = field.base.from_i64(d as i64, INF_PREC);
        }
        Elem {
            field: field.clone(),
            c,
        }
    }

    pub fn inv(&self) -> Result<Elem> {
        let fld = &self.field;
        let b = &fld.base;
        if fld.is_base() {
            return Ok(Elem {
                field: fld.clone(),
                c: vec![b.inv(&self.c[0])?],
            });
        }
        let k = self
            .val_s()
            .ok_or_else(|| Error::precision("precision-zero divisor"))?;
        let shift = if fld.e > 1 {
            if k >= 0 {
                self.pi_inv().pow(k as u64)
            } else {
                Elem::uniformizer(fld).pow((-k) as u64)
            }
        } else {
            let pk = b.uniformizer_pow(-k, INF_PREC);
            Elem::from_base(fld, pk)
        };
        let u = self.mul(&shift);
        let r0 = u.residue()?;
        let r0inv = fld
            .res
            .inv(&r0)
            .ok_or_else(|| Error::precision("precision-zero divisor"))?;
        let mut y = Elem::lift_res(fld, &r0inv);
        let two = Elem::from_int(fld, 2);
        for _ in 0..80 {
            let uy = u.mul(&y);
            if Elem::one(fld).sub(&uy).is_zero() {
                break;
            }
            y = y.mul(&two.sub(&uy));
        }
        Ok(y.mul(&shift))
    }

    pub fn div(&self, o: &Elem) -> Result<Elem> {
        Ok(self.mul(&o.inv()?))
    }

    /// Equality at the smaller of the two precisions.
    pub fn eq_prec(&self, o: &Elem) -> bool {
        self.sub(o).is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.eq_prec(&Elem::one(&self.field))
    }

    /// Residue-field image of an integral element.
    pub fn residue(&self) -> Result<Res> {
        let fld = &self.field;
        if let Some(v) = self.val_s() {
            if v < 0 {
                return Err(Error::domain("not integral"));
            }
        }
        if self.prec_s() <= 0 {
            return Err(Error::precision("residue unknown at this precision"));
        }
        let mut r = Vec::with_capacity(fld.f);
        for j in 0..fld.f {
            r.push(fld.base.residue(&self.c[j])?);
        }
        Ok(Res(r))
    }

    /// The reduction `x / y^(val)` residue: the angular component.
    pub fn leading_res(&self) -> Result<Res> {
        let k = self
            .val_s()
            .ok_or_else(|| Error::precision("zero has no leading coefficient"))?;
        let g = Gamma::frac(k, self.field.e as i64);
        let m = Elem::monomial(&self.field, g)?;
        self.div(&m)?.residue()
    }

    /// Whether the element lies in the prime field (at precision).
    pub fn in_prime_field(&self) -> bool {
        let b = &self.field.base;
        self.c[1..].iter().all(|x| b.is_zero(x))
    }

    /// Projection onto the prime field (first coordinate).
    pub fn prime_coord(&self) -> Base {
        self.c[0].clone()
    }

    /// Display with explicit `O(...)` precision term.
    pub fn full(&self) -> String {
        self.render(true)
    }

    fn render(&self, with_o: bool) -> String {
        let fld = &self.field;
        let b = &fld.base;
        if fld.is_base() {
            if with_o {
                return fmt_base_digits(b, &self.c[0], true);
            }
            return fmt_base_compact(b, &self.c[0]);
        }
        if !with_o {
            let mut items = Vec::new();
            for (idx, x) in self.c.iter().enumerate() {
                if b.is_zero(x) {
                    continue;
                }
                items.push((fmt_base_compact(b, x), ext_mono(idx / fld.f, idx % fld.f)));
            }
            return crate::poly::fmt_terms(items.into_iter());
        }
        let mut parts = Vec::new();
        for (idx, x) in self.c.iter().enumerate() {
            if b.is_zero(x) {
                continue;
            }
            let mono = ext_mono(idx / fld.f, idx % fld.f);
            let cs = fmt_base_digits(b, x, false);
            if mono.is_empty() {
                parts.push(cs);
            } else if cs == "1" {
                parts.push(mono);
            } else if cs.contains(' ') {
                parts.push(format!("({cs})*{mono}"));
            } else {
                parts.push(format!("{cs}*{mono}"));
            }
        }
        let mut s = if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" + ")
        };
        let pr = self.prec_s();
        if pr < INF_PREC {
            let unif = if fld.e > 1 {
                "y".to_string()
            } else if b.kind == BaseKind::Qp {
                fld.p().to_string()
            } else {
                "t".to_string()
            };
            s.push_str(&format!(" + O({unif}^{pr})"));
        }
        s
    }
}

fn ext_mono(i: usize, j: usize) -> String {
    let mut mono = Vec::new();
    if i > 0 {
        mono.push(if i == 1 { "y".to_string() } else { format!("y^{i}") });
    }
    if j > 0 {
        mono.push(if j == 1 { "z".to_string() } else { format!("z^{j}") });
    }
    mono.join("*")
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render(false))
    }
}

impl PartialEq for Elem {
    /// Equality at precision.
    fn eq(&self, o: &Elem) -> bool {
        self.eq_prec(o)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident) => {
        impl std::ops::$tr<&Elem> for &Elem {
            type Output = Elem;
            fn $m(self, o: &Elem) -> Elem {
                Elem::$m(self, o)
            }
        }
        impl std::ops::$tr<Elem> for Elem {
            type Output = Elem;
            fn $m(self, o: Elem) -> Elem {
                Elem::$m(&self, &o)
            }
        }
    };
}
binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);

impl std::ops::Neg for &Elem {
    type Output = Elem;
    fn neg(self) -> Elem {
        Elem::neg(self)
    }
}

impl std::ops::Neg for Elem {
    type Output = Elem;
    fn neg(self) -> Elem {
        Elem::neg(&self)
    }
}
