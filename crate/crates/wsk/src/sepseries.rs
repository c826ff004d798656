//! Truncated separated power series in closed variables ξ (`x1..`) and
//! open variables ρ (`r1..`), with Weierstrass division and preparation,
//! composition, preregularity and the Strong Noetherian decomposition.
//!
//! A series lives modulo the truncation ideal
//! `I = (total ξ-degree > dx, total ρ-order > dr, valuation ≥ prec)`.

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::poly::fmt_terms;
use crate::vfield::{eval_atom, eval_elem, Elem, FieldRef, Gamma};
use std::collections::BTreeMap;
use std::fmt;

pub const MAX_VARS: usize = 8;

/// Exponent vector packed 8 bits per variable, variable 0 most significant,
/// so the derived order is lexicographic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Mono(u64);

impl Mono {
    pub const ONE: Mono = Mono(0);

    fn shift(i: usize) -> u32 {
        8 * (MAX_VARS - 1 - i) as u32
    }

    pub fn get(self, i: usize) -> u32 {
        ((self.0 >> Self::shift(i)) & 0xff) as u32
    }

    pub fn var(i: usize, k: u32) -> Mono {
        Mono((k as u64) << Self::shift(i))
    }

    pub fn from_slice(e: &[u32]) -> Mono {
        let mut m = Mono(0);
        for (i, &k) in e.iter().enumerate() {
            m.0 |= (k as u64) << Self::shift(i);
        }
        m
    }

    pub fn to_vec(self, nv: usize) -> Vec<u32> {
        (0..nv).map(|i| self.get(i)).collect()
    }

    pub fn mul(self, o: Mono) -> Mono {
        Mono(self.0 + o.0)
    }

    /// Removes variable `i` from the exponent (sets it to 0).
    pub fn without(self, i: usize) -> Mono {
        Mono(self.0 & !(0xffu64 << Self::shift(i)))
    }

    fn sum(self, range: std::ops::Range<usize>) -> u32 {
        range.map(|i| self.get(i)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Caps {
    pub dx: u32,
    pub dr: u32,
    pub prec: Gamma,
}

impl Caps {
    pub fn new(dx: u32, dr: u32, prec: i64) -> Caps {
        Caps {
            dx,
            dr,
            prec: Gamma::int(prec),
        }
    }

    pub fn for_field(field: &FieldRef) -> Caps {
        Caps::new(8, 8, field.prec)
    }
}

/// Which variable a regularity statement refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Xi(usize),
    Rho(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Xi(i) => write!(f, "x{}", i + 1),
            Var::Rho(j) => write!(f, "r{}", j + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RegKind {
    Xi,
    Rho,
    Prereg { mu: Vec<u32>, nu: Vec<u32> },
    None,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularityReport {
    pub var: Option<Var>,
    pub degree: u32,
    pub kind: RegKind,
}

impl fmt::Display for RegularityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RegKind::Xi | RegKind::Rho => write!(
                f,
                "regular in {} of degree {}",
                self.var.expect("regular report names its variable"),
                self.degree
            ),
            RegKind::Prereg { mu, nu } => write!(f, "preregular of bidegree ({mu:?},{nu:?})"),
            RegKind::None => write!(f, "none"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SepSeries {
    field: FieldRef,
    pub m: usize,
    pub n: usize,
    pub caps: Caps,
    terms: BTreeMap<Mono, Elem>,
}

impl SepSeries {
    pub fn zero(field: &FieldRef, m: usize, n: usize, caps: Caps) -> SepSeries {
        assert!(m + n <= MAX_VARS, "at most {MAX_VARS} variables");
        SepSeries {
            field: field.clone(),
            m,
            n,
            caps,
            terms: BTreeMap::new(),
        }
    }

    pub fn like(&self) -> SepSeries {
        SepSeries::zero(&self.field, self.m, self.n, self.caps)
    }

    pub fn constant(field: &FieldRef, m: usize, n: usize, caps: Caps, c: Elem) -> SepSeries {
        let mut s = SepSeries::zero(field, m, n, caps);
        s.insert(Mono::ONE, c);
        s
    }

    pub fn monomial(&self, e: Mono, c: Elem) -> SepSeries {
        let mut s = self.like();
        s.insert(e, c);
        s
    }

    pub fn xi(&self, i: usize) -> SepSeries {
        self.monomial(Mono::var(i, 1), Elem::one(&self.field))
    }

    pub fn rho(&self, j: usize) -> SepSeries {
        self.monomial(Mono::var(self.m + j, 1), Elem::one(&self.field))
    }

    pub fn one(&self) -> SepSeries {
        self.monomial(Mono::ONE, Elem::one(&self.field))
    }

    pub fn field(&self) -> &FieldRef {
        &self.field
    }

    pub fn nvars(&self) -> usize {
        self.m + self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Elem)> {
        self.terms.iter()
    }

    pub fn coeff(&self, e: Mono) -> Elem {
        self.terms.get(&e).cloned().unwrap_or_else(|| Elem::zero(&self.field))
    }

    fn xdeg(&self, e: Mono) -> u32 {
        e.sum(0..self.m)
    }

    fn rdeg(&self, e: Mono) -> u32 {
        e.sum(self.m..self.m + self.n)
    }

    fn in_ideal(&self, e: Mono, c: &Elem) -> bool {
        self.xdeg(e) > self.caps.dx || self.rdeg(e) > self.caps.dr || c.val() >= self.caps.prec
    }

    fn insert(&mut self, e: Mono, c: Elem) {
        if !self.in_ideal(e, &c) {
            self.terms.insert(e, c);
        }
    }

    fn add_term(&mut self, e: Mono, c: Elem) {
        if self.xdeg(e) > self.caps.dx || self.rdeg(e) > self.caps.dr {
            return;
        }
        let v = match self.terms.remove(&e) {
            Some(old) => old.add(&c),
            None => c,
        };
        self.insert(e, v);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Same series with different caps, truncated to them.
    pub fn with_caps(&self, caps: Caps) -> SepSeries {
        let mut s = SepSeries::zero(&self.field, self.m, self.n, caps);
        for (e, c) in &self.terms {
            s.insert(*e, c.clone());
        }
        s
    }

    pub fn add(&self, o: &SepSeries) -> SepSeries {
        let mut s = self.clone();
        for (e, c) in &o.terms {
            s.add_term(*e, c.clone());
        }
        s
    }

    pub fn neg(&self) -> SepSeries {
        let mut s = self.clone();
        for c in s.terms.values_mut() {
            *c = c.neg();
        }
        s
    }

    pub fn sub(&self, o: &SepSeries) -> SepSeries {
        self.add(&o.neg())
    }

    pub fn scale(&self, a: &Elem) -> SepSeries {
        let mut s = self.like();
        for (e, c) in &self.terms {
            s.insert(*e, c.mul(a));
        }
        s
    }

    pub fn mul(&self, o: &SepSeries) -> SepSeries {
        let mut acc: BTreeMap<Mono, Elem> = BTreeMap::new();
        let info = |s: &SepSeries| -> Vec<(Mono, u32, u32, Gamma, Elem)> {
            s.terms
                .iter()
                .map(|(e, c)| (*e, s.xdeg(*e), s.rdeg(*e), c.val(), c.clone()))
                .collect()
        };
        let a = info(self);
        let b = info(o);
        for (ea, xa, ra, va, ca) in &a {
            for (eb, xb, rb, vb, cb) in &b {
                if xa + xb > self.caps.dx || ra + rb > self.caps.dr || *va + *vb >= self.caps.prec {
                    continue;
                }
                let e = ea.mul(*eb);
                let t = ca.mul(cb);
                match acc.get_mut(&e) {
                    Some(x) => *x = x.add(&t),
                    None => {
                        acc.insert(e, t);
                    }
                }
            }
        }
        let mut s = self.like();
        for (e, c) in acc {
            s.insert(e, c);
        }
        s
    }

    pub fn pow(&self, k: u32) -> SepSeries {
        let mut acc = self.one();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Minimal coefficient valuation (the additive gauss norm).
    pub fn gauss_norm(&self) -> Gamma {
        self.terms.values().map(|c| c.val()).min().unwrap_or(Gamma::Inf)
    }

    /// Whether every coefficient vanishes at precision; by the identity
    /// theorem for separated series this is pointwise vanishing.
    pub fn is_zero_function(&self) -> bool {
        self.terms.values().all(|c| c.is_zero())
    }

    /// Equality modulo the truncation ideal.
    pub fn eq_mod(&self, o: &SepSeries) -> bool {
        self.sub(o).is_zero()
    }

    /// A term is small when it lies in the ideal (K°°, ρ).
    fn term_small(&self, e: Mono, c: &Elem) -> bool {
        c.val() > Gamma::ZERO || self.rdeg(e) > 0
    }

    pub fn is_small(&self) -> bool {
        self.terms.iter().all(|(e, c)| self.term_small(*e, c))
    }

    /// Evaluates at a point: ξ-values integral, ρ-values of positive valuation.
    pub fn eval(&self, pt: &[Elem]) -> Result<Elem> {
        if pt.len() != self.nvars() {
            return Err(Error::domain(format!("expected {} coordinates", self.nvars())));
        }
        for (i, x) in pt.iter().enumerate() {
            let v = x.val();
            if (i < self.m && v < Gamma::ZERO) || (i >= self.m && v <= Gamma::ZERO) {
                return Err(Error::domain(format!("point outside the polydisc in coordinate {}", i + 1)));
            }
        }
        let mut pows: Vec<Vec<Elem>> = Vec::with_capacity(pt.len());
        for (i, x) in pt.iter().enumerate() {
            let maxk = self.terms.keys().map(|e| e.get(i)).max().unwrap_or(0);
            let mut v = vec![Elem::one(&self.field)];
            for k in 0..maxk as usize {
                let nx = v[k].mul(x);
                v.push(nx);
            }
            pows.push(v);
        }
        let mut acc = Elem::zero(&self.field);
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, pw) in pows.iter().enumerate() {
                let k = e.get(i) as usize;
                if k > 0 {
                    t = t.mul(&pw[k]);
                }
            }
            acc = acc.add(&t);
        }
        Ok(acc)
    }

    fn var_index(&self, v: Var) -> Result<usize> {
        match v {
            Var::Xi(i) if i < self.m => Ok(i),
            Var::Rho(j) if j < self.n => Ok(self.m + j),
            _ => Err(Error::domain(format!("no variable {v}"))),
        }
    }

    /// Largest exponent of variable index `i`.
    fn max_exp(&self, i: usize) -> u32 {
        self.terms.keys().map(|e| e.get(i)).max().unwrap_or(0)
    }

    /// Terms whose exponent in variable `i` satisfies the predicate.
    fn filter_exp(&self, i: usize, pred: impl Fn(u32) -> bool) -> SepSeries {
        let mut s = self.like();
        for (e, c) in &self.terms {
            if pred(e.get(i)) {
                s.terms.insert(*e, c.clone());
            }
        }
        s
    }

    /// Coefficient of `var_i^k` as a series free of that variable.
    fn coeff_of(&self, i: usize, k: u32) -> SepSeries {
        let mut s = self.like();
        for (e, c) in &self.terms {
            if e.get(i) == k {
                s.terms.insert(e.without(i), c.clone());
            }
        }
        s
    }

    fn shift_var(&self, i: usize, k: u32) -> SepSeries {
        let mut s = self.like();
        let m = Mono::var(i, k);
        for (e, c) in &self.terms {
            s.insert(e.mul(m), c.clone());
        }
        s
    }

    /// Divides by `var_i^k` (the caller ensures exactness).
    fn unshift_var(&self, i: usize, k: u32) -> SepSeries {
        let mut s = self.like();
        for (e, c) in &self.terms {
            let ei = e.get(i);
            debug_assert!(ei >= k);
            s.terms.insert(Mono(e.0 - Mono::var(i, k).0), c.clone());
            let _ = ei;
        }
        s
    }

    /// Inverse of a unit: constant term a unit and the rest small.
    pub fn unit_inverse(&self) -> Result<SepSeries> {
        let c0 = self.coeff(Mono::ONE);
        if c0.val() != Gamma::ZERO {
            return Err(Error::domain("not a unit"));
        }
        let mut w = self.clone();
        w.terms.remove(&Mono::ONE);
        if !w.is_small() {
            return Err(Error::domain("not a unit"));
        }
        let cinv = c0.inv()?;
        let w = w.scale(&cinv).neg();
        let mut acc = self.one();
        let mut pw = self.one();
        for _ in 0..self.iteration_bound(Gamma::ZERO) {
            pw = pw.mul(&w);
            if pw.is_zero() {
                return Ok(acc.scale(&cinv));
            }
            acc = acc.add(&pw);
        }
        Err(Error::precision("insufficient precision"))
    }

    fn iteration_bound(&self, v: Gamma) -> usize {
        let e = self.field.e as i64;
        let span = match (self.caps.prec, v) {
            (Gamma::Fin(p), Gamma::Fin(v)) => ((p - v) * e).ceil().to_integer().max(0),
            _ => self.field.prec_scaled(),
        };
        (span + self.caps.dr as i64 + 4) as usize
    }

    /// Regularity in a variable for a series of gauss norm 0.
    pub fn regular_degree(&self, v: Var) -> Result<RegularityReport> {
        let i = self.var_index(v)?;
        if self.gauss_norm() != Gamma::ZERO {
            return Err(Error::domain("scale first"));
        }
        let none = RegularityReport {
            var: Some(v),
            degree: 0,
            kind: RegKind::None,
        };
        match v {
            Var::Xi(_) => {
                let res: Vec<Mono> = self
                    .terms
                    .iter()
                    .filter(|(e, c)| c.val() == Gamma::ZERO && self.rdeg(**e) == 0)
                    .map(|(e, _)| *e)
                    .collect();
                let Some(d) = res.iter().map(|e| e.get(i)).max() else {
                    return Ok(none);
                };
                let top: Vec<&Mono> = res.iter().filter(|e| e.get(i) == d).collect();
                if top.len() == 1 && top[0].without(i) == Mono::ONE && d <= self.caps.dx {
                    Ok(RegularityReport {
                        var: Some(v),
                        degree: d,
                        kind: RegKind::Xi,
                    })
                } else {
                    Ok(none)
                }
            }
            Var::Rho(_) => {
                let res: Vec<Mono> = self
                    .terms
                    .iter()
                    .filter(|(e, c)| c.val() == Gamma::ZERO && self.rdeg(e.without(i)) == 0)
                    .map(|(e, _)| *e)
                    .collect();
                let Some(d) = res.iter().map(|e| e.get(i)).min() else {
                    return Ok(none);
                };
                let low: Vec<&Mono> = res.iter().filter(|e| e.get(i) == d).collect();
                if low.len() == 1 && low[0].without(i) == Mono::ONE {
                    Ok(RegularityReport {
                        var: Some(v),
                        degree: d,
                        kind: RegKind::Rho,
                    })
                } else {
                    Ok(none)
                }
            }
        }
    }

    fn check_report(&self, rep: &RegularityReport) -> Result<(usize, u32, bool)> {
        let v = rep.var.ok_or_else(|| Error::domain("not regular"))?;
        let fresh = self.regular_degree(v).map_err(|_| Error::domain("not regular"))?;
        if fresh.kind == RegKind::None || fresh.degree != rep.degree || fresh.kind != rep.kind {
            return Err(Error::domain("not regular"));
        }
        Ok((self.var_index(v)?, rep.degree, matches!(v, Var::Xi(_))))
    }

    /// Views `self` in the ring of `o` when it has no more variables of either kind.
    pub fn in_ring_of(&self, o: &SepSeries) -> Result<SepSeries> {
        if self.m > o.m || self.n > o.n || *self.field != *o.field {
            return Err(Error::domain("series live in different rings"));
        }
        Ok(self.extend_vars(o.m, o.n).with_caps(o.caps))
    }

    /// Weierstrass division `g = q·f + r` with `deg r < d` in the report's variable.
    pub fn weierstrass_divide(g: &SepSeries, f: &SepSeries, rep: &RegularityReport) -> Result<(SepSeries, SepSeries)> {
        let (i, d, is_xi) = f.check_report(rep)?;
        let g = g.in_ring_of(f)?;
        // Quotient terms just below the caps come from dividend terms up to
        // d above them, so the division runs with widened caps.
        let mut wide = f.caps;
        if is_xi {
            wide.dx = (wide.dx + d).min(255);
        } else {
            wide.dr = (wide.dr + d).min(255);
        }
        let (gw, fw) = (g.with_caps(wide), f.with_caps(wide));
        let (q, r) = if is_xi {
            divide_xi(&gw, &fw, i, d)?
        } else {
            divide_rho(&gw, &fw, i, d)?
        };
        Ok((q.with_caps(f.caps), r.with_caps(f.caps)))
    }

    /// Weierstrass preparation `f = u·P` with P monic of degree d.
    pub fn weierstrass_prepare(f: &SepSeries, rep: &RegularityReport) -> Result<(SepSeries, SepSeries)> {
        let (i, d, _) = f.check_report(rep)?;
        let vd = f.monomial(Mono::var(i, d), Elem::one(&f.field));
        let (q, r) = SepSeries::weierstrass_divide(&vd, f, rep)?;
        let p = vd.sub(&r);
        let u = q.unit_inverse()?;
        Ok((u, p))
    }

    /// Lexicographic bidegree of the preregular term, if any.
    pub fn preregular_degree(&self) -> Result<RegularityReport> {
        if self.gauss_norm() != Gamma::ZERO {
            return Err(Error::domain("scale first"));
        }
        let units: Vec<(Vec<u32>, Vec<u32>)> = self
            .terms
            .iter()
            .filter(|(_, c)| c.val() == Gamma::ZERO)
            .map(|(e, _)| {
                let v = e.to_vec(self.nvars());
                (v[..self.m].to_vec(), v[self.m..].to_vec())
            })
            .collect();
        let Some(nu0) = units.iter().map(|(_, nu)| nu.clone()).min() else {
            return Ok(RegularityReport {
                var: None,
                degree: 0,
                kind: RegKind::None,
            });
        };
        let mu0 = units
            .iter()
            .filter(|(_, nu)| *nu == nu0)
            .map(|(mu, _)| mu.clone())
            .max()
            .expect("nonempty");
        Ok(RegularityReport {
            var: None,
            degree: mu0.iter().sum::<u32>() + nu0.iter().sum::<u32>(),
            kind: RegKind::Prereg { mu: mu0, nu: nu0 },
        })
    }

    /// Applies `var_i ↦ var_i + var_last^{c_i}` (or the inverse with `sign = -1`)
    /// within one block.
    pub fn apply_change(&self, ch: &ChangeOfVars, inverse: bool) -> Result<SepSeries> {
        let mut args: Vec<SepSeries> = (0..self.m).map(|i| self.xi(i)).collect();
        args.extend((0..self.n).map(|j| self.rho(j)));
        let (last, off) = match ch.block {
            Block::Xi => (self.m - 1, 0),
            Block::Rho => (self.m + self.n - 1, self.m),
        };
        let lastv = &args[last].clone();
        for &(k, c) in &ch.exps {
            let t = lastv.pow(c);
            let idx = off + k;
            args[idx] = if inverse { args[idx].sub(&t) } else { args[idx].add(&t) };
        }
        self.compose(&args)
    }

    /// Change of variables making a preregular series regular in the last
    /// variable of its block.
    pub fn make_regular(&self, rep: &RegularityReport) -> Result<(SepSeries, ChangeOfVars)> {
        let RegKind::Prereg { mu, nu } = &rep.kind else {
            return Err(Error::domain("not preregular"));
        };
        let block = if nu.iter().all(|&x| x == 0) && self.m > 0 {
            Block::Xi
        } else if mu.iter().all(|&x| x == 0) && self.n > 0 {
            Block::Rho
        } else {
            return Err(Error::domain("preregular bidegree mixes closed and open variables"));
        };
        let (lo, len) = match block {
            Block::Xi => (0, self.m),
            Block::Rho => (self.m, self.n),
        };
        let dmax = self
            .terms
            .iter()
            .filter(|(_, c)| c.val() == Gamma::ZERO)
            .flat_map(|(e, _)| (lo..lo + len).map(move |i| e.get(i)))
            .max()
            .unwrap_or(0);
        let base = dmax + 1;
        let mut exps = Vec::new();
        for k in 0..len - 1 {
            let c = base
                .checked_pow((len - 1 - k) as u32)
                .ok_or_else(|| Error::domain("increase caps"))?;
            exps.push((k, c));
        }
        let ch = ChangeOfVars { block, exps };
        let cap = match block {
            Block::Xi => self.caps.dx,
            Block::Rho => self.caps.dr,
        };
        let weight = |v: &[u32]| -> u64 {
            v.iter()
                .enumerate()
                .map(|(k, &x)| x as u64 * if k + 1 == len { 1 } else { base.pow((len - 1 - k) as u32) as u64 })
                .sum()
        };
        let target = match block {
            Block::Xi => weight(mu),
            Block::Rho => weight(nu),
        };
        if target > cap as u64 {
            return Err(Error::domain("increase caps"));
        }
        let g = self.apply_change(&ch, false)?;
        let var = match block {
            Block::Xi => Var::Xi(self.m - 1),
            Block::Rho => Var::Rho(self.n - 1),
        };
        let r = g.regular_degree(var)?;
        if r.kind == RegKind::None || r.degree as u64 != target {
            return Err(Error::domain("increase caps"));
        }
        Ok((g, ch))
    }

    /// Substitutes `args` (series over a common target ring) for the
    /// variables, by successive division by `var - arg`.
    pub fn compose(&self, args: &[SepSeries]) -> Result<SepSeries> {
        if args.len() != self.nvars() {
            return Err(Error::domain(format!("expected {} arguments", self.nvars())));
        }
        let (tm, tn, tcaps) = match args.first() {
            Some(a) => (a.m, a.n, a.caps),
            None => (0, 0, self.caps),
        };
        for a in args {
            if a.m != tm || a.n != tn || *a.field != *self.field {
                return Err(Error::domain("arguments live in different rings"));
            }
        }
        for (k, a) in args.iter().enumerate() {
            if k < self.m {
                if a.gauss_norm() < Gamma::ZERO {
                    return Err(Error::domain("argument for a closed variable is not integral"));
                }
            } else if !a.is_small() {
                return Err(Error::domain("not substitutable into open variable"));
            }
        }
        if tm + tn + self.m + self.n > MAX_VARS {
            return Err(Error::domain(format!("at most {MAX_VARS} variables in a composition")));
        }
        // Combined ring: ξ = [target ξ, source ξ], ρ = [target ρ, source ρ].
        let cm = tm + self.m;
        let cn = tn + self.n;
        let ccaps = Caps {
            dx: (self.caps.dx + tcaps.dx).min(255),
            dr: (self.caps.dr + tcaps.dr).min(255),
            prec: self.caps.prec.min(tcaps.prec),
        };
        let src_map: Vec<usize> = (0..self.m).map(|i| tm + i).chain((0..self.n).map(|j| cm + tn + j)).collect();
        let tgt_map: Vec<usize> = (0..tm).chain((0..tn).map(|j| cm + j)).collect();
        let mut h = self.remap(cm, cn, ccaps, &src_map);
        for (k, a) in args.iter().enumerate() {
            let ci = src_map[k];
            let ga = a.remap(cm, cn, ccaps, &tgt_map);
            let lin = h.monomial(Mono::var(ci, 1), Elem::one(&self.field)).sub(&ga);
            h = if k < self.m {
                divide_xi(&h, &lin, ci, 1)?.1
            } else {
                divide_rho(&h, &lin, ci, 1)?.1
            };
        }
        let mut out = SepSeries::zero(&self.field, tm, tn, tcaps);
        for (e, c) in &h.terms {
            let v: Vec<u32> = tgt_map.iter().map(|&i| e.get(i)).collect();
            out.insert(Mono::from_slice(&v), c.clone());
        }
        Ok(out)
    }

    /// Moves variable `k` of `self` to index `map[k]` of a ring with `m2`
    /// closed and `n2` open variables.
    fn remap(&self, m2: usize, n2: usize, caps: Caps, map: &[usize]) -> SepSeries {
        let mut s = SepSeries::zero(&self.field, m2, n2, caps);
        for (e, c) in &self.terms {
            let mut v = vec![0u32; m2 + n2];
            for (k, &t) in map.iter().enumerate() {
                v[t] = e.get(k);
            }
            s.insert(Mono::from_slice(&v), c.clone());
        }
        s
    }

    /// Embeds into a ring with at least as many variables of each kind.
    pub fn extend_vars(&self, m2: usize, n2: usize) -> SepSeries {
        let map: Vec<usize> = (0..self.m).chain((0..self.n).map(|j| m2 + j)).collect();
        self.remap(m2, n2, self.caps, &map)
    }

    /// Strong Noetherian decomposition over the outer variables `outer`
    /// (indices into the combined variable list, all closed or all open).
    pub fn snp_decompose(&self, outer: &[usize]) -> Result<Vec<SnpTerm>> {
        if outer.is_empty() {
            return Err(Error::domain("empty outer block"));
        }
        let all_xi = outer.iter().all(|&i| i < self.m);
        let all_rho = outer.iter().all(|&i| i >= self.m && i < self.nvars());
        if !all_xi && !all_rho {
            return Err(Error::domain("unsupported outer block"));
        }
        let outer_mask = |e: Mono| -> Mono { Mono::from_slice(&(0..self.nvars()).map(|i| if outer.contains(&i) { e.get(i) } else { 0 }).collect::<Vec<_>>()) };
        // Group by outer exponent: coefficient series in the inner variables.
        let mut groups: BTreeMap<Mono, SepSeries> = BTreeMap::new();
        for (e, c) in &self.terms {
            let om = outer_mask(*e);
            let inner = Mono(e.0 - om.0);
            groups.entry(om).or_insert_with(|| self.like()).terms.insert(inner, c.clone());
        }
        let mut out = Vec::new();
        while !groups.is_empty() {
            let (&om0, _) = groups
                .iter()
                .min_by(|a, b| a.1.gauss_norm().cmp(&b.1.gauss_norm()).then(a.0.cmp(b.0)))
                .expect("nonempty");
            let c0 = groups.remove(&om0).expect("present");
            let v0 = c0.gauss_norm();
            let mut h = self.like();
            let single = c0.terms.len() == 1 && c0.terms.contains_key(&Mono::ONE);
            if single {
                let inv = c0.coeff(Mono::ONE).inv()?;
                let keys: Vec<Mono> = groups.keys().copied().collect();
                for om in keys {
                    let ge = outer.iter().all(|&i| om.get(i) >= om0.get(i));
                    if !ge {
                        continue;
                    }
                    let cv = groups[&om].gauss_norm();
                    let absorb = if all_xi { cv > v0 } else { om != om0 && cv >= v0 };
                    if absorb {
                        let cs = groups.remove(&om).expect("present");
                        let shift = Mono(om.0 - om0.0);
                        for (ie, ic) in &cs.terms {
                            h.insert(ie.mul(shift), ic.mul(&inv));
                        }
                    }
                }
            }
            out.push(SnpTerm {
                outer: om0.to_vec(self.nvars()).into_iter().enumerate().filter(|(i, _)| outer.contains(i)).map(|(_, k)| k).collect(),
                mono: om0,
                coeff: c0,
                unit: self.one().add(&h),
            });
        }
        Ok(out)
    }

    pub fn fmt_with(&self, names: &dyn Fn(usize) -> String) -> String {
        let mut items: Vec<(&Mono, &Elem)> = self.terms.iter().collect();
        items.sort_by(|a, b| {
            let da = self.xdeg(*a.0) + self.rdeg(*a.0);
            let db = self.xdeg(*b.0) + self.rdeg(*b.0);
            db.cmp(&da).then(b.0.cmp(a.0))
        });
        fmt_terms(items.into_iter().map(|(e, c)| {
            let mut mono = Vec::new();
            for i in 0..self.nvars() {
                let k = e.get(i);
                if k == 1 {
                    mono.push(names(i));
                } else if k > 1 {
                    mono.push(format!("{}^{k}", names(i)));
                }
            }
            (c.to_string(), mono.join("*"))
        }))
    }

    pub fn var_name(&self, i: usize) -> String {
        if i < self.m {
            format!("x{}", i + 1)
        } else {
            format!("r{}", i - self.m + 1)
        }
    }
}

impl fmt::Display for SepSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.fmt_with(&|i| self.var_name(i)))
    }
}

fn divide_xi(g: &SepSeries, f: &SepSeries, i: usize, d: u32) -> Result<(SepSeries, SepSeries)> {
    let big_f = f.filter_exp(i, |k| k <= d);
    let small = f.filter_exp(i, |k| k > d);
    let ad = big_f.coeff_of(i, d);
    let ainv = ad.unit_inverse()?;
    let mut q = g.like();
    let mut r = g.like();
    let mut h = g.clone();
    for _ in 0..g.iteration_bound(g.gauss_norm().min(Gamma::ZERO)) + 2 {
        if h.is_zero() {
            return Ok((q, r));
        }
        let mut cur = h;
        let mut quot = g.like();
        let top = cur.max_exp(i);
        for k in (d..=top).rev() {
            let ck = cur.coeff_of(i, k);
            if ck.is_zero() {
                continue;
            }
            let t = ck.mul(&ainv).shift_var(i, k - d);
            cur = cur.sub(&t.mul(&big_f));
            cur.terms.retain(|e, _| e.get(i) != k);
            quot = quot.add(&t);
        }
        q = q.add(&quot);
        r = r.add(&cur);
        h = quot.mul(&small).neg();
    }
    if h.is_zero() {
        Ok((q, r))
    } else {
        Err(Error::precision("insufficient precision"))
    }
}

fn divide_rho(g: &SepSeries, f: &SepSeries, i: usize, d: u32) -> Result<(SepSeries, SepSeries)> {
    let low = f.filter_exp(i, |k| k < d);
    let unit = f.filter_exp(i, |k| k >= d).unshift_var(i, d);
    let uinv = unit.unit_inverse()?;
    let mut q = g.like();
    let mut r = g.like();
    let mut h = g.clone();
    for _ in 0..g.iteration_bound(g.gauss_norm().min(Gamma::ZERO)) + 2 {
        if h.is_zero() {
            return Ok((q, r));
        }
        r = r.add(&h.filter_exp(i, |k| k < d));
        let hi = h.filter_exp(i, |k| k >= d).unshift_var(i, d);
        let quot = hi.mul(&uinv);
        q = q.add(&quot);
        h = quot.mul(&low).neg();
    }
    if h.is_zero() {
        Ok((q, r))
    } else {
        Err(Error::precision("insufficient precision"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Xi,
    Rho,
}

/// Record of `v_k ↦ v_k + v_last^{c_k}` within one block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChangeOfVars {
    pub block: Block,
    pub exps: Vec<(usize, u32)>,
}

impl fmt::Display for ChangeOfVars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match self.block {
            Block::Xi => "x",
            Block::Rho => "r",
        };
        let last = self.exps.len() + 1;
        if self.exps.is_empty() {
            return write!(f, "identity");
        }
        let parts: Vec<String> = self
            .exps
            .iter()
            .map(|(k, c)| format!("{v}{} -> {v}{} + {v}{last}^{c}", k + 1, k + 1))
            .collect();
        write!(f, "{}", parts.join(", "))
    }
}

/// One summand `coeff · outer^mono · unit` of a Strong Noetherian decomposition.
#[derive(Clone, Debug)]
pub struct SnpTerm {
    pub outer: Vec<u32>,
    pub mono: Mono,
    pub coeff: SepSeries,
    pub unit: SepSeries,
}

impl SnpTerm {
    pub fn value(&self) -> SepSeries {
        let m = self.coeff.monomial(self.mono, Elem::one(self.coeff.field()));
        self.coeff.mul(&m).mul(&self.unit)
    }
}

/// Sum of the summands of a decomposition.
pub fn snp_reassemble(terms: &[SnpTerm], like: &SepSeries) -> SepSeries {
    terms.iter().fold(like.like(), |acc, t| acc.add(&t.value()))
}

/// Parses `#caps dx=8 dr=8 prec=12` pragmas; returns the remaining text.
pub fn parse_pragmas<'a>(s: &'a str, caps: &mut Caps) -> Result<&'a str> {
    let t = s.trim_start();
    let Some(rest) = t.strip_prefix("#caps") else {
        return Ok(s);
    };
    let base = s.len() - rest.len();
    let (line, body) = match rest.find(['\n', ';']) {
        Some(k) => (&rest[..k], &rest[k + 1..]),
        None => (rest, ""),
    };
    for tok in line.split_whitespace() {
        let pos = base + line.find(tok).unwrap_or(0);
        let (k, v) = tok.split_once('=').ok_or_else(|| Error::parse(pos, "expected key=value"))?;
        let n: i64 = v.parse().map_err(|_| Error::parse(pos, format!("bad value for {k}")))?;
        match k {
            "dx" if (0..=255).contains(&n) => caps.dx = n as u32,
            "dr" if (0..=255).contains(&n) => caps.dr = n as u32,
            "prec" if n > 0 => caps.prec = Gamma::int(n),
            _ => return Err(Error::parse(pos, format!("bad pragma '{tok}'"))),
        }
    }
    Ok(body)
}

fn var_of(name: &str) -> Option<(bool, usize)> {
    let (closed, rest) = if let Some(r) = name.strip_prefix('x') {
        (true, r)
    } else {
        let r = name.strip_prefix('r')?;
        (false, r)
    };
    if rest.is_empty() {
        return Some((closed, 0));
    }
    let k: usize = rest.parse().ok()?;
    if k == 0 {
        return None;
    }
    Some((closed, k - 1))
}

fn scan_vars(e: &Expr, m: &mut usize, n: &mut usize) {
    match e {
        Expr::Var(v, _) => {
            if let Some((closed, k)) = var_of(v) {
                if closed {
                    *m = (*m).max(k + 1);
                } else {
                    *n = (*n).max(k + 1);
                }
            }
        }
        Expr::Num(_) => {}
        Expr::Neg(a) | Expr::Pow(a, _) => scan_vars(a, m, n),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            scan_vars(a, m, n);
            scan_vars(b, m, n);
        }
        Expr::Call(_, args, _) => args.iter().for_each(|a| scan_vars(a, m, n)),
    }
}

fn eval_series(e: &Expr, z: &SepSeries) -> Result<SepSeries> {
    let fld = z.field().clone();
    Ok(match e {
        Expr::Num(k) => z.monomial(Mono::ONE, Elem::from_int(&fld, *k).at_working_prec().with_prec(z.caps.prec)),
        Expr::Var(v, pos) => match var_of(v) {
            Some((true, k)) => z.xi(k),
            Some((false, k)) => z.rho(k),
            None => z.monomial(Mono::ONE, eval_atom(v, &fld, *pos)?),
        },
        Expr::Neg(a) => eval_series(a, z)?.neg(),
        Expr::Add(a, b) => eval_series(a, z)?.add(&eval_series(b, z)?),
        Expr::Sub(a, b) => eval_series(a, z)?.sub(&eval_series(b, z)?),
        Expr::Mul(a, b) => eval_series(a, z)?.mul(&eval_series(b, z)?),
        Expr::Div(a, b) => {
            let d = eval_series(b, z)?;
            let num = eval_series(a, z)?;
            if d.terms.keys().all(|e| *e == Mono::ONE) {
                let c = d.coeff(Mono::ONE);
                num.scale(&c.inv()?)
            } else {
                let c = d.coeff(Mono::ONE);
                let v = c.val();
                if v.is_inf() {
                    return Err(Error::domain("division by a non-unit series"));
                }
                let m = Elem::monomial(&fld, v)?.inv()?;
                let du = d.scale(&m).unit_inverse().map_err(|_| Error::domain("division by a non-unit series"))?;
                num.mul(&du).scale(&m)
            }
        }
        Expr::Pow(a, k) => {
            if !k.is_integer() || *k.numer() < 0 {
                let base = eval_series(a, z)?;
                if base.terms.keys().all(|e| *e == Mono::ONE) && k.is_integer() {
                    return Ok(z.monomial(Mono::ONE, base.coeff(Mono::ONE).powi(k.to_integer())?));
                }
                return Err(Error::parse(a.pos(), "exponent must be a nonnegative integer"));
            }
            eval_series(a, z)?.pow(k.to_integer() as u32)
        }
        Expr::Call(name, args, pos) => {
            if name == "O" && args.len() == 1 {
                let g = eval_elem(&args[0], &fld)?.val();
                let mut s = z.like();
                s.caps.prec = s.caps.prec.min(g);
                return Ok(s);
            }
            return Err(Error::parse(*pos, format!("unknown function '{name}'")));
        }
    })
}

/// Parses a series like `(3 + 9*x1)*r1^2 + x2`, optionally preceded by a
/// `#caps` pragma. The ring has at least `min_vars` closed/open variables.
pub fn parse_series(s: &str, field: &FieldRef, caps: Caps, min_vars: (usize, usize)) -> Result<SepSeries> {
    let mut caps = caps;
    let body = parse_pragmas(s, &mut caps)?;
    let off = s.len() - body.len();
    let e = parse_expr(body).map_err(|er| er.shift(off))?;
    let (mut m, mut n) = min_vars;
    scan_vars(&e, &mut m, &mut n);
    if m + n > MAX_VARS {
        return Err(Error::parse(0, format!("at most {MAX_VARS} variables")));
    }
    let z = SepSeries::zero(field, m, n, caps);
    let out = eval_series(&e, &z).map_err(|er| er.shift(off))?;
    Ok(out.with_caps(caps))
}
