//! Functions on K-annuli. A function is a rational function over K without
//! poles on its host annulus; this covers the generator expansions
//! `Σ a_ν p0^ν0 (a1/p1)^ν1 …` truncated at the working precision.
//!
//! Factorization works on the linear model of the host over its splitting
//! field: on a piece with outer disc `D(c0)` and holes `D(c_h)`,
//! `f = P · Π (x - c_h)^{n_h} · κ · U` with `U ≡ 1` in the residue field.

use crate::annuli::{ball_discs, Annulus, Ball, Disc, LinearPiece};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::poly::{fmt_terms, solve_linear, Poly};
use crate::sample;
use crate::vfield::resfield::{Fq, Res};
use crate::vfield::{eval_atom, eval_elem, Elem, FieldRef, Gamma};
use num_rational::Rational64;
use num_traits::Zero;
use std::fmt;

/// Largest power tried for a strong-unit certificate.
pub const MAX_L: i64 = 12;

/// `num / den` with `den` monic.
#[derive(Clone, Debug)]
pub struct Rat {
    pub num: Poly,
    pub den: Poly,
}

fn same_poly(a: &Poly, b: &Poly) -> bool {
    a.deg() == b.deg() && a.is_zero() == b.is_zero() && a.coeffs().iter().zip(b.coeffs()).all(|(x, y)| x.eq_prec(y))
}

fn exact_div(a: &Poly, b: &Poly) -> Result<Poly> {
    let (q, r) = a.divrem(b)?;
    if !r.is_zero() {
        return Err(Error::precision("inexact polynomial division"));
    }
    Ok(q)
}

impl Rat {
    pub fn new(num: Poly, den: Poly) -> Result<Rat> {
        if den.is_zero() {
            return Err(Error::precision("precision-zero divisor"));
        }
        let inv = den.lc().inv()?;
        Ok(Rat {
            num: num.scale(&inv),
            den: den.scale(&inv),
        })
    }

    pub fn poly(p: Poly) -> Rat {
        let one = Poly::one(p.field());
        Rat { num: p, den: one }
    }

    pub fn field(&self) -> &FieldRef {
        self.num.field()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_poly(&self) -> bool {
        self.den.deg() == 0
    }

    pub fn embed(&self, l: &FieldRef) -> Result<Rat> {
        Ok(Rat {
            num: self.num.embed(l)?,
            den: self.den.embed(l)?,
        })
    }

    pub fn add(&self, o: &Rat) -> Rat {
        if same_poly(&self.den, &o.den) {
            return Rat {
                num: self.num.add(&o.num),
                den: self.den.clone(),
            };
        }
        Rat {
            num: self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
    }

    pub fn neg(&self) -> Rat {
        Rat {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, o: &Rat) -> Rat {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Rat) -> Rat {
        Rat {
            num: self.num.mul(&o.num),
            den: self.den.mul(&o.den),
        }
    }

    pub fn inv(&self) -> Result<Rat> {
        Rat::new(self.den.clone(), self.num.clone())
    }

    pub fn div(&self, o: &Rat) -> Result<Rat> {
        Ok(self.mul(&o.inv()?))
    }

    pub fn powi(&self, k: i64) -> Result<Rat> {
        let b = if k < 0 { self.inv()? } else { self.clone() };
        let k = k.unsigned_abs() as usize;
        Ok(Rat {
            num: b.num.pow(k),
            den: b.den.pow(k),
        })
    }

    pub fn derivative(&self) -> Rat {
        Rat {
            num: self.num.derivative().mul(&self.den).sub(&self.num.mul(&self.den.derivative())),
            den: self.den.mul(&self.den),
        }
    }

    /// Value at `x`, computed in the larger of the two fields.
    pub fn eval(&self, x: &Elem) -> Result<Elem> {
        let (r, x) = if x.field().contains(self.field()) {
            (self.embed(x.field())?, x.clone())
        } else {
            (self.clone(), x.embed(self.field())?)
        };
        let d = r.den.eval(&x);
        if d.is_zero() {
            return Err(Error::precision("precision-zero divisor"));
        }
        r.num.eval(&x).div(&d)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_poly() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

/// Evaluates an expression in `var` as a rational function. Accepts `+ - * /`,
/// integer powers, `inv(a)` and `O(...)`.
pub fn rat_from_expr(e: &Expr, field: &FieldRef, var: &str) -> Result<Rat> {
    let go = |a: &Expr| rat_from_expr(a, field, var);
    Ok(match e {
        Expr::Num(n) => Rat::poly(Poly::constant(Elem::from_int(field, *n))),
        Expr::Var(v, pos) => {
            if v == var {
                Rat::poly(Poly::x(field))
            } else {
                Rat::poly(Poly::constant(eval_atom(v, field, *pos)?))
            }
        }
        Expr::Neg(a) => go(a)?.neg(),
        Expr::Add(a, b) => go(a)?.add(&go(b)?),
        Expr::Sub(a, b) => go(a)?.sub(&go(b)?),
        Expr::Mul(a, b) => go(a)?.mul(&go(b)?),
        Expr::Div(a, b) => go(a)?.div(&go(b)?)?,
        Expr::Pow(a, k) => {
            if !k.is_integer() {
                return Err(Error::parse(a.pos(), "fractional exponent in a rational function"));
            }
            go(a)?.powi(k.to_integer())?
        }
        Expr::Call(name, args, pos) => match (name.as_str(), args.len()) {
            ("inv", 1) => go(&args[0])?.inv()?,
            ("O", 1) => Rat::poly(Poly::constant(Elem::zero_prec(field, eval_elem(&args[0], field)?.val()))),
            _ => return Err(Error::parse(*pos, format!("unknown function '{name}'"))),
        },
    })
}

pub fn parse_rational(s: &str, field: &FieldRef) -> Result<Rat> {
    rat_from_expr(&parse_expr(s)?, field, "x")
}

/// Monic factor of `p` with the roots in `d`, and the cofactor.
fn disc_factor(p: &Poly, d: &Disc) -> Result<(Poly, Poly)> {
    if p.deg() == 0 {
        return Ok((Poly::one(p.field()), p.clone()));
    }
    let q = p.shift(&d.c);
    let (a, b) = q.slope_factor(d.r, d.open)?;
    let back = d.c.neg();
    Ok((a.shift(&back), b.shift(&back)))
}

/// Roots of a polynomial sorted by a linear piece: inside the piece, in
/// each hole, and outside the outer disc (carrying the leading coefficient).
struct Located {
    inner: Poly,
    holes: Vec<Poly>,
    out: Poly,
}

fn locate(p: &Poly, pc: &LinearPiece) -> Result<Located> {
    let (mut rest, out) = disc_factor(p, &pc.outer)?;
    let mut holes = Vec::with_capacity(pc.holes.len());
    for h in &pc.holes {
        let (a, b) = disc_factor(&rest, h)?;
        holes.push(a);
        rest = b;
    }
    Ok(Located { inner: rest, holes, out })
}

/// `f = κ · (pnum / pden) · Π (x - c_h)^{n_h} · unit` on one linear piece,
/// where `pnum`, `pden` are monic with their roots in the piece and `unit`
/// is `≡ 1` in the residue field there.
#[derive(Clone, Debug)]
pub struct PieceForm {
    pub kappa: Elem,
    pub pnum: Poly,
    pub pden: Poly,
    pub n: Vec<i64>,
    pub unit: Rat,
}

pub fn piece_form(f: &Rat, pc: &LinearPiece) -> Result<PieceForm> {
    if f.is_zero() {
        return Err(Error::domain("zero function"));
    }
    let nl = locate(&f.num, pc)?;
    let dl = locate(&f.den, pc)?;
    let c0 = &pc.outer.c;
    let kappa = nl.out.eval(c0).div(&dl.out.eval(c0))?;
    let mut top = nl.out.clone();
    let mut bottom = dl.out.scale(&kappa);
    let mut n = Vec::with_capacity(pc.holes.len());
    for ((h, g), d) in nl.holes.iter().zip(&dl.holes).zip(&pc.holes) {
        let lin = Poly::linear(&d.c);
        top = top.mul(h).mul(&lin.pow(g.deg()));
        bottom = bottom.mul(g).mul(&lin.pow(h.deg()));
        n.push(h.deg() as i64 - g.deg() as i64);
    }
    Ok(PieceForm {
        kappa,
        pnum: nl.inner,
        pden: dl.inner,
        n,
        unit: Rat::new(top, bottom)?,
    })
}

/// `f = P · Π (x - c_h)^{n_h} · κ · U` on one linear piece.
#[derive(Clone, Debug)]
pub struct PieceFactor {
    pub p: Poly,
    pub n: Vec<i64>,
    pub kappa: Elem,
}

/// The factorization of `f` (over the field of the piece) on a linear piece.
pub fn factor_on_piece(f: &Rat, pc: &LinearPiece) -> Result<PieceFactor> {
    let pf = piece_form(f, pc)?;
    if pf.pden.deg() > 0 {
        return Err(Error::domain("pole inside the annulus"));
    }
    Ok(PieceFactor {
        p: pf.pnum,
        n: pf.n,
        kappa: pf.kappa,
    })
}

/// Mittag-Leffler parts on one linear piece: `f = outer + Σ holes[h]`, where
/// `outer` has no pole in the outer disc and `holes[h]` has its poles in hole
/// `h` and vanishes at infinity.
#[derive(Clone, Debug)]
pub struct MlSplit {
    pub piece: LinearPiece,
    pub outer: Rat,
    pub holes: Vec<Rat>,
}

pub fn ml_on_piece(f: &Rat, pc: &LinearPiece) -> Result<MlSplit> {
    let dl = locate(&f.den, pc)?;
    if dl.inner.deg() > 0 {
        return Err(Error::domain("pole inside the annulus"));
    }
    let mut rest = f.num.clone();
    let mut holes = Vec::with_capacity(pc.holes.len());
    for (h, g) in dl.holes.iter().enumerate() {
        let k = g.deg();
        if k == 0 {
            holes.push(Rat::poly(Poly::zero(f.field())));
            continue;
        }
        let mut w = dl.out.clone();
        for (j, o) in dl.holes.iter().enumerate() {
            if j != h {
                w = w.mul(o);
            }
        }
        // Columns x^j·w mod g; solve for B with B·w ≡ num (mod g).
        let mut cols = Vec::with_capacity(k);
        let mut xw = w.divrem(g)?.1;
        for _ in 0..k {
            cols.push(xw.clone());
            xw = xw.mul(&Poly::x(f.field())).divrem(g)?.1;
        }
        let a = (0..k).map(|i| cols.iter().map(|c| c.coeff(i)).collect()).collect();
        let rhs = f.num.divrem(g)?.1;
        let b = solve_linear(a, (0..k).map(|i| rhs.coeff(i)).collect())?;
        let b = Poly::new(f.field(), b);
        rest = rest.sub(&b.mul(&w));
        holes.push(Rat::new(b, g.clone())?);
    }
    let mut inner = rest;
    for g in &dl.holes {
        inner = exact_div(&inner, g)?;
    }
    Ok(MlSplit {
        piece: pc.clone(),
        outer: Rat::new(inner, dl.out)?,
        holes,
    })
}

fn hole_items(part: &Rat, c: &Elem, items: &mut Vec<(String, String)>) {
    if part.is_zero() {
        return;
    }
    let k = part.den.deg();
    let g = part.den.shift(c);
    let pure = g.coeffs()[..k].iter().all(|a| a.is_zero());
    if !pure {
        items.push(("1".to_string(), part.to_string()));
        return;
    }
    let base = if c.is_zero() { "x".to_string() } else { format!("({})", Poly::linear(c)) };
    let b = part.num.shift(c);
    for (j, a) in b.coeffs().iter().enumerate().rev() {
        if !a.is_zero() {
            items.push((a.to_string(), format!("{base}^-{}", k - j)));
        }
    }
}

impl fmt::Display for MlSplit {
    /// The expansion `f0 + f1 + …` in powers of `x` and `x - c_h`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut items = Vec::new();
        if self.outer.is_poly() {
            let p = self.outer.num.scale(&self.outer.den.lc().inv().map_err(|_| fmt::Error)?);
            for (i, a) in p.coeffs().iter().enumerate().rev() {
                if !a.is_zero() {
                    let mono = match i {
                        0 => String::new(),
                        1 => "x".to_string(),
                        _ => format!("x^{i}"),
                    };
                    items.push((a.to_string(), mono));
                }
            }
        } else if !self.outer.is_zero() {
            items.push(("1".to_string(), self.outer.to_string()));
        }
        for (part, d) in self.holes.iter().zip(&self.piece.holes) {
            hole_items(part, &d.c, &mut items);
        }
        write!(f, "{}", fmt_terms(items.into_iter()))
    }
}

/// `|f^l| = |c|` and `Ptilde` kills the residue of `f^l / c` on the annulus.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub l: i64,
    pub c: Elem,
    /// Coefficients over the residue field, lowest degree first.
    pub ptilde: Vec<Res>,
    pub res: Fq,
    pub very_strong: bool,
}

fn fmt_res_signed(fq: &Fq, a: &Res) -> String {
    if fq.is_prime_field(a) && a.0[0] > fq.p / 2 {
        format!("-{}", fq.p - a.0[0])
    } else {
        fq.fmt_res(a)
    }
}

impl Certificate {
    pub fn ptilde_string(&self) -> String {
        let items = self.ptilde.iter().enumerate().rev().filter(|(_, a)| !self.res.is_zero(a)).map(|(i, a)| {
            let mono = match i {
                0 => String::new(),
                1 => "xi".to_string(),
                _ => format!("xi^{i}"),
            };
            (fmt_res_signed(&self.res, a), mono)
        });
        fmt_terms(items)
    }

    /// Checks `|f(x)^l| = |c|` and `Ptilde(res(f(x)^l / c)) = 0` at `x`.
    pub fn holds_at(&self, f: &AnnulusFunction, x: &Elem) -> Result<bool> {
        let v = f.evaluate(x)?.pow(self.l as u64);
        let c = self.c.embed(v.field())?;
        let u = v.div(&c)?;
        if u.val() != Gamma::Fin(Rational64::zero()) {
            return Ok(false);
        }
        let rho = u.residue()?;
        // Residue fields agree when the sample field has the certificate's residue field.
        if rho.0.len() != self.ptilde[0].0.len() {
            return Err(Error::domain("sample residue field differs from the certificate's"));
        }
        let mut acc = self.res.zero();
        for a in self.ptilde.iter().rev() {
            acc = self.res.add(&self.res.mul(&acc, &rho), a);
        }
        Ok(self.res.is_zero(&acc))
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{l={},c={},Ptilde={}", self.l, self.c, self.ptilde_string())?;
        if self.very_strong {
            write!(f, ",very_strong")?;
        }
        write!(f, "}}")
    }
}

fn res_poly_mul(fq: &Fq, a: &[Res], b: &[Res]) -> Vec<Res> {
    let mut out = vec![fq.zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = fq.add(&out[i + j], &fq.mul(x, y));
        }
    }
    out
}

/// `f = P · Π p_i^{n_i} · E` with `E` a certified strong unit.
#[derive(Clone, Debug)]
pub struct MlDecomposition {
    pub p: Poly,
    pub n: Vec<i64>,
    pub e: AnnulusFunction,
    pub cert: Certificate,
}

impl fmt::Display for MlDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n: Vec<String> = self.n.iter().map(|k| k.to_string()).collect();
        write!(f, "P={}; n=[{}]; E={}; cert={}", self.p, n.join(","), self.e.expansion(), self.cert)
    }
}

#[derive(Clone, Debug)]
pub enum StrongUnit {
    Certified(Certificate),
    Refuted(String),
}

/// `P = p · q · E` with `E` a strong unit on `{|p| = ε}`.
#[derive(Clone, Debug)]
pub struct HoleReduction {
    pub q: Poly,
    pub e: AnnulusFunction,
    pub cert: Certificate,
}

#[derive(Clone, Debug)]
pub struct AnnulusFunction {
    pub host: Annulus,
    pub f: Rat,
}

impl AnnulusFunction {
    /// Checks that `f` has no pole on the host.
    pub fn new(host: Annulus, f: Rat) -> Result<AnnulusFunction> {
        let l = host.splitting_field();
        let den = f.den.embed(&l)?;
        for pc in host.model(&l)? {
            if locate(&den, &pc)?.inner.deg() > 0 {
                return Err(Error::domain("pole inside the annulus"));
            }
        }
        Ok(AnnulusFunction { host, f })
    }

    pub fn evaluate(&self, x: &Elem) -> Result<Elem> {
        if !self.host.contains(x)? {
            return Err(Error::domain("not in domain"));
        }
        self.f.eval(x)
    }

    fn pieces(&self) -> Result<(FieldRef, Vec<LinearPiece>)> {
        let l = self.host.splitting_field();
        let pieces = self.host.model(&l)?;
        if pieces.is_empty() {
            return Err(Error::domain("empty annulus"));
        }
        Ok((l, pieces))
    }

    /// Mittag-Leffler parts on each linear piece of the host over its
    /// splitting field. A linear host has a single piece.
    pub fn ml_split(&self) -> Result<Vec<MlSplit>> {
        let (l, pieces) = self.pieces()?;
        let f = self.f.embed(&l)?;
        pieces.iter().map(|pc| ml_on_piece(&f, pc)).collect()
    }

    /// The Mittag-Leffler expansion when the host is one linear piece over
    /// K, otherwise the rational function itself.
    pub fn expansion(&self) -> String {
        match self.ml_split() {
            Ok(parts) if parts.len() == 1 && parts[0].outer.field() == self.f.field() => parts[0].to_string(),
            _ => self.f.to_string(),
        }
    }

    /// The same function on a sub-annulus.
    pub fn rehost(&self, sub: &Annulus) -> Result<AnnulusFunction> {
        let (a, b) = (self.host.splitting_field(), sub.splitting_field());
        let l = if a.contains(&b) {
            a
        } else if b.contains(&a) {
            b
        } else {
            return Err(Error::domain("no common splitting field"));
        };
        let big = self.host.model(&l)?;
        for s in sub.model(&l)? {
            let mut inside = false;
            for h in &big {
                if !s.outer.subset(&h.outer)? {
                    continue;
                }
                let mut ok = true;
                for d in &h.holes {
                    if !d.meets(&s.outer)? {
                        continue;
                    }
                    let mut covered = false;
                    for e in &s.holes {
                        if d.subset(e)? {
                            covered = true;
                            break;
                        }
                    }
                    ok &= covered;
                }
                if ok {
                    inside = true;
                    break;
                }
            }
            if !inside {
                return Err(Error::domain(format!("{sub} is not contained in {}", self.host)));
            }
        }
        Ok(AnnulusFunction {
            host: sub.clone(),
            f: self.f.clone(),
        })
    }

    /// Points of the host in its splitting field, drawn deterministically.
    pub fn samples(&self, n: usize, seed: u64) -> Result<Vec<Elem>> {
        let (l, pieces) = self.pieces()?;
        let mut centers = Vec::new();
        for pc in &pieces {
            centers.push(pc.outer.c.clone());
            centers.extend(pc.holes.iter().map(|d| d.c.clone()));
        }
        let mut rng = sample::rng(seed);
        let mut out = Vec::new();
        for _ in 0..64 {
            for x in sample::points(&l, &centers, 4 * n, &mut rng) {
                if self.host.contains(&x)? && !self.f.den.eval_in(&x)?.is_zero() {
                    out.push(x);
                    if out.len() == n {
                        return Ok(out);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Strong-unit certificate from the constants `κ` of the linear pieces.
    /// Fails unless `f` has no zeros and no hole exponents on the host.
    pub fn certify(&self) -> Result<StrongUnit> {
        let (l, pieces) = self.pieces()?;
        let f = self.f.embed(&l)?;
        let mut kappas = Vec::with_capacity(pieces.len());
        for pc in &pieces {
            let pf = factor_on_piece(&f, pc)?;
            if pf.p.deg() > 0 {
                return Ok(StrongUnit::Refuted(format!("zeros in the annulus: {}", pf.p)));
            }
            if pf.n.iter().any(|&k| k != 0) {
                return Ok(StrongUnit::Refuted(format!(
                    "order {:?} at the holes of {}",
                    pf.n,
                    pc.to_annulus()
                )));
            }
            kappas.push(pf.kappa);
        }
        let v = kappas[0].val().fin().ok_or_else(|| Error::precision("insufficient precision"))?;
        for k in &kappas[1..] {
            if k.val() != Gamma::Fin(v) {
                return Ok(StrongUnit::Refuted(format!(
                    "|f| takes valuations {} and {} on different pieces",
                    v,
                    k.val()
                )));
            }
        }
        let k = self.f.field();
        let ve = v * k.e as i64;
        let ell = *ve.denom();
        if ell > MAX_L {
            return Err(Error::unknown("unknown within search bounds"));
        }
        let c = Elem::uniformizer(k).powi((ve * ell).to_integer())?;
        let cl = c.embed(&l)?;
        let fq = l.res.clone();
        let mut roots: Vec<Res> = Vec::new();
        for kap in &kappas {
            let rho = kap.pow(ell as u64).div(&cl)?.residue()?;
            if !roots.contains(&rho) {
                roots.push(rho);
            }
        }
        let very_strong = ell == 1 && v.is_zero() && roots.iter().all(|r| *r == fq.one());
        let mut ptilde = vec![fq.one()];
        let mut done: Vec<Res> = Vec::new();
        for rho in &roots {
            if done.contains(rho) {
                continue;
            }
            let mut r = rho.clone();
            loop {
                done.push(r.clone());
                ptilde = res_poly_mul(&fq, &ptilde, &[fq.neg(&r), fq.one()]);
                r = fq.pow(&r, k.q());
                if r == *rho {
                    break;
                }
            }
        }
        let bound = (k.q() * k.q() - 1) as usize;
        if ptilde.len() - 1 > bound {
            return Err(Error::unknown("unknown within search bounds"));
        }
        Ok(StrongUnit::Certified(Certificate {
            l: ell,
            c,
            ptilde,
            res: fq,
            very_strong,
        }))
    }

    /// `f = P · Π p_i^{n_i} · E` with the `p_i` the hole polynomials of the host.
    pub fn unit_factor(&self) -> Result<MlDecomposition> {
        if self.f.is_zero() {
            return Err(Error::domain("zero function"));
        }
        let (l, pieces) = self.pieces()?;
        let f = self.f.embed(&l)?;
        let mut hole_discs = Vec::with_capacity(self.host.holes.len());
        let mut hole_polys = Vec::with_capacity(self.host.holes.len());
        for h in &self.host.holes {
            hole_discs.push(ball_discs(h, &l)?);
            hole_polys.push(h.p.embed(&l)?);
        }
        let mut n: Vec<Option<i64>> = vec![None; self.host.holes.len()];
        let mut pl = Poly::one(&l);
        for pc in &pieces {
            let pf = factor_on_piece(&f, pc)?;
            pl = pl.mul(&pf.p);
            for (d, nd) in pc.holes.iter().zip(&pf.n) {
                let mut owner = None;
                'find: for (i, ds) in hole_discs.iter().enumerate() {
                    for dd in ds {
                        if d.subset(dd)? {
                            owner = Some(i);
                            break 'find;
                        }
                    }
                }
                let i = owner.ok_or_else(|| Error::domain("goodness required: hole disc without a hole polynomial"))?;
                let m = disc_factor(&hole_polys[i], d)?.0.deg() as i64;
                if m == 0 || nd % m != 0 {
                    return Err(Error::domain("goodness required"));
                }
                match n[i] {
                    Some(k) if k != nd / m => return Err(Error::domain("goodness required")),
                    _ => n[i] = Some(nd / m),
                }
            }
        }
        let k = self.f.field();
        let coeffs: Option<Vec<Elem>> = pl.coeffs().iter().map(|a| a.restrict(k)).collect();
        let p = Poly::new(k, coeffs.ok_or_else(|| Error::precision("P does not descend to the base field at this precision"))?);
        let n: Vec<i64> = n.into_iter().map(|k| k.unwrap_or(0)).collect();
        let mut num = self.f.num.clone();
        let mut den_factors = vec![p.clone()];
        for (h, &k) in self.host.holes.iter().zip(&n) {
            let pk = h.p.pow(k.unsigned_abs() as usize);
            if k < 0 {
                num = num.mul(&pk);
            } else if k > 0 {
                den_factors.push(pk);
            }
        }
        let mut den = self.f.den.clone();
        for g in den_factors {
            match exact_div(&num, &g) {
                Ok(q) if g.deg() > 0 => num = q,
                _ => den = den.mul(&g),
            }
        }
        let e = AnnulusFunction {
            host: self.host.clone(),
            f: Rat::new(num, den)?,
        };
        let cert = match e.certify()? {
            StrongUnit::Certified(c) => c,
            StrongUnit::Refuted(why) => return Err(Error::domain(format!("goodness required: {why}"))),
        };
        Ok(MlDecomposition { p, n, e, cert })
    }

    pub fn is_strong_unit(&self) -> Result<StrongUnit> {
        let dec = self.unit_factor()?;
        if dec.p.deg() > 0 {
            return Ok(StrongUnit::Refuted(format!("f vanishes at the roots of {}", dec.p)));
        }
        if dec.n.iter().all(|&k| k == 0) {
            return Ok(StrongUnit::Certified(dec.cert));
        }
        let mut why = format!(
            "f = {}·E with n={:?}, and a nonzero power of hole polynomials is not a strong unit",
            self.host
                .holes
                .iter()
                .map(|h| format!("({})", h.p))
                .collect::<Vec<_>>()
                .join("·"),
            dec.n
        );
        if let Some((a, b)) = self.residue_witness()? {
            why.push_str(&format!("; samples {a} and {b}"));
        }
        Ok(StrongUnit::Refuted(why))
    }

    /// Two samples where `|f|` or the residue of `f / f(x0)` differ.
    fn residue_witness(&self) -> Result<Option<(Elem, Elem)>> {
        let pts = self.samples(32, 0)?;
        let Some(x0) = pts.first() else { return Ok(None) };
        let f0 = self.f.eval(x0)?;
        for x in &pts[1..] {
            let q = self.f.eval(x)?.div(&f0)?;
            if q.val() != Gamma::Fin(Rational64::zero()) || q.residue()? != q.field().res.one() {
                return Ok(Some((x0.clone(), x.clone())));
            }
        }
        Ok(None)
    }
}

/// Evaluation at a point of an extension of the coefficient field.
pub trait EvalIn {
    fn eval_in(&self, x: &Elem) -> Result<Elem>;
}

impl EvalIn for Poly {
    fn eval_in(&self, x: &Elem) -> Result<Elem> {
        Ok(self.embed(x.field())?.eval(x))
    }
}

/// Splits `P = p · q · E` for `P` with all roots in the hole `{|p| < ε}`
/// (`hole.open`), with `E` a strong unit on `{|p| = ε}`.
pub fn hole_reduce(big: &Poly, hole: &Ball, split: Option<FieldRef>) -> Result<HoleReduction> {
    let k = big.field().clone();
    let thin = Annulus {
        field: k.clone(),
        outer: vec![Ball {
            open: false,
            ..hole.clone()
        }],
        holes: vec![hole.clone()],
        split,
    };
    let l = thin.splitting_field();
    let bl = big.embed(&l)?;
    let mut inside = 0;
    for d in ball_discs(hole, &l)? {
        inside += disc_factor(&bl, &d)?.0.deg();
    }
    if inside < big.deg() || big.deg() < hole.p.deg() {
        return Err(Error::domain("roots not in hole"));
    }
    let (q, _) = big.divrem(&hole.p)?;
    let e = AnnulusFunction::new(thin, Rat::new(big.clone(), hole.p.mul(&q))?)?;
    let cert = match e.certify()? {
        StrongUnit::Certified(c) => c,
        StrongUnit::Refuted(why) => return Err(Error::domain(format!("no strong unit: {why}"))),
    };
    Ok(HoleReduction { q, e, cert })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annuli::parse_annulus;
    use crate::poly::parse_poly;
    use crate::vfield::{parse_elem, Field};

    fn q3() -> FieldRef {
        Field::qp(3, 12).unwrap()
    }

    fn fun(host: &str, f: &str, k: &FieldRef) -> AnnulusFunction {
        AnnulusFunction::new(parse_annulus(host, k).unwrap(), parse_rational(f, k).unwrap()).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let k = q3();
        let one = parse_elem("1", &k).unwrap();
        assert_eq!(fun("|x| = (0)", "x+3/x", &k).evaluate(&one).unwrap().to_string(), "4");
        let v = fun("|x| <= (0)", "1/(1-3*x)", &k).evaluate(&one).unwrap();
        assert!(v.eq_prec(&Elem::from_ratio(&k, -1, 2).unwrap()));
        let three = parse_elem("3", &k).unwrap();
        assert_eq!(fun("|x| < (0)", "x", &k).evaluate(&three).unwrap().to_string(), "3");
        let e = fun("|x| < (0)", "x", &k).evaluate(&one).unwrap_err();
        assert_eq!(e, Error::domain("not in domain"));
        let e = AnnulusFunction::new(parse_annulus("|x| <= (0)", &k).unwrap(), parse_rational("1/(x-3)", &k).unwrap());
        assert!(e.is_err());
    }

    #[test]
    fn ml_split_examples() {
        let k = q3();
        let parts = fun("|x| = (0)", "x+3/x", &k).ml_split().unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].outer.to_string(), "x");
        assert_eq!(parts[0].holes[0].to_string(), "(3)/(x)");
        let sq = fun("|x| = (0)", "(x+3/x)^2", &k).ml_split().unwrap();
        assert_eq!(sq[0].outer.to_string(), "x^2+6");
        assert_eq!(sq[0].to_string(), "x^2+6+9*x^-2");
        let g = fun("|x| <= (0) && |x| >= (1)", "5*x*(3/x)", &k).ml_split().unwrap();
        assert_eq!(g[0].outer.to_string(), "15");
        assert!(g[0].holes[0].is_zero());
    }

    #[test]
    fn ml_split_with_a_pole_outside() {
        let k = q3();
        let f = fun("|x| <= (0) && |x-1| >= (1)", "1/(x-1) + 1/(x-10) + 1/(x-28) + x/(x-1/3)", &k);
        let parts = f.ml_split().unwrap();
        for x in f.samples(40, 3).unwrap() {
            let mut s = parts[0].outer.eval(&x).unwrap();
            for h in &parts[0].holes {
                s = s.add(&h.eval(&x).unwrap());
            }
            assert!(s.eq_prec(&f.evaluate(&x).unwrap()), "at {x}");
        }
    }

    #[test]
    fn unit_factor_examples() {
        let k = q3();
        let d = fun("|x| = (0)", "(x^2-3)/x", &k).unit_factor().unwrap();
        assert_eq!(d.to_string(), "P=1; n=[1]; E=1-3*x^-2; cert={l=1,c=1,Ptilde=xi-1,very_strong}");
        let d = fun("|x| <= (0)", "x", &k).unit_factor().unwrap();
        assert_eq!(d.to_string(), "P=x; n=[]; E=1; cert={l=1,c=1,Ptilde=xi-1,very_strong}");
        let d = fun("|x| <= |3|", "x-1", &k).unit_factor().unwrap();
        assert_eq!(d.p.to_string(), "1");
        assert_eq!(d.e.expansion(), "x-1");
        assert_eq!(d.cert.ptilde_string(), "xi+1");
        assert!(!d.cert.very_strong);
    }

    #[test]
    fn unit_factor_identity_at_samples() {
        let k = q3();
        let f = fun("|x| <= (0) && |x^2-3| >= (2); split ext=Q3[y^2-3]", "(x-1)*(x^2-3)^2*(x-7)/(x^2+24)", &k);
        let d = f.unit_factor().unwrap();
        assert_eq!(d.p.to_string(), "x^2-8*x+7");
        for x in f.samples(60, 1).unwrap() {
            let mut rhs = d.p.eval_in(&x).unwrap().mul(&d.e.evaluate(&x).unwrap());
            for (h, &n) in f.host.holes.iter().zip(&d.n) {
                rhs = rhs.mul(&h.p.eval_in(&x).unwrap().powi(n).unwrap());
            }
            assert!(rhs.eq_prec(&f.evaluate(&x).unwrap()), "at {x}");
            assert!(d.cert.holds_at(&d.e, &x).unwrap(), "certificate at {x}");
        }
    }

    #[test]
    fn strong_unit_examples() {
        let k = q3();
        match fun("|x| <= (0)", "1+3*x", &k).is_strong_unit().unwrap() {
            StrongUnit::Certified(c) => assert_eq!(c.to_string(), "{l=1,c=1,Ptilde=xi-1,very_strong}"),
            r => panic!("{r:?}"),
        }
        assert!(matches!(fun("|x| = (0)", "x", &k).is_strong_unit().unwrap(), StrongUnit::Refuted(_)));
        match fun("|x-1| < (0)", "x", &k).is_strong_unit().unwrap() {
            StrongUnit::Certified(c) => assert!(c.very_strong),
            r => panic!("{r:?}"),
        }
        match fun("|x^2+2| < (0)", "3*x", &k).is_strong_unit().unwrap() {
            StrongUnit::Certified(c) => assert_eq!(c.to_string(), "{l=1,c=3,Ptilde=xi^2-1}"),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn ramified_certificate_needs_a_power() {
        let k = q3();
        let host = parse_annulus("|x^2-3| <= (2); split ext=Q3[y^2-3]", &k).unwrap();
        let f = AnnulusFunction::new(host, parse_rational("x", &k).unwrap()).unwrap();
        let d = f.unit_factor().unwrap();
        assert_eq!(d.p.to_string(), "1");
        assert_eq!(d.cert.to_string(), "{l=2,c=3,Ptilde=xi-1}");
        let host = parse_annulus("|x| <= (1/2); split ext=Q3[y^2-3]", &k).unwrap();
        let f = AnnulusFunction::new(host, parse_rational("x^2-3*x", &k).unwrap()).unwrap();
        assert_eq!(f.unit_factor().unwrap().p.to_string(), "x^2-3*x");
    }

    #[test]
    fn hole_reduce_examples() {
        let k = q3();
        let hole = |p: &str| Ball {
            p: parse_poly(p, &k, "x").unwrap(),
            q: Rational64::zero(),
            open: true,
        };
        let r = hole_reduce(&parse_poly("x-3", &k, "x").unwrap(), &hole("x"), None).unwrap();
        assert_eq!((r.q.to_string(), r.e.expansion()), ("1".to_string(), "1-3*x^-1".to_string()));
        let r = hole_reduce(&parse_poly("x", &k, "x").unwrap(), &hole("x"), None).unwrap();
        assert_eq!((r.q.to_string(), r.e.expansion()), ("1".to_string(), "1".to_string()));
        let r = hole_reduce(&parse_poly("x^2-3", &k, "x").unwrap(), &hole("x"), None).unwrap();
        assert_eq!((r.q.to_string(), r.e.expansion()), ("x".to_string(), "1-3*x^-2".to_string()));
        assert!(r.cert.very_strong);
        let e = hole_reduce(&parse_poly("x-1", &k, "x").unwrap(), &hole("x"), None).unwrap_err();
        assert_eq!(e, Error::domain("roots not in hole"));
    }

    #[test]
    fn rehost_keeps_values() {
        let k = q3();
        let f = fun("|x| = (0)", "x+3/x", &k);
        let sub = parse_annulus("|x-1| <= (1)", &k).unwrap();
        let g = f.rehost(&sub).unwrap();
        for x in g.samples(20, 2).unwrap() {
            assert!(g.evaluate(&x).unwrap().eq_prec(&f.evaluate(&x).unwrap()));
        }
        assert!(f.rehost(&parse_annulus("|x| <= (0)", &k).unwrap()).is_err());
    }
}
