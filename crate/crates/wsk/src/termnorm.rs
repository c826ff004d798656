//! One-variable terms built from constants, `x`, `+`, `*`, `inv` and declared
//! separated power series, and their normalization into linear annuli on
//! which the term equals `R · E` with `R` rational and `E ≡ 1` a unit.
//!
//! Terms are total: `inv(0) = 0`, and a series applied outside its polydisc
//! (`|ξ| > 1` or `|ρ| ≥ 1` in some slot) is 0.

use crate::anfun::{ml_on_piece, piece_form, Rat};
use crate::annuli::{cover_by_sign, val_meets, AbsCmp, Disc, LinearPiece};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::poly::{root_clusters, Poly};
use crate::sample;
use crate::sepseries::{parse_series, Caps, SepSeries};
use crate::vfield::{eval_elem, Elem, FieldRef, Gamma};
use num_rational::Rational64;
use num_traits::Zero;
use std::collections::BTreeMap;
use std::fmt;

/// Largest number of pieces any intermediate cover may have.
pub const MAX_PIECES: usize = 4096;

#[derive(Clone, Debug)]
pub enum Term {
    Const(Elem),
    Var,
    Add(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Inv(Box<Term>),
    Apply(String, Vec<Term>),
}

/// Declared series by name. Slots `0..m` are ξ-slots, the rest ρ-slots.
#[derive(Clone, Debug, Default)]
pub struct Symbols {
    map: BTreeMap<String, SepSeries>,
}

const RESERVED: [&str; 6] = ["x", "inv", "O", "t", "y", "z"];

impl Symbols {
    pub fn new() -> Symbols {
        Symbols::default()
    }

    pub fn insert(&mut self, name: &str, s: SepSeries) -> Result<()> {
        let ok = name.chars().next().is_some_and(|c| c.is_alphabetic())
            && name.chars().all(|c| c.is_alphanumeric() || c == '_')
            && !RESERVED.contains(&name);
        if !ok {
            return Err(Error::parse(0, format!("'{name}' cannot name a series")));
        }
        self.map.insert(name.to_string(), s);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&SepSeries> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &SepSeries)> {
        self.map.iter()
    }

    /// Reads `F=x1+r1` or `F[2,1]=x1*x2+r1`, where `[m,n]` fixes the
    /// number of ξ and ρ slots when the series does not mention them all.
    pub fn declare(&mut self, decl: &str, field: &FieldRef, caps: Caps) -> Result<()> {
        let (lhs, rhs) = decl
            .split_once('=')
            .ok_or_else(|| Error::parse(0, "expected NAME=SERIES"))?;
        let off = lhs.len() + 1;
        let lhs = lhs.trim();
        let (name, slots) = match lhs.split_once('[') {
            Some((n, rest)) => {
                let inner = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(lhs.len(), "expected ']'"))?;
                let (m, k) = inner
                    .split_once(',')
                    .ok_or_else(|| Error::parse(n.len() + 1, "expected [m,n]"))?;
                let num = |s: &str| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(n.len() + 1, format!("bad slot count '{s}'")))
                };
                (n.trim(), (num(m)?, num(k)?))
            }
            None => (lhs, (0, 0)),
        };
        let s = parse_series(rhs, field, caps, slots).map_err(|e| e.shift(off))?;
        self.insert(name, s)
    }
}

fn has_var(e: &Expr) -> bool {
    match e {
        Expr::Var(v, _) => v == "x",
        Expr::Num(_) => false,
        Expr::Call(name, args, _) => name != "O" || args.iter().any(has_var),
        Expr::Neg(a) | Expr::Pow(a, _) => has_var(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => has_var(a) || has_var(b),
    }
}

fn term_from_expr(e: &Expr, syms: &Symbols, field: &FieldRef) -> Result<Term> {
    if !has_var(e) {
        return Ok(Term::Const(eval_elem(e, field)?));
    }
    let rec = |a: &Expr| term_from_expr(a, syms, field);
    let minus_one = || Term::Const(Elem::from_int(field, -1));
    Ok(match e {
        Expr::Var(..) => Term::Var,
        Expr::Neg(a) => Term::Mul(Box::new(minus_one()), Box::new(rec(a)?)),
        Expr::Add(a, b) => Term::Add(Box::new(rec(a)?), Box::new(rec(b)?)),
        Expr::Sub(a, b) => {
            let nb = match rec(b)? {
                Term::Const(c) => Term::Const(c.neg()),
                t => Term::Mul(Box::new(minus_one()), Box::new(t)),
            };
            Term::Add(Box::new(rec(a)?), Box::new(nb))
        }
        Expr::Mul(a, b) => Term::Mul(Box::new(rec(a)?), Box::new(rec(b)?)),
        Expr::Div(a, b) => {
            let ib = match rec(b)? {
                Term::Const(c) if !c.is_zero() => Term::Const(c.inv()?),
                t => Term::Inv(Box::new(t)),
            };
            Term::Mul(Box::new(rec(a)?), Box::new(ib))
        }
        Expr::Pow(a, k) => {
            if !k.is_integer() {
                return Err(Error::parse(a.pos(), "exponent must be an integer"));
            }
            let k = k.to_integer();
            let base = rec(a)?;
            let mut t = Term::Const(Elem::one(field));
            for i in 0..k.unsigned_abs() {
                t = if i == 0 {
                    base.clone()
                } else {
                    Term::Mul(Box::new(t), Box::new(base.clone()))
                };
            }
            if k < 0 {
                Term::Inv(Box::new(t))
            } else {
                t
            }
        }
        Expr::Call(name, args, pos) => {
            if name == "inv" {
                if args.len() != 1 {
                    return Err(Error::parse(*pos, "inv takes one argument"));
                }
                return Ok(Term::Inv(Box::new(rec(&args[0])?)));
            }
            if name == "O" {
                return Err(Error::parse(*pos, "O(...) is not allowed in a term"));
            }
            let s = syms
                .get(name)
                .ok_or_else(|| Error::parse(*pos, format!("undeclared symbol '{name}'")))?;
            if args.len() != s.nvars() {
                return Err(Error::parse(
                    *pos,
                    format!("{name} takes {} arguments, found {}", s.nvars(), args.len()),
                ));
            }
            Term::Apply(name.clone(), args.iter().map(rec).collect::<Result<_>>()?)
        }
        Expr::Num(_) => unreachable!("constants are folded above"),
    })
}

/// Parses a term in `x` over `field`. Series names must be declared.
pub fn parse_term(text: &str, syms: &Symbols, field: &FieldRef) -> Result<Term> {
    term_from_expr(&parse_expr(text)?, syms, field)
}

fn simple_const(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_digit())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => {
                let s = c.to_string();
                if simple_const(&s) {
                    write!(f, "{s}")
                } else {
                    write!(f, "({s})")
                }
            }
            Term::Var => write!(f, "x"),
            Term::Add(a, b) => write!(f, "({a} + {b})"),
            Term::Mul(a, b) => write!(f, "({a} * {b})"),
            Term::Inv(a) => write!(f, "inv({a})"),
            Term::Apply(n, args) => {
                let a: Vec<String> = args.iter().map(|t| t.to_string()).collect();
                write!(f, "{n}({})", a.join(", "))
            }
        }
    }
}

fn series_at(s: &SepSeries, pt: &[Elem], l: &FieldRef) -> Result<Elem> {
    let mut acc = Elem::zero(l);
    for (e, c) in s.terms() {
        let mut t = c.embed(l)?;
        for (i, a) in pt.iter().enumerate() {
            let k = e.get(i);
            if k > 0 {
                t = t.mul(&a.pow(k as u64));
            }
        }
        acc = acc.add(&t);
    }
    Ok(acc)
}

impl Term {
    /// The syntax tree, e.g. `inv(add(var, const -1))`.
    pub fn tree(&self) -> String {
        match self {
            Term::Const(c) => format!("const {c}"),
            Term::Var => "var".to_string(),
            Term::Add(a, b) => format!("add({}, {})", a.tree(), b.tree()),
            Term::Mul(a, b) => format!("mul({}, {})", a.tree(), b.tree()),
            Term::Inv(a) => format!("inv({})", a.tree()),
            Term::Apply(n, args) => {
                let a: Vec<String> = args.iter().map(|t| t.tree()).collect();
                format!("apply({n}, [{}])", a.join(", "))
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Const(_) | Term::Var => 0,
            Term::Add(a, b) | Term::Mul(a, b) => 1 + a.depth().max(b.depth()),
            Term::Inv(a) => 1 + a.depth(),
            Term::Apply(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    /// Value at `x`, in the field of `x`.
    pub fn eval(&self, x: &Elem, syms: &Symbols) -> Result<Elem> {
        let l = x.field();
        match self {
            Term::Const(c) => c.embed(l),
            Term::Var => Ok(x.clone()),
            Term::Add(a, b) => Ok(a.eval(x, syms)?.add(&b.eval(x, syms)?)),
            Term::Mul(a, b) => Ok(a.eval(x, syms)?.mul(&b.eval(x, syms)?)),
            Term::Inv(a) => {
                let v = a.eval(x, syms)?;
                if !v.is_zero() {
                    v.inv()
                } else if v.is_exact() {
                    Ok(Elem::zero(l))
                } else {
                    Err(Error::precision("inverse of a value that vanishes at precision"))
                }
            }
            Term::Apply(name, args) => {
                let s = syms
                    .get(name)
                    .ok_or_else(|| Error::domain(format!("undeclared symbol '{name}'")))?;
                let mut pt = Vec::with_capacity(args.len());
                for (i, a) in args.iter().enumerate() {
                    let v = a.eval(x, syms)?;
                    if !val_meets(&v, Rational64::zero(), i >= s.m)? {
                        return Ok(Elem::zero(l));
                    }
                    pt.push(v);
                }
                series_at(s, &pt, l)
            }
        }
    }
}

/// `κ · num/den · Π (x - c)^k` with `num`, `den` monic.
#[derive(Clone, Debug)]
pub struct RForm {
    pub kappa: Elem,
    pub num: Poly,
    pub den: Poly,
    pub powers: Vec<(Elem, i64)>,
}

impl RForm {
    fn constant(c: Elem) -> RForm {
        let one = Poly::one(c.field());
        RForm {
            kappa: c,
            num: one.clone(),
            den: one,
            powers: Vec::new(),
        }
    }

    fn var(l: &FieldRef) -> RForm {
        RForm {
            kappa: Elem::one(l),
            num: Poly::x(l),
            den: Poly::one(l),
            powers: Vec::new(),
        }
    }

    pub fn mul(&self, o: &RForm) -> RForm {
        let mut powers = self.powers.clone();
        for (c, k) in &o.powers {
            match powers.iter_mut().find(|(d, _)| d.eq_prec(c)) {
                Some(p) => p.1 += k,
                None => powers.push((c.clone(), *k)),
            }
        }
        powers.retain(|p| p.1 != 0);
        RForm {
            kappa: self.kappa.mul(&o.kappa),
            num: self.num.mul(&o.num),
            den: self.den.mul(&o.den),
            powers,
        }
    }

    pub fn inv(&self) -> Result<RForm> {
        Ok(RForm {
            kappa: self.kappa.inv()?,
            num: self.den.clone(),
            den: self.num.clone(),
            powers: self.powers.iter().map(|(c, k)| (c.clone(), -k)).collect(),
        })
    }

    pub fn to_rat(&self) -> Result<Rat> {
        let mut top = self.num.scale(&self.kappa);
        let mut bottom = self.den.clone();
        for (c, k) in &self.powers {
            let lin = Poly::linear(c).pow(k.unsigned_abs() as usize);
            if *k > 0 {
                top = top.mul(&lin);
            } else {
                bottom = bottom.mul(&lin);
            }
        }
        Rat::new(top, bottom)
    }

    pub fn eval(&self, x: &Elem) -> Result<Elem> {
        self.to_rat()?.eval(x)
    }
}

fn has_sum(s: &str) -> bool {
    s.len() > 1 && s[1..].contains(['+', '-'])
}

impl fmt::Display for RForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut fs = Vec::new();
        if self.num.deg() > 0 {
            fs.push(self.num.to_string());
        }
        for (c, k) in &self.powers {
            let base = if c.is_zero() {
                "x".to_string()
            } else {
                format!("({})", Poly::linear(c))
            };
            fs.push(if *k == 1 { base } else { format!("{base}^{k}") });
        }
        let alone = fs.len() == 1 && self.kappa.is_one() && self.den.deg() == 0;
        let wrap = |s: &str| {
            if !alone && has_sum(s) {
                format!("({s})")
            } else {
                s.to_string()
            }
        };
        let body = fs.iter().map(|s| wrap(s)).collect::<Vec<_>>().join("*");
        let kap = self.kappa.to_string();
        let head = if body.is_empty() {
            kap
        } else if self.kappa.is_one() {
            body
        } else if self.kappa.neg().is_one() {
            format!("-{body}")
        } else {
            format!("{}*{body}", wrap(&kap))
        };
        if self.den.deg() > 0 {
            let d = self.den.to_string();
            if has_sum(&d) {
                write!(f, "{head}/({d})")
            } else {
                write!(f, "{head}/{d}")
            }
        } else {
            write!(f, "{head}")
        }
    }
}

/// One piece of a normalized cover: on `piece`, off the exceptional set,
/// the term equals `value = R · E`. `R = None` is the zero function.
#[derive(Clone, Debug)]
pub struct NormPiece {
    pub piece: LinearPiece,
    pub value: Rat,
    pub r: Option<RForm>,
    pub e: Rat,
}

fn one_rat(l: &FieldRef) -> Rat {
    Rat::poly(Poly::one(l))
}

impl NormPiece {
    fn zero(piece: LinearPiece) -> NormPiece {
        let l = piece.outer.c.field().clone();
        NormPiece {
            piece,
            value: Rat::poly(Poly::zero(&l)),
            r: None,
            e: one_rat(&l),
        }
    }

    fn from_value(piece: LinearPiece, t: Rat) -> Result<NormPiece> {
        if t.is_zero() {
            return Ok(NormPiece::zero(piece));
        }
        let pf = piece_form(&t, &piece)?;
        let powers = piece
            .holes
            .iter()
            .zip(&pf.n)
            .filter(|(_, k)| **k != 0)
            .map(|(d, k)| (d.c.clone(), *k))
            .collect();
        Ok(NormPiece {
            r: Some(RForm {
                kappa: pf.kappa,
                num: pf.pnum,
                den: pf.pden,
                powers,
            }),
            e: pf.unit,
            value: t,
            piece,
        })
    }

    fn restrict(&self, piece: LinearPiece) -> NormPiece {
        NormPiece {
            piece,
            ..self.clone()
        }
    }

    /// `E` as a Laurent expansion on the piece when one exists.
    pub fn e_expansion(&self) -> String {
        match ml_on_piece(&self.e, &self.piece) {
            Ok(m) => m.to_string(),
            Err(_) => self.e.to_string(),
        }
    }

    pub fn r_string(&self) -> String {
        self.r.as_ref().map_or_else(|| "0".to_string(), |r| r.to_string())
    }
}

#[derive(Clone, Debug)]
pub struct NormalizedCover {
    pub field: FieldRef,
    pub exceptional: Vec<Elem>,
    pub pieces: Vec<NormPiece>,
}

const UNIT_CERT: &str = "{l=1,c=1,Ptilde=xi-1,very_strong}";

impl fmt::Display for NormalizedCover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.exceptional.iter().map(|e| e.to_string()).collect();
        writeln!(f, "S={{{}}}", s.join(", "))?;
        for (i, p) in self.pieces.iter().enumerate() {
            write!(
                f,
                "[{}] {}: R={}; E={}; cert={UNIT_CERT}",
                i + 1,
                p.piece.to_annulus(),
                p.r_string(),
                p.e_expansion()
            )?;
            if i + 1 < self.pieces.len() {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

struct Normalizer<'a> {
    l: FieldRef,
    syms: &'a Symbols,
    s: Vec<Elem>,
}

fn meet(u: &LinearPiece, ps: &[LinearPiece]) -> Result<Vec<LinearPiece>> {
    let mut out = Vec::new();
    for p in ps {
        if let Some(w) = u.intersect(p)? {
            out.push(w);
        }
    }
    Ok(out)
}

fn bound(n: usize) -> Result<()> {
    if n > MAX_PIECES {
        return Err(Error::unknown(format!("piece bound {MAX_PIECES} exceeded")));
    }
    Ok(())
}

fn refine_err(e: Error) -> Error {
    match e {
        Error::Precision(m) => Error::precision(format!("refine cover failed: {m}")),
        other => other,
    }
}

impl Normalizer<'_> {
    /// Linear pieces of `{|r| ⋈ 1}` and the points where they may be wrong.
    fn sign(&self, r: &Rat, cmp: AbsCmp) -> Result<(Vec<LinearPiece>, Vec<Elem>)> {
        let c = cover_by_sign(&r.num, &r.den, Rational64::zero(), cmp, &self.l)?;
        let mut out = Vec::new();
        for (a, _) in &c.pieces {
            out.extend(a.model(&self.l)?);
        }
        Ok((out, c.exceptional))
    }

    /// Located zeros of `p` inside `piece`.
    fn zeros_in(&mut self, p: &Poly, piece: &LinearPiece) -> Result<()> {
        if p.deg() == 0 {
            return Ok(());
        }
        for c in root_clusters(p)? {
            if c.depth.is_inf() && piece.contains(&c.a)? {
                self.s.push(c.a);
            }
        }
        Ok(())
    }

    fn node(&mut self, t: &Term) -> Result<Vec<NormPiece>> {
        let l = self.l.clone();
        let unit = LinearPiece {
            outer: Disc::unit(&l),
            holes: Vec::new(),
        };
        match t {
            Term::Const(c) => {
                if c.is_zero() {
                    return Ok(vec![NormPiece::zero(unit)]);
                }
                let c = c.embed(&l)?;
                Ok(vec![NormPiece {
                    piece: unit,
                    value: Rat::poly(Poly::constant(c.clone())),
                    r: Some(RForm::constant(c)),
                    e: one_rat(&l),
                }])
            }
            Term::Var => Ok(vec![NormPiece {
                piece: unit,
                value: Rat::poly(Poly::x(&l)),
                r: Some(RForm::var(&l)),
                e: one_rat(&l),
            }]),
            Term::Mul(a, b) => {
                let (pa, pb) = (self.node(a)?, self.node(b)?);
                let mut out = Vec::new();
                for x in &pa {
                    for y in &pb {
                        let Some(u) = x.piece.intersect(&y.piece)? else { continue };
                        out.push(match (&x.r, &y.r) {
                            (Some(rx), Some(ry)) => NormPiece {
                                piece: u,
                                value: x.value.mul(&y.value),
                                r: Some(rx.mul(ry)),
                                e: x.e.mul(&y.e),
                            },
                            _ => NormPiece::zero(u),
                        });
                    }
                }
                bound(out.len())?;
                Ok(out)
            }
            Term::Inv(a) => {
                let mut out = Vec::new();
                for x in self.node(a)? {
                    let Some(r) = &x.r else {
                        out.push(x);
                        continue;
                    };
                    self.zeros_in(&r.num, &x.piece)?;
                    out.push(NormPiece {
                        value: x.value.inv()?,
                        r: Some(r.inv()?),
                        e: x.e.inv()?,
                        piece: x.piece,
                    });
                }
                Ok(out)
            }
            Term::Add(a, b) => {
                let (pa, pb) = (self.node(a)?, self.node(b)?);
                let mut out = Vec::new();
                for x in &pa {
                    for y in &pb {
                        let Some(u) = x.piece.intersect(&y.piece)? else { continue };
                        let (rx, ry) = match (&x.r, &y.r) {
                            (None, _) => {
                                out.push(y.restrict(u));
                                continue;
                            }
                            (_, None) => {
                                out.push(x.restrict(u));
                                continue;
                            }
                            (Some(rx), Some(ry)) => (rx, ry),
                        };
                        self.add_on(u, x, y, rx, ry, &mut out)?;
                        bound(out.len())?;
                    }
                }
                Ok(out)
            }
            Term::Apply(name, args) => self.apply(name, args),
        }
    }

    /// Splits `u` by `|R1|` against `|R2|` and factors the sum on each part.
    fn add_on(
        &mut self,
        u: LinearPiece,
        x: &NormPiece,
        y: &NormPiece,
        rx: &RForm,
        ry: &RForm,
        out: &mut Vec<NormPiece>,
    ) -> Result<()> {
        let sum = x.value.add(&y.value);
        let q = rx.to_rat()?.div(&ry.to_rat()?)?;
        let (gt, sg) = self.sign(&q, AbsCmp::Gt)?;
        let (lt, sl) = self.sign(&q, AbsCmp::Lt)?;
        let gt = meet(&u, &gt)?;
        let lt = meet(&u, &lt)?;
        if gt.is_empty() || lt.is_empty() {
            let band_only = gt.is_empty() && lt.is_empty();
            let np = NormPiece::from_value(u, sum)?;
            if band_only {
                if let Some(r) = &np.r {
                    self.zeros_in(&r.num, &np.piece)?;
                }
            }
            out.push(np);
            return Ok(());
        }
        let (le, se) = self.sign(&q, AbsCmp::Le)?;
        let (ge, sf) = self.sign(&q, AbsCmp::Ge)?;
        for e in [sg, sl, se, sf] {
            self.s.extend(e);
        }
        for w in gt.into_iter().chain(lt) {
            out.push(NormPiece::from_value(w, sum.clone())?);
        }
        for a in meet(&u, &le)? {
            for b in &ge {
                if let Some(w) = a.intersect(b)? {
                    let np = NormPiece::from_value(w, sum.clone())?;
                    if let Some(r) = &np.r {
                        self.zeros_in(&r.num, &np.piece)?;
                    }
                    out.push(np);
                }
            }
        }
        Ok(())
    }

    fn apply(&mut self, name: &str, args: &[Term]) -> Result<Vec<NormPiece>> {
        let s = self
            .syms
            .get(name)
            .ok_or_else(|| Error::domain(format!("undeclared symbol '{name}'")))?
            .clone();
        let unit = LinearPiece {
            outer: Disc::unit(&self.l),
            holes: Vec::new(),
        };
        // Common refinement of the argument covers.
        let mut cur: Vec<(LinearPiece, Vec<NormPiece>)> = vec![(unit, Vec::new())];
        for a in args {
            let pa = self.node(a)?;
            let mut next = Vec::new();
            for (pc, vals) in &cur {
                for y in &pa {
                    if let Some(u) = pc.intersect(&y.piece)? {
                        let mut v = vals.clone();
                        v.push(y.clone());
                        next.push((u, v));
                    }
                }
            }
            bound(next.len())?;
            cur = next;
        }
        let mut out = Vec::new();
        for i in 0..args.len() {
            let (hold_cmp, fail_cmp) = if i < s.m {
                (AbsCmp::Le, AbsCmp::Gt)
            } else {
                (AbsCmp::Lt, AbsCmp::Ge)
            };
            let mut next = Vec::new();
            for (pc, vals) in cur {
                let Some(r) = &vals[i].r else {
                    next.push((pc, vals));
                    continue;
                };
                let rat = r.to_rat()?;
                let (hold, sh) = self.sign(&rat, hold_cmp).map_err(refine_err)?;
                let (fail, sf) = self.sign(&rat, fail_cmp).map_err(refine_err)?;
                let hold = meet(&pc, &hold)?;
                let fail = meet(&pc, &fail)?;
                if fail.is_empty() {
                    next.push((pc, vals));
                } else if hold.is_empty() {
                    out.push(NormPiece::zero(pc));
                } else {
                    self.s.extend(sh);
                    self.s.extend(sf);
                    out.extend(fail.into_iter().map(NormPiece::zero));
                    next.extend(hold.into_iter().map(|w| (w, vals.clone())));
                }
            }
            bound(next.len() + out.len())?;
            cur = next;
        }
        for (pc, vals) in cur {
            let ts: Vec<Rat> = vals.iter().map(|v| v.value.clone()).collect();
            let t = series_of_rats(&s, &ts, &self.l)?;
            out.push(NormPiece::from_value(pc, t)?);
        }
        Ok(out)
    }
}

/// `F(T_1, …, T_k)` over a common denominator, with `F` a polynomial.
fn series_of_rats(s: &SepSeries, ts: &[Rat], l: &FieldRef) -> Result<Rat> {
    let emax: Vec<u32> = (0..ts.len())
        .map(|i| s.terms().map(|(e, _)| e.get(i)).max().unwrap_or(0))
        .collect();
    let pows = |p: &Poly, k: u32| {
        let mut v = vec![Poly::one(l)];
        for j in 0..k as usize {
            let next = v[j].mul(p);
            v.push(next);
        }
        v
    };
    let np: Vec<Vec<Poly>> = ts.iter().zip(&emax).map(|(t, k)| pows(&t.num, *k)).collect();
    let dp: Vec<Vec<Poly>> = ts.iter().zip(&emax).map(|(t, k)| pows(&t.den, *k)).collect();
    let mut num = Poly::zero(l);
    for (e, c) in s.terms() {
        let mut term = Poly::constant(c.embed(l)?);
        for i in 0..ts.len() {
            let k = e.get(i) as usize;
            term = term.mul(&np[i][k]).mul(&dp[i][emax[i] as usize - k]);
        }
        num = num.add(&term);
    }
    let mut den = Poly::one(l);
    for (i, d) in dp.iter().enumerate() {
        den = den.mul(&d[emax[i] as usize]);
    }
    Rat::new(num, den)
}

fn dedup(mut v: Vec<Elem>) -> Vec<Elem> {
    v.sort_by_key(|e| e.to_string());
    v.dedup_by(|a, b| a.eq_prec(b));
    v
}

/// Normalizes `term` into pieces over `l`, which must contain the constants
/// and series coefficients.
pub fn normalize(term: &Term, syms: &Symbols, l: &FieldRef) -> Result<NormalizedCover> {
    let mut n = Normalizer {
        l: l.clone(),
        syms,
        s: Vec::new(),
    };
    let pieces = n.node(term)?;
    Ok(NormalizedCover {
        field: l.clone(),
        exceptional: dedup(n.s),
        pieces,
    })
}

/// Outcome of sampling a cover against its term.
#[derive(Clone, Debug, Default)]
pub struct CoverReport {
    pub seed: u64,
    pub trials: usize,
    /// Sample points off S at which some piece was compared.
    pub checked: usize,
    pub on_s: usize,
    /// Comparisons abandoned for lack of precision.
    pub skipped: usize,
    pub uncovered: Vec<Elem>,
    /// Point and piece index where `τ ≠ R·E`.
    pub mismatches: Vec<(Elem, usize)>,
    /// Point and piece index where `E` is not `≡ 1`.
    pub not_unit: Vec<(Elem, usize)>,
}

impl CoverReport {
    pub fn passed(&self) -> bool {
        self.uncovered.is_empty() && self.mismatches.is_empty() && self.not_unit.is_empty()
    }
}

impl fmt::Display for CoverReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seed={} trials={} checked={} on_S={} skipped={} uncovered={} mismatches={} unit_failures={}",
            self.seed,
            self.trials,
            self.checked,
            self.on_s,
            self.skipped,
            self.uncovered.len(),
            self.mismatches.len(),
            self.not_unit.len()
        )?;
        for x in self.uncovered.iter().take(5) {
            write!(f, "\n  uncovered at {x}")?;
        }
        for (x, i) in self.mismatches.iter().take(5) {
            write!(f, "\n  mismatch on piece {} at {x}", i + 1)?;
        }
        for (x, i) in self.not_unit.iter().take(5) {
            write!(f, "\n  E not a unit on piece {} at {x}", i + 1)?;
        }
        Ok(())
    }
}

enum Cmp {
    Equal,
    Differ,
    Unknown,
}

fn compare(a: &Elem, b: &Elem) -> Cmp {
    if a.is_zero() && b.is_zero() {
        return Cmp::Equal;
    }
    if !a.sub(b).is_zero() {
        return Cmp::Differ;
    }
    let v = a.val_or_prec().min(b.val_or_prec());
    let p = a.prec().min(b.prec());
    match (p, v) {
        (Gamma::Fin(p), Gamma::Fin(v)) if p <= v => Cmp::Unknown,
        _ => Cmp::Equal,
    }
}

fn check_piece(p: &NormPiece, term: &Term, syms: &Symbols, x: &Elem) -> Result<(Cmp, bool)> {
    let tau = term.eval(x, syms)?;
    let (re, unit) = match &p.r {
        None => (Elem::zero(x.field()), true),
        Some(r) => {
            let e = p.e.eval(x)?;
            let unit = val_meets(&e.sub(&Elem::one(x.field())), Rational64::zero(), true)?;
            (r.eval(x)?.mul(&e), unit)
        }
    };
    Ok((compare(&tau, &re), unit))
}

/// Samples `trials` points of the cover field, concentrated near piece
/// centers and S, and checks coverage, `τ = R·E` and `E ≡ 1` off S.
pub fn check_cover(cover: &NormalizedCover, term: &Term, syms: &Symbols, trials: usize, seed: u64) -> CoverReport {
    let l = &cover.field;
    let mut centers: Vec<Elem> = cover.exceptional.clone();
    for p in &cover.pieces {
        centers.push(p.piece.outer.c.clone());
        centers.extend(p.piece.holes.iter().map(|h| h.c.clone()));
    }
    let centers = dedup(centers);
    let mut rng = sample::rng(seed);
    let pts = sample::points(l, &centers, trials, &mut rng);
    let mut rep = CoverReport {
        seed,
        trials,
        ..CoverReport::default()
    };
    for x in pts {
        if cover.exceptional.iter().any(|s| x.sub(s).is_zero()) {
            rep.on_s += 1;
            continue;
        }
        let mut found = false;
        let mut compared = false;
        for (i, p) in cover.pieces.iter().enumerate() {
            match p.piece.contains(&x) {
                Ok(true) => {}
                Ok(false) => continue,
                Err(_) => {
                    rep.skipped += 1;
                    found = true;
                    continue;
                }
            }
            found = true;
            match check_piece(p, term, syms, &x) {
                Ok((Cmp::Equal, unit)) => {
                    compared = true;
                    if !unit {
                        rep.not_unit.push((x.clone(), i));
                    }
                }
                Ok((Cmp::Differ, _)) => {
                    compared = true;
                    rep.mismatches.push((x.clone(), i));
                }
                Ok((Cmp::Unknown, _)) | Err(_) => rep.skipped += 1,
            }
        }
        if !found {
            rep.uncovered.push(x);
        } else if compared {
            rep.checked += 1;
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vfield::Field;

    fn q3() -> FieldRef {
        Field::qp(3, 12).unwrap()
    }

    fn syms(k: &FieldRef) -> Symbols {
        let mut s = Symbols::new();
        s.declare("F[1,1]=x1+r1", k, Caps::for_field(k)).unwrap();
        s.declare("G=1+3*x1+9*x1^2+27*x1^3", k, Caps::for_field(k)).unwrap();
        s
    }

    #[test]
    fn parse_examples() {
        let k = q3();
        let sy = syms(&k);
        assert_eq!(parse_term("x + 3", &sy, &k).unwrap().tree(), "add(var, const 3)");
        let t = parse_term("inv(x - 1)", &sy, &k).unwrap();
        assert_eq!(t.tree(), format!("inv(add(var, const {}))", Elem::from_int(&k, -1)));
        assert_eq!(
            parse_term("F(x, 3*x)", &sy, &k).unwrap().tree(),
            "apply(F, [var, mul(const 3, var)])"
        );
        for s in ["x + 3", "inv(x - 1)", "F(x, 3*x)", "G(x)^2 - x/(x+1)", "(x-1)^-2"] {
            let t = parse_term(s, &sy, &k).unwrap();
            let again = parse_term(&t.to_string(), &sy, &k).unwrap();
            assert_eq!(t.to_string(), again.to_string(), "{s}");
        }
        assert!(matches!(parse_term("F(x)", &sy, &k), Err(Error::Parse { .. })));
        assert!(matches!(parse_term("H(x)", &sy, &k), Err(Error::Parse { pos: 0, .. })));
        assert!(parse_term("O(x)", &sy, &k).is_err());
    }

    #[test]
    fn x_plus_three() {
        let k = q3();
        let sy = Symbols::new();
        let t = parse_term("x + 3", &sy, &k).unwrap();
        let c = normalize(&t, &sy, &k).unwrap();
        let lines: Vec<String> = c
            .pieces
            .iter()
            .map(|p| format!("{}: R={}; E={}", p.piece.to_annulus(), p.r_string(), p.e_expansion()))
            .collect();
        assert_eq!(lines.len(), 3, "{lines:?}");
        assert_eq!(lines[0], "|x| <= (0) && |x| > (1): R=x; E=1+3*x^-1");
        assert_eq!(lines[1], "|x| < (1): R=3; E=(3^-1)*x+1");
        assert_eq!(lines[2], "|x| = (1): R=x+3; E=1");
        assert_eq!(c.exceptional.len(), 1);
        assert!(c.exceptional[0].eq_prec(&Elem::from_int(&k, -3)));
        let rep = check_cover(&c, &t, &sy, 200, 1);
        assert!(rep.passed(), "{rep}");
        assert!(rep.checked > 150, "{rep}");
    }

    #[test]
    fn inverse_and_zero() {
        let k = q3();
        let sy = Symbols::new();
        let t = parse_term("inv(x - 1)", &sy, &k).unwrap();
        let c = normalize(&t, &sy, &k).unwrap();
        assert_eq!(c.to_string(), format!("S={{1}}\n[1] |x| <= (0): R=1/(x-1); E=1; cert={UNIT_CERT}"));
        assert!(check_cover(&c, &t, &sy, 200, 2).passed());
        let t = parse_term("0", &sy, &k).unwrap();
        let c = normalize(&t, &sy, &k).unwrap();
        assert_eq!(c.pieces.len(), 1);
        assert_eq!(c.pieces[0].r_string(), "0");
        assert!(check_cover(&c, &t, &sy, 200, 3).passed());
    }

    #[test]
    fn tampered_cover_is_caught() {
        let k = q3();
        let sy = Symbols::new();
        let t = parse_term("x + 3", &sy, &k).unwrap();
        let mut c = normalize(&t, &sy, &k).unwrap();
        for p in c.pieces.iter_mut() {
            p.e = one_rat(&k);
        }
        let rep = check_cover(&c, &t, &sy, 200, 1);
        assert!(!rep.mismatches.is_empty(), "{rep}");
    }

    #[test]
    fn series_application() {
        let k = q3();
        let sy = syms(&k);
        for s in ["G(x)", "F(x, 3*x)", "F(inv(x), x)", "G(3*inv(x)) * (x - 1)", "F(x + 1, x*x - 3)"] {
            let t = parse_term(s, &sy, &k).unwrap();
            let c = normalize(&t, &sy, &k).unwrap();
            let rep = check_cover(&c, &t, &sy, 200, 4);
            assert!(rep.passed(), "{s}: {rep}\n{c}");
            assert!(rep.checked > 100, "{s}: {rep}");
        }
    }

    #[test]
    fn rational_terms_have_unit_e() {
        let k = q3();
        let sy = Symbols::new();
        for s in ["x*x - 3", "(x - 1)/(x + 3)", "inv(x) + inv(x - 9)", "x^3 - 9*x + 27"] {
            let t = parse_term(s, &sy, &k).unwrap();
            let c = normalize(&t, &sy, &k).unwrap();
            let rep = check_cover(&c, &t, &sy, 200, 5);
            assert!(rep.passed(), "{s}: {rep}\n{c}");
        }
    }
}
