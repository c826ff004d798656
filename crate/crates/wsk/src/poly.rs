//! Univariate polynomials over a field descriptor, with Newton polygons,
//! slope factorization and root location in the coefficient field.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::vfield::{Elem, Field, FieldRef, Gamma};
use num_rational::Rational64;
use num_traits::Zero;
use std::fmt;

/// A polynomial, lowest degree first, without trailing zero coefficients.
#[derive(Clone, Debug)]
pub struct Poly {
    field: FieldRef,
    c: Vec<Elem>,
}

impl Poly {
    pub fn new(field: &FieldRef, mut c: Vec<Elem>) -> Poly {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        Poly {
            field: field.clone(),
            c,
        }
    }

    pub fn zero(field: &FieldRef) -> Poly {
        Poly::new(field, Vec::new())
    }

    pub fn constant(c: Elem) -> Poly {
        let f = c.field().clone();
        Poly::new(&f, vec![c])
    }

    pub fn one(field: &FieldRef) -> Poly {
        Poly::constant(Elem::one(field))
    }

    /// `x - a`.
    pub fn linear(a: &Elem) -> Poly {
        let f = a.field().clone();
        Poly::new(&f, vec![a.neg(), Elem::one(&f)])
    }

    pub fn x(field: &FieldRef) -> Poly {
        Poly::new(field, vec![Elem::zero(field), Elem::one(field)])
    }

    pub fn monomial(c: Elem, k: usize) -> Poly {
        let f = c.field().clone();
        let mut v = vec![Elem::zero(&f); k];
        v.push(c);
        Poly::new(&f, v)
    }

    pub fn from_ints(field: &FieldRef, c: &[i64]) -> Poly {
        Poly::new(field, c.iter().map(|&n| Elem::from_int(field, n)).collect())
    }

    pub fn field(&self) -> &FieldRef {
        &self.field
    }

    pub fn coeffs(&self) -> &[Elem] {
        &self.c
    }

    pub fn coeff(&self, i: usize) -> Elem {
        self.c.get(i).cloned().unwrap_or_else(|| Elem::zero(&self.field))
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Degree; zero polynomial has degree 0 by convention (see `is_zero`).
    pub fn deg(&self) -> usize {
        self.c.len().saturating_sub(1)
    }

    pub fn lc(&self) -> Elem {
        self.c.last().cloned().unwrap_or_else(|| Elem::zero(&self.field))
    }

    pub fn is_monic(&self) -> bool {
        !self.c.is_empty() && self.lc().is_one()
    }

    pub fn embed(&self, target: &FieldRef) -> Result<Poly> {
        let c = self.c.iter().map(|x| x.embed(target)).collect::<Result<Vec<_>>>()?;
        Ok(Poly::new(target, c))
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.c.len().max(o.c.len());
        let c = (0..n).map(|i| self.coeff(i).add(&o.coeff(i))).collect();
        Poly::new(&self.field, c)
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        let n = self.c.len().max(o.c.len());
        let c = (0..n).map(|i| self.coeff(i).sub(&o.coeff(i))).collect();
        Poly::new(&self.field, c)
    }

    pub fn neg(&self) -> Poly {
        Poly::new(&self.field, self.c.iter().map(|x| x.neg()).collect())
    }

    pub fn scale(&self, a: &Elem) -> Poly {
        Poly::new(&self.field, self.c.iter().map(|x| x.mul(a)).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero(&self.field);
        }
        let mut c = vec![Elem::zero(&self.field); self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in o.c.iter().enumerate() {
                c[i + j] = c[i + j].add(&a.mul(b));
            }
        }
        Poly::new(&self.field, c)
    }

    pub fn pow(&self, k: usize) -> Poly {
        let mut acc = Poly::one(&self.field);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Value at `x`, computed in the join of the coefficient field and the
    /// field of `x`.
    pub fn eval(&self, x: &Elem) -> Elem {
        let x = if self.field.contains(x.field()) && !x.field().contains(&self.field) {
            x.embed(&self.field).expect("subfield embeds")
        } else if !x.field().contains(&self.field) {
            let l = Field::join(&self.field, x.field()).expect("evaluation point and coefficients share a field");
            x.embed(&l).expect("join contains the point field")
        } else {
            x.clone()
        };
        let x = &x;
        let mut acc = Elem::zero(x.field());
        for a in self.c.iter().rev() {
            let a = if std::sync::Arc::ptr_eq(a.field(), x.field()) {
                a.clone()
            } else {
                a.embed(x.field()).expect("evaluation point field contains coefficients")
            };
            acc = acc.mul(x).add(&a);
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        let c = self
            .c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, a)| a.mul(&Elem::from_int(&self.field, i as i64)))
            .collect();
        Poly::new(&self.field, c)
    }

    /// `self(x + a)`.
    pub fn shift(&self, a: &Elem) -> Poly {
        let mut acc = Poly::zero(&self.field);
        let lin = Poly::new(&self.field, vec![a.clone(), Elem::one(&self.field)]);
        for c in self.c.iter().rev() {
            acc = acc.mul(&lin).add(&Poly::constant(c.clone()));
        }
        acc
    }

    /// `self(a x)`.
    pub fn scale_var(&self, a: &Elem) -> Poly {
        let mut pw = Elem::one(&self.field);
        let mut c = Vec::with_capacity(self.c.len());
        for x in &self.c {
            c.push(x.mul(&pw));
            pw = pw.mul(a);
        }
        Poly::new(&self.field, c)
    }

    /// `x^deg · self(1/x)`.
    pub fn reverse(&self, deg: usize) -> Poly {
        let mut c = vec![Elem::zero(&self.field); deg + 1];
        for (i, a) in self.c.iter().enumerate() {
            if i <= deg {
                c[deg - i] = a.clone();
            }
        }
        Poly::new(&self.field, c)
    }

    /// Composition `self(q(x))`.
    pub fn compose(&self, q: &Poly) -> Poly {
        let mut acc = Poly::zero(&self.field);
        for c in self.c.iter().rev() {
            acc = acc.mul(q).add(&Poly::constant(c.clone()));
        }
        acc
    }

    /// Division with remainder by a polynomial whose leading coefficient is invertible.
    pub fn divrem(&self, d: &Poly) -> Result<(Poly, Poly)> {
        if d.is_zero() {
            return Err(Error::precision("precision-zero divisor"));
        }
        let inv = d.lc().inv()?;
        let dd = d.deg();
        let mut r = self.c.clone();
        if r.len() <= dd {
            return Ok((Poly::zero(&self.field), self.clone()));
        }
        let mut q = vec![Elem::zero(&self.field); r.len() - dd];
        for k in (dd..r.len()).rev() {
            let t = r[k].mul(&inv);
            for (i, di) in d.c.iter().enumerate() {
                r[k - dd + i] = r[k - dd + i].sub(&t.mul(di));
            }
            q[k - dd] = t;
        }
        r.truncate(dd);
        Ok((Poly::new(&self.field, q), Poly::new(&self.field, r)))
    }

    pub fn monic(&self) -> Result<Poly> {
        let inv = self.lc().inv()?;
        Ok(self.scale(&inv))
    }

    /// Lowest precision among the coefficients.
    pub fn prec(&self) -> Gamma {
        self.c.iter().map(|x| x.prec()).min().unwrap_or(Gamma::Inf)
    }

    pub fn with_prec(&self, g: Gamma) -> Poly {
        Poly::new(&self.field, self.c.iter().map(|x| x.with_prec(g)).collect())
    }

    /// Gauss valuation on the circle of radius exponent `r`: `min v(c_i) + i r`.
    pub fn gauss_val(&self, r: Rational64) -> Gamma {
        self.c
            .iter()
            .enumerate()
            .map(|(i, a)| a.val() + Gamma::Fin(r * i as i64))
            .min()
            .unwrap_or(Gamma::Inf)
    }

    /// Minimal coefficient valuation.
    pub fn content_val(&self) -> Gamma {
        self.gauss_val(Rational64::zero())
    }

    /// Lower Newton polygon: `(valuation, multiplicity)` of the roots,
    /// largest valuations first. Roots at zero (at precision) are reported
    /// with valuation `Inf`.
    pub fn root_valuations(&self) -> Vec<(Gamma, usize)> {
        let mut out = Vec::new();
        if self.c.is_empty() {
            return out;
        }
        let low = self.c.iter().position(|a| !a.is_zero()).unwrap_or(0);
        if low > 0 {
            out.push((Gamma::Inf, low));
        }
        let pts: Vec<(i64, Rational64)> = self
            .c
            .iter()
            .enumerate()
            .skip(low)
            .filter_map(|(i, a)| a.val().fin().map(|v| (i as i64, v)))
            .collect();
        let mut i = 0;
        while i + 1 < pts.len() {
            let (x0, y0) = pts[i];
            let mut best = i + 1;
            let mut best_slope = (pts[i + 1].1 - y0) / Rational64::from_integer(pts[i + 1].0 - x0);
            for (j, &(xj, yj)) in pts.iter().enumerate().skip(i + 2) {
                let s = (yj - y0) / Rational64::from_integer(xj - x0);
                if s <= best_slope {
                    best_slope = s;
                    best = j;
                }
            }
            out.push((Gamma::Fin(-best_slope), (pts[best].0 - x0) as usize));
            i = best;
        }
        out
    }

    /// Number of roots (with multiplicity) of valuation `> r` (strict) or `>= r`.
    pub fn count_roots(&self, r: Rational64, strict: bool) -> usize {
        self.root_valuations()
            .iter()
            .filter(|(v, _)| if strict { *v > Gamma::Fin(r) } else { *v >= Gamma::Fin(r) })
            .map(|(_, m)| m)
            .sum()
    }

    pub fn fmt_var(&self, var: &str) -> String {
        fmt_terms(
            self.c
                .iter()
                .enumerate()
                .rev()
                .filter(|(_, a)| !a.is_zero())
                .map(|(i, a)| {
                    let mono = match i {
                        0 => String::new(),
                        1 => var.to_string(),
                        _ => format!("{var}^{i}"),
                    };
                    (a.to_string(), mono)
                }),
        )
    }

    /// Monic factor with the roots of valuation `>= r` (closed) or `> r`
    /// (open), and the cofactor.
    pub fn slope_factor(&self, r: Rational64, strict: bool) -> Result<(Poly, Poly)> {
        slope_factor(self, r, strict)
    }
}

/// Joins `(coefficient, monomial)` pairs into `a*m + b*n` with sign folding.
pub fn fmt_terms(items: impl Iterator<Item = (String, String)>) -> String {
    let mut out = String::new();
    for (c, m) in items {
        let body = c.strip_prefix('-').unwrap_or(&c);
        let simple = !body.contains([' ', '+', '-']);
        let (neg, mag) = if simple {
            (c.starts_with('-'), body.to_string())
        } else {
            (false, format!("({c})"))
        };
        let term = if m.is_empty() {
            mag
        } else if mag == "1" {
            m
        } else {
            format!("{mag}*{m}")
        };
        if out.is_empty() {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { "-" } else { "+" });
        }
        out.push_str(&term);
    }
    if out.is_empty() {
        "0".to_string()
    } else {
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.fmt_var("x"))
    }
}

/// Evaluates an expression as a polynomial in `var` over `field`.
/// Other identifiers are resolved by `vfield::eval_atom`.
pub fn poly_from_expr(e: &Expr, field: &FieldRef, var: &str) -> Result<Poly> {
    Ok(match e {
        Expr::Num(n) => Poly::constant(Elem::from_int(field, *n)),
        Expr::Var(v, pos) => {
            if v == var {
                Poly::x(field)
            } else {
                Poly::constant(crate::vfield::eval_atom(v, field, *pos)?)
            }
        }
        Expr::Neg(a) => poly_from_expr(a, field, var)?.neg(),
        Expr::Add(a, b) => poly_from_expr(a, field, var)?.add(&poly_from_expr(b, field, var)?),
        Expr::Sub(a, b) => poly_from_expr(a, field, var)?.sub(&poly_from_expr(b, field, var)?),
        Expr::Mul(a, b) => poly_from_expr(a, field, var)?.mul(&poly_from_expr(b, field, var)?),
        Expr::Div(a, b) => {
            let d = poly_from_expr(b, field, var)?;
            if d.deg() > 0 {
                return Err(Error::parse(b.pos(), "division by a non-constant polynomial"));
            }
            let inv = d.lc().inv()?;
            poly_from_expr(a, field, var)?.scale(&inv)
        }
        Expr::Pow(a, k) => {
            let base = poly_from_expr(a, field, var)?;
            if !k.is_integer() {
                return Err(Error::parse(a.pos(), "fractional exponent in a polynomial"));
            }
            let k = k.to_integer();
            if k >= 0 {
                base.pow(k as usize)
            } else if base.deg() == 0 {
                Poly::constant(base.lc().powi(k)?)
            } else {
                return Err(Error::parse(a.pos(), "negative power of a non-constant polynomial"));
            }
        }
        Expr::Call(name, args, pos) => {
            if name == "O" && args.len() == 1 {
                let g = crate::vfield::eval_elem(&args[0], field)?.val();
                Poly::constant(Elem::zero_prec(field, g))
            } else {
                return Err(Error::parse(*pos, format!("unknown function '{name}' in polynomial")));
            }
        }
    })
}

pub fn parse_poly(s: &str, field: &FieldRef, var: &str) -> Result<Poly> {
    let e = crate::expr::parse_expr(s)?;
    poly_from_expr(&e, field, var)
}

fn slope_factor(f: &Poly, r: Rational64, strict: bool) -> Result<(Poly, Poly)> {
    let fld = f.field().clone();
    if f.is_zero() {
        return Err(Error::precision("slope factorization of the zero polynomial"));
    }
    // Works with the weights v(c_i) + i·r directly, so r need not lie in
    // the value group; the iteration commutes with rescaling x.
    let low = f.c.iter().position(|x| !x.is_zero()).unwrap_or(0);
    // Roots at zero belong to every disc around 0.
    let m = Poly::new(&fld, f.c[low..].to_vec());
    let w = |i: usize| m.coeff(i).val() + Gamma::Fin(r * i as i64);
    let vmin = (0..=m.deg()).map(w).min().unwrap_or(Gamma::Inf);
    let idx: Vec<usize> = (0..=m.deg()).filter(|&i| w(i) == vmin).collect();
    let k = if strict { idx[0] } else { *idx.last().unwrap() };
    let pz = if strict {
        // Roots of valuation > r are the roots of valuation < -r of the reversal.
        let rev = m.reverse(m.deg());
        let d = m.deg() - k;
        let (_, b_rev) = closed_factor(&rev, d)?;
        b_rev.reverse(k).monic()?
    } else {
        closed_factor(&m, k)?.0
    };
    let p = pz.mul(&Poly::monomial(Elem::one(&fld), low)).monic()?;
    let (q, rem) = f.divrem(&p)?;
    if !rem.c.iter().all(|x| x.is_zero()) {
        return Err(Error::precision("slope factorization did not converge"));
    }
    Ok((p, q))
}

/// For `m` with content valuation at index `k` (the last index attaining the
/// minimum), returns `(P, B)` with `m = P·B`, P monic of degree k with all
/// roots integral and B with `B/B(0)`'s roots of negative valuation.
fn closed_factor(m: &Poly, k: usize) -> Result<(Poly, Poly)> {
    let fld = m.field().clone();
    let lead = m.coeff(k);
    let mm = m.scale(&lead.inv()?);
    let n = mm.deg();
    if k == 0 {
        return Ok((Poly::one(&fld), m.clone()));
    }
    if k == n {
        return Ok((mm, Poly::constant(lead)));
    }
    let mut p = Poly::new(&fld, (0..=k).map(|i| mm.coeff(i)).collect());
    let mut b = Poly::one(&fld);
    for _ in 0..(8 * (fld.prec_scaled() as usize + 4)) {
        let delta = mm.sub(&p.mul(&b));
        if delta.c.iter().all(|x| x.is_zero()) {
            break;
        }
        let (q, r) = delta.divrem(&p)?;
        p = p.add(&r);
        b = b.add(&q);
    }
    let delta = mm.sub(&p.mul(&b));
    if !delta.c.iter().all(|x| x.is_zero()) {
        return Err(Error::precision("insufficient precision in Hensel factorization"));
    }
    Ok((p, b.scale(&lead)))
}

/// Solves the square system `a·u = b` by elimination with pivots of least
/// valuation.
pub fn solve_linear(mut a: Vec<Vec<Elem>>, mut b: Vec<Elem>) -> Result<Vec<Elem>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .min_by_key(|&r| a[r][col].val())
            .ok_or_else(|| Error::precision("singular system at this precision"))?;
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].inv()?;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let t = a[r][col].mul(&inv);
            for c in col..n {
                let d = t.mul(&a[col][c]);
                a[r][c] = a[r][c].sub(&d);
            }
            let d = t.mul(&b[col]);
            b[r] = b[r].sub(&d);
        }
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(b[i].mul(&a[i][i].inv()?));
    }
    Ok(out)
}

/// Roots of `f` in its coefficient field, with multiplicities, located to
/// the working precision. Clusters that do not resolve into roots in the
/// field are reported through the error.
pub fn roots_in_field(f: &Poly) -> Result<Vec<(Elem, usize)>> {
    let mut out = Vec::new();
    for c in root_clusters(f)? {
        if let Gamma::Fin(r) = c.depth {
            return Err(Error::domain(format!(
                "some roots at distance {r} from {} are not in {}",
                c.a,
                f.field().name
            )));
        }
        out.push((c.a, c.m));
    }
    Ok(out)
}

/// `m` roots `α` of a polynomial seen from its coefficient field `L`:
/// for every `x` in `L`, `v(x - α) = min(v(x - a), depth)`. Roots lying in
/// `L` have depth `Inf` and `a` equal to the root.
#[derive(Clone, Debug)]
pub struct RootCluster {
    pub a: Elem,
    pub depth: Gamma,
    pub m: usize,
}

/// All roots of `f`, as roots in the field or as clusters around their
/// best approximations in the field.
pub fn root_clusters(f: &Poly) -> Result<Vec<RootCluster>> {
    let fld = f.field().clone();
    if f.is_zero() {
        return Err(Error::domain("roots of the zero polynomial"));
    }
    let mut out = Vec::new();
    let mut stack = vec![(f.monic()?, Elem::zero(&fld), 0usize)];
    let e = fld.e as i64;
    let limit = fld.prec_scaled() * 4 + 8;
    while let Some((g, center, depth)) = stack.pop() {
        if g.deg() == 0 {
            continue;
        }
        for (v, mult) in g.root_valuations() {
            let r = match v {
                Gamma::Inf => {
                    out.push(RootCluster { a: center.clone(), depth: Gamma::Inf, m: mult });
                    continue;
                }
                Gamma::Fin(r) => r,
            };
            let cluster = RootCluster { a: center.clone(), depth: Gamma::Fin(r), m: mult };
            if !(r * e).is_integer() {
                out.push(cluster);
                continue;
            }
            if depth as i64 > limit {
                return Err(Error::precision("root location did not terminate"));
            }
            let (lo, _) = g.slope_factor(r, false)?;
            let part = if lo.count_roots(r, true) > 0 {
                let (hi, _) = lo.slope_factor(r, true)?;
                lo.divrem(&hi)?.0
            } else {
                lo.clone()
            };
            // Roots of exact valuation r: residues of part(a z)/a^deg.
            let a = Elem::monomial(&fld, Gamma::Fin(r))?;
            let scaled = part.scale_var(&a);
            let scaled = scaled.scale(&scaled.lc().inv()?);
            let mut found = 0;
            for z in fld.res.elements().into_iter().skip(1) {
                let lift = Elem::lift_res(&fld, &z);
                if scaled.eval(&lift).val() <= Gamma::ZERO {
                    continue;
                }
                let c = lift.mul(&a);
                let shifted = g.shift(&c);
                let cnt: usize = shifted
                    .root_valuations()
                    .iter()
                    .filter(|(vv, _)| *vv > Gamma::Fin(r))
                    .map(|(_, mm)| mm)
                    .sum();
                if cnt == 0 {
                    continue;
                }
                found += cnt;
                let (sub, _) = shifted.slope_factor(r, true)?;
                stack.push((sub, center.add(&c), depth + 1));
            }
            if found < mult {
                out.push(RootCluster { m: mult - found, ..cluster });
            }
        }
    }
    out.sort_by_key(|a| (a.a.to_string(), a.depth));
    Ok(out)
}
