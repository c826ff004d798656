//! Effective coefficient fields: ℚ_p, 𝔽_p((t)), finite extensions and
//! Hahn series, with valuation, residue and multiplicative representatives.

pub mod base;
pub mod field;
pub mod gamma;
pub mod hahn;
pub mod resfield;

pub use base::{Base, BaseKind, BaseRing, INF_PREC};
pub use field::{Elem, Field, FieldKind, FieldRef, DEFAULT_DEGREE_CAP, DEFAULT_PREC};
pub use gamma::{parse_gamma, Gamma};
pub use hahn::{Hahn, HahnField, HahnRef};
pub use resfield::{Fq, Res};

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use num_rational::Rational64;

/// Multiplicative representative of a residue class, to working precision.
pub fn teichmuller(r: &Res, field: &FieldRef) -> Result<Elem> {
    if !field.mixed_char() {
        return Err(Error::domain("representatives are the constants"));
    }
    Ok(teich_lift(r, field))
}

fn teich_lift(r: &Res, field: &FieldRef) -> Elem {
    let mut x = Elem::lift_res(field, r).at_working_prec();
    if field.res.is_zero(r) {
        return x;
    }
    let q = field.q();
    for _ in 0..(4 * field.prec_scaled() + 8) {
        let y = x.pow(q);
        if y.eq_prec(&x) {
            break;
        }
        x = y;
    }
    x
}

/// Lift of a residue class that is multiplicative: Teichmüller in mixed
/// characteristic, the constant itself in equal characteristic.
pub fn constant_lift(r: &Res, field: &FieldRef) -> Elem {
    if field.mixed_char() {
        teich_lift(r, field)
    } else {
        Elem::lift_res(field, r)
    }
}

/// A parsed field descriptor.
#[derive(Clone, Debug)]
pub enum FieldSpec {
    Valued(FieldRef),
    Hahn(HahnRef),
}

impl FieldSpec {
    pub fn valued(&self) -> Result<FieldRef> {
        match self {
            FieldSpec::Valued(f) => Ok(f.clone()),
            FieldSpec::Hahn(_) => Err(Error::domain("operation needs a p-adic, Laurent or extension field")),
        }
    }

    pub fn name(&self) -> String {
        match self {
            FieldSpec::Valued(f) => f.name.clone(),
            FieldSpec::Hahn(h) => format!("Hahn({}, trunc={})", if h.mixed() { "Q" } else { "F" }.to_string() + &h.ring.p.to_string(), h.trunc),
        }
    }
}

fn base_token(tok: &str, pos: usize) -> Result<(BaseKind, u64)> {
    let bad = || Error::parse(pos, format!("unknown base field '{tok}'"));
    if let Some(rest) = tok.strip_prefix('Q') {
        let p = rest.parse().map_err(|_| bad())?;
        return Ok((BaseKind::Qp, p));
    }
    if let Some(rest) = tok.strip_prefix('F') {
        let rest = rest.strip_suffix('t').ok_or_else(bad)?;
        let p = rest.parse().map_err(|_| bad())?;
        return Ok((BaseKind::Fpt, p));
    }
    Err(bad())
}

/// Parses `Qp p=3 prec=20`, `Fpt p=5`, `ext base=Q7 eisenstein=y^2-7
/// [unramified=z^2+1|unramified=2] [prec=N]`, `Hahn p=3 char=p trunc=6
/// cap=64`, or the short names `Q7`, `F5t`. A leading `field` is ignored.
pub fn parse_field(s: &str) -> Result<FieldSpec> {
    let mut toks: Vec<(usize, &str)> = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices().chain(std::iter::once((s.len(), ' '))) {
        if c.is_whitespace() {
            if let Some(b) = start.take() {
                toks.push((b, &s[b..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if toks.first().is_some_and(|t| t.1 == "field") {
        toks.remove(0);
    }
    let (kpos, kind) = *toks.first().ok_or_else(|| Error::parse(0, "empty field descriptor"))?;
    let mut kv: Vec<(usize, &str, &str)> = Vec::new();
    for &(pos, t) in &toks[1..] {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| Error::parse(pos, format!("expected key=value, found '{t}'")))?;
        kv.push((pos, k, v));
    }
    let get = |key: &str| kv.iter().find(|x| x.1 == key).map(|x| (x.0 + key.len() + 1, x.2));
    for &(pos, k, _) in &kv {
        if !["p", "prec", "base", "eisenstein", "unramified", "trunc", "cap", "char"].contains(&k) {
            return Err(Error::parse(pos, format!("unknown key '{k}'")));
        }
    }
    let int = |key: &str| -> Result<Option<i64>> {
        match get(key) {
            None => Ok(None),
            Some((pos, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::parse(pos, format!("expected an integer for {key}"))),
        }
    };
    let prec = int("prec")?.unwrap_or(DEFAULT_PREC);
    let need_p = || -> Result<u64> {
        match int("p")? {
            Some(p) if p > 1 => Ok(p as u64),
            Some(_) => Err(Error::domain("p must be a prime")),
            None => Err(Error::parse(kpos, "missing p=")),
        }
    };
    match kind {
        "Qp" => Ok(FieldSpec::Valued(Field::qp(need_p()?, prec)?)),
        "Fpt" => Ok(FieldSpec::Valued(Field::fpt(need_p()?, prec)?)),
        "Hahn" => {
            let p = need_p()?;
            let kind = match get("char") {
                None => BaseKind::Fpt,
                Some((_, "p")) => BaseKind::Fpt,
                Some((_, "0")) => BaseKind::Qp,
                Some((pos, _)) => return Err(Error::parse(pos, "char must be 0 or p")),
            };
            let trunc = match get("trunc") {
                None => Rational64::from_integer(prec),
                Some((pos, v)) => parse_gamma(v)
                    .and_then(|g| g.fin())
                    .ok_or_else(|| Error::parse(pos, "bad truncation"))?,
            };
            let cap = int("cap")?.unwrap_or(64).max(1) as usize;
            Field::qp(p, 2).or_else(|_| Field::fpt(p, 2))?;
            Ok(FieldSpec::Hahn(HahnField::new(kind, p, trunc, cap)?))
        }
        "ext" => {
            let (bpos, b) = get("base").ok_or_else(|| Error::parse(kpos, "missing base="))?;
            let (bk, p) = base_token(b, bpos)?;
            let k0 = Field::build(bk, p, prec, None, None)?;
            let unram = match get("unramified") {
                None => None,
                Some((pos, v)) => Some(if let Ok(d) = v.parse::<usize>() {
                    resfield::first_irreducible(d, p)
                } else {
                    let g = crate::poly::parse_poly(v, &k0, "z").map_err(|e| e.shift(pos))?;
                    let mut out = Vec::new();
                    for c in g.coeffs() {
                        out.push(c.residue()?.0[0]);
                    }
                    out
                }),
            };
            let eis = match get("eisenstein") {
                None => None,
                Some((pos, v)) => {
                    let g = crate::poly::parse_poly(v, &k0, "y").map_err(|e| e.shift(pos))?;
                    Some(g.coeffs().iter().map(|c| c.prime_coord()).collect())
                }
            };
            Ok(FieldSpec::Valued(Field::build(bk, p, prec, unram, eis)?))
        }
        other => Ok(FieldSpec::Valued(parse_field_name(other, prec).map_err(|e| e.shift(kpos))?)),
    }
}

/// Parses a field name such as `Q7`, `F5t`, `Q7[y^2-7]`, `Q3[z:z^2+1]` or
/// `Q3[z:z^2+1][y:y^2-3]`, the form printed by [`Field`]'s `name`.
pub fn parse_field_name(s: &str, prec: i64) -> Result<FieldRef> {
    let cut = s.find('[').unwrap_or(s.len());
    let (bk, p) = base_token(&s[..cut], 0)?;
    let k0 = Field::build(bk, p, prec, None, None)?;
    let mut unram = None;
    let mut eis = None;
    let mut rest = cut;
    while rest < s.len() {
        if !s[rest..].starts_with('[') {
            return Err(Error::parse(rest, "expected '['"));
        }
        let close = s[rest..]
            .find(']')
            .map(|k| rest + k)
            .ok_or_else(|| Error::parse(rest, "unclosed '['"))?;
        let inner = &s[rest + 1..close];
        let (var, body, off) = match inner.split_once(':') {
            Some((v, b)) => (v.trim(), b, rest + 2 + v.len()),
            None if inner.contains('z') => ("z", inner, rest + 1),
            None => ("y", inner, rest + 1),
        };
        let g = crate::poly::parse_poly(body, &k0, var).map_err(|e| e.shift(off))?;
        match var {
            "z" => {
                let mut out = Vec::new();
                for c in g.coeffs() {
                    out.push(c.residue()?.0[0]);
                }
                unram = Some(out);
            }
            "y" => eis = Some(g.coeffs().iter().map(|c| c.prime_coord()).collect()),
            _ => return Err(Error::parse(rest + 1, format!("extension variable must be y or z, found '{var}'"))),
        }
        rest = close + 1;
    }
    Field::build(bk, p, prec, unram, eis)
}

/// Resolves an identifier inside an element expression.
pub fn eval_atom(name: &str, field: &FieldRef, pos: usize) -> Result<Elem> {
    match name {
        "t" if !field.mixed_char() => Ok(Elem::prime_uniformizer(field)),
        "y" if field.e > 1 => Ok(Elem::uniformizer(field)),
        "z" if field.f > 1 => Ok(Elem::unram_gen(field)),
        _ => Err(Error::parse(pos, format!("unknown symbol '{name}' in {}", field.name))),
    }
}

/// Evaluates an element expression exactly (constants carry full precision,
/// `O(...)` terms set the precision).
pub fn eval_elem(e: &Expr, field: &FieldRef) -> Result<Elem> {
    Ok(match e {
        Expr::Num(n) => Elem::from_int(field, *n),
        Expr::Var(v, pos) => eval_atom(v, field, *pos)?,
        Expr::Neg(a) => eval_elem(a, field)?.neg(),
        Expr::Add(a, b) => eval_elem(a, field)?.add(&eval_elem(b, field)?),
        Expr::Sub(a, b) => eval_elem(a, field)?.sub(&eval_elem(b, field)?),
        Expr::Mul(a, b) => eval_elem(a, field)?.mul(&eval_elem(b, field)?),
        Expr::Div(a, b) => eval_elem(a, field)?.div(&eval_elem(b, field)?)?,
        Expr::Pow(a, k) => {
            if !k.is_integer() {
                return Err(Error::parse(a.pos(), "fractional exponent outside a Hahn field"));
            }
            eval_elem(a, field)?.powi(k.to_integer())?
        }
        Expr::Call(name, args, pos) => {
            if name == "O" && args.len() == 1 {
                Elem::zero_prec(field, eval_elem(&args[0], field)?.val())
            } else {
                return Err(Error::parse(*pos, format!("unknown function '{name}'")));
            }
        }
    })
}

fn has_o(e: &Expr) -> bool {
    match e {
        Expr::Num(_) | Expr::Var(..) => false,
        Expr::Neg(a) | Expr::Pow(a, _) => has_o(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => has_o(a) || has_o(b),
        Expr::Call(n, args, _) => n == "O" || args.iter().any(has_o),
    }
}

/// Parses an element; without an explicit `O(...)` the field's default
/// precision applies.
pub fn parse_elem(s: &str, field: &FieldRef) -> Result<Elem> {
    let e = parse_expr(s)?;
    let x = eval_elem(&e, field)?;
    Ok(if has_o(&e) { x } else { x.at_working_prec() })
}

/// Parses a residue-field element: an integer code or an expression in `z`.
pub fn parse_res(s: &str, field: &FieldRef) -> Result<Res> {
    let x = parse_elem(s, field)?;
    x.residue()
}

fn eval_hahn(e: &Expr, k: &HahnRef) -> Result<Hahn> {
    let sym_ok = |v: &str| (v == "t" && !k.mixed()) || (v == "p" && k.mixed());
    Ok(match e {
        Expr::Num(n) => Hahn::from_int(k, *n)?,
        Expr::Var(v, pos) => {
            if sym_ok(v) {
                Hahn::monomial(k, 1, Rational64::from_integer(1))?
            } else {
                return Err(Error::parse(*pos, format!("unknown symbol '{v}' in a Hahn field")));
            }
        }
        Expr::Neg(a) => eval_hahn(a, k)?.neg(),
        Expr::Add(a, b) => eval_hahn(a, k)?.add(&eval_hahn(b, k)?)?,
        Expr::Sub(a, b) => eval_hahn(a, k)?.sub(&eval_hahn(b, k)?)?,
        Expr::Mul(a, b) => eval_hahn(a, k)?.mul(&eval_hahn(b, k)?)?,
        Expr::Div(a, b) => eval_hahn(a, k)?.div(&eval_hahn(b, k)?)?,
        Expr::Pow(a, g) => match a.as_ref() {
            Expr::Var(v, _) if sym_ok(v) => Hahn::monomial(k, 1, *g)?,
            Expr::Num(n) if k.mixed() && *n as u64 == k.ring.p => Hahn::monomial(k, 1, *g)?,
            _ => {
                if !g.is_integer() {
                    return Err(Error::parse(a.pos(), "fractional powers apply to the uniformizer only"));
                }
                let base = eval_hahn(a, k)?;
                let n = g.to_integer();
                let b = if n < 0 { base.inv()? } else { base };
                let mut acc = Hahn::from_int(k, 1)?;
                for _ in 0..n.unsigned_abs() {
                    acc = acc.mul(&b)?;
                }
                acc
            }
        },
        Expr::Call(name, _, pos) => {
            return Err(Error::parse(*pos, format!("unknown function '{name}' in a Hahn field")));
        }
    })
}

/// Parses a Hahn series such as `1 + t^(1/2) + 2*t^(3/2)`.
pub fn parse_hahn(s: &str, k: &HahnRef) -> Result<Hahn> {
    eval_hahn(&parse_expr(s)?, k)
}
