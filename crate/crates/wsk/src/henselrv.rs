//! The quotients `rv_n : K^× → K^×/(1 + n·M_K)`, the Henselian root
//! functions `h_{m,n}`, open balls described by rv-data, and sampled checks
//! of the Jacobian property.

use crate::anfun::Rat;
use crate::annuli::{val_meets, Disc};
use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::sample;
use crate::vfield::{Elem, FieldRef, Gamma};
use num_rational::Rational64;
use rand::Rng;
use std::fmt;

/// Largest shrink exponent tried by [`jacobian_check`].
pub const MAX_SHRINK: u32 = 8;

/// `v(n)` for the integer `n` viewed in the field.
pub fn val_n(field: &FieldRef, n: u64) -> Result<Rational64> {
    if n == 0 {
        return Err(Error::domain("the modulus n must be positive"));
    }
    Elem::from_int(field, n as i64)
        .val()
        .fin()
        .ok_or_else(|| Error::domain(format!("n = {n} vanishes in {}", field.name)))
}

/// A class of `K^×/(1 + n·M_K)`, or the zero class. The representative is
/// exact and carries the digits that determine the class.
#[derive(Clone, Debug)]
pub struct Rv {
    pub n: u64,
    pub rep: Elem,
}

/// `rv_n(x)`; needs `x` to `val(x) + val(n)` plus one digit.
pub fn rv(x: &Elem, n: u64) -> Result<Rv> {
    let vn = val_n(x.field(), n)?;
    if x.is_zero() {
        if x.is_exact() {
            return Ok(Rv { n, rep: x.clone() });
        }
        return Err(Error::precision("rv of a value that vanishes at precision"));
    }
    let e = x.field().e as i64;
    let v = x.val_s().expect("nonzero");
    let ks = v + (vn * e).to_integer() + 1;
    if x.prec_s() < ks {
        return Err(Error::precision(format!(
            "rv_{n} needs {} digits, the value has {}",
            ks - v,
            x.prec_s() - v
        )));
    }
    Ok(Rv {
        n,
        rep: x.truncate_exact(ks),
    })
}

impl Rv {
    pub fn is_zero(&self) -> bool {
        self.rep.is_zero()
    }

    pub fn val(&self) -> Gamma {
        self.rep.val()
    }

    /// Whether `rv_n(x)` is this class.
    pub fn contains(&self, x: &Elem) -> Result<bool> {
        let x = x.embed(self.rep.field())?;
        if self.is_zero() {
            return Ok(x.is_zero() && x.is_exact());
        }
        let vn = val_n(x.field(), self.n)?;
        let v = self.val().fin().expect("nonzero");
        val_meets(&x.sub(&self.rep), v + vn, true)
    }
}

impl PartialEq for Rv {
    fn eq(&self, o: &Rv) -> bool {
        self.n == o.n && self.rep.sub(&o.rep).is_zero()
    }
}

impl fmt::Display for Rv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rv{}({})", self.n, self.rep)
    }
}

fn eval(a: &[Elem], x: &Elem) -> Elem {
    let mut acc = Elem::zero(x.field());
    for c in a.iter().rev() {
        acc = acc.mul(x).add(c);
    }
    acc
}

fn derivative(a: &[Elem]) -> Vec<Elem> {
    a.iter().enumerate().skip(1).map(|(i, c)| c.mul(&Elem::from_int(c.field(), i as i64))).collect()
}

/// Decides `v(a) ≤ q`, treating a value that vanishes above `q` as large.
fn val_at_most(a: &Elem, q: Rational64) -> Result<bool> {
    val_meets(a, q, true).map(|b| !b)
}

/// The Hensel conditions at the representative of `x0`: `Some(c)` with
/// `c = a_{i0} x^{i0}` a dominant term when they hold.
fn hensel_conditions(a: &[Elem], x0: &Rv) -> Result<Option<Elem>> {
    let x = &x0.rep;
    let vn = val_n(x.field(), x0.n)?;
    let terms: Vec<Elem> = a.iter().enumerate().map(|(i, c)| c.mul(&x.pow(i as u64))).collect();
    let Some(o) = terms.iter().filter_map(|t| t.val().fin()).min() else {
        return Ok(None);
    };
    for t in &terms {
        if t.is_zero() && !t.is_exact() && t.prec() <= Gamma::Fin(o) {
            return Err(Error::precision("cannot find the dominant coefficient at this precision"));
        }
    }
    let Some(i0) = (1..terms.len()).find(|&i| terms[i].val() == Gamma::Fin(o)) else {
        return Ok(None);
    };
    let h1 = val_meets(&eval(a, x), o + vn * 2, true)?;
    if !h1 {
        return Ok(None);
    }
    let vx = x.val().fin().expect("nonzero");
    let fp = eval(&derivative(a), x);
    let h2 = if fp.is_zero() && fp.is_exact() {
        false
    } else {
        val_at_most(&fp, o - vx + vn)?
    };
    Ok(h2.then(|| terms[i0].clone()))
}

/// `h_{m,n}(a_0, …, a_m, x0)`: the unique root `b` of `Σ a_i y^i` with
/// `rv_n(b) = x0` when the Hensel conditions hold at the representative of
/// `x0`, and 0 otherwise.
pub fn h_mn(a: &[Elem], x0: &Rv) -> Result<Elem> {
    let l = x0.rep.field().clone();
    let a: Vec<Elem> = a.iter().map(|c| c.embed(&l)).collect::<Result<_>>()?;
    if x0.is_zero() {
        return Ok(Elem::zero(&l));
    }
    let Some(c) = hensel_conditions(&a, x0)? else {
        return Ok(Elem::zero(&l));
    };
    // g(u) = f(x·u)/c has integral coefficients and a simple root near 1.
    let x = &x0.rep;
    let g: Vec<Elem> = a
        .iter()
        .enumerate()
        .map(|(i, ai)| ai.mul(&x.pow(i as u64)).div(&c))
        .collect::<Result<_>>()?;
    let dg = derivative(&g);
    let mut u = Elem::one(&l).at_working_prec();
    let bound = 2 * l.prec_scaled() + 8;
    for _ in 0..bound {
        let gu = eval(&g, &u);
        if gu.is_zero() {
            let b = x.mul(&u);
            if !x0.contains(&b)? {
                return Err(Error::precision("Newton iteration left the rv class"));
            }
            return Ok(b);
        }
        let d = eval(&dg, &u);
        u = u.sub(&gu.div(&d)?).at_working_prec();
    }
    Err(Error::precision("Newton iteration did not converge"))
}

/// The open ball `{x : rv_n(x - h) = ξ}` as a disc around `h + rep(ξ)` of
/// radius exponent `ord(n·rep(ξ))`.
pub fn ball_from_rv(h: &Elem, xi: &Rv) -> Result<Disc> {
    if xi.is_zero() {
        return Err(Error::domain(format!("point {h}, not a ball")));
    }
    let (hh, rep) = crate::annuli::common(h, &xi.rep)?;
    let r = xi.val().fin().expect("nonzero") + val_n(rep.field(), xi.n)?;
    Ok(Disc {
        c: hh.add(&rep),
        r,
        open: true,
    })
}

/// Outcome of sampling the Jacobian property on a ball and its shrinkings.
#[derive(Clone, Debug)]
pub struct JacReport {
    pub seed: u64,
    pub n: u64,
    pub ball: Disc,
    /// `rv_n(F')` on the ball that passed.
    pub a: Option<Rv>,
    /// The passing ball is the given one shrunk by `n0`, reported as the
    /// exponent `k` of `n0 = p^k` (of `t^k` in equal characteristic).
    pub shrink: Option<u32>,
    pub pairs: usize,
    pub skipped: usize,
    /// Witnesses on the unshrunk ball.
    pub rv_failures: Vec<Elem>,
    pub ord_failures: Vec<(Elem, Elem)>,
    pub rvn_failures: Vec<(Elem, Elem)>,
}

impl JacReport {
    pub fn passed(&self) -> bool {
        self.shrink.is_some()
    }
}

impl fmt::Display for JacReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.shrink, &self.a) {
            (Some(k), Some(a)) => write!(f, "jacobian: passed on {} with shrink exponent {k}; a={a}", self.ball)?,
            _ => write!(f, "jacobian: failed on {}", self.ball)?,
        }
        write!(f, "; seed={} pairs={} skipped={}", self.seed, self.pairs, self.skipped)?;
        for x in self.rv_failures.iter().take(3) {
            write!(f, "\n  rv(Jac F) differs at {x}")?;
        }
        for (x, y) in self.ord_failures.iter().take(3) {
            write!(f, "\n  ord identity fails at ({x}, {y})")?;
        }
        for (x, y) in self.rvn_failures.iter().take(3) {
            write!(f, "\n  rv_n identity fails at ({x}, {y})")?;
        }
        Ok(())
    }
}

/// A copy of the field with more digits, for differences of close values.
fn fine_field(l: &FieldRef) -> FieldRef {
    let mut target = 3 * l.prec + 8;
    while target > l.prec {
        if let Ok(f) = l.with_prec(target) {
            return f;
        }
        target -= 1;
    }
    l.clone()
}

fn exact_in(x: &Elem, l: &FieldRef) -> Result<Elem> {
    let t = if x.is_exact() { x.clone() } else { x.truncate_exact(x.prec_s()) };
    t.embed(l)
}

fn exact_poly(p: &Poly, l: &FieldRef) -> Result<Poly> {
    Ok(Poly::new(l, p.coeffs().iter().map(|c| exact_in(c, l)).collect::<Result<_>>()?))
}

struct BallCheck {
    a: Option<Rv>,
    pairs: usize,
    skipped: usize,
    rv_failures: Vec<Elem>,
    ord_failures: Vec<(Elem, Elem)>,
    rvn_failures: Vec<(Elem, Elem)>,
}

impl BallCheck {
    fn ok(&self) -> bool {
        self.pairs > 0 && self.rv_failures.is_empty() && self.ord_failures.is_empty() && self.rvn_failures.is_empty()
    }
}

/// Smallest scaled exponent `k` with `c + π^k·u` in the ball for all integral `u`.
fn ball_start(d: &Disc) -> i64 {
    let re = d.r * d.c.field().e as i64;
    if d.open {
        re.floor().to_integer() + 1
    } else {
        re.ceil().to_integer()
    }
}

fn ball_point<R: Rng>(d: &Disc, rng: &mut R) -> Elem {
    let l = d.c.field();
    let k = ball_start(d) + rng.gen_range(0..3);
    let pi = Elem::uniformizer(l).powi(k).expect("uniformizer is invertible");
    d.c.add(&pi.mul(&sample::integral(l, rng))).at_working_prec()
}

fn check_ball<R: Rng>(f: &Rat, df: &Rat, d: &Disc, n: u64, trials: usize, rng: &mut R) -> Result<BallCheck> {
    let l = d.c.field().clone();
    let vn = val_n(&l, n)?;
    let pts: Vec<Elem> = (0..trials.max(2)).map(|_| ball_point(d, rng)).collect();
    let mut out = BallCheck {
        a: None,
        pairs: 0,
        skipped: 0,
        rv_failures: Vec::new(),
        ord_failures: Vec::new(),
        rvn_failures: Vec::new(),
    };
    let mut jac = Vec::with_capacity(pts.len());
    for x in &pts {
        let j = df.eval(x)?;
        jac.push(j.clone());
        let r = match rv(&j, n) {
            Ok(r) => r,
            Err(_) => {
                out.skipped += 1;
                continue;
            }
        };
        match &out.a {
            None => out.a = Some(r),
            Some(a) if *a != r => out.rv_failures.push(x.clone()),
            _ => {}
        }
    }
    let Some(a) = out.a.clone() else {
        return Err(Error::domain("degenerate Jacobian"));
    };
    if a.is_zero() {
        return Err(Error::domain("degenerate Jacobian"));
    }
    let va = a.val().fin().expect("nonzero");
    let two = Elem::from_int(&l, 2);
    let mut pairs = Vec::new();
    for (i, x) in pts.iter().enumerate() {
        pairs.push((x.clone(), pts[(i + 1) % pts.len()].clone()));
        pairs.push((x.clone(), d.c.mul(&two).sub(x).at_working_prec()));
        let k = ball_start(d) + 1 + rng.gen_range(0..4);
        let near = x.add(&Elem::uniformizer(&l).powi(k)?.mul(&sample::integral(&l, rng)));
        pairs.push((x.clone(), near.at_working_prec()));
    }
    for (x, y) in pairs {
        let dxy = x.sub(&y);
        if dxy.is_zero() {
            continue;
        }
        let dfxy = f.eval(&x)?.sub(&f.eval(&y)?);
        let want = va + dxy.val().fin().expect("nonzero");
        // Enough digits to read off rv_n of F(x) - F(y).
        if dfxy.prec() <= Gamma::Fin(want + vn) {
            out.skipped += 1;
            continue;
        }
        out.pairs += 1;
        if dfxy.val() != Gamma::Fin(want) {
            out.ord_failures.push((x, y));
            continue;
        }
        let lhs = a.rep.mul(&dxy);
        if !val_meets(&dfxy.sub(&lhs), want + vn, true)? {
            out.rvn_failures.push((x, y));
        }
    }
    Ok(out)
}

/// Samples the Jacobian property of `f` on `ball` for `rv_n`, shrinking the
/// ball around its center by `p^k` (`t^k` in equal characteristic) for
/// `k = 0, 1, …` up to [`MAX_SHRINK`] until it holds.
pub fn jacobian_check(f: &Rat, ball: &Disc, n: u64, trials: usize, seed: u64) -> Result<JacReport> {
    let l = fine_field(ball.c.field());
    let f = Rat::new(exact_poly(&f.num, &l)?, exact_poly(&f.den, &l)?)?;
    let df = f.derivative();
    let center = exact_in(&ball.c, &l)?;
    let step = if l.mixed_char() { val_n(&l, l.p())? } else { Rational64::from_integer(1) };
    let mut rng = sample::rng(seed);
    let mut rep = JacReport {
        seed,
        n,
        ball: ball.clone(),
        a: None,
        shrink: None,
        pairs: 0,
        skipped: 0,
        rv_failures: Vec::new(),
        ord_failures: Vec::new(),
        rvn_failures: Vec::new(),
    };
    for k in 0..=MAX_SHRINK {
        let d = Disc {
            c: center.clone(),
            r: ball.r + step * k as i64,
            open: ball.open,
        };
        let res = check_ball(&f, &df, &d, n, trials, &mut rng)?;
        rep.pairs += res.pairs;
        rep.skipped += res.skipped;
        let ok = res.ok();
        if k == 0 {
            rep.rv_failures = res.rv_failures;
            rep.ord_failures = res.ord_failures;
            rep.rvn_failures = res.rvn_failures;
        }
        if ok {
            rep.a = res.a;
            rep.shrink = Some(k);
            return Ok(rep);
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anfun::parse_rational;
    use crate::vfield::{parse_elem, Field};

    fn el(s: &str, k: &FieldRef) -> Elem {
        parse_elem(s, k).unwrap()
    }

    #[test]
    fn rv_examples() {
        let q3 = Field::qp(3, 12).unwrap();
        assert_eq!(rv(&el("12", &q3), 1).unwrap(), rv(&el("3", &q3), 1).unwrap());
        assert_ne!(rv(&el("3", &q3), 1).unwrap(), rv(&el("6", &q3), 1).unwrap());
        let q2 = Field::qp(2, 12).unwrap();
        assert_ne!(rv(&el("1", &q2), 2).unwrap(), rv(&el("3", &q2), 2).unwrap());
        assert_eq!(rv(&el("1", &q2), 2).unwrap(), rv(&el("5", &q2), 2).unwrap());
        assert!(rv(&el("3", &q3), 1).unwrap().contains(&el("3 + 9 + 27", &q3)).unwrap());
        let fpt = Field::fpt(3, 12).unwrap();
        assert!(matches!(rv(&el("t", &fpt), 3), Err(Error::Domain(_))));
    }

    #[test]
    fn h_mn_examples() {
        let q7 = Field::qp(7, 12).unwrap();
        let f: Vec<Elem> = [-2, 0, 1].iter().map(|&c| Elem::from_int(&q7, c)).collect();
        let b = h_mn(&f, &rv(&el("3", &q7), 1).unwrap()).unwrap();
        let want = el("3 + 7 + 2*7^2 + 6*7^3", &q7);
        assert!(b.sub(&want).val() >= Gamma::int(4), "{b}");
        assert!(b.mul(&b).sub(&Elem::from_int(&q7, 2)).is_zero());
        assert!(h_mn(&f, &rv(&el("1", &q7), 1).unwrap()).unwrap().is_zero());
        let g: Vec<Elem> = [-5, 1].iter().map(|&c| Elem::from_int(&q7, c)).collect();
        assert!(h_mn(&g, &rv(&el("5", &q7), 1).unwrap()).unwrap().eq_prec(&el("5", &q7)));
    }

    #[test]
    fn hensel_conditions_are_class_invariant() {
        let q3 = Field::qp(3, 12).unwrap();
        let f: Vec<Elem> = [0, 6, 1].iter().map(|&c| Elem::from_int(&q3, c)).collect();
        let x0 = rv(&el("3", &q3), 1).unwrap();
        let b = h_mn(&f, &x0).unwrap();
        assert!(b.eq_prec(&el("-6", &q3)));
        let mut rng = sample::rng(3);
        for _ in 0..20 {
            let u = sample::integral(&q3, &mut rng);
            let x = el("3", &q3).add(&el("9", &q3).mul(&u));
            let other = rv(&x, 1).unwrap();
            let mut y = other.clone();
            y.rep = x.truncate_exact(x.prec_s());
            assert!(h_mn(&f, &y).unwrap().eq_prec(&b));
        }
    }

    #[test]
    fn ball_examples() {
        let q3 = Field::qp(3, 12).unwrap();
        let xi = rv(&el("3", &q3), 1).unwrap();
        assert_eq!(ball_from_rv(&el("0", &q3), &xi).unwrap().to_string(), "|x-3| < (1)");
        assert_eq!(ball_from_rv(&el("1", &q3), &xi).unwrap().to_string(), "|x-4| < (1)");
        let q2 = Field::qp(2, 12).unwrap();
        let b = ball_from_rv(&el("0", &q2), &rv(&el("2", &q2), 2).unwrap()).unwrap();
        assert_eq!(b.to_string(), "|x-2| < (2)");
        let zero = Rv { n: 1, rep: Elem::zero(&q3) };
        assert!(matches!(ball_from_rv(&el("0", &q3), &zero), Err(Error::Domain(_))));
        let mut rng = sample::rng(8);
        let h = el("5", &q3);
        let d = ball_from_rv(&h, &xi).unwrap();
        for _ in 0..500 {
            let x = sample::near(&q3, &el("8", &q3), 3, &mut rng);
            let a = xi.contains(&x.sub(&h)).unwrap();
            assert_eq!(a, d.contains(&x).unwrap(), "{x}");
        }
    }

    #[test]
    fn jacobian_examples() {
        let q7 = Field::qp(7, 12).unwrap();
        let sq = parse_rational("x^2", &q7).unwrap();
        let ball = Disc { c: el("1", &q7), r: Rational64::from_integer(1), open: false };
        let r = jacobian_check(&sq, &ball, 1, 40, 1).unwrap();
        assert_eq!(r.shrink, Some(0), "{r}");
        assert_eq!(r.a.unwrap(), rv(&el("2", &q7), 1).unwrap());
        let id = parse_rational("x", &q7).unwrap();
        let r = jacobian_check(&id, &ball, 1, 40, 2).unwrap();
        assert!(r.passed() && r.a.unwrap() == rv(&el("1", &q7), 1).unwrap());
        let whole = Disc { c: el("0", &q7), r: Rational64::from_integer(0), open: false };
        let r = jacobian_check(&sq, &whole, 1, 40, 3).unwrap();
        assert!(!r.passed(), "{r}");
        assert!(r.ord_failures.iter().any(|(x, y)| x.add(y).is_zero()), "{r}");
        let c = parse_rational("3", &q7).unwrap();
        assert!(matches!(jacobian_check(&c, &ball, 1, 10, 4), Err(Error::Domain(_))));
    }
}
