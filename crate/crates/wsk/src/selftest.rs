//! Small invariant suites run by `wsk selftest`.

use crate::anfun::{parse_rational, AnnulusFunction, EvalIn};
use crate::annuli::{parse_annulus, Annulus, Disc};
use crate::error::Result;
use crate::henselrv::{h_mn, jacobian_check, rv};
use crate::sample;
use crate::sepseries::{snp_reassemble, Caps, SepSeries, Var};
use crate::termnorm::{check_cover, normalize, parse_term, Symbols};
use crate::vfield::{parse_elem, teichmuller, BaseKind, Elem, Field, FieldRef};
use num_rational::Rational64;
use rand::Rng;
use std::fmt;

#[derive(Clone, Debug)]
pub struct Suite {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl Suite {
    fn new(name: &'static str) -> Suite {
        Suite {
            name,
            cases: 0,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, r: Result<bool>, what: impl FnOnce() -> String) {
        self.cases += 1;
        match r {
            Ok(true) => {}
            Ok(false) => self.failures.push(what()),
            Err(e) => self.failures.push(format!("{}: {e}", what())),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "selftest {}: ok ({} cases)", self.name, self.cases)
        } else {
            write!(
                f,
                "selftest {}: FAILED {} of {} cases; first: {}",
                self.name,
                self.failures.len(),
                self.cases,
                self.failures[0]
            )
        }
    }
}

fn fields() -> Vec<FieldRef> {
    vec![
        Field::qp(2, 12).expect("field"),
        Field::qp(3, 12).expect("field"),
        Field::fpt(5, 12).expect("field"),
        Field::ramified_sqrt(BaseKind::Qp, 7, 12).expect("field"),
        Field::unramified(BaseKind::Qp, 3, 2, 12).expect("field"),
    ]
}

fn field_arith(seed: u64) -> Suite {
    let mut s = Suite::new("field");
    let mut rng = sample::rng(seed);
    for k in fields() {
        for _ in 0..40 {
            let a = sample::integral(&k, &mut rng);
            let b = sample::unit(&k, &mut rng).mul(&Elem::uniformizer(&k).pow(rng.gen_range(0..3)));
            let back = a.mul(&b).div(&b).map(|q| q.sub(&a).is_zero());
            s.record(back, || format!("(a*b)/b != a in {}", k.name));
            let vsum = a.mul(&b).val() == a.val() + b.val() || a.is_zero();
            s.record(Ok(vsum), || format!("val(ab) != val a + val b in {}", k.name));
        }
        if k.mixed_char() {
            for r in k.res.elements() {
                let t = teichmuller(&r, &k).map(|t| t.pow(k.q()).sub(&t).is_zero());
                s.record(t, || format!("Teichmüller lift not fixed in {}", k.name));
            }
        }
    }
    s
}

fn series_fields() -> Vec<FieldRef> {
    vec![Field::qp(3, 12).expect("field"), Field::fpt(3, 12).expect("field")]
}

fn weierstrass(seed: u64) -> Suite {
    let mut s = Suite::new("weierstrass");
    let mut rng = sample::rng(seed);
    for k in series_fields() {
        let caps = Caps::for_field(&k);
        for i in 0..20 {
            let v = if i % 2 == 0 { Var::Xi(0) } else { Var::Rho(0) };
            let f = sample::regular_series(&k, 1, 1, caps, v, rng.gen_range(0..3), &mut rng);
            let g = sample::series(&k, 1, 1, caps, 5, &mut rng);
            let r = (|| {
                let rep = f.regular_degree(v)?;
                let (q, r) = SepSeries::weierstrass_divide(&g, &f, &rep)?;
                let idx = if i % 2 == 0 { 0 } else { 1 };
                let bound = r.terms().all(|(e, _)| e.get(idx) < rep.degree);
                let (u, p) = SepSeries::weierstrass_prepare(&f, &rep)?;
                Ok(bound && q.mul(&f).add(&r).eq_mod(&g) && u.mul(&p).eq_mod(&f))
            })();
            s.record(r, || format!("division of {g} by {f} over {}", k.name));
        }
    }
    s
}

fn gauss_and_snp(seed: u64) -> Suite {
    let mut s = Suite::new("gauss-snp");
    let mut rng = sample::rng(seed);
    for k in series_fields() {
        let caps = Caps::for_field(&k);
        for _ in 0..20 {
            let f = sample::series(&k, 2, 1, caps, 4, &mut rng);
            let g = sample::series(&k, 2, 1, caps, 4, &mut rng);
            let ok = f.mul(&g).gauss_norm() == f.gauss_norm() + g.gauss_norm();
            s.record(Ok(ok), || format!("|fg| != |f||g| for {f} and {g}"));
            let r = f.snp_decompose(&[0]).map(|t| snp_reassemble(&t, &f).eq_mod(&f));
            s.record(r, || format!("decomposition of {f} does not reassemble"));
        }
    }
    s
}

fn annuli(seed: u64) -> Suite {
    let mut s = Suite::new("annuli");
    let k = Field::qp(7, 12).expect("field");
    let formulas = [
        "|x^2-7| < (1); split ext=Q7[y^2-7]",
        "|x^2-2| <= (1)",
        "|x-1| < (0) && |x-8| > (2)",
    ];
    for f in formulas {
        let r = (|| {
            let a = parse_annulus(f, &k)?;
            let l = a.splitting_field();
            let comp = a.complement()?;
            let mut rng = sample::rng(seed);
            let centers = [Elem::zero(&l), Elem::one(&l), Elem::from_int(&l, 3)];
            for x in sample::points(&l, &centers, 100, &mut rng) {
                let mut n = a.contains(&x)? as usize;
                for c in &comp {
                    n += c.contains(&x)? as usize;
                }
                if n != 1 {
                    return Ok(false);
                }
            }
            Ok(true)
        })();
        s.record(r, || format!("complement of {f} is not a partition"));
    }
    s
}

fn ml(seed: u64) -> Suite {
    let mut s = Suite::new("ml");
    let k = Field::qp(3, 12).expect("field");
    let cases = [("|x| <= (0) && |x-1| > (1)", "(x-1)^2*(x-3)/(x-4)"), ("|x| < (0)", "1+3*x")];
    for (host, f) in cases {
        let r = (|| {
            let h: Annulus = parse_annulus(host, &k)?;
            let fun = AnnulusFunction::new(h, parse_rational(f, &k)?)?;
            let d = fun.unit_factor()?;
            for x in fun.samples(40, seed)? {
                let mut rhs = d.p.eval_in(&x)?.mul(&d.e.evaluate(&x)?);
                for (b, &n) in fun.host.holes.iter().zip(&d.n) {
                    rhs = rhs.mul(&b.p.eval_in(&x)?.powi(n)?);
                }
                if !rhs.sub(&fun.evaluate(&x)?).is_zero() || !d.cert.holds_at(&d.e, &x)? {
                    return Ok(false);
                }
            }
            Ok(true)
        })();
        s.record(r, || format!("factorization of {f} on {host}"));
    }
    s
}

fn terms(seed: u64) -> Suite {
    let mut s = Suite::new("terms");
    let k = Field::qp(3, 12).expect("field");
    let mut syms = Symbols::new();
    let decl = syms.declare("G[0,1]=r1+r1^2", &k, Caps::for_field(&k));
    s.record(decl.map(|_| true), || "declaration".to_string());
    for t in ["x+3", "inv(x-1)", "x*x-3", "G(3*x)+1", "inv(x)*(x+9)"] {
        let r = (|| {
            let term = parse_term(t, &syms, &k)?;
            let cover = normalize(&term, &syms, &k)?;
            Ok(check_cover(&cover, &term, &syms, 60, seed).passed())
        })();
        s.record(r, || format!("cover of {t}"));
    }
    s
}

fn hensel(seed: u64) -> Suite {
    let mut s = Suite::new("hensel");
    let k = Field::qp(7, 12).expect("field");
    let a: Vec<Elem> = [-2, 0, 1].iter().map(|&c| Elem::from_int(&k, c)).collect();
    for x0 in ["3", "4", "1"] {
        let r = (|| {
            let class = rv(&parse_elem(x0, &k)?, 1)?;
            let b = h_mn(&a, &class)?;
            let root = b.mul(&b).sub(&a[0].neg()).is_zero();
            Ok(if x0 == "1" { b.is_zero() } else { root && class.contains(&b)? })
        })();
        s.record(r, || format!("h for y^2-2 at rv({x0})"));
    }
    let r = (|| {
        let f = parse_rational("x^2", &k)?;
        let ball = Disc {
            c: Elem::one(&k),
            r: Rational64::from_integer(0),
            open: true,
        };
        Ok(jacobian_check(&f, &ball, 1, 40, seed)?.passed())
    })();
    s.record(r, || "jacobian property of x^2 on 1+7Z7".to_string());
    s
}

/// Runs every suite with the given seed.
pub fn run(seed: u64) -> Vec<Suite> {
    vec![
        field_arith(seed),
        weierstrass(seed),
        gauss_and_snp(seed),
        annuli(seed),
        ml(seed),
        terms(seed),
        hensel(seed),
    ]
}
