//! Random points of the valuation ring for pointwise verification.

use crate::sepseries::{Caps, Mono, SepSeries, Var};
use crate::termnorm::Term;
use crate::vfield::{Elem, FieldRef};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform over the residue classes modulo π^N, N the working precision.
pub fn integral<R: Rng>(field: &FieldRef, rng: &mut R) -> Elem {
    let b = &field.base;
    let n = field.prec.max(1) as usize;
    let c = (0..field.degree())
        .map(|_| {
            let digits: Vec<u64> = (0..n).map(|_| rng.gen_range(0..b.p)).collect();
            b.from_digits(&digits, field.prec)
        })
        .collect();
    Elem::from_coords(field, c).at_working_prec()
}

/// A point `c + π^k u` with k in `0..=kmax` (units of 1/e) and u integral.
pub fn near<R: Rng>(field: &FieldRef, c: &Elem, kmax: i64, rng: &mut R) -> Elem {
    let c = c.embed(field).expect("center embeds into the sample field");
    let k = rng.gen_range(0..=kmax.max(0));
    let pi = Elem::uniformizer(field).pow(k as u64);
    let u = integral(field, rng);
    c.add(&pi.mul(&u)).at_working_prec()
}

/// A mix of uniform points and points clustered around `centers`.
pub fn points<R: Rng>(field: &FieldRef, centers: &[Elem], n: usize, rng: &mut R) -> Vec<Elem> {
    let kmax = 4 * field.e as i64;
    (0..n)
        .map(|i| {
            if centers.is_empty() || i % 3 == 0 {
                integral(field, rng)
            } else {
                let c = &centers[rng.gen_range(0..centers.len())];
                near(field, c, kmax, rng)
            }
        })
        .collect()
}

/// A unit: a nonzero constant digit plus a random multiple of π.
pub fn unit<R: Rng>(field: &FieldRef, rng: &mut R) -> Elem {
    let a = Elem::from_int(field, rng.gen_range(1..field.p() as i64));
    a.add(&Elem::uniformizer(field).mul(&integral(field, rng))).at_working_prec()
}

/// `π^k · u` with k in `1..=3` and u integral.
pub fn small<R: Rng>(field: &FieldRef, rng: &mut R) -> Elem {
    let k = rng.gen_range(1..=3u64);
    Elem::uniformizer(field).pow(k).mul(&integral(field, rng)).at_working_prec()
}

fn exps<R: Rng>(m: usize, n: usize, xdeg: u32, rdeg: u32, rng: &mut R) -> Vec<u32> {
    let mut e = vec![0; m + n];
    let (mut xb, mut rb) = (rng.gen_range(0..=xdeg), rng.gen_range(0..=rdeg));
    while xb > 0 && m > 0 {
        e[rng.gen_range(0..m)] += 1;
        xb -= 1;
    }
    while rb > 0 && n > 0 {
        e[m + rng.gen_range(0..n)] += 1;
        rb -= 1;
    }
    e
}

/// A sparse series with `terms` monomials of total degree at most 4 in each
/// block; coefficients are units or small with equal odds.
pub fn series<R: Rng>(field: &FieldRef, m: usize, n: usize, caps: Caps, terms: usize, rng: &mut R) -> SepSeries {
    let mut s = SepSeries::zero(field, m, n, caps);
    for _ in 0..terms {
        let e = exps(m, n, caps.dx.min(4), caps.dr.min(4), rng);
        let c = if rng.gen_bool(0.5) { unit(field, rng) } else { small(field, rng) };
        s = s.add(&s.monomial(Mono::from_slice(&e), c));
    }
    s
}

/// A series regular of degree `d` in `v`, built from unit terms that keep
/// the regularity and small terms anywhere.
pub fn regular_series<R: Rng>(field: &FieldRef, m: usize, n: usize, caps: Caps, v: Var, d: u32, rng: &mut R) -> SepSeries {
    let mut s = SepSeries::zero(field, m, n, caps);
    let i = match v {
        Var::Xi(i) => i,
        Var::Rho(j) => m + j,
    };
    s = s.add(&s.monomial(Mono::var(i, d), unit(field, rng)));
    for _ in 0..rng.gen_range(2..7) {
        let mut e = exps(m, n, caps.dx.min(4), caps.dr.min(3), rng);
        let c = if rng.gen_bool(0.4) {
            small(field, rng)
        } else {
            let other_r: u32 = e[m..].iter().enumerate().filter(|(k, _)| m + k != i).map(|(_, a)| *a).sum();
            match v {
                // Unit terms without ρ have x_i-degree below d.
                Var::Xi(_) if e[m..].iter().all(|a| *a == 0) => {
                    if d == 0 {
                        continue;
                    }
                    e[i] = e[i].min(d - 1);
                }
                // Unit terms without other ρ have r_i-degree above d.
                Var::Rho(_) if other_r == 0 => {
                    e[i] = e[i].max(d + 1);
                    if e[i] > caps.dr {
                        continue;
                    }
                }
                _ => {}
            }
            unit(field, rng)
        };
        s = s.add(&s.monomial(Mono::from_slice(&e), c));
    }
    s
}

/// A random term of depth at most `depth` over `x`, small constants and the
/// given symbols with their arities.
pub fn term<R: Rng>(field: &FieldRef, symbols: &[(&str, usize)], depth: usize, rng: &mut R) -> Term {
    let leaf = |rng: &mut R| {
        if rng.gen_bool(0.5) {
            Term::Var
        } else {
            Term::Const(Elem::from_int(field, [1, 2, 3, -1, 9, -3, 4][rng.gen_range(0..7)]))
        }
    };
    if depth == 0 {
        return leaf(rng);
    }
    let sub = |rng: &mut R| Box::new(term(field, symbols, depth - 1, rng));
    match rng.gen_range(0..6) {
        0 => leaf(rng),
        1 => Term::Add(sub(rng), sub(rng)),
        2 => Term::Mul(sub(rng), sub(rng)),
        3 => Term::Inv(sub(rng)),
        _ if symbols.is_empty() => leaf(rng),
        _ => {
            let (name, arity) = symbols[rng.gen_range(0..symbols.len())];
            Term::Apply(name.to_string(), (0..arity).map(|_| term(field, symbols, depth - 1, rng)).collect())
        }
    }
}
