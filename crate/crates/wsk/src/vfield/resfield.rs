//! Finite residue fields 𝔽_q = 𝔽_p[z]/(g).

use std::fmt;

/// An element of a residue field: coefficients of `1, z, …, z^(f-1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Res(pub Vec<u64>);

/// The residue field 𝔽_p[z]/(g) with g monic irreducible of degree f.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fq {
    pub p: u64,
    pub f: usize,
    /// Monic modulus, low degree first, length f + 1.
    pub modulus: Vec<u64>,
}

fn poly_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lc_inv = pow_mod(b[db], p - 2, p);
    while r.len() > db {
        let c = *r.last().unwrap() * lc_inv % p;
        let sh = r.len() - 1 - db;
        for i in 0..=db {
            r[sh + i] = (r[sh + i] + p * p - c * b[i] % p) % p;
        }
        r.pop();
        while r.len() > 1 && *r.last().unwrap() == 0 && r.len() > db {
            r.pop();
        }
    }
    r
}

fn pow_mod(mut a: u64, mut k: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    a %= p;
    while k > 0 {
        if k & 1 == 1 {
            acc = acc * a % p;
        }
        a = a * a % p;
        k >>= 1;
    }
    acc
}

/// Whether a monic polynomial over 𝔽_p (low degree first) is irreducible.
pub fn is_irreducible(g: &[u64], p: u64) -> bool {
    let n = g.len() - 1;
    if n == 0 {
        return false;
    }
    for d in 1..=n / 2 {
        let count = p.pow(d as u32);
        for code in 0..count {
            let mut h = Vec::with_capacity(d + 1);
            let mut c = code;
            for _ in 0..d {
                h.push(c % p);
                c /= p;
            }
            h.push(1);
            if poly_rem(g, &h, p).iter().all(|&x| x == 0) {
                return false;
            }
        }
    }
    true
}

/// The lexicographically first monic irreducible polynomial of degree f over 𝔽_p.
pub fn first_irreducible(f: usize, p: u64) -> Vec<u64> {
    if f == 1 {
        return vec![0, 1];
    }
    let count = p.pow(f as u32);
    for code in 0..count {
        let mut g = Vec::with_capacity(f + 1);
        let mut c = code;
        for _ in 0..f {
            g.push(c % p);
            c /= p;
        }
        g.push(1);
        if is_irreducible(&g, p) {
            return g;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

impl Fq {
    pub fn new(p: u64, modulus: Vec<u64>) -> Self {
        let f = modulus.len() - 1;
        Fq { p, f, modulus }
    }

    pub fn prime(p: u64) -> Self {
        Fq::new(p, vec![0, 1])
    }

    pub fn size(&self) -> u64 {
        self.p.pow(self.f as u32)
    }

    pub fn zero(&self) -> Res {
        Res(vec![0; self.f])
    }

    pub fn one(&self) -> Res {
        self.from_int(1)
    }

    pub fn from_int(&self, n: i64) -> Res {
        let mut v = vec![0; self.f];
        v[0] = n.rem_euclid(self.p as i64) as u64;
        Res(v)
    }

    /// The residue of the generator `z`.
    pub fn gen(&self) -> Res {
        if self.f == 1 {
            return self.from_int((self.p - self.modulus[0]) as i64);
        }
        let mut v = vec![0; self.f];
        v[1] = 1;
        Res(v)
    }

    pub fn is_zero(&self, a: &Res) -> bool {
        a.0.iter().all(|&c| c == 0)
    }

    pub fn add(&self, a: &Res, b: &Res) -> Res {
        Res(a.0.iter().zip(&b.0).map(|(x, y)| (x + y) % self.p).collect())
    }

    pub fn neg(&self, a: &Res) -> Res {
        Res(a.0.iter().map(|x| (self.p - x) % self.p).collect())
    }

    pub fn sub(&self, a: &Res, b: &Res) -> Res {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &Res, b: &Res) -> Res {
        let p = self.p;
        if self.f == 1 {
            return Res(vec![a.0[0] * b.0[0] % p]);
        }
        let mut prod = vec![0u64; 2 * self.f - 1];
        for (i, x) in a.0.iter().enumerate() {
            for (j, y) in b.0.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % p;
            }
        }
        let mut r = poly_rem(&prod, &self.modulus, p);
        r.resize(self.f, 0);
        Res(r)
    }

    pub fn pow(&self, a: &Res, mut k: u64) -> Res {
        let mut acc = self.one();
        let mut b = a.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(&acc, &b);
            }
            b = self.mul(&b, &b);
            k >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: &Res) -> Option<Res> {
        if self.is_zero(a) {
            None
        } else {
            Some(self.pow(a, self.size() - 2))
        }
    }

    /// All elements in a fixed enumeration order (integer code ascending).
    pub fn elements(&self) -> Vec<Res> {
        (0..self.size()).map(|c| self.from_code(c)).collect()
    }

    pub fn from_code(&self, mut c: u64) -> Res {
        let mut v = Vec::with_capacity(self.f);
        for _ in 0..self.f {
            v.push(c % self.p);
            c /= self.p;
        }
        Res(v)
    }

    pub fn code(&self, a: &Res) -> u64 {
        a.0.iter().rev().fold(0, |acc, &c| acc * self.p + c)
    }

    /// Whether `a` lies in the prime field.
    pub fn is_prime_field(&self, a: &Res) -> bool {
        a.0[1..].iter().all(|&c| c == 0)
    }

    pub fn fmt_res(&self, a: &Res) -> String {
        if self.f == 1 {
            return a.0[0].to_string();
        }
        let mut parts = Vec::new();
        for (i, &c) in a.0.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            parts.push(match (i, c) {
                (0, _) => c.to_string(),
                (1, 1) => "z".to_string(),
                (1, _) => format!("{c}*z"),
                (_, 1) => format!("z^{i}"),
                _ => format!("{c}*z^{i}"),
            });
        }
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join("+")
        }
    }
}

impl fmt::Display for Res {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "[{}]", s.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f9_multiplicative_group() {
        let g = first_irreducible(2, 3);
        let k = Fq::new(3, g);
        assert_eq!(k.size(), 9);
        for a in k.elements().into_iter().skip(1) {
            assert_eq!(k.pow(&a, 8), k.one());
            assert_eq!(k.mul(&a, &k.inv(&a).unwrap()), k.one());
        }
    }

    #[test]
    fn irreducibility() {
        assert!(is_irreducible(&[1, 0, 1], 3));
        assert!(!is_irreducible(&[1, 0, 1], 5));
        assert!(is_irreducible(&[1, 1, 0, 1], 2));
    }
}
