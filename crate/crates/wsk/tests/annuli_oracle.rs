use wsk::annuli::{parse_annulus, Annulus, Intersection};
use wsk::sample;
use wsk::vfield::{parse_elem, resfield::first_irreducible, BaseKind, Elem, Field, FieldRef};

fn compositum(p: u64) -> FieldRef {
    let k = Field::qp(p, 12).unwrap();
    let b = &k.base;
    let eis = vec![b.from_i64(-(p as i64), wsk::vfield::INF_PREC), b.exact_zero(), b.from_i64(1, wsk::vfield::INF_PREC)];
    Field::build(BaseKind::Qp, p, 12, Some(first_irreducible(2, p)), Some(eis)).unwrap()
}

fn count(pieces: &[Annulus], x: &Elem) -> usize {
    pieces.iter().filter(|a| a.contains(x).unwrap()).count()
}

fn check(p: u64, formulas: &[&str], centers: &[&str]) {
    let k = Field::qp(p, 12).unwrap();
    let m = compositum(p);
    let cs: Vec<Elem> = centers.iter().map(|c| parse_elem(c, &m).unwrap()).collect();
    let mut rng = sample::rng(11);
    let pts = sample::points(&m, &cs, 240, &mut rng);
    let anns: Vec<Annulus> = formulas.iter().map(|s| parse_annulus(s, &k).unwrap()).collect();
    for a in &anns {
        let l = a.splitting_field();
        let model = a.model(&l).unwrap();
        let comp = a.complement().unwrap();
        let dec: Vec<Annulus> = a.decompose_standard().unwrap().into_iter().map(|x| x.0).collect();
        let lin = a.linear_split(&l).unwrap();
        for x in &pts {
            let inside = a.contains(x).unwrap();
            let in_model = model.iter().filter(|pc| pc.contains(x).unwrap()).count();
            assert_eq!(in_model, inside as usize, "model of {a} at {x}");
            assert_eq!(count(&comp, x) + inside as usize, 1, "complement of {a} at {x}");
            assert_eq!(count(&dec, x), inside as usize, "decomposition of {a} at {x}");
            assert_eq!(count(&lin, x), inside as usize, "linear split of {a} at {x}");
        }
        for b in &anns {
            let both: Vec<bool> = pts.iter().map(|x| a.contains(x).unwrap() && b.contains(x).unwrap()).collect();
            match a.intersect(b).unwrap() {
                Intersection::Formula(f) => {
                    for (x, want) in pts.iter().zip(&both) {
                        assert_eq!(f.contains(x).unwrap(), *want, "{a} ∩ {b} = {f} at {x}");
                    }
                }
                Intersection::Empty(_) => assert!(both.iter().all(|w| !w), "{a} ∩ {b} claimed empty"),
            }
        }
    }
}

#[test]
fn q3_corpus_agrees_with_direct_evaluation() {
    check(
        3,
        &[
            "|x| <= (0) && |x| >= (1)",
            "|x| < (0)",
            "|x| <= (1)",
            "|x-1| <= (1)",
            "|x| < (0) && |x| >= (1)",
            "|x^2-3| >= (2) && |x| <= (0); split ext=Q3[y^2-3]",
            "|x-1| < (0) && |x-4| > (2) && |x-7| >= (2)",
        ],
        &["0", "1", "4", "7", "y", "-y", "z"],
    );
}

#[test]
fn q7_corpus_agrees_with_direct_evaluation() {
    check(
        7,
        &[
            "|x| <= (0) && |x^2-7| >= (1); split ext=Q7[y^2-7]",
            "|x^2-7| < (1); split ext=Q7[y^2-7]",
            "|x^2-2| <= (1)",
            "|x^2-2| <= (2) && |x-3| <= (1)",
            "|x^2-2| < (0) && |x^2-2| > (2)",
            "|x| <= (1/2); split ext=Q7[y^2-7]",
        ],
        &["0", "3", "-3", "y", "-y", "z", "1"],
    );
}

#[test]
fn sign_covers_agree_with_direct_evaluation() {
    use num_rational::Rational64;
    use rand::Rng;
    use wsk::annuli::{cover_by_sign, AbsCmp};
    use wsk::poly::Poly;
    let k = Field::qp(3, 12).unwrap();
    let m = compositum(3);
    let mut rng = sample::rng(5);
    let centers: Vec<Elem> = ["0", "1", "3", "4", "9", "2"].iter().map(|c| parse_elem(c, &m).unwrap()).collect();
    let pts = sample::points(&m, &centers, 150, &mut rng);
    for case in 0..40 {
        let mut make = |n: usize| {
            let mut p = Poly::one(&k);
            for _ in 0..n {
                let a = [0, 1, 3, 4, 9, 2, 12][rng.gen_range(0..7)];
                p = p.mul(&Poly::from_ints(&k, &[-a, 1]));
            }
            p
        };
        let num = make(case % 3 + 1).scale(&Elem::from_int(&k, [1, 3, 9][case % 3]));
        let den = make(case % 2);
        let q = Rational64::new(rng.gen_range(-2..5), [1, 2][case % 2]);
        let cmp = [AbsCmp::Le, AbsCmp::Lt, AbsCmp::Ge, AbsCmp::Gt][case % 4];
        let cover = cover_by_sign(&num, &den, q, cmp, &k).unwrap();
        for x in &pts {
            let off_s = cover
                .exceptional
                .iter()
                .all(|s| !x.sub(&s.embed(&m).unwrap()).is_zero());
            let dv = den.eval(x);
            if !off_s || dv.is_zero() {
                continue;
            }
            let v = num.eval(x).div(&dv).unwrap();
            let want = match v.val() {
                wsk::vfield::Gamma::Fin(r) => match cmp {
                    AbsCmp::Le => r >= q,
                    AbsCmp::Lt => r > q,
                    AbsCmp::Ge => r <= q,
                    AbsCmp::Gt => r < q,
                },
                wsk::vfield::Gamma::Inf => continue,
            };
            let got = count(&cover.pieces.iter().map(|p| p.0.clone()).collect::<Vec<_>>(), x);
            assert_eq!(got, want as usize, "case {case}: |{num}/({den})| {cmp} ({q}) at {x}: {:?}",
                cover.pieces.iter().map(|p| p.0.to_string()).collect::<Vec<_>>());
        }
    }
}

#[test]
fn sign_covers_with_roots_outside_the_field() {
    use num_rational::Rational64;
    use rand::Rng;
    use wsk::annuli::{cover_by_sign, AbsCmp};
    use wsk::poly::{parse_poly, Poly};
    let k = Field::qp(3, 12).unwrap();
    let mut rng = sample::rng(9);
    let centers: Vec<Elem> = ["0", "1", "3", "2", "9"].iter().map(|c| parse_elem(c, &k).unwrap()).collect();
    let pts = sample::points(&k, &centers, 200, &mut rng);
    let factors = ["x^2-3", "x^3+3", "x^2+1", "x^2-6", "x-3", "x^2-x+7", "x^4-27*x-9"];
    for case in 0..30 {
        let mut make = |n: usize| {
            let mut p = Poly::one(&k);
            for _ in 0..n {
                p = p.mul(&parse_poly(factors[rng.gen_range(0..factors.len())], &k, "x").unwrap());
            }
            p
        };
        let num = make(case % 3 + 1);
        let den = make(case % 2);
        let q = Rational64::new(rng.gen_range(-1..6), [1, 2, 3][case % 3]);
        let cmp = [AbsCmp::Le, AbsCmp::Lt, AbsCmp::Ge, AbsCmp::Gt][case % 4];
        let cover = cover_by_sign(&num, &den, q, cmp, &k).unwrap();
        for x in &pts {
            if cover.exceptional.iter().any(|s| x.sub(s).is_zero()) || den.eval(x).is_zero() {
                continue;
            }
            let v = num.eval(x).div(&den.eval(x)).unwrap().val();
            let wsk::vfield::Gamma::Fin(r) = v else { continue };
            let want = match cmp {
                AbsCmp::Le => r >= q,
                AbsCmp::Lt => r > q,
                AbsCmp::Ge => r <= q,
                AbsCmp::Gt => r < q,
            };
            let got = cover.pieces.iter().filter(|p| p.0.contains(x).unwrap()).count();
            assert_eq!(got, want as usize, "case {case}: |{num}/({den})| {cmp} ({q}) at {x}");
        }
    }
}
