use proptest::prelude::*;
use wsk::sample;
use wsk::sepseries::{Caps, SepSeries, Var};
use wsk::vfield::{Elem, Field, FieldRef};

fn fields() -> Vec<FieldRef> {
    vec![Field::qp(3, 12).unwrap(), Field::fpt(5, 12).unwrap(), Field::qp(2, 12).unwrap()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integer_arithmetic_matches(a in -10_000i64..10_000, b in -10_000i64..10_000, fi in 0usize..3) {
        let k = &fields()[fi];
        let (x, y) = (Elem::from_int(k, a), Elem::from_int(k, b));
        prop_assert!(x.add(&y).sub(&Elem::from_int(k, a + b)).is_zero());
        prop_assert!(x.mul(&y).sub(&Elem::from_int(k, a * b)).is_zero());
    }

    #[test]
    fn valuation_is_additive(seed in any::<u64>(), fi in 0usize..3) {
        let k = &fields()[fi];
        let mut rng = sample::rng(seed);
        let a = sample::unit(k, &mut rng).mul(&sample::integral(k, &mut rng));
        let b = sample::unit(k, &mut rng);
        prop_assume!(!a.is_zero());
        prop_assert_eq!(a.mul(&b).val(), a.val() + b.val());
        prop_assert!(a.mul(&b).div(&b).unwrap().sub(&a).is_zero());
    }

    #[test]
    fn gauss_norm_is_multiplicative(seed in any::<u64>(), fi in 0usize..3) {
        let k = &fields()[fi];
        let mut rng = sample::rng(seed);
        let caps = Caps::for_field(k);
        let f = sample::series(k, 2, 1, caps, 4, &mut rng);
        let g = sample::series(k, 2, 1, caps, 4, &mut rng);
        prop_assert_eq!(f.mul(&g).gauss_norm(), f.gauss_norm() + g.gauss_norm());
    }

    #[test]
    fn division_identity_holds(seed in any::<u64>(), d in 1u32..4) {
        let k = Field::qp(3, 12).unwrap();
        let mut rng = sample::rng(seed);
        let caps = Caps::for_field(&k);
        let f = sample::regular_series(&k, 1, 1, caps, Var::Xi(0), d, &mut rng);
        let rep = f.regular_degree(Var::Xi(0)).unwrap();
        prop_assume!(rep.degree == d);
        let g = sample::series(&k, 1, 1, caps, 5, &mut rng);
        let (q, r) = SepSeries::weierstrass_divide(&g, &f, &rep).unwrap();
        prop_assert!(q.mul(&f).add(&r).eq_mod(&g));
        prop_assert!(r.terms().all(|(e, _)| e.get(0) < d));
    }
}
