use bifcurrents::grid::{components, ddc_1d, export_bin, import_bin, monge_ampere_2d, sample_local, Axis, Field, SliceSpec};
use bifcurrents::Complex64;
use proptest::prelude::*;

fn plane(res: usize) -> SliceSpec {
    SliceSpec::coordinate(1, &[0], vec![Axis::square(-1.0, 1.0, res)]).unwrap()
}

fn field_of(s: &SliceSpec, f: impl Fn(&[Complex64]) -> f64 + Sync) -> Field {
    sample_local(s, |t| Ok(f(t)), false, "f").unwrap()
}

fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ddc_is_linear(u in values(256), v in values(256), alpha in -5.0..5.0f64, beta in -5.0..5.0f64) {
        let s = plane(16);
        let fu = Field::new(s.clone(), u, "u").unwrap();
        let fv = Field::new(s.clone(), v, "v").unwrap();
        let fw = fu.zip_with(&fv, "w", |a, b| alpha * a + beta * b).unwrap();
        let (du, dv, dw) = (ddc_1d(&fu).unwrap(), ddc_1d(&fv).unwrap(), ddc_1d(&fw).unwrap());
        for i in 0..s.len() {
            let lin = alpha * du.raw()[i] + beta * dv.raw()[i];
            let scale = alpha.abs() * du.raw()[i].abs() + beta.abs() * dv.raw()[i].abs() + 1.0;
            prop_assert!((dw.raw()[i] - lin).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn harmonic_polynomials_carry_no_mass(coef in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 4)) {
        // Re of a cubic holomorphic polynomial: the five-point stencil is exact.
        let s = plane(32);
        let f = field_of(&s, |t| {
            coef.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &(re, im)| acc * t[0] + Complex64::new(re, im)).re
        });
        let osc = f.values().iter().cloned().fold(f64::MIN, f64::max) - f.values().iter().cloned().fold(f64::MAX, f64::min);
        prop_assert!(ddc_1d(&f).unwrap().abs_total() < 1e-8 * osc.max(1.0));
    }

    #[test]
    fn ma_mass_ignores_pluriharmonic_shifts(
        a in (-3.0..3.0f64, -3.0..3.0f64),
        b in (-3.0..3.0f64, -3.0..3.0f64),
        k in -1.0..1.0f64,
    ) {
        let axis = Axis::square(-1.0, 1.0, 10);
        let s = SliceSpec::coordinate(2, &[0, 1], vec![axis.clone(), axis]).unwrap();
        let h = s.steps()[0];
        let u = field_of(&s, |t| t[0].norm_sqr() + t[1].norm_sqr());
        let (a, b) = (Complex64::new(a.0, a.1), Complex64::new(b.0, b.1));
        let v = field_of(&s, |t| t[0].norm_sqr() + t[1].norm_sqr() + (a * t[0] + b * t[1]).re + k);
        let (mu, mv) = (monge_ampere_2d(&u, h).unwrap().total(), monge_ampere_2d(&v, h).unwrap().total());
        prop_assert!((mu - mv).abs() <= 1e-6 * mu);
    }

    #[test]
    fn components_do_not_depend_on_the_thread_pool(bits in prop::collection::vec(any::<bool>(), 400), threads in 2usize..5) {
        let s = SliceSpec::coordinate(1, &[0], vec![Axis::square(0.0, 1.0, 20)]).unwrap();
        let f = Field::new(s, bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(), "mask").unwrap();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| components(&f, |v| v > 0.5).unwrap());
        let pooled = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| components(&f, |v| v > 0.5).unwrap());
        prop_assert_eq!(serial, pooled);
    }

    #[test]
    fn bin_round_trip_is_the_identity(v in prop::collection::vec(prop_oneof![9 => -1e300..1e300f64, 1 => Just(f64::NEG_INFINITY)], 64)) {
        let f = Field::new(plane(8), v, "random").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bifg");
        export_bin(&f, &path).unwrap();
        let g = import_bin(&path).unwrap();
        prop_assert_eq!(f.slice(), g.slice());
        prop_assert_eq!(f.label(), g.label());
        for (x, y) in f.values().iter().zip(g.values()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
