use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::Arc;
use wigner_clt::ensemble::{EnsembleSpec, EntryDist};
use wigner_clt::profile::{KernelSpec, VarianceProfile};
use wigner_clt::semicircle;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semicircle_solves_its_equation_on_the_right_branch(
        re in -6.0f64..6.0,
        im in prop_oneof![1e-8f64..1e-3, 1e-3f64..20.0],
        lower in any::<bool>(),
    ) {
        let z = Complex64::new(re, if lower { -im } else { im });
        let m = semicircle::m_sc(z).unwrap();
        prop_assert!((m * m + z * m + 1.0).norm() < 1e-12);
        prop_assert_eq!(m.im > 0.0, z.im > 0.0);
        prop_assert!(m.norm() <= 1.0 + 1e-15);
        // Reflection symmetry m(z̄) = conj m(z).
        prop_assert!((semicircle::m_sc(z.conj()).unwrap() - m.conj()).norm() < 1e-15);
    }

    #[test]
    fn kernel_profiles_are_doubly_stochastic(
        n in 8usize..40,
        amplitude in 0.0f64..0.9,
        width in 0.05f64..0.5,
    ) {
        for kernel in [KernelSpec::Cosine { amplitude }, KernelSpec::Band { amplitude, width }] {
            let s = VarianceProfile::from_kernel(n, |x, y| kernel.eval(x, y), 1e-13).unwrap();
            for i in 0..n {
                let row: f64 = (0..n).map(|j| s.get(i, j)).sum();
                prop_assert!((row - 1.0).abs() < 1e-11);
                for j in 0..n {
                    prop_assert_eq!(s.get(i, j), s.get(j, i));
                    prop_assert!(s.get(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn samples_are_hermitian_and_keyed(seed in any::<u64>(), index in 0u64..1000, beta in 1u8..=2) {
        let ens = EnsembleSpec::new(beta, EntryDist::Rademacher, Arc::new(VarianceProfile::flat(12).unwrap()), seed)
            .unwrap();
        let a = ens.sample(index).unwrap();
        prop_assert_eq!(a.hermitian_defect(), 0.0);
        let b = ens.sample(index).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                prop_assert_eq!(a.get(i, j), b.get(i, j));
            }
        }
    }
}
