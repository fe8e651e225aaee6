use mapforge::bijections::{blossom_close, blossom_cut, cvs_forward, cvs_inverse, enumerate_blossom_trees, sample_quadrangulation, DEFAULT_TREE_CAP};
use mapforge::branching::{bounded_residual, bounded_rn_newton};
use mapforge::fatgraph::{CombinatorialMap, VertexProfile};
use mapforge::series::{parse_rat, rat, Rat, TruncSeries};
use mapforge::stringeq::DiffPoly;
use proptest::prelude::*;

const ORDER: usize = 6;

fn small_rat() -> impl Strategy<Value = Rat> {
    (-9i64..=9, 1i64..=5).prop_map(|(n, d)| rat(n, d))
}

fn series() -> impl Strategy<Value = TruncSeries<Rat>> {
    prop::collection::vec(small_rat(), ORDER + 1).prop_map(|c| TruncSeries::new("g", c, ORDER))
}

/// Series with constant term 1, the domain of log and sqrt.
fn unit_series() -> impl Strategy<Value = TruncSeries<Rat>> {
    series().prop_map(|mut s| {
        s.set_coeff(0, rat(1, 1));
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ring_laws(a in series(), b in series(), c in series()) {
        prop_assert_eq!(a.add_ref(&b), b.add_ref(&a));
        prop_assert_eq!(a.mul_ref(&b), b.mul_ref(&a));
        prop_assert_eq!(a.mul_ref(&b).mul_ref(&c), a.mul_ref(&b.mul_ref(&c)));
        prop_assert_eq!(a.add_ref(&b).mul_ref(&c), a.mul_ref(&c).add_ref(&b.mul_ref(&c)));
        prop_assert_eq!(a.sub_ref(&a), TruncSeries::zero("g", ORDER));
    }

    #[test]
    fn inverse_and_division(a in unit_series(), b in series()) {
        let one = TruncSeries::one("g", ORDER);
        prop_assert_eq!(a.mul_ref(&a.inverse().unwrap()), one);
        prop_assert_eq!(b.div(&a).unwrap().mul_ref(&a), b);
    }

    #[test]
    fn exp_log_sqrt(a in unit_series(), b in series()) {
        prop_assert_eq!(a.log().unwrap().exp().unwrap(), a.clone());
        let r = a.sqrt().unwrap();
        prop_assert_eq!(r.mul_ref(&r), a.clone());
        let mut b0 = b.clone();
        b0.set_coeff(0, rat(0, 1));
        prop_assert_eq!(b0.exp().unwrap().log().unwrap(), b0.clone());
        // log turns products into sums
        let c = a.mul_ref(&r);
        prop_assert_eq!(c.log().unwrap(), a.log().unwrap().add_ref(&r.log().unwrap()));
    }

    #[test]
    fn reversion_inverts_composition(a in series()) {
        let mut f = a.clone();
        f.set_coeff(0, rat(0, 1));
        f.set_coeff(1, rat(1, 1) + a.coeff(1) * a.coeff(1));
        let inv = f.reversion().unwrap();
        prop_assert_eq!(f.compose(&inv).unwrap(), TruncSeries::variable("g", ORDER));
    }

    #[test]
    fn rational_codec(r in small_rat(), s in small_rat()) {
        let x = r * s + rat(1, 7);
        prop_assert_eq!(parse_rat(&x.to_string()).unwrap(), x);
    }

    #[test]
    fn euler_relation_and_relabeling(
        valences in prop::collection::vec(1usize..=5, 1..=4),
        seed in any::<u64>(),
    ) {
        let profile = VertexProfile::new(&valences.iter().map(|&v| (v, 1)).collect::<Vec<_>>());
        let n = profile.darts();
        prop_assume!(n % 2 == 0 && n > 0);
        let mut rng = mapforge::bijections::sample_rng(seed, 0);
        let mut order: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut alpha = vec![0; n];
        for p in order.chunks(2) {
            alpha[p[0]] = p[1];
            alpha[p[1]] = p[0];
        }
        let m = CombinatorialMap::new(profile.star_sigma(), alpha, Some(0)).unwrap();
        let stats = m.faces_and_genus().unwrap();
        let chi: i64 = stats.genera.iter().map(|&h| 2 - 2 * h as i64).sum();
        prop_assert_eq!(stats.vertices as i64 - stats.edges as i64 + stats.faces as i64, chi);
        // Canonical form ignores dart names.
        let mut relabel: Vec<usize> = (0..n).collect();
        relabel.shuffle(&mut rng);
        let mut sigma2 = vec![0; n];
        let mut alpha2 = vec![0; n];
        for d in 0..n {
            sigma2[relabel[d]] = relabel[m.sigma[d]];
            alpha2[relabel[d]] = relabel[m.alpha[d]];
        }
        let m2 = CombinatorialMap::new(sigma2, alpha2, Some(relabel[0])).unwrap();
        prop_assert_eq!(m2.faces_and_genus().unwrap().faces, stats.faces);
        prop_assert_eq!(m2.canonical_form(), m.canonical_form());
    }

    #[test]
    fn sampled_quadrangulations_round_trip(area in 1usize..=12, seed in any::<u64>()) {
        let (q, _) = sample_quadrangulation(area, seed, 0).unwrap();
        prop_assert_eq!(q.faces(), area);
        let t = cvs_forward(&q).unwrap();
        prop_assert_eq!(t.edges(), area);
        prop_assert_eq!(cvs_inverse(&t).unwrap().canonical(), q.canonical());
        // Vertices: A + 2, by Euler.
        prop_assert_eq!(q.distance_profile().iter().sum::<u64>(), area as u64 + 2);
    }

    #[test]
    fn blossom_round_trip(pick in any::<prop::sample::Index>()) {
        let trees = enumerate_blossom_trees(&[4], 4, DEFAULT_TREE_CAP).unwrap();
        let t = pick.get(&trees);
        let m = blossom_close(t).unwrap();
        prop_assert_eq!(&blossom_cut(&m).unwrap(), t);
    }

    #[test]
    fn bounded_solutions_are_symmetric(l in 0usize..12, g in 0.0f64..0.08) {
        let r = bounded_rn_newton(l, g).unwrap();
        prop_assert!(bounded_residual(&r, g) < 1e-12);
        for n in 0..=l {
            prop_assert!((r[n] - r[l - n]).abs() < 1e-10);
            prop_assert!(r[n] >= 1.0);
        }
    }

    #[test]
    fn leibniz_rule(a in prop::collection::vec(0u32..3, 1..3), b in prop::collection::vec(0u32..3, 1..3), c in small_rat()) {
        let p = DiffPoly::term(c, &a);
        let q = DiffPoly::term(rat(2, 3), &b);
        let lhs = p.mul(&q).derivative();
        let rhs = p.derivative().mul(&q).add(&p.mul(&q.derivative()));
        prop_assert_eq!(lhs, rhs);
    }
}
