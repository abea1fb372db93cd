use proptest::prelude::*;

use pxgen::discovery::*;
use pxgen::model::{encode, Architecture, VaeParams};
use pxgen::numerics::{pairwise_distances, Matrix};
use pxgen::rng::SplitMix64;
use pxgen::Image;

fn instance(rng: &mut SplitMix64, n: usize, d: usize) -> (Vec<Vec<f64>>, Matrix) {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(d)).collect();
    let m = pairwise_distances(&pts).unwrap();
    (pts, m)
}

#[test]
fn greedy_guarantees_hold_on_random_instances() {
    let mut rng = SplitMix64::new(2024);
    let mut checked = 0;
    for _ in 0..300 {
        let n = 2 + rng.below(11);
        let k = 1 + rng.below(4.min(n));
        let dim = 1 + rng.below(4);
        let (_, d) = instance(&mut rng, n, dim);
        let gd = k_dispersion_greedy(&d, k).unwrap();
        let bd = brute_force_dispersion(&d, k).unwrap();
        assert!(gd.objective >= 0.5 * bd.objective - 1e-12, "dispersion {} vs {}", gd.objective, bd.objective);
        let gc = k_center_greedy(&d, k).unwrap();
        let bc = brute_force_center(&d, k).unwrap();
        assert!(gc.objective <= 2.0 * bc.objective + 1e-12, "center {} vs {}", gc.objective, bc.objective);
        checked += 1;
    }
    assert_eq!(checked, 300);
}

#[test]
fn reported_objectives_match_recomputation() {
    let mut rng = SplitMix64::new(9);
    for _ in 0..50 {
        let n = 1 + rng.below(15);
        let k = 1 + rng.below(n);
        let (_, d) = instance(&mut rng, n, 3);
        for r in [k_dispersion_greedy(&d, k).unwrap(), brute_force_dispersion(&d, k).unwrap()] {
            assert!((r.objective - dispersion_objective(&d, &r.chosen)).abs() <= 1e-12);
            assert_eq!(r.chosen.len(), k);
        }
        for r in [k_center_greedy(&d, k).unwrap(), brute_force_center(&d, k).unwrap()] {
            assert!((r.objective - covering_radius(&d, &r.chosen)).abs() <= 1e-12);
        }
    }
}

#[test]
fn brute_force_refuses_large_instances() {
    let mut rng = SplitMix64::new(1);
    let (_, d) = instance(&mut rng, BRUTE_FORCE_MAX_POINTS + 1, 2);
    assert!(matches!(brute_force_center(&d, 2), Err(pxgen::Error::ResourceLimit(_))));
}

#[test]
fn latent_and_pixel_spaces_use_the_right_distances() {
    let arch = Architecture::new(5, 4, vec![6], 3).unwrap();
    let params = VaeParams::init(&arch, &mut SplitMix64::new(4));
    let mut rng = SplitMix64::new(5);
    let anchors: Vec<Image> = (0..30)
        .map(|_| Image::new(5, 4, (0..20).map(|_| rng.next_f64()).collect()).unwrap())
        .collect();
    let group: Vec<usize> = (0..30).filter(|i| i % 3 != 0).collect();
    let pixel = group_distances(&params, &anchors, &group, DistanceSpace::Pixel).unwrap();
    let means: Vec<Vec<f64>> = group.iter().map(|&i| encode(&params, &anchors[i]).unwrap().mean).collect();
    let latent = group_distances(&params, &anchors, &group, DistanceSpace::LatentMean).unwrap();
    for (a, &i) in group.iter().enumerate() {
        for (b, &j) in group.iter().enumerate() {
            let px: f64 = anchors[i].pixels().iter().zip(anchors[j].pixels()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let lt: f64 = means[a].iter().zip(&means[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            assert!((pixel[[a, b]] - px).abs() < 1e-12);
            assert!((latent[[a, b]] - lt).abs() < 1e-9);
        }
    }
    for space in [DistanceSpace::Pixel, DistanceSpace::LatentMean] {
        for method in [SelectionMethod::KCenter, SelectionMethod::KDispersion] {
            let r = select_from_group(&params, &anchors, &group, 10, method, space).unwrap();
            assert_eq!(r.chosen.len(), 10);
            assert!(r.chosen.iter().all(|c| group.contains(c)));
            let mut uniq = r.chosen.clone();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), 10);
        }
    }
    let single = select_from_group(&params, &anchors, &[7], 1, SelectionMethod::KDispersion, DistanceSpace::Pixel).unwrap();
    assert_eq!((single.chosen, single.objective), (vec![7], 0.0));
    assert!(select_from_group(&params, &anchors, &[], 1, SelectionMethod::KCenter, DistanceSpace::Pixel).is_err());
    assert!(select_from_group(&params, &anchors, &[1, 2], 3, SelectionMethod::KCenter, DistanceSpace::Pixel).is_err());
}

proptest! {
    #[test]
    fn greedy_selection_is_permutation_covariant(seed in any::<u64>(), n in 3usize..14, k in 1usize..5) {
        let k = k.min(n);
        let mut rng = SplitMix64::new(seed);
        let (pts, d) = instance(&mut rng, n, 2);
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        // new label i refers to old point perm[i]
        let relabeled: Vec<Vec<f64>> = perm.iter().map(|&p| pts[p].clone()).collect();
        let d2 = pairwise_distances(&relabeled).unwrap();
        let mut pairs = vec![(k_center_greedy(&d, k).unwrap(), k_center_greedy(&d2, k).unwrap())];
        // a single dispersion pick is the first index, so it is not label free
        if k >= 2 {
            pairs.push((k_dispersion_greedy(&d, k).unwrap(), k_dispersion_greedy(&d2, k).unwrap()));
        }
        for (a, b) in pairs {
            let mut mapped: Vec<usize> = b.chosen.iter().map(|&i| perm[i]).collect();
            let mut want = a.chosen.clone();
            mapped.sort_unstable();
            want.sort_unstable();
            prop_assert_eq!(mapped, want);
            prop_assert!((a.objective - b.objective).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_is_deterministic(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = SplitMix64::new(seed);
        let (_, d) = instance(&mut rng, n, 3);
        let k = 1 + (seed as usize % n);
        prop_assert_eq!(k_center_greedy(&d, k).unwrap(), k_center_greedy(&d, k).unwrap());
        prop_assert_eq!(k_dispersion_greedy(&d, k).unwrap(), k_dispersion_greedy(&d, k).unwrap());
    }
}
