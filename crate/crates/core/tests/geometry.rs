mod common;

use common::*;
use lvseg::lgdacm::convex_hull_fill;
use lvseg::maskgen::{connected_components, erode, largest_component, region_properties, shrink_mask, ShrinkRule};
use lvseg::{BinaryMask, SliceClass};
use proptest::prelude::*;
use rand::SeedableRng;

fn mask_strategy(max: usize) -> impl Strategy<Value = BinaryMask> {
    (1usize..=max, 1usize..=max, 0.05f64..0.6).prop_flat_map(|(r, c, d)| {
        proptest::collection::vec(proptest::bool::weighted(d), r * c)
            .prop_filter("nonempty", |v| v.iter().any(|&b| b))
            .prop_map(move |v| BinaryMask::from_vec(r, c, v))
    })
}

proptest! {
    #[test]
    fn hull_matches_orientation_oracle(m in mask_strategy(12)) {
        let h = convex_hull_fill(&m).unwrap();
        prop_assert_eq!(&h, &brute_hull(&m));
        prop_assert!(m.is_subset_of(&h));
        prop_assert_eq!(convex_hull_fill(&h).unwrap(), h);
    }

    #[test]
    fn shrink_gives_a_nonempty_subset(m in mask_strategy(20), fraction in 0.0f64..1.0, min in proptest::option::of(1usize..100)) {
        let rule = ShrinkRule { fraction, min_area: min };
        let s = shrink_mask(&m, &rule).unwrap();
        prop_assert!(!s.is_empty());
        prop_assert!(s.is_subset_of(&m));
    }

    #[test]
    fn erosion_is_anti_extensive(m in mask_strategy(16)) {
        prop_assert!(erode(&m).is_subset_of(&m));
    }

    #[test]
    fn components_partition_the_mask(m in mask_strategy(16)) {
        let props = region_properties(&m).unwrap();
        prop_assert_eq!(props.iter().map(|p| p.area).sum::<usize>(), m.count());
        let comps = connected_components(&m);
        prop_assert_eq!(comps.len(), props.len());
        let largest = largest_component(&m);
        prop_assert!(largest.is_subset_of(&m));
        prop_assert_eq!(largest.count(), props.iter().map(|p| p.area).max().unwrap());
        for p in &props {
            prop_assert!(p.circularity > 0.0);
            prop_assert!((0.0..=1.0).contains(&p.eccentricity));
        }
    }
}

#[test]
fn hull_fills_a_notched_ring() {
    let ring = BinaryMask::from_fn(21, 21, |r, c| {
        let d = ((r as f64 - 10.0).powi(2) + (c as f64 - 10.0).powi(2)).sqrt();
        (5.0..=8.0).contains(&d) && !(r < 10 && c == 10)
    });
    let h = convex_hull_fill(&ring).unwrap();
    assert!(h.get(10, 10));
    assert!(h.get(3, 10));
    assert_eq!(h, brute_hull(&ring));
}

#[test]
fn hull_of_degenerate_sets() {
    let dot = BinaryMask::from_pixels(5, 5, &[(2, 3)]);
    assert_eq!(convex_hull_fill(&dot).unwrap(), dot);
    let diag = BinaryMask::from_pixels(6, 6, &[(0, 0), (4, 4)]);
    let h = convex_hull_fill(&diag).unwrap();
    assert_eq!(h.pixels(), vec![(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]);
    assert!(convex_hull_fill(&BinaryMask::new(3, 3)).is_err());
}

#[test]
fn class_shrink_rules() {
    let disc = BinaryMask::from_fn(41, 41, |r, c| (r as f64 - 20.0).powi(2) + (c as f64 - 20.0).powi(2) <= 225.0);
    let half = shrink_mask(&disc, &ShrinkRule::for_class(SliceClass::MidVentricle)).unwrap();
    let ratio = half.count() as f64 / disc.count() as f64;
    assert!(ratio > 0.35 && ratio <= 0.5, "{ratio}");
    let apical = shrink_mask(&disc, &ShrinkRule::for_class(SliceClass::Apical)).unwrap();
    assert!(apical.count() < 120);
    assert!(erode(&apical).count() < apical.count());
    let small = BinaryMask::from_fn(41, 41, |r, c| (r as f64 - 20.0).powi(2) + (c as f64 - 20.0).powi(2) <= 25.0);
    assert_eq!(shrink_mask(&small, &ShrinkRule::for_class(SliceClass::Apical)).unwrap(), small);
    assert_eq!(shrink_mask(&disc, &ShrinkRule::seed_default(SliceClass::Basal)).unwrap(), disc);
}

#[test]
fn hull_oracle_on_larger_random_masks() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let m = random_nonempty_mask(&mut rng, 24, 24, 0.02);
        assert_eq!(convex_hull_fill(&m).unwrap(), brute_hull(&m));
    }
}
