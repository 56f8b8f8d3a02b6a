use image::{imageops, Rgb, RgbImage};
use objectness_core::metrics::{average_precision, box_iou, jaccard, separability};
use objectness_core::postprocess::{connected_components, largest_foreground, tight_bbox, BBox, Connectivity};
use objectness_core::raster::{BinaryMask, LabelMap};
use objectness_core::retarget::{boost_foreground, gradient_energy, min_seam, retarget, EnergyMap, Orientation};
use objectness_core::retrieval::{rank, FeatureVector, IndexEntry, Mode, RetrievalIndex};
use objectness_core::training::{augment_mirror, LabeledSample};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mask_strategy(max: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<bool>(), w * h).prop_map(move |bits| BinaryMask::from_bits(w, h, bits).unwrap())
    })
}

fn image_strategy(max: u32) -> impl Strategy<Value = RgbImage> {
    (2..=max, 2..=max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), (w * h * 3) as usize)
            .prop_map(move |raw| RgbImage::from_raw(w, h, raw).unwrap())
    })
}

fn bbox_strategy() -> impl Strategy<Value = BBox> {
    (0..20usize, 0..20usize, 0..20usize, 0..20usize)
        .prop_map(|(a, b, c, d)| BBox::new(a.min(b), c.min(d), a.max(b), c.max(d)).unwrap())
}

fn is_connected(m: &BinaryMask) -> bool {
    connected_components(m, Connectivity::Eight).count() == 1
}

proptest! {
    #[test]
    fn jaccard_is_symmetric_and_bounded((a, b) in mask_strategy(12).prop_flat_map(|a| {
        let (w, h) = a.dims();
        (Just(a), proptest::collection::vec(any::<bool>(), w * h).prop_map(move |v| BinaryMask::from_bits(w, h, v).unwrap()))
    })) {
        let j = jaccard(&a, &b).unwrap();
        prop_assert_eq!(j, jaccard(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j == 1.0, a == b);
        prop_assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn box_iou_equals_rasterized_jaccard(a in bbox_strategy(), b in bbox_strategy()) {
        let j = jaccard(&a.to_mask(20, 20), &b.to_mask(20, 20)).unwrap();
        prop_assert!((box_iou(&a, &b) - j).abs() < 1e-12);
        prop_assert_eq!(box_iou(&a, &b), box_iou(&b, &a));
    }

    #[test]
    fn components_partition_the_mask(m in mask_strategy(16)) {
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let cc = connected_components(&m, conn);
            let mut union = BinaryMask::new(m.width(), m.height());
            let mut total = 0;
            for l in 1..=cc.count() as u32 {
                let r = cc.region(l);
                prop_assert!(is_connected(&r));
                prop_assert_eq!(connected_components(&r, conn).count(), 1);
                total += r.count();
                for (i, &b) in r.bits().iter().enumerate() {
                    if b {
                        prop_assert!(!union.bits()[i]);
                        union.set(i % m.width(), i / m.width(), true);
                    }
                }
            }
            prop_assert_eq!(total, m.count());
            prop_assert_eq!(&union, &m);
        }
    }

    #[test]
    fn largest_foreground_is_a_connected_subset(m in mask_strategy(16), frac in 0.0f64..0.3) {
        match largest_foreground(&m, frac) {
            Some(r) => {
                prop_assert!(is_connected(&r));
                prop_assert!(r.bits().iter().zip(m.bits()).all(|(&a, &b)| !a || b));
                prop_assert!(r.count() as f64 > frac * m.area() as f64);
                let cc = connected_components(&m, Connectivity::Eight);
                prop_assert_eq!(r.count(), *cc.areas.iter().max().unwrap());
            }
            None => {
                let cc = connected_components(&m, Connectivity::Eight);
                prop_assert!(cc.areas.iter().all(|&a| a as f64 <= frac * m.area() as f64));
            }
        }
    }

    #[test]
    fn tight_bbox_is_minimal(m in mask_strategy(16)) {
        match tight_bbox(&m) {
            None => prop_assert!(m.is_empty()),
            Some(b) => {
                for y in 0..m.height() {
                    for x in 0..m.width() {
                        prop_assert!(!m.get(x, y) || b.contains(x, y));
                    }
                }
                prop_assert!((b.y_min..=b.y_max).any(|y| m.get(b.x_min, y)));
                prop_assert!((b.y_min..=b.y_max).any(|y| m.get(b.x_max, y)));
                prop_assert!((b.x_min..=b.x_max).any(|x| m.get(x, b.y_min)));
                prop_assert!((b.x_min..=b.x_max).any(|x| m.get(x, b.y_max)));
            }
        }
    }

    #[test]
    fn boosted_energy_dominates_plain(img in image_strategy(12), seed in any::<u64>()) {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut k = seed;
        let fg = BinaryMask::from_fn(w, h, |_, _| { k = k.wrapping_mul(6364136223846793005).wrapping_add(1); k >> 63 == 1 });
        let plain = gradient_energy(&img);
        let boosted = boost_foreground(&plain, &fg).unwrap();
        for y in 0..h {
            for x in 0..w {
                if fg.get(x, y) {
                    prop_assert!(boosted.get(x, y) > plain.get(x, y));
                } else {
                    prop_assert_eq!(boosted.get(x, y), plain.get(x, y));
                }
            }
        }
    }

    #[test]
    fn seams_are_connected_and_in_range(w in 2usize..10, h in 2usize..10, data in proptest::collection::vec(0.0f64..100.0, 100)) {
        let e = EnergyMap::from_vec(w, h, data[..w * h].to_vec()).unwrap();
        let v = min_seam(&e, Orientation::Vertical).unwrap();
        prop_assert_eq!(v.indices.len(), h);
        prop_assert!(v.indices.iter().all(|&x| x < w));
        prop_assert!(v.indices.windows(2).all(|p| p[0].abs_diff(p[1]) <= 1));
        for x in 0..w {
            let straight: f64 = (0..h).map(|y| e.get(x, y)).sum();
            prop_assert!(v.cost(&e) <= straight + 1e-9);
        }
        let hz = min_seam(&e, Orientation::Horizontal).unwrap();
        prop_assert_eq!(hz.indices.len(), w);
        prop_assert!(hz.indices.iter().all(|&y| y < h));
        prop_assert!(hz.indices.windows(2).all(|p| p[0].abs_diff(p[1]) <= 1));
    }

    #[test]
    fn retarget_hits_requested_size(img in image_strategy(14), fw in 0.3f64..=1.0, fh in 0.3f64..=1.0) {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let tw = ((w as f64 * fw) as usize).max(1);
        let th = ((h as f64 * fh) as usize).max(1);
        let mask = BinaryMask::from_fn(w, h, |x, y| (x + y) % 3 == 0);
        let r = retarget(&img, Some(&mask), tw, th).unwrap();
        prop_assert_eq!((r.image.width() as usize, r.image.height() as usize), (tw, th));
        prop_assert_eq!(r.mask.unwrap().dims(), (tw, th));
        prop_assert_eq!(r.seams.len(), (w - tw) + (h - th));
    }

    #[test]
    fn separability_is_symmetric_and_scale_invariant(img in image_strategy(10), seed in any::<u64>()) {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut k = seed | 1;
        let mut gt = BinaryMask::from_fn(w, h, |_, _| { k ^= k << 13; k ^= k >> 7; k ^= k << 17; k & 1 == 1 });
        gt.set(0, 0, true);
        gt.set(w - 1, h - 1, false);
        let inv = BinaryMask::from_fn(w, h, |x, y| !gt.get(x, y));
        let s = separability(&img, &gt).unwrap();
        prop_assert!((s - separability(&img, &inv).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
        let big = imageops::resize(&img, 2 * w as u32, 2 * h as u32, imageops::FilterType::Nearest);
        let big_gt = BinaryMask::from_fn(2 * w, 2 * h, |x, y| gt.get(x / 2, y / 2));
        prop_assert!((s - separability(&big, &big_gt).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ap_ignores_order_after_last_hit(mut rel in proptest::collection::vec(any::<bool>(), 1..30), tail in proptest::collection::vec(any::<bool>(), 0..10)) {
        rel[0] = true;
        let base = average_precision(&rel).unwrap();
        prop_assert!(base > 0.0 && base <= 1.0);
        let mut longer = rel.clone();
        longer.extend(tail.iter().map(|_| false));
        prop_assert!((average_precision(&longer).unwrap() - base).abs() < 1e-12);
        let mut sorted = rel.clone();
        sorted.sort_by(|a, b| b.cmp(a));
        prop_assert!(average_precision(&sorted).unwrap() >= base - 1e-12);
        prop_assert_eq!(average_precision(&sorted).unwrap(), 1.0);
    }

    #[test]
    fn rank_is_a_permutation_of_the_index(vals in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 1..12), q in proptest::collection::vec(-1.0f64..1.0, 4), skip in any::<bool>()) {
        let mut index = RetrievalIndex::new(Mode::Fg, 4);
        for (i, v) in vals.iter().enumerate() {
            index.insert(IndexEntry { id: format!("{i:03}"), class: Some(i as u32 % 3), vector: FeatureVector::normalized(v.clone()) }).unwrap();
        }
        let query = FeatureVector::normalized(q);
        let exclude = if skip { Some("000") } else { None };
        let ranked = rank(&query, &index, exclude).unwrap();
        let mut ids: Vec<&str> = ranked.iter().map(|(id, _)| id.as_str()).collect();
        prop_assert!(ranked.windows(2).all(|p| p[0].1 >= p[1].1));
        ids.sort_unstable();
        let expected: Vec<String> = (0..vals.len()).map(|i| format!("{i:03}")).filter(|id| exclude != Some(id.as_str())).collect();
        prop_assert_eq!(ids, expected.iter().map(String::as_str).collect::<Vec<_>>());
    }

    #[test]
    fn mirroring_keeps_pixel_label_pairs(img in image_strategy(9), labels in proptest::collection::vec(prop_oneof![Just(0u8), Just(1u8), Just(255u8)], 81)) {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let sample = LabeledSample {
            id: "p".into(),
            labels: LabelMap::from_vec(w, h, labels[..w * h].to_vec()).unwrap(),
            image: img,
            class: None,
        };
        let (out, flipped) = augment_mirror(&sample, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
        prop_assert!(flipped);
        let pairs = |s: &LabeledSample| {
            let mut v: Vec<([u8; 3], u8)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y)))
                .map(|(x, y)| (s.image.get_pixel(x as u32, y as u32).0, s.labels.get(x, y))).collect();
            v.sort_unstable();
            v
        };
        prop_assert_eq!(pairs(&sample), pairs(&out));
        let small = sample.labels.resize_nearest(w.div_ceil(2), h.div_ceil(2));
        prop_assert!(small.data().iter().all(|l| sample.labels.data().contains(l)));
    }
}

#[test]
fn retarget_recomputes_energy_between_seams() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut differs = 0;
    for _ in 0..20 {
        let img = RgbImage::from_fn(16, 12, |_, _| Rgb(rand::Rng::gen(&mut rng)));
        let got = retarget(&img, None, 12, 12).unwrap();

        let mut fresh = img.clone();
        let mut stale = img.clone();
        let e0 = gradient_energy(&img);
        let mut stale_e = e0.clone();
        for _ in 0..4 {
            let s = min_seam(&gradient_energy(&fresh), Orientation::Vertical).unwrap();
            fresh = objectness_core::retarget::remove_seam(&fresh, &s).unwrap();

            let t = min_seam(&stale_e, Orientation::Vertical).unwrap();
            stale = objectness_core::retarget::remove_seam(&stale, &t).unwrap();
            let w = stale_e.width - 1;
            let data = (0..stale_e.height)
                .flat_map(|y| {
                    let skip = t.indices[y];
                    let row: Vec<f64> = (0..stale_e.width).filter(|&x| x != skip).map(|x| stale_e.get(x, y)).collect();
                    row
                })
                .collect();
            stale_e = EnergyMap::from_vec(w, stale_e.height, data).unwrap();
        }
        assert_eq!(got.image, fresh);
        if stale != fresh {
            differs += 1;
        }
    }
    assert!(differs > 0, "stale and fresh energy never disagreed");
}
