//! Library results against brute-force reference implementations.

use image::{Rgb, RgbImage};
use objectness_core::metrics::separability;
use objectness_core::postprocess::{connected_components, Connectivity};
use objectness_core::raster::BinaryMask;
use objectness_core::retarget::{gradient_energy, min_seam, EnergyMap, Orientation};
use objectness_core::training::{generate_synthetic_dataset, ShapeFamily, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn adjacent(a: (usize, usize), b: (usize, usize), conn: Connectivity) -> bool {
    let (dx, dy) = (a.0.abs_diff(b.0), a.1.abs_diff(b.1));
    match conn {
        Connectivity::Four => dx + dy == 1,
        Connectivity::Eight => dx.max(dy) == 1,
    }
}

#[test]
fn components_match_pairwise_union_find() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..500 {
        let density = rng.gen_range(0.2..0.7);
        let mask = BinaryMask::from_fn(16, 16, |_, _| rng.gen_bool(density));
        let conn = if trial % 2 == 0 { Connectivity::Eight } else { Connectivity::Four };
        let px: Vec<(usize, usize)> = (0..256).map(|i| (i % 16, i / 16)).filter(|&(x, y)| mask.get(x, y)).collect();
        let mut uf = UnionFind {
            parent: (0..px.len()).collect(),
        };
        for i in 0..px.len() {
            for j in i + 1..px.len() {
                if adjacent(px[i], px[j], conn) {
                    uf.union(i, j);
                }
            }
        }
        let cc = connected_components(&mask, conn);
        let label = |p: (usize, usize)| cc.labels[p.1 * 16 + p.0];
        let mut roots: Vec<usize> = (0..px.len()).map(|i| uf.find(i)).collect();
        for i in 0..px.len() {
            assert_ne!(label(px[i]), 0);
            for j in i + 1..px.len() {
                assert_eq!(roots[i] == roots[j], label(px[i]) == label(px[j]), "trial {trial}");
            }
        }
        roots.sort_unstable();
        roots.dedup();
        assert_eq!(cc.count(), roots.len());
        let mut areas = vec![0; cc.count()];
        for &p in &px {
            areas[label(p) as usize - 1] += 1;
        }
        assert_eq!(areas, cc.areas);
        assert_eq!(cc.labels.iter().filter(|&&l| l != 0).count(), px.len());
    }
}

/// Minimum cost over every monotone 8-connected vertical path, summed top to
/// bottom.
fn exhaustive_min(e: &EnergyMap) -> f64 {
    fn walk(e: &EnergyMap, y: usize, x: usize, acc: f64, best: &mut f64) {
        let acc = acc + e.get(x, y);
        if y + 1 == e.height {
            *best = best.min(acc);
            return;
        }
        for nx in x.saturating_sub(1)..=(x + 1).min(e.width - 1) {
            walk(e, y + 1, nx, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    for x in 0..e.width {
        walk(e, 0, x, 0.0, &mut best);
    }
    best
}

#[test]
fn seam_cost_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..1000 {
        let (w, h) = (rng.gen_range(2..=6), rng.gen_range(1..=6));
        let data = (0..w * h).map(|_| rng.gen_range(0.0..10.0)).collect();
        let e = EnergyMap::from_vec(w, h, data).unwrap();
        let seam = min_seam(&e, Orientation::Vertical).unwrap();
        assert!(seam.indices.windows(2).all(|p| p[0].abs_diff(p[1]) <= 1));
        assert_eq!(seam.cost(&e), exhaustive_min(&e));
        let t = e.transpose();
        let hs = min_seam(&t, Orientation::Horizontal).unwrap();
        assert_eq!(hs.cost(&t), exhaustive_min(&e));
    }
}

#[test]
fn energy_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let img = RgbImage::from_fn(8, 8, |_, _| Rgb([rng.gen(), rng.gen(), rng.gen()]));
        let lum = |x: i64, y: i64| {
            let p = img.get_pixel(x.clamp(0, 7) as u32, y.clamp(0, 7) as u32).0;
            0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
        };
        let e = gradient_energy(&img);
        for y in 0..8i64 {
            for x in 0..8i64 {
                let want = ((lum(x + 1, y) - lum(x - 1, y)) / 2.0).abs() + ((lum(x, y + 1) - lum(x, y - 1)) / 2.0).abs();
                assert!((e.get(x as usize, y as usize) - want).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn separability_grows_with_mixing_rate() {
    let rates = [0.0f32, 0.25, 0.5, 0.75, 1.0];
    let mut sums = [0.0; 5];
    for seed in 0..100 {
        let scores: Vec<f64> = rates
            .iter()
            .map(|&r| {
                let s = &generate_synthetic_dataset(&SyntheticSpec {
                    width: 48,
                    height: 48,
                    count: 1,
                    seed,
                    separation: (r, r),
                    shapes_per_image: (1, 1),
                    families: vec![ShapeFamily::Ellipse, ShapeFamily::Rectangle],
                    ..Default::default()
                })[0];
                separability(&s.image, &s.mask()).unwrap()
            })
            .collect();
        assert!(scores[2] > 0.0 && scores[2] < 1.0, "seed {seed}: {scores:?}");
        for (acc, s) in sums.iter_mut().zip(&scores) {
            *acc += s;
        }
    }
    assert!(sums.windows(2).all(|p| p[0] < p[1]), "{sums:?}");
}
