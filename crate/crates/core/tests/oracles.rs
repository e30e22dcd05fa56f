mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fieldgrid::extract::{extract_cutoff, extract_watershed, MaskTriple, ThresholdSet};
use fieldgrid::fusion::{coverage_counts, window_origins};
use fieldgrid::metrics::{PValueMethod, WILCOXON_EXACT_MAX_N};
use fieldgrid::synth::degrade_with_report;
use fieldgrid::*;

use common::*;

fn random_pl(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let p = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
    let l = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    (p, l)
}

fn central_difference(p: &[f64], l: &[f64], i: usize, h: f64) -> f64 {
    let mut a = p.to_vec();
    let mut b = p.to_vec();
    a[i] += h;
    b[i] -= h;
    (tanimoto_dual(&a, l).unwrap() - tanimoto_dual(&b, l).unwrap()) / (2.0 * h)
}

#[test]
fn dual_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (p, l) = random_pl(&mut rng, 64);
        let g = tanimoto_dual_grad(&p, &l).unwrap();
        for i in 0..64 {
            let fd = central_difference(&p, &l, i, 1e-5);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-5, "component {i}: analytic {} vs fd {fd}", g[i]);
        }
    }
}

#[test]
fn dual_gradient_duplication_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (p, l) = random_pl(&mut rng, 20);
    let g = tanimoto_dual_grad(&p, &l).unwrap();
    let pp: Vec<f64> = p.iter().chain(&p).copied().collect();
    let ll: Vec<f64> = l.iter().chain(&l).copied().collect();
    assert!((tanimoto_dual(&pp, &ll).unwrap() - tanimoto_dual(&p, &l).unwrap()).abs() < 1e-15);
    let gd = tanimoto_dual_grad(&pp, &ll).unwrap();
    for i in 0..20 {
        assert!((gd[i] + gd[i + 20] - g[i]).abs() < 1e-14);
        assert!((gd[i] - gd[i + 20]).abs() < 1e-15);
    }
}

#[test]
fn dual_gradient_vanishes_at_the_optimum() {
    // p = l: every feasible direction lowers the similarity.
    let l = vec![0.0, 1.0, 1.0, 0.0, 1.0];
    let p: Vec<f64> = l.iter().map(|&v| if v > 0.5 { 1.0 - 1e-9 } else { 1e-9 }).collect();
    let g = tanimoto_dual_grad(&p, &l).unwrap();
    for (gi, li) in g.iter().zip(&l) {
        // Pointing back into the box or ~0.
        if *li > 0.5 {
            assert!(*gi >= -1e-6);
        } else {
            assert!(*gi <= 1e-6);
        }
    }
}

#[test]
fn multitask_loss_is_mean_of_dual_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    let mut expected = 0.0;
    for _ in 0..4 {
        let (p, l) = random_pl(&mut rng, 16);
        expected += 1.0 - tanimoto_dual(&p, &l).unwrap();
        preds.push(Raster::from_band(4, 4, p.iter().map(|&v| v as f32).collect()).unwrap());
        labels.push(Raster::from_band(4, 4, l.iter().map(|&v| v as f32).collect()).unwrap());
    }
    // Values pass through f32 storage; recompute from the stored values.
    let expected_f32: f64 = preds
        .iter()
        .zip(&labels)
        .map(|(p, l)| {
            let p: Vec<f64> = p.data().iter().map(|&v| v as f64).collect();
            let l: Vec<f64> = l.data().iter().map(|&v| v as f64).collect();
            1.0 - tanimoto_dual(&p, &l).unwrap()
        })
        .sum::<f64>()
        / 4.0;
    let got = multitask_loss(&preds, &labels).unwrap();
    assert!((got - expected_f32).abs() < 1e-12);
    assert!((got - expected / 4.0).abs() < 1e-6);
}

/// Priority flood by repeated linear scan for the smallest (value, order)
/// entry among queued pixels.
fn linear_scan_flood(seeds: &FieldLabelMap, surface: &[f32], region: &[bool]) -> Vec<u32> {
    let (w, h) = (seeds.width(), seeds.height());
    let mut l = seeds.labels().to_vec();
    let mut queued: Vec<(f32, usize, usize)> = Vec::new();
    let mut order = 0;
    for i in 0..w * h {
        if l[i] != 0 {
            queued.push((surface[i], order, i));
            order += 1;
        }
    }
    while !queued.is_empty() {
        let k = (0..queued.len())
            .min_by(|&a, &b| {
                queued[a].0.total_cmp(&queued[b].0).then(queued[a].1.cmp(&queued[b].1))
            })
            .unwrap();
        let (_, _, i) = queued.swap_remove(k);
        let (r, c) = (i / w, i % w);
        let mut nb = Vec::new();
        if r > 0 {
            nb.push(i - w);
        }
        if c > 0 {
            nb.push(i - 1);
        }
        if c + 1 < w {
            nb.push(i + 1);
        }
        if r + 1 < h {
            nb.push(i + w);
        }
        for n in nb {
            if l[n] == 0 && region[n] {
                l[n] = l[i];
                queued.push((surface[n], order, n));
                order += 1;
            }
        }
    }
    l
}

fn two_bumps(noise_seed: Option<u64>) -> MaskTriple {
    let (w, h) = (16usize, 16usize);
    let mut rng = noise_seed.map(ChaCha8Rng::seed_from_u64);
    let mut e = vec![0f32; w * h];
    let mut b = vec![0f32; w * h];
    let mut d = vec![0f32; w * h];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let bump = |cx: f64| (-((c as f64 - cx).powi(2) + (r as f64 - 7.5).powi(2)) / 12.0).exp();
            d[i] = bump(3.5).max(bump(11.5)) as f32;
            // Ridge centred on column 7.5.
            b[i] = (-(c as f64 - 7.5).powi(2) / 1.5).exp() as f32;
            e[i] = 1.0;
            if let Some(rng) = rng.as_mut() {
                b[i] = (b[i] + rng.random_range(-0.05..0.05f32)).clamp(0.0, 1.0);
                e[i] = (e[i] - rng.random_range(0.0..0.2f32)).clamp(0.0, 1.0);
            }
        }
    }
    MaskTriple::new(
        Raster::from_band(w, h, e).unwrap(),
        Raster::from_band(w, h, b).unwrap(),
        Raster::from_band(w, h, d).unwrap(),
    )
    .unwrap()
}

#[test]
fn watershed_matches_linear_scan_flood() {
    for noise in [None, Some(1), Some(2), Some(3)] {
        let m = two_bumps(noise);
        for t in [
            ThresholdSet::new(0.5, 0.5, 0.5).unwrap(),
            ThresholdSet::new(0.85, 0.3, 0.7).unwrap(),
        ] {
            let got = extract_watershed(&m, &t);
            let region: Vec<bool> = m.extent.data().iter().map(|&v| v >= t.t_extent as f32).collect();
            let seed_mask = BinaryMask::new(
                16,
                16,
                m.distance
                    .data()
                    .iter()
                    .zip(&region)
                    .map(|(&d, &r)| r && d >= t.t_distance as f32)
                    .collect(),
            )
            .unwrap();
            let seeds = connected_components(&seed_mask, Connectivity::Four);
            let surface: Vec<f32> = m
                .boundary
                .data()
                .iter()
                .zip(m.extent.data())
                .map(|(&b, &e)| b + (1.0 - e))
                .collect();
            let mut oracle = FieldLabelMap::new(16, 16, linear_scan_flood(&seeds, &surface, &region)).unwrap();
            oracle.relabel_dense();
            assert_eq!(got, oracle, "noise {noise:?} t {t:?}");
        }
    }
}

#[test]
fn watershed_frontier_sits_on_the_ridge() {
    let l = extract_watershed(&two_bumps(None), &ThresholdSet::default());
    assert_eq!(l.max_label(), 2);
    for r in 0..16 {
        for c in 0..16 {
            let v = l.get(r, c);
            if c <= 6 {
                assert_eq!(v, 1);
            }
            if c >= 9 {
                assert_eq!(v, 2);
            }
        }
    }
}

#[test]
fn cutoff_recovers_two_field_scene() {
    let spec = SceneSpec {
        n_fields: 2,
        crop_fraction: 1.0,
        blur_sigma: 0.0,
        noise_sigma: 0.0,
        size: 64,
        rng_seed: 3,
        ..SceneSpec::default()
    };
    let s = generate_scene(&spec).unwrap();
    assert_eq!(s.reference.max_label(), 2);
    let l = extract_cutoff(&s.oracle_masks, &ThresholdSet::default());
    assert_eq!(l.max_label(), 2);
    // Interiors match exactly; boundary pixels go to one of the two fields.
    let boundary = s.labels.boundary.bits();
    for i in 0..64 * 64 {
        let (r, c) = (i / 64, i % 64);
        let want = s.reference.get(r, c);
        if !boundary[i] {
            assert_eq!(l.get(r, c), want, "interior pixel {r},{c}");
        } else if want != 0 {
            assert!(l.get(r, c) != 0);
        }
    }
}

#[test]
fn mosaic_coverage_matches_counter() {
    let (n, win, stride) = (512usize, 256usize, 64usize);
    let origins = window_origins(n, n, win, stride).unwrap();
    let counts = coverage_counts(&origins, win, n, n);
    for r in (0..n).step_by(7) {
        for c in 0..n {
            let brute = origins
                .iter()
                .filter(|&&(r0, c0)| r >= r0 && r < r0 + win && c >= c0 && c < c0 + win)
                .count();
            assert_eq!(counts[r * n + c] as usize, brute);
        }
    }
    // Interior pixels see 16 windows.
    assert_eq!(counts[256 * n + 256], 16);
    assert!(counts.iter().all(|&k| k >= 1));

    // Windows holding their own index as a constant: the mosaic is the mean
    // of the covering indices.
    let windows: Vec<WindowPrediction> = origins
        .iter()
        .enumerate()
        .map(|(k, &(row, col))| {
            let r = Raster::filled(win, win, 1, k as f32 / origins.len() as f32);
            WindowPrediction { row, col, masks: MaskTriple::new(r.clone(), r.clone(), r).unwrap() }
        })
        .collect();
    let m = mosaic_windows(&windows, n, n, GeoTransform::default()).unwrap();
    for (r, c) in [(0, 0), (100, 300), (256, 256), (511, 511), (63, 64)] {
        let cover: Vec<usize> = origins
            .iter()
            .enumerate()
            .filter(|(_, &(r0, c0))| r >= r0 && r < r0 + win && c >= c0 && c < c0 + win)
            .map(|(k, _)| k)
            .collect();
        let mean = cover.iter().map(|&k| k as f64 / origins.len() as f64).sum::<f64>() / cover.len() as f64;
        assert!((m.extent.get(0, r, c) as f64 - mean).abs() < 1e-6);
    }
}

fn permutation_p(a: &[f64], b: &[f64], draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    // Ranks of |d| (no ties for continuous data).
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut rank = vec![0.0; d.len()];
    for (k, &i) in idx.iter().enumerate() {
        rank[i] = (k + 1) as f64;
    }
    let n = d.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let w_obs: f64 = (0..d.len()).filter(|&i| d[i] > 0.0).map(|i| rank[i]).sum();
    let dev = (w_obs - mean).abs();
    let mut extreme = 0usize;
    for _ in 0..draws {
        let w: f64 = rank.iter().filter(|_| rng.random_bool(0.5)).sum();
        if (w - mean).abs() >= dev - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / draws as f64
}

#[test]
fn wilcoxon_matches_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for (n, shift) in [(30, 0.0), (30, 0.3), (30, 0.6), (80, 0.0), (80, 0.15)] {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0) + shift).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let res = wilcoxon_signed_rank(&a, &b).unwrap();
        let expected = if n <= WILCOXON_EXACT_MAX_N { PValueMethod::Exact } else { PValueMethod::Normal };
        assert_eq!(res.method, expected);
        let perm = permutation_p(&a, &b, 200_000, &mut rng);
        assert!(
            (res.p_two_sided - perm).abs() < 0.01,
            "n {n} shift {shift}: {} vs permutation {perm}",
            res.p_two_sided
        );
    }
}

#[test]
fn wilcoxon_exact_matches_full_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 12;
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0) + 0.2).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let res = wilcoxon_signed_rank(&a, &b).unwrap();
    assert_eq!(res.method, PValueMethod::Exact);
    assert!(n <= WILCOXON_EXACT_MAX_N);
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut rank = vec![0.0; n];
    for (k, &i) in idx.iter().enumerate() {
        rank[i] = (k + 1) as f64;
    }
    let total = (n * (n + 1) / 2) as f64;
    let w_min = res.statistic;
    let mut extreme = 0u32;
    for mask in 0u32..1 << n {
        let wp: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| rank[i]).sum();
        if wp.min(total - wp) <= w_min + 1e-9 {
            extreme += 1;
        }
    }
    let p = extreme as f64 / (1u32 << n) as f64;
    assert!((res.p_two_sided - p).abs() < 1e-12, "{} vs {p}", res.p_two_sided);
}

#[test]
fn forty_field_scenes_keep_most_fields() {
    for seed in 0..5 {
        let s = generate_scene(&SceneSpec { rng_seed: seed, ..SceneSpec::default() }).unwrap();
        let n = connected_components(&s.reference.extent(), Connectivity::Four).max_label();
        let by_id = s.reference.max_label();
        assert!((30..=40).contains(&by_id), "seed {seed}: {by_id} fields");
        // Fields may touch, so components never outnumber fields.
        assert!(n <= by_id);
        assert_eq!(split_components(&s.reference, Connectivity::Four).max_label(), by_id);
    }
}

#[test]
fn scene_labels_satisfy_label_invariants() {
    let s = generate_scene(&SceneSpec { rng_seed: 4, ..SceneSpec::default() }).unwrap();
    assert_eq!(s.labels.distance.data().to_vec(), brute_distance_labels(&s.reference));
    assert_eq!(s.labels.extent, s.reference.extent());
    assert!(labels_are_4_connected(&s.reference));
}

#[test]
fn degrade_drops_about_the_requested_share() {
    let s = generate_scene(&SceneSpec {
        n_fields: 100,
        rng_seed: 7,
        ..SceneSpec::default()
    })
    .unwrap();
    let d = degrade_with_report(&s.oracle_masks, 0.3, 0.05, 7).unwrap();
    assert!(d.regions >= 90, "{} regions", d.regions);
    let frac = d.dropped as f64 / d.regions as f64;
    assert!((frac - 0.3).abs() <= 0.1, "dropped {frac}");
    assert_eq!(degrade_with_report(&s.oracle_masks, 0.3, 0.05, 7).unwrap(), d);
}
