use covchange::grid::{dyadic_grid, gamma, rate_h, rate_r, sparsity_grid};
use covchange::minimax::{chisq_cross_bound, chisq_cross_term, kappa, minimax_lower_bound, sample_alt, PriorSpec};
use covchange::multivariate::{scan_adaptive, ScanOptions};
use covchange::sdp::{dual_upper_bound, relaxed_sparse_eigmax};
use covchange::series::prefix_covariance;
use covchange::signal::{signal_strength_multi, SignalStrengthUni};
use covchange::sparse_eig::{operator_norm, sparse_abs_eigmax};
use covchange::{Series, SymMatrix};
use proptest::prelude::*;

fn sym(p: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-3.0..3.0f64, p * p).prop_map(move |v| {
        let rows: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| 0.5 * (v[i * p + j] + v[j * p + i])).collect())
            .collect();
        SymMatrix::from_rows(&rows).unwrap()
    })
}

fn any_sym(max_p: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_p).prop_flat_map(sym)
}

/// `B Bᵀ` for a random square `B`.
fn psd(p: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-2.0..2.0f64, p * p).prop_map(move |b| {
        let rows: Vec<Vec<f64>> = (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| (0..p).map(|k| b[i * p + k] * b[j * p + k]).sum())
                    .collect()
            })
            .collect();
        SymMatrix::from_rows(&rows).unwrap()
    })
}

fn panel(max_n: usize, max_p: usize) -> impl Strategy<Value = Series> {
    (4..=max_n, 1..=max_p).prop_flat_map(|(n, p)| {
        prop::collection::vec(-5.0..5.0f64, n * p).prop_map(move |v| Series::new(v, n, p).unwrap())
    })
}

fn quad(a: &SymMatrix, v: &[f64]) -> f64 {
    let p = a.dim();
    (0..p)
        .map(|i| (0..p).map(|j| v[i] * a.get(i, j) * v[j]).sum::<f64>())
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sparse_result_is_consistent(a in any_sym(7), s_frac in 0.0..1.0f64) {
        let p = a.dim();
        let s = 1 + ((p as f64 * s_frac) as usize).min(p - 1);
        let r = sparse_abs_eigmax(&a, s).unwrap();
        let norm: f64 = r.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() <= 1e-12);
        prop_assert!(r.support.len() <= s);
        prop_assert!(r.vector.iter().enumerate().all(|(i, x)| *x == 0.0 || r.support.contains(&i)));
        prop_assert!((quad(&a, &r.vector).abs() - r.value).abs() <= 1e-10 * r.value.max(1e-300) + 1e-14);
    }

    #[test]
    fn full_sparsity_is_operator_norm(a in any_sym(7)) {
        let full = sparse_abs_eigmax(&a, a.dim()).unwrap().value;
        prop_assert!((full - operator_norm(&a)).abs() <= 1e-12 * (1.0 + full));
    }

    #[test]
    fn doubling_bound_on_psd(sigma in (2usize..=7).prop_flat_map(psd), pick in 0.0..1.0f64) {
        let p = sigma.dim();
        let s0 = 2 + ((p - 1) as f64 * pick) as usize;
        let s0 = s0.min(p);
        let s = s0.div_ceil(2);
        let big = sparse_abs_eigmax(&sigma, s0).unwrap().value;
        let small = sparse_abs_eigmax(&sigma, s).unwrap().value;
        prop_assert!(big <= 4.0 * small + 1e-10);
    }

    #[test]
    fn difference_of_psd_pair(
        (s1, s2) in (1usize..=6).prop_flat_map(|p| (psd(p), psd(p))),
        pick in 0.0..1.0f64,
    ) {
        let p = s1.dim();
        let s = 1 + ((p as f64 * pick) as usize).min(p - 1);
        let d = sparse_abs_eigmax(&s1.sub(&s2).unwrap(), s).unwrap().value;
        let m = sparse_abs_eigmax(&s1, s).unwrap().value.max(sparse_abs_eigmax(&s2, s).unwrap().value);
        prop_assert!(d <= m + 1e-10);
    }

    #[test]
    fn rates_are_ordered(p in 1usize..200, n in 2usize..100_000, s_frac in 0.0..1.0f64, t in 1usize..5000) {
        let s = 1 + ((p as f64 * s_frac) as usize).min(p - 1);
        let r = rate_r(p, n, s, t).unwrap();
        let h = rate_h(p, n, s, t).unwrap();
        prop_assert!(h >= r * (1.0 - 1e-12));
        prop_assert!(rate_r(p, n, s, t + 1).unwrap() <= r);
        prop_assert!(rate_h(p, n, s, t + 1).unwrap() <= h);
        if s < p {
            prop_assert!(rate_r(p, n, s + 1, t).unwrap() >= r);
            prop_assert!(rate_h(p, n, s + 1, t).unwrap() >= h);
            prop_assert!(gamma(p, n, s + 1).unwrap() >= gamma(p, n, s).unwrap());
        }
    }

    #[test]
    fn dyadic_grid_covers(n in 2usize..5000, frac in 0.0..1.0f64) {
        let grid = dyadic_grid(n).unwrap();
        prop_assert!(2 * grid.last().unwrap() <= n);
        let t0 = 1 + ((n / 2 - 1) as f64 * frac) as usize;
        prop_assert!(grid.iter().any(|&t| 2 * t >= t0 && t <= t0));
    }

    #[test]
    fn prefix_covariance_is_psd(x in panel(40, 5), frac in 0.0..1.0f64) {
        let t = 1 + ((x.n() / 2 - 1) as f64 * frac) as usize;
        let c = prefix_covariance(&x, t).unwrap();
        prop_assert!(c.lambda_min() >= -1e-10 * c.trace().max(1e-300));
    }

    #[test]
    fn uni_signal_strength(n in 2usize..10_000, frac in 0.0..1.0f64, v1 in 0.01..100.0f64, v2 in 0.01..100.0f64, c in 1e-3..1e3f64) {
        let t0 = 1 + ((n - 2) as f64 * frac) as usize;
        let sig = SignalStrengthUni::new(t0, n, v1, v2).unwrap();
        let ratio = (v1 - v2).abs() / v1.min(v2);
        let want = t0.min(n - t0) as f64 * ratio.min(ratio * ratio);
        prop_assert!((sig.rho - want).abs() <= 1e-12 * want.max(1e-300));
        let scaled = SignalStrengthUni::new(t0, n, c * v1, c * v2).unwrap();
        prop_assert!((scaled.rho - sig.rho).abs() <= 1e-10 * sig.rho.max(1e-300));
    }

    #[test]
    fn multi_signal_strength_scale_free(
        (s1, s2) in (1usize..=4).prop_flat_map(|p| (psd(p), psd(p))),
        c in 1e-2..1e2f64,
    ) {
        let p = s1.dim();
        let ridge = SymMatrix::identity(p);
        let (a, b) = (s1.add(&ridge).unwrap(), s2.add(&ridge).unwrap());
        if let Ok(rho) = signal_strength_multi(10, 50, &a, &b) {
            let scaled = signal_strength_multi(10, 50, &a.scale(c), &b.scale(c)).unwrap();
            prop_assert!((scaled - rho).abs() <= 1e-10 * rho.max(1e-300));
        }
    }

    #[test]
    fn relaxation_equivariance(a in (2usize..=5).prop_flat_map(sym), s_frac in 0.0..1.0f64, perm_seed in any::<u64>()) {
        let p = a.dim();
        let s = 1 + ((p as f64 * s_frac) as usize).min(p - 1);
        let base = relaxed_sparse_eigmax(&a, s).unwrap();
        let exact = sparse_abs_eigmax(&a, s).unwrap().value;
        prop_assert!(base.upper >= exact - 1e-8);
        prop_assert!(base.lower <= s as f64 * a.max_abs_entry() + 1e-8);
        prop_assert!(base.lower <= base.upper);
        let slack = 2e-3 * (s as f64 * a.max_abs_entry()).max(1.0);
        for c in [-2.0, 0.5, 10.0] {
            let r = relaxed_sparse_eigmax(&a.scale(c), s).unwrap();
            prop_assert!(r.lower <= c.abs() * base.upper + c.abs() * slack);
            prop_assert!(r.upper >= c.abs() * base.lower - c.abs() * slack);
        }
        let mut perm: Vec<usize> = (0..p).collect();
        let mut state = perm_seed;
        for i in (1..p).rev() {
            state = covchange::rng::splitmix64(state);
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let r = relaxed_sparse_eigmax(&a.permuted(&perm).unwrap(), s).unwrap();
        prop_assert!(r.lower <= base.upper + slack && r.upper >= base.lower - slack);
    }

    #[test]
    fn dual_bound_dominates_primal(a in (1usize..=5).prop_flat_map(sym), y_raw in prop::collection::vec(-2.0..2.0f64, 25), s_frac in 0.0..1.0f64) {
        let p = a.dim();
        let s = 1 + ((p as f64 * s_frac) as usize).min(p - 1);
        let rows: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| 0.5 * (y_raw[i * 5 + j] + y_raw[j * 5 + i])).collect())
            .collect();
        let y = SymMatrix::from_rows(&rows).unwrap();
        let sol = relaxed_sparse_eigmax(&a, s).unwrap();
        // The primal point certifies trace(A Z) on its own side only.
        let side_value = sol.z.trace_product(&a);
        let bound = if side_value >= 0.0 {
            dual_upper_bound(&a, s, &y).unwrap()
        } else {
            dual_upper_bound(&a.scale(-1.0), s, &y).unwrap()
        };
        prop_assert!(bound >= sol.lower - 1e-8);
    }

    #[test]
    fn prior_draws_hit_rho(log_n in 2u32..14, p in 1usize..12, s_frac in 0.0..1.0f64, rho in 0.01..50.0f64, sigma_sq in 0.1..10.0f64, seed in any::<u64>()) {
        let n = 1usize << log_n;
        let s = 1 + ((p as f64 * s_frac) as usize).min(p - 1);
        let spec = PriorSpec::multi(n, p, s, sigma_sq, rho).unwrap();
        let d = sample_alt(&spec, seed).unwrap();
        prop_assert!((d.signal_strength(n, sigma_sq) - rho).abs() <= 1e-12 * rho);
        prop_assert!(d.delta.is_power_of_two() && 2 * d.delta <= n);
        prop_assert_eq!(d.support.len(), s);
        let norm: f64 = d.u.iter().map(|x| x * x).sum();
        prop_assert!((norm - 1.0).abs() <= 1e-12);
        let m = 1.0 / (s as f64).sqrt();
        prop_assert!(d.u.iter().all(|x| *x == 0.0 || (x.abs() - m).abs() <= 1e-15));
    }

    #[test]
    fn cross_term_below_bound(l1 in 0u32..16, gap in 0u32..8, r1 in 0.001..40.0f64, r2 in 0.001..40.0f64, sigma_sq in 0.1..5.0f64, inner in -1.0..1.0f64) {
        let (d1, d2) = (1usize << l1, 1usize << (l1 + gap));
        let k1 = kappa(d1, r1, sigma_sq).unwrap();
        let k2 = kappa(d2, r2, sigma_sq).unwrap();
        let term = chisq_cross_term(d1, d2, k1, k2, sigma_sq, inner).unwrap();
        let bound = chisq_cross_bound(d1, d2, k1, k2, sigma_sq, inner).unwrap();
        prop_assert!(term >= 1.0 - 1e-15);
        prop_assert!(term <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn lower_bound_nonincreasing(a in 0.0..50.0f64, b in 0.0..50.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(minimax_lower_bound(hi).unwrap() <= minimax_lower_bound(lo).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adaptive_report_covers_grid(x in panel(48, 4), lambda in 0.01..5.0f64) {
        let Ok(scan) = scan_adaptive(&x, &ScanOptions::default()) else { return Ok(()) };
        let report = scan.report(lambda);
        prop_assert_eq!(report.reject, report.cells.iter().any(|c| c.triggered));
        let mut seen: Vec<(usize, usize)> = report.cells.iter().map(|c| (c.t, c.s)).collect();
        seen.extend(report.skipped.iter().map(|c| (c.t, c.s)));
        seen.sort_unstable();
        let mut want = Vec::new();
        for &t in &dyadic_grid(x.n()).unwrap() {
            for &s in &sparsity_grid(x.p()).unwrap() {
                want.push((t, s));
            }
        }
        prop_assert_eq!(seen, want);
    }
}
