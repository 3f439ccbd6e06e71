use covchange::matrix::SymMatrix;
use covchange::sdp::{relaxed_sparse_eigmax_with, RelaxOptions};
use covchange::sparse_eig::sparse_abs_eigmax;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &(p, t) in &[(8usize, 1usize), (8, 16), (12, 4), (16, 1), (16, 8), (16, 64)] {
        for &s in &[2usize, 4, 8] {
            if s >= p {
                continue;
            }
            let mut tot_it = 0;
            let mut nconv = 0;
            let mut worst: f64 = 0.0;
            let reps = 50;
            let start = Instant::now();
            for _ in 0..reps {
                let mut a = DMatrix::<f64>::zeros(p, p);
                for k in 0..2 * t {
                    let x: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
                    let sign = if k < t { 1.0 } else { -1.0 };
                    for i in 0..p {
                        for j in 0..p {
                            a[(i, j)] += sign * x[i] * x[j] / t as f64;
                        }
                    }
                }
                let a = SymMatrix::new(a).unwrap();
                let r = relaxed_sparse_eigmax_with(&a, s, RelaxOptions::default()).unwrap();
                tot_it += r.iterations;
                if r.converged {
                    nconv += 1;
                }
                if p <= 12 {
                    let ex = sparse_abs_eigmax(&a, s).unwrap().value;
                    worst = worst.max(ex - r.upper);
                }
                let _ = r;
            }
            println!(
                "p={p} t={t} s={s}: {:.2} ms/solve, mean iters {}, converged {}/{}, exact-upper {:.2e}",
                start.elapsed().as_secs_f64() * 1000.0 / reps as f64,
                tot_it / reps,
                nconv,
                reps,
                worst
            );
        }
    }
}
