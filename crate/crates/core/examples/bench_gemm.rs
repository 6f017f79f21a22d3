use ndarray::Array2;
use std::time::Instant;

fn bench(m: usize, k: usize, n: usize, reps: usize) {
    let a = Array2::<f32>::from_elem((m, k), 1.01);
    let b = Array2::<f32>::from_elem((k, n), 0.99);
    let mut c = Array2::<f32>::zeros((m, n));
    // warmup
    continuity_ssl::num::Scalar::gemm(1.0f32, &a.view(), &b.view(), 0.0, &mut c.view_mut());
    let t = Instant::now();
    for _ in 0..reps {
        continuity_ssl::num::Scalar::gemm(1.0f32, &a.view(), &b.view(), 0.0, &mut c.view_mut());
    }
    let el = t.elapsed().as_secs_f64();
    let flops = 2.0 * (m * k * n * reps) as f64;
    println!("m={m:5} k={k:5} n={n:6}  {:7.2} GFLOP/s", flops / el / 1e9);
}

fn main() {
    bench(512, 1728, 800, 20);   // head conv, batched
    bench(8, 81, 409600, 4);     // stage1 conv, full batch
    bench(8, 81, 25600, 40);     // stage1 conv, per sample
    bench(16, 216, 51200, 20);   // stage2 conv, full batch
    bench(32, 432, 12800, 40);   // stage3
    bench(64, 864, 3200, 40);    // stage4
    bench(1728, 512, 800, 20);   // head grad_input
    bench(512, 800, 1728, 20);   // head grad_weight
}
