//! The scalar soft-thresholding step used for the splitting variable.

use kriging_admm::kadmm::prox_psi;
use kriging_admm::verify::prox_against_grid;

fn main() {
    let w = 0.5;
    println!("argmin_x {w}x^2 + beta|x| - c x");
    println!("{:>6} {:>6} {:>10}", "beta", "c", "x*");
    for (beta, c) in [(0.0, 1.0), (1.0, 3.0), (1.0, -3.0), (2.0, 1.5), (0.5, 0.5)] {
        println!("{beta:>6} {c:>6} {:>10.4}", prox_psi(w, beta, c));
    }
    let report = prox_against_grid(20_000, 1);
    println!("\n{} random cases against a 1e-4 grid on [-10, 10]: worst excess {:.2e}", report.samples, report.max_excess);
}
