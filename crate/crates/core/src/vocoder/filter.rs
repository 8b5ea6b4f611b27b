/// Cascade of `stage` all-pole sections over a first-order all-pass delay
/// chain. Each section computes `y = x / (1 + sum_m b(m) Phi_m(z))` where the
/// coefficients passed in are already multiplied by `gamma`.
#[derive(Debug, Clone)]
pub struct MglsaFilter {
    alpha: f64,
    order: usize,
    delay: Vec<f64>,
}

impl MglsaFilter {
    pub fn new(order: usize, alpha: f64, stage: usize) -> Self {
        MglsaFilter {
            alpha,
            order,
            delay: vec![0.0; (order + 1) * stage],
        }
    }

    pub fn reset(&mut self) {
        self.delay.iter_mut().for_each(|d| *d = 0.0);
    }

    /// Filters one sample. `coeffs` has `order + 1` entries; slot 0 is ignored.
    pub fn process(&mut self, x: f64, coeffs: &[f64]) -> f64 {
        debug_assert_eq!(coeffs.len(), self.order + 1);
        let (m, a) = (self.order, self.alpha);
        let mut x = x;
        for d in self.delay.chunks_exact_mut(m + 1) {
            let mut y = d[0] * coeffs[1];
            for i in 1..m {
                d[i] += a * (d[i + 1] - d[i - 1]);
                y += d[i] * coeffs[i + 1];
            }
            x -= y;
            d.copy_within(0..m, 1);
            d[0] = a * d[0] + (1.0 - a * a) * x;
        }
        x
    }
}
