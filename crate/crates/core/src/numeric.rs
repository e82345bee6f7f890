//! Small numerical helpers: compensated summation and log-sum-exp.

/// Kahan-Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn ksum(xs: &[f64]) -> f64 {
    let mut acc = Kahan::new();
    for &x in xs {
        acc.add(x);
    }
    acc.total()
}

/// log(Σ exp(x_i)) with max subtraction; -inf entries are ignored, an empty
/// or all--inf input yields -inf.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    let mut acc = Kahan::new();
    for &x in xs {
        acc.add((x - mx).exp());
    }
    mx + acc.total().ln()
}

/// Mean and (population-corrected) standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = ksum(xs) / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let mut acc = Kahan::new();
    for &x in xs {
        let d = x - mean;
        acc.add(d * d);
    }
    let var = acc.total() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
