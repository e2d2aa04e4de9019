//! Small numerical helpers shared by the state and series code.

/// `ln(k!)` for `k = 0..len`.
pub fn ln_factorials(len: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(len.max(1));
    let mut acc = 0.0_f64;
    table.push(0.0);
    for k in 1..len {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table.truncate(len.max(1));
    table
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_table_matches_products() {
        let t = ln_factorials(21);
        let mut f = 1.0_f64;
        for (k, lf) in t.iter().enumerate().skip(1) {
            f *= k as f64;
            assert!((lf - f.ln()).abs() < 1e-12 * f.ln().max(1.0));
        }
        assert_eq!(ln_factorials(0), vec![0.0]);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        let s: CompensatedSum = xs.into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }
}
