//! Log-gamma helpers.

use alloc::vec::Vec;

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// `ln(n!)` for a count.
#[inline]
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Tabulated `ln Γ(n + shift)` for integer `n`, falling back to `lgamma`
/// past the end of the table.
#[derive(Debug, Clone)]
pub struct LnGammaTable {
    shift: f64,
    values: Vec<f64>,
}

/// Largest table the search will allocate (32 MiB of `f64`).
const MAX_TABLE_LEN: usize = 1 << 22;

impl LnGammaTable {
    pub fn new(shift: f64, max_arg: u64) -> Self {
        let len = (max_arg as usize).saturating_add(1).min(MAX_TABLE_LEN);
        let values = (0..len).map(|n| ln_gamma(n as f64 + shift)).collect();
        Self { shift, values }
    }

    #[inline]
    pub fn get(&self, n: u64) -> f64 {
        match self.values.get(n as usize) {
            Some(v) => *v,
            None => ln_gamma(n as f64 + self.shift),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_lgamma_inside_and_past_the_end() {
        let t = LnGammaTable::new(0.5, 10);
        for n in 0..20u64 {
            assert!((t.get(n) - ln_gamma(n as f64 + 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn ln_factorial_small_values() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(3) - 6f64.ln()).abs() < 1e-13);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-12);
    }
}
