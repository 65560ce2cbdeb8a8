//! Coefficient decay audit: every constructed field must satisfy
//! `|c_k| ≤ ‖v‖_r e^{-rλ_k} (1+λ_k)^{(d-1)/4}` at each audited radius.
//! A violation means the norm computation itself is broken, so it panics.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::field::{lambda, FourierField};

const RADII: [f64; 4] = [0.0, 0.125, 0.25, 0.5];

static FIELDS: AtomicU64 = AtomicU64::new(0);
static CHECKS: AtomicU64 = AtomicU64::new(0);

pub(crate) fn record(f: &FourierField) {
    let d = f.dim();
    let mb = f.mode_box();
    let expo = (d as f64 - 1.0) / 4.0;
    let mut checks = 0u64;
    for &r in &RADII {
        let norm = f.weighted_norm(r);
        for i in 0..mb.len() {
            let c = f.coeff_at(i);
            let m = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if m == 0.0 {
                continue;
            }
            let lam = lambda(&mb.mode(i));
            let bound = norm * (-r * lam).exp() * (1.0 + lam).powf(expo);
            assert!(
                m <= bound * (1.0 + 1e-12) + 1e-300,
                "coefficient decay bound violated at mode {:?}, r = {r}: |c_k| = {m:e} > {bound:e}",
                mb.mode(i)
            );
            checks += 1;
        }
    }
    FIELDS.fetch_add(1, Ordering::Relaxed);
    CHECKS.fetch_add(checks, Ordering::Relaxed);
}

/// `(fields audited, coefficient checks performed)` since process start.
pub fn counts() -> (u64, u64) {
    (FIELDS.load(Ordering::Relaxed), CHECKS.load(Ordering::Relaxed))
}
