//! Shared transform plans.
//!
//! Forward transforms are unnormalised; inverse transforms carry the `1/N`.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

type PlanKey = (TypeId, usize, bool);
type PlanMap = HashMap<PlanKey, Box<dyn Any + Send + Sync>>;

fn cache() -> &'static Mutex<PlanMap> {
    static CACHE: OnceLock<Mutex<PlanMap>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached plan of length `n`.
pub fn plan<T: Real>(n: usize, inverse: bool) -> Arc<dyn Fft<T>> {
    let key = (TypeId::of::<T>(), n, inverse);
    let mut map = cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(p) = map.get(&key) {
        return p
            .downcast_ref::<Arc<dyn Fft<T>>>()
            .expect("plan cache keyed by scalar type")
            .clone();
    }
    let mut planner = FftPlanner::<T>::new();
    let p = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    map.insert(key, Box::new(p.clone()));
    p
}

pub fn fft_forward<T: Real>(buf: &mut [Complex<T>]) {
    if buf.is_empty() {
        return;
    }
    plan::<T>(buf.len(), false).process(buf);
}

pub fn fft_inverse<T: Real>(buf: &mut [Complex<T>]) {
    if buf.is_empty() {
        return;
    }
    plan::<T>(buf.len(), true).process(buf);
    let s = T::one() / T::lit(buf.len() as f64);
    buf.iter_mut().for_each(|v| *v = *v * s);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_is_flat() {
        let mut x = vec![Complex::new(0.0f64, 0.0); 16];
        x[0] = Complex::new(1.0, 0.0);
        fft_forward(&mut x);
        assert!(x.iter().all(|v| (v - Complex::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn f32_and_f64_plans_coexist() {
        let mut a = vec![Complex::new(1.0f32, 0.0); 8];
        let mut b = vec![Complex::new(1.0f64, 0.0); 8];
        fft_forward(&mut a);
        fft_forward(&mut b);
        assert!((a[0].re - 8.0).abs() < 1e-6 && (b[0].re - 8.0).abs() < 1e-12);
        fft_inverse(&mut a);
        assert!((a[3].re - 1.0).abs() < 1e-6);
    }
}
