//! Conformal maps and the coordinate-change rule h o g^{-1} + Q log|(g^{-1})'|.

use super::grid::GridSpec;
use super::sample::{FieldSample, Insertion, Pullback};
use crate::error::{Error, Result};
use crate::C64;
use rayon::prelude::*;
use std::fmt::Debug;
use std::sync::Arc;

/// A conformal bijection g between two domains.
pub trait ConformalMap: Send + Sync + Debug {
    /// g^{-1}(z) and (g^{-1})'(z).
    fn pullback(&self, z: C64) -> Result<(C64, C64)>;
    /// g(w), or None if w has no image in the target domain.
    fn push(&self, w: C64) -> Option<C64>;
}

#[derive(Debug, Clone, Copy)]
pub struct Identity;

impl ConformalMap for Identity {
    fn pullback(&self, z: C64) -> Result<(C64, C64)> {
        Ok((z, C64::new(1.0, 0.0)))
    }
    fn push(&self, w: C64) -> Option<C64> {
        Some(w)
    }
}

/// Disk automorphism z -> e^{i phi} (z - a) / (1 - conj(a) z).
#[derive(Debug, Clone, Copy)]
pub struct DiskMobius {
    pub a: C64,
    pub phi: f64,
}

impl DiskMobius {
    pub fn new(a: C64, phi: f64) -> Result<Self> {
        if !(a.norm() < 1.0) || !phi.is_finite() {
            return Err(Error::InvalidParameter(format!("disk automorphism needs |a| < 1, got {a}")));
        }
        Ok(DiskMobius { a, phi })
    }

    pub fn rotation(phi: f64) -> Self {
        DiskMobius { a: C64::new(0.0, 0.0), phi }
    }
}

impl ConformalMap for DiskMobius {
    fn pullback(&self, z: C64) -> Result<(C64, C64)> {
        let rot = C64::from_polar(1.0, -self.phi);
        let u = rot * z;
        let den = 1.0 + self.a.conj() * u;
        if den.norm() == 0.0 {
            return Err(Error::Singular);
        }
        Ok(((u + self.a) / den, rot * (1.0 - self.a.norm_sqr()) / (den * den)))
    }

    fn push(&self, w: C64) -> Option<C64> {
        let den = 1.0 - self.a.conj() * w;
        (den.norm() > 0.0).then(|| C64::from_polar(1.0, self.phi) * (w - self.a) / den)
    }
}

/// Apply `maps[0]`, then `maps[1]`, ...
#[derive(Debug, Clone)]
pub struct Composite(pub Vec<Arc<dyn ConformalMap>>);

impl ConformalMap for Composite {
    fn pullback(&self, z: C64) -> Result<(C64, C64)> {
        let mut p = z;
        let mut d = C64::new(1.0, 0.0);
        for m in self.0.iter().rev() {
            let (q, dq) = m.pullback(p)?;
            p = q;
            d *= dq;
        }
        Ok((p, d))
    }

    fn push(&self, w: C64) -> Option<C64> {
        self.0.iter().try_fold(w, |p, m| m.push(p))
    }
}

/// Field g . h = h o g^{-1} + Q log|(g^{-1})'| on `target`, where `map` is g.
///
/// The result keeps a reference to the root sample and the composed map, so
/// repeated changes interpolate the root only once.
pub fn coordinate_change(field: &FieldSample, map: Arc<dyn ConformalMap>, target: Arc<GridSpec>, q: f64) -> Result<FieldSample> {
    let (base, total): (FieldSample, Arc<dyn ConformalMap>) = match &field.origin {
        Some(o) => {
            if (o.q - q).abs() > 0.0 {
                return Err(Error::InvalidParameter("coordinate changes with different Q".into()));
            }
            (o.base.clone(), Arc::new(Composite(vec![o.map.clone(), map.clone()])))
        }
        None => (field.clone(), map.clone()),
    };
    let cols: Vec<Result<(f64, f64, f64)>> = target
        .nodes
        .par_iter()
        .map(|&z| {
            let (p, d) = total.pullback(z)?;
            let g = base.gaussian_at(p)?;
            let s = base.deterministic_at(p)? + q * d.norm().ln();
            // an interpolated value is regularized at a larger scale than eps
            let scale = base.scale_at(p) * base.interpolation_deficit(p).exp();
            Ok((g, s, scale / d.norm()))
        })
        .collect();
    let n = target.len();
    let (mut gaussian, mut smooth, mut scale) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for c in cols {
        let (g, s, e) = c?;
        gaussian.push(g);
        smooth.push(s);
        scale.push(e);
    }
    let insertions = field
        .insertions
        .iter()
        .filter_map(|ins| map.push(ins.location).map(|location| Insertion { location, ..ins.clone() }))
        .collect();
    Ok(FieldSample {
        grid: target,
        gaussian,
        smooth,
        scale,
        insertions,
        constant: base.constant,
        weight: field.weight,
        seed: field.seed,
        origin: Some(Arc::new(Pullback { base, map: total, q })),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn mobius_pullback_inverts_push(ar in 0.0f64..0.9, at in 0.0f64..6.3, phi in -3.0f64..3.0, r in 0.0f64..0.99, t in 0.0f64..6.3) {
            let m = DiskMobius::new(C64::from_polar(ar, at), phi).unwrap();
            let w = C64::from_polar(r, t);
            let z = m.push(w).unwrap();
            prop_assert!(z.norm() < 1.0 + 1e-12);
            let (p, d) = m.pullback(z).unwrap();
            prop_assert!((p - w).norm() < 1e-10);
            // numerical derivative
            let h = 1e-6;
            let (p2, _) = m.pullback(z + h).unwrap();
            prop_assert!(((p2 - p) / h - d).norm() < 1e-4 * d.norm().max(1.0));
        }
    }

    #[test]
    fn composite_order() {
        let a = DiskMobius::new(C64::new(0.3, 0.1), 0.5).unwrap();
        let b = DiskMobius::rotation(1.0);
        let c = Composite(vec![Arc::new(a), Arc::new(b)]);
        let w = C64::new(0.2, -0.4);
        let z = c.push(w).unwrap();
        assert_relative_eq!((z - b.push(a.push(w).unwrap()).unwrap()).norm(), 0.0, epsilon = 1e-15);
        let (p, _) = c.pullback(z).unwrap();
        assert!((p - w).norm() < 1e-12);
    }
}
