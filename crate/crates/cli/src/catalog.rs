//! Named experiments.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub name: &'static str,
    /// Acceptance criterion this experiment decides.
    pub criterion: u8,
    pub default_kappa: f64,
    /// Smallest kappa the experiment accepts (exclusive), if any.
    pub kappa_above: Option<f64>,
    /// Full scale needs `heavy = true` (or LAB_HEAVY=1).
    pub heavy: bool,
    pub summary: &'static str,
}

pub const CATALOG: &[Entry] = &[
    Entry {
        name: "capacity-convergence",
        criterion: 1,
        default_kappa: 10.0,
        kappa_above: None,
        heavy: false,
        summary: "forward radial solver: log g_t'(0) - t under step halving, fitted order",
    },
    Entry {
        name: "fixed-time-symmetry",
        criterion: 2,
        default_kappa: 10.0,
        kappa_above: None,
        heavy: false,
        summary: "forward radial inverse map vs reverse radial flow at a fixed time, two-sample KS",
    },
    Entry {
        name: "crt-covariance",
        criterion: 3,
        default_kappa: 16.0,
        kappa_above: None,
        heavy: false,
        summary: "correlated Brownian pair: variances, correlation, sum and difference at unit time",
    },
    Entry {
        name: "girsanov-exactness",
        criterion: 4,
        default_kappa: 16.0,
        kappa_above: None,
        heavy: false,
        summary: "reweighting an interior insertion: weighted mean shift vs Green function at probe nodes",
    },
    Entry {
        name: "area-law",
        criterion: 5,
        default_kappa: 16.0,
        kappa_above: None,
        heavy: false,
        summary: "total area chaos of fixed-length disks vs the inverse-gamma law, weighted KS",
    },
    Entry {
        name: "first-passage-oracle",
        criterion: 6,
        default_kappa: 16.0,
        kappa_above: None,
        heavy: false,
        summary: "stopped CRT first-passage time vs the inverse-gamma law; fixes the scale b*",
    },
    Entry {
        name: "radial-mot",
        criterion: 7,
        default_kappa: 16.0,
        kappa_above: Some(8.0),
        heavy: true,
        summary: "boundary-length process extracted from (field, radial chain) pairs: covariance and L = l0 + X + Y",
    },
    Entry {
        name: "reversibility",
        criterion: 8,
        default_kappa: 10.0,
        kappa_above: Some(8.0),
        heavy: false,
        summary: "whole-plane hitting order of (z, w) vs (1/w, 1/z), with conjugation and power checks",
    },
    Entry {
        name: "excursion-limit",
        criterion: 9,
        default_kappa: 16.0,
        kappa_above: None,
        heavy: false,
        summary: "conditioned first-passage marginals as the start level shrinks",
    },
    Entry {
        name: "sphere-mot",
        criterion: 10,
        default_kappa: 16.0,
        kappa_above: None,
        heavy: false,
        summary: "sphere (L, Z) pairs: durations and quadratic-variation ratio",
    },
];

pub fn find(name: &str) -> Option<&'static Entry> {
    CATALOG.iter().find(|e| e.name == name)
}

pub fn by_criterion(c: u8) -> Option<&'static Entry> {
    CATALOG.iter().find(|e| e.criterion == c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_experiment_per_criterion() {
        for c in 1..=10 {
            assert_eq!(CATALOG.iter().filter(|e| e.criterion == c).count(), 1, "criterion {c}");
        }
        assert_eq!(CATALOG.len(), 10);
        assert_eq!(by_criterion(6).unwrap().name, "first-passage-oracle");
        assert!(find("reversibility").is_some_and(|e| e.kappa_above == Some(8.0)));
        assert!(find("nope").is_none());
    }
}
