//! Simulated skin: a per-(location, frequency) response model and a dataset
//! generator that replays the calibration protocol's data shape.
//!
//! Each reference-tone amplitude follows
//! `base + span * exp(-force / tau_n) + noise`, clipped below at zero.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CalibrationDataset, CalibrationRecord, Provenance};
use crate::dsp::{SpectralFeatures, REFERENCE_FREQS_HZ};
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
    #[error("MalformedProfile: {0}")]
    MalformedProfile(String),
    #[error("SeparabilityViolation: locations {0} and {1} differ by at most 4 noise sigmas at zero force")]
    SeparabilityViolation(Location, Location),
    #[error("ForceOutOfRange: {force_n} N outside [0, {max_n}]")]
    ForceOutOfRange { force_n: f64, max_n: f64 },
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
}

/// Contact location label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Location {
    A,
    B,
    C,
}

impl Location {
    pub const ALL: [Location; 3] = [Location::A, Location::B, Location::C];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Canonical calibration-point coordinates in millimetres.
    pub fn canonical_coords(self) -> (f64, f64) {
        match self {
            Location::A => (17.0, 10.0),
            Location::B => (17.0, 30.0),
            Location::C => (17.0, 50.0),
        }
    }
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Location::A => "A",
            Location::B => "B",
            Location::C => "C",
        })
    }
}

impl std::str::FromStr for Location {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Location::A),
            "B" => Ok(Location::B),
            "C" => Ok(Location::C),
            other => Err(SimError::InvalidArgument(format!("unknown location '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactLocation {
    pub label: Location,
    pub x_mm: f64,
    pub y_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseCurve {
    pub base: f64,
    pub span: f64,
    pub tau_n: f64,
}

impl ResponseCurve {
    /// Noise-free amplitude at `force_n`.
    pub fn mean(&self, force_n: f64) -> f64 {
        self.base + self.span * (-force_n / self.tau_n).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveEntry {
    location: Location,
    freq_hz: f64,
    base: f64,
    span: f64,
    tau_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    skin_id: String,
    force_max_n: f64,
    noise_sigma: f64,
    locations: Vec<ContactLocation>,
    curves: Vec<CurveEntry>,
}

/// Forward model of one skin configuration. Immutable once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinProfile {
    skin_id: String,
    force_max_n: f64,
    noise_sigma: f64,
    locations: [ContactLocation; 3],
    curves: [[ResponseCurve; 4]; 3],
}

/// Bundled configurations, one per skin variant name.
pub const BUNDLED_PROFILES: [(&str, &str); 9] = [
    ("ast1", include_str!("../profiles/ast1.json")),
    ("ast2a", include_str!("../profiles/ast2a.json")),
    ("ast2b", include_str!("../profiles/ast2b.json")),
    ("ast3a", include_str!("../profiles/ast3a.json")),
    ("ast3b", include_str!("../profiles/ast3b.json")),
    ("ast4a", include_str!("../profiles/ast4a.json")),
    ("ast4b", include_str!("../profiles/ast4b.json")),
    ("ast4c", include_str!("../profiles/ast4c.json")),
    ("ast4d", include_str!("../profiles/ast4d.json")),
];

fn freq_index(freq_hz: f64) -> Option<usize> {
    REFERENCE_FREQS_HZ.iter().position(|&f| f == freq_hz)
}

impl SkinProfile {
    pub fn skin_id(&self) -> &str {
        &self.skin_id
    }

    pub fn force_max_n(&self) -> f64 {
        self.force_max_n
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn location(&self, loc: Location) -> ContactLocation {
        self.locations[loc.index()]
    }

    /// Curves for `loc` in frequency order 300, 500, 700, 900 Hz.
    pub fn curves(&self, loc: Location) -> &[ResponseCurve; 4] {
        &self.curves[loc.index()]
    }

    /// Noise-free features at `force_n`.
    pub fn mean_features(&self, loc: Location, force_n: f64) -> SpectralFeatures {
        SpectralFeatures::from_array(self.curves(loc).map(|c| c.mean(force_n).max(0.0)))
    }

    /// Copy with a different noise level (validated again).
    pub fn with_noise_sigma(&self, noise_sigma: f64) -> Result<Self, SimError> {
        let mut p = self.clone();
        p.noise_sigma = noise_sigma;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let file: ProfileFile =
            serde_json::from_str(text).map_err(|e| SimError::MalformedProfile(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> String {
        let mut curves = Vec::with_capacity(12);
        for loc in Location::ALL {
            for (fi, c) in self.curves(loc).iter().enumerate() {
                curves.push(CurveEntry {
                    location: loc,
                    freq_hz: REFERENCE_FREQS_HZ[fi],
                    base: c.base,
                    span: c.span,
                    tau_n: c.tau_n,
                });
            }
        }
        let file = ProfileFile {
            skin_id: self.skin_id.clone(),
            force_max_n: self.force_max_n,
            noise_sigma: self.noise_sigma,
            locations: self.locations.to_vec(),
            curves,
        };
        serde_json::to_string_pretty(&file).expect("profile serialises") + "\n"
    }

    /// A bundled profile by name (`ast1`, `ast2a`, ...).
    pub fn bundled(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        BUNDLED_PROFILES
            .iter()
            .find(|(n, _)| *n == lower)
            .map(|(_, text)| Self::from_json(text).expect("bundled profiles are valid"))
    }

    fn from_file(file: ProfileFile) -> Result<Self, SimError> {
        let bad = |m: String| Err(SimError::MalformedProfile(m));

        let mut locations: [Option<ContactLocation>; 3] = [None; 3];
        for l in &file.locations {
            if locations[l.label.index()].replace(*l).is_some() {
                return bad(format!("duplicate location {}", l.label));
            }
        }
        let mut locs = [ContactLocation { label: Location::A, x_mm: 0.0, y_mm: 0.0 }; 3];
        for loc in Location::ALL {
            match locations[loc.index()] {
                Some(l) => locs[loc.index()] = l,
                None => return bad(format!("missing location {loc}")),
            }
        }

        let mut seen: BTreeMap<(Location, usize), ResponseCurve> = BTreeMap::new();
        for c in &file.curves {
            let fi = match freq_index(c.freq_hz) {
                Some(fi) => fi,
                None => return bad(format!("curve frequency {} Hz is not a reference tone", c.freq_hz)),
            };
            let curve = ResponseCurve { base: c.base, span: c.span, tau_n: c.tau_n };
            if seen.insert((c.location, fi), curve).is_some() {
                return bad(format!("duplicate curve ({}, {})", c.location, c.freq_hz));
            }
        }
        let mut curves = [[ResponseCurve { base: 0.0, span: 0.0, tau_n: 1.0 }; 4]; 3];
        for loc in Location::ALL {
            for (fi, f) in REFERENCE_FREQS_HZ.iter().enumerate() {
                match seen.get(&(loc, fi)) {
                    Some(c) => curves[loc.index()][fi] = *c,
                    None => return bad(format!("missing curve ({loc}, {f})")),
                }
            }
        }

        let profile = SkinProfile {
            skin_id: file.skin_id,
            force_max_n: file.force_max_n,
            noise_sigma: file.noise_sigma,
            locations: locs,
            curves,
        };
        profile.validate()?;
        Ok(profile)
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::MalformedProfile(m));
        if self.skin_id.is_empty() {
            return bad("empty skin_id".into());
        }
        if !(self.force_max_n > 0.0 && self.force_max_n.is_finite()) {
            return bad(format!("force_max_n must be positive, got {}", self.force_max_n));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        for loc in Location::ALL {
            for (fi, c) in self.curves(loc).iter().enumerate() {
                let f = REFERENCE_FREQS_HZ[fi];
                if !(c.base.is_finite() && c.span.is_finite() && c.tau_n.is_finite()) {
                    return bad(format!("curve ({loc}, {f}) has non-finite parameters"));
                }
                if c.base < 0.0 || c.base + c.span < 0.0 {
                    return bad(format!("curve ({loc}, {f}) has a negative amplitude"));
                }
                if c.tau_n <= 0.0 {
                    return bad(format!("curve ({loc}, {f}) has non-positive tau_n"));
                }
            }
        }
        for (i, &a) in Location::ALL.iter().enumerate() {
            for &b in &Location::ALL[i + 1..] {
                let fa = self.mean_features(a, 0.0).to_array();
                let fb = self.mean_features(b, 0.0).to_array();
                let gap = fa.iter().zip(&fb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                if gap <= 4.0 * self.noise_sigma || gap == 0.0 {
                    return Err(SimError::SeparabilityViolation(a, b));
                }
            }
        }
        Ok(())
    }
}

pub fn load_profile(path: &Path) -> Result<SkinProfile, SimError> {
    SkinProfile::from_json(&std::fs::read_to_string(path)?)
}

/// One noisy observation. Always draws four normals (in frequency order) so
/// the generator stream does not depend on the noise level.
pub fn response(
    p: &SkinProfile,
    loc: Location,
    force_n: f64,
    rng: &mut SplitMix64,
) -> Result<SpectralFeatures, SimError> {
    if !(0.0..=p.force_max_n).contains(&force_n) {
        return Err(SimError::ForceOutOfRange { force_n, max_n: p.force_max_n });
    }
    let amps = p.curves(loc).map(|c| {
        let eps = p.noise_sigma * rng.normal();
        (c.mean(force_n) + eps).max(0.0)
    });
    Ok(SpectralFeatures::from_array(amps))
}

/// Force levels linearly spaced on `[0, force_max_n]`.
pub fn force_levels(p: &SkinProfile, levels: usize) -> Vec<f64> {
    (0..levels)
        .map(|i| p.force_max_n * i as f64 / (levels - 1) as f64)
        .collect()
}

/// Replays the calibration protocol: every location, every force level,
/// `samples_per_level` observations. Rows are ordered location, level, sample.
pub fn generate_dataset(
    p: &SkinProfile,
    force_levels_count: usize,
    samples_per_level: usize,
    seed: u64,
) -> Result<CalibrationDataset, SimError> {
    if force_levels_count < 2 {
        return Err(SimError::InvalidArgument("at least two force levels are required".into()));
    }
    if samples_per_level == 0 {
        return Err(SimError::InvalidArgument("samples per level must be positive".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let levels = force_levels(p, force_levels_count);
    let mut records = Vec::with_capacity(3 * force_levels_count * samples_per_level);
    for loc in Location::ALL {
        let cl = p.location(loc);
        for &force_n in &levels {
            for _ in 0..samples_per_level {
                records.push(CalibrationRecord {
                    skin_id: p.skin_id.clone(),
                    location: loc,
                    x_mm: cl.x_mm,
                    y_mm: cl.y_mm,
                    force_n,
                    features: response(p, loc, force_n, &mut rng)?,
                });
            }
        }
    }
    let params = BTreeMap::from([
        ("force_levels".to_string(), force_levels_count.to_string()),
        ("samples_per_level".to_string(), samples_per_level.to_string()),
        ("seed".to_string(), seed.to_string()),
        ("noise_sigma".to_string(), p.noise_sigma.to_string()),
    ]);
    Ok(CalibrationDataset {
        records,
        provenance: Provenance { source: format!("simskin:{}", p.skin_id), params },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ast1() -> SkinProfile {
        SkinProfile::bundled("ast1").unwrap()
    }

    #[test]
    fn bundled_profiles_load() {
        for (name, _) in BUNDLED_PROFILES {
            let p = SkinProfile::bundled(name).unwrap();
            assert_eq!(p.force_max_n(), 30.0);
            for loc in Location::ALL {
                assert_eq!(p.location(loc).label, loc);
                let (x, y) = loc.canonical_coords();
                assert_eq!((p.location(loc).x_mm, p.location(loc).y_mm), (x, y));
            }
        }
    }

    #[test]
    fn bundled_noise_follows_two_percent_rule() {
        for (name, _) in BUNDLED_PROFILES {
            let p = SkinProfile::bundled(name).unwrap();
            let mean0: f64 = Location::ALL
                .iter()
                .flat_map(|&l| p.curves(l).iter().map(|c| c.base + c.span))
                .sum::<f64>()
                / 12.0;
            let rel = (p.noise_sigma() - 0.02 * mean0).abs() / (0.02 * mean0);
            assert!(rel < 1e-3, "{name}: sigma {} vs {}", p.noise_sigma(), 0.02 * mean0);
        }
    }

    #[test]
    fn json_round_trip() {
        let p = ast1();
        assert_eq!(SkinProfile::from_json(&p.to_json()).unwrap(), p);
    }

    fn edit(f: impl FnOnce(&mut serde_json::Value)) -> Result<SkinProfile, SimError> {
        let mut v: serde_json::Value = serde_json::from_str(BUNDLED_PROFILES[0].1).unwrap();
        f(&mut v);
        SkinProfile::from_json(&v.to_string())
    }

    #[test]
    fn identical_locations_violate_separability() {
        let r = edit(|v| {
            let curves = v["curves"].as_array_mut().unwrap();
            let a: Vec<_> = curves.iter().filter(|c| c["location"] == "A").cloned().collect();
            for c in curves.iter_mut().filter(|c| c["location"] == "B") {
                let twin = a.iter().find(|x| x["freq_hz"] == c["freq_hz"]).unwrap();
                for key in ["base", "span", "tau_n"] {
                    c[key] = twin[key].clone();
                }
            }
        });
        assert!(matches!(r, Err(SimError::SeparabilityViolation(Location::A, Location::B))));
    }

    #[test]
    fn missing_curve_is_malformed() {
        let r = edit(|v| {
            v["curves"]
                .as_array_mut()
                .unwrap()
                .retain(|c| !(c["location"] == "B" && c["freq_hz"] == 700.0));
        });
        match r {
            Err(SimError::MalformedProfile(m)) => assert!(m.contains("(B, 700)"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r = edit(|v| {
            v["speaker"] = serde_json::json!("left");
        });
        assert!(matches!(r, Err(SimError::MalformedProfile(_))));
    }

    #[test]
    fn noiseless_zero_force_is_base_plus_span() {
        let p = ast1().with_noise_sigma(0.0).unwrap();
        let mut rng = SplitMix64::new(1);
        let f = response(&p, Location::B, 0.0, &mut rng).unwrap().to_array();
        for (a, c) in f.iter().zip(p.curves(Location::B)) {
            assert_eq!(*a, c.base + c.span);
        }
    }

    #[test]
    fn large_force_tends_to_base() {
        let c = ResponseCurve { base: 0.3, span: 0.2, tau_n: 5.0 };
        assert!((c.mean(1e4) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn ast1_a300_decreases_when_span_positive() {
        let p = ast1();
        let c = p.curves(Location::A)[0];
        let vals: Vec<f64> = [0.0, 15.0, 30.0].iter().map(|&f| c.base + c.span * (-f / c.tau_n).exp()).collect();
        let p0 = p.with_noise_sigma(0.0).unwrap();
        let mut rng = SplitMix64::new(0);
        for (f, v) in [0.0, 15.0, 30.0].iter().zip(&vals) {
            assert_eq!(response(&p0, Location::A, *f, &mut rng).unwrap().a300, *v);
        }
        if c.span > 0.0 {
            assert!(vals[0] > vals[1] && vals[1] > vals[2]);
        } else {
            assert!(vals[0] < vals[1] && vals[1] < vals[2]);
        }
    }

    #[test]
    fn force_out_of_range() {
        let mut rng = SplitMix64::new(0);
        assert!(matches!(response(&ast1(), Location::A, 30.5, &mut rng), Err(SimError::ForceOutOfRange { .. })));
        assert!(matches!(response(&ast1(), Location::A, -0.1, &mut rng), Err(SimError::ForceOutOfRange { .. })));
    }

    #[test]
    fn noiseless_response_is_strictly_monotone() {
        for (name, _) in BUNDLED_PROFILES {
            let p = SkinProfile::bundled(name).unwrap();
            for loc in Location::ALL {
                for c in p.curves(loc) {
                    let ys: Vec<f64> = (0..100).map(|i| c.mean(30.0 * f64::from(i) / 99.0)).collect();
                    for w in ys.windows(2) {
                        if c.span > 0.0 {
                            assert!(w[1] < w[0]);
                        } else if c.span < 0.0 {
                            assert!(w[1] > w[0]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dataset_shapes() {
        let p = ast1();
        let ds = generate_dataset(&p, 34, 50, 7).unwrap();
        assert_eq!(ds.len(), 5100);
        for (_, idx) in ds.indices_by_location() {
            assert_eq!(idx.len(), 1700);
        }
        let small = generate_dataset(&p, 2, 1, 7).unwrap();
        assert_eq!(small.forces(), vec![0.0, 30.0, 0.0, 30.0, 0.0, 30.0]);
        assert!(generate_dataset(&p, 1, 1, 7).is_err());
    }

    #[test]
    fn same_seed_same_bytes() {
        let p = ast1();
        let a = generate_dataset(&p, 5, 3, 11).unwrap().to_csv_string();
        let b = generate_dataset(&p, 5, 3, 11).unwrap().to_csv_string();
        let c = generate_dataset(&p, 5, 3, 12).unwrap().to_csv_string();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_datasets_ignore_seed() {
        let p = ast1().with_noise_sigma(0.0).unwrap();
        let a = generate_dataset(&p, 6, 4, 1).unwrap();
        let b = generate_dataset(&p, 6, 4, 999).unwrap();
        assert_eq!(a.records, b.records);
    }

    proptest! {
        #[test]
        fn row_count_formula(levels in 2usize..12, per in 1usize..8) {
            let ds = generate_dataset(&ast1(), levels, per, 3).unwrap();
            prop_assert_eq!(ds.len(), 3 * levels * per);
        }
    }
}
