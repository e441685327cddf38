//! Static/motion fusion schemas.
//!
//! Three ways to merge a static vector S and a motion vector M into one fused
//! vector C:
//!
//! * Cholesky: C = rho1*M + sqrt(1 - rho1^2)*S, where rho1 encodes the chosen
//!   motion contribution and equals the correlation between C and M for
//!   uncorrelated unit-variance inputs. Contribution m:s percent maps to
//!   rho1 = m / sqrt(m^2 + s^2).
//! * Variance ratio: the vectors are read as histograms over bin indices and
//!   weighted by the opposite spread, w_motion = sigma_s/(sigma_s+sigma_m);
//!   flatter (higher variance) components contribute less.
//! * PCA: the D index-aligned pairs (s_i, m_i) are projected onto the first
//!   principal component of their 2x2 covariance, with the explained-variance
//!   share reported as a diagnostic.

use crate::error::{Error, Result};
use crate::feature::FeatureVec;

/// Requested percentage contribution of each domain; must total 100.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContributionRatio {
    pub motion_pct: f64,
    pub static_pct: f64,
}

impl ContributionRatio {
    pub fn new(motion_pct: f64, static_pct: f64) -> Result<Self> {
        let ok = (0.0..=100.0).contains(&motion_pct)
            && (0.0..=100.0).contains(&static_pct)
            && (motion_pct + static_pct - 100.0).abs() < 1e-9;
        if !ok {
            return Err(Error::Config(format!(
                "contribution ratio must be nonnegative and total 100, got {motion_pct}:{static_pct} (motion:static)"
            )));
        }
        Ok(Self {
            motion_pct,
            static_pct,
        })
    }

    /// Parses the CLI order `static:motion` (the order results tables use),
    /// e.g. `80:20` means 80% static, 20% motion.
    pub fn from_static_motion_str(s: &str) -> Result<Self> {
        let (st, mo) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("ratio must look like `80:20`, got `{s}`")))?;
        let static_pct: f64 = st
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad static percent `{st}`")))?;
        let motion_pct: f64 = mo
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad motion percent `{mo}`")))?;
        Self::new(motion_pct, static_pct)
    }

    /// `static:motion` label, mirroring the CLI input order.
    pub fn static_motion_label(&self) -> String {
        format!("{}:{}", self.static_pct, self.motion_pct)
    }

    /// `motion:static` label for reports that print both orders.
    pub fn motion_static_label(&self) -> String {
        format!("{}:{}", self.motion_pct, self.static_pct)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMethod {
    Cholesky,
    Variance,
    Pca,
}

impl std::str::FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(Self::Cholesky),
            "variance" => Ok(Self::Variance),
            "pca" => Ok(Self::Pca),
            other => Err(Error::Config(format!(
                "fusion method must be cholesky|variance|pca, got `{other}`"
            ))),
        }
    }
}

/// Linear combination weights for a fused vector.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FusionWeights {
    pub w_motion: f64,
    pub w_static: f64,
    pub method: FusionMethod,
}

/// Cholesky weights for a contribution ratio: rho1 = m/sqrt(m^2+s^2) and
/// w_static = sqrt(1 - rho1^2) = s/sqrt(m^2+s^2).
pub fn rho_from_ratio(ratio: ContributionRatio) -> FusionWeights {
    let m = ratio.motion_pct;
    let s = ratio.static_pct;
    let norm = (m * m + s * s).sqrt();
    FusionWeights {
        w_motion: m / norm,
        w_static: s / norm,
        method: FusionMethod::Cholesky,
    }
}

/// C = rho1*M + sqrt(1-rho1^2)*S, elementwise.
pub fn fuse_cholesky(
    s: &FeatureVec,
    m: &FeatureVec,
    weights: &FusionWeights,
) -> Result<FeatureVec> {
    if s.dim() != m.dim() {
        return Err(Error::Shape(format!(
            "fusion inputs of dim {} and {}",
            s.dim(),
            m.dim()
        )));
    }
    debug_assert!(
        (weights.w_motion * weights.w_motion + weights.w_static * weights.w_static - 1.0).abs()
            < 1e-12,
        "cholesky weights must lie on the unit circle"
    );
    let fused = s
        .iter()
        .zip(m.iter())
        .map(|(sv, mv)| weights.w_motion * mv + weights.w_static * sv)
        .collect();
    FeatureVec::new(fused)
}

/// Mean and standard deviation of a vector read as a histogram over its bin
/// indices 0..D-1 (after L1 normalization).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HistogramMoments {
    pub mu: f64,
    pub sigma: f64,
}

pub fn histogram_moments(v: &FeatureVec) -> Result<HistogramMoments> {
    if let Some(i) = v.iter().position(|&x| x < 0.0) {
        return Err(Error::NotAHistogram(format!("negative mass at bin {i}")));
    }
    let total = v.sum();
    if total <= 0.0 {
        return Err(Error::NotAHistogram("zero total mass".into()));
    }
    let mu: f64 = v
        .iter()
        .enumerate()
        .map(|(i, &p)| i as f64 * p / total)
        .sum();
    let var: f64 = v
        .iter()
        .enumerate()
        .map(|(i, &p)| (i as f64 - mu).powi(2) * p / total)
        .sum();
    Ok(HistogramMoments {
        mu,
        sigma: var.max(0.0).sqrt(),
    })
}

/// Variance-ratio fusion output. `degenerate` marks the both-deltas fallback
/// (both sigmas zero), where the weights default to one half each.
#[derive(Debug, Clone)]
pub struct VarianceFusion {
    pub fused: FeatureVec,
    pub weights: FusionWeights,
    pub static_moments: HistogramMoments,
    pub motion_moments: HistogramMoments,
    pub degenerate: bool,
}

/// Weights each domain by the other's spread: w_motion = sigma_s/(sigma_s +
/// sigma_m). The weights expose the dataset's mathematically derived optimum
/// contribution ratio.
pub fn fuse_variance(s: &FeatureVec, m: &FeatureVec) -> Result<VarianceFusion> {
    if s.dim() != m.dim() {
        return Err(Error::Shape(format!(
            "fusion inputs of dim {} and {}",
            s.dim(),
            m.dim()
        )));
    }
    let sm = histogram_moments(s)?;
    let mm = histogram_moments(m)?;
    let denom = sm.sigma + mm.sigma;
    let (w_motion, w_static, degenerate) = if denom == 0.0 {
        (0.5, 0.5, true)
    } else {
        (sm.sigma / denom, mm.sigma / denom, false)
    };
    let fused = s
        .iter()
        .zip(m.iter())
        .map(|(sv, mv)| w_motion * mv + w_static * sv)
        .collect();
    Ok(VarianceFusion {
        fused: FeatureVec::new(fused)?,
        weights: FusionWeights {
            w_motion,
            w_static,
            method: FusionMethod::Variance,
        },
        static_moments: sm,
        motion_moments: mm,
        degenerate,
    })
}

/// PCA fusion output. `degenerate` marks a zero covariance matrix, where the
/// static vector is returned unchanged with share 1.
#[derive(Debug, Clone)]
pub struct PcaFusion {
    pub fused: FeatureVec,
    pub explained_share: f64,
    pub degenerate: bool,
}

/// Sample covariance of the index-aligned pairs: returns
/// (var_s, cov_sm, var_m, mean_s, mean_m).
pub fn pair_covariance(s: &FeatureVec, m: &FeatureVec) -> (f64, f64, f64, f64, f64) {
    let d = s.dim() as f64;
    let mean_s = s.sum() / d;
    let mean_m = m.sum() / d;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (sv, mv) in s.iter().zip(m.iter()) {
        let ds = sv - mean_s;
        let dm = mv - mean_m;
        a += ds * ds;
        b += ds * dm;
        c += dm * dm;
    }
    let norm = (d - 1.0).max(1.0);
    (a / norm, b / norm, c / norm, mean_s, mean_m)
}

/// Closed-form eigendecomposition of the symmetric matrix [[a, b], [b, c]].
/// Returns ((lambda1, v1), (lambda2, v2)) with lambda1 >= lambda2 and unit
/// eigenvectors.
pub fn eigen_2x2(a: f64, b: f64, c: f64) -> ((f64, [f64; 2]), (f64, [f64; 2])) {
    let half_tr = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    let v1 = eigvec(a, b, c, l1);
    let v2 = [-v1[1], v1[0]]; // orthogonal complement in 2-D
    ((l1, v1), (l2, v2))
}

fn eigvec(a: f64, b: f64, c: f64, lambda: f64) -> [f64; 2] {
    // (A - lambda I) v = 0; pick the better-conditioned row.
    let r1 = [a - lambda, b];
    let r2 = [b, c - lambda];
    let n1 = r1[0] * r1[0] + r1[1] * r1[1];
    let n2 = r2[0] * r2[0] + r2[1] * r2[1];
    let v = if n1 >= n2 {
        [r1[1], -r1[0]]
    } else {
        [r2[1], -r2[0]]
    };
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if norm == 0.0 {
        // lambda is a double eigenvalue of a multiple of the identity.
        return [1.0, 0.0];
    }
    [v[0] / norm, v[1] / norm]
}

/// Projects each centered pair (s_i, m_i) onto the unit first eigenvector of
/// their 2x2 covariance, sign-fixed so the static loading is nonnegative.
pub fn fuse_pca(s: &FeatureVec, m: &FeatureVec) -> Result<PcaFusion> {
    if s.dim() != m.dim() {
        return Err(Error::Shape(format!(
            "fusion inputs of dim {} and {}",
            s.dim(),
            m.dim()
        )));
    }
    assert!(s.dim() >= 2, "PCA fusion needs dimension >= 2");
    let (a, b, c, mean_s, mean_m) = pair_covariance(s, m);
    if a == 0.0 && b == 0.0 && c == 0.0 {
        return Ok(PcaFusion {
            fused: s.clone(),
            explained_share: 1.0,
            degenerate: true,
        });
    }
    let ((l1, mut v1), (l2, _)) = eigen_2x2(a, b, c);
    if v1[0] < 0.0 || (v1[0] == 0.0 && v1[1] < 0.0) {
        v1 = [-v1[0], -v1[1]];
    }
    let fused: Vec<f64> = s
        .iter()
        .zip(m.iter())
        .map(|(sv, mv)| v1[0] * (sv - mean_s) + v1[1] * (mv - mean_m))
        .collect();
    let l1c = l1.max(0.0);
    let l2c = l2.max(0.0);
    Ok(PcaFusion {
        fused: FeatureVec::new(fused)?,
        explained_share: l1c / (l1c + l2c),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(v: Vec<f64>) -> FeatureVec {
        FeatureVec::new(v).unwrap()
    }

    #[test]
    fn ratio_table_rho_values_exact() {
        // (motion, static) -> rho1, checked to 1e-12.
        let cases = [
            (80.0, 20.0, 4.0 / 17f64.sqrt()),
            (60.0, 40.0, 3.0 / 13f64.sqrt()),
            (50.0, 50.0, 1.0 / 2f64.sqrt()),
            (40.0, 60.0, 2.0 / 13f64.sqrt()),
            (20.0, 80.0, 1.0 / 17f64.sqrt()),
        ];
        for (m, s, rho) in cases {
            let w = rho_from_ratio(ContributionRatio::new(m, s).unwrap());
            assert!((w.w_motion - rho).abs() < 1e-12, "{m}:{s} -> {}", w.w_motion);
            assert!(
                (w.w_static - (1.0 - rho * rho).sqrt()).abs() < 1e-12,
                "{m}:{s} static weight"
            );
            assert!((w.w_motion.powi(2) + w.w_static.powi(2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn limiting_ratios() {
        let w = rho_from_ratio(ContributionRatio::new(0.0, 100.0).unwrap());
        assert_eq!((w.w_motion, w.w_static), (0.0, 1.0));
        let w = rho_from_ratio(ContributionRatio::new(100.0, 0.0).unwrap());
        assert_eq!((w.w_motion, w.w_static), (1.0, 0.0));
    }

    #[test]
    fn ratio_parsing_is_static_first() {
        let r = ContributionRatio::from_static_motion_str("80:20").unwrap();
        assert_eq!(r.static_pct, 80.0);
        assert_eq!(r.motion_pct, 20.0);
        assert!(ContributionRatio::from_static_motion_str("80:30").is_err());
        assert!(ContributionRatio::from_static_motion_str("120:-20").is_err());
    }

    #[test]
    fn cholesky_endpoints_and_arithmetic() {
        let s = fv(vec![1.0, 0.0]);
        let m = fv(vec![0.0, 1.0]);
        let w = |wm: f64| FusionWeights {
            w_motion: wm,
            w_static: (1.0 - wm * wm).sqrt(),
            method: FusionMethod::Cholesky,
        };
        assert_eq!(fuse_cholesky(&s, &m, &w(1.0)).unwrap(), m);
        assert_eq!(fuse_cholesky(&s, &m, &w(0.0)).unwrap(), s);
        // rho1 = 0.6: C = 0.6*M + 0.8*S = (0.8, 0.6).
        let c = fuse_cholesky(&s, &m, &w(0.6)).unwrap();
        assert!((c[0] - 0.8).abs() < 1e-15);
        assert!((c[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn cholesky_dimension_mismatch() {
        let w = rho_from_ratio(ContributionRatio::new(50.0, 50.0).unwrap());
        assert!(fuse_cholesky(&fv(vec![1.0]), &fv(vec![1.0, 2.0]), &w).is_err());
    }

    proptest! {
        #[test]
        fn cholesky_is_linear_in_each_argument(
            s in proptest::collection::vec(-5.0f64..5.0, 4),
            m in proptest::collection::vec(-5.0f64..5.0, 4),
            alpha in -3.0f64..3.0,
            rho in 0.0f64..1.0,
        ) {
            let w = FusionWeights {
                w_motion: rho,
                w_static: (1.0 - rho * rho).sqrt(),
                method: FusionMethod::Cholesky,
            };
            let sv = fv(s.clone());
            let mv = fv(m.clone());
            let scaled_s = fv(s.iter().map(|x| alpha * x).collect());
            let base = fuse_cholesky(&sv, &mv, &w).unwrap();
            let scaled = fuse_cholesky(&scaled_s, &fv(vec![0.0; 4]), &w).unwrap();
            let zero_m = fuse_cholesky(&sv, &fv(vec![0.0; 4]), &w).unwrap();
            for i in 0..4 {
                prop_assert!((scaled[i] - alpha * zero_m[i]).abs() < 1e-9);
            }
            // Additivity: C(s, m) = C(s, 0) + C(0, m).
            let m_only = fuse_cholesky(&fv(vec![0.0; 4]), &mv, &w).unwrap();
            for i in 0..4 {
                prop_assert!((base[i] - (zero_m[i] + m_only[i])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn moment_closed_forms() {
        let mut delta = vec![0.0; 16];
        delta[7] = 3.0; // scale must not matter
        let m = histogram_moments(&fv(delta)).unwrap();
        assert_eq!((m.mu, m.sigma), (7.0, 0.0));

        for d in [4usize, 10, 100] {
            let m = histogram_moments(&fv(vec![1.0; d])).unwrap();
            assert!((m.mu - (d as f64 - 1.0) / 2.0).abs() < 1e-12);
            let var = (d as f64 * d as f64 - 1.0) / 12.0;
            assert!((m.sigma - var.sqrt()).abs() < 1e-9, "uniform over {d}");
        }

        let mut two = vec![0.0; 11];
        two[0] = 0.5;
        two[10] = 0.5;
        let m = histogram_moments(&fv(two)).unwrap();
        assert!((m.mu - 5.0).abs() < 1e-12);
        assert!((m.sigma - 5.0).abs() < 1e-12);
    }

    #[test]
    fn non_histograms_are_rejected() {
        assert!(matches!(
            histogram_moments(&fv(vec![0.0; 8])),
            Err(Error::NotAHistogram(_))
        ));
        assert!(matches!(
            histogram_moments(&fv(vec![0.5, -0.1, 0.6])),
            Err(Error::NotAHistogram(_))
        ));
    }

    #[test]
    fn equal_spreads_average_the_vectors() {
        // Both histograms have sigma 5 (mass split across bins 10 apart).
        let mut s = vec![0.0; 16];
        s[0] = 0.5;
        s[10] = 0.5;
        let mut m = vec![0.0; 16];
        m[2] = 0.5;
        m[12] = 0.5;
        let out = fuse_variance(&fv(s.clone()), &fv(m.clone())).unwrap();
        assert!((out.weights.w_motion - 0.5).abs() < 1e-12);
        for i in 0..16 {
            assert!((out.fused[i] - 0.5 * (s[i] + m[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn peaked_static_zeroes_motion_weight() {
        let mut s = vec![0.0; 8];
        s[3] = 1.0; // sigma_s = 0
        let m = vec![0.125; 8];
        let out = fuse_variance(&fv(s.clone()), &fv(m)).unwrap();
        assert_eq!(out.weights.w_motion, 0.0);
        assert_eq!(out.weights.w_static, 1.0);
        assert_eq!(out.fused.as_slice(), s.as_slice());
        assert!(!out.degenerate);
    }

    #[test]
    fn double_delta_falls_back_flagged() {
        let mut s = vec![0.0; 8];
        s[3] = 1.0;
        let mut m = vec![0.0; 8];
        m[5] = 1.0;
        let out = fuse_variance(&fv(s), &fv(m)).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.weights.w_motion, 0.5);
        assert_eq!(out.weights.w_static, 0.5);
    }

    proptest! {
        #[test]
        fn variance_weights_form_a_convex_pair(
            s in proptest::collection::vec(0.0f64..1.0, 12),
            m in proptest::collection::vec(0.0f64..1.0, 12),
        ) {
            prop_assume!(s.iter().sum::<f64>() > 0.0 && m.iter().sum::<f64>() > 0.0);
            let out = fuse_variance(&fv(s), &fv(m)).unwrap();
            let (wm, ws) = (out.weights.w_motion, out.weights.w_static);
            prop_assert!((0.0..=1.0).contains(&wm));
            prop_assert!((0.0..=1.0).contains(&ws));
            prop_assert!((wm + ws - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_inputs_have_unit_share() {
        let s: Vec<f64> = (0..32).map(|i| i as f64 * 0.3 - 2.0).collect();
        let m: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        let out = fuse_pca(&fv(s), &fv(m)).unwrap();
        assert!((out.explained_share - 1.0).abs() < 1e-12);
        assert!(!out.degenerate);
    }

    #[test]
    fn zero_covariance_is_degenerate() {
        let s = fv(vec![0.25; 8]);
        let m = fv(vec![0.5; 8]);
        let out = fuse_pca(&s, &m).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.explained_share, 1.0);
        assert_eq!(out.fused, s);
    }

    #[test]
    fn eigenpairs_satisfy_characteristic_equation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let a: f64 = rng.gen_range(0.0..4.0);
            let c: f64 = rng.gen_range(0.0..4.0);
            let bound = (a * c).sqrt();
            let b = rng.gen_range(-bound..=bound.max(f64::MIN_POSITIVE));
            let ((l1, v1), (l2, v2)) = eigen_2x2(a, b, c);
            // Quadratic-formula oracle for the characteristic polynomial.
            let disc = ((a + c) * (a + c) - 4.0 * (a * c - b * b)).max(0.0).sqrt();
            let o1 = 0.5 * ((a + c) + disc);
            let o2 = 0.5 * ((a + c) - disc);
            assert!((l1 - o1).abs() < 1e-12, "lambda1 {l1} vs oracle {o1}");
            assert!((l2 - o2).abs() < 1e-12, "lambda2 {l2} vs oracle {o2}");
            assert!(l1 >= l2);
            // Residual check: (A - lambda I) v ~ 0 and unit norm.
            for (l, v) in [(l1, v1), (l2, v2)] {
                let r0 = (a - l) * v[0] + b * v[1];
                let r1 = b * v[0] + (c - l) * v[1];
                assert!(r0.abs() < 1e-9 && r1.abs() < 1e-9, "residual {r0} {r1}");
                assert!((v[0] * v[0] + v[1] * v[1] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn independent_noise_share_is_near_half() {
        use rand::{Rng, SeedableRng};
        let mut shares = Vec::new();
        for trial in 0..10 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + trial);
            let s: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
            shares.push(fuse_pca(&fv(s), &fv(m)).unwrap().explained_share);
        }
        let mean = shares.iter().sum::<f64>() / shares.len() as f64;
        assert!((mean - 0.5).abs() < 0.1, "mean share {mean}");
    }

    proptest! {
        #[test]
        fn share_lies_in_upper_half(
            s in proptest::collection::vec(-2.0f64..2.0, 16),
            m in proptest::collection::vec(-2.0f64..2.0, 16),
        ) {
            let out = fuse_pca(&fv(s), &fv(m)).unwrap();
            prop_assert!((0.5..=1.0 + 1e-12).contains(&out.explained_share));
            prop_assert_eq!(out.fused.dim(), 16);
        }
    }
}
