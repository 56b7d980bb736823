//! Pipeline configuration, stored as a flat TOML file.

use serde::{Deserialize, Serialize};

use crate::curve_trace::TraceParams;
use crate::ellipse_fit::{PsiUnit, QualityParams};
use crate::error::{Error, Result};
use crate::image_prep::CleanupParams;
use crate::pairing::PairingParams;

/// Every tunable of the pipeline. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Radius of the inner search disc for point pairs, pixels.
    pub r1: f64,
    /// Outer radius of the search ring, pixels.
    pub r2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub v_threshold: f64,
    pub mu: f64,
    pub nu: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub q_threshold: f64,
    /// Half-width of the valley-tracing search sector, degrees.
    pub sector_deg: f64,
    pub contour_sigma: f64,
    pub hessian_sigma: f64,
    /// Curvature below `-kappa_min` counts as concave, 1/pixels.
    pub kappa_min: f64,
    pub walk_energy_threshold: f64,
    pub sharp_angle_min: f64,
    pub lambda1_rel_tol: f64,
    pub iou_min: f64,
    pub min_area: usize,
    pub max_hole: usize,
    /// Also apply the score threshold to pairs inside the inner disc.
    pub inner_requires_v: bool,
    pub psi_unit: PsiUnit,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let pairing = PairingParams::default();
        let quality = QualityParams::default();
        let trace = TraceParams::default();
        let cleanup = CleanupParams::default();
        Self {
            r1: pairing.r1,
            r2: pairing.r2,
            alpha: pairing.alpha,
            beta: pairing.beta,
            v_threshold: pairing.v_threshold,
            mu: quality.mu,
            nu: quality.nu,
            gamma1: quality.gamma1,
            gamma2: quality.gamma2,
            q_threshold: quality.q_threshold,
            sector_deg: trace.sector_deg,
            contour_sigma: 3.0,
            hessian_sigma: 2.0,
            kappa_min: 0.03,
            walk_energy_threshold: pairing.walk_energy_threshold,
            sharp_angle_min: quality.sharp_angle_min,
            lambda1_rel_tol: trace.lambda1_rel_tol,
            iou_min: 0.5,
            min_area: cleanup.min_area,
            max_hole: cleanup.max_hole,
            inner_requires_v: pairing.inner_requires_v,
            psi_unit: quality.psi_unit,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are plain values")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.r1 > 0.0 && self.r1 < self.r2) {
            return fail("r1 must be positive and below r2");
        }
        let weights = [
            self.alpha,
            self.beta,
            self.v_threshold,
            self.mu,
            self.nu,
            self.gamma1,
            self.gamma2,
            self.q_threshold,
            self.kappa_min,
            self.walk_energy_threshold,
            self.sharp_angle_min,
            self.lambda1_rel_tol,
        ];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return fail("weights and thresholds must be finite and non-negative");
        }
        if !(self.sector_deg > 0.0 && self.sector_deg <= 90.0) {
            return fail("sector_deg must lie in (0, 90]");
        }
        if !(self.contour_sigma >= 0.0 && self.hessian_sigma > 0.0) {
            return fail("smoothing widths must be positive");
        }
        if !(0.0..=1.0).contains(&self.iou_min) {
            return fail("iou_min must lie in [0, 1]");
        }
        self.pairing().validate()
    }

    pub fn pairing(&self) -> PairingParams {
        PairingParams {
            r1: self.r1,
            r2: self.r2,
            alpha: self.alpha,
            beta: self.beta,
            v_threshold: self.v_threshold,
            walk_energy_threshold: self.walk_energy_threshold,
            inner_requires_v: self.inner_requires_v,
        }
    }

    pub fn quality(&self) -> QualityParams {
        QualityParams {
            mu: self.mu,
            nu: self.nu,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            q_threshold: self.q_threshold,
            sharp_angle_min: self.sharp_angle_min,
            psi_unit: self.psi_unit,
        }
    }

    pub fn trace(&self) -> TraceParams {
        TraceParams { sector_deg: self.sector_deg, lambda1_rel_tol: self.lambda1_rel_tol }
    }

    pub fn cleanup(&self) -> CleanupParams {
        CleanupParams { min_area: self.min_area, max_hole: self.max_hole }
    }
}
