//! Shipped device designs. Presets are read-only; each carries a version
//! and a content hash so that results can be traced to the exact numbers
//! used.

use sha2::{Digest, Sha256};

use crate::adiabatic::{calibrate_pump_model, AdiabaticError, PumpAnchor, PumpModel};
use crate::model::{
    g1_for_cooperativity, kappa_from_q, CavityMode, EmitterParams, KappaConvention, ModeLabel,
    ModelError, Polarization, SystemParams,
};
use crate::overlap::Chi2Material;
use crate::units::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub version: u32,
    pub description: &'static str,
    /// Emitter-coupled mode.
    pub mode_a: CavityMode,
    /// Output mode.
    pub mode_c: CavityMode,
    /// Free-space decay rate γ₀ of the emitter in a homogeneous medium (1/s).
    pub gamma0: f64,
    /// γ/γ₀ for an emitter in the cavity, per mode.
    pub gamma_ratio_a: f64,
    pub gamma_ratio_c: f64,
    /// C_in used to fix g₁ under the paper κ convention.
    pub c_in: f64,
    pub material: Chi2Material,
    /// Operating point that fixes the pump model.
    pub anchor: PumpAnchor,
    /// Focal spot radius of the pump (m).
    pub focal_radius: f64,
    /// Geometry and provenance notes that do not enter any computation.
    pub metadata: &'static [(&'static str, &'static str)],
}

impl Preset {
    pub fn gamma(&self) -> f64 {
        self.gamma_ratio_a * self.gamma0
    }

    /// g₁ realizing `c_in` with κ_a from the paper convention. It is a
    /// property of the emitter and the mode, so it stays fixed when the κ
    /// convention changes.
    pub fn g1(&self) -> f64 {
        g1_for_cooperativity(
            self.c_in,
            self.gamma(),
            kappa_from_q(&self.mode_a, KappaConvention::Paper),
        )
    }

    pub fn emitter(&self) -> EmitterParams {
        EmitterParams::new(self.g1(), self.gamma(), self.gamma_ratio_a)
            .expect("preset emitter is valid")
    }

    /// System at overcoupling `delta` with g₂ = 0.
    pub fn system(
        &self,
        convention: KappaConvention,
        delta: f64,
    ) -> Result<SystemParams, ModelError> {
        SystemParams::from_modes(
            self.emitter(),
            self.mode_a,
            self.mode_c,
            convention,
            delta,
            0.0,
        )
    }

    pub fn pump_model(&self, convention: KappaConvention) -> Result<PumpModel, AdiabaticError> {
        let p = self
            .system(convention, self.anchor.delta)
            .map_err(|e| AdiabaticError::InvalidInput(e.to_string()))?;
        calibrate_pump_model(self.anchor, p.c_in())
    }

    /// ω_b = ω_a − ω_c expressed as a wavelength.
    pub fn pump_wavelength(&self) -> f64 {
        1.0 / (1.0 / self.mode_a.wavelength - 1.0 / self.mode_c.wavelength)
    }

    /// Canonical text listing every number of the preset.
    pub fn describe(&self) -> String {
        let mode = |m: &CavityMode| {
            format!(
                "wavelength = {} m\nquality_factor = {}\nnormalized_mode_volume = {}\nrefractive_index = {}\npolarization = {:?}\n",
                fmt_f64(m.wavelength),
                fmt_f64(m.quality_factor),
                fmt_f64(m.normalized_mode_volume),
                fmt_f64(m.refractive_index),
                m.polarization
            )
        };
        let mut s = format!(
            "name = {}\nversion = {}\ndescription = {}\n",
            self.name, self.version, self.description
        );
        s += &format!("[mode_a]\n{}", mode(&self.mode_a));
        s += &format!("[mode_c]\n{}", mode(&self.mode_c));
        s += &format!(
            "[emitter]\ngamma0 = {} 1/s\ngamma_ratio_a = {}\ngamma_ratio_c = {}\nc_in = {}\n",
            fmt_f64(self.gamma0),
            fmt_f64(self.gamma_ratio_a),
            fmt_f64(self.gamma_ratio_c),
            fmt_f64(self.c_in)
        );
        s += &format!(
            "[material]\nname = {}\nchi_xyz = {} m/V\n",
            self.material.name,
            fmt_f64(self.material.chi_xyz())
        );
        s += &format!(
            "[pump]\nanchor_power = {} mW\nanchor_delta = {}\nanchor_efficiency = {}\nfocal_radius = {} m\nwavelength = {} m\n",
            fmt_f64(self.anchor.power_mw),
            fmt_f64(self.anchor.delta),
            fmt_f64(self.anchor.efficiency),
            fmt_f64(self.focal_radius),
            fmt_f64(self.pump_wavelength())
        );
        s += "[metadata]\n";
        for (k, v) in self.metadata {
            s += &format!("{k} = {v}\n");
        }
        s
    }

    /// SHA-256 of [`Preset::describe`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.describe().as_bytes()))
    }
}

/// InAs quantum dot at 950 nm converted to 1425 nm in a GaAs nanobeam.
pub fn gaas() -> Preset {
    Preset {
        name: "gaas",
        version: 1,
        description: "InAs/GaAs quantum dot at 950 nm (TM mode a) converted to 1425 nm (TE mode c) in a GaAs nanobeam",
        mode_a: CavityMode::new(ModeLabel::A, 950e-9, 7.3e4, 1.45, 3.54, Polarization::TM).expect("valid mode"),
        mode_c: CavityMode::new(ModeLabel::C, 1425e-9, 1.2e7, 0.77, 3.38, Polarization::TE).expect("valid mode"),
        gamma0: 1e9,
        gamma_ratio_a: 0.2,
        gamma_ratio_c: 0.1,
        c_in: 3.7e4,
        material: Chi2Material::gaas(),
        anchor: PumpAnchor { power_mw: 3.0, delta: 10.0, efficiency: 0.7 },
        focal_radius: 2.85e-6,
        metadata: &[
            ("width", "420 nm"),
            ("depth", "307.5 nm"),
            ("hole_spacing_mirror", "360 nm"),
            ("hole_spacing_center", "337 nm"),
            ("hole_semi_axes", "84 nm, 108 nm"),
            ("taper_periods", "4"),
            ("gamma0_source", "assumed 1/(1 ns) quantum-dot lifetime"),
            ("focal_radius_source", "diffraction-limited spot taken as one pump wavelength"),
        ],
    }
}

/// NV center at 637 nm converted to 950 nm in a scaled GaP nanobeam.
pub fn gap() -> Preset {
    let mode_a = CavityMode::new(ModeLabel::A, 637e-9, 7.3e4, 1.45, 3.31, Polarization::TM)
        .expect("valid mode");
    Preset {
        name: "gap",
        version: 1,
        description: "Diamond NV center at 637 nm (mode a) converted to 950 nm (mode c) in a GaP nanobeam scaled from the GaAs design",
        mode_a,
        mode_c: CavityMode::new(ModeLabel::C, 950e-9, 1.2e7, 0.77, 3.13, Polarization::TE).expect("valid mode"),
        gamma0: 8.3e7,
        gamma_ratio_a: 0.2,
        gamma_ratio_c: 0.1,
        c_in: crate::model::cooperativity_geometric(&mode_a, 0.2),
        material: Chi2Material::gap(),
        anchor: PumpAnchor { power_mw: 4.0, delta: 10.0, efficiency: 0.7 },
        focal_radius: 1.933e-6,
        metadata: &[
            ("design", "Q and V_n carried over from the GaAs design by scaling"),
            ("refractive_index_source", "approximate bulk GaP values"),
            ("c_in_source", "geometric estimate from Q, V_n and gamma/gamma0"),
            ("gamma0_source", "assumed 1/(12 ns) NV lifetime"),
            ("focal_radius_source", "diffraction-limited spot taken as one pump wavelength"),
        ],
    }
}

pub fn all() -> Vec<Preset> {
    vec![gaas(), gap()]
}

pub fn by_name(name: &str) -> Option<Preset> {
    all()
        .into_iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adiabatic::efficiency_closed_form;
    use crate::model::cooperativity_geometric;
    use approx::assert_relative_eq;

    #[test]
    fn gaas_rates() {
        let p = gaas();
        let sys = p.system(KappaConvention::Paper, 10.0).unwrap();
        assert_relative_eq!(sys.kappa_c_in, 5.51e7, max_relative = 2e-3);
        assert_relative_eq!(sys.kappa_a, 1.358e10, max_relative = 2e-3);
        assert_relative_eq!(
            sys.kappa_c(),
            2.0 * std::f64::consts::PI * 96.4e6,
            max_relative = 2e-3
        );
        assert_relative_eq!(sys.c_in(), 3.7e4, max_relative = 1e-12);
        assert_relative_eq!(p.pump_wavelength(), 2.85e-6, max_relative = 1e-12);
    }

    #[test]
    fn energy_convention_doubles_rates_and_keeps_g1() {
        let p = gaas();
        let a = p.system(KappaConvention::Paper, 10.0).unwrap();
        let b = p.system(KappaConvention::Energy, 10.0).unwrap();
        assert_eq!(b.kappa_a, 2.0 * a.kappa_a);
        assert_eq!(b.kappa_c_in, 2.0 * a.kappa_c_in);
        assert_eq!(b.kappa_c_ex, 2.0 * a.kappa_c_ex);
        assert_eq!(a.emitter.g1, b.emitter.g1);
    }

    #[test]
    fn geometric_cooperativities() {
        let p = gaas();
        assert_relative_eq!(
            cooperativity_geometric(&p.mode_c, p.gamma_ratio_c),
            2.4e7,
            max_relative = 0.02
        );
        assert_relative_eq!(
            cooperativity_geometric(&p.mode_a, p.gamma_ratio_a),
            3.7e4,
            max_relative = 0.04
        );
    }

    #[test]
    fn calibrated_models_hit_their_anchor() {
        for preset in all() {
            let model = preset.pump_model(KappaConvention::Paper).unwrap();
            let sys = preset
                .system(KappaConvention::Paper, preset.anchor.delta)
                .unwrap();
            let f = model.efficiency_at(sys.c_in(), preset.anchor.power_mw, preset.anchor.delta);
            assert!((f - preset.anchor.efficiency).abs() < 1e-10);
        }
    }

    #[test]
    fn gap_internal_conversion() {
        let p = gap();
        let sys = p.system(KappaConvention::Paper, 10.0).unwrap();
        let c = sys.c_in();
        let internal = efficiency_closed_form(c, (1.0 + c).sqrt(), 1.0);
        assert!((internal - 0.99).abs() < 0.005, "{internal}");
    }

    #[test]
    fn hashes_are_stable_and_distinct() {
        assert_eq!(gaas().hash(), gaas().hash());
        assert_ne!(gaas().hash(), gap().hash());
        assert_eq!(gaas().hash().len(), 64);
        assert!(by_name("GaAs").is_some());
        assert!(by_name("si").is_none());
    }
}
