//! CMOD5.N geophysical model function, roughness normalization and inversion.

mod cmod5n;
mod invert;

pub use cmod5n::{
    cmod5n_sigma0, coefficients, neutral_reference, ssr, Coefficients, GmfInputs, Harmonics,
    IncidenceTerms, SIGMA0_FLOOR,
};
pub use invert::{
    coarse_inputs, golden_section, invert_coarse, invert_scene, invert_wind, CoarseInputs,
    Inversion, InversionConfig, InversionStatus, GMF_BLOCK,
};
