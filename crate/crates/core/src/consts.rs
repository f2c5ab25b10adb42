//! Physical constants (CODATA 2018 exact / recommended values).

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Standard gravity magnitude used by the simulator world frame, m/s².
pub const GRAVITY: f64 = 9.81;

/// Reference body temperature for molecular-absorption noise, K.
pub const BODY_TEMPERATURE: f64 = 310.0;

/// Linear power ratio to decibels.
#[inline]
pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Decibels to linear power ratio.
#[inline]
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
