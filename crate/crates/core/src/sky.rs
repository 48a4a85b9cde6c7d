//! Equatorial geometry, photometric conversions and the domestic object model.
//!
//! All angles are carried in degrees. Arcseconds appear only where the
//! catalog domain speaks them: astrometric errors and angular extents.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ARCSEC_PER_DEG: f64 = 3600.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkyError {
    #[error("coordinate is not finite: {0}")]
    NonFinite(f64),
    #[error("dec out of range: {0}")]
    DecOutOfRange(f64),
    #[error("non-positive flux {flux} (zero point {flux_zero})")]
    NonPositiveFlux { flux: f64, flux_zero: f64 },
    #[error("missing band: {0}")]
    MissingBand(String),
    #[error("unknown object class: {0}")]
    UnknownClass(String),
}

/// Reduce a right ascension to `[0, 360)`.
pub fn normalize_ra(ra_raw: f64) -> Result<f64, SkyError> {
    if !ra_raw.is_finite() {
        return Err(SkyError::NonFinite(ra_raw));
    }
    let ra = ra_raw.rem_euclid(360.0);
    // rem_euclid rounds tiny negative inputs up to exactly 360.
    Ok(if ra >= 360.0 { 0.0 } else { ra })
}

/// A direction on the celestial sphere, optionally tagged with an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPosition")]
pub struct EquatorialPosition {
    ra_deg: f64,
    dec_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    epoch_mjd: Option<f64>,
}

#[derive(Deserialize)]
struct RawPosition {
    ra_deg: f64,
    dec_deg: f64,
    #[serde(default)]
    epoch_mjd: Option<f64>,
}

impl TryFrom<RawPosition> for EquatorialPosition {
    type Error = SkyError;

    fn try_from(raw: RawPosition) -> Result<Self, Self::Error> {
        Self::with_epoch(raw.ra_deg, raw.dec_deg, raw.epoch_mjd)
    }
}

impl EquatorialPosition {
    pub fn new(ra_deg: f64, dec_deg: f64) -> Result<Self, SkyError> {
        Self::with_epoch(ra_deg, dec_deg, None)
    }

    pub fn with_epoch(ra_deg: f64, dec_deg: f64, epoch_mjd: Option<f64>) -> Result<Self, SkyError> {
        let ra_deg = normalize_ra(ra_deg)?;
        if !dec_deg.is_finite() {
            return Err(SkyError::NonFinite(dec_deg));
        }
        if !(-90.0..=90.0).contains(&dec_deg) {
            return Err(SkyError::DecOutOfRange(dec_deg));
        }
        if let Some(epoch) = epoch_mjd {
            if !epoch.is_finite() {
                return Err(SkyError::NonFinite(epoch));
            }
        }
        Ok(Self {
            ra_deg,
            dec_deg,
            epoch_mjd,
        })
    }

    pub fn ra_deg(&self) -> f64 {
        self.ra_deg
    }

    pub fn dec_deg(&self) -> f64 {
        self.dec_deg
    }

    pub fn epoch_mjd(&self) -> Option<f64> {
        self.epoch_mjd
    }

    pub fn to_unit_vector(&self) -> [f64; 3] {
        to_unit_vector(self)
    }

    /// The position reached by travelling `sep_deg` along position angle
    /// `pa_deg` (measured from north through east).
    pub fn offset(&self, sep_deg: f64, pa_deg: f64) -> EquatorialPosition {
        let (ra, dec) = (self.ra_deg.to_radians(), self.dec_deg.to_radians());
        let (rho, theta) = (sep_deg.to_radians(), pa_deg.to_radians());
        let sin_dec2 = dec.sin() * rho.cos() + dec.cos() * rho.sin() * theta.cos();
        let dec2 = sin_dec2.clamp(-1.0, 1.0).asin();
        let dra = (theta.sin() * rho.sin() * dec.cos()).atan2(rho.cos() - dec.sin() * sin_dec2);
        let dec_deg = dec2.to_degrees().clamp(-90.0, 90.0);
        let ra_deg = normalize_ra((ra + dra).to_degrees()).unwrap_or(0.0);
        EquatorialPosition {
            ra_deg,
            dec_deg,
            epoch_mjd: self.epoch_mjd,
        }
    }
}

pub fn to_unit_vector(p: &EquatorialPosition) -> [f64; 3] {
    let (ra, dec) = (p.ra_deg.to_radians(), p.dec_deg.to_radians());
    let (sin_dec, cos_dec) = dec.sin_cos();
    let (sin_ra, cos_ra) = ra.sin_cos();
    [cos_dec * cos_ra, cos_dec * sin_ra, sin_dec]
}

/// Great-circle angle between two unit vectors, in degrees.
///
/// `atan2(|a x b|, a . b)` keeps full precision both for coincident and for
/// antipodal directions, unlike `acos` of the dot product.
pub fn separation_of_vectors(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let cx = a[1] * b[2] - a[2] * b[1];
    let cy = a[2] * b[0] - a[0] * b[2];
    let cz = a[0] * b[1] - a[1] * b[0];
    let cross = (cx * cx + cy * cy + cz * cz).sqrt();
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    cross.atan2(dot).to_degrees()
}

/// Angular separation in degrees, in `[0, 180]`.
pub fn angular_separation(a: &EquatorialPosition, b: &EquatorialPosition) -> f64 {
    separation_of_vectors(&a.to_unit_vector(), &b.to_unit_vector())
}

/// Pogson magnitude relative to a per-band zero point.
pub fn flux_to_magnitude(flux: f64, flux_zero: f64) -> Result<f64, SkyError> {
    if !(flux > 0.0 && flux.is_finite() && flux_zero > 0.0 && flux_zero.is_finite()) {
        return Err(SkyError::NonPositiveFlux { flux, flux_zero });
    }
    Ok(-2.5 * (flux / flux_zero).log10())
}

/// Color index `m_a - m_b`, failing with the name of the first absent band.
pub fn color_index(
    mags: &BTreeMap<String, f64>,
    band_a: &str,
    band_b: &str,
) -> Result<f64, SkyError> {
    let m_a = mags
        .get(band_a)
        .ok_or_else(|| SkyError::MissingBand(band_a.to_owned()))?;
    let m_b = mags
        .get(band_b)
        .ok_or_else(|| SkyError::MissingBand(band_b.to_owned()))?;
    Ok(m_a - m_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ObjectClass {
    Star,
    Galaxy,
    Qso,
    Unknown,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 4] = [
        ObjectClass::Star,
        ObjectClass::Galaxy,
        ObjectClass::Qso,
        ObjectClass::Unknown,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectClass::Star => "STAR",
            ObjectClass::Galaxy => "GALAXY",
            ObjectClass::Qso => "QSO",
            ObjectClass::Unknown => "UNKNOWN",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = SkyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "STAR" => Ok(ObjectClass::Star),
            "GALAXY" => Ok(ObjectClass::Galaxy),
            "QSO" => Ok(ObjectClass::Qso),
            "UNKNOWN" => Ok(ObjectClass::Unknown),
            _ => Err(SkyError::UnknownClass(s.to_owned())),
        }
    }
}

/// One catalog row in the domestic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkyObject {
    pub object_id: u64,
    pub pos: EquatorialPosition,
    pub sigma_pos_arcsec: f64,
    #[serde(default)]
    pub mags: BTreeMap<String, f64>,
    pub class: ObjectClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent_arcsec: Option<f64>,
}

impl SkyObject {
    /// A bare object with no photometry, classed `UNKNOWN`.
    pub fn point(object_id: u64, pos: EquatorialPosition, sigma_pos_arcsec: f64) -> Self {
        Self {
            object_id,
            pos,
            sigma_pos_arcsec,
            mags: BTreeMap::new(),
            class: ObjectClass::Unknown,
            extent_arcsec: None,
        }
    }

    pub fn color(&self, band_a: &str, band_b: &str) -> Result<f64, SkyError> {
        color_index(&self.mags, band_a, band_b)
    }
}
