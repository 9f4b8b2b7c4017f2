//! Local tangent-plane georeferencing of scene pixels.
//!
//! Pixel `(0, 0)` is centered on the scene origin. Rows advance along the
//! platform heading, columns advance to the right of it (the range direction
//! of a right-looking radar).

const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoFrame {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub heading_deg: f64,
    pub pixel_spacing: f64,
}

impl GeoFrame {
    /// Lat/lon (degrees) of a fractional pixel position.
    pub fn pixel_to_latlon(&self, row: f64, col: f64) -> (f64, f64) {
        let (sh, ch) = self.heading_deg.to_radians().sin_cos();
        let north = self.pixel_spacing * (row * ch - col * sh);
        let east = self.pixel_spacing * (row * sh + col * ch);
        let lat = self.origin_lat + (north / EARTH_RADIUS_M).to_degrees();
        let lon = self.origin_lon
            + (east / (EARTH_RADIUS_M * self.origin_lat.to_radians().cos())).to_degrees();
        (lat, lon)
    }

    /// Fractional pixel position of a lat/lon.
    pub fn latlon_to_pixel(&self, lat: f64, lon: f64) -> (f64, f64) {
        let (sh, ch) = self.heading_deg.to_radians().sin_cos();
        let north = (lat - self.origin_lat).to_radians() * EARTH_RADIUS_M;
        let east = (lon - self.origin_lon).to_radians()
            * EARTH_RADIUS_M
            * self.origin_lat.to_radians().cos();
        let row = (north * ch + east * sh) / self.pixel_spacing;
        let col = (-north * sh + east * ch) / self.pixel_spacing;
        (row, col)
    }

    /// Azimuth the antenna looks toward, degrees clockwise from north.
    pub fn look_azimuth(&self) -> f64 {
        super::wrap_degrees(self.heading_deg + 90.0)
    }
}

/// Great-circle distance in kilometers.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().asin() / 1000.0
}

/// Wind direction relative to the antenna look direction, in `[0, 360)`.
///
/// `wdir_deg` is meteorological (where the wind comes from); 0 means the wind
/// blows toward the radar.
pub fn relative_direction(wdir_deg: f64, heading_deg: f64) -> f64 {
    super::wrap_degrees(wdir_deg - (heading_deg + 90.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_pixel_positions() {
        let frame = GeoFrame {
            origin_lat: 31.2,
            origin_lon: -79.4,
            heading_deg: 349.0,
            pixel_spacing: 100.0,
        };
        for &(r, c) in &[(0.0, 0.0), (12.5, 400.0), (519.0, 3.0)] {
            let (lat, lon) = frame.pixel_to_latlon(r, c);
            let (r2, c2) = frame.latlon_to_pixel(lat, lon);
            assert!((r - r2).abs() < 1e-8 && (c - c2).abs() < 1e-8);
        }
    }

    #[test]
    fn pixel_steps_are_one_spacing_apart() {
        let frame = GeoFrame {
            origin_lat: 10.0,
            origin_lon: 20.0,
            heading_deg: 190.0,
            pixel_spacing: 100.0,
        };
        let (a, b) = frame.pixel_to_latlon(0.0, 0.0);
        let (c, d) = frame.pixel_to_latlon(0.0, 10.0);
        assert!((haversine_km(a, b, c, d) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn relative_direction_conventions() {
        // Heading north, radar looks east; wind from the east blows at the radar.
        assert_eq!(relative_direction(90.0, 0.0), 0.0);
        assert_eq!(relative_direction(270.0, 0.0), 180.0);
        assert_eq!(relative_direction(0.0, 0.0), 270.0);
    }
}
