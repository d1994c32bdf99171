//! Spherical-earth geodesy.

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Kilometres per degree of arc on the reference sphere (about 111.195).
pub const KM_PER_DEGREE: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

/// Kilometres per degree used to convert a lattice pitch into degrees.
pub const KM_PER_DEGREE_EQUATOR: f64 = 111.32;

/// Haversine great-circle distance in kilometres between two (lon, lat) points in degrees.
pub fn haversine_km(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let half_dphi = (lat2 - lat1).to_radians() / 2.0;
    let half_dlambda = (lon2 - lon1).to_radians() / 2.0;
    let a = half_dphi.sin().powi(2) + phi1.cos() * phi2.cos() * half_dlambda.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Great-circle distance expressed in equivalent degrees of arc.
pub fn distance_deg(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    haversine_km(lon1, lat1, lon2, lat2) / KM_PER_DEGREE
}

/// Metres spanned by one degree of longitude at latitude `lat`.
pub fn metres_per_degree_lon(lat: f64) -> f64 {
    KM_PER_DEGREE * 1000.0 * lat.to_radians().cos()
}

pub fn metres_per_degree_lat() -> f64 {
    KM_PER_DEGREE * 1000.0
}
