use roadloc_web::demo;
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).expect("valid JSON")
}

#[test]
fn threshold_trace_settles_near_mixture_quantile() {
    let t = parse(&demo::threshold_trace(3, 80, 0.1, 4.0, 0.1).unwrap());
    let rho: Vec<f64> = t["rho"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(rho.len(), 80);
    // Mixture 0.9 N(40,10) + 0.1 N(180,15): mean 54, sd about 43.
    let mean = 0.9 * 40.0 + 0.1 * 180.0;
    let var = 0.9 * (100.0 + 40f64.powi(2)) + 0.1 * (225.0 + 180f64.powi(2)) - mean * mean;
    let target = mean + 2.0 * var.sqrt();
    assert!((rho[79] - target).abs() < 3.0, "{} vs {target}", rho[79]);
}

#[test]
fn threshold_trace_rejects_bad_fraction() {
    assert!(demo::threshold_trace(0, 5, 0.1, 4.0, 1.5).is_err());
}

#[test]
fn registration_recovers_lateral_offset() {
    for solver in ["sgicp", "icp"] {
        let r = parse(&demo::registration(solver, 1e-6, 0.3, 0.4, 1.0, 2).unwrap());
        let est = r["estimate"].as_array().unwrap();
        let y = est[1].as_f64().unwrap();
        let yaw = est[2].as_f64().unwrap();
        assert!(y.abs() < 0.05, "{solver}: y {y}");
        assert!(yaw.abs() < 0.2, "{solver}: yaw {yaw}");
        assert!(!r["observed"].as_array().unwrap().is_empty());
    }
}

#[test]
fn registration_rejects_unknown_solver() {
    assert!(demo::registration("ndt", 1e-6, 0.0, 0.0, 0.0, 0).is_err());
}

#[test]
fn libev_image_is_rgba_of_raster_size() {
    let (w, h, rgba, instances) = demo::libev_rgba(5, 1, false).unwrap();
    assert_eq!((w, h), (600, 600));
    assert_eq!(rgba.len(), (w * h * 4) as usize);
    assert!(rgba.chunks_exact(4).all(|c| c[3] == 255));
    assert!(instances > 0);
    assert!(demo::libev_rgba(0, 1, false).is_err());
}
