//! Cation (Zn) sites of a wurtzite lattice.

/// In-plane and axial lattice vectors.
fn primitive(a: f64, c: f64) -> [[f64; 3]; 3] {
    [[a, 0.0, 0.0], [0.5 * a, 0.5 * 3f64.sqrt() * a, 0.0], [0.0, 0.0, c]]
}

/// The two cation basis positions of the hexagonal cell.
fn basis(a: f64, c: f64) -> [[f64; 3]; 2] {
    [[0.0, 0.0, 0.0], [a / 2.0, a / (2.0 * 3f64.sqrt()), c / 2.0]]
}

/// Cation positions within `cutoff` of cation basis site `center` (0 or 1),
/// relative to it and excluding it, ordered by cell index.
pub fn cation_sites(a: f64, c: f64, cutoff: f64, center: usize) -> Vec<[f64; 3]> {
    let [a1, a2, a3] = primitive(a, c);
    let basis = basis(a, c);
    let origin = basis[center];
    let n_in = (cutoff / (0.5 * 3f64.sqrt() * a)).ceil() as i64 + 1;
    let n_c = (cutoff / c).ceil() as i64 + 1;
    let mut out = Vec::new();
    for i in -n_in..=n_in {
        for j in -n_in..=n_in {
            for k in -n_c..=n_c {
                for b in &basis {
                    let p: [f64; 3] = std::array::from_fn(|d| {
                        i as f64 * a1[d] + j as f64 * a2[d] + k as f64 * a3[d] + b[d] - origin[d]
                    });
                    let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                    if r2 > 0.0 && r2 <= cutoff * cutoff {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

pub fn norm(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const A: f64 = 3.25e-10;
    const C: f64 = 5.21e-10;

    #[test]
    fn site_count_matches_density() {
        let r = 3e-9;
        let count = cation_sites(A, C, r, 0).len() as f64 + 1.0;
        let expect = crate::units::wurtzite_site_density(A, C) * 4.0 / 3.0 * PI * r.powi(3);
        assert!((count / expect - 1.0).abs() < 0.03, "{count} vs {expect}");
    }

    #[test]
    fn twelve_nearest_neighbours() {
        for center in 0..2 {
            assert_eq!(cation_sites(A, C, 1.001 * A, center).len(), 12);
        }
    }

    #[test]
    fn both_centres_see_inverted_environments() {
        let mut s0: Vec<[f64; 3]> = cation_sites(A, C, 1.5e-9, 0);
        let mut s1: Vec<[f64; 3]> = cation_sites(A, C, 1.5e-9, 1).iter().map(|p| p.map(|x| -x)).collect();
        let key = |p: &[f64; 3]| p.map(|x| (x * 1e13).round() as i64);
        s0.sort_by_key(key);
        s1.sort_by_key(key);
        assert_eq!(s0.iter().map(key).collect::<Vec<_>>(), s1.iter().map(key).collect::<Vec<_>>());
    }
}
