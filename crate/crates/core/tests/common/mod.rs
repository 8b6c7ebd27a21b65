//! Independent reference computations for the integration tests.
#![allow(dead_code)]

/// A level cable between anchors at `0` and `span`, loaded by point masses.
#[derive(Debug, Clone)]
pub struct Line {
    pub span: f64,
    /// Lumped pretension of the load-bearing set, N.
    pub pretension: f64,
    /// Lumped axial rigidity `EA`, N.
    pub rigidity: f64,
    /// `(x, mass)` pairs, any order.
    pub loads: Vec<(f64, f64)>,
}

pub const G: f64 = 9.80665;

impl Line {
    fn sorted(&self) -> Vec<(usize, f64, f64)> {
        let mut v: Vec<_> = self.loads.iter().enumerate().map(|(i, &(x, m))| (i, x, m)).collect();
        v.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        v
    }

    /// Potential energy for heights `z` (load order): gravity plus, per
    /// segment, `T₀·L + ½·(EA/L₀)·max(0, L − L₀)²`, whose derivative in `L`
    /// is the segment tension.
    pub fn energy(&self, z: &[f64]) -> f64 {
        let nodes = self.sorted();
        let mut pts = vec![(0.0, 0.0)];
        pts.extend(nodes.iter().map(|&(i, x, _)| (x, z[i])));
        pts.push((self.span, 0.0));
        let mut e = 0.0;
        for w in pts.windows(2) {
            let rest = w[1].0 - w[0].0;
            let len = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            let stretch = (len - rest).max(0.0);
            e += self.pretension * len + 0.5 * self.rigidity / rest * stretch * stretch;
        }
        for &(i, _, m) in &nodes {
            e += m * G * z[i];
        }
        e
    }

    /// Minimizes [`Line::energy`] by pattern search on a shrinking grid,
    /// ending at a step of `finest` m. Moves are single coordinates, all
    /// coordinates together, and adjacent pairs in opposition.
    pub fn minimize(&self, finest: f64) -> Vec<f64> {
        let n = self.loads.len();
        let mut z = vec![0.0; n];
        if n == 0 {
            return z;
        }
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            dirs.push(d);
        }
        dirs.push(vec![1.0; n]);
        for i in 0..n.saturating_sub(1) {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            d[i + 1] = -1.0;
            dirs.push(d);
        }
        let mut h = 0.1;
        let mut best = self.energy(&z);
        while h >= finest * 0.999 {
            loop {
                let mut improved = false;
                for d in &dirs {
                    for s in [1.0, -1.0] {
                        loop {
                            let trial: Vec<f64> = z.iter().zip(d).map(|(a, b)| a + s * h * b).collect();
                            let e = self.energy(&trial);
                            if e < best {
                                best = e;
                                z = trial;
                                improved = true;
                            } else {
                                break;
                            }
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
            h /= 4.0;
        }
        z
    }

    /// Sag of a single load by the small-angle string formula
    /// `m g a (L − a) / (T L)`.
    pub fn small_angle_sag(&self) -> f64 {
        let (a, m) = self.loads[0];
        m * G * a * (self.span - a) / (self.pretension * self.span)
    }
}

/// Kinetic plus potential energy of a moving line.
pub fn total_energy(line: &Line, z: &[f64], z_dot: &[f64]) -> f64 {
    let kinetic: f64 = line
        .loads
        .iter()
        .zip(z_dot)
        .map(|(&(_, m), v)| 0.5 * m * v * v)
        .sum();
    kinetic + line.energy(z)
}
