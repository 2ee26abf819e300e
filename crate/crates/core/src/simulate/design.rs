use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::penalty::GroupStructure;

/// The eight table designs and the three selection-curve designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DesignId {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
    D7,
    D8,
    R1,
    R2,
    R3,
}

impl DesignId {
    pub const TABLE: [DesignId; 8] = [
        DesignId::D1,
        DesignId::D2,
        DesignId::D3,
        DesignId::D4,
        DesignId::D5,
        DesignId::D6,
        DesignId::D7,
        DesignId::D8,
    ];
    pub const ROC: [DesignId; 3] = [DesignId::R1, DesignId::R2, DesignId::R3];

    pub fn is_roc(&self) -> bool {
        matches!(self, DesignId::R1 | DesignId::R2 | DesignId::R3)
    }

    /// Stable numeric code mixed into the random stream key.
    pub fn code(&self) -> u64 {
        match self {
            DesignId::D1 => 1,
            DesignId::D2 => 2,
            DesignId::D3 => 3,
            DesignId::D4 => 4,
            DesignId::D5 => 5,
            DesignId::D6 => 6,
            DesignId::D7 => 7,
            DesignId::D8 => 8,
            DesignId::R1 => 101,
            DesignId::R2 => 102,
            DesignId::R3 => 103,
        }
    }
}

impl fmt::Display for DesignId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignId::R1 => write!(f, "R1"),
            DesignId::R2 => write!(f, "R2"),
            DesignId::R3 => write!(f, "R3"),
            d => write!(f, "{}", d.code()),
        }
    }
}

impl FromStr for DesignId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix("design").unwrap_or(&t).trim();
        Ok(match t {
            "1" => DesignId::D1,
            "2" => DesignId::D2,
            "3" => DesignId::D3,
            "4" => DesignId::D4,
            "5" => DesignId::D5,
            "6" => DesignId::D6,
            "7" => DesignId::D7,
            "8" => DesignId::D8,
            "r1" => DesignId::R1,
            "r2" => DesignId::R2,
            "r3" => DesignId::R3,
            _ => {
                return Err(Error::Argument(format!(
                    "unknown design '{s}' (expected 1..8 or R1..R3)"
                )))
            }
        })
    }
}

impl TryFrom<String> for DesignId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DesignId> for String {
    fn from(d: DesignId) -> String {
        d.to_string()
    }
}

/// A data-generation recipe. Signal covariates in group `j` are
/// `U_j + eps` with one `U_j` per row; null covariates are iid uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub id: DesignId,
    pub seed: u64,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    /// Coefficient value of each signal group.
    pub signal_values: Vec<f64>,
    pub group_size: usize,
    pub null_groups: usize,
    pub u_range: (f64, f64),
    pub eps_range: (f64, f64),
    pub null_range: (f64, f64),
}

impl SimDesign {
    pub fn new(id: DesignId, seed: u64) -> Self {
        use DesignId::*;
        let (signal_values, group_size, null_groups, u_range, eps_range, null_range) = match id {
            D1 => (vec![0.3, 0.2], 10, 10, (0.0, 1.0), (0.0, 0.01), (-0.1, 0.1)),
            D2 => (vec![0.3, 0.2], 10, 10, (0.0, 1.0), (0.0, 1.0), (-0.1, 0.1)),
            D3 => (vec![0.3, 0.2], 10, 10, (0.0, 1.0), (0.0, 1.2), (-0.1, 0.1)),
            D4 => (vec![0.3, 0.2], 20, 10, (0.0, 1.0), (0.0, 1.0), (-0.1, 0.1)),
            D5 => (vec![0.3, 0.2], 5, 10, (0.0, 1.0), (0.0, 1.0), (-0.1, 0.1)),
            D6 => (vec![0.2, 0.2], 10, 10, (0.0, 1.0), (0.0, 1.0), (-0.1, 0.1)),
            D7 => (vec![0.2; 4], 10, 10, (0.0, 1.0), (0.0, 1.0), (-0.1, 0.1)),
            D8 => (vec![0.2; 6], 10, 10, (0.0, 1.0), (0.0, 1.0), (-0.1, 0.1)),
            R1 => (vec![0.2; 10], 5, 50, (0.0, 1.0), (-1.0, 1.0), (-0.1, 0.1)),
            R2 => (vec![0.2; 10], 5, 100, (-1.0, 1.0), (-1.0, 1.0), (-0.1, 0.1)),
            R3 => (
                vec![0.2; 10],
                5,
                100,
                (-1.0, 1.0),
                (-1.0, 1.0),
                (-0.01, 0.01),
            ),
        };
        // selection-curve designs fit on a single larger sample
        let n_train = if id.is_roc() { 100 } else { 50 };
        SimDesign {
            id,
            seed,
            n_train,
            n_valid: 50,
            n_test: 100,
            signal_values,
            group_size,
            null_groups,
            u_range,
            eps_range,
            null_range,
        }
    }

    pub fn m_star(&self) -> usize {
        self.signal_values.len()
    }

    pub fn n_groups(&self) -> usize {
        self.m_star() + self.null_groups
    }

    pub fn p(&self) -> usize {
        self.n_groups() * self.group_size
    }

    pub fn s_star(&self) -> usize {
        self.m_star() * self.group_size
    }

    /// Size of the nonzero groups.
    pub fn v(&self) -> usize {
        self.group_size
    }

    pub fn gs(&self) -> GroupStructure {
        GroupStructure::uniform(self.n_groups(), self.group_size).expect("design has groups")
    }

    pub fn beta_star(&self) -> Array1<f64> {
        let mut b = Array1::zeros(self.p());
        for (j, &v) in self.signal_values.iter().enumerate() {
            b.slice_mut(ndarray::s![j * self.group_size..(j + 1) * self.group_size])
                .fill(v);
        }
        b
    }

    pub fn signal_mask(&self) -> Vec<bool> {
        (0..self.p()).map(|j| j < self.s_star()).collect()
    }
}

/// One replicate's three samples.
#[derive(Debug, Clone)]
pub struct SimData {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
    pub beta_star: Array1<f64>,
    pub gs: GroupStructure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train = 0,
    Valid = 1,
    Test = 2,
}

/// Independent stream for one (design, seed, replicate, split).
pub fn split_rng(design: &SimDesign, replicate: u64, split: Split) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&design.seed.to_le_bytes());
    key[8..16].copy_from_slice(&replicate.to_le_bytes());
    key[16..24].copy_from_slice(&design.id.code().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(split as u64);
    rng
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn draw_split(design: &SimDesign, beta: &Array1<f64>, n: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let p = design.p();
    let d = design.group_size;
    let mut x = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        for g in 0..design.m_star() {
            let u = draw(rng, design.u_range);
            for j in g * d..(g + 1) * d {
                x[[i, j]] = u + draw(rng, design.eps_range);
            }
        }
        for j in design.s_star()..p {
            x[[i, j]] = draw(rng, design.null_range);
        }
    }
    let eta = x.dot(beta);
    let y = eta.mapv(|e| sample_poisson(e.exp(), rng));
    Dataset::new(x, y).expect("generated data is finite")
}

/// Poisson draw; a zero rate yields zero.
pub fn sample_poisson(rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    Poisson::new(rate)
        .expect("positive finite rate")
        .sample(rng)
}

/// Draws the train, validation and test samples of one replicate.
pub fn generate(design: &SimDesign, replicate: u64) -> SimData {
    let beta = design.beta_star();
    let mut sets = [Split::Train, Split::Valid, Split::Test]
        .into_iter()
        .map(|s| {
            let n = match s {
                Split::Train => design.n_train,
                Split::Valid => design.n_valid,
                Split::Test => design.n_test,
            };
            draw_split(design, &beta, n, &mut split_rng(design, replicate, s))
        });
    SimData {
        train: sets.next().unwrap(),
        valid: sets.next().unwrap(),
        test: sets.next().unwrap(),
        gs: design.gs(),
        beta_star: beta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_dimensions() {
        // (s*, p, G, m*, v)
        let expected = [
            (20, 120, 12, 2, 10),
            (20, 120, 12, 2, 10),
            (20, 120, 12, 2, 10),
            (40, 240, 12, 2, 20),
            (10, 60, 12, 2, 5),
            (20, 120, 12, 2, 10),
            (40, 140, 14, 4, 10),
            (60, 160, 16, 6, 10),
        ];
        for (id, e) in DesignId::TABLE.iter().zip(expected) {
            let d = SimDesign::new(*id, 0);
            assert_eq!(
                (d.s_star(), d.p(), d.n_groups(), d.m_star(), d.v()),
                e,
                "design {id}"
            );
            let nz = d.beta_star().iter().filter(|v| **v != 0.0).count();
            assert_eq!(nz, d.s_star());
        }
        let r1 = SimDesign::new(DesignId::R1, 0);
        assert_eq!((r1.p(), r1.s_star()), (300, 50));
        assert_eq!(SimDesign::new(DesignId::R3, 0).p(), 550);
    }

    #[test]
    fn shapes_and_determinism() {
        let d = SimDesign::new(DesignId::D1, 11);
        let a = generate(&d, 3);
        assert_eq!(a.train.x().dim(), (50, 120));
        assert_eq!(a.valid.n(), 50);
        assert_eq!(a.test.n(), 100);
        let b = generate(&d, 3);
        assert_eq!(a.train.x(), b.train.x());
        assert_eq!(a.test.y(), b.test.y());
        let c = generate(&d, 4);
        assert_ne!(a.train.x(), c.train.x());
        // splits come from distinct streams
        assert_ne!(a.train.x().row(0), a.valid.x().row(0));
        let other_seed = generate(&SimDesign::new(DesignId::D1, 12), 3);
        assert_ne!(a.train.x(), other_seed.train.x());
    }

    #[test]
    fn covariate_ranges() {
        let d = SimDesign::new(DesignId::D1, 5);
        let s = generate(&d, 0);
        let x = s.train.x();
        for i in 0..x.nrows() {
            let block: Vec<f64> = (0..10).map(|j| x[[i, j]]).collect();
            let spread = block.iter().cloned().fold(f64::MIN, f64::max)
                - block.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread < 0.01);
            for j in 20..120 {
                assert!(x[[i, j]].abs() <= 0.1);
            }
        }
        assert!(s.train.y().iter().all(|y| *y >= 0.0 && y.fract() == 0.0));
    }

    #[test]
    fn poisson_sampler_mean() {
        for (k, &rate) in [0.5, 1.0, 4.0].iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            let n = 100_000;
            let mean = (0..n).map(|_| sample_poisson(rate, &mut rng)).sum::<f64>() / n as f64;
            let se = (rate / n as f64).sqrt();
            assert!((mean - rate).abs() < 4.0 * se, "rate {rate}: mean {mean}");
        }
    }

    #[test]
    fn design_names() {
        for id in DesignId::TABLE.iter().chain(DesignId::ROC.iter()) {
            assert_eq!(id.to_string().parse::<DesignId>().unwrap(), *id);
        }
        assert_eq!("design3".parse::<DesignId>().unwrap(), DesignId::D3);
        assert!("9".parse::<DesignId>().is_err());
    }
}
