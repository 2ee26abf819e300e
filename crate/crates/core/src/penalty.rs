//! Group structure, structured norms, penalty values and proximal operators.
//!
//! All three penalties share the scale convention `2 * r_n * norm`:
//!
//! * group lasso: `2 r_n sum_g sqrt(d_g) ||beta^g||_2`
//! * lasso: `2 r_n ||beta||_1`
//! * elastic net: `2 r_n ||beta||_1 + t_n ||beta||_2^2`

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Partition of `0..p` into contiguous groups of sizes `d_g`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GroupStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl GroupStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Argument(
                "group structure needs at least one group".into(),
            ));
        }
        if let Some(g) = sizes.iter().position(|&d| d == 0) {
            return Err(Error::Argument(format!("group {g} has size zero")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for &d in &sizes {
            offsets.push(offsets.last().unwrap() + d);
        }
        Ok(GroupStructure { sizes, offsets })
    }

    /// `p` groups of size one.
    pub fn singletons(p: usize) -> Result<Self> {
        Self::new(vec![1; p])
    }

    /// `count` groups of equal size `size`.
    pub fn uniform(count: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; count])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn p(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn size(&self, g: usize) -> usize {
        self.sizes[g]
    }

    pub fn range(&self, g: usize) -> Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.offsets.windows(2).map(|w| w[0]..w[1])
    }

    pub fn d_min(&self) -> usize {
        *self.sizes.iter().min().unwrap()
    }

    pub fn d_max(&self) -> usize {
        *self.sizes.iter().max().unwrap()
    }

    /// Group weight `sqrt(d_g)`.
    pub fn weight(&self, g: usize) -> f64 {
        (self.sizes[g] as f64).sqrt()
    }

    pub fn is_singletons(&self) -> bool {
        self.sizes.iter().all(|&d| d == 1)
    }

    /// Group index owning coordinate `j`.
    pub fn group_of(&self, j: usize) -> Option<usize> {
        if j >= self.p() {
            return None;
        }
        Some(self.offsets.partition_point(|&o| o <= j) - 1)
    }

    /// Reorders whole groups: new group `k` is old group `order[k]`.
    /// Returns the permuted structure and the matching column order.
    pub fn permute(&self, order: &[usize]) -> Result<(GroupStructure, Vec<usize>)> {
        let mut seen = vec![false; self.n_groups()];
        for &g in order {
            if g >= seen.len() || std::mem::replace(&mut seen[g], true) {
                return Err(Error::Argument("not a permutation of the groups".into()));
            }
        }
        if order.len() != self.n_groups() {
            return Err(Error::Argument("not a permutation of the groups".into()));
        }
        let sizes = order.iter().map(|&g| self.sizes[g]).collect();
        let columns = order.iter().flat_map(|&g| self.range(g)).collect();
        Ok((GroupStructure::new(sizes)?, columns))
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.p() {
            return Err(Error::Shape(format!(
                "vector has length {len} but the group structure covers p = {}",
                self.p()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for GroupStructure {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        GroupStructure::new(sizes)
    }
}

impl From<GroupStructure> for Vec<usize> {
    fn from(gs: GroupStructure) -> Self {
        gs.sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PenaltyKind {
    #[serde(rename = "grouplasso")]
    GroupLasso,
    Lasso,
    #[serde(rename = "elasticnet")]
    ElasticNet {
        t_n: f64,
    },
}

impl PenaltyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyKind::GroupLasso => "grouplasso",
            PenaltyKind::Lasso => "lasso",
            PenaltyKind::ElasticNet { .. } => "elasticnet",
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    /// Parses the penalty name; the elastic net gets `t_n = 0` and must be set afterwards.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "grouplasso" => Ok(PenaltyKind::GroupLasso),
            "lasso" => Ok(PenaltyKind::Lasso),
            "elasticnet" => Ok(PenaltyKind::ElasticNet { t_n: 0.0 }),
            other => Err(Error::Argument(format!("unknown penalty '{other}'"))),
        }
    }
}

/// A penalty together with its level `r_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub r_n: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, r_n: f64) -> Result<Self> {
        if !(r_n >= 0.0) || !r_n.is_finite() {
            return Err(Error::Argument(format!(
                "r_n must be finite and >= 0, got {r_n}"
            )));
        }
        if let PenaltyKind::ElasticNet { t_n } = kind {
            if !(t_n >= 0.0) || !t_n.is_finite() {
                return Err(Error::Argument(format!(
                    "t_n must be finite and >= 0, got {t_n}"
                )));
            }
        }
        Ok(PenaltySpec { kind, r_n })
    }

    pub fn group_lasso(r_n: f64) -> Result<Self> {
        Self::new(PenaltyKind::GroupLasso, r_n)
    }

    pub fn lasso(r_n: f64) -> Result<Self> {
        Self::new(PenaltyKind::Lasso, r_n)
    }

    pub fn elastic_net(r_n: f64, t_n: f64) -> Result<Self> {
        Self::new(PenaltyKind::ElasticNet { t_n }, r_n)
    }

    pub fn t_n(&self) -> f64 {
        match self.kind {
            PenaltyKind::ElasticNet { t_n } => t_n,
            _ => 0.0,
        }
    }

    pub fn with_r_n(&self, r_n: f64) -> Result<Self> {
        Self::new(self.kind, r_n)
    }
}

/// Support summary of a coefficient vector relative to a group structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityProfile {
    pub active_groups: BTreeSet<usize>,
    pub m_star: usize,
    pub gamma_star: usize,
    pub s_star: usize,
}

impl SparsityProfile {
    pub fn from_beta(gs: &GroupStructure, beta: ArrayView1<f64>) -> Result<Self> {
        gs.check_len(beta.len())?;
        let active_groups: BTreeSet<usize> = gs
            .ranges()
            .enumerate()
            .filter(|(_, r)| beta.slice(ndarray::s![r.clone()]).iter().any(|&v| v != 0.0))
            .map(|(g, _)| g)
            .collect();
        Ok(Self::build(
            gs,
            active_groups,
            beta.iter().filter(|&&v| v != 0.0).count(),
        ))
    }

    /// Profile of a group set whose every coordinate is nonzero.
    pub fn from_groups(
        gs: &GroupStructure,
        groups: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let active_groups: BTreeSet<usize> = groups.into_iter().collect();
        if let Some(&g) = active_groups.iter().find(|&&g| g >= gs.n_groups()) {
            return Err(Error::Argument(format!("group index {g} out of range")));
        }
        let s_star = active_groups.iter().map(|&g| gs.size(g)).sum();
        Ok(Self::build(gs, active_groups, s_star))
    }

    fn build(gs: &GroupStructure, active_groups: BTreeSet<usize>, s_star: usize) -> Self {
        let gamma_star = active_groups.iter().map(|&g| gs.size(g)).sum();
        SparsityProfile {
            m_star: active_groups.len(),
            active_groups,
            gamma_star,
            s_star,
        }
    }
}

fn group_norm(z: ArrayView1<f64>, r: Range<usize>) -> f64 {
    z.slice(ndarray::s![r])
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Regularizer norm `sum_g sqrt(d_g) ||z^g||_2`.
pub fn regularizer_norm(gs: &GroupStructure, z: ArrayView1<f64>) -> Result<f64> {
    gs.check_len(z.len())?;
    Ok(gs
        .ranges()
        .enumerate()
        .map(|(g, r)| gs.weight(g) * group_norm(z, r))
        .sum())
}

/// Mixed norm `sum_g ||z^g||_2`.
pub fn norm_2_1(gs: &GroupStructure, z: ArrayView1<f64>) -> Result<f64> {
    gs.check_len(z.len())?;
    Ok(gs.ranges().map(|r| group_norm(z, r)).sum())
}

pub fn penalty_value(
    spec: &PenaltySpec,
    gs: &GroupStructure,
    beta: ArrayView1<f64>,
) -> Result<f64> {
    gs.check_len(beta.len())?;
    Ok(penalty_unchecked(spec, gs, beta))
}

pub(crate) fn penalty_unchecked(
    spec: &PenaltySpec,
    gs: &GroupStructure,
    beta: ArrayView1<f64>,
) -> f64 {
    let l1 = || beta.iter().map(|v| v.abs()).sum::<f64>();
    match spec.kind {
        PenaltyKind::GroupLasso => {
            2.0 * spec.r_n
                * gs.ranges()
                    .enumerate()
                    .map(|(g, r)| gs.weight(g) * group_norm(beta, r))
                    .sum::<f64>()
        }
        PenaltyKind::Lasso => 2.0 * spec.r_n * l1(),
        PenaltyKind::ElasticNet { t_n } => 2.0 * spec.r_n * l1() + t_n * beta.dot(&beta),
    }
}

fn norm_change(from: ArrayView1<f64>, to: ArrayView1<f64>) -> f64 {
    let (nf, nt) = (from.dot(&from).sqrt(), to.dot(&to).sqrt());
    if nf + nt == 0.0 {
        return 0.0;
    }
    // (|t|^2 - |f|^2) / (|t| + |f|)
    let num: f64 = from
        .iter()
        .zip(to.iter())
        .map(|(f, t)| (t - f) * (t + f))
        .sum();
    num / (nf + nt)
}

/// `penalty(to) - penalty(from)`, accurate when the two points are close.
pub(crate) fn penalty_change(
    spec: &PenaltySpec,
    gs: &GroupStructure,
    from: ArrayView1<f64>,
    to: ArrayView1<f64>,
) -> f64 {
    let two_r = 2.0 * spec.r_n;
    let l1 = || -> f64 {
        from.iter()
            .zip(to.iter())
            .map(|(f, t)| t.abs() - f.abs())
            .sum()
    };
    match spec.kind {
        PenaltyKind::GroupLasso => {
            two_r
                * gs.ranges()
                    .enumerate()
                    .map(|(g, r)| {
                        gs.weight(g)
                            * norm_change(
                                from.slice(ndarray::s![r.clone()]),
                                to.slice(ndarray::s![r]),
                            )
                    })
                    .sum::<f64>()
        }
        PenaltyKind::Lasso => two_r * l1(),
        PenaltyKind::ElasticNet { t_n } => {
            let sq: f64 = from
                .iter()
                .zip(to.iter())
                .map(|(f, t)| (t - f) * (t + f))
                .sum();
            two_r * l1() + t_n * sq
        }
    }
}

pub(crate) fn soft_threshold(z: f64, tau: f64) -> f64 {
    if z > tau {
        z - tau
    } else if z < -tau {
        z + tau
    } else {
        0.0
    }
}

/// Proximal operator of `step * penalty`:
/// `argmin_u 0.5 ||u - z||^2 + step * penalty(u)`.
pub fn prox(
    spec: &PenaltySpec,
    gs: &GroupStructure,
    z: ArrayView1<f64>,
    step: f64,
) -> Result<Array1<f64>> {
    gs.check_len(z.len())?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Argument(format!(
            "prox step must be positive, got {step}"
        )));
    }
    let mut out = z.to_owned();
    prox_in_place(spec, gs, &mut out, step);
    Ok(out)
}

pub(crate) fn prox_in_place(
    spec: &PenaltySpec,
    gs: &GroupStructure,
    z: &mut Array1<f64>,
    step: f64,
) {
    let base = 2.0 * step * spec.r_n;
    match spec.kind {
        PenaltyKind::GroupLasso => {
            for (g, r) in gs.ranges().enumerate() {
                let tau = base * gs.weight(g);
                let mut block = z.slice_mut(ndarray::s![r]);
                if block.len() == 1 {
                    // same formula as the lasso path so singleton groups agree bitwise
                    block[0] = soft_threshold(block[0], tau);
                    continue;
                }
                let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= tau {
                    block.fill(0.0);
                } else {
                    let scale = 1.0 - tau / norm;
                    block.mapv_inplace(|v| v * scale);
                }
            }
        }
        PenaltyKind::Lasso => z.mapv_inplace(|v| soft_threshold(v, base)),
        PenaltyKind::ElasticNet { t_n } => {
            if t_n == 0.0 {
                z.mapv_inplace(|v| soft_threshold(v, base));
            } else {
                let shrink = 1.0 + 2.0 * step * t_n;
                z.mapv_inplace(|v| soft_threshold(v, base) / shrink);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn structure_basics() {
        let gs = GroupStructure::new(vec![2, 3, 1]).unwrap();
        assert_eq!(gs.p(), 6);
        assert_eq!(gs.n_groups(), 3);
        assert_eq!(gs.range(1), 2..5);
        assert_eq!((gs.d_min(), gs.d_max()), (1, 3));
        assert_eq!(gs.group_of(4), Some(1));
        assert_eq!(gs.group_of(5), Some(2));
        assert_eq!(gs.group_of(6), None);
        assert!(GroupStructure::new(vec![]).is_err());
        assert!(GroupStructure::new(vec![2, 0]).is_err());
    }

    #[test]
    fn structure_json() {
        let gs: GroupStructure = serde_json::from_str("[10, 10, 5]").unwrap();
        assert_eq!(gs.p(), 25);
        assert_eq!(serde_json::to_string(&gs).unwrap(), "[10,10,5]");
        assert!(serde_json::from_str::<GroupStructure>("[1, 0]").is_err());
    }

    #[test]
    fn permute_groups() {
        let gs = GroupStructure::new(vec![2, 1, 3]).unwrap();
        let (pg, cols) = gs.permute(&[2, 0, 1]).unwrap();
        assert_eq!(pg.sizes(), &[3, 2, 1]);
        assert_eq!(cols, vec![3, 4, 5, 0, 1, 2]);
        assert!(gs.permute(&[0, 0, 1]).is_err());
    }

    #[test]
    fn norms() {
        let gs = GroupStructure::new(vec![4]).unwrap();
        assert_eq!(
            regularizer_norm(&gs, array![0.0, 0.0, 0.0, 0.0].view()).unwrap(),
            0.0
        );
        assert_eq!(
            regularizer_norm(&gs, array![1.0, 1.0, 1.0, 1.0].view()).unwrap(),
            4.0
        );

        let gs = GroupStructure::new(vec![2, 2]).unwrap();
        assert_eq!(
            norm_2_1(&gs, array![3.0, 4.0, 0.0, 0.0].view()).unwrap(),
            5.0
        );
        assert_eq!(
            norm_2_1(&gs, array![0.0, 0.0, 0.0, 0.0].view()).unwrap(),
            0.0
        );

        let single = GroupStructure::singletons(3).unwrap();
        let z = array![1.5, -2.0, 0.25];
        assert_eq!(regularizer_norm(&single, z.view()).unwrap(), 3.75);
        assert_eq!(norm_2_1(&single, z.view()).unwrap(), 3.75);
        assert!(matches!(
            norm_2_1(&single, array![1.0].view()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn penalty_values() {
        let gs = GroupStructure::singletons(2).unwrap();
        let zero = array![0.0, 0.0];
        for spec in [
            PenaltySpec::group_lasso(0.7).unwrap(),
            PenaltySpec::lasso(0.7).unwrap(),
            PenaltySpec::elastic_net(0.7, 3.0).unwrap(),
        ] {
            assert_eq!(penalty_value(&spec, &gs, zero.view()).unwrap(), 0.0);
        }
        let g1 = GroupStructure::singletons(1).unwrap();
        let gl = PenaltySpec::group_lasso(0.5).unwrap();
        assert_eq!(penalty_value(&gl, &g1, array![2.0].view()).unwrap(), 2.0);
        let en = PenaltySpec::elastic_net(1.0, 1.0).unwrap();
        assert_eq!(
            penalty_value(&en, &gs, array![1.0, -1.0].view()).unwrap(),
            6.0
        );
    }

    #[test]
    fn spec_validation() {
        assert!(PenaltySpec::lasso(-1.0).is_err());
        assert!(PenaltySpec::lasso(f64::NAN).is_err());
        assert!(PenaltySpec::elastic_net(1.0, -0.1).is_err());
        assert_eq!(
            "group-lasso".parse::<PenaltyKind>().unwrap(),
            PenaltyKind::GroupLasso
        );
        assert!("ridge".parse::<PenaltyKind>().is_err());
    }

    #[test]
    fn group_prox_example() {
        // tau = 2 * step * r_n * sqrt(2) = 1
        let gs = GroupStructure::new(vec![2]).unwrap();
        let r_n = 1.0 / (2.0 * 2f64.sqrt());
        let spec = PenaltySpec::group_lasso(r_n).unwrap();
        let u = prox(&spec, &gs, array![3.0, 4.0].view(), 1.0).unwrap();
        assert_abs_diff_eq!(u[0], 2.4, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 3.2, epsilon = 1e-12);

        // brute-force minimization of the prox objective on a fine grid
        let obj =
            |a: f64, b: f64| 0.5 * ((a - 3.0).powi(2) + (b - 4.0).powi(2)) + (a * a + b * b).sqrt();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=400 {
            for j in 0..=400 {
                let (a, b) = (1.4 + i as f64 * 0.005, 2.2 + j as f64 * 0.005);
                let v = obj(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        assert_abs_diff_eq!(best.1, 2.4, epsilon = 5e-3);
        assert_abs_diff_eq!(best.2, 3.2, epsilon = 5e-3);

        // below threshold
        let u = prox(&spec, &gs, array![0.6, 0.7].view(), 1.0).unwrap();
        assert_eq!(u, array![0.0, 0.0]);
        let u = prox(&spec, &gs, array![0.0, 0.0].view(), 1.0).unwrap();
        assert_eq!(u, array![0.0, 0.0]);
    }

    #[test]
    fn prox_tiny_step_is_identity() {
        let gs = GroupStructure::new(vec![2, 1]).unwrap();
        let z = array![0.3, -1.2, 2.0];
        for spec in [
            PenaltySpec::group_lasso(3.0).unwrap(),
            PenaltySpec::lasso(3.0).unwrap(),
            PenaltySpec::elastic_net(3.0, 5.0).unwrap(),
        ] {
            let u = prox(&spec, &gs, z.view(), 1e-15).unwrap();
            for (a, b) in u.iter().zip(z.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
        let spec = PenaltySpec::lasso(1.0).unwrap();
        assert!(matches!(
            prox(&spec, &gs, z.view(), 0.0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            prox(&spec, &gs, z.view(), -1.0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            prox(&spec, &gs, array![1.0].view(), 1.0),
            Err(Error::Shape(_))
        ));
    }

    fn arb_case() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, u8, f64, f64, f64)> {
        prop::collection::vec(1usize..=3, 1..=3).prop_flat_map(|sizes| {
            let p: usize = sizes.iter().sum();
            (
                Just(sizes),
                prop::collection::vec(-3.0f64..3.0, p),
                0u8..3,
                0.01f64..1.0,
                0.0f64..2.0,
                0.05f64..2.0,
            )
        })
    }

    fn make_spec(which: u8, r: f64, t: f64) -> PenaltySpec {
        match which {
            0 => PenaltySpec::group_lasso(r).unwrap(),
            1 => PenaltySpec::lasso(r).unwrap(),
            _ => PenaltySpec::elastic_net(r, t).unwrap(),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn prox_is_optimal((sizes, z, which, r, t, step) in arb_case(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let gs = GroupStructure::new(sizes).unwrap();
            let spec = make_spec(which, r, t);
            let z = Array1::from(z);
            let u = prox(&spec, &gs, z.view(), step).unwrap();
            let obj = |v: &Array1<f64>| {
                0.5 * (v - &z).mapv(|d| d * d).sum() + step * penalty_value(&spec, &gs, v.view()).unwrap()
            };
            let fu = obj(&u);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..1000 {
                let mut d = Array1::from_shape_fn(u.len(), |_| rng.random_range(-1.0_f64..1.0));
                let norm = d.dot(&d).sqrt();
                let radius: f64 = rng.random_range(0.0..0.1);
                if norm > 0.0 { d *= radius / norm; }
                let v = &u + &d;
                prop_assert!(fu <= obj(&v) + 1e-10);
            }
        }

        #[test]
        fn prox_is_nonexpansive((sizes, z1, which, r, t, step) in arb_case(), shift in prop::collection::vec(-2.0f64..2.0, 9)) {
            let gs = GroupStructure::new(sizes).unwrap();
            let spec = make_spec(which, r, t);
            let z1 = Array1::from(z1);
            let z2: Array1<f64> = z1.iter().zip(shift.iter()).map(|(a, b)| a + b).collect();
            let u1 = prox(&spec, &gs, z1.view(), step).unwrap();
            let u2 = prox(&spec, &gs, z2.view(), step).unwrap();
            let du = (&u1 - &u2).mapv(|d| d * d).sum().sqrt();
            let dz = (&z1 - &z2).mapv(|d| d * d).sum().sqrt();
            prop_assert!(du <= dz + 1e-12);
        }

        #[test]
        fn singleton_groups_match_lasso(z in prop::collection::vec(-3.0f64..3.0, 1..8), r in 0.0f64..2.0, step in 0.01f64..3.0) {
            let gs = GroupStructure::singletons(z.len()).unwrap();
            let z = Array1::from(z);
            let a = prox(&PenaltySpec::group_lasso(r).unwrap(), &gs, z.view(), step).unwrap();
            let b = prox(&PenaltySpec::lasso(r).unwrap(), &gs, z.view(), step).unwrap();
            let c = prox(&PenaltySpec::elastic_net(r, 0.0).unwrap(), &gs, z.view(), step).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!((&b - &c).iter().all(|d| d.abs() <= 1e-15));
        }

        #[test]
        fn regularizer_norm_is_a_norm(sizes in prop::collection::vec(1usize..=4, 1..=4), seed in any::<u64>(), alpha in -5.0f64..5.0) {
            use rand::{Rng, SeedableRng};
            let gs = GroupStructure::new(sizes).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = Array1::from_shape_fn(gs.p(), |_| rng.random_range(-2.0..2.0));
            let b = Array1::from_shape_fn(gs.p(), |_| rng.random_range(-2.0..2.0));
            let na = regularizer_norm(&gs, a.view()).unwrap();
            let nb = regularizer_norm(&gs, b.view()).unwrap();
            let nab = regularizer_norm(&gs, (&a + &b).view()).unwrap();
            prop_assert!(nab <= na + nb + 1e-12);
            let scaled = regularizer_norm(&gs, (&a * alpha).view()).unwrap();
            prop_assert!((scaled - alpha.abs() * na).abs() <= 1e-12 * (1.0 + scaled));
        }
    }

    #[test]
    fn sparsity_profile() {
        let gs = GroupStructure::new(vec![2, 2, 3]).unwrap();
        let beta = array![0.0, 1.0, 0.0, 0.0, 2.0, 0.0, -1.0];
        let prof = SparsityProfile::from_beta(&gs, beta.view()).unwrap();
        assert_eq!(
            prof.active_groups.iter().copied().collect::<Vec<_>>(),
            vec![0, 2]
        );
        assert_eq!((prof.m_star, prof.gamma_star, prof.s_star), (2, 5, 3));
        let prof = SparsityProfile::from_groups(&gs, [1]).unwrap();
        assert_eq!((prof.m_star, prof.gamma_star, prof.s_star), (1, 2, 2));
        assert!(SparsityProfile::from_groups(&gs, [3]).is_err());
    }
}
