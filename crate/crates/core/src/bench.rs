//! Seeded, scalable benchmark problems modelled on the CEC2013 large-scale
//! families: fully separable, partially additive separable, overlapping and
//! fully non-separable compositions of five base functions.
//!
//! Problems are addressed by string ids of the form
//! `<structure>-<base>-d<dim>-s<seed>`, optionally followed by `-m<group size>`,
//! `-o<overlap>` and `-r0`/`-r1` (rotation off/on).

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseFunction {
    Elliptic,
    Rastrigin,
    Ackley,
    Schwefel12,
    Rosenbrock,
}

impl BaseFunction {
    pub const ALL: [BaseFunction; 5] = [
        BaseFunction::Elliptic,
        BaseFunction::Rastrigin,
        BaseFunction::Ackley,
        BaseFunction::Schwefel12,
        BaseFunction::Rosenbrock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaseFunction::Elliptic => "elliptic",
            BaseFunction::Rastrigin => "rastrigin",
            BaseFunction::Ackley => "ackley",
            BaseFunction::Schwefel12 => "schwefel12",
            BaseFunction::Rosenbrock => "rosenbrock",
        }
    }

    /// Symmetric search range `[-r, r]^D` used by the benchmark family.
    pub fn search_radius(self) -> f64 {
        match self {
            BaseFunction::Rastrigin => 5.0,
            BaseFunction::Ackley => 32.0,
            BaseFunction::Elliptic | BaseFunction::Schwefel12 | BaseFunction::Rosenbrock => 100.0,
        }
    }

    /// Offset added to transformed coordinates so the optimum sits at the origin.
    fn optimum_offset(self) -> f64 {
        match self {
            BaseFunction::Rosenbrock => 1.0,
            _ => 0.0,
        }
    }
}

impl fmt::Display for BaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaseFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaseFunction::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown base function `{s}`")))
    }
}

/// Evaluates a base function at `x` (length ≥ 2, finite).
pub fn base_eval(base: BaseFunction, x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::invalid("base functions need at least 2 variables"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("base function input contains non-finite entries"));
    }
    Ok(base_value(base, x))
}

fn base_value(base: BaseFunction, x: &[f64]) -> f64 {
    let n = x.len();
    match base {
        BaseFunction::Elliptic => {
            let denom = (n - 1) as f64;
            x.iter()
                .enumerate()
                .map(|(i, xi)| 1e6f64.powf(i as f64 / denom) * xi * xi)
                .sum()
        }
        BaseFunction::Rastrigin => x
            .iter()
            .map(|xi| xi * xi + 10.0 * (1.0 - (2.0 * PI * xi).cos()))
            .sum(),
        BaseFunction::Ackley => {
            let nf = n as f64;
            let sq = x.iter().map(|xi| xi * xi).sum::<f64>() / nf;
            let cs = x.iter().map(|xi| (2.0 * PI * xi).cos()).sum::<f64>() / nf;
            let v = 20.0 * (1.0 - (-0.2 * sq.sqrt()).exp()) + (E - cs.exp());
            v.max(0.0)
        }
        BaseFunction::Schwefel12 => {
            let mut partial = 0.0;
            let mut total = 0.0;
            for xi in x {
                partial += xi;
                total += partial * partial;
            }
            total
        }
        BaseFunction::Rosenbrock => x
            .windows(2)
            .map(|w| {
                let a = w[0] * w[0] - w[1];
                let b = w[0] - 1.0;
                100.0 * a * a + b * b
            })
            .sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Structure {
    FullySeparable,
    PartiallySeparable,
    Overlapping,
    NonSeparable,
}

impl Structure {
    pub const ALL: [Structure; 4] = [
        Structure::FullySeparable,
        Structure::PartiallySeparable,
        Structure::Overlapping,
        Structure::NonSeparable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Structure::FullySeparable => "separable",
            Structure::PartiallySeparable => "partial",
            Structure::Overlapping => "overlapping",
            Structure::NonSeparable => "nonseparable",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Structure::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown structure `{s}`")))
    }
}

/// Instance generator configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProblemSpec {
    pub structure: Structure,
    pub base: BaseFunction,
    pub dim: usize,
    pub group_size: usize,
    pub overlap: usize,
    pub rotation: bool,
    pub seed: u64,
}

impl ProblemSpec {
    /// A spec with the default group size, overlap and rotation for `structure`.
    pub fn new(structure: Structure, base: BaseFunction, dim: usize, seed: u64) -> Self {
        let group_size = default_group_size(dim);
        Self {
            structure,
            base,
            dim,
            group_size,
            overlap: default_overlap(group_size),
            rotation: structure != Structure::FullySeparable,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::invalid("problem dimension must be at least 2"));
        }
        if self.group_size < 1 || self.group_size > self.dim {
            return Err(Error::invalid(format!(
                "group size {} must lie in [1, {}]",
                self.group_size, self.dim
            )));
        }
        if self.overlap >= self.group_size {
            return Err(Error::invalid(format!(
                "overlap {} must be smaller than group size {}",
                self.overlap, self.group_size
            )));
        }
        let grouped = matches!(
            self.structure,
            Structure::PartiallySeparable | Structure::Overlapping
        );
        if grouped && self.group_size < 2 {
            return Err(Error::invalid("grouped structures need group size >= 2"));
        }
        if self.structure == Structure::Overlapping && self.overlap == 0 {
            return Err(Error::invalid("overlapping structure needs overlap >= 1"));
        }
        if self.structure == Structure::FullySeparable && self.rotation {
            return Err(Error::invalid("fully separable problems are never rotated"));
        }
        Ok(())
    }

    /// Registry id; defaults are omitted so that `parse(id()) == self`.
    pub fn id(&self) -> String {
        let mut id = format!(
            "{}-{}-d{}-s{}",
            self.structure, self.base, self.dim, self.seed
        );
        let defaults = ProblemSpec::new(self.structure, self.base, self.dim, self.seed);
        if self.group_size != defaults.group_size {
            id.push_str(&format!("-m{}", self.group_size));
        }
        if self.overlap != defaults.overlap {
            id.push_str(&format!("-o{}", self.overlap));
        }
        if self.rotation != defaults.rotation {
            id.push_str(if self.rotation { "-r1" } else { "-r0" });
        }
        id
    }

    pub fn parse(id: &str) -> Result<Self> {
        let bad = |why: &str| Error::invalid(format!("bad problem id `{id}`: {why}"));
        let parts: Vec<&str> = id.split('-').collect();
        if parts.len() < 4 {
            return Err(bad("expected <structure>-<base>-d<dim>-s<seed>"));
        }
        let structure: Structure = parts[0].parse()?;
        let base: BaseFunction = parts[1].parse()?;
        let num = |token: &str, prefix: char| -> Result<u64> {
            token
                .strip_prefix(prefix)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(&format!("expected `{prefix}<number>`, got `{token}`")))
        };
        let dim = num(parts[2], 'd')? as usize;
        let seed = num(parts[3], 's')?;

        let mut spec = ProblemSpec::new(structure, base, dim, seed);
        let mut overlap_set = false;
        for token in &parts[4..] {
            match token.chars().next() {
                Some('m') => spec.group_size = num(token, 'm')? as usize,
                Some('o') => {
                    spec.overlap = num(token, 'o')? as usize;
                    overlap_set = true;
                }
                Some('r') => spec.rotation = num(token, 'r')? != 0,
                _ => return Err(bad(&format!("unknown suffix `{token}`"))),
            }
        }
        if !overlap_set {
            spec.overlap = default_overlap(spec.group_size);
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn default_group_size(dim: usize) -> usize {
    dim.div_ceil(10).max(2).min(dim)
}

fn default_overlap(group_size: usize) -> usize {
    (group_size / 5).max(1).min(group_size.saturating_sub(1))
}

/// A box-bounded black-box objective. Implementations must be pure.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    /// Objective value at `x`, which has length `dim()`.
    fn value(&self, x: &[f64]) -> f64;

    fn clamp(&self, x: &mut [f64]) {
        for ((xi, lo), hi) in x.iter_mut().zip(self.lower()).zip(self.upper()) {
            *xi = xi.clamp(*lo, *hi);
        }
    }
}

/// A generated benchmark instance; immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    spec: ProblemSpec,
    lower: Vec<f64>,
    upper: Vec<f64>,
    shift: Vec<f64>,
    groups: Vec<Vec<usize>>,
    rotations: Vec<Option<DMatrix<f64>>>,
    base_fns: Vec<BaseFunction>,
}

const INSTANCE_STREAM: u64 = 0x0b5e_55ed;

/// Builds a problem instance; deterministic in `spec.seed`.
pub fn make_problem(spec: &ProblemSpec) -> Result<Problem> {
    spec.validate()?;
    let dim = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Runs draw from streams 0 and 1 of the same seed space.
    rng.set_stream(INSTANCE_STREAM);

    let radius = spec.base.search_radius();
    let lower = vec![-radius; dim];
    let upper = vec![radius; dim];
    let margin = 0.1 * 2.0 * radius;
    let shift: Vec<f64> = (0..dim)
        .map(|_| rng.gen_range((-radius + margin)..(radius - margin)))
        .collect();

    let groups = match spec.structure {
        Structure::FullySeparable | Structure::NonSeparable => vec![(0..dim).collect()],
        Structure::PartiallySeparable => chunk_groups(dim, spec.group_size, 0),
        Structure::Overlapping => chunk_groups(dim, spec.group_size, spec.overlap),
    };

    let rotations = groups
        .iter()
        .map(|g| spec.rotation.then(|| random_rotation(&mut rng, g.len())))
        .collect();
    let base_fns = vec![spec.base; groups.len()];

    Ok(Problem {
        spec: spec.clone(),
        lower,
        upper,
        shift,
        groups,
        rotations,
        base_fns,
    })
}

/// Contiguous groups of `size` where consecutive groups share `overlap` indices.
/// A trailing group shorter than 2 is merged into its predecessor.
fn chunk_groups(dim: usize, size: usize, overlap: usize) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + size).min(dim);
        if end - start < 2 && !groups.is_empty() {
            let last = groups.last_mut().expect("non-empty");
            let from = last.last().map(|&i| i + 1).unwrap_or(start);
            last.extend(from..end);
            break;
        }
        groups.push((start..end).collect());
        if end == dim {
            break;
        }
        start = end - overlap;
    }
    groups
}

/// Orthogonal matrix from the QR factorization of a seeded random matrix.
fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

impl Problem {
    pub fn from_id(id: &str) -> Result<Problem> {
        make_problem(&ProblemSpec::parse(id)?)
    }

    pub fn id(&self) -> String {
        self.spec.id()
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn structure(&self) -> Structure {
        self.spec.structure
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Location of the global optimum (objective value 0).
    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn rotations(&self) -> &[Option<DMatrix<f64>>] {
        &self.rotations
    }

    pub fn base_fns(&self) -> &[BaseFunction] {
        &self.base_fns
    }

    /// Replaces the optimum location. Used to build hand-checkable instances.
    pub fn with_shift(mut self, shift: Vec<f64>) -> Result<Problem> {
        if shift.len() != self.dim() {
            return Err(Error::invalid("shift length must equal the problem dimension"));
        }
        let inside = shift
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(s, (lo, hi))| lo <= s && s <= hi);
        if !inside {
            return Err(Error::invalid("shift must lie within the box bounds"));
        }
        self.shift = shift;
        Ok(self)
    }

    /// Objective value at `x`. Pure: no evaluation counting happens here.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "expected a vector of length {}, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut z = Vec::new();
        for ((group, rotation), &base) in self.groups.iter().zip(&self.rotations).zip(&self.base_fns) {
            z.clear();
            z.extend(group.iter().map(|&i| x[i] - self.shift[i]));
            if let Some(r) = rotation {
                let rotated = r * DVector::from_column_slice(&z);
                z.clear();
                z.extend(rotated.iter());
            }
            let offset = base.optimum_offset();
            if offset != 0.0 {
                z.iter_mut().for_each(|v| *v += offset);
            }
            total += base_value(base, &z);
        }
        total
    }
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval_unchecked(x)
    }
}
