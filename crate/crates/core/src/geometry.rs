//! Domain description: the unit disk, the split of its wall into conducting
//! (Dirichlet) and insulated (Neumann) arcs, and the polar grid.
//!
//! The wall at `rho = 1` is cut into `N` equal segments of angle `2*pi/N`.
//! The leading fraction `alpha` of each segment conducts heat (closed arc),
//! the rest is insulated (half-open arc). A single-arc wall is the `N = 1`
//! case and a fully conducting wall is `alpha = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest denominator honoured exactly when sizing the angular grid. Past
/// this the conducting arc is snapped to the nearest cell face instead.
const MAX_EXACT_CELLS_PER_SEGMENT: u64 = 1 << 16;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact non-negative rational, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidSpec("zero denominator".into()));
        }
        let g = gcd(num, den).max(1);
        Ok(Fraction {
            num: num / g,
            den: den / g,
        })
    }

    pub const ONE: Fraction = Fraction { num: 1, den: 1 };

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Exact rational for the shortest decimal representation of `x`.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::InvalidSpec(format!("not a valid fraction: {x}")));
        }
        format!("{x}").parse()
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Fraction {
    type Err = Error;

    /// Accepts `p/q`, plain integers and plain decimals (`0.125`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidSpec(format!("cannot parse fraction {s:?}"));
        if let Some((p, q)) = s.split_once('/') {
            let p: u64 = p.trim().parse().map_err(|_| bad())?;
            let q: u64 = q.trim().parse().map_err(|_| bad())?;
            return Fraction::new(p, q);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let frac = frac.trim_end_matches('0');
        if frac.len() > 18 {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_val: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(bad)?;
        Fraction::new(num, den)
    }
}

impl Serialize for Fraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(u64),
            Float(f64),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse(),
            Raw::Int(i) => Fraction::new(i, 1),
            Raw::Float(x) => Fraction::from_f64(x),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    FullDirichlet,
    SingleArc,
    Periodic,
}

/// Which parts of the wall conduct heat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BoundarySpecRecord", into = "BoundarySpecRecord")]
pub struct BoundarySpec {
    kind: BoundaryKind,
    alpha: Fraction,
    segments: u32,
}

/// Config-file form of a [`BoundarySpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct BoundarySpecRecord {
    kind: BoundaryKind,
    #[serde(default = "one")]
    alpha: Fraction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segments: Option<u32>,
}

fn one() -> Fraction {
    Fraction::ONE
}

impl TryFrom<BoundarySpecRecord> for BoundarySpec {
    type Error = Error;

    fn try_from(r: BoundarySpecRecord) -> Result<Self> {
        match r.kind {
            BoundaryKind::FullDirichlet => {
                if r.alpha != Fraction::ONE {
                    return Err(Error::InvalidSpec(
                        "a full-dirichlet wall has alpha = 1".into(),
                    ));
                }
                Ok(BoundarySpec::full_dirichlet())
            }
            BoundaryKind::SingleArc => BoundarySpec::single_arc(r.alpha),
            BoundaryKind::Periodic => {
                let n = r.segments.ok_or_else(|| {
                    Error::InvalidSpec("periodic wall needs `segments`".into())
                })?;
                BoundarySpec::periodic(n, r.alpha)
            }
        }
    }
}

impl From<BoundarySpec> for BoundarySpecRecord {
    fn from(s: BoundarySpec) -> Self {
        BoundarySpecRecord {
            kind: s.kind,
            alpha: s.alpha,
            segments: (s.kind == BoundaryKind::Periodic).then_some(s.segments),
        }
    }
}

fn check_alpha(alpha: Fraction) -> Result<()> {
    if alpha.num == 0 || alpha.num > alpha.den {
        return Err(Error::InvalidSpec(format!(
            "conducting fraction must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

impl BoundarySpec {
    pub fn full_dirichlet() -> Self {
        BoundarySpec {
            kind: BoundaryKind::FullDirichlet,
            alpha: Fraction::ONE,
            segments: 1,
        }
    }

    pub fn single_arc(alpha: Fraction) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(BoundarySpec {
            kind: BoundaryKind::SingleArc,
            alpha,
            segments: 1,
        })
    }

    pub fn periodic(segments: u32, alpha: Fraction) -> Result<Self> {
        check_alpha(alpha)?;
        if segments == 0 {
            return Err(Error::InvalidSpec("need at least one segment".into()));
        }
        Ok(BoundarySpec {
            kind: BoundaryKind::Periodic,
            alpha,
            segments,
        })
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn alpha(&self) -> Fraction {
        self.alpha
    }

    /// Number of wall segments; 1 unless the wall is periodic.
    pub fn segments(&self) -> u32 {
        self.segments
    }

    /// True whenever the whole wall conducts, whatever the declared kind.
    pub fn is_fully_conducting(&self) -> bool {
        self.kind == BoundaryKind::FullDirichlet || self.alpha == Fraction::ONE
    }

    /// Short identifier such as `periodic-N32-a1_32`.
    pub fn label(&self) -> String {
        let a = self.alpha.to_string().replace('/', "_");
        match self.kind {
            BoundaryKind::FullDirichlet => "full-dirichlet".to_string(),
            BoundaryKind::SingleArc => format!("single-arc-a{a}"),
            BoundaryKind::Periodic => format!("periodic-N{}-a{a}", self.segments),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WallType {
    Conducting,
    Insulated,
}

/// Wall condition at angle `theta` (radians, `[0, 2*pi)`; other values wrap).
///
/// Conducting arcs `[2*pi*k/N, 2*pi*(k + alpha)/N]` are closed, so segment
/// end points and the arc end point itself conduct.
pub fn classify_boundary(spec: &BoundarySpec, theta: f64) -> WallType {
    if spec.is_fully_conducting() {
        return WallType::Conducting;
    }
    let segments = spec.segments as f64;
    // position within the segment, in units of the segment length
    let t = theta.rem_euclid(2.0 * PI) * segments / (2.0 * PI);
    let local = t - t.floor();
    let eps = 1e-12 * segments.max(1.0);
    if local <= spec.alpha.value() + eps || local >= 1.0 - eps {
        WallType::Conducting
    } else {
        WallType::Insulated
    }
}

/// The conducting arcs of the wall as closed angle intervals.
pub fn conducting_arcs(spec: &BoundarySpec) -> Vec<(f64, f64)> {
    if spec.is_fully_conducting() {
        return vec![(0.0, 2.0 * PI)];
    }
    let period = 2.0 * PI / spec.segments as f64;
    (0..spec.segments)
        .map(|k| {
            let start = k as f64 * period;
            (start, start + spec.alpha.value() * period)
        })
        .collect()
}

/// How the computational sector closes in the angular direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngularClosure {
    /// Index arithmetic wraps around the sector.
    Periodic,
    /// Mirror symmetry lines at both sector edges (zero angular flux).
    Reflective,
}

/// Knobs for [`PolarGrid::with_options`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridOptions {
    /// Size the angular grid so the conducting arc lands exactly on cell
    /// faces whenever alpha's denominator allows it.
    pub exact_alpha: bool,
    /// Each conducting and insulated arc spans at least `ceil(n / d)` cells;
    /// `0` disables the rule.
    pub arc_cells_divisor: usize,
    /// At least `2*pi*n` angular cells, so wall cells are no wider than the
    /// radial spacing `1/n`. Ignored for a fully conducting wall.
    pub square_wall_cells: bool,
    /// Cluster radial cells at the wall so wall cells are roughly square.
    pub wall_grading: bool,
    /// Solve on the smallest sector the wall symmetry allows.
    pub symmetry_reduction: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            exact_alpha: true,
            arc_cells_divisor: 32,
            square_wall_cells: true,
            wall_grading: true,
            symmetry_reduction: true,
        }
    }
}

impl GridOptions {
    /// Uniform cell-centred radii, angular count the smallest multiple of
    /// `N` not below `n`, conducting arc snapped to the nearest face, and the
    /// whole disk as the computational domain.
    pub fn plain() -> Self {
        GridOptions {
            exact_alpha: false,
            arc_cells_divisor: 0,
            square_wall_cells: false,
            wall_grading: false,
            symmetry_reduction: false,
        }
    }
}

/// The part of the angular grid that carries unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sector {
    /// Cell offset within a wall segment of the first sector cell.
    pub start: usize,
    pub len: usize,
    pub closure: AngularClosure,
}

/// Finite-volume polar grid of the unit disk.
///
/// Radial cells are cell-centred with faces `radial_faces` (`0` to `1`);
/// angular cells are uniform with centres at `(j + 1/2) * dtheta`, and every
/// wall-condition transition sits on an angular cell face. Unknowns live on
/// the cells of [`Sector`]; the full-disk field follows by symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    n: usize,
    spec: BoundarySpec,
    options: GridOptions,
    n_r: usize,
    n_theta: usize,
    cells_per_segment: usize,
    conducting_cells: usize,
    radial_faces: Vec<f64>,
    rho: Vec<f64>,
    dtheta: f64,
    sector: Sector,
    wall: Vec<WallType>,
}

/// Solves `d / (sinh d * cosh d) = ratio` for the stretching strength `d`.
fn stretching_strength(ratio: f64) -> f64 {
    let f = |d: f64| d / (d.sinh() * d.cosh()) - ratio;
    let (mut lo, mut hi) = (1e-12, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn radial_layout(n_r: usize, wall_spacing: Option<f64>) -> (Vec<f64>, Vec<f64>) {
    let h = 1.0 / n_r as f64;
    match wall_spacing {
        Some(hw) if hw < h => {
            // faces tanh(d xi) / tanh(d): spacing h * d / tanh(d) at the
            // centre shrinking to hw at the wall
            let d = stretching_strength(hw * n_r as f64);
            let map = |xi: f64| (d * xi).tanh() / d.tanh();
            let mut faces: Vec<f64> = (0..=n_r).map(|i| map(i as f64 * h)).collect();
            faces[n_r] = 1.0;
            let rho = (0..n_r).map(|i| map((i as f64 + 0.5) * h)).collect();
            (faces, rho)
        }
        _ => {
            let faces = (0..=n_r).map(|i| i as f64 * h).collect();
            let rho = (0..n_r).map(|i| (i as f64 + 0.5) * h).collect();
            (faces, rho)
        }
    }
}

/// Smallest multiple of `step` that is at least `target`.
fn round_up(target: usize, step: usize) -> usize {
    target.div_ceil(step).max(1) * step
}

impl PolarGrid {
    /// Grid with default options; see [`GridOptions`].
    pub fn new(n: usize, spec: &BoundarySpec) -> Result<Self> {
        Self::with_options(n, spec, GridOptions::default())
    }

    pub fn with_options(n: usize, spec: &BoundarySpec, options: GridOptions) -> Result<Self> {
        if n < 8 {
            return Err(Error::GridTooCoarse(n));
        }
        let spec = if spec.is_fully_conducting() {
            BoundarySpec::full_dirichlet()
        } else {
            *spec
        };
        let segments = spec.segments as usize;
        let n_r = n;

        let (cells_per_segment, conducting_cells) = if spec.is_fully_conducting() {
            (n, n)
        } else {
            let alpha = spec.alpha;
            let exact = options.exact_alpha && alpha.den <= MAX_EXACT_CELLS_PER_SEGMENT;
            let mut step = if exact { alpha.den as usize } else { 1 };
            if options.symmetry_reduction && exact {
                // keep both arcs an even number of cells so the mirror lines
                // fall on cell faces
                step *= 2;
            }
            let min_arc = if options.arc_cells_divisor > 0 {
                n.div_ceil(options.arc_cells_divisor)
            } else {
                1
            };
            let conducting = |m: usize| -> usize {
                if exact {
                    (alpha.num as usize) * (m / alpha.den as usize)
                } else {
                    ((alpha.value() * m as f64).round() as usize).clamp(1, m.saturating_sub(1).max(1))
                }
            };
            let target = if options.square_wall_cells {
                (2.0 * PI * n as f64).ceil() as usize
            } else {
                n
            };
            let mut m = round_up(target.div_ceil(segments), step);
            while conducting(m).min(m - conducting(m)) < min_arc {
                m += step;
            }
            (m, conducting(m))
        };

        let n_theta = cells_per_segment * segments;
        let dtheta = 2.0 * PI / n_theta as f64;
        let wall_spacing = options.wall_grading.then_some(dtheta);
        let (radial_faces, rho) = radial_layout(n_r, wall_spacing);

        let sector = if !options.symmetry_reduction {
            Sector {
                start: 0,
                len: n_theta,
                closure: AngularClosure::Periodic,
            }
        } else if conducting_cells == cells_per_segment {
            // axisymmetric: one reflective wedge carries everything
            Sector {
                start: 0,
                len: 1,
                closure: AngularClosure::Reflective,
            }
        } else if conducting_cells % 2 == 0 && cells_per_segment % 2 == 0 {
            // from the middle of a conducting arc to the middle of the next
            // insulated arc
            Sector {
                start: conducting_cells / 2,
                len: cells_per_segment / 2,
                closure: AngularClosure::Reflective,
            }
        } else {
            Sector {
                start: 0,
                len: cells_per_segment,
                closure: AngularClosure::Periodic,
            }
        };

        let wall = (0..sector.len)
            .map(|j| {
                let local = (sector.start + j) % cells_per_segment;
                if local < conducting_cells {
                    WallType::Conducting
                } else {
                    WallType::Insulated
                }
            })
            .collect();

        Ok(PolarGrid {
            n,
            spec,
            options,
            n_r,
            n_theta,
            cells_per_segment,
            conducting_cells,
            radial_faces,
            rho,
            dtheta,
            sector,
            wall,
        })
    }

    /// Disk whose whole wall is insulated: the `alpha -> 0` limit, used to
    /// exercise the Neumann wall treatment in isolation.
    pub fn insulated_disk(n: usize) -> Result<Self> {
        let mut grid = Self::with_options(n, &BoundarySpec::full_dirichlet(), GridOptions::plain())?;
        grid.conducting_cells = 0;
        grid.wall.iter_mut().for_each(|w| *w = WallType::Insulated);
        Ok(grid)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &BoundarySpec {
        &self.spec
    }

    pub fn options(&self) -> &GridOptions {
        &self.options
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    /// Angular cell count over the whole disk.
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn cells_per_segment(&self) -> usize {
        self.cells_per_segment
    }

    pub fn conducting_cells_per_segment(&self) -> usize {
        self.conducting_cells
    }

    /// Conducting fraction the discrete wall actually realises.
    pub fn effective_alpha(&self) -> f64 {
        self.conducting_cells as f64 / self.cells_per_segment as f64
    }

    pub fn requested_alpha(&self) -> Fraction {
        self.spec.alpha
    }

    /// True when the discrete wall reproduces the requested alpha exactly.
    pub fn alpha_is_exact(&self) -> bool {
        let a = self.spec.alpha;
        (self.conducting_cells as u64) * a.den == (self.cells_per_segment as u64) * a.num
    }

    pub fn radial_faces(&self) -> &[f64] {
        &self.radial_faces
    }

    /// Radial cell centres.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    /// Angular cell centres over the whole disk.
    pub fn theta_coords(&self) -> Vec<f64> {
        (0..self.n_theta)
            .map(|j| (j as f64 + 0.5) * self.dtheta)
            .collect()
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    /// Angular cells carrying unknowns.
    pub fn n_sector(&self) -> usize {
        self.sector.len
    }

    /// Number of unknowns.
    pub fn n_unknowns(&self) -> usize {
        self.n_r * self.sector.len
    }

    /// Wall condition of each sector cell.
    pub fn wall(&self) -> &[WallType] {
        &self.wall
    }

    /// Wall condition of every angular cell of the full disk.
    pub fn wall_full(&self) -> Vec<WallType> {
        (0..self.n_theta)
            .map(|j| {
                if j % self.cells_per_segment < self.conducting_cells {
                    WallType::Conducting
                } else {
                    WallType::Insulated
                }
            })
            .collect()
    }

    /// Sector column holding the value of full-disk angular cell `j`.
    pub fn sector_column(&self, j: usize) -> usize {
        let m = self.cells_per_segment;
        match (self.sector.closure, self.sector.len) {
            (_, len) if len == self.n_theta => j % self.n_theta,
            (AngularClosure::Reflective, 1) => 0,
            (AngularClosure::Periodic, _) => j % m,
            (AngularClosure::Reflective, half) => {
                let x = (j % m + m - self.sector.start) % m;
                if x < half {
                    x
                } else {
                    m - 1 - x
                }
            }
        }
    }

    /// Angle of the centre of sector column `j`, in `[0, 2*pi)`.
    pub fn sector_theta(&self, j: usize) -> f64 {
        let full = (self.sector.start + j) % self.n_theta;
        (full as f64 + 0.5) * self.dtheta
    }

    /// Volume (area) of a cell in ring `i`.
    pub fn cell_volume(&self, i: usize) -> f64 {
        let (a, b) = (self.radial_faces[i], self.radial_faces[i + 1]);
        0.5 * (b * b - a * a) * self.dtheta
    }
}

/// Grid for `n` points per dimension with default options.
pub fn build_grid(n: usize, spec: &BoundarySpec) -> Result<PolarGrid> {
    PolarGrid::new(n, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frac(s: &str) -> Fraction {
        s.parse().unwrap()
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!(frac("2/4"), Fraction::new(1, 2).unwrap());
        assert_eq!(frac("0.125"), Fraction::new(1, 8).unwrap());
        assert_eq!(frac("1"), Fraction::ONE);
        assert_eq!(frac(" 1/512 ").to_string(), "1/512");
        assert_eq!(Fraction::from_f64(0.3).unwrap(), Fraction::new(3, 10).unwrap());
        assert!("1/0".parse::<Fraction>().is_err());
        assert!("abc".parse::<Fraction>().is_err());
        assert!("-1/2".parse::<Fraction>().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(BoundarySpec::periodic(0, frac("1/2")).is_err());
        assert!(BoundarySpec::periodic(4, frac("0")).is_err());
        assert!(BoundarySpec::single_arc(frac("3/2")).is_err());
        assert!(BoundarySpec::single_arc(frac("1")).unwrap().is_fully_conducting());
    }

    #[test]
    fn spec_record_round_trip() {
        let spec = BoundarySpec::periodic(32, frac("1/512")).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(text, r#"{"kind":"periodic","alpha":"1/512","segments":32}"#);
        let back: BoundarySpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);

        let decimal: BoundarySpec =
            toml::from_str("kind = \"single-arc\"\nalpha = 0.25\n").unwrap();
        assert_eq!(decimal.alpha(), frac("1/4"));
        let missing: std::result::Result<BoundarySpec, _> =
            toml::from_str("kind = \"periodic\"\nalpha = \"1/4\"\n");
        assert!(missing.is_err());
    }

    #[test]
    fn full_dirichlet_always_conducts() {
        let spec = BoundarySpec::full_dirichlet();
        for k in 0..100 {
            let theta = k as f64 * 0.0628;
            assert_eq!(classify_boundary(&spec, theta), WallType::Conducting);
        }
    }

    #[test]
    fn single_arc_sixth() {
        let spec = BoundarySpec::single_arc(frac("1/6")).unwrap();
        assert_eq!(classify_boundary(&spec, PI / 6.0), WallType::Conducting);
        assert_eq!(classify_boundary(&spec, PI), WallType::Insulated);
        assert_eq!(classify_boundary(&spec, 0.0), WallType::Conducting);
        assert_eq!(classify_boundary(&spec, PI / 3.0), WallType::Conducting);
        assert_eq!(classify_boundary(&spec, PI / 3.0 + 1e-9), WallType::Insulated);
    }

    /// Interval enumeration straight from the arc definition, used as the
    /// reference for the classifier.
    fn brute_force(spec: &BoundarySpec, theta: f64) -> WallType {
        let p = 2.0 * PI / spec.segments() as f64;
        let a = spec.alpha().value();
        for k in 0..=spec.segments() {
            let lo = k as f64 * p;
            let hi = lo + a * p;
            if theta >= lo - 1e-12 && theta <= hi + 1e-12 {
                return WallType::Conducting;
            }
        }
        WallType::Insulated
    }

    #[test]
    fn periodic_quarter_segments() {
        let spec = BoundarySpec::periodic(4, frac("1/2")).unwrap();
        // k = 1: conducting on [pi/2, 3pi/4], insulated on (3pi/4, pi]
        assert_eq!(classify_boundary(&spec, 3.0 * PI / 4.0), WallType::Conducting);
        assert_eq!(classify_boundary(&spec, 3.0 * PI / 4.0 + 1e-9), WallType::Insulated);
        assert_eq!(classify_boundary(&spec, 0.8 * PI), WallType::Insulated);
        assert_eq!(classify_boundary(&spec, PI), WallType::Conducting);
        for k in 0..4000 {
            let theta = k as f64 * 2.0 * PI / 4000.0 + 1e-4;
            assert_eq!(classify_boundary(&spec, theta), brute_force(&spec, theta), "theta={theta}");
        }
    }

    #[test]
    fn plain_grid_counts() {
        let g = PolarGrid::with_options(32, &BoundarySpec::full_dirichlet(), GridOptions::plain()).unwrap();
        assert_eq!((g.n_r(), g.n_theta()), (32, 32));
        assert_eq!(g.rho()[0], 0.5 / 32.0);

        let spec = BoundarySpec::periodic(32, frac("1/2")).unwrap();
        let g = PolarGrid::with_options(100, &spec, GridOptions::plain()).unwrap();
        assert_eq!(g.n_theta(), 128);

        let spec = BoundarySpec::periodic(8, frac("1/4")).unwrap();
        let g = PolarGrid::with_options(64, &spec, GridOptions::plain()).unwrap();
        assert_eq!(g.n_theta(), 64);
        assert_eq!(g.conducting_cells_per_segment(), 2);
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(matches!(
            PolarGrid::new(7, &BoundarySpec::full_dirichlet()),
            Err(Error::GridTooCoarse(7))
        ));
    }

    #[test]
    fn segment_node_counts_match_classifier() {
        let spec = BoundarySpec::periodic(8, frac("1/4")).unwrap();
        let g = PolarGrid::new(64, &spec).unwrap();
        let m = g.cells_per_segment();
        assert_eq!(g.n_theta() % 8, 0);
        assert_eq!(m % 4, 0);
        let theta = g.theta_coords();
        for seg in 0..8 {
            let conducting = (0..m)
                .filter(|&l| classify_boundary(&spec, theta[seg * m + l]) == WallType::Conducting)
                .count();
            assert_eq!(conducting * 4, m);
        }
        assert_eq!(g.wall_full(), theta.iter().map(|&t| classify_boundary(&spec, t)).collect::<Vec<_>>());
        assert!(g.alpha_is_exact());
    }

    #[test]
    fn snapping_reports_effective_alpha() {
        let spec = BoundarySpec::periodic(4, frac("1/3")).unwrap();
        let g = PolarGrid::with_options(16, &spec, GridOptions::plain()).unwrap();
        assert_eq!(g.cells_per_segment(), 4);
        assert_eq!(g.conducting_cells_per_segment(), 1);
        assert!(!g.alpha_is_exact());
        assert_eq!(g.effective_alpha(), 0.25);
    }

    #[test]
    fn arc_resolution_rule() {
        let spec = BoundarySpec::periodic(32, frac("1/512")).unwrap();
        let g = PolarGrid::new(64, &spec).unwrap();
        assert_eq!(g.conducting_cells_per_segment(), 2);
        assert_eq!(g.cells_per_segment(), 1024);
        let g = PolarGrid::new(256, &spec).unwrap();
        assert_eq!(g.conducting_cells_per_segment(), 8);
        assert_eq!(g.sector().len, 2048);
        assert_eq!(g.sector().closure, AngularClosure::Reflective);
    }

    #[test]
    fn wall_grading_only_when_angular_cells_are_finer() {
        let g = PolarGrid::new(64, &BoundarySpec::full_dirichlet()).unwrap();
        assert!((g.radial_faces()[1] - 1.0 / 64.0).abs() < 1e-15);

        let spec = BoundarySpec::periodic(32, frac("1/32")).unwrap();
        let g = PolarGrid::new(64, &spec).unwrap();
        let faces = g.radial_faces();
        let wall_step = 1.0 - faces[63];
        assert!((wall_step / g.dtheta() - 1.0).abs() < 0.05, "{wall_step} vs {}", g.dtheta());
        assert!(faces.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(faces[64], 1.0);
    }

    #[test]
    fn sector_columns_reproduce_wall() {
        for (n, spec) in [
            (32, BoundarySpec::periodic(4, frac("1/2")).unwrap()),
            (40, BoundarySpec::single_arc(frac("1/6")).unwrap()),
            (64, BoundarySpec::periodic(32, frac("1/32")).unwrap()),
        ] {
            let g = PolarGrid::new(n, &spec).unwrap();
            let full = g.wall_full();
            for (j, w) in full.iter().enumerate() {
                assert_eq!(g.wall()[g.sector_column(j)], *w, "{} j={j}", spec.label());
            }
        }
    }

    #[test]
    fn cell_volumes_cover_disk() {
        let spec = BoundarySpec::periodic(32, frac("1/64")).unwrap();
        let g = PolarGrid::new(64, &spec).unwrap();
        let area: f64 = (0..g.n_r()).map(|i| g.cell_volume(i)).sum::<f64>() * g.n_theta() as f64;
        assert!((area - PI).abs() < 1e-12);
    }
}
