use std::f64::consts::PI;
use std::fmt::Display;
use std::path::PathBuf;

use crate::bpm::{GapRange, Launch, SlabGeometry, DEFAULT_CROSSTALK_THRESHOLD};
use crate::correlation::{ChshVariant, DEFAULT_GRID_STEP};
use crate::ensemble::PhaseDistribution;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Chsh,
    Ghz,
    Nfield,
    Metrology,
    Density,
    BpmFig1,
    BpmModes,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Chsh,
        ExperimentKind::Ghz,
        ExperimentKind::Nfield,
        ExperimentKind::Metrology,
        ExperimentKind::Density,
        ExperimentKind::BpmFig1,
        ExperimentKind::BpmModes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Chsh => "chsh",
            ExperimentKind::Ghz => "ghz",
            ExperimentKind::Nfield => "nfield",
            ExperimentKind::Metrology => "metrology",
            ExperimentKind::Density => "density",
            ExperimentKind::BpmFig1 => "bpm-fig1",
            ExperimentKind::BpmModes => "bpm-modes",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_bpm(self) -> bool {
        matches!(self, ExperimentKind::BpmFig1 | ExperimentKind::BpmModes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EvalMode {
    Analytic,
    #[default]
    MonteCarlo,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Analytic => "analytic",
            EvalMode::MonteCarlo => "mc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshBlock {
    pub variant: ChshVariant,
    pub grid_step: f64,
    /// Independent phase sequences averaged in Monte-Carlo mode.
    pub sequences: usize,
    /// Optional fixed `[θ₁, θ₁′, θ₂, θ₂′]` evaluated alongside the optimum.
    pub settings: Option<[f64; 4]>,
}

impl Default for ChshBlock {
    fn default() -> Self {
        ChshBlock {
            variant: ChshVariant::Sum,
            grid_step: DEFAULT_GRID_STEP,
            sequences: 20,
            settings: None,
        }
    }
}

/// Fixed `θ₁, θ₂` with `θ₃` swept over `points` angles in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhzBlock {
    pub theta1: f64,
    pub theta2: f64,
    pub points: usize,
}

impl Default for GhzBlock {
    fn default() -> Self {
        GhzBlock {
            theta1: 0.0,
            theta2: 0.0,
            points: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NfieldBlock {
    pub n_min: u32,
    pub n_max: u32,
    pub points: usize,
    /// Scale the product by `2^{N−1}`.
    pub normalize: bool,
}

impl Default for NfieldBlock {
    fn default() -> Self {
        NfieldBlock {
            n_min: 1,
            n_max: 6,
            points: 64,
            normalize: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub enum ThetaChoice {
    /// `θ* = π/(6N)` for each `N`.
    #[default]
    Optimal,
    Grid(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetrologyBlock {
    pub n_min: u32,
    pub n_max: u32,
    pub theta: ThetaChoice,
}

impl Default for MetrologyBlock {
    fn default() -> Self {
        MetrologyBlock {
            n_min: 1,
            n_max: 8,
            theta: ThetaChoice::Optimal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BpmBlock {
    pub n_core: f64,
    pub n_clad: f64,
    /// Vacuum wavelength, m.
    pub wavelength: f64,
    /// Core width follows from this V number.
    pub v_number: f64,
    pub gaps: GapRange,
    pub crosstalk_threshold: f64,
    pub nx: usize,
    pub dz: f64,
    pub snapshots: usize,
    pub launch: Launch,
}

impl Default for BpmBlock {
    fn default() -> Self {
        BpmBlock {
            n_core: 1.46,
            n_clad: 1.45,
            wavelength: 1.55e-6,
            v_number: 2.5,
            gaps: GapRange::default(),
            crosstalk_threshold: DEFAULT_CROSSTALK_THRESHOLD,
            nx: 1024,
            dz: 5e-6,
            snapshots: 100,
            launch: Launch::Mixed,
        }
    }
}

impl BpmBlock {
    pub fn geometry(&self) -> Result<SlabGeometry> {
        SlabGeometry::with_v_number(self.n_core, self.n_clad, self.wavelength, self.v_number)
    }
}

/// A fully resolved experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub trials: u64,
    pub seed: u64,
    pub granularity: PhaseDistribution,
    pub mode: EvalMode,
    pub output_dir: PathBuf,
    pub chsh: ChshBlock,
    pub ghz: GhzBlock,
    pub nfield: NfieldBlock,
    pub metrology: MetrologyBlock,
    pub bpm: BpmBlock,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            trials: 100_000,
            seed: 0,
            granularity: PhaseDistribution::ContinuousUniform,
            mode: EvalMode::MonteCarlo,
            output_dir: PathBuf::from("out"),
            chsh: ChshBlock::default(),
            ghz: GhzBlock::default(),
            nfield: NfieldBlock::default(),
            metrology: MetrologyBlock::default(),
            bpm: BpmBlock::default(),
        }
    }

    /// Sections in render order; the top level is `""`.
    pub fn entries(&self) -> Vec<(&'static str, Vec<(&'static str, String)>)> {
        let mut chsh = vec![
            ("variant", self.chsh.variant.name().to_string()),
            ("grid_step", fmt(self.chsh.grid_step)),
            ("sequences", self.chsh.sequences.to_string()),
        ];
        if let Some(s) = self.chsh.settings {
            for (k, v) in ["theta1", "theta1p", "theta2", "theta2p"].into_iter().zip(s) {
                chsh.push((k, fmt(v)));
            }
        }
        let b = &self.bpm;
        vec![
            (
                "",
                vec![
                    ("experiment", self.experiment.name().to_string()),
                    ("trials", self.trials.to_string()),
                    ("seed", self.seed.to_string()),
                    ("granularity", render_granularity(self.granularity)),
                    ("mode", self.mode.name().to_string()),
                    ("output_dir", self.output_dir.display().to_string()),
                ],
            ),
            ("chsh", chsh),
            (
                "ghz",
                vec![
                    ("theta1", fmt(self.ghz.theta1)),
                    ("theta2", fmt(self.ghz.theta2)),
                    ("points", self.ghz.points.to_string()),
                ],
            ),
            (
                "nfield",
                vec![
                    ("n_min", self.nfield.n_min.to_string()),
                    ("n_max", self.nfield.n_max.to_string()),
                    ("points", self.nfield.points.to_string()),
                    ("normalize", self.nfield.normalize.to_string()),
                ],
            ),
            (
                "metrology",
                vec![
                    ("n_min", self.metrology.n_min.to_string()),
                    ("n_max", self.metrology.n_max.to_string()),
                    (
                        "theta",
                        match &self.metrology.theta {
                            ThetaChoice::Optimal => "optimal".to_string(),
                            ThetaChoice::Grid(v) => v.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(", "),
                        },
                    ),
                ],
            ),
            (
                "bpm",
                vec![
                    ("n_core", fmt(b.n_core)),
                    ("n_clad", fmt(b.n_clad)),
                    ("wavelength", fmt(b.wavelength)),
                    ("v_number", fmt(b.v_number)),
                    ("gap_min", fmt(b.gaps.min)),
                    ("gap_max", fmt(b.gaps.max)),
                    ("gap_step", fmt(b.gaps.step)),
                    ("crosstalk_threshold", fmt(b.crosstalk_threshold)),
                    ("nx", b.nx.to_string()),
                    ("dz", fmt(b.dz)),
                    ("snapshots", b.snapshots.to_string()),
                    ("launch", b.launch.name().to_string()),
                ],
            ),
        ]
    }

    /// Text form accepted by [`parse_config`].
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (section, keys) in self.entries() {
            if !section.is_empty() {
                out.push_str(&format!("\n[{section}]\n"));
            }
            for (k, v) in keys {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn render_granularity(d: PhaseDistribution) -> String {
    match d {
        PhaseDistribution::ContinuousUniform => "continuous".to_string(),
        PhaseDistribution::DiscreteUniform { levels } => format!("discrete {levels}"),
    }
}

type Parsed<T> = std::result::Result<T, String>;

fn parse_number<T: std::str::FromStr>(s: &str) -> Parsed<T>
where
    T::Err: Display,
{
    s.parse::<T>().map_err(|e| format!("malformed number `{s}`: {e}"))
}

fn parse_real(s: &str) -> Parsed<f64> {
    let x: f64 = parse_number(s)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{s}` is not a finite number"))
    }
}

fn parse_ratio(s: &str) -> Parsed<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b) = (parse_real(a.trim())?, parse_real(b.trim())?);
            if b == 0.0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            Ok(a / b)
        }
        None => parse_real(s),
    }
}

/// Angle in radians: a plain number, or a multiple of pi such as `12/46 pi`,
/// `0.25pi`, `-pi` or `pi/46`.
pub fn parse_angle(s: &str) -> Parsed<f64> {
    let t = s.trim();
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim_start()),
        None => (1.0, t),
    };
    for pi in ["pi", "π"] {
        if let Some(coef) = body.strip_suffix(pi) {
            let coef = coef.trim();
            let c = if coef.is_empty() { 1.0 } else { parse_ratio(coef.trim_end_matches('*').trim())? };
            return Ok(sign * c * PI);
        }
        if let Some(den) = body.strip_prefix(pi).and_then(|r| r.trim_start().strip_prefix('/')) {
            let d = parse_real(den.trim())?;
            if d == 0.0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            return Ok(sign * PI / d);
        }
    }
    parse_ratio(t).map_err(|_| format!("malformed angle `{s}`"))
}

fn parse_bool(s: &str) -> Parsed<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn parse_granularity(s: &str) -> Parsed<PhaseDistribution> {
    let mut words = s.split_whitespace();
    match (words.next(), words.next(), words.next()) {
        (Some("continuous"), None, None) => Ok(PhaseDistribution::ContinuousUniform),
        (Some("discrete"), Some(g), None) => {
            let levels: u32 = parse_number(g)?;
            PhaseDistribution::discrete(levels).map_err(|e| e.to_string())
        }
        _ => Err(format!("expected `continuous` or `discrete G`, got `{s}`")),
    }
}

struct Entry<'a> {
    key: &'a str,
    value: &'a str,
    line: usize,
    used: bool,
}

struct Section<'a> {
    name: &'a str,
    entries: Vec<Entry<'a>>,
}

impl<'a> Section<'a> {
    fn take<T>(&mut self, key: &str, parse: impl Fn(&str) -> Parsed<T>) -> Result<Option<(T, usize)>> {
        match self.entries.iter_mut().find(|e| e.key == key) {
            None => Ok(None),
            Some(e) => {
                e.used = true;
                let line = e.line;
                parse(e.value)
                    .map(|v| Some((v, line)))
                    .map_err(|message| Error::Config {
                        line,
                        message: format!("{}: {message}", self.qualified(key)),
                    })
            }
        }
    }

    fn set<T>(&mut self, key: &str, slot: &mut T, parse: impl Fn(&str) -> Parsed<T>) -> Result<Option<usize>> {
        Ok(self.take(key, parse)?.map(|(v, line)| {
            *slot = v;
            line
        }))
    }

    fn qualified(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn finish(self) -> Result<()> {
        match self.entries.iter().find(|e| !e.used) {
            Some(e) => Err(Error::Config {
                line: e.line,
                message: format!("unknown key `{}`", self.qualified(e.key)),
            }),
            None => Ok(()),
        }
    }
}

fn check(ok: bool, line: Option<usize>, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config {
            line: line.unwrap_or(0),
            message: message.into(),
        })
    }
}

const SECTIONS: [&str; 6] = ["", "chsh", "ghz", "nfield", "metrology", "bpm"];

/// Parse `key = value` lines grouped under `[section]` headers.
///
/// Blank lines and lines starting with `#` are ignored. Keys before the
/// first header belong to the top level, where `experiment` is required.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut sections: Vec<Section> = SECTIONS
        .iter()
        .map(|&name| Section {
            name,
            entries: Vec::new(),
        })
        .collect();
    let mut current = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(name) = t.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config {
                    line,
                    message: format!("malformed section header `{t}`"),
                })?
                .trim();
            current = SECTIONS
                .iter()
                .position(|s| !s.is_empty() && *s == name)
                .ok_or_else(|| Error::Config {
                    line,
                    message: format!("unknown section `[{name}]`"),
                })?;
            continue;
        }
        let (key, value) = t.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got `{t}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Config {
                line,
                message: "empty key".into(),
            });
        }
        let section = &mut sections[current];
        if let Some(prev) = section.entries.iter().find(|e| e.key == key) {
            return Err(Error::Config {
                line,
                message: format!("duplicate key `{}` (first set on line {})", section.qualified(key), prev.line),
            });
        }
        section.entries.push(Entry {
            key,
            value,
            line,
            used: false,
        });
    }

    let mut it = sections.into_iter();
    let mut top = it.next().expect("top level");
    let (experiment, _) = top
        .take("experiment", |s| {
            ExperimentKind::from_name(s).ok_or_else(|| {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown experiment `{s}`, expected one of {}", names.join(", "))
            })
        })?
        .ok_or_else(|| Error::Config {
            line: 0,
            message: "missing required key `experiment`".into(),
        })?;
    let mut c = ExperimentConfig::new(experiment);
    let line = top.set("trials", &mut c.trials, parse_number)?;
    check(c.trials >= 2, line, "trials must be at least 2")?;
    top.set("seed", &mut c.seed, parse_number)?;
    top.set("granularity", &mut c.granularity, parse_granularity)?;
    top.set("mode", &mut c.mode, |s| match s {
        "analytic" => Ok(EvalMode::Analytic),
        "mc" => Ok(EvalMode::MonteCarlo),
        _ => Err(format!("expected `analytic` or `mc`, got `{s}`")),
    })?;
    let line = top.set("output_dir", &mut c.output_dir, |s| Ok(PathBuf::from(s)))?;
    check(!c.output_dir.as_os_str().is_empty(), line, "output_dir is empty")?;
    top.finish()?;

    let mut s = it.next().expect("chsh");
    s.set("variant", &mut c.chsh.variant, |v| {
        ChshVariant::from_name(v).ok_or_else(|| format!("unknown variant `{v}`"))
    })?;
    let line = s.set("grid_step", &mut c.chsh.grid_step, parse_angle)?;
    check(c.chsh.grid_step > 0.0, line, "chsh.grid_step must be positive")?;
    let line = s.set("sequences", &mut c.chsh.sequences, parse_number)?;
    check(c.chsh.sequences >= 2, line, "chsh.sequences must be at least 2")?;
    let mut angles = [None; 4];
    let mut last_line = None;
    for (slot, key) in angles.iter_mut().zip(["theta1", "theta1p", "theta2", "theta2p"]) {
        if let Some((v, line)) = s.take(key, parse_angle)? {
            *slot = Some(v);
            last_line = Some(line);
        }
    }
    match angles {
        [Some(a), Some(b), Some(cc), Some(d)] => c.chsh.settings = Some([a, b, cc, d]),
        [None, None, None, None] => {}
        _ => check(false, last_line, "chsh settings need all of theta1, theta1p, theta2, theta2p")?,
    }
    s.finish()?;

    let mut s = it.next().expect("ghz");
    s.set("theta1", &mut c.ghz.theta1, parse_angle)?;
    s.set("theta2", &mut c.ghz.theta2, parse_angle)?;
    let line = s.set("points", &mut c.ghz.points, parse_number)?;
    check(c.ghz.points >= 1, line, "ghz.points must be at least 1")?;
    s.finish()?;

    let mut s = it.next().expect("nfield");
    s.set("n_min", &mut c.nfield.n_min, parse_number)?;
    let line = s.set("n_max", &mut c.nfield.n_max, parse_number)?;
    check(
        c.nfield.n_min >= 1 && c.nfield.n_min <= c.nfield.n_max,
        line,
        "nfield needs 1 <= n_min <= n_max",
    )?;
    let line = s.set("points", &mut c.nfield.points, parse_number)?;
    check(c.nfield.points >= 3, line, "nfield.points must be at least 3")?;
    s.set("normalize", &mut c.nfield.normalize, parse_bool)?;
    s.finish()?;

    let mut s = it.next().expect("metrology");
    s.set("n_min", &mut c.metrology.n_min, parse_number)?;
    let line = s.set("n_max", &mut c.metrology.n_max, parse_number)?;
    check(
        c.metrology.n_min >= 1 && c.metrology.n_min <= c.metrology.n_max,
        line,
        "metrology needs 1 <= n_min <= n_max",
    )?;
    s.set("theta", &mut c.metrology.theta, |v| {
        if v == "optimal" {
            return Ok(ThetaChoice::Optimal);
        }
        let list = v.split(',').map(parse_angle).collect::<Parsed<Vec<f64>>>()?;
        Ok(ThetaChoice::Grid(list))
    })?;
    s.finish()?;

    let mut s = it.next().expect("bpm");
    let b = &mut c.bpm;
    let lines = [
        s.set("n_core", &mut b.n_core, parse_real)?,
        s.set("n_clad", &mut b.n_clad, parse_real)?,
        s.set("wavelength", &mut b.wavelength, parse_real)?,
        s.set("v_number", &mut b.v_number, parse_real)?,
    ];
    let geom_line = lines.iter().flatten().max().copied();
    if let Err(e) = b.geometry() {
        check(false, geom_line, format!("bpm geometry: {e}"))?;
    }
    s.set("gap_min", &mut b.gaps.min, parse_real)?;
    s.set("gap_max", &mut b.gaps.max, parse_real)?;
    let line = s.set("gap_step", &mut b.gaps.step, parse_real)?;
    if let Err(e) = b.gaps.gaps() {
        check(false, line, format!("bpm gaps: {e}"))?;
    }
    let line = s.set("crosstalk_threshold", &mut b.crosstalk_threshold, parse_real)?;
    check(
        (0.0..=1.0).contains(&b.crosstalk_threshold),
        line,
        "bpm.crosstalk_threshold must lie in [0, 1]",
    )?;
    let line = s.set("nx", &mut b.nx, parse_number)?;
    check(b.nx >= 128, line, "bpm.nx must be at least 128")?;
    let line = s.set("dz", &mut b.dz, parse_real)?;
    check(b.dz > 0.0, line, "bpm.dz must be positive")?;
    let line = s.set("snapshots", &mut b.snapshots, parse_number)?;
    check(b.snapshots >= 1, line, "bpm.snapshots must be at least 1")?;
    s.set("launch", &mut b.launch, |v| {
        Launch::from_name(v).ok_or_else(|| format!("expected mixed, te0 or te1, got `{v}`"))
    })?;
    s.finish()?;
    Ok(c)
}
