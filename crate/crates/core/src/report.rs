//! Run configuration and the machine-readable report.
//!
//! A configuration file is TOML with one table per concern; every key has
//! a default, unknown keys are errors, and command-line flags are applied
//! on top of the parsed file by the caller.
//!
//! ```toml
//! seed = 7
//!
//! [patch]
//! kind = "F12"
//! a = 1.2
//!
//! [sectors]
//! select = [24, 26]
//!
//! [criterion]
//! a = 1.4
//! gamma_f = 0.145
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constants::{ConstantsRegistry, PUBLISHED_GAMMA_F, PUBLISHED_WEIGHT, VALIDATION_HEX_WEIGHT};
use crate::criterion::{evaluate_criterion_with_source, verify_cover_counts, CoverCounts, CriterionResult};
use crate::eigensolver::LanczosConfig;
use crate::error::{Error, Result};
use crate::lattice::{build_patch_12, build_patch_f, build_ring, build_torus, Patch};
use crate::sector::{expected_kernel_dimension, sector_table, HamiltonianSpec, SectorBasis, SectorRow};
use crate::spectrum::{
    all_sectors, kernel_residual, sector_scan_partial, GapTable, ScanConfig, SpectrumResult, SpinResolution,
    DEFAULT_PENALTY, ZERO_MODE_TOLERANCE,
};
use crate::spin::projector_spin3_polynomial;
use crate::vbs::{boundary_multiplicities, kernel_basis, MultiplicityTable};

/// Patch shapes selectable from the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatchChoice {
    /// The 36-site patch used by the criterion.
    F,
    /// The 12-site decorated hexagon.
    F12,
    /// The bare 6-site hexagon.
    #[serde(rename = "ring")]
    Ring,
}

impl FromStr for PatchChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" | "f" => Ok(PatchChoice::F),
            "F12" | "f12" => Ok(PatchChoice::F12),
            "ring" | "Ring" => Ok(PatchChoice::Ring),
            other => Err(Error::Config(format!(
                "unknown patch kind {other:?} (expected F, F12 or ring)"
            ))),
        }
    }
}

impl fmt::Display for PatchChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatchChoice::F => "F",
            PatchChoice::F12 => "F12",
            PatchChoice::Ring => "ring",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatchConfig {
    pub kind: PatchChoice,
    /// Weight of the adjustable edges (central hexagon for F12, uniform for the ring).
    pub a: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            kind: PatchChoice::F12,
            a: VALIDATION_HEX_WEIGHT,
        }
    }
}

impl PatchConfig {
    pub fn build(&self) -> Result<Patch> {
        match self.kind {
            PatchChoice::F => build_patch_f(self.a),
            PatchChoice::F12 => build_patch_12(self.a),
            PatchChoice::Ring => build_ring(self.a),
        }
    }
}

/// `"all"` or an explicit list of `two_m` values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSelection", into = "RawSelection")]
pub enum SectorSelection {
    All,
    List(Vec<i32>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSelection {
    Word(String),
    List(Vec<i32>),
}

impl TryFrom<RawSelection> for SectorSelection {
    type Error = String;

    fn try_from(raw: RawSelection) -> std::result::Result<Self, String> {
        match raw {
            RawSelection::Word(w) if w == "all" => Ok(SectorSelection::All),
            RawSelection::Word(w) => Err(format!("sector selection must be \"all\" or a list, got {w:?}")),
            RawSelection::List(v) => Ok(SectorSelection::List(v)),
        }
    }
}

impl From<SectorSelection> for RawSelection {
    fn from(s: SectorSelection) -> Self {
        match s {
            SectorSelection::All => RawSelection::Word("all".into()),
            SectorSelection::List(v) => RawSelection::List(v),
        }
    }
}

impl FromStr for SectorSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(SectorSelection::All);
        }
        let list = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                t.trim()
                    .parse::<i32>()
                    .map_err(|_| Error::Config(format!("bad sector value {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SectorSelection::List(list))
    }
}

impl SectorSelection {
    pub fn resolve(&self, patch: &Patch) -> Result<Vec<i32>> {
        match self {
            SectorSelection::All => Ok(all_sectors(patch)),
            SectorSelection::List(v) if v.is_empty() => Err(Error::Config("empty sector selection".into())),
            SectorSelection::List(v) => {
                let n = patch.num_sites() as i32;
                for &t in v {
                    if t.abs() > 3 * n || (3 * n - t) % 2 != 0 {
                        return Err(Error::Config(format!("sector 2m = {t} does not exist for {n} sites")));
                    }
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectorConfig {
    pub select: SectorSelection,
}

impl Default for SectorConfig {
    fn default() -> Self {
        Self {
            select: SectorSelection::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolutionChoice {
    Lowest,
    HighestWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub residual_tolerance: f64,
    pub eigenpairs: usize,
    pub max_basis: usize,
    pub keep: usize,
    pub resolution: ResolutionChoice,
    pub penalty: f64,
    pub check_kernel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let l = LanczosConfig::default();
        let scan = ScanConfig::default();
        let penalty = match scan.resolution {
            SpinResolution::HighestWeight { penalty } => penalty,
            SpinResolution::Lowest => DEFAULT_PENALTY,
        };
        Self {
            max_iterations: l.max_iterations,
            tolerance: l.tolerance,
            residual_tolerance: l.residual_tolerance,
            eigenpairs: l.eigenpairs,
            max_basis: l.max_basis,
            keep: l.keep,
            resolution: ResolutionChoice::HighestWeight,
            penalty,
            check_kernel: scan.check_kernel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaSource {
    /// Use `criterion.gamma_f` as given.
    Constant,
    /// Use the smallest gap of a scan over the configured patch.
    Computed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriterionConfig {
    pub a: f64,
    pub gamma_f: f64,
    pub gamma_f_source: GammaSource,
    /// Torus used for the cover count.
    pub m1: usize,
    pub m2: usize,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self {
            a: PUBLISHED_WEIGHT,
            gamma_f: PUBLISHED_GAMMA_F,
            gamma_f_source: GammaSource::Constant,
            m1: 12,
            m2: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TablesConfig {
    /// Number of dangling spin-1s for the multiplicity table.
    pub n: usize,
}

impl Default for TablesConfig {
    fn default() -> Self {
        Self { n: 12 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub report: Option<String>,
    pub spectra: Option<String>,
    pub gaps: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<String>,
    pub seed: u64,
    /// Include a gap scan in the combined report.
    pub report_gap: bool,
    pub patch: PatchConfig,
    pub sectors: SectorConfig,
    pub solver: SolverConfig,
    pub criterion: CriterionConfig,
    pub tables: TablesConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: LanczosConfig::default().seed,
            report_gap: false,
            patch: PatchConfig::default(),
            sectors: SectorConfig::default(),
            solver: SolverConfig::default(),
            criterion: CriterionConfig::default(),
            tables: TablesConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scan_config(&self) -> ScanConfig {
        let s = &self.solver;
        ScanConfig {
            lanczos: LanczosConfig {
                max_iterations: s.max_iterations,
                tolerance: s.tolerance,
                residual_tolerance: s.residual_tolerance,
                eigenpairs: s.eigenpairs,
                max_basis: s.max_basis,
                keep: s.keep,
                seed: self.seed,
            },
            resolution: match s.resolution {
                ResolutionChoice::Lowest => SpinResolution::Lowest,
                ResolutionChoice::HighestWeight => SpinResolution::HighestWeight { penalty: s.penalty },
            },
            check_kernel: s.check_kernel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scan_config()
            .lanczos
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.criterion.a >= 1.0) {
            return Err(Error::Config(format!(
                "criterion weight must satisfy a >= 1, got {}",
                self.criterion.a
            )));
        }
        if self.solver.resolution == ResolutionChoice::HighestWeight && !(self.solver.penalty > 0.0) {
            return Err(Error::Config("penalty must be positive".into()));
        }
        if self.tables.n > 64 {
            return Err(Error::Config(format!("tables.n must be <= 64, got {}", self.tables.n)));
        }
        Ok(())
    }
}

/// Everything a command produced, plus enough context to rerun it.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub constants: ConstantsRegistry,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub spectra: Vec<SpectrumResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_table: Option<GapTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplicities: Option<MultiplicityTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sector_table: Option<Vec<SectorRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover_counts: Option<CoverCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<CriterionResult>,
    /// False when any requested piece is missing or failed.
    pub certifying: bool,
    pub timings: BTreeMap<String, f64>,
    pub errors: Vec<String>,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let mut config = config.clone();
        config.command = Some(command.to_string());
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            constants: ConstantsRegistry::current(),
            spectra: Vec::new(),
            gap_table: None,
            multiplicities: None,
            sector_table: None,
            kernel: None,
            cover_counts: None,
            criterion: None,
            certifying: true,
            timings: BTreeMap::new(),
            errors: Vec::new(),
        }
    }

    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }

    /// Process exit status: nonzero iff an error was recorded.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.has_errors())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn fail(&mut self, message: String) {
        self.errors.push(message);
        self.certifying = false;
    }

    fn time(&mut self, key: &str, started: Instant) {
        self.timings.insert(key.to_string(), started.elapsed().as_secs_f64());
    }

    /// Writes the report and any delimited tables named in the output config.
    pub fn write_outputs(&self) -> Result<()> {
        let out = &self.config.output;
        if let Some(path) = &out.report {
            std::fs::write(path, self.to_json()?)?;
        }
        if let Some(path) = &out.spectra {
            std::fs::write(path, crate::spectrum::spectra_csv(&self.spectra))?;
        }
        if let (Some(path), Some(table)) = (&out.gaps, &self.gap_table) {
            std::fs::write(path, table.to_csv())?;
        }
        Ok(())
    }
}

fn run_gap(report: &mut Report, config: &RunConfig) {
    let started = Instant::now();
    let patch = match config.patch.build() {
        Ok(p) => p,
        Err(e) => return report.fail(format!("patch: {e}")),
    };
    let sectors = match config.sectors.select.resolve(&patch) {
        Ok(s) => s,
        Err(e) => return report.fail(e.to_string()),
    };
    match sector_scan_partial(&patch, &sectors, &config.scan_config(), |_| {}) {
        Ok(scan) => {
            for (two_m, message) in &scan.failures {
                report.fail(format!("sector 2m = {two_m}: {message}"));
            }
            for s in &scan.spectra {
                if s.extra_zero_modes > 0 {
                    report.fail(format!(
                        "sector 2m = {}: {} zero modes beyond the valence-bond states",
                        s.two_m, s.extra_zero_modes
                    ));
                }
            }
            report.spectra = scan.spectra;
            report.gap_table = Some(scan.table);
        }
        Err(e) => report.fail(e.to_string()),
    }
    report.time("gap", started);
}

/// Sector scan of the configured patch.
pub fn cmd_gap(config: &RunConfig) -> Report {
    let mut report = Report::new("gap", config);
    if let Err(e) = config.validate() {
        report.fail(e.to_string());
        return report;
    }
    run_gap(&mut report, config);
    report
}

fn run_certify(report: &mut Report, config: &RunConfig) {
    let c = &config.criterion;
    let started = Instant::now();
    let counts = build_torus(c.m1, c.m2).and_then(|t| verify_cover_counts(&t, c.a));
    report.time("cover_counts", started);
    match counts {
        Ok(counts) => report.cover_counts = Some(counts),
        Err(e) => return report.fail(format!("cover counts: {e}")),
    }

    let (gamma, source) = match c.gamma_f_source {
        GammaSource::Constant => {
            let source = if c.gamma_f == PUBLISHED_GAMMA_F {
                "constant: published lower bound on the 36-site patch gap at a = 1.4".to_string()
            } else {
                "constant: user supplied".to_string()
            };
            (c.gamma_f, source)
        }
        GammaSource::Computed => {
            if report.gap_table.is_none() {
                run_gap(report, config);
            }
            match report.gap_table.as_ref().and_then(|t| t.gamma) {
                Some(g) => (
                    g,
                    format!(
                        "computed: smallest gap of patch {} with a = {} (not the 36-site patch)",
                        config.patch.kind, config.patch.a
                    ),
                ),
                None => return report.fail("computed gap unavailable".into()),
            }
        }
    };
    match evaluate_criterion_with_source(c.a, gamma, &source) {
        Ok(r) => {
            if !r.certified {
                report.certifying = false;
            }
            report.criterion = Some(r);
        }
        Err(e) => report.fail(e.to_string()),
    }
}

/// Cover counts on the configured torus, then the gap bound.
pub fn cmd_certify(config: &RunConfig) -> Report {
    let mut report = Report::new("criterion", config);
    if let Err(e) = config.validate() {
        report.fail(e.to_string());
        return report;
    }
    run_certify(&mut report, config);
    report
}

fn run_tables(report: &mut Report, config: &RunConfig) {
    let started = Instant::now();
    report.multiplicities = Some(boundary_multiplicities(config.tables.n));
    match config.patch.build() {
        Ok(p) => report.sector_table = Some(sector_table(&p)),
        Err(e) => report.fail(format!("patch: {e}")),
    }
    report.time("tables", started);
}

/// Boundary multiplicities and sector dimensions.
pub fn cmd_tables(config: &RunConfig) -> Report {
    let mut report = Report::new("degeneracy", config);
    if let Err(e) = config.validate() {
        report.fail(e.to_string());
        return report;
    }
    run_tables(&mut report, config);
    report
}

/// Valence-bond ground states of one sector and how well they are annihilated.
#[derive(Debug, Clone, Serialize)]
pub struct KernelSummary {
    pub two_m: i32,
    pub dimension: usize,
    pub states: usize,
    pub expected: u64,
    pub gram_condition: f64,
    /// Largest `|H v|` over the orthonormalized states.
    pub max_residual: f64,
    pub orthonormality_defect: f64,
}

pub fn kernel_summary(patch: &Patch, two_m: i32) -> Result<KernelSummary> {
    let basis = SectorBasis::new(patch.num_sites(), two_m)?;
    let kernel = kernel_basis(patch, &basis)?;
    let spec = HamiltonianSpec::new(patch, projector_spin3_polynomial());
    let h = spec.on(&basis);
    Ok(KernelSummary {
        two_m,
        dimension: basis.dim(),
        states: kernel.len(),
        expected: expected_kernel_dimension(patch, two_m),
        gram_condition: kernel.gram_condition,
        max_residual: kernel_residual(&h, &kernel.vectors),
        orthonormality_defect: kernel.vectors.orthonormality_defect(),
    })
}

/// Builds and checks the valence-bond states of one sector.
pub fn cmd_vbs(config: &RunConfig, two_m: i32) -> Report {
    let mut report = Report::new("vbs", config);
    let started = Instant::now();
    match config.patch.build().and_then(|p| kernel_summary(&p, two_m)) {
        Ok(k) => {
            if k.states as u64 != k.expected || k.max_residual > ZERO_MODE_TOLERANCE {
                report.fail(format!(
                    "sector 2m = {two_m}: {} states, {} expected, residual {:.3e}",
                    k.states, k.expected, k.max_residual
                ));
            }
            report.kernel = Some(k);
        }
        Err(e) => report.fail(e.to_string()),
    }
    report.time("vbs", started);
    report
}

/// Tables, optional gap scan, cover counts and the bound in one document.
pub fn cmd_report(config: &RunConfig) -> Report {
    let mut report = Report::new("report", config);
    if let Err(e) = config.validate() {
        report.fail(e.to_string());
        return report;
    }
    run_tables(&mut report, config);
    if config.report_gap {
        run_gap(&mut report, config);
    }
    run_certify(&mut report, config);
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = c.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_and_unknown_keys() {
        let c = RunConfig::from_toml_str("seed = 3\n[patch]\nkind = \"ring\"\n[sectors]\nselect = [0, 2]\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.patch.kind, PatchChoice::Ring);
        assert_eq!(c.sectors.select, SectorSelection::List(vec![0, 2]));
        assert_eq!(c.solver, SolverConfig::default());
        assert!(RunConfig::from_toml_str("[patch]\nweight = 2\n").is_err());
        assert!(RunConfig::from_toml_str("colour = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[sectors]\nselect = \"some\"\n").is_err());
    }

    #[test]
    fn sector_selection_parsing() {
        assert_eq!("all".parse::<SectorSelection>().unwrap(), SectorSelection::All);
        assert_eq!(
            "0, 2,4".parse::<SectorSelection>().unwrap(),
            SectorSelection::List(vec![0, 2, 4])
        );
        let ring = build_ring(1.0).unwrap();
        assert!(SectorSelection::List(vec![]).resolve(&ring).is_err());
        assert!(SectorSelection::List(vec![1]).resolve(&ring).is_err());
        assert!(SectorSelection::List(vec![20]).resolve(&ring).is_err());
    }

    #[test]
    fn certify_defaults() {
        let r = cmd_certify(&RunConfig::default());
        assert!(r.errors.is_empty(), "{:?}", r.errors);
        let c = r.criterion.clone().unwrap();
        assert!(c.certified && c.bound >= 0.00646);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn certify_rejections() {
        let mut cfg = RunConfig::default();
        cfg.criterion.gamma_f = 0.13;
        let r = cmd_certify(&cfg);
        assert!(!r.criterion.unwrap().certified);
        assert!(!r.certifying);
        cfg.criterion.a = 0.9;
        let r = cmd_certify(&cfg);
        assert!(r.has_errors());
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn empty_selection_does_no_work() {
        let mut cfg = RunConfig::default();
        cfg.sectors.select = SectorSelection::List(vec![]);
        let r = cmd_gap(&cfg);
        assert!(r.has_errors());
        assert!(r.spectra.is_empty());
    }

    #[test]
    fn ring_kernel() {
        let mut cfg = RunConfig::default();
        cfg.patch.kind = PatchChoice::Ring;
        cfg.patch.a = 1.0;
        let r = cmd_vbs(&cfg, 0);
        assert!(r.errors.is_empty(), "{:?}", r.errors);
        let k = r.kernel.unwrap();
        assert_eq!(k.states as u64, k.expected);
        assert!(k.max_residual < 1e-10);
    }

    #[test]
    fn tables_for_twelve() {
        let r = cmd_tables(&RunConfig::default());
        let m = r.multiplicities.unwrap();
        assert_eq!(m.mult[0], 4213);
        assert_eq!(r.sector_table.unwrap().len(), 37);
    }
}
