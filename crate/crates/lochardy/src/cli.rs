//! The `lochardy` command-line tool.
//!
//! Every subcommand writes its artifacts into the output directory (`--out`,
//! or `LOCHARDY_OUT`) together with a JSON report that embeds the parsed
//! arguments, the seed, the grid and the tool version. Exit status is `0` on
//! success, `2` when a validation check fails and `1` on any other error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lochardy_core::atoms::{coefficient_norm, synthesize, validate_atom, AtomicDecomposition};
use lochardy_core::czdecomp::{atomize, finite_atomize, AtomizeParams, Dilation};
use lochardy_core::duals::{
    bmo_norm, cmo_norm, generate_families, lip_norm, tilde_bmo_norm, CubeTable, DualNormResult, TildeMode,
};
use lochardy_core::exponent::{atom_moment_degree, build_exponent, ExponentField, ExponentSpec};
use lochardy_core::littlewood_paley::{build_filter_bank, discrete_square_function, hp_norm_parts, square_function};
use lochardy_core::luxemburg::{luxemburg_norm, norm};
use lochardy_core::maximal::{
    full_radius, grand_maximal, hl_maximal, local_nontangential_maximal, local_vertical_maximal, peetre_maximal,
    GrandMode, MaximalResult, TestFunctionDictionary,
};
use lochardy_core::operators::{
    boundedness_experiment, fractional_target, ExperimentInput, KernelKind, KernelSpec, OperatorHandle, Space,
};
use lochardy_core::profile::Bump;
use lochardy_core::{Cube, Grid, GridFunction};
use serde::Serialize;
use serde_json::{json, Value};

use crate::equivalence::{equivalence_table, EquivalenceConfig};
use crate::families::{self, FAMILIES};
use crate::formats::{read_atoms, read_gf, read_pspec, write_atoms, write_gf, write_json, write_text, GridInfo};
use crate::report::Report;

#[derive(Debug, Parser, Serialize)]
#[command(name = "lochardy", version, about = "Numerical experiments on local Hardy spaces with variable exponents")]
pub struct Cli {
    /// Directory receiving every output file.
    #[arg(long, global = true, env = "LOCHARDY_OUT", default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Seed recorded in every report and used by the randomised steps.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Luxemburg norm of a grid function.
    Norm(NormArgs),
    /// One of the maximal functions, written as a grid function.
    Maximal(MaximalArgs),
    /// Littlewood-Paley square function.
    Squarefn(SquarefnArgs),
    /// Littlewood-Paley quasi-norm of the local Hardy space.
    Hpnorm(HpnormArgs),
    /// Atomic decomposition through iterated Calderon-Zygmund splitting.
    Atomize(AtomizeArgs),
    /// Checks every atom of an `.atoms` file.
    Validate(ValidateArgs),
    /// Dual-side seminorms with their extremal cubes.
    Dualnorm(DualnormArgs),
    /// Boundedness ratios of an operator over a family of inputs.
    Operator(OperatorArgs),
    /// Ratio table of the eight maximal-function quasi-norms.
    Equivalence(EquivalenceArgs),
    /// Writes a deterministic test family.
    Generate(GenerateArgs),
}

/// An exponent file, or a bare number for a constant exponent.
fn exponent_arg(s: &str) -> Result<PSource, String> {
    match s.parse::<f64>() {
        Ok(p) if p > 0.0 && p.is_finite() => Ok(PSource::Constant(p)),
        Ok(p) => Err(format!("constant exponent must be positive and finite, got {p}")),
        Err(_) => Ok(PSource::File(PathBuf::from(s))),
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum PSource {
    Constant(f64),
    File(PathBuf),
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive and finite, got {v}"))
    }
}

/// A size exponent `q > 1`, or `inf`.
fn q_arg(s: &str) -> Result<f64, String> {
    if s == "inf" {
        return Ok(f64::INFINITY);
    }
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 1.0 {
        Ok(v)
    } else {
        Err(format!("must exceed 1, got {v}"))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct NormArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = exponent_arg)]
    pub p: PSource,
    /// Relative tolerance of the bisection.
    #[arg(long, default_value_t = 1e-12, value_parser = positive)]
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MaximalOpArg {
    Hl,
    Vert,
    Nontan,
    Peetre,
    Grand,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Vertical,
    Nontangential,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiusArg {
    Local,
    Full,
}

#[derive(Debug, Args, Serialize)]
pub struct MaximalArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub op: MaximalOpArg,
    /// Smoothing profile: `bump` or `bump:<radius>` (unit mass).
    #[arg(long, default_value = "bump")]
    pub psi: String,
    #[arg(long = "A", default_value_t = 2.0, value_parser = positive)]
    pub a: f64,
    #[arg(long = "B", default_value_t = 1.0, value_parser = positive)]
    pub b: f64,
    /// Derivative order of the grand-maximal dictionary.
    #[arg(long = "N", default_value_t = lochardy_core::maximal::DEFAULT_N)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Vertical)]
    pub mode: ModeArg,
    /// Support bound of the dictionary: `1` or the full radius.
    #[arg(long, value_enum, default_value_t = RadiusArg::Local)]
    pub radius: RadiusArg,
    #[arg(long)]
    pub doubled: bool,
    /// Also report the Luxemburg norm of the maximal function.
    #[arg(long, value_parser = exponent_arg)]
    pub p: Option<PSource>,
}

#[derive(Debug, Args, Serialize)]
pub struct SquarefnArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Finest band; defaults to the grid level.
    #[arg(long)]
    pub jmax: Option<u32>,
    /// Sample each band on its dyadic lattice.
    #[arg(long)]
    pub discrete: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct HpnormArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = exponent_arg)]
    pub p: PSource,
    #[arg(long)]
    pub jmax: Option<u32>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DilationArg {
    Standard,
    Wide,
}

#[derive(Debug, Args, Serialize)]
pub struct AtomizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = exponent_arg)]
    pub p: PSource,
    /// Atom size exponent, or `inf`.
    #[arg(long, default_value = "2", value_parser = q_arg)]
    pub q: f64,
    /// Moment degree; defaults to the smallest admissible one.
    #[arg(long)]
    pub d: Option<usize>,
    /// Remainder budget of the finite decomposition.
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    pub eps: f64,
    /// Write the finite decomposition instead of the full one.
    #[arg(long)]
    pub finite: bool,
    #[arg(long, value_enum, default_value_t = DilationArg::Wide)]
    pub dilation: DilationArg,
    /// Name of the `.atoms` file; defaults to the input's stem.
    #[arg(long)]
    pub stem: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub atoms: PathBuf,
    #[arg(long, value_parser = exponent_arg)]
    pub p: PSource,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DualSpace {
    Bmo,
    Lip,
    Cmo,
    Tbmo,
}

#[derive(Debug, Args, Serialize)]
pub struct DualnormArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = exponent_arg)]
    pub p: PSource,
    #[arg(long, value_enum)]
    pub space: DualSpace,
    #[arg(long, default_value = "2", value_parser = q_arg)]
    pub q: f64,
    #[arg(long)]
    pub d: Option<usize>,
    /// Add the half-shifted dyadic cubes to the search.
    #[arg(long)]
    pub shifted: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Hilbert,
    Bumps,
    Constant,
    Variable,
    Commutator,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceArg {
    Lp,
    Hp,
    Bmo,
}

#[derive(Debug, Args, Serialize)]
pub struct OperatorArgs {
    /// Library kernel; mutually exclusive with `--alpha`.
    #[arg(long, value_enum, conflicts_with = "alpha", required_unless_present = "alpha")]
    pub kernel: Option<KernelArg>,
    /// Enforce the vanishing-integral condition on small-cube atoms.
    #[arg(long)]
    pub corrected: bool,
    /// Order of the local fractional integral.
    #[arg(long, value_parser = positive)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = SpaceArg::Hp)]
    pub in_space: SpaceArg,
    /// Target space; the fractional integral defaults to the space its
    /// shifted exponent calls for.
    #[arg(long, value_enum)]
    pub out_space: Option<SpaceArg>,
    /// Directory of `.gf` functions and `.atoms` sets.
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long, value_parser = exponent_arg)]
    pub p: PSource,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long = "L", default_value_t = 4.0, value_parser = positive)]
    pub half_width: f64,
    #[arg(long = "J", default_value_t = 8)]
    pub level: u32,
}

impl GridArgs {
    fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.half_width, self.level).map_err(|e| anyhow!("--n/--L/--J: {e}"))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EquivalenceArgs {
    /// `standard20`, `random`, `atoms`, or a directory of `.gf` files.
    #[arg(long)]
    pub family: String,
    #[arg(long, value_parser = exponent_arg)]
    pub p: PSource,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub doubled: bool,
    #[arg(long = "N", default_value_t = lochardy_core::maximal::DEFAULT_N)]
    pub order: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub family: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

/// Result of a run that completed without an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    ValidationFailed,
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ValidationFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

struct Ctx<'a> {
    out: &'a Path,
    seed: u64,
    config: Value,
}

impl Ctx<'_> {
    fn report<T: Serialize>(&self, name: &str, command: &str, grid: &Grid, result: T) -> Result<()> {
        let r = Report::new(command, self.config.clone(), Some(self.seed), GridInfo::of(grid), result);
        write_json(&self.out.join(name), &r)?;
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let ctx = Ctx { out: &cli.out, seed: cli.seed, config: serde_json::to_value(cli)? };
    match &cli.command {
        Command::Norm(a) => cmd_norm(&ctx, a),
        Command::Maximal(a) => cmd_maximal(&ctx, a),
        Command::Squarefn(a) => cmd_squarefn(&ctx, a),
        Command::Hpnorm(a) => cmd_hpnorm(&ctx, a),
        Command::Atomize(a) => cmd_atomize(&ctx, a),
        Command::Validate(a) => cmd_validate(&ctx, a),
        Command::Dualnorm(a) => cmd_dualnorm(&ctx, a),
        Command::Operator(a) => cmd_operator(&ctx, a),
        Command::Equivalence(a) => cmd_equivalence(&ctx, a),
        Command::Generate(a) => cmd_generate(&ctx, a),
    }
}

fn exponent(src: &PSource, g: Grid) -> Result<ExponentField> {
    let spec = match src {
        PSource::Constant(p) => ExponentSpec::Constant(*p),
        PSource::File(path) => read_pspec(path)?.to_spec(),
    };
    build_exponent(&spec, g).map_err(|e| anyhow!("--p: {e}"))
}

fn load(path: &Path) -> Result<GridFunction> {
    Ok(read_gf(path)?)
}

fn cube_json(c: &Cube) -> Value {
    json!({ "center": &c.center[..c.n], "side": c.side })
}

fn cmd_norm(ctx: &Ctx, a: &NormArgs) -> Result<Outcome> {
    let f = load(&a.input)?;
    let g = *f.grid();
    let p = exponent(&a.p, g)?;
    let r = luxemburg_norm(&f, &p, a.tol)?;
    println!("{}", r.value);
    ctx.report(
        "norm.json",
        "norm",
        &g,
        json!({
            "value": r.value,
            "residual": r.residual,
            "iterations": r.iterations,
            "capped": r.capped,
            "p_minus": p.p_minus,
            "p_plus": p.p_plus,
        }),
    )?;
    Ok(Outcome::Success)
}

fn psi_profile(spec: &str, n: usize) -> Result<Bump> {
    let radius = match spec.split_once(':') {
        None if spec == "bump" => 1.0,
        Some(("bump", r)) => positive(r).map_err(|e| anyhow!("--psi: radius {e}"))?,
        _ => bail!("--psi: expected `bump` or `bump:<radius>`, got {spec:?}"),
    };
    Ok(Bump::unit_mass(n, radius))
}

fn dictionary(n: usize, order: usize, radius: RadiusArg, doubled: bool, half_width: f64) -> Result<TestFunctionDictionary> {
    let r = match radius {
        RadiusArg::Local => 1.0,
        RadiusArg::Full => full_radius(n),
    };
    let d = if doubled {
        TestFunctionDictionary::doubled(n, order, r, half_width)?
    } else {
        TestFunctionDictionary::new(n, order, r, half_width)?
    };
    Ok(d)
}

fn cmd_maximal(ctx: &Ctx, a: &MaximalArgs) -> Result<Outcome> {
    let f = load(&a.input)?;
    let g = *f.grid();
    let psi = psi_profile(&a.psi, g.dim())?;
    let res: MaximalResult = match a.op {
        MaximalOpArg::Hl => hl_maximal(&f),
        MaximalOpArg::Vert => local_vertical_maximal(&f, &psi),
        MaximalOpArg::Nontan => local_nontangential_maximal(&f, &psi),
        MaximalOpArg::Peetre => peetre_maximal(&f, &psi, a.a, a.b)?,
        MaximalOpArg::Grand => {
            let dict = dictionary(g.dim(), a.order, a.radius, a.doubled, g.half_width())?;
            let mode = match a.mode {
                ModeArg::Vertical => GrandMode::Vertical,
                ModeArg::Nontangential => GrandMode::NonTangential,
            };
            grand_maximal(&f, &dict, mode)?
        }
    };
    write_gf(&ctx.out.join("maximal.gf"), &res.values)?;
    let lux = match &a.p {
        Some(src) => Some(norm(&res.values, &exponent(src, g)?)?),
        None => None,
    };
    ctx.report(
        "maximal.json",
        "maximal",
        &g,
        json!({
            "op": format!("{:?}", res.op),
            "scales": res.scales,
            "dropped_scales": res.dropped,
            "dictionary": res.dictionary,
            "max": res.values.max_abs(),
            "norm": lux,
            "output": "maximal.gf",
        }),
    )?;
    Ok(Outcome::Success)
}

fn bank_for(g: Grid, jmax: Option<u32>) -> Result<lochardy_core::littlewood_paley::FilterBank> {
    Ok(build_filter_bank(g, jmax.unwrap_or(g.level()))?)
}

fn bank_json(bank: &lochardy_core::littlewood_paley::FilterBank) -> Value {
    json!({ "j_max": bank.j_max, "padded_side": bank.padded_side(), "unity_residual": bank.unity_residual })
}

fn cmd_squarefn(ctx: &Ctx, a: &SquarefnArgs) -> Result<Outcome> {
    let f = load(&a.input)?;
    let g = *f.grid();
    let bank = bank_for(g, a.jmax)?;
    let s = if a.discrete { discrete_square_function(&f, &bank)? } else { square_function(&f, &bank)? };
    write_gf(&ctx.out.join("squarefn.gf"), &s)?;
    ctx.report(
        "squarefn.json",
        "squarefn",
        &g,
        json!({ "bank": bank_json(&bank), "discrete": a.discrete, "l2": s.l2_norm(), "output": "squarefn.gf" }),
    )?;
    Ok(Outcome::Success)
}

fn cmd_hpnorm(ctx: &Ctx, a: &HpnormArgs) -> Result<Outcome> {
    let f = load(&a.input)?;
    let g = *f.grid();
    let p = exponent(&a.p, g)?;
    let bank = bank_for(g, a.jmax)?;
    let (low, high) = hp_norm_parts(&f, &p, &bank)?;
    println!("{}", low + high);
    ctx.report(
        "hpnorm.json",
        "hpnorm",
        &g,
        json!({ "value": low + high, "low_pass": low, "square_function": high, "bank": bank_json(&bank) }),
    )?;
    Ok(Outcome::Success)
}

fn relative_l2(f: &GridFunction, dec: &AtomicDecomposition) -> Result<f64> {
    let diff = synthesize(dec).sub(f)?.l2_norm();
    let base = f.l2_norm();
    Ok(if base > 0.0 { diff / base } else { diff })
}

fn cmd_atomize(ctx: &Ctx, a: &AtomizeArgs) -> Result<Outcome> {
    let f = load(&a.input)?;
    let g = *f.grid();
    let p = exponent(&a.p, g)?;
    let d = a.d.unwrap_or_else(|| atom_moment_degree(&p));
    let dilation = match a.dilation {
        DilationArg::Standard => Dilation::standard(g.dim()),
        DilationArg::Wide => Dilation::wide(),
    };
    let dict = TestFunctionDictionary::new(g.dim(), lochardy_core::maximal::DEFAULT_N, 1.0, g.half_width())?;
    let gmax = grand_maximal(&f, &dict, GrandMode::Vertical)?.values;
    let full = atomize(&f, &gmax, &p, AtomizeParams { q: a.q, d, dilation })?;
    let bank = build_filter_bank(g, g.level())?;
    let (low, high) = hp_norm_parts(&f, &p, &bank)?;
    let hp = low + high;
    let stem = match &a.stem {
        Some(s) => s.clone(),
        None => a
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| anyhow!("--input: no file name"))?,
    };
    let atoms_name = format!("{stem}.atoms");
    let mut result = json!({
        "atoms_file": atoms_name,
        "q": if a.q.is_finite() { json!(a.q) } else { json!("inf") },
        "d": d,
        "count": full.decomposition.len(),
        "reconstruction_error": relative_l2(&f, &full.decomposition)?,
        "coefficient_norm": coefficient_norm(&full.decomposition, &p, 1.0)?,
        "hp_norm": hp,
        "normalization": full.normalization,
        "k_range": [full.k_range.0, full.k_range.1],
        "nested": full.nested,
        "levels": full.levels.iter().map(|l| json!({
            "level": l.level,
            "cubes": l.cubes,
            "overlap": l.overlap,
            "side_ratio": l.side_ratio,
            "stars_nested": l.stars_nested,
            "correction_bound": l.correction_bound,
            "telescoping": l.telescoping,
            "good_ratio": l.good_ratio,
        })).collect::<Vec<_>>(),
    });
    let written = if a.finite {
        let fin = finite_atomize(&f, &full, &p, a.eps)?;
        result["finite"] = json!({
            "count": fin.decomposition.len(),
            "truncation": fin.truncation,
            "kept": fin.kept,
            "remainder_pieces": fin.remainder_pieces,
            "bumped": fin.bumped,
            "threshold": fin.threshold,
            "residual": fin.residual,
            "coefficient_norm": fin.coefficient_norm,
            "reconstruction_max": synthesize(&fin.decomposition).sub(&f)?.max_abs(),
        });
        fin.decomposition
    } else {
        full.decomposition
    };
    write_atoms(&ctx.out.join(&atoms_name), &written)?;
    ctx.report("atomize.json", "atomize", &g, result)?;
    Ok(Outcome::Success)
}

fn cmd_validate(ctx: &Ctx, a: &ValidateArgs) -> Result<Outcome> {
    let dec = read_atoms(&a.atoms)?;
    let g = dec.grid;
    let p = exponent(&a.p, g)?;
    let mut failures = 0;
    let mut rows = Vec::with_capacity(dec.len());
    for (i, atom) in dec.atoms.iter().enumerate() {
        let r = validate_atom(atom, &p)?;
        if !r.pass {
            failures += 1;
            eprintln!("atom [{i}] fails: {r:?}");
        }
        rows.push(json!({
            "index": i,
            "pass": r.pass,
            "support_violations": r.support_violations,
            "size_ratio": r.size_ratio,
            "moment_residual": r.moment_residual,
        }));
    }
    ctx.report("validate.json", "validate", &g, json!({ "atoms": rows, "failures": failures }))?;
    Ok(if failures == 0 { Outcome::Success } else { Outcome::ValidationFailed })
}

fn dual_json(r: &DualNormResult) -> Value {
    json!({
        "value": r.value,
        "small": r.small,
        "large": r.large,
        "small_argmax": r.small_argmax.as_ref().map(cube_json),
        "large_argmax": r.large_argmax.as_ref().map(cube_json),
        "skipped": r.skipped,
        "cubes": r.cubes,
    })
}

fn cmd_dualnorm(ctx: &Ctx, a: &DualnormArgs) -> Result<Outcome> {
    let f = load(&a.input)?;
    let g = *f.grid();
    let p = exponent(&a.p, g)?;
    let d = a.d.unwrap_or_else(|| atom_moment_degree(&p));
    let table = CubeTable::dyadic(&p, a.shifted);
    let result = match a.space {
        DualSpace::Bmo => dual_json(&bmo_norm(&f, &p, a.q, d, &table)?),
        DualSpace::Lip => dual_json(&lip_norm(&f, &p, &table)?),
        DualSpace::Cmo => dual_json(&cmo_norm(&f, &p, &build_filter_bank(g, g.level())?)?),
        DualSpace::Tbmo => {
            let families = generate_families(&f, &table, a.q, d, 8, 16, ctx.seed)?;
            let local = tilde_bmo_norm(&f, &p, a.q, d, &families, TildeMode::Local)?;
            let global = tilde_bmo_norm(&f, &p, a.q, d, &families, TildeMode::Global)?;
            let fam = |i: Option<usize>| i.map(|i| families[i].cubes.iter().map(cube_json).collect::<Vec<_>>());
            json!({
                "value": local.value,
                "small": local.small,
                "large": local.large,
                "small_argmax": fam(local.small_argmax),
                "large_argmax": fam(local.large_argmax),
                "global": global.value,
                "families": families.len(),
            })
        }
    };
    println!("{}", result["value"]);
    ctx.report("dualnorm.json", "dualnorm", &g, json!({ "space": a.space, "q": a.q, "d": d, "norm": result }))?;
    Ok(Outcome::Success)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("--family: cannot read {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    v.sort();
    Ok(v)
}

fn has_ext(p: &Path, ext: &str) -> bool {
    p.extension().is_some_and(|e| e == ext)
}

/// Payloads of `.atoms` files end in `.atoms.gf` and are not functions.
fn is_function_file(p: &Path) -> bool {
    has_ext(p, "gf") && !p.to_string_lossy().ends_with(".atoms.gf")
}

/// `.gf` functions of a directory, sorted by file name.
fn read_function_dir(dir: &Path) -> Result<Vec<(String, GridFunction)>> {
    let mut out = Vec::new();
    for path in sorted_entries(dir)? {
        if is_function_file(&path) {
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.push((name, load(&path)?));
        }
    }
    Ok(out)
}

fn space_of(arg: SpaceArg, p: &ExponentField) -> Space {
    match arg {
        SpaceArg::Lp => Space::Lp,
        SpaceArg::Hp => Space::Hp,
        SpaceArg::Bmo => Space::Bmo { q: 2.0, d: atom_moment_degree(p) },
    }
}

fn cmd_operator(ctx: &Ctx, a: &OperatorArgs) -> Result<Outcome> {
    let mut names = Vec::new();
    let mut inputs = Vec::new();
    let mut grid: Option<Grid> = None;
    for path in sorted_entries(&a.family)? {
        let stem = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if is_function_file(&path) {
            let f = load(&path)?;
            grid.get_or_insert(*f.grid());
            names.push(stem);
            inputs.push(ExperimentInput::Function(f));
        } else if has_ext(&path, "atoms") {
            let dec = read_atoms(&path)?;
            grid.get_or_insert(dec.grid);
            for (i, atom) in dec.atoms.into_iter().enumerate() {
                names.push(format!("{stem}[{i}]"));
                inputs.push(ExperimentInput::Atom(atom));
            }
        }
    }
    let g = grid.ok_or_else(|| anyhow!("--family: no .gf or .atoms files in {}", a.family.display()))?;
    let p = exponent(&a.p, g)?;
    let bank = build_filter_bank(g, g.level())?;
    let in_space = space_of(a.in_space, &p);
    let (op, p_out, out_space, kernel_json) = match (a.kernel, a.alpha) {
        (_, Some(alpha)) => {
            let (q, target) = fractional_target(&p, alpha)?;
            let out = a.out_space.map(|s| space_of(s, &q)).unwrap_or(target);
            (OperatorHandle::Fractional { alpha }, q, out, json!({ "fractional": alpha }))
        }
        (Some(k), None) => {
            let kind = match k {
                KernelArg::Hilbert => KernelKind::LocalizedHilbert,
                KernelArg::Bumps => KernelKind::DifferenceOfBumps,
                KernelArg::Constant => KernelKind::Constant(1.0),
                KernelArg::Variable => KernelKind::VariableCoefficient,
                KernelArg::Commutator => KernelKind::Commutator,
            };
            let spec = KernelSpec::library(g.dim(), kind).corrected(a.corrected);
            let out = space_of(a.out_space.unwrap_or(a.in_space), &p);
            let info = json!({
                "kind": format!("{:?}", spec.kind),
                "delta": spec.delta,
                "epsilon": spec.epsilon,
                "moment_corrected": spec.moment_corrected,
            });
            (OperatorHandle::Kernel(spec), p.clone(), out, info)
        }
        (None, None) => bail!("--kernel or --alpha is required"),
    };
    let rep = boundedness_experiment(&op, &inputs, &p, in_space, &p_out, out_space, &bank, None)?;
    let ratios: Vec<Value> = names.iter().zip(&rep.ratios).map(|(n, r)| json!({ "member": n, "ratio": r })).collect();
    ctx.report(
        "operator.json",
        "operator",
        &g,
        json!({
            "operator": kernel_json,
            "in_space": format!("{in_space:?}"),
            "out_space": format!("{out_space:?}"),
            "ratios": ratios,
            "max": rep.max,
            "median": rep.median,
            "small_cube_max": rep.small_cube_max,
            "skipped": rep.skipped,
        }),
    )?;
    Ok(Outcome::Success)
}

fn cmd_equivalence(ctx: &Ctx, a: &EquivalenceArgs) -> Result<Outcome> {
    let (names, fam): (Vec<String>, Vec<GridFunction>) = if FAMILIES.contains(&a.family.as_str()) {
        let g = a.grid.grid()?;
        families::functions(&a.family, g, ctx.seed).expect("known family").into_iter().map(|m| (m.name, m.f)).unzip()
    } else {
        read_function_dir(Path::new(&a.family))?.into_iter().unzip()
    };
    let g = *fam.first().ok_or_else(|| anyhow!("--family: empty family"))?.grid();
    let p = exponent(&a.p, g)?;
    let cfg = EquivalenceConfig { order: a.order, doubled: a.doubled, ..Default::default() };
    let table = equivalence_table(&fam, &p, &cfg)?;
    write_text(&ctx.out.join("equivalence.csv"), &table.to_csv())?;
    let norms: Vec<Value> = names.iter().zip(&table.norms).map(|(n, v)| json!({ "member": n, "norms": v })).collect();
    ctx.report(
        "equivalence.json",
        "equivalence",
        &g,
        json!({
            "equivalence_config": cfg,
            "quantities": table.quantities,
            "pairs": table.pairs,
            "members": norms,
            "skipped": table.skipped,
            "all_finite": table.all_finite(),
            "csv": "equivalence.csv",
        }),
    )?;
    Ok(Outcome::Success)
}

fn cmd_generate(ctx: &Ctx, a: &GenerateArgs) -> Result<Outcome> {
    let g = a.grid.grid()?;
    let files: Vec<String> = match a.family.as_str() {
        "atoms" => {
            write_atoms(&ctx.out.join("atoms.atoms"), &families::atoms(g, ctx.seed))?;
            vec!["atoms.atoms".into(), "atoms.atoms.gf".into()]
        }
        name => {
            let members = families::functions(name, g, ctx.seed)
                .ok_or_else(|| anyhow!("--family: unknown family {name:?}; expected one of {FAMILIES:?}"))?;
            let mut names = Vec::with_capacity(members.len());
            for m in members {
                let file = format!("{}.gf", m.name);
                write_gf(&ctx.out.join(&file), &m.f)?;
                names.push(file);
            }
            names
        }
    };
    ctx.report("manifest.json", "generate", &g, json!({ "family": a.family, "files": files }))?;
    Ok(Outcome::Success)
}
