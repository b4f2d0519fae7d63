//! Subcommand implementations. Each command reads its sections strictly,
//! runs the corresponding pipeline, and writes artifacts plus a manifest
//! into the output directory. Identical config + seed produces identical
//! bytes.

use std::path::PathBuf;
use std::sync::Arc;

use shortck_core::basin::{render_slice, BasinParams, EscapeRule, SliceWindow};
use shortck_core::conjugacy::{
    check_perturbation, conjugacy_profile, perturbed_sequence, sampling, tolerance_schedule,
    verify_uub, BumpKind,
};
use shortck_core::dimension::{boxdim_from_counts, count_table_grid, log_spaced};
use shortck_core::grid::Rect;
use shortck_core::io::{fate_grid_bytes, fmt_f64, sha256_hex, write_csv, write_pbm, write_pgm, Manifest};
use shortck_core::julia1d::{
    default_delta0, julia_grid, nested_sequence, EscapeMode, JuliaIter, NestedSequence, Poly1,
};
use shortck_core::kobayashi::{disc_witness, WitnessConfig};
use shortck_core::maps::{validate_sequence, CoeffSequence, CPoint, MapSequence, PolySpec};
use shortck_core::num::LogMag;
use shortck_core::potential::{positive_real_table, PotentialParams};
use shortck_core::suite::{coupled_scenario, measure_jplus, tube_dichotomy, TubeSpec};

use crate::config::{reject_unknown_sections, ConfigError, RawConfig, SectionReader};

#[derive(Debug)]
pub enum CliError {
    /// Bad command line or config file (exit 2).
    Usage(String),
    /// The run itself failed: validation, margins, arithmetic (exit 1).
    Domain(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(format!("i/o failure: {e}"))
    }
}

macro_rules! domain_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Domain(e.to_string())
            }
        }
    )*};
}

domain_from!(
    shortck_core::maps::MapsError,
    shortck_core::julia1d::JuliaError,
    shortck_core::potential::PotentialError,
    shortck_core::conjugacy::ConjugacyError,
    shortck_core::dimension::DimensionError,
    shortck_core::suite::SuiteError,
    shortck_core::kobayashi::KobayashiError
);

struct RunContext {
    command: String,
    out_dir: PathBuf,
    seed: u64,
    threads: usize,
    canonical: String,
}

impl RunContext {
    fn identity(&self) -> Manifest {
        let mut m = Manifest::new();
        m.push("invocation", "command", &self.command);
        m.push("invocation", "seed", self.seed);
        m.push("invocation", "threads", self.threads);
        m.push("invocation", "config_sha256", sha256_hex(self.canonical.as_bytes()));
        m
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Record a written artifact's hash.
    fn note_file(&self, manifest: &mut Manifest, name: &str) -> Result<(), CliError> {
        let bytes = std::fs::read(self.path(name))?;
        manifest.push("outputs", name, sha256_hex(&bytes));
        Ok(())
    }

    fn finish(&self, manifest: &Manifest) -> Result<(), CliError> {
        manifest.write(&self.path("manifest.txt"))?;
        Ok(())
    }
}

pub fn run(text: &str) -> Result<(), CliError> {
    let cfg = RawConfig::parse(text)?;
    let mut run = SectionReader::new(&cfg, "run", true)?.expect("required");
    let (_, command) = run.str_required("command")?;
    let command = command.to_string();
    let (_, out_dir) = run.str_required("out_dir")?;
    let out_dir = PathBuf::from(out_dir);
    let seed = run.u64_or("seed", 0)?;
    let threads = run.usize_or("threads", 0)?;
    run.finish()?;

    std::fs::create_dir_all(&out_dir)?;
    // The identity hash is location-independent: the out_dir is where a run
    // lands, not what it is.
    let mut redacted = cfg.clone();
    for s in &mut redacted.sections {
        if s.name == "run" {
            for (_, k, v) in &mut s.entries {
                if k == "out_dir" {
                    *v = ".".into();
                }
            }
        }
    }
    let ctx = RunContext {
        command: command.clone(),
        out_dir,
        seed,
        threads,
        canonical: redacted.emit(),
    };
    std::fs::write(ctx.path("config.canonical.cfg"), cfg.emit())?;

    let body = || -> Result<(), CliError> {
        match command.as_str() {
            "gen-sequence" => gen_sequence(&cfg, &ctx),
            "render" => render(&cfg, &ctx),
            "potential-table" => potential_table(&cfg, &ctx),
            "julia" => julia(&cfg, &ctx),
            "nested" => nested(&cfg, &ctx),
            "boxdim" => boxdim(&cfg, &ctx),
            "conjugacy-check" => conjugacy_check(&cfg, &ctx),
            "kobayashi" => kobayashi(&cfg, &ctx),
            "jplus-measure" => jplus_measure(&cfg, &ctx),
            other => Err(CliError::Usage(format!("unknown command `{other}`"))),
        }
    };
    if ctx.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.threads)
            .build()
            .map_err(|e| CliError::Domain(e.to_string()))?;
        pool.install(body)
    } else {
        body()
    }
}

/// Coefficient schedule from the `[sequence]` section.
fn read_coeffs(s: &mut SectionReader) -> Result<CoeffSequence, CliError> {
    let kind = s.str_opt("coeff_kind").map(|(_, v)| v.to_string());
    match kind.as_deref() {
        None | Some("generator") => {
            let k = s.f64_or("coeff_k", 1.0)?;
            let g = s.f64_or("coeff_g", 3.0)?;
            Ok(CoeffSequence::generator(k, g)?)
        }
        Some("explicit") => {
            let logs = s.f64_list_required("coeff_logs")?;
            Ok(CoeffSequence::explicit(
                logs.into_iter().map(LogMag::new).collect(),
            )?)
        }
        Some(other) => Err(CliError::Usage(format!(
            "coeff_kind must be `generator` or `explicit`, got `{other}`"
        ))),
    }
}

struct BuiltSequence {
    seq: MapSequence,
    coeffs: Option<CoeffSequence>,
    poly: Option<PolySpec>,
    kind: String,
}

fn build_sequence(cfg: &RawConfig) -> Result<BuiltSequence, CliError> {
    let mut s = SectionReader::new(cfg, "sequence", true)?.expect("required");
    let (_, kind) = s.str_required("kind")?;
    let kind = kind.to_string();
    let built = match kind.as_str() {
        "shift_like" => {
            let dim = s.usize_or("dim", 2)?;
            let poly = PolySpec::new(s.f64_list_required("poly")?)?;
            let coeffs = read_coeffs(&mut s)?;
            BuiltSequence {
                seq: MapSequence::shift_like(dim, coeffs.clone(), poly.clone())?,
                coeffs: Some(coeffs),
                poly: Some(poly),
                kind,
            }
        }
        "henon_like" => {
            let poly = PolySpec::new(s.f64_list_required("poly")?)?;
            let coeffs = read_coeffs(&mut s)?;
            BuiltSequence {
                seq: MapSequence::henon_like(coeffs.clone(), poly.clone()),
                coeffs: Some(coeffs),
                poly: Some(poly),
                kind,
            }
        }
        "diag_linear" => {
            let alpha = s.f64_or("alpha", 0.5)?;
            let dim = s.usize_or("dim", 2)?;
            BuiltSequence {
                seq: MapSequence::diag_linear(alpha, dim),
                coeffs: None,
                poly: None,
                kind,
            }
        }
        "shear" => {
            let alpha = s.f64_or("alpha", 0.5)?;
            let beta = s.f64_or("beta", 0.25)?;
            BuiltSequence {
                seq: MapSequence::shear_contraction(alpha, beta),
                coeffs: None,
                poly: None,
                kind,
            }
        }
        "rosay_rudin" => {
            let m = s.i64_or("rr_m", 0)?;
            BuiltSequence {
                seq: MapSequence::rosay_rudin(m),
                coeffs: None,
                poly: None,
                kind,
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "sequence kind must be one of shift_like|henon_like|diag_linear|shear|rosay_rudin, got `{other}`"
            )))
        }
    };
    s.finish()?;
    Ok(built)
}

fn build_basin(cfg: &RawConfig, built: &BuiltSequence) -> Result<BasinParams, CliError> {
    let mut b = match SectionReader::new(cfg, "basin", false)? {
        Some(r) => r,
        None => {
            return derive_basin(built, None, None, 60, None);
        }
    };
    let c = b.f64_auto("c")?;
    let r_escape = b.f64_auto("r_escape")?;
    let n_max = b.usize_or("n_max", 60)?;
    let rule = match b.str_opt("escape_rule") {
        None => None,
        Some((_, "sup_norm")) => Some(EscapeRule::SupNorm),
        Some((_, "dominant_first")) => Some(EscapeRule::DominantFirst),
        Some((line, other)) => {
            return Err(CliError::Usage(
                ConfigError {
                    line,
                    message: format!(
                        "escape_rule must be sup_norm or dominant_first, got `{other}`"
                    ),
                }
                .to_string(),
            ))
        }
    };
    b.finish()?;
    derive_basin(built, c, r_escape, n_max, rule)
}

fn derive_basin(
    built: &BuiltSequence,
    c: Option<f64>,
    r_escape: Option<f64>,
    n_max: usize,
    rule: Option<EscapeRule>,
) -> Result<BasinParams, CliError> {
    match (&built.poly, &built.coeffs) {
        (Some(poly), Some(coeffs)) => {
            let mut params = BasinParams::derive(poly, coeffs, built.seq.dim(), n_max);
            if let Some(c) = c {
                params.c = c;
            }
            if let Some(r) = r_escape {
                params.r_escape = r;
            }
            if let Some(rule) = rule {
                params.escape_rule = rule;
            }
            Ok(params)
        }
        _ => {
            let c = c.ok_or_else(|| {
                CliError::Usage(format!(
                    "sequence kind `{}` needs an explicit [basin] c",
                    built.kind
                ))
            })?;
            Ok(BasinParams {
                c,
                ladder_ratio: 0.5 * (1.0 + c),
                m_bound: 0.0,
                n0: 0,
                r_escape: r_escape.unwrap_or(1e12),
                escape_rule: rule.unwrap_or(EscapeRule::SupNorm),
                n_max,
                dim: built.seq.dim(),
            })
        }
    }
}

fn gen_sequence(cfg: &RawConfig, ctx: &RunContext) -> Result<(), CliError> {
    reject_unknown_sections(cfg, &["run", "sequence"])?;
    let mut s = SectionReader::new(cfg, "sequence", true)?.expect("required");
    let coeffs = read_coeffs(&mut s)?;
    let n_terms = s.usize_or("n_terms", 20)?;
    s.finish()?;

    let report = validate_sequence(&coeffs, n_terms.saturating_sub(1));
    let mut manifest = ctx.identity();
    manifest.push("sequence", "n_terms", n_terms);
    manifest.push("sequence", "constraints_pass", report.pass);
    if let Some(g) = report.generator_root_decay {
        manifest.push("sequence", "generator_root_decay", g);
    }

    write_csv(
        &ctx.path("sequence.csv"),
        &["n", "log_a_n"],
        (0..n_terms).map(|n| vec![n.to_string(), fmt_f64(coeffs.log_a(n).value())]),
    )?;
    ctx.note_file(&mut manifest, "sequence.csv")?;
    ctx.finish(&manifest)
}

fn read_window(cfg: &RawConfig, dim: usize) -> Result<(String, SliceWindow), CliError> {
    let mut w = SectionReader::new(cfg, "window", true)?.expect("required");
    let axes = w.str_opt("axes").map(|(l, v)| (l, v.to_string()));
    let side = w.f64_or("side", 3.0)?;
    let res = w.usize_or("res", 256)?;
    let base = w.f64_list_opt("base")?;
    w.finish()?;

    let axes_pair = match axes.as_ref().map(|(_, v)| v.as_str()) {
        None | Some("re1-re2") => (0, 1),
        Some("re1-im1") => (0, 0),
        Some(other) => {
            let line = axes.as_ref().map(|(l, _)| *l).unwrap_or(0);
            return Err(CliError::Usage(
                ConfigError {
                    line,
                    message: format!("axes must be re1-re2 or re1-im1, got `{other}`"),
                }
                .to_string(),
            ));
        }
    };
    let mut window = SliceWindow::coordinate_plane(dim, axes_pair, side, res)?;
    if let Some(base) = base {
        if base.len() != 2 * dim {
            return Err(CliError::Usage(format!(
                "window base needs {} numbers (re,im per coordinate), got {}",
                2 * dim,
                base.len()
            )));
        }
        let coords: Vec<(f64, f64)> = base.chunks(2).map(|c| (c[0], c[1])).collect();
        window.base = CPoint::from_f64(&coords)?;
    }
    let name = match axes_pair {
        (0, 1) => "re1-re2",
        _ => "re1-im1",
    };
    Ok((name.to_string(), window))
}

fn render(cfg: &RawConfig, ctx: &RunContext) -> Result<(), CliError> {
    reject_unknown_sections(cfg, &["run", "sequence", "basin", "window"])?;
    let built = build_sequence(cfg)?;
    let basin = build_basin(cfg, &built)?;
    let (axes, window) = read_window(cfg, built.seq.dim())?;

    let mut manifest = ctx.identity();
    manifest.push("scenario", "sequence", built.seq.descriptor());
    manifest.push("scenario", "axes", &axes);
    manifest.push("window", "side", fmt_f64(window.width));
    manifest.push("window", "res", format!("{}x{}", window.nx, window.ny));
    let base_txt: Vec<String> = window
        .base
        .to_f64()
        .iter()
        .map(|(re, im)| format!("{},{}", fmt_f64(*re), fmt_f64(*im)))
        .collect();
    manifest.push("window", "base", base_txt.join(";"));
    push_basin(&mut manifest, &basin);
    let run_hash = manifest.content_hash();

    let grid = render_slice(&built.seq, &window, &basin);
    let bytes = fate_grid_bytes(&grid);
    write_pgm(&ctx.path("render.pgm"), window.nx, window.ny, &bytes, &run_hash)?;

    let attracted = grid.count_where(|f| f.is_attracted());
    let escaped = grid.count_where(|f| f.is_escaped());
    manifest.push("result", "attracted_pixels", attracted);
    manifest.push("result", "escaped_pixels", escaped);
    manifest.push(
        "result",
        "undecided_pixels",
        window.nx * window.ny - attracted - escaped,
    );
    ctx.note_file(&mut manifest, "render.pgm")?;
    ctx.finish(&manifest)
}

fn push_basin(manifest: &mut Manifest, basin: &BasinParams) {
    manifest.push("basin", "c", fmt_f64(basin.c));
    manifest.push("basin", "ladder_ratio", fmt_f64(basin.ladder_ratio));
    manifest.push("basin", "m_bound", fmt_f64(basin.m_bound));
    manifest.push("basin", "n0", basin.n0);
    manifest.push("basin", "r_escape", fmt_f64(basin.r_escape));
    manifest.push("basin", "escape_rule", format!("{:?}", basin.escape_rule));
    manifest.push("basin", "n_max", basin.n_max);
}

fn potential_table(cfg: &RawConfig, ctx: &RunContext) -> Result<(), CliError> {
    reject_unknown_sections(cfg, &["run", "sequence", "basin", "potential"])?;
    let built = build_sequence(cfg)?;
    let basin = build_basin(cfg, &built)?;
    let poly = built.poly.clone().ok_or_else(|| {
        CliError::Usage("potential-table requires a shift_like sequence".into())
    })?;
    let mut params = PotentialParams::derive(&poly, &basin);

    let (x_count, x_lo_frac, y_frac) = match SectionReader::new(cfg, "potential", false)? {
        Some(mut p) => {
            let xc = p.usize_or("x_count", 50)?;
            let lo = p.f64_or("x_lo_frac", 0.01)?;
            let yf = p.f64_or("y_frac", 0.5)?;
            params.n_max = p.usize_or("n_max", params.n_max)?;
            params.conv_tol = p.f64_or("conv_tol", params.conv_tol)?;
            p.finish()?;
            (xc, lo, yf)
        }
        None => (50, 0.01, 0.5),
    };

    let xs: Vec<f64> = (0..x_count)
        .map(|i| basin.c * x_lo_frac.powf(1.0 - (i as f64 + 0.5) / x_count as f64))
        .collect();
    let y = basin.c * y_frac;
    let rows = positive_real_table(&built.seq, &xs, y, &params)?;

    let mut manifest = ctx.identity();
    manifest.push("scenario", "sequence", built.seq.descriptor());
    push_basin(&mut manifest, &basin);
    manifest.push("potential", "m_bound", fmt_f64(params.m_bound));
    manifest.push("potential", "m_envelope", fmt_f64(params.m_envelope));
    manifest.push("potential", "x_count", x_count);
    manifest.push("potential", "y", fmt_f64(y));

    write_csv(
        &ctx.path("potential.csv"),
        &["x", "y", "n", "psi_n", "envelope_n", "converged"],
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.x),
                fmt_f64(r.y),
                r.n.to_string(),
                fmt_f64(r.psi),
                fmt_f64(r.envelope),
                r.converged.to_string(),
            ]
        }),
    )?;
    ctx.note_file(&mut manifest, "potential.csv")?;
    ctx.finish(&manifest)
}

struct JuliaSetup {
    poly: Poly1,
    rect: Rect,
    res: usize,
    it: JuliaIter,
    delta0: Option<f64>,
    n_stages: usize,
    escape_mode: EscapeMode,
}

fn read_julia(cfg: &RawConfig) -> Result<JuliaSetup, CliError> {
    let mut j = SectionReader::new(cfg, "julia", true)?.expect("required");
    let poly = Poly1::new(j.f64_list_required("poly")?)?;
    let side = j.f64_or("rect_side", 4.4)?;
    let res = j.usize_or("res", 500)?;
    let n_iter = j.usize_or("n_iter", 400)?;
    let delta0 = j.f64_auto("delta0")?;
    let n_stages = j.usize_or("n_stages", 10)?;
    let escape_mode = match j.str_opt("escape_mode") {
        None | Some((_, "certified")) => EscapeMode::GridCertified,
        Some((_, "asserted")) => EscapeMode::Asserted,
        Some((line, other)) => {
            return Err(CliError::Usage(
                ConfigError {
                    line,
                    message: format!("escape_mode must be certified or asserted, got `{other}`"),
                }
                .to_string(),
            ))
        }
    };
    j.finish()?;
    let it = JuliaIter::derive(&poly, n_iter)?;
    Ok(JuliaSetup {
        rect: Rect::centered_square((0.0, 0.0), side),
        poly,
        res,
        it,
        delta0,
        n_stages,
        escape_mode,
    })
}

fn julia(cfg: &RawConfig, ctx: &RunContext) -> Result<(), CliError> {
    reject_unknown_sections(cfg, &["run", "julia"])?;
    let setup = read_julia(cfg)?;
    let mut manifest = ctx.identity();
    manifest.push("julia", "poly", format!("{:?}", setup.poly.coeffs()));
    manifest.push("julia", "res", setup.res);
    manifest.push("julia", "r_esc", fmt_f64(setup.it.r_esc));
    manifest.push("julia", "r_att", fmt_f64(setup.it.r_att));
    let run_hash = manifest.content_hash();

    let grid = julia_grid(&setup.poly, setup.rect, setup.res, setup.it);
    write_pbm(&ctx.path("julia.pbm"), &grid, &run_hash)?;
    manifest.push("result", "julia_pixels", grid.count());
    manifest.push("result", "diameter", fmt_f64(grid.bbox_diameter()));
    ctx.note_file(&mut manifest, "julia.pbm")?;
    ctx.finish(&manifest)
}

fn build_nested(setup: &JuliaSetup) -> Result<(NestedSequence, f64), CliError> {
    let julia = julia_grid(&setup.poly, setup.rect, setup.res, setup.it);
    let delta0 = setup.delta0.unwrap_or_else(|| default_delta0(&julia));
    let nested = nested_sequence(
        &setup.poly,
        delta0,
        setup.n_stages,
        setup.rect,
        setup.res,
        setup.it,
        setup.escape_mode,
    )?;
    Ok((nested, delta0))
}

fn nested(cfg: &RawConfig, ctx: &RunContext) -> Result<(), CliError> {
    reject_unknown_sections(cfg, &["run", "julia"])?;
    let setup = read_julia(cfg)?;
    let (ns, delta0) = build_nested(&setup)?;

    let mut manifest = ctx.identity();
    manifest.push("nested", "poly", format!("{:?}", setup.poly.coeffs()));
    manifest.push("nested", "delta0", fmt_f64(delta0));
    manifest.push("nested", "stages", ns.stages.len());
    manifest.push("nested", "diam_c0", fmt_f64(ns.diam_c0));
    manifest.push("nested", "growth_radius", fmt_f64(ns.growth_radius));
    if let Some(t) = &ns.truncated {
        manifest.push("nested", "truncated", t);
    }
    if let Some(c) = &ns.escape_caveat {
        manifest.push("nested", "escape_caveat", c);
    }
    let run_hash = manifest.content_hash();

    write_pbm(&ctx.path("c0.pbm"), &ns.c0, &run_hash)?;
    write_pbm(&ctx.path("e0.pbm"), &ns.e0, &run_hash)?;
    write_csv(
        &ctx.path("nested.csv"),
        &["n", "delta_n", "eta_n", "c_prime_n", "diam_c_n"],
        ns.stages.iter().map(|s| {
            vec![
                s.n.to_string(),
                fmt_f64(s.delta),
                fmt_f64(s.eta),
                fmt_f64(s.c_prime),
                fmt_f64(s.diam),
            ]
        }),
    )?;
    ctx.note_file(&mut manifest, "c0.pbm")?;
    ctx.note_file(&mut manifest, "e0.pbm")?;
    ctx.note_file(&mut manifest, "nested.csv")?;
    ctx.finish(&manifest)
}

fn read_eps(cfg: &RawConfig) -> Result<Vec<f64>, CliError> {
    match SectionReader::new(cfg, "dimension", false)? {
        Some(mut d) => {
            let hi = d.f64_or("eps_hi", 0.4)?;
            let lo = d.f64_or("eps_lo", 0.012)?;
            let count = d.usize_or("eps_count", 10)?;
            d.finish()?;
            Ok(log_spaced(hi, lo, count))
        }
        None => Ok(log_spaced(0.4, 0.012, 10)),
    }
}

fn boxdim(cfg: &RawConfig, ctx: &RunContext) -> Result<(), CliError> {
    reject_unknown_sections(cfg, &["run", "julia", "dimension"])?;
    let setup = read_julia(cfg)?;
    let eps = read_eps(cfg)?;
    let grid = julia_grid(&setup.poly, setup.rect, setup.res, setup.it);
    let table = count_table_grid(&grid, &eps);
    let est = boxdim_from_counts(&table)?;

    let mut manifest = ctx.identity();
    manifest.push("boxdim", "poly", format!("{:?}", setup.poly.coeffs()));
    manifest.push("boxdim", "slope", fmt_f64(est.slope));
    manifest.push("boxdim", "intercept", fmt_f64(est.intercept));
    manifest.push("boxdim", "r2", fmt_f64(est.r2));
    manifest.push("boxdim", "eps_hi", fmt_f64(est.eps_range.0));
    manifest.push("boxdim", "eps_lo", fmt_f64(est.eps_range.1));
    if let Some(flag) = &est.flagged {
        manifest.push("boxdim", "flagged", flag);
    }

    write_csv(
        &ctx.path("boxdim.csv"),
        &["eps", "count", "log_inv_eps", "log_count"],
        table.iter().map(|&(e, n)| {
            vec![
                fmt_f64(e),
                n.to_string(),
                fmt_f64((1.0 / e).ln()),
                fmt_f64((n as f64).ln()),
            ]
        }),
    )?;
    ctx.note_file(&mut manifest, "boxdim.csv")?;
    ctx.finish(&manifest)
}

fn conjugacy_check(cfg: &RawConfig, ctx: &RunContext) -> Result<(), CliError> {
    reject_unknown_sections(cfg, &["run", "sequence", "conjugacy"])?;
    let built = build_sequence(cfg)?;
    let mut c = SectionReader::new(cfg, "conjugacy", true)?.expect("required");
    let r = c.f64_or("r", 0.9)?;
    let c_bound = c.f64_or("c_bound", 0.6)?;
    let eps = c.f64_opt("eps")?;
    let delta = c.f64_opt("delta")?;
    let n_max = c.usize_or("n_max", 20)?;
    let samples = c.usize_or("samples", 24)?;
    let amplitude = c.f64_or("amplitude", 0.5)?;
    let kind = match c.str_opt("perturb") {
        None | Some((_, "quadratic")) => BumpKind::QuadraticShear,
        Some((_, "cubic")) => BumpKind::CubicShear,
        Some((_, "linear")) => BumpKind::LinearScale,
        Some((line, other)) => {
            return Err(CliError::Usage(
                ConfigError {
                    line,
                    message: format!(
                        "perturb must be quadratic, cubic or linear, got `{other}`"
                    ),
                }
                .to_string(),
            ))
        }
    };
    c.finish()?;

    let witness = match verify_uub(&built.seq, r, c_bound, n_max, 8, ctx.seed)? {
        Ok(w) => w,
        Err(v) => {
            return Err(CliError::Domain(format!(
                "uniform upper bound violated at n = {} (ratio {:.6})",
                v.n, v.ratio
            )))
        }
    };
    let witness = match (eps, delta) {
        (Some(e), Some(d)) => witness.with_margins(e, d),
        _ => witness,
    };
    let sched = tolerance_schedule(&witness, &built.seq, n_max, ctx.seed)?;

    let deltas: Vec<f64> = sched.rows.iter().map(|row| row.delta_n).collect();
    let amp = amplitude;
    let perturbed = if amp == 0.0 {
        built.seq.clone()
    } else {
        let d = deltas.clone();
        perturbed_sequence(
            &built.seq,
            witness.r,
            kind,
            Arc::new(move |n| amp * d[n.min(d.len() - 1)]),
        )
    };
    let report = check_perturbation(&built.seq, &perturbed, &sched, samples, ctx.seed)?;

    let mut rng = rand_chacha_seeded(ctx.seed ^ 0xc0ffee);
    let cloud = sampling::ball_points(built.seq.dim(), 0.3 * witness.r, 16, &mut rng);
    let profile = conjugacy_profile(&built.seq, &perturbed, &sched, &cloud, n_max)?;

    let mut manifest = ctx.identity();
    manifest.push("witness", "r", fmt_f64(witness.r));
    manifest.push("witness", "c_bound", fmt_f64(witness.c_bound));
    manifest.push("witness", "r0", fmt_f64(witness.r0));
    manifest.push("witness", "eps", fmt_f64(witness.eps));
    manifest.push("witness", "delta", fmt_f64(witness.delta));
    manifest.push("witness", "c_tilde", fmt_f64(witness.c_tilde));
    manifest.push("certificate", "perturbation", format!("{kind:?}"));
    manifest.push("certificate", "amplitude_x_delta", fmt_f64(amp));
    manifest.push("certificate", "perturbation_pass", report.pass);
    manifest.push("certificate", "cauchy_pass", profile.certificate_pass);
    manifest.push(
        "certificate",
        "worst_cauchy_ratio",
        fmt_f64(profile.worst_cauchy_ratio),
    );
    manifest.push("certificate", "excluded_samples", profile.excluded);
    manifest.push("certificate", "min_separation", fmt_f64(profile.min_separation));

    write_csv(
        &ctx.path("conjugacy.csv"),
        &["n", "m_raw", "m_safe", "eps_n", "delta_tilde_n", "delta_n", "sup_diff", "pass"],
        sched.rows.iter().zip(&report.rows).map(|(srow, prow)| {
            vec![
                srow.n.to_string(),
                fmt_f64(srow.m_raw),
                fmt_f64(srow.m_safe),
                fmt_f64(srow.eps_n),
                fmt_f64(srow.delta_tilde),
                fmt_f64(srow.delta_n),
                fmt_f64(prow.sup_diff),
                prow.pass.to_string(),
            ]
        }),
    )?;
    write_csv(
        &ctx.path("profile.csv"),
        &["n", "sup_step_diff", "cauchy_bound"],
        profile.steps.iter().map(|row| {
            vec![
                row.n.to_string(),
                fmt_f64(row.sup_step),
                fmt_f64(witness.eps.powi(row.n as i32 + 1) / (1.0 - witness.eps)),
            ]
        }),
    )?;
    ctx.note_file(&mut manifest, "conjugacy.csv")?;
    ctx.note_file(&mut manifest, "profile.csv")?;
    ctx.finish(&manifest)
}

fn rand_chacha_seeded(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn kobayashi(cfg: &RawConfig, ctx: &RunContext) -> Result<(), CliError> {
    reject_unknown_sections(cfg, &["run", "sequence", "basin", "kobayashi"])?;
    let built = build_sequence(cfg)?;
    let basin = build_basin(cfg, &built)?;
    let mut k = SectionReader::new(cfg, "kobayashi", true)?.expect("required");
    let base = k.f64_list_required("base")?;
    let xi = k.f64_list_required("xi")?;
    let radii = k.f64_list_opt("radii")?.unwrap_or(vec![10.0, 100.0, 1000.0]);
    let m_samples = k.usize_or("boundary_samples", 16)?;
    let fd_disc = k.f64_or("fd_step_disc", 1e-6)?;
    k.finish()?;

    let dim = built.seq.dim();
    if base.len() != 2 * dim || xi.len() != 2 * dim {
        return Err(CliError::Usage(format!(
            "base and xi need {} numbers each (re,im per coordinate)",
            2 * dim
        )));
    }
    let to_point = |v: &[f64]| -> Result<CPoint, CliError> {
        let coords: Vec<(f64, f64)> = v.chunks(2).map(|c| (c[0], c[1])).collect();
        Ok(CPoint::from_f64(&coords)?)
    };
    let base = to_point(&base)?;
    let xi = to_point(&xi)?;
    let mut cfg_w = WitnessConfig::from_basin(&basin);
    cfg_w.fd_step_disc = fd_disc;

    let mut manifest = ctx.identity();
    manifest.push("kobayashi", "sequence", built.seq.descriptor());
    push_basin(&mut manifest, &basin);

    let mut rows = Vec::new();
    for &big_r in &radii {
        let w = disc_witness(&built.seq, &base, &xi, big_r, m_samples, &basin, &cfg_w)?;
        rows.push(vec![
            fmt_f64(big_r),
            w.n.to_string(),
            fmt_f64(w.center_error),
            fmt_f64(w.derivative_rel_error),
            w.containment_violations.to_string(),
            w.boundary_samples.to_string(),
        ]);
        manifest.push(
            "witnesses",
            &format!("r_{big_r}"),
            format!(
                "n={} center_err={} deriv_err={} violations={}/{}",
                w.n,
                fmt_f64(w.center_error),
                fmt_f64(w.derivative_rel_error),
                w.containment_violations,
                w.boundary_samples
            ),
        );
    }
    write_csv(
        &ctx.path("kobayashi.csv"),
        &["R", "n", "center_error", "derivative_rel_error", "violations", "samples"],
        rows,
    )?;
    ctx.note_file(&mut manifest, "kobayashi.csv")?;
    ctx.finish(&manifest)
}

fn jplus_measure(cfg: &RawConfig, ctx: &RunContext) -> Result<(), CliError> {
    reject_unknown_sections(cfg, &["run", "julia", "tube", "jplus", "dimension"])?;
    let setup = read_julia(cfg)?;
    let mut t = SectionReader::new(cfg, "tube", true)?.expect("required");
    let c_tube = t.f64_or("c_tube", 0.25)?;
    let tube_delta = t.f64_opt("delta")?;
    t.finish()?;

    let (side, res, budget, witness_samples, dich_samples, coupling_n) =
        match SectionReader::new(cfg, "jplus", false)? {
            Some(mut j) => {
                let side = j.f64_or("side", 3.0)?;
                let res = j.usize_or("res", 400)?;
                let budget = j.usize_or("witness_budget", 600)?;
                let ws = j.usize_or("witness_samples", 50)?;
                let ds = j.usize_or("dichotomy_samples", 200)?;
                let cn = j.usize_or("coupling_n", 24)?;
                j.finish()?;
                (side, res, budget, ws, ds, cn)
            }
            None => (3.0, 400, 600, 50, 200, 24),
        };
    let eps = read_eps(cfg)?;

    let (nested, delta0) = build_nested(&setup)?;
    let tube_delta = tube_delta.unwrap_or(delta0);
    let tube = TubeSpec::derive(c_tube, tube_delta, &nested.julia);
    let (scenario, coupling) = coupled_scenario(&setup.poly, &nested, &tube, coupling_n)?;

    let dich = tube_dichotomy(&scenario, &nested, &tube, dich_samples, ctx.seed);
    let report = measure_jplus(
        &scenario,
        &setup.poly,
        &nested.julia_delta0,
        &tube,
        side,
        res,
        &eps,
        budget,
        witness_samples,
        ctx.seed,
    )?;

    let mut manifest = ctx.identity();
    manifest.push("coupling", "scenario_hash", scenario.content_hash());
    manifest.push("coupling", "certified_len", coupling.certified_len);
    manifest.push("tube", "c_tube", fmt_f64(tube.c_tube));
    manifest.push("tube", "delta", fmt_f64(tube.delta));
    manifest.push("tube", "r_julia", fmt_f64(tube.r_julia));
    manifest.push("dichotomy", "compact_attracted", dich.compact_attracted);
    manifest.push("dichotomy", "compact_total", dich.compact_total);
    manifest.push("dichotomy", "unbounded_escaped", dich.unbounded_escaped);
    manifest.push("dichotomy", "unbounded_total", dich.unbounded_total);
    manifest.push("dichotomy", "pass", dich.pass());
    manifest.push("jplus", "boundary_pixels", report.boundary_pixels);
    manifest.push("jplus", "boxdim_slope", fmt_f64(report.boxdim.slope));
    manifest.push("jplus", "boxdim_r2", fmt_f64(report.boxdim.r2));
    manifest.push("jplus", "distance_into_tube", fmt_f64(report.distance_into_tube));
    manifest.push("jplus", "tube_tolerance", fmt_f64(report.tube_tolerance));
    manifest.push("jplus", "tube_containment_pass", report.tube_containment_pass());
    manifest.push("jplus", "witness_successes", report.witness_successes);
    manifest.push("jplus", "witness_attempts", report.witness_attempts);
    let run_hash = manifest.content_hash();

    write_pbm(&ctx.path("boundary.pbm"), &report.boundary, &run_hash)?;
    write_pbm(&ctx.path("tube.pbm"), &report.tube_raster, &run_hash)?;
    write_csv(
        &ctx.path("jplus.csv"),
        &["eps", "boundary_count"],
        eps.iter().map(|&e| {
            vec![
                fmt_f64(e),
                shortck_core::dimension::box_count_grid(&report.boundary, e).to_string(),
            ]
        }),
    )?;
    ctx.note_file(&mut manifest, "boundary.pbm")?;
    ctx.note_file(&mut manifest, "tube.pbm")?;
    ctx.note_file(&mut manifest, "jplus.csv")?;
    ctx.finish(&manifest)
}
