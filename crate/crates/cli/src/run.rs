//! The drivers behind each `command`, producing a CSV body and a report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hmsem::basis1d::build_basis;
use hmsem::dofmap::{build_dofmap, clamp_boundary};
use hmsem::interp::{
    default_rule, interp_global, observed_slope, sobolev_error, ExpSum, KinkPower, SinProduct, SmoothFunction,
};
use hmsem::mesh::{build_mesh, element_diameter};
use hmsem::transmission::{
    convergence_table, default_shift, eigenfunction_sample, solve_transmission, ProblemSpec, Timing,
};
use hmsem::{Complex64, ErrorCategory, Execution, SemError};

use crate::config::{Command, ConfigError, RunConfig};

#[derive(Debug)]
pub struct RunError {
    pub category: ErrorCategory,
    pub message: String,
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self.category {
            ErrorCategory::Input => 1,
            ErrorCategory::Mesh => 2,
            ErrorCategory::Assembly => 3,
            ErrorCategory::Solver => 4,
        }
    }

    pub fn category_name(&self) -> &'static str {
        match self.category {
            ErrorCategory::Input => "config",
            ErrorCategory::Mesh => "mesh",
            ErrorCategory::Assembly => "assembly",
            ErrorCategory::Solver => "solver",
        }
    }
}

impl From<SemError> for RunError {
    fn from(e: SemError) -> Self {
        RunError { category: e.category(), message: e.to_string() }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError { category: ErrorCategory::Input, message: e.0 }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError { category: ErrorCategory::Input, message: format!("io: {e}") }
    }
}

/// What a run produced. `csv` is deterministic for a fixed config; the
/// report carries timings.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub csv: String,
    pub report: String,
    /// Extra files written (eigenfunction samples, matrix dumps).
    pub artifacts: Vec<PathBuf>,
}

/// `sin`, `exp` or `kink <center> <power>`.
pub fn parse_function(text: &str, dim: usize) -> Result<Box<dyn SmoothFunction>, String> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    match parts.as_slice() {
        ["sin"] => Ok(Box::new(SinProduct::new(dim))),
        ["exp"] => Ok(Box::new(ExpSum { dim })),
        ["kink", c, p] => {
            let center = c.parse::<f64>().map_err(|_| format!("not a number: {c:?}"))?;
            let power = p.parse::<f64>().map_err(|_| format!("not a number: {p:?}"))?;
            Ok(Box::new(KinkPower { dim, center, power }))
        }
        _ => Err(format!("unknown function {text:?}; expected sin, exp or kink <center> <power>")),
    }
}

fn num(x: f64) -> String {
    format!("{x:.14e}")
}

fn problem_spec(c: &RunConfig, degree: usize, level: usize) -> Result<ProblemSpec, RunError> {
    let coeff = c.coefficient().expect("validated");
    let k_guess = c.eig.k_guess.unwrap_or_else(|| c.eig.shift.expect("validated").max(0.0).sqrt() / 0.8);
    let mut spec = ProblemSpec::new(c.domain_boxes()?, level, degree, coeff, k_guess);
    spec.quadrature = c.quadrature;
    spec.eig.count = c.eig.count;
    spec.eig.method = c.method();
    spec.eig.tol = c.eig.tol;
    spec.eig.max_restarts = c.eig.max_restarts;
    spec.eig.subspace = c.eig.subspace;
    spec.eig.dense_threshold = c.eig.dense_threshold;
    spec.eig.seed = c.seed;
    spec.eig.shift = Complex64::new(c.eig.shift.unwrap_or_else(|| default_shift(k_guess)), 0.0);
    spec.exec = Execution::default();
    Ok(spec)
}

fn report_header(c: &RunConfig) -> String {
    let mut r = String::from("# configuration\n");
    r.push_str(&c.emit());
    r.push('\n');
    r
}

fn timing_lines(r: &mut String, t: &Timing) {
    let _ = writeln!(
        r,
        "mesh {:.3} s, assembly {:.3} s, solve {:.3} s",
        t.mesh_seconds, t.assembly_seconds, t.solve_seconds
    );
}

/// Runs `c`; `base` names the CSV destination and anchors default
/// artifact paths.
pub fn run(c: &RunConfig, base: Option<&Path>) -> Result<Outcome, RunError> {
    match c.command {
        Command::BasisDump => basis_dump(c),
        Command::MeshInfo => mesh_info(c),
        Command::InterpStudy => interp_study(c),
        Command::Solve => solve(c, base),
        Command::Sweep => sweep(c),
    }
}

fn basis_dump(c: &RunConfig) -> Result<Outcome, RunError> {
    let mut csv = String::new();
    let mut report = report_header(c);
    for n in c.degree.values() {
        let b = build_basis(c.m, n)?;
        csv.push_str(&b.to_csv());
        let _ = writeln!(report, "m = {}, N = {n}: {} functions, {} bubbles", c.m, b.len(), b.len() - 2 * c.m);
    }
    Ok(Outcome { csv, report, artifacts: vec![] })
}

fn mesh_info(c: &RunConfig) -> Result<Outcome, RunError> {
    let dom = c.domain_boxes()?;
    let mut csv = String::new();
    let mut report = report_header(c);
    for level in c.level.values() {
        let mesh = build_mesh(&dom, level)?;
        csv.push_str(&mesh.summary_csv());
        let _ = writeln!(report, "level {level}: elements {}", mesh.n_elements());
        for n in c.degree.values() {
            let dm = build_dofmap(&mesh, c.m, n)?;
            let free = clamp_boundary(&dm, &mesh).n_free();
            let _ = writeln!(
                report,
                "  m = {}, N = {n}: dofs {} ({} after clamping, {} for the two-field pencil)",
                c.m,
                dm.total(),
                free,
                2 * free
            );
        }
    }
    Ok(Outcome { csv, report, artifacts: vec![] })
}

fn interp_study(c: &RunConfig) -> Result<Outcome, RunError> {
    let dom = c.domain_boxes()?;
    let v = parse_function(&c.interp.function, dom.dim()).map_err(|e| ConfigError(format!("interp.function: {e}")))?;
    let mut csv = String::from("N,level,h,dof,err_h0,err_h1,err_h2,slope\n");
    let mut report = report_header(c);
    for n in c.degree.values() {
        let basis = build_basis(c.m, n)?;
        let rule = default_rule(&basis);
        let q = c.quadrature.unwrap_or(n + 6);
        let (mut hs, mut top) = (Vec::new(), Vec::new());
        for level in c.level.values() {
            let mesh = build_mesh(&dom, level)?;
            let dm = build_dofmap(&mesh, c.m, n)?;
            let coeffs = interp_global(v.as_ref(), &mesh, &dm, &basis, &rule, Execution::default())?;
            let h = element_diameter(&mesh);
            let errs: Vec<Option<f64>> = (0..=2)
                .map(|s| (s <= c.m).then(|| sobolev_error(&coeffs, v.as_ref(), &mesh, &dm, &basis, s, q)))
                .collect();
            hs.push(h);
            top.push(errs[c.m.min(2)].expect("s = min(m, 2) is computed"));
            let slope = if hs.len() >= 2 { num(observed_slope(&hs, &top)) } else { String::new() };
            let _ = write!(csv, "{n},{level},{},{}", num(h), dm.total());
            for e in &errs {
                csv.push(',');
                if let Some(e) = e {
                    csv.push_str(&num(*e));
                }
            }
            let _ = writeln!(csv, ",{slope}");
            let _ = writeln!(report, "N = {n}, level {level}: {} dofs, {} elements", dm.total(), mesh.n_elements());
        }
    }
    let _ = writeln!(report, "slope: least squares of log err_h{} against log h over the levels so far", c.m.min(2));
    Ok(Outcome { csv, report, artifacts: vec![] })
}

fn artifact_path(base: Option<&Path>, suffix: &str) -> PathBuf {
    match base {
        Some(p) => {
            let mut s = p.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("solve{suffix}")),
    }
}

fn solve(c: &RunConfig, base: Option<&Path>) -> Result<Outcome, RunError> {
    let spec = problem_spec(c, c.degree.values()[0], c.level.values()[0])?;
    let r = solve_transmission(&spec)?;
    let mut csv = String::from("index,re_k,im_k,re_lambda,im_lambda,residual\n");
    for (i, ((k, l), res)) in r.wavenumbers.iter().zip(&r.eigenvalues).zip(&r.residuals).enumerate() {
        let _ = writeln!(csv, "{i},{},{},{},{},{}", num(k.re), num(k.im), num(l.re), num(l.im), num(*res));
    }
    let mut report = report_header(c);
    let _ = writeln!(
        report,
        "dofs: {} per field, {} doubled (pencil), {} before clamping",
        r.dofs.per_field, r.dofs.doubled, r.dofs.unclamped
    );
    let _ = writeln!(
        report,
        "method {}, shift {}, restarts {}, operator applications {}, converged {}",
        r.method.as_str(),
        spec.eig.shift.re,
        r.stats.restarts,
        r.stats.matvecs,
        r.stats.converged
    );
    for (i, k) in r.wavenumbers.iter().enumerate() {
        let _ = writeln!(
            report,
            "k{} = {:.12} {:+.12}i  (residual {:.1e}, w-gap {:.1e})",
            i + 1,
            k.re,
            k.im,
            r.residuals[i],
            r.w_consistency[i]
        );
    }
    timing_lines(&mut report, &r.timing);

    let mut artifacts = Vec::new();
    if let Some(index) = c.dump.eigenfunction {
        let path = match &c.dump.eigenfunction_path {
            Some(p) => PathBuf::from(p),
            None => artifact_path(base, &format!(".u{index}.dat")),
        };
        let sample = eigenfunction_sample(&r, index, c.dump.grid)?;
        sample.write(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        artifacts.push(path);
    }
    if let Some(dir) = &c.dump.matrices {
        r.discretization.pencil.write_matrix_market(Path::new(dir))?;
        artifacts.push(PathBuf::from(dir));
    }
    Ok(Outcome { csv, report, artifacts })
}

fn sweep(c: &RunConfig) -> Result<Outcome, RunError> {
    let pairs: Vec<(usize, usize)> =
        c.level.values().into_iter().flat_map(|l| c.degree.values().into_iter().map(move |n| (n, l))).collect();
    let template = problem_spec(c, pairs[0].0, pairs[0].1)?;
    let rows = convergence_table(&template, &pairs)?;
    // a conjugate pair at the cutoff can add one column
    let count = rows.iter().map(|r| r.wavenumbers.len()).max().unwrap_or(0).max(c.eig.count);
    let mut csv = String::from("N,level,h,dof,dof_doubled");
    for i in 1..=count {
        let _ = write!(csv, ",re_k{i},im_k{i}");
    }
    csv.push_str(",k1_change\n");
    let mut report = report_header(c);
    for row in &rows {
        let _ = write!(csv, "{},{},{},{},{}", row.degree, row.level, num(row.h), row.dofs.per_field, row.dofs.doubled);
        for i in 0..count {
            match row.wavenumbers.get(i) {
                Some(k) => {
                    let _ = write!(csv, ",{},{}", num(k.re), num(k.im));
                }
                None => csv.push_str(",,"),
            }
        }
        let change = row.k1_change.map(num).unwrap_or_default();
        let _ = writeln!(csv, ",{change}");
        let _ = write!(
            report,
            "N = {:2}, level {}: dofs {} per field / {} doubled; k =",
            row.degree, row.level, row.dofs.per_field, row.dofs.doubled
        );
        for k in &row.wavenumbers {
            if k.im.abs() > 1e-10 * k.norm() {
                let _ = write!(report, " {:.10}{:+.10}i", k.re, k.im);
            } else {
                let _ = write!(report, " {:.12}", k.re);
            }
        }
        report.push('\n');
    }
    Ok(Outcome { csv, report, artifacts: vec![] })
}
