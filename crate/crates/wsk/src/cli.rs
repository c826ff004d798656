//! The `wsk` command line: one command per invocation, text in, text out.

use crate::anfun::{parse_rational, AnnulusFunction, EvalIn, StrongUnit};
use crate::annuli::{parse_annulus, Annulus, Disc, Intersection, Validity};
use crate::error::{Error, Result};
use crate::henselrv::{ball_from_rv, h_mn, jacobian_check, rv};
use crate::sample;
use crate::selftest;
use crate::sepseries::{parse_series, snp_reassemble, Caps, RegKind, RegularityReport, SepSeries, Var};
use crate::termnorm::{check_cover, normalize, parse_term, Symbols};
use crate::vfield::{
    parse_elem, parse_field, parse_field_name, parse_hahn, parse_res, teichmuller, Elem, FieldRef, FieldSpec,
};
use clap::{Args, Parser, Subcommand};
use num_rational::Rational64;
use std::fmt::Write;

#[derive(Parser, Debug)]
#[command(name = "wsk", version, about = "Computer algebra over Henselian valued fields with analytic structure")]
pub struct Cli {
    /// Field descriptor, e.g. "Qp p=3 prec=12", "Fpt p=5", "ext base=Q7 eisenstein=y^2-7".
    #[arg(long, global = true, default_value = "Qp p=3 prec=12")]
    pub field: String,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Re-verify every emitted decomposition before printing it.
    #[arg(long, global = true)]
    pub check: bool,
    /// Cap on the total degree in the closed variables.
    #[arg(long, global = true)]
    pub dx: Option<u32>,
    /// Cap on the total degree in the open variables.
    #[arg(long, global = true)]
    pub dr: Option<u32>,
    /// Analytic symbol declaration such as "F[1,1]=x1+r1"; repeatable.
    #[arg(long = "sym", global = true)]
    pub syms: Vec<String>,
    /// Sample count for checks and reports.
    #[arg(long, global = true, default_value_t = 200)]
    pub trials: usize,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Evaluates a field expression, a Teichmüller lift, or a series, annulus
    /// function or term at a point.
    Eval(EvalArgs),
    /// Weierstrass division g = q·f + r.
    Wdiv {
        #[arg(long, allow_hyphen_values = true)]
        g: String,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long)]
        var: Option<String>,
    },
    /// Weierstrass preparation f = u·P, after a change of variables when f is
    /// only preregular.
    Wprep {
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long)]
        var: Option<String>,
    },
    /// Substitutes series for the variables of f.
    Compose {
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long = "arg", allow_hyphen_values = true)]
        args: Vec<String>,
    },
    /// Strong Noetherian decomposition over the listed outer variables.
    Snp {
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long)]
        outer: String,
    },
    #[command(subcommand)]
    Annulus(AnnulusCmd),
    #[command(subcommand)]
    Ml(MlCmd),
    /// Normalizes a term into pieces with R and strong unit E.
    Norm { term: String },
    /// The root of Σ a_i y^i in a given rv class, or 0.
    Hensel {
        /// Coefficients a_0,…,a_m, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        coeffs: String,
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 1)]
        n: u64,
    },
    /// The class rv_n(x), and the ball {x' : rv_n(x' - h) = rv_n(x)} for --ball h.
    Rv {
        #[arg(allow_hyphen_values = true)]
        x: String,
        #[arg(long, default_value_t = 1)]
        n: u64,
        #[arg(long)]
        ball: Option<String>,
    },
    /// Samples the Jacobian property of a rational function on a disc.
    Jac {
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long, allow_hyphen_values = true)]
        center: String,
        /// Radius exponent r of {v(x - c) > r}, e.g. 1 or 1/2.
        #[arg(long)]
        radius: String,
        #[arg(long)]
        closed: bool,
        #[arg(long, default_value_t = 1)]
        n: u64,
    },
    /// Runs the invariant suites.
    Selftest,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// A field expression such as "(1+3)/(2-9) + O(3^5)".
    #[arg(allow_hyphen_values = true)]
    pub expr: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub teich: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub series: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub fun: Option<String>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub term: Option<String>,
    /// Point, comma separated for several variables.
    #[arg(long, allow_hyphen_values = true)]
    pub at: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum AnnulusCmd {
    Validate { formula: String },
    Intersect { a: String, b: String },
    Complement { formula: String },
    Decompose { formula: String },
    Split {
        formula: String,
        #[arg(long)]
        ext: Option<String>,
    },
}

#[derive(Args, Debug)]
pub struct MlArgs {
    #[arg(long)]
    pub host: String,
    #[arg(long, allow_hyphen_values = true)]
    pub f: String,
}

#[derive(Subcommand, Debug)]
pub enum MlCmd {
    Split(MlArgs),
    Factor(MlArgs),
    Strongunit(MlArgs),
}

/// Result of one invocation.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parses and runs a command line (including the program name).
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let mut session = Session { cli: &cli, out: String::new() };
    match session.dispatch() {
        Ok(()) => Outcome { code: 0, stdout: session.out, stderr: String::new() },
        Err(Failure::Report(e, shown)) => Outcome {
            code: e.exit_code(),
            stdout: shown,
            stderr: format!("error: {e}\n"),
        },
    }
}

enum Failure {
    /// The error and the output printed before it.
    Report(Error, String),
}

struct Session<'a> {
    cli: &'a Cli,
    out: String,
}

macro_rules! out {
    ($s:expr, $($arg:tt)*) => {
        writeln!($s.out, $($arg)*).expect("writing to a string")
    };
}

fn check_failed(what: impl std::fmt::Display) -> Error {
    Error::unknown(format!("check failed: {what}"))
}

/// Splits at commas outside parentheses.
fn split_top(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out.retain(|t| !t.is_empty());
    out
}

fn parse_var(s: &str, f: &SepSeries) -> Result<Var> {
    let bad = || Error::parse(0, format!("expected a variable like x1 or r2, found '{s}'"));
    let (kind, idx) = s.split_at(1.min(s.len()));
    let k: usize = idx.parse().map_err(|_| bad())?;
    if k == 0 {
        return Err(bad());
    }
    let v = match kind {
        "x" => Var::Xi(k - 1),
        "r" => Var::Rho(k - 1),
        _ => return Err(bad()),
    };
    let within = match v {
        Var::Xi(i) => i < f.m,
        Var::Rho(j) => j < f.n,
    };
    if !within {
        return Err(Error::domain(format!("no variable {v}")));
    }
    Ok(v)
}

fn var_index(f: &SepSeries, v: Var) -> usize {
    match v {
        Var::Xi(i) => i,
        Var::Rho(j) => f.m + j,
    }
}

/// The regularity report for `var`, or for the first variable in which `f` is regular.
fn pick_regular(f: &SepSeries, var: Option<&str>) -> Result<Option<RegularityReport>> {
    let regular = |r: &RegularityReport| matches!(r.kind, RegKind::Xi | RegKind::Rho);
    if let Some(v) = var {
        let r = f.regular_degree(parse_var(v, f)?)?;
        return if regular(&r) { Ok(Some(r)) } else { Err(Error::domain(format!("not regular in {v}"))) };
    }
    let vars = (0..f.m).map(Var::Xi).chain((0..f.n).map(Var::Rho));
    for v in vars {
        let r = f.regular_degree(v)?;
        if regular(&r) {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

/// Points deep enough in the polydisc that every monomial beyond the caps
/// vanishes at the working precision.
fn deep_points(f: &SepSeries, count: usize, seed: u64) -> Vec<Vec<Elem>> {
    let k = f.field();
    let d = f.caps.dx.min(f.caps.dr) as i64 + 1;
    let s = (k.prec_scaled() + d - 1) / d;
    let pi = Elem::uniformizer(k).pow(s.max(1) as u64);
    let mut rng = sample::rng(seed);
    (0..count)
        .map(|_| (0..f.nvars()).map(|_| pi.mul(&sample::integral(k, &mut rng)).at_working_prec()).collect())
        .collect()
}

fn annulus_points(a: &Annulus, l: &FieldRef, n: usize, seed: u64) -> Result<Vec<Elem>> {
    let mut centers = vec![Elem::zero(l), Elem::one(l)];
    for pc in a.model(l)? {
        centers.push(pc.outer.c.clone());
        centers.extend(pc.holes.iter().map(|d| d.c.clone()));
    }
    let mut rng = sample::rng(seed);
    Ok(sample::points(l, &centers, n, &mut rng))
}

fn is_partition(a: &Annulus, pieces: &[Annulus], l: &FieldRef, trials: usize, seed: u64) -> Result<()> {
    for x in annulus_points(a, l, trials, seed)? {
        let inside = a.contains(&x)? as usize;
        let hits = pieces.iter().map(|p| p.contains(&x)).collect::<Result<Vec<bool>>>()?;
        let count = hits.iter().filter(|h| **h).count();
        if count != inside {
            return Err(check_failed(format!("{count} pieces contain {x}, expected {inside}")));
        }
    }
    Ok(())
}

impl Session<'_> {
    fn dispatch(&mut self) -> std::result::Result<(), Failure> {
        self.command().map_err(|e| Failure::Report(e, std::mem::take(&mut self.out)))
    }

    fn spec(&self) -> Result<FieldSpec> {
        parse_field(&self.cli.field)
    }

    fn field(&self) -> Result<FieldRef> {
        self.spec()?.valued()
    }

    fn caps(&self, k: &FieldRef) -> Caps {
        let d = Caps::for_field(k);
        Caps {
            dx: self.cli.dx.unwrap_or(d.dx),
            dr: self.cli.dr.unwrap_or(d.dr),
            ..d
        }
    }

    fn series(&self, s: &str, k: &FieldRef, min_vars: (usize, usize)) -> Result<SepSeries> {
        parse_series(s, k, self.caps(k), min_vars)
    }

    fn symbols(&self, k: &FieldRef) -> Result<Symbols> {
        let mut syms = Symbols::new();
        for d in &self.cli.syms {
            syms.declare(d, k, self.caps(k))?;
        }
        Ok(syms)
    }

    fn seed_line(&mut self) {
        out!(self, "seed={}", self.cli.seed);
    }

    fn checked(&mut self) {
        out!(self, "check=ok; trials={}; seed={}", self.cli.trials, self.cli.seed);
    }

    fn command(&mut self) -> Result<()> {
        match &self.cli.cmd {
            Cmd::Eval(a) => self.eval(a),
            Cmd::Wdiv { g, f, var } => self.wdiv(g, f, var.as_deref()),
            Cmd::Wprep { f, var } => self.wprep(f, var.as_deref()),
            Cmd::Compose { f, args } => self.compose(f, args),
            Cmd::Snp { f, outer } => self.snp(f, outer),
            Cmd::Annulus(c) => self.annulus(c),
            Cmd::Ml(c) => self.ml(c),
            Cmd::Norm { term } => self.norm(term),
            Cmd::Hensel { coeffs, x0, n } => self.hensel(coeffs, x0, *n),
            Cmd::Rv { x, n, ball } => self.rv(x, *n, ball.as_deref()),
            Cmd::Jac { f, center, radius, closed, n } => self.jac(f, center, radius, *closed, *n),
            Cmd::Selftest => self.selftest(),
        }
    }

    fn eval(&mut self, a: &EvalArgs) -> Result<()> {
        let spec = self.spec()?;
        if let FieldSpec::Hahn(h) = &spec {
            let e = a.expr.as_deref().ok_or_else(|| Error::parse(0, "Hahn fields evaluate expressions only"))?;
            let x = parse_hahn(e, h)?;
            let v = x.val().map_or("inf".to_string(), |v| v.to_string());
            out!(self, "value={x}; val={v}");
            return Ok(());
        }
        let k = spec.valued()?;
        let at = || a.at.as_deref().ok_or_else(|| Error::parse(0, "missing --at"));
        if let Some(r) = &a.teich {
            let x = teichmuller(&parse_res(r, &k)?, &k)?;
            if self.cli.check && !x.pow(k.q()).sub(&x).is_zero() {
                return Err(check_failed("lift is not fixed by the q-th power"));
            }
            out!(self, "teich={x}");
        } else if let Some(s) = &a.series {
            let pts: Vec<&str> = split_top(at()?);
            let f = self.series(s, &k, (0, 0))?;
            let pt = pts.iter().map(|p| parse_elem(p, &k)).collect::<Result<Vec<_>>>()?;
            out!(self, "value={}", f.eval(&pt)?);
        } else if let Some(fs) = &a.fun {
            let host = parse_annulus(a.host.as_deref().unwrap_or("|x| <= (0)"), &k)?;
            let l = host.splitting_field();
            let f = AnnulusFunction::new(host, parse_rational(fs, &k)?)?;
            out!(self, "value={}", f.evaluate(&parse_elem(at()?, &l)?)?);
        } else if let Some(t) = &a.term {
            let syms = self.symbols(&k)?;
            let term = parse_term(t, &syms, &k)?;
            out!(self, "value={}", term.eval(&parse_elem(at()?, &k)?, &syms)?);
        } else {
            let e = a.expr.as_deref().ok_or_else(|| Error::parse(0, "nothing to evaluate"))?;
            let x = parse_elem(e, &k)?;
            let mut line = format!("value={x}; val={}", x.val());
            if let Ok(r) = x.residue() {
                line.push_str(&format!("; residue={}", k.res.fmt_res(&r)));
            }
            out!(self, "{line}");
        }
        Ok(())
    }

    fn wdiv(&mut self, g: &str, f: &str, var: Option<&str>) -> Result<()> {
        let k = self.field()?;
        let f0 = self.series(f, &k, (0, 0))?;
        let g0 = self.series(g, &k, (0, 0))?;
        let f = self.series(f, &k, (f0.m.max(g0.m), f0.n.max(g0.n)))?;
        let g = g0.in_ring_of(&f)?;
        let rep = pick_regular(&f, var)?.ok_or_else(|| Error::domain("divisor is not regular in any variable"))?;
        let (q, r) = SepSeries::weierstrass_divide(&g, &f, &rep)?;
        if self.cli.check {
            if !q.mul(&f).add(&r).eq_mod(&g) {
                return Err(check_failed("g != q*f + r"));
            }
            let i = var_index(&f, rep.var.expect("regular"));
            if r.terms().any(|(e, _)| e.get(i) >= rep.degree) {
                return Err(check_failed(format!("remainder has degree >= {} in {}", rep.degree, rep.var.expect("regular"))));
            }
            let (q2, r2) = SepSeries::weierstrass_divide(&g, &f, &rep)?;
            if q2.to_string() != q.to_string() || r2.to_string() != r.to_string() {
                return Err(check_failed("re-run differs"));
            }
        }
        out!(self, "q={q}; r={r}");
        if self.cli.check {
            self.checked();
        }
        Ok(())
    }

    fn wprep(&mut self, f: &str, var: Option<&str>) -> Result<()> {
        let k = self.field()?;
        let f = self.series(f, &k, (0, 0))?;
        let (target, change, rep) = match pick_regular(&f, var)? {
            Some(rep) => (f.clone(), None, rep),
            None if var.is_none() => {
                let pre = f.preregular_degree()?;
                if pre.kind == RegKind::None {
                    return Err(Error::domain("not preregular"));
                }
                let (g, ch) = f.make_regular(&pre)?;
                let rep = pick_regular(&g, None)?.ok_or_else(|| Error::unknown("change of variables did not regularize"))?;
                (g, Some(ch), rep)
            }
            None => unreachable!("pick_regular errors for an explicit variable"),
        };
        let (u, p) = SepSeries::weierstrass_prepare(&target, &rep)?;
        if self.cli.check {
            if !u.mul(&p).eq_mod(&target) {
                return Err(check_failed("f != u*P"));
            }
            let i = var_index(&target, rep.var.expect("regular"));
            let monic = p.terms().filter(|(e, _)| e.get(i) >= rep.degree).all(|(e, c)| {
                e.get(i) == rep.degree && e.without(i) == crate::sepseries::Mono::ONE && c.sub(&Elem::one(&k)).is_zero()
            });
            if !monic {
                return Err(check_failed("P is not a monic polynomial of the regular degree"));
            }
            if u.sub(&u.one()).terms().any(|(e, c)| c.val() <= crate::vfield::Gamma::ZERO && *e == crate::sepseries::Mono::ONE) {
                return Err(check_failed("u is not a unit"));
            }
        }
        if let Some(ch) = change {
            out!(self, "change={ch}; f'={target}");
        }
        out!(self, "{rep}; u={u}; P={p}");
        if self.cli.check {
            self.checked();
        }
        Ok(())
    }

    fn compose(&mut self, f: &str, args: &[String]) -> Result<()> {
        let k = self.field()?;
        let mut dims = (0, 0);
        for a in args {
            let s = self.series(a, &k, (0, 0))?;
            dims = (dims.0.max(s.m), dims.1.max(s.n));
        }
        let parsed = args.iter().map(|a| self.series(a, &k, dims)).collect::<Result<Vec<_>>>()?;
        let f = self.series(f, &k, (0, 0))?;
        let out = f.compose(&parsed)?;
        if self.cli.check {
            for pt in deep_points(&out, self.cli.trials, self.cli.seed) {
                let inner = parsed.iter().map(|a| a.eval(&pt)).collect::<Result<Vec<_>>>()?;
                if !out.eval(&pt)?.sub(&f.eval(&inner)?).is_zero() {
                    let shown: Vec<String> = pt.iter().map(|x| x.to_string()).collect();
                    return Err(check_failed(format!("composite differs at ({})", shown.join(", "))));
                }
            }
        }
        out!(self, "{out}");
        if self.cli.check {
            self.checked();
        }
        Ok(())
    }

    fn snp(&mut self, f: &str, outer: &str) -> Result<()> {
        let k = self.field()?;
        let f = self.series(f, &k, (0, 0))?;
        let outer = split_top(outer).into_iter().map(|v| parse_var(v, &f).map(|v| var_index(&f, v))).collect::<Result<Vec<_>>>()?;
        let terms = f.snp_decompose(&outer)?;
        if self.cli.check {
            if !snp_reassemble(&terms, &f).eq_mod(&f) {
                return Err(check_failed("summands do not reassemble f"));
            }
            if let Some(t) = terms.iter().find(|t| !t.unit.sub(&t.unit.one()).is_small()) {
                return Err(check_failed(format!("unit factor {} is not 1 + small", t.unit)));
            }
        }
        for (i, t) in terms.iter().enumerate() {
            let names: Vec<String> = outer.iter().map(|&j| f.var_name(j)).collect();
            let mono: Vec<String> = names
                .iter()
                .zip(&t.outer)
                .filter(|(_, e)| **e > 0)
                .map(|(v, e)| if *e == 1 { v.clone() } else { format!("{v}^{e}") })
                .collect();
            let mono = if mono.is_empty() { "1".to_string() } else { mono.join("*") };
            out!(self, "[{}] {}: coeff={}; unit={}", i + 1, mono, t.coeff, t.unit);
        }
        if self.cli.check {
            self.checked();
        }
        Ok(())
    }

    fn annulus(&mut self, c: &AnnulusCmd) -> Result<()> {
        let k = self.field()?;
        let (trials, seed) = (self.cli.trials, self.cli.seed);
        match c {
            AnnulusCmd::Validate { formula } => {
                let a = parse_annulus(formula, &k)?;
                match a.validate()? {
                    Validity::Ok => out!(self, "ok"),
                    Validity::Violation(why) => {
                        out!(self, "violation: {why}");
                        return Err(Error::domain(why));
                    }
                }
            }
            AnnulusCmd::Intersect { a, b } => {
                let (a, b) = (parse_annulus(a, &k)?, parse_annulus(b, &k)?);
                let res = a.intersect(&b)?;
                if self.cli.check {
                    let l = a.splitting_field();
                    for x in annulus_points(&a, &l, trials, seed)? {
                        let want = a.contains(&x)? && b.contains(&x)?;
                        let got = match &res {
                            Intersection::Formula(f) => f.contains(&x)?,
                            Intersection::Empty(_) => false,
                        };
                        if got != want {
                            return Err(check_failed(format!("membership of {x} differs")));
                        }
                    }
                }
                match res {
                    Intersection::Formula(f) => out!(self, "{f}"),
                    Intersection::Empty(why) => out!(self, "empty: {why}"),
                }
            }
            AnnulusCmd::Complement { formula } => {
                let a = parse_annulus(formula, &k)?;
                let comp = a.complement()?;
                if self.cli.check {
                    let mut all = comp.clone();
                    all.push(a.clone());
                    is_partition(&Annulus::unit(&k), &all, &a.splitting_field(), trials, seed)?;
                }
                for (i, p) in comp.iter().enumerate() {
                    out!(self, "[{}] {p}", i + 1);
                }
            }
            AnnulusCmd::Decompose { formula } => {
                let a = parse_annulus(formula, &k)?;
                let dec = a.decompose_standard()?;
                if self.cli.check {
                    let ps: Vec<Annulus> = dec.iter().map(|d| d.0.clone()).collect();
                    is_partition(&a, &ps, &a.splitting_field(), trials, seed)?;
                }
                for (i, (p, kind)) in dec.iter().enumerate() {
                    out!(self, "[{}] {kind}: {p}", i + 1);
                }
            }
            AnnulusCmd::Split { formula, ext } => {
                let a = parse_annulus(formula, &k)?;
                let e = match ext {
                    Some(name) => parse_field_name(name, k.prec)?,
                    None => a.splitting_field(),
                };
                let lin = a.linear_split(&e)?;
                if self.cli.check {
                    is_partition(&a, &lin, &e, trials, seed)?;
                }
                for (i, p) in lin.iter().enumerate() {
                    out!(self, "[{}] {p}", i + 1);
                }
            }
        }
        if self.cli.check {
            self.checked();
        }
        Ok(())
    }

    fn ml(&mut self, c: &MlCmd) -> Result<()> {
        let k = self.field()?;
        let (MlCmd::Split(a) | MlCmd::Factor(a) | MlCmd::Strongunit(a)) = c;
        let f = AnnulusFunction::new(parse_annulus(&a.host, &k)?, parse_rational(&a.f, &k)?)?;
        let pts = if self.cli.check { f.samples(self.cli.trials, self.cli.seed)? } else { Vec::new() };
        match c {
            MlCmd::Split(_) => {
                let parts = f.ml_split()?;
                for x in &pts {
                    let Some(part) = parts.iter().find(|p| p.piece.contains(x).unwrap_or(false)) else {
                        return Err(check_failed(format!("{x} lies in no piece")));
                    };
                    let mut sum = part.outer.eval(x)?;
                    for h in &part.holes {
                        sum = sum.add(&h.eval(x)?);
                    }
                    if !sum.sub(&f.evaluate(x)?).is_zero() {
                        return Err(check_failed(format!("parts do not sum to f at {x}")));
                    }
                }
                for (i, p) in parts.iter().enumerate() {
                    out!(self, "[{}] {}: {p}", i + 1, p.piece.to_annulus());
                }
            }
            MlCmd::Factor(_) => {
                let d = f.unit_factor()?;
                for x in &pts {
                    let mut rhs = d.p.eval_in(x)?.mul(&d.e.evaluate(x)?);
                    for (h, &n) in f.host.holes.iter().zip(&d.n) {
                        rhs = rhs.mul(&h.p.eval_in(x)?.powi(n)?);
                    }
                    if !rhs.sub(&f.evaluate(x)?).is_zero() {
                        return Err(check_failed(format!("factorization differs at {x}")));
                    }
                    if !d.cert.holds_at(&d.e, x)? {
                        return Err(check_failed(format!("certificate fails at {x}")));
                    }
                }
                out!(self, "{d}");
            }
            MlCmd::Strongunit(_) => match f.is_strong_unit()? {
                StrongUnit::Certified(cert) => {
                    for x in &pts {
                        if !cert.holds_at(&f, x)? {
                            return Err(check_failed(format!("certificate fails at {x}")));
                        }
                    }
                    out!(self, "certified {cert}");
                }
                StrongUnit::Refuted(why) => out!(self, "refuted: {why}"),
            },
        }
        if self.cli.check {
            self.checked();
        } else {
            self.seed_line();
        }
        Ok(())
    }

    fn norm(&mut self, t: &str) -> Result<()> {
        let k = self.field()?;
        let syms = self.symbols(&k)?;
        let term = parse_term(t, &syms, &k)?;
        let cover = normalize(&term, &syms, &k)?;
        if self.cli.check {
            let rep = check_cover(&cover, &term, &syms, self.cli.trials, self.cli.seed);
            if !rep.passed() {
                return Err(check_failed(rep));
            }
            out!(self, "{cover}");
            out!(self, "{rep}");
        } else {
            out!(self, "{cover}");
            self.seed_line();
        }
        Ok(())
    }

    fn hensel(&mut self, coeffs: &str, x0: &str, n: u64) -> Result<()> {
        let k = self.field()?;
        let a = split_top(coeffs).into_iter().map(|c| parse_elem(c, &k)).collect::<Result<Vec<_>>>()?;
        let class = rv(&parse_elem(x0, &k)?, n)?;
        let b = h_mn(&a, &class)?;
        if self.cli.check && !b.is_zero() {
            let mut fb = Elem::zero(&k);
            for c in a.iter().rev() {
                fb = fb.mul(&b).add(c);
            }
            if !fb.is_zero() || !class.contains(&b)? {
                return Err(check_failed(format!("{b} is not a root in {class}")));
            }
        }
        out!(self, "class={class}; h={b}");
        if self.cli.check {
            self.checked();
        }
        Ok(())
    }

    fn rv(&mut self, x: &str, n: u64, ball: Option<&str>) -> Result<()> {
        let k = self.field()?;
        let class = rv(&parse_elem(x, &k)?, n)?;
        match ball {
            Some(h) => {
                let d = ball_from_rv(&parse_elem(h, &k)?, &class)?;
                out!(self, "{class}; ball={d}");
            }
            None => out!(self, "{class}"),
        }
        Ok(())
    }

    fn jac(&mut self, f: &str, center: &str, radius: &str, closed: bool, n: u64) -> Result<()> {
        let k = self.field()?;
        let f = parse_rational(f, &k)?;
        let r: Rational64 = radius.trim().parse().map_err(|_| Error::parse(0, format!("bad radius '{radius}'")))?;
        let ball = Disc {
            c: parse_elem(center, &k)?,
            r,
            open: !closed,
        };
        let rep = jacobian_check(&f, &ball, n, self.cli.trials, self.cli.seed)?;
        out!(self, "{rep}");
        Ok(())
    }

    fn selftest(&mut self) -> Result<()> {
        let results = selftest::run(self.cli.seed);
        let mut failed = Vec::new();
        for s in &results {
            out!(self, "{s}");
            if !s.passed() {
                failed.push(s.name);
            }
        }
        self.seed_line();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::unknown(format!("failing suites: {}", failed.join(", "))))
        }
    }
}
