//! K-annuli: formulas `|p0| ≤ ε0 ∧ |p1| ≥ ε1 ∧ …` inside the closed unit disc,
//! their linear models over a splitting field, and the set algebra on them.
//!
//! Radii are valuation exponents: `|p| <= (q)` means `v(p(x)) ≥ q`.

use crate::error::{Error, Result};
use crate::poly::{parse_poly, root_clusters, roots_in_field, Poly, RootCluster};
use crate::vfield::{parse_elem, parse_field_name, parse_gamma, Elem, Field, FieldRef, Gamma};
use num_rational::Rational64;
use num_traits::{Signed, Zero};
use std::fmt;

/// `{v(p(x)) ≥ q}` when closed, `{v(p(x)) > q}` when open.
#[derive(Clone, Debug)]
pub struct Ball {
    pub p: Poly,
    pub q: Rational64,
    pub open: bool,
}

/// A K-annulus: the points of the closed unit disc lying in every outer
/// ball and in no hole ball. With no outer ball the outer region is `|x| ≤ 1`.
#[derive(Clone, Debug)]
pub struct Annulus {
    pub field: FieldRef,
    pub outer: Vec<Ball>,
    pub holes: Vec<Ball>,
    /// Extension in which the roots of all atom polynomials are sought.
    pub split: Option<FieldRef>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnnulusKind {
    Thin,
    Laurent,
    Disc,
    AlmostThin,
    General,
}

impl fmt::Display for AnnulusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AnnulusKind::Thin => "thin",
            AnnulusKind::Laurent => "laurent",
            AnnulusKind::Disc => "disc",
            AnnulusKind::AlmostThin => "almost-thin",
            AnnulusKind::General => "general",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validity {
    Ok,
    Violation(String),
}

#[derive(Clone, Debug)]
pub enum Intersection {
    Formula(Annulus),
    Empty(String),
}

/// A disc `{v(x - c) ≥ r}` or `{v(x - c) > r}` with center in the splitting field.
#[derive(Clone, Debug)]
pub struct Disc {
    pub c: Elem,
    pub r: Rational64,
    pub open: bool,
}

/// A linear annulus over the splitting field: one disc minus disjoint discs.
#[derive(Clone, Debug)]
pub struct LinearPiece {
    pub outer: Disc,
    pub holes: Vec<Disc>,
}

/// Compares `|R(x)|` with ε.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbsCmp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl AbsCmp {
    pub fn parse(s: &str) -> Option<AbsCmp> {
        match s {
            "<=" => Some(AbsCmp::Le),
            "<" => Some(AbsCmp::Lt),
            ">=" => Some(AbsCmp::Ge),
            ">" => Some(AbsCmp::Gt),
            _ => None,
        }
    }

    /// Whether a valuation `v` of R satisfies the comparison against exponent q.
    fn holds(self, v: Gamma, q: Rational64) -> bool {
        let q = Gamma::Fin(q);
        match self {
            AbsCmp::Le => v >= q,
            AbsCmp::Lt => v > q,
            AbsCmp::Ge => v <= q,
            AbsCmp::Gt => v < q,
        }
    }
}

impl fmt::Display for AbsCmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AbsCmp::Le => "<=",
            AbsCmp::Lt => "<",
            AbsCmp::Ge => ">=",
            AbsCmp::Gt => ">",
        };
        f.write_str(s)
    }
}

/// R = num/den on a piece of a sign cover.
#[derive(Clone, Debug)]
pub struct RationalWitness {
    pub num: Poly,
    pub den: Poly,
    /// No pole of R lies in the piece.
    pub holomorphic: bool,
}

#[derive(Clone, Debug)]
pub struct SignCover {
    /// Poles, and zeros at which the pieces disagree with the condition.
    pub exceptional: Vec<Elem>,
    pub pieces: Vec<(Annulus, RationalWitness)>,
}

/// Brings two elements into a common field.
pub fn common(a: &Elem, b: &Elem) -> Result<(Elem, Elem)> {
    if a.field().contains(b.field()) {
        Ok((a.clone(), b.embed(a.field())?))
    } else {
        Ok((a.embed(b.field())?, b.clone()))
    }
}

/// Decides `v(a) ≥ q` (closed) or `v(a) > q` (open) at the precision of `a`.
pub fn val_meets(a: &Elem, q: Rational64, open: bool) -> Result<bool> {
    match a.val() {
        Gamma::Fin(v) => Ok(if open { v > q } else { v >= q }),
        Gamma::Inf => match a.prec() {
            Gamma::Inf => Ok(true),
            Gamma::Fin(pr) => {
                if pr > q || (!open && pr == q) {
                    Ok(true)
                } else {
                    Err(Error::precision(format!(
                        "cannot compare a valuation with {q} at precision {pr}"
                    )))
                }
            }
        },
    }
}

fn diff_val(a: &Elem, b: &Elem) -> Result<Gamma> {
    let (x, y) = common(a, b)?;
    Ok(x.sub(&y).val())
}

fn finite_diff(a: &Elem, b: &Elem) -> Result<Rational64> {
    diff_val(a, b)?
        .fin()
        .ok_or_else(|| Error::precision("roots are not separated at this precision"))
}

impl Ball {
    pub fn contains(&self, x: &Elem) -> Result<bool> {
        val_meets(&self.p.eval(x), self.q, self.open)
    }

    fn text(&self, hole: bool) -> String {
        let op = match (hole, self.open) {
            (false, false) => "<=",
            (false, true) => "<",
            (true, true) => ">=",
            (true, false) => ">",
        };
        format!("|{}| {op} ({})", self.p, self.q)
    }

    fn from_disc(d: &Disc) -> Ball {
        Ball {
            p: Poly::linear(&d.c),
            q: d.r,
            open: d.open,
        }
    }
}

impl Disc {
    pub fn unit(l: &FieldRef) -> Disc {
        Disc {
            c: Elem::zero(l),
            r: Rational64::zero(),
            open: false,
        }
    }

    pub fn contains(&self, x: &Elem) -> Result<bool> {
        let (a, b) = common(x, &self.c)?;
        val_meets(&a.sub(&b), self.r, self.open)
    }

    pub fn subset(&self, o: &Disc) -> Result<bool> {
        let radius_ok = self.r > o.r || (self.r == o.r && (self.open || !o.open));
        Ok(radius_ok && o.contains(&self.c)?)
    }

    pub fn same(&self, o: &Disc) -> Result<bool> {
        Ok(self.subset(o)? && o.subset(self)?)
    }

    pub fn meets(&self, o: &Disc) -> Result<bool> {
        Ok(self.contains(&o.c)? || o.contains(&self.c)?)
    }

    pub fn intersect(&self, o: &Disc) -> Result<Option<Disc>> {
        if self.subset(o)? {
            Ok(Some(self.clone()))
        } else if o.subset(self)? {
            Ok(Some(o.clone()))
        } else {
            Ok(None)
        }
    }

    /// Replaces the center by a short exact representative of the same disc.
    fn tidy(mut self) -> Disc {
        let e = self.c.field().e as i64;
        let re = self.r * e;
        let ks = if self.open { re.floor().to_integer() + 1 } else { re.ceil().to_integer() };
        if self.c.prec_s() < ks {
            return self;
        }
        let a = self.c.truncate_exact(ks);
        let b = self.c.neg().truncate_exact(ks).neg();
        self.c = if b.to_string().len() < a.to_string().len() { b } else { a };
        self
    }

    /// Intersection with the closed unit disc.
    fn clip(self) -> Result<Option<Disc>> {
        let l = self.c.field().clone();
        if !self.c.val().is_nonneg() {
            return Ok(if self.contains(&Elem::zero(&l))? { Some(Disc::unit(&l)) } else { None });
        }
        if self.r.is_negative() || (self.r.is_zero() && !self.open) {
            return Ok(Some(Disc::unit(&l)));
        }
        Ok(Some(self))
    }

    fn sort_key(&self) -> (Rational64, bool, String) {
        (self.r, self.open, self.c.to_string())
    }
}

impl fmt::Display for Disc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.open { "<" } else { "<=" };
        write!(f, "|{}| {op} ({})", Poly::linear(&self.c), self.r)
    }
}

/// Keeps the maximal discs of a list of pairwise nested-or-disjoint discs.
fn maximal(mut ds: Vec<Disc>) -> Result<Vec<Disc>> {
    ds.sort_by_key(|d| d.sort_key());
    let mut out: Vec<Disc> = Vec::new();
    for d in ds {
        let mut covered = false;
        for o in &out {
            if d.subset(o)? {
                covered = true;
                break;
            }
        }
        if !covered {
            let mut kept = Vec::new();
            for o in out {
                if !o.subset(&d)? {
                    kept.push(o);
                }
            }
            kept.push(d);
            out = kept;
        }
    }
    out.sort_by_key(|d| d.sort_key());
    Ok(out)
}

fn intersect_unions(a: &[Disc], b: &[Disc]) -> Result<Vec<Disc>> {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            if let Some(z) = x.intersect(y)? {
                out.push(z);
            }
        }
    }
    maximal(out)
}

/// Radius r solving `Σ m_j·min(r, d_j) = target`, the root itself counted
/// with `m_self` and infinite distance.
fn radius_for(m_self: usize, others: &[(Rational64, usize)], target: Rational64) -> Rational64 {
    let mut pts = others.to_vec();
    pts.sort();
    let mut slope = (m_self + pts.iter().map(|x| x.1).sum::<usize>()) as i64;
    let mut konst = Rational64::zero();
    for (d, m) in pts {
        if target <= Rational64::from_integer(slope) * d + konst {
            break;
        }
        slope -= m as i64;
        konst += d * m as i64;
    }
    (target - konst) / slope
}

fn split_err(e: Error, what: &str) -> Error {
    match e {
        Error::Domain(m) => Error::domain(format!("{what}: {m}")),
        other => other,
    }
}

/// The discs over `l` whose union is the ball intersected with the unit disc.
pub fn ball_discs(b: &Ball, l: &FieldRef) -> Result<Vec<Disc>> {
    ball_discs_ctx(b, l, "splitting data required")
}

fn ball_discs_ctx(b: &Ball, l: &FieldRef, what: &str) -> Result<Vec<Disc>> {
    let p = b.p.embed(l)?;
    if p.is_zero() {
        return Ok(vec![Disc::unit(l)]);
    }
    if p.deg() == 0 {
        return Ok(if val_meets(&p.lc(), b.q, b.open)? { vec![Disc::unit(l)] } else { Vec::new() });
    }
    let lc_val = p
        .lc()
        .val()
        .fin()
        .ok_or_else(|| Error::precision("leading coefficient vanishes at precision"))?;
    let roots = roots_in_field(&p).map_err(|e| split_err(e, what))?;
    let target = b.q - lc_val;
    let mut out = Vec::new();
    for (i, (a, m)) in roots.iter().enumerate() {
        let mut others = Vec::new();
        for (j, (c, mj)) in roots.iter().enumerate() {
            if i != j {
                others.push((finite_diff(a, c)?, *mj));
            }
        }
        let r = radius_for(*m, &others, target);
        let d = Disc {
            c: a.clone(),
            r,
            open: b.open,
        };
        if let Some(d) = d.clip()? {
            out.push(d.tidy());
        }
    }
    maximal(out)
}

impl LinearPiece {
    pub fn contains(&self, x: &Elem) -> Result<bool> {
        if !self.outer.contains(x)? {
            return Ok(false);
        }
        for h in &self.holes {
            if h.contains(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn same(&self, o: &LinearPiece) -> Result<bool> {
        if self.holes.len() != o.holes.len() || !self.outer.same(&o.outer)? {
            return Ok(false);
        }
        for h in &self.holes {
            let mut found = false;
            for k in &o.holes {
                if h.same(k)? {
                    found = true;
                    break;
                }
            }
            if !found {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Intersection over the algebraic closure; `None` when empty.
    pub fn intersect(&self, o: &LinearPiece) -> Result<Option<LinearPiece>> {
        let Some(outer) = self.outer.intersect(&o.outer)? else {
            return Ok(None);
        };
        let mut holes = Vec::new();
        for h in self.holes.iter().chain(&o.holes) {
            if outer.subset(h)? {
                return Ok(None);
            }
            if h.subset(&outer)? {
                holes.push(h.clone());
            }
        }
        Ok(Some(LinearPiece {
            outer,
            holes: maximal(holes)?,
        }))
    }

    /// The piece as a linear formula over the field of its centers.
    pub fn to_annulus(&self) -> Annulus {
        Annulus {
            field: self.outer.c.field().clone(),
            outer: vec![Ball::from_disc(&self.outer)],
            holes: self.holes.iter().map(Ball::from_disc).collect(),
            split: None,
        }
    }
}

/// Glues `A` and `B` whenever a hole of `A` is the outer disc of `B`.
pub fn merge_pieces(mut ps: Vec<LinearPiece>) -> Result<Vec<LinearPiece>> {
    'again: loop {
        for i in 0..ps.len() {
            for j in 0..ps.len() {
                if i == j {
                    continue;
                }
                let mut hit = None;
                for (k, h) in ps[i].holes.iter().enumerate() {
                    if h.same(&ps[j].outer)? {
                        hit = Some(k);
                        break;
                    }
                }
                if let Some(k) = hit {
                    let b = ps.remove(j);
                    let a = &mut ps[if j < i { i - 1 } else { i }];
                    a.holes.remove(k);
                    a.holes.extend(b.holes);
                    a.holes.sort_by_key(|d| d.sort_key());
                    continue 'again;
                }
            }
        }
        return Ok(ps);
    }
}

fn same_model(a: &[LinearPiece], b: &[LinearPiece]) -> Result<bool> {
    if a.len() != b.len() {
        return Ok(false);
    }
    for x in a {
        let mut found = false;
        for y in b {
            if x.same(y)? {
                found = true;
                break;
            }
        }
        if !found {
            return Ok(false);
        }
    }
    Ok(true)
}

fn fmt_ball_list(ds: &[Disc]) -> String {
    if ds.is_empty() {
        return "nothing".to_string();
    }
    ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" or ")
}

impl Annulus {
    /// The closed unit disc.
    pub fn unit(field: &FieldRef) -> Annulus {
        Annulus {
            field: field.clone(),
            outer: Vec::new(),
            holes: Vec::new(),
            split: None,
        }
    }

    pub fn splitting_field(&self) -> FieldRef {
        self.split.clone().unwrap_or_else(|| self.field.clone())
    }

    /// Membership by direct evaluation of the atoms.
    pub fn contains(&self, x: &Elem) -> Result<bool> {
        if !val_meets(x, Rational64::zero(), false)? {
            return Ok(false);
        }
        for b in &self.outer {
            if !b.contains(x)? {
                return Ok(false);
            }
        }
        for h in &self.holes {
            if h.contains(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All atom polynomials have degree one.
    pub fn is_linear(&self) -> bool {
        self.outer.iter().chain(&self.holes).all(|b| b.p.deg() == 1)
    }

    fn outer_region(&self, l: &FieldRef, what: &str) -> Result<Vec<Disc>> {
        let mut region = vec![Disc::unit(l)];
        for b in &self.outer {
            let ds = ball_discs_ctx(b, l, what)?;
            region = intersect_unions(&region, &ds)?;
        }
        Ok(region)
    }

    /// The unique decomposition into linear annuli over `l`.
    pub fn model(&self, l: &FieldRef) -> Result<Vec<LinearPiece>> {
        self.model_ctx(l, "splitting data required")
    }

    fn model_ctx(&self, l: &FieldRef, what: &str) -> Result<Vec<LinearPiece>> {
        let region = self.outer_region(l, what)?;
        let mut hole_discs = Vec::new();
        for h in &self.holes {
            hole_discs.extend(ball_discs_ctx(h, l, what)?);
        }
        let hole_discs = maximal(hole_discs)?;
        let mut out = Vec::new();
        'outer: for o in region {
            let mut inside = Vec::new();
            for h in &hole_discs {
                if o.subset(h)? {
                    continue 'outer;
                }
                if h.subset(&o)? {
                    inside.push(h.clone());
                }
            }
            out.push(LinearPiece { outer: o, holes: inside });
        }
        Ok(out)
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.model(&self.splitting_field())?.is_empty())
    }

    /// Holes lie in the outer region and are pairwise disjoint.
    pub fn validate(&self) -> Result<Validity> {
        let l = self.splitting_field();
        let region = self.outer_region(&l, "splitting data required")?;
        let mut per_hole = Vec::new();
        for (i, h) in self.holes.iter().enumerate() {
            let ds = ball_discs(h, &l)?;
            for d in &ds {
                let mut ok = false;
                for o in &region {
                    if d.subset(o)? {
                        ok = true;
                        break;
                    }
                }
                if !ok {
                    return Ok(Validity::Violation(format!(
                        "hole {} excludes {d}, which is not contained in the outer region {}",
                        i + 1,
                        fmt_ball_list(&region)
                    )));
                }
            }
            per_hole.push(ds);
        }
        for i in 0..per_hole.len() {
            for j in i + 1..per_hole.len() {
                for a in &per_hole[i] {
                    for b in &per_hole[j] {
                        if a.meets(b)? {
                            return Ok(Validity::Violation(format!(
                                "holes {} and {} overlap: {a} meets {b}",
                                i + 1,
                                j + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(Validity::Ok)
    }

    fn joint_split(&self, o: &Annulus) -> Result<Option<FieldRef>> {
        if self.field.name != o.field.name {
            return Err(Error::domain(format!(
                "annuli over different fields {} and {}",
                self.field.name, o.field.name
            )));
        }
        Ok(match (&self.split, &o.split) {
            (None, x) | (x, None) => x.clone(),
            (Some(a), Some(b)) => Some(
                Field::join(a, b).map_err(|_| Error::domain("splitting data required: incompatible extensions"))?,
            ),
        })
    }

    /// Intersection, with redundant atoms removed, or a witness of emptiness.
    pub fn intersect(&self, o: &Annulus) -> Result<Intersection> {
        let split = self.joint_split(o)?;
        let cur = Annulus {
            field: self.field.clone(),
            outer: self.outer.iter().chain(&o.outer).cloned().collect(),
            holes: self.holes.iter().chain(&o.holes).cloned().collect(),
            split,
        };
        let l = cur.splitting_field();
        let target = cur.model(&l)?;
        if target.is_empty() {
            let ra = self.outer_region(&l, "splitting data required")?;
            let rb = o.outer_region(&l, "splitting data required")?;
            let joint = intersect_unions(&ra, &rb)?;
            let why = if joint.is_empty() {
                format!(
                    "the outer regions are disjoint: {} versus {}",
                    fmt_ball_list(&ra),
                    fmt_ball_list(&rb)
                )
            } else {
                format!("the joint outer region {} lies inside the holes", fmt_ball_list(&joint))
            };
            return Ok(Intersection::Empty(why));
        }
        Ok(Intersection::Formula(cur.pruned(&l, &target)?))
    }

    /// Drops atoms whose removal leaves the model over `l` unchanged.
    fn pruned(mut self, l: &FieldRef, target: &[LinearPiece]) -> Result<Annulus> {
        let mut i = 0;
        while i < self.outer.len() {
            let mut trial = self.clone();
            trial.outer.remove(i);
            if same_model(&trial.model(l)?, target)? {
                self = trial;
            } else {
                i += 1;
            }
        }
        let mut i = 0;
        while i < self.holes.len() {
            let mut trial = self.clone();
            trial.holes.remove(i);
            if same_model(&trial.model(l)?, target)? {
                self = trial;
            } else {
                i += 1;
            }
        }
        Ok(self)
    }

    /// Disjoint annuli covering the rest of the closed unit disc.
    pub fn complement(&self) -> Result<Vec<Annulus>> {
        let mut out = Vec::new();
        for k in 0..self.outer.len() {
            let piece = Annulus {
                field: self.field.clone(),
                outer: self.outer[..k].to_vec(),
                holes: vec![self.outer[k].clone()],
                split: self.split.clone(),
            };
            if !piece.is_empty()? {
                out.push(piece);
            }
        }
        for h in &self.holes {
            let piece = Annulus {
                field: self.field.clone(),
                outer: self.outer.iter().chain([h]).cloned().collect(),
                holes: Vec::new(),
                split: self.split.clone(),
            };
            let l = piece.splitting_field();
            let model = piece.model(&l)?;
            if !model.is_empty() {
                out.push(piece.pruned(&l, &model)?);
            }
        }
        Ok(out)
    }

    /// Linear annuli over `e` whose union is this annulus.
    pub fn linear_split(&self, e: &FieldRef) -> Result<Vec<Annulus>> {
        if !e.contains(&self.field) {
            return Err(Error::domain(format!("{} does not contain {}", e.name, self.field.name)));
        }
        let pieces = self.model_ctx(e, "insufficient extension")?;
        Ok(pieces.iter().map(|p| p.to_annulus()).collect())
    }

    /// Disjoint thin, Laurent and open-disc pieces covering this annulus.
    pub fn decompose_standard(&self) -> Result<Vec<(Annulus, AnnulusKind)>> {
        let l = self.splitting_field();
        let mut out = Vec::new();
        for piece in self.model(&l)? {
            decompose_closed_or_open(&piece.outer, &piece.holes, &mut out)?;
        }
        Ok(out)
    }
}

fn emit(outer: Disc, holes: Vec<Disc>, kind: AnnulusKind, out: &mut Vec<(Annulus, AnnulusKind)>) {
    let p = LinearPiece { outer, holes };
    out.push((p.to_annulus(), kind));
}

/// Groups items by the open disc of radius r around them; returns a
/// representative center for each group.
fn residue_groups<T: Clone>(items: &[T], center: impl Fn(&T) -> Elem, r: Rational64) -> Result<Vec<(Elem, Vec<T>)>> {
    let mut groups: Vec<(Elem, Vec<T>)> = Vec::new();
    for it in items {
        let c = center(it);
        let mut placed = false;
        for g in groups.iter_mut() {
            let (a, b) = common(&g.0, &c)?;
            if val_meets(&a.sub(&b), r, true)? {
                g.1.push(it.clone());
                placed = true;
                break;
            }
        }
        if !placed {
            groups.push((c, vec![it.clone()]));
        }
    }
    Ok(groups)
}

fn decompose_closed_or_open(d: &Disc, holes: &[Disc], out: &mut Vec<(Annulus, AnnulusKind)>) -> Result<()> {
    for h in holes {
        if d.subset(h)? {
            return Ok(());
        }
    }
    if d.open {
        if holes.is_empty() {
            emit(d.clone(), Vec::new(), AnnulusKind::Disc, out);
            return Ok(());
        }
        let c1 = holes[0].c.clone();
        let mut s = holes.iter().map(|h| h.r).min().expect("holes");
        for i in 0..holes.len() {
            for j in i + 1..holes.len() {
                s = s.min(finite_diff(&holes[i].c, &holes[j].c)?);
            }
        }
        let ring_outer = Disc { c: c1.clone(), r: d.r, open: true };
        let inner = Disc { c: c1, r: s, open: false };
        emit(ring_outer, vec![inner.clone()], AnnulusKind::Laurent, out);
        return decompose_closed_or_open(&inner, holes, out);
    }
    let groups = residue_groups(holes, |h| h.c.clone(), d.r)?;
    if groups.is_empty() {
        let center = Disc { c: d.c.clone(), r: d.r, open: true };
        emit(d.clone(), vec![center.clone()], AnnulusKind::Thin, out);
        return decompose_closed_or_open(&center, &[], out);
    }
    let classes: Vec<Disc> = groups
        .iter()
        .map(|g| Disc { c: g.0.clone(), r: d.r, open: true })
        .collect();
    emit(d.clone(), classes.clone(), AnnulusKind::Thin, out);
    for (cls, g) in classes.iter().zip(&groups) {
        decompose_closed_or_open(cls, &g.1, out)?;
    }
    Ok(())
}

struct Root {
    a: Elem,
    m: i64,
    depth: Gamma,
}

/// An integral root or root cluster used as a branching point of the walk.
#[derive(Clone)]
struct Pt {
    a: Elem,
    depth: Gamma,
}

struct SignCtx<'a> {
    roots: &'a [Root],
    a0: Rational64,
    q: Rational64,
    cmp: AbsCmp,
}

/// A selected region produced by the sign walk.
enum Region {
    All(Disc, Vec<Disc>),
}

/// `v(c - α)` for a root or cluster, capped at `r`.
fn root_dist(c: &Elem, a: &Elem, depth: Gamma, r: Gamma) -> Result<Gamma> {
    Ok(diff_val(c, a)?.min(depth).min(r))
}

impl SignCtx<'_> {
    /// Valuation of R on a region where `v(x - α) = min(v(c - α), r)`.
    fn constant(&self, c: &Elem, r: Rational64) -> Result<Rational64> {
        let mut v = self.a0;
        for rt in self.roots {
            let d = root_dist(c, &rt.a, rt.depth, Gamma::Fin(r))?.unwrap();
            v += d * rt.m;
        }
        Ok(v)
    }

    fn take_constant(&self, c: &Elem, r: Rational64, outer: Disc, holes: Vec<Disc>, out: &mut Vec<Region>) -> Result<bool> {
        let v = self.constant(c, r)?;
        let ok = self.cmp.holds(Gamma::Fin(v), self.q);
        if ok {
            out.push(Region::All(outer, holes));
        }
        Ok(ok)
    }

    fn closed(&self, c: &Elem, r: Rational64, pts: &[Pt], out: &mut Vec<Region>) -> Result<bool> {
        let d = Disc { c: c.clone(), r, open: false };
        let pts: Vec<Pt> = pts.iter().filter(|p| p.depth > Gamma::Fin(r)).cloned().collect();
        if pts.is_empty() {
            return self.take_constant(c, r, d, Vec::new(), out);
        }
        let groups = residue_groups(&pts, |x| x.a.clone(), r)?;
        let classes: Vec<Disc> = groups
            .iter()
            .map(|g| Disc { c: g.0.clone(), r, open: true })
            .collect();
        let mut all = self.take_constant(c, r, d, classes, out)?;
        for g in &groups {
            all &= self.open(r, &g.1, out)?;
        }
        Ok(all)
    }

    /// Open disc of radius r around the points `pts`.
    fn open(&self, r: Rational64, pts: &[Pt], out: &mut Vec<Region>) -> Result<bool> {
        let c1 = pts[0].a.clone();
        let mut s: Option<Rational64> = None;
        let mut lower = |d: Rational64| s = Some(s.map_or(d, |x: Rational64| x.min(d)));
        for (i, p) in pts.iter().enumerate() {
            if let Gamma::Fin(d) = p.depth {
                lower(d);
            }
            for o in &pts[i + 1..] {
                if let Gamma::Fin(d) = diff_val(&p.a, &o.a)? {
                    lower(d);
                }
            }
        }
        // On r < t < s with t = v(x - c1): v(R) = a + k t.
        let mut a = self.a0;
        let mut k = 0i64;
        for rt in self.roots {
            match root_dist(&c1, &rt.a, rt.depth, Gamma::Inf)? {
                Gamma::Fin(x) if x <= r => a += x * rt.m,
                _ => k += rt.m,
            }
        }
        let all = self.ring(&c1, r, s, a, k, out)?;
        match s {
            Some(s) => Ok(self.closed(&c1, s, pts, out)? && all),
            None => Ok(all),
        }
    }

    fn ring(&self, c1: &Elem, r: Rational64, s: Option<Rational64>, a: Rational64, k: i64, out: &mut Vec<Region>) -> Result<bool> {
        let whole = |out: &mut Vec<Region>| {
            let holes = s.map(|s| vec![Disc { c: c1.clone(), r: s, open: false }]).unwrap_or_default();
            out.push(Region::All(Disc { c: c1.clone(), r, open: true }, holes));
        };
        if k == 0 {
            let ok = self.cmp.holds(Gamma::Fin(a), self.q);
            if ok {
                whole(out);
            }
            return Ok(ok);
        }
        let t = (self.q - a) / k;
        // The condition reads t ⋈ t* with ⋈ one of ≥, >, ≤, <.
        let (lower, strict) = match self.cmp {
            AbsCmp::Le => (k > 0, false),
            AbsCmp::Lt => (k > 0, true),
            AbsCmp::Ge => (k < 0, false),
            AbsCmp::Gt => (k < 0, true),
        };
        if lower {
            if t <= r {
                whole(out);
                return Ok(true);
            }
            if s.is_some_and(|s| t >= s) {
                return Ok(false);
            }
            let holes = s.map(|s| vec![Disc { c: c1.clone(), r: s, open: false }]).unwrap_or_default();
            out.push(Region::All(Disc { c: c1.clone(), r: t, open: strict }, holes));
            Ok(false)
        } else {
            if t <= r {
                return Ok(false);
            }
            if s.is_some_and(|s| t >= s) {
                whole(out);
                return Ok(true);
            }
            let hole = Disc { c: c1.clone(), r: t, open: !strict };
            out.push(Region::All(Disc { c: c1.clone(), r, open: true }, vec![hole]));
            Ok(false)
        }
    }
}

/// Annuli covering `{x ∈ K° : |num(x)/den(x)| ⋈ |π|^q}` off a finite set,
/// with roots located in `l`.
pub fn cover_by_sign(num: &Poly, den: &Poly, q: Rational64, cmp: AbsCmp, l: &FieldRef) -> Result<SignCover> {
    if den.is_zero() {
        return Err(Error::domain("denominator is zero"));
    }
    let n = num.embed(l)?;
    let d = den.embed(l)?;
    let witness = |holo: bool| RationalWitness {
        num: num.clone(),
        den: den.clone(),
        holomorphic: holo,
    };
    let clusters = |p: &Poly| -> Result<Vec<RootCluster>> {
        if p.deg() == 0 {
            return Ok(Vec::new());
        }
        root_clusters(p).map_err(|e| split_err(e, "splitting data required"))
    };
    let (nc, dc) = (clusters(&n)?, clusters(&d)?);
    // Integral poles: points for S when located, cluster centers otherwise.
    let mut poles = Vec::new();
    let mut pole_centers = Vec::new();
    for c in &dc {
        if c.a.val().is_nonneg() && c.depth.is_positive() {
            if c.depth.is_inf() {
                poles.push(c.a.clone());
            }
            pole_centers.push(c.a.clone());
        }
    }
    if n.is_zero() {
        let pieces = if cmp.holds(Gamma::Inf, q) {
            vec![(Annulus::unit(l), witness(pole_centers.is_empty()))]
        } else {
            Vec::new()
        };
        return Ok(SignCover { exceptional: poles, pieces });
    }
    let lead = |p: &Poly| {
        p.lc()
            .val()
            .fin()
            .ok_or_else(|| Error::precision("leading coefficient vanishes at precision"))
    };
    let a_lc = lead(&n)? - lead(&d)?;
    let mut roots: Vec<Root> = Vec::new();
    let signed = nc.into_iter().map(|c| (c, 1i64)).chain(dc.into_iter().map(|c| (c, -1i64)));
    'next: for (c, sign) in signed {
        for r in roots.iter_mut() {
            if r.depth == c.depth && diff_val(&r.a, &c.a)?.is_inf() {
                r.m += sign * c.m as i64;
                continue 'next;
            }
        }
        roots.push(Root {
            a: c.a,
            m: sign * c.m as i64,
            depth: c.depth,
        });
    }
    roots.retain(|r| r.m != 0);
    let pts: Vec<Pt> = roots
        .iter()
        .filter(|r| r.a.val().is_nonneg())
        .map(|r| Pt {
            a: r.a.clone(),
            depth: r.depth,
        })
        .collect();
    let ctx = SignCtx {
        roots: &roots,
        a0: a_lc,
        q,
        cmp,
    };
    let mut regions = Vec::new();
    let all = ctx.closed(&Elem::zero(l), Rational64::zero(), &pts, &mut regions)?;
    let mut pieces: Vec<Annulus> = if all {
        vec![Annulus::unit(l)]
    } else {
        let lin = regions
            .into_iter()
            .map(|Region::All(o, h)| LinearPiece {
                outer: o.tidy(),
                holes: h.into_iter().map(Disc::tidy).collect(),
            })
            .collect();
        merge_pieces(lin)?.iter().map(LinearPiece::to_annulus).collect()
    };
    for p in pieces.iter_mut() {
        if p.outer.is_empty() {
            p.field = l.clone();
        }
    }
    let mut exceptional = poles.clone();
    for r in &roots {
        if r.m > 0 && r.depth.is_inf() && r.a.val().is_nonneg() {
            let truth = cmp.holds(Gamma::Inf, q);
            let mut inside = false;
            for p in &pieces {
                if p.contains(&r.a)? {
                    inside = true;
                    break;
                }
            }
            if inside != truth {
                exceptional.push(r.a.clone());
            }
        }
    }
    let mut out = Vec::new();
    for p in pieces {
        let mut holo = true;
        for a in &pole_centers {
            if p.contains(a)? {
                holo = false;
            }
        }
        out.push((p, witness(holo)));
    }
    Ok(SignCover { exceptional, pieces: out })
}

fn parse_rhs(s: &str, field: &FieldRef, pos: usize) -> Result<Rational64> {
    let t = s.trim();
    let off = pos + (s.len() - s.trim_start().len());
    if t == "1" {
        return Ok(Rational64::zero());
    }
    if let Some(inner) = t.strip_prefix('(').and_then(|x| x.strip_suffix(')')) {
        return parse_gamma(inner.trim())
            .and_then(|g| g.fin())
            .ok_or_else(|| Error::parse(off + 1, format!("expected a rational exponent, found '{inner}'")));
    }
    if let Some(inner) = t.strip_prefix('|').and_then(|x| x.strip_suffix('|')) {
        let c = parse_elem(inner, field).map_err(|e| e.shift(off + 1))?;
        return c
            .val()
            .fin()
            .ok_or_else(|| Error::parse(off, "the radius |0| is not allowed"));
    }
    Err(Error::parse(off, format!("expected (q), |c| or 1, found '{t}'")))
}

fn parse_atom(s: &str, field: &FieldRef, pos: usize, a: &mut Annulus) -> Result<()> {
    let lead = s.len() - s.trim_start().len();
    let t = s.trim();
    let pos = pos + lead;
    let body = t
        .strip_prefix('|')
        .ok_or_else(|| Error::parse(pos, "expected '|' to open an atom"))?;
    let close = body
        .find('|')
        .ok_or_else(|| Error::parse(pos, "expected a closing '|'"))?;
    let p = parse_poly(&body[..close], field, "x").map_err(|e| e.shift(pos + 1))?;
    let rest = &body[close + 1..];
    let rpos = pos + close + 2;
    let rt = rest.trim_start();
    let opos = rpos + rest.len() - rt.len();
    let (op, len) = ["<=", ">=", "<", ">", "="]
        .iter()
        .find(|o| rt.starts_with(**o))
        .map(|o| (*o, o.len()))
        .ok_or_else(|| Error::parse(opos, "expected one of <=, <, >=, >, ="))?;
    let q = parse_rhs(&rt[len..], field, opos + len)?;
    let ball = |open| Ball { p: p.clone(), q, open };
    match op {
        "<=" => a.outer.push(ball(false)),
        "<" => a.outer.push(ball(true)),
        ">=" => a.holes.push(ball(true)),
        ">" => a.holes.push(ball(false)),
        _ => {
            a.outer.push(ball(false));
            a.holes.push(ball(true));
        }
    }
    Ok(())
}

/// Parses `|x^2-7| <= (1/2) && |x| <= (0)` with an optional directive
/// `split ext=Q7[y^2-7]` after a `;` or on its own line.
pub fn parse_annulus(s: &str, field: &FieldRef) -> Result<Annulus> {
    let mut a = Annulus::unit(field);
    let mut seen = false;
    let mut start = 0;
    for seg in s.split([';', '\n']) {
        let pos = start;
        start += seg.len() + 1;
        let t = seg.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix("split") {
            let spos = pos + seg.find("split").unwrap_or(0) + 5;
            let rest_t = rest.trim();
            let name = rest_t
                .strip_prefix("ext=")
                .ok_or_else(|| Error::parse(spos, "expected ext=<field>"))?;
            let ext = parse_field_name(name, field.prec).map_err(|e| e.shift(spos + 1 + 4))?;
            if !ext.contains(field) {
                return Err(Error::domain(format!("{} is not an extension of {}", ext.name, field.name)));
            }
            a.split = Some(ext);
            continue;
        }
        if seen {
            return Err(Error::parse(pos, "only one formula per annulus"));
        }
        seen = true;
        let mut apos = pos;
        for atom in seg.split("&&") {
            parse_atom(atom, field, apos, &mut a)?;
            apos += atom.len() + 2;
        }
    }
    if !seen {
        return Err(Error::parse(0, "empty annulus formula"));
    }
    Ok(a)
}

impl fmt::Display for Annulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let mut used = vec![false; self.holes.len()];
        for b in &self.outer {
            let twin = self.holes.iter().enumerate().position(|(i, h)| {
                !used[i] && !b.open && h.open && h.q == b.q && h.p.to_string() == b.p.to_string()
            });
            match twin {
                Some(i) => {
                    used[i] = true;
                    parts.push(format!("|{}| = ({})", b.p, b.q));
                }
                None => parts.push(b.text(false)),
            }
        }
        for (h, u) in self.holes.iter().zip(&used) {
            if !u {
                parts.push(h.text(true));
            }
        }
        if self.outer.is_empty() {
            parts.insert(0, "|x| <= (0)".to_string());
        }
        write!(f, "{}", parts.join(" && "))?;
        if let Some(s) = &self.split {
            write!(f, "; split ext={}", s.name)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vfield::{parse_field, Field};

    fn q3() -> FieldRef {
        Field::qp(3, 12).unwrap()
    }

    fn q7() -> FieldRef {
        Field::qp(7, 12).unwrap()
    }

    fn ann(s: &str, k: &FieldRef) -> Annulus {
        parse_annulus(s, k).unwrap()
    }

    #[test]
    fn grammar_round_trip() {
        let k = q7();
        let a = ann("|x^2-7| >= (1) && |x| <= (0); split ext=Q7[y^2-7]", &k);
        assert_eq!(a.to_string(), "|x| <= (0) && |x^2-7| >= (1); split ext=Q7[y:y^2-7]");
        let b = ann(&a.to_string(), &k);
        assert_eq!(b.to_string(), a.to_string());
        let c = ann("|x| <= |3| && |x-1| = 1", &q3());
        assert_eq!(c.to_string(), "|x| <= (1) && |x-1| = (0)");
        match parse_annulus("|x| <== (1)", &k) {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validate_examples() {
        let k = q3();
        assert_eq!(ann("|x| <= (0) && |x| >= (1)", &k).validate().unwrap(), Validity::Ok);
        assert!(matches!(ann("|x| <= (1) && |x| >= (0)", &k).validate().unwrap(), Validity::Violation(_)));
        let a = ann("|x| <= (0) && |x^2-7| >= (1); split ext=Q7[y^2-7]", &q7());
        assert_eq!(a.validate().unwrap(), Validity::Ok);
        let bare = ann("|x| <= (0) && |x^2-7| >= (1)", &q7());
        match bare.validate() {
            Err(Error::Domain(m)) => assert!(m.starts_with("splitting data required")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn intersect_examples() {
        let k = q3();
        assert!(matches!(
            ann("|x| <= (1)", &k).intersect(&ann("|x-1| <= (1)", &k)).unwrap(),
            Intersection::Empty(_)
        ));
        let Intersection::Formula(f) = ann("|x| <= (0)", &k).intersect(&ann("|x| <= (1)", &k)).unwrap() else { panic!() };
        assert_eq!(f.to_string(), "|x| <= (1)");
        let Intersection::Formula(f) =
            ann("|x| <= (0) && |x| >= (1)", &k).intersect(&ann("|x| < (0)", &k)).unwrap() else { panic!() };
        assert_eq!(f.to_string(), "|x| < (0) && |x| >= (1)");
    }

    #[test]
    fn complement_examples() {
        let k = q3();
        let c = ann("|x| <= (1)", &k).complement().unwrap();
        assert_eq!(c.iter().map(|a| a.to_string()).collect::<Vec<_>>(), ["|x| <= (0) && |x| > (1)"]);
        let c = ann("|x| <= (0) && |x| >= (1)", &k).complement().unwrap();
        assert_eq!(c.iter().map(|a| a.to_string()).collect::<Vec<_>>(), ["|x| < (1)"]);
        let c = ann("|x| <= (0) && |x^2-7| >= (1); split ext=Q7[y^2-7]", &q7()).complement().unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].to_string(), "|x^2-7| < (1); split ext=Q7[y:y^2-7]");
    }

    #[test]
    fn decompose_examples() {
        let k = q3();
        let show = |a: &Annulus| {
            a.decompose_standard()
                .unwrap()
                .into_iter()
                .map(|(p, kind)| format!("{p} [{kind}]"))
                .collect::<Vec<_>>()
        };
        assert_eq!(
            show(&ann("|x| <= (0) && |x| >= (1)", &k)),
            ["|x| = (0) [thin]", "|x| < (0) && |x| > (1) [laurent]", "|x| = (1) [thin]"]
        );
        assert_eq!(show(&ann("|x| < (0)", &k)), ["|x| < (0) [disc]"]);
        assert_eq!(show(&ann("|x| <= (0)", &k)), ["|x| = (0) [thin]", "|x| < (0) [disc]"]);
    }

    #[test]
    fn linear_split_examples() {
        let k = q7();
        let l = parse_field("Q7[y^2-7]").unwrap().valued().unwrap();
        let a = ann("|x^2-7| >= (1) && |x| <= (0)", &k);
        let s = a.linear_split(&l).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].to_string(), "|x| <= (0) && |x+y| >= (1/2) && |x-y| >= (1/2)");
        let lin = ann("|x| <= (0) && |x| >= (1)", &q3());
        assert_eq!(lin.linear_split(&q3()).unwrap()[0].to_string(), lin.to_string());
        let b = ann("|x^2-2| <= (1)", &k);
        let s: Vec<String> = b.linear_split(&k).unwrap().iter().map(|a| a.to_string()).collect();
        assert_eq!(s, ["|x-3| <= (1)", "|x-4| <= (1)"]);
        match a.linear_split(&k) {
            Err(Error::Domain(m)) => assert!(m.starts_with("insufficient extension")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sign_cover_examples() {
        let k = q3();
        let x = Poly::x(&k);
        let one = Poly::one(&k);
        let show = |c: &SignCover| c.pieces.iter().map(|p| p.0.to_string()).collect::<Vec<_>>();
        let c = cover_by_sign(&x.mul(&x), &one, Rational64::from_integer(2), AbsCmp::Le, &k).unwrap();
        assert!(c.exceptional.is_empty());
        assert_eq!(show(&c), ["|x| <= (1)"]);
        let c = cover_by_sign(&one, &x, Rational64::zero(), AbsCmp::Le, &k).unwrap();
        assert_eq!(c.exceptional.len(), 1);
        assert_eq!(show(&c), ["|x| = (0)"]);
        let c = cover_by_sign(&x, &one, Rational64::from_integer(-1), AbsCmp::Le, &k).unwrap();
        assert_eq!(show(&c), ["|x| <= (0)"]);
    }

    #[test]
    fn complement_of_a_vacuous_hole() {
        let a = parse_annulus("|x| <= (1) && |x^2-3| > (3); split ext=Q3[y^2-3]", &q3()).unwrap();
        let c = a.complement().unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].to_string(), "|x| <= (0) && |x| > (1); split ext=Q3[y:y^2-3]");
    }

    #[test]
    fn intersect_over_the_compositum() {
        let a = parse_annulus("|x| <= (0) && |x^2-7| >= (1); split ext=Q7[y^2-7]", &q7()).unwrap();
        let b = parse_annulus("|x| <= (0) && |x^2+1| >= (1); split ext=Q7[z^2+1]", &q7()).unwrap();
        match a.intersect(&b).unwrap() {
            Intersection::Formula(f) => assert_eq!(f.splitting_field().degree(), 4),
            Intersection::Empty(why) => panic!("{why}"),
        }
    }
}
