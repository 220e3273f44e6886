use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{CompositionTemplate, PartSlot};
use crate::catalog::Catalog;
use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::geometry::{angle_diff, normalize_deg, Point2};

/// At most this many nearest candidates are tried per slot.
const MAX_CANDIDATES: usize = 4;
/// A compatible tile this close to an unfilled slot, in multiples of the
/// slot's largest extent, is reported as misplaced rather than missing.
const MISPLACED_RADIUS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComposeTolerance {
    pub pos_tol: f64,
    /// Degrees, compared modulo the tile's symmetry period.
    pub theta_tol: f64,
}

impl Default for ComposeTolerance {
    fn default() -> Self {
        ComposeTolerance {
            pos_tol: 8.0,
            theta_tol: 10.0,
        }
    }
}

impl ComposeTolerance {
    pub fn validate(&self) -> Result<()> {
        if !(self.pos_tol > 0.0 && self.theta_tol > 0.0 && self.pos_tol.is_finite() && self.theta_tol.is_finite()) {
            return Err(Error::invalid(
                "compose tolerance",
                "pos_tol and theta_tol must be positive",
            ));
        }
        Ok(())
    }
}

/// Template frame to scene: rotate about the template origin, then translate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation_deg: f64,
    pub tx: f64,
    pub ty: f64,
}

impl RigidTransform {
    pub fn apply(&self, p: Point2) -> Point2 {
        p.rotated(self.rotation_deg) + Point2::new(self.tx, self.ty)
    }

    /// Transform taking `from` (template point) to `to` with rotation `deg`.
    fn through(from: Point2, to: Point2, deg: f64) -> Self {
        let t = to - from.rotated(deg);
        RigidTransform {
            rotation_deg: normalize_deg(deg),
            tx: t.x,
            ty: t.y,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotMatch {
    pub group: String,
    pub slot: String,
    /// Index into the detections passed to the check.
    pub detection: usize,
    pub spec_id: String,
    /// Distance from the tile center to where the slot expects it, pixels.
    pub pos_residual: f64,
    /// Rotation the tile needs, degrees, reduced by its symmetry.
    pub theta_residual: f64,
    /// Offset that would move the tile onto its slot.
    pub correction: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingSlot {
    pub group: String,
    pub slot: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupChoice {
    pub group: String,
    pub alternative: usize,
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtraTile {
    pub detection: usize,
    pub spec_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionResult {
    pub template_id: String,
    pub complete: bool,
    pub groups: Vec<GroupChoice>,
    pub matched: Vec<SlotMatch>,
    pub misplaced: Vec<SlotMatch>,
    pub missing: Vec<MissingSlot>,
    pub extra: Vec<ExtraTile>,
    /// Best template placement, absent when nothing could be anchored.
    pub transform: Option<RigidTransform>,
    pub tolerance: ComposeTolerance,
}

struct Slot<'t> {
    group: usize,
    slot: &'t PartSlot,
    period: f64,
    reach: f64,
}

#[derive(Clone, Copy)]
struct Pairing {
    slot: usize,
    det: usize,
    pos: f64,
    theta: f64,
    correction: Point2,
}

#[derive(Clone)]
struct Outcome {
    /// Chosen alternative per group.
    choice: Vec<usize>,
    matched: Vec<Pairing>,
    misplaced: Vec<Pairing>,
    full_groups: usize,
    residual: f64,
    transform: RigidTransform,
}

impl Outcome {
    fn key(&self) -> (usize, usize, usize) {
        (self.full_groups, self.matched.len(), self.misplaced.len())
    }

    fn better_than(&self, other: &Outcome) -> bool {
        match self.key().cmp(&other.key()) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.residual < other.residual,
        }
    }
}

struct Checker<'a> {
    /// Slots of every group and alternative, indexed `[group][alt]`.
    slots: Vec<Vec<Vec<Slot<'a>>>>,
    dets: Vec<&'a Detection>,
    tol: ComposeTolerance,
}

impl<'a> Checker<'a> {
    fn pairing(&self, slot_ix: usize, s: &Slot, det: usize, t: &RigidTransform) -> Pairing {
        let d = self.dets[det];
        let target = t.apply(Point2::new(s.slot.cx, s.slot.cy));
        let here = Point2::new(d.cx, d.cy);
        Pairing {
            slot: slot_ix,
            det,
            pos: here.dist(target),
            theta: angle_diff(d.theta_deg, s.slot.theta_deg + t.rotation_deg, s.period).abs(),
            correction: target - here,
        }
    }

    fn within(&self, p: &Pairing) -> bool {
        p.pos <= self.tol.pos_tol && p.theta <= self.tol.theta_tol
    }

    fn cost(&self, p: &Pairing) -> f64 {
        p.pos / self.tol.pos_tol + p.theta / self.tol.theta_tol
    }

    fn compatible(&self, s: &Slot, det: usize) -> bool {
        let d = self.dets[det];
        s.slot.accepts(d.shape, &d.spec_id)
    }

    fn evaluate(&self, t: &RigidTransform) -> Outcome {
        let mut best: Option<Outcome> = None;
        let combos: usize = self.slots.iter().map(|g| g.len()).product();
        for mut code in 0..combos {
            let mut choice = Vec::with_capacity(self.slots.len());
            for g in &self.slots {
                choice.push(code % g.len());
                code /= g.len();
            }
            let active: Vec<&Slot> = choice
                .iter()
                .enumerate()
                .flat_map(|(g, &a)| &self.slots[g][a])
                .collect();
            let cands: Vec<Vec<Pairing>> = active
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut c: Vec<Pairing> = (0..self.dets.len())
                        .filter(|&d| self.compatible(s, d))
                        .map(|d| self.pairing(i, s, d, t))
                        .filter(|p| self.within(p))
                        .collect();
                    c.sort_by(|a, b| self.cost(a).total_cmp(&self.cost(b)).then(a.det.cmp(&b.det)));
                    c.truncate(MAX_CANDIDATES);
                    c
                })
                .collect();
            let mut used = vec![false; self.dets.len()];
            let mut chosen = Vec::new();
            self.search(&active, &cands, &choice, t, 0, &mut used, &mut chosen, &mut best);
        }
        best.expect("at least one combination")
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        active: &[&Slot],
        cands: &[Vec<Pairing>],
        choice: &[usize],
        t: &RigidTransform,
        i: usize,
        used: &mut Vec<bool>,
        chosen: &mut Vec<Pairing>,
        best: &mut Option<Outcome>,
    ) {
        if i == active.len() {
            let outcome = self.finish(active, choice, chosen, used, t);
            if best.as_ref().is_none_or(|b| outcome.better_than(b)) {
                *best = Some(outcome);
            }
            return;
        }
        for p in &cands[i] {
            if used[p.det] {
                continue;
            }
            used[p.det] = true;
            chosen.push(*p);
            self.search(active, cands, choice, t, i + 1, used, chosen, best);
            chosen.pop();
            used[p.det] = false;
        }
        self.search(active, cands, choice, t, i + 1, used, chosen, best);
    }

    fn finish(
        &self,
        active: &[&Slot],
        choice: &[usize],
        matched: &[Pairing],
        used: &[bool],
        t: &RigidTransform,
    ) -> Outcome {
        let mut taken = used.to_vec();
        let mut filled = vec![false; active.len()];
        for p in matched {
            filled[p.slot] = true;
        }
        let mut misplaced = Vec::new();
        for (i, s) in active.iter().enumerate() {
            if filled[i] {
                continue;
            }
            let near = (0..self.dets.len())
                .filter(|&d| !taken[d] && self.compatible(s, d))
                .map(|d| self.pairing(i, s, d, t))
                .filter(|p| p.pos <= s.reach)
                .min_by(|a, b| a.pos.total_cmp(&b.pos).then(a.det.cmp(&b.det)));
            if let Some(p) = near {
                taken[p.det] = true;
                misplaced.push(p);
            }
        }
        let full_groups = (0..self.slots.len())
            .filter(|&g| {
                active
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.group == g)
                    .all(|(i, _)| filled[i])
            })
            .count();
        Outcome {
            choice: choice.to_vec(),
            matched: matched.to_vec(),
            misplaced,
            full_groups,
            residual: matched.iter().map(|p| self.cost(p)).sum(),
            transform: *t,
        }
    }

    fn active(&self, choice: &[usize]) -> Vec<&Slot<'a>> {
        choice
            .iter()
            .enumerate()
            .flat_map(|(g, &a)| &self.slots[g][a])
            .collect()
    }

    /// Least-squares rigid fit of the matched slot centers onto their tiles.
    fn refine(&self, o: &Outcome) -> Option<RigidTransform> {
        if o.matched.len() < 2 {
            return None;
        }
        let active = self.active(&o.choice);
        let pts: Vec<(Point2, Point2)> = o
            .matched
            .iter()
            .map(|p| {
                let s = active[p.slot].slot;
                let d = self.dets[p.det];
                (Point2::new(s.cx, s.cy), Point2::new(d.cx, d.cy))
            })
            .collect();
        let n = pts.len() as f64;
        let pc = pts.iter().fold(Point2::new(0.0, 0.0), |a, (p, _)| a + *p) * (1.0 / n);
        let qc = pts.iter().fold(Point2::new(0.0, 0.0), |a, (_, q)| a + *q) * (1.0 / n);
        let (mut sin, mut cos) = (0.0, 0.0);
        for (p, q) in &pts {
            let (a, b) = (*p - pc, *q - qc);
            sin += a.cross(b);
            cos += a.dot(b);
        }
        if sin == 0.0 && cos == 0.0 {
            return None;
        }
        Some(RigidTransform::through(pc, qc, sin.atan2(cos).to_degrees()))
    }
}

fn canonical_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&dets[a], &dets[b]);
        x.spec_id
            .cmp(&y.spec_id)
            .then(x.cx.total_cmp(&y.cx))
            .then(x.cy.total_cmp(&y.cy))
            .then(x.theta_deg.total_cmp(&y.theta_deg))
            .then(x.score.total_cmp(&y.score))
    });
    order
}

/// Decides whether the detections build `template`.
///
/// Every pairing of a slot with a compatible detection, in each of the
/// tile's symmetric orientations, proposes a template placement. Each
/// placement is scored by the best one-to-one assignment over every choice
/// of alternatives: complete groups first, then filled slots, then
/// near-miss tiles, then the smaller normalized residual. The winning
/// placement is refined once by a least-squares fit and kept if that does
/// not make it worse. Detections are visited in a canonical order, so the
/// result does not depend on their input order.
pub fn check_composition(
    detections: &[Detection],
    template: &CompositionTemplate,
    catalog: &Catalog,
    tol: &ComposeTolerance,
) -> Result<CompositionResult> {
    tol.validate()?;
    let order = canonical_order(detections);
    let mut slots = Vec::new();
    for (g, group) in template.parts.iter().enumerate() {
        let mut alts = Vec::new();
        for alt in &group.alternatives {
            let mut v = Vec::new();
            for slot in alt {
                let spec = slot.spec(catalog)?;
                v.push(Slot {
                    group: g,
                    slot,
                    period: slot.shape.symmetry().period(),
                    reach: MISPLACED_RADIUS * spec.width().max(spec.height()),
                });
            }
            alts.push(v);
        }
        slots.push(alts);
    }
    let checker = Checker {
        slots,
        dets: order.iter().map(|&i| &detections[i]).collect(),
        tol: *tol,
    };

    let mut best: Option<Outcome> = None;
    for groups in &checker.slots {
        for alt in groups {
            for s in alt {
                for (di, d) in checker.dets.iter().enumerate() {
                    if !checker.compatible(s, di) {
                        continue;
                    }
                    let k = s.slot.shape.symmetry().k();
                    for j in 0..k {
                        let deg = d.theta_deg + j as f64 * s.period - s.slot.theta_deg;
                        let t =
                            RigidTransform::through(Point2::new(s.slot.cx, s.slot.cy), Point2::new(d.cx, d.cy), deg);
                        let mut o = checker.evaluate(&t);
                        if let Some(rt) = checker.refine(&o) {
                            let r = checker.evaluate(&rt);
                            if !o.better_than(&r) {
                                o = r;
                            }
                        }
                        if best.as_ref().is_none_or(|b| o.better_than(b)) {
                            best = Some(o);
                        }
                    }
                }
            }
        }
    }

    let names = |p: &Pairing, active: &[&Slot]| -> SlotMatch {
        let s = active[p.slot];
        let d = checker.dets[p.det];
        SlotMatch {
            group: template.parts[s.group].name.clone(),
            slot: s.slot.name.clone(),
            detection: order[p.det],
            spec_id: d.spec_id.clone(),
            pos_residual: p.pos,
            theta_residual: p.theta,
            correction: [p.correction.x, p.correction.y],
        }
    };

    let (choice, matched, misplaced, transform) = match &best {
        Some(o) => (
            o.choice.clone(),
            o.matched.clone(),
            o.misplaced.clone(),
            Some(o.transform),
        ),
        None => (vec![0; template.parts.len()], Vec::new(), Vec::new(), None),
    };
    let active = checker.active(&choice);
    let mut filled = vec![false; active.len()];
    let mut used = vec![false; detections.len()];
    for p in matched.iter().chain(&misplaced) {
        used[order[p.det]] = true;
    }
    for p in &matched {
        filled[p.slot] = true;
    }
    let groups: Vec<GroupChoice> = choice
        .iter()
        .enumerate()
        .map(|(g, &a)| GroupChoice {
            group: template.parts[g].name.clone(),
            alternative: a,
            complete: active
                .iter()
                .enumerate()
                .filter(|(_, s)| s.group == g)
                .all(|(i, _)| filled[i]),
        })
        .collect();
    let misplaced_slots: Vec<usize> = misplaced.iter().map(|p| p.slot).collect();
    let mut matched: Vec<SlotMatch> = matched.iter().map(|p| names(p, &active)).collect();
    let mut misplaced: Vec<SlotMatch> = misplaced.iter().map(|p| names(p, &active)).collect();
    // template order
    let slot_rank = |m: &SlotMatch| {
        active
            .iter()
            .position(|s| s.slot.name == m.slot && template.parts[s.group].name == m.group)
    };
    matched.sort_by_key(slot_rank);
    misplaced.sort_by_key(slot_rank);
    let missing = active
        .iter()
        .enumerate()
        .filter(|(i, _)| !filled[*i] && !misplaced_slots.contains(i))
        .map(|(_, s)| MissingSlot {
            group: template.parts[s.group].name.clone(),
            slot: s.slot.name.clone(),
        })
        .collect();
    let extra = (0..detections.len())
        .filter(|&i| !used[i])
        .map(|i| ExtraTile {
            detection: i,
            spec_id: detections[i].spec_id.clone(),
        })
        .collect();
    Ok(CompositionResult {
        template_id: template.id.clone(),
        complete: groups.iter().all(|g| g.complete),
        groups,
        matched,
        misplaced,
        missing,
        extra,
        transform,
        tolerance: *tol,
    })
}

fn direction(v: [f64; 2]) -> &'static str {
    // screen up is -y
    let deg = normalize_deg((-v[1]).atan2(v[0]).to_degrees());
    const NAMES: [&str; 8] = [
        "right",
        "up-right",
        "up",
        "up-left",
        "left",
        "down-left",
        "down",
        "down-right",
    ];
    NAMES[((deg + 22.5) / 45.0) as usize % 8]
}

/// Player-facing messages derived from a check result.
pub fn feedback(result: &CompositionResult) -> Vec<String> {
    if result.complete {
        return vec![format!("success: {} complete", result.template_id)];
    }
    let mut events = Vec::new();
    for m in &result.matched {
        events.push(format!("part placed: {}", m.slot));
    }
    for m in &result.misplaced {
        if m.theta_residual > result.tolerance.theta_tol {
            events.push(format!("nudge: rotate {} ~{}°", m.slot, m.theta_residual.round()));
        }
        if m.pos_residual > result.tolerance.pos_tol {
            events.push(format!(
                "nudge: move {} ~{} px {}",
                m.slot,
                m.pos_residual.round(),
                direction(m.correction)
            ));
        }
    }
    let mut reported_groups: Vec<&str> = Vec::new();
    for g in &result.groups {
        let in_group: Vec<&MissingSlot> = result.missing.iter().filter(|m| m.group == g.group).collect();
        let touched = result
            .matched
            .iter()
            .chain(&result.misplaced)
            .any(|m| m.group == g.group);
        if !in_group.is_empty() && !touched {
            events.push(format!("part missing: {}", g.group));
            reported_groups.push(&g.group);
        }
    }
    for m in &result.missing {
        if !reported_groups.contains(&m.group.as_str()) {
            events.push(format!("part missing: {}", m.slot));
        }
    }
    for e in &result.extra {
        events.push(format!("extra tile: {}", e.spec_id));
    }
    events
}
