"""Replay of the quantitative vanishing-contradiction argument.

Given a candidate field on a ball, the audit measures its equation residual,
finds the radius r0 up to which the nonlinearity mass d vanishes, and then
walks the proof chain that a genuine solution with r0 > 0 would have to
satisfy: an energy lower bound D >= C2 d just outside the core, boundedness
of the frequency through the monotonicity of N(r) e^{C3 r}, and finally the
impossibility of the sphere mass H vanishing at r3 > 0 while the log-slope
of H/r^{N-1} stays bounded.  A field that passes the residual gate with
r0 > 0 must trip one of these steps; "genuine" is only ever reported when
r0 = 0 (or the field is negligible outright).
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .model import c_constant
from .frequency import ProfileControls, frequency_profile

__all__ = [
    "AuditControls",
    "StepVerdict",
    "CertificateChain",
    "vanishing_radius",
    "lower_bound_certificate",
    "frequency_bound_certificate",
    "logH_contradiction",
    "audit",
]

GENUINE = "genuine_nonvanishing"
CONTRADICTION = "contradiction_certified"
VETO = "residual_veto"
INCONCLUSIVE = "inconclusive"


@dataclass
class AuditControls:
    tol_d_rel: float = 1e-10          # d vanishing threshold, relative to d(R)
    residual_gate: float = None       # None: 10x the field's own estimate
    mono_slack_rel: float = 1e-8      # slack for the monotonicity ratios
    backward_margin: float = 0.5      # H < margin * backward bound => fired
    # audits want the finest radius grid the field affords: the proof windows
    # near r0 can span only a few cells
    profile: ProfileControls = field(
        default_factory=lambda: ProfileControls(n_radii=2000))

    def __post_init__(self):
        if self.tol_d_rel <= 0 or self.mono_slack_rel <= 0 \
                or not 0 < self.backward_margin < 1:
            raise ValueError("audit tolerances must be positive (margin in (0,1))")

    def to_dict(self):
        return {
            "tol_d_rel": self.tol_d_rel,
            "residual_gate": None if self.residual_gate is None
            else float(self.residual_gate),
            "mono_slack_rel": self.mono_slack_rel,
            "backward_margin": self.backward_margin,
            "profile": {"n_radii": self.profile.n_radii,
                        "r_min": self.profile.r_min,
                        "h_floor_rel": self.profile.h_floor_rel},
        }


@dataclass
class StepVerdict:
    name: str
    status: str                  # pass | fail | veto | inconclusive | skipped
    margin: float = math.nan
    note: str = ""
    data: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"status": self.status, "note": self.note}
        if math.isfinite(self.margin):
            out["margin"] = float(self.margin)
        for k, v in sorted(self.data.items()):
            if isinstance(v, np.ndarray):
                out[k] = [float(x) for x in v]
            elif isinstance(v, (np.floating, np.integer)):
                out[k] = float(v)
            else:
                out[k] = v
        return out


@dataclass
class CertificateChain:
    classification: str
    route: str
    r0: float = None
    r1: float = None
    r2: float = None
    r3: float = None
    constants: dict = field(default_factory=dict)
    steps: dict = field(default_factory=dict)
    input_hash: str = ""
    controls: dict = field(default_factory=dict)
    tool_version: str = ""
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "schema_version": 1,
            "classification": self.classification,
            "route": self.route,
            "r0": self.r0, "r1": self.r1, "r2": self.r2, "r3": self.r3,
            "constants": {k: float(v) for k, v in sorted(self.constants.items())},
            "steps": {k: v.to_dict() for k, v in sorted(self.steps.items())},
            "input_hash": self.input_hash,
            "controls": self.controls,
            "tool_version": self.tool_version,
            "notes": list(self.notes),
        }


# --------------------------------------------------------------------------
# individual steps


def vanishing_radius(prof, tol_d_rel=1e-10):
    """Largest audited radius with d(r) below tol_d_rel * d(R); 0.0 if none.

    Returns None when d is negligible over the whole grid (the field itself
    is numerically zero).
    """
    d = prof.d
    dmax = float(d[-1])
    if dmax <= 0.0 or not np.isfinite(dmax):
        return None
    mask = d <= tol_d_rel * dmax
    if not mask.any():
        return 0.0
    if mask.all():
        return None
    return float(prof.r[np.nonzero(mask)[0][-1]])


def _fit_energy_mass_constant(prof, r0):
    """Sampled sup of |D - D1| / d past the core (the fitted O(1) constant)."""
    sel = (prof.r > r0) & (prof.d > 0)
    if not sel.any():
        return 1.0
    return float(np.max(np.abs(prof.D - prof.D1)[sel] / prof.d[sel]))


def lower_bound_certificate(prof, r0, dim, q, controls=None, route="model"):
    """Check D(r) >= C2 d(r) on the window (r0, r1) the argument prescribes.

    Model route: C1 = C_{N,q}/r0^{N-1}, C2 = (2-q)/2 r0^{N-2}, and r1 caps
    C1 (r1 - r0) at (2-q)/2.  General route: the analogous fitted constants,
    with the window also shrunk until the sup-norm smallness condition
    (fitted_C ||u||^{2-q} + C1 (r - r0)) e^{C0 (R - r0)} < (2-q)/2 holds.
    Returns (r1, verdict, constants).
    """
    controls = controls or AuditControls()
    constants = {}
    if r0 is None or r0 <= 0.0:
        return None, StepVerdict("lower_bound_D", "skipped",
                                 note="needs r0 > 0"), constants
    dmax = float(prof.d[-1])
    k0 = int(np.searchsorted(prof.r, r0 + 1e-15))
    if k0 > 0 and prof.d[k0 - 1] > controls.tol_d_rel * dmax * 4.0:
        return None, StepVerdict(
            "lower_bound_D", "veto",
            note="field is not negligible on B_r0; claimed core rejected"), constants

    CNq = c_constant(dim, q)
    constants["CNq"] = CNq
    R = prof.outer_radius
    if route == "model":
        C1 = CNq / r0 ** (dim - 1)
        C2 = 0.5 * (2.0 - q) * r0 ** (dim - 2)
        constants["C1"] = C1
        constants["C2"] = C2
        r1 = min(r0 + 0.5 * (2.0 - q) / C1, R)
        bound_const = C2
    else:
        c_fit = _fit_energy_mass_constant(prof, r0)
        C_fit = max(1.0, c_fit)
        C0 = C_fit / r0
        C1g = C_fit * (2.0 + c_fit) / r0
        growth = math.exp(C0 * (R - r0))
        target = 0.5 * (2.0 - q)
        sel = prof.r > r0
        cond = (C_fit * prof.ball_sup ** (2.0 - q)
                + C1g * (prof.r - r0)) * growth
        ok = sel & (cond < target)
        r1 = float(prof.r[np.nonzero(ok)[0][-1]]) if ok.any() else r0
        C3g = math.exp(C0 * (r0 - R)) * target
        constants.update({"C0": C0, "C1_general": C1g, "C3_lower": C3g,
                          "fitted_energy_mass": c_fit})
        bound_const = C3g
        if r1 <= r0:
            return r1, StepVerdict(
                "lower_bound_D", "inconclusive",
                note="sup-norm smallness window is empty"), constants

    window = (prof.r > r0) & (prof.r <= r1 * (1 + 1e-12))
    if not window.any():
        return r1, StepVerdict("lower_bound_D", "inconclusive",
                               note="no audited radii inside (r0, r1)"), constants
    margins = prof.D[window] - bound_const * prof.d[window]
    scale = max(float(np.max(np.abs(prof.D[window]))), 1e-300)
    worst = float(np.min(margins))
    ok = worst >= -1e-12 * scale
    verdict = StepVerdict(
        "lower_bound_D", "pass" if ok else "fail", worst / scale,
        note=f"D >= {'C2' if route == 'model' else 'C3'} d on ({r0:.6g}, {r1:.6g})",
        data={"worst_margin": worst,
              "fail_radius": float(prof.r[window][int(np.argmin(margins))])
              if not ok else None})
    return r1, verdict, constants


def frequency_bound_certificate(prof, r0, r1, dim, q, constants,
                                controls=None, route="model"):
    """Monotonicity of N(r) e^{C3 r} on (r3, r2] and the bound N <= C4.

    r2 is the largest audited radius in (r0, r1) with H above the floor
    (maximising the audited interval), r3 the lower edge of its positive-H
    run.  Returns (r2, r3, verdict).
    """
    controls = controls or AuditControls()
    if r0 is None or r0 <= 0.0 or r1 is None:
        return None, None, StepVerdict("frequency_bounded", "skipped",
                                       note="needs the lower-bound window")
    candidates = np.nonzero((prof.r > r0) & (prof.r <= r1 * (1 + 1e-12))
                            & (prof.H > prof.h_floor))[0]
    if len(candidates) == 0:
        return None, None, StepVerdict(
            "frequency_bounded", "inconclusive",
            note="no audited radius in (r0, r1) carries positive sphere mass")
    k2 = int(candidates[-1])
    r2 = float(prof.r[k2])
    # the positive-mass run below r2 extends as far as the data carries it,
    # even below the detected r0 (threshold smearing biases r0 upward)
    k = k2
    while k > 0 and prof.H[k - 1] > prof.h_floor:
        k -= 1
    k3 = max(k - 1, 0)
    r3 = float(prof.r[k3])

    CNq = constants.get("CNq", c_constant(dim, q))
    if route == "model":
        C3 = CNq / (r0 * constants["C2"])
    else:
        sel = slice(k, k2 + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (prof.D1[sel] + prof.d[sel]) / (r0 * prof.D[sel])
        ratio = ratio[np.isfinite(ratio) & (ratio > 0)]
        c_fit = constants.get("fitted_energy_mass", 1.0)
        C3 = max(1.0, c_fit) * (1.0 + (float(np.max(ratio)) if len(ratio) else 0.0))
    constants["C3" if route == "model" else "C3_slope"] = C3

    run = np.arange(k, k2 + 1)
    Nvals = prof.N[run]
    finite = np.isfinite(Nvals)
    if finite.sum() < 2:
        verdict = StepVerdict(
            "frequency_bounded", "inconclusive",
            note="fewer than two audited radii with defined frequency",
            data={"n_radii": int(finite.sum())})
        C4 = float(Nvals[finite][-1] * math.exp(C3 * r2)) if finite.any() else math.nan
        constants["C4" if route == "model" else "C5"] = C4
        return r2, r3, verdict
    prod = Nvals[finite] * np.exp(C3 * prof.r[run][finite])
    scale = float(np.max(np.abs(prod)))
    drops = np.diff(prod)
    worst = float(np.min(drops)) if len(drops) else 0.0
    ok = worst >= -controls.mono_slack_rel * scale
    C4 = float(prof.N[k2] * math.exp(C3 * r2))
    constants["C4" if route == "model" else "C5"] = C4
    verdict = StepVerdict(
        "frequency_bounded", "pass" if ok else "fail",
        worst / scale if scale > 0 else math.nan,
        note="N(r) exp(C3 r) must be non-decreasing on (r3, r2]",
        data={"worst_drop": worst, "n_radii": int(finite.sum()),
              "frequency_cap": C4,
              "fail_radius": float(prof.r[run][finite][1:][int(np.argmin(drops))])
              if not ok and len(drops) else None})
    return r2, r3, verdict


def logH_contradiction(prof, r3, r2, C4, r0, dim, controls=None):
    """Backward integration of the bounded log-slope against H(r3) ~ 0.

    With the frequency capped at C4, integrating d/dr log(H/r^{N-1}) =
    2 N / r <= 2 C4 / r0 backward from r2 forces
    H(r) >= H(r2) (r/r2)^{N-1} exp(-2 C4 (r2 - r)/r0) > 0 down to r3.  The
    check evaluates this floor one audit cell above r3 (discrete-infimum
    uncertainty) and fires when the measured H falls below it.
    """
    controls = controls or AuditControls()
    if r3 is None or r2 is None or not math.isfinite(C4):
        return StepVerdict("logH_contradiction", "skipped",
                           note="needs the frequency-bound step")
    k3 = int(np.searchsorted(prof.r, r3 + 1e-15)) - 1
    k3 = max(k3, 0)
    if prof.H[k3] > prof.h_floor and prof.r[k3] > 0:
        return StepVerdict(
            "logH_contradiction", "pass",
            note="no vanishing at r3: the sphere mass stays positive",
            data={"H_r3": float(prof.H[k3])})
    k_star = k3 + 1
    k2 = int(np.searchsorted(prof.r, r2 - 1e-15))
    while k_star < k2 and prof.H[k_star] <= prof.h_floor:
        k_star += 1
    r_star = float(prof.r[k_star])
    H2 = float(prof.H[k2])

    def backward_floor(r):
        return H2 * (r / prof.r[k2]) ** (dim - 1) \
            * math.exp(-2.0 * C4 * (prof.r[k2] - r) / r0)

    # two evaluation points: one audit cell above r3 (discrete-infimum
    # uncertainty) and the r3 limit itself, where the measured mass sits at
    # the floor by construction
    predicted = backward_floor(r_star)
    measured = float(prof.H[k_star])
    fired = measured < controls.backward_margin * predicted
    at_r3 = backward_floor(float(prof.r[k3])) if prof.r[k3] > 0 else 0.0
    fired = fired or (max(float(prof.H[k3]), prof.h_floor)
                      < controls.backward_margin * at_r3)
    # bounded-slope bookkeeping on the run above r_star
    run = np.arange(k_star, k2 + 1)
    Hrun = prof.H[run]
    ok = Hrun > prof.h_floor
    slopes = np.diff(np.log(Hrun[ok]) - (dim - 1) * np.log(prof.r[run][ok])) \
        / np.diff(prof.r[run][ok])
    bound = 2.0 * C4 / r0
    return StepVerdict(
        "logH_contradiction", "fail" if fired else "pass",
        note=("sphere mass vanishes at r3 yet the frequency stays capped: "
              "backward integration forbids it" if fired else
              "backward floor not violated at this resolution"),
        data={"r_star": r_star, "H_measured": measured,
              "H_backward_floor": predicted, "slope_bound": bound,
              "max_slope": float(np.max(slopes)) if len(slopes) else math.nan,
              "fired": bool(fired)})


# --------------------------------------------------------------------------
# the full pipeline


def audit(spec, fld, controls=None):
    """Full certificate chain for a candidate field."""
    from . import __version__

    controls = controls or AuditControls()
    route = "model" if spec.is_model else "general"
    prof = frequency_profile(spec, fld, controls.profile)
    chain = CertificateChain(INCONCLUSIVE, route,
                             controls=controls.to_dict(),
                             tool_version=__version__,
                             input_hash=_field_hash(fld))

    # residual gate
    from .fields import residual_field

    rho = residual_field(spec, fld)
    measured = float(np.nanmax(np.abs(rho)))
    gate = controls.residual_gate
    if gate is None:
        if fld.residual_scale is not None:
            gate = 10.0 * fld.residual_scale
        else:
            from .model import eval_f

            if fld.representation == "radial":
                fscale = float(np.max(np.abs(eval_f(spec.nonlinearity, None, fld.u))))
            else:
                fscale = float(np.max(np.abs(eval_f(spec.nonlinearity,
                                                    fld.points(), fld.u))))
            gate = 1e-6 * max(fscale, 1e-30)
    gate_ok = measured <= gate
    chain.steps["residual_gate"] = StepVerdict(
        "residual_gate", "pass" if gate_ok else "veto",
        note=f"sup residual {measured:.3e} vs gate {gate:.3e}",
        data={"measured": measured, "gate": float(gate)})

    # vanishing radius
    r0 = vanishing_radius(prof, controls.tol_d_rel)
    if r0 is None:
        chain.steps["vanishing_detected"] = StepVerdict(
            "vanishing_detected", "pass",
            note="nonlinearity mass negligible on the whole grid")
        chain.classification = GENUINE if gate_ok else VETO
        chain.notes.append("whole-grid zero field")
        return chain
    chain.r0 = r0
    chain.steps["vanishing_detected"] = StepVerdict(
        "vanishing_detected", "pass" if r0 > 0 else "skipped",
        note=f"r0 = {r0:.6g}" + ("" if r0 > 0 else " (no vanishing core)"))

    if not gate_ok:
        chain.classification = VETO
        return chain
    if r0 == 0.0:
        chain.classification = GENUINE
        return chain

    q = spec.nonlinearity.q
    dim = fld.dim
    r1, v1, consts = lower_bound_certificate(prof, r0, dim, q, controls, route)
    chain.r1 = r1
    chain.constants.update(consts)
    chain.steps["lower_bound_D"] = v1
    if v1.status == "veto":
        chain.classification = VETO
        return chain

    r2, r3, v2 = frequency_bound_certificate(prof, r0, r1, dim, q,
                                             chain.constants, controls, route)
    chain.r2, chain.r3 = r2, r3
    chain.steps["frequency_bounded"] = v2

    C4 = chain.constants.get("C4", chain.constants.get("C5", math.nan))
    v3 = logH_contradiction(prof, r3, r2, C4, r0, dim, controls)
    chain.steps["logH_contradiction"] = v3

    failed = [v.name for v in (v1, v2, v3) if v.status == "fail"]
    if failed:
        chain.classification = CONTRADICTION
        chain.notes.append(f"failing step: {failed[0]}")
    else:
        chain.classification = INCONCLUSIVE
        chain.notes.append("every audited step is consistent at this "
                           "resolution; no certificate either way")
    return chain


def _field_hash(fld):
    hsh = hashlib.sha256()
    hsh.update(fld.representation.encode())
    hsh.update(np.int64(fld.dim).tobytes())
    hsh.update(np.float64(fld.q).tobytes())
    hsh.update(np.ascontiguousarray(fld.r).tobytes())
    hsh.update(np.ascontiguousarray(fld.u).tobytes())
    if fld.du is not None:
        hsh.update(np.ascontiguousarray(fld.du).tobytes())
    return hsh.hexdigest()
