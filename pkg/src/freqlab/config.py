"""Config files: problem specifications and run configurations.

Problem specs are human-readable INI with sections [domain], [coefficients],
[potential], [nonlinearity].  Coefficient and potential fields are either
named built-ins (identity, diagonal(d1, .., dN), rotation_perturbed(eps)) or
expression strings over x1..xN in the small arithmetic grammar.  Run
configurations (section [run]) round-trip exactly through serialize/parse.
"""

import configparser
import dataclasses
import re
from dataclasses import dataclass

from .expressions import compile_expression
from .model import CoefficientField, NonlinearitySpec, PowerTerm, ProblemSpec

__all__ = ["ConfigError", "RunConfig", "parse_problem_spec",
           "serialize_problem_spec", "parse_run_config", "serialize_run_config"]


class ConfigError(ValueError):
    """Malformed configuration input."""


_BUILTIN_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(([^)]*)\))?\s*$")


def _read_ini(text_or_path):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep case
    try:
        if "\n" in str(text_or_path) or "=" in str(text_or_path):
            cp.read_string(str(text_or_path))
        else:
            with open(text_or_path, encoding="utf-8") as fh:
                cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return cp


def parse_problem_spec(text_or_path):
    cp = _read_ini(text_or_path)
    for section in ("domain", "nonlinearity"):
        if section not in cp:
            raise ConfigError(f"missing [{section}] section")
    dom = cp["domain"]
    try:
        dim = dom.getint("dimension", fallback=None)
        radius = dom.getfloat("outer_radius", fallback=None)
    except ValueError as exc:
        raise ConfigError(f"bad [domain] values: {exc}") from exc
    if dim is None or radius is None:
        raise ConfigError("[domain] needs dimension and outer_radius")

    coeff = _parse_coefficients(cp, dim)
    potential, source = _parse_potential(cp, dim)
    nl = _parse_nonlinearity(cp["nonlinearity"], dim)
    try:
        return ProblemSpec(dim, radius, coeff, nl, potential, source)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_coefficients(cp, dim):
    if "coefficients" not in cp:
        return CoefficientField.identity(dim)
    sec = cp["coefficients"]
    kind = sec.get("field", "identity")
    m = _BUILTIN_RE.match(kind)
    if m is None:
        raise ConfigError(f"bad coefficient field {kind!r}")
    name, args = m.group(1), m.group(2)
    if name == "identity":
        return CoefficientField.identity(dim)
    if name == "diagonal":
        vals = [float(v) for v in (args or "").split(",") if v.strip()]
        if len(vals) != dim:
            raise ConfigError(f"diagonal() needs {dim} entries")
        return CoefficientField.diagonal(vals)
    if name == "rotation_perturbed":
        eps = float(args) if args else 0.1
        return CoefficientField.rotation_perturbed(eps, dim)
    if name == "expr":
        entries = {k: v for k, v in sec.items() if k.startswith("a")}
        ell = sec.getfloat("ellipticity", fallback=0.5)
        try:
            return CoefficientField.from_expressions(dim, entries, ell)
        except Exception as exc:
            raise ConfigError(f"bad coefficient expressions: {exc}") from exc
    raise ConfigError(f"unknown coefficient field {name!r}")


def _parse_potential(cp, dim):
    if "potential" not in cp:
        return None, "0"
    src = cp["potential"].get("field", "0").strip()
    if src == "0":
        return None, "0"
    try:
        fn = compile_expression(src, dim)
    except Exception as exc:
        raise ConfigError(f"bad potential expression: {exc}") from exc
    return fn, src


def _parse_nonlinearity(sec, dim):
    kind = sec.get("kind", "homogeneous")
    try:
        q = sec.getfloat("q", fallback=None)
        eps0 = sec.getfloat("eps0", fallback=1.0)
        kappa1 = sec.getfloat("kappa1", fallback=None)
        kappa2 = sec.getfloat("kappa2", fallback=None)
    except ValueError as exc:
        raise ConfigError(f"bad [nonlinearity] values: {exc}") from exc
    if kind == "homogeneous":
        if q is None:
            raise ConfigError("homogeneous nonlinearity needs q")
        if not 1.0 <= q < 2.0:
            raise ConfigError("q must lie in [1, 2)")
        return NonlinearitySpec.homogeneous(q, eps0=eps0,
                                            kappa1=kappa1 or 0.0,
                                            kappa2=kappa2)
    if kind == "sum_of_powers":
        terms_text = sec.get("terms")
        if not terms_text:
            raise ConfigError("sum_of_powers needs terms = q1: expr | q2: expr")
        terms = []
        for part in terms_text.split("|"):
            expo_text, _, coef_text = part.partition(":")
            try:
                expo = float(expo_text)
            except ValueError as exc:
                raise ConfigError(f"bad exponent {expo_text!r}") from exc
            if not 1.0 <= expo < 2.0:
                raise ConfigError("every exponent must lie in [1, 2)")
            coef_text = coef_text.strip()
            try:
                const = float(coef_text)
                terms.append(PowerTerm(expo, const))
            except ValueError:
                fn = compile_expression(coef_text, dim)
                terms.append(PowerTerm(expo, fn))
        return NonlinearitySpec.sum_of_powers(
            tuple(terms), eps0=eps0, kappa1=kappa1 if kappa1 is not None else 1.0,
            kappa2=kappa2 if kappa2 is not None else 1e-3)
    raise ConfigError(f"unknown nonlinearity kind {kind!r} "
                      "(tabulated kinds are API-only)")


def serialize_problem_spec(spec):
    """INI text for specs whose pieces came from the config vocabulary."""
    lines = ["[domain]", f"dimension = {spec.dim}",
             f"outer_radius = {spec.outer_radius!r}", ""]
    coeff = spec.coefficients
    lines.append("[coefficients]")
    if coeff.kind == "identity":
        lines.append("field = identity")
    elif coeff.kind == "diagonal":
        vals = ", ".join(repr(v) for v in coeff.params["values"])
        lines.append(f"field = diagonal({vals})")
    elif coeff.kind == "rotation_perturbed":
        lines.append(f"field = rotation_perturbed({coeff.params['eps']!r})")
    elif coeff.kind == "expressions":
        lines.append("field = expr")
        for k, v in sorted(coeff.params["entries"].items()):
            lines.append(f"{k} = {v}")
        lines.append(f"ellipticity = {coeff.params['ellipticity']!r}")
    else:
        raise ConfigError(f"coefficient kind {coeff.kind!r} has no config form")
    lines += ["", "[potential]", f"field = {spec.potential_source}", ""]
    nl = spec.nonlinearity
    lines.append("[nonlinearity]")
    lines.append(f"kind = {nl.kind}")
    lines.append(f"q = {nl.q!r}")
    lines.append(f"eps0 = {nl.eps0!r}")
    lines.append(f"kappa1 = {nl.kappa1!r}")
    lines.append(f"kappa2 = {nl.kappa2!r}")
    if nl.kind == "sum_of_powers":
        parts = []
        for t in nl.terms:
            coef = t.coefficient
            parts.append(f"{t.exponent!r}: "
                         + (coef.source if callable(coef) else repr(coef)))
        lines.append("terms = " + " | ".join(parts))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    command: str = "ode"
    spec_file: str = None
    dimension: int = 2
    q: float = 1.5
    outer_radius: float = 1.0
    amplitude: float = 0.5
    radial_step: float = 1e-3
    t0: float = 0.0
    t_max: float = 10.0
    rings: int = 64
    angles: int = 128
    n_radii: int = 800
    boundary: str = "radial-trace"
    manufactured: bool = False
    mode: str = "radial"
    ode_task: str = "counterexample"
    tol_d_rel: float = 1e-10
    residual_gate: float = None
    h_floor_rel: float = 1e-14
    identity_tol_scale: float = 1.0
    damping: float = 0.5
    fp_tol: float = 1e-10
    max_iters: int = 400
    out_dir: str = "freq-lab-out"
    seed: int = 0
    jobs: int = 1
    field_file: str = None
    config_path: str = None  # the file this run config was read from, if any

    def validate(self):
        if self.command not in ("ode", "solve", "frequency", "audit", "check"):
            raise ConfigError(f"unknown command {self.command!r}")
        for name in ("radial_step", "outer_radius", "damping", "fp_tol",
                     "tol_d_rel", "h_floor_rel"):
            if getattr(self, name) is not None and getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("rings", "angles", "n_radii", "max_iters", "jobs"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.command == "ode" and self.ode_task in ("counterexample", "pme"):
            if not 1.0 < self.q < 2.0:
                raise ConfigError("q must lie in (1, 2)")
        elif not 1.0 <= self.q < 2.0:
            raise ConfigError("q must lie in [1, 2)")
        return self


def parse_run_config(text_or_path):
    cp = _read_ini(text_or_path)
    cfg = RunConfig()
    if "run" in cp:
        sec = cp["run"]
        for f in dataclasses.fields(RunConfig):
            if f.name not in sec:
                continue
            raw = sec.get(f.name)
            if raw == "none":
                setattr(cfg, f.name, None)
            elif f.type in ("int", int):
                setattr(cfg, f.name, int(raw))
            elif f.type in ("float", float):
                setattr(cfg, f.name, float(raw))
            elif f.type in ("bool", bool):
                setattr(cfg, f.name, raw.lower() in ("1", "true", "yes"))
            else:
                setattr(cfg, f.name, raw)
    return cfg


def serialize_run_config(cfg):
    lines = ["[run]"]
    for f in dataclasses.fields(RunConfig):
        val = getattr(cfg, f.name)
        if val is None:
            lines.append(f"{f.name} = none")
        elif isinstance(val, bool):
            lines.append(f"{f.name} = {'true' if val else 'false'}")
        elif isinstance(val, float):
            lines.append(f"{f.name} = {val!r}")
        else:
            lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"
