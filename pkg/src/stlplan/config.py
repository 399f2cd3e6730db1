"""Scenario configuration: TOML document with sections [formula], [waypoints],
[zones], [obstacles], [dynamics], [barrier], [replan] and [sim]."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .barrier import BarrierParams
from .qp import AlphaFn, ControlConfig, Dynamics
from .replan import ReplanParams, validate_params
from .stl import (BallReach, Clearance, FragmentError, STLSyntaxError,
                  conjuncts, literals, parse_formula)
from .stl.formula import TEMPORAL, Until
from .world import DEFAULT_CAPS, Obstacle, Rhodonea, Static, World, Zone


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {e}" for e in self.errors))


@dataclass
class ScenarioConfig:
    formula: str
    waypoints: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    start: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    zones: List[Zone] = field(default_factory=list)
    caps: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_CAPS))
    proximity: float = 1.5
    obstacles: List[Obstacle] = field(default_factory=list)
    dynamics: Dynamics = Dynamics("omni")
    barrier: BarrierParams = BarrierParams()
    kappa: float = 1.0
    q_diag: Optional[Tuple[float, ...]] = None
    margin: float = 0.0
    replan: Tuple[float, float, float] = (0.9, 0.025, 0.1)
    retime: bool = True
    max_retries: int = 5
    dt: float = 0.01
    horizon: Optional[float] = None
    seed: int = 0
    name: str = "scenario"

    def parsed_formula(self):
        return parse_formula(self.formula, self.waypoints)

    def world(self) -> World:
        return World(list(self.zones), list(self.obstacles), dict(self.caps), self.proximity)

    def control(self) -> ControlConfig:
        Q = None if self.q_diag is None else np.diag(self.q_diag)
        return ControlConfig(Q, AlphaFn(self.kappa), self.margin)

    def replan_params(self) -> ReplanParams:
        P_i, P_r, floor = self.replan
        return ReplanParams(P_i, P_r, 0, floor)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """Copy with CLI-level overrides (dt, seed, eta, kappa, retime)."""
        kw = {k: v for k, v in kw.items() if v is not None}
        eta = kw.pop("eta", None)
        cfg = replace(self, **kw)
        if eta is not None:
            cfg = replace(cfg, barrier=replace(cfg.barrier, eta=eta))
        return cfg


def validate(cfg: ScenarioConfig) -> List[str]:
    """Every violated constraint, as human-readable strings."""
    errors = []
    try:
        f = cfg.parsed_formula()
    except (STLSyntaxError, FragmentError, ValueError) as e:
        errors.append(f"formula: {e}")
        f = None
    if not cfg.dt > 0:
        errors.append(f"sim.dt = {cfg.dt} must be positive")
    if cfg.horizon is not None and not cfg.horizon > 0:
        errors.append(f"sim.horizon = {cfg.horizon} must be positive")
    if len(cfg.start) != 3 or not all(math.isfinite(v) for v in cfg.start):
        errors.append(f"sim.start must be a finite (x, y, theta) triple, got {cfg.start}")
    errors += [f"replan.{e}" for e in validate_params(*cfg.replan)]
    if not cfg.kappa > 0:
        errors.append(f"barrier.kappa = {cfg.kappa} must be positive (class-K slope)")
    if not cfg.margin >= 0:
        errors.append(f"barrier.margin = {cfg.margin} must be non-negative")
    if cfg.q_diag is not None and not all(q > 0 for q in cfg.q_diag):
        errors.append("barrier.Q diagonal must be positive")
    if cfg.max_retries < 0:
        errors.append("replan.max_retries must be non-negative")
    for mode, cap in cfg.caps.items():
        if mode not in DEFAULT_CAPS:
            errors.append(f"zones.caps: unknown mode {mode!r}")
        elif not cap > 0:
            errors.append(f"zones.caps.{mode} = {cap} must be positive")
    ids = {o.id for o in cfg.obstacles}
    if f is not None:
        r = cfg.barrier.r
        for part in conjuncts(f):
            if not isinstance(part, TEMPORAL):
                continue
            ops = [part.left, part.right] if isinstance(part, Until) else [part.arg]
            for op in ops:
                for p, neg in literals(op):
                    if isinstance(p, Clearance) and p.obstacle not in ids:
                        errors.append(f"formula: clear() references unknown obstacle {p.obstacle!r}")
                    if (r is not None and isinstance(p, BallReach) and not neg
                            and not 0 < r < p.epsilon):
                        errors.append(
                            f"barrier.r = {r} must lie in (0, {p.epsilon:g}) for goal "
                            f"tolerance {p.epsilon:g} (r below the best achievable h)")
    if cfg.barrier.gamma0 is not None or cfg.barrier.gamma_inf is not None:
        g0, ginf = cfg.barrier.gamma0, cfg.barrier.gamma_inf
        if g0 is not None and ginf is not None and ginf <= g0:
            errors.append("barrier.gamma_inf must exceed barrier.gamma0")
    return errors


def _vec(v, n=None, what="vector"):
    t = tuple(float(c) for c in v)
    if n is not None and len(t) != n:
        raise ValueError(f"{what} needs {n} components, got {len(t)}")
    return t


def from_dict(doc: dict, rng_seed: Optional[int] = None) -> ScenarioConfig:
    errors = []
    formula = doc.get("formula", {})
    text = formula.get("text") if isinstance(formula, dict) else formula
    if not text:
        raise ConfigError(["[formula] text is required"])
    waypoints = {k: _vec(v, 2, f"waypoint {k}") for k, v in doc.get("waypoints", {}).items()}

    zsec = doc.get("zones", {})
    caps = dict(DEFAULT_CAPS)
    caps.update({k: float(v) for k, v in zsec.get("caps", {}).items()})
    zones = []
    for i, z in enumerate(zsec.get("area", [])):
        try:
            zones.append(Zone(z["mode"], rect=_vec(z["rect"], 4) if "rect" in z else None,
                              circle=_vec(z["circle"], 3) if "circle" in z else None,
                              v_max=z.get("v_max"), name=z.get("name", f"zone{i}")))
        except (KeyError, ValueError, TypeError) as e:
            errors.append(f"zones.area[{i}]: {e}")

    sim = doc.get("sim", {})
    seed = int(sim.get("seed", 0)) if rng_seed is None else rng_seed
    rng = np.random.default_rng(seed)
    obstacles = []
    for i, o in enumerate(doc.get("obstacles", [])):
        try:
            center = _vec(o["center"], 2, "obstacle center")
            if "rhodonea" in o:
                rh = o["rhodonea"]
                phase = rh.get("phase", 0.0)
                if phase == "random":
                    phase = float(rng.uniform(0, 2 * math.pi))
                motion = Rhodonea(center, float(rh["amplitude"]), float(rh["petals"]),
                                  float(rh["rate"]), float(phase))
            else:
                motion = Static(center)
            obstacles.append(Obstacle(str(o["id"]), float(o.get("radius", 0.3)), motion,
                                      o.get("safe_distance")))
        except (KeyError, ValueError, TypeError) as e:
            errors.append(f"obstacles[{i}]: {e}")

    dsec = doc.get("dynamics", {})
    try:
        dyn = Dynamics(dsec.get("model", "omni"), float(dsec.get("chassis_radius", 0.2)))
    except ValueError as e:
        errors.append(f"dynamics: {e}")
        dyn = Dynamics("omni")

    bsec = doc.get("barrier", {})
    try:
        bp = BarrierParams(eta=float(bsec.get("eta", 10.0)), r=bsec.get("r"),
                           gamma0=bsec.get("gamma0"), gamma_inf=bsec.get("gamma_inf"),
                           h_cap=float(bsec.get("h_cap", 1e6)))
    except ValueError as e:
        errors.append(f"barrier: {e}")
        bp = BarrierParams()

    rsec = doc.get("replan", {})
    start = sim.get("start", (0.0, 0.0, 0.0))
    if isinstance(start, str):
        if start not in waypoints:
            errors.append(f"sim.start: unknown waypoint {start!r}")
            start = (0.0, 0.0, 0.0)
        else:
            start = waypoints[start] + (float(sim.get("heading", 0.0)),)
    else:
        start = tuple(float(v) for v in start)
        if len(start) == 2:
            start = start + (float(sim.get("heading", 0.0)),)

    if errors:
        raise ConfigError(errors)
    q = bsec.get("Q")
    cfg = ScenarioConfig(
        formula=text, waypoints=waypoints, start=start, zones=zones, caps=caps,
        proximity=float(zsec.get("proximity", 1.5)), obstacles=obstacles, dynamics=dyn,
        barrier=bp, kappa=float(bsec.get("kappa", 1.0)),
        q_diag=None if q is None else tuple(float(v) for v in q),
        margin=float(bsec.get("margin", 0.0)),
        replan=(float(rsec.get("P_i", 0.9)), float(rsec.get("P_r", 0.025)),
                float(rsec.get("floor", 0.1))),
        retime=bool(rsec.get("enabled", True)), max_retries=int(rsec.get("max_retries", 5)),
        dt=float(sim.get("dt", 0.01)), horizon=sim.get("horizon"), seed=seed,
        name=str(doc.get("name", "scenario")))
    return cfg


def load_scenario(path) -> ScenarioConfig:
    """Read and fully validate a scenario file.

    Raises FileNotFoundError, ConfigError (listing every violation) or
    tomllib.TOMLDecodeError.
    """
    path = Path(path)
    with path.open("rb") as fh:
        doc = tomllib.load(fh)
    cfg = from_dict(doc)
    if cfg.name == "scenario":
        cfg.name = path.stem
    errors = validate(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package (e.g. ``station``)."""
    p = Path(__file__).parent / "scenarios" / f"{name}.cfg"
    if not p.exists():
        raise FileNotFoundError(p)
    return p
