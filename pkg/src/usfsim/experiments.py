"""Experiment harness: configs, replicable drivers, and CSV emission.

A run is (config, replica ids); every replica is a pure function of the
config and its id, with all randomness drawn from streams named by
(seed, replica, role, ...).  Splitting one run into chunks via
replica_offset therefore yields byte-identical rows to the single run, and
the worker count changes scheduling only, never output.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import PropertySpec, components
from .coupling import (RootedSystem, binomial_se, condition_on_ball,
                       estimate_conditional_multi, forest_window_key,
                       sample_conditioned, tv_between)
from .graph import BoxSpec, GraphError, WiredBox
from .rng import ROLE_AUX, ROLE_FOREST, ROLE_PILOT, ROLE_WALK, stream
from .walks import WalkPath, intersection_count
from .wilson import delete_root, sample_wired_usf


class ConfigError(ValueError):
    pass


class ResourceLimit(RuntimeError):
    pass


EXPERIMENTS = ("connectivity", "intersections", "indistinguishability",
               "decorrelation")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment description; see parse_config for the grammar."""

    name: str
    seed: int
    replicas: int = 1
    replica_offset: int = 0
    samples: int = 100
    out: str = ""
    max_vertices: int = 2_000_000
    separation: int = 2
    box: BoxSpec | None = None
    grid: tuple = ()
    grid_boundary: str = ""
    m_ladder: tuple = ()
    horizons: tuple = ()
    pairs: int = 100
    lazy: bool = True
    tuples: tuple = ()
    prop: PropertySpec | None = None
    radius: int = 1
    outer_radii: tuple = ()
    keep: tuple | None = None


# section -> key -> (type tag, target field)
_SCHEMA = {
    "experiment": {
        "name": ("str", "name"),
        "seed": ("int", "seed"),
        "replicas": ("int", "replicas"),
        "replica_offset": ("int", "replica_offset"),
        "samples": ("int", "samples"),
        "out": ("str", "out"),
        "max_vertices": ("int", "max_vertices"),
        "separation": ("int", "separation"),
    },
    "box": {
        "dimension": ("int", None),
        "side": ("int", None),
        "boundary": ("str", None),
    },
    "grid": {
        "case": ("case", None),
        "boundary": ("str", "grid_boundary"),
    },
    "walks": {
        "m_ladder": ("ints", "m_ladder"),
        "horizons": ("ints", "horizons"),
        "pairs": ("int", "pairs"),
        "lazy": ("bool", "lazy"),
    },
    "tuples": {
        "tuple": ("tuple", None),
    },
    "property": {
        "kind": ("str", None),
        "threshold": ("int", None),
        "min_size": ("int", None),
        "window_fraction": ("float", None),
        "custom": ("str", None),
    },
    "conditioning": {
        "radius": ("int", "radius"),
        "outer_radii": ("ints", "outer_radii"),
        "keep": ("ints", "keep"),
    },
}

_REQUIRED = {
    "connectivity": ("grid",),
    "intersections": ("grid", "horizons"),
    "indistinguishability": ("box", "tuples", "prop", "m_ladder"),
    "decorrelation": ("box", "outer_radii"),
}


def parse_config(text, path="<config>"):
    """Parse the `key = value` format with [section] headers.

    Unknown sections or keys are errors with line numbers, as are missing
    required blocks; the point is that a typo fails loudly rather than
    silently running the default experiment.
    """
    section = None
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError("%s:%d: unknown section [%s]"
                                  % (path, lineno, section))
            continue
        if "=" not in line:
            raise ConfigError("%s:%d: expected `key = value`" % (path, lineno))
        if section is None:
            raise ConfigError("%s:%d: key outside any section" % (path, lineno))
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA[section]:
            raise ConfigError("%s:%d: unknown key %r in [%s]"
                              % (path, lineno, key, section))
        tag = _SCHEMA[section][key][0]
        if tag in ("case", "tuple"):
            seen.setdefault((section, key), []).append((lineno, value))
        elif (section, key) in seen:
            raise ConfigError("%s:%d: duplicate key %r" % (path, lineno, key))
        else:
            seen[(section, key)] = (lineno, value)
    return _build_config(seen, path)


def _parse_value(tag, value, where):
    try:
        if tag == "int":
            return int(value)
        if tag == "float":
            return float(value)
        if tag == "bool":
            if value not in ("true", "false"):
                raise ValueError
            return value == "true"
        if tag == "str":
            return value
        if tag == "ints":
            return tuple(int(x) for x in value.split())
    except ValueError:
        raise ConfigError("%s: bad %s value %r" % (where, tag, value)) from None
    raise ConfigError("%s: unhandled value tag %s" % (where, tag))


def _build_config(seen, path):
    def get(section, key, default=None):
        got = seen.pop((section, key), None)
        if got is None:
            return default
        lineno, value = got
        tag = _SCHEMA[section][key][0]
        return _parse_value(tag, value, "%s:%d" % (path, lineno))

    kw = {}
    name = get("experiment", "name")
    if name not in EXPERIMENTS:
        raise ConfigError("%s: experiment name must be one of %s, got %r"
                          % (path, "/".join(EXPERIMENTS), name))
    kw["name"] = name
    seed = get("experiment", "seed")
    if seed is None:
        raise ConfigError("%s: [experiment] seed is required" % path)
    kw["seed"] = seed
    for key in ("replicas", "replica_offset", "samples", "out",
                "max_vertices", "separation"):
        got = get("experiment", key)
        if got is not None:
            kw[key] = got
    if ("box", "dimension") in seen or ("box", "side") in seen:
        d = get("box", "dimension")
        L = get("box", "side")
        boundary = get("box", "boundary", "wired")
        if d is None or L is None:
            raise ConfigError("%s: [box] needs dimension and side" % path)
        try:
            kw["box"] = BoxSpec(d, L, boundary)
        except GraphError as err:
            raise ConfigError("%s: bad box: %s" % (path, err)) from None
    cases = seen.pop(("grid", "case"), [])
    if cases:
        grid = []
        for lineno, value in cases:
            parts = value.split()
            if len(parts) != 2:
                raise ConfigError("%s:%d: case needs `dimension side`"
                                  % (path, lineno))
            grid.append((int(parts[0]), int(parts[1])))
        kw["grid"] = tuple(grid)
    gb = get("grid", "boundary")
    if gb is not None:
        kw["grid_boundary"] = gb
    for key in ("m_ladder", "horizons", "pairs", "lazy"):
        got = get("walks", key)
        if got is not None:
            kw[key] = got
    tuples = seen.pop(("tuples", "tuple"), [])
    if tuples:
        parsed = []
        for lineno, value in tuples:
            marks = []
            for part in value.split(";"):
                coord = tuple(int(x) for x in part.split())
                if not coord:
                    raise ConfigError("%s:%d: empty coordinate in tuple"
                                      % (path, lineno))
                marks.append(coord)
            if len({len(c) for c in marks}) != 1:
                raise ConfigError("%s:%d: mixed dimensions in tuple"
                                  % (path, lineno))
            parsed.append(tuple(marks))
        kw["tuples"] = tuple(parsed)
    if any(k[0] == "property" for k in seen):
        kind = get("property", "kind")
        if kind is None:
            raise ConfigError("%s: [property] needs kind" % path)
        try:
            kw["prop"] = PropertySpec(
                kind=kind,
                threshold=get("property", "threshold", 1),
                min_size=get("property", "min_size", 1),
                window_fraction=get("property", "window_fraction", 1.0),
                name=get("property", "custom", ""))
        except ValueError as err:
            raise ConfigError("%s: bad property: %s" % (path, err)) from None
    for key in ("radius", "outer_radii", "keep"):
        got = get("conditioning", key)
        if got is not None:
            kw[key] = got
    leftovers = [k for k in seen]
    if leftovers:
        raise ConfigError("%s: unused keys %s" % (path, leftovers))
    cfg = ExperimentConfig(**kw)
    _validate(cfg, path)
    return cfg


def _validate(cfg, path):
    for req in _REQUIRED[cfg.name]:
        if not getattr(cfg, req):
            raise ConfigError("%s: experiment %r requires %s"
                              % (path, cfg.name, req))
    if cfg.replicas < 1 or cfg.samples < 1:
        raise ConfigError("%s: replicas and samples must be positive" % path)
    if cfg.name == "indistinguishability":
        if cfg.box is None:
            raise ConfigError("%s: needs a [box]" % path)
        d = cfg.box.dimension
        ks = {len(u) for u in cfg.tuples}
        if len(ks) != 1:
            raise ConfigError("%s: tuples must share one arity" % path)
        for u in cfg.tuples:
            for coord in u:
                if len(coord) != d:
                    raise ConfigError("%s: tuple coordinate has dimension %d, "
                                      "box has %d" % (path, len(coord), d))
                if not all(0 <= x < cfg.box.side for x in coord):
                    raise ConfigError("%s: tuple coordinate %s outside the box"
                                      % (path, coord))
    if cfg.name == "connectivity":
        for (d, L) in cfg.grid:
            if cfg.separation >= L - L // 2:
                raise ConfigError("%s: separation %d does not fit in side %d"
                                  % (path, cfg.separation, L))
    if cfg.name == "intersections" and (cfg.grid_boundary or "torus") != "torus":
        raise ConfigError("%s: intersection runs walk on the torus" % path)


def emit_config(cfg):
    """Canonical text form; parse_config(emit_config(c)) == c."""
    out = io.StringIO()
    out.write("[experiment]\n")
    out.write("name = %s\n" % cfg.name)
    out.write("seed = %d\n" % cfg.seed)
    out.write("replicas = %d\n" % cfg.replicas)
    out.write("replica_offset = %d\n" % cfg.replica_offset)
    out.write("samples = %d\n" % cfg.samples)
    if cfg.out:
        out.write("out = %s\n" % cfg.out)
    out.write("max_vertices = %d\n" % cfg.max_vertices)
    if cfg.name == "connectivity":
        out.write("separation = %d\n" % cfg.separation)
    if cfg.box is not None:
        out.write("\n[box]\n")
        out.write("dimension = %d\n" % cfg.box.dimension)
        out.write("side = %d\n" % cfg.box.side)
        out.write("boundary = %s\n" % cfg.box.boundary)
    if cfg.grid:
        out.write("\n[grid]\n")
        for (d, L) in cfg.grid:
            out.write("case = %d %d\n" % (d, L))
        if cfg.grid_boundary:
            out.write("boundary = %s\n" % cfg.grid_boundary)
    if cfg.m_ladder or cfg.horizons or cfg.name == "intersections":
        out.write("\n[walks]\n")
        if cfg.m_ladder:
            out.write("m_ladder = %s\n" % " ".join(str(m) for m in cfg.m_ladder))
        if cfg.horizons:
            out.write("horizons = %s\n" % " ".join(str(h) for h in cfg.horizons))
        if cfg.name == "intersections":
            out.write("pairs = %d\n" % cfg.pairs)
        out.write("lazy = %s\n" % ("true" if cfg.lazy else "false"))
    if cfg.tuples:
        out.write("\n[tuples]\n")
        for u in cfg.tuples:
            out.write("tuple = %s\n"
                      % " ; ".join(" ".join(str(x) for x in c) for c in u))
    if cfg.prop is not None:
        out.write("\n[property]\n")
        out.write("kind = %s\n" % cfg.prop.kind)
        out.write("threshold = %d\n" % cfg.prop.threshold)
        out.write("min_size = %d\n" % cfg.prop.min_size)
        out.write("window_fraction = %s\n" % repr(cfg.prop.window_fraction))
        if cfg.prop.name:
            out.write("custom = %s\n" % cfg.prop.name)
    if cfg.name == "decorrelation":
        out.write("\n[conditioning]\n")
        out.write("radius = %d\n" % cfg.radius)
        out.write("outer_radii = %s\n" % " ".join(str(r) for r in cfg.outer_radii))
        if cfg.keep is not None:
            out.write("keep = %s\n" % " ".join(str(e) for e in cfg.keep))
    return out.getvalue()


# ---------------------------------------------------------------------------
# records


CSV_COLUMNS = ("experiment", "replica", "seed", "d", "L", "boundary",
               "quantity", "m", "R", "r", "horizon", "tuple_id", "value",
               "se", "n", "voids")


@dataclass(frozen=True)
class StatsRecord:
    """One scalar estimate with its provenance; empty fields stay None."""

    experiment: str
    replica: int
    seed: int
    quantity: str
    value: float
    d: int = None
    L: int = None
    boundary: str = None
    m: int = None
    R: int = None
    r: int = None
    horizon: int = None
    tuple_id: int = None
    se: float = None
    n: int = None
    voids: int = None

    def as_row(self):
        row = []
        for col in CSV_COLUMNS:
            x = getattr(self, col)
            if x is None:
                row.append("")
            elif isinstance(x, float):
                row.append(repr(x))
            else:
                row.append(str(x))
        return row


def write_csv(records, path):
    """Atomic CSV write: tempfile in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".csv.part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rec in records:
                writer.writerow(rec.as_row())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path):
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            kw = {}
            for col in CSV_COLUMNS:
                raw = row[col]
                if raw == "":
                    kw[col] = None
                elif col in ("experiment", "boundary", "quantity"):
                    kw[col] = raw
                elif col in ("value", "se"):
                    kw[col] = float(raw)
                else:
                    kw[col] = int(raw)
            out.append(StatsRecord(**kw))
    return out


def pool_binomial(records):
    """Pool per-replica binomial rows into one (p, se, n)."""
    n = sum(rec.n for rec in records)
    hits = sum(rec.value * rec.n for rec in records)
    p = hits / n if n else float("nan")
    return p, binomial_se(hits, n), n


def combine_means(records):
    """Combine per-replica means: grand mean and replicate-spread SE."""
    vals = np.array([rec.value for rec in records], dtype=np.float64)
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
    return float(vals.mean()), se, vals.size


def select(records, quantity=None, **keys):
    out = []
    for rec in records:
        if quantity is not None and rec.quantity != quantity:
            continue
        if all(getattr(rec, k) == v for k, v in keys.items()):
            out.append(rec)
    return out


# ---------------------------------------------------------------------------
# resource guard and runner


def check_resources(cfg):
    # intersection runs never materialize their torus, so their grid is
    # exempt from the vertex cap; only the packed-coordinate ids must fit.
    cases = [] if cfg.name == "intersections" else list(cfg.grid)
    if cfg.box is not None:
        cases.append((cfg.box.dimension, cfg.box.side))
    worst = 0
    for (d, L) in cases:
        worst = max(worst, L ** d + 1)
    if worst > cfg.max_vertices:
        mb = worst * 8 * 6 / 1e6
        raise ResourceLimit(
            "projected %d vertices exceeds the limit %d "
            "(roughly %.0f MB of working arrays per sample); raise "
            "max_vertices explicitly if this is intended"
            % (worst, cfg.max_vertices, mb))
    if cfg.name == "intersections":
        for (d, L) in cfg.grid:
            if L ** d >= 2 ** 62:
                raise ResourceLimit(
                    "torus %d^%d has too many sites to pack positions "
                    "into 64-bit ids" % (L, d))


def run_experiment(cfg, workers=1):
    """All replica rows for cfg, in replica order, worker-count invariant."""
    check_resources(cfg)
    prolog = _prolog(cfg)
    ids = list(range(cfg.replica_offset, cfg.replica_offset + cfg.replicas))
    args = [(cfg, r, prolog) for r in ids]
    if workers <= 1:
        chunks = [replica_rows(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(replica_rows, args))
    return [rec for chunk in chunks for rec in chunk]


def replica_rows(args):
    """Rows for one replica: a pure function of (config, replica id)."""
    cfg, replica, prolog = args
    fn = {"connectivity": _connectivity_rows,
          "intersections": _intersections_rows,
          "indistinguishability": _indistinguishability_rows,
          "decorrelation": _decorrelation_rows}[cfg.name]
    return fn(cfg, replica, prolog)


def _prolog(cfg):
    """Work shared by all replicas, computed once, deterministically."""
    if cfg.name == "decorrelation":
        return {"keep": resolve_conditioning(cfg)}
    return {}


# ---------------------------------------------------------------------------
# drivers


def _connectivity_rows(cfg, replica, prolog):
    rows = []
    boundary = cfg.grid_boundary or "wired"
    for ci, (d, L) in enumerate(cfg.grid):
        spec = BoxSpec(d, L, boundary)
        box = WiredBox(spec)
        center = [L // 2] * d
        other = list(center)
        other[0] += cfg.separation
        pair = (box.vertex(center), box.vertex(other))
        same = 0
        comp_counts = np.empty(cfg.samples, dtype=np.int64)
        for i in range(cfg.samples):
            forest = sample_wired_usf(
                box, stream(cfg.seed, replica, ROLE_FOREST, ci, i))
            labels, ncomp = components(forest)
            comp_counts[i] = ncomp
            if labels[pair[0]] == labels[pair[1]]:
                same += 1
        rows.append(StatsRecord(
            experiment=cfg.name, replica=replica, seed=cfg.seed, d=d, L=L,
            boundary=boundary, quantity="same_tree_frac", r=cfg.separation,
            value=same / cfg.samples, se=binomial_se(same, cfg.samples),
            n=cfg.samples, voids=0))
        rows.append(StatsRecord(
            experiment=cfg.name, replica=replica, seed=cfg.seed, d=d, L=L,
            boundary=boundary, quantity="mean_components",
            value=float(comp_counts.mean()),
            se=float(comp_counts.std(ddof=1) / np.sqrt(cfg.samples))
            if cfg.samples > 1 else None,
            n=cfg.samples, voids=0))
    return rows


def _torus_walk(d, L, horizon, rng, lazy):
    """Lazy walk on the d-dimensional side-L torus, in coordinate space.

    Intersection runs at large horizons need tori far wider than any graph
    we would want to hold in memory, so the walk keeps integer coordinates
    and packs each position into a single id.  Returns the packed trace and
    the largest unwrapped coordinate excursion, which the caller uses to
    confirm that wraparound stayed rare at this horizon.
    """
    axis = rng.integers(0, d, size=horizon)
    move = rng.integers(0, 2, size=horizon).astype(np.int64) * 2 - 1
    if lazy:
        move *= rng.integers(0, 2, size=horizon)
    steps = np.zeros((horizon + 1, d), dtype=np.int64)
    steps[np.arange(1, horizon + 1), axis] = move
    pos = np.cumsum(steps, axis=0)
    drift = int(np.abs(pos).max()) if horizon > 0 else 0
    keys = np.zeros(horizon + 1, dtype=np.int64)
    for i in range(d):
        keys = keys * L + (pos[:, i] + L // 2) % L
    return WalkPath(vertices=keys), drift


def _intersections_rows(cfg, replica, prolog):
    rows = []
    boundary = cfg.grid_boundary or "torus"
    horizon = max(tuple(cfg.horizons) + tuple(cfg.m_ladder or (0,)))
    for ci, (d, L) in enumerate(cfg.grid):
        counts_h = np.zeros((len(cfg.horizons), cfg.pairs))
        counts_m = np.zeros((len(cfg.m_ladder), cfg.pairs))
        wrapped = 0
        for p in range(cfg.pairs):
            w1, d1 = _torus_walk(d, L, horizon,
                                 stream(cfg.seed, replica, ROLE_WALK, ci, p, 0),
                                 cfg.lazy)
            w2, d2 = _torus_walk(d, L, horizon,
                                 stream(cfg.seed, replica, ROLE_WALK, ci, p, 1),
                                 cfg.lazy)
            for hi, h in enumerate(cfg.horizons):
                counts_h[hi, p] = intersection_count(w1.up_to(h), w2.up_to(h))
            for mi, m in enumerate(cfg.m_ladder):
                counts_m[mi, p] = intersection_count(w1, w2, from_time=m)
            if max(d1, d2) > L // 2:
                wrapped += 1
        for hi, h in enumerate(cfg.horizons):
            rows.append(StatsRecord(
                experiment=cfg.name, replica=replica, seed=cfg.seed, d=d, L=L,
                boundary=boundary, quantity="mean_intersections", horizon=h,
                value=float(counts_h[hi].mean()),
                se=float(counts_h[hi].std(ddof=1) / np.sqrt(cfg.pairs))
                if cfg.pairs > 1 else None,
                n=cfg.pairs, voids=0))
        for hi in range(1, len(cfg.horizons)):
            # paired growth between consecutive horizons; the shared early
            # segment cancels, which is what makes saturation detectable
            gain = counts_h[hi] - counts_h[hi - 1]
            rows.append(StatsRecord(
                experiment=cfg.name, replica=replica, seed=cfg.seed, d=d, L=L,
                boundary=boundary, quantity="intersection_gain",
                horizon=cfg.horizons[hi], value=float(gain.mean()),
                se=float(gain.std(ddof=1) / np.sqrt(cfg.pairs))
                if cfg.pairs > 1 else None,
                n=cfg.pairs, voids=0))
        for mi, m in enumerate(cfg.m_ladder):
            rows.append(StatsRecord(
                experiment=cfg.name, replica=replica, seed=cfg.seed, d=d, L=L,
                boundary=boundary, quantity="mean_intersections_from", m=m,
                horizon=horizon, value=float(counts_m[mi].mean()),
                se=float(counts_m[mi].std(ddof=1) / np.sqrt(cfg.pairs))
                if cfg.pairs > 1 else None,
                n=cfg.pairs, voids=0))
        rows.append(StatsRecord(
            experiment=cfg.name, replica=replica, seed=cfg.seed, d=d, L=L,
            boundary=boundary, quantity="wraparound_frac", horizon=horizon,
            value=wrapped / cfg.pairs, se=binomial_se(wrapped, cfg.pairs),
            n=cfg.pairs, voids=0))
    return rows


def _indistinguishability_rows(cfg, replica, prolog):
    box = WiredBox(cfg.box)
    system = RootedSystem.from_box(box)
    tuples = [tuple(box.vertex(c) for c in u) for u in cfg.tuples]
    ests = estimate_conditional_multi(
        system, tuples, cfg.prop, box.interior, cfg.samples, cfg.seed,
        cfg.m_ladder, replica=replica)
    rows = []
    for ti, est in enumerate(ests):
        common = dict(experiment=cfg.name, replica=replica, seed=cfg.seed,
                      d=cfg.box.dimension, L=cfg.box.side,
                      boundary=cfg.box.boundary, tuple_id=ti)
        rows.append(StatsRecord(quantity="w_frac", value=est.w_frac,
                                se=binomial_se(est.n_w, est.n_samples),
                                n=est.n_samples, voids=0, **common))
        rows.append(StatsRecord(quantity="p_given_w", value=est.p_w,
                                se=est.se_w, n=est.n_w, voids=0, **common))
        for j, m in enumerate(est.m_values):
            rows.append(StatsRecord(quantity="p_at_m", m=m,
                                    value=float(est.p_m[j]),
                                    se=float(est.se_m[j]),
                                    n=int(est.n_m[j]),
                                    voids=int(est.voids_m[j]), **common))
    return rows


def resolve_conditioning(cfg):
    """The in-ball edge set the decorrelation run conditions on.

    Explicit `keep` is used as given; otherwise the most frequent in-ball
    configuration over a pilot batch of wired samples, drawn from a
    replica-independent stream so every chunk of a split run agrees on it.
    """
    box = WiredBox(cfg.box)
    u1 = box.center()
    if cfg.keep is not None:
        return tuple(sorted(int(e) for e in cfg.keep))
    ball = box.interior.ball_mask(u1, cfg.radius)
    seen = Counter()
    for i in range(cfg.samples):
        forest = sample_wired_usf(box, stream(cfg.seed, 0, ROLE_PILOT, i))
        seen[forest_window_key(forest, ball)] += 1
    best, _ = max(seen.items(), key=lambda kv: (kv[1], kv[0]))
    return tuple(int(e) for e in best)


def _decorrelation_rows(cfg, replica, prolog):
    box = WiredBox(cfg.box)
    system = RootedSystem.from_box(box)
    u1 = box.center()
    keep = prolog["keep"]
    quotient = condition_on_ball(box.graph, u1, cfg.radius, keep,
                                 metric=box.interior)
    dist = box.interior.distances(u1)
    outer_masks = [dist >= R for R in cfg.outer_radii]
    keys_plain = [[] for _ in cfg.outer_radii]
    keys_cond = [[] for _ in cfg.outer_radii]
    pilot_hits = 0
    ball = box.interior.ball_mask(u1, cfg.radius)
    for i in range(cfg.samples):
        plain = sample_wired_usf(box, stream(cfg.seed, replica, ROLE_FOREST, i))
        tree = sample_conditioned(quotient, box.b,
                                  stream(cfg.seed, replica, ROLE_AUX, i))
        cond = delete_root(tree, box.b)
        if forest_window_key(plain, ball) == tuple(keep):
            pilot_hits += 1
        for j in range(len(cfg.outer_radii)):
            keys_plain[j].append(forest_window_key(plain, outer_masks[j]))
            keys_cond[j].append(forest_window_key(cond, outer_masks[j]))
    rows = [StatsRecord(
        experiment=cfg.name, replica=replica, seed=cfg.seed,
        d=cfg.box.dimension, L=cfg.box.side, boundary=cfg.box.boundary,
        quantity="conditioning_frequency", r=cfg.radius,
        value=pilot_hits / cfg.samples,
        se=binomial_se(pilot_hits, cfg.samples), n=cfg.samples,
        voids=0)]
    rows.append(StatsRecord(
        experiment=cfg.name, replica=replica, seed=cfg.seed,
        d=cfg.box.dimension, L=cfg.box.side, boundary=cfg.box.boundary,
        quantity="conditioning_size", r=cfg.radius, value=float(len(keep)),
        n=cfg.samples, voids=0))
    for j, R in enumerate(cfg.outer_radii):
        tv = tv_between(keys_plain[j], keys_cond[j])
        rows.append(StatsRecord(
            experiment=cfg.name, replica=replica, seed=cfg.seed,
            d=cfg.box.dimension, L=cfg.box.side, boundary=cfg.box.boundary,
            quantity="tv_window", r=cfg.radius, R=R, value=tv.value,
            n=cfg.samples, voids=0))
    return rows
