"""Experiment drivers: weak-type delta sweep, Hoelder probe, covering campaign."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, fields, is_dataclass
from dataclasses import field as _field
from pathlib import Path

import numpy as np

from lipkakeya import covering as cov
from lipkakeya.maximal import EnumSpec, ScalarField, density_table, disc_indicator, eval_M_v_delta
from lipkakeya.vectorfield import Sampler, VectorField


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config

@dataclass
class FieldConfig:
    kind: str = "sinusoidal"
    params: dict = _field(default_factory=lambda: {"theta": 0.3, "lip": 1.0, "periods": 2.0})


@dataclass
class GridConfig:
    n: int = 512
    pitch: float = 0.01 / 64


@dataclass
class SweepConfig:
    deltas: tuple = (0.5, 0.25, 0.125, 0.0625, 0.03125)
    radii: tuple = (4.0, 8.0, 16.0)
    lambda_lo: float = 2.0 ** -10
    lambda_hi: float = 2.0 ** 10
    lambda_ratio: float = math.sqrt(2.0)


@dataclass
class EnumConfig:
    j_max: int = 2
    m_max: int = 6
    orient_factor: float = 0.5
    center_factor: float = 0.5
    max_length: float = 0.0  # 0: use the field's cap


@dataclass
class SamplerConfig:
    strategy: str = "qmc"
    seed: int = 0
    max_count: int = 4096


@dataclass
class HolderConfig:
    alpha: float = 0.5
    scales: tuple = (2.0 ** -6, 2.0 ** -7, 2.0 ** -8, 2.0 ** -9, 2.0 ** -10)
    delta: float = 0.25
    amp: float = 0.5
    control_amp: float = 0.075
    base: float = 1.0
    theta: float = 0.3
    n: int = 256
    pitch: float = 2.0 ** -8
    max_length: float = 2.0 ** -3
    m_max: int = 4
    radius: float = 4.0


@dataclass
class CampaignConfig:
    n: int = 200
    seeds: int = 5
    min_rects: int = 100
    max_rects: int = 500
    delta: float = 0.25
    region: float = 4.0  # side of the sampling square, in units of the length cap
    lip: float = 1.0
    stress_hosts: int = 4
    stress_class: int = 100


@dataclass
class ExperimentConfig:
    field: FieldConfig = _field(default_factory=FieldConfig)
    grid: GridConfig = _field(default_factory=GridConfig)
    sweep: SweepConfig = _field(default_factory=SweepConfig)
    enum: EnumConfig = _field(default_factory=EnumConfig)
    sampler: SamplerConfig = _field(default_factory=SamplerConfig)
    holder: HolderConfig = _field(default_factory=HolderConfig)
    campaign: CampaignConfig = _field(default_factory=CampaignConfig)
    kappa: int = 100
    seed: int = 0
    out: str = "out"
    threads: int = 1

    def validate(self) -> "ExperimentConfig":
        for section in (self.grid, self.sweep, self.enum, self.sampler, self.holder, self.campaign):
            for f in fields(section):
                val = getattr(section, f.name)
                vals = val if isinstance(val, tuple) else (val,)
                for x in vals:
                    if isinstance(x, (int, float)) and not isinstance(x, bool):
                        if not math.isfinite(x) or x < 0:
                            raise ConfigError(f"{f.name} must be finite and nonnegative, got {x}")
        if any(not 0 < d <= 1 for d in self.sweep.deltas + (self.holder.delta, self.campaign.delta)):
            raise ConfigError("delta values must lie in (0, 1]")
        if self.grid.n < 8 or self.grid.pitch <= 0:
            raise ConfigError("grid needs n >= 8 and positive pitch")
        if self.kappa < 8:
            raise ConfigError("kappa must be at least 8")
        if not 0 < self.holder.alpha <= 1:
            raise ConfigError("holder.alpha must lie in (0, 1]")
        if self.campaign.seeds < 1 or self.campaign.n < self.campaign.seeds:
            raise ConfigError("campaign.n must be at least campaign.seeds >= 1")
        if not 1 <= self.campaign.min_rects <= self.campaign.max_rects:
            raise ConfigError("need 1 <= campaign.min_rects <= campaign.max_rects")
        if self.sweep.lambda_ratio <= 1 or self.sweep.lambda_lo >= self.sweep.lambda_hi:
            raise ConfigError("lambda grid needs ratio > 1 and lo < hi")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        return self


def _coerce(text: str, default):
    text = text.strip()
    try:
        if isinstance(default, bool):
            if text.lower() not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return text.lower() in ("true", "1")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as e:
        raise ConfigError(f"cannot parse {text!r}: {e}") from None
    return text


def parse_config(text: str) -> ExperimentConfig:
    """Flat ``key = value`` lines with dotted keys; ``#`` starts a comment.

    ``field.kind`` picks the field, other ``field.*`` keys are its parameters.
    """
    cfg = ExperimentConfig()
    field_params: dict | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (t.strip() for t in line.split("=", 1))
        parts = key.split(".")
        if parts[0] == "field" and len(parts) == 2:
            if parts[1] == "kind":
                cfg.field.kind = val
            else:
                field_params = {} if field_params is None else field_params
                field_params[parts[1]] = _coerce(val, 0.0)
            continue
        target = cfg
        for p in parts[:-1]:
            target = getattr(target, p, None)
            if not is_dataclass(target):
                raise ConfigError(f"line {lineno}: unknown section in {key!r}")
        name = parts[-1]
        if name not in {f.name for f in fields(target)} or is_dataclass(getattr(target, name)):
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        setattr(target, name, _coerce(val, getattr(target, name)))
    if field_params is not None:
        cfg.field.params = field_params
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    return parse_config(text)


# where results go and how many workers compute them never changes the results
RUN_ONLY_KEYS = ("out", "threads")


def dump_config(cfg: ExperimentConfig, skip=()) -> str:
    lines = []

    def walk(obj, prefix):
        for f in fields(obj):
            val = getattr(obj, f.name)
            key = f"{prefix}{f.name}"
            if key in skip:
                continue
            if is_dataclass(val):
                walk(val, key + ".")
            elif key == "field.params":
                lines.extend(f"field.{k} = {v!r}" for k, v in sorted(val.items()))
            elif isinstance(val, tuple):
                lines.append(f"{key} = " + ", ".join(repr(x) for x in val))
            else:
                lines.append(f"{key} = {val}")
    walk(cfg, "")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ fields

def grid_extent(cfg: ExperimentConfig) -> float:
    return (cfg.grid.n - 1) * cfg.grid.pitch


def build_field(cfg: ExperimentConfig) -> VectorField:
    """Field on the grid box.

    For ``sinusoidal`` the keys ``lip`` and ``periods`` (over the box) may
    replace ``a`` and ``k``.
    """
    ext = grid_extent(cfg)
    params = dict(cfg.field.params)
    if cfg.field.kind == "sinusoidal" and "lip" in params:
        k = 2.0 * math.pi * params.pop("periods", 1.0) / ext
        params["k"] = k
        params["a"] = params.pop("lip") / k
    try:
        return VectorField(cfg.field.kind, params, domain=(0.0, 0.0, ext, ext))
    except ValueError as e:
        raise ConfigError(str(e)) from None


def enum_spec(cfg: ExperimentConfig, v: VectorField) -> EnumSpec:
    e = cfg.enum
    L = e.max_length if e.max_length > 0 else (v.nu if math.isfinite(v.nu) else 0.0)
    if L <= 0:
        raise ConfigError("enum.max_length is required for fields without a length cap")
    return EnumSpec(j_max=e.j_max, m_max=e.m_max, max_length=L, orient_factor=e.orient_factor,
                    center_factor=e.center_factor, min_center_pitch=cfg.grid.pitch)


def sampler(cfg: ExperimentConfig) -> Sampler:
    s = cfg.sampler
    return Sampler(strategy=s.strategy, seed=s.seed, max_count=s.max_count)


# ------------------------------------------------------------------- sweep

@dataclass
class SweepRow:
    delta: float
    radius: float
    quantity: float
    witness_lambda: float
    family_size: int
    runtime: float = 0.0
    flagged: bool = False
    reach: float = 0.0  # |{Mf > 0}| / |supp f|


CSV_COLUMNS = ("delta", "radius", "quantity", "witness_lambda", "family_size", "reach",
               "flagged")


def lambda_grid(f: ScalarField, sc: SweepConfig) -> np.ndarray:
    supp = float(np.count_nonzero(f.values)) * f.pitch ** 2
    if supp == 0:
        return np.zeros(0)
    base = f.l2 / math.sqrt(supp)
    k_lo = math.floor(math.log(sc.lambda_lo) / math.log(sc.lambda_ratio) + 1e-9)
    k_hi = math.ceil(math.log(sc.lambda_hi) / math.log(sc.lambda_ratio) - 1e-9)
    return base * sc.lambda_ratio ** np.arange(k_lo, k_hi + 1, dtype=float)


def weak_type_quantity(values: np.ndarray, f: ScalarField, lams: np.ndarray) -> tuple[float, float]:
    """sup over the grid of lam^2 |{Mf > lam}| / ||f||_2^2 and the maximizing lam."""
    norm2 = f.l2 ** 2
    if norm2 == 0 or lams.size == 0:
        return 0.0, 0.0
    flat = np.sort(values.ravel())
    above = flat.size - np.searchsorted(flat, lams, side="right")
    q = lams ** 2 * above * f.pitch ** 2 / norm2
    k = int(np.argmax(q))
    return float(q[k]), float(lams[k])


def _probe_roi(cfg_n: int, pitch: float, radius_cells: float):
    c = 0.5 * (cfg_n - 1) * pitch
    r = (radius_cells + 1) * pitch
    return (c - r, c - r, c + r, c + r)


def measure_table(v: VectorField, n: int, pitch: float, spec: EnumSpec, s: Sampler,
                  deltas, radii, sc: SweepConfig) -> list[SweepRow]:
    """One density table (ROI = largest disc) reused for every (delta, radius) cell."""
    ext = (n - 1) * pitch
    table = density_table(v, (0.0, 0.0, ext, ext), s, spec,
                          roi=_probe_roi(n, pitch, max(radii)))
    rows = []
    for d in deltas:
        fam = table.family(d)
        for r in radii:
            t0 = time.perf_counter()
            f = disc_indicator(n, pitch, r)
            if len(fam) == 0:
                rows.append(SweepRow(d, r, 0.0, 0.0, 0, time.perf_counter() - t0, True))
                continue
            mf = eval_M_v_delta(f, fam, skip_zero=True)
            q, lam = weak_type_quantity(mf.values, f, lambda_grid(f, sc))
            reach = np.count_nonzero(mf.values) / max(np.count_nonzero(f.values), 1)
            rows.append(SweepRow(d, r, q, lam, len(fam), time.perf_counter() - t0, q == 0.0,
                                 float(reach)))
    return rows


def fit_slope(deltas, quantities) -> float:
    """Least-squares slope of log(quantity) against log(1/delta)."""
    x = -np.log(np.asarray(deltas, dtype=float))
    y = np.asarray(quantities, dtype=float)
    ok = y > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(x[ok], np.log(y[ok]), 1)[0])


def weak_type_sweep(cfg: ExperimentConfig) -> tuple[list[SweepRow], dict[float, float]]:
    v = build_field(cfg)
    rows = measure_table(v, cfg.grid.n, cfg.grid.pitch, enum_spec(cfg, v), sampler(cfg),
                         cfg.sweep.deltas, cfg.sweep.radii, cfg.sweep)
    slopes = {}
    for r in cfg.sweep.radii:
        sel = [row for row in rows if row.radius == r and not row.flagged]
        slopes[r] = fit_slope([x.delta for x in sel], [x.quantity for x in sel])
    return rows, slopes


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x} in CSV output")
        return repr(x)
    return str(x)


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        d = asdict(row) if is_dataclass(row) else row
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


# ------------------------------------------------------------ holder probe

@dataclass
class HolderRow:
    scale: float
    field: str
    n_terms: int
    quantity: float
    family_size: int
    reach: float


def holder_field(hc: HolderConfig, alpha: float, finest: float, ext: float,
                 amp: float | None = None) -> VectorField:
    return VectorField("holder", {"theta": hc.theta, "alpha": alpha,
                                  "amp": hc.amp if amp is None else amp,
                                  "base": hc.base, "finest": finest},
                       domain=(0.0, 0.0, ext, ext))


def _holder_quantity(v: VectorField, cfg: ExperimentConfig) -> tuple[float, int]:
    hc = cfg.holder
    spec = EnumSpec(j_max=cfg.enum.j_max, m_max=hc.m_max, max_length=hc.max_length,
                    orient_factor=cfg.enum.orient_factor, center_factor=cfg.enum.center_factor,
                    min_center_pitch=hc.pitch)
    row, = measure_table(v, hc.n, hc.pitch, spec, sampler(cfg), (hc.delta,),
                         (hc.radius,), cfg.sweep)
    return row.quantity, row.family_size, row.reach


def holder_probe(cfg: ExperimentConfig, alpha: float | None = None, scales=None,
                 field_override: VectorField | None = None) -> dict:
    """Weak-type quantity of lacunary Hoelder fields truncated at each scale.

    The control is the one-term field (Lipschitz, slope control_amp/base)
    at the same scales.  ``field_override`` replaces both with a fixed field.
    """
    hc = cfg.holder
    alpha = hc.alpha if alpha is None else alpha
    scales = hc.scales if scales is None else tuple(scales)
    if not 0 < alpha < 1 and field_override is None:
        raise ConfigError("probe exponent must lie in (0, 1)")
    ext = (hc.n - 1) * hc.pitch
    control = holder_field(hc, 1.0, hc.base, ext, hc.control_amp) if field_override is None else field_override
    if hc.max_length > control.nu * (1 + 1e-12):
        raise ConfigError("holder.max_length exceeds the control field's length cap")
    rows = []
    cache: dict = {}
    for sc in scales:
        probe = holder_field(hc, alpha, sc, ext) if field_override is None else field_override
        for name, v in (("holder", probe), ("control", control)):
            key = (v.kind, tuple(sorted(v.params.items())))
            if key not in cache:
                cache[key] = _holder_quantity(v, cfg)
            rows.append(HolderRow(sc, name, v.n_terms, *cache[key]))
    seq = [r.quantity for r in rows if r.field == "holder"]
    reach = [r.reach for r in rows if r.field == "holder"]
    ctl = [r.quantity for r in rows if r.field == "control"]
    ratio = (max(ctl) / min(ctl)) if min(ctl) > 0 else (1.0 if max(ctl) == 0 else math.inf)
    return {"rows": rows, "alpha": alpha,
            "nondecreasing": all(b >= a for a, b in zip(seq, seq[1:])),
            "reach_nondecreasing": all(b >= a for a, b in zip(reach, reach[1:])),
            "control_ratio": ratio}


# ---------------------------------------------------------------- campaign

COVER_ESTIMATES = ("uni1", "uni2", "uni3", "2<1", "bigcup")
ZERO_VIOLATION = ("samedirection", "geo", "stromberg", "V", "interval_triple", "interval_gap")


def campaign_field(rng: np.random.Generator, cc: CampaignConfig) -> VectorField:
    nu = 1.0 / (100.0 * cc.lip)
    side = (cc.region + 2.0) * nu
    return cov.random_field(rng, (-nu, -nu, side - nu, side - nu), cc.lip)


def run_instance(cfg: ExperimentConfig, seed_index: int, k: int) -> dict:
    cc = cfg.campaign
    rng = np.random.default_rng([cfg.seed, seed_index, k])
    out = {"seed_index": seed_index, "instance": k}
    try:
        v = campaign_field(rng, cc)
        nu = v.nu
        n = int(rng.integers(cc.min_rects, cc.max_rects + 1))
        fam = cov.random_admissible_family(rng, v, n, cc.delta,
                                           (0.0, 0.0, cc.region * nu, cc.region * nu))
        cr, uds, reports = cov.run_pipeline(fam, v, cfg.kappa)
        stress = cov.decompose(cov.stress_hosts(fam, cc.stress_hosts, cc.stress_class), v)
        out.update({
            "n_rects": len(fam), "n_selected": len(cr.selected),
            "n_hosts": len(uds), "n_groups": sum(len(u.reps) for u in uds),
            "diagnostics": cr.diagnostics,
            "selected": list(cr.selected),
            "reports": {r.name: r.to_dict() for r in reports},
            "stress": {r.name: r.to_dict() for r in cov.verify_estimates(cr, stress, fam)
                       if r.name not in ("uni1", "2<1", "bigcup")},
            "stress_groups": sum(len(u.reps) for u in stress),
        })
    except Exception as e:  # recorded, campaign continues
        out["error"] = f"{type(e).__name__}: {e}"
    return out


def stability(per_seed: list[float]) -> float:
    """max / median across seeds; 1 when every value is 0."""
    top, med = max(per_seed), float(np.median(per_seed))
    if top == 0.0:
        return 1.0
    return top / med if med > 0 else math.inf


def summarize(instances: list[dict], cfg: ExperimentConfig) -> dict:
    cc = cfg.campaign
    ok = [r for r in instances if "error" not in r]
    names = sorted({n for r in ok for n in r["reports"]})
    table = {}
    for name in names:
        per_seed = []
        for s in range(cc.seeds):
            vals = [r["reports"][name]["ratio"] for r in ok
                    if r["seed_index"] == s and name in r["reports"]]
            per_seed.append(max(vals) if vals else 0.0)
        table[name] = {
            "per_seed_max": per_seed,
            "max": max(per_seed),
            "stability": stability(per_seed),
            "violations": sum(r["reports"][name]["violations"] for r in ok if name in r["reports"]),
            "instances": sum(r["reports"][name]["instances"] for r in ok if name in r["reports"]),
            "stress_max": max((r["stress"][name]["ratio"] for r in ok if name in r["stress"]),
                              default=0.0),
            "stress_violations": sum(r["stress"][name]["violations"] for r in ok
                                     if name in r["stress"]),
        }
    lemmas_ok = all(table.get(n, {"violations": 0})["violations"] == 0 for n in ZERO_VIOLATION)
    stable = all(math.isfinite(table[n]["max"]) and table[n]["stability"] <= 3.0
                 for n in COVER_ESTIMATES if n in table)
    return {"estimates": table, "n_instances": len(instances), "n_errors": len(instances) - len(ok),
            "n_pairs": sum(r["diagnostics"].get("n_pairs", 0) for r in ok),
            "n_groups": sum(r["n_groups"] for r in ok),
            "stress_groups": sum(r["stress_groups"] for r in ok),
            "lemmas_ok": lemmas_ok, "stable": stable}


def run_campaign(cfg: ExperimentConfig) -> dict:
    cc = cfg.campaign
    per_seed = cc.n // cc.seeds
    jobs = [(s, k) for s in range(cc.seeds) for k in range(per_seed)]
    if cfg.threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(cfg.threads) as ex:
            results = list(ex.map(run_instance, [cfg] * len(jobs), *zip(*jobs)))
    else:
        results = [run_instance(cfg, s, k) for s, k in jobs]
    return {"config": dump_config(cfg, RUN_ONLY_KEYS), "instances": results,
            "summary": summarize(results, cfg)}


def summary_csv(summary: dict) -> str:
    cols = ("estimate", "max", "stability", "violations", "instances", "stress_max",
            "stress_violations")
    rows = [dict(estimate=n, **{k: t[k] for k in cols[1:]})
            for n, t in sorted(summary["estimates"].items())]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([r["estimate"]] + [repr(r[c]) if isinstance(r[c], float) else r[c]
                                      for c in cols[1:]])
    return buf.getvalue()
