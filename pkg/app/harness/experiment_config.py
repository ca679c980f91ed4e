# ============================================================
# app/harness/experiment_config.py — Lectura y validación de
# configuraciones de experimento (YAML)
# ============================================================
# Cada clave se valida contra una lista cerrada: una clave desconocida
# (por ejemplo un typo como `ensemble.laws[1].dff`) produce un
# ConfigError con la ruta exacta de la clave.
#
# Ejemplo mínimo:
#   experiment: recovery_sweep
#   descriptor: {kind: sparse_ball, s: 2, n: 32}
#   ensemble:   {laws: [{law: gaussian}], m: [100, 200]}
#   trials: 5
# ============================================================

import copy
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

from app.onebit.errors import ConfigError, OneBitError
from app.onebit.quantize import CorruptionStrategy
from app.onebit.sampling import default_dither_amplitude
from app.onebit.types import (
    MeasurementEnsemble,
    NoiseLaw,
    NoiseModel,
    RowLaw,
    SeedPlan,
    SignalSetDescriptor,
)
from app.onebit.tessellation import DEFAULT_THETAS

logger = logging.getLogger(__name__)


class ExperimentKind(str, Enum):
    TESSELLATION_AUDIT = "tessellation_audit"
    RECOVERY_SWEEP = "recovery_sweep"
    QUANTIZER_MEAN_CHECK = "quantizer_mean_check"
    BERNOULLI_FAILURE_DEMO = "bernoulli_failure_demo"
    WIDTH_TABLE = "width_table"


class SolverName(str, Enum):
    HAMMING_LOCAL = "hamming_local"
    HAMMING_NET = "hamming_net"
    CONVEX = "convex"


@dataclass(frozen=True)
class LawSpec:
    law: RowLaw
    df: Optional[float] = None
    alpha: Optional[float] = None

    def ensemble(self, n: int, m: int, lam: float) -> MeasurementEnsemble:
        return MeasurementEnsemble(self.law, n=n, m=m, lam=lam, df=self.df, alpha=self.alpha)

    @property
    def label(self) -> str:
        if self.law is RowLaw.STUDENT_T:
            return f"student_t(df={self.df:g})"
        if self.law is RowLaw.COORD_HEAVY:
            return f"coord_heavy(alpha={self.alpha:g})"
        return self.law.value


@dataclass(frozen=True)
class SolverSpec:
    name: SolverName = SolverName.HAMMING_LOCAL
    restarts: int = 2
    iters: int = 30
    net_radius: float = 0.1
    probe_count: int = 2000
    certify: int = 1000


@dataclass(frozen=True)
class WidthSpec:
    n_mc: int = 200
    sizes: Tuple[Tuple[int, int], ...] = ((1, 16), (2, 64), (4, 256))


@dataclass(frozen=True)
class QuantizerSpec:
    lam: float = 1.0
    z: Tuple[float, ...] = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)
    dithers: int = 1_000_000


@dataclass(frozen=True)
class AuditSpec:
    pairs: int = 200


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentKind
    descriptor: Optional[SignalSetDescriptor]
    laws: Tuple[LawSpec, ...]
    m_values: Tuple[int, ...]
    lam: Optional[float]
    noise: Tuple[NoiseModel, ...]
    beta: Tuple[float, ...]
    corruption: CorruptionStrategy
    solver: SolverSpec
    rho: float
    theta: Tuple[float, ...]
    trials: int
    seed: int
    workers: int
    output: Optional[str]
    dump_signs: bool
    width: WidthSpec
    quantizer: QuantizerSpec
    audit: AuditSpec
    raw: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def seed_plan(self) -> SeedPlan:
        return SeedPlan(self.seed)

    def lam_for(self, noise: NoiseModel) -> float:
        """λ configurado o, si falta, 2(R + σ) + ρ."""
        if self.lam is not None:
            return self.lam
        radius = self.descriptor.radius if self.descriptor is not None else 1.0
        return default_dither_amplitude(radius, noise.l2_norm, self.rho)


# ============================================================
# Helpers de validación con ruta de clave
# ============================================================
def _mapping(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigError("se esperaba un mapa clave-valor", path)
    return value


def _check_keys(value: Mapping[str, Any], allowed: Sequence[str], path: str) -> None:
    for key in value:
        if key not in allowed:
            raise ConfigError(f"clave desconocida (permitidas: {', '.join(allowed)})", _join(path, key))


def _join(path: str, key: Any) -> str:
    return f"{path}.{key}" if path else str(key)


def _list(value: Any, path: str, allow_empty: bool = False) -> List[Any]:
    if not isinstance(value, list):
        value = [value]
    if not value and not allow_empty:
        raise ConfigError("la lista no puede estar vacía", path)
    return value


def _number(value: Any, path: str, kind=float, positive: bool = False, minimum: Optional[float] = None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"se esperaba un número, no {value!r}", path)
    if kind is int and int(value) != value:
        raise ConfigError(f"se esperaba un entero, no {value!r}", path)
    value = kind(value)
    if positive and not value > 0:
        raise ConfigError(f"debe ser positivo ({value})", path)
    if minimum is not None and value < minimum:
        raise ConfigError(f"debe ser ≥ {minimum:g} ({value})", path)
    return value


def _enum(enum_cls, value: Any, path: str):
    try:
        return enum_cls(value)
    except ValueError:
        options = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"valor {value!r} no válido (opciones: {options})", path) from None


def _owned(path: str, build):
    """Ejecuta el constructor de un tipo del dominio y anota la ruta si falla."""
    try:
        return build()
    except ConfigError:
        raise
    except OneBitError as exc:
        raise ConfigError(str(exc), path) from exc


# ============================================================
# Secciones
# ============================================================
def _parse_descriptor(value: Any, path: str) -> SignalSetDescriptor:
    spec = _mapping(value, path)
    _check_keys(spec, ("kind", "s", "n", "radius", "points"), path)
    if "kind" not in spec:
        raise ConfigError("falta la clave obligatoria", _join(path, "kind"))
    kind = spec["kind"]
    radius = _number(spec.get("radius", 1.0), _join(path, "radius"), positive=True)
    if kind == "finite_set":
        points = _list(spec.get("points", []), _join(path, "points"))
        return _owned(path, lambda: SignalSetDescriptor.finite_set(points, spec.get("radius")))
    if kind not in ("sparse_ball", "l1l2_ball"):
        raise ConfigError(f"tipo {kind!r} no válido (sparse_ball, l1l2_ball, finite_set)", _join(path, "kind"))
    for key in ("s", "n"):
        if key not in spec:
            raise ConfigError("falta la clave obligatoria", _join(path, key))
    n = _number(spec["n"], _join(path, "n"), kind=int, positive=True)
    if kind == "sparse_ball":
        s = _number(spec["s"], _join(path, "s"), kind=int, positive=True)
        return _owned(path, lambda: SignalSetDescriptor.sparse_ball(s, n, radius))
    s = _number(spec["s"], _join(path, "s"), positive=True)
    return _owned(path, lambda: SignalSetDescriptor.l1l2_ball(s, n, radius))


def _parse_law(value: Any, path: str) -> LawSpec:
    if isinstance(value, str):
        value = {"law": value}
    spec = _mapping(value, path)
    _check_keys(spec, ("law", "df", "alpha"), path)
    law = _enum(RowLaw, spec.get("law"), _join(path, "law"))
    df = _number(spec["df"], _join(path, "df")) if "df" in spec else None
    alpha = _number(spec["alpha"], _join(path, "alpha")) if "alpha" in spec else None
    law_spec = LawSpec(law, df, alpha)
    _owned(path, lambda: law_spec.ensemble(1, 1, 1.0))
    return law_spec


def _parse_noise(value: Any, path: str) -> NoiseModel:
    if isinstance(value, str):
        value = {"law": value}
    spec = _mapping(value, path)
    _check_keys(spec, ("law", "sigma", "df", "mu"), path)
    law = _enum(NoiseLaw, spec.get("law", "none"), _join(path, "law"))
    sigma = _number(spec.get("sigma", 0.0), _join(path, "sigma"), minimum=0.0)
    df = _number(spec["df"], _join(path, "df")) if "df" in spec else None
    mu = _number(spec.get("mu", 0.0), _join(path, "mu"))
    return _owned(path, lambda: NoiseModel(law, sigma, df, mu))


def _parse_solver(value: Any, path: str) -> SolverSpec:
    spec = _mapping(value, path)
    _check_keys(spec, ("name", "restarts", "iters", "net_radius", "probe_count", "certify"), path)
    defaults = SolverSpec()
    return SolverSpec(
        name=_enum(SolverName, spec.get("name", defaults.name.value), _join(path, "name")),
        restarts=_number(spec.get("restarts", defaults.restarts), _join(path, "restarts"), kind=int, minimum=0),
        iters=_number(spec.get("iters", defaults.iters), _join(path, "iters"), kind=int, minimum=0),
        net_radius=_number(spec.get("net_radius", defaults.net_radius), _join(path, "net_radius"), positive=True),
        probe_count=_number(spec.get("probe_count", defaults.probe_count), _join(path, "probe_count"),
                            kind=int, positive=True),
        certify=_number(spec.get("certify", defaults.certify), _join(path, "certify"), kind=int, minimum=0),
    )


def _parse_width(value: Any, path: str) -> WidthSpec:
    spec = _mapping(value, path)
    _check_keys(spec, ("n_mc", "sizes"), path)
    defaults = WidthSpec()
    sizes = []
    for k, item in enumerate(_list(spec.get("sizes", [list(p) for p in defaults.sizes]), _join(path, "sizes"))):
        item_path = f"{_join(path, 'sizes')}[{k}]"
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ConfigError("cada tamaño es un par [s, n]", item_path)
        s = _number(item[0], item_path, kind=int, positive=True)
        n = _number(item[1], item_path, kind=int, positive=True)
        if s > n:
            raise ConfigError(f"se requiere s ≤ n ({s} > {n})", item_path)
        sizes.append((s, n))
    return WidthSpec(
        n_mc=_number(spec.get("n_mc", defaults.n_mc), _join(path, "n_mc"), kind=int, minimum=2),
        sizes=tuple(sizes),
    )


def _parse_quantizer(value: Any, path: str) -> QuantizerSpec:
    spec = _mapping(value, path)
    _check_keys(spec, ("lambda", "z", "dithers"), path)
    defaults = QuantizerSpec()
    z = _list(spec.get("z", list(defaults.z)), _join(path, "z"))
    return QuantizerSpec(
        lam=_number(spec.get("lambda", defaults.lam), _join(path, "lambda"), positive=True),
        z=tuple(_number(v, f"{_join(path, 'z')}[{k}]") for k, v in enumerate(z)),
        dithers=_number(spec.get("dithers", defaults.dithers), _join(path, "dithers"), kind=int, positive=True),
    )


def _parse_audit(value: Any, path: str) -> AuditSpec:
    spec = _mapping(value, path)
    _check_keys(spec, ("pairs",), path)
    return AuditSpec(pairs=_number(spec.get("pairs", AuditSpec.pairs), _join(path, "pairs"), kind=int, positive=True))


TOP_LEVEL_KEYS = (
    "experiment", "descriptor", "ensemble", "noise", "beta", "corruption", "solver", "rho", "theta",
    "trials", "seed", "workers", "output", "dump_signs", "width", "quantizer", "audit",
)
NEEDS_DESCRIPTOR = (ExperimentKind.TESSELLATION_AUDIT, ExperimentKind.RECOVERY_SWEEP)


# ============================================================
# Función: parse_config()
# ------------------------------------------------------------
# Convierte el mapa leído del YAML (o del cuerpo JSON de la API) en
# un ExperimentConfig validado. El mapa original se guarda en `raw`
# para escribirlo tal cual en el manifiesto.
# ============================================================
def parse_config(data: Any) -> ExperimentConfig:
    spec = _mapping(data, "")
    _check_keys(spec, TOP_LEVEL_KEYS, "")
    if "experiment" not in spec:
        raise ConfigError("falta la clave obligatoria", "experiment")
    kind = _enum(ExperimentKind, spec["experiment"], "experiment")

    descriptor = None
    if "descriptor" in spec:
        descriptor = _parse_descriptor(spec["descriptor"], "descriptor")
    elif kind in NEEDS_DESCRIPTOR:
        raise ConfigError("falta la clave obligatoria", "descriptor")

    ensemble = _mapping(spec.get("ensemble", {}), "ensemble")
    _check_keys(ensemble, ("laws", "m", "lambda"), "ensemble")
    laws = tuple(_parse_law(v, f"ensemble.laws[{k}]")
                 for k, v in enumerate(_list(ensemble.get("laws", ["gaussian"]), "ensemble.laws")))
    m_values = tuple(_number(v, f"ensemble.m[{k}]", kind=int, positive=True)
                     for k, v in enumerate(_list(ensemble.get("m", [100]), "ensemble.m")))
    lam = _number(ensemble["lambda"], "ensemble.lambda", positive=True) if ensemble.get("lambda") is not None else None

    noise = tuple(_parse_noise(v, f"noise[{k}]") for k, v in enumerate(_list(spec.get("noise", ["none"]), "noise")))
    beta = tuple(_number(v, f"beta[{k}]", minimum=0.0) for k, v in enumerate(_list(spec.get("beta", [0.0]), "beta")))
    for k, b in enumerate(beta):
        if b > 1:
            raise ConfigError(f"beta debe estar en [0, 1] ({b})", f"beta[{k}]")
    theta = tuple(_number(v, f"theta[{k}]", minimum=0.0)
                  for k, v in enumerate(_list(spec.get("theta", list(DEFAULT_THETAS)), "theta")))

    output = spec.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("se esperaba una ruta", "output")
    dump_signs = spec.get("dump_signs", False)
    if not isinstance(dump_signs, bool):
        raise ConfigError("se esperaba true/false", "dump_signs")

    config = ExperimentConfig(
        experiment=kind,
        descriptor=descriptor,
        laws=laws,
        m_values=m_values,
        lam=lam,
        noise=noise,
        beta=beta,
        corruption=_enum(CorruptionStrategy, spec.get("corruption", CorruptionStrategy.ADVERSARIAL_LARGEST_MARGIN.value),
                         "corruption"),
        solver=_parse_solver(spec.get("solver", {}), "solver"),
        rho=_number(spec.get("rho", 0.2), "rho", positive=True),
        theta=theta,
        trials=_number(spec.get("trials", 1), "trials", kind=int, minimum=1),
        seed=_number(spec.get("seed", 0), "seed", kind=int, minimum=0),
        workers=_number(spec.get("workers", 1), "workers", kind=int, minimum=1),
        output=output,
        dump_signs=dump_signs,
        width=_parse_width(spec.get("width", {}), "width"),
        quantizer=_parse_quantizer(spec.get("quantizer", {}), "quantizer"),
        audit=_parse_audit(spec.get("audit", {}), "audit"),
        raw=copy.deepcopy(dict(spec)),
    )
    _owned("seed", lambda: config.seed_plan)
    return config


def load_config(path: str) -> ExperimentConfig:
    """Lee un YAML de experimento (yaml.safe_load) y lo valida."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML inválido: {exc}") from exc
    logger.info("Configuración leída de %s", path)
    return parse_config(data if data is not None else {})
