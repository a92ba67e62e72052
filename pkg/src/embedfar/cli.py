"""Command-line driver for far-field embedding experiments.

Subcommands reproduce the standard experiment layouts at desk scale:
single-incidence error sweeps, full (theta, alpha) far-field grids,
oversampling/regularization studies on degenerate canonical angle sets,
and input/output error tables over mesh refinements.  All outputs are
plain CSV with a metadata comment block; identical configurations
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__
from .bem import (
    EmptyMesh,
    MAX_WAVENUMBER,
    SingularSystem,
    build_system as build_bem_system,
)
from .coefficients import (
    NoConvergence,
    SingularSubmatrix,
    ZeroColumnEncountered,
    build_system as build_coefficient_system,
    canonical_angles,
    coefficients_for,
    default_oversampling,
)
from .embedding import (
    DEFAULT_CLUSTER_THRESHOLD,
    DEFAULT_CONTOUR_ORDER,
    DEFAULT_NEAR_THRESHOLD,
    EmbeddingBasis,
    PoleOnContour,
    StabilizedEvaluator,
    lambda_weight,
    pole_set,
)
from .geometry import (
    PRESET_NAMES,
    load_geometry_file,
    preset_shape,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_NUMERICAL_FAILURES = (
    SingularSystem,
    EmptyMesh,
    NoConvergence,
    ZeroColumnEncountered,
    SingularSubmatrix,
    PoleOnContour,
)

_ERROR_GRID_SIZE = 1000  # equispaced points behind every reported sup norm
_SPOT_CHECK_COLUMNS = 5
_REFERENCE_REFINEMENT = 4.0  # elements-per-wavelength factor, "refine twice"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    shape: str = "square"
    geometry_file: str | None = None
    k: float = 5.0
    alpha: float | None = None
    strategy: str = "two"
    delta: float = 1e-8
    mtilde: int | None = None
    big_h: float = DEFAULT_NEAR_THRESHOLD
    small_h: float = DEFAULT_CLUSTER_THRESHOLD
    contour_order: int = DEFAULT_CONTOUR_ORDER
    n_theta: int = 1000
    n_alpha: int = 200
    out: str | None = None
    seed: int = 0
    threads: int = 1
    elements_per_wavelength: float = 8.0
    grading: float = 0.15
    grading_layers: int = 8

    def validate(self):
        if self.geometry_file is None and self.shape not in PRESET_NAMES:
            raise ConfigError(
                f"unknown shape {self.shape!r}; presets: {sorted(PRESET_NAMES)}"
            )
        if not (0.0 < self.k <= MAX_WAVENUMBER):
            raise ConfigError(f"k must lie in (0, {MAX_WAVENUMBER}]")
        if self.strategy not in ("one", "two"):
            raise ConfigError("strategy must be 'one' or 'two' (1 or 2)")
        if self.delta < 0:
            raise ConfigError("delta must be nonnegative")
        if self.mtilde is not None and self.mtilde < 1:
            raise ConfigError("mtilde must be a positive integer")
        if not (0.0 < self.small_h < self.big_h):
            raise ConfigError("thresholds must satisfy 0 < small_h < big_h")
        if self.contour_order < 2:
            raise ConfigError("contour order must be at least 2")
        if self.n_theta < 1 or self.n_alpha < 1:
            raise ConfigError("grid sizes must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.threads < 1:
            raise ConfigError("threads must be a positive integer")
        if self.elements_per_wavelength < 2.0:
            raise ConfigError("elements_per_wavelength must be at least 2")
        if not (0.0 < self.grading < 1.0):
            raise ConfigError("grading must lie in (0, 1)")
        if self.grading_layers < 0:
            raise ConfigError("grading_layers must be nonnegative")
        return self


# config-file keys, including dotted aliases for solver parameters
_CONFIG_KEYS = {f.name: f.name for f in fields(ExperimentConfig)}
_CONFIG_KEYS.update(
    {
        "bem.elements_per_wavelength": "elements_per_wavelength",
        "bem.grading": "grading",
        "bem.layers": "grading_layers",
        "embedding.big_h": "big_h",
        "embedding.small_h": "small_h",
        "embedding.contour_order": "contour_order",
    }
)

_FIELD_TYPES = {
    "shape": str,
    "geometry_file": str,
    "k": float,
    "alpha": float,
    "strategy": str,
    "delta": float,
    "mtilde": int,
    "big_h": float,
    "small_h": float,
    "contour_order": int,
    "n_theta": int,
    "n_alpha": int,
    "out": str,
    "seed": int,
    "threads": int,
    "elements_per_wavelength": float,
    "grading": float,
    "grading_layers": int,
}


def parse_config_file(path):
    """Flat `key = value` format; '#' starts a comment."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, text = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        name = _CONFIG_KEYS[key]
        try:
            values[name] = _coerce(name, text)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return values


def _coerce(name, text):
    kind = _FIELD_TYPES[name]
    if name == "strategy":
        return _normalize_strategy(text)
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def _normalize_strategy(text):
    mapping = {"1": "one", "2": "two", "one": "one", "two": "two"}
    try:
        return mapping[str(text).strip().lower()]
    except KeyError:
        raise ValueError(f"strategy must be 1 or 2, got {text!r}") from None


def load_config(args, command_defaults=None):
    """Merge defaults, config file, and command-line overrides.

    Precedence, lowest first: dataclass defaults, per-command defaults,
    config file, explicit flags.
    """
    values = dict(command_defaults or {})
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for name in _FIELD_TYPES:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    config = ExperimentConfig(**values)
    return config.validate()


# pipeline ---------------------------------------------------------------


@dataclass
class Pipeline:
    """Everything needed to evaluate the embedded far-field map."""

    config: ExperimentConfig
    shape: object
    system: object
    angles: np.ndarray
    far_fields: list
    matrix: object
    basis: EmbeddingBasis
    evaluator: StabilizedEvaluator


def load_shape(config):
    if config.geometry_file is not None:
        try:
            return load_geometry_file(config.geometry_file)
        except (OSError, ValueError) as exc:
            raise ConfigError(
                f"cannot load geometry file {config.geometry_file}: {exc}"
            ) from exc
    return preset_shape(config.shape)


def build_pipeline(config, shape=None, elements_per_wavelength=None,
                   canonical=None):
    shape = load_shape(config) if shape is None else shape
    epw = (
        config.elements_per_wavelength
        if elements_per_wavelength is None
        else elements_per_wavelength
    )
    system = build_bem_system(
        shape,
        config.k,
        elements_per_wavelength=epw,
        grading_ratio=config.grading,
        corner_layers=config.grading_layers,
    )
    if canonical is None:
        mtilde = config.mtilde or default_oversampling(shape.m)
        canonical = canonical_angles(mtilde)
    far_fields = system.solve_far_fields(canonical)
    matrix = build_coefficient_system(canonical, far_fields, shape.p, shape.m)
    basis = EmbeddingBasis(p=shape.p, angles=canonical, far_fields=far_fields)

    def supplier(alpha):
        return coefficients_for(
            matrix, alpha, strategy=config.strategy, delta=config.delta
        )

    evaluator = StabilizedEvaluator(
        basis=basis,
        coefficient_supplier=supplier,
        near_threshold=config.big_h,
        cluster_threshold=config.small_h,
        contour_order=config.contour_order,
    )
    return Pipeline(
        config=config,
        shape=shape,
        system=system,
        angles=canonical,
        far_fields=far_fields,
        matrix=matrix,
        basis=basis,
        evaluator=evaluator,
    )


def reference_system(pipeline, shape=None):
    """Same solver with the mesh refined twice."""
    config = pipeline.config
    shape = pipeline.shape if shape is None else shape
    return build_bem_system(
        shape,
        config.k,
        elements_per_wavelength=(
            config.elements_per_wavelength * _REFERENCE_REFINEMENT
        ),
        grading_ratio=config.grading,
        corner_layers=config.grading_layers,
    )


def input_error(pipeline, ref_system, n=_ERROR_GRID_SIZE):
    """Largest relative sup-norm defect of the canonical solves."""
    thetas = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    ref_fields = ref_system.solve_far_fields(pipeline.angles)
    scale = 0.0
    worst = 0.0
    defects = []
    for coarse, fine in zip(pipeline.far_fields, ref_fields):
        ref_values = fine.value(thetas)
        scale = max(scale, float(np.max(np.abs(ref_values))))
        defects.append(float(np.max(np.abs(coarse.value(thetas) - ref_values))))
    worst = max(defects)
    return worst / scale


def output_error(pipeline, ref_system, alphas, n=_ERROR_GRID_SIZE):
    """Largest per-incidence relative sup-norm error of the embedded
    far field, each incidence normalized by its own reference peak."""
    thetas = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    worst = 0.0
    for alpha in np.atleast_1d(alphas):
        ref_values = ref_system.solve_far_fields([alpha])[0].value(thetas)
        values, _ = pipeline.evaluator.evaluate_sweep(thetas, float(alpha))
        scale = float(np.max(np.abs(ref_values)))
        worst = max(worst, float(np.max(np.abs(values - ref_values))) / scale)
    return worst


def torus_output_error(pipeline, ref_system, n_theta, n_alpha):
    """Relative sup-norm error of the embedded far field over the full
    observation-incidence torus, both directions equispaced, normalized
    by the global reference peak."""
    thetas = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    alphas = np.linspace(0.0, 2.0 * np.pi, n_alpha, endpoint=False)
    ref_fields = ref_system.solve_far_fields(alphas)
    worst = 0.0
    scale = 0.0
    for alpha, field in zip(alphas, ref_fields):
        ref_values = field.value(thetas)
        values, _ = pipeline.evaluator.evaluate_sweep(thetas, float(alpha))
        scale = max(scale, float(np.max(np.abs(ref_values))))
        worst = max(worst, float(np.max(np.abs(values - ref_values))))
    return worst / scale


def naive_error_curve(pipeline, alpha, thetas, ref_values, scale):
    """Relative naive-formula error, +inf exactly on the poles."""
    basis = pipeline.basis
    b = pipeline.evaluator.coefficients(alpha)
    lam = lambda_weight(thetas, alpha, basis.p)
    grid = basis.values_matrix(thetas)
    numerator = np.zeros(len(thetas), dtype=np.complex128)
    for m, alpha_m in enumerate(basis.angles):
        if b[m] != 0.0:
            numerator += b[m] * lambda_weight(thetas, alpha_m, basis.p) * grid[m]
    err = np.full(len(thetas), np.inf)
    ok = np.abs(lam) > 1e-12
    err[ok] = np.abs(numerator[ok] / lam[ok] - ref_values[ok]) / scale
    return err


@dataclass
class ErrorReport:
    e_in: float
    e_out: float
    condition: float
    coefficient_norm: float
    branch_counts: dict
    wall_time: float

    @property
    def ratio(self):
        return self.e_out / self.e_in if self.e_in > 0 else math.inf

    def lines(self):
        counts = ", ".join(
            f"{name}={count}"
            for name, count in sorted(self.branch_counts.items())
        )
        return [
            f"input error   {self.e_in:.3e}",
            f"output error  {self.e_out:.3e}  (ratio {self.ratio:.3e})",
            f"cond(A)       {self.condition:.3e}",
            f"|b|_2         {self.coefficient_norm:.3e}",
            f"branches      {counts}",
            f"wall time     {self.wall_time:.1f} s",
        ]


# CSV output -------------------------------------------------------------


def _fmt(value):
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    number = float(value)
    if math.isnan(number):
        return "nan"
    if math.isinf(number):
        return "inf" if number > 0 else "-inf"
    return repr(number)


def write_csv(path, command, config, header, rows, extra_metadata=None):
    lines = [
        f"# generator = embedfar {__version__}",
        f"# command = {command}",
        "# timestamp = omitted for reproducibility",
    ]
    for cfg_field in fields(config):
        lines.append(f"# config.{cfg_field.name} = {getattr(config, cfg_field.name)}")
    for key, value in (extra_metadata or {}).items():
        lines.append(f"# {key} = {value}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(cell) for cell in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _print_report(report, out_paths):
    for line in report.lines():
        print(line)
    for path in out_paths:
        print(f"wrote {path}")


# subcommands ------------------------------------------------------------


def cmd_sweep(config):
    start = time.perf_counter()
    alpha = config.alpha if config.alpha is not None else 5.0 * math.pi / 4.0
    pipeline = build_pipeline(config)
    ref = reference_system(pipeline)

    thetas = np.linspace(0.0, 2.0 * np.pi, config.n_theta, endpoint=False)
    ref_values = ref.solve_far_fields([alpha])[0].value(thetas)
    scale = float(np.max(np.abs(ref_values)))
    values, labels = pipeline.evaluator.evaluate_sweep(thetas, alpha)
    stabilized = np.abs(values - ref_values) / scale
    naive = naive_error_curve(pipeline, alpha, thetas, ref_values, scale)

    rows = [
        (thetas[i], naive[i], stabilized[i], labels[i])
        for i in range(len(thetas))
    ]
    out = config.out or "sweep.csv"
    write_csv(
        out,
        "sweep",
        config,
        ["theta", "naive_rel_error", "stabilized_rel_error", "branch"],
        rows,
        extra_metadata={"alpha": alpha, "boundary_elements": len(pipeline.system.mesh.lengths)},
    )
    report = ErrorReport(
        e_in=input_error(pipeline, ref),
        e_out=float(np.max(stabilized)),
        condition=pipeline.matrix.condition_number,
        coefficient_norm=coefficients_for(
            pipeline.matrix, alpha, config.strategy, config.delta
        ).coefficient_norm,
        branch_counts=dict(pipeline.evaluator.branch_counts),
        wall_time=time.perf_counter() - start,
    )
    _print_report(report, [out])
    return EXIT_OK


def cmd_grid(config):
    start = time.perf_counter()
    pipeline = build_pipeline(config)
    thetas = np.linspace(0.0, 2.0 * np.pi, config.n_theta, endpoint=False)
    alphas = np.linspace(0.0, 2.0 * np.pi, config.n_alpha, endpoint=False)

    grid = np.empty((config.n_theta, config.n_alpha), dtype=np.complex128)
    for j, alpha in enumerate(alphas):
        values, _ = pipeline.evaluator.evaluate_sweep(thetas, float(alpha))
        grid[:, j] = values
    # canonical columns come straight from the stored canonical solves
    for m, alpha_m in enumerate(pipeline.angles):
        hits = np.nonzero(np.abs(alphas - alpha_m) <= 1e-12)[0]
        for j in hits:
            grid[:, j] = pipeline.far_fields[m].value(thetas)

    with np.errstate(divide="ignore"):
        log_grid = np.log10(np.abs(grid))
    header = ["theta"] + [f"alpha={_fmt(a)}" for a in alphas]
    rows = [
        [thetas[i]] + list(log_grid[i, :]) for i in range(config.n_theta)
    ]
    out = config.out or "grid.csv"
    write_csv(out, "grid", config, header, rows)

    # spot-check columns against direct refined solves
    rng = np.random.default_rng(config.seed)
    picks = np.sort(
        rng.choice(config.n_alpha, min(_SPOT_CHECK_COLUMNS, config.n_alpha), replace=False)
    )
    ref = reference_system(pipeline)
    err_header = ["theta"] + [f"relerr_alpha={_fmt(alphas[j])}" for j in picks]
    err_columns = []
    worst = 0.0
    for j in picks:
        ref_values = ref.solve_far_fields([float(alphas[j])])[0].value(thetas)
        scale = float(np.max(np.abs(ref_values)))
        err = np.abs(grid[:, j] - ref_values) / scale
        worst = max(worst, float(np.max(err)))
        err_columns.append(err)
    err_rows = [
        [thetas[i]] + [col[i] for col in err_columns]
        for i in range(config.n_theta)
    ]
    err_out = _with_suffix(out, ".errors.csv")
    write_csv(
        err_out,
        "grid",
        config,
        err_header,
        err_rows,
        extra_metadata={"spot_check_columns": " ".join(str(j) for j in picks)},
    )
    report = ErrorReport(
        e_in=input_error(pipeline, ref),
        e_out=worst,
        condition=pipeline.matrix.condition_number,
        coefficient_norm=float(
            np.median(
                [
                    coefficients_for(
                        pipeline.matrix, float(a), config.strategy, config.delta
                    ).coefficient_norm
                    for a in alphas[picks]
                ]
            )
        ),
        branch_counts=dict(pipeline.evaluator.branch_counts),
        wall_time=time.perf_counter() - start,
    )
    _print_report(report, [out, err_out])
    return EXIT_OK


def _with_suffix(path, suffix):
    return (path[:-4] if path.endswith(".csv") else path) + suffix


_SCREEN_BASE_ANGLES = [math.pi / 2.0, 3.0 * math.pi / 2.0]
_SCREEN_EXTRA_ANGLES = [
    math.pi,
    0.0,
    math.pi / 4.0,
    3.0 * math.pi / 4.0,
    5.0 * math.pi / 4.0,
    7.0 * math.pi / 4.0,
]
_TRIANGLE_OFFSETS = [math.pi / 24.0, math.pi / 48.0, math.pi / 96.0, 1e-3]


def _screen_angles(mtilde):
    if mtilde < 2:
        raise ConfigError("screen study needs mtilde >= 2")
    if mtilde - 2 > len(_SCREEN_EXTRA_ANGLES):
        raise ConfigError(
            f"screen study supports mtilde <= {2 + len(_SCREEN_EXTRA_ANGLES)}"
        )
    return np.asarray(_SCREEN_BASE_ANGLES + _SCREEN_EXTRA_ANGLES[: mtilde - 2])


def _trial_error(matrix, basis, config, strategy, delta, alphas, ref_values,
                 thetas):
    """Output error and coefficient norm for one solve strategy on a
    fixed canonical system."""

    def supplier(alpha):
        return coefficients_for(matrix, alpha, strategy=strategy, delta=delta)

    evaluator = StabilizedEvaluator(
        basis=basis,
        coefficient_supplier=supplier,
        near_threshold=config.big_h,
        cluster_threshold=config.small_h,
        contour_order=config.contour_order,
    )
    worst = 0.0
    for alpha in alphas:
        reference = ref_values[float(alpha)]
        values, _ = evaluator.evaluate_sweep(thetas, float(alpha))
        scale = float(np.max(np.abs(reference)))
        worst = max(worst, float(np.max(np.abs(values - reference))) / scale)
    bnorm = coefficients_for(
        matrix, float(alphas[0]), strategy=strategy, delta=delta
    ).coefficient_norm
    return worst, bnorm


def cmd_oversampling_study(config, mtilde_list, delta_list):
    start = time.perf_counter()
    rows = []
    header = [
        "part",
        "shape",
        "k",
        "mtilde",
        "strategy",
        "delta",
        "a",
        "e_in",
        "e_out",
        "coefficient_norm",
        "cond",
        "status",
    ]
    thetas = np.linspace(0.0, 2.0 * np.pi, _ERROR_GRID_SIZE, endpoint=False)
    rng = np.random.default_rng(config.seed)
    test_alphas = rng.uniform(0.0, 2.0 * np.pi, 3)
    trials = [("two", config.delta)] + [("one", d) for d in delta_list]

    def run_trials(part, shape_name, k, mtilde, offset, matrix, basis, e_in,
                   ref_values):
        cond = matrix.condition_number
        for strategy, delta in trials:
            try:
                e_out, bnorm = _trial_error(
                    matrix, basis, config, strategy, delta,
                    test_alphas, ref_values, thetas,
                )
                status = "ok"
            except (ZeroColumnEncountered, SingularSubmatrix):
                # rank-deficient canonical set: report total failure
                e_out, bnorm, status = 1.0, 0.0, "degenerate"
            rows.append(
                (
                    part,
                    shape_name,
                    k,
                    mtilde,
                    strategy,
                    delta if strategy == "one" else None,
                    offset,
                    e_in,
                    e_out,
                    bnorm,
                    cond,
                    status,
                )
            )

    # degenerate screen angle sets around {pi/2, 3pi/2}
    screen_config = replace(config, shape="screen", geometry_file=None, k=20.0)
    shape = preset_shape("screen")
    ref = None
    ref_values = {}
    for mtilde in mtilde_list:
        angles = _screen_angles(mtilde)
        base = build_pipeline(screen_config, shape=shape, canonical=angles)
        if ref is None:
            ref = reference_system(base, shape=shape)
            ref_values = {
                float(a): ref.solve_far_fields([a])[0].value(thetas)
                for a in test_alphas
            }
        e_in = input_error(base, ref)
        run_trials("screen", "screen", screen_config.k, mtilde, None,
                   base.matrix, base.basis, e_in, ref_values)

    # near-degenerate equilateral-triangle angle sets a + (m-1) pi/6
    triangle_config = replace(
        config, shape="equilateral", geometry_file=None, k=10.0
    )
    tri_shape = preset_shape("equilateral")
    tri_system = build_bem_system(
        tri_shape,
        triangle_config.k,
        elements_per_wavelength=triangle_config.elements_per_wavelength,
        grading_ratio=triangle_config.grading,
        corner_layers=triangle_config.grading_layers,
    )
    tri_ref = build_bem_system(
        tri_shape,
        triangle_config.k,
        elements_per_wavelength=(
            triangle_config.elements_per_wavelength * _REFERENCE_REFINEMENT
        ),
        grading_ratio=triangle_config.grading,
        corner_layers=triangle_config.grading_layers,
    )
    tri_ref_values = {
        float(a): tri_ref.solve_far_fields([a])[0].value(thetas)
        for a in test_alphas
    }
    for offset in _TRIANGLE_OFFSETS:
        angles = np.mod(
            offset + np.arange(tri_shape.m) * math.pi / 6.0, 2.0 * math.pi
        )
        far_fields = tri_system.solve_far_fields(angles)
        matrix = build_coefficient_system(
            angles, far_fields, tri_shape.p, tri_shape.m
        )
        basis = EmbeddingBasis(
            p=tri_shape.p, angles=angles, far_fields=far_fields
        )
        ref_fields = tri_ref.solve_far_fields(angles)
        scale = max(
            float(np.max(np.abs(field.value(thetas)))) for field in ref_fields
        )
        e_in = max(
            float(np.max(np.abs(coarse.value(thetas) - fine.value(thetas))))
            for coarse, fine in zip(far_fields, ref_fields)
        ) / scale
        run_trials("triangle", "equilateral", triangle_config.k, tri_shape.m,
                   offset, matrix, basis, e_in, tri_ref_values)

    out = config.out or "oversampling_study.csv"
    write_csv(out, "study-oversampling", config, header, rows)
    print(f"rows          {len(rows)}")
    print(f"wall time     {time.perf_counter() - start:.1f} s")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_table(config, k_list, shape_list, epw_list):
    start = time.perf_counter()
    rows = []
    for shape_name in shape_list:
        shape = preset_shape(shape_name)
        for k in k_list:
            base_config = replace(
                config, shape=shape_name, geometry_file=None, k=float(k)
            )
            ref_config = replace(
                base_config,
                elements_per_wavelength=max(epw_list) * _REFERENCE_REFINEMENT,
            )
            ref = build_bem_system(
                shape,
                float(k),
                elements_per_wavelength=ref_config.elements_per_wavelength,
                grading_ratio=config.grading,
                corner_layers=config.grading_layers,
            )
            for epw in epw_list:
                trial = replace(
                    base_config, elements_per_wavelength=float(epw)
                )
                pipeline = build_pipeline(trial, shape=shape)
                e_in = input_error(pipeline, ref)
                e_out = torus_output_error(
                    pipeline, ref, config.n_theta, config.n_alpha
                )
                rows.append(
                    (
                        float(k),
                        shape_name,
                        len(pipeline.system.mesh.lengths),
                        e_in,
                        e_out,
                        e_out / e_in if e_in > 0 else math.inf,
                        pipeline.matrix.condition_number,
                    )
                )
    out = config.out or "table.csv"
    write_csv(
        out,
        "table",
        config,
        ["k", "shape", "n_elements", "e_in", "e_out", "ratio", "cond"],
        rows,
    )
    print(f"rows          {len(rows)}")
    print(f"wall time     {time.perf_counter() - start:.1f} s")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_selftest(config):
    from .specialfun import gauss_legendre, hankel1

    checks = []

    value = hankel1(0, 1.0)
    checks.append(
        (
            "hankel1(0, 1)",
            abs(value - (0.7651976865579666 + 0.08825696421567696j)) < 1e-10,
        )
    )
    nodes, weights = gauss_legendre(12)
    checks.append(
        (
            "gauss-legendre degree 8",
            abs(np.sum(weights * nodes**8) - 2.0 / 9.0) < 1e-12,
        )
    )
    shape = preset_shape("square")
    checks.append(("square (p, M)", shape.p == 2 and shape.m == 8))

    tiny = replace(
        config,
        shape="screen",
        geometry_file=None,
        k=5.0,
        elements_per_wavelength=6.0,
        mtilde=3,
    )
    pipeline = build_pipeline(
        tiny, canonical=np.asarray([math.pi / 2.0, 3.0 * math.pi / 2.0, math.pi])
    )
    ref = reference_system(pipeline)
    e_out = output_error(pipeline, ref, [2.0], n=200)
    checks.append(("screen pipeline error < 0.1", e_out < 0.1))

    failed = 0
    for name, ok in checks:
        print(f"selftest: {name}: {'ok' if ok else 'FAIL'}")
        failed += 0 if ok else 1
    if failed:
        raise SingularSystem(f"{failed} selftest check(s) failed")
    return EXIT_OK


# argument parsing -------------------------------------------------------


def _add_common_flags(parser):
    parser.add_argument("--shape", default=None, help="preset shape name")
    parser.add_argument(
        "--geometry-file", dest="geometry_file", default=None,
        help="vertex-list geometry file (overrides --shape)",
    )
    parser.add_argument("--k", type=float, default=None, help="wavenumber")
    parser.add_argument(
        "--alpha", type=float, default=None, help="incidence angle (radians)"
    )
    parser.add_argument(
        "--strategy", default=None, choices=["1", "2", "one", "two"],
        help="coefficient strategy: 1 = truncated SVD, 2 = column subset",
    )
    parser.add_argument(
        "--delta", type=float, default=None, help="TSVD truncation threshold"
    )
    parser.add_argument(
        "--mtilde", type=int, default=None, help="canonical angle count"
    )
    parser.add_argument(
        "--big-h", dest="big_h", type=float, default=None,
        help="distance below which pole corrections activate",
    )
    parser.add_argument(
        "--small-h", dest="small_h", type=float, default=None,
        help="distance below which contour integration activates",
    )
    parser.add_argument("--n-theta", dest="n_theta", type=int, default=None)
    parser.add_argument("--n-alpha", dest="n_alpha", type=int, default=None)
    parser.add_argument("--out", default=None, help="output CSV path")
    parser.add_argument("--config", default=None, help="config file path")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument(
        "--threads", type=int, default=None,
        help="worker threads (recorded; evaluation is vectorized)",
    )


def _parse_float_list(text, flag):
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"{flag}: {exc}") from exc


def _parse_int_list(text, flag):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"{flag}: {exc}") from exc


def build_parser():
    parser = argparse.ArgumentParser(
        prog="embedfar",
        description=(
            "Far-field maps of rational polygons from a fixed set of "
            "canonical scattering solves."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("sweep", "error sweep over theta at one incidence angle"),
        ("grid", "full log|D(theta, alpha)| grid with spot checks"),
        ("study-oversampling", "degenerate-angle regularization study"),
        ("table", "input/output error table over mesh refinements"),
        ("selftest", "quick end-to-end sanity checks"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common_flags(p)
        if name == "study-oversampling":
            p.add_argument(
                "--mtilde-list", dest="mtilde_list", default="2,3,4",
                help="comma-separated canonical angle counts",
            )
            p.add_argument(
                "--delta-list", dest="delta_list", default="1e-2,1e-8,1e-12",
                help="comma-separated TSVD thresholds",
            )
        if name == "table":
            p.add_argument(
                "--k-list", dest="k_list", default="5,10",
                help="comma-separated wavenumbers",
            )
            p.add_argument(
                "--shape-list", dest="shape_list", default="square,equilateral",
                help="comma-separated preset names",
            )
            p.add_argument(
                "--epw-list", dest="epw_list", default="4,8,16",
                help="comma-separated elements-per-wavelength values",
            )
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.strategy is not None:
            try:
                args.strategy = _normalize_strategy(args.strategy)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        # full-torus grids default to 200x200; denser only on request
        if args.command in ("grid", "table"):
            defaults = {"n_theta": 200}
        else:
            defaults = None
        config = load_config(args, command_defaults=defaults)
        if args.command == "sweep":
            return cmd_sweep(config)
        if args.command == "grid":
            return cmd_grid(config)
        if args.command == "study-oversampling":
            return cmd_oversampling_study(
                config,
                _parse_int_list(args.mtilde_list, "--mtilde-list"),
                _parse_float_list(args.delta_list, "--delta-list"),
            )
        if args.command == "table":
            return cmd_table(
                config,
                _parse_float_list(args.k_list, "--k-list"),
                [s.strip() for s in args.shape_list.split(",") if s.strip()],
                _parse_float_list(args.epw_list, "--epw-list"),
            )
        if args.command == "selftest":
            return cmd_selftest(config)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_FAILURES as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
