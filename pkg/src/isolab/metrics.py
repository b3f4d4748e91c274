"""Named metrics and construction from config dictionaries."""
from .errors import InputError
from .geometry import ChartMetric

# A Gaussian bump of the conformal factor: scalar curvature has a strict
# interior maximum at the origin (Sc(0) ~ 1.609), elongated along x.
PRESETS = {
    "bump": {"kind": "conformal", "phi": "0.2*exp(-x^2-2*y^2)", "dimension": 2, "chart_radius": 1.0},
    "bump3": {"kind": "conformal", "phi": "0.2*exp(-x^2-2*y^2-z^2)", "dimension": 3, "chart_radius": 1.0},
    "round": {"kind": "conformal", "phi": "-log(1+(x^2+y^2)/4)", "dimension": 2, "chart_radius": 4.0},
}

METRIC_KEYS = {"kind", "dimension", "curvature", "phi", "chart_radius", "fd_step", "name", "injectivity_bound"}


def metric_from_spec(spec):
    """Build a ChartMetric from ``{"kind": ..., ...}``.

    Kinds: euclidean, sphere, hyperbolic, model (with curvature), conformal
    (with phi), preset (with name).
    """
    if isinstance(spec, str):
        spec = {"kind": "preset", "name": spec} if spec in PRESETS else {"kind": spec}
    spec = dict(spec)
    unknown = set(spec) - METRIC_KEYS
    if unknown:
        raise InputError(f"unknown metric keys: {sorted(unknown)}")
    kind = spec.pop("kind", None)
    if kind == "preset":
        name = spec.pop("name", None)
        if name not in PRESETS:
            raise InputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return metric_from_spec({**PRESETS[name], **spec, "name": name})
    n = int(spec.pop("dimension", 2))
    extra = {k: spec.pop(k) for k in ("injectivity_bound", "name") if k in spec}
    if kind == "euclidean":
        return ChartMetric.euclidean(n, **_radius(spec), **extra)
    if kind == "sphere":
        return ChartMetric.sphere(n, **_radius(spec), **extra)
    if kind == "hyperbolic":
        return ChartMetric.hyperbolic(n, **_radius(spec), **extra)
    if kind == "model":
        if "curvature" not in spec:
            raise InputError("model metric needs a curvature")
        return ChartMetric.model(n, float(spec.pop("curvature")), **_radius(spec), **extra)
    if kind == "conformal":
        if "phi" not in spec:
            raise InputError("conformal metric needs phi")
        return ChartMetric.conformal(spec.pop("phi"), n, chart_radius=float(spec.pop("chart_radius", 1.0)),
                                     fd_step=spec.pop("fd_step", None), **extra)
    raise InputError(f"unknown metric kind {kind!r}")


def _radius(spec):
    return {"chart_radius": float(spec["chart_radius"])} if "chart_radius" in spec else {}
