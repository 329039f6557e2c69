"""Built-in models and the iron homeostasis flagship instance.

The package ships model files under ``steadyscan/models/``; they can be
loaded by bare name (``iron_v2``) or by filesystem path.  The iron model
comes in two versions: ``iron_v2_pre_revision`` carries an early
low-reliability estimate of the stabilized receptor-mRNA decay rate that
contradicts the rest of the data set (useful for exercising conflict
explanation), and ``iron_v2`` is the repaired version after that estimate
was dropped and the decay-rate interval re-examined.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .modelfile import Model, parse_model

__all__ = [
    "available_models",
    "builtin_iron_model",
    "load_model",
    "ModelManifest",
    "manifest",
    "revision_pair",
]


def _builtin_dir():
    return resources.files("steadyscan").joinpath("models")


def available_models() -> list[str]:
    """Names of the models shipped with the package."""
    out = [p.name[: -len(".model")] for p in _builtin_dir().iterdir() if p.name.endswith(".model")]
    return sorted(out)


def load_model(name_or_path: str | Path) -> Model:
    """Load a model by builtin name or by path to a model file."""
    p = Path(name_or_path)
    if p.suffix == ".model" or p.exists():
        return parse_model(p.read_text(), path_hint=str(p))
    ref = _builtin_dir().joinpath(f"{name_or_path}.model")
    try:
        text = ref.read_text()
    except FileNotFoundError:
        raise FileNotFoundError(
            f"no model file at {name_or_path!r} and no builtin of that name "
            f"(builtins: {', '.join(available_models())})"
        ) from None
    return parse_model(text, path_hint=f"builtin:{name_or_path}")


def builtin_iron_model() -> Model:
    """The iron homeostasis model, current data revision."""
    return load_model("iron_v2")


def revision_pair() -> tuple[Model, Model]:
    """(pre, post) data revisions of the iron model.

    The pre-revision version is inconsistent: a low-reliability floor on
    the stabilized receptor-mRNA decay rate collides with the stabilization
    inequality once the free-mRNA decay interval is narrowed.  The post
    version drops the floor and widens the decay interval.
    """
    return load_model("iron_v2_pre_revision"), load_model("iron_v2")


@dataclass(frozen=True, slots=True)
class ModelManifest:
    """Provenance summary: what is measured, what is a modeling guess."""

    name: str
    measured_unknowns: tuple[str, ...]
    reconstructed_unknowns: tuple[str, ...]
    reconstructed_equations: tuple[str, ...]  # states whose rhs is a guess
    low_reliability_constraints: tuple[str, ...]

    def render(self) -> str:
        lines = [f"model {self.name}"]
        lines.append(f"  measured intervals      {len(self.measured_unknowns)}")
        lines.append(f"  reconstructed intervals {len(self.reconstructed_unknowns)}")
        if self.reconstructed_equations:
            lines.append("  reconstructed equations " + ", ".join(self.reconstructed_equations))
        if self.low_reliability_constraints:
            lines.append("  low-reliability data    " + ", ".join(self.low_reliability_constraints))
        return "\n".join(lines)


def manifest(m: Model) -> ModelManifest:
    measured = tuple(u.name for u in m.unknowns if "measured" in u.tags)
    recon = tuple(u.name for u in m.unknowns if "reconstructed" in u.tags)
    recon_eqs = tuple(s for s, tags in m.ode_tags if "reconstructed" in tags)
    lowrel = tuple(
        sorted({c.cid for c in m.constraints if any(t.startswith("reliability:") and t != "reliability:high" for t in c.tags)})
    )
    return ModelManifest(m.name, measured, recon, recon_eqs, lowrel)
