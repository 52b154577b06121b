"""Synthetic two-modality, two-domain data and the plain-text dataset formats.

Feature file: a header line ``n d`` then ``n`` rows of ``d`` decimals.
Label file: ``n`` lines of space-separated category indices (blank = unlabeled).
Relation file: a header line with the pair count then ``i j s`` lines.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .core_types import Domain, FeatureDataset, Modality, RelationSet

STREAM_DATAGEN = 2


@dataclass(frozen=True)
class SynthSpec:
    categories: int = 8
    dim_x: int = 64
    dim_y: int = 32
    latent_dim: int = 16
    n_aux_x: int = 2000
    n_aux_y: int = 2000
    n_query: int = 500
    n_database: int = 500
    separation: float = 3.0
    noise_sigma: float = 0.3
    # Target-domain shift: norm of the translation and largest rotation angle (radians).
    shift_translation: float = 0.0
    shift_rotation: float = 0.0
    multi_label_prob: float = 0.0
    n_relations: int = 8000
    seed: int = 0

    def __post_init__(self):
        for name in ("categories", "dim_x", "dim_y", "latent_dim", "n_aux_x", "n_aux_y",
                     "n_query", "n_database", "n_relations"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.latent_dim > min(self.dim_x, self.dim_y):
            raise ValueError("latent_dim cannot exceed either feature dimension")
        if self.noise_sigma < 0 or self.separation < 0:
            raise ValueError("noise_sigma and separation must be nonnegative")
        if self.shift_translation < 0 or self.shift_rotation < 0:
            raise ValueError("shift magnitudes must be nonnegative")
        if not 0 <= self.multi_label_prob <= 1:
            raise ValueError("multi_label_prob must lie in [0, 1]")

    def manifest_lines(self) -> list[str]:
        return [f"{k}={v}" for k, v in asdict(self).items()]

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def reference_spec(seed: int = 0, **overrides) -> SynthSpec:
    """The shifted benchmark configuration used by the ablation trend checks."""
    base = dict(categories=8, dim_x=64, dim_y=32, n_aux_x=2000, n_aux_y=2000,
                n_query=500, n_database=500, shift_translation=3.0, shift_rotation=1.0,
                seed=seed)
    base.update(overrides)
    return SynthSpec(**base)


@dataclass
class SynthData:
    aux_x: FeatureDataset
    aux_y: FeatureDataset
    query: FeatureDataset
    database: FeatureDataset
    relations: RelationSet


def _orthonormal(rng, rows: int, cols: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def _rotation(rng, dim: int, angle: float) -> np.ndarray:
    if angle == 0:
        return np.eye(dim)
    g = rng.standard_normal((dim, dim))
    k = g - g.T
    k /= np.linalg.norm(k, 2)
    return expm(angle * k)


def _draw_labels(rng, n: int, spec: SynthSpec) -> list[frozenset]:
    first = rng.integers(0, spec.categories, size=n)
    extra = rng.integers(0, spec.categories, size=n)
    multi = rng.random(n) < spec.multi_label_prob
    return [frozenset({int(a), int(b)}) if m else frozenset({int(a)})
            for a, b, m in zip(first, extra, multi)]


def generate(spec: SynthSpec) -> SynthData:
    """Draw auxiliary and target data for both modalities from one seed.

    Each category has a latent prototype; an item's latent code is the mean of
    its categories' prototypes. Modality X and Y see it through different
    orthonormal maps plus Gaussian noise. Target items get a further
    per-modality rotation and translation.
    """
    rng = np.random.default_rng([spec.seed, STREAM_DATAGEN])
    protos = rng.standard_normal((spec.categories, spec.latent_dim))
    protos *= spec.separation / np.linalg.norm(protos, axis=1, keepdims=True)
    maps = {Modality.X: _orthonormal(rng, spec.dim_x, spec.latent_dim),
            Modality.Y: _orthonormal(rng, spec.dim_y, spec.latent_dim)}
    shifts = {}
    for mod, dim in ((Modality.X, spec.dim_x), (Modality.Y, spec.dim_y)):
        direction = rng.standard_normal(dim)
        direction /= np.linalg.norm(direction)
        shifts[mod] = (_rotation(rng, dim, spec.shift_rotation), spec.shift_translation * direction)

    def draw(mod: Modality, domain: Domain, n: int) -> FeatureDataset:
        labels = _draw_labels(rng, n, spec)
        latent = np.array([protos[sorted(l)].mean(axis=0) for l in labels])
        a = maps[mod]
        feats = latent @ a.T + spec.noise_sigma * rng.standard_normal((n, a.shape[0]))
        if domain == Domain.TARGET:
            rot, trans = shifts[mod]
            feats = feats @ rot.T + trans
        return FeatureDataset(mod, domain, feats, labels)

    aux_x = draw(Modality.X, Domain.AUXILIARY, spec.n_aux_x)
    aux_y = draw(Modality.Y, Domain.AUXILIARY, spec.n_aux_y)
    query = draw(Modality.X, Domain.TARGET, spec.n_query)
    database = draw(Modality.Y, Domain.TARGET, spec.n_database)
    i = rng.integers(0, spec.n_aux_x, size=spec.n_relations)
    j = rng.integers(0, spec.n_aux_y, size=spec.n_relations)
    relations = RelationSet.from_labels(aux_x, aux_y, i, j)
    return SynthData(aux_x, aux_y, query, database, relations)


def label_path_for(path) -> Path:
    return Path(path).with_suffix(".labels")


def save_features(ds: FeatureDataset, path, label_path=None) -> None:
    rows = [f"{len(ds)} {ds.dim}"]
    rows.extend(" ".join(f"{v:.17g}" for v in r) for r in ds.features)
    Path(path).write_text("\n".join(rows) + "\n")
    labels = [" ".join(str(c) for c in sorted(l)) for l in ds.labels]
    Path(label_path or label_path_for(path)).write_text("".join(l + "\n" for l in labels))


def load_labels(path, n: int | None = None) -> tuple[frozenset, ...]:
    text = Path(path).read_text()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    labels = []
    for k, line in enumerate(lines, 1):
        try:
            cats = frozenset(int(t) for t in line.split())
        except ValueError:
            raise ValueError(f"{path}: line {k} has a non-integer label") from None
        if any(c < 0 for c in cats):
            raise ValueError(f"{path}: line {k} has a negative label")
        labels.append(cats)
    if n is not None and len(labels) != n:
        raise ValueError(f"{path}: expected {n} label lines, found {len(labels)}")
    return tuple(labels)


def load_features(path, modality=Modality.X, domain=Domain.AUXILIARY,
                  label_path=None) -> FeatureDataset:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty feature file")
    try:
        n, d = (int(v) for v in lines[0].split())
    except ValueError:
        raise ValueError(f"{path}: line 1 must be 'n d', got {lines[0]!r}") from None
    if n < 0 or d < 1:
        raise ValueError(f"{path}: invalid header {lines[0]!r}")
    body = lines[1:]
    if len(body) < n or any(l.strip() for l in body[n:]):
        raise ValueError(f"{path}: header declares {n} rows, found {len(body)}")
    feats = np.empty((n, d))
    for r in range(n):
        toks = body[r].split()
        if len(toks) != d:
            raise ValueError(f"{path}: row {r + 1} (line {r + 2}) has {len(toks)} values, "
                             f"expected {d}")
        try:
            feats[r] = [float(t) for t in toks]
        except ValueError:
            raise ValueError(f"{path}: line {r + 2} has a non-numeric token") from None
    lp = label_path or label_path_for(path)
    labels = load_labels(lp, n) if Path(lp).exists() else ()
    return FeatureDataset(Modality(modality), Domain(domain), feats, labels)


def save_relations(rel: RelationSet, path) -> None:
    lines = [str(len(rel))]
    lines.extend(f"{a} {b} {s}" for a, b, s in zip(rel.i, rel.j, rel.s))
    Path(path).write_text("\n".join(lines) + "\n")


def load_relations(path) -> RelationSet:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty relation file")
    try:
        n = int(lines[0])
    except ValueError:
        raise ValueError(f"{path}: line 1 must be the pair count") from None
    pairs = []
    for k, line in enumerate(lines[1:n + 1], 2):
        toks = line.split()
        if len(toks) != 3:
            raise ValueError(f"{path}: line {k} must be 'i j s'")
        try:
            pairs.append(tuple(int(t) for t in toks))
        except ValueError:
            raise ValueError(f"{path}: line {k} has a non-integer field") from None
    if len(pairs) != n:
        raise ValueError(f"{path}: header declares {n} pairs, found {len(pairs)}")
    return RelationSet.from_pairs(pairs) if pairs else RelationSet([], [], [])


DATASET_FILES = {
    "aux_x": (Modality.X, Domain.AUXILIARY),
    "aux_y": (Modality.Y, Domain.AUXILIARY),
    "query": (Modality.X, Domain.TARGET),
    "database": (Modality.Y, Domain.TARGET),
}


def save_synth(data: SynthData, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in DATASET_FILES:
        save_features(getattr(data, name), out / f"{name}.feat")
    save_relations(data.relations, out / "relations.txt")


def load_synth(data_dir) -> SynthData:
    d = Path(data_dir)
    sets = {name: load_features(d / f"{name}.feat", mod, dom)
            for name, (mod, dom) in DATASET_FILES.items()}
    return SynthData(relations=load_relations(d / "relations.txt"), **sets)
