"""Random feature sampling and feature-noise injection.

Features are inner products of eigenfeatures with i.i.d. standard normal
weights: z(x) = W^T phi(x) / sqrt(s) for a p-by-s weight matrix W.  Averaged
over W, z(x)^T z(y) recovers the kernel.  Feature noise perturbs every sampled
feature entry independently with variance sigma0^2 / s, where sigma0^2 decays
with the feature count as s**(-alpha).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import Spectrum, eigenfeature_matrix

NOISE_FAMILIES = ("gaussian", "rademacher", "uniform")
_ROOT3 = math.sqrt(3.0)


@dataclass(eq=False)
class WeightMatrix:
    entries: np.ndarray  # (p, s), i.i.d. N(0, 1)
    lineage: str = ""

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @property
    def s(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Per-entry feature perturbation law.

    sigma0_sq is the total noise energy per feature vector; each of the s
    entries gets variance sigma0_sq / s from a unit-variance base draw of the
    chosen family.
    """

    family: str
    alpha: float
    s: int
    sigma0_sq: float

    @property
    def entry_variance(self) -> float:
        return self.sigma0_sq / self.s

    @property
    def entry_scale(self) -> float:
        return math.sqrt(self.sigma0_sq / self.s)


def sample_weights(p: int, s: int, rng: np.random.Generator, lineage: str = "") -> WeightMatrix:
    if p < 1 or s < 1:
        raise ValueError("weight matrix dimensions must be positive")
    return WeightMatrix(entries=rng.standard_normal((p, s)), lineage=lineage)


def feature_matrix(weights: WeightMatrix, covariates, spectrum: Spectrum, mode: str) -> np.ndarray:
    """Sampled feature rows Z with Z[i] = W^T phi(x_i) / sqrt(s), shape (n, s)."""
    Phi = eigenfeature_matrix(spectrum, mode, covariates)
    if Phi.shape[1] != weights.p:
        raise ValueError(f"weight rows ({weights.p}) must match eigenfeature dimension ({Phi.shape[1]})")
    return Phi @ weights.entries / math.sqrt(weights.s)


def make_noise_spec(family: str, alpha: float, s: int) -> NoiseSpec:
    """Noise spec with sigma0_sq = s**(-alpha).

    alpha = inf is accepted as the exactly-noiseless limit.
    """
    if family not in NOISE_FAMILIES:
        raise ValueError(f"unknown noise family {family!r}; expected one of {NOISE_FAMILIES}")
    if s < 1:
        raise ValueError("s must be >= 1")
    if not alpha >= 0:
        raise ValueError("alpha must be >= 0: the noise energy s**(-alpha) may not grow with s")
    sigma0_sq = 0.0 if math.isinf(alpha) else float(s) ** (-alpha)
    return NoiseSpec(family=family, alpha=float(alpha), s=int(s), sigma0_sq=sigma0_sq)


def noiseless_spec(s: int, family: str = "gaussian") -> NoiseSpec:
    """Spec with sigma0_sq pinned to exactly zero."""
    return NoiseSpec(family=family, alpha=math.inf, s=int(s), sigma0_sq=0.0)


def _unit_variance_draw(family: str, shape, rng: np.random.Generator) -> np.ndarray:
    if family == "gaussian":
        return rng.standard_normal(shape)
    if family == "rademacher":
        return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0
    if family == "uniform":
        return rng.uniform(-_ROOT3, _ROOT3, size=shape)
    raise ValueError(f"unknown noise family {family!r}")


def noise_matrix(spec: NoiseSpec, shape, rng: np.random.Generator) -> np.ndarray:
    """Draw a noise matrix with i.i.d. entries of variance sigma0_sq / s."""
    if shape[-1] != spec.s:
        raise ValueError(f"noise width must equal the feature count s={spec.s}")
    if spec.sigma0_sq == 0.0:
        return np.zeros(shape)
    return spec.entry_scale * _unit_variance_draw(spec.family, shape, rng)


def inject_noise(Z: np.ndarray, spec: NoiseSpec, rng: np.random.Generator):
    """Return (Xi, Z + Xi) for a sampled feature matrix Z."""
    Xi = noise_matrix(spec, Z.shape, rng)
    return Xi, Z + Xi


def noisy_test_feature(weights: WeightMatrix, phi_x: np.ndarray, spec: NoiseSpec | None,
                       rng: np.random.Generator | None, *, clean: bool = False) -> np.ndarray:
    """Feature vector at one test point, with a fresh noise draw per call.

    Pass clean=True (or spec=None) to evaluate on the noiseless features.
    """
    z = weights.entries.T @ phi_x / math.sqrt(weights.s)
    if clean or spec is None or spec.sigma0_sq == 0.0:
        return z
    if rng is None:
        raise ValueError("fresh test noise needs a generator")
    return z + noise_matrix(spec, (1, spec.s), rng)[0]


@dataclass(eq=False)
class FeatureEnsemble:
    """Everything sampled for one training design: spectrum, covariates, W, Z, noise."""

    spectrum: Spectrum
    mode: str
    covariates: np.ndarray
    weights: WeightMatrix
    Z: np.ndarray
    noise_spec: NoiseSpec | None = None
    Xi: np.ndarray | None = None
    Z_noisy: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def s(self) -> int:
        return self.Z.shape[1]

    @property
    def p(self) -> int:
        return self.spectrum.p

    @property
    def design(self) -> np.ndarray:
        """The matrix the estimator fits on: noisy when noise was injected."""
        return self.Z if self.Z_noisy is None else self.Z_noisy

    def recompute_features(self) -> np.ndarray:
        """Rebuild Z from stored covariates and weights (bit-exact)."""
        return feature_matrix(self.weights, self.covariates, self.spectrum, self.mode)


def build_ensemble(spectrum: Spectrum, mode: str, covariates, weights: WeightMatrix,
                   noise_spec: NoiseSpec | None = None,
                   noise_rng: np.random.Generator | None = None) -> FeatureEnsemble:
    Z = feature_matrix(weights, covariates, spectrum, mode)
    Xi = Z_noisy = None
    if noise_spec is not None:
        if noise_rng is None and noise_spec.sigma0_sq != 0.0:
            raise ValueError("noise injection needs a generator")
        Xi, Z_noisy = inject_noise(Z, noise_spec, noise_rng or np.random.default_rng(0))
    return FeatureEnsemble(spectrum=spectrum, mode=mode, covariates=np.asarray(covariates),
                           weights=weights, Z=Z, noise_spec=noise_spec, Xi=Xi, Z_noisy=Z_noisy)


def dump_ensemble(ensemble: FeatureEnsemble, path) -> None:
    """Write (W, Z, Xi) as flat little-endian float64 plus a JSON sidecar.

    The sidecar records shapes and the generating recipe so the blob can be
    reinterpreted without guessing.
    """
    path = Path(path)
    W = ensemble.weights.entries
    Z = ensemble.Z
    Xi = ensemble.Xi if ensemble.Xi is not None else np.zeros_like(Z)
    blob = b"".join(struct.pack(f"<{a.size}d", *a.ravel()) for a in (W, Z, Xi))
    path.with_suffix(".bin").write_bytes(blob)
    sidecar = {
        "n": ensemble.n,
        "s": ensemble.s,
        "p": ensemble.p,
        "seed": ensemble.weights.lineage,
        "spec": json.loads(ensemble.spectrum.to_json()),
        "noise": None if ensemble.noise_spec is None else {
            "family": ensemble.noise_spec.family,
            "alpha": ensemble.noise_spec.alpha,
            "sigma0_sq": ensemble.noise_spec.sigma0_sq,
        },
        "order": ["W", "Z", "Xi"],
        "dtype": "<f8",
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))


def load_ensemble_arrays(path):
    """Read back (W, Z, Xi) from a dump written by dump_ensemble."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    n, s, p = meta["n"], meta["s"], meta["p"]
    flat = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
    sizes = [p * s, n * s, n * s]
    if flat.size != sum(sizes):
        raise ValueError("binary payload does not match the sidecar shapes")
    W = flat[: sizes[0]].reshape(p, s).copy()
    Z = flat[sizes[0]: sizes[0] + sizes[1]].reshape(n, s).copy()
    Xi = flat[sizes[0] + sizes[1]:].reshape(n, s).copy()
    return W, Z, Xi, meta
