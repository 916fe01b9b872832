"""Non-rigid displacement-field estimation from keypoint correspondences
that are partially mismatched, with a few trusted annotations.

The field over an Himg x Wimg grid is parameterized by the d smoothest
orthonormal 2-D DCT-II basis functions (frequency pairs ordered by total
frequency, ties broken by the row frequency).  Keypoint observations come
in two sets: a large one whose pairings may contain a sparse set of
mix-ups, and a small trusted one.  Coefficients are recovered per
displacement coordinate with the split-observation estimator, then the
reference image is backward-warped with bilinear interpolation.

Image arrays are 2-D float in [0, 1]; displacement fields are flat
row-major vectors (u1 = column/X displacement, u2 = row/Y displacement).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, IndexOutOfRange, InvalidSparsity, ZeroReference
from .linalg import min_norm_least_squares
from .model import sample_sparse_permutation
from .solver import EstimatorConfig, TwoStageSolver

MODES = ("C1", "C2", "C3")


def dct_frequency_pairs(d: int) -> list[tuple[int, int]]:
    """First d (u, v) frequency pairs, ordered by u+v then u."""
    pairs = []
    total = 0
    while len(pairs) < d:
        for u in range(total + 1):
            pairs.append((u, total - u))
            if len(pairs) == d:
                break
        total += 1
    return pairs


def _check_basis_size(himg: int, wimg: int, d: int):
    if himg < 1 or wimg < 1:
        raise ConfigInvalid(f"image dimensions must be positive, got {himg}x{wimg}")
    limit = min(64, himg * wimg // 4)
    if not 1 <= d <= limit:
        raise ConfigInvalid(f"basis size d={d} outside [1, {limit}] for a {himg}x{wimg} grid")


def dct_basis_rows(himg: int, wimg: int, d: int, pixel_indices) -> np.ndarray:
    """Rows of the orthonormal 2-D DCT-II basis at flat pixel indices.

    Entry for pixel (r, c) and frequency pair (u, v) is
    beta(u) beta(v) cos(pi (2r+1) u / (2 Himg)) cos(pi (2c+1) v / (2 Wimg))
    with beta the usual orthonormalization factor, so the full-grid basis
    has exactly orthonormal columns.
    """
    _check_basis_size(himg, wimg, d)
    idx = np.asarray(pixel_indices, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= himg * wimg):
        raise IndexOutOfRange(
            f"pixel indices must lie in [0, {himg * wimg}), got range "
            f"[{idx.min()}, {idx.max()}]"
        )
    rows = idx // wimg
    cols = idx % wimg
    out = np.empty((idx.size, d))
    for j, (u, v) in enumerate(dct_frequency_pairs(d)):
        beta_u = math.sqrt((1.0 if u == 0 else 2.0) / himg)
        beta_v = math.sqrt((1.0 if v == 0 else 2.0) / wimg)
        out[:, j] = (
            beta_u * beta_v
            * np.cos(np.pi * (2 * rows + 1) * u / (2.0 * himg))
            * np.cos(np.pi * (2 * cols + 1) * v / (2.0 * wimg))
        )
    return out


@dataclass(frozen=True)
class DctMotionModel:
    """Displacement field coefficients in the truncated DCT basis."""

    himg: int
    wimg: int
    d: int
    theta1: np.ndarray  # X / column displacement coefficients
    theta2: np.ndarray  # Y / row displacement coefficients

    def __post_init__(self):
        _check_basis_size(self.himg, self.wimg, self.d)
        for name in ("theta1", "theta2"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (self.d,):
                raise ConfigInvalid(f"{name} must have length d={self.d}")
            object.__setattr__(self, name, v)


def synth_motion(model: DctMotionModel) -> tuple[np.ndarray, np.ndarray]:
    """Displacement fields over the full grid, in pixels."""
    basis = dct_basis_rows(model.himg, model.wimg, model.d,
                           np.arange(model.himg * model.wimg))
    return basis @ model.theta1, basis @ model.theta2


@dataclass(frozen=True)
class KeypointSet:
    """Observed displacements at two disjoint pixel sets.

    s1 carries the large, possibly mismatched observations; s2 the small
    trusted ones.  noise_sigma is the observation noise level, used by the
    estimator's weight rule.
    """

    himg: int
    wimg: int
    s1_pixels: np.ndarray
    s1_du: np.ndarray
    s1_dv: np.ndarray
    s2_pixels: np.ndarray
    s2_du: np.ndarray
    s2_dv: np.ndarray
    noise_sigma: float

    def __post_init__(self):
        for name in ("s1_pixels", "s2_pixels"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        for name in ("s1_du", "s1_dv", "s2_du", "s2_dv"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if np.intersect1d(self.s1_pixels, self.s2_pixels).size:
            raise ConfigInvalid("trusted and untrusted pixel sets must be disjoint")

    @property
    def p(self) -> int:
        return int(self.s1_pixels.size)

    @property
    def m(self) -> int:
        return int(self.s2_pixels.size)


def simulate_keypoints(
    model: DctMotionModel, p: int, m: int, k: int, noise_sigma: float,
    rng: np.random.Generator, shared_permutation: bool = True,
) -> KeypointSet:
    """Sample keypoints of the model's field with k mismatched pairings.

    Draws p + m distinct pixels; the first p form the untrusted set whose
    displacement pairs are shuffled by a k-sparse permutation (one shared
    permutation for both coordinates by default, since a wrong pairing
    corrupts X and Y together; independent permutations are available),
    plus Gaussian noise.  The remaining m are trusted: true + noise.
    """
    if not (m < model.d <= p):
        raise ConfigInvalid(f"need m < d <= p, got m={m}, d={model.d}, p={p}")
    if noise_sigma < 0:
        raise ConfigInvalid("noise_sigma must be nonnegative")
    n_pix = model.himg * model.wimg
    if p + m > n_pix:
        raise ConfigInvalid(f"cannot draw {p + m} distinct pixels from {n_pix}")
    pixels = rng.choice(n_pix, size=p + m, replace=False)
    s1, s2 = pixels[:p], pixels[p:]
    basis1 = dct_basis_rows(model.himg, model.wimg, model.d, s1)
    basis2 = dct_basis_rows(model.himg, model.wimg, model.d, s2)
    du1, dv1 = basis1 @ model.theta1, basis1 @ model.theta2
    perm_u = sample_sparse_permutation(p, k, rng)
    perm_v = perm_u if shared_permutation else sample_sparse_permutation(p, k, rng)
    s1_du = perm_u.apply(du1) + rng.standard_normal(p) * noise_sigma
    s1_dv = perm_v.apply(dv1) + rng.standard_normal(p) * noise_sigma
    s2_du = basis2 @ model.theta1 + rng.standard_normal(m) * noise_sigma
    s2_dv = basis2 @ model.theta2 + rng.standard_normal(m) * noise_sigma
    return KeypointSet(
        himg=model.himg, wimg=model.wimg,
        s1_pixels=s1, s1_du=s1_du, s1_dv=s1_dv,
        s2_pixels=s2, s2_du=s2_du, s2_dv=s2_dv,
        noise_sigma=noise_sigma,
    )


def estimate_motion(
    keys: KeypointSet, d: int, cfg: EstimatorConfig | None = None, mode: str = "C3"
) -> DctMotionModel:
    """Fit field coefficients from keypoints.

    C1 uses the untrusted set alone, C3 both sets, each via the
    split-observation estimator per displacement coordinate.  C2 uses the
    trusted set alone; with fewer trusted points than coefficients that
    system is underdetermined and the minimum-norm fit is returned.
    """
    if mode not in MODES:
        raise ConfigInvalid(f"mode must be one of {MODES}, got {mode!r}")
    cfg = cfg or EstimatorConfig()
    basis_s2 = dct_basis_rows(keys.himg, keys.wimg, d, keys.s2_pixels)
    if mode == "C2":
        theta1 = min_norm_least_squares(basis_s2, keys.s2_du)
        theta2 = min_norm_least_squares(basis_s2, keys.s2_dv)
        return DctMotionModel(keys.himg, keys.wimg, d, theta1, theta2)
    basis_s1 = dct_basis_rows(keys.himg, keys.wimg, d, keys.s1_pixels)
    if mode == "C1":
        solver = TwoStageSolver(None, basis_s1, cfg)
        empty = np.zeros(0)
        theta1 = solver.solve(empty, keys.s1_du, keys.noise_sigma).x_hat
        theta2 = solver.solve(empty, keys.s1_dv, keys.noise_sigma).x_hat
    else:
        solver = TwoStageSolver(basis_s2, basis_s1, cfg)
        theta1 = solver.solve(keys.s2_du, keys.s1_du, keys.noise_sigma).x_hat
        theta2 = solver.solve(keys.s2_dv, keys.s1_dv, keys.noise_sigma).x_hat
    return DctMotionModel(keys.himg, keys.wimg, d, theta1, theta2)


def warp_image(img: np.ndarray, u1, u2) -> np.ndarray:
    """Backward warp with bilinear interpolation and edge clamping.

    out(r, c) = img(r - u2(r, c), c - u1(r, c)), sample coordinates clamped
    to the image rectangle.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    u1 = np.asarray(u1, dtype=np.float64).reshape(h, w)
    u2 = np.asarray(u2, dtype=np.float64).reshape(h, w)
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    src_r = np.clip(rr - u2, 0.0, h - 1.0)
    src_c = np.clip(cc - u1, 0.0, w - 1.0)
    r0 = np.floor(src_r).astype(np.int64)
    c0 = np.floor(src_c).astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = src_r - r0
    fc = src_c - c0
    top = img[r0, c0] * (1 - fc) + img[r0, c1] * fc
    bot = img[r1, c0] * (1 - fc) + img[r1, c1] * fc
    return top * (1 - fr) + bot * fr


def nmse(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized mean squared error of b against reference a."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    denom = float(np.sum(a * a))
    if denom == 0.0:
        raise ZeroReference("reference image is identically zero")
    return float(np.sum((a - b) ** 2)) / denom


# --- image and keypoint file formats -------------------------------------

def write_pgm(img: np.ndarray, path) -> None:
    """Binary 8-bit PGM (P5, maxval 255); values clipped to [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    data = np.clip(np.rint(np.clip(img, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM into a [0, 1] float image."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM: magic {tokens[0]!r}")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError(f"only 8-bit PGM supported, maxval={maxval}")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=h * w, offset=pos)
    return np.clip(pixels.reshape(h, w).astype(np.float64) / 255.0, 0.0, 1.0)


def write_ppm_overlay(truth: np.ndarray, recon: np.ndarray, path) -> None:
    """Overlay image: truth in the R channel, reconstruction in G, B zero."""
    truth = np.asarray(truth, dtype=np.float64)
    recon = np.asarray(recon, dtype=np.float64)
    if truth.shape != recon.shape:
        raise ValueError(f"shape mismatch {truth.shape} vs {recon.shape}")
    h, w = truth.shape
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    rgb[:, :, 0] = np.clip(np.rint(np.clip(truth, 0, 1) * 255.0), 0, 255)
    rgb[:, :, 1] = np.clip(np.rint(np.clip(recon, 0, 1) * 255.0), 0, 255)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def keypoints_to_csv(keys: KeypointSet, destination) -> None:
    """Columns: set,row,col,du,dv with set in {S1, S2}."""
    def _write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["set", "row", "col", "du", "dv"])
        for tag, pix, du, dv in (
            ("S1", keys.s1_pixels, keys.s1_du, keys.s1_dv),
            ("S2", keys.s2_pixels, keys.s2_du, keys.s2_dv),
        ):
            for i in range(pix.size):
                writer.writerow([
                    tag, int(pix[i]) // keys.wimg, int(pix[i]) % keys.wimg,
                    f"{du[i]:.17g}", f"{dv[i]:.17g}",
                ])

    if hasattr(destination, "write"):
        _write(destination)
    else:
        with open(destination, "w", newline="") as fh:
            _write(fh)


def keypoints_from_csv(source, himg: int, wimg: int, noise_sigma: float = 0.0) -> KeypointSet:
    """Load a keypoint CSV written by keypoints_to_csv (or by hand)."""
    if hasattr(source, "read"):
        reader = csv.reader(io.StringIO(source.read()))
    else:
        with open(source, newline="") as fh:
            reader = csv.reader(io.StringIO(fh.read()))
    rows = list(reader)
    buckets = {"S1": ([], [], []), "S2": ([], [], [])}
    for row in rows[1:]:
        if not row:
            continue
        tag, r, c, du, dv = row[0], int(row[1]), int(row[2]), float(row[3]), float(row[4])
        if tag not in buckets:
            raise ValueError(f"unknown set tag {tag!r}")
        buckets[tag][0].append(r * wimg + c)
        buckets[tag][1].append(du)
        buckets[tag][2].append(dv)
    return KeypointSet(
        himg=himg, wimg=wimg,
        s1_pixels=buckets["S1"][0], s1_du=buckets["S1"][1], s1_dv=buckets["S1"][2],
        s2_pixels=buckets["S2"][0], s2_du=buckets["S2"][1], s2_dv=buckets["S2"][2],
        noise_sigma=noise_sigma,
    )


# --- self-contained demo ---------------------------------------------------

def make_test_image(himg: int, wimg: int, seed: int = 0) -> np.ndarray:
    """Procedural test image: smooth blobs over faint grid lines."""
    rng = np.random.default_rng((seed, 0xB10B))
    rr, cc = np.meshgrid(np.arange(himg), np.arange(wimg), indexing="ij")
    img = np.full((himg, wimg), 0.15)
    img[rr % 8 == 0] += 0.25
    img[:, ::8] += 0.25
    for _ in range(12):
        r0 = rng.uniform(0, himg)
        c0 = rng.uniform(0, wimg)
        s = rng.uniform(2.0, himg / 6.0)
        amp = rng.uniform(0.3, 0.8)
        img += amp * np.exp(-((rr - r0) ** 2 + (cc - c0) ** 2) / (2 * s * s))
    return np.clip(img, 0.0, 1.0)


def sample_motion_model(
    himg: int, wimg: int, d: int, rng: np.random.Generator, max_displacement: float = 4.0
) -> DctMotionModel:
    """Random smooth field rescaled so the largest displacement magnitude
    equals max_displacement pixels."""
    theta1 = rng.standard_normal(d)
    theta2 = rng.standard_normal(d)
    model = DctMotionModel(himg, wimg, d, theta1, theta2)
    u1, u2 = synth_motion(model)
    peak = max(np.max(np.abs(u1)), np.max(np.abs(u2)))
    scale = max_displacement / peak if peak > 0 else 1.0
    return DctMotionModel(himg, wimg, d, theta1 * scale, theta2 * scale)


def run_demo(
    seed: int = 0,
    out_dir=None,
    himg: int = 64,
    wimg: int = 64,
    d: int = 10,
    p: int = 179,
    m: int = 8,
    k: int = 100,
    noise_sigma: float = 0.05,
    cfg: EstimatorConfig | None = None,
) -> dict:
    """End-to-end alignment demo; returns per-mode NMSE against the
    ground-truth deformed image and optionally writes all artifacts."""
    rng = np.random.default_rng((seed, 0xA114))
    base = make_test_image(himg, wimg, seed)
    model = sample_motion_model(himg, wimg, d, rng)
    u1, u2 = synth_motion(model)
    truth = warp_image(base, u1, u2)
    keys = simulate_keypoints(model, p, m, k, noise_sigma, rng)

    recon = {}
    scores = {}
    for mode in MODES:
        est = estimate_motion(keys, d, cfg, mode)
        v1, v2 = synth_motion(est)
        recon[mode] = warp_image(base, v1, v2)
        scores[mode] = nmse(truth, recon[mode])

    if out_dir is not None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        write_pgm(base, os.path.join(out_dir, "base.pgm"))
        write_pgm(truth, os.path.join(out_dir, "truth_deformed.pgm"))
        for mode in MODES:
            write_pgm(recon[mode], os.path.join(out_dir, f"recon_{mode.lower()}.pgm"))
            write_ppm_overlay(truth, recon[mode],
                              os.path.join(out_dir, f"overlay_{mode.lower()}.ppm"))
        with open(os.path.join(out_dir, "keypoints.csv"), "w", newline="") as fh:
            keypoints_to_csv(keys, fh)
    return scores
