"""Cohort embedding plots: a shared 2-D layout of all feature rows, one
panel per patient overlay, with the healthy reference rendered in every
panel."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from bbt import tables  # noqa: E402
from bbt.errors import DataError  # noqa: E402

from .embedding import fit_umap  # noqa: E402

HEALTHY_LABEL = "healthy"
HEALTHY_STYLE = dict(c="0.7", s=12, label=HEALTHY_LABEL)
OVERLAY_COLORS = ("tab:red", "tab:blue", "tab:orange", "tab:purple", "tab:green")


@dataclass
class EmbeddingResult:
    coords: np.ndarray          # (N, 2)
    cohorts: list[str]          # per row: HEALTHY_LABEL or an overlay label
    recording_ids: list[str]    # per row


def load_cohorts(healthy_csvs: list[Path],
                 overlay_csvs: list[Path]) -> tuple[np.ndarray, list[str], list[str]]:
    matrix, rec_ids = tables.read_features_csv(healthy_csvs)
    cohorts = [HEALTHY_LABEL] * matrix.shape[0]
    blocks = [matrix]
    for path in overlay_csvs:
        m, ids = tables.read_features_csv(path)
        if m.shape[1] != matrix.shape[1]:
            raise DataError(
                f"dimension mismatch: {path} has {m.shape[1]} feature columns, "
                f"healthy set has {matrix.shape[1]}")
        blocks.append(m)
        cohorts.extend([Path(path).stem] * m.shape[0])
        rec_ids.extend(ids)
    return np.vstack(blocks), cohorts, rec_ids


def embed_cohorts(healthy_csvs: list[Path], overlay_csvs: list[Path],
                  n_neighbors: int = 20, min_dist: float = 0.2,
                  seed: int = 7) -> EmbeddingResult:
    matrix, cohorts, rec_ids = load_cohorts(healthy_csvs, overlay_csvs)
    coords = fit_umap(matrix, n_neighbors=n_neighbors, min_dist=min_dist, seed=seed)
    return EmbeddingResult(coords, cohorts, rec_ids)


def write_coords_csv(result: EmbeddingResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("cohort,recording_id,row,x,y\n")
        for i, (cohort, rid) in enumerate(zip(result.cohorts, result.recording_ids)):
            x, y = result.coords[i]
            fh.write(f"{cohort},{rid},{i},{x:.6f},{y:.6f}\n")


def render_panels(result: EmbeddingResult, out_png: Path) -> list[dict]:
    """One panel per overlay cohort (or a single healthy panel); healthy
    points appear in every panel as the common reference. Returns a summary
    of what each panel shows."""
    cohorts = np.asarray(result.cohorts)
    healthy = cohorts == HEALTHY_LABEL
    overlays = [c for c in dict.fromkeys(result.cohorts) if c != HEALTHY_LABEL]
    n_panels = max(1, len(overlays))

    panels = []
    fig, axes = plt.subplots(1, n_panels, figsize=(4.2 * n_panels, 4.0),
                             squeeze=False, sharex=True, sharey=True)
    for i, ax in enumerate(axes[0]):
        ax.scatter(result.coords[healthy, 0], result.coords[healthy, 1],
                   **HEALTHY_STYLE)
        shown = {HEALTHY_LABEL: int(healthy.sum())}
        if overlays:
            sel = cohorts == overlays[i]
            ax.scatter(result.coords[sel, 0], result.coords[sel, 1],
                       c=OVERLAY_COLORS[i % len(OVERLAY_COLORS)], s=12,
                       label=overlays[i])
            ax.set_title(overlays[i])
            shown[overlays[i]] = int(sel.sum())
        else:
            ax.set_title(HEALTHY_LABEL)
        ax.legend(loc="best", fontsize=8)
        ax.set_xlabel("umap-1")
        if i == 0:
            ax.set_ylabel("umap-2")
        panels.append({"title": ax.get_title(), "cohorts": shown})
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return panels


def plot_embedding(healthy_csvs: list[Path], overlay_csvs: list[Path],
                   out_png: Path, coords_out: Path | None = None,
                   n_neighbors: int = 20, min_dist: float = 0.2,
                   seed: int = 7) -> EmbeddingResult:
    result = embed_cohorts(healthy_csvs, overlay_csvs,
                           n_neighbors=n_neighbors, min_dist=min_dist, seed=seed)
    out_png = Path(out_png)
    render_panels(result, out_png)
    if coords_out is None:
        coords_out = out_png.with_suffix(".coords.csv")
    write_coords_csv(result, Path(coords_out))
    return result
